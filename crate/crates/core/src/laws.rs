//! Jump-size laws, their characteristic functions and the closed forms of
//! their n-fold convolution powers.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::grid::{Grid1D, GridFunction};
use crate::quadrature::{adaptive_simpson, gaussian_pdf, norm_inv};

/// Tolerance on the total mass of a finite atom list.
pub const ATOM_MASS_TOLERANCE: f64 = 1e-12;

/// Largest support an exact discrete convolution may produce.
pub const MAX_DISCRETE_SUPPORT: usize = 1_000_000;

/// Mass lost outside the grid before rasterization reports a coverage error.
pub const COVERAGE_TOLERANCE: f64 = 1e-12;

const LAW_KEY: &str = "model.law";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub location: f64,
    pub mass: f64,
}

impl Atom {
    pub fn new(location: f64, mass: f64) -> Self {
        Self { location, mass }
    }
}

/// Distribution of a single jump size.
///
/// `Geometric` lives on `{1, 2, 3, ...}` with mass `p (1-p)^{k-1}`;
/// `Poisson` here is a Poisson-distributed jump *size*, distinct from the
/// counting process that drives the jump times.
#[derive(Debug, Clone, PartialEq)]
pub enum JumpLaw {
    Unit { a: f64 },
    Discrete(Vec<Atom>),
    Geometric { p: f64 },
    Binomial { m: u32, p: f64 },
    Poisson { rate: f64 },
    Exponential { rate: f64 },
    Normal { mean: f64, std: f64 },
}

fn check_probability(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::validation(
            LAW_KEY,
            format!("probability {p} must lie in (0, 1)"),
        ))
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(
            LAW_KEY,
            format!("{name} {v} must be positive and finite"),
        ))
    }
}

impl JumpLaw {
    pub fn discrete(atoms: Vec<Atom>) -> Result<Self> {
        let law = JumpLaw::Discrete(atoms);
        law.validate()?;
        Ok(law)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            JumpLaw::Unit { a } => {
                if a.is_finite() {
                    Ok(())
                } else {
                    Err(Error::validation(LAW_KEY, "unit jump must be finite"))
                }
            }
            JumpLaw::Discrete(atoms) => {
                if atoms.is_empty() {
                    return Err(Error::validation(
                        LAW_KEY,
                        "discrete law needs at least one atom",
                    ));
                }
                for atom in atoms {
                    if !(atom.mass > 0.0) || !atom.location.is_finite() {
                        return Err(Error::validation(
                            LAW_KEY,
                            format!(
                                "atom ({}, {}) must have positive mass and finite location",
                                atom.location, atom.mass
                            ),
                        ));
                    }
                }
                let total: f64 = atoms.iter().map(|a| a.mass).sum();
                if (total - 1.0).abs() > ATOM_MASS_TOLERANCE {
                    return Err(Error::validation(
                        LAW_KEY,
                        format!("atom masses sum to {total}, not 1"),
                    ));
                }
                Ok(())
            }
            JumpLaw::Geometric { p } => check_probability(*p),
            JumpLaw::Binomial { m, p } => {
                if *m == 0 {
                    return Err(Error::validation(
                        LAW_KEY,
                        "binomial trials must be positive",
                    ));
                }
                check_probability(*p)
            }
            JumpLaw::Poisson { rate } => check_positive("poisson rate", *rate),
            JumpLaw::Exponential { rate } => check_positive("exponential rate", *rate),
            JumpLaw::Normal { mean, std } => {
                if !mean.is_finite() {
                    return Err(Error::validation(LAW_KEY, "normal mean must be finite"));
                }
                check_positive("normal std", *std)
            }
        }
    }

    /// `E[e^{iθξ}]`.
    pub fn characteristic_function(&self, theta: f64) -> Complex64 {
        let i = Complex64::i();
        match self {
            JumpLaw::Unit { a } => Complex64::from_polar(1.0, theta * a),
            JumpLaw::Discrete(atoms) => atoms
                .iter()
                .map(|at| Complex64::from_polar(at.mass, theta * at.location))
                .sum(),
            JumpLaw::Geometric { p } => {
                let e = Complex64::from_polar(1.0, theta);
                *p * e / (1.0 - (1.0 - p) * e)
            }
            JumpLaw::Binomial { m, p } => {
                (Complex64::new(1.0 - p, 0.0) + *p * Complex64::from_polar(1.0, theta)).powu(*m)
            }
            JumpLaw::Poisson { rate } => ((Complex64::from_polar(1.0, theta) - 1.0) * *rate).exp(),
            JumpLaw::Exponential { rate } => *rate / (*rate - i * theta),
            JumpLaw::Normal { mean, std } => {
                Complex64::from_polar((-0.5 * std * std * theta * theta).exp(), theta * mean)
            }
        }
    }

    /// `E[e^{uξ}]`, or `None` where it diverges.
    pub fn mgf(&self, u: f64) -> Option<f64> {
        let value = match self {
            JumpLaw::Unit { a } => (u * a).exp(),
            JumpLaw::Discrete(atoms) => atoms
                .iter()
                .map(|at| at.mass * (u * at.location).exp())
                .sum(),
            JumpLaw::Geometric { p } => {
                let q = (1.0 - p) * u.exp();
                if q >= 1.0 {
                    return None;
                }
                p * u.exp() / (1.0 - q)
            }
            JumpLaw::Binomial { m, p } => (1.0 - p + p * u.exp()).powi(*m as i32),
            JumpLaw::Poisson { rate } => (rate * (u.exp() - 1.0)).exp(),
            JumpLaw::Exponential { rate } => {
                if u >= *rate {
                    return None;
                }
                rate / (rate - u)
            }
            JumpLaw::Normal { mean, std } => (u * mean + 0.5 * u * u * std * std).exp(),
        };
        value.is_finite().then_some(value)
    }

    /// First and second raw moments.
    pub fn moments(&self) -> (f64, f64) {
        match self {
            JumpLaw::Unit { a } => (*a, a * a),
            JumpLaw::Discrete(atoms) => atoms.iter().fold((0.0, 0.0), |(m1, m2), at| {
                (
                    m1 + at.mass * at.location,
                    m2 + at.mass * at.location * at.location,
                )
            }),
            JumpLaw::Geometric { p } => (1.0 / p, (2.0 - p) / (p * p)),
            JumpLaw::Binomial { m, p } => {
                let mean = *m as f64 * p;
                (mean, mean * (1.0 - p) + mean * mean)
            }
            JumpLaw::Poisson { rate } => (*rate, rate + rate * rate),
            JumpLaw::Exponential { rate } => (1.0 / rate, 2.0 / (rate * rate)),
            JumpLaw::Normal { mean, std } => (*mean, std * std + mean * mean),
        }
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self, JumpLaw::Exponential { .. } | JumpLaw::Normal { .. })
    }

    /// Smallest `d > 0` such that every atom sits on `d * Z`, when one exists.
    pub fn lattice_span(&self) -> Option<f64> {
        match self {
            JumpLaw::Unit { a } => Some(if *a == 0.0 { 1.0 } else { a.abs() }),
            JumpLaw::Geometric { .. } | JumpLaw::Binomial { .. } | JumpLaw::Poisson { .. } => {
                Some(1.0)
            }
            JumpLaw::Discrete(atoms) => {
                let nonzero: Vec<f64> = atoms
                    .iter()
                    .map(|a| a.location.abs())
                    .filter(|&x| x > 0.0)
                    .collect();
                let Some(smallest) = nonzero.iter().cloned().reduce(f64::min) else {
                    return Some(1.0);
                };
                (1..=64u32).map(|q| smallest / q as f64).find(|&d| {
                    nonzero.iter().all(|&x| {
                        let r = x / d;
                        (r - r.round()).abs() < 1e-9
                    })
                })
            }
            JumpLaw::Exponential { .. } | JumpLaw::Normal { .. } => None,
        }
    }

    /// Lower end of the support (`-inf` when unbounded).
    pub fn support_min(&self) -> f64 {
        match self {
            JumpLaw::Unit { a } => *a,
            JumpLaw::Discrete(atoms) => atoms
                .iter()
                .map(|a| a.location)
                .fold(f64::INFINITY, f64::min),
            JumpLaw::Geometric { .. } => 1.0,
            JumpLaw::Binomial { .. } | JumpLaw::Poisson { .. } | JumpLaw::Exponential { .. } => 0.0,
            JumpLaw::Normal { .. } => f64::NEG_INFINITY,
        }
    }

    /// Atoms of a discrete-type law, enumerated until the remaining mass is
    /// below `tail`. `None` for continuous laws.
    pub fn atoms(&self, tail: f64) -> Option<Vec<Atom>> {
        let sum_law = match self {
            JumpLaw::Exponential { .. } | JumpLaw::Normal { .. } => return None,
            other => convolve_law(other, 1).ok()?,
        };
        sum_law.atoms(tail)
    }

    /// Inverse-CDF draw from a single uniform in (0, 1).
    pub fn sample(&self, u: f64) -> f64 {
        match self {
            JumpLaw::Unit { a } => *a,
            JumpLaw::Discrete(atoms) => {
                let mut cum = 0.0;
                for atom in atoms {
                    cum += atom.mass;
                    if u <= cum {
                        return atom.location;
                    }
                }
                atoms[atoms.len() - 1].location
            }
            JumpLaw::Geometric { p } => {
                let k = ((-u).ln_1p() / (-p).ln_1p()).ceil();
                k.max(1.0)
            }
            JumpLaw::Binomial { m, p } => {
                discrete_inverse(u, 0, |k| ln_binomial_pmf(*m as u64, *p, k).exp(), *m as u64)
            }
            JumpLaw::Poisson { rate } => {
                discrete_inverse(u, 0, |k| ln_poisson_pmf(*rate, k).exp(), u64::MAX)
            }
            JumpLaw::Exponential { rate } => -(-u).ln_1p() / rate,
            JumpLaw::Normal { mean, std } => mean + std * norm_inv(u),
        }
    }

    /// Density of a continuous law; zero for discrete laws.
    pub fn pdf(&self, z: f64) -> f64 {
        match *self {
            JumpLaw::Exponential { rate } => {
                if z < 0.0 {
                    0.0
                } else {
                    rate * (-rate * z).exp()
                }
            }
            JumpLaw::Normal { mean, std } => gaussian_pdf(z, mean, std * std),
            _ => 0.0,
        }
    }

    /// Interval carrying all but a negligible part of a continuous law.
    pub fn effective_support(&self) -> (f64, f64) {
        match *self {
            JumpLaw::Exponential { rate } => (0.0, 60.0 / rate),
            JumpLaw::Normal { mean, std } => (mean - 12.0 * std, mean + 12.0 * std),
            _ => {
                let atoms = self.atoms(1e-17).unwrap_or_default();
                let lo = atoms
                    .iter()
                    .map(|a| a.location)
                    .fold(f64::INFINITY, f64::min);
                let hi = atoms
                    .iter()
                    .map(|a| a.location)
                    .fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            }
        }
    }

    /// `E[g(ξ)]` by atom summation or adaptive quadrature.
    pub fn expect(&self, g: &dyn Fn(f64) -> f64) -> f64 {
        if let Some(atoms) = self.atoms(1e-17) {
            return atoms.iter().map(|a| a.mass * g(a.location)).sum();
        }
        let (lo, hi) = self.effective_support();
        adaptive_simpson(&|z| g(z) * self.pdf(z), lo, hi, 1e-12)
    }

    /// `E[g(ξ)]` for complex-valued `g`.
    pub fn expect_complex(&self, g: &dyn Fn(f64) -> Complex64) -> Complex64 {
        let re = self.expect(&|z| g(z).re);
        let im = self.expect(&|z| g(z).im);
        Complex64::new(re, im)
    }
}

fn discrete_inverse(u: f64, start: u64, pmf: impl Fn(u64) -> f64, last: u64) -> f64 {
    let mut cum = 0.0;
    let mut k = start;
    loop {
        cum += pmf(k);
        if u <= cum || k >= last || k > start + 100_000 {
            return k as f64;
        }
        k += 1;
    }
}

fn ln_choose(n: u64, k: u64) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

fn ln_binomial_pmf(n: u64, p: f64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_choose(n, k) + k as f64 * p.ln() + (n - k) as f64 * (-p).ln_1p()
}

fn ln_poisson_pmf(mean: f64, k: u64) -> f64 {
    k as f64 * mean.ln() - mean - ln_gamma(k as f64 + 1.0)
}

fn ln_negative_binomial_pmf(successes: u64, p: f64, k: u64) -> f64 {
    if k < successes {
        return f64::NEG_INFINITY;
    }
    ln_choose(k - 1, successes - 1)
        + successes as f64 * p.ln()
        + (k - successes) as f64 * (-p).ln_1p()
}

impl fmt::Display for JumpLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JumpLaw::Unit { a } => write!(f, "unit:{a}"),
            JumpLaw::Discrete(atoms) => {
                write!(f, "discrete:")?;
                for (k, a) in atoms.iter().enumerate() {
                    if k > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{}:{}", a.location, a.mass)?;
                }
                Ok(())
            }
            JumpLaw::Geometric { p } => write!(f, "geometric:{p}"),
            JumpLaw::Binomial { m, p } => write!(f, "binomial:{m}:{p}"),
            JumpLaw::Poisson { rate } => write!(f, "poisson:{rate}"),
            JumpLaw::Exponential { rate } => write!(f, "exponential:{rate}"),
            JumpLaw::Normal { mean, std } => write!(f, "normal:{mean}:{std}"),
        }
    }
}

fn parse_number(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::validation(LAW_KEY, format!("`{s}` is not a number")))
}

impl FromStr for JumpLaw {
    type Err = Error;

    /// `unit:a`, `discrete:x1:p1,x2:p2,...`, `geometric:p`, `binomial:m:p`,
    /// `poisson:r`, `exponential:r`, `normal:mu:sigma`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, rest) = s.split_once(':').ok_or_else(|| {
            Error::validation(LAW_KEY, format!("`{s}` is not of the form kind:params"))
        })?;
        let params: Vec<&str> = rest.split(':').collect();
        let want = |n: usize| -> Result<()> {
            if params.len() == n {
                Ok(())
            } else {
                Err(Error::validation(
                    LAW_KEY,
                    format!("`{kind}` takes {n} parameter(s), got `{rest}`"),
                ))
            }
        };
        let law = match kind.trim().to_ascii_lowercase().as_str() {
            "unit" => {
                want(1)?;
                JumpLaw::Unit {
                    a: parse_number(params[0])?,
                }
            }
            "discrete" => {
                let atoms = rest
                    .split(',')
                    .map(|pair| {
                        let (x, p) = pair.split_once(':').ok_or_else(|| {
                            Error::validation(
                                LAW_KEY,
                                format!("atom `{pair}` is not location:mass"),
                            )
                        })?;
                        Ok(Atom::new(parse_number(x)?, parse_number(p)?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                JumpLaw::Discrete(atoms)
            }
            "geometric" => {
                want(1)?;
                JumpLaw::Geometric {
                    p: parse_number(params[0])?,
                }
            }
            "binomial" => {
                want(2)?;
                let m = params[0].trim().parse::<u32>().map_err(|_| {
                    Error::validation(LAW_KEY, format!("`{}` is not a trial count", params[0]))
                })?;
                JumpLaw::Binomial {
                    m,
                    p: parse_number(params[1])?,
                }
            }
            "poisson" => {
                want(1)?;
                JumpLaw::Poisson {
                    rate: parse_number(params[0])?,
                }
            }
            "exponential" => {
                want(1)?;
                JumpLaw::Exponential {
                    rate: parse_number(params[0])?,
                }
            }
            "normal" => {
                want(2)?;
                JumpLaw::Normal {
                    mean: parse_number(params[0])?,
                    std: parse_number(params[1])?,
                }
            }
            other => return Err(Error::validation(LAW_KEY, format!("unknown law `{other}`"))),
        };
        law.validate()?;
        Ok(law)
    }
}

/// The jump transform `c(z)`: relative price change caused by a jump of
/// size `z`.
#[derive(Clone)]
pub enum JumpTransform {
    Identity,
    ExpMinusOne,
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl JumpTransform {
    pub fn apply(&self, z: f64) -> f64 {
        match self {
            JumpTransform::Identity => z,
            JumpTransform::ExpMinusOne => z.exp_m1(),
            JumpTransform::Custom(c) => c(z),
        }
    }

    /// Log-price jump `ln(1 + c(z))`.
    pub fn log_jump(&self, z: f64) -> f64 {
        match self {
            JumpTransform::Identity => z.ln_1p(),
            JumpTransform::ExpMinusOne => z,
            JumpTransform::Custom(c) => c(z).ln_1p(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            JumpTransform::Identity => "identity",
            JumpTransform::ExpMinusOne => "exp_minus_one",
            JumpTransform::Custom(_) => "custom",
        }
    }

    /// Checks `c(z) > -1` on the law's support (limited liability).
    pub fn check_limited_liability(&self, law: &JumpLaw) -> Result<()> {
        let violation = |z: f64| {
            Error::validation(
                "model.transform",
                format!("c({z}) = {} <= -1 on the support of {law}", self.apply(z)),
            )
        };
        match self {
            JumpTransform::ExpMinusOne => Ok(()),
            _ => {
                if let Some(atoms) = law.atoms(1e-17) {
                    return match atoms.iter().find(|a| self.apply(a.location) <= -1.0) {
                        Some(a) => Err(violation(a.location)),
                        None => Ok(()),
                    };
                }
                if let (JumpTransform::Identity, lo) = (self, law.support_min()) {
                    return if lo > -1.0 {
                        Ok(())
                    } else {
                        Err(violation(lo.max(-1e300)))
                    };
                }
                let (lo, hi) = law.effective_support();
                (0..=2000)
                    .map(|k| lo + (hi - lo) * k as f64 / 2000.0)
                    .find(|&z| self.apply(z) <= -1.0)
                    .map_or(Ok(()), |z| Err(violation(z)))
            }
        }
    }
}

impl fmt::Debug for JumpTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for JumpTransform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "identity" => Ok(JumpTransform::Identity),
            "exp_minus_one" => Ok(JumpTransform::ExpMinusOne),
            other => Err(Error::validation(
                "model.transform",
                format!("unknown transform `{other}` (expected identity or exp_minus_one)"),
            )),
        }
    }
}

/// Closed-form law of the sum of `n` i.i.d. jumps.
#[derive(Debug, Clone, PartialEq)]
pub enum SumLaw {
    Dirac {
        at: f64,
    },
    Atoms(Vec<Atom>),
    Binomial {
        trials: u64,
        p: f64,
    },
    Poisson {
        mean: f64,
    },
    /// Number of trials needed for `successes` successes; support `successes..`.
    NegativeBinomial {
        successes: u64,
        p: f64,
    },
    Erlang {
        shape: u64,
        rate: f64,
    },
    Normal {
        mean: f64,
        std: f64,
    },
}

/// Exact law of the `n`-fold convolution power; `n = 0` is the Dirac mass
/// at the origin.
pub fn convolve_law(law: &JumpLaw, n: u64) -> Result<SumLaw> {
    law.validate()?;
    if n == 0 {
        return Ok(SumLaw::Dirac { at: 0.0 });
    }
    let nf = n as f64;
    Ok(match law {
        JumpLaw::Unit { a } => SumLaw::Dirac { at: nf * a },
        JumpLaw::Binomial { m, p } => SumLaw::Binomial {
            trials: n * *m as u64,
            p: *p,
        },
        JumpLaw::Poisson { rate } => SumLaw::Poisson { mean: nf * rate },
        JumpLaw::Exponential { rate } => SumLaw::Erlang {
            shape: n,
            rate: *rate,
        },
        JumpLaw::Normal { mean, std } => SumLaw::Normal {
            mean: nf * mean,
            std: std * nf.sqrt(),
        },
        JumpLaw::Geometric { p } => SumLaw::NegativeBinomial {
            successes: n,
            p: *p,
        },
        JumpLaw::Discrete(atoms) => SumLaw::Atoms(discrete_power(atoms, n)?),
    })
}

fn merge_atoms(mut atoms: Vec<Atom>) -> Vec<Atom> {
    atoms.sort_by(|a, b| a.location.total_cmp(&b.location));
    let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
    for atom in atoms {
        match merged.last_mut() {
            Some(last)
                if (last.location - atom.location).abs()
                    <= 1e-12 * last.location.abs().max(1.0) =>
            {
                last.mass += atom.mass;
            }
            _ => merged.push(atom),
        }
    }
    merged
}

fn discrete_power(base: &[Atom], n: u64) -> Result<Vec<Atom>> {
    let mut current = vec![Atom::new(0.0, 1.0)];
    for _ in 0..n {
        if current.len().saturating_mul(base.len()) > 100 * MAX_DISCRETE_SUPPORT {
            return Err(Error::Resource(format!(
                "discrete convolution would enumerate {} x {} outcome pairs",
                current.len(),
                base.len()
            )));
        }
        let pairs = current
            .iter()
            .flat_map(|a| {
                base.iter()
                    .map(move |b| Atom::new(a.location + b.location, a.mass * b.mass))
            })
            .collect();
        current = merge_atoms(pairs);
        if current.len() > MAX_DISCRETE_SUPPORT {
            return Err(Error::Resource(format!(
                "discrete support of {} atoms exceeds {MAX_DISCRETE_SUPPORT}; use the Fourier route",
                current.len()
            )));
        }
    }
    Ok(current)
}

/// Rasterized law: pointwise samples of the continuous part, atom masses
/// deposited per node, and the mass that fell outside the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub continuous: Vec<f64>,
    pub atom_mass: Vec<f64>,
    pub lost_mass: f64,
}

impl SumLaw {
    pub fn characteristic_function(&self, theta: f64) -> Complex64 {
        let i = Complex64::i();
        match self {
            SumLaw::Dirac { at } => Complex64::from_polar(1.0, theta * at),
            SumLaw::Atoms(atoms) => atoms
                .iter()
                .map(|a| Complex64::from_polar(a.mass, theta * a.location))
                .sum(),
            SumLaw::Binomial { trials, p } => (Complex64::new(1.0 - p, 0.0)
                + *p * Complex64::from_polar(1.0, theta))
            .powf(*trials as f64),
            SumLaw::Poisson { mean } => ((Complex64::from_polar(1.0, theta) - 1.0) * *mean).exp(),
            SumLaw::NegativeBinomial { successes, p } => {
                let e = Complex64::from_polar(1.0, theta);
                (*p * e / (1.0 - (1.0 - p) * e)).powf(*successes as f64)
            }
            SumLaw::Erlang { shape, rate } => (*rate / (*rate - i * theta)).powf(*shape as f64),
            SumLaw::Normal { mean, std } => {
                Complex64::from_polar((-0.5 * std * std * theta * theta).exp(), theta * mean)
            }
        }
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self, SumLaw::Erlang { .. } | SumLaw::Normal { .. })
    }

    /// Density of a continuous law. At the Erlang discontinuity (shape 1,
    /// `x = 0`) the midpoint of the one-sided limits is returned.
    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            SumLaw::Erlang { shape, rate } => {
                if x < 0.0 {
                    0.0
                } else if x == 0.0 {
                    if shape == 1 {
                        0.5 * rate
                    } else {
                        0.0
                    }
                } else {
                    let k = shape as f64;
                    (k * rate.ln() + (k - 1.0) * x.ln() - rate * x - ln_gamma(k)).exp()
                }
            }
            SumLaw::Normal { mean, std } => gaussian_pdf(x, mean, std * std),
            _ => 0.0,
        }
    }

    /// Atom list of a discrete-type law, enumerated until the remaining
    /// mass falls below `tail`. `None` for continuous laws.
    pub fn atoms(&self, tail: f64) -> Option<Vec<Atom>> {
        let lattice = |start: u64, ln_pmf: &dyn Fn(u64) -> f64, last: u64| {
            let mut atoms = Vec::new();
            let mut cum = 0.0;
            let mut prev = 0.0;
            let mut k = start;
            while k <= last && 1.0 - cum > tail {
                let mass = ln_pmf(k).exp();
                if mass > 0.0 {
                    atoms.push(Atom::new(k as f64, mass));
                }
                cum += mass;
                // Past the mode with negligible mass: rounding in `cum` can
                // keep 1 - cum above a tiny tail forever.
                if mass < prev && mass < 1e-25 {
                    break;
                }
                prev = mass;
                k += 1;
            }
            atoms
        };
        match *self {
            SumLaw::Dirac { at } => Some(vec![Atom::new(at, 1.0)]),
            SumLaw::Atoms(ref atoms) => Some(atoms.clone()),
            SumLaw::Binomial { trials, p } => {
                Some(lattice(0, &|k| ln_binomial_pmf(trials, p, k), trials))
            }
            SumLaw::Poisson { mean } => Some(lattice(0, &|k| ln_poisson_pmf(mean, k), u64::MAX)),
            SumLaw::NegativeBinomial { successes, p } => Some(lattice(
                successes,
                &|k| ln_negative_binomial_pmf(successes, p, k),
                u64::MAX,
            )),
            SumLaw::Erlang { .. } | SumLaw::Normal { .. } => None,
        }
    }

    /// Rasterize the law shifted by `offset` onto `grid`.
    pub fn rasterize(&self, grid: &Grid1D, offset: f64) -> Raster {
        let n = grid.len();
        let mut continuous = vec![0.0; n];
        let mut atom_mass = vec![0.0; n];
        let mut lost_mass = 0.0;
        if self.is_continuous() {
            let origin = if grid.is_node(offset) {
                grid.nearest_node(offset)
            } else {
                None
            };
            for (k, value) in continuous.iter_mut().enumerate() {
                let z = if Some(k) == origin {
                    0.0
                } else {
                    grid.node(k) - offset
                };
                *value = self.pdf(z);
            }
            // Mass beyond the grid span, from the law's own tails.
            let inside: f64 = crate::grid::integrate(
                &GridFunction::new(*grid, continuous.clone()).expect("finite samples"),
            );
            lost_mass = (1.0 - inside).max(0.0);
            return Raster {
                continuous,
                atom_mass,
                lost_mass,
            };
        }
        // Infinite-support lattice laws are enumerated up to the grid edge;
        // whatever is not deposited counts as lost.
        let edge = grid.x_max() - offset;
        let mut deposited = 0.0;
        for atom in self.atoms(1e-17).unwrap_or_default() {
            if atom.location > edge + grid.spacing() {
                break;
            }
            if let Some(k) = grid.nearest_node(atom.location + offset) {
                atom_mass[k] += atom.mass;
                deposited += atom.mass;
            }
        }
        lost_mass += (1.0 - deposited).max(0.0);
        Raster {
            continuous,
            atom_mass,
            lost_mass,
        }
    }
}

/// Rasterize a law onto the grid as a single density: continuous parts
/// sampled pointwise, atoms deposited as `mass / spacing` at the nearest node.
pub fn sample_density(law: &SumLaw, grid: &Grid1D) -> Result<GridFunction> {
    let raster = law.rasterize(grid, 0.0);
    if !law.is_continuous() && raster.lost_mass > COVERAGE_TOLERANCE {
        return Err(Error::Coverage(format!(
            "{:.3e} of the atom mass lies outside [{}, {})",
            raster.lost_mass,
            grid.x_min(),
            grid.x_max()
        )));
    }
    let h = grid.spacing();
    let values = raster
        .continuous
        .iter()
        .zip(&raster.atom_mass)
        .map(|(c, a)| c + a / h)
        .collect();
    GridFunction::new(*grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{convolve, integrate};

    fn family() -> Vec<JumpLaw> {
        vec![
            JumpLaw::Unit { a: 0.5 },
            JumpLaw::Discrete(vec![
                Atom::new(-1.0, 0.3),
                Atom::new(0.5, 0.2),
                Atom::new(2.0, 0.5),
            ]),
            JumpLaw::Geometric { p: 0.6 },
            JumpLaw::Binomial { m: 3, p: 0.4 },
            JumpLaw::Poisson { rate: 1.3 },
            JumpLaw::Exponential { rate: 2.0 },
            JumpLaw::Normal {
                mean: -0.2,
                std: 0.7,
            },
        ]
    }

    #[test]
    fn characteristic_function_examples() {
        assert!((JumpLaw::Unit { a: 0.0 }.characteristic_function(3.7) - 1.0).norm() < 1e-15);
        let n = JumpLaw::Normal {
            mean: 0.0,
            std: 1.0,
        }
        .characteristic_function(1.0);
        assert!((n.re - 0.606_530_659_712_633_4).abs() < 1e-15 && n.im.abs() < 1e-15);
        let b = JumpLaw::Binomial { m: 3, p: 0.5 };
        assert!(b.characteristic_function(std::f64::consts::PI).norm() < 1e-15);
        let theta: f64 = 0.8;
        let expected = (Complex64::new(0.5, 0.0) + 0.5 * Complex64::from_polar(1.0, theta)).powu(3);
        assert!((b.characteristic_function(theta) - expected).norm() < 1e-15);
    }

    #[test]
    fn characteristic_functions_match_brute_force_sums() {
        // Independent route: direct sums over the mass functions.
        let theta: f64 = 1.7;
        let geo: Complex64 = (1..400)
            .map(|k| Complex64::from_polar(0.6 * 0.4f64.powi(k - 1), theta * k as f64))
            .sum();
        assert!(
            (JumpLaw::Geometric { p: 0.6 }.characteristic_function(theta) - geo).norm() < 1e-14
        );
        let mut fact = 1.0;
        let poi: Complex64 = (0..80)
            .map(|k| {
                if k > 0 {
                    fact *= k as f64;
                }
                Complex64::from_polar((-1.3f64).exp() * 1.3f64.powi(k) / fact, theta * k as f64)
            })
            .sum();
        assert!(
            (JumpLaw::Poisson { rate: 1.3 }.characteristic_function(theta) - poi).norm() < 1e-14
        );
    }

    #[test]
    fn convolution_power_examples() {
        for law in family() {
            assert_eq!(convolve_law(&law, 0).unwrap(), SumLaw::Dirac { at: 0.0 });
        }
        let erlang = convolve_law(&JumpLaw::Exponential { rate: 2.0 }, 3).unwrap();
        let expected = 8.0 * (-2.0f64).exp() / 2.0;
        assert!((erlang.pdf(1.0) - expected).abs() < 1e-14);
        assert!((expected - 0.541_341_132_946_450_8).abs() < 1e-15);

        let d = JumpLaw::discrete(vec![Atom::new(1.0, 0.5), Atom::new(2.0, 0.5)]).unwrap();
        let SumLaw::Atoms(atoms) = convolve_law(&d, 2).unwrap() else {
            panic!()
        };
        // Brute force over the four outcome pairs.
        let mut brute = std::collections::BTreeMap::new();
        for x in [1, 2] {
            for y in [1, 2] {
                *brute.entry(x + y).or_insert(0.0) += 0.25;
            }
        }
        assert_eq!(atoms.len(), brute.len());
        for (atom, (loc, mass)) in atoms.iter().zip(brute) {
            assert_eq!(atom.location, loc as f64);
            assert!((atom.mass - mass).abs() < 1e-15);
        }
    }

    #[test]
    fn discrete_blow_up_is_a_resource_error() {
        let atoms: Vec<Atom> = (0..100)
            .map(|k| Atom::new((k as f64).sqrt() * std::f64::consts::PI, 0.01))
            .collect();
        let law = JumpLaw::discrete(atoms).unwrap();
        assert!(matches!(convolve_law(&law, 4), Err(Error::Resource(_))));
    }

    #[test]
    fn moments_examples() {
        assert_eq!(JumpLaw::Unit { a: 1.5 }.moments(), (1.5, 2.25));
        assert_eq!(JumpLaw::Exponential { rate: 2.0 }.moments(), (0.5, 0.5));
        assert_eq!(JumpLaw::Binomial { m: 3, p: 0.5 }.moments(), (1.5, 3.0));
        // Cross-check every law against E[X] and E[X^2] by summation/quadrature.
        for law in family() {
            let (m1, m2) = law.moments();
            assert!((law.expect(&|x| x) - m1).abs() < 1e-10, "{law}");
            assert!((law.expect(&|x| x * x) - m2).abs() < 1e-9, "{law}");
        }
    }

    #[test]
    fn sample_density_examples() {
        let grid = Grid1D::new(-20.0, 20.0, 4096).unwrap();
        let dirac = sample_density(&SumLaw::Dirac { at: 0.0 }, &grid).unwrap();
        assert_eq!(dirac.values()[2048], 1.0 / grid.spacing());
        assert_eq!(dirac.values().iter().filter(|v| **v != 0.0).count(), 1);

        let normal = sample_density(
            &SumLaw::Normal {
                mean: 0.0,
                std: 1.0,
            },
            &grid,
        )
        .unwrap();
        assert!((integrate(&normal) - 1.0).abs() < 1e-10);

        let wide = Grid1D::new(-64.0, 64.0, 4096).unwrap();
        let geo = sample_density(
            &convolve_law(&JumpLaw::Geometric { p: 0.5 }, 1).unwrap(),
            &wide,
        )
        .unwrap();
        let h = wide.spacing();
        for k in 1..=10 {
            let node = wide.nearest_node(k as f64).unwrap();
            assert!((geo.values()[node] * h - 0.5f64.powi(k)).abs() < 1e-15);
        }
        let far = Grid1D::new(-2.0, 2.0, 64).unwrap();
        assert!(matches!(
            sample_density(&SumLaw::Dirac { at: 5.0 }, &far),
            Err(Error::Coverage(_))
        ));
    }

    #[test]
    fn parse_and_display() {
        for law in family() {
            let back: JumpLaw = law.to_string().parse().unwrap();
            assert_eq!(back, law);
        }
        assert!(matches!(
            "geometric:1.5".parse::<JumpLaw>(),
            Err(Error::Validation { .. })
        ));
        assert!(matches!(
            "binomial:3:0".parse::<JumpLaw>(),
            Err(Error::Validation { .. })
        ));
        assert!("discrete:1:0.5,2:0.4".parse::<JumpLaw>().is_err());
        assert!("cauchy:1".parse::<JumpLaw>().is_err());
    }

    #[test]
    fn lattice_spans() {
        let d = JumpLaw::Discrete(vec![
            Atom::new(-1.0, 0.3),
            Atom::new(0.5, 0.2),
            Atom::new(2.0, 0.5),
        ]);
        assert_eq!(d.lattice_span(), Some(0.5));
        assert_eq!(JumpLaw::Poisson { rate: 1.0 }.lattice_span(), Some(1.0));
        assert_eq!(JumpLaw::Exponential { rate: 1.0 }.lattice_span(), None);
        let irrational = JumpLaw::Discrete(vec![
            Atom::new(1.0, 0.5),
            Atom::new(std::f64::consts::SQRT_2, 0.5),
        ]);
        assert_eq!(irrational.lattice_span(), None);
    }

    #[test]
    fn inverse_cdf_sampling_reproduces_means() {
        for law in family() {
            let n = 20_000;
            let mean: f64 = (0..n)
                .map(|k| law.sample((k as f64 + 0.5) / n as f64))
                .sum::<f64>()
                / n as f64;
            assert!((mean - law.moments().0).abs() < 5e-3, "{law}: {mean}");
        }
    }

    #[test]
    fn limited_liability() {
        let normal = JumpLaw::Normal {
            mean: 0.0,
            std: 0.1,
        };
        assert!(JumpTransform::Identity
            .check_limited_liability(&normal)
            .is_err());
        assert!(JumpTransform::ExpMinusOne
            .check_limited_liability(&normal)
            .is_ok());
        assert!(JumpTransform::Identity
            .check_limited_liability(&JumpLaw::Unit { a: -1.0 })
            .is_err());
        assert!(JumpTransform::Identity
            .check_limited_liability(&JumpLaw::Exponential { rate: 1.0 })
            .is_ok());
    }

    fn default_grid_for(law: &JumpLaw) -> Grid1D {
        let (m1, m2) = law.moments();
        let half = 16.0 * (5.0 * m2).sqrt() + 5.0 * m1.abs();
        match law.lattice_span() {
            Some(d) => {
                let k = (d * 4096.0 / (2.0 * half)).log2().floor();
                Grid1D::with_spacing(0.0, d / 2f64.powf(k), 4096).unwrap()
            }
            None => Grid1D::centered(0.0, half, 4096).unwrap(),
        }
    }

    #[test]
    fn closed_form_powers_match_grid_convolution() {
        for law in family() {
            if matches!(law, JumpLaw::Exponential { .. }) {
                continue; // discontinuous at 0; covered by the Erlang test in grid
            }
            let grid = default_grid_for(&law);
            let base = sample_density(&convolve_law(&law, 1).unwrap(), &grid).unwrap();
            let mut numeric = base.clone();
            for n in 2..=5u64 {
                numeric = convolve(&numeric, &base).unwrap();
                let closed = sample_density(&convolve_law(&law, n).unwrap(), &grid).unwrap();
                // Compare as masses per node for atomic laws.
                let scale = if law.is_continuous() {
                    1.0
                } else {
                    grid.spacing()
                };
                let err = closed.max_abs_diff(&numeric) * scale;
                assert!(err < 1e-6, "{law} n={n}: {err}");
            }
        }
    }

    #[test]
    fn exponential_powers_match_grid_convolution_to_second_order() {
        let law = JumpLaw::Exponential { rate: 2.0 };
        let grid = default_grid_for(&law);
        let base = sample_density(&convolve_law(&law, 1).unwrap(), &grid).unwrap();
        let origin = grid.nearest_node(0.0).unwrap();
        let mut numeric = base.clone();
        let h = grid.spacing();
        for n in 2..=5u64 {
            numeric = convolve(&numeric, &base).unwrap();
            let closed = sample_density(&convolve_law(&law, n).unwrap(), &grid).unwrap();
            let away = (0..grid.len())
                .filter(|&k| k != origin)
                .map(|k| (closed.values()[k] - numeric.values()[k]).abs())
                .fold(0.0, f64::max);
            assert!(away < 40.0 * h * h, "n={n}: {away}");
        }
    }

    proptest::proptest! {
        #[test]
        fn characteristic_function_of_power_is_power(theta in -50.0f64..50.0, n in 0u64..6, which in 0usize..7) {
            let law = &family()[which];
            let lhs = convolve_law(law, n).unwrap().characteristic_function(theta);
            let rhs = law.characteristic_function(theta).powu(n as u32);
            proptest::prop_assert!((lhs - rhs).norm() < 1e-12);
            proptest::prop_assert!(law.characteristic_function(theta).norm() <= 1.0 + 1e-14);
        }
    }
}
