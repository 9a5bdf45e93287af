//! Split solution of the backward Kolmogorov-Feller terminal-value problem
//! `(∂_s + A_s + B_s) u = 0`, `u(T, ·) = φ`, by Fourier multipliers.
//!
//! Multipliers act on transforms of terminal data and therefore carry the
//! backward sign: `u(s, x) = E[φ(x + D)]` with `D = X_T - X_s`, so
//! `û(s, θ) = m(θ) φ̂(θ)` with `m(θ) = E[e^{-iθD}]`. The law of the
//! displacement `D` itself has transform `conj(m)`; see
//! [`Propagator::transition_density`].

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{
    forward_transform, inverse_transform, project_nyquist, Grid1D, GridFunction, Strictness,
    FORWARD_SIGN,
};
use crate::laws::{JumpLaw, JumpTransform};
use crate::quadrature::{adaptive_simpson, GAUSS_LEGENDRE_4};

/// Tolerance for the adaptive time quadrature of coefficients.
pub const COEFFICIENT_QUADRATURE_TOLERANCE: f64 = 1e-12;

/// Negative lobes of a density below this fraction of its peak are treated
/// as ringing.
pub const POSITIVITY_TOLERANCE: f64 = 1e-8;

/// Number of terms removed from the exponential-jump spectrum before the
/// remainder is inverted numerically.
const SINGULAR_TERMS: usize = 6;

/// A scalar coefficient of time.
#[derive(Clone)]
pub enum Coefficient {
    Constant(f64),
    TimeVarying(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Constant(v) => write!(f, "Constant({v})"),
            Coefficient::TimeVarying(_) => f.write_str("TimeVarying(..)"),
        }
    }
}

impl Coefficient {
    pub fn time_varying(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Coefficient::TimeVarying(Arc::new(f))
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            Coefficient::Constant(v) => *v,
            Coefficient::TimeVarying(f) => f(t),
        }
    }

    /// `∫_s^t c(u) du`.
    pub fn integral(&self, s: f64, t: f64) -> f64 {
        match self {
            Coefficient::Constant(v) => v * (t - s),
            Coefficient::TimeVarying(f) => {
                adaptive_simpson(&|u| f(u), s, t, COEFFICIENT_QUADRATURE_TOLERANCE)
            }
        }
    }

    fn range_on(&self, s: f64, t: f64) -> (f64, f64) {
        match self {
            Coefficient::Constant(v) => (*v, *v),
            Coefficient::TimeVarying(f) => {
                (0..=256).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), k| {
                    let v = f(s + (t - s) * k as f64 / 256.0);
                    if v.is_nan() {
                        (f64::NAN, f64::NAN)
                    } else {
                        (lo.min(v), hi.max(v))
                    }
                })
            }
        }
    }
}

/// Drift `a(t)` and variance rate `A(t)` of the diffusion part, with a
/// uniform ellipticity bound `A(t) >= ellipticity > 0`.
#[derive(Debug, Clone)]
pub struct DiffusionCoefficients {
    drift: Coefficient,
    variance_rate: Coefficient,
    ellipticity: f64,
}

impl DiffusionCoefficients {
    pub fn new(drift: Coefficient, variance_rate: Coefficient, ellipticity: f64) -> Result<Self> {
        if !(ellipticity > 0.0 && ellipticity.is_finite()) {
            return Err(Error::validation(
                "model.sigma",
                format!("ellipticity bound {ellipticity} must be positive"),
            ));
        }
        let c = Self {
            drift,
            variance_rate,
            ellipticity,
        };
        if let (Coefficient::Constant(_), Coefficient::Constant(_)) = (&c.drift, &c.variance_rate) {
            c.validate_on(0.0, 0.0)?;
        }
        Ok(c)
    }

    /// Constant coefficients; the ellipticity bound is the variance rate.
    pub fn constant(drift: f64, variance_rate: f64) -> Result<Self> {
        Self::new(
            Coefficient::Constant(drift),
            Coefficient::Constant(variance_rate),
            variance_rate,
        )
    }

    pub fn drift(&self) -> &Coefficient {
        &self.drift
    }

    pub fn variance_rate(&self) -> &Coefficient {
        &self.variance_rate
    }

    pub fn ellipticity(&self) -> f64 {
        self.ellipticity
    }

    /// Checks finiteness and ellipticity on `[s, t]` by sampling.
    pub fn validate_on(&self, s: f64, t: f64) -> Result<()> {
        let (dlo, dhi) = self.drift.range_on(s, t);
        if !(dlo.is_finite() && dhi.is_finite()) {
            return Err(Error::validation(
                "model.drift",
                "drift is not finite on the horizon",
            ));
        }
        let (vlo, vhi) = self.variance_rate.range_on(s, t);
        if !vhi.is_finite() || !(vlo >= self.ellipticity) {
            return Err(Error::validation(
                "model.sigma",
                format!(
                    "variance rate drops to {vlo} below the ellipticity bound {}",
                    self.ellipticity
                ),
            ));
        }
        Ok(())
    }

    /// `(∫a, ∫A)` over `[s, t]`.
    pub fn integrals(&self, s: f64, t: f64) -> (f64, f64) {
        (self.drift.integral(s, t), self.variance_rate.integral(s, t))
    }
}

/// Compound Poisson jump part: intensity `λ`, jump law `p` and the
/// displacement map `c(z)` applied to each jump.
#[derive(Debug, Clone)]
pub struct JumpSpec {
    intensity: f64,
    law: JumpLaw,
    transform: JumpTransform,
    mean_displacement: f64,
}

impl JumpSpec {
    pub fn new(intensity: f64, law: JumpLaw, transform: JumpTransform) -> Result<Self> {
        if !(intensity > 0.0 && intensity.is_finite()) {
            return Err(Error::validation(
                "model.intensity_q",
                format!("jump intensity {intensity} must be positive and finite"),
            ));
        }
        law.validate()?;
        let (mean, abs_mean) = match &transform {
            JumpTransform::Identity => {
                let (m1, m2) = law.moments();
                (m1, m2.sqrt())
            }
            JumpTransform::ExpMinusOne => match law.mgf(1.0) {
                Some(m) => (m - 1.0, m + 1.0),
                None => (f64::INFINITY, f64::INFINITY),
            },
            JumpTransform::Custom(c) => (law.expect(&|z| c(z)), law.expect(&|z| c(z).abs())),
        };
        if !(abs_mean.is_finite() && mean.is_finite()) {
            return Err(Error::validation(
                "model.transform",
                format!(
                    "∫|c(z)| p(dz) diverges for {} jumps under {law}",
                    transform.name()
                ),
            ));
        }
        Ok(Self {
            intensity,
            law,
            transform,
            mean_displacement: mean,
        })
    }

    pub fn intensity(&self) -> f64 {
        self.intensity
    }

    pub fn law(&self) -> &JumpLaw {
        &self.law
    }

    pub fn transform(&self) -> &JumpTransform {
        &self.transform
    }

    /// `E[c(Z)]`.
    pub fn mean_displacement(&self) -> f64 {
        self.mean_displacement
    }

    /// `E[c(Z)^2]`.
    pub fn second_moment(&self) -> f64 {
        match self.transform {
            JumpTransform::Identity => self.law.moments().1,
            _ => self.law.expect(&|z| self.transform.apply(z).powi(2)),
        }
    }

    /// `E[e^{iθ c(Z)}]` at each `θ`.
    pub fn displacement_cf(&self, thetas: &[f64]) -> Vec<Complex64> {
        if let JumpTransform::Identity = self.transform {
            return thetas
                .iter()
                .map(|&t| self.law.characteristic_function(t))
                .collect();
        }
        if let Some(atoms) = self.law.atoms(1e-17) {
            let points: Vec<(f64, f64)> = atoms
                .iter()
                .map(|a| (self.transform.apply(a.location), a.mass))
                .collect();
            return thetas.iter().map(|&t| cf_from_points(&points, t)).collect();
        }
        let theta_max = thetas.iter().fold(0.0_f64, |m, t| m.max(t.abs()));
        let points = self.quadrature_rule(theta_max);
        thetas
            .par_iter()
            .map(|&t| cf_from_points(&points, t))
            .collect()
    }

    /// Gauss-Legendre rule in `z` whose panels keep the phase `θ c(z)`
    /// within half a radian for `|θ| <= theta_max`.
    fn quadrature_rule(&self, theta_max: f64) -> Vec<(f64, f64)> {
        let (lo, hi) = self.law.effective_support();
        let probes = 4096;
        let variation: f64 = (0..probes)
            .map(|k| {
                let a = lo + (hi - lo) * k as f64 / probes as f64;
                let b = lo + (hi - lo) * (k + 1) as f64 / probes as f64;
                (self.transform.apply(b) - self.transform.apply(a)).abs()
            })
            .sum();
        let panels = ((theta_max * variation / 0.5).ceil() as usize).clamp(2048, 1 << 20);
        let width = (hi - lo) / panels as f64;
        let mut points = Vec::with_capacity(4 * panels);
        for k in 0..panels {
            let mid = lo + (k as f64 + 0.5) * width;
            for (node, weight) in GAUSS_LEGENDRE_4 {
                let z = mid + 0.5 * width * node;
                let w = 0.5 * width * weight * self.law.pdf(z);
                if w > 0.0 {
                    points.push((self.transform.apply(z), w));
                }
            }
        }
        // Renormalize away the truncated tails so the rule conserves mass.
        let total: f64 = points.iter().map(|p| p.1).sum();
        points.iter_mut().for_each(|p| p.1 /= total);
        points
    }

    /// Forward jump exponent `ψ(θ) = λ(E[e^{iθc}] - 1 - iθE[c]·[compensated])`.
    pub fn exponent(&self, thetas: &[f64], compensated: bool) -> Vec<Complex64> {
        let comp = if compensated {
            self.mean_displacement
        } else {
            0.0
        };
        self.displacement_cf(thetas)
            .into_iter()
            .zip(thetas)
            .map(|(cf, &t)| {
                self.intensity * (cf - 1.0 - Complex64::new(0.0, FORWARD_SIGN * t * comp))
            })
            .collect()
    }
}

fn cf_from_points(points: &[(f64, f64)], theta: f64) -> Complex64 {
    points
        .iter()
        .map(|&(y, w)| Complex64::from_polar(w, FORWARD_SIGN * theta * y))
        .sum()
}

/// Time interval `[start, end]` of a propagator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Horizon {
    pub start: f64,
    pub end: f64,
}

impl Horizon {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        if !(start.is_finite() && end.is_finite()) {
            return Err(Error::Domain(format!(
                "horizon [{start}, {end}] is not finite"
            )));
        }
        if start > end {
            return Err(Error::Domain(format!(
                "start time {start} exceeds end time {end}"
            )));
        }
        Ok(Self { start, end })
    }

    pub fn length(&self) -> f64 {
        self.end - self.start
    }
}

/// Fourier-multiplier solution operator over a horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct Propagator {
    grid: Grid1D,
    multiplier: Vec<Complex64>,
    horizon: Horizon,
}

impl Propagator {
    pub fn identity(grid: Grid1D, horizon: Horizon) -> Self {
        Self {
            grid,
            multiplier: vec![Complex64::new(1.0, 0.0); grid.len()],
            horizon,
        }
    }

    /// Wraps a precomputed multiplier in FFT order.
    pub fn from_multiplier(
        grid: Grid1D,
        horizon: Horizon,
        multiplier: Vec<Complex64>,
    ) -> Result<Self> {
        if multiplier.len() != grid.len() {
            return Err(Error::Config(format!(
                "multiplier of length {} for a grid of {} nodes",
                multiplier.len(),
                grid.len()
            )));
        }
        if multiplier.iter().any(|m| !m.is_finite()) {
            return Err(Error::Numerical("multiplier has non-finite entries".into()));
        }
        Ok(Self {
            grid,
            multiplier,
            horizon,
        })
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn multiplier(&self) -> &[Complex64] {
        &self.multiplier
    }

    pub fn horizon(&self) -> Horizon {
        self.horizon
    }

    pub fn max_abs_diff(&self, other: &Propagator) -> f64 {
        self.multiplier
            .iter()
            .zip(&other.multiplier)
            .fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }

    /// Density of `x + D` on the grid, where `D` is the displacement over
    /// the horizon: the inverse transform of `e^{iθx} conj(m(θ))`.
    pub fn transition_density(&self, x: f64) -> Result<GridFunction> {
        let mut spectrum: Vec<Complex64> = self
            .grid
            .frequencies()
            .iter()
            .zip(&self.multiplier)
            .map(|(&t, m)| Complex64::from_polar(1.0, FORWARD_SIGN * t * x) * m.conj())
            .collect();
        project_nyquist(&mut spectrum, &self.grid);
        inverse_transform(&spectrum, &self.grid)
    }
}

fn horizon_for(s: f64, t: f64) -> Result<Horizon> {
    Horizon::new(s, t)
}

/// Backward diffusion multiplier `exp{-½∫A θ² - i∫a θ}`.
pub fn diffusion_propagator(
    c: &DiffusionCoefficients,
    s: f64,
    t: f64,
    grid: &Grid1D,
) -> Result<Propagator> {
    direct_propagator(Some(c), None, s, t, grid, false)
}

/// Backward jump multiplier `exp{(T - s) ψ(-θ)}`.
pub fn jump_propagator(
    j: &JumpSpec,
    s: f64,
    t: f64,
    grid: &Grid1D,
    compensated: bool,
) -> Result<Propagator> {
    direct_propagator(None, Some(j), s, t, grid, compensated)
}

/// Multiplier of the full generator computed in one exponent,
/// `exp{-½∫A θ² - i∫a θ + (T - s) ψ(-θ)}`. Jump exponents are skipped where
/// the diffusion factor alone underflows.
pub fn direct_propagator(
    c: Option<&DiffusionCoefficients>,
    j: Option<&JumpSpec>,
    s: f64,
    t: f64,
    grid: &Grid1D,
    compensated: bool,
) -> Result<Propagator> {
    let horizon = horizon_for(s, t)?;
    if horizon.length() == 0.0 {
        return Ok(Propagator::identity(*grid, horizon));
    }
    let thetas = grid.frequencies();
    let mut log_m: Vec<Complex64> = match c {
        Some(c) => {
            c.validate_on(s, t)?;
            let (drift, variance) = c.integrals(s, t);
            thetas
                .iter()
                .map(|&th| Complex64::new(-0.5 * variance * th * th, -FORWARD_SIGN * drift * th))
                .collect()
        }
        None => vec![Complex64::new(0.0, 0.0); thetas.len()],
    };
    if let Some(j) = j {
        let live: Vec<usize> = (0..thetas.len())
            .filter(|&k| log_m[k].re > -745.0)
            .collect();
        // ψ(-θ) is the backward symbol.
        let neg: Vec<f64> = live.iter().map(|&k| -thetas[k]).collect();
        let psi = j.exponent(&neg, compensated);
        let tau = horizon.length();
        for (k, p) in live.into_iter().zip(psi) {
            log_m[k] += tau * p;
        }
    }
    let multiplier = log_m
        .into_iter()
        .map(|z| {
            if z.re < -745.0 {
                Complex64::new(0.0, 0.0)
            } else {
                z.exp()
            }
        })
        .collect();
    Propagator::from_multiplier(*grid, horizon, multiplier)
}

/// Product of two propagators over the same grid and horizon (the split
/// `A + B` generator).
pub fn compose(p1: &Propagator, p2: &Propagator) -> Result<Propagator> {
    p1.grid.ensure_same(&p2.grid)?;
    if p1.horizon != p2.horizon {
        return Err(Error::Config(format!(
            "horizon mismatch: {:?} vs {:?}",
            p1.horizon, p2.horizon
        )));
    }
    let multiplier = p1
        .multiplier
        .iter()
        .zip(&p2.multiplier)
        .map(|(a, b)| a * b)
        .collect();
    Propagator::from_multiplier(p1.grid, p1.horizon, multiplier)
}

/// Propagator over `[s, T]` from propagators over `[s, u]` and `[u, T]`.
pub fn chain(earlier: &Propagator, later: &Propagator) -> Result<Propagator> {
    earlier.grid.ensure_same(&later.grid)?;
    if (earlier.horizon.end - later.horizon.start).abs()
        > 1e-14 * later.horizon.start.abs().max(1.0)
    {
        return Err(Error::Config(format!(
            "horizons {:?} and {:?} are not adjacent",
            earlier.horizon, later.horizon
        )));
    }
    let horizon = Horizon::new(earlier.horizon.start, later.horizon.end)?;
    let multiplier = earlier
        .multiplier
        .iter()
        .zip(&later.multiplier)
        .map(|(a, b)| a * b)
        .collect();
    Propagator::from_multiplier(earlier.grid, horizon, multiplier)
}

/// `u(s, ·)` from terminal data `φ`, rejecting data that does not decay at
/// the grid edges.
pub fn solve_terminal(p: &Propagator, phi: &GridFunction) -> Result<GridFunction> {
    solve_terminal_with(p, phi, Strictness::Strict)
}

pub fn solve_terminal_with(
    p: &Propagator,
    phi: &GridFunction,
    strictness: Strictness,
) -> Result<GridFunction> {
    p.grid.ensure_same(phi.grid())?;
    if strictness == Strictness::Strict {
        phi.check_edges()?;
    }
    if p.multiplier.iter().all(|m| *m == Complex64::new(1.0, 0.0)) {
        return Ok(phi.clone());
    }
    let mut spectrum: Vec<Complex64> = forward_transform(phi)
        .into_iter()
        .zip(&p.multiplier)
        .map(|(f, m)| f * m)
        .collect();
    project_nyquist(&mut spectrum, &p.grid);
    inverse_transform(&spectrum, &p.grid)
}

/// Flags negative lobes deeper than [`POSITIVITY_TOLERANCE`] of the peak.
pub fn check_positivity(f: &GridFunction) -> Result<()> {
    let max = f.values().iter().cloned().fold(0.0, f64::max);
    let min = f.values().iter().cloned().fold(0.0, f64::min);
    if min < -POSITIVITY_TOLERANCE * max {
        Err(Error::Numerical(format!(
            "density undershoots to {min:.3e} against a peak of {max:.3e}"
        )))
    } else {
        Ok(())
    }
}

/// Density of `x + D` for the pure-jump displacement `D` over `[s, t]`,
/// inverted from the jump multiplier.
///
/// The no-jump atom `e^{-λτ}` is removed from the spectrum and deposited
/// as `mass / spacing` at the node nearest its location. For exponential
/// jumps the leading `u^k`, `u = 1/(2r - iθ)` terms of the spectrum are
/// removed as well and added back in closed form, so the remainder that
/// goes through the FFT is smooth across the jump discontinuity.
pub fn jump_transition_density(
    j: &JumpSpec,
    s: f64,
    t: f64,
    x: f64,
    grid: &Grid1D,
    compensated: bool,
) -> Result<GridFunction> {
    let horizon = horizon_for(s, t)?;
    let tau = horizon.length();
    let m = j.intensity * tau;
    let drift = if compensated {
        -m * j.mean_displacement
    } else {
        0.0
    };
    let origin = x + drift;
    let atom = (-m).exp();
    let atom_node = grid.nearest_node(origin).ok_or_else(|| {
        Error::Coverage(format!("no-jump atom at {origin} lies outside the grid"))
    })?;
    let thetas = grid.frequencies();
    let psi = j.exponent(&thetas, compensated);
    let singular = match (&j.transform, &j.law) {
        (JumpTransform::Identity, JumpLaw::Exponential { rate }) => {
            Some(exponential_singular_part(*rate, m))
        }
        _ => None,
    };
    let mut spectrum: Vec<Complex64> = thetas
        .iter()
        .zip(&psi)
        .map(|(&th, p)| {
            let phase = Complex64::from_polar(1.0, FORWARD_SIGN * th * origin);
            // exp(τψ) carries the compensator drift; strip it into `phase`.
            let cf = (tau * p - Complex64::new(0.0, FORWARD_SIGN * th * drift)).exp();
            let mut rest = cf - atom;
            if let Some(sp) = &singular {
                rest -= sp.spectrum(th);
            }
            phase * rest
        })
        .collect();
    project_nyquist(&mut spectrum, grid);
    let remainder = inverse_transform(&spectrum, grid)?;
    let h = grid.spacing();
    let mut values = remainder.into_values();
    values[atom_node] += atom / h;
    if let Some(sp) = &singular {
        for (k, v) in values.iter_mut().enumerate() {
            let y = if k == atom_node && grid.is_node(origin) {
                origin
            } else {
                grid.node(k)
            };
            *v += sp.density(y - origin);
        }
    }
    GridFunction::new(*grid, values)
}

/// `e^{-m} Σ_k c_k u^k` with `u = 1/(β - iθ)`, the leading part of the
/// compound Poisson transform `exp(m(r/(r - iθ) - 1))` minus its atom.
struct ExponentialSingularPart {
    beta: f64,
    coefficients: Vec<f64>,
}

fn exponential_singular_part(rate: f64, m: f64) -> ExponentialSingularPart {
    let beta = 2.0 * rate;
    // r/(r - iθ) = v(u) = Σ_k r (β - r)^{k-1} u^k.
    let v: Vec<f64> = (0..=SINGULAR_TERMS)
        .map(|k| {
            if k == 0 {
                0.0
            } else {
                rate * (beta - rate).powi(k as i32 - 1)
            }
        })
        .collect();
    // Power series of exp(m v(u)): k e_k = m Σ_j j v_j e_{k-j}.
    let mut e = vec![1.0; SINGULAR_TERMS + 1];
    for k in 1..=SINGULAR_TERMS {
        e[k] = m * (1..=k).map(|jj| jj as f64 * v[jj] * e[k - jj]).sum::<f64>() / k as f64;
    }
    let scale = (-m).exp();
    ExponentialSingularPart {
        beta,
        coefficients: e[1..].iter().map(|c| scale * c).collect(),
    }
}

impl ExponentialSingularPart {
    fn spectrum(&self, theta: f64) -> Complex64 {
        let u = Complex64::new(1.0, 0.0) / Complex64::new(self.beta, -FORWARD_SIGN * theta);
        let mut power = u;
        let mut total = Complex64::new(0.0, 0.0);
        for c in &self.coefficients {
            total += c * power;
            power *= u;
        }
        total
    }

    /// Inverse of [`Self::spectrum`] at offset `z`, the midpoint of the
    /// one-sided limits at `z = 0`.
    fn density(&self, z: f64) -> f64 {
        if z < 0.0 {
            return 0.0;
        }
        if z == 0.0 {
            return 0.5 * self.coefficients[0];
        }
        let decay = (-self.beta * z).exp();
        let mut term = decay;
        let mut total = 0.0;
        for (k, c) in self.coefficients.iter().enumerate() {
            if k > 0 {
                term *= z / k as f64;
            }
            total += c * term;
        }
        total
    }
}
