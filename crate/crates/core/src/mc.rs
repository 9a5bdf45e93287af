//! Monte Carlo simulation of the geometric Lévy dynamics.
//!
//! Terminal values are simulated exactly (Gaussian plus compound Poisson).
//! Barrier paths use a uniform step grid with the jump times inserted, and
//! an optional Brownian-bridge survival weight on every diffusion segment.
//! Per-path draws come from [`PathStream`], and path results are summed in
//! fixed blocks with compensated summation, so serial and parallel runs are
//! bit-identical.

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{DiscreteCDF, Poisson};

use crate::error::{Error, Result};
use crate::model::{ContractKind, LevyModel, OptionContract};
use crate::quadrature::composite_simpson;
use crate::rng::PathStream;
use crate::solver::Coefficient;

/// Paths per accumulation block.
pub const BLOCK: usize = 4096;

/// Bridge exponents above this leave the survival weight at exactly 1.
pub const BRIDGE_EXPONENT_CUTOFF: f64 = 40.0;

/// Largest path count accepted by [`simulate_terminal`], which keeps every
/// terminal value in memory.
pub const MAX_STORED_PATHS: usize = 1 << 28;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub bridge_correction: bool,
    /// Spread path blocks over the rayon pool. Results do not depend on it.
    pub parallel: bool,
}

impl McConfig {
    pub fn new(n_paths: usize, n_steps: usize, seed: u64) -> Result<Self> {
        let c = Self {
            n_paths,
            n_steps,
            seed,
            bridge_correction: true,
            parallel: true,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::validation(
                "mc.n_paths",
                "at least one path is required",
            ));
        }
        if self.n_steps == 0 {
            return Err(Error::validation(
                "mc.n_steps",
                "at least one step is required",
            ));
        }
        Ok(())
    }
}

/// Estimate with its standard error; the error is NaN for a single path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    s1: Kahan,
    s2: Kahan,
}

fn block_moments(
    seed: u64,
    block: usize,
    n_paths: usize,
    f: &(dyn Fn(&mut PathStream) -> f64 + Sync),
) -> Moments {
    let start = block * BLOCK;
    let end = (start + BLOCK).min(n_paths);
    let mut m = Moments::default();
    for path in start..end {
        let mut stream = PathStream::new(seed, path as u64);
        let v = f(&mut stream);
        m.s1.add(v);
        m.s2.add(v * v);
    }
    m
}

/// Mean and standard error of `f` over `cfg.n_paths` independent streams.
pub fn estimate(cfg: &McConfig, f: &(dyn Fn(&mut PathStream) -> f64 + Sync)) -> Result<McEstimate> {
    cfg.validate()?;
    let blocks = cfg.n_paths.div_ceil(BLOCK);
    let parts: Vec<Moments> = if cfg.parallel {
        (0..blocks)
            .into_par_iter()
            .map(|b| block_moments(cfg.seed, b, cfg.n_paths, f))
            .collect()
    } else {
        (0..blocks)
            .map(|b| block_moments(cfg.seed, b, cfg.n_paths, f))
            .collect()
    };
    let (mut s1, mut s2) = (Kahan::default(), Kahan::default());
    for p in &parts {
        s1.add(p.s1.sum);
        s2.add(p.s2.sum);
    }
    let n = cfg.n_paths as f64;
    let mean = s1.sum / n;
    let std_error = if cfg.n_paths > 1 {
        let var = ((s2.sum - n * mean * mean) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    } else {
        f64::NAN
    };
    Ok(finish(mean, std_error, cfg))
}

fn finish(estimate: f64, std_error: f64, cfg: &McConfig) -> McEstimate {
    McEstimate {
        estimate,
        std_error,
        n_paths: cfg.n_paths,
        seed: cfg.seed,
    }
}

/// Poisson draw by inversion of a single uniform.
fn poisson_count(mean: f64, u: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    if mean < 500.0 {
        let mut k = 0usize;
        let mut p = (-mean).exp();
        let mut cum = p;
        while u > cum && k < 100_000 {
            k += 1;
            p *= mean / k as f64;
            cum += p;
            if p == 0.0 && k as f64 > mean {
                break;
            }
        }
        k
    } else {
        Poisson::new(mean)
            .map(|d| d.inverse_cdf(u) as usize)
            .unwrap_or(mean as usize)
    }
}

/// Precomputed per-model quantities for path generation.
struct Dynamics<'a> {
    model: &'a LevyModel,
    start: f64,
    jump_drift: f64,
    constant_variance: Option<f64>,
}

impl<'a> Dynamics<'a> {
    fn new(model: &'a LevyModel, start: f64, tau: f64) -> Result<Self> {
        model.validate_on(start, start + tau)?;
        let jump_drift = if model.intensity_q > 0.0 {
            model.intensity_q * model.kappa()?
        } else {
            0.0
        };
        let constant_variance = match model.sigma() {
            Coefficient::Constant(s) => Some(s * s),
            Coefficient::TimeVarying(_) => None,
        };
        Ok(Self {
            model,
            start,
            jump_drift,
            constant_variance,
        })
    }

    /// Log drift and variance of the diffusion over `[a, b]`, offsets from
    /// the start time.
    fn segment(&self, a: f64, b: f64) -> (f64, f64) {
        let dt = b - a;
        let var = match self.constant_variance {
            Some(v) => v * dt,
            None => {
                let sigma = self.model.sigma();
                composite_simpson(
                    &|u| sigma.value(u).powi(2),
                    self.start + a,
                    self.start + b,
                    2,
                )
            }
        };
        ((self.model.rate - self.jump_drift) * dt - 0.5 * var, var)
    }

    fn log_jump(&self, u: f64) -> f64 {
        self.model.transform.log_jump(self.model.law_q.sample(u))
    }
}

fn terminal_log_price(
    d: &Dynamics<'_>,
    whole: (f64, f64),
    mean_jumps: f64,
    stream: &mut PathStream,
) -> f64 {
    let n = poisson_count(mean_jumps, stream.uniform());
    let mut x = d.model.spot.ln() + whole.0;
    for _ in 0..n {
        x += d.log_jump(stream.uniform());
    }
    x + whole.1.sqrt() * stream.normal()
}

/// Exact terminal log-prices `ln S_τ` for paths started at time 0.
pub fn simulate_terminal(model: &LevyModel, tau: f64, cfg: &McConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if !(tau > 0.0) {
        return Err(Error::Domain(format!("horizon {tau} must be positive")));
    }
    if cfg.n_paths > MAX_STORED_PATHS {
        return Err(Error::Resource(format!(
            "{} terminal values exceed the in-memory limit of {MAX_STORED_PATHS}",
            cfg.n_paths
        )));
    }
    let d = Dynamics::new(model, 0.0, tau)?;
    let whole = (
        model.integrated_log_drift(0.0, tau)?,
        model.integrated_variance(0.0, tau),
    );
    let mean_jumps = model.intensity_q * tau;
    let run = |path: usize| {
        let mut s = PathStream::new(cfg.seed, path as u64);
        terminal_log_price(&d, whole, mean_jumps, &mut s)
    };
    Ok(if cfg.parallel {
        (0..cfg.n_paths).into_par_iter().map(run).collect()
    } else {
        (0..cfg.n_paths).map(run).collect()
    })
}

/// Discounted terminal payoff of a European-style contract from exact
/// terminal draws.
pub fn terminal_estimate(
    model: &LevyModel,
    contract: &OptionContract,
    cfg: &McConfig,
) -> Result<McEstimate> {
    contract.validate()?;
    if let ContractKind::DownAndOutCall { .. } = contract.kind {
        return Err(Error::Capability(
            "barrier contracts need path simulation (simulate_barrier)".into(),
        ));
    }
    let (t, maturity) = (contract.valuation_time, contract.maturity);
    let d = Dynamics::new(model, t, maturity - t)?;
    let whole = (
        model.integrated_log_drift(t, maturity)?,
        model.integrated_variance(t, maturity),
    );
    let mean_jumps = model.intensity_q * (maturity - t);
    let discount = (-model.rate * (maturity - t)).exp();
    estimate(cfg, &|s| {
        discount * contract.payoff(terminal_log_price(&d, whole, mean_jumps, s).exp())
    })
}

/// Estimate of `e^{-rτ} E[S_τ]`, which equals `S` under the pricing
/// measure.
pub fn martingale_estimate(model: &LevyModel, tau: f64, cfg: &McConfig) -> Result<McEstimate> {
    if !(tau > 0.0) {
        return Err(Error::Domain(format!("horizon {tau} must be positive")));
    }
    let d = Dynamics::new(model, 0.0, tau)?;
    let whole = (
        model.integrated_log_drift(0.0, tau)?,
        model.integrated_variance(0.0, tau),
    );
    let mean_jumps = model.intensity_q * tau;
    let discount = (-model.rate * tau).exp();
    estimate(cfg, &|s| {
        discount * terminal_log_price(&d, whole, mean_jumps, s).exp()
    })
}

/// One path on the jump-adapted grid. Returns the terminal log-price and
/// the survival weight (0 once the barrier is hit).
fn barrier_path(
    d: &Dynamics<'_>,
    tau: f64,
    cfg: &McConfig,
    log_barrier: f64,
    mean_jumps: f64,
    stream: &mut PathStream,
) -> (f64, f64) {
    let n = poisson_count(mean_jumps, stream.uniform());
    let mut jump_times: Vec<f64> = (0..n).map(|_| tau * stream.uniform()).collect();
    jump_times.sort_by(f64::total_cmp);
    let jump_sizes: Vec<f64> = (0..n).map(|_| d.log_jump(stream.uniform())).collect();
    let dt = tau / cfg.n_steps as f64;
    let mut x = d.model.spot.ln();
    let mut weight = 1.0;
    let mut now = 0.0;
    let mut next_jump = 0;
    let mut step = 1;
    while step <= cfg.n_steps {
        let node = if step == cfg.n_steps {
            tau
        } else {
            step as f64 * dt
        };
        let jump_here = next_jump < n && jump_times[next_jump] < node;
        let end = if jump_here {
            jump_times[next_jump]
        } else {
            node
        };
        if end > now {
            let (drift, var) = d.segment(now, end);
            let next = x + drift + var.sqrt() * stream.normal();
            if next <= log_barrier {
                return (next, 0.0);
            }
            if cfg.bridge_correction && var > 0.0 {
                let e = 2.0 * (x - log_barrier) * (next - log_barrier) / var;
                if e < BRIDGE_EXPONENT_CUTOFF {
                    weight *= -(-e).exp_m1();
                }
            }
            x = next;
            now = end;
        }
        if jump_here {
            x += jump_sizes[next_jump];
            next_jump += 1;
            if x <= log_barrier {
                return (x, 0.0);
            }
        } else {
            step += 1;
        }
    }
    (x, weight)
}

/// Path-simulated discounted payoff. A down-and-out contract is monitored
/// at every step and jump time (and between steps with the bridge
/// correction); other contracts ignore the path.
pub fn simulate_paths(
    model: &LevyModel,
    contract: &OptionContract,
    cfg: &McConfig,
) -> Result<McEstimate> {
    contract.validate()?;
    cfg.validate()?;
    let tau = contract.tau();
    let d = Dynamics::new(model, contract.valuation_time, tau)?;
    let log_barrier = match contract.kind {
        ContractKind::DownAndOutCall { barrier } => {
            if barrier >= model.spot {
                return Ok(finish(0.0, 0.0, cfg));
            }
            barrier.ln()
        }
        _ => f64::NEG_INFINITY,
    };
    let mean_jumps = model.intensity_q * tau;
    let discount = (-model.rate * tau).exp();
    estimate(cfg, &|s| {
        let (x, w) = barrier_path(&d, tau, cfg, log_barrier, mean_jumps, s);
        if w == 0.0 {
            0.0
        } else {
            discount * w * contract.payoff(x.exp())
        }
    })
}

/// Down-and-out call by path simulation.
pub fn simulate_barrier(
    model: &LevyModel,
    contract: &OptionContract,
    cfg: &McConfig,
) -> Result<McEstimate> {
    match contract.kind {
        ContractKind::DownAndOutCall { .. } => simulate_paths(model, contract, cfg),
        _ => Err(Error::Capability(
            "simulate_barrier needs a down-and-out contract".into(),
        )),
    }
}

/// Monte Carlo price: exact terminal draws for European payoffs, path
/// simulation for barriers.
pub fn price_mc(
    model: &LevyModel,
    contract: &OptionContract,
    cfg: &McConfig,
) -> Result<McEstimate> {
    match contract.kind {
        ContractKind::DownAndOutCall { .. } => simulate_barrier(model, contract, cfg),
        _ => terminal_estimate(model, contract, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{
        default_jump_diffusion_grid, jump_diffusion_density, JumpDiffusionParams, SeriesTruncation,
    };
    use crate::laws::{JumpLaw, JumpTransform};
    use crate::pricing::{price_down_and_out_call, price_european_series};
    use proptest::prelude::*;

    fn merton() -> LevyModel {
        LevyModel::new(
            100.0,
            0.05,
            0.2,
            1.0,
            JumpLaw::Normal {
                mean: -0.1,
                std: 0.15,
            },
            JumpTransform::ExpMinusOne,
        )
        .unwrap()
    }

    fn call() -> OptionContract {
        OptionContract::new(ContractKind::EuropeanCall, 100.0, 1.0, 0.0).unwrap()
    }

    #[test]
    fn deterministic_limit() {
        let m = LevyModel::black_scholes(100.0, 0.05, 1e-12).unwrap();
        let cfg = McConfig::new(16, 1, 3).unwrap();
        for x in simulate_terminal(&m, 1.0, &cfg).unwrap() {
            assert!((x - (100f64.ln() + 0.05)).abs() < 1e-10);
        }
    }

    #[test]
    fn serial_and_parallel_identical() {
        let mut cfg = McConfig::new(10_000, 8, 11).unwrap();
        let a = terminal_estimate(&merton(), &call(), &cfg).unwrap();
        let b = simulate_barrier(
            &merton(),
            &OptionContract::new(
                ContractKind::DownAndOutCall { barrier: 90.0 },
                100.0,
                1.0,
                0.0,
            )
            .unwrap(),
            &cfg,
        )
        .unwrap();
        cfg.parallel = false;
        assert_eq!(a, terminal_estimate(&merton(), &call(), &cfg).unwrap());
        assert_eq!(
            b,
            simulate_barrier(
                &merton(),
                &OptionContract::new(
                    ContractKind::DownAndOutCall { barrier: 90.0 },
                    100.0,
                    1.0,
                    0.0
                )
                .unwrap(),
                &cfg
            )
            .unwrap()
        );
    }

    #[test]
    fn single_path_has_nan_error() {
        let cfg = McConfig::new(1, 1, 0).unwrap();
        let e = terminal_estimate(&merton(), &call(), &cfg).unwrap();
        assert!(e.estimate.is_finite() && e.std_error.is_nan());
    }

    #[test]
    fn knocked_out_and_vanishing_barrier() {
        let cfg = McConfig::new(20_000, 16, 5).unwrap();
        let out = OptionContract::new(
            ContractKind::DownAndOutCall { barrier: 100.0 },
            100.0,
            1.0,
            0.0,
        )
        .unwrap();
        let e = simulate_barrier(&merton(), &out, &cfg).unwrap();
        assert_eq!((e.estimate, e.std_error), (0.0, 0.0));
        let low = OptionContract::new(
            ContractKind::DownAndOutCall { barrier: 1e-12 },
            100.0,
            1.0,
            0.0,
        )
        .unwrap();
        assert_eq!(
            simulate_barrier(&merton(), &low, &cfg).unwrap(),
            simulate_paths(&merton(), &call(), &cfg).unwrap()
        );
    }

    #[test]
    fn prices_within_three_standard_errors() {
        let cfg = McConfig::new(200_000, 1, 21).unwrap();
        let series = price_european_series(&merton(), &call(), &SeriesTruncation::default())
            .unwrap()
            .price;
        let e = terminal_estimate(&merton(), &call(), &cfg).unwrap();
        assert!(
            (e.estimate - series).abs() < 3.0 * e.std_error,
            "{e:?} vs {series}"
        );
        let bs = LevyModel::black_scholes(100.0, 0.05, 0.2).unwrap();
        let doc = OptionContract::new(
            ContractKind::DownAndOutCall { barrier: 90.0 },
            100.0,
            1.0,
            0.0,
        )
        .unwrap();
        let cfg = McConfig::new(100_000, 64, 8).unwrap();
        let e = simulate_barrier(&bs, &doc, &cfg).unwrap();
        let exact = price_down_and_out_call(&bs, &doc, &SeriesTruncation::default())
            .unwrap()
            .price;
        assert!(
            (e.estimate - exact).abs() < 3.0 * e.std_error,
            "{e:?} vs {exact}"
        );
    }

    #[test]
    fn martingale_for_every_law() {
        let laws = [
            (JumpLaw::Unit { a: -0.1 }, JumpTransform::Identity),
            (JumpLaw::Geometric { p: 0.9 }, JumpTransform::ExpMinusOne),
            (JumpLaw::Binomial { m: 4, p: 0.3 }, JumpTransform::Identity),
            (JumpLaw::Poisson { rate: 0.2 }, JumpTransform::ExpMinusOne),
            (JumpLaw::Exponential { rate: 8.0 }, JumpTransform::Identity),
            (
                JumpLaw::Normal {
                    mean: -0.1,
                    std: 0.15,
                },
                JumpTransform::ExpMinusOne,
            ),
        ];
        let cfg = McConfig::new(100_000, 1, 99).unwrap();
        for (law, transform) in laws {
            let m = LevyModel::new(100.0, 0.05, 0.2, 0.5, law.clone(), transform).unwrap();
            let e = martingale_estimate(&m, 1.0, &cfg).unwrap();
            assert!(
                (e.estimate - 100.0).abs() < 3.0 * e.std_error,
                "{law}: {e:?}"
            );
        }
    }

    #[test]
    fn terminal_law_passes_kolmogorov_smirnov() {
        let m = LevyModel::new(
            100.0,
            0.05,
            0.2,
            1.0,
            JumpLaw::Exponential { rate: 5.0 },
            JumpTransform::ExpMinusOne,
        )
        .unwrap();
        let n = 100_000;
        let mut xs = simulate_terminal(&m, 1.0, &McConfig::new(n, 1, 2024).unwrap()).unwrap();
        xs.sort_by(f64::total_cmp);
        let p = JumpDiffusionParams {
            gamma: m.integrated_log_drift(0.0, 1.0).unwrap(),
            sigma: 0.2,
            intensity: 1.0,
            law: JumpLaw::Exponential { rate: 5.0 },
        };
        let grid = default_jump_diffusion_grid(&p, 100f64.ln(), 1.0).unwrap();
        let f = jump_diffusion_density(
            &p,
            100f64.ln(),
            0.0,
            1.0,
            &grid,
            &SeriesTruncation::default(),
        )
        .unwrap();
        // Sup distance over the grid nodes, cumulating the trapezoid cdf.
        let h = grid.spacing();
        let vals = f.continuous();
        let (mut cdf, mut j, mut ks) = (0.0, 0usize, 0.0f64);
        for k in 0..grid.len() {
            if k > 0 {
                cdf += 0.5 * h * (vals[k - 1] + vals[k]);
            }
            let y = grid.node(k);
            while j < n && xs[j] <= y {
                j += 1;
            }
            ks = ks.max((j as f64 / n as f64 - cdf).abs());
        }
        assert!(ks < 1.63 / (n as f64).sqrt(), "KS distance {ks}");
    }

    #[test]
    fn poisson_inversion_matches_pmf() {
        let mean = 2.0;
        let mut counts = [0usize; 12];
        let n = 100_000;
        for i in 0..n {
            let u = (i as f64 + 0.5) / n as f64;
            counts[poisson_count(mean, u).min(11)] += 1;
        }
        for (k, c) in counts.iter().take(8).enumerate() {
            let pmf =
                (-mean).exp() * mean.powi(k as i32) / (1..=k).product::<usize>().max(1) as f64;
            assert!((*c as f64 / n as f64 - pmf).abs() < 2e-5);
        }
        assert_eq!(poisson_count(0.0, 0.9), 0);
        let big = poisson_count(1000.0, 0.5);
        assert!((990..=1010).contains(&big));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn fixed_seed_is_reproducible(seed in any::<u64>(), n in 1usize..3000) {
            let cfg = McConfig::new(n, 4, seed).unwrap();
            let a = terminal_estimate(&merton(), &call(), &cfg).unwrap();
            let b = terminal_estimate(&merton(), &call(), &cfg).unwrap();
            prop_assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
            prop_assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
        }
    }
}
