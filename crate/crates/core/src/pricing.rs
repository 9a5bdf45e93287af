//! Option prices under the geometric Lévy model: the Poisson-weighted
//! lognormal series, the reflection formula for down-and-out calls, and
//! quadrature of the payoff against the fundamental solution.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::density::{
    default_pricing_grid, fundamental_solution, log_price_density, SeriesTruncation, DEFAULT_POINTS,
};
use crate::error::{Error, Result};
use crate::grid::{Grid1D, Strictness};
use crate::laws::JumpLaw;
use crate::model::{ContractKind, LevyModel, OptionContract};
use crate::quadrature::{norm_cdf, poisson_weights, GAUSS_LEGENDRE_4};

/// Relative tolerance of the series-versus-quadrature check.
pub const ROUTE_AGREEMENT_TOLERANCE: f64 = 1e-5;

/// Relative tolerance of the quadrature martingale check.
pub const MARTINGALE_TOLERANCE: f64 = 1e-6;

/// Neglected payoff mass at the grid edges, relative to `max(S, K)`, above
/// which quadrature reports a coverage error.
pub const PAYOFF_COVERAGE_TOLERANCE: f64 = 1e-9;

pub const PARITY_TOLERANCE: f64 = 1e-10;

/// Label of barrier prices that apply the reflection formula in the
/// presence of jumps, which ignores barrier overshoot.
pub const REFLECTION_APPROXIMATION: &str = "reflection-approximation";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    Auto,
    Series,
    Quadrature,
}

impl FromStr for Route {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Route::Auto),
            "series" => Ok(Route::Series),
            "quadrature" => Ok(Route::Quadrature),
            other => Err(Error::validation(
                "route",
                format!("unknown route `{other}` (expected auto, series or quadrature)"),
            )),
        }
    }
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Route::Auto => "auto",
            Route::Series => "series",
            Route::Quadrature => "quadrature",
        })
    }
}

/// Log-price grid used by the quadrature route.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridSpec {
    /// 12-standard-deviation rule widened to the tail bound.
    Auto,
    Bounds {
        x_min: f64,
        x_max: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PricingSettings {
    pub route: Route,
    pub grid: GridSpec,
    pub n_points: usize,
    pub truncation: SeriesTruncation,
    pub strictness: Strictness,
    /// Run the route-agreement, martingale and parity checks.
    pub check: bool,
}

impl Default for PricingSettings {
    fn default() -> Self {
        Self {
            route: Route::Auto,
            grid: GridSpec::Auto,
            n_points: DEFAULT_POINTS,
            truncation: SeriesTruncation::default(),
            strictness: Strictness::Strict,
            check: false,
        }
    }
}

impl PricingSettings {
    pub fn grid_for(&self, model: &LevyModel, tau: f64) -> Result<Grid1D> {
        match self.grid {
            GridSpec::Auto => default_pricing_grid(model, tau, self.n_points),
            GridSpec::Bounds { x_min, x_max } => Grid1D::new(x_min, x_max, self.n_points),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckResult {
    fn new(name: &str, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            value,
            tolerance,
            passed: value.abs() <= tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceReport {
    pub price: f64,
    pub route: String,
    pub knocked_out: bool,
    pub truncation_index: usize,
    pub tail_mass: f64,
    pub grid: Option<[f64; 3]>,
    pub checks: Vec<CheckResult>,
}

impl PriceReport {
    pub fn all_checks_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Price with its series diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesPrice {
    pub price: f64,
    pub truncation_index: usize,
    pub tail_mass: f64,
}

/// Log-jump parameters `(μ, δ)` when each jump-count-conditioned term is
/// lognormal.
fn lognormal_jumps(model: &LevyModel) -> Result<(f64, f64)> {
    if model.intensity_q == 0.0 {
        return Ok((0.0, 0.0));
    }
    match model.log_jump_law() {
        Some(JumpLaw::Normal { mean, std }) => Ok((mean, std)),
        Some(JumpLaw::Unit { a }) => Ok((a, 0.0)),
        Some(JumpLaw::Discrete(atoms)) if atoms.len() == 1 => Ok((atoms[0].location, 0.0)),
        _ => Err(Error::Capability(format!(
            "the series route needs lognormal or deterministic jumps; {} with {} transform needs --route quadrature",
            model.law_q,
            model.transform.name()
        ))),
    }
}

/// Whether the series route can price this model.
pub fn series_capable(model: &LevyModel) -> bool {
    lognormal_jumps(model).is_ok()
}

/// `Σ_n w_n(λ(1+κ)τ) Φ(d₊,n)` and `Σ_n w_n(λτ) Φ(d₋,n)` at spot `s` and
/// strike `k`.
struct SeriesTerms {
    asset: f64,
    cash: f64,
    truncation_index: usize,
    tail_mass: f64,
}

fn series_terms(
    model: &LevyModel,
    s: f64,
    k: f64,
    t: f64,
    maturity: f64,
    trunc: &SeriesTruncation,
) -> Result<SeriesTerms> {
    let (mu, delta) = lognormal_jumps(model)?;
    let tau = maturity - t;
    let var = model.integrated_variance(t, maturity);
    let lambda = model.intensity_q;
    let kappa = (mu + 0.5 * delta * delta).exp() - 1.0;
    let (n1, tail1) = trunc.truncate(lambda * tau)?;
    let (n2, tail2) = trunc.truncate(lambda * (1.0 + kappa) * tau)?;
    let n = n1.max(n2);
    let w_cash = poisson_weights(lambda * tau, n + 1);
    let w_asset = poisson_weights(lambda * (1.0 + kappa) * tau, n + 1);
    let base = (s / k).ln() + (model.rate - lambda * kappa) * tau - 0.5 * var;
    let mut asset = 0.0;
    let mut cash = 0.0;
    for j in 0..=n {
        let jf = j as f64;
        let v = var + jf * delta * delta;
        let sd = v.sqrt();
        let d_minus = (base + jf * mu) / sd;
        asset += w_asset[j] * norm_cdf(d_minus + sd);
        cash += w_cash[j] * norm_cdf(d_minus);
    }
    Ok(SeriesTerms {
        asset,
        cash,
        truncation_index: n,
        tail_mass: tail1.max(tail2),
    })
}

fn check_contract(model: &LevyModel, contract: &OptionContract) -> Result<()> {
    contract.validate()?;
    model.validate_on(contract.valuation_time, contract.maturity)
}

/// Poisson-weighted lognormal series for European calls, puts and
/// cash-or-nothing calls; puts follow from put-call parity.
pub fn price_european_series(
    model: &LevyModel,
    contract: &OptionContract,
    trunc: &SeriesTruncation,
) -> Result<SeriesPrice> {
    check_contract(model, contract)?;
    european_series_at(model, contract, model.spot, trunc)
}

fn european_series_at(
    model: &LevyModel,
    contract: &OptionContract,
    spot: f64,
    trunc: &SeriesTruncation,
) -> Result<SeriesPrice> {
    let k = contract.strike;
    let terms = series_terms(
        model,
        spot,
        k,
        contract.valuation_time,
        contract.maturity,
        trunc,
    )?;
    let discount = (-model.rate * contract.tau()).exp();
    let call = spot * terms.asset - k * discount * terms.cash;
    let price = match contract.kind {
        ContractKind::EuropeanCall => call,
        ContractKind::EuropeanPut => call - spot + k * discount,
        ContractKind::CashOrNothingCall { payout } => payout * discount * terms.cash,
        ContractKind::DownAndOutCall { .. } => {
            return Err(Error::Capability(
                "barrier contracts are priced by price_down_and_out_call".into(),
            ))
        }
    };
    Ok(SeriesPrice {
        price,
        truncation_index: terms.truncation_index,
        tail_mass: terms.tail_mass,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierPrice {
    pub price: f64,
    pub knocked_out: bool,
    /// True when jumps are present and the reflection formula ignores
    /// barrier overshoot.
    pub approximate: bool,
    pub truncation_index: usize,
    pub tail_mass: f64,
}

/// Continuously monitored down-and-out call by reflection:
/// `U(S) - (B/S)^{2r/σ² - 1} U(B²/S)` with
/// `U(x) = C(x, K') + (K' - K) D(x, K')`, `K' = max(K, B)`, where `C` and
/// `D` are the series call and unit digital. With jumps each bracket is the
/// Poisson-weighted series and the result is labelled
/// [`REFLECTION_APPROXIMATION`].
pub fn price_down_and_out_call(
    model: &LevyModel,
    contract: &OptionContract,
    trunc: &SeriesTruncation,
) -> Result<BarrierPrice> {
    check_contract(model, contract)?;
    let ContractKind::DownAndOutCall { barrier } = contract.kind else {
        return Err(Error::Capability(
            "price_down_and_out_call needs a down-and-out contract".into(),
        ));
    };
    lognormal_jumps(model)?;
    let approximate = model.intensity_q > 0.0;
    let s = model.spot;
    if barrier >= s {
        return Ok(BarrierPrice {
            price: 0.0,
            knocked_out: true,
            approximate,
            truncation_index: 0,
            tail_mass: 0.0,
        });
    }
    let k = contract.strike;
    let k_eff = k.max(barrier);
    let call = OptionContract {
        kind: ContractKind::EuropeanCall,
        strike: k_eff,
        ..*contract
    };
    let digital = OptionContract {
        kind: ContractKind::CashOrNothingCall { payout: 1.0 },
        strike: k_eff,
        ..*contract
    };
    let u = |x: f64| -> Result<(f64, SeriesPrice)> {
        let c = european_series_at(model, &call, x, trunc)?;
        let d = european_series_at(model, &digital, x, trunc)?;
        Ok((c.price + (k_eff - k) * d.price, c))
    };
    let (direct, info) = u(s)?;
    let reflected_spot = barrier * barrier / s;
    let (reflected, _) = u(reflected_spot)?;
    let tau = contract.tau();
    let sigma2 = model.integrated_variance(contract.valuation_time, contract.maturity) / tau;
    let exponent = 2.0 * model.rate / sigma2 - 1.0;
    let image = if reflected == 0.0 {
        0.0
    } else {
        (barrier / s).powf(exponent) * reflected
    };
    Ok(BarrierPrice {
        price: (direct - image).max(0.0),
        knocked_out: false,
        approximate,
        truncation_index: info.truncation_index,
        tail_mass: info.tail_mass,
    })
}

/// Down-and-in call from in-out parity.
pub fn price_down_and_in_call(
    model: &LevyModel,
    contract: &OptionContract,
    trunc: &SeriesTruncation,
) -> Result<f64> {
    let out = price_down_and_out_call(model, contract, trunc)?;
    let vanilla = OptionContract {
        kind: ContractKind::EuropeanCall,
        ..*contract
    };
    Ok(price_european_series(model, &vanilla, trunc)?.price - out.price)
}

/// Cubic Lagrange interpolation through nodes `j0..j0+4`.
fn cubic(values: &[f64], j0: usize, t: f64) -> f64 {
    // t is measured in cells from node j0.
    let (f0, f1, f2, f3) = (values[j0], values[j0 + 1], values[j0 + 2], values[j0 + 3]);
    let l0 = -(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0;
    let l1 = t * (t - 2.0) * (t - 3.0) / 2.0;
    let l2 = -t * (t - 1.0) * (t - 3.0) / 2.0;
    let l3 = t * (t - 1.0) * (t - 2.0) / 6.0;
    f0 * l0 + f1 * l1 + f2 * l2 + f3 * l3
}

/// `∫ g(y) p(y) dy` over the grid span, with `p` the cubic interpolant of
/// the samples and four-point Gauss-Legendre on every cell; cells are split
/// at the given breakpoints.
pub fn integrate_against(
    grid: &Grid1D,
    samples: &[f64],
    g: &dyn Fn(f64) -> f64,
    breakpoints: &[f64],
) -> f64 {
    let n = grid.len();
    let h = grid.spacing();
    let mut total = 0.0;
    for k in 0..n - 1 {
        let (a, b) = (grid.node(k), grid.node(k + 1));
        let j0 = k.saturating_sub(1).min(n - 4);
        let mut cuts = vec![a];
        cuts.extend(breakpoints.iter().copied().filter(|&x| x > a && x < b));
        cuts.push(b);
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let half = 0.5 * (hi - lo);
            let mid = 0.5 * (hi + lo);
            for (node, weight) in GAUSS_LEGENDRE_4 {
                let y = mid + half * node;
                let t = (y - grid.node(j0)) / h;
                total += half * weight * cubic(samples, j0, t) * g(y);
            }
        }
    }
    total
}

/// Corollary pricing: `∫ φ(e^y) f(t, ln S; T, y) dy` against the
/// discounted fundamental solution. Works for every jump law.
pub fn price_by_quadrature(
    model: &LevyModel,
    contract: &OptionContract,
    grid: &Grid1D,
    trunc: &SeriesTruncation,
) -> Result<SeriesPrice> {
    check_contract(model, contract)?;
    if let ContractKind::DownAndOutCall { .. } = contract.kind {
        return Err(Error::Capability(
            "barrier contracts are path dependent; use the series route or simulation".into(),
        ));
    }
    let f = fundamental_solution(
        model,
        contract.valuation_time,
        contract.maturity,
        grid,
        trunc,
    )?;
    let payoff = |y: f64| contract.payoff(y.exp());
    let kink = contract.strike.ln();
    let continuous = integrate_against(grid, f.continuous(), &payoff, &[kink]);
    let atoms: f64 = f.atoms().iter().map(|a| a.mass * payoff(a.location)).sum();
    // Payoff mass neglected beyond the grid, estimated from the edge values.
    let n = grid.len();
    let span = grid.x_max() - grid.x_min();
    let edge = (f.continuous()[0] * payoff(grid.x_min()))
        .abs()
        .max((f.continuous()[n - 1] * payoff(grid.node(n - 1))).abs())
        * span;
    if edge > PAYOFF_COVERAGE_TOLERANCE * model.spot.max(contract.strike) {
        return Err(Error::Coverage(format!(
            "payoff-weighted density {edge:.3e} at the grid edges [{}, {}); widen the grid",
            grid.x_min(),
            grid.x_max()
        )));
    }
    Ok(SeriesPrice {
        price: continuous + atoms,
        truncation_index: f.truncation_index(),
        tail_mass: f.tail_mass(),
    })
}

/// Relative error of `E[S_T] = S e^{rτ}` computed by quadrature of `e^y`
/// against the undiscounted log-price density.
pub fn martingale_defect(
    model: &LevyModel,
    tau: f64,
    grid: &Grid1D,
    trunc: &SeriesTruncation,
) -> Result<f64> {
    let d = log_price_density(model, 0.0, tau, grid, trunc)?;
    let cont = integrate_against(grid, d.continuous(), &|y: f64| y.exp(), &[]);
    let atoms: f64 = d.atoms().iter().map(|a| a.mass * a.location.exp()).sum();
    let forward = model.spot * (model.rate * tau).exp();
    Ok((cont + atoms) / forward - 1.0)
}

/// `E[S_T]` from the log-price characteristic exponent continued to
/// `θ = -i`: `S exp(∫γ + ½∫σ² + λτ(E[1 + c(Z)] - 1))`.
pub fn forward_from_exponent(model: &LevyModel, tau: f64) -> Result<f64> {
    let jump_mgf = if model.intensity_q > 0.0 {
        match model.log_jump_law() {
            Some(law) => law
                .mgf(1.0)
                .ok_or_else(|| Error::validation("model.transform", "E[1 + c(Z)] diverges"))?,
            None => model.law_q.expect(&|z| model.transform.log_jump(z).exp()),
        }
    } else {
        1.0
    };
    let exponent = model.integrated_log_drift(0.0, tau)?
        + 0.5 * model.integrated_variance(0.0, tau)
        + model.intensity_q * tau * (jump_mgf - 1.0);
    Ok(model.spot * exponent.exp())
}

/// Finite-difference stencil for [`pide_residual`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stencil {
    pub dt: f64,
    /// Spot step relative to `S`.
    pub ds_rel: f64,
}

impl Default for Stencil {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            ds_rel: 1e-3,
        }
    }
}

/// Largest relative spot step and time step that resolve the second
/// differences.
pub const MAX_STENCIL_DS_REL: f64 = 1e-2;
pub const MAX_STENCIL_DT: f64 = 1e-2;

/// Discrete pricing operator
/// `V_t + ½σ²S²V_SS + rSV_S - rV + λ∫[V(S(1 + c)) - V - S c V_S] p(dz)`
/// applied to a price surface by central differences.
pub fn pide_residual(
    model: &LevyModel,
    v: &dyn Fn(f64, f64) -> f64,
    t: f64,
    s: f64,
    stencil: Stencil,
) -> Result<f64> {
    if !(stencil.dt > 0.0 && stencil.ds_rel > 0.0)
        || stencil.ds_rel > MAX_STENCIL_DS_REL
        || stencil.dt > MAX_STENCIL_DT
    {
        return Err(Error::Resolution(format!(
            "stencil dt = {}, ds/S = {} is too coarse for second differences (limits {MAX_STENCIL_DT}, {MAX_STENCIL_DS_REL})",
            stencil.dt, stencil.ds_rel
        )));
    }
    let ds = stencil.ds_rel * s;
    let v0 = v(t, s);
    let v_t = (v(t + stencil.dt, s) - v(t - stencil.dt, s)) / (2.0 * stencil.dt);
    let (up, down) = (v(t, s + ds), v(t, s - ds));
    let v_s = (up - down) / (2.0 * ds);
    let v_ss = (up - 2.0 * v0 + down) / (ds * ds);
    let sigma2 = model.sigma().value(t).powi(2);
    let mut residual = v_t + 0.5 * sigma2 * s * s * v_ss + model.rate * (s * v_s - v0);
    if model.intensity_q > 0.0 {
        let integrand = |z: f64| {
            let c = model.transform.apply(z);
            v(t, s * (1.0 + c)) - v0 - s * c * v_s
        };
        residual += model.intensity_q * jump_expectation(&model.law_q, &integrand);
    }
    Ok(residual)
}

/// Panels of the fixed Gauss-Legendre rule for jump integrals of price
/// surfaces.
const JUMP_PANELS: usize = 400;

/// `E[g(Z)]` with a fixed rule, so the cost is bounded for noisy `g`.
fn jump_expectation(law: &JumpLaw, g: &dyn Fn(f64) -> f64) -> f64 {
    if let Some(atoms) = law.atoms(1e-17) {
        return atoms.iter().map(|a| a.mass * g(a.location)).sum();
    }
    let (lo, hi) = law.effective_support();
    let half = 0.5 * (hi - lo) / JUMP_PANELS as f64;
    (0..JUMP_PANELS)
        .map(|k| {
            let mid = lo + (2 * k + 1) as f64 * half;
            GAUSS_LEGENDRE_4
                .iter()
                .map(|(x, w)| {
                    let z = mid + half * x;
                    w * g(z) * law.pdf(z)
                })
                .sum::<f64>()
                * half
        })
        .sum()
}

fn grid_triple(g: &Grid1D) -> [f64; 3] {
    [g.x_min(), g.x_max(), g.len() as f64]
}

/// Prices one contract along the requested route, with optional checks.
pub fn price(
    model: &LevyModel,
    contract: &OptionContract,
    settings: &PricingSettings,
) -> Result<PriceReport> {
    check_contract(model, contract)?;
    if let ContractKind::DownAndOutCall { .. } = contract.kind {
        if settings.route == Route::Quadrature {
            return Err(Error::Capability(
                "barrier contracts have no quadrature route".into(),
            ));
        }
        let b = price_down_and_out_call(model, contract, &settings.truncation)?;
        let mut checks = Vec::new();
        if settings.check && !b.knocked_out {
            let vanilla = OptionContract {
                kind: ContractKind::EuropeanCall,
                ..*contract
            };
            let v = price_european_series(model, &vanilla, &settings.truncation)?.price;
            let din = price_down_and_in_call(model, contract, &settings.truncation)?;
            checks.push(CheckResult::new(
                "in_out_parity",
                b.price + din - v,
                PARITY_TOLERANCE * v.max(1.0),
            ));
            checks.push(CheckResult::new(
                "barrier_below_vanilla",
                (b.price - v).max(0.0),
                0.0,
            ));
        }
        return Ok(PriceReport {
            price: b.price,
            route: if b.approximate {
                REFLECTION_APPROXIMATION.into()
            } else {
                "reflection".into()
            },
            knocked_out: b.knocked_out,
            truncation_index: b.truncation_index,
            tail_mass: b.tail_mass,
            grid: None,
            checks,
        });
    }
    let route = match settings.route {
        Route::Auto if series_capable(model) => Route::Series,
        Route::Auto => Route::Quadrature,
        r => r,
    };
    let mut grid = None;
    let result = match route {
        Route::Series => price_european_series(model, contract, &settings.truncation)?,
        _ => {
            let g = settings.grid_for(model, contract.tau())?;
            grid = Some(g);
            price_by_quadrature(model, contract, &g, &settings.truncation)?
        }
    };
    let mut checks = Vec::new();
    if settings.check {
        let g = match grid {
            Some(g) => g,
            None => settings.grid_for(model, contract.tau())?,
        };
        if series_capable(model) {
            let other = match route {
                Route::Series => {
                    price_by_quadrature(model, contract, &g, &settings.truncation)?.price
                }
                _ => price_european_series(model, contract, &settings.truncation)?.price,
            };
            let rel = (result.price - other) / result.price.abs().max(1e-300);
            checks.push(CheckResult::new(
                "route_agreement",
                rel,
                ROUTE_AGREEMENT_TOLERANCE,
            ));
        }
        let defect = martingale_defect(model, contract.tau(), &g, &settings.truncation)?;
        checks.push(CheckResult::new("martingale", defect, MARTINGALE_TOLERANCE));
        if matches!(
            contract.kind,
            ContractKind::EuropeanCall | ContractKind::EuropeanPut
        ) {
            let call = OptionContract {
                kind: ContractKind::EuropeanCall,
                ..*contract
            };
            let put = OptionContract {
                kind: ContractKind::EuropeanPut,
                ..*contract
            };
            let (c, p) = match route {
                Route::Series => (
                    price_european_series(model, &call, &settings.truncation)?.price,
                    price_european_series(model, &put, &settings.truncation)?.price,
                ),
                _ => (
                    price_by_quadrature(model, &call, &g, &settings.truncation)?.price,
                    price_by_quadrature(model, &put, &g, &settings.truncation)?.price,
                ),
            };
            let parity =
                c - p - (model.spot - contract.strike * (-model.rate * contract.tau()).exp());
            // Quadrature parity inherits the martingale error of the grid.
            let tol = match route {
                Route::Series => PARITY_TOLERANCE * model.spot,
                _ => MARTINGALE_TOLERANCE * model.spot,
            };
            checks.push(CheckResult::new("put_call_parity", parity, tol));
        }
        let lower = match contract.kind {
            ContractKind::EuropeanCall => {
                (model.spot - contract.strike * (-model.rate * contract.tau()).exp()).max(0.0)
            }
            _ => 0.0,
        };
        checks.push(CheckResult::new(
            "lower_bound",
            (lower - result.price).max(0.0),
            1e-8 * model.spot,
        ));
    }
    Ok(PriceReport {
        price: result.price,
        route: route.to_string(),
        knocked_out: false,
        truncation_index: result.truncation_index,
        tail_mass: result.tail_mass,
        grid: grid.map(|g| grid_triple(&g)),
        checks,
    })
}

/// Prices independent contracts concurrently; results keep input order.
pub fn price_batch(
    jobs: &[(LevyModel, OptionContract)],
    settings: &PricingSettings,
) -> Vec<Result<PriceReport>> {
    jobs.par_iter()
        .map(|(m, c)| price(m, c, settings))
        .collect()
}

/// Decimal rendering with `digits` significant digits.
pub fn format_significant(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // Rounding can carry into a new digit (9.9999999 -> 10.0000000).
    let rounded: f64 = s.parse().unwrap_or(x);
    if rounded.abs().log10().floor() as i64 > magnitude && decimals > 0 {
        format!("{x:.prec$}", prec = decimals - 1)
    } else {
        s
    }
}
