//! Transition densities of finite-type Lévy processes: the compound
//! Poisson series, the jump-diffusion mixture and the discounted
//! fundamental solution of the pricing equation.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::grid::{integrate, Grid1D, GridFunction};
use crate::laws::{convolve_law, Atom, JumpLaw, COVERAGE_TOLERANCE};
use crate::model::LevyModel;
use crate::quadrature::{gaussian_pdf, norm_cdf, norm_pdf, poisson_truncation, poisson_weights};
use crate::solver::{direct_propagator, JumpSpec};

/// Default number of grid nodes.
pub const DEFAULT_POINTS: usize = 4096;

/// Standard deviations covered on each side of the default grid.
pub const DEFAULT_WIDTH_SDS: f64 = 12.0;

/// Atoms lighter than this are dropped when mixtures are enumerated.
const ATOM_TAIL: f64 = 1e-17;

/// Poisson series truncation rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesTruncation {
    pub tail_tolerance: f64,
    pub max_terms: usize,
}

impl Default for SeriesTruncation {
    fn default() -> Self {
        Self {
            tail_tolerance: 1e-12,
            max_terms: 200,
        }
    }
}

impl SeriesTruncation {
    pub fn validate(&self) -> Result<()> {
        if !(self.tail_tolerance > 0.0 && self.tail_tolerance < 1.0) {
            return Err(Error::validation(
                "numerics.tail_tolerance",
                format!("{} must lie in (0, 1)", self.tail_tolerance),
            ));
        }
        if self.max_terms == 0 {
            return Err(Error::validation("numerics.max_terms", "must be positive"));
        }
        Ok(())
    }

    /// Truncation index and the Poisson tail mass beyond it.
    pub fn truncate(&self, mean: f64) -> Result<(usize, f64)> {
        self.validate()?;
        poisson_truncation(mean, self.tail_tolerance, self.max_terms).ok_or_else(|| {
            Error::Convergence(format!(
                "Poisson({mean}) tail stays above {} within {} terms",
                self.tail_tolerance, self.max_terms
            ))
        })
    }
}

/// Parameters of `X_t = γt + σW_t + Σ_{i ≤ N_t} ξ_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpDiffusionParams {
    pub gamma: f64,
    pub sigma: f64,
    pub intensity: f64,
    pub law: JumpLaw,
}

impl JumpDiffusionParams {
    pub fn validate(&self) -> Result<()> {
        if !self.gamma.is_finite() {
            return Err(Error::validation("model.gamma", "drift must be finite"));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::validation(
                "model.sigma",
                format!("sigma {} must be positive", self.sigma),
            ));
        }
        if !(self.intensity >= 0.0 && self.intensity.is_finite()) {
            return Err(Error::validation(
                "model.intensity_q",
                format!("intensity {} must be non-negative", self.intensity),
            ));
        }
        self.law.validate()
    }
}

/// A sampled transition density with its atoms carried exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    grid: Grid1D,
    continuous: Vec<f64>,
    atoms: Vec<Atom>,
    truncation_index: usize,
    tail_mass: f64,
    scale: f64,
}

impl DensityGrid {
    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    /// Samples of the absolutely continuous part.
    pub fn continuous(&self) -> &[f64] {
        &self.continuous
    }

    /// Atoms at their exact locations.
    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// Atom masses collected at their nearest nodes.
    pub fn atom_mass(&self) -> Vec<f64> {
        let mut mass = vec![0.0; self.grid.len()];
        for a in &self.atoms {
            if let Some(k) = self.grid.nearest_node(a.location) {
                mass[k] += a.mass;
            }
        }
        mass
    }

    pub fn truncation_index(&self) -> usize {
        self.truncation_index
    }

    /// Poisson mass beyond the truncation index (before scaling).
    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// Factor already applied to every value (the discount factor for
    /// fundamental solutions).
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Trapezoid mass of the continuous part plus the exact atom masses.
    pub fn total_mass(&self) -> f64 {
        let cont =
            integrate(&GridFunction::new(self.grid, self.continuous.clone()).expect("finite"));
        cont + self.atoms.iter().map(|a| a.mass).sum::<f64>()
    }

    /// Single grid function with atoms deposited as `mass / spacing`.
    pub fn to_grid_function(&self) -> Result<GridFunction> {
        let h = self.grid.spacing();
        let values = self
            .continuous
            .iter()
            .zip(self.atom_mass())
            .map(|(c, a)| c + a / h)
            .collect();
        GridFunction::new(self.grid, values)
    }

    /// Mass at or below `y`: trapezoid rule with linear interpolation in the
    /// last cell, plus the atoms at or below `y`.
    pub fn cdf(&self, y: f64) -> f64 {
        let h = self.grid.spacing();
        let pos = ((y - self.grid.x_min()) / h).clamp(0.0, (self.grid.len() - 1) as f64);
        let k = pos.floor() as usize;
        let mut cont = 0.0;
        for i in 0..k {
            cont += 0.5 * h * (self.continuous[i] + self.continuous[i + 1]);
        }
        let frac = pos - k as f64;
        if frac > 0.0 && k + 1 < self.continuous.len() {
            let (a, b) = (self.continuous[k], self.continuous[k + 1]);
            let mid = a + (b - a) * frac;
            cont += 0.5 * frac * h * (a + mid);
        }
        cont + self
            .atoms
            .iter()
            .filter(|a| a.location <= y)
            .map(|a| a.mass)
            .sum::<f64>()
    }

    /// The same density with every value multiplied by `factor`.
    pub fn scaled(mut self, factor: f64) -> Self {
        self.continuous.iter_mut().for_each(|v| *v *= factor);
        self.atoms.iter_mut().for_each(|a| a.mass *= factor);
        self.scale *= factor;
        self
    }

    fn check_atom_coverage(&self, lost: f64) -> Result<()> {
        if lost > COVERAGE_TOLERANCE {
            Err(Error::Coverage(format!(
                "atom mass {lost:.3e} falls outside [{}, {})",
                self.grid.x_min(),
                self.grid.x_max()
            )))
        } else {
            Ok(())
        }
    }
}

fn horizon(s: f64, t: f64) -> Result<f64> {
    if !(s.is_finite() && t.is_finite()) || !(t > s) {
        return Err(Error::Domain(format!("need s < t, got s = {s}, t = {t}")));
    }
    Ok(t - s)
}

/// Mass allowed beyond each edge of a default grid.
const EDGE_MASS: f64 = 1e-16;

/// Distances below and above `origin` beyond which `D = shift + G + J`
/// carries less than `eps` mass, from the Chernoff bound
/// `P(±(D - shift) > a) <= exp(-ua + ½u²v + m(M(±u) - 1))` minimized over
/// `u`. Here `G ~ N(0, v)` and `J` is compound Poisson with mean count `m`
/// and jump moment generating function `M`.
pub fn chernoff_extent(
    shift: f64,
    variance: f64,
    mean_jumps: f64,
    mgf: &dyn Fn(f64) -> Option<f64>,
    scale: f64,
    eps: f64,
) -> (f64, f64) {
    let ln_eps = eps.ln();
    let side = |sign: f64| -> f64 {
        (0..240)
            .filter_map(|j| {
                let u = 10f64.powf(-2.0 + 5.0 * j as f64 / 239.0) / scale;
                let jump = if mean_jumps > 0.0 {
                    mean_jumps * (mgf(sign * u)? - 1.0)
                } else {
                    0.0
                };
                let a = (0.5 * u * u * variance + jump - ln_eps) / u;
                a.is_finite().then_some(a)
            })
            .fold(f64::INFINITY, f64::min)
    };
    ((side(-1.0) - shift).max(0.0), (side(1.0) + shift).max(0.0))
}

/// Grid of `n_points` nodes with node `n_points / 2` at `origin` and
/// half-width `12 sqrt(variance) + |shift|`, widened where needed so that
/// the Chernoff bound on the mass beyond either edge is below `1e-16`.
/// With a lattice span `d` the spacing is `d / 2^k` for the largest
/// integer `k` that still covers the half-width, so lattice points fall on
/// nodes.
#[allow(clippy::too_many_arguments)]
pub fn default_grid_with_tails(
    origin: f64,
    diffusion_variance: f64,
    shift: f64,
    mean_jumps: f64,
    jump_moments: (f64, f64),
    mgf: &dyn Fn(f64) -> Option<f64>,
    lattice: Option<f64>,
    n_points: usize,
) -> Result<Grid1D> {
    let variance = diffusion_variance + mean_jumps * jump_moments.1;
    let total_shift = shift + mean_jumps * jump_moments.0;
    let sd = variance.max(0.0).sqrt();
    let (down, up) = chernoff_extent(
        shift,
        diffusion_variance,
        mean_jumps,
        mgf,
        sd.max(1e-6),
        EDGE_MASS,
    );
    let half = (DEFAULT_WIDTH_SDS * sd + total_shift.abs())
        .max(down)
        .max(up)
        .max(1e-6);
    align_grid(origin, half, lattice, n_points)
}

fn align_grid(origin: f64, half: f64, lattice: Option<f64>, n_points: usize) -> Result<Grid1D> {
    match lattice {
        Some(d) if d > 0.0 => {
            let k = (n_points as f64 * d / (2.0 * half)).log2().floor();
            Grid1D::with_spacing(origin, d * 2f64.powf(-k), n_points)
        }
        _ => Grid1D::centered(origin, half, n_points),
    }
}

/// Grid centred at `origin` with half-width `12 sqrt(variance) + |shift|`,
/// aligned to `lattice` when given.
pub fn default_grid(
    origin: f64,
    variance: f64,
    shift: f64,
    lattice: Option<f64>,
    n_points: usize,
) -> Result<Grid1D> {
    let half = (DEFAULT_WIDTH_SDS * variance.max(0.0).sqrt() + shift.abs()).max(1e-6);
    align_grid(origin, half, lattice, n_points)
}

/// Default grid for the displacement of a compound Poisson process with
/// `λτ = mean_jumps`, centred at `x`.
pub fn default_jump_grid(law: &JumpLaw, mean_jumps: f64, x: f64) -> Result<Grid1D> {
    default_grid_with_tails(
        x,
        0.0,
        0.0,
        mean_jumps,
        law.moments(),
        &|u| law.mgf(u),
        law.lattice_span(),
        DEFAULT_POINTS,
    )
}

/// Default grid for a jump-diffusion started at `x` over `tau`.
pub fn default_jump_diffusion_grid(p: &JumpDiffusionParams, x: f64, tau: f64) -> Result<Grid1D> {
    default_grid_with_tails(
        x,
        p.sigma * p.sigma * tau,
        p.gamma * tau,
        p.intensity * tau,
        p.law.moments(),
        &|u| p.law.mgf(u),
        None,
        DEFAULT_POINTS,
    )
}

/// Poisson-weighted atoms `Σ_{n ≤ N} w_n P^{*n}` of a discrete-type law,
/// merged by location. Returns the atoms, `N` and the Poisson tail mass.
pub fn mixture_atoms(
    law: &JumpLaw,
    mean_jumps: f64,
    trunc: &SeriesTruncation,
) -> Result<(Vec<Atom>, usize, f64)> {
    if law.is_continuous() {
        return Err(Error::Capability(format!("{law} has no atoms")));
    }
    let (n_max, tail) = trunc.truncate(mean_jumps)?;
    let weights = poisson_weights(mean_jumps, n_max + 1);
    let mut atoms = Vec::new();
    for (n, w) in weights.iter().enumerate() {
        let power = convolve_law(law, n as u64)?;
        let list = power.atoms(ATOM_TAIL / w.max(1e-300)).unwrap_or_default();
        atoms.extend(list.into_iter().map(|a| Atom::new(a.location, w * a.mass)));
    }
    atoms.sort_by(|a, b| a.location.total_cmp(&b.location));
    let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
    for a in atoms {
        match merged.last_mut() {
            Some(last)
                if (last.location - a.location).abs() <= 1e-12 * last.location.abs().max(1.0) =>
            {
                last.mass += a.mass
            }
            _ => merged.push(a),
        }
    }
    Ok((merged, n_max, tail))
}

/// Density of `x + Σ_{i ≤ N_τ} ξ_i` as a function of `y`: the series
/// `Σ_n e^{-λτ}(λτ)^n/n! P^{*n}(y - x)` with the `n = 0` Dirac term as an
/// atom.
pub fn compound_poisson_density(
    intensity: f64,
    law: &JumpLaw,
    x: f64,
    s: f64,
    t: f64,
    grid: &Grid1D,
    trunc: &SeriesTruncation,
) -> Result<DensityGrid> {
    if !(intensity >= 0.0 && intensity.is_finite()) {
        return Err(Error::validation(
            "model.intensity_q",
            format!("intensity {intensity} must be non-negative"),
        ));
    }
    law.validate()?;
    let tau = horizon(s, t)?;
    let m = intensity * tau;
    let (n_max, tail) = trunc.truncate(m)?;
    let weights = poisson_weights(m, n_max + 1);
    let mut continuous = vec![0.0; grid.len()];
    let mut atoms;
    if law.is_continuous() {
        atoms = vec![Atom::new(x, weights[0])];
        for (n, w) in weights.iter().enumerate().skip(1) {
            let raster = convolve_law(law, n as u64)?.rasterize(grid, x);
            for (c, v) in continuous.iter_mut().zip(raster.continuous) {
                *c += w * v;
            }
        }
    } else {
        let (mixture, _, _) = mixture_atoms(law, m, trunc)?;
        atoms = mixture;
        atoms.iter_mut().for_each(|a| a.location += x);
    }
    let inside: f64 = atoms
        .iter()
        .filter(|a| grid.nearest_node(a.location).is_some())
        .map(|a| a.mass)
        .sum();
    let lost = (atoms.iter().map(|a| a.mass).sum::<f64>() - inside).max(0.0);
    atoms.retain(|a| grid.nearest_node(a.location).is_some());
    let d = DensityGrid {
        grid: *grid,
        continuous,
        atoms,
        truncation_index: n_max,
        tail_mass: tail,
        scale: 1.0,
    };
    d.check_atom_coverage(lost)?;
    Ok(d)
}

/// Density at `y` of `Erlang(n, r) + N(0, v)`.
///
/// With `m = y - r v`, the density is
/// `r^n/(n-1)! e^{-ry + r²v/2} I_{n-1}` where `I_k = ∫_0^∞ z^k φ_v(z - m) dz`
/// obeys `I_k = m I_{k-1} + (k-1) v I_{k-2}`.
pub fn erlang_gauss_pdf(n: u64, rate: f64, variance: f64, y: f64) -> f64 {
    let s = variance.sqrt();
    let m = y - rate * variance;
    let i0 = norm_cdf(m / s);
    if i0 == 0.0 {
        return 0.0;
    }
    let mut prev = i0;
    let mut cur = m * i0 + s * norm_pdf(m / s);
    if n == 1 {
        cur = prev;
    } else {
        for k in 2..n {
            let next = m * cur + (k - 1) as f64 * variance * prev;
            prev = cur;
            cur = next;
        }
    }
    if cur <= 0.0 {
        return 0.0;
    }
    let ln = n as f64 * rate.ln() - ln_gamma(n as f64) - rate * y
        + 0.5 * rate * rate * variance
        + cur.ln();
    ln.exp()
}

/// Density of `x + γτ + σW_τ + Σ_{i ≤ N_τ} ξ_i`, the Poisson mixture of
/// `N(x + γτ, σ²τ) * P^{*n}`.
///
/// Discrete laws give a finite Gaussian mixture over the merged atoms,
/// normal jumps a Gaussian mixture with variances `σ²τ + nδ²`, and
/// exponential jumps Erlang-Gauss convolutions in closed form. When
/// `σ√τ` is below half a grid spacing the Gaussian is not resolvable and
/// the atoms are deposited instead.
pub fn jump_diffusion_density(
    p: &JumpDiffusionParams,
    x: f64,
    s: f64,
    t: f64,
    grid: &Grid1D,
    trunc: &SeriesTruncation,
) -> Result<DensityGrid> {
    p.validate()?;
    let tau = horizon(s, t)?;
    let centre = x + p.gamma * tau;
    let v = p.sigma * p.sigma * tau;
    if v.sqrt() < 0.5 * grid.spacing() {
        return compound_poisson_density(p.intensity, &p.law, centre, s, t, grid, trunc);
    }
    let m = p.intensity * tau;
    let (n_max, tail) = trunc.truncate(m)?;
    let weights = poisson_weights(m, n_max + 1);
    let nodes: Vec<f64> = grid.nodes().collect();
    let mut continuous = vec![0.0; grid.len()];
    let h = grid.spacing();
    let mut add_gaussian = |mean: f64, var: f64, w: f64| {
        let reach = 40.0 * var.sqrt();
        let lo = (((mean - reach - grid.x_min()) / h).floor().max(0.0)) as usize;
        let hi = (((mean + reach - grid.x_min()) / h).ceil().max(0.0) as usize).min(grid.len());
        for k in lo..hi {
            continuous[k] += w * gaussian_pdf(nodes[k], mean, var);
        }
    };
    match p.law {
        JumpLaw::Normal { mean, std } => {
            for (n, w) in weights.iter().enumerate() {
                let nf = n as f64;
                add_gaussian(centre + nf * mean, v + nf * std * std, *w);
            }
        }
        JumpLaw::Exponential { rate } => {
            add_gaussian(centre, v, weights[0]);
            for (k, y) in nodes.iter().enumerate() {
                continuous[k] += weights
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(n, w)| w * erlang_gauss_pdf(n as u64, rate, v, y - centre))
                    .sum::<f64>();
            }
        }
        _ => {
            let (atoms, _, _) = mixture_atoms(&p.law, m, trunc)?;
            for a in atoms {
                add_gaussian(centre + a.location, v, a.mass);
            }
        }
    }
    let lost = 1.0 - tail - integrate(&GridFunction::new(*grid, continuous.clone())?);
    if lost > 1e-8 {
        return Err(Error::Coverage(format!(
            "density mass {lost:.3e} falls outside [{}, {})",
            grid.x_min(),
            grid.x_max()
        )));
    }
    Ok(DensityGrid {
        grid: *grid,
        continuous,
        atoms: Vec::new(),
        truncation_index: n_max,
        tail_mass: tail,
        scale: 1.0,
    })
}

/// Default log-price grid for a model over a horizon: centred on `ln S`,
/// covering 12 standard deviations of the log return plus its mean, and
/// widened to the Chernoff tail extent.
pub fn default_pricing_grid(model: &LevyModel, tau: f64, n_points: usize) -> Result<Grid1D> {
    let lambda_tau = model.intensity_q * tau;
    let moments = if model.intensity_q > 0.0 {
        model.log_jump_moments()
    } else {
        (0.0, 0.0)
    };
    let log_law = model.log_jump_law();
    let mgf = |u: f64| -> Option<f64> {
        match &log_law {
            Some(law) => law.mgf(u),
            None => {
                // E[(1 + c(Z))^u] for a continuous law.
                let v = model
                    .law_q
                    .expect(&|z| (u * model.transform.log_jump(z)).exp());
                v.is_finite().then_some(v)
            }
        }
    };
    let variance = model.integrated_variance(0.0, tau);
    let drift = model.integrated_log_drift(0.0, tau)?;
    let physical = default_grid_with_tails(
        model.spot.ln(),
        variance,
        drift,
        lambda_tau,
        moments,
        &mgf,
        None,
        n_points,
    )?;
    // Call payoffs grow like e^y, so the grid must also hold the share
    // measure: the density tilted by e^y.
    let Some(m1) = mgf(1.0).filter(|m| *m > 0.0) else {
        return Ok(physical);
    };
    let tilted_mgf = |u: f64| mgf(u + 1.0).map(|m| m / m1);
    let tilted_moments = match (tilted_mgf(1e-4), tilted_mgf(-1e-4)) {
        (Some(a), Some(b)) => ((a - b) / 2e-4, ((a - 2.0 + b) / 1e-8).max(0.0)),
        _ => moments,
    };
    let share = default_grid_with_tails(
        model.spot.ln(),
        variance,
        drift + variance,
        lambda_tau * m1,
        tilted_moments,
        &tilted_mgf,
        None,
        n_points,
    )?;
    Ok(if share.spacing() > physical.spacing() {
        share
    } else {
        physical
    })
}

/// Undiscounted density of `ln S_T` given `ln S_t = ln S`.
///
/// Models whose log jump is a family member use the closed-form mixture;
/// the others invert the full-generator multiplier.
pub fn log_price_density(
    model: &LevyModel,
    t: f64,
    maturity: f64,
    grid: &Grid1D,
    trunc: &SeriesTruncation,
) -> Result<DensityGrid> {
    let tau = horizon(t, maturity)?;
    model.validate_on(t, maturity)?;
    let x = model.spot.ln();
    let law = if model.intensity_q == 0.0 {
        Some(JumpLaw::Unit { a: 0.0 })
    } else {
        model.log_jump_law()
    };
    match law {
        Some(law) => {
            let params = JumpDiffusionParams {
                gamma: model.integrated_log_drift(t, maturity)? / tau,
                sigma: (model.integrated_variance(t, maturity) / tau).sqrt(),
                intensity: model.intensity_q,
                law,
            };
            jump_diffusion_density(&params, x, t, maturity, grid, trunc)
        }
        None => spectral_log_price_density(model, t, maturity, grid),
    }
}

/// Log-price density by inverting the full-generator multiplier.
pub fn spectral_log_price_density(
    model: &LevyModel,
    t: f64,
    maturity: f64,
    grid: &Grid1D,
) -> Result<DensityGrid> {
    horizon(t, maturity)?;
    let diffusion = model.log_diffusion(t, maturity)?;
    let jumps: Option<JumpSpec> = model.log_jump_spec()?;
    let p = direct_propagator(Some(&diffusion), jumps.as_ref(), t, maturity, grid, false)?;
    let f = p.transition_density(model.spot.ln())?;
    Ok(DensityGrid {
        grid: *grid,
        continuous: f.into_values(),
        atoms: Vec::new(),
        truncation_index: 0,
        tail_mass: 0.0,
        scale: 1.0,
    })
}

/// Fundamental solution of the pricing equation: the log-price density
/// discounted by `e^{-r(T - t)}`.
pub fn fundamental_solution(
    model: &LevyModel,
    t: f64,
    maturity: f64,
    grid: &Grid1D,
    trunc: &SeriesTruncation,
) -> Result<DensityGrid> {
    let d = log_price_density(model, t, maturity, grid, trunc)?;
    Ok(d.scaled((-model.rate * (maturity - t)).exp()))
}
