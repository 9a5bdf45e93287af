//! Uniform grids, the continuous-convention Fourier transform pair, circular
//! convolution and trapezoid quadrature.
//!
//! The transform convention is fixed crate-wide:
//!
//! ```text
//! f^(theta) = ∫ e^{+i theta x} f(x) dx
//! f(x)      = (2π)^{-1} ∫ e^{-i theta x} f^(theta) d theta
//! ```
//!
//! so that a characteristic function `E[e^{i theta X}]` is the transform of
//! the density of `X`. On a grid of `n` nodes with spacing `h` the frequency
//! grid is `theta_j = 2π j' / (n h)` with `j'` running over `[-n/2, n/2)` in
//! FFT order.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Sign of the exponent in the forward transform. Every multiplier in the
/// crate is written against this single constant.
pub const FORWARD_SIGN: f64 = 1.0;

/// Imaginary residuals below this fraction of the peak magnitude are
/// discarded by [`inverse_transform`].
pub const IMAGINARY_RESIDUAL_TOLERANCE: f64 = 1e-8;

/// Absolute edge magnitude above which a function is considered to wrap
/// around the periodic grid.
pub const EDGE_TOLERANCE: f64 = 1e-12;

pub const MIN_POINTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    x_min: f64,
    x_max: f64,
    n_points: usize,
}

impl Grid1D {
    /// Nodes are `x_min + k * spacing` for `k < n_points`; `x_max` is the
    /// periodic image of `x_min` and is not itself a node.
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        if !n_points.is_power_of_two() || n_points < MIN_POINTS {
            return Err(Error::Config(format!(
                "grid size {n_points} must be a power of two and at least {MIN_POINTS}"
            )));
        }
        if !(x_min.is_finite() && x_max.is_finite()) || x_max <= x_min {
            return Err(Error::Config(format!(
                "grid bounds [{x_min}, {x_max}) are empty or not finite"
            )));
        }
        Ok(Self {
            x_min,
            x_max,
            n_points,
        })
    }

    /// Grid on `[center - half_width, center + half_width)`; `center` is
    /// node `n_points / 2`.
    pub fn centered(center: f64, half_width: f64, n_points: usize) -> Result<Self> {
        Self::new(center - half_width, center + half_width, n_points)
    }

    /// Grid with the given spacing whose node `n_points / 2` is `center`.
    pub fn with_spacing(center: f64, spacing: f64, n_points: usize) -> Result<Self> {
        let half = spacing * (n_points / 2) as f64;
        Self::new(center - half, center + half, n_points)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        (self.x_max - self.x_min) / self.n_points as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        self.x_min + k as f64 * self.spacing()
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(move |k| self.node(k))
    }

    /// Index of the node nearest to `x`, or `None` when `x` lies outside
    /// the half-cell-extended span of the grid.
    pub fn nearest_node(&self, x: f64) -> Option<usize> {
        let pos = ((x - self.x_min) / self.spacing()).round();
        if pos < 0.0 || pos >= self.n_points as f64 || !pos.is_finite() {
            None
        } else {
            Some(pos as usize)
        }
    }

    /// True when `x` sits on a node to within `1e-9` of a spacing.
    pub fn is_node(&self, x: f64) -> bool {
        let pos = (x - self.x_min) / self.spacing();
        (pos - pos.round()).abs() < 1e-9 && self.nearest_node(x).is_some()
    }

    pub fn frequency_spacing(&self) -> f64 {
        2.0 * PI / (self.x_max - self.x_min)
    }

    /// Signed frequency of FFT bin `j`.
    pub fn frequency(&self, j: usize) -> f64 {
        let n = self.n_points;
        let signed = if j < n / 2 {
            j as f64
        } else {
            j as f64 - n as f64
        };
        signed * self.frequency_spacing()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.n_points).map(|j| self.frequency(j)).collect()
    }

    /// Bin holding the unpaired Nyquist frequency `-π / spacing`.
    pub fn nyquist_bin(&self) -> usize {
        self.n_points / 2
    }

    fn same_as(&self, other: &Grid1D) -> bool {
        self.n_points == other.n_points
            && (self.x_min - other.x_min).abs() <= 1e-12 * self.spacing()
            && (self.x_max - other.x_max).abs() <= 1e-12 * self.spacing()
    }

    pub(crate) fn ensure_same(&self, other: &Grid1D) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "grid mismatch: [{}, {}) x {} vs [{}, {}) x {}",
                self.x_min, self.x_max, self.n_points, other.x_min, other.x_max, other.n_points
            )))
        }
    }
}

/// Real samples of a function on a [`Grid1D`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid1D,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Config(format!(
                "{} values supplied for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite value at node {k}")));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid1D) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.nodes().map(f).collect();
        Self::new(grid, values)
    }

    /// Discrete delta of unit mass at the node nearest `x`.
    pub fn delta(grid: Grid1D, x: f64) -> Result<Self> {
        let k = grid
            .nearest_node(x)
            .ok_or_else(|| Error::Coverage(format!("delta location {x} lies outside the grid")))?;
        let mut values = vec![0.0; grid.len()];
        values[k] = 1.0 / grid.spacing();
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Largest absolute value at the two edge nodes.
    pub fn edge_magnitude(&self) -> f64 {
        let n = self.values.len();
        self.values[0].abs().max(self.values[n - 1].abs())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &GridFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub(crate) fn check_edges(&self) -> Result<()> {
        let edge = self.edge_magnitude();
        if edge > EDGE_TOLERANCE {
            Err(Error::WrapAround {
                edge,
                tolerance: EDGE_TOLERANCE,
            })
        } else {
            Ok(())
        }
    }
}

/// Whether wrap-around diagnostics are errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strictness {
    #[default]
    Strict,
    Relaxed,
}

fn fft(buffer: &mut [Complex64], inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let plan = if inverse {
        planner.plan_fft_inverse(buffer.len())
    } else {
        planner.plan_fft_forward(buffer.len())
    };
    plan.process(buffer);
}

/// Continuous-convention transform `∫ e^{iθx} f(x) dx` sampled at the
/// grid's frequencies (rectangle rule, spectrally accurate for smooth
/// functions that vanish at the edges).
pub fn forward_transform(f: &GridFunction) -> Vec<Complex64> {
    let grid = f.grid;
    let h = grid.spacing();
    let mut buffer: Vec<Complex64> = f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    // e^{+2πi jk/n} is rustfft's unnormalised inverse kernel.
    fft(&mut buffer, FORWARD_SIGN > 0.0);
    for (j, value) in buffer.iter_mut().enumerate() {
        let phase = Complex64::from_polar(h, FORWARD_SIGN * grid.frequency(j) * grid.x_min);
        *value *= phase;
    }
    buffer
}

/// Complex inverse `(2π)^{-1} ∫ e^{-iθx} F(θ) dθ` at the grid nodes.
pub fn inverse_transform_complex(spectrum: &[Complex64], grid: &Grid1D) -> Result<Vec<Complex64>> {
    if spectrum.len() != grid.len() {
        return Err(Error::Config(format!(
            "spectrum of length {} does not match grid of {} nodes",
            spectrum.len(),
            grid.len()
        )));
    }
    let scale = 1.0 / (grid.len() as f64 * grid.spacing());
    let mut buffer: Vec<Complex64> = spectrum
        .iter()
        .enumerate()
        .map(|(j, &v)| {
            v * Complex64::from_polar(scale, -FORWARD_SIGN * grid.frequency(j) * grid.x_min)
        })
        .collect();
    fft(&mut buffer, FORWARD_SIGN < 0.0);
    Ok(buffer)
}

/// Real inverse transform. Fails with a numerical-consistency error when the
/// imaginary residual exceeds [`IMAGINARY_RESIDUAL_TOLERANCE`] of the peak
/// magnitude, which signals a multiplier that is not the transform of a real
/// function.
pub fn inverse_transform(spectrum: &[Complex64], grid: &Grid1D) -> Result<GridFunction> {
    let complex = inverse_transform_complex(spectrum, grid)?;
    let peak = complex.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
    let residual = complex.iter().fold(0.0_f64, |m, z| m.max(z.im.abs()));
    if peak > 0.0 && residual > IMAGINARY_RESIDUAL_TOLERANCE * peak {
        return Err(Error::Numerical(format!(
            "imaginary residual {residual:.3e} exceeds {IMAGINARY_RESIDUAL_TOLERANCE:.0e} of peak {peak:.3e}"
        )));
    }
    GridFunction::new(*grid, complex.into_iter().map(|z| z.re).collect())
}

/// `(f * g)(x) = ∫ f(x - y) g(y) dy` by circular convolution on the shared grid.
pub fn convolve(f: &GridFunction, g: &GridFunction) -> Result<GridFunction> {
    convolve_with(f, g, Strictness::Strict)
}

pub fn convolve_with(
    f: &GridFunction,
    g: &GridFunction,
    strictness: Strictness,
) -> Result<GridFunction> {
    f.grid.ensure_same(&g.grid)?;
    if strictness == Strictness::Strict {
        f.check_edges()?;
        g.check_edges()?;
    }
    let grid = f.grid;
    let mut spectrum = forward_transform(f);
    let other = forward_transform(g);
    for (a, b) in spectrum.iter_mut().zip(&other) {
        *a *= b;
    }
    // The product carries a residual phase e^{iθx_min} in the unpaired
    // Nyquist bin.
    project_nyquist(&mut spectrum, &grid);
    inverse_transform(&spectrum, &grid)
}

/// Make the unpaired Nyquist bin consistent with a real inverse by keeping
/// only the real part of its de-phased value. A no-op for spectra of real
/// grid functions; multipliers with odd parts (drifts, skewed jumps) would
/// otherwise leave an imaginary residual there.
pub fn project_nyquist(spectrum: &mut [Complex64], grid: &Grid1D) {
    let nyquist = grid.nyquist_bin();
    let phase = Complex64::from_polar(1.0, FORWARD_SIGN * grid.frequency(nyquist) * grid.x_min);
    let dephased = spectrum[nyquist] * phase.conj();
    spectrum[nyquist] = Complex64::new(dephased.re, 0.0) * phase;
}

/// Trapezoid rule over the grid span.
pub fn integrate(f: &GridFunction) -> f64 {
    let v = &f.values;
    let n = v.len();
    let interior: f64 = v.iter().sum::<f64>() - 0.5 * (v[0] + v[n - 1]);
    interior * f.grid.spacing()
}
