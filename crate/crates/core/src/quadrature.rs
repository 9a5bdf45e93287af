//! Scalar quadrature and special functions shared by the solver, the
//! pricing routes and the Monte Carlo sampler.

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Inverse standard normal CDF for `u` in (0, 1), Wichura's AS241
/// (PPND16), relative accuracy about 1e-16.
pub fn norm_inv(u: f64) -> f64 {
    const A: [f64; 8] = [
        3.387_132_872_796_366_608e0,
        1.331_416_678_917_843_774_5e2,
        1.971_590_950_306_551_442_7e3,
        1.373_169_376_550_946_112_5e4,
        4.592_195_393_154_987_145_7e4,
        6.726_577_092_700_870_085_3e4,
        3.343_057_558_358_812_810_5e4,
        2.509_080_928_730_122_672_7e3,
    ];
    const B: [f64; 8] = [
        1.0,
        4.231_333_070_160_091_125_2e1,
        6.871_870_074_920_579_083e2,
        5.394_196_021_424_751_107_7e3,
        2.121_379_430_158_659_586_7e4,
        3.930_789_580_009_271_061e4,
        2.872_908_573_572_194_267_4e4,
        5.226_495_278_852_854_561e3,
    ];
    const C: [f64; 8] = [
        1.423_437_110_749_683_577_34e0,
        4.630_337_846_156_545_295_9e0,
        5.769_497_221_460_691_405_5e0,
        3.647_848_324_763_204_605_04e0,
        1.270_458_252_452_368_382_58e0,
        2.417_807_251_774_506_117_7e-1,
        2.272_384_498_926_918_458_33e-2,
        7.745_450_142_783_414_076_4e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.053_191_626_637_758_821_87e0,
        1.676_384_830_183_803_849_4e0,
        6.897_673_349_851_000_045_5e-1,
        1.481_039_764_274_800_745_9e-1,
        1.519_866_656_361_645_719_66e-2,
        5.475_938_084_995_344_946e-4,
        1.050_750_071_644_416_843_24e-9,
    ];
    const E: [f64; 8] = [
        6.657_904_643_501_103_777_2e0,
        5.463_784_911_164_114_369_9e0,
        1.784_826_539_917_291_335_8e0,
        2.965_605_718_285_048_912_3e-1,
        2.653_218_952_657_612_309_3e-2,
        1.242_660_947_388_078_438_6e-3,
        2.711_555_568_743_487_578_15e-5,
        2.010_334_399_292_288_132_65e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        5.998_322_065_558_879_376_9e-1,
        1.369_298_809_227_358_053_1e-1,
        1.487_536_129_085_061_485_25e-2,
        7.868_691_311_456_132_591e-4,
        1.846_318_317_510_054_681_8e-5,
        1.421_511_758_316_445_888_7e-7,
        2.044_263_103_389_939_785_64e-15,
    ];
    let q = u - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180_625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let tail = if q < 0.0 { u } else { 1.0 - u };
    let mut r = (-tail.ln()).sqrt();
    let x = if r <= 5.0 {
        r -= 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        r -= 5.0;
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

/// Density of `N(mean, var)` at `x`.
pub fn gaussian_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let z = x - mean;
    (-z * z / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

/// Adaptive Simpson quadrature with a relative tolerance (absolute floor
/// `1e-300`), a recursion depth cap and a budget of
/// [`SIMPSON_EVALUATION_BUDGET`] evaluations, after which panels stop
/// refining. The budget bounds the cost on integrands that are zero up to
/// rounding noise.
pub const SIMPSON_EVALUATION_BUDGET: usize = 1 << 20;

pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    // Start from fixed panels so narrow features cannot slip between the
    // first few samples; the coarse pass also sizes the absolute tolerance.
    const PANELS: usize = 32;
    let coarse = composite_simpson(f, a, b, 64).abs();
    let tol = (rel_tol * coarse).max(1e-300) / PANELS as f64;
    let width = (b - a) / PANELS as f64;
    let budget = std::cell::Cell::new(SIMPSON_EVALUATION_BUDGET);
    (0..PANELS)
        .map(|k| {
            let lo = a + k as f64 * width;
            let hi = if k + 1 == PANELS { b } else { lo + width };
            let m = 0.5 * (lo + hi);
            let (fa, fm, fb) = (f(lo), f(m), f(hi));
            let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
            simpson_step(f, lo, hi, fa, fm, fb, whole, tol, 40, &budget)
        })
        .sum()
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    budget: &std::cell::Cell<usize>,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    budget.set(budget.get().saturating_sub(2));
    if depth == 0 || budget.get() == 0 || !delta.is_finite() || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1, budget)
            + simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1, budget)
    }
}

pub fn composite_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let n = 2 * panels.max(1);
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + k as f64 * h);
    }
    sum * h / 3.0
}

/// Four-point Gauss-Legendre nodes and weights on [-1, 1].
pub const GAUSS_LEGENDRE_4: [(f64, f64); 4] = [
    (-0.861_136_311_594_052_6, 0.347_854_845_137_453_85),
    (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_85),
];

/// Smallest truncation index `N` such that the Poisson(`mean`) tail
/// `P(N' > N)` is below `tolerance`, together with that tail mass. Returns
/// `None` if `max_terms` terms do not suffice.
pub fn poisson_truncation(mean: f64, tolerance: f64, max_terms: usize) -> Option<(usize, f64)> {
    if mean <= 0.0 {
        return Some((0, 0.0));
    }
    let count = max_terms + (mean + 40.0 * mean.sqrt()) as usize + 100;
    let weights = poisson_weights(mean, count);
    // Tail sums accumulated from the far end are accurate well below 1e-16.
    let mut tails = vec![0.0; weights.len() + 1];
    for n in (0..weights.len()).rev() {
        tails[n] = tails[n + 1] + weights[n];
    }
    (0..=max_terms)
        .find(|&n| tails[n + 1] < tolerance)
        .map(|n| (n, tails[n + 1]))
}

/// `e^{-m} m^n / n!` for `n < count`, evaluated in log space.
pub fn poisson_weights(mean: f64, count: usize) -> Vec<f64> {
    if mean <= 0.0 {
        let mut w = vec![0.0; count];
        if count > 0 {
            w[0] = 1.0;
        }
        return w;
    }
    let ln_mean = mean.ln();
    let mut ln_fact = 0.0;
    (0..count)
        .map(|n| {
            if n > 0 {
                ln_fact += (n as f64).ln();
            }
            (n as f64 * ln_mean - mean - ln_fact).exp()
        })
        .collect()
}
