//! Shared numerical kernels: adaptive Gauss–Kronrod quadrature, bracketed
//! root finding, monotone piecewise-cubic interpolation and cumulative
//! integral curves.

// quadrature nodes and weights are kept at full published precision
#![allow(clippy::excessive_precision)]

use crate::error::{Error, Result};

// 15-point Kronrod abscissae on [-1, 1] (positive half) with the embedded
// 7-point Gauss rule, as tabulated in QUADPACK.
const XGK15: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_838_258_730,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];
const WG7: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];
const WGK15: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

/// One 15-point Gauss–Kronrod panel; returns (integral, error estimate).
fn qk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);

    let mut res_gauss = fc * WG7[3];
    let mut res_kronrod = fc * WGK15[7];
    for j in 0..7 {
        let dx = half * XGK15[j];
        let fsum = f(center - dx) + f(center + dx);
        res_kronrod += WGK15[j] * fsum;
        if j % 2 == 1 {
            // odd Kronrod indices coincide with the Gauss-7 abscissae
            res_gauss += WG7[j / 2] * fsum;
        }
    }
    let err = ((res_kronrod - res_gauss) * half).abs();
    (res_kronrod * half, err)
}

/// Adaptive Gauss–Kronrod integration of `f` over `[a, b]` to a mixed
/// absolute/relative tolerance. Bisects the worst panel until the summed
/// error estimate passes, erring with `QuadratureFailure` if the panel
/// budget is exhausted first.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    const MAX_PANELS: usize = 4096;
    let mut panels: Vec<(f64, f64, f64, f64)> = Vec::with_capacity(64);
    let (v, e) = qk15(&f, a, b);
    panels.push((a, b, v, e));
    loop {
        let total: f64 = panels.iter().map(|p| p.2).sum();
        let err: f64 = panels.iter().map(|p| p.3).sum();
        let tol = rel_tol * total.abs().max(1e-300) + 0.1 * rel_tol;
        if err <= tol {
            return Ok(total);
        }
        if panels.len() >= MAX_PANELS {
            return Err(Error::QuadratureFailure { a, b, err });
        }
        // split the panel with the largest error estimate
        let (idx, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .unwrap();
        let (pa, pb, _, _) = panels.swap_remove(idx);
        let mid = 0.5 * (pa + pb);
        if mid <= pa || mid >= pb {
            // interval no longer splittable in f64
            return Err(Error::QuadratureFailure { a, b, err });
        }
        let left = qk15(&f, pa, mid);
        let right = qk15(&f, mid, pb);
        panels.push((pa, mid, left.0, left.1));
        panels.push((mid, pb, right.0, right.1));
    }
}

/// Nodes and weights of the 20-point Gauss–Legendre rule on [-1, 1]
/// (positive half). Used for fixed-panel window integrals where the
/// integrand is smooth.
const XGL20: [f64; 10] = [
    0.076_526_521_133_497_333_755,
    0.227_785_851_141_645_078_080,
    0.373_706_088_715_419_560_673,
    0.510_867_001_950_827_098_004,
    0.636_053_680_726_515_025_453,
    0.746_331_906_460_150_792_614,
    0.839_116_971_822_218_823_395,
    0.912_234_428_251_325_905_868,
    0.963_971_927_277_913_791_268,
    0.993_128_599_185_094_924_786,
];
const WGL20: [f64; 10] = [
    0.152_753_387_130_725_850_698,
    0.149_172_986_472_603_746_788,
    0.142_096_109_318_382_051_329,
    0.131_688_638_449_176_626_898,
    0.118_194_531_961_518_417_312,
    0.101_930_119_817_240_435_037,
    0.083_276_741_576_704_748_725,
    0.062_672_048_334_109_063_570,
    0.040_601_429_800_386_941_331,
    0.017_614_007_139_152_118_312,
];

/// Single 20-point Gauss–Legendre panel over `[a, b]`.
pub fn gauss20<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for j in 0..10 {
        let dx = half * XGL20[j];
        acc += WGL20[j] * (f(center - dx) + f(center + dx));
    }
    acc * half
}

/// Bracketed scalar root finding: bisection with a secant polish.
///
/// Requires `f(lo)` and `f(hi)` of opposite (or zero) sign; converges to
/// `x_tol` in the argument.
pub fn bisect_root<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, x_tol: f64) -> Result<f64> {
    let (mut lo, mut hi) = (lo, hi);
    let mut flo = f(lo);
    let mut fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::RootNotBracketed { lo, hi, flo, fhi });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= x_tol || mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
            fhi = fm;
        }
    }
    // secant polish inside the final bracket
    let mut x0 = lo;
    let mut x1 = hi;
    let mut f0 = flo;
    let mut f1 = fhi;
    for _ in 0..8 {
        let denom = f1 - f0;
        if denom == 0.0 {
            break;
        }
        let x2 = x1 - f1 * (x1 - x0) / denom;
        if !(lo..=hi).contains(&x2) {
            break;
        }
        let f2 = f(x2);
        x0 = x1;
        f0 = f1;
        x1 = x2;
        f1 = f2;
        if f2 == 0.0 || (x1 - x0).abs() <= 0.25 * x_tol {
            break;
        }
    }
    Ok(if f1.abs() <= f0.abs() { x1 } else { x0 })
}

/// Monotone piecewise-cubic Hermite interpolant (Fritsch–Carlson limited
/// derivatives). `C¹` on the knot range; preserves monotonicity of the data
/// and never overshoots flat runs.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    ds: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() || xs.len() < 2 {
            return Err(Error::InvalidTable {
                detail: format!("need >= 2 paired samples, got {}/{}", xs.len(), ys.len()),
            });
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidTable {
                detail: "abscissae must be strictly increasing".into(),
            });
        }
        if xs.iter().chain(ys.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidTable {
                detail: "non-finite sample".into(),
            });
        }
        let n = xs.len();
        let mut slopes = Vec::with_capacity(n - 1);
        for i in 0..n - 1 {
            slopes.push((ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]));
        }
        let mut ds = vec![0.0; n];
        ds[0] = slopes[0];
        ds[n - 1] = slopes[n - 2];
        for i in 1..n - 1 {
            let (s0, s1) = (slopes[i - 1], slopes[i]);
            if s0 * s1 <= 0.0 {
                ds[i] = 0.0;
            } else {
                // weighted harmonic mean (Fritsch–Butland)
                let h0 = xs[i] - xs[i - 1];
                let h1 = xs[i + 1] - xs[i];
                let w0 = 2.0 * h1 + h0;
                let w1 = h1 + 2.0 * h0;
                ds[i] = (w0 + w1) / (w0 / s0 + w1 / s1);
            }
        }
        // clamp endpoint derivatives to preserve monotonicity on end cells
        for (i, s) in [(0usize, slopes[0]), (n - 1, slopes[n - 2])] {
            if ds[i] * s <= 0.0 {
                ds[i] = 0.0;
            } else if ds[i].abs() > 3.0 * s.abs() {
                ds[i] = 3.0 * s;
            }
        }
        Ok(Self { xs, ys, ds })
    }

    pub fn x_min(&self) -> f64 {
        self.xs[0]
    }

    pub fn x_max(&self) -> f64 {
        *self.xs.last().unwrap()
    }

    fn cell(&self, x: f64) -> usize {
        match self.xs.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(i) => i.min(self.xs.len() - 2),
            Err(i) => i.clamp(1, self.xs.len() - 1) - 1,
        }
    }

    /// Evaluate at `x`, clamping outside the knot range to the end values'
    /// cells (linear continuation is never needed by callers).
    pub fn eval(&self, x: f64) -> f64 {
        let i = self.cell(x);
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.ys[i] + h10 * h * self.ds[i] + h01 * self.ys[i + 1] + h11 * h * self.ds[i + 1]
    }

    /// Derivative of the interpolant at `x`.
    pub fn eval_deriv(&self, x: f64) -> f64 {
        let i = self.cell(x);
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let t2 = t * t;
        let dh00 = (6.0 * t2 - 6.0 * t) / h;
        let dh10 = 3.0 * t2 - 4.0 * t + 1.0;
        let dh01 = (-6.0 * t2 + 6.0 * t) / h;
        let dh11 = 3.0 * t2 - 2.0 * t;
        dh00 * self.ys[i] + dh10 * self.ds[i] + dh01 * self.ys[i + 1] + dh11 * self.ds[i + 1]
    }

    /// Solve `eval(x) = y` on the knot range. Requires strictly monotone data.
    pub fn invert(&self, y: f64, x_tol: f64) -> Result<f64> {
        let increasing = self.ys.last().unwrap() > &self.ys[0];
        let (y_lo, y_hi) = if increasing {
            (self.ys[0], *self.ys.last().unwrap())
        } else {
            (*self.ys.last().unwrap(), self.ys[0])
        };
        if y < y_lo || y > y_hi {
            return Err(Error::DomainError {
                op: "MonotoneCubic::invert".into(),
                detail: format!("y = {y} outside data range [{y_lo}, {y_hi}]"),
            });
        }
        bisect_root(|x| self.eval(x) - y, self.x_min(), self.x_max(), x_tol)
    }
}

/// Cumulative integral curve `t ↦ ∫₀ᵗ f` sampled on a uniform grid with one
/// Gauss–Legendre panel per cell, evaluated between samples by a local panel.
/// The curve owns its samples; evaluation is pure.
#[derive(Debug, Clone)]
pub struct CumulativeCurve {
    t_max: f64,
    dt: f64,
    samples: Vec<f64>,
}

impl CumulativeCurve {
    pub fn build<F: Fn(f64) -> f64>(f: F, t_max: f64, cells: usize) -> Self {
        let cells = cells.max(1);
        let dt = t_max / cells as f64;
        let mut samples = Vec::with_capacity(cells + 1);
        samples.push(0.0);
        let mut acc = 0.0;
        for k in 0..cells {
            let a = k as f64 * dt;
            acc += gauss20(&f, a, a + dt);
            samples.push(acc);
        }
        Self { t_max, dt, samples }
    }

    /// Cumulative value at `t ∈ [0, t_max]`; clamps beyond the end.
    pub fn eval<F: Fn(f64) -> f64>(&self, f: F, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t >= self.t_max {
            return *self.samples.last().unwrap();
        }
        let k = ((t / self.dt) as usize).min(self.samples.len() - 2);
        let a = k as f64 * self.dt;
        self.samples[k] + gauss20(&f, a, t)
    }

    pub fn total(&self) -> f64 {
        *self.samples.last().unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn integrates_polynomial_exactly() {
        let v = integrate(|x| 3.0 * x * x, 0.0, 2.0, 1e-12).unwrap();
        assert_relative_eq!(v, 8.0, max_relative = 1e-13);
    }

    #[test]
    fn integrates_singular_endpoint_behaviour() {
        // 1/sqrt(x) on [1e-12, 1]: steep but integrable; adaptive bisection
        // must resolve it.
        let v = integrate(|x| 1.0 / x.sqrt(), 1e-12, 1.0, 1e-10).unwrap();
        assert_relative_eq!(v, 2.0 * (1.0 - 1e-6), max_relative = 1e-9);
    }

    #[test]
    fn quadrature_reports_failure_on_pathological_integrand() {
        // Unresolvable oscillation near 0 exhausts the panel budget.
        let r = integrate(|x| (1.0 / x).sin(), 1e-12, 1.0, 1e-13);
        assert!(r.is_err());
    }

    #[test]
    fn bisect_finds_sqrt2() {
        let x = bisect_root(|x| x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert_relative_eq!(x, std::f64::consts::SQRT_2, epsilon = 1e-12);
    }

    #[test]
    fn bisect_rejects_unbracketed() {
        assert!(matches!(
            bisect_root(|x| x * x + 1.0, -1.0, 1.0, 1e-12),
            Err(Error::RootNotBracketed { .. })
        ));
    }

    #[test]
    fn monotone_cubic_reproduces_knots_and_monotonicity() {
        let xs = vec![0.0, 0.3, 0.5, 0.9, 1.0];
        let ys = vec![0.0, 0.1, 0.4, 0.8, 1.0];
        let c = MonotoneCubic::new(xs.clone(), ys.clone()).unwrap();
        for (x, y) in xs.iter().zip(ys.iter()) {
            assert_eq!(c.eval(*x), *y);
        }
        let mut prev = c.eval(0.0);
        for k in 1..=500 {
            let x = k as f64 / 500.0;
            let v = c.eval(x);
            assert!(v >= prev - 1e-15, "not monotone at {x}");
            prev = v;
        }
    }

    #[test]
    fn monotone_cubic_is_exactly_zero_on_flat_zero_cells() {
        // Left half identically zero, right half positive: queries inside the
        // all-zero cells must return exact 0.0 (the limiter kills the
        // derivative at the junction knot).
        let xs = vec![0.0, 0.25, 0.5, 0.75, 1.0];
        let ys = vec![0.0, 0.0, 0.0, 0.6, 1.0];
        let c = MonotoneCubic::new(xs, ys).unwrap();
        for k in 0..=100 {
            let x = 0.5 * k as f64 / 100.0;
            assert_eq!(c.eval(x), 0.0, "leak at {x}");
        }
    }

    #[test]
    fn monotone_cubic_inverts() {
        let xs: Vec<f64> = (0..=32).map(|i| i as f64 / 32.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.powi(3) + x).collect();
        let c = MonotoneCubic::new(xs, ys).unwrap();
        let x = c.invert(1.0, 1e-13).unwrap();
        // the inverse is with respect to the interpolant itself
        assert_relative_eq!(c.eval(x), 1.0, epsilon = 1e-11);
        // and lands near the true root of x^3 + x = 1 (x ≈ 0.6823278)
        assert_relative_eq!(x, 0.682_327_8, epsilon = 1e-3);
    }

    #[test]
    fn cumulative_curve_matches_closed_form() {
        let f = |t: f64| (2.0 * t).cos();
        let c = CumulativeCurve::build(f, 3.0, 64);
        for k in 0..=30 {
            let t = 3.0 * k as f64 / 30.0;
            assert_relative_eq!(c.eval(f, t), (2.0 * t).sin() / 2.0, epsilon = 1e-12);
        }
    }
}
