//! Adaptive Gauss-Kronrod integration, antiderivative tabulation and monotone inversion.
//!
//! Everything downstream (means, variance clocks, their inverses) reduces to
//! three primitives: a definite integral, a running integral on a grid, and the
//! inverse of an increasing function. All of them are pure functions of their
//! inputs.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerances shared by integration and root-finding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-9,
            max_subdivisions: 2000,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) || !(self.rel_tol > 0.0) {
            return Err(Error::Parameter(format!(
                "quadrature tolerances must be positive (abs_tol = {}, rel_tol = {})",
                self.abs_tol, self.rel_tol
            )));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::Parameter("max_subdivisions must be at least 1".into()));
        }
        Ok(())
    }

    /// Configuration for inversions that should run to (near) machine precision.
    pub(crate) fn machine() -> Self {
        Self {
            abs_tol: f64::MIN_POSITIVE,
            rel_tol: 4.0 * f64::EPSILON,
            max_subdivisions: 2000,
        }
    }

    fn target(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

// 21-point Kronrod extension of the 10-point Gauss rule; abscissae on [-1, 1],
// listed from the outermost node inwards. Odd indices are the Gauss nodes.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_600_225_350_787,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Debug, Clone, Copy)]
struct RuleEstimate {
    value: f64,
    error: f64,
}

fn finite_at<F: Fn(f64) -> f64>(f: &F, x: f64) -> Result<f64> {
    let v = f(x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Evaluation { x, value: v })
    }
}

/// One application of the 10/21-point pair on `[a, b]` with the QUADPACK error heuristic.
fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<RuleEstimate> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = finite_at(f, center)?;
    let mut kronrod = WGK[10] * fc;
    let mut gauss = 0.0;
    let mut abs_sum = kronrod.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = finite_at(f, center - dx)?;
        let f2 = finite_at(f, center + dx)?;
        fv1[j] = f1;
        fv2[j] = f2;
        kronrod += WGK[j] * (f1 + f2);
        abs_sum += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = kronrod * half;
    let res_abs = abs_sum * half.abs();
    let res_asc = asc * half.abs();
    let mut error = ((kronrod - gauss) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }
    Ok(RuleEstimate { value, error })
}

#[derive(Debug)]
struct Segment {
    a: f64,
    b: f64,
    est: RuleEstimate,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.est.error == other.est.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.est.error.total_cmp(&other.est.error)
    }
}

/// Adaptive integral of `f` over `[a, b]` together with its error estimate.
pub fn integrate_with_error<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<(f64, f64)> {
    cfg.validate()?;
    if !(a.is_finite() && b.is_finite()) || a > b {
        return Err(Error::Argument(format!(
            "integration range [{a}, {b}] is not a finite ordered interval"
        )));
    }
    if a == b {
        return Ok((0.0, 0.0));
    }
    // Long ranges start from segments of doubling length anchored at `a`, so a feature
    // near `a` is not lost between the 21 nodes of a single rule (clock-time integrals
    // often run to 1e9 with all their mass near 0).
    let mut ends = vec![a];
    let mut width = 1.0;
    while b - a > 2.0 * width && ends.len() < 1100 {
        ends.push(a + width);
        width *= 2.0;
    }
    ends.push(b);
    let mut total = 0.0;
    let mut total_err = 0.0;
    let mut heap = BinaryHeap::new();
    for w in ends.windows(2) {
        let est = gk21(&f, w[0], w[1])?;
        total += est.value;
        total_err += est.error;
        heap.push(Segment { a: w[0], b: w[1], est });
    }
    let mut subdivisions = heap.len();

    while total_err > cfg.target(total) {
        if subdivisions >= cfg.max_subdivisions {
            return Err(Error::Convergence {
                estimate: total,
                error_bound: total_err,
            });
        }
        let worst = heap.pop().expect("heap holds at least one segment");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval cannot be split any further in f64
            return Err(Error::Convergence {
                estimate: total,
                error_bound: total_err,
            });
        }
        let left = gk21(&f, worst.a, mid)?;
        let right = gk21(&f, mid, worst.b)?;
        total += left.value + right.value - worst.est.value;
        total_err += left.error + right.error - worst.est.error;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            est: left,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            est: right,
        });
        subdivisions += 1;
    }
    // re-sum to shed the drift accumulated by incremental updates
    let value: f64 = heap.iter().map(|s| s.est.value).sum();
    let err: f64 = heap.iter().map(|s| s.est.error).sum();
    Ok((value, err))
}

/// Adaptive integral of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<f64> {
    integrate_with_error(f, a, b, cfg).map(|(v, _)| v)
}

/// Running integral `F[i] = ∫_0^{grid[i]} f` on a strictly increasing grid starting at or after 0.
pub fn antiderivative_on_grid<F: Fn(f64) -> f64>(f: F, grid: &[f64], cfg: &QuadratureConfig) -> Result<Vec<f64>> {
    check_grid(grid)?;
    let mut out = Vec::with_capacity(grid.len());
    let mut acc = integrate(&f, 0.0, grid[0], cfg)?;
    out.push(acc);
    for w in grid.windows(2) {
        acc += integrate(&f, w[0], w[1], cfg)?;
        out.push(acc);
    }
    Ok(out)
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Argument("grid is empty".into()));
    }
    if !(grid[0] >= 0.0) {
        return Err(Error::Argument(format!(
            "grid must start at or after 0, got {}",
            grid[0]
        )));
    }
    if grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::Argument("grid contains non-finite times".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Argument("grid must be strictly increasing".into()));
    }
    Ok(())
}

const MAX_ROOT_ITERATIONS: usize = 200;

/// Solves `g(x) = y` for increasing `g` on `[lo, hi]`.
///
/// Regula falsi with the Illinois modification, falling back to bisection whenever a
/// step fails to halve the bracket. Stops when `|g(x) - y| <= max(abs_tol, rel_tol |y|)`
/// or the bracket has collapsed to adjacent floats.
pub fn invert_monotone<G: Fn(f64) -> f64>(g: G, y: f64, bracket: (f64, f64), cfg: &QuadratureConfig) -> Result<f64> {
    cfg.validate()?;
    let (mut lo, mut hi) = bracket;
    if !(lo <= hi) || !y.is_finite() {
        return Err(Error::Argument(format!("invalid bracket [{lo}, {hi}] or target {y}")));
    }
    let mut g_lo = finite_at(&g, lo)? - y;
    let mut g_hi = finite_at(&g, hi)? - y;
    if g_lo > 0.0 || g_hi < 0.0 {
        return Err(Error::Bracket {
            target: y,
            lo: g_lo + y,
            hi: g_hi + y,
        });
    }
    let tol = cfg.target(y);
    if g_lo.abs() <= tol {
        return Ok(lo);
    }
    if g_hi.abs() <= tol {
        return Ok(hi);
    }

    // side of the last accepted secant update: -1 = lo moved, +1 = hi moved
    let mut last_side = 0i8;
    let mut width = hi - lo;
    let mut best = (lo, g_lo.abs());
    for _ in 0..MAX_ROOT_ITERATIONS {
        let mut x = lo - g_lo * (hi - lo) / (g_hi - g_lo);
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
        let gx = finite_at(&g, x)? - y;
        if gx.abs() < best.1 {
            best = (x, gx.abs());
        }
        if gx.abs() <= tol {
            return Ok(x);
        }
        if gx < 0.0 {
            lo = x;
            g_lo = gx;
            if last_side == -1 {
                g_hi *= 0.5;
            }
            last_side = -1;
        } else {
            hi = x;
            g_hi = gx;
            if last_side == 1 {
                g_lo *= 0.5;
            }
            last_side = 1;
        }
        let new_width = hi - lo;
        if new_width > 0.5 * width {
            // secant stalled: force a bisection
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                return Ok(best.0);
            }
            let gm = finite_at(&g, mid)? - y;
            if gm.abs() < best.1 {
                best = (mid, gm.abs());
            }
            if gm.abs() <= tol {
                return Ok(mid);
            }
            if gm < 0.0 {
                lo = mid;
                g_lo = gm;
            } else {
                hi = mid;
                g_hi = gm;
            }
            last_side = 0;
        }
        width = hi - lo;
        if width <= 2.0 * f64::EPSILON * lo.abs().max(hi.abs()) || width == 0.0 {
            return Ok(best.0);
        }
    }
    Ok(best.0)
}

/// Piecewise cubic Hermite table of an antiderivative, with knots chosen adaptively.
///
/// Derivatives at the knots are exact integrand values, so interpolation error is
/// fourth order in the knot spacing.
#[derive(Debug, Clone)]
pub(crate) struct HermiteTable {
    knots: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

const MAX_TABLE_DEPTH: usize = 60;

impl HermiteTable {
    /// Tabulates `F(x) = ∫_lo^x f` on `[lo, hi]`, refining until the Hermite prediction
    /// at each midpoint matches the integrated value within `tol`.
    pub(crate) fn antiderivative<F: Fn(f64) -> f64>(
        f: F,
        lo: f64,
        hi: f64,
        tol: f64,
        cfg: &QuadratureConfig,
    ) -> Result<Self> {
        let mut table = HermiteTable {
            knots: vec![lo],
            values: vec![0.0],
            slopes: vec![finite_at(&f, lo)?],
        };
        if hi <= lo {
            return Ok(table);
        }
        let f_hi = finite_at(&f, hi)?;
        // (a, b, f(b), depth); processed left to right so values accumulate in order
        let mut stack = vec![(lo, hi, f_hi, 0usize)];
        while let Some((a, b, fb, depth)) = stack.pop() {
            let fa = *table.slopes.last().unwrap();
            let va = *table.values.last().unwrap();
            let m = 0.5 * (a + b);
            let fm = finite_at(&f, m)?;
            let left = integrate(&f, a, m, cfg)?;
            let right = integrate(&f, m, b, cfg)?;
            let vm = va + left;
            let vb = vm + right;
            let predicted = hermite(a, b, va, vb, fa, fb, m);
            let accept = (predicted - vm).abs() <= tol || depth >= MAX_TABLE_DEPTH || m <= a || m >= b;
            if accept {
                table.knots.extend([m, b]);
                table.values.extend([vm, vb]);
                table.slopes.extend([fm, fb]);
            } else {
                stack.push((m, b, fb, depth + 1));
                stack.push((a, m, fm, depth + 1));
            }
        }
        Ok(table)
    }

    pub(crate) fn last_value(&self) -> f64 {
        *self.values.last().unwrap()
    }

    #[cfg(test)]
    pub(crate) fn eval(&self, x: f64) -> f64 {
        let n = self.knots.len();
        if n == 1 || x <= self.knots[0] {
            return self.values[0];
        }
        if x >= self.knots[n - 1] {
            return self.values[n - 1];
        }
        let i = self.knots.partition_point(|&k| k <= x) - 1;
        hermite(
            self.knots[i],
            self.knots[i + 1],
            self.values[i],
            self.values[i + 1],
            self.slopes[i],
            self.slopes[i + 1],
            x,
        )
    }

    /// `∫ g(x, F(x)) dx` over the table range, using the 21-point Kronrod rule on each
    /// knot interval (exact when `g` is a polynomial of degree ≤ 31 in x along the cubic).
    pub(crate) fn integrate_composed<G: Fn(f64, f64) -> f64>(&self, g: G) -> f64 {
        let mut total = 0.0;
        for i in 0..self.knots.len().saturating_sub(1) {
            let (a, b) = (self.knots[i], self.knots[i + 1]);
            let (va, vb, fa, fb) = (self.values[i], self.values[i + 1], self.slopes[i], self.slopes[i + 1]);
            let c = 0.5 * (a + b);
            let h = 0.5 * (b - a);
            let eval = |x: f64| g(x, hermite(a, b, va, vb, fa, fb, x));
            let mut acc = WGK[10] * eval(c);
            for j in 0..10 {
                let dx = h * XGK[j];
                acc += WGK[j] * (eval(c - dx) + eval(c + dx));
            }
            total += acc * h;
        }
        total
    }
}

fn hermite(a: f64, b: f64, va: f64, vb: f64, da: f64, db: f64, x: f64) -> f64 {
    let h = b - a;
    let s = (x - a) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    h00 * va + h10 * h * da + h01 * vb + h11 * h * db
}
