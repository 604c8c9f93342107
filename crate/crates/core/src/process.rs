//! Gauss-Markov process specifications `X(t) = m(t) + h2(t) B(rho(t))`.
//!
//! A [`ProcessSpec`] holds the mean `m`, the covariance factors `h1`, `h2`
//! (with `c(s, t) = h1(s) h2(t)` for `s <= t`) and the Brownian clock
//! `rho = h1 / h2`. Presets additionally carry closed-form companions
//! (clock derivative and inverse, integrated mean, `R1`, `gamma1`) which the
//! law computation prefers over numerics when present.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{invert_monotone, QuadratureConfig};

/// A deterministic real function of one variable, shareable across threads.
pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

pub fn real_fn<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F) -> RealFn {
    Arc::new(f)
}

/// Fraction of a finite domain that stays usable: requests must satisfy `t <= T (1 - 1e-9)`.
pub const DOMAIN_CLAMP: f64 = 1e-9;

/// Relative tolerance of the `rho = h1 / h2` consistency check.
pub const RATIO_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Default)]
struct Companions {
    rho_prime: Option<RealFn>,
    rho_inverse: Option<RealFn>,
    mean_integral: Option<RealFn>,
    r1: Option<RealFn>,
    gamma1: Option<RealFn>,
}

/// Serializable description of the built-in processes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", content = "params", rename_all = "snake_case")]
pub enum Preset {
    /// `X(t) = mu t + B(t)`.
    BmDrift {
        #[serde(default)]
        mu: f64,
    },
    /// `dX = -mu (X - beta) dt + sigma dB`, `X(0) = x0`.
    Ou {
        #[serde(default = "one")]
        mu: f64,
        #[serde(default)]
        beta: f64,
        #[serde(default = "one")]
        sigma: f64,
        #[serde(default)]
        x0: f64,
    },
    /// Brownian bridge from `a` at time 0 to `b` at time `T`.
    Bridge {
        #[serde(rename = "T", default = "one")]
        t_end: f64,
        #[serde(default)]
        a: f64,
        #[serde(default)]
        b: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl Preset {
    /// Parses `{"preset": "...", "params": {...}}`; `params` may be omitted to take defaults.
    pub fn from_json(text: &str) -> Result<Self> {
        let mut value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Argument(format!("process JSON: {e}")))?;
        if let Some(obj) = value.as_object_mut() {
            obj.entry("params").or_insert_with(|| serde_json::json!({}));
        }
        serde_json::from_value(value).map_err(|e| Error::Argument(format!("process JSON: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("preset serializes")
    }

    pub fn build(&self) -> Result<ProcessSpec> {
        match *self {
            Preset::BmDrift { mu } => Ok(preset_bm_drift(mu)),
            Preset::Ou { mu, beta, sigma, x0 } => preset_ou(mu, beta, sigma, x0),
            Preset::Bridge { t_end, a, b } => preset_bridge(t_end, a, b),
        }
    }
}

/// A Gauss-Markov process. Immutable once built; every evaluation is pure.
#[derive(Clone)]
pub struct ProcessSpec {
    label: String,
    m: RealFn,
    h1: RealFn,
    h2: RealFn,
    rho: RealFn,
    domain_end: f64,
    companions: Companions,
    preset: Option<Preset>,
}

impl fmt::Debug for ProcessSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProcessSpec")
            .field("label", &self.label)
            .field("domain_end", &self.domain_end)
            .field("preset", &self.preset)
            .finish_non_exhaustive()
    }
}

impl ProcessSpec {
    /// User-defined process on `[0, +inf)` with no closed-form companions.
    pub fn new(label: impl Into<String>, m: RealFn, h1: RealFn, h2: RealFn, rho: RealFn) -> Self {
        Self {
            label: label.into(),
            m,
            h1,
            h2,
            rho,
            domain_end: f64::INFINITY,
            companions: Companions::default(),
            preset: None,
        }
    }

    pub fn with_domain_end(mut self, end: f64) -> Self {
        self.domain_end = end;
        self
    }

    pub fn with_rho_prime(mut self, f: RealFn) -> Self {
        self.companions.rho_prime = Some(f);
        self
    }

    pub fn with_rho_inverse(mut self, f: RealFn) -> Self {
        self.companions.rho_inverse = Some(f);
        self
    }

    /// Closed form of `M(t) = ∫_0^t m`.
    pub fn with_mean_integral(mut self, f: RealFn) -> Self {
        self.companions.mean_integral = Some(f);
        self
    }

    /// Closed form of `R1` in clock time.
    pub fn with_r1(mut self, f: RealFn) -> Self {
        self.companions.r1 = Some(f);
        self
    }

    /// Closed form of `gamma1` in clock time.
    pub fn with_gamma1(mut self, f: RealFn) -> Self {
        self.companions.gamma1 = Some(f);
        self
    }

    /// The same process with every closed-form companion dropped, so all derived
    /// quantities go through quadrature, finite differences and root-finding.
    pub fn numeric(&self) -> Self {
        Self {
            label: format!("{} (numeric)", self.label),
            companions: Companions::default(),
            preset: None,
            ..self.clone()
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn preset(&self) -> Option<Preset> {
        self.preset
    }

    pub fn domain_end(&self) -> f64 {
        self.domain_end
    }

    /// Largest admissible time: `T (1 - 1e-9)` on a finite domain, `+inf` otherwise.
    pub fn max_time(&self) -> f64 {
        if self.domain_end.is_finite() {
            self.domain_end * (1.0 - DOMAIN_CLAMP)
        } else {
            f64::INFINITY
        }
    }

    pub fn check_time(&self, t: f64) -> Result<f64> {
        if !t.is_finite() || t < 0.0 || t > self.max_time() {
            return Err(Error::Domain(format!(
                "time {t} outside [0, {}] for process '{}'",
                self.max_time(),
                self.label
            )));
        }
        Ok(t)
    }

    pub fn m(&self, t: f64) -> f64 {
        (self.m)(t)
    }

    pub fn h1(&self, t: f64) -> f64 {
        (self.h1)(t)
    }

    pub fn h2(&self, t: f64) -> f64 {
        (self.h2)(t)
    }

    pub fn rho(&self, t: f64) -> f64 {
        (self.rho)(t)
    }

    pub fn has_closed_rho_prime(&self) -> bool {
        self.companions.rho_prime.is_some()
    }

    /// `rho'(t)`: closed form when attached, otherwise a second-order finite difference
    /// with step `max(1e-6, 1e-6 t)` (one-sided near the ends of the domain).
    pub fn rho_prime(&self, t: f64) -> f64 {
        if let Some(d) = &self.companions.rho_prime {
            return d(t);
        }
        let h = 1e-6f64.max(1e-6 * t.abs());
        let rho = |x: f64| (self.rho)(x);
        if t - h < 0.0 {
            (-3.0 * rho(t) + 4.0 * rho(t + h) - rho(t + 2.0 * h)) / (2.0 * h)
        } else if t + h >= self.domain_end {
            (3.0 * rho(t) - 4.0 * rho(t - h) + rho(t - 2.0 * h)) / (2.0 * h)
        } else {
            (rho(t + h) - rho(t - h)) / (2.0 * h)
        }
    }

    /// `rho^{-1}(s)`: closed form when attached, otherwise monotone root-finding on a
    /// geometrically grown bracket inside the admissible domain.
    pub fn rho_inverse(&self, s: f64) -> Result<f64> {
        if let Some(inv) = &self.companions.rho_inverse {
            if !(s >= 0.0) || !s.is_finite() {
                return Err(Error::Domain(format!("clock value {s} outside [0, inf)")));
            }
            return Ok(inv(s));
        }
        let rho = |x: f64| (self.rho)(x);
        increasing_inverse(rho, s, self.max_time(), "clock")
    }

    /// `M(t) = ∫_0^t m`, closed form when attached.
    pub(crate) fn closed_mean_integral(&self, t: f64) -> Option<f64> {
        self.companions.mean_integral.as_ref().map(|f| f(t))
    }

    pub(crate) fn closed_r1(&self) -> Option<&RealFn> {
        self.companions.r1.as_ref()
    }

    pub(crate) fn closed_gamma1(&self) -> Option<&RealFn> {
        self.companions.gamma1.as_ref()
    }

    fn with_preset(mut self, preset: Preset) -> Self {
        self.preset = Some(preset);
        self
    }
}

/// Inverts an increasing function with `g(0) <= y` on `[0, max_x]`, growing the bracket
/// geometrically from 1.
pub(crate) fn increasing_inverse<G: Fn(f64) -> f64>(g: G, y: f64, max_x: f64, what: &str) -> Result<f64> {
    let g0 = g(0.0);
    if !y.is_finite() || y < g0 {
        return Err(Error::Domain(format!("{what} value {y} below its value at 0 ({g0})")));
    }
    if y == g0 {
        return Ok(0.0);
    }
    let mut hi = max_x.min(1.0);
    loop {
        let g_hi = g(hi);
        if g_hi.is_nan() {
            return Err(Error::Domain(format!("{what} is not finite at {hi}")));
        }
        if g_hi >= y {
            break;
        }
        if hi >= max_x {
            return Err(Error::Domain(format!(
                "{what} value {y} not reached on the admissible domain [0, {max_x}]"
            )));
        }
        hi = (2.0 * hi).min(max_x);
        if !hi.is_finite() {
            return Err(Error::Domain(format!("{what} value {y} not reached")));
        }
    }
    invert_monotone(&g, y, (0.0, hi), &QuadratureConfig::machine())
}

/// One invariant failure found by [`validate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    ClockNotIncreasing {
        from: f64,
        to: f64,
        rho_from: f64,
        rho_to: f64,
    },
    NonPositiveCovariance {
        t: f64,
        h1h2: f64,
    },
    RatioMismatch {
        t: f64,
        rho: f64,
        ratio: f64,
    },
    ClockOrigin {
        rho0: f64,
    },
    NonFinite {
        t: f64,
    },
    /// Warning: numeric estimate of `rho'` is non-finite or not positive.
    ClockDerivative {
        t: f64,
        estimate: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ClockNotIncreasing {
                from,
                to,
                rho_from,
                rho_to,
            } => write!(
                f,
                "rho not strictly increasing on [{from}, {to}]: rho = {rho_from} -> {rho_to}"
            ),
            Violation::NonPositiveCovariance { t, h1h2 } => write!(f, "h1*h2 = {h1h2} <= 0 at t = {t}"),
            Violation::RatioMismatch { t, rho, ratio } => {
                write!(f, "rho = {rho} differs from h1/h2 = {ratio} at t = {t}")
            }
            Violation::ClockOrigin { rho0 } => write!(f, "rho(0) = {rho0}, expected 0"),
            Violation::NonFinite { t } => write!(f, "non-finite process function value at t = {t}"),
            Violation::ClockDerivative { t, estimate } => {
                write!(f, "numeric rho'({t}) = {estimate} is not a positive finite number")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "no violations");
        }
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join("; "))
    }
}

/// Checks the structural assumptions of the representation on `grid`.
pub fn validate(spec: &ProcessSpec, grid: &[f64]) -> Result<ValidationReport> {
    if grid.len() < 2 {
        return Err(Error::Domain(format!(
            "validation grid needs at least 2 points, got {}",
            grid.len()
        )));
    }
    for &t in grid {
        spec.check_time(t)?;
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Argument("validation grid must be strictly increasing".into()));
    }

    let mut report = ValidationReport::default();
    let rho0 = spec.rho(0.0);
    if !rho0.is_finite() || rho0.abs() > 1e-12 {
        report.violations.push(Violation::ClockOrigin { rho0 });
    }

    let rhos: Vec<f64> = grid.iter().map(|&t| spec.rho(t)).collect();
    for (&t, &rho) in grid.iter().zip(&rhos) {
        let (h1, h2) = (spec.h1(t), spec.h2(t));
        if !(rho.is_finite() && h1.is_finite() && h2.is_finite()) {
            report.violations.push(Violation::NonFinite { t });
            continue;
        }
        if t > 0.0 && !(h1 * h2 > 0.0) {
            report
                .violations
                .push(Violation::NonPositiveCovariance { t, h1h2: h1 * h2 });
        }
        if h2 != 0.0 {
            let ratio = h1 / h2;
            let scale = rho.abs().max(ratio.abs());
            if (rho - ratio).abs() > RATIO_TOLERANCE * scale {
                report.violations.push(Violation::RatioMismatch { t, rho, ratio });
            }
        }
        if !spec.has_closed_rho_prime() {
            let d = spec.rho_prime(t);
            if !(d.is_finite() && d > 0.0) {
                report.warnings.push(Violation::ClockDerivative { t, estimate: d });
            }
        }
    }
    for (w, r) in grid.windows(2).zip(rhos.windows(2)) {
        if !(r[1] > r[0]) {
            report.violations.push(Violation::ClockNotIncreasing {
                from: w[0],
                to: w[1],
                rho_from: r[0],
                rho_to: r[1],
            });
        }
    }
    Ok(report)
}

/// Brownian motion with drift: `m = mu t`, `h1 = t`, `h2 = 1`, `rho = t`.
pub fn preset_bm_drift(mu: f64) -> ProcessSpec {
    ProcessSpec::new(
        format!("bm_drift(mu={mu})"),
        real_fn(move |t| mu * t),
        real_fn(|t| t),
        real_fn(|_| 1.0),
        real_fn(|t| t),
    )
    .with_rho_prime(real_fn(|_| 1.0))
    .with_rho_inverse(real_fn(|s| s))
    .with_mean_integral(real_fn(move |t| 0.5 * mu * t * t))
    .with_r1(real_fn(|s| s))
    .with_gamma1(real_fn(|s| s * s * s / 3.0))
    .with_preset(Preset::BmDrift { mu })
}

/// Ornstein-Uhlenbeck process `dX = -mu (X - beta) dt + sigma dB`, `X(0) = x0`.
pub fn preset_ou(mu: f64, beta: f64, sigma: f64, x0: f64) -> Result<ProcessSpec> {
    if !(mu > 0.0 && mu.is_finite()) || !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Parameter(format!(
            "OU needs mu > 0 and sigma > 0, got mu = {mu}, sigma = {sigma}"
        )));
    }
    if !beta.is_finite() || !x0.is_finite() {
        return Err(Error::Parameter("OU beta and x0 must be finite".into()));
    }
    let s2 = sigma * sigma;
    let k = 2.0 * mu / s2;
    Ok(ProcessSpec::new(
        format!("ou(mu={mu},beta={beta},sigma={sigma},x0={x0})"),
        real_fn(move |t| beta + (-mu * t).exp() * (x0 - beta)),
        real_fn(move |t| s2 / mu * (mu * t).sinh()),
        real_fn(move |t| (-mu * t).exp()),
        real_fn(move |t| s2 / (2.0 * mu) * (2.0 * mu * t).exp_m1()),
    )
    .with_rho_prime(real_fn(move |t| s2 * (2.0 * mu * t).exp()))
    .with_rho_inverse(real_fn(move |s| (k * s).ln_1p() / (2.0 * mu)))
    .with_mean_integral(real_fn(move |t| beta * t - (x0 - beta) / mu * (-mu * t).exp_m1()))
    .with_r1(real_fn(move |s| -(-0.5 * (k * s).ln_1p()).exp_m1() / mu))
    .with_gamma1(real_fn(move |s| ou_gamma1(mu, sigma, s)))
    .with_preset(Preset::Ou { mu, beta, sigma, x0 }))
}

/// `gamma1` for the OU clock:
/// `sigma^2 t / (mu^2 (sigma^2 + 2 mu t)) - 2 sigma^2 (sqrt(1+x) - 1) / (mu^3 sqrt(1+x)) + sigma^2 ln(1+x) / (2 mu^3)`
/// with `x = 2 mu t / sigma^2`. The three terms cancel to `O(x^3)`, so small `x` uses
/// the power series of the same expression.
pub(crate) fn ou_gamma1(mu: f64, sigma: f64, t: f64) -> f64 {
    let s2 = sigma * sigma;
    let x = 2.0 * mu * t / s2;
    let scale = s2 / (2.0 * mu * mu * mu);
    if x < 0.1 {
        // x/(1+x) - 4(1 - (1+x)^{-1/2}) + ln(1+x) = sum_{n>=3} c_n x^n, the n = 1, 2 terms cancel
        let mut binom = 1.0; // binom(-1/2, n)
        let mut xn = 1.0;
        let mut sum = 0.0;
        for n in 1..=40 {
            let nf = n as f64;
            binom *= (-0.5 - (nf - 1.0)) / nf;
            xn *= x;
            if n < 3 {
                continue;
            }
            let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
            let c = sign * (1.0 + 1.0 / nf) + 4.0 * binom;
            sum += c * xn;
        }
        scale * sum
    } else {
        let root = (1.0 + x).sqrt();
        s2 * t / (mu * mu * (s2 + 2.0 * mu * t)) - 2.0 * s2 / (mu * mu * mu * root) * (root - 1.0) + scale * x.ln_1p()
    }
}

/// Brownian bridge on `[0, T]` pinned at `a` and `b`.
pub fn preset_bridge(t_end: f64, a: f64, b: f64) -> Result<ProcessSpec> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::Parameter(format!("bridge needs T > 0, got {t_end}")));
    }
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::Parameter("bridge end points must be finite".into()));
    }
    let tt = t_end;
    Ok(ProcessSpec::new(
        format!("bridge(T={tt},a={a},b={b})"),
        real_fn(move |t| a * (1.0 - t / tt) + b * t / tt),
        real_fn(move |t| t / tt),
        real_fn(move |t| tt - t),
        real_fn(move |t| t / (tt * (tt - t))),
    )
    .with_domain_end(tt)
    .with_rho_prime(real_fn(move |t| (tt - t).powi(-2)))
    .with_rho_inverse(real_fn(move |s| tt * tt * s / (1.0 + tt * s)))
    .with_mean_integral(real_fn(move |t| a * t + (b - a) / (2.0 * tt) * t * t))
    .with_r1(real_fn(move |s| {
        let u = 1.0 + tt * s;
        tt * tt * tt * s * (2.0 + tt * s) / (2.0 * u * u)
    }))
    .with_preset(Preset::Bridge { t_end: tt, a, b }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
    }

    #[test]
    fn bm_preset_is_valid() {
        let spec = preset_bm_drift(0.0);
        let report = validate(&spec, &[0.0, 0.5, 1.0]).unwrap();
        assert!(report.is_valid(), "{report}");
        assert_eq!(spec.m(3.0), 0.0);
        assert_eq!(spec.rho(2.0), 2.0);
        assert_eq!(preset_bm_drift(0.5).m(2.0), 1.0);
        assert!((spec.closed_gamma1().unwrap()(1.0) - 1.0 / 3.0).abs() < 1e-16);
        assert_eq!(spec.closed_r1().unwrap()(2.5), 2.5);
    }

    #[test]
    fn decreasing_clock_is_reported() {
        let spec = ProcessSpec::new(
            "bad",
            real_fn(|_| 0.0),
            real_fn(|t| -t),
            real_fn(|_| 1.0),
            real_fn(|t| -t),
        );
        let report = validate(&spec, &[0.0, 1.0]).unwrap();
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::ClockNotIncreasing { .. })));
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::NonPositiveCovariance { .. })));
        assert!(!report.warnings.is_empty());
    }

    #[test]
    fn ratio_mismatch_is_reported() {
        let spec = ProcessSpec::new(
            "mismatch",
            real_fn(|_| 0.0),
            real_fn(|t| t),
            real_fn(|_| 1.0),
            real_fn(|t| 2.0 * t),
        );
        let report = validate(&spec, &[0.0, 1.0]).unwrap();
        assert!(matches!(report.violations[..], [Violation::RatioMismatch { .. }]));
    }

    #[test]
    fn validation_grid_errors() {
        let spec = preset_bm_drift(0.0);
        assert!(matches!(validate(&spec, &[]), Err(Error::Domain(_))));
        assert!(matches!(validate(&spec, &[-1.0, 1.0]), Err(Error::Domain(_))));
        let bridge = preset_bridge(1.0, 0.0, 0.0).unwrap();
        assert!(matches!(validate(&bridge, &[0.0, 1.0]), Err(Error::Domain(_))));
        assert!(validate(&spec, &[1.0, 0.5]).is_err());
    }

    #[test]
    fn bridge_preset_values() {
        let spec = preset_bridge(1.0, 0.0, 0.0).unwrap();
        let report = validate(&spec, &[0.0, 0.5, 0.9]).unwrap();
        assert!(report.is_valid(), "{report}");
        // oracle: h1 = t/T, h2 = T - t evaluated by hand on the grid
        for &(t, h1, h2) in &[(0.5, 0.5, 0.5), (0.9, 0.9, 0.1)] {
            assert!((spec.h1(t) - h1).abs() < 1e-15);
            assert!((spec.h2(t) - h2).abs() < 1e-15);
            assert!(rel(spec.rho(t), h1 / h2) < 1e-14);
        }
        assert_eq!(spec.rho(0.5), 1.0);
        assert_eq!(spec.rho_inverse(1.0).unwrap(), 0.5);
        assert!((spec.closed_r1().unwrap()(1.0) - 0.375).abs() < 1e-15);

        let spec = preset_bridge(2.0, 1.5, -0.5).unwrap();
        assert_eq!(spec.m(0.0), 1.5);
        assert_eq!(spec.m(2.0), -0.5);
        assert_eq!(spec.h2(2.0), 0.0);
        assert!(matches!(preset_bridge(0.0, 0.0, 0.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn bridge_r1_matches_quadrature_of_integrand() {
        // R1(1) = ∫_0^1 h2(rho^{-1}(s)) / rho'(rho^{-1}(s)) ds at T = 1
        let spec = preset_bridge(1.0, 0.0, 0.0).unwrap();
        let f = |s: f64| {
            let t = spec.rho_inverse(s).unwrap();
            spec.h2(t) / spec.rho_prime(t)
        };
        let r1 = integrate(f, 0.0, 1.0, &QuadratureConfig::default()).unwrap();
        assert!((r1 - 0.375).abs() < 1e-12);
    }

    #[test]
    fn bridge_clamp() {
        let spec = preset_bridge(1.0, 0.0, 0.0).unwrap();
        assert!(spec.check_time(1.0 - 1e-9).is_ok());
        assert!(spec.check_time(1.0 - 1e-10).is_err());
        assert!(spec.check_time(-0.1).is_err());
    }

    #[test]
    fn ou_preset_values() {
        let spec = preset_ou(1.0, 0.0, 1.0, 0.0).unwrap();
        assert_eq!(spec.rho(0.0), 0.0);
        assert_eq!(spec.m(0.3), 0.0);
        let back = spec.rho_inverse(spec.rho(0.7)).unwrap();
        assert!((back - 0.7).abs() < 1e-12);
        let spec = preset_ou(1.0, 2.0, 1.0, 5.0).unwrap();
        assert!((spec.m(50.0) - 2.0).abs() < 1e-15);
        assert!(matches!(preset_ou(0.0, 0.0, 1.0, 0.0), Err(Error::Parameter(_))));
        assert!(matches!(preset_ou(1.0, 0.0, -1.0, 0.0), Err(Error::Parameter(_))));
        let report = validate(&spec, &[0.0, 1e-8, 0.3, 2.0, 7.0]).unwrap();
        assert!(report.is_valid(), "{report}");
    }

    #[test]
    fn ou_gamma1_branches_match_quadrature() {
        for &(mu, sigma) in &[(1.0, 1.0), (0.5, 2.0), (3.0, 0.7)] {
            let spec = preset_ou(mu, 0.0, sigma, 0.0).unwrap();
            let r1 = spec.closed_r1().unwrap().clone();
            for &u in &[1e-4, 0.01, 0.04, 0.05, 0.2, 1.0, 5.0] {
                let ru = r1(u);
                let oracle = integrate(|s| (ru - r1(s)).powi(2), 0.0, u, &QuadratureConfig::default()).unwrap();
                let closed = ou_gamma1(mu, sigma, u);
                assert!(
                    rel(closed, oracle) < 1e-8,
                    "mu {mu} sigma {sigma} u {u}: {closed} vs {oracle}"
                );
            }
        }
    }

    #[test]
    fn numeric_rho_prime_and_inverse() {
        let spec = preset_ou(1.0, 0.0, 1.0, 0.0).unwrap();
        let num = spec.numeric();
        for &t in &[0.0, 1e-7, 0.3, 1.0, 2.5] {
            assert!(rel(num.rho_prime(t), spec.rho_prime(t)) < 1e-8, "t = {t}");
            let s = spec.rho(t);
            assert!((num.rho_inverse(s).unwrap() - t).abs() <= 1e-12 * t.max(1.0));
        }
        let bridge = preset_bridge(1.0, 0.0, 0.0).unwrap().numeric();
        assert!((bridge.rho_inverse(1.0).unwrap() - 0.5).abs() < 1e-14);
        assert!(bridge.rho_inverse(-1.0).is_err());
        assert!(bridge.rho_inverse(1e12).is_err());
    }

    #[test]
    fn preset_json_round_trip() {
        let p =
            Preset::from_json(r#"{"preset": "ou", "params": {"mu": 2, "beta": 1, "sigma": 0.5, "x0": 3}}"#).unwrap();
        assert_eq!(
            p,
            Preset::Ou {
                mu: 2.0,
                beta: 1.0,
                sigma: 0.5,
                x0: 3.0
            }
        );
        assert_eq!(Preset::from_json(&p.to_json()).unwrap(), p);
        let p = Preset::from_json(r#"{"preset": "bridge", "params": {"T": 2}}"#).unwrap();
        assert_eq!(
            p,
            Preset::Bridge {
                t_end: 2.0,
                a: 0.0,
                b: 0.0
            }
        );
        assert_eq!(
            Preset::from_json(r#"{"preset": "bm_drift"}"#).unwrap(),
            Preset::BmDrift { mu: 0.0 }
        );
        assert!(Preset::from_json(r#"{"preset": "heston"}"#).is_err());
    }

    proptest! {
        #[test]
        fn presets_satisfy_invariants(
            mu in 0.1f64..3.0,
            sigma in 0.2f64..3.0,
            tt in 0.2f64..5.0,
            mut fracs in proptest::collection::vec(0.0f64..1.0, 2..20),
        ) {
            fracs.sort_by(f64::total_cmp);
            fracs.dedup();
            prop_assume!(fracs.len() >= 2 && fracs.windows(2).all(|w| w[1] - w[0] > 1e-9));
            let specs = [
                (preset_bm_drift(mu), 4.0),
                (preset_ou(mu, 0.3, sigma, -1.0).unwrap(), 3.0),
                (preset_bridge(tt, 0.2, 0.7).unwrap(), tt * 0.999),
            ];
            for (spec, span) in specs.iter() {
                let grid: Vec<f64> = fracs.iter().map(|f| f * span).collect();
                let report = validate(spec, &grid).unwrap();
                prop_assert!(report.is_valid(), "{}: {}", spec.label(), report);
                for &t in &grid {
                    let back = spec.rho_inverse(spec.rho(t)).unwrap();
                    prop_assert!((back - t).abs() <= 1e-10 * t.max(1e-300) + 1e-15);
                }
            }
        }

        #[test]
        fn ou_covariance_factorization(mu in 0.1f64..3.0, sigma in 0.2f64..3.0, a in 0.01f64..3.0, b in 0.01f64..3.0) {
            let (s, t) = if a <= b { (a, b) } else { (b, a) };
            prop_assume!(t > 0.0);
            let spec = preset_ou(mu, 0.0, sigma, 0.0).unwrap();
            let factored = spec.h1(s) * spec.h2(t);
            let standard = sigma * sigma / (2.0 * mu) * ((-mu * (t - s)).exp() - (-mu * (t + s)).exp());
            prop_assert!((factored - standard).abs() <= 1e-10 * standard.abs().max(1e-300) + 1e-300);
        }
    }
}
