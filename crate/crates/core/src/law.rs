//! The Gaussian law of `Y(t) = ∫_0^t X(s) ds`.
//!
//! With the clock integrand `f(s) = h2(rho^{-1}(s)) / rho'(rho^{-1}(s))`, its running
//! integral `R1(u) = ∫_0^u f` and
//!
//! ```text
//! gamma1(u) = ∫_0^u (R1(u) - R1(s))^2 ds,
//! ```
//!
//! `Y(t)` is normal with mean `M(t) = ∫_0^t m` and variance `gamma_bar(t) = gamma1(rho(t))`,
//! and `Y(t) - M(t)` is a Brownian motion run on the clock `gamma_bar`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::process::{increasing_inverse, validate, ProcessSpec};
use crate::quadrature::{integrate, HermiteTable, QuadratureConfig};

/// Number of clock points at which `f > 0` is checked when a law is built.
pub const POSITIVITY_CHECK_POINTS: usize = 1000;

/// Process-time span checked on unbounded domains when no horizon is given.
pub const DEFAULT_CHECK_HORIZON: f64 = 10.0;

const VALIDATION_POINTS: usize = 100;

/// Mean and variance of a normal law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormalLaw {
    pub mean: f64,
    pub variance: f64,
}

/// Law of the integrated process. Immutable after [`build_law`]; evaluations are pure.
#[derive(Debug, Clone)]
pub struct IntegralLaw {
    spec: ProcessSpec,
    cfg: QuadratureConfig,
}

/// Builds the law, checking the process on `[0, min(10, T(1 - 1e-9))]`.
pub fn build_law(spec: ProcessSpec, cfg: QuadratureConfig) -> Result<IntegralLaw> {
    build_law_on(spec, cfg, None)
}

/// Builds the law, checking the process assumptions and `f > 0` up to `horizon`
/// (or a default span when `None`).
pub fn build_law_on(spec: ProcessSpec, cfg: QuadratureConfig, horizon: Option<f64>) -> Result<IntegralLaw> {
    cfg.validate()?;
    let span = horizon.unwrap_or(DEFAULT_CHECK_HORIZON).min(spec.max_time());
    if !(span > 0.0) {
        return Err(Error::Domain(format!("check horizon {span} must be positive")));
    }
    spec.check_time(span)?;

    let grid: Vec<f64> = (0..VALIDATION_POINTS)
        .map(|i| (span * i as f64 / (VALIDATION_POINTS - 1) as f64).min(span))
        .collect();
    let report = validate(&spec, &grid)?;
    if !report.is_valid() {
        return Err(Error::Validation(report));
    }

    let law = IntegralLaw { spec, cfg };
    for i in 0..POSITIVITY_CHECK_POINTS {
        let t = (span * i as f64 / (POSITIVITY_CHECK_POINTS - 1) as f64).min(span);
        let s = law.spec.rho(t);
        if !s.is_finite() {
            break;
        }
        let f = law.f(s)?;
        if !(f > 0.0 && f.is_finite()) {
            return Err(Error::Representation(format!("f({s}) = {f} at process time t = {t}")));
        }
    }
    Ok(law)
}

impl IntegralLaw {
    pub fn spec(&self) -> &ProcessSpec {
        &self.spec
    }

    pub fn config(&self) -> &QuadratureConfig {
        &self.cfg
    }

    /// `M(t) = ∫_0^t m(s) ds`.
    pub fn mean(&self, t: f64) -> Result<f64> {
        self.spec.check_time(t)?;
        match self.spec.closed_mean_integral(t) {
            Some(v) => Ok(v),
            None => integrate(|s| self.spec.m(s), 0.0, t, &self.cfg),
        }
    }

    /// Clock integrand `f(s) = h2(rho^{-1}(s)) / rho'(rho^{-1}(s))`.
    pub fn f(&self, s: f64) -> Result<f64> {
        let t = self.spec.rho_inverse(s)?;
        Ok(self.spec.h2(t) / self.spec.rho_prime(t))
    }

    fn f_or_nan(&self, s: f64) -> f64 {
        self.f(s).unwrap_or(f64::NAN)
    }

    fn check_clock(u: f64) -> Result<()> {
        if !(u >= 0.0) || !u.is_finite() {
            return Err(Error::Domain(format!("clock time {u} outside [0, inf)")));
        }
        Ok(())
    }

    /// `R1(u) = ∫_0^u f`.
    pub fn r1(&self, u: f64) -> Result<f64> {
        Self::check_clock(u)?;
        match self.spec.closed_r1() {
            Some(r) => Ok(r(u)),
            None => integrate(|s| self.f_or_nan(s), 0.0, u, &self.cfg),
        }
    }

    /// `gamma1(u) = ∫_0^u (R1(u) - R1(s))^2 ds`, in clock time.
    pub fn gamma1(&self, u: f64) -> Result<f64> {
        Self::check_clock(u)?;
        if u == 0.0 {
            return Ok(0.0);
        }
        if let Some(g) = self.spec.closed_gamma1() {
            return Ok(g(u));
        }
        if let Some(r) = self.spec.closed_r1() {
            let ru = r(u);
            return integrate(|s| (ru - r(s)).powi(2), 0.0, u, &self.cfg);
        }
        // R1 tabulated with cubic Hermite knots; its interpolation error is held to a
        // tenth of the quadrature tolerance so the squared-deviation integral is exact
        // on each knot interval.
        let coarse = integrate(|s| self.f_or_nan(s), 0.0, u, &self.cfg)?;
        let tol = 0.1 * self.cfg.abs_tol.max(self.cfg.rel_tol * coarse.abs());
        let table = HermiteTable::antiderivative(|s| self.f_or_nan(s), 0.0, u, tol, &self.cfg)?;
        let ru = table.last_value();
        Ok(table.integrate_composed(|_, r| (ru - r).powi(2)))
    }

    /// Variance clock in process time, `gamma_bar(t) = gamma1(rho(t)) = Var Y(t)`.
    pub fn gamma_bar(&self, t: f64) -> Result<f64> {
        self.spec.check_time(t)?;
        self.gamma1(self.spec.rho(t))
    }

    /// Process time `t` with `gamma_bar(t) = v`.
    pub fn gamma_bar_inverse(&self, v: f64) -> Result<f64> {
        increasing_inverse(
            |t| self.gamma_bar(t).unwrap_or(f64::NAN),
            v,
            self.spec.max_time(),
            "variance clock",
        )
    }

    /// `gamma_bar_inverse` at a sorted list of clock values, reusing each root as the
    /// lower end of the next bracket.
    pub fn gamma_bar_inverse_sorted(&self, values: &[f64]) -> Result<Vec<f64>> {
        let cfg = QuadratureConfig::machine();
        let g = |t: f64| self.gamma_bar(t).unwrap_or(f64::NAN);
        let max_t = self.spec.max_time();
        let mut out = Vec::with_capacity(values.len());
        let mut lo = 0.0;
        let mut hi = max_t.min(1.0);
        for (i, &v) in values.iter().enumerate() {
            if i > 0 && v < values[i - 1] {
                return Err(Error::Argument("clock values must be sorted".into()));
            }
            if v == 0.0 {
                out.push(0.0);
                continue;
            }
            hi = hi.max(lo);
            while g(hi) < v {
                if hi >= max_t {
                    return Err(Error::Domain(format!(
                        "variance clock value {v} not reached on [0, {max_t}]"
                    )));
                }
                lo = hi;
                hi = (2.0 * hi).min(max_t);
            }
            let t = crate::quadrature::invert_monotone(g, v, (lo, hi), &cfg)?;
            out.push(t);
            lo = t;
        }
        Ok(out)
    }

    /// Mean and variance of `Y(t)`.
    pub fn law_of_y(&self, t: f64) -> Result<NormalLaw> {
        Ok(NormalLaw {
            mean: self.mean(t)?,
            variance: self.gamma_bar(t)?,
        })
    }

    /// Law of the time average `Y(T) / T`.
    pub fn time_average_law(&self, horizon: f64) -> Result<NormalLaw> {
        if !(horizon > 0.0) {
            return Err(Error::Domain(format!(
                "time-average horizon {horizon} must be positive"
            )));
        }
        let y = self.law_of_y(horizon)?;
        Ok(NormalLaw {
            mean: y.mean / horizon,
            variance: y.variance / (horizon * horizon),
        })
    }

    /// Both routes to the variance at clock time `u`: `(gamma1(u), 2 ∫_0^u f(s) ∫_0^s f(v) v dv ds)`.
    pub fn variance_identity_check(&self, u: f64) -> Result<(f64, f64)> {
        Self::check_clock(u)?;
        if u == 0.0 {
            return Ok((0.0, 0.0));
        }
        let gamma_form = self.gamma1(u)?;
        let inner = |s: f64| integrate(|v| self.f_or_nan(v) * v, 0.0, s, &self.cfg).unwrap_or(f64::NAN);
        let double_form = 2.0 * integrate(|s| self.f_or_nan(s) * inner(s), 0.0, u, &self.cfg)?;
        Ok((gamma_form, double_form))
    }
}

/// One row of a law table export.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LawRow {
    pub t: f64,
    #[serde(rename = "M")]
    pub mean: f64,
    pub variance: f64,
    pub gamma_bar: f64,
}

/// Tabulates `M` and `gamma_bar` on `times`.
pub fn law_table(law: &IntegralLaw, times: &[f64]) -> Result<Vec<LawRow>> {
    times
        .iter()
        .map(|&t| {
            let y = law.law_of_y(t)?;
            Ok(LawRow {
                t,
                mean: y.mean,
                variance: y.variance,
                gamma_bar: y.variance,
            })
        })
        .collect()
}
