//! Generalized Gauss-Markov diffusions `dX = m'(t) dt + sigma(X) dB`, `X(0) = m(0)`.
//!
//! Here the clock `rho(t) = ∫_0^t sigma^2(X(s)) ds` is random, so the law of `∫_0^t X`
//! is not available in closed form. What is available is a deterministic envelope:
//! given `alpha <= rho <= beta` and `alpha1 <= A' <= beta1` (with `A` the inverse
//! clock), the variance lies between `gamma_lo(alpha(t))` and `gamma_hi(beta(t))`,
//! where `gamma_lo`, `gamma_hi` are the variance clocks built from the constant-sign
//! integrands `alpha1` and `beta1`.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::process::{real_fn, RealFn};
use crate::quadrature::{integrate, QuadratureConfig};
use crate::rng::{run_ranges, RngState};
use crate::stats::{mean, variance, variance_standard_error};

#[derive(Clone)]
pub struct GeneralizedSpec {
    pub label: String,
    pub m: RealFn,
    pub m_prime: Option<RealFn>,
    pub sigma: RealFn,
    pub alpha: RealFn,
    pub beta: RealFn,
    pub alpha1: RealFn,
    pub beta1: RealFn,
    pub epsilon: Option<f64>,
}

impl fmt::Debug for GeneralizedSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneralizedSpec")
            .field("label", &self.label)
            .field("epsilon", &self.epsilon)
            .finish_non_exhaustive()
    }
}

impl GeneralizedSpec {
    /// `m'(t)`: closed form when attached, else a second-order finite difference with step 1e-6.
    pub fn m_prime(&self, t: f64) -> f64 {
        if let Some(d) = &self.m_prime {
            return d(t);
        }
        let h = 1e-6;
        let m = |x: f64| (self.m)(x);
        if t - h < 0.0 {
            (-3.0 * m(t) + 4.0 * m(t + h) - m(t + 2.0 * h)) / (2.0 * h)
        } else {
            (m(t + h) - m(t - h)) / (2.0 * h)
        }
    }

    /// Checks the envelope assumptions on `grid`.
    pub fn check(&self, grid: &[f64]) -> Result<()> {
        let (a0, b0) = ((self.alpha)(0.0), (self.beta)(0.0));
        if a0 != 0.0 || b0 != 0.0 {
            return Err(Error::Parameter(format!(
                "alpha(0) = {a0} and beta(0) = {b0} must both be 0"
            )));
        }
        for &t in grid {
            let (a, b, a1, b1) = ((self.alpha)(t), (self.beta)(t), (self.alpha1)(t), (self.beta1)(t));
            if !(a <= b) {
                return Err(Error::Parameter(format!("alpha({t}) = {a} exceeds beta({t}) = {b}")));
            }
            if !(a1 > 0.0 && a1 <= b1) {
                return Err(Error::Parameter(format!(
                    "need 0 < alpha1 <= beta1, got {a1} and {b1} at t = {t}"
                )));
            }
        }
        for w in grid.windows(2) {
            if (self.alpha)(w[1]) < (self.alpha)(w[0]) || (self.beta)(w[1]) < (self.beta)(w[0]) {
                return Err(Error::Parameter(format!(
                    "clock bounds decrease on [{}, {}]",
                    w[0], w[1]
                )));
            }
        }
        Ok(())
    }
}

/// The family `sigma(x) = 1 + epsilon cos^2(x)`, for which
/// `alpha(t) = t`, `beta(t) = (1 + epsilon)^2 t`, `alpha1 = 1 / (1 + epsilon)^2`, `beta1 = 1`.
pub fn preset_cos_family(epsilon: f64, m: RealFn) -> Result<GeneralizedSpec> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Parameter(format!("epsilon must be positive, got {epsilon}")));
    }
    let k = (1.0 + epsilon) * (1.0 + epsilon);
    Ok(GeneralizedSpec {
        label: format!("cos_family(epsilon={epsilon})"),
        m,
        m_prime: None,
        sigma: real_fn(move |x| 1.0 + epsilon * x.cos().powi(2)),
        alpha: real_fn(|t| t),
        beta: real_fn(move |t| k * t),
        alpha1: real_fn(move |_| 1.0 / k),
        beta1: real_fn(|_| 1.0),
        epsilon: Some(epsilon),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceBounds {
    pub t: f64,
    pub lower: f64,
    pub upper: f64,
}

impl VarianceBounds {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// `∫_0^u (R(u) - R(s))^2 ds` with `R = ∫_0 g`.
pub fn envelope_gamma(g: &RealFn, u: f64, cfg: &QuadratureConfig) -> Result<f64> {
    if !(u >= 0.0) {
        return Err(Error::Domain(format!("clock time {u} must be non-negative")));
    }
    if u == 0.0 {
        return Ok(0.0);
    }
    let r = |s: f64| integrate(|v| g(v), 0.0, s, cfg).unwrap_or(f64::NAN);
    let ru = integrate(|v| g(v), 0.0, u, cfg)?;
    integrate(|s| (ru - r(s)).powi(2), 0.0, u, cfg)
}

/// Deterministic envelope `[gamma_lo(alpha(t)), gamma_hi(beta(t))]` on `Var ∫_0^t X`.
pub fn variance_bounds(gspec: &GeneralizedSpec, t: f64, cfg: &QuadratureConfig) -> Result<VarianceBounds> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("time {t} must be non-negative")));
    }
    let lower = envelope_gamma(&gspec.alpha1, (gspec.alpha)(t), cfg)?;
    let upper = envelope_gamma(&gspec.beta1, (gspec.beta)(t), cfg)?;
    Ok(VarianceBounds { t, lower, upper })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneralizedSample {
    pub samples: Vec<f64>,
    pub empirical_mean: f64,
    pub empirical_variance: f64,
}

/// Euler-Maruyama paths of the diffusion on `[0, t]` with step at most `dt`, each
/// integrated by the trapezoid rule. Path `j` reads normals `j * steps ..` of the stream.
pub fn simulate_generalized(
    gspec: &GeneralizedSpec,
    t: f64,
    dt: f64,
    n: usize,
    rng: RngState,
    workers: usize,
) -> Result<GeneralizedSample> {
    if n == 0 {
        return Err(Error::Argument("sample count must be at least 1".into()));
    }
    if !(dt > 0.0) || !(dt <= t) || !t.is_finite() {
        return Err(Error::Argument(format!(
            "step dt = {dt} must satisfy 0 < dt <= t = {t}"
        )));
    }
    let steps = ((t / dt) - 1e-9).ceil().max(1.0) as usize;
    let h = t / steps as f64;
    let sqrt_h = h.sqrt();
    let drift: Vec<f64> = (0..steps).map(|k| gspec.m_prime(k as f64 * h) * h).collect();
    let x0 = (gspec.m)(0.0);

    let samples = run_ranges(n, workers, |range| {
        let mut out = Vec::with_capacity(range.len());
        for j in range {
            let mut z = rng.normals_at(j as u64 * steps as u64);
            let mut x = x0;
            let mut total = 0.0;
            for (k, d) in drift.iter().enumerate() {
                let next = x + d + (gspec.sigma)(x) * sqrt_h * z.next_normal();
                if !next.is_finite() {
                    return Err(Error::Simulation { path: j, step: k + 1 });
                }
                total += 0.5 * (x + next) * h;
                x = next;
            }
            out.push(total);
        }
        Ok(out)
    })?;
    Ok(GeneralizedSample {
        empirical_mean: mean(&samples),
        empirical_variance: variance(&samples),
        samples,
    })
}

/// One row of an envelope check: the empirical variance at `t` is flagged when it
/// leaves `[lower - slack, upper + slack]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundsRow {
    pub t: f64,
    pub lower: f64,
    pub empirical_variance: f64,
    pub upper: f64,
    pub slack: f64,
    pub flagged: bool,
}

/// Bounds and simulated variances at each of `times`; the slack is three standard
/// errors of the sample variance plus a first-order discretization allowance `dt * upper`.
pub fn bounds_table(
    gspec: &GeneralizedSpec,
    times: &[f64],
    dt: f64,
    n: usize,
    rng: RngState,
    workers: usize,
    cfg: &QuadratureConfig,
) -> Result<Vec<BoundsRow>> {
    if n < 2 {
        return Err(Error::Argument("a variance needs at least 2 samples".into()));
    }
    times
        .iter()
        .map(|&t| {
            let b = variance_bounds(gspec, t, cfg)?;
            let empirical_variance = if t == 0.0 {
                0.0
            } else {
                simulate_generalized(gspec, t, dt.min(t), n, rng, workers)?.empirical_variance
            };
            let slack = 3.0 * variance_standard_error(empirical_variance, n) + dt * b.upper;
            let flagged = empirical_variance < b.lower - slack || empirical_variance > b.upper + slack;
            Ok(BoundsRow {
                t,
                lower: b.lower,
                empirical_variance,
                upper: b.upper,
                slack,
                flagged,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{ks_normal, ks_one_sample_threshold};

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    fn zero() -> RealFn {
        real_fn(|_| 0.0)
    }

    #[test]
    fn cos_family_parameters() {
        let g = preset_cos_family(0.1, zero()).unwrap();
        assert!(((g.beta)(1.0) - 1.21).abs() < 1e-15);
        assert!(((g.alpha1)(0.3) - 1.0 / 1.21).abs() < 1e-15);
        assert_eq!((g.beta1)(2.0), 1.0);
        assert!(g.check(&[0.0, 0.5, 1.0, 2.0]).is_ok());
        let tiny = preset_cos_family(1e-12, zero()).unwrap();
        assert!(((tiny.beta)(1.0) - (tiny.alpha)(1.0)).abs() < 1e-11);
        assert!(matches!(preset_cos_family(0.0, zero()), Err(Error::Parameter(_))));
        assert!(preset_cos_family(-1.0, zero()).is_err());
    }

    #[test]
    fn bounds_constant_integrand_closed_form() {
        // constant f gives gamma(u) = f^2 u^3 / 3
        let g = preset_cos_family(0.1, zero()).unwrap();
        let b = variance_bounds(&g, 1.0, &cfg()).unwrap();
        let lower = (1.0f64 / 1.21).powi(2) / 3.0;
        let upper = 1.21f64.powi(3) / 3.0;
        assert!((b.lower - lower).abs() < 1e-12);
        assert!((b.upper - upper).abs() < 1e-12);
        assert!((b.lower - 0.2277).abs() < 1e-4 && (b.upper - 0.5905).abs() < 1e-4);
        let z = variance_bounds(&g, 0.0, &cfg()).unwrap();
        assert_eq!((z.lower, z.upper), (0.0, 0.0));
        let tiny = preset_cos_family(1e-9, zero()).unwrap();
        let b = variance_bounds(&tiny, 1.0, &cfg()).unwrap();
        assert!((b.lower - 1.0 / 3.0).abs() < 1e-8 && (b.upper - 1.0 / 3.0).abs() < 1e-8);
    }

    #[test]
    fn bound_width_shrinks_with_epsilon() {
        for &t in &[0.5, 1.0, 2.0] {
            let widths: Vec<f64> = [0.01, 0.1, 0.5]
                .iter()
                .map(|&e| {
                    variance_bounds(&preset_cos_family(e, zero()).unwrap(), t, &cfg())
                        .unwrap()
                        .width()
                })
                .collect();
            assert!(widths.windows(2).all(|w| w[0] < w[1]), "{widths:?}");
            assert!(widths[0] < 0.1 * widths[2]);
        }
    }

    #[test]
    fn small_epsilon_reduces_to_brownian_motion() {
        let n = 100_000;
        let g = preset_cos_family(1e-9, zero()).unwrap();
        let s = simulate_generalized(&g, 1.0, 1e-3, n, RngState::new(31, 0), 1).unwrap();
        let se = variance_standard_error(1.0 / 3.0, n);
        assert!((s.empirical_variance - 1.0 / 3.0).abs() < 3.0 * se + 1e-3);
    }

    #[test]
    fn mean_follows_m() {
        let n = 20_000;
        let g = preset_cos_family(0.1, real_fn(|t| t)).unwrap();
        let s = simulate_generalized(&g, 1.0, 1e-3, n, RngState::new(32, 0), 1).unwrap();
        let se = (s.empirical_variance / n as f64).sqrt();
        assert!((s.empirical_mean - 0.5).abs() < 3.0 * se);
    }

    #[test]
    fn empirical_variance_inside_envelope() {
        let n = 50_000;
        let g = preset_cos_family(0.1, zero()).unwrap();
        let s = simulate_generalized(&g, 1.0, 1e-3, n, RngState::new(33, 0), 1).unwrap();
        let b = variance_bounds(&g, 1.0, &cfg()).unwrap();
        let se = variance_standard_error(s.empirical_variance, n);
        assert!(s.empirical_variance >= b.lower - 3.0 * se);
        assert!(s.empirical_variance <= b.upper + 3.0 * se);
    }

    #[test]
    fn near_normal_at_small_epsilon() {
        let n = 20_000;
        let g = preset_cos_family(0.05, zero()).unwrap();
        let s = simulate_generalized(&g, 1.0, 2e-3, n, RngState::new(34, 0), 1).unwrap();
        let d = ks_normal(&s.samples, s.empirical_mean, s.empirical_variance.sqrt()).unwrap();
        assert!(d < ks_one_sample_threshold(n, 0.001), "D = {d}");
    }

    #[test]
    fn blow_up_is_reported() {
        let mut g = preset_cos_family(0.1, zero()).unwrap();
        g.sigma = real_fn(|x| 1e200 * (1.0 + x.abs()));
        assert!(matches!(
            simulate_generalized(&g, 1.0, 0.1, 3, RngState::new(1, 0), 1),
            Err(Error::Simulation { path: 0, .. })
        ));
    }

    #[test]
    fn m_prime_finite_difference() {
        let g = preset_cos_family(0.1, real_fn(|t| t * t)).unwrap();
        assert!((g.m_prime(0.0)).abs() < 1e-9);
        assert!((g.m_prime(1.5) - 3.0).abs() < 1e-8);
    }

    #[test]
    fn workers_do_not_change_samples() {
        let g = preset_cos_family(0.3, zero()).unwrap();
        let a = simulate_generalized(&g, 0.5, 0.01, 333, RngState::new(5, 2), 1).unwrap();
        let b = simulate_generalized(&g, 0.5, 0.01, 333, RngState::new(5, 2), 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bounds_table_no_flags() {
        let g = preset_cos_family(0.1, zero()).unwrap();
        let rows = bounds_table(&g, &[0.0, 0.5, 1.0], 2e-3, 20_000, RngState::new(35, 0), 1, &cfg()).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| !r.flagged), "{rows:?}");
        assert_eq!(rows[0].empirical_variance, 0.0);
    }
}
