//! Self-check suite for a process: structural validation, the two variance formulas,
//! closed forms against the numeric pipeline, exact sampler against the path oracle,
//! and clock round trips.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::law::{build_law, IntegralLaw};
use crate::process::{validate, ProcessSpec};
use crate::quadrature::QuadratureConfig;
use crate::rng::RngState;
use crate::sampling::{euler_integral_oracle, sample_y_exact};
use crate::stats::{ks_two_sample, ks_two_sample_threshold};

pub const KS_SIGNIFICANCE: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteOptions {
    pub seed: u64,
    /// Draws per sample in the exact-vs-oracle comparison.
    pub n: usize,
    /// Oracle step.
    pub dt: f64,
    pub workers: usize,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            n: 50_000,
            dt: 1e-3,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Largest measured discrepancy across the points of the check.
    pub discrepancy: f64,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    fn new(name: &str, discrepancy: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            passed: discrepancy <= tolerance,
            discrepancy,
            tolerance,
            detail: None,
        }
    }

    fn failed(name: &str, detail: String) -> Self {
        Self {
            name: name.into(),
            passed: false,
            discrepancy: f64::INFINITY,
            tolerance: 0.0,
            detail: Some(detail),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub process: String,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub all_passed: bool,
}

/// Reference time of the suite: 1, or `0.9 T` on a finite domain `[0, T)`.
pub fn reference_time(spec: &ProcessSpec) -> f64 {
    let end = spec.domain_end();
    if end.is_finite() {
        0.9 * end
    } else {
        1.0
    }
}

pub fn run_suite(spec: &ProcessSpec, opts: &SuiteOptions) -> Result<VerificationReport> {
    if opts.n < 2 {
        return Err(Error::Argument("the suite needs at least 2 draws per sample".into()));
    }
    let t_ref = reference_time(spec);
    let times = [0.25 * t_ref, 0.5 * t_ref, t_ref];
    let mut checks = Vec::new();
    let finish = |checks: Vec<Check>| VerificationReport {
        process: spec.label().to_string(),
        seed: opts.seed,
        all_passed: checks.iter().all(|c| c.passed),
        checks,
    };

    let grid: Vec<f64> = (0..100).map(|i| (t_ref * i as f64 / 99.0).min(t_ref)).collect();
    let report = validate(spec, &grid)?;
    if !report.is_valid() {
        checks.push(Check::failed("validation", report.to_string()));
        return Ok(finish(checks));
    }
    checks.push(Check::new("validation", 0.0, 0.0));

    let cfg = QuadratureConfig::default();
    let law = match build_law(spec.clone(), cfg) {
        Ok(law) => law,
        Err(e @ (Error::Representation(_) | Error::Validation(_))) => {
            checks.push(Check::failed("representation", e.to_string()));
            return Ok(finish(checks));
        }
        Err(e) => return Err(e),
    };
    let numeric = build_law(spec.numeric(), cfg)?;

    checks.push(variance_identity(&law, &times)?);
    checks.push(closed_vs_numeric(&law, &numeric, &times)?);
    checks.push(exact_vs_oracle(&law, t_ref, opts)?);
    checks.push(clock_round_trips(&law, &times)?);
    Ok(finish(checks))
}

fn variance_identity(law: &IntegralLaw, times: &[f64]) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for &t in times {
        let (g, d) = law.variance_identity_check(law.spec().rho(t))?;
        worst = worst.max((g - d).abs() / 1e-8f64.max(1e-6 * g.abs()));
    }
    // normalized so the tolerance is 1
    Ok(Check::new("variance_identity", worst, 1.0))
}

fn closed_vs_numeric(law: &IntegralLaw, numeric: &IntegralLaw, times: &[f64]) -> Result<Check> {
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
    let mut worst: f64 = 0.0;
    for &t in times {
        worst = worst.max(rel(law.gamma_bar(t)?, numeric.gamma_bar(t)?));
        let (m1, m2) = (law.mean(t)?, numeric.mean(t)?);
        worst = worst.max((m1 - m2).abs() / m1.abs().max(1.0));
        let s = law.spec().rho(t);
        worst = worst.max(rel(law.spec().rho_inverse(s)?, numeric.spec().rho_inverse(s)?));
    }
    Ok(Check::new("closed_form_vs_quadrature", worst, 1e-7))
}

fn exact_vs_oracle(law: &IntegralLaw, t: f64, opts: &SuiteOptions) -> Result<Check> {
    let exact = sample_y_exact(law, t, opts.n, RngState::new(opts.seed, 0), opts.workers)?;
    let oracle = euler_integral_oracle(
        law.spec(),
        t,
        opts.dt,
        opts.n,
        RngState::new(opts.seed, 1),
        opts.workers,
    )?;
    let d = ks_two_sample(&exact, &oracle)?;
    Ok(Check::new(
        "exact_vs_oracle_ks",
        d,
        ks_two_sample_threshold(opts.n, opts.n, KS_SIGNIFICANCE),
    ))
}

fn clock_round_trips(law: &IntegralLaw, times: &[f64]) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for &t in times {
        let back = law.spec().rho_inverse(law.spec().rho(t))?;
        worst = worst.max((back - t).abs() / t.max(1.0));
        let back = law.gamma_bar_inverse(law.gamma_bar(t)?)?;
        worst = worst.max((back - t).abs() / t.max(1.0));
    }
    Ok(Check::new("clock_round_trips", worst, 1e-8))
}
