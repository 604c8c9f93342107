//! First passage of `Y(t) = ∫_0^t X` over a moving boundary `S(t)`.
//!
//! Since `Y(t) = M(t) + W(gamma_bar(t))` for a Brownian motion `W`, the passage time
//! `tau_S = inf{t > 0 : Y(t) >= S(t)}` satisfies `gamma_bar(tau_S) = inf{u > 0 :
//! W(u) >= S(t(u)) - M(t(u))}` with `t(u) = gamma_bar^{-1}(u)`. The representation
//! method simulates `W` on a uniform clock grid against that transformed barrier; the
//! direct method integrates `X` paths and watches `Y` itself.
//!
//! Both methods monitor crossings on a discrete grid and therefore miss excursions
//! between grid points. Each estimate also records the crossing probability seen
//! when only every other grid point is monitored, from the same paths, which gives a
//! step-halving estimate of that bias.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::law::IntegralLaw;
use crate::process::{real_fn, ProcessSpec, RealFn};
use crate::rng::{run_indexed, RngState};
use crate::sampling::{oracle_grid, XPathPlan};

/// z-value of a two-sided 95% normal interval.
const Z95: f64 = 1.959_963_984_540_054;

/// Boundary for `Y`. `S(0)` must be positive and finite.
#[derive(Clone)]
pub struct Boundary {
    s: RealFn,
    label: String,
}

impl fmt::Debug for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Boundary")
            .field("label", &self.label)
            .finish_non_exhaustive()
    }
}

impl Boundary {
    pub fn new(label: impl Into<String>, s: RealFn) -> Result<Self> {
        let b = Self { s, label: label.into() };
        let s0 = b.eval(0.0);
        if !(s0 > 0.0 && s0.is_finite()) {
            return Err(Error::Argument(format!(
                "boundary '{}' must start strictly above Y(0) = 0, got S(0) = {s0}",
                b.label
            )));
        }
        Ok(b)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.s)(t)
    }
}

/// The parametric boundary families accepted on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundarySpec {
    /// `S(t) = c`.
    Constant { c: f64 },
    /// `S(t) = c + d t`.
    Linear { c: f64, d: f64 },
    /// `S(t) = M(t) + c`.
    MeanOffset { c: f64 },
}

impl BoundarySpec {
    pub fn resolve(&self, law: &IntegralLaw) -> Result<Boundary> {
        let label = self.to_string();
        match *self {
            BoundarySpec::Constant { c } => Boundary::new(label, real_fn(move |_| c)),
            BoundarySpec::Linear { c, d } => Boundary::new(label, real_fn(move |t| c + d * t)),
            BoundarySpec::MeanOffset { c } => {
                let law = law.clone();
                Boundary::new(label, real_fn(move |t| law.mean(t).unwrap_or(f64::NAN) + c))
            }
        }
    }
}

impl fmt::Display for BoundarySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundarySpec::Constant { c } => write!(f, "constant:{c}"),
            BoundarySpec::Linear { c, d } => write!(f, "linear:{c},{d}"),
            BoundarySpec::MeanOffset { c } => write!(f, "mean_offset:{c}"),
        }
    }
}

impl FromStr for BoundarySpec {
    type Err = Error;

    /// `constant:C`, `linear:C,D` or `mean_offset:C`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, args) = s
            .split_once(':')
            .ok_or_else(|| Error::Argument(format!("boundary '{s}' must look like kind:params")))?;
        let nums: Vec<f64> = args
            .split(',')
            .map(|a| a.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Argument(format!("boundary '{s}': {e}")))?;
        match (kind.trim(), nums.as_slice()) {
            ("constant", [c]) => Ok(BoundarySpec::Constant { c: *c }),
            ("linear", [c, d]) => Ok(BoundarySpec::Linear { c: *c, d: *d }),
            ("mean_offset", [c]) => Ok(BoundarySpec::MeanOffset { c: *c }),
            _ => Err(Error::Argument(format!(
                "unknown boundary '{s}'; expected constant:C, linear:C,D or mean_offset:C"
            ))),
        }
    }
}

/// Barrier faced by the Brownian motion driving `Y - M`, in clock time.
pub struct TransformedBoundary<'a> {
    law: &'a IntegralLaw,
    boundary: &'a Boundary,
}

impl TransformedBoundary<'_> {
    /// `S(t) - M(t)` at `t = gamma_bar^{-1}(u)`.
    pub fn eval(&self, u: f64) -> Result<f64> {
        let t = self.law.gamma_bar_inverse(u)?;
        Ok(self.boundary.eval(t) - self.law.mean(t)?)
    }
}

pub fn transform_boundary<'a>(law: &'a IntegralLaw, boundary: &'a Boundary) -> Result<TransformedBoundary<'a>> {
    // laws are only constructed once f > 0 has been checked, so the clock is increasing
    let g = law.gamma_bar(law.spec().max_time().min(1.0))?;
    if !(g > 0.0) {
        return Err(Error::Representation(format!(
            "variance clock is not increasing (gamma_bar = {g})"
        )));
    }
    Ok(TransformedBoundary { law, boundary })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FptMethod {
    Representation,
    Direct,
}

/// Monte Carlo first-passage summary. Paths that never cross are censored at the horizon.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FptResult {
    pub crossing_probability: f64,
    pub mean_fpt_given_crossing: Option<f64>,
    pub median_fpt_given_crossing: Option<f64>,
    pub half_width_95: f64,
    pub n_paths: usize,
    pub horizon: f64,
    pub method: FptMethod,
}

impl FptResult {
    /// Binomial standard error of the crossing probability.
    pub fn standard_error(&self) -> f64 {
        let p = self.crossing_probability;
        (p * (1.0 - p) / self.n_paths as f64).sqrt()
    }
}

/// An [`FptResult`] with the data behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct FptEstimate {
    pub result: FptResult,
    /// Crossing probability when only every other grid point is monitored.
    pub coarse_crossing_probability: f64,
    /// Crossing times of the paths that crossed, in path order.
    pub crossing_times: Vec<f64>,
}

impl FptEstimate {
    /// Extrapolated discrete-monitoring bias of the fine-grid estimate.
    ///
    /// The missed-crossing probability scales like the square root of the monitoring
    /// step, so the bias at step `h` is `(p(h) - p(2h)) / (sqrt(2) - 1)`.
    pub fn step_halving_slack(&self) -> f64 {
        (self.result.crossing_probability - self.coarse_crossing_probability).max(0.0) / (2f64.sqrt() - 1.0)
    }
}

#[derive(Debug, Clone, Copy)]
struct PathOutcome {
    fine: Option<f64>,
    coarse: bool,
}

fn summarize(outcomes: &[PathOutcome], horizon: f64, method: FptMethod) -> FptEstimate {
    let n = outcomes.len();
    let crossing_times: Vec<f64> = outcomes.iter().filter_map(|o| o.fine).collect();
    let coarse = outcomes.iter().filter(|o| o.coarse).count();
    let p = crossing_times.len() as f64 / n as f64;
    let (mean, median) = if crossing_times.is_empty() {
        (None, None)
    } else {
        let mut sorted = crossing_times.clone();
        sorted.sort_by(f64::total_cmp);
        let k = sorted.len();
        let median = if k % 2 == 1 {
            sorted[k / 2]
        } else {
            0.5 * (sorted[k / 2 - 1] + sorted[k / 2])
        };
        (Some(sorted.iter().sum::<f64>() / k as f64), Some(median))
    };
    FptEstimate {
        result: FptResult {
            crossing_probability: p,
            mean_fpt_given_crossing: mean,
            median_fpt_given_crossing: median,
            half_width_95: Z95 * (p * (1.0 - p) / n as f64).sqrt(),
            n_paths: n,
            horizon,
            method,
        },
        coarse_crossing_probability: coarse as f64 / n as f64,
        crossing_times,
    }
}

fn check_counts(n: usize, steps: usize) -> Result<()> {
    if n == 0 || steps == 0 {
        return Err(Error::Argument("path count and step count must be at least 1".into()));
    }
    Ok(())
}

/// Passage times through the time-change representation: Brownian motion on a uniform
/// grid of `n_steps` steps over `[0, gamma_bar(horizon)]`, mapped back with
/// `gamma_bar^{-1}`.
pub fn fpt_monte_carlo_representation(
    law: &IntegralLaw,
    boundary: &Boundary,
    horizon: f64,
    n: usize,
    n_steps: usize,
    rng: RngState,
    workers: usize,
) -> Result<FptEstimate> {
    check_counts(n, n_steps)?;
    law.spec().check_time(horizon)?;
    if !(horizon > 0.0) {
        return Err(Error::Argument("horizon must be positive".into()));
    }
    let transformed = transform_boundary(law, boundary)?;
    let u_end = law.gamma_bar(horizon)?;
    let clock: Vec<f64> = (0..=n_steps).map(|k| u_end * k as f64 / n_steps as f64).collect();
    let mut times = law.gamma_bar_inverse_sorted(&clock[..n_steps])?;
    times.push(horizon);
    let barrier: Vec<f64> = times
        .iter()
        .map(|&t| Ok(transformed.boundary.eval(t) - law.mean(t)?))
        .collect::<Result<_>>()?;
    if barrier.iter().any(|b| !b.is_finite()) {
        return Err(Error::Internal(
            "transformed boundary is not finite on the clock grid".into(),
        ));
    }
    let sd = (u_end / n_steps as f64).sqrt();

    let outcomes = run_indexed(n, workers, |j| {
        let mut z = rng.normals_at(j as u64 * n_steps as u64);
        let mut w = 0.0;
        let mut out = PathOutcome {
            fine: None,
            coarse: false,
        };
        for k in 1..=n_steps {
            w += sd * z.next_normal();
            if w >= barrier[k] {
                if out.fine.is_none() {
                    out.fine = Some(times[k]);
                }
                if k % 2 == 0 || k == n_steps {
                    out.coarse = true;
                    break;
                }
            }
        }
        Ok(out)
    })?;
    Ok(summarize(&outcomes, horizon, FptMethod::Representation))
}

/// Passage times of the trapezoid-integrated `X` paths on a grid of step `dt`.
pub fn fpt_monte_carlo_direct(
    spec: &ProcessSpec,
    boundary: &Boundary,
    horizon: f64,
    n: usize,
    dt: f64,
    rng: RngState,
    workers: usize,
) -> Result<FptEstimate> {
    let grid = oracle_grid(spec, horizon, dt)?;
    check_counts(n, grid.len() - 1)?;
    let plan = XPathPlan::new(spec, &grid)?;
    let barrier: Vec<f64> = grid.iter().map(|&t| boundary.eval(t)).collect();
    if barrier.iter().any(|b| !b.is_finite()) {
        return Err(Error::Argument(format!(
            "boundary '{}' is not finite on the grid",
            boundary.label()
        )));
    }
    let last = grid.len() - 1;
    let k = grid.len() as u64;
    let outcomes = run_indexed(n, workers, |j| {
        let mut z = rng.normals_at(j as u64 * k);
        let mut y = 0.0;
        let mut prev = 0.0;
        let mut out = PathOutcome {
            fine: None,
            coarse: false,
        };
        plan.walk(&mut z, |i, x| {
            if i > 0 {
                y += 0.5 * (prev + x) * (grid[i] - grid[i - 1]);
                if y >= barrier[i] {
                    if out.fine.is_none() {
                        out.fine = Some(grid[i]);
                    }
                    if i % 2 == 0 || i == last {
                        out.coarse = true;
                        return false;
                    }
                }
            }
            prev = x;
            true
        });
        Ok(out)
    })?;
    Ok(summarize(&outcomes, *grid.last().unwrap(), FptMethod::Direct))
}

/// Histogram of crossing times on `bins` equal bins over `[0, horizon]`; rows are
/// `(bin center, count)`.
pub fn fpt_histogram(crossing_times: &[f64], horizon: f64, bins: usize) -> Vec<(f64, usize)> {
    let bins = bins.max(1);
    let width = horizon / bins as f64;
    let mut counts = vec![0usize; bins];
    for &t in crossing_times {
        let idx = ((t / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| ((i as f64 + 0.5) * width, c))
        .collect()
}
