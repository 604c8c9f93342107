//! Samplers for `X` and `Y`.
//!
//! `sample_y_exact` draws straight from the normal law of `Y(t)`. The path samplers
//! build `X` on a grid from independent Brownian increments on the clock `rho`, which
//! is exact in finite dimensions, and `euler_integral_oracle` integrates those paths
//! with the trapezoid rule. The oracle never touches `gamma1`, so it checks the law
//! independently.
//!
//! Path `j` of a batch reads normals `j * K .. (j + 1) * K` of its stream, where `K`
//! is the number of grid points.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::law::IntegralLaw;
use crate::process::ProcessSpec;
use crate::rng::{run_indexed, run_ranges, NormalStream, RngState};

pub use crate::stats::{two_sample_stats, TwoSampleStats};

/// Oracle integration of a finite-domain process stops at `T (1 - 1e-6)`.
pub const ORACLE_DOMAIN_CLAMP: f64 = 1e-6;

/// A sampled trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathGrid {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl PathGrid {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Argument(format!(
                "path has {} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Argument("path times must be strictly increasing".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("path values must be finite".into()));
        }
        Ok(Self { times, values })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

fn check_count(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Argument("sample count must be at least 1".into()));
    }
    Ok(())
}

/// `n` draws of `Y(t) = M(t) + sqrt(gamma_bar(t)) Z`.
pub fn sample_y_exact(law: &IntegralLaw, t: f64, n: usize, rng: RngState, workers: usize) -> Result<Vec<f64>> {
    check_count(n)?;
    let y = law.law_of_y(t)?;
    let sd = y.variance.sqrt();
    run_ranges(n, workers, |range| {
        let mut z = rng.normals_at(range.start as u64);
        Ok(range.map(|_| y.mean + sd * z.next_normal()).collect())
    })
}

/// Per-grid quantities needed to draw `X` paths.
#[derive(Debug, Clone)]
pub(crate) struct XPathPlan {
    pub(crate) times: Vec<f64>,
    mean: Vec<f64>,
    h2: Vec<f64>,
    step_sd: Vec<f64>,
}

impl XPathPlan {
    pub(crate) fn new(spec: &ProcessSpec, grid: &[f64]) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::Argument("path grid is empty".into()));
        }
        for &t in grid {
            spec.check_time(t)?;
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Argument("path grid must be strictly increasing".into()));
        }
        let mut step_sd = Vec::with_capacity(grid.len());
        let mut prev = spec.rho(0.0);
        for &t in grid {
            let r = spec.rho(t);
            let dv = r - prev;
            if !(dv >= 0.0) || !dv.is_finite() {
                return Err(Error::Internal(format!(
                    "clock decreases or is not finite near t = {t} (rho = {prev} -> {r})"
                )));
            }
            step_sd.push(dv.sqrt());
            prev = r;
        }
        Ok(Self {
            times: grid.to_vec(),
            mean: grid.iter().map(|&t| spec.m(t)).collect(),
            h2: grid.iter().map(|&t| spec.h2(t)).collect(),
            step_sd,
        })
    }

    pub(crate) fn len(&self) -> usize {
        self.times.len()
    }

    /// Calls `visit(i, x_i)` along one path; stops early when `visit` returns `false`.
    #[inline]
    pub(crate) fn walk<V: FnMut(usize, f64) -> bool>(&self, z: &mut NormalStream, mut visit: V) {
        let mut b = 0.0;
        for i in 0..self.times.len() {
            b += self.step_sd[i] * z.next_normal();
            if !visit(i, self.mean[i] + self.h2[i] * b) {
                break;
            }
        }
    }
}

/// One path of `X` on `grid` (path 0 of the stream).
pub fn sample_x_path(spec: &ProcessSpec, grid: &[f64], rng: RngState) -> Result<PathGrid> {
    let mut paths = sample_x_paths(spec, grid, 1, rng, 1)?;
    Ok(paths.pop().expect("one path requested"))
}

/// `n` independent paths of `X` on `grid`.
pub fn sample_x_paths(
    spec: &ProcessSpec,
    grid: &[f64],
    n: usize,
    rng: RngState,
    workers: usize,
) -> Result<Vec<PathGrid>> {
    check_count(n)?;
    let plan = XPathPlan::new(spec, grid)?;
    let k = plan.len() as u64;
    run_indexed(n, workers, |j| {
        let mut z = rng.normals_at(j as u64 * k);
        let mut values = Vec::with_capacity(plan.len());
        plan.walk(&mut z, |_, x| {
            values.push(x);
            true
        });
        PathGrid::new(plan.times.clone(), values)
    })
}

/// Uniform grid `0, h, ..., t` with `h <= dt`, truncated to the oracle domain.
pub(crate) fn oracle_grid(spec: &ProcessSpec, t: f64, dt: f64) -> Result<Vec<f64>> {
    spec.check_time(t)?;
    if !(dt > 0.0) || !(dt <= t) {
        return Err(Error::Argument(format!(
            "step dt = {dt} must satisfy 0 < dt <= t = {t}"
        )));
    }
    let end = if spec.domain_end().is_finite() {
        t.min(spec.domain_end() * (1.0 - ORACLE_DOMAIN_CLAMP))
    } else {
        t
    };
    let steps = ((end / dt) - 1e-9).ceil().max(1.0) as usize;
    let mut grid: Vec<f64> = (0..=steps).map(|i| end * i as f64 / steps as f64).collect();
    grid[steps] = end;
    Ok(grid)
}

/// Trapezoid-rule integrals `∫_0^t X` over `n` exact paths of `X` on a grid of step `dt`.
pub fn euler_integral_oracle(
    spec: &ProcessSpec,
    t: f64,
    dt: f64,
    n: usize,
    rng: RngState,
    workers: usize,
) -> Result<Vec<f64>> {
    check_count(n)?;
    let grid = oracle_grid(spec, t, dt)?;
    let plan = XPathPlan::new(spec, &grid)?;
    let k = plan.len() as u64;
    run_ranges(n, workers, |range| {
        let mut out = Vec::with_capacity(range.len());
        for j in range {
            let mut z = rng.normals_at(j as u64 * k);
            let mut total = 0.0;
            let mut prev = 0.0;
            plan.walk(&mut z, |i, x| {
                if i > 0 {
                    total += 0.5 * (prev + x) * (plan.times[i] - plan.times[i - 1]);
                }
                prev = x;
                true
            });
            out.push(total);
        }
        Ok(out)
    })
}
