use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use gmint::export::{bounds_csv, fmt_f64, histogram_csv, law_table_csv, path_csv, samples_csv};
use gmint::fpt::{fpt_histogram, fpt_monte_carlo_direct, fpt_monte_carlo_representation, FptEstimate};
use gmint::generalized::{bounds_table, preset_cos_family, BoundsRow};
use gmint::law::law_table;
use gmint::process::real_fn;
use gmint::sampling::{euler_integral_oracle, sample_x_path, sample_y_exact};
use gmint::verify::{run_suite, SuiteOptions};
use gmint::{build_law, BoundarySpec, Error, FptResult, Preset, ProcessSpec, QuadratureConfig, RngState};
use serde::Serialize;

mod process_arg;

/// Exact law, sampling and first-passage times of integrated Gauss-Markov processes.
#[derive(Debug, Parser)]
#[command(name = "gmint", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Process: a JSON file, inline JSON, or `name[:key=value,...]` with name one of
    /// bm_drift, ou, bridge
    #[arg(long, global = true, default_value = "bm_drift")]
    process: String,

    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Output file (stdout when absent)
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Defaults to csv for law, sample and bounds, json for verify and fpt
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Threads for Monte Carlo work; results do not depend on it
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Method {
    Exact,
    Oracle,
    /// One path of X on --times
    Path,
    Representation,
    Direct,
    Both,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Mean and variance of Y(t) on a time grid
    Law {
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        times: Vec<f64>,
    },
    /// Draws of Y(t), or a single path of X
    Sample {
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// exact, oracle or path
        #[arg(long, value_enum, default_value_t = Method::Exact)]
        method: Method,
        /// Oracle step
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        /// Grid for --method path
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        times: Vec<f64>,
    },
    /// Run the self-check suite on a preset process
    Verify {
        #[arg(long, default_value_t = 50_000)]
        n: usize,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
    },
    /// First-passage probability of Y over a boundary
    Fpt {
        /// constant:C, linear:C,D or mean_offset:C
        #[arg(long, allow_hyphen_values = true)]
        boundary: BoundarySpec,
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        /// Clock-grid steps of the representation method
        #[arg(long, default_value_t = 1000)]
        n_steps: usize,
        /// Step of the direct method
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        /// representation, direct or both
        #[arg(long, value_enum, default_value_t = Method::Representation)]
        method: Method,
        /// Histogram CSV of crossing times; with --method both, one file per method
        #[arg(long)]
        hist: Option<PathBuf>,
        #[arg(long, default_value_t = 50)]
        bins: usize,
    },
    /// Variance envelope of the cos-family diffusion against simulation
    Bounds {
        #[arg(long)]
        epsilon: f64,
        #[arg(long, value_delimiter = ',', default_value = "0.5,1")]
        times: Vec<f64>,
        #[arg(long, default_value_t = 20_000)]
        n: usize,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
    },
}

type CmdResult = Result<bool, Error>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

/// Returns whether every check passed.
fn run(cli: &Cli) -> CmdResult {
    match &cli.command {
        Command::Law { times } => cmd_law(cli, times),
        Command::Sample {
            t,
            n,
            method,
            dt,
            times,
        } => cmd_sample(cli, *t, *n, *method, *dt, times),
        Command::Verify { n, dt } => cmd_verify(cli, *n, *dt),
        Command::Fpt {
            boundary,
            horizon,
            n,
            n_steps,
            dt,
            method,
            hist,
            bins,
        } => cmd_fpt(
            cli,
            FptArgs {
                boundary: *boundary,
                horizon: *horizon,
                n: *n,
                n_steps: *n_steps,
                dt: *dt,
                method: *method,
                hist: hist.as_deref(),
                bins: *bins,
            },
        ),
        Command::Bounds { epsilon, times, n, dt } => cmd_bounds(cli, *epsilon, times, *n, *dt),
    }
}

fn preset(cli: &Cli) -> Result<(Preset, ProcessSpec), Error> {
    let preset = process_arg::parse(&cli.process)?;
    Ok((preset, preset.build()?))
}

fn format(cli: &Cli, default: Format) -> Format {
    cli.format.unwrap_or(default)
}

fn emit(out: Option<&Path>, content: &str) -> Result<(), Error> {
    match out {
        Some(path) => {
            std::fs::write(path, content).map_err(|e| Error::Argument(format!("cannot write {}: {e}", path.display())))
        }
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output serializes");
    s.push('\n');
    s
}

fn cmd_law(cli: &Cli, times: &[f64]) -> CmdResult {
    let (preset, spec) = preset(cli)?;
    let law = build_law(spec, QuadratureConfig::default())?;
    let rows = law_table(&law, times)?;
    let text = match format(cli, Format::Csv) {
        Format::Csv => law_table_csv(&rows),
        Format::Json => to_json(&serde_json::json!({ "process": preset, "rows": rows })),
    };
    emit(cli.out.as_deref(), &text)?;
    Ok(true)
}

fn cmd_sample(cli: &Cli, t: f64, n: usize, method: Method, dt: f64, times: &[f64]) -> CmdResult {
    let (preset, spec) = preset(cli)?;
    let rng = RngState::new(cli.seed, 0);
    if method == Method::Path {
        let path = sample_x_path(&spec, times, rng)?;
        let text = match format(cli, Format::Csv) {
            Format::Csv => path_csv(&path.times, &path.values),
            Format::Json => to_json(&serde_json::json!({ "process": preset, "seed": cli.seed, "path": path })),
        };
        emit(cli.out.as_deref(), &text)?;
        return Ok(true);
    }
    let samples = match method {
        Method::Exact => {
            let law = build_law(spec, QuadratureConfig::default())?;
            sample_y_exact(&law, t, n, rng, cli.workers)?
        }
        Method::Oracle => euler_integral_oracle(&spec, t, dt, n, rng, cli.workers)?,
        other => {
            return Err(Error::Argument(format!(
                "sample method must be exact, oracle or path, got {other:?}"
            )))
        }
    };
    let text = match format(cli, Format::Csv) {
        Format::Csv => samples_csv(&samples, rng.seed, rng.stream_id),
        Format::Json => to_json(&serde_json::json!({
            "process": preset,
            "seed": rng.seed,
            "stream_id": rng.stream_id,
            "method": method,
            "t": t,
            "samples": samples,
        })),
    };
    emit(cli.out.as_deref(), &text)?;
    Ok(true)
}

fn cmd_verify(cli: &Cli, n: usize, dt: f64) -> CmdResult {
    let (_, spec) = preset(cli)?;
    let opts = SuiteOptions {
        seed: cli.seed,
        n,
        dt,
        workers: cli.workers,
    };
    let report = run_suite(&spec, &opts)?;
    if format(cli, Format::Json) == Format::Csv {
        let mut text = String::from("name,passed,discrepancy,tolerance\n");
        for c in &report.checks {
            text.push_str(&format!(
                "{},{},{},{}\n",
                c.name,
                c.passed,
                fmt_f64(c.discrepancy),
                fmt_f64(c.tolerance)
            ));
        }
        emit(cli.out.as_deref(), &text)?;
    } else {
        emit(cli.out.as_deref(), &to_json(&report))?;
    }
    Ok(report.all_passed)
}

struct FptArgs<'a> {
    boundary: BoundarySpec,
    horizon: f64,
    n: usize,
    n_steps: usize,
    dt: f64,
    method: Method,
    hist: Option<&'a Path>,
    bins: usize,
}

#[derive(Serialize)]
struct FptSummary {
    #[serde(flatten)]
    result: FptResult,
    coarse_crossing_probability: f64,
    step_halving_slack: f64,
}

impl From<&FptEstimate> for FptSummary {
    fn from(e: &FptEstimate) -> Self {
        Self {
            result: e.result.clone(),
            coarse_crossing_probability: e.coarse_crossing_probability,
            step_halving_slack: e.step_halving_slack(),
        }
    }
}

#[derive(Serialize)]
struct Agreement {
    difference: f64,
    tolerance: f64,
    agree: bool,
}

#[derive(Serialize)]
struct FptReport {
    process: Preset,
    seed: u64,
    boundary: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    representation: Option<FptSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    direct: Option<FptSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    agreement: Option<Agreement>,
}

fn cmd_fpt(cli: &Cli, args: FptArgs) -> CmdResult {
    let (preset, spec) = preset(cli)?;
    let (run_rep, run_dir) = match args.method {
        Method::Representation => (true, false),
        Method::Direct => (false, true),
        Method::Both => (true, true),
        other => {
            return Err(Error::Argument(format!(
                "fpt method must be representation, direct or both, got {other:?}"
            )))
        }
    };
    let law = build_law(spec, QuadratureConfig::default())?;
    let boundary = args.boundary.resolve(&law)?;
    let rep = if run_rep {
        Some(fpt_monte_carlo_representation(
            &law,
            &boundary,
            args.horizon,
            args.n,
            args.n_steps,
            RngState::new(cli.seed, 0),
            cli.workers,
        )?)
    } else {
        None
    };
    let dir = if run_dir {
        Some(fpt_monte_carlo_direct(
            law.spec(),
            &boundary,
            args.horizon,
            args.n,
            args.dt,
            RngState::new(cli.seed, 1),
            cli.workers,
        )?)
    } else {
        None
    };
    let agreement = match (&rep, &dir) {
        (Some(a), Some(b)) => {
            let difference = (a.result.crossing_probability - b.result.crossing_probability).abs();
            let tolerance = 3.0 * (a.result.standard_error() + b.result.standard_error())
                + a.step_halving_slack()
                + b.step_halving_slack();
            Some(Agreement {
                difference,
                tolerance,
                agree: difference <= tolerance,
            })
        }
        _ => None,
    };

    if let Some(hist) = args.hist {
        for (est, suffix) in [(&rep, "representation"), (&dir, "direct")] {
            if let Some(est) = est {
                let path = if run_rep && run_dir {
                    suffixed(hist, suffix)
                } else {
                    hist.to_path_buf()
                };
                let bins = fpt_histogram(&est.crossing_times, est.result.horizon, args.bins);
                emit(Some(&path), &histogram_csv(&bins))?;
            }
        }
    }

    let ok = agreement.as_ref().is_none_or(|a| a.agree);
    let report = FptReport {
        process: preset,
        seed: cli.seed,
        boundary: args.boundary.to_string(),
        representation: rep.as_ref().map(FptSummary::from),
        direct: dir.as_ref().map(FptSummary::from),
        agreement,
    };
    match format(cli, Format::Json) {
        Format::Json => emit(cli.out.as_deref(), &to_json(&report))?,
        Format::Csv => {
            let mut text = String::from(
                "method,crossing_probability,mean_fpt_given_crossing,median_fpt_given_crossing,half_width_95,n_paths,horizon\n",
            );
            for s in [&report.representation, &report.direct].into_iter().flatten() {
                let r = &s.result;
                let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
                text.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    serde_json::to_value(r.method)
                        .expect("method serializes")
                        .as_str()
                        .unwrap_or_default(),
                    fmt_f64(r.crossing_probability),
                    opt(r.mean_fpt_given_crossing),
                    opt(r.median_fpt_given_crossing),
                    fmt_f64(r.half_width_95),
                    r.n_paths,
                    fmt_f64(r.horizon)
                ));
            }
            emit(cli.out.as_deref(), &text)?;
        }
    }
    Ok(ok)
}

/// `dir/name.csv` becomes `dir/name.<suffix>.csv`.
fn suffixed(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.{suffix}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{suffix}"),
    };
    path.with_file_name(name)
}

fn cmd_bounds(cli: &Cli, epsilon: f64, times: &[f64], n: usize, dt: f64) -> CmdResult {
    let gspec = preset_cos_family(epsilon, real_fn(|_| 0.0))?;
    gspec.check(times)?;
    let rows = bounds_table(
        &gspec,
        times,
        dt,
        n,
        RngState::new(cli.seed, 0),
        cli.workers,
        &QuadratureConfig::default(),
    )?;
    let text = match format(cli, Format::Csv) {
        Format::Csv => format!("# seed={} epsilon={epsilon}\n{}", cli.seed, bounds_csv(&rows)),
        Format::Json => to_json(&serde_json::json!({
            "epsilon": epsilon,
            "seed": cli.seed,
            "rows": rows,
        })),
    };
    emit(cli.out.as_deref(), &text)?;
    Ok(!rows.iter().any(|r: &BoundsRow| r.flagged))
}
