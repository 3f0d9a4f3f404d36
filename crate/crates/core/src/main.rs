use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use polarinvest::harness::{
    self, convergence_rows, crossover, perf_envelope, rmse, run_sweep, stationary_report,
    write_converge, write_frontiers, write_json, write_value, Axis, Config, PathSummary, Series,
};
use polarinvest::{CrossingReport, OnsetReport, Result, SolverError};

/// Polar-coordinate solver for optimal investment with transaction costs.
#[derive(Parser)]
#[command(version)]
struct Cli {
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Reference `t, v0` series for RMSE metrics.
    #[arg(long, global = true)]
    reference: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One backward solve; writes value.csv and frontiers.csv.
    Solve,
    /// Frontiers at t = 0 and t = 1 of a long-horizon solve.
    Stationary,
    /// First time the buying frontier leaves 0, per resolution. The
    /// crossing of π/2 is reported alongside.
    Onset,
    /// Passage of the buying frontier through π/2, per resolution. The onset
    /// is reported alongside.
    Crossing,
    /// RMSE of v(0, t) against the reference over a sweep.
    Converge {
        #[arg(long, value_enum)]
        axis: AxisArg,
    },
    /// Cost/accuracy envelopes of both methods over a sweep.
    Perf,
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    Space,
    Time,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let config = load_config(cli.config.as_deref())?;
    std::fs::create_dir_all(&cli.out)?;
    let out = |name: &str| cli.out.join(name);
    match &cli.command {
        Command::Solve => {
            let path = config.solve()?;
            write_value(&path, out("value.csv"), 101)?;
            write_frontiers(&path, out("frontiers.csv"))?;
            let summary = PathSummary::from_path(&path)?;
            println!("{}", harness::describe(&summary, 0.0));
            println!(
                "runtime {:.0} ms, max residual {:.2e}, retries {}",
                summary.runtime_ms, summary.max_residual, summary.retries
            );
        }
        Command::Stationary => {
            let path = config.solve()?;
            write_frontiers(&path, out("frontiers.csv"))?;
            let report = stationary_report(&PathSummary::from_path(&path)?);
            println!(
                "br(0) = {:.6}  sr(0) = {:.6}  |br(0) - br(1)| = {:.2e}",
                report.br0,
                report.sr0,
                (report.br0 - report.br1).abs()
            );
            write_json(&report, out("stationary.json"))?;
        }
        Command::Onset | Command::Crossing => {
            let summaries = solve_all(&config)?;
            let rows: Vec<ResolutionReport> = summaries
                .iter()
                .map(|s| ResolutionReport {
                    method: s.method.to_string(),
                    n_theta: s.n_theta,
                    n_t: s.n_t,
                    onset: s.onset(),
                    crossing: s.crossing(),
                })
                .collect();
            for r in &rows {
                println!("{}", serde_json::to_string(r)?);
            }
            let name = match cli.command {
                Command::Onset => "onset.json",
                _ => "crossing.json",
            };
            write_json(&rows, out(name))?;
        }
        Command::Converge { axis } => {
            let reference = load_reference(cli.reference.as_deref())?;
            let axis = match axis {
                AxisArg::Space => Axis::Space,
                AxisArg::Time => Axis::Time,
            };
            let rows = convergence_rows(&solve_all(&config)?, &reference, axis)?;
            for r in &rows {
                println!(
                    "{:9} n_theta={:5} n_t={:6} rmse={:.3e} runtime={:.0} ms  {}",
                    r.method.to_string(),
                    r.n_theta,
                    r.n_t,
                    r.rmse,
                    r.runtime_ms,
                    r.slope_annotation
                );
            }
            write_converge(&rows, out("converge.csv"))?;
        }
        Command::Perf => {
            let reference = load_reference(cli.reference.as_deref())?;
            let summaries = solve_all(&config)?;
            let records = summaries
                .iter()
                .map(|s| Ok(s.record("rmse_v0", rmse(&s.v0, &reference)?)))
                .collect::<Result<Vec<_>>>()?;
            let envelope = perf_envelope(&records);
            let cross = crossover(&records);
            for r in &envelope {
                println!(
                    "envelope {:9} n_theta={:5} n_t={:6} rmse={:.3e} runtime={:.0} ms",
                    r.method.to_string(),
                    r.n_theta,
                    r.n_t,
                    r.metric_value,
                    r.runtime_ms
                );
            }
            if let Some(c) = &cross {
                println!("{c:?}");
            }
            write_json(&records, out("perf_records.json"))?;
            write_json(&envelope, out("perf_envelope.json"))?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct ResolutionReport {
    method: String,
    n_theta: usize,
    n_t: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    onset: Option<OnsetReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    crossing: Option<CrossingReport>,
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    path.map(Config::from_path)
        .transpose()?
        .ok_or_else(|| SolverError::Config("--config <path> is required".into()))
}

/// The committed reference series unless `--reference` is given.
fn load_reference(path: Option<&Path>) -> Result<Series> {
    let default = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/reference_v0.csv");
    Series::read_csv(path.unwrap_or(&default))
}

/// The sweep section if present, otherwise the single configuration.
fn solve_all(config: &Config) -> Result<Vec<PathSummary>> {
    let configs = match config.sweep_configs() {
        c if c.is_empty() => vec![config.clone()],
        c => c,
    };
    run_sweep(&configs).into_iter().collect()
}
