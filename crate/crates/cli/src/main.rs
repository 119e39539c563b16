use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use relloc::harness::{read_trajectory_csv, run_with_baseline, summarize, write_outputs, ScenarioConfig, TrajectoryRow};
use relloc::netsim::{validate_assumptions, TimeVaryingNetwork};
use relloc::optimizer::{solve_lm, LMConfig, PoseGraphProblem};
use relloc::Error;

#[derive(Parser)]
#[command(name = "relloc", version, about = "Range-based multi-robot relative localization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run every trial of a scenario and write trajectories, traces and metrics.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve a pose-graph problem stored as JSON.
    Optimize {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Optional JSON file with solver settings.
        #[arg(long)]
        lm: Option<PathBuf>,
    },
    /// Check a JSONL network trace against the weight and connectivity assumptions.
    ValidateNetwork {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        xi: f64,
        #[arg(long = "T", value_name = "T")]
        period: usize,
        /// Iterations to check; defaults to the whole trace.
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Compare against dead reckoning and sweep the RSSI shadowing level.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trials: usize,
        /// Shadowing levels for the sweep, dB.
        #[arg(long, value_delimiter = ',', default_values_t = vec![1.0, 2.0, 3.0, 4.0])]
        sigmas: Vec<f64>,
    },
    /// Join the truth and estimate CSVs of a `simulate` output directory.
    Export {
        #[arg(long)]
        result: PathBuf,
        #[arg(long, value_enum)]
        format: Format,
    },
}

/// Input or configuration problems exit with 2, failures during computation with 3.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Toml(_) | Error::Json(_) | Error::Io(_) => 2,
        Error::InvalidArgument(_) | Error::Numerical(_) => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate { config, out } => simulate(&config, &out),
        Command::Optimize { problem, out, lm } => optimize(&problem, &out, lm.as_deref()),
        Command::ValidateNetwork {
            trace,
            xi,
            period,
            horizon,
        } => validate_network(&trace, xi, period, horizon),
        Command::Bench { config, trials, sigmas } => bench(&config, trials, &sigmas),
        Command::Export { result, format } => export(&result, format),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn simulate(config: &Path, out: &Path) -> relloc::Result<ExitCode> {
    let cfg = ScenarioConfig::load(config)?;
    let run = run_with_baseline(&cfg)?;
    write_outputs(out, &cfg, &run.results, &run.worlds, Some(&run.baseline))?;
    let diag = Some(cfg.bounds().diagonal());
    print!("{}", summarize(&run.results, diag).to_table("localization"));
    print!("{}", summarize(&run.baseline, diag).to_table("dead reckoning"));
    Ok(ExitCode::SUCCESS)
}

fn optimize(problem: &Path, out: &Path, lm: Option<&Path>) -> relloc::Result<ExitCode> {
    let p: PoseGraphProblem = serde_json::from_reader(BufReader::new(File::open(problem)?))?;
    p.validate().map_err(|e| Error::Config(format!("problem: {e}")))?;
    let cfg: LMConfig = match lm {
        Some(path) => serde_json::from_reader(BufReader::new(File::open(path)?))?,
        None => LMConfig::default(),
    };
    cfg.validate().map_err(|e| Error::Config(format!("solver settings: {e}")))?;
    let g = solve_lm(&p, &cfg)?;
    if g.vertices.iter().any(|v| !v.is_valid()) || !g.final_chi2.is_finite() {
        return Err(Error::Numerical("solver produced non-finite values".into()));
    }
    let mut w = BufWriter::new(File::create(out)?);
    serde_json::to_writer_pretty(&mut w, &g)?;
    w.write_all(b"\n")?;
    w.flush()?;
    println!(
        "chi2 {:.6e} -> {:.6e} in {} iterations (converged: {})",
        g.chi2_trace[0], g.final_chi2, g.iterations, g.converged
    );
    Ok(ExitCode::SUCCESS)
}

/// Exits with 1 when any assumption is violated.
fn validate_network(trace: &Path, xi: f64, period: usize, horizon: Option<usize>) -> relloc::Result<ExitCode> {
    let net = TimeVaryingNetwork::read_jsonl(BufReader::new(File::open(trace)?))
        .map_err(|e| Error::Config(format!("trace: {e}")))?;
    let horizon = horizon.unwrap_or(net.schedule.len());
    let report = validate_assumptions(&net, xi, period, horizon).map_err(|e| Error::Config(e.to_string()))?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

#[derive(Serialize)]
struct SweepRow {
    shadowing_sigma_db: f64,
    rmse_mean: f64,
    baseline_rmse_mean: f64,
    ratio: f64,
    solve_ms_median: f64,
}

fn bench(config: &Path, trials: usize, sigmas: &[f64]) -> relloc::Result<ExitCode> {
    let mut cfg = ScenarioConfig::load(config)?;
    cfg.trials = trials;
    cfg.validate()?;
    let diag = Some(cfg.bounds().diagonal());
    let run = run_with_baseline(&cfg)?;
    print!("{}", summarize(&run.results, diag).to_table("localization"));
    print!("{}", summarize(&run.baseline, diag).to_table("dead reckoning"));
    let wins = run.results.iter().zip(&run.baseline).filter(|(a, b)| a.rmse <= b.rmse).count();
    println!("trials no worse than dead reckoning: {wins}/{trials}\n");

    println!("{:>10} {:>10} {:>10} {:>8} {:>12}", "sigma_dB", "rmse_m", "dr_rmse_m", "ratio", "median_ms");
    let mut rows = Vec::new();
    for &sigma in sigmas {
        let mut c = cfg.clone();
        c.path_loss.shadowing_sigma_db = sigma;
        c.validate()?;
        let run = run_with_baseline(&c)?;
        let s = summarize(&run.results, diag);
        let b = summarize(&run.baseline, diag);
        let row = SweepRow {
            shadowing_sigma_db: sigma,
            rmse_mean: s.rmse_mean,
            baseline_rmse_mean: b.rmse_mean,
            ratio: s.rmse_mean / b.rmse_mean,
            solve_ms_median: s.solve_ms_median,
        };
        println!(
            "{:>10.2} {:>10.3} {:>10.3} {:>8.3} {:>12.4}",
            row.shadowing_sigma_db, row.rmse_mean, row.baseline_rmse_mean, row.ratio, row.solve_ms_median
        );
        rows.push(row);
    }
    log::info!("{}", serde_json::to_string(&rows)?);
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct JoinedRow {
    trial: usize,
    t: usize,
    robot: usize,
    truth_x: f64,
    truth_y: f64,
    truth_phi: f64,
    est_x: f64,
    est_y: f64,
    est_phi: f64,
    position_error: f64,
}

#[derive(Serialize)]
struct TrialExport {
    trial: usize,
    truth: Vec<TrajectoryRow>,
    estimate: Vec<TrajectoryRow>,
}

/// Trial numbers for which both CSVs exist, ascending.
fn trials_in(dir: &Path) -> relloc::Result<Vec<usize>> {
    let mut trials: Vec<usize> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().into_string().ok()?;
            name.strip_prefix("truth_")?.strip_suffix(".csv")?.parse().ok()
        })
        .filter(|t| dir.join(format!("est_{t}.csv")).is_file())
        .collect();
    trials.sort_unstable();
    if trials.is_empty() {
        return Err(Error::Config(format!("no truth_<trial>.csv / est_<trial>.csv pairs in {}", dir.display())));
    }
    Ok(trials)
}

fn read_rows(path: &Path) -> relloc::Result<Vec<TrajectoryRow>> {
    read_trajectory_csv(BufReader::new(File::open(path)?)).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn export(dir: &Path, format: Format) -> relloc::Result<ExitCode> {
    let mut trials = Vec::new();
    for t in trials_in(dir)? {
        let truth = read_rows(&dir.join(format!("truth_{t}.csv")))?;
        let estimate = read_rows(&dir.join(format!("est_{t}.csv")))?;
        if truth.len() != estimate.len() || truth.iter().zip(&estimate).any(|(a, b)| (a.t, a.robot) != (b.t, b.robot)) {
            return Err(Error::Config(format!("trial {t}: truth and estimate rows do not line up")));
        }
        trials.push(TrialExport { trial: t, truth, estimate });
    }
    let path = match format {
        Format::Json => {
            let path = dir.join("trajectories.json");
            let mut w = BufWriter::new(File::create(&path)?);
            serde_json::to_writer(&mut w, &trials)?;
            w.write_all(b"\n")?;
            w.flush()?;
            path
        }
        Format::Csv => {
            let path = dir.join("trajectories.csv");
            let mut w = csv::Writer::from_path(&path).map_err(|e| Error::Io(std::io::Error::other(e)))?;
            for tr in &trials {
                for (a, b) in tr.truth.iter().zip(&tr.estimate) {
                    w.serialize(JoinedRow {
                        trial: tr.trial,
                        t: a.t,
                        robot: a.robot,
                        truth_x: a.x,
                        truth_y: a.y,
                        truth_phi: a.phi,
                        est_x: b.x,
                        est_y: b.y,
                        est_phi: b.phi,
                        position_error: (a.x - b.x).hypot(a.y - b.y),
                    })
                    .map_err(|e| Error::Io(std::io::Error::other(e)))?;
                }
            }
            w.flush()?;
            path
        }
    };
    println!("{}", path.display());
    Ok(ExitCode::SUCCESS)
}
