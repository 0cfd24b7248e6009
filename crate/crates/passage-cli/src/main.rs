use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand_chacha::ChaCha8Rng;

use passage::analytic::{borel_pmf, entrance_cdf, exit_variance, mean_bounds, mean_exit_count};
use passage::coupling::verify_coupling;
use passage::policies::{lis_length, run_i_policy, sample_planar, threshold_count, ControlFunction};
use passage::processes::{
    sample_arrivals, sample_entrance_count, sample_exit_count, sample_urn_count, waiting_integrals,
};
use passage::stats::rng::RngStream;
use passage::stats::{mc_estimate, SummaryStats};

use passage_cli::config::{Config, Opts, DEFAULT_SEED};
use passage_cli::control::parse_control;
use passage_cli::experiments;

#[derive(Parser)]
#[command(name = "passage", version, about = "Exact values, simulations and experiments for the Poisson exit/entrance counts and selection policies")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExactQuantity {
    Mean,
    Cdf,
    Variance,
    Bounds,
    Borel,
    Gap,
}

#[derive(Clone, Copy, ValueEnum)]
enum SimProcess {
    Exit,
    Entrance,
    Urn,
    Integrals,
    Policy,
    Lis,
    Coupling,
}

#[derive(Subcommand)]
enum Cmd {
    /// Closed-form and series evaluations, printed to 17 significant digits
    Exact {
        #[arg(value_enum)]
        quantity: ExactQuantity,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        n: Option<u64>,
        /// Absolute tolerance for series evaluation
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Seeded simulations, one row per replication
    Simulate {
        #[arg(value_enum)]
        process: SimProcess,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        n: Option<u64>,
        #[arg(long)]
        capacity: Option<f64>,
        /// optimal | greedy | stationary | threshold=θ | custom=FILE
        #[arg(long, default_value = "optimal")]
        control: String,
        #[arg(long, default_value_t = 1000)]
        reps: u64,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Emit a single summary row instead of per-replication rows
        #[arg(long)]
        summary: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Preregistered experiments; exit code 0 iff all targets pass
    Experiment {
        name: String,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        n: Option<u64>,
        #[arg(long)]
        capacity: Option<f64>,
        #[arg(long)]
        reps: Option<u64>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Usage(String),
    Runtime(String),
    TargetsFailed,
}

fn main() -> ExitCode {
    let cli = Cli::parse(); // clap exits with 2 on usage errors
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::TargetsFailed) => ExitCode::from(1),
    }
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.cmd {
        Cmd::Exact {
            quantity,
            t,
            n,
            tol,
            format,
            out,
        } => cmd_exact(quantity, t, n, tol, format, &out),
        Cmd::Simulate {
            process,
            t,
            n,
            capacity,
            control,
            reps,
            seed,
            workers,
            format,
            summary,
            out,
        } => cmd_simulate(
            process, t, n, capacity, &control, reps, seed, workers, format, summary, &out,
        ),
        Cmd::Experiment {
            name,
            t,
            n,
            capacity,
            reps,
            seed,
            workers,
            config,
            out,
        } => cmd_experiment(&name, t, n, capacity, reps, seed, workers, &config, &out),
    }
}

fn require_t(t: Option<f64>) -> Result<f64, Failure> {
    t.ok_or_else(|| Failure::Usage("--t is required".into()))
}

fn require_n(n: Option<u64>) -> Result<u64, Failure> {
    n.ok_or_else(|| Failure::Usage("--n is required".into()))
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

/// 17 significant digits: enough to reconstruct the exact f64.
fn sig17(v: f64) -> String {
    format!("{v:.16e}")
}

fn emit(out: &Option<PathBuf>, content: &str) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, content).map_err(runtime),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(content.as_bytes()).map_err(runtime)
        }
    }
}

fn labeled_values(pairs: &[(&str, f64)], format: Format) -> String {
    match format {
        Format::Text => pairs
            .iter()
            .map(|(k, v)| format!("{k} {}\n", sig17(*v)))
            .collect(),
        Format::Csv => {
            let mut s = String::from("label,value\n");
            for (k, v) in pairs {
                s.push_str(&format!("{k},{}\n", sig17(*v)));
            }
            s
        }
        Format::Json => {
            let items: Vec<serde_json::Value> = pairs
                .iter()
                .map(|(k, v)| serde_json::json!({ "label": k, "value": v }))
                .collect();
            let mut s = serde_json::to_string_pretty(&items).expect("serializable");
            s.push('\n');
            s
        }
    }
}

fn cmd_exact(
    quantity: ExactQuantity,
    t: Option<f64>,
    n: Option<u64>,
    tol: f64,
    format: Format,
    out: &Option<PathBuf>,
) -> Result<(), Failure> {
    let pairs: Vec<(&str, f64)> = match quantity {
        ExactQuantity::Mean => {
            let t = require_t(t)?;
            let v = mean_exit_count(t, tol).map_err(runtime)?;
            vec![("mean", v.value), ("error_bound", v.tail_bound)]
        }
        ExactQuantity::Cdf => {
            let t = require_t(t)?;
            let n = require_n(n)?;
            vec![("cdf", entrance_cdf(n, t).map_err(runtime)?)]
        }
        ExactQuantity::Variance => {
            let t = require_t(t)?;
            vec![("variance", exit_variance(t, tol).map_err(runtime)?)]
        }
        ExactQuantity::Bounds => {
            let t = require_t(t)?;
            let (lo, hi) = mean_bounds(t).map_err(runtime)?;
            vec![("lower", lo), ("upper", hi)]
        }
        ExactQuantity::Borel => {
            let n = require_n(n)?;
            vec![("pmf", borel_pmf(n).map_err(runtime)?)]
        }
        ExactQuantity::Gap => {
            let t = require_t(t)?;
            let v = mean_exit_count(t, tol).map_err(runtime)?;
            vec![("gap", (2.0 * t).sqrt() - v.value)]
        }
    };
    emit(out, &labeled_values(&pairs, format))
}

fn summary_output(stats: &SummaryStats, format: Format) -> String {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(stats).expect("serializable");
            s.push('\n');
            s
        }
        _ => format!(
            "n,mean,variance,se,skewness,excess_kurtosis\n{},{},{},{},{},{}\n",
            stats.n, stats.mean, stats.variance, stats.se, stats.skewness, stats.excess_kurtosis
        ),
    }
}

fn rows_output(values: &[f64], format: Format) -> String {
    match format {
        Format::Json => {
            let items: Vec<serde_json::Value> = values
                .iter()
                .enumerate()
                .map(|(i, v)| serde_json::json!({ "rep": i, "value": v }))
                .collect();
            let mut s = serde_json::to_string_pretty(&items).expect("serializable");
            s.push('\n');
            s
        }
        _ => {
            let mut s = String::from("rep,value\n");
            for (i, v) in values.iter().enumerate() {
                s.push_str(&format!("{i},{v}\n"));
            }
            s
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    process: SimProcess,
    t: Option<f64>,
    n: Option<u64>,
    capacity: Option<f64>,
    control: &str,
    reps: u64,
    seed: u64,
    workers: usize,
    format: Format,
    summary: bool,
    out: &Option<PathBuf>,
) -> Result<(), Failure> {
    let _ = (n, capacity); // accepted for interface stability
    let stream = RngStream::new(seed, 0);

    // the non-scalar dumps first
    match process {
        SimProcess::Integrals => {
            let x = require_t(t)?;
            let mut rows = Vec::new();
            for i in 0..reps {
                let mut rng = stream.substream(i).rng();
                let arr = sample_arrivals(x, &mut rng);
                let f = waiting_integrals(&arr, x).map_err(runtime)?;
                rows.push((i, f.t_integral, f.s_integral, f.count));
            }
            let content = match format {
                Format::Json => {
                    let items: Vec<serde_json::Value> = rows
                        .iter()
                        .map(|(i, tv, sv, c)| {
                            serde_json::json!({ "rep": i, "t_integral": tv, "s_integral": sv, "count": c })
                        })
                        .collect();
                    let mut s = serde_json::to_string_pretty(&items).expect("serializable");
                    s.push('\n');
                    s
                }
                _ => {
                    let mut s = String::from("rep,t_integral,s_integral,count\n");
                    for (i, tv, sv, c) in &rows {
                        s.push_str(&format!("{i},{tv},{sv},{c}\n"));
                    }
                    s
                }
            };
            return emit(out, &content);
        }
        SimProcess::Policy if reps == 1 => {
            let t = require_t(t)?;
            let ctl = parse_control(control, t).map_err(runtime)?;
            let mut rng = stream.substream(0).rng();
            let sample = sample_planar(t, &mut rng);
            let trace = run_i_policy(&sample, &ctl).map_err(runtime)?;
            let content = match format {
                Format::Json => {
                    let mut s = serde_json::to_string_pretty(&trace).expect("serializable");
                    s.push('\n');
                    s
                }
                _ => {
                    let mut s = String::from("k,time,mark,path\n");
                    for (k, (p, x)) in trace.accepted.iter().zip(&trace.path).enumerate() {
                        s.push_str(&format!("{k},{},{},{}\n", p.time, p.mark, x));
                    }
                    s
                }
            };
            return emit(out, &content);
        }
        SimProcess::Coupling => {
            let t = require_t(t)?;
            let ctl = parse_control(control, t).map_err(runtime)?;
            let mut rows = Vec::new();
            for i in 0..reps {
                let mut rng = stream.substream(i).rng();
                let sample = sample_planar(t, &mut rng);
                let (report, result) = verify_coupling(&sample, &ctl).map_err(runtime)?;
                rows.push((i, report.pass, result.i_trace.count(), report.telescoping_error));
            }
            let content = match format {
                Format::Json => {
                    let items: Vec<serde_json::Value> = rows
                        .iter()
                        .map(|(i, pass, c, e)| {
                            serde_json::json!({ "rep": i, "pass": pass, "count": c, "telescoping_error": e })
                        })
                        .collect();
                    let mut s = serde_json::to_string_pretty(&items).expect("serializable");
                    s.push('\n');
                    s
                }
                _ => {
                    let mut s = String::from("rep,pass,count,telescoping_error\n");
                    for (i, pass, c, e) in &rows {
                        s.push_str(&format!("{i},{pass},{c},{e}\n"));
                    }
                    s
                }
            };
            return emit(out, &content);
        }
        _ => {}
    }

    // scalar processes: one value per replication
    let kernel: Box<dyn Fn(&mut ChaCha8Rng) -> passage::Result<f64> + Sync> = match process {
        SimProcess::Exit => {
            let t = require_t(t)?;
            Box::new(move |rng| Ok(sample_exit_count(t, rng) as f64))
        }
        SimProcess::Entrance => {
            let t = require_t(t)?;
            Box::new(move |rng| Ok(sample_entrance_count(t, rng) as f64))
        }
        SimProcess::Urn => {
            let t = require_t(t)?;
            Box::new(move |rng| Ok(sample_urn_count(t, rng) as f64))
        }
        SimProcess::Lis => {
            let t = require_t(t)?;
            Box::new(move |rng| Ok(lis_length(&sample_planar(t, rng)) as f64))
        }
        SimProcess::Policy => {
            let t = require_t(t)?;
            let ctl = parse_control(control, t).map_err(runtime)?;
            match ctl {
                ControlFunction::Threshold(theta) => Box::new(move |rng| {
                    Ok(threshold_count(&sample_planar(t, rng), theta)? as f64)
                }),
                other => Box::new(move |rng| {
                    Ok(run_i_policy(&sample_planar(t, rng), &other)?.count() as f64)
                }),
            }
        }
        SimProcess::Integrals | SimProcess::Coupling => unreachable!("handled above"),
    };

    if summary {
        let stats = mc_estimate(&*kernel, reps, stream, workers).map_err(runtime)?;
        emit(out, &summary_output(&stats, format))
    } else {
        let values =
            passage::stats::mc_collect(&*kernel, reps, stream, workers).map_err(runtime)?;
        emit(out, &rows_output(&values, format))
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_experiment(
    name: &str,
    t: Option<f64>,
    n: Option<u64>,
    capacity: Option<f64>,
    reps: Option<u64>,
    seed: u64,
    workers: Option<usize>,
    config: &Option<PathBuf>,
    out: &Option<PathBuf>,
) -> Result<(), Failure> {
    let file_cfg = match config {
        Some(path) => Config::load(path).map_err(Failure::Usage)?,
        None => Config::default(),
    };
    let workers = workers.unwrap_or_else(|| {
        std::thread::available_parallelism()
            .map(|v| v.get())
            .unwrap_or(1)
    });
    let opts = Opts {
        seed,
        workers,
        reps,
        t,
        n,
        capacity,
    }
    .merged(&file_cfg.overrides(name));

    let report = experiments::run(name, &opts).map_err(|e| match e {
        passage::Error::Domain(msg) => Failure::Usage(msg),
        other => Failure::Runtime(other.to_string()),
    })?;
    let mut content = report.to_json();
    content.push('\n');
    emit(out, &content)?;
    if report.pass {
        Ok(())
    } else {
        Err(Failure::TargetsFailed)
    }
}
