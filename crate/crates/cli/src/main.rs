use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use csa_core::decoder::DegreeKeying;
use csa_core::harness::{parse_loads, to_csv, to_json, write_outputs};
use csa_core::optimizer::{self, ObjectiveSpec};
use csa_core::oracle::{exact_beta, exact_event_probabilities, printed_beta};
use csa_core::rng::frame_stream;
use csa_core::{density_evolution, run_sweep, ChannelModel, DegreeDistribution, PlrReport, SamplingMode, StoppingSetId, SweepPlan};

/// Coded slotted ALOHA simulator and error-floor analysis.
#[derive(Debug, Parser)]
#[command(name = "csa", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the degree distribution seen by the receiver after erasures.
    Induce {
        #[arg(long)]
        dist: DegreeDistribution,
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
    },
    /// Analytic per-degree and average loss rates.
    Predict {
        #[command(flatten)]
        common: Common,
    },
    /// Monte Carlo sweep over load; writes the CSV (stdout unless --out-csv) and optional JSON.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Monte Carlo sweep reporting only the residual stopping-set histogram as JSON.
    Classify {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Asymptotic load threshold by density evolution.
    Threshold {
        #[arg(long)]
        dist: DegreeDistribution,
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
        #[arg(long, default_value_t = density_evolution::DEFAULT_TOL)]
        tol: f64,
    },
    /// Search degree distributions for a threshold / error-floor trade-off.
    Optimize {
        /// Allowed degrees, e.g. `3,8`.
        #[arg(long, value_delimiter = ',', required = true)]
        support: Vec<usize>,
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
        #[arg(long, default_value_t = 0.5)]
        g_target: f64,
        #[arg(long, default_value_t = optimizer::DEFAULT_W_THRESHOLD)]
        w_threshold: f64,
        #[arg(long, default_value_t = optimizer::DEFAULT_W_FLOOR)]
        w_floor: f64,
        #[arg(long, default_value_t = 10_000)]
        budget: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Write the (candidate, objective) trace here.
        #[arg(long)]
        out_json: Option<PathBuf>,
    },
    /// Exact enumeration: a catalog class's placement probability, or decoding outcomes of a user multiset.
    Oracle {
        #[arg(long, conflicts_with = "degrees")]
        class: Option<StoppingSetId>,
        /// User degrees, e.g. `2,2,2`.
        #[arg(long, value_delimiter = ',')]
        degrees: Option<Vec<usize>>,
        #[arg(long)]
        n: usize,
    },
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long)]
    dist: DegreeDistribution,
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    /// `start:stop:step` or a comma-separated list.
    #[arg(long, default_value = "0.05:0.9:0.05")]
    g: String,
    #[arg(long)]
    out_csv: Option<PathBuf>,
    #[arg(long)]
    out_json: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimArgs {
    #[arg(long, default_value_t = 100_000)]
    frames: u64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, value_enum, default_value_t = Keying::Induced)]
    keying: Keying,
    #[arg(long, value_enum, default_value_t = Mode::Physical)]
    mode: Mode,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Keying {
    Induced,
    Original,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Physical,
    Induced,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<csa_core::Error> for Failure {
    fn from(e: csa_core::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn plan(common: &Common, sim: &SimArgs) -> Result<SweepPlan, Failure> {
    let mut plan = SweepPlan::new(common.dist.clone(), common.n, common.eps, parse_loads(&common.g)?, sim.frames, sim.seed);
    plan.workers = sim.workers;
    plan.keying = match sim.keying {
        Keying::Induced => DegreeKeying::Induced,
        Keying::Original => DegreeKeying::Original,
    };
    plan.sampling_mode = match sim.mode {
        Mode::Physical => SamplingMode::Physical,
        Mode::Induced => SamplingMode::Induced,
    };
    plan.out_csv = common.out_csv.clone();
    plan.out_json = common.out_json.clone();
    plan.validate()?;
    Ok(plan)
}

fn pretty(v: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Induce { dist, eps } => {
            let induced = dist.induce(ChannelModel::new(eps)?);
            println!("{induced}");
        }
        Command::Predict { common } => {
            let channel = ChannelModel::new(common.eps)?;
            let mut reports = Vec::new();
            for g in parse_loads(&common.g)? {
                let m = (g * common.n as f64).round() as usize;
                reports.push(json!({ "g": g, "report": PlrReport::analytic(m, common.n, &common.dist, channel)? }));
            }
            let text = pretty(&reports);
            match &common.out_json {
                Some(path) => std::fs::write(path, text)?,
                None => println!("{text}"),
            }
        }
        Command::Simulate { common, sim } => {
            let plan = plan(&common, &sim)?;
            let rows = run_sweep(&plan)?;
            write_outputs(&plan, &rows)?;
            if plan.out_csv.is_none() {
                print!("{}", to_csv(&plan, &rows));
            }
        }
        Command::Classify { common, sim } => {
            let plan = plan(&common, &sim)?;
            let rows = run_sweep(&plan)?;
            let hist: Vec<_> = rows.iter().map(|r| json!({ "g": r.g, "m": r.m, "frames": r.frames, "histogram": r.histogram })).collect();
            if let Some(path) = &plan.out_json {
                std::fs::write(path, to_json(&rows)?)?;
            }
            if let Some(path) = &plan.out_csv {
                std::fs::write(path, to_csv(&plan, &rows))?;
            }
            println!("{}", pretty(&hist));
        }
        Command::Threshold { dist, eps, tol } => {
            let dist = dist.induce(ChannelModel::new(eps)?);
            println!("{}", density_evolution::threshold(&dist, tol)?);
        }
        Command::Optimize { support, n, eps, g_target, w_threshold, w_floor, budget, seed, out_json } => {
            let spec = ObjectiveSpec::new(support, w_threshold, w_floor, g_target, n, eps)?;
            let result = optimizer::optimize(&spec, budget, &mut frame_stream(seed, 0, 0))?;
            println!("{}", result.best);
            if let Some(path) = out_json {
                let trace = json!({
                    "best": result.best.to_string(),
                    "objective": result.best_objective,
                    "spec": spec,
                    "trace": result.trace,
                });
                std::fs::write(path, pretty(&trace))?;
            }
        }
        Command::Oracle { class, degrees, n } => {
            let out = match (class, degrees) {
                (Some(id), _) => {
                    let exact = exact_beta(id, n)?;
                    let printed = printed_beta(id, n)?;
                    json!({
                        "class": id.to_string(),
                        "n": n,
                        "exact": exact.to_string(),
                        "printed": printed.to_string(),
                        "ratio": (&exact / &printed).to_string(),
                    })
                }
                (None, Some(degrees)) => exact_event_probabilities(&degrees, n)?.to_json(),
                (None, None) => return Err(Failure::Config("oracle needs --class or --degrees".into())),
            };
            println!("{}", pretty(&out));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
