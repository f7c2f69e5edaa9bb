use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ina_fl::harness::selftest::run_selftest;
use ina_fl::harness::{
    generate_topology, run_latency_sweep, run_model_sweep, run_overhead_sweep, run_point,
    write_audit_csv, write_csv, ExperimentResult, Method, ModelChoice, RunOptions, ScenarioConfig,
    MODEL_CATALOG,
};
use ina_fl::routing::{solve_inc, theorem2_bound, RoutingInstance};
use ina_fl::Error;

#[derive(Parser)]
#[command(name = "ina-fl", version, about = "Routing and aggregation experiments for hierarchical federated learning")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the number of rounding trials.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Worker threads.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Record wall-clock times in the output.
    #[arg(long, global = true)]
    timing: bool,
    /// CSV destination; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Also write per-user assignments of small scenarios to this file.
    #[arg(long, global = true)]
    audit: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Latency of every method against the number of users.
    SweepK {
        #[arg(long, value_delimiter = ',', default_values_t = default_k_values())]
        k_values: Vec<usize>,
    },
    /// Latency of the schemes against model size.
    SweepModel {
        /// Catalog names or sizes in MB.
        #[arg(long, value_delimiter = ',')]
        models: Vec<String>,
    },
    /// Cloud traffic and aggregation inputs against the number of users.
    SweepOverhead {
        #[arg(long, value_delimiter = ',', default_values_t = default_k_values())]
        k_values: Vec<usize>,
    },
    /// Solves one scenario and prints the routing.
    Solve {
        /// Overrides the number of users.
        #[arg(long)]
        users: Option<usize>,
    },
    /// Runs the built-in consistency checks.
    Selftest,
}

fn default_k_values() -> Vec<usize> {
    (1..=10).map(|i| i * 100).collect()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidInput(_) => 2,
        Error::Infeasible { .. } | Error::InfeasibleRate { .. } => 3,
        _ => 4,
    }
}

fn load_config(common: &Common) -> Result<ScenarioConfig, Error> {
    let mut cfg = match &common.config {
        Some(p) => ScenarioConfig::from_file(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(t) = common.trials {
        cfg.trials = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_model(s: &str) -> Result<ModelChoice, Error> {
    let choice = match s.parse::<f64>() {
        Ok(mb) => ModelChoice::SizeMb(mb),
        Err(_) => ModelChoice::Named(s.to_string()),
    };
    choice.size()?;
    Ok(choice)
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    let common = cli.common;
    if common.jobs == 0 {
        return Err(Error::Config("--jobs must be at least 1".into()));
    }
    let cfg = load_config(&common)?;
    let opts = RunOptions { jobs: common.jobs, timing: common.timing };

    let rows = match cli.command {
        Command::SweepK { k_values } => run_latency_sweep(&cfg, &k_values, opts)?,
        Command::SweepOverhead { k_values } => run_overhead_sweep(&cfg, &k_values, opts)?,
        Command::SweepModel { models } => {
            let models: Vec<ModelChoice> = if models.is_empty() {
                MODEL_CATALOG.iter().map(|(n, _)| ModelChoice::Named(n.to_string())).collect()
            } else {
                models.iter().map(|m| parse_model(m)).collect::<Result<_, _>>()?
            };
            run_model_sweep(&cfg, &models, opts)?
        }
        Command::Solve { users } => {
            let cfg = ScenarioConfig { num_users: users.unwrap_or(cfg.num_users), ..cfg };
            cfg.validate()?;
            print_solution(&cfg)?;
            if common.out.is_none() && common.audit.is_none() {
                return Ok(ExitCode::SUCCESS);
            }
            run_point(&cfg, &Method::ALL, common.timing)?
        }
        Command::Selftest => {
            let checks = run_selftest(cfg.seed)?;
            let mut ok = true;
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                ok &= c.passed;
            }
            return Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) });
        }
    };
    emit(&common, &rows)?;
    Ok(ExitCode::SUCCESS)
}

fn emit(common: &Common, rows: &[ExperimentResult]) -> Result<(), Error> {
    let io_err = |e: io::Error| Error::Config(format!("cannot write output: {e}"));
    match &common.out {
        Some(p) => write_csv(File::create(p).map_err(io_err)?, rows)?,
        None => write_csv(io::stdout().lock(), rows)?,
    }
    if let Some(p) = &common.audit {
        write_audit_csv(File::create(p).map_err(io_err)?, rows)?;
    }
    Ok(())
}

fn print_solution(cfg: &ScenarioConfig) -> Result<(), Error> {
    let topo = generate_topology(cfg)?;
    let inst = RoutingInstance::all_users(topo, cfg.model.size()?);
    let sol = solve_inc(&inst, cfg.seed, cfg.trials)?;
    let y = sol.lower_bound_s.unwrap_or(f64::NAN);
    let mut out = io::stdout().lock();
    let w = |e: io::Error| Error::Config(format!("cannot write output: {e}"));
    writeln!(out, "scenario {}", cfg.scenario_id()).map_err(w)?;
    writeln!(out, "users {}  model {:.0} MB", inst.num_users(), inst.size().megabytes()).map_err(w)?;
    writeln!(out, "latency_s {:.6}", sol.objective_s).map_err(w)?;
    writeln!(out, "lower_bound_s {y:.6}").map_err(w)?;
    if let Ok(f) = theorem2_bound(inst.num_users(), y) {
        writeln!(out, "bound_factor {f:.6}").map_err(w)?;
    }
    for (c, load) in sol.assignment.loads().iter().enumerate() {
        let name = if c == 0 { "cloud".to_string() } else { format!("edge{}", c - 1) };
        writeln!(out, "load {name} {load}").map_err(w)?;
    }
    Ok(())
}
