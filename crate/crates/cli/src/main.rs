use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wtmpc::harness::{apply_entries, emit, load_config, metrics_table, run_experiment, ExperimentConfig, ExperimentResult};
use wtmpc::verify::{lincheck, qpbench, wind_grid};
use wtmpc::{Error, Mode};

const EXIT_CONFIG: u8 = 1;
const EXIT_SIMULATION: u8 = 2;
const EXIT_CHECK: u8 = 3;

#[derive(Parser)]
#[command(name = "wtmpc", version, about = "MPC maximum-power tracking experiments for a variable-speed wind turbine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one controller on one wind profile.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        /// online or offline
        #[arg(long)]
        controller: Option<String>,
    },
    /// Run both controllers on a shared wind profile.
    Compare {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Check the analytic linearization against finite differences.
    Lincheck {
        /// start:stop:step in m/s
        #[arg(long, default_value = "4:11:0.1")]
        v_range: String,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Check the QP solver against exhaustive active-set enumeration.
    Qpbench {
        #[arg(long, default_value_t = 500)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// constant:V, steps, turbulent or turbulent:MEAN
    #[arg(long)]
    wind: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Simulated time in seconds.
    #[arg(long)]
    duration: Option<f64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Skip the SVG plots.
    #[arg(long)]
    no_plots: bool,
    /// Extra `key=value` overrides, applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

enum Failure {
    Config(String),
    Simulation(String),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::OutOfRange { .. } => Failure::Config(e.to_string()),
            _ => Failure::Simulation(e.to_string()),
        }
    }
}

fn read_config(path: Option<&PathBuf>) -> Result<ExperimentConfig, Failure> {
    match path {
        None => Ok(ExperimentConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?;
            Ok(load_config(&text)?)
        }
    }
}

fn build_config(run: &RunArgs, controller: Option<&str>) -> Result<ExperimentConfig, Failure> {
    let mut cfg = read_config(run.config.as_ref())?;
    let mut entries = Vec::new();
    for s in &run.overrides {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| Failure::Config(format!("--set expects KEY=VALUE, got '{s}'")))?;
        entries.push((k.trim().to_string(), v.trim().to_string()));
    }
    let flags = [
        ("wind", run.wind.clone()),
        ("seed", run.seed.map(|s| s.to_string())),
        ("duration", run.duration.map(|d| d.to_string())),
        ("controller", controller.map(str::to_string)),
    ];
    entries.extend(flags.into_iter().filter_map(|(k, v)| v.map(|v| (k.to_string(), v))));
    apply_entries(&mut cfg, &entries)?;
    cfg.profile()?;
    Ok(cfg)
}

fn report(results: &[ExperimentResult]) {
    for r in results {
        println!("[{}]", r.mode);
        print!("{}", metrics_table(&r.metrics));
    }
}

fn run_and_emit(run: &RunArgs, cfg: &ExperimentConfig, modes: &[Mode]) -> Result<Vec<ExperimentResult>, Failure> {
    let results = run_experiment(cfg, modes)?;
    let written = emit(&results, &run.out, !run.no_plots).map_err(|e| Failure::Simulation(e.to_string()))?;
    report(&results);
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(results)
}

fn parse_range(s: &str) -> Result<Vec<f64>, Failure> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| Failure::Config(format!("--v-range expects start:stop:step, got '{s}'")))?;
    match parts.as_slice() {
        &[start, stop, step] if step > 0.0 && stop >= start => Ok(wind_grid(start, stop, step)),
        _ => Err(Failure::Config(format!("--v-range expects start:stop:step with step > 0, got '{s}'"))),
    }
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate { run, controller } => {
            let cfg = build_config(&run, controller.as_deref())?;
            run_and_emit(&run, &cfg, &[cfg.mode])?;
            Ok(())
        }
        Command::Compare { run } => {
            let cfg = build_config(&run, None)?;
            let results = run_and_emit(&run, &cfg, &[Mode::Offline, Mode::Online])?;
            let (off, on) = (&results[0].metrics, &results[1].metrics);
            println!(
                "rms power error: offline {:.3} W, online {:.3} W; torque variation: offline {:.3}, online {:.3}",
                off.rms_power_error, on.rms_power_error, off.torque_variation, on.torque_variation
            );
            Ok(())
        }
        Command::Lincheck { v_range, config } => {
            let params = read_config(config.as_ref())?.params;
            let speeds = parse_range(&v_range)?;
            let rep = lincheck(&speeds, &params)?;
            println!("v,jacobian_error,actuator_pole_error,inverse_error,pass");
            for r in &rep.rows {
                println!("{},{:.3e},{:.3e},{:.3e},{}", r.v, r.jacobian_error, r.actuator_pole_error, r.inverse_error, r.pass);
            }
            println!(
                "{} points, worst jacobian error {:.3e}, {:.3} s",
                rep.rows.len(),
                rep.worst_jacobian_error(),
                rep.elapsed.as_secs_f64()
            );
            if rep.all_pass() {
                Ok(())
            } else {
                Err(Failure::Check("linearization check failed".into()))
            }
        }
        Command::Qpbench { instances, seed } => {
            let rep = qpbench(instances, seed);
            println!(
                "instances {}, matched {}, infeasible {}, max solution error {:.3e}, max stationarity {:.3e}, max primal {:.3e}, max complementarity {:.3e}, kkt failures {}, {:.3} s",
                rep.instances,
                rep.matched,
                rep.infeasible,
                rep.max_solution_error,
                rep.max_stationarity,
                rep.max_primal,
                rep.max_complementarity,
                rep.kkt_failures,
                rep.elapsed.as_secs_f64()
            );
            if rep.all_pass() {
                Ok(())
            } else {
                Err(Failure::Check("QP benchmark failed".into()))
            }
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Simulation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_SIMULATION)
        }
        Err(Failure::Check(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(EXIT_CHECK)
        }
    }
}
