use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use remote_track::acceptance::AcceptanceSuite;
use remote_track::sweep::{run_sweep, threads_from_env, write_sweep_csv, GridAxis};
use remote_track::{run_scenario, Error, ScenarioConfig};

const EXIT_CONFIG: u8 = 1;
const EXIT_DIVERGED: u8 = 2;
const EXIT_ACCEPT_FAIL: u8 = 3;

#[derive(Parser)]
#[command(name = "remote-track", version, about = "Remote output tracking over a quantized channel")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write trajectory CSV, frame log and metrics.
    Run {
        /// Path to a TOML config, or builtin:scenario1 / builtin:scenario2.
        #[arg(long)]
        config: String,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Overrides channel.seed (expansion-estimate RNG).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the acceptance suite on the built-in scenarios.
    Accept,
    /// Sweep parameters of a scenario; writes sweep.csv.
    Sweep {
        #[arg(long)]
        config: String,
        /// Axis as key=v1,v2,... (keys: k, kappa, N, N_b, T). Repeatable.
        #[arg(long, required = true)]
        grid: Vec<String>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn load(config: &str, seed: Option<u64>) -> Result<ScenarioConfig, Error> {
    let mut cfg = ScenarioConfig::load_named(config)?;
    if let Some(s) = seed {
        cfg.channel.seed = s;
    }
    Ok(cfg)
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Config(format!("{}: {e}", path.display()))
}

fn cmd_run(config: &str, out: &Path, seed: Option<u64>) -> Result<(), Error> {
    let cfg = load(config, seed)?;
    let built = cfg.build()?;
    let result = run_scenario(&built.scenario)?;
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;

    let csv = out.join(&cfg.output.trajectory);
    let f = File::create(&csv).map_err(|e| io_err(&csv, e))?;
    result.write_csv(BufWriter::new(f)).map_err(|e| io_err(&csv, e))?;

    let log = out.join(&cfg.output.frames);
    let f = File::create(&log).map_err(|e| io_err(&log, e))?;
    result.write_frame_log(BufWriter::new(f)).map_err(|e| io_err(&log, e))?;

    let metrics = result.metrics(built.t_tail);
    let text = toml::to_string(&metrics).map_err(|e| Error::Config(e.to_string()))?;
    let path = out.join(&cfg.output.metrics);
    fs::write(&path, &text).map_err(|e| io_err(&path, e))?;
    print!("{text}");
    if !metrics.rate_condition {
        eprintln!("warning: rate condition N > sqrt(r)*M(T) does not hold");
    }
    Ok(())
}

fn cmd_sweep(config: &str, grid: &[String], out: &Path, seed: Option<u64>, threads: Option<usize>) -> Result<(), Error> {
    let cfg = load(config, seed)?;
    let axes = grid.iter().map(|g| g.parse()).collect::<Result<Vec<GridAxis>, _>>()?;
    let rows = run_sweep(&cfg, &axes, threads.unwrap_or_else(threads_from_env))?;
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let path = out.join("sweep.csv");
    let f = File::create(&path).map_err(|e| io_err(&path, e))?;
    write_sweep_csv(&axes, &rows, BufWriter::new(f)).map_err(|e| io_err(&path, e))?;
    write_sweep_csv(&axes, &rows, std::io::stdout()).map_err(|e| io_err(&path, e))?;
    Ok(())
}

fn exit_for(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    if e.is_divergence() {
        ExitCode::from(EXIT_DIVERGED)
    } else {
        ExitCode::from(EXIT_CONFIG)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.cmd {
        Command::Run { config, out, seed } => cmd_run(&config, &out, seed),
        Command::Sweep { config, grid, out, seed, threads } => cmd_sweep(&config, &grid, &out, seed, threads),
        Command::Accept => {
            let report = AcceptanceSuite::default().run();
            println!("{report}");
            return if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_ACCEPT_FAIL)
            };
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => exit_for(&e),
    }
}
