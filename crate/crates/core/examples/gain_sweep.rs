//! Sweeps the error gain k on scenario 1 in parallel and prints the table.
//!
//!     cargo run --release --example gain_sweep

use remote_track::sweep::{run_sweep, threads_from_env, write_sweep_csv, GridAxis};
use remote_track::ScenarioConfig;

fn main() -> remote_track::Result<()> {
    let cfg = ScenarioConfig::builtin("scenario1").expect("built-in");
    let grid = ["k=1,2,4,8,16".parse::<GridAxis>()?];
    let rows = run_sweep(&cfg, &grid, threads_from_env())?;
    write_sweep_csv(&grid, &rows, std::io::stdout()).expect("stdout");
    Ok(())
}
