//! Runs a closed-loop scenario and writes its trajectory CSV and frame log.
//!
//!     cargo run --release --example scenario -- scenario2 /tmp/out
//!
//! The first argument is a built-in name or a TOML path (default
//! `scenario1`); the second is the output directory (default: none written).

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use remote_track::{run_scenario, ScenarioConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "scenario1".into());
    let cfg = match ScenarioConfig::builtin(&name) {
        Some(cfg) => cfg,
        None => ScenarioConfig::load(name.as_ref())?,
    };
    let built = cfg.build()?;
    let result = run_scenario(&built.scenario)?;
    let m = result.metrics(built.t_tail);

    println!("N = {}, M(T) = {:.4}, zoom ratio = {:.4}, rate condition {}", m.levels, m.expansion, m.zoom_ratio, m.rate_condition);
    println!("samples = {}, saturations = {}", m.samples, m.saturations);
    println!("sup |e|, t >= {}: {:.3e} (threshold {})", m.t_tail, m.tracking_tail, built.thresholds.tracking_tail);
    println!("sup |w - w_d|, t >= {}: {:.3e} (threshold {})", m.t_tail, m.decoder_tail, built.thresholds.decoder_tail);

    if let Some(dir) = args.next().map(PathBuf::from) {
        std::fs::create_dir_all(&dir)?;
        result.write_csv(BufWriter::new(File::create(dir.join(&cfg.output.trajectory))?))?;
        result.write_frame_log(BufWriter::new(File::create(dir.join(&cfg.output.frames))?))?;
        println!("wrote {}", dir.display());
    }
    Ok(())
}
