//! Adds the under-sampled second-level decoder w_d′ to scenario 1. The copy
//! period ℓ·T̄ is derived from a dwell-time estimate T*.
//!
//!     cargo run --release --example second_level

use remote_track::closedloop::check_dwell_compat;
use remote_track::config::SecondLevelConfig;
use remote_track::region::distance;
use remote_track::{run_scenario, ScenarioConfig};

fn main() -> remote_track::Result<()> {
    let mut cfg = ScenarioConfig::builtin("scenario1").expect("built-in");
    let (t_bar, t_star) = (0.15, 0.45);
    println!("T* = {t_star}, T_bar = {t_bar} -> ell = {}", check_dwell_compat(t_star, t_bar)?);
    cfg.second_level = Some(SecondLevelConfig { t_bar, ell: None, t_star: Some(t_star) });

    let built = cfg.build()?;
    let result = run_scenario(&built.scenario)?;
    let l = result.layout;
    let wdp = l.w_dprime().expect("second level enabled");
    let worst = result
        .trajectory
        .iter()
        .filter(|(t, _, _)| *t >= built.t_tail)
        .map(|(_, _, x)| distance(&x[l.w()], &x[wdp.clone()]))
        .fold(0.0, f64::max);
    println!("sup |w - w_d'|, t >= {}: {worst:.3e}", built.t_tail);
    println!("sup |e|, t >= {}: {:.3e}", built.t_tail, result.tracking_tail(built.t_tail));
    Ok(())
}
