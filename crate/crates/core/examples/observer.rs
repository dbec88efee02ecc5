//! Open-loop internal-model observer: fed the exact steady-state input, the
//! regulator state converges to the immersion τ(w).
//!
//!     cargo run --release --example observer

use remote_track::acceptance::{immersion_residual, observer_tracking};
use remote_track::regulator::Regulator;
use remote_track::ScenarioConfig;

fn main() -> remote_track::Result<()> {
    let built = ScenarioConfig::builtin("scenario1").expect("built-in").build()?;
    let model = built.model;
    let regulator = Regulator::new(&built.scenario.internal_model, built.scenario.gains.clone())?;
    println!("gain vector G = {:?}", regulator.injection());
    println!("support S = {:?}", regulator.phi_c().support().intervals());

    let residual = immersion_residual(&model, 1e-3)?;
    println!("immersion residual sup |ü + φ(u, u̇)| = {residual:.3e}");

    let (first, tail) = observer_tracking(&model, &regulator, 20.0, 10.0, 1e-2, 1e-3)?;
    match first {
        Some(t) => println!("|ξ − τ(w)| < 1e-2 first at t = {t:.3} s"),
        None => println!("|ξ − τ(w)| never dropped below 1e-2"),
    }
    println!("sup |ξ − τ(w)| over t ≥ 10 s = {tail:.3e}");
    Ok(())
}
