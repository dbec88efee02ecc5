//! Integrates the Van der Pol exosystem and reports the limit-cycle amplitude
//! and period.
//!
//!     cargo run --example vdp_limit_cycle

use remote_track::sim::integrate_flow;
use remote_track::vdp::VanDerPol;

fn main() -> remote_track::Result<()> {
    let vdp = VanDerPol::new(1.5, 1.0);
    let h = 1e-3;
    let traj = integrate_flow(&vdp, &[1.0, 0.0], 0.0, 100.0, h)?;

    let mut amp = [0.0f64; 2];
    let mut crossings = Vec::new();
    for i in 1..traj.len() {
        let (t, w) = (traj.time(i), traj.state(i));
        if t < 50.0 {
            continue;
        }
        amp[0] = amp[0].max(w[0].abs());
        amp[1] = amp[1].max(w[1].abs());
        let prev = traj.state(i - 1)[0];
        if prev < 0.0 && w[0] >= 0.0 {
            crossings.push(t);
        }
    }
    let period = (crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64;
    println!("amplitude |w1| = {:.4}, |w2| = {:.4}", amp[0], amp[1]);
    println!("period ≈ {period:.4} s over {} upward crossings", crossings.len());
    Ok(())
}
