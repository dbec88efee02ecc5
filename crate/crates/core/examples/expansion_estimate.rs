//! Monte Carlo estimate of the flow expansion factor M(T) over W, and the
//! rate condition N > sqrt(r)·M(T) for the two channel budgets.
//!
//!     cargo run --release --example expansion_estimate

use std::sync::Arc;

use remote_track::codec::{check_rate_condition, default_margin, derive_levels, estimate_expansion, ExoSpec};
use remote_track::region::BoxRegion;
use remote_track::vdp::VanDerPol;

fn main() -> remote_track::Result<()> {
    let w0 = BoxRegion::from_intervals(&[[-3.0, 3.0], [-3.0, 3.0]])?;
    for (bits, period) in [(2u32, 0.15), (4, 0.5)] {
        let levels = derive_levels(bits, 2)?;
        let margin = default_margin(2, 6.0, levels);
        let exo = ExoSpec::new(Arc::new(VanDerPol::new(1.5, 1.0)), Arc::new(|w: &[f64]| w[1]), w0.clone(), margin)?;
        let m = estimate_expansion(&exo, period, 2000, 2024)?;
        println!(
            "N_b = {bits}, T = {period}: N = {levels}, M = {m:.4}, sqrt(2)·M = {:.4}, rate condition {}",
            2f64.sqrt() * m,
            check_rate_condition(levels, 2, m)
        );
    }
    Ok(())
}
