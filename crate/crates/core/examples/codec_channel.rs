//! Drives the zooming encoder and decoder across a bit-level channel for a
//! few samples and prints each frame next to the estimation error.
//!
//!     cargo run --example codec_channel

use std::sync::Arc;

use remote_track::codec::{decode_frame, encoder_jump, pack_frame, CodecState, ChannelSpec, ExoSpec};
use remote_track::region::{distance, BoxRegion};
use remote_track::sim::flow_endpoint;
use remote_track::vdp::VanDerPol;

fn main() -> remote_track::Result<()> {
    let vdp = VanDerPol::new(1.5, 1.0);
    let w0 = BoxRegion::from_intervals(&[[-3.0, 3.0], [-3.0, 3.0]])?;
    let exo = ExoSpec::new(Arc::new(vdp), Arc::new(|w: &[f64]| w[1]), w0.clone(), 1.0)?;
    let (period, h) = (0.15, 1e-3);
    // N_b = 2 bits for r = 2 gives N = 2; M(T) fixed here instead of estimated
    let channel = ChannelSpec::from_budget(2, 2, period, exo.l0(), 1.35)?;
    println!("N = {}, contraction = {:.4}", channel.levels, channel.contraction(2));

    let mut w = vec![1.0, 0.0];
    let mut enc = CodecState::new(w0.center(), exo.l0());
    let mut dec = enc.clone();
    for _ in 0..12 {
        let out = encoder_jump(&enc, &w, &channel);
        let frame = pack_frame(&out.symbols, enc.k);
        dec = decode_frame(&dec, &frame, &channel)?;
        enc = out.state;
        assert_eq!(enc, dec);
        println!("{}  symbols {:?}  |w - w_d| = {:.3e}  L = {:.4}", frame.log_line(), out.symbols.values(), distance(&w, &dec.w_hat), dec.zoom);
        w = flow_endpoint(&vdp, &w, period, h)?;
        enc.w_hat = flow_endpoint(&vdp, &enc.w_hat, period, h)?;
        dec.w_hat = flow_endpoint(&vdp, &dec.w_hat, period, h)?;
    }
    Ok(())
}
