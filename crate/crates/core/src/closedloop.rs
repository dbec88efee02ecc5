//! Closed-loop hybrid system: exosystem, encoder, channel, decoder(s),
//! plant and regulator.
//!
//! The composite state is laid out as
//! `[w, w_e, w_d, (w_d′), z, y, ξ]`. The zoom length and sample counters are
//! discrete and live in the codec states owned by the jump actions.
//!
//! Jump order at a shared instant: encoder, decoder, then the second-level
//! copy `w_d′ ← w_d`.

use std::io::{self, Write};

use serde::Serialize;

use crate::codec::{
    decode_frame, encoder_jump, pack_frame, ChannelFrame, ChannelSpec, CodecState, ExoSpec,
};
use crate::error::{Error, Result};
use crate::region::{distance, norm};
use crate::regulator::{GainSpec, InternalModelSpec, PlantSpec, Regulator};
use crate::sim::{aligned_steps, ALIGN_TOL, run_hybrid, JumpEvent, JumpSchedule, RecordKind, Trajectory, VectorField};

/// Default bound on the composite-state norm.
pub const DEFAULT_DIVERGENCE_CEILING: f64 = 1e3;

/// Under-sampled decoder `w_d′`, reset to `w_d` every `ell·t_bar` seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondLevel {
    pub ell: u32,
    pub t_bar: f64,
}

impl SecondLevel {
    pub fn period(&self) -> f64 {
        self.ell as f64 * self.t_bar
    }
}

/// Smallest `ℓ ≥ 1` with `ℓ·T̄ ≥ T*`.
pub fn check_dwell_compat(t_star: f64, t_bar: f64) -> Result<u32> {
    if !(t_bar > 0.0) || !t_bar.is_finite() {
        return Err(Error::InvalidArgument(format!("T_bar must be > 0, got {t_bar}")));
    }
    if !(t_star > t_bar) {
        return Ok(1);
    }
    // quotients like 0.45 / 0.15 land just above an integer
    Ok((t_star / t_bar - ALIGN_TOL).ceil().max(1.0) as u32)
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialConditions {
    pub w: Vec<f64>,
    /// Common encoder/decoder seed `w_e(0⁻) = w_d(0⁻)`.
    pub w_hat: Vec<f64>,
    pub z: Vec<f64>,
    pub y: f64,
    pub xi: Vec<f64>,
}

/// Everything needed for one closed-loop run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub exo: ExoSpec,
    pub channel: ChannelSpec,
    pub plant: PlantSpec,
    pub internal_model: InternalModelSpec,
    pub gains: GainSpec,
    pub second_level: Option<SecondLevel>,
    pub t_end: f64,
    pub step: f64,
    pub initial: InitialConditions,
    pub divergence_ceiling: f64,
}

impl Scenario {
    pub fn layout(&self) -> Layout {
        Layout {
            r: self.exo.r(),
            n: self.plant.n,
            d: self.internal_model.d,
            second_level: self.second_level.is_some(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.exo.r();
        let init = &self.initial;
        if init.w.len() != r || init.w_hat.len() != r {
            return Err(Error::InvalidArgument(format!("initial w and w_hat need {r} components")));
        }
        if !self.exo.initial_box.contains(&init.w) {
            return Err(Error::InvalidArgument(format!("w(0) = {:?} is outside W0", init.w)));
        }
        if !self.exo.initial_box.contains(&init.w_hat) {
            return Err(Error::InvalidArgument(format!("w_hat(0-) = {:?} is outside W0", init.w_hat)));
        }
        if init.z.len() != self.plant.n {
            return Err(Error::InvalidArgument(format!(
                "initial z has {} components, plant has n = {}",
                init.z.len(),
                self.plant.n
            )));
        }
        if init.xi.len() != self.internal_model.d {
            return Err(Error::InvalidArgument(format!(
                "initial xi has {} components, internal model has d = {}",
                init.xi.len(),
                self.internal_model.d
            )));
        }
        if !(self.t_end > 0.0) {
            return Err(Error::InvalidArgument(format!("t_end must be > 0, got {}", self.t_end)));
        }
        aligned_steps(self.t_end, self.step)?;
        aligned_steps(self.channel.period, self.step)?;
        if let Some(sl) = self.second_level {
            if sl.ell == 0 {
                return Err(Error::InvalidArgument("ell must be >= 1".into()));
            }
            aligned_steps(sl.period(), self.step)?;
        }
        if !(self.divergence_ceiling > 0.0) {
            return Err(Error::InvalidArgument("divergence ceiling must be > 0".into()));
        }
        Ok(())
    }
}

/// Offsets of each block in the composite state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub r: usize,
    pub n: usize,
    pub d: usize,
    pub second_level: bool,
}

impl Layout {
    pub fn w(&self) -> std::ops::Range<usize> {
        0..self.r
    }
    pub fn w_e(&self) -> std::ops::Range<usize> {
        self.r..2 * self.r
    }
    pub fn w_d(&self) -> std::ops::Range<usize> {
        2 * self.r..3 * self.r
    }
    pub fn w_dprime(&self) -> Option<std::ops::Range<usize>> {
        self.second_level.then(|| 3 * self.r..4 * self.r)
    }
    fn exo_blocks(&self) -> usize {
        if self.second_level {
            4
        } else {
            3
        }
    }
    pub fn z(&self) -> std::ops::Range<usize> {
        let s = self.exo_blocks() * self.r;
        s..s + self.n
    }
    pub fn y(&self) -> usize {
        self.exo_blocks() * self.r + self.n
    }
    pub fn xi(&self) -> std::ops::Range<usize> {
        let s = self.y() + 1;
        s..s + self.d
    }
    pub fn dim(&self) -> usize {
        self.y() + 1 + self.d
    }
    /// Decoder feeding the regulator: `w_d′` when configured, else `w_d`.
    pub fn active_decoder(&self) -> std::ops::Range<usize> {
        self.w_dprime().unwrap_or_else(|| self.w_d())
    }

    /// CSV column names, in order.
    pub fn csv_header(&self) -> Vec<String> {
        let mut cols = vec!["t".to_string()];
        fn idx(p: &'static str, m: usize) -> impl Iterator<Item = String> {
            (1..=m).map(move |i| format!("{p}_{i}"))
        }
        cols.extend(idx("w", self.r));
        cols.extend(idx("w_e", self.r));
        cols.extend(idx("w_d", self.r));
        if self.second_level {
            cols.extend(idx("w_dprime", self.r));
        }
        cols.extend(idx("z", self.n));
        cols.push("y".into());
        cols.extend(idx("xi", self.d));
        for c in ["u", "e", "e_hat", "dec_err", "L", "jump"] {
            cols.push(c.into());
        }
        cols
    }
}

struct CompositeField<'a> {
    sc: &'a Scenario,
    reg: &'a Regulator,
    layout: Layout,
}

impl VectorField for CompositeField<'_> {
    fn dim(&self) -> usize {
        self.layout.dim()
    }

    fn eval(&self, x: &[f64], dx: &mut [f64]) {
        let l = &self.layout;
        let exo = &self.sc.exo.field;
        exo.eval(&x[l.w()], &mut dx[l.w()]);
        exo.eval(&x[l.w_e()], &mut dx[l.w_e()]);
        exo.eval(&x[l.w_d()], &mut dx[l.w_d()]);
        if let Some(p) = l.w_dprime() {
            exo.eval(&x[p.clone()], &mut dx[p]);
        }
        let y = x[l.y()];
        let e_hat = y - self.sc.exo.reference(&x[l.active_decoder()]);
        let u = self.reg.rhs(&x[l.xi()], e_hat, &mut dx[l.xi()]);
        let plant = &self.sc.plant;
        (plant.zero_dynamics)(&x[l.z()], y, &plant.mu, &mut dx[l.z()]);
        dx[l.y()] = (plant.drift)(&x[l.z()], y, &plant.mu) + u;
    }
}

/// What happened at one channel sample `kT`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub k: u64,
    pub t: f64,
    /// `L(k)`, the zoom used for this sample.
    pub zoom: f64,
    /// `L(k+1)`.
    pub zoom_next: f64,
    pub symbols: Vec<f64>,
    pub saturated: usize,
    /// `|w(kT) − w_d(kT⁻)|`.
    pub error_before: f64,
    /// `|w(kT) − w_d(kT)|`.
    pub error_after: f64,
}

/// Per-record derived signals.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    /// `e = y − y_r(w)`.
    pub e: Vec<f64>,
    /// `ê = y − y_r(active decoder)`.
    pub e_hat: Vec<f64>,
    /// `|w − w_d|`.
    pub dec_err: Vec<f64>,
    /// Zoom length held by the codec at the record.
    pub zoom: Vec<f64>,
    pub u: Vec<f64>,
}

/// Output of [`run_scenario`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub layout: Layout,
    pub trajectory: Trajectory,
    pub frames: Vec<ChannelFrame>,
    pub samples: Vec<SampleRecord>,
    pub diagnostics: Diagnostics,
    pub rate_condition: bool,
    /// `√r·M(T)/N`.
    pub contraction: f64,
    pub expansion: f64,
    pub levels: u32,
    pub bits: u32,
}

/// Summary numbers for one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetrics {
    pub t_tail: f64,
    pub tracking_tail: f64,
    pub decoder_tail: f64,
    pub max_state_norm: f64,
    pub zoom_ratio: f64,
    pub final_zoom: f64,
    pub expansion: f64,
    pub levels: u32,
    pub rate_condition: bool,
    pub samples: usize,
    pub saturations: usize,
}

/// Tracking error `e(t) = y(t) − y_r(w(t))` along a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingError {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl TrackingError {
    /// `sup{|e(t)| : t ≥ t_tail}`; zero when no record qualifies.
    pub fn tail_sup(&self, t_tail: f64) -> f64 {
        tail_sup(&self.times, &self.values, t_tail)
    }
}

fn tail_sup(times: &[f64], values: &[f64], t_tail: f64) -> f64 {
    times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= t_tail)
        .map(|(_, v)| v.abs())
        .fold(0.0, f64::max)
}

/// Pointwise `y − y_r(w)` over a run.
pub fn compute_tracking_error(result: &RunResult, reference: &dyn Fn(&[f64]) -> f64) -> TrackingError {
    let l = result.layout;
    let traj = &result.trajectory;
    TrackingError {
        times: traj.times().to_vec(),
        values: traj.iter().map(|(_, _, x)| x[l.y()] - reference(&x[l.w()])).collect(),
    }
}

impl RunResult {
    pub fn times(&self) -> &[f64] {
        self.trajectory.times()
    }

    pub fn tracking_tail(&self, t_tail: f64) -> f64 {
        tail_sup(self.times(), &self.diagnostics.e, t_tail)
    }

    pub fn decoder_tail(&self, t_tail: f64) -> f64 {
        tail_sup(self.times(), &self.diagnostics.dec_err, t_tail)
    }

    pub fn max_state_norm(&self) -> f64 {
        self.trajectory.iter().map(|(_, _, x)| norm(x)).fold(0.0, f64::max)
    }

    pub fn saturations(&self) -> usize {
        self.samples.iter().map(|s| s.saturated).sum()
    }

    pub fn metrics(&self, t_tail: f64) -> RunMetrics {
        RunMetrics {
            t_tail,
            tracking_tail: self.tracking_tail(t_tail),
            decoder_tail: self.decoder_tail(t_tail),
            max_state_norm: self.max_state_norm(),
            zoom_ratio: self.contraction,
            final_zoom: self.samples.last().map_or(f64::NAN, |s| s.zoom_next),
            expansion: self.expansion,
            levels: self.levels,
            rate_condition: self.rate_condition,
            samples: self.samples.len(),
            saturations: self.saturations(),
        }
    }

    pub fn csv_header(&self) -> String {
        self.layout.csv_header().join(",")
    }

    /// One row per record; jump instants appear twice with `pre` / `post`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{}", self.csv_header())?;
        let d = &self.diagnostics;
        let mut line = String::new();
        for (i, (t, kind, x)) in self.trajectory.iter().enumerate() {
            use std::fmt::Write as _;
            line.clear();
            let _ = write!(line, "{t}");
            for v in x {
                let _ = write!(line, ",{v}");
            }
            let _ = write!(
                line,
                ",{},{},{},{},{},{}",
                d.u[i],
                d.e[i],
                d.e_hat[i],
                d.dec_err[i],
                d.zoom[i],
                kind.label()
            );
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    /// `k=<int> bits=<hex>` per sample.
    pub fn write_frame_log<W: Write>(&self, mut out: W) -> io::Result<()> {
        for f in &self.frames {
            writeln!(out, "{}", f.log_line())?;
        }
        Ok(())
    }
}

/// Executes the closed-loop hybrid system.
pub fn run_scenario(sc: &Scenario) -> Result<RunResult> {
    sc.validate()?;
    let reg = Regulator::new(&sc.internal_model, sc.gains.clone())?;
    let layout = sc.layout();
    let r = layout.r;
    let channel = &sc.channel;

    let mut x0 = vec![0.0; layout.dim()];
    x0[layout.w()].copy_from_slice(&sc.initial.w);
    x0[layout.w_e()].copy_from_slice(&sc.initial.w_hat);
    x0[layout.w_d()].copy_from_slice(&sc.initial.w_hat);
    if let Some(p) = layout.w_dprime() {
        x0[p].copy_from_slice(&sc.initial.w_hat);
    }
    x0[layout.z()].copy_from_slice(&sc.initial.z);
    x0[layout.y()] = sc.initial.y;
    x0[layout.xi()].copy_from_slice(&sc.initial.xi);

    let mut encoder = CodecState::new(sc.initial.w_hat.clone(), channel.l0);
    let mut decoder = encoder.clone();
    let mut frames = Vec::new();
    let mut samples = Vec::new();

    let field = CompositeField { sc, reg: &reg, layout };
    let trajectory = {
        let codec = |ev: JumpEvent, x: &mut [f64]| -> Result<()> {
            let w = x[layout.w()].to_vec();
            encoder.w_hat.copy_from_slice(&x[layout.w_e()]);
            decoder.w_hat.copy_from_slice(&x[layout.w_d()]);
            let error_before = distance(&w, &decoder.w_hat);
            let zoom = encoder.zoom;

            let out = encoder_jump(&encoder, &w, channel);
            let frame = pack_frame(&out.symbols, encoder.k);
            decoder = decode_frame(&decoder, &frame, channel)?;
            encoder = out.state;

            x[layout.w_e()].copy_from_slice(&encoder.w_hat);
            x[layout.w_d()].copy_from_slice(&decoder.w_hat);
            samples.push(SampleRecord {
                k: frame.k,
                t: ev.t,
                zoom,
                zoom_next: decoder.zoom,
                symbols: out.symbols.values(),
                saturated: out.saturated,
                error_before,
                error_after: distance(&w, &decoder.w_hat),
            });
            frames.push(frame);
            Ok(())
        };
        let mut schedules = vec![JumpSchedule::new(channel.period, 0.0, codec).ordered(0)];
        if let (Some(sl), Some(p)) = (sc.second_level, layout.w_dprime()) {
            let wd = layout.w_d();
            schedules.push(
                JumpSchedule::new(sl.period(), 0.0, move |_, x: &mut [f64]| {
                    x.copy_within(wd.clone(), p.start);
                    Ok(())
                })
                .ordered(1),
            );
        }
        run_hybrid(&field, &x0, &mut schedules, sc.t_end, sc.step)?
    };

    for (t, _, x) in trajectory.iter() {
        let n = norm(x);
        if n > sc.divergence_ceiling {
            return Err(Error::Diverged {
                t,
                norm: n,
                ceiling: sc.divergence_ceiling,
            });
        }
    }

    let diagnostics = diagnostics(sc, &trajectory, &samples, layout);
    Ok(RunResult {
        layout,
        trajectory,
        frames,
        samples,
        diagnostics,
        rate_condition: channel.rate_condition(r),
        contraction: channel.contraction(r),
        expansion: channel.expansion,
        levels: channel.levels,
        bits: channel.bits,
    })
}

fn diagnostics(sc: &Scenario, traj: &Trajectory, samples: &[SampleRecord], l: Layout) -> Diagnostics {
    let cap = traj.len();
    let mut d = Diagnostics {
        e: Vec::with_capacity(cap),
        e_hat: Vec::with_capacity(cap),
        dec_err: Vec::with_capacity(cap),
        zoom: Vec::with_capacity(cap),
        u: Vec::with_capacity(cap),
    };
    let k_gain = sc.gains.gain;
    let mut next_sample = 0;
    let mut zoom = sc.channel.l0;
    for (t, kind, x) in traj.iter() {
        if kind == RecordKind::PostJump {
            if let Some(s) = samples.get(next_sample) {
                if s.t == t {
                    zoom = s.zoom_next;
                    next_sample += 1;
                }
            }
        }
        let y = x[l.y()];
        let e_hat = y - sc.exo.reference(&x[l.active_decoder()]);
        d.e.push(y - sc.exo.reference(&x[l.w()]));
        d.e_hat.push(e_hat);
        d.dec_err.push(distance(&x[l.w()], &x[l.w_d()]));
        d.zoom.push(zoom);
        d.u.push(x[l.xi().start] - k_gain * e_hat);
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dwell_examples() {
        assert_eq!(check_dwell_compat(1.0, 0.15).unwrap(), 7);
        assert_eq!(check_dwell_compat(0.1, 0.15).unwrap(), 1);
        assert_eq!(check_dwell_compat(0.5, 0.5).unwrap(), 1);
        assert_eq!(check_dwell_compat(0.45, 0.15).unwrap(), 3);
        assert!(check_dwell_compat(1.0, 0.0).is_err());
    }

    #[test]
    fn layout_offsets() {
        let l = Layout { r: 2, n: 1, d: 2, second_level: true };
        assert_eq!(l.w_dprime(), Some(6..8));
        assert_eq!(l.z(), 8..9);
        assert_eq!(l.y(), 9);
        assert_eq!(l.xi(), 10..12);
        assert_eq!(l.dim(), 12);
        assert_eq!(l.active_decoder(), 6..8);
        let l = Layout { second_level: false, ..l };
        assert_eq!(l.active_decoder(), 4..6);
        assert_eq!(l.dim(), 10);
    }
}
