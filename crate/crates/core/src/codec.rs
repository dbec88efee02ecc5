//! Zooming quantized encoder/decoder pair and its channel framing.
//!
//! Both sides run a copy of the exosystem flow. At every sample `kT` the
//! encoder quantizes the per-component innovation `w(kT) − w_e(kT⁻)` onto an
//! `N`-level grid of spacing `L(k)/N`, sends the symbol indices over the
//! channel, and both sides apply the same correction. The zoom length then
//! contracts by `√r·M(T)/N`, which is below one exactly when the rate
//! condition `N > √r·M(T)` holds.
//!
//! # Frame format
//!
//! A frame carries one sample. Each symbol `s` is mapped to the index
//! `j = s + (N−1)/2 ∈ {0, …, N−1}` and written as a `⌈log2 N⌉`-bit big-endian
//! field. Fields are laid out for components `1…r` in order, packed MSB-first
//! into octets, and the last octet is zero-padded. The payload therefore has
//! `⌈r·⌈log2 N⌉ / 8⌉` octets.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::region::{distance, BoxRegion};
use crate::sim::{flow_endpoint, VectorField};

/// Exosystem vector field shared between runs.
pub type SharedField = Arc<dyn VectorField + Send + Sync>;

/// Reference output map `y_r(w)`.
pub type ReferenceMap = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Multiplier applied to the sampled maximum expansion ratio.
pub const EXPANSION_SAFETY: f64 = 1.2;

/// Minimum number of pairs accepted by [`estimate_expansion`].
pub const MIN_EXPANSION_PAIRS: usize = 1000;

/// Remote exosystem: dynamics, reference output and initial-condition set.
#[derive(Clone)]
pub struct ExoSpec {
    pub field: SharedField,
    pub reference: ReferenceMap,
    /// `W0`.
    pub initial_box: BoxRegion,
    /// Per-axis inflation turning `W0` into the invariant box `W`.
    pub margin: f64,
}

impl ExoSpec {
    pub fn new(
        field: SharedField,
        reference: ReferenceMap,
        initial_box: BoxRegion,
        margin: f64,
    ) -> Result<Self> {
        if field.dim() != initial_box.dim() {
            return Err(Error::InvalidArgument(format!(
                "exosystem has dimension {} but W0 has {}",
                field.dim(),
                initial_box.dim()
            )));
        }
        if !(margin >= 0.0) || !margin.is_finite() {
            return Err(Error::InvalidArgument(format!("W margin must be >= 0, got {margin}")));
        }
        Ok(Self {
            field,
            reference,
            initial_box,
            margin,
        })
    }

    pub fn r(&self) -> usize {
        self.field.dim()
    }

    /// `W`: `W0` inflated by `margin` on every axis.
    pub fn invariant_box(&self) -> BoxRegion {
        self.initial_box.inflate(self.margin)
    }

    pub fn l0(&self) -> f64 {
        compute_l0(&self.initial_box)
    }

    pub fn reference(&self, w: &[f64]) -> f64 {
        (self.reference)(w)
    }
}

/// Default inflation `√r·L0/(2N) + 0.5`.
pub fn default_margin(r: usize, l0: f64, levels: u32) -> f64 {
    (r as f64).sqrt() * l0 / (2.0 * levels as f64) + 0.5
}

impl std::fmt::Debug for ExoSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExoSpec")
            .field("r", &self.r())
            .field("initial_box", &self.initial_box)
            .field("margin", &self.margin)
            .finish_non_exhaustive()
    }
}

/// Largest coordinate difference over `W0 × W0`, i.e. the longest side.
pub fn compute_l0(initial_box: &BoxRegion) -> f64 {
    initial_box.side_lengths().into_iter().fold(0.0, f64::max)
}

/// `⌈log2 N⌉`.
pub fn bits_per_component(levels: u32) -> u32 {
    if levels <= 1 {
        0
    } else {
        u32::BITS - (levels - 1).leading_zeros()
    }
}

/// Largest `N` with `r·⌈log2 N⌉ ≤ bits`.
pub fn derive_levels(bits: u32, r: usize) -> Result<u32> {
    if r == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    let per = bits as usize / r;
    if per == 0 {
        return Err(Error::BudgetTooSmall { bits, r });
    }
    if per >= 32 {
        return Ok(u32::MAX);
    }
    Ok(1u32 << per)
}

/// Rate condition `N > √r·M(T)`.
pub fn check_rate_condition(levels: u32, r: usize, expansion: f64) -> bool {
    levels as f64 > (r as f64).sqrt() * expansion
}

/// Channel and zoom parameters for one encoder/decoder pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    /// `N_b`, bits per sample.
    pub bits: u32,
    /// `N`, quantization levels per component.
    pub levels: u32,
    /// `T`, sampling interval in seconds.
    pub period: f64,
    /// `L0`, initial zoom length.
    pub l0: f64,
    /// `M(T)`, expansion factor certified for one sampling interval.
    pub expansion: f64,
}

impl ChannelSpec {
    /// Validates an explicit channel. `levels` need not be maximal for `bits`.
    pub fn new(r: usize, bits: u32, levels: u32, period: f64, l0: f64, expansion: f64) -> Result<Self> {
        if levels < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 levels, got {levels}")));
        }
        let need = r as u64 * bits_per_component(levels) as u64;
        if need > bits as u64 {
            return Err(Error::InvalidArgument(format!(
                "{r} components at {levels} levels need {need} bits, budget is {bits}"
            )));
        }
        if !(period > 0.0) || !period.is_finite() {
            return Err(Error::InvalidArgument(format!("sampling period must be > 0, got {period}")));
        }
        if !(l0 > 0.0) || !l0.is_finite() {
            return Err(Error::InvalidArgument(format!("L0 must be > 0, got {l0}")));
        }
        if !(expansion >= 1.0) || !expansion.is_finite() {
            return Err(Error::InvalidArgument(format!("M(T) must be >= 1, got {expansion}")));
        }
        Ok(Self {
            bits,
            levels,
            period,
            l0,
            expansion,
        })
    }

    /// Channel with `N` derived from the bit budget.
    pub fn from_budget(r: usize, bits: u32, period: f64, l0: f64, expansion: f64) -> Result<Self> {
        let levels = derive_levels(bits, r)?;
        Self::new(r, bits, levels, period, l0, expansion)
    }

    /// Per-sample zoom contraction `√r·M(T)/N`.
    pub fn contraction(&self, r: usize) -> f64 {
        (r as f64).sqrt() * self.expansion / self.levels as f64
    }

    pub fn rate_condition(&self, r: usize) -> bool {
        check_rate_condition(self.levels, r, self.expansion)
    }

    pub fn frame_bits(&self, r: usize) -> usize {
        r * bits_per_component(self.levels) as usize
    }
}

/// Options for the Monte Carlo expansion estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionOptions {
    pub pairs: usize,
    pub seed: u64,
    /// Integration step; the horizon must be a multiple of it.
    pub step: f64,
    pub safety: f64,
}

impl Default for ExpansionOptions {
    fn default() -> Self {
        Self {
            pairs: 2000,
            seed: 0,
            step: 1e-3,
            safety: EXPANSION_SAFETY,
        }
    }
}

/// Monte Carlo estimate of `M(T)` over the invariant box `W`, with the default
/// step and safety factor.
pub fn estimate_expansion(exo: &ExoSpec, horizon: f64, pairs: usize, seed: u64) -> Result<f64> {
    estimate_expansion_with(
        exo,
        horizon,
        &ExpansionOptions {
            pairs,
            seed,
            ..ExpansionOptions::default()
        },
    )
}

/// Samples pairs in `W`, flows both points through `horizon` and returns
/// `max(1, 1 + safety·(ρ − 1))`, where `ρ` is the largest distance ratio.
/// The margin scales the observed stretching, so an isometric flow gives 1.
///
/// Even-numbered pairs are independent uniform draws. Odd-numbered pairs put
/// the second point at a tiny random offset from the first so that local
/// stretching along the flow is represented.
pub fn estimate_expansion_with(exo: &ExoSpec, horizon: f64, opts: &ExpansionOptions) -> Result<f64> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidArgument(format!("horizon must be > 0, got {horizon}")));
    }
    if opts.pairs < MIN_EXPANSION_PAIRS {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_EXPANSION_PAIRS} pairs, got {}",
            opts.pairs
        )));
    }
    let w_box = exo.invariant_box();
    let offset = 1e-6 * compute_l0(&w_box).max(1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut worst: f64 = 0.0;
    for j in 0..opts.pairs {
        let a = w_box.sample(&mut rng);
        let b = if j % 2 == 0 {
            w_box.sample(&mut rng)
        } else {
            let dir: Vec<f64> = (0..a.len()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let len = crate::region::norm(&dir).max(1e-300);
            a.iter().zip(&dir).map(|(x, d)| x + offset * d / len).collect()
        };
        let d0 = distance(&a, &b);
        if d0 == 0.0 {
            continue;
        }
        let fa = flow_endpoint(&exo.field, &a, horizon, opts.step)?;
        let fb = flow_endpoint(&exo.field, &b, horizon, opts.step)?;
        worst = worst.max(distance(&fa, &fb) / d0);
    }
    Ok((1.0 + opts.safety * (worst - 1.0)).max(1.0))
}

/// Quantizer output for one component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Quantized {
    /// Grid index `j ∈ {0, …, N−1}`.
    pub index: u32,
    /// Set when the innovation exceeded `L/2` and the symbol was clamped.
    pub saturated: bool,
}

/// Symbol value for grid index `index` on an `N`-level grid.
pub fn symbol_value(index: u32, levels: u32) -> f64 {
    index as f64 - (levels as f64 - 1.0) / 2.0
}

/// Quantizes `delta = w_i(kT) − w_e,i(kT⁻)` at zoom `zoom` onto `levels` levels.
///
/// Even `N`: `sgn(δ)·(⌈N|δ|/L⌉ − 1/2)`; odd `N`: `sgn(δ)·⌈N|δ|/L − 1/2⌉`,
/// with `sgn(0) = +1`. For even `N` a zero innovation maps to `+1/2`.
pub fn quantize_component(delta: f64, zoom: f64, levels: u32) -> Quantized {
    debug_assert!(zoom > 0.0 && levels >= 2);
    let positive = !(delta < 0.0);
    let mag = levels as f64 * delta.abs() / zoom;
    let top = (levels - 1) as f64 / 2.0;
    // magnitude in half-units so both parities stay integral
    let m = if levels.is_multiple_of(2) {
        mag.ceil().max(1.0) - 0.5
    } else {
        (mag - 0.5).ceil().max(0.0)
    };
    let (twice, limit) = (2.0 * m, 2.0 * top);
    let saturated = twice > limit;
    let twice = if saturated || twice.is_nan() { limit } else { twice };
    let signed = if positive { twice } else { -twice };
    let index = ((signed + limit) / 2.0).round() as u32;
    Quantized { index, saturated }
}

/// One sample's quantizer output, as grid indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SymbolVector {
    levels: u32,
    indices: Vec<u32>,
}

impl SymbolVector {
    pub fn new(levels: u32, indices: Vec<u32>) -> Result<Self> {
        if levels < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 levels, got {levels}")));
        }
        if let Some(&bad) = indices.iter().find(|&&j| j >= levels) {
            return Err(Error::MalformedFrame(format!("index {bad} out of range for N = {levels}")));
        }
        Ok(Self { levels, indices })
    }

    /// Builds from symbol values on the half-integer / integer grid.
    pub fn from_values(levels: u32, values: &[f64]) -> Result<Self> {
        let shift = (levels as f64 - 1.0) / 2.0;
        let mut indices = Vec::with_capacity(values.len());
        for &v in values {
            let j = v + shift;
            if j.fract() != 0.0 || j < 0.0 || j >= levels as f64 {
                return Err(Error::InvalidArgument(format!("{v} is not a symbol for N = {levels}")));
            }
            indices.push(j as u32);
        }
        Self::new(levels, indices)
    }

    pub fn levels(&self) -> u32 {
        self.levels
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn value(&self, i: usize) -> f64 {
        symbol_value(self.indices[i], self.levels)
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.value(i)).collect()
    }
}

/// Estimate held by the encoder or the decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct CodecState {
    /// `w_e` on the encoder side, `w_d` on the decoder side.
    pub w_hat: Vec<f64>,
    /// Current zoom length `L(k)`.
    pub zoom: f64,
    /// Index of the next sample.
    pub k: u64,
}

impl CodecState {
    pub fn new(w_hat: Vec<f64>, l0: f64) -> Self {
        Self {
            w_hat,
            zoom: l0,
            k: 0,
        }
    }

    fn apply(&self, symbols: &SymbolVector, channel: &ChannelSpec) -> CodecState {
        let r = self.w_hat.len();
        let step = self.zoom / channel.levels as f64;
        let w_hat = self
            .w_hat
            .iter()
            .enumerate()
            .map(|(i, w)| w + symbols.value(i) * step)
            .collect();
        CodecState {
            w_hat,
            zoom: self.zoom * channel.contraction(r),
            k: self.k + 1,
        }
    }
}

/// Result of one encoder update.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodeOutcome {
    pub state: CodecState,
    pub symbols: SymbolVector,
    /// Number of components whose symbol was clamped.
    pub saturated: usize,
}

/// Encoder reset at `kT`. `state.w_hat` must hold the flowed value `w_e(kT⁻)`.
pub fn encoder_jump(state: &CodecState, w_true: &[f64], channel: &ChannelSpec) -> EncodeOutcome {
    let mut saturated = 0;
    let indices = state
        .w_hat
        .iter()
        .zip(w_true)
        .map(|(we, w)| {
            let q = quantize_component(w - we, state.zoom, channel.levels);
            saturated += q.saturated as usize;
            q.index
        })
        .collect();
    let symbols = SymbolVector {
        levels: channel.levels,
        indices,
    };
    EncodeOutcome {
        state: state.apply(&symbols, channel),
        symbols,
        saturated,
    }
}

/// Decoder reset at `kT` driven by symbols received for sample `sample`.
pub fn decoder_jump(
    state: &CodecState,
    symbols: &SymbolVector,
    sample: u64,
    channel: &ChannelSpec,
) -> Result<CodecState> {
    if sample != state.k {
        return Err(Error::FrameIndexMismatch {
            frame: sample,
            decoder: state.k,
        });
    }
    if symbols.len() != state.w_hat.len() || symbols.levels() != channel.levels {
        return Err(Error::MalformedFrame(format!(
            "expected {} symbols at N = {}, got {} at N = {}",
            state.w_hat.len(),
            channel.levels,
            symbols.len(),
            symbols.levels()
        )));
    }
    Ok(state.apply(symbols, channel))
}

/// Decoder reset straight from a received frame.
pub fn decode_frame(state: &CodecState, frame: &ChannelFrame, channel: &ChannelSpec) -> Result<CodecState> {
    let symbols = unpack_frame(frame, channel.levels, state.w_hat.len())?;
    decoder_jump(state, &symbols, frame.k, channel)
}

/// One sample's channel payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelFrame {
    pub k: u64,
    /// Number of meaningful bits at the front of `payload`.
    pub bit_len: usize,
    pub payload: Vec<u8>,
}

impl ChannelFrame {
    pub fn hex(&self) -> String {
        self.payload.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// `k=<int> bits=<hex>`.
    pub fn log_line(&self) -> String {
        format!("k={} bits={}", self.k, self.hex())
    }
}

/// Writes symbols as MSB-first `⌈log2 N⌉`-bit fields.
pub fn pack_frame(symbols: &SymbolVector, k: u64) -> ChannelFrame {
    let width = bits_per_component(symbols.levels) as usize;
    let bit_len = width * symbols.len();
    let mut payload = vec![0u8; bit_len.div_ceil(8)];
    let mut pos = 0;
    for &j in &symbols.indices {
        for b in (0..width).rev() {
            if j >> b & 1 == 1 {
                payload[pos / 8] |= 0x80 >> (pos % 8);
            }
            pos += 1;
        }
    }
    ChannelFrame { k, bit_len, payload }
}

/// Inverse of [`pack_frame`].
pub fn unpack_frame(frame: &ChannelFrame, levels: u32, r: usize) -> Result<SymbolVector> {
    if levels < 2 {
        return Err(Error::MalformedFrame(format!("need at least 2 levels, got {levels}")));
    }
    let width = bits_per_component(levels) as usize;
    let bit_len = width * r;
    if frame.payload.len() != bit_len.div_ceil(8) {
        return Err(Error::MalformedFrame(format!(
            "payload has {} octets, expected {}",
            frame.payload.len(),
            bit_len.div_ceil(8)
        )));
    }
    let bit = |pos: usize| frame.payload[pos / 8] >> (7 - pos % 8) & 1;
    if (bit_len..frame.payload.len() * 8).any(|p| bit(p) != 0) {
        return Err(Error::MalformedFrame("nonzero padding bits".into()));
    }
    let mut indices = Vec::with_capacity(r);
    let mut pos = 0;
    for _ in 0..r {
        let mut j = 0u32;
        for _ in 0..width {
            j = j << 1 | bit(pos) as u32;
            pos += 1;
        }
        indices.push(j);
    }
    SymbolVector::new(levels, indices)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{FnField, ZeroField};

    fn exo_with<F: VectorField + Send + Sync + 'static>(field: F, axes: &[[f64; 2]]) -> ExoSpec {
        ExoSpec::new(
            Arc::new(field),
            Arc::new(|w: &[f64]| w[w.len() - 1]),
            BoxRegion::from_intervals(axes).unwrap(),
            0.5,
        )
        .unwrap()
    }

    #[test]
    fn l0_is_longest_side() {
        let sq = BoxRegion::from_intervals(&[[-1.0, 1.0], [-1.0, 1.0]]).unwrap();
        assert_eq!(compute_l0(&sq), 2.0);
        assert_eq!(compute_l0(&BoxRegion::point(&[0.3, 0.7]).unwrap()), 0.0);
        let rect = BoxRegion::from_intervals(&[[0.0, 3.0], [-1.0, 1.0]]).unwrap();
        assert_eq!(compute_l0(&rect), 3.0);
    }

    fn brute_levels(bits: u32, r: usize) -> Option<u32> {
        (2..=1u32 << 12)
            .filter(|&n| {
                let ceil_log = (0..).find(|&b| 1u64 << b >= n as u64).unwrap();
                r as u32 * ceil_log <= bits
            })
            .max()
    }

    #[test]
    fn derive_levels_matches_scan() {
        assert_eq!(derive_levels(2, 2).unwrap(), 2);
        assert_eq!(derive_levels(4, 2).unwrap(), 4);
        assert_eq!(derive_levels(7, 2).unwrap(), 8);
        for r in 1..=3 {
            for bits in r as u32..=12 {
                assert_eq!(Some(derive_levels(bits, r).unwrap()), brute_levels(bits, r), "bits={bits} r={r}");
            }
        }
    }

    #[test]
    fn derive_levels_rejects_tiny_budget() {
        assert_eq!(derive_levels(1, 2), Err(Error::BudgetTooSmall { bits: 1, r: 2 }));
    }

    #[test]
    fn rate_condition_arithmetic() {
        assert!(check_rate_condition(2, 2, 1.3));
        assert!(!check_rate_condition(2, 2, 1.5));
        assert!(check_rate_condition(2, 1, 1.0));
    }

    #[test]
    fn quantizer_examples() {
        let q = quantize_component(0.0, 1.0, 3);
        assert_eq!(symbol_value(q.index, 3), 0.0);
        let q = quantize_component(0.3, 1.0, 2);
        assert_eq!(symbol_value(q.index, 2), 0.5);
        let q = quantize_component(-0.5, 1.0, 2);
        let s = symbol_value(q.index, 2);
        assert_eq!(s, -0.5);
        assert_eq!((-0.5 - s * 0.5f64).abs(), 0.25);
        assert!(!q.saturated);
    }

    #[test]
    fn quantizer_saturates_outside_half_zoom() {
        let q = quantize_component(2.0, 1.0, 4);
        assert!(q.saturated);
        assert_eq!(symbol_value(q.index, 4), 1.5);
        let q = quantize_component(-7.0, 1.0, 3);
        assert!(q.saturated);
        assert_eq!(symbol_value(q.index, 3), -1.0);
    }

    #[test]
    fn dead_beat_bound_on_grid() {
        for levels in [2u32, 3, 4, 5, 8] {
            for zoom in [1.0, 0.37, 6.0] {
                let half = zoom / 2.0;
                for i in 0..10_000 {
                    let delta = -half + zoom * i as f64 / 9_999.0;
                    let q = quantize_component(delta, zoom, levels);
                    assert!(!q.saturated, "N={levels} L={zoom} delta={delta}");
                    let err = (delta - symbol_value(q.index, levels) * zoom / levels as f64).abs();
                    assert!(err <= zoom / (2.0 * levels as f64) * (1.0 + 1e-12), "N={levels} delta={delta}");
                }
            }
        }
    }

    fn channel(levels: u32, expansion: f64) -> ChannelSpec {
        ChannelSpec::new(2, 8, levels, 0.1, 1.0, expansion).unwrap()
    }

    #[test]
    fn encoder_with_perfect_estimate() {
        let ch = channel(3, 1.2);
        let st = CodecState::new(vec![0.4, -0.2], 1.0);
        let out = encoder_jump(&st, &[0.4, -0.2], &ch);
        assert_eq!(out.symbols.values(), vec![0.0, 0.0]);
        assert_eq!(out.state.w_hat, st.w_hat);
        assert!((out.state.zoom - 2f64.sqrt() * 1.2 / 3.0).abs() < 1e-15);
        assert_eq!(out.state.k, 1);
    }

    #[test]
    fn encoder_two_level_example() {
        let ch = channel(2, 1.2);
        let st = CodecState::new(vec![0.0, 0.0], 1.0);
        let out = encoder_jump(&st, &[0.3, -0.1], &ch);
        assert_eq!(out.symbols.values(), vec![0.5, -0.5]);
        assert_eq!(out.state.w_hat, vec![0.25, -0.25]);
        let err: Vec<f64> = [0.3, -0.1].iter().zip(&out.state.w_hat).map(|(w, e)| (w - e).abs()).collect();
        assert!((err[0] - 0.05).abs() < 1e-15 && (err[1] - 0.15).abs() < 1e-15);
        let ratio = out.state.zoom / st.zoom;
        assert!((ratio - 0.848528137423857).abs() < 1e-12);
    }

    #[test]
    fn decoder_follows_encoder() {
        let ch = channel(4, 1.4);
        let mut enc = CodecState::new(vec![0.0, 0.0], 1.0);
        let mut dec = enc.clone();
        for (k, w) in [[0.3, -0.2], [0.1, 0.05], [-0.02, 0.03]].iter().enumerate() {
            let out = encoder_jump(&enc, w, &ch);
            let frame = pack_frame(&out.symbols, k as u64);
            dec = decode_frame(&dec, &frame, &ch).unwrap();
            enc = out.state;
            assert_eq!(enc, dec);
        }
    }

    #[test]
    fn decoder_zero_symbols_only_contract() {
        let ch = channel(3, 1.0);
        let st = CodecState::new(vec![1.0, 2.0], 0.5);
        let syms = SymbolVector::from_values(3, &[0.0, 0.0]).unwrap();
        let next = decoder_jump(&st, &syms, 0, &ch).unwrap();
        assert_eq!(next.w_hat, st.w_hat);
        assert!(next.zoom < st.zoom);
    }

    #[test]
    fn decoder_rejects_out_of_sync_frame() {
        let ch = channel(2, 1.0);
        let st = CodecState::new(vec![0.0, 0.0], 1.0);
        let syms = SymbolVector::from_values(2, &[0.5, 0.5]).unwrap();
        assert_eq!(
            decoder_jump(&st, &syms, 3, &ch),
            Err(Error::FrameIndexMismatch { frame: 3, decoder: 0 })
        );
    }

    #[test]
    fn zoom_follows_geometric_law() {
        let ch = channel(2, 1.2);
        let rho = ch.contraction(2);
        let mut st = CodecState::new(vec![0.0, 0.0], 6.0);
        for k in 1..=100 {
            st = encoder_jump(&st, &[0.0, 0.0], &ch).state;
            let exact = 6.0 * rho.powi(k);
            assert!(((st.zoom - exact) / exact).abs() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn frame_examples() {
        let s = SymbolVector::from_values(2, &[0.5, -0.5]).unwrap();
        let f = pack_frame(&s, 0);
        assert_eq!(f.payload, vec![0x80]);
        assert_eq!(f.bit_len, 2);
        let s = SymbolVector::from_values(4, &[-1.5, 1.5]).unwrap();
        let f = pack_frame(&s, 9);
        assert_eq!(f.payload, vec![0x30]);
        assert_eq!(f.log_line(), "k=9 bits=30");
    }

    #[test]
    fn unpack_rejects_bad_frames() {
        let short = ChannelFrame { k: 0, bit_len: 6, payload: vec![] };
        assert!(matches!(unpack_frame(&short, 8, 2), Err(Error::MalformedFrame(_))));
        // N = 3 uses 2-bit fields; index 3 is out of range
        let bad = ChannelFrame { k: 0, bit_len: 2, payload: vec![0xc0] };
        assert!(matches!(unpack_frame(&bad, 3, 1), Err(Error::MalformedFrame(_))));
        let padded = ChannelFrame { k: 0, bit_len: 2, payload: vec![0x81] };
        assert!(matches!(unpack_frame(&padded, 2, 2), Err(Error::MalformedFrame(_))));
    }

    #[test]
    fn frozen_exosystem_has_unit_expansion() {
        let exo = exo_with(ZeroField(2), &[[-1.0, 1.0], [-1.0, 1.0]]);
        assert_eq!(estimate_expansion(&exo, 0.3, 1000, 1).unwrap(), 1.0);
    }

    #[test]
    fn rotation_is_isometry() {
        let rot = FnField::new(2, |x: &[f64], dx: &mut [f64]| {
            dx[0] = x[1];
            dx[1] = -x[0];
        });
        let exo = exo_with(rot, &[[-1.0, 1.0], [-1.0, 1.0]]);
        let m = estimate_expansion(&exo, 1.0, 1000, 5).unwrap();
        // local pairs sit 1e-6·L0 apart, so rounding shows up near 1e-9
        assert!((1.0..=1.0 + 1e-6).contains(&m), "{m}");
    }

    #[test]
    fn expansion_needs_enough_pairs() {
        let exo = exo_with(ZeroField(2), &[[-1.0, 1.0], [-1.0, 1.0]]);
        assert!(estimate_expansion(&exo, 0.3, 10, 1).is_err());
    }

    #[test]
    fn channel_validation() {
        assert!(ChannelSpec::new(2, 2, 4, 0.1, 1.0, 1.0).is_err());
        assert!(ChannelSpec::new(2, 4, 3, 0.1, 1.0, 1.0).is_ok());
        assert!(ChannelSpec::new(2, 4, 4, 0.1, 1.0, 0.9).is_err());
        assert!(ChannelSpec::from_budget(2, 1, 0.1, 1.0, 1.0).is_err());
    }
}
