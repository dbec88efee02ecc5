//! Internal-model regulator with high-gain error injection.
//!
//! The internal model is the observer-form chain
//! `ξ̇ = (ξ₂, …, ξ_d, −φ_c(ξ)) − G·k·ê`, `u = ξ₁ − k·ê`, where `φ_c` agrees
//! with the immersion nonlinearity `φ` on a support box and vanishes outside
//! a slightly larger one.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::region::BoxRegion;
use crate::sim::{integrate_flow, VectorField};

/// Largest internal-model order supported.
pub const MAX_ORDER: usize = 16;

/// Scalar map on ℝᵈ.
pub type ScalarMap = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// `q(z, y, μ)`.
pub type DriftMap = Arc<dyn Fn(&[f64], f64, &[f64]) -> f64 + Send + Sync>;

/// Writes `f(z, y, μ)` into the last argument.
pub type ZeroDynamicsMap = Arc<dyn Fn(&[f64], f64, &[f64], &mut [f64]) + Send + Sync>;

/// Relative-degree-one plant in normal form: `ż = f(z, y, μ)`, `ẏ = q(z, y, μ) + u`.
#[derive(Clone)]
pub struct PlantSpec {
    /// Zero-dynamics dimension `n` (may be 0).
    pub n: usize,
    pub zero_dynamics: ZeroDynamicsMap,
    pub drift: DriftMap,
    pub mu: Vec<f64>,
}

impl PlantSpec {
    /// `ẏ = u` with no zero dynamics.
    pub fn integrator() -> Self {
        Self {
            n: 0,
            zero_dynamics: Arc::new(|_, _, _, _| {}),
            drift: Arc::new(|_, _, _| 0.0),
            mu: Vec::new(),
        }
    }
}

impl std::fmt::Debug for PlantSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PlantSpec")
            .field("n", &self.n)
            .field("mu", &self.mu)
            .finish_non_exhaustive()
    }
}

/// Immersion data: order `d`, nonlinearity `φ`, and the box `S` where
/// `φ_c = φ`.
#[derive(Clone)]
pub struct InternalModelSpec {
    pub d: usize,
    pub phi: ScalarMap,
    pub support: BoxRegion,
    pub blend_width: f64,
}

impl std::fmt::Debug for InternalModelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("InternalModelSpec")
            .field("d", &self.d)
            .field("support", &self.support)
            .field("blend_width", &self.blend_width)
            .finish_non_exhaustive()
    }
}

/// True when `λᵈ + c₀λᵈ⁻¹ + … + c_{d−1}` has every root in the open left
/// half-plane (Routh–Hurwitz).
pub fn is_hurwitz(c: &[f64]) -> bool {
    if c.is_empty() || c.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return false;
    }
    let coeffs: Vec<f64> = std::iter::once(1.0).chain(c.iter().copied()).collect();
    let width = coeffs.len().div_ceil(2);
    let mut prev: Vec<f64> = coeffs.iter().step_by(2).copied().collect();
    let mut cur: Vec<f64> = coeffs.iter().skip(1).step_by(2).copied().collect();
    prev.resize(width + 1, 0.0);
    cur.resize(width + 1, 0.0);
    // rows 0 and 1 are seeded; compute rows 2..=degree
    for _ in 2..coeffs.len() {
        if !(cur[0] > 0.0) {
            return false;
        }
        let mut next = vec![0.0; width + 1];
        for j in 0..width {
            next[j] = (cur[0] * prev[j + 1] - prev[0] * cur[j + 1]) / cur[0];
        }
        prev = cur;
        cur = next;
    }
    cur[0] > 0.0
}

/// Observer gains: `κ`, Hurwitz coefficients `c₀…c_{d−1}`, and error gain `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSpec {
    pub kappa: f64,
    pub hurwitz: Vec<f64>,
    pub gain: f64,
}

impl GainSpec {
    pub fn new(kappa: f64, hurwitz: Vec<f64>, gain: f64) -> Result<Self> {
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(Error::InvalidArgument(format!("kappa must be > 0, got {kappa}")));
        }
        if !(gain > 0.0) || !gain.is_finite() {
            return Err(Error::InvalidArgument(format!("error gain k must be > 0, got {gain}")));
        }
        if !is_hurwitz(&hurwitz) {
            return Err(Error::NotHurwitz(hurwitz));
        }
        Ok(Self { kappa, hurwitz, gain })
    }

    pub fn order(&self) -> usize {
        self.hurwitz.len()
    }
}

/// `G_i = κⁱ·c_{d−i}`, `i = 1…d`.
pub fn build_gain_vector(spec: &GainSpec) -> Result<Vec<f64>> {
    if !is_hurwitz(&spec.hurwitz) {
        return Err(Error::NotHurwitz(spec.hurwitz.clone()));
    }
    let d = spec.hurwitz.len();
    Ok((1..=d)
        .map(|i| spec.kappa.powi(i as i32) * spec.hurwitz[d - i])
        .collect())
}

/// Compactly supported version of `φ`.
#[derive(Clone)]
pub struct PhiC {
    phi: ScalarMap,
    support: BoxRegion,
    outer: BoxRegion,
    width: f64,
}

impl PhiC {
    pub fn support(&self) -> &BoxRegion {
        &self.support
    }

    /// `S` inflated by the blend width; `φ_c` vanishes outside it.
    pub fn outer(&self) -> &BoxRegion {
        &self.outer
    }

    /// Piecewise-linear bump: 1 on `S`, 0 outside the outer box.
    pub fn blend(&self, eta: &[f64]) -> f64 {
        let mut beta = 1.0;
        for (i, &x) in eta.iter().enumerate() {
            let (lo, hi) = (self.support.lo()[i], self.support.hi()[i]);
            let b = if x < lo {
                ((x - (lo - self.width)) / self.width).max(0.0)
            } else if x > hi {
                (((hi + self.width) - x) / self.width).max(0.0)
            } else {
                1.0
            };
            if b == 0.0 {
                return 0.0;
            }
            beta *= b;
        }
        beta
    }

    pub fn eval(&self, eta: &[f64]) -> f64 {
        let beta = self.blend(eta);
        if beta == 0.0 {
            return 0.0;
        }
        let mut buf = [0.0; MAX_ORDER];
        let clipped = &mut buf[..eta.len()];
        self.outer.clip(eta, clipped);
        beta * (self.phi)(clipped)
    }
}

impl std::fmt::Debug for PhiC {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PhiC")
            .field("support", &self.support)
            .field("width", &self.width)
            .finish_non_exhaustive()
    }
}

/// `η ↦ β(η)·φ(clip(η))`.
pub fn build_phi_c(spec: &InternalModelSpec) -> Result<PhiC> {
    if !(spec.blend_width > 0.0) || !spec.blend_width.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "blend width must be > 0, got {}",
            spec.blend_width
        )));
    }
    if spec.d == 0 || spec.d > MAX_ORDER || spec.support.dim() != spec.d {
        return Err(Error::InvalidArgument(format!(
            "internal model order {} with support of dimension {}",
            spec.d,
            spec.support.dim()
        )));
    }
    Ok(PhiC {
        phi: spec.phi.clone(),
        support: spec.support.clone(),
        outer: spec.support.inflate(spec.blend_width),
        width: spec.blend_width,
    })
}

/// `Φ_c(ξ) = (ξ₂, …, ξ_d, −φ_c(ξ))`.
pub fn internal_model_field(xi: &[f64], phi_c: &PhiC, out: &mut [f64]) {
    let d = xi.len();
    out[..d - 1].copy_from_slice(&xi[1..]);
    out[d - 1] = -phi_c.eval(xi);
}

/// Internal-model state `ξ`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegulatorState {
    pub xi: Vec<f64>,
}

/// Assembled regulator: gains, `G`, and `φ_c`.
#[derive(Debug, Clone)]
pub struct Regulator {
    gains: GainSpec,
    injection: Vec<f64>,
    phi_c: PhiC,
}

impl Regulator {
    pub fn new(model: &InternalModelSpec, gains: GainSpec) -> Result<Self> {
        if gains.order() != model.d {
            return Err(Error::InvalidArgument(format!(
                "{} Hurwitz coefficients for internal model of order {}",
                gains.order(),
                model.d
            )));
        }
        Ok(Self {
            injection: build_gain_vector(&gains)?,
            phi_c: build_phi_c(model)?,
            gains,
        })
    }

    pub fn order(&self) -> usize {
        self.injection.len()
    }

    pub fn gains(&self) -> &GainSpec {
        &self.gains
    }

    /// `G`.
    pub fn injection(&self) -> &[f64] {
        &self.injection
    }

    pub fn phi_c(&self) -> &PhiC {
        &self.phi_c
    }

    /// Writes `ξ̇ = Φ_c(ξ) − G·k·ê` into `xi_dot` and returns `u = ξ₁ − k·ê`.
    pub fn rhs(&self, xi: &[f64], e_hat: f64, xi_dot: &mut [f64]) -> f64 {
        internal_model_field(xi, &self.phi_c, xi_dot);
        let ke = self.gains.gain * e_hat;
        for (dx, g) in xi_dot.iter_mut().zip(&self.injection) {
            *dx -= g * ke;
        }
        xi[0] - ke
    }

    /// Open-loop observer `ξ̇ = Φ_c(ξ) + G·(u_ss − ξ₁)` driven by the exact
    /// steady-state input.
    pub fn observer_rhs(&self, xi: &[f64], u_ss: f64, xi_dot: &mut [f64]) {
        internal_model_field(xi, &self.phi_c, xi_dot);
        let innov = u_ss - xi[0];
        for (dx, g) in xi_dot.iter_mut().zip(&self.injection) {
            *dx += g * innov;
        }
    }
}

/// Functional form of [`Regulator::rhs`].
pub fn regulator_rhs(state: &RegulatorState, e_hat: f64, regulator: &Regulator) -> (Vec<f64>, f64) {
    let mut xi_dot = vec![0.0; state.xi.len()];
    let u = regulator.rhs(&state.xi, e_hat, &mut xi_dot);
    (xi_dot, u)
}

/// Support box for `φ_c`: flow the exosystem from each start for `horizon`
/// seconds, map the second half of every run through `tau`, take the bounding
/// box and grow it by `inflation` of its half-width per axis.
pub fn support_from_attractor<F, T>(
    exo: &F,
    starts: &[Vec<f64>],
    tau: T,
    horizon: f64,
    step: f64,
    inflation: f64,
) -> Result<BoxRegion>
where
    F: VectorField + ?Sized,
    T: Fn(&[f64]) -> Vec<f64>,
{
    let mut images = Vec::new();
    for w0 in starts {
        let traj = integrate_flow(exo, w0, 0.0, horizon, step)?;
        for (t, _, w) in traj.iter() {
            if t >= 0.5 * horizon {
                images.push(tau(w));
            }
        }
    }
    let bbox = BoxRegion::bounding(images.iter().map(Vec::as_slice))?;
    Ok(bbox.scale_about_center(inflation))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_model(support: &[[f64; 2]]) -> InternalModelSpec {
        InternalModelSpec {
            d: support.len(),
            phi: Arc::new(|x: &[f64]| x[0] + 2.0 * x[1]),
            support: BoxRegion::from_intervals(support).unwrap(),
            blend_width: 0.5,
        }
    }

    #[test]
    fn gain_vector_for_kappa_3() {
        let g = GainSpec::new(3.0, vec![4.0, 4.0], 8.0).unwrap();
        assert_eq!(build_gain_vector(&g).unwrap(), vec![12.0, 36.0]);
        let g = GainSpec::new(1.0, vec![2.0, 1.0], 1.0).unwrap();
        assert_eq!(build_gain_vector(&g).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn marginal_polynomial_rejected() {
        assert!(matches!(GainSpec::new(1.0, vec![0.0, 1.0], 1.0), Err(Error::NotHurwitz(_))));
        let bad = GainSpec { kappa: 1.0, hurwitz: vec![0.0, 1.0], gain: 1.0 };
        assert!(matches!(build_gain_vector(&bad), Err(Error::NotHurwitz(_))));
    }

    #[test]
    fn routh_known_cases() {
        assert!(is_hurwitz(&[1.0]));
        assert!(is_hurwitz(&[3.0, 3.0, 1.0])); // (λ+1)³
        assert!(!is_hurwitz(&[1.0, 1.0, 2.0])); // c0·c1 < c2
        assert!(is_hurwitz(&[4.0, 6.0, 4.0, 1.0])); // (λ+1)⁴
        assert!(!is_hurwitz(&[1.0, -1.0]));
        assert!(!is_hurwitz(&[]));
    }

    #[test]
    fn phi_c_inside_and_outside() {
        let phi_c = build_phi_c(&linear_model(&[[-1.0, 1.0], [-2.0, 2.0]])).unwrap();
        assert_eq!(phi_c.eval(&[0.5, -1.0]), 0.5 - 2.0);
        assert_eq!(phi_c.eval(&[1.5, 0.0]), 0.0);
        assert_eq!(phi_c.eval(&[0.0, -9.0]), 0.0);
        // halfway across the band on axis 0
        let mid = phi_c.eval(&[1.25, 0.0]);
        assert!((mid - 0.5 * 1.25).abs() < 1e-15);
    }

    #[test]
    fn phi_c_rejects_zero_blend() {
        let mut spec = linear_model(&[[-1.0, 1.0], [-1.0, 1.0]]);
        spec.blend_width = 0.0;
        assert!(build_phi_c(&spec).is_err());
    }

    #[test]
    fn internal_model_chain() {
        let phi_c = build_phi_c(&linear_model(&[[-1.0, 1.0], [-1.0, 1.0]])).unwrap();
        let mut out = [0.0; 2];
        internal_model_field(&[0.0, 0.0], &phi_c, &mut out);
        assert_eq!(out, [0.0, 0.0]);
        internal_model_field(&[40.0, 7.0], &phi_c, &mut out);
        assert_eq!(out, [7.0, 0.0]);
    }

    #[test]
    fn internal_model_chain_cubic_phi() {
        // φ = ξ₁ + 1.5(ξ₂ − 3ξ₁²ξ₂), so ξ̇₂ = −φ(1, 2) = 5
        let spec = InternalModelSpec {
            d: 2,
            phi: Arc::new(|x: &[f64]| x[0] + 1.5 * (x[1] - 3.0 * x[0] * x[0] * x[1])),
            support: BoxRegion::from_intervals(&[[-3.0, 3.0], [-3.0, 3.0]]).unwrap(),
            blend_width: 0.5,
        };
        let phi_c = build_phi_c(&spec).unwrap();
        let mut out = [0.0; 2];
        internal_model_field(&[1.0, 2.0], &phi_c, &mut out);
        assert_eq!(out, [2.0, 5.0]);
    }

    #[test]
    fn regulator_example_values() {
        let model = linear_model(&[[-1.0, 1.0], [-1.0, 1.0]]);
        let reg = Regulator::new(&model, GainSpec::new(3.0, vec![4.0, 4.0], 8.0).unwrap()).unwrap();
        let (xi_dot, u) = regulator_rhs(&RegulatorState { xi: vec![0.0, 0.0] }, 1.0, &reg);
        assert_eq!(xi_dot, vec![-96.0, -288.0]);
        assert_eq!(u, -8.0);
        let (xi_dot, u) = regulator_rhs(&RegulatorState { xi: vec![0.3, 0.1] }, 0.0, &reg);
        let mut pure = [0.0; 2];
        internal_model_field(&[0.3, 0.1], reg.phi_c(), &mut pure);
        assert_eq!(xi_dot, pure.to_vec());
        assert_eq!(u, 0.3);
    }

    #[test]
    fn regulator_order_mismatch() {
        let model = linear_model(&[[-1.0, 1.0], [-1.0, 1.0]]);
        assert!(Regulator::new(&model, GainSpec::new(1.0, vec![1.0], 1.0).unwrap()).is_err());
    }
}
