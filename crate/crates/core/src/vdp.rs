//! Van der Pol master oscillator and its internal-model data.
//!
//! Exosystem: `ẇ₁ = w₂ + ε(w₁ − a·w₁³)`, `ẇ₂ = −w₁`, reference `y_r = w₂`.
//! For the integrator plant `ẏ = u` the steady-state input is
//! `u_ss = ẇ₂ = −w₁`, which satisfies `ü + φ(u, u̇) = 0` with
//! `φ(ξ) = −f(ξ)`, `f(ξ₁, ξ₂) = −ξ₁ + ε(ξ₂ − 3a·ξ₁²·ξ₂)`.

use std::sync::Arc;

use crate::regulator::ScalarMap;
use crate::sim::VectorField;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VanDerPol {
    pub eps: f64,
    pub a: f64,
}

impl VanDerPol {
    pub fn new(eps: f64, a: f64) -> Self {
        Self { eps, a }
    }

    /// Steady-state input `u_ss = L_s y_r(w) = −w₁` for the integrator plant.
    pub fn steady_state_input(&self, w: &[f64]) -> f64 {
        -w[0]
    }

    /// `f(ξ₁, ξ₂)`, the second derivative of `u_ss` expressed in `(u, u̇)`.
    pub fn model_rhs(&self, xi1: f64, xi2: f64) -> f64 {
        -xi1 + self.eps * (xi2 - 3.0 * self.a * xi1 * xi1 * xi2)
    }

    /// `φ = −f`.
    pub fn phi(&self) -> ScalarMap {
        let me = *self;
        Arc::new(move |xi: &[f64]| -me.model_rhs(xi[0], xi[1]))
    }

    pub fn tau(&self, w: &[f64]) -> [f64; 2] {
        tau_vdp(w, self.eps, self.a)
    }
}

impl VectorField for VanDerPol {
    fn dim(&self) -> usize {
        2
    }

    fn eval(&self, w: &[f64], dw: &mut [f64]) {
        let w1 = w[0];
        dw[0] = w[1] + self.eps * (w1 - self.a * w1 * w1 * w1);
        dw[1] = -w1;
    }
}

/// Immersion map `τ(w) = (u_ss, u̇_ss) = (−w₁, −w₂ − ε(w₁ − a·w₁³))`.
pub fn tau_vdp(w: &[f64], eps: f64, a: f64) -> [f64; 2] {
    let w1 = w[0];
    [-w1, -w[1] - eps * (w1 - a * w1 * w1 * w1)]
}
