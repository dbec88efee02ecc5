//! TOML scenario configuration.
//!
//! Units: times in seconds, state quantities in the units of `w`, bits per
//! sample as an integer. Unknown keys are rejected. See
//! `configs/schema.md` for the full key list.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::closedloop::{
    check_dwell_compat, InitialConditions, Scenario, SecondLevel, DEFAULT_DIVERGENCE_CEILING,
};
use crate::codec::{
    compute_l0, default_margin, derive_levels, estimate_expansion_with, ChannelSpec, ExoSpec,
    ExpansionOptions, EXPANSION_SAFETY,
};
use crate::error::{Error, Result};
use crate::region::BoxRegion;
use crate::regulator::{support_from_attractor, GainSpec, InternalModelSpec, PlantSpec};
use crate::vdp::VanDerPol;

const SCENARIO1: &str = include_str!("../configs/scenario1.toml");
const SCENARIO2: &str = include_str!("../configs/scenario2.toml");

/// Names accepted by [`ScenarioConfig::builtin`].
pub const BUILTIN_NAMES: [&str; 2] = ["scenario1", "scenario2"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub exosystem: ExosystemConfig,
    pub channel: ChannelConfig,
    #[serde(default)]
    pub plant: PlantConfig,
    pub regulator: RegulatorConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub second_level: Option<SecondLevelConfig>,
    pub initial: InitialConfig,
    pub run: RunConfig,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "model", rename_all = "snake_case")]
pub enum ExosystemConfig {
    VanDerPol {
        eps: f64,
        a: f64,
        /// `W0`, one `[lo, hi]` pair per axis.
        initial_box: BoxRegion,
        /// Inflation from `W0` to `W`; defaults to `√r·L0/(2N) + 0.5`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        margin: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    /// `N_b`.
    pub bits: u32,
    /// `T`, seconds.
    pub period: f64,
    /// Overrides the `N` derived from `bits`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<u32>,
    /// Fixes `M(T)` instead of estimating it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expansion: Option<f64>,
    #[serde(default = "default_pairs")]
    pub expansion_pairs: usize,
    #[serde(default = "default_safety")]
    pub expansion_safety: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_pairs() -> usize {
    2000
}

fn default_safety() -> f64 {
    EXPANSION_SAFETY
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "model", rename_all = "snake_case")]
pub enum PlantConfig {
    /// `ẏ = u`.
    #[default]
    Integrator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegulatorConfig {
    pub kappa: f64,
    /// `c₀ … c_{d−1}`.
    pub hurwitz: Vec<f64>,
    /// Error gain `k`.
    pub gain: f64,
    #[serde(default = "default_blend")]
    pub blend_width: f64,
    /// Explicit support box `S`; computed from the attractor when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support: Option<BoxRegion>,
    #[serde(default = "default_inflation")]
    pub support_inflation: f64,
    #[serde(default = "default_support_horizon")]
    pub support_horizon: f64,
}

fn default_blend() -> f64 {
    0.5
}

fn default_inflation() -> f64 {
    0.25
}

fn default_support_horizon() -> f64 {
    100.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SecondLevelConfig {
    /// `T̄`, seconds.
    pub t_bar: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ell: Option<u32>,
    /// Dwell-time estimate `T*`; `ell` is derived from it when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_star: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub w: Vec<f64>,
    /// `w_e(0⁻) = w_d(0⁻)`; defaults to the center of `W0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_hat: Option<Vec<f64>>,
    #[serde(default)]
    pub z: Vec<f64>,
    pub y: f64,
    /// Defaults to the origin.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub t_end: f64,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_t_tail")]
    pub t_tail: f64,
    #[serde(default = "default_ceiling")]
    pub divergence_ceiling: f64,
}

fn default_step() -> f64 {
    1e-3
}

fn default_t_tail() -> f64 {
    25.0
}

fn default_ceiling() -> f64 {
    DEFAULT_DIVERGENCE_CEILING
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    /// Bound on `sup |e(t)|` for `t ≥ t_tail`.
    pub tracking_tail: f64,
    /// Bound on `sup |w(t) − w_d(t)|` for `t ≥ t_tail`.
    pub decoder_tail: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            tracking_tail: 0.05,
            decoder_tail: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub trajectory: String,
    pub frames: String,
    pub metrics: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            trajectory: "trajectory.csv".into(),
            frames: "frames.log".into(),
            metrics: "metrics.toml".into(),
        }
    }
}

/// A validated scenario together with the run settings from its config.
#[derive(Debug, Clone)]
pub struct BuiltScenario {
    pub scenario: Scenario,
    pub model: VanDerPol,
    pub t_tail: f64,
    pub thresholds: Thresholds,
    /// True when `M(T)` came from the Monte Carlo estimate.
    pub expansion_estimated: bool,
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Loads `builtin:<name>` or a bare built-in name, else a file path.
    pub fn load_named(spec: &str) -> Result<Self> {
        let name = spec.strip_prefix("builtin:").unwrap_or(spec);
        match Self::builtin(name) {
            Some(cfg) => Ok(cfg),
            None if spec.starts_with("builtin:") => {
                Err(Error::Config(format!("unknown built-in scenario `{name}`")))
            }
            None => Self::load(Path::new(spec)),
        }
    }

    pub fn builtin(name: &str) -> Option<Self> {
        let text = match name {
            "scenario1" => SCENARIO1,
            "scenario2" => SCENARIO2,
            _ => return None,
        };
        Some(Self::parse(text).expect("built-in config parses"))
    }

    pub fn builtin_text(name: &str) -> Option<&'static str> {
        match name {
            "scenario1" => Some(SCENARIO1),
            "scenario2" => Some(SCENARIO2),
            _ => None,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Resolves defaults, derives `N`, estimates `M(T)` and the `φ_c`
    /// support, and validates the resulting scenario.
    pub fn build(&self) -> Result<BuiltScenario> {
        let ExosystemConfig::VanDerPol {
            eps,
            a,
            initial_box,
            margin,
        } = &self.exosystem;
        let model = VanDerPol::new(*eps, *a);
        let r = 2;
        if initial_box.dim() != r {
            return Err(Error::Config(format!(
                "exosystem.initial_box needs {r} axes, got {}",
                initial_box.dim()
            )));
        }

        let ch = &self.channel;
        let levels = match ch.levels {
            Some(n) => n,
            None => derive_levels(ch.bits, r)?,
        };
        let l0 = compute_l0(initial_box);
        let margin = margin.unwrap_or_else(|| default_margin(r, l0, levels));
        let exo = ExoSpec::new(
            Arc::new(model),
            Arc::new(|w: &[f64]| w[1]),
            initial_box.clone(),
            margin,
        )?;

        let (expansion, expansion_estimated) = match ch.expansion {
            Some(m) => (m, false),
            None => {
                let opts = ExpansionOptions {
                    pairs: ch.expansion_pairs,
                    seed: ch.seed,
                    step: self.run.step,
                    safety: ch.expansion_safety,
                };
                (estimate_expansion_with(&exo, ch.period, &opts)?, true)
            }
        };
        let channel = ChannelSpec::new(r, ch.bits, levels, ch.period, l0, expansion)?;

        let rc = &self.regulator;
        let d = rc.hurwitz.len();
        if d != 2 {
            return Err(Error::Config(format!(
                "van_der_pol internal model has order 2, regulator.hurwitz has {d} entries"
            )));
        }
        let support = match &rc.support {
            Some(s) => s.clone(),
            None => support_from_attractor(
                &model,
                &initial_box.corners(),
                |w| model.tau(w).to_vec(),
                rc.support_horizon,
                self.run.step,
                rc.support_inflation,
            )?,
        };
        let internal_model = InternalModelSpec {
            d,
            phi: model.phi(),
            support,
            blend_width: rc.blend_width,
        };
        let gains = GainSpec::new(rc.kappa, rc.hurwitz.clone(), rc.gain)?;

        let second_level = match &self.second_level {
            None => None,
            Some(sl) => {
                let ell = match (sl.ell, sl.t_star) {
                    (Some(_), Some(_)) => {
                        return Err(Error::Config(
                            "second_level: give either `ell` or `t_star`, not both".into(),
                        ))
                    }
                    (Some(ell), None) => ell,
                    (None, Some(t_star)) => check_dwell_compat(t_star, sl.t_bar)?,
                    (None, None) => 1,
                };
                Some(SecondLevel { ell, t_bar: sl.t_bar })
            }
        };

        let init = &self.initial;
        let initial = InitialConditions {
            w: init.w.clone(),
            w_hat: init.w_hat.clone().unwrap_or_else(|| initial_box.center()),
            z: init.z.clone(),
            y: init.y,
            xi: init.xi.clone().unwrap_or_else(|| vec![0.0; d]),
        };

        let scenario = Scenario {
            exo,
            channel,
            plant: match self.plant {
                PlantConfig::Integrator => PlantSpec::integrator(),
            },
            internal_model,
            gains,
            second_level,
            t_end: self.run.t_end,
            step: self.run.step,
            initial,
            divergence_ceiling: self.run.divergence_ceiling,
        };
        scenario.validate()?;
        Ok(BuiltScenario {
            scenario,
            model,
            t_tail: self.run.t_tail,
            thresholds: self.thresholds.clone(),
            expansion_estimated,
        })
    }
}
