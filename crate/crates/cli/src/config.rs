//! Run configuration: one JSON document with a block per command.

use std::f64::consts::PI;

use anyhow::{bail, Context, Result};
use rydgate::design::{Axis, PhaseMethod};
use rydgate::noise::Chi;
use rydgate::propagator::DEFAULT_TOL;
use rydgate::{PulseParams, SystemParams};
use serde::{Deserialize, Serialize};

pub const PRESETS: [(&str, &str); 4] = [
    ("fig2", include_str!("../presets/fig2.json")),
    ("fig3", include_str!("../presets/fig3.json")),
    ("fig4", include_str!("../presets/fig4.json")),
    ("fig5", include_str!("../presets/fig5.json")),
];

pub fn preset(name: &str) -> Result<&'static str> {
    match PRESETS.iter().find(|(n, _)| *n == name) {
        Some((_, text)) => Ok(text),
        None => {
            let known: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
            bail!("unknown preset `{name}` (known: {})", known.join(", "))
        }
    }
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

fn default_window() -> f64 {
    4.5
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dynamics: Option<DynamicsConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimize: Option<OptimizeConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub check: Option<CheckConfig>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).context("invalid configuration")
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsConfig {
    pub system: SystemParams,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

/// `points` values from `min` to `max` inclusive.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl AxisSpec {
    pub fn axis(&self, name: &str) -> Result<Axis> {
        Axis::linspace(name, self.min, self.max, self.points).with_context(|| format!("axis `{name}`"))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseMapsConfig {
    pub v: f64,
    pub omega_e: AxisSpec,
    pub omega0: AxisSpec,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateMetricsConfig {
    pub v: f64,
    pub omega_e: AxisSpec,
    /// `Omega_0 / V`
    pub ratio: AxisSpec,
}

/// Phase targets in units of pi. `beta` defaults to `2 alpha + 1`, the
/// CZ condition `2 alpha - beta = -pi`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Targets {
    pub alpha_over_pi: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_over_pi: Option<f64>,
}

impl Targets {
    pub fn alpha(&self) -> f64 {
        self.alpha_over_pi * PI
    }

    pub fn beta(&self) -> f64 {
        self.beta_over_pi.unwrap_or(2.0 * self.alpha_over_pi + 1.0) * PI
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandscapeConfig {
    /// File-name prefix.
    pub name: String,
    pub omega_e: AxisSpec,
    pub v: AxisSpec,
    pub targets: Targets,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_window")]
    pub window_halfwidth: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_maps: Option<PhaseMapsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate_metrics: Option<GateMetricsConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub landscapes: Vec<LandscapeConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
}

fn default_ladder() -> usize {
    48
}

fn default_method() -> PhaseMethod {
    PhaseMethod::Exact
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_ladder")]
    pub ladder_nodes: usize,
    #[serde(default = "default_method")]
    pub method: PhaseMethod,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { ladder_nodes: default_ladder(), method: default_method() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeConfig {
    pub omega_e: f64,
    pub targets: Targets,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega0_bracket: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_bracket: Option<[f64; 2]>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_window")]
    pub window_halfwidth: f64,
    #[serde(default)]
    pub solver: SolverConfig,
}

/// Either explicit parameters or a design solved on the fly.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum DesignSpec {
    Explicit { system: SystemParams },
    Solve(OptimizeConfig),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelativeErrorConfig {
    pub eps_max: f64,
    pub points: usize,
    #[serde(default = "all_chi")]
    pub parameters: Vec<Chi>,
}

fn all_chi() -> Vec<Chi> {
    Chi::ALL.to_vec()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetuningConfig {
    /// Largest `|Delta| / V`.
    pub max_ratio: f64,
    pub points: usize,
}

fn default_bins() -> usize {
    40
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloConfig {
    /// File-name prefix.
    pub name: String,
    #[serde(default)]
    pub sigma_omega0: f64,
    #[serde(default)]
    pub sigma_v: f64,
    #[serde(default)]
    pub sigma_omega_e: f64,
    pub samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_bins")]
    pub bins: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub design: DesignSpec,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relative_error: Option<RelativeErrorConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detuning: Option<DetuningConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub monte_carlo: Vec<MonteCarloConfig>,
}

fn default_cubic() -> usize {
    1000
}

fn default_subspace() -> usize {
    4
}

fn default_seed() -> u64 {
    1
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_cubic")]
    pub cubic_samples: usize,
    #[serde(default = "default_subspace")]
    pub subspace_samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inject_branch: Option<usize>,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            tol: default_tol(),
            seed: default_seed(),
            cubic_samples: default_cubic(),
            subspace_samples: default_subspace(),
            inject_branch: None,
        }
    }
}

/// Gaussian system helper for presets and tests.
pub fn system(omega0: f64, omega_e: f64, v: f64) -> SystemParams {
    SystemParams::new(PulseParams::new(omega0, omega_e), v)
}
