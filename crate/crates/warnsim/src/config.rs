//! Engine configuration: one structured JSON document holding every model
//! parameter, with defaults pinned so a run without a config file is
//! identical to a run with the shipped one.

use crate::baseline::{RuleConfigError, RuleParams};
use crate::idm::IdmParams;
use crate::policy::{DriverModel, DriverParams, PolicyKind};
use crate::reward::{RewardConfigError, RewardWeights};
use crate::state::{AccelBounds, CarGeometry, RoadMap};
use crate::transition::{TransitionError, TransitionModel};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("transition table: {0}")]
    Transition(#[from] TransitionError),
    #[error("rewards: {0}")]
    Rewards(#[from] RewardConfigError),
    #[error("rule params: {0}")]
    Rule(#[from] RuleConfigError),
    #[error("{0}")]
    Invalid(String),
}

/// Estimator settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimatorParams {
    /// Threshold on the not-yet-reacting mass above which the point
    /// estimate is forced to blind.
    pub th_safety: f64,
    /// Initial belief over behavior kinds (timers start at zero).
    pub initial_belief: BTreeMap<PolicyKind, f64>,
}

impl Default for EstimatorParams {
    fn default() -> Self {
        EstimatorParams {
            th_safety: 0.2,
            initial_belief: [(PolicyKind::Blind, 0.5), (PolicyKind::Safe, 0.5)]
                .into_iter()
                .collect(),
        }
    }
}

/// Planner settings.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PlannerParams {
    /// Search horizon in steps.
    pub horizon: usize,
    /// Belief support below this mass is skipped (and renormalized away)
    /// in the expected-value mode.
    pub support_cutoff: f64,
    /// Commit to a take-over at the earliest step where every delayed
    /// reaction already fails, instead of the reward-optimal latest one.
    pub early_take_over: bool,
}

impl Default for PlannerParams {
    fn default() -> Self {
        PlannerParams {
            horizon: 10,
            support_cutoff: 1e-3,
            early_take_over: true,
        }
    }
}

/// Simulation loop settings and default scenario geometry.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SimParams {
    /// Step duration shared by the simulator and the planner (s).
    pub dt: f64,
    /// Episode length (s).
    pub episode_seconds: f64,
    /// Time at which the hazard maneuver starts (s).
    pub hazard_trigger: f64,
    /// Duration of the scripted cut-in lane change (s).
    pub cut_in_duration: f64,
    /// Frames of kinematic history kept per vehicle.
    pub history_len: usize,
    /// Bumper gap of the trailing background vehicle behind the ego (m);
    /// negative disables it.
    pub trailing_gap: f64,
    /// Bumper gap of the adjacent-lane background vehicle behind the ego
    /// (m); it paces the ego and keeps the escape lane busy. Negative
    /// disables it.
    pub blocker_gap: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            dt: 0.5,
            episode_seconds: 8.0,
            hazard_trigger: 1.0,
            cut_in_duration: 1.5,
            history_len: 10,
            trailing_gap: 30.0,
            blocker_gap: 2.0,
        }
    }
}

/// Complete engine configuration.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct EngineConfig {
    pub idm: IdmParams,
    pub driver: DriverParams,
    pub bounds: AccelBounds,
    pub transition: TransitionModel,
    pub rewards: RewardWeights,
    pub rule: RuleParams,
    pub estimator: EstimatorParams,
    pub planner: PlannerParams,
    pub map: RoadMap,
    pub geometry: CarGeometry,
    pub sim: SimParams,
}

impl EngineConfig {
    pub fn load(path: &Path) -> Result<EngineConfig, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        let cfg: EngineConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.rewards.validate()?;
        self.rule.validate()?;
        if self.sim.dt <= 0.0 {
            return Err(ConfigError::Invalid("dt must be positive".into()));
        }
        let steps = self.sim.episode_seconds / self.sim.dt;
        if (steps - steps.round()).abs() > 1e-9 {
            return Err(ConfigError::Invalid(
                "episode length must be a step multiple".into(),
            ));
        }
        for (name, dur) in [("t_r", self.driver.t_r), ("t_d", self.driver.t_d)] {
            let k = dur / self.sim.dt;
            if (k - k.round()).abs() > 1e-9 || k < 1.0 - 1e-9 {
                return Err(ConfigError::Invalid(format!(
                    "{name} = {dur} must be a positive step multiple"
                )));
            }
        }
        if (self.driver.dt - self.sim.dt).abs() > 1e-12 {
            return Err(ConfigError::Invalid(
                "driver.dt must match sim.dt".into(),
            ));
        }
        if self.driver.accel_sigma <= 0.0 {
            return Err(ConfigError::Invalid("accel_sigma must be positive".into()));
        }
        if !(self.estimator.th_safety > 0.0 && self.estimator.th_safety <= 1.0) {
            return Err(ConfigError::Invalid("th_safety must be in (0, 1]".into()));
        }
        let total: f64 = self.estimator.initial_belief.values().sum();
        if (total - 1.0).abs() > 1e-9 || self.estimator.initial_belief.values().any(|&p| p < 0.0) {
            return Err(ConfigError::Invalid("initial belief must be normalized".into()));
        }
        if self.planner.horizon == 0 {
            return Err(ConfigError::Invalid("horizon must be at least 1".into()));
        }
        if self.map.lanes == 0 {
            return Err(ConfigError::Invalid("map needs at least one lane".into()));
        }
        Ok(())
    }

    /// Bundle of everything a driver policy needs.
    pub fn driver_model(&self) -> DriverModel {
        DriverModel {
            idm: self.idm,
            driver: self.driver,
            bounds: self.bounds,
            geometry: self.geometry,
        }
    }

    pub fn steps_per_episode(&self) -> usize {
        (self.sim.episode_seconds / self.sim.dt).round() as usize
    }
}
