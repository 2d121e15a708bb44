//! Trajectory reward and warning costs. A collision maps to a negative
//! infinity sentinel that is absorbing under addition and ordered below all
//! finite rewards; no positive infinity is ever produced, so sums stay
//! NaN-free.

use crate::state::{
    step_collides, CarGeometry, DriverAction, ScenarioState, Warning,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Absorbing collision sentinel.
pub const COLLISION_REWARD: f64 = f64::NEG_INFINITY;

#[derive(Debug, Error)]
pub enum RewardConfigError {
    #[error("missing warning cost for {0}")]
    MissingCost(Warning),
    #[error("no-warning cost must be 0, got {0}")]
    NonZeroNoWarning(f64),
    #[error("warning costs must not increase with severity: {0} vs {1}")]
    NonMonotoneCosts(Warning, Warning),
    #[error("gamma must be in (0, 1], got {0}")]
    BadGamma(f64),
    #[error("weights must be non-negative")]
    NegativeWeight,
}

/// Reward weights and the per-warning cost table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RewardWeights {
    /// Weight on the squared deviation from the desired speed.
    pub w_v: f64,
    /// Weight on the squared acceleration.
    pub w_acc: f64,
    /// Desired longitudinal speed (m/s).
    pub v_desire: f64,
    /// Discount factor per step.
    pub gamma: f64,
    pub warning_costs: BTreeMap<Warning, f64>,
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights {
            w_v: 0.5,
            w_acc: 0.1,
            v_desire: 11.0,
            gamma: 0.95,
            warning_costs: [
                (Warning::NoWarning, 0.0),
                (Warning::Text, -1.0),
                (Warning::Voice, -20.0),
                (Warning::Alarm, -50.0),
                (Warning::TakeOver, -1e8),
            ]
            .into_iter()
            .collect(),
        }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<(), RewardConfigError> {
        if self.w_v < 0.0 || self.w_acc < 0.0 {
            return Err(RewardConfigError::NegativeWeight);
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(RewardConfigError::BadGamma(self.gamma));
        }
        let mut prev: Option<(Warning, f64)> = None;
        for w in Warning::ALL {
            let c = *self
                .warning_costs
                .get(&w)
                .ok_or(RewardConfigError::MissingCost(w))?;
            if w == Warning::NoWarning && c != 0.0 {
                return Err(RewardConfigError::NonZeroNoWarning(c));
            }
            if let Some((pw, pc)) = prev {
                if c > pc {
                    return Err(RewardConfigError::NonMonotoneCosts(pw, w));
                }
            }
            prev = Some((w, c));
        }
        Ok(())
    }
}

/// Instantaneous trajectory reward: quadratic penalties on speed deviation
/// and acceleration, and the collision indicator on the given state.
pub fn traj_reward(
    state: &ScenarioState,
    a: &DriverAction,
    weights: &RewardWeights,
    geom: &CarGeometry,
) -> f64 {
    if crate::state::ego_collides(state, geom) {
        return COLLISION_REWARD;
    }
    let v = state.ego_now().v;
    -weights.w_v * (v - weights.v_desire).powi(2) - weights.w_acc * a.accel * a.accel
}

/// Cost of issuing a warning.
pub fn warning_cost(w: Warning, weights: &RewardWeights) -> f64 {
    weights.warning_costs[&w]
}

/// Per-step trajectory reward over a transition, evaluated at the reached
/// state with the acceleration actually realized (they differ from the
/// command only at the zero-speed clamp). Adds the swept collision check so
/// fast closings cannot tunnel through a vehicle between frames.
pub fn step_outcome(
    prev: &ScenarioState,
    next: &ScenarioState,
    weights: &RewardWeights,
    geom: &CarGeometry,
) -> (f64, bool) {
    let dt = next.dt();
    let realized = (next.ego_now().v - prev.ego_now().v) / dt;
    let action = DriverAction {
        accel: realized,
        lane_cmd: crate::state::LaneCmd::Keep,
    };
    if step_collides(prev, next, geom) {
        return (COLLISION_REWARD, true);
    }
    (traj_reward(next, &action, weights, geom), false)
}

/// Add a discounted future value to an immediate reward, absorbing the
/// collision sentinel without producing NaN.
pub fn compose(immediate: f64, gamma: f64, future: f64) -> f64 {
    if immediate == COLLISION_REWARD || future == COLLISION_REWARD {
        COLLISION_REWARD
    } else {
        immediate + gamma * future
    }
}
