//! The driver behavior set: a hazard-aware safe policy, a blind policy that
//! ignores surrounding agents, a fixed-deceleration brake policy with a
//! recovery timer, and delayed-switch wrappers from blind to safe or brake.
//!
//! Each policy exposes an action distribution (Gaussian in acceleration)
//! for estimator likelihoods and a most-probable action for planning.

use crate::idm::{idm_accel, IdmParams};
use crate::rng::RngStream;
use crate::state::{
    gap_to_lead, lead_in_lane, rear_in_lane, AccelBounds, CarGeometry, DriverAction, LaneCmd,
    ScenarioState,
};
use serde::{Deserialize, Serialize};

/// Behavior kind. The declaration order doubles as the documented tie-break
/// order for point estimates: earlier kinds win argmax ties.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Safe,
    Brake,
    DelayBlindToBrake,
    DelayBlindToSafe,
    Blind,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::Safe,
        PolicyKind::Brake,
        PolicyKind::DelayBlindToBrake,
        PolicyKind::DelayBlindToSafe,
        PolicyKind::Blind,
    ];
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            PolicyKind::Safe => "safe",
            PolicyKind::Brake => "brake",
            PolicyKind::DelayBlindToBrake => "delay_blind_to_brake",
            PolicyKind::DelayBlindToSafe => "delay_blind_to_safe",
            PolicyKind::Blind => "blind",
        };
        write!(f, "{s}")
    }
}

/// A driver policy instance: a kind plus the number of steps it has been
/// active (meaningful for the brake and delay kinds). Brake and delay
/// durations are features of the individual and live in [`DriverParams`].
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct PolicyState {
    pub kind: PolicyKind,
    /// Steps elapsed since this kind became active.
    pub timer: u32,
}

impl PolicyState {
    pub fn safe() -> Self {
        PolicyState {
            kind: PolicyKind::Safe,
            timer: 0,
        }
    }

    pub fn blind() -> Self {
        PolicyState {
            kind: PolicyKind::Blind,
            timer: 0,
        }
    }

    pub fn brake(timer: u32) -> Self {
        PolicyState {
            kind: PolicyKind::Brake,
            timer,
        }
    }

    pub fn delay_to_safe(timer: u32) -> Self {
        PolicyState {
            kind: PolicyKind::DelayBlindToSafe,
            timer,
        }
    }

    pub fn delay_to_brake(timer: u32) -> Self {
        PolicyState {
            kind: PolicyKind::DelayBlindToBrake,
            timer,
        }
    }

    pub fn is_blind(&self) -> bool {
        self.kind == PolicyKind::Blind
    }

    /// True while the current actions are still the blind policy's: blind
    /// itself plus delay wrappers that have not reached their switch time.
    pub fn acts_blind(&self, params: &DriverParams) -> bool {
        match self.kind {
            PolicyKind::Blind => true,
            PolicyKind::DelayBlindToSafe | PolicyKind::DelayBlindToBrake => {
                self.timer < params.t_d_steps()
            }
            _ => false,
        }
    }
}

impl std::fmt::Display for PolicyState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.kind {
            PolicyKind::Safe | PolicyKind::Blind => write!(f, "{}", self.kind),
            _ => write!(f, "{}[{}]", self.kind, self.timer),
        }
    }
}

/// Per-individual behavior parameters shared by the simulator, estimator
/// and planner.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DriverParams {
    /// Fixed deceleration applied while the brake policy is active (m/s^2).
    pub a_decelerate: f64,
    /// Brake duration before recovering to safe (s).
    pub t_r: f64,
    /// Reaction delay before a delayed switch takes effect (s).
    pub t_d: f64,
    /// Step duration used to convert durations to steps (s).
    pub dt: f64,
    /// Standard deviation of the acceleration around the policy mean (m/s^2).
    pub accel_sigma: f64,
    /// Likelihood factor applied when the observed lane command does not
    /// match the policy's.
    pub lane_mismatch_prob: f64,
}

impl Default for DriverParams {
    fn default() -> Self {
        DriverParams {
            a_decelerate: -3.0,
            t_r: 1.0,
            t_d: 1.5,
            dt: 0.5,
            accel_sigma: 0.4,
            lane_mismatch_prob: 0.05,
        }
    }
}

impl DriverParams {
    pub fn t_r_steps(&self) -> u32 {
        duration_steps(self.t_r, self.dt)
    }

    pub fn t_d_steps(&self) -> u32 {
        duration_steps(self.t_d, self.dt)
    }
}

/// Convert a duration to whole steps; durations are validated to be step
/// multiples at config load.
pub fn duration_steps(duration: f64, dt: f64) -> u32 {
    let steps = duration / dt;
    let rounded = steps.round();
    debug_assert!((steps - rounded).abs() < 1e-9, "duration must be a step multiple");
    rounded as u32
}

/// Everything needed to evaluate a policy on a scenario state.
#[derive(Debug, Clone, Copy)]
pub struct DriverModel {
    pub idm: IdmParams,
    pub driver: DriverParams,
    pub bounds: AccelBounds,
    pub geometry: CarGeometry,
}

/// Gaussian action distribution around a mean action.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionDistribution {
    pub mean: DriverAction,
    pub accel_sigma: f64,
}

impl ActionDistribution {
    /// Density of an observed action: Gaussian in the acceleration residual,
    /// scaled by a small fixed probability on a lane-command mismatch.
    pub fn density(&self, a: &DriverAction, lane_mismatch_prob: f64) -> f64 {
        let sigma = self.accel_sigma;
        let r = (a.accel - self.mean.accel) / sigma;
        let gauss = (-0.5 * r * r).exp() / ((2.0 * std::f64::consts::PI).sqrt() * sigma);
        if a.lane_cmd == self.mean.lane_cmd {
            gauss
        } else {
            gauss * lane_mismatch_prob
        }
    }

    /// Sample an action: Gaussian acceleration noise clamped to the global
    /// bounds; the lane command follows the mean.
    pub fn sample(&self, rng: &mut RngStream, bounds: &AccelBounds) -> DriverAction {
        let accel = bounds.clamp(self.mean.accel + self.accel_sigma * rng.normal());
        DriverAction {
            accel,
            lane_cmd: self.mean.lane_cmd,
        }
    }
}

/// Fold expired timers into the policy the driver is now actually following:
/// a delay past its switch time becomes its target and a brake past its
/// recovery time becomes safe.
pub fn canonicalize(pi: PolicyState, params: &DriverParams) -> PolicyState {
    let t_d = params.t_d_steps();
    let t_r = params.t_r_steps();
    let pi = match pi.kind {
        PolicyKind::DelayBlindToSafe if pi.timer >= t_d => PolicyState::safe(),
        PolicyKind::DelayBlindToBrake if pi.timer >= t_d => PolicyState::brake(pi.timer - t_d),
        _ => pi,
    };
    match pi.kind {
        PolicyKind::Brake if pi.timer >= t_r => PolicyState::safe(),
        _ => pi,
    }
}

/// Advance a policy by one step: timers increment and internal transitions
/// (delay reaching its target, brake recovering to safe) take effect. This
/// is the per-step state-transition update shared by the simulator, the
/// belief filter and the planner.
pub fn advance_one(pi: PolicyState, params: &DriverParams) -> PolicyState {
    canonicalize(
        PolicyState {
            kind: pi.kind,
            timer: match pi.kind {
                PolicyKind::Safe | PolicyKind::Blind => 0,
                _ => pi.timer + 1,
            },
        },
        params,
    )
}

/// Safe policy action: IDM against the actual leader, plus a lane change
/// when the current lane forces braking beyond comfort and an adjacent lane
/// offers a larger gap with enough rear clearance.
fn safe_action(state: &ScenarioState, m: &DriverModel) -> DriverAction {
    let ego = state.ego_now();
    let cur_lead = gap_to_lead(state, &m.geometry);
    let cur_gap = cur_lead.map_or(f64::INFINITY, |l| l.gap);
    let cur_accel = idm_accel(ego.v, cur_lead.map(|l| (l.gap, l.v)), &m.idm, &m.bounds);

    let mut best = DriverAction::keep(cur_accel);
    if cur_accel < -m.idm.b_comfort {
        let mut best_gap = cur_gap;
        let candidates = [
            (LaneCmd::ShiftLeft, ego.lane.checked_add(1)),
            (LaneCmd::ShiftRight, ego.lane.checked_sub(1)),
        ];
        for (cmd, lane) in candidates {
            let Some(lane) = lane.filter(|&l| l < state.map.lanes) else {
                continue;
            };
            let lead = lead_in_lane(state, ego, lane, &m.geometry, None);
            let gap = lead.map_or(f64::INFINITY, |l| l.gap);
            if gap <= best_gap {
                continue;
            }
            // rear clearance: the follower in the target lane must be at
            // least a jam gap plus its own headway behind
            if let Some(rear) = rear_in_lane(state, ego, lane, &m.geometry) {
                if rear.gap < m.idm.s_min + rear.v * m.idm.t_headway {
                    continue;
                }
            }
            best_gap = gap;
            best = DriverAction {
                accel: idm_accel(ego.v, lead.map(|l| (l.gap, l.v)), &m.idm, &m.bounds),
                lane_cmd: cmd,
            };
        }
    }
    best
}

/// Action distribution of a policy on a state.
pub fn policy_action(pi: PolicyState, state: &ScenarioState, m: &DriverModel) -> ActionDistribution {
    let pi = canonicalize(pi, &m.driver);
    let mean = match pi.kind {
        PolicyKind::Safe => safe_action(state, m),
        // blind is safe with the agents masked out, exactly
        PolicyKind::Blind => safe_action(&state.without_agents(), m),
        PolicyKind::Brake => DriverAction::keep(m.bounds.clamp(m.driver.a_decelerate)),
        PolicyKind::DelayBlindToSafe | PolicyKind::DelayBlindToBrake => {
            // still inside the delay (canonicalize folded the expired case)
            return policy_action(PolicyState::blind(), state, m);
        }
    };
    ActionDistribution {
        mean,
        accel_sigma: m.driver.accel_sigma,
    }
}

/// Likelihood of an observed action under a policy; the Bayes-correction
/// factor of the belief filter.
pub fn action_likelihood(
    pi: PolicyState,
    a: &DriverAction,
    state: &ScenarioState,
    m: &DriverModel,
) -> f64 {
    policy_action(pi, state, m).density(a, m.driver.lane_mismatch_prob)
}
