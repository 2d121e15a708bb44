//! Closed-loop episode engine: the two scripted hazard scenarios, the
//! surrounding-agent model, and the per-step loop wiring warning selection,
//! behavior switching, driver action sampling, dynamics and the belief
//! filter together.

use crate::baseline::{rule_based_warning, time_to_collision, ttc_warning};
use crate::belief::{advance, correct, predict, Belief, BeliefError};
use crate::config::EngineConfig;
use crate::idm::idm_accel;
use crate::planner::{select_warning_mdp, select_warning_pomdp, WorldModel};
use crate::policy::{advance_one, policy_action, PolicyKind, PolicyState};
use crate::reward::{compose, step_outcome, warning_cost};
use crate::rng::RngStream;
use crate::state::{
    ego_dynamics, gap_to_lead, integrate_clamped, lead_in_lane, Agent, AgentRole, DriverAction,
    ScenarioState, StateHistory, VehicleState, Warning,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("unknown scenario kind {0}")]
    UnknownScenario(String),
    #[error("unknown method {0}")]
    UnknownMethod(String),
    #[error("d_gap must be positive, got {0}")]
    BadGap(f64),
    #[error("belief: {0}")]
    Belief(#[from] BeliefError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// The two hazard scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    FrontHardBrake,
    LaneChange,
}

impl std::fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ScenarioKind::FrontHardBrake => "front_hard_brake",
            ScenarioKind::LaneChange => "lane_change",
        };
        write!(f, "{s}")
    }
}

impl std::str::FromStr for ScenarioKind {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "front_hard_brake" | "front-hard-brake" => Ok(ScenarioKind::FrontHardBrake),
            "lane_change" | "lane-change" => Ok(ScenarioKind::LaneChange),
            other => Err(SimError::UnknownScenario(other.to_string())),
        }
    }
}

/// Warning-selection method driving an episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    EstStateMdp,
    ApproxPomdp,
    TtcBaseline,
    RuleBaseline,
    NoWarningControl,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::EstStateMdp,
        Method::ApproxPomdp,
        Method::TtcBaseline,
        Method::RuleBaseline,
        Method::NoWarningControl,
    ];
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Method::EstStateMdp => "est_state_mdp",
            Method::ApproxPomdp => "approx_pomdp",
            Method::TtcBaseline => "ttc_baseline",
            Method::RuleBaseline => "rule_baseline",
            Method::NoWarningControl => "no_warning_control",
        };
        write!(f, "{s}")
    }
}

impl std::str::FromStr for Method {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "est_state_mdp" | "mdp" => Ok(Method::EstStateMdp),
            "approx_pomdp" | "pomdp" => Ok(Method::ApproxPomdp),
            "ttc_baseline" | "ttc" => Ok(Method::TtcBaseline),
            "rule_baseline" | "rule" => Ok(Method::RuleBaseline),
            "no_warning_control" | "none" => Ok(Method::NoWarningControl),
            other => Err(SimError::UnknownScenario(other.to_string())),
        }
    }
}

/// A fully instantiated scenario: initial placements plus the hazard script.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    /// Initial bumper gap between ego and the hazard vehicle (m).
    pub d_gap0: f64,
    pub ego_v0: f64,
    /// Hazard cruise speed before its maneuver (m/s).
    pub hazard_v0: f64,
    /// Hard-brake target speed (front-hard-brake only, m/s).
    pub hazard_target_speed: f64,
    /// Maneuver start time (s).
    pub trigger: f64,
    /// Lane-change duration (lane-change only, s).
    pub cut_in_duration: f64,
    /// (lane, initial bumper gap relative to ego, initial speed, desired speed)
    pub background: Vec<(u32, f64, f64, f64)>,
    pub episode_seconds: f64,
    pub dt: f64,
}

/// Standard scenario instantiation used throughout the experiments: ego at
/// 11 m/s; the hazard either a 12 m/s leader braking hard to 8 m/s or an
/// adjacent-lane 8 m/s vehicle cutting in; a trailing vehicle behind the
/// ego and an adjacent-lane vehicle pacing it so the escape lane is busy.
pub fn build_scenario(
    kind: ScenarioKind,
    d_gap0: f64,
    cfg: &EngineConfig,
) -> Result<ScenarioConfig, SimError> {
    if d_gap0 <= 0.0 {
        return Err(SimError::BadGap(d_gap0));
    }
    let mut background = Vec::new();
    if cfg.sim.trailing_gap > 0.0 {
        background.push((0, -cfg.sim.trailing_gap, 11.0, 11.0));
    }
    if cfg.sim.blocker_gap > 0.0 {
        let v0 = match kind {
            ScenarioKind::FrontHardBrake => 11.0,
            // matches the slower adjacent-lane flow ahead of it
            ScenarioKind::LaneChange => 8.0,
        };
        background.push((1, -cfg.sim.blocker_gap, v0, 11.0));
    }
    Ok(ScenarioConfig {
        kind,
        d_gap0,
        ego_v0: 11.0,
        hazard_v0: match kind {
            ScenarioKind::FrontHardBrake => 12.0,
            ScenarioKind::LaneChange => 8.0,
        },
        hazard_target_speed: 8.0,
        trigger: cfg.sim.hazard_trigger,
        cut_in_duration: cfg.sim.cut_in_duration,
        background,
        episode_seconds: cfg.sim.episode_seconds,
        dt: cfg.sim.dt,
    })
}

/// Initial scenario state: ego in lane 0 at the origin, hazard ahead (same
/// lane or adjacent), background vehicles at their offsets.
pub fn initial_state(script: &ScenarioConfig, cfg: &EngineConfig) -> ScenarioState {
    let len = cfg.geometry.length;
    let hist = cfg.sim.history_len;
    let dt = script.dt;
    let ego = VehicleState::new(0.0, 0, script.ego_v0);

    let mut agents = Vec::new();
    let hazard_lane = match script.kind {
        ScenarioKind::FrontHardBrake => 0,
        ScenarioKind::LaneChange => 1,
    };
    let hazard_role = match script.kind {
        ScenarioKind::FrontHardBrake => AgentRole::HazardLead {
            trigger: script.trigger,
            target_speed: script.hazard_target_speed,
        },
        ScenarioKind::LaneChange => AgentRole::HazardCutIn {
            trigger: script.trigger,
            duration: script.cut_in_duration,
            target_lane: 0,
            cruise: script.hazard_v0,
        },
    };
    agents.push(Agent {
        id: 0,
        role: hazard_role,
        history: StateHistory::new(
            VehicleState::new(script.d_gap0 + len, hazard_lane, script.hazard_v0),
            hist,
            dt,
        ),
    });
    for (i, &(lane, bumper_gap, v0, v_desired)) in script.background.iter().enumerate() {
        let s = if bumper_gap >= 0.0 {
            bumper_gap + len
        } else {
            bumper_gap - len
        };
        agents.push(Agent {
            id: i as u32 + 1,
            role: AgentRole::Background { v_desired },
            history: StateHistory::new(VehicleState::new(s, lane, v0), hist, dt),
        });
    }

    ScenarioState {
        ego: StateHistory::new(ego, hist, dt),
        agents,
        map: cfg.map,
        t: 0.0,
    }
}

/// Surrounding-agent model: scripted hazard maneuvers plus IDM
/// car-following for background vehicles. Deterministic given the script.
pub fn surrounding_step(state: &ScenarioState, cfg: &EngineConfig) -> Vec<VehicleState> {
    let dt = state.dt();
    let brake = cfg.bounds.acc_min;
    state
        .agents
        .iter()
        .map(|agent| {
            let cur = *agent.current();
            match agent.role {
                AgentRole::HazardLead { trigger, target_speed } => {
                    let accel = if state.t >= trigger - 1e-9 && cur.v > target_speed {
                        // hard-brake, not overshooting the target speed
                        brake.max((target_speed - cur.v) / dt)
                    } else {
                        0.0
                    };
                    let (s, v) = integrate_clamped(cur.s, cur.v, accel, dt);
                    VehicleState {
                        s,
                        v,
                        a: accel,
                        ..cur
                    }
                }
                AgentRole::HazardCutIn { trigger, duration, target_lane, cruise } => {
                    let t_next = state.t + dt;
                    if t_next <= trigger + 1e-9 {
                        // cruising in its own lane
                        let (s, v) = integrate_clamped(cur.s, cur.v, 0.0, dt);
                        VehicleState { s, v, a: 0.0, ..cur }
                    } else if t_next < trigger + duration - 1e-9 {
                        // constant-rate lateral motion toward the target lane
                        let frac = ((t_next - trigger) / duration).clamp(0.0, 1.0);
                        let origin_lane = cur.lane;
                        let shift = state.map.lane_center(target_lane)
                            - state.map.lane_center(origin_lane);
                        let (s, v) = integrate_clamped(cur.s, cur.v, 0.0, dt);
                        VehicleState {
                            s,
                            v,
                            a: 0.0,
                            lane: origin_lane,
                            lat_offset: shift * frac,
                        }
                    } else {
                        // lane change complete; plain car-following at its
                        // own cruise speed in the new lane
                        let settled = VehicleState {
                            lane: target_lane,
                            lat_offset: 0.0,
                            ..cur
                        };
                        let lead = lead_in_lane(state, &settled, target_lane, &cfg.geometry, Some(agent.id));
                        let accel = idm_accel(
                            settled.v,
                            lead.map(|l| (l.gap, l.v)),
                            &cfg.idm.with_v_desired(cruise),
                            &cfg.bounds,
                        );
                        let (s, v) = integrate_clamped(settled.s, settled.v, accel, dt);
                        VehicleState {
                            s,
                            v,
                            a: accel,
                            lane: target_lane,
                            lat_offset: 0.0,
                        }
                    }
                }
                AgentRole::Background { v_desired } => {
                    let lead = lead_in_lane(state, &cur, cur.lane, &cfg.geometry, Some(agent.id));
                    let accel = idm_accel(
                        cur.v,
                        lead.map(|l| (l.gap, l.v)),
                        &cfg.idm.with_v_desired(v_desired),
                        &cfg.bounds,
                    );
                    let (s, v) = integrate_clamped(cur.s, cur.v, accel, dt);
                    VehicleState { s, v, a: accel, ..cur }
                }
            }
        })
        .collect()
}

/// One transition of the whole scenario: ego by its dynamics, agents by
/// their scripts, histories pushed, clock advanced.
pub fn advance_scenario(
    state: &ScenarioState,
    ego_action: &DriverAction,
    cfg: &EngineConfig,
) -> ScenarioState {
    let dt = state.dt();
    let ego_next = ego_dynamics(state.ego_now(), ego_action, dt);
    let agent_frames = surrounding_step(state, cfg);
    let mut next = state.clone();
    next.ego.push(ego_next);
    for (agent, frame) in next.agents.iter_mut().zip(agent_frames) {
        agent.history.push(frame);
    }
    next.t = state.t + dt;
    next
}

/// Per-step record of an episode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    /// Time at which the warning was issued (s).
    pub t: f64,
    /// State the warning and action were computed on.
    pub state: ScenarioState,
    pub warning: Warning,
    /// Acting (post-warning) true policy.
    pub true_policy: PolicyState,
    pub action: DriverAction,
    /// Belief the selector consumed (before this step's update).
    pub belief: Belief,
    /// Trajectory reward collected over this step.
    pub reward: f64,
}

/// Outcome of one closed-loop episode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeResult {
    pub scenario: ScenarioKind,
    pub d_gap0: f64,
    pub method: Method,
    pub seed: u64,
    pub steps: Vec<StepRecord>,
    /// Sum of per-step trajectory rewards; the collision sentinel when the
    /// episode ended in a collision. Warning costs are not included.
    pub total_traj_reward: f64,
    /// Sum of warning costs actually issued.
    pub total_warning_cost: f64,
    pub warning_counts: BTreeMap<Warning, u32>,
    pub collision: bool,
    /// Steps where the observation was degenerate and the predicted belief
    /// was kept.
    pub degenerate_observations: u32,
}

impl EpisodeResult {
    pub fn count(&self, w: Warning) -> u32 {
        self.warning_counts.get(&w).copied().unwrap_or(0)
    }
}

fn initial_belief(cfg: &EngineConfig) -> Belief {
    Belief::from_weights(
        cfg.estimator
            .initial_belief
            .iter()
            .map(|(&kind, &p)| (PolicyState { kind, timer: 0 }, p)),
    )
    .expect("validated initial belief")
}

/// Run one seeded closed-loop episode. Per step: the method selects a
/// warning; the true policy switches stochastically under it; the driver
/// action is sampled from the acting policy; ego and agents advance; the
/// belief runs predict / correct / advance; rewards accumulate. A collision
/// terminates the episode.
pub fn episode(
    script: &ScenarioConfig,
    method: Method,
    seed: u64,
    cfg: &EngineConfig,
) -> Result<EpisodeResult, SimError> {
    let model = cfg.driver_model();
    let world = WorldModel::new(cfg);
    let mut transitions_rng = RngStream::new(seed, 0);
    let mut action_rng = RngStream::new(seed, 1);

    let mut state = initial_state(script, cfg);
    let mut true_policy = PolicyState::blind();
    let mut belief = initial_belief(cfg);

    let n_steps = (script.episode_seconds / script.dt).round() as usize;
    let mut steps = Vec::with_capacity(n_steps);
    let mut total = 0.0;
    let mut total_warning_cost = 0.0;
    let mut counts: BTreeMap<Warning, u32> = BTreeMap::new();
    let mut collision = false;
    let mut degenerate = 0;

    for _ in 0..n_steps {
        // 1. warning from the method
        let warning = match method {
            Method::EstStateMdp => select_warning_mdp(&belief, &state, &world),
            Method::ApproxPomdp => select_warning_pomdp(&belief, &state, &world),
            Method::TtcBaseline => {
                ttc_warning(time_to_collision(&state, &cfg.geometry), &cfg.rule)
            }
            Method::RuleBaseline => rule_based_warning(&state, &cfg.rule, &cfg.geometry),
            Method::NoWarningControl => Warning::NoWarning,
        };
        if warning != Warning::NoWarning {
            *counts.entry(warning).or_insert(0) += 1;
        }
        total_warning_cost += warning_cost(warning, &cfg.rewards);

        // 2. true behavior switches under the warning
        let outcomes = cfg.transition.query(true_policy, warning);
        let acting = *transitions_rng.pick(&outcomes);

        // 3. driver action sampled from the acting policy
        let action = policy_action(acting, &state, &model).sample(&mut action_rng, &cfg.bounds);

        // 4. world advances
        let next = advance_scenario(&state, &action, cfg);
        let (reward, collided) = step_outcome(&state, &next, &cfg.rewards, &cfg.geometry);

        // 5. belief update from (warning, observed action)
        let predicted = predict(&belief, warning, &cfg.transition);
        let corrected = match correct(&predicted, &action, &state, &model) {
            Ok(b) => b,
            Err(BeliefError::DegenerateObservation(_)) => {
                degenerate += 1;
                log::warn!("degenerate observation; keeping predicted belief");
                predicted.clone()
            }
            Err(e) => return Err(e.into()),
        };
        let next_belief = advance(&corrected, &cfg.driver);
        debug_assert!(next_belief.normalization_error() < crate::belief::NORMALIZATION_TOL);

        steps.push(StepRecord {
            t: state.t,
            state: state.clone(),
            warning,
            true_policy: acting,
            action,
            belief: belief.clone(),
            reward,
        });

        // the collision sentinel absorbs the running sum
        total = compose(total, 1.0, reward);

        // 6. next step: post-warning policy carries over, timers advance
        true_policy = advance_one(acting, &cfg.driver);
        belief = next_belief;
        state = next;

        if collided {
            collision = true;
            break;
        }
    }

    Ok(EpisodeResult {
        scenario: script.kind,
        d_gap0: script.d_gap0,
        method,
        seed,
        steps,
        total_traj_reward: total,
        total_warning_cost,
        warning_counts: counts,
        collision,
        degenerate_observations: degenerate,
    })
}

/// Render an episode trace as CSV (one row per step).
pub fn trace_csv(result: &EpisodeResult, cfg: &EngineConfig) -> String {
    let mut out = String::from(
        "t,ego_s,ego_v,ego_a,lane,gap,warning,true_policy,belief_blind,belief_safe,belief_brake,r_traj\n",
    );
    for step in &result.steps {
        let ego = step.state.ego_now();
        let gap = gap_to_lead(&step.state, &cfg.geometry)
            .map(|l| format!("{:.4}", l.gap))
            .unwrap_or_default();
        out.push_str(&format!(
            "{:.1},{:.4},{:.4},{:.4},{},{},{},{},{:.6},{:.6},{:.6},{:.4}\n",
            step.t,
            ego.s,
            ego.v,
            ego.a,
            ego.lane,
            gap,
            step.warning,
            step.true_policy,
            step.belief.kind_mass(PolicyKind::Blind),
            step.belief.kind_mass(PolicyKind::Safe),
            step.belief.kind_mass(PolicyKind::Brake),
            step.reward,
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cfg() -> EngineConfig {
        EngineConfig::default()
    }

    #[test]
    fn build_scenario_construction_identities() {
        let cfg = cfg();
        let fhb = build_scenario(ScenarioKind::FrontHardBrake, 13.5, &cfg).unwrap();
        assert_relative_eq!(fhb.hazard_v0, 12.0);
        assert_relative_eq!(fhb.hazard_target_speed, 8.0);
        assert_relative_eq!(fhb.ego_v0, 11.0);

        let lc = build_scenario(ScenarioKind::LaneChange, 8.5, &cfg).unwrap();
        assert_relative_eq!(lc.hazard_v0, 8.0);

        let s = initial_state(&build_scenario(ScenarioKind::FrontHardBrake, 18.5, &cfg).unwrap(), &cfg);
        let lead = gap_to_lead(&s, &cfg.geometry).unwrap();
        assert_relative_eq!(lead.gap, 18.5);
    }

    #[test]
    fn build_scenario_rejects_bad_gap() {
        assert!(build_scenario(ScenarioKind::LaneChange, 0.0, &cfg()).is_err());
    }

    #[test]
    fn hard_brake_script_steps_12_to_8() {
        let cfg = cfg();
        let script = build_scenario(ScenarioKind::FrontHardBrake, 13.5, &cfg).unwrap();
        let mut state = initial_state(&script, &cfg);
        // advance to the trigger with the ego holding speed
        let hold = DriverAction::keep(0.0);
        let mut speeds = Vec::new();
        for _ in 0..6 {
            state = advance_scenario(&state, &hold, &cfg);
            speeds.push(state.agents[0].current().v);
        }
        // trigger at 1.0 s: v = 12 (t=0.5), 12 (t=1.0), then 9, then 8 clamped
        assert_relative_eq!(speeds[0], 12.0);
        assert_relative_eq!(speeds[1], 12.0);
        assert_relative_eq!(speeds[2], 9.0);
        assert_relative_eq!(speeds[3], 8.0);
        assert_relative_eq!(speeds[4], 8.0);
    }

    #[test]
    fn cut_in_lateral_profile_is_linear() {
        let cfg = cfg();
        let script = build_scenario(ScenarioKind::LaneChange, 13.5, &cfg).unwrap();
        let mut state = initial_state(&script, &cfg);
        let hold = DriverAction::keep(0.0);
        let mut lats = Vec::new();
        for _ in 0..8 {
            state = advance_scenario(&state, &hold, &cfg);
            let h = state.agents[0].current();
            lats.push(h.lat(&state.map));
        }
        // trigger 1.0 s, duration 1.5 s, full lane width 3.5 m: rate is
        // 3.5 / 1.5 per second toward lane 0
        let lane1 = state.map.lane_center(1);
        let rate = 3.5 / 1.5;
        assert_relative_eq!(lats[1], lane1); // t = 1.0
        assert_relative_eq!(lats[2], lane1 - rate * 0.5, max_relative = 1e-9);
        assert_relative_eq!(lats[3], lane1 - rate * 1.0, max_relative = 1e-9);
        // complete by t = 2.5
        assert_relative_eq!(lats[4], state.map.lane_center(0));
        assert_eq!(state.agents[0].current().lane, 0);
    }

    #[test]
    fn background_free_road_follows_idm() {
        let mut cfg = cfg();
        cfg.sim.trailing_gap = 30.0;
        cfg.sim.blocker_gap = -1.0;
        let script = build_scenario(ScenarioKind::FrontHardBrake, 50.0, &cfg).unwrap();
        let mut state = initial_state(&script, &cfg);
        // trailing car at 11 m/s behind an 11 m/s ego, far from anything:
        // IDM equilibrium-free behavior, decelerating slightly from headway
        state = advance_scenario(&state, &DriverAction::keep(0.0), &cfg);
        let trailing = state.agents[1].current();
        let expect = idm_accel(
            11.0,
            Some((30.0, 11.0)),
            &cfg.idm.with_v_desired(11.0),
            &cfg.bounds,
        );
        assert_relative_eq!(trailing.a, expect);
    }

    #[test]
    fn zero_accel_world_advances_linearly() {
        // no hazard maneuver, no background: with every acceleration zero
        // positions advance linearly and the gap stays constant
        let mut cfg = cfg();
        cfg.sim.trailing_gap = -1.0;
        cfg.sim.blocker_gap = -1.0;
        cfg.sim.hazard_trigger = 100.0;
        let script = build_scenario(ScenarioKind::FrontHardBrake, 13.5, &cfg).unwrap();
        // hold the ego at the hazard's cruise speed
        let mut script = script;
        script.ego_v0 = 12.0;
        let mut state = initial_state(&script, &cfg);
        let gap0 = gap_to_lead(&state, &cfg.geometry).unwrap().gap;
        for k in 1..=5 {
            state = advance_scenario(&state, &DriverAction::keep(0.0), &cfg);
            assert_relative_eq!(state.ego_now().s, 6.0 * k as f64, max_relative = 1e-12);
            assert_relative_eq!(
                gap_to_lead(&state, &cfg.geometry).unwrap().gap,
                gap0,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn no_warning_control_collides_at_small_gap_both_scenarios() {
        let cfg = cfg();
        for kind in [ScenarioKind::FrontHardBrake, ScenarioKind::LaneChange] {
            let script = build_scenario(kind, 8.5, &cfg).unwrap();
            let r = episode(&script, Method::NoWarningControl, 1, &cfg).unwrap();
            assert!(r.collision, "{kind} should collide with a blind driver");
            assert_eq!(r.total_traj_reward, COLLISION_REWARD);
        }
    }

    #[test]
    fn episodes_are_bit_identical_across_runs() {
        let cfg = cfg();
        let script = build_scenario(ScenarioKind::FrontHardBrake, 13.5, &cfg).unwrap();
        for method in [Method::RuleBaseline, Method::TtcBaseline] {
            let a = episode(&script, method, 7, &cfg).unwrap();
            let b = episode(&script, method, 7, &cfg).unwrap();
            assert_eq!(
                serde_json::to_string(&a).unwrap(),
                serde_json::to_string(&b).unwrap()
            );
        }
    }

    #[test]
    fn post_warning_policy_carries_to_next_step() {
        // a take-over forces brake(0) at this step; the next step's
        // pre-warning policy must be exactly its one-step advance
        let cfg = cfg();
        let p = &cfg.driver;
        let pi = PolicyState::brake(0);
        assert_eq!(advance_one(pi, p), PolicyState::brake(1));
        let t_r = p.t_r_steps();
        assert_eq!(advance_one(PolicyState::brake(t_r - 1), p), PolicyState::safe());
    }

    #[test]
    fn belief_sees_only_actions_not_true_policy() {
        // two manual loops with identical observed actions but different
        // true policy labels must produce identical beliefs
        let cfg = cfg();
        let model = cfg.driver_model();
        let script = build_scenario(ScenarioKind::FrontHardBrake, 13.5, &cfg).unwrap();
        let state = initial_state(&script, &cfg);
        let actions = [0.0, -0.5, -1.0];

        let mut beliefs = Vec::new();
        for _label in [PolicyState::blind(), PolicyState::safe()] {
            let mut b = initial_belief(&cfg);
            let mut s = state.clone();
            for &a in &actions {
                let act = DriverAction::keep(a);
                let pred = predict(&b, Warning::NoWarning, &cfg.transition);
                b = advance(&correct(&pred, &act, &s, &model).unwrap(), &cfg.driver);
                s = advance_scenario(&s, &act, &cfg);
            }
            beliefs.push(b);
        }
        assert_eq!(beliefs[0], beliefs[1]);
    }

    #[test]
    fn trace_csv_has_pinned_columns() {
        let cfg = cfg();
        let script = build_scenario(ScenarioKind::LaneChange, 13.5, &cfg).unwrap();
        let r = episode(&script, Method::RuleBaseline, 3, &cfg).unwrap();
        let csv = trace_csv(&r, &cfg);
        let header = csv.lines().next().unwrap();
        assert_eq!(
            header,
            "t,ego_s,ego_v,ego_a,lane,gap,warning,true_policy,belief_blind,belief_safe,belief_brake,r_traj"
        );
        assert_eq!(csv.lines().count(), r.steps.len() + 1);
    }
}
