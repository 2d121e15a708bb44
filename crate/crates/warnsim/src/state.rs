//! Shared domain types: vehicle kinematics, scenario state, warnings and
//! the rectangle collision geometry used by rewards, simulator and planner.
//!
//! All types here are plain immutable values; nothing holds interior
//! mutability, so everything is safe to share across threads.

use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// Lateral command issued by a driver policy. Steering is discretized to
/// lane-keep / lane-shift; a shift completes within one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaneCmd {
    Keep,
    ShiftLeft,
    ShiftRight,
}

/// Driver action: longitudinal acceleration command plus a lane command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriverAction {
    /// Longitudinal acceleration command (m/s^2).
    pub accel: f64,
    pub lane_cmd: LaneCmd,
}

impl DriverAction {
    pub fn keep(accel: f64) -> Self {
        DriverAction {
            accel,
            lane_cmd: LaneCmd::Keep,
        }
    }
}

/// The five warning actions, ordered by severity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Warning {
    #[serde(rename = "none")]
    NoWarning,
    Text,
    Voice,
    Alarm,
    TakeOver,
}

impl Warning {
    pub const ALL: [Warning; 5] = [
        Warning::NoWarning,
        Warning::Text,
        Warning::Voice,
        Warning::Alarm,
        Warning::TakeOver,
    ];

    /// Severity rank, 0 = no warning, 4 = take-over.
    pub fn severity(self) -> usize {
        self as usize
    }
}

impl std::fmt::Display for Warning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Warning::NoWarning => "none",
            Warning::Text => "text",
            Warning::Voice => "voice",
            Warning::Alarm => "alarm",
            Warning::TakeOver => "take_over",
        };
        write!(f, "{s}")
    }
}

/// Global acceleration limits shared by drivers, scripts and baselines.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AccelBounds {
    /// Strongest deceleration any vehicle can produce (negative, m/s^2).
    pub acc_min: f64,
    /// Strongest acceleration (positive, m/s^2).
    pub acc_max: f64,
}

impl Default for AccelBounds {
    fn default() -> Self {
        AccelBounds {
            acc_min: -6.0,
            acc_max: 2.0,
        }
    }
}

impl AccelBounds {
    pub fn clamp(&self, a: f64) -> f64 {
        a.clamp(self.acc_min, self.acc_max)
    }
}

/// Vehicle footprint used for collision checks and bumper-to-bumper gaps.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CarGeometry {
    pub length: f64,
    pub width: f64,
}

impl Default for CarGeometry {
    fn default() -> Self {
        CarGeometry {
            length: 4.5,
            width: 1.8,
        }
    }
}

/// Straight multi-lane road. Lane 0 is the rightmost lane; lane index
/// increases to the left. Lane `i` is centered at `(i + 0.5) * lane_width`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoadMap {
    pub lanes: u32,
    pub lane_width: f64,
    pub speed_limit: f64,
}

impl Default for RoadMap {
    fn default() -> Self {
        RoadMap {
            lanes: 2,
            lane_width: 3.5,
            speed_limit: 15.0,
        }
    }
}

impl RoadMap {
    pub fn lane_center(&self, lane: u32) -> f64 {
        (lane as f64 + 0.5) * self.lane_width
    }
}

/// One kinematic frame of a vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    /// Longitudinal position of the vehicle center (m).
    pub s: f64,
    /// Discrete lane index.
    pub lane: u32,
    /// Lateral offset from the lane center (m); nonzero only mid lane-change.
    pub lat_offset: f64,
    /// Longitudinal speed (m/s), never negative.
    pub v: f64,
    /// Longitudinal acceleration realized over the last step (m/s^2).
    pub a: f64,
}

impl VehicleState {
    pub fn new(s: f64, lane: u32, v: f64) -> Self {
        VehicleState {
            s,
            lane,
            lat_offset: 0.0,
            v,
            a: 0.0,
        }
    }

    /// Absolute lateral position of the vehicle center in road coordinates.
    pub fn lat(&self, map: &RoadMap) -> f64 {
        map.lane_center(self.lane) + self.lat_offset
    }
}

/// Fixed-length history of kinematic frames, oldest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateHistory {
    frames: VecDeque<VehicleState>,
    max_len: usize,
    /// Step duration between consecutive frames (s).
    pub dt: f64,
}

impl StateHistory {
    pub fn new(initial: VehicleState, max_len: usize, dt: f64) -> Self {
        assert!(max_len >= 1 && dt > 0.0);
        let mut frames = VecDeque::with_capacity(max_len);
        frames.push_back(initial);
        StateHistory {
            frames,
            max_len,
            dt,
        }
    }

    /// Most recent frame.
    pub fn current(&self) -> &VehicleState {
        self.frames.back().expect("history is never empty")
    }

    pub fn push(&mut self, frame: VehicleState) {
        if self.frames.len() == self.max_len {
            self.frames.pop_front();
        }
        self.frames.push_back(frame);
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> impl Iterator<Item = &VehicleState> {
        self.frames.iter()
    }
}

/// What drives a surrounding agent. Scripted roles implement the two hazard
/// maneuvers; background vehicles follow plain in-lane car-following.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum AgentRole {
    /// Cruises, then hard-brakes to `target_speed` at the trigger time.
    HazardLead { trigger: f64, target_speed: f64 },
    /// Cruises in an adjacent lane, then shifts into `target_lane` at a
    /// constant lateral rate over `duration` seconds, and car-follows at
    /// `cruise` afterwards.
    HazardCutIn {
        trigger: f64,
        duration: f64,
        target_lane: u32,
        cruise: f64,
    },
    /// IDM car-following toward its own desired speed.
    Background { v_desired: f64 },
}

/// A surrounding agent with a stable id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub id: u32,
    pub role: AgentRole,
    pub history: StateHistory,
}

impl Agent {
    pub fn current(&self) -> &VehicleState {
        self.history.current()
    }
}

/// Full scenario state: ego history, surrounding agents, map and clock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioState {
    pub ego: StateHistory,
    pub agents: Vec<Agent>,
    pub map: RoadMap,
    /// Elapsed time since the episode start (s).
    pub t: f64,
}

impl ScenarioState {
    pub fn dt(&self) -> f64 {
        self.ego.dt
    }

    pub fn ego_now(&self) -> &VehicleState {
        self.ego.current()
    }

    /// Copy of this state with every surrounding agent removed. Masking out
    /// the agents is exactly how the blind policy is derived from the safe
    /// one, so the equality is exact by construction.
    pub fn without_agents(&self) -> ScenarioState {
        ScenarioState {
            ego: self.ego.clone(),
            agents: Vec::new(),
            map: self.map,
            t: self.t,
        }
    }
}

/// Deterministic ego kinematics: constant-acceleration integration with the
/// speed clamped at zero (scenarios are forward-driving only). A lane shift
/// completes within the step.
///
/// Panics on non-finite inputs or a non-positive `dt`.
pub fn ego_dynamics(x: &VehicleState, a: &DriverAction, dt: f64) -> VehicleState {
    assert!(
        x.s.is_finite() && x.v.is_finite() && a.accel.is_finite() && dt.is_finite(),
        "ego_dynamics requires finite inputs"
    );
    assert!(dt > 0.0, "ego_dynamics requires dt > 0");

    let (s_next, v_next) = integrate_clamped(x.s, x.v, a.accel, dt);
    let lane = match a.lane_cmd {
        LaneCmd::Keep => x.lane,
        LaneCmd::ShiftLeft => x.lane + 1,
        LaneCmd::ShiftRight => x.lane.saturating_sub(1),
    };
    VehicleState {
        s: s_next,
        lane,
        lat_offset: 0.0,
        v: v_next,
        a: a.accel,
    }
}

/// Constant-acceleration step with the speed clamped at zero: if the vehicle
/// would stop mid-step it stops at the analytic stopping point.
pub fn integrate_clamped(s: f64, v: f64, accel: f64, dt: f64) -> (f64, f64) {
    let v_raw = v + accel * dt;
    if v_raw < 0.0 {
        // stop time t* = -v / accel, position advances v^2 / (2|accel|)
        let s_stop = if accel != 0.0 {
            s + v * v / (2.0 * -accel)
        } else {
            s
        };
        (s_stop, 0.0)
    } else {
        (s + v * dt + 0.5 * accel * dt * dt, v_raw)
    }
}

/// A leader seen from some reference vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lead {
    /// Bumper-to-bumper gap (m); can be negative if footprints overlap.
    pub gap: f64,
    /// Leader longitudinal speed (m/s).
    pub v: f64,
}

fn lane_band(map: &RoadMap, lane: u32) -> (f64, f64) {
    let c = map.lane_center(lane);
    (c - map.lane_width / 2.0, c + map.lane_width / 2.0)
}

/// A vehicle occupies a lane when its lateral footprint overlaps the lane
/// band. A cut-in vehicle therefore becomes a leader as soon as it starts
/// crossing the lane line.
fn occupies_lane(v: &VehicleState, map: &RoadMap, lane: u32, geom: &CarGeometry) -> bool {
    let (lo, hi) = lane_band(map, lane);
    let lat = v.lat(map);
    lat + geom.width / 2.0 > lo && lat - geom.width / 2.0 < hi
}

/// Nearest agent ahead of the ego in the ego's lane; `None` when the lane
/// ahead is clear.
pub fn gap_to_lead(state: &ScenarioState, geom: &CarGeometry) -> Option<Lead> {
    lead_in_lane(state, state.ego_now(), state.ego_now().lane, geom, None)
}

/// Nearest agent ahead of `from` that occupies `lane`, skipping the agent
/// with id `skip` (used when an agent looks for its own leader).
pub fn lead_in_lane(
    state: &ScenarioState,
    from: &VehicleState,
    lane: u32,
    geom: &CarGeometry,
    skip: Option<u32>,
) -> Option<Lead> {
    let mut best: Option<Lead> = None;
    for agent in &state.agents {
        if Some(agent.id) == skip {
            continue;
        }
        let a = agent.current();
        if a.s <= from.s || !occupies_lane(a, &state.map, lane, geom) {
            continue;
        }
        let gap = a.s - from.s - geom.length;
        if best.map_or(true, |b| gap < b.gap) {
            best = Some(Lead { gap, v: a.v });
        }
    }
    best
}

/// Nearest agent behind `from` that occupies `lane`; returns bumper gap and
/// that vehicle's speed.
pub fn rear_in_lane(
    state: &ScenarioState,
    from: &VehicleState,
    lane: u32,
    geom: &CarGeometry,
) -> Option<Lead> {
    let mut best: Option<Lead> = None;
    for agent in &state.agents {
        let a = agent.current();
        if a.s > from.s || !occupies_lane(a, &state.map, lane, geom) {
            continue;
        }
        let gap = from.s - a.s - geom.length;
        if best.map_or(true, |b| gap < b.gap) {
            best = Some(Lead { gap, v: a.v });
        }
    }
    best
}

/// Axis-aligned rectangle overlap between two vehicles in road coordinates.
pub fn rects_overlap(a: &VehicleState, b: &VehicleState, map: &RoadMap, geom: &CarGeometry) -> bool {
    (a.s - b.s).abs() < geom.length && (a.lat(map) - b.lat(map)).abs() < geom.width
}

/// True if the ego overlaps any agent in the given state.
pub fn ego_collides(state: &ScenarioState, geom: &CarGeometry) -> bool {
    let ego = state.ego_now();
    state
        .agents
        .iter()
        .any(|ag| rects_overlap(ego, ag.current(), &state.map, geom))
}

/// Interval of tau in [0,1] where |a + (b - a) * tau| < c; `None` when empty.
fn band_interval(a: f64, b: f64, c: f64) -> Option<(f64, f64)> {
    let d = b - a;
    if d.abs() < 1e-12 {
        return if a.abs() < c { Some((0.0, 1.0)) } else { None };
    }
    let t0 = (-c - a) / d;
    let t1 = (c - a) / d;
    let (lo, hi) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
    let lo = lo.max(0.0);
    let hi = hi.min(1.0);
    if lo < hi {
        Some((lo, hi))
    } else {
        None
    }
}

/// Swept rectangle overlap along the linear motion between two frames.
/// Catches tunneling through a vehicle at high closing speeds, which the
/// per-step check alone would miss.
pub fn swept_overlap(
    a0: &VehicleState,
    a1: &VehicleState,
    b0: &VehicleState,
    b1: &VehicleState,
    map: &RoadMap,
    geom: &CarGeometry,
) -> bool {
    let ds0 = a0.s - b0.s;
    let ds1 = a1.s - b1.s;
    let dl0 = a0.lat(map) - b0.lat(map);
    let dl1 = a1.lat(map) - b1.lat(map);
    let (Some((s_lo, s_hi)), Some((l_lo, l_hi))) = (
        band_interval(ds0, ds1, geom.length),
        band_interval(dl0, dl1, geom.width),
    ) else {
        return false;
    };
    s_lo.max(l_lo) < s_hi.min(l_hi)
}

/// True if the ego's motion from `prev` to `next` collides with any agent,
/// combining the per-step overlap at `next` with the swept check.
pub fn step_collides(prev: &ScenarioState, next: &ScenarioState, geom: &CarGeometry) -> bool {
    if ego_collides(next, geom) {
        return true;
    }
    let (e0, e1) = (prev.ego_now(), next.ego_now());
    for ag1 in &next.agents {
        let Some(ag0) = prev.agents.iter().find(|a| a.id == ag1.id) else {
            continue;
        };
        if swept_overlap(e0, e1, ag0.current(), ag1.current(), &next.map, geom) {
            return true;
        }
    }
    false
}
