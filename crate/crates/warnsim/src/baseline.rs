//! Rule-based warning generators used for comparison: a classical
//! time-to-collision threshold scheme and an adaptive minimum-gap scheme
//! built on hard-braking stopping distances.

use crate::state::{gap_to_lead, CarGeometry, ScenarioState, Warning};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RuleConfigError {
    #[error("missing entry for {0}")]
    Missing(Warning),
    #[error("take-over alpha must be 1, got {0}")]
    TakeOverAlpha(f64),
    #[error("alpha must increase with severity")]
    NonMonotoneAlpha,
    #[error("ttc thresholds must decrease with severity")]
    NonMonotoneTtc,
    #[error("acc_min must be negative, got {0}")]
    BadAccMin(f64),
}

/// Parameters of both baselines.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RuleParams {
    /// Strongest deceleration assumed for the hard-brake analysis (negative).
    pub acc_min: f64,
    /// Reaction delay assumed for the ego driver (s).
    pub t_d: f64,
    /// Severity scale per warning; 1 marks the take-over condition.
    pub alpha: BTreeMap<Warning, f64>,
    /// TTC firing thresholds per warning (s).
    pub ttc_thresholds: BTreeMap<Warning, f64>,
}

impl Default for RuleParams {
    fn default() -> Self {
        RuleParams {
            acc_min: -6.0,
            t_d: 1.0,
            alpha: [
                (Warning::Text, 0.15),
                (Warning::Voice, 0.4),
                (Warning::Alarm, 0.7),
                (Warning::TakeOver, 1.0),
            ]
            .into_iter()
            .collect(),
            ttc_thresholds: [
                (Warning::Text, 5.0),
                (Warning::Voice, 3.5),
                (Warning::Alarm, 2.5),
                (Warning::TakeOver, 1.5),
            ]
            .into_iter()
            .collect(),
        }
    }
}

const GRADED: [Warning; 4] = [Warning::Text, Warning::Voice, Warning::Alarm, Warning::TakeOver];

impl RuleParams {
    pub fn validate(&self) -> Result<(), RuleConfigError> {
        if self.acc_min >= 0.0 {
            return Err(RuleConfigError::BadAccMin(self.acc_min));
        }
        let mut prev_a = 0.0;
        let mut prev_t = f64::INFINITY;
        for w in GRADED {
            let a = *self.alpha.get(&w).ok_or(RuleConfigError::Missing(w))?;
            let t = *self
                .ttc_thresholds
                .get(&w)
                .ok_or(RuleConfigError::Missing(w))?;
            if a <= prev_a {
                return Err(RuleConfigError::NonMonotoneAlpha);
            }
            if t >= prev_t {
                return Err(RuleConfigError::NonMonotoneTtc);
            }
            prev_a = a;
            prev_t = t;
        }
        if (self.alpha[&Warning::TakeOver] - 1.0).abs() > 1e-12 {
            return Err(RuleConfigError::TakeOverAlpha(self.alpha[&Warning::TakeOver]));
        }
        Ok(())
    }
}

/// Classical time to collision: gap over closing speed while closing,
/// `None` otherwise. A non-positive gap while closing reports zero.
pub fn time_to_collision(state: &ScenarioState, geom: &CarGeometry) -> Option<f64> {
    let lead = gap_to_lead(state, geom)?;
    let v_ego = state.ego_now().v;
    if v_ego <= lead.v {
        return None;
    }
    Some(lead.gap.max(0.0) / (v_ego - lead.v))
}

/// Most severe warning whose TTC threshold exceeds the measured TTC.
pub fn ttc_warning(ttc: Option<f64>, params: &RuleParams) -> Warning {
    let Some(ttc) = ttc else {
        return Warning::NoWarning;
    };
    let mut out = Warning::NoWarning;
    for w in GRADED {
        if params.ttc_thresholds[&w] > ttc {
            out = w;
        }
    }
    out
}

/// Minimum gap left if both vehicles hard-brake and the ego reacts after
/// the assumed delay.
pub fn min_gap_after_hard_brake(d_gap: f64, v_ego: f64, v_front: f64, params: &RuleParams) -> f64 {
    let brake = params.acc_min.abs();
    let d_front = v_front * v_front / (2.0 * brake);
    let d_ego = v_ego * params.t_d + v_ego * v_ego / (2.0 * brake);
    d_gap + d_front - d_ego
}

/// Adaptive rule-based warning: fire the most severe warning whose margin
/// condition holds. With the severity scale at 1 the condition reduces
/// exactly to the take-over inequality (the delay terms cancel), so the
/// take-over fires precisely when an immediate hard brake is the only way
/// to stay out of the dangerous zone.
pub fn rule_based_warning(state: &ScenarioState, params: &RuleParams, geom: &CarGeometry) -> Warning {
    let Some(lead) = gap_to_lead(state, geom) else {
        return Warning::NoWarning;
    };
    let v_ego = state.ego_now().v;
    let d_min = min_gap_after_hard_brake(lead.gap, v_ego, lead.v, params);
    let mut out = Warning::NoWarning;
    for w in GRADED {
        if d_min <= -params.alpha[&w] * v_ego * params.t_d {
            out = w;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{Agent, AgentRole, RoadMap, StateHistory, VehicleState};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn geom() -> CarGeometry {
        CarGeometry::default()
    }

    fn state(v_ego: f64, gap: f64, v_front: f64) -> ScenarioState {
        ScenarioState {
            ego: StateHistory::new(VehicleState::new(0.0, 0, v_ego), 10, 0.5),
            agents: vec![Agent {
                id: 0,
                role: AgentRole::Background { v_desired: v_front },
                history: StateHistory::new(VehicleState::new(gap + 4.5, 0, v_front), 10, 0.5),
            }],
            map: RoadMap::default(),
            t: 0.0,
        }
    }

    #[test]
    fn ttc_by_definition() {
        let s = state(11.0, 12.0, 8.0);
        assert_relative_eq!(time_to_collision(&s, &geom()).unwrap(), 4.0);
    }

    #[test]
    fn ttc_none_when_not_closing() {
        let s = state(8.0, 12.0, 8.0);
        assert!(time_to_collision(&s, &geom()).is_none());
        let s = state(8.0, 12.0, 10.0);
        assert!(time_to_collision(&s, &geom()).is_none());
    }

    #[test]
    fn ttc_vanishing_gap_goes_to_zero() {
        let s = state(11.0, 1e-9, 8.0);
        assert!(time_to_collision(&s, &geom()).unwrap() < 1e-9);
    }

    #[test]
    fn ttc_warning_bands() {
        let p = RuleParams::default();
        assert_eq!(ttc_warning(None, &p), Warning::NoWarning);
        assert_eq!(ttc_warning(Some(6.0), &p), Warning::NoWarning);
        assert_eq!(ttc_warning(Some(4.0), &p), Warning::Text);
        assert_eq!(ttc_warning(Some(3.0), &p), Warning::Voice);
        assert_eq!(ttc_warning(Some(2.0), &p), Warning::Alarm);
        assert_eq!(ttc_warning(Some(1.0), &p), Warning::TakeOver);
    }

    #[test]
    fn min_gap_hand_case() {
        // v_front 8, v_ego 11, |acc_min| 6, delay 1, gap 13.5:
        // d_front = 64/12, d_ego = 11 + 121/12, d_min = -2.25
        let p = RuleParams::default();
        let d_min = min_gap_after_hard_brake(13.5, 11.0, 8.0, &p);
        assert_relative_eq!(d_min, -2.25, max_relative = 1e-12);
        // condition holds only for alpha <= 2.25 / 11, so text fires
        let s = state(11.0, 13.5, 8.0);
        assert_eq!(rule_based_warning(&s, &p, &geom()), Warning::Text);
    }

    #[test]
    fn equal_speeds_large_gap_fire_nothing() {
        let p = RuleParams::default();
        let s = state(11.0, 40.0, 11.0);
        assert_eq!(rule_based_warning(&s, &p, &geom()), Warning::NoWarning);
    }

    #[test]
    fn take_over_boundary_is_inclusive() {
        let p = RuleParams::default();
        // choose gap so that d_gap + v_front^2/2b - v_ego^2/2b = 0 exactly
        let brake = 6.0;
        let (v_ego, v_front) = (11.0, 8.0);
        let gap = (v_ego * v_ego - v_front * v_front) / (2.0 * brake);
        let s = state(v_ego, gap, v_front);
        assert_eq!(rule_based_warning(&s, &p, &geom()), Warning::TakeOver);
        let s = state(v_ego, gap + 1e-6, v_front);
        assert_ne!(rule_based_warning(&s, &p, &geom()), Warning::TakeOver);
    }

    #[test]
    fn no_leader_means_no_warning() {
        let p = RuleParams::default();
        let mut s = state(11.0, 10.0, 8.0);
        s.agents.clear();
        assert_eq!(rule_based_warning(&s, &p, &geom()), Warning::NoWarning);
        assert_eq!(ttc_warning(time_to_collision(&s, &geom()), &p), Warning::NoWarning);
    }

    #[test]
    fn take_over_condition_matches_direct_inequality_on_grid() {
        // the alpha = 1 margin condition must coincide with the plain
        // stopping-distance inequality on a dense grid
        let p = RuleParams::default();
        let brake = p.acc_min.abs();
        for i in 0..10 {
            for j in 0..10 {
                for k in 0..10 {
                    let d_gap = 0.5 + i as f64 * 2.0;
                    let v_ego = 2.0 + j as f64 * 1.5;
                    let v_front = k as f64 * 1.5;
                    let d_min = min_gap_after_hard_brake(d_gap, v_ego, v_front, &p);
                    let by_rule = d_min <= -1.0 * v_ego * p.t_d;
                    let direct =
                        d_gap + v_front * v_front / (2.0 * brake) - v_ego * v_ego / (2.0 * brake)
                            <= 0.0;
                    assert_eq!(by_rule, direct, "gap {d_gap} ve {v_ego} vf {v_front}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn severity_monotone_in_gap(
            v_ego in 5.0f64..14.0,
            v_front in 0.0f64..12.0,
            gap in 1.0f64..40.0,
            shrink in 0.1f64..5.0,
        ) {
            let p = RuleParams::default();
            let g = geom();
            let far = state(v_ego, gap + shrink, v_front);
            let near = state(v_ego, gap, v_front);
            prop_assert!(
                rule_based_warning(&near, &p, &g).severity()
                    >= rule_based_warning(&far, &p, &g).severity()
            );
            let ttc_far = ttc_warning(time_to_collision(&far, &g), &p);
            let ttc_near = ttc_warning(time_to_collision(&near, &g), &p);
            prop_assert!(ttc_near.severity() >= ttc_far.severity());
        }

        #[test]
        fn ttc_matches_forward_integration(
            v_ego in 5.0f64..14.0,
            v_front in 0.0f64..12.0,
            gap in 0.5f64..40.0,
        ) {
            prop_assume!(v_ego > v_front + 0.05);
            let s = state(v_ego, gap, v_front);
            let ttc = time_to_collision(&s, &geom()).unwrap();
            // brute force: constant-velocity integration to first contact
            let dt = 0.01;
            let mut t = 0.0;
            let mut g = gap;
            while g > 0.0 && t < 100.0 {
                g += (v_front - v_ego) * dt;
                t += dt;
            }
            prop_assert!((ttc - t).abs() <= dt + 1e-9);
        }
    }
}
