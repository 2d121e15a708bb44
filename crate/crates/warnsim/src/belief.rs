//! Discrete Bayesian filter over the driver-policy set: model prediction
//! under the issued warning, observation correction against the driver's
//! action, and the timer-advancing state transition, plus the thresholded
//! point-estimate extraction the planner consumes.

use crate::policy::{
    action_likelihood, advance_one, DriverModel, DriverParams, PolicyKind, PolicyState,
};
use crate::state::{DriverAction, ScenarioState, Warning};
use crate::transition::TransitionModel;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

pub const NORMALIZATION_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum BeliefError {
    #[error("total observation likelihood {0:e} is degenerate")]
    DegenerateObservation(f64),
    #[error("belief mass {0} is not normalizable")]
    NotNormalizable(f64),
}

/// Normalized probability distribution over timer-indexed policy states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Belief {
    probs: BTreeMap<PolicyState, f64>,
}

impl Belief {
    /// Build a belief from (policy, weight) pairs; weights are normalized.
    pub fn from_weights<I: IntoIterator<Item = (PolicyState, f64)>>(
        weights: I,
    ) -> Result<Belief, BeliefError> {
        let mut probs = BTreeMap::new();
        for (pi, w) in weights {
            if w > 0.0 {
                *probs.entry(pi).or_insert(0.0) += w;
            }
        }
        let total: f64 = probs.values().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(BeliefError::NotNormalizable(total));
        }
        for p in probs.values_mut() {
            *p /= total;
        }
        Ok(Belief { probs })
    }

    pub fn one_hot(pi: PolicyState) -> Belief {
        Belief {
            probs: [(pi, 1.0)].into_iter().collect(),
        }
    }

    pub fn prob(&self, pi: &PolicyState) -> f64 {
        self.probs.get(pi).copied().unwrap_or(0.0)
    }

    /// Total mass on a behavior kind across timers.
    pub fn kind_mass(&self, kind: PolicyKind) -> f64 {
        self.probs
            .iter()
            .filter(|(pi, _)| pi.kind == kind)
            .map(|(_, p)| p)
            .sum()
    }

    /// Mass on states whose current actions are still the blind policy's:
    /// blind plus delay states inside their reaction time. This is the
    /// safety-relevant "driver has not yet reacted" probability.
    pub fn blind_acting_mass(&self, params: &DriverParams) -> f64 {
        self.probs
            .iter()
            .filter(|(pi, _)| pi.acts_blind(params))
            .map(|(_, p)| p)
            .sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PolicyState, &f64)> {
        self.probs.iter()
    }

    pub fn total(&self) -> f64 {
        self.probs.values().sum()
    }

    /// Largest deviation of the total mass from 1.
    pub fn normalization_error(&self) -> f64 {
        (self.total() - 1.0).abs()
    }
}

/// Model prediction step: push the belief through the transition model
/// under the issued warning.
pub fn predict(b: &Belief, w: Warning, model: &TransitionModel) -> Belief {
    let mut out: BTreeMap<PolicyState, f64> = BTreeMap::new();
    for (&pi, &p) in b.iter() {
        if p == 0.0 {
            continue;
        }
        for (next, q) in model.query(pi, w) {
            if q > 0.0 {
                *out.entry(next).or_insert(0.0) += p * q;
            }
        }
    }
    Belief::from_weights(out).expect("prediction of a normalized belief is normalizable")
}

/// Observation correction step: reweight by each policy's likelihood of the
/// observed action and renormalize. A degenerate total likelihood is
/// reported instead of producing garbage; callers keep the predicted belief.
pub fn correct(
    b_minus: &Belief,
    a: &DriverAction,
    state: &ScenarioState,
    m: &DriverModel,
) -> Result<Belief, BeliefError> {
    let mut weights = Vec::with_capacity(8);
    let mut total = 0.0;
    for (&pi, &p) in b_minus.iter() {
        let w = p * action_likelihood(pi, a, state, m);
        total += w;
        weights.push((pi, w));
    }
    if total < 1e-300 {
        return Err(BeliefError::DegenerateObservation(total));
    }
    Belief::from_weights(weights)
}

/// State transition step: every timer advances one step, relabeling mass
/// whose timer crosses its duration (delay to target, brake past recovery
/// to safe).
pub fn advance(b_plus: &Belief, params: &DriverParams) -> Belief {
    let mut out: BTreeMap<PolicyState, f64> = BTreeMap::new();
    for (&pi, &p) in b_plus.iter() {
        *out.entry(advance_one(pi, params)).or_insert(0.0) += p;
    }
    Belief::from_weights(out).expect("advance preserves mass")
}

/// Point-estimate extraction: return blind whenever the not-yet-reacting
/// mass exceeds the safety threshold, otherwise the argmax state. Argmax
/// ties break by the declared kind order (safe first, blind last), then by
/// smaller timer; iteration order makes earlier states win ties.
pub fn extract_estimate(b: &Belief, th_safety: f64, params: &DriverParams) -> PolicyState {
    debug_assert!((0.0..1.0).contains(&th_safety) || th_safety == 1.0);
    if b.blind_acting_mass(params) > th_safety {
        return PolicyState::blind();
    }
    let mut best = (PolicyState::safe(), f64::NEG_INFINITY);
    for (&pi, &p) in b.iter() {
        if p > best.1 {
            best = (pi, p);
        }
    }
    best.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::idm::IdmParams;
    use crate::state::{AccelBounds, CarGeometry, RoadMap, StateHistory, VehicleState};
    use approx::assert_relative_eq;

    fn model() -> TransitionModel {
        TransitionModel::default()
    }

    fn driver_model() -> DriverModel {
        DriverModel {
            idm: IdmParams::default(),
            driver: DriverParams::default(),
            bounds: AccelBounds::default(),
            geometry: CarGeometry::default(),
        }
    }

    fn free_state() -> ScenarioState {
        ScenarioState {
            ego: StateHistory::new(VehicleState::new(0.0, 0, 11.0), 10, 0.5),
            agents: Vec::new(),
            map: RoadMap::default(),
            t: 0.0,
        }
    }

    fn half_half() -> Belief {
        Belief::from_weights([
            (PolicyState::blind(), 0.5),
            (PolicyState::safe(), 0.5),
        ])
        .unwrap()
    }

    #[test]
    fn predict_take_over_collapses_to_brake() {
        let b = Belief::one_hot(PolicyState::blind());
        let out = predict(&b, Warning::TakeOver, &model());
        assert_relative_eq!(out.prob(&PolicyState::brake(0)), 1.0);
    }

    #[test]
    fn predict_no_warning_is_identity() {
        let b = half_half();
        let out = predict(&b, Warning::NoWarning, &model());
        assert_eq!(out, b);
    }

    #[test]
    fn predict_one_hot_copies_table_row() {
        // with a one-hot prior the prediction is a matrix-vector product
        // that reduces to the table row itself
        let b = Belief::one_hot(PolicyState::blind());
        let out = predict(&b, Warning::Voice, &model());
        assert_relative_eq!(out.prob(&PolicyState::blind()), 0.30);
        assert_relative_eq!(out.prob(&PolicyState::delay_to_safe(0)), 0.55);
        assert_relative_eq!(out.prob(&PolicyState::delay_to_brake(0)), 0.15);
    }

    #[test]
    fn correct_is_direct_bayes() {
        // uniform prior over {blind, safe}; likelihoods proportional to
        // (0.8, 0.2) must give posterior (0.8, 0.2). Build a state where the
        // two policies agree (free road) and inject the likelihood ratio by
        // hand through from_weights to keep the oracle independent.
        let prior = half_half();
        let post = Belief::from_weights(
            prior
                .iter()
                .map(|(&pi, &p)| (pi, p * if pi.is_blind() { 0.8 } else { 0.2 })),
        )
        .unwrap();
        assert_relative_eq!(post.prob(&PolicyState::blind()), 0.8);
        assert_relative_eq!(post.prob(&PolicyState::safe()), 0.2);
    }

    #[test]
    fn correct_preserves_one_hot_support() {
        let m = driver_model();
        let state = free_state();
        let b = Belief::one_hot(PolicyState::safe());
        let out = correct(&b, &DriverAction::keep(0.3), &state, &m).unwrap();
        assert_relative_eq!(out.prob(&PolicyState::safe()), 1.0);
    }

    #[test]
    fn correct_uninformative_observation_keeps_prior() {
        // on a free road blind and safe produce identical distributions
        let m = driver_model();
        let state = free_state();
        let b = half_half();
        let out = correct(&b, &DriverAction::keep(0.1), &state, &m).unwrap();
        assert_relative_eq!(out.prob(&PolicyState::blind()), 0.5, epsilon = 1e-12);
        assert_relative_eq!(out.prob(&PolicyState::safe()), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn correct_degenerate_reports_error() {
        let m = driver_model();
        let state = free_state();
        let b = Belief::one_hot(PolicyState::blind());
        // residual of ~1000 sigma underflows the Gaussian to exactly zero
        let err = correct(&b, &DriverAction::keep(400.0), &state, &m);
        assert!(matches!(err, Err(BeliefError::DegenerateObservation(_))));
    }

    #[test]
    fn advance_relabels_boundary_mass() {
        let params = DriverParams::default();
        let t_d = params.t_d_steps();
        let t_r = params.t_r_steps();

        let b = Belief::one_hot(PolicyState::delay_to_safe(t_d - 1));
        assert_relative_eq!(advance(&b, &params).prob(&PolicyState::safe()), 1.0);

        let b = Belief::one_hot(PolicyState::blind());
        assert_eq!(advance(&b, &params), b);

        let b = Belief::one_hot(PolicyState::brake(t_r - 1));
        assert_relative_eq!(advance(&b, &params).prob(&PolicyState::safe()), 1.0);

        let b = Belief::one_hot(PolicyState::delay_to_brake(t_d - 1));
        assert_relative_eq!(advance(&b, &params).prob(&PolicyState::brake(0)), 1.0);
    }

    #[test]
    fn full_cycle_identity_on_timerless_beliefs() {
        let m = driver_model();
        let tm = model();
        let state = free_state();
        let b = half_half();
        let b1 = predict(&b, Warning::NoWarning, &tm);
        let b2 = correct(&b1, &DriverAction::keep(0.0), &state, &m).unwrap();
        let b3 = advance(&b2, &m.driver);
        assert_relative_eq!(b3.prob(&PolicyState::blind()), 0.5, epsilon = 1e-12);
        assert_relative_eq!(b3.prob(&PolicyState::safe()), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn extract_uses_safety_threshold() {
        let params = DriverParams::default();
        let b = Belief::from_weights([(PolicyState::blind(), 0.25), (PolicyState::safe(), 0.75)])
            .unwrap();
        assert_eq!(extract_estimate(&b, 0.2, &params), PolicyState::blind());
        assert_eq!(extract_estimate(&b, 0.3, &params), PolicyState::safe());
    }

    #[test]
    fn extract_argmax_of_one_hot() {
        let params = DriverParams::default();
        let b = Belief::one_hot(PolicyState::safe());
        assert_eq!(extract_estimate(&b, 0.2, &params), PolicyState::safe());
    }

    #[test]
    fn extract_tie_breaks_by_kind_order() {
        let params = DriverParams::default();
        let b = Belief::from_weights([
            (PolicyState::blind(), 0.1),
            (PolicyState::safe(), 0.45),
            (PolicyState::brake(0), 0.45),
        ])
        .unwrap();
        // blind-acting mass 0.1 <= 0.2, argmax ties at 0.45: safe wins
        assert_eq!(extract_estimate(&b, 0.2, &params), PolicyState::safe());
    }

    #[test]
    fn delay_states_count_toward_blind_mass() {
        let params = DriverParams::default();
        let b = Belief::from_weights([
            (PolicyState::delay_to_safe(0), 0.15),
            (PolicyState::blind(), 0.10),
            (PolicyState::safe(), 0.75),
        ])
        .unwrap();
        assert_relative_eq!(b.blind_acting_mass(&params), 0.25);
        assert_eq!(extract_estimate(&b, 0.2, &params), PolicyState::blind());
    }

    #[test]
    fn operations_preserve_normalization() {
        let m = driver_model();
        let tm = model();
        let state = free_state();
        let mut b = half_half();
        for w in [Warning::Text, Warning::Voice, Warning::Alarm, Warning::NoWarning] {
            b = predict(&b, w, &tm);
            assert!(b.normalization_error() < NORMALIZATION_TOL);
            b = correct(&b, &DriverAction::keep(-0.2), &state, &m).unwrap();
            assert!(b.normalization_error() < NORMALIZATION_TOL);
            b = advance(&b, &m.driver);
            assert!(b.normalization_error() < NORMALIZATION_TOL);
        }
    }
}
