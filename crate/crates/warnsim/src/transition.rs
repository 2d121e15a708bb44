//! Warning-conditioned behavior switching. A table maps (source kind,
//! warning) to a distribution over target kinds, subject to two hard rules:
//! a take-over always forces an immediate brake with no delay, and no
//! warning ever moves a brake-family driver back to safe (recovery happens
//! only through the brake timer).

use crate::policy::{PolicyKind, PolicyState};
use crate::state::Warning;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum TransitionError {
    #[error("missing transition row ({0}, {1})")]
    MissingRow(PolicyKind, Warning),
    #[error("row ({0}, {1}) sums to {2}, expected 1")]
    BadRowSum(PolicyKind, Warning, f64),
    #[error("row ({0}, {1}) has probability {3} for target {2}")]
    BadProbability(PolicyKind, Warning, PolicyKind, f64),
    #[error("row ({0}, {1}) allows disallowed target {2}")]
    DisallowedTarget(PolicyKind, Warning, PolicyKind),
    #[error("row ({0}, none) must be the identity")]
    NoWarningNotIdentity(PolicyKind),
    #[error("row ({0}, take_over) must put all mass on brake")]
    TakeOverNotBrake(PolicyKind),
    #[error("leave-blind mass must be monotone in warning severity: {0}")]
    NonMonotoneLeaveBlind(String),
}

/// Serialized form: stored rows for the safe, blind and brake sources.
/// Delay sources re-sample the blind row with upgrade-only semantics, so
/// they need no rows of their own.
pub type TransitionRows = BTreeMap<PolicyKind, BTreeMap<Warning, BTreeMap<PolicyKind, f64>>>;

/// Validated behavior transition model.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "TransitionRows", into = "TransitionRows")]
pub struct TransitionModel {
    rows: TransitionRows,
}

const STORED_KINDS: [PolicyKind; 3] = [PolicyKind::Safe, PolicyKind::Blind, PolicyKind::Brake];

fn allowed_targets(source: PolicyKind) -> &'static [PolicyKind] {
    match source {
        PolicyKind::Safe => &[PolicyKind::Safe, PolicyKind::Brake],
        PolicyKind::Blind => &[
            PolicyKind::Blind,
            PolicyKind::DelayBlindToSafe,
            PolicyKind::DelayBlindToBrake,
            PolicyKind::Safe,
            PolicyKind::Brake,
        ],
        PolicyKind::Brake => &[PolicyKind::Brake],
        _ => &[],
    }
}

impl TransitionModel {
    /// Validate and build a model from stored rows. Rows must exist for
    /// every (stored kind, warning) pair; errors name the offending row.
    pub fn from_rows(rows: TransitionRows) -> Result<Self, TransitionError> {
        for kind in STORED_KINDS {
            let per_warning = rows
                .get(&kind)
                .ok_or(TransitionError::MissingRow(kind, Warning::NoWarning))?;
            for w in Warning::ALL {
                let row = per_warning
                    .get(&w)
                    .ok_or(TransitionError::MissingRow(kind, w))?;
                let mut sum = 0.0;
                for (&target, &p) in row {
                    if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                        return Err(TransitionError::BadProbability(kind, w, target, p));
                    }
                    if p > 0.0 && !allowed_targets(kind).contains(&target) {
                        return Err(TransitionError::DisallowedTarget(kind, w, target));
                    }
                    sum += p;
                }
                if (sum - 1.0).abs() > ROW_SUM_TOL {
                    return Err(TransitionError::BadRowSum(kind, w, sum));
                }
                if w == Warning::NoWarning && row.get(&kind).copied().unwrap_or(0.0) < 1.0 - ROW_SUM_TOL
                {
                    return Err(TransitionError::NoWarningNotIdentity(kind));
                }
                if w == Warning::TakeOver
                    && row.get(&PolicyKind::Brake).copied().unwrap_or(0.0) < 1.0 - ROW_SUM_TOL
                {
                    return Err(TransitionError::TakeOverNotBrake(kind));
                }
            }
        }
        let model = TransitionModel { rows };
        // leave-blind mass must not decrease with warning severity
        let mut prev = 0.0;
        for w in [Warning::NoWarning, Warning::Text, Warning::Voice, Warning::Alarm] {
            let leave = model.leave_blind_mass(w);
            if leave + ROW_SUM_TOL < prev {
                return Err(TransitionError::NonMonotoneLeaveBlind(format!(
                    "{w} has leave mass {leave:.4} below a weaker warning's {prev:.4}"
                )));
            }
            prev = leave;
        }
        Ok(model)
    }

    /// Probability that a blind driver leaves the blind behavior under `w`.
    pub fn leave_blind_mass(&self, w: Warning) -> f64 {
        if w == Warning::TakeOver {
            return 1.0;
        }
        let row = &self.rows[&PolicyKind::Blind][&w];
        1.0 - row.get(&PolicyKind::Blind).copied().unwrap_or(0.0)
    }

    fn stored_row(&self, kind: PolicyKind, w: Warning) -> &BTreeMap<PolicyKind, f64> {
        &self.rows[&kind][&w]
    }

    /// Distribution over next policies for a driver in `pi` receiving `w`.
    ///
    /// Take-over puts all mass on a fresh brake; no warning is the identity.
    /// Delay sources re-sample the blind row: outcomes that commit harder
    /// (brake over delayed-brake over delayed-safe) upgrade in place keeping
    /// the original timer, everything else leaves the state unchanged.
    pub fn query(&self, pi: PolicyState, w: Warning) -> Vec<(PolicyState, f64)> {
        if w == Warning::TakeOver {
            return vec![(PolicyState::brake(0), 1.0)];
        }
        if w == Warning::NoWarning {
            return vec![(pi, 1.0)];
        }
        let mut out: BTreeMap<PolicyState, f64> = BTreeMap::new();
        match pi.kind {
            PolicyKind::Safe | PolicyKind::Blind | PolicyKind::Brake => {
                for (&target, &p) in self.stored_row(pi.kind, w) {
                    if p == 0.0 {
                        continue;
                    }
                    let next = match target {
                        PolicyKind::Safe => PolicyState::safe(),
                        PolicyKind::Blind => PolicyState::blind(),
                        // a braking driver keeps braking with the timer intact
                        PolicyKind::Brake if pi.kind == PolicyKind::Brake => pi,
                        PolicyKind::Brake => PolicyState::brake(0),
                        PolicyKind::DelayBlindToSafe => PolicyState::delay_to_safe(0),
                        PolicyKind::DelayBlindToBrake => PolicyState::delay_to_brake(0),
                    };
                    *out.entry(next).or_insert(0.0) += p;
                }
            }
            PolicyKind::DelayBlindToSafe | PolicyKind::DelayBlindToBrake => {
                for (&target, &p) in self.stored_row(PolicyKind::Blind, w) {
                    if p == 0.0 {
                        continue;
                    }
                    let next = match (pi.kind, target) {
                        // upgrades keep the reaction clock already running
                        (PolicyKind::DelayBlindToSafe, PolicyKind::DelayBlindToBrake) => {
                            PolicyState::delay_to_brake(pi.timer)
                        }
                        (_, PolicyKind::Brake) => PolicyState::brake(0),
                        // same-or-weaker outcomes leave the state unchanged
                        _ => pi,
                    };
                    *out.entry(next).or_insert(0.0) += p;
                }
            }
        }
        let result: Vec<_> = out.into_iter().collect();
        debug_assert!((result.iter().map(|(_, p)| p).sum::<f64>() - 1.0).abs() < 1e-9);
        result
    }

    /// All policy states reachable from `pi` under any warning.
    pub fn reachable(&self, pi: PolicyState) -> Vec<PolicyState> {
        let mut set: BTreeMap<PolicyState, ()> = BTreeMap::new();
        for w in Warning::ALL {
            for (next, p) in self.query(pi, w) {
                if p > 0.0 {
                    set.insert(next, ());
                }
            }
        }
        set.into_keys().collect()
    }
}

impl Default for TransitionModel {
    fn default() -> Self {
        TransitionModel::from_rows(default_rows()).expect("default table is valid")
    }
}

impl TryFrom<TransitionRows> for TransitionModel {
    type Error = TransitionError;

    fn try_from(rows: TransitionRows) -> Result<Self, Self::Error> {
        TransitionModel::from_rows(rows)
    }
}

impl From<TransitionModel> for TransitionRows {
    fn from(m: TransitionModel) -> TransitionRows {
        m.rows
    }
}

fn row(entries: &[(PolicyKind, f64)]) -> BTreeMap<PolicyKind, f64> {
    entries.iter().copied().collect()
}

/// Shipped default table. Leave-blind mass 0.35 / 0.70 / 0.90 for text,
/// voice and alarm; the leaving mass splits 11:3 toward the delayed-safe
/// reaction for text and voice, and 50/50 for alarm (a startled driver is
/// likelier to just brake). An alarm can also push a safe driver into a
/// reflex brake with small probability.
pub fn default_rows() -> TransitionRows {
    use PolicyKind::*;
    use Warning::*;
    let mut rows: TransitionRows = BTreeMap::new();

    let mut safe = BTreeMap::new();
    safe.insert(NoWarning, row(&[(Safe, 1.0)]));
    safe.insert(Text, row(&[(Safe, 1.0)]));
    safe.insert(Voice, row(&[(Safe, 1.0)]));
    safe.insert(Alarm, row(&[(Safe, 0.95), (Brake, 0.05)]));
    safe.insert(TakeOver, row(&[(Brake, 1.0)]));
    rows.insert(Safe, safe);

    let mut blind = BTreeMap::new();
    blind.insert(NoWarning, row(&[(Blind, 1.0)]));
    blind.insert(
        Text,
        row(&[(Blind, 0.65), (DelayBlindToSafe, 0.275), (DelayBlindToBrake, 0.075)]),
    );
    blind.insert(
        Voice,
        row(&[(Blind, 0.30), (DelayBlindToSafe, 0.55), (DelayBlindToBrake, 0.15)]),
    );
    blind.insert(
        Alarm,
        row(&[(Blind, 0.10), (DelayBlindToSafe, 0.45), (DelayBlindToBrake, 0.45)]),
    );
    blind.insert(TakeOver, row(&[(Brake, 1.0)]));
    rows.insert(Blind, blind);

    let mut brake = BTreeMap::new();
    for w in [NoWarning, Text, Voice, Alarm, TakeOver] {
        brake.insert(w, row(&[(Brake, 1.0)]));
    }
    rows.insert(Brake, brake);

    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn model() -> TransitionModel {
        TransitionModel::default()
    }

    fn sorted(q: Vec<(PolicyState, f64)>) -> BTreeMap<PolicyState, f64> {
        q.into_iter().collect()
    }

    #[test]
    fn rows_sum_to_one() {
        let m = model();
        for kind in PolicyKind::ALL {
            for timer in 0..2 {
                let pi = PolicyState { kind, timer };
                for w in Warning::ALL {
                    let sum: f64 = m.query(pi, w).iter().map(|(_, p)| p).sum();
                    assert!((sum - 1.0).abs() < 1e-12, "{pi} {w} sums to {sum}");
                }
            }
        }
    }

    #[test]
    fn take_over_forces_fresh_brake_from_every_source() {
        let m = model();
        for kind in PolicyKind::ALL {
            let q = m.query(PolicyState { kind, timer: 1 }, Warning::TakeOver);
            assert_eq!(q, vec![(PolicyState::brake(0), 1.0)]);
        }
    }

    #[test]
    fn no_warning_is_identity() {
        let m = model();
        let pi = PolicyState::delay_to_safe(1);
        assert_eq!(m.query(pi, Warning::NoWarning), vec![(pi, 1.0)]);
    }

    #[test]
    fn brake_family_never_reaches_safe() {
        let m = model();
        for timer in 0..3 {
            for w in Warning::ALL {
                for (next, p) in m.query(PolicyState::brake(timer), w) {
                    assert!(
                        p == 0.0 || next.kind != PolicyKind::Safe,
                        "brake reached safe under {w}"
                    );
                }
                for (next, p) in m.query(PolicyState::delay_to_brake(timer), w) {
                    assert!(p == 0.0 || next.kind != PolicyKind::Safe);
                }
            }
        }
    }

    #[test]
    fn blind_voice_default_row() {
        let q = sorted(model().query(PolicyState::blind(), Warning::Voice));
        assert_relative_eq!(q[&PolicyState::blind()], 0.30);
        assert_relative_eq!(q[&PolicyState::delay_to_safe(0)], 0.55);
        assert_relative_eq!(q[&PolicyState::delay_to_brake(0)], 0.15);
    }

    #[test]
    fn delay_sources_upgrade_only() {
        let m = model();
        // delayed-safe can upgrade to delayed-brake keeping its timer
        let q = sorted(m.query(PolicyState::delay_to_safe(1), Warning::Voice));
        assert_relative_eq!(q[&PolicyState::delay_to_safe(1)], 0.85);
        assert_relative_eq!(q[&PolicyState::delay_to_brake(1)], 0.15);
        // delayed-brake never downgrades
        let q = sorted(m.query(PolicyState::delay_to_brake(1), Warning::Alarm));
        assert_eq!(q.len(), 1);
        assert_relative_eq!(q[&PolicyState::delay_to_brake(1)], 1.0);
    }

    #[test]
    fn leave_blind_mass_monotone() {
        let m = model();
        let masses: Vec<f64> = [Warning::NoWarning, Warning::Text, Warning::Voice, Warning::Alarm]
            .iter()
            .map(|&w| m.leave_blind_mass(w))
            .collect();
        assert_relative_eq!(masses[0], 0.0);
        assert!(masses.windows(2).all(|w| w[0] <= w[1] + 1e-12));
    }

    #[test]
    fn validation_rejects_bad_row_sum() {
        let mut rows = default_rows();
        rows.get_mut(&PolicyKind::Blind)
            .unwrap()
            .get_mut(&Warning::Voice)
            .unwrap()
            .insert(PolicyKind::Blind, 0.4);
        let err = TransitionModel::from_rows(rows).unwrap_err();
        assert!(matches!(err, TransitionError::BadRowSum(PolicyKind::Blind, Warning::Voice, _)));
    }

    #[test]
    fn validation_rejects_brake_to_safe() {
        let mut rows = default_rows();
        rows.get_mut(&PolicyKind::Brake)
            .unwrap()
            .insert(Warning::Voice, row(&[(PolicyKind::Safe, 1.0)]));
        let err = TransitionModel::from_rows(rows).unwrap_err();
        assert!(matches!(err, TransitionError::DisallowedTarget(..)));
    }

    #[test]
    fn validation_rejects_missing_row() {
        let mut rows = default_rows();
        rows.get_mut(&PolicyKind::Safe).unwrap().remove(&Warning::Text);
        let err = TransitionModel::from_rows(rows).unwrap_err();
        assert!(matches!(err, TransitionError::MissingRow(PolicyKind::Safe, Warning::Text)));
    }
}
