//! Intelligent driver model: the car-following acceleration law used by the
//! safe/blind driver policies and by background traffic.

use crate::state::AccelBounds;
use serde::{Deserialize, Serialize};

/// IDM parameters. Defaults follow standard literature values with the
/// desired speed matched to the experiment ego speed; all are configurable.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IdmParams {
    /// Desired free-road speed (m/s).
    pub v_desired: f64,
    /// Desired time headway (s).
    pub t_headway: f64,
    /// Jam gap kept at standstill (m).
    pub s_min: f64,
    /// Maximum acceleration (m/s^2).
    pub a_max: f64,
    /// Comfortable deceleration (m/s^2, positive).
    pub b_comfort: f64,
    /// Free-road exponent.
    pub delta: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        IdmParams {
            v_desired: 11.0,
            t_headway: 1.0,
            s_min: 2.0,
            a_max: 2.0,
            b_comfort: 2.5,
            delta: 4.0,
        }
    }
}

impl IdmParams {
    pub fn with_v_desired(self, v_desired: f64) -> Self {
        IdmParams { v_desired, ..self }
    }
}

/// IDM acceleration, clamped to the global bounds. With no leader only the
/// free-road term applies. A vanishing gap saturates at the clamp floor.
pub fn idm_accel(v: f64, lead: Option<(f64, f64)>, p: &IdmParams, bounds: &AccelBounds) -> f64 {
    debug_assert!(v >= 0.0);
    let free = 1.0 - (v / p.v_desired).powf(p.delta);
    let accel = match lead {
        None => p.a_max * free,
        Some((gap, v_lead)) => {
            let gap = gap.max(1e-6);
            let dv = v - v_lead;
            let s_star = p.s_min + (v * p.t_headway + v * dv / (2.0 * (p.a_max * p.b_comfort).sqrt())).max(0.0);
            p.a_max * (free - (s_star / gap).powi(2))
        }
    };
    bounds.clamp(accel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn bounds() -> AccelBounds {
        AccelBounds::default()
    }

    #[test]
    fn free_road_at_desired_speed_is_zero() {
        let p = IdmParams::default();
        assert_relative_eq!(idm_accel(p.v_desired, None, &p, &bounds()), 0.0);
    }

    #[test]
    fn free_road_from_standstill_is_a_max() {
        let p = IdmParams::default();
        assert_relative_eq!(idm_accel(0.0, None, &p, &bounds()), p.a_max);
    }

    #[test]
    fn matches_direct_formula_transcription() {
        // independent transcription of the textbook formula
        let p = IdmParams::default();
        let (v, gap, v_lead) = (11.0, 13.5, 8.0);
        let s_star = p.s_min
            + f64::max(
                0.0,
                v * p.t_headway + v * (v - v_lead) / (2.0 * (p.a_max * p.b_comfort).sqrt()),
            );
        let expected = (p.a_max * (1.0 - (v / p.v_desired).powf(p.delta) - (s_star / gap).powi(2)))
            .clamp(-6.0, 2.0);
        let got = idm_accel(v, Some((gap, v_lead)), &p, &bounds());
        assert_relative_eq!(got, expected, max_relative = 1e-12);
        // sanity: braking hard but not saturated for this geometry
        assert!(got < -4.0 && got > -6.0);
    }

    proptest! {
        #[test]
        fn monotone_non_increasing_in_speed(
            gap in 5.0f64..60.0,
            v_lead in 0.0f64..15.0,
            v in 0.0f64..14.0,
            dv in 0.01f64..2.0,
        ) {
            let p = IdmParams::default();
            let lo = idm_accel(v, Some((gap, v_lead)), &p, &bounds());
            let hi = idm_accel(v + dv, Some((gap, v_lead)), &p, &bounds());
            prop_assert!(hi <= lo + 1e-12);
        }

        #[test]
        fn monotone_non_decreasing_in_gap(
            gap in 1.0f64..60.0,
            extra in 0.01f64..20.0,
            v in 0.0f64..14.0,
            v_lead in 0.0f64..15.0,
        ) {
            let p = IdmParams::default();
            let near = idm_accel(v, Some((gap, v_lead)), &p, &bounds());
            let far = idm_accel(v, Some((gap + extra, v_lead)), &p, &bounds());
            prop_assert!(far >= near - 1e-12);
        }
    }
}
