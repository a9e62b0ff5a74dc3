//! Lane-following speed control for vehicles not on a granted trajectory.

/// Standstill gap kept to the vehicle ahead.
pub const STANDSTILL_GAP: f64 = 2.0;
/// Time headway of the constant-time-headway policy.
pub const TIME_HEADWAY: f64 = 1.0;
const GAP_GAIN: f64 = 0.5;
const SPEED_GAIN: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Leader {
    /// Rear bumper position after this step.
    pub rear_next: f64,
    /// Speed after this step.
    pub v_next: f64,
}

/// Largest `v_next` such that after one step at the average speed the
/// vehicle can still brake at `decel` to `v_end` before `limit`:
/// `s + (v + v_next) h / 2 + (v_next² - v_end²) / (2 decel) <= limit`.
pub fn speed_bound(s: f64, v: f64, limit: f64, v_end: f64, decel: f64, h: f64) -> f64 {
    let c = limit - s - v * h / 2.0 + v_end * v_end / (2.0 * decel);
    if c <= 0.0 {
        return 0.0;
    }
    decel * (-h / 2.0 + (h * h / 4.0 + 2.0 * c / decel).sqrt())
}

/// Position after one step from `v` to `v_next`. A vehicle braking to rest
/// within the step stops after `v² / (2 decel)` instead of covering the
/// whole trapezoid.
pub fn advance_position(s: f64, v: f64, v_next: f64, h: f64, decel: f64) -> f64 {
    if v_next <= 0.0 && v < decel * h {
        s + v * v / (2.0 * decel)
    } else {
        s + (v + v_next) / 2.0 * h
    }
}

pub struct FollowInput {
    pub s: f64,
    pub v: f64,
    pub h: f64,
    pub a_max: f64,
    pub a_min: f64,
    pub desired_speed: f64,
    pub leader: Option<Leader>,
    /// Position the front bumper must be able to stop at (entrance line for
    /// vehicles without permission to enter).
    pub stop_line: Option<f64>,
    /// Speed the vehicle must be able to be at when reaching position 0.
    pub entry_speed_limit: Option<f64>,
}

/// Next speed: the comfort controller's choice, clipped by the hard safety
/// bounds, never braking harder than `a_min`.
pub fn next_speed(inp: &FollowInput) -> f64 {
    let FollowInput {
        s,
        v,
        h,
        a_max,
        a_min,
        ..
    } = *inp;
    let mut accel = ((inp.desired_speed - v) / h).min(a_max);
    let mut hard = f64::INFINITY;
    if let Some(l) = inp.leader {
        let gap = l.rear_next - s;
        let desired_gap = STANDSTILL_GAP + TIME_HEADWAY * v;
        let cth = GAP_GAIN * (gap - desired_gap) + SPEED_GAIN * (l.v_next - v);
        accel = accel.min(cth);
        hard = hard.min(speed_bound(
            s,
            v,
            l.rear_next - STANDSTILL_GAP,
            l.v_next,
            a_min,
            h,
        ));
    }
    if let Some(line) = inp.stop_line {
        hard = hard.min(speed_bound(s, v, line, 0.0, a_min, h));
    }
    if let Some(v_entry) = inp.entry_speed_limit {
        if s < 0.0 {
            hard = hard.min(speed_bound(s, v, 0.0, v_entry, a_min, h));
            // start slowing comfortably well before the hard bound binds
            let comfort = (v_entry * v_entry + 2.0 * 3.0 * (-s)).sqrt();
            accel = accel.min((comfort - v) / h);
        } else {
            hard = hard.min(v_entry);
        }
    }
    let wanted = v + accel.clamp(-a_min, a_max) * h;
    wanted.min(hard).max(v - a_min * h).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input(s: f64, v: f64) -> FollowInput {
        FollowInput {
            s,
            v,
            h: 0.05,
            a_max: 2.0,
            a_min: 4.5,
            desired_speed: 19.45,
            leader: None,
            stop_line: None,
            entry_speed_limit: None,
        }
    }

    #[test]
    fn free_road_accelerates_at_a_max() {
        let v = next_speed(&input(-40.0, 10.0));
        assert!((v - 10.1).abs() < 1e-12);
    }

    #[test]
    fn stops_before_line() {
        let (mut s, mut v) = (-40.0, 18.0);
        for _ in 0..2000 {
            let inp = FollowInput {
                stop_line: Some(0.0),
                ..input(s, v)
            };
            let nv = next_speed(&inp);
            s = advance_position(s, v, nv, 0.05, 4.5);
            v = nv;
            assert!(s <= 1e-9);
        }
        assert!(v < 1e-6 && s > -1.0);
    }

    #[test]
    fn never_closer_than_standstill_gap_to_braking_leader() {
        let (mut s, mut v) = (-45.0, 19.0);
        let (mut ls, mut lv) = (-20.0f64, 19.0f64);
        for _ in 0..400 {
            let nlv = (lv - 4.5 * 0.05).max(0.0);
            ls += (lv + nlv) / 2.0 * 0.05;
            lv = nlv;
            let inp = FollowInput {
                leader: Some(Leader {
                    rear_next: ls - 5.0,
                    v_next: lv,
                }),
                ..input(s, v)
            };
            let nv = next_speed(&inp);
            s += (v + nv) / 2.0 * 0.05;
            v = nv;
            assert!(ls - 5.0 - s >= STANDSTILL_GAP - 1e-6);
        }
    }
}
