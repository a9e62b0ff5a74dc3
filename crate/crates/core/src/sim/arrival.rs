//! Approach planning: reach the entrance line at a given time and speed.

use crate::motion::SpeedProfile;

/// Deceleration used when a long wait lets the vehicle brake gently.
pub const COMFORT_DECEL: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Limits {
    pub a_max: f64,
    pub a_min: f64,
    pub v_m: f64,
}

impl Limits {
    /// Time and distance to change speed from `from` to `to` at full rate.
    fn change(&self, from: f64, to: f64) -> (f64, f64, f64) {
        if to >= from {
            (
                (to - from) / self.a_max,
                (to * to - from * from) / (2.0 * self.a_max),
                self.a_max,
            )
        } else {
            (
                (from - to) / self.a_min,
                (from * from - to * to) / (2.0 * self.a_min),
                -self.a_min,
            )
        }
    }

    /// Highest speed a change-cruise-change profile may hold over `dist`.
    fn peak(&self, dist: f64, v0: f64, v_e: f64) -> f64 {
        let num = dist + v0 * v0 / (2.0 * self.a_max) + v_e * v_e / (2.0 * self.a_min);
        let den = 1.0 / (2.0 * self.a_max) + 1.0 / (2.0 * self.a_min);
        (num / den).sqrt().min(self.v_m).max(v0.max(v_e))
    }

    /// Duration of the profile that changes to `u`, cruises, then changes to
    /// `v_e`; `None` if it does not fit in `dist`.
    fn duration_via(&self, dist: f64, v0: f64, v_e: f64, u: f64) -> Option<f64> {
        let (t1, d1, _) = self.change(v0, u);
        let (t3, d3, _) = self.change(u, v_e);
        let cruise = dist - d1 - d3;
        if cruise < -1e-9 || u <= 0.0 {
            return None;
        }
        Some(t1 + t3 + cruise.max(0.0) / u)
    }

    /// Whether the entrance can be reached at exactly `v_e`.
    pub fn reachable(&self, dist: f64, v0: f64, v_e: f64) -> bool {
        let (_, d, _) = self.change(v0, v_e);
        d <= dist + 1e-9 && v_e <= self.v_m + 1e-9
    }

    /// Earliest arrival time offset over `dist` with arrival speed `v_e`.
    pub fn earliest_arrival(&self, dist: f64, v0: f64, v_e: f64) -> Option<f64> {
        if !self.reachable(dist, v0, v_e) {
            return None;
        }
        if dist <= 1e-12 {
            return Some(0.0);
        }
        let u = self.peak(dist, v0, v_e);
        self.duration_via(dist, v0, v_e, u)
    }

    /// Highest arrival speed that still allows braking to a stop first and
    /// then accelerating to it, so any later arrival time stays feasible.
    pub fn wait_tolerant_speed(&self, dist: f64, v0: f64) -> f64 {
        let room = dist - v0 * v0 / (2.0 * self.a_min);
        (2.0 * self.a_max * room.max(0.0)).sqrt().min(self.v_m)
    }

    /// Profile starting at `(t0, -dist, v0)` that reaches position 0 at
    /// `t0 + duration` with speed `v_e`, within the acceleration and speed
    /// limits; `None` if no such profile exists.
    pub fn plan(
        &self,
        t0: f64,
        dist: f64,
        v0: f64,
        v_e: f64,
        duration: f64,
    ) -> Option<SpeedProfile> {
        let fastest = self.earliest_arrival(dist, v0, v_e)?;
        if duration < fastest - 1e-9 {
            return None;
        }
        let s0 = -dist;
        if let Some(p) = self.stop_and_go(t0, dist, v0, v_e, duration) {
            return Some(p);
        }
        // change-cruise-change with cruise speed u; duration falls as u grows
        let (mut lo, mut hi) = (1e-9, self.peak(dist, v0, v_e));
        if (self.duration_via(dist, v0, v_e, hi)? - duration).abs() < 1e-12 {
            lo = hi;
        }
        for _ in 0..200 {
            if hi - lo < 1e-13 {
                break;
            }
            let mid = 0.5 * (lo + hi);
            match self.duration_via(dist, v0, v_e, mid) {
                Some(t) if t > duration => lo = mid,
                Some(_) => hi = mid,
                None => lo = mid,
            }
        }
        let u = hi;
        let total = self.duration_via(dist, v0, v_e, u)?;
        if (total - duration).abs() > 1e-6 {
            return None;
        }
        let (t1, d1, a1) = self.change(v0, u);
        let (t3, d3, a3) = self.change(u, v_e);
        let cruise = (dist - d1 - d3).max(0.0) / u;
        Some(SpeedProfile::from_pieces(
            t0,
            s0,
            v0,
            &[(t1, a1), (cruise, 0.0), (t3, a3)],
        ))
    }

    /// Highest arrival speed up to `cap` for which [`Limits::plan`] can arrive
    /// after exactly `duration`, found by bisection over the feasible set.
    pub fn max_speed_for(&self, dist: f64, v0: f64, duration: f64, cap: f64) -> Option<f64> {
        let feasible = |v_e: f64| self.plan(0.0, dist, v0, v_e, duration).is_some();
        if feasible(cap) {
            return Some(cap);
        }
        let floor = self.wait_tolerant_speed(dist, v0).min(cap);
        if !feasible(floor) {
            return None;
        }
        let (mut lo, mut hi) = (floor, cap);
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if feasible(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(lo)
    }

    /// Cruise, brake to a stop where just enough room is left to regain
    /// `v_e`, wait, then accelerate. Used when the wait is long enough.
    fn stop_and_go(
        &self,
        t0: f64,
        dist: f64,
        v0: f64,
        v_e: f64,
        duration: f64,
    ) -> Option<SpeedProfile> {
        let d_go = v_e * v_e / (2.0 * self.a_max);
        let t_go = v_e / self.a_max;
        let stop_at = dist - d_go;
        if stop_at < -1e-9 {
            return None;
        }
        let stop_at = stop_at.max(0.0);
        let (cruise, t_brake, decel) = if v0 <= 1e-12 {
            if stop_at > 1e-9 {
                return None;
            }
            (0.0, 0.0, 0.0)
        } else {
            let need = v0 * v0 / (2.0 * stop_at.max(1e-12));
            if need > self.a_min + 1e-9 {
                return None;
            }
            let b = need.max(COMFORT_DECEL).min(self.a_min);
            let x = (stop_at - v0 * v0 / (2.0 * b)).max(0.0);
            (x / v0, v0 / b, b)
        };
        let dwell = duration - cruise - t_brake - t_go;
        if dwell < 0.0 {
            return None;
        }
        Some(SpeedProfile::from_pieces(
            t0,
            -dist,
            v0,
            &[
                (cruise, 0.0),
                (t_brake, -decel),
                (dwell, 0.0),
                (t_go, self.a_max),
            ],
        ))
    }
}
