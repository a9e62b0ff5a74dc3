//! Vehicle kinematics: speed profiles, timed state sequences (TSS), their
//! occupancy trajectories (DTOT) and occupancy time intervals.
//!
//! All times are integer multiples of the sampling period `h`. Sequences store
//! the tick of their first sample, so shifting by whole ticks never
//! accumulates floating-point drift.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{rects_overlap, OrientedRect, Pose, TimeInterval};
use crate::layout::{Route, RouteId};

/// Maximum allowed speed, 70 km/h as the reference setup evaluates it.
pub const DEFAULT_V_MAX: f64 = 19.45;
/// Lateral acceleration limit used to cap speeds on turning arcs.
pub const LATERAL_ACCEL: f64 = 2.5;
/// Speeds below this are treated as standing still.
pub const MIN_SPEED: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleSpec {
    pub vin: u64,
    pub length: f64,
    pub width: f64,
    pub a_max: f64,
    /// Maximum deceleration, as a positive magnitude.
    pub a_min: f64,
    pub v_m: f64,
}

impl VehicleSpec {
    pub fn with_vin(vin: u64) -> Self {
        Self {
            vin,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("length", self.length),
            ("width", self.width),
            ("a_max", self.a_max),
            ("a_min", self.a_min),
            ("v_m", self.v_m),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidVehicle(format!(
                    "{name} must be > 0, got {value}"
                )));
            }
        }
        Ok(())
    }

    pub fn rect_at(&self, pose: Pose) -> OrientedRect {
        OrientedRect::new(pose, self.length, self.width)
    }
}

impl Default for VehicleSpec {
    fn default() -> Self {
        Self {
            vin: 0,
            length: 5.0,
            width: 1.8,
            a_max: 2.0,
            a_min: 4.5,
            v_m: DEFAULT_V_MAX,
        }
    }
}

/// Comfortable speed limit on a route; unbounded on straight routes.
pub fn turn_speed_limit(route: &Route) -> f64 {
    route
        .turn_radius()
        .map_or(f64::INFINITY, |r| (LATERAL_ACCEL * r).sqrt())
}

/// One constant-acceleration piece of a speed profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub t0: f64,
    pub duration: f64,
    pub s0: f64,
    pub v0: f64,
    pub accel: f64,
}

impl Segment {
    fn end_t(&self) -> f64 {
        self.t0 + self.duration
    }

    fn end_v(&self) -> f64 {
        self.v0 + self.accel * self.duration
    }

    fn end_s(&self) -> f64 {
        self.s0 + self.v0 * self.duration + 0.5 * self.accel * self.duration * self.duration
    }
}

/// Piecewise constant-acceleration motion along a path; after the last
/// segment the vehicle cruises at the final speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedProfile {
    pub segments: Vec<Segment>,
}

impl SpeedProfile {
    /// Builds a profile from `(duration, accel)` pieces.
    pub fn from_pieces(t0: f64, s0: f64, v0: f64, pieces: &[(f64, f64)]) -> Self {
        let mut segments = Vec::with_capacity(pieces.len().max(1));
        let (mut t, mut s, mut v) = (t0, s0, v0);
        for &(duration, accel) in pieces {
            if duration <= 0.0 {
                continue;
            }
            let seg = Segment {
                t0: t,
                duration,
                s0: s,
                v0: v,
                accel,
            };
            t = seg.end_t();
            s = seg.end_s();
            v = seg.end_v().max(0.0);
            segments.push(seg);
        }
        if segments.is_empty() {
            segments.push(Segment {
                t0,
                duration: 0.0,
                s0,
                v0,
                accel: 0.0,
            });
        }
        Self { segments }
    }

    fn segment_at(&self, t: f64) -> &Segment {
        let idx = self.segments.partition_point(|seg| seg.end_t() <= t);
        &self.segments[idx.min(self.segments.len() - 1)]
    }

    /// `(s, v)` at time `t`.
    pub fn state_at(&self, t: f64) -> (f64, f64) {
        let first = &self.segments[0];
        if t <= first.t0 {
            return (first.s0 - first.v0 * (first.t0 - t), first.v0);
        }
        let last = self.segments.last().unwrap();
        if t >= last.end_t() {
            let v = last.end_v().max(0.0);
            return (last.end_s() + v * (t - last.end_t()), v);
        }
        let seg = self.segment_at(t);
        let dt = t - seg.t0;
        (
            seg.s0 + seg.v0 * dt + 0.5 * seg.accel * dt * dt,
            (seg.v0 + seg.accel * dt).max(0.0),
        )
    }

    pub fn final_speed(&self) -> f64 {
        self.segments.last().unwrap().end_v().max(0.0)
    }
}

/// Profile that changes speed from `v0` toward `target` (accelerating at
/// `a_up` or braking at `a_down`) and then holds it.
pub fn approach_speed(
    t0: f64,
    s0: f64,
    v0: f64,
    target: f64,
    a_up: f64,
    a_down: f64,
) -> SpeedProfile {
    let (rate, accel) = if target >= v0 {
        (a_up, a_up)
    } else {
        (a_down, -a_down)
    };
    let duration = (target - v0).abs() / rate;
    SpeedProfile::from_pieces(t0, s0, v0, &[(duration, accel)])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedState {
    pub t: f64,
    /// Center of the vehicle.
    pub pose: Pose,
    /// Front-bumper arc length along the route.
    pub s: f64,
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tss {
    pub route: RouteId,
    pub h: f64,
    /// Tick of `states[0]`; `states[k].t == (start_tick + k) * h`.
    pub start_tick: i64,
    pub states: Vec<TimedState>,
}

impl Tss {
    pub fn entry_time(&self) -> f64 {
        self.states[0].t
    }

    pub fn exit_time(&self) -> f64 {
        self.states.last().map_or(0.0, |s| s.t)
    }

    pub fn entry_speed(&self) -> f64 {
        self.states[0].v
    }

    pub fn exit_speed(&self) -> f64 {
        self.states.last().map_or(0.0, |s| s.v)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// State at an absolute tick, if the sequence covers it.
    pub fn state_at_tick(&self, tick: i64) -> Option<&TimedState> {
        let k = tick - self.start_tick;
        if k < 0 {
            return None;
        }
        self.states.get(k as usize)
    }

    pub fn shifted(&self, ticks: i64) -> Tss {
        let start_tick = self.start_tick + ticks;
        let states = self
            .states
            .iter()
            .enumerate()
            .map(|(k, st)| TimedState {
                t: tick_time(start_tick + k as i64, self.h),
                ..*st
            })
            .collect();
        Tss {
            route: self.route,
            h: self.h,
            start_tick,
            states,
        }
    }
}

pub fn tick_time(tick: i64, h: f64) -> f64 {
    tick as f64 * h
}

/// Nearest tick to `t`, rejecting times that are not on the grid.
pub fn tick_of(t: f64, h: f64) -> Result<i64> {
    let tick = (t / h).round();
    if (tick * h - t).abs() > 1e-6 * h.max(1.0) {
        return Err(Error::InvalidMotion(format!(
            "time {t} is not a multiple of the step {h}"
        )));
    }
    Ok(tick as i64)
}

/// Samples a speed profile along a route from `start_tick` until the vehicle
/// has fully left the route.
pub fn sample_profile(
    spec: &VehicleSpec,
    route: &Route,
    profile: &SpeedProfile,
    start_tick: i64,
    h: f64,
) -> Result<Tss> {
    let end = route.total_length + spec.length;
    let mut states = Vec::new();
    let mut k = 0i64;
    loop {
        let t = tick_time(start_tick + k, h);
        let (s, v) = profile.state_at(t);
        states.push(TimedState {
            t,
            pose: route.vehicle_pose(s, spec.length),
            s,
            v,
        });
        if s >= end {
            break;
        }
        if v < 1e-9 && profile.final_speed() < 1e-9 && t >= profile.segments.last().unwrap().end_t()
        {
            return Err(Error::InvalidMotion(
                "profile comes to rest before clearing the route".into(),
            ));
        }
        k += 1;
    }
    Ok(Tss {
        route: route.id,
        h,
        start_tick,
        states,
    })
}

/// Fastest-feasible crossing: from `entry_speed` at the entrance line, move
/// toward `min(speed_cap, turn limit)` and hold it until fully clear.
///
/// If the entry speed is above the turn limit the vehicle brakes at `a_min`
/// right after the entrance line.
pub fn generate_tss(
    spec: &VehicleSpec,
    route: &Route,
    entry_time: f64,
    entry_speed: f64,
    speed_cap: f64,
    h: f64,
) -> Result<Tss> {
    spec.validate()?;
    if !(h > 0.0) {
        return Err(Error::InvalidMotion(format!("step must be > 0, got {h}")));
    }
    if !(route.total_length > 0.0) {
        return Err(Error::EmptyTrajectory);
    }
    let eps = 1e-9;
    if !(entry_speed >= 0.0 && entry_speed <= speed_cap + eps && speed_cap <= spec.v_m + eps) {
        return Err(Error::InvalidMotion(format!(
            "need 0 <= entry speed ({entry_speed}) <= cap ({speed_cap}) <= v_m ({})",
            spec.v_m
        )));
    }
    let start_tick = tick_of(entry_time, h)?;
    capped_tss(spec, route, start_tick, h, entry_speed, speed_cap)
}

/// Like [`generate_tss`] but the cap may sit below the entry speed, in which
/// case the vehicle brakes at `a_min` from the entrance line.
pub fn capped_tss(
    spec: &VehicleSpec,
    route: &Route,
    start_tick: i64,
    h: f64,
    entry_speed: f64,
    speed_cap: f64,
) -> Result<Tss> {
    let target = speed_cap.min(turn_speed_limit(route)).min(spec.v_m);
    if target < MIN_SPEED {
        return Err(Error::InvalidMotion(format!(
            "speed cap {target} too low to cross"
        )));
    }
    let t0 = tick_time(start_tick, h);
    let profile = approach_speed(t0, 0.0, entry_speed, target, spec.a_max, spec.a_min);
    sample_profile(spec, route, &profile, start_tick, h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Occupancy {
    pub t: f64,
    pub rect: OrientedRect,
    pub index: usize,
    pub s: f64,
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dtot {
    pub vin: u64,
    pub route: RouteId,
    pub h: f64,
    pub start_tick: i64,
    pub occupancies: Vec<Occupancy>,
}

impl Dtot {
    pub fn entry_time(&self) -> f64 {
        self.occupancies[0].t
    }

    pub fn exit_time(&self) -> f64 {
        self.occupancies.last().map_or(0.0, |o| o.t)
    }

    pub fn len(&self) -> usize {
        self.occupancies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupancies.is_empty()
    }

    pub fn end_tick(&self) -> i64 {
        self.start_tick + self.occupancies.len() as i64 - 1
    }

    pub fn exit_speed(&self) -> f64 {
        self.occupancies.last().map_or(0.0, |o| o.v)
    }

    /// All occupancy times moved by a whole number of ticks; geometry untouched.
    pub fn shift_ticks(&mut self, ticks: i64) {
        self.start_tick += ticks;
        for (k, occ) in self.occupancies.iter_mut().enumerate() {
            occ.t = tick_time(self.start_tick + k as i64, self.h);
        }
    }

    pub fn shifted(&self, ticks: i64) -> Dtot {
        let mut d = self.clone();
        d.shift_ticks(ticks);
        d
    }

    /// Index of the occupancy at an absolute tick, if covered.
    pub fn index_at_tick(&self, tick: i64) -> Option<usize> {
        let k = tick - self.start_tick;
        (k >= 0 && (k as usize) < self.occupancies.len()).then_some(k as usize)
    }
}

pub fn tss_to_dtot(tss: &Tss, spec: &VehicleSpec) -> Result<Dtot> {
    if tss.states.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let occupancies = tss
        .states
        .iter()
        .enumerate()
        .map(|(index, st)| Occupancy {
            t: st.t,
            rect: spec.rect_at(st.pose),
            index,
            s: st.s,
            v: st.v,
        })
        .collect();
    Ok(Dtot {
        vin: spec.vin,
        route: tss.route,
        h: tss.h,
        start_tick: tss.start_tick,
        occupancies,
    })
}

pub fn dtot_to_tss(dtot: &Dtot) -> Result<Tss> {
    if dtot.occupancies.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let states = dtot
        .occupancies
        .iter()
        .map(|o| TimedState {
            t: o.t,
            pose: o.rect.center,
            s: o.s,
            v: o.v,
        })
        .collect();
    Ok(Tss {
        route: dtot.route,
        h: dtot.h,
        start_tick: dtot.start_tick,
        states,
    })
}

/// Exact occupancy time interval by a full scan of the trajectory.
///
/// The lower bound is the time of the latest earlier occupancy that does not
/// overlap `O_k` (first occupancy's time if every earlier one overlaps); the
/// upper bound mirrors it. Returns the interval and the number of rectangle
/// tests performed.
pub fn exact_oti_counted(dtot: &Dtot, k: usize) -> (TimeInterval, u64) {
    let occ = &dtot.occupancies;
    let target = &occ[k].rect;
    let mut lo = occ[0].t;
    let mut hi = occ[occ.len() - 1].t;
    let mut found_hi = false;
    for (j, o) in occ.iter().enumerate() {
        if j == k {
            continue;
        }
        if !rects_overlap(&o.rect, target) {
            if j < k {
                lo = o.t;
            } else if !found_hi {
                hi = o.t;
                found_hi = true;
            }
        }
    }
    (TimeInterval::new(lo, hi), (occ.len() - 1) as u64)
}

/// Same interval as [`exact_oti_counted`], found by walking outward from `O_k`
/// to the nearest non-overlapping occupancy on each side.
pub fn exact_oti_local_counted(dtot: &Dtot, k: usize) -> (TimeInterval, u64) {
    let occ = &dtot.occupancies;
    let target = &occ[k].rect;
    let mut tests = 0;
    let mut clear = |j: usize| {
        tests += 1;
        !rects_overlap(&occ[j].rect, target)
    };
    let lo = (0..k)
        .rev()
        .find(|&j| clear(j))
        .map_or(occ[0].t, |j| occ[j].t);
    let hi = (k + 1..occ.len())
        .find(|&j| clear(j))
        .map_or(occ[occ.len() - 1].t, |j| occ[j].t);
    (TimeInterval::new(lo, hi), tests)
}

pub fn exact_oti(dtot: &Dtot, k: usize) -> TimeInterval {
    exact_oti_counted(dtot, k).0
}

/// Extra travel beyond one vehicle length needed to clear an occupancy on a
/// curve: the sagitta of a chord one vehicle length long.
pub fn curvature_allowance(length: f64, heading_change_per_meter: f64) -> f64 {
    let curvature = heading_change_per_meter.abs();
    if curvature < 1e-9 {
        return 0.0;
    }
    let r = 1.0 / curvature;
    let half = length / 2.0;
    if half >= r {
        r
    } else {
        r - (r * r - half * half).sqrt()
    }
}

/// Time to cover `dist` starting at speed `v` with constant acceleration `a`,
/// or `None` if the vehicle stops first.
fn traverse_time(dist: f64, v: f64, a: f64) -> Option<f64> {
    if a.abs() < 1e-12 {
        return (v > 0.0).then(|| dist / v);
    }
    let disc = v * v + 2.0 * a * dist;
    if disc < 0.0 {
        return None;
    }
    let t = (disc.sqrt() - v) / a;
    (t >= 0.0).then_some(t)
}

/// O(1) estimate of the occupancy time interval from the local speed,
/// acceleration and vehicle length.
pub fn estimated_oti(dtot: &Dtot, k: usize, spec: &VehicleSpec) -> TimeInterval {
    estimated_oti_counted(dtot, k, spec).0
}

/// [`estimated_oti`] plus the number of rectangle tests spent snapping.
pub fn estimated_oti_counted(dtot: &Dtot, k: usize, spec: &VehicleSpec) -> (TimeInterval, u64) {
    let occ = &dtot.occupancies;
    let n = occ.len();
    let t_k = occ[k].t;
    if n < 2 {
        return (TimeInterval::point(t_k), 0);
    }
    let h = dtot.h;
    let dist =
        |a: usize, b: usize| (occ[b].rect.center.position() - occ[a].rect.center.position()).norm();
    let v_minus = (k > 0).then(|| dist(k - 1, k) / h);
    let v_plus = (k + 1 < n).then(|| dist(k, k + 1) / h);
    // one-sided at the ends, borrowing the next difference for the acceleration
    let (v_k, a_k) = match (v_minus, v_plus) {
        (Some(vm), Some(vp)) => ((vm + vp) / 2.0, (vp - vm) / h),
        (Some(vm), None) if k >= 2 => (vm, (vm - dist(k - 2, k - 1) / h) / h),
        (None, Some(vp)) if n >= 3 => (vp, (dist(k + 1, k + 2) / h - vp) / h),
        (Some(v), None) | (None, Some(v)) => (v, 0.0),
        (None, None) => unreachable!(),
    };
    let span = TimeInterval::new(occ[0].t, occ[n - 1].t);
    let a_k = a_k.clamp(-spec.a_min, spec.a_max);
    if v_k < MIN_SPEED && a_k < MIN_SPEED {
        return (span, 0);
    }

    let lo_k = k.saturating_sub(1);
    let hi_k = (k + 1).min(n - 1);
    let dtheta =
        crate::geometry::normalize_angle(occ[hi_k].rect.center.theta - occ[lo_k].rect.center.theta);
    let ds = dist(lo_k, hi_k);
    let turn_rate = if ds > 1e-9 { dtheta / ds } else { 0.0 };
    let l_eff = spec.length + curvature_allowance(spec.length, turn_rate);

    let window = snap_window(v_k, h);
    // forward in time: accelerate at a_k; backward: the same motion reversed
    let hi_guess = traverse_time(l_eff, v_k, a_k).unwrap_or(span.hi - t_k);
    let mut tests = 0;
    let hi = snap(
        occ,
        k,
        t_k + refine(occ, k, hi_guess, l_eff, h, 1),
        h,
        1,
        window,
        &mut tests,
    )
    .min(span.hi);
    let lo_guess = traverse_time(l_eff, v_k, -a_k).unwrap_or(t_k - span.lo);
    let lo = snap(
        occ,
        k,
        t_k - refine(occ, k, lo_guess, l_eff, h, -1),
        h,
        -1,
        window,
        &mut tests,
    )
    .max(span.lo);
    (TimeInterval::new(lo.min(t_k), hi.max(t_k)), tests)
}

/// Samples covering about [`SNAP_DISTANCE`] of travel, within fixed bounds.
fn snap_window(v: f64, h: f64) -> usize {
    ((SNAP_DISTANCE / (v * h)).ceil() as usize).clamp(8, 64)
}

/// Moves a continuous boundary estimate onto a sampled occupancy: the clear
/// (non-overlapping) sample closest to `O_k` on the `dir` side, searched
/// within `window` samples of the landing index.
fn snap(
    occ: &[Occupancy],
    k: usize,
    t: f64,
    h: f64,
    dir: i64,
    window: usize,
    tests: &mut u64,
) -> f64 {
    let n = occ.len() as i64;
    let k = k as i64;
    let w = window as i64;
    let landing = ((t - occ[0].t) / h).round() as i64;
    let landing = landing.clamp(0, n - 1);
    let mut clear = |j: i64| {
        *tests += 1;
        !rects_overlap(&occ[j as usize].rect, &occ[k as usize].rect)
    };
    let (lo, hi) = if dir > 0 {
        ((landing - w).max(k + 1), (landing + w).min(n - 1))
    } else {
        ((landing - w).max(0), (landing + w).min(k - 1))
    };
    if lo > hi {
        return t;
    }
    // walk from the landing index: inward while still clear, else outward
    let inside = |j: i64| (lo..=hi).contains(&j);
    let mut j = landing.clamp(lo, hi);
    let found = if clear(j) {
        while inside(j - dir) && clear(j - dir) {
            j -= dir;
        }
        Some(j)
    } else {
        loop {
            j += dir;
            if !inside(j) {
                break None;
            }
            if clear(j) {
                break Some(j);
            }
        }
    };
    found.map_or(t, |j| occ[j as usize].t)
}

const SNAP_DISTANCE: f64 = 1.0;

/// Center distance at which two equal rectangles, headings differing by
/// `dθ`, separate along the chord between their centers.
fn chord_clearance(a: &OrientedRect, b: &OrientedRect) -> f64 {
    let half = crate::geometry::normalize_angle(b.center.theta - a.center.theta).abs() / 2.0;
    a.length * half.cos() + a.width * half.sin()
}

/// Corrects a constant-acceleration guess `dt` with a fixed number of secant
/// steps: look up the occupancy at the guessed offset, measure how far it
/// actually is from `O_k`, and move by the remaining distance over the local
/// speed there. `dir` is +1 forward in time, -1 backward.
fn refine(occ: &[Occupancy], k: usize, mut dt: f64, l_eff: f64, h: f64, dir: i64) -> f64 {
    const STEPS: usize = 3;
    let n = occ.len() as i64;
    let center = |i: i64| occ[i as usize].rect.center.position();
    for _ in 0..STEPS {
        let room = if dir > 0 { n - 1 - k as i64 } else { k as i64 };
        if room == 0 {
            return dt;
        }
        // overshooting guesses are pulled back onto the trajectory
        let m = ((dt / h).ceil() as i64).clamp(1, room);
        let j = k as i64 + dir * m;
        let prev = j - dir;
        let local_v = (center(j) - center(prev)).norm() / h;
        if local_v < MIN_SPEED {
            return dt;
        }
        let d = (center(j) - center(k as i64)).norm();
        let target = chord_clearance(&occ[k].rect, &occ[j as usize].rect).min(l_eff);
        let next = m as f64 * h + (target - d) / local_v;
        if (next - dt).abs() < 1e-6 {
            return next;
        }
        dt = next.max(0.0);
    }
    dt
}
