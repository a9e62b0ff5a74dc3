//! The four-way intersection: lanes, crossing routes and offline conflict zones.
//!
//! Each road carries three incoming lanes (index 0 is the rightmost, index 2
//! the dedicated left-turn lane) and two outgoing lanes, all `lane_width` wide.
//! The intersection region is the square spanned by the five lanes of a road.
//! Right-hand traffic. Geometry is built once for vehicles arriving from the
//! south and rotated onto the other three approaches.
//!
//! Route arc length `s` is the front-bumper position: `s = 0` puts the front
//! bumper on the entrance line, and the vehicle has fully left the route once
//! `s >= total_length + vehicle_length`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{rects_overlap, OrientedRect, Pose, Vec2};

/// Direction a vehicle arrives from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Approach {
    North,
    East,
    South,
    West,
}

impl Approach {
    pub const ALL: [Approach; 4] = [
        Approach::North,
        Approach::East,
        Approach::South,
        Approach::West,
    ];

    pub fn index(self) -> usize {
        match self {
            Approach::North => 0,
            Approach::East => 1,
            Approach::South => 2,
            Approach::West => 3,
        }
    }

    /// Counter-clockwise quarter turns from the south approach.
    fn quarter_turns(self) -> u8 {
        match self {
            Approach::South => 0,
            Approach::East => 1,
            Approach::North => 2,
            Approach::West => 3,
        }
    }

    fn from_quarter_turns(q: u8) -> Self {
        match q % 4 {
            0 => Approach::South,
            1 => Approach::East,
            2 => Approach::North,
            _ => Approach::West,
        }
    }

    pub fn rotation(self) -> f64 {
        f64::from(self.quarter_turns()) * FRAC_PI_2
    }

    /// Road a vehicle from this approach leaves on for a given movement.
    pub fn exit_road(self, movement: Movement) -> Approach {
        let q = self.quarter_turns();
        match movement {
            Movement::Right => Self::from_quarter_turns(q + 1),
            Movement::Straight => Self::from_quarter_turns(q + 2),
            Movement::Left => Self::from_quarter_turns(q + 3),
        }
    }

    /// North/South are the major roads in unbalanced scenarios.
    pub fn is_major(self) -> bool {
        matches!(self, Approach::North | Approach::South)
    }

    pub fn letter(self) -> char {
        match self {
            Approach::North => 'N',
            Approach::East => 'E',
            Approach::South => 'S',
            Approach::West => 'W',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Movement {
    Left,
    Straight,
    Right,
}

impl Movement {
    pub const ALL: [Movement; 3] = [Movement::Left, Movement::Straight, Movement::Right];

    /// Incoming lane used by this movement (0 = rightmost).
    pub fn incoming_lane(self) -> usize {
        match self {
            Movement::Right => 0,
            Movement::Straight => 1,
            Movement::Left => 2,
        }
    }

    /// Outgoing lane the movement ends in (0 = inner, 1 = curb). Every
    /// movement uses the inner lane; a curb-lane right turn would need a
    /// radius below half a car length.
    pub fn outgoing_lane(self) -> usize {
        0
    }

    fn index(self) -> usize {
        match self {
            Movement::Left => 0,
            Movement::Straight => 1,
            Movement::Right => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RouteId(pub usize);

impl RouteId {
    pub fn of(approach: Approach, movement: Movement) -> Self {
        RouteId(approach.index() * 3 + movement.index())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LaneRef {
    pub road: Approach,
    pub index: usize,
}

/// Centerline shape of a route inside the region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PathShape {
    Line {
        start: Vec2,
        heading: f64,
        length: f64,
    },
    /// `sweep` is signed: positive turns left (counter-clockwise).
    Arc {
        center: Vec2,
        radius: f64,
        start_angle: f64,
        sweep: f64,
    },
}

impl PathShape {
    fn length(&self) -> f64 {
        match *self {
            PathShape::Line { length, .. } => length,
            PathShape::Arc { radius, sweep, .. } => radius * sweep.abs(),
        }
    }

    fn pose_within(&self, s: f64) -> Pose {
        match *self {
            PathShape::Line { start, heading, .. } => {
                let p = start + Vec2::from_angle(heading) * s;
                Pose::new(p.x, p.y, heading)
            }
            PathShape::Arc {
                center,
                radius,
                start_angle,
                sweep,
            } => {
                let dir = sweep.signum();
                let phi = start_angle + dir * s / radius;
                let p = center + Vec2::from_angle(phi) * radius;
                Pose::new(p.x, p.y, phi + dir * FRAC_PI_2)
            }
        }
    }

    fn rotated(&self, angle: f64) -> PathShape {
        let rot = |v: Vec2| {
            let (s, c) = angle.sin_cos();
            Vec2::new(c * v.x - s * v.y, s * v.x + c * v.y)
        };
        match *self {
            PathShape::Line {
                start,
                heading,
                length,
            } => PathShape::Line {
                start: rot(start),
                heading: heading + angle,
                length,
            },
            PathShape::Arc {
                center,
                radius,
                start_angle,
                sweep,
            } => PathShape::Arc {
                center: rot(center),
                radius,
                start_angle: start_angle + angle,
                sweep,
            },
        }
    }
}

/// Number of centerline samples kept per route.
pub const CENTERLINE_SAMPLES: usize = 201;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Route {
    pub id: RouteId,
    pub entry_lane: LaneRef,
    pub exit_lane: LaneRef,
    pub movement: Movement,
    pub shape: PathShape,
    /// Arc-length parameterized polyline: `centerline[i]` sits at
    /// `s = i * total_length / (CENTERLINE_SAMPLES - 1)`.
    pub centerline: Vec<Pose>,
    pub total_length: f64,
}

impl Route {
    /// Centerline pose at arc length `s`; straight tangent extensions beyond both ends.
    pub fn pose_at(&self, s: f64) -> Pose {
        if s < 0.0 {
            let p0 = self.shape.pose_within(0.0);
            let q = p0.position() + p0.heading() * s;
            Pose::new(q.x, q.y, p0.theta)
        } else if s > self.total_length {
            let p1 = self.shape.pose_within(self.total_length);
            let q = p1.position() + p1.heading() * (s - self.total_length);
            Pose::new(q.x, q.y, p1.theta)
        } else {
            self.shape.pose_within(s)
        }
    }

    /// Pose of a vehicle's center when its front bumper is at `s_front`.
    pub fn vehicle_pose(&self, s_front: f64, vehicle_length: f64) -> Pose {
        self.pose_at(s_front - vehicle_length / 2.0)
    }

    pub fn turn_radius(&self) -> Option<f64> {
        match self.shape {
            PathShape::Line { .. } => None,
            PathShape::Arc { radius, .. } => Some(radius),
        }
    }

    pub fn label(&self) -> String {
        format!(
            "{}-{}",
            self.entry_lane.road.letter(),
            self.exit_lane.road.letter()
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayoutParams {
    pub lane_width: f64,
    pub comm_distance: f64,
    /// Used only for the stopping-distance feasibility check.
    pub v_max: f64,
    pub decel_max: f64,
}

impl Default for LayoutParams {
    fn default() -> Self {
        Self {
            lane_width: 3.5,
            comm_distance: 50.0,
            v_max: crate::motion::DEFAULT_V_MAX,
            decel_max: 4.5,
        }
    }
}

pub fn stopping_distance(v_max: f64, decel_max: f64) -> f64 {
    v_max * v_max / (2.0 * decel_max)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntersectionLayout {
    pub params: LayoutParams,
    /// Half side of the square intersection region centered at the origin.
    pub half_size: f64,
    pub routes: Vec<Route>,
}

impl IntersectionLayout {
    pub fn lane_width(&self) -> f64 {
        self.params.lane_width
    }

    pub fn comm_distance(&self) -> f64 {
        self.params.comm_distance
    }

    pub fn route(&self, id: RouteId) -> Result<&Route> {
        self.routes.get(id.0).ok_or(Error::UnknownRoute(id))
    }

    pub fn route_for(&self, approach: Approach, movement: Movement) -> &Route {
        &self.routes[RouteId::of(approach, movement).0]
    }

    /// Maximum route length over the layout.
    pub fn max_route_length(&self) -> f64 {
        self.routes
            .iter()
            .map(|r| r.total_length)
            .fold(0.0, f64::max)
    }

    /// Whether the rectangle touches the closed intersection region.
    pub fn rect_in_region(&self, rect: &OrientedRect) -> bool {
        let h = self.half_size;
        let region = OrientedRect::new(Pose::new(0.0, 0.0, 0.0), 2.0 * h, 2.0 * h);
        rects_overlap(rect, &region)
    }
}

/// Builds the fixed 12-route layout.
pub fn build_layout(params: LayoutParams) -> Result<IntersectionLayout> {
    let w = params.lane_width;
    if !(w.is_finite() && w > 0.0) {
        return Err(Error::InvalidLayout(format!(
            "lane width must be > 0, got {w}"
        )));
    }
    if !(params.comm_distance.is_finite() && params.comm_distance > 0.0) {
        return Err(Error::InvalidLayout(format!(
            "communication distance must be > 0, got {}",
            params.comm_distance
        )));
    }
    let stop = stopping_distance(params.v_max, params.decel_max);
    if params.comm_distance < stop {
        return Err(Error::CommRegionTooShort {
            comm_distance: params.comm_distance,
            stopping_distance: stop,
        });
    }

    let half = 2.5 * w;
    // lateral offsets in the south-approach frame (x axis)
    let incoming_x = |k: usize| half - w / 2.0 - k as f64 * w;
    let outgoing_x = |j: usize| half - 3.0 * w - w / 2.0 - j as f64 * w;

    let mut routes = Vec::with_capacity(12);
    for approach in Approach::ALL {
        for movement in Movement::ALL {
            let x0 = incoming_x(movement.incoming_lane());
            let out = outgoing_x(movement.outgoing_lane());
            let start = Vec2::new(x0, -half);
            let canonical = match movement {
                Movement::Straight => PathShape::Line {
                    start,
                    heading: FRAC_PI_2,
                    length: 2.0 * half,
                },
                // inner exit lane of the east road runs along y = out
                Movement::Right => {
                    let r = half + out;
                    PathShape::Arc {
                        center: Vec2::new(x0 + r, -half),
                        radius: r,
                        start_angle: PI,
                        sweep: -FRAC_PI_2,
                    }
                }
                // exit lane of the west road runs along y = -out
                Movement::Left => {
                    let r = half - out;
                    PathShape::Arc {
                        center: Vec2::new(x0 - r, -half),
                        radius: r,
                        start_angle: 0.0,
                        sweep: FRAC_PI_2,
                    }
                }
            };
            let shape = canonical.rotated(approach.rotation());
            let total_length = shape.length();
            let centerline = (0..CENTERLINE_SAMPLES)
                .map(|i| {
                    shape.pose_within(total_length * i as f64 / (CENTERLINE_SAMPLES - 1) as f64)
                })
                .collect();
            routes.push(Route {
                id: RouteId::of(approach, movement),
                entry_lane: LaneRef {
                    road: approach,
                    index: movement.incoming_lane(),
                },
                exit_lane: LaneRef {
                    road: approach.exit_road(movement),
                    index: movement.outgoing_lane(),
                },
                movement,
                shape,
                centerline,
                total_length,
            });
        }
    }
    routes.sort_by_key(|r| r.id);
    Ok(IntersectionLayout {
        params,
        half_size: half,
        routes,
    })
}

/// Arc-length window `[lo, hi]` (front-bumper coordinates) on one route.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZoneWindow {
    pub lo: f64,
    pub hi: f64,
}

impl ZoneWindow {
    pub fn contains(&self, s: f64) -> bool {
        self.lo <= s && s <= self.hi
    }
}

/// Precomputed conflict windows for every ordered route pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConflictZoneTable {
    n_routes: usize,
    /// `windows[a * n + b]`: window on route `a` where it can touch route `b`.
    windows: Vec<Option<ZoneWindow>>,
    pub sample_step: f64,
    pub buffer: f64,
}

impl ConflictZoneTable {
    fn check(&self, id: RouteId) -> Result<()> {
        if id.0 < self.n_routes {
            Ok(())
        } else {
            Err(Error::UnknownRoute(id))
        }
    }

    /// Window on `a` within which it may conflict with `b`; `None` when compatible.
    pub fn window(&self, a: RouteId, b: RouteId) -> Result<Option<ZoneWindow>> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.windows[a.0 * self.n_routes + b.0])
    }

    pub fn route_count(&self) -> usize {
        self.n_routes
    }
}

/// True iff no geometric conflict between the two routes is possible.
pub fn route_compatible(table: &ConflictZoneTable, a: RouteId, b: RouteId) -> Result<bool> {
    Ok(table.window(a, b)?.is_none())
}

/// Front-bumper positions sampled along a route until the vehicle has left it.
pub fn sample_fronts(route: &Route, vehicle_length: f64, step: f64) -> Vec<f64> {
    // occupancies run slightly past `total + length` (one step at top speed)
    let end = route.total_length + vehicle_length + 1.5;
    let n = (end / step).ceil() as usize;
    (0..=n).map(|i| i as f64 * step).collect()
}

/// Offline dense-sampling construction of the conflict-zone table.
///
/// Rectangles of the envelope size are placed every `step` meters along both
/// routes, inflated by `2 * step` in each dimension to cover the motion between
/// samples; the overlapping range on each route is widened by `buffer` per side.
pub fn compute_conflict_zones(
    layout: &IntersectionLayout,
    envelope_length: f64,
    envelope_width: f64,
    buffer: f64,
) -> ConflictZoneTable {
    let step = 0.1;
    let inflate = 2.0 * step;
    let n = layout.routes.len();
    let sampled: Vec<Vec<(f64, OrientedRect)>> = layout
        .routes
        .iter()
        .map(|r| {
            sample_fronts(r, envelope_length, step)
                .into_iter()
                .map(|s| {
                    let rect = OrientedRect::new(
                        r.vehicle_pose(s, envelope_length),
                        envelope_length + inflate,
                        envelope_width + inflate,
                    );
                    (s, rect)
                })
                .collect()
        })
        .collect();
    let reach = (envelope_length + inflate).hypot(envelope_width + inflate);

    let mut windows = vec![None; n * n];
    for a in 0..n {
        for b in a..n {
            let mut range_a: Option<(f64, f64)> = None;
            let mut range_b: Option<(f64, f64)> = None;
            for (sa, ra) in &sampled[a] {
                for (sb, rb) in &sampled[b] {
                    let d = ra.center.position() - rb.center.position();
                    if d.norm() > reach {
                        continue;
                    }
                    if rects_overlap(ra, rb) {
                        range_a = Some(extend(range_a, *sa));
                        range_b = Some(extend(range_b, *sb));
                    }
                }
            }
            if let (Some((alo, ahi)), Some((blo, bhi))) = (range_a, range_b) {
                windows[a * n + b] = Some(ZoneWindow {
                    lo: alo - buffer,
                    hi: ahi + buffer,
                });
                windows[b * n + a] = Some(ZoneWindow {
                    lo: blo - buffer,
                    hi: bhi + buffer,
                });
            }
        }
    }
    ConflictZoneTable {
        n_routes: n,
        windows,
        sample_step: step,
        buffer,
    }
}

fn extend(range: Option<(f64, f64)>, s: f64) -> (f64, f64) {
    match range {
        None => (s, s),
        Some((lo, hi)) => (lo.min(s), hi.max(s)),
    }
}

impl fmt::Display for RouteId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "route#{}", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout() -> IntersectionLayout {
        build_layout(LayoutParams::default()).unwrap()
    }

    #[test]
    fn twelve_routes_with_consistent_ids() {
        let l = layout();
        assert_eq!(l.routes.len(), 12);
        for (i, r) in l.routes.iter().enumerate() {
            assert_eq!(r.id, RouteId(i));
            assert_eq!(r.centerline.len(), CENTERLINE_SAMPLES);
        }
    }

    #[test]
    fn straight_length_is_region_depth() {
        let l = layout();
        for a in Approach::ALL {
            let r = l.route_for(a, Movement::Straight);
            assert!((r.total_length - 2.0 * l.half_size).abs() < 1e-12);
            assert!((r.total_length - 17.5).abs() < 1e-12);
        }
    }

    #[test]
    fn length_ordering_right_straight_left() {
        let l = layout();
        for a in Approach::ALL {
            let right = l.route_for(a, Movement::Right).total_length;
            let straight = l.route_for(a, Movement::Straight).total_length;
            let left = l.route_for(a, Movement::Left).total_length;
            assert!(
                right < straight && straight < left,
                "{right} {straight} {left}"
            );
        }
        let left = l.route_for(Approach::South, Movement::Left).total_length;
        assert!((l.max_route_length() - left).abs() < 1e-12);
    }

    #[test]
    fn short_comm_region_rejected() {
        let err = build_layout(LayoutParams {
            comm_distance: 10.0,
            ..LayoutParams::default()
        })
        .unwrap_err();
        match err {
            Error::CommRegionTooShort {
                stopping_distance, ..
            } => assert!((stopping_distance - 42.03).abs() < 0.005),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn nonpositive_lane_width_rejected() {
        assert!(build_layout(LayoutParams {
            lane_width: 0.0,
            ..LayoutParams::default()
        })
        .is_err());
    }

    #[test]
    fn routes_start_on_entrance_line_and_end_outside() {
        let l = layout();
        for r in &l.routes {
            let p0 = r.pose_at(0.0);
            let p1 = r.pose_at(r.total_length);
            let on_edge = |v: f64| (v.abs() - l.half_size).abs() < 1e-9;
            assert!(
                on_edge(p0.x) || on_edge(p0.y),
                "{} starts inside",
                r.label()
            );
            assert!(
                p1.x.abs() >= l.half_size - 1e-9 || p1.y.abs() >= l.half_size - 1e-9,
                "{} ends inside",
                r.label()
            );
        }
    }

    #[test]
    fn centerline_is_continuous_with_increasing_arc_length() {
        let l = layout();
        for r in &l.routes {
            let ds = r.total_length / (CENTERLINE_SAMPLES - 1) as f64;
            for w in r.centerline.windows(2) {
                let step = (w[1].position() - w[0].position()).norm();
                assert!(step > 0.0 && step <= ds + 1e-9);
            }
            // pose_at agrees with the stored polyline
            let mid = r.pose_at(r.total_length / 2.0);
            let stored = r.centerline[CENTERLINE_SAMPLES / 2];
            assert!((mid.position() - stored.position()).norm() < 1e-9);
        }
    }

    #[test]
    fn exit_roads_follow_turn_direction() {
        assert_eq!(Approach::South.exit_road(Movement::Right), Approach::East);
        assert_eq!(Approach::South.exit_road(Movement::Left), Approach::West);
        assert_eq!(
            Approach::North.exit_road(Movement::Straight),
            Approach::South
        );
        assert_eq!(Approach::East.exit_road(Movement::Right), Approach::North);
    }
}
