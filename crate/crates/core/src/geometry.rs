//! Oriented rectangles, poses and closed time intervals.
//!
//! Everything here is a pure function over small `Copy` values. Geometric
//! comparisons use [`EPS_GEOM`]; rectangles are closed sets, so touching
//! boundaries count as overlap.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// Tolerance for all geometric comparisons, in meters.
pub const EPS_GEOM: f64 = 1e-9;

/// Wraps an angle into `[-π, π)`.
pub fn normalize_angle(theta: f64) -> f64 {
    let wrapped = (theta + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    if wrapped >= PI {
        wrapped - 2.0 * PI
    } else {
        wrapped
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_angle(theta: f64) -> Self {
        Self::new(theta.cos(), theta.sin())
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl std::ops::Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

/// Planar position plus heading (radians, counter-clockwise from +x).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn heading(&self) -> Vec2 {
        Vec2::from_angle(self.theta)
    }

    /// Applies a rigid motion: rotate by `angle` about the origin, then translate.
    pub fn transformed(&self, angle: f64, dx: f64, dy: f64) -> Pose {
        let (s, c) = angle.sin_cos();
        Pose::new(
            c * self.x - s * self.y + dx,
            s * self.x + c * self.y + dy,
            self.theta + angle,
        )
    }
}

/// A rectangle centered on a pose, `length` along the heading and `width` across it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedRect {
    pub center: Pose,
    pub length: f64,
    pub width: f64,
}

impl OrientedRect {
    pub fn new(center: Pose, length: f64, width: f64) -> Self {
        debug_assert!(
            length > 0.0 && width > 0.0,
            "rect dimensions must be positive"
        );
        Self {
            center,
            length,
            width,
        }
    }

    /// Same pose, each dimension grown by the given amount (total, not per side).
    pub fn inflated(&self, extra_length: f64, extra_width: f64) -> Self {
        Self::new(
            self.center,
            self.length + extra_length,
            self.width + extra_width,
        )
    }

    /// Corners in counter-clockwise order starting at front-left.
    pub fn corners(&self) -> [Vec2; 4] {
        let c = self.center.position();
        let along = self.center.heading() * (self.length / 2.0);
        let across = self.center.heading().perp() * (self.width / 2.0);
        [
            c + along + across,
            c - along + across,
            c - along - across,
            c + along - across,
        ]
    }

    fn half_extent_on(&self, axis: Vec2) -> f64 {
        let h = self.center.heading();
        (self.length / 2.0) * h.dot(axis).abs() + (self.width / 2.0) * h.perp().dot(axis).abs()
    }
}

/// Closed intersection test between two oriented rectangles.
///
/// Separating-axis test over the two edge normals of each rectangle.
pub fn rects_overlap(a: &OrientedRect, b: &OrientedRect) -> bool {
    let d = b.center.position() - a.center.position();
    let ha = a.center.heading();
    let hb = b.center.heading();
    for axis in [ha, ha.perp(), hb, hb.perp()] {
        let gap = d.dot(axis).abs() - a.half_extent_on(axis) - b.half_extent_on(axis);
        if gap > EPS_GEOM {
            return false;
        }
    }
    true
}

fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    let t = if len2 > 0.0 {
        ((p - a).dot(ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p - (a + ab * t)).norm()
}

/// Minimum boundary-to-boundary distance; zero when the rectangles overlap.
///
/// For disjoint convex polygons the closest pair always involves a vertex of
/// one polygon, so vertex-to-edge distances in both directions suffice.
pub fn rect_distance(a: &OrientedRect, b: &OrientedRect) -> f64 {
    if rects_overlap(a, b) {
        return 0.0;
    }
    let ca = a.corners();
    let cb = b.corners();
    let mut best = f64::INFINITY;
    for (verts, edges) in [(&ca, &cb), (&cb, &ca)] {
        for &p in verts.iter() {
            for k in 0..4 {
                best = best.min(point_segment_distance(p, edges[k], edges[(k + 1) % 4]));
            }
        }
    }
    best
}

/// Closed time interval `[lo, hi]` in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeInterval {
    pub lo: f64,
    pub hi: f64,
}

impl TimeInterval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "interval bounds out of order: [{lo}, {hi}]");
        Self { lo, hi }
    }

    pub fn point(t: f64) -> Self {
        Self { lo: t, hi: t }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn padded(&self, pad: f64) -> Self {
        Self::new(self.lo - pad, self.hi + pad)
    }

    pub fn shifted(&self, dt: f64) -> Self {
        Self::new(self.lo + dt, self.hi + dt)
    }

    pub fn contains(&self, t: f64) -> bool {
        self.lo <= t && t <= self.hi
    }
}

/// True iff the closed intervals share at least one instant.
pub fn intervals_overlap(a: &TimeInterval, b: &TimeInterval) -> bool {
    a.lo.max(b.lo) <= a.hi.min(b.hi)
}
