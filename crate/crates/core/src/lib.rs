//! Intersection coordination over discrete-time occupancy trajectories.
//!
//! The crate covers the full stack: rectangle/interval primitives, the
//! four-way layout, vehicle kinematics, the coordinator in baseline and
//! enhanced form, a fixed-cycle signal baseline, a discrete-time simulator
//! and its metrics, plus the experiment harness used by the CLI and benches.

pub mod coordinator;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod layout;
pub mod metrics;
pub mod motion;
pub mod sim;
pub mod trace;
pub mod traffic_light;

pub use coordinator::{Coordinator, CoordinatorStats, Request, Response, Techniques};
pub use error::{Error, Result};
pub use geometry::{
    intervals_overlap, rect_distance, rects_overlap, OrientedRect, Pose, TimeInterval, Vec2,
};
pub use layout::{
    build_layout, compute_conflict_zones, route_compatible, Approach, ConflictZoneTable,
    IntersectionLayout, LayoutParams, Movement, Route, RouteId,
};
pub use motion::{
    dtot_to_tss, estimated_oti, exact_oti, generate_tss, tss_to_dtot, Dtot, Occupancy, TimedState,
    Tss, VehicleSpec,
};
pub use traffic_light::{optimize_plan, signal_state, SignalPlan, SignalState};
