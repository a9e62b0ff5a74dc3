use thiserror::Error;

use crate::layout::RouteId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, PartialEq)]
pub enum Error {
    #[error("invalid layout parameter: {0}")]
    InvalidLayout(String),

    #[error(
        "communication distance {comm_distance:.2} m is shorter than the stopping distance {stopping_distance:.2} m"
    )]
    CommRegionTooShort {
        comm_distance: f64,
        stopping_distance: f64,
    },

    #[error("unknown route id {0:?}")]
    UnknownRoute(RouteId),

    #[error("invalid vehicle spec: {0}")]
    InvalidVehicle(String),

    #[error("invalid motion request: {0}")]
    InvalidMotion(String),

    #[error("empty trajectory")]
    EmptyTrajectory,

    #[error("request from vehicle {vin} rejected: {reason}")]
    RequestRejected { vin: u64, reason: String },

    #[error("oversaturated demand: critical flow ratio sum {0:.3} >= 1")]
    Oversaturated(f64),

    #[error("invalid signal demand: {0}")]
    InvalidDemand(String),

    #[error("invalid scenario config: {0}")]
    InvalidConfig(String),

    #[error("safety violation at t = {t:.2} s between vehicles {a} and {b}")]
    SafetyViolation { t: f64, a: u64, b: u64 },

    #[error("approach spacing violation at t = {t:.2} s: vehicle {follower} is {gap:.3} m behind {leader}")]
    SpacingViolation {
        t: f64,
        leader: u64,
        follower: u64,
        gap: f64,
    },

    #[error("duplicate trip record for vehicle {0}")]
    DuplicateTrip(u64),

    #[error("invalid trip for vehicle {vin}: exit {exit:.3} <= enter {enter:.3}")]
    InvalidTrip { vin: u64, enter: f64, exit: f64 },

    #[error("generated count {generated} is below crossed count {crossed}")]
    CountMismatch { generated: usize, crossed: usize },

    #[error("technique IV-D requires IV-B in an ablation cell")]
    BisectionWithoutZones,

    #[error("simulation did not drain within {0:.0} s of simulated time")]
    DidNotDrain(f64),
}
