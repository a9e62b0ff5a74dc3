//! Fixtures shared by the benchmarks.

use dica_core::experiment::record_calls;
use dica_core::motion::{generate_tss, tss_to_dtot, turn_speed_limit};
use dica_core::sim::{prepare, CoordinatorCall, Prepared, ScenarioConfig};
use dica_core::{build_layout, Approach, Dtot, LayoutParams, Movement, RouteId, VehicleSpec};

pub const H: f64 = 0.05;

/// Coordinator calls of one simulated run, ready for replay.
pub struct Stream {
    pub cfg: ScenarioConfig,
    pub prepared: Prepared,
    pub calls: Vec<CoordinatorCall>,
}

pub fn recorded_stream(volume: u32, seed: u64, seconds: f64) -> Stream {
    let cfg = ScenarioConfig {
        volume,
        seed,
        run: dica_core::sim::RunLength::Seconds(seconds),
        ..Default::default()
    };
    let prepared = prepare(&cfg).expect("valid scenario");
    let calls = record_calls(&cfg, &prepared).expect("scenario runs");
    Stream {
        cfg,
        prepared,
        calls,
    }
}

/// Trajectory on `route` entering at `entry_speed` and accelerating to the
/// route's speed limit.
pub fn trajectory(approach: Approach, movement: Movement, entry_speed: f64) -> Dtot {
    let layout = build_layout(LayoutParams::default()).expect("default layout");
    let route = layout
        .route(RouteId::of(approach, movement))
        .expect("route exists");
    let spec = VehicleSpec::default();
    let cap = turn_speed_limit(route).min(spec.v_m);
    let tss =
        generate_tss(&spec, route, 1.0, entry_speed.min(cap), cap, H).expect("feasible profile");
    tss_to_dtot(&tss, &spec).expect("non-empty")
}
