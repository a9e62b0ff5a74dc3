use dica_core::coordinator::ComplexityModel;
use dica_core::geometry::Pose;
use dica_core::geometry::Vec2;
use dica_core::layout::{
    build_layout, Approach, LaneRef, LayoutParams, Movement, PathShape, Route, RouteId,
};
use dica_core::motion::{
    dtot_to_tss, estimated_oti, exact_oti, exact_oti_local_counted, generate_tss, tss_to_dtot,
    turn_speed_limit, Dtot, Occupancy, VehicleSpec,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 0.05;

fn line_route(length: f64) -> Route {
    let shape = PathShape::Line {
        start: Vec2::new(0.0, 0.0),
        heading: 0.0,
        length,
    };
    let lane = LaneRef {
        road: Approach::West,
        index: 1,
    };
    Route {
        id: RouteId(0),
        entry_lane: lane,
        exit_lane: lane,
        movement: Movement::Straight,
        shape,
        centerline: Vec::new(),
        total_length: length,
    }
}

fn worst_error(dtot: &Dtot, spec: &VehicleSpec) -> f64 {
    (0..dtot.len())
        .map(|k| {
            let ex = exact_oti(dtot, k);
            let est = estimated_oti(dtot, k, spec);
            (ex.lo - est.lo).abs().max((ex.hi - est.hi).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn estimate_tracks_exact_on_constant_speed() {
    let spec = VehicleSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let v = rng.gen_range(1.0..spec.v_m);
        let route = line_route(rng.gen_range(10.0..200.0));
        let tss = generate_tss(&spec, &route, 0.0, v, v, H).unwrap();
        worst = worst.max(worst_error(&tss_to_dtot(&tss, &spec).unwrap(), &spec));
    }
    assert!(worst <= 2.0 * H + 1e-9, "worst endpoint error {worst}");
}

#[test]
fn estimate_tracks_exact_on_trapezoids() {
    let spec = VehicleSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let v0 = rng.gen_range(0.0..spec.v_m);
        let cap = rng.gen_range(v0.max(1.0)..=spec.v_m);
        let route = line_route(rng.gen_range(10.0..200.0));
        let tss = generate_tss(&spec, &route, 0.0, v0, cap, H).unwrap();
        worst = worst.max(worst_error(&tss_to_dtot(&tss, &spec).unwrap(), &spec));
    }
    assert!(worst <= 4.0 * H + 1e-9, "worst endpoint error {worst}");
}

#[test]
fn estimate_tracks_exact_on_turning_routes() {
    let spec = VehicleSpec::default();
    let layout = build_layout(LayoutParams::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for m in [Movement::Left, Movement::Right] {
        let route = layout.route_for(Approach::South, m);
        let lim = turn_speed_limit(route).min(spec.v_m);
        let mut worst = 0.0f64;
        for _ in 0..200 {
            let cap = rng.gen_range(2.0..=lim);
            let v0 = rng.gen_range(0.0..=cap);
            let tss = generate_tss(&spec, route, 0.0, v0, cap, H).unwrap();
            worst = worst.max(worst_error(&tss_to_dtot(&tss, &spec).unwrap(), &spec));
        }
        assert!(
            worst <= 4.0 * H + 1e-9,
            "{m:?}: worst endpoint error {worst}"
        );
    }
}

#[test]
fn exact_interval_spans_the_nearest_clear_neighbours() {
    // centers 3 m apart with a 5 m body: O_k overlaps O_{k±1} only
    let spec = VehicleSpec::default();
    let occupancies = (0..9)
        .map(|i| Occupancy {
            t: i as f64 * H,
            rect: spec.rect_at(Pose::new(3.0 * i as f64, 0.0, 0.0)),
            index: i,
            s: 3.0 * i as f64,
            v: 3.0 / H,
        })
        .collect();
    let dtot = Dtot {
        vin: 1,
        route: RouteId(1),
        h: H,
        start_tick: 0,
        occupancies,
    };
    let iv = exact_oti(&dtot, 4);
    assert_eq!(
        (iv.lo, iv.hi),
        (dtot.occupancies[2].t, dtot.occupancies[6].t)
    );
    assert_eq!(exact_oti(&dtot, 0).lo, dtot.entry_time());
    assert_eq!(exact_oti(&dtot, 8).hi, dtot.exit_time());
}

fn layout_route() -> impl Strategy<Value = (usize, f64, f64)> {
    (0usize..12, 0.0f64..1.0, 0.05f64..1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn tss_dtot_round_trip_is_exact((r, f0, fc) in layout_route(), shift in -500i64..500) {
        let spec = VehicleSpec::default();
        let layout = build_layout(LayoutParams::default()).unwrap();
        let route = &layout.routes[r];
        let cap = turn_speed_limit(route).min(spec.v_m) * fc;
        let tss = generate_tss(&spec, route, 1.0, cap * f0, cap, H).unwrap();
        let dtot = tss_to_dtot(&tss, &spec).unwrap();
        prop_assert_eq!(dtot.len(), tss.len());
        prop_assert_eq!(&dtot_to_tss(&dtot).unwrap(), &tss);
        prop_assert_eq!(dtot_to_tss(&dtot.shifted(shift)).unwrap(), tss.shifted(shift));
    }

    #[test]
    fn local_walk_matches_full_scan((r, f0, fc) in layout_route()) {
        let spec = VehicleSpec::default();
        let layout = build_layout(LayoutParams::default()).unwrap();
        let route = &layout.routes[r];
        let cap = turn_speed_limit(route).min(spec.v_m) * fc;
        let dtot = tss_to_dtot(&generate_tss(&spec, route, 0.0, cap * f0, cap, H).unwrap(), &spec).unwrap();
        for k in 0..dtot.len() {
            let full = exact_oti(&dtot, k);
            prop_assert_eq!(exact_oti_local_counted(&dtot, k).0, full);
            prop_assert!(full.contains(dtot.occupancies[k].t));
        }
    }

    #[test]
    fn rest_start_state_count_within_bound(length in 5.0f64..300.0) {
        let spec = VehicleSpec::default();
        let tss = generate_tss(&spec, &line_route(length), 0.0, 0.0, spec.v_m, H).unwrap();
        let model = ComplexityModel {
            h: H,
            v_m: spec.v_m,
            a_max: spec.a_max,
            l_m: length + spec.length,
        };
        prop_assert!(tss.len() as f64 <= model.max_states().ceil() + 1.0, "{} > {}", tss.len(), model.max_states());
    }
}
