//! One PASS/FAIL line per acceptance criterion. Runs without the libtest
//! harness so the lines are always printed.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use dica_core::coordinator::{
    enhanced_get_cv, get_cv, ComplexityModel, CoordinatorStats, DEFAULT_PAD_STEPS,
};
use dica_core::experiment::{ablation_matrix, complexity_sweep, loglog_slope, record_calls, sweep};
use dica_core::geometry::Vec2;
use dica_core::layout::{stopping_distance, LaneRef, PathShape};
use dica_core::motion::{dtot_to_tss, generate_tss, tss_to_dtot, turn_speed_limit};
use dica_core::sim::{prepare, run_scenario, ControlMode, RunLength, ScenarioConfig, SEEDS};
use dica_core::traffic_light::SATURATION_FLOW;
use dica_core::{
    build_layout, compute_conflict_zones, estimated_oti, exact_oti, intervals_overlap,
    optimize_plan, rects_overlap, Approach, ConflictZoneTable, Coordinator, Dtot,
    IntersectionLayout, LayoutParams, Movement, OrientedRect, Pose, Request, Route, RouteId,
    Techniques, TimeInterval, VehicleSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const H: f64 = 0.05;
const VOLUMES: [u32; 5] = [100, 200, 300, 400, 500];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

/// Pairs of executed trajectories with an occupancy pair overlapping in
/// both space and exact interval.
fn space_time_conflicts(trajectories: &[Dtot]) -> usize {
    let intervals: Vec<Vec<TimeInterval>> = trajectories
        .iter()
        .map(|d| (0..d.len()).map(|k| exact_oti(d, k)).collect())
        .collect();
    let mut conflicts = 0;
    for a in 0..trajectories.len() {
        for b in a + 1..trajectories.len() {
            let (da, db) = (&trajectories[a], &trajectories[b]);
            if da.exit_time() < db.entry_time() || db.exit_time() < da.entry_time() {
                continue;
            }
            let hit = da.occupancies.iter().enumerate().any(|(i, oa)| {
                db.occupancies.iter().enumerate().any(|(j, ob)| {
                    rects_overlap(&oa.rect, &ob.rect)
                        && intervals_overlap(&intervals[a][i], &intervals[b][j])
                })
            });
            conflicts += usize::from(hit);
        }
    }
    conflicts
}

fn safety() -> Verdict {
    let cells: Vec<(u32, u64)> = VOLUMES
        .iter()
        .flat_map(|&v| SEEDS.iter().map(move |&s| (v, s)))
        .collect();
    let results: Vec<_> = cells
        .par_iter()
        .map(|&(volume, seed)| {
            let cfg = ScenarioConfig {
                volume,
                seed,
                keep_trajectories: true,
                ..Default::default()
            };
            let out = run_scenario(&cfg).expect("scenario runs");
            (
                out.trajectories.len(),
                space_time_conflicts(&out.trajectories),
                out.report.distances.clone(),
            )
        })
        .collect();
    let checked: usize = results.iter().map(|r| r.0).sum();
    let conflicts: usize = results.iter().map(|r| r.1).sum();
    let nonpositive: u64 = results.iter().map(|r| r.2.nonpositive).sum();
    let samples: u64 = results.iter().map(|r| r.2.samples).sum();
    let min = results
        .iter()
        .filter_map(|r| r.2.min)
        .fold(f64::INFINITY, f64::min);
    verdict(
        conflicts == 0 && nonpositive == 0 && samples > 0,
        format!("{} runs, {checked} trajectories, conflicts={conflicts}, distance samples={samples}, <=0 m: {nonpositive}, min={min:.2} m", cells.len()),
    )
}

fn liveness() -> Verdict {
    let cfg = ScenarioConfig {
        volume: 500,
        run: RunLength::Vehicles(1000),
        ..Default::default()
    };
    let out = run_scenario(&cfg).expect("drain run");
    let r = &out.report;
    let waiting = r.waiting.last().unwrap_or(f64::NAN);
    verdict(
        r.generated == 1000 && r.crossed == 1000 && waiting == 0.0 && r.max_confirmation_wait <= 300.0,
        format!(
            "generated={} crossed={} final waiting={waiting} max comm->confirm wait={:.1} s (<= 300), sim time {:.0} s",
            r.generated, r.crossed, r.max_confirmation_wait, out.sim_time
        ),
    )
}

fn fairness() -> Verdict {
    let rows = sweep(
        &ScenarioConfig::default(),
        &[ControlMode::Enhanced],
        &VOLUMES,
        &SEEDS,
        true,
    )
    .expect("sweep");
    let gaps: Vec<(u32, f64)> = rows
        .iter()
        .map(|r| {
            let a = &r.averaged;
            (
                r.volume,
                (a.minor_avg_trip_time - a.major_avg_trip_time).abs() / a.major_avg_trip_time,
            )
        })
        .collect();
    let worst = gaps.iter().map(|g| g.1).fold(0.0, f64::max);
    let list: Vec<String> = gaps
        .iter()
        .map(|(v, g)| format!("{v}:{:.1}%", g * 100.0))
        .collect();
    verdict(
        worst <= 0.15,
        format!("|minor-major|/major by volume {} (<= 15%)", list.join(" ")),
    )
}

fn micro_request(
    layout: &IntersectionLayout,
    vin: u64,
    route: RouteId,
    tick: i64,
    frac: f64,
) -> Request {
    let spec = VehicleSpec::with_vin(vin);
    let r = layout.route(route).unwrap();
    let cap = turn_speed_limit(r).min(spec.v_m);
    let tss = generate_tss(&spec, r, tick as f64 * H, cap * frac, cap, H).unwrap();
    Request { vin, spec, tss }
}

fn submit(c: &mut Coordinator, req: Request) -> f64 {
    let lane = c.layout().route(req.tss.route).unwrap().entry_lane;
    let vin = req.vin;
    c.heads().arrive(vin, lane);
    let resp = c.process_request(req).unwrap();
    c.heads().entered(vin);
    resp.tss.entry_time()
}

fn candidate_equivalence() -> Verdict {
    let layout = Arc::new(build_layout(LayoutParams::default()).unwrap());
    let zones: Arc<ConflictZoneTable> = Arc::new(compute_conflict_zones(&layout, 5.0, 1.8, 5.0));
    let pad = DEFAULT_PAD_STEPS * H;
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let (mut compared, mut nonempty, mut set_mismatch) = (0usize, 0usize, 0usize);
    let mut worst_entry = 0.0f64;
    for _ in 0..200 {
        let n = rng.gen_range(2..=5);
        let stream: Vec<Request> = (0..n)
            .map(|vin| {
                let route = RouteId(rng.gen_range(0..12));
                micro_request(
                    &layout,
                    vin as u64,
                    route,
                    rng.gen_range(20..80),
                    rng.gen_range(0.2..1.0),
                )
            })
            .collect();
        let new = |t| Coordinator::new(layout.clone(), zones.clone(), (5.0, 1.8), t, H).unwrap();
        let (mut base, mut enh) = (new(Techniques::BASELINE), new(Techniques::ENHANCED));
        for req in stream {
            let dtot = tss_to_dtot(&req.tss, &req.spec).unwrap();
            let vins = |c: &[dica_core::coordinator::ConflictCandidate]| {
                c.iter().map(|x| x.vin).collect::<BTreeSet<_>>()
            };
            let plain = vins(&get_cv(
                base.confirmed(),
                &dtot,
                &mut CoordinatorStats::default(),
            ));
            let fast = vins(&enhanced_get_cv(
                base.confirmed(),
                &dtot,
                &req.spec,
                &zones,
                Techniques::ENHANCED,
                pad,
                &mut CoordinatorStats::default(),
            ));
            compared += 1;
            nonempty += usize::from(!plain.is_empty());
            set_mismatch += usize::from(plain != fast);
            let a = submit(&mut base, req.clone());
            let b = submit(&mut enh, req);
            worst_entry = worst_entry.max((a - b).abs());
        }
    }
    verdict(
        set_mismatch == 0 && worst_entry <= 4.0 * H + 1e-9,
        format!(
            "200 scenarios, {compared} searches ({nonempty} with conflicts), candidate-set mismatches={set_mismatch}, worst entry-time gap={worst_entry:.3} s (<= {:.2})",
            4.0 * H
        ),
    )
}

fn line_route(length: f64) -> Route {
    let lane = LaneRef {
        road: Approach::West,
        index: 1,
    };
    Route {
        id: RouteId(0),
        entry_lane: lane,
        exit_lane: lane,
        movement: Movement::Straight,
        shape: PathShape::Line {
            start: Vec2::new(0.0, 0.0),
            heading: 0.0,
            length,
        },
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

fn oti_estimation() -> Verdict {
    let spec = VehicleSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let (mut constant, mut trapezoid) = (0.0f64, 0.0f64);
    for _ in 0..500 {
        let v = rng.gen_range(1.0..spec.v_m);
        let tss =
            generate_tss(&spec, &line_route(rng.gen_range(10.0..200.0)), 0.0, v, v, H).unwrap();
        constant = constant.max(worst_error(&tss_to_dtot(&tss, &spec).unwrap(), &spec));
    }
    for _ in 0..500 {
        let v0 = rng.gen_range(0.0..spec.v_m);
        let cap = rng.gen_range(v0.max(1.0)..=spec.v_m);
        let tss = generate_tss(
            &spec,
            &line_route(rng.gen_range(10.0..200.0)),
            0.0,
            v0,
            cap,
            H,
        )
        .unwrap();
        trapezoid = trapezoid.max(worst_error(&tss_to_dtot(&tss, &spec).unwrap(), &spec));
    }
    verdict(
        constant <= 2.0 * H + 1e-9 && trapezoid <= 4.0 * H + 1e-9,
        format!(
            "worst endpoint error: constant speed {constant:.3} s (<= {:.2}), trapezoidal {trapezoid:.3} s (<= {:.2}), 500 profiles each",
            2.0 * H,
            4.0 * H
        ),
    )
}

fn complexity() -> Verdict {
    let lengths: Vec<f64> = (1..=10).map(|i| 20.0 * i as f64).collect();
    let points = complexity_sweep(&lengths, 4, H).expect("complexity sweep");
    let base = loglog_slope(
        &points
            .iter()
            .map(|p| (p.n_bar, p.baseline_ops as f64))
            .collect::<Vec<_>>(),
    );
    let enh = loglog_slope(
        &points
            .iter()
            .map(|p| (p.n_bar, p.enhanced_ops as f64))
            .collect::<Vec<_>>(),
    );

    let cfg = ScenarioConfig {
        volume: 300,
        seed: SEEDS[0],
        ..Default::default()
    };
    let prepared = prepare(&cfg).unwrap();
    let calls = record_calls(&cfg, &prepared).unwrap();
    let cells: Vec<Techniques> = [
        "",
        "IV-A",
        "IV-C",
        "IV-B,IV-D",
        "IV-B",
        "IV-A,IV-B,IV-C,IV-D",
    ]
    .iter()
    .map(|s| Techniques::parse(s).unwrap())
    .collect();
    let results = ablation_matrix(&calls, &prepared, &cfg, &cells, 5).unwrap();
    let t: Vec<f64> = results.iter().map(|r| r.wall_seconds).collect();
    let (baseline, a, c, bd, b, enhanced) = (t[0], t[1], t[2], t[3], t[4], t[5]);
    let ratio = enhanced / baseline;
    let ordered = a < c && c < bd && bd < b && b < baseline;
    let slopes_ok = (base - 3.0).abs() <= 0.4 && enh <= 1.4;
    verdict(
        slopes_ok && ratio <= 0.10 && ordered,
        format!(
            "slope baseline {base:.3} (3.0 +- 0.4), enhanced {enh:.3} (<= 1.4); wall enhanced/baseline {:.1}% (<= 10%); ablation s: A {a:.3} < C {c:.3} < B+D {bd:.3} < B {b:.3} < baseline {baseline:.3} {}",
            ratio * 100.0,
            if ordered { "holds" } else { "VIOLATED" }
        ),
    )
}

fn throughput() -> Verdict {
    let rows = sweep(
        &ScenarioConfig::default(),
        &[ControlMode::Enhanced, ControlMode::Tlight],
        &VOLUMES,
        &SEEDS,
        false,
    )
    .expect("sweep");
    let eatt = |mode: ControlMode, v: u32| {
        rows.iter()
            .find(|r| r.mode == mode && r.volume == v)
            .map(|r| r.averaged.effective_avg_trip_time)
            .unwrap()
    };
    let gap = |v| eatt(ControlMode::Tlight, v) - eatt(ControlMode::Enhanced, v);
    let lower = VOLUMES[..4].iter().all(|&v| gap(v) > 0.0);
    let narrows = gap(500) < gap(400);
    let list: Vec<String> = VOLUMES
        .iter()
        .map(|&v| {
            format!(
                "{v}: {:.2}/{:.2}",
                eatt(ControlMode::Enhanced, v),
                eatt(ControlMode::Tlight, v)
            )
        })
        .collect();
    verdict(
        lower && narrows,
        format!(
            "effective avg trip time DICA/TL {}; gap 400 {:.2} s -> 500 {:.2} s",
            list.join(", "),
            gap(400),
            gap(500)
        ),
    )
}

fn sig4(x: f64) -> String {
    format!("{x:.3e}")
}

fn formulas() -> Verdict {
    let mut worst = 0.0f64;
    for i in 0..=85 {
        let y = 0.05 + 0.01 * i as f64;
        let q = y / 4.0 * SATURATION_FLOW;
        let plan = optimize_plan(&[q; 12], SATURATION_FLOW).unwrap();
        let expected = 1.5 * 16.0 * (1.8 * y).exp();
        worst = worst.max((plan.cycle - expected).abs() / expected);
    }
    let model = |l_m| ComplexityModel {
        h: H,
        v_m: 19.45,
        a_max: 2.0,
        l_m,
    };
    let short = model(40.0).max_states();
    let short_oracle = (2.0f64 * 40.0 / 2.0).sqrt() / H;
    let long = model(200.0).max_states();
    let long_oracle = 200.0 / (19.45 * H) + 19.45 / (2.0 * 2.0 * H);
    let stop = stopping_distance(19.45, 4.5);
    let pass = worst <= 1e-9
        && sig4(short) == sig4(short_oracle)
        && sig4(long) == sig4(long_oracle)
        && format!("{stop:.2}") == "42.03";
    verdict(
        pass,
        format!(
            "C0 max rel error {worst:.1e} over Y in [0.05, 0.90]; N_m short branch {short:.2} (oracle {short_oracle:.2}), long branch {long:.2} (oracle {long_oracle:.2}); stopping distance {stop:.2} m"
        ),
    )
}

fn property_suites() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let mut geometry_bad = 0;
    for _ in 0..1000 {
        let mut rect = || {
            OrientedRect::new(
                Pose::new(
                    rng.gen_range(-6.0..6.0),
                    rng.gen_range(-6.0..6.0),
                    rng.gen_range(-3.2..3.2),
                ),
                rng.gen_range(0.5..6.0),
                rng.gen_range(0.5..3.0),
            )
        };
        let (a, b) = (rect(), rect());
        // a point strictly inside both proves overlap
        let shared = (0..=20).any(|i| {
            (0..=20).any(|j| {
                let c = a.corners();
                let u = i as f64 / 20.0;
                let top = c[0] + (c[1] - c[0]) * u;
                let bottom = c[3] + (c[2] - c[3]) * u;
                let p = top + (bottom - top) * (j as f64 / 20.0);
                let d = p - b.center.position();
                let (s, co) = b.center.theta.sin_cos();
                let (x, y) = (d.x * co + d.y * s, -d.x * s + d.y * co);
                x.abs() < b.length / 2.0 - 1e-6 && y.abs() < b.width / 2.0 - 1e-6
            })
        });
        if shared && !rects_overlap(&a, &b) {
            geometry_bad += 1;
        }
    }

    let cfg = ScenarioConfig {
        run: RunLength::Seconds(120.0),
        volume: 400,
        trace: true,
        ..Default::default()
    };
    let first = run_scenario(&cfg).unwrap().trace.to_jsonl();
    let deterministic = first == run_scenario(&cfg).unwrap().trace.to_jsonl();

    let layout = build_layout(LayoutParams::default()).unwrap();
    let spec = VehicleSpec::default();
    let mut trip_bad = 0;
    for _ in 0..200 {
        let route = &layout.routes[rng.gen_range(0..12)];
        let cap = turn_speed_limit(route).min(spec.v_m) * rng.gen_range(0.1..1.0);
        let tss = generate_tss(&spec, route, 1.0, cap * rng.gen_range(0.0..1.0), cap, H).unwrap();
        if dtot_to_tss(&tss_to_dtot(&tss, &spec).unwrap()).unwrap() != tss {
            trip_bad += 1;
        }
    }
    verdict(
        geometry_bad == 0 && deterministic && trip_bad == 0,
        format!(
            "SAT vs point sampling: {geometry_bad}/1000 disagreements; same-seed traces identical: {deterministic} ({} bytes); TSS/DTOT round-trip failures: {trip_bad}/200 (full suites in geometry_oracles, motion_oracles, sim_scenarios)",
            first.len()
        ),
    )
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("safety oracle", safety),
        ("liveness", liveness),
        ("fairness", fairness),
        ("enhanced equals baseline candidates", candidate_equivalence),
        ("interval estimation", oti_estimation),
        ("complexity scaling", complexity),
        ("throughput comparison", throughput),
        ("formula checks", formulas),
        ("property suites", property_suites),
    ];
    let started = Instant::now();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let v = check();
        failed += usize::from(!v.pass);
        println!(
            "criterion {} ({name}): {} [{:.1} s] {}",
            i + 1,
            if v.pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64(),
            v.detail
        );
    }
    println!(
        "acceptance: {} of 9 passed in {:.1} s",
        9 - failed,
        started.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
