//! Sweeps, technique ablation on a replayed request stream, and the
//! state-count scaling experiment.

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coordinator::{ComplexityModel, Coordinator, CoordinatorStats, Request, Techniques};
use crate::error::{Error, Result};
use crate::layout::{
    build_layout, compute_conflict_zones, route_compatible, LayoutParams, RouteId,
};
use crate::metrics::{average, AveragedReport, MetricsReport};
use crate::motion::{capped_tss, tss_to_dtot, VehicleSpec};
use crate::sim::{
    prepare, run_prepared, ControlMode, CoordinatorCall, Prepared, ScenarioConfig, World,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub mode: ControlMode,
    pub volume: u32,
    pub unbalanced: bool,
    pub reports: Vec<MetricsReport>,
    pub averaged: AveragedReport,
}

/// Runs every (mode, volume, seed) combination of `base` in parallel and
/// averages over seeds.
pub fn sweep(
    base: &ScenarioConfig,
    modes: &[ControlMode],
    volumes: &[u32],
    seeds: &[u64],
    unbalanced: bool,
) -> Result<Vec<SweepRow>> {
    let prepared = prepare(base)?;
    let cells: Vec<(ControlMode, u32)> = modes
        .iter()
        .flat_map(|&m| volumes.iter().map(move |&v| (m, v)))
        .collect();
    let jobs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| seeds.iter().map(move |&s| (c, s)))
        .collect();
    let results: Vec<Result<(usize, MetricsReport)>> = jobs
        .par_iter()
        .map(|&(c, seed)| {
            let (mode, volume) = cells[c];
            let cfg = ScenarioConfig {
                mode,
                volume,
                seed,
                unbalanced,
                ..base.clone()
            };
            run_prepared(&cfg, &prepared).map(|o| (c, o.report))
        })
        .collect();
    let mut per_cell: Vec<Vec<MetricsReport>> = vec![Vec::new(); cells.len()];
    for r in results {
        let (c, report) = r?;
        per_cell[c].push(report);
    }
    Ok(cells
        .into_iter()
        .zip(per_cell)
        .map(|((mode, volume), reports)| SweepRow {
            mode,
            volume,
            unbalanced,
            averaged: average(&reports),
            reports,
        })
        .collect())
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(
        "mode,volume,unbalanced,runs,avg_trip_time,effective_avg_trip_time,throughput,major_avg_trip_time,minor_avg_trip_time,per_run_sd,pooled_sd\n",
    );
    for r in rows {
        let a = &r.averaged;
        let _ = writeln!(
            out,
            "{},{},{},{},{:.4},{:.4},{:.6},{:.4},{:.4},{:.4},{:.4}",
            r.mode.label(),
            r.volume,
            r.unbalanced,
            a.runs,
            a.avg_trip_time,
            a.effective_avg_trip_time,
            a.throughput,
            a.major_avg_trip_time,
            a.minor_avg_trip_time,
            a.per_run_sd,
            a.pooled_sd
        );
    }
    out
}

/// Runs `cfg` (a coordinator mode) and returns its recorded coordinator calls.
pub fn record_calls(cfg: &ScenarioConfig, prepared: &Prepared) -> Result<Vec<CoordinatorCall>> {
    if cfg.mode == ControlMode::Tlight {
        return Err(Error::InvalidConfig(
            "the signal baseline makes no coordinator calls".into(),
        ));
    }
    let world = World::new(cfg.clone(), prepared.clone())?.record_calls();
    Ok(world.run()?.calls)
}

/// Feeds a recorded call stream to a fresh coordinator. Requests the
/// coordinator rejects are skipped, as they were in the original run.
pub fn replay(
    calls: &[CoordinatorCall],
    prepared: &Prepared,
    envelope: (f64, f64),
    techniques: Techniques,
    h: f64,
    pad: f64,
) -> Result<CoordinatorStats> {
    let mut c = Coordinator::new(
        prepared.layout.clone(),
        prepared.zones.clone(),
        envelope,
        techniques,
        h,
    )?
    .with_pad(pad);
    for call in calls {
        match call {
            CoordinatorCall::Arrive { vin, lane } => c.heads().arrive(*vin, *lane),
            CoordinatorCall::Entered(vin) => c.heads().entered(*vin),
            CoordinatorCall::Prune(t) => {
                c.prune(*t);
            }
            CoordinatorCall::Request(req) => match c.process_request(req.clone()) {
                Ok(_) | Err(Error::RequestRejected { .. }) => {}
                Err(e) => return Err(e),
            },
            CoordinatorCall::Cancel(vin) => {
                c.cancel(*vin);
            }
        }
    }
    Ok(c.stats().clone())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchResult {
    pub label: String,
    pub techniques: Techniques,
    pub requests: u64,
    /// Fastest of the repeated replays.
    pub wall_seconds: f64,
    pub mean_request_us: f64,
    pub total_ops: u64,
    pub pair_tests: u64,
    pub oti_exact: u64,
    pub oti_estimated: u64,
    pub bisection_steps: u64,
    pub filter_ratio: f64,
}

impl BenchResult {
    pub fn header() -> &'static str {
        "techniques,requests,wall_seconds,mean_request_us,total_ops,pair_tests,oti_exact,oti_estimated,bisection_steps,filter_ratio"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.6},{:.3},{},{},{},{},{},{:.4}",
            self.label,
            self.requests,
            self.wall_seconds,
            self.mean_request_us,
            self.total_ops,
            self.pair_tests,
            self.oti_exact,
            self.oti_estimated,
            self.bisection_steps,
            self.filter_ratio
        )
    }
}

/// Replays one request stream against each technique subset, `repeats`
/// times each, so every cell sees identical traffic.
pub fn ablation_matrix(
    calls: &[CoordinatorCall],
    prepared: &Prepared,
    cfg: &ScenarioConfig,
    cells: &[Techniques],
    repeats: usize,
) -> Result<Vec<BenchResult>> {
    let envelope = (cfg.vehicle.length, cfg.vehicle.width);
    let pad = cfg.pad_steps * cfg.h;
    let mut out = Vec::new();
    for &t in cells {
        let mut best: Option<CoordinatorStats> = None;
        for _ in 0..repeats.max(1) {
            let stats = replay(calls, prepared, envelope, t, cfg.h, pad)?;
            if best.as_ref().is_none_or(|b| stats.wall_ns < b.wall_ns) {
                best = Some(stats);
            }
        }
        let s = best.expect("at least one replay");
        out.push(BenchResult {
            label: t.label(),
            techniques: t,
            requests: s.requests,
            wall_seconds: s.wall_seconds(),
            mean_request_us: if s.requests == 0 {
                0.0
            } else {
                s.wall_ns as f64 / s.requests as f64 / 1e3
            },
            total_ops: s.total_ops(),
            pair_tests: s.pair_tests,
            oti_exact: s.oti_exact,
            oti_estimated: s.oti_estimated,
            bisection_steps: s.bisection_steps,
            filter_ratio: s.filter_ratio(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComplexityPoint {
    pub l_m: f64,
    pub n_bar: f64,
    pub blockers: usize,
    pub baseline_ops: u64,
    pub enhanced_ops: u64,
}

/// Route a requester uses in the scaling experiment: a left turn, the
/// longest route of the layout.
const PROBE_ROUTE: RouteId = RouteId(6);

/// Operation counts of one conflict search at maximum route length `l_m`.
///
/// The layout and vehicle are scaled together from the default geometry so
/// that every length scales with `l_m`. `n` vehicles on routes crossing the
/// probe route are confirmed from rest, then a rest-start requester on the
/// probe route is granted the earliest conflict-free slot. The counts are
/// those of one conflict search for that granted trajectory, which has to
/// examine every blocker in full.
pub fn complexity_point(l_m: f64, n: usize, h: f64) -> Result<ComplexityPoint> {
    let base = build_layout(LayoutParams::default())?;
    let k = l_m / base.max_route_length();
    let params = LayoutParams {
        lane_width: base.params.lane_width * k,
        ..base.params
    };
    let layout = Arc::new(build_layout(params)?);
    let unit = VehicleSpec::default();
    let (len, width) = (unit.length * k, unit.width * k);
    let zones = Arc::new(compute_conflict_zones(&layout, len, width, len));
    let spec = |vin: u64| VehicleSpec {
        vin,
        length: len,
        width,
        ..unit
    };

    let crossers: Vec<RouteId> = (0..layout.routes.len())
        .map(RouteId)
        .filter(|&r| r != PROBE_ROUTE && !route_compatible(&zones, r, PROBE_ROUTE).unwrap_or(true))
        .collect();
    if crossers.len() < n {
        return Err(Error::InvalidConfig(format!(
            "only {} crossing routes for {n} blockers",
            crossers.len()
        )));
    }

    let granted = {
        let mut c = Coordinator::new(
            layout.clone(),
            zones.clone(),
            (len, width),
            Techniques::ENHANCED,
            h,
        )?;
        for (i, &r) in crossers.iter().take(n).enumerate() {
            submit(&mut c, &layout, spec(i as u64 + 1), r, h)?;
        }
        let resp = submit(&mut c, &layout, spec(0), PROBE_ROUTE, h)?;
        tss_to_dtot(&resp, &spec(0))?
    };

    let mut ops = [0u64; 2];
    for (slot, t) in [Techniques::BASELINE, Techniques::ENHANCED]
        .into_iter()
        .enumerate()
    {
        let mut c = Coordinator::new(layout.clone(), zones.clone(), (len, width), t, h)?;
        for (i, &r) in crossers.iter().take(n).enumerate() {
            submit(&mut c, &layout, spec(i as u64 + 1), r, h)?;
        }
        let before = c.stats().total_ops();
        let hits = c.find_conflicts(&granted, &spec(0));
        if !hits.is_empty() {
            return Err(Error::InvalidMotion(
                "granted trajectory still conflicts".into(),
            ));
        }
        ops[slot] = c.stats().total_ops() - before;
    }
    let model = ComplexityModel {
        h,
        v_m: unit.v_m,
        a_max: unit.a_max,
        l_m: layout.max_route_length(),
    };
    Ok(ComplexityPoint {
        l_m: model.l_m,
        n_bar: model.max_states(),
        blockers: n,
        baseline_ops: ops[0],
        enhanced_ops: ops[1],
    })
}

fn submit(
    c: &mut Coordinator,
    layout: &crate::layout::IntersectionLayout,
    spec: VehicleSpec,
    route: RouteId,
    h: f64,
) -> Result<crate::motion::Tss> {
    let r = layout.route(route)?;
    c.heads().arrive(spec.vin, r.entry_lane);
    let tss = capped_tss(&spec, r, 0, h, 0.0, spec.v_m)?;
    let resp = c.process_request(Request {
        vin: spec.vin,
        spec,
        tss,
    })?;
    c.heads().entered(spec.vin);
    Ok(resp.tss)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let n = pts.len() as f64;
    if n < 2.0 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

pub fn complexity_sweep(lengths: &[f64], n: usize, h: f64) -> Result<Vec<ComplexityPoint>> {
    lengths
        .par_iter()
        .map(|&l| complexity_point(l, n, h))
        .collect()
}
