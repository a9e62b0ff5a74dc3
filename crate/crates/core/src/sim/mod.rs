//! Discrete-time simulation of the intersection under either coordinator
//! mode or the signal baseline.

mod arrival;
mod config;
mod follow;
mod spawn;

use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

pub use arrival::{Limits, COMFORT_DECEL};
pub use config::{spawn_probability, ControlMode, RunLength, ScenarioConfig, SEEDS, VOLUME_TABLE};
pub use follow::{
    advance_position, next_speed, speed_bound, FollowInput, Leader, STANDSTILL_GAP, TIME_HEADWAY,
};
pub use spawn::{SpawnEvent, SpawnModel, Spawner};

use crate::coordinator::{Coordinator, CoordinatorStats, Request};
use crate::error::{Error, Result};
use crate::geometry::{rects_overlap, OrientedRect};
use crate::layout::{
    build_layout, compute_conflict_zones, route_compatible, Approach, ConflictZoneTable,
    IntersectionLayout, LaneRef, Movement, RouteId,
};
use crate::metrics::{MetricsCollector, MetricsReport};
use crate::motion::{
    capped_tss, tss_to_dtot, turn_speed_limit, Dtot, SpeedProfile, Tss, VehicleSpec, MIN_SPEED,
};
use crate::trace::{EventKind, Trace};
use crate::traffic_light::{optimize_plan, SignalPlan, SignalState, SATURATION_FLOW};

/// Unpermitted vehicles keep their front bumper this far behind the
/// entrance line.
pub const LINE_MARGIN: f64 = 0.1;
/// Extra distance beyond the stopping distance within which a vehicle may
/// take a green signal.
pub const LATCH_LOOKAHEAD: f64 = 10.0;
/// Wait before a head vehicle retries after a failed request.
pub const RETRY_DELAY: f64 = 0.5;
/// Cadence of distance and count sampling.
pub const SAMPLE_INTERVAL: f64 = 1.0;
/// Requests per dispatch before a head vehicle backs off.
pub const MAX_ATTEMPTS: usize = 4;

/// Layout and conflict zones shared by every run on the same geometry.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub layout: Arc<IntersectionLayout>,
    pub zones: Arc<ConflictZoneTable>,
}

pub fn prepare(cfg: &ScenarioConfig) -> Result<Prepared> {
    let layout = build_layout(cfg.layout)?;
    let v = &cfg.vehicle;
    let zones = compute_conflict_zones(&layout, v.length, v.width, v.length);
    Ok(Prepared {
        layout: Arc::new(layout),
        zones: Arc::new(zones),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum VehiclePhase {
    Approaching,
    /// Holds a granted trajectory or a signal permission.
    Confirmed,
    Crossing,
}

#[derive(Debug, Clone)]
struct Granted {
    approach: SpeedProfile,
    tss: Tss,
    dtot: Option<Dtot>,
}

#[derive(Debug, Clone)]
struct Vehicle {
    spec: VehicleSpec,
    road: Approach,
    route: RouteId,
    s: f64,
    v: f64,
    sigma: f64,
    phase: VehiclePhase,
    granted: Option<Granted>,
    retry_tick: i64,
}

#[derive(Debug, Clone)]
struct Pending {
    vin: u64,
    road: Approach,
    speed: f64,
}

/// One call into the coordinator, recorded so the exact same request
/// stream can be replayed against other technique subsets.
#[derive(Debug, Clone, PartialEq)]
pub enum CoordinatorCall {
    Arrive { vin: u64, lane: LaneRef },
    Entered(u64),
    Prune(f64),
    Request(Request),
    Cancel(u64),
}

enum Control {
    Dica(Box<Coordinator>),
    Signal {
        plan: SignalPlan,
        latched_on: [usize; 12],
    },
}

#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub report: MetricsReport,
    pub stats: Option<CoordinatorStats>,
    pub signal_plan: Option<SignalPlan>,
    /// Executed trajectories, when requested in the config.
    pub trajectories: Vec<Dtot>,
    pub trace: Trace,
    /// Smallest bumper-to-bumper gap seen between same-lane vehicles.
    pub min_lane_gap: f64,
    pub sim_time: f64,
    /// Coordinator calls, when recording was switched on.
    pub calls: Vec<CoordinatorCall>,
}

pub struct World {
    cfg: ScenarioConfig,
    prepared: Prepared,
    limits: Limits,
    tick: i64,
    spawn_ticks: i64,
    sample_ticks: i64,
    control: Control,
    spawner: Spawner,
    vehicles: BTreeMap<u64, Vehicle>,
    lanes: Vec<VecDeque<u64>>,
    pending: Vec<VecDeque<Pending>>,
    next_vin: u64,
    generated: usize,
    entered: usize,
    exited: usize,
    last_spawn: f64,
    metrics: MetricsCollector,
    trace: Trace,
    max_wait: f64,
    re_requests: u64,
    trajectories: Vec<Dtot>,
    min_lane_gap: f64,
    calls: Option<Vec<CoordinatorCall>>,
}

fn ticks_for(interval: f64, h: f64) -> i64 {
    ((interval / h).round() as i64).max(1)
}

impl World {
    pub fn new(cfg: ScenarioConfig, prepared: Prepared) -> Result<Self> {
        cfg.validate()?;
        if let RunLength::Vehicles(_) = cfg.run {
            if cfg.base_probability()? <= 0.0 {
                return Err(Error::InvalidConfig(
                    "a vehicle-count run needs a positive spawn probability".into(),
                ));
            }
        }
        let p = cfg.base_probability()?;
        let mut p_road = [p; 4];
        if cfg.unbalanced {
            for road in Approach::ALL {
                if !road.is_major() {
                    p_road[road.index()] = p * cfg.minor_share;
                }
            }
        }
        let v_m = cfg.vehicle.v_m;
        let model = SpawnModel {
            p_road,
            p_left: cfg.p_left,
            p_straight: cfg.p_straight,
            speed: (cfg.speed_range.0 * v_m, cfg.speed_range.1 * v_m),
        };
        let control = match cfg.mode {
            ControlMode::Tlight => {
                let mut demand = vec![0.0; 12];
                for road in Approach::ALL {
                    for (m, share) in [
                        (Movement::Left, cfg.p_left),
                        (Movement::Straight, cfg.p_straight),
                        (Movement::Right, cfg.p_right),
                    ] {
                        demand[RouteId::of(road, m).0] =
                            p_road[road.index()] / cfg.spawn_interval * share;
                    }
                }
                Control::Signal {
                    plan: optimize_plan(&demand, SATURATION_FLOW)?,
                    latched_on: [0; 12],
                }
            }
            _ => {
                let coordinator = Coordinator::new(
                    prepared.layout.clone(),
                    prepared.zones.clone(),
                    (cfg.vehicle.length, cfg.vehicle.width),
                    cfg.techniques()?,
                    cfg.h,
                )?
                .with_pad(cfg.pad_steps * cfg.h);
                Control::Dica(Box::new(coordinator))
            }
        };
        let n_routes = prepared.layout.routes.len();
        Ok(Self {
            limits: Limits {
                a_max: cfg.vehicle.a_max,
                a_min: cfg.vehicle.a_min,
                v_m,
            },
            tick: 0,
            spawn_ticks: ticks_for(cfg.spawn_interval, cfg.h),
            sample_ticks: ticks_for(SAMPLE_INTERVAL, cfg.h),
            control,
            spawner: Spawner::new(model, cfg.seed),
            vehicles: BTreeMap::new(),
            lanes: vec![VecDeque::new(); n_routes],
            pending: vec![VecDeque::new(); n_routes],
            next_vin: 1,
            generated: 0,
            entered: 0,
            exited: 0,
            last_spawn: 0.0,
            metrics: MetricsCollector::default(),
            trace: Trace::new(cfg.trace),
            max_wait: 0.0,
            re_requests: 0,
            trajectories: Vec::new(),
            min_lane_gap: f64::INFINITY,
            calls: None,
            prepared,
            cfg,
        })
    }

    /// Records every coordinator call for later replay.
    pub fn record_calls(mut self) -> Self {
        self.calls = Some(Vec::new());
        self
    }

    fn log(&mut self, call: impl FnOnce() -> CoordinatorCall) {
        if let Some(calls) = &mut self.calls {
            calls.push(call());
        }
    }

    pub fn now(&self) -> f64 {
        self.tick as f64 * self.cfg.h
    }

    pub fn generated(&self) -> usize {
        self.generated
    }

    pub fn exited(&self) -> usize {
        self.exited
    }

    /// Vehicles generated but not yet inside the intersection.
    pub fn waiting(&self) -> usize {
        self.generated - self.entered
    }

    pub fn vehicles_present(&self) -> usize {
        self.vehicles.len()
    }

    /// `(vin, front position, speed)` of every vehicle on the map.
    pub fn snapshot(&self) -> Vec<(u64, f64, f64)> {
        self.vehicles
            .iter()
            .map(|(&vin, v)| (vin, v.s, v.v))
            .collect()
    }

    pub fn coordinator(&self) -> Option<&Coordinator> {
        match &self.control {
            Control::Dica(c) => Some(c),
            Control::Signal { .. } => None,
        }
    }

    fn spawning(&self) -> bool {
        match self.cfg.run {
            RunLength::Seconds(_) => true,
            RunLength::Vehicles(n) => self.generated < n,
        }
    }

    pub fn step(&mut self) -> Result<()> {
        self.tick += 1;
        let now = self.now();
        self.advance(now)?;
        self.check_safety(now)?;
        if self.tick % self.spawn_ticks == 0 && self.spawning() {
            self.spawn(now);
        }
        self.insert_pending(now);
        if matches!(self.control, Control::Dica(_)) {
            self.dispatch_requests(now)?;
        } else {
            self.latch(now)?;
        }
        if self.tick % self.sample_ticks == 0 {
            let rects = self.region_rects();
            let rects: Vec<OrientedRect> = rects.into_iter().map(|(_, r)| r).collect();
            self.metrics.sample_intersection_distances(&rects);
            self.metrics
                .sample_counts(now, self.generated, self.exited, self.waiting());
        }
        Ok(())
    }

    fn rect_of(&self, v: &Vehicle) -> OrientedRect {
        let route = &self.prepared.layout.routes[v.route.0];
        v.spec.rect_at(route.vehicle_pose(v.s, v.spec.length))
    }

    fn region_rects(&self) -> Vec<(u64, OrientedRect)> {
        self.vehicles
            .iter()
            .filter(|(_, v)| v.s >= -1.0)
            .map(|(&vin, v)| (vin, self.rect_of(v)))
            .filter(|(_, r)| self.prepared.layout.rect_in_region(r))
            .collect()
    }

    fn check_safety(&self, now: f64) -> Result<()> {
        let rects = self.region_rects();
        for i in 0..rects.len() {
            for j in 0..i {
                if rects_overlap(&rects[i].1, &rects[j].1) {
                    return Err(Error::SafetyViolation {
                        t: now,
                        a: rects[j].0,
                        b: rects[i].0,
                    });
                }
            }
        }
        Ok(())
    }

    fn advance(&mut self, now: f64) -> Result<()> {
        let h = self.cfg.h;
        let layout = self.prepared.layout.clone();
        for r in 0..self.lanes.len() {
            let route = &layout.routes[r];
            let turn = turn_speed_limit(route);
            let end = route.total_length;
            let mut leader: Option<(u64, Leader)> = None;
            let mut gone = Vec::new();
            let order: Vec<u64> = self.lanes[r].iter().copied().collect();
            for vin in order {
                let mut veh = self.vehicles.remove(&vin).expect("lane vehicle exists");
                let (s0, v0) = (veh.s, veh.v);
                let bound = leader.map(|(_, l)| {
                    speed_bound(
                        s0,
                        v0,
                        l.rear_next - STANDSTILL_GAP,
                        l.v_next,
                        veh.spec.a_min,
                        h,
                    )
                });
                let mut next: Option<(f64, f64)> = None;
                let mut exit = false;
                let mut unsafe_plan = false;
                if let Some(g) = &veh.granted {
                    if self.tick >= g.tss.start_tick {
                        let st = g
                            .tss
                            .state_at_tick(self.tick)
                            .expect("tss covers the crossing");
                        next = Some((st.s, st.v));
                        exit = self.tick == g.tss.start_tick + g.tss.states.len() as i64 - 1;
                    } else {
                        let (s, v) = g.approach.state_at(now);
                        if bound.is_some_and(|b| v > b + 1e-6) {
                            unsafe_plan = true;
                        } else {
                            next = Some((s.min(0.0), v));
                        }
                    }
                }
                if unsafe_plan {
                    self.abandon(&mut veh, now);
                }
                let (s, v) = match next {
                    Some(sv) => sv,
                    None => {
                        let latched = veh.phase != VehiclePhase::Approaching;
                        let desired = if turn.is_finite() {
                            turn.min(veh.spec.v_m)
                        } else {
                            veh.spec.v_m
                        };
                        let v_next = next_speed(&FollowInput {
                            s: s0,
                            v: v0,
                            h,
                            a_max: veh.spec.a_max,
                            a_min: veh.spec.a_min,
                            desired_speed: desired,
                            leader: leader.map(|(_, l)| l),
                            stop_line: (!latched).then_some(-LINE_MARGIN),
                            entry_speed_limit: turn.is_finite().then_some(turn),
                        });
                        let s = advance_position(s0, v0, v_next, h, veh.spec.a_min);
                        exit = s >= end + veh.spec.length;
                        (s, v_next)
                    }
                };
                if let Some((lvin, l)) = leader {
                    let gap = l.rear_next - s;
                    if gap < -1e-9 {
                        return Err(Error::SpacingViolation {
                            t: now,
                            leader: lvin,
                            follower: vin,
                            gap,
                        });
                    }
                    if s < 0.0 {
                        self.min_lane_gap = self.min_lane_gap.min(gap);
                    }
                }
                veh.s = s;
                veh.v = v;
                if s >= 0.0 && veh.phase != VehiclePhase::Crossing {
                    veh.phase = VehiclePhase::Crossing;
                    self.entered += 1;
                    if let Control::Dica(c) = &mut self.control {
                        c.heads().entered(vin);
                        self.log(|| CoordinatorCall::Entered(vin));
                    }
                    self.trace
                        .record(now, vin, EventKind::Enter, || format!("v={v:.3}"));
                }
                if exit {
                    self.finish(vin, &mut veh, now)?;
                    gone.push(vin);
                    leader = None;
                } else {
                    leader = Some((
                        vin,
                        Leader {
                            rear_next: s - veh.spec.length,
                            v_next: v,
                        },
                    ));
                    self.vehicles.insert(vin, veh);
                }
            }
            self.lanes[r].retain(|v| !gone.contains(v));
        }
        Ok(())
    }

    fn abandon(&mut self, veh: &mut Vehicle, now: f64) {
        if let Control::Dica(c) = &mut self.control {
            c.cancel(veh.spec.vin);
            let vin = veh.spec.vin;
            self.log(|| CoordinatorCall::Cancel(vin));
        }
        veh.granted = None;
        veh.phase = VehiclePhase::Approaching;
        self.re_requests += 1;
        self.trace.record(now, veh.spec.vin, EventKind::Cancel, || {
            "approach unsafe".into()
        });
    }

    fn finish(&mut self, vin: u64, veh: &mut Vehicle, now: f64) -> Result<()> {
        self.metrics.record_trip(vin, veh.road, veh.sigma, now)?;
        self.exited += 1;
        if let Control::Signal { latched_on, .. } = &mut self.control {
            latched_on[veh.route.0] -= 1;
        }
        if let Some(d) = veh.granted.take().and_then(|g| g.dtot) {
            self.trajectories.push(d);
        }
        self.trace.record(now, vin, EventKind::Exit, || {
            format!("trip={:.3}", now - veh.sigma)
        });
        Ok(())
    }

    fn spawn(&mut self, now: f64) {
        let target = match self.cfg.run {
            RunLength::Vehicles(n) => n,
            RunLength::Seconds(_) => usize::MAX,
        };
        for ev in self.spawner.draw() {
            if self.generated >= target {
                break;
            }
            let vin = self.next_vin;
            self.next_vin += 1;
            self.generated += 1;
            self.last_spawn = now;
            let route = RouteId::of(ev.road, ev.movement);
            self.pending[route.0].push_back(Pending {
                vin,
                road: ev.road,
                speed: ev.speed,
            });
            self.trace.record(now, vin, EventKind::Spawn, || {
                format!("route={route} v={:.3}", ev.speed)
            });
        }
    }

    fn insert_pending(&mut self, now: f64) {
        let d = self.prepared.layout.comm_distance();
        for r in 0..self.pending.len() {
            let Some(p) = self.pending[r].front() else {
                continue;
            };
            let spec = VehicleSpec {
                vin: p.vin,
                ..self.cfg.vehicle
            };
            let mut speed = p.speed.min((2.0 * spec.a_min * (d - LINE_MARGIN)).sqrt());
            let turn = turn_speed_limit(&self.prepared.layout.routes[r]);
            if turn.is_finite() {
                speed = speed.min((turn * turn + 2.0 * COMFORT_DECEL * d).sqrt());
            }
            if let Some(tail) = self.lanes[r].back().and_then(|v| self.vehicles.get(v)) {
                let gap = tail.s - tail.spec.length + d;
                if gap < STANDSTILL_GAP {
                    continue;
                }
                speed =
                    speed.min((tail.v * tail.v + 2.0 * spec.a_min * (gap - STANDSTILL_GAP)).sqrt());
            }
            let p = self.pending[r].pop_front().expect("front exists");
            let route = RouteId(r);
            self.vehicles.insert(
                p.vin,
                Vehicle {
                    spec,
                    road: p.road,
                    route,
                    s: -d,
                    v: speed,
                    sigma: now,
                    phase: VehiclePhase::Approaching,
                    granted: None,
                    retry_tick: 0,
                },
            );
            self.lanes[r].push_back(p.vin);
            if let Control::Dica(c) = &mut self.control {
                let lane = self.prepared.layout.routes[r].entry_lane;
                c.heads().arrive(p.vin, lane);
                self.log(|| CoordinatorCall::Arrive { vin: p.vin, lane });
            }
            self.trace
                .record(now, p.vin, EventKind::Insert, || format!("v={speed:.3}"));
        }
    }

    fn confirmed(&mut self, vin: u64, now: f64) {
        let veh = self.vehicles.get_mut(&vin).expect("vehicle exists");
        veh.phase = VehiclePhase::Confirmed;
        self.max_wait = self.max_wait.max(now - veh.sigma);
    }

    fn dispatch_requests(&mut self, now: f64) -> Result<()> {
        let Control::Dica(c) = &mut self.control else {
            return Ok(());
        };
        c.prune(now);
        let mut heads: Vec<(f64, u64)> = Vec::new();
        for lane in &self.lanes {
            if let Some(veh) = lane
                .iter()
                .map(|v| &self.vehicles[v])
                .find(|v| v.phase != VehiclePhase::Crossing)
            {
                if veh.granted.is_none() && veh.retry_tick <= self.tick && c.is_head(veh.spec.vin) {
                    heads.push((veh.sigma, veh.spec.vin));
                }
            }
        }
        heads.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        if !heads.is_empty() {
            self.log(|| CoordinatorCall::Prune(now));
        }
        for (_, vin) in heads {
            self.request(vin, now)?;
        }
        Ok(())
    }

    /// Proposal entering at the earliest tick (not before `min_tick`) with
    /// arrival speed `v_e`.
    fn proposal(&self, veh: &Vehicle, v_e: f64, min_tick: i64) -> Result<Tss> {
        let h = self.cfg.h;
        let route = &self.prepared.layout.routes[veh.route.0];
        let t = self
            .limits
            .earliest_arrival(-veh.s, veh.v, v_e)
            .ok_or_else(|| Error::InvalidMotion(format!("arrival speed {v_e} unreachable")))?;
        let entry_tick = (((self.now() + t) / h) - 1e-9).ceil() as i64;
        capped_tss(
            &veh.spec,
            route,
            entry_tick.max(min_tick),
            h,
            v_e,
            veh.spec.v_m,
        )
    }

    /// Asks for the fastest crossing first. When the granted entry time
    /// cannot be met at the proposed speed the grant is withdrawn and the
    /// vehicle asks again at the highest speed that meets it, ending with
    /// a speed that tolerates any wait.
    fn request(&mut self, vin: u64, now: f64) -> Result<()> {
        let veh = self.vehicles[&vin].clone();
        let d = -veh.s;
        let route = &self.prepared.layout.routes[veh.route.0];
        let turn = turn_speed_limit(route).min(veh.spec.v_m);
        let lo = (veh.v * veh.v - 2.0 * veh.spec.a_min * d).max(0.0).sqrt();
        let hi = (veh.v * veh.v + 2.0 * veh.spec.a_max * d).sqrt();
        let mut tolerant = self.limits.wait_tolerant_speed(d, veh.v).min(turn);
        if tolerant < MIN_SPEED {
            tolerant = 0.0;
        }
        let mut v_e = turn.clamp(lo, hi.max(lo));
        let mut min_tick = self.tick + 1;
        for attempt in 0..MAX_ATTEMPTS {
            if attempt + 1 == MAX_ATTEMPTS {
                v_e = tolerant;
            }
            let Ok(tss) = self.proposal(&veh, v_e, min_tick) else {
                v_e = tolerant;
                continue;
            };
            self.trace.record(now, vin, EventKind::Request, || {
                format!(
                    "attempt={attempt} entry={:.2} v_e={v_e:.3}",
                    tss.entry_time()
                )
            });
            let req = Request {
                vin,
                spec: veh.spec,
                tss,
            };
            if let Some(calls) = &mut self.calls {
                calls.push(CoordinatorCall::Request(req.clone()));
            }
            let Control::Dica(c) = &mut self.control else {
                unreachable!()
            };
            let resp = match c.process_request(req) {
                Ok(r) => r,
                Err(Error::RequestRejected { .. }) => break,
                Err(e) => return Err(e),
            };
            let entry = resp.tss.entry_time();
            if let Some(approach) =
                self.limits
                    .plan(now, d, veh.v, resp.tss.entry_speed(), entry - now)
            {
                let dtot = if self.cfg.keep_trajectories {
                    Some(tss_to_dtot(&resp.tss, &veh.spec)?)
                } else {
                    None
                };
                self.trace.record(now, vin, EventKind::Confirm, || {
                    format!(
                        "entry={entry:.2} delay={:.2} capped={}",
                        resp.delay, resp.capped
                    )
                });
                self.vehicles.get_mut(&vin).expect("vehicle exists").granted = Some(Granted {
                    approach,
                    tss: resp.tss,
                    dtot,
                });
                self.confirmed(vin, now);
                return Ok(());
            }
            c.cancel(vin);
            self.log(|| CoordinatorCall::Cancel(vin));
            self.re_requests += 1;
            self.trace.record(now, vin, EventKind::Cancel, || {
                format!("attempt={attempt} infeasible")
            });
            min_tick = resp.tss.start_tick;
            v_e = match self.limits.max_speed_for(d, veh.v, entry - now, v_e) {
                Some(v) if v >= MIN_SPEED => v,
                _ => tolerant,
            };
        }
        let retry = ticks_for(RETRY_DELAY, self.cfg.h);
        self.vehicles
            .get_mut(&vin)
            .expect("vehicle exists")
            .retry_tick = self.tick + retry;
        Ok(())
    }

    fn latch(&mut self, now: f64) -> Result<()> {
        let Control::Signal { plan, latched_on } = &self.control else {
            return Ok(());
        };
        let plan = plan.clone();
        let mut latched_on = *latched_on;
        for r in 0..self.lanes.len() {
            let Some(&vin) = self.lanes[r]
                .iter()
                .find(|v| self.vehicles[v].phase == VehiclePhase::Approaching)
            else {
                continue;
            };
            let veh = &self.vehicles[&vin];
            let d = -veh.s;
            let go = match plan.route_state(RouteId(r), now) {
                SignalState::Green => d <= veh.v * veh.v / (2.0 * veh.spec.a_min) + LATCH_LOOKAHEAD,
                SignalState::Yellow => veh.v * veh.v / (2.0 * COMFORT_DECEL) > d,
                SignalState::Red => false,
            };
            if !go {
                continue;
            }
            let mut clear = true;
            for (other, &n) in latched_on.iter().enumerate() {
                if n > 0
                    && other != r
                    && !route_compatible(&self.prepared.zones, RouteId(r), RouteId(other))?
                {
                    clear = false;
                    break;
                }
            }
            if !clear {
                continue;
            }
            latched_on[r] += 1;
            self.trace
                .record(now, vin, EventKind::Latch, || format!("d={d:.2}"));
            self.confirmed(vin, now);
        }
        if let Control::Signal { latched_on: l, .. } = &mut self.control {
            *l = latched_on;
        }
        Ok(())
    }

    /// Steps until the configured end, then assembles the report.
    pub fn run(mut self) -> Result<SimOutcome> {
        loop {
            match self.cfg.run {
                RunLength::Seconds(t) => {
                    if self.now() >= t - 1e-9 {
                        break;
                    }
                }
                RunLength::Vehicles(n) => {
                    if self.generated >= n {
                        if self.exited == self.generated {
                            break;
                        }
                        if self.now() - self.last_spawn > self.cfg.drain_limit {
                            return Err(Error::DidNotDrain(self.cfg.drain_limit));
                        }
                    }
                }
            }
            self.step()?;
        }
        self.finish_run()
    }

    fn finish_run(self) -> Result<SimOutcome> {
        let now = self.now();
        let still_waiting = self
            .vehicles
            .values()
            .filter(|v| v.phase == VehiclePhase::Approaching)
            .map(|v| now - v.sigma)
            .fold(0.0, f64::max);
        let mut report = self.metrics.finalize(self.generated)?;
        report.max_confirmation_wait = self.max_wait.max(still_waiting);
        report.re_requests = self.re_requests;
        let (stats, signal_plan) = match self.control {
            Control::Dica(c) => (Some(c.stats().clone()), None),
            Control::Signal { plan, .. } => (None, Some(plan)),
        };
        Ok(SimOutcome {
            report,
            stats,
            signal_plan,
            trajectories: self.trajectories,
            trace: self.trace,
            min_lane_gap: self.min_lane_gap,
            sim_time: now,
            calls: self.calls.unwrap_or_default(),
        })
    }
}

pub fn run_prepared(cfg: &ScenarioConfig, prepared: &Prepared) -> Result<SimOutcome> {
    World::new(cfg.clone(), prepared.clone())?.run()
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<SimOutcome> {
    let prepared = prepare(cfg)?;
    run_prepared(cfg, &prepared)
}
