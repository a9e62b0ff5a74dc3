//! The intersection control agent.
//!
//! Requests are processed one at a time. A request's trajectory is turned
//! into occupancies, adjusted for vehicles ahead on the same lanes, then
//! delayed in whole sampling steps until no confirmed vehicle conflicts with
//! it; the result is stored and sent back.

mod complexity;
mod cv;
mod stats;

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use complexity::{complexity_bound, ComplexityModel};
pub use cv::{enhanced_get_cv, get_cv, ConflictCandidate};
pub use stats::CoordinatorStats;

use crate::error::{Error, Result};
use crate::geometry::{rects_overlap, TimeInterval};
use crate::layout::{ConflictZoneTable, IntersectionLayout, LaneRef};
use crate::motion::{capped_tss, dtot_to_tss, tss_to_dtot, Dtot, Tss, VehicleSpec};

/// Along-path margin added to both vehicles when checking same-route spacing.
pub const SAME_ROUTE_MARGIN: f64 = 2.0;
/// Lowest exit-speed cap imposed behind a slower vehicle on the same exit lane.
pub const MIN_FOLLOW_CAP: f64 = 1.0;
/// Padding of estimated intervals, in sampling steps.
pub const DEFAULT_PAD_STEPS: f64 = 8.0;
/// Safety bound on delay iterations for a single request.
const MAX_ITERATIONS: u64 = 100_000;

/// Which of the four cost-reduction techniques are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Techniques {
    /// Filter confirmed vehicles by crossing interval and route compatibility.
    pub a: bool,
    /// Restrict to occupancies inside precomputed conflict zones.
    pub b: bool,
    /// Estimated O(1) occupancy intervals.
    pub c: bool,
    /// Bisection over time-sorted occupancies (needs `b`).
    pub d: bool,
}

impl Techniques {
    pub const BASELINE: Techniques = Techniques {
        a: false,
        b: false,
        c: false,
        d: false,
    };
    pub const ENHANCED: Techniques = Techniques {
        a: true,
        b: true,
        c: true,
        d: true,
    };

    pub fn new(a: bool, b: bool, c: bool, d: bool) -> Result<Self> {
        if d && !b {
            return Err(Error::BisectionWithoutZones);
        }
        Ok(Self { a, b, c, d })
    }

    /// Parses a comma-separated list such as `IV-A,IV-C` or `a,c`.
    pub fn parse(list: &str) -> Result<Self> {
        let (mut a, mut b, mut c, mut d) = (false, false, false, false);
        for raw in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let key = raw.trim_start_matches("IV-").trim_start_matches("iv-");
            match key.to_ascii_uppercase().as_str() {
                "A" => a = true,
                "B" => b = true,
                "C" => c = true,
                "D" => d = true,
                _ => return Err(Error::InvalidConfig(format!("unknown technique `{raw}`"))),
            }
        }
        Self::new(a, b, c, d)
    }

    pub fn is_baseline(&self) -> bool {
        *self == Self::BASELINE
    }

    pub fn label(&self) -> String {
        if self.is_baseline() {
            return "none".into();
        }
        let mut parts = Vec::new();
        for (on, name) in [(self.a, "A"), (self.b, "B"), (self.c, "C"), (self.d, "D")] {
            if on {
                parts.push(name);
            }
        }
        parts.join("+")
    }

    /// Every valid subset (`d` only together with `b`).
    pub fn all_valid() -> Vec<Techniques> {
        let mut out = Vec::new();
        for bits in 0u8..16 {
            if let Ok(t) = Self::new(bits & 1 != 0, bits & 2 != 0, bits & 4 != 0, bits & 8 != 0) {
                out.push(t);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfirmedEntry {
    pub vin: u64,
    pub spec: VehicleSpec,
    pub dtot: Dtot,
}

impl ConfirmedEntry {
    pub fn crossing(&self) -> TimeInterval {
        TimeInterval::new(self.dtot.entry_time(), self.dtot.exit_time())
    }
}

/// Granted trajectories in confirmation order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConfirmedSet {
    entries: Vec<ConfirmedEntry>,
}

impl ConfirmedSet {
    pub fn iter(&self) -> impl Iterator<Item = &ConfirmedEntry> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, vin: u64) -> Option<&ConfirmedEntry> {
        self.entries.iter().find(|e| e.vin == vin)
    }

    pub fn insert(&mut self, entry: ConfirmedEntry) {
        self.entries.push(entry);
    }

    pub fn remove(&mut self, vin: u64) -> Option<ConfirmedEntry> {
        let pos = self.entries.iter().position(|e| e.vin == vin)?;
        Some(self.entries.remove(pos))
    }

    /// Drops entries that have fully left the intersection before `now`.
    pub fn prune(&mut self, now: f64) -> usize {
        let before = self.entries.len();
        self.entries.retain(|e| e.dtot.exit_time() >= now);
        before - self.entries.len()
    }
}

/// Lane queues of vehicles inside the communication region that have not
/// yet begun entering the intersection; the front of each queue is the
/// lane's head vehicle.
#[derive(Debug, Clone, Default)]
pub struct HeadRegistry {
    lanes: HashMap<LaneRef, VecDeque<u64>>,
    lane_of: HashMap<u64, LaneRef>,
}

impl HeadRegistry {
    pub fn arrive(&mut self, vin: u64, lane: LaneRef) {
        self.lanes.entry(lane).or_default().push_back(vin);
        self.lane_of.insert(vin, lane);
    }

    pub fn entered(&mut self, vin: u64) {
        if let Some(lane) = self.lane_of.remove(&vin) {
            if let Some(q) = self.lanes.get_mut(&lane) {
                q.retain(|&v| v != vin);
            }
        }
    }

    pub fn is_head(&self, vin: u64) -> bool {
        self.lane_of
            .get(&vin)
            .and_then(|lane| self.lanes.get(lane))
            .and_then(|q| q.front())
            == Some(&vin)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub vin: u64,
    pub spec: VehicleSpec,
    pub tss: Tss,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub vin: u64,
    pub tss: Tss,
    /// Entry delay relative to the proposal, in seconds.
    pub delay: f64,
    /// Whether the speed profile was regenerated behind a slower vehicle.
    pub capped: bool,
}

pub struct Coordinator {
    layout: Arc<IntersectionLayout>,
    zones: Arc<ConflictZoneTable>,
    envelope: (f64, f64),
    techniques: Techniques,
    h: f64,
    pad: f64,
    confirmed: ConfirmedSet,
    heads: HeadRegistry,
    stats: CoordinatorStats,
}

impl Coordinator {
    /// `envelope` is the (length, width) the zone table was computed for.
    pub fn new(
        layout: Arc<IntersectionLayout>,
        zones: Arc<ConflictZoneTable>,
        envelope: (f64, f64),
        techniques: Techniques,
        h: f64,
    ) -> Result<Self> {
        Techniques::new(techniques.a, techniques.b, techniques.c, techniques.d)?;
        if !(h > 0.0) {
            return Err(Error::InvalidConfig(format!("step must be > 0, got {h}")));
        }
        Ok(Self {
            layout,
            zones,
            envelope,
            techniques,
            h,
            pad: DEFAULT_PAD_STEPS * h,
            confirmed: ConfirmedSet::default(),
            heads: HeadRegistry::default(),
            stats: CoordinatorStats::default(),
        })
    }

    pub fn with_pad(mut self, pad: f64) -> Self {
        self.pad = pad;
        self
    }

    pub fn pad(&self) -> f64 {
        self.pad
    }

    pub fn layout(&self) -> &IntersectionLayout {
        &self.layout
    }

    pub fn techniques(&self) -> Techniques {
        self.techniques
    }

    pub fn confirmed(&self) -> &ConfirmedSet {
        &self.confirmed
    }

    pub fn stats(&self) -> &CoordinatorStats {
        &self.stats
    }

    pub fn heads(&mut self) -> &mut HeadRegistry {
        &mut self.heads
    }

    pub fn is_head(&self, vin: u64) -> bool {
        self.heads.is_head(vin)
    }

    pub fn prune(&mut self, now: f64) -> usize {
        self.confirmed.prune(now)
    }

    /// Withdraws a confirmation the vehicle cannot execute.
    pub fn cancel(&mut self, vin: u64) -> bool {
        self.confirmed.remove(vin).is_some()
    }

    fn validate(&self, req: &Request) -> Result<()> {
        let reject = |reason: String| Error::RequestRejected {
            vin: req.vin,
            reason,
        };
        req.spec.validate()?;
        if req.spec.vin != req.vin {
            return Err(reject("vehicle spec carries a different vin".into()));
        }
        if req.spec.length > self.envelope.0 + 1e-9 || req.spec.width > self.envelope.1 + 1e-9 {
            return Err(reject(
                "vehicle larger than the conflict-zone envelope".into(),
            ));
        }
        if !self.heads.is_head(req.vin) {
            return Err(reject("not the head vehicle of its lane".into()));
        }
        if self.confirmed.get(req.vin).is_some() {
            return Err(reject("already confirmed".into()));
        }
        let tss = &req.tss;
        if tss.states.is_empty() {
            return Err(reject("empty TSS".into()));
        }
        self.layout.route(tss.route)?;
        if (tss.h - self.h).abs() > 1e-12 {
            return Err(reject(format!("step {} differs from {}", tss.h, self.h)));
        }
        for w in tss.states.windows(2) {
            if w[1].s < w[0].s || w[1].t <= w[0].t {
                return Err(reject("states not ordered".into()));
            }
        }
        Ok(())
    }

    pub fn find_conflicts(&mut self, dtot: &Dtot, spec: &VehicleSpec) -> Vec<ConflictCandidate> {
        if self.techniques.is_baseline() {
            get_cv(&self.confirmed, dtot, &mut self.stats)
        } else {
            enhanced_get_cv(
                &self.confirmed,
                dtot,
                spec,
                &self.zones,
                self.techniques,
                self.pad,
                &mut self.stats,
            )
        }
    }

    pub fn process_request(&mut self, req: Request) -> Result<Response> {
        self.validate(&req)?;
        let started = Instant::now();
        self.stats.requests += 1;

        let proposed_entry = req.tss.entry_time();
        let mut dtot = tss_to_dtot(&req.tss, &req.spec)?;
        let (fv, capped) = check_fv(
            &self.confirmed,
            dtot,
            &req.spec,
            &self.layout,
            &mut self.stats,
        )?;
        dtot = fv;

        let mut conflicts = self.find_conflicts(&dtot, &req.spec);
        let mut iterations = 0u64;
        while let Some(first) = conflicts.first().copied() {
            iterations += 1;
            if iterations > MAX_ITERATIONS {
                return Err(Error::RequestRejected {
                    vin: req.vin,
                    reason: "delay loop did not converge".into(),
                });
            }
            let blocker = self
                .confirmed
                .get(first.vin)
                .expect("candidate is confirmed")
                .clone();
            update_dtot(
                &mut dtot,
                &req.spec,
                &blocker,
                &self.zones,
                self.techniques,
                self.pad,
                &mut self.stats,
            );
            conflicts = self.find_conflicts(&dtot, &req.spec);
        }
        self.stats.loop_iterations += iterations;
        self.stats.max_loop_iterations = self.stats.max_loop_iterations.max(iterations);

        let tss = dtot_to_tss(&dtot)?;
        self.confirmed.insert(ConfirmedEntry {
            vin: req.vin,
            spec: req.spec,
            dtot,
        });
        let ns = started.elapsed().as_nanos() as u64;
        self.stats.wall_ns += ns;
        self.stats.per_request_ns.push(ns);
        Ok(Response {
            vin: req.vin,
            delay: tss.entry_time() - proposed_entry,
            tss,
            capped,
        })
    }
}

/// Adjusts a new trajectory for confirmed vehicles ahead of it: behind a
/// vehicle heading for the same exit lane the speed is capped at that
/// vehicle's exit speed, and behind a vehicle on the same route the whole
/// trajectory is delayed until the margin-inflated occupancies stay apart at
/// every shared step. Returns the adjusted trajectory and whether the speed
/// profile was regenerated.
pub fn check_fv(
    set: &ConfirmedSet,
    dtot: Dtot,
    spec: &VehicleSpec,
    layout: &IntersectionLayout,
    stats: &mut CoordinatorStats,
) -> Result<(Dtot, bool)> {
    let route = layout.route(dtot.route)?;
    let mut dtot = dtot;
    let mut capped = false;

    let lane_leader = set
        .iter()
        .filter(|e| e.dtot.route != dtot.route)
        .filter(|e| {
            layout
                .route(e.dtot.route)
                .is_ok_and(|r| r.exit_lane == route.exit_lane)
        })
        .max_by(|a, b| a.dtot.exit_time().total_cmp(&b.dtot.exit_time()));
    if let Some(leader) = lane_leader {
        let cap = leader.dtot.exit_speed().max(MIN_FOLLOW_CAP);
        if dtot.exit_speed() > cap + 1e-9 {
            let entry_speed = dtot.occupancies[0].v;
            let tss = capped_tss(spec, route, dtot.start_tick, dtot.h, entry_speed, cap)?;
            dtot = tss_to_dtot(&tss, spec)?;
            capped = true;
            stats.fv_adjustments += 1;
        }
    }

    let route_leaders: Vec<&ConfirmedEntry> =
        set.iter().filter(|e| e.dtot.route == dtot.route).collect();
    for leader in route_leaders {
        let mut shift = 0i64;
        while !same_route_clear(&leader.dtot, &dtot, stats) {
            dtot.shift_ticks(1);
            shift += 1;
            if shift as u64 > MAX_ITERATIONS {
                break;
            }
        }
        if shift > 0 {
            stats.fv_adjustments += 1;
        }
    }
    Ok((dtot, capped))
}

fn same_route_clear(leader: &Dtot, follower: &Dtot, stats: &mut CoordinatorStats) -> bool {
    let first = leader.start_tick.max(follower.start_tick);
    let last = leader.end_tick().min(follower.end_tick());
    for tick in first..=last {
        let (Some(a), Some(b)) = (leader.index_at_tick(tick), follower.index_at_tick(tick)) else {
            continue;
        };
        stats.pair_tests += 1;
        let ra = leader.occupancies[a].rect.inflated(SAME_ROUTE_MARGIN, 0.0);
        let rb = follower.occupancies[b]
            .rect
            .inflated(SAME_ROUTE_MARGIN, 0.0);
        if rects_overlap(&ra, &rb) {
            return false;
        }
    }
    true
}

/// Delays `requester` past `blocker` everywhere their occupancies share space.
///
/// Over every blocker occupancy `j` and the earliest requester occupancy `i`
/// that overlaps it, the shift is the largest `ub(j) - lb(i)` plus one step,
/// rounded up to whole steps; afterwards each such pair has disjoint
/// intervals, so one update settles one blocker. With technique `c` the pairs
/// are ranked by estimated intervals and only the near-maximal ones are
/// evaluated exactly. Returns the shift in steps.
pub fn update_dtot(
    requester: &mut Dtot,
    requester_spec: &VehicleSpec,
    blocker: &ConfirmedEntry,
    zones: &ConflictZoneTable,
    techniques: Techniques,
    pad: f64,
    stats: &mut CoordinatorStats,
) -> i64 {
    let h = requester.h;
    let ranges = cv::examined_ranges(blocker, requester, zones, techniques.b, stats);
    let mut pairs = Vec::new();
    if let Some((jr, ir)) = ranges {
        for kj in jr {
            let oj = &blocker.dtot.occupancies[kj];
            for ki in ir.clone() {
                stats.pair_tests += 1;
                if cv::occupancies_overlap(&oj.rect, &requester.occupancies[ki].rect) {
                    pairs.push((kj, ki));
                    break;
                }
            }
        }
    }

    let exact_gap = |kj: usize, ki: usize, stats: &mut CoordinatorStats| {
        if techniques.c {
            cv::confirm(&blocker.dtot, kj, stats).hi - cv::confirm(requester, ki, stats).lo
        } else {
            cv::exact(&blocker.dtot, kj, stats).hi - cv::exact(requester, ki, stats).lo
        }
    };
    let worst = if techniques.c {
        let est: Vec<f64> = pairs
            .iter()
            .map(|&(kj, ki)| {
                cv::estimated(&blocker.dtot, kj, &blocker.spec, stats).hi
                    - cv::estimated(requester, ki, requester_spec, stats).lo
            })
            .collect();
        let top = est.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        pairs
            .iter()
            .zip(&est)
            .filter(|(_, &e)| e >= top - 4.0 * pad)
            .map(|(&(kj, ki), _)| exact_gap(kj, ki, stats))
            .fold(f64::NEG_INFINITY, f64::max)
    } else {
        pairs
            .iter()
            .map(|&(kj, ki)| exact_gap(kj, ki, stats))
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let ticks = if worst.is_finite() {
        (((worst + h) / h) - 1e-6).ceil().max(1.0) as i64
    } else {
        1
    };
    requester.shift_ticks(ticks);
    ticks
}
