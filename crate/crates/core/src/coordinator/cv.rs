//! Conflict-candidate search: the plain all-pairs scan and the filtered,
//! bisection-based variant.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{ConfirmedEntry, ConfirmedSet, CoordinatorStats, Techniques};
use crate::geometry::{intervals_overlap, rects_overlap, OrientedRect, TimeInterval};
use crate::layout::{ConflictZoneTable, ZoneWindow};
use crate::motion::{
    estimated_oti_counted, exact_oti_counted, exact_oti_local_counted, Dtot, VehicleSpec,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConflictCandidate {
    pub vin: u64,
    /// Lower bound of the blocker's earliest conflicting occupancy interval.
    pub first_time_at_collision: f64,
    pub blocker_index: usize,
    pub requester_index: usize,
}

/// Cheap bounding-circle rejection in front of the separating-axis test.
pub(crate) fn occupancies_overlap(a: &OrientedRect, b: &OrientedRect) -> bool {
    let reach = (a.length.hypot(a.width) + b.length.hypot(b.width)) / 2.0;
    let d = a.center.position() - b.center.position();
    if d.dot(d) > reach * reach {
        return false;
    }
    rects_overlap(a, b)
}

pub(crate) fn exact(dtot: &Dtot, k: usize, stats: &mut CoordinatorStats) -> TimeInterval {
    let (iv, tests) = exact_oti_counted(dtot, k);
    stats.oti_exact += 1;
    stats.oti_rect_tests += tests;
    iv
}

/// Exact interval by the outward walk; used to confirm estimate-based hits.
pub(crate) fn confirm(dtot: &Dtot, k: usize, stats: &mut CoordinatorStats) -> TimeInterval {
    let (iv, tests) = exact_oti_local_counted(dtot, k);
    stats.oti_exact += 1;
    stats.oti_rect_tests += tests;
    iv
}

pub(crate) fn estimated(
    dtot: &Dtot,
    k: usize,
    spec: &VehicleSpec,
    stats: &mut CoordinatorStats,
) -> TimeInterval {
    let (iv, tests) = estimated_oti_counted(dtot, k, spec);
    stats.oti_estimated += 1;
    stats.oti_rect_tests += tests;
    iv
}

fn sort_candidates(c: &mut [ConflictCandidate]) {
    c.sort_by(|a, b| {
        a.first_time_at_collision
            .total_cmp(&b.first_time_at_collision)
            .then(a.vin.cmp(&b.vin))
    });
}

/// All-pairs search: space test first, exact intervals on every spatially
/// overlapping pair, no reuse of interval computations.
pub fn get_cv(
    set: &ConfirmedSet,
    requester: &Dtot,
    stats: &mut CoordinatorStats,
) -> Vec<ConflictCandidate> {
    let mut out = Vec::new();
    for entry in set.iter() {
        stats.confirmed_seen += 1;
        stats.filtered_in += 1;
        'blocker: for (kj, oj) in entry.dtot.occupancies.iter().enumerate() {
            for (ki, oi) in requester.occupancies.iter().enumerate() {
                stats.pair_tests += 1;
                if !occupancies_overlap(&oj.rect, &oi.rect) {
                    continue;
                }
                let ij = exact(&entry.dtot, kj, stats);
                let ii = exact(requester, ki, stats);
                if intervals_overlap(&ij, &ii) {
                    out.push(ConflictCandidate {
                        vin: entry.vin,
                        first_time_at_collision: ij.lo,
                        blocker_index: kj,
                        requester_index: ki,
                    });
                    break 'blocker;
                }
            }
        }
    }
    sort_candidates(&mut out);
    out
}

/// Index range of occupancies whose front-bumper position lies in `w`.
pub(crate) fn window_range(
    dtot: &Dtot,
    w: ZoneWindow,
    stats: &mut CoordinatorStats,
) -> Range<usize> {
    let occ = &dtot.occupancies;
    let lo = occ.partition_point(|o| o.s < w.lo);
    let hi = occ.partition_point(|o| o.s <= w.hi);
    stats.bisection_steps += 2 * (usize::BITS - occ.len().leading_zeros()) as u64;
    lo..hi.max(lo)
}

/// Occupancy ranges of blocker and requester that need examining.
pub(crate) fn examined_ranges(
    entry: &ConfirmedEntry,
    requester: &Dtot,
    zones: &ConflictZoneTable,
    use_zones: bool,
    stats: &mut CoordinatorStats,
) -> Option<(Range<usize>, Range<usize>)> {
    if !use_zones {
        return Some((0..entry.dtot.len(), 0..requester.len()));
    }
    let wj = zones.window(entry.dtot.route, requester.route).ok()??;
    let wi = zones.window(requester.route, entry.dtot.route).ok()??;
    let jr = window_range(&entry.dtot, wj, stats);
    let ir = window_range(requester, wi, stats);
    (!jr.is_empty() && !ir.is_empty()).then_some((jr, ir))
}

/// Interval source for the filtered search: exact, or estimated and widened
/// by `pad` on both sides.
#[derive(Clone, Copy)]
pub(crate) struct IntervalSource {
    pub estimate: bool,
    pub pad: f64,
}

impl IntervalSource {
    pub fn get(
        &self,
        dtot: &Dtot,
        k: usize,
        spec: &VehicleSpec,
        stats: &mut CoordinatorStats,
    ) -> TimeInterval {
        if self.estimate {
            estimated(dtot, k, spec, stats).padded(self.pad)
        } else {
            exact(dtot, k, stats)
        }
    }
}

/// Requester intervals, computed at most once per search.
struct RequesterIntervals<'a> {
    dtot: &'a Dtot,
    spec: &'a VehicleSpec,
    src: IntervalSource,
    memo: Vec<Option<TimeInterval>>,
}

impl RequesterIntervals<'_> {
    fn get(&mut self, k: usize, stats: &mut CoordinatorStats) -> TimeInterval {
        if let Some(iv) = self.memo[k] {
            return iv;
        }
        let iv = self.src.get(self.dtot, k, self.spec, stats);
        self.memo[k] = Some(iv);
        iv
    }
}

/// Requester indices (within `ir`) whose interval can meet `target`, found by
/// bisection over the time-ordered occupancies and widened by `GUARD`.
fn bisect_overlap(
    requester: &mut RequesterIntervals,
    ir: &Range<usize>,
    target: &TimeInterval,
    stats: &mut CoordinatorStats,
) -> Range<usize> {
    const GUARD: usize = 2;
    // first index whose upper bound reaches the target
    let (mut lo, mut hi) = (ir.start, ir.end);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        stats.bisection_steps += 1;
        if requester.get(mid, stats).hi < target.lo {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    let first = lo;
    // one past the last index whose lower bound is still inside the target
    let (mut lo, mut hi) = (first, ir.end);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        stats.bisection_steps += 1;
        if requester.get(mid, stats).lo <= target.hi {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    let end = lo;
    first.saturating_sub(GUARD).max(ir.start)..(end + GUARD).min(ir.end)
}

/// Filtered search with any subset of the four techniques:
///
/// * `a`: skip confirmed vehicles whose crossing interval misses the
///   requester's (with a `2h` pad) or whose route is compatible;
/// * `b`: only occupancies inside the precomputed conflict-zone windows;
/// * `c`: O(1) estimated intervals, padded, as a filter;
/// * `d`: locate the time-overlapping requester occupancies by bisection.
///
/// Every reported conflict is confirmed with exact intervals, so the result
/// matches [`get_cv`] whenever the pads cover the estimation error.
pub fn enhanced_get_cv(
    set: &ConfirmedSet,
    requester: &Dtot,
    requester_spec: &VehicleSpec,
    zones: &ConflictZoneTable,
    techniques: Techniques,
    pad: f64,
    stats: &mut CoordinatorStats,
) -> Vec<ConflictCandidate> {
    let h = requester.h;
    let src = IntervalSource {
        estimate: techniques.c,
        pad,
    };
    let crossing = TimeInterval::new(requester.entry_time(), requester.exit_time());
    let mut intervals = RequesterIntervals {
        dtot: requester,
        spec: requester_spec,
        src,
        memo: vec![None; requester.len()],
    };
    let mut confirmed_i: Vec<Option<TimeInterval>> = vec![None; requester.len()];
    let mut out = Vec::new();
    for entry in set.iter() {
        stats.confirmed_seen += 1;
        if techniques.a {
            let compatible = zones
                .window(entry.dtot.route, requester.route)
                .is_ok_and(|w| w.is_none());
            if compatible || !intervals_overlap(&entry.crossing().padded(2.0 * h), &crossing) {
                continue;
            }
        }
        stats.filtered_in += 1;
        let Some((jr, ir)) = examined_ranges(entry, requester, zones, techniques.b, stats) else {
            continue;
        };
        'blocker: for kj in jr {
            let oj = &entry.dtot.occupancies[kj];
            let mut ij = None;
            let mut confirmed_j = None;
            let range = if techniques.d {
                let iv = *ij.insert(src.get(&entry.dtot, kj, &entry.spec, stats));
                bisect_overlap(&mut intervals, &ir, &iv, stats)
            } else {
                ir.clone()
            };
            for ki in range {
                stats.pair_tests += 1;
                if !occupancies_overlap(&oj.rect, &requester.occupancies[ki].rect) {
                    continue;
                }
                let ij = *ij.get_or_insert_with(|| src.get(&entry.dtot, kj, &entry.spec, stats));
                let ii = intervals.get(ki, stats);
                if !intervals_overlap(&ij, &ii) {
                    continue;
                }
                let (xj, xi) = if src.estimate {
                    let xj = *confirmed_j.get_or_insert_with(|| confirm(&entry.dtot, kj, stats));
                    let xi = *confirmed_i[ki].get_or_insert_with(|| confirm(requester, ki, stats));
                    (xj, xi)
                } else {
                    (ij, ii)
                };
                if intervals_overlap(&xj, &xi) {
                    out.push(ConflictCandidate {
                        vin: entry.vin,
                        first_time_at_collision: xj.lo,
                        blocker_index: kj,
                        requester_index: ki,
                    });
                    break 'blocker;
                }
            }
        }
    }
    sort_candidates(&mut out);
    out
}
