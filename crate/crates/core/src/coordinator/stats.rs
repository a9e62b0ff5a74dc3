use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

/// Operation counters accumulated by the coordinator.
///
/// `pair_tests` counts rectangle tests between occupancies of two different
/// vehicles; rectangle tests spent inside occupancy-interval computations are
/// kept apart in `oti_rect_tests`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CoordinatorStats {
    pub requests: u64,
    pub confirmed_seen: u64,
    pub filtered_in: u64,
    pub pair_tests: u64,
    pub oti_exact: u64,
    pub oti_estimated: u64,
    pub oti_rect_tests: u64,
    pub bisection_steps: u64,
    pub loop_iterations: u64,
    pub max_loop_iterations: u64,
    pub fv_adjustments: u64,
    pub wall_ns: u64,
    pub per_request_ns: Vec<u64>,
}

impl CoordinatorStats {
    /// Hardware-independent cost: every rectangle test plus every O(1)
    /// interval estimate and bisection probe.
    pub fn total_ops(&self) -> u64 {
        self.pair_tests + self.oti_rect_tests + self.oti_estimated + self.bisection_steps
    }

    pub fn wall_seconds(&self) -> f64 {
        self.wall_ns as f64 * 1e-9
    }

    /// Empirical share of confirmed vehicles that survived the pre-filter.
    pub fn filter_ratio(&self) -> f64 {
        if self.confirmed_seen == 0 {
            0.0
        } else {
            self.filtered_in as f64 / self.confirmed_seen as f64
        }
    }
}

impl AddAssign<&CoordinatorStats> for CoordinatorStats {
    fn add_assign(&mut self, rhs: &CoordinatorStats) {
        self.requests += rhs.requests;
        self.confirmed_seen += rhs.confirmed_seen;
        self.filtered_in += rhs.filtered_in;
        self.pair_tests += rhs.pair_tests;
        self.oti_exact += rhs.oti_exact;
        self.oti_estimated += rhs.oti_estimated;
        self.oti_rect_tests += rhs.oti_rect_tests;
        self.bisection_steps += rhs.bisection_steps;
        self.loop_iterations += rhs.loop_iterations;
        self.max_loop_iterations = self.max_loop_iterations.max(rhs.max_loop_iterations);
        self.fv_adjustments += rhs.fv_adjustments;
        self.wall_ns += rhs.wall_ns;
        self.per_request_ns.extend_from_slice(&rhs.per_request_ns);
    }
}
