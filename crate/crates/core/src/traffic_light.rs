//! Fixed-cycle signal control with an exponential cycle-length model.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::{Approach, Movement, RouteId};

pub const LOST_TIME_PER_PHASE: f64 = 4.0;
pub const YELLOW: f64 = 3.0;
/// 1800 veh/h/lane.
pub const SATURATION_FLOW: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SignalState {
    Green,
    Yellow,
    Red,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub routes: Vec<RouteId>,
    /// Critical flow ratio of the phase.
    pub flow_ratio: f64,
    pub green: f64,
    pub yellow: f64,
    /// Part of the phase's lost time not covered by yellow, shown as all-red.
    pub all_red: f64,
}

impl Phase {
    pub fn duration(&self) -> f64 {
        self.green + self.yellow + self.all_red
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalPlan {
    pub cycle: f64,
    pub lost_time: f64,
    pub critical_sum: f64,
    pub phases: Vec<Phase>,
}

/// Routes served by each phase: north-south through and right, north-south
/// left, east-west through and right, east-west left.
pub fn phase_routes() -> [Vec<RouteId>; 4] {
    let group = |roads: [Approach; 2], movements: &[Movement]| {
        roads
            .iter()
            .flat_map(|&a| movements.iter().map(move |&m| RouteId::of(a, m)))
            .collect::<Vec<_>>()
    };
    let ns = [Approach::North, Approach::South];
    let ew = [Approach::East, Approach::West];
    let through = [Movement::Straight, Movement::Right];
    [
        group(ns, &through),
        group(ns, &[Movement::Left]),
        group(ew, &through),
        group(ew, &[Movement::Left]),
    ]
}

/// Exponential cycle-length model `1.5 L e^{1.8 Y}`.
pub fn cycle_length(lost_time: f64, critical_sum: f64) -> f64 {
    1.5 * lost_time * E.powf(1.8 * critical_sum)
}

/// Builds the plan for per-route demand (veh/s, indexed by route id) with
/// every route on its own lane of the given saturation flow (veh/s/lane).
/// Effective greens split `C0 - L` in proportion to the critical ratios;
/// with no demand at all the split is equal.
pub fn optimize_plan(demand: &[f64], saturation_flow: f64) -> Result<SignalPlan> {
    if demand.len() != 12 {
        return Err(Error::InvalidDemand(format!(
            "expected 12 route flows, got {}",
            demand.len()
        )));
    }
    if let Some(q) = demand.iter().find(|q| !(q.is_finite() && **q >= 0.0)) {
        return Err(Error::InvalidDemand(format!(
            "flow {q} must be finite and >= 0"
        )));
    }
    if !(saturation_flow > 0.0) {
        return Err(Error::InvalidDemand(format!(
            "saturation flow {saturation_flow} must be > 0"
        )));
    }
    let groups = phase_routes();
    let ratios: Vec<f64> = groups
        .iter()
        .map(|routes| {
            routes
                .iter()
                .map(|r| demand[r.0] / saturation_flow)
                .fold(0.0, f64::max)
        })
        .collect();
    let y: f64 = ratios.iter().sum();
    if y >= 1.0 {
        return Err(Error::Oversaturated(y));
    }
    if y > 0.0 {
        if let Some(i) = ratios.iter().position(|&r| r == 0.0) {
            return Err(Error::InvalidDemand(format!(
                "phase {} has no demand",
                i + 1
            )));
        }
    }
    let lost_time = LOST_TIME_PER_PHASE * groups.len() as f64;
    let cycle = cycle_length(lost_time, y);
    let usable = cycle - lost_time;
    let phases = groups
        .into_iter()
        .zip(&ratios)
        .map(|(routes, &ratio)| Phase {
            routes,
            flow_ratio: ratio,
            green: if y > 0.0 {
                ratio / y * usable
            } else {
                usable / 4.0
            },
            yellow: YELLOW,
            all_red: LOST_TIME_PER_PHASE - YELLOW,
        })
        .collect();
    Ok(SignalPlan {
        cycle,
        lost_time,
        critical_sum: y,
        phases,
    })
}

impl SignalPlan {
    /// Active phase index and its display at time `t`; `None` during all-red.
    pub fn active_phase(&self, t: f64) -> Option<(usize, SignalState)> {
        let mut u = t.rem_euclid(self.cycle);
        for (i, p) in self.phases.iter().enumerate() {
            if u < p.green {
                return Some((i, SignalState::Green));
            }
            u -= p.green;
            if u < p.yellow {
                return Some((i, SignalState::Yellow));
            }
            u -= p.yellow;
            if u < p.all_red {
                return None;
            }
            u -= p.all_red;
        }
        None
    }

    pub fn route_state(&self, route: RouteId, t: f64) -> SignalState {
        match self.active_phase(t) {
            Some((i, s)) if self.phases[i].routes.contains(&route) => s,
            _ => SignalState::Red,
        }
    }
}

/// Display of every route (indexed by route id) at time `t`.
pub fn signal_state(plan: &SignalPlan, t: f64) -> [SignalState; 12] {
    let mut out = [SignalState::Red; 12];
    if let Some((i, s)) = plan.active_phase(t) {
        for r in &plan.phases[i].routes {
            out[r.0] = s;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(q: f64) -> Vec<f64> {
        vec![q; 12]
    }

    #[test]
    fn cycle_at_point_three() {
        // four equal phases with y = 0.075 each
        let plan = optimize_plan(&uniform(0.075 * SATURATION_FLOW), SATURATION_FLOW).unwrap();
        assert!((plan.critical_sum - 0.3).abs() < 1e-12);
        assert!((plan.cycle - 41.19).abs() < 0.01);
    }

    #[test]
    fn no_demand_gives_formula_floor() {
        let plan = optimize_plan(&uniform(0.0), SATURATION_FLOW).unwrap();
        assert_eq!(plan.cycle, 24.0);
        assert!(plan.phases.iter().all(|p| p.green == 2.0));
    }

    #[test]
    fn equal_ratios_equal_greens() {
        let plan = optimize_plan(&uniform(0.05), SATURATION_FLOW).unwrap();
        let g = plan.phases[0].green;
        assert!(plan.phases.iter().all(|p| (p.green - g).abs() < 1e-12));
        let total: f64 = plan.phases.iter().map(Phase::duration).sum();
        assert!((total - plan.cycle).abs() < 1e-9);
    }

    #[test]
    fn oversaturation_rejected() {
        assert!(matches!(
            optimize_plan(&uniform(0.2), SATURATION_FLOW),
            Err(Error::Oversaturated(_))
        ));
    }

    #[test]
    fn state_timeline() {
        let plan = optimize_plan(&uniform(0.05), SATURATION_FLOW).unwrap();
        let first = &plan.phases[0];
        assert_eq!(plan.active_phase(0.0), Some((0, SignalState::Green)));
        assert_eq!(signal_state(&plan, 0.0), signal_state(&plan, plan.cycle));
        assert_eq!(
            plan.active_phase(first.green),
            Some((0, SignalState::Yellow))
        );
        assert_eq!(plan.active_phase(first.green + YELLOW + 0.5), None);
        assert_eq!(
            plan.active_phase(first.duration()),
            Some((1, SignalState::Green))
        );
    }
}
