use serde::{Deserialize, Serialize};

/// Analytic operation-count envelopes for the two coordinator variants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityModel {
    pub h: f64,
    pub v_m: f64,
    pub a_max: f64,
    /// Maximum crossing-route length.
    pub l_m: f64,
}

impl ComplexityModel {
    /// Upper bound on the number of states in a fastest crossing of `l_m`
    /// starting from rest: accelerate at `a_max`, then cruise at `v_m` if the
    /// route is long enough to reach it.
    pub fn max_states(&self) -> f64 {
        let ramp = self.v_m * self.v_m / (2.0 * self.a_max);
        if self.l_m >= ramp {
            (2.0 * self.a_max * self.l_m + self.v_m * self.v_m)
                / (2.0 * self.a_max * self.v_m * self.h)
        } else {
            (2.0 * self.l_m / self.a_max).sqrt() / self.h
        }
    }
}

/// `(baseline, enhanced)` envelopes for `n` confirmed vehicles: `n²·N³` and
/// `α·n²·N·log₂N`, with `alpha` the measured filter ratio.
pub fn complexity_bound(model: &ComplexityModel, n: usize, alpha: f64) -> (f64, f64) {
    let n = n as f64;
    let big_n = model.max_states();
    let baseline = n * n * big_n.powi(3);
    let enhanced = alpha * n * n * big_n * big_n.max(1.0).log2();
    (baseline, enhanced)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(l_m: f64) -> ComplexityModel {
        ComplexityModel {
            h: 0.05,
            v_m: 19.44,
            a_max: 2.0,
            l_m,
        }
    }

    #[test]
    fn short_route_branch() {
        assert!((model(40.0).max_states() - 126.49).abs() < 0.01);
    }

    #[test]
    fn long_route_branch() {
        assert!((model(200.0).max_states() - 302.97).abs() < 0.01);
    }

    #[test]
    fn zero_vehicles_zero_work() {
        assert_eq!(complexity_bound(&model(40.0), 0, 1.0), (0.0, 0.0));
    }
}
