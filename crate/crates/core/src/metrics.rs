//! Trip, throughput, spacing and time-series measurements.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{rect_distance, OrientedRect};
use crate::layout::Approach;

pub const DISTANCE_BIN: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trip {
    pub enter: f64,
    pub exit: f64,
    pub road: Approach,
}

impl Trip {
    pub fn duration(&self) -> f64 {
        self.exit - self.enter
    }
}

/// Inter-vehicle distances inside the intersection, binned by 0.25 m.
/// Non-positive samples (touching or overlapping) are counted apart.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DistanceHistogram {
    pub counts: Vec<u64>,
    pub nonpositive: u64,
    pub samples: u64,
    pub min: Option<f64>,
}

impl DistanceHistogram {
    pub fn add(&mut self, d: f64) {
        self.samples += 1;
        self.min = Some(self.min.map_or(d, |m| m.min(d)));
        if d <= 0.0 {
            self.nonpositive += 1;
        }
        let bin = (d.max(0.0) / DISTANCE_BIN) as usize;
        if self.counts.len() <= bin {
            self.counts.resize(bin + 1, 0);
        }
        self.counts[bin] += 1;
    }

    pub fn merge(&mut self, other: &DistanceHistogram) {
        if self.counts.len() < other.counts.len() {
            self.counts.resize(other.counts.len(), 0);
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.nonpositive += other.nonpositive;
        self.samples += other.samples;
        self.min = match (self.min, other.min) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            let lo = i as f64 * DISTANCE_BIN;
            let _ = writeln!(out, "{lo:.2},{:.2},{c}", lo + DISTANCE_BIN);
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn push(&mut self, t: f64, v: f64) {
        self.points.push((t, v));
    }

    pub fn last(&self) -> Option<f64> {
        self.points.last().map(|p| p.1)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,value\n");
        for (t, v) in &self.points {
            let _ = writeln!(out, "{t:.2},{v}");
        }
        out
    }
}

/// Mean and population standard deviation; `(0, 0)` for no samples.
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, Default)]
pub struct MetricsCollector {
    trips: BTreeMap<u64, Trip>,
    distances: DistanceHistogram,
    flow_ratio: Series,
    waiting: Series,
}

impl MetricsCollector {
    pub fn record_trip(&mut self, vin: u64, road: Approach, enter: f64, exit: f64) -> Result<()> {
        if exit <= enter {
            return Err(Error::InvalidTrip { vin, enter, exit });
        }
        if self.trips.contains_key(&vin) {
            return Err(Error::DuplicateTrip(vin));
        }
        self.trips.insert(vin, Trip { enter, exit, road });
        Ok(())
    }

    /// All pairwise distances between the given footprints.
    pub fn sample_intersection_distances(&mut self, rects: &[OrientedRect]) {
        for i in 0..rects.len() {
            for j in 0..i {
                self.distances.add(rect_distance(&rects[i], &rects[j]));
            }
        }
    }

    /// Cumulative generated over exited (1 while nothing has exited) and the
    /// number of vehicles waiting.
    pub fn sample_counts(&mut self, t: f64, generated: usize, exited: usize, waiting: usize) {
        let ratio = if exited == 0 {
            1.0
        } else {
            generated as f64 / exited as f64
        };
        self.flow_ratio.push(t, ratio);
        self.waiting.push(t, waiting as f64);
    }

    pub fn crossed(&self) -> usize {
        self.trips.len()
    }

    pub fn trips(&self) -> &BTreeMap<u64, Trip> {
        &self.trips
    }

    pub fn finalize(self, generated: usize) -> Result<MetricsReport> {
        let crossed = self.trips.len();
        if generated < crossed {
            return Err(Error::CountMismatch { generated, crossed });
        }
        let durations: Vec<f64> = self.trips.values().map(Trip::duration).collect();
        let (avg, sd) = mean_sd(&durations);
        let by = |major: bool| {
            let d: Vec<f64> = self
                .trips
                .values()
                .filter(|t| t.road.is_major() == major)
                .map(Trip::duration)
                .collect();
            mean_sd(&d).0
        };
        let throughput = if generated == 0 {
            1.0
        } else {
            crossed as f64 / generated as f64
        };
        let effective = if throughput > 0.0 {
            avg / throughput
        } else {
            f64::INFINITY
        };
        Ok(MetricsReport {
            generated,
            crossed,
            throughput,
            avg_trip_time: avg,
            trip_time_sd: sd,
            effective_avg_trip_time: effective,
            major_avg_trip_time: by(true),
            minor_avg_trip_time: by(false),
            trip_durations: durations,
            distances: self.distances,
            flow_ratio: self.flow_ratio,
            waiting: self.waiting,
            max_confirmation_wait: 0.0,
            re_requests: 0,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub generated: usize,
    pub crossed: usize,
    pub throughput: f64,
    pub avg_trip_time: f64,
    /// Population standard deviation.
    pub trip_time_sd: f64,
    pub effective_avg_trip_time: f64,
    pub major_avg_trip_time: f64,
    pub minor_avg_trip_time: f64,
    pub trip_durations: Vec<f64>,
    pub distances: DistanceHistogram,
    pub flow_ratio: Series,
    pub waiting: Series,
    /// Longest communication-region entry to final confirmation (or signal
    /// permission) wait.
    pub max_confirmation_wait: f64,
    pub re_requests: u64,
}

impl MetricsReport {
    pub fn header() -> &'static str {
        "generated,crossed,throughput,avg_trip_time,trip_time_sd,effective_avg_trip_time,major_avg_trip_time,minor_avg_trip_time,max_confirmation_wait,re_requests"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.6},{:.4},{:.4},{:.4},{:.4},{:.4},{:.3},{}",
            self.generated,
            self.crossed,
            self.throughput,
            self.avg_trip_time,
            self.trip_time_sd,
            self.effective_avg_trip_time,
            self.major_avg_trip_time,
            self.minor_avg_trip_time,
            self.max_confirmation_wait,
            self.re_requests
        )
    }
}

/// Aggregate over runs sharing a configuration (one per seed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragedReport {
    pub runs: usize,
    pub avg_trip_time: f64,
    pub effective_avg_trip_time: f64,
    pub throughput: f64,
    pub major_avg_trip_time: f64,
    pub minor_avg_trip_time: f64,
    /// Mean of the per-run standard deviations.
    pub per_run_sd: f64,
    /// Standard deviation over all trips of all runs.
    pub pooled_sd: f64,
    pub distances: DistanceHistogram,
}

pub fn average(reports: &[MetricsReport]) -> AveragedReport {
    let n = reports.len().max(1) as f64;
    let avg = |f: fn(&MetricsReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    let pooled: Vec<f64> = reports
        .iter()
        .flat_map(|r| r.trip_durations.iter().copied())
        .collect();
    let mut distances = DistanceHistogram::default();
    for r in reports {
        distances.merge(&r.distances);
    }
    AveragedReport {
        runs: reports.len(),
        avg_trip_time: avg(|r| r.avg_trip_time),
        effective_avg_trip_time: avg(|r| r.effective_avg_trip_time),
        throughput: avg(|r| r.throughput),
        major_avg_trip_time: avg(|r| r.major_avg_trip_time),
        minor_avg_trip_time: avg(|r| r.minor_avg_trip_time),
        per_run_sd: avg(|r| r.trip_time_sd),
        pooled_sd: mean_sd(&pooled).1,
        distances,
    }
}
