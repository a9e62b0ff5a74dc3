use serde::{Deserialize, Serialize};

use crate::coordinator::{Techniques, DEFAULT_PAD_STEPS};
use crate::error::{Error, Result};
use crate::layout::LayoutParams;
use crate::motion::VehicleSpec;

/// Traffic volumes (expected vehicles per 10 minutes) and their per-road
/// spawn probabilities.
pub const VOLUME_TABLE: [(u32, f64); 5] = [
    (100, 0.03),
    (200, 0.06),
    (300, 0.08),
    (400, 0.11),
    (500, 0.14),
];
pub const SEEDS: [u64; 3] = [12, 21, 66];

pub fn spawn_probability(volume: u32) -> Result<f64> {
    VOLUME_TABLE
        .iter()
        .find(|(v, _)| *v == volume)
        .map(|(_, p)| *p)
        .ok_or_else(|| Error::InvalidConfig(format!("volume {volume} is not in the volume table")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControlMode {
    Baseline,
    Enhanced,
    #[serde(alias = "tl", alias = "traffic_light")]
    Tlight,
}

impl ControlMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "baseline" => Ok(Self::Baseline),
            "enhanced" => Ok(Self::Enhanced),
            "tlight" | "tl" | "traffic_light" => Ok(Self::Tlight),
            _ => Err(Error::InvalidConfig(format!("unknown mode `{s}`"))),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Baseline => "baseline",
            Self::Enhanced => "enhanced",
            Self::Tlight => "tlight",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunLength {
    /// Stop at this simulated time.
    Seconds(f64),
    /// Spawn this many vehicles, then run until every one has exited.
    Vehicles(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub mode: ControlMode,
    /// Technique subset for the coordinator; defaults to none for baseline
    /// and all four for enhanced.
    pub techniques: Option<Techniques>,
    pub run: RunLength,
    pub h: f64,
    pub volume: u32,
    /// Overrides the table lookup when set.
    pub spawn_probability: Option<f64>,
    pub seed: u64,
    pub unbalanced: bool,
    pub minor_share: f64,
    pub p_left: f64,
    pub p_straight: f64,
    pub p_right: f64,
    /// Initial speed range as fractions of v_m.
    pub speed_range: (f64, f64),
    /// Seconds between spawn draws.
    pub spawn_interval: f64,
    pub layout: LayoutParams,
    pub vehicle: VehicleSpec,
    /// Estimated-interval padding in sampling steps.
    pub pad_steps: f64,
    /// Simulated seconds allowed after the last spawn for the world to drain.
    pub drain_limit: f64,
    pub trace: bool,
    /// Keep every executed trajectory for post-hoc checks.
    pub keep_trajectories: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            mode: ControlMode::Enhanced,
            techniques: None,
            run: RunLength::Seconds(600.0),
            h: 0.05,
            volume: 300,
            spawn_probability: None,
            seed: 12,
            unbalanced: false,
            minor_share: 0.3,
            p_left: 0.2,
            p_straight: 0.6,
            p_right: 0.2,
            speed_range: (0.4, 1.0),
            spawn_interval: 1.0,
            layout: LayoutParams::default(),
            vehicle: VehicleSpec::default(),
            pad_steps: DEFAULT_PAD_STEPS,
            drain_limit: 3600.0,
            trace: false,
            keep_trajectories: false,
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn techniques(&self) -> Result<Techniques> {
        match (self.mode, self.techniques) {
            (ControlMode::Tlight, _) => Ok(Techniques::BASELINE),
            (_, Some(t)) => Techniques::new(t.a, t.b, t.c, t.d),
            (ControlMode::Baseline, None) => Ok(Techniques::BASELINE),
            (ControlMode::Enhanced, None) => Ok(Techniques::ENHANCED),
        }
    }

    pub fn base_probability(&self) -> Result<f64> {
        match self.spawn_probability {
            Some(p) => Ok(p),
            None => spawn_probability(self.volume),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.h > 0.0 && self.h.is_finite()) {
            return bad(format!("h must be > 0, got {}", self.h));
        }
        let p = self.base_probability()?;
        if !(0.0..=1.0).contains(&p) {
            return bad(format!("spawn probability {p} outside [0, 1]"));
        }
        let split = [self.p_left, self.p_straight, self.p_right];
        if split.iter().any(|x| !(0.0..=1.0).contains(x))
            || (split.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return bad(format!(
                "route split {split:?} must be probabilities summing to 1"
            ));
        }
        if !(0.0..=1.0).contains(&self.minor_share) {
            return bad(format!("minor share {} outside [0, 1]", self.minor_share));
        }
        let (lo, hi) = self.speed_range;
        if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
            return bad(format!(
                "speed range {:?} must satisfy 0 <= lo <= hi <= 1",
                self.speed_range
            ));
        }
        let ticks = self.spawn_interval / self.h;
        if !(self.spawn_interval > 0.0 && (ticks - ticks.round()).abs() < 1e-6) {
            return bad(format!(
                "spawn interval {} must be a positive multiple of h",
                self.spawn_interval
            ));
        }
        match self.run {
            RunLength::Seconds(t) if !(t > 0.0) => return bad(format!("duration {t} must be > 0")),
            RunLength::Vehicles(0) => return bad("vehicle target must be > 0".into()),
            _ => {}
        }
        if !(self.pad_steps >= 0.0) {
            return bad(format!("pad {} must be >= 0", self.pad_steps));
        }
        self.vehicle.validate()?;
        self.techniques()?;
        Ok(())
    }
}
