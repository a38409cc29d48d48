//! Experiment configuration: named presets, TOML-friendly structures, and
//! resolution into the parameter types the analysis and simulator consume.
//!
//! Every field carries a default taken from the `default` preset, so a
//! config file only needs the values it changes. The `channel` and
//! `deployment` sections are all-or-nothing: when present they must be
//! complete.

use serde::{Deserialize, Serialize};

use crate::channel::ChannelParams;
use crate::delay::{AnalysisSpec, QueueParams, TransmissionModel};
use crate::geometry::{DeploymentParams, InterferenceStats};
use crate::simulator::{InterferenceMode, SimConfig};
use crate::{Error, Result};

/// Preset names accepted by [`ExperimentConfig::preset`].
pub const PRESET_NAMES: [&str; 4] = ["default", "bandwidth", "region", "geometry-validation"];

/// How the radio queue's analytic arrival rate is chosen.
///
/// The simulator always feeds the radio queue from actual processing-queue
/// departures; this choice only affects the analytic load.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadioArrivalMode {
    /// Load the radio queue at the request arrival rate, the steady-state
    /// throughput of the processing queue.
    RequestRate,
    /// Load the radio queue at the processing service rate, a conservative
    /// burst-season figure.
    ProcessingRate,
    /// Fixed rate in 1/s.
    Explicit(f64),
}

/// Arrival and service rates of the two queues, with the radio arrival
/// rate still symbolic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QueueConfig {
    /// Request arrival rate at the processing queue, in 1/s.
    pub request_rate_hz: f64,
    /// Processing queue service rate, in 1/s.
    pub processing_rate_hz: f64,
    pub radio_arrival: RadioArrivalMode,
}

impl Default for QueueConfig {
    fn default() -> Self {
        Self {
            request_rate_hz: 0.1,
            processing_rate_hz: 200.0,
            radio_arrival: RadioArrivalMode::RequestRate,
        }
    }
}

impl QueueConfig {
    pub fn resolve(&self) -> QueueParams {
        let radio_arrival_rate_hz = match self.radio_arrival {
            RadioArrivalMode::RequestRate => self.request_rate_hz,
            RadioArrivalMode::ProcessingRate => self.processing_rate_hz,
            RadioArrivalMode::Explicit(rate_hz) => rate_hz,
        };
        QueueParams {
            request_rate_hz: self.request_rate_hz,
            processing_rate_hz: self.processing_rate_hz,
            radio_arrival_rate_hz,
        }
    }
}

/// Grid resolution and tail accuracy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    /// Number of grid points across the largest deadline; the grid step is
    /// the largest deadline divided by this.
    pub points_per_max_deadline: u32,
    /// Probability mass allowed to escape past the analysis horizon.
    pub tail_epsilon: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            points_per_max_deadline: 1 << 14,
            tail_epsilon: 1e-9,
        }
    }
}

/// Monte Carlo run settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSettings {
    /// Total simulated requests, including warmup.
    pub n_requests: usize,
    /// Fraction of requests discarded before statistics, in [0, 0.9].
    pub warmup_fraction: f64,
    pub seed: u64,
    pub interference_mode: InterferenceMode,
    /// Divergence guard on either queue's backlog.
    pub queue_cap: usize,
    /// Independent replications (seed, seed+1, ...) for spread estimates.
    pub replications: u32,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            n_requests: 100_000,
            warmup_fraction: 0.1,
            seed: 7,
            interference_mode: InterferenceMode::Gaussian,
            queue_cap: 1_000_000,
            replications: 10,
        }
    }
}

/// Inclusive arithmetic progression from `min` to `max`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeSweep {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl RangeSweep {
    pub fn validate(&self, name: &'static str) -> Result<()> {
        if !(self.min.is_finite() && self.min > 0.0) {
            return Err(Error::InvalidParameter {
                name,
                value: self.min,
                reason: "sweep minimum must be finite and positive",
            });
        }
        if !(self.max.is_finite() && self.max >= self.min) {
            return Err(Error::InvalidParameter {
                name,
                value: self.max,
                reason: "sweep maximum must be finite and at least the minimum",
            });
        }
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(Error::InvalidParameter {
                name,
                value: self.step,
                reason: "sweep step must be finite and positive",
            });
        }
        if (self.max - self.min) / self.step > 10_000.0 {
            return Err(Error::InvalidParameter {
                name,
                value: self.step,
                reason: "sweep step yields more than 10000 points",
            });
        }
        Ok(())
    }

    /// Grid points, endpoints included when `max` lands on the progression.
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.max - self.min) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|k| self.min + k as f64 * self.step).collect()
    }
}

/// Region sweep: interference region radii crossed with serving distances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegionSweep {
    pub radius_m: RangeSweep,
    pub serving_distances_m: Vec<f64>,
}

impl Default for RegionSweep {
    fn default() -> Self {
        Self {
            radius_m: RangeSweep {
                min: 0.5,
                max: 8.0,
                step: 0.25,
            },
            serving_distances_m: vec![1.0, 1.5, 2.0],
        }
    }
}

impl RegionSweep {
    pub fn validate(&self) -> Result<()> {
        self.radius_m.validate("region_sweep.radius_m")?;
        if self.serving_distances_m.is_empty() {
            return Err(Error::Config(
                "region_sweep.serving_distances_m must not be empty".into(),
            ));
        }
        for &d in &self.serving_distances_m {
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::InvalidParameter {
                    name: "region_sweep.serving_distances_m",
                    value: d,
                    reason: "must be finite and positive",
                });
            }
        }
        Ok(())
    }
}

/// One complete experiment description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub channel: ChannelParams,
    pub deployment: DeploymentParams,
    pub queues: QueueConfig,
    /// Payload of one request over the radio link, in bits.
    pub payload_bits: f64,
    /// Multiplier on the Gaussian interference spread, applied to both the
    /// analytic density and the simulator's Gaussian mode; 1 leaves the
    /// closed-form moments untouched.
    pub interference_std_scale: f64,
    /// Deadlines to report reliability at, in s, strictly increasing.
    pub deadlines_s: Vec<f64>,
    pub grid: GridConfig,
    pub sim: SimSettings,
    pub bandwidth_sweep: RangeSweep,
    pub region_sweep: RegionSweep,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            channel: ChannelParams {
                carrier_hz: 1e12,
                bandwidth_hz: 1e10,
                tx_power_w: 1.0,
                absorption_per_m: 0.0016,
                serving_distance_m: 0.5,
                noise_temp_k: 300.0,
            },
            deployment: DeploymentParams {
                hard_core_radius_m: 0.9,
                cell_intensity_per_m2: 0.31,
                region_radius_m: 34.0,
                window_side_m: 70.0,
            },
            queues: QueueConfig::default(),
            payload_bits: 1e7,
            interference_std_scale: 1.0,
            deadlines_s: vec![0.010, 0.020, 0.030],
            grid: GridConfig::default(),
            sim: SimSettings::default(),
            bandwidth_sweep: RangeSweep {
                min: 5e9,
                max: 2e10,
                step: 5e8,
            },
            region_sweep: RegionSweep::default(),
        }
    }
}

impl ExperimentConfig {
    /// The named preset, or a config error listing valid names.
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "default" => Ok(Self::default()),
            "bandwidth" => Ok(Self::bandwidth_preset()),
            "region" => Ok(Self::region_preset()),
            "geometry-validation" => Ok(Self::geometry_validation_preset()),
            other => Err(Error::Config(format!(
                "unknown preset '{other}'; valid presets: {}",
                PRESET_NAMES.join(", ")
            ))),
        }
    }

    /// Bandwidth sweep study: a faster processing stage and the radio
    /// queue loaded at the processing rate, so the radio stage dominates
    /// at narrow bandwidths and hands over as bandwidth grows.
    pub fn bandwidth_preset() -> Self {
        let mut cfg = Self::default();
        cfg.queues.processing_rate_hz = 1300.0;
        cfg.queues.radio_arrival = RadioArrivalMode::ProcessingRate;
        cfg
    }

    /// Region sweep study: dense cells with a small hard core inside a
    /// room-sized window, reliability probed at the largest deadline only.
    pub fn region_preset() -> Self {
        let mut cfg = Self {
            deployment: DeploymentParams {
                hard_core_radius_m: 0.3,
                cell_intensity_per_m2: 2.47,
                region_radius_m: 4.0,
                window_side_m: 20.0,
            },
            deadlines_s: vec![0.030],
            ..Self::default()
        };
        cfg.channel.serving_distance_m = 1.0;
        cfg.queues.processing_rate_hz = 1300.0;
        cfg
    }

    /// Geometry cross-check: the one region-to-core ratio where the
    /// closed-form interference mean equals the exact annulus average, so
    /// the sampler can be held against the formulas directly.
    pub fn geometry_validation_preset() -> Self {
        let mut cfg = Self {
            deployment: DeploymentParams {
                hard_core_radius_m: 1.0,
                cell_intensity_per_m2: 0.12,
                region_radius_m: 2.0 / 3f64.sqrt(),
                window_side_m: 8.0,
            },
            ..Self::default()
        };
        cfg.channel.serving_distance_m = 1.0;
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        self.deployment.validate()?;
        self.queue_params().validate()?;
        if !(self.payload_bits.is_finite() && self.payload_bits > 0.0) {
            return Err(Error::InvalidParameter {
                name: "payload_bits",
                value: self.payload_bits,
                reason: "must be finite and positive",
            });
        }
        if !(self.interference_std_scale.is_finite() && self.interference_std_scale > 0.0) {
            return Err(Error::InvalidParameter {
                name: "interference_std_scale",
                value: self.interference_std_scale,
                reason: "must be finite and positive",
            });
        }
        if self.deadlines_s.is_empty() {
            return Err(Error::Config("deadlines_s must not be empty".into()));
        }
        let mut prev = 0.0;
        for &d in &self.deadlines_s {
            if !(d.is_finite() && d > prev) {
                return Err(Error::InvalidParameter {
                    name: "deadlines_s",
                    value: d,
                    reason: "must be finite, positive, and strictly increasing",
                });
            }
            prev = d;
        }
        if !(2..=1 << 22).contains(&self.grid.points_per_max_deadline) {
            return Err(Error::InvalidParameter {
                name: "grid.points_per_max_deadline",
                value: self.grid.points_per_max_deadline as f64,
                reason: "must be between 2 and 2^22",
            });
        }
        self.analysis_spec().validate()?;
        if self.sim.n_requests < 2 {
            return Err(Error::InvalidParameter {
                name: "sim.n_requests",
                value: self.sim.n_requests as f64,
                reason: "must be at least 2",
            });
        }
        if !(self.sim.warmup_fraction.is_finite()
            && (0.0..=0.9).contains(&self.sim.warmup_fraction))
        {
            return Err(Error::InvalidParameter {
                name: "sim.warmup_fraction",
                value: self.sim.warmup_fraction,
                reason: "must lie in [0, 0.9]",
            });
        }
        if self.sim.queue_cap == 0 {
            return Err(Error::InvalidParameter {
                name: "sim.queue_cap",
                value: 0.0,
                reason: "must be positive",
            });
        }
        if self.sim.replications == 0 {
            return Err(Error::InvalidParameter {
                name: "sim.replications",
                value: 0.0,
                reason: "must be positive",
            });
        }
        self.bandwidth_sweep.validate("bandwidth_sweep")?;
        self.region_sweep.validate()?;
        Ok(())
    }

    pub fn max_deadline_s(&self) -> f64 {
        self.deadlines_s
            .iter()
            .fold(f64::NEG_INFINITY, |a, &b| a.max(b))
    }

    pub fn queue_params(&self) -> QueueParams {
        self.queues.resolve()
    }

    pub fn analysis_spec(&self) -> AnalysisSpec {
        let max_deadline_s = self.max_deadline_s();
        AnalysisSpec {
            grid_step_s: max_deadline_s / f64::from(self.grid.points_per_max_deadline),
            max_deadline_s,
            tail_epsilon: self.grid.tail_epsilon,
        }
    }

    pub fn interference_stats(&self) -> Result<InterferenceStats> {
        let mut stats = InterferenceStats::from_geometry(&self.deployment, &self.channel)?;
        stats.std_w *= self.interference_std_scale;
        Ok(stats)
    }

    pub fn transmission_model(&self) -> Result<TransmissionModel> {
        TransmissionModel::new(self.channel, self.interference_stats()?, self.payload_bits)
    }

    pub fn sim_config(&self) -> SimConfig {
        let warmup = (self.sim.n_requests as f64 * self.sim.warmup_fraction).round() as usize;
        SimConfig {
            channel: self.channel,
            deployment: self.deployment,
            queues: self.queue_params(),
            payload_bits: self.payload_bits,
            n_requests: self.sim.n_requests,
            warmup,
            seed: self.sim.seed,
            interference_mode: self.sim.interference_mode,
            interference_std_scale: self.interference_std_scale,
            deadlines_s: self.deadlines_s.clone(),
            queue_cap: self.sim.queue_cap,
        }
    }
}
