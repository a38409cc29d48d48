//! Monte Carlo oracle for the analytic delay model: a seeded, sequential
//! simulation of the two-queue tandem in which every packet's transmission
//! time comes from its own interference draw.
//!
//! The tandem is simulated through its exact waiting recursion. Both queues
//! are FCFS with one server and infinite buffers, so each packet's
//! departure depends only on its arrival, its service time, and the
//! previous departure; events are processed in packet order, which fixes
//! the (time, sequence) tie order deterministically.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::channel::ChannelParams;
use crate::delay::{QueueParams, TransmissionModel};
use crate::geometry::{
    aggregate_interference, interferer_distances, sample_hard_core, DeploymentParams,
    InterferenceStats,
};
use crate::numerics::{Grid, TabulatedDist};
use crate::{Error, Result};

/// How each packet's interference level is produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterferenceMode {
    /// Clipped Gaussian draw from the closed-form moments.
    Gaussian,
    /// Fresh hard-core deployment per packet, interference summed exactly.
    ExactGeometry,
}

impl InterferenceMode {
    /// The mode's config-file spelling.
    pub fn name(self) -> &'static str {
        match self {
            Self::Gaussian => "gaussian",
            Self::ExactGeometry => "exact_geometry",
        }
    }
}

/// Full description of one simulation run.
///
/// The radio queue is fed by the processing queue's actual departures, so
/// the configured analytic radio arrival rate plays no role here; at steady
/// state the departure rate equals the request rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub channel: ChannelParams,
    pub deployment: DeploymentParams,
    pub queues: QueueParams,
    /// Payload of one request over the radio link, in bits.
    pub payload_bits: f64,
    /// Total simulated requests, including warmup.
    pub n_requests: usize,
    /// Initial requests discarded before statistics.
    pub warmup: usize,
    pub seed: u64,
    pub interference_mode: InterferenceMode,
    /// Widens (or narrows) the Gaussian interference law; the
    /// exact-geometry mode has no such degree of freedom and ignores it.
    pub interference_std_scale: f64,
    /// Deadlines at which the summary reports empirical reliability, in s.
    pub deadlines_s: Vec<f64>,
    /// Divergence guard: the run aborts when either queue's backlog
    /// exceeds this.
    pub queue_cap: usize,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        self.deployment.validate()?;
        self.queues.validate()?;
        if !(self.payload_bits.is_finite() && self.payload_bits > 0.0) {
            return Err(Error::InvalidParameter {
                name: "payload_bits",
                value: self.payload_bits,
                reason: "must be finite and positive",
            });
        }
        if self.n_requests <= self.warmup {
            return Err(Error::InvalidParameter {
                name: "n_requests",
                value: self.n_requests as f64,
                reason: "must exceed the warmup count",
            });
        }
        if self.queue_cap == 0 {
            return Err(Error::InvalidParameter {
                name: "queue_cap",
                value: 0.0,
                reason: "must be positive",
            });
        }
        if !(self.interference_std_scale.is_finite() && self.interference_std_scale > 0.0) {
            return Err(Error::InvalidParameter {
                name: "interference_std_scale",
                value: self.interference_std_scale,
                reason: "must be finite and positive",
            });
        }
        for &d in &self.deadlines_s {
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::InvalidParameter {
                    name: "deadlines_s",
                    value: d,
                    reason: "deadlines must be finite and positive",
                });
            }
        }
        Ok(())
    }
}

/// Timing breakdown of one request, all in seconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RequestRecord {
    pub arrival_s: f64,
    pub q1_wait_s: f64,
    pub q1_service_s: f64,
    pub q2_wait_s: f64,
    pub q2_service_s: f64,
    /// Sum of the four stage delays.
    pub total_s: f64,
}

/// Post-warmup aggregate statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub n_counted: usize,
    pub mean_q1_wait_s: f64,
    pub mean_q1_sojourn_s: f64,
    pub mean_q2_wait_s: f64,
    pub mean_q2_sojourn_s: f64,
    pub mean_total_s: f64,
    /// Fraction of counted requests within each configured deadline,
    /// as (deadline, fraction) pairs.
    pub reliability: Vec<(f64, f64)>,
}

/// Everything a run produced: post-warmup per-request records, the
/// processing queue's post-warmup inter-departure gaps, and the summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub records: Vec<RequestRecord>,
    pub q1_departure_gaps_s: Vec<f64>,
    pub summary: SimSummary,
}

/// Run one replication. Deterministic: the same config (seed included)
/// produces the identical result.
pub fn run_tandem(cfg: &SimConfig) -> Result<SimResult> {
    cfg.validate()?;

    let gaussian_stats = match cfg.interference_mode {
        InterferenceMode::Gaussian => {
            let mut stats = InterferenceStats::from_geometry(&cfg.deployment, &cfg.channel)?;
            stats.std_w *= cfg.interference_std_scale;
            Some(stats)
        }
        InterferenceMode::ExactGeometry => None,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let arrival_gap = Exp::new(cfg.queues.request_rate_hz).expect("validated rate");
    let q1_service = Exp::new(cfg.queues.processing_rate_hz).expect("validated rate");

    let n = cfg.n_requests;
    let mut q1_departures: Vec<f64> = Vec::with_capacity(n);
    let mut q2_departures: Vec<f64> = Vec::with_capacity(n);
    let mut records = Vec::with_capacity(n - cfg.warmup);
    let mut gaps = Vec::with_capacity(n.saturating_sub(cfg.warmup + 1));

    let mut arrival = 0.0_f64;
    let mut ptr1 = 0usize;
    let mut ptr2 = 0usize;

    for i in 0..n {
        arrival += arrival_gap.sample(&mut rng);

        // Backlog seen on arrival: packets admitted earlier and not yet
        // departed (the one in service included).
        while ptr1 < i && q1_departures[ptr1] <= arrival {
            ptr1 += 1;
        }
        let backlog1 = i - ptr1;
        if backlog1 > cfg.queue_cap {
            return Err(Error::Divergence {
                queue: "processing queue",
                backlog: backlog1,
                cap: cfg.queue_cap,
            });
        }

        let s1 = q1_service.sample(&mut rng);
        let w1 = if i == 0 {
            0.0
        } else {
            (q1_departures[i - 1] - arrival).max(0.0)
        };
        let d1 = arrival + w1 + s1;
        q1_departures.push(d1);

        let interference = match cfg.interference_mode {
            InterferenceMode::Gaussian => gaussian_stats
                .as_ref()
                .expect("stats exist in gaussian mode")
                .sample(&mut rng),
            InterferenceMode::ExactGeometry => {
                let points = sample_hard_core(&cfg.deployment, &mut rng)?;
                let distances = interferer_distances(&points, &cfg.deployment);
                aggregate_interference(&distances, &cfg.channel)
            }
        };
        let s2 = cfg.payload_bits / cfg.channel.capacity(interference);

        while ptr2 < i && q2_departures[ptr2] <= d1 {
            ptr2 += 1;
        }
        let backlog2 = i - ptr2;
        if backlog2 > cfg.queue_cap {
            return Err(Error::Divergence {
                queue: "radio queue",
                backlog: backlog2,
                cap: cfg.queue_cap,
            });
        }

        let w2 = if i == 0 {
            0.0
        } else {
            (q2_departures[i - 1] - d1).max(0.0)
        };
        let d2 = d1 + w2 + s2;
        q2_departures.push(d2);

        if i >= cfg.warmup {
            records.push(RequestRecord {
                arrival_s: arrival,
                q1_wait_s: w1,
                q1_service_s: s1,
                q2_wait_s: w2,
                q2_service_s: s2,
                total_s: w1 + s1 + w2 + s2,
            });
            if i > cfg.warmup {
                gaps.push(d1 - q1_departures[i - 1]);
            }
        }
    }

    let summary = summarize(&records, &cfg.deadlines_s);
    Ok(SimResult {
        records,
        q1_departure_gaps_s: gaps,
        summary,
    })
}

/// Seeded batch of standalone transmission delays: one clipped Gaussian
/// interference draw per packet, mapped through the inverse delay relation.
/// No queueing is involved; this feeds density-vs-histogram comparisons.
pub fn transmission_delay_samples(
    model: &TransmissionModel,
    stats: &InterferenceStats,
    n: usize,
    seed: u64,
) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| model.delay_for_interference(stats.sample(&mut rng)))
        .collect()
}

fn summarize(records: &[RequestRecord], deadlines_s: &[f64]) -> SimSummary {
    let n = records.len();
    let inv = 1.0 / n as f64;
    let mut sums = [0.0_f64; 5];
    for r in records {
        sums[0] += r.q1_wait_s;
        sums[1] += r.q1_wait_s + r.q1_service_s;
        sums[2] += r.q2_wait_s;
        sums[3] += r.q2_wait_s + r.q2_service_s;
        sums[4] += r.total_s;
    }
    let reliability = deadlines_s
        .iter()
        .map(|&d| {
            let hits = records.iter().filter(|r| r.total_s <= d).count();
            (d, hits as f64 / n as f64)
        })
        .collect();
    SimSummary {
        n_counted: n,
        mean_q1_wait_s: sums[0] * inv,
        mean_q1_sojourn_s: sums[1] * inv,
        mean_q2_wait_s: sums[2] * inv,
        mean_q2_sojourn_s: sums[3] * inv,
        mean_total_s: sums[4] * inv,
        reliability,
    }
}

/// Histogram of samples as a density on `grid`: bin `k` covers one grid
/// step centered on the k-th point. Samples outside the grid are counted
/// as lost mass.
pub fn empirical_dist(samples: &[f64], grid: Grid) -> Result<TabulatedDist> {
    if samples.is_empty() {
        return Err(Error::InvalidParameter {
            name: "samples",
            value: 0.0,
            reason: "histogram needs at least one sample",
        });
    }
    let h = grid.step();
    let mut counts = vec![0u64; grid.len()];
    let mut outside = 0u64;
    for &x in samples {
        let idx = ((x / h) + 0.5).floor();
        if idx >= 0.0 && (idx as usize) < grid.len() {
            counts[idx as usize] += 1;
        } else {
            outside += 1;
        }
    }
    let scale = 1.0 / (samples.len() as f64 * h);
    let values = counts.iter().map(|&c| c as f64 * scale).collect();
    TabulatedDist::new_pdf(grid, values)
        .map(|d| d.with_lost_mass(outside as f64 / samples.len() as f64))
}

/// Exact Kolmogorov-Smirnov statistic between the samples' empirical
/// distribution and a reference distribution function.
pub fn ks_against<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut worst = 0.0_f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        worst = worst.max((f - i as f64 / n).abs());
        worst = worst.max((f - (i as f64 + 1.0) / n).abs());
    }
    worst
}
