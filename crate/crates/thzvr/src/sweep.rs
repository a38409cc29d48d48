//! Parameter sweeps over the analytic pipeline: transmission bandwidth and
//! interference region radius. Rows where the radio queue is unstable are
//! kept in the output, flagged rather than dropped, so a sweep always
//! covers its whole range.

use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::delay::{analyze, TransmissionModel};
use crate::geometry::InterferenceStats;
use crate::{Error, Result};

/// Reliability level the bandwidth crossing detector looks for.
pub const FIVE_NINES: f64 = 0.99999;

/// One bandwidth sweep row.
#[derive(Clone, Debug)]
pub struct BandwidthPoint {
    pub bandwidth_hz: f64,
    /// Whether the radio queue is stable at this bandwidth.
    pub stable: bool,
    /// Offered load of the radio queue; can exceed one on unstable rows.
    pub utilization: f64,
    /// Shannon rate at the mean interference level, in bit/s.
    pub link_rate_bps: f64,
    pub mean_processing_sojourn_s: f64,
    /// Infinite on unstable rows.
    pub mean_radio_sojourn_s: f64,
    /// Reliability per configured deadline; zero on unstable rows.
    pub reliability: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct BandwidthSweepOutcome {
    pub deadlines_s: Vec<f64>,
    /// Rows in ascending bandwidth order.
    pub points: Vec<BandwidthPoint>,
    /// Per deadline, the smallest swept bandwidth whose reliability
    /// reaches five nines.
    pub five_nines_bandwidth_hz: Vec<Option<f64>>,
    /// Smallest swept bandwidth where the radio stage's mean sojourn drops
    /// below the processing stage's.
    pub sojourn_crossover_bandwidth_hz: Option<f64>,
}

pub fn sweep_bandwidth(cfg: &ExperimentConfig) -> Result<BandwidthSweepOutcome> {
    cfg.validate()?;
    let stats = cfg.interference_stats()?;
    let queues = cfg.queue_params();
    let spec = cfg.analysis_spec();
    let deadlines_s = cfg.deadlines_s.clone();

    let points: Vec<BandwidthPoint> = cfg
        .bandwidth_sweep
        .values()
        .par_iter()
        .map(|&bandwidth_hz| -> Result<BandwidthPoint> {
            let mut channel = cfg.channel;
            channel.bandwidth_hz = bandwidth_hz;
            let model = TransmissionModel::new(channel, stats, cfg.payload_bits)?;
            match analyze(&model, &queues, &spec) {
                Ok(analysis) => Ok(BandwidthPoint {
                    bandwidth_hz,
                    stable: true,
                    utilization: analysis.utilization,
                    link_rate_bps: channel.capacity(stats.mean_w),
                    mean_processing_sojourn_s: analysis.mean_processing_sojourn_s,
                    mean_radio_sojourn_s: analysis.mean_radio_sojourn_s,
                    reliability: deadlines_s
                        .iter()
                        .map(|&d| analysis.reliability(d))
                        .collect(),
                }),
                Err(Error::UnstableQueue { rho }) => Ok(BandwidthPoint {
                    bandwidth_hz,
                    stable: false,
                    utilization: rho,
                    link_rate_bps: channel.capacity(stats.mean_w),
                    mean_processing_sojourn_s: 1.0 / queues.processing_sojourn_rate_hz(),
                    mean_radio_sojourn_s: f64::INFINITY,
                    reliability: vec![0.0; deadlines_s.len()],
                }),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;

    let five_nines_bandwidth_hz = (0..deadlines_s.len())
        .map(|di| {
            points
                .iter()
                .find(|p| p.stable && p.reliability[di] >= FIVE_NINES)
                .map(|p| p.bandwidth_hz)
        })
        .collect();
    let sojourn_crossover_bandwidth_hz = points
        .iter()
        .find(|p| p.stable && p.mean_radio_sojourn_s < p.mean_processing_sojourn_s)
        .map(|p| p.bandwidth_hz);

    Ok(BandwidthSweepOutcome {
        deadlines_s,
        points,
        five_nines_bandwidth_hz,
        sojourn_crossover_bandwidth_hz,
    })
}

/// One region sweep row.
#[derive(Clone, Debug)]
pub struct RegionPoint {
    pub serving_distance_m: f64,
    pub region_radius_m: f64,
    pub stable: bool,
    pub utilization: f64,
    /// Mean transmission delay; a moment-estimate on unstable rows.
    pub mean_transmission_s: f64,
    /// Reliability at the largest configured deadline; zero on unstable
    /// rows.
    pub reliability: f64,
    /// Backward difference of reliability along the radius, per m; zero on
    /// each serving distance's first row.
    pub slope_per_m: f64,
}

#[derive(Clone, Debug)]
pub struct RegionSweepOutcome {
    /// Deadline the reliability column refers to.
    pub deadline_s: f64,
    /// Rows grouped by serving distance, radius ascending within a group.
    pub points: Vec<RegionPoint>,
}

pub fn sweep_region(cfg: &ExperimentConfig) -> Result<RegionSweepOutcome> {
    cfg.validate()?;
    let queues = cfg.queue_params();
    let spec = cfg.analysis_spec();
    let deadline_s = cfg.max_deadline_s();
    let radii = cfg.region_sweep.radius_m.values();

    let cases: Vec<(f64, f64)> = cfg
        .region_sweep
        .serving_distances_m
        .iter()
        .flat_map(|&d0| radii.iter().map(move |&omega| (d0, omega)))
        .collect();

    let rows: Vec<RegionPoint> = cases
        .par_iter()
        .map(
            |&(serving_distance_m, region_radius_m)| -> Result<RegionPoint> {
                let mut deployment = cfg.deployment;
                deployment.region_radius_m = region_radius_m;
                let mut channel = cfg.channel;
                channel.serving_distance_m = serving_distance_m;
                let mut stats = InterferenceStats::from_geometry(&deployment, &channel)?;
                stats.std_w *= cfg.interference_std_scale;
                let model = TransmissionModel::new(channel, stats, cfg.payload_bits)?;
                match analyze(&model, &queues, &spec) {
                    Ok(analysis) => Ok(RegionPoint {
                        serving_distance_m,
                        region_radius_m,
                        stable: true,
                        utilization: analysis.utilization,
                        mean_transmission_s: analysis.service.mean_s,
                        reliability: analysis.reliability(deadline_s),
                        slope_per_m: 0.0,
                    }),
                    Err(Error::UnstableQueue { rho }) => Ok(RegionPoint {
                        serving_distance_m,
                        region_radius_m,
                        stable: false,
                        utilization: rho,
                        mean_transmission_s: model.estimated_moments().mean_s,
                        reliability: 0.0,
                        slope_per_m: 0.0,
                    }),
                    Err(e) => Err(e),
                }
            },
        )
        .collect::<Result<_>>()?;

    let mut points = rows;
    for i in 0..points.len() {
        if i % radii.len() == 0 {
            continue;
        }
        let dr = points[i].region_radius_m - points[i - 1].region_radius_m;
        points[i].slope_per_m = (points[i].reliability - points[i - 1].reliability) / dr;
    }

    Ok(RegionSweepOutcome { deadline_s, points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RangeSweep;

    #[test]
    fn bandwidth_sweep_orders_rows_and_tracks_load() {
        let mut cfg = ExperimentConfig::bandwidth_preset();
        cfg.bandwidth_sweep = RangeSweep {
            min: 8e9,
            max: 1.2e10,
            step: 1e9,
        };
        let out = sweep_bandwidth(&cfg).unwrap();
        assert_eq!(out.points.len(), 5);
        assert_eq!(out.deadlines_s, vec![0.010, 0.020, 0.030]);
        for w in out.points.windows(2) {
            assert!(w[0].bandwidth_hz < w[1].bandwidth_hz);
            assert!(w[0].link_rate_bps < w[1].link_rate_bps);
        }
        for p in &out.points {
            assert!(p.stable, "expected stability at {} Hz", p.bandwidth_hz);
            assert!(p.utilization > 0.0 && p.utilization < 1.0);
            for &r in &p.reliability {
                assert!((0.0..=1.0).contains(&r));
            }
        }
        // Wider channels drain the radio queue faster on every axis. The
        // reliability comparison leaves room for transform-size roundoff,
        // which sits near 1e-10 after compound damping.
        for w in out.points.windows(2) {
            assert!(w[1].utilization < w[0].utilization);
            assert!(w[1].mean_radio_sojourn_s < w[0].mean_radio_sojourn_s);
            for di in 0..out.deadlines_s.len() {
                assert!(
                    w[1].reliability[di] >= w[0].reliability[di] - 1e-8,
                    "deadline {} regressed at {:e}: {} vs {}",
                    out.deadlines_s[di],
                    w[1].bandwidth_hz,
                    w[1].reliability[di],
                    w[0].reliability[di]
                );
            }
        }
    }

    #[test]
    fn undersized_bandwidth_rows_are_flagged_unstable() {
        let mut cfg = ExperimentConfig::bandwidth_preset();
        cfg.bandwidth_sweep = RangeSweep {
            min: 5e9,
            max: 7e9,
            step: 1e9,
        };
        let out = sweep_bandwidth(&cfg).unwrap();
        let first = &out.points[0];
        assert!(!first.stable);
        assert!(first.utilization >= 1.0);
        assert!(first.mean_radio_sojourn_s.is_infinite());
        assert!(first.reliability.iter().all(|&r| r == 0.0));
        assert_eq!(out.sojourn_crossover_bandwidth_hz, None);
    }

    #[test]
    fn region_sweep_groups_rows_and_differentiates() {
        let mut cfg = ExperimentConfig::region_preset();
        cfg.region_sweep.radius_m = RangeSweep {
            min: 2.0,
            max: 4.0,
            step: 1.0,
        };
        cfg.region_sweep.serving_distances_m = vec![1.0, 1.5];
        let out = sweep_region(&cfg).unwrap();
        assert_eq!(out.deadline_s, 0.030);
        assert_eq!(out.points.len(), 6);
        for (i, p) in out.points.iter().enumerate() {
            assert_eq!(p.serving_distance_m, if i < 3 { 1.0 } else { 1.5 });
            assert_eq!(p.region_radius_m, [2.0, 3.0, 4.0][i % 3]);
            assert!(p.stable);
        }
        for group in out.points.chunks(3) {
            assert_eq!(group[0].slope_per_m, 0.0);
            for w in group.windows(2) {
                // More interferers can only hurt.
                assert!(w[1].reliability <= w[0].reliability + 1e-8);
                assert!(w[1].mean_transmission_s >= w[0].mean_transmission_s);
                let expect = (w[1].reliability - w[0].reliability)
                    / (w[1].region_radius_m - w[0].region_radius_m);
                assert_eq!(w[1].slope_per_m, expect);
            }
        }
    }

    #[test]
    fn region_radius_inside_hard_core_is_rejected() {
        let mut cfg = ExperimentConfig::region_preset();
        cfg.region_sweep.radius_m = RangeSweep {
            min: 0.2,
            max: 0.4,
            step: 0.1,
        };
        let err = sweep_region(&cfg).unwrap_err();
        match err {
            Error::InvalidParameter { name, .. } => assert_eq!(name, "region_radius_m"),
            other => panic!("unexpected error {other:?}"),
        }
    }
}
