//! The acceptance gate: nine checks that hold the analytic pipeline, the
//! simulator, and the geometry sampler against each other and against
//! closed forms. Each check returns a pass/fail verdict with the measured
//! quantities spelled out, so a failure names its margin.

use std::time::Instant;

use crate::config::ExperimentConfig;
use crate::delay::exponential_cdf;
use crate::delay::{analyze, radio_queue_law, AnalysisSpec, ServiceMoments};
use crate::geometry::{aggregate_interference, interferer_distances, sample_hard_core_seeded};
use crate::numerics::{l1_distance, ConvMode, Grid};
use crate::simulator::{empirical_dist, ks_against, run_tandem, transmission_delay_samples};
use crate::sweep::{sweep_bandwidth, sweep_region, BandwidthSweepOutcome, RegionSweepOutcome};
use crate::Result;

/// Verdict of one acceptance check.
#[derive(Clone, Debug)]
pub struct CriterionResult {
    pub name: &'static str,
    pub pass: bool,
    /// Measured quantities and their bounds, human-readable.
    pub detail: String,
}

impl CriterionResult {
    /// The one-line form printed by the acceptance test and the CLI.
    pub fn line(&self) -> String {
        format!(
            "{} {} ({})",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

#[derive(Clone, Debug)]
pub struct ValidationOutcome {
    pub criteria: Vec<CriterionResult>,
}

impl ValidationOutcome {
    pub fn all_pass(&self) -> bool {
        self.criteria.iter().all(|c| c.pass)
    }
}

/// Run every acceptance check. `seed` drives all Monte Carlo parts.
pub fn run_all(seed: u64) -> Result<ValidationOutcome> {
    let bandwidth = sweep_bandwidth(&ExperimentConfig::bandwidth_preset())?;
    let region = sweep_region(&ExperimentConfig::region_preset())?;
    let criteria = vec![
        transmission_density_matches_sampling(seed)?,
        slope_matches_finite_differences()?,
        density_mass_matches_gaussian_share()?,
        waiting_series_matches_exponential_closed_form()?,
        end_to_end_matches_simulation(seed)?,
        reliability_monotone_in_sweeps(&bandwidth, &region),
        headline_operating_points(&bandwidth),
        hard_core_geometry_moments(seed)?,
        grid_step_convergence()?,
    ];
    Ok(ValidationOutcome { criteria })
}

/// Transmission-delay density against a sampled histogram: draw clipped
/// Gaussian interference per packet, map each draw to its delay, and
/// compare bin heights in L1.
pub fn transmission_density_matches_sampling(seed: u64) -> Result<CriterionResult> {
    const N: usize = 100_000;
    let started = Instant::now();
    let cfg = ExperimentConfig::default();
    let model = cfg.transmission_model()?;
    let stats = cfg.interference_stats()?;
    let delays = transmission_delay_samples(&model, &stats, N, seed);
    let grid = Grid::new(2e-5, 80)?;
    let histogram = empirical_dist(&delays, grid)?;
    let analytic = model.tabulate_pdf(grid)?;
    let l1 = l1_distance(&analytic, &histogram)?;
    let runtime_s = started.elapsed().as_secs_f64();
    Ok(CriterionResult {
        name: "transmission-density-matches-sampling",
        pass: l1 < 0.05 && runtime_s < 60.0,
        detail: format!("l1 {l1:.4} < 0.05, {N} packets in {runtime_s:.2} s < 60 s"),
    })
}

/// Interference slope against central finite differences of the inverse
/// delay map, at 100 points spanning the density's support.
pub fn slope_matches_finite_differences() -> Result<CriterionResult> {
    let cfg = ExperimentConfig::default();
    let model = cfg.transmission_model()?;
    let stats = cfg.interference_stats()?;
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        // Interference from 2.5 deviations below the mean to 4 above maps
        // to delays covering all but a sliver of the density.
        let z = -2.5 + 6.5 * k as f64 / 99.0;
        let t = model.delay_for_interference(stats.mean_w + z * stats.std_w);
        let h = t * 1e-6;
        let fd =
            (model.interference_for_delay(t + h) - model.interference_for_delay(t - h)) / (2.0 * h);
        let rel = (model.interference_slope(t) - fd.abs()).abs() / fd.abs();
        worst = worst.max(rel);
    }
    Ok(CriterionResult {
        name: "slope-matches-finite-differences",
        pass: worst < 1e-5,
        detail: format!("worst relative error {worst:.2e} < 1e-5 at 100 points"),
    })
}

/// The density must integrate to the Gaussian mass above the negated noise
/// floor; the remainder is the zero-delay atom plus the far tail.
pub fn density_mass_matches_gaussian_share() -> Result<CriterionResult> {
    let cfg = ExperimentConfig::default();
    let model = cfg.transmission_model()?;
    let grid = Grid::new(cfg.analysis_spec().grid_step_s, 4096)?;
    let pdf = model.tabulate_pdf(grid)?;
    let diff = (pdf.mass() - model.mass_above_noise_floor()).abs();
    Ok(CriterionResult {
        name: "density-mass-matches-gaussian-share",
        pass: diff < 1e-3,
        detail: format!("|integral - gaussian share| {diff:.2e} < 1e-3"),
    })
}

/// The geometric waiting-time series against the closed-form M/M/1
/// waiting distribution, with an exponential law substituted for the
/// transmission service.
pub fn waiting_series_matches_exponential_closed_form() -> Result<CriterionResult> {
    let service_rate = 400.0;
    let arrival_rate = 160.0;
    let cfg = ExperimentConfig::default();
    let grid = Grid::new(cfg.analysis_spec().grid_step_s, 1 << 16)?;
    let service = exponential_cdf(grid, service_rate)?;
    let moments = ServiceMoments {
        mean_s: 1.0 / service_rate,
        second_moment_s2: 2.0 / (service_rate * service_rate),
    };
    let law = radio_queue_law(&service, &moments, arrival_rate, 1e-9, ConvMode::Auto)?;
    let rho = arrival_rate / service_rate;
    let decay = service_rate - arrival_rate;
    let mut worst: f64 = 0.0;
    for (i, &v) in law.wait_cdf.values().iter().enumerate() {
        let t = grid.point(i);
        let exact = 1.0 - rho * (-decay * t).exp();
        worst = worst.max((v - exact).abs());
    }
    Ok(CriterionResult {
        name: "waiting-series-matches-exponential-closed-form",
        pass: worst < 1e-3,
        detail: format!("max abs error {worst:.2e} < 1e-3 at load {rho}"),
    })
}

/// Analytic end-to-end distribution against a tandem simulation at the
/// default preset: KS distance plus reliability agreement at each
/// configured deadline.
pub fn end_to_end_matches_simulation(seed: u64) -> Result<CriterionResult> {
    let cfg = ExperimentConfig::default();
    let analysis = analyze(
        &cfg.transmission_model()?,
        &cfg.queue_params(),
        &cfg.analysis_spec(),
    )?;
    let mut sim_cfg = cfg.sim_config();
    sim_cfg.seed = seed;
    sim_cfg.n_requests = 110_000;
    sim_cfg.warmup = 10_000;
    let sim = run_tandem(&sim_cfg)?;
    let totals: Vec<f64> = sim.records.iter().map(|r| r.total_s).collect();
    let ks = ks_against(&totals, |t| analysis.reliability(t));
    let mut worst_rel: f64 = 0.0;
    let mut rels = String::new();
    for &(deadline, empirical) in &sim.summary.reliability {
        let diff = (empirical - analysis.reliability(deadline)).abs();
        worst_rel = worst_rel.max(diff);
        rels.push_str(&format!(" {:.0}ms:{:.2e}", deadline * 1e3, diff));
    }
    Ok(CriterionResult {
        name: "end-to-end-matches-simulation",
        pass: ks < 0.02 && worst_rel < 0.005,
        detail: format!(
            "ks {ks:.4} < 0.02, reliability gaps{rels} all < 5e-3, {} requests",
            totals.len()
        ),
    })
}

/// Reliability must move the right way along every sweep axis: up with
/// bandwidth and deadline, down with region radius and serving distance,
/// and the drop along the radius must sharpen as the serving distance
/// grows. Comparisons leave 1e-8 for transform roundoff.
pub fn reliability_monotone_in_sweeps(
    bandwidth: &BandwidthSweepOutcome,
    region: &RegionSweepOutcome,
) -> CriterionResult {
    const TOL: f64 = 1e-8;
    let mut worst: f64 = 0.0;

    for w in bandwidth.points.windows(2) {
        for di in 0..bandwidth.deadlines_s.len() {
            worst = worst.max(w[0].reliability[di] - w[1].reliability[di]);
        }
    }
    for p in &bandwidth.points {
        for d in p.reliability.windows(2) {
            worst = worst.max(d[0] - d[1]);
        }
    }

    let groups: Vec<&[crate::sweep::RegionPoint]> = {
        let n_radii = region
            .points
            .iter()
            .take_while(|p| p.serving_distance_m == region.points[0].serving_distance_m)
            .count();
        region.points.chunks(n_radii).collect()
    };
    for group in &groups {
        for w in group.windows(2) {
            worst = worst.max(w[1].reliability - w[0].reliability);
        }
    }
    for pair in groups.windows(2) {
        for (near, far) in pair[0].iter().zip(pair[1].iter()) {
            worst = worst.max(far.reliability - near.reliability);
        }
    }
    // Sharpest slope per group, most negative first when ordered by
    // growing serving distance.
    let sharpest: Vec<f64> = groups
        .iter()
        .map(|g| {
            g.iter()
                .map(|p| p.slope_per_m)
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mut slope_ordered = true;
    for s in sharpest.windows(2) {
        if s[1] > s[0] + TOL {
            slope_ordered = false;
        }
    }

    CriterionResult {
        name: "reliability-monotone-in-sweeps",
        pass: worst <= TOL && slope_ordered,
        detail: format!(
            "worst violation {worst:.2e} <= 1e-8, sharpest radius slopes {} ordered",
            sharpest
                .iter()
                .map(|s| format!("{s:.3}"))
                .collect::<Vec<_>>()
                .join("/")
        ),
    }
}

/// The three operating points the bandwidth study is anchored on: where
/// five-nines reliability at the largest deadline first appears, the link
/// rate there, and where the radio stage stops dominating the mean delay.
pub fn headline_operating_points(bandwidth: &BandwidthSweepOutcome) -> CriterionResult {
    let last = bandwidth.deadlines_s.len() - 1;
    let crossing = bandwidth.five_nines_bandwidth_hz[last];
    let crossing_ok = crossing.is_some_and(|w| (8e9..=1.2e10).contains(&w));

    let rate = crossing.and_then(|w| {
        bandwidth
            .points
            .iter()
            .find(|p| p.bandwidth_hz == w)
            .map(|p| p.link_rate_bps)
    });
    let rate_ok = rate.is_some_and(|r| (r - 16.4e9).abs() / 16.4e9 <= 0.10);

    let crossover = bandwidth.sojourn_crossover_bandwidth_hz;
    let crossover_ok = crossover.is_some_and(|w| (1.0e10..=1.6e10).contains(&w));

    let fmt = |v: Option<f64>| match v {
        Some(x) => format!("{:.1}", x / 1e9),
        None => "none".into(),
    };
    CriterionResult {
        name: "headline-operating-points",
        pass: crossing_ok && rate_ok && crossover_ok,
        detail: format!(
            "five-nines at {} GHz in [8, 12], link rate {} Gb/s within 10% of 16.4, \
             radio/processing crossover at {} GHz in [10, 16]",
            fmt(crossing),
            fmt(rate),
            fmt(crossover)
        ),
    }
}

/// Geometry sampler against its closed forms at the validation preset:
/// the hard-core spacing must hold in every deployment, and the sampled
/// aggregate interference must land on the analytic moments. The variance
/// bound is looser; the spacing correlation the closed form ignores is
/// measured here.
pub fn hard_core_geometry_moments(seed: u64) -> Result<CriterionResult> {
    const N: usize = 10_000;
    let cfg = ExperimentConfig::geometry_validation_preset();
    let dep = cfg.deployment;
    let stats = cfg.interference_stats()?;
    let r2 = dep.hard_core_radius_m * dep.hard_core_radius_m;

    let mut spacing_ok = true;
    let mut samples = Vec::with_capacity(N);
    for k in 0..N {
        let points = sample_hard_core_seeded(&dep, seed.wrapping_add(k as u64))?;
        for i in 0..points.len() {
            for j in (i + 1)..points.len() {
                let dx = points[i][0] - points[j][0];
                let dy = points[i][1] - points[j][1];
                if dx * dx + dy * dy < r2 {
                    spacing_ok = false;
                }
            }
        }
        let distances = interferer_distances(&points, &dep);
        samples.push(aggregate_interference(&distances, &cfg.channel));
    }

    let n = samples.len() as f64;
    let mean: f64 = samples.iter().sum::<f64>() / n;
    let var: f64 = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    let mean_err = (mean - stats.mean_w).abs() / stats.mean_w;
    let var_err = (var - stats.std_w * stats.std_w).abs() / (stats.std_w * stats.std_w);
    Ok(CriterionResult {
        name: "hard-core-geometry-moments",
        pass: spacing_ok && mean_err <= 0.10 && var_err <= 0.25,
        detail: format!(
            "spacing held in {N} deployments: {spacing_ok}, mean off by {:.1}% <= 10%, \
             variance off by {:.1}% <= 25%",
            mean_err * 100.0,
            var_err * 100.0
        ),
    })
}

/// Halving the grid step must leave every reported reliability in place.
pub fn grid_step_convergence() -> Result<CriterionResult> {
    let mut region_cfg = ExperimentConfig::region_preset();
    region_cfg.channel.serving_distance_m = 1.5;
    let cases = [
        ExperimentConfig::default(),
        ExperimentConfig::bandwidth_preset(),
        region_cfg,
    ];
    let mut worst: f64 = 0.0;
    for cfg in &cases {
        let model = cfg.transmission_model()?;
        let queues = cfg.queue_params();
        let coarse = analyze(&model, &queues, &cfg.analysis_spec())?;
        let fine_spec = AnalysisSpec {
            grid_step_s: cfg.analysis_spec().grid_step_s / 2.0,
            ..cfg.analysis_spec()
        };
        let fine = analyze(&model, &queues, &fine_spec)?;
        for &d in &cfg.deadlines_s {
            worst = worst.max((coarse.reliability(d) - fine.reliability(d)).abs());
        }
    }
    Ok(CriterionResult {
        name: "grid-step-convergence",
        pass: worst < 1e-4,
        detail: format!("largest reliability shift {worst:.2e} < 1e-4 over three presets"),
    })
}
