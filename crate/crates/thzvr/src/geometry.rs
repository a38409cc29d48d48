//! Interfering-cell geometry: a Matérn type-II hard-core deployment on a
//! square window around the user, the exact aggregate interference it
//! produces, and the Gaussian approximation the delay model runs on.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::channel::ChannelParams;
use crate::{Error, Result};

/// Deployment of interfering cells on a square window centred on the user.
///
/// Cells form a hard-core process: no two cells sit closer than the
/// hard-core radius, and the thinning is calibrated so the density of
/// retained cells equals `cell_intensity_per_m2` exactly (away from the
/// window edge, where missing outside competitors bias retention up). Only
/// cells whose distance to the user falls in
/// `[hard_core_radius_m, region_radius_m]` interfere; the lower cut
/// reflects that the serving cell keeps competitors out of its own
/// hard-core disc.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeploymentParams {
    /// Minimum spacing between any two cells, in m.
    pub hard_core_radius_m: f64,
    /// Density of retained cells, in 1/m^2.
    pub cell_intensity_per_m2: f64,
    /// Radius of the interference region around the user, in m.
    pub region_radius_m: f64,
    /// Side of the square sampling window, in m.
    pub window_side_m: f64,
}

impl DeploymentParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.hard_core_radius_m.is_finite() && self.hard_core_radius_m > 0.0) {
            return Err(Error::InvalidParameter {
                name: "hard_core_radius_m",
                value: self.hard_core_radius_m,
                reason: "must be finite and positive",
            });
        }
        if !(self.cell_intensity_per_m2.is_finite() && self.cell_intensity_per_m2 > 0.0) {
            return Err(Error::InvalidParameter {
                name: "cell_intensity_per_m2",
                value: self.cell_intensity_per_m2,
                reason: "must be finite and positive",
            });
        }
        if !(self.region_radius_m.is_finite() && self.region_radius_m > self.hard_core_radius_m) {
            return Err(Error::InvalidParameter {
                name: "region_radius_m",
                value: self.region_radius_m,
                reason: "must exceed the hard-core radius",
            });
        }
        if !(self.window_side_m.is_finite() && self.window_side_m > 0.0) {
            return Err(Error::InvalidParameter {
                name: "window_side_m",
                value: self.window_side_m,
                reason: "must be finite and positive",
            });
        }
        self.parent_intensity()?;
        Ok(())
    }

    /// Fraction of the plane covered by hard-core discs, `eta pi r^2`.
    /// Densities with packing at or above one are not realizable.
    pub fn packing(&self) -> f64 {
        let r = self.hard_core_radius_m;
        self.cell_intensity_per_m2 * std::f64::consts::PI * r * r
    }

    /// Intensity of the parent Poisson process that, after dependent
    /// thinning, leaves exactly `cell_intensity_per_m2` retained:
    /// `-ln(1 - eta pi r^2) / (pi r^2)`.
    pub fn parent_intensity(&self) -> Result<f64> {
        let packing = self.packing();
        if !(packing.is_finite() && packing < 1.0) {
            return Err(Error::InfeasibleHardCore { packing });
        }
        let r = self.hard_core_radius_m;
        let disc = std::f64::consts::PI * r * r;
        Ok(-(1.0 - packing).ln() / disc)
    }

    /// Whether the interference annulus sits at least one hard-core radius
    /// inside the window, so retention over the annulus is edge-bias free.
    /// Interference validation runs demand this; figure presets with large
    /// regions need not satisfy it because they never sample geometry.
    pub fn annulus_fits_window(&self) -> bool {
        self.window_side_m / 2.0 >= self.region_radius_m + self.hard_core_radius_m
    }
}

/// First two moments of the aggregate interference under the Gaussian
/// approximation, in W.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterferenceStats {
    pub mean_w: f64,
    pub std_w: f64,
}

impl InterferenceStats {
    /// Closed-form moments of the aggregate interference from cells spread
    /// over the annulus between the hard-core and region radii.
    pub fn from_geometry(dep: &DeploymentParams, ch: &ChannelParams) -> Result<Self> {
        dep.validate()?;
        ch.validate()?;
        let r = dep.hard_core_radius_m;
        let omega = dep.region_radius_m;
        let eta = dep.cell_intensity_per_m2;
        let unit_power = ch.tx_power_w * ch.aperture_factor();
        let half_region_count = std::f64::consts::PI * omega * omega * eta / 2.0;
        let mean_w = unit_power * ((omega / r).ln() / (omega * omega - r * r)) * half_region_count;
        let var = unit_power * unit_power * half_region_count / (2.0 * r * r * omega * omega);
        Ok(Self {
            mean_w,
            std_w: var.sqrt(),
        })
    }

    /// One interference draw: Gaussian with these moments, clipped at zero.
    /// The clipped mass becomes an atom at exactly zero interference.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let normal = Normal::new(self.mean_w, self.std_w).expect("std_w is positive and finite");
        normal.sample(rng).max(0.0)
    }

    /// Probability a draw lands on the zero atom.
    pub fn clip_mass(&self) -> f64 {
        0.5 * statrs::function::erf::erfc(self.mean_w / (self.std_w * std::f64::consts::SQRT_2))
    }
}

/// One realization of retained cell positions on the square window, user at
/// the origin. Deterministic given the caller's generator state.
pub fn sample_hard_core<R: Rng + ?Sized>(
    dep: &DeploymentParams,
    rng: &mut R,
) -> Result<Vec<[f64; 2]>> {
    let lambda_parent = dep.parent_intensity()?;
    let r = dep.hard_core_radius_m;
    let half = dep.window_side_m / 2.0;
    let window_area = dep.window_side_m * dep.window_side_m;

    let count = Poisson::new(lambda_parent * window_area)
        .expect("positive finite parent mean")
        .sample(rng) as usize;

    let mut points = Vec::with_capacity(count);
    let mut marks = Vec::with_capacity(count);
    for _ in 0..count {
        let x = (rng.gen::<f64>() - 0.5) * dep.window_side_m;
        let y = (rng.gen::<f64>() - 0.5) * dep.window_side_m;
        points.push([x, y]);
        marks.push(rng.gen::<f64>());
    }

    // Bucket points into cells of side r. Any pair closer than r lands in
    // cells at Chebyshev distance at most one.
    let cells_per_axis = ((dep.window_side_m / r).ceil() as usize + 1).max(1);
    let cell_of = |p: &[f64; 2]| -> (usize, usize) {
        let cx = ((p[0] + half) / r).floor().max(0.0) as usize;
        let cy = ((p[1] + half) / r).floor().max(0.0) as usize;
        (cx.min(cells_per_axis - 1), cy.min(cells_per_axis - 1))
    };
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); cells_per_axis * cells_per_axis];
    for (i, p) in points.iter().enumerate() {
        let (cx, cy) = cell_of(p);
        buckets[cy * cells_per_axis + cx].push(i);
    }

    let r2 = r * r;
    let retained = (0..count)
        .filter(|&i| {
            let (cx, cy) = cell_of(&points[i]);
            for ny in cy.saturating_sub(1)..=(cy + 1).min(cells_per_axis - 1) {
                for nx in cx.saturating_sub(1)..=(cx + 1).min(cells_per_axis - 1) {
                    for &j in &buckets[ny * cells_per_axis + nx] {
                        if j == i {
                            continue;
                        }
                        let dx = points[i][0] - points[j][0];
                        let dy = points[i][1] - points[j][1];
                        if dx * dx + dy * dy < r2 && marks[j] < marks[i] {
                            return false;
                        }
                    }
                }
            }
            true
        })
        .map(|i| points[i])
        .collect();
    Ok(retained)
}

/// [`sample_hard_core`] with a self-contained seed.
pub fn sample_hard_core_seeded(dep: &DeploymentParams, seed: u64) -> Result<Vec<[f64; 2]>> {
    sample_hard_core(dep, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Distances from the user to the cells that actually interfere: retained
/// cells no closer than the hard-core radius and inside the region. The
/// serving cell is conditioned on, not sampled, so it never appears here.
pub fn interferer_distances(points: &[[f64; 2]], dep: &DeploymentParams) -> Vec<f64> {
    points
        .iter()
        .map(|p| (p[0] * p[0] + p[1] * p[1]).sqrt())
        .filter(|&d| d >= dep.hard_core_radius_m && d <= dep.region_radius_m)
        .collect()
}

/// Aggregate interference from cells at the given distances.
///
/// Each cell contributes its directly received power plus the power
/// re-radiated by the molecules absorbing its signal; the two sum to the
/// pure spreading term `p A0 / d^2`, so no absorption factor appears.
pub fn aggregate_interference(distances: &[f64], ch: &ChannelParams) -> f64 {
    let unit_power = ch.tx_power_w * ch.aperture_factor();
    distances
        .iter()
        .map(|d| {
            debug_assert!(*d > 0.0);
            unit_power / (d * d)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit_channel() -> ChannelParams {
        ChannelParams {
            carrier_hz: 1e12,
            bandwidth_hz: 1e10,
            tx_power_w: 1.0,
            absorption_per_m: 0.0016,
            serving_distance_m: 1.0,
            noise_temp_k: 300.0,
        }
    }

    fn deployment(r: f64, omega: f64, eta: f64, side: f64) -> DeploymentParams {
        DeploymentParams {
            hard_core_radius_m: r,
            cell_intensity_per_m2: eta,
            region_radius_m: omega,
            window_side_m: side,
        }
    }

    fn validation_preset() -> DeploymentParams {
        deployment(1.0, 2.0 / 3.0f64.sqrt(), 0.12, 8.0)
    }

    #[test]
    fn parent_intensity_reference_value() {
        assert_relative_eq!(
            validation_preset().parent_intensity().unwrap(),
            0.15062248876385074,
            max_relative = 1e-12
        );
    }

    #[test]
    fn parent_intensity_inversion_is_exact() {
        // Retained intensity of the thinning is (1 - exp(-lp pi r^2)) / (pi r^2);
        // with the calibrated parent intensity that equals eta identically.
        for (r, eta) in [(1.0, 0.12), (0.3, 2.47), (0.9, 0.31), (2.0, 0.05)] {
            let dep = deployment(r, 10.0 * r, eta, 30.0 * r);
            let lp = dep.parent_intensity().unwrap();
            let disc = std::f64::consts::PI * r * r;
            let retained = (1.0 - (-lp * disc).exp()) / disc;
            assert_relative_eq!(retained, eta, max_relative = 1e-12);
        }
    }

    #[test]
    fn infeasible_packing_is_rejected() {
        let dep = deployment(1.0, 5.0, 1.0 / std::f64::consts::PI, 20.0);
        assert!(matches!(
            dep.validate(),
            Err(Error::InfeasibleHardCore { .. })
        ));
        assert!(deployment(1.0, 0.5, 0.1, 20.0).validate().is_err());
        assert!(deployment(-1.0, 5.0, 0.1, 20.0).validate().is_err());
        assert!(deployment(1.0, 5.0, 0.1, 0.0).validate().is_err());
    }

    #[test]
    fn annulus_fit_check() {
        assert!(validation_preset().annulus_fits_window());
        assert!(!deployment(0.9, 34.0, 0.31, 20.0).annulus_fits_window());
    }

    #[test]
    fn interference_stats_reference_values() {
        let ch = unit_channel();
        let cases = [
            (0.4, 2.5, 0.9, 1.513247894887164e-9, 1.431053149368423e-18),
            (
                1.3,
                6.0,
                0.11,
                1.5781044587680098e-10,
                1.6559194890785169e-20,
            ),
            (
                2.0,
                2.2,
                0.05,
                2.4548045727856058e-11,
                3.1801181097076064e-21,
            ),
            (
                0.7,
                30.0,
                0.3,
                1.0084197526990876e-9,
                1.5576088700608684e-19,
            ),
            (
                3.0,
                9.0,
                0.02,
                2.2098791557168785e-11,
                5.653543306146856e-22,
            ),
        ];
        for (r, omega, eta, mean, var) in cases {
            let dep = deployment(r, omega, eta, 4.0 * omega);
            let stats = InterferenceStats::from_geometry(&dep, &ch).unwrap();
            assert_relative_eq!(stats.mean_w, mean, max_relative = 1e-12);
            assert_relative_eq!(stats.std_w * stats.std_w, var, max_relative = 1e-12);
        }
    }

    #[test]
    fn variance_is_independent_of_region_radius() {
        let ch = unit_channel();
        let a = InterferenceStats::from_geometry(&deployment(0.5, 2.0, 0.2, 20.0), &ch).unwrap();
        let b = InterferenceStats::from_geometry(&deployment(0.5, 20.0, 0.2, 80.0), &ch).unwrap();
        assert_relative_eq!(a.std_w, b.std_w, max_relative = 1e-12);
    }

    #[test]
    fn hard_core_spacing_holds_in_every_sample() {
        let dep = validation_preset();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let pts = sample_hard_core(&dep, &mut rng).unwrap();
            let half = dep.window_side_m / 2.0;
            for p in &pts {
                assert!(p[0].abs() <= half && p[1].abs() <= half);
            }
            for i in 0..pts.len() {
                for j in (i + 1)..pts.len() {
                    let dx = pts[i][0] - pts[j][0];
                    let dy = pts[i][1] - pts[j][1];
                    let d = (dx * dx + dy * dy).sqrt();
                    assert!(d >= dep.hard_core_radius_m - 1e-12, "pair at distance {d}");
                }
            }
        }
    }

    #[test]
    fn window_spanning_hard_core_leaves_at_most_one_point() {
        // Hard-core radius larger than the window diagonal: every pair
        // conflicts, so only the globally smallest mark survives.
        let dep = deployment(3.0, 3.5, 0.01, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let pts = sample_hard_core(&dep, &mut rng).unwrap();
            assert!(pts.len() <= 1, "{} points retained", pts.len());
        }
    }

    #[test]
    fn retained_intensity_matches_target_in_window_interior() {
        // Count retained points in a disc that stays a hard-core radius
        // away from the window edge; there the thinning is unbiased.
        let dep = validation_preset();
        let probe_radius = 2.0f64;
        let probe_area = std::f64::consts::PI * probe_radius * probe_radius;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 20_000;
        let mut total = 0usize;
        for _ in 0..n {
            let pts = sample_hard_core(&dep, &mut rng).unwrap();
            total += pts
                .iter()
                .filter(|p| p[0] * p[0] + p[1] * p[1] <= probe_radius * probe_radius)
                .count();
        }
        let empirical = total as f64 / n as f64 / probe_area;
        // Expected count per window is 1.5, so the relative standard error
        // over 20k windows is under one percent.
        assert_relative_eq!(empirical, 0.12, max_relative = 0.05);
    }

    #[test]
    fn aggregate_interference_sums_spreading_terms() {
        let ch = unit_channel();
        let unit = ch.tx_power_w * ch.aperture_factor();
        let agg = aggregate_interference(&[1.0, 2.0], &ch);
        assert_relative_eq!(agg, unit * 1.25, max_relative = 1e-12);
        assert_eq!(aggregate_interference(&[], &ch), 0.0);
        let single = aggregate_interference(&[1.0], &ch);
        assert_relative_eq!(single, 5.691433657143451e-10, max_relative = 1e-12);
        let pair = aggregate_interference(&[1.7, 1.7], &ch);
        assert_relative_eq!(
            pair,
            2.0 * aggregate_interference(&[1.7], &ch),
            max_relative = 1e-15
        );
    }

    #[test]
    fn interferer_distances_apply_both_cuts() {
        let dep = deployment(1.0, 3.0, 0.1, 20.0);
        let pts = vec![[0.5, 0.0], [1.5, 0.0], [0.0, 2.0], [3.5, 0.0]];
        let d = interferer_distances(&pts, &dep);
        assert_eq!(d.len(), 2);
        assert!(d.contains(&1.5) && d.contains(&2.0));
        assert!(interferer_distances(&[], &dep).is_empty());
    }

    #[test]
    fn seeded_sampling_is_reproducible() {
        let dep = validation_preset();
        let a = sample_hard_core_seeded(&dep, 42).unwrap();
        let b = sample_hard_core_seeded(&dep, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gaussian_samples_are_clipped_and_centered() {
        let stats = InterferenceStats {
            mean_w: 3.0,
            std_w: 1.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 50_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let x = stats.sample(&mut rng);
            assert!(x >= 0.0);
            sum += x;
        }
        // At mean/std = 3 the clip removes about 1e-4 of the mass, so the
        // sample mean stays within Monte Carlo error of the nominal mean.
        assert_relative_eq!(sum / n as f64, 3.0, max_relative = 0.01);
    }

    proptest! {
        #[test]
        fn closed_form_moments_are_positive_and_scale_with_power(
            r in 0.2f64..2.0,
            width in 0.1f64..10.0,
            eta in 0.01f64..0.3,
            power in 0.5f64..4.0,
        ) {
            let dep = deployment(r, r + width, eta, 4.0 * (r + width));
            prop_assume!(dep.packing() < 0.99);
            let mut ch = unit_channel();
            let base = InterferenceStats::from_geometry(&dep, &ch).unwrap();
            prop_assert!(base.mean_w > 0.0 && base.std_w > 0.0);
            ch.tx_power_w = power;
            let scaled = InterferenceStats::from_geometry(&dep, &ch).unwrap();
            prop_assert!((scaled.mean_w / base.mean_w - power).abs() < 1e-9 * power);
            prop_assert!((scaled.std_w / base.std_w - power).abs() < 1e-9 * power);
        }
    }
}
