//! End-to-end delay law for the two-stage pipeline: exponential sojourn in
//! the processing queue, interference-induced transmission delay over the
//! radio link, and residual-service queueing in front of the radio.
//!
//! The transmission delay of one payload is a deterministic function of the
//! aggregate interference it experiences, so its law is the Gaussian
//! interference law pushed through the inverse rate map. Everything
//! downstream (waiting law, sojourn laws, end-to-end law) is composed on a
//! shared uniform grid.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::channel::ChannelParams;
use crate::geometry::InterferenceStats;
use crate::numerics::{geometric_truncation_order, ConvMode, Grid, TabulatedDist};
use crate::{Error, Result};

/// Longest grid the horizon search will build before giving up.
const MAX_GRID_LEN: usize = 1 << 20;
/// Shortest grid worth analyzing.
const MIN_GRID_LEN: usize = 1 << 10;

fn gaussian_cdf(x: f64, mean: f64, std: f64) -> f64 {
    0.5 * erfc((mean - x) / (std * std::f64::consts::SQRT_2))
}

/// Arrival and service rates of the two queues.
///
/// The radio arrival rate is kept separate from the request rate: the
/// analytic model allows loading the radio queue at a rate other than the
/// processing queue's output rate, and one experiment preset uses that
/// freedom.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueueParams {
    /// Request arrival rate at the processing queue, in 1/s.
    pub request_rate_hz: f64,
    /// Processing queue service rate, in 1/s.
    pub processing_rate_hz: f64,
    /// Packet arrival rate at the radio queue, in 1/s.
    pub radio_arrival_rate_hz: f64,
}

impl QueueParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.request_rate_hz.is_finite() && self.request_rate_hz > 0.0) {
            return Err(Error::InvalidParameter {
                name: "request_rate_hz",
                value: self.request_rate_hz,
                reason: "must be finite and positive",
            });
        }
        if !(self.processing_rate_hz.is_finite() && self.processing_rate_hz > self.request_rate_hz)
        {
            return Err(Error::InvalidParameter {
                name: "processing_rate_hz",
                value: self.processing_rate_hz,
                reason: "must be finite and exceed the request rate",
            });
        }
        if !(self.radio_arrival_rate_hz.is_finite() && self.radio_arrival_rate_hz > 0.0) {
            return Err(Error::InvalidParameter {
                name: "radio_arrival_rate_hz",
                value: self.radio_arrival_rate_hz,
                reason: "must be finite and positive",
            });
        }
        Ok(())
    }

    /// Rate of the exponential sojourn law of the processing queue.
    pub fn processing_sojourn_rate_hz(&self) -> f64 {
        self.processing_rate_hz - self.request_rate_hz
    }
}

/// Grid resolution and tail accuracy of one analysis run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSpec {
    /// Grid step in seconds.
    pub grid_step_s: f64,
    /// Largest deadline the result must resolve; the horizon always covers
    /// it with margin.
    pub max_deadline_s: f64,
    /// Probability mass allowed to escape past the horizon.
    pub tail_epsilon: f64,
}

impl AnalysisSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.grid_step_s.is_finite() && self.grid_step_s > 0.0) {
            return Err(Error::InvalidParameter {
                name: "grid_step_s",
                value: self.grid_step_s,
                reason: "must be finite and positive",
            });
        }
        if !(self.max_deadline_s.is_finite() && self.max_deadline_s >= self.grid_step_s) {
            return Err(Error::InvalidParameter {
                name: "max_deadline_s",
                value: self.max_deadline_s,
                reason: "must be finite and at least one grid step",
            });
        }
        if !(self.tail_epsilon.is_finite() && self.tail_epsilon > 0.0 && self.tail_epsilon <= 1e-3)
        {
            return Err(Error::InvalidParameter {
                name: "tail_epsilon",
                value: self.tail_epsilon,
                reason: "must lie in (0, 1e-3]",
            });
        }
        Ok(())
    }
}

/// First two moments of the transmission-delay law, in s and s^2.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ServiceMoments {
    pub mean_s: f64,
    pub second_moment_s2: f64,
}

impl ServiceMoments {
    /// Effective service rate of the radio queue.
    pub fn rate_hz(&self) -> f64 {
        1.0 / self.mean_s
    }
}

/// Transmission delay as a random variable: one payload sent over the
/// serving link while the aggregate interference is a Gaussian draw held
/// constant for the whole transmission.
#[derive(Clone, Copy, Debug)]
pub struct TransmissionModel {
    channel: ChannelParams,
    interference: InterferenceStats,
    payload_bits: f64,
}

impl TransmissionModel {
    pub fn new(
        channel: ChannelParams,
        interference: InterferenceStats,
        payload_bits: f64,
    ) -> Result<Self> {
        channel.validate()?;
        if !(payload_bits.is_finite() && payload_bits > 0.0) {
            return Err(Error::InvalidParameter {
                name: "payload_bits",
                value: payload_bits,
                reason: "must be finite and positive",
            });
        }
        if !(interference.mean_w.is_finite() && interference.mean_w > 0.0) {
            return Err(Error::InvalidParameter {
                name: "interference.mean_w",
                value: interference.mean_w,
                reason: "must be finite and positive",
            });
        }
        if !(interference.std_w.is_finite() && interference.std_w > 0.0) {
            return Err(Error::InvalidParameter {
                name: "interference.std_w",
                value: interference.std_w,
                reason: "must be finite and positive",
            });
        }
        Ok(Self {
            channel,
            interference,
            payload_bits,
        })
    }

    pub fn channel(&self) -> &ChannelParams {
        &self.channel
    }

    pub fn interference(&self) -> &InterferenceStats {
        &self.interference
    }

    pub fn payload_bits(&self) -> f64 {
        self.payload_bits
    }

    /// Transmission delay when the interference level is `interference_w`.
    pub fn delay_for_interference(&self, interference_w: f64) -> f64 {
        self.payload_bits / self.channel.capacity(interference_w)
    }

    /// Delay of a transmission that sees no interference at all; no payload
    /// can finish faster.
    pub fn min_delay(&self) -> f64 {
        self.delay_for_interference(0.0)
    }

    /// Inverse of [`Self::delay_for_interference`]: the interference level
    /// at which the payload takes exactly `delay_s` to transmit. Tends to
    /// the negated noise floor as the delay shrinks to zero and grows
    /// without bound as the delay grows, so it is defined for every
    /// positive delay even below the zero-interference minimum.
    pub fn interference_for_delay(&self, delay_s: f64) -> f64 {
        debug_assert!(delay_s > 0.0);
        let q = self.payload_bits / (self.channel.bandwidth_hz * delay_s);
        let snr_needed = (q * std::f64::consts::LN_2).exp_m1();
        self.channel.serving_power() / snr_needed - self.channel.noise_floor()
    }

    /// Absolute rate of change of [`Self::interference_for_delay`], the
    /// change-of-variables factor between interference and delay laws.
    ///
    /// Evaluated as `ln2 p L / (W a^2) e^{-q ln2} / (1 - e^{-q ln2})^2`
    /// with `q = L / (W a)`, which stays finite for large `q` (where the
    /// naive `2^q` form overflows) and tends to `p W / (L ln2)` for small
    /// `q`.
    pub fn interference_slope(&self, delay_s: f64) -> f64 {
        debug_assert!(delay_s > 0.0);
        let w = self.channel.bandwidth_hz;
        let l = self.payload_bits;
        let q = l / (w * delay_s);
        let e = (-q * std::f64::consts::LN_2).exp();
        let one_minus_e = -(-q * std::f64::consts::LN_2).exp_m1();
        std::f64::consts::LN_2 * self.channel.serving_power() * l / (w * delay_s * delay_s) * e
            / (one_minus_e * one_minus_e)
    }

    /// Transmission-delay density at `delay_s`: the Gaussian interference
    /// density evaluated at the required interference level, times the
    /// change-of-variables factor. Positive for every positive delay; the
    /// sliver below the zero-interference minimum carries the Gaussian
    /// mass between the negated noise floor and zero, which a clipped
    /// sampler concentrates at the minimum instead.
    pub fn density(&self, delay_s: f64) -> f64 {
        if delay_s <= 0.0 {
            return 0.0;
        }
        let std = self.interference.std_w;
        let z = (self.interference_for_delay(delay_s) - self.interference.mean_w) / std;
        let gauss = (-0.5 * z * z).exp() / (std * (2.0 * std::f64::consts::PI).sqrt());
        self.interference_slope(delay_s) * gauss
    }

    /// Transmission-delay distribution function at `delay_s`. Exact: the
    /// Gaussian law evaluated at the required interference level. Draws at
    /// or below the negated noise floor admit unbounded rate under the
    /// inverse map, so their mass sits as an atom at zero delay; the
    /// distribution jumps to that mass at the origin and is continuous
    /// beyond it.
    pub fn cumulative(&self, delay_s: f64) -> f64 {
        if delay_s < 0.0 {
            return 0.0;
        }
        if delay_s == 0.0 {
            return self.below_floor_mass();
        }
        gaussian_cdf(
            self.interference_for_delay(delay_s),
            self.interference.mean_w,
            self.interference.std_w,
        )
    }

    /// Gaussian mass above the negated noise floor: the share of the law
    /// carried by the continuous density rather than the zero-delay atom.
    pub fn mass_above_noise_floor(&self) -> f64 {
        1.0 - self.below_floor_mass()
    }

    /// Gaussian mass at or below the negated noise floor.
    pub fn below_floor_mass(&self) -> f64 {
        gaussian_cdf(
            -self.channel.noise_floor(),
            self.interference.mean_w,
            self.interference.std_w,
        )
    }

    /// Probability that a physical sampler clips its interference draw to
    /// zero, turning it into an atom at the minimum delay.
    pub fn clip_mass(&self) -> f64 {
        self.interference.clip_mass()
    }

    /// Density tabulation on `grid`, the continuous part only. Lost mass
    /// covers the zero-delay atom and the tail beyond the horizon.
    pub fn tabulate_pdf(&self, grid: Grid) -> Result<TabulatedDist> {
        let values: Vec<f64> = grid.points().map(|t| self.density(t)).collect();
        let represented = self.cumulative(grid.last()) - self.below_floor_mass();
        TabulatedDist::new_pdf(grid, values).map(|d| d.with_lost_mass((1.0 - represented).max(0.0)))
    }

    /// Distribution tabulation on `grid`, exact at every point; the
    /// zero-delay atom lands on the first grid point.
    pub fn tabulate_cdf(&self, grid: Grid) -> Result<TabulatedDist> {
        let values: Vec<f64> = grid.points().map(|t| self.cumulative(t)).collect();
        let represented = *values.last().expect("grid is never empty");
        TabulatedDist::new_cdf(grid, values).map(|d| d.with_lost_mass((1.0 - represented).max(0.0)))
    }

    /// First two moments by quadrature of the tabulated density.
    pub fn service_moments(&self, pdf: &TabulatedDist) -> ServiceMoments {
        let grid = pdf.grid();
        let h = grid.step();
        let mut mean = 0.0;
        let mut second = 0.0;
        let vals = pdf.values();
        for i in 1..grid.len() {
            let t0 = grid.point(i - 1);
            let t1 = grid.point(i);
            mean += 0.5 * h * (t0 * vals[i - 1] + t1 * vals[i]);
            second += 0.5 * h * (t0 * t0 * vals[i - 1] + t1 * t1 * vals[i]);
        }
        ServiceMoments {
            mean_s: mean,
            second_moment_s2: second,
        }
    }

    /// Delta-method estimates of the service moments, used to size the
    /// grid horizon before anything is tabulated and to report a mean on
    /// rows where the full tabulation is unavailable.
    pub fn estimated_moments(&self) -> ServiceMoments {
        let a0 = self.delay_for_interference(self.interference.mean_w);
        let slope = self.interference_slope(a0);
        let var = (self.interference.std_w / slope).powi(2);
        ServiceMoments {
            mean_s: a0,
            second_moment_s2: a0 * a0 + var,
        }
    }
}

/// Exponential distribution function tabulated exactly on `grid`, with the
/// analytic tail recorded as lost mass.
pub fn exponential_cdf(grid: Grid, rate_hz: f64) -> Result<TabulatedDist> {
    if !(rate_hz.is_finite() && rate_hz > 0.0) {
        return Err(Error::InvalidParameter {
            name: "rate_hz",
            value: rate_hz,
            reason: "must be finite and positive",
        });
    }
    let values: Vec<f64> = grid.points().map(|t| -(-rate_hz * t).exp_m1()).collect();
    let tail = (-rate_hz * grid.last()).exp();
    TabulatedDist::new_cdf(grid, values).map(|d| d.with_lost_mass(tail))
}

/// Stationary-excess distribution of a service law given as a distribution
/// function: the integrated survival, normalized to reach one at the
/// horizon. This is the law of the residual service a new arrival finds in
/// progress.
pub fn residual_service_cdf(service: &TabulatedDist) -> Result<TabulatedDist> {
    debug_assert!(service.kind() == crate::numerics::DistKind::Cdf);
    let grid = service.grid();
    let vals = service.values();
    let mass = *vals.last().expect("grid is never empty");
    let h = grid.step();
    let mut acc = Vec::with_capacity(grid.len());
    let mut running = 0.0;
    acc.push(0.0);
    for i in 1..grid.len() {
        let s0 = (mass - vals[i - 1]).max(0.0);
        let s1 = (mass - vals[i]).max(0.0);
        running += 0.5 * h * (s0 + s1);
        acc.push(running);
    }
    if !running.is_finite() || running <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "service mass",
            value: running,
            reason: "service law has no mass on the grid",
        });
    }
    for v in &mut acc {
        *v /= running;
    }
    TabulatedDist::new_cdf(grid, acc)
}

/// Waiting and sojourn laws of the radio queue.
#[derive(Clone, Debug)]
pub struct RadioQueueLaw {
    /// Waiting-time distribution seen by an arriving packet.
    pub wait_cdf: TabulatedDist,
    /// Sojourn (waiting plus transmission) distribution.
    pub sojourn_cdf: TabulatedDist,
    /// Offered load, arrival rate times mean service time.
    pub utilization: f64,
    /// Number of residual-service folds kept in the geometric sum.
    pub truncation_order: usize,
}

/// Waiting and sojourn laws of a single-server queue with Poisson arrivals
/// and the given service law: the geometric mixture of residual-service
/// folds, weighted by the utilization.
///
/// The service law must be a distribution function; `moments` are its first
/// two moments (kept separate so synthetic laws can supply exact values).
pub fn radio_queue_law(
    service_cdf: &TabulatedDist,
    moments: &ServiceMoments,
    arrival_rate_hz: f64,
    tail_epsilon: f64,
    mode: ConvMode,
) -> Result<RadioQueueLaw> {
    let utilization = arrival_rate_hz * moments.mean_s;
    if !(utilization > 0.0 && utilization < 1.0) {
        return Err(Error::UnstableQueue { rho: utilization });
    }
    let order = geometric_truncation_order(utilization, tail_epsilon)?;
    let residual = residual_service_cdf(service_cdf)?;
    let wait_cdf = crate::numerics::geometric_compound_cdf(&residual, utilization, order, mode)?;
    let sojourn_cdf = service_cdf.convolve_with(&wait_cdf, mode)?;
    Ok(RadioQueueLaw {
        wait_cdf,
        sojourn_cdf,
        utilization,
        truncation_order: order,
    })
}

/// Complete analytic delay picture for one parameter point.
#[derive(Clone, Debug)]
pub struct DelayAnalysis {
    /// Shared tabulation grid.
    pub grid: Grid,
    /// Processing-queue sojourn distribution (exponential).
    pub processing_sojourn_cdf: TabulatedDist,
    /// Transmission-delay density.
    pub transmission_pdf: TabulatedDist,
    /// Transmission-delay distribution.
    pub transmission_cdf: TabulatedDist,
    /// Radio-queue waiting distribution.
    pub queue_wait_cdf: TabulatedDist,
    /// Radio-queue sojourn distribution.
    pub radio_sojourn_cdf: TabulatedDist,
    /// End-to-end delay distribution.
    pub end_to_end_cdf: TabulatedDist,
    /// Interference moments the analysis ran on.
    pub interference: InterferenceStats,
    /// Transmission-delay moments by quadrature.
    pub service: ServiceMoments,
    /// Radio-queue offered load.
    pub utilization: f64,
    /// Residual folds kept in the waiting-law geometric sum.
    pub truncation_order: usize,
    /// Mean processing-queue sojourn.
    pub mean_processing_sojourn_s: f64,
    /// Mean radio-queue sojourn (mean service plus mean wait).
    pub mean_radio_sojourn_s: f64,
    /// Zero-interference transmission delay.
    pub min_transmission_delay_s: f64,
    /// Mass of the transmission law's atom at zero delay.
    pub transmission_zero_atom: f64,
    /// Probability a clipped sampler lands on the minimum-delay atom.
    pub interference_clip_mass: f64,
}

impl DelayAnalysis {
    /// Probability the end-to-end delay meets `deadline_s`.
    pub fn reliability(&self, deadline_s: f64) -> f64 {
        self.end_to_end_cdf.eval(deadline_s)
    }
}

/// Run the full analytic pipeline: tabulate the transmission law, build the
/// radio-queue laws, and fold in the processing-queue sojourn. The grid
/// horizon starts at several mean end-to-end delays (never below the
/// largest deadline with margin) and doubles until the mass unaccounted for
/// past the horizon drops below `spec.tail_epsilon`.
pub fn analyze(
    model: &TransmissionModel,
    queues: &QueueParams,
    spec: &AnalysisSpec,
) -> Result<DelayAnalysis> {
    queues.validate()?;
    spec.validate()?;

    let h = spec.grid_step_s;
    let est = model.estimated_moments();
    let rho_est = queues.radio_arrival_rate_hz * est.mean_s;
    let mean_radio_est = if rho_est < 1.0 {
        est.mean_s + queues.radio_arrival_rate_hz * est.second_moment_s2 / (2.0 * (1.0 - rho_est))
    } else {
        est.mean_s
    };
    let mean_e2e_est = 1.0 / queues.processing_sojourn_rate_hz() + mean_radio_est;
    let horizon = (8.0 * mean_e2e_est).max(1.2 * spec.max_deadline_s);

    let mut len = ((horizon / h).ceil() as usize + 1).max(MIN_GRID_LEN);
    loop {
        if len > MAX_GRID_LEN {
            return Err(Error::GridCoverage {
                mass: f64::NAN,
                required: 1.0 - spec.tail_epsilon,
            });
        }
        let grid = Grid::new(h, len)?;

        let transmission_pdf = model.tabulate_pdf(grid)?;
        let transmission_cdf = model.tabulate_cdf(grid)?;
        let service = model.service_moments(&transmission_pdf);
        let q2 = radio_queue_law(
            &transmission_cdf,
            &service,
            queues.radio_arrival_rate_hz,
            spec.tail_epsilon,
            ConvMode::Auto,
        )?;
        let processing_sojourn_cdf = exponential_cdf(grid, queues.processing_sojourn_rate_hz())?;
        let end_to_end_cdf = processing_sojourn_cdf.convolve(&q2.sojourn_cdf)?;

        let covered = *end_to_end_cdf.values().last().expect("grid is never empty")
            + end_to_end_cdf.lost_mass();
        if 1.0 - covered <= spec.tail_epsilon {
            let mean_radio_sojourn_s = service.mean_s
                + queues.radio_arrival_rate_hz * service.second_moment_s2
                    / (2.0 * (1.0 - q2.utilization));
            return Ok(DelayAnalysis {
                grid,
                processing_sojourn_cdf,
                transmission_pdf,
                transmission_cdf,
                queue_wait_cdf: q2.wait_cdf,
                radio_sojourn_cdf: q2.sojourn_cdf,
                end_to_end_cdf,
                interference: *model.interference(),
                service,
                utilization: q2.utilization,
                truncation_order: q2.truncation_order,
                mean_processing_sojourn_s: 1.0 / queues.processing_sojourn_rate_hz(),
                mean_radio_sojourn_s,
                min_transmission_delay_s: model.min_delay(),
                transmission_zero_atom: model.below_floor_mass(),
                interference_clip_mass: model.clip_mass(),
            });
        }
        len *= 2;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DeploymentParams;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn reference_channel() -> ChannelParams {
        ChannelParams {
            carrier_hz: 1e12,
            bandwidth_hz: 1e10,
            tx_power_w: 1.0,
            absorption_per_m: 0.0016,
            serving_distance_m: 0.5,
            noise_temp_k: 300.0,
        }
    }

    fn reference_deployment() -> DeploymentParams {
        DeploymentParams {
            hard_core_radius_m: 0.9,
            cell_intensity_per_m2: 0.31,
            region_radius_m: 34.0,
            window_side_m: 70.0,
        }
    }

    fn reference_model() -> TransmissionModel {
        let ch = reference_channel();
        let stats = InterferenceStats::from_geometry(&reference_deployment(), &ch).unwrap();
        TransmissionModel::new(ch, stats, 1e7).unwrap()
    }

    #[test]
    fn delay_and_interference_maps_invert_each_other() {
        let model = reference_model();
        let a_min = model.min_delay();
        for scale in [0.3, 0.7, 0.95, 1.0, 1.05, 1.5, 3.0, 10.0, 100.0] {
            let alpha = a_min * scale;
            let i = model.interference_for_delay(alpha);
            assert_relative_eq!(model.delay_for_interference(i), alpha, max_relative = 1e-9);
            let back = model.channel().capacity(i) * alpha;
            assert_relative_eq!(back, model.payload_bits(), max_relative = 1e-9);
        }
    }

    #[test]
    fn interference_map_limits() {
        let model = reference_model();
        let near_zero = model.interference_for_delay(1e-12);
        assert_relative_eq!(
            near_zero,
            -model.channel().noise_floor(),
            max_relative = 1e-9
        );
        // Slowing the link by many decades demands interference many
        // decades above its physical scale.
        assert!(model.interference_for_delay(1e4) > 1e6 * model.interference().mean_w);
    }

    #[test]
    fn interference_slope_matches_finite_differences() {
        let model = reference_model();
        let a_min = model.min_delay();
        for scale in [0.5, 0.9, 1.0, 1.2, 2.0, 5.0, 40.0] {
            let alpha = a_min * scale;
            let h = alpha * 1e-6;
            let fd = (model.interference_for_delay(alpha + h)
                - model.interference_for_delay(alpha - h))
                / (2.0 * h);
            assert_relative_eq!(model.interference_slope(alpha), fd, max_relative = 1e-5);
        }
    }

    #[test]
    fn interference_slope_large_delay_limit() {
        let model = reference_model();
        let ch = model.channel();
        let limit =
            ch.serving_power() * ch.bandwidth_hz / (model.payload_bits() * std::f64::consts::LN_2);
        assert_relative_eq!(model.interference_slope(1e5), limit, max_relative = 1e-3);
    }

    #[test]
    fn tabulated_density_mass_matches_gaussian_share() {
        let model = reference_model();
        let grid = Grid::new(2e-6, 4096).unwrap();
        let pdf = model.tabulate_pdf(grid).unwrap();
        assert_abs_diff_eq!(pdf.mass(), model.mass_above_noise_floor(), epsilon = 1e-3);
        assert_abs_diff_eq!(pdf.mass() + pdf.lost_mass(), 1.0, epsilon = 1e-3);
        let cdf = model.tabulate_cdf(grid).unwrap();
        assert_abs_diff_eq!(
            cdf.values().last().unwrap() + cdf.lost_mass(),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn density_integral_tracks_exact_distribution() {
        // The cumulative trapezoid of the density must agree with the
        // closed-form distribution at every grid point, up to second-order
        // quadrature error in the steep shoulder.
        let model = reference_model();
        let grid = Grid::new(5e-7, 16384).unwrap();
        let pdf = model.tabulate_pdf(grid).unwrap();
        let cdf = pdf.to_cdf().unwrap();
        // The density carries the continuous part only, so the zero-delay
        // atom is subtracted from the exact distribution.
        let atom = model.below_floor_mass();
        for i in (0..grid.len()).step_by(97) {
            assert_abs_diff_eq!(
                cdf.values()[i],
                model.cumulative(grid.point(i)) - atom,
                epsilon = 1e-5
            );
        }
    }

    #[test]
    fn density_peaks_at_mean_interference_delay() {
        // The change-of-variables factor shifts the mode by an amount of
        // order variance, so the identification only holds for a narrow
        // interference law.
        let ch = reference_channel();
        let base = InterferenceStats::from_geometry(&reference_deployment(), &ch).unwrap();
        let stats = InterferenceStats {
            mean_w: base.mean_w,
            std_w: base.mean_w * 0.02,
        };
        let model = TransmissionModel::new(ch, stats, 1e7).unwrap();
        let grid = Grid::new(5e-7, 8192).unwrap();
        let pdf = model.tabulate_pdf(grid).unwrap();
        let peak_idx = pdf
            .values()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        let mode = model.delay_for_interference(model.interference().mean_w);
        assert!(
            (grid.point(peak_idx) - mode).abs() <= grid.step(),
            "peak at {} vs mode {}",
            grid.point(peak_idx),
            mode
        );
    }

    #[test]
    fn narrow_interference_recovers_deterministic_service_rate() {
        let ch = reference_channel();
        let base = InterferenceStats::from_geometry(&reference_deployment(), &ch).unwrap();
        let stats = InterferenceStats {
            mean_w: base.mean_w,
            std_w: base.mean_w * 1e-3,
        };
        let model = TransmissionModel::new(ch, stats, 1e7).unwrap();
        let grid = Grid::new(2e-7, 8192).unwrap();
        let pdf = model.tabulate_pdf(grid).unwrap();
        let moments = model.service_moments(&pdf);
        let deterministic = model.delay_for_interference(stats.mean_w);
        assert_relative_eq!(moments.mean_s, deterministic, max_relative = 1e-5);
        assert_relative_eq!(
            moments.rate_hz(),
            ch.capacity(stats.mean_w) / 1e7,
            max_relative = 1e-5
        );
    }

    #[test]
    fn service_rate_decreases_with_interference_level() {
        let ch = reference_channel();
        let base = InterferenceStats::from_geometry(&reference_deployment(), &ch).unwrap();
        let grid = Grid::new(2e-6, 4096).unwrap();
        let mut previous = f64::INFINITY;
        for factor in [0.5, 1.0, 2.0, 4.0] {
            let stats = InterferenceStats {
                mean_w: base.mean_w * factor,
                std_w: base.std_w,
            };
            let model = TransmissionModel::new(ch, stats, 1e7).unwrap();
            let pdf = model.tabulate_pdf(grid).unwrap();
            let rate = model.service_moments(&pdf).rate_hz();
            assert!(rate < previous, "rate must fall as interference grows");
            previous = rate;
        }
    }

    #[test]
    fn residual_of_exponential_is_the_same_exponential() {
        let grid = Grid::new(1e-4, 2000).unwrap();
        let service = exponential_cdf(grid, 400.0).unwrap();
        let residual = residual_service_cdf(&service).unwrap();
        for i in (0..grid.len()).step_by(113) {
            let t = grid.point(i);
            let want = 1.0 - (-400.0f64 * t).exp();
            assert_abs_diff_eq!(residual.values()[i], want, epsilon = 1e-3);
        }
        assert_abs_diff_eq!(*residual.values().last().unwrap(), 1.0, epsilon = 0.0);
    }

    #[test]
    fn residual_of_uniform_service_matches_closed_form() {
        // Uniform service on [0, b]: residual distribution t (2b - t) / b^2.
        let b = 0.02;
        let grid = Grid::new(1e-5, 4001).unwrap();
        let vals = grid.points().map(|t| (t / b).min(1.0)).collect();
        let service = TabulatedDist::new_cdf(grid, vals).unwrap();
        let residual = residual_service_cdf(&service).unwrap();
        for i in (0..grid.len()).step_by(59) {
            let t = grid.point(i);
            let want = if t < b {
                t * (2.0 * b - t) / (b * b)
            } else {
                1.0
            };
            assert_abs_diff_eq!(residual.values()[i], want, epsilon = 1e-4);
        }
    }

    #[test]
    fn exponential_service_queue_matches_markov_waiting_law() {
        // With exponential service the waiting law is explicit:
        // P(W <= t) = 1 - rho exp(-(mu - lambda) t).
        let mu = 400.0;
        let lambda = 160.0;
        let grid = Grid::new(2e-5, 8192).unwrap();
        let service = exponential_cdf(grid, mu).unwrap();
        let moments = ServiceMoments {
            mean_s: 1.0 / mu,
            second_moment_s2: 2.0 / (mu * mu),
        };
        let law = radio_queue_law(&service, &moments, lambda, 1e-9, ConvMode::Auto).unwrap();
        assert_relative_eq!(law.utilization, 0.4, max_relative = 1e-12);
        let mut worst = 0.0f64;
        for (i, got) in law.wait_cdf.values().iter().enumerate() {
            let t = grid.point(i);
            let want = 1.0 - 0.4 * (-(mu - lambda) * t).exp();
            worst = worst.max((got - want).abs());
        }
        assert!(worst < 1e-3, "max abs err {worst:.2e}");
        // Sojourn law of the same queue is exponential with rate mu - lambda.
        let mut worst_sojourn = 0.0f64;
        for (i, got) in law.sojourn_cdf.values().iter().enumerate() {
            let t = grid.point(i);
            let want = 1.0 - (-(mu - lambda) * t).exp();
            worst_sojourn = worst_sojourn.max((got - want).abs());
        }
        assert!(worst_sojourn < 1e-3, "max abs err {worst_sojourn:.2e}");
    }

    #[test]
    fn waiting_law_starts_at_idle_probability() {
        let mu = 500.0;
        let grid = Grid::new(5e-5, 2048).unwrap();
        let service = exponential_cdf(grid, mu).unwrap();
        let moments = ServiceMoments {
            mean_s: 1.0 / mu,
            second_moment_s2: 2.0 / (mu * mu),
        };
        for lambda in [50.0, 200.0, 450.0] {
            let law = radio_queue_law(&service, &moments, lambda, 1e-9, ConvMode::Auto).unwrap();
            assert_relative_eq!(
                law.wait_cdf.values()[0],
                1.0 - lambda / mu,
                max_relative = 1e-9
            );
        }
    }

    #[test]
    fn truncation_order_is_saturated() {
        // Adding folds past the chosen order moves the waiting law by less
        // than the tail budget.
        let mu = 400.0;
        let lambda = 240.0;
        let grid = Grid::new(5e-5, 4096).unwrap();
        let service = exponential_cdf(grid, mu).unwrap();
        let moments = ServiceMoments {
            mean_s: 1.0 / mu,
            second_moment_s2: 2.0 / (mu * mu),
        };
        let rho = lambda * moments.mean_s;
        let order = geometric_truncation_order(rho, 1e-9).unwrap();
        let residual = residual_service_cdf(&service).unwrap();
        let base =
            crate::numerics::geometric_compound_cdf(&residual, rho, order, ConvMode::Auto).unwrap();
        let more =
            crate::numerics::geometric_compound_cdf(&residual, rho, order + 5, ConvMode::Auto)
                .unwrap();
        let worst = base
            .values()
            .iter()
            .zip(more.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(worst < 1e-9, "max abs err {worst:.2e}");
    }

    #[test]
    fn unstable_radio_queue_is_rejected() {
        let mu = 400.0;
        let grid = Grid::new(5e-5, 1024).unwrap();
        let service = exponential_cdf(grid, mu).unwrap();
        let moments = ServiceMoments {
            mean_s: 1.0 / mu,
            second_moment_s2: 2.0 / (mu * mu),
        };
        let err = radio_queue_law(&service, &moments, 400.0, 1e-9, ConvMode::Auto).unwrap_err();
        assert!(matches!(err, Error::UnstableQueue { rho } if rho >= 1.0));
    }

    fn reference_queues() -> QueueParams {
        QueueParams {
            request_rate_hz: 0.1,
            processing_rate_hz: 200.0,
            radio_arrival_rate_hz: 0.1,
        }
    }

    fn reference_spec() -> AnalysisSpec {
        AnalysisSpec {
            grid_step_s: 30e-3 / (1 << 14) as f64,
            max_deadline_s: 30e-3,
            tail_epsilon: 1e-9,
        }
    }

    #[test]
    fn queue_params_validation() {
        assert!(reference_queues().validate().is_ok());
        let mut bad = reference_queues();
        bad.processing_rate_hz = 0.05;
        assert!(bad.validate().is_err());
        let mut bad = reference_queues();
        bad.request_rate_hz = -1.0;
        assert!(bad.validate().is_err());
        let mut bad = reference_spec();
        bad.tail_epsilon = 0.5;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn end_to_end_analysis_is_coherent() {
        let model = reference_model();
        let analysis = analyze(&model, &reference_queues(), &reference_spec()).unwrap();

        // Distribution function invariants.
        let e2e = &analysis.end_to_end_cdf;
        assert_eq!(e2e.values()[0], 0.0);
        assert!(e2e.values().windows(2).all(|w| w[1] >= w[0] - 1e-12));
        let covered = e2e.values().last().unwrap() + e2e.lost_mass();
        assert!(1.0 - covered <= 1e-9 + 1e-12, "covered {covered}");

        // Horizon spans the deadline with margin.
        assert!(analysis.grid.last() >= 1.2 * 30e-3);

        // Waiting law starts at the idle probability.
        assert_relative_eq!(
            analysis.queue_wait_cdf.values()[0],
            1.0 - analysis.utilization,
            max_relative = 1e-9
        );

        // Reliability grows with the deadline.
        let r10 = analysis.reliability(10e-3);
        let r20 = analysis.reliability(20e-3);
        let r30 = analysis.reliability(30e-3);
        assert!(r10 > 0.0 && r10 < r20 && r20 < r30 && r30 < 1.0);

        // At near-zero radio load the radio sojourn is almost pure service.
        assert!(analysis.utilization < 1e-3);
        assert_relative_eq!(
            analysis.mean_radio_sojourn_s,
            analysis.service.mean_s,
            max_relative = 1e-3
        );

        // The processing queue dominates: its mean sojourn is the bulk of
        // the end-to-end mean.
        assert_relative_eq!(analysis.mean_processing_sojourn_s, 1.0 / 199.9);
    }

    #[test]
    fn mean_radio_sojourn_matches_distribution_mean() {
        // Moment formula against direct integration of the sojourn law.
        let ch = reference_channel();
        let stats = InterferenceStats::from_geometry(&reference_deployment(), &ch).unwrap();
        let model = TransmissionModel::new(ch, stats, 1e7).unwrap();
        let queues = QueueParams {
            request_rate_hz: 0.1,
            processing_rate_hz: 200.0,
            radio_arrival_rate_hz: 1000.0,
        };
        let analysis = analyze(&model, &queues, &reference_spec()).unwrap();
        assert!(analysis.utilization > 0.5, "load should be substantial");
        let grid = &analysis.grid;
        let vals = analysis.radio_sojourn_cdf.values();
        let mass = *vals.last().unwrap();
        let mut mean = 0.0;
        for i in 1..grid.len() {
            let s0 = mass - vals[i - 1];
            let s1 = mass - vals[i];
            mean += 0.5 * grid.step() * (s0 + s1);
        }
        assert_relative_eq!(mean, analysis.mean_radio_sojourn_s, max_relative = 5e-3);
    }

    #[test]
    fn reliability_is_horizon_insensitive() {
        // Doubling the horizon must not move reliabilities at deadlines
        // far inside it.
        let model = reference_model();
        let queues = reference_queues();
        let spec = reference_spec();
        let a = analyze(&model, &queues, &spec).unwrap();
        let wider = AnalysisSpec {
            max_deadline_s: spec.max_deadline_s * 4.0,
            ..spec
        };
        let b = analyze(&model, &queues, &wider).unwrap();
        for d in [10e-3, 20e-3, 30e-3] {
            // The folds are causal, so only transform-size roundoff can
            // separate the two runs.
            assert_abs_diff_eq!(a.reliability(d), b.reliability(d), epsilon = 5e-9);
        }
    }

    #[test]
    fn unstable_pipeline_surfaces_queue_error() {
        let ch = reference_channel();
        let stats = InterferenceStats::from_geometry(&reference_deployment(), &ch).unwrap();
        let model = TransmissionModel::new(ch, stats, 1e7).unwrap();
        let queues = QueueParams {
            request_rate_hz: 0.1,
            processing_rate_hz: 200.0,
            radio_arrival_rate_hz: 1e7,
        };
        let err = analyze(&model, &queues, &reference_spec()).unwrap_err();
        assert!(matches!(err, Error::UnstableQueue { .. }));
    }
}
