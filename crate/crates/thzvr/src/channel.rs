//! Terahertz link budget: spreading and molecular absorption, the noise
//! floor seen by the user, and the resulting spectral capacity.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Boltzmann constant in J/K.
pub const BOLTZMANN: f64 = 1.380649e-23;
/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299792458.0;

/// Spreading loss `(4 pi f d / c)^2` of an isotropic link at carrier `f_hz`
/// over distance `d_m`.
pub fn free_space_loss(f_hz: f64, d_m: f64) -> f64 {
    let x = 4.0 * std::f64::consts::PI * f_hz * d_m / SPEED_OF_LIGHT;
    x * x
}

/// Fraction of power surviving molecular absorption over `d_m` meters at
/// absorption coefficient `k_per_m`.
pub fn transmittance(k_per_m: f64, d_m: f64) -> f64 {
    (-k_per_m * d_m).exp()
}

/// Downlink parameters shared by every small cell in the deployment.
///
/// The serving distance is the fixed distance between the user and its own
/// small cell; interfering cells sit at distances drawn from the deployment
/// geometry.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelParams {
    /// Carrier frequency in Hz.
    pub carrier_hz: f64,
    /// Transmission bandwidth in Hz.
    pub bandwidth_hz: f64,
    /// Transmit power per cell in W.
    pub tx_power_w: f64,
    /// Molecular absorption coefficient in 1/m.
    pub absorption_per_m: f64,
    /// Distance from the user to its serving cell in m.
    pub serving_distance_m: f64,
    /// System noise temperature in K.
    pub noise_temp_k: f64,
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        let positive: [(&'static str, f64); 5] = [
            ("carrier_hz", self.carrier_hz),
            ("bandwidth_hz", self.bandwidth_hz),
            ("tx_power_w", self.tx_power_w),
            ("serving_distance_m", self.serving_distance_m),
            ("noise_temp_k", self.noise_temp_k),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "must be finite and positive",
                });
            }
        }
        if !(self.absorption_per_m.is_finite() && self.absorption_per_m >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "absorption_per_m",
                value: self.absorption_per_m,
                reason: "must be finite and non-negative",
            });
        }
        Ok(())
    }

    /// Frequency-dependent aperture factor `c^2 / (16 pi^2 f^2)`, the
    /// inverse of the spreading loss at one meter.
    pub fn aperture_factor(&self) -> f64 {
        let c_over_f = SPEED_OF_LIGHT / self.carrier_hz;
        let quarter_wavelength_scale = c_over_f / (4.0 * std::f64::consts::PI);
        quarter_wavelength_scale * quarter_wavelength_scale
    }

    /// Power received from a cell at distance `d_m`, including absorption.
    pub fn received_power(&self, d_m: f64) -> f64 {
        self.tx_power_w * self.aperture_factor() / (d_m * d_m)
            * transmittance(self.absorption_per_m, d_m)
    }

    /// Power received over the serving link.
    pub fn serving_power(&self) -> f64 {
        self.received_power(self.serving_distance_m)
    }

    /// Noise floor: thermal noise over the band plus the power re-radiated
    /// by the molecules that absorb the serving signal.
    pub fn noise_floor(&self) -> f64 {
        let thermal = BOLTZMANN * self.noise_temp_k * self.bandwidth_hz;
        let d0 = self.serving_distance_m;
        let reradiated = self.tx_power_w * self.aperture_factor() / (d0 * d0)
            * (1.0 - transmittance(self.absorption_per_m, d0));
        thermal + reradiated
    }

    /// Signal-to-interference-plus-noise ratio at aggregate interference
    /// power `interference_w`. Physical interference is non-negative, but
    /// any value above the negated noise floor is accepted so the delay
    /// model can evaluate its inverse map on both sides of zero.
    pub fn sinr(&self, interference_w: f64) -> f64 {
        debug_assert!(self.noise_floor() + interference_w > 0.0);
        self.serving_power() / (self.noise_floor() + interference_w)
    }

    /// Shannon capacity of the link in bit/s at the given interference.
    pub fn capacity(&self, interference_w: f64) -> f64 {
        self.bandwidth_hz * self.sinr(interference_w).ln_1p() / std::f64::consts::LN_2
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn reference_channel() -> ChannelParams {
        ChannelParams {
            carrier_hz: 1e12,
            bandwidth_hz: 1e10,
            tx_power_w: 1.0,
            absorption_per_m: 0.0016,
            serving_distance_m: 1.0,
            noise_temp_k: 300.0,
        }
    }

    #[test]
    fn spreading_loss_at_one_terahertz_one_meter() {
        assert_relative_eq!(
            free_space_loss(1e12, 1.0),
            1757026542.415858,
            max_relative = 1e-12
        );
    }

    #[test]
    fn aperture_factor_inverts_unit_spreading_loss() {
        let ch = reference_channel();
        assert_relative_eq!(
            ch.aperture_factor(),
            5.691433657143451e-10,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            ch.aperture_factor() * free_space_loss(ch.carrier_hz, 1.0),
            1.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn transmittance_over_one_meter() {
        assert_relative_eq!(
            transmittance(0.0016, 1.0),
            0.9984012793176063,
            max_relative = 1e-12
        );
    }

    #[test]
    fn received_power_over_reference_link() {
        assert_relative_eq!(
            reference_channel().received_power(1.0),
            5.682334644443304e-10,
            max_relative = 1e-12
        );
    }

    #[test]
    fn noise_floor_splits_into_thermal_and_reradiated_parts() {
        let ch = reference_channel();
        let thermal = BOLTZMANN * 300.0 * 1e10;
        assert_relative_eq!(thermal, 4.141947e-11, max_relative = 1e-12);
        assert_relative_eq!(
            ch.noise_floor() - thermal,
            9.099012700146777e-13,
            max_relative = 1e-11
        );
        assert_relative_eq!(
            ch.noise_floor(),
            4.2329371270014678e-11,
            max_relative = 1e-12
        );
    }

    #[test]
    fn sinr_and_capacity_without_interference() {
        let ch = reference_channel();
        assert_relative_eq!(ch.sinr(0.0), 13.42409413122694, max_relative = 1e-12);
        assert_relative_eq!(
            ch.capacity(0.0),
            3.8504088117876685e10,
            max_relative = 1e-12
        );
    }

    #[test]
    fn validate_rejects_bad_parameters() {
        let mut ch = reference_channel();
        assert!(ch.validate().is_ok());
        ch.carrier_hz = 0.0;
        assert!(ch.validate().is_err());
        ch = reference_channel();
        ch.absorption_per_m = -1.0;
        assert!(ch.validate().is_err());
        ch = reference_channel();
        ch.noise_temp_k = f64::NAN;
        assert!(ch.validate().is_err());
        ch = reference_channel();
        ch.absorption_per_m = 0.0;
        assert!(ch.validate().is_ok());
        assert_abs_diff_eq!(ch.noise_floor(), BOLTZMANN * 300.0 * 1e10, epsilon = 1e-25);
    }

    #[test]
    fn interference_absorption_cancels_exactly() {
        // Per interferer, absorbed power re-emerges as molecular noise:
        // attenuated power plus re-radiated power recovers the bare
        // spreading term to rounding error.
        let ch = reference_channel();
        let unit = ch.tx_power_w * ch.aperture_factor();
        for d in [0.3, 1.0, 2.7, 14.0, 33.9] {
            let t = transmittance(ch.absorption_per_m, d);
            let spread = unit / (d * d);
            let attenuated = spread * t;
            let reradiated = spread * (1.0 - t);
            assert_relative_eq!(
                attenuated + reradiated,
                spread,
                max_relative = 4.0 * f64::EPSILON
            );
        }
    }

    proptest! {
        #[test]
        fn received_power_decreases_with_distance(
            d1 in 0.1f64..10.0,
            scale in 1.01f64..5.0,
        ) {
            let ch = reference_channel();
            prop_assert!(ch.received_power(d1) > ch.received_power(d1 * scale));
        }

        #[test]
        fn capacity_monotone_in_bandwidth_and_interference(
            w in 1e9f64..5e10,
            scale in 1.01f64..4.0,
            i in 0.0f64..1e-9,
        ) {
            let mut ch = reference_channel();
            ch.bandwidth_hz = w;
            let base = ch.capacity(i);
            prop_assert!(ch.capacity(i + 1e-11) < base);
            let mut wider = ch;
            wider.bandwidth_hz = w * scale;
            // Wider band raises thermal noise but capacity still grows.
            prop_assert!(wider.capacity(i) > base);
        }

        #[test]
        fn received_power_matches_loss_form(
            d in 0.1f64..20.0,
        ) {
            let ch = reference_channel();
            let via_loss = ch.tx_power_w * transmittance(ch.absorption_per_m, d)
                / free_space_loss(ch.carrier_hz, d);
            prop_assert!((ch.received_power(d) - via_loss).abs() <= 1e-12 * via_loss);
        }
    }
}
