//! Radar timing constants and bin mathematics.
//!
//! [`RadarConfig`] is the single source of truth for the physical and timing
//! parameters; every range/Doppler axis quantity in the crate derives from it.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Speed of light in vacuum (m/s).
pub const LIGHT_SPEED_MPS: f64 = 2.997_924_58e8;

/// Physical constants and frame timing for the pulse-Doppler front end.
///
/// Defaults model a 60 GHz sensor with 3.52 GHz bandwidth producing 9x49
/// range-Doppler images at 8 frames per second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadarConfig {
    /// Carrier frequency `f0` (Hz).
    pub carrier_hz: f64,
    /// Sweep bandwidth `B` (Hz); sets range resolution `c / (2 B)`.
    pub bandwidth_hz: f64,
    /// Speed of light (m/s); a field so config snapshots are self-contained.
    pub light_speed_mps: f64,
    /// Slow-time pulses coherently processed per RDI frame.
    pub pulses_per_frame: usize,
    /// Pulse repetition frequency (Hz).
    pub pulse_repetition_hz: f64,
    /// RDI frame rate (frames per second).
    pub frame_rate_fps: f64,
    /// Rows of the RDI (fast-time range taps kept after cropping).
    pub num_range_bins: usize,
    /// Columns of the RDI (central slow-time Doppler bins kept).
    pub num_doppler_bins: usize,
    /// Fast-time taps captured per pulse; must cover `num_range_bins` and
    /// leaves headroom for targets migrating past the last kept bin.
    pub num_fast_time_taps: usize,
    /// Additive noise floor, dB below the strongest scatterer.
    pub noise_floor_snr_db: f64,
}

impl Default for RadarConfig {
    fn default() -> Self {
        Self {
            carrier_hz: 60e9,
            bandwidth_hz: 3.52e9,
            light_speed_mps: LIGHT_SPEED_MPS,
            pulses_per_frame: 64,
            pulse_repetition_hz: 6400.0,
            frame_rate_fps: 8.0,
            num_range_bins: 9,
            num_doppler_bins: 49,
            num_fast_time_taps: 16,
            noise_floor_snr_db: 20.0,
        }
    }
}

impl RadarConfig {
    /// Check construction invariants. Call once after building or
    /// deserializing a config; the math below assumes they hold.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: alloc::string::String| Err(Error::InvalidConfig(msg));
        if !(self.carrier_hz > 0.0) {
            return fail(alloc::format!("carrier_hz must be > 0, got {}", self.carrier_hz));
        }
        if !(self.bandwidth_hz > 0.0) {
            return fail(alloc::format!(
                "bandwidth_hz must be > 0, got {}",
                self.bandwidth_hz
            ));
        }
        if !(self.light_speed_mps > 0.0) {
            return fail(alloc::format!(
                "light_speed_mps must be > 0, got {}",
                self.light_speed_mps
            ));
        }
        if !(self.pulse_repetition_hz > 0.0) {
            return fail(alloc::format!(
                "pulse_repetition_hz must be > 0, got {}",
                self.pulse_repetition_hz
            ));
        }
        if !(self.frame_rate_fps > 0.0) {
            return fail(alloc::format!(
                "frame_rate_fps must be > 0, got {}",
                self.frame_rate_fps
            ));
        }
        if self.pulses_per_frame < self.num_doppler_bins {
            return fail(alloc::format!(
                "pulses_per_frame ({}) must be >= num_doppler_bins ({})",
                self.pulses_per_frame,
                self.num_doppler_bins
            ));
        }
        if self.num_range_bins == 0 || self.num_doppler_bins == 0 {
            return fail("num_range_bins and num_doppler_bins must be > 0".into());
        }
        if self.num_fast_time_taps < self.num_range_bins {
            return fail(alloc::format!(
                "num_fast_time_taps ({}) must be >= num_range_bins ({})",
                self.num_fast_time_taps,
                self.num_range_bins
            ));
        }
        if self.max_unambiguous_speed_mps() <= 1.0 {
            return fail(alloc::format!(
                "max unambiguous speed {:.3} m/s must exceed 1 m/s",
                self.max_unambiguous_speed_mps()
            ));
        }
        Ok(())
    }

    /// Carrier wavelength `lambda0 = c / f0` (m). ~4.997 mm at 60 GHz.
    pub fn wavelength_m(&self) -> f64 {
        self.light_speed_mps / self.carrier_hz
    }

    /// Range resolution `c / (2 B)` (m). ~4.26 cm at 3.52 GHz bandwidth.
    pub fn range_resolution_m(&self) -> f64 {
        self.light_speed_mps / (2.0 * self.bandwidth_hz)
    }

    /// Fast-time tap spacing in seconds, `1 / B`.
    pub fn tap_spacing_s(&self) -> f64 {
        1.0 / self.bandwidth_hz
    }

    /// Largest speed whose Doppler shift stays inside `+/- PRF / 2`:
    /// `lambda0 * PRF / 4`.
    pub fn max_unambiguous_speed_mps(&self) -> f64 {
        self.wavelength_m() * self.pulse_repetition_hz / 4.0
    }

    /// Doppler FFT bin width (Hz): `PRF / pulses_per_frame`.
    pub fn doppler_bin_hz(&self) -> f64 {
        self.pulse_repetition_hz / self.pulses_per_frame as f64
    }

    /// Velocity covered by one Doppler bin (m/s).
    pub fn velocity_bin_width_mps(&self) -> f64 {
        self.doppler_bin_hz() * self.wavelength_m() / 2.0
    }

    /// Column index of zero velocity; exact center for odd bin counts.
    pub fn zero_doppler_bin(&self) -> usize {
        (self.num_doppler_bins - 1) / 2
    }

    /// One-past-the-end of the range axis (m): `num_range_bins * resolution`.
    pub fn max_range_m(&self) -> f64 {
        self.num_range_bins as f64 * self.range_resolution_m()
    }

    /// Doppler shift for a target with signed radial speed `velocity_mps`
    /// (positive = receding): `-2 v / lambda0`. Approaching targets produce
    /// a positive shift.
    pub fn doppler_shift_hz(&self, velocity_mps: f64) -> f64 {
        -2.0 * velocity_mps / self.wavelength_m()
    }

    /// Doppler column a target at `velocity_mps` lands in after the
    /// center-shifted slow-time FFT and the crop to `num_doppler_bins`.
    pub fn velocity_bin(&self, velocity_mps: f64) -> Result<usize> {
        if velocity_mps.abs() > self.max_unambiguous_speed_mps() {
            return Err(Error::OutOfAxis {
                axis: "velocity",
                value: velocity_mps,
                limit: self.max_unambiguous_speed_mps(),
            });
        }
        let offset = (self.doppler_shift_hz(velocity_mps) / self.doppler_bin_hz()).round();
        let bin = self.zero_doppler_bin() as f64 + offset;
        if bin < 0.0 || bin >= self.num_doppler_bins as f64 {
            return Err(Error::OutOfAxis {
                axis: "velocity",
                value: velocity_mps,
                limit: self.zero_doppler_bin() as f64 * self.velocity_bin_width_mps(),
            });
        }
        Ok(bin as usize)
    }

    /// Range row for a target at `range_m`: `floor(R / resolution)`.
    pub fn range_bin(&self, range_m: f64) -> Result<usize> {
        if range_m < 0.0 || range_m >= self.max_range_m() {
            return Err(Error::OutOfAxis {
                axis: "range",
                value: range_m,
                limit: self.max_range_m(),
            });
        }
        Ok((range_m / self.range_resolution_m()) as usize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn defaults_satisfy_invariants() {
        let cfg = RadarConfig::default();
        cfg.validate().unwrap();
        // ~5 mm wavelength at 60 GHz.
        assert_relative_eq!(cfg.wavelength_m(), 4.997e-3, max_relative = 1e-3);
        assert!(cfg.max_unambiguous_speed_mps() > 1.0);
    }

    #[test]
    fn range_resolution_matches_c_over_2b() {
        let cfg = RadarConfig::default();
        // Independent evaluation of c/(2B).
        let expected = 2.997_924_58e8 / (2.0 * 3.52e9);
        assert_relative_eq!(cfg.range_resolution_m(), expected, max_relative = 1e-12);
        assert_relative_eq!(cfg.range_resolution_m(), 0.04258, epsilon = 5e-6);

        let unit = RadarConfig {
            bandwidth_hz: LIGHT_SPEED_MPS / 2.0,
            ..RadarConfig::default()
        };
        assert_relative_eq!(unit.range_resolution_m(), 1.0, max_relative = 1e-12);

        let half = RadarConfig {
            bandwidth_hz: 1.76e9,
            ..RadarConfig::default()
        };
        // Halving bandwidth doubles the resolution cell.
        assert_relative_eq!(
            half.range_resolution_m(),
            2.0 * cfg.range_resolution_m(),
            max_relative = 1e-12
        );
        assert_relative_eq!(half.range_resolution_m(), 0.08517, epsilon = 5e-6);
    }

    #[test]
    fn doppler_shift_sign_and_magnitude() {
        let cfg = RadarConfig::default();
        assert_eq!(cfg.doppler_shift_hz(0.0), 0.0);

        // Approaching at 1 m/s: f_D = f0 * 2 v / c evaluated directly.
        let expected = 60e9 * 2.0 * 1.0 / LIGHT_SPEED_MPS;
        let shift = cfg.doppler_shift_hz(-1.0);
        assert!(shift > 0.0, "approaching target must give positive shift");
        assert_relative_eq!(shift, expected, max_relative = 1e-12);
        assert_relative_eq!(shift, 400.28, epsilon = 5e-3);

        // One 2 cm/s step is about one 8 Hz step.
        assert_relative_eq!(cfg.doppler_shift_hz(0.02), -8.006, epsilon = 5e-4);
    }

    #[test]
    fn doppler_shift_is_odd() {
        let cfg = RadarConfig::default();
        let mut rng = crate::rng::SimRng::new(5);
        for _ in 0..100 {
            let v = rng.range(-8.0, 8.0);
            assert_relative_eq!(
                cfg.doppler_shift_hz(-v),
                -cfg.doppler_shift_hz(v),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn velocity_bin_centering() {
        let cfg = RadarConfig::default();
        assert_eq!(cfg.velocity_bin(0.0).unwrap(), 24);
        assert_eq!(cfg.zero_doppler_bin(), 24);
        // Approaching targets land in the positive-Doppler half.
        assert!(cfg.velocity_bin(-0.5).unwrap() > 24);
        assert!(cfg.velocity_bin(0.5).unwrap() < 24);
    }

    #[test]
    fn velocity_bin_rejects_out_of_axis() {
        let cfg = RadarConfig::default();
        let too_fast = cfg.max_unambiguous_speed_mps() + 0.1;
        assert!(matches!(
            cfg.velocity_bin(too_fast),
            Err(Error::OutOfAxis { axis: "velocity", .. })
        ));
        // Inside the unambiguous span but outside the 49-bin crop.
        let outside_crop = (cfg.zero_doppler_bin() as f64 + 1.0) * cfg.velocity_bin_width_mps();
        if outside_crop < cfg.max_unambiguous_speed_mps() {
            assert!(cfg.velocity_bin(outside_crop).is_err());
        }
    }

    #[test]
    fn range_bin_examples_and_monotonicity() {
        let cfg = RadarConfig::default();
        assert_eq!(cfg.range_bin(0.0).unwrap(), 0);
        assert_eq!(cfg.range_bin(0.10).unwrap(), 2);
        assert!(cfg.range_bin(-0.01).is_err());
        assert!(cfg.range_bin(cfg.max_range_m()).is_err());

        let mut prev = 0;
        for i in 0..100 {
            let r = cfg.max_range_m() * 0.999 * i as f64 / 99.0;
            let bin = cfg.range_bin(r).unwrap();
            assert!(bin >= prev, "range_bin must be monotone");
            prev = bin;
        }
    }

    #[test]
    fn validate_rejects_bad_configs() {
        let mut cfg = RadarConfig {
            bandwidth_hz: 0.0,
            ..RadarConfig::default()
        };
        assert!(cfg.validate().is_err());

        cfg = RadarConfig {
            pulses_per_frame: 16,
            ..RadarConfig::default()
        };
        assert!(cfg.validate().is_err(), "fewer pulses than Doppler bins");

        cfg = RadarConfig {
            pulse_repetition_hz: 100.0,
            ..RadarConfig::default()
        };
        assert!(cfg.validate().is_err(), "unambiguous speed below 1 m/s");

        cfg = RadarConfig {
            num_fast_time_taps: 4,
            ..RadarConfig::default()
        };
        assert!(cfg.validate().is_err(), "taps must cover range bins");
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = RadarConfig::default();
        let json = serde_json::to_string(&cfg).unwrap();
        let back: RadarConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(cfg, back);
        // Partial documents fall back to defaults.
        let partial: RadarConfig = serde_json::from_str(r#"{"carrier_hz": 61e9}"#).unwrap();
        assert_eq!(partial.carrier_hz, 61e9);
        assert_eq!(partial.num_range_bins, 9);
    }
}
