//! Range-Doppler image formation.
//!
//! Each fast-time tap of a CIR frame holds a slow-time series across the
//! frame's pulses. A Hann-windowed FFT along slow time, center-shifted and
//! cropped to the central Doppler bins, yields the RDI: rows are range taps,
//! columns are Doppler bins with zero velocity in the middle column.

use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;
// Float trait supplies the math intrinsics in no_std builds.
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::config::RadarConfig;
use crate::error::{Error, Result};
use crate::fft;
use crate::gesture::GestureLabel;

/// Floor added inside the dB conversion so empty cells stay finite.
pub const DB_EPSILON: f64 = 1e-12;

/// One frame of complex channel impulse response samples,
/// `pulses x taps` row-major (row = pulse).
#[derive(Debug, Clone, PartialEq)]
pub struct CirFrame {
    pub samples: Vec<Complex64>,
    pub pulses: usize,
    pub taps: usize,
    pub frame_index: u64,
    pub timestamp_s: f64,
}

impl CirFrame {
    pub fn sample(&self, pulse: usize, tap: usize) -> Complex64 {
        self.samples[pulse * self.taps + tap]
    }

    fn check_against(&self, cfg: &RadarConfig) -> Result<()> {
        if self.pulses != cfg.pulses_per_frame
            || self.taps < cfg.num_range_bins
            || self.samples.len() != self.pulses * self.taps
        {
            return Err(Error::ShapeMismatch {
                context: "CirFrame".into(),
                expected: alloc::format!(
                    "{} pulses x >= {} taps",
                    cfg.pulses_per_frame,
                    cfg.num_range_bins
                ),
                actual: alloc::format!("{} pulses x {} taps", self.pulses, self.taps),
            });
        }
        if self.samples.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidSequence("non-finite CIR sample".into()));
        }
        Ok(())
    }
}

/// Magnitude scale of the produced RDI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RdiScale {
    /// `20 log10(|X| + eps)` - the default, used as classifier input.
    Db,
    /// Raw `|X|`, handy for debugging.
    Linear,
}

/// One range-Doppler image: `rows x cols` real matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rdi {
    pub values: Vec<f64>,
    pub rows: usize,
    pub cols: usize,
    pub frame_index: u64,
    pub timestamp_s: f64,
    pub label: Option<GestureLabel>,
}

impl Rdi {
    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    /// Row/column of the strongest cell.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = (0, 0);
        let mut best_v = f64::NEG_INFINITY;
        for r in 0..self.rows {
            for c in 0..self.cols {
                let v = self.value(r, c);
                if v > best_v {
                    best_v = v;
                    best = (r, c);
                }
            }
        }
        best
    }
}

/// Symmetric Hann window.
fn hann(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| {
            let x = core::f64::consts::TAU * i as f64 / (n - 1) as f64;
            0.5 * (1.0 - x.cos())
        })
        .collect()
}

/// Convert a CIR frame into an RDI on the configured grid.
pub fn to_rdi(cir: &CirFrame, cfg: &RadarConfig) -> Result<Rdi> {
    to_rdi_scaled(cir, cfg, RdiScale::Db)
}

/// [`to_rdi`] with an explicit magnitude scale.
pub fn to_rdi_scaled(cir: &CirFrame, cfg: &RadarConfig, scale: RdiScale) -> Result<Rdi> {
    cir.check_against(cfg)?;
    let n = cfg.pulses_per_frame;
    let rows = cfg.num_range_bins;
    let cols = cfg.num_doppler_bins;
    let window = hann(n);
    let zero = cfg.zero_doppler_bin() as isize;

    let mut values = vec![0.0; rows * cols];
    let mut slow_time = vec![Complex64::new(0.0, 0.0); n];
    for row in 0..rows {
        for p in 0..n {
            slow_time[p] = cir.sample(p, row) * window[p];
        }
        let spectrum = fft::forward(&slow_time);
        for col in 0..cols {
            // Column `col` carries signed frequency offset (col - zero) bins.
            let offset = col as isize - zero;
            let k = offset.rem_euclid(n as isize) as usize;
            let mag = spectrum[k].norm();
            values[row * cols + col] = match scale {
                RdiScale::Db => 20.0 * (mag + DB_EPSILON).log10(),
                RdiScale::Linear => mag,
            };
        }
    }

    Ok(Rdi {
        values,
        rows,
        cols,
        frame_index: cir.frame_index,
        timestamp_s: cir.timestamp_s,
        label: None,
    })
}

/// Total energy of the unwindowed slow-time spectrum summed over all taps.
pub fn spectrum_energy(cir: &CirFrame) -> f64 {
    let mut total = 0.0;
    let mut slow_time = vec![Complex64::new(0.0, 0.0); cir.pulses];
    for tap in 0..cir.taps {
        for p in 0..cir.pulses {
            slow_time[p] = cir.sample(p, tap);
        }
        total += fft::spectrum_energy(&fft::forward(&slow_time));
    }
    total
}

/// Parseval identity on the unwindowed path: spectral energy must equal
/// `pulses x` time-domain energy, within relative tolerance `1e-9`.
pub fn parseval_check(cir: &CirFrame) -> bool {
    let time_energy: f64 = cir.samples.iter().map(|z| z.norm_sqr()).sum();
    let spec_energy = spectrum_energy(cir);
    let scaled = cir.pulses as f64 * time_energy;
    if scaled == 0.0 {
        return spec_energy == 0.0;
    }
    ((spec_energy - scaled) / scaled).abs() <= 1e-9
}
