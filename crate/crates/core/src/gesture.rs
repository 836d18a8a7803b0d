//! Point-scatterer gesture scripting and channel-response synthesis.
//!
//! A gesture is scripted as a per-frame set of [`Scatterer`]s (range, radial
//! velocity, reflectivity). [`synthesize_cir`] turns one frame's scatterer
//! set into a complex baseband channel impulse response: each scatterer
//! deposits `a * exp(-j 2 pi f0 * 2R(t)/c)` at the fast-time tap holding its
//! round-trip delay, sampled across the slow-time pulses, plus a circular
//! complex Gaussian noise floor.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;
// Float trait supplies the math intrinsics in no_std builds.
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::config::RadarConfig;
use crate::dsp::CirFrame;
use crate::error::{Error, Result};
use crate::rng::SimRng;

/// One point reflector: starting range, signed radial speed (positive =
/// receding), and linear reflectivity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scatterer {
    pub range_m: f64,
    pub velocity_mps: f64,
    pub amplitude: f64,
}

impl Scatterer {
    pub fn new(range_m: f64, velocity_mps: f64, amplitude: f64) -> Self {
        Self {
            range_m,
            velocity_mps,
            amplitude,
        }
    }

    fn check(&self, cfg: &RadarConfig) -> Result<()> {
        if !(self.range_m >= 0.0) || self.range_m >= cfg.max_range_m() {
            return Err(Error::OutOfAxis {
                axis: "range",
                value: self.range_m,
                limit: cfg.max_range_m(),
            });
        }
        if self.velocity_mps.abs() > cfg.max_unambiguous_speed_mps() {
            return Err(Error::OutOfAxis {
                axis: "velocity",
                value: self.velocity_mps,
                limit: cfg.max_unambiguous_speed_mps(),
            });
        }
        if !(self.amplitude >= 0.0) {
            return Err(Error::InvalidConfig(alloc::format!(
                "scatterer amplitude must be >= 0, got {}",
                self.amplitude
            )));
        }
        Ok(())
    }
}

/// The five gesture classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GestureLabel {
    Swipe,
    PalmHold,
    PullPush,
    FingerSlide,
    Noise,
}

impl GestureLabel {
    pub const ALL: [GestureLabel; 5] = [
        GestureLabel::Swipe,
        GestureLabel::PalmHold,
        GestureLabel::PullPush,
        GestureLabel::FingerSlide,
        GestureLabel::Noise,
    ];

    pub const COUNT: usize = 5;

    pub fn index(self) -> usize {
        match self {
            GestureLabel::Swipe => 0,
            GestureLabel::PalmHold => 1,
            GestureLabel::PullPush => 2,
            GestureLabel::FingerSlide => 3,
            GestureLabel::Noise => 4,
        }
    }

    pub fn from_index(idx: usize) -> Result<Self> {
        Self::ALL
            .get(idx)
            .copied()
            .ok_or_else(|| Error::UnknownLabel(alloc::format!("#{idx}")))
    }

    pub fn name(self) -> &'static str {
        match self {
            GestureLabel::Swipe => "swipe",
            GestureLabel::PalmHold => "palm_hold",
            GestureLabel::PullPush => "pull_push",
            GestureLabel::FingerSlide => "finger_slide",
            GestureLabel::Noise => "noise",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|l| l.name() == name)
            .ok_or_else(|| Error::UnknownLabel(String::from(name)))
    }
}

/// Scripted kinematics for one gesture instance: one scatterer set per RDI
/// frame, at the configured frame rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GestureScript {
    pub label: GestureLabel,
    pub frames: Vec<Vec<Scatterer>>,
    pub seed: u64,
}

impl GestureScript {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Validate the script against the config axes.
    pub fn check(&self, cfg: &RadarConfig) -> Result<()> {
        if self.frames.is_empty() {
            return Err(Error::InvalidSequence("gesture script has no frames".into()));
        }
        for frame in &self.frames {
            for s in frame {
                s.check(cfg)?;
            }
        }
        Ok(())
    }
}

/// Build a deterministic gesture script for `label`.
///
/// Kinematic templates (speeds and extents are randomized per seed within
/// axis-safe bounds):
/// - `Swipe`: a hand crossing the beam laterally at standoff `d`; the radial
///   component `v = u x / sqrt(d^2 + x^2)` flips sign at closest approach and
///   the echo strength fades in and out at the edges.
/// - `PalmHold`: one strong reflector at stable range with |v| <= 0.02 m/s.
/// - `PullPush`: radial oscillation toward and away from the sensor with a
///   large |v| excursion and periodic sign reversals.
/// - `FingerSlide`: a weak reflector at near-constant range with a fast,
///   small velocity oscillation.
/// - `Noise`: zero to three faint scatterers redrawn independently per frame.
pub fn make_gesture(
    label: GestureLabel,
    cfg: &RadarConfig,
    seed: u64,
    duration_frames: usize,
) -> Result<GestureScript> {
    if duration_frames == 0 {
        return Err(Error::InvalidSequence(
            "duration_frames must be >= 1".into(),
        ));
    }
    let mut rng = SimRng::substream(seed, crate::rng::Stream::Simulate);
    let dt = 1.0 / cfg.frame_rate_fps;
    let n = duration_frames;
    let r_hi = cfg.max_range_m() - 0.01;

    let frames: Vec<Vec<Scatterer>> = match label {
        GestureLabel::Swipe => {
            let standoff = rng.range(0.06, 0.12);
            let x_max = rng.range(0.18, 0.28).min(libm_hypot_bound(r_hi, standoff));
            let span = (n.max(2) - 1) as f64 * dt;
            let lateral_speed = 2.0 * x_max / span.max(dt);
            let base_amp = rng.range(0.8, 1.2);
            (0..n)
                .map(|k| {
                    let x = -x_max + lateral_speed * k as f64 * dt;
                    let range = (standoff * standoff + x * x).sqrt();
                    let velocity = lateral_speed * x / range;
                    // Echo fades in/out as the hand enters and leaves the beam.
                    let envelope = 0.25
                        + 0.75
                            * (core::f64::consts::PI * k as f64 / (n.max(2) - 1) as f64)
                                .sin()
                                .powi(2);
                    vec![Scatterer::new(
                        range.min(r_hi),
                        clamp_speed(velocity, cfg),
                        base_amp * envelope * rng.range(0.9, 1.1),
                    )]
                })
                .collect()
        }
        GestureLabel::PalmHold => {
            let range0 = rng.range(0.08, 0.30);
            let base_amp = rng.range(0.8, 1.3);
            let secondary = rng.bernoulli(0.5);
            let mut range = range0;
            (0..n)
                .map(|k| {
                    let velocity = rng.range(-0.015, 0.015);
                    range = (range + velocity * dt).clamp(0.02, r_hi);
                    let mut set = vec![Scatterer::new(
                        range,
                        velocity,
                        base_amp * rng.range(0.95, 1.05),
                    )];
                    if secondary && k % 2 == 0 {
                        set.push(Scatterer::new(
                            (range + 0.03).min(r_hi),
                            rng.range(-0.015, 0.015),
                            0.2 * base_amp,
                        ));
                    }
                    set
                })
                .collect()
        }
        GestureLabel::PullPush => {
            let center = rng.range(0.16, 0.26);
            let swing = rng.range(0.06, 0.10);
            // Two full pull-push cycles per script.
            let period = (n as f64 / 2.0).max(2.0);
            let omega = core::f64::consts::TAU / (period * dt);
            let base_amp = rng.range(0.7, 1.1);
            (0..n)
                .map(|k| {
                    let phase = core::f64::consts::TAU * k as f64 / period;
                    let range = (center + swing * phase.cos()).clamp(0.02, r_hi);
                    let velocity = -swing * omega * phase.sin() + rng.range(-0.02, 0.02);
                    vec![Scatterer::new(
                        range,
                        clamp_speed(velocity, cfg),
                        base_amp * rng.range(0.9, 1.1),
                    )]
                })
                .collect()
        }
        GestureLabel::FingerSlide => {
            let range0 = rng.range(0.05, 0.22);
            let v_amp = rng.range(0.10, 0.25);
            let period = rng.range(2.5, 4.0);
            let phase0 = rng.range(0.0, core::f64::consts::TAU);
            let base_amp = rng.range(0.15, 0.40);
            let mut range = range0;
            (0..n)
                .map(|k| {
                    let velocity =
                        v_amp * (core::f64::consts::TAU * k as f64 / period + phase0).sin();
                    range = (range + velocity * dt).clamp(0.02, r_hi);
                    let flicker = 1.0 + 0.3 * (core::f64::consts::TAU * k as f64 / period).cos();
                    vec![Scatterer::new(
                        range,
                        velocity,
                        base_amp * flicker.max(0.3) * rng.range(0.85, 1.15),
                    )]
                })
                .collect()
        }
        GestureLabel::Noise => (0..n)
            .map(|_| {
                let count = rng.index(4);
                (0..count)
                    .map(|_| {
                        Scatterer::new(
                            rng.range(0.0, r_hi),
                            rng.range(-1.0, 1.0),
                            rng.range(0.02, 0.15),
                        )
                    })
                    .collect()
            })
            .collect(),
    };

    let script = GestureScript {
        label,
        frames,
        seed,
    };
    script.check(cfg)?;
    Ok(script)
}

fn clamp_speed(v: f64, cfg: &RadarConfig) -> f64 {
    let lim = cfg.max_unambiguous_speed_mps() - 0.1;
    v.clamp(-lim, lim)
}

/// Largest |x| keeping sqrt(d^2 + x^2) below the range axis.
fn libm_hypot_bound(r_hi: f64, d: f64) -> f64 {
    ((r_hi - 0.02) * (r_hi - 0.02) - d * d).max(0.0).sqrt()
}

/// Noiseless superposition of the scatterer echoes (the deterministic part
/// of the channel response). Deposits use the nearest-tap model: all of a
/// scatterer's energy lands in the tap containing its round-trip delay.
pub fn scatterer_response(
    scatterers: &[Scatterer],
    cfg: &RadarConfig,
    frame_index: u64,
    timestamp_s: f64,
) -> Result<CirFrame> {
    let pulses = cfg.pulses_per_frame;
    let taps = cfg.num_fast_time_taps;
    let mut samples = vec![Complex64::new(0.0, 0.0); pulses * taps];

    let tap_spacing = cfg.tap_spacing_s();
    let c = cfg.light_speed_mps;
    let f0 = cfg.carrier_hz;

    for s in scatterers {
        s.check(cfg)?;
        for p in 0..pulses {
            let t = p as f64 / cfg.pulse_repetition_hz;
            let range = s.range_m + s.velocity_mps * t;
            let delay = 2.0 * range / c;
            let tap = (delay / tap_spacing).floor();
            // Migration past the captured taps leaves the observation window.
            if tap < 0.0 || tap >= taps as f64 {
                continue;
            }
            let cycles = f0 * delay;
            let phase = -core::f64::consts::TAU * cycles;
            samples[p * taps + tap as usize] += Complex64::from_polar(s.amplitude, phase);
        }
    }

    Ok(CirFrame {
        samples,
        pulses,
        taps,
        frame_index,
        timestamp_s,
    })
}

/// Full channel synthesis: scatterer echoes plus a circular complex Gaussian
/// noise floor `noise_floor_snr_db` below the strongest scatterer (or below a
/// unit reference when the scatterer set is empty).
pub fn synthesize_cir(
    scatterers: &[Scatterer],
    cfg: &RadarConfig,
    rng: &mut SimRng,
    frame_index: u64,
    timestamp_s: f64,
) -> Result<CirFrame> {
    let mut frame = scatterer_response(scatterers, cfg, frame_index, timestamp_s)?;
    let reference = scatterers
        .iter()
        .map(|s| s.amplitude)
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0);
    let reference = if reference > 0.0 { reference } else { 1.0 };
    let noise_power = reference * reference * 10f64.powf(-cfg.noise_floor_snr_db / 10.0);
    let sigma = (noise_power / 2.0).sqrt();
    for v in &mut frame.samples {
        *v += Complex64::new(sigma * rng.normal(), sigma * rng.normal());
    }
    Ok(frame)
}

/// Render a whole script into CIR frames, threading one RNG through the
/// per-frame noise draws.
pub fn render_script(
    script: &GestureScript,
    cfg: &RadarConfig,
    rng: &mut SimRng,
) -> Result<Vec<CirFrame>> {
    script
        .frames
        .iter()
        .enumerate()
        .map(|(k, scatterers)| {
            synthesize_cir(
                scatterers,
                cfg,
                rng,
                k as u64,
                k as f64 / cfg.frame_rate_fps,
            )
        })
        .collect()
}
