//! Frame-drop modelling and band-limited sequence restoration.
//!
//! Capture-side resource limits drop RDI frames at random, leaving a
//! compacted received stream. Restoration treats the received stream as
//! uniformly sampled, takes a 1-D FFT per feature dimension, zero-pads the
//! spectrum symmetrically to the target length (splitting the Nyquist bin
//! for even input lengths), and inverse-transforms - classic band-limited
//! resampling. The same machinery doubles as time-warp data augmentation.

use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dsp::Rdi;
use crate::error::{Error, Result};
use crate::fft;
use crate::gesture::GestureLabel;
use crate::rng::{SimRng, Stream};

/// An ordered RDI capture: only received frames are stored; the drop mask
/// records which nominal indices were lost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdiSequence {
    /// Received frames, in nominal order.
    pub frames: Vec<Rdi>,
    /// All intended frame indices (received or not), strictly increasing.
    pub nominal_indices: Vec<u64>,
    /// `drop_mask[i]` is true when nominal index `i` was dropped;
    /// length is `last nominal index + 1`.
    pub drop_mask: Vec<bool>,
    pub label: Option<GestureLabel>,
}

impl RdiSequence {
    /// Wrap a fully received frame list (no drops).
    pub fn from_frames(frames: Vec<Rdi>, label: Option<GestureLabel>) -> Self {
        let n = frames.len();
        Self {
            frames,
            nominal_indices: (0..n as u64).collect(),
            drop_mask: vec![false; n],
            label,
        }
    }

    /// Number of intended frames.
    pub fn nominal_len(&self) -> usize {
        self.drop_mask.len()
    }

    pub fn received_len(&self) -> usize {
        self.frames.len()
    }

    /// Nominal indices of the received frames.
    pub fn received_indices(&self) -> Vec<u64> {
        self.nominal_indices
            .iter()
            .copied()
            .filter(|&i| !self.drop_mask[i as usize])
            .collect()
    }

    pub fn has_drops(&self) -> bool {
        self.drop_mask.iter().any(|&d| d)
    }

    /// Validate the bookkeeping invariants.
    pub fn check(&self) -> Result<()> {
        if self.nominal_indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSequence(
                "nominal indices must be strictly increasing".into(),
            ));
        }
        match self.nominal_indices.last() {
            None => {
                if !self.drop_mask.is_empty() || !self.frames.is_empty() {
                    return Err(Error::InvalidSequence(
                        "empty index list with non-empty frames/mask".into(),
                    ));
                }
            }
            Some(&last) => {
                if self.drop_mask.len() != last as usize + 1 {
                    return Err(Error::InvalidSequence(alloc::format!(
                        "drop mask length {} != last nominal index {} + 1",
                        self.drop_mask.len(),
                        last
                    )));
                }
            }
        }
        let received = self
            .nominal_indices
            .iter()
            .filter(|&&i| !self.drop_mask[i as usize])
            .count();
        if received != self.frames.len() {
            return Err(Error::InvalidSequence(alloc::format!(
                "{} stored frames but mask expects {}",
                self.frames.len(),
                received
            )));
        }
        Ok(())
    }
}

/// How frames get dropped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DropModel {
    /// Each frame dropped independently with probability `drop_prob`.
    Iid { drop_prob: f64 },
    /// Drops arrive in bursts: a burst starts with probability `drop_prob`
    /// per frame and continues with geometric mean length `mean_burst_len`.
    Burst { drop_prob: f64, mean_burst_len: f64 },
}

/// Drop frames from a fully received sequence. Deterministic per seed.
pub fn inject_drops(seq: &RdiSequence, drop_prob: f64, seed: u64) -> Result<RdiSequence> {
    inject_drops_with(seq, DropModel::Iid { drop_prob }, seed)
}

/// [`inject_drops`] with an explicit drop model.
pub fn inject_drops_with(seq: &RdiSequence, model: DropModel, seed: u64) -> Result<RdiSequence> {
    seq.check()?;
    if seq.has_drops() {
        return Err(Error::InvalidSequence(
            "sequence already has drops".into(),
        ));
    }
    let p = match model {
        DropModel::Iid { drop_prob } | DropModel::Burst { drop_prob, .. } => drop_prob,
    };
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidConfig(alloc::format!(
            "drop_prob must be in [0, 1), got {p}"
        )));
    }

    let mut rng = SimRng::substream(seed, Stream::Drops);
    let n = seq.nominal_len();
    let mut mask = vec![false; n];
    match model {
        DropModel::Iid { drop_prob } => {
            for slot in mask.iter_mut() {
                *slot = rng.bernoulli(drop_prob);
            }
        }
        DropModel::Burst {
            drop_prob,
            mean_burst_len,
        } => {
            let continue_p = 1.0 - 1.0 / mean_burst_len.max(1.0);
            let mut in_burst = false;
            for slot in mask.iter_mut() {
                in_burst = if in_burst {
                    rng.bernoulli(continue_p)
                } else {
                    rng.bernoulli(drop_prob)
                };
                *slot = in_burst;
            }
        }
    }

    let frames: Vec<Rdi> = seq
        .frames
        .iter()
        .zip(mask.iter())
        .filter(|(_, &dropped)| !dropped)
        .map(|(f, _)| f.clone())
        .collect();

    Ok(RdiSequence {
        frames,
        nominal_indices: seq.nominal_indices.clone(),
        drop_mask: mask,
        label: seq.label,
    })
}

/// Per-frame feature vectors extracted from a sequence, plus enough
/// bookkeeping to reconstruct it exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    /// One vector per received frame.
    pub vectors: Vec<Vec<f64>>,
    pub dim: usize,
    pub rows: usize,
    pub cols: usize,
    /// Source-sequence metadata; present after [`encode`], absent after
    /// [`restore`] (restored samples are new points the caller re-stamps).
    pub meta: Option<SequenceMeta>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceMeta {
    pub frame_indices: Vec<u64>,
    pub timestamps: Vec<f64>,
    pub frame_labels: Vec<Option<GestureLabel>>,
    pub nominal_indices: Vec<u64>,
    pub drop_mask: Vec<bool>,
    pub label: Option<GestureLabel>,
}

/// Deterministic encoder: flatten each RDI row-major into one vector.
pub fn encode(seq: &RdiSequence) -> FeatureSequence {
    let (rows, cols) = seq
        .frames
        .first()
        .map(|f| (f.rows, f.cols))
        .unwrap_or((0, 0));
    FeatureSequence {
        vectors: seq.frames.iter().map(|f| f.values.clone()).collect(),
        dim: rows * cols,
        rows,
        cols,
        meta: Some(SequenceMeta {
            frame_indices: seq.frames.iter().map(|f| f.frame_index).collect(),
            timestamps: seq.frames.iter().map(|f| f.timestamp_s).collect(),
            frame_labels: seq.frames.iter().map(|f| f.label).collect(),
            nominal_indices: seq.nominal_indices.clone(),
            drop_mask: seq.drop_mask.clone(),
            label: seq.label,
        }),
    }
}

/// Inverse of [`encode`]: reshape each vector back into an RDI. With the
/// encoder's metadata present the original sequence is reproduced exactly;
/// otherwise frames are stamped on a fresh `0..n` nominal grid.
pub fn decode(features: &FeatureSequence) -> Result<RdiSequence> {
    for (i, v) in features.vectors.iter().enumerate() {
        if v.len() != features.dim || features.dim != features.rows * features.cols {
            return Err(Error::ShapeMismatch {
                context: alloc::format!("decode vector {i}"),
                expected: alloc::format!("{} = {}x{}", features.dim, features.rows, features.cols),
                actual: alloc::format!("{}", v.len()),
            });
        }
    }
    let frames: Vec<Rdi> = features
        .vectors
        .iter()
        .enumerate()
        .map(|(k, v)| Rdi {
            values: v.clone(),
            rows: features.rows,
            cols: features.cols,
            frame_index: features
                .meta
                .as_ref()
                .map(|m| m.frame_indices[k])
                .unwrap_or(k as u64),
            timestamp_s: features
                .meta
                .as_ref()
                .map(|m| m.timestamps[k])
                .unwrap_or(0.0),
            label: features.meta.as_ref().and_then(|m| m.frame_labels[k]),
        })
        .collect();
    Ok(match &features.meta {
        Some(meta) => RdiSequence {
            frames,
            nominal_indices: meta.nominal_indices.clone(),
            drop_mask: meta.drop_mask.clone(),
            label: meta.label,
        },
        None => RdiSequence::from_frames(frames, None),
    })
}

/// Band-limited resampling of the received feature stream to `target_len`
/// samples: per dimension, FFT the length-`N` series, zero-pad the spectrum
/// symmetrically (splitting the Nyquist bin when `N` is even), inverse FFT,
/// and scale by `target_len / N`.
///
/// `received_times` documents the received order and must be strictly
/// increasing with one entry per vector; the transform itself treats the
/// stream as uniformly spaced.
pub fn restore(
    features: &FeatureSequence,
    received_times: &[u64],
    target_len: usize,
) -> Result<FeatureSequence> {
    let n = features.vectors.len();
    if n == 0 {
        return Err(Error::InvalidSequence("nothing to restore".into()));
    }
    if received_times.len() != n {
        return Err(Error::ShapeMismatch {
            context: "restore received_times".into(),
            expected: alloc::format!("{n}"),
            actual: alloc::format!("{}", received_times.len()),
        });
    }
    if received_times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidSequence(
            "received_times must be strictly increasing".into(),
        ));
    }
    if target_len < n {
        return Err(Error::TargetLenTooShort {
            target: target_len,
            received: n,
        });
    }

    let dim = features.dim;
    let m = target_len;
    let mut out = vec![vec![0.0f64; dim]; m];
    let mut series = vec![Complex64::new(0.0, 0.0); n];
    let scale = m as f64 / n as f64;

    for d in 0..dim {
        for (k, v) in features.vectors.iter().enumerate() {
            series[k] = Complex64::new(v[d], 0.0);
        }
        let spectrum = fft::forward(&series);
        let mut padded = vec![Complex64::new(0.0, 0.0); m];
        if m == n {
            padded.copy_from_slice(&spectrum);
        } else {
            let half = n / 2;
            if n % 2 == 0 {
                for k in 0..half {
                    padded[k] = spectrum[k];
                }
                // Split the Nyquist bin between the two symmetric slots.
                padded[half] = spectrum[half] * 0.5;
                padded[m - half] = spectrum[half] * 0.5;
                for k in half + 1..n {
                    padded[m - n + k] = spectrum[k];
                }
            } else {
                for k in 0..=half {
                    padded[k] = spectrum[k];
                }
                for k in half + 1..n {
                    padded[m - n + k] = spectrum[k];
                }
            }
        }
        let resampled = fft::inverse(&padded);
        for (slot, value) in out.iter_mut().zip(resampled.iter()) {
            slot[d] = value.re * scale;
        }
    }

    Ok(FeatureSequence {
        vectors: out,
        dim,
        rows: features.rows,
        cols: features.cols,
        meta: None,
    })
}

/// Resampling-based augmentation: each variant stretches the sequence to a
/// longer length with [`restore`], then takes a centered window back at the
/// original length. Variant 0 is the unmodified input; labels are preserved.
pub fn augment(seq: &RdiSequence, factor: usize) -> Result<Vec<RdiSequence>> {
    if factor < 1 {
        return Err(Error::InvalidConfig("augment factor must be >= 1".into()));
    }
    seq.check()?;
    let len = seq.received_len();
    let mut variants = Vec::with_capacity(factor);
    variants.push(seq.clone());
    if factor == 1 {
        return Ok(variants);
    }
    let features = encode(seq);
    let times = seq.received_indices();
    for i in 1..factor {
        let stretch = 1.0 + 0.25 * i as f64;
        let target = ((len as f64 * stretch).round() as usize).max(len + 1);
        let stretched = restore(&features, &times, target)?;
        let start = (target - len) / 2;
        let frames: Vec<Rdi> = (0..len)
            .map(|k| Rdi {
                values: stretched.vectors[start + k].clone(),
                rows: seq.frames[k].rows,
                cols: seq.frames[k].cols,
                // Variants live on the source's nominal grid.
                frame_index: seq.frames[k].frame_index,
                timestamp_s: seq.frames[k].timestamp_s,
                label: seq.frames[k].label,
            })
            .collect();
        let variant = RdiSequence {
            frames,
            nominal_indices: seq.nominal_indices.clone(),
            drop_mask: seq.drop_mask.clone(),
            label: seq.label,
        };
        variant.check()?;
        variants.push(variant);
    }
    Ok(variants)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use num_traits::Float;

    fn test_rdi(k: usize, fill: f64) -> Rdi {
        Rdi {
            values: vec![fill; 9 * 49],
            rows: 9,
            cols: 49,
            frame_index: k as u64,
            timestamp_s: k as f64 / 8.0,
            label: None,
        }
    }

    fn test_sequence(n: usize) -> RdiSequence {
        RdiSequence::from_frames(
            (0..n).map(|k| test_rdi(k, k as f64)).collect(),
            Some(GestureLabel::Swipe),
        )
    }

    #[test]
    fn zero_drop_probability_is_identity() {
        let seq = test_sequence(20);
        let out = inject_drops(&seq, 0.0, 7).unwrap();
        assert_eq!(seq, out);
    }

    #[test]
    fn drops_are_reproducible_per_seed() {
        let seq = test_sequence(50);
        let a = inject_drops(&seq, 0.5, 123).unwrap();
        let b = inject_drops(&seq, 0.5, 123).unwrap();
        assert_eq!(a, b);
        let c = inject_drops(&seq, 0.5, 124).unwrap();
        assert_ne!(a.drop_mask, c.drop_mask);
        a.check().unwrap();
    }

    #[test]
    fn drop_count_matches_binomial_statistics() {
        let seq = test_sequence(1000);
        let out = inject_drops(&seq, 0.2, 99).unwrap();
        let dropped = out.drop_mask.iter().filter(|&&d| d).count() as f64;
        let sigma = (1000.0 * 0.2 * 0.8).sqrt();
        assert!(
            (dropped - 200.0).abs() <= 3.0 * sigma,
            "dropped {dropped} outside 3 sigma of Binomial(1000, 0.2)"
        );
    }

    #[test]
    fn double_injection_is_rejected() {
        let seq = test_sequence(10);
        let once = inject_drops(&seq, 0.5, 1).unwrap();
        if once.has_drops() {
            assert!(inject_drops(&once, 0.5, 2).is_err());
        }
    }

    #[test]
    fn burst_model_produces_runs() {
        let seq = test_sequence(2000);
        let out =
            inject_drops_with(&seq, DropModel::Burst { drop_prob: 0.05, mean_burst_len: 4.0 }, 5)
                .unwrap();
        out.check().unwrap();
        let mut runs = Vec::new();
        let mut run = 0usize;
        for &d in &out.drop_mask {
            if d {
                run += 1;
            } else if run > 0 {
                runs.push(run);
                run = 0;
            }
        }
        if run > 0 {
            runs.push(run);
        }
        let mean_run = runs.iter().sum::<usize>() as f64 / runs.len() as f64;
        assert!(mean_run > 2.0, "expected bursty runs, mean {mean_run}");
    }

    #[test]
    fn encode_decode_is_bitwise_identity() {
        let mut seq = test_sequence(8);
        seq.frames[3].values[100] = -123.456;
        let round = decode(&encode(&seq)).unwrap();
        assert_eq!(seq, round);

        let zero = RdiSequence::from_frames(vec![test_rdi(0, 0.0)], None);
        let features = encode(&zero);
        assert_eq!(features.dim, 441);
        assert!(features.vectors[0].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn decode_rejects_dimension_mismatch() {
        let mut features = encode(&test_sequence(2));
        features.vectors[1].pop();
        assert!(matches!(
            decode(&features),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    fn feature_series(values: &[Vec<f64>]) -> FeatureSequence {
        FeatureSequence {
            vectors: values.to_vec(),
            dim: values[0].len(),
            rows: 1,
            cols: values[0].len(),
            meta: None,
        }
    }

    #[test]
    fn restore_identity_when_target_equals_input() {
        let mut rng = crate::rng::SimRng::new(2);
        let series: Vec<Vec<f64>> = (0..12).map(|_| vec![rng.normal(), rng.normal()]).collect();
        let features = feature_series(&series);
        let times: Vec<u64> = (0..12).collect();
        let out = restore(&features, &times, 12).unwrap();
        for (a, b) in series.iter().zip(out.vectors.iter()) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert_relative_eq!(x, y, epsilon = 1e-9, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn restore_doubles_a_sinusoid_exactly() {
        // 8 samples per period, 16 samples; doubling must hit the analytic
        // curve at the new sample times.
        let n = 16usize;
        let m = 32usize;
        let phase = 0.3;
        let series: Vec<Vec<f64>> = (0..n)
            .map(|k| vec![(core::f64::consts::TAU * k as f64 / 8.0 + phase).sin()])
            .collect();
        let features = feature_series(&series);
        let times: Vec<u64> = (0..n as u64).collect();
        let out = restore(&features, &times, m).unwrap();
        for (j, v) in out.vectors.iter().enumerate() {
            let t = j as f64 * n as f64 / m as f64;
            let expected = (core::f64::consts::TAU * t / 8.0 + phase).sin();
            assert_relative_eq!(v[0], expected, epsilon = 1e-6, max_relative = 1e-6);
        }
    }

    #[test]
    fn restore_preserves_constants_and_means() {
        let series: Vec<Vec<f64>> = (0..10).map(|_| vec![3.25]).collect();
        let features = feature_series(&series);
        let times: Vec<u64> = (0..10).collect();
        let out = restore(&features, &times, 25).unwrap();
        for v in &out.vectors {
            assert_relative_eq!(v[0], 3.25, epsilon = 1e-12);
        }

        let mut rng = crate::rng::SimRng::new(8);
        let series: Vec<Vec<f64>> = (0..11).map(|_| vec![rng.normal()]).collect();
        let mean_in = series.iter().map(|v| v[0]).sum::<f64>() / 11.0;
        let out = restore(&feature_series(&series), &(0..11).collect::<Vec<_>>(), 33).unwrap();
        let mean_out = out.vectors.iter().map(|v| v[0]).sum::<f64>() / 33.0;
        assert_relative_eq!(mean_in, mean_out, epsilon = 1e-12, max_relative = 1e-12);
    }

    #[test]
    fn restore_is_linear() {
        let mut rng = crate::rng::SimRng::new(21);
        let times: Vec<u64> = (0..14).collect();
        for _ in 0..20 {
            let xs: Vec<Vec<f64>> = (0..14).map(|_| vec![rng.normal()]).collect();
            let ys: Vec<Vec<f64>> = (0..14).map(|_| vec![rng.normal()]).collect();
            let (a, b) = (rng.range(-2.0, 2.0), rng.range(-2.0, 2.0));
            let combo: Vec<Vec<f64>> = xs
                .iter()
                .zip(ys.iter())
                .map(|(x, y)| vec![a * x[0] + b * y[0]])
                .collect();
            let rx = restore(&feature_series(&xs), &times, 21).unwrap();
            let ry = restore(&feature_series(&ys), &times, 21).unwrap();
            let rc = restore(&feature_series(&combo), &times, 21).unwrap();
            for k in 0..21 {
                let lhs = rc.vectors[k][0];
                let rhs = a * rx.vectors[k][0] + b * ry.vectors[k][0];
                assert_relative_eq!(lhs, rhs, epsilon = 1e-9, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn restore_rejects_bad_targets_and_times() {
        let features = feature_series(&[vec![1.0], vec![2.0], vec![3.0]]);
        assert!(matches!(
            restore(&features, &[0, 1, 2], 2),
            Err(Error::TargetLenTooShort { .. })
        ));
        assert!(restore(&features, &[0, 2, 1], 5).is_err());
        assert!(restore(&features, &[0, 1], 5).is_err());
    }

    #[test]
    fn augment_preserves_labels_and_invariants() {
        let seq = test_sequence(10);
        let one = augment(&seq, 1).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0], seq);

        let three = augment(&seq, 3).unwrap();
        assert_eq!(three.len(), 3);
        for variant in &three {
            variant.check().unwrap();
            assert_eq!(variant.label, Some(GestureLabel::Swipe));
            assert_eq!(variant.received_len(), 10);
        }
        assert_ne!(three[1].frames[5].values, seq.frames[5].values);
    }
}
