//! Complex FFT used by the Doppler processing and sequence restoration paths.
//!
//! Radix-2 Cooley-Tukey for power-of-two lengths with a direct DFT fallback
//! for everything else. The transform sizes in this crate are tiny (64-point
//! slow-time FFTs, sequence lengths of a few dozen frames), so the O(N^2)
//! fallback is never a bottleneck and keeps the crate `no_std`-clean.
//!
//! Convention: `forward` is unnormalized, `inverse` scales by `1/N`, matching
//! `x = inverse(forward(x))`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;
// Float trait supplies the math intrinsics in no_std builds.
#[allow(unused_imports)]
use num_traits::Float;

/// Unnormalized forward DFT: `X[k] = sum_n x[n] exp(-j 2 pi k n / N)`.
pub fn forward(input: &[Complex64]) -> Vec<Complex64> {
    transform(input, -1.0)
}

/// Inverse DFT with `1/N` normalization.
pub fn inverse(input: &[Complex64]) -> Vec<Complex64> {
    let n = input.len();
    if n == 0 {
        return Vec::new();
    }
    let mut out = transform(input, 1.0);
    let scale = 1.0 / n as f64;
    for v in &mut out {
        *v *= scale;
    }
    out
}

fn transform(input: &[Complex64], sign: f64) -> Vec<Complex64> {
    let n = input.len();
    if n <= 1 {
        return input.to_vec();
    }
    if n.is_power_of_two() {
        let mut data = input.to_vec();
        radix2(&mut data, sign);
        data
    } else {
        dft(input, sign)
    }
}

fn radix2(data: &mut [Complex64], sign: f64) {
    let n = data.len();

    // Bit-reversal permutation.
    let mut j = 0usize;
    for i in 0..n {
        if i < j {
            data.swap(i, j);
        }
        let mut m = n >> 1;
        while m >= 1 && j >= m {
            j -= m;
            m >>= 1;
        }
        j += m;
    }

    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let angle = sign * 2.0 * PI / len as f64;
        let w_len = Complex64::new(angle.cos(), angle.sin());
        let mut start = 0;
        while start < n {
            let mut w = Complex64::new(1.0, 0.0);
            for k in 0..half {
                let even = data[start + k];
                let odd = data[start + k + half] * w;
                data[start + k] = even + odd;
                data[start + k + half] = even - odd;
                w *= w_len;
            }
            start += len;
        }
        len <<= 1;
    }
}

fn dft(input: &[Complex64], sign: f64) -> Vec<Complex64> {
    let n = input.len();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for (k, slot) in out.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (idx, &x) in input.iter().enumerate() {
            let angle = sign * 2.0 * PI * (k * idx) as f64 / n as f64;
            acc += x * Complex64::new(angle.cos(), angle.sin());
        }
        *slot = acc;
    }
    out
}

/// Total spectral energy `sum_k |X[k]|^2`.
pub fn spectrum_energy(spectrum: &[Complex64]) -> f64 {
    spectrum.iter().map(|c| c.norm_sqr()).sum()
}
