//! Complex signal-processing primitives behind the builtin kernels.
//!
//! All arithmetic is `f64`; buffers in application storage hold `f32`
//! pairs and are converted at the kernel boundary.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

/// `exp(sign * 2*pi*i * k / n)` evaluated directly, without recurrences.
fn twiddle(k: usize, n: usize, sign: f64) -> Complex64 {
    let theta = sign * 2.0 * PI * (k as f64) / (n as f64);
    Complex64::new(libm::cos(theta), libm::sin(theta))
}

fn twiddle_table(n: usize, sign: f64) -> Vec<Complex64> {
    (0..n).map(|k| twiddle(k, n, sign)).collect()
}

fn naive(input: &[Complex64], sign: f64) -> Vec<Complex64> {
    let n = input.len();
    let table = twiddle_table(n, sign);
    (0..n)
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, x) in input.iter().enumerate() {
                acc += x * table[(j * k) % n];
            }
            acc
        })
        .collect()
}

/// O(n^2) forward DFT.
pub fn dft_naive(input: &[Complex64]) -> Vec<Complex64> {
    naive(input, -1.0)
}

/// O(n^2) inverse DFT, scaled by 1/n.
pub fn idft_naive(input: &[Complex64]) -> Vec<Complex64> {
    let scale = 1.0 / input.len().max(1) as f64;
    naive(input, 1.0).into_iter().map(|x| x * scale).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("transform length {0} is not a power of two")]
pub struct NotPowerOfTwo(pub usize);

fn radix2(buf: &mut [Complex64], sign: f64) -> Result<(), NotPowerOfTwo> {
    let n = buf.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(NotPowerOfTwo(n));
    }
    let bits = n.trailing_zeros();
    if bits > 0 {
        for i in 0..n {
            let j = i.reverse_bits() >> (usize::BITS - bits);
            if i < j {
                buf.swap(i, j);
            }
        }
    }
    let table: Vec<Complex64> = (0..n / 2).map(|k| twiddle(k, n, sign)).collect();
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let stride = n / len;
        for chunk in buf.chunks_exact_mut(len) {
            let (lo, hi) = chunk.split_at_mut(half);
            for k in 0..half {
                let t = hi[k] * table[k * stride];
                hi[k] = lo[k] - t;
                lo[k] += t;
            }
        }
        len <<= 1;
    }
    Ok(())
}

/// In-place iterative radix-2 forward FFT; `buf.len()` must be a power of two.
pub fn fft_radix2(buf: &mut [Complex64]) -> Result<(), NotPowerOfTwo> {
    radix2(buf, -1.0)
}

/// In-place inverse FFT, scaled by 1/n.
pub fn ifft(buf: &mut [Complex64]) -> Result<(), NotPowerOfTwo> {
    radix2(buf, 1.0)?;
    let scale = 1.0 / buf.len() as f64;
    for x in buf.iter_mut() {
        *x *= scale;
    }
    Ok(())
}

/// Unit-amplitude linear FM chirp: the instantaneous frequency sweeps
/// linearly across the band over `n` samples.
pub fn lfm_chirp(n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|t| {
            let tf = t as f64;
            let phase = PI * tf * tf / n as f64;
            Complex64::new(libm::cos(phase), libm::sin(phase))
        })
        .collect()
}

pub fn cmul(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

/// `a * conj(b)` elementwise: frequency-domain cross-correlation.
pub fn cmul_conj(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).collect()
}

/// Index and magnitude of the largest-magnitude sample; first index wins ties.
pub fn argmax_magnitude(x: &[Complex64]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in x.iter().enumerate() {
        let m = v.norm_sqr();
        if best.is_none_or(|(_, b)| m > b) {
            best = Some((i, m));
        }
    }
    best.map(|(i, m)| (i, libm::sqrt(m)))
}

/// Delays `src` by `d` samples into a buffer of `out_len`, zero-filling.
pub fn delay(src: &[Complex64], d: usize, out_len: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); out_len];
    for (i, slot) in out.iter_mut().enumerate().skip(d) {
        if let Some(x) = src.get(i - d) {
            *slot = *x;
        }
    }
    out
}

/// 802.11-style additive scrambler, generator x^7 + x^4 + 1, applied
/// in place bit by bit (LSB first). Scrambling twice with the same seed
/// restores the input.
pub fn scramble(data: &mut [u8], seed: u8) {
    let mut state = seed & 0x7f;
    if state == 0 {
        state = 0x7f;
    }
    for byte in data.iter_mut() {
        let mut out = 0u8;
        for bit in 0..8 {
            let fb = ((state >> 6) ^ (state >> 3)) & 1;
            state = ((state << 1) | fb) & 0x7f;
            out |= (((*byte >> bit) & 1) ^ fb) << bit;
        }
        *byte = out;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn impulse_has_flat_spectrum() {
        let x = [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)];
        for v in dft_naive(&x) {
            assert!((v - c(1.0, 0.0)).norm() < 1e-15);
        }
        let mut y = x;
        fft_radix2(&mut y).unwrap();
        assert!(y.iter().all(|v| (v - c(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn rejects_non_power_of_two() {
        let mut x = vec![c(0.0, 0.0); 6];
        assert_eq!(fft_radix2(&mut x), Err(NotPowerOfTwo(6)));
        assert_eq!(ifft(&mut []), Err(NotPowerOfTwo(0)));
    }

    #[test]
    fn cmul_of_one_and_i() {
        assert_eq!(cmul(&[c(1.0, 0.0)], &[c(0.0, 1.0)]), vec![c(0.0, 1.0)]);
        assert_eq!(
            cmul_conj(&[c(1.0, 0.0)], &[c(0.0, 1.0)]),
            vec![c(0.0, -1.0)]
        );
    }

    #[test]
    fn scrambler_is_self_inverse() {
        let orig: Vec<u8> = (0..=255).collect();
        let mut data = orig.clone();
        scramble(&mut data, 0x5d);
        assert_ne!(data, orig);
        scramble(&mut data, 0x5d);
        assert_eq!(data, orig);
    }

    #[test]
    fn scrambler_all_ones_seed_sequence() {
        // x^7+x^4+1 from the all-ones state emits 0000 1110 1111 0010 ...
        let mut zeros = [0u8; 2];
        scramble(&mut zeros, 0x7f);
        let bits: Vec<u8> = (0..16).map(|i| (zeros[i / 8] >> (i % 8)) & 1).collect();
        assert_eq!(bits, vec![0, 0, 0, 0, 1, 1, 1, 0, 1, 1, 1, 1, 0, 0, 1, 0]);
    }

    #[test]
    fn delay_shifts_and_pads() {
        let x = [c(1.0, 0.0), c(2.0, 0.0)];
        assert_eq!(
            delay(&x, 1, 4),
            vec![c(0.0, 0.0), c(1.0, 0.0), c(2.0, 0.0), c(0.0, 0.0)]
        );
    }
}
