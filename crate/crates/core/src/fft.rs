//! Discrete Fourier transforms along spatial axes of a field.
//!
//! Convention: unnormalized forward transform
//! `X[k] = sum_n x[n] exp(-2 pi i k n / N)`, inverse scaled by `1/N`.
//! Batch and channel axes are never transformed.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::Result;
use crate::field::{ComplexSpectrum, RealField};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft(len, direction))
}

/// Anything that can be fed to the forward transform.
pub trait SpectralInput {
    fn to_spectrum(&self) -> ComplexSpectrum;
}

impl SpectralInput for RealField {
    fn to_spectrum(&self) -> ComplexSpectrum {
        ComplexSpectrum::from_real(self)
    }
}

impl SpectralInput for ComplexSpectrum {
    fn to_spectrum(&self) -> ComplexSpectrum {
        self.clone()
    }
}

pub fn dft_forward<F: SpectralInput>(field: &F, axes: &[usize]) -> Result<ComplexSpectrum> {
    let mut spec = field.to_spectrum();
    transform_in_place(&mut spec, axes, FftDirection::Forward)?;
    Ok(spec)
}

pub fn dft_inverse(spec: &ComplexSpectrum, axes: &[usize]) -> Result<ComplexSpectrum> {
    let mut out = spec.clone();
    transform_in_place(&mut out, axes, FftDirection::Inverse)?;
    let scale: f64 = axes.iter().map(|&a| out.spatial()[a] as f64).product();
    let inv = 1.0 / scale;
    for z in out.data_mut() {
        *z *= inv;
    }
    Ok(out)
}

/// Unscaled transform in either direction, applied in place.
pub fn transform_in_place(
    spec: &mut ComplexSpectrum,
    axes: &[usize],
    direction: FftDirection,
) -> Result<()> {
    let abs_axes = axes
        .iter()
        .map(|&a| spec.check_axis(a))
        .collect::<Result<Vec<_>>>()?;
    let shape = spec.shape().to_vec();
    for ax in abs_axes {
        transform_axis(spec.data_mut(), &shape, ax, direction);
    }
    Ok(())
}

/// Transforms every line along absolute axis `ax` of a row-major buffer.
pub(crate) fn transform_axis(
    data: &mut [Complex64],
    shape: &[usize],
    ax: usize,
    direction: FftDirection,
) {
    let n = shape[ax];
    if n == 1 {
        return;
    }
    let inner: usize = shape[ax + 1..].iter().product();
    let outer: usize = shape[..ax].iter().product();
    let fft = plan(n, direction);
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    if inner == 1 {
        fft.process_with_scratch(&mut data[..outer * n], &mut scratch);
        return;
    }
    // Gather the `inner` strided lines of one outer block contiguously,
    // transform them in one call, scatter back.
    let mut buf = vec![Complex64::default(); inner * n];
    for o in 0..outer {
        let block = &mut data[o * n * inner..(o + 1) * n * inner];
        for j in 0..n {
            for i in 0..inner {
                buf[i * n + j] = block[j * inner + i];
            }
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for j in 0..n {
            for i in 0..inner {
                block[j * inner + i] = buf[i * n + j];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    /// O(N^2) reference along one axis of a 1-D, single-channel signal.
    fn naive_dft(x: &[Complex64], sign: f64) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(j, &v)| {
                        let ang = sign * 2.0 * PI * ((k * j) % n) as f64 / n as f64;
                        v * Complex64::new(ang.cos(), ang.sin())
                    })
                    .sum()
            })
            .collect()
    }

    fn line(values: &[f64]) -> RealField {
        RealField::new(vec![1, values.len(), 1], values.to_vec()).unwrap()
    }

    #[test]
    fn constant_signal_is_dc_only() {
        let s = dft_forward(&line(&[1.0; 4]), &[0]).unwrap();
        let expect = [4.0, 0.0, 0.0, 0.0];
        for (z, e) in s.data().iter().zip(expect) {
            assert!((z - Complex64::new(e, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn pure_tone() {
        let x: Vec<f64> = (0..8).map(|n| (2.0 * PI * n as f64 / 8.0).cos()).collect();
        let s = dft_forward(&line(&x), &[0]).unwrap();
        for (k, z) in s.data().iter().enumerate() {
            let e = if k == 1 || k == 7 { 4.0 } else { 0.0 };
            assert!((z - Complex64::new(e, 0.0)).norm() < 1e-12, "bin {k}: {z}");
        }
    }

    #[test]
    fn inverse_of_dc_spike() {
        let spike = ComplexSpectrum::new(
            vec![1, 4, 1],
            vec![
                Complex64::new(4.0, 0.0),
                Complex64::default(),
                Complex64::default(),
                Complex64::default(),
            ],
        )
        .unwrap();
        let x = dft_inverse(&spike, &[0]).unwrap();
        for z in x.data() {
            assert!((z - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn matches_naive_oracle_up_to_64() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=64 {
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let fast = dft_forward(&line(&x), &[0]).unwrap();
            let cx: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            let slow = naive_dft(&cx, -1.0);
            let scale = slow.iter().map(|z| z.norm()).fold(1e-300, f64::max);
            for (a, b) in fast.data().iter().zip(&slow) {
                assert!((a - b).norm() / scale < 1e-9, "n={n}");
            }
        }
    }

    #[test]
    fn odd_round_trip_and_parseval() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..257).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = line(&x);
        let s = dft_forward(&f, &[0]).unwrap();
        let back = dft_inverse(&s, &[0]).unwrap();
        for (a, b) in back.data().iter().zip(&x) {
            assert!((a.re - b).abs() < 1e-12 && a.im.abs() < 1e-12);
        }
        let e_time: f64 = x.iter().map(|v| v * v).sum();
        let e_freq: f64 = s.data().iter().map(|z| z.norm_sqr()).sum::<f64>() / 257.0;
        assert!((e_time - e_freq).abs() / e_time < 1e-12);
    }

    #[test]
    fn two_axis_transform_with_channels_matches_separable_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (b, n0, n1, c) = (2, 5, 6, 3);
        let data: Vec<f64> = (0..b * n0 * n1 * c)
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let f = RealField::new(vec![b, n0, n1, c], data.clone()).unwrap();
        let s = dft_forward(&f, &[0, 1]).unwrap();
        // Direct 2-D sum.
        for bb in 0..b {
            for k0 in 0..n0 {
                for k1 in 0..n1 {
                    for ch in 0..c {
                        let mut acc = Complex64::default();
                        for j0 in 0..n0 {
                            for j1 in 0..n1 {
                                let v = data[((bb * n0 + j0) * n1 + j1) * c + ch];
                                let ang = -2.0
                                    * PI
                                    * ((k0 * j0) as f64 / n0 as f64 + (k1 * j1) as f64 / n1 as f64);
                                acc += v * Complex64::new(ang.cos(), ang.sin());
                            }
                        }
                        let got = s.data()[((bb * n0 + k0) * n1 + k1) * c + ch];
                        assert!((got - acc).norm() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn empty_axes_is_identity_and_bad_axis_errors() {
        let f = line(&[1.0, 2.0, 3.0]);
        let s = dft_forward(&f, &[]).unwrap();
        assert_eq!(s, ComplexSpectrum::from_real(&f));
        assert!(dft_forward(&f, &[1]).is_err());
        assert!(dft_inverse(&s, &[3]).is_err());
    }

    #[test]
    fn real_input_is_conjugate_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (n0, n1) = (6, 7);
        let data: Vec<f64> = (0..n0 * n1).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = RealField::new(vec![1, n0, n1, 1], data).unwrap();
        let s = dft_forward(&f, &[0, 1]).unwrap();
        for k0 in 0..n0 {
            for k1 in 0..n1 {
                let a = s.data()[k0 * n1 + k1];
                let b = s.data()[((n0 - k0) % n0) * n1 + (n1 - k1) % n1];
                assert!((a - b.conj()).norm() < 1e-12);
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn linearity(
            seed in 0u64..1000,
            a in -2.0f64..2.0,
            b in -2.0f64..2.0,
            n in 2usize..40,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mix: Vec<f64> = x.iter().zip(&y).map(|(u, v)| a * u + b * v).collect();
            let sx = dft_forward(&line(&x), &[0]).unwrap();
            let sy = dft_forward(&line(&y), &[0]).unwrap();
            let sm = dft_forward(&line(&mix), &[0]).unwrap();
            for i in 0..n {
                let e = sx.data()[i] * a + sy.data()[i] * b;
                proptest::prop_assert!((sm.data()[i] - e).norm() < 1e-12);
            }
        }

        #[test]
        fn round_trip(seed in 0u64..1000, pick in 0usize..6) {
            let n = [4, 8, 15, 16, 64, 256][pick];
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let s = dft_forward(&line(&x), &[0]).unwrap();
            let back = dft_inverse(&s, &[0]).unwrap();
            for (a, b) in back.data().iter().zip(&x) {
                proptest::prop_assert!((a.re - b).abs() < 1e-12 && a.im.abs() < 1e-12);
            }
        }
    }
}
