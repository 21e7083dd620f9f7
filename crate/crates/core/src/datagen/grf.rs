//! Periodic Gaussian random fields with power-law spectral density.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftDirection;

use crate::error::{invalid, Result};
use crate::fft::transform_axis;
use crate::field::RealField;

/// Sampler parameters. The per-mode standard deviation on the unit periodic
/// domain is `amplitude * (4 pi^2 |k|^2 / tau^2 + 1)^(-alpha/2)`, i.e. the
/// density is proportional to `(4 pi^2 |k|^2 + tau^2)^(-alpha)` and the mean
/// mode has standard deviation `amplitude`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrfSpec {
    /// Spatial extents.
    pub shape: Vec<usize>,
    pub alpha: f64,
    pub tau: f64,
    pub amplitude: f64,
    pub seed: u64,
}

impl GrfSpec {
    pub fn validate(&self) -> Result<()> {
        let d = self.shape.len();
        if d == 0 || self.shape.iter().any(|&n| n == 0) {
            return Err(invalid(format!("bad GRF shape {:?}", self.shape)));
        }
        if !(self.alpha > d as f64 / 2.0) {
            return Err(invalid(format!(
                "smoothness alpha = {} must exceed d/2 = {}",
                self.alpha,
                d as f64 / 2.0
            )));
        }
        if !(self.tau > 0.0) {
            return Err(invalid(format!("tau = {} must be positive", self.tau)));
        }
        if !self.amplitude.is_finite() {
            return Err(invalid("amplitude must be finite"));
        }
        Ok(())
    }

    /// Standard deviation of the mode with signed frequencies `k`.
    pub fn mode_std(&self, k: &[i64]) -> f64 {
        let k2: f64 = k.iter().map(|&v| (v * v) as f64).sum();
        self.amplitude * (4.0 * PI * PI * k2 / (self.tau * self.tau) + 1.0).powf(-self.alpha / 2.0)
    }

    /// Pointwise variance of the sampled field: the sum of squared mode
    /// standard deviations over every DFT bin.
    pub fn pointwise_variance(&self) -> f64 {
        let total: usize = self.shape.iter().product();
        (0..total)
            .map(|flat| self.mode_std(&signed_freqs(flat, &self.shape)).powi(2))
            .sum()
    }
}

fn signed_freq(bin: usize, n: usize) -> i64 {
    if 2 * bin <= n {
        bin as i64
    } else {
        bin as i64 - n as i64
    }
}

fn signed_freqs(mut flat: usize, shape: &[usize]) -> Vec<i64> {
    let mut k = vec![0; shape.len()];
    for a in (0..shape.len()).rev() {
        k[a] = signed_freq(flat % shape[a], shape[a]);
        flat /= shape[a];
    }
    k
}

fn mirror(mut flat: usize, shape: &[usize]) -> usize {
    let mut idx = vec![0; shape.len()];
    for a in (0..shape.len()).rev() {
        idx[a] = flat % shape[a];
        flat /= shape[a];
    }
    idx.iter()
        .zip(shape)
        .fold(0, |acc, (&i, &n)| acc * n + (n - i) % n)
}

/// One sample, shape `(1, spatial..., 1)`. Deterministic in `spec.seed`.
pub fn grf_sample(spec: &GrfSpec) -> Result<RealField> {
    spec.validate()?;
    let shape = &spec.shape;
    let total: usize = shape.iter().product();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut coeffs = vec![Complex64::default(); total];
    for flat in 0..total {
        let twin = mirror(flat, shape);
        if twin < flat {
            continue;
        }
        let std = spec.mode_std(&signed_freqs(flat, shape));
        let a: f64 = StandardNormal.sample(&mut rng);
        if twin == flat {
            coeffs[flat] = Complex64::new(std * a, 0.0);
        } else {
            let b: f64 = StandardNormal.sample(&mut rng);
            let z = Complex64::new(a, b) * (std * FRAC_1_SQRT_2);
            coeffs[flat] = z;
            coeffs[twin] = z.conj();
        }
    }
    // u(x) = sum_k c_k exp(2 pi i k x): an unscaled inverse transform.
    let mut full = vec![1];
    full.extend_from_slice(shape);
    full.push(1);
    for ax in 1..=shape.len() {
        transform_axis(&mut coeffs, &full, ax, FftDirection::Inverse);
    }
    RealField::new(full, coeffs.into_iter().map(|z| z.re).collect())
}
