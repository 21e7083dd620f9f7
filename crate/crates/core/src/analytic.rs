//! Discrete Hilbert transform and analytic signals.
//!
//! The transform is the frequency multiplier `-i sgn(k)` with the DC bin and,
//! for even lengths, the Nyquist bin mapped to zero. Because of that, a
//! spectral path built on it cannot carry a field's mean; layers rely on
//! their local linear path for DC. Multi-dimensional fields are transformed
//! along a single chosen spatial axis (partial Hilbert transform).

use num_complex::Complex64;

use crate::error::{mismatch, Result};
use crate::fft::{dft_forward, dft_inverse};
use crate::field::{ComplexSpectrum, RealField};

/// Hilbert multiplier for an axis of length `n`.
pub fn hilbert_multiplier(n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|k| {
            if k == 0 || 2 * k == n {
                Complex64::default()
            } else if 2 * k < n {
                Complex64::new(0.0, -1.0)
            } else {
                Complex64::new(0.0, 1.0)
            }
        })
        .collect()
}

/// Multiplies every line along absolute axis `ax` by `mult`, bin by bin.
pub(crate) fn multiply_along(
    data: &mut [Complex64],
    shape: &[usize],
    ax: usize,
    mult: &[Complex64],
) {
    let n = shape[ax];
    let inner: usize = shape[ax + 1..].iter().product();
    for (idx, z) in data.iter_mut().enumerate() {
        *z *= mult[(idx / inner) % n];
    }
}

pub fn hilbert_transform(field: &RealField, axis: usize) -> Result<RealField> {
    let ax = field.check_axis(axis)?;
    let mut spec = dft_forward(field, &[axis])?;
    let shape = spec.shape().to_vec();
    multiply_along(spec.data_mut(), &shape, ax, &hilbert_multiplier(shape[ax]));
    let (out, residue) = dft_inverse(&spec, &[axis])?.take_real();
    debug_assert!(
        residue <= 1e-12 * field.max_abs().max(1.0),
        "imaginary residue {residue}"
    );
    Ok(out)
}

/// `H^{-1} = -H` on the band-pass subspace.
pub fn inverse_hilbert_transform(field: &RealField, axis: usize) -> Result<RealField> {
    let mut out = hilbert_transform(field, axis)?;
    for v in out.data_mut() {
        *v = -*v;
    }
    Ok(out)
}

/// `v + i H{v}` along one axis.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticSignal {
    real_part: RealField,
    imag_part: RealField,
}

impl AnalyticSignal {
    pub fn from_parts(real_part: RealField, imag_part: RealField) -> Result<Self> {
        if real_part.shape() != imag_part.shape() {
            return Err(mismatch(format!(
                "real part {:?} and imaginary part {:?}",
                real_part.shape(),
                imag_part.shape()
            )));
        }
        Ok(Self {
            real_part,
            imag_part,
        })
    }

    pub fn real_part(&self) -> &RealField {
        &self.real_part
    }

    pub fn imag_part(&self) -> &RealField {
        &self.imag_part
    }

    pub fn complex(&self) -> ComplexSpectrum {
        let data = self
            .real_part
            .data()
            .iter()
            .zip(self.imag_part.data())
            .map(|(&re, &im)| Complex64::new(re, im))
            .collect();
        ComplexSpectrum::new(self.real_part.shape().to_vec(), data)
            .expect("parts share a validated shape")
    }
}

pub fn analytic_signal(field: &RealField, axis: usize) -> Result<AnalyticSignal> {
    let imag_part = hilbert_transform(field, axis)?;
    AnalyticSignal::from_parts(field.clone(), imag_part)
}

/// Pointwise envelope `|v_A|` and phase `arg(v_A)` in `(-pi, pi]`; phase is 0
/// wherever the analytic signal vanishes.
pub fn instantaneous_envelope_phase(sig: &AnalyticSignal) -> (RealField, RealField) {
    let mut envelope = sig.real_part.clone();
    let mut phase = sig.real_part.clone();
    let pairs = sig.real_part.data().iter().zip(sig.imag_part.data());
    for ((a, p), (&re, &im)) in envelope
        .data_mut()
        .iter_mut()
        .zip(phase.data_mut())
        .zip(pairs)
    {
        *a = re.hypot(im);
        *p = if re == 0.0 && im == 0.0 {
            0.0
        } else {
            let t = im.atan2(re);
            if t == -std::f64::consts::PI {
                std::f64::consts::PI
            } else {
                t
            }
        };
    }
    (envelope, phase)
}
