//! Spectral convolution and its adjoint pieces.
//!
//! The model path uses fused helpers that interleave per-axis transforms with
//! truncation (truncating along one axis commutes with transforming along
//! another), so discarded modes are never transformed along later axes.

use num_complex::Complex64;
use rustfft::FftDirection;

use crate::analytic::hilbert_multiplier;
use crate::error::{mismatch, Result};
use crate::fft::{dft_forward, dft_inverse, transform_axis};
use crate::field::{ComplexSpectrum, RealField};
use crate::modes::{
    channel_contract, contract_into, gather_axis, mode_pad_with, mode_truncate, scatter_axis,
    ModeSelection, SpectralKernel,
};

/// `real(idft(pad(contract(truncate(dft(v)), kernel))))` over `axes`.
pub fn spectral_conv(v: &RealField, kernel: &SpectralKernel, axes: &[usize]) -> Result<RealField> {
    let spec = dft_forward(v, axes)?;
    let trunc = mode_truncate(&spec, axes, kernel.modes())?;
    let mixed = channel_contract(&trunc.spectrum, kernel)?;
    let full = mode_pad_with(&mixed, &trunc.selection)?;
    Ok(dft_inverse(&full, axes)?.take_real().0)
}

/// Selection over all spatial axes of `v` for a kernel.
pub(crate) fn selection_for(v_spatial: &[usize], kernel: &SpectralKernel) -> Result<ModeSelection> {
    if v_spatial.len() != kernel.modes().len() {
        return Err(mismatch(format!(
            "kernel has {} axes, field has {} spatial axes",
            kernel.modes().len(),
            v_spatial.len()
        )));
    }
    ModeSelection::new(
        (0..v_spatial.len()).collect(),
        kernel.modes().to_vec(),
        v_spatial.to_vec(),
    )
}

/// Unscaled forward transform over the selected axes keeping only the
/// selected bins: `truncate(F x)`.
pub(crate) fn forward_truncated(x: &RealField, sel: &ModeSelection) -> ComplexSpectrum {
    let mut shape = x.shape().to_vec();
    let mut data: Vec<Complex64> = x.data().iter().map(|&r| Complex64::new(r, 0.0)).collect();
    for i in (0..sel.axes().len()).rev() {
        let ax = sel.axes()[i] + 1;
        transform_axis(&mut data, &shape, ax, FftDirection::Forward);
        let bins = sel.kept_bins(i);
        data = gather_axis(&data, &shape, ax, &bins);
        shape[ax] = bins.len();
    }
    ComplexSpectrum::new(shape, data).expect("shape tracked through gathers")
}

/// Real part of the unscaled inverse transform of the zero-padded compact
/// spectrum: `Re(F^H pad(y))`.
pub(crate) fn pad_inverse_real(y: &ComplexSpectrum, sel: &ModeSelection) -> RealField {
    let mut shape = y.shape().to_vec();
    let mut data = y.data().to_vec();
    for i in 0..sel.axes().len() {
        let ax = sel.axes()[i] + 1;
        let bins = sel.kept_bins(i);
        let n = sel.sizes()[i];
        data = scatter_axis(&data, &shape, ax, &bins, n);
        shape[ax] = n;
        transform_axis(&mut data, &shape, ax, FftDirection::Inverse);
    }
    RealField::new(shape, data.into_iter().map(|z| z.re).collect())
        .expect("shape tracked through scatters")
}

/// Hilbert multiplier restricted to the kept bins of selected axis `i`.
pub(crate) fn compact_hilbert(sel: &ModeSelection, i: usize) -> Vec<Complex64> {
    let n = sel.sizes()[i];
    let h = hilbert_multiplier(n);
    sel.kept_bins(i).into_iter().map(|b| h[b]).collect()
}

pub(crate) fn multiply_axis(spec: &mut ComplexSpectrum, ax: usize, mult: &[Complex64], conj: bool) {
    let shape = spec.shape().to_vec();
    let n = shape[ax];
    let inner: usize = shape[ax + 1..].iter().product();
    for (idx, z) in spec.data_mut().iter_mut().enumerate() {
        let m = mult[(idx / inner) % n];
        *z *= if conj { m.conj() } else { m };
    }
}

/// Which flavour of spectral path a layer uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectralPath {
    Fourier,
    /// Hilbert sandwich along the given spatial axis.
    Hilbert(usize),
}

/// Everything the adjoint of one spectral branch evaluation needs.
#[derive(Debug, Clone)]
pub struct SpectralCache {
    pub(crate) selection: ModeSelection,
    /// Compact spectrum fed to the kernel (after the input multiplier).
    pub(crate) mixed_input: ComplexSpectrum,
}

/// Spectral branch of a layer.
///
/// Fourier: `Re(IDFT(pad(R trunc(DFT v))))`.
/// Hilbert: `H^{-1}` of the Fourier branch applied to `H v`, with both Hilbert
/// multiplies fused into the compact spectrum. The outer real-part step commutes
/// with the output multiplier because the multiplier is odd-imaginary, so the
/// result equals `-Re(IDFT(pad(h . R (h . trunc(DFT v)))))`.
pub fn spectral_branch(
    v: &RealField,
    kernel: &SpectralKernel,
    path: SpectralPath,
) -> Result<(RealField, SpectralCache)> {
    let sel = selection_for(v.spatial(), kernel)?;
    if kernel.extents() != sel.counts().as_slice() || kernel.c_in() != v.channels() {
        return Err(mismatch(format!(
            "kernel extents {:?} x {} channels, field needs {:?} x {}",
            kernel.extents(),
            kernel.c_in(),
            sel.counts(),
            v.channels()
        )));
    }
    let mut z = forward_truncated(v, &sel);
    let hilbert = hilbert_factor(&sel, path)?;
    if let Some((ax, h)) = &hilbert {
        multiply_axis(&mut z, *ax, h, false);
    }
    let mut shape = z.shape().to_vec();
    *shape.last_mut().unwrap() = kernel.c_out();
    let mut y = ComplexSpectrum::zeros(shape)?;
    contract_into(z.data(), kernel, y.data_mut());
    if let Some((ax, h)) = &hilbert {
        multiply_axis(&mut y, *ax, h, false);
        for w in y.data_mut() {
            *w = -*w;
        }
    }
    let mut out = pad_inverse_real(&y, &sel);
    let scale = 1.0 / sel.sizes().iter().product::<usize>() as f64;
    for x in out.data_mut() {
        *x *= scale;
    }
    Ok((
        out,
        SpectralCache {
            selection: sel,
            mixed_input: z,
        },
    ))
}

fn hilbert_factor(
    sel: &ModeSelection,
    path: SpectralPath,
) -> Result<Option<(usize, Vec<Complex64>)>> {
    match path {
        SpectralPath::Fourier => Ok(None),
        SpectralPath::Hilbert(axis) => {
            if axis >= sel.axes().len() {
                return Err(crate::error::invalid(format!(
                    "hilbert axis {axis} out of range for {} spatial axes",
                    sel.axes().len()
                )));
            }
            Ok(Some((axis + 1, compact_hilbert(sel, axis))))
        }
    }
}

/// Adjoint of [`spectral_branch`]: returns the input cotangent and
/// accumulates the kernel cotangent (`d/dRe + i d/dIm`) into `kernel_grad`.
pub fn spectral_branch_vjp(
    out_grad: &RealField,
    kernel: &SpectralKernel,
    path: SpectralPath,
    cache: &SpectralCache,
    kernel_grad: &mut [Complex64],
) -> Result<RealField> {
    let sel = &cache.selection;
    let hilbert = hilbert_factor(sel, path)?;
    let scale = 1.0 / sel.sizes().iter().product::<usize>() as f64;
    let mut y_bar = forward_truncated(out_grad, sel);
    for w in y_bar.data_mut() {
        *w *= scale;
    }
    if let Some((ax, h)) = &hilbert {
        multiply_axis(&mut y_bar, *ax, h, true);
        for w in y_bar.data_mut() {
            *w = -*w;
        }
    }
    let (ci, co) = (kernel.c_in(), kernel.c_out());
    let points = kernel.mode_points();
    let batch = out_grad.batch();
    let z = cache.mixed_input.data();
    let yb = y_bar.data();
    let w = kernel.weights();
    let mut z_bar = ComplexSpectrum::zeros(cache.mixed_input.shape().to_vec())?;
    {
        let zb = z_bar.data_mut();
        for b in 0..batch {
            for p in 0..points {
                let zi = &z[(b * points + p) * ci..][..ci];
                let yo = &yb[(b * points + p) * co..][..co];
                let zbi = &mut zb[(b * points + p) * ci..][..ci];
                for i in 0..ci {
                    let zc = zi[i].conj();
                    let g = &mut kernel_grad[(p * ci + i) * co..][..co];
                    let wr = &w[(p * ci + i) * co..][..co];
                    let mut acc = Complex64::default();
                    for o in 0..co {
                        g[o] += zc * yo[o];
                        acc += wr[o].conj() * yo[o];
                    }
                    zbi[i] = acc;
                }
            }
        }
    }
    if let Some((ax, h)) = &hilbert {
        multiply_axis(&mut z_bar, *ax, h, true);
    }
    Ok(pad_inverse_real(&z_bar, sel))
}
