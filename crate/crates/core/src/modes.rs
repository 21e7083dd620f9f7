//! Low-frequency mode selection and per-mode channel mixing.
//!
//! A kept set with `m` modes on an axis of length `N` holds the bins
//! `0..m` together with their conjugate mirrors `N-m+1..N`. The compact
//! layout stores non-negative frequencies first, then the negative ones in
//! increasing order, so compact index `j` maps to signed frequency `j` for
//! `j < m` and `-(count - j)` otherwise.

use num_complex::Complex64;

use crate::error::{invalid, mismatch, Result};
use crate::field::ComplexSpectrum;

/// Number of bins kept on an axis of length `n` with `m` modes.
pub fn kept_count(n: usize, m: usize) -> usize {
    (2 * m - 1).min(n)
}

/// Largest admissible mode count for an axis of length `n`.
pub fn max_modes(n: usize) -> usize {
    n / 2 + 1
}

/// DFT bin index of compact position `j`.
pub fn compact_to_bin(j: usize, n: usize, m: usize) -> usize {
    let count = kept_count(n, m);
    if j < m {
        j
    } else {
        n - (count - j)
    }
}

/// Signed frequency of compact position `j` in a layout of `count` entries.
pub fn compact_to_freq(j: usize, count: usize, m: usize) -> i64 {
    if j < m {
        j as i64
    } else {
        -((count - j) as i64)
    }
}

/// Which bins survive truncation, and on which axes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModeSelection {
    axes: Vec<usize>,
    modes: Vec<usize>,
    sizes: Vec<usize>,
}

impl ModeSelection {
    /// `axes` are spatial axis indices; `sizes` the full extents on those axes.
    pub fn new(axes: Vec<usize>, modes: Vec<usize>, sizes: Vec<usize>) -> Result<Self> {
        if axes.len() != modes.len() || axes.len() != sizes.len() {
            return Err(invalid(format!(
                "{} axes, {} mode counts and {} sizes",
                axes.len(),
                modes.len(),
                sizes.len()
            )));
        }
        for (&m, &n) in modes.iter().zip(&sizes) {
            if m < 1 || m > max_modes(n) {
                return Err(invalid(format!(
                    "mode count {m} outside 1..={} for axis length {n}",
                    max_modes(n)
                )));
            }
        }
        Ok(Self { axes, modes, sizes })
    }

    pub fn axes(&self) -> &[usize] {
        &self.axes
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn counts(&self) -> Vec<usize> {
        self.modes
            .iter()
            .zip(&self.sizes)
            .map(|(&m, &n)| kept_count(n, m))
            .collect()
    }

    /// Kept DFT bins on the `i`-th selected axis, in compact order.
    pub fn kept_bins(&self, i: usize) -> Vec<usize> {
        let (n, m) = (self.sizes[i], self.modes[i]);
        (0..kept_count(n, m))
            .map(|j| compact_to_bin(j, n, m))
            .collect()
    }
}

/// A truncated spectrum together with the selection that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Truncated {
    pub spectrum: ComplexSpectrum,
    pub selection: ModeSelection,
}

pub fn mode_truncate(spec: &ComplexSpectrum, axes: &[usize], modes: &[usize]) -> Result<Truncated> {
    let sizes = axes
        .iter()
        .map(|&a| spec.check_axis(a).map(|ax| spec.shape()[ax]))
        .collect::<Result<Vec<_>>>()?;
    let selection = ModeSelection::new(axes.to_vec(), modes.to_vec(), sizes)?;
    let mut shape = spec.shape().to_vec();
    let mut data = spec.data().to_vec();
    for i in 0..axes.len() {
        let ax = axes[i] + 1;
        let bins = selection.kept_bins(i);
        data = gather_axis(&data, &shape, ax, &bins);
        shape[ax] = bins.len();
    }
    Ok(Truncated {
        spectrum: ComplexSpectrum::new(shape, data)?,
        selection,
    })
}

pub fn mode_pad(truncated: &Truncated) -> Result<ComplexSpectrum> {
    mode_pad_with(&truncated.spectrum, &truncated.selection)
}

/// Zero-fills the bins that `selection` discarded.
pub fn mode_pad_with(spec: &ComplexSpectrum, selection: &ModeSelection) -> Result<ComplexSpectrum> {
    let counts = selection.counts();
    for (i, &a) in selection.axes().iter().enumerate() {
        let ax = spec.check_axis(a)?;
        if spec.shape()[ax] != counts[i] {
            return Err(mismatch(format!(
                "axis {a} holds {} bins, selection keeps {}",
                spec.shape()[ax],
                counts[i]
            )));
        }
    }
    let mut shape = spec.shape().to_vec();
    let mut data = spec.data().to_vec();
    for i in (0..selection.axes().len()).rev() {
        let ax = selection.axes()[i] + 1;
        let bins = selection.kept_bins(i);
        let n = selection.sizes()[i];
        data = scatter_axis(&data, &shape, ax, &bins, n);
        shape[ax] = n;
    }
    ComplexSpectrum::new(shape, data)
}

pub(crate) fn gather_axis(
    data: &[Complex64],
    shape: &[usize],
    ax: usize,
    bins: &[usize],
) -> Vec<Complex64> {
    let n = shape[ax];
    let inner: usize = shape[ax + 1..].iter().product();
    let outer: usize = shape[..ax].iter().product();
    let mut out = Vec::with_capacity(outer * bins.len() * inner);
    for o in 0..outer {
        for &b in bins {
            let start = (o * n + b) * inner;
            out.extend_from_slice(&data[start..start + inner]);
        }
    }
    out
}

pub(crate) fn scatter_axis(
    data: &[Complex64],
    shape: &[usize],
    ax: usize,
    bins: &[usize],
    n: usize,
) -> Vec<Complex64> {
    let count = shape[ax];
    let inner: usize = shape[ax + 1..].iter().product();
    let outer: usize = shape[..ax].iter().product();
    let mut out = vec![Complex64::default(); outer * n * inner];
    for o in 0..outer {
        for (j, &b) in bins.iter().enumerate() {
            let src = (o * count + j) * inner;
            let dst = (o * n + b) * inner;
            out[dst..dst + inner].copy_from_slice(&data[src..src + inner]);
        }
    }
    out
}

/// Learnable complex channel-mixing weights, one `c_in x c_out` block per kept mode.
///
/// Weights are stored with layout `(extents..., c_in, c_out)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralKernel {
    modes: Vec<usize>,
    extents: Vec<usize>,
    c_in: usize,
    c_out: usize,
    weights: Vec<Complex64>,
}

impl SpectralKernel {
    pub fn new(
        modes: Vec<usize>,
        extents: Vec<usize>,
        c_in: usize,
        c_out: usize,
        weights: Vec<Complex64>,
    ) -> Result<Self> {
        if modes.len() != extents.len() || modes.is_empty() {
            return Err(invalid("kernel needs one mode count and extent per axis"));
        }
        for (&m, &e) in modes.iter().zip(&extents) {
            if m == 0 || e < m || e > 2 * m - 1 {
                return Err(invalid(format!("extent {e} incompatible with {m} modes")));
            }
        }
        if c_in == 0 || c_out == 0 {
            return Err(invalid("kernel channel counts must be positive"));
        }
        let len = extents.iter().product::<usize>() * c_in * c_out;
        if weights.len() != len {
            return Err(mismatch(format!(
                "kernel holds {} weights, layout needs {len}",
                weights.len()
            )));
        }
        if weights
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(invalid("kernel weights must be finite"));
        }
        Ok(Self {
            modes,
            extents,
            c_in,
            c_out,
            weights,
        })
    }

    /// Zero kernel sized for the resolution-independent layout (`2m - 1` per axis).
    pub fn zeros(modes: Vec<usize>, c_in: usize, c_out: usize) -> Result<Self> {
        let extents = modes.iter().map(|&m| 2 * m.max(1) - 1).collect();
        Self::zeros_with_extents(modes, extents, c_in, c_out)
    }

    /// Zero kernel matching the kept set of `selection`.
    pub fn zeros_for(selection: &ModeSelection, c_in: usize, c_out: usize) -> Result<Self> {
        Self::zeros_with_extents(selection.modes().to_vec(), selection.counts(), c_in, c_out)
    }

    fn zeros_with_extents(
        modes: Vec<usize>,
        extents: Vec<usize>,
        c_in: usize,
        c_out: usize,
    ) -> Result<Self> {
        let len = extents.iter().product::<usize>() * c_in * c_out;
        Self::new(modes, extents, c_in, c_out, vec![Complex64::default(); len])
    }

    /// Identity channel map on every kept mode of `selection`.
    pub fn identity_for(selection: &ModeSelection, channels: usize) -> Result<Self> {
        let mut k = Self::zeros_for(selection, channels, channels)?;
        for p in 0..k.mode_points() {
            for c in 0..channels {
                *k.weight_mut(p, c, c) = Complex64::new(1.0, 0.0);
            }
        }
        Ok(k)
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    pub fn extents(&self) -> &[usize] {
        &self.extents
    }

    pub fn c_in(&self) -> usize {
        self.c_in
    }

    pub fn c_out(&self) -> usize {
        self.c_out
    }

    pub fn weights(&self) -> &[Complex64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [Complex64] {
        &mut self.weights
    }

    pub fn mode_points(&self) -> usize {
        self.extents.iter().product()
    }

    pub fn weight(&self, point: usize, i: usize, o: usize) -> Complex64 {
        self.weights[(point * self.c_in + i) * self.c_out + o]
    }

    pub fn weight_mut(&mut self, point: usize, i: usize, o: usize) -> &mut Complex64 {
        &mut self.weights[(point * self.c_in + i) * self.c_out + o]
    }

    /// Signed frequency of every kept mode point, one entry per axis.
    pub fn point_freqs(&self, point: usize) -> Vec<i64> {
        let mut rem = point;
        let mut freqs = vec![0; self.extents.len()];
        for a in (0..self.extents.len()).rev() {
            let j = rem % self.extents[a];
            rem /= self.extents[a];
            freqs[a] = compact_to_freq(j, self.extents[a], self.modes[a]);
        }
        freqs
    }

    /// Whether the layout already matches the kept set on a grid of `sizes`.
    pub fn fits(&self, sizes: &[usize]) -> bool {
        sizes.len() == self.extents.len()
            && sizes
                .iter()
                .zip(&self.modes)
                .zip(&self.extents)
                .all(|((&n, &m), &e)| m <= max_modes(n) && kept_count(n, m) == e)
    }

    /// Re-indexes the kernel for a grid of `sizes` by signed frequency:
    /// frequencies present in both layouts keep their weights, new ones are
    /// zero, and modes the grid cannot resolve are dropped.
    pub fn resample(&self, sizes: &[usize]) -> Result<Self> {
        if sizes.len() != self.extents.len() {
            return Err(mismatch(format!(
                "kernel has {} axes, grid has {}",
                self.extents.len(),
                sizes.len()
            )));
        }
        if self.fits(sizes) {
            return Ok(self.clone());
        }
        let modes: Vec<usize> = self
            .modes
            .iter()
            .zip(sizes)
            .map(|(&m, &n)| m.min(max_modes(n)))
            .collect();
        let extents: Vec<usize> = modes
            .iter()
            .zip(sizes)
            .map(|(&m, &n)| kept_count(n, m))
            .collect();
        let mut out = Self::zeros_with_extents(modes, extents, self.c_in, self.c_out)?;
        let block = self.c_in * self.c_out;
        for p in 0..out.mode_points() {
            let freqs = out.point_freqs(p);
            if let Some(src) = self.point_of_freqs(&freqs) {
                out.weights[p * block..(p + 1) * block]
                    .copy_from_slice(&self.weights[src * block..(src + 1) * block]);
            }
        }
        Ok(out)
    }

    fn point_of_freqs(&self, freqs: &[i64]) -> Option<usize> {
        let mut point = 0;
        for (a, &f) in freqs.iter().enumerate() {
            let (e, m) = (self.extents[a] as i64, self.modes[a] as i64);
            let j = if f >= 0 && f < m {
                f
            } else if f < 0 && -f <= e - m {
                e + f
            } else {
                return None;
            };
            point = point * self.extents[a] + j as usize;
        }
        Some(point)
    }
}

/// `out[k, :] = R[k] in[k, :]` at every kept mode `k`, sample by sample.
pub fn channel_contract(
    spec: &ComplexSpectrum,
    kernel: &SpectralKernel,
) -> Result<ComplexSpectrum> {
    if spec.spatial() != kernel.extents() {
        return Err(mismatch(format!(
            "spectrum mode extents {:?} differ from kernel extents {:?}",
            spec.spatial(),
            kernel.extents()
        )));
    }
    if spec.channels() != kernel.c_in() {
        return Err(mismatch(format!(
            "spectrum has {} channels, kernel expects {}",
            spec.channels(),
            kernel.c_in()
        )));
    }
    let mut shape = spec.shape().to_vec();
    *shape.last_mut().unwrap() = kernel.c_out();
    let mut out = ComplexSpectrum::zeros(shape)?;
    contract_into(spec.data(), kernel, out.data_mut());
    Ok(out)
}

pub(crate) fn contract_into(input: &[Complex64], kernel: &SpectralKernel, out: &mut [Complex64]) {
    let (ci, co) = (kernel.c_in, kernel.c_out);
    let points = kernel.mode_points();
    let batch = input.len() / (points * ci);
    for b in 0..batch {
        for p in 0..points {
            let x = &input[(b * points + p) * ci..][..ci];
            let y = &mut out[(b * points + p) * co..][..co];
            y.fill(Complex64::default());
            let w = &kernel.weights[p * ci * co..][..ci * co];
            for (i, &xi) in x.iter().enumerate() {
                for (yo, &wio) in y.iter_mut().zip(&w[i * co..(i + 1) * co]) {
                    *yo += xi * wio;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spec(rng: &mut ChaCha8Rng, shape: Vec<usize>) -> ComplexSpectrum {
        let len = shape.iter().product();
        let data = (0..len)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        ComplexSpectrum::new(shape, data).unwrap()
    }

    fn inner(a: &ComplexSpectrum, b: &ComplexSpectrum) -> Complex64 {
        a.data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| x * y.conj())
            .sum()
    }

    #[test]
    fn kept_index_set_enumeration() {
        let sel = ModeSelection::new(vec![0], vec![2], vec![8]).unwrap();
        assert_eq!(sel.kept_bins(0), vec![0, 1, 7]);
        let full = ModeSelection::new(vec![0], vec![5], vec![8]).unwrap();
        assert_eq!(full.kept_bins(0), (0..8).collect::<Vec<_>>());
        let odd = ModeSelection::new(vec![0], vec![3], vec![5]).unwrap();
        assert_eq!(odd.kept_bins(0), vec![0, 1, 2, 3, 4]);
        assert!(ModeSelection::new(vec![0], vec![0], vec![8]).is_err());
        assert!(ModeSelection::new(vec![0], vec![6], vec![8]).is_err());
    }

    #[test]
    fn full_band_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in [1, 2, 7, 8] {
            let s = random_spec(&mut rng, vec![2, n, 3]);
            let t = mode_truncate(&s, &[0], &[max_modes(n)]).unwrap();
            assert_eq!(mode_pad(&t).unwrap(), s);
        }
    }

    #[test]
    fn out_of_band_tone_is_removed() {
        let mut data = vec![Complex64::default(); 16];
        data[5] = Complex64::new(1.0, 0.0);
        data[11] = Complex64::new(1.0, 0.0);
        let s = ComplexSpectrum::new(vec![1, 16, 1], data).unwrap();
        let t = mode_truncate(&s, &[0], &[3]).unwrap();
        assert!(t.spectrum.data().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn pad_of_zero_is_zero_and_mismatch_errors() {
        let sel = ModeSelection::new(vec![0, 1], vec![2, 3], vec![8, 9]).unwrap();
        let z = ComplexSpectrum::zeros(vec![1, 3, 5, 2]).unwrap();
        let full = mode_pad_with(&z, &sel).unwrap();
        assert_eq!(full.shape(), &[1, 8, 9, 2]);
        assert!(full.data().iter().all(|z| z.norm() == 0.0));
        let wrong = ComplexSpectrum::zeros(vec![1, 4, 5, 2]).unwrap();
        assert!(mode_pad_with(&wrong, &sel).is_err());
    }

    #[test]
    fn projection_is_idempotent_and_self_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let (n0, n1) = (rng.gen_range(2..12), rng.gen_range(2..12));
            let m0 = rng.gen_range(1..=max_modes(n0));
            let m1 = rng.gen_range(1..=max_modes(n1));
            let x = random_spec(&mut rng, vec![2, n0, n1, 2]);
            let y = random_spec(&mut rng, vec![2, n0, n1, 2]);
            let proj = |s: &ComplexSpectrum| {
                mode_pad(&mode_truncate(s, &[0, 1], &[m0, m1]).unwrap()).unwrap()
            };
            let px = proj(&x);
            let ppx = proj(&px);
            for (a, b) in px.data().iter().zip(ppx.data()) {
                assert!((a - b).norm() < 1e-12);
            }
            // <P x, y> = <x, P y>
            assert!((inner(&px, &y) - inner(&x, &proj(&y))).norm() < 1e-12);
            // <pad(t), y> = <t, trunc(y)>
            let t = mode_truncate(&x, &[0, 1], &[m0, m1]).unwrap();
            let ty = mode_truncate(&y, &[0, 1], &[m0, m1]).unwrap();
            let lhs = inner(&mode_pad(&t).unwrap(), &y);
            let rhs = inner(&t.spectrum, &ty.spectrum);
            assert!((lhs - rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn contract_identity_and_scalar() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let sel = ModeSelection::new(vec![0], vec![3], vec![10]).unwrap();
        let s = random_spec(&mut rng, vec![2, 5, 3]);
        let id = SpectralKernel::identity_for(&sel, 3).unwrap();
        assert_eq!(channel_contract(&s, &id).unwrap(), s);

        let one = random_spec(&mut rng, vec![2, 5, 1]);
        let mut two = SpectralKernel::zeros_for(&sel, 1, 1).unwrap();
        two.weights_mut().fill(Complex64::new(2.0, 0.0));
        let out = channel_contract(&one, &two).unwrap();
        for (a, b) in out.data().iter().zip(one.data()) {
            assert_eq!(*a, b * 2.0);
        }
    }

    #[test]
    fn contract_matches_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (modes, ci, co, batch) = (2usize, 2usize, 3usize, 2usize);
        let sel = ModeSelection::new(vec![0], vec![modes], vec![8]).unwrap();
        let mut k = SpectralKernel::zeros_for(&sel, ci, co).unwrap();
        for w in k.weights_mut() {
            *w = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        let points = k.mode_points();
        let s = random_spec(&mut rng, vec![batch, points, ci]);
        let out = channel_contract(&s, &k).unwrap();
        for b in 0..batch {
            for p in 0..points {
                for o in 0..co {
                    let mut acc = Complex64::default();
                    for i in 0..ci {
                        acc += k.weight(p, i, o) * s.data()[(b * points + p) * ci + i];
                    }
                    let got = out.data()[(b * points + p) * co + o];
                    assert!((got - acc).norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn contract_shape_errors() {
        let sel = ModeSelection::new(vec![0], vec![2], vec![8]).unwrap();
        let k = SpectralKernel::zeros_for(&sel, 2, 2).unwrap();
        assert!(channel_contract(&ComplexSpectrum::zeros(vec![1, 4, 2]).unwrap(), &k).is_err());
        assert!(channel_contract(&ComplexSpectrum::zeros(vec![1, 3, 1]).unwrap(), &k).is_err());
    }

    #[test]
    fn resample_keeps_shared_frequencies() {
        let mut k = SpectralKernel::zeros(vec![3], 1, 1).unwrap();
        for (j, w) in k.weights_mut().iter_mut().enumerate() {
            *w = Complex64::new(j as f64 + 1.0, 0.0);
        }
        // extents 5: freqs 0,1,2,-2,-1
        assert!(k.fits(&[16]));
        let small = k.resample(&[4]).unwrap();
        // N=4 allows m=3 with count 4: freqs 0,1,2,-1
        assert_eq!(small.extents(), &[4]);
        let got: Vec<f64> = small.weights().iter().map(|z| z.re).collect();
        assert_eq!(got, vec![1.0, 2.0, 3.0, 5.0]);
    }
}
