//! Dense grid functions laid out as `(batch, spatial..., channels)`, row-major
//! with channels innermost.

use num_complex::Complex64;

use crate::error::{invalid, mismatch, Result};

/// Real-valued grid function.
#[derive(Debug, Clone, PartialEq)]
pub struct RealField {
    shape: Vec<usize>,
    data: Vec<f64>,
}

/// Complex grid function, typically the DFT image of a [`RealField`].
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrum {
    shape: Vec<usize>,
    data: Vec<Complex64>,
}

fn check_shape(shape: &[usize]) -> Result<usize> {
    if shape.len() < 3 {
        return Err(invalid(format!(
            "shape {shape:?} needs batch, at least one spatial axis and channels"
        )));
    }
    if shape.iter().any(|&d| d == 0) {
        return Err(invalid(format!("shape {shape:?} has a zero extent")));
    }
    Ok(shape.iter().product())
}

macro_rules! field_common {
    ($ty:ident, $elem:ty) => {
        impl $ty {
            pub fn new(shape: Vec<usize>, data: Vec<$elem>) -> Result<Self> {
                let len = check_shape(&shape)?;
                if data.len() != len {
                    return Err(mismatch(format!(
                        "data length {} does not match shape {:?} ({} entries)",
                        data.len(),
                        shape,
                        len
                    )));
                }
                Ok(Self { shape, data })
            }

            pub fn zeros(shape: Vec<usize>) -> Result<Self> {
                let len = check_shape(&shape)?;
                Ok(Self {
                    shape,
                    data: vec![<$elem>::default(); len],
                })
            }

            pub fn shape(&self) -> &[usize] {
                &self.shape
            }

            pub fn data(&self) -> &[$elem] {
                &self.data
            }

            pub fn data_mut(&mut self) -> &mut [$elem] {
                &mut self.data
            }

            pub fn into_data(self) -> Vec<$elem> {
                self.data
            }

            pub fn batch(&self) -> usize {
                self.shape[0]
            }

            pub fn channels(&self) -> usize {
                *self.shape.last().unwrap()
            }

            /// Number of spatial axes.
            pub fn ndim(&self) -> usize {
                self.shape.len() - 2
            }

            pub fn spatial(&self) -> &[usize] {
                &self.shape[1..self.shape.len() - 1]
            }

            /// Grid points per sample (product of spatial extents).
            pub fn points(&self) -> usize {
                self.spatial().iter().product()
            }

            /// Entries per sample (points times channels).
            pub fn sample_len(&self) -> usize {
                self.points() * self.channels()
            }

            pub fn sample(&self, b: usize) -> &[$elem] {
                let n = self.sample_len();
                &self.data[b * n..(b + 1) * n]
            }

            pub fn sample_mut(&mut self, b: usize) -> &mut [$elem] {
                let n = self.sample_len();
                &mut self.data[b * n..(b + 1) * n]
            }

            /// Copies the listed samples, in order, into a new field.
            pub fn select(&self, indices: &[usize]) -> Result<Self> {
                if indices.is_empty() {
                    return Err(invalid("empty sample selection"));
                }
                let mut data = Vec::with_capacity(indices.len() * self.sample_len());
                for &i in indices {
                    if i >= self.batch() {
                        return Err(invalid(format!(
                            "sample {i} out of range for batch {}",
                            self.batch()
                        )));
                    }
                    data.extend_from_slice(self.sample(i));
                }
                let mut shape = self.shape.clone();
                shape[0] = indices.len();
                Ok(Self { shape, data })
            }

            /// Absolute index of a spatial axis in the full shape.
            pub(crate) fn check_axis(&self, axis: usize) -> Result<usize> {
                if axis >= self.ndim() {
                    return Err(invalid(format!(
                        "spatial axis {axis} out of range for {} spatial axes",
                        self.ndim()
                    )));
                }
                Ok(axis + 1)
            }
        }
    };
}

field_common!(RealField, f64);
field_common!(ComplexSpectrum, Complex64);

impl RealField {
    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Keeps every `stride`-th grid point along each spatial axis.
    pub fn subsample(&self, stride: usize) -> Result<Self> {
        if stride == 0 {
            return Err(invalid("subsample stride must be positive"));
        }
        if stride == 1 {
            return Ok(self.clone());
        }
        let mut out = self.clone();
        for ax in 1..self.shape.len() - 1 {
            out = out.subsample_axis(ax, stride);
        }
        Ok(out)
    }

    fn subsample_axis(&self, ax: usize, stride: usize) -> Self {
        let n = self.shape[ax];
        let kept = n.div_ceil(stride);
        let inner: usize = self.shape[ax + 1..].iter().product();
        let outer: usize = self.shape[..ax].iter().product();
        let mut data = Vec::with_capacity(outer * kept * inner);
        for o in 0..outer {
            for j in (0..n).step_by(stride) {
                let start = (o * n + j) * inner;
                data.extend_from_slice(&self.data[start..start + inner]);
            }
        }
        let mut shape = self.shape.clone();
        shape[ax] = kept;
        Self { shape, data }
    }
}

impl ComplexSpectrum {
    pub fn from_real(field: &RealField) -> Self {
        Self {
            shape: field.shape.clone(),
            data: field.data.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        }
    }

    /// Drops the imaginary parts; also returns the largest discarded
    /// imaginary magnitude.
    pub fn take_real(&self) -> (RealField, f64) {
        let mut residue = 0.0f64;
        let data = self
            .data
            .iter()
            .map(|z| {
                residue = residue.max(z.im.abs());
                z.re
            })
            .collect();
        (
            RealField {
                shape: self.shape.clone(),
                data,
            },
            residue,
        )
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }
}
