//! Central finite-difference verification of analytic gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::operator::{LayerKind, ModelParams};
use crate::training::grad::{backward, loss, Batch, GradientSet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    pub tolerance: f64,
    /// Central-difference step.
    pub step: f64,
    /// Minimum number of coordinates to probe.
    pub samples: usize,
    pub seed: u64,
    /// Relative errors are taken against `max(|analytic|, |numeric|, floor)`
    /// with `floor = floor_ratio * max |analytic gradient|`, so coordinates
    /// whose true gradient is zero are compared on the gradient's own scale.
    pub floor_ratio: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-4,
            step: 1e-5,
            samples: 200,
            seed: 0,
            floor_ratio: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel: f64,
    pub mean_rel: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// Array name and index of the worst coordinate.
    pub worst: Option<(String, usize)>,
}

pub fn gradient_check(
    params: &ModelParams,
    batch: &Batch,
    kind: LayerKind,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport> {
    gradient_check_with(params, batch, kind, opts, |p, b, k| {
        backward(p, b, k).map(|(_, g)| g)
    })
}

/// Same as [`gradient_check`] with a caller-supplied analytic gradient.
pub fn gradient_check_with<F>(
    params: &ModelParams,
    batch: &Batch,
    kind: LayerKind,
    opts: &GradCheckOptions,
    analytic: F,
) -> Result<GradCheckReport>
where
    F: Fn(&ModelParams, &Batch, LayerKind) -> Result<GradientSet>,
{
    let grads = analytic(params, batch, kind)?;
    let floor = (opts.floor_ratio * grads.max_abs()).max(f64::MIN_POSITIVE);
    let names = params.array_names();
    let sizes: Vec<usize> = params.arrays().iter().map(|a| a.len()).collect();
    // Every array gets a share; shares small arrays cannot fill go to the
    // larger ones.
    let per_array = opts.samples.div_ceil(sizes.len()).max(1);
    let mut quota: Vec<usize> = sizes.iter().map(|&l| l.min(per_array)).collect();
    let mut deficit = opts.samples.saturating_sub(quota.iter().sum());
    for (q, &len) in quota.iter_mut().zip(&sizes) {
        let extra = deficit.min(len - *q);
        *q += extra;
        deficit -= extra;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut probe = params.clone();
    let mut rels = Vec::new();
    let mut worst = None;
    let mut max_rel = 0.0f64;
    for (a, &len) in sizes.iter().enumerate() {
        let picks = sample(&mut rng, len, quota[a]).into_vec();
        for idx in picks {
            let orig = params.arrays()[a][idx];
            probe.arrays_mut()[a][idx] = orig + opts.step;
            let up = loss(&probe, batch, kind)?;
            probe.arrays_mut()[a][idx] = orig - opts.step;
            let down = loss(&probe, batch, kind)?;
            probe.arrays_mut()[a][idx] = orig;
            let numeric = (up - down) / (2.0 * opts.step);
            let exact = grads.arrays()[a][idx];
            let rel = (exact - numeric).abs() / exact.abs().max(numeric.abs()).max(floor);
            if rel > max_rel || worst.is_none() {
                max_rel = max_rel.max(rel);
                worst = Some((names[a].clone(), idx));
            }
            rels.push(rel);
        }
    }
    let mean_rel = rels.iter().sum::<f64>() / rels.len() as f64;
    Ok(GradCheckReport {
        checked: rels.len(),
        max_rel,
        mean_rel,
        tolerance: opts.tolerance,
        passed: max_rel < opts.tolerance,
        worst,
    })
}
