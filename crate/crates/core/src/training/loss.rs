use crate::error::{mismatch, Error, Result};
use crate::field::RealField;

/// Neumaier summation. Finite-difference checks difference two nearby loss
/// values, so reduction error in the loss shows up directly in them.
fn compensated_sum(terms: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for x in terms {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Per-sample `||pred - truth|| / ||truth||`, norms over spatial and channel axes.
pub fn relative_l2_per_sample(pred: &RealField, truth: &RealField) -> Result<Vec<f64>> {
    if pred.shape() != truth.shape() {
        return Err(mismatch(format!(
            "prediction {:?} vs truth {:?}",
            pred.shape(),
            truth.shape()
        )));
    }
    (0..truth.batch())
        .map(|b| {
            let t = truth.sample(b);
            let norm_t = t.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm_t == 0.0 {
                return Err(Error::DegenerateSample { index: b });
            }
            let diff =
                compensated_sum(pred.sample(b).iter().zip(t).map(|(p, q)| (p - q) * (p - q)))
                    .sqrt();
            Ok(diff / norm_t)
        })
        .collect()
}

/// Mean over the batch of the per-sample relative L2 error.
pub fn relative_l2(pred: &RealField, truth: &RealField) -> Result<f64> {
    let per = relative_l2_per_sample(pred, truth)?;
    Ok(per.iter().sum::<f64>() / per.len() as f64)
}

/// Loss value and its gradient with respect to `pred`.
pub fn relative_l2_with_grad(pred: &RealField, truth: &RealField) -> Result<(f64, RealField)> {
    let per = relative_l2_per_sample(pred, truth)?;
    let batch = per.len() as f64;
    let mut grad = pred.clone();
    for (b, &rel) in per.iter().enumerate() {
        let t = truth.sample(b);
        let norm_t = t.iter().map(|v| v * v).sum::<f64>().sqrt();
        let norm_d = rel * norm_t;
        let g = grad.sample_mut(b);
        if norm_d == 0.0 {
            g.fill(0.0);
            continue;
        }
        let scale = 1.0 / (batch * norm_d * norm_t);
        for (gi, ti) in g.iter_mut().zip(t) {
            *gi = (*gi - ti) * scale;
        }
    }
    Ok((per.iter().sum::<f64>() / batch, grad))
}
