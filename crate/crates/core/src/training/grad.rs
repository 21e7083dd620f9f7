//! Reverse-mode gradients of the relative L2 loss through the operator stack.
//!
//! Each primitive supplies its own vector-Jacobian product: pointwise affine
//! maps, activations, the spectral branch (transform, Hilbert multiply, mode
//! truncation and channel contraction), and the loss.

use crate::error::{mismatch, Error, Result};
use crate::field::RealField;
use crate::operator::{
    forward_trace, pointwise_affine_vjp, spectral_branch_vjp, LayerKind, ModelParams,
};
use crate::training::loss::relative_l2_with_grad;

/// Inputs and targets for one gradient evaluation.
#[derive(Debug, Clone)]
pub struct Batch {
    pub inputs: RealField,
    pub targets: RealField,
}

impl Batch {
    pub fn new(inputs: RealField, targets: RealField) -> Result<Self> {
        if inputs.batch() != targets.batch() || inputs.spatial() != targets.spatial() {
            return Err(mismatch(format!(
                "inputs {:?} and targets {:?} do not pair up",
                inputs.shape(),
                targets.shape()
            )));
        }
        Ok(Self { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.batch()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Loss gradient with one entry per model scalar. Shapes mirror
/// [`ModelParams`]; complex kernel entries carry `d/dRe + i d/dIm`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub values: ModelParams,
}

impl GradientSet {
    pub fn arrays(&self) -> Vec<&[f64]> {
        self.values.arrays()
    }

    pub fn arrays_mut(&mut self) -> Vec<&mut [f64]> {
        self.values.arrays_mut()
    }

    pub fn is_finite(&self) -> bool {
        self.values.is_finite()
    }

    pub fn max_abs(&self) -> f64 {
        self.arrays()
            .iter()
            .flat_map(|a| a.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

fn scale_by_derivative(grad: &mut RealField, pre: &RealField, params: &ModelParams) {
    let act = params.config.activation;
    for (g, &x) in grad.data_mut().iter_mut().zip(pre.data()) {
        *g *= act.derivative(x);
    }
}

/// Loss and exact gradient of the mean relative L2 error over `batch`.
pub fn backward(
    params: &ModelParams,
    batch: &Batch,
    kind: LayerKind,
) -> Result<(f64, GradientSet)> {
    let trace = forward_trace(&batch.inputs, params, kind)?;
    let (loss, out_grad) = relative_l2_with_grad(&trace.output, &batch.targets)?;
    if !loss.is_finite() {
        return Err(Error::NonFinite {
            stage: "loss".into(),
        });
    }
    let mut g = params.zeros_like();
    let path = kind.path(params.config.hilbert_axis);
    let depth = params.layers.len();

    let mut d = pointwise_affine_vjp(
        &trace.proj_act,
        &out_grad,
        &params.proj_out,
        &mut g.proj_out,
    );
    scale_by_derivative(&mut d, &trace.proj_pre, params);
    let mut dh = pointwise_affine_vjp(
        &trace.layer_inputs[depth],
        &d,
        &params.proj_hidden,
        &mut g.proj_hidden,
    );
    for l in (0..depth).rev() {
        let layer = &params.layers[l];
        if !layer.kernel.fits(trace.layer_inputs[l].spatial()) {
            return Err(mismatch(format!(
                "layer {l}: kernel modes {:?} cannot be trained on grid {:?}",
                layer.kernel.modes(),
                trace.layer_inputs[l].spatial()
            )));
        }
        scale_by_derivative(&mut dh, &trace.layer_pre[l], params);
        let glayer = &mut g.layers[l];
        let mut dv =
            pointwise_affine_vjp(&trace.layer_inputs[l], &dh, &layer.local, &mut glayer.local);
        let ds = spectral_branch_vjp(
            &dh,
            &layer.kernel,
            path,
            &trace.layer_caches[l],
            glayer.kernel.weights_mut(),
        )?;
        for (a, b) in dv.data_mut().iter_mut().zip(ds.data()) {
            *a += b;
        }
        dh = dv;
    }
    pointwise_affine_vjp(&trace.input, &dh, &params.lift, &mut g.lift);
    let grads = GradientSet { values: g };
    if !grads.is_finite() {
        return Err(Error::NonFinite {
            stage: "gradient".into(),
        });
    }
    Ok((loss, grads))
}

/// Loss only, same code path as [`backward`]'s forward sweep.
pub fn loss(params: &ModelParams, batch: &Batch, kind: LayerKind) -> Result<f64> {
    let out = forward_trace(&batch.inputs, params, kind)?.output;
    crate::training::loss::relative_l2(&out, &batch.targets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{Activation, ModelConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn field(rng: &mut ChaCha8Rng, shape: Vec<usize>) -> RealField {
        let len = shape.iter().product();
        RealField::new(shape, (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    fn cfg(act: Activation) -> ModelConfig {
        ModelConfig {
            in_channels: 1,
            out_channels: 1,
            width: 3,
            proj_width: 4,
            layers: 1,
            modes: vec![3],
            activation: act,
            layer_kind: LayerKind::Hno,
            hilbert_axis: 0,
            coord_features: false,
            grid: vec![],
        }
    }

    #[test]
    fn dead_relu_units_get_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut p = ModelParams::zeros(cfg(Activation::Relu)).unwrap();
        p.proj_out.bias[0] = 0.1;
        let batch = Batch::new(
            field(&mut rng, vec![2, 8, 1]),
            field(&mut rng, vec![2, 8, 1]),
        )
        .unwrap();
        let (_, g) = backward(&p, &batch, LayerKind::Hno).unwrap();
        // Every hidden pre-activation is 0, so ReLU' = 0 blocks everything
        // upstream of the output bias.
        let v = &g.values;
        assert!(v.lift.weight.iter().chain(&v.lift.bias).all(|&x| x == 0.0));
        assert!(v.layers[0].local.weight.iter().all(|&x| x == 0.0));
        assert!(v
            .proj_hidden
            .weight
            .iter()
            .chain(&v.proj_hidden.bias)
            .all(|&x| x == 0.0));
        assert!(v.proj_out.weight.iter().all(|&x| x == 0.0));
        assert!(v.proj_out.bias[0] != 0.0);
    }

    #[test]
    fn identity_head_matches_hand_gradient() {
        // Model reduces to out = b (proj_out bias) + proj_out.w * proj_hidden(...);
        // with every weight zero except the output bias the loss is
        // ||b - t|| / ||t|| and d/db = sum_j (b - t_j) / (||b - t|| ||t||).
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut p = ModelParams::zeros(cfg(Activation::Identity)).unwrap();
        p.proj_out.bias[0] = 0.3;
        let targets = field(&mut rng, vec![1, 8, 1]);
        let inputs = field(&mut rng, vec![1, 8, 1]);
        let batch = Batch::new(inputs, targets.clone()).unwrap();
        let (loss, g) = backward(&p, &batch, LayerKind::Fno).unwrap();
        let t = targets.data();
        let nt = t.iter().map(|v| v * v).sum::<f64>().sqrt();
        let nd = t.iter().map(|v| (0.3 - v) * (0.3 - v)).sum::<f64>().sqrt();
        assert!((loss - nd / nt).abs() < 1e-14);
        let expect: f64 = t.iter().map(|v| (0.3 - v) / (nd * nt)).sum();
        assert!((g.values.proj_out.bias[0] - expect).abs() < 1e-14);
    }

    #[test]
    fn untrainable_grid_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut c = cfg(Activation::Gelu);
        c.modes = vec![5];
        let p = ModelParams::init(c, 1).unwrap();
        let batch = Batch::new(
            field(&mut rng, vec![1, 6, 1]),
            field(&mut rng, vec![1, 6, 1]),
        )
        .unwrap();
        assert!(backward(&p, &batch, LayerKind::Fno).is_err());
    }

    #[test]
    fn mismatched_batch_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert!(Batch::new(
            field(&mut rng, vec![2, 8, 1]),
            field(&mut rng, vec![1, 8, 1])
        )
        .is_err());
    }
}
