use crate::error::{mismatch, Error, Result};
use crate::operator::ModelParams;
use crate::training::grad::GradientSet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// L2 penalty folded into the gradient.
    pub weight_decay: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(num_scalars: usize) -> Self {
        Self {
            m: vec![0.0; num_scalars],
            v: vec![0.0; num_scalars],
            step: 0,
        }
    }

    pub fn for_params(params: &ModelParams) -> Self {
        Self::new(params.num_scalars())
    }
}

/// One bias-corrected Adam update of a flat parameter slice. The moment
/// slices must be aligned with `theta`; `step` is the 1-based step number.
pub fn adam_update(
    theta: &mut [f64],
    grad: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    step: u64,
    hyper: &AdamHyper,
) {
    let c1 = 1.0 - hyper.beta1.powi(step as i32);
    let c2 = 1.0 - hyper.beta2.powi(step as i32);
    for i in 0..theta.len() {
        let g = grad[i] + hyper.weight_decay * theta[i];
        m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * g;
        v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * g * g;
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        theta[i] -= hyper.lr * m_hat / (v_hat.sqrt() + hyper.eps);
    }
}

/// Applies one Adam step to every parameter; complex kernel weights are
/// treated as independent real and imaginary coordinates.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &GradientSet,
    state: &mut AdamState,
    hyper: &AdamHyper,
) -> Result<()> {
    let n = params.num_scalars();
    if state.m.len() != n || state.v.len() != n || grads.values.num_scalars() != n {
        return Err(mismatch(format!(
            "optimizer state holds {} moments, model has {n} scalars",
            state.m.len()
        )));
    }
    if !grads.is_finite() {
        return Err(Error::NonFinite {
            stage: "optimizer gradient".into(),
        });
    }
    state.step += 1;
    let mut offset = 0;
    for (theta, g) in params.arrays_mut().into_iter().zip(grads.arrays()) {
        let len = theta.len();
        adam_update(
            theta,
            g,
            &mut state.m[offset..offset + len],
            &mut state.v[offset..offset + len],
            state.step,
            hyper,
        );
        offset += len;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{Activation, LayerKind, ModelConfig};

    fn model() -> ModelParams {
        ModelParams::init(
            ModelConfig {
                in_channels: 1,
                out_channels: 1,
                width: 2,
                proj_width: 3,
                layers: 1,
                modes: vec![2],
                activation: Activation::Gelu,
                layer_kind: LayerKind::Hno,
                hilbert_axis: 0,
                coord_features: true,
                grid: vec![],
            },
            5,
        )
        .unwrap()
    }

    #[test]
    fn first_step_hand_oracle() {
        // m = 0.1, v = 0.001, m_hat = 1, v_hat = 1 -> theta = -lr / (1 + eps)
        let mut theta = [0.0];
        let (mut m, mut v) = ([0.0], [0.0]);
        adam_update(&mut theta, &[1.0], &mut m, &mut v, 1, &AdamHyper::default());
        let expect = -1e-3 * (1.0 / (1.0 + 1e-8));
        assert!((theta[0] - expect).abs() < 1e-18);
        assert!((m[0] - 0.1).abs() < 1e-16 && (v[0] - 0.001).abs() < 1e-18);
    }

    #[test]
    fn zero_gradient_keeps_params_and_decays_moments() {
        let mut p = model();
        let before = p.clone();
        let mut state = AdamState::for_params(&p);
        state.m.fill(0.5);
        state.v.fill(0.25);
        let g = GradientSet {
            values: p.zeros_like(),
        };
        let hyper = AdamHyper {
            lr: 0.0,
            ..Default::default()
        };
        adam_step(&mut p, &g, &mut state, &hyper).unwrap();
        assert_eq!(p, before);
        assert!(state.m.iter().all(|&x| (x - 0.45).abs() < 1e-15));
        assert!(state.v.iter().all(|&x| (x - 0.24975).abs() < 1e-15));
    }

    #[test]
    fn ten_steps_are_bitwise_reproducible() {
        let run = || {
            let mut p = model();
            let mut state = AdamState::for_params(&p);
            let mut g = GradientSet {
                values: p.zeros_like(),
            };
            for (k, arr) in g.arrays_mut().into_iter().enumerate() {
                for (i, x) in arr.iter_mut().enumerate() {
                    *x = ((k * 31 + i) as f64).sin();
                }
            }
            for _ in 0..10 {
                adam_step(&mut p, &g, &mut state, &AdamHyper::default()).unwrap();
            }
            p
        };
        let (a, b) = (run(), run());
        for (x, y) in a.arrays().iter().zip(b.arrays()) {
            for (u, w) in x.iter().zip(y) {
                assert_eq!(u.to_bits(), w.to_bits());
            }
        }
    }

    #[test]
    fn loss_scale_invariance_of_first_step() {
        let base: Vec<f64> = (0..50).map(|i| 0.1 + (i as f64 * 0.7).cos()).collect();
        let step = |scale: f64| {
            let mut theta = vec![0.3; 50];
            let g: Vec<f64> = base.iter().map(|x| x * scale).collect();
            let (mut m, mut v) = (vec![0.0; 50], vec![0.0; 50]);
            adam_update(&mut theta, &g, &mut m, &mut v, 1, &AdamHyper::default());
            theta.iter().map(|t| t - 0.3).collect::<Vec<_>>()
        };
        let (a, b) = (step(1.0), step(37.0));
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() / x.abs() < 1e-6);
        }
    }

    #[test]
    fn non_finite_gradient_aborts_without_update() {
        let mut p = model();
        let before = p.clone();
        let mut state = AdamState::for_params(&p);
        let mut g = GradientSet {
            values: p.zeros_like(),
        };
        g.arrays_mut()[0][0] = f64::NAN;
        assert!(adam_step(&mut p, &g, &mut state, &AdamHyper::default()).is_err());
        assert_eq!(p, before);
        assert_eq!(state.step, 0);
    }
}
