//! Desk-scale training configurations for the generated benchmarks.

use crate::datagen::Problem;
use crate::operator::{Activation, LayerKind, ModelConfig};
use crate::training::adam::AdamHyper;
use crate::training::train::TrainConfig;

/// Default configuration for `problem` with layers of kind `kind`.
pub fn desk_config(problem: Problem, kind: LayerKind, seed: u64) -> TrainConfig {
    let (width, layers, modes, stride, epochs, lr) = match problem {
        Problem::Burgers1d => (32, 4, vec![16], 1, 50, 5e-4),
        Problem::Darcy2d => (24, 4, vec![8, 8], 2, 50, 1e-3),
        Problem::Lorenz63 => (32, 4, vec![24], 4, 50, 1e-3),
    };
    TrainConfig {
        epochs,
        batch_size: 16,
        adam: AdamHyper {
            lr,
            ..AdamHyper::default()
        },
        seed,
        model: ModelConfig {
            in_channels: 1,
            out_channels: 1,
            width,
            proj_width: 2 * width,
            layers,
            modes,
            activation: Activation::Gelu,
            layer_kind: kind,
            hilbert_axis: 0,
            coord_features: true,
            grid: vec![],
        },
        val_fraction: 0.2,
        stride,
    }
}
