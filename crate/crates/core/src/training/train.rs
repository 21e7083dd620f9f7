use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::datagen::DatasetPair;
use crate::error::{invalid, Error, Result};
use crate::field::RealField;
use crate::operator::{model_forward, ModelConfig, ModelParams};
use crate::training::adam::{adam_step, AdamHyper, AdamState};
use crate::training::grad::{backward, Batch};
use crate::training::loss::relative_l2_per_sample;

/// Training loss above this counts as divergence.
pub const DIVERGENCE_LOSS: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamHyper,
    pub seed: u64,
    /// Architecture; `in_channels`, `out_channels` and `grid` are taken from
    /// the dataset.
    pub model: ModelConfig,
    pub val_fraction: f64,
    /// Spatial subsampling applied to the dataset before training.
    pub stride: usize,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(invalid("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(invalid("batch_size must be at least 1"));
        }
        if self.stride == 0 {
            return Err(invalid("stride must be at least 1"));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(invalid(format!(
                "validation fraction {} must lie strictly between 0 and 1",
                self.val_fraction
            )));
        }
        Ok(())
    }
}

/// Number of training samples when `n` samples are split; the validation
/// set is the trailing `n - n_train` samples.
pub fn split_point(n: usize, val_fraction: f64) -> Result<usize> {
    if n < 2 {
        return Err(invalid(format!(
            "{n} samples cannot be split into train and validation"
        )));
    }
    let n_val = (((n as f64) * val_fraction).round() as usize).clamp(1, n - 1);
    Ok(n - n_val)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_rel_l2: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// Validation error of the untrained model.
    pub initial_val_rel_l2: f64,
    /// Validation error after the last completed epoch.
    pub final_val_rel_l2: f64,
    /// Validation error of the returned (best) parameters.
    pub best_val_rel_l2: f64,
    /// 0 when no epoch improved on the initial model.
    pub best_epoch: usize,
    pub diverged: bool,
    pub seed: u64,
    pub config_echo: String,
}

impl TrainReport {
    /// CSV with header `epoch,train_loss,val_rel_l2,seconds`. With
    /// `wall_time = false` the seconds column is written as 0 so that
    /// identical runs produce identical files.
    pub fn to_csv(&self, wall_time: bool) -> String {
        let mut out = String::from("epoch,train_loss,val_rel_l2,seconds\n");
        for r in &self.epochs {
            let secs = if wall_time { r.seconds } else { 0.0 };
            writeln!(
                out,
                "{},{},{},{}",
                r.epoch,
                fmt17(r.train_loss),
                fmt17(r.val_rel_l2),
                fmt17(secs)
            )
            .unwrap();
        }
        out
    }
}

/// 17 significant digits, enough to round-trip any f64.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Mean relative L2 error of `params` on the given samples, evaluated in
/// chunks of `chunk` samples.
pub fn evaluate(
    params: &ModelParams,
    inputs: &RealField,
    targets: &RealField,
    chunk: usize,
) -> Result<Vec<f64>> {
    let n = inputs.batch();
    let mut per = Vec::with_capacity(n);
    let chunk = chunk.max(1);
    for start in (0..n).step_by(chunk) {
        let idx: Vec<usize> = (start..(start + chunk).min(n)).collect();
        let x = inputs.select(&idx)?;
        let y = targets.select(&idx)?;
        let pred = model_forward(&x, params, params.config.layer_kind)?;
        per.extend(relative_l2_per_sample(&pred, &y)?);
    }
    Ok(per)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

const EVAL_CHUNK: usize = 32;

/// Seeded mini-batch Adam training with per-epoch validation.
///
/// Returns the parameters with the lowest validation error seen (including
/// the initial model) and the report. Divergence stops training early and is
/// flagged in the report rather than returned as an error.
pub fn train(dataset: &DatasetPair, config: &TrainConfig) -> Result<(ModelParams, TrainReport)> {
    config.validate()?;
    let strided;
    let dataset = if config.stride > 1 {
        strided = dataset.subsample(config.stride)?;
        &strided
    } else {
        dataset
    };
    let n = dataset.inputs.batch();
    let n_train = split_point(n, config.val_fraction)?;
    let train_idx: Vec<usize> = (0..n_train).collect();
    let val_idx: Vec<usize> = (n_train..n).collect();
    let val_x = dataset.inputs.select(&val_idx)?;
    let val_y = dataset.outputs.select(&val_idx)?;

    let mut model_cfg = config.model.clone();
    model_cfg.in_channels = dataset.inputs.channels();
    model_cfg.out_channels = dataset.outputs.channels();
    model_cfg.grid = dataset.inputs.spatial().to_vec();
    let mut params = ModelParams::init(model_cfg, config.seed)?;
    let kind = params.config.layer_kind;
    let mut state = AdamState::for_params(&params);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_5eed);

    let initial = mean(&evaluate(&params, &val_x, &val_y, EVAL_CHUNK)?);
    let mut best = (initial, 0usize, params.clone());
    let mut records = Vec::with_capacity(config.epochs);
    let mut diverged = false;
    let mut order = train_idx;

    'epochs: for epoch in 1..=config.epochs {
        let start = Instant::now();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch = Batch::new(
                dataset.inputs.select(chunk)?,
                dataset.outputs.select(chunk)?,
            )?;
            let (loss, grads) = match backward(&params, &batch, kind) {
                Ok(v) => v,
                Err(Error::NonFinite { .. }) => {
                    diverged = true;
                    break 'epochs;
                }
                Err(e) => return Err(e),
            };
            if !loss.is_finite() || loss > DIVERGENCE_LOSS {
                diverged = true;
                break 'epochs;
            }
            loss_sum += loss * chunk.len() as f64;
            if let Err(e) = adam_step(&mut params, &grads, &mut state, &config.adam) {
                match e {
                    Error::NonFinite { .. } => {
                        diverged = true;
                        break 'epochs;
                    }
                    e => return Err(e),
                }
            }
        }
        let val = match evaluate(&params, &val_x, &val_y, EVAL_CHUNK) {
            Ok(per) => mean(&per),
            Err(Error::NonFinite { .. }) => {
                diverged = true;
                break;
            }
            Err(e) => return Err(e),
        };
        if !val.is_finite() {
            diverged = true;
            break;
        }
        if val < best.0 {
            best = (val, epoch, params.clone());
        }
        records.push(EpochRecord {
            epoch,
            train_loss: loss_sum / n_train as f64,
            val_rel_l2: val,
            seconds: start.elapsed().as_secs_f64(),
        });
    }

    let final_val = records.last().map_or(initial, |r| r.val_rel_l2);
    let report = TrainReport {
        epochs: records,
        initial_val_rel_l2: initial,
        final_val_rel_l2: final_val,
        best_val_rel_l2: best.0,
        best_epoch: best.1,
        diverged,
        seed: config.seed,
        config_echo: format!("{config:?}"),
    };
    Ok((best.2, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_points() {
        assert_eq!(split_point(320, 0.2).unwrap(), 256);
        assert_eq!(split_point(2, 0.01).unwrap(), 1);
        assert_eq!(split_point(2, 0.99).unwrap(), 1);
        assert!(split_point(1, 0.5).is_err());
    }

    #[test]
    fn fmt17_round_trips() {
        for v in [0.1, 1.0 / 3.0, 6.02e23, -2.5e-300, 0.0] {
            assert_eq!(fmt17(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
        assert_eq!(fmt17(0.5), "5.0000000000000000e-1");
    }
}
