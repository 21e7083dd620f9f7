use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use hno::analytic::{analytic_signal, instantaneous_envelope_phase};
use hno::datagen::{
    generate_burgers, generate_darcy, generate_lorenz, read_dataset, write_dataset, BurgersGen,
    DarcyGen, DatasetPair, LorenzGen, LorenzParams, Problem,
};
use hno::operator::{checkpoint, model_forward, Activation, LayerKind, ModelConfig, ModelParams};
use hno::training::train::fmt17;
use hno::training::{
    backward, desk_config, evaluate, gradient_check_with, split_point, train as run_training,
    Batch, GradCheckOptions, TrainConfig,
};
use hno::RealField;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::Config;
use crate::{CliError, Globals, Split};

type CmdResult = Result<(), CliError>;

fn write_file(path: &Path, contents: &str) -> CmdResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::config(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, contents)
        .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::config(format!(
            "`{name}` must be positive, got {v}"
        )))
    }
}

fn at_least(name: &str, v: usize, min: usize) -> Result<usize, CliError> {
    if v >= min {
        Ok(v)
    } else {
        Err(CliError::config(format!(
            "`{name}` must be at least {min}, got {v}"
        )))
    }
}

pub fn gen_data(g: &Globals, problem: &str) -> CmdResult {
    let problem: Problem = problem.parse()?;
    let cfg = Config::load(g.config.as_deref())?;
    let seed = cfg.seed(g.seed)?;
    let start = Instant::now();
    let pair = match problem {
        Problem::Burgers1d => {
            let d = BurgersGen::default();
            let gen = BurgersGen {
                samples: at_least("samples", cfg.get_or("samples", d.samples)?, 1)?,
                n: at_least("resolution", cfg.get_or("resolution", d.n)?, 4)?,
                viscosity: positive("viscosity", cfg.get_or("viscosity", d.viscosity)?)?,
                t_final: positive("t_final", cfg.get_or("t_final", d.t_final)?)?,
                alpha: cfg.get_or("alpha", d.alpha)?,
                tau: positive("tau", cfg.get_or("tau", d.tau)?)?,
                amplitude: cfg.get_or("amplitude", d.amplitude)?,
                cfl: positive("cfl", cfg.get_or("cfl", d.cfl)?)?,
                seed,
            };
            cfg.finish()?;
            generate_burgers(&gen)?
        }
        Problem::Darcy2d => {
            let d = DarcyGen::default();
            let gen = DarcyGen {
                samples: at_least("samples", cfg.get_or("samples", d.samples)?, 1)?,
                n: at_least("resolution", cfg.get_or("resolution", d.n)?, 3)?,
                alpha: cfg.get_or("alpha", d.alpha)?,
                tau: positive("tau", cfg.get_or("tau", d.tau)?)?,
                high: positive("coef_high", cfg.get_or("coef_high", d.high)?)?,
                low: positive("coef_low", cfg.get_or("coef_low", d.low)?)?,
                threshold: cfg.get_or("threshold", d.threshold)?,
                seed,
            };
            cfg.finish()?;
            generate_darcy(&gen)?
        }
        Problem::Lorenz63 => {
            let d = LorenzGen::default();
            let gen = LorenzGen {
                samples: at_least("samples", cfg.get_or("samples", d.samples)?, 1)?,
                points: at_least("resolution", cfg.get_or("resolution", d.points)?, 2)?,
                dt: positive("dt", cfg.get_or("dt", d.dt)?)?,
                params: LorenzParams {
                    sigma: cfg.get_or("sigma", d.params.sigma)?,
                    rho: cfg.get_or("rho", d.params.rho)?,
                    beta: cfg.get_or("beta", d.params.beta)?,
                },
                alpha: cfg.get_or("alpha", d.alpha)?,
                tau: positive("tau", cfg.get_or("tau", d.tau)?)?,
                amplitude: cfg.get_or("amplitude", d.amplitude)?,
                seed,
            };
            cfg.finish()?;
            generate_lorenz(&gen)?
        }
    };
    let out = g
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("data/{problem}.nopd")));
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::config(format!("cannot create {}: {e}", dir.display())))?;
    }
    write_dataset(&pair, &out)?;
    println!(
        "{problem}: {} samples, resolution {:?}, seed {seed}, {:.2}s -> {}",
        pair.len(),
        pair.inputs.spatial(),
        start.elapsed().as_secs_f64(),
        out.display()
    );
    Ok(())
}

fn train_config(cfg: &Config, seed: u64, data: &DatasetPair) -> Result<TrainConfig, CliError> {
    let kind: LayerKind = cfg.get_or("layer_kind", LayerKind::Hno)?;
    let ndim = data.inputs.ndim();
    let base = match data.problem.parse::<Problem>() {
        Ok(p) => desk_config(p, kind, seed),
        Err(_) => {
            let mut c = desk_config(Problem::Burgers1d, kind, seed);
            c.model.modes = vec![8; ndim];
            c
        }
    };
    let m = &base.model;
    let mut out = TrainConfig {
        epochs: at_least("epochs", cfg.get_or("epochs", base.epochs)?, 1)?,
        batch_size: at_least("batch_size", cfg.get_or("batch_size", base.batch_size)?, 1)?,
        seed,
        val_fraction: cfg.get_or("val_fraction", base.val_fraction)?,
        stride: at_least("stride", cfg.get_or("stride", base.stride)?, 1)?,
        adam: base.adam,
        model: ModelConfig {
            width: at_least("width", cfg.get_or("width", m.width)?, 1)?,
            proj_width: at_least("proj_width", cfg.get_or("proj_width", m.proj_width)?, 1)?,
            layers: at_least("layers", cfg.get_or("layers", m.layers)?, 1)?,
            modes: cfg.list("modes")?.unwrap_or_else(|| m.modes.clone()),
            activation: cfg.get_or("activation", m.activation)?,
            layer_kind: kind,
            hilbert_axis: cfg.get_or("hilbert_axis", m.hilbert_axis)?,
            coord_features: cfg.get_or("coord_features", m.coord_features)?,
            ..m.clone()
        },
    };
    out.adam.lr = cfg.get_or("lr", out.adam.lr)?;
    out.adam.beta1 = cfg.get_or("beta1", out.adam.beta1)?;
    out.adam.beta2 = cfg.get_or("beta2", out.adam.beta2)?;
    out.adam.eps = cfg.get_or("eps", out.adam.eps)?;
    out.adam.weight_decay = cfg.get_or("weight_decay", out.adam.weight_decay)?;
    if !(out.adam.lr >= 0.0) {
        return Err(CliError::config(format!(
            "`lr` must be non-negative, got {}",
            out.adam.lr
        )));
    }
    if out.model.modes.len() == 1 && ndim > 1 {
        out.model.modes = vec![out.model.modes[0]; ndim];
    }
    if out.model.modes.len() != ndim {
        return Err(CliError::config(format!(
            "`modes` lists {} entries but the dataset is {ndim}-dimensional",
            out.model.modes.len()
        )));
    }
    if out.model.hilbert_axis >= ndim {
        return Err(CliError::config(format!(
            "`hilbert_axis` = {} out of range for {ndim} spatial axes",
            out.model.hilbert_axis
        )));
    }
    out.validate()?;
    Ok(out)
}

pub fn train(g: &Globals) -> CmdResult {
    let cfg = Config::load(g.config.as_deref())?;
    let dataset_path: PathBuf = cfg.require("dataset")?;
    let seed = cfg.seed(g.seed)?;
    let wall_time: bool = cfg.get_or("wall_time", false)?;
    let data = read_dataset(&dataset_path)?;
    let tc = train_config(&cfg, seed, &data)?;
    cfg.finish()?;
    let kind = tc.model.layer_kind;
    let out_dir = g
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("runs/{}-{kind}", data.problem)));
    fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::config(format!("cannot create {}: {e}", out_dir.display())))?;
    if g.verbose {
        eprintln!(
            "training {kind} on {} ({} samples), seed {seed}",
            data.problem,
            data.len()
        );
    }
    let start = Instant::now();
    let (params, report) = run_training(&data, &tc)?;
    if g.verbose {
        for r in &report.epochs {
            eprintln!(
                "epoch {:>4}  train {:.5e}  val {:.5e}  {:.2}s",
                r.epoch, r.train_loss, r.val_rel_l2, r.seconds
            );
        }
    }
    checkpoint::save(&params, &out_dir.join("model.hnom"))?;
    write_file(&out_dir.join("report.csv"), &report.to_csv(wall_time))?;
    let status = if report.diverged { "diverged" } else { "ok" };
    let mut summary = String::new();
    writeln!(summary, "status = {status}").unwrap();
    writeln!(summary, "problem = {}", data.problem).unwrap();
    writeln!(summary, "layer_kind = {kind}").unwrap();
    writeln!(summary, "seed = {seed}").unwrap();
    writeln!(summary, "epochs_completed = {}", report.epochs.len()).unwrap();
    writeln!(
        summary,
        "initial_val_rel_l2 = {}",
        fmt17(report.initial_val_rel_l2)
    )
    .unwrap();
    writeln!(
        summary,
        "final_val_rel_l2 = {}",
        fmt17(report.final_val_rel_l2)
    )
    .unwrap();
    writeln!(
        summary,
        "best_val_rel_l2 = {}",
        fmt17(report.best_val_rel_l2)
    )
    .unwrap();
    writeln!(summary, "best_epoch = {}", report.best_epoch).unwrap();
    writeln!(summary, "config = {}", report.config_echo).unwrap();
    write_file(&out_dir.join("summary.txt"), &summary)?;
    println!(
        "{kind} on {}: final val rel L2 {:.6e} (last epoch), checkpoint val rel L2 {:.6e} (epoch {}), {:.1}s -> {}",
        data.problem,
        report.final_val_rel_l2,
        report.best_val_rel_l2,
        report.best_epoch,
        start.elapsed().as_secs_f64(),
        out_dir.display()
    );
    if report.diverged {
        return Err(CliError::runtime(format!(
            "training diverged after {} epochs; partial report written to {}",
            report.epochs.len(),
            out_dir.display()
        )));
    }
    Ok(())
}

pub struct EvalArgs {
    pub checkpoint: PathBuf,
    pub dataset: PathBuf,
    pub split: Split,
    pub val_fraction: f64,
    pub dump_predictions: Option<PathBuf>,
    pub resolution_transfer: Option<usize>,
}

/// Stride that maps `fine` onto `coarse` under `RealField::subsample`.
fn find_stride(fine: &[usize], coarse: &[usize]) -> Option<usize> {
    if fine.len() != coarse.len() {
        return None;
    }
    (1..=fine[0]).find(|&s| fine.iter().zip(coarse).all(|(&f, &c)| f.div_ceil(s) == c))
}

pub fn eval(g: &Globals, a: &EvalArgs) -> CmdResult {
    let params = checkpoint::load(&a.checkpoint)?;
    let mut data = read_dataset(&a.dataset)?;
    let grid = params.config.grid.clone();
    let incompatible = |data: &DatasetPair, why: &str| {
        CliError::config(format!(
            "checkpoint (grid {:?}, {} in / {} out channels) and dataset (shape {:?} -> {:?}) are incompatible: {why}",
            grid,
            params.config.in_channels,
            params.config.out_channels,
            data.inputs.shape(),
            data.outputs.shape()
        ))
    };
    if data.inputs.ndim() != params.config.ndim()
        || data.inputs.channels() != params.config.in_channels
        || data.outputs.channels() != params.config.out_channels
    {
        return Err(incompatible(&data, "dimension or channel count differs"));
    }
    match a.resolution_transfer {
        Some(n2) => {
            let target = vec![n2; data.inputs.ndim()];
            if data.inputs.spatial() != target.as_slice() {
                let s = find_stride(data.inputs.spatial(), &target)
                    .ok_or_else(|| incompatible(&data, &format!("cannot subsample to {n2}")))?;
                data = data.subsample(s)?;
            }
        }
        None if !grid.is_empty() && data.inputs.spatial() != grid.as_slice() => {
            let s = find_stride(data.inputs.spatial(), &grid).ok_or_else(|| {
                incompatible(
                    &data,
                    "grids differ (use --resolution-transfer to evaluate off-grid)",
                )
            })?;
            data = data.subsample(s)?;
        }
        None => {}
    }
    let n = data.len();
    let idx: Vec<usize> = match a.split {
        Split::All => (0..n).collect(),
        Split::Train | Split::Val => {
            if !(a.val_fraction > 0.0 && a.val_fraction < 1.0) {
                return Err(CliError::config(
                    "--val-fraction must lie strictly between 0 and 1",
                ));
            }
            let cut = split_point(n, a.val_fraction)?;
            if matches!(a.split, Split::Train) {
                (0..cut).collect()
            } else {
                (cut..n).collect()
            }
        }
    };
    let sel = data.select(&idx)?;
    let per = evaluate(&params, &sel.inputs, &sel.outputs, 32)?;
    let mean = per.iter().sum::<f64>() / per.len() as f64;
    let mut sorted = per.clone();
    sorted.sort_by(f64::total_cmp);
    let median = if sorted.len() % 2 == 1 {
        sorted[sorted.len() / 2]
    } else {
        0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2])
    };
    let max = sorted[sorted.len() - 1];
    println!("samples {}", per.len());
    println!("mean_rel_l2 {}", fmt17(mean));
    println!("median_rel_l2 {}", fmt17(median));
    println!("max_rel_l2 {}", fmt17(max));
    if let Some(path) = &g.out {
        let mut csv = String::from("sample,rel_l2\n");
        for (i, e) in idx.iter().zip(&per) {
            writeln!(csv, "{i},{}", fmt17(*e)).unwrap();
        }
        write_file(path, &csv)?;
    }
    if let Some(path) = &a.dump_predictions {
        let pred = model_forward(&sel.inputs, &params, params.config.layer_kind)?;
        let mut meta = sel.metadata.clone();
        meta.insert("predictions_of".into(), a.checkpoint.display().to_string());
        let dump = DatasetPair::new(sel.inputs.clone(), pred, sel.problem.clone(), meta)?;
        write_dataset(&dump, path)?;
    }
    if g.verbose {
        eprintln!(
            "evaluated {} samples at grid {:?}",
            per.len(),
            sel.inputs.spatial()
        );
    }
    Ok(())
}

pub fn hilbert_demo(g: &Globals, input: &Path, axis: usize) -> CmdResult {
    if axis != 0 {
        return Err(CliError::config(format!(
            "input is one-dimensional; axis {axis} does not exist"
        )));
    }
    let text = fs::read_to_string(input)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", input.display())))?;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let v: f64 = t.parse().map_err(|_| {
            CliError::config(format!(
                "{}:{}: not a number: `{t}`",
                input.display(),
                i + 1
            ))
        })?;
        if !v.is_finite() {
            return Err(CliError::config(format!(
                "{}:{}: non-finite value",
                input.display(),
                i + 1
            )));
        }
        values.push(v);
    }
    if values.is_empty() {
        return Err(CliError::config(format!(
            "{} holds no samples",
            input.display()
        )));
    }
    let n = values.len();
    let field = RealField::new(vec![1, n, 1], values)?;
    let sig = analytic_signal(&field, 0)?;
    let (env, phase) = instantaneous_envelope_phase(&sig);
    let mut csv = String::from("t,v,hilbert_v,envelope,phase\n");
    for j in 0..n {
        writeln!(
            csv,
            "{},{},{},{},{}",
            fmt17(j as f64 / n as f64),
            fmt17(field.data()[j]),
            fmt17(sig.imag_part().data()[j]),
            fmt17(env.data()[j]),
            fmt17(phase.data()[j])
        )
        .unwrap();
    }
    match &g.out {
        Some(p) => write_file(p, &csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

pub fn gradcheck(g: &Globals) -> CmdResult {
    let cfg = Config::load(g.config.as_deref())?;
    let seed = g.seed.or(cfg.get::<u64>("seed")?).unwrap_or(0);
    let ndim: usize = cfg.get_or("ndim", 1)?;
    if !(1..=2).contains(&ndim) {
        return Err(CliError::config(format!(
            "`ndim` must be 1 or 2, got {ndim}"
        )));
    }
    let n = at_least(
        "resolution",
        cfg.get_or("resolution", if ndim == 1 { 32 } else { 16 })?,
        4,
    )?;
    let kind: LayerKind = cfg.get_or("layer_kind", LayerKind::Hno)?;
    let mut modes: Vec<usize> = cfg.list("modes")?.unwrap_or_else(|| vec![6]);
    if modes.len() == 1 {
        modes = vec![modes[0]; ndim];
    }
    let config = ModelConfig {
        in_channels: 1,
        out_channels: 1,
        width: at_least("width", cfg.get_or("width", 4)?, 1)?,
        proj_width: at_least("proj_width", cfg.get_or("proj_width", 8)?, 1)?,
        layers: at_least("layers", cfg.get_or("layers", 2)?, 1)?,
        modes,
        activation: cfg.get_or("activation", Activation::Gelu)?,
        layer_kind: kind,
        hilbert_axis: cfg.get_or("hilbert_axis", 0)?,
        coord_features: cfg.get_or("coord_features", true)?,
        grid: vec![n; ndim],
    };
    let batch_size = at_least("batch", cfg.get_or("batch", 3)?, 1)?;
    let opts = GradCheckOptions {
        tolerance: positive("tolerance", cfg.get_or("tolerance", 1e-4)?)?,
        step: positive("step", cfg.get_or("step", 1e-5)?)?,
        samples: cfg.get_or("samples", 200)?,
        seed,
        ..GradCheckOptions::default()
    };
    // Negative control: conjugating the kernel gradient breaks the VJP.
    let corrupt: bool = cfg.get_or("corrupt_vjp", false)?;
    cfg.finish()?;
    if config.modes.len() != ndim || config.hilbert_axis >= ndim {
        return Err(CliError::config(
            "`modes` or `hilbert_axis` do not match `ndim`",
        ));
    }
    let params = ModelParams::init(config, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9c);
    let mut shape = vec![batch_size];
    shape.extend(std::iter::repeat(n).take(ndim));
    shape.push(1);
    let len: usize = shape.iter().product();
    let mut draw = || {
        (0..len)
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect::<Vec<f64>>()
    };
    let batch = Batch::new(
        RealField::new(shape.clone(), draw())?,
        RealField::new(shape, draw())?,
    )?;
    let report = gradient_check_with(&params, &batch, kind, &opts, |p, b, k| {
        let mut grads = backward(p, b, k)?.1;
        if corrupt {
            for w in grads.values.layers[0].kernel.weights_mut() {
                *w = w.conj();
            }
        }
        Ok(grads)
    })?;
    let worst = report
        .worst
        .as_ref()
        .map(|(name, i)| format!(" (worst: {name}[{i}])"))
        .unwrap_or_default();
    println!(
        "checked {} coordinates: max rel {:.3e}, mean rel {:.3e}, tolerance {:.1e}{worst}",
        report.checked, report.max_rel, report.mean_rel, report.tolerance
    );
    if report.passed {
        println!("PASS");
        Ok(())
    } else {
        Err(CliError::verification(format!(
            "gradient check failed: max rel {:.3e} >= {:.1e}",
            report.max_rel, report.tolerance
        )))
    }
}
