//! Learnable operator stack: lift, Fourier or Hilbert layers, projection.

mod activation;
pub mod checkpoint;
pub mod spectral;

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use activation::Activation;
pub use spectral::{
    spectral_branch, spectral_branch_vjp, spectral_conv, SpectralCache, SpectralPath,
};

use crate::error::{invalid, mismatch, Error, Result};
use crate::field::RealField;
use crate::modes::SpectralKernel;

/// Same affine channel map at every grid point. `weight` is `c_out x c_in`,
/// row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    c_in: usize,
    c_out: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Affine {
    pub fn new(c_in: usize, c_out: usize, weight: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if c_in == 0 || c_out == 0 {
            return Err(invalid("affine map needs positive dimensions"));
        }
        if weight.len() != c_in * c_out || bias.len() != c_out {
            return Err(mismatch(format!(
                "affine {c_in}->{c_out} got {} weights and {} biases",
                weight.len(),
                bias.len()
            )));
        }
        Ok(Self {
            c_in,
            c_out,
            weight,
            bias,
        })
    }

    pub fn zeros(c_in: usize, c_out: usize) -> Result<Self> {
        Self::new(c_in, c_out, vec![0.0; c_in * c_out], vec![0.0; c_out])
    }

    pub fn identity(c: usize) -> Result<Self> {
        let mut a = Self::zeros(c, c)?;
        for i in 0..c {
            a.weight[i * c + i] = 1.0;
        }
        Ok(a)
    }

    pub fn c_in(&self) -> usize {
        self.c_in
    }

    pub fn c_out(&self) -> usize {
        self.c_out
    }

    fn random(rng: &mut ChaCha8Rng, c_in: usize, c_out: usize) -> Self {
        let bound = 1.0 / (c_in as f64).sqrt();
        let weight = (0..c_in * c_out)
            .map(|_| rng.gen_range(-bound..bound))
            .collect();
        let bias = (0..c_out).map(|_| rng.gen_range(-bound..bound)).collect();
        Self {
            c_in,
            c_out,
            weight,
            bias,
        }
    }
}

pub fn pointwise_affine(field: &RealField, map: &Affine) -> Result<RealField> {
    if field.channels() != map.c_in {
        return Err(mismatch(format!(
            "field has {} channels, map expects {}",
            field.channels(),
            map.c_in
        )));
    }
    let mut shape = field.shape().to_vec();
    *shape.last_mut().unwrap() = map.c_out;
    let mut out = RealField::zeros(shape)?;
    let (ci, co) = (map.c_in, map.c_out);
    for (x, y) in field
        .data()
        .chunks_exact(ci)
        .zip(out.data_mut().chunks_exact_mut(co))
    {
        for (o, yo) in y.iter_mut().enumerate() {
            let row = &map.weight[o * ci..(o + 1) * ci];
            *yo = map.bias[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
    }
    Ok(out)
}

/// Adjoint of [`pointwise_affine`]: returns the input cotangent and adds the
/// parameter cotangents into `grad`.
pub fn pointwise_affine_vjp(
    input: &RealField,
    out_grad: &RealField,
    map: &Affine,
    grad: &mut Affine,
) -> RealField {
    let (ci, co) = (map.c_in, map.c_out);
    let mut shape = input.shape().to_vec();
    *shape.last_mut().unwrap() = ci;
    let mut in_grad = RealField::zeros(shape).expect("shape of a valid field");
    for ((x, g), xb) in input
        .data()
        .chunks_exact(ci)
        .zip(out_grad.data().chunks_exact(co))
        .zip(in_grad.data_mut().chunks_exact_mut(ci))
    {
        for (o, &go) in g.iter().enumerate() {
            if go == 0.0 {
                continue;
            }
            grad.bias[o] += go;
            let row = &map.weight[o * ci..(o + 1) * ci];
            let grow = &mut grad.weight[o * ci..(o + 1) * ci];
            for i in 0..ci {
                grow[i] += go * x[i];
                xb[i] += go * row[i];
            }
        }
    }
    in_grad
}

fn activate(field: &mut RealField, act: Activation) {
    if act != Activation::Identity {
        for v in field.data_mut() {
            *v = act.apply(*v);
        }
    }
}

/// Weights of one operator layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub kernel: SpectralKernel,
    /// Local path `W v + b`.
    pub local: Affine,
}

impl LayerParams {
    pub fn new(kernel: SpectralKernel, local: Affine) -> Result<Self> {
        let c = local.c_in;
        if local.c_out != c || kernel.c_in() != c || kernel.c_out() != c {
            return Err(mismatch(format!(
                "layer width: local {}->{}, kernel {}->{}",
                local.c_in,
                local.c_out,
                kernel.c_in(),
                kernel.c_out()
            )));
        }
        Ok(Self { kernel, local })
    }

    pub fn width(&self) -> usize {
        self.local.c_in
    }
}

/// Pre-activation sum of one layer plus what its adjoint needs.
struct LayerEval {
    pre: RealField,
    cache: SpectralCache,
}

fn eval_layer(v: &RealField, params: &LayerParams, path: SpectralPath) -> Result<LayerEval> {
    let sizes = v.spatial().to_vec();
    let kernel = if params.kernel.fits(&sizes) {
        Cow::Borrowed(&params.kernel)
    } else {
        Cow::Owned(params.kernel.resample(&sizes)?)
    };
    let (spec, cache) = spectral_branch(v, &kernel, path)?;
    let mut pre = pointwise_affine(v, &params.local)?;
    for (p, s) in pre.data_mut().iter_mut().zip(spec.data()) {
        *p += s;
    }
    Ok(LayerEval { pre, cache })
}

/// `act(W v + b + K v)` with the Fourier spectral branch.
pub fn fno_layer(v: &RealField, params: &LayerParams, act: Activation) -> Result<RealField> {
    let mut out = eval_layer(v, params, SpectralPath::Fourier)?.pre;
    activate(&mut out, act);
    Ok(out)
}

/// `act(W v + b + H^{-1} K H v)`, Hilbert transforms along `hilbert_axis`.
pub fn hno_layer(
    v: &RealField,
    params: &LayerParams,
    act: Activation,
    hilbert_axis: usize,
) -> Result<RealField> {
    let mut out = eval_layer(v, params, SpectralPath::Hilbert(hilbert_axis))?.pre;
    activate(&mut out, act);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LayerKind {
    Fno,
    #[default]
    Hno,
}

impl LayerKind {
    pub fn path(self, hilbert_axis: usize) -> SpectralPath {
        match self {
            LayerKind::Fno => SpectralPath::Fourier,
            LayerKind::Hno => SpectralPath::Hilbert(hilbert_axis),
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            LayerKind::Fno => 0,
            LayerKind::Hno => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(LayerKind::Fno),
            1 => Some(LayerKind::Hno),
            _ => None,
        }
    }
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LayerKind::Fno => "fno",
            LayerKind::Hno => "hno",
        })
    }
}

impl FromStr for LayerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fno" => Ok(LayerKind::Fno),
            "hno" => Ok(LayerKind::Hno),
            other => Err(invalid(format!("unknown layer kind `{other}`"))),
        }
    }
}

/// Architecture hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Raw input channels, before coordinate features are appended.
    pub in_channels: usize,
    pub out_channels: usize,
    pub width: usize,
    pub proj_width: usize,
    pub layers: usize,
    /// Kept modes per spatial axis.
    pub modes: Vec<usize>,
    pub activation: Activation,
    pub layer_kind: LayerKind,
    pub hilbert_axis: usize,
    pub coord_features: bool,
    /// Grid the model was trained on; empty when unknown.
    pub grid: Vec<usize>,
}

impl ModelConfig {
    pub fn ndim(&self) -> usize {
        self.modes.len()
    }

    /// Channels entering the lift.
    pub fn lift_inputs(&self) -> usize {
        self.in_channels + if self.coord_features { self.ndim() } else { 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 {
            return Err(invalid("model needs at least one layer"));
        }
        if self.in_channels == 0
            || self.out_channels == 0
            || self.width == 0
            || self.proj_width == 0
        {
            return Err(invalid("model channel widths must be positive"));
        }
        if self.modes.is_empty() || self.modes.iter().any(|&m| m == 0) {
            return Err(invalid(
                "mode counts must be positive, one per spatial axis",
            ));
        }
        if self.hilbert_axis >= self.ndim() {
            return Err(invalid(format!(
                "hilbert axis {} out of range for {} spatial axes",
                self.hilbert_axis,
                self.ndim()
            )));
        }
        if !self.grid.is_empty() && self.grid.len() != self.ndim() {
            return Err(invalid(
                "training grid must list one extent per spatial axis",
            ));
        }
        Ok(())
    }
}

/// All model weights: lift `P`, layers, two-stage projection `Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub lift: Affine,
    pub layers: Vec<LayerParams>,
    pub proj_hidden: Affine,
    pub proj_out: Affine,
}

impl ModelParams {
    /// Assembles a model, checking that every dimension chains.
    pub fn from_parts(
        config: ModelConfig,
        lift: Affine,
        layers: Vec<LayerParams>,
        proj_hidden: Affine,
        proj_out: Affine,
    ) -> Result<Self> {
        config.validate()?;
        let c = config.width;
        if lift.c_in != config.lift_inputs() || lift.c_out != c {
            return Err(invalid(format!(
                "lift is {}->{}, config needs {}->{c}",
                lift.c_in,
                lift.c_out,
                config.lift_inputs()
            )));
        }
        if layers.len() != config.layers {
            return Err(invalid(format!(
                "{} layers given, config says {}",
                layers.len(),
                config.layers
            )));
        }
        for (l, layer) in layers.iter().enumerate() {
            if layer.width() != c || layer.kernel.modes() != config.modes.as_slice() {
                return Err(invalid(format!(
                    "layer {l} has width {} and modes {:?}, config needs {c} and {:?}",
                    layer.width(),
                    layer.kernel.modes(),
                    config.modes
                )));
            }
        }
        if proj_hidden.c_in != c || proj_hidden.c_out != config.proj_width {
            return Err(invalid("projection hidden stage does not chain"));
        }
        if proj_out.c_in != config.proj_width || proj_out.c_out != config.out_channels {
            return Err(invalid("projection output stage does not chain"));
        }
        Ok(Self {
            config,
            lift,
            layers,
            proj_hidden,
            proj_out,
        })
    }

    /// All-zero weights of the right shapes.
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let c = config.width;
        let layers = (0..config.layers)
            .map(|_| {
                LayerParams::new(
                    SpectralKernel::zeros(config.modes.clone(), c, c)?,
                    Affine::zeros(c, c)?,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(
            config.clone(),
            Affine::zeros(config.lift_inputs(), c)?,
            layers,
            Affine::zeros(c, config.proj_width)?,
            Affine::zeros(config.proj_width, config.out_channels)?,
        )
    }

    /// Seeded initialization: kernel entries uniform in `[-s, s]` with
    /// `s = 1 / (c_in c_out)`; affine maps uniform with bound `1/sqrt(fan_in)`.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = p.config.width;
        p.lift = Affine::random(&mut rng, p.config.lift_inputs(), c);
        let s = 1.0 / (c * c) as f64;
        for layer in &mut p.layers {
            for w in layer.kernel.weights_mut() {
                *w = Complex64::new(rng.gen_range(-s..s), rng.gen_range(-s..s));
            }
            layer.local = Affine::random(&mut rng, c, c);
        }
        p.proj_hidden = Affine::random(&mut rng, c, p.config.proj_width);
        p.proj_out = Affine::random(&mut rng, p.config.proj_width, p.config.out_channels);
        Ok(p)
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.config.clone()).expect("config already validated")
    }

    /// Parameter arrays in declaration order; complex kernels appear as
    /// interleaved real/imaginary pairs.
    pub fn arrays(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = vec![&self.lift.weight, &self.lift.bias];
        for layer in &self.layers {
            out.push(bytemuck::cast_slice(layer.kernel.weights()));
            out.push(&layer.local.weight);
            out.push(&layer.local.bias);
        }
        out.extend([
            &self.proj_hidden.weight[..],
            &self.proj_hidden.bias[..],
            &self.proj_out.weight[..],
            &self.proj_out.bias[..],
        ]);
        out
    }

    pub fn arrays_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![&mut self.lift.weight, &mut self.lift.bias];
        for layer in &mut self.layers {
            out.push(bytemuck::cast_slice_mut(layer.kernel.weights_mut()));
            out.push(&mut layer.local.weight);
            out.push(&mut layer.local.bias);
        }
        out.extend([
            &mut self.proj_hidden.weight[..],
            &mut self.proj_hidden.bias[..],
            &mut self.proj_out.weight[..],
            &mut self.proj_out.bias[..],
        ]);
        out
    }

    /// Human-readable name of each entry of [`ModelParams::arrays`].
    pub fn array_names(&self) -> Vec<String> {
        let mut out = vec!["lift.weight".to_string(), "lift.bias".to_string()];
        for l in 0..self.layers.len() {
            out.push(format!("layer{l}.kernel"));
            out.push(format!("layer{l}.local.weight"));
            out.push(format!("layer{l}.local.bias"));
        }
        out.extend(
            [
                "proj_hidden.weight",
                "proj_hidden.bias",
                "proj_out.weight",
                "proj_out.bias",
            ]
            .map(String::from),
        );
        out
    }

    pub fn num_scalars(&self) -> usize {
        self.arrays().iter().map(|a| a.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.arrays()
            .iter()
            .all(|a| a.iter().all(|v| v.is_finite()))
    }

    pub fn forward(&self, a: &RealField) -> Result<RealField> {
        model_forward(a, self, self.config.layer_kind)
    }
}

/// Appends normalized grid coordinates `j / N` per spatial axis as channels.
pub fn append_coordinates(a: &RealField) -> RealField {
    let spatial = a.spatial().to_vec();
    let d = spatial.len();
    let c = a.channels();
    let mut shape = a.shape().to_vec();
    *shape.last_mut().unwrap() = c + d;
    let mut data = Vec::with_capacity(a.batch() * a.points() * (c + d));
    let mut idx = vec![0usize; d];
    for b in 0..a.batch() {
        idx.fill(0);
        for p in 0..a.points() {
            data.extend_from_slice(&a.sample(b)[p * c..(p + 1) * c]);
            for (ax, &i) in idx.iter().enumerate() {
                data.push(i as f64 / spatial[ax] as f64);
            }
            for ax in (0..d).rev() {
                idx[ax] += 1;
                if idx[ax] < spatial[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }
    }
    RealField::new(shape, data).expect("coordinate layout")
}

/// Intermediates of one forward pass, kept for the adjoint sweep.
pub struct ForwardTrace {
    /// Lift input (raw channels plus coordinates).
    pub input: RealField,
    /// Input of each operator layer; the last entry is the projection input.
    pub layer_inputs: Vec<RealField>,
    pub layer_pre: Vec<RealField>,
    pub layer_caches: Vec<SpectralCache>,
    pub proj_pre: RealField,
    pub proj_act: RealField,
    pub output: RealField,
}

fn check_finite(field: &RealField, stage: impl FnOnce() -> String) -> Result<()> {
    if field.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { stage: stage() })
    }
}

/// Forward pass that records every intermediate; errors name the first
/// non-finite stage.
pub fn forward_trace(a: &RealField, params: &ModelParams, kind: LayerKind) -> Result<ForwardTrace> {
    let cfg = &params.config;
    if a.ndim() != cfg.ndim() {
        return Err(mismatch(format!(
            "input has {} spatial axes, model expects {}",
            a.ndim(),
            cfg.ndim()
        )));
    }
    if a.channels() != cfg.in_channels {
        return Err(mismatch(format!(
            "input has {} channels, model expects {}",
            a.channels(),
            cfg.in_channels
        )));
    }
    check_finite(a, || "model input".into())?;
    let input = if cfg.coord_features {
        append_coordinates(a)
    } else {
        a.clone()
    };
    let path = kind.path(cfg.hilbert_axis);
    let mut h = pointwise_affine(&input, &params.lift)?;
    check_finite(&h, || "lift output".into())?;
    let mut layer_inputs = Vec::with_capacity(cfg.layers + 1);
    let mut layer_pre = Vec::with_capacity(cfg.layers);
    let mut layer_caches = Vec::with_capacity(cfg.layers);
    for (l, layer) in params.layers.iter().enumerate() {
        let eval = eval_layer(&h, layer, path)?;
        check_finite(&eval.pre, || format!("layer {l} pre-activation"))?;
        let mut next = eval.pre.clone();
        activate(&mut next, cfg.activation);
        check_finite(&next, || format!("layer {l} activation"))?;
        layer_inputs.push(h);
        layer_pre.push(eval.pre);
        layer_caches.push(eval.cache);
        h = next;
    }
    let proj_pre = pointwise_affine(&h, &params.proj_hidden)?;
    let mut proj_act = proj_pre.clone();
    activate(&mut proj_act, cfg.activation);
    check_finite(&proj_act, || "projection hidden stage".into())?;
    let output = pointwise_affine(&proj_act, &params.proj_out)?;
    check_finite(&output, || "model output".into())?;
    layer_inputs.push(h);
    Ok(ForwardTrace {
        input,
        layer_inputs,
        layer_pre,
        layer_caches,
        proj_pre,
        proj_act,
        output,
    })
}

/// `Q(layer_T(... layer_1(P(a))))` with the given layer kind.
pub fn model_forward(a: &RealField, params: &ModelParams, kind: LayerKind) -> Result<RealField> {
    Ok(forward_trace(a, params, kind)?.output)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes::ModeSelection;
    use rand::Rng;

    fn random_field(rng: &mut ChaCha8Rng, shape: Vec<usize>) -> RealField {
        let len = shape.iter().product();
        RealField::new(shape, (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    fn max_diff(a: &RealField, b: &RealField) -> f64 {
        a.data()
            .iter()
            .zip(b.data())
            .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    fn config(ndim: usize, kind: LayerKind, act: Activation) -> ModelConfig {
        ModelConfig {
            in_channels: 1,
            out_channels: 1,
            width: 4,
            proj_width: 8,
            layers: 2,
            modes: vec![4; ndim],
            activation: act,
            layer_kind: kind,
            hilbert_axis: 0,
            coord_features: true,
            grid: vec![],
        }
    }

    #[test]
    fn affine_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = random_field(&mut rng, vec![2, 5, 3]);
        assert_eq!(
            pointwise_affine(&v, &Affine::identity(3).unwrap()).unwrap(),
            v
        );

        let s = random_field(&mut rng, vec![1, 6, 1]);
        let split = Affine::new(1, 2, vec![1.0, -1.0], vec![0.0, 0.0]).unwrap();
        let out = pointwise_affine(&s, &split).unwrap();
        for (j, &x) in s.data().iter().enumerate() {
            assert_eq!(out.data()[2 * j], x);
            assert_eq!(out.data()[2 * j + 1], -x);
        }

        let map = Affine::random(&mut rng, 3, 5);
        let out = pointwise_affine(&v, &map).unwrap();
        for p in 0..10 {
            for o in 0..5 {
                let mut acc = map.bias[o];
                for i in 0..3 {
                    acc += map.weight[o * 3 + i] * v.data()[p * 3 + i];
                }
                assert!((out.data()[p * 5 + o] - acc).abs() < 1e-14);
            }
        }
        assert!(pointwise_affine(&v, &Affine::identity(2).unwrap()).is_err());
    }

    fn random_layer(rng: &mut ChaCha8Rng, n: &[usize], modes: &[usize], c: usize) -> LayerParams {
        let sel = ModeSelection::new((0..n.len()).collect(), modes.to_vec(), n.to_vec()).unwrap();
        let mut k = SpectralKernel::zeros_for(&sel, c, c).unwrap();
        for w in k.weights_mut() {
            *w = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        LayerParams::new(k, Affine::random(rng, c, c)).unwrap()
    }

    #[test]
    fn fno_layer_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let v = random_field(&mut rng, vec![2, 16, 3]);
        let sel = ModeSelection::new(vec![0], vec![4], vec![16]).unwrap();
        let zero = LayerParams::new(
            SpectralKernel::zeros_for(&sel, 3, 3).unwrap(),
            Affine::zeros(3, 3).unwrap(),
        )
        .unwrap();
        assert_eq!(
            fno_layer(&v, &zero, Activation::Relu).unwrap().max_abs(),
            0.0
        );
        let ident = LayerParams::new(zero.kernel.clone(), Affine::identity(3).unwrap()).unwrap();
        assert!(max_diff(&fno_layer(&v, &ident, Activation::Identity).unwrap(), &v) < 1e-15);

        let layer = random_layer(&mut rng, &[16], &[4], 3);
        let branch = spectral_conv(&v, &layer.kernel, &[0]).unwrap();
        let local = pointwise_affine(&v, &layer.local).unwrap();
        let got = fno_layer(&v, &layer, Activation::Gelu).unwrap();
        for i in 0..got.data().len() {
            let e = Activation::Gelu.apply(local.data()[i] + branch.data()[i]);
            assert!((got.data()[i] - e).abs() < 1e-12);
        }
    }

    #[test]
    fn hno_layer_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 16;
        let v = random_field(&mut rng, vec![1, n, 2]);
        let mut layer = random_layer(&mut rng, &[n], &[5], 2);
        let kernel = layer.kernel.clone();

        layer.kernel.weights_mut().fill(Complex64::default());
        let dead = hno_layer(&v, &layer, Activation::Gelu, 0).unwrap();
        let mut local = pointwise_affine(&v, &layer.local).unwrap();
        activate(&mut local, Activation::Gelu);
        assert!(max_diff(&dead, &local) < 1e-15);

        // Identity kernel on kept modes: band-pass of v without DC and Nyquist.
        let sel = ModeSelection::new(vec![0], vec![5], vec![n]).unwrap();
        let id = LayerParams::new(
            SpectralKernel::identity_for(&sel, 2).unwrap(),
            Affine::zeros(2, 2).unwrap(),
        )
        .unwrap();
        let got = hno_layer(&v, &id, Activation::Identity, 0).unwrap();
        let spec = crate::fft::dft_forward(&v, &[0]).unwrap();
        let mut masked = spec.clone();
        for (idx, z) in masked.data_mut().iter_mut().enumerate() {
            let k = idx / 2;
            let kept = (1..5).contains(&k) || (n - 4..n).contains(&k);
            if !kept {
                *z = Complex64::default();
            }
        }
        let expect = crate::fft::dft_inverse(&masked, &[0])
            .unwrap()
            .take_real()
            .0;
        assert!(max_diff(&got, &expect) < 1e-12);

        // W = 0: HNO equals FNO with DC rows of the kernel removed.
        let mut zero_local = LayerParams::new(kernel, Affine::zeros(2, 2).unwrap()).unwrap();
        let h = hno_layer(&v, &zero_local, Activation::Identity, 0).unwrap();
        let p0 = 0; // compact index of DC
        for i in 0..2 {
            for o in 0..2 {
                *zero_local.kernel.weight_mut(p0, i, o) = Complex64::default();
            }
        }
        let f = fno_layer(&v, &zero_local, Activation::Identity).unwrap();
        assert!(max_diff(&h, &f) < 1e-10);
    }

    #[test]
    fn zero_model_outputs_projection_bias() {
        let mut cfg = config(1, LayerKind::Hno, Activation::Gelu);
        cfg.layers = 1;
        let mut p = ModelParams::zeros(cfg).unwrap();
        p.proj_out.bias[0] = 0.375;
        let a = RealField::new(vec![2, 16, 1], vec![0.5; 32]).unwrap();
        let out = p.forward(&a).unwrap();
        assert_eq!(out.shape(), &[2, 16, 1]);
        assert!(out.data().iter().all(|&v| v == 0.375));
    }

    #[test]
    fn seeded_init_is_reproducible() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_field(&mut rng, vec![2, 8, 8, 1]);
        let cfg = config(2, LayerKind::Hno, Activation::Gelu);
        let p1 = ModelParams::init(cfg.clone(), 42).unwrap();
        let p2 = ModelParams::init(cfg, 42).unwrap();
        let o1 = p1.forward(&a).unwrap();
        let o2 = p2.forward(&a).unwrap();
        assert_eq!(o1.data(), o2.data());
        assert_eq!(o1.shape(), &[2, 8, 8, 1]);
    }

    #[test]
    fn construction_rejects_bad_chains() {
        let cfg = config(1, LayerKind::Fno, Activation::Gelu);
        let p = ModelParams::zeros(cfg.clone()).unwrap();
        assert!(ModelParams::from_parts(
            cfg.clone(),
            Affine::zeros(1, 4).unwrap(),
            p.layers.clone(),
            p.proj_hidden.clone(),
            p.proj_out.clone()
        )
        .is_err());
        assert!(ModelParams::from_parts(
            cfg.clone(),
            p.lift.clone(),
            p.layers[..1].to_vec(),
            p.proj_hidden.clone(),
            p.proj_out.clone()
        )
        .is_err());
        let mut bad = cfg;
        bad.hilbert_axis = 1;
        assert!(ModelParams::zeros(bad).is_err());
    }

    #[test]
    fn coordinates_are_appended() {
        let a = RealField::new(vec![1, 2, 4, 1], vec![9.0; 8]).unwrap();
        let x = append_coordinates(&a);
        assert_eq!(x.shape(), &[1, 2, 4, 3]);
        assert_eq!(&x.data()[..6], &[9.0, 0.0, 0.0, 9.0, 0.0, 0.25]);
        assert_eq!(&x.data()[21..24], &[9.0, 0.5, 0.75]);
    }

    #[test]
    fn arrays_cover_every_scalar() {
        let p = ModelParams::init(config(2, LayerKind::Hno, Activation::Gelu), 1).unwrap();
        assert_eq!(p.arrays().len(), p.array_names().len());
        // lift 3x4+4, per layer 7*7*4*4*2 + 16 + 4, proj 4x8+8, 8x1+1
        let per_layer = 49 * 16 * 2 + 16 + 4;
        assert_eq!(p.num_scalars(), 16 + 2 * per_layer + 40 + 9);
    }

    #[test]
    fn non_finite_input_is_named() {
        let p = ModelParams::init(config(1, LayerKind::Fno, Activation::Gelu), 1).unwrap();
        let mut a = RealField::new(vec![1, 16, 1], vec![0.0; 16]).unwrap();
        a.data_mut()[3] = f64::NAN;
        match p.forward(&a) {
            Err(Error::NonFinite { stage }) => assert_eq!(stage, "model input"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
