//! Minimal CNN with exact backpropagation and three architecture variants:
//! a strided-convolution baseline, the same network with a fixed blur before
//! pooling, and the variant whose strided convolutions are replaced by
//! 1x1-mix-then-strided-blur blocks.

pub mod layers;
mod train;

pub use train::{
    build_and_train, evaluate, train_source, EpochRecord, EvalReport, Precision, Preproc, Sample,
    TrainConfig,
};

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::filters::{strided_extent, Normalization, PaddingMode};
use crate::lfm::{self, LfmConfig};
use crate::rng::Rng;
use crate::tensor::{Scalar, Tensor};

/// Architecture family.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    Baseline,
    Ie,
    Rsl,
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Variant::Baseline),
            "ie" => Ok(Variant::Ie),
            "rsl" => Ok(Variant::Rsl),
            other => Err(Error::argument(format!(
                "unknown architecture '{other}' (expected baseline|ie|rsl)"
            ))),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Baseline => "baseline",
            Variant::Ie => "ie",
            Variant::Rsl => "rsl",
        })
    }
}

/// One layer of the network.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Stage {
    Conv3x3 { c_in: usize, c_out: usize, stride: usize },
    Relu,
    /// 1x1 convolution followed by the fixed stride-2 blur.
    RslBlock { c_in: usize, c_out: usize },
    /// Fixed stride-1 blur, no parameters.
    Lfm,
    GlobalAvgPool,
    Linear { d_in: usize, d_out: usize },
}

impl Stage {
    fn has_params(&self) -> bool {
        matches!(
            self,
            Stage::Conv3x3 { .. } | Stage::RslBlock { .. } | Stage::Linear { .. }
        )
    }

    fn to_text(&self) -> String {
        match self {
            Stage::Conv3x3 { c_in, c_out, stride } => format!("conv3x3:{c_in}:{c_out}:{stride}"),
            Stage::Relu => "relu".to_string(),
            Stage::RslBlock { c_in, c_out } => format!("rsl:{c_in}:{c_out}"),
            Stage::Lfm => "lfm".to_string(),
            Stage::GlobalAvgPool => "gap".to_string(),
            Stage::Linear { d_in, d_out } => format!("linear:{d_in}:{d_out}"),
        }
    }

    fn from_text(text: &str) -> Result<Stage> {
        let mut parts = text.split(':');
        let head = parts.next().unwrap_or("");
        let mut nums = Vec::new();
        for part in parts {
            nums.push(
                part.parse::<usize>()
                    .map_err(|_| Error::format(format!("bad stage field in '{text}'")))?,
            );
        }
        match (head, nums.as_slice()) {
            ("conv3x3", [c_in, c_out, stride]) => {
                Ok(Stage::Conv3x3 { c_in: *c_in, c_out: *c_out, stride: *stride })
            }
            ("relu", []) => Ok(Stage::Relu),
            ("rsl", [c_in, c_out]) => Ok(Stage::RslBlock { c_in: *c_in, c_out: *c_out }),
            ("lfm", []) => Ok(Stage::Lfm),
            ("gap", []) => Ok(Stage::GlobalAvgPool),
            ("linear", [d_in, d_out]) => Ok(Stage::Linear { d_in: *d_in, d_out: *d_out }),
            _ => Err(Error::format(format!("unknown stage '{text}'"))),
        }
    }
}

/// Architecture description: ordered stages plus the blur configuration
/// shared by every fixed-blur site.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub variant: Variant,
    pub stages: Vec<Stage>,
    /// (channels, height, width) of a single input.
    pub input_shape: (usize, usize, usize),
    pub n_classes: usize,
    pub lfm_config: LfmConfig,
}

impl ModelSpec {
    /// The fixed architecture used by the experiments:
    /// conv3x3(1->8) / relu / conv3x3(8->16, s2) / relu /
    /// conv3x3(16->32, s2) / relu / optional blur / pool / linear(32->K),
    /// with the strided convolutions swapped for replacement blocks in the
    /// `rsl` variant.
    pub fn toy(
        variant: Variant,
        n_classes: usize,
        input_hw: (usize, usize),
        lfm_config: LfmConfig,
    ) -> Result<ModelSpec> {
        if n_classes == 0 {
            return Err(Error::argument("need at least one class"));
        }
        let baseline = ModelSpec {
            variant: Variant::Baseline,
            stages: vec![
                Stage::Conv3x3 { c_in: 1, c_out: 8, stride: 1 },
                Stage::Relu,
                Stage::Conv3x3 { c_in: 8, c_out: 16, stride: 2 },
                Stage::Relu,
                Stage::Conv3x3 { c_in: 16, c_out: 32, stride: 2 },
                Stage::Relu,
                Stage::GlobalAvgPool,
                Stage::Linear { d_in: 32, d_out: n_classes },
            ],
            input_shape: (1, input_hw.0, input_hw.1),
            n_classes,
            lfm_config: lfm_config.with_stride(1),
        };
        let spec = match variant {
            Variant::Baseline => baseline,
            Variant::Ie => lfm::ie_attach(&baseline)?,
            Variant::Rsl => {
                let mut spec = baseline;
                spec.variant = Variant::Rsl;
                spec.lfm_config = lfm_config.with_stride(2);
                for stage in &mut spec.stages {
                    if let Stage::Conv3x3 { c_in, c_out, stride: 2 } = *stage {
                        *stage = Stage::RslBlock { c_in, c_out };
                    }
                }
                spec
            }
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Structural checks: one pooling stage directly before the final linear
    /// classifier, consistent channel chaining, and variant-specific rules
    /// (`ie` carries a blur right before pooling, `rsl` has no strided
    /// convolution left, the baseline has neither blur nor replacement
    /// blocks).
    pub fn validate(&self) -> Result<()> {
        self.lfm_config.validate()?;
        let len = self.stages.len();
        let gap_positions: Vec<usize> = self
            .stages
            .iter()
            .enumerate()
            .filter(|(_, s)| matches!(s, Stage::GlobalAvgPool))
            .map(|(i, _)| i)
            .collect();
        if gap_positions.len() != 1 {
            return Err(Error::structure("exactly one global average pooling stage required"));
        }
        if len < 2
            || gap_positions[0] != len - 2
            || !matches!(self.stages[len - 1], Stage::Linear { .. })
        {
            return Err(Error::structure(
                "pooling must be followed by exactly one linear classifier at the end",
            ));
        }
        match self.variant {
            Variant::Ie => {
                if len < 3 || !matches!(self.stages[len - 3], Stage::Lfm) {
                    return Err(Error::structure(
                        "ie variant requires the blur immediately before pooling",
                    ));
                }
            }
            Variant::Rsl => {
                if self.stages.iter().any(
                    |s| matches!(s, Stage::Conv3x3 { stride, .. } if *stride > 1),
                ) {
                    return Err(Error::structure(
                        "rsl variant must not contain strided convolutions",
                    ));
                }
            }
            Variant::Baseline => {
                if self
                    .stages
                    .iter()
                    .any(|s| matches!(s, Stage::Lfm | Stage::RslBlock { .. }))
                {
                    return Err(Error::structure(
                        "baseline variant must not contain blur or replacement stages",
                    ));
                }
            }
        }

        // Shape chaining.
        let (mut c, mut h, mut w) = self.input_shape;
        if c == 0 || h == 0 || w == 0 {
            return Err(Error::structure("input shape must be nonzero"));
        }
        for stage in &self.stages {
            match *stage {
                Stage::Conv3x3 { c_in, c_out, stride } => {
                    if c_in != c {
                        return Err(Error::structure(format!(
                            "convolution expects {c_in} channels, pipeline carries {c}"
                        )));
                    }
                    if stride == 0 {
                        return Err(Error::structure("zero stride"));
                    }
                    c = c_out;
                    h = strided_extent(h, stride);
                    w = strided_extent(w, stride);
                }
                Stage::Relu => {}
                Stage::RslBlock { c_in, c_out } => {
                    if c_in != c {
                        return Err(Error::structure(format!(
                            "replacement block expects {c_in} channels, pipeline carries {c}"
                        )));
                    }
                    c = c_out;
                    h = strided_extent(h, 2);
                    w = strided_extent(w, 2);
                }
                Stage::Lfm => {}
                Stage::GlobalAvgPool => {
                    h = 1;
                    w = 1;
                }
                Stage::Linear { d_in, d_out } => {
                    if d_in != c {
                        return Err(Error::structure(format!(
                            "classifier expects {d_in} features, pipeline carries {c}"
                        )));
                    }
                    c = d_out;
                }
            }
        }
        if c != self.n_classes {
            return Err(Error::structure(format!(
                "classifier emits {c} classes, spec declares {}",
                self.n_classes
            )));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("variant={}\n", self.variant));
        out.push_str(&format!(
            "input={}x{}x{}\n",
            self.input_shape.0, self.input_shape.1, self.input_shape.2
        ));
        out.push_str(&format!("n_classes={}\n", self.n_classes));
        out.push_str(&format!(
            "lfm=m:{},padding:{},normalization:{},stride:{}\n",
            self.lfm_config.m,
            self.lfm_config.padding,
            self.lfm_config.normalization,
            self.lfm_config.stride
        ));
        for stage in &self.stages {
            out.push_str(&format!("stage={}\n", stage.to_text()));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<ModelSpec> {
        let mut variant = None;
        let mut input_shape = None;
        let mut n_classes = None;
        let mut lfm_config = None;
        let mut stages = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::format(format!("expected key=value, got '{line}'")))?;
            match key {
                "variant" => variant = Some(value.parse::<Variant>()?),
                "input" => {
                    let dims: Vec<usize> = value
                        .split('x')
                        .map(|d| d.parse::<usize>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| Error::format(format!("bad input shape '{value}'")))?;
                    if dims.len() != 3 {
                        return Err(Error::format("input shape must be CxHxW"));
                    }
                    input_shape = Some((dims[0], dims[1], dims[2]));
                }
                "n_classes" => {
                    n_classes = Some(
                        value
                            .parse::<usize>()
                            .map_err(|_| Error::format("bad n_classes"))?,
                    )
                }
                "lfm" => {
                    let mut m = None;
                    let mut padding = None;
                    let mut normalization = None;
                    let mut stride = None;
                    for field in value.split(',') {
                        let (k, v) = field
                            .split_once(':')
                            .ok_or_else(|| Error::format(format!("bad blur field '{field}'")))?;
                        match k {
                            "m" => m = v.parse::<usize>().ok(),
                            "padding" => padding = Some(v.parse::<PaddingMode>()?),
                            "normalization" => normalization = Some(v.parse::<Normalization>()?),
                            "stride" => stride = v.parse::<usize>().ok(),
                            _ => return Err(Error::format(format!("unknown blur field '{k}'"))),
                        }
                    }
                    lfm_config = Some(LfmConfig {
                        m: m.ok_or_else(|| Error::format("blur config missing m"))?,
                        padding: padding.ok_or_else(|| Error::format("blur config missing padding"))?,
                        normalization: normalization
                            .ok_or_else(|| Error::format("blur config missing normalization"))?,
                        stride: stride.ok_or_else(|| Error::format("blur config missing stride"))?,
                    });
                }
                "stage" => stages.push(Stage::from_text(value)?),
                other => return Err(Error::format(format!("unknown model key '{other}'"))),
            }
        }
        let spec = ModelSpec {
            variant: variant.ok_or_else(|| Error::format("model text missing variant"))?,
            stages,
            input_shape: input_shape.ok_or_else(|| Error::format("model text missing input"))?,
            n_classes: n_classes.ok_or_else(|| Error::format("model text missing n_classes"))?,
            lfm_config: lfm_config.ok_or_else(|| Error::format("model text missing lfm"))?,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Blur configuration for a `Stage::Lfm` site (always stride 1).
    pub(crate) fn end_blur(&self) -> LfmConfig {
        self.lfm_config.with_stride(1)
    }

    /// Blur configuration inside a replacement block (always stride 2).
    pub(crate) fn replacement_blur(&self) -> LfmConfig {
        self.lfm_config.with_stride(2)
    }
}

/// Weight/bias pair of one parametric stage.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamPair<T: Scalar> {
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

/// A spec together with its learnable parameters. The blur stages carry no
/// entry in `params`; their taps are recomputed from the config and can
/// never be updated.
#[derive(Clone, Debug, PartialEq)]
pub struct Model<T: Scalar = f64> {
    pub spec: ModelSpec,
    pub params: Vec<Option<ParamPair<T>>>,
    pub rng_seed: u64,
}

impl<T: Scalar> Model<T> {
    pub fn parameter_count(&self) -> usize {
        self.params
            .iter()
            .flatten()
            .map(|p| p.weight.len() + p.bias.len())
            .sum()
    }

    /// Forward pass keeping every intermediate activation;
    /// `activations[0]` is the input and `activations.last()` the logits.
    pub fn forward_cached(&self, x: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
        let (c, h, w) = self.input_shape_of(x)?;
        debug_assert_eq!((c, h, w), self.spec.input_shape);
        let mut activations = Vec::with_capacity(self.spec.stages.len() + 1);
        activations.push(x.clone());
        for (i, stage) in self.spec.stages.iter().enumerate() {
            let prev = activations.last().unwrap();
            let next = self.stage_forward(i, stage, prev)?;
            activations.push(next);
        }
        Ok(activations)
    }

    /// Class scores for a batch.
    pub fn logits(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut current = x.clone();
        for (i, stage) in self.spec.stages.iter().enumerate() {
            current = self.stage_forward(i, stage, &current)?;
        }
        Ok(current)
    }

    /// Pooled pre-classifier features: the activation right after global
    /// average pooling, shape `(n, c, 1, 1)`.
    pub fn features(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut current = x.clone();
        for (i, stage) in self.spec.stages.iter().enumerate() {
            current = self.stage_forward(i, stage, &current)?;
            if matches!(stage, Stage::GlobalAvgPool) {
                return Ok(current);
            }
        }
        Err(Error::structure("network has no pooling stage"))
    }

    fn input_shape_of(&self, x: &Tensor<T>) -> Result<(usize, usize, usize)> {
        let (n, c, h, w) = x.shape();
        if n == 0 {
            return Err(Error::dimension("empty batch"));
        }
        if (c, h, w) != self.spec.input_shape {
            return Err(Error::dimension(format!(
                "input shape ({c}, {h}, {w}) does not match model input {:?}",
                self.spec.input_shape
            )));
        }
        Ok((c, h, w))
    }

    fn stage_params(&self, i: usize) -> Result<&ParamPair<T>> {
        self.params[i]
            .as_ref()
            .ok_or_else(|| Error::structure(format!("stage {i} has no parameters")))
    }

    fn stage_forward(&self, i: usize, stage: &Stage, x: &Tensor<T>) -> Result<Tensor<T>> {
        match *stage {
            Stage::Conv3x3 { c_in, c_out, stride } => {
                let p = self.stage_params(i)?;
                layers::conv3x3_forward(x, &p.weight, &p.bias, c_in, c_out, stride)
            }
            Stage::Relu => Ok(layers::relu_forward(x)),
            Stage::RslBlock { c_in: _, c_out } => {
                let p = self.stage_params(i)?;
                lfm::rsl_block_forward(x, &p.weight, &p.bias, c_out, &self.spec.replacement_blur())
            }
            Stage::Lfm => lfm::lfm_forward(x, &self.spec.end_blur()),
            Stage::GlobalAvgPool => Ok(layers::gap_forward(x)),
            Stage::Linear { d_in: _, d_out } => {
                let p = self.stage_params(i)?;
                layers::linear_forward(x, &p.weight, &p.bias, d_out)
            }
        }
    }

    /// Backpropagate `grad_logits` through cached activations, producing one
    /// gradient pair per parametric stage plus the gradient at the input.
    pub fn backward(
        &self,
        activations: &[Tensor<T>],
        grad_logits: &Tensor<T>,
    ) -> Result<Gradients<T>> {
        if activations.len() != self.spec.stages.len() + 1 {
            return Err(Error::dimension("activation cache does not match the network"));
        }
        let mut per_stage: Vec<Option<ParamPair<T>>> = vec![None; self.spec.stages.len()];
        let mut grad = grad_logits.clone();
        for (i, stage) in self.spec.stages.iter().enumerate().rev() {
            let input = &activations[i];
            grad = match *stage {
                Stage::Conv3x3 { c_in, c_out, stride } => {
                    let p = self.stage_params(i)?;
                    let (gx, gw, gb) =
                        layers::conv3x3_backward(input, &p.weight, c_in, c_out, stride, &grad)?;
                    per_stage[i] = Some(ParamPair { weight: gw, bias: gb });
                    gx
                }
                Stage::Relu => layers::relu_backward(input, &grad)?,
                Stage::RslBlock { c_in: _, c_out } => {
                    let p = self.stage_params(i)?;
                    let (gx, gw, gb) = lfm::rsl_block_backward(
                        input,
                        &p.weight,
                        &p.bias,
                        c_out,
                        &self.spec.replacement_blur(),
                        &grad,
                    )?;
                    per_stage[i] = Some(ParamPair { weight: gw, bias: gb });
                    gx
                }
                Stage::Lfm => lfm::lfm_backward(&grad, &self.spec.end_blur(), input.shape())?,
                Stage::GlobalAvgPool => {
                    layers::gap_backward(&grad, input.height(), input.width())?
                }
                Stage::Linear { d_in: _, d_out } => {
                    let p = self.stage_params(i)?;
                    let (gx, gw, gb) = layers::linear_backward(input, &p.weight, d_out, &grad)?;
                    per_stage[i] = Some(ParamPair { weight: gw, bias: gb });
                    gx
                }
            };
        }
        Ok(Gradients { per_stage, input: grad })
    }
}

/// Gradients aligned with `Model::params`, plus the input gradient.
pub struct Gradients<T: Scalar> {
    pub per_stage: Vec<Option<ParamPair<T>>>,
    pub input: Tensor<T>,
}

/// Initialize a model from a validated spec with He-style weights
/// (`std = sqrt(2 / fan_in)`, biases zero) drawn from the seeded generator
/// in stage order. Identical seeds give bit-identical parameters.
pub fn build_model<T: Scalar>(spec: &ModelSpec, seed: u64) -> Result<Model<T>> {
    spec.validate()?;
    let mut rng = Rng::new(seed);
    let mut params: Vec<Option<ParamPair<T>>> = Vec::with_capacity(spec.stages.len());
    for stage in &spec.stages {
        if !stage.has_params() {
            params.push(None);
            continue;
        }
        let (w_len, b_len, fan_in) = match *stage {
            Stage::Conv3x3 { c_in, c_out, .. } => (c_out * c_in * 9, c_out, c_in * 9),
            Stage::RslBlock { c_in, c_out } => (c_out * c_in, c_out, c_in),
            Stage::Linear { d_in, d_out } => (d_out * d_in, d_out, d_in),
            _ => unreachable!(),
        };
        let std = (2.0 / fan_in as f64).sqrt();
        let weight = (0..w_len).map(|_| T::from_f64(rng.normal() * std)).collect();
        params.push(Some(ParamPair { weight, bias: vec![T::zero(); b_len] }));
    }
    Ok(Model { spec: spec.clone(), params, rng_seed: seed })
}

/// SGD with momentum: `v = momentum*v + g`, `p -= lr*v`.
pub struct Sgd<T: Scalar> {
    velocity: Vec<Option<ParamPair<T>>>,
}

impl<T: Scalar> Sgd<T> {
    pub fn new(model: &Model<T>) -> Self {
        let velocity = model
            .params
            .iter()
            .map(|p| {
                p.as_ref().map(|pair| ParamPair {
                    weight: vec![T::zero(); pair.weight.len()],
                    bias: vec![T::zero(); pair.bias.len()],
                })
            })
            .collect();
        Sgd { velocity }
    }

    pub fn step(
        &mut self,
        model: &mut Model<T>,
        grads: &Gradients<T>,
        learning_rate: f64,
        momentum: f64,
    ) {
        let lr = T::from_f64(learning_rate);
        let mu = T::from_f64(momentum);
        for ((param, vel), grad) in model
            .params
            .iter_mut()
            .zip(&mut self.velocity)
            .zip(&grads.per_stage)
        {
            let (Some(param), Some(vel), Some(grad)) = (param.as_mut(), vel.as_mut(), grad)
            else {
                continue;
            };
            for ((p, v), &g) in param
                .weight
                .iter_mut()
                .zip(&mut vel.weight)
                .zip(&grad.weight)
            {
                *v = mu * *v + g;
                *p = *p - lr * *v;
            }
            for ((p, v), &g) in param.bias.iter_mut().zip(&mut vel.bias).zip(&grad.bias) {
                *v = mu * *v + g;
                *p = *p - lr * *v;
            }
        }
    }
}
