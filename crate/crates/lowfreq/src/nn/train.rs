//! Source-only training loop and evaluation.
//!
//! Training sees labeled source-domain samples only; target-domain data
//! enters solely as an evaluation set whose accuracy is logged per epoch and
//! never influences optimization or model selection.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::filters::{highpass, lowpass, PaddingMode};
use crate::image::Image;
use crate::nn::{build_model, Model, Sgd};
use crate::rng::Rng;
use crate::tensor::{Scalar, Tensor};

/// Per-image preprocessing applied before batching, identically at training
/// and evaluation time. Uses reflect padding, the default for photographs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preproc {
    None,
    Lowpass { m: usize },
    Highpass { m: usize },
}

impl Preproc {
    pub fn parse(kind: &str, m: usize) -> Result<Preproc> {
        match kind {
            "none" => Ok(Preproc::None),
            "lowpass" => Ok(Preproc::Lowpass { m }),
            "highpass" => Ok(Preproc::Highpass { m }),
            other => Err(Error::argument(format!(
                "unknown preprocessing '{other}' (expected none|lowpass|highpass)"
            ))),
        }
    }

    pub fn apply(&self, image: &Image) -> Result<Image> {
        match *self {
            Preproc::None => Ok(image.clone()),
            Preproc::Lowpass { m } => lowpass(image, m, PaddingMode::Reflect),
            Preproc::Highpass { m } => highpass(image, m, PaddingMode::Reflect),
        }
    }
}

impl fmt::Display for Preproc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Preproc::None => f.write_str("none"),
            Preproc::Lowpass { .. } => f.write_str("lowpass"),
            Preproc::Highpass { .. } => f.write_str("highpass"),
        }
    }
}

/// Scalar width used for parameters and activations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Precision {
    Double,
    Single,
}

impl FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "double" => Ok(Precision::Double),
            "single" => Ok(Precision::Single),
            other => Err(Error::argument(format!(
                "unknown precision '{other}' (expected double|single)"
            ))),
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Precision::Double => "double",
            Precision::Single => "single",
        })
    }
}

/// Training hyperparameters. `precision` selects the scalar type the driver
/// instantiates the model with; the loop itself is generic.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub seed: u64,
    pub precision: Precision,
    pub preproc: Preproc,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 16,
            learning_rate: 0.02,
            momentum: 0.9,
            seed: 1,
            precision: Precision::Double,
            preproc: Preproc::None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::argument("epochs and batch size must be nonzero"));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::argument("learning rate must be finite and nonnegative"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::argument("momentum must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// One labeled image.
#[derive(Clone, Debug)]
pub struct Sample {
    pub image: Image,
    pub label: usize,
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub source_acc: f64,
    pub target_acc: Option<f64>,
}

/// Top-1 accuracy and per-class accuracies (`None` for classes absent from
/// the data).
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    pub per_class: Vec<Option<f64>>,
}

fn preprocess(samples: &[Sample], preproc: &Preproc) -> Result<Vec<Sample>> {
    samples
        .iter()
        .map(|s| Ok(Sample { image: preproc.apply(&s.image)?, label: s.label }))
        .collect()
}

fn batch_tensor<T: Scalar>(samples: &[Sample], indices: &[usize]) -> Result<Tensor<T>> {
    let images: Vec<Image> = indices.iter().map(|&i| samples[i].image.clone()).collect();
    Tensor::from_images(&images)
}

fn argmax_rows<T: Scalar>(logits: &Tensor<T>) -> Vec<usize> {
    let (n, k, _, _) = logits.shape();
    (0..n)
        .map(|ni| {
            let row = &logits.data()[ni * k..(ni + 1) * k];
            let mut best = 0;
            for j in 1..k {
                if row[j] > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

fn accuracy_on_prepared<T: Scalar>(model: &Model<T>, samples: &[Sample]) -> Result<EvalReport> {
    let n_classes = model.spec.n_classes;
    let mut correct = vec![0usize; n_classes];
    let mut seen = vec![0usize; n_classes];
    for chunk in samples.chunks(64) {
        let indices: Vec<usize> = (0..chunk.len()).collect();
        let x = batch_tensor::<T>(chunk, &indices)?;
        let logits = model.logits(&x)?;
        for (pred, sample) in argmax_rows(&logits).into_iter().zip(chunk) {
            seen[sample.label] += 1;
            if pred == sample.label {
                correct[sample.label] += 1;
            }
        }
    }
    let total_seen: usize = seen.iter().sum();
    let total_correct: usize = correct.iter().sum();
    Ok(EvalReport {
        accuracy: total_correct as f64 / total_seen as f64,
        per_class: seen
            .iter()
            .zip(&correct)
            .map(|(&s, &c)| if s > 0 { Some(c as f64 / s as f64) } else { None })
            .collect(),
    })
}

fn check_labels(samples: &[Sample], n_classes: usize) -> Result<()> {
    for s in samples {
        if s.label >= n_classes {
            return Err(Error::argument(format!(
                "label {} out of range for {n_classes} classes",
                s.label
            )));
        }
    }
    Ok(())
}

/// Mini-batch SGD with momentum on the cross-entropy objective over the
/// source training set, with batches drawn in seeded shuffled order.
///
/// Returns one record per epoch: mean training loss, accuracy on the
/// training set after the epoch's updates, and (when `target_eval` is
/// given) accuracy on the target-domain evaluation set.
pub fn train_source<T: Scalar>(
    model: &mut Model<T>,
    source_train: &[Sample],
    target_eval: Option<&[Sample]>,
    cfg: &TrainConfig,
) -> Result<Vec<EpochRecord>> {
    cfg.validate()?;
    if source_train.is_empty() {
        return Err(Error::argument("training set is empty"));
    }
    check_labels(source_train, model.spec.n_classes)?;
    if let Some(t) = target_eval {
        check_labels(t, model.spec.n_classes)?;
    }

    let train = preprocess(source_train, &cfg.preproc)?;
    let target = target_eval.map(|t| preprocess(t, &cfg.preproc)).transpose()?;

    let mut optimizer = Sgd::new(model);
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 0..cfg.epochs {
        let mut shuffle_rng = Rng::stream(cfg.seed, epoch as u64);
        shuffle_rng.shuffle(&mut order);

        let mut loss_sum = 0.0f64;
        for (batch_idx, batch) in order.chunks(cfg.batch_size).enumerate() {
            let x = batch_tensor::<T>(&train, batch)?;
            let labels: Vec<usize> = batch.iter().map(|&i| train[i].label).collect();
            let activations = model.forward_cached(&x)?;
            let (loss, probs) =
                crate::nn::layers::softmax_ce_forward(activations.last().unwrap(), &labels)?;
            if !loss.is_finite() {
                return Err(Error::NanLoss { epoch, batch: batch_idx });
            }
            loss_sum += loss * batch.len() as f64;
            let grad_logits = crate::nn::layers::softmax_ce_backward(&probs, &labels)?;
            let grads = model.backward(&activations, &grad_logits)?;
            optimizer.step(model, &grads, cfg.learning_rate, cfg.momentum);
        }

        let source_acc = accuracy_on_prepared(model, &train)?.accuracy;
        let target_acc = match &target {
            Some(t) if !t.is_empty() => Some(accuracy_on_prepared(model, t)?.accuracy),
            _ => None,
        };
        log.push(EpochRecord {
            epoch: epoch + 1,
            loss: loss_sum / train.len() as f64,
            source_acc,
            target_acc,
        });
    }
    Ok(log)
}

/// Top-1 accuracy of `model` on `data` under the given preprocessing.
pub fn evaluate<T: Scalar>(
    model: &Model<T>,
    data: &[Sample],
    preproc: &Preproc,
) -> Result<EvalReport> {
    if data.is_empty() {
        return Err(Error::argument("evaluation set is empty"));
    }
    check_labels(data, model.spec.n_classes)?;
    let prepared = preprocess(data, preproc)?;
    accuracy_on_prepared(model, &prepared)
}

/// Convenience wrapper: build a model for `spec_variant` and train it.
pub fn build_and_train<T: Scalar>(
    spec: &crate::nn::ModelSpec,
    source_train: &[Sample],
    target_eval: Option<&[Sample]>,
    cfg: &TrainConfig,
) -> Result<(Model<T>, Vec<EpochRecord>)> {
    let mut model = build_model::<T>(spec, cfg.seed)?;
    let log = train_source(&mut model, source_train, target_eval, cfg)?;
    Ok((model, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lfm::LfmConfig;
    use crate::nn::{ModelSpec, Variant};

    /// Two linearly separable classes: bright left half vs bright right
    /// half, plus seeded pixel noise.
    fn separable_samples(n_per_class: usize, size: usize, seed: u64) -> Vec<Sample> {
        let mut rng = Rng::new(seed);
        let mut out = Vec::new();
        for label in 0..2usize {
            for _ in 0..n_per_class {
                let image = Image::from_fn(size, size, |_, x| {
                    let bright = if (x < size / 2) == (label == 0) { 0.8 } else { 0.2 };
                    (bright + 0.05 * (rng.next_f64() - 0.5)).clamp(0.0, 1.0)
                });
                out.push(Sample { image, label });
            }
        }
        out
    }

    fn toy_spec(variant: Variant, k: usize, size: usize) -> ModelSpec {
        ModelSpec::toy(variant, k, (size, size), LfmConfig::default()).unwrap()
    }

    #[test]
    fn zero_learning_rate_leaves_parameters_unchanged() {
        let spec = toy_spec(Variant::Baseline, 2, 16);
        let mut model: Model = build_model(&spec, 3).unwrap();
        let before = model.clone();
        let samples = separable_samples(4, 16, 1);
        let cfg = TrainConfig { epochs: 3, learning_rate: 0.0, ..TrainConfig::default() };
        train_source(&mut model, &samples, None, &cfg).unwrap();
        assert_eq!(model.params, before.params);
    }

    #[test]
    fn separable_toy_problem_trains_to_high_accuracy() {
        let spec = toy_spec(Variant::Baseline, 2, 16);
        let samples = separable_samples(10, 16, 2);
        let cfg = TrainConfig { epochs: 20, batch_size: 8, seed: 5, ..TrainConfig::default() };
        let (model, log) = build_and_train::<f64>(&spec, &samples, None, &cfg).unwrap();
        let last = log.last().unwrap();
        assert!(last.source_acc >= 0.95, "source accuracy {}", last.source_acc);
        assert!(last.loss < log.first().unwrap().loss);

        // The 5-epoch moving average of the loss never increases on this
        // toy problem (a sanity contract on the optimizer, not a theorem).
        let smoothed: Vec<f64> = log
            .windows(5)
            .map(|w| w.iter().map(|r| r.loss).sum::<f64>() / 5.0)
            .collect();
        for pair in smoothed.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-9, "smoothed loss rose: {pair:?}");
        }

        // Evaluation on the training set reproduces the logged accuracy.
        let report = evaluate(&model, &samples, &cfg.preproc).unwrap();
        assert!((report.accuracy - last.source_acc).abs() < 1e-12);
    }

    #[test]
    fn blur_stages_have_no_learnable_state() {
        let spec = toy_spec(Variant::Ie, 2, 16);
        let lfm_idx = spec.stages.iter().position(|s| matches!(s, crate::nn::Stage::Lfm)).unwrap();
        let taps_before: Vec<u64> = spec
            .lfm_config
            .kernel()
            .unwrap()
            .taps()
            .iter()
            .map(|t| t.to_bits())
            .collect();

        let samples = separable_samples(6, 16, 9);
        let cfg = TrainConfig { epochs: 5, ..TrainConfig::default() };
        let (model, _) = build_and_train::<f64>(&spec, &samples, None, &cfg).unwrap();

        // The blur owns no parameter slot, so no optimizer step can touch
        // it; its taps come out of the config bit-identical after training.
        assert!(model.params[lfm_idx].is_none());
        let taps_after: Vec<u64> = model
            .spec
            .lfm_config
            .kernel()
            .unwrap()
            .taps()
            .iter()
            .map(|t| t.to_bits())
            .collect();
        assert_eq!(taps_before, taps_after);
    }

    #[test]
    fn training_is_deterministic() {
        let spec = toy_spec(Variant::Ie, 2, 16);
        let samples = separable_samples(6, 16, 3);
        let cfg = TrainConfig { epochs: 4, seed: 11, ..TrainConfig::default() };
        let (a, log_a) = build_and_train::<f64>(&spec, &samples, None, &cfg).unwrap();
        let (b, log_b) = build_and_train::<f64>(&spec, &samples, None, &cfg).unwrap();
        assert_eq!(log_a, log_b);
        let bits = |m: &Model| -> Vec<u64> {
            m.params
                .iter()
                .flatten()
                .flat_map(|p| p.weight.iter().chain(&p.bias).map(|v| v.to_bits()))
                .collect()
        };
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn constant_predictor_scores_one_over_k() {
        let spec = toy_spec(Variant::Baseline, 2, 16);
        let mut model: Model = build_model(&spec, 1).unwrap();
        // Zero every weight, then bias the classifier toward class 0.
        for p in model.params.iter_mut().flatten() {
            p.weight.fill(0.0);
            p.bias.fill(0.0);
        }
        if let Some(last) = model.params.last_mut().and_then(|p| p.as_mut()) {
            last.bias[0] = 1.0;
        }
        let samples = separable_samples(8, 16, 4); // balanced 2-class
        let report = evaluate(&model, &samples, &Preproc::None).unwrap();
        assert!((report.accuracy - 0.5).abs() < 1e-12);
        assert_eq!(report.per_class[0], Some(1.0));
        assert_eq!(report.per_class[1], Some(0.0));
    }

    #[test]
    fn accuracy_is_order_invariant() {
        let spec = toy_spec(Variant::Baseline, 2, 16);
        let model: Model = build_model(&spec, 6).unwrap();
        let mut samples = separable_samples(5, 16, 5);
        let a = evaluate(&model, &samples, &Preproc::None).unwrap().accuracy;
        samples.reverse();
        let b = evaluate(&model, &samples, &Preproc::None).unwrap().accuracy;
        assert_eq!(a, b);
    }

    #[test]
    fn empty_and_mislabeled_sets_are_rejected() {
        let spec = toy_spec(Variant::Baseline, 2, 16);
        let mut model: Model = build_model(&spec, 6).unwrap();
        assert!(evaluate(&model, &[], &Preproc::None).is_err());
        let bad = vec![Sample { image: Image::zeros(16, 16), label: 2 }];
        assert!(evaluate(&model, &bad, &Preproc::None).is_err());
        assert!(train_source(&mut model, &bad, None, &TrainConfig::default()).is_err());
    }

    #[test]
    fn preprocessing_is_applied_before_batching() {
        // A lowpass-preprocessed run must match manually filtering the
        // dataset and training with no preprocessing.
        let spec = toy_spec(Variant::Baseline, 2, 16);
        let samples = separable_samples(4, 16, 7);
        let cfg = TrainConfig {
            epochs: 2,
            preproc: Preproc::Lowpass { m: 3 },
            ..TrainConfig::default()
        };
        let (a, _) = build_and_train::<f64>(&spec, &samples, None, &cfg).unwrap();

        let filtered: Vec<Sample> = samples
            .iter()
            .map(|s| Sample {
                image: lowpass(&s.image, 3, PaddingMode::Reflect).unwrap(),
                label: s.label,
            })
            .collect();
        let cfg_none = TrainConfig { preproc: Preproc::None, ..cfg };
        let (b, _) = build_and_train::<f64>(&spec, &filtered, None, &cfg_none).unwrap();
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn single_precision_training_runs() {
        let spec = toy_spec(Variant::Baseline, 2, 16);
        let samples = separable_samples(4, 16, 8);
        let cfg = TrainConfig {
            epochs: 2,
            precision: Precision::Single,
            ..TrainConfig::default()
        };
        let (model, log) = build_and_train::<f32>(&spec, &samples, None, &cfg).unwrap();
        assert_eq!(log.len(), 2);
        assert!(model.params.iter().flatten().all(|p| p.weight.iter().all(|v| v.is_finite())));
    }
}
