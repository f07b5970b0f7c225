//! Verify a few analytic gradients against central finite differences.
//!
//! The test suite does this exhaustively; this example shows the recipe on
//! one fixed-blur case and one full model.
//!
//! Run with: cargo run --example gradient_check

use lowfreq::lfm::{lfm_backward, lfm_forward, LfmConfig};
use lowfreq::nn::{build_model, layers, Model, ModelSpec, Variant};
use lowfreq::rng::Rng;
use lowfreq::tensor::Tensor;

fn main() -> lowfreq::Result<()> {
    let mut rng = Rng::new(42);

    // Gradient of sum(projection * blur(x)) with respect to x.
    let cfg = LfmConfig { stride: 2, ..LfmConfig::default() };
    let x = Tensor::from_data(1, 1, 8, 8, (0..64).map(|_| rng.next_f64() - 0.5).collect())?;
    let out = lfm_forward(&x, &cfg)?;
    let projection: Vec<f64> = (0..out.numel()).map(|_| rng.next_f64() - 0.5).collect();
    let mut grad_out = out.clone();
    grad_out.data_mut().copy_from_slice(&projection);
    let analytic = lfm_backward(&grad_out, &cfg, x.shape())?;

    let loss = |t: &Tensor| -> f64 {
        lfm_forward(t, &cfg)
            .unwrap()
            .data()
            .iter()
            .zip(&projection)
            .map(|(a, b)| a * b)
            .sum()
    };
    let eps = 1e-5;
    let mut worst = 0.0f64;
    for i in 0..x.numel() {
        let mut plus = x.clone();
        plus.data_mut()[i] += eps;
        let mut minus = x.clone();
        minus.data_mut()[i] -= eps;
        let numeric = (loss(&plus) - loss(&minus)) / (2.0 * eps);
        let a = analytic.data()[i];
        worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-4));
    }
    println!("strided blur backward vs finite differences: worst relative error {worst:.2e}");

    // Full cross-entropy gradient of a small model with replacement blocks.
    let spec = ModelSpec::toy(Variant::Rsl, 3, (16, 16), LfmConfig::default())?;
    let model: Model<f64> = build_model(&spec, 7)?;
    let input = Tensor::from_data(2, 1, 16, 16, (0..512).map(|_| rng.next_f64()).collect())?;
    let labels = [0usize, 2];

    let activations = model.forward_cached(&input)?;
    let (loss_value, probs) = layers::softmax_ce_forward(activations.last().unwrap(), &labels)?;
    let grads = model.backward(&activations, &layers::softmax_ce_backward(&probs, &labels)?)?;

    let full_loss = |m: &Model<f64>| -> f64 {
        let logits = m.logits(&input).unwrap();
        layers::softmax_ce_forward(&logits, &labels).unwrap().0
    };
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    for stage_idx in 0..spec.stages.len() {
        let Some(g) = grads.per_stage[stage_idx].as_ref() else { continue };
        // Spot-check a handful of weights per stage.
        for k in (0..g.weight.len()).step_by(g.weight.len().div_ceil(5)) {
            let mut plus = model.clone();
            plus.params[stage_idx].as_mut().unwrap().weight[k] += eps;
            let mut minus = model.clone();
            minus.params[stage_idx].as_mut().unwrap().weight[k] -= eps;
            let numeric = (full_loss(&plus) - full_loss(&minus)) / (2.0 * eps);
            let a = g.weight[k];
            worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-4));
            checked += 1;
        }
    }
    println!(
        "model loss {loss_value:.4}; {checked} spot-checked weight gradients, worst relative error {worst:.2e}"
    );
    Ok(())
}
