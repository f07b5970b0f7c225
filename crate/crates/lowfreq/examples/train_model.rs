//! Train the small CNN on source-domain data only and watch target-domain
//! accuracy, then round-trip the result through a checkpoint.
//!
//! Run with: cargo run --example train_model

use lowfreq::lfm::LfmConfig;
use lowfreq::nn::{
    build_model, evaluate, train_source, Model, ModelSpec, Preproc, TrainConfig, Variant,
};
use lowfreq::synthdata::{gen_dataset, DatasetManifest, DomainId, GenConfig, Split};
use lowfreq::tensorio::{read_checkpoint, write_checkpoint};

fn main() -> lowfreq::Result<()> {
    let dir = std::env::temp_dir().join("lowfreq-train-example");
    gen_dataset(&GenConfig { n_per_class_per_domain: 15, ..GenConfig::default() }, &dir)?;
    let manifest = DatasetManifest::read(&dir.join("manifest.csv"))?;
    let train = manifest.load_samples(&dir, DomainId::A, Split::Train)?;
    let target = manifest.load_samples(&dir, DomainId::B, Split::Test)?;

    let spec = ModelSpec::toy(Variant::Rsl, 3, (32, 32), LfmConfig::default())?;
    let cfg = TrainConfig { epochs: 25, seed: 1, ..TrainConfig::default() };
    let mut model: Model<f64> = build_model(&spec, cfg.seed)?;
    println!(
        "training a {} model ({} parameters) on {} source images",
        spec.variant,
        model.parameter_count(),
        train.len()
    );

    let log = train_source(&mut model, &train, Some(&target), &cfg)?;
    for record in log.iter().step_by(5).chain(log.last().into_iter().filter(|r| r.epoch % 5 != 0)) {
        println!(
            "  epoch {:>3}  loss {:.4}  source acc {:.3}  target acc {:.3}",
            record.epoch,
            record.loss,
            record.source_acc,
            record.target_acc.unwrap_or(f64::NAN)
        );
    }

    let ckpt = dir.join("model.lfmc");
    write_checkpoint(&ckpt, &model)?;
    let reloaded: Model<f64> = read_checkpoint(&ckpt)?;
    let report = evaluate(&reloaded, &target, &Preproc::None)?;
    println!("\nreloaded checkpoint target accuracy: {:.3}", report.accuracy);
    println!("per-class:");
    for (class, acc) in report.per_class.iter().enumerate() {
        match acc {
            Some(a) => println!("  class {class}: {a:.3}"),
            None => println!("  class {class}: (no samples)"),
        }
    }
    Ok(())
}
