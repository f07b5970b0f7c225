//! A compact version of the five-arm experiment grid: train the baseline
//! with and without frequency pre-processing, and the two blur-equipped
//! architectures, on source-domain data; compare target-domain accuracy.
//!
//! This example uses fewer seeds and epochs than the full grid so it
//! finishes in a couple of minutes; the real thing is
//! `lfm ablation --data <dir> --out <table>`.
//!
//! Run with: cargo run --release --example ablation_grid

use lowfreq::cli::ABLATION_ARMS;
use lowfreq::lfm::LfmConfig;
use lowfreq::nn::{build_model, train_source, Model, ModelSpec, Preproc, TrainConfig};
use lowfreq::synthdata::{gen_dataset, DatasetManifest, DomainId, GenConfig, Split};

fn main() -> lowfreq::Result<()> {
    let dir = std::env::temp_dir().join("lowfreq-ablation-example");
    gen_dataset(&GenConfig::default(), &dir)?;
    let manifest = DatasetManifest::read(&dir.join("manifest.csv"))?;
    let train = manifest.load_samples(&dir, DomainId::A, Split::Train)?;
    let target = manifest.load_samples(&dir, DomainId::B, Split::Test)?;

    let seeds = [1u64, 2, 3];
    println!(
        "{} source images, {} target test images, seeds {seeds:?}\n",
        train.len(),
        target.len()
    );
    println!("{:<18} {:>8} {:>8} {:>8}", "arm", "median", "min", "max");
    for (name, variant, preproc_kind) in ABLATION_ARMS {
        let mut accs = Vec::new();
        for seed in seeds {
            let cfg = TrainConfig {
                epochs: 30,
                seed,
                preproc: Preproc::parse(preproc_kind, 3)?,
                ..TrainConfig::default()
            };
            let spec = ModelSpec::toy(variant, 3, (32, 32), LfmConfig::default())?;
            let mut model: Model<f64> = build_model(&spec, seed)?;
            let log = train_source(&mut model, &train, Some(&target), &cfg)?;
            accs.push(log.last().unwrap().target_acc.unwrap());
        }
        accs.sort_by(f64::total_cmp);
        println!(
            "{name:<18} {:>8.4} {:>8.4} {:>8.4}",
            accs[accs.len() / 2],
            accs[0],
            accs[accs.len() - 1]
        );
    }
    println!("\nexpected shape: highpass < baseline < lowpass <= blur-equipped arms");
    Ok(())
}
