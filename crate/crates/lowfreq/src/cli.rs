//! The `lfm` command-line tool.
//!
//! Every subcommand resolves its options in a fixed precedence order —
//! built-in defaults, then the `LFM_SEED` environment variable (seed only),
//! then a `--config` key=value file, then flags — rejects unknown keys, and
//! logs the fully resolved configuration to the diagnostic stream before
//! running. Errors print one line with a stable code prefix and a nonzero
//! exit status.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::discrepancy::{domain_gap, Embedding};
use crate::error::{Error, Result};
use crate::filters::{gaussian_kernel, lowpass, Normalization, PaddingMode};
use crate::image::Image;
use crate::lfm::LfmConfig;
use crate::nn::{
    build_model, train_source, Model, ModelSpec, Precision, Preproc, Sample, TrainConfig, Variant,
};
use crate::spectral::{dft2, filter_spectral, spectrum_stats};
use crate::synthdata::{gen_dataset, DatasetManifest, DomainId, GenConfig, Split, TextureKind};
use crate::tensorio::{
    atomic_write, read_checkpoint_any, read_pgm, read_pgm_dir, write_checkpoint, write_pgm,
};

const USAGE: &str = "\
usage: lfm <command> [--config <file>] [--key value ...]

commands:
  filter    --in <img> --out <img> [--mode lowpass|highpass] [--m 3]
            [--padding reflect|zero|circular] [--path spatial|spectral]
            High-pass output encodes zero as mid-gray (128/255).
  spectrum  --in <img> [--bands 8] [--out <report>]
  gen-data  --out <dir> [--classes 3] [--per-class 25] [--texture checkerboard]
            [--amplitude 0.5] [--illumination 0.15] [--size 32] [--seed 7]
  mmd       --domain-a <dir> --domain-b <dir> [--preproc none|lowpass|highpass]
            [--m 3] [--model <ckpt>]
  train     --data <dir> --out <ckpt> [--arch baseline|ie|rsl]
            [--preproc none|lowpass|highpass] [--m 3] [--epochs 50] [--seed 1]
            [--lr 0.02] [--batch-size 16] [--momentum 0.9]
            [--lfm-padding reflect] [--lfm-normalization unit_sum]
            [--precision double|single]
  ablation  --data <dir> --out <table> [--seeds 1,2,3,4,5] [--epochs 50]
            [--lr 0.02] [--batch-size 16] [--momentum 0.9] [--m 3]
            [--lfm-padding reflect] [--lfm-normalization unit_sum]

A config file holds one key=value per line ('#' comments allowed) using the
flag names without the leading dashes; flags override file values, which
override LFM_SEED, which overrides defaults.
";

/// Option resolution for one subcommand.
struct Options {
    command: &'static str,
    /// key -> (default, resolved value); `None` default means required.
    values: BTreeMap<&'static str, (Option<String>, Option<String>)>,
}

impl Options {
    fn new(command: &'static str, keys: &[(&'static str, Option<&str>)]) -> Self {
        let values = keys
            .iter()
            .map(|(k, d)| (*k, (d.map(str::to_string), None)))
            .collect();
        Options { command, values }
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match self.values.get_mut(key) {
            Some(slot) => {
                slot.1 = Some(value.to_string());
                Ok(())
            }
            None => Err(Error::argument(format!(
                "unknown key '{key}' for command '{}'",
                self.command
            ))),
        }
    }

    fn resolve(&mut self, args: &[String]) -> Result<()> {
        // Collect flag pairs first so --config can be applied before them.
        let mut flags: Vec<(String, String)> = Vec::new();
        let mut config_path: Option<PathBuf> = None;
        let mut it = args.iter();
        while let Some(arg) = it.next() {
            let key = arg
                .strip_prefix("--")
                .ok_or_else(|| Error::argument(format!("expected a --flag, got '{arg}'")))?;
            let value = it
                .next()
                .ok_or_else(|| Error::argument(format!("flag --{key} needs a value")))?;
            if key == "config" {
                config_path = Some(PathBuf::from(value));
            } else {
                flags.push((key.to_string(), value.clone()));
            }
        }

        // Environment fallback for the default seed, below config and flags.
        if self.values.contains_key("seed") || self.values.contains_key("seeds") {
            if let Ok(seed) = std::env::var("LFM_SEED") {
                let key = if self.values.contains_key("seed") { "seed" } else { "seeds" };
                self.set(key, &seed)?;
            }
        }

        if let Some(path) = config_path {
            let text = std::fs::read_to_string(&path)?;
            for line in text.lines() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    Error::format(format!("config line is not key=value: '{line}'"))
                })?;
                self.set(key.trim(), value.trim())?;
            }
        }

        for (key, value) in &flags {
            self.set(key, value)?;
        }
        Ok(())
    }

    fn get(&self, key: &str) -> Result<String> {
        let (default, value) = self
            .values
            .get(key)
            .unwrap_or_else(|| panic!("key '{key}' not declared for {}", self.command));
        value
            .clone()
            .or_else(|| default.clone())
            .ok_or_else(|| Error::argument(format!("--{key} is required")))
    }

    fn usize_val(&self, key: &str) -> Result<usize> {
        self.get(key)?
            .parse()
            .map_err(|_| Error::argument(format!("--{key} must be a nonnegative integer")))
    }

    fn u64_val(&self, key: &str) -> Result<u64> {
        self.get(key)?
            .parse()
            .map_err(|_| Error::argument(format!("--{key} must be a nonnegative integer")))
    }

    fn f64_val(&self, key: &str) -> Result<f64> {
        self.get(key)?
            .parse()
            .map_err(|_| Error::argument(format!("--{key} must be a number")))
    }

    /// Log the fully resolved configuration on the diagnostic stream.
    fn log_resolved(&self) {
        eprintln!("config: command={}", self.command);
        for (key, (default, value)) in &self.values {
            if let Some(v) = value.as_ref().or(default.as_ref()) {
                eprintln!("config: {key}={v}");
            }
        }
    }
}

/// Entry point used by the binary: runs and maps errors to a one-line
/// diagnostic with a stable code prefix plus a nonzero exit status.
pub fn execute(args: &[String]) -> i32 {
    match run(args) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            1
        }
    }
}

/// Dispatch a full argument vector (without the program name).
pub fn run(args: &[String]) -> Result<()> {
    let Some(command) = args.first() else {
        print!("{USAGE}");
        return Ok(());
    };
    if command == "--help" || command == "help" {
        print!("{USAGE}");
        return Ok(());
    }
    let rest = &args[1..];
    match command.as_str() {
        "filter" => cmd_filter(rest),
        "spectrum" => cmd_spectrum(rest),
        "gen-data" => cmd_gen_data(rest),
        "mmd" => cmd_mmd(rest),
        "train" => cmd_train(rest),
        "ablation" => cmd_ablation(rest),
        other => Err(Error::argument(format!(
            "unknown command '{other}'; run 'lfm --help' for usage"
        ))),
    }
}

fn cmd_filter(args: &[String]) -> Result<()> {
    let mut opts = Options::new(
        "filter",
        &[
            ("in", None),
            ("out", None),
            ("mode", Some("lowpass")),
            ("m", Some("3")),
            ("padding", Some("reflect")),
            ("path", Some("spatial")),
        ],
    );
    opts.resolve(args)?;
    opts.log_resolved();

    let mode = opts.get("mode")?;
    if !matches!(mode.as_str(), "lowpass" | "highpass") {
        return Err(Error::argument(format!(
            "unknown mode '{mode}' (expected lowpass|highpass)"
        )));
    }
    let m = opts.usize_val("m")?;
    let padding: PaddingMode = opts.get("padding")?.parse()?;
    let path = opts.get("path")?;
    if !matches!(path.as_str(), "spatial" | "spectral") {
        return Err(Error::argument(format!("unknown path '{path}' (expected spatial|spectral)")));
    }
    if path == "spectral" && padding != PaddingMode::Circular {
        return Err(Error::argument(
            "--path spectral computes circular convolution by the convolution theorem, \
             so it is only valid with --padding circular",
        ));
    }

    // Validates m before any file is touched.
    let kernel = gaussian_kernel(m, Normalization::UnitSum)?;

    let image = read_pgm(Path::new(&opts.get("in")?))?;
    let low = match path.as_str() {
        "spatial" => lowpass(&image, m, padding)?,
        _ => filter_spectral(&image, &kernel)?,
    };
    let out = match mode.as_str() {
        "lowpass" => low,
        // Mid-gray encodes zero so negative deviations survive the file
        // format; decode with v - 0.5.
        _ => image.sub(&low)?.map(|v| v + 0.5),
    };
    write_pgm(Path::new(&opts.get("out")?), &out)
}

fn cmd_spectrum(args: &[String]) -> Result<()> {
    let mut opts = Options::new(
        "spectrum",
        &[("in", None), ("bands", Some("8")), ("out", Some(""))],
    );
    opts.resolve(args)?;
    opts.log_resolved();

    let image = read_pgm(Path::new(&opts.get("in")?))?;
    let stats = spectrum_stats(&dft2(&image), opts.usize_val("bands")?)?;

    let mut report = String::new();
    report.push_str(&format!("bands={}\n", stats.bands.len()));
    report.push_str(&format!("total_energy={:.12e}\n", stats.total_energy));
    report.push_str(&format!("dc_value={:.12e}\n", stats.dc_value));
    for (i, band) in stats.bands.iter().enumerate() {
        report.push_str(&format!("band{i}_lo={:.6}\n", band.lo));
        report.push_str(&format!("band{i}_hi={:.6}\n", band.hi));
        report.push_str(&format!("band{i}_energy={:.12e}\n", band.energy));
    }
    emit(&opts.get("out")?, &report)
}

fn cmd_gen_data(args: &[String]) -> Result<()> {
    let mut opts = Options::new(
        "gen-data",
        &[
            ("out", None),
            ("classes", Some("3")),
            ("per-class", Some("25")),
            ("texture", Some("checkerboard")),
            ("amplitude", Some("0.5")),
            ("illumination", Some("0.15")),
            ("size", Some("32")),
            ("seed", Some("7")),
        ],
    );
    opts.resolve(args)?;
    opts.log_resolved();

    let cfg = GenConfig {
        image_size: opts.usize_val("size")?,
        n_classes: opts.usize_val("classes")?,
        n_per_class_per_domain: opts.usize_val("per-class")?,
        texture_amplitude: opts.f64_val("amplitude")?,
        texture_kind: opts.get("texture")?.parse::<TextureKind>()?,
        illumination_gradient: opts.f64_val("illumination")?,
        seed: opts.u64_val("seed")?,
    };
    let out_dir = PathBuf::from(opts.get("out")?);
    let manifest = gen_dataset(&cfg, &out_dir)?;

    let count = |domain: DomainId, split: Split| {
        manifest
            .records
            .iter()
            .filter(|r| r.domain == domain && r.split == split)
            .count()
    };
    println!("images={}", manifest.records.len());
    for domain in [DomainId::A, DomainId::B] {
        println!("domain_{domain}_train={}", count(domain, Split::Train));
        println!("domain_{domain}_test={}", count(domain, Split::Test));
    }
    println!("manifest={}", out_dir.join("manifest.csv").display());
    Ok(())
}

fn cmd_mmd(args: &[String]) -> Result<()> {
    let mut opts = Options::new(
        "mmd",
        &[
            ("domain-a", None),
            ("domain-b", None),
            ("preproc", Some("none")),
            ("m", Some("3")),
            ("model", Some("")),
        ],
    );
    opts.resolve(args)?;
    opts.log_resolved();

    let images_a = read_pgm_dir(Path::new(&opts.get("domain-a")?))?;
    let images_b = read_pgm_dir(Path::new(&opts.get("domain-b")?))?;
    let preproc = Preproc::parse(&opts.get("preproc")?, opts.usize_val("m")?)?;

    let model_path = opts.get("model")?;
    let report = if model_path.is_empty() {
        domain_gap(&images_a, &images_b, &preproc, &Embedding::FlattenPixels)?
    } else {
        let model = read_checkpoint_any(Path::new(&model_path))?;
        domain_gap(&images_a, &images_b, &preproc, &Embedding::ModelFeatures(&model))?
    };
    print!("{}", report.to_records());
    Ok(())
}

struct LoadedData {
    source_train: Vec<Sample>,
    target_test: Vec<Sample>,
    n_classes: usize,
    image_hw: (usize, usize),
}

fn load_training_data(data_dir: &Path) -> Result<LoadedData> {
    let manifest = DatasetManifest::read(&data_dir.join("manifest.csv"))?;
    let source_train = manifest.load_samples(data_dir, DomainId::A, Split::Train)?;
    let target_test = manifest.load_samples(data_dir, DomainId::B, Split::Test)?;
    if source_train.is_empty() {
        return Err(Error::argument("dataset has no domain-A training images"));
    }
    let n_classes = manifest.records.iter().map(|r| r.class_id).max().unwrap_or(0) + 1;
    let first = &source_train[0].image;
    Ok(LoadedData {
        image_hw: (first.height(), first.width()),
        source_train,
        target_test,
        n_classes,
    })
}

fn lfm_config_from(opts: &Options, m: usize) -> Result<LfmConfig> {
    Ok(LfmConfig {
        m,
        padding: opts.get("lfm-padding")?.parse()?,
        stride: 1,
        normalization: opts.get("lfm-normalization")?.parse()?,
    })
}

fn train_one(
    data: &LoadedData,
    variant: Variant,
    lfm_config: LfmConfig,
    cfg: &TrainConfig,
    quiet: bool,
) -> Result<(Model<f64>, Vec<crate::nn::EpochRecord>)> {
    let spec = ModelSpec::toy(variant, data.n_classes, data.image_hw, lfm_config)?;
    let mut model = build_model::<f64>(&spec, cfg.seed)?;
    let target = if data.target_test.is_empty() { None } else { Some(&data.target_test[..]) };
    let log = train_source(&mut model, &data.source_train, target, cfg)?;
    if !quiet {
        for record in &log {
            match record.target_acc {
                Some(t) => println!(
                    "epoch={} loss={:.6} source_acc={:.4} target_acc={:.4}",
                    record.epoch, record.loss, record.source_acc, t
                ),
                None => println!(
                    "epoch={} loss={:.6} source_acc={:.4}",
                    record.epoch, record.loss, record.source_acc
                ),
            }
        }
    }
    Ok((model, log))
}

fn cmd_train(args: &[String]) -> Result<()> {
    let mut opts = Options::new(
        "train",
        &[
            ("data", None),
            ("out", None),
            ("arch", Some("baseline")),
            ("preproc", Some("none")),
            ("m", Some("3")),
            ("epochs", Some("50")),
            ("seed", Some("1")),
            ("lr", Some("0.02")),
            ("batch-size", Some("16")),
            ("momentum", Some("0.9")),
            ("lfm-padding", Some("reflect")),
            ("lfm-normalization", Some("unit_sum")),
            ("precision", Some("double")),
        ],
    );
    opts.resolve(args)?;
    opts.log_resolved();

    let data = load_training_data(Path::new(&opts.get("data")?))?;
    let variant: Variant = opts.get("arch")?.parse()?;
    let m = opts.usize_val("m")?;
    let precision: Precision = opts.get("precision")?.parse()?;
    let cfg = TrainConfig {
        epochs: opts.usize_val("epochs")?,
        batch_size: opts.usize_val("batch-size")?,
        learning_rate: opts.f64_val("lr")?,
        momentum: opts.f64_val("momentum")?,
        seed: opts.u64_val("seed")?,
        precision,
        preproc: Preproc::parse(&opts.get("preproc")?, m)?,
    };
    let lfm_config = lfm_config_from(&opts, m)?;
    let out = PathBuf::from(opts.get("out")?);

    match precision {
        Precision::Double => {
            let (model, _) = train_one(&data, variant, lfm_config, &cfg, false)?;
            write_checkpoint(&out, &model)?;
        }
        Precision::Single => {
            let spec = ModelSpec::toy(variant, data.n_classes, data.image_hw, lfm_config)?;
            let mut model = build_model::<f32>(&spec, cfg.seed)?;
            let target =
                if data.target_test.is_empty() { None } else { Some(&data.target_test[..]) };
            let log = train_source(&mut model, &data.source_train, target, &cfg)?;
            for record in &log {
                match record.target_acc {
                    Some(t) => println!(
                        "epoch={} loss={:.6} source_acc={:.4} target_acc={:.4}",
                        record.epoch, record.loss, record.source_acc, t
                    ),
                    None => println!(
                        "epoch={} loss={:.6} source_acc={:.4}",
                        record.epoch, record.loss, record.source_acc
                    ),
                }
            }
            write_checkpoint(&out, &model)?;
        }
    }
    println!("checkpoint={}", out.display());
    Ok(())
}

/// The five experiment arms, in the canonical reporting order.
pub const ABLATION_ARMS: [(&str, Variant, &str); 5] = [
    ("baseline", Variant::Baseline, "none"),
    ("highpass-preproc", Variant::Baseline, "highpass"),
    ("lowpass-preproc", Variant::Baseline, "lowpass"),
    ("ie", Variant::Ie, "none"),
    ("rsl", Variant::Rsl, "none"),
];

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn cmd_ablation(args: &[String]) -> Result<()> {
    let mut opts = Options::new(
        "ablation",
        &[
            ("data", None),
            ("out", None),
            ("seeds", Some("1,2,3,4,5")),
            ("epochs", Some("50")),
            ("lr", Some("0.02")),
            ("batch-size", Some("16")),
            ("momentum", Some("0.9")),
            ("m", Some("3")),
            ("lfm-padding", Some("reflect")),
            ("lfm-normalization", Some("unit_sum")),
        ],
    );
    opts.resolve(args)?;
    opts.log_resolved();

    let seeds: Vec<u64> = opts
        .get("seeds")?
        .split(',')
        .map(|s| s.trim().parse::<u64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::argument("--seeds must be a comma-separated list of integers"))?;
    if seeds.is_empty() {
        return Err(Error::argument("--seeds must name at least one seed"));
    }

    let data = load_training_data(Path::new(&opts.get("data")?))?;
    if data.target_test.is_empty() {
        return Err(Error::argument("dataset has no domain-B test images to evaluate on"));
    }
    let m = opts.usize_val("m")?;
    let lfm_config = lfm_config_from(&opts, m)?;
    let base_cfg = TrainConfig {
        epochs: opts.usize_val("epochs")?,
        batch_size: opts.usize_val("batch-size")?,
        learning_rate: opts.f64_val("lr")?,
        momentum: opts.f64_val("momentum")?,
        seed: 0,
        precision: Precision::Double,
        preproc: Preproc::None,
    };

    let mut machine = String::new();
    let mut summary: Vec<(String, f64, f64, f64)> = Vec::new();
    for (name, variant, preproc_kind) in ABLATION_ARMS {
        let mut accs = Vec::with_capacity(seeds.len());
        for &seed in &seeds {
            let cfg = TrainConfig {
                seed,
                preproc: Preproc::parse(preproc_kind, m)?,
                ..base_cfg
            };
            let (_, log) = train_one(&data, variant, lfm_config, &cfg, true)?;
            let acc = log.last().and_then(|r| r.target_acc).ok_or_else(|| {
                Error::argument("training produced no target accuracy")
            })?;
            eprintln!("progress: arm={name} seed={seed} target_acc={acc:.4}");
            machine.push_str(&format!("arm={name} seed={seed} target_acc={acc:.6}\n"));
            accs.push(acc);
        }
        let min = accs.iter().copied().fold(f64::INFINITY, f64::min);
        let max = accs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let med = median(&mut accs);
        machine.push_str(&format!(
            "arm={name} median={med:.6} min={min:.6} max={max:.6}\n"
        ));
        summary.push((name.to_string(), med, min, max));
    }

    let mut table = String::new();
    table.push_str(&format!(
        "{:<18} {:>8} {:>8} {:>8}\n",
        "arm", "median", "min", "max"
    ));
    for (name, med, min, max) in &summary {
        table.push_str(&format!("{name:<18} {med:>8.4} {min:>8.4} {max:>8.4}\n"));
    }
    print!("{table}");

    let mut file_contents = table;
    file_contents.push('\n');
    file_contents.push_str(&machine);
    atomic_write(Path::new(&opts.get("out")?), file_contents.as_bytes())
}

fn emit(out: &str, contents: &str) -> Result<()> {
    if out.is_empty() {
        print!("{contents}");
        Ok(())
    } else {
        atomic_write(Path::new(out), contents.as_bytes())
    }
}

/// Decode a mid-gray-offset high-pass image written by `lfm filter --mode
/// highpass` back to signed deviations.
pub fn decode_highpass(image: &Image) -> Image {
    image.map(|v| v - 0.5)
}
