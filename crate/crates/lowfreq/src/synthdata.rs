//! Deterministic two-domain, K-class image generator.
//!
//! Class identity is carried by low-frequency content (filled shapes) and
//! domain identity by high-frequency content (texture injected only into
//! domain B, confined to the top third of radial frequencies), so the
//! frequency split between "what" and "where from" holds by construction
//! and filtering experiments measure mechanism rather than dataset luck.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::nn::Sample;
use crate::rng::Rng;
use crate::spectral::{dft2, idft2, max_radial_frequency, radial_frequency};
use crate::tensorio::{atomic_write, read_pgm, write_pgm};

const BACKGROUND: f64 = 0.1;
const FOREGROUND: f64 = 0.9;

/// High-frequency texture family injected into domain B.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TextureKind {
    /// Alternating pattern at the highest representable frequency.
    Checkerboard,
    /// Noise whose spectrum is confined to the top third of radial bands.
    BandlimitedNoise,
}

impl FromStr for TextureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "checkerboard" => Ok(TextureKind::Checkerboard),
            "bandlimited_noise" => Ok(TextureKind::BandlimitedNoise),
            other => Err(Error::argument(format!(
                "unknown texture '{other}' (expected checkerboard|bandlimited_noise)"
            ))),
        }
    }
}

impl fmt::Display for TextureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TextureKind::Checkerboard => "checkerboard",
            TextureKind::BandlimitedNoise => "bandlimited_noise",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DomainId {
    A,
    B,
}

impl FromStr for DomainId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" => Ok(DomainId::A),
            "B" => Ok(DomainId::B),
            other => Err(Error::argument(format!("unknown domain '{other}' (expected A|B)"))),
        }
    }
}

impl fmt::Display for DomainId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DomainId::A => "A",
            DomainId::B => "B",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::argument(format!("unknown split '{other}' (expected train|test)"))),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

/// Generator configuration; every output byte is a pure function of it.
#[derive(Clone, Debug, PartialEq)]
pub struct GenConfig {
    pub image_size: usize,
    /// 2..=4 classes drawn from {disk, square, triangle, cross}.
    pub n_classes: usize,
    pub n_per_class_per_domain: usize,
    /// Peak-to-peak swing of the injected texture, in pixel units.
    pub texture_amplitude: f64,
    pub texture_kind: TextureKind,
    /// Peak-to-peak swing of the smooth illumination gradient both domains
    /// receive.
    pub illumination_gradient: f64,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            image_size: 32,
            n_classes: 3,
            n_per_class_per_domain: 25,
            texture_amplitude: 0.5,
            texture_kind: TextureKind::Checkerboard,
            illumination_gradient: 0.15,
            seed: 7,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.image_size < 8 {
            return Err(Error::argument("image size must be at least 8"));
        }
        if !(2..=4).contains(&self.n_classes) {
            return Err(Error::argument("n_classes must be between 2 and 4"));
        }
        if self.n_per_class_per_domain == 0 {
            return Err(Error::argument("need at least one image per class per domain"));
        }
        if !(0.0..=1.0).contains(&self.texture_amplitude) {
            return Err(Error::argument("texture amplitude must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.illumination_gradient) {
            return Err(Error::argument("illumination gradient must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// One generated file.
#[derive(Clone, Debug, PartialEq)]
pub struct ManifestRecord {
    /// Path relative to the manifest's directory.
    pub path: String,
    pub class_id: usize,
    pub domain: DomainId,
    pub split: Split,
}

/// Listing of a generated dataset. `seed` is the generation seed (zero for
/// manifests loaded from disk, where it is not recorded).
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetManifest {
    pub seed: u64,
    pub records: Vec<ManifestRecord>,
}

impl DatasetManifest {
    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&format!("{},{},{},{}\n", r.path, r.class_id, r.domain, r.split));
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        atomic_write(path, self.to_lines().as_bytes())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<DatasetManifest> {
        let text = std::fs::read_to_string(path)?;
        let mut records = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(Error::format(format!(
                    "manifest line {} has {} fields, expected 4",
                    lineno + 1,
                    fields.len()
                )));
            }
            records.push(ManifestRecord {
                path: fields[0].to_string(),
                class_id: fields[1]
                    .parse()
                    .map_err(|_| Error::format(format!("bad class id on line {}", lineno + 1)))?,
                domain: fields[2].parse()?,
                split: fields[3].parse()?,
            });
        }
        Ok(DatasetManifest { seed: 0, records })
    }

    /// Load the images of one (domain, split) selection as labeled samples.
    pub fn load_samples(
        &self,
        base_dir: &Path,
        domain: DomainId,
        split: Split,
    ) -> Result<Vec<Sample>> {
        let mut out = Vec::new();
        for r in &self.records {
            if r.domain == domain && r.split == split {
                out.push(Sample { image: read_pgm(&base_dir.join(&r.path))?, label: r.class_id });
            }
        }
        Ok(out)
    }
}

// Shape extents are chosen so the four classes differ in both gross area
// and spatial layout; the template classifier in the tests needs the
// between-class distance to dominate the position/scale jitter.
fn shape_membership(class_id: usize, size: f64, scale: f64) -> impl Fn(f64, f64) -> bool {
    let disk_r = 0.25 * size * scale;
    let square_h = 0.30 * size * scale;
    let tri_r = 0.28 * size * scale;
    let cross_arm = 0.36 * size * scale;
    let cross_bar = 0.08 * size * scale;
    move |dx: f64, dy: f64| -> bool {
        match class_id {
            0 => dx * dx + dy * dy <= disk_r * disk_r,
            1 => dx.abs() <= square_h && dy.abs() <= square_h,
            2 => {
                // Equilateral triangle, apex up (screen y grows downward).
                let v = [
                    (0.0, -tri_r),
                    (0.866_025_403_784_438_6 * tri_r, 0.5 * tri_r),
                    (-0.866_025_403_784_438_6 * tri_r, 0.5 * tri_r),
                ];
                let side = |a: (f64, f64), b: (f64, f64)| -> f64 {
                    (b.0 - a.0) * (dy - a.1) - (b.1 - a.1) * (dx - a.0)
                };
                let s0 = side(v[0], v[1]);
                let s1 = side(v[1], v[2]);
                let s2 = side(v[2], v[0]);
                (s0 >= 0.0 && s1 >= 0.0 && s2 >= 0.0) || (s0 <= 0.0 && s1 <= 0.0 && s2 <= 0.0)
            }
            _ => {
                (dx.abs() <= cross_bar && dy.abs() <= cross_arm)
                    || (dy.abs() <= cross_bar && dx.abs() <= cross_arm)
            }
        }
    }
}

/// Render class `class_id` at an explicit center and scale: an antialiased
/// filled shape, foreground 0.9 on background 0.1, 4x4 subsamples per pixel.
pub fn render_shape_at(
    class_id: usize,
    size: usize,
    center: (f64, f64),
    scale: f64,
) -> Image {
    let member = shape_membership(class_id, size as f64, scale);
    Image::from_fn(size, size, |y, x| {
        let mut hits = 0u32;
        for sy in 0..4 {
            for sx in 0..4 {
                let py = y as f64 + (sy as f64 + 0.5) / 4.0;
                let px = x as f64 + (sx as f64 + 0.5) / 4.0;
                if member(px - center.1, py - center.0) {
                    hits += 1;
                }
            }
        }
        BACKGROUND + (FOREGROUND - BACKGROUND) * hits as f64 / 16.0
    })
}

/// Render with randomized center (+-10% of size) and scale (+-15%).
pub fn render_shape(class_id: usize, size: usize, rng: &mut Rng) -> Image {
    let half = size as f64 / 2.0;
    let jitter = 0.10 * size as f64;
    let cy = half + rng.range_f64(-jitter, jitter);
    let cx = half + rng.range_f64(-jitter, jitter);
    let scale = 1.0 + rng.range_f64(-0.15, 0.15);
    render_shape_at(class_id, size, (cy, cx), scale)
}

/// Noise confined to the top third of radial frequency bands, normalized to
/// unit RMS.
fn bandlimited_noise(size: usize, rng: &mut Rng) -> Image {
    let white = Image::from_fn(size, size, |_, _| rng.normal());
    let mut field = dft2(&white);
    let cutoff = max_radial_frequency() * 2.0 / 3.0;
    for u in 0..size {
        for v in 0..size {
            if radial_frequency(u, v, size, size) < cutoff {
                field.set(u, v, num_complex::Complex64::new(0.0, 0.0));
            }
        }
    }
    let (noise, _) = idft2(&field);
    let rms = (noise.energy() / (size * size) as f64).sqrt();
    if rms > 0.0 {
        noise.map(|v| v / rms)
    } else {
        noise
    }
}

/// Apply domain style. Both domains receive a smooth linear illumination
/// gradient in a random direction; domain B additionally receives
/// high-frequency texture. The result is clamped to [0, 1].
pub fn apply_domain_style(
    image: &Image,
    domain: DomainId,
    cfg: &GenConfig,
    rng: &mut Rng,
) -> Image {
    let (h, w) = (image.height(), image.width());
    let angle = rng.range_f64(0.0, 2.0 * std::f64::consts::PI);
    let (cos, sin) = (angle.cos(), angle.sin());
    // Normalize so the gradient's swing over the image equals the
    // configured amplitude regardless of direction.
    let norm = cos.abs() + sin.abs();
    let mut styled = Image::from_fn(h, w, |y, x| {
        let nx = x as f64 / (w - 1) as f64 - 0.5;
        let ny = y as f64 / (h - 1) as f64 - 0.5;
        image.get(y, x) + cfg.illumination_gradient * (nx * cos + ny * sin) / norm
    });

    if domain == DomainId::B && cfg.texture_amplitude > 0.0 {
        // Half the configured amplitude in each direction keeps the injected
        // signal (mostly) clear of the [0, 1] clamp at the 0.1/0.9 shape
        // levels, so it stays confined to the top frequency bands.
        let swing = 0.5 * cfg.texture_amplitude;
        match cfg.texture_kind {
            TextureKind::Checkerboard => {
                for y in 0..h {
                    for x in 0..w {
                        let sign = if (y + x) % 2 == 0 { 1.0 } else { -1.0 };
                        styled.set(y, x, styled.get(y, x) + swing * sign);
                    }
                }
            }
            TextureKind::BandlimitedNoise => {
                let noise = bandlimited_noise(h.max(w), rng);
                for y in 0..h {
                    for x in 0..w {
                        styled.set(y, x, styled.get(y, x) + swing * noise.get(y, x));
                    }
                }
            }
        }
    }
    styled.map(|v| v.clamp(0.0, 1.0))
}

/// Generate the full dataset under `out_dir`: PGM images in per-domain
/// subdirectories plus `manifest.csv`. The split is 80/20 train/test,
/// stratified by class within each domain. Deterministic in `cfg`.
pub fn gen_dataset(cfg: &GenConfig, out_dir: &Path) -> Result<DatasetManifest> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir.join("A"))?;
    std::fs::create_dir_all(out_dir.join("B"))?;

    let n = cfg.n_per_class_per_domain;
    let train_count = n * 4 / 5;
    let mut records = Vec::new();
    let mut file_index = 0u64;
    for domain in [DomainId::A, DomainId::B] {
        for class_id in 0..cfg.n_classes {
            for i in 0..n {
                // Per-file stream: generation is order-independent.
                let mut rng = Rng::stream(cfg.seed, file_index);
                file_index += 1;
                let shape = render_shape(class_id, cfg.image_size, &mut rng);
                let styled = apply_domain_style(&shape, domain, cfg, &mut rng);
                let rel = format!("{domain}/img_c{class_id}_{i:04}.pgm");
                write_pgm(&out_dir.join(&rel), &styled)?;
                records.push(ManifestRecord {
                    path: rel,
                    class_id,
                    domain,
                    split: if i < train_count { Split::Train } else { Split::Test },
                });
            }
        }
    }
    let manifest = DatasetManifest { seed: cfg.seed, records };
    manifest.write(&out_dir.join("manifest.csv"))?;
    Ok(manifest)
}
