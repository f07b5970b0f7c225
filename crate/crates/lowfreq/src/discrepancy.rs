//! Maximum mean discrepancy between two samples, used as a scalar
//! domain-gap meter on raw or filtered data.
//!
//! The biased V-statistic is used throughout so that identical samples give
//! exactly zero and every per-bandwidth estimate is nonnegative. Kernel
//! values are accumulated in sorted order, which makes reports invariant to
//! sample permutation down to the last bit.

use crate::error::{Error, Result};
use crate::image::Image;
use crate::nn::{Model, Preproc};
use crate::rng::Rng;
use crate::tensor::Tensor;

/// MMD^2 report: the headline value is the mean of the per-bandwidth
/// estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct MmdReport {
    pub mmd2: f64,
    pub bandwidths: Vec<f64>,
    pub per_bandwidth: Vec<f64>,
    pub n_source: usize,
    pub n_target: usize,
}

impl MmdReport {
    /// Line-delimited key=value serialization.
    pub fn to_records(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("mmd2={:.12e}\n", self.mmd2));
        out.push_str(&format!("n_source={}\n", self.n_source));
        out.push_str(&format!("n_target={}\n", self.n_target));
        for (i, (bw, value)) in self.bandwidths.iter().zip(&self.per_bandwidth).enumerate() {
            out.push_str(&format!("bandwidth{i}={bw:.12e}\n"));
            out.push_str(&format!("per_bandwidth{i}={value:.12e}\n"));
        }
        out
    }
}

fn check_dims(x: &[Vec<f64>], y: &[Vec<f64>]) -> Result<usize> {
    let dim = x
        .first()
        .or_else(|| y.first())
        .map(Vec::len)
        .ok_or_else(|| Error::argument("both samples are empty"))?;
    for v in x.iter().chain(y) {
        if v.len() != dim {
            return Err(Error::argument("all vectors must share one dimension"));
        }
    }
    Ok(dim)
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Median pairwise Euclidean distance over the pooled sample; the standard
/// bandwidth heuristic. Pools larger than 1000 points are subsampled
/// deterministically. Returns 1.0 when the median distance is zero.
pub fn median_heuristic(x: &[Vec<f64>], y: &[Vec<f64>]) -> Result<f64> {
    check_dims(x, y)?;
    let pooled: Vec<&Vec<f64>> = x.iter().chain(y).collect();
    if pooled.len() < 2 {
        return Err(Error::argument("median heuristic needs at least two points"));
    }
    const MAX_POINTS: usize = 1000;
    let selected: Vec<&Vec<f64>> = if pooled.len() > MAX_POINTS {
        let mut indices: Vec<usize> = (0..pooled.len()).collect();
        Rng::new(0x6d65_6469_616e).shuffle(&mut indices);
        indices.truncate(MAX_POINTS);
        indices.sort_unstable();
        indices.into_iter().map(|i| pooled[i]).collect()
    } else {
        pooled
    };
    let mut distances = Vec::with_capacity(selected.len() * (selected.len() - 1) / 2);
    for i in 0..selected.len() {
        for j in i + 1..selected.len() {
            distances.push(squared_distance(selected[i], selected[j]).sqrt());
        }
    }
    distances.sort_by(f64::total_cmp);
    let n = distances.len();
    let median = if n % 2 == 1 {
        distances[n / 2]
    } else {
        0.5 * (distances[n / 2 - 1] + distances[n / 2])
    };
    Ok(if median == 0.0 { 1.0 } else { median })
}

/// Sum in ascending value order: the result depends only on the multiset of
/// addends, never on sample ordering.
fn ordered_sum(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum()
}

fn mean_kernel(a: &[Vec<f64>], b: &[Vec<f64>], sigma: f64) -> f64 {
    let inv = 1.0 / (2.0 * sigma * sigma);
    let mut values = Vec::with_capacity(a.len() * b.len());
    for va in a {
        for vb in b {
            values.push((-squared_distance(va, vb) * inv).exp());
        }
    }
    ordered_sum(values) / (a.len() * b.len()) as f64
}

/// Biased MMD^2 estimate per bandwidth, averaged across bandwidths:
/// `mean k(X,X) + mean k(Y,Y) - 2 mean k(X,Y)` with the Gaussian kernel
/// `k(a,b) = exp(-|a-b|^2 / (2 sigma^2))`.
pub fn mmd2_biased(x: &[Vec<f64>], y: &[Vec<f64>], bandwidths: &[f64]) -> Result<MmdReport> {
    check_dims(x, y)?;
    if x.is_empty() || y.is_empty() {
        return Err(Error::argument("both samples must be nonempty"));
    }
    if bandwidths.is_empty() {
        return Err(Error::argument("at least one bandwidth required"));
    }
    if bandwidths.iter().any(|&b| !(b.is_finite() && b > 0.0)) {
        return Err(Error::argument("bandwidths must be positive"));
    }
    let mut per_bandwidth = Vec::with_capacity(bandwidths.len());
    for &sigma in bandwidths {
        let xx = mean_kernel(x, x, sigma);
        let yy = mean_kernel(y, y, sigma);
        let xy = mean_kernel(x, y, sigma);
        per_bandwidth.push(xx + yy - 2.0 * xy);
    }
    let mmd2 = per_bandwidth.iter().sum::<f64>() / per_bandwidth.len() as f64;
    Ok(MmdReport {
        mmd2,
        bandwidths: bandwidths.to_vec(),
        per_bandwidth,
        n_source: x.len(),
        n_target: y.len(),
    })
}

/// [`mmd2_biased`] with bandwidths `{s/2, s, 2s}` around the median
/// heuristic.
pub fn mmd2_biased_auto(x: &[Vec<f64>], y: &[Vec<f64>]) -> Result<MmdReport> {
    let s = median_heuristic(x, y)?;
    mmd2_biased(x, y, &[0.5 * s, s, 2.0 * s])
}

/// How images are turned into vectors before the kernel two-sample estimate.
pub enum Embedding<'a> {
    /// Row-major pixel flattening.
    FlattenPixels,
    /// Pooled pre-classifier features of a trained model.
    ModelFeatures(&'a Model<f64>),
}

fn embed(images: &[Image], embedding: &Embedding) -> Result<Vec<Vec<f64>>> {
    match embedding {
        Embedding::FlattenPixels => Ok(images.iter().map(|i| i.data().to_vec()).collect()),
        Embedding::ModelFeatures(model) => {
            let mut out = Vec::with_capacity(images.len());
            for chunk in images.chunks(64) {
                let x: Tensor = Tensor::from_images(chunk)?;
                let feats = model.features(&x)?;
                let (n, c, _, _) = feats.shape();
                for ni in 0..n {
                    out.push(feats.data()[ni * c..(ni + 1) * c].to_vec());
                }
            }
            Ok(out)
        }
    }
}

/// Domain gap between two image sets: preprocess each image, embed, and
/// report the biased multi-bandwidth MMD^2.
pub fn domain_gap(
    images_a: &[Image],
    images_b: &[Image],
    preproc: &Preproc,
    embedding: &Embedding,
) -> Result<MmdReport> {
    if images_a.is_empty() || images_b.is_empty() {
        return Err(Error::argument("both image sets must be nonempty"));
    }
    let (h, w) = (images_a[0].height(), images_a[0].width());
    for img in images_a.iter().chain(images_b) {
        if img.height() != h || img.width() != w {
            return Err(Error::argument("all images must share one size"));
        }
    }
    let prep = |images: &[Image]| -> Result<Vec<Image>> {
        images.iter().map(|i| preproc.apply(i)).collect()
    };
    let a = embed(&prep(images_a)?, embedding)?;
    let b = embed(&prep(images_b)?, embedding)?;
    mmd2_biased_auto(&a, &b)
}
