//! Shared helpers for the integration test suites.

#![allow(dead_code)]

use std::path::PathBuf;

use lowfreq::image::Image;
use lowfreq::rng::Rng;
use lowfreq::tensor::Tensor;

/// Self-cleaning scratch directory under the system temp dir.
pub struct TempDir {
    path: PathBuf,
}

impl TempDir {
    pub fn new(tag: &str) -> Self {
        let path = std::env::temp_dir().join(format!(
            "lowfreq-{tag}-{}-{:?}",
            std::process::id(),
            std::thread::current().id()
        ));
        let _ = std::fs::remove_dir_all(&path);
        std::fs::create_dir_all(&path).expect("create temp dir");
        TempDir { path }
    }

    pub fn path(&self) -> &std::path::Path {
        &self.path
    }

    pub fn join(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }
}

impl Drop for TempDir {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.path);
    }
}

pub fn random_image(h: usize, w: usize, seed: u64) -> Image {
    let mut rng = Rng::new(seed);
    Image::from_fn(h, w, |_, _| rng.next_f64())
}

pub fn random_tensor(n: usize, c: usize, h: usize, w: usize, seed: u64) -> Tensor {
    let mut rng = Rng::new(seed);
    let data = (0..n * c * h * w).map(|_| rng.next_f64() - 0.5).collect();
    Tensor::from_data(n, c, h, w, data).unwrap()
}

pub fn random_vec(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = Rng::new(seed);
    (0..len).map(|_| rng.next_f64() - 0.5).collect()
}

/// Relative error with an absolute floor, the usual gradient-check metric.
///
/// The floor covers coordinates whose true gradient sits at or below the
/// round-off noise of a central difference on an O(1) loss
/// (~1e-16/eps = 1e-11); for those, this still demands absolute agreement
/// within 1e-10.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-4)
}

/// Central finite difference of `f` at coordinate `i` of `base`.
pub fn central_difference(
    base: &[f64],
    i: usize,
    eps: f64,
    mut f: impl FnMut(&[f64]) -> f64,
) -> f64 {
    let mut plus = base.to_vec();
    plus[i] += eps;
    let mut minus = base.to_vec();
    minus[i] -= eps;
    (f(&plus) - f(&minus)) / (2.0 * eps)
}

/// Assert `analytic[i]` matches the central difference of `f` for every
/// coordinate of `base`, at `tol` relative error.
pub fn assert_gradient_matches(
    base: &[f64],
    analytic: &[f64],
    eps: f64,
    tol: f64,
    what: &str,
    mut f: impl FnMut(&[f64]) -> f64,
) {
    assert_eq!(base.len(), analytic.len(), "{what}: gradient length");
    for (i, &a) in analytic.iter().enumerate() {
        let numeric = central_difference(base, i, eps, &mut f);
        let rel = relative_error(a, numeric);
        assert!(rel < tol, "{what}[{i}]: analytic {a} vs numeric {numeric} (rel {rel:.3e})");
    }
}
