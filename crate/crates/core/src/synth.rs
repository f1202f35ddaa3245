//! Ground-truth 2-D Gaussian mixtures and generator noise.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array2, ArrayView1};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix_game::MixedStrategy;

pub type Point = [f64; 2];
pub type Cov = [[f64; 2]; 2];

/// Lower Cholesky factor of a 2×2 SPD matrix.
fn cholesky(c: &Cov) -> Option<Cov> {
    if (c[0][1] - c[1][0]).abs() > 1e-12 * (c[0][1].abs() + c[1][0].abs()).max(1.0) {
        return None;
    }
    let l00 = c[0][0].sqrt();
    if !(l00 > 0.0 && l00.is_finite()) {
        return None;
    }
    let l10 = c[1][0] / l00;
    let d = c[1][1] - l10 * l10;
    if !(d > 0.0) {
        return None;
    }
    Some([[l00, 0.0], [l10, d.sqrt()]])
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    weights: MixedStrategy,
    means: Vec<Point>,
    covs: Vec<Cov>,
    chol: Vec<Cov>,
}

impl GaussianMixture {
    pub fn new(weights: MixedStrategy, means: Vec<Point>, covs: Vec<Cov>) -> Result<Self> {
        if means.is_empty() || means.len() != covs.len() || weights.len() != means.len() {
            return Err(Error::Invalid(format!(
                "mixture needs equally many weights ({}), means ({}) and covariances ({})",
                weights.len(),
                means.len(),
                covs.len()
            )));
        }
        let chol = covs
            .iter()
            .enumerate()
            .map(|(k, c)| cholesky(c).ok_or_else(|| Error::Invalid(format!("covariance {k} is not SPD"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            weights,
            means,
            covs,
            chol,
        })
    }

    /// Equal-weight mixture with isotropic `sigma² I` components.
    pub fn isotropic(means: Vec<Point>, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::Invalid(format!("sigma must be positive, got {sigma}")));
        }
        let k = means.len();
        let s2 = sigma * sigma;
        Self::new(MixedStrategy::uniform(k.max(1)), means, vec![[[s2, 0.0], [0.0, s2]]; k])
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    pub fn weights(&self) -> &MixedStrategy {
        &self.weights
    }

    pub fn means(&self) -> &[Point] {
        &self.means
    }

    pub fn covs(&self) -> &[Cov] {
        &self.covs
    }

    pub fn dim(&self) -> usize {
        2
    }

    /// Analytic mixture mean.
    pub fn mean(&self) -> Point {
        let mut m = [0.0; 2];
        for (w, mu) in self.weights.probs().iter().zip(&self.means) {
            m[0] += w * mu[0];
            m[1] += w * mu[1];
        }
        m
    }

    /// Analytic mixture covariance.
    pub fn covariance(&self) -> Cov {
        let m = self.mean();
        let mut c = [[0.0; 2]; 2];
        for ((w, mu), s) in self.weights.probs().iter().zip(&self.means).zip(&self.covs) {
            for a in 0..2 {
                for b in 0..2 {
                    c[a][b] += w * (s[a][b] + (mu[a] - m[a]) * (mu[b] - m[b]));
                }
            }
        }
        c
    }

    fn pick<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (k, w) in self.weights.probs().iter().enumerate() {
            acc += w;
            if u < acc {
                return k;
            }
        }
        // Round-off can leave the cumulative sum just below 1.
        self.weights.probs().iter().rposition(|w| *w > 0.0).unwrap_or(0)
    }

    /// `n` points (rows) with the component each came from.
    pub fn sample_labeled<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> (Array2<f64>, Vec<usize>) {
        let mut out = Array2::zeros((n, 2));
        let mut labels = Vec::with_capacity(n);
        for mut row in out.rows_mut() {
            let k = self.pick(rng);
            let (e0, e1): (f64, f64) = (StandardNormal.sample(rng), StandardNormal.sample(rng));
            let l = &self.chol[k];
            row[0] = self.means[k][0] + l[0][0] * e0;
            row[1] = self.means[k][1] + l[1][0] * e0 + l[1][1] * e1;
            labels.push(k);
        }
        (out, labels)
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Array2<f64> {
        self.sample_labeled(n, rng).0
    }

    /// Mahalanobis distance from `x` to component `k`.
    pub fn mahalanobis(&self, x: ArrayView1<'_, f64>, k: usize) -> f64 {
        let l = &self.chol[k];
        let d0 = x[0] - self.means[k][0];
        let d1 = x[1] - self.means[k][1];
        let y0 = d0 / l[0][0];
        let y1 = (d1 - l[1][0] * y0) / l[1][1];
        (y0 * y0 + y1 * y1).sqrt()
    }

    /// Closest component in Mahalanobis distance, if within `k_sigma`.
    pub fn mode_assignment(&self, x: ArrayView1<'_, f64>, k_sigma: f64) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for k in 0..self.len() {
            let d = self.mahalanobis(x, k);
            if best.is_none_or(|(_, b)| d < b) {
                best = Some((k, d));
            }
        }
        best.filter(|(_, d)| *d <= k_sigma).map(|(k, _)| k)
    }
}

/// `√k × √k` lattice centred on the origin.
pub fn make_grid(k: usize, spacing: f64, sigma: f64) -> Result<GaussianMixture> {
    let side = (k as f64).sqrt().round() as usize;
    if k == 0 || side * side != k {
        return Err(Error::Invalid(format!("grid size {k} is not a perfect square")));
    }
    if !(spacing > 0.0) {
        return Err(Error::Invalid(format!("spacing must be positive, got {spacing}")));
    }
    let centre = (side as f64 - 1.0) / 2.0;
    let means = (0..k)
        .map(|idx| {
            let (i, j) = (idx / side, idx % side);
            [(j as f64 - centre) * spacing, (i as f64 - centre) * spacing]
        })
        .collect();
    GaussianMixture::isotropic(means, sigma)
}

/// `k` modes evenly spaced on a circle, the first at angle 0.
pub fn make_annulus(k: usize, radius: f64, sigma: f64) -> Result<GaussianMixture> {
    if k == 0 || !(radius > 0.0) {
        return Err(Error::Invalid("annulus needs k >= 1 and radius > 0".into()));
    }
    let means = (0..k)
        .map(|i| {
            let a = 2.0 * PI * i as f64 / k as f64;
            [radius * a.cos(), radius * a.sin()]
        })
        .collect();
    GaussianMixture::isotropic(means, sigma)
}

/// Modes uniform in `[-location_scale, location_scale]²`, each with covariance
/// `A Aᵀ + 0.01 · cov_scale · I` where `A` has i.i.d. `N(0, cov_scale)` entries.
pub fn make_random<R: Rng + ?Sized>(k: usize, rng: &mut R, location_scale: f64, cov_scale: f64) -> Result<GaussianMixture> {
    if k == 0 || !(location_scale > 0.0 && cov_scale > 0.0) {
        return Err(Error::Invalid("random mixture needs k >= 1 and positive scales".into()));
    }
    let sd = cov_scale.sqrt();
    let mut means = Vec::with_capacity(k);
    let mut covs = Vec::with_capacity(k);
    for _ in 0..k {
        means.push([
            rng.random_range(-location_scale..=location_scale),
            rng.random_range(-location_scale..=location_scale),
        ]);
        let a: [f64; 4] = std::array::from_fn(|_| sd * Distribution::<f64>::sample(&StandardNormal, rng));
        let reg = 0.01 * cov_scale;
        let c00 = a[0] * a[0] + a[1] * a[1] + reg;
        let c01 = a[0] * a[2] + a[1] * a[3];
        let c11 = a[2] * a[2] + a[3] * a[3] + reg;
        covs.push([[c00, c01], [c01, c11]]);
    }
    GaussianMixture::new(MixedStrategy::uniform(k), means, covs)
}

/// Serializable description of a data mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MixtureSpec {
    Grid {
        #[serde(default = "default_k")]
        k: usize,
        #[serde(default = "default_spacing")]
        spacing: f64,
        #[serde(default = "default_sigma")]
        sigma: f64,
    },
    Annulus {
        #[serde(default = "default_k")]
        k: usize,
        #[serde(default = "default_spacing")]
        radius: f64,
        #[serde(default = "default_sigma")]
        sigma: f64,
    },
    Random {
        #[serde(default = "default_k")]
        k: usize,
        #[serde(default = "default_spacing")]
        location_scale: f64,
        #[serde(default = "default_cov_scale")]
        cov_scale: f64,
        /// Seed for the mode layout, independent of the run seed.
        #[serde(default)]
        layout_seed: u64,
    },
}

fn default_k() -> usize {
    9
}
fn default_spacing() -> f64 {
    2.0
}
fn default_sigma() -> f64 {
    0.05
}
fn default_cov_scale() -> f64 {
    0.0025
}

impl Default for MixtureSpec {
    fn default() -> Self {
        MixtureSpec::Grid {
            k: default_k(),
            spacing: default_spacing(),
            sigma: default_sigma(),
        }
    }
}

impl MixtureSpec {
    pub fn build(&self) -> Result<GaussianMixture> {
        match *self {
            MixtureSpec::Grid { k, spacing, sigma } => make_grid(k, spacing, sigma),
            MixtureSpec::Annulus { k, radius, sigma } => make_annulus(k, radius, sigma),
            MixtureSpec::Random {
                k,
                location_scale,
                cov_scale,
                layout_seed,
            } => {
                let mut rng = crate::seed::rng_from(layout_seed, &[]);
                make_random(k, &mut rng, location_scale, cov_scale)
            }
        }
    }
}

/// Generator input distribution `p_z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseDist {
    StandardNormal { dim: usize },
    UniformCube { dim: usize, half_width: f64 },
}

impl Default for NoiseDist {
    fn default() -> Self {
        NoiseDist::StandardNormal { dim: 2 }
    }
}

impl NoiseDist {
    pub fn dim(&self) -> usize {
        match *self {
            NoiseDist::StandardNormal { dim } | NoiseDist::UniformCube { dim, .. } => dim,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Array2<f64> {
        match *self {
            NoiseDist::StandardNormal { dim } => Array2::from_shape_simple_fn((n, dim), || StandardNormal.sample(rng)),
            NoiseDist::UniformCube { dim, half_width } => {
                Array2::from_shape_simple_fn((n, dim), || rng.random_range(-half_width..=half_width))
            }
        }
    }
}

/// CSV with columns `x,y,component`.
pub fn write_labeled_csv(points: &Array2<f64>, labels: &[usize], path: &Path) -> Result<()> {
    let mut out = String::from("x,y,component\n");
    for (row, k) in points.rows().into_iter().zip(labels) {
        let _ = writeln!(out, "{},{},{}", row[0], row[1], k);
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
