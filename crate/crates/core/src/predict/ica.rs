//! Fixed-point ICA with a log-cosh contrast and symmetric decorrelation.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub const DEFAULT_COMPONENTS: usize = 15;
pub const ICA_TOLERANCE: f64 = 1e-6;
pub const ICA_MAX_ITER: usize = 500;

/// A fitted centering + whitening + rotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcaTransform {
    pub component_count: usize,
    pub mean: Vec<f64>,
    /// `k × n`, maps centered features to whitened principal coordinates.
    pub whitening: Vec<Vec<f64>>,
    /// `k × n`, rotation composed with whitening.
    pub unmixing: Vec<Vec<f64>>,
    pub seed: u64,
    pub iterations: usize,
    /// The rotation did not converge; `unmixing` equals `whitening`.
    pub degraded: bool,
}

impl IcaTransform {
    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        self.unmixing
            .iter()
            .map(|row| {
                row.iter()
                    .zip(x)
                    .zip(&self.mean)
                    .map(|((w, v), m)| w * (v - m))
                    .sum()
            })
            .collect()
    }

    pub fn transform_rows(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.transform(r)).collect()
    }
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

/// `(W Wᵀ)^{-1/2} W`
fn symmetric_decorrelation(w: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(w * w.transpose());
    let inv_sqrt = DMatrix::from_diagonal(
        &eig.eigenvalues
            .map(|d| 1.0 / d.max(f64::MIN_POSITIVE).sqrt()),
    );
    &eig.eigenvectors * inv_sqrt * eig.eigenvectors.transpose() * w
}

/// Fits `k` independent components to the rows of `features` (`m × n`).
pub fn fit_ica(features: &[Vec<f64>], k: usize, seed: u64) -> Result<IcaTransform> {
    let m = features.len();
    let n = features.first().map_or(0, Vec::len);
    if k == 0 {
        return Err(Error::input("component count must be positive"));
    }
    if m <= k {
        return Err(Error::input(format!(
            "ICA with {k} components needs more than {k} rows, got {m}"
        )));
    }
    if features.iter().any(|r| r.len() != n) {
        return Err(Error::input("feature rows have different lengths"));
    }
    if features.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::input("features contain non-finite values"));
    }

    let x = DMatrix::from_fn(m, n, |i, j| features[i][j]);
    let mean: DVector<f64> = DVector::from_fn(n, |j, _| x.column(j).mean());
    let xc = DMatrix::from_fn(m, n, |i, j| x[(i, j)] - mean[j]);
    let cov = xc.transpose() * &xc / m as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = eig.eigenvalues[order[0]].max(0.0);
    let kth = if k <= n {
        eig.eigenvalues[order[k - 1]]
    } else {
        0.0
    };
    if k > n || kth.is_nan() || kth <= 1e-10 * top.max(f64::MIN_POSITIVE) || top == 0.0 {
        return Err(Error::input(format!(
            "centered features have rank below {k}; choose fewer components"
        )));
    }
    let whitening = DMatrix::from_fn(k, n, |i, j| {
        let c = order[i];
        eig.eigenvectors[(j, c)] / eig.eigenvalues[c].sqrt()
    });
    let z = &whitening * xc.transpose(); // k × m

    let mut r = rng::keyed_rng(&[seed, 0x1ca]);
    let init = DMatrix::from_fn(k, k, |_, _| StandardNormal.sample(&mut r));
    let mut w = symmetric_decorrelation(&init);
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=ICA_MAX_ITER {
        iterations = it;
        let wz = &w * &z;
        let g = wz.map(f64::tanh);
        let g_prime_mean = DVector::from_fn(k, |i, _| {
            g.row(i).iter().map(|t| 1.0 - t * t).sum::<f64>() / m as f64
        });
        let next = &g * z.transpose() / m as f64 - DMatrix::from_diagonal(&g_prime_mean) * &w;
        let next = symmetric_decorrelation(&next);
        let change = (&next * w.transpose())
            .diagonal()
            .iter()
            .map(|d| (d.abs() - 1.0).abs())
            .fold(0.0, f64::max);
        w = next;
        if change < ICA_TOLERANCE {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!(
            "ICA did not converge in {ICA_MAX_ITER} iterations; falling back to whitening only"
        );
        w = DMatrix::identity(k, k);
    }
    let unmixing = &w * &whitening;
    Ok(IcaTransform {
        component_count: k,
        mean: mean.iter().copied().collect(),
        whitening: to_rows(&whitening),
        unmixing: to_rows(&unmixing),
        seed,
        iterations,
        degraded: !converged,
    })
}
