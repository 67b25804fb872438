use nalgebra::{DMatrix, SymmetricEigen};

use super::{TransformKind, TransformModel, DEFAULT_DELTA_D, DEFAULT_EPSILON0};
use crate::data::VectorSet;
use crate::error::{Error, Result};

const CHUNK: usize = 4096;

/// Rows of the rotation are the covariance eigenvectors ordered by
/// descending eigenvalue, each sign-normalised so its first nonzero
/// component is positive.
pub fn fit_pca(training: &VectorSet) -> Result<TransformModel> {
    let n = training.len();
    if n < 2 {
        return Err(Error::invalid("PCA needs at least two training vectors"));
    }
    let d = training.dim();

    let mut mean = vec![0.0f64; d];
    for row in training.rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += *v as f64;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let mut cov = DMatrix::<f64>::zeros(d, d);
    for start in (0..n).step_by(CHUNK) {
        let end = (start + CHUNK).min(n);
        let block = DMatrix::<f64>::from_fn(end - start, d, |r, c| {
            training.row(start + r)[c] as f64 - mean[c]
        });
        cov += block.tr_mul(&block);
    }
    cov /= (n - 1) as f64;

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let mut rotation = Vec::with_capacity(d * d);
    let mut eigenvalues = Vec::with_capacity(d);
    for &col in &order {
        let v = eig.eigenvectors.column(col);
        let sign = v
            .iter()
            .find(|x| x.abs() > 1e-12)
            .map_or(1.0, |x| x.signum());
        rotation.extend(v.iter().map(|x| (x * sign) as f32));
        eigenvalues.push(eig.eigenvalues[col].max(0.0) as f32);
    }

    TransformModel::assemble(
        TransformKind::Pca,
        d,
        d,
        mean.into_iter().map(|m| m as f32).collect(),
        rotation,
        eigenvalues,
        vec![false; d],
        DEFAULT_DELTA_D,
        DEFAULT_EPSILON0,
    )
}
