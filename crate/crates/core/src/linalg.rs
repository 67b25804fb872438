//! Dense linear algebra glue. Decompositions are delegated to `nalgebra`;
//! everything here works on row-major `f32` buffers.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::VectorSet;

/// Orthonormal `dim × dim` matrix (row-major) from the QR factor of a seeded
/// standard-normal matrix. Columns of Q are sign-flipped so that diag(R) is
/// positive, which makes the result a deterministic function of the seed.
pub fn random_orthogonal(dim: usize, seed: u64) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::<f64>::from_fn(dim, dim, |_, _| rng.sample(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    to_row_major(&q)
}

pub(crate) fn to_row_major(m: &DMatrix<f64>) -> Vec<f32> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            out.push(m[(r, c)] as f32);
        }
    }
    out
}

/// `out = M · x` for a row-major `rows × cols` matrix.
#[inline]
pub fn mat_vec(m: &[f32], rows: usize, cols: usize, x: &[f32], out: &mut [f32]) {
    debug_assert_eq!(m.len(), rows * cols);
    debug_assert_eq!(x.len(), cols);
    for (o, row) in out.iter_mut().zip(m.chunks_exact(cols)) {
        *o = dot(row, x);
    }
}

#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f32 {
    let mut lanes = [0.0f32; 8];
    let body = a.len() / 8 * 8;
    for (ca, cb) in a[..body].chunks_exact(8).zip(b[..body].chunks_exact(8)) {
        for l in 0..8 {
            lanes[l] += ca[l] * cb[l];
        }
    }
    let mut s = lanes.iter().sum::<f32>();
    for i in body..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// Applies `x ↦ M · x` to every row of `set` via one matrix product.
pub fn transform_rows(m: &[f32], rows: usize, cols: usize, set: &VectorSet) -> Vec<f32> {
    assert_eq!(set.dim(), cols);
    let n = set.len();
    if n == 0 {
        return Vec::new();
    }
    // nalgebra is column-major: a row-major n×cols buffer is the cols×n matrix Xᵀ.
    let xt = nalgebra::DMatrixView::<f32>::from_slice(set.as_slice(), cols, n);
    let mt = nalgebra::DMatrixView::<f32>::from_slice(m, cols, rows);
    // (M Xᵀ) as rows×n column-major == row-major n×rows.
    let y = mt.transpose() * xt;
    y.as_slice().to_vec()
}

/// Largest deviation of `M Mᵀ` from the identity.
pub fn orthonormality_error(m: &[f32], dim: usize) -> f32 {
    let mut worst = 0.0f32;
    for i in 0..dim {
        for j in 0..dim {
            let v = dot(&m[i * dim..(i + 1) * dim], &m[j * dim..(j + 1) * dim]);
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((v - target).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_orthogonal_is_orthonormal_and_seeded() {
        let a = random_orthogonal(24, 3);
        assert!(orthonormality_error(&a, 24) < 1e-5);
        assert_eq!(a, random_orthogonal(24, 3));
        assert_ne!(a, random_orthogonal(24, 4));
    }

    #[test]
    fn batch_transform_matches_mat_vec() {
        let m: Vec<f32> = (0..12).map(|v| v as f32 * 0.5 - 2.0).collect();
        let set = VectorSet::new(4, (0..20).map(|v| (v as f32).sin()).collect()).unwrap();
        let batch = transform_rows(&m, 3, 4, &set);
        let mut out = [0.0f32; 3];
        for (i, row) in set.rows().enumerate() {
            mat_vec(&m, 3, 4, row, &mut out);
            for (a, b) in out.iter().zip(&batch[i * 3..i * 3 + 3]) {
                assert!((a - b).abs() < 1e-5);
            }
        }
    }
}
