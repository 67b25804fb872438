use super::{TransformKind, TransformModel, DEFAULT_DELTA_D, DEFAULT_EPSILON0};
use crate::error::{Error, Result};
use crate::linalg::random_orthogonal;

/// Random orthonormal rotation; pruning uses the hypothesis test
/// `(D/j)·partial > τ·(1 + ε₀/√j)²`.
pub fn fit_ads(dim: usize, seed: u64) -> Result<TransformModel> {
    if dim == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    TransformModel::assemble(
        TransformKind::Ads,
        dim,
        dim,
        vec![0.0; dim],
        random_orthogonal(dim, seed),
        Vec::new(),
        vec![false; dim],
        DEFAULT_DELTA_D,
        DEFAULT_EPSILON0,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{l2_sq, synth};
    use crate::linalg::orthonormality_error;

    #[test]
    fn orthonormal_and_seeded() {
        let a = fit_ads(50, 1).unwrap();
        assert!(orthonormality_error(&a.rotation, 50) < 1e-4);
        assert_eq!(a.rotation, fit_ads(50, 1).unwrap().rotation);
        assert_ne!(a.rotation, fit_ads(50, 2).unwrap().rotation);
    }

    /// Over random rotations the rescaled first-block estimate is unbiased.
    #[test]
    fn prefix_estimator_is_unbiased() {
        let (set, _) = synth::correlated(2000, 1, 64, 100.0, 8);
        let mut ratio_sum = 0.0f64;
        let mut n = 0;
        for seed in 0..100u64 {
            let m = fit_ads(64, seed).unwrap();
            let t = m.apply(&set).unwrap();
            for p in 0..100 {
                let i = (seed as usize * 100 + p) % 2000;
                let j = (i * 31 + 7) % 2000;
                if i == j {
                    continue;
                }
                let est = m.estimate_vectors(t.row(i), t.row(j), 0.5);
                ratio_sum += (est / l2_sq(t.row(i), t.row(j))) as f64;
                n += 1;
            }
        }
        let mean = ratio_sum / n as f64;
        assert!((mean - 1.0).abs() < 0.03, "mean ratio {mean}");
    }
}
