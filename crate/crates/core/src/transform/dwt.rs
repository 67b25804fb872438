use super::{TransformKind, TransformModel, DEFAULT_DELTA_D, DEFAULT_EPSILON0};
use crate::error::{Error, Result};

const INV_SQRT2: f32 = std::f32::consts::FRAC_1_SQRT_2;

/// Full orthonormal Haar decomposition in place. `x.len()` must be a power
/// of two. Output order: overall average, then detail coefficients from the
/// coarsest level to the finest.
pub fn haar_forward(x: &mut [f32]) {
    let n = x.len();
    debug_assert!(n.is_power_of_two());
    let mut tmp = vec![0.0f32; n];
    let mut len = n;
    while len > 1 {
        let half = len / 2;
        for i in 0..half {
            let (a, b) = (x[2 * i], x[2 * i + 1]);
            tmp[i] = (a + b) * INV_SQRT2;
            tmp[half + i] = (a - b) * INV_SQRT2;
        }
        x[..len].copy_from_slice(&tmp[..len]);
        len = half;
    }
}

pub fn haar_inverse(x: &mut [f32]) {
    let n = x.len();
    debug_assert!(n.is_power_of_two());
    let mut tmp = vec![0.0f32; n];
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        for i in 0..half {
            let (s, d) = (x[i], x[half + i]);
            tmp[2 * i] = (s + d) * INV_SQRT2;
            tmp[2 * i + 1] = (s - d) * INV_SQRT2;
        }
        x[..len].copy_from_slice(&tmp[..len]);
        len *= 2;
    }
}

/// Marks coefficients whose support lies entirely in the zero padding.
fn droppable_columns(dim: usize, padded: usize) -> Vec<bool> {
    let mut drop = vec![false; padded];
    // Details produced at stage `len` sit in [len/2, len); each covers
    // `padded / (len/2)` consecutive input positions.
    let mut len = padded;
    while len > 1 {
        let half = len / 2;
        let width = padded / half;
        for i in 0..half {
            if i * width >= dim {
                drop[half + i] = true;
            }
        }
        len = half;
    }
    drop
}

pub fn fit_dwt(dim: usize) -> Result<TransformModel> {
    if dim == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    let padded = dim.next_power_of_two();
    TransformModel::assemble(
        TransformKind::Dwt,
        dim,
        padded,
        vec![0.0; dim],
        Vec::new(),
        Vec::new(),
        droppable_columns(dim, padded),
        DEFAULT_DELTA_D,
        DEFAULT_EPSILON0,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{l2_sq, synth, VectorSet};

    #[test]
    fn one_stage() {
        let mut x = [3.0f32, 1.0];
        haar_forward(&mut x);
        assert!((x[0] - 4.0 * INV_SQRT2).abs() < 1e-6);
        assert!((x[1] - 2.0 * INV_SQRT2).abs() < 1e-6);
    }

    #[test]
    fn constant_vector_concentrates() {
        let mut x = [1.0f32; 4];
        haar_forward(&mut x);
        assert!((x[0] - 2.0).abs() < 1e-6);
        assert!(x[1..].iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn parseval_and_inverse() {
        let set = synth::gaussian(20, 8, 1);
        for row in set.rows() {
            let mut x = row.to_vec();
            haar_forward(&mut x);
            let e0: f32 = row.iter().map(|v| v * v).sum();
            let e1: f32 = x.iter().map(|v| v * v).sum();
            assert!((e0 - e1).abs() / e0 < 1e-5);
            haar_inverse(&mut x);
            for (a, b) in x.iter().zip(row) {
                assert!((a - b).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn padding_columns_are_provably_zero() {
        for dim in [1, 3, 5, 9, 33, 100, 128] {
            let m = fit_dwt(dim).unwrap();
            assert_eq!(m.padded_dim(), dim.next_power_of_two());
            let set = synth::gaussian(30, dim, dim as u64);
            for row in set.rows() {
                let mut x = vec![0.0; m.padded_dim()];
                x[..dim].copy_from_slice(row);
                haar_forward(&mut x);
                for (v, &drop) in x.iter().zip(&m.droppable) {
                    if drop {
                        assert_eq!(*v, 0.0);
                    }
                }
            }
            assert!(m.output_dim() >= dim);
        }
        assert_eq!(fit_dwt(3).unwrap().output_dim(), 4);
        assert_eq!(fit_dwt(5).unwrap().output_dim(), 7);
    }

    #[test]
    fn padded_distances_and_roundtrip() {
        for dim in [3usize, 5] {
            let m = fit_dwt(dim).unwrap();
            let set = synth::uniform(40, dim, 2);
            let t = m.apply(&set).unwrap();
            for i in 0..39 {
                let a = l2_sq(set.row(i), set.row(i + 1));
                let b = l2_sq(t.row(i), t.row(i + 1));
                assert!((a - b).abs() / a < 1e-4);
            }
            let back = m.invert(&t).unwrap();
            for (a, b) in back.as_slice().iter().zip(set.as_slice()) {
                assert!((a - b).abs() < 1e-5);
            }
        }
        assert_eq!(
            fit_dwt(2).unwrap().apply(&VectorSet::new(2, vec![1.0, 1.0]).unwrap()).unwrap().dim(),
            2
        );
    }
}
