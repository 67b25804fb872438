use crate::error::{Error, Result};

/// Accumulator width. Coordinate `i` always lands in lane `i % LANES`, so a
/// sum assembled block by block is bit-identical to one computed in a single
/// pass. Early-abandoning operators rely on this to agree exactly with the
/// full distance.
pub const LANES: usize = 8;

/// Running squared-L2 sum split over `LANES` independent lanes.
#[derive(Debug, Clone, Copy, Default)]
pub struct LaneAccumulator {
    lanes: [f32; LANES],
}

impl LaneAccumulator {
    /// Adds `Σ (a_i - b_i)²` for coordinates `offset..offset + a.len()`.
    #[inline]
    pub fn accumulate(&mut self, a: &[f32], b: &[f32], offset: usize) {
        debug_assert_eq!(a.len(), b.len());
        let mut i = 0;
        let n = a.len();
        // Unaligned head.
        while i < n && (offset + i) % LANES != 0 {
            let d = a[i] - b[i];
            self.lanes[(offset + i) % LANES] += d * d;
            i += 1;
        }
        let body = (n - i) / LANES * LANES;
        for (ca, cb) in a[i..i + body]
            .chunks_exact(LANES)
            .zip(b[i..i + body].chunks_exact(LANES))
        {
            for l in 0..LANES {
                let d = ca[l] - cb[l];
                self.lanes[l] += d * d;
            }
        }
        i += body;
        while i < n {
            let d = a[i] - b[i];
            self.lanes[(offset + i) % LANES] += d * d;
            i += 1;
        }
    }

    /// Reduces the lanes with a fixed pairwise tree.
    #[inline]
    pub fn total(&self) -> f32 {
        let l = &self.lanes;
        ((l[0] + l[1]) + (l[2] + l[3])) + ((l[4] + l[5]) + (l[6] + l[7]))
    }
}

/// Squared Euclidean distance without a dimension check beyond a debug
/// assertion. Hot-path variant of [`squared_distance`].
#[inline]
pub fn l2_sq(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = LaneAccumulator::default();
    acc.accumulate(a, b, 0);
    acc.total()
}

/// Squared Euclidean distance.
pub fn squared_distance(a: &[f32], b: &[f32]) -> Result<f32> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(l2_sq(a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_values() {
        assert_eq!(squared_distance(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 25.0);
        assert_eq!(squared_distance(&[1.0, 2.0, 3.0], &[4.0, 6.0, 3.0]).unwrap(), 25.0);
        let x = [0.5, -1.5, 2.25];
        assert_eq!(squared_distance(&x, &x).unwrap(), 0.0);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(
            squared_distance(&[1.0], &[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    proptest! {
        #[test]
        fn metric_axioms(
            a in prop::collection::vec(-100.0f32..100.0, 1..70),
            seed in any::<u64>(),
        ) {
            let b: Vec<f32> = a.iter().enumerate()
                .map(|(i, v)| v + ((seed.rotate_left(i as u32) % 7) as f32 - 3.0) * 0.5)
                .collect();
            let ab = l2_sq(&a, &b);
            prop_assert!(ab >= 0.0);
            prop_assert_eq!(ab, l2_sq(&b, &a));
            prop_assert_eq!(l2_sq(&a, &a), 0.0);
            if a != b {
                prop_assert!(ab > 0.0);
            }
        }

        #[test]
        fn blockwise_sum_is_bit_identical(
            a in prop::collection::vec(-10.0f32..10.0, 1..200),
            block in 1usize..40,
        ) {
            let b: Vec<f32> = a.iter().map(|v| v * 0.3 - 1.0).collect();
            let mut acc = LaneAccumulator::default();
            let mut prev = 0.0f32;
            let mut j = 0;
            while j < a.len() {
                let end = (j + block).min(a.len());
                acc.accumulate(&a[j..end], &b[j..end], j);
                let partial = acc.total();
                prop_assert!(partial >= prev);
                prev = partial;
                j = end;
            }
            prop_assert_eq!(acc.total().to_bits(), l2_sq(&a, &b).to_bits());
        }
    }
}
