//! Dataset representation, vector file IO, the exact-search oracle and
//! dataset statistics.

mod distance;
mod io;
mod knn;
mod lid;
pub mod synth;

pub use distance::{l2_sq, squared_distance, LaneAccumulator, LANES};
pub use io::{load_ground_truth, load_vectors, save_ground_truth, save_vectors, VecFormat};
pub use knn::{brute_force_knn, GroundTruth};
pub use lid::{dataset_stats, estimate_lid, DatasetStats};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::binio::fingerprint_f32;
use crate::error::{Error, Result};

/// Dense row-major matrix of `f32` vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorSet {
    dim: usize,
    values: Vec<f32>,
    ids: Option<Vec<u32>>,
}

impl VectorSet {
    /// Wraps `values` as `values.len() / dim` rows. Rejects ragged lengths
    /// and non-finite entries.
    pub fn new(dim: usize, values: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            if !values.is_empty() {
                return Err(Error::invalid("dimension must be positive"));
            }
            return Ok(Self::empty(0));
        }
        if values.len() % dim != 0 {
            return Err(Error::invalid(format!(
                "{} values do not form rows of dimension {dim}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / dim,
                col: pos % dim,
            });
        }
        Ok(Self {
            dim,
            values,
            ids: None,
        })
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            values: Vec::new(),
            ids: None,
        }
    }

    pub fn from_rows<'a, I>(dim: usize, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f32]>,
    {
        let mut values = Vec::new();
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::new(dim, values)
    }

    /// Attaches external identifiers; defaults are `0..len`.
    pub fn with_ids(mut self, ids: Vec<u32>) -> Result<Self> {
        if ids.len() != self.len() {
            return Err(Error::invalid(format!(
                "{} ids for {} rows",
                ids.len(),
                self.len()
            )));
        }
        self.ids = Some(ids);
        Ok(self)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.values.len() / self.dim
        }
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        // dim 0 only happens for empty sets; chunks_exact(0) would panic.
        self.values.chunks_exact(self.dim.max(1))
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    pub fn id(&self, i: usize) -> u32 {
        match &self.ids {
            Some(ids) => ids[i],
            None => i as u32,
        }
    }

    pub fn ids(&self) -> Option<&[u32]> {
        self.ids.as_deref()
    }

    /// Content hash used to bind indexes and models to their dataset.
    pub fn fingerprint(&self) -> u64 {
        fingerprint_f32(&self.values, self.dim)
    }

    /// Copies the selected rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> VectorSet {
        let mut values = Vec::with_capacity(rows.len() * self.dim);
        for &r in rows {
            values.extend_from_slice(self.row(r));
        }
        VectorSet {
            dim: self.dim,
            values,
            ids: self
                .ids
                .as_ref()
                .map(|ids| rows.iter().map(|&r| ids[r]).collect()),
        }
    }

    /// Right-pads every row with zeros up to `dim`.
    pub fn zero_padded(&self, dim: usize) -> VectorSet {
        assert!(dim >= self.dim);
        if dim == self.dim {
            return self.clone();
        }
        let mut values = Vec::with_capacity(self.len() * dim);
        for row in self.rows() {
            values.extend_from_slice(row);
            values.resize(values.len() + dim - self.dim, 0.0);
        }
        VectorSet {
            dim,
            values,
            ids: self.ids.clone(),
        }
    }

    pub(crate) fn expect_dim(&self, dim: usize) -> Result<()> {
        if self.dim != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: self.dim,
            });
        }
        Ok(())
    }
}

/// Draws `n` distinct rows without replacement. `n == len` returns the full
/// set in its original order.
pub fn sample_training_set(set: &VectorSet, n: usize, seed: u64) -> Result<VectorSet> {
    if n == 0 || n > set.len() {
        return Err(Error::invalid(format!(
            "sample size {n} outside 1..={}",
            set.len()
        )));
    }
    if n == set.len() {
        return Ok(set.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, set.len(), n).into_vec();
    picked.sort_unstable();
    Ok(set.select(&picked))
}
