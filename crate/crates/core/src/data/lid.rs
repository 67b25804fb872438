//! Local intrinsic dimensionality via the Levina–Bickel maximum likelihood
//! estimator.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{l2_sq, VectorSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetStats {
    pub count: usize,
    pub dim: usize,
    pub lid: f64,
    /// `dim / lid`.
    pub hardness: f64,
}

/// `LID(x) = -((1/k) Σ_{i=1..k} ln(r_i / r_k))^-1`, averaged over a seeded
/// sample of points. Samples whose neighbour radii contain zeros (duplicate
/// points) are skipped.
pub fn estimate_lid(dataset: &VectorSet, sample_size: usize, k: usize, seed: u64) -> Result<f64> {
    if k < 2 {
        return Err(Error::invalid("LID needs k >= 2"));
    }
    if sample_size == 0 || sample_size > dataset.len() {
        return Err(Error::invalid(format!(
            "sample size {sample_size} outside 1..={}",
            dataset.len()
        )));
    }
    if k >= dataset.len() {
        return Err(Error::invalid(format!(
            "k = {k} needs more than {} points",
            dataset.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = index::sample(&mut rng, dataset.len(), sample_size).into_vec();

    let estimates: Vec<Option<f64>> = picks
        .par_iter()
        .map(|&p| point_lid(dataset, p, k))
        .collect();
    let valid: Vec<f64> = estimates.iter().flatten().copied().collect();
    let skipped = estimates.len() - valid.len();
    if skipped > 0 {
        log::warn!("LID: skipped {skipped} samples with duplicate neighbours");
    }
    if valid.is_empty() {
        return Err(Error::invalid("LID sample exhausted: every sample had zero radii"));
    }
    Ok(valid.iter().sum::<f64>() / valid.len() as f64)
}

fn point_lid(dataset: &VectorSet, p: usize, k: usize) -> Option<f64> {
    let x = dataset.row(p);
    let mut d: Vec<f32> = dataset
        .rows()
        .enumerate()
        .filter(|&(i, _)| i != p)
        .map(|(_, v)| l2_sq(x, v))
        .collect();
    d.select_nth_unstable_by(k - 1, |a, b| a.total_cmp(b));
    let nearest = &mut d[..k];
    nearest.sort_unstable_by(|a, b| a.total_cmp(b));
    if nearest[0] <= 0.0 {
        return None;
    }
    let rk = (nearest[k - 1] as f64).sqrt();
    let s: f64 = nearest
        .iter()
        .map(|&r2| ((r2 as f64).sqrt() / rk).ln())
        .sum::<f64>()
        / k as f64;
    if s >= 0.0 {
        // all k radii equal
        return None;
    }
    Some(-1.0 / s)
}

/// Count, dimension and LID with `min(1000, N)` samples and `k = min(100, N-1)`.
pub fn dataset_stats(dataset: &VectorSet, sample_size: Option<usize>, k: Option<usize>, seed: u64) -> Result<DatasetStats> {
    if dataset.len() < 3 {
        return Err(Error::invalid("dataset too small for LID"));
    }
    let sample = sample_size.unwrap_or(1000).min(dataset.len());
    let k = k.unwrap_or(100).min(dataset.len() - 1);
    let lid = estimate_lid(dataset, sample, k, seed)?;
    Ok(DatasetStats {
        count: dataset.len(),
        dim: dataset.dim(),
        lid,
        hardness: dataset.dim() as f64 / lid,
    })
}
