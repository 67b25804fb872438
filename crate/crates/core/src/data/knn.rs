use rayon::prelude::*;

use super::{l2_sq, VectorSet};
use crate::error::{Error, Result};

/// Exact k nearest neighbours per query: ids and squared distances, each row
/// ascending by `(distance, id)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    k: usize,
    ids: Vec<u32>,
    dists: Vec<f32>,
}

impl GroundTruth {
    pub fn from_flat(k: usize, ids: Vec<u32>, dists: Vec<f32>) -> Result<Self> {
        if ids.len() != dists.len() || (k == 0 && !ids.is_empty()) || (k > 0 && ids.len() % k != 0) {
            return Err(Error::invalid("ground truth shape mismatch"));
        }
        Ok(Self { k, ids, dists })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of query rows.
    pub fn len(&self) -> usize {
        if self.k == 0 {
            0
        } else {
            self.ids.len() / self.k
        }
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self, q: usize) -> &[u32] {
        &self.ids[q * self.k..(q + 1) * self.k]
    }

    pub fn dists(&self, q: usize) -> &[f32] {
        &self.dists[q * self.k..(q + 1) * self.k]
    }

    pub fn ids_flat(&self) -> &[u32] {
        &self.ids
    }

    pub fn dists_flat(&self) -> &[f32] {
        &self.dists
    }
}

pub(crate) fn knn_row(dataset: &VectorSet, q: &[f32], k: usize) -> Vec<(f32, u32)> {
    let mut all: Vec<(f32, u32)> = dataset
        .rows()
        .enumerate()
        .map(|(i, v)| (l2_sq(q, v), i as u32))
        .collect();
    let by_dist_then_id =
        |a: &(f32, u32), b: &(f32, u32)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < all.len() {
        all.select_nth_unstable_by(k, by_dist_then_id);
        all.truncate(k);
    }
    all.sort_unstable_by(by_dist_then_id);
    all
}

/// Exhaustive k-NN scan; parallel over queries, identical for any worker
/// count.
pub fn brute_force_knn(dataset: &VectorSet, queries: &VectorSet, k: usize) -> Result<GroundTruth> {
    if k == 0 || k > dataset.len() {
        return Err(Error::invalid(format!(
            "k = {k} must be in 1..={}",
            dataset.len()
        )));
    }
    if !queries.is_empty() {
        queries.expect_dim(dataset.dim())?;
    }
    let rows: Vec<Vec<(f32, u32)>> = queries
        .rows()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|q| knn_row(dataset, q, k))
        .collect();
    let mut ids = Vec::with_capacity(rows.len() * k);
    let mut dists = Vec::with_capacity(rows.len() * k);
    for row in rows {
        for (d, i) in row {
            ids.push(i);
            dists.push(d);
        }
    }
    GroundTruth::from_flat(k, ids, dists)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth;

    #[test]
    fn three_points() {
        let data = VectorSet::new(2, vec![0.0, 0.0, 1.0, 0.0, 5.0, 5.0]).unwrap();
        let q = VectorSet::new(2, vec![0.4, 0.0]).unwrap();
        let gt = brute_force_knn(&data, &q, 2).unwrap();
        assert_eq!(gt.ids(0), &[0, 1]);
        assert!((gt.dists(0)[0] - 0.16).abs() < 1e-6);
        assert!((gt.dists(0)[1] - 0.36).abs() < 1e-6);

        let all = brute_force_knn(&data, &q, 3).unwrap();
        assert_eq!(all.ids(0), &[0, 1, 2]);
    }

    #[test]
    fn ties_break_by_id() {
        let data = VectorSet::new(1, vec![1.0, -1.0, 1.0]).unwrap();
        let q = VectorSet::new(1, vec![0.0]).unwrap();
        assert_eq!(brute_force_knn(&data, &q, 3).unwrap().ids(0), &[0, 1, 2]);
    }

    #[test]
    fn errors() {
        let data = synth::gaussian(5, 3, 0);
        assert!(brute_force_knn(&data, &synth::gaussian(1, 3, 1), 6).is_err());
        assert!(brute_force_knn(&data, &synth::gaussian(1, 4, 1), 2).is_err());
    }

    /// Independent scan in reverse order with an insertion-sorted top-k.
    fn reversed_scan(data: &VectorSet, q: &[f32], k: usize) -> Vec<u32> {
        let mut best: Vec<(f32, u32)> = Vec::new();
        for i in (0..data.len()).rev() {
            let d: f32 = {
                let mut s = 0.0f64;
                for (a, b) in q.iter().zip(data.row(i)) {
                    s += ((a - b) as f64).powi(2);
                }
                s as f32
            };
            best.push((d, i as u32));
            best.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            best.truncate(k);
        }
        best.into_iter().map(|p| p.1).collect()
    }

    #[test]
    fn agrees_with_reversed_scan() {
        let data = synth::gaussian(200, 8, 11);
        let queries = synth::gaussian(20, 8, 12);
        let gt = brute_force_knn(&data, &queries, 10).unwrap();
        for (qi, q) in queries.rows().enumerate() {
            assert_eq!(gt.ids(qi), reversed_scan(&data, q, 10).as_slice());
            assert!(gt.dists(qi).windows(2).all(|w| w[0] <= w[1]));
        }
    }
}
