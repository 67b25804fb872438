use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{l2_sq, VectorSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    /// `ks × dim`, row-major.
    pub centroids: VectorSet,
    pub assignments: Vec<u32>,
    /// Mean squared assignment distance: the initial value followed by one
    /// entry per Lloyd iteration. Never increases.
    pub distortion: Vec<f64>,
}

/// Nearest centroid by squared distance, ties to the smaller index.
#[inline]
pub(crate) fn nearest(centroids: &VectorSet, x: &[f32]) -> (u32, f32) {
    let mut best = (0u32, f32::INFINITY);
    for (c, row) in centroids.rows().enumerate() {
        let d = l2_sq(x, row);
        if d < best.1 {
            best = (c as u32, d);
        }
    }
    best
}

fn assign(points: &VectorSet, centroids: &VectorSet) -> (Vec<u32>, Vec<f32>) {
    let dim = points.dim().max(1);
    points
        .as_slice()
        .par_chunks(dim)
        .map(|x| nearest(centroids, x))
        .unzip()
}

fn mean_of(d: &[f32]) -> f64 {
    if d.is_empty() {
        return 0.0;
    }
    d.iter().map(|&v| v as f64).sum::<f64>() / d.len() as f64
}

/// Picks `ks` seeded random points, skipping values already chosen so the
/// initial centroids are distinct whenever the data allows it.
fn init_centroids(points: &VectorSet, ks: usize, seed: u64) -> VectorSet {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut chosen: Vec<usize> = Vec::with_capacity(ks);
    let mut repeats = Vec::new();
    for &i in &order {
        if chosen.len() == ks {
            break;
        }
        if chosen.iter().any(|&c| points.row(c) == points.row(i)) {
            repeats.push(i);
        } else {
            chosen.push(i);
        }
    }
    chosen.extend(repeats.into_iter().take(ks - chosen.len()));
    points.select(&chosen)
}

impl KMeans {
    pub fn fit(points: &VectorSet, ks: usize, iters: usize, seed: u64) -> Result<Self> {
        if ks == 0 || ks > points.len() {
            return Err(Error::invalid(format!(
                "cannot form {ks} clusters from {} points",
                points.len()
            )));
        }
        if iters == 0 {
            return Err(Error::invalid("k-means needs at least one iteration"));
        }
        let centroids = init_centroids(points, ks, seed);
        Self::refine(points, centroids, iters)
    }

    /// Lloyd iterations from the given centroids.
    pub fn refine(points: &VectorSet, centroids: VectorSet, iters: usize) -> Result<Self> {
        points.expect_dim(centroids.dim())?;
        let (assignments, dists) = assign(points, &centroids);
        let mut km = KMeans {
            centroids,
            assignments,
            distortion: vec![mean_of(&dists)],
        };
        for _ in 0..iters {
            km.step(points)?;
        }
        Ok(km)
    }

    fn step(&mut self, points: &VectorSet) -> Result<()> {
        let dim = points.dim();
        let ks = self.centroids.len();
        let mut sums = vec![0.0f64; ks * dim];
        let mut counts = vec![0usize; ks];
        for (x, &a) in points.rows().zip(&self.assignments) {
            let a = a as usize;
            counts[a] += 1;
            for (s, v) in sums[a * dim..(a + 1) * dim].iter_mut().zip(x) {
                *s += *v as f64;
            }
        }
        let mut values = self.centroids.as_slice().to_vec();
        for c in 0..ks {
            if counts[c] > 0 {
                for (v, s) in values[c * dim..(c + 1) * dim].iter_mut().zip(&sums[c * dim..]) {
                    *v = (*s / counts[c] as f64) as f32;
                }
            }
        }
        let mut centroids = VectorSet::new(dim, values)?;

        let empty: Vec<usize> = (0..ks).filter(|&c| counts[c] == 0).collect();
        if !empty.is_empty() {
            let mut far: Vec<(f32, usize)> = points
                .rows()
                .zip(&self.assignments)
                .enumerate()
                .map(|(i, (x, &a))| (l2_sq(x, centroids.row(a as usize)), i))
                .collect();
            far.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            let mut values = centroids.into_values();
            for (&c, &(_, i)) in empty.iter().zip(&far) {
                values[c * dim..(c + 1) * dim].copy_from_slice(points.row(i));
            }
            centroids = VectorSet::new(dim, values)?;
        }

        let (assignments, dists) = assign(points, &centroids);
        let d = mean_of(&dists);
        let prev = *self.distortion.last().unwrap();
        if d <= prev {
            self.centroids = centroids;
            self.assignments = assignments;
            self.distortion.push(d);
        } else {
            // f32 rounding of the means can nudge a converged solution upward
            self.distortion.push(prev);
        }
        Ok(())
    }

    pub fn final_distortion(&self) -> f64 {
        *self.distortion.last().unwrap()
    }
}
