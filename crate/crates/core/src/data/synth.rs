//! Seeded synthetic workloads used by tests, the acceptance suite and the
//! `ingest --synthetic` subcommand.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::VectorSet;
use crate::error::{Error, Result};
use crate::linalg::random_orthogonal;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Distribution {
    /// i.i.d. standard normal coordinates.
    Gaussian,
    /// Gaussian with covariance eigenvalues decaying geometrically from 1 to
    /// `1 / condition`, in a random orthonormal basis.
    Correlated { condition: f64 },
    /// i.i.d. uniform on `[0, 1)`.
    Uniform,
    /// Uniform points on a random unit segment through the origin.
    Line,
}

impl FromStr for Distribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Distribution::Gaussian),
            "uniform" => Ok(Distribution::Uniform),
            "line" => Ok(Distribution::Line),
            "correlated" => Ok(Distribution::Correlated { condition: 100.0 }),
            other => match other.strip_prefix("correlated:") {
                Some(c) => c
                    .parse()
                    .map(|condition| Distribution::Correlated { condition })
                    .map_err(|_| Error::invalid(format!("bad condition number '{c}'"))),
                None => Err(Error::invalid(format!("unknown distribution '{other}'"))),
            },
        }
    }
}

/// A distribution with its shared structure (basis, direction) fixed by
/// `structure_seed`, so base and query sets can be drawn independently.
#[derive(Debug, Clone)]
pub struct Generator {
    dim: usize,
    kind: Distribution,
    basis: Option<Vec<f32>>,
    scales: Vec<f32>,
}

impl Generator {
    pub fn new(kind: Distribution, dim: usize, structure_seed: u64) -> Self {
        let (basis, scales) = match kind {
            Distribution::Correlated { condition } => {
                let scales = (0..dim)
                    .map(|i| {
                        let t = if dim > 1 { i as f64 / (dim - 1) as f64 } else { 0.0 };
                        condition.powf(-t).sqrt() as f32
                    })
                    .collect();
                (Some(random_orthogonal(dim, structure_seed)), scales)
            }
            Distribution::Line => {
                let mut rng = ChaCha8Rng::seed_from_u64(structure_seed);
                let mut dir: Vec<f32> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
                let norm = dir.iter().map(|v| v * v).sum::<f32>().sqrt();
                dir.iter_mut().for_each(|v| *v /= norm);
                (Some(dir), Vec::new())
            }
            _ => (None, Vec::new()),
        };
        Self {
            dim,
            kind,
            basis,
            scales,
        }
    }

    pub fn sample(&self, n: usize, seed: u64) -> VectorSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = self.dim;
        let mut values = Vec::with_capacity(n * d);
        let mut z = vec![0.0f32; d];
        for _ in 0..n {
            match self.kind {
                Distribution::Gaussian => {
                    values.extend((0..d).map(|_| rng.sample::<f32, _>(StandardNormal)))
                }
                Distribution::Uniform => values.extend((0..d).map(|_| rng.random::<f32>())),
                Distribution::Line => {
                    let t: f32 = rng.random();
                    let dir = self.basis.as_ref().unwrap();
                    values.extend(dir.iter().map(|v| v * t));
                }
                Distribution::Correlated { .. } => {
                    for (zi, s) in z.iter_mut().zip(&self.scales) {
                        *zi = rng.sample::<f32, _>(StandardNormal) * s;
                    }
                    let basis = self.basis.as_ref().unwrap();
                    // x = Bᵀ z, rows of B are orthonormal
                    let start = values.len();
                    values.resize(start + d, 0.0);
                    let out = &mut values[start..];
                    for (r, zr) in z.iter().enumerate() {
                        let row = &basis[r * d..(r + 1) * d];
                        for (o, b) in out.iter_mut().zip(row) {
                            *o += zr * b;
                        }
                    }
                }
            }
        }
        VectorSet::new(d, values).expect("generated values are finite")
    }
}

pub fn gaussian(n: usize, dim: usize, seed: u64) -> VectorSet {
    Generator::new(Distribution::Gaussian, dim, 0).sample(n, seed)
}

pub fn uniform(n: usize, dim: usize, seed: u64) -> VectorSet {
    Generator::new(Distribution::Uniform, dim, 0).sample(n, seed)
}

pub fn line(n: usize, ambient_dim: usize, seed: u64) -> VectorSet {
    Generator::new(Distribution::Line, ambient_dim, seed).sample(n, seed.wrapping_add(1))
}

/// Base and query sets from one correlated Gaussian.
pub fn correlated(n: usize, queries: usize, dim: usize, condition: f64, seed: u64) -> (VectorSet, VectorSet) {
    let g = Generator::new(Distribution::Correlated { condition }, dim, seed);
    (g.sample(n, seed ^ 0x5eed), g.sample(queries, seed ^ 0x9e37))
}
