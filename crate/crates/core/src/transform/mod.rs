//! Norm-preserving transformations with block-wise early abandoning.
//!
//! The index is built on transformed vectors, so a comparison accumulates
//! the squared difference `delta_d` coordinates at a time and abandons the
//! candidate as soon as the (scaled) partial sum exceeds the threshold. When
//! no block prunes, the completed sum is the exact distance.

mod ads;
mod dwt;
mod pca;

pub use ads::fit_ads;
pub use dwt::{fit_dwt, haar_forward, haar_inverse};
pub use pca::fit_pca;

use crate::data::{LaneAccumulator, VectorSet};
use crate::dco::{CompareOutcome, Dco, DcoKind, QueryContext};
use crate::error::{Error, Result};
use crate::linalg::{mat_vec, transform_rows};

pub const DEFAULT_DELTA_D: usize = 32;
pub const DEFAULT_EPSILON0: f32 = 2.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformKind {
    Pca,
    Dwt,
    Ads,
}

impl TransformKind {
    pub fn dco_kind(self) -> DcoKind {
        match self {
            TransformKind::Pca => DcoKind::Pca,
            TransformKind::Dwt => DcoKind::Dwt,
            TransformKind::Ads => DcoKind::Ads,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformModel {
    pub(crate) kind: TransformKind,
    pub(crate) input_dim: usize,
    /// Power of two ≥ input_dim for DWT, input_dim otherwise.
    pub(crate) padded_dim: usize,
    /// Column means (PCA only; zeros otherwise).
    pub(crate) mean: Vec<f32>,
    /// Row-major `input_dim × input_dim` orthonormal matrix (PCA rows are
    /// eigenvectors by descending eigenvalue). Empty for DWT.
    pub(crate) rotation: Vec<f32>,
    /// PCA eigenvalues, descending. Empty otherwise.
    pub(crate) eigenvalues: Vec<f32>,
    /// DWT coefficients that are zero for every zero-padded input.
    pub(crate) droppable: Vec<bool>,
    pub(crate) delta_d: usize,
    pub(crate) epsilon0: f32,
    /// Threshold multiplier applied after each block.
    multipliers: Vec<f32>,
}

impl TransformModel {
    pub(crate) fn assemble(
        kind: TransformKind,
        input_dim: usize,
        padded_dim: usize,
        mean: Vec<f32>,
        rotation: Vec<f32>,
        eigenvalues: Vec<f32>,
        droppable: Vec<bool>,
        delta_d: usize,
        epsilon0: f32,
    ) -> Result<Self> {
        if delta_d == 0 {
            return Err(Error::invalid("delta_d must be positive"));
        }
        let mut m = Self {
            kind,
            input_dim,
            padded_dim,
            mean,
            rotation,
            eigenvalues,
            droppable,
            delta_d,
            epsilon0,
            multipliers: Vec::new(),
        };
        m.refresh_multipliers();
        Ok(m)
    }

    fn refresh_multipliers(&mut self) {
        let d = self.output_dim();
        let blocks = d.div_ceil(self.delta_d);
        self.multipliers = (1..=blocks)
            .map(|b| {
                let j = (b * self.delta_d).min(d);
                match self.kind {
                    TransformKind::Ads => {
                        let widen = 1.0 + self.epsilon0 as f64 / (j as f64).sqrt();
                        (widen * widen * j as f64 / d as f64) as f32
                    }
                    _ => 1.0,
                }
            })
            .collect();
    }

    pub fn with_delta_d(mut self, delta_d: usize) -> Result<Self> {
        if delta_d == 0 {
            return Err(Error::invalid("delta_d must be positive"));
        }
        self.delta_d = delta_d;
        self.refresh_multipliers();
        Ok(self)
    }

    pub fn with_epsilon0(mut self, epsilon0: f32) -> Result<Self> {
        if !(epsilon0 >= 0.0) {
            return Err(Error::invalid("epsilon0 must be non-negative"));
        }
        self.epsilon0 = epsilon0;
        self.refresh_multipliers();
        Ok(self)
    }

    pub fn kind(&self) -> TransformKind {
        self.kind
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn padded_dim(&self) -> usize {
        self.padded_dim
    }

    /// Dimension of transformed vectors (DWT drops provably-zero columns).
    pub fn output_dim(&self) -> usize {
        self.padded_dim - self.droppable.iter().filter(|&&d| d).count()
    }

    pub fn delta_d(&self) -> usize {
        self.delta_d
    }

    pub fn epsilon0(&self) -> f32 {
        self.epsilon0
    }

    pub fn mean(&self) -> &[f32] {
        &self.mean
    }

    pub fn rotation(&self) -> &[f32] {
        &self.rotation
    }

    pub fn eigenvalues(&self) -> &[f32] {
        &self.eigenvalues
    }

    pub fn droppable(&self) -> &[bool] {
        &self.droppable
    }

    /// Transforms one vector into `out` (length `output_dim`).
    pub fn apply_one(&self, x: &[f32], out: &mut [f32]) {
        match self.kind {
            TransformKind::Pca => {
                let centered: Vec<f32> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
                mat_vec(&self.rotation, self.input_dim, self.input_dim, &centered, out);
            }
            TransformKind::Ads => mat_vec(&self.rotation, self.input_dim, self.input_dim, x, out),
            TransformKind::Dwt => {
                let mut buf = vec![0.0f32; self.padded_dim];
                buf[..self.input_dim].copy_from_slice(x);
                haar_forward(&mut buf);
                let mut o = 0;
                for (v, &drop) in buf.iter().zip(&self.droppable) {
                    if !drop {
                        out[o] = *v;
                        o += 1;
                    }
                }
            }
        }
    }

    pub fn apply(&self, set: &VectorSet) -> Result<VectorSet> {
        set.expect_dim(self.input_dim)?;
        let values = match self.kind {
            TransformKind::Pca => {
                let mut centered = Vec::with_capacity(set.as_slice().len());
                for row in set.rows() {
                    centered.extend(row.iter().zip(&self.mean).map(|(a, m)| a - m));
                }
                let centered = VectorSet::new(self.input_dim, centered)?;
                transform_rows(&self.rotation, self.input_dim, self.input_dim, &centered)
            }
            TransformKind::Ads => transform_rows(&self.rotation, self.input_dim, self.input_dim, set),
            TransformKind::Dwt => {
                let od = self.output_dim();
                let mut out = vec![0.0f32; set.len() * od];
                for (row, o) in set.rows().zip(out.chunks_exact_mut(od.max(1))) {
                    self.apply_one(row, o);
                }
                out
            }
        };
        let out = VectorSet::new(self.output_dim(), values)?;
        match set.ids() {
            Some(ids) => out.with_ids(ids.to_vec()),
            None => Ok(out),
        }
    }

    /// Maps transformed vectors back to the input space.
    pub fn invert(&self, set: &VectorSet) -> Result<VectorSet> {
        set.expect_dim(self.output_dim())?;
        let d = self.input_dim;
        let values = match self.kind {
            TransformKind::Pca | TransformKind::Ads => {
                // R orthonormal ⇒ R⁻¹ = Rᵀ
                let mut rt = vec![0.0f32; d * d];
                for r in 0..d {
                    for c in 0..d {
                        rt[c * d + r] = self.rotation[r * d + c];
                    }
                }
                let mut v = transform_rows(&rt, d, d, set);
                if self.kind == TransformKind::Pca {
                    for row in v.chunks_exact_mut(d) {
                        row.iter_mut().zip(&self.mean).for_each(|(a, m)| *a += m);
                    }
                }
                v
            }
            TransformKind::Dwt => {
                let mut out = Vec::with_capacity(set.len() * d);
                let mut buf = vec![0.0f32; self.padded_dim];
                for row in set.rows() {
                    let mut src = row.iter();
                    for (b, &drop) in buf.iter_mut().zip(&self.droppable) {
                        *b = if drop { 0.0 } else { *src.next().unwrap() };
                    }
                    haar_inverse(&mut buf);
                    out.extend_from_slice(&buf[..d]);
                }
                out
            }
        };
        VectorSet::new(d, values)
    }

    /// Early-abandoning comparison of a stored (transformed) candidate
    /// against a transformed query. `dims` receives the coordinates summed.
    #[inline]
    pub fn compare_vectors(&self, q: &[f32], v: &[f32], threshold_sq: f32, dims: &mut u64) -> CompareOutcome {
        let d = q.len();
        let mut acc = LaneAccumulator::default();
        if threshold_sq == f32::INFINITY {
            acc.accumulate(q, v, 0);
            *dims += d as u64;
            return CompareOutcome::Admit(acc.total());
        }
        let mut j = 0;
        for &mult in &self.multipliers {
            let end = (j + self.delta_d).min(d);
            acc.accumulate(&q[j..end], &v[j..end], j);
            j = end;
            if j < d && acc.total() > threshold_sq * mult {
                *dims += j as u64;
                return CompareOutcome::Pruned;
            }
        }
        *dims += d as u64;
        CompareOutcome::Admit(acc.total())
    }

    /// Squared-distance estimate from the first `fraction` of coordinates:
    /// the raw partial sum for PCA/DWT, rescaled by `D / j` for ADS.
    pub fn estimate_vectors(&self, q: &[f32], v: &[f32], fraction: f32) -> f32 {
        let d = q.len();
        let j = ((fraction as f64 * d as f64).round() as usize).clamp(1, d);
        let mut acc = LaneAccumulator::default();
        acc.accumulate(&q[..j], &v[..j], 0);
        match self.kind {
            TransformKind::Ads => acc.total() * d as f32 / j as f32,
            _ => acc.total(),
        }
    }
}

impl Dco for TransformModel {
    type Payload = ();

    fn kind(&self) -> DcoKind {
        self.kind.dco_kind()
    }

    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn validate(&self, data: &VectorSet) -> Result<()> {
        data.expect_dim(self.output_dim())
    }

    fn prepare(&self, q: &[f32], _: Option<usize>) -> Result<(Vec<f32>, ())> {
        let mut out = vec![0.0f32; self.output_dim()];
        self.apply_one(q, &mut out);
        Ok((out, ()))
    }

    #[inline]
    fn compare(&self, ctx: &mut QueryContext<()>, data: &VectorSet, _: u32, candidate: u32, threshold_sq: f32) -> CompareOutcome {
        self.compare_vectors(&ctx.query, data.row(candidate as usize), threshold_sq, &mut ctx.dims)
    }

    fn estimate_sq(&self, ctx: &mut QueryContext<()>, data: &VectorSet, _: u32, candidate: u32, fraction: f32) -> f32 {
        self.estimate_vectors(&ctx.query, data.row(candidate as usize), fraction)
    }

    fn params(&self) -> String {
        match self.kind {
            TransformKind::Ads => format!("delta_d={};epsilon0={}", self.delta_d, self.epsilon0),
            _ => format!("delta_d={}", self.delta_d),
        }
    }
}
