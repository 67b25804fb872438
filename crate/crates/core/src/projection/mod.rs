//! Random and externally supplied low-dimensional projections.
//!
//! The projected dataset is stored apart from the index vectors; a
//! comparison first measures the candidate in projected space and only
//! computes the full distance when the projected distance passes the test.

mod chi2;

pub use chi2::chi2_quantile;

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::data::{l2_sq, load_vectors, VecFormat, VectorSet};
use crate::dco::{CompareOutcome, Dco, DcoKind, QueryContext};
use crate::error::{Error, Result};
use crate::linalg::mat_vec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionKind {
    Lsh,
    External,
}

/// How an external model embeds queries.
#[derive(Debug, Clone, PartialEq)]
pub enum QuerySide {
    /// Row-major `proj_dim × input_dim` linear encoder.
    Matrix(Vec<f32>),
    /// One precomputed embedding per workload query, addressed by query id.
    Embeddings(VectorSet),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionModel {
    pub(crate) kind: ProjectionKind,
    pub(crate) input_dim: usize,
    pub(crate) proj_dim: usize,
    pub(crate) query_side: QuerySide,
    pub(crate) projected: VectorSet,
    pub(crate) p_tau: f64,
    pub(crate) alpha: f32,
    /// Threshold multiplier for projected distances.
    pub(crate) factor: f32,
}

fn lsh_factor(proj_dim: usize, p_tau: f64) -> Result<f32> {
    if !(p_tau > 0.0 && p_tau <= 1.0) {
        return Err(Error::invalid(format!("p_tau = {p_tau} outside (0, 1]")));
    }
    if p_tau == 1.0 {
        return Ok(f32::INFINITY);
    }
    Ok(chi2_quantile(proj_dim, p_tau)? as f32)
}

fn alpha_factor(alpha: f32) -> Result<f32> {
    if !(alpha >= 0.0) {
        return Err(Error::invalid(format!("alpha = {alpha} must be non-negative")));
    }
    Ok(alpha * alpha)
}

/// Gaussian random projection with `proj_dim` rows of i.i.d. N(0, 1).
pub fn fit_lsh(dataset: &VectorSet, proj_dim: usize, p_tau: f64, seed: u64) -> Result<ProjectionModel> {
    if proj_dim == 0 {
        return Err(Error::invalid("projection dimension must be positive"));
    }
    let factor = lsh_factor(proj_dim, p_tau)?;
    let dim = dataset.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let matrix: Vec<f32> = (0..proj_dim * dim).map(|_| rng.sample(StandardNormal)).collect();
    // per-row kernel so that base vectors and queries round identically
    let mut values = vec![0.0f32; dataset.len() * proj_dim];
    values
        .par_chunks_mut(proj_dim)
        .zip(dataset.as_slice().par_chunks(dim.max(1)))
        .for_each(|(out, x)| mat_vec(&matrix, proj_dim, dim, x, out));
    let projected = VectorSet::new(proj_dim, values)?;
    Ok(ProjectionModel {
        kind: ProjectionKind::Lsh,
        input_dim: dim,
        proj_dim,
        query_side: QuerySide::Matrix(matrix),
        projected,
        p_tau,
        alpha: 1.0,
        factor,
    })
}

/// Wraps externally computed embeddings of the base vectors.
pub fn external_projection(
    embeddings: VectorSet,
    query_side: QuerySide,
    input_dim: usize,
    alpha: f32,
) -> Result<ProjectionModel> {
    let proj_dim = embeddings.dim();
    if proj_dim == 0 {
        return Err(Error::invalid("embedding dimension must be positive"));
    }
    match &query_side {
        QuerySide::Matrix(m) if m.len() != proj_dim * input_dim => {
            return Err(Error::invalid(format!(
                "query encoder has {} entries, expected {proj_dim}×{input_dim}",
                m.len()
            )))
        }
        QuerySide::Embeddings(e) => e.expect_dim(proj_dim)?,
        _ => {}
    }
    Ok(ProjectionModel {
        kind: ProjectionKind::External,
        input_dim,
        proj_dim,
        query_side,
        projected: embeddings,
        p_tau: 1.0,
        alpha,
        factor: alpha_factor(alpha)?,
    })
}

/// Sibling files consulted for the query side of `path`: `<stem>.matrix.fvecs`
/// (a linear encoder) then `<stem>.queries.fvecs` (precomputed embeddings).
pub fn external_sidecars(path: &Path) -> (PathBuf, PathBuf) {
    let stem = path.with_extension("");
    let s = stem.to_string_lossy();
    (
        PathBuf::from(format!("{s}.matrix.fvecs")),
        PathBuf::from(format!("{s}.queries.fvecs")),
    )
}

/// Loads base embeddings from an fvecs file and the query side from a sidecar.
pub fn load_external_projection(
    path: impl AsRef<Path>,
    base_count: usize,
    input_dim: usize,
    alpha: f32,
) -> Result<ProjectionModel> {
    let path = path.as_ref();
    let embeddings = load_vectors(path, VecFormat::Fvecs)?;
    if embeddings.len() != base_count {
        return Err(Error::invalid(format!(
            "{} holds {} embeddings but the base set has {base_count} vectors",
            path.display(),
            embeddings.len()
        )));
    }
    let (matrix_path, queries_path) = external_sidecars(path);
    let query_side = if matrix_path.exists() {
        QuerySide::Matrix(load_vectors(&matrix_path, VecFormat::Fvecs)?.into_values())
    } else if queries_path.exists() {
        QuerySide::Embeddings(load_vectors(&queries_path, VecFormat::Fvecs)?)
    } else {
        return Err(Error::invalid(format!(
            "no query-side embeddings next to {} (expected {} or {})",
            path.display(),
            matrix_path.display(),
            queries_path.display()
        )));
    };
    external_projection(embeddings, query_side, input_dim, alpha)
}

impl ProjectionModel {
    pub fn kind_of(&self) -> ProjectionKind {
        self.kind
    }

    pub fn proj_dim(&self) -> usize {
        self.proj_dim
    }

    pub fn p_tau(&self) -> f64 {
        self.p_tau
    }

    pub fn alpha(&self) -> f32 {
        self.alpha
    }

    pub fn projected(&self) -> &VectorSet {
        &self.projected
    }

    pub fn query_side(&self) -> &QuerySide {
        &self.query_side
    }

    /// Multiplier `κ` in the pruning test `s > κ · threshold`.
    pub fn factor(&self) -> f32 {
        self.factor
    }

    pub fn with_p_tau(self, p_tau: f64) -> Result<Self> {
        if self.kind != ProjectionKind::Lsh {
            return Err(Error::invalid("p_tau applies to LSH projections only"));
        }
        self.with_lsh_p_tau(p_tau)
    }

    pub(crate) fn with_lsh_p_tau(mut self, p_tau: f64) -> Result<Self> {
        self.factor = lsh_factor(self.proj_dim, p_tau)?;
        self.p_tau = p_tau;
        Ok(self)
    }

    pub fn with_alpha(mut self, alpha: f32) -> Result<Self> {
        if self.kind != ProjectionKind::External {
            return Err(Error::invalid("alpha applies to external projections only"));
        }
        self.factor = alpha_factor(alpha)?;
        self.alpha = alpha;
        Ok(self)
    }

    /// Projects one raw vector with the stored linear map (LSH or an
    /// external matrix encoder).
    pub fn project(&self, x: &[f32]) -> Result<Vec<f32>> {
        match &self.query_side {
            QuerySide::Matrix(m) => {
                let mut out = vec![0.0; self.proj_dim];
                mat_vec(m, self.proj_dim, self.input_dim, x, &mut out);
                Ok(out)
            }
            QuerySide::Embeddings(_) => Err(Error::invalid("external model has no query encoder")),
        }
    }

    /// Pruning test on a precomputed projected distance `s`.
    #[inline]
    pub fn prunes(&self, s: f32, threshold_sq: f32) -> bool {
        // an infinite factor never prunes, including against a zero threshold
        self.factor.is_finite() && s > self.factor * threshold_sq
    }
}

impl Dco for ProjectionModel {
    /// The projected query.
    type Payload = Vec<f32>;

    fn kind(&self) -> DcoKind {
        match self.kind {
            ProjectionKind::Lsh => DcoKind::Lsh,
            ProjectionKind::External => DcoKind::External,
        }
    }

    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn validate(&self, data: &VectorSet) -> Result<()> {
        data.expect_dim(self.input_dim)?;
        if data.len() != self.projected.len() {
            return Err(Error::ModelMismatch(format!(
                "projection covers {} vectors, index has {}",
                self.projected.len(),
                data.len()
            )));
        }
        Ok(())
    }

    fn prepare(&self, q: &[f32], query_id: Option<usize>) -> Result<(Vec<f32>, Vec<f32>)> {
        let projected = match &self.query_side {
            QuerySide::Matrix(_) => self.project(q)?,
            QuerySide::Embeddings(e) => {
                let id = query_id.ok_or_else(|| {
                    Error::invalid("external embeddings are per query; a query id is required")
                })?;
                if id >= e.len() {
                    return Err(Error::invalid(format!(
                        "no precomputed embedding for query {id} ({} available)",
                        e.len()
                    )));
                }
                e.row(id).to_vec()
            }
        };
        Ok((q.to_vec(), projected))
    }

    #[inline]
    fn compare(&self, ctx: &mut QueryContext<Vec<f32>>, data: &VectorSet, _: u32, candidate: u32, threshold_sq: f32) -> CompareOutcome {
        let s = l2_sq(&ctx.payload, self.projected.row(candidate as usize));
        ctx.dims += self.proj_dim as u64;
        if self.prunes(s, threshold_sq) {
            return CompareOutcome::Pruned;
        }
        ctx.dims += self.input_dim as u64;
        CompareOutcome::Admit(l2_sq(&ctx.query, data.row(candidate as usize)))
    }

    /// Projected distance, divided by `d` for Gaussian projections so that
    /// it is an unbiased estimate of the squared distance.
    fn estimate_sq(&self, ctx: &mut QueryContext<Vec<f32>>, _: &VectorSet, _: u32, candidate: u32, _: f32) -> f32 {
        let s = l2_sq(&ctx.payload, self.projected.row(candidate as usize));
        match self.kind {
            ProjectionKind::Lsh => s / self.proj_dim as f32,
            ProjectionKind::External => s,
        }
    }

    fn params(&self) -> String {
        match self.kind {
            ProjectionKind::Lsh => format!("d={};p_tau={}", self.proj_dim, self.p_tau),
            ProjectionKind::External => format!("d={};alpha={}", self.proj_dim, self.alpha),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth;

    #[test]
    fn zero_projects_to_zero() {
        let set = synth::gaussian(10, 16, 0);
        let m = fit_lsh(&set, 8, 0.9, 1).unwrap();
        assert!(m.project(&[0.0; 16]).unwrap().iter().all(|&v| v == 0.0));
        assert_eq!(m.projected().len(), 10);
        assert_eq!(m.projected().row(3), m.project(set.row(3)).unwrap().as_slice());
    }

    #[test]
    fn seeded_and_validated() {
        let set = synth::gaussian(10, 16, 0);
        assert_eq!(fit_lsh(&set, 8, 0.9, 5).unwrap(), fit_lsh(&set, 8, 0.9, 5).unwrap());
        assert!(fit_lsh(&set, 0, 0.9, 5).is_err());
        assert!(fit_lsh(&set, 8, 0.0, 5).is_err());
        assert!(fit_lsh(&set, 8, 1.5, 5).is_err());
    }

    #[test]
    fn projected_distance_is_unbiased_over_projections() {
        let set = synth::gaussian(400, 128, 3);
        let mut sum = 0.0f64;
        let mut n = 0;
        for seed in 0..50 {
            let m = fit_lsh(&set, 64, 0.9, seed).unwrap();
            for p in 0..200 {
                let (i, j) = (p, 200 + (p * 7 + seed as usize) % 200);
                let s = l2_sq(m.projected().row(i), m.projected().row(j)) / 64.0;
                sum += (s / l2_sq(set.row(i), set.row(j))) as f64;
                n += 1;
            }
        }
        let mean = sum / n as f64;
        assert!((mean - 1.0).abs() < 0.03, "{mean}");
    }

    #[test]
    fn full_confidence_never_prunes() {
        let set = synth::gaussian(50, 16, 0);
        let m = fit_lsh(&set, 4, 1.0, 2).unwrap();
        assert!(m.factor().is_infinite());
        let mut ctx = m.preprocess(set.row(0)).unwrap();
        for c in 1..50 {
            for thr in [0.0, 1.0, f32::INFINITY] {
                assert!(matches!(m.compare(&mut ctx, &set, 0, c, thr), CompareOutcome::Admit(_)));
            }
        }
    }

    #[test]
    fn external_alpha_and_query_ids() {
        let set = synth::gaussian(30, 8, 0);
        let queries = synth::gaussian(3, 4, 9);
        let emb = VectorSet::new(4, set.as_slice().chunks(8).flat_map(|r| r[..4].to_vec()).collect()).unwrap();
        let m = external_projection(emb.clone(), QuerySide::Embeddings(queries), 8, f32::INFINITY).unwrap();
        assert!(m.preprocess(set.row(0)).is_err());
        assert!(m.preprocess_at(set.row(0), Some(3)).is_err());
        let mut ctx = m.preprocess_at(set.row(0), Some(1)).unwrap();
        for c in 0..30 {
            assert_eq!(
                m.compare(&mut ctx, &set, 0, c, 1e-3),
                CompareOutcome::Admit(l2_sq(set.row(0), set.row(c as usize)))
            );
        }
        let zero = m.clone().with_alpha(0.0).unwrap();
        let mut ctx = zero.preprocess_at(set.row(0), Some(1)).unwrap();
        assert_eq!(zero.compare(&mut ctx, &set, 0, 5, 1.0), CompareOutcome::Pruned);
        assert!(external_projection(emb, QuerySide::Matrix(vec![0.0; 3]), 8, 1.0).is_err());
    }

    #[test]
    fn external_file_roundtrip_and_count_check() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.fvecs");
        let emb = synth::gaussian(20, 4, 1);
        crate::data::save_vectors(&emb, &path, VecFormat::Fvecs).unwrap();
        assert!(load_external_projection(&path, 20, 8, 1.0).is_err());
        let (matrix, _) = external_sidecars(&path);
        crate::data::save_vectors(&synth::gaussian(4, 8, 2), &matrix, VecFormat::Fvecs).unwrap();
        let m = load_external_projection(&path, 20, 8, 1.0).unwrap();
        assert_eq!(m.proj_dim(), 4);
        assert!(load_external_projection(&path, 21, 8, 1.0).is_err());
    }
}
