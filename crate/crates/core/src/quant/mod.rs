//! Optimized product quantization with asymmetric distance computation.
//!
//! Vectors are zero-padded to a multiple of `m`, rotated, and split into
//! `m` segments, each encoded by the index of its nearest codeword. A query
//! builds an `m × ks` table of segment distances once; approximating a
//! candidate then costs `m` lookups.

mod kmeans;

pub use kmeans::KMeans;

use nalgebra::DMatrix;

use crate::data::{l2_sq, VectorSet};
use crate::dco::{CompareOutcome, Dco, DcoKind, QueryContext};
use crate::error::{Error, Result};
use crate::linalg::{mat_vec, to_row_major, transform_rows};

pub const DEFAULT_KS: usize = 256;
pub const DEFAULT_ITERS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OpqParams {
    pub m: usize,
    pub ks: usize,
    /// Alternating (k-means round, rotation update) iterations.
    pub t1: usize,
    /// Trailing k-means-only iterations.
    pub t2: usize,
    pub seed: u64,
}

impl OpqParams {
    pub fn new(m: usize) -> Self {
        Self {
            m,
            ks: DEFAULT_KS,
            t1: DEFAULT_ITERS,
            t2: DEFAULT_ITERS,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantModel {
    pub(crate) input_dim: usize,
    pub(crate) m: usize,
    pub(crate) ks: usize,
    pub(crate) sub_dim: usize,
    /// Row-major `P × P` with `P = m · sub_dim`; rotated vector is `R · x`.
    pub(crate) rotation: Vec<f32>,
    /// Segment-major: `m × ks × sub_dim`.
    pub(crate) codebooks: Vec<f32>,
    /// `N × m`.
    pub(crate) codes: Vec<u8>,
    pub(crate) alpha: f32,
    /// Training distortion after each alternating iteration and at the end.
    pub(crate) distortion: Vec<f64>,
}

impl QuantModel {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn ks(&self) -> usize {
        self.ks
    }

    pub fn sub_dim(&self) -> usize {
        self.sub_dim
    }

    pub fn padded_dim(&self) -> usize {
        self.m * self.sub_dim
    }

    pub fn rotation(&self) -> &[f32] {
        &self.rotation
    }

    pub fn codes(&self) -> &[u8] {
        &self.codes
    }

    pub fn code(&self, i: usize) -> &[u8] {
        &self.codes[i * self.m..(i + 1) * self.m]
    }

    pub fn alpha(&self) -> f32 {
        self.alpha
    }

    pub fn distortion_trace(&self) -> &[f64] {
        &self.distortion
    }

    pub fn with_alpha(mut self, alpha: f32) -> Result<Self> {
        if !(alpha >= 0.0) {
            return Err(Error::invalid(format!("alpha = {alpha} must be non-negative")));
        }
        self.alpha = alpha;
        Ok(self)
    }

    pub fn codeword(&self, segment: usize, code: usize) -> &[f32] {
        let start = (segment * self.ks + code) * self.sub_dim;
        &self.codebooks[start..start + self.sub_dim]
    }

    /// Pads and rotates one raw vector.
    pub fn rotate(&self, x: &[f32]) -> Vec<f32> {
        let p = self.padded_dim();
        let mut padded = vec![0.0f32; p];
        padded[..x.len()].copy_from_slice(x);
        let mut out = vec![0.0f32; p];
        mat_vec(&self.rotation, p, p, &padded, &mut out);
        out
    }

    pub fn rotate_set(&self, set: &VectorSet) -> Result<VectorSet> {
        set.expect_dim(self.input_dim)?;
        let p = self.padded_dim();
        VectorSet::new(p, transform_rows(&self.rotation, p, p, &set.zero_padded(p)))
    }

    fn encode_rotated(&self, x: &[f32], out: &mut [u8]) {
        for (j, o) in out.iter_mut().enumerate() {
            let seg = &x[j * self.sub_dim..(j + 1) * self.sub_dim];
            let mut best = (0usize, f32::INFINITY);
            for c in 0..self.ks {
                let d = l2_sq(seg, self.codeword(j, c));
                if d < best.1 {
                    best = (c, d);
                }
            }
            *o = best.0 as u8;
        }
    }

    pub fn encode(&self, set: &VectorSet) -> Result<Vec<u8>> {
        let rotated = self.rotate_set(set)?;
        let mut codes = vec![0u8; set.len() * self.m];
        for (x, o) in rotated.rows().zip(codes.chunks_exact_mut(self.m)) {
            self.encode_rotated(x, o);
        }
        Ok(codes)
    }

    /// Concatenated codewords, in rotated space.
    pub fn reconstruct(&self, code: &[u8]) -> Vec<f32> {
        code.iter()
            .enumerate()
            .flat_map(|(j, &c)| self.codeword(j, c as usize).iter().copied())
            .collect()
    }

    /// Segment-major `m × ks` table of squared distances.
    pub fn distance_table(&self, q: &[f32]) -> Vec<f32> {
        let rq = self.rotate(q);
        let mut table = Vec::with_capacity(self.m * self.ks);
        for j in 0..self.m {
            let seg = &rq[j * self.sub_dim..(j + 1) * self.sub_dim];
            table.extend((0..self.ks).map(|c| l2_sq(seg, self.codeword(j, c))));
        }
        table
    }

    #[inline]
    pub fn adc(&self, table: &[f32], code: &[u8]) -> f32 {
        code.iter()
            .enumerate()
            .map(|(j, &c)| table[j * self.ks + c as usize])
            .sum()
    }
}

fn segment(set: &VectorSet, j: usize, sub_dim: usize) -> VectorSet {
    let values = set
        .rows()
        .flat_map(|r| r[j * sub_dim..(j + 1) * sub_dim].iter().copied())
        .collect();
    VectorSet::new(sub_dim, values).expect("segment of a valid set")
}

fn training_distortion(model: &QuantModel, rotated: &VectorSet) -> f64 {
    let mut code = vec![0u8; model.m];
    let mut total = 0.0f64;
    for x in rotated.rows() {
        model.encode_rotated(x, &mut code);
        total += l2_sq(x, &model.reconstruct(&code)) as f64;
    }
    total / rotated.len().max(1) as f64
}

/// Orthogonal Procrustes: the rotation `R` minimising `Σ ‖R·x − y‖²` over
/// the rows of `x` and their reconstructions `y`.
fn procrustes(x: &VectorSet, y: &[f32], p: usize) -> Vec<f32> {
    let xm = DMatrix::<f64>::from_row_iterator(x.len(), p, x.as_slice().iter().map(|&v| v as f64));
    let ym = DMatrix::<f64>::from_row_iterator(x.len(), p, y.iter().map(|&v| v as f64));
    let svd = xm.tr_mul(&ym).svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    // rows convention: X·A ≈ Y with A = U·Vᵀ, and R = Aᵀ = V·Uᵀ
    to_row_major(&(vt.transpose() * u.transpose()))
}

pub fn fit_opq(training: &VectorSet, base: &VectorSet, params: OpqParams) -> Result<QuantModel> {
    let OpqParams { m, ks, t1, t2, seed } = params;
    if m == 0 {
        return Err(Error::invalid("segment count m must be positive"));
    }
    if ks == 0 || ks > 256 {
        return Err(Error::invalid(format!("ks = {ks} must lie in [1, 256] for byte codes")));
    }
    if training.len() < ks {
        return Err(Error::invalid(format!(
            "ks = {ks} exceeds the {} training vectors",
            training.len()
        )));
    }
    base.expect_dim(training.dim())?;
    let d = training.dim();
    let sub_dim = d.div_ceil(m);
    let p = sub_dim * m;
    let padded = training.zero_padded(p);

    let mut identity = vec![0.0f32; p * p];
    for i in 0..p {
        identity[i * p + i] = 1.0;
    }
    let mut model = QuantModel {
        input_dim: d,
        m,
        ks,
        sub_dim,
        rotation: identity,
        codebooks: Vec::new(),
        codes: Vec::new(),
        alpha: 1.0,
        distortion: Vec::new(),
    };

    let mut books: Vec<Option<VectorSet>> = vec![None; m];
    let refine = |model: &mut QuantModel, books: &mut [Option<VectorSet>], rotated: &VectorSet, iters: usize| -> Result<()> {
        let mut flat = Vec::with_capacity(m * ks * sub_dim);
        for (j, book) in books.iter_mut().enumerate() {
            let seg = segment(rotated, j, sub_dim);
            let km = match book.take() {
                None => KMeans::fit(&seg, ks, iters, seed.wrapping_add(j as u64))?,
                Some(c) => KMeans::refine(&seg, c, iters)?,
            };
            flat.extend_from_slice(km.centroids.as_slice());
            *book = Some(km.centroids);
        }
        model.codebooks = flat;
        Ok(())
    };

    for _ in 0..t1 {
        let rotated = VectorSet::new(p, transform_rows(&model.rotation, p, p, &padded))?;
        refine(&mut model, &mut books, &rotated, 1)?;
        let mut y = Vec::with_capacity(rotated.len() * p);
        let mut code = vec![0u8; m];
        for x in rotated.rows() {
            model.encode_rotated(x, &mut code);
            y.extend(model.reconstruct(&code));
        }
        model.rotation = procrustes(&padded, &y, p);
        let rotated = VectorSet::new(p, transform_rows(&model.rotation, p, p, &padded))?;
        model.distortion.push(training_distortion(&model, &rotated));
    }
    let rotated = VectorSet::new(p, transform_rows(&model.rotation, p, p, &padded))?;
    refine(&mut model, &mut books, &rotated, t2.max(if t1 == 0 { 1 } else { 0 }))?;
    model.distortion.push(training_distortion(&model, &rotated));
    model.codes = model.encode(base)?;
    Ok(model)
}

impl Dco for QuantModel {
    /// Segment distance table.
    type Payload = Vec<f32>;

    fn kind(&self) -> DcoKind {
        DcoKind::Opq
    }

    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn validate(&self, data: &VectorSet) -> Result<()> {
        data.expect_dim(self.input_dim)?;
        if data.len() * self.m != self.codes.len() {
            return Err(Error::ModelMismatch(format!(
                "codes cover {} vectors, index has {}",
                self.codes.len() / self.m,
                data.len()
            )));
        }
        Ok(())
    }

    fn prepare(&self, q: &[f32], _: Option<usize>) -> Result<(Vec<f32>, Vec<f32>)> {
        Ok((q.to_vec(), self.distance_table(q)))
    }

    #[inline]
    fn compare(&self, ctx: &mut QueryContext<Vec<f32>>, data: &VectorSet, _: u32, candidate: u32, threshold_sq: f32) -> CompareOutcome {
        let approx = self.adc(&ctx.payload, self.code(candidate as usize));
        ctx.dims += self.m as u64;
        let factor = self.alpha * self.alpha;
        if factor.is_finite() && approx > factor * threshold_sq {
            return CompareOutcome::Pruned;
        }
        ctx.dims += self.input_dim as u64;
        CompareOutcome::Admit(l2_sq(&ctx.query, data.row(candidate as usize)))
    }

    fn estimate_sq(&self, ctx: &mut QueryContext<Vec<f32>>, _: &VectorSet, _: u32, candidate: u32, _: f32) -> f32 {
        self.adc(&ctx.payload, self.code(candidate as usize))
    }

    fn params(&self) -> String {
        format!("m={};ks={};alpha={}", self.m, self.ks, self.alpha)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth;
    use crate::linalg::orthonormality_error;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small(m: usize, ks: usize, t1: usize, t2: usize) -> OpqParams {
        OpqParams { m, ks, t1, t2, seed: 1 }
    }

    #[test]
    fn pads_to_multiple_of_m() {
        let set = synth::gaussian(300, 10, 0);
        let q = fit_opq(&set, &set, small(4, 16, 2, 2)).unwrap();
        assert_eq!(q.padded_dim(), 12);
        assert!(orthonormality_error(q.rotation(), 12) < 1e-4);
        assert!(q.codes().iter().all(|&c| (c as usize) < 16));
        assert_eq!(q.codes().len(), 300 * 4);
    }

    #[test]
    fn adc_matches_naive_and_reconstruction() {
        let (set, queries) = synth::correlated(1000, 10, 32, 50.0, 2);
        let q = fit_opq(&set, &set, small(8, 32, 3, 3)).unwrap();
        for qi in queries.rows() {
            let table = q.distance_table(qi);
            let rq = q.rotate(qi);
            for v in 0..200 {
                let code = q.code(v);
                let naive: f32 = (0..8)
                    .map(|j| l2_sq(&rq[j * 4..(j + 1) * 4], q.codeword(j, code[j] as usize)))
                    .sum();
                assert_eq!(q.adc(&table, code), naive);
                let rec = l2_sq(&rq, &q.reconstruct(code));
                assert!((naive - rec).abs() <= 1e-4 * rec.max(1e-6));
            }
        }
    }

    #[test]
    fn encode_concatenated_codewords() {
        let set = synth::gaussian(500, 8, 4);
        let q = fit_opq(&set, &set, small(2, 16, 0, 3)).unwrap();
        // identity rotation, so reconstructed vectors are valid raw inputs
        let rec: Vec<f32> = q.reconstruct(&[3, 7]);
        let codes = q.encode(&VectorSet::new(8, rec).unwrap()).unwrap();
        assert_eq!(codes, vec![3, 7]);
        let codes = q.encode(&set).unwrap();
        let recs: Vec<f32> = codes.chunks(2).flat_map(|c| q.reconstruct(c)).collect();
        assert_eq!(q.encode(&VectorSet::new(8, recs).unwrap()).unwrap(), codes);
    }

    #[test]
    fn zero_vector_hits_zero_codewords() {
        let mut values = vec![0.0f32; 8];
        values.extend(synth::uniform(99, 8, 1).into_values().iter().map(|v| v + 1.0));
        let set = VectorSet::new(8, values).unwrap();
        let mut q = fit_opq(&set, &set, small(2, 8, 0, 1)).unwrap();
        // plant zero codewords at slot 5
        for j in 0..2 {
            let start = (j * 8 + 5) * 4;
            q.codebooks[start..start + 4].fill(0.0);
        }
        assert_eq!(q.encode(&VectorSet::new(8, vec![0.0; 8]).unwrap()).unwrap(), vec![5, 5]);
    }

    #[test]
    fn query_on_reconstructable_vector_is_zero() {
        let set = synth::gaussian(400, 8, 4);
        let q = fit_opq(&set, &set, small(2, 16, 0, 2)).unwrap();
        let v = q.reconstruct(q.code(0));
        assert_eq!(q.adc(&q.distance_table(&v), q.code(0)), 0.0);
    }

    #[test]
    fn codebook_generated_data_refits_exactly() {
        let (m, ks, sub) = (4usize, 16usize, 3usize);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let books: Vec<f32> = (0..m * ks * sub).map(|_| rng.random_range(-5.0..5.0)).collect();
        let mut values = Vec::new();
        for i in 0..2000 {
            for j in 0..m {
                let c = if i < ks { i } else { rng.random_range(0..ks) };
                let s = (j * ks + c) * sub;
                values.extend_from_slice(&books[s..s + sub]);
            }
        }
        let set = VectorSet::new(m * sub, values).unwrap();
        let q = fit_opq(&set, &set, small(m, ks, 5, 5)).unwrap();
        assert!(*q.distortion_trace().last().unwrap() < 1e-6, "{:?}", q.distortion_trace());
    }

    #[test]
    fn rotation_update_does_not_increase_distortion() {
        let (set, _) = synth::correlated(2000, 1, 16, 100.0, 5);
        let pq = fit_opq(&set, &set, small(4, 16, 0, 6)).unwrap();
        let opq = fit_opq(&set, &set, small(4, 16, 6, 6)).unwrap();
        let pq_final = *pq.distortion_trace().last().unwrap();
        let opq_final = *opq.distortion_trace().last().unwrap();
        assert!(opq_final <= pq_final, "opq {opq_final} vs pq {pq_final}");
        let trace = opq.distortion_trace();
        assert_eq!(trace.len(), 7);
        assert!(trace.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-6)), "{trace:?}");
    }

    #[test]
    fn argument_checks_and_pruning() {
        let set = synth::gaussian(100, 8, 0);
        assert!(fit_opq(&set, &set, small(0, 16, 1, 1)).is_err());
        assert!(fit_opq(&set, &set, small(2, 300, 1, 1)).is_err());
        assert!(fit_opq(&set, &set, small(2, 101, 1, 1)).is_err());
        let q = fit_opq(&set, &set, small(2, 16, 1, 1)).unwrap().with_alpha(f32::INFINITY).unwrap();
        let mut ctx = q.preprocess(set.row(0)).unwrap();
        assert!(matches!(q.compare(&mut ctx, &set, 0, 3, 0.0), CompareOutcome::Admit(_)));
        let q = q.with_alpha(0.0).unwrap();
        let mut ctx = q.preprocess(set.row(0)).unwrap();
        assert_eq!(q.compare(&mut ctx, &set, 0, 3, 1.0), CompareOutcome::Pruned);
        assert_eq!(ctx.dims_evaluated(), 2);
    }
}
