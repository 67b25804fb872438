//! Geometry-based comparison on graph edges.
//!
//! For an edge `c → v` the neighbour is split into its projection on `c`
//! and an orthogonal residual; so is the query when `c` is expanded. The
//! distance then reduces to precomputed scalars plus one residual inner
//! product, which is estimated from the Hamming distance of signed random
//! projections of the two residuals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::data::{l2_sq, VectorSet};
use crate::dco::{CompareOutcome, Dco, DcoKind, QueryContext};
use crate::error::{Error, Result};
use crate::graph::GraphIndex;
use crate::linalg::mat_vec;

pub const DEFAULT_BITS: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct GeoModel {
    pub(crate) input_dim: usize,
    pub(crate) bits: usize,
    pub(crate) seed: u64,
    /// Row-major `bits × input_dim` Gaussian matrix.
    pub(crate) proj: Vec<f32>,
    pub(crate) node_norm_sq: Vec<f32>,
    /// `P · c` per node, `bits` floats each.
    pub(crate) node_proj: Vec<f32>,
    /// Level-0 adjacency in index order; `offsets` has `N + 1` entries.
    pub(crate) offsets: Vec<usize>,
    pub(crate) targets: Vec<u32>,
    /// `t_d · ‖c‖` per edge.
    pub(crate) edge_proj: Vec<f32>,
    /// `‖v − t_d · c‖` per edge.
    pub(crate) edge_res: Vec<f32>,
    /// Sign bits of `P · (v − t_d · c)`, `words()` per edge.
    pub(crate) edge_bits: Vec<u64>,
    pub(crate) alpha: f32,
}

/// Query-side terms for one expanded node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopTerms {
    /// `t_q · ‖c‖`.
    pub proj: f32,
    /// `‖q − t_q · c‖²`.
    pub res_sq: f32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeMeta {
    pub target: u32,
    pub proj: f32,
    pub res: f32,
}

#[derive(Debug, Clone)]
pub struct FingerQuery {
    norm_sq: f64,
    pq: Vec<f32>,
    hop: Option<u32>,
    terms: Option<HopTerms>,
    bits: Vec<u64>,
    cursor: usize,
}

fn words_for(bits: usize) -> usize {
    bits.div_ceil(64)
}

fn sign_bits(values: impl Iterator<Item = f32>, out: &mut [u64]) {
    out.fill(0);
    for (i, v) in values.enumerate() {
        if v > 0.0 {
            out[i / 64] |= 1 << (i % 64);
        }
    }
}

fn dot64(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

pub fn fit_finger(index: &GraphIndex, bits: usize, seed: u64) -> Result<GeoModel> {
    if bits == 0 {
        return Err(Error::invalid("sign projection width must be positive"));
    }
    let data = index.data().as_ref();
    let (n, dim) = (data.len(), data.dim());
    let words = words_for(bits);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let proj: Vec<f32> = (0..bits * dim).map(|_| rng.sample(StandardNormal)).collect();

    let mut node_proj = vec![0.0f32; n * bits];
    node_proj
        .par_chunks_mut(bits)
        .enumerate()
        .for_each(|(i, out)| mat_vec(&proj, bits, dim, data.row(i), out));
    let node_norm_sq: Vec<f32> = data.rows().map(|r| dot64(r, r) as f32).collect();

    let mut offsets = Vec::with_capacity(n + 1);
    offsets.push(0);
    let mut targets = Vec::new();
    for c in 0..n as u32 {
        targets.extend_from_slice(index.neighbors(c, 0));
        offsets.push(targets.len());
    }

    let per_node: Vec<(Vec<f32>, Vec<f32>, Vec<u64>)> = (0..n)
        .into_par_iter()
        .map(|c| {
            let cv = data.row(c);
            let c_sq = dot64(cv, cv);
            let c_norm = c_sq.sqrt();
            let pc = &node_proj[c * bits..(c + 1) * bits];
            let list = &targets[offsets[c]..offsets[c + 1]];
            let mut proj_out = Vec::with_capacity(list.len());
            let mut res_out = Vec::with_capacity(list.len());
            let mut bits_out = vec![0u64; list.len() * words];
            for (e, &v) in list.iter().enumerate() {
                let vv = data.row(v as usize);
                let t_d = if c_sq > 0.0 { dot64(vv, cv) / c_sq } else { 0.0 };
                let res_sq: f64 = vv
                    .iter()
                    .zip(cv)
                    .map(|(&x, &y)| {
                        let r = x as f64 - t_d * y as f64;
                        r * r
                    })
                    .sum();
                let v_norm = dot64(vv, vv).sqrt();
                let res = res_sq.sqrt();
                proj_out.push((t_d * c_norm) as f32);
                let out = &mut bits_out[e * words..(e + 1) * words];
                if res > 1e-6 * v_norm {
                    res_out.push(res as f32);
                    let pv = &node_proj[v as usize * bits..(v as usize + 1) * bits];
                    sign_bits(pv.iter().zip(pc).map(|(&a, &b)| a - t_d as f32 * b), out);
                } else {
                    // collinear with the basis: the zero residual gets zero bits
                    res_out.push(0.0);
                }
            }
            (proj_out, res_out, bits_out)
        })
        .collect();

    let mut edge_proj = Vec::with_capacity(targets.len());
    let mut edge_res = Vec::with_capacity(targets.len());
    let mut edge_bits = Vec::with_capacity(targets.len() * words);
    for (p, r, b) in per_node {
        edge_proj.extend(p);
        edge_res.extend(r);
        edge_bits.extend(b);
    }

    Ok(GeoModel {
        input_dim: dim,
        bits,
        seed,
        proj,
        node_norm_sq,
        node_proj,
        offsets,
        targets,
        edge_proj,
        edge_res,
        edge_bits,
        alpha: 1.0,
    })
}

impl GeoModel {
    pub fn bits(&self) -> usize {
        self.bits
    }

    fn words(&self) -> usize {
        words_for(self.bits)
    }

    pub fn alpha(&self) -> f32 {
        self.alpha
    }

    pub fn with_alpha(mut self, alpha: f32) -> Result<Self> {
        if !(alpha >= 0.0) {
            return Err(Error::invalid(format!("alpha = {alpha} must be non-negative")));
        }
        self.alpha = alpha;
        Ok(self)
    }

    pub fn node_count(&self) -> usize {
        self.node_norm_sq.len()
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len()
    }

    /// Edges of node `c` in adjacency order.
    pub fn edges(&self, c: u32) -> impl Iterator<Item = EdgeMeta> + '_ {
        (self.offsets[c as usize]..self.offsets[c as usize + 1]).map(|e| EdgeMeta {
            target: self.targets[e],
            proj: self.edge_proj[e],
            res: self.edge_res[e],
        })
    }

    /// Stored words: two floats plus `bits` sign bits per edge and
    /// `1 + bits` floats per node.
    pub fn memory_words(&self) -> usize {
        self.edge_proj.len()
            + self.edge_res.len()
            + self.edge_bits.len() * 2
            + self.node_norm_sq.len()
            + self.node_proj.len()
    }

    /// Checks that this model describes exactly the level-0 graph of `index`.
    pub fn check_index(&self, index: &GraphIndex) -> Result<()> {
        if index.len() != self.node_count() || index.dim() != self.input_dim {
            return Err(Error::ModelMismatch("edge metadata was built for a different index".into()));
        }
        for c in 0..index.len() as u32 {
            let stored = &self.targets[self.offsets[c as usize]..self.offsets[c as usize + 1]];
            if stored != index.neighbors(c, 0) {
                return Err(Error::ModelMismatch(format!(
                    "adjacency of node {c} differs from the index"
                )));
            }
        }
        Ok(())
    }

    /// Query terms for basis `c`; `None` when `c` is the zero vector.
    pub fn hop_terms(&self, q: &[f32], q_norm_sq: f64, c_vec: &[f32], c: u32) -> Option<HopTerms> {
        let c_sq = self.node_norm_sq[c as usize] as f64;
        if c_sq == 0.0 {
            return None;
        }
        let t_q = dot64(q, c_vec) / c_sq;
        Some(HopTerms {
            proj: (t_q * c_sq.sqrt()) as f32,
            res_sq: (q_norm_sq - t_q * t_q * c_sq).max(0.0) as f32,
        })
    }

    /// `(t_q‖c‖ − t_d‖c‖)² + ‖q_res‖² + ‖d_res‖² − 2·inner`.
    #[inline]
    pub fn combine(hop: HopTerms, edge: EdgeMeta, inner: f32) -> f32 {
        let dp = hop.proj - edge.proj;
        dp * dp + hop.res_sq + edge.res * edge.res - 2.0 * inner
    }

    fn setup_hop(&self, ctx: &mut QueryContext<FingerQuery>, data: &VectorSet, c: u32) {
        let p = &mut ctx.payload;
        p.hop = Some(c);
        p.cursor = self.offsets[c as usize];
        p.terms = self.hop_terms(&ctx.query, p.norm_sq, data.row(c as usize), c);
        if let Some(t) = p.terms {
            let c_sq = self.node_norm_sq[c as usize];
            let t_q = t.proj / c_sq.sqrt();
            let pc = &self.node_proj[c as usize * self.bits..(c as usize + 1) * self.bits];
            let pq = &p.pq;
            sign_bits(pq.iter().zip(pc).map(|(&a, &b)| a - t_q * b), &mut p.bits);
        }
        ctx.dims += (self.input_dim + self.bits) as u64;
    }

    fn find_edge(&self, p: &mut FingerQuery, c: u32, v: u32) -> Option<usize> {
        let (lo, hi) = (self.offsets[c as usize], self.offsets[c as usize + 1]);
        let found = (p.cursor..hi)
            .chain(lo..p.cursor.min(hi))
            .find(|&e| self.targets[e] == v)?;
        p.cursor = found + 1;
        Some(found)
    }

    /// Estimated squared distance through edge `c → v`, or `None` when the
    /// edge carries no usable metadata.
    fn estimate(&self, ctx: &mut QueryContext<FingerQuery>, data: &VectorSet, c: u32, v: u32) -> Option<f32> {
        if ctx.payload.hop != Some(c) {
            self.setup_hop(ctx, data, c);
        }
        let terms = ctx.payload.terms?;
        let e = self.find_edge(&mut ctx.payload, c, v)?;
        let w = self.words();
        let h: u32 = ctx.payload.bits
            .iter()
            .zip(&self.edge_bits[e * w..(e + 1) * w])
            .map(|(a, b)| (a ^ b).count_ones())
            .sum();
        let cos = (std::f32::consts::PI * h as f32 / self.bits as f32).cos();
        let edge = EdgeMeta {
            target: v,
            proj: self.edge_proj[e],
            res: self.edge_res[e],
        };
        Some(Self::combine(terms, edge, terms.res_sq.sqrt() * edge.res * cos))
    }
}

impl Dco for GeoModel {
    type Payload = FingerQuery;

    fn kind(&self) -> DcoKind {
        DcoKind::Finger
    }

    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn validate(&self, data: &VectorSet) -> Result<()> {
        data.expect_dim(self.input_dim)?;
        if data.len() != self.node_count() {
            return Err(Error::ModelMismatch(format!(
                "edge metadata covers {} nodes, index has {}",
                self.node_count(),
                data.len()
            )));
        }
        Ok(())
    }

    fn prepare(&self, q: &[f32], _: Option<usize>) -> Result<(Vec<f32>, FingerQuery)> {
        let mut pq = vec![0.0f32; self.bits];
        mat_vec(&self.proj, self.bits, self.input_dim, q, &mut pq);
        Ok((
            q.to_vec(),
            FingerQuery {
                norm_sq: dot64(q, q),
                pq,
                hop: None,
                terms: None,
                bits: vec![0; self.words()],
                cursor: 0,
            },
        ))
    }

    #[inline]
    fn compare(&self, ctx: &mut QueryContext<FingerQuery>, data: &VectorSet, from: u32, candidate: u32, threshold_sq: f32) -> CompareOutcome {
        let factor = self.alpha * self.alpha;
        if let Some(est) = self.estimate(ctx, data, from, candidate) {
            if factor.is_finite() && est > factor * threshold_sq {
                return CompareOutcome::Pruned;
            }
        }
        ctx.dims += self.input_dim as u64;
        CompareOutcome::Admit(l2_sq(&ctx.query, data.row(candidate as usize)))
    }

    fn estimate_sq(&self, ctx: &mut QueryContext<FingerQuery>, data: &VectorSet, from: u32, candidate: u32, _: f32) -> f32 {
        self.estimate(ctx, data, from, candidate)
            .unwrap_or_else(|| l2_sq(&ctx.query, data.row(candidate as usize)))
    }

    fn params(&self) -> String {
        format!("L={};alpha={}", self.bits, self.alpha)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth;
    use crate::graph::{build_hnsw, BuildParams};
    use std::sync::Arc;

    fn index(n: usize, dim: usize, seed: u64) -> GraphIndex {
        let params = BuildParams { m: 8, ef_construction: 60, seed };
        build_hnsw(Arc::new(synth::gaussian(n, dim, seed)), params).unwrap()
    }

    #[test]
    fn pythagorean_identity_per_edge() {
        let idx = index(500, 24, 1);
        let g = fit_finger(&idx, 64, 3).unwrap();
        let data = idx.data();
        for c in 0..500u32 {
            let c_norm = (g.node_norm_sq[c as usize] as f64).sqrt();
            for e in g.edges(c) {
                let v_sq = dot64(data.row(e.target as usize), data.row(e.target as usize));
                let lhs = (e.proj as f64).powi(2) + (e.res as f64).powi(2);
                assert!((lhs - v_sq).abs() <= 1e-3 * v_sq, "{lhs} vs {v_sq}");
                assert!(c_norm > 0.0);
            }
        }
        assert_eq!(g.edge_count(), idx.base_edge_count());
    }

    #[test]
    fn memory_matches_closed_form() {
        let idx = index(300, 16, 2);
        let g = fit_finger(&idx, 64, 0).unwrap();
        let (e, n) = (g.edge_count(), g.node_count());
        assert_eq!(g.memory_words(), (2 + 64 / 32) * e + (1 + 64) * n);
    }

    #[test]
    fn collinear_neighbour_has_zero_residual() {
        let data = VectorSet::new(3, vec![1.0, 2.0, -1.0, 2.0, 4.0, -2.0]).unwrap();
        let idx = build_hnsw(Arc::new(data), BuildParams { m: 4, ef_construction: 10, seed: 0 }).unwrap();
        let g = fit_finger(&idx, 64, 0).unwrap();
        let e = g.edges(0).next().unwrap();
        assert_eq!(e.target, 1);
        assert_eq!(e.res, 0.0);
        let w = g.words();
        assert!(g.edge_bits[..w].iter().all(|&b| b == 0));
        // zero residual query: identity is exact
        let mut ctx = g.preprocess(&[3.0, 6.0, -3.0]).unwrap();
        let est = g.estimate_sq(&mut ctx, idx.data(), 0, 1, 1.0);
        assert!((est - 6.0).abs() < 1e-4 * 6.0, "{est}");
    }

    #[test]
    fn parallel_residuals_give_exact_distance() {
        // c = e1, v − t_d·c ∥ q − t_q·c
        let data = VectorSet::new(3, vec![1.0, 0.0, 0.0, 2.0, 3.0, 0.0]).unwrap();
        let idx = build_hnsw(Arc::new(data), BuildParams { m: 4, ef_construction: 10, seed: 0 }).unwrap();
        let g = fit_finger(&idx, 64, 5).unwrap();
        let q = [-1.0f32, 1.5, 0.0];
        let mut ctx = g.preprocess(&q).unwrap();
        let est = g.estimate_sq(&mut ctx, idx.data(), 0, 1, 1.0);
        let exact = l2_sq(&q, idx.data().row(1));
        assert!((est - exact).abs() < 1e-4 * exact, "{est} vs {exact}");
    }

    #[test]
    fn exact_inner_product_recovers_distance() {
        let idx = index(600, 20, 4);
        let g = fit_finger(&idx, 64, 1).unwrap();
        let data = idx.data();
        let queries = synth::gaussian(5, 20, 99);
        for q in queries.rows() {
            let qn = dot64(q, q);
            for c in 0..600u32 {
                let cv = data.row(c as usize);
                let hop = g.hop_terms(q, qn, cv, c).unwrap();
                let c_sq = dot64(cv, cv);
                let t_q = dot64(q, cv) / c_sq;
                for e in g.edges(c) {
                    let v = data.row(e.target as usize);
                    let t_d = dot64(v, cv) / c_sq;
                    let inner: f64 = (0..20)
                        .map(|i| (q[i] as f64 - t_q * cv[i] as f64) * (v[i] as f64 - t_d * cv[i] as f64))
                        .sum();
                    let est = GeoModel::combine(hop, e, inner as f32);
                    let exact = l2_sq(q, v);
                    assert!((est - exact).abs() <= 1e-3 * exact, "{est} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn degenerate_basis_never_prunes() {
        let data = VectorSet::new(2, vec![0.0, 0.0, 1.0, 1.0, 2.0, 0.5]).unwrap();
        let idx = build_hnsw(Arc::new(data), BuildParams { m: 4, ef_construction: 10, seed: 0 }).unwrap();
        let g = fit_finger(&idx, 32, 0).unwrap().with_alpha(0.0).unwrap();
        let mut ctx = g.preprocess(&[5.0, 5.0]).unwrap();
        for e in g.edges(0).collect::<Vec<_>>() {
            let out = g.compare(&mut ctx, idx.data(), 0, e.target, 0.0);
            assert!(matches!(out, CompareOutcome::Admit(_)));
        }
        // any other basis prunes everything at alpha = 0 with a positive estimate
        let target = g.edges(1).next().unwrap().target;
        assert_eq!(g.compare(&mut ctx, idx.data(), 1, target, 1e-6), CompareOutcome::Pruned);
    }

    #[test]
    fn foreign_edges_fall_back_to_exact() {
        let idx = index(200, 8, 7);
        let g = fit_finger(&idx, 64, 1).unwrap().with_alpha(0.0).unwrap();
        let not_nbr = (0..200u32).find(|v| *v != 0 && !idx.neighbors(0, 0).contains(v)).unwrap();
        let q = idx.data().row(5).to_vec();
        let mut ctx = g.preprocess(&q).unwrap();
        assert_eq!(
            g.compare(&mut ctx, idx.data(), 0, not_nbr, 0.0),
            CompareOutcome::Admit(l2_sq(&q, idx.data().row(not_nbr as usize)))
        );
        assert!(g.check_index(&idx).is_ok());
        assert!(g.check_index(&index(200, 8, 8)).is_err());
    }

    #[test]
    fn cursor_handles_out_of_order_lookups() {
        let idx = index(300, 8, 3);
        let g = fit_finger(&idx, 64, 1).unwrap();
        let q = synth::gaussian(1, 8, 5);
        let mut ctx = g.preprocess(q.row(0)).unwrap();
        let nbrs: Vec<u32> = idx.neighbors(10, 0).to_vec();
        let forward: Vec<f32> = nbrs.iter().map(|&v| g.estimate_sq(&mut ctx, idx.data(), 10, v, 1.0)).collect();
        let backward: Vec<f32> = nbrs.iter().rev().map(|&v| g.estimate_sq(&mut ctx, idx.data(), 10, v, 1.0)).collect();
        assert_eq!(forward, backward.into_iter().rev().collect::<Vec<_>>());
    }
}
