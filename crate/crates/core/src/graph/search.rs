use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use super::{GraphIndex, Scored, Visited};
use crate::data::l2_sq;
use crate::dco::{CompareOutcome, Dco, QueryContext};
use crate::error::{Error, Result};

/// Per-query instrumentation of the level-0 search.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SearchStats {
    /// Admission tests performed (`T`).
    pub comparisons: u64,
    pub dims_evaluated: u64,
    pub full_dist_count: u64,
    pub pruned_count: u64,
    /// Pruned candidates whose exact distance did not exceed the threshold.
    /// `None` unless the search ran in audit mode.
    pub false_negatives: Option<u64>,
    /// Nodes expanded at level 0.
    pub hops: u64,
    /// Search wall time, excluding preprocessing and audit work.
    pub elapsed: Duration,
}

impl SearchStats {
    pub fn accumulate(&mut self, other: &SearchStats) {
        self.false_negatives = match (self.false_negatives, other.false_negatives) {
            (Some(a), Some(b)) => Some(a + b),
            (None, b) if self.comparisons == 0 && self.hops == 0 => b,
            _ => None,
        };
        self.comparisons += other.comparisons;
        self.dims_evaluated += other.dims_evaluated;
        self.full_dist_count += other.full_dist_count;
        self.pruned_count += other.pruned_count;
        self.hops += other.hops;
        self.elapsed += other.elapsed;
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SearchOptions {
    /// Compute the exact distance of every pruned candidate to count false
    /// negatives. Off for timed runs.
    pub audit: bool,
    /// Record the sequence of expanded nodes.
    pub record_hops: bool,
}

#[derive(Debug, Clone)]
pub struct SearchOutput {
    pub ids: Vec<u32>,
    /// Squared distances, ascending.
    pub dists: Vec<f32>,
    pub stats: SearchStats,
    pub hop_trace: Option<Vec<u32>>,
}

/// Reusable per-thread search state over one index.
pub struct Searcher<'a> {
    index: &'a GraphIndex,
    visited: Visited,
    candidates: BinaryHeap<Reverse<Scored>>,
    results: BinaryHeap<Scored>,
}

impl<'a> Searcher<'a> {
    pub fn new(index: &'a GraphIndex) -> Self {
        Self {
            index,
            visited: Visited::new(index.len()),
            candidates: BinaryHeap::new(),
            results: BinaryHeap::new(),
        }
    }

    pub fn index(&self) -> &'a GraphIndex {
        self.index
    }

    /// Greedy beam search. Upper levels are descended greedily with exact
    /// distances; at level 0 every unvisited neighbour goes through
    /// `dco.compare` against the current worst result (or +∞ while fewer
    /// than `ef` results are held).
    pub fn search<D: Dco>(
        &mut self,
        dco: &D,
        ctx: &mut QueryContext<D::Payload>,
        k: usize,
        ef: usize,
        opts: SearchOptions,
    ) -> Result<SearchOutput> {
        let index = self.index;
        let data = index.data.as_ref();
        if k == 0 {
            return Err(Error::invalid("k must be positive"));
        }
        if ef < k {
            return Err(Error::invalid(format!("ef = {ef} is smaller than k = {k}")));
        }
        if ctx.query.len() != data.dim() {
            return Err(Error::DimensionMismatch {
                expected: data.dim(),
                actual: ctx.query.len(),
            });
        }
        dco.validate(data)?;
        if index.is_empty() {
            return Ok(SearchOutput {
                ids: Vec::new(),
                dists: Vec::new(),
                stats: SearchStats::default(),
                hop_trace: opts.record_hops.then(Vec::new),
            });
        }

        let dims_before = ctx.dims;
        let mut stats = SearchStats {
            false_negatives: opts.audit.then_some(0),
            ..SearchStats::default()
        };
        let mut trace = opts.record_hops.then(Vec::new);
        let mut audit_time = Duration::ZERO;
        let start = Instant::now();

        let q: &[f32] = &ctx.query;
        let mut ep = Scored(l2_sq(q, data.row(index.entry_point as usize)), index.entry_point);
        for level in (1..=index.max_level).rev() {
            loop {
                let mut moved = false;
                for &v in index.neighbors(ep.1, level) {
                    let d = l2_sq(q, data.row(v as usize));
                    if d < ep.0 {
                        ep = Scored(d, v);
                        moved = true;
                    }
                }
                if !moved {
                    break;
                }
            }
        }

        self.visited.reset();
        self.candidates.clear();
        self.results.clear();
        self.visited.insert(ep.1);
        self.candidates.push(Reverse(ep));
        self.results.push(ep);

        while let Some(Reverse(c)) = self.candidates.pop() {
            let threshold = self.threshold(ef);
            if c.0 > threshold {
                break;
            }
            stats.hops += 1;
            if let Some(t) = trace.as_mut() {
                t.push(c.1);
            }
            for &v in &index.links[c.1 as usize][0] {
                if !self.visited.insert(v) {
                    continue;
                }
                let threshold = self.threshold(ef);
                stats.comparisons += 1;
                match dco.compare(ctx, data, c.1, v, threshold) {
                    CompareOutcome::Pruned => {
                        stats.pruned_count += 1;
                        if opts.audit {
                            let t0 = Instant::now();
                            let exact = l2_sq(&ctx.query, data.row(v as usize));
                            if exact <= threshold {
                                *stats.false_negatives.as_mut().unwrap() += 1;
                            }
                            audit_time += t0.elapsed();
                        }
                    }
                    CompareOutcome::Admit(d) => {
                        stats.full_dist_count += 1;
                        if d < threshold {
                            self.candidates.push(Reverse(Scored(d, v)));
                            self.results.push(Scored(d, v));
                            if self.results.len() > ef {
                                self.results.pop();
                            }
                        }
                    }
                }
            }
        }

        stats.elapsed = start.elapsed().saturating_sub(audit_time);
        stats.dims_evaluated = ctx.dims - dims_before;
        let mut sorted = std::mem::take(&mut self.results).into_sorted_vec();
        sorted.truncate(k);
        Ok(SearchOutput {
            ids: sorted.iter().map(|s| s.1).collect(),
            dists: sorted.iter().map(|s| s.0).collect(),
            stats,
            hop_trace: trace,
        })
    }

    #[inline]
    fn threshold(&self, ef: usize) -> f32 {
        if self.results.len() < ef {
            f32::INFINITY
        } else {
            self.results.peek().map_or(f32::INFINITY, |s| s.0)
        }
    }
}

impl GraphIndex {
    /// One-shot convenience: preprocess `q` and search.
    pub fn beam_search<D: Dco>(
        &self,
        dco: &D,
        q: &[f32],
        k: usize,
        ef: usize,
        opts: SearchOptions,
    ) -> Result<SearchOutput> {
        let mut ctx = dco.preprocess(q)?;
        self.searcher().search(dco, &mut ctx, k, ef, opts)
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::data::{brute_force_knn, synth, VectorSet};
    use crate::dco::ExactDco;
    use crate::graph::{build_hnsw, BuildParams};

    fn index(n: usize, dim: usize, m: usize) -> GraphIndex {
        let data = Arc::new(synth::gaussian(n, dim, 42));
        build_hnsw(data, BuildParams { m, ef_construction: 100, seed: 1 }).unwrap()
    }

    #[test]
    fn ef_equal_n_matches_oracle() {
        let g = index(500, 8, 8);
        let queries = synth::gaussian(20, 8, 7);
        let gt = brute_force_knn(g.data(), &queries, 10).unwrap();
        let dco = ExactDco::new(8);
        for (qi, q) in queries.rows().enumerate() {
            let out = g.beam_search(&dco, q, 10, 500, SearchOptions::default()).unwrap();
            assert_eq!(out.ids, gt.ids(qi));
        }
    }

    #[test]
    fn accounting_identity_and_exact_dims() {
        let g = index(800, 16, 8);
        let dco = ExactDco::new(16);
        let q = synth::gaussian(1, 16, 3);
        let out = g.beam_search(&dco, q.row(0), 10, 40, SearchOptions { audit: true, record_hops: true }).unwrap();
        let s = &out.stats;
        assert!(s.comparisons > 0);
        assert_eq!(s.pruned_count + s.full_dist_count, s.comparisons);
        assert_eq!(s.dims_evaluated, 16 * s.full_dist_count);
        assert_eq!(s.false_negatives, Some(0));
        assert_eq!(out.hop_trace.unwrap().len() as u64, s.hops);
        assert!(out.dists.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn argument_errors() {
        let g = index(50, 4, 4);
        let dco = ExactDco::new(4);
        assert!(g.beam_search(&dco, &[0.0; 4], 10, 5, SearchOptions::default()).is_err());
        assert!(g.beam_search(&ExactDco::new(3), &[0.0; 3], 1, 5, SearchOptions::default()).is_err());
    }

    #[test]
    fn result_size_bounded_by_reachable() {
        let data = Arc::new(VectorSet::new(1, vec![0.0, 1.0, 2.0]).unwrap());
        let g = build_hnsw(data, BuildParams { m: 2, ef_construction: 4, seed: 0 }).unwrap();
        let out = g.beam_search(&ExactDco::new(1), &[0.2], 5, 5, SearchOptions::default()).unwrap();
        assert_eq!(out.ids, vec![0, 1, 2]);
    }
}
