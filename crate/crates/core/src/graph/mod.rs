//! Hierarchical navigable small world graph: construction with exact
//! distances and the instrumented beam search with a pluggable DCO.

mod persist;
mod search;

pub use search::{SearchOptions, SearchOutput, SearchStats, Searcher};

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{l2_sq, VectorSet};
use crate::error::{Error, Result};

/// `(squared distance, node)` ordered by distance, then id.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Scored(pub f32, pub u32);

impl Eq for Scored {}

impl PartialOrd for Scored {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scored {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuildParams {
    pub m: usize,
    pub ef_construction: usize,
    pub seed: u64,
}

impl Default for BuildParams {
    fn default() -> Self {
        Self {
            m: 16,
            ef_construction: 500,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GraphIndex {
    data: Arc<VectorSet>,
    params: BuildParams,
    /// `links[node][level]`; a node at level L owns lists for `0..=L`.
    links: Vec<Vec<Vec<u32>>>,
    entry_point: u32,
    max_level: usize,
}

impl GraphIndex {
    pub fn data(&self) -> &Arc<VectorSet> {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.data.dim()
    }

    pub fn params(&self) -> BuildParams {
        self.params
    }

    pub fn entry_point(&self) -> u32 {
        self.entry_point
    }

    pub fn max_level(&self) -> usize {
        self.max_level
    }

    pub fn level_of(&self, node: u32) -> usize {
        self.links[node as usize].len() - 1
    }

    pub fn neighbors(&self, node: u32, level: usize) -> &[u32] {
        self.links[node as usize]
            .get(level)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Total number of level-0 directed edges.
    pub fn base_edge_count(&self) -> usize {
        self.links.iter().map(|l| l[0].len()).sum()
    }

    pub fn searcher(&self) -> Searcher<'_> {
        Searcher::new(self)
    }

    /// Checks the structural invariants: level nesting, degree caps, valid
    /// ids, no self loops.
    pub fn check_invariants(&self) -> Result<()> {
        let n = self.len() as u32;
        let m = self.params.m;
        for (node, levels) in self.links.iter().enumerate() {
            for (level, list) in levels.iter().enumerate() {
                let cap = if level == 0 { 2 * m } else { m };
                if list.len() > cap {
                    return Err(Error::invalid(format!(
                        "node {node} has degree {} > {cap} at level {level}",
                        list.len()
                    )));
                }
                for &v in list {
                    if v >= n || v as usize == node {
                        return Err(Error::invalid(format!("bad edge {node}->{v}")));
                    }
                    if self.links[v as usize].len() <= level {
                        return Err(Error::invalid(format!(
                            "edge {node}->{v} at level {level} above target's level"
                        )));
                    }
                }
            }
        }
        if !self.is_empty() && self.level_of(self.entry_point) != self.max_level {
            return Err(Error::invalid("entry point is not on the top level"));
        }
        Ok(())
    }
}

struct Visited {
    stamps: Vec<u32>,
    epoch: u32,
}

impl Visited {
    fn new(n: usize) -> Self {
        Self {
            stamps: vec![0; n],
            epoch: 0,
        }
    }

    fn reset(&mut self) {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamps.fill(0);
            self.epoch = 1;
        }
    }

    /// Marks `v`; returns false if it was already marked this epoch.
    #[inline]
    fn insert(&mut self, v: u32) -> bool {
        let s = &mut self.stamps[v as usize];
        if *s == self.epoch {
            false
        } else {
            *s = self.epoch;
            true
        }
    }
}

struct Builder<'a> {
    data: &'a VectorSet,
    m: usize,
    ef: usize,
    links: Vec<Vec<Vec<u32>>>,
    visited: Visited,
}

impl Builder<'_> {
    #[inline]
    fn dist(&self, a: u32, b: u32) -> f32 {
        l2_sq(self.data.row(a as usize), self.data.row(b as usize))
    }

    /// Greedy single-nearest walk at `level`.
    fn greedy(&self, q: &[f32], mut ep: Scored, level: usize) -> Scored {
        loop {
            let mut moved = false;
            for &v in &self.links[ep.1 as usize][level] {
                let d = l2_sq(q, self.data.row(v as usize));
                if d < ep.0 {
                    ep = Scored(d, v);
                    moved = true;
                }
            }
            if !moved {
                return ep;
            }
        }
    }

    /// ef-bounded best-first search; returns candidates ascending.
    fn search_layer(&mut self, q: &[f32], ep: Scored, level: usize) -> Vec<Scored> {
        self.visited.reset();
        self.visited.insert(ep.1);
        let mut candidates = BinaryHeap::new();
        let mut results = BinaryHeap::new();
        candidates.push(std::cmp::Reverse(ep));
        results.push(ep);
        while let Some(std::cmp::Reverse(c)) = candidates.pop() {
            let worst = results.peek().unwrap().0;
            if c.0 > worst && results.len() >= self.ef {
                break;
            }
            for &v in &self.links[c.1 as usize][level] {
                if !self.visited.insert(v) {
                    continue;
                }
                let d = l2_sq(q, self.data.row(v as usize));
                if results.len() < self.ef || d < results.peek().unwrap().0 {
                    candidates.push(std::cmp::Reverse(Scored(d, v)));
                    results.push(Scored(d, v));
                    if results.len() > self.ef {
                        results.pop();
                    }
                }
            }
        }
        results.into_sorted_vec()
    }

    /// Diversification rule: keep `c` only if it is closer to the base than
    /// to every neighbour already kept.
    fn select(&self, sorted: &[Scored], m: usize) -> Vec<u32> {
        let mut kept: Vec<u32> = Vec::with_capacity(m);
        for &Scored(d, c) in sorted {
            if kept.len() >= m {
                break;
            }
            if kept.iter().all(|&s| d < self.dist(c, s)) {
                kept.push(c);
            }
        }
        kept
    }

    fn connect(&mut self, n: u32, new: u32, level: usize) {
        let cap = if level == 0 { 2 * self.m } else { self.m };
        if self.links[n as usize][level].len() < cap {
            self.links[n as usize][level].push(new);
            return;
        }
        let mut cands: Vec<Scored> = self.links[n as usize][level]
            .iter()
            .chain(std::iter::once(&new))
            .map(|&v| Scored(self.dist(n, v), v))
            .collect();
        cands.sort_unstable();
        let kept = self.select(&cands, cap);
        self.links[n as usize][level] = kept;
    }
}

/// Builds the index with exact distances. Node levels are drawn as
/// `floor(-ln(U) / ln(M))` from a seeded generator.
pub fn build_hnsw(data: Arc<VectorSet>, params: BuildParams) -> Result<GraphIndex> {
    let BuildParams {
        m,
        ef_construction,
        seed,
    } = params;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if m < 2 {
        return Err(Error::invalid("M must be at least 2"));
    }
    if ef_construction < m {
        return Err(Error::invalid("ef_construction must be at least M"));
    }
    if data.len() > u32::MAX as usize {
        return Err(Error::invalid("too many vectors for 32-bit ids"));
    }
    let n = data.len();
    let ml = 1.0 / (m as f64).ln();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let levels: Vec<usize> = (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            ((-(1.0 - u).ln() * ml).floor() as usize).min(u8::MAX as usize)
        })
        .collect();

    let mut b = Builder {
        data: &data,
        m,
        ef: ef_construction,
        links: levels.iter().map(|&l| vec![Vec::new(); l + 1]).collect(),
        visited: Visited::new(n),
    };
    let mut entry = 0u32;
    let mut max_level = levels[0];
    for i in 1..n {
        let node = i as u32;
        let level = levels[i];
        let q = data.row(i);
        let mut ep = Scored(l2_sq(q, data.row(entry as usize)), entry);
        for l in (level + 1..=max_level).rev() {
            ep = b.greedy(q, ep, l);
        }
        for l in (0..=level.min(max_level)).rev() {
            let w = b.search_layer(q, ep, l);
            let kept = b.select(&w, m);
            for &v in &kept {
                b.connect(v, node, l);
            }
            b.links[i][l] = kept;
            ep = w[0];
        }
        if level > max_level {
            max_level = level;
            entry = node;
        }
    }
    let links = b.links;
    Ok(GraphIndex {
        data,
        params,
        links,
        entry_point: entry,
        max_level,
    })
}
