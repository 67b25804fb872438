//! Benchmark driver: sweeps `ef` for one operator over a query workload and
//! reports accuracy, latency and pruning.

mod csv;

pub use csv::{parse_csv, write_csv, CsvContents, CSV_HEADER};

use std::hint::black_box;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{l2_sq, GroundTruth, VectorSet};
use crate::dco::{Dco, DcoModel, Family};
use crate::error::{Error, Result};
use crate::graph::{GraphIndex, SearchOptions, SearchStats};
use crate::metrics::{false_negative_ratio, pruning_ratios, recall, BenefitParams};
use crate::with_dco;

/// Queries and ground truth for one index.
pub struct Workload<'a> {
    pub dataset: &'a str,
    pub index: &'a GraphIndex,
    /// Queries in the operator's input space.
    pub queries: &'a VectorSet,
    pub gt: &'a GroundTruth,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub k: usize,
    pub efs: Vec<usize>,
    /// Timed passes per `ef`; latency is their mean.
    pub repetitions: usize,
    /// Run an extra untimed pass counting false negatives.
    pub audit: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            k: 20,
            efs: vec![20, 40, 80, 160, 320],
            repetitions: 3,
            audit: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub dataset: String,
    pub dco: String,
    pub params: String,
    pub ef: usize,
    pub k: usize,
    pub recall: f64,
    /// Mean per-query latency including preprocessing, microseconds.
    pub mean_us: f64,
    pub qps: f64,
    pub p_d: f64,
    pub p_v: f64,
    pub fn_ratio: Option<f64>,
    pub hops: f64,
    /// Mean comparisons per query.
    pub t: f64,
    pub preprocess_us: f64,
}

/// Measured unit costs of one operator, microseconds.
#[derive(Debug, Clone, PartialEq)]
pub struct CostProfile {
    pub dco: String,
    pub family: Family,
    pub dim: usize,
    /// One full squared distance.
    pub full_us: f64,
    /// Per evaluated coordinate of a comparison that never abandons.
    pub f_d_us: f64,
    /// One comparison against a zero threshold (approximation only).
    pub f_v_us: f64,
}

impl CostProfile {
    pub fn benefit_params(&self, record: &BenchRecord) -> BenefitParams {
        BenefitParams {
            t: record.t,
            dim: self.dim,
            f_d: self.f_d_us * 1e-6,
            f_v: self.f_v_us * 1e-6,
            c: record.preprocess_us * 1e-6,
            full_cost: self.full_us * 1e-6,
        }
    }
}

struct Pass {
    ids: Vec<Vec<u32>>,
    stats: SearchStats,
    preprocess: Duration,
}

fn run_pass<D: Dco>(dco: &D, w: &Workload, k: usize, ef: usize, opts: SearchOptions) -> Result<Pass> {
    let mut searcher = w.index.searcher();
    let mut stats = SearchStats::default();
    let mut preprocess = Duration::ZERO;
    let mut ids = Vec::with_capacity(w.queries.len());
    for (i, q) in w.queries.rows().enumerate() {
        let mut ctx = dco.preprocess_at(q, Some(i))?;
        let out = searcher.search(dco, &mut ctx, k, ef, opts)?;
        preprocess += ctx.preprocess_elapsed();
        stats.accumulate(&out.stats);
        ids.push(out.ids);
    }
    Ok(Pass { ids, stats, preprocess })
}

/// Sweeps `cfg.efs` for one operator. Timed passes run on the calling
/// thread only.
pub fn run_dco<D: Dco>(dco: &D, label: &str, w: &Workload, cfg: &SweepConfig) -> Result<Vec<BenchRecord>> {
    let nq = w.queries.len();
    if nq == 0 {
        return Err(Error::EmptyDataset);
    }
    if w.gt.len() != nq {
        return Err(Error::invalid(format!(
            "ground truth has {} rows for {nq} queries",
            w.gt.len()
        )));
    }
    if w.gt.k() < cfg.k {
        return Err(Error::invalid(format!(
            "ground truth holds {} neighbours, k = {} requested",
            w.gt.k(),
            cfg.k
        )));
    }
    if cfg.repetitions == 0 {
        return Err(Error::invalid("repetitions must be positive"));
    }
    dco.validate(w.index.data())?;

    let mut records = Vec::with_capacity(cfg.efs.len());
    for &ef in &cfg.efs {
        let mut total = Duration::ZERO;
        let mut preprocess = Duration::ZERO;
        let mut first: Option<Pass> = None;
        for _ in 0..cfg.repetitions {
            let pass = run_pass(dco, w, cfg.k, ef, SearchOptions::default())?;
            total += pass.stats.elapsed + pass.preprocess;
            preprocess += pass.preprocess;
            if first.is_none() {
                first = Some(pass);
            }
        }
        let pass = first.unwrap();
        let mut hit = 0.0;
        for (q, ids) in pass.ids.iter().enumerate() {
            hit += recall(ids, w.gt.ids(q), cfg.k)?;
        }
        let fn_ratio = if cfg.audit {
            let audited = run_pass(dco, w, cfg.k, ef, SearchOptions { audit: true, record_hops: false })?;
            Some(false_negative_ratio(&audited.stats)?)
        } else {
            None
        };
        let (p_d, p_v) = if pass.stats.comparisons == 0 {
            (0.0, 0.0)
        } else {
            pruning_ratios(&pass.stats, w.index.dim())?
        };
        let runs = (cfg.repetitions * nq) as f64;
        let mean_us = total.as_secs_f64() * 1e6 / runs;
        records.push(BenchRecord {
            dataset: w.dataset.to_string(),
            dco: label.to_string(),
            params: dco.params(),
            ef,
            k: cfg.k,
            recall: hit / nq as f64,
            mean_us,
            qps: if mean_us > 0.0 { 1e6 / mean_us } else { f64::INFINITY },
            p_d,
            p_v,
            fn_ratio,
            hops: pass.stats.hops as f64 / nq as f64,
            t: pass.stats.comparisons as f64 / nq as f64,
            preprocess_us: preprocess.as_secs_f64() * 1e6 / runs,
        });
    }
    Ok(records)
}

pub fn run_model(model: &DcoModel, label: &str, w: &Workload, cfg: &SweepConfig) -> Result<Vec<BenchRecord>> {
    with_dco!(model, d => run_dco(d, label, w, cfg))
}

fn time_per_call(calls: usize, mut f: impl FnMut(usize)) -> f64 {
    // warm-up, then the timed loop
    for i in 0..calls.min(64) {
        f(i);
    }
    let start = Instant::now();
    for i in 0..calls {
        f(i);
    }
    start.elapsed().as_secs_f64() * 1e6 / calls as f64
}

/// Measures `O(D)`, `f_d` and `f_v` for an operator on the workload's index.
/// Probes follow graph edges so hop-based operators see realistic reuse.
pub fn calibrate<D: Dco>(dco: &D, label: &str, w: &Workload, probes: usize, seed: u64) -> Result<CostProfile> {
    let data = w.index.data().as_ref();
    if data.is_empty() || w.queries.is_empty() {
        return Err(Error::EmptyDataset);
    }
    dco.validate(data)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(probes);
    while pairs.len() < probes {
        let c = rng.random_range(0..data.len()) as u32;
        let nbrs = w.index.neighbors(c, 0);
        if nbrs.is_empty() {
            if data.len() == 1 {
                pairs.push((c, c));
            }
            continue;
        }
        pairs.extend(nbrs.iter().take(probes - pairs.len()).map(|&v| (c, v)));
    }
    let q = w.queries.row(0);
    let mut ctx = dco.preprocess_at(q, Some(0))?;
    let dim = data.dim();

    let full_us = time_per_call(probes, |i| {
        black_box(l2_sq(black_box(ctx.query()), data.row(pairs[i].1 as usize)));
    });
    let admit_us = time_per_call(probes, |i| {
        black_box(dco.compare(&mut ctx, data, pairs[i].0, pairs[i].1, f32::INFINITY));
    });
    let f_v_us = time_per_call(probes, |i| {
        black_box(dco.compare(&mut ctx, data, pairs[i].0, pairs[i].1, 0.0));
    });
    Ok(CostProfile {
        dco: label.to_string(),
        family: dco.kind().family(),
        dim,
        full_us,
        f_d_us: admit_us / dim as f64,
        f_v_us,
    })
}

pub fn calibrate_model(model: &DcoModel, label: &str, w: &Workload, probes: usize, seed: u64) -> Result<CostProfile> {
    with_dco!(model, d => calibrate(d, label, w, probes, seed))
}
