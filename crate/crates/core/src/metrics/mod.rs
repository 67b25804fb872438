//! Accuracy, pruning and cost measurements.

use std::collections::HashSet;

use crate::data::VectorSet;
use crate::dco::{Dco, Family};
use crate::error::{Error, Result};
use crate::graph::SearchStats;

/// `|top-k(result) ∩ top-k(gt)| / k`.
pub fn recall(result: &[u32], gt: &[u32], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("k must be positive"));
    }
    if result.len() < k || gt.len() < k {
        return Err(Error::invalid(format!(
            "recall@{k} needs {k} ids, got {} results and {} ground-truth ids",
            result.len(),
            gt.len()
        )));
    }
    let truth: HashSet<u32> = gt[..k].iter().copied().collect();
    let hit = result[..k].iter().filter(|id| truth.contains(id)).count();
    Ok(hit as f64 / k as f64)
}

/// `(p_d, p_v)` with `p_d = 1 − dims / (D·T)` and `p_v = 1 − full / T`.
pub fn pruning_ratios(stats: &SearchStats, dim: usize) -> Result<(f64, f64)> {
    if stats.comparisons == 0 {
        return Err(Error::invalid("no comparisons were performed"));
    }
    if dim == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    let t = stats.comparisons as f64;
    let p_d = 1.0 - stats.dims_evaluated as f64 / (dim as f64 * t);
    let p_v = 1.0 - stats.full_dist_count as f64 / t;
    Ok((p_d, p_v))
}

/// Wrongly pruned candidates per comparison; requires an audited search.
pub fn false_negative_ratio(stats: &SearchStats) -> Result<f64> {
    let fns = stats.false_negatives.ok_or(Error::AuditDisabled)?;
    if stats.comparisons == 0 {
        return Err(Error::invalid("no comparisons were performed"));
    }
    Ok(fns as f64 / stats.comparisons as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub count: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
    pub variance: f64,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn summarize(values: &[f64]) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::invalid("nothing to summarize"));
    }
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mean = s.iter().sum::<f64>() / n;
    let variance = s.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok(Summary {
        count: s.len(),
        min: s[0],
        q1: quantile(&s, 0.25),
        median: quantile(&s, 0.5),
        q3: quantile(&s, 0.75),
        max: s[s.len() - 1],
        mean,
        variance,
    })
}

/// One estimator probe: query number, hop source and candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Probe {
    pub query: usize,
    pub from: u32,
    pub candidate: u32,
}

/// Approximation ratios `est / true` in plain (not squared) distance units.
/// `queries` are in the operator's input space and `data` is the index's
/// vector set; pairs at zero true distance are skipped.
pub fn approximation_ratios<D: Dco>(
    dco: &D,
    data: &VectorSet,
    queries: &VectorSet,
    probes: &[Probe],
    fraction: f32,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(probes.len());
    let mut current: Option<(usize, _)> = None;
    for p in probes {
        if current.as_ref().map(|(q, _)| *q) != Some(p.query) {
            current = Some((p.query, dco.preprocess_at(queries.row(p.query), Some(p.query))?));
        }
        let ctx = &mut current.as_mut().unwrap().1;
        let truth = crate::data::l2_sq(ctx.query(), data.row(p.candidate as usize)) as f64;
        if truth == 0.0 {
            continue;
        }
        let est = dco.estimate_sq(ctx, data, p.from, p.candidate, fraction) as f64;
        out.push((est.max(0.0) / truth).sqrt());
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenefitParams {
    /// Comparisons per query.
    pub t: f64,
    pub dim: usize,
    /// Seconds per evaluated dimension.
    pub f_d: f64,
    /// Seconds per vector approximation.
    pub f_v: f64,
    /// Seconds of query preprocessing.
    pub c: f64,
    /// Seconds for one full distance, standing for `O(D)`.
    pub full_cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Benefit {
    pub beneficial: bool,
    /// Minimal pruning ratio that repays the extra costs.
    pub required: f64,
    /// The ratio compared against `required` (`p_d` or `p_v`).
    pub observed: f64,
}

/// Transformations: `p_d > 1 − O(D)/(D·f_d) + C/(T·D·f_d)`.
/// Everything else: `p_v > f_v/O(D) + C/(T·O(D))`.
pub fn benefit_check(params: &BenefitParams, p_d: f64, p_v: f64, family: Family) -> Result<Benefit> {
    let BenefitParams { t, dim, f_d, f_v, c, full_cost } = *params;
    if [t, f_d, f_v, c, full_cost].iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::invalid("benefit parameters must be non-negative"));
    }
    if t == 0.0 {
        return Err(Error::invalid("T = 0"));
    }
    let (required, observed) = match family {
        Family::Transformation => {
            let denom = dim as f64 * f_d;
            if denom == 0.0 {
                return Err(Error::invalid("D·f_d = 0"));
            }
            (1.0 - full_cost / denom + c / (t * denom), p_d)
        }
        _ => {
            if full_cost == 0.0 {
                return Err(Error::invalid("O(D) = 0"));
            }
            (f_v / full_cost + c / (t * full_cost), p_v)
        }
    };
    Ok(Benefit {
        beneficial: observed > required,
        required,
        observed,
    })
}

/// Indices of the points not dominated in (recall, qps), ordered by recall.
pub fn pareto_frontier(points: &[(f64, f64)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[b].0.total_cmp(&points[a].0).then(points[b].1.total_cmp(&points[a].1))
    });
    let mut best_qps = f64::NEG_INFINITY;
    let mut front = Vec::new();
    for i in order {
        if points[i].1 > best_qps {
            best_qps = points[i].1;
            front.push(i);
        }
    }
    front.reverse();
    front
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dco::ExactDco;

    fn stats(t: u64, full: u64, dims: u64) -> SearchStats {
        SearchStats {
            comparisons: t,
            full_dist_count: full,
            pruned_count: t - full,
            dims_evaluated: dims,
            ..SearchStats::default()
        }
    }

    #[test]
    fn recall_cases() {
        let gt: Vec<u32> = (0..20).collect();
        assert_eq!(recall(&gt, &gt, 20).unwrap(), 1.0);
        let disjoint: Vec<u32> = (100..120).collect();
        assert_eq!(recall(&disjoint, &gt, 20).unwrap(), 0.0);
        let mut one_off = gt.clone();
        one_off[3] = 999;
        assert_eq!(recall(&one_off, &gt, 20).unwrap(), 0.95);
        assert!(recall(&gt[..5], &gt, 20).is_err());
    }

    #[test]
    fn pruning_ratio_formulas() {
        let (_, p_v) = pruning_ratios(&stats(100, 7, 0), 10).unwrap();
        assert!((p_v - 0.93).abs() < 1e-12);
        let (p_d, _) = pruning_ratios(&stats(100, 7, 34944), 960).unwrap();
        assert!((p_d - 0.636).abs() < 1e-3);
        let (p_d, p_v) = pruning_ratios(&stats(100, 100, 96000), 960).unwrap();
        assert_eq!((p_d, p_v), (0.0, 0.0));
        assert!(pruning_ratios(&stats(0, 0, 0), 960).is_err());
    }

    #[test]
    fn false_negative_ratio_requires_audit() {
        let mut s = stats(100, 50, 0);
        assert!(matches!(false_negative_ratio(&s), Err(Error::AuditDisabled)));
        s.false_negatives = Some(3);
        assert!((false_negative_ratio(&s).unwrap() - 0.03).abs() < 1e-12);
    }

    #[test]
    fn summary_quantiles() {
        let s = summarize(&[4.0, 1.0, 3.0, 2.0, 5.0]).unwrap();
        assert_eq!((s.min, s.q1, s.median, s.q3, s.max), (1.0, 2.0, 3.0, 4.0, 5.0));
        assert_eq!(s.mean, 3.0);
        assert_eq!(s.variance, 2.0);
        assert!(summarize(&[]).is_err());
    }

    #[test]
    fn exact_operator_ratio_is_one() {
        let data = crate::data::synth::gaussian(50, 6, 0);
        let q = crate::data::synth::gaussian(2, 6, 1);
        let probes: Vec<Probe> = (0..40)
            .map(|i| Probe { query: i / 20, from: 0, candidate: i as u32 })
            .collect();
        let ar = approximation_ratios(&ExactDco::new(6), &data, &q, &probes, 1.0).unwrap();
        assert_eq!(ar.len(), 40);
        assert!(ar.iter().all(|&r| r == 1.0));
    }

    fn params(c: f64) -> BenefitParams {
        BenefitParams { t: 1000.0, dim: 128, f_d: 1e-9, f_v: 2e-8, c, full_cost: 1.2e-7 }
    }

    #[test]
    fn benefit_limits() {
        let b = benefit_check(&params(0.0), 1.0, 0.0, Family::Transformation).unwrap();
        assert!(b.beneficial);
        let b = benefit_check(&params(1e-6), 0.0, 0.0, Family::Quantization).unwrap();
        assert!(!b.beneficial);
        assert!((b.required - (2e-8 / 1.2e-7 + 1e-6 / (1000.0 * 1.2e-7))).abs() < 1e-12);
        assert!(benefit_check(&BenefitParams { t: 0.0, ..params(0.0) }, 0.5, 0.5, Family::Geometry).is_err());
        assert!(benefit_check(&BenefitParams { f_d: 0.0, ..params(0.0) }, 0.5, 0.5, Family::Transformation).is_err());
    }

    #[test]
    fn benefit_is_monotone() {
        for family in [Family::Transformation, Family::Projection] {
            let mut was = false;
            for i in 0..=100 {
                let r = i as f64 / 100.0;
                let b = benefit_check(&params(5e-7), r, r, family).unwrap().beneficial;
                assert!(!(was && !b));
                was = b;
            }
            assert!(was);
        }
    }

    #[test]
    fn frontier() {
        let pts = [(0.9, 100.0), (0.95, 50.0), (0.8, 90.0), (0.95, 60.0), (0.99, 10.0)];
        assert_eq!(pareto_frontier(&pts), vec![0, 3, 4]);
        assert!(pareto_frontier(&[]).is_empty());
    }
}
