use std::sync::Arc;

use dco_core::data::{brute_force_knn, l2_sq, synth};
use dco_core::geometry::fit_finger;
use dco_core::harness::{run_dco, SweepConfig, Workload};
use dco_core::projection::fit_lsh;
use dco_core::quant::{fit_opq, OpqParams};
use dco_core::transform::{fit_ads, fit_dwt, fit_pca};
use dco_core::{build_hnsw, BuildParams, CompareOutcome, Dco, ExactDco, GraphIndex, VectorSet};
use proptest::prelude::*;

fn build(data: VectorSet) -> GraphIndex {
    build_hnsw(
        Arc::new(data),
        BuildParams {
            m: 12,
            ef_construction: 80,
            seed: 1,
        },
    )
    .unwrap()
}

fn cfg() -> SweepConfig {
    SweepConfig {
        k: 10,
        efs: vec![10, 40],
        repetitions: 1,
        audit: true,
    }
}

#[test]
fn transformations_match_their_baseline() {
    let (base, queries) = synth::correlated(3000, 30, 48, 80.0, 7);
    for t in [
        fit_pca(&base).unwrap().with_delta_d(8).unwrap(),
        fit_dwt(48).unwrap().with_delta_d(8).unwrap(),
    ] {
        let index = build(t.apply(&base).unwrap());
        let tq = t.apply(&queries).unwrap();
        let gt = brute_force_knn(index.data(), &tq, 10).unwrap();
        let exact = run_dco(&ExactDco::new(t.output_dim()), "exact", &Workload { dataset: "c", index: &index, queries: &tq, gt: &gt }, &cfg()).unwrap();
        let ours = run_dco(&t, "t", &Workload { dataset: "c", index: &index, queries: &queries, gt: &gt }, &cfg()).unwrap();
        for (a, b) in ours.iter().zip(&exact) {
            assert_eq!(a.recall, b.recall);
            assert_eq!(a.fn_ratio, Some(0.0));
            assert_eq!(a.t, b.t);
            assert!(a.p_v > 0.0 && b.p_v == 0.0);
        }
    }
}

#[test]
fn approximate_operators_stay_close_to_exact() {
    let (base, queries) = synth::correlated(3000, 30, 32, 20.0, 8);
    let index = build(base.clone());
    let gt = brute_force_knn(&base, &queries, 10).unwrap();
    let w = Workload {
        dataset: "c",
        index: &index,
        queries: &queries,
        gt: &gt,
    };
    let exact = run_dco(&ExactDco::new(32), "exact", &w, &cfg()).unwrap();
    let ads = fit_ads(32, 3).unwrap().with_delta_d(8).unwrap();
    let ads_index = build(ads.apply(&base).unwrap());
    let ads_gt = brute_force_knn(ads_index.data(), &ads.apply(&queries).unwrap(), 10).unwrap();
    let ads_rec = run_dco(&ads, "ads", &Workload { dataset: "c", index: &ads_index, queries: &queries, gt: &ads_gt }, &cfg()).unwrap();
    let lsh = run_dco(&fit_lsh(&base, 16, 0.95, 0).unwrap(), "lsh", &w, &cfg()).unwrap();
    let opq_model = fit_opq(&base, &base, OpqParams { m: 8, ks: 32, t1: 3, t2: 3, seed: 0 }).unwrap();
    let opq = run_dco(&opq_model.with_alpha(1.2).unwrap(), "opq", &w, &cfg()).unwrap();
    let finger = run_dco(&fit_finger(&index, 64, 0).unwrap().with_alpha(1.3).unwrap(), "finger", &w, &cfg()).unwrap();
    for recs in [&ads_rec, &lsh, &opq, &finger] {
        for (r, e) in recs.iter().zip(&exact) {
            assert!(r.recall >= e.recall - 0.15, "{} recall {} vs exact {}", r.dco, r.recall, e.recall);
            assert!(r.p_v > 0.0, "{} never pruned", r.dco);
            assert!(r.fn_ratio.is_some());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lower_bound_pruning_is_sound(
        q in prop::collection::vec(-10.0f32..10.0, 20),
        v in prop::collection::vec(-10.0f32..10.0, 20),
        scale in 0.0f32..2.0,
    ) {
        let base = synth::gaussian(50, 20, 0);
        for t in [fit_pca(&base).unwrap().with_delta_d(4).unwrap(), fit_dwt(20).unwrap().with_delta_d(4).unwrap()] {
            let data = t.apply(&VectorSet::new(20, v.clone()).unwrap()).unwrap();
            let mut ctx = t.preprocess(&q).unwrap();
            let exact = l2_sq(ctx.query(), data.row(0));
            let thr = exact * scale;
            match t.compare(&mut ctx, &data, 0, 0, thr) {
                CompareOutcome::Pruned => prop_assert!(exact > thr),
                CompareOutcome::Admit(d) => prop_assert_eq!(d, exact),
            }
        }
    }
}
