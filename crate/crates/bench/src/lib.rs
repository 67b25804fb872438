//! Shared fixtures for the criterion benchmarks.

use std::sync::Arc;

use dco_core::data::synth;
use dco_core::geometry::{fit_finger, GeoModel};
use dco_core::projection::{fit_lsh, ProjectionModel};
use dco_core::quant::{fit_opq, OpqParams, QuantModel};
use dco_core::transform::{fit_ads, fit_dwt, fit_pca, TransformModel};
use dco_core::{build_hnsw, BuildParams, GraphIndex, VectorSet};

pub struct Fixture {
    pub base: VectorSet,
    pub queries: VectorSet,
    pub raw: GraphIndex,
    pub pca: TransformModel,
    pub pca_index: GraphIndex,
    pub dwt: TransformModel,
    pub dwt_index: GraphIndex,
    pub ads: TransformModel,
    pub ads_index: GraphIndex,
    pub lsh: ProjectionModel,
    pub opq: QuantModel,
    pub finger: GeoModel,
}

fn index(data: VectorSet) -> GraphIndex {
    build_hnsw(
        Arc::new(data),
        BuildParams {
            m: 16,
            ef_construction: 100,
            seed: 0,
        },
    )
    .expect("fixture index")
}

impl Fixture {
    /// Correlated Gaussian workload with every operator fitted.
    pub fn correlated(n: usize, dim: usize, queries: usize) -> Self {
        let (base, queries) = synth::correlated(n, queries, dim, 100.0, 1);
        let pca = fit_pca(&base).expect("pca");
        let dwt = fit_dwt(dim).expect("dwt");
        let ads = fit_ads(dim, 0).expect("ads");
        let raw = index(base.clone());
        let opq = fit_opq(
            &base,
            &base,
            OpqParams {
                m: dim / 8,
                ks: 64,
                t1: 4,
                t2: 4,
                seed: 0,
            },
        )
        .expect("opq");
        Self {
            pca_index: index(pca.apply(&base).expect("pca space")),
            dwt_index: index(dwt.apply(&base).expect("dwt space")),
            ads_index: index(ads.apply(&base).expect("ads space")),
            lsh: fit_lsh(&base, 32, 0.9, 0).expect("lsh"),
            finger: fit_finger(&raw, 64, 0).expect("finger"),
            opq,
            pca,
            dwt,
            ads,
            raw,
            base,
            queries,
        }
    }
}
