//! The distance comparison operator (DCO) contract.
//!
//! A DCO replaces the single admission test of the beam search: given a
//! candidate and the current result-heap threshold it either certifies the
//! candidate cannot improve the result set ([`CompareOutcome::Pruned`]) or
//! hands back its exact squared distance.

mod exact;
mod model;

pub use exact::ExactDco;
pub use model::{DcoModel, MODEL_VERSION};

use std::time::{Duration, Instant};

use crate::data::VectorSet;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CompareOutcome {
    Pruned,
    /// Exact squared distance between the candidate and the query.
    Admit(f32),
}

/// Broad technique families; they determine which benefit inequality applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Baseline,
    Transformation,
    Projection,
    Quantization,
    Geometry,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DcoKind {
    Exact,
    Pca,
    Dwt,
    Ads,
    Lsh,
    External,
    Opq,
    Finger,
}

impl DcoKind {
    pub const ALL: [DcoKind; 8] = [
        DcoKind::Exact,
        DcoKind::Pca,
        DcoKind::Dwt,
        DcoKind::Ads,
        DcoKind::Lsh,
        DcoKind::External,
        DcoKind::Opq,
        DcoKind::Finger,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DcoKind::Exact => "exact",
            DcoKind::Pca => "pca",
            DcoKind::Dwt => "dwt",
            DcoKind::Ads => "ads",
            DcoKind::Lsh => "lsh",
            DcoKind::External => "external",
            DcoKind::Opq => "opq",
            DcoKind::Finger => "finger",
        }
    }

    pub fn family(self) -> Family {
        match self {
            DcoKind::Exact => Family::Baseline,
            DcoKind::Pca | DcoKind::Dwt | DcoKind::Ads => Family::Transformation,
            DcoKind::Lsh | DcoKind::External => Family::Projection,
            DcoKind::Opq => Family::Quantization,
            DcoKind::Finger => Family::Geometry,
        }
    }

    /// Estimator never exceeds the true distance.
    pub fn is_lower_bound(self) -> bool {
        matches!(self, DcoKind::Exact | DcoKind::Pca | DcoKind::Dwt)
    }
}

impl std::str::FromStr for DcoKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        DcoKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| crate::Error::invalid(format!("unknown DCO '{s}'")))
    }
}

/// Per-(query, DCO) state. Never shared between concurrent searches.
#[derive(Debug, Clone)]
pub struct QueryContext<P> {
    /// The query expressed in the index's vector space.
    pub(crate) query: Vec<f32>,
    pub(crate) payload: P,
    pub(crate) dims: u64,
    pub(crate) preprocess_elapsed: Duration,
}

impl<P> QueryContext<P> {
    pub fn query(&self) -> &[f32] {
        &self.query
    }

    pub fn payload(&self) -> &P {
        &self.payload
    }

    /// Coordinates evaluated so far by this context (approximate and full).
    pub fn dims_evaluated(&self) -> u64 {
        self.dims
    }

    /// Wall time of the query-side preprocessing.
    pub fn preprocess_elapsed(&self) -> Duration {
        self.preprocess_elapsed
    }
}

pub trait Dco {
    type Payload;

    fn kind(&self) -> DcoKind;

    /// Dimension of raw (untransformed) queries.
    fn input_dim(&self) -> usize;

    /// Checks this operator may run against `data`, the vectors the index
    /// was built on.
    fn validate(&self, data: &VectorSet) -> Result<()>;

    /// Query-side work: returns the query in index space plus the payload.
    fn prepare(&self, q: &[f32], query_id: Option<usize>) -> Result<(Vec<f32>, Self::Payload)>;

    /// The single admission test of the search loop.
    fn compare(
        &self,
        ctx: &mut QueryContext<Self::Payload>,
        data: &VectorSet,
        from: u32,
        candidate: u32,
        threshold_sq: f32,
    ) -> CompareOutcome;

    /// Raw squared-distance estimate, used for approximation-ratio studies.
    /// Transformation operators evaluate the first `fraction` of dimensions.
    fn estimate_sq(
        &self,
        ctx: &mut QueryContext<Self::Payload>,
        data: &VectorSet,
        from: u32,
        candidate: u32,
        fraction: f32,
    ) -> f32;

    /// Hyper-parameters as a compact `key=value;...` string.
    fn params(&self) -> String {
        String::new()
    }

    fn preprocess(&self, q: &[f32]) -> Result<QueryContext<Self::Payload>> {
        self.preprocess_at(q, None)
    }

    /// Like [`Dco::preprocess`] but tells the operator which query of the
    /// workload this is; external projections use it to pick precomputed
    /// query embeddings.
    fn preprocess_at(&self, q: &[f32], query_id: Option<usize>) -> Result<QueryContext<Self::Payload>> {
        if q.len() != self.input_dim() {
            return Err(crate::Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: q.len(),
            });
        }
        let start = Instant::now();
        let (query, payload) = self.prepare(q, query_id)?;
        Ok(QueryContext {
            query,
            payload,
            dims: 0,
            preprocess_elapsed: start.elapsed(),
        })
    }
}
