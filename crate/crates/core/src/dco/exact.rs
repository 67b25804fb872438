use super::{CompareOutcome, Dco, DcoKind, QueryContext};
use crate::data::{l2_sq, VectorSet};
use crate::error::Result;

/// Baseline: always computes the full distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactDco {
    dim: usize,
}

impl ExactDco {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl Dco for ExactDco {
    type Payload = ();

    fn kind(&self) -> DcoKind {
        DcoKind::Exact
    }

    fn input_dim(&self) -> usize {
        self.dim
    }

    fn validate(&self, data: &VectorSet) -> Result<()> {
        data.expect_dim(self.dim)
    }

    fn prepare(&self, q: &[f32], _: Option<usize>) -> Result<(Vec<f32>, ())> {
        Ok((q.to_vec(), ()))
    }

    #[inline]
    fn compare(&self, ctx: &mut QueryContext<()>, data: &VectorSet, _: u32, candidate: u32, _: f32) -> CompareOutcome {
        ctx.dims += data.dim() as u64;
        CompareOutcome::Admit(l2_sq(&ctx.query, data.row(candidate as usize)))
    }

    fn estimate_sq(&self, ctx: &mut QueryContext<()>, data: &VectorSet, _: u32, candidate: u32, _: f32) -> f32 {
        l2_sq(&ctx.query, data.row(candidate as usize))
    }
}
