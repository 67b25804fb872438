//! A closed sum over every operator, plus its binary container.
//!
//! ```text
//! magic        8 bytes  "DCOMODEL"
//! version      u32      1
//! kind         u8       position in DcoKind::ALL
//! fingerprint  u64      hash of the base vectors the model is bound to (0 = unbound)
//! body         kind-specific, see the encoders below
//! ```

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::{Dco, DcoKind, ExactDco};
use crate::binio::{Reader, Writer};
use crate::data::VectorSet;
use crate::error::{Error, Result};
use crate::geometry::GeoModel;
use crate::projection::{ProjectionKind, ProjectionModel, QuerySide};
use crate::quant::QuantModel;
use crate::transform::{TransformKind, TransformModel};

const MAGIC: &[u8; 8] = b"DCOMODEL";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum DcoModel {
    Exact(ExactDco),
    Transform(TransformModel),
    Projection(ProjectionModel),
    Quant(QuantModel),
    Geometry(GeoModel),
}

/// Runs `$body` with `$d` bound to the concrete operator inside a [`DcoModel`].
#[macro_export]
macro_rules! with_dco {
    ($model:expr, $d:ident => $body:expr) => {
        match $model {
            $crate::dco::DcoModel::Exact($d) => $body,
            $crate::dco::DcoModel::Transform($d) => $body,
            $crate::dco::DcoModel::Projection($d) => $body,
            $crate::dco::DcoModel::Quant($d) => $body,
            $crate::dco::DcoModel::Geometry($d) => $body,
        }
    };
}

impl DcoModel {
    pub fn kind(&self) -> DcoKind {
        with_dco!(self, d => Dco::kind(d))
    }

    pub fn params(&self) -> String {
        with_dco!(self, d => Dco::params(d))
    }

    pub fn input_dim(&self) -> usize {
        with_dco!(self, d => Dco::input_dim(d))
    }

    pub fn validate(&self, data: &VectorSet) -> Result<()> {
        with_dco!(self, d => Dco::validate(d, data))
    }

    /// Returns a copy with one tunable hyper-parameter changed. Keys:
    /// `alpha` (external, OPQ, FINGER), `p_tau` (LSH), `delta_d` and
    /// `epsilon0` (transformations).
    pub fn with_param(&self, key: &str, value: f64) -> Result<DcoModel> {
        let unsupported = || Error::invalid(format!("{} has no parameter '{key}'", self.kind().name()));
        Ok(match (self, key) {
            (DcoModel::Transform(m), "delta_d") => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(Error::invalid(format!("delta_d = {value} must be a positive integer")));
                }
                DcoModel::Transform(m.clone().with_delta_d(value as usize)?)
            }
            (DcoModel::Transform(m), "epsilon0") => DcoModel::Transform(m.clone().with_epsilon0(value as f32)?),
            (DcoModel::Projection(m), "p_tau") => DcoModel::Projection(m.clone().with_p_tau(value)?),
            (DcoModel::Projection(m), "alpha") => DcoModel::Projection(m.clone().with_alpha(value as f32)?),
            (DcoModel::Quant(m), "alpha") => DcoModel::Quant(m.clone().with_alpha(value as f32)?),
            (DcoModel::Geometry(m), "alpha") => DcoModel::Geometry(m.clone().with_alpha(value as f32)?),
            _ => return Err(unsupported()),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>, fingerprint: u64) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = Writer::new(BufWriter::new(file));
        self.write_to(&mut w, fingerprint)
            .and_then(|_| w.into_inner().flush())
            .map_err(|e| Error::io(path, e))
    }

    /// Loads a model and the fingerprint of the data it was bound to.
    pub fn load(path: impl AsRef<Path>) -> Result<(DcoModel, u64)> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes)
    }

    pub fn encode(&self, fingerprint: u64) -> Vec<u8> {
        let mut w = Writer::new(Vec::new());
        self.write_to(&mut w, fingerprint).expect("in-memory write");
        w.into_inner()
    }

    fn write_to<W: Write>(&self, w: &mut Writer<W>, fingerprint: u64) -> std::io::Result<()> {
        w.bytes(MAGIC)?;
        w.u32(MODEL_VERSION)?;
        let tag = DcoKind::ALL.iter().position(|&k| k == self.kind()).unwrap();
        w.u8(tag as u8)?;
        w.u64(fingerprint)?;
        match self {
            DcoModel::Exact(m) => w.u32(m.input_dim() as u32),
            DcoModel::Transform(m) => {
                w.u32(m.input_dim as u32)?;
                w.u32(m.padded_dim as u32)?;
                w.f32s(&m.mean)?;
                w.f32s(&m.rotation)?;
                w.f32s(&m.eigenvalues)?;
                w.u8s(&m.droppable.iter().map(|&b| b as u8).collect::<Vec<_>>())?;
                w.u32(m.delta_d as u32)?;
                w.f32(m.epsilon0)
            }
            DcoModel::Projection(m) => {
                w.u32(m.input_dim as u32)?;
                match &m.query_side {
                    QuerySide::Matrix(mat) => {
                        w.u8(0)?;
                        w.f32s(mat)?;
                    }
                    QuerySide::Embeddings(e) => {
                        w.u8(1)?;
                        w.u32(e.dim() as u32)?;
                        w.f32s(e.as_slice())?;
                    }
                }
                w.u32(m.proj_dim as u32)?;
                w.f32s(m.projected.as_slice())?;
                w.f64(m.p_tau)?;
                w.f32(m.alpha)
            }
            DcoModel::Quant(m) => {
                w.u32(m.input_dim as u32)?;
                w.u32(m.m as u32)?;
                w.u32(m.ks as u32)?;
                w.u32(m.sub_dim as u32)?;
                w.f32s(&m.rotation)?;
                w.f32s(&m.codebooks)?;
                w.u8s(&m.codes)?;
                w.f32(m.alpha)?;
                w.len(m.distortion.len())?;
                for &d in &m.distortion {
                    w.f64(d)?;
                }
                Ok(())
            }
            DcoModel::Geometry(m) => {
                w.u32(m.input_dim as u32)?;
                w.u32(m.bits as u32)?;
                w.u64(m.seed)?;
                w.f32s(&m.proj)?;
                w.f32s(&m.node_norm_sq)?;
                w.f32s(&m.node_proj)?;
                w.u64s(&m.offsets.iter().map(|&o| o as u64).collect::<Vec<_>>())?;
                w.u32s(&m.targets)?;
                w.f32s(&m.edge_proj)?;
                w.f32s(&m.edge_res)?;
                w.u64s(&m.edge_bits)?;
                w.f32(m.alpha)
            }
        }
    }

    pub fn decode(bytes: &[u8]) -> Result<(DcoModel, u64)> {
        let mut r = Reader::new(bytes, "model");
        if r.bytes(8)? != MAGIC {
            return Err(r.bad("bad magic"));
        }
        let version = r.u32()?;
        if version != MODEL_VERSION {
            return Err(Error::Version {
                what: "model",
                found: version,
                expected: MODEL_VERSION,
            });
        }
        let tag = r.u8()? as usize;
        let kind = *DcoKind::ALL.get(tag).ok_or_else(|| r.bad(format!("unknown kind tag {tag}")))?;
        let fingerprint = r.u64()?;
        let model = match kind {
            DcoKind::Exact => DcoModel::Exact(ExactDco::new(r.u32()? as usize)),
            DcoKind::Pca | DcoKind::Dwt | DcoKind::Ads => {
                let tk = match kind {
                    DcoKind::Pca => TransformKind::Pca,
                    DcoKind::Dwt => TransformKind::Dwt,
                    _ => TransformKind::Ads,
                };
                let input_dim = r.u32()? as usize;
                let padded_dim = r.u32()? as usize;
                let mean = r.f32s()?;
                let rotation = r.f32s()?;
                let eigenvalues = r.f32s()?;
                let droppable: Vec<bool> = r.u8s()?.into_iter().map(|b| b != 0).collect();
                let delta_d = r.u32()? as usize;
                let epsilon0 = r.f32()?;
                let want_rot = if tk == TransformKind::Dwt { 0 } else { input_dim * input_dim };
                if rotation.len() != want_rot || droppable.len() != padded_dim || mean.len() != input_dim {
                    return Err(r.bad("inconsistent transform sizes"));
                }
                DcoModel::Transform(TransformModel::assemble(
                    tk, input_dim, padded_dim, mean, rotation, eigenvalues, droppable, delta_d, epsilon0,
                )?)
            }
            DcoKind::Lsh | DcoKind::External => {
                let input_dim = r.u32()? as usize;
                let side = match r.u8()? {
                    0 => QuerySide::Matrix(r.f32s()?),
                    1 => {
                        let dim = r.u32()? as usize;
                        QuerySide::Embeddings(VectorSet::new(dim, r.f32s()?)?)
                    }
                    t => return Err(r.bad(format!("unknown query-side tag {t}"))),
                };
                let proj_dim = r.u32()? as usize;
                let projected = VectorSet::new(proj_dim, r.f32s()?)?;
                let p_tau = r.f64()?;
                let alpha = r.f32()?;
                let m = crate::projection::external_projection(projected, side, input_dim, alpha)?;
                let m = if kind == DcoKind::Lsh {
                    ProjectionModel {
                        kind: ProjectionKind::Lsh,
                        alpha: 1.0,
                        ..m
                    }
                    .with_lsh_p_tau(p_tau)?
                } else {
                    m
                };
                DcoModel::Projection(m)
            }
            DcoKind::Opq => {
                let input_dim = r.u32()? as usize;
                let m = r.u32()? as usize;
                let ks = r.u32()? as usize;
                let sub_dim = r.u32()? as usize;
                let rotation = r.f32s()?;
                let codebooks = r.f32s()?;
                let codes = r.u8s()?;
                let alpha = r.f32()?;
                let n = r.len()?;
                let distortion = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
                let p = m * sub_dim;
                if m == 0
                    || ks == 0
                    || ks > 256
                    || p < input_dim
                    || rotation.len() != p * p
                    || codebooks.len() != m * ks * sub_dim
                    || codes.len() % m != 0
                    || codes.iter().any(|&c| c as usize >= ks)
                {
                    return Err(r.bad("inconsistent quantizer sizes"));
                }
                DcoModel::Quant(QuantModel {
                    input_dim,
                    m,
                    ks,
                    sub_dim,
                    rotation,
                    codebooks,
                    codes,
                    alpha,
                    distortion,
                })
            }
            DcoKind::Finger => {
                let input_dim = r.u32()? as usize;
                let bits = r.u32()? as usize;
                let seed = r.u64()?;
                let proj = r.f32s()?;
                let node_norm_sq = r.f32s()?;
                let node_proj = r.f32s()?;
                let offsets: Vec<usize> = r.u64s()?.into_iter().map(|o| o as usize).collect();
                let targets = r.u32s()?;
                let edge_proj = r.f32s()?;
                let edge_res = r.f32s()?;
                let edge_bits = r.u64s()?;
                let alpha = r.f32()?;
                let (n, e) = (node_norm_sq.len(), targets.len());
                if bits == 0
                    || proj.len() != bits * input_dim
                    || node_proj.len() != n * bits
                    || offsets.len() != n + 1
                    || offsets.last() != Some(&e)
                    || offsets.windows(2).any(|w| w[0] > w[1])
                    || edge_proj.len() != e
                    || edge_res.len() != e
                    || edge_bits.len() != e * bits.div_ceil(64)
                    || targets.iter().any(|&t| t as usize >= n)
                {
                    return Err(r.bad("inconsistent edge metadata sizes"));
                }
                DcoModel::Geometry(GeoModel {
                    input_dim,
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
                    alpha,
                })
            }
        };
        r.finish()?;
        Ok((model, fingerprint))
    }
}
