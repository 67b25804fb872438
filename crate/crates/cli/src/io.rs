use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use dco_core::data::{load_vectors, VecFormat};
use dco_core::transform::TransformModel;
use dco_core::{DcoModel, GraphIndex, VectorSet};

pub fn format_of(path: &Path, explicit: Option<VecFormat>) -> Result<VecFormat> {
    match explicit.or_else(|| VecFormat::from_path(path)) {
        Some(f) => Ok(f),
        None => bail!("cannot infer the vector format of {}; pass --format", path.display()),
    }
}

pub fn load_vectors_any(path: &Path) -> Result<VectorSet> {
    let format = format_of(path, None)?;
    load_vectors(path, format).with_context(|| format!("loading {}", path.display()))
}

pub fn load_model(path: &Path) -> Result<(DcoModel, u64)> {
    DcoModel::load(path).with_context(|| format!("loading model {}", path.display()))
}

pub fn load_space(path: &Path) -> Result<TransformModel> {
    match load_model(path)?.0 {
        DcoModel::Transform(t) => Ok(t),
        other => bail!(
            "{} holds a {} model, not a transformation",
            path.display(),
            other.kind().name()
        ),
    }
}

/// Base vectors, transformed into the index space when `space` is given.
pub fn index_data(base: &Path, space: Option<&Path>) -> Result<VectorSet> {
    let raw = load_vectors_any(base)?;
    match space {
        None => Ok(raw),
        Some(s) => Ok(load_space(s)?.apply(&raw)?),
    }
}

pub fn load_index(path: &Path, data: Arc<VectorSet>) -> Result<GraphIndex> {
    GraphIndex::load(path, data).with_context(|| format!("loading index {}", path.display()))
}
