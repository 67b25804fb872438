//! `.fvecs` / `.ivecs` / `.bvecs` readers and writers.
//!
//! Each record is a little-endian `i32` dimension followed by that many
//! components (`f32`, `i32` or `u8` respectively).

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use super::knn::GroundTruth;
use super::VectorSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VecFormat {
    Fvecs,
    Ivecs,
    Bvecs,
}

impl VecFormat {
    fn component_size(self) -> usize {
        match self {
            VecFormat::Fvecs | VecFormat::Ivecs => 4,
            VecFormat::Bvecs => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            VecFormat::Fvecs => "fvecs",
            VecFormat::Ivecs => "ivecs",
            VecFormat::Bvecs => "bvecs",
        }
    }

    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        path.extension()?.to_str()?.parse().ok()
    }
}

impl FromStr for VecFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fvecs" => Ok(VecFormat::Fvecs),
            "ivecs" => Ok(VecFormat::Ivecs),
            "bvecs" => Ok(VecFormat::Bvecs),
            other => Err(Error::invalid(format!("unknown vector format '{other}'"))),
        }
    }
}

pub fn load_vectors(path: impl AsRef<Path>, format: VecFormat) -> Result<VectorSet> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let set = decode(&bytes, format)?;
    if set.is_empty() {
        log::warn!("{} holds no vectors", path.display());
    }
    Ok(set)
}

pub(crate) fn decode(bytes: &[u8], format: VecFormat) -> Result<VectorSet> {
    let bad = |reason: String| Error::Format {
        format: format.name(),
        reason,
    };
    if bytes.is_empty() {
        return Ok(VectorSet::empty(0));
    }
    let csize = format.component_size();
    let mut dim: Option<usize> = None;
    let mut values = Vec::new();
    let mut pos = 0usize;
    let mut record = 0usize;
    while pos < bytes.len() {
        if bytes.len() - pos < 4 {
            return Err(bad(format!("truncated header in record {record}")));
        }
        let d = i32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap());
        if d <= 0 {
            return Err(bad(format!("non-positive dimension {d} in record {record}")));
        }
        let d = d as usize;
        match dim {
            None => {
                dim = Some(d);
                let per = 4 + d * csize;
                values.reserve(bytes.len() / per * d);
            }
            Some(expected) if expected != d => {
                return Err(bad(format!(
                    "record {record} has dimension {d}, expected {expected}"
                )))
            }
            _ => {}
        }
        pos += 4;
        let len = d * csize;
        if bytes.len() - pos < len {
            return Err(bad(format!("truncated body in record {record}")));
        }
        let body = &bytes[pos..pos + len];
        match format {
            VecFormat::Fvecs => values.extend(
                body.chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap())),
            ),
            VecFormat::Ivecs => values.extend(
                body.chunks_exact(4)
                    .map(|c| i32::from_le_bytes(c.try_into().unwrap()) as f32),
            ),
            VecFormat::Bvecs => values.extend(body.iter().map(|&b| b as f32)),
        }
        pos += len;
        record += 1;
    }
    VectorSet::new(dim.unwrap_or(0), values)
}

pub fn save_vectors(set: &VectorSet, path: impl AsRef<Path>, format: VecFormat) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(set, format)?;
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    w.write_all(&bytes)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub(crate) fn encode(set: &VectorSet, format: VecFormat) -> Result<Vec<u8>> {
    let dim = set.dim();
    let mut out = Vec::with_capacity(set.len() * (4 + 4 * dim));
    match format {
        VecFormat::Fvecs => {
            for row in set.rows() {
                out.extend_from_slice(&(dim as i32).to_le_bytes());
                for v in row {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        VecFormat::Ivecs => {
            for (r, row) in set.rows().enumerate() {
                out.extend_from_slice(&(dim as i32).to_le_bytes());
                for (c, &v) in row.iter().enumerate() {
                    if v.fract() != 0.0 || v < i32::MIN as f32 || v > i32::MAX as f32 {
                        return Err(Error::invalid(format!(
                            "value {v} at row {r}, column {c} is not a 32-bit integer"
                        )));
                    }
                    out.extend_from_slice(&(v as i32).to_le_bytes());
                }
            }
        }
        VecFormat::Bvecs => {
            return Err(Error::invalid("writing bvecs is not supported"));
        }
    }
    Ok(out)
}

fn with_extension(path: &Path, ext: &str) -> std::path::PathBuf {
    path.with_extension(ext)
}

/// Writes ids to `path` (ivecs) and squared distances to the sibling file
/// with an `.fvecs` extension.
pub fn save_ground_truth(gt: &GroundTruth, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let k = gt.k();
    let mut ids = Vec::with_capacity(gt.ids_flat().len() * 4 + gt.len() * 4);
    for row in gt.ids_flat().chunks(k.max(1)) {
        ids.extend_from_slice(&(k as i32).to_le_bytes());
        for &id in row {
            ids.extend_from_slice(&(id as i32).to_le_bytes());
        }
    }
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    w.write_all(&ids)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))?;
    let dists = VectorSet::new(k, gt.dists_flat().to_vec())?;
    save_vectors(&dists, with_extension(path, "fvecs"), VecFormat::Fvecs)
}

/// Reads ground truth written by [`save_ground_truth`]. The distance file is
/// optional so that third-party `*_groundtruth.ivecs` files also load; missing
/// distances are reported as NaN.
pub fn load_ground_truth(path: impl AsRef<Path>) -> Result<GroundTruth> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let ids = decode_ids(&bytes)?;
    let k = ids.1;
    let dist_path = with_extension(path, "fvecs");
    let dists = if dist_path.exists() && dist_path != path {
        let d = load_vectors(&dist_path, VecFormat::Fvecs)?;
        if d.dim() != k || d.len() * k != ids.0.len() {
            return Err(Error::Format {
                format: "ground truth",
                reason: "distance file shape differs from id file".into(),
            });
        }
        d.into_values()
    } else {
        vec![f32::NAN; ids.0.len()]
    };
    GroundTruth::from_flat(k, ids.0, dists)
}

fn decode_ids(bytes: &[u8]) -> Result<(Vec<u32>, usize)> {
    let mut out = Vec::new();
    let mut k = 0;
    let mut pos = 0;
    while pos < bytes.len() {
        if bytes.len() - pos < 4 {
            return Err(Error::Format {
                format: "ivecs",
                reason: "truncated header".into(),
            });
        }
        let d = i32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap());
        if d <= 0 || (k != 0 && d as usize != k) {
            return Err(Error::Format {
                format: "ivecs",
                reason: format!("bad row length {d}"),
            });
        }
        k = d as usize;
        pos += 4;
        if bytes.len() - pos < 4 * k {
            return Err(Error::Format {
                format: "ivecs",
                reason: "truncated body".into(),
            });
        }
        for c in bytes[pos..pos + 4 * k].chunks_exact(4) {
            let id = i32::from_le_bytes(c.try_into().unwrap());
            if id < 0 {
                return Err(Error::Format {
                    format: "ivecs",
                    reason: format!("negative id {id}"),
                });
            }
            out.push(id as u32);
        }
        pos += 4 * k;
    }
    Ok((out, k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn twelve_byte_record() {
        let mut bytes = 2i32.to_le_bytes().to_vec();
        bytes.extend_from_slice(&1.0f32.to_le_bytes());
        bytes.extend_from_slice(&2.0f32.to_le_bytes());
        let set = decode(&bytes, VecFormat::Fvecs).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.dim(), 2);
        assert_eq!(set.as_slice(), &[1.0, 2.0]);
        assert_eq!(encode(&set, VecFormat::Fvecs).unwrap(), bytes);
    }

    #[test]
    fn empty_file_and_empty_set() {
        let set = decode(&[], VecFormat::Fvecs).unwrap();
        assert_eq!(set.len(), 0);
        assert_eq!(set.dim(), 0);
        assert!(encode(&VectorSet::empty(3), VecFormat::Fvecs).unwrap().is_empty());
    }

    #[test]
    fn malformed_inputs() {
        let mut bytes = 2i32.to_le_bytes().to_vec();
        bytes.extend_from_slice(&1.0f32.to_le_bytes());
        assert!(decode(&bytes, VecFormat::Fvecs).is_err(), "truncated record");

        let mut mixed = 1i32.to_le_bytes().to_vec();
        mixed.extend_from_slice(&1.0f32.to_le_bytes());
        mixed.extend_from_slice(&2i32.to_le_bytes());
        mixed.extend_from_slice(&[0u8; 8]);
        assert!(decode(&mixed, VecFormat::Fvecs).is_err(), "inconsistent dims");

        let zero = 0i32.to_le_bytes().to_vec();
        assert!(decode(&zero, VecFormat::Fvecs).is_err(), "dim 0");
    }

    #[test]
    fn widening() {
        let mut b = 3i32.to_le_bytes().to_vec();
        b.extend_from_slice(&[0, 7, 255]);
        assert_eq!(decode(&b, VecFormat::Bvecs).unwrap().as_slice(), &[0.0, 7.0, 255.0]);

        let mut i = 2i32.to_le_bytes().to_vec();
        i.extend_from_slice(&(-4i32).to_le_bytes());
        i.extend_from_slice(&9i32.to_le_bytes());
        assert_eq!(decode(&i, VecFormat::Ivecs).unwrap().as_slice(), &[-4.0, 9.0]);
    }

    #[test]
    fn ivecs_rejects_fractional() {
        let set = VectorSet::new(1, vec![1.5]).unwrap();
        assert!(encode(&set, VecFormat::Ivecs).is_err());
    }

    #[test]
    fn file_roundtrip_and_ground_truth() {
        let dir = tempfile::tempdir().unwrap();
        let set = super::super::synth::gaussian(100, 16, 3);
        let p = dir.path().join("x.fvecs");
        save_vectors(&set, &p, VecFormat::Fvecs).unwrap();
        assert_eq!(load_vectors(&p, VecFormat::Fvecs).unwrap(), set);

        let gt = GroundTruth::from_flat(2, vec![3, 1, 0, 2], vec![0.5, 0.75, 1.0, 2.0]).unwrap();
        let gp = dir.path().join("gt.ivecs");
        save_ground_truth(&gt, &gp).unwrap();
        assert_eq!(load_ground_truth(&gp).unwrap(), gt);
    }

    proptest! {
        #[test]
        fn fvecs_roundtrip_is_bit_exact(
            dim in 1usize..20,
            rows in prop::collection::vec(prop::collection::vec(-1e30f32..1e30, 20), 0..30),
        ) {
            let values: Vec<f32> = rows.iter().flat_map(|r| r[..dim].iter().copied()).collect();
            let set = VectorSet::new(dim, values).unwrap();
            let back = decode(&encode(&set, VecFormat::Fvecs).unwrap(), VecFormat::Fvecs).unwrap();
            prop_assert_eq!(back.as_slice().len(), set.as_slice().len());
            for (a, b) in back.as_slice().iter().zip(set.as_slice()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
