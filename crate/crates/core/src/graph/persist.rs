//! Binary index container.
//!
//! ```text
//! magic        8 bytes  "DCOHNSW\0"
//! version      u32      1
//! dim          u32
//! count        u64
//! m            u32
//! ef_constr    u32
//! max_level    u32
//! entry_point  u32
//! seed         u64
//! fingerprint  u64      hash of the vectors the graph was built on
//! levels       count × u8
//! adjacency    for node in 0..count, for level in 0..=levels[node]:
//!                  u32 degree, degree × u32 neighbour id
//! ```
//! All integers little-endian.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use super::{BuildParams, GraphIndex};
use crate::binio::{Reader, Writer};
use crate::data::VectorSet;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"DCOHNSW\0";
pub const INDEX_VERSION: u32 = 1;

impl GraphIndex {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }

    fn write_to<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut w = Writer::new(w);
        w.bytes(MAGIC)?;
        w.u32(INDEX_VERSION)?;
        w.u32(self.dim() as u32)?;
        w.u64(self.len() as u64)?;
        w.u32(self.params.m as u32)?;
        w.u32(self.params.ef_construction as u32)?;
        w.u32(self.max_level as u32)?;
        w.u32(self.entry_point)?;
        w.u64(self.params.seed)?;
        w.u64(self.data.fingerprint())?;
        let levels: Vec<u8> = self.links.iter().map(|l| (l.len() - 1) as u8).collect();
        w.bytes(&levels)?;
        for node in &self.links {
            for list in node {
                w.u32(list.len() as u32)?;
                for &v in list {
                    w.u32(v)?;
                }
            }
        }
        w.into_inner().flush()
    }

    /// Loads a graph and binds it to `data`, which must be exactly the vector
    /// set the graph was built on.
    pub fn load(path: impl AsRef<Path>, data: Arc<VectorSet>) -> Result<Self> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes, data)
    }

    pub(crate) fn decode(bytes: &[u8], data: Arc<VectorSet>) -> Result<Self> {
        let mut r = Reader::new(bytes, "index");
        if r.bytes(8)? != MAGIC {
            return Err(r.bad("bad magic"));
        }
        let version = r.u32()?;
        if version != INDEX_VERSION {
            return Err(Error::Version {
                what: "index",
                found: version,
                expected: INDEX_VERSION,
            });
        }
        let dim = r.u32()? as usize;
        let count = r.u64()? as usize;
        let m = r.u32()? as usize;
        let ef_construction = r.u32()? as usize;
        let max_level = r.u32()? as usize;
        let entry_point = r.u32()?;
        let seed = r.u64()?;
        let fingerprint = r.u64()?;
        if dim != data.dim() || count != data.len() {
            return Err(Error::ModelMismatch(format!(
                "index covers {count}×{dim}, data is {}×{}",
                data.len(),
                data.dim()
            )));
        }
        if fingerprint != data.fingerprint() {
            return Err(Error::ModelMismatch(
                "index was built on different vectors".into(),
            ));
        }
        let levels = r.bytes(count)?.to_vec();
        let mut links = Vec::with_capacity(count);
        for &l in &levels {
            let mut node = Vec::with_capacity(l as usize + 1);
            for _ in 0..=l {
                let deg = r.u32()? as usize;
                let mut list = Vec::with_capacity(deg);
                for _ in 0..deg {
                    list.push(r.u32()?);
                }
                node.push(list);
            }
            links.push(node);
        }
        r.finish()?;
        let index = GraphIndex {
            data,
            params: BuildParams {
                m,
                ef_construction,
                seed,
            },
            links,
            entry_point,
            max_level,
        };
        index.check_invariants().map_err(|e| Error::Format {
            format: "index",
            reason: e.to_string(),
        })?;
        Ok(index)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth;
    use crate::graph::build_hnsw;

    #[test]
    fn save_load_roundtrip() {
        let data = Arc::new(synth::gaussian(300, 6, 5));
        let g = build_hnsw(data.clone(), BuildParams { m: 5, ef_construction: 20, seed: 3 }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.hnsw");
        g.save(&p).unwrap();
        let back = GraphIndex::load(&p, data).unwrap();
        assert_eq!(back.links, g.links);
        assert_eq!(back.entry_point, g.entry_point);
        assert_eq!(back.params, g.params);
    }

    #[test]
    fn rejects_other_data_and_versions() {
        let data = Arc::new(synth::gaussian(100, 4, 5));
        let g = build_hnsw(data, BuildParams { m: 4, ef_construction: 10, seed: 3 }).unwrap();
        let mut buf = Vec::new();
        g.write_to(&mut buf).unwrap();
        let other = Arc::new(synth::gaussian(100, 4, 6));
        assert!(matches!(GraphIndex::decode(&buf, other), Err(Error::ModelMismatch(_))));
        let mut bumped = buf.clone();
        bumped[8] = 9;
        assert!(matches!(
            GraphIndex::decode(&bumped, g.data().clone()),
            Err(Error::Version { .. })
        ));
        assert!(GraphIndex::decode(&buf[..buf.len() - 2], g.data().clone()).is_err());
    }
}
