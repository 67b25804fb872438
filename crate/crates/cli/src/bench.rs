//! Config-driven benchmark runs.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use dco_core::data::{load_ground_truth, GroundTruth};
use dco_core::harness::{calibrate_model, run_model, write_csv, BenchRecord, CostProfile, SweepConfig, Workload};
use dco_core::transform::TransformModel;
use dco_core::{DcoModel, ExactDco, GraphIndex, VectorSet};

use crate::config::Config;
use crate::io::{load_index, load_model, load_space, load_vectors_any};

const ARM_FIELDS: [&str; 7] = ["index", "model", "space", "alpha", "p_tau", "delta_d", "epsilon0"];
const SWEEP_FIELDS: [&str; 4] = ["alpha", "p_tau", "delta_d", "epsilon0"];
const TOP_KEYS: [&str; 11] = [
    "data.base",
    "data.queries",
    "data.gt",
    "bench.dataset",
    "bench.k",
    "bench.ef",
    "bench.repetitions",
    "bench.audit",
    "bench.out",
    "bench.calibrate",
    "bench.seed",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Arm {
    pub name: String,
    pub index: PathBuf,
    pub model: Option<PathBuf>,
    pub space: Option<PathBuf>,
    pub sweeps: Vec<(String, Vec<f64>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub base: PathBuf,
    pub queries: PathBuf,
    pub gt: PathBuf,
    pub dataset: String,
    pub sweep: SweepConfig,
    pub out: PathBuf,
    pub calibrate: usize,
    pub seed: u64,
    pub arms: Vec<Arm>,
}

impl Plan {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        let mut arm_order: Vec<String> = Vec::new();
        for (k, _) in cfg.entries() {
            if let Some(rest) = k.strip_prefix("dco.") {
                let (arm, field) = rest
                    .rsplit_once('.')
                    .with_context(|| format!("config key '{k}' should be dco.<name>.<field>"))?;
                if !ARM_FIELDS.contains(&field) {
                    bail!("config key '{k}': unknown field '{field}'");
                }
                if !arm_order.iter().any(|a| a == arm) {
                    arm_order.push(arm.to_string());
                }
            } else if !TOP_KEYS.contains(&k) {
                bail!("unknown config key '{k}'");
            }
        }
        if arm_order.is_empty() {
            bail!("config defines no dco.<name>.index entries");
        }
        let mut arms = Vec::new();
        for name in arm_order {
            let key = |f: &str| format!("dco.{name}.{f}");
            let mut sweeps = Vec::new();
            for f in SWEEP_FIELDS {
                if let Some(values) = cfg.list::<f64>(&key(f))? {
                    sweeps.push((f.to_string(), values));
                }
            }
            arms.push(Arm {
                index: cfg.require(&key("index"))?.into(),
                model: cfg.get(&key("model")).map(PathBuf::from),
                space: cfg.get(&key("space")).map(PathBuf::from),
                sweeps,
                name,
            });
        }
        let base = PathBuf::from(cfg.require("data.base")?);
        let dataset = match cfg.get("bench.dataset") {
            Some(d) => d.to_string(),
            None => base.file_stem().map_or("dataset".into(), |s| s.to_string_lossy().into_owned()),
        };
        let sweep = SweepConfig {
            k: cfg.parsed("bench.k", 20)?,
            efs: cfg.list("bench.ef")?.unwrap_or_else(|| SweepConfig::default().efs),
            repetitions: cfg.parsed("bench.repetitions", 3)?,
            audit: cfg.flag("bench.audit", false)?,
        };
        if sweep.efs.is_empty() {
            bail!("bench.ef is empty");
        }
        Ok(Plan {
            queries: cfg.require("data.queries")?.into(),
            gt: cfg.require("data.gt")?.into(),
            out: cfg.get("bench.out").unwrap_or("results.csv").into(),
            calibrate: cfg.parsed("bench.calibrate", 2000)?,
            seed: cfg.parsed("bench.seed", 0)?,
            base,
            dataset,
            sweep,
            arms,
        })
    }
}

/// Every combination of the arm's sweep lists.
fn variants(model: &DcoModel, sweeps: &[(String, Vec<f64>)]) -> Result<Vec<DcoModel>> {
    let mut out = vec![model.clone()];
    for (key, values) in sweeps {
        let mut next = Vec::with_capacity(out.len() * values.len());
        for m in &out {
            for &v in values {
                next.push(m.with_param(key, v)?);
            }
        }
        out = next;
    }
    Ok(out)
}

struct Loaded {
    spaces: HashMap<PathBuf, Arc<TransformModel>>,
    data: HashMap<Option<PathBuf>, Arc<VectorSet>>,
    indexes: HashMap<(PathBuf, Option<PathBuf>), Arc<GraphIndex>>,
    queries: HashMap<Option<PathBuf>, Arc<VectorSet>>,
}

impl Loaded {
    fn space(&mut self, path: &Path) -> Result<Arc<TransformModel>> {
        if let Some(s) = self.spaces.get(path) {
            return Ok(s.clone());
        }
        let s = Arc::new(load_space(path)?);
        self.spaces.insert(path.to_path_buf(), s.clone());
        Ok(s)
    }

    fn data(&mut self, space: Option<&Path>) -> Result<Arc<VectorSet>> {
        let key = space.map(Path::to_path_buf);
        if let Some(d) = self.data.get(&key) {
            return Ok(d.clone());
        }
        let raw = self.data[&None].clone();
        let d = Arc::new(self.space(space.unwrap())?.apply(&raw)?);
        self.data.insert(key, d.clone());
        Ok(d)
    }

    fn queries(&mut self, space: Option<&Path>) -> Result<Arc<VectorSet>> {
        let key = space.map(Path::to_path_buf);
        if let Some(q) = self.queries.get(&key) {
            return Ok(q.clone());
        }
        let raw = self.queries[&None].clone();
        let q = Arc::new(self.space(space.unwrap())?.apply(&raw)?);
        self.queries.insert(key, q.clone());
        Ok(q)
    }

    fn index(&mut self, path: &Path, space: Option<&Path>) -> Result<Arc<GraphIndex>> {
        let key = (path.to_path_buf(), space.map(Path::to_path_buf));
        if let Some(i) = self.indexes.get(&key) {
            return Ok(i.clone());
        }
        let data = self.data(space)?;
        let i = Arc::new(load_index(path, data)?);
        self.indexes.insert(key, i.clone());
        Ok(i)
    }
}

pub struct Outcome {
    pub records: Vec<BenchRecord>,
    pub costs: Vec<CostProfile>,
}

pub fn run(cfg: &Config) -> Result<Outcome> {
    let plan = Plan::from_config(cfg)?;
    let base = Arc::new(load_vectors_any(&plan.base)?);
    let queries = Arc::new(load_vectors_any(&plan.queries)?);
    let gt: GroundTruth = load_ground_truth(&plan.gt).with_context(|| format!("loading {}", plan.gt.display()))?;
    let mut loaded = Loaded {
        spaces: HashMap::new(),
        data: HashMap::from([(None, base)]),
        indexes: HashMap::new(),
        queries: HashMap::from([(None, queries)]),
    };

    let mut records = Vec::new();
    let mut costs = Vec::new();
    for arm in &plan.arms {
        let ctx = || format!("arm '{}'", arm.name);
        let (model, fingerprint) = match &arm.model {
            Some(p) => {
                let (m, fp) = load_model(p).with_context(ctx)?;
                (Some(m), fp)
            }
            None => (None, 0),
        };
        // a transformation model defines its own index space
        let space = match (&arm.space, &model) {
            (Some(s), _) => Some(s.clone()),
            (None, Some(DcoModel::Transform(_))) => arm.model.clone(),
            _ => None,
        };
        if let (Some(DcoModel::Transform(t)), Some(s)) = (&model, &space) {
            if *loaded.space(s).with_context(ctx)? != *t {
                bail!("{}: model and space are different transformations", ctx());
            }
        }
        let index = loaded.index(&arm.index, space.as_deref()).with_context(ctx)?;
        let model = model.unwrap_or_else(|| DcoModel::Exact(ExactDco::new(index.dim())));
        if fingerprint != 0 && fingerprint != index.data().fingerprint() {
            bail!("{}: model was fitted on different vectors than the index", ctx());
        }
        if let DcoModel::Geometry(g) = &model {
            g.check_index(&index).with_context(ctx)?;
        }
        let queries = match (&model, &space) {
            (DcoModel::Transform(_), _) | (_, None) => loaded.queries(None)?,
            (_, Some(s)) => loaded.queries(Some(s))?,
        };
        let workload = Workload {
            dataset: &plan.dataset,
            index: &index,
            queries: &queries,
            gt: &gt,
        };
        log::info!("{}: {} on {} ({} queries)", arm.name, model.kind().name(), arm.index.display(), queries.len());
        if plan.calibrate > 0 {
            costs.push(calibrate_model(&model, &arm.name, &workload, plan.calibrate, plan.seed).with_context(ctx)?);
        }
        for variant in variants(&model, &arm.sweeps).with_context(ctx)? {
            let recs = run_model(&variant, &arm.name, &workload, &plan.sweep).with_context(ctx)?;
            for r in &recs {
                log::info!(
                    "{} [{}] ef={} recall={:.4} qps={:.0} p_v={:.3}",
                    r.dco, r.params, r.ef, r.recall, r.qps, r.p_v
                );
            }
            records.extend(recs);
        }
    }
    let text = write_csv(&cfg.render(), &costs, &records)?;
    std::fs::write(&plan.out, text).with_context(|| format!("cannot write {}", plan.out.display()))?;
    Ok(Outcome { records, costs })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> Config {
        Config::parse(text).unwrap()
    }

    const BASE: &str = "data.base=b.fvecs\ndata.queries=q.fvecs\ndata.gt=gt.ivecs\n";

    #[test]
    fn plan_resolution() {
        let c = cfg(&format!(
            "{BASE}bench.ef=10,20\ndco.pca.index=p.hnsw\ndco.pca.model=pca.dco\ndco.opq.index=r.hnsw\ndco.opq.model=opq.dco\ndco.opq.alpha=0.8,1.0\n"
        ));
        let p = Plan::from_config(&c).unwrap();
        assert_eq!(p.dataset, "b");
        assert_eq!(p.sweep.efs, vec![10, 20]);
        assert_eq!(p.arms.len(), 2);
        assert_eq!(p.arms[0].name, "pca");
        assert_eq!(p.arms[1].sweeps, vec![("alpha".to_string(), vec![0.8, 1.0])]);
    }

    #[test]
    fn plan_errors() {
        assert!(Plan::from_config(&cfg(BASE)).is_err());
        assert!(Plan::from_config(&cfg(&format!("{BASE}dco.x.index=i\ndco.x.bogus=1\n"))).is_err());
        assert!(Plan::from_config(&cfg(&format!("{BASE}dco.x.model=m\n"))).is_err());
        assert!(Plan::from_config(&cfg(&format!("{BASE}bench.typo=1\ndco.x.index=i\n"))).is_err());
        assert!(Plan::from_config(&cfg("dco.x.index=i\n")).is_err());
    }

    #[test]
    fn variant_product() {
        let m = DcoModel::Exact(ExactDco::new(4));
        assert_eq!(variants(&m, &[]).unwrap().len(), 1);
        assert!(variants(&m, &[("alpha".into(), vec![1.0])]).is_err());
    }
}
