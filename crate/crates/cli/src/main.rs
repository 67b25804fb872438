mod bench;
mod config;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use dco_core::data::{
    brute_force_knn, dataset_stats, load_ground_truth, load_vectors, sample_training_set, save_ground_truth,
    save_vectors, synth, VecFormat,
};
use dco_core::geometry::{fit_finger, DEFAULT_BITS};
use dco_core::harness::parse_csv;
use dco_core::metrics::{benefit_check, pareto_frontier, recall};
use dco_core::projection::{fit_lsh, load_external_projection};
use dco_core::quant::{fit_opq, OpqParams};
use dco_core::transform::{fit_ads, fit_dwt, fit_pca};
use dco_core::{build_hnsw, BuildParams, Dco, DcoKind, DcoModel, ExactDco, SearchOptions};

use crate::config::Config;
use crate::io::{format_of, index_data, load_index, load_model, load_space, load_vectors_any};

#[derive(Parser)]
#[command(name = "dco", version, about = "HNSW search with distance comparison operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate and convert a vector file, or generate a synthetic workload.
    Ingest(IngestArgs),
    /// Print count, dimension and local intrinsic dimensionality.
    Stats(StatsArgs),
    /// Exact k nearest neighbours by brute force.
    Gt(GtArgs),
    /// Build and save an HNSW index.
    Build(BuildArgs),
    /// Fit a distance comparison operator and save it.
    FitDco(FitArgs),
    /// Run searches and print results and instrumentation.
    Query(QueryArgs),
    /// Run a configured benchmark sweep and write CSV.
    Bench(BenchArgs),
    /// Summarise a benchmark CSV.
    Report(ReportArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Source vector file.
    #[arg(long, conflicts_with = "synthetic")]
    input: Option<PathBuf>,
    /// Source format; inferred from the extension when omitted.
    #[arg(long)]
    format: Option<VecFormat>,
    /// Keep only the first N vectors.
    #[arg(long)]
    limit: Option<usize>,
    /// Generate instead: gaussian, uniform, line, correlated or correlated:<condition>.
    #[arg(long)]
    synthetic: Option<synth::Distribution>,
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    #[arg(long, default_value_t = 128)]
    dim: usize,
    /// Also generate this many queries from the same distribution.
    #[arg(long, default_value_t = 0)]
    queries: usize,
    #[arg(long)]
    queries_out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Destination (.fvecs).
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    sample: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct GtArgs {
    #[arg(long)]
    base: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long, default_value_t = 100)]
    k: usize,
    /// Neighbour ids (.ivecs); distances go to the sibling .fvecs.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct BuildArgs {
    #[arg(long)]
    base: PathBuf,
    /// Transformation model whose output space the index is built in.
    #[arg(long)]
    transform: Option<PathBuf>,
    #[arg(long, default_value_t = 16)]
    m: usize,
    #[arg(long, default_value_t = 500)]
    ef_construction: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    kind: DcoKind,
    #[arg(long)]
    base: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Transformation defining the space the model works in (non-transform kinds).
    #[arg(long)]
    space: Option<PathBuf>,
    /// Index the geometry model annotates.
    #[arg(long)]
    index: Option<PathBuf>,
    /// Base embeddings for an external projection (.fvecs).
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Training sample size (PCA, OPQ); all vectors when omitted.
    #[arg(long)]
    train_size: Option<usize>,
    #[arg(long)]
    delta_d: Option<usize>,
    #[arg(long)]
    epsilon0: Option<f32>,
    #[arg(long, default_value_t = 32)]
    proj_dim: usize,
    #[arg(long, default_value_t = 0.9)]
    p_tau: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha: f32,
    /// OPQ segment count.
    #[arg(long, default_value_t = 8)]
    segments: usize,
    #[arg(long, default_value_t = 256)]
    ks: usize,
    #[arg(long, default_value_t = 20)]
    t1: usize,
    #[arg(long, default_value_t = 20)]
    t2: usize,
    /// FINGER sign-projection width.
    #[arg(long, default_value_t = DEFAULT_BITS)]
    bits: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    base: PathBuf,
    #[arg(long)]
    index: PathBuf,
    /// Operator model; the exact baseline when omitted.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Transformation the index was built in.
    #[arg(long)]
    space: Option<PathBuf>,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long, default_value_t = 0)]
    query_id: usize,
    /// Run every query and print aggregates only.
    #[arg(long)]
    all: bool,
    #[arg(long, default_value_t = 20)]
    k: usize,
    #[arg(long, default_value_t = 100)]
    ef: usize,
    #[arg(long)]
    gt: Option<PathBuf>,
    #[arg(long)]
    audit: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    config: PathBuf,
    /// Override a config entry, e.g. --set bench.k=10 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    /// Comma-separated ef list.
    #[arg(long)]
    ef: Option<String>,
    #[arg(long)]
    repetitions: Option<usize>,
    #[arg(long)]
    audit: bool,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    input: PathBuf,
    /// Only rows on each operator's recall/QPS frontier.
    #[arg(long)]
    pareto: bool,
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("FUDIST_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .with_context(|| format!("FUDIST_THREADS='{v}' is not a positive integer"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn ingest(a: IngestArgs) -> Result<()> {
    if a.output.extension().and_then(|e| e.to_str()) != Some("fvecs") {
        bail!("output {} must be an .fvecs file", a.output.display());
    }
    if let Some(dist) = a.synthetic {
        let generator = synth::Generator::new(dist, a.dim, a.seed);
        let base = generator.sample(a.n, a.seed.wrapping_add(1));
        save_vectors(&base, &a.output, VecFormat::Fvecs)?;
        println!("wrote {} vectors of dim {} to {}", base.len(), base.dim(), a.output.display());
        if a.queries > 0 {
            let path = a.queries_out.context("--queries needs --queries-out")?;
            let q = generator.sample(a.queries, a.seed.wrapping_add(2));
            save_vectors(&q, &path, VecFormat::Fvecs)?;
            println!("wrote {} queries to {}", q.len(), path.display());
        }
        return Ok(());
    }
    let input = a.input.context("pass --input or --synthetic")?;
    let set = load_vectors(&input, format_of(&input, a.format)?)?;
    let set = match a.limit {
        Some(n) if n < set.len() => set.select(&(0..n).collect::<Vec<_>>()),
        _ => set,
    };
    save_vectors(&set, &a.output, VecFormat::Fvecs)?;
    println!("wrote {} vectors of dim {} to {}", set.len(), set.dim(), a.output.display());
    Ok(())
}

fn stats(a: StatsArgs) -> Result<()> {
    let set = load_vectors_any(&a.input)?;
    let s = dataset_stats(&set, a.sample, a.k, a.seed)?;
    println!("count={}", s.count);
    println!("dim={}", s.dim);
    println!("lid={:.4}", s.lid);
    println!("hardness={:.4}", s.hardness);
    Ok(())
}

fn gt(a: GtArgs) -> Result<()> {
    let base = load_vectors_any(&a.base)?;
    let queries = load_vectors_any(&a.queries)?;
    let start = Instant::now();
    let gt = brute_force_knn(&base, &queries, a.k)?;
    save_ground_truth(&gt, &a.output)?;
    println!(
        "ground truth k={} for {} queries written to {} in {:.2}s",
        gt.k(),
        gt.len(),
        a.output.display(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

fn build(a: BuildArgs) -> Result<()> {
    let data = Arc::new(index_data(&a.base, a.transform.as_deref())?);
    let start = Instant::now();
    let params = BuildParams {
        m: a.m,
        ef_construction: a.ef_construction,
        seed: a.seed,
    };
    let index = build_hnsw(data, params)?;
    index.save(&a.output)?;
    println!(
        "index over {} vectors (dim {}, {} level-0 edges, top level {}) written to {} in {:.2}s",
        index.len(),
        index.dim(),
        index.base_edge_count(),
        index.max_level(),
        a.output.display(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

fn training(set: &dco_core::VectorSet, n: Option<usize>, seed: u64) -> Result<dco_core::VectorSet> {
    Ok(match n {
        Some(n) if n < set.len() => sample_training_set(set, n, seed)?,
        _ => set.clone(),
    })
}

fn fit(a: FitArgs) -> Result<()> {
    let raw = load_vectors_any(&a.base)?;
    let start = Instant::now();
    let transform_kind = matches!(a.kind, DcoKind::Pca | DcoKind::Dwt | DcoKind::Ads);
    if transform_kind && a.space.is_some() {
        bail!("--space does not apply to {}", a.kind.name());
    }
    let data = match &a.space {
        Some(s) => load_space(s)?.apply(&raw)?,
        None => raw,
    };
    let (model, fingerprint) = match a.kind {
        DcoKind::Exact => (DcoModel::Exact(ExactDco::new(data.dim())), 0),
        DcoKind::Pca | DcoKind::Dwt | DcoKind::Ads => {
            let mut m = match a.kind {
                DcoKind::Pca => fit_pca(&training(&data, a.train_size, a.seed)?)?,
                DcoKind::Dwt => fit_dwt(data.dim())?,
                _ => fit_ads(data.dim(), a.seed)?,
            };
            if let Some(d) = a.delta_d {
                m = m.with_delta_d(d)?;
            }
            if let Some(e) = a.epsilon0 {
                m = m.with_epsilon0(e)?;
            }
            (DcoModel::Transform(m), 0)
        }
        DcoKind::Lsh => (DcoModel::Projection(fit_lsh(&data, a.proj_dim, a.p_tau, a.seed)?), data.fingerprint()),
        DcoKind::External => {
            let emb = a.embeddings.as_deref().context("external projections need --embeddings")?;
            let m = load_external_projection(emb, data.len(), data.dim(), a.alpha)?;
            (DcoModel::Projection(m), data.fingerprint())
        }
        DcoKind::Opq => {
            let params = OpqParams {
                m: a.segments,
                ks: a.ks,
                t1: a.t1,
                t2: a.t2,
                seed: a.seed,
            };
            let m = fit_opq(&training(&data, a.train_size, a.seed)?, &data, params)?.with_alpha(a.alpha)?;
            (DcoModel::Quant(m), data.fingerprint())
        }
        DcoKind::Finger => {
            let path = a.index.as_deref().context("finger needs --index")?;
            let data = Arc::new(data);
            let index = load_index(path, data.clone())?;
            let m = fit_finger(&index, a.bits, a.seed)?.with_alpha(a.alpha)?;
            (DcoModel::Geometry(m), data.fingerprint())
        }
    };
    model.save(&a.output, fingerprint)?;
    println!(
        "{} model ({}) written to {} in {:.2}s",
        a.kind.name(),
        model.params(),
        a.output.display(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

fn query(a: QueryArgs) -> Result<()> {
    let (model, fingerprint) = match &a.model {
        Some(p) => {
            let (m, fp) = load_model(p)?;
            (Some(m), fp)
        }
        None => (None, 0),
    };
    let space = match (&a.space, &model) {
        (Some(s), _) => Some(s.clone()),
        (None, Some(DcoModel::Transform(_))) => a.model.clone(),
        _ => None,
    };
    let data = Arc::new(index_data(&a.base, space.as_deref())?);
    let index = load_index(&a.index, data)?;
    let model = model.unwrap_or_else(|| DcoModel::Exact(ExactDco::new(index.dim())));
    if fingerprint != 0 && fingerprint != index.data().fingerprint() {
        bail!("model was fitted on different vectors than the index");
    }
    if let DcoModel::Geometry(g) = &model {
        g.check_index(&index)?;
    }
    let raw_queries = load_vectors_any(&a.queries)?;
    let queries = match (&model, &space) {
        (DcoModel::Transform(_), _) | (_, None) => raw_queries,
        (_, Some(s)) => load_space(s)?.apply(&raw_queries)?,
    };
    let gt = a.gt.as_deref().map(load_ground_truth).transpose()?;
    let ids: Vec<usize> = if a.all {
        (0..queries.len()).collect()
    } else {
        if a.query_id >= queries.len() {
            bail!("query id {} out of range ({} queries)", a.query_id, queries.len());
        }
        vec![a.query_id]
    };
    let opts = SearchOptions {
        audit: a.audit,
        record_hops: false,
    };
    dco_core::with_dco!(&model, d => run_queries(d, &index, &queries, &ids, gt.as_ref(), &a, opts))
}

fn run_queries<D: Dco>(
    dco: &D,
    index: &dco_core::GraphIndex,
    queries: &dco_core::VectorSet,
    ids: &[usize],
    gt: Option<&dco_core::GroundTruth>,
    a: &QueryArgs,
    opts: SearchOptions,
) -> Result<()> {
    let mut searcher = index.searcher();
    let mut total = dco_core::SearchStats::default();
    let mut hit = 0.0;
    for &qi in ids {
        let mut ctx = dco.preprocess_at(queries.row(qi), Some(qi))?;
        let out = searcher.search(dco, &mut ctx, a.k, a.ef, opts)?;
        if !a.all {
            for (rank, (id, d)) in out.ids.iter().zip(&out.dists).enumerate() {
                println!("{rank}\t{id}\t{d}");
            }
        }
        if let Some(gt) = gt {
            hit += recall(&out.ids, gt.ids(qi), a.k)?;
        }
        total.accumulate(&out.stats);
    }
    let n = ids.len() as f64;
    println!("dco={} params={}", dco.kind().name(), dco.params());
    println!(
        "queries={} T={:.1} full={:.1} pruned={:.1} hops={:.1} mean_us={:.1}",
        ids.len(),
        total.comparisons as f64 / n,
        total.full_dist_count as f64 / n,
        total.pruned_count as f64 / n,
        total.hops as f64 / n,
        total.elapsed.as_secs_f64() * 1e6 / n
    );
    if total.comparisons > 0 {
        let (p_d, p_v) = dco_core::metrics::pruning_ratios(&total, index.dim())?;
        println!("p_d={p_d:.4} p_v={p_v:.4}");
    }
    if let Some(f) = total.false_negatives {
        println!("false_negatives={f}");
    }
    if gt.is_some() {
        println!("recall={:.4}", hit / n);
    }
    Ok(())
}

fn bench_cmd(a: BenchArgs) -> Result<()> {
    let mut cfg = Config::load(&a.config)?;
    for kv in &a.overrides {
        cfg.apply_override(kv)?;
    }
    if let Some(out) = &a.out {
        cfg.set("bench.out", &out.to_string_lossy());
    }
    if let Some(k) = a.k {
        cfg.set("bench.k", &k.to_string());
    }
    if let Some(ef) = &a.ef {
        cfg.set("bench.ef", ef);
    }
    if let Some(r) = a.repetitions {
        cfg.set("bench.repetitions", &r.to_string());
    }
    if a.audit {
        cfg.set("bench.audit", "true");
    }
    let outcome = bench::run(&cfg)?;
    println!(
        "{} rows and {} cost profiles written to {}",
        outcome.records.len(),
        outcome.costs.len(),
        cfg.get("bench.out").unwrap_or("results.csv")
    );
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.input).with_context(|| format!("cannot read {}", a.input.display()))?;
    let csv = parse_csv(&text)?;
    let mut arms: Vec<&str> = Vec::new();
    for r in &csv.records {
        if !arms.contains(&r.dco.as_str()) {
            arms.push(&r.dco);
        }
    }
    println!(
        "{:<12} {:<28} {:>5} {:>7} {:>10} {:>7} {:>7} {:>8} {:>8}  benefit",
        "dco", "params", "ef", "recall", "qps", "p_d", "p_v", "fn", "T"
    );
    for arm in arms {
        let rows: Vec<_> = csv.records.iter().filter(|r| r.dco == arm).collect();
        let keep: Vec<usize> = if a.pareto {
            pareto_frontier(&rows.iter().map(|r| (r.recall, r.qps)).collect::<Vec<_>>())
        } else {
            (0..rows.len()).collect()
        };
        let cost = csv.costs.iter().find(|c| c.dco == arm);
        for i in keep {
            let r = rows[i];
            let benefit = match cost {
                Some(c) if r.t > 0.0 => match benefit_check(&c.benefit_params(r), r.p_d, r.p_v, c.family) {
                    Ok(b) => format!(
                        "{} (needs {:.3}, has {:.3})",
                        if b.beneficial { "yes" } else { "no" },
                        b.required,
                        b.observed
                    ),
                    Err(e) => format!("n/a ({e})"),
                },
                _ => "n/a".into(),
            };
            println!(
                "{:<12} {:<28} {:>5} {:>7.4} {:>10.0} {:>7.3} {:>7.3} {:>8} {:>8.1}  {}",
                r.dco,
                r.params,
                r.ef,
                r.recall,
                r.qps,
                r.p_d,
                r.p_v,
                r.fn_ratio.map_or("-".into(), |f| format!("{f:.5}")),
                r.t,
                benefit
            );
        }
    }
    Ok(())
}

/// Short machine-readable category for the error line.
fn category(e: &anyhow::Error) -> &'static str {
    for cause in e.chain() {
        if let Some(core) = cause.downcast_ref::<dco_core::Error>() {
            return match core {
                dco_core::Error::Io { .. } => "io",
                dco_core::Error::Format { .. } => "format",
                dco_core::Error::DimensionMismatch { .. } => "dimension",
                dco_core::Error::NonFinite { .. } => "non-finite",
                dco_core::Error::InvalidArgument(_) => "invalid-argument",
                dco_core::Error::EmptyDataset => "empty",
                dco_core::Error::ModelMismatch(_) => "mismatch",
                dco_core::Error::Version { .. } => "version",
                dco_core::Error::AuditDisabled => "audit",
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return "io";
        }
    }
    "error"
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Stats(a) => stats(a),
        Command::Gt(a) => gt(a),
        Command::Build(a) => build(a),
        Command::FitDco(a) => fit(a),
        Command::Query(a) => query(a),
        Command::Bench(a) => bench_cmd(a),
        Command::Report(a) => report(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error[usage]: {}", one_line(first));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", category(&e), one_line(&format!("{e:#}")));
            ExitCode::FAILURE
        }
    }
}

