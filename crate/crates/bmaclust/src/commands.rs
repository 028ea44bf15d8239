//! Batch command drivers behind the `bmaclust` binary. Each takes parsed
//! options, writes its artifacts under an output directory, records a
//! manifest, and reports errors whose `exit_code` the binary propagates
//! (2 = bad input, 3 = computation failed).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::bench::{self, BenchConfig};
use crate::consensus::{
    bma_consensus_from_store, complete_linkage, cut, dendrogram_text, heatmap_render, seriate,
    ConsensusMatrix,
};
use crate::data::{read_csv, DataMatrix};
use crate::density::{density_grid, kde_bandwidth, DensityEstimate};
use crate::em::FitConfig;
use crate::error::{Error, Result};
use crate::evaluate::{eval_rows_csv, evaluate_estimate};
use crate::manifest::RunManifest;
use crate::rng::{StreamKey, StreamRole};
use crate::selection::{sweep, EnsembleDocument, ModelEnsemble, ModelGrid};
use crate::simgen::{DensityId, TruthSpec};
use crate::zstore;

/// Resolve the worker pool size (env `BMACLUST_THREADS` overrides the flag,
/// the flag overrides the hardware default) and run `f` inside it.
pub fn with_worker_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    let resolved = std::env::var("BMACLUST_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .or(threads);
    match resolved {
        Some(k) if k >= 1 => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .expect("worker pool")
            .install(f),
        _ => f(),
    }
}

fn write_file(path: &Path, content: impl AsRef<[u8]>, manifest: &mut RunManifest) -> Result<()> {
    fs::write(path, content)?;
    manifest.artifact(path)?;
    Ok(())
}

// ---------------------------------------------------------------------
// sweep

#[derive(Debug, Clone)]
pub struct SweepOpts {
    pub input: PathBuf,
    /// Columns (names or 0-based indices) excluded from the numeric matrix.
    pub drop: Vec<String>,
    pub out_dir: PathBuf,
    pub max_clusters: usize,
    pub threads: Option<usize>,
    pub fit: FitConfig,
}

impl SweepOpts {
    pub fn new(input: PathBuf, out_dir: PathBuf) -> Self {
        SweepOpts {
            input,
            drop: Vec::new(),
            out_dir,
            max_clusters: 9,
            threads: None,
            fit: FitConfig::default(),
        }
    }
}

/// Human-readable ranking of the fitted models.
fn ranking_csv(ensemble: &ModelEnsemble) -> String {
    let mut out = String::from("rank,spec,g,kappa,loglik,bic,weight,converged\n");
    for (rank, (entry, fit)) in ensemble.fitted_models().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            rank + 1,
            entry.spec,
            entry.n_components,
            fit.kappa,
            fit.loglik,
            fit.bic,
            entry.weight,
            fit.converged
        );
    }
    out
}

pub fn cmd_sweep(opts: &SweepOpts) -> Result<ModelEnsemble> {
    let start = Instant::now();
    let csv = read_csv(&opts.input, &opts.drop)?;
    let data = csv.data;
    if data.n_rows() < 2 {
        return Err(Error::InvalidInput(format!(
            "{} observation(s) cannot support any model in the grid",
            data.n_rows()
        )));
    }
    let grid = ModelGrid::standard(opts.max_clusters);

    let t_fit = Instant::now();
    let ensemble = with_worker_pool(opts.threads, || sweep(&data, &grid, &opts.fit))?;
    let fit_seconds = t_fit.elapsed().as_secs_f64();

    fs::create_dir_all(&opts.out_dir)?;
    let mut manifest = RunManifest::new("sweep", &opts.out_dir);
    manifest.input(&opts.input);
    manifest.grid = Some(grid.describe());

    write_file(&opts.out_dir.join("ensemble.json"), ensemble.to_json()?, &mut manifest)?;
    write_file(&opts.out_dir.join("ranking.csv"), ranking_csv(&ensemble), &mut manifest)?;

    let zdir = opts.out_dir.join("z");
    for (entry, fitm) in ensemble.fitted_models() {
        let paths = zstore::save(&zdir, entry.spec, entry.n_components, &fitm.responsibilities)?;
        for p in paths {
            manifest.artifact(&p)?;
        }
    }

    for m in ensemble.models() {
        manifest.timing(&format!("fit {}/{}", m.spec, m.n_components), m.fit_seconds);
    }
    manifest.timing("fit_seconds", fit_seconds);
    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    manifest.save()?;

    println!("fitted {} models ({} failed) on {} observations", ensemble.n_fitted(), ensemble.n_failed(), data.n_rows());
    for (rank, (entry, fitm)) in ensemble.fitted_models().take(5).enumerate() {
        println!(
            "  {}. {}/{}  BIC {:.3}  weight {:.4}",
            rank + 1,
            entry.spec,
            entry.n_components,
            fitm.bic,
            entry.weight
        );
    }
    Ok(ensemble)
}

// ---------------------------------------------------------------------
// consensus

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderMode {
    Given,
    Seriate,
}

#[derive(Debug, Clone)]
pub struct ConsensusOpts {
    /// Path to an ensemble.json written by `sweep`; the responsibility
    /// store is expected in a sibling `z/` directory.
    pub ensemble: PathBuf,
    pub out_dir: PathBuf,
    pub order: OrderMode,
    pub cut: Option<f64>,
    /// Build the matrix from the model at this rank (0 = best) instead of
    /// the weighted average.
    pub model_rank: Option<usize>,
}

pub fn cmd_consensus(opts: &ConsensusOpts) -> Result<()> {
    let start = Instant::now();
    let doc = EnsembleDocument::load(&opts.ensemble)?;
    let zdir = opts
        .ensemble
        .parent()
        .map(|p| p.join("z"))
        .ok_or_else(|| Error::InvalidInput("ensemble path has no parent directory".into()))?;

    // the document lists fitted models in descending-BIC order already
    let consensus: ConsensusMatrix = match opts.model_rank {
        None => bma_consensus_from_store(&doc, &zdir)?,
        Some(rank) => {
            let fitted = doc.fitted_specs()?;
            let (spec, g, _) = *fitted
                .get(rank)
                .ok_or_else(|| Error::InvalidInput(format!("no fitted model at rank {rank}")))?;
            let z = zstore::load(&zdir, spec, g)?;
            crate::consensus::similarity(&z)
        }
    };

    let dend = complete_linkage(&consensus);
    let order: Vec<usize> = match opts.order {
        OrderMode::Given => (0..consensus.n()).collect(),
        OrderMode::Seriate => seriate(&dend, &consensus.dissimilarity()),
    };

    fs::create_dir_all(&opts.out_dir)?;
    let mut manifest = RunManifest::new("consensus", &opts.out_dir);
    manifest.input(&opts.ensemble);

    let art = heatmap_render(&consensus, &order)?;
    write_file(&opts.out_dir.join("consensus.csv"), &art.csv, &mut manifest)?;
    write_file(&opts.out_dir.join("consensus.pgm"), &art.pgm, &mut manifest)?;
    write_file(&opts.out_dir.join("consensus_color.ppm"), &art.ppm, &mut manifest)?;
    write_file(&opts.out_dir.join("dendrogram.txt"), dendrogram_text(&dend), &mut manifest)?;

    if let Some(p) = opts.cut {
        let groups = cut(&dend, p)?;
        for group in &groups {
            let min_prob = consensus.min_within(group);
            if min_prob < p {
                return Err(Error::Numeric(format!(
                    "cut guarantee violated: group {group:?} has min probability {min_prob} < {p}"
                )));
            }
        }
        let mut partition = String::from("observation,group\n");
        for (gidx, group) in groups.iter().enumerate() {
            for &i in group {
                let _ = writeln!(partition, "{i},{gidx}");
            }
        }
        write_file(&opts.out_dir.join("partition.csv"), partition, &mut manifest)?;
        println!("cut at probability {p}: {} groups", groups.len());
    }

    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    manifest.save()?;
    Ok(())
}

// ---------------------------------------------------------------------
// density

#[derive(Debug, Clone)]
pub struct DensityOpts {
    pub ensemble: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub drop: Vec<String>,
    pub out_dir: PathBuf,
    /// Emit 2D contour grids for the available estimators.
    pub grid_out: bool,
    /// Evaluate MISE/KL against this catalog truth id.
    pub eval_truth: Option<String>,
    pub grid_nodes: usize,
    pub seed: u64,
    pub n_mc: usize,
    pub max_clusters: usize,
    pub threads: Option<usize>,
}

impl DensityOpts {
    pub fn new(out_dir: PathBuf) -> Self {
        DensityOpts {
            ensemble: None,
            data: None,
            drop: Vec::new(),
            out_dir,
            grid_out: false,
            eval_truth: None,
            grid_nodes: 100,
            seed: 0,
            n_mc: 100_000,
            max_clusters: 9,
            threads: None,
        }
    }
}

fn grid_csv(points: &[(f64, f64, f64)]) -> String {
    let mut out = String::from("x,y,density\n");
    for (x, y, f) in points {
        let _ = writeln!(out, "{x},{y},{f}");
    }
    out
}

pub fn cmd_density(opts: &DensityOpts) -> Result<()> {
    let start = Instant::now();
    if opts.grid_out == opts.eval_truth.is_some() {
        return Err(Error::InvalidInput(
            "choose exactly one of --grid-out and --eval".into(),
        ));
    }

    let data: Option<DataMatrix> = match &opts.data {
        Some(p) => Some(read_csv(p, &opts.drop)?.data),
        None => None,
    };
    let doc: Option<EnsembleDocument> = match &opts.ensemble {
        Some(p) => Some(EnsembleDocument::load(p)?),
        None => None,
    };

    fs::create_dir_all(&opts.out_dir)?;
    let mut manifest = RunManifest::new("density", &opts.out_dir);
    if let Some(p) = &opts.ensemble {
        manifest.input(p);
    }
    if let Some(p) = &opts.data {
        manifest.input(p);
    }
    manifest.seeds.push(opts.seed);

    if opts.grid_out {
        let mut estimates: Vec<DensityEstimate> = Vec::new();
        if let Some(doc) = &doc {
            if doc.d != 2 {
                return Err(Error::InvalidInput(format!(
                    "contour grids need 2-dimensional models, ensemble has d = {}",
                    doc.d
                )));
            }
            estimates.push(DensityEstimate::from_weighted_models(doc.weighted_params()?)?);
            estimates.push(DensityEstimate::single_model_params(doc.best_params()?));
        }
        if let Some(data) = &data {
            if data.dim() != 2 {
                return Err(Error::InvalidInput(format!(
                    "contour grids need 2-dimensional data, got d = {}",
                    data.dim()
                )));
            }
            estimates.push(DensityEstimate::kernel(data, kde_bandwidth(data)?)?);
        }
        if estimates.is_empty() {
            return Err(Error::InvalidInput("--grid-out needs an ensemble or data".into()));
        }

        // one shared bounding box: the data range when available, else the
        // best model's mixture moments
        let (xr, yr) = match &data {
            Some(d) => {
                let (mean, cov) = (d.mean(), d.sample_covariance()?);
                bounds(&mean, &cov)
            }
            None => {
                let best = doc.as_ref().unwrap().best_params()?;
                bounds(&best.mixture_mean(), &best.mixture_covariance())
            }
        };
        for est in &estimates {
            let rows = with_worker_pool(opts.threads, || density_grid(est, xr, yr, opts.grid_nodes))?;
            let name = format!("density_grid_{}.csv", est.kind_name());
            write_file(&opts.out_dir.join(name), grid_csv(&rows), &mut manifest)?;
        }
    } else {
        let truth_id = opts.eval_truth.as_deref().expect("checked above");
        let truth_spec = crate::simgen::parse_truth_id(truth_id)?;
        let truth = truth_spec.params()?;
        let data = data.ok_or_else(|| {
            Error::InvalidInput("--eval needs --data (the sample the estimators see)".into())
        })?;
        if data.dim() != truth.dim() {
            return Err(Error::InvalidInput(format!(
                "data dimension {} does not match truth dimension {}",
                data.dim(),
                truth.dim()
            )));
        }

        let rows = with_worker_pool(opts.threads, || -> Result<Vec<crate::evaluate::EvalRow>> {
            let weighted = match &doc {
                Some(doc) => doc.weighted_params()?,
                None => {
                    let grid = ModelGrid::standard(opts.max_clusters);
                    let ens = sweep(&data, &grid, &FitConfig::default())?;
                    ens.fitted_models()
                        .filter(|(e, _)| e.weight > 0.0)
                        .map(|(e, f)| (e.weight, f.params.clone()))
                        .collect()
                }
            };
            let best = weighted
                .iter()
                .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
                .expect("nonempty")
                .1
                .clone();

            let estimators = [
                DensityEstimate::from_weighted_models(weighted.clone())?,
                DensityEstimate::single_model_params(best),
                DensityEstimate::kernel(&data, kde_bandwidth(&data)?)?,
            ];
            let mut rows = Vec::new();
            for est in &estimators {
                rows.extend(evaluate_estimate(&truth, truth_id, est, opts.seed, 0, opts.n_mc)?);
            }
            Ok(rows)
        })?;
        write_file(&opts.out_dir.join("eval.csv"), eval_rows_csv(&rows), &mut manifest)?;
    }

    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    manifest.save()?;
    Ok(())
}

fn bounds(mean: &nalgebra::DVector<f64>, cov: &nalgebra::DMatrix<f64>) -> ((f64, f64), (f64, f64)) {
    let sx = cov[(0, 0)].sqrt();
    let sy = cov[(1, 1)].sqrt();
    (
        (mean[0] - 4.0 * sx, mean[0] + 4.0 * sx),
        (mean[1] - 4.0 * sy, mean[1] + 4.0 * sy),
    )
}

// ---------------------------------------------------------------------
// bench

#[derive(Debug, Clone)]
pub struct BenchOpts {
    pub densities: Vec<String>,
    pub dims: usize,
    pub sep: Option<f64>,
    pub replicates: usize,
    pub n_obs: usize,
    pub seed: u64,
    pub max_clusters: usize,
    pub n_mc: usize,
    pub out_dir: PathBuf,
    pub threads: Option<usize>,
}

impl BenchOpts {
    pub fn new(out_dir: PathBuf) -> Self {
        BenchOpts {
            densities: DensityId::ALL.iter().map(|d| d.name().to_string()).collect(),
            dims: 2,
            sep: None,
            replicates: 25,
            n_obs: 250,
            seed: 20250101,
            max_clusters: 9,
            n_mc: 100_000,
            out_dir,
            threads: None,
        }
    }
}

pub fn cmd_bench(opts: &BenchOpts) -> Result<Vec<bench::BenchRow>> {
    let start = Instant::now();
    let mut truths = Vec::new();
    for name in &opts.densities {
        let base = DensityId::from_name(name)?;
        truths.push(TruthSpec::resolve(base, opts.dims, opts.sep)?);
    }
    let cfg = BenchConfig {
        grid: ModelGrid::standard(opts.max_clusters),
        fit: FitConfig::default(),
        n_mc: opts.n_mc,
        ..BenchConfig::new(truths, opts.replicates, opts.n_obs, opts.seed)
    };

    let rows = with_worker_pool(opts.threads, || bench::run(&cfg))?;

    fs::create_dir_all(&opts.out_dir)?;
    let mut manifest = RunManifest::new("bench", &opts.out_dir);
    manifest.grid = Some(cfg.grid.describe());
    manifest.seeds.push(opts.seed);
    // the replicate streams are fully determined by (seed, replicate, role);
    // record the derived sample-stream ids for audit
    for r in 0..opts.replicates as u64 {
        manifest
            .seeds
            .push(StreamKey::new(opts.seed, r, StreamRole::Sample).stream_id());
    }
    write_file(&opts.out_dir.join("bench.csv"), bench::rows_csv(&rows), &mut manifest)?;
    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    manifest.save()?;

    for r in &rows {
        println!(
            "{}: KS/BMA mise {:.3} kl {:.3} | SM/BMA mise {:.3} kl {:.3} ({} ok, {} warn)",
            r.truth_id,
            r.ks_bma_mise(),
            r.ks_bma_kl(),
            r.sm_bma_mise(),
            r.sm_bma_kl(),
            r.completed,
            r.warnings
        );
    }
    Ok(rows)
}

// ---------------------------------------------------------------------
// simulate

#[derive(Debug, Clone)]
pub struct SimulateOpts {
    pub density: String,
    pub dims: usize,
    pub sep: Option<f64>,
    pub n: usize,
    pub seed: u64,
    pub out: PathBuf,
}

pub fn cmd_simulate(opts: &SimulateOpts) -> Result<()> {
    let base = DensityId::from_name(&opts.density)?;
    let truth_spec = TruthSpec::resolve(base, opts.dims, opts.sep)?;
    let truth = truth_spec.params()?;
    if opts.n == 0 {
        return Err(Error::InvalidInput("need at least one draw".into()));
    }
    let data = crate::simgen::sample(&truth, opts.n, &StreamKey::new(opts.seed, 0, StreamRole::Sample));
    let columns: Vec<String> = (1..=data.dim()).map(|i| format!("x{i}")).collect();
    let comments = vec![format!(
        "density={} n={} seed={}",
        truth_spec.id_string(),
        opts.n,
        opts.seed
    )];
    if let Some(parent) = opts.out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(&opts.out, data.to_csv(&columns, &comments))?;
    println!("wrote {} draws of {} to {}", opts.n, truth_spec.id_string(), opts.out.display());
    Ok(())
}
