//! The `lfmap` command line. Every subcommand writes `config.json` and
//! `report.json` into its `--out` directory, plus any bundles it produces.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::{DMatrix, DVector};
use serde_json::{json, Value};

use crate::analysis::{distortion_function, lfm_similarity};
use crate::descriptors::DescriptorKind;
use crate::embedio::bundle::{load_basis_bundle, load_graph_bundle, load_map_bundle, load_transform_bundle};
use crate::embedio::{
    load_anchors, load_embeddings, load_labels, save_anchors, save_bundle, save_embeddings, save_labels, AnchorSet,
    Artifact, BundleProvenance, EmbeddingFormat, EmbeddingSet,
};
use crate::error::{Error, Result};
use crate::evalbench::{bench_csv, mrr, noise_benchmark, stitching_accuracy, synthetic_pair, BenchConfig};
use crate::latgraph::{build_knn_graph, normalized_laplacian, Metric, WeightFn};
use crate::spectral::eigenbasis;
use crate::transfer::{
    distance_functions, extract_pointwise, fit_transform, transfer_coefficients, Correspondence, CorrespondenceSource,
    LinearTransform, TransformKind,
};

pub use crate::pipeline::PipelineConfig;
use crate::pipeline::{fit_pair, pair_descriptors, Guidance, SpaceModel};

#[derive(Debug, Parser)]
#[command(name = "lfmap", version, about = "Latent functional maps between embedding spaces")]
struct Cli {
    /// JSON pipeline config; explicit flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

/// One flag per pipeline config field.
#[derive(Debug, Args, Default)]
struct Overrides {
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Neighbors per node.
    #[arg(long = "k", global = true)]
    k_neighbors: Option<usize>,
    #[arg(long, global = true)]
    metric: Option<Metric>,
    /// `gaussian` or `binary`.
    #[arg(long, global = true)]
    weight: Option<String>,
    /// Fixed gaussian bandwidth instead of the self-tuned one.
    #[arg(long, global = true)]
    sigma: Option<f64>,
    /// Eigenvectors used for the solved map.
    #[arg(long = "k-eigen", global = true)]
    n_eigen: Option<usize>,
    #[arg(long, global = true)]
    eigen_tol: Option<f64>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true)]
    beta: Option<f64>,
    #[arg(long, global = true)]
    max_iter: Option<usize>,
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long = "desc", global = true)]
    descriptor: Option<DescriptorKind>,
    /// Refine the solved map spectrally.
    #[arg(long, global = true, conflicts_with = "no_zoomout")]
    zoomout: bool,
    #[arg(long, global = true)]
    no_zoomout: bool,
    #[arg(long, global = true)]
    zoom_step: Option<usize>,
    #[arg(long, global = true)]
    zoom_target: Option<usize>,
    #[arg(long, global = true)]
    fit: Option<TransformKind>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Embeddings -> k-NN graph bundle.
    Graph {
        #[arg(long)]
        emb: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Graph bundle -> Laplacian eigenbasis bundle.
    Basis {
        #[arg(long)]
        graph: PathBuf,
        /// Eigenvectors to keep; defaults to what the map and refinement need.
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Two spaces and descriptors -> functional map bundle.
    Map {
        #[command(flatten)]
        spaces: Spaces,
        #[arg(long)]
        x_graph: PathBuf,
        #[arg(long)]
        y_graph: PathBuf,
        /// `src_index,dst_index` anchor pairs.
        #[arg(long)]
        anchors: Option<PathBuf>,
        #[arg(long)]
        x_labels: Option<PathBuf>,
        #[arg(long)]
        y_labels: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Map -> similarity score, and the distortion function when a target
    /// basis is given.
    Similarity {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        y_basis: Option<PathBuf>,
        /// Target embeddings, only used to label distortion rows by id.
        #[arg(long)]
        y_emb: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Map and embeddings -> pointwise correspondence and explicit transform.
    Align {
        #[command(flatten)]
        spaces: Spaces,
        #[arg(long)]
        map: PathBuf,
        /// Known pairs that override the extracted assignment.
        #[arg(long)]
        anchors: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Retrieval MRR through a transform or through map coefficients.
    Retrieve {
        #[arg(long)]
        x_emb: PathBuf,
        #[arg(long)]
        y_emb: PathBuf,
        /// `src_index,dst_index` ground truth covering every source row.
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, required_unless_present = "map")]
        transform: Option<PathBuf>,
        #[arg(long, requires_all = ["x_basis", "y_basis"], conflicts_with = "transform")]
        map: Option<PathBuf>,
        #[arg(long)]
        x_basis: Option<PathBuf>,
        #[arg(long)]
        y_basis: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Nearest-centroid accuracy of target-space classes on transformed
    /// source points.
    Stitch {
        #[arg(long)]
        transform: PathBuf,
        #[arg(long)]
        x_emb: PathBuf,
        #[arg(long)]
        x_labels: PathBuf,
        #[arg(long)]
        y_emb: PathBuf,
        #[arg(long)]
        y_labels: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Noise benchmark grid -> CSV table.
    Bench {
        /// `default` or a JSON grid file.
        #[arg(long, default_value = "default")]
        grid: String,
        /// Record wall-clock times (makes the table non-reproducible).
        #[arg(long)]
        timing: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Writes a seeded synthetic pair with ground truth, anchors and labels.
    Synth {
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 64)]
        d: usize,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 5)]
        anchors: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct Spaces {
    #[arg(long)]
    x_emb: PathBuf,
    #[arg(long)]
    y_emb: PathBuf,
    #[arg(long)]
    x_basis: PathBuf,
    #[arg(long)]
    y_basis: PathBuf,
}

impl Command {
    fn out(&self) -> &Path {
        match self {
            Command::Graph { out, .. }
            | Command::Basis { out, .. }
            | Command::Map { out, .. }
            | Command::Similarity { out, .. }
            | Command::Align { out, .. }
            | Command::Retrieve { out, .. }
            | Command::Stitch { out, .. }
            | Command::Bench { out, .. }
            | Command::Synth { out, .. } => out,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Graph { .. } => "graph",
            Command::Basis { .. } => "basis",
            Command::Map { .. } => "map",
            Command::Similarity { .. } => "similarity",
            Command::Align { .. } => "align",
            Command::Retrieve { .. } => "retrieve",
            Command::Stitch { .. } => "stitch",
            Command::Bench { .. } => "bench",
            Command::Synth { .. } => "synth",
        }
    }
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    let out = cli.command.out().to_path_buf();
    let result = match cli.threads {
        Some(0) => Err(Error::InvalidConfig("--threads must be positive".into())),
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(|| dispatch(&cli)),
            Err(e) => Err(Error::InvalidConfig(format!("thread pool: {e}"))),
        },
        None => dispatch(&cli),
    };
    match result {
        Ok(report) => match write_json(&out.join("report.json"), &report) {
            Ok(()) => EXIT_OK,
            Err(e) => fail(&e),
        },
        Err(e) => {
            let code = fail(&e);
            if std::fs::create_dir_all(&out).is_ok() {
                let report = json!({"command": cli.command.name(), "status": "error", "error": e.to_string(), "exit_code": code});
                let _ = write_json(&out.join("report.json"), &report);
            }
            code
        }
    }
}

fn fail(e: &Error) -> i32 {
    eprintln!("error: {e}");
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_VALIDATION
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::InvalidInput(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
}

impl Overrides {
    fn apply(&self, cfg: &mut PipelineConfig) -> Result<()> {
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.k_neighbors {
            cfg.k_neighbors = Some(v);
        }
        if let Some(v) = self.metric {
            cfg.metric = v;
        }
        match self.weight.as_deref() {
            None => {}
            Some("gaussian") => {
                if !matches!(cfg.weight, WeightFn::Gaussian { .. }) {
                    cfg.weight = WeightFn::Gaussian { sigma: None };
                }
            }
            Some("binary") => cfg.weight = WeightFn::Binary,
            Some(other) => return Err(Error::InvalidConfig(format!("unknown weight function {other:?}"))),
        }
        if let Some(s) = self.sigma {
            if cfg.weight == WeightFn::Binary {
                return Err(Error::InvalidConfig("--sigma needs gaussian weights".into()));
            }
            cfg.weight = WeightFn::Gaussian { sigma: Some(s) };
        }
        if let Some(v) = self.n_eigen {
            cfg.n_eigen = v;
        }
        if let Some(v) = self.eigen_tol {
            cfg.eigen_tol = v;
        }
        if let Some(v) = self.alpha {
            cfg.solver.alpha = v;
        }
        if let Some(v) = self.beta {
            cfg.solver.beta = v;
        }
        if let Some(v) = self.max_iter {
            cfg.solver.max_iter = v;
        }
        if let Some(v) = self.tol {
            cfg.solver.tol = v;
        }
        if let Some(v) = self.descriptor {
            cfg.descriptor = v;
        }
        if self.no_zoomout {
            cfg.zoomout = None;
        }
        let tuned = self.zoom_step.is_some() || self.zoom_target.is_some();
        if self.zoomout || (tuned && !self.no_zoomout) {
            let mut z = cfg.zoomout.unwrap_or_default();
            if let Some(v) = self.zoom_step {
                z.step_size = v;
            }
            if let Some(v) = self.zoom_target {
                z.target_size = v;
            }
            cfg.zoomout = Some(z);
        }
        if let Some(v) = self.fit {
            cfg.fit = v;
        }
        Ok(())
    }
}

/// Config file (or the command-line default, which leaves refinement off
/// until `--zoomout`) with explicit flags applied on top.
fn effective_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => read_json(path)?,
        None => PipelineConfig {
            zoomout: None,
            ..PipelineConfig::default()
        },
    };
    cli.overrides.apply(&mut cfg)?;
    Ok(cfg)
}

fn config_value(cfg: &PipelineConfig) -> Value {
    serde_json::to_value(cfg).expect("config serializes")
}

fn load_emb(path: &Path) -> Result<EmbeddingSet> {
    load_embeddings(path, EmbeddingFormat::from_path(path))
}

fn provenance(cfg: &PipelineConfig, sources: &[&Path]) -> Result<BundleProvenance> {
    let mut p = BundleProvenance::with_config(config_value(cfg));
    for s in sources {
        p.add_source(s)?;
    }
    Ok(p)
}

fn dispatch(cli: &Cli) -> Result<Value> {
    let out = cli.command.out();
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    if let Command::Bench { grid, timing, out } = &cli.command {
        return bench(cli, grid, *timing, out);
    }
    let cfg = effective_config(cli)?;
    write_json(&out.join("config.json"), &cfg)?;
    let body = match &cli.command {
        Command::Graph { emb, out } => graph(&cfg, emb, out)?,
        Command::Basis { graph, count, out } => basis(&cfg, graph, *count, out)?,
        Command::Map {
            spaces,
            x_graph,
            y_graph,
            anchors,
            x_labels,
            y_labels,
            out,
        } => map(&cfg, spaces, x_graph, y_graph, anchors.as_deref(), x_labels.as_deref(), y_labels.as_deref(), out)?,
        Command::Similarity { map, y_basis, y_emb, out } => similarity(map, y_basis.as_deref(), y_emb.as_deref(), out)?,
        Command::Align { spaces, map, anchors, out } => align(&cfg, spaces, map, anchors.as_deref(), out)?,
        Command::Retrieve {
            x_emb,
            y_emb,
            truth,
            transform,
            map,
            x_basis,
            y_basis,
            ..
        } => retrieve(&cfg, x_emb, y_emb, truth, transform.as_deref(), map.as_deref(), x_basis.as_deref(), y_basis.as_deref())?,
        Command::Stitch {
            transform,
            x_emb,
            x_labels,
            y_emb,
            y_labels,
            ..
        } => stitch(transform, x_emb, x_labels, y_emb, y_labels)?,
        Command::Synth { n, d, noise, anchors, out } => synth(&cfg, *n, *d, *noise, *anchors, out)?,
        Command::Bench { .. } => unreachable!("handled above"),
    };
    let mut report = json!({"command": cli.command.name(), "status": "ok"});
    report["result"] = body;
    Ok(report)
}

fn graph(cfg: &PipelineConfig, emb: &Path, out: &Path) -> Result<Value> {
    let x = load_emb(emb)?;
    let gcfg = cfg.graph_config(x.n());
    let g = build_knn_graph(&x, &gcfg)?;
    save_bundle(&Artifact::Graph(g.clone()), &out.join("graph"), &provenance(cfg, &[emb])?)?;
    Ok(json!({
        "n": g.n(),
        "edges": g.edge_count(),
        "k": gcfg.k,
        "metric": gcfg.metric,
        "sigma": g.sigma(),
        "repair_edges": g.repair_edges(),
    }))
}

fn basis(cfg: &PipelineConfig, graph: &Path, count: Option<usize>, out: &Path) -> Result<Value> {
    let g = load_graph_bundle(graph)?;
    let k = count.unwrap_or_else(|| cfg.basis_size(g.n()));
    let b = eigenbasis(&normalized_laplacian(&g)?, k, cfg.eigen_tol)?;
    save_bundle(&Artifact::Basis(b.clone()), &out.join("basis"), &provenance(cfg, &[graph])?)?;
    Ok(json!({
        "n": b.n(),
        "k": b.k(),
        "eigenvalues": b.eigenvalues(),
        "max_residual": b.max_residual(),
    }))
}

#[allow(clippy::too_many_arguments)]
fn map(
    cfg: &PipelineConfig,
    spaces: &Spaces,
    x_graph: &Path,
    y_graph: &Path,
    anchors: Option<&Path>,
    x_labels: Option<&Path>,
    y_labels: Option<&Path>,
    out: &Path,
) -> Result<Value> {
    let x = load_emb(&spaces.x_emb)?;
    let y = load_emb(&spaces.y_emb)?;
    let mx = SpaceModel {
        graph: load_graph_bundle(x_graph)?,
        basis: load_basis_bundle(&spaces.x_basis)?,
    };
    let my = SpaceModel {
        graph: load_graph_bundle(y_graph)?,
        basis: load_basis_bundle(&spaces.y_basis)?,
    };
    for (m, e, side) in [(&mx, &x, "source"), (&my, &y, "target")] {
        if m.graph.n() != e.n() || m.basis.n() != e.n() {
            return Err(Error::shape("space sizes", format!("{side} n={}", e.n()), format!("graph {} basis {}", m.graph.n(), m.basis.n())));
        }
    }
    if cfg.n_eigen > mx.basis.k().min(my.basis.k()) {
        return Err(Error::InvalidConfig(format!(
            "k-eigen {} exceeds the stored bases ({} and {})",
            cfg.n_eigen,
            mx.basis.k(),
            my.basis.k()
        )));
    }
    let anchor_set;
    let labels;
    let guidance = match cfg.descriptor {
        DescriptorKind::AnchorGeodesic | DescriptorKind::AnchorMetric => {
            let path = anchors.ok_or_else(|| Error::InvalidConfig(format!("--desc {} needs --anchors", cfg.descriptor)))?;
            anchor_set = load_anchors(path, x.n(), y.n())?;
            Guidance::Anchors(&anchor_set)
        }
        DescriptorKind::LabelIndicator => {
            let (Some(lx), Some(ly)) = (x_labels, y_labels) else {
                return Err(Error::InvalidConfig("--desc labels needs --x-labels and --y-labels".into()));
            };
            labels = (load_labels(lx, &x)?, load_labels(ly, &y)?);
            Guidance::Labels(&labels.0, &labels.1)
        }
        DescriptorKind::Hks | DescriptorKind::Wks => Guidance::None,
    };
    let (fx, fy) = pair_descriptors(&x, &mx, &y, &my, cfg.descriptor, &guidance)?;
    let fit = fit_pair(&mx, &my, &fx, &fy, cfg)?;

    let mut sources: Vec<&Path> = vec![&spaces.x_emb, &spaces.y_emb, x_graph, y_graph, &spaces.x_basis, &spaces.y_basis];
    sources.extend(anchors);
    sources.extend(x_labels);
    sources.extend(y_labels);
    let prov = provenance(cfg, &sources)?;
    save_bundle(&Artifact::Map(fit.map.clone()), &out.join("map"), &prov)?;
    if fit.trace.is_some() {
        save_bundle(&Artifact::Map(fit.seed_map.clone()), &out.join("seed_map"), &prov)?;
    }
    let seed_similarity = lfm_similarity(&fit.seed_map)?;
    Ok(json!({
        "descriptor": cfg.descriptor,
        "solve": fit.report,
        "seed_size": [fit.seed_map.k_y(), fit.seed_map.k_x()],
        "map_size": [fit.map.k_y(), fit.map.k_x()],
        "zoomout_sizes": fit.trace.as_ref().map(|t| t.sizes.clone()),
        "seed_similarity": seed_similarity,
    }))
}

fn similarity(map: &Path, y_basis: Option<&Path>, y_emb: Option<&Path>, out: &Path) -> Result<Value> {
    let c = load_map_bundle(map)?;
    let report = lfm_similarity(&c)?;
    let mut body = json!({"similarity": report, "map_size": [c.k_y(), c.k_x()]});
    if let Some(path) = y_basis {
        let by = load_basis_bundle(path)?;
        let values = distortion_function(&c, &by)?;
        let ids: Vec<String> = match y_emb {
            Some(p) => {
                let y = load_emb(p)?;
                if y.n() != by.n() {
                    return Err(Error::shape("target embeddings", by.n(), y.n()));
                }
                y.ids().to_vec()
            }
            None => (0..by.n()).map(|i| i.to_string()).collect(),
        };
        let dest = out.join("distortion.csv");
        let mut w = csv::Writer::from_path(&dest).map_err(|e| Error::InvalidInput(e.to_string()))?;
        let mut write = |rec: [String; 2]| w.write_record(rec).map_err(|e| Error::InvalidInput(e.to_string()));
        write(["id".into(), "distortion".into()])?;
        for (id, v) in ids.iter().zip(&values) {
            write([id.clone(), format!("{v:.9}")])?;
        }
        w.flush().map_err(|e| Error::io(&dest, e))?;
        body["distortion_max_abs"] = json!(values.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    }
    Ok(body)
}

fn align(cfg: &PipelineConfig, spaces: &Spaces, map: &Path, anchors: Option<&Path>, out: &Path) -> Result<Value> {
    let x = load_emb(&spaces.x_emb)?;
    let y = load_emb(&spaces.y_emb)?;
    let c = load_map_bundle(map)?;
    let bx = load_basis_bundle(&spaces.x_basis)?;
    let by = load_basis_bundle(&spaces.y_basis)?;
    if bx.n() != x.n() || by.n() != y.n() {
        return Err(Error::InvalidInput("basis and embedding sizes differ".into()));
    }
    if c.k_x() > bx.k() || c.k_y() > by.k() {
        return Err(Error::shape("map size", format!("at most {}x{}", by.k(), bx.k()), format!("{}x{}", c.k_y(), c.k_x())));
    }
    let extracted = extract_pointwise(&c, &bx.truncated(c.k_x())?, &by.truncated(c.k_y())?)?;
    let mut assignment = extracted.assignment().to_vec();
    let pinned = match anchors {
        Some(path) => {
            let a: AnchorSet = load_anchors(path, x.n(), y.n())?;
            for &(s, t) in a.pairs() {
                assignment[s] = t;
            }
            a.len()
        }
        None => 0,
    };
    let corr = Correspondence::new(assignment, y.n(), CorrespondenceSource::Extracted)?;
    let t = fit_transform(&x, &y, &corr, cfg.fit)?;
    let mut sources: Vec<&Path> = vec![&spaces.x_emb, &spaces.y_emb, map, &spaces.x_basis, &spaces.y_basis];
    sources.extend(anchors);
    let prov = provenance(cfg, &sources)?;
    save_bundle(
        &Artifact::Correspondence {
            correspondence: corr.clone(),
            n_y: y.n(),
        },
        &out.join("correspondence"),
        &prov,
    )?;
    save_bundle(&Artifact::Transform(t.clone()), &out.join("transform"), &prov)?;
    let mapped = t.apply(&x)?;
    let residual = (0..x.n())
        .map(|i| (mapped.data().row(i) - y.data().row(corr.assignment()[i])).norm())
        .sum::<f64>()
        / x.n() as f64;
    Ok(json!({
        "fit": cfg.fit,
        "pairs": corr.len(),
        "pinned_anchors": pinned,
        "mean_residual": residual,
    }))
}

#[allow(clippy::too_many_arguments)]
fn retrieve(
    cfg: &PipelineConfig,
    x_emb: &Path,
    y_emb: &Path,
    truth: &Path,
    transform: Option<&Path>,
    map: Option<&Path>,
    x_basis: Option<&Path>,
    y_basis: Option<&Path>,
) -> Result<Value> {
    let x = load_emb(x_emb)?;
    let y = load_emb(y_emb)?;
    let gt = Correspondence::load(truth, x.n(), y.n(), CorrespondenceSource::GroundTruth)?;
    let (result, mode) = match (transform, map, x_basis, y_basis) {
        (Some(t), _, _, _) => {
            let t: LinearTransform = load_transform_bundle(t)?;
            (mrr(&t.apply(&x)?, &y, &gt)?, "transform")
        }
        (None, Some(m), Some(bxp), Some(byp)) => {
            // Each point becomes its distance function over its own space,
            // encoded in that space's basis; source codes go through C.
            let c = load_map_bundle(m)?;
            let bx = load_basis_bundle(bxp)?.truncated(c.k_x())?;
            let by = load_basis_bundle(byp)?.truncated(c.k_y())?;
            let ax = bx.project(&distance_functions(&x, &x, cfg.metric)?)?;
            let ay = by.project(&distance_functions(&y, &y, cfg.metric)?)?;
            let queries = EmbeddingSet::new(x.ids().to_vec(), transfer_coefficients(&c, &ax)?.transpose())?;
            let targets = EmbeddingSet::new(y.ids().to_vec(), ay.transpose())?;
            (mrr(&queries, &targets, &gt)?, "coefficients")
        }
        _ => return Err(Error::InvalidConfig("retrieve needs --transform or --map with both bases".into())),
    };
    Ok(json!({"mode": mode, "retrieval": result}))
}

fn stitch(transform: &Path, x_emb: &Path, x_labels: &Path, y_emb: &Path, y_labels: &Path) -> Result<Value> {
    let t = load_transform_bundle(transform)?;
    let x = load_emb(x_emb)?;
    let y = load_emb(y_emb)?;
    let lx = load_labels(x_labels, &x)?;
    let ly = load_labels(y_labels, &y)?;
    let accuracy = stitching_accuracy(&x, &t, &y, &ly, &lx)?;
    let identity = LinearTransform {
        kind: TransformKind::Linear,
        matrix: DMatrix::identity(y.d(), y.d()),
        offset: DVector::zeros(y.d()),
    };
    let self_accuracy = stitching_accuracy(&y, &identity, &y, &ly, &ly)?;
    Ok(json!({"accuracy": accuracy, "self_accuracy": self_accuracy}))
}

fn synth(cfg: &PipelineConfig, n: usize, d: usize, noise: f64, anchors: usize, out: &Path) -> Result<Value> {
    let pair = synthetic_pair(n, d, noise, cfg.seed)?;
    save_embeddings(&pair.x, &out.join("x.csv"), EmbeddingFormat::Csv)?;
    save_embeddings(&pair.y, &out.join("y.csv"), EmbeddingFormat::Csv)?;
    pair.ground_truth.save(&out.join("truth.csv"))?;
    save_anchors(&pair.anchors(anchors, cfg.seed)?, &out.join("anchors.csv"))?;
    save_labels(&pair.labels_x, pair.x.ids(), &out.join("x_labels.csv"))?;
    save_labels(&pair.labels_y, pair.y.ids(), &out.join("y_labels.csv"))?;
    Ok(json!({"n": n, "d": d, "noise": noise, "anchors": anchors, "sigma_x": pair.sigma_x}))
}

fn bench(cli: &Cli, grid: &str, timing: bool, out: &Path) -> Result<Value> {
    let mut cfg: BenchConfig = if grid == "default" {
        BenchConfig::default()
    } else {
        read_json(Path::new(grid))?
    };
    if let Some(path) = &cli.config {
        cfg.pipeline = read_json(path)?;
    }
    cli.overrides.apply(&mut cfg.pipeline)?;
    cfg.timing |= timing;
    write_json(&out.join("config.json"), &cfg)?;
    let rows = noise_benchmark(&cfg)?;
    let dest = out.join("bench.csv");
    std::fs::write(&dest, bench_csv(&rows)).map_err(|e| Error::io(&dest, e))?;
    Ok(json!({"command": "bench", "status": "ok", "result": {"rows": rows}}))
}
