//! Retrieval metrics, the synthetic isometric-pair generator and the
//! experiment harness built on top of the pipeline.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::lfm_similarity;
use crate::descriptors::DescriptorKind;
use crate::embedio::{shared_classes, AnchorSet, EmbeddingSet, LabelAssignment};
use crate::error::{Error, Result};
use crate::latgraph::{Metric, PreparedPoints};
use crate::pipeline::{fit_pair, pair_descriptors, Guidance, PairFit, PipelineConfig, SpaceModel};
use crate::transfer::{fit_transform, fit_transform_pairs, Correspondence, CorrespondenceSource, LinearTransform, TransformKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub mrr: f64,
    pub hits_at_1: f64,
    pub queries: usize,
}

/// Mean reciprocal rank of `targets[truth[q]]` when ranking all targets by
/// angular distance to query `q`. Equidistant targets with a lower index
/// rank ahead of the true one.
pub fn mrr(queries: &EmbeddingSet, targets: &EmbeddingSet, truth: &Correspondence) -> Result<RetrievalResult> {
    if queries.n() == 0 {
        return Err(Error::InvalidInput("no queries".into()));
    }
    if truth.len() != queries.n() {
        return Err(Error::shape("ground truth", queries.n(), truth.len()));
    }
    if queries.d() != targets.d() {
        return Err(Error::shape("query dimension", targets.d(), queries.d()));
    }
    if let Some(&t) = truth.assignment().iter().find(|&&t| t >= targets.n()) {
        return Err(Error::InvalidInput(format!("true target {t} out of range")));
    }
    let pts = PreparedPoints::new(targets, Metric::Angular)?;
    let ranks: Vec<usize> = (0..queries.n())
        .into_par_iter()
        .map(|q| {
            let query = pts.prepare_query(&queries.row(q))?;
            let t = truth.assignment()[q];
            let dt = pts.dist_to(&query, t);
            let mut rank = 1;
            for j in 0..targets.n() {
                let d = pts.dist_to(&query, j);
                if d < dt || (d == dt && j < t) {
                    rank += 1;
                }
            }
            Ok(rank)
        })
        .collect::<Result<_>>()?;
    let q = ranks.len() as f64;
    Ok(RetrievalResult {
        mrr: ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / q,
        hits_at_1: ranks.iter().filter(|&&r| r == 1).count() as f64 / q,
        queries: ranks.len(),
    })
}

/// Shape of the Gaussian mixture behind [`synthetic_pair`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MixtureSpec {
    pub components: usize,
    /// Smallest distance between component means, in units of the
    /// within-component standard deviation.
    pub separation: f64,
}

impl Default for MixtureSpec {
    fn default() -> Self {
        Self {
            components: 10,
            separation: 4.0,
        }
    }
}

/// Two spaces related by a hidden permutation, an orthogonal map and noise.
#[derive(Debug, Clone)]
pub struct SyntheticPair {
    pub x: EmbeddingSet,
    pub y: EmbeddingSet,
    /// Row `i` of `x` generated row `ground_truth[i]` of `y`.
    pub ground_truth: Correspondence,
    /// `Q` with `y[gt[i]] = Q x[i] + noise`.
    pub transform: DMatrix<f64>,
    pub noise_level: f64,
    /// Pooled per-coordinate standard deviation of `x`.
    pub sigma_x: f64,
    pub labels_x: LabelAssignment,
    pub labels_y: LabelAssignment,
}

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// signs of `R`'s diagonal folded into `Q`.
pub fn random_orthogonal(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let qr = gaussian(rng, d, d).qr();
    let r = qr.r();
    let mut q = qr.q();
    for (j, mut col) in q.column_iter_mut().enumerate() {
        if r[(j, j)] < 0.0 {
            col.neg_mut();
        }
    }
    q
}

/// Pooled per-coordinate standard deviation.
pub fn pooled_std(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows() as f64;
    let var: f64 = m
        .column_iter()
        .map(|c| {
            let mean = c.mean();
            c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
        })
        .sum::<f64>()
        / m.ncols() as f64;
    var.sqrt()
}

/// Samples a labeled mixture in `d` dimensions with unit within-component
/// spread; the smallest gap between means is exactly `separation`.
pub fn sample_mixture(n: usize, d: usize, spec: &MixtureSpec, rng: &mut ChaCha8Rng) -> Result<(DMatrix<f64>, Vec<usize>)> {
    if spec.components == 0 || spec.components > n {
        return Err(Error::InvalidInput(format!("cannot draw {} components from {n} points", spec.components)));
    }
    let mut means = gaussian(rng, spec.components, d);
    if spec.components > 1 {
        let mut min_gap = f64::INFINITY;
        for a in 0..spec.components {
            for b in a + 1..spec.components {
                min_gap = min_gap.min((means.row(a) - means.row(b)).norm());
            }
        }
        means *= spec.separation / min_gap;
    }
    let labels: Vec<usize> = (0..n).map(|i| i % spec.components).collect();
    let noise = gaussian(rng, n, d);
    let x = DMatrix::from_fn(n, d, |i, j| means[(labels[i], j)] + noise[(i, j)]);
    Ok((x, labels))
}

/// `Y = permute(X) Q^T + noise_level * sigma_X * N(0, I)` over a
/// ten-component mixture `X`.
pub fn synthetic_pair(n: usize, d: usize, noise_level: f64, seed: u64) -> Result<SyntheticPair> {
    synthetic_pair_with(n, d, noise_level, seed, &MixtureSpec::default())
}

pub fn synthetic_pair_with(n: usize, d: usize, noise_level: f64, seed: u64, spec: &MixtureSpec) -> Result<SyntheticPair> {
    if !(n > d && d >= 2) {
        return Err(Error::InvalidInput(format!("need n > d >= 2, got n={n}, d={d}")));
    }
    if !(noise_level >= 0.0 && noise_level.is_finite()) {
        return Err(Error::InvalidInput(format!("noise level must be >= 0, got {noise_level}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (x, labels) = sample_mixture(n, d, spec, &mut rng)?;
    let sigma_x = pooled_std(&x);
    let q = random_orthogonal(d, &mut rng);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let noise = gaussian(&mut rng, n, d);
    let rotated = &x * q.transpose();
    let mut y = DMatrix::zeros(n, d);
    let mut labels_y = vec![0; n];
    for i in 0..n {
        let t = perm[i];
        for j in 0..d {
            y[(t, j)] = rotated[(i, j)] + noise_level * sigma_x * noise[(i, j)];
        }
        labels_y[t] = labels[i];
    }
    Ok(SyntheticPair {
        x: EmbeddingSet::from_matrix(x)?,
        y: EmbeddingSet::from_matrix(y)?,
        ground_truth: Correspondence::new(perm, n, CorrespondenceSource::GroundTruth)?,
        transform: q,
        noise_level,
        sigma_x,
        labels_x: LabelAssignment::from_indices(&labels),
        labels_y: LabelAssignment::from_indices(&labels_y),
    })
}

impl SyntheticPair {
    /// `count` ground-truth pairs drawn without replacement.
    pub fn anchors(&self, count: usize, seed: u64) -> Result<AnchorSet> {
        let n = self.x.n();
        if count == 0 || count > n {
            return Err(Error::InvalidInput(format!("anchor count must be in 1..={n}, got {count}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked = sample(&mut rng, n, count).into_vec();
        picked.sort_unstable();
        let gt = self.ground_truth.assignment();
        AnchorSet::new(picked.into_iter().map(|i| (i, gt[i])).collect(), n, self.y.n())
    }
}

/// Nearest-centroid classifier fit on `y_train`, scored on the transformed
/// `x_test`. Ties go to the lexicographically first class.
pub fn stitching_accuracy(
    x_test: &EmbeddingSet,
    transform: &LinearTransform,
    y_train: &EmbeddingSet,
    y_labels: &LabelAssignment,
    x_labels: &LabelAssignment,
) -> Result<f64> {
    if y_labels.len() != y_train.n() || x_labels.len() != x_test.n() {
        return Err(Error::InvalidInput("label count differs from row count".into()));
    }
    let classes = shared_classes(y_labels, x_labels)?;
    let yi = y_labels.class_indices(&classes)?;
    let xi = x_labels.class_indices(&classes)?;
    let mut centroids = DMatrix::zeros(classes.len(), y_train.d());
    let mut counts = vec![0usize; classes.len()];
    for (r, &c) in yi.iter().enumerate() {
        let mut row = centroids.row_mut(c);
        row += y_train.data().row(r);
        counts[c] += 1;
    }
    for (c, &k) in counts.iter().enumerate() {
        if k > 0 {
            let mut row = centroids.row_mut(c);
            row /= k as f64;
        }
    }
    let mapped = transform.apply(x_test)?;
    let correct = (0..mapped.n())
        .filter(|&r| {
            let p = mapped.data().row(r);
            let mut best = usize::MAX;
            let mut best_d = f64::INFINITY;
            for c in (0..classes.len()).filter(|&c| counts[c] > 0) {
                let d = (p - centroids.row(c)).norm_squared();
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            best == xi[r]
        })
        .count();
    Ok(correct as f64 / mapped.n() as f64)
}

/// Everything one pipeline run on a synthetic pair produces.
#[derive(Debug, Clone)]
pub struct PairRun {
    pub fit: PairFit,
    pub transform: LinearTransform,
    pub retrieval: RetrievalResult,
    /// Similarity of the solved (pre-refinement) map.
    pub similarity: f64,
    pub correspondence_accuracy: f64,
}

/// Graph, basis, descriptors, map, refinement, transform fit and retrieval
/// on one synthetic pair. `anchors` is ignored by anchor-free descriptors.
pub fn run_pair(pair: &SyntheticPair, cfg: &PipelineConfig, anchors: usize) -> Result<PairRun> {
    let (mx, my) = rayon::join(|| SpaceModel::build(&pair.x, cfg), || SpaceModel::build(&pair.y, cfg));
    let (mx, my) = (mx?, my?);
    let anchor_set;
    let guidance = match cfg.descriptor {
        DescriptorKind::AnchorGeodesic | DescriptorKind::AnchorMetric => {
            anchor_set = pair.anchors(anchors, cfg.seed)?;
            Guidance::Anchors(&anchor_set)
        }
        DescriptorKind::LabelIndicator => Guidance::Labels(&pair.labels_x, &pair.labels_y),
        DescriptorKind::Hks | DescriptorKind::Wks => Guidance::None,
    };
    let (fx, fy) = pair_descriptors(&pair.x, &mx, &pair.y, &my, cfg.descriptor, &guidance)?;
    let fit = fit_pair(&mx, &my, &fx, &fy, cfg)?;
    let transform = fit_transform(&pair.x, &pair.y, &fit.correspondence, cfg.fit)?;
    let retrieval = mrr(&transform.apply(&pair.x)?, &pair.y, &pair.ground_truth)?;
    let similarity = lfm_similarity(&fit.seed_map)?.score;
    let correspondence_accuracy = fit.correspondence.accuracy(&pair.ground_truth)?;
    Ok(PairRun {
        fit,
        transform,
        retrieval,
        similarity,
        correspondence_accuracy,
    })
}

/// Retrieval after fitting `kind` directly on `count` anchor pairs.
pub fn anchor_only_retrieval(pair: &SyntheticPair, count: usize, kind: TransformKind, seed: u64) -> Result<RetrievalResult> {
    let anchors = pair.anchors(count, seed)?;
    let t = fit_transform_pairs(&pair.x, &pair.y, anchors.pairs(), kind)?;
    mrr(&t.apply(&pair.x)?, &pair.y, &pair.ground_truth)
}

/// Grid of the noise benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub n: usize,
    pub d: usize,
    pub metrics: Vec<Metric>,
    pub noise_levels: Vec<f64>,
    pub anchor_counts: Vec<usize>,
    pub descriptors: Vec<DescriptorKind>,
    pub pipeline: PipelineConfig,
    /// Record wall-clock milliseconds; off keeps the table reproducible.
    pub timing: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            d: 64,
            metrics: vec![Metric::Angular, Metric::Euclidean],
            noise_levels: vec![0.0, 0.1, 0.5, 1.0],
            anchor_counts: vec![5],
            descriptors: vec![DescriptorKind::AnchorGeodesic],
            pipeline: PipelineConfig::benchmark(),
            timing: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub metric: Metric,
    pub noise: f64,
    pub anchors: usize,
    pub descriptor: DescriptorKind,
    pub mrr: f64,
    pub hits_at_1: f64,
    pub similarity: f64,
    pub wall_ms: u64,
}

pub const BENCH_HEADER: &str = "metric,noise,anchors,descriptor,mrr,hits_at_1,similarity,wall_ms";

impl BenchRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{:.6},{:.6},{:.6},{}",
            self.metric, self.noise, self.anchors, self.descriptor, self.mrr, self.hits_at_1, self.similarity, self.wall_ms
        )
    }
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(BENCH_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}

/// Runs every grid cell. A cell's pair depends on the noise level and the
/// base seed only, so metrics and descriptors are compared on identical
/// data.
pub fn noise_benchmark(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    if cfg.metrics.is_empty() || cfg.noise_levels.is_empty() || cfg.anchor_counts.is_empty() || cfg.descriptors.is_empty() {
        return Err(Error::InvalidConfig("every benchmark axis needs at least one value".into()));
    }
    let mut cells = Vec::new();
    for &metric in &cfg.metrics {
        for &noise in &cfg.noise_levels {
            for &anchors in &cfg.anchor_counts {
                for &descriptor in &cfg.descriptors {
                    cells.push((metric, noise, anchors, descriptor));
                }
            }
        }
    }
    cells
        .into_par_iter()
        .map(|(metric, noise, anchors, descriptor)| {
            let start = Instant::now();
            let pair = synthetic_pair(cfg.n, cfg.d, noise, cfg.pipeline.seed)?;
            let pcfg = PipelineConfig {
                metric,
                descriptor,
                ..cfg.pipeline.clone()
            };
            let run = run_pair(&pair, &pcfg, anchors)?;
            Ok(BenchRow {
                metric,
                noise,
                anchors,
                descriptor,
                mrr: run.retrieval.mrr,
                hits_at_1: run.retrieval.hits_at_1,
                similarity: run.similarity,
                wall_ms: if cfg.timing { start.elapsed().as_millis() as u64 } else { 0 },
            })
        })
        .collect()
}
