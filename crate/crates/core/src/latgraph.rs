//! Symmetric k-NN graphs over embedding sets and their normalized Laplacian.
//!
//! Edges are the symmetric union of the per-node k nearest neighbors, found
//! by exact brute force. Each edge carries both its weight and its raw metric
//! length; the latter drives geodesic (shortest-path) distances.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedio::EmbeddingSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// `arccos(cos(x, y)) / pi`, in `[0, 1]`.
    Angular,
    Euclidean,
}

impl Metric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Euclidean => sq_dist(a, b).sqrt(),
            Metric::Angular => {
                let na = dot(a, a).sqrt();
                let nb = dot(b, b).sqrt();
                if na == 0.0 || nb == 0.0 {
                    return 0.5;
                }
                let ua: Vec<f64> = a.iter().map(|v| v / na).collect();
                let ub: Vec<f64> = b.iter().map(|v| v / nb).collect();
                angular_unit(&ua, &ub)
            }
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "angular" | "cosine" => Ok(Metric::Angular),
            "euclidean" | "l2" => Ok(Metric::Euclidean),
            other => Err(Error::InvalidConfig(format!("unknown metric {other:?}"))),
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Metric::Angular => "angular",
            Metric::Euclidean => "euclidean",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum WeightFn {
    /// `exp(-d^2 / sigma^2)`; `sigma: None` means the mean k-th neighbor distance.
    Gaussian { sigma: Option<f64> },
    Binary,
}

impl WeightFn {
    fn weight(self, d: f64, sigma: f64) -> f64 {
        match self {
            WeightFn::Binary => 1.0,
            WeightFn::Gaussian { .. } => (-(d * d) / (sigma * sigma)).exp().max(f64::MIN_POSITIVE),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphConfig {
    pub k: usize,
    pub metric: Metric,
    pub weight: WeightFn,
}

impl GraphConfig {
    pub fn new(k: usize, metric: Metric) -> Self {
        Self {
            k,
            metric,
            weight: WeightFn::Gaussian { sigma: None },
        }
    }

    /// Defaults for an `n`-point set: `k = 300` from a few thousand points
    /// on, otherwise `max(16, ceil(n / 10))`, angular metric, self-tuned
    /// gaussian weights.
    pub fn default_for(n: usize) -> Self {
        Self::new(default_k(n), Metric::Angular)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.k == 0 || self.k >= n {
            return Err(Error::InvalidConfig(format!(
                "k must satisfy 1 <= k < n, got k={} with n={n}",
                self.k
            )));
        }
        if let WeightFn::Gaussian { sigma: Some(s) } = self.weight {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidConfig(format!("sigma must be positive, got {s}")));
            }
        }
        Ok(())
    }
}

pub fn default_k(n: usize) -> usize {
    let k = if n >= 3000 {
        300
    } else {
        16usize.max(n.div_ceil(10))
    };
    k.min(n.saturating_sub(1)).max(1)
}

/// A symmetric weighted graph in compressed sparse row form.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentGraph {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    weights: Vec<f64>,
    lengths: Vec<f64>,
    degrees: Vec<f64>,
    config: GraphConfig,
    sigma: Option<f64>,
    repair_edges: usize,
}

/// One undirected edge with `i < j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
    pub length: f64,
}

impl LatentGraph {
    /// Assembles a graph from undirected edges (`i != j`, each pair once).
    pub fn from_edges(
        n: usize,
        edges: &[Edge],
        config: GraphConfig,
        sigma: Option<f64>,
        repair_edges: usize,
    ) -> Result<Self> {
        let mut adj: Vec<Vec<(usize, f64, f64)>> = vec![Vec::new(); n];
        let mut seen = std::collections::HashSet::with_capacity(edges.len());
        for e in edges {
            let (a, b) = (e.i.min(e.j), e.i.max(e.j));
            if a == b || b >= n {
                return Err(Error::InvalidInput(format!("bad edge ({}, {})", e.i, e.j)));
            }
            if !(e.weight > 0.0 && e.weight.is_finite()) || !(e.length >= 0.0) {
                return Err(Error::InvalidInput(format!(
                    "edge ({a}, {b}) has weight {} and length {}",
                    e.weight, e.length
                )));
            }
            if !seen.insert((a, b)) {
                return Err(Error::InvalidInput(format!("duplicate edge ({a}, {b})")));
            }
            adj[a].push((b, e.weight, e.length));
            adj[b].push((a, e.weight, e.length));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut weights = Vec::new();
        let mut lengths = Vec::new();
        row_ptr.push(0);
        for row in &mut adj {
            row.sort_by_key(|r| r.0);
            for &(j, w, l) in row.iter() {
                cols.push(j);
                weights.push(w);
                lengths.push(l);
            }
            row_ptr.push(cols.len());
        }
        let degrees = (0..n)
            .map(|i| weights[row_ptr[i]..row_ptr[i + 1]].iter().sum())
            .collect();
        Ok(Self {
            n,
            row_ptr,
            cols,
            weights,
            lengths,
            degrees,
            config,
            sigma,
            repair_edges,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn config(&self) -> &GraphConfig {
        &self.config
    }

    /// Gaussian bandwidth actually used, if any.
    pub fn sigma(&self) -> Option<f64> {
        self.sigma
    }

    /// Number of edges added to reconnect components.
    pub fn repair_edges(&self) -> usize {
        self.repair_edges
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn edge_count(&self) -> usize {
        self.cols.len() / 2
    }

    /// `(neighbor, weight, length)` triples of node `i`, sorted by neighbor.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()]
            .iter()
            .zip(&self.weights[r.clone()])
            .zip(&self.lengths[r])
            .map(|((&j, &w), &l)| (j, w, l))
    }

    pub fn degree_count(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[r.clone()].binary_search(&j) {
            Ok(pos) => self.weights[r.start + pos],
            Err(_) => 0.0,
        }
    }

    /// Edges with `i < j`, sorted lexicographically.
    pub fn edges(&self) -> Vec<Edge> {
        (0..self.n)
            .flat_map(|i| {
                self.neighbors(i)
                    .filter(move |&(j, _, _)| j > i)
                    .map(move |(j, weight, length)| Edge { i, j, weight, length })
            })
            .collect()
    }

    pub fn dense_weights(&self) -> DMatrix<f64> {
        let mut w = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, wt, _) in self.neighbors(i) {
                w[(i, j)] = wt;
            }
        }
        w
    }

    /// Connected components as a label per node (labels are dense, 0-based,
    /// ordered by smallest member).
    pub fn components(&self) -> Vec<usize> {
        let mut label = vec![usize::MAX; self.n];
        let mut next = 0;
        for s in 0..self.n {
            if label[s] != usize::MAX {
                continue;
            }
            let mut stack = vec![s];
            label[s] = next;
            while let Some(u) = stack.pop() {
                for (v, _, _) in self.neighbors(u) {
                    if label[v] == usize::MAX {
                        label[v] = next;
                        stack.push(v);
                    }
                }
            }
            next += 1;
        }
        label
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Angle between unit vectors over pi, as `2 atan2(|a - b|, |a + b|)`:
/// unlike `acos` of the dot product it stays accurate near 0 and is exactly
/// 0 for identical directions.
fn angular_unit(a: &[f64], b: &[f64]) -> f64 {
    let (mut minus, mut plus) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        minus += (x - y) * (x - y);
        plus += (x + y) * (x + y);
    }
    2.0 * minus.sqrt().atan2(plus.sqrt()) / std::f64::consts::PI
}

/// Row-major point cloud prepared for a metric: angular rows are normalized
/// once so the kernel is a dot product.
pub(crate) struct PreparedPoints {
    rows: Vec<f64>,
    d: usize,
    metric: Metric,
}

impl PreparedPoints {
    pub(crate) fn new(x: &EmbeddingSet, metric: Metric) -> Result<Self> {
        let d = x.d();
        let mut rows = x.to_row_major();
        if metric == Metric::Angular {
            for (i, row) in rows.chunks_exact_mut(d).enumerate() {
                let norm = dot(row, row).sqrt();
                if norm == 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "row {i} ({:?}) is the zero vector, undefined under the angular metric",
                        x.ids()[i]
                    )));
                }
                row.iter_mut().for_each(|v| *v /= norm);
            }
        }
        Ok(Self { rows, d, metric })
    }

    pub(crate) fn len(&self) -> usize {
        self.rows.len() / self.d
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.d..(i + 1) * self.d]
    }

    pub(crate) fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist_to(self.row(i), j)
    }

    /// Distance from an already-prepared query vector to point `j`.
    pub(crate) fn dist_to(&self, q: &[f64], j: usize) -> f64 {
        match self.metric {
            Metric::Angular => angular_unit(q, self.row(j)),
            Metric::Euclidean => sq_dist(q, self.row(j)).sqrt(),
        }
    }

    /// Prepares an external query vector the same way as the stored rows.
    pub(crate) fn prepare_query(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.d {
            return Err(Error::shape("query vector", self.d, x.len()));
        }
        let mut q = x.to_vec();
        if self.metric == Metric::Angular {
            let norm = dot(&q, &q).sqrt();
            if norm == 0.0 {
                return Err(Error::InvalidInput(
                    "zero vector is undefined under the angular metric".into(),
                ));
            }
            q.iter_mut().for_each(|v| *v /= norm);
        }
        Ok(q)
    }
}

fn by_dist_then_index(a: &(usize, f64), b: &(usize, f64)) -> Ordering {
    a.1.total_cmp(&b.1).then(a.0.cmp(&b.0))
}

/// Exact k nearest neighbors of every point (excluding itself), sorted by
/// distance with ties going to the lower index.
pub(crate) fn knn(points: &PreparedPoints, k: usize) -> Vec<Vec<(usize, f64)>> {
    let n = points.len();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut cand: Vec<(usize, f64)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (j, points.dist(i, j)))
                .collect();
            if k < cand.len() {
                cand.select_nth_unstable_by(k - 1, by_dist_then_index);
                cand.truncate(k);
            }
            cand.sort_by(by_dist_then_index);
            cand
        })
        .collect()
}

/// Builds the symmetric k-NN graph of `x`.
///
/// Disconnected components are joined to the largest one through their
/// single cheapest edge, so the result is always connected.
pub fn build_knn_graph(x: &EmbeddingSet, cfg: &GraphConfig) -> Result<LatentGraph> {
    let n = x.n();
    cfg.validate(n)?;
    let points = PreparedPoints::new(x, cfg.metric)?;
    let neighbors = knn(&points, cfg.k);

    let sigma = match cfg.weight {
        WeightFn::Binary => None,
        WeightFn::Gaussian { sigma: Some(s) } => Some(s),
        WeightFn::Gaussian { sigma: None } => {
            let mean = neighbors.iter().map(|nb| nb[cfg.k - 1].1).sum::<f64>() / n as f64;
            Some(if mean > 0.0 { mean } else { 1.0 })
        }
    };
    let s = sigma.unwrap_or(1.0);

    let mut lengths: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (i, nb) in neighbors.iter().enumerate() {
        for &(j, d) in nb {
            lengths.entry((i.min(j), i.max(j))).or_insert(d);
        }
    }

    let mut edges: Vec<Edge> = lengths
        .iter()
        .map(|(&(i, j), &length)| Edge {
            i,
            j,
            weight: cfg.weight.weight(length, s),
            length,
        })
        .collect();

    let repair = repair_edges(n, &edges, &points);
    let repaired = repair.len();
    edges.extend(repair.into_iter().map(|(i, j, length)| Edge {
        i,
        j,
        weight: cfg.weight.weight(length, s),
        length,
    }));
    LatentGraph::from_edges(n, &edges, *cfg, sigma, repaired)
}

/// For each component other than the largest, the cheapest edge joining it
/// to the largest component.
fn repair_edges(n: usize, edges: &[Edge], points: &PreparedPoints) -> Vec<(usize, usize, f64)> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for e in edges {
        let (a, b) = (find(&mut parent, e.i), find(&mut parent, e.j));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let roots: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &r) in roots.iter().enumerate() {
        members.entry(r).or_default().push(i);
    }
    if members.len() <= 1 {
        return Vec::new();
    }
    let giant_root = *members
        .iter()
        .max_by(|a, b| a.1.len().cmp(&b.1.len()).then(b.0.cmp(a.0)))
        .unwrap()
        .0;
    let giant = &members[&giant_root];
    members
        .iter()
        .filter(|(&r, _)| r != giant_root)
        .map(|(_, comp)| {
            let mut best = (usize::MAX, usize::MAX, f64::INFINITY);
            for &a in comp {
                for &b in giant {
                    let d = points.dist(a, b);
                    if d < best.2 || (d == best.2 && (a.min(b), a.max(b)) < (best.0, best.1)) {
                        best = (a.min(b), a.max(b), d);
                    }
                }
            }
            best
        })
        .collect()
}

/// The normalized Laplacian `I - D^{-1/2} W D^{-1/2}` as a sparse operator.
#[derive(Debug, Clone)]
pub struct NormalizedLaplacian {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    /// Off-diagonal entries `-w_ij / sqrt(d_i d_j)`.
    values: Vec<f64>,
}

pub fn normalized_laplacian(g: &LatentGraph) -> Result<NormalizedLaplacian> {
    if let Some(i) = g.degrees.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::IsolatedNode(i));
    }
    let inv_sqrt: Vec<f64> = g.degrees.iter().map(|d| 1.0 / d.sqrt()).collect();
    let mut values = Vec::with_capacity(g.cols.len());
    for i in 0..g.n {
        for p in g.row_ptr[i]..g.row_ptr[i + 1] {
            let j = g.cols[p];
            values.push(-g.weights[p] * inv_sqrt[i] * inv_sqrt[j]);
        }
    }
    Ok(NormalizedLaplacian {
        n: g.n,
        row_ptr: g.row_ptr.clone(),
        cols: g.cols.clone(),
        values,
    })
}

impl NormalizedLaplacian {
    pub fn n(&self) -> usize {
        self.n
    }

    /// `y = L x`, parallel over rows.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        y.par_iter_mut().enumerate().with_min_len(256).for_each(|(i, yi)| {
            let mut acc = x[i];
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[p] * x[self.cols[p]];
            }
            *yi = acc;
        });
    }

    /// `L X` for a dense block of column vectors.
    pub fn apply_matrix(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(x.nrows(), x.ncols());
        for c in 0..x.ncols() {
            let col: Vec<f64> = x.column(c).iter().copied().collect();
            let mut y = vec![0.0; self.n];
            self.apply(&col, &mut y);
            out.column_mut(c).copy_from_slice(&y);
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut l = DMatrix::identity(self.n, self.n);
        for i in 0..self.n {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                l[(i, self.cols[p])] = self.values[p];
            }
        }
        l
    }
}

#[derive(Copy, Clone, PartialEq)]
struct HeapItem(f64, usize);

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn dijkstra(g: &LatentGraph, source: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; g.n];
    dist[source] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(HeapItem(0.0, source));
    while let Some(HeapItem(d, u)) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for (v, _, len) in g.neighbors(u) {
            let nd = d + len;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(HeapItem(nd, v));
            }
        }
    }
    dist
}

/// Shortest-path lengths (edge length = metric distance) from each source
/// to every node; one row per source.
pub fn geodesic_distances(g: &LatentGraph, sources: &[usize]) -> Result<DMatrix<f64>> {
    if sources.is_empty() {
        return Err(Error::InvalidInput("empty source list".into()));
    }
    if let Some(&s) = sources.iter().find(|&&s| s >= g.n) {
        return Err(Error::InvalidInput(format!("source {s} out of range (n={})", g.n)));
    }
    let rows: Vec<Vec<f64>> = sources.par_iter().map(|&s| dijkstra(g, s)).collect();
    Ok(DMatrix::from_fn(sources.len(), g.n, |r, c| rows[r][c]))
}
