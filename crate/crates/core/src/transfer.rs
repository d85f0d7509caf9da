//! Turning functional maps into usable cross-space mappings: pointwise
//! correspondences, fitted linear transforms, coefficient transfer and the
//! distance-function representation of out-of-sample points.

use std::path::Path;

use nalgebra::{DMatrix, DVector, SVD};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedio::EmbeddingSet;
use crate::error::{Error, Result};
use crate::latgraph::{Metric, PreparedPoints};
use crate::lfm::FunctionalMap;
use crate::spectral::SpectralBasis;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrespondenceSource {
    Anchors,
    Extracted,
    GroundTruth,
}

/// A total map from X's nodes to Y's nodes: `assignment[x]` is the target.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Correspondence {
    assignment: Vec<usize>,
    source: CorrespondenceSource,
}

impl Correspondence {
    pub fn new(assignment: Vec<usize>, n_y: usize, source: CorrespondenceSource) -> Result<Self> {
        if assignment.is_empty() {
            return Err(Error::InvalidInput("empty correspondence".into()));
        }
        if let Some((x, &y)) = assignment.iter().enumerate().find(|(_, &y)| y >= n_y) {
            return Err(Error::InvalidInput(format!(
                "correspondence sends node {x} to {y}, outside 0..{n_y}"
            )));
        }
        Ok(Self { assignment, source })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            assignment: (0..n).collect(),
            source: CorrespondenceSource::GroundTruth,
        }
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn source(&self) -> CorrespondenceSource {
        self.source
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// The inverse of a bijection, as a map Y -> X.
    pub fn inverse(&self) -> Result<Self> {
        let n = self.assignment.len();
        let mut inv = vec![usize::MAX; n];
        for (x, &y) in self.assignment.iter().enumerate() {
            if y >= n || inv[y] != usize::MAX {
                return Err(Error::InvalidInput("correspondence is not a bijection".into()));
            }
            inv[y] = x;
        }
        Ok(Self {
            assignment: inv,
            source: self.source,
        })
    }

    /// Fraction of nodes mapped as in `reference`.
    pub fn accuracy(&self, reference: &Correspondence) -> Result<f64> {
        if reference.len() != self.len() {
            return Err(Error::shape("correspondence accuracy", self.len(), reference.len()));
        }
        let hits = self
            .assignment
            .iter()
            .zip(&reference.assignment)
            .filter(|(a, b)| a == b)
            .count();
        Ok(hits as f64 / self.len() as f64)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
        w.write_record(["src_index", "dst_index"]).map_err(|e| csv_err(path, e))?;
        for (x, y) in self.assignment.iter().enumerate() {
            w.write_record([x.to_string(), y.to_string()])
                .map_err(|e| csv_err(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads a `src_index,dst_index` file; every source in `0..n_x` must
    /// appear exactly once.
    pub fn load(path: &Path, n_x: usize, n_y: usize, source: CorrespondenceSource) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)
            .map_err(|e| csv_err(path, e))?;
        let mut assignment = vec![usize::MAX; n_x];
        for (row, rec) in r.records().enumerate() {
            let line = row + 2;
            let rec = rec.map_err(|e| csv_err(path, e))?;
            let parse = |i: usize| -> Result<usize> {
                rec.get(i).and_then(|s| s.trim().parse().ok()).ok_or_else(|| Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: "expected two non-negative integers".into(),
                })
            };
            let (x, y) = (parse(0)?, parse(1)?);
            if x >= n_x || y >= n_y {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!("pair ({x},{y}) out of range"),
                });
            }
            if assignment[x] != usize::MAX {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!("source {x} assigned twice"),
                });
            }
            assignment[x] = y;
        }
        if let Some(x) = assignment.iter().position(|&y| y == usize::MAX) {
            return Err(Error::InvalidInput(format!(
                "partial correspondence in {}: source {x} unassigned",
                path.display()
            )));
        }
        Self::new(assignment, n_y, source)
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line: e.position().map_or(0, |p| p.line() as usize),
        message: e.to_string(),
    }
}

/// Nearest row of `Phi_Y C` for every row of `Phi_X`; ties go to the lowest
/// target index.
pub fn extract_pointwise(map: &FunctionalMap, bx: &SpectralBasis, by: &SpectralBasis) -> Result<Correspondence> {
    if map.k_x() != bx.k() || map.k_y() != by.k() {
        return Err(Error::shape(
            "map against bases",
            format!("{}x{}", by.k(), bx.k()),
            format!("{}x{}", map.k_y(), map.k_x()),
        ));
    }
    let assignment = crate::lfm::pointwise_assignment(map.matrix(), bx, by)?;
    Correspondence::new(assignment, by.n(), CorrespondenceSource::Extracted)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformKind {
    Orthogonal,
    Linear,
    Affine,
}

impl std::str::FromStr for TransformKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ortho" | "orthogonal" => Ok(Self::Orthogonal),
            "linear" => Ok(Self::Linear),
            "affine" => Ok(Self::Affine),
            other => Err(Error::InvalidConfig(format!("unknown transform kind {other:?}"))),
        }
    }
}

/// `y = M x + b`, with `M` of shape `d_Y x d_X`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearTransform {
    pub kind: TransformKind,
    pub matrix: DMatrix<f64>,
    pub offset: DVector<f64>,
}

impl LinearTransform {
    pub fn d_in(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn d_out(&self) -> usize {
        self.matrix.nrows()
    }

    /// Maps every row of `x`, keeping ids.
    pub fn apply(&self, x: &EmbeddingSet) -> Result<EmbeddingSet> {
        if x.d() != self.d_in() {
            return Err(Error::shape("transform input", self.d_in(), x.d()));
        }
        let mut out = x.data() * self.matrix.transpose();
        for mut row in out.row_iter_mut() {
            row += self.offset.transpose();
        }
        EmbeddingSet::new(x.ids().to_vec(), out)
    }
}

/// Fits a transform on the rows `(x[i], y[corr[i]])` for all `i`.
pub fn fit_transform(x: &EmbeddingSet, y: &EmbeddingSet, corr: &Correspondence, kind: TransformKind) -> Result<LinearTransform> {
    if corr.len() != x.n() {
        return Err(Error::InvalidInput(format!(
            "partial correspondence: {} of {} rows assigned",
            corr.len(),
            x.n()
        )));
    }
    let pairs: Vec<(usize, usize)> = corr.assignment().iter().copied().enumerate().collect();
    fit_transform_pairs(x, y, &pairs, kind)
}

/// Fits a transform on explicit `(source_row, target_row)` pairs.
pub fn fit_transform_pairs(
    x: &EmbeddingSet,
    y: &EmbeddingSet,
    pairs: &[(usize, usize)],
    kind: TransformKind,
) -> Result<LinearTransform> {
    if pairs.is_empty() {
        return Err(Error::InvalidInput("no pairs to fit a transform on".into()));
    }
    if let Some(&(i, j)) = pairs.iter().find(|&&(i, j)| i >= x.n() || j >= y.n()) {
        return Err(Error::InvalidInput(format!("pair ({i},{j}) out of range")));
    }
    let xs = DMatrix::from_fn(pairs.len(), x.d(), |r, c| x.data()[(pairs[r].0, c)]);
    let ys = DMatrix::from_fn(pairs.len(), y.d(), |r, c| y.data()[(pairs[r].1, c)]);
    match kind {
        TransformKind::Orthogonal => procrustes(&xs, &ys),
        TransformKind::Linear => {
            let m = ridge(&xs, &ys)?;
            Ok(LinearTransform {
                kind,
                matrix: m,
                offset: DVector::zeros(y.d()),
            })
        }
        TransformKind::Affine => {
            let mx = xs.row_mean();
            let my = ys.row_mean();
            let xc = DMatrix::from_fn(xs.nrows(), xs.ncols(), |r, c| xs[(r, c)] - mx[c]);
            let yc = DMatrix::from_fn(ys.nrows(), ys.ncols(), |r, c| ys[(r, c)] - my[c]);
            let m = ridge(&xc, &yc)?;
            let offset = my.transpose() - &m * mx.transpose();
            Ok(LinearTransform { kind, matrix: m, offset })
        }
    }
}

/// Orthogonal `M` minimizing `||X M^T - Y||`: `M = U V^T` from the SVD of
/// `Y^T X`.
fn procrustes(xs: &DMatrix<f64>, ys: &DMatrix<f64>) -> Result<LinearTransform> {
    let (dx, dy) = (xs.ncols(), ys.ncols());
    if dy < dx {
        return Err(Error::InvalidInput(format!(
            "orthogonal fit needs target dimension >= source dimension, got {dy} < {dx}"
        )));
    }
    let svd = SVD::new(ys.tr_mul(xs), true, true);
    let u = svd.u.ok_or_else(|| Error::Degenerate("SVD did not return U".into()))?;
    let v_t = svd.v_t.ok_or_else(|| Error::Degenerate("SVD did not return V".into()))?;
    Ok(LinearTransform {
        kind: TransformKind::Orthogonal,
        matrix: u * v_t,
        offset: DVector::zeros(dy),
    })
}

/// Ridge-damped least squares `M^T = (X^T X + lambda I)^-1 X^T Y`.
fn ridge(xs: &DMatrix<f64>, ys: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut gram = xs.tr_mul(xs);
    let d = gram.nrows();
    let scale = gram.trace() / d as f64;
    if !(scale > 0.0) {
        return Err(Error::Degenerate("source points have zero variance".into()));
    }
    for i in 0..d {
        gram[(i, i)] += 1e-8 * scale;
    }
    let rhs = xs.tr_mul(ys);
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Degenerate("normal equations not positive definite".into()))?;
    Ok(chol.solve(&rhs).transpose())
}

/// `C a`, column by column.
pub fn transfer_coefficients(map: &FunctionalMap, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.nrows() != map.k_x() {
        return Err(Error::shape("coefficients to transfer", map.k_x(), a.nrows()));
    }
    Ok(map.matrix() * a)
}

/// Distances from `x` to every node under `metric`, rescaled to unit max.
pub fn embed_as_distance_function(x: &[f64], nodes: &EmbeddingSet, metric: Metric) -> Result<Vec<f64>> {
    let pts = PreparedPoints::new(nodes, metric)?;
    distance_function(&pts, x)
}

fn distance_function(pts: &PreparedPoints, x: &[f64]) -> Result<Vec<f64>> {
    let q = pts.prepare_query(x)?;
    let mut f: Vec<f64> = (0..pts.len()).map(|j| pts.dist_to(&q, j)).collect();
    let max = f.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        f.iter_mut().for_each(|v| *v /= max);
    }
    Ok(f)
}

/// Column `q` is the distance function of query row `q`.
pub fn distance_functions(queries: &EmbeddingSet, nodes: &EmbeddingSet, metric: Metric) -> Result<DMatrix<f64>> {
    if queries.d() != nodes.d() {
        return Err(Error::shape("query dimension", nodes.d(), queries.d()));
    }
    let pts = PreparedPoints::new(nodes, metric)?;
    let cols: Vec<Vec<f64>> = (0..queries.n())
        .into_par_iter()
        .map(|q| distance_function(&pts, &queries.row(q)))
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(nodes.n(), queries.n(), |i, q| cols[q][i]))
}
