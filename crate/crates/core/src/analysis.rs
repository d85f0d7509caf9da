//! Map-based similarity between spaces and localization of distortion.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedio::{EmbeddingSet, LabelAssignment};
use crate::error::{Error, Result};
use crate::lfm::FunctionalMap;
use crate::pipeline::{fit_pair, pair_descriptors, Guidance, PipelineConfig, SpaceModel};
use crate::spectral::SpectralBasis;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    pub score: f64,
    pub offdiag_energy: f64,
    pub total_energy: f64,
}

/// `1 - ||off(C^T C)||^2 / ||C^T C||^2`: one exactly when `C^T C` is
/// diagonal.
pub fn lfm_similarity(map: &FunctionalMap) -> Result<SimilarityReport> {
    let c = map.matrix();
    let ctc = c.tr_mul(c);
    let total_energy = ctc.norm_squared();
    if total_energy == 0.0 {
        return Err(Error::Degenerate("similarity of the zero map".into()));
    }
    let diag: f64 = ctc.diagonal().iter().map(|v| v * v).sum();
    let offdiag_energy = (total_energy - diag).max(0.0);
    let score = (1.0 - offdiag_energy / total_energy).clamp(0.0, 1.0);
    Ok(SimilarityReport {
        score,
        offdiag_energy,
        total_energy,
    })
}

/// Leading eigenvector of `C^T C`. When the top eigenvalue is repeated the
/// vector is the projection of the first coordinate axis with a nonzero
/// component onto that eigenspace, so the answer does not depend on the
/// eigensolver's choice of basis.
pub fn leading_direction(map: &FunctionalMap) -> Result<DVector<f64>> {
    let c = map.matrix();
    let eig = SymmetricEigen::new(c.tr_mul(c));
    let top = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(top > 0.0) {
        return Err(Error::Degenerate("zero map has no leading direction".into()));
    }
    let span: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&i| eig.eigenvalues[i] >= top * (1.0 - 1e-9))
        .collect();
    let basis = DMatrix::from_fn(c.ncols(), span.len(), |r, j| eig.eigenvectors[(r, span[j])]);
    for axis in 0..c.ncols() {
        let v = &basis * basis.row(axis).transpose();
        let norm = v.norm();
        if norm > 1e-8 {
            let mut v = v / norm;
            // largest magnitude entry positive, lowest index on ties
            let mut best = 0;
            for i in 1..v.len() {
                if v[i].abs() > v[best].abs() {
                    best = i;
                }
            }
            if v[best] < 0.0 {
                v.neg_mut();
            }
            return Ok(v);
        }
    }
    Err(Error::Degenerate("leading eigenspace is empty".into()))
}

/// `Phi_Y v` for the leading direction `v` of `C^T C`, scaled to unit max
/// absolute value. Uses the first `k_X` eigenvectors of `by`.
pub fn distortion_function(map: &FunctionalMap, by: &SpectralBasis) -> Result<Vec<f64>> {
    if by.k() < map.k_x() {
        return Err(Error::shape("distortion basis size", map.k_x(), by.k()));
    }
    let v = leading_direction(map)?;
    let f = by.eigenvectors().columns(0, map.k_x()) * v;
    let max = f.amax();
    if max == 0.0 {
        return Err(Error::Degenerate("distortion function vanishes".into()));
    }
    Ok(f.iter().map(|x| x / max).collect())
}

/// Descriptor guidance shared by every space of a similarity matrix.
#[derive(Debug, Clone)]
pub enum SharedGuidance {
    /// Row indices that denote the same item in every space.
    Anchors(Vec<usize>),
    /// One label assignment per space.
    Labels(Vec<LabelAssignment>),
    /// Intrinsic descriptors (HKS or WKS) only.
    Intrinsic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub scores: DMatrix<f64>,
    /// Row-wise argmax over off-diagonal entries.
    pub best_match: Vec<usize>,
    /// Fraction of rows whose best match is the designated counterpart.
    pub matching_accuracy: Option<f64>,
}

/// Pairwise similarity scores between spaces, symmetrized by averaging the
/// two map directions. `counterparts[i]` optionally names the space row `i`
/// should select.
pub fn similarity_matrix(
    spaces: &[EmbeddingSet],
    guidance: &SharedGuidance,
    cfg: &PipelineConfig,
    counterparts: Option<&[usize]>,
) -> Result<SimilarityMatrix> {
    let m = spaces.len();
    if m < 2 {
        return Err(Error::InvalidInput("similarity matrix needs at least two spaces".into()));
    }
    if let SharedGuidance::Labels(l) = guidance {
        if l.len() != m {
            return Err(Error::shape("label assignments", m, l.len()));
        }
    }
    if let Some(c) = counterparts {
        if c.len() != m || c.iter().any(|&j| j >= m) {
            return Err(Error::InvalidInput("counterparts must name one space per row".into()));
        }
    }
    let models: Vec<SpaceModel> = spaces
        .par_iter()
        .map(|x| SpaceModel::build(x, cfg))
        .collect::<Result<_>>()?;
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..m).map(move |j| (i, j))).collect();
    let directed: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let anchor_set;
            let g = match guidance {
                SharedGuidance::Anchors(a) => {
                    let pairs = a.iter().map(|&r| (r, r)).collect();
                    anchor_set = crate::embedio::AnchorSet::new(pairs, spaces[i].n(), spaces[j].n())?;
                    Guidance::Anchors(&anchor_set)
                }
                SharedGuidance::Labels(l) => Guidance::Labels(&l[i], &l[j]),
                SharedGuidance::Intrinsic => Guidance::None,
            };
            let (fx, fy) = pair_descriptors(&spaces[i], &models[i], &spaces[j], &models[j], cfg.descriptor, &g)?;
            let fit = fit_pair(&models[i], &models[j], &fx, &fy, cfg)?;
            Ok(lfm_similarity(&fit.map)?.score)
        })
        .collect::<Result<_>>()?;
    let scores = DMatrix::from_fn(m, m, |i, j| 0.5 * (directed[i * m + j] + directed[j * m + i]));
    let best_match: Vec<usize> = (0..m)
        .map(|i| {
            let mut best = usize::MAX;
            for j in (0..m).filter(|&j| j != i) {
                if best == usize::MAX || scores[(i, j)] > scores[(i, best)] {
                    best = j;
                }
            }
            best
        })
        .collect();
    let matching_accuracy = counterparts.map(|c| {
        best_match.iter().zip(c).filter(|(a, b)| a == b).count() as f64 / m as f64
    });
    Ok(SimilarityMatrix {
        scores,
        best_match,
        matching_accuracy,
    })
}
