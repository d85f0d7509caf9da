//! Descriptor functions on graph nodes: distances to anchors (supervised),
//! class indicators (weakly supervised) and heat/wave kernel signatures
//! (unsupervised).
//!
//! Every column is rescaled to unit maximum absolute value before use.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedio::{EmbeddingSet, LabelAssignment};
use crate::error::{Error, Result};
use crate::latgraph::{geodesic_distances, LatentGraph, PreparedPoints};
use crate::spectral::SpectralBasis;

/// Eigenvalues at or below this are skipped by the wave kernel signature.
pub const WKS_EIGEN_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DescriptorKind {
    AnchorGeodesic,
    AnchorMetric,
    LabelIndicator,
    Hks,
    Wks,
}

impl DescriptorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DescriptorKind::AnchorGeodesic => "anchor_geodesic",
            DescriptorKind::AnchorMetric => "anchor_metric",
            DescriptorKind::LabelIndicator => "label_indicator",
            DescriptorKind::Hks => "hks",
            DescriptorKind::Wks => "wks",
        }
    }

    pub fn needs_anchors(self) -> bool {
        matches!(self, DescriptorKind::AnchorGeodesic | DescriptorKind::AnchorMetric)
    }
}

impl std::fmt::Display for DescriptorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(self.as_str())
    }
}

impl std::str::FromStr for DescriptorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "anchor_geodesic" | "geodesic" => DescriptorKind::AnchorGeodesic,
            "anchor_metric" | "metric" => DescriptorKind::AnchorMetric,
            "label_indicator" | "labels" => DescriptorKind::LabelIndicator,
            "hks" => DescriptorKind::Hks,
            "wks" => DescriptorKind::Wks,
            other => return Err(Error::InvalidConfig(format!("unknown descriptor {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DescriptorMeta {
    Anchors(Vec<usize>),
    Classes(Vec<String>),
    Times(Vec<f64>),
    Energies { energies: Vec<f64>, variance: f64 },
}

/// `n x n_f` descriptor values, one function per column.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSet {
    pub values: DMatrix<f64>,
    pub kind: DescriptorKind,
    pub meta: DescriptorMeta,
}

impl DescriptorSet {
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn count(&self) -> usize {
        self.values.ncols()
    }

    /// Writes `id,f0,...` for inspection.
    pub fn to_csv(&self, ids: &[String]) -> String {
        let mut out = String::from("id");
        for j in 0..self.count() {
            out.push_str(&format!(",f{j}"));
        }
        out.push('\n');
        for (i, id) in ids.iter().enumerate().take(self.n()) {
            out.push_str(id);
            for j in 0..self.count() {
                out.push_str(&format!(",{}", self.values[(i, j)]));
            }
            out.push('\n');
        }
        out
    }
}

/// Scales every column to unit maximum absolute value; all-zero columns are
/// left untouched.
pub fn normalize_columns(m: &mut DMatrix<f64>) {
    for mut col in m.column_iter_mut() {
        let max = col.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if max > 0.0 {
            col /= max;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnchorDistance {
    /// Shortest-path length on the graph.
    Geodesic,
    /// Raw metric distance in the ambient space.
    Metric,
}

/// Column `j` holds the distance from every node to anchor `j`.
pub fn anchor_distance_descriptors(
    x: &EmbeddingSet,
    g: &LatentGraph,
    anchors: &[usize],
    mode: AnchorDistance,
) -> Result<DescriptorSet> {
    if anchors.is_empty() {
        return Err(Error::InvalidInput("anchor descriptors need at least one anchor".into()));
    }
    if x.n() != g.n() {
        return Err(Error::shape("anchor descriptors", g.n(), x.n()));
    }
    if let Some(&a) = anchors.iter().find(|&&a| a >= x.n()) {
        return Err(Error::InvalidInput(format!("anchor {a} out of range (n={})", x.n())));
    }
    let mut values = match mode {
        AnchorDistance::Geodesic => geodesic_distances(g, anchors)?.transpose(),
        AnchorDistance::Metric => {
            let pts = PreparedPoints::new(x, g.config().metric)?;
            let cols: Vec<Vec<f64>> = anchors
                .par_iter()
                .map(|&a| (0..x.n()).map(|i| pts.dist(i, a)).collect())
                .collect();
            DMatrix::from_fn(x.n(), anchors.len(), |i, j| cols[j][i])
        }
    };
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("anchor unreachable from some node".into()));
    }
    normalize_columns(&mut values);
    let kind = match mode {
        AnchorDistance::Geodesic => DescriptorKind::AnchorGeodesic,
        AnchorDistance::Metric => DescriptorKind::AnchorMetric,
    };
    Ok(DescriptorSet {
        values,
        kind,
        meta: DescriptorMeta::Anchors(anchors.to_vec()),
    })
}

/// One 0/1 column per class of the shared `classes` ordering.
pub fn label_indicator_descriptors(labels: &LabelAssignment, classes: &[String]) -> Result<DescriptorSet> {
    if classes.is_empty() {
        return Err(Error::InvalidInput("empty class list".into()));
    }
    let idx = labels.class_indices(classes)?;
    let mut values = DMatrix::zeros(labels.len(), classes.len());
    for (i, &c) in idx.iter().enumerate() {
        values[(i, c)] = 1.0;
    }
    Ok(DescriptorSet {
        values,
        kind: DescriptorKind::LabelIndicator,
        meta: DescriptorMeta::Classes(classes.to_vec()),
    })
}

/// Unnormalized `sum_i exp(-lambda_i t) phi_i(x)^2`, one column per time.
pub fn heat_kernel_values(b: &SpectralBasis, times: &[f64]) -> DMatrix<f64> {
    let phi = b.eigenvectors();
    let lam = b.eigenvalues();
    DMatrix::from_fn(b.n(), times.len(), |x, c| {
        lam.iter()
            .enumerate()
            .map(|(i, l)| (-l * times[c]).exp() * phi[(x, i)] * phi[(x, i)])
            .sum()
    })
}

pub fn heat_kernel_signature(b: &SpectralBasis, times: &[f64]) -> Result<DescriptorSet> {
    if times.is_empty() {
        return Err(Error::InvalidInput("no diffusion times".into()));
    }
    if let Some(t) = times.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
        return Err(Error::InvalidInput(format!("diffusion times must be positive, got {t}")));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidInput("diffusion times must be ascending".into()));
    }
    let mut values = heat_kernel_values(b, times);
    normalize_columns(&mut values);
    Ok(DescriptorSet {
        values,
        kind: DescriptorKind::Hks,
        meta: DescriptorMeta::Times(times.to_vec()),
    })
}

fn first_positive(lam: &[f64]) -> Option<f64> {
    lam.iter().copied().find(|&l| l > WKS_EIGEN_FLOOR)
}

fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// 16 times log-spaced in `[4 ln 10 / lambda_max, 4 ln 10 / lambda_2]`.
pub fn default_hks_times(b: &SpectralBasis) -> Result<Vec<f64>> {
    let lam = b.eigenvalues();
    let l2 = first_positive(lam)
        .ok_or_else(|| Error::InvalidInput("basis has no positive eigenvalue".into()))?;
    let lmax = lam[lam.len() - 1];
    let c = 4.0 * std::f64::consts::LN_10;
    Ok(log_spaced(c / lmax, c / l2, 16))
}

/// 16 energies spanning `[log lambda_2, log lambda_max]` and the variance
/// `7 * spacing`.
pub fn default_wks_energies(b: &SpectralBasis) -> Result<(Vec<f64>, f64)> {
    let lam = b.eigenvalues();
    let l2 = first_positive(lam)
        .ok_or_else(|| Error::InvalidInput("basis has no positive eigenvalue".into()))?;
    let (lo, hi) = (l2.ln(), lam[lam.len() - 1].ln());
    let count = 16;
    let step = (hi - lo) / (count - 1) as f64;
    let energies = (0..count).map(|i| lo + step * i as f64).collect();
    let variance = if step > 0.0 { 7.0 * step } else { 1.0 };
    Ok((energies, variance))
}

pub fn wave_kernel_signature(b: &SpectralBasis, energies: &[f64], variance: f64) -> Result<DescriptorSet> {
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(Error::InvalidInput(format!("variance must be positive, got {variance}")));
    }
    if energies.is_empty() {
        return Err(Error::InvalidInput("no energies".into()));
    }
    let lam = b.eigenvalues();
    let kept: Vec<usize> = (0..lam.len()).filter(|&i| lam[i] > WKS_EIGEN_FLOOR).collect();
    if kept.is_empty() {
        return Err(Error::InvalidInput("every eigenvalue is below the WKS floor".into()));
    }
    let phi = b.eigenvectors();
    let mut values = DMatrix::zeros(b.n(), energies.len());
    for (c, &e) in energies.iter().enumerate() {
        let filt: Vec<f64> = kept
            .iter()
            .map(|&i| (-(e - lam[i].ln()).powi(2) / (2.0 * variance)).exp())
            .collect();
        let norm: f64 = filt.iter().sum();
        if !(norm > 0.0) {
            continue;
        }
        for x in 0..b.n() {
            let s: f64 = kept
                .iter()
                .zip(&filt)
                .map(|(&i, f)| f * phi[(x, i)] * phi[(x, i)])
                .sum();
            values[(x, c)] = s / norm;
        }
    }
    normalize_columns(&mut values);
    Ok(DescriptorSet {
        values,
        kind: DescriptorKind::Wks,
        meta: DescriptorMeta::Energies {
            energies: energies.to_vec(),
            variance,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::latgraph::{build_knn_graph, normalized_laplacian, GraphConfig, Metric};
    use crate::spectral::eigenbasis;
    use nalgebra::SymmetricEigen;
    use rand::{Rng, SeedableRng};

    fn cloud(n: usize, seed: u64) -> EmbeddingSet {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        EmbeddingSet::from_matrix(DMatrix::from_fn(n, 3, |_, _| rng.random::<f64>())).unwrap()
    }

    fn setup(n: usize, k: usize, seed: u64) -> (EmbeddingSet, LatentGraph, SpectralBasis) {
        let x = cloud(n, seed);
        let g = build_knn_graph(&x, &GraphConfig::new(k, Metric::Euclidean)).unwrap();
        let l = normalized_laplacian(&g).unwrap();
        let b = eigenbasis(&l, n, 1e-9).unwrap();
        (x, g, b)
    }

    /// All-pairs shortest paths by Floyd-Warshall on the edge lengths.
    fn floyd(g: &LatentGraph) -> DMatrix<f64> {
        let n = g.n();
        let mut d = DMatrix::from_element(n, n, f64::INFINITY);
        for i in 0..n {
            d[(i, i)] = 0.0;
            for (j, _, l) in g.neighbors(i) {
                d[(i, j)] = l;
            }
        }
        for m in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if d[(i, m)] + d[(m, j)] < d[(i, j)] {
                        d[(i, j)] = d[(i, m)] + d[(m, j)];
                    }
                }
            }
        }
        d
    }

    #[test]
    fn geodesic_columns_match_floyd() {
        let (x, g, _) = setup(6, 2, 4);
        let anchors = [1, 4];
        let desc = anchor_distance_descriptors(&x, &g, &anchors, AnchorDistance::Geodesic).unwrap();
        let fw = floyd(&g);
        for (j, &a) in anchors.iter().enumerate() {
            assert_eq!(desc.values[(a, j)], 0.0);
            let max = (0..6).map(|i| fw[(i, a)]).fold(0.0, f64::max);
            for i in 0..6 {
                assert!((desc.values[(i, j)] - fw[(i, a)] / max).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn metric_columns_are_ambient_distances() {
        let (x, g, _) = setup(10, 3, 5);
        let desc = anchor_distance_descriptors(&x, &g, &[7], AnchorDistance::Metric).unwrap();
        let raw: Vec<f64> = (0..10).map(|i| Metric::Euclidean.distance(&x.row(i), &x.row(7))).collect();
        let max = raw.iter().copied().fold(0.0, f64::max);
        for (i, r) in raw.iter().enumerate() {
            assert!((desc.values[(i, 0)] - r / max).abs() < 1e-12);
        }
        assert!(anchor_distance_descriptors(&x, &g, &[], AnchorDistance::Metric).is_err());
    }

    #[test]
    fn label_indicators() {
        let labels = LabelAssignment::new(["b", "a", "b", "c", "a", "b"].iter().map(|s| s.to_string()).collect());
        let d = label_indicator_descriptors(&labels, labels.classes()).unwrap();
        for i in 0..6 {
            assert_eq!(d.values.row(i).sum(), 1.0);
        }
        let sums: Vec<f64> = (0..3).map(|c| d.values.column(c).sum()).collect();
        assert_eq!(sums, vec![2.0, 3.0, 1.0]);
        let other = vec!["a".to_string(), "b".to_string()];
        assert!(label_indicator_descriptors(&labels, &other).is_err());
    }

    #[test]
    fn hks_full_basis_at_zero_time_is_one() {
        let (_, _, b) = setup(12, 3, 6);
        let h = heat_kernel_values(&b, &[0.0]);
        assert!(h.iter().all(|v| (v - 1.0).abs() < 1e-10));
        assert!(heat_kernel_signature(&b, &[0.0]).is_err());
        assert!(heat_kernel_signature(&b, &[2.0, 1.0]).is_err());
    }

    #[test]
    fn hks_matches_dense_expm() {
        let (x, g, b) = setup(12, 3, 7);
        let l = normalized_laplacian(&g).unwrap().to_dense();
        let eig = SymmetricEigen::new(l);
        for t in [0.3, 2.0] {
            let expm = &eig.eigenvectors
                * DMatrix::from_diagonal(&eig.eigenvalues.map(|v| (-v * t).exp()))
                * eig.eigenvectors.transpose();
            let h = heat_kernel_values(&b, &[t]);
            for i in 0..x.n() {
                assert!((h[(i, 0)] - expm[(i, i)]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn wks_matches_direct_sum() {
        let (_, _, b) = setup(10, 3, 8);
        let (energies, var) = default_wks_energies(&b).unwrap();
        let w = wave_kernel_signature(&b, &energies, var).unwrap();
        assert!(w.values.iter().all(|v| *v >= 0.0));
        let lam = b.eigenvalues();
        let phi = b.eigenvectors();
        let mut direct = DMatrix::zeros(10, energies.len());
        for (c, e) in energies.iter().enumerate() {
            let mut norm = 0.0;
            for i in 0..lam.len() {
                if lam[i] > 1e-12 {
                    let f = (-(e - lam[i].ln()).powi(2) / (2.0 * var)).exp();
                    norm += f;
                    for x in 0..10 {
                        direct[(x, c)] += f * phi[(x, i)].powi(2);
                    }
                }
            }
            for x in 0..10 {
                direct[(x, c)] /= norm;
            }
        }
        normalize_columns(&mut direct);
        assert!((direct - &w.values).norm() < 1e-12);
        assert!(wave_kernel_signature(&b, &energies, 0.0).is_err());
    }

    #[test]
    fn default_schedules() {
        let (_, _, b) = setup(15, 3, 9);
        let t = default_hks_times(&b).unwrap();
        assert_eq!(t.len(), 16);
        let c = 4.0 * std::f64::consts::LN_10;
        assert!((t[0] - c / b.eigenvalues()[14]).abs() < 1e-12);
        assert!((t[15] - c / b.eigenvalues()[1]).abs() < 1e-9);
        let (e, v) = default_wks_energies(&b).unwrap();
        assert!((e[0] - b.eigenvalues()[1].ln()).abs() < 1e-12);
        assert!((v - 7.0 * (e[1] - e[0])).abs() < 1e-12);
    }
}
