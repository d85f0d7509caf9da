//! The end-to-end recipe shared by the benchmark harness, the similarity
//! matrix and the command line: graph, basis, descriptors, map, refinement.

use serde::{Deserialize, Serialize};

use crate::descriptors::{
    anchor_distance_descriptors, default_hks_times, default_wks_energies, heat_kernel_signature,
    label_indicator_descriptors, wave_kernel_signature, AnchorDistance, DescriptorKind, DescriptorSet,
};
use crate::embedio::{shared_classes, AnchorSet, EmbeddingSet, LabelAssignment};
use crate::error::{Error, Result};
use crate::latgraph::{build_knn_graph, normalized_laplacian, GraphConfig, LatentGraph, Metric, WeightFn};
use crate::lfm::{solve_lfm, zoomout_refine, FunctionalMap, SolveReport, SolverConfig, ZoomOutConfig, ZoomOutTrace};
use crate::spectral::{eigenbasis, SpectralBasis, DEFAULT_TOL};
use crate::transfer::{extract_pointwise, Correspondence, TransformKind};

/// Every knob of one pipeline run. Serialized verbatim next to each
/// artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Neighbors per node; `None` applies the size-dependent default.
    pub k_neighbors: Option<usize>,
    pub metric: Metric,
    pub weight: WeightFn,
    /// Eigenvectors used to solve for the seed map.
    pub n_eigen: usize,
    pub eigen_tol: f64,
    pub solver: SolverConfig,
    pub descriptor: DescriptorKind,
    pub zoomout: Option<ZoomOutConfig>,
    pub fit: TransformKind,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            k_neighbors: None,
            metric: Metric::Angular,
            weight: WeightFn::Gaussian { sigma: None },
            n_eigen: 50,
            eigen_tol: DEFAULT_TOL,
            solver: SolverConfig::default(),
            descriptor: DescriptorKind::AnchorGeodesic,
            zoomout: Some(ZoomOutConfig::default()),
            fit: TransformKind::Orthogonal,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    /// The laptop-scale recipe of the noise benchmark: 50 neighbors, a
    /// 30-eigenvector seed map refined up to 60.
    pub fn benchmark() -> Self {
        Self {
            k_neighbors: Some(50),
            n_eigen: 30,
            zoomout: Some(ZoomOutConfig {
                step_size: 5,
                target_size: 60,
            }),
            ..Self::default()
        }
    }

    pub fn graph_config(&self, n: usize) -> GraphConfig {
        GraphConfig {
            k: self.k_neighbors.unwrap_or_else(|| crate::latgraph::default_k(n)),
            metric: self.metric,
            weight: self.weight,
        }
    }

    /// Eigenvectors needed per space: enough for the refined map.
    pub fn basis_size(&self, n: usize) -> usize {
        let target = self.zoomout.map_or(self.n_eigen, |z| z.target_size.max(self.n_eigen));
        target.min(n)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        self.graph_config(n).validate(n)?;
        self.solver.validate()?;
        if self.n_eigen == 0 || self.n_eigen > n {
            return Err(Error::InvalidConfig(format!("n_eigen must be in 1..={n}, got {}", self.n_eigen)));
        }
        if !(self.eigen_tol > 0.0) {
            return Err(Error::InvalidConfig("eigen_tol must be positive".into()));
        }
        if let Some(z) = self.zoomout {
            z.steps(self.n_eigen, self.basis_size(n))?;
        }
        Ok(())
    }
}

/// Graph and eigenbasis of one space.
#[derive(Debug, Clone)]
pub struct SpaceModel {
    pub graph: LatentGraph,
    pub basis: SpectralBasis,
}

impl SpaceModel {
    pub fn build(x: &EmbeddingSet, cfg: &PipelineConfig) -> Result<Self> {
        cfg.validate(x.n())?;
        let graph = build_knn_graph(x, &cfg.graph_config(x.n()))?;
        let lap = normalized_laplacian(&graph)?;
        let basis = eigenbasis(&lap, cfg.basis_size(x.n()), cfg.eigen_tol)?;
        Ok(Self { graph, basis })
    }
}

/// What a descriptor kind is allowed to see.
#[derive(Debug, Clone, Copy)]
pub enum Guidance<'a> {
    Anchors(&'a AnchorSet),
    Labels(&'a LabelAssignment, &'a LabelAssignment),
    None,
}

/// Aligned descriptor columns on both spaces. Intrinsic signatures use the
/// source basis to pick times or energies so both sides share them.
pub fn pair_descriptors(
    x: &EmbeddingSet,
    mx: &SpaceModel,
    y: &EmbeddingSet,
    my: &SpaceModel,
    kind: DescriptorKind,
    guidance: &Guidance<'_>,
) -> Result<(DescriptorSet, DescriptorSet)> {
    match kind {
        DescriptorKind::AnchorGeodesic | DescriptorKind::AnchorMetric => {
            let Guidance::Anchors(a) = guidance else {
                return Err(Error::InvalidConfig(format!("{kind} descriptors need anchors")));
            };
            let mode = if kind == DescriptorKind::AnchorGeodesic {
                AnchorDistance::Geodesic
            } else {
                AnchorDistance::Metric
            };
            Ok((
                anchor_distance_descriptors(x, &mx.graph, &a.sources(), mode)?,
                anchor_distance_descriptors(y, &my.graph, &a.targets(), mode)?,
            ))
        }
        DescriptorKind::LabelIndicator => {
            let Guidance::Labels(lx, ly) = guidance else {
                return Err(Error::InvalidConfig("label descriptors need labels on both spaces".into()));
            };
            let classes = shared_classes(lx, ly)?;
            Ok((
                label_indicator_descriptors(lx, &classes)?,
                label_indicator_descriptors(ly, &classes)?,
            ))
        }
        DescriptorKind::Hks => {
            let times = default_hks_times(&mx.basis)?;
            Ok((heat_kernel_signature(&mx.basis, &times)?, heat_kernel_signature(&my.basis, &times)?))
        }
        DescriptorKind::Wks => {
            let (energies, variance) = default_wks_energies(&mx.basis)?;
            Ok((
                wave_kernel_signature(&mx.basis, &energies, variance)?,
                wave_kernel_signature(&my.basis, &energies, variance)?,
            ))
        }
    }
}

#[derive(Debug, Clone)]
pub struct PairFit {
    /// The solved `n_eigen`-sized map.
    pub seed_map: FunctionalMap,
    pub report: SolveReport,
    /// The refined map, or the seed map when refinement is off.
    pub map: FunctionalMap,
    pub trace: Option<ZoomOutTrace>,
    /// Pointwise map X -> Y extracted from `map`.
    pub correspondence: Correspondence,
}

/// Solves on the leading `n_eigen` eigenvectors, refines, extracts.
pub fn fit_pair(
    mx: &SpaceModel,
    my: &SpaceModel,
    fx: &DescriptorSet,
    fy: &DescriptorSet,
    cfg: &PipelineConfig,
) -> Result<PairFit> {
    let k = cfg.n_eigen.min(mx.basis.k()).min(my.basis.k());
    let bx = mx.basis.truncated(k)?;
    let by = my.basis.truncated(k)?;
    let (seed_map, report) = solve_lfm(&bx, &by, fx, fy, &cfg.solver)?;
    let (map, trace) = match cfg.zoomout {
        Some(z) => {
            let available = mx.basis.k().min(my.basis.k());
            let steps = z.steps(k, available)?;
            let (m, t) = zoomout_refine(&seed_map, &mx.basis, &my.basis, steps, z.step_size)?;
            (m, Some(t))
        }
        None => (seed_map.clone(), None),
    };
    let correspondence = extract_pointwise(&map, &mx.basis.truncated(map.k_x())?, &my.basis.truncated(map.k_y())?)?;
    Ok(PairFit {
        seed_map,
        report,
        map,
        trace,
        correspondence,
    })
}
