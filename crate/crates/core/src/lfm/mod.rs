//! Latent functional maps: the regularized least-squares estimate, maps
//! induced by pointwise correspondences, and spectral upsampling
//! refinement.

mod solve;
mod zoomout;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::SpectralBasis;
use crate::transfer::Correspondence;

pub use solve::{objective, objective_gradient, solve_lfm, FitProblem, Objective, SolveMethod, SolveReport};
pub use zoomout::{zoomout_refine, ZoomOutConfig, ZoomOutTrace};
pub(crate) use zoomout::pointwise_assignment;

/// Weights and stopping rule of the functional map objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Laplacian commutativity weight.
    pub alpha: f64,
    /// Descriptor operator commutativity weight.
    pub beta: f64,
    pub max_iter: usize,
    /// Relative residual target for the iterative path.
    pub tol: f64,
    /// Problems with at most this many unknowns are solved directly.
    #[serde(default = "default_dense_threshold")]
    pub dense_threshold: usize,
}

fn default_dense_threshold() -> usize {
    4096
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            alpha: 1e-3,
            beta: 1.0,
            max_iter: 5000,
            tol: 1e-10,
            dense_threshold: default_dense_threshold(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.beta >= 0.0 && self.alpha.is_finite() && self.beta.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "alpha and beta must be finite and >= 0, got {} and {}",
                self.alpha, self.beta
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be positive".into()));
        }
        Ok(())
    }
}

/// How a map came to be.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Provenance {
    Solved {
        alpha: f64,
        beta: f64,
        descriptors: Vec<String>,
        rank_deficient: bool,
        objective: Objective,
    },
    FromPointwise,
    Refined {
        seed_size: (usize, usize),
        steps: usize,
        step_size: usize,
    },
}

/// A `k_Y x k_X` matrix taking spectral coefficients on X to coefficients
/// on Y.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalMap {
    c: DMatrix<f64>,
    provenance: Provenance,
}

impl FunctionalMap {
    pub fn new(c: DMatrix<f64>, provenance: Provenance) -> Result<Self> {
        if c.nrows() == 0 || c.ncols() == 0 {
            return Err(Error::InvalidInput("functional map must be non-empty".into()));
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("functional map has non-finite entries".into()));
        }
        Ok(Self { c, provenance })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Source basis size `k_X`.
    pub fn k_x(&self) -> usize {
        self.c.ncols()
    }

    /// Target basis size `k_Y`.
    pub fn k_y(&self) -> usize {
        self.c.nrows()
    }

    /// Top-left `k_y x k_x` block.
    pub fn truncated(&self, k_y: usize, k_x: usize) -> Result<Self> {
        if k_y == 0 || k_x == 0 || k_y > self.k_y() || k_x > self.k_x() {
            return Err(Error::shape(
                "map truncation",
                format!("at most {}x{}", self.k_y(), self.k_x()),
                format!("{k_y}x{k_x}"),
            ));
        }
        Self::new(self.c.view((0, 0), (k_y, k_x)).into_owned(), self.provenance.clone())
    }
}

/// The map `Phi_Y^T P Phi_X` induced by a total pointwise correspondence
/// X -> Y. Orthonormal columns make `Phi_Y^T` the pseudo-inverse.
pub fn from_pointwise(bx: &SpectralBasis, by: &SpectralBasis, corr: &Correspondence) -> Result<FunctionalMap> {
    let assignment = corr.assignment();
    if assignment.len() != bx.n() {
        return Err(Error::InvalidInput(format!(
            "partial correspondence: {} of {} source nodes assigned",
            assignment.len(),
            bx.n()
        )));
    }
    if let Some(&t) = assignment.iter().find(|&&t| t >= by.n()) {
        return Err(Error::InvalidInput(format!("target {t} out of range (n={})", by.n())));
    }
    let phi_y = by.eigenvectors();
    let pulled = DMatrix::from_fn(assignment.len(), by.k(), |x, c| phi_y[(assignment[x], c)]);
    FunctionalMap::new(pulled.tr_mul(bx.eigenvectors()), Provenance::FromPointwise)
}
