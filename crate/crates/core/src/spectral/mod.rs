//! Truncated eigenbases of the normalized Laplacian and the spectral
//! coefficient transforms built on them.

mod lanczos;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::latgraph::NormalizedLaplacian;

/// Below this size the Laplacian is decomposed densely.
pub const DENSE_MAX_N: usize = 300;

/// Default residual tolerance for returned eigenpairs.
pub const DEFAULT_TOL: f64 = 1e-8;

/// Ascending eigenvalues, matching orthonormal eigenvectors and per-pair
/// residuals `||L phi - lambda phi||`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBasis {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
    residuals: Vec<f64>,
}

impl SpectralBasis {
    pub fn new(eigenvalues: Vec<f64>, eigenvectors: DMatrix<f64>, residuals: Vec<f64>) -> Result<Self> {
        let k = eigenvalues.len();
        if k == 0 || eigenvectors.ncols() != k || residuals.len() != k {
            return Err(Error::shape(
                "spectral basis",
                format!("{k} eigenvalues, vectors and residuals"),
                format!("{} vectors, {} residuals", eigenvectors.ncols(), residuals.len()),
            ));
        }
        if eigenvalues.iter().chain(&residuals).any(|v| !v.is_finite())
            || eigenvectors.iter().any(|v| !v.is_finite())
        {
            return Err(Error::InvalidInput("spectral basis has non-finite entries".into()));
        }
        if eigenvalues.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidInput("eigenvalues must be non-descending".into()));
        }
        let gram_err = (eigenvectors.transpose() * &eigenvectors - DMatrix::identity(k, k)).norm();
        if gram_err > 1e-8 {
            return Err(Error::InvalidInput(format!(
                "eigenvectors are not orthonormal (||V^T V - I|| = {gram_err:e})"
            )));
        }
        Ok(Self {
            eigenvalues,
            eigenvectors,
            residuals,
        })
    }

    pub fn n(&self) -> usize {
        self.eigenvectors.nrows()
    }

    pub fn k(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    /// The first `k` eigenpairs.
    pub fn truncated(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.k() {
            return Err(Error::shape("basis truncation", format!("1..={}", self.k()), k));
        }
        Ok(Self {
            eigenvalues: self.eigenvalues[..k].to_vec(),
            eigenvectors: self.eigenvectors.columns(0, k).into_owned(),
            residuals: self.residuals[..k].to_vec(),
        })
    }

    /// Spectral coefficients `Phi^T f` of one function per column of `f`.
    pub fn project(&self, f: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if f.nrows() != self.n() {
            return Err(Error::shape("project", format!("{} rows", self.n()), f.nrows()));
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("function values must be finite".into()));
        }
        Ok(self.eigenvectors.tr_mul(f))
    }

    /// Node values `Phi a` of coefficient columns `a`.
    pub fn reconstruct(&self, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if a.nrows() != self.k() {
            return Err(Error::shape("reconstruct", format!("{} rows", self.k()), a.nrows()));
        }
        Ok(&self.eigenvectors * a)
    }

    /// `max_i ||L phi_i - lambda_i phi_i||`.
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

/// Flips each column so that its largest-magnitude entry is positive; ties
/// go to the lowest row index.
pub fn canonicalize_signs(v: &mut DMatrix<f64>) {
    for mut col in v.column_iter_mut() {
        let mut best = 0;
        for (i, x) in col.iter().enumerate() {
            if x.abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
    }
}

fn residuals(l: &NormalizedLaplacian, values: &[f64], vectors: &DMatrix<f64>) -> Vec<f64> {
    let lv = l.apply_matrix(vectors);
    (0..values.len())
        .map(|c| (lv.column(c) - vectors.column(c) * values[c]).norm())
        .collect()
}

fn finish(l: &NormalizedLaplacian, mut values: Vec<f64>, mut vectors: DMatrix<f64>) -> Result<SpectralBasis> {
    for v in &mut values {
        // round-off below zero on the null space
        if *v < 0.0 && *v > -1e-12 {
            *v = 0.0;
        }
    }
    canonicalize_signs(&mut vectors);
    let res = residuals(l, &values, &vectors);
    SpectralBasis::new(values, vectors, res)
}

/// The `k_e` smallest eigenpairs of `L`.
///
/// Small operators are decomposed densely. Larger ones run Lanczos with full
/// reorthogonalization on `2I - L`, whose largest eigenpairs are the
/// smallest of `L`, within a budget of `50 * k_e` iterations.
pub fn eigenbasis(l: &NormalizedLaplacian, k_e: usize, tol: f64) -> Result<SpectralBasis> {
    let n = l.n();
    if k_e == 0 || k_e > n {
        return Err(Error::InvalidConfig(format!("eigenvector count must be in 1..={n}, got {k_e}")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidConfig(format!("tolerance must be positive, got {tol}")));
    }
    if n <= DENSE_MAX_N {
        return dense_eigenbasis(l, k_e, tol);
    }

    let apply = |x: &[f64], y: &mut [f64]| {
        l.apply(x, y);
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi = 2.0 * xi - *yi;
        }
    };
    let rayleigh = |vectors: &DMatrix<f64>| -> Vec<f64> {
        let lv = l.apply_matrix(vectors);
        (0..vectors.ncols())
            .map(|c| vectors.column(c).dot(&lv.column(c)))
            .collect()
    };
    let mut worst = f64::INFINITY;
    let outcome = lanczos::largest_eigenpairs(n, k_e, 50 * k_e, apply, |values, vectors| {
        if values.len() < k_e {
            return false;
        }
        let lam = rayleigh(vectors);
        let res = residuals(l, &lam, vectors);
        worst = res.iter().copied().fold(0.0, f64::max);
        log::debug!("lanczos check: {} ritz pairs, max residual {worst:e}", values.len());
        worst <= tol
    });
    match outcome {
        Ok(out) => {
            log::debug!("lanczos converged in {} iterations", out.iterations);
            let lam = rayleigh(&out.vectors);
            let mut order: Vec<usize> = (0..lam.len()).collect();
            order.sort_by(|&a, &b| lam[a].total_cmp(&lam[b]).then(a.cmp(&b)));
            let values = order.iter().map(|&i| lam[i]).collect();
            let vectors = DMatrix::from_fn(n, k_e, |r, c| out.vectors[(r, order[c])]);
            finish(l, values, vectors)
        }
        Err(out) => Err(Error::NoConvergence {
            iterations: out.iterations,
            residual: worst,
        }),
    }
}

fn dense_eigenbasis(l: &NormalizedLaplacian, k_e: usize, tol: f64) -> Result<SpectralBasis> {
    let eig = SymmetricEigen::new(l.to_dense());
    let mut order: Vec<usize> = (0..l.n()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let values: Vec<f64> = order[..k_e].iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(l.n(), k_e, |r, c| eig.eigenvectors[(r, order[c])]);
    let basis = finish(l, values, vectors)?;
    let worst = basis.max_residual();
    if worst > tol {
        return Err(Error::NoConvergence {
            iterations: 0,
            residual: worst,
        });
    }
    Ok(basis)
}
