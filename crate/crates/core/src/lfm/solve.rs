//! The convex quadratic functional map objective
//!
//! `||C A - B||^2 + alpha ||Lam_Y C - C Lam_X||^2 + beta sum_f ||S^Y_f C - C S^X_f||^2`
//!
//! with `A = Phi_X^T F_X`, `B = Phi_Y^T F_Y` and descriptor operators
//! `S_f = Phi^T diag(f) Phi`. Every term is linear in `C`, so the minimizer
//! solves the normal equations `H(C) = B A^T` with
//!
//! `H(C) = C A A^T + alpha G o C + beta sum_f (S^Y_f^2 C - 2 S^Y_f C S^X_f + C S^X_f^2)`
//!
//! where `G_ij = (lam^Y_i - lam^X_j)^2`.

use nalgebra::{DMatrix, SVD};
use serde::{Deserialize, Serialize};

use super::{FunctionalMap, Provenance, SolverConfig};
use crate::descriptors::DescriptorSet;
use crate::error::{Error, Result};
use crate::spectral::SpectralBasis;

/// Term-wise objective values. `laplacian` and `descriptor` are the
/// unweighted regularizers; `total` applies alpha and beta.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub fit: f64,
    pub laplacian: f64,
    pub descriptor: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    /// Minimum-norm least squares (both regularizers off).
    PseudoInverse,
    Dense,
    ConjugateGradient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub method: SolveMethod,
    pub iterations: usize,
    /// Objective after each iteration, starting from `C = 0`.
    pub objective_history: Vec<f64>,
    pub gradient_norm: f64,
    pub rank_deficient: bool,
    pub objective: Objective,
}

/// Precomputed spectral quantities of one objective instance.
#[derive(Debug, Clone)]
pub struct FitProblem {
    a_hat: DMatrix<f64>,
    b_hat: DMatrix<f64>,
    gap_sq: DMatrix<f64>,
    sx: Vec<DMatrix<f64>>,
    sy: Vec<DMatrix<f64>>,
    sx2: DMatrix<f64>,
    sy2: DMatrix<f64>,
    alpha: f64,
    beta: f64,
}

/// `Phi^T diag(f) Phi`.
fn descriptor_operator(phi: &DMatrix<f64>, f: &[f64]) -> DMatrix<f64> {
    let mut scaled = phi.clone();
    for (mut row, &w) in scaled.row_iter_mut().zip(f) {
        row *= w;
    }
    phi.tr_mul(&scaled)
}

impl FitProblem {
    pub fn new(
        bx: &SpectralBasis,
        by: &SpectralBasis,
        fx: &DescriptorSet,
        fy: &DescriptorSet,
        alpha: f64,
        beta: f64,
    ) -> Result<Self> {
        if fx.count() != fy.count() {
            return Err(Error::shape("descriptor pairing", fx.count(), fy.count()));
        }
        if fx.n() != bx.n() {
            return Err(Error::shape("source descriptors", bx.n(), fx.n()));
        }
        if fy.n() != by.n() {
            return Err(Error::shape("target descriptors", by.n(), fy.n()));
        }
        let a_hat = bx.project(&fx.values)?;
        let b_hat = by.project(&fy.values)?;
        let (lx, ly) = (bx.eigenvalues(), by.eigenvalues());
        let gap_sq = DMatrix::from_fn(by.k(), bx.k(), |i, j| (ly[i] - lx[j]).powi(2));
        let (mut sx, mut sy) = (Vec::new(), Vec::new());
        let mut sx2 = DMatrix::zeros(bx.k(), bx.k());
        let mut sy2 = DMatrix::zeros(by.k(), by.k());
        if beta > 0.0 {
            for f in 0..fx.count() {
                let col_x: Vec<f64> = fx.values.column(f).iter().copied().collect();
                let col_y: Vec<f64> = fy.values.column(f).iter().copied().collect();
                let s_x = descriptor_operator(bx.eigenvectors(), &col_x);
                let s_y = descriptor_operator(by.eigenvectors(), &col_y);
                sx2 += &s_x * &s_x;
                sy2 += &s_y * &s_y;
                sx.push(s_x);
                sy.push(s_y);
            }
        }
        Ok(Self {
            a_hat,
            b_hat,
            gap_sq,
            sx,
            sy,
            sx2,
            sy2,
            alpha,
            beta,
        })
    }

    pub fn k_x(&self) -> usize {
        self.a_hat.nrows()
    }

    pub fn k_y(&self) -> usize {
        self.b_hat.nrows()
    }

    /// Source descriptor coefficients `Phi_X^T F_X`.
    pub fn source_coefficients(&self) -> &DMatrix<f64> {
        &self.a_hat
    }

    /// Target descriptor coefficients `Phi_Y^T F_Y`.
    pub fn target_coefficients(&self) -> &DMatrix<f64> {
        &self.b_hat
    }

    /// Descriptor operators `(S^X_f, S^Y_f)`; empty when beta is zero.
    pub fn operators(&self) -> (&[DMatrix<f64>], &[DMatrix<f64>]) {
        (&self.sx, &self.sy)
    }

    pub fn eigen_gaps_sq(&self) -> &DMatrix<f64> {
        &self.gap_sq
    }

    fn check(&self, c: &DMatrix<f64>) -> Result<()> {
        if c.shape() != (self.k_y(), self.k_x()) {
            return Err(Error::shape(
                "functional map",
                format!("{}x{}", self.k_y(), self.k_x()),
                format!("{}x{}", c.nrows(), c.ncols()),
            ));
        }
        Ok(())
    }

    fn rhs(&self) -> DMatrix<f64> {
        &self.b_hat * self.a_hat.transpose()
    }

    /// The normal-equation operator `H(C)`.
    fn apply(&self, c: &DMatrix<f64>, aat: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = c * aat;
        if self.alpha > 0.0 {
            out += self.gap_sq.component_mul(c) * self.alpha;
        }
        if self.beta > 0.0 {
            let mut comm = &self.sy2 * c + c * &self.sx2;
            for (s_x, s_y) in self.sx.iter().zip(&self.sy) {
                comm -= (s_y * c * s_x) * 2.0;
            }
            out += comm * self.beta;
        }
        out
    }

    /// Diagonal of `H` in column-major vectorized order.
    fn diagonal(&self, aat: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(self.k_y(), self.k_x(), |i, j| {
            let mut d = aat[(j, j)] + self.alpha * self.gap_sq[(i, j)];
            if self.beta > 0.0 {
                let mut s = self.sy2[(i, i)] + self.sx2[(j, j)];
                for (s_x, s_y) in self.sx.iter().zip(&self.sy) {
                    s -= 2.0 * s_y[(i, i)] * s_x[(j, j)];
                }
                d += self.beta * s;
            }
            d
        })
    }

    /// `H` assembled from Kronecker products; column-major vectorization,
    /// so `vec(P C Q) = (Q^T kron P) vec(C)`.
    fn dense_operator(&self, aat: &DMatrix<f64>) -> DMatrix<f64> {
        let (ky, kx) = (self.k_y(), self.k_x());
        let iy = DMatrix::<f64>::identity(ky, ky);
        let ix = DMatrix::<f64>::identity(kx, kx);
        let mut h = aat.transpose().kronecker(&iy);
        if self.alpha > 0.0 {
            for j in 0..kx {
                for i in 0..ky {
                    let p = j * ky + i;
                    h[(p, p)] += self.alpha * self.gap_sq[(i, j)];
                }
            }
        }
        if self.beta > 0.0 {
            h += ix.kronecker(&self.sy2) * self.beta;
            h += self.sx2.transpose().kronecker(&iy) * self.beta;
            for (s_x, s_y) in self.sx.iter().zip(&self.sy) {
                h -= s_x.transpose().kronecker(s_y) * (2.0 * self.beta);
            }
        }
        h
    }
}

/// Term-wise value of the objective at `c`.
pub fn objective(p: &FitProblem, c: &DMatrix<f64>) -> Result<Objective> {
    p.check(c)?;
    let fit = (c * &p.a_hat - &p.b_hat).norm_squared();
    let laplacian = p.gap_sq.component_mul(&c.component_mul(c)).sum();
    let descriptor = p
        .sx
        .iter()
        .zip(&p.sy)
        .map(|(s_x, s_y)| (s_y * c - c * s_x).norm_squared())
        .sum();
    Ok(Objective {
        fit,
        laplacian,
        descriptor,
        total: fit + p.alpha * laplacian + p.beta * descriptor,
    })
}

/// Analytic gradient `2 (H(C) - B A^T)`.
pub fn objective_gradient(p: &FitProblem, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    p.check(c)?;
    let aat = &p.a_hat * p.a_hat.transpose();
    Ok((p.apply(c, &aat) - p.rhs()) * 2.0)
}

/// Minimizes the functional map objective between two bases given paired
/// descriptors.
pub fn solve_lfm(
    bx: &SpectralBasis,
    by: &SpectralBasis,
    fx: &DescriptorSet,
    fy: &DescriptorSet,
    cfg: &SolverConfig,
) -> Result<(FunctionalMap, SolveReport)> {
    cfg.validate()?;
    let p = FitProblem::new(bx, by, fx, fy, cfg.alpha, cfg.beta)?;
    let report = if cfg.alpha == 0.0 && cfg.beta == 0.0 {
        solve_pinv(&p)?
    } else if p.k_x() * p.k_y() <= cfg.dense_threshold {
        solve_dense(&p)?
    } else {
        solve_cg(&p, cfg)?
    };
    let (c, report) = report;
    let mut descriptors = vec![fx.kind.to_string()];
    if fy.kind != fx.kind {
        descriptors.push(fy.kind.to_string());
    }
    let map = FunctionalMap::new(
        c,
        Provenance::Solved {
            alpha: cfg.alpha,
            beta: cfg.beta,
            descriptors,
            rank_deficient: report.rank_deficient,
            objective: report.objective,
        },
    )?;
    Ok((map, report))
}

fn finish(p: &FitProblem, c: DMatrix<f64>, method: SolveMethod, iterations: usize, mut history: Vec<f64>, rank_deficient: bool) -> Result<(DMatrix<f64>, SolveReport)> {
    let obj = objective(p, &c)?;
    if history.last() != Some(&obj.total) {
        history.push(obj.total);
    }
    let gradient_norm = objective_gradient(p, &c)?.norm();
    Ok((
        c,
        SolveReport {
            method,
            iterations,
            objective_history: history,
            gradient_norm,
            rank_deficient,
            objective: obj,
        },
    ))
}

fn solve_pinv(p: &FitProblem) -> Result<(DMatrix<f64>, SolveReport)> {
    let start = objective(p, &DMatrix::zeros(p.k_y(), p.k_x()))?.total;
    let at = p.a_hat.transpose();
    let svd = SVD::new(at.clone(), true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let eps = smax * f64::EPSILON * (at.nrows().max(at.ncols()) as f64);
    let rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
    let pinv = svd
        .pseudo_inverse(eps)
        .map_err(|e| Error::Degenerate(format!("pseudo-inverse failed: {e}")))?;
    // C A = B  <=>  A^T C^T = B^T
    let c = (pinv * p.b_hat.transpose()).transpose();
    let deficient = rank < p.k_x();
    if deficient {
        log::warn!("descriptor coefficients have rank {rank} < {}: minimum-norm map returned", p.k_x());
    }
    finish(p, c, SolveMethod::PseudoInverse, 1, vec![start], deficient)
}

fn solve_dense(p: &FitProblem) -> Result<(DMatrix<f64>, SolveReport)> {
    let (ky, kx) = (p.k_y(), p.k_x());
    let start = objective(p, &DMatrix::zeros(ky, kx))?.total;
    let aat = &p.a_hat * p.a_hat.transpose();
    let h = p.dense_operator(&aat);
    let rhs = p.rhs();
    let b = nalgebra::DVector::from_column_slice(rhs.as_slice());
    let (x, deficient) = match h.clone().cholesky() {
        Some(ch) => (ch.solve(&b), false),
        None => {
            let svd = SVD::new(h, true, true);
            let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
            let eps = smax * 1e-12;
            let x = svd
                .solve(&b, eps)
                .map_err(|e| Error::Degenerate(format!("normal equations: {e}")))?;
            (x, true)
        }
    };
    let c = DMatrix::from_column_slice(ky, kx, x.as_slice());
    finish(p, c, SolveMethod::Dense, 1, vec![start], deficient)
}

/// Jacobi-preconditioned conjugate gradient on the normal equations.
fn solve_cg(p: &FitProblem, cfg: &SolverConfig) -> Result<(DMatrix<f64>, SolveReport)> {
    let (ky, kx) = (p.k_y(), p.k_x());
    let aat = &p.a_hat * p.a_hat.transpose();
    let rhs = p.rhs();
    let rhs_norm = rhs.norm();
    let diag = p.diagonal(&aat).map(|d| if d > 0.0 { 1.0 / d } else { 1.0 });

    let mut c = DMatrix::zeros(ky, kx);
    let mut history = vec![objective(p, &c)?.total];
    if rhs_norm == 0.0 {
        return finish(p, c, SolveMethod::ConjugateGradient, 0, history, false);
    }
    let mut r = rhs.clone();
    let mut z = r.component_mul(&diag);
    let mut dir = z.clone();
    let mut rz = r.dot(&z);
    for it in 1..=cfg.max_iter {
        let hd = p.apply(&dir, &aat);
        let curv = dir.dot(&hd);
        if !(curv > 0.0) {
            // flat direction: the remaining residual is in the null space
            return finish(p, c, SolveMethod::ConjugateGradient, it, history, true);
        }
        let step = rz / curv;
        c += &dir * step;
        r -= &hd * step;
        history.push(objective(p, &c)?.total);
        if r.norm() <= cfg.tol * rhs_norm {
            return finish(p, c, SolveMethod::ConjugateGradient, it, history, false);
        }
        z = r.component_mul(&diag);
        let rz_next = r.dot(&z);
        dir = &z + &dir * (rz_next / rz);
        rz = rz_next;
    }
    Err(Error::SolverNoConvergence {
        iterations: cfg.max_iter,
        gradient_norm: 2.0 * r.norm(),
    })
}
