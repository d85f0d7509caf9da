#![allow(dead_code)]

use latent_fmaps::descriptors::{DescriptorKind, DescriptorMeta, DescriptorSet};
use latent_fmaps::latgraph::LatentGraph;
use latent_fmaps::spectral::SpectralBasis;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
}

/// `n x k` matrix with orthonormal columns.
pub fn orthonormal_columns(rng: &mut ChaCha8Rng, n: usize, k: usize) -> DMatrix<f64> {
    let q = gaussian_matrix(rng, n, k).qr().q();
    q.columns(0, k).into_owned()
}

/// Orthonormal basis with ascending eigenvalues in [0, 2] and zero
/// residuals; not tied to any graph.
pub fn random_basis(rng: &mut ChaCha8Rng, n: usize, k: usize) -> SpectralBasis {
    let mut evals: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..2.0)).collect();
    evals.sort_by(f64::total_cmp);
    SpectralBasis::new(evals, orthonormal_columns(rng, n, k), vec![0.0; k]).unwrap()
}

pub fn random_descriptors(rng: &mut ChaCha8Rng, n: usize, count: usize) -> DescriptorSet {
    DescriptorSet {
        values: DMatrix::from_fn(n, count, |_, _| rng.random_range(0.0..1.0)),
        kind: DescriptorKind::Hks,
        meta: DescriptorMeta::Times(vec![]),
    }
}

/// Dense `I - D^-1/2 W D^-1/2`, rebuilt from the weight matrix.
pub fn dense_laplacian(g: &LatentGraph) -> DMatrix<f64> {
    let w = g.dense_weights();
    let n = w.nrows();
    let d: Vec<f64> = (0..n).map(|i| w.row(i).sum()).collect();
    DMatrix::from_fn(n, n, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        delta - w[(i, j)] / (d[i] * d[j]).sqrt()
    })
}

/// The map objective written as one stacked least-squares system
/// `||M vec(C) - r||^2` over the column-major `vec(C)`.
pub struct StackedSystem {
    pub m: DMatrix<f64>,
    pub r: DVector<f64>,
    pub k_x: usize,
    pub k_y: usize,
}

fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    DMatrix::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

impl StackedSystem {
    pub fn new(
        bx: &SpectralBasis,
        by: &SpectralBasis,
        fx: &DescriptorSet,
        fy: &DescriptorSet,
        alpha: f64,
        beta: f64,
    ) -> Self {
        let (px, py) = (bx.eigenvectors(), by.eigenvectors());
        let (kx, ky) = (px.ncols(), py.ncols());
        let a = px.transpose() * &fx.values;
        let b = py.transpose() * &fy.values;
        let iy = DMatrix::<f64>::identity(ky, ky);
        let ix = DMatrix::<f64>::identity(kx, kx);
        let mut blocks: Vec<DMatrix<f64>> = vec![kron(&a.transpose(), &iy)];
        let mut rhs: Vec<f64> = b.iter().copied().collect();
        let mut lap = DMatrix::zeros(kx * ky, kx * ky);
        for j in 0..kx {
            for i in 0..ky {
                lap[(i + j * ky, i + j * ky)] = alpha.sqrt() * (by.eigenvalues()[i] - bx.eigenvalues()[j]);
            }
        }
        blocks.push(lap);
        rhs.extend(std::iter::repeat_n(0.0, kx * ky));
        for f in 0..fx.values.ncols() {
            let sx = px.transpose() * DMatrix::from_diagonal(&fx.values.column(f).into_owned()) * px;
            let sy = py.transpose() * DMatrix::from_diagonal(&fy.values.column(f).into_owned()) * py;
            blocks.push((kron(&ix, &sy) - kron(&sx.transpose(), &iy)) * beta.sqrt());
            rhs.extend(std::iter::repeat_n(0.0, kx * ky));
        }
        let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
        let mut m = DMatrix::zeros(rows, kx * ky);
        let mut at = 0;
        for blk in &blocks {
            m.view_mut((at, 0), blk.shape()).copy_from(blk);
            at += blk.nrows();
        }
        Self {
            m,
            r: DVector::from_vec(rhs),
            k_x: kx,
            k_y: ky,
        }
    }

    pub fn objective(&self, c: &DMatrix<f64>) -> f64 {
        let v = DVector::from_column_slice(c.as_slice());
        (&self.m * v - &self.r).norm_squared()
    }

    /// Minimum-norm least-squares optimum.
    pub fn optimum(&self) -> DMatrix<f64> {
        let svd = self.m.clone().svd(true, true);
        let v = svd.solve(&self.r, 1e-12 * svd.singular_values.max()).unwrap();
        DMatrix::from_column_slice(self.k_y, self.k_x, v.as_slice())
    }
}

/// Fraction of positions where two assignments agree.
pub fn agreement(a: &[usize], b: &[usize]) -> f64 {
    a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / a.len() as f64
}

/// Average ranks (1-based), ties sharing the mean rank.
pub fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &p in &idx[i..=j] {
            r[p] = avg;
        }
        i = j + 1;
    }
    r
}

pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}
