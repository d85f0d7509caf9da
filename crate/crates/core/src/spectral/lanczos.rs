//! Lanczos iteration with full reorthogonalization for the largest
//! eigenpairs of a symmetric operator.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

const START_SEED: u64 = 0x1a9c_205e_ed00_0001;

pub(crate) struct LanczosOutput {
    /// Ritz values, descending.
    pub values: Vec<f64>,
    /// Matching Ritz vectors as columns.
    pub vectors: DMatrix<f64>,
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Classical Gram-Schmidt against every stored basis vector, done twice.
fn orthogonalize(w: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        let coeffs: Vec<f64> = basis.par_iter().map(|q| dot(q, w)).collect();
        for (q, c) in basis.iter().zip(coeffs) {
            for (wi, qi) in w.iter_mut().zip(q) {
                *wi -= c * qi;
            }
        }
    }
}

fn random_unit(n: usize, rng: &mut ChaCha8Rng, basis: &[Vec<f64>]) -> Option<Vec<f64>> {
    for _ in 0..8 {
        let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        orthogonalize(&mut v, basis);
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            return Some(v);
        }
    }
    None
}

/// Computes the `k` largest eigenpairs of the `n x n` symmetric operator
/// `apply`. `accept` receives candidate Ritz pairs and returns whether they
/// are good enough; it is consulted on a geometric schedule of Krylov sizes.
pub(crate) fn largest_eigenpairs<F, A>(
    n: usize,
    k: usize,
    max_iter: usize,
    apply: F,
    mut accept: A,
) -> Result<LanczosOutput, LanczosOutput>
where
    F: Fn(&[f64], &mut [f64]),
    A: FnMut(&[f64], &DMatrix<f64>) -> bool,
{
    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
    let limit = max_iter.min(n).max(k);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(limit);
    let mut alphas: Vec<f64> = Vec::with_capacity(limit);
    let mut betas: Vec<f64> = Vec::with_capacity(limit);

    let mut q = random_unit(n, &mut rng, &basis).expect("n >= 1");
    let mut w = vec![0.0; n];
    let mut next_check = (2 * k + 20).min(limit);
    let mut last: Option<LanczosOutput> = None;

    loop {
        apply(&q, &mut w);
        let alpha = dot(&q, &w);
        basis.push(q);
        alphas.push(alpha);
        orthogonalize(&mut w, &basis);
        let beta = dot(&w, &w).sqrt();
        let m = basis.len();

        if m >= next_check || m == limit {
            let out = ritz(&basis, &alphas, &betas, k, m);
            if accept(&out.values, &out.vectors) {
                return Ok(out);
            }
            if m == limit {
                return Err(out);
            }
            last = Some(out);
            next_check = ((m as f64 * 1.3) as usize).max(m + 10).min(limit);
        }

        // Invariant subspace found: restart from a fresh direction orthogonal
        // to everything seen so far, decoupling the tridiagonal matrix.
        if beta <= 1e-10 * alpha.abs().max(1.0) {
            match random_unit(n, &mut rng, &basis) {
                Some(v) => {
                    betas.push(0.0);
                    q = v;
                }
                None => {
                    let out = last.unwrap_or_else(|| ritz(&basis, &alphas, &betas, k, m));
                    return Err(out);
                }
            }
        } else {
            betas.push(beta);
            q = w.iter().map(|x| x / beta).collect();
        }
    }
}

fn ritz(basis: &[Vec<f64>], alphas: &[f64], betas: &[f64], k: usize, m: usize) -> LanczosOutput {
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alphas[i];
        if i + 1 < m {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let take = k.min(m);
    let values: Vec<f64> = order[..take].iter().map(|&i| eig.eigenvalues[i]).collect();
    let n = basis[0].len();
    let coeffs: Vec<DVector<f64>> = order[..take]
        .iter()
        .map(|&i| eig.eigenvectors.column(i).into_owned())
        .collect();
    let cols: Vec<Vec<f64>> = coeffs
        .par_iter()
        .map(|s| {
            let mut y = vec![0.0; n];
            for (qj, &sj) in basis.iter().zip(s.iter()) {
                for (yi, qi) in y.iter_mut().zip(qj) {
                    *yi += sj * qi;
                }
            }
            y
        })
        .collect();
    let vectors = DMatrix::from_fn(n, take, |r, c| cols[c][r]);
    LanczosOutput {
        values,
        vectors,
        iterations: m,
    }
}
