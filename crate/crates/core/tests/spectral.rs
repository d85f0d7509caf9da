mod common;

use common::{dense_laplacian, gaussian_matrix};
use latent_fmaps::evalbench::synthetic_pair;
use latent_fmaps::latgraph::{build_knn_graph, normalized_laplacian, GraphConfig, Metric};
use latent_fmaps::spectral::{eigenbasis, SpectralBasis};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn basis(n: usize, k: usize, seed: u64) -> (SpectralBasis, DMatrix<f64>) {
    let pair = synthetic_pair(n, 8, 0.0, seed).unwrap();
    let g = build_knn_graph(&pair.x, &GraphConfig::new(12, Metric::Angular)).unwrap();
    (eigenbasis(&normalized_laplacian(&g).unwrap(), k, 1e-8).unwrap(), dense_laplacian(&g))
}

#[test]
fn agrees_with_dense_eigendecomposition() {
    for n in [120, 400] {
        let (b, l) = basis(n, 20, 1);
        let mut dense: Vec<f64> = SymmetricEigen::new(l.clone()).eigenvalues.iter().copied().collect();
        dense.sort_by(f64::total_cmp);
        for (got, want) in b.eigenvalues().iter().zip(&dense) {
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
        assert!(b.eigenvalues()[0].abs() <= 1e-8);
        assert!(b.residuals().iter().all(|&r| r <= 1e-8));
        for c in 0..20 {
            let phi = b.eigenvectors().column(c);
            let r = (&l * phi - phi * b.eigenvalues()[c]).norm();
            assert!(r <= 1e-8);
            // Largest-magnitude entry is positive.
            let imax = phi.iamax();
            assert!(phi[imax] > 0.0);
        }
    }
}

#[test]
fn same_result_with_any_thread_count() {
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| basis(500, 15, 2).0)
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn projection_examples() {
    let (b, _) = basis(150, 10, 3);
    let phi = b.eigenvectors();
    let e2 = b.project(&phi.columns(1, 1).into_owned()).unwrap();
    for i in 0..10 {
        let want = if i == 1 { 1.0 } else { 0.0 };
        assert!((e2[(i, 0)] - want).abs() < 1e-10);
    }
    assert_eq!(b.project(&DMatrix::zeros(150, 2)).unwrap(), DMatrix::zeros(10, 2));
    let e1 = DMatrix::from_fn(10, 1, |i, _| if i == 0 { 1.0 } else { 0.0 });
    assert!((b.reconstruct(&e1).unwrap() - phi.columns(0, 1)).amax() < 1e-15);
    assert!(b.project(&DMatrix::zeros(149, 1)).is_err());
    assert!(b.reconstruct(&DMatrix::zeros(9, 1)).is_err());
}

#[test]
fn projector_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (b, _) = basis(150, 12, 4);
    let f = gaussian_matrix(&mut rng, 150, 3);
    let pf = b.reconstruct(&b.project(&f).unwrap()).unwrap();
    // Residual orthogonal to the span, projector idempotent, Parseval.
    assert!(b.project(&(&f - &pf)).unwrap().amax() < 1e-8);
    let ppf = b.reconstruct(&b.project(&pf).unwrap()).unwrap();
    assert!((&ppf - &pf).norm() < 1e-8);
    assert!((b.project(&f).unwrap().norm() - pf.norm()).abs() < 1e-8);
    let a = gaussian_matrix(&mut rng, 12, 2);
    assert!((b.project(&b.reconstruct(&a).unwrap()).unwrap() - &a).amax() < 1e-10);
}

#[test]
fn full_basis_reconstructs_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (b, _) = basis(60, 60, 5);
    let f = gaussian_matrix(&mut rng, 60, 1);
    assert!((b.reconstruct(&b.project(&f).unwrap()).unwrap() - &f).norm() <= 1e-8);
}

#[test]
fn rejects_bad_requests() {
    let pair = synthetic_pair(50, 4, 0.0, 0).unwrap();
    let g = build_knn_graph(&pair.x, &GraphConfig::new(8, Metric::Angular)).unwrap();
    let l = normalized_laplacian(&g).unwrap();
    assert!(eigenbasis(&l, 0, 1e-8).is_err());
    assert!(eigenbasis(&l, 51, 1e-8).is_err());
    assert!(eigenbasis(&l, 5, 0.0).is_err());
}
