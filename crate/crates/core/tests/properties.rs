mod common;

use std::path::Path;

use common::{gaussian_matrix, random_basis};
use latent_fmaps::analysis::lfm_similarity;
use latent_fmaps::descriptors::{heat_kernel_signature, label_indicator_descriptors, wave_kernel_signature};
use latent_fmaps::embedio::lfme::{decode, encode, Dtype};
use latent_fmaps::embedio::{EmbeddingSet, LabelAssignment};
use latent_fmaps::evalbench::mrr;
use latent_fmaps::latgraph::{build_knn_graph, normalized_laplacian, GraphConfig, Metric, WeightFn};
use latent_fmaps::lfm::{from_pointwise, FunctionalMap, Provenance};
use latent_fmaps::spectral::SpectralBasis;
use latent_fmaps::transfer::{extract_pointwise, Correspondence, CorrespondenceSource};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn points(seed: u64, n: usize, d: usize) -> EmbeddingSet {
    EmbeddingSet::from_matrix(gaussian_matrix(&mut rng(seed), n, d)).unwrap()
}

fn permutation(seed: u64, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(&mut rng(seed));
    p
}

fn edge_list(g: &latent_fmaps::latgraph::LatentGraph) -> Vec<(usize, usize)> {
    g.edges().iter().map(|e| (e.i, e.j)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn graphs_are_symmetric_and_cover_k(seed: u64, n in 8usize..40, d in 2usize..6, k in 1usize..8, euclid: bool) {
        let metric = if euclid { Metric::Euclidean } else { Metric::Angular };
        let g = build_knn_graph(&points(seed, n, d), &GraphConfig::new(k.min(n - 1), metric)).unwrap();
        let w = g.dense_weights();
        prop_assert_eq!(&w, &w.transpose());
        for i in 0..n {
            prop_assert_eq!(w[(i, i)], 0.0);
            prop_assert!(g.degree_count(i) >= k.min(n - 1));
        }
        prop_assert!(w.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn angular_graphs_ignore_scale(seed: u64, n in 8usize..30, scale in 0.01f64..100.0) {
        let x = points(seed, n, 4);
        let scaled = EmbeddingSet::from_matrix(x.data() * scale).unwrap();
        let cfg = GraphConfig::new(5, Metric::Angular);
        let a = build_knn_graph(&x, &cfg).unwrap();
        let b = build_knn_graph(&scaled, &cfg).unwrap();
        prop_assert_eq!(edge_list(&a), edge_list(&b));
    }

    #[test]
    fn gaussian_weights_fall_with_length(seed: u64, n in 8usize..30, sigma in 0.1f64..5.0) {
        let cfg = GraphConfig { weight: WeightFn::Gaussian { sigma: Some(sigma) }, ..GraphConfig::new(4, Metric::Euclidean) };
        let mut edges = build_knn_graph(&points(seed, n, 3), &cfg).unwrap().edges();
        edges.sort_by(|a, b| a.length.total_cmp(&b.length));
        prop_assert!(edges.windows(2).all(|p| p[1].weight <= p[0].weight));
    }

    #[test]
    fn laplacian_spectrum_lies_in_zero_two(seed: u64, n in 6usize..30, k in 1usize..6) {
        let g = build_knn_graph(&points(seed, n, 3), &GraphConfig::new(k.min(n - 1), Metric::Angular)).unwrap();
        let l = normalized_laplacian(&g).unwrap().to_dense();
        for v in SymmetricEigen::new(l).eigenvalues.iter() {
            prop_assert!(*v >= -1e-10 && *v <= 2.0 + 1e-10);
        }
    }

    #[test]
    fn mrr_bounds(seed: u64, n in 2usize..40) {
        let q = points(seed, n, 3);
        let t = points(seed.wrapping_add(1), n, 3);
        let truth = Correspondence::new(permutation(seed, n), n, CorrespondenceSource::GroundTruth).unwrap();
        let r = mrr(&q, &t, &truth).unwrap();
        prop_assert!(r.hits_at_1 <= r.mrr && r.mrr <= 1.0);
        prop_assert!(r.mrr >= 1.0 / n as f64 - 1e-15);
    }

    #[test]
    fn permutation_maps_are_orthogonal(seed: u64, n in 2usize..20) {
        let mut r = rng(seed);
        let bx = random_basis(&mut r, n, n);
        let by = random_basis(&mut r, n, n);
        let corr = Correspondence::new(permutation(seed, n), n, CorrespondenceSource::GroundTruth).unwrap();
        let c = from_pointwise(&bx, &by, &corr).unwrap();
        prop_assert!((c.matrix().tr_mul(c.matrix()) - DMatrix::identity(n, n)).amax() < 1e-10);
        let back = extract_pointwise(&c, &bx, &by).unwrap();
        prop_assert_eq!(back.assignment(), corr.assignment());
    }

    #[test]
    fn similarity_is_a_fraction(seed: u64, rows in 1usize..12, cols in 1usize..12) {
        let c = gaussian_matrix(&mut rng(seed), rows, cols);
        let s = lfm_similarity(&FunctionalMap::new(c, Provenance::FromPointwise).unwrap()).unwrap().score;
        prop_assert!((0.0..=1.0).contains(&s));
    }

    #[test]
    fn extraction_follows_row_relabeling(seed: u64, n in 3usize..25) {
        let mut r = rng(seed);
        let bx = random_basis(&mut r, n, 3);
        let by = random_basis(&mut r, n, 3);
        let c = FunctionalMap::new(gaussian_matrix(&mut r, 3, 3), Provenance::FromPointwise).unwrap();
        let perm = permutation(seed ^ 7, n);
        let phi = DMatrix::from_fn(n, 3, |i, k| bx.eigenvectors()[(perm[i], k)]);
        let moved = SpectralBasis::new(bx.eigenvalues().to_vec(), phi, bx.residuals().to_vec()).unwrap();
        let base = extract_pointwise(&c, &bx, &by).unwrap();
        let after = extract_pointwise(&c, &moved, &by).unwrap();
        for (i, &p) in perm.iter().enumerate() {
            prop_assert_eq!(after.assignment()[i], base.assignment()[p]);
        }
    }

    #[test]
    fn kernel_signatures_ignore_eigenvector_signs(seed: u64, n in 4usize..30, k in 2usize..6) {
        let mut r = rng(seed);
        let b = random_basis(&mut r, n, k.min(n));
        let flips: Vec<f64> = (0..b.k()).map(|i| if (seed >> i) & 1 == 1 { -1.0 } else { 1.0 }).collect();
        let phi = DMatrix::from_fn(n, b.k(), |i, j| b.eigenvectors()[(i, j)] * flips[j]);
        let flipped = SpectralBasis::new(b.eigenvalues().to_vec(), phi, b.residuals().to_vec()).unwrap();
        let times = [0.5, 2.0, 8.0];
        prop_assert_eq!(heat_kernel_signature(&b, &times).unwrap(), heat_kernel_signature(&flipped, &times).unwrap());
        let energies = [-1.0, 0.0, 0.5];
        prop_assert_eq!(wave_kernel_signature(&b, &energies, 0.3).unwrap(), wave_kernel_signature(&flipped, &energies, 0.3).unwrap());
    }

    #[test]
    fn kernel_signatures_follow_node_order(seed: u64, n in 4usize..30) {
        let mut r = rng(seed);
        let b = random_basis(&mut r, n, 3);
        let perm = permutation(seed, n);
        let phi = DMatrix::from_fn(n, 3, |i, j| b.eigenvectors()[(perm[i], j)]);
        let moved = SpectralBasis::new(b.eigenvalues().to_vec(), phi, b.residuals().to_vec()).unwrap();
        let a = heat_kernel_signature(&b, &[1.0, 4.0]).unwrap().values;
        let m = heat_kernel_signature(&moved, &[1.0, 4.0]).unwrap().values;
        for (i, &p) in perm.iter().enumerate() {
            prop_assert_eq!(m.row(i), a.row(p));
        }
    }

    #[test]
    fn label_indicators_are_one_hot(labels in prop::collection::vec(0usize..5, 1..60)) {
        let set = LabelAssignment::from_indices(&labels);
        let d = label_indicator_descriptors(&set, set.classes()).unwrap();
        for row in d.values.row_iter() {
            prop_assert_eq!(row.sum(), 1.0);
        }
    }

    #[test]
    fn binary_matrices_round_trip(values in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::ZERO, 1..200), cols in 1usize..5) {
        let rows = values.len() / cols;
        prop_assume!(rows > 0);
        let m = DMatrix::from_row_slice(rows, cols, &values[..rows * cols]);
        let back = decode(&encode(&m, Dtype::F64), Path::new("mem")).unwrap();
        prop_assert!(back.iter().zip(m.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
        prop_assert_eq!(back.shape(), m.shape());
    }

    #[test]
    fn spectral_projection_is_idempotent(seed: u64, n in 3usize..40, k in 1usize..10) {
        let mut r = rng(seed);
        let b = random_basis(&mut r, n, k.min(n));
        let f = gaussian_matrix(&mut r, n, 2);
        let once = b.reconstruct(&b.project(&f).unwrap()).unwrap();
        let twice = b.reconstruct(&b.project(&once).unwrap()).unwrap();
        prop_assert!((once - twice).amax() < 1e-10);
    }
}
