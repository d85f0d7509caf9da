mod common;

use common::{gaussian_matrix, random_basis};
use latent_fmaps::embedio::EmbeddingSet;
use latent_fmaps::evalbench::{random_orthogonal, synthetic_pair};
use latent_fmaps::latgraph::Metric;
use latent_fmaps::lfm::{from_pointwise, FunctionalMap, Provenance};
use latent_fmaps::pipeline::{PipelineConfig, SpaceModel};
use latent_fmaps::transfer::{
    distance_functions, embed_as_distance_function, extract_pointwise, fit_transform, fit_transform_pairs,
    transfer_coefficients, Correspondence, CorrespondenceSource, TransformKind,
};
use latent_fmaps::Error;
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn set(m: DMatrix<f64>) -> EmbeddingSet {
    EmbeddingSet::from_matrix(m).unwrap()
}

#[test]
fn identity_map_extracts_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let b = random_basis(&mut rng, 30, 30);
    let c = FunctionalMap::new(DMatrix::identity(30, 30), Provenance::FromPointwise).unwrap();
    let corr = extract_pointwise(&c, &b, &b).unwrap();
    assert_eq!(corr.assignment(), Correspondence::identity(30).assignment());
    assert_eq!(corr.source(), CorrespondenceSource::Extracted);
}

#[test]
fn extraction_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let bx = random_basis(&mut rng, 30, 6);
    let by = random_basis(&mut rng, 35, 5);
    let c = gaussian_matrix(&mut rng, 5, 6);
    let corr = extract_pointwise(&FunctionalMap::new(c.clone(), Provenance::FromPointwise).unwrap(), &bx, &by).unwrap();
    let mapped = by.eigenvectors() * &c;
    for i in 0..30 {
        let q = bx.eigenvectors().row(i);
        let mut best = (f64::INFINITY, 0);
        for j in 0..35 {
            let d = (q - mapped.row(j)).norm_squared();
            if d < best.0 {
                best = (d, j);
            }
        }
        assert_eq!(corr.assignment()[i], best.1);
    }
}

#[test]
fn extraction_is_permutation_equivariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let bx = random_basis(&mut rng, 25, 5);
    let by = random_basis(&mut rng, 25, 5);
    let c = FunctionalMap::new(gaussian_matrix(&mut rng, 5, 5), Provenance::FromPointwise).unwrap();
    let base = extract_pointwise(&c, &bx, &by).unwrap();
    let mut perm: Vec<usize> = (0..25).collect();
    perm.shuffle(&mut rng);
    // Row r of the relabeled basis is old row perm[r].
    let phi = DMatrix::from_fn(25, 5, |r, k| by.eigenvectors()[(perm[r], k)]);
    let relabeled = latent_fmaps::spectral::SpectralBasis::new(by.eigenvalues().to_vec(), phi, by.residuals().to_vec()).unwrap();
    let moved = extract_pointwise(&c, &bx, &relabeled).unwrap();
    for i in 0..25 {
        assert_eq!(perm[moved.assignment()[i]], base.assignment()[i]);
    }
}

#[test]
fn ground_truth_round_trips_and_transfers_functions() {
    let pair = synthetic_pair(500, 16, 0.0, 7).unwrap();
    let cfg = PipelineConfig {
        k_neighbors: Some(30),
        n_eigen: 40,
        zoomout: None,
        ..PipelineConfig::default()
    };
    let mx = SpaceModel::build(&pair.x, &cfg).unwrap();
    let my = SpaceModel::build(&pair.y, &cfg).unwrap();
    let c = from_pointwise(&mx.basis, &my.basis, &pair.ground_truth).unwrap();
    let back = extract_pointwise(&c, &mx.basis, &my.basis).unwrap();
    assert!(back.accuracy(&pair.ground_truth).unwrap() >= 0.99);
    assert_eq!(back.assignment(), pair.ground_truth.assignment());

    // A low-frequency function on X, pushed to Y through the map.
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let a = DMatrix::from_fn(40, 1, |i, _| if i < 10 { rand::Rng::random_range(&mut rng, -1.0..1.0) } else { 0.0 });
    let f = mx.basis.reconstruct(&a).unwrap();
    let g = my.basis.reconstruct(&transfer_coefficients(&c, &mx.basis.project(&f).unwrap()).unwrap()).unwrap();
    let gt = pair.ground_truth.assignment();
    let mut pulled = DMatrix::zeros(500, 1);
    for (x, &y) in gt.iter().enumerate() {
        pulled[(y, 0)] = f[(x, 0)];
    }
    assert!((&g - &pulled).norm() <= 0.05 * pulled.norm());
}

#[test]
fn coefficient_transfer_is_linear() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let c = FunctionalMap::new(gaussian_matrix(&mut rng, 4, 6), Provenance::FromPointwise).unwrap();
    let (a1, a2) = (gaussian_matrix(&mut rng, 6, 3), gaussian_matrix(&mut rng, 6, 3));
    let lhs = transfer_coefficients(&c, &(&a1 + &a2)).unwrap();
    let rhs = transfer_coefficients(&c, &a1).unwrap() + transfer_coefficients(&c, &a2).unwrap();
    assert!((lhs - rhs).amax() < 1e-10);
    let id = FunctionalMap::new(DMatrix::identity(6, 6), Provenance::FromPointwise).unwrap();
    assert_eq!(transfer_coefficients(&id, &a1).unwrap(), a1);
    assert!(transfer_coefficients(&c, &gaussian_matrix(&mut rng, 5, 1)).is_err());
}

#[test]
fn procrustes_recovers_rotation() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let x = gaussian_matrix(&mut rng, 200, 12);
    let q = random_orthogonal(12, &mut rng);
    let y = &x * q.transpose();
    let t = fit_transform(&set(x.clone()), &set(y), &Correspondence::identity(200), TransformKind::Orthogonal).unwrap();
    assert!((&t.matrix - &q).norm() <= 1e-6);
    assert!((t.matrix.tr_mul(&t.matrix) - DMatrix::identity(12, 12)).norm() <= 1e-8);
    assert_eq!(t.offset.amax(), 0.0);

    let same = fit_transform(&set(x.clone()), &set(x), &Correspondence::identity(200), TransformKind::Orthogonal).unwrap();
    assert!((same.matrix - DMatrix::identity(12, 12)).norm() <= 1e-8);
}

#[test]
fn linear_and_affine_fits() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x = gaussian_matrix(&mut rng, 150, 5);
    let m = gaussian_matrix(&mut rng, 3, 5);
    let y = &x * m.transpose();
    let t = fit_transform(&set(x.clone()), &set(y.clone()), &Correspondence::identity(150), TransformKind::Linear).unwrap();
    assert!((&t.matrix - &m).norm() < 1e-6);
    assert_eq!(t.apply(&set(x.clone())).unwrap().d(), 3);

    let mut shifted = y.clone();
    for mut row in shifted.row_iter_mut() {
        row[0] += 4.0;
        row[2] -= 1.0;
    }
    let a = fit_transform(&set(x), &set(shifted), &Correspondence::identity(150), TransformKind::Affine).unwrap();
    assert!((&a.matrix - &m).norm() < 1e-6);
    assert!((a.offset[0] - 4.0).abs() < 1e-6 && (a.offset[2] + 1.0).abs() < 1e-6);
}

#[test]
fn too_few_pairs_still_fit_with_ridge() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let x = set(gaussian_matrix(&mut rng, 40, 10));
    let y = set(gaussian_matrix(&mut rng, 40, 10));
    let t = fit_transform_pairs(&x, &y, &[(0, 0), (1, 1), (2, 2)], TransformKind::Linear).unwrap();
    assert!(t.matrix.iter().all(|v| v.is_finite()));
    assert!(matches!(
        fit_transform_pairs(&x, &y, &[], TransformKind::Orthogonal),
        Err(Error::InvalidInput(_))
    ));
}

#[test]
fn distance_functions_match_direct_evaluation() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let nodes = set(gaussian_matrix(&mut rng, 20, 4));
    for metric in [Metric::Angular, Metric::Euclidean] {
        let q = nodes.row(7);
        let f = embed_as_distance_function(&q, &nodes, metric).unwrap();
        assert_eq!(f[7], 0.0);
        let raw: Vec<f64> = (0..20).map(|i| metric.distance(&q, &nodes.row(i))).collect();
        let max = raw.iter().cloned().fold(0.0, f64::max);
        for i in 0..20 {
            assert!((f[i] - raw[i] / max).abs() < 1e-12);
        }
        let all = distance_functions(&nodes, &nodes, metric).unwrap();
        assert_eq!(all.shape(), (20, 20));
        assert!(all.column(7).iter().zip(&f).all(|(a, b)| (a - b).abs() < 1e-15));
    }
    assert!(embed_as_distance_function(&[0.0; 4], &nodes, Metric::Angular).is_err());
    assert!(embed_as_distance_function(&[1.0; 3], &nodes, Metric::Euclidean).is_err());
}

#[test]
fn correspondence_csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("corr.csv");
    let corr = Correspondence::new(vec![2, 0, 1, 2], 3, CorrespondenceSource::Extracted).unwrap();
    corr.save(&path).unwrap();
    let back = Correspondence::load(&path, 4, 3, CorrespondenceSource::Extracted).unwrap();
    assert_eq!(back, corr);
    assert!(Correspondence::load(&path, 5, 3, CorrespondenceSource::Extracted).is_err());
    assert!(Correspondence::load(&path, 4, 2, CorrespondenceSource::Extracted).is_err());
    assert!(corr.inverse().is_err());
}
