mod common;

use std::fs;
use std::path::Path;

use common::{gaussian_matrix, random_basis};
use latent_fmaps::embedio::bundle::{
    load_basis_bundle, load_correspondence_bundle, load_graph_bundle, load_map_bundle, load_transform_bundle,
    read_meta, sha256_hex, BUNDLE_VERSION,
};
use latent_fmaps::embedio::lfme::{self, Dtype};
use latent_fmaps::embedio::{
    load_anchors, load_bundle, load_embeddings, load_labels, save_bundle, save_embeddings, Artifact, BundleKind,
    BundleProvenance, EmbeddingFormat, EmbeddingSet,
};
use latent_fmaps::evalbench::{random_orthogonal, synthetic_pair};
use latent_fmaps::latgraph::{build_knn_graph, GraphConfig, Metric};
use latent_fmaps::lfm::{FunctionalMap, Objective, Provenance};
use latent_fmaps::transfer::{Correspondence, CorrespondenceSource, LinearTransform, TransformKind};
use latent_fmaps::Error;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn small_csv_parses() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "e.csv", "id,c0,c1\na,0,0\nb,1,0\n");
    let e = load_embeddings(&p, EmbeddingFormat::Csv).unwrap();
    assert_eq!((e.n(), e.d()), (2, 2));
    assert_eq!(e.ids(), &["a".to_string(), "b".to_string()]);
    assert_eq!(e.row(1), vec![1.0, 0.0]);
}

#[test]
fn rejections_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "e.csv", "id,c0,c1\na,0,0\nb,1,x\n");
    let msg = load_embeddings(&p, EmbeddingFormat::Csv).unwrap_err().to_string();
    assert!(msg.contains('3'), "{msg}");
    let p = write(dir.path(), "n.csv", "id,c0\na,1\nb,NaN\n");
    assert!(matches!(load_embeddings(&p, EmbeddingFormat::Csv), Err(Error::NonFinite { row: 1, column: 0 })));
    let p = write(dir.path(), "d.csv", "id,c0\na,1\na,2\n");
    assert!(matches!(load_embeddings(&p, EmbeddingFormat::Csv), Err(Error::DuplicateId { .. })));
}

#[test]
fn large_binary_header() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let m = gaussian_matrix(&mut rng, 3000, 768);
    let p = dir.path().join("big.lfme");
    lfme::write_matrix(&p, &m, Dtype::F32).unwrap();
    let e = load_embeddings(&p, EmbeddingFormat::from_path(&p)).unwrap();
    assert_eq!((e.n(), e.d()), (3000, 768));
    assert!((e.data() - m).amax() < 1e-6 * 5.0);
    assert_eq!(e.ids()[17], "17");
}

#[test]
fn embeddings_round_trip_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let m = gaussian_matrix(&mut rng, 100, 7) * 1e3;
    let set = EmbeddingSet::new((0..100).map(|i| format!("w{i}")).collect(), m.clone()).unwrap();
    for (name, fmt) in [("r.csv", EmbeddingFormat::Csv), ("r.lfme", EmbeddingFormat::Lfme)] {
        let p = dir.path().join(name);
        save_embeddings(&set, &p, fmt).unwrap();
        let back = load_embeddings(&p, fmt).unwrap();
        assert!(back.data().iter().zip(m.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
        if fmt == EmbeddingFormat::Csv {
            assert_eq!(back, set);
        }
    }
}

#[test]
fn anchor_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = load_anchors(&write(dir.path(), "a.csv", "0,0\n1,1\n"), 5, 5).unwrap();
    assert_eq!(a.pairs(), &[(0, 0), (1, 1)]);
    let five = load_anchors(&write(dir.path(), "b.csv", "src_index,dst_index\n0,4\n1,3\n2,2\n3,1\n4,0\n"), 5, 5).unwrap();
    assert_eq!(five.len(), 5);
    assert!(load_anchors(&write(dir.path(), "c.csv", "0,0\n7,7\n"), 5, 5).is_err());
    assert!(load_anchors(&write(dir.path(), "d.csv", "0,1\n2,1\n"), 5, 5).is_err());
}

#[test]
fn label_files_follow_ids() {
    let dir = tempfile::tempdir().unwrap();
    let set = EmbeddingSet::new(vec!["a".into(), "b".into(), "c".into()], DMatrix::identity(3, 3)).unwrap();
    let l = load_labels(&write(dir.path(), "l.csv", "id,label\nc,dog\na,cat\nb,dog\n"), &set).unwrap();
    assert_eq!(l.labels(), &["cat".to_string(), "dog".into(), "dog".into()]);
    assert!(load_labels(&write(dir.path(), "m.csv", "id,label\na,cat\n"), &set).is_err());
}

fn provenance() -> BundleProvenance {
    BundleProvenance::with_config(json!({"k": 5}))
}

fn round_trip(artifact: &Artifact) -> (Artifact, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    save_bundle(artifact, &dir.path().join("b"), &provenance()).unwrap();
    let (back, meta) = load_bundle(&dir.path().join("b")).unwrap();
    assert_eq!(meta.kind, artifact.kind());
    assert_eq!(meta.version, BUNDLE_VERSION);
    assert_eq!(meta.provenance.config, json!({"k": 5}));
    (back, dir)
}

#[test]
fn every_artifact_round_trips() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pair = synthetic_pair(120, 6, 0.1, 3).unwrap();
    let graph = build_knn_graph(&pair.x, &GraphConfig::new(9, Metric::Angular)).unwrap();
    let basis = random_basis(&mut rng, 40, 12);
    let map = FunctionalMap::new(
        gaussian_matrix(&mut rng, 50, 50),
        Provenance::Solved {
            alpha: 1e-3,
            beta: 1.0,
            descriptors: vec!["anchor_geodesic".into()],
            rank_deficient: false,
            objective: Objective {
                fit: 0.1,
                laplacian: 0.2,
                descriptor: 0.3,
                total: 0.6,
            },
        },
    )
    .unwrap();
    let corr = Correspondence::new(vec![3, 1, 0, 3], 5, CorrespondenceSource::Extracted).unwrap();
    let transform = LinearTransform {
        kind: TransformKind::Affine,
        matrix: random_orthogonal(4, &mut rng),
        offset: DVector::from_vec(vec![0.1, -2.0, 1e-300, 3.5]),
    };
    let artifacts = vec![
        Artifact::Graph(graph),
        Artifact::Basis(basis),
        Artifact::Map(map),
        Artifact::Correspondence {
            correspondence: corr,
            n_y: 5,
        },
        Artifact::Transform(transform),
    ];
    for a in &artifacts {
        let (back, _) = round_trip(a);
        assert_eq!(&back, a, "{:?}", a.kind());
    }
    // Bit-level equality for floats that survive a text format.
    if let (Artifact::Basis(b), (Artifact::Basis(r), _)) = (&artifacts[1], round_trip(&artifacts[1])) {
        assert!(b.eigenvalues().iter().zip(r.eigenvalues()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}

#[test]
fn typed_loaders_check_the_kind() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let dir = tempfile::tempdir().unwrap();
    let b = random_basis(&mut rng, 10, 3);
    save_bundle(&Artifact::Basis(b.clone()), dir.path(), &provenance()).unwrap();
    assert_eq!(load_basis_bundle(dir.path()).unwrap(), b);
    assert!(matches!(load_map_bundle(dir.path()), Err(Error::Bundle(_))));
    assert!(load_graph_bundle(dir.path()).is_err());
    assert!(load_transform_bundle(dir.path()).is_err());
    assert!(load_correspondence_bundle(dir.path()).is_err());
}

#[test]
fn tampering_is_detected() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let dir = tempfile::tempdir().unwrap();
    let map = FunctionalMap::new(gaussian_matrix(&mut rng, 5, 5), Provenance::FromPointwise).unwrap();
    save_bundle(&Artifact::Map(map), dir.path(), &provenance()).unwrap();
    let c = dir.path().join("c.lfme");
    let mut bytes = fs::read(&c).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 1;
    fs::write(&c, &bytes).unwrap();
    assert!(matches!(load_bundle(dir.path()), Err(Error::ChecksumMismatch { file }) if file == "c.lfme"));
}

#[test]
fn version_mismatch_is_detected() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let dir = tempfile::tempdir().unwrap();
    save_bundle(&Artifact::Basis(random_basis(&mut rng, 8, 2)), dir.path(), &provenance()).unwrap();
    let meta_path = dir.path().join("meta.json");
    let mut meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(&meta_path).unwrap()).unwrap();
    meta["version"] = json!(BUNDLE_VERSION + 1);
    fs::write(&meta_path, meta.to_string()).unwrap();
    assert!(matches!(
        load_bundle(dir.path()),
        Err(Error::VersionMismatch { expected, found }) if expected == BUNDLE_VERSION && found == BUNDLE_VERSION + 1
    ));
}

#[test]
fn provenance_hashes_sources() {
    let dir = tempfile::tempdir().unwrap();
    let src = write(dir.path(), "x.csv", "id,c0\na,1\n");
    let mut p = provenance();
    p.add_source(&src).unwrap();
    assert_eq!(p.sources[&src.display().to_string()], sha256_hex(b"id,c0\na,1\n"));
    let b = dir.path().join("bundle");
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    save_bundle(&Artifact::Basis(random_basis(&mut rng, 6, 2)), &b, &p).unwrap();
    let meta = read_meta(&b).unwrap();
    assert_eq!(meta.kind, BundleKind::Basis);
    assert_eq!(meta.provenance, p);
    assert!(meta.files.contains_key("eigenvectors.lfme") && meta.files.contains_key("eigenvalues.csv"));
}
