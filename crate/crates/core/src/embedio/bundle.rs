//! Artifact bundles: a directory with `meta.json` and raw data files.
//!
//! `meta.json` records the bundle version, the artifact kind, a SHA-256
//! checksum for every data file, kind-specific metadata and free-form
//! provenance (source file hashes and the producing configuration).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::lfme::{self, Dtype};
use crate::error::{Error, Result};
use crate::latgraph::{Edge, GraphConfig, LatentGraph};
use crate::lfm::{self, FunctionalMap};
use crate::spectral::SpectralBasis;
use crate::transfer::{Correspondence, CorrespondenceSource, LinearTransform, TransformKind};

pub const BUNDLE_FORMAT: &str = "lfm-bundle";
pub const BUNDLE_VERSION: u32 = 1;
pub const META_FILE: &str = "meta.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BundleKind {
    Graph,
    Basis,
    Map,
    Correspondence,
    Transform,
}

/// Where an artifact came from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BundleProvenance {
    /// Input file path to its SHA-256.
    #[serde(default)]
    pub sources: BTreeMap<String, String>,
    /// Configuration that produced the artifact.
    #[serde(default)]
    pub config: Value,
}

impl BundleProvenance {
    pub fn with_config(config: Value) -> Self {
        Self {
            sources: BTreeMap::new(),
            config,
        }
    }

    /// Records the hash of an input file (or every file of a bundle
    /// directory, via its `meta.json`).
    pub fn add_source(&mut self, path: &Path) -> Result<()> {
        let target = if path.is_dir() { path.join(META_FILE) } else { path.to_path_buf() };
        self.sources.insert(path.display().to_string(), hash_file(&target)?);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleMeta {
    pub format: String,
    pub version: u32,
    pub kind: BundleKind,
    /// Data file name to SHA-256.
    pub files: BTreeMap<String, String>,
    /// Kind-specific fields needed to rebuild the artifact.
    pub payload: Value,
    pub provenance: BundleProvenance,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Artifact {
    Graph(LatentGraph),
    Basis(SpectralBasis),
    Map(FunctionalMap),
    Correspondence {
        correspondence: Correspondence,
        n_y: usize,
    },
    Transform(LinearTransform),
}

impl Artifact {
    pub fn kind(&self) -> BundleKind {
        match self {
            Artifact::Graph(_) => BundleKind::Graph,
            Artifact::Basis(_) => BundleKind::Basis,
            Artifact::Map(_) => BundleKind::Map,
            Artifact::Correspondence { .. } => BundleKind::Correspondence,
            Artifact::Transform(_) => BundleKind::Transform,
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path).map_err(|e| Error::io(path, e))?))
}

#[derive(Serialize, Deserialize)]
struct GraphPayload {
    n: usize,
    config: GraphConfig,
    sigma: Option<f64>,
    repair_edges: usize,
}

#[derive(Serialize, Deserialize)]
struct CorrespondencePayload {
    n_y: usize,
    source: CorrespondenceSource,
}

#[derive(Serialize, Deserialize)]
struct TransformPayload {
    kind: TransformKind,
}

struct Writer {
    dir: PathBuf,
    files: BTreeMap<String, String>,
}

impl Writer {
    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.files.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    fn matrix(&mut self, name: &str, m: &DMatrix<f64>) -> Result<()> {
        self.put(name, &lfme::encode(m, Dtype::F64))
    }
}

fn column(v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_column_slice(v.len(), 1, v)
}

/// Writes `artifact` into `dir` (created if missing).
pub fn save_bundle(artifact: &Artifact, dir: &Path, provenance: &BundleProvenance) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut w = Writer {
        dir: dir.to_path_buf(),
        files: BTreeMap::new(),
    };
    let payload = match artifact {
        Artifact::Graph(g) => {
            let mut csv = String::from("i,j,weight,length\n");
            for e in g.edges() {
                csv.push_str(&format!("{},{},{},{}\n", e.i, e.j, e.weight, e.length));
            }
            w.put("edges.csv", csv.as_bytes())?;
            serde_json::to_value(GraphPayload {
                n: g.n(),
                config: *g.config(),
                sigma: g.sigma(),
                repair_edges: g.repair_edges(),
            })
        }
        Artifact::Basis(b) => {
            // `{}` prints the shortest decimal that parses back to the same f64.
            let mut csv = String::from("eigenvalue,residual\n");
            for (l, r) in b.eigenvalues().iter().zip(b.residuals()) {
                csv.push_str(&format!("{l},{r}\n"));
            }
            w.put("eigenvalues.csv", csv.as_bytes())?;
            w.matrix("eigenvectors.lfme", b.eigenvectors())?;
            Ok(Value::Null)
        }
        Artifact::Map(m) => {
            w.matrix("c.lfme", m.matrix())?;
            serde_json::to_value(m.provenance())
        }
        Artifact::Correspondence { correspondence, n_y } => {
            let mut csv = String::from("src_index,dst_index\n");
            for (x, y) in correspondence.assignment().iter().enumerate() {
                csv.push_str(&format!("{x},{y}\n"));
            }
            w.put("correspondence.csv", csv.as_bytes())?;
            serde_json::to_value(CorrespondencePayload {
                n_y: *n_y,
                source: correspondence.source(),
            })
        }
        Artifact::Transform(t) => {
            w.matrix("matrix.lfme", &t.matrix)?;
            w.matrix("offset.lfme", &column(t.offset.as_slice()))?;
            serde_json::to_value(TransformPayload { kind: t.kind })
        }
    }
    .map_err(|e| Error::Bundle(format!("cannot encode metadata: {e}")))?;
    let meta = BundleMeta {
        format: BUNDLE_FORMAT.into(),
        version: BUNDLE_VERSION,
        kind: artifact.kind(),
        files: w.files,
        payload,
        provenance: provenance.clone(),
    };
    let text = serde_json::to_string_pretty(&meta).map_err(|e| Error::Bundle(e.to_string()))?;
    let path = dir.join(META_FILE);
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

/// Reads and checks `meta.json` and every checksum.
pub fn read_meta(dir: &Path) -> Result<BundleMeta> {
    let path = dir.join(META_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let raw: Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.clone(),
        line: e.line(),
        message: e.to_string(),
    })?;
    if let Some(v) = raw.get("version").and_then(Value::as_u64) {
        if v != BUNDLE_VERSION as u64 {
            return Err(Error::VersionMismatch {
                expected: BUNDLE_VERSION,
                found: v as u32,
            });
        }
    }
    let meta: BundleMeta = serde_json::from_value(raw).map_err(|e| Error::Parse {
        path: path.clone(),
        line: 0,
        message: e.to_string(),
    })?;
    if meta.format != BUNDLE_FORMAT {
        return Err(Error::Bundle(format!("{} is not a {BUNDLE_FORMAT} directory", dir.display())));
    }
    for (name, expected) in &meta.files {
        if hash_file(&dir.join(name))? != *expected {
            return Err(Error::ChecksumMismatch { file: name.clone() });
        }
    }
    Ok(meta)
}

fn payload<T: serde::de::DeserializeOwned>(meta: &BundleMeta) -> Result<T> {
    serde_json::from_value(meta.payload.clone()).map_err(|e| Error::Bundle(format!("bad payload: {e}")))
}

fn matrix(dir: &Path, name: &str) -> Result<DMatrix<f64>> {
    lfme::read_matrix(&dir.join(name))
}

fn column_vec(dir: &Path, name: &str) -> Result<Vec<f64>> {
    let m = matrix(dir, name)?;
    if m.ncols() != 1 {
        return Err(Error::Bundle(format!("{name} must be a single column")));
    }
    Ok(m.iter().copied().collect())
}

pub fn load_bundle(dir: &Path) -> Result<(Artifact, BundleMeta)> {
    let meta = read_meta(dir)?;
    let artifact = match meta.kind {
        BundleKind::Graph => {
            let p: GraphPayload = payload(&meta)?;
            let path = dir.join("edges.csv");
            let mut r = csv::Reader::from_path(&path).map_err(|e| Error::Bundle(e.to_string()))?;
            let mut edges = Vec::new();
            for (row, rec) in r.deserialize::<(usize, usize, f64, f64)>().enumerate() {
                let (i, j, weight, length) = rec.map_err(|e| Error::Parse {
                    path: path.clone(),
                    line: row + 2,
                    message: e.to_string(),
                })?;
                edges.push(Edge { i, j, weight, length });
            }
            Artifact::Graph(LatentGraph::from_edges(p.n, &edges, p.config, p.sigma, p.repair_edges)?)
        }
        BundleKind::Basis => {
            let path = dir.join("eigenvalues.csv");
            let mut r = csv::Reader::from_path(&path).map_err(|e| Error::Bundle(e.to_string()))?;
            let (mut values, mut residuals) = (Vec::new(), Vec::new());
            for (row, rec) in r.deserialize::<(f64, f64)>().enumerate() {
                let (l, res) = rec.map_err(|e| Error::Parse {
                    path: path.clone(),
                    line: row + 2,
                    message: e.to_string(),
                })?;
                values.push(l);
                residuals.push(res);
            }
            Artifact::Basis(SpectralBasis::new(values, matrix(dir, "eigenvectors.lfme")?, residuals)?)
        }
        BundleKind::Map => {
            let provenance: lfm::Provenance = payload(&meta)?;
            Artifact::Map(FunctionalMap::new(matrix(dir, "c.lfme")?, provenance)?)
        }
        BundleKind::Correspondence => {
            let p: CorrespondencePayload = payload(&meta)?;
            let path = dir.join("correspondence.csv");
            let mut r = csv::Reader::from_path(&path).map_err(|e| Error::Bundle(e.to_string()))?;
            let mut assignment = Vec::new();
            for (row, rec) in r.deserialize::<(usize, usize)>().enumerate() {
                let (x, y) = rec.map_err(|e| Error::Parse {
                    path: path.clone(),
                    line: row + 2,
                    message: e.to_string(),
                })?;
                if x != row {
                    return Err(Error::Parse {
                        path: path.clone(),
                        line: row + 2,
                        message: format!("expected source {row}, found {x}"),
                    });
                }
                assignment.push(y);
            }
            Artifact::Correspondence {
                correspondence: Correspondence::new(assignment, p.n_y, p.source)?,
                n_y: p.n_y,
            }
        }
        BundleKind::Transform => {
            let p: TransformPayload = payload(&meta)?;
            let m = matrix(dir, "matrix.lfme")?;
            let offset = column_vec(dir, "offset.lfme")?;
            if offset.len() != m.nrows() {
                return Err(Error::shape("transform offset", m.nrows(), offset.len()));
            }
            Artifact::Transform(LinearTransform {
                kind: p.kind,
                matrix: m,
                offset: nalgebra::DVector::from_vec(offset),
            })
        }
    };
    Ok((artifact, meta))
}

macro_rules! typed_loader {
    ($name:ident, $variant:ident, $ty:ty) => {
        pub fn $name(dir: &Path) -> Result<$ty> {
            match load_bundle(dir)?.0 {
                Artifact::$variant(v) => Ok(v),
                other => Err(Error::Bundle(format!(
                    "{} holds a {:?} bundle, expected {:?}",
                    dir.display(),
                    other.kind(),
                    BundleKind::$variant
                ))),
            }
        }
    };
}

typed_loader!(load_graph_bundle, Graph, LatentGraph);
typed_loader!(load_basis_bundle, Basis, SpectralBasis);
typed_loader!(load_map_bundle, Map, FunctionalMap);
typed_loader!(load_transform_bundle, Transform, LinearTransform);

pub fn load_correspondence_bundle(dir: &Path) -> Result<Correspondence> {
    match load_bundle(dir)?.0 {
        Artifact::Correspondence { correspondence, .. } => Ok(correspondence),
        other => Err(Error::Bundle(format!(
            "{} holds a {:?} bundle, expected Correspondence",
            dir.display(),
            other.kind()
        ))),
    }
}
