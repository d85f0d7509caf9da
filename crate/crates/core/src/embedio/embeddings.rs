use std::collections::HashSet;
use std::path::Path;

use nalgebra::DMatrix;

use super::lfme::{self, Dtype};
use crate::error::{Error, Result};

/// An `n x d` matrix of latent vectors with one unique identifier per row.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    ids: Vec<String>,
    data: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingFormat {
    Csv,
    Lfme,
}

impl EmbeddingFormat {
    /// Guesses the format from the file extension; anything that is not
    /// `.lfme` or `.bin` is read as CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("lfme") | Some("bin") => EmbeddingFormat::Lfme,
            _ => EmbeddingFormat::Csv,
        }
    }
}

impl EmbeddingSet {
    pub fn new(ids: Vec<String>, data: DMatrix<f64>) -> Result<Self> {
        let (n, d) = data.shape();
        if n == 0 || d == 0 {
            return Err(Error::InvalidInput(format!(
                "embedding set must be non-empty, got {n}x{d}"
            )));
        }
        if ids.len() != n {
            return Err(Error::shape("embedding ids", n, ids.len()));
        }
        for i in 0..n {
            for j in 0..d {
                if !data[(i, j)].is_finite() {
                    return Err(Error::NonFinite { row: i, column: j });
                }
            }
        }
        let mut seen = HashSet::with_capacity(n);
        for (row, id) in ids.iter().enumerate() {
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateId {
                    id: id.clone(),
                    row,
                });
            }
        }
        Ok(Self { ids, data })
    }

    /// Builds a set whose ids are the row indices.
    pub fn from_matrix(data: DMatrix<f64>) -> Result<Self> {
        let ids = (0..data.nrows()).map(|i| i.to_string()).collect();
        Self::new(ids, data)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn d(&self) -> usize {
        self.data.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.data.row(i).iter().copied().collect()
    }

    /// Row-major copy of the data, convenient for distance kernels.
    pub fn to_row_major(&self) -> Vec<f64> {
        let (n, d) = self.data.shape();
        let mut out = Vec::with_capacity(n * d);
        for i in 0..n {
            out.extend(self.data.row(i).iter());
        }
        out
    }

    /// Returns the subset of rows in `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let n = self.n();
        if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
            return Err(Error::InvalidInput(format!("row {bad} out of range for n={n}")));
        }
        let data = DMatrix::from_fn(indices.len(), self.d(), |i, j| self.data[(indices[i], j)]);
        let ids = indices.iter().map(|&i| self.ids[i].clone()).collect();
        Self::new(ids, data)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }
}

pub fn load_embeddings(path: &Path, format: EmbeddingFormat) -> Result<EmbeddingSet> {
    match format {
        EmbeddingFormat::Csv => load_csv(path),
        EmbeddingFormat::Lfme => EmbeddingSet::from_matrix(lfme::read_matrix(path)?),
    }
}

pub fn save_embeddings(set: &EmbeddingSet, path: &Path, format: EmbeddingFormat) -> Result<()> {
    match format {
        EmbeddingFormat::Csv => save_csv(set, path),
        EmbeddingFormat::Lfme => lfme::write_matrix(path, set.data(), Dtype::F64),
    }
}

fn load_csv(path: &Path) -> Result<EmbeddingSet> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| parse_err(1, e.to_string()))?;
    let header = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    if header.len() < 2 || &header[0] != "id" {
        return Err(parse_err(1, "header must be `id,c0,...,c{d-1}`".into()));
    }
    for (j, name) in header.iter().skip(1).enumerate() {
        if name != format!("c{j}") {
            return Err(parse_err(
                1,
                format!("header column {} is {name:?}, expected \"c{j}\"", j + 1),
            ));
        }
    }
    let d = header.len() - 1;
    let mut ids = Vec::new();
    let mut values = Vec::new();
    let mut seen = HashSet::new();
    for (row, record) in reader.records().enumerate() {
        let line = row + 2;
        let record = record.map_err(|e| parse_err(line, e.to_string()))?;
        if record.len() != d + 1 {
            return Err(parse_err(
                line,
                format!("expected {} fields, found {}", d + 1, record.len()),
            ));
        }
        let id = record[0].to_string();
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId { id, row });
        }
        for (j, field) in record.iter().skip(1).enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(line, format!("column c{j}: cannot parse {field:?}")))?;
            if !v.is_finite() {
                return Err(Error::NonFinite { row, column: j });
            }
            values.push(v);
        }
        ids.push(id);
    }
    if ids.is_empty() {
        return Err(parse_err(2, "no data rows".into()));
    }
    let data = DMatrix::from_row_slice(ids.len(), d, &values);
    EmbeddingSet::new(ids, data)
}

fn save_csv(set: &EmbeddingSet, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Bundle(e.to_string()))?;
    let mut header = vec!["id".to_string()];
    header.extend((0..set.d()).map(|j| format!("c{j}")));
    w.write_record(&header).map_err(|e| Error::Bundle(e.to_string()))?;
    for i in 0..set.n() {
        let mut rec = vec![set.ids[i].clone()];
        // `{}` on f64 prints the shortest representation that round-trips
        rec.extend(set.data.row(i).iter().map(|v| format!("{v}")));
        w.write_record(&rec).map_err(|e| Error::Bundle(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
