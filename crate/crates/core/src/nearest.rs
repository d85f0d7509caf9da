//! Exact nearest-row search shared by pointwise-map extraction and
//! refinement.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        out.extend(m.row(i).iter());
    }
    out
}

/// For each row of `queries`, the index of the Euclidean-nearest row of
/// `database`. Ties go to the lowest index.
pub fn nearest_rows(queries: &DMatrix<f64>, database: &DMatrix<f64>) -> Result<Vec<usize>> {
    let k = queries.ncols();
    if database.ncols() != k {
        return Err(Error::shape("nearest rows", k, database.ncols()));
    }
    if database.nrows() == 0 {
        return Err(Error::InvalidInput("empty database".into()));
    }
    let q = row_major(queries);
    let db = row_major(database);
    let n_db = database.nrows();
    Ok((0..queries.nrows())
        .into_par_iter()
        .with_min_len(16)
        .map(|i| {
            let qi = &q[i * k..(i + 1) * k];
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for j in 0..n_db {
                let row = &db[j * k..(j + 1) * k];
                let mut d = 0.0;
                for (a, b) in qi.iter().zip(row) {
                    d += (a - b) * (a - b);
                }
                if d < best_d {
                    best_d = d;
                    best = j;
                }
            }
            best
        })
        .collect())
}
