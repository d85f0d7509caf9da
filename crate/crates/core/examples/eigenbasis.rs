//! Leading Laplacian eigenpairs and the spectral projector.

use latent_fmaps::evalbench::synthetic_pair;
use latent_fmaps::latgraph::{build_knn_graph, normalized_laplacian, GraphConfig, Metric};
use latent_fmaps::spectral::eigenbasis;
use nalgebra::DMatrix;

fn main() -> latent_fmaps::Result<()> {
    let pair = synthetic_pair(1000, 64, 0.0, 2)?;
    let g = build_knn_graph(&pair.x, &GraphConfig::new(50, Metric::Angular))?;
    let basis = eigenbasis(&normalized_laplacian(&g)?, 30, 1e-8)?;
    println!("first eigenvalues: {:.4?}", &basis.eigenvalues()[..8]);
    println!("max residual: {:.2e}", basis.max_residual());

    // Smooth function: the first embedding coordinate.
    let f = DMatrix::from_fn(1000, 1, |i, _| pair.x.data()[(i, 0)]);
    let coeffs = basis.project(&f)?;
    let back = basis.reconstruct(&coeffs)?;
    println!(
        "energy kept by 30 eigenvectors: {:.1}%",
        100.0 * back.norm_squared() / f.norm_squared()
    );
    Ok(())
}
