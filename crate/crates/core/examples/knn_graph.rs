//! k-NN graph and normalized Laplacian of a synthetic embedding space.

use latent_fmaps::evalbench::synthetic_pair;
use latent_fmaps::latgraph::{build_knn_graph, normalized_laplacian, GraphConfig, Metric};

fn main() -> latent_fmaps::Result<()> {
    let pair = synthetic_pair(500, 32, 0.0, 1)?;
    for metric in [Metric::Angular, Metric::Euclidean] {
        let g = build_knn_graph(&pair.x, &GraphConfig::new(20, metric))?;
        let degrees: Vec<usize> = (0..g.n()).map(|i| g.degree_count(i)).collect();
        println!(
            "{metric:?}: {} edges, neighbor counts {}..{}, sigma {:.4}, repair edges {}",
            g.edge_count(),
            degrees.iter().min().unwrap(),
            degrees.iter().max().unwrap(),
            g.sigma().unwrap_or(f64::NAN),
            g.repair_edges()
        );
        let l = normalized_laplacian(&g)?;
        // D^{1/2} 1 is the null vector.
        let null: Vec<f64> = g.degrees().iter().map(|d| d.sqrt()).collect();
        let mut out = vec![0.0; g.n()];
        l.apply(&null, &mut out);
        println!("  |L D^1/2 1| = {:.3e}", out.iter().map(|v| v * v).sum::<f64>().sqrt());
    }
    Ok(())
}
