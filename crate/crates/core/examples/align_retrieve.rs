//! Map-derived correspondence versus anchors alone, measured by retrieval.

use latent_fmaps::evalbench::{anchor_only_retrieval, run_pair, synthetic_pair};
use latent_fmaps::pipeline::PipelineConfig;
use latent_fmaps::transfer::TransformKind;

fn main() -> latent_fmaps::Result<()> {
    let cfg = PipelineConfig::benchmark();
    println!("noise  anchors  map+procrustes  anchors-only");
    for noise in [0.0, 0.1, 0.3] {
        let pair = synthetic_pair(1000, 64, noise, 7)?;
        for anchors in [3, 5, 10] {
            let run = run_pair(&pair, &cfg, anchors)?;
            let base = anchor_only_retrieval(&pair, anchors, TransformKind::Orthogonal, cfg.seed)?;
            println!("{noise:<6} {anchors:<8} {:<15.4} {:.4}", run.retrieval.mrr, base.mrr);
        }
    }
    Ok(())
}
