//! Solves a latent functional map from five anchor pairs.

use latent_fmaps::descriptors::DescriptorKind;
use latent_fmaps::evalbench::synthetic_pair;
use latent_fmaps::lfm::{from_pointwise, solve_lfm};
use latent_fmaps::pipeline::{pair_descriptors, Guidance, PipelineConfig, SpaceModel};

fn main() -> latent_fmaps::Result<()> {
    let pair = synthetic_pair(1000, 64, 0.0, 4)?;
    let cfg = PipelineConfig::benchmark();
    let mx = SpaceModel::build(&pair.x, &cfg)?;
    let my = SpaceModel::build(&pair.y, &cfg)?;
    let anchors = pair.anchors(5, cfg.seed)?;
    let (fx, fy) = pair_descriptors(&pair.x, &mx, &pair.y, &my, DescriptorKind::AnchorGeodesic, &Guidance::Anchors(&anchors))?;

    let bx = mx.basis.truncated(cfg.n_eigen)?;
    let by = my.basis.truncated(cfg.n_eigen)?;
    let (map, report) = solve_lfm(&bx, &by, &fx, &fy, &cfg.solver)?;
    println!("{:?} solve, {} iterations, objective {:.4e}", report.method, report.iterations, report.objective.total);

    let truth = from_pointwise(&bx, &by, &pair.ground_truth)?;
    let err = (map.matrix() - truth.matrix()).norm() / truth.matrix().norm();
    println!("relative distance to the ground-truth map: {err:.3}");
    Ok(())
}
