//! Spectral upsampling of a noisy map.

use latent_fmaps::evalbench::synthetic_pair;
use latent_fmaps::lfm::{from_pointwise, zoomout_refine, FunctionalMap, Provenance};
use latent_fmaps::pipeline::{PipelineConfig, SpaceModel};
use latent_fmaps::transfer::extract_pointwise;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> latent_fmaps::Result<()> {
    let pair = synthetic_pair(1000, 64, 0.0, 5)?;
    let cfg = PipelineConfig {
        n_eigen: 60,
        ..PipelineConfig::benchmark()
    };
    let mx = SpaceModel::build(&pair.x, &cfg)?;
    let my = SpaceModel::build(&pair.y, &cfg)?;
    let (bx, by) = (mx.basis.truncated(20)?, my.basis.truncated(20)?);

    let clean = from_pointwise(&bx, &by, &pair.ground_truth)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let noise = DMatrix::from_fn(20, 20, |_, _| rng.random_range(-0.3..0.3));
    let seed = FunctionalMap::new(clean.matrix() + noise, Provenance::FromPointwise)?;
    let before = extract_pointwise(&seed, &bx, &by)?.accuracy(&pair.ground_truth)?;

    let (refined, trace) = zoomout_refine(&seed, &mx.basis, &my.basis, 8, 5)?;
    let after = extract_pointwise(&refined, &mx.basis, &my.basis)?.accuracy(&pair.ground_truth)?;
    println!("sizes {:?}", trace.sizes);
    println!("pointwise accuracy {before:.3} -> {after:.3}");
    Ok(())
}
