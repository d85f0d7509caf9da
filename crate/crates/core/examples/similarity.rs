//! Map similarity score and per-point distortion.

use latent_fmaps::analysis::{distortion_function, lfm_similarity};
use latent_fmaps::embedio::EmbeddingSet;
use latent_fmaps::evalbench::{pooled_std, sample_mixture, synthetic_pair, MixtureSpec};
use latent_fmaps::lfm::from_pointwise;
use latent_fmaps::pipeline::{PipelineConfig, SpaceModel};
use latent_fmaps::transfer::Correspondence;
use nalgebra::RowDVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> latent_fmaps::Result<()> {
    let cfg = PipelineConfig {
        k_neighbors: Some(40),
        ..PipelineConfig::benchmark()
    };

    for noise in [0.0, 0.3, 1.0] {
        let pair = synthetic_pair(800, 32, noise, 6)?;
        let mx = SpaceModel::build(&pair.x, &cfg)?;
        let my = SpaceModel::build(&pair.y, &cfg)?;
        let c = from_pointwise(&mx.basis.truncated(30)?, &my.basis.truncated(30)?, &pair.ground_truth)?;
        println!("noise {noise}: similarity {:.4}", lfm_similarity(&c)?.score);
    }

    // One class pushed outward by 4 sigma: distortion concentrates on it.
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (data, labels) = sample_mixture(1000, 64, &MixtureSpec::default(), &mut rng)?;
    let members: Vec<usize> = (0..1000).filter(|&i| labels[i] == 0).collect();
    let centroid = members.iter().fold(RowDVector::zeros(64), |acc, &i| acc + data.row(i)) / members.len() as f64;
    let dir = centroid - data.row_mean();
    let shift = &dir * (4.0 * pooled_std(&data) / dir.norm());
    let mut moved = data.clone();
    for &i in &members {
        let mut r = moved.row_mut(i);
        r += &shift;
    }
    let build = |m| SpaceModel::build(&EmbeddingSet::from_matrix(m)?, &PipelineConfig::default());
    let (mx, my) = (build(data)?, build(moved)?);
    let by = my.basis.truncated(30)?;
    let c = from_pointwise(&mx.basis.truncated(30)?, &by, &Correspondence::identity(1000))?;
    let d = distortion_function(&c, &by)?;
    let mean = |cls: bool| {
        let v: Vec<f64> = d.iter().zip(&labels).filter(|(_, &l)| (l == 0) == cls).map(|(v, _)| v.abs()).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    println!("mean |distortion|: shifted class {:.3}, others {:.3}", mean(true), mean(false));
    Ok(())
}
