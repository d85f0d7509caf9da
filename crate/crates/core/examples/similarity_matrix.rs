//! Pairwise similarity of several spaces; rotated copies recognize each
//! other among unrelated spaces.

use latent_fmaps::analysis::{similarity_matrix, SharedGuidance};
use latent_fmaps::embedio::EmbeddingSet;
use latent_fmaps::evalbench::{random_orthogonal, synthetic_pair};
use latent_fmaps::pipeline::PipelineConfig;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> latent_fmaps::Result<()> {
    let base = synthetic_pair(400, 16, 0.0, 9)?.x;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let rotated = EmbeddingSet::new(base.ids().to_vec(), base.data() * random_orthogonal(16, &mut rng))?;
    let other_a = EmbeddingSet::new(base.ids().to_vec(), synthetic_pair(400, 16, 0.0, 10)?.x.data().clone())?;
    let other_b = EmbeddingSet::new(base.ids().to_vec(), synthetic_pair(400, 16, 0.0, 11)?.x.data().clone())?;
    let spaces = [base, other_a, rotated, other_b];

    let cfg = PipelineConfig {
        k_neighbors: Some(25),
        n_eigen: 20,
        ..PipelineConfig::default()
    };
    let guidance = SharedGuidance::Anchors(vec![5, 80, 160, 240, 320]);
    let sm = similarity_matrix(&spaces, &guidance, &cfg, Some(&[2, 3, 0, 1]))?;
    for i in 0..4 {
        let row: Vec<String> = sm.scores.row(i).iter().map(|v| format!("{v:.3}")).collect();
        println!("{}   best {}", row.join("  "), sm.best_match[i]);
    }
    Ok(())
}
