//! Writes graph, basis and map bundles to a directory and reads them back.

use latent_fmaps::embedio::{load_bundle, save_bundle, Artifact, BundleProvenance};
use latent_fmaps::evalbench::run_pair;
use latent_fmaps::evalbench::synthetic_pair;
use latent_fmaps::pipeline::{PipelineConfig, SpaceModel};

fn main() -> latent_fmaps::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "target/bundles".into());
    let dir = std::path::Path::new(&dir);
    let cfg = PipelineConfig::benchmark();
    let pair = synthetic_pair(500, 32, 0.0, 12)?;
    let model = SpaceModel::build(&pair.x, &cfg)?;
    let run = run_pair(&pair, &cfg, 5)?;
    let prov = BundleProvenance::with_config(serde_json::to_value(&cfg).expect("config serializes"));

    let artifacts = [
        ("graph", Artifact::Graph(model.graph)),
        ("basis", Artifact::Basis(model.basis)),
        ("map", Artifact::Map(run.fit.map)),
        ("transform", Artifact::Transform(run.transform)),
    ];
    for (name, artifact) in &artifacts {
        let path = dir.join(name);
        save_bundle(artifact, &path, &prov)?;
        let (back, meta) = load_bundle(&path)?;
        println!("{:<10} {:?} v{} files {:?} identical: {}", name, meta.kind, meta.version, meta.files.keys().collect::<Vec<_>>(), &back == artifact);
    }
    Ok(())
}
