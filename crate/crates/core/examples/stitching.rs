//! Zero-shot stitching: classify transformed source points with target
//! class centroids, guided only by class labels.

use latent_fmaps::descriptors::DescriptorKind;
use latent_fmaps::evalbench::{run_pair, stitching_accuracy, synthetic_pair};
use latent_fmaps::pipeline::PipelineConfig;
use latent_fmaps::transfer::{LinearTransform, TransformKind};
use nalgebra::{DMatrix, DVector};

fn main() -> latent_fmaps::Result<()> {
    let pair = synthetic_pair(1000, 64, 0.05, 8)?;
    let identity = LinearTransform {
        kind: TransformKind::Linear,
        matrix: DMatrix::identity(64, 64),
        offset: DVector::zeros(64),
    };
    let reference = stitching_accuracy(&pair.y, &identity, &pair.y, &pair.labels_y, &pair.labels_y)?;
    let unaligned = stitching_accuracy(&pair.x, &identity, &pair.y, &pair.labels_y, &pair.labels_x)?;
    println!("target on itself: {reference:.3}");
    println!("source without alignment: {unaligned:.3}");
    for descriptor in [DescriptorKind::LabelIndicator, DescriptorKind::AnchorGeodesic] {
        let cfg = PipelineConfig {
            descriptor,
            ..PipelineConfig::benchmark()
        };
        let run = run_pair(&pair, &cfg, 5)?;
        let acc = stitching_accuracy(&pair.x, &run.transform, &pair.y, &pair.labels_y, &pair.labels_x)?;
        println!("source through {descriptor} map: {acc:.3}");
    }
    Ok(())
}
