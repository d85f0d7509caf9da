//! The descriptor families on a pair of spaces, side by side.

use latent_fmaps::descriptors::DescriptorKind;
use latent_fmaps::evalbench::synthetic_pair;
use latent_fmaps::pipeline::{pair_descriptors, Guidance, PipelineConfig, SpaceModel};

fn main() -> latent_fmaps::Result<()> {
    let pair = synthetic_pair(600, 32, 0.1, 3)?;
    let cfg = PipelineConfig::benchmark();
    let mx = SpaceModel::build(&pair.x, &cfg)?;
    let my = SpaceModel::build(&pair.y, &cfg)?;
    let anchors = pair.anchors(5, 0)?;

    for kind in [
        DescriptorKind::AnchorGeodesic,
        DescriptorKind::AnchorMetric,
        DescriptorKind::LabelIndicator,
        DescriptorKind::Hks,
        DescriptorKind::Wks,
    ] {
        let guidance = match kind {
            DescriptorKind::AnchorGeodesic | DescriptorKind::AnchorMetric => Guidance::Anchors(&anchors),
            DescriptorKind::LabelIndicator => Guidance::Labels(&pair.labels_x, &pair.labels_y),
            _ => Guidance::None,
        };
        let (fx, fy) = pair_descriptors(&pair.x, &mx, &pair.y, &my, kind, &guidance)?;
        // Compare the descriptor of a point with that of its true image.
        let gt = pair.ground_truth.assignment();
        let gap = (0..fx.n())
            .map(|i| (fx.values.row(i) - fy.values.row(gt[i])).norm())
            .sum::<f64>()
            / fx.n() as f64;
        println!("{kind:<16} {:>3} columns, mean gap to true image {gap:.4}", fx.count());
    }
    Ok(())
}
