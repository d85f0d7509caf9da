//! A reduced noise benchmark grid printed as CSV.

use latent_fmaps::descriptors::DescriptorKind;
use latent_fmaps::evalbench::{bench_csv, noise_benchmark, BenchConfig};

fn main() -> latent_fmaps::Result<()> {
    let cfg = BenchConfig {
        n: 500,
        d: 32,
        noise_levels: vec![0.0, 0.2, 0.5],
        anchor_counts: vec![3, 10],
        descriptors: vec![DescriptorKind::AnchorGeodesic, DescriptorKind::LabelIndicator],
        ..BenchConfig::default()
    };
    print!("{}", bench_csv(&noise_benchmark(&cfg)?));
    Ok(())
}
