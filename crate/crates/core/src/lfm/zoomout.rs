use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{from_pointwise, FunctionalMap, Provenance};
use crate::error::{Error, Result};
use crate::nearest::nearest_rows;
use crate::spectral::SpectralBasis;
use crate::transfer::{Correspondence, CorrespondenceSource};

/// Growth plan for spectral upsampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZoomOutConfig {
    pub step_size: usize,
    pub target_size: usize,
}

impl Default for ZoomOutConfig {
    fn default() -> Self {
        Self {
            step_size: 5,
            target_size: 150,
        }
    }
}

impl ZoomOutConfig {
    /// Number of steps growing a `seed`-sized map towards `target_size`
    /// (clipped to `available`) without overshooting.
    pub fn steps(&self, seed: usize, available: usize) -> Result<usize> {
        if self.step_size == 0 {
            return Err(Error::InvalidConfig("zoomout step_size must be positive".into()));
        }
        if seed == 0 || seed > available {
            return Err(Error::InvalidConfig(format!("zoomout seed size {seed} outside 1..={available}")));
        }
        let target = self.target_size.min(available).max(seed);
        Ok((target - seed) / self.step_size)
    }
}

/// Pointwise maps visited during refinement: entry 0 comes from the seed
/// map, entry `i` from the map after `i` upsampling steps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZoomOutTrace {
    pub sizes: Vec<(usize, usize)>,
    pub assignments: Vec<Vec<usize>>,
}

/// Nearest row of `Phi_Y C` for every row of `Phi_X`, on leading columns.
pub(crate) fn pointwise_assignment(c: &DMatrix<f64>, bx: &SpectralBasis, by: &SpectralBasis) -> Result<Vec<usize>> {
    let (ky, kx) = c.shape();
    if kx > bx.k() || ky > by.k() {
        return Err(Error::shape(
            "map against bases",
            format!("at most {}x{}", by.k(), bx.k()),
            format!("{ky}x{kx}"),
        ));
    }
    let phi_x = bx.eigenvectors().columns(0, kx);
    let mapped = by.eigenvectors().columns(0, ky) * c;
    nearest_rows(&phi_x.into_owned(), &mapped)
}

/// Alternates pointwise extraction with re-encoding at `step_size` more
/// eigenvectors per side, `steps` times.
pub fn zoomout_refine(
    c0: &FunctionalMap,
    bx: &SpectralBasis,
    by: &SpectralBasis,
    steps: usize,
    step_size: usize,
) -> Result<(FunctionalMap, ZoomOutTrace)> {
    let (ky0, kx0) = (c0.k_y(), c0.k_x());
    let grow = steps * step_size;
    if kx0 + grow > bx.k() || ky0 + grow > by.k() {
        return Err(Error::InvalidConfig(format!(
            "bases of size {}/{} too small to grow a {ky0}x{kx0} map by {grow}",
            bx.k(),
            by.k()
        )));
    }
    let mut c = c0.matrix().clone();
    let mut trace = ZoomOutTrace {
        sizes: vec![(ky0, kx0)],
        assignments: Vec::with_capacity(steps + 1),
    };
    for s in 1..=steps {
        let assignment = pointwise_assignment(&c, bx, by)?;
        let (kx, ky) = (kx0 + s * step_size, ky0 + s * step_size);
        let corr = Correspondence::new(assignment.clone(), by.n(), CorrespondenceSource::Extracted)?;
        c = from_pointwise(&bx.truncated(kx)?, &by.truncated(ky)?, &corr)?.matrix().clone();
        trace.assignments.push(assignment);
        trace.sizes.push((ky, kx));
    }
    trace.assignments.push(pointwise_assignment(&c, bx, by)?);
    let map = FunctionalMap::new(
        c,
        Provenance::Refined {
            seed_size: (ky0, kx0),
            steps,
            step_size,
        },
    )?;
    Ok((map, trace))
}
