//! Depolarizing channel E_eps(rho) = (1 - eps) rho + (eps / n) I.

use crate::error::{Error, Result};
use crate::qcore::{DensityMatrix, C64};

/// Channel noise strength in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct NoiseParam(f64);

impl NoiseParam {
    pub fn new(eps: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::BadNoise(eps));
        }
        Ok(Self(eps))
    }

    pub const NOISELESS: NoiseParam = NoiseParam(0.0);

    pub fn value(self) -> f64 {
        self.0
    }
}

pub fn depolarize(rho: &DensityMatrix, eps: NoiseParam) -> DensityMatrix {
    let n = rho.dim();
    let e = eps.value();
    if e == 1.0 {
        return DensityMatrix::maximally_mixed(n);
    }
    let mut m = rho.matrix().scale_real(1.0 - e);
    let shift = e / n as f64;
    for i in 0..n {
        m[(i, i)] += C64::new(shift, 0.0);
    }
    DensityMatrix::new(m).expect("convex mixture of valid states")
}
