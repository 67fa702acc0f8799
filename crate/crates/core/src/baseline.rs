//! QPIE amplitude-encoding baseline.
//!
//! Pixel values become the amplitudes of a pure state on D = 2^ceil(log2(HW))
//! levels. Decoding reads the computational-basis distribution, undoes the
//! depolarizing shift with the known noise level and rescales by the image
//! norm, which QPIE cannot recover and is carried as side information.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::channel::NoiseParam;
use crate::dataset::Image;
use crate::error::{Error, Result};
use crate::qcore::{ComplexMatrix, DensityMatrix, C64};

/// Unit-norm nonnegative amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeState {
    amplitudes: Vec<f64>,
}

impl AmplitudeState {
    pub fn from_image(image: &Image) -> Result<(Self, f64)> {
        let norm = image.pixels.iter().map(|p| p * p).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidArgument("QPIE cannot encode an all-zero image".into()));
        }
        let dim = image.len().next_power_of_two();
        let mut amplitudes = vec![0.0; dim];
        for (a, p) in amplitudes.iter_mut().zip(&image.pixels) {
            *a = p / norm;
        }
        Ok((Self { amplitudes }, norm))
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn density(&self) -> DensityMatrix {
        let psi: Vec<C64> = self.amplitudes.iter().map(|&a| C64::new(a, 0.0)).collect();
        DensityMatrix::new(ComplexMatrix::outer(&psi, &psi)).expect("unit pure state")
    }
}

/// Encoded image: the pure state plus the classical side information.
#[derive(Debug, Clone)]
pub struct QpieEncoding {
    pub rho: DensityMatrix,
    pub norm: f64,
    pub height: usize,
    pub width: usize,
}

pub fn qpie_encode(image: &Image) -> Result<QpieEncoding> {
    let (state, norm) = AmplitudeState::from_image(image)?;
    Ok(QpieEncoding { rho: state.density(), norm, height: image.height, width: image.width })
}

/// Inverts p = (1 - eps) c^2 + eps / D on the pixel entries and rescales to
/// the stored norm. At eps = 1 every pixel is set to the RMS level
/// norm / sqrt(HW). Pixels are clamped to [0, 1].
pub fn decode_distribution(probs: &[f64], eps: NoiseParam, norm: f64, height: usize, width: usize) -> Result<Image> {
    let pixels = height * width;
    if probs.len() < pixels {
        return Err(Error::DimensionMismatch(format!("{} probabilities for {pixels} pixels", probs.len())));
    }
    let d = probs.len() as f64;
    let e = eps.value();
    if e >= 1.0 {
        let level = (norm / (pixels as f64).sqrt()).clamp(0.0, 1.0);
        return Image::new(height, width, vec![level; pixels]);
    }
    let amps: Vec<f64> = probs[..pixels].iter().map(|p| ((p - e / d) / (1.0 - e)).max(0.0).sqrt()).collect();
    let amp_norm = amps.iter().map(|a| a * a).sum::<f64>().sqrt();
    let out = if amp_norm > 0.0 {
        amps.iter().map(|a| (a / amp_norm * norm).clamp(0.0, 1.0)).collect()
    } else {
        vec![0.0; pixels]
    };
    Image::new(height, width, out)
}

/// Exact-diagonal decoder.
pub fn qpie_decode(rho_noisy: &DensityMatrix, eps: NoiseParam, norm: f64, height: usize, width: usize) -> Result<Image> {
    let probs: Vec<f64> = (0..rho_noisy.dim()).map(|i| rho_noisy.matrix()[(i, i)].re).collect();
    decode_distribution(&probs, eps, norm, height, width)
}

/// Finite-shot decoder: the diagonal is replaced by empirical frequencies of
/// `shots` computational-basis measurements.
pub fn qpie_decode_sampled(
    rho_noisy: &DensityMatrix,
    eps: NoiseParam,
    shots: u64,
    seed: u64,
    norm: f64,
    height: usize,
    width: usize,
) -> Result<Image> {
    if shots == 0 {
        return Err(Error::InvalidArgument("at least one shot is required".into()));
    }
    let probs: Vec<f64> = (0..rho_noisy.dim()).map(|i| rho_noisy.matrix()[(i, i)].re.max(0.0)).collect();
    let counts = multinomial(&probs, shots, seed)?;
    let freqs: Vec<f64> = counts.iter().map(|&c| c as f64 / shots as f64).collect();
    decode_distribution(&freqs, eps, norm, height, width)
}

/// Multinomial counts by sequential conditional binomials.
fn multinomial(probs: &[f64], shots: u64, seed: u64) -> Result<Vec<u64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut remaining = shots;
    let mut mass: f64 = probs.iter().sum();
    let mut counts = vec![0u64; probs.len()];
    for (i, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i + 1 == probs.len() || mass <= 0.0 {
            counts[i] = remaining;
            break;
        }
        let q = (p / mass).clamp(0.0, 1.0);
        let draw = Binomial::new(remaining, q).map_err(|e| Error::InvalidArgument(e.to_string()))?.sample(&mut rng);
        counts[i] = draw;
        remaining -= draw;
        mass -= p;
    }
    Ok(counts)
}
