//! Cholesky-packed encoding of a unit latent vector into a density matrix.
//!
//! The n x n lower-triangular factor `L` has n real diagonal entries and
//! n(n-1)/2 complex entries below the diagonal, exactly n^2 real degrees of
//! freedom. Latent components fill the diagonal first, then the strictly
//! lower triangle in row-major order (L_10, L_20, L_21, L_30, ...), each
//! complex entry consuming a (re, im) pair. Unfilled slots stay zero, so
//! ||L||_F = ||y||_2 and tr(L L^H) = 1 for a unit latent.

use crate::error::{Error, Result};
use crate::qcore::{ComplexMatrix, DensityMatrix, C64, ZERO};

/// Tolerance on the latent vector norm.
pub const UNIT_NORM_TOL: f64 = 1e-10;

/// Diagonal jitter ladder tried when plain Cholesky fails.
pub const JITTER_LADDER: [f64; 3] = [1e-14, 1e-12, 1e-10];

/// Pivots and residual column entries at or below this size are treated as
/// an exactly rank-deficient column.
const ZERO_PIVOT_TOL: f64 = 1e-14;

/// Real unit vector y on the (N-1)-sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentVector {
    values: Vec<f64>,
}

impl LatentVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("empty latent vector".into()));
        }
        let norm = l2(&values);
        if !((norm - 1.0).abs() <= UNIT_NORM_TOL) {
            return Err(Error::NotUnitNorm { norm });
        }
        Ok(Self { values })
    }

    /// Projects a nonzero vector onto the unit sphere.
    pub fn normalized(values: &[f64]) -> Result<Self> {
        let norm = l2(values);
        if !(norm > 1e-12) {
            return Err(Error::VanishingNorm(norm));
        }
        Ok(Self { values: values.iter().map(|v| v / norm).collect() })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Where one real latent component lands in `L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Diag(usize),
    Re(usize, usize),
    Im(usize, usize),
}

/// The n^2 slots of an n x n factor in packing order.
pub fn slot_layout(n: usize) -> Vec<Slot> {
    let mut slots: Vec<Slot> = (0..n).map(Slot::Diag).collect();
    for j in 1..n {
        for k in 0..j {
            slots.push(Slot::Re(j, k));
            slots.push(Slot::Im(j, k));
        }
    }
    slots
}

/// Smallest n with n^2 >= N.
pub fn min_dim(latent_dim: usize) -> usize {
    assert!(latent_dim >= 1, "latent dimension must be positive");
    let mut n = (latent_dim as f64).sqrt().ceil() as usize;
    while n * n < latent_dim {
        n += 1;
    }
    while n > 1 && (n - 1) * (n - 1) >= latent_dim {
        n -= 1;
    }
    n
}

/// Lower-triangular factor with real diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct PackedTriangular {
    l: ComplexMatrix,
}

impl PackedTriangular {
    pub fn new(l: ComplexMatrix) -> Result<Self> {
        if !l.is_square() {
            return Err(Error::NotSquare { rows: l.rows(), cols: l.cols() });
        }
        let n = l.rows();
        for j in 0..n {
            if l[(j, j)].im != 0.0 {
                return Err(Error::InvalidArgument(format!("diagonal entry {j} is not real")));
            }
            for k in j + 1..n {
                if l[(j, k)] != ZERO {
                    return Err(Error::InvalidArgument(format!("entry ({j}, {k}) above the diagonal")));
                }
            }
        }
        Ok(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.l
    }

    /// Reads the first `latent_dim` slots back out.
    pub fn unpack(&self, latent_dim: usize) -> Vec<f64> {
        slot_layout(self.dim())
            .into_iter()
            .take(latent_dim)
            .map(|s| match s {
                Slot::Diag(k) => self.l[(k, k)].re,
                Slot::Re(j, k) => self.l[(j, k)].re,
                Slot::Im(j, k) => self.l[(j, k)].im,
            })
            .collect()
    }

    /// L L^H.
    pub fn gram(&self) -> ComplexMatrix {
        lower_gram(&self.l)
    }
}

/// Packs raw components without the unit-norm check.
pub fn pack_values(values: &[f64], n: usize) -> Result<PackedTriangular> {
    if n == 0 || n * n < values.len() {
        return Err(Error::DimensionTooSmall { len: values.len(), n });
    }
    let mut l = ComplexMatrix::zeros(n, n);
    for (slot, &v) in slot_layout(n).into_iter().zip(values) {
        match slot {
            Slot::Diag(k) => l[(k, k)].re = v,
            Slot::Re(j, k) => l[(j, k)].re = v,
            Slot::Im(j, k) => l[(j, k)].im = v,
        }
    }
    Ok(PackedTriangular { l })
}

pub fn pack(y: &LatentVector, n: usize) -> Result<PackedTriangular> {
    pack_values(y.values(), n)
}

/// L L^H exploiting the triangular structure.
fn lower_gram(l: &ComplexMatrix) -> ComplexMatrix {
    let n = l.rows();
    let mut out = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        for k in 0..=j {
            let mut acc = ZERO;
            for m in 0..=k {
                acc += l[(j, m)] * l[(k, m)].conj();
            }
            out[(j, k)] = acc;
            out[(k, j)] = acc.conj();
        }
        out[(j, j)].im = 0.0;
    }
    out
}

/// rho = L L^H for L = pack(y, n).
pub fn encode(y: &LatentVector, n: usize) -> Result<DensityMatrix> {
    DensityMatrix::new(pack(y, n)?.gram())
}

/// Cholesky factor with nonnegative diagonal, unpacked to `latent_dim` reals.
///
/// Exactly rank-deficient columns (zero pivot and zero residual column) are
/// factored with a zero diagonal; any other failure retries with the jitter
/// ladder before giving up.
pub fn decode(rho: &DensityMatrix, latent_dim: usize) -> Result<Vec<f64>> {
    let n = rho.dim();
    if latent_dim > n * n {
        return Err(Error::DimensionTooSmall { len: latent_dim, n });
    }
    let l = cholesky_with_jitter(rho.matrix())?;
    Ok(l.unpack(latent_dim))
}

pub fn cholesky_with_jitter(a: &ComplexMatrix) -> Result<PackedTriangular> {
    if let Some(l) = cholesky(a) {
        return Ok(PackedTriangular { l });
    }
    for delta in JITTER_LADDER {
        let mut shifted = a.clone();
        for i in 0..a.rows() {
            shifted[(i, i)] += delta;
        }
        if let Some(l) = cholesky(&shifted) {
            return Ok(PackedTriangular { l });
        }
    }
    Err(Error::SingularInput)
}

fn cholesky(a: &ComplexMatrix) -> Option<ComplexMatrix> {
    let n = a.rows();
    let mut l = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        let mut pivot = a[(j, j)].re;
        for k in 0..j {
            pivot -= l[(j, k)].norm_sqr();
        }
        let residual: Vec<C64> = (j + 1..n)
            .map(|i| {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)].conj();
                }
                s
            })
            .collect();
        if pivot > ZERO_PIVOT_TOL {
            let d = pivot.sqrt();
            l[(j, j)] = C64::new(d, 0.0);
            for (i, s) in (j + 1..n).zip(residual) {
                l[(i, j)] = s / d;
            }
        } else if pivot.abs() <= ZERO_PIVOT_TOL && residual.iter().all(|s| s.norm() <= ZERO_PIVOT_TOL) {
            // column stays zero
        } else {
            return None;
        }
    }
    Some(l)
}
