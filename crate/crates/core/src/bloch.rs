//! Generalized Gell-Mann basis and Bloch-vector decomposition.
//!
//! With the normalization tr(l_i l_j) = 2 delta_ij, a state decomposes as
//! rho = (I + c * sum_i r_i l_i) / n with c = sqrt(n(n-1)/2), which makes
//! tr(rho^2) = (1 + (n-1)|r|^2) / n. For n > 2 the unit ball contains
//! vectors whose reconstruction is not positive semidefinite.

use crate::error::{Error, Result};
use crate::qcore::{eigvals_hermitian, ComplexMatrix, DensityMatrix, C64, PSD_TOL};

/// Bound on |r| accepted by [`BlochVector::new`].
pub const BLOCH_NORM_TOL: f64 = 1e-10;

/// Which family a basis element belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GellMannKind {
    /// Diagonal, 1-based level j in 1..n.
    Diagonal(usize),
    /// pi_jk + pi_kj.
    Symmetric(usize, usize),
    /// -i(pi_jk - pi_kj).
    Antisymmetric(usize, usize),
}

/// The n^2 - 1 generalized Gell-Mann operators: all diagonal ones, then the
/// symmetric ones for j < k row-major, then the antisymmetric ones.
#[derive(Debug, Clone)]
pub struct GellMannBasis {
    n: usize,
    kinds: Vec<GellMannKind>,
    operators: Vec<ComplexMatrix>,
}

impl GellMannBasis {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    pub fn operators(&self) -> &[ComplexMatrix] {
        &self.operators
    }

    pub fn kinds(&self) -> &[GellMannKind] {
        &self.kinds
    }

    /// sqrt(n(n-1)/2).
    pub fn bloch_coefficient(&self) -> f64 {
        bloch_coefficient(self.n)
    }
}

pub fn bloch_coefficient(n: usize) -> f64 {
    ((n * (n - 1)) as f64 / 2.0).sqrt()
}

pub fn build_basis(n: usize) -> Result<GellMannBasis> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("Gell-Mann basis needs n >= 2, got {n}")));
    }
    let mut kinds = Vec::with_capacity(n * n - 1);
    let mut operators = Vec::with_capacity(n * n - 1);

    for j in 1..n {
        let scale = (2.0 / (j * (j + 1)) as f64).sqrt();
        let mut m = ComplexMatrix::zeros(n, n);
        for k in 0..j {
            m[(k, k)] = C64::new(scale, 0.0);
        }
        m[(j, j)] = C64::new(-(j as f64) * scale, 0.0);
        kinds.push(GellMannKind::Diagonal(j));
        operators.push(m);
    }
    for j in 0..n {
        for k in j + 1..n {
            let mut m = ComplexMatrix::zeros(n, n);
            m[(j, k)] = C64::new(1.0, 0.0);
            m[(k, j)] = C64::new(1.0, 0.0);
            kinds.push(GellMannKind::Symmetric(j, k));
            operators.push(m);
        }
    }
    for j in 0..n {
        for k in j + 1..n {
            let mut m = ComplexMatrix::zeros(n, n);
            m[(j, k)] = C64::new(0.0, -1.0);
            m[(k, j)] = C64::new(0.0, 1.0);
            kinds.push(GellMannKind::Antisymmetric(j, k));
            operators.push(m);
        }
    }
    Ok(GellMannBasis { n, kinds, operators })
}

/// Real coefficient vector with |r| <= 1.
#[derive(Debug, Clone, PartialEq)]
pub struct BlochVector {
    n: usize,
    r: Vec<f64>,
}

impl BlochVector {
    pub fn new(n: usize, r: Vec<f64>) -> Result<Self> {
        if n < 2 || r.len() != n * n - 1 {
            return Err(Error::DimensionMismatch(format!(
                "{} Bloch components for n = {n}",
                r.len()
            )));
        }
        let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm <= 1.0 + BLOCH_NORM_TOL) {
            return Err(Error::InvalidArgument(format!("Bloch vector norm {norm} exceeds 1")));
        }
        Ok(Self { n, r })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn components(&self) -> &[f64] {
        &self.r
    }

    pub fn norm(&self) -> f64 {
        self.r.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

pub fn bloch_of(rho: &DensityMatrix, basis: &GellMannBasis) -> Result<BlochVector> {
    let n = rho.dim();
    if n != basis.n {
        return Err(Error::DimensionMismatch(format!("state dim {n} vs basis dim {}", basis.n)));
    }
    let scale = n as f64 / (2.0 * basis.bloch_coefficient());
    let r = basis
        .operators
        .iter()
        .map(|op| rho.matrix().trace_product(op).map(|t| t.re * scale))
        .collect::<Result<Vec<_>>>()?;
    // Valid states satisfy |r| <= 1; clamp only rounding overshoot.
    let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
    let r = if norm > 1.0 && norm <= 1.0 + BLOCH_NORM_TOL {
        r.iter().map(|x| x / norm).collect()
    } else {
        r
    };
    BlochVector::new(n, r)
}

/// Matrix rebuilt from a Bloch vector, with its physicality verdict.
#[derive(Debug, Clone)]
pub struct BlochReconstruction {
    pub matrix: ComplexMatrix,
    pub min_eigenvalue: f64,
}

impl BlochReconstruction {
    pub fn is_valid(&self) -> bool {
        self.min_eigenvalue >= -PSD_TOL
    }

    pub fn into_density(self) -> Result<DensityMatrix> {
        DensityMatrix::new(self.matrix)
    }
}

pub fn rho_of_bloch(r: &BlochVector, basis: &GellMannBasis) -> Result<BlochReconstruction> {
    let n = basis.n;
    if r.n != n {
        return Err(Error::DimensionMismatch(format!("Bloch dim {} vs basis dim {n}", r.n)));
    }
    let c = basis.bloch_coefficient();
    let mut m = ComplexMatrix::identity(n);
    for (op, &ri) in basis.operators.iter().zip(&r.r) {
        if ri == 0.0 {
            continue;
        }
        for (dst, src) in m.entries_mut().iter_mut().zip(op.entries()) {
            *dst += src * (c * ri);
        }
    }
    let matrix = m.scale_real(1.0 / n as f64);
    let min_eigenvalue = eigvals_hermitian(&matrix)?[0];
    Ok(BlochReconstruction { matrix, min_eigenvalue })
}

/// (1 + (n-1)|r|^2) / n.
pub fn purity_from_bloch(r: &BlochVector) -> f64 {
    let n = r.n as f64;
    (1.0 + (n - 1.0) * r.norm().powi(2)) / n
}
