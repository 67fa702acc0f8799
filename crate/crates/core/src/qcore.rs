//! Dense complex linear algebra and the density-matrix type.
//!
//! Matrices are small (n <= 64) and stored row-major. The Hermitian
//! eigensolver reduces to a real symmetric tridiagonal matrix with complex
//! Householder reflections and a diagonal phase change, then runs implicit QL.

use std::ops::{Index, IndexMut};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Maximum tolerated asymmetry |a_jk - conj(a_kj)| for a density matrix.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Maximum tolerated |tr(rho) - 1|.
pub const TRACE_TOL: f64 = 1e-10;
/// Minimum tolerated eigenvalue of a density matrix.
pub const PSD_TOL: f64 = 1e-10;

/// Dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument("matrix dimensions must be positive".into()));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        m
    }

    /// Builds a matrix from nested rows of `(re, im)` pairs.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Self::new(r, c, rows.concat())
    }

    /// Outer product |u><v|.
    pub fn outer(u: &[C64], v: &[C64]) -> Self {
        let mut m = Self::zeros(u.len(), v.len());
        for (i, a) in u.iter().enumerate() {
            for (j, b) in v.iter().enumerate() {
                m[(i, j)] = a * b.conj();
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn entries(&self) -> &[C64] {
        &self.data
    }

    pub fn entries_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_entries(self) -> Vec<C64> {
        self.data
    }

    pub fn dagger(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(C64, C64) -> C64) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { rows: self.rows, cols: self.cols, data })
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let row = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[C64]) -> Result<Vec<C64>> {
        if self.cols != v.len() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix times length-{} vector",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows)
            .map(|i| self.data[i * self.cols..(i + 1) * self.cols].iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn trace(&self) -> Result<C64> {
        if !self.is_square() {
            return Err(Error::NotSquare { rows: self.rows, cols: self.cols });
        }
        Ok((0..self.rows).map(|i| self[(i, i)]).sum())
    }

    /// tr(self * other) without forming the product.
    pub fn trace_product(&self, other: &Self) -> Result<C64> {
        if self.cols != other.rows || self.rows != other.cols {
            return Err(Error::DimensionMismatch(format!(
                "tr of {}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut acc = ZERO;
        for i in 0..self.rows {
            for k in 0..self.cols {
                acc += self.data[i * self.cols + k] * other.data[k * other.cols + i];
            }
        }
        Ok(acc)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(C64::norm_sqr).sum::<f64>().sqrt()
    }

    /// max_{jk} |a_jk - conj(a_kj)|, or infinity for non-square input.
    pub fn hermitian_asymmetry(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut worst = 0.0f64;
        for j in 0..n {
            for k in j..n {
                worst = worst.max((self[(j, k)] - self[(k, j)].conj()).norm());
            }
        }
        worst
    }

    pub fn kron(&self, other: &Self) -> Self {
        let rows = self.rows * other.rows;
        let cols = self.cols * other.cols;
        let mut out = Self::zeros(rows, cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self[(i, j)];
                for k in 0..other.rows {
                    for l in 0..other.cols {
                        out[(i * other.rows + k, j * other.cols + l)] = a * other[(k, l)];
                    }
                }
            }
        }
        out
    }

    /// Max entrywise modulus of the difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.rows != other.rows || self.cols != other.cols {
            return f64::INFINITY;
        }
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Free-function forms of the basic operations.
pub fn matmul(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    a.matmul(b)
}

pub fn trace(a: &ComplexMatrix) -> Result<C64> {
    a.trace()
}

pub fn frobenius_norm(a: &ComplexMatrix) -> f64 {
    a.frobenius_norm()
}

/// Eigendecomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Column k is the unit eigenvector for `values[k]`.
    pub vectors: ComplexMatrix,
}

const EIG_INPUT_TOL: f64 = 1e-10;

fn check_hermitian_input(a: &ComplexMatrix) -> Result<()> {
    if !a.is_square() {
        return Err(Error::NotSquare { rows: a.rows, cols: a.cols });
    }
    let asym = a.hermitian_asymmetry();
    if asym > EIG_INPUT_TOL * a.frobenius_norm().max(1.0) {
        return Err(Error::NotHermitian { asymmetry: asym });
    }
    Ok(())
}

pub fn eig_hermitian(a: &ComplexMatrix) -> Result<HermitianEigen> {
    check_hermitian_input(a)?;
    let (values, vectors) = hermitian_eigen(a, true);
    Ok(HermitianEigen { values, vectors: vectors.expect("vectors requested") })
}

/// Ascending eigenvalues only; skips eigenvector accumulation.
pub fn eigvals_hermitian(a: &ComplexMatrix) -> Result<Vec<f64>> {
    check_hermitian_input(a)?;
    Ok(hermitian_eigen(a, false).0)
}

fn hermitian_eigen(a: &ComplexMatrix, want_vectors: bool) -> (Vec<f64>, Option<ComplexMatrix>) {
    let n = a.rows;
    // Work on the Hermitian part so the lower triangle alone is authoritative.
    let mut w = a.clone();
    for j in 0..n {
        w[(j, j)] = C64::new(w[(j, j)].re, 0.0);
        for k in 0..j {
            let avg = (w[(j, k)] + w[(k, j)].conj()) * 0.5;
            w[(j, k)] = avg;
            w[(k, j)] = avg.conj();
        }
    }
    let mut q = want_vectors.then(|| ComplexMatrix::identity(n));

    let mut v = vec![ZERO; n];
    let mut p = vec![ZERO; n];
    for k in 0..n.saturating_sub(2) {
        let m = n - k - 1;
        let x0 = w[(k + 1, k)];
        let norm_x = (k + 1..n).map(|i| w[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if norm_x == 0.0 {
            continue;
        }
        let phase = if x0.norm() > 0.0 { x0 / x0.norm() } else { ONE };
        let alpha = -phase * norm_x;
        for (idx, i) in (k + 1..n).enumerate() {
            v[idx] = w[(i, k)];
        }
        v[0] -= alpha;
        let vnorm = v[..m].iter().map(C64::norm_sqr).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        for z in &mut v[..m] {
            *z /= vnorm;
        }
        // p = B v for the trailing block B.
        for (ii, i) in (k + 1..n).enumerate() {
            p[ii] = (k + 1..n).zip(&v[..m]).map(|(j, vj)| w[(i, j)] * vj).sum();
        }
        let kappa: C64 = v[..m].iter().zip(&p[..m]).map(|(a, b)| a.conj() * b).sum();
        for ii in 0..m {
            p[ii] -= kappa * v[ii];
        }
        // B <- B - 2 v p^H - 2 p v^H
        for ii in 0..m {
            for jj in 0..m {
                let upd = 2.0 * (v[ii] * p[jj].conj() + p[ii] * v[jj].conj());
                w[(k + 1 + ii, k + 1 + jj)] -= upd;
            }
        }
        w[(k + 1, k)] = alpha;
        w[(k, k + 1)] = alpha.conj();
        for i in k + 2..n {
            w[(i, k)] = ZERO;
            w[(k, i)] = ZERO;
        }
        if let Some(q) = q.as_mut() {
            // Q <- Q (I - 2 v v^H) on columns k+1..n
            for r in 0..n {
                let dot: C64 = (0..m).map(|jj| q[(r, k + 1 + jj)] * v[jj]).sum();
                for jj in 0..m {
                    q[(r, k + 1 + jj)] -= 2.0 * dot * v[jj].conj();
                }
            }
        }
    }

    let mut d: Vec<f64> = (0..n).map(|i| w[(i, i)].re).collect();
    let mut e = vec![0.0; n];
    let mut phases = vec![ONE; n];
    for i in 0..n.saturating_sub(1) {
        let off = w[(i + 1, i)];
        let mag = off.norm();
        e[i] = mag;
        phases[i + 1] = if mag > 0.0 { phases[i] * (off / mag) } else { phases[i] };
    }

    let mut z = want_vectors.then(|| {
        let mut z = vec![0.0; n * n];
        for i in 0..n {
            z[i * n + i] = 1.0;
        }
        z
    });
    tql2(&mut d, &mut e, z.as_deref_mut(), n);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| d[i]).collect();

    let vectors = match (q, z) {
        (Some(q), Some(z)) => {
            // V = Q D Z
            let mut out = ComplexMatrix::zeros(n, n);
            for r in 0..n {
                for (col, &src) in order.iter().enumerate() {
                    let mut acc = ZERO;
                    for t in 0..n {
                        acc += q[(r, t)] * phases[t] * z[t * n + src];
                    }
                    out[(r, col)] = acc;
                }
            }
            Some(out)
        }
        _ => None,
    };
    (values, vectors)
}

/// Implicit QL on a real symmetric tridiagonal matrix with diagonal `d` and
/// subdiagonal `e` (`e[i]` couples i and i+1, `e[n-1]` ignored).
/// Eigenvector rotations accumulate into row-major `z` when present.
fn tql2(d: &mut [f64], e: &mut [f64], mut z: Option<&mut [f64]>, n: usize) {
    if n == 0 {
        return;
    }
    e[n - 1] = 0.0;
    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some(z) = z.as_deref_mut() {
                        for k in 0..n {
                            let zk1 = z[k * n + i + 1];
                            let zk = z[k * n + i];
                            z[k * n + i + 1] = s * zk + c * zk1;
                            z[k * n + i] = c * zk - s * zk1;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 || iter >= 100 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
}

/// A validated n x n density matrix: Hermitian, unit trace, PSD.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: ComplexMatrix,
}

impl DensityMatrix {
    /// Validates `mat`. Asymmetry up to [`HERMITIAN_TOL`] is removed by
    /// averaging with the adjoint; anything larger is rejected.
    pub fn new(mat: ComplexMatrix) -> Result<Self> {
        if !mat.is_square() {
            return Err(Error::NotSquare { rows: mat.rows, cols: mat.cols });
        }
        let asym = mat.hermitian_asymmetry();
        if !(asym <= HERMITIAN_TOL) {
            return Err(Error::NotHermitian { asymmetry: asym });
        }
        let mat = if asym > 0.0 {
            let sum = mat.add(&mat.dagger())?;
            sum.scale_real(0.5)
        } else {
            mat
        };
        let tr = mat.trace()?;
        if !((tr.re - 1.0).abs() <= TRACE_TOL) {
            return Err(Error::BadTrace { trace: tr.re });
        }
        let min_eig = eigvals_hermitian(&mat)?[0];
        if !(min_eig >= -PSD_TOL) {
            return Err(Error::NotPositive { min_eigenvalue: min_eig });
        }
        Ok(Self { mat })
    }

    /// I/n.
    pub fn maximally_mixed(n: usize) -> Self {
        Self { mat: ComplexMatrix::identity(n).scale_real(1.0 / n as f64) }
    }

    /// |psi><psi| for a state vector, normalized first.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        let norm = psi.iter().map(C64::norm_sqr).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidArgument("zero state vector".into()));
        }
        let unit: Vec<C64> = psi.iter().map(|z| z / norm).collect();
        Self::new(ComplexMatrix::outer(&unit, &unit))
    }

    pub fn dim(&self) -> usize {
        self.mat.rows
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.mat
    }

    /// tr(rho^2).
    pub fn purity(&self) -> f64 {
        self.mat.trace_product(&self.mat).expect("square").re
    }

    pub fn eigen(&self) -> HermitianEigen {
        eig_hermitian(&self.mat).expect("validated Hermitian")
    }

    pub fn min_eigenvalue(&self) -> f64 {
        eigvals_hermitian(&self.mat).expect("validated Hermitian")[0]
    }

    /// Convex combination a*self + (1-a)*other.
    pub fn mix(&self, other: &Self, a: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::InvalidArgument(format!("mixing weight {a} outside [0, 1]")));
        }
        Self::new(self.mat.scale_real(a).add(&other.mat.scale_real(1.0 - a))?)
    }
}

pub fn purity(rho: &DensityMatrix) -> f64 {
    rho.purity()
}

/// Canonical real parameterization of an n x n Hermitian matrix: n diagonal
/// entries, then `(re, im)` of a_jk for every j < k in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianParams {
    n: usize,
    params: Vec<f64>,
}

impl HermitianParams {
    pub fn new(n: usize, params: Vec<f64>) -> Result<Self> {
        if n == 0 || params.len() != n * n {
            return Err(Error::DimensionMismatch(format!(
                "{} Hermitian parameters for n = {n}",
                params.len()
            )));
        }
        Ok(Self { n, params })
    }

    /// Reads the parameters back out of a Hermitian matrix (upper triangle).
    pub fn from_matrix(m: &ComplexMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::NotSquare { rows: m.rows, cols: m.cols });
        }
        let n = m.rows;
        let mut params: Vec<f64> = (0..n).map(|i| m[(i, i)].re).collect();
        for j in 0..n {
            for k in j + 1..n {
                params.push(m[(j, k)].re);
                params.push(m[(j, k)].im);
            }
        }
        Ok(Self { n, params })
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let params = (0..n * n).map(|_| rng.sample(StandardNormal)).collect();
        Self { n, params }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn to_matrix(&self) -> ComplexMatrix {
        let n = self.n;
        let mut m = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(self.params[i], 0.0);
        }
        let mut idx = n;
        for j in 0..n {
            for k in j + 1..n {
                let z = C64::new(self.params[idx], self.params[idx + 1]);
                m[(j, k)] = z;
                m[(k, j)] = z.conj();
                idx += 2;
            }
        }
        m
    }

    /// Maps a Hermitian "gradient matrix" G (with d f = Re tr(G dA)) to the
    /// gradient with respect to these parameters.
    pub fn pullback(n: usize, g: &ComplexMatrix) -> Vec<f64> {
        let mut out: Vec<f64> = (0..n).map(|i| g[(i, i)].re).collect();
        for j in 0..n {
            for k in j + 1..n {
                // Re(G_kj dA_jk + G_jk dA_kj) with dA_kj = conj(dA_jk)
                let gkj = g[(k, j)];
                let gjk = g[(j, k)];
                out.push(gkj.re + gjk.re);
                out.push(gjk.im - gkj.im);
            }
        }
        out
    }
}

/// Random mixed state of the given rank from a normalized complex Ginibre
/// matrix, rho = G G^H / tr(G G^H).
pub fn random_density<R: Rng + ?Sized>(n: usize, rank: usize, rng: &mut R) -> DensityMatrix {
    let rank = rank.clamp(1, n);
    let mut g = ComplexMatrix::zeros(n, rank);
    for z in g.entries_mut() {
        *z = C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
    }
    let gg = g.matmul(&g.dagger()).expect("conformable");
    let tr = gg.trace().expect("square").re;
    let mut m = gg.scale_real(1.0 / tr);
    // Renormalize the diagonal so the trace is 1 to rounding.
    let fix = 1.0 / m.trace().expect("square").re;
    m = m.scale_real(fix);
    DensityMatrix::new(m).expect("Ginibre states are valid")
}

/// Random Hermitian matrix with i.i.d. standard normal parameters.
pub fn random_hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    HermitianParams::random(n, rng).to_matrix()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn schoolbook(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut acc = ZERO;
                for k in 0..a.cols() {
                    acc += a[(i, k)] * b[(k, j)];
                }
                out[(i, j)] = acc;
            }
        }
        out
    }

    fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
        let data = (0..rows * cols)
            .map(|_| c(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        ComplexMatrix::new(rows, cols, data).unwrap()
    }

    #[test]
    fn matmul_identity_and_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_matrix(2, 2, &mut rng);
        assert_eq!(ComplexMatrix::identity(2).matmul(&a).unwrap(), a);
        let p = ComplexMatrix::from_real_diag(&[2.0, 3.0])
            .matmul(&ComplexMatrix::from_real_diag(&[5.0, 7.0]))
            .unwrap();
        assert_eq!(p, ComplexMatrix::from_real_diag(&[10.0, 21.0]));
    }

    #[test]
    fn matmul_matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let a = random_matrix(3, 3, &mut rng);
            let b = random_matrix(3, 3, &mut rng);
            assert!(a.matmul(&b).unwrap().max_abs_diff(&schoolbook(&a, &b)) < 1e-13);
        }
        let a = random_matrix(2, 3, &mut rng);
        let b = random_matrix(3, 4, &mut rng);
        assert!(a.matmul(&b).unwrap().max_abs_diff(&schoolbook(&a, &b)) < 1e-13);
    }

    #[test]
    fn matmul_rejects_mismatch() {
        let a = ComplexMatrix::zeros(2, 3);
        assert!(matches!(a.matmul(&a), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn trace_cases() {
        assert_eq!(ComplexMatrix::identity(5).trace().unwrap(), c(5.0, 0.0));
        assert!(matches!(ComplexMatrix::zeros(2, 3).trace(), Err(Error::NotSquare { .. })));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rho = random_density(4, 4, &mut rng);
        assert!((rho.matrix().trace().unwrap() - ONE).norm() <= 1e-10);
    }

    #[test]
    fn frobenius_cases() {
        assert!((ComplexMatrix::identity(7).frobenius_norm() - 7f64.sqrt()).abs() < 1e-15);
        assert_eq!(ComplexMatrix::zeros(3, 3).frobenius_norm(), 0.0);
    }

    #[test]
    fn eig_simple_cases() {
        let e = eig_hermitian(&ComplexMatrix::from_real_diag(&[0.75, 0.25])).unwrap();
        assert!((e.values[0] - 0.25).abs() < 1e-15);
        assert!((e.values[1] - 0.75).abs() < 1e-15);

        let x = ComplexMatrix::from_rows(&[vec![ZERO, ONE], vec![ONE, ZERO]]).unwrap();
        let e = eig_hermitian(&x).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-14);
        assert!((e.values[1] - 1.0).abs() < 1e-14);
    }

    fn check_decomposition(a: &ComplexMatrix) {
        let e = eig_hermitian(a).unwrap();
        let n = a.rows();
        let scale = a.frobenius_norm();
        for k in 0..n {
            let v: Vec<C64> = (0..n).map(|i| e.vectors[(i, k)]).collect();
            let av = a.mul_vec(&v).unwrap();
            let resid: f64 =
                av.iter().zip(&v).map(|(x, y)| (x - y * e.values[k]).norm_sqr()).sum::<f64>().sqrt();
            assert!(resid < 1e-8 * scale.max(1.0), "residual {resid}");
        }
        let gram = e.vectors.dagger().matmul(&e.vectors).unwrap();
        assert!(gram.max_abs_diff(&ComplexMatrix::identity(n)) < 1e-10);
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn eig_random_hermitian_residuals() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in [1, 2, 3, 4, 5, 8, 16, 33, 64] {
            for _ in 0..3 {
                check_decomposition(&random_hermitian(n, &mut rng));
            }
        }
    }

    #[test]
    fn eig_degenerate_and_already_tridiagonal() {
        check_decomposition(&ComplexMatrix::identity(6));
        check_decomposition(&ComplexMatrix::zeros(4, 4));
        let mut t = ComplexMatrix::zeros(4, 4);
        for i in 0..3 {
            t[(i + 1, i)] = c(0.0, 1.0);
            t[(i, i + 1)] = c(0.0, -1.0);
        }
        check_decomposition(&t);
    }

    #[test]
    fn eig_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_hermitian(9, &mut rng);
        let e1 = eig_hermitian(&a).unwrap();
        let e2 = eig_hermitian(&a).unwrap();
        assert_eq!(e1.values, e2.values);
        assert_eq!(e1.vectors, e2.vectors);
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let a = ComplexMatrix::from_rows(&[vec![ZERO, ONE], vec![ZERO, ZERO]]).unwrap();
        assert!(matches!(eig_hermitian(&a), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn purity_cases() {
        assert!((DensityMatrix::maximally_mixed(4).purity() - 0.25).abs() < 1e-15);
        let zero = DensityMatrix::pure(&[ONE, ZERO]).unwrap();
        assert!((zero.purity() - 1.0).abs() < 1e-15);
        let rho = DensityMatrix::new(ComplexMatrix::from_real_diag(&[0.75, 0.25])).unwrap();
        assert!((rho.purity() - 0.625).abs() < 1e-15);
    }

    #[test]
    fn purity_matches_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for n in 2..=6 {
            for rank in 1..=n {
                let rho = random_density(n, rank, &mut rng);
                let e = rho.eigen();
                let from_eig: f64 = e.values.iter().map(|x| x * x).sum();
                assert!((rho.purity() - from_eig).abs() < 1e-10);
                assert!((e.values.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                assert!(rho.purity() >= 1.0 / n as f64 - 1e-12 && rho.purity() <= 1.0 + 1e-10);
            }
        }
    }

    #[test]
    fn density_rejects_violations() {
        let bad_trace = ComplexMatrix::from_real_diag(&[0.5, 0.25]);
        assert!(matches!(DensityMatrix::new(bad_trace), Err(Error::BadTrace { .. })));
        let negative = ComplexMatrix::from_real_diag(&[1.5, -0.5]);
        assert!(matches!(DensityMatrix::new(negative), Err(Error::NotPositive { .. })));
        let mut skew = ComplexMatrix::from_real_diag(&[0.5, 0.5]);
        skew[(0, 1)] = c(0.1, 0.0);
        assert!(matches!(DensityMatrix::new(skew), Err(Error::NotHermitian { .. })));
        assert!(matches!(
            DensityMatrix::new(ComplexMatrix::zeros(2, 3)),
            Err(Error::NotSquare { .. })
        ));
    }

    #[test]
    fn density_symmetrizes_float_noise() {
        let mut m = ComplexMatrix::from_real_diag(&[0.5, 0.5]);
        m[(0, 1)] = c(0.1, 0.0);
        m[(1, 0)] = c(0.1 + 1e-13, 0.0);
        let rho = DensityMatrix::new(m).unwrap();
        assert_eq!(rho.matrix().hermitian_asymmetry(), 0.0);
    }

    #[test]
    fn hermitian_params_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = HermitianParams::random(4, &mut rng);
        let m = p.to_matrix();
        assert_eq!(m.hermitian_asymmetry(), 0.0);
        assert_eq!(HermitianParams::from_matrix(&m).unwrap(), p);
        assert!(HermitianParams::new(3, vec![0.0; 8]).is_err());
    }

    #[test]
    fn pullback_matches_directional_derivative() {
        // f(A) = Re tr(G A) is linear, so its gradient is exact.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = random_hermitian(3, &mut rng);
        let grad = HermitianParams::pullback(3, &g);
        for i in 0..9 {
            let mut e = vec![0.0; 9];
            e[i] = 1.0;
            let a = HermitianParams::new(3, e).unwrap().to_matrix();
            let f = g.trace_product(&a).unwrap().re;
            assert!((f - grad[i]).abs() < 1e-13);
        }
    }
}
