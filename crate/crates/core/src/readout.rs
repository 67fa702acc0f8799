//! Observable readout: unit Hilbert-Schmidt observables, expectation-value
//! features and the linear projection back to latent space.

use rand::Rng;

use crate::channel::NoiseParam;
use crate::error::{Error, Result};
use crate::qcore::{ComplexMatrix, DensityMatrix, HermitianParams};

/// Raw parameters with a smaller Frobenius norm cannot be normalized.
pub const MIN_OBSERVABLE_NORM: f64 = 1e-8;
/// Largest imaginary part tolerated in tr(rho O).
pub const IMAG_RESIDUE_TOL: f64 = 1e-10;

/// O = A / ||A||_F.
pub fn normalize_observable(a: &HermitianParams) -> Result<ComplexMatrix> {
    let m = a.to_matrix();
    let norm = m.frobenius_norm();
    if !(norm >= MIN_OBSERVABLE_NORM) {
        return Err(Error::DegenerateObservable(norm));
    }
    Ok(m.scale_real(1.0 / norm))
}

/// K observables kept as raw Hermitian parameters and normalized on use.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableSet {
    n: usize,
    raw: Vec<HermitianParams>,
}

impl ObservableSet {
    pub fn new(n: usize, raw: Vec<HermitianParams>) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::InvalidArgument("observable set is empty".into()));
        }
        if let Some(bad) = raw.iter().find(|p| p.dim() != n) {
            return Err(Error::DimensionMismatch(format!(
                "observable of dim {} in a set of dim {n}",
                bad.dim()
            )));
        }
        for p in &raw {
            normalize_observable(p)?;
        }
        Ok(Self { n, raw })
    }

    /// Entries i.i.d. standard normal.
    pub fn random<R: Rng + ?Sized>(n: usize, count: usize, rng: &mut R) -> Self {
        let raw = (0..count).map(|_| HermitianParams::random(n, rng)).collect();
        Self { n, raw }
    }

    pub fn from_matrices(ops: &[ComplexMatrix]) -> Result<Self> {
        let n = ops.first().map(ComplexMatrix::rows).unwrap_or(0);
        let raw = ops
            .iter()
            .map(|m| {
                let asym = m.hermitian_asymmetry();
                if asym > 1e-12 {
                    return Err(Error::NotHermitian { asymmetry: asym });
                }
                HermitianParams::from_matrix(m)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(n, raw)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn count(&self) -> usize {
        self.raw.len()
    }

    pub fn raw(&self) -> &[HermitianParams] {
        &self.raw
    }

    pub fn raw_mut(&mut self) -> &mut [HermitianParams] {
        &mut self.raw
    }

    pub fn normalized(&self) -> Result<Vec<ComplexMatrix>> {
        self.raw.iter().map(normalize_observable).collect()
    }
}

/// v_i = tr(rho O_i).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn expectations(rho_noisy: &DensityMatrix, obs: &ObservableSet) -> Result<FeatureVector> {
    if rho_noisy.dim() != obs.n {
        return Err(Error::DimensionMismatch(format!(
            "state dim {} vs observable dim {}",
            rho_noisy.dim(),
            obs.n
        )));
    }
    expectations_of(rho_noisy.matrix(), &obs.normalized()?).map(FeatureVector)
}

/// Re tr(rho O_i) for already-normalized operators.
pub fn expectations_of(rho: &ComplexMatrix, ops: &[ComplexMatrix]) -> Result<Vec<f64>> {
    ops.iter()
        .map(|o| {
            let t = rho.trace_product(o)?;
            if t.im.abs() > IMAG_RESIDUE_TOL {
                return Err(Error::ImaginaryResidue(t.im));
            }
            Ok(t.re)
        })
        .collect()
}

/// Largest |eigenvalue|.
pub fn operator_norm(o: &ComplexMatrix) -> Result<f64> {
    let e = crate::qcore::eigvals_hermitian(o)?;
    Ok(e.first().unwrap().abs().max(e.last().unwrap().abs()))
}

/// y_hat = W [v; eps] + b with W of shape N x (K + 1), row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    latent_dim: usize,
    features: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl Projection {
    pub fn new(latent_dim: usize, features: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if weights.len() != latent_dim * (features + 1) || bias.len() != latent_dim {
            return Err(Error::DimensionMismatch(format!(
                "projection {latent_dim}x({features}+1) with {} weights and {} biases",
                weights.len(),
                bias.len()
            )));
        }
        if weights.iter().chain(&bias).any(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument("non-finite projection parameter".into()));
        }
        Ok(Self { latent_dim, features, weights, bias })
    }

    pub fn zeros(latent_dim: usize, features: usize) -> Self {
        Self {
            latent_dim,
            features,
            weights: vec![0.0; latent_dim * (features + 1)],
            bias: vec![0.0; latent_dim],
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn features(&self) -> usize {
        self.features
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    /// Ordinary least squares for W, b over rows `(v, eps) -> target`, with a
    /// small ridge term on the weights for numerical safety.
    pub fn fit_least_squares(samples: &[(Vec<f64>, f64, Vec<f64>)], ridge: f64) -> Result<Self> {
        let (first_v, _, first_t) = samples
            .first()
            .ok_or_else(|| Error::InvalidArgument("no samples to fit".into()))?;
        let k = first_v.len();
        let n_out = first_t.len();
        let d = k + 2; // features, eps, constant
        let mut gram = vec![0.0; d * d];
        let mut rhs = vec![0.0; d * n_out];
        for (v, eps, t) in samples {
            if v.len() != k || t.len() != n_out {
                return Err(Error::DimensionMismatch("ragged least-squares samples".into()));
            }
            let row: Vec<f64> = v.iter().copied().chain([*eps, 1.0]).collect();
            for a in 0..d {
                for b in 0..d {
                    gram[a * d + b] += row[a] * row[b];
                }
                for o in 0..n_out {
                    rhs[a * n_out + o] += row[a] * t[o];
                }
            }
        }
        for a in 0..d - 1 {
            gram[a * d + a] += ridge;
        }
        let sol = solve_spd(&gram, &rhs, d, n_out)?;
        let mut weights = vec![0.0; n_out * (k + 1)];
        let mut bias = vec![0.0; n_out];
        for o in 0..n_out {
            for a in 0..=k {
                weights[o * (k + 1) + a] = sol[a * n_out + o];
            }
            bias[o] = sol[(k + 1) * n_out + o];
        }
        Self::new(n_out, k, weights, bias)
    }
}

pub fn project(v: &FeatureVector, eps: NoiseParam, p: &Projection) -> Result<Vec<f64>> {
    project_slice(v.values(), eps.value(), p)
}

pub fn project_slice(v: &[f64], eps: f64, p: &Projection) -> Result<Vec<f64>> {
    if v.len() != p.features {
        return Err(Error::DimensionMismatch(format!(
            "{} features for a projection expecting {}",
            v.len(),
            p.features
        )));
    }
    let stride = p.features + 1;
    Ok((0..p.latent_dim)
        .map(|o| {
            let row = &p.weights[o * stride..(o + 1) * stride];
            let dot: f64 = row[..p.features].iter().zip(v).map(|(w, x)| w * x).sum();
            dot + row[p.features] * eps + p.bias[o]
        })
        .collect())
}

/// Solves G X = B for symmetric positive definite G (d x d), B (d x m).
fn solve_spd(g: &[f64], b: &[f64], d: usize, m: usize) -> Result<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for j in 0..d {
        let mut s = g[j * d + j];
        for k in 0..j {
            s -= l[j * d + k] * l[j * d + k];
        }
        if !(s > 0.0) {
            return Err(Error::SingularInput);
        }
        let diag = s.sqrt();
        l[j * d + j] = diag;
        for i in j + 1..d {
            let mut s = g[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            l[i * d + j] = s / diag;
        }
    }
    let mut x = b.to_vec();
    for col in 0..m {
        for i in 0..d {
            let mut s = x[i * m + col];
            for k in 0..i {
                s -= l[i * d + k] * x[k * m + col];
            }
            x[i * m + col] = s / l[i * d + i];
        }
        for i in (0..d).rev() {
            let mut s = x[i * m + col];
            for k in i + 1..d {
                s -= l[k * d + i] * x[k * m + col];
            }
            x[i * m + col] = s / l[i * d + i];
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloch::{bloch_coefficient, build_basis, rho_of_bloch, BlochVector};
    use crate::channel::depolarize;
    use crate::qcore::{random_density, ONE, ZERO};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pauli_z_params() -> HermitianParams {
        HermitianParams::new(2, vec![1.0, -1.0, 0.0, 0.0]).unwrap()
    }

    #[test]
    fn normalize_examples() {
        let o = normalize_observable(&pauli_z_params()).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!(o.max_abs_diff(&ComplexMatrix::from_real_diag(&[s, -s])) < 1e-15);
        assert!((o.trace_product(&o).unwrap().re - 1.0).abs() < 1e-15);

        let id = HermitianParams::new(2, vec![1.0, 1.0, 0.0, 0.0]).unwrap();
        let o = normalize_observable(&id).unwrap();
        assert!(o.max_abs_diff(&ComplexMatrix::from_real_diag(&[s, s])) < 1e-15);

        let tiny = HermitianParams::new(2, vec![1e-9, 0.0, 0.0, 0.0]).unwrap();
        assert!(matches!(normalize_observable(&tiny), Err(Error::DegenerateObservable(_))));
    }

    #[test]
    fn expectation_examples() {
        let obs = ObservableSet::new(2, vec![pauli_z_params()]).unwrap();
        let v = expectations(&DensityMatrix::maximally_mixed(2), &obs).unwrap();
        assert!(v.values()[0].abs() < 1e-15);

        let zero = DensityMatrix::pure(&[ONE, ZERO]).unwrap();
        let v = expectations(&zero, &obs).unwrap();
        assert!((v.values()[0] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let rho = random_density(3, 3, &mut rng);
        let traceless: Vec<ComplexMatrix> = build_basis(3).unwrap().operators().to_vec();
        let obs = ObservableSet::from_matrices(&traceless).unwrap();
        let v = expectations(&depolarize(&rho, NoiseParam::new(1.0).unwrap()), &obs).unwrap();
        assert!(v.values().iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn expectation_dimension_mismatch() {
        let obs = ObservableSet::new(2, vec![pauli_z_params()]).unwrap();
        assert!(matches!(
            expectations(&DensityMatrix::maximally_mixed(3), &obs),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn features_bounded_by_operator_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..50 {
            let obs = ObservableSet::random(4, 6, &mut rng);
            let rho = random_density(4, 2, &mut rng);
            let v = expectations(&rho, &obs).unwrap();
            for (x, o) in v.values().iter().zip(obs.normalized().unwrap()) {
                assert!(x.abs() <= operator_norm(&o).unwrap() + 1e-10);
            }
        }
    }

    #[test]
    fn rescaling_observable_leaves_features_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let obs = ObservableSet::random(3, 5, &mut rng);
        let mut scaled = obs.clone();
        for p in scaled.raw_mut() {
            p.params_mut().iter_mut().for_each(|x| *x *= 3.7);
        }
        let rho = random_density(3, 3, &mut rng);
        let a = expectations(&rho, &obs).unwrap();
        let b = expectations(&rho, &scaled).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn features_are_linear_in_the_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let obs = ObservableSet::random(3, 4, &mut rng);
        let r1 = random_density(3, 1, &mut rng);
        let r2 = random_density(3, 3, &mut rng);
        let a = 0.3;
        let mixed = expectations(&r1.mix(&r2, a).unwrap(), &obs).unwrap();
        let v1 = expectations(&r1, &obs).unwrap();
        let v2 = expectations(&r2, &obs).unwrap();
        for i in 0..4 {
            let want = a * v1.values()[i] + (1.0 - a) * v2.values()[i];
            assert!((mixed.values()[i] - want).abs() <= 1e-12);
        }
    }

    #[test]
    fn scaled_gell_mann_readout_is_informationally_complete() {
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        for n in 2..=4 {
            let basis = build_basis(n).unwrap();
            let scaled: Vec<ComplexMatrix> =
                basis.operators().iter().map(|l| l.scale_real(std::f64::consts::FRAC_1_SQRT_2)).collect();
            let obs = ObservableSet::from_matrices(&scaled).unwrap();
            let rho = random_density(n, n, &mut rng);
            let v = expectations(&rho, &obs).unwrap();
            // v_i = tr(rho l_i)/sqrt(2), r_i = tr(rho l_i) n / (2c)
            let factor = std::f64::consts::SQRT_2 * n as f64 / (2.0 * bloch_coefficient(n));
            let r = BlochVector::new(n, v.values().iter().map(|x| x * factor).collect()).unwrap();
            let back = rho_of_bloch(&r, &basis).unwrap();
            assert!(back.matrix.max_abs_diff(rho.matrix()) <= 1e-9);
        }
    }

    #[test]
    fn project_examples() {
        let y0 = vec![0.1, -0.2, 0.3];
        let p = Projection::new(3, 2, vec![0.0; 9], y0.clone()).unwrap();
        let v = FeatureVector(vec![5.0, -7.0]);
        assert_eq!(project(&v, NoiseParam::new(0.4).unwrap(), &p).unwrap(), y0);

        let mut w = vec![0.0; 3 * 4];
        for i in 0..3 {
            w[i * 4 + i] = 1.0;
        }
        let p = Projection::new(3, 3, w, vec![0.0; 3]).unwrap();
        let v = FeatureVector(vec![0.5, -0.25, 0.125]);
        assert_eq!(project(&v, NoiseParam::new(0.9).unwrap(), &p).unwrap(), v.0);

        assert!(project(&FeatureVector(vec![1.0]), NoiseParam::NOISELESS, &p).is_err());
        assert!(Projection::new(2, 2, vec![0.0; 5], vec![0.0; 2]).is_err());
        assert!(Projection::new(1, 0, vec![f64::NAN], vec![0.0]).is_err());
    }

    #[test]
    fn least_squares_recovers_exact_linear_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(46);
        let truth = Projection::new(
            2,
            3,
            (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            vec![0.25, -0.5],
        )
        .unwrap();
        let samples: Vec<_> = (0..50)
            .map(|_| {
                let v: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let eps: f64 = rng.gen();
                let t = project_slice(&v, eps, &truth).unwrap();
                (v, eps, t)
            })
            .collect();
        let fit = Projection::fit_least_squares(&samples, 0.0).unwrap();
        for (a, b) in fit.weights().iter().zip(truth.weights()) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}
