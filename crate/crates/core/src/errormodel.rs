//! Multivariate Gaussian model of the 24 hourly forecast errors of one
//! uncertain quantity: estimation from a residual matrix, conditional
//! update on realized hours, and seeded sampling.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Shrinkage weight pulling the sample covariance toward its diagonal.
pub const SHRINKAGE: f64 = 0.05;

/// Relative ridge added to the observed block before inversion.
const CONDITION_RIDGE: f64 = 1e-8;

/// Gaussian distribution over the forecast errors of the remaining hours.
///
/// `hour_labels[i]` is the 0-based hour-of-day slot that coordinate `i`
/// refers to; after conditioning, only the unobserved slots remain.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianErrorModel {
    mu: DVector<f64>,
    sigma: DMatrix<f64>,
    hour_labels: Vec<u8>,
}

impl GaussianErrorModel {
    /// Validates symmetry (to 1e-9, scale-adjusted) and positive
    /// semi-definiteness up to -1e-9 on the smallest eigenvalue.
    pub fn new(mu: DVector<f64>, sigma: DMatrix<f64>, hour_labels: Vec<u8>) -> Result<Self> {
        let dim = mu.len();
        if sigma.nrows() != dim || sigma.ncols() != dim || hour_labels.len() != dim {
            return Err(Error::DimensionMismatch(format!(
                "mu has {dim} entries, sigma is {}x{}, {} hour labels",
                sigma.nrows(),
                sigma.ncols(),
                hour_labels.len()
            )));
        }
        if dim == 0 {
            return Err(Error::DimensionMismatch("model dimension must be >= 1".into()));
        }
        if mu.iter().any(|v| !v.is_finite()) || sigma.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite entry in mu or sigma".into()));
        }
        let scale = sigma.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        for i in 0..dim {
            for j in (i + 1)..dim {
                if (sigma[(i, j)] - sigma[(j, i)]).abs() > 1e-9 * scale {
                    return Err(Error::InvalidArgument(format!(
                        "sigma is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let eigen = sigma.clone().symmetric_eigen();
        let min_eig = eigen.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if min_eig < -1e-9 * scale {
            return Err(Error::InvalidArgument(format!(
                "sigma has eigenvalue {min_eig}, not PSD"
            )));
        }
        Ok(Self { mu, sigma, hour_labels })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn hour_labels(&self) -> &[u8] {
        &self.hour_labels
    }

    /// Fits the model to a residual matrix (rows = days, columns = hours):
    /// column means plus the sample covariance shrunk toward its diagonal,
    /// `sigma = (1 - lambda) S + lambda diag(S)` with lambda = 0.05.
    pub fn estimate(errors: &DMatrix<f64>) -> Result<Self> {
        let n_days = errors.nrows();
        let dim = errors.ncols();
        if n_days < 30 {
            return Err(Error::InsufficientHistory { needed_days: 30, got_days: n_days });
        }
        if errors.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite entry in error matrix".into()));
        }

        let mut mu = DVector::zeros(dim);
        for j in 0..dim {
            mu[j] = errors.column(j).sum() / n_days as f64;
        }
        let mut cov = DMatrix::zeros(dim, dim);
        for r in 0..n_days {
            for i in 0..dim {
                let di = errors[(r, i)] - mu[i];
                for j in i..dim {
                    cov[(i, j)] += di * (errors[(r, j)] - mu[j]);
                }
            }
        }
        let denom = (n_days - 1) as f64;
        for i in 0..dim {
            for j in i..dim {
                let s = cov[(i, j)] / denom;
                let shrunk = if i == j { s } else { (1.0 - SHRINKAGE) * s };
                cov[(i, j)] = shrunk;
                cov[(j, i)] = shrunk;
            }
        }

        let labels = (0..dim as u8).collect();
        Self::new(mu, cov, labels)
    }

    /// Conditions on realized errors at `observed_hours`, returning the
    /// distribution over the remaining hours:
    ///
    /// ```text
    /// mu_2|1    = mu_2 + S21 S11^-1 (beta - mu_1)
    /// sigma_2|1 = S22 - S21 S11^-1 S12
    /// ```
    ///
    /// The covariance uses the Schur-complement minus sign; conditioning
    /// can only shrink marginal variances.
    pub fn condition(&self, observed_hours: &[u8], observed_values: &[f64]) -> Result<Self> {
        let dim = self.dim();
        if observed_hours.is_empty() {
            return Err(Error::InvalidArgument("no observed hours to condition on".into()));
        }
        if observed_hours.len() != observed_values.len() {
            return Err(Error::LengthMismatch {
                context: "observed hours vs values",
                expected: observed_hours.len(),
                actual: observed_values.len(),
            });
        }
        if observed_hours.len() >= dim {
            return Err(Error::DimensionMismatch(format!(
                "cannot observe {} of {} coordinates; at least one must remain",
                observed_hours.len(),
                dim
            )));
        }

        let mut obs_idx = Vec::with_capacity(observed_hours.len());
        for h in observed_hours {
            match self.hour_labels.iter().position(|l| l == h) {
                Some(i) => {
                    if obs_idx.contains(&i) {
                        return Err(Error::InvalidArgument(format!(
                            "hour {h} observed more than once"
                        )));
                    }
                    obs_idx.push(i);
                }
                None => {
                    return Err(Error::DimensionMismatch(format!(
                        "hour {h} is not part of this model"
                    )))
                }
            }
        }
        let rem_idx: Vec<usize> = (0..dim).filter(|i| !obs_idx.contains(i)).collect();

        let n1 = obs_idx.len();
        let n2 = rem_idx.len();
        let s11 = DMatrix::from_fn(n1, n1, |i, j| self.sigma[(obs_idx[i], obs_idx[j])]);
        let s21 = DMatrix::from_fn(n2, n1, |i, j| self.sigma[(rem_idx[i], obs_idx[j])]);
        let mu1 = DVector::from_fn(n1, |i, _| self.mu[obs_idx[i]]);
        let mu2 = DVector::from_fn(n2, |i, _| self.mu[rem_idx[i]]);
        let s22 = DMatrix::from_fn(n2, n2, |i, j| self.sigma[(rem_idx[i], rem_idx[j])]);
        let labels: Vec<u8> = rem_idx.iter().map(|&i| self.hour_labels[i]).collect();

        // A PSD block with zero trace is the zero matrix, so the
        // observation carries no information and the marginal is the
        // exact limit of the conditional.
        let trace = s11.trace();
        if trace <= 0.0 {
            return Self::new(mu2, s22, labels);
        }

        let ridge = CONDITION_RIDGE * trace / n1 as f64;
        let mut s11_r = s11;
        for i in 0..n1 {
            s11_r[(i, i)] += ridge;
        }
        let chol = nalgebra::Cholesky::new(s11_r).ok_or_else(|| {
            Error::IllConditioned("observed covariance block is singular beyond ridge repair".into())
        })?;

        let innovation = DVector::from_fn(n1, |i, _| observed_values[i] - mu1[i]);
        let mu_cond = &mu2 + &s21 * chol.solve(&innovation);
        let mut sigma_cond = &s22 - &s21 * chol.solve(&s21.transpose());
        // symmetrize away factorization round-off
        for i in 0..n2 {
            for j in (i + 1)..n2 {
                let v = 0.5 * (sigma_cond[(i, j)] + sigma_cond[(j, i)]);
                sigma_cond[(i, j)] = v;
                sigma_cond[(j, i)] = v;
            }
        }

        Self::new(mu_cond, sigma_cond, labels)
    }

    /// Draws `n` samples as rows of an `n x dim` matrix.
    ///
    /// Sampling uses a fixed scheme so results depend only on the seed:
    /// a ChaCha8 stream feeding standard normals consumed row by row,
    /// mapped through a symmetric PSD square root of sigma. Row `i` is
    /// therefore independent of `n`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<DMatrix<f64>> {
        if n == 0 {
            return Err(Error::InvalidArgument("sample count must be >= 1".into()));
        }
        let factor = psd_factor(&self.sigma).ok_or_else(|| {
            Error::IllConditioned("covariance has no PSD factorization".into())
        })?;
        let dim = self.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = DMatrix::zeros(n, dim);
        let mut z = DVector::zeros(dim);
        for r in 0..n {
            for zi in z.iter_mut() {
                *zi = rng.sample(StandardNormal);
            }
            let row = &self.mu + &factor * &z;
            out.row_mut(r).copy_from(&row.transpose());
        }
        Ok(out)
    }
}

/// A matrix `B` with `B B^T = sigma`: Cholesky when positive definite,
/// otherwise the eigenvalue square root with negatives clamped to zero.
fn psd_factor(sigma: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if let Some(chol) = nalgebra::Cholesky::new(sigma.clone()) {
        return Some(chol.l());
    }
    let eigen = sigma.clone().symmetric_eigen();
    let scale = eigen.eigenvalues.iter().cloned().fold(1.0f64, |m, v| m.max(v.abs()));
    if eigen.eigenvalues.iter().any(|&l| l < -1e-8 * scale) {
        return None;
    }
    let sqrt = DMatrix::from_diagonal(&eigen.eigenvalues.map(|l| l.max(0.0).sqrt()));
    Some(&eigen.eigenvectors * sqrt)
}
