//! Multivariate normal lower-orthant probabilities and Berry–Esseen bound
//! values.
//!
//! `Ψ(t; m, Σ) = Pr[Z ≤ t]` for `Z ~ N(m, Σ)` is evaluated as follows:
//!
//! * a `-∞` threshold gives 0; `+∞` thresholds are marginalized out before
//!   anything else is computed;
//! * a diagonal covariance gives the exact product of one-dimensional CDFs;
//! * otherwise the integral is transformed by Genz's separation of variables
//!   on the Cholesky factor and integrated with randomly shifted rank-1
//!   lattice rules. The spread of the shift estimates gives the reported
//!   standard error.
//!
//! Null directions of a singular covariance become zero columns of the
//! factor; the matching coordinates are then deterministic functions of the
//! earlier ones and enter the integrand as indicators.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::linalg::{asymmetry, cholesky_semidefinite, symmetric_eigenvalues};
use crate::rng::CounterRng;
use crate::special::{phi, phi_inv};

pub const MAX_DIM: usize = 8;
const SYMMETRY_TOL: f64 = 1e-12;
const EIGEN_TOL: f64 = 1e-10;
/// Pivots below this (relative to the largest variance) are null directions.
const SINGULAR_TOL: f64 = 1e-10;

/// Mean and covariance of a Gaussian vector, with its Cholesky factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MvnSpec {
    dim: usize,
    mean: Vec<f64>,
    cov: Vec<f64>,
    chol: Vec<f64>,
}

impl MvnSpec {
    /// `cov` is row-major `dim × dim`.
    pub fn new(mean: Vec<f64>, cov: Vec<f64>) -> Result<Self> {
        let dim = mean.len();
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::DimensionMismatch { expected: MAX_DIM.min(dim.max(1)), got: dim });
        }
        if cov.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, got: cov.len() });
        }
        if mean.iter().chain(cov.iter()).any(|x| !x.is_finite()) {
            return Err(domain("mvn parameter", f64::NAN));
        }
        let scale = (0..dim).map(|i| cov[i * dim + i].abs()).fold(0.0, f64::max).max(1.0);
        if asymmetry(&cov, dim) > SYMMETRY_TOL * scale {
            return Err(Error::NotPositiveSemidefinite { min_eigenvalue: f64::NAN });
        }
        let min_ev = symmetric_eigenvalues(&cov, dim)[0];
        if min_ev < -EIGEN_TOL * scale {
            return Err(Error::NotPositiveSemidefinite { min_eigenvalue: min_ev });
        }
        let max_var = (0..dim).map(|i| cov[i * dim + i]).fold(0.0, f64::max);
        let chol = cholesky_semidefinite(&cov, dim, SINGULAR_TOL * max_var.max(f64::MIN_POSITIVE));
        Ok(MvnSpec { dim, mean, cov, chol })
    }

    pub fn standard(dim: usize) -> Result<Self> {
        let mut cov = vec![0.0; dim * dim];
        for i in 0..dim {
            cov[i * dim + i] = 1.0;
        }
        Self::new(vec![0.0; dim], cov)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self) -> &[f64] {
        &self.cov
    }

    pub fn chol(&self) -> &[f64] {
        &self.chol
    }

    pub fn is_diagonal(&self) -> bool {
        let d = self.dim;
        (0..d).all(|i| (0..d).all(|j| i == j || self.cov[i * d + j] == 0.0))
    }

    /// Marginal over the listed coordinates.
    pub fn marginal(&self, keep: &[usize]) -> Result<Self> {
        let d = self.dim;
        let mean = keep.iter().map(|&i| self.mean[i]).collect();
        let mut cov = Vec::with_capacity(keep.len() * keep.len());
        for &i in keep {
            for &j in keep {
                cov.push(self.cov[i * d + j]);
            }
        }
        let _ = d;
        Self::new(mean, cov)
    }
}

/// Sample budget of the randomized lattice rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QmcOptions {
    pub points_per_shift: usize,
    pub shifts: usize,
    pub seed: u64,
}

impl Default for QmcOptions {
    fn default() -> Self {
        QmcOptions { points_per_shift: 4096, shifts: 16, seed: 0x5eed }
    }
}

/// An orthant probability with its Monte-Carlo standard error (0 when exact).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsiEstimate {
    pub value: f64,
    pub std_error: f64,
}

/// `Pr[Z ≤ t]` with the default sample budget.
pub fn psi_upper(t: &[f64], spec: &MvnSpec) -> Result<f64> {
    Ok(psi_upper_with(t, spec, QmcOptions::default())?.value)
}

pub fn psi_upper_with(t: &[f64], spec: &MvnSpec, opts: QmcOptions) -> Result<PsiEstimate> {
    psi_dispatch(t, spec, opts, false)
}

/// Like [`psi_upper_with`] but always integrates by the lattice rule, also for
/// diagonal covariances. Meant for cross-checking the integrator.
pub fn psi_upper_qmc(t: &[f64], spec: &MvnSpec, opts: QmcOptions) -> Result<PsiEstimate> {
    psi_dispatch(t, spec, opts, true)
}

fn psi_dispatch(t: &[f64], spec: &MvnSpec, opts: QmcOptions, force_qmc: bool) -> Result<PsiEstimate> {
    if t.len() != spec.dim {
        return Err(Error::DimensionMismatch { expected: spec.dim, got: t.len() });
    }
    if let Some(&x) = t.iter().find(|x| x.is_nan()) {
        return Err(domain("orthant threshold", x));
    }
    if t.contains(&f64::NEG_INFINITY) {
        return Ok(PsiEstimate { value: 0.0, std_error: 0.0 });
    }
    let keep: Vec<usize> = (0..spec.dim).filter(|&i| t[i] != f64::INFINITY).collect();
    if keep.is_empty() {
        return Ok(PsiEstimate { value: 1.0, std_error: 0.0 });
    }
    if keep.len() < spec.dim {
        let sub = spec.marginal(&keep)?;
        let ts: Vec<f64> = keep.iter().map(|&i| t[i]).collect();
        return psi_dispatch(&ts, &sub, opts, force_qmc);
    }
    if spec.is_diagonal() && !force_qmc {
        return Ok(PsiEstimate { value: psi_diagonal(t, spec), std_error: 0.0 });
    }
    Ok(psi_lattice(t, spec, opts))
}

fn psi_diagonal(t: &[f64], spec: &MvnSpec) -> f64 {
    let d = spec.dim;
    let mut p = 1.0;
    for i in 0..d {
        let var = spec.cov[i * d + i];
        let x = t[i] - spec.mean[i];
        p *= if var > 0.0 {
            phi(x / var.sqrt())
        } else if x >= 0.0 {
            1.0
        } else {
            0.0
        };
    }
    p
}

/// Genz separation-of-variables integrand at a point `w ∈ [0,1)^{d-1}`.
fn sov_integrand(t: &[f64], spec: &MvnSpec, w: &[f64], y: &mut [f64]) -> f64 {
    let d = spec.dim;
    let l = &spec.chol;
    let mut f = 1.0;
    for i in 0..d {
        let mut s = spec.mean[i];
        for j in 0..i {
            s += l[i * d + j] * y[j];
        }
        let lii = l[i * d + i];
        if lii == 0.0 {
            if s > t[i] {
                return 0.0;
            }
            y[i] = 0.0;
            continue;
        }
        let e = phi((t[i] - s) / lii);
        f *= e;
        if f == 0.0 {
            return 0.0;
        }
        if i + 1 < d {
            let u = (w[i] * e).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
            y[i] = phi_inv(u);
        }
    }
    f
}

const PRIMES: [f64; MAX_DIM] = [2.0, 3.0, 5.0, 7.0, 11.0, 13.0, 17.0, 19.0];

fn psi_lattice(t: &[f64], spec: &MvnSpec, opts: QmcOptions) -> PsiEstimate {
    let d = spec.dim;
    let gen: Vec<f64> = PRIMES.iter().take(d).map(|p| p.sqrt().fract()).collect();
    let mut w = vec![0.0; d];
    let mut y = vec![0.0; d];
    let shifts = opts.shifts.max(2);
    let n = opts.points_per_shift.max(1);
    let mut estimates = Vec::with_capacity(shifts);
    for s in 0..shifts {
        let rng = CounterRng::new(opts.seed, s as u64, 0);
        let shift: Vec<f64> = (0..d).map(|i| rng.uniform_at(i as u64)).collect();
        let mut acc = 0.0;
        for k in 1..=n {
            for i in 0..d {
                let x = (k as f64 * gen[i] + shift[i]).fract();
                // baker's transform
                w[i] = 1.0 - (2.0 * x - 1.0).abs();
            }
            acc += sov_integrand(t, spec, &w, &mut y);
        }
        estimates.push(acc / n as f64);
    }
    let k = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / k;
    let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (k - 1.0);
    PsiEstimate { value: mean.clamp(0.0, 1.0), std_error: (var / k).sqrt() }
}

/// Inputs of the multivariate Berry–Esseen bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeBoundInputs {
    pub dim: usize,
    pub third_moment: f64,
    pub lambda_min: f64,
    pub n: u64,
}

impl BeBoundInputs {
    pub fn new(dim: usize, third_moment: f64, lambda_min: f64, n: u64) -> Result<Self> {
        if dim == 0 {
            return Err(domain("dimension", 0.0));
        }
        if !(third_moment.is_finite() && third_moment >= 0.0) {
            return Err(domain("third absolute moment", third_moment));
        }
        if !(lambda_min.is_finite() && lambda_min > 0.0) {
            return Err(domain("minimum eigenvalue", lambda_min));
        }
        if n == 0 {
            return Err(domain("blocklength", 0.0));
        }
        Ok(BeBoundInputs { dim, third_moment, lambda_min, n })
    }
}

/// `254 √m t / (λ_min^{3/2} √n)`.
pub fn berry_esseen_bound(inputs: BeBoundInputs) -> f64 {
    254.0 * (inputs.dim as f64).sqrt() * inputs.third_moment
        / (inputs.lambda_min.powf(1.5) * (inputs.n as f64).sqrt())
}
