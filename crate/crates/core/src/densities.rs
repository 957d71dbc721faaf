//! Monte-Carlo engine for the modified information densities.
//!
//! Codewords are uniform on the power spheres `‖x_j‖² = n p_j`, built by
//! normalizing i.i.d. Gaussian vectors `t_j`. For trial `t` under seed `s`
//! the four Gaussian vectors come from the counter streams
//! `(s, t, 0..4)` in the order `t1, t2, z1, z2`; a zero `t_j` is redrawn from
//! stream `j + 4·attempt`.
//!
//! Densities are reported in the order `(i11, i21, i12, i22)`.

use serde::{Deserialize, Serialize};

use crate::channel::{first_order, second_order, ChannelParams, Mat4, U_DIM};
use crate::error::{domain, Error, Result};
use crate::rng::CounterRng;
use crate::special::phi;
use crate::stats::{fold_trials, ks_distance, Merge, MomentAcc};

const STREAM_T1: u64 = 0;
const STREAM_T2: u64 = 1;
const STREAM_Z1: u64 = 2;
const STREAM_Z2: u64 = 3;
const MAX_REDRAWS: u64 = 64;

/// One block of channel inputs and noises.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereSample {
    pub n: usize,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub z1: Vec<f64>,
    pub z2: Vec<f64>,
    pub t1: Vec<f64>,
    pub t2: Vec<f64>,
}

impl SphereSample {
    pub fn zeros(n: usize) -> Self {
        SphereSample {
            n,
            x1: vec![0.0; n],
            x2: vec![0.0; n],
            z1: vec![0.0; n],
            z2: vec![0.0; n],
            t1: vec![0.0; n],
            t2: vec![0.0; n],
        }
    }

    /// Redraws every vector for `(seed, trial)` in place.
    pub fn draw(&mut self, ch: &ChannelParams, seed: u64, trial: u64) {
        draw_shell(&mut self.t1, &mut self.x1, ch.p1, seed, trial, STREAM_T1);
        draw_shell(&mut self.t2, &mut self.x2, ch.p2, seed, trial, STREAM_T2);
        self.draw_noise(seed, trial);
    }

    /// Redraws only the noises, keeping the codewords.
    pub fn draw_noise(&mut self, seed: u64, trial: u64) {
        CounterRng::new(seed, trial, STREAM_Z1).fill_normals(&mut self.z1);
        CounterRng::new(seed, trial, STREAM_Z2).fill_normals(&mut self.z2);
    }

    /// A sample with the given codewords (rescaled onto their spheres) and
    /// zero noise. `t_j` is set to `x_j/√p_j`.
    pub fn with_codewords(ch: &ChannelParams, x1: &[f64], x2: &[f64]) -> Result<Self> {
        if x1.len() != x2.len() {
            return Err(Error::DimensionMismatch { expected: x1.len(), got: x2.len() });
        }
        let n = x1.len();
        let mut s = SphereSample::zeros(n);
        for (x, t, out, p) in [(x1, &mut s.t1, &mut s.x1, ch.p1), (x2, &mut s.t2, &mut s.x2, ch.p2)] {
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !(norm > 0.0 && norm.is_finite()) {
                return Err(domain("codeword norm", norm));
            }
            let scale = (n as f64 * p).sqrt() / norm;
            for k in 0..n {
                out[k] = x[k] * scale;
                t[k] = out[k] / p.sqrt();
            }
        }
        Ok(s)
    }
}

fn draw_shell(t: &mut [f64], x: &mut [f64], p: f64, seed: u64, trial: u64, stream: u64) {
    let n = t.len();
    for attempt in 0..MAX_REDRAWS {
        CounterRng::new(seed, trial, stream + 4 * attempt).fill_normals(t);
        let norm2: f64 = t.iter().map(|v| v * v).sum();
        if norm2 > 0.0 {
            let scale = (n as f64 * p / norm2).sqrt();
            for k in 0..n {
                x[k] = t[k] * scale;
            }
            return;
        }
    }
    unreachable!("counter stream produced {MAX_REDRAWS} zero vectors");
}

/// Draws block `0` for `seed`.
pub fn sample_sphere_block(ch: &ChannelParams, n: usize, seed: u64) -> Result<SphereSample> {
    sample_sphere_trial(ch, n, seed, 0)
}

pub fn sample_sphere_trial(ch: &ChannelParams, n: usize, seed: u64, trial: u64) -> Result<SphereSample> {
    if n < 2 {
        return Err(domain("blocklength", n as f64));
    }
    let mut s = SphereSample::zeros(n);
    s.draw(ch, seed, trial);
    Ok(s)
}

/// The four modified information densities of one block, in nats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensitySample {
    pub i11: f64,
    pub i21: f64,
    pub i12: f64,
    pub i22: f64,
}

impl DensitySample {
    pub fn as_array(&self) -> [f64; 4] {
        [self.i11, self.i21, self.i12, self.i22]
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Densities from block inner products. Assumes `x_j` lie on their spheres.
pub fn info_densities_closed_form(ch: &ChannelParams, s: &SphereSample) -> DensitySample {
    let a = ch.alphas();
    let f = first_order(ch);
    let n = s.n as f64;
    let zz1 = dot(&s.z1, &s.z1);
    let zz2 = dot(&s.z2, &s.z2);
    let x1z1 = dot(&s.x1, &s.z1);
    let x2z1 = dot(&s.x2, &s.z1);
    let x1z2 = dot(&s.x1, &s.z2);
    let x2z2 = dot(&s.x2, &s.z2);
    let x1x2 = dot(&s.x1, &s.x2);
    let i11 = n * f.i11 + ((a.a11 - 1.0) * (n - zz1) + 2.0 * ch.h11 * x1z1) / (2.0 * a.a11);
    let i21 = n * f.i21 + ((a.a21 - 1.0) * (n - zz2) + 2.0 * ch.h22 * x2z2) / (2.0 * a.a21);
    let i12 = n * f.i12
        + ((a.a12 - 1.0) * (n - zz1)
            + 2.0 * ch.h11 * ch.h21 * x1x2
            + 2.0 * ch.h11 * x1z1
            + 2.0 * ch.h21 * x2z1)
            / (2.0 * a.a12);
    let i22 = n * f.i22
        + ((a.a22 - 1.0) * (n - zz2)
            + 2.0 * ch.h22 * ch.h12 * x1x2
            + 2.0 * ch.h22 * x2z2
            + 2.0 * ch.h12 * x1z2)
            / (2.0 * a.a22);
    DensitySample { i11, i21, i12, i22 }
}

/// Log-density of `N(mean, var)` without the `½ log 2π` term.
#[inline]
fn log_gauss(y: f64, mean: f64, var: f64) -> f64 {
    -0.5 * var.ln() - (y - mean) * (y - mean) / (2.0 * var)
}

/// Densities as letter-by-letter sums of Gaussian log-likelihood ratios.
///
/// Receiver 1 compares `N(h11 x1 + h21 x2, 1)` against `N(h21 x2, α11)` and
/// `N(0, α12)`; receiver 2 compares `N(h12 x1 + h22 x2, 1)` against
/// `N(h12 x1, α21)` and `N(0, α22)`.
pub fn info_densities_log_ratio(ch: &ChannelParams, s: &SphereSample) -> DensitySample {
    let a = ch.alphas();
    let mut out = DensitySample { i11: 0.0, i21: 0.0, i12: 0.0, i22: 0.0 };
    for k in 0..s.n {
        let (x1, x2) = (s.x1[k], s.x2[k]);
        let m1 = ch.h11 * x1 + ch.h21 * x2;
        let m2 = ch.h12 * x1 + ch.h22 * x2;
        let (y1, y2) = (m1 + s.z1[k], m2 + s.z2[k]);
        let w1 = log_gauss(y1, m1, 1.0);
        let w2 = log_gauss(y2, m2, 1.0);
        out.i11 += w1 - log_gauss(y1, ch.h21 * x2, a.a11);
        out.i12 += w1 - log_gauss(y1, 0.0, a.a12);
        out.i21 += w2 - log_gauss(y2, ch.h12 * x1, a.a21);
        out.i22 += w2 - log_gauss(y2, 0.0, a.a22);
    }
    out
}

/// Per-letter U components, in the order
/// `U11 U21 U31 U41 U12 U22 U32 U42 U9 U10`.
pub type UVector = [f64; U_DIM];

/// U vector of letter `k` (zero-based).
pub fn u_vector(ch: &ChannelParams, s: &SphereSample, k: usize) -> Result<UVector> {
    if k >= s.n {
        return Err(Error::IndexOutOfRange { index: k, len: s.n });
    }
    Ok(u_letter(ch, s.t1[k], s.t2[k], s.z1[k], s.z2[k]))
}

#[inline]
fn u_letter(ch: &ChannelParams, t1: f64, t2: f64, z1: f64, z2: f64) -> UVector {
    let (r1, r2) = (ch.p1.sqrt(), ch.p2.sqrt());
    [
        1.0 - z1 * z1,
        ch.h11 * r1 * t1 * z1,
        ch.h21 * r2 * t2 * z1,
        ch.h11 * ch.h21 * r1 * r2 * t1 * t2,
        1.0 - z2 * z2,
        ch.h22 * r2 * t2 * z2,
        ch.h12 * r1 * t1 * z2,
        ch.h12 * ch.h22 * r1 * r2 * t1 * t2,
        t1 * t1 - 1.0,
        t2 * t2 - 1.0,
    ]
}

/// Average of the U vectors over the block.
pub fn u_mean(ch: &ChannelParams, s: &SphereSample) -> UVector {
    let mut m = [0.0; U_DIM];
    for k in 0..s.n {
        let u = u_letter(ch, s.t1[k], s.t2[k], s.z1[k], s.z2[k]);
        for i in 0..U_DIM {
            m[i] += u[i];
        }
    }
    m.map(|v| v / s.n as f64)
}

/// τ map in density order. Requires `u[8] > −1` and `u[9] > −1`.
pub fn tau(ch: &ChannelParams, u: &UVector) -> Result<[f64; 4]> {
    if !(u[8] > -1.0) {
        return Err(domain("u9 (needs > -1)", u[8]));
    }
    if !(u[9] > -1.0) {
        return Err(domain("u10 (needs > -1)", u[9]));
    }
    let a = ch.alphas();
    let r9 = (1.0 + u[8]).sqrt();
    let r10 = (1.0 + u[9]).sqrt();
    Ok([
        (a.a11 - 1.0) * u[0] + 2.0 * u[1] / r9,
        (a.a21 - 1.0) * u[4] + 2.0 * u[5] / r10,
        (a.a12 - 1.0) * u[0] + 2.0 * u[1] / r9 + 2.0 * u[2] / r10 + 2.0 * u[3] / (r9 * r10),
        (a.a22 - 1.0) * u[4] + 2.0 * u[5] / r10 + 2.0 * u[6] / r9 + 2.0 * u[7] / (r9 * r10),
    ])
}

/// Densities rebuilt from the block-averaged U vector.
pub fn densities_from_tau(ch: &ChannelParams, s: &SphereSample) -> Result<DensitySample> {
    let t = tau(ch, &u_mean(ch, s))?;
    let f = first_order(ch).as_array();
    let scales = ch.alphas().density_scales();
    let n = s.n as f64;
    let v: Vec<f64> = (0..4).map(|l| n * f[l] + n / (2.0 * scales[l]) * t[l]).collect();
    Ok(DensitySample { i11: v[0], i21: v[1], i12: v[2], i22: v[3] })
}

/// Central finite-difference Jacobian of τ at the origin, row-major 4×10.
pub fn tau_jacobian_fd(ch: &ChannelParams, h: f64) -> Vec<f64> {
    let mut j = vec![0.0; 4 * U_DIM];
    for c in 0..U_DIM {
        let mut up = [0.0; U_DIM];
        let mut dn = [0.0; U_DIM];
        up[c] = h;
        dn[c] = -h;
        let fu = tau(ch, &up).expect("step inside domain");
        let fd = tau(ch, &dn).expect("step inside domain");
        for r in 0..4 {
            j[r * U_DIM + c] = (fu[r] - fd[r]) / (2.0 * h);
        }
    }
    j
}

/// Mean and covariance of the density vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalStats {
    pub trials: u64,
    /// Mean of `ĩ/n`.
    pub mean: [f64; 4],
    pub mean_se: [f64; 4],
    /// Covariance of `ĩ/√n`.
    pub cov: Mat4,
    pub cov_se: Mat4,
    /// Letter-averaged `E‖W_k − E W_k‖³` of the per-letter pair `(ĩ11k, ĩ21k)`.
    pub third_abs_moment: f64,
}

pub const MIN_STAT_TRIALS: u64 = 1000;

struct StatsAcc {
    moments: MomentAcc,
    third: crate::stats::CompensatedSum,
}

impl Merge for StatsAcc {
    fn merge(&mut self, o: &Self) {
        self.moments.merge(&o.moments);
        self.third.merge(&o.third);
    }
}

/// Codeword policy for [`empirical_stats_with`].
#[derive(Debug, Clone, PartialEq)]
pub enum Codewords {
    /// Fresh sphere codewords every trial.
    Random,
    /// Fixed on-sphere codewords, noise only.
    Fixed { x1: Vec<f64>, x2: Vec<f64> },
}

/// Moments of the densities over random sphere codewords.
pub fn empirical_stats(ch: &ChannelParams, n: usize, trials: u64, seed: u64) -> Result<EmpiricalStats> {
    empirical_stats_with(ch, n, trials, seed, &Codewords::Random)
}

pub fn empirical_stats_with(
    ch: &ChannelParams,
    n: usize,
    trials: u64,
    seed: u64,
    codewords: &Codewords,
) -> Result<EmpiricalStats> {
    if trials < MIN_STAT_TRIALS {
        return Err(Error::InsufficientTrials { got: trials as usize, min: MIN_STAT_TRIALS as usize });
    }
    if n < 2 {
        return Err(domain("blocklength", n as f64));
    }
    let template = match codewords {
        Codewords::Random => SphereSample::zeros(n),
        Codewords::Fixed { x1, x2 } => {
            if x1.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: x1.len() });
            }
            SphereSample::with_codewords(ch, x1, x2)?
        }
    };
    let fixed = matches!(codewords, Codewords::Fixed { .. });
    let f = first_order(ch).as_array();
    let nf = n as f64;
    let shift: Vec<f64> = f.iter().map(|i| i * nf.sqrt()).collect();
    let a = ch.alphas();
    let acc = fold_trials(
        trials,
        || StatsAcc { moments: MomentAcc::new(shift.clone()), third: Default::default() },
        || template.clone(),
        |s, acc, t| {
            if fixed {
                s.draw_noise(seed, t);
            } else {
                s.draw(ch, seed, t);
            }
            let d = info_densities_closed_form(ch, s).as_array();
            acc.moments.push(&d.map(|v| v / nf.sqrt()));
            let mut m3 = 0.0;
            for k in 0..n {
                let e1 = letter_density(s.x1[k], s.z1[k], ch.h11, a.a11)
                    - letter_mean(s.x1[k], ch.h11, a.a11);
                let e2 = letter_density(s.x2[k], s.z2[k], ch.h22, a.a21)
                    - letter_mean(s.x2[k], ch.h22, a.a21);
                m3 += (e1 * e1 + e2 * e2).powf(1.5);
            }
            acc.third.add(m3 / nf);
        },
    );
    let mean_v = acc.moments.mean();
    let mean_se_v = acc.moments.mean_se();
    let cov_v = acc.moments.cov();
    let cov_se_v = acc.moments.cov_se();
    let mut out = EmpiricalStats {
        trials,
        mean: [0.0; 4],
        mean_se: [0.0; 4],
        cov: [[0.0; 4]; 4],
        cov_se: [[0.0; 4]; 4],
        third_abs_moment: acc.third.value() / trials as f64,
    };
    for i in 0..4 {
        out.mean[i] = mean_v[i] / nf.sqrt();
        out.mean_se[i] = mean_se_v[i] / nf.sqrt();
        for j in 0..4 {
            out.cov[i][j] = cov_v[i * 4 + j];
            out.cov_se[i][j] = cov_se_v[i * 4 + j];
        }
    }
    Ok(out)
}

/// Single-user density of one letter: `½ log α − ½ z² + (h x + z)²/(2α)`.
#[inline]
fn letter_density(x: f64, z: f64, h: f64, alpha: f64) -> f64 {
    0.5 * alpha.ln() - 0.5 * z * z + (h * x + z).powi(2) / (2.0 * alpha)
}

/// Mean of [`letter_density`] over the noise.
#[inline]
fn letter_mean(x: f64, h: f64, alpha: f64) -> f64 {
    0.5 * alpha.ln() + (1.0 + h * h * x * x) / (2.0 * alpha) - 0.5
}

/// Moments of the U vector over `blocks × n` letters.
pub fn u_moments(ch: &ChannelParams, n: usize, blocks: u64, seed: u64) -> Result<MomentAcc> {
    if n < 2 {
        return Err(domain("blocklength", n as f64));
    }
    Ok(fold_trials(
        blocks,
        || MomentAcc::new(vec![0.0; U_DIM]),
        || SphereSample::zeros(n),
        |s, acc, t| {
            s.draw(ch, seed, t);
            for k in 0..n {
                acc.push(&u_letter(ch, s.t1[k], s.t2[k], s.z1[k], s.z2[k]));
            }
        },
    ))
}

/// Kolmogorov–Smirnov distance between `(ĩ11 − n I11)/√(n V1)` and `Φ`.
pub fn clt_ks_distance(ch: &ChannelParams, n: usize, trials: u64, seed: u64) -> Result<f64> {
    if n < 2 {
        return Err(domain("blocklength", n as f64));
    }
    let i11 = first_order(ch).i11;
    let v1 = second_order(ch).v1;
    let mut xs: Vec<f64> = {
        use rayon::prelude::*;
        (0..trials)
            .into_par_iter()
            .map_init(
                || SphereSample::zeros(n),
                |s, t| {
                    s.draw(ch, seed, t);
                    let d = info_densities_closed_form(ch, s);
                    (d.i11 - n as f64 * i11) / (n as f64 * v1).sqrt()
                },
            )
            .collect()
    };
    Ok(ks_distance(&mut xs, phi))
}
