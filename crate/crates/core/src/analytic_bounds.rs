//! Numerical checks of the density-ratio bounds behind the finiteness of `K`.
//!
//! Each receiver has two ratios. With sphere inputs, `D_j1` compares the true
//! law of the received block given the interfering codeword against the
//! auxiliary Gaussian `N(·, α)`; `D_j2` compares the law of the noiseless
//! superposition `B = h x_own + h' x_cross` against `N(0, σ²)`. Both depend on
//! the block only through a squared norm, so each supremum is a
//! one-dimensional scan over `z = ‖·‖²/n`.
//!
//! Receiver 2 is receiver 1 with the indices swapped: its own link is
//! `h22²p2` and its cross link `h12²p1`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelParams;
use crate::error::{domain, Error, Result};
use crate::rng::CounterRng;
use crate::special::{binet_remainder_bound, lgamma, log_bessel_i_unchecked};
use crate::stats::{fold_trials, CompensatedSum, Merge};

/// Values above this count as violations of a `≤ 0` claim.
pub const NONPOSITIVE_TOL: f64 = 1e-10;

/// Default number of points in a grid scan.
pub const SCAN_POINTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Receiver {
    One,
    Two,
}

/// Own and cross received SNRs of one receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Link {
    own: f64,
    cross: f64,
}

impl Link {
    fn of(ch: &ChannelParams, rx: Receiver) -> Self {
        match rx {
            Receiver::One => Link { own: ch.h11 * ch.h11 * ch.p1, cross: ch.h21 * ch.h21 * ch.p2 },
            Receiver::Two => Link { own: ch.h22 * ch.h22 * ch.p2, cross: ch.h12 * ch.h12 * ch.p1 },
        }
    }

    fn sigma2(&self) -> f64 {
        self.own + self.cross
    }

    /// Open interval of `‖b‖²/n` on which the superposition has support.
    fn band(&self) -> (f64, f64) {
        let (a, c) = (self.own.sqrt(), self.cross.sqrt());
        ((a - c).powi(2), (a + c).powi(2))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    pub grid: Vec<(f64, f64)>,
    pub max_value: f64,
    pub argmax: f64,
    /// Maximizer after golden-section refinement around the grid maximum.
    pub refined_argmax: f64,
    pub violation_count: usize,
    pub tolerance: f64,
}

impl BoundReport {
    pub fn passed(&self) -> bool {
        self.violation_count == 0
    }
}

fn phi_core(s: f64, xi: f64, z: f64) -> f64 {
    let r = (xi * xi + 4.0 * s * z).sqrt();
    (2.0 * (1.0 + s) * (-(1.0 + s)).exp()).ln() - s * z / (s + 1.0) + r - xi * (xi + r).ln()
        - 0.5 * (1.0 - xi) * r.ln()
}

/// Limiting exponent `φ(z)` of the `D_j1` bound; zero at `z = 1 + own SNR`.
pub fn phi_limit(ch: &ChannelParams, z: f64) -> Result<f64> {
    phi_limit_at(ch, Receiver::One, z)
}

pub fn phi_limit_at(ch: &ChannelParams, rx: Receiver, z: f64) -> Result<f64> {
    if !(z > 0.0 && z.is_finite()) {
        return Err(domain("phi argument", z));
    }
    Ok(phi_core(Link::of(ch, rx).own, 1.0, z))
}

/// `ξ = (n/2 − 1)/(n/2)`.
pub fn xi(n: usize) -> f64 {
    let m = n as f64 / 2.0;
    (m - 1.0) / m
}

/// Finite-`n` exponent `φ_ξ(z)`.
pub fn phi_finite(ch: &ChannelParams, rx: Receiver, n: usize, z: f64) -> Result<f64> {
    if !(z > 0.0 && z.is_finite()) {
        return Err(domain("phi argument", z));
    }
    if n < 4 {
        return Err(domain("blocklength", n as f64));
    }
    Ok(phi_core(Link::of(ch, rx).own, xi(n), z))
}

fn rho_core(l: Link, z: f64) -> f64 {
    let s2 = l.sigma2();
    let w = (z + l.own - l.cross).powi(2) / (4.0 * l.own * z);
    (s2 / (std::f64::consts::E * l.cross)).ln() + z / s2 + (1.0 - w).ln()
}

/// Limiting exponent `ρ(z)` of the superposition ratio; zero at `z = σ²`.
pub fn rho_limit(ch: &ChannelParams, z: f64) -> Result<f64> {
    rho_limit_at(ch, Receiver::One, z)
}

pub fn rho_limit_at(ch: &ChannelParams, rx: Receiver, z: f64) -> Result<f64> {
    let l = Link::of(ch, rx);
    let (lo, hi) = l.band();
    if !(z > lo && z < hi) {
        return Err(domain("rho argument (outside support band)", z));
    }
    Ok(rho_core(l, z))
}

/// Support band of `‖b‖²/n`.
pub fn rho_band(ch: &ChannelParams, rx: Receiver) -> (f64, f64) {
    Link::of(ch, rx).band()
}

/// `n_lin` uniform plus `n_log` log-spaced points on `[lo, hi]`, sorted.
pub fn hybrid_grid(lo: f64, hi: f64, n_lin: usize, n_log: usize) -> Vec<f64> {
    let mut g = Vec::with_capacity(n_lin + n_log);
    for k in 0..n_lin {
        g.push(lo + (hi - lo) * k as f64 / (n_lin.max(2) - 1) as f64);
    }
    let (a, b) = (lo.ln(), hi.ln());
    for k in 0..n_log {
        g.push((a + (b - a) * k as f64 / (n_log.max(2) - 1) as f64).exp());
    }
    g.sort_by(|x, y| x.total_cmp(y));
    g.dedup();
    g
}

/// Golden-section search for a maximum of a unimodal `f` on `[a, b]`.
pub fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-13 * (1.0 + a.abs()) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

fn scan(name: &str, grid: Vec<f64>, f: impl Fn(f64) -> f64, tol: f64) -> BoundReport {
    let vals: Vec<(f64, f64)> = grid.iter().map(|&z| (z, f(z))).collect();
    let (imax, &(argmax, max_value)) = vals
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .expect("non-empty grid");
    let lo = vals[imax.saturating_sub(1)].0;
    let hi = vals[(imax + 1).min(vals.len() - 1)].0;
    let (refined_argmax, _) = golden_max(&f, lo, hi);
    let violation_count = vals.iter().filter(|v| v.1 > tol).count();
    BoundReport {
        name: name.to_string(),
        grid: vals,
        max_value,
        argmax,
        refined_argmax,
        violation_count,
        tolerance: tol,
    }
}

/// Scans `φ` over `[0.005 z*, 10 z*]` with `z* = 1 + own SNR`.
pub fn scan_phi(ch: &ChannelParams, rx: Receiver, points: usize) -> BoundReport {
    let s = Link::of(ch, rx).own;
    let zs = 1.0 + s;
    let n_log = points / 5;
    let grid = hybrid_grid(0.005 * zs, 10.0 * zs, points - n_log, n_log);
    let name = match rx {
        Receiver::One => "phi_limit_rx1",
        Receiver::Two => "phi_limit_rx2",
    };
    scan(name, grid, |z| phi_core(s, 1.0, z), NONPOSITIVE_TOL)
}

/// Scans `ρ` over its support band with endpoints pulled in by `10⁻⁶` of the
/// band width.
pub fn scan_rho(ch: &ChannelParams, rx: Receiver, points: usize) -> BoundReport {
    let l = Link::of(ch, rx);
    let (lo, hi) = l.band();
    let inset = 1e-6 * (hi - lo);
    let n_log = points / 5;
    let grid = hybrid_grid(lo + inset, hi - inset, points - n_log, n_log);
    let name = match rx {
        Receiver::One => "rho_limit_rx1",
        Receiver::Two => "rho_limit_rx2",
    };
    scan(name, grid, |z| rho_core(l, z), NONPOSITIVE_TOL)
}

/// `log ½ + log √(π/8) + ½ log 2π`.
pub fn c11() -> f64 {
    0.5f64.ln() + (PI / 8.0).sqrt().ln() + 0.5 * (2.0 * PI).ln()
}

fn log_d1_exact(l: Link, n: usize, r2: f64) -> f64 {
    let m = n as f64 / 2.0;
    let s = l.own;
    let nu = m - 1.0;
    let w = (r2 * n as f64 * s).sqrt();
    let bessel = if w > 0.0 {
        log_bessel_i_unchecked(nu, w) - nu * w.ln()
    } else {
        -nu * 2f64.ln() - lgamma(nu + 1.0)
    };
    0.5f64.ln() + lgamma(m) + m * (2.0 * (-s).exp() * (1.0 + s)).ln() - s * r2 / (2.0 * (1.0 + s))
        + bessel
}

fn log_d1_bound(l: Link, n: usize, r2: f64) -> f64 {
    let m = n as f64 / 2.0;
    c11() + binet_remainder_bound(m) + m * phi_core(l.own, xi(n), r2 / n as f64)
}

/// Exact `log D_j1` at `r² = ‖y_j − h x_cross‖²`.
pub fn log_d1(ch: &ChannelParams, rx: Receiver, n: usize, r2: f64) -> Result<f64> {
    if n < 2 {
        return Err(domain("blocklength", n as f64));
    }
    if !(r2 >= 0.0 && r2.is_finite()) {
        return Err(domain("squared norm", r2));
    }
    Ok(log_d1_exact(Link::of(ch, rx), n, r2))
}

/// `c11 + c_n + (n/2) φ_ξ(r²/n)` with `c_n` replaced by its Binet bound.
pub fn log_d1_upper(ch: &ChannelParams, rx: Receiver, n: usize, r2: f64) -> Result<f64> {
    if n < 4 {
        return Err(domain("blocklength", n as f64));
    }
    if !(r2 > 0.0 && r2.is_finite()) {
        return Err(domain("squared norm", r2));
    }
    Ok(log_d1_bound(Link::of(ch, rx), n, r2))
}

fn log_d2_exact(l: Link, n: usize, rho2: f64) -> f64 {
    let nf = n as f64;
    let a = (nf * l.own).sqrt();
    let c = (nf * l.cross).sqrt();
    let rho = rho2.sqrt();
    let w = (rho2 - a * a - c * c) / (2.0 * a * c);
    if !(w.abs() < 1.0) {
        return f64::NEG_INFINITY;
    }
    let m = nf / 2.0;
    // density of the cosine between the two unit directions
    let log_ft = lgamma(m) - 0.5 * PI.ln() - lgamma((nf - 1.0) / 2.0) + 0.5 * (nf - 3.0) * (1.0 - w * w).ln();
    let log_surface = 2f64.ln() + m * PI.ln() + (nf - 1.0) * rho.ln() - lgamma(m);
    let log_p = log_ft + rho.ln() - (a * c).ln() - log_surface;
    let s2 = l.sigma2();
    let log_q = -m * (2.0 * PI * s2).ln() - rho2 / (2.0 * s2);
    log_p - log_q
}

/// Exact `log D_j2` at `ρ² = ‖b‖²`; `−∞` outside the support.
pub fn log_d2(ch: &ChannelParams, rx: Receiver, n: usize, rho2: f64) -> Result<f64> {
    if n < 3 {
        return Err(domain("blocklength", n as f64));
    }
    if !(rho2 >= 0.0 && rho2.is_finite()) {
        return Err(domain("squared norm", rho2));
    }
    Ok(log_d2_exact(Link::of(ch, rx), n, rho2))
}

/// Outcome of [`finite_n_ratio_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioCheck {
    pub n: usize,
    pub samples: u64,
    /// `(z, log D − bound)` per sample; violations are positive entries.
    pub report: BoundReport,
    pub max_log_d: f64,
    /// `c11 + c_n + (n/2) sup_z φ_ξ(z)`.
    pub sup_bound: f64,
    /// Mean of `D` under the auxiliary law and its standard error.
    pub q_mean: f64,
    pub q_mean_se: f64,
}

#[derive(Default)]
struct RatioAcc {
    violations: usize,
    max_log_d: f64,
    max_gap: f64,
    q_sum: CompensatedSum,
    q_sq: CompensatedSum,
    gaps: Vec<(f64, f64)>,
}

impl Merge for RatioAcc {
    fn merge(&mut self, o: &Self) {
        self.violations += o.violations;
        self.max_log_d = self.max_log_d.max(o.max_log_d);
        self.max_gap = self.max_gap.max(o.max_gap);
        self.q_sum.merge(&o.q_sum);
        self.q_sq.merge(&o.q_sq);
        self.gaps.extend_from_slice(&o.gaps);
    }
}

/// Draws `‖y − h x_cross‖²` from the true law and from the auxiliary law,
/// compares the exact `log D_j1` against its analytic bound at every true
/// draw and averages `D_j1` over the auxiliary draws.
///
/// Odd `n` is rejected.
pub fn finite_n_ratio_check(ch: &ChannelParams, rx: Receiver, n: usize, samples: u64, seed: u64) -> Result<RatioCheck> {
    if n % 2 == 1 {
        return Err(domain("blocklength (must be even)", n as f64));
    }
    if n < 10 {
        return Err(domain("blocklength (must be at least 10)", n as f64));
    }
    if samples < 2 {
        return Err(Error::InsufficientTrials { got: samples as usize, min: 2 });
    }
    let l = Link::of(ch, rx);
    let nf = n as f64;
    let amp = (nf * l.own).sqrt();
    let alpha = 1.0 + l.own;
    let acc = fold_trials(
        samples,
        || RatioAcc { max_log_d: f64::NEG_INFINITY, max_gap: f64::NEG_INFINITY, ..Default::default() },
        || (),
        |_, acc, t| {
            // true law: ‖amp·e1 + Z‖²
            let g = CounterRng::new(seed, t, 0);
            let mut r2 = (amp + g.normal_at(0)).powi(2);
            for k in 1..n as u64 {
                r2 += g.normal_at(k).powi(2);
            }
            let exact = log_d1_exact(l, n, r2);
            let gap = exact - log_d1_bound(l, n, r2);
            if gap > 0.0 {
                acc.violations += 1;
            }
            acc.max_log_d = acc.max_log_d.max(exact);
            acc.max_gap = acc.max_gap.max(gap);
            acc.gaps.push((r2 / nf, gap));
            // auxiliary law: α χ²_n
            let q = CounterRng::new(seed, t, 1);
            let mut chi = 0.0;
            for k in 0..n as u64 {
                chi += q.normal_at(k).powi(2);
            }
            let d = log_d1_exact(l, n, alpha * chi).exp();
            acc.q_sum.add(d);
            acc.q_sq.add(d * d);
        },
    );
    let sn = samples as f64;
    let q_mean = acc.q_sum.value() / sn;
    let q_var = (acc.q_sq.value() / sn - q_mean * q_mean).max(0.0) * sn / (sn - 1.0);
    let phi_scan = scan("phi_xi", hybrid_grid(0.005 * alpha, 10.0 * alpha, 4000, 1000), |z| phi_core(l.own, xi(n), z), f64::INFINITY);
    let (_, phi_sup) = golden_max(|z| phi_core(l.own, xi(n), z), phi_scan.refined_argmax * 0.9, phi_scan.refined_argmax * 1.1);
    let m = nf / 2.0;
    let sup_bound = c11() + binet_remainder_bound(m) + m * phi_sup.max(phi_scan.max_value);
    let (argmax, max_value) = acc
        .gaps
        .iter()
        .copied()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap_or((f64::NAN, f64::NAN));
    Ok(RatioCheck {
        n,
        samples,
        report: BoundReport {
            name: format!("log_d1_minus_bound_n{n}"),
            grid: acc.gaps,
            max_value,
            argmax,
            refined_argmax: argmax,
            violation_count: acc.violations,
            tolerance: 0.0,
        },
        max_log_d: acc.max_log_d,
        sup_bound,
        q_mean,
        q_mean_se: (q_var / sn).sqrt(),
    })
}

/// Sup of the exact ratios and their sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KEstimate {
    pub n: usize,
    pub k11: f64,
    pub k12: f64,
    pub k21: f64,
    pub k22: f64,
    pub total: f64,
}

fn sup_on(f: impl Fn(f64) -> f64, lo: f64, hi: f64, points: usize) -> f64 {
    let grid = hybrid_grid(lo, hi, points - points / 5, points / 5);
    let vals: Vec<f64> = grid.iter().map(|&z| f(z)).collect();
    let (i, &best) = vals.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).expect("grid");
    let a = grid[i.saturating_sub(1)];
    let b = grid[(i + 1).min(grid.len() - 1)];
    let (_, refined) = golden_max(&f, a, b);
    best.max(refined)
}

/// Numeric `K = K11 + K12 + K21 + K22` from the exact ratio suprema at `n`.
///
/// `K_j2` uses the superposition ratio, which dominates the output ratio.
pub fn k_estimate(ch: &ChannelParams, n: usize) -> Result<KEstimate> {
    if n < 4 {
        return Err(domain("blocklength", n as f64));
    }
    let nf = n as f64;
    let one = |rx| {
        let l = Link::of(ch, rx);
        let hi = 10.0 * (1.0 + l.own) + 10.0;
        sup_on(|z| log_d1_exact(l, n, z * nf), 1e-6 * hi, hi, 4000).exp()
    };
    let two = |rx| {
        let l = Link::of(ch, rx);
        let (lo, hi) = l.band();
        let inset = 1e-9 * (hi - lo);
        sup_on(|z| log_d2_exact(l, n, z * nf), lo + inset, hi - inset, 4000).exp()
    };
    let (k11, k12, k21, k22) = (one(Receiver::One), two(Receiver::One), one(Receiver::Two), two(Receiver::Two));
    Ok(KEstimate { n, k11, k12, k21, k22, total: k11 + k12 + k21 + k22 })
}
