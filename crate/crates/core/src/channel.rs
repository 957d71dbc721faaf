//! Gaussian interference channel parameters, regime classification and the
//! first- and second-order quantities at the corner of the capacity region.
//!
//! Density index order used throughout the crate is `(i11, i21, i12, i22)`:
//! the two single-user densities first, then the two sum-rate densities.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::linalg::{matmul, transpose};
use crate::special::{cap, disp};

/// Relative guard band applied to the regime slacks.
pub const REGIME_GUARD: f64 = 1e-12;

/// Channel gains `h_jk` (transmitter `k` to receiver `j` for the cross terms
/// `h21`, `h12`) and power budgets.
///
/// Receiver 1 observes `h11 x1 + h21 x2 + z1` and receiver 2 observes
/// `h12 x1 + h22 x2 + z2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawChannel")]
pub struct ChannelParams {
    pub h11: f64,
    pub h12: f64,
    pub h21: f64,
    pub h22: f64,
    pub p1: f64,
    pub p2: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    h11: f64,
    h12: f64,
    h21: f64,
    h22: f64,
    p1: f64,
    p2: f64,
}

impl TryFrom<RawChannel> for ChannelParams {
    type Error = Error;

    fn try_from(r: RawChannel) -> Result<Self> {
        ChannelParams::new(r.h11, r.h12, r.h21, r.h22, r.p1, r.p2)
    }
}

impl ChannelParams {
    pub fn new(h11: f64, h12: f64, h21: f64, h22: f64, p1: f64, p2: f64) -> Result<Self> {
        for (what, v) in [
            ("h11", h11),
            ("h12", h12),
            ("h21", h21),
            ("h22", h22),
            ("p1", p1),
            ("p2", p2),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(domain(what, v));
            }
        }
        Ok(ChannelParams { h11, h12, h21, h22, p1, p2 })
    }

    /// Unit powers, unit direct gains, `h21 = 3`, `h12 = 4`.
    pub fn reference() -> Self {
        ChannelParams { h11: 1.0, h12: 4.0, h21: 3.0, h22: 1.0, p1: 1.0, p2: 1.0 }
    }

    /// Direct-link SNR of user 1.
    pub fn snr1(&self) -> f64 {
        self.h11 * self.h11 * self.p1
    }

    pub fn snr2(&self) -> f64 {
        self.h22 * self.h22 * self.p2
    }

    pub fn alphas(&self) -> Alphas {
        Alphas::new(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeTag {
    NotVeryStrong,
    VeryStrongBoundary,
    StrictlyVeryStrong,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub tag: RegimeTag,
    pub slack1: f64,
    pub slack2: f64,
}

/// Slacks `h21²/(1+h11²p1) − h22²` and `h12²/(1+h22²p2) − h11²`. A slack whose
/// magnitude is below [`REGIME_GUARD`] relative to its terms counts as zero.
pub fn classify_regime(ch: &ChannelParams) -> Regime {
    let a = ch.h21 * ch.h21 / (1.0 + ch.snr1());
    let b = ch.h12 * ch.h12 / (1.0 + ch.snr2());
    let slack1 = a - ch.h22 * ch.h22;
    let slack2 = b - ch.h11 * ch.h11;
    let snap = |s: f64, scale: f64| if s.abs() <= REGIME_GUARD * scale { 0.0 } else { s };
    let s1 = snap(slack1, a.max(ch.h22 * ch.h22));
    let s2 = snap(slack2, b.max(ch.h11 * ch.h11));
    let tag = if s1 > 0.0 && s2 > 0.0 {
        RegimeTag::StrictlyVeryStrong
    } else if s1 >= 0.0 && s2 >= 0.0 {
        RegimeTag::VeryStrongBoundary
    } else {
        RegimeTag::NotVeryStrong
    };
    Regime { tag, slack1, slack2 }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstOrder {
    pub i11: f64,
    pub i21: f64,
    pub i12: f64,
    pub i22: f64,
}

impl FirstOrder {
    /// `(i11, i21, i12, i22)`.
    pub fn as_array(&self) -> [f64; 4] {
        [self.i11, self.i21, self.i12, self.i22]
    }
}

pub fn first_order(ch: &ChannelParams) -> FirstOrder {
    let a = ch.alphas();
    FirstOrder {
        i11: cap(a.a11 - 1.0),
        i21: cap(a.a21 - 1.0),
        i12: cap(a.a12 - 1.0),
        i22: cap(a.a22 - 1.0),
    }
}

/// Variance coefficients of the U-vector components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alphas {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
    pub a33: f64,
    pub a44: f64,
    pub a48: f64,
    pub a77: f64,
    pub a88: f64,
}

impl Alphas {
    pub fn new(ch: &ChannelParams) -> Self {
        let s11 = ch.h11 * ch.h11 * ch.p1;
        let s22 = ch.h22 * ch.h22 * ch.p2;
        let c21 = ch.h21 * ch.h21 * ch.p2;
        let c12 = ch.h12 * ch.h12 * ch.p1;
        Alphas {
            a11: 1.0 + s11,
            a12: 1.0 + s11 + c21,
            a21: 1.0 + s22,
            a22: 1.0 + c12 + s22,
            a33: c21,
            a44: s11 * c21,
            a48: ch.p1 * ch.p2 * ch.h11 * ch.h21 * ch.h12 * ch.h22,
            a77: c12,
            a88: c12 * s22,
        }
    }

    /// `(α11, α21, α12, α22)`, matching the density order.
    pub fn density_scales(&self) -> [f64; 4] {
        [self.a11, self.a21, self.a12, self.a22]
    }
}

/// `a(b+2) / (2(1+a)(1+b))`; reduces to the one-argument dispersion at `a = b`.
pub fn cross_dispersion(a: f64, b: f64) -> f64 {
    a * (b + 2.0) / (2.0 * (1.0 + a) * (1.0 + b))
}

pub type Mat4 = [[f64; 4]; 4];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondOrder {
    pub v1: f64,
    pub v2: f64,
    pub vd: Mat4,
    pub alphas: Alphas,
}

/// Closed-form entries of the dispersion matrix.
pub fn second_order(ch: &ChannelParams) -> SecondOrder {
    let a = ch.alphas();
    let s1 = a.a11 - 1.0;
    let s2 = a.a21 - 1.0;
    let s12 = a.a12 - 1.0;
    let s22 = a.a22 - 1.0;
    let v1 = disp(s1);
    let v2 = disp(s2);
    let v13 = cross_dispersion(s1, s12);
    let v24 = cross_dispersion(s2, s22);
    let v33 = disp(s12) + a.a44 / (a.a12 * a.a12);
    let v44 = disp(s22) + a.a88 / (a.a22 * a.a22);
    let v34 = a.a48 / (a.a12 * a.a22);
    let vd = [
        [v1, 0.0, v13, 0.0],
        [0.0, v2, 0.0, v24],
        [v13, 0.0, v33, v34],
        [0.0, v24, v34, v44],
    ];
    SecondOrder { v1, v2, vd, alphas: a }
}

/// Number of per-letter U components.
pub const U_DIM: usize = 10;

/// Covariance of one U-vector letter, row-major 10×10.
pub fn u_covariance(ch: &ChannelParams) -> Vec<f64> {
    let a = ch.alphas();
    let diag = [2.0, a.a11 - 1.0, a.a33, a.a44, 2.0, a.a21 - 1.0, a.a77, a.a88, 2.0, 2.0];
    let mut c = vec![0.0; U_DIM * U_DIM];
    for (i, d) in diag.iter().enumerate() {
        c[i * U_DIM + i] = *d;
    }
    c[3 * U_DIM + 7] = a.a48;
    c[7 * U_DIM + 3] = a.a48;
    c
}

/// Jacobian of the τ map at the origin, row-major 4×10, rows in density order.
pub fn tau_jacobian_at_zero(ch: &ChannelParams) -> Vec<f64> {
    let a = ch.alphas();
    let mut j = vec![0.0; 4 * U_DIM];
    j[0] = a.a11 - 1.0;
    j[1] = 2.0;
    j[U_DIM + 4] = a.a21 - 1.0;
    j[U_DIM + 5] = 2.0;
    j[2 * U_DIM] = a.a12 - 1.0;
    for c in 1..4 {
        j[2 * U_DIM + c] = 2.0;
    }
    j[3 * U_DIM + 4] = a.a22 - 1.0;
    for c in 5..8 {
        j[3 * U_DIM + c] = 2.0;
    }
    j
}

/// `¼ Λ J Cov(U) Jᵀ Λ` assembled by explicit matrix products.
pub fn vd_from_matrices(ch: &ChannelParams) -> Mat4 {
    let j = tau_jacobian_at_zero(ch);
    let c = u_covariance(ch);
    let jc = matmul(&j, &c, 4, U_DIM, U_DIM);
    let m = matmul(&jc, &transpose(&j, 4, U_DIM), 4, U_DIM, 4);
    let lam = ch.alphas().density_scales();
    let mut out = [[0.0; 4]; 4];
    for r in 0..4 {
        for s in 0..4 {
            out[r][s] = 0.25 * m[r * 4 + s] / (lam[r] * lam[s]);
        }
    }
    out
}

/// Corners of the capacity rectangle `R1 ≤ I11, R2 ≤ I21`, counter-clockwise
/// from the origin.
pub fn capacity_region_vertices(ch: &ChannelParams) -> Result<[(f64, f64); 4]> {
    let r = classify_regime(ch);
    if r.tag == RegimeTag::NotVeryStrong {
        return Err(Error::UnsupportedRegime(format!(
            "capacity rectangle needs very strong interference (slacks {:e}, {:e})",
            r.slack1, r.slack2
        )));
    }
    let f = first_order(ch);
    Ok([(0.0, 0.0), (f.i11, 0.0), (f.i11, f.i21), (0.0, f.i21)])
}
