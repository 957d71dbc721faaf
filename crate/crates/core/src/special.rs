//! Scalar special functions: Gaussian capacity and dispersion, the standard
//! normal CDF and quantile, log-gamma and the log-scaled modified Bessel
//! function of the first kind.
//!
//! All information quantities are in nats.
//!
//! `log_bessel_i` dispatches on the order:
//!
//! | order        | argument      | method                                   |
//! |--------------|---------------|------------------------------------------|
//! | `> 30`       | any           | uniform (Debye) expansion, 7 terms        |
//! | `<= 30`      | `<= 1000`     | rescaled power series                     |
//! | `<= 30`      | `> 1000`      | large-argument Hankel expansion           |

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Order above which `log_bessel_i` uses the uniform asymptotic expansion.
pub const BESSEL_DEBYE_ORDER: f64 = 30.0;
/// Argument above which small orders use the Hankel expansion.
pub const BESSEL_HANKEL_ARG: f64 = 1000.0;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Signal-to-noise ratio (dimensionless, nonnegative).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Snr(f64);

impl Snr {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value >= 0.0 {
            Ok(Snr(value))
        } else {
            Err(domain("snr", value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// A quantity measured in nats (per channel use, or nats² for dispersions).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Nats(pub f64);

impl Nats {
    pub fn value(self) -> f64 {
        self.0
    }
}

impl fmt::Display for Nats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} nats", self.0)
    }
}

/// `C(s) = ½ log(1 + s)`.
pub fn gaussian_capacity(s: Snr) -> Nats {
    Nats(0.5 * s.0.ln_1p())
}

/// `V(s) = s(s + 2) / (2 (s + 1)²)`.
pub fn gaussian_dispersion(s: Snr) -> Nats {
    let s = s.0;
    // s(s+2)/(s+1)^2 = 1 - 1/(s+1)^2, the second form saturates cleanly
    let r = 1.0 / (1.0 + s);
    if s < 1.0 {
        Nats(s * (s + 2.0) * r * r / 2.0)
    } else {
        Nats(0.5 * (1.0 - r * r))
    }
}

pub(crate) fn cap(s: f64) -> f64 {
    0.5 * s.ln_1p()
}

pub(crate) fn disp(s: f64) -> f64 {
    let r = 1.0 / (1.0 + s);
    if s < 1.0 {
        s * (s + 2.0) * r * r / 2.0
    } else {
        0.5 * (1.0 - r * r)
    }
}

/// Standard normal CDF. `±∞` map to `1`/`0`; NaN is rejected.
pub fn std_normal_cdf(t: f64) -> Result<f64> {
    if t.is_nan() {
        return Err(domain("normal cdf argument", t));
    }
    Ok(phi(t))
}

/// Standard normal density.
pub fn std_normal_pdf(t: f64) -> f64 {
    (-0.5 * t * t - LN_SQRT_2PI).exp()
}

#[inline]
pub(crate) fn phi(t: f64) -> f64 {
    if t == f64::INFINITY {
        1.0
    } else if t == f64::NEG_INFINITY {
        0.0
    } else {
        0.5 * libm::erfc(-t * FRAC_1_SQRT_2)
    }
}

/// Standard normal quantile `Φ⁻¹(p)` for `0 < p < 1`.
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(domain("probability", p));
    }
    Ok(phi_inv(p))
}

// Rational approximation (relative error ~1e-9), see P. J. Acklam.
const ACKLAM_A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_69e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const ACKLAM_B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const ACKLAM_C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const ACKLAM_D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];

fn acklam(p: f64) -> f64 {
    const P_LOW: f64 = 0.02425;
    let (a, b, c, d) = (ACKLAM_A, ACKLAM_B, ACKLAM_C, ACKLAM_D);
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
            / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q
            / (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)
    } else {
        -acklam(1.0 - p)
    }
}

/// Quantile on the lower half; both Newton steps work on the lower tail where
/// `Φ` has full relative precision.
fn phi_inv_lower(p: f64) -> f64 {
    let mut x = acklam(p);
    for _ in 0..2 {
        let f = phi(x) - p;
        let d = std_normal_pdf(x);
        if d > 0.0 {
            x -= f / d;
        }
    }
    x
}

#[inline]
pub(crate) fn phi_inv(p: f64) -> f64 {
    if p <= 0.0 {
        f64::NEG_INFINITY
    } else if p >= 1.0 {
        f64::INFINITY
    } else if p <= 0.5 {
        phi_inv_lower(p)
    } else {
        -phi_inv_lower(1.0 - p)
    }
}

/// `log Γ(z)` for `z > 0`.
pub fn log_gamma(z: f64) -> Result<f64> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(domain("log_gamma argument", z));
    }
    Ok(libm::lgamma(z))
}

pub(crate) fn lgamma(z: f64) -> f64 {
    libm::lgamma(z)
}

/// Stirling part of Binet's first formula, `(z - ½) log z - z + ½ log 2π`.
pub fn stirling_log_gamma(z: f64) -> f64 {
    (z - 0.5) * z.ln() - z + LN_SQRT_2PI
}

/// Upper bound on the Binet remainder `log Γ(z) - stirling_log_gamma(z)`,
/// from bounding its integral by `1/(12 z)`.
pub fn binet_remainder_bound(z: f64) -> f64 {
    1.0 / (12.0 * z)
}

/// Binet upper bound on `log Γ(z)`.
pub fn log_gamma_binet_upper(z: f64) -> f64 {
    stirling_log_gamma(z) + binet_remainder_bound(z)
}

/// `log I_order(z)`, the log of the modified Bessel function of the first kind.
pub fn log_bessel_i(order: f64, z: f64) -> Result<f64> {
    if !order.is_finite() || order < 0.0 {
        return Err(domain("bessel order", order));
    }
    if !z.is_finite() || z < 0.0 {
        return Err(domain("bessel argument", z));
    }
    Ok(log_bessel_i_unchecked(order, z))
}

pub(crate) fn log_bessel_i_unchecked(order: f64, z: f64) -> f64 {
    if z == 0.0 {
        return if order == 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if order > BESSEL_DEBYE_ORDER {
        log_bessel_i_debye(order, z)
    } else if z <= BESSEL_HANKEL_ARG {
        log_bessel_i_series(order, z)
    } else {
        log_bessel_i_hankel(order, z)
    }
}

pub(crate) fn log_bessel_i_series(v: f64, z: f64) -> f64 {
    const RESCALE: f64 = 1e200;
    let q = 0.25 * z * z;
    let mut offset = v * (0.5 * z).ln() - lgamma(v + 1.0);
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    let mut k = 0.0f64;
    loop {
        k += 1.0;
        term *= q / (k * (k + v));
        sum += term;
        if sum > RESCALE {
            sum /= RESCALE;
            term /= RESCALE;
            offset += RESCALE.ln();
        }
        if term < 1e-17 * sum && k * (k + v) > q {
            break;
        }
    }
    offset + sum.ln()
}

pub(crate) fn log_bessel_i_hankel(v: f64, z: f64) -> f64 {
    let mu = 4.0 * v * v;
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    let mut k = 1.0f64;
    while k < 200.0 {
        let next = -term * (mu - (2.0 * k - 1.0).powi(2)) / (8.0 * k * z);
        if next.abs() >= term.abs() && k > 1.0 {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
        k += 1.0;
    }
    z - 0.5 * (2.0 * PI * z).ln() + sum.ln()
}

/// Coefficients of the Debye polynomials `u_0 .. u_6` in powers of `t`,
/// generated from `u_{k+1} = ½ t²(1 - t²) u_k' + ⅛ ∫₀ᵗ (1 - 5s²) u_k(s) ds`.
fn debye_polynomials() -> &'static Vec<Vec<f64>> {
    static POLYS: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    POLYS.get_or_init(|| {
        let mut polys: Vec<Vec<f64>> = vec![vec![1.0]];
        for _ in 0..6 {
            let u = polys.last().unwrap();
            let mut next = vec![0.0; u.len() + 3];
            for (j, &c) in u.iter().enumerate() {
                if c == 0.0 {
                    continue;
                }
                // ½ t²(1 - t²) · j c t^{j-1}
                if j > 0 {
                    let jc = j as f64 * c;
                    next[j + 1] += 0.5 * jc;
                    next[j + 3] -= 0.5 * jc;
                }
                // ⅛ ∫ (1 - 5s²) c s^j
                next[j + 1] += 0.125 * c / (j as f64 + 1.0);
                next[j + 3] -= 0.625 * c / (j as f64 + 3.0);
            }
            polys.push(next);
        }
        polys
    })
}

fn poly_eval(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
}

pub(crate) fn log_bessel_i_debye(v: f64, x: f64) -> f64 {
    let z = x / v;
    let root = (1.0 + z * z).sqrt();
    let t = 1.0 / root;
    let eta = root + (z / (1.0 + root)).ln();
    let mut sum = 0.0;
    let mut vk = 1.0;
    for u in debye_polynomials() {
        sum += poly_eval(u, t) / vk;
        vk *= v;
    }
    v * eta - 0.5 * (2.0 * PI * v).ln() - 0.25 * (1.0 + z * z).ln() + sum.ln()
}

/// Log of the Prokhorov upper bound on `z^{-k} I_k(z)`:
/// `√(π/8) (k² + z²)^{-1/4} (k + √(k² + z²))^{-k} e^{√(k² + z²)}`.
pub fn log_prokhorov_bound(k: f64, z: f64) -> f64 {
    let r = (k * k + z * z).sqrt();
    0.5 * (PI / 8.0).ln() - 0.5 * r.ln() - k * (k + r).ln() + r
}
