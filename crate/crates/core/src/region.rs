//! Second-order capacity regions at the boundary of the capacity rectangle.

use serde::{Deserialize, Serialize};

use crate::channel::{classify_regime, first_order, second_order, ChannelParams, RegimeTag};
use crate::error::{domain, Error, Result};
use crate::special::{cap, disp, phi, phi_inv, Snr};

/// Relative tolerance used when comparing a first-order rate against the
/// corresponding mutual information.
pub const KAPPA_REL_TOL: f64 = 1e-9;

/// Distance kept between `Φ(−l1/√v1)` and `1−ε` at the end of a trace where
/// `l2` diverges.
pub const TRACE_CLIP: f64 = 1e-14;

/// Fraction of `ε` left between the other end of the trace and probability 1.
const TRACE_TAIL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetPoint {
    pub kappa1: f64,
    pub kappa2: f64,
    pub epsilon: f64,
}

impl TargetPoint {
    pub fn new(kappa1: f64, kappa2: f64, epsilon: f64) -> Result<Self> {
        if !(kappa1.is_finite() && kappa1 >= 0.0) {
            return Err(domain("kappa1", kappa1));
        }
        if !(kappa2.is_finite() && kappa2 >= 0.0) {
            return Err(domain("kappa2", kappa2));
        }
        check_epsilon(epsilon)?;
        Ok(TargetPoint { kappa1, kappa2, epsilon })
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon < 1.0 {
        Ok(())
    } else {
        Err(domain("epsilon", epsilon))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionCase {
    Vertical,
    Corner,
    Horizontal,
    Interior,
    Exterior,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub case: RegionCase,
    pub v1: f64,
    pub v2: f64,
    pub epsilon: f64,
}

impl RegionSpec {
    pub fn new(case: RegionCase, v1: f64, v2: f64, epsilon: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        if matches!(case, RegionCase::Vertical | RegionCase::Corner) && !(v1 > 0.0 && v1.is_finite()) {
            return Err(domain("v1", v1));
        }
        if matches!(case, RegionCase::Horizontal | RegionCase::Corner) && !(v2 > 0.0 && v2.is_finite()) {
            return Err(domain("v2", v2));
        }
        Ok(RegionSpec { case, v1, v2, epsilon })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondOrderPoint {
    pub l1: f64,
    pub l2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Cmp {
    Less,
    Equal,
    Greater,
}

fn compare(kappa: f64, i: f64, tol: f64) -> Cmp {
    if (kappa - i).abs() <= tol * i.abs().max(kappa.abs()) {
        Cmp::Equal
    } else if kappa < i {
        Cmp::Less
    } else {
        Cmp::Greater
    }
}

pub fn classify_target(ch: &ChannelParams, tp: &TargetPoint) -> Result<RegionSpec> {
    classify_target_with_tol(ch, tp, KAPPA_REL_TOL)
}

pub fn classify_target_with_tol(ch: &ChannelParams, tp: &TargetPoint, tol: f64) -> Result<RegionSpec> {
    let r = classify_regime(ch);
    if r.tag != RegimeTag::StrictlyVeryStrong {
        return Err(Error::UnsupportedRegime(format!(
            "second-order regions need strictly very strong interference, got {:?}",
            r.tag
        )));
    }
    let f = first_order(ch);
    let s = second_order(ch);
    use Cmp::*;
    let case = match (compare(tp.kappa1, f.i11, tol), compare(tp.kappa2, f.i21, tol)) {
        (Equal, Less) => RegionCase::Vertical,
        (Equal, Equal) => RegionCase::Corner,
        (Less, Equal) => RegionCase::Horizontal,
        (Less, Less) => RegionCase::Interior,
        _ => RegionCase::Exterior,
    };
    RegionSpec::new(case, s.v1, s.v2, tp.epsilon)
}

pub fn contains(spec: &RegionSpec, pt: SecondOrderPoint) -> bool {
    let e = spec.epsilon;
    match spec.case {
        RegionCase::Vertical => phi(pt.l1 / spec.v1.sqrt()) <= e,
        RegionCase::Horizontal => phi(pt.l2 / spec.v2.sqrt()) <= e,
        RegionCase::Corner => {
            phi(-pt.l1 / spec.v1.sqrt()) * phi(-pt.l2 / spec.v2.sqrt()) >= 1.0 - e
        }
        RegionCase::Interior => true,
        RegionCase::Exterior => false,
    }
}

/// Boundary of the one-user cases: `√v Φ⁻¹(ε)`.
pub fn single_user_boundary(v: f64, epsilon: f64) -> f64 {
    v.sqrt() * phi_inv(epsilon)
}

/// The point on the corner boundary with `l1 = l2` when `v1 = v2 = v`.
pub fn symmetric_corner_point(v: f64, epsilon: f64) -> f64 {
    -v.sqrt() * phi_inv((1.0 - epsilon).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryTrace {
    pub points: Vec<SecondOrderPoint>,
    /// Whether the right end of the `l1` range was pulled in by [`TRACE_CLIP`].
    pub clipped: bool,
}

/// Samples `grid` points of the corner boundary
/// `Φ(−l1/√v1) Φ(−l2/√v2) = 1−ε` on a uniform `l1` grid.
///
/// `l1` lives on `(−∞, √v1 Φ⁻¹(ε))`; `l2` decreases along it and diverges at
/// the right end. The grid covers the part where `Φ(−l1/√v1)` runs over
/// `[a, b]` with `b = 1 − 10⁻⁴ε` and `ab = 1−ε`, so for `v1 = v2` the two ends
/// are mirror images.
pub fn trace_boundary(spec: &RegionSpec, grid: usize) -> Result<BoundaryTrace> {
    if spec.case != RegionCase::Corner {
        return Err(Error::UnsupportedCase(format!("boundary trace needs the corner case, got {:?}", spec.case)));
    }
    if grid < 2 {
        return Err(domain("trace grid size", grid as f64));
    }
    let target = 1.0 - spec.epsilon;
    let (s1, s2) = (spec.v1.sqrt(), spec.v2.sqrt());
    let b = 1.0 - TRACE_TAIL * spec.epsilon;
    let mut a = target / b;
    let clipped = a - target < TRACE_CLIP;
    if clipped {
        a = target + TRACE_CLIP;
    }
    let lo = -s1 * phi_inv(b);
    let hi = -s1 * phi_inv(a);
    let points = (0..grid)
        .map(|k| {
            let l1 = lo + (hi - lo) * k as f64 / (grid - 1) as f64;
            let p1 = phi(-l1 / s1);
            let l2 = -s2 * phi_inv((target / p1).min(1.0));
            SecondOrderPoint { l1, l2 }
        })
        .collect();
    Ok(BoundaryTrace { points, clipped })
}

/// Which single-user rate an approximation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApproxCase {
    /// User 1 at `κ1 = I11`.
    Vertical,
    /// User 2 at `κ2 = I21`.
    Horizontal,
    SingleUser(Snr),
}

/// `n C + √(nV) Φ⁻¹(ε)` in nats.
pub fn normal_approximation(ch: &ChannelParams, n: u64, epsilon: f64, case: ApproxCase) -> Result<f64> {
    if n == 0 {
        return Err(domain("blocklength", 0.0));
    }
    check_epsilon(epsilon)?;
    let s = match case {
        ApproxCase::Vertical => ch.snr1(),
        ApproxCase::Horizontal => ch.snr2(),
        ApproxCase::SingleUser(snr) => snr.value(),
    };
    let n = n as f64;
    Ok(n * cap(s) + (n * disp(s)).sqrt() * phi_inv(epsilon))
}
