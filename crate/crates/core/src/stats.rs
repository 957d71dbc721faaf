//! Moment accumulators and the chunked trial fold shared by the Monte-Carlo
//! routines.
//!
//! Trials are cut into fixed-size chunks. Each chunk is folded on its own
//! (in parallel under rayon) and the chunk results are merged in chunk order,
//! so the outcome does not depend on how many worker threads ran.

use rayon::prelude::*;

/// Trials per independently folded chunk.
pub const CHUNK: u64 = 256;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &Self) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub trait Merge {
    fn merge(&mut self, other: &Self);
}

/// Folds `visit` over trials `0..trials`. `scratch` builds per-worker buffers
/// and `empty` an identity accumulator.
pub fn fold_trials<A, S, E, M, V>(trials: u64, empty: E, scratch: M, visit: V) -> A
where
    A: Merge + Send,
    E: Fn() -> A + Sync + Send,
    M: Fn() -> S + Sync + Send,
    V: Fn(&mut S, &mut A, u64) + Sync + Send,
{
    let chunks = trials.div_ceil(CHUNK);
    let parts: Vec<A> = (0..chunks)
        .into_par_iter()
        .map_init(&scratch, |s, c| {
            let mut acc = empty();
            for t in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                visit(s, &mut acc, t);
            }
            acc
        })
        .collect();
    let mut total = empty();
    for p in &parts {
        total.merge(p);
    }
    total
}

/// First and second moments of a vector observation, with the spread of the
/// centred products kept for standard errors of the covariance entries.
///
/// Observations are shifted by a fixed `shift` (ideally close to the mean)
/// before accumulation.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentAcc {
    dim: usize,
    shift: Vec<f64>,
    count: u64,
    s1: Vec<CompensatedSum>,
    s2: Vec<CompensatedSum>,
    s4: Vec<CompensatedSum>,
}

#[inline]
fn tri(i: usize, j: usize) -> usize {
    let (a, b) = if i >= j { (i, j) } else { (j, i) };
    a * (a + 1) / 2 + b
}

impl MomentAcc {
    pub const MAX_DIM: usize = 16;

    /// At most [`MomentAcc::MAX_DIM`] coordinates.
    pub fn new(shift: Vec<f64>) -> Self {
        let dim = shift.len();
        assert!(dim <= Self::MAX_DIM, "MomentAcc supports at most {} coordinates", Self::MAX_DIM);
        let pairs = dim * (dim + 1) / 2;
        MomentAcc {
            dim,
            shift,
            count: 0,
            s1: vec![CompensatedSum::default(); dim],
            s2: vec![CompensatedSum::default(); pairs],
            s4: vec![CompensatedSum::default(); pairs],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn push(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.dim);
        self.count += 1;
        let mut d = [0.0f64; Self::MAX_DIM];
        let d = &mut d[..self.dim];
        for i in 0..self.dim {
            d[i] = x[i] - self.shift[i];
            self.s1[i].add(d[i]);
        }
        for i in 0..self.dim {
            for j in 0..=i {
                let p = d[i] * d[j];
                let k = tri(i, j);
                self.s2[k].add(p);
                self.s4[k].add(p * p);
            }
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        let n = self.count as f64;
        (0..self.dim).map(|i| self.shift[i] + self.s1[i].value() / n).collect()
    }

    fn centred_mean(&self, i: usize) -> f64 {
        self.s1[i].value() / self.count as f64
    }

    /// Sample covariance (divisor `count − 1`), row-major.
    pub fn cov(&self) -> Vec<f64> {
        let n = self.count as f64;
        let mut out = vec![0.0; self.dim * self.dim];
        for i in 0..self.dim {
            for j in 0..self.dim {
                let m = self.s2[tri(i, j)].value() / n - self.centred_mean(i) * self.centred_mean(j);
                out[i * self.dim + j] = m * n / (n - 1.0);
            }
        }
        out
    }

    /// Standard errors of the sample means.
    pub fn mean_se(&self) -> Vec<f64> {
        let c = self.cov();
        let n = self.count as f64;
        (0..self.dim).map(|i| (c[i * self.dim + i] / n).sqrt()).collect()
    }

    /// Standard errors of the covariance entries, from the spread of the
    /// centred products.
    pub fn cov_se(&self) -> Vec<f64> {
        let n = self.count as f64;
        let mut out = vec![0.0; self.dim * self.dim];
        for i in 0..self.dim {
            for j in 0..self.dim {
                let k = tri(i, j);
                let m2 = self.s2[k].value() / n;
                let m4 = self.s4[k].value() / n;
                out[i * self.dim + j] = ((m4 - m2 * m2).max(0.0) / (n - 1.0)).sqrt();
            }
        }
        out
    }
}

impl Merge for MomentAcc {
    fn merge(&mut self, other: &Self) {
        debug_assert_eq!(self.shift, other.shift);
        self.count += other.count;
        for (a, b) in self.s1.iter_mut().zip(&other.s1) {
            a.merge(b);
        }
        for (a, b) in self.s2.iter_mut().zip(&other.s2) {
            a.merge(b);
        }
        for (a, b) in self.s4.iter_mut().zip(&other.s4) {
            a.merge(b);
        }
    }
}

/// Kolmogorov–Smirnov distance between the empirical law of `xs` and `cdf`.
pub fn ks_distance(xs: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d
}
