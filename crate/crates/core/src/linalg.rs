//! Small dense symmetric-matrix helpers (row-major `Vec<f64>`).

use nalgebra::{DMatrix, SymmetricEigen};

/// Eigenvalues of a symmetric `dim × dim` matrix, ascending.
pub fn symmetric_eigenvalues(a: &[f64], dim: usize) -> Vec<f64> {
    let m = DMatrix::from_row_slice(dim, dim, a);
    let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    ev
}

pub fn min_eigenvalue(a: &[f64], dim: usize) -> f64 {
    symmetric_eigenvalues(a, dim)[0]
}

/// Largest absolute asymmetry `|a_ij - a_ji|`.
pub fn asymmetry(a: &[f64], dim: usize) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..dim {
        for j in 0..i {
            worst = worst.max((a[i * dim + j] - a[j * dim + i]).abs());
        }
    }
    worst
}

/// Cholesky factor `L` (row-major, lower) of a positive semidefinite matrix.
///
/// Pivots below `tol` are treated as zero: the column is zeroed, so the
/// factor spans only the non-null directions and `L Lᵀ` still reproduces `a`
/// up to `tol`.
pub fn cholesky_semidefinite(a: &[f64], dim: usize, tol: f64) -> Vec<f64> {
    let mut l = vec![0.0; dim * dim];
    for j in 0..dim {
        let mut d = a[j * dim + j];
        for k in 0..j {
            d -= l[j * dim + k] * l[j * dim + k];
        }
        if d <= tol {
            continue;
        }
        let djj = d.sqrt();
        l[j * dim + j] = djj;
        for i in j + 1..dim {
            let mut s = a[i * dim + j];
            for k in 0..j {
                s -= l[i * dim + k] * l[j * dim + k];
            }
            l[i * dim + j] = s / djj;
        }
    }
    l
}

/// `a · b` for row-major matrices `a: r×k`, `b: k×c`.
pub fn matmul(a: &[f64], b: &[f64], r: usize, k: usize, c: usize) -> Vec<f64> {
    let mut out = vec![0.0; r * c];
    for i in 0..r {
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            for j in 0..c {
                out[i * c + j] += aip * b[p * c + j];
            }
        }
    }
    out
}

pub fn transpose(a: &[f64], r: usize, c: usize) -> Vec<f64> {
    let mut out = vec![0.0; r * c];
    for i in 0..r {
        for j in 0..c {
            out[j * r + i] = a[i * c + j];
        }
    }
    out
}
