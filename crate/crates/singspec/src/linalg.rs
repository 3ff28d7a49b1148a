//! Small dense linear algebra over [`Coeff`] (row reduction, rank, kernels) plus
//! complex float helpers on top of nalgebra.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::scalar::Coeff;

pub type Rows<S> = Vec<Vec<S>>;

/// Default zero threshold for float row reduction (relative to the largest entry).
pub const FLOAT_RANK_TOL: f64 = 1e-10;

fn is_negligible<S: Coeff>(v: &S, scale: f64, tol: f64) -> bool {
    if S::is_exact() {
        v.is_zero()
    } else {
        v.magnitude() <= tol * scale
    }
}

fn max_magnitude<S: Coeff>(rows: &Rows<S>) -> f64 {
    if S::is_exact() {
        return 1.0;
    }
    rows.iter().flatten().map(|v| v.magnitude()).fold(0.0, f64::max).max(f64::MIN_POSITIVE)
}

/// Reduced row echelon form in place; returns the pivot columns.
///
/// Exact scalars use exact zero tests; floats use partial pivoting and treat
/// entries below `tol` times the largest input entry as zero.
pub fn rref<S: Coeff>(rows: &mut Rows<S>, tol: f64) -> Vec<usize> {
    let ncols = rows.first().map_or(0, |r| r.len());
    let scale = max_magnitude(rows);
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        if r == rows.len() {
            break;
        }
        let pick = if S::is_exact() {
            (r..rows.len()).find(|&i| !rows[i][c].is_zero())
        } else {
            (r..rows.len())
                .max_by(|&i, &j| rows[i][c].magnitude().total_cmp(&rows[j][c].magnitude()))
                .filter(|&i| !is_negligible(&rows[i][c], scale, tol))
        };
        let Some(i) = pick else {
            if !S::is_exact() {
                for row in rows.iter_mut().skip(r) {
                    row[c] = S::zero();
                }
            }
            continue;
        };
        rows.swap(r, i);
        let inv = S::one() / rows[r][c].clone();
        for v in rows[r].iter_mut() {
            *v = v.clone() * inv.clone();
        }
        let pivot_row = rows[r].clone();
        for (k, row) in rows.iter_mut().enumerate() {
            if k == r || row[c].is_zero() {
                continue;
            }
            let f = row[c].clone();
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                if !pv.is_zero() {
                    *v = v.clone() - f.clone() * pv.clone();
                }
            }
            row[c] = S::zero();
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

pub fn rank<S: Coeff>(rows: &Rows<S>, tol: f64) -> usize {
    let mut work = rows.clone();
    rref(&mut work, tol).len()
}

/// Basis of `{v : A v = 0}`; one vector per non-pivot column.
pub fn nullspace<S: Coeff>(rows: &Rows<S>, ncols: usize, tol: f64) -> Vec<Vec<S>> {
    let mut work = rows.clone();
    let pivots = rref(&mut work, tol);
    let mut out = Vec::new();
    for free in (0..ncols).filter(|c| !pivots.contains(c)) {
        let mut v = vec![S::zero(); ncols];
        v[free] = S::one();
        for (r, &pc) in pivots.iter().enumerate() {
            v[pc] = -work[r][free].clone();
        }
        out.push(v);
    }
    out
}

pub fn transpose<S: Clone>(rows: &Rows<S>, ncols: usize) -> Rows<S> {
    (0..ncols).map(|c| rows.iter().map(|r| r[c].clone()).collect()).collect()
}

pub fn mat_mul<S: Coeff>(a: &Rows<S>, b: &Rows<S>) -> Rows<S> {
    let inner = b.len();
    let ncols = b.first().map_or(0, |r| r.len());
    a.iter()
        .map(|row| {
            (0..ncols)
                .map(|c| {
                    (0..inner).fold(S::zero(), |acc, k| {
                        if row[k].is_zero() || b[k][c].is_zero() {
                            acc
                        } else {
                            acc + row[k].clone() * b[k][c].clone()
                        }
                    })
                })
                .collect()
        })
        .collect()
}

/// Solve `A x = b` for square nonsingular `A`.
pub fn solve<S: Coeff>(a: &Rows<S>, b: &[S], tol: f64) -> Result<Vec<S>> {
    let n = a.len();
    if a.iter().any(|r| r.len() != n) || b.len() != n {
        return Err(Error::NonSquareSystem { rows: n, cols: a.first().map_or(0, |r| r.len()) });
    }
    let mut aug: Rows<S> = a.iter().zip(b).map(|(r, v)| r.iter().cloned().chain([v.clone()]).collect()).collect();
    let pivots = rref(&mut aug, tol);
    if pivots.len() != n || pivots.last() == Some(&n) {
        return Err(Error::RankDeficient { rank: pivots.iter().filter(|&&c| c < n).count(), need: n });
    }
    Ok(aug.into_iter().map(|r| r[n].clone()).collect())
}

pub fn to_dmatrix<S: Coeff>(rows: &Rows<S>) -> DMatrix<Complex64> {
    let nr = rows.len();
    let nc = rows.first().map_or(0, |r| r.len());
    DMatrix::from_fn(nr, nc, |i, j| rows[i][j].to_c64())
}

/// Numerical rank from singular values, relative threshold `tol`.
pub fn svd_rank(m: &DMatrix<Complex64>, tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.iter().cloned().fold(0.0, f64::max);
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * top).count()
}

/// Orthonormal basis of the right kernel of `m` (columns of the result).
pub fn svd_kernel(m: &DMatrix<Complex64>, tol: f64) -> DMatrix<Complex64> {
    let ncols = m.ncols();
    if m.nrows() == 0 {
        return DMatrix::identity(ncols, ncols);
    }
    // pad to at least square so that V is complete
    let mut padded = DMatrix::zeros(m.nrows().max(ncols), ncols);
    padded.view_mut((0, 0), (m.nrows(), ncols)).copy_from(m);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V^H");
    let top = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..ncols).filter(|&i| top == 0.0 || svd.singular_values[i] <= tol * top).collect();
    DMatrix::from_fn(ncols, keep.len(), |r, c| v_t[(keep[c], r)].conj())
}
