//! Symmetric tridiagonal eigenvalue routines.
//!
//! The matrix is given by its diagonal `d[0..n]` and off-diagonal `e[0..n-1]`
//! (`e[i]` couples rows `i` and `i+1`).

use crate::error::{Error, Result};

/// Number of eigenvalues strictly below `x` (Sturm sequence count).
pub fn sturm_count(d: &[f64], e: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = d[0] - x;
    if q < 0.0 {
        count += 1;
    }
    for i in 1..d.len() {
        let denom = if q == 0.0 { f64::EPSILON * (e[i - 1].abs() + 1e-300) } else { q };
        q = d[i] - x - e[i - 1] * e[i - 1] / denom;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Gershgorin interval containing the whole spectrum.
pub fn gershgorin(d: &[f64], e: &[f64]) -> (f64, f64) {
    let n = d.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { e[i - 1].abs() } else { 0.0 } + if i + 1 < n { e[i].abs() } else { 0.0 };
        lo = lo.min(d[i] - r);
        hi = hi.max(d[i] + r);
    }
    (lo, hi)
}

/// The `k`-th smallest eigenvalue (0-based) by bisection.
pub fn bisect_eigenvalue(d: &[f64], e: &[f64], k: usize) -> Result<f64> {
    let (mut lo, mut hi) = gershgorin(d, e);
    let scale = lo.abs().max(hi.abs());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 4.0 * f64::EPSILON * scale.max(mid.abs()) * 0.25 {
            return Ok(mid);
        }
        if sturm_count(d, e, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Err(Error::Eigensolver(format!("bisection for eigenvalue {k} did not converge")))
}

/// Solve `(T - shift) x = rhs` with partial pivoting (the shifted matrix is
/// nearly singular during inverse iteration, so plain Thomas is not safe).
fn shifted_solve(d: &[f64], e: &[f64], shift: f64, rhs: &mut [f64]) {
    let n = d.len();
    // LU with row interchanges: U has up to two super-diagonals
    let mut diag: Vec<f64> = d.iter().map(|v| v - shift).collect();
    let mut sup1: Vec<f64> = e.to_vec();
    sup1.push(0.0);
    let mut sup2 = vec![0.0; n];
    let mut sub: Vec<f64> = e.to_vec();
    let mut mult = vec![0.0; n];
    let mut swapped = vec![false; n];
    let tiny = f64::EPSILON * d.iter().map(|v| v.abs()).fold(1e-300, f64::max);
    for i in 0..n.saturating_sub(1) {
        if sub[i].abs() > diag[i].abs() {
            // swap rows i and i+1
            swapped[i] = true;
            let (a0, a1, a2) = (diag[i], sup1[i], sup2[i]);
            diag[i] = sub[i];
            sup1[i] = diag[i + 1];
            sup2[i] = sup1[i + 1];
            let m = a0 / diag[i];
            mult[i] = m;
            diag[i + 1] = a1 - m * sup1[i];
            sup1[i + 1] = a2 - m * sup2[i];
        } else {
            if diag[i] == 0.0 {
                diag[i] = tiny;
            }
            let m = sub[i] / diag[i];
            mult[i] = m;
            diag[i + 1] -= m * sup1[i];
            sup1[i + 1] -= m * sup2[i];
        }
        sub[i] = 0.0;
    }
    if diag[n - 1] == 0.0 {
        diag[n - 1] = tiny;
    }
    for i in 0..n.saturating_sub(1) {
        if swapped[i] {
            rhs.swap(i, i + 1);
        }
        rhs[i + 1] -= mult[i] * rhs[i];
    }
    for i in (0..n).rev() {
        let mut s = rhs[i];
        if i + 1 < n {
            s -= sup1[i] * rhs[i + 1];
        }
        if i + 2 < n {
            s -= sup2[i] * rhs[i + 2];
        }
        let piv = if diag[i] == 0.0 { tiny } else { diag[i] };
        rhs[i] = s / piv;
    }
}

/// Eigenvector for eigenvalue `lambda` by inverse iteration, unit Euclidean norm.
pub fn inverse_iteration(d: &[f64], e: &[f64], lambda: f64, seed: u64) -> Result<Vec<f64>> {
    let n = d.len();
    // deterministic pseudo-random start vector
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut x: Vec<f64> = (0..n)
        .map(|_| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        })
        .collect();
    let scale = gershgorin(d, e).1.abs().max(1.0);
    let shift = lambda + scale * 1e-14;
    let mut best = f64::INFINITY;
    for it in 0..10 {
        shifted_solve(d, e, shift, &mut x);
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::Eigensolver(format!("inverse iteration broke down at {lambda}")));
        }
        x.iter_mut().for_each(|v| *v /= norm);
        let res = residual(d, e, lambda, &x);
        // stop once the residual has settled at round-off level
        if it >= 2 && res >= 0.5 * best {
            break;
        }
        best = best.min(res);
    }
    let res = residual(d, e, lambda, &x);
    if res <= 1e-9 * scale {
        Ok(x)
    } else {
        Err(Error::Eigensolver(format!(
            "inverse iteration at {lambda} stalled with residual {res:e}"
        )))
    }
}

fn residual(d: &[f64], e: &[f64], lambda: f64, x: &[f64]) -> f64 {
    let n = d.len();
    let mut r: f64 = 0.0;
    for i in 0..n {
        let mut y = (d[i] - lambda) * x[i];
        if i > 0 {
            y += e[i - 1] * x[i - 1];
        }
        if i + 1 < n {
            y += e[i] * x[i + 1];
        }
        r = r.max(y.abs());
    }
    r
}

/// All eigenvalues and the first component of each normalized eigenvector,
/// by implicit QL. Small matrices only (quadrature rules).
pub fn ql_first_components(d: &[f64], e: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = d.len();
    let mut d = d.to_vec();
    let mut e: Vec<f64> = e.iter().copied().chain(std::iter::once(0.0)).collect();
    // z holds the first row of the accumulated eigenvector matrix
    let mut z = vec![0.0; n];
    z[0] = 1.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::Eigensolver("QL iteration cap reached".into()));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut early = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    early = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let fz = z[i + 1];
                z[i + 1] = s * z[i] + c * fz;
                z[i] = c * z[i] - s * fz;
            }
            if early {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).unwrap());
    Ok((idx.iter().map(|&i| d[i]).collect(), idx.iter().map(|&i| z[i]).collect()))
}
