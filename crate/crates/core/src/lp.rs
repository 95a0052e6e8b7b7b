//! Dense two-phase simplex for the small linear programs that balance tied
//! layers. Bland's rule, so it terminates on degenerate problems.

use alloc::vec;
use alloc::vec::Vec;

const EPS: f64 = 1e-11;
const MAX_PIVOTS: usize = 50_000;

/// Minimizes `c·x` subject to `a_eq x = b_eq`, `a_ub x ≤ b_ub`, `x ≥ 0`.
/// `None` when infeasible, unbounded or out of pivots.
pub(crate) fn minimize(
    c: &[f64],
    a_eq: &[Vec<f64>],
    b_eq: &[f64],
    a_ub: &[Vec<f64>],
    b_ub: &[f64],
) -> Option<Vec<f64>> {
    let n = c.len();
    let m_ub = a_ub.len();
    let m = a_eq.len() + m_ub;
    let art = n + m_ub;
    let cols = art + m;
    let rhs = cols;

    let mut t: Vec<Vec<f64>> = Vec::with_capacity(m);
    for (row, b) in a_eq.iter().zip(b_eq) {
        let mut r = vec![0.0; cols + 1];
        r[..n].copy_from_slice(row);
        r[rhs] = *b;
        t.push(r);
    }
    for (s, (row, b)) in a_ub.iter().zip(b_ub).enumerate() {
        let mut r = vec![0.0; cols + 1];
        r[..n].copy_from_slice(row);
        r[n + s] = 1.0;
        r[rhs] = *b;
        t.push(r);
    }
    for (k, r) in t.iter_mut().enumerate() {
        if r[rhs] < 0.0 {
            r.iter_mut().for_each(|v| *v = -*v);
        }
        r[art + k] = 1.0;
    }
    let mut basis: Vec<usize> = (art..cols).collect();

    // phase 1: drive the artificials to zero
    let mut z = vec![0.0; cols + 1];
    for r in &t {
        for j in 0..=cols {
            if j < art || j == rhs {
                z[j] -= r[j];
            }
        }
    }
    run(&mut t, &mut z, &mut basis, cols)?;
    let scale = t.iter().map(|r| r[rhs].abs()).fold(1.0, f64::max);
    if -z[rhs] > 1e-9 * scale {
        return None;
    }
    for k in 0..m {
        if basis[k] >= art {
            if let Some(j) = (0..art).find(|j| t[k][*j].abs() > EPS) {
                pivot(&mut t, &mut z, k, j);
                basis[k] = j;
            }
        }
    }

    // phase 2
    let mut z = vec![0.0; cols + 1];
    z[..n].copy_from_slice(c);
    for k in 0..m {
        let b = basis[k];
        if b < n && z[b] != 0.0 {
            let f = z[b];
            for j in 0..=cols {
                z[j] -= f * t[k][j];
            }
        }
    }
    run(&mut t, &mut z, &mut basis, art)?;
    let mut x = vec![0.0; n];
    for k in 0..m {
        if basis[k] < n {
            x[basis[k]] = t[k][rhs];
        }
    }
    Some(x)
}

// Pivots until no column below `allowed` has a negative reduced cost.
fn run(t: &mut [Vec<f64>], z: &mut [f64], basis: &mut [usize], allowed: usize) -> Option<()> {
    let rhs = z.len() - 1;
    for _ in 0..MAX_PIVOTS {
        let Some(enter) = (0..allowed).find(|j| z[*j] < -EPS) else {
            return Some(());
        };
        let mut leave: Option<(usize, f64)> = None;
        for k in 0..t.len() {
            let a = t[k][enter];
            if a > EPS {
                let ratio = t[k][rhs] / a;
                let better = match leave {
                    None => true,
                    Some((l, r)) => ratio < r - EPS || (ratio <= r + EPS && basis[k] < basis[l]),
                };
                if better {
                    leave = Some((k, ratio));
                }
            }
        }
        let (k, _) = leave?;
        pivot(t, z, k, enter);
        basis[k] = enter;
    }
    None
}

fn pivot(t: &mut [Vec<f64>], z: &mut [f64], row: usize, col: usize) {
    let p = t[row][col];
    t[row].iter_mut().for_each(|v| *v /= p);
    let pivot_row = t[row].clone();
    for (k, r) in t.iter_mut().enumerate() {
        if k != row && r[col] != 0.0 {
            let f = r[col];
            r.iter_mut().zip(&pivot_row).for_each(|(v, p)| *v -= f * p);
        }
    }
    let f = z[col];
    if f != 0.0 {
        z.iter_mut().zip(&pivot_row).for_each(|(v, p)| *v -= f * p);
    }
}
