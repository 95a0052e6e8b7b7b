//! Locating the points where a piecewise-constant key changes.

use alloc::vec::Vec;

/// Boundaries in `(a, b)` where `key` changes value.
///
/// The key is sampled on `grid + 1` uniform points; each sign of change is
/// then refined by bisection to width `x_tol`. Several changes inside one grid
/// cell are found as long as the key at the cell's right end differs from the
/// key just right of the last located boundary.
pub fn locate_changes<K, F>(mut key: F, a: f64, b: f64, grid: usize, x_tol: f64) -> Vec<f64>
where
    K: PartialEq,
    F: FnMut(f64) -> K,
{
    let mut out = Vec::new();
    if !(b > a) || grid == 0 {
        return out;
    }
    let step = (b - a) / grid as f64;
    let at = |j: usize| if j == grid { b } else { a + j as f64 * step };
    let mut left_key = key(a);
    for j in 0..grid {
        let cell_end = at(j + 1);
        let end_key = key(cell_end);
        let mut lo = at(j);
        // At most a few dozen changes can hide in one cell before x_tol stops us.
        let mut guard = 0;
        while end_key != left_key && guard < 64 {
            guard += 1;
            let mut hi = cell_end;
            while hi - lo > x_tol {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if key(mid) == left_key {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            out.push(0.5 * (lo + hi));
            lo = hi;
            left_key = key(hi);
        }
        left_key = end_key;
    }
    out
}
