//! Dense linear solves for the small Newton systems of the allocation solver.

use alloc::vec::Vec;

use crate::math;

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
/// `a` is row-major `n x n` and is overwritten. Returns `None` when a pivot
/// vanishes.
pub(crate) fn solve_dense(a: &mut [f64], b: &mut [f64], n: usize) -> Option<Vec<f64>> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    for col in 0..n {
        let mut pivot = col;
        let mut best = math::abs(a[col * n + col]);
        for row in col + 1..n {
            let v = math::abs(a[row * n + col]);
            if v > best {
                best = v;
                pivot = row;
            }
        }
        if !(best > 0.0) || !best.is_finite() {
            return None;
        }
        if pivot != col {
            for j in 0..n {
                a.swap(col * n + j, pivot * n + j);
            }
            b.swap(col, pivot);
        }
        let diag = a[col * n + col];
        for row in col + 1..n {
            let factor = a[row * n + col] / diag;
            if factor == 0.0 {
                continue;
            }
            for j in col..n {
                a[row * n + j] -= factor * a[col * n + j];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = alloc::vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for j in row + 1..n {
            acc -= a[row * n + j] * x[j];
        }
        x[row] = acc / a[row * n + row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_pivoting_system() {
        let mut a = [0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.0, 1.0];
        let mut b = [7.0, 3.0, 6.0];
        let x = solve_dense(&mut a, &mut b, 3).unwrap();
        // x = (1, 2, 3)
        for (xi, ei) in x.iter().zip([1.0, 2.0, 3.0]) {
            assert!((xi - ei).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_is_none() {
        let mut a = [1.0, 2.0, 2.0, 4.0];
        let mut b = [1.0, 2.0];
        assert!(solve_dense(&mut a, &mut b, 2).is_none());
    }
}
