//! Small dense linear systems.

use alloc::vec::Vec;

use crate::scalar::Scalar;

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
///
/// Returns `None` when the matrix is singular. In float mode a pivot whose
/// magnitude is below `1e-14` times the largest entry counts as zero.
pub fn solve<S: Scalar>(mut a: Vec<Vec<S>>, mut b: Vec<S>) -> Option<Vec<S>> {
    let n = b.len();
    debug_assert!(a.len() == n && a.iter().all(|r| r.len() == n));
    let scale = a.iter().flat_map(|r| r.iter()).fold(S::zero(), |m, v| S::max_of(&m, &v.abs()));
    let eps = if S::EXACT { S::zero() } else { scale * S::from_f64(1e-14) };
    for col in 0..n {
        let mut pivot = col;
        for row in col + 1..n {
            if a[row][col].abs() > a[pivot][col].abs() {
                pivot = row;
            }
        }
        if a[pivot][col].abs() <= eps {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col].clone() / a[col][col].clone();
            if factor.is_zero() {
                continue;
            }
            let (top, bottom) = a.split_at_mut(row);
            for (dst, src) in bottom[0][col..].iter_mut().zip(&top[col][col..]) {
                *dst = dst.clone() - factor.clone() * src.clone();
            }
            let v = b[row].clone() - factor * b[col].clone();
            b[row] = v;
        }
    }
    let mut x = alloc::vec![S::zero(); n];
    for row in (0..n).rev() {
        let mut acc = b[row].clone();
        for k in row + 1..n {
            acc = acc - a[row][k].clone() * x[k].clone();
        }
        x[row] = acc / a[row][row].clone();
    }
    Some(x)
}

/// Inverse of a square matrix, or `None` when singular.
pub fn inverse<S: Scalar>(a: &[Vec<S>]) -> Option<Vec<Vec<S>>> {
    let n = a.len();
    let mut cols = Vec::with_capacity(n);
    for j in 0..n {
        let e: Vec<S> = (0..n).map(|i| if i == j { S::one() } else { S::zero() }).collect();
        cols.push(solve(a.to_vec(), e)?);
    }
    Some((0..n).map(|i| (0..n).map(|j| cols[j][i].clone()).collect()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;
    use alloc::vec;

    #[test]
    fn solves_two_by_two() {
        let x = solve(vec![vec![1.0, 20.0], vec![1.0, -10.0]], vec![0.0, 19.0]).unwrap();
        assert!((x[1] + 19.0 / 30.0).abs() < 1e-12);
        assert!((x[0] - 38.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn singular_is_none() {
        assert!(solve(vec![vec![1.0, 2.0], vec![2.0, 4.0]], vec![1.0, 1.0]).is_none());
        let r = |n| Rational::from_int(n);
        assert!(solve(vec![vec![r(1), r(2)], vec![r(2), r(4)]], vec![r(1), r(1)]).is_none());
    }

    #[test]
    fn exact_inverse() {
        let r = |n| Rational::from_int(n);
        let a = vec![vec![r(2), r(1)], vec![r(1), r(1)]];
        let inv = inverse(&a).unwrap();
        assert_eq!(inv, vec![vec![r(1), r(-1)], vec![r(-1), r(2)]]);
    }
}
