//! Matrix permanents.
//!
//! [`permanent_naive`] sums all k! permutation products and serves as the
//! reference; [`permanent_ryser`] uses Ryser's inclusion-exclusion formula
//! with Gray-code ordering, O(2^k k).

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::TransferMatrix;

pub const NAIVE_MAX_ORDER: usize = 8;
pub const RYSER_MAX_ORDER: usize = 30;

fn square_order(matrix: &TransferMatrix) -> Result<usize> {
    if !matrix.is_square() {
        return Err(Error::Dimension(format!(
            "permanent needs a square matrix, got {}x{}",
            matrix.rows(),
            matrix.cols()
        )));
    }
    Ok(matrix.rows())
}

pub fn permanent_naive(matrix: &TransferMatrix) -> Result<Complex64> {
    let k = square_order(matrix)?;
    if k > NAIVE_MAX_ORDER {
        return Err(Error::SizeLimit {
            order: k,
            limit: NAIVE_MAX_ORDER,
        });
    }
    Ok(naive(matrix.entries(), k))
}

pub fn permanent_ryser(matrix: &TransferMatrix) -> Result<Complex64> {
    let k = square_order(matrix)?;
    if k > RYSER_MAX_ORDER {
        return Err(Error::SizeLimit {
            order: k,
            limit: RYSER_MAX_ORDER,
        });
    }
    Ok(ryser(matrix.entries(), k))
}

/// Calls `visit` once for every permutation of `0..k` (Heap's algorithm).
pub(crate) fn for_each_permutation(k: usize, mut visit: impl FnMut(&[usize])) {
    let mut perm: Vec<usize> = (0..k).collect();
    let mut counters = vec![0usize; k];
    visit(&perm);
    let mut i = 1;
    while i < k {
        if counters[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(counters[i], i);
            }
            visit(&perm);
            counters[i] += 1;
            i = 1;
        } else {
            counters[i] = 0;
            i += 1;
        }
    }
}

/// All permutations of `0..k`, in Heap order.
#[cfg(test)]
pub(crate) fn permutations(k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for_each_permutation(k, |p| out.push(p.to_vec()));
    out
}

pub(crate) fn naive(a: &[Complex64], k: usize) -> Complex64 {
    let mut total = Complex64::new(0.0, 0.0);
    for_each_permutation(k, |perm| {
        let mut prod = Complex64::new(1.0, 0.0);
        for (row, &col) in perm.iter().enumerate() {
            prod *= a[row * k + col];
        }
        total += prod;
    });
    total
}

/// Ryser's formula on a row-major k x k slice; the empty permanent is 1.
pub(crate) fn ryser(a: &[Complex64], k: usize) -> Complex64 {
    debug_assert_eq!(a.len(), k * k);
    if k == 0 {
        return Complex64::new(1.0, 0.0);
    }
    let mut row_sums = vec![Complex64::new(0.0, 0.0); k];
    let mut total = Complex64::new(0.0, 0.0);
    let mut gray: u64 = 0;
    for step in 1u64..(1u64 << k) {
        // Gray code flips exactly one column per step.
        let col = step.trailing_zeros() as usize;
        gray ^= 1 << col;
        let added = gray & (1 << col) != 0;
        for (row, sum) in row_sums.iter_mut().enumerate() {
            if added {
                *sum += a[row * k + col];
            } else {
                *sum -= a[row * k + col];
            }
        }
        let prod = row_sums
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s);
        if (k - gray.count_ones() as usize).is_multiple_of(2) {
            total += prod;
        } else {
            total -= prod;
        }
    }
    total
}

/// Real-valued Ryser, used for classical (distinguishable) rates.
pub(crate) fn ryser_real(a: &[f64], k: usize) -> f64 {
    debug_assert_eq!(a.len(), k * k);
    if k == 0 {
        return 1.0;
    }
    let mut row_sums = vec![0.0; k];
    let mut total = 0.0;
    let mut gray: u64 = 0;
    for step in 1u64..(1u64 << k) {
        let col = step.trailing_zeros() as usize;
        gray ^= 1 << col;
        let sign = if gray & (1 << col) != 0 { 1.0 } else { -1.0 };
        for (row, sum) in row_sums.iter_mut().enumerate() {
            *sum += sign * a[row * k + col];
        }
        let prod: f64 = row_sums.iter().product();
        if (k - gray.count_ones() as usize).is_multiple_of(2) {
            total += prod;
        } else {
            total -= prod;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::random_complex_matrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn identity_and_ones() {
        let id = TransferMatrix::identity(3);
        assert_eq!(permanent_naive(&id).unwrap(), c(1.0, 0.0));
        let ones = TransferMatrix::from_real_rows(&[[1.0; 3]; 3]).unwrap();
        assert!((permanent_naive(&ones).unwrap() - c(6.0, 0.0)).norm() < 1e-15);
        assert!((permanent_ryser(&ones).unwrap() - c(6.0, 0.0)).norm() < 1e-14);
        assert!(
            (permanent_ryser(&TransferMatrix::identity(4)).unwrap() - c(1.0, 0.0)).norm() < 1e-15
        );
    }

    #[test]
    fn two_by_two_definition() {
        let (a, b, cc, d) = (c(1.0, 2.0), c(-0.5, 0.3), c(0.0, -1.0), c(2.0, 0.5));
        let m = TransferMatrix::from_rows(&[[a, b], [cc, d]]).unwrap();
        let expected = a * d + b * cc;
        assert!((permanent_ryser(&m).unwrap() - expected).norm() < 1e-14);
        assert!((permanent_naive(&m).unwrap() - expected).norm() < 1e-14);
    }

    #[test]
    fn errors() {
        let rect = TransferMatrix::from_real_rows(&[[1.0, 2.0, 3.0]]).unwrap();
        assert!(matches!(permanent_naive(&rect), Err(Error::Dimension(_))));
        assert!(matches!(permanent_ryser(&rect), Err(Error::Dimension(_))));
        let big = TransferMatrix::identity(9);
        assert!(matches!(
            permanent_naive(&big),
            Err(Error::SizeLimit { order: 9, limit: 8 })
        ));
        assert!(permanent_ryser(&big).is_ok());
    }

    #[test]
    fn permutation_count() {
        let mut n = 0;
        for_each_permutation(5, |_| n += 1);
        assert_eq!(n, 120);
        let mut all = permutations(4);
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 24);
    }

    #[test]
    fn ryser_matches_naive_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for k in 1..=7 {
            let m = random_complex_matrix(k, k, &mut rng);
            let r = permanent_ryser(&m).unwrap();
            let n = permanent_naive(&m).unwrap();
            assert!((r - n).norm() <= 1e-10 * n.norm(), "k={k}");
        }
    }

    #[test]
    fn multilinear_in_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_complex_matrix(4, 4, &mut rng);
        let s = c(0.7, -1.3);
        let scaled = m.scale_column(2, s);
        let lhs = permanent_ryser(&scaled).unwrap();
        let rhs = permanent_ryser(&m).unwrap() * s;
        assert!((lhs - rhs).norm() < 1e-12 * rhs.norm());
    }

    #[test]
    fn real_ryser_agrees_with_complex() {
        let a = [0.2, 0.5, 0.1, 0.9, 0.3, 0.4, 0.7, 0.6, 0.8];
        let ac: Vec<Complex64> = a.iter().map(|&x| c(x, 0.0)).collect();
        assert!((ryser_real(&a, 3) - naive(&ac, 3).re).abs() < 1e-15);
    }
}
