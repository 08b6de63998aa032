//! Seeded randomness: random test matrices, Haar unitaries and Poisson
//! resampling. Every stochastic routine in the crate draws from
//! [`substream`] so results depend only on (seed, index), not on scheduling.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::matrix::TransferMatrix;

/// Independent generator for resample `index` under `seed`.
pub fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Matrix of i.i.d. standard complex Gaussian entries.
pub fn random_complex_matrix<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    rng: &mut R,
) -> TransferMatrix {
    let entries = (0..rows * cols).map(|_| complex_gaussian(rng)).collect();
    TransferMatrix::new(rows, cols, entries).expect("finite entries")
}

/// Haar-distributed n x n unitary: Gram-Schmidt on a complex Ginibre matrix
/// (the positive diagonal of the implied R factor makes the result Haar).
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> TransferMatrix {
    let g = random_complex_matrix(n, n, rng);
    let mut cols: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    for c in 0..n {
        let mut v = g.column(c);
        // two passes of modified Gram-Schmidt for orthogonality at 1e-15
        for _ in 0..2 {
            for q in &cols {
                let proj: Complex64 = q.iter().zip(&v).map(|(qi, vi)| qi.conj() * vi).sum();
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= proj * qi;
                }
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        v.iter_mut().for_each(|z| *z /= norm);
        cols.push(v);
    }
    let mut entries = vec![Complex64::new(0.0, 0.0); n * n];
    for (c, col) in cols.iter().enumerate() {
        for (r, z) in col.iter().enumerate() {
            entries[r * n + c] = *z;
        }
    }
    TransferMatrix::new(n, n, entries).expect("finite entries")
}

/// Poisson draw with the given mean; a zero mean yields zero.
pub fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    Poisson::new(mean)
        .expect("positive finite mean")
        .sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn haar_unitaries_are_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 1..6 {
            assert!(haar_unitary(n, &mut rng).unitarity_residual() < 1e-13);
        }
    }

    #[test]
    fn substreams_are_reproducible_and_distinct() {
        let a: u64 = substream(7, 3).random();
        let b: u64 = substream(7, 3).random();
        let c: u64 = substream(7, 4).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn poisson_mean() {
        let mut rng = substream(2, 0);
        let n = 20000;
        let mean = (0..n).map(|_| poisson(9.0, &mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 9.0).abs() < 0.1);
        assert_eq!(poisson(0.0, &mut rng), 0.0);
    }
}
