//! Complex transfer matrices.
//!
//! A [`TransferMatrix`] maps input-mode amplitudes (columns) to output-mode
//! amplitudes (rows). Lossy or otherwise non-unitary matrices are accepted
//! everywhere; rates computed from them are relative rates.

use std::fmt;
use std::ops::Index;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// A single complex matrix element.
pub type ComplexAmplitude = Complex64;

/// Builds an amplitude from its magnitude and a phase given in units of pi.
pub fn from_polar_pi(magnitude: f64, phase_pi: f64) -> ComplexAmplitude {
    Complex64::from_polar(magnitude, phase_pi * std::f64::consts::PI)
}

/// Magnitude and phase (in units of pi, in (-1, 1]) of an amplitude.
pub fn to_polar_pi(z: ComplexAmplitude) -> (f64, f64) {
    let (r, theta) = z.to_polar();
    (r, theta / std::f64::consts::PI)
}

#[derive(Clone, PartialEq)]
pub struct TransferMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Complex64>,
}

impl TransferMatrix {
    /// Row-major construction. Both dimensions must be at least one and every
    /// entry finite.
    pub fn new(rows: usize, cols: usize, entries: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension(format!(
                "transfer matrix must be at least 1x1, got {rows}x{cols}"
            )));
        }
        if entries.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        if let Some(pos) = entries
            .iter()
            .position(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::Validation(format!(
                "entry ({}, {}) is not finite",
                pos / cols + 1,
                pos % cols + 1
            )));
        }
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    pub fn from_rows<R: AsRef<[Complex64]>>(rows: &[R]) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, |r| r.as_ref().len());
        if rows.iter().any(|r| r.as_ref().len() != n) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        let entries = rows
            .iter()
            .flat_map(|r| r.as_ref().iter().copied())
            .collect();
        Self::new(m, n, entries)
    }

    /// Real-valued rows, e.g. for counting-probability matrices.
    pub fn from_real_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let complex: Vec<Vec<Complex64>> = rows
            .iter()
            .map(|r| r.as_ref().iter().map(|&x| Complex64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&complex)
    }

    pub fn identity(n: usize) -> Self {
        let mut entries = vec![Complex64::new(0.0, 0.0); n * n];
        for k in 0..n {
            entries[k * n + k] = Complex64::new(1.0, 0.0);
        }
        Self {
            rows: n,
            cols: n,
            entries,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.cols + col]
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn column(&self, col: usize) -> Vec<Complex64> {
        (0..self.rows).map(|r| self.get(r, col)).collect()
    }

    pub fn column_norm(&self, col: usize) -> f64 {
        (0..self.rows)
            .map(|r| self.get(r, col).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        self.map(|z| z * factor)
    }

    pub fn conj(&self) -> Self {
        self.map(|z| z.conj())
    }

    pub fn adjoint(&self) -> Self {
        let mut entries = Vec::with_capacity(self.entries.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                entries.push(self.get(r, c).conj());
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            entries,
        }
    }

    pub fn transpose(&self) -> Self {
        let mut entries = Vec::with_capacity(self.entries.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                entries.push(self.get(r, c));
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            entries,
        }
    }

    pub fn matmul(&self, rhs: &TransferMatrix) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut entries = vec![Complex64::new(0.0, 0.0); self.rows * rhs.cols];
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                for c in 0..rhs.cols {
                    entries[r * rhs.cols + c] += a * rhs.get(k, c);
                }
            }
        }
        Ok(Self {
            rows: self.rows,
            cols: rhs.cols,
            entries,
        })
    }

    /// Multiplies output row `row` by `factor`.
    pub fn scale_row(&self, row: usize, factor: Complex64) -> Self {
        let mut out = self.clone();
        for c in 0..self.cols {
            out.entries[row * self.cols + c] *= factor;
        }
        out
    }

    /// Multiplies input column `col` by `factor`.
    pub fn scale_column(&self, col: usize, factor: Complex64) -> Self {
        let mut out = self.clone();
        for r in 0..self.rows {
            out.entries[r * self.cols + col] *= factor;
        }
        out
    }

    /// `D_out * self * D_in` for diagonal matrices given by their diagonals.
    pub fn with_diagonal_phases(&self, out_phases: &[f64], in_phases: &[f64]) -> Result<Self> {
        if out_phases.len() != self.rows || in_phases.len() != self.cols {
            return Err(Error::Dimension(
                "phase vector length does not match matrix".into(),
            ));
        }
        let mut out = self.clone();
        for (row, &pr) in out.entries.chunks_mut(self.cols).zip(out_phases) {
            for (z, &pc) in row.iter_mut().zip(in_phases) {
                *z *= Complex64::from_polar(1.0, pr + pc);
            }
        }
        Ok(out)
    }

    /// Largest absolute entry of `M^dagger M - I`. Only meaningful for square
    /// or tall matrices.
    pub fn unitarity_residual(&self) -> f64 {
        let gram = self
            .adjoint()
            .matmul(self)
            .expect("adjoint dimensions always agree");
        let mut worst = 0.0f64;
        for r in 0..gram.rows {
            for c in 0..gram.cols {
                let target = if r == c { 1.0 } else { 0.0 };
                worst = worst.max((gram.get(r, c) - target).norm());
            }
        }
        worst
    }

    /// Largest elementwise distance to another matrix of the same shape.
    pub fn max_abs_diff(&self, other: &TransferMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

impl Index<(usize, usize)> for TransferMatrix {
    type Output = Complex64;

    fn index(&self, (row, col): (usize, usize)) -> &Complex64 {
        &self.entries[row * self.cols + col]
    }
}

impl fmt::Debug for TransferMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "TransferMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                let z = self.get(r, c);
                write!(f, "{:+.6}{:+.6}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_empty_and_non_finite() {
        assert!(TransferMatrix::new(0, 3, vec![]).is_err());
        assert!(TransferMatrix::new(1, 1, vec![Complex64::new(f64::NAN, 0.0)]).is_err());
        assert!(TransferMatrix::new(2, 2, vec![Complex64::new(1.0, 0.0); 3]).is_err());
    }

    #[test]
    fn identity_is_unitary() {
        assert!(TransferMatrix::identity(4).unitarity_residual() < 1e-15);
    }

    #[test]
    fn non_unitary_matrices_are_accepted() {
        let m = TransferMatrix::from_real_rows(&[[2.0, 0.0], [0.0, 0.5]]).unwrap();
        assert!(m.unitarity_residual() > 1.0);
    }

    #[test]
    fn adjoint_of_product() {
        let a = TransferMatrix::from_rows(&[
            [Complex64::new(1.0, 2.0), Complex64::new(0.5, -1.0)],
            [Complex64::new(-0.3, 0.0), Complex64::new(0.0, 1.0)],
        ])
        .unwrap();
        let b = a.transpose();
        let lhs = a.matmul(&b).unwrap().adjoint();
        let rhs = b.adjoint().matmul(&a.adjoint()).unwrap();
        assert!(lhs.max_abs_diff(&rhs) < 1e-14);
    }

    proptest! {
        #[test]
        fn polar_round_trip(re in -1e3f64..1e3, im in -1e3f64..1e3) {
            let z = Complex64::new(re, im);
            let (r, p) = to_polar_pi(z);
            let back = from_polar_pi(r, p);
            let scale = z.norm().max(1e-300);
            prop_assert!((back - z).norm() / scale < 1e-12);
        }
    }
}
