//! Target interferometers and the per-input overlap figure of merit used to
//! score a candidate device against them.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::{from_polar_pi, TransferMatrix};

/// Balanced 3x3 tritter, (1/sqrt 3) [[1,1,1],[1,w,w*],[1,w*,w]] with
/// w = exp(2 pi i / 3).
pub fn ideal_tritter() -> TransferMatrix {
    let s = 1.0 / 3f64.sqrt();
    let w = Complex64::from_polar(s, 2.0 * std::f64::consts::PI / 3.0);
    let one = Complex64::new(s, 0.0);
    TransferMatrix::from_rows(&[[one, one, one], [one, w, w.conj()], [one, w.conj(), w]])
        .expect("3x3 finite")
}

/// n-mode discrete Fourier transform, entry (l, i) = exp(2 pi i l i / n) / sqrt n
/// with 0-based l, i. For n = 3 this is exactly [`ideal_tritter`], with the
/// same column order.
pub fn dft_target(n: usize) -> Result<TransferMatrix> {
    if n < 2 {
        return Err(Error::Parameter(format!(
            "DFT target needs n >= 2, got {n}"
        )));
    }
    let norm = 1.0 / (n as f64).sqrt();
    let entries = (0..n * n)
        .map(|k| {
            let (l, i) = (k / n, k % n);
            // reduce the exponent first so large n keeps full phase precision
            let turns = ((l * i) % n) as f64 / n as f64;
            Complex64::from_polar(norm, 2.0 * std::f64::consts::PI * turns)
        })
        .collect();
    TransferMatrix::new(n, n, entries)
}

/// Published magnitudes (times sqrt 3) of the reconstructed transfer matrix
/// of the fabricated inverse-designed tritter.
pub const MEASURED_TRITTER_MAGNITUDES: [[f64; 3]; 3] = [
    [1.016, 0.995, 1.039],
    [1.013, 0.904, 0.686],
    [1.022, 0.699, 1.199],
];

/// Published phases, in units of pi, of the same matrix.
pub const MEASURED_TRITTER_PHASES_PI: [[f64; 3]; 3] = [
    [-0.036, 0.059, -0.018],
    [-0.058, 0.610, -0.748],
    [0.020, -0.577, 0.814],
];

/// The reconstructed (non-unitary) transfer matrix of the fabricated
/// topology-optimized tritter, from its 3-decimal published values.
pub fn measured_tritter() -> TransferMatrix {
    let s = 1.0 / 3f64.sqrt();
    let rows: Vec<Vec<Complex64>> = (0..3)
        .map(|r| {
            (0..3)
                .map(|c| {
                    from_polar_pi(
                        s * MEASURED_TRITTER_MAGNITUDES[r][c],
                        MEASURED_TRITTER_PHASES_PI[r][c],
                    )
                })
                .collect()
        })
        .collect();
    TransferMatrix::from_rows(&rows).expect("3x3 finite")
}

/// An ideal target matrix: every column has unit norm.
#[derive(Debug, Clone)]
pub struct TargetSpec {
    target: TransferMatrix,
    label: String,
}

impl TargetSpec {
    pub fn new(target: TransferMatrix, label: impl Into<String>) -> Result<Self> {
        for c in 0..target.cols() {
            let norm = target.column_norm(c);
            if (norm - 1.0).abs() > 1e-12 {
                return Err(Error::Validation(format!(
                    "target column {} has norm {norm}, expected 1",
                    c + 1
                )));
            }
        }
        Ok(Self {
            target,
            label: label.into(),
        })
    }

    pub fn tritter() -> Self {
        Self::new(ideal_tritter(), "ideal tritter").expect("tritter columns are unit norm")
    }

    pub fn matrix(&self) -> &TransferMatrix {
        &self.target
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

/// |sum_l conj(target[l, i]) * candidate[l, i]|: the overlap of the
/// candidate's output amplitudes for excitation at `input` (0-based) with the
/// target column. Sensitive to amplitude and relative phase, blind to a
/// global phase of the column.
pub fn fom_per_input(candidate: &TransferMatrix, target: &TargetSpec, input: usize) -> Result<f64> {
    let t = target.matrix();
    if (candidate.rows(), candidate.cols()) != (t.rows(), t.cols()) {
        return Err(Error::Dimension(format!(
            "candidate is {}x{} but target is {}x{}",
            candidate.rows(),
            candidate.cols(),
            t.rows(),
            t.cols()
        )));
    }
    if input >= t.cols() {
        return Err(Error::Configuration(format!(
            "input {} out of range",
            input + 1
        )));
    }
    let overlap: Complex64 = (0..t.rows())
        .map(|l| t.get(l, input).conj() * candidate.get(l, input))
        .sum();
    Ok(overlap.norm())
}

/// Per-input values followed by their arithmetic mean.
pub fn fom_all(candidate: &TransferMatrix, target: &TargetSpec) -> Result<(Vec<f64>, f64)> {
    let per: Vec<f64> = (0..target.matrix().cols())
        .map(|i| fom_per_input(candidate, target, i))
        .collect::<Result<_>>()?;
    let mean = per.iter().sum::<f64>() / per.len() as f64;
    Ok((per, mean))
}

pub fn fom_overall(candidate: &TransferMatrix, target: &TargetSpec) -> Result<f64> {
    fom_all(candidate, target).map(|(_, mean)| mean)
}
