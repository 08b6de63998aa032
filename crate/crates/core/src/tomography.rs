//! Transfer-matrix reconstruction from single-photon counts and two-photon
//! HOM visibilities.
//!
//! Amplitudes come from column-normalized single-photon count ratios. The
//! gauge is fixed by zero phases on the first row and first column; every
//! remaining phase follows from the 2x2 block it forms with element (1, 1):
//!
//! ```text
//! cos(phi_li) = -V * (a^2 d^2 + b^2 c^2) / (2 a b c d)
//! ```
//!
//! with a = A(1,1), b = A(1,i), c = A(l,1), d = A(l,i) and V the visibility for
//! inputs (1, i) and outputs (1, l). The signs are resolved by exhaustive
//! search against every supplied visibility. Complex conjugation of the whole
//! matrix leaves all two-photon data unchanged, so the result is determined
//! only up to that symmetry.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::distinguishability::{two_photon_limits, visibility_two};
use crate::error::{Error, Result};
use crate::fitting::mean_and_std;
use crate::matrix::TransferMatrix;
use crate::random::{poisson, substream};

/// Sign combinations beyond 2^this are refused.
pub const MAX_UNKNOWN_PHASES: usize = 16;

/// Default synthetic singles per input (summed over outputs).
pub const DEFAULT_SINGLES_LEVEL: f64 = 5000.0;

/// Default mean C(inf) per two-photon record, of the order of a 60 s dip
/// baseline.
pub const DEFAULT_PAIR_LEVEL: f64 = 1000.0;

/// Cosines this far outside [-1, 1] are clamped; farther is an error.
const COS_SLACK: f64 = 1e-6;

/// Real m x n grid indexed (output, input).
#[derive(Debug, Clone, PartialEq)]
pub struct RealGrid {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RealGrid {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, |r| r.as_ref().len());
        if m == 0 || n == 0 || rows.iter().any(|r| r.as_ref().len() != n) {
            return Err(Error::Dimension(
                "grid rows must be non-empty and of equal length".into(),
            ));
        }
        Ok(Self {
            rows: m,
            cols: n,
            data: rows.iter().flat_map(|r| r.as_ref().to_vec()).collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}

/// Single-photon counts, (output l, input i). Expected (non-integer) counts
/// from a forward model are accepted as well as measured integers.
#[derive(Debug, Clone, PartialEq)]
pub struct SinglesCounts {
    grid: RealGrid,
}

impl SinglesCounts {
    pub fn new(grid: RealGrid) -> Result<Self> {
        if grid.values().iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::Validation(
                "single-photon counts must be finite and nonnegative".into(),
            ));
        }
        for i in 0..grid.cols() {
            if (0..grid.rows()).all(|l| grid.get(l, i) == 0.0) {
                return Err(Error::DegenerateInput(format!(
                    "input {} has no single-photon counts",
                    i + 1
                )));
            }
        }
        Ok(Self { grid })
    }

    pub fn grid(&self) -> &RealGrid {
        &self.grid
    }

    pub fn outputs(&self) -> usize {
        self.grid.rows()
    }

    pub fn inputs(&self) -> usize {
        self.grid.cols()
    }
}

/// Input pair (i, j) and output pair (l, m), 0-based with i < j and l < m.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PairKey {
    pub inputs: (usize, usize),
    pub outputs: (usize, usize),
}

impl PairKey {
    /// Orders each pair; equal indices are rejected.
    pub fn new(inputs: (usize, usize), outputs: (usize, usize)) -> Result<Self> {
        if inputs.0 == inputs.1 || outputs.0 == outputs.1 {
            return Err(Error::Configuration(format!(
                "visibility record needs two distinct inputs and outputs, got ({},{}) -> ({},{})",
                inputs.0 + 1,
                inputs.1 + 1,
                outputs.0 + 1,
                outputs.1 + 1
            )));
        }
        let order = |(a, b): (usize, usize)| if a < b { (a, b) } else { (b, a) };
        Ok(Self {
            inputs: order(inputs),
            outputs: order(outputs),
        })
    }

    /// (i, j, l, m) as 1-based labels.
    pub fn labels(&self) -> (usize, usize, usize, usize) {
        (
            self.inputs.0 + 1,
            self.inputs.1 + 1,
            self.outputs.0 + 1,
            self.outputs.1 + 1,
        )
    }
}

/// Every (input pair, output pair) key for an m-output, n-input device.
pub fn all_pair_keys(outputs: usize, inputs: usize) -> Vec<PairKey> {
    let pairs = |n: usize| -> Vec<(usize, usize)> {
        (0..n)
            .flat_map(|a| ((a + 1)..n).map(move |b| (a, b)))
            .collect()
    };
    let (ins, outs) = (pairs(inputs), pairs(outputs));
    ins.iter()
        .flat_map(|&i| {
            outs.iter().map(move |&o| PairKey {
                inputs: i,
                outputs: o,
            })
        })
        .collect()
}

/// Raw coincidence counts at zero and at large delay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawCounts {
    pub c0: f64,
    pub c_inf: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VisibilityRecord {
    pub key: PairKey,
    pub value: f64,
    pub uncertainty: Option<f64>,
    pub raw: Option<RawCounts>,
}

impl VisibilityRecord {
    pub fn new(key: PairKey, value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::Validation(format!(
                "visibility for {:?} is not finite",
                key.labels()
            )));
        }
        Ok(Self {
            key,
            value,
            uncertainty: None,
            raw: None,
        })
    }

    /// Record whose value is computed from the raw counts.
    pub fn from_counts(key: PairKey, raw: RawCounts) -> Result<Self> {
        let value = visibility_two(raw.c_inf, raw.c0)?;
        Ok(Self {
            key,
            value,
            uncertainty: None,
            raw: Some(raw),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSolution {
    /// Radians, in (-pi, pi]; zero on the first row and column.
    pub phases: RealGrid,
    /// Sum of squared differences between supplied and predicted visibilities.
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct TomographyResult {
    pub matrix: TransferMatrix,
    pub amplitude_sigma: RealGrid,
    /// Radians.
    pub phase_sigma: RealGrid,
    pub resample_count: usize,
    pub failed_resamples: usize,
    pub residual: f64,
}

/// Column-normalized amplitudes sqrt(counts(l, i) / sum_l counts(l, i)).
pub fn amplitudes_from_singles(counts: &SinglesCounts) -> Result<RealGrid> {
    let g = counts.grid();
    let mut out = RealGrid::zeros(g.rows(), g.cols());
    for i in 0..g.cols() {
        let total: f64 = (0..g.rows()).map(|l| g.get(l, i)).sum();
        if total <= 0.0 {
            return Err(Error::DegenerateInput(format!(
                "input {} has no single-photon counts",
                i + 1
            )));
        }
        for l in 0..g.rows() {
            out.set(l, i, (g.get(l, i) / total).sqrt());
        }
    }
    Ok(out)
}

fn index_records(records: &[VisibilityRecord]) -> Result<BTreeMap<PairKey, f64>> {
    let mut map = BTreeMap::new();
    for r in records {
        if map.insert(r.key, r.value).is_some() {
            return Err(Error::Pairing(format!(
                "duplicate visibility record {:?}",
                r.key.labels()
            )));
        }
    }
    Ok(map)
}

fn assemble(amplitudes: &RealGrid, phases: &RealGrid) -> Result<TransferMatrix> {
    let entries = amplitudes
        .values()
        .iter()
        .zip(phases.values())
        .map(|(&a, &p)| Complex64::from_polar(a, p))
        .collect();
    TransferMatrix::new(amplitudes.rows(), amplitudes.cols(), entries)
}

fn squared_residual(m: &TransferMatrix, records: &BTreeMap<PairKey, f64>) -> Result<f64> {
    let mut total = 0.0;
    for (key, &measured) in records {
        let (c_inf, c0) = two_photon_limits(m, key.inputs, key.outputs)?;
        total += (visibility_two(c_inf, c0)? - measured).powi(2);
    }
    Ok(total)
}

pub fn phases_from_visibilities(
    amplitudes: &RealGrid,
    records: &[VisibilityRecord],
) -> Result<PhaseSolution> {
    let (m, n) = (amplitudes.rows(), amplitudes.cols());
    let indexed = index_records(records)?;
    let missing: Vec<_> = all_pair_keys(m, n)
        .into_iter()
        .filter(|k| !indexed.contains_key(k))
        .map(|k| k.labels())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingRecords(missing));
    }
    if let Some(extra) = indexed.keys().find(|k| k.inputs.1 >= n || k.outputs.1 >= m) {
        return Err(Error::Configuration(format!(
            "record {:?} out of range for {m}x{n}",
            extra.labels()
        )));
    }

    // magnitudes |phi_li| of the non-gauge elements, in row-major order
    let mut unknowns: Vec<(usize, usize, f64)> = Vec::new();
    let a = amplitudes.get(0, 0);
    for l in 1..m {
        for i in 1..n {
            let (b, c, d) = (
                amplitudes.get(0, i),
                amplitudes.get(l, 0),
                amplitudes.get(l, i),
            );
            let denom = 2.0 * a * b * c * d;
            if denom == 0.0 {
                return Err(Error::IndeterminatePhase {
                    output: l + 1,
                    input: i + 1,
                });
            }
            let key = PairKey {
                inputs: (0, i),
                outputs: (0, l),
            };
            let v = indexed[&key];
            let mut cos = -v * (a * a * d * d + b * b * c * c) / denom;
            if cos.abs() > 1.0 + COS_SLACK {
                return Err(Error::InconsistentData(format!(
                    "visibility {v} for inputs (1,{}) outputs (1,{}) implies cos(phase) = {cos}",
                    i + 1,
                    l + 1
                )));
            }
            cos = cos.clamp(-1.0, 1.0);
            unknowns.push((l, i, cos.acos()));
        }
    }
    if unknowns.len() > MAX_UNKNOWN_PHASES {
        return Err(Error::SizeLimit {
            order: unknowns.len(),
            limit: MAX_UNKNOWN_PHASES,
        });
    }

    let phases_for = |mask: u32| {
        let mut phases = RealGrid::zeros(m, n);
        for (bit, &(l, i, mag)) in unknowns.iter().enumerate() {
            let sign = if mask & (1 << bit) != 0 { -1.0 } else { 1.0 };
            phases.set(l, i, sign * mag);
        }
        phases
    };

    let mut scored = Vec::with_capacity(1 << unknowns.len());
    for mask in 0..(1u32 << unknowns.len()) {
        let candidate = assemble(amplitudes, &phases_for(mask))?;
        scored.push((mask, squared_residual(&candidate, &indexed)?));
    }
    let best = scored.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    // conjugate pairs tie; take the lowest mask among ties
    let chosen = scored
        .iter()
        .find(|s| s.1 <= best + 1e-12 * (1.0 + best))
        .expect("at least one candidate")
        .0;
    Ok(PhaseSolution {
        phases: phases_for(chosen),
        residual: best,
    })
}

pub fn reconstruct(
    counts: &SinglesCounts,
    records: &[VisibilityRecord],
) -> Result<TomographyResult> {
    let amplitudes = amplitudes_from_singles(counts)?;
    let solution = phases_from_visibilities(&amplitudes, records)?;
    let (m, n) = (amplitudes.rows(), amplitudes.cols());
    Ok(TomographyResult {
        matrix: assemble(&amplitudes, &solution.phases)?,
        amplitude_sigma: RealGrid::zeros(m, n),
        phase_sigma: RealGrid::zeros(m, n),
        resample_count: 0,
        failed_resamples: 0,
        residual: solution.residual,
    })
}

/// Two-photon visibilities for every input pair and output pair, ordered by
/// input pair then output pair.
pub fn predict_visibilities(m: &TransferMatrix) -> Result<Vec<VisibilityRecord>> {
    all_pair_keys(m.rows(), m.cols())
        .into_iter()
        .map(|key| {
            let (c_inf, c0) = two_photon_limits(m, key.inputs, key.outputs)?;
            let value = visibility_two(c_inf, c0).map_err(|_| {
                let (i, j, l, mm) = key.labels();
                Error::UndefinedVisibility(format!(
                    "zero distinguishable rate for inputs ({i},{j}) outputs ({l},{mm})"
                ))
            })?;
            VisibilityRecord::new(key, value)
        })
        .collect()
}

/// Mean absolute difference over matching keys.
pub fn q_vis(measured: &[VisibilityRecord], predicted: &[VisibilityRecord]) -> Result<f64> {
    let a = index_records(measured)?;
    let b = index_records(predicted)?;
    if a.len() != b.len() || a.keys().any(|k| !b.contains_key(k)) {
        return Err(Error::Pairing(
            "measured and predicted visibility sets have different keys".into(),
        ));
    }
    if a.is_empty() {
        return Err(Error::Pairing("no visibility records to compare".into()));
    }
    Ok(a.iter().map(|(k, v)| (v - b[k]).abs()).sum::<f64>() / a.len() as f64)
}

/// arg(M11 M_li conj(M_1i) conj(M_l1)): phase combinations that no choice of
/// diagonal phase gauge can change. Zero on the first row and column.
pub fn gauge_invariant_phases(m: &TransferMatrix) -> RealGrid {
    let mut out = RealGrid::zeros(m.rows(), m.cols());
    for l in 1..m.rows() {
        for i in 1..m.cols() {
            let z = m.get(0, 0) * m.get(l, i) * m.get(0, i).conj() * m.get(l, 0).conj();
            out.set(l, i, z.arg());
        }
    }
    out
}

/// Wraps an angle to (-pi, pi].
pub fn wrap_angle(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y == -PI {
        PI
    } else {
        y
    }
}

/// Expected single-photon counts: `level * |M_li|^2`.
pub fn synthetic_singles(m: &TransferMatrix, level: f64) -> Result<SinglesCounts> {
    let mut grid = RealGrid::zeros(m.rows(), m.cols());
    for l in 0..m.rows() {
        for i in 0..m.cols() {
            grid.set(l, i, level * m.get(l, i).norm_sqr());
        }
    }
    SinglesCounts::new(grid)
}

/// Expected coincidence counts for every pair key, scaled so that the mean
/// C(inf) over all keys equals `pair_level`.
pub fn synthetic_records(m: &TransferMatrix, pair_level: f64) -> Result<Vec<VisibilityRecord>> {
    let keys = all_pair_keys(m.rows(), m.cols());
    let limits: Vec<(f64, f64)> = keys
        .iter()
        .map(|k| two_photon_limits(m, k.inputs, k.outputs))
        .collect::<Result<_>>()?;
    let mean_inf = limits.iter().map(|l| l.0).sum::<f64>() / limits.len().max(1) as f64;
    if mean_inf <= 0.0 {
        return Err(Error::DegenerateInput(
            "matrix has no two-photon coincidences".into(),
        ));
    }
    let scale = pair_level / mean_inf;
    keys.into_iter()
        .zip(limits)
        .map(|(key, (c_inf, c0))| {
            VisibilityRecord::from_counts(
                key,
                RawCounts {
                    c0: scale * c0,
                    c_inf: scale * c_inf,
                },
            )
        })
        .collect()
}

/// Poisson-resampled copies of measured counts; integer-valued.
pub fn poisson_singles<R: rand::Rng + ?Sized>(
    counts: &SinglesCounts,
    rng: &mut R,
) -> Result<SinglesCounts> {
    let g = counts.grid();
    let data = g.values().iter().map(|&c| poisson(c, rng)).collect();
    SinglesCounts::new(RealGrid {
        rows: g.rows(),
        cols: g.cols(),
        data,
    })
}

pub fn poisson_records<R: rand::Rng + ?Sized>(
    records: &[VisibilityRecord],
    rng: &mut R,
) -> Result<Vec<VisibilityRecord>> {
    records
        .iter()
        .map(|r| {
            let raw = r.raw.ok_or_else(|| {
                Error::Parameter(format!(
                    "record {:?} carries no raw counts for resampling",
                    r.key.labels()
                ))
            })?;
            let drawn = RawCounts {
                c0: poisson(raw.c0, rng),
                c_inf: poisson(raw.c_inf, rng),
            };
            VisibilityRecord::from_counts(r.key, drawn)
        })
        .collect()
}

/// Point reconstruction plus elementwise standard deviations over
/// `resamples` Poisson resamplings of every count (observed counts used as
/// the Poisson means). Phase deviations are taken on the circle around the
/// point estimate.
pub fn monte_carlo(
    counts: &SinglesCounts,
    records: &[VisibilityRecord],
    resamples: usize,
    seed: u64,
) -> Result<TomographyResult> {
    if resamples < 2 {
        return Err(Error::Parameter(
            "Monte Carlo needs at least 2 resamples".into(),
        ));
    }
    if let Some(r) = records.iter().find(|r| r.raw.is_none()) {
        return Err(Error::Parameter(format!(
            "record {:?} carries no raw counts for resampling",
            r.key.labels()
        )));
    }
    let point = reconstruct(counts, records)?;

    let one = |r: usize| -> Option<TransferMatrix> {
        let mut rng = substream(seed, r as u64);
        let singles = poisson_singles(counts, &mut rng).ok()?;
        let recs = poisson_records(records, &mut rng).ok()?;
        reconstruct(&singles, &recs).ok().map(|t| t.matrix)
    };
    #[cfg(feature = "parallel")]
    let draws: Vec<Option<TransferMatrix>> = {
        use rayon::prelude::*;
        (0..resamples).into_par_iter().map(one).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let draws: Vec<Option<TransferMatrix>> = (0..resamples).map(one).collect();

    let ok: Vec<TransferMatrix> = draws.into_iter().flatten().collect();
    let failed = resamples - ok.len();
    if failed * 10 > resamples || ok.len() < 2 {
        return Err(Error::Unstable {
            failed,
            total: resamples,
        });
    }

    let (m, n) = (point.matrix.rows(), point.matrix.cols());
    let mut amplitude_sigma = RealGrid::zeros(m, n);
    let mut phase_sigma = RealGrid::zeros(m, n);
    for l in 0..m {
        for i in 0..n {
            let centre = point.matrix.get(l, i).arg();
            let amps: Vec<f64> = ok.iter().map(|t| t.get(l, i).norm()).collect();
            let devs: Vec<f64> = ok
                .iter()
                .map(|t| wrap_angle(t.get(l, i).arg() - centre))
                .collect();
            amplitude_sigma.set(l, i, mean_and_std(&amps).1);
            phase_sigma.set(
                l,
                i,
                if l == 0 || i == 0 {
                    0.0
                } else {
                    mean_and_std(&devs).1
                },
            );
        }
    }
    Ok(TomographyResult {
        amplitude_sigma,
        phase_sigma,
        resample_count: ok.len(),
        failed_resamples: failed,
        ..point
    })
}

/// Mean over elements of amplitude_sigma / amplitude.
pub fn mean_relative_amplitude_sigma(result: &TomographyResult) -> f64 {
    let m = &result.matrix;
    let mut acc = Vec::new();
    for l in 0..m.rows() {
        for i in 0..m.cols() {
            let a = m.get(l, i).norm();
            if a > 0.0 {
                acc.push(result.amplitude_sigma.get(l, i) / a);
            }
        }
    }
    acc.iter().sum::<f64>() / acc.len().max(1) as f64
}

/// Mean phase sigma over the non-gauge elements, in units of pi.
pub fn mean_phase_sigma_pi(result: &TomographyResult) -> f64 {
    let s = &result.phase_sigma;
    let vals: Vec<f64> = (1..s.rows())
        .flat_map(|l| (1..s.cols()).map(move |i| (l, i)))
        .map(|(l, i)| s.get(l, i) / PI)
        .collect();
    vals.iter().sum::<f64>() / vals.len().max(1) as f64
}

/// Records keyed for stable output.
pub fn sorted_records(records: &[VisibilityRecord]) -> Vec<VisibilityRecord> {
    let map: BTreeMap<PairKey, &VisibilityRecord> = records.iter().map(|r| (r.key, r)).collect();
    map.into_values().cloned().collect()
}
