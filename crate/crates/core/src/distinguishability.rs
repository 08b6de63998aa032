//! Partially distinguishable photons.
//!
//! Internal (temporal) states enter through a Gram matrix of pairwise
//! overlaps `S[j, k] = <phi_j | phi_k>`. For single-occupied inputs and
//! collision-free outputs the coincidence rate is
//!
//! ```text
//! sum_{sigma, tau} prod_k S[sigma(k), tau(k)] A[k, sigma(k)] conj(A[k, tau(k)])
//! ```
//!
//! with `A` the scattering submatrix. Substituting `tau = rho . sigma` turns the
//! double sum into `sum_rho (prod_j S[j, rho(j)]) perm(A o conj(A P_rho))`,
//! which is what [`rate_partial`] evaluates.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::PhotonConfiguration;
use crate::error::{Error, Result};
use crate::matrix::TransferMatrix;
use crate::optics::{rate_distinguishable, rate_indistinguishable};
use crate::permanent;

pub const PARTIAL_MAX_PHOTONS: usize = 5;

/// Default wavepacket coherence width in picoseconds.
pub const DEFAULT_SIGMA_PS: f64 = 1.5;

/// Delays of at least this many coherence widths count as infinite: the
/// amplitude overlap exp(-d^2 / 4 sigma^2) is then below 1e-12.
pub const INFINITE_DELAY_SIGMAS: f64 = 15.0;

/// Default integration time per scan point, seconds.
pub const DEFAULT_INTEGRATION_TIME_S: f64 = 60.0;

/// Gaussian wavepackets of common width, each shifted by its own delay.
#[derive(Debug, Clone, PartialEq)]
pub struct WavepacketModel {
    coherence_width_ps: f64,
    center_delays_ps: Vec<f64>,
}

impl WavepacketModel {
    pub fn new(coherence_width_ps: f64, center_delays_ps: Vec<f64>) -> Result<Self> {
        if !(coherence_width_ps.is_finite() && coherence_width_ps > 0.0) {
            return Err(Error::Parameter(format!(
                "coherence width must be positive and finite, got {coherence_width_ps}"
            )));
        }
        if center_delays_ps.iter().any(|d| !d.is_finite()) {
            return Err(Error::Parameter("wavepacket delays must be finite".into()));
        }
        Ok(Self {
            coherence_width_ps,
            center_delays_ps,
        })
    }

    pub fn coherence_width_ps(&self) -> f64 {
        self.coherence_width_ps
    }

    pub fn center_delays_ps(&self) -> &[f64] {
        &self.center_delays_ps
    }
}

/// Hermitian, unit-diagonal, positive semidefinite overlap matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    order: usize,
    entries: Vec<Complex64>,
}

impl GramMatrix {
    pub fn new(order: usize, entries: Vec<Complex64>) -> Result<Self> {
        if order == 0 || entries.len() != order * order {
            return Err(Error::Dimension(format!(
                "Gram matrix of order {order} needs {} entries, got {}",
                order * order,
                entries.len()
            )));
        }
        let g = Self { order, entries };
        g.validate()?;
        Ok(g)
    }

    pub fn from_real_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let order = rows.len();
        let entries = rows
            .iter()
            .flat_map(|r| r.as_ref().iter().map(|&x| Complex64::new(x, 0.0)))
            .collect();
        Self::new(order, entries)
    }

    /// Fully distinguishable photons.
    pub fn identity(order: usize) -> Self {
        let mut entries = vec![Complex64::new(0.0, 0.0); order * order];
        for k in 0..order {
            entries[k * order + k] = Complex64::new(1.0, 0.0);
        }
        Self { order, entries }
    }

    /// Identical photons.
    pub fn ones(order: usize) -> Self {
        Self {
            order,
            entries: vec![Complex64::new(1.0, 0.0); order * order],
        }
    }

    /// Photon `odd_one` orthogonal to all others, which stay identical.
    pub fn one_distinguishable(order: usize, odd_one: usize) -> Self {
        let mut g = Self::ones(order);
        for k in 0..order {
            if k != odd_one {
                g.entries[k * order + odd_one] = Complex64::new(0.0, 0.0);
                g.entries[odd_one * order + k] = Complex64::new(0.0, 0.0);
            }
        }
        g
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn get(&self, j: usize, k: usize) -> Complex64 {
        self.entries[j * self.order + k]
    }

    /// Same overlaps with photon labels permuted: entry (j, k) of the result
    /// is entry (perm[j], perm[k]) of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.order;
        let entries = (0..n * n)
            .map(|x| self.get(perm[x / n], perm[x % n]))
            .collect();
        Self { order: n, entries }
    }

    fn validate(&self) -> Result<()> {
        let n = self.order;
        for j in 0..n {
            let d = self.get(j, j);
            if (d - Complex64::new(1.0, 0.0)).norm() > 1e-12 {
                return Err(Error::Validation(format!(
                    "Gram diagonal entry {} is {d}, expected 1",
                    j + 1
                )));
            }
            for k in 0..n {
                let (a, b) = (self.get(j, k), self.get(k, j));
                if !(a.re.is_finite() && a.im.is_finite()) {
                    return Err(Error::Validation("Gram entries must be finite".into()));
                }
                if (a - b.conj()).norm() > 1e-12 {
                    return Err(Error::Validation(format!(
                        "Gram matrix not Hermitian at ({}, {})",
                        j + 1,
                        k + 1
                    )));
                }
                if a.norm() > 1.0 + 1e-12 {
                    return Err(Error::Validation(format!(
                        "Gram overlap ({}, {}) exceeds 1 in magnitude",
                        j + 1,
                        k + 1
                    )));
                }
            }
        }
        if !self.is_positive_semidefinite(1e-10) {
            return Err(Error::Validation(
                "Gram matrix is not positive semidefinite".into(),
            ));
        }
        Ok(())
    }

    /// Cholesky of S + tol * I succeeds iff the smallest eigenvalue of S is
    /// at least -tol.
    fn is_positive_semidefinite(&self, tol: f64) -> bool {
        let n = self.order;
        let mut l = vec![Complex64::new(0.0, 0.0); n * n];
        for j in 0..n {
            let mut diag = self.get(j, j).re + tol;
            for k in 0..j {
                diag -= l[j * n + k].norm_sqr();
            }
            if diag <= 0.0 {
                return false;
            }
            let ljj = diag.sqrt();
            l[j * n + j] = Complex64::new(ljj, 0.0);
            for i in (j + 1)..n {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k].conj();
                }
                l[i * n + j] = s / ljj;
            }
        }
        true
    }
}

/// Overlap matrix of Gaussian wavepackets: S[j, k] = exp(-(d_j - d_k)^2 / (4 sigma^2)).
pub fn gram_from_delays(model: &WavepacketModel, photon_count: usize) -> Result<GramMatrix> {
    let delays = model.center_delays_ps();
    if delays.len() != photon_count {
        return Err(Error::Parameter(format!(
            "{photon_count} photons but {} wavepacket delays",
            delays.len()
        )));
    }
    let four_var = 4.0 * model.coherence_width_ps().powi(2);
    let n = photon_count;
    let entries = (0..n * n)
        .map(|x| {
            let d = delays[x / n] - delays[x % n];
            Complex64::new((-d * d / four_var).exp(), 0.0)
        })
        .collect();
    GramMatrix::new(n, entries)
}

/// Coincidence rate for partially distinguishable photons. Photon `k` is the
/// one entering the k-th (sorted) input mode and corresponds to row/column
/// `k` of `gram`.
pub fn rate_partial(
    m: &TransferMatrix,
    input: &PhotonConfiguration,
    output: &PhotonConfiguration,
    gram: &GramMatrix,
) -> Result<f64> {
    if !input.is_collision_free() {
        return Err(Error::UnsupportedConfiguration(format!(
            "partial distinguishability needs single-occupied inputs, got {input}"
        )));
    }
    if !output.is_collision_free() {
        return Err(Error::UnsupportedConfiguration(format!(
            "partial distinguishability needs collision-free outputs, got {output}"
        )));
    }
    partial_rate_ordered(m, input.modes(), output.modes(), gram)
}

pub(crate) fn partial_rate_ordered(
    m: &TransferMatrix,
    inputs: &[usize],
    outputs: &[usize],
    gram: &GramMatrix,
) -> Result<f64> {
    let p = inputs.len();
    if outputs.len() != p {
        return Err(Error::Configuration(format!(
            "{p} input photons but {} output photons",
            outputs.len()
        )));
    }
    if p > PARTIAL_MAX_PHOTONS {
        return Err(Error::SizeLimit {
            order: p,
            limit: PARTIAL_MAX_PHOTONS,
        });
    }
    if gram.order() != p {
        return Err(Error::Dimension(format!(
            "Gram matrix of order {} for {p} photons",
            gram.order()
        )));
    }
    if let Some(&i) = inputs.iter().find(|&&i| i >= m.cols()) {
        return Err(Error::Configuration(format!(
            "input mode {} out of range",
            i + 1
        )));
    }
    if let Some(&l) = outputs.iter().find(|&&l| l >= m.rows()) {
        return Err(Error::Configuration(format!(
            "output mode {} out of range",
            l + 1
        )));
    }

    // A[k, j]: amplitude for photon j to reach output slot k
    let a: Vec<Complex64> = outputs
        .iter()
        .flat_map(|&l| inputs.iter().map(move |&i| m.get(l, i)))
        .collect();

    let mut total = Complex64::new(0.0, 0.0);
    let mut magnitude = 0.0;
    let mut b = vec![Complex64::new(0.0, 0.0); p * p];
    permanent::for_each_permutation(p, |rho| {
        let weight = rho
            .iter()
            .enumerate()
            .fold(Complex64::new(1.0, 0.0), |acc, (j, &rj)| {
                acc * gram.get(j, rj)
            });
        if weight == Complex64::new(0.0, 0.0) {
            return;
        }
        for k in 0..p {
            for j in 0..p {
                b[k * p + j] = a[k * p + j] * a[k * p + rho[j]].conj();
            }
        }
        let term = weight * permanent::ryser(&b, p);
        magnitude += term.norm();
        total += term;
    });

    if total.im.abs() > 1e-10 * magnitude.max(1.0) {
        return Err(Error::Validation(format!(
            "partial-distinguishability rate has imaginary part {:e}",
            total.im
        )));
    }
    Ok(total.re.max(0.0))
}

/// Sampled coincidence curve for one input/output combination.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayScan {
    pub input: PhotonConfiguration,
    pub output: PhotonConfiguration,
    samples: Vec<(f64, f64)>,
    pub integration_time_s: f64,
}

impl DelayScan {
    pub fn new(
        input: PhotonConfiguration,
        output: PhotonConfiguration,
        samples: Vec<(f64, f64)>,
    ) -> Result<Self> {
        for w in samples.windows(2) {
            #[allow(clippy::neg_cmp_op_on_partial_ord)] // also rejects NaN
            if !(w[1].0 > w[0].0) {
                return Err(Error::Validation(format!(
                    "scan delays must be strictly increasing ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        if let Some(&(d, v)) = samples
            .iter()
            .find(|(d, v)| !d.is_finite() || !v.is_finite() || *v < 0.0)
        {
            return Err(Error::Validation(format!("invalid scan sample ({d}, {v})")));
        }
        Ok(Self {
            input,
            output,
            samples,
            integration_time_s: DEFAULT_INTEGRATION_TIME_S,
        })
    }

    pub fn with_integration_time(mut self, seconds: f64) -> Self {
        self.integration_time_s = seconds;
        self
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn delays(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.0).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.1).collect()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Same delays with replaced values.
    pub fn with_values(&self, values: &[f64]) -> Result<Self> {
        if values.len() != self.samples.len() {
            return Err(Error::Dimension(
                "value count does not match scan length".into(),
            ));
        }
        let samples = self
            .samples
            .iter()
            .zip(values)
            .map(|(&(d, _), &v)| (d, v))
            .collect();
        Ok(Self {
            samples,
            ..self.clone()
        })
    }
}

fn evaluate_ordered<T: Send, F: Fn(f64) -> Result<T> + Sync + Send>(
    delays: &[f64],
    f: F,
) -> Result<Vec<T>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        delays.par_iter().map(|&d| f(d)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        delays.iter().map(|&d| f(d)).collect()
    }
}

/// Two-photon HOM curve: photons in inputs `i` and `j`, coincidences at
/// outputs `l` and `m`; the photon in `j` is delayed by each value of
/// `delays_ps` (which must increase strictly).
pub fn hom_curve(
    m: &TransferMatrix,
    inputs: (usize, usize),
    outputs: (usize, usize),
    delays_ps: &[f64],
    sigma_ps: f64,
) -> Result<DelayScan> {
    if inputs.0 == inputs.1 || outputs.0 == outputs.1 {
        return Err(Error::UnsupportedConfiguration(
            "HOM curve needs distinct inputs and distinct outputs".into(),
        ));
    }
    let input = PhotonConfiguration::new([inputs.0, inputs.1])?;
    let output = PhotonConfiguration::new([outputs.0, outputs.1])?;
    let delayed = input
        .modes()
        .iter()
        .position(|&x| x == inputs.1)
        .expect("present");
    delayed_photon_curve(m, input, output, delayed, delays_ps, sigma_ps)
}

/// Three-photon coincidence curve with only the photon entering
/// `delayed_input` delayed; the other two stay mutually identical.
pub fn threefold_curve(
    m: &TransferMatrix,
    inputs: [usize; 3],
    outputs: [usize; 3],
    delayed_input: usize,
    delays_ps: &[f64],
    sigma_ps: f64,
) -> Result<DelayScan> {
    let input = PhotonConfiguration::new(inputs)?;
    let output = PhotonConfiguration::new(outputs)?;
    if !input.is_collision_free() || !output.is_collision_free() {
        return Err(Error::UnsupportedConfiguration(
            "threefold curve needs distinct inputs and distinct outputs".into(),
        ));
    }
    let delayed = input
        .modes()
        .iter()
        .position(|&x| x == delayed_input)
        .ok_or_else(|| {
            Error::Configuration(format!(
                "delayed input {} is not one of the occupied inputs {input}",
                delayed_input + 1
            ))
        })?;
    delayed_photon_curve(m, input, output, delayed, delays_ps, sigma_ps)
}

fn delayed_photon_curve(
    m: &TransferMatrix,
    input: PhotonConfiguration,
    output: PhotonConfiguration,
    delayed: usize,
    delays_ps: &[f64],
    sigma_ps: f64,
) -> Result<DelayScan> {
    let p = input.total_photons();
    WavepacketModel::new(sigma_ps, vec![0.0; p])?;
    let values = evaluate_ordered(delays_ps, |d| {
        let mut centers = vec![0.0; p];
        centers[delayed] = d;
        let gram = gram_from_delays(&WavepacketModel::new(sigma_ps, centers)?, p)?;
        rate_partial(m, &input, &output, &gram)
    })?;
    DelayScan::new(
        input,
        output,
        delays_ps.iter().copied().zip(values).collect(),
    )
}

/// Which distinguishable configuration stands in for "infinite delay".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayReference {
    /// Every photon distinguishable from every other.
    AllDistinguishable,
    /// Only the photon entering this (0-based) input mode is delayed; the
    /// rest keep interfering. This is what a single delay stage produces.
    DelayedInput(usize),
}

/// (C(inf), C(0)) for a collision-free pattern.
pub fn delay_limits(
    m: &TransferMatrix,
    input: &PhotonConfiguration,
    output: &PhotonConfiguration,
    reference: DelayReference,
) -> Result<(f64, f64)> {
    let p = input.total_photons();
    let far = match reference {
        DelayReference::AllDistinguishable => GramMatrix::identity(p),
        DelayReference::DelayedInput(mode) => {
            let pos = input
                .modes()
                .iter()
                .position(|&x| x == mode)
                .ok_or_else(|| {
                    Error::Configuration(format!(
                        "delayed input {} is not one of the occupied inputs {input}",
                        mode + 1
                    ))
                })?;
            GramMatrix::one_distinguishable(p, pos)
        }
    };
    let c_inf = rate_partial(m, input, output, &far)?;
    let c_zero = rate_partial(m, input, output, &GramMatrix::ones(p))?;
    Ok((c_inf, c_zero))
}

/// Baseline-normalized visibility (C(inf) - C(0)) / C(inf); positive for dips.
pub fn visibility_two(c_inf: f64, c_zero: f64) -> Result<f64> {
    if c_inf == 0.0 {
        return Err(Error::UndefinedVisibility("C(inf) is zero".into()));
    }
    Ok((c_inf - c_zero) / c_inf)
}

/// Zero-delay-normalized visibility (C(inf) - C(0)) / C(0); negative for peaks.
pub fn visibility_three(c_inf: f64, c_zero: f64) -> Result<f64> {
    if c_zero == 0.0 {
        return Err(Error::UndefinedVisibility("C(0) is zero".into()));
    }
    Ok((c_inf - c_zero) / c_zero)
}

/// Both limits for an idealized two-photon pair, from the closed-form rates.
pub fn two_photon_limits(
    m: &TransferMatrix,
    inputs: (usize, usize),
    outputs: (usize, usize),
) -> Result<(f64, f64)> {
    let input = PhotonConfiguration::new([inputs.0, inputs.1])?;
    let output = PhotonConfiguration::new([outputs.0, outputs.1])?;
    Ok((
        rate_distinguishable(m, &input, &output)?,
        rate_indistinguishable(m, &input, &output)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{dft_target, ideal_tritter, measured_tritter};
    use crate::optics::output_configurations;
    use crate::random::random_complex_matrix;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(labels: &[usize]) -> PhotonConfiguration {
        PhotonConfiguration::from_labels(labels).unwrap()
    }

    /// Reference double sum over (sigma, tau), written out literally.
    fn brute_force(
        m: &TransferMatrix,
        inputs: &[usize],
        outputs: &[usize],
        s: &GramMatrix,
    ) -> Complex64 {
        let p = inputs.len();
        let perms = permanent::permutations(p);
        let mut total = Complex64::new(0.0, 0.0);
        for sigma in &perms {
            for tau in &perms {
                let mut term = Complex64::new(1.0, 0.0);
                for k in 0..p {
                    term *= s.get(sigma[k], tau[k])
                        * m.get(outputs[k], inputs[sigma[k]])
                        * m.get(outputs[k], inputs[tau[k]]).conj();
                }
                total += term;
            }
        }
        total
    }

    #[test]
    fn gram_examples() {
        let g = gram_from_delays(&WavepacketModel::new(1.5, vec![0.3; 3]).unwrap(), 3).unwrap();
        assert_eq!(g, GramMatrix::ones(3));
        let g = gram_from_delays(&WavepacketModel::new(1.0, vec![0.0, 2.0]).unwrap(), 2).unwrap();
        assert!((g.get(0, 1).re - (-1.0f64).exp()).abs() < 1e-15);
        let far = INFINITE_DELAY_SIGMAS * 1.5;
        let g = gram_from_delays(&WavepacketModel::new(1.5, vec![0.0, far]).unwrap(), 2).unwrap();
        assert!(g.get(0, 1).re < 1e-12);
    }

    #[test]
    fn gram_errors() {
        assert!(WavepacketModel::new(0.0, vec![0.0]).is_err());
        assert!(WavepacketModel::new(-1.0, vec![0.0]).is_err());
        assert!(WavepacketModel::new(1.0, vec![f64::INFINITY]).is_err());
        let model = WavepacketModel::new(1.0, vec![0.0, 1.0]).unwrap();
        assert!(gram_from_delays(&model, 3).is_err());
        // not PSD: three mutually "anti-correlated" states
        assert!(GramMatrix::from_real_rows(&[
            [1.0, -0.9, -0.9],
            [-0.9, 1.0, -0.9],
            [-0.9, -0.9, 1.0]
        ])
        .is_err());
        assert!(GramMatrix::from_real_rows(&[[1.0, 0.5], [0.4, 1.0]]).is_err());
        assert!(GramMatrix::from_real_rows(&[[0.9, 0.0], [0.0, 1.0]]).is_err());
    }

    #[test]
    fn limits_reduce_to_closed_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let m = random_complex_matrix(3, 3, &mut rng);
            let input = cfg(&[1, 2, 3]);
            for out in output_configurations(3, 3, true) {
                let a = rate_partial(&m, &input, &out, &GramMatrix::identity(3)).unwrap();
                let b = rate_distinguishable(&m, &input, &out).unwrap();
                assert!((a - b).abs() < 1e-10 * b.max(1.0));
                let a = rate_partial(&m, &input, &out, &GramMatrix::ones(3)).unwrap();
                let b = rate_indistinguishable(&m, &input, &out).unwrap();
                assert!((a - b).abs() < 1e-10 * b.max(1.0));
            }
        }
    }

    #[test]
    fn matches_brute_force_for_partial_overlaps() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = random_complex_matrix(4, 4, &mut rng);
        let model = WavepacketModel::new(1.0, vec![0.0, 0.7, -1.1]).unwrap();
        let g = gram_from_delays(&model, 3).unwrap();
        let fast = rate_partial(&m, &cfg(&[1, 2, 4]), &cfg(&[1, 3, 4]), &g).unwrap();
        let slow = brute_force(&m, &[0, 1, 3], &[0, 2, 3], &g);
        assert!(slow.im.abs() < 1e-10);
        assert!((fast - slow.re).abs() < 1e-10 * slow.re);
    }

    #[test]
    fn unsupported_configurations() {
        let m = ideal_tritter();
        let g = GramMatrix::ones(2);
        assert!(matches!(
            rate_partial(&m, &cfg(&[1, 1]), &cfg(&[1, 2]), &g),
            Err(Error::UnsupportedConfiguration(_))
        ));
        assert!(matches!(
            rate_partial(&m, &cfg(&[1, 2]), &cfg(&[2, 2]), &g),
            Err(Error::UnsupportedConfiguration(_))
        ));
        assert!(rate_partial(&m, &cfg(&[1, 2]), &cfg(&[1, 2]), &GramMatrix::ones(3)).is_err());
    }

    #[test]
    fn measured_tritter_three_photon_prediction() {
        let m = measured_tritter();
        let (c_inf, c0) = delay_limits(
            &m,
            &cfg(&[1, 2, 3]),
            &cfg(&[1, 2, 3]),
            DelayReference::DelayedInput(0),
        )
        .unwrap();
        let v = visibility_three(c_inf, c0).unwrap();
        assert!((v + 0.558).abs() < 0.02, "v={v}");
    }

    #[test]
    fn ideal_tritter_three_photon_references() {
        let t = ideal_tritter();
        let (i, o) = (cfg(&[1, 2, 3]), cfg(&[1, 2, 3]));
        let (c_inf, c0) = delay_limits(&t, &i, &o, DelayReference::AllDistinguishable).unwrap();
        assert!((c_inf - 2.0 / 9.0).abs() < 1e-14 && (c0 - 1.0 / 3.0).abs() < 1e-14);
        assert!((visibility_three(c_inf, c0).unwrap() + 1.0 / 3.0).abs() < 1e-12);
        let (c_inf, c0) = delay_limits(&t, &i, &o, DelayReference::DelayedInput(0)).unwrap();
        assert!((c_inf - 1.0 / 9.0).abs() < 1e-14);
        assert!((visibility_three(c_inf, c0).unwrap() + 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn hom_curve_endpoints() {
        let splitter = dft_target(2).unwrap();
        let scan = hom_curve(&splitter, (0, 1), (0, 1), &[-2.0, 0.0, 2.0], 1.0).unwrap();
        assert!(scan.values()[1].abs() < 1e-15);

        let t = ideal_tritter();
        let far = INFINITE_DELAY_SIGMAS * DEFAULT_SIGMA_PS;
        let scan = hom_curve(&t, (0, 1), (0, 1), &[0.0, far], DEFAULT_SIGMA_PS).unwrap();
        let v = scan.values();
        assert!((v[0] - 1.0 / 9.0).abs() < 1e-14);
        assert!((v[1] - 2.0 / 9.0).abs() < 1e-12);
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            for (l, mm) in [(0, 1), (0, 2), (1, 2)] {
                let s = hom_curve(&t, (i, j), (l, mm), &[0.0, far], DEFAULT_SIGMA_PS)
                    .unwrap()
                    .values();
                assert!((visibility_two(s[1], s[0]).unwrap() - 0.5).abs() < 1e-10);
            }
        }
        assert!(hom_curve(&t, (0, 0), (0, 1), &[0.0], 1.0).is_err());
        assert!(hom_curve(&t, (0, 1), (0, 1), &[1.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn threefold_curve_limits() {
        let m = measured_tritter();
        let far = INFINITE_DELAY_SIGMAS * DEFAULT_SIGMA_PS;
        let scan = threefold_curve(
            &m,
            [0, 1, 2],
            [0, 1, 2],
            0,
            &[-far, 0.0, far],
            DEFAULT_SIGMA_PS,
        )
        .unwrap();
        let v = scan.values();
        let (c_inf, c0) = delay_limits(
            &m,
            &scan.input,
            &scan.output,
            DelayReference::DelayedInput(0),
        )
        .unwrap();
        assert!((v[1] - c0).abs() < 1e-14);
        assert!((v[0] - c_inf).abs() < 1e-12 && (v[2] - c_inf).abs() < 1e-12);
        assert!(threefold_curve(&m, [0, 1, 2], [0, 1, 2], 5, &[0.0], 1.0).is_err());
    }

    #[test]
    fn visibility_definitions() {
        assert_eq!(visibility_two(200.0, 100.0).unwrap(), 0.5);
        assert_eq!(visibility_two(3.0, 3.0).unwrap(), 0.0);
        assert!((visibility_two(2.0 / 9.0, 1.0 / 9.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(
            visibility_two(0.0, 1.0),
            Err(Error::UndefinedVisibility(_))
        ));
        assert!((visibility_three(2.0 / 9.0, 1.0 / 3.0).unwrap() + 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(visibility_three(3.0, 3.0).unwrap(), 0.0);
        assert!(matches!(
            visibility_three(1.0, 0.0),
            Err(Error::UndefinedVisibility(_))
        ));
    }

    #[test]
    fn balanced_splitter_dip_is_monotone() {
        let splitter = dft_target(2).unwrap();
        let delays: Vec<f64> = (0..41).map(|k| -5.0 + 0.25 * k as f64).collect();
        let scan = hom_curve(&splitter, (0, 1), (0, 1), &delays, 1.0).unwrap();
        for (&(d1, v1), &(d2, v2)) in scan.samples().iter().zip(scan.samples().iter().skip(1)) {
            if d1 >= 0.0 {
                assert!(v2 >= v1 - 1e-15);
            } else if d2 <= 0.0 {
                assert!(v2 <= v1 + 1e-15);
            }
        }
    }

    #[test]
    fn scan_validation() {
        let (i, o) = (cfg(&[1, 2]), cfg(&[1, 2]));
        assert!(DelayScan::new(i.clone(), o.clone(), vec![(0.0, 1.0), (0.0, 2.0)]).is_err());
        assert!(DelayScan::new(i.clone(), o.clone(), vec![(0.0, -1.0)]).is_err());
        let s = DelayScan::new(i, o, vec![(0.0, 1.0), (1.0, 2.0)]).unwrap();
        assert_eq!(s.integration_time_s, 60.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn realness_and_label_symmetry(seed in any::<u64>(), d in proptest::collection::vec(-3.0f64..3.0, 3), perm_idx in 0usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_complex_matrix(3, 3, &mut rng);
            let g = gram_from_delays(&WavepacketModel::new(1.0, d).unwrap(), 3).unwrap();
            let inputs = [0usize, 1, 2];
            let outputs = [0usize, 1, 2];
            let slow = brute_force(&m, &inputs, &outputs, &g);
            prop_assert!(slow.im.abs() < 1e-10);
            let base = partial_rate_ordered(&m, &inputs, &outputs, &g).unwrap();
            let perm = &permanent::permutations(3)[perm_idx];
            let relabeled: Vec<usize> = perm.iter().map(|&k| inputs[k]).collect();
            let rotated = partial_rate_ordered(&m, &relabeled, &outputs, &g.permuted(perm)).unwrap();
            prop_assert!((base - rotated).abs() < 1e-10 * base.max(1e-3));
        }

        #[test]
        fn visibilities_gauge_invariant(seed in any::<u64>(), phases in proptest::collection::vec(-3.2f64..3.2, 6)) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_complex_matrix(3, 3, &mut rng);
            let g = m.with_diagonal_phases(&phases[..3], &phases[3..]).unwrap();
            let (i, o) = (cfg(&[1, 2, 3]), cfg(&[1, 2, 3]));
            for reference in [DelayReference::AllDistinguishable, DelayReference::DelayedInput(0)] {
                let (a, b) = delay_limits(&m, &i, &o, reference).unwrap();
                let (c, d) = delay_limits(&g, &i, &o, reference).unwrap();
                let v1 = visibility_three(a, b).unwrap();
                let v2 = visibility_three(c, d).unwrap();
                prop_assert!((v1 - v2).abs() < 1e-12 * v1.abs().max(1.0));
            }
        }
    }
}
