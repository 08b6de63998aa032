//! Photon-counting rates through a transfer matrix for fully
//! indistinguishable and fully distinguishable photons.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::config::PhotonConfiguration;
use crate::error::{Error, Result};
use crate::matrix::TransferMatrix;
use crate::permanent;

pub const RATE_MAX_PHOTONS: usize = 8;
pub const DISTRIBUTION_MAX_PHOTONS: usize = 5;
pub const DISTRIBUTION_MAX_MODES: usize = 8;

fn check_pair(
    m: &TransferMatrix,
    input: &PhotonConfiguration,
    output: &PhotonConfiguration,
) -> Result<usize> {
    let p = input.total_photons();
    if output.total_photons() != p {
        return Err(Error::Configuration(format!(
            "input {input} carries {p} photons but output {output} carries {}",
            output.total_photons()
        )));
    }
    input.check_within(m.cols(), "input")?;
    output.check_within(m.rows(), "output")?;
    Ok(p)
}

/// Row-major p x p slice with element (r, c) = M[output_r, input_c].
fn submatrix_entries(m: &TransferMatrix, input: &[usize], output: &[usize]) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(input.len() * output.len());
    for &row in output {
        for &col in input {
            out.push(m.get(row, col));
        }
    }
    out
}

/// The p x p matrix whose permanent is the p-photon transition amplitude:
/// column `i` of `m` repeated once per photon in input mode `i`, row `l`
/// once per photon in output mode `l`.
pub fn scattering_submatrix(
    m: &TransferMatrix,
    input: &PhotonConfiguration,
    output: &PhotonConfiguration,
) -> Result<TransferMatrix> {
    let p = check_pair(m, input, output)?;
    TransferMatrix::new(p, p, submatrix_entries(m, input.modes(), output.modes()))
}

/// |perm(sub)|^2 / (prod s_i! prod t_l!). A probability for unitary `m`,
/// a relative rate otherwise.
pub fn rate_indistinguishable(
    m: &TransferMatrix,
    input: &PhotonConfiguration,
    output: &PhotonConfiguration,
) -> Result<f64> {
    let p = check_pair(m, input, output)?;
    if p > RATE_MAX_PHOTONS {
        return Err(Error::SizeLimit {
            order: p,
            limit: RATE_MAX_PHOTONS,
        });
    }
    let sub = submatrix_entries(m, input.modes(), output.modes());
    let amp = permanent::ryser(&sub, p);
    Ok(amp.norm_sqr() / (input.factorial_product() * output.factorial_product()))
}

/// Classical transition rate: perm(|sub|^2) / prod t_l!.
pub fn rate_distinguishable(
    m: &TransferMatrix,
    input: &PhotonConfiguration,
    output: &PhotonConfiguration,
) -> Result<f64> {
    let p = check_pair(m, input, output)?;
    if p > RATE_MAX_PHOTONS {
        return Err(Error::SizeLimit {
            order: p,
            limit: RATE_MAX_PHOTONS,
        });
    }
    let sub: Vec<f64> = submatrix_entries(m, input.modes(), output.modes())
        .iter()
        .map(|z| z.norm_sqr())
        .collect();
    Ok(permanent::ryser_real(&sub, p) / output.factorial_product())
}

/// Every p-photon output pattern over `modes` modes, in lexicographic order.
pub fn output_configurations(
    modes: usize,
    photons: usize,
    collision_free_only: bool,
) -> Vec<PhotonConfiguration> {
    fn recurse(
        start: usize,
        modes: usize,
        left: usize,
        strict: bool,
        current: &mut Vec<usize>,
        out: &mut Vec<PhotonConfiguration>,
    ) {
        if left == 0 {
            out.push(PhotonConfiguration::new(current.iter().copied()).expect("non-empty"));
            return;
        }
        for mode in start..modes {
            current.push(mode);
            recurse(
                if strict { mode + 1 } else { mode },
                modes,
                left - 1,
                strict,
                current,
                out,
            );
            current.pop();
        }
    }
    let mut out = Vec::new();
    if photons > 0 {
        recurse(
            0,
            modes,
            photons,
            collision_free_only,
            &mut Vec::new(),
            &mut out,
        );
    }
    out
}

/// Indistinguishable rates for every output pattern, keyed in lexicographic
/// mode order.
pub fn output_distribution(
    m: &TransferMatrix,
    input: &PhotonConfiguration,
    collision_free_only: bool,
) -> Result<BTreeMap<PhotonConfiguration, f64>> {
    let p = input.total_photons();
    if p > DISTRIBUTION_MAX_PHOTONS {
        return Err(Error::SizeLimit {
            order: p,
            limit: DISTRIBUTION_MAX_PHOTONS,
        });
    }
    if m.rows() > DISTRIBUTION_MAX_MODES {
        return Err(Error::SizeLimit {
            order: m.rows(),
            limit: DISTRIBUTION_MAX_MODES,
        });
    }
    input.check_within(m.cols(), "input")?;
    output_configurations(m.rows(), p, collision_free_only)
        .into_iter()
        .map(|out| rate_indistinguishable(m, input, &out).map(|r| (out, r)))
        .collect()
}
