use std::fmt;

use crate::error::{Error, Result};

/// Multiset of occupied modes. Modes are 0-based internally; the `labels`
/// helpers convert to and from the 1-based labels used in files and on the
/// command line.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PhotonConfiguration {
    // one entry per photon, sorted
    modes: Vec<usize>,
}

impl PhotonConfiguration {
    /// One mode index per photon, in any order; repeated indices mean
    /// multiple occupation.
    pub fn new(modes: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut modes: Vec<usize> = modes.into_iter().collect();
        if modes.is_empty() {
            return Err(Error::Configuration(
                "configuration must hold at least one photon".into(),
            ));
        }
        modes.sort_unstable();
        Ok(Self { modes })
    }

    /// From 1-based mode labels.
    pub fn from_labels(labels: &[usize]) -> Result<Self> {
        if labels.contains(&0) {
            return Err(Error::Configuration(
                "mode labels are 1-based; got 0".into(),
            ));
        }
        Self::new(labels.iter().map(|l| l - 1))
    }

    /// From (mode, occupation) pairs; occupations must be positive.
    pub fn from_occupations(pairs: &[(usize, usize)]) -> Result<Self> {
        if let Some((mode, _)) = pairs.iter().find(|(_, n)| *n == 0) {
            return Err(Error::Configuration(format!(
                "mode {} has zero occupation",
                mode + 1
            )));
        }
        Self::new(
            pairs
                .iter()
                .flat_map(|&(mode, n)| std::iter::repeat_n(mode, n)),
        )
    }

    /// Sorted per-photon mode list.
    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    pub fn labels(&self) -> Vec<usize> {
        self.modes.iter().map(|m| m + 1).collect()
    }

    pub fn total_photons(&self) -> usize {
        self.modes.len()
    }

    /// (mode, occupation) pairs in increasing mode order.
    pub fn occupations(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = Vec::new();
        for &m in &self.modes {
            match out.last_mut() {
                Some((last, n)) if *last == m => *n += 1,
                _ => out.push((m, 1)),
            }
        }
        out
    }

    pub fn is_collision_free(&self) -> bool {
        self.modes.windows(2).all(|w| w[0] != w[1])
    }

    pub fn max_mode(&self) -> usize {
        *self.modes.last().expect("non-empty by construction")
    }

    /// Fails unless every mode index is below `dim`.
    pub fn check_within(&self, dim: usize, what: &str) -> Result<()> {
        if self.max_mode() >= dim {
            return Err(Error::Configuration(format!(
                "{what} mode {} out of range for {dim} modes",
                self.max_mode() + 1
            )));
        }
        Ok(())
    }

    /// Product of occupation factorials.
    pub fn factorial_product(&self) -> f64 {
        self.occupations()
            .iter()
            .map(|&(_, n)| (1..=n).map(|k| k as f64).product::<f64>())
            .product()
    }
}

impl fmt::Debug for PhotonConfiguration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for PhotonConfiguration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let labels: Vec<String> = self.labels().iter().map(ToString::to_string).collect();
        write!(f, "{{{}}}", labels.join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn occupations_and_factorials() {
        let c = PhotonConfiguration::from_labels(&[3, 1, 1]).unwrap();
        assert_eq!(c.modes(), &[0, 0, 2]);
        assert_eq!(c.occupations(), vec![(0, 2), (2, 1)]);
        assert_eq!(c.total_photons(), 3);
        assert_eq!(c.factorial_product(), 2.0);
        assert!(!c.is_collision_free());
        assert_eq!(c.to_string(), "{1,1,3}");
    }

    #[test]
    fn rejects_empty_and_zero_label() {
        assert!(PhotonConfiguration::new([]).is_err());
        assert!(PhotonConfiguration::from_labels(&[0, 1]).is_err());
        assert!(PhotonConfiguration::from_occupations(&[(1, 0)]).is_err());
    }

    #[test]
    fn range_check() {
        let c = PhotonConfiguration::from_labels(&[1, 4]).unwrap();
        assert!(c.check_within(3, "output").is_err());
        assert!(c.check_within(4, "output").is_ok());
    }

    #[test]
    fn ordering_is_lexicographic_by_mode() {
        let a = PhotonConfiguration::new([0, 0]).unwrap();
        let b = PhotonConfiguration::new([0, 1]).unwrap();
        let c = PhotonConfiguration::new([1, 1]).unwrap();
        assert!(a < b && b < c);
    }
}
