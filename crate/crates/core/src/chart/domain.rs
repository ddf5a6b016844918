use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Default number of sample points used by pointwise identity checks.
pub const DEFAULT_SAMPLES: usize = 256;
/// Default seed for the jitter added to the low-discrepancy grid.
pub const DEFAULT_SEED: u64 = 0x5eed;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DomainKind {
    Box,
    /// One chart of the two-chart stereographic atlas of the unit sphere.
    SphereStereo,
}

/// An open box of coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct CoordinateDomain {
    bounds: Vec<(f64, f64)>,
    kind: DomainKind,
}

impl CoordinateDomain {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self> {
        Self::with_kind(bounds, DomainKind::Box)
    }

    pub fn with_kind(bounds: Vec<(f64, f64)>, kind: DomainKind) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::Invalid("domain must have positive dimension".into()));
        }
        if let Some((lo, hi)) = bounds.iter().find(|(lo, hi)| !(lo < hi)) {
            return Err(Error::Invalid(format!("empty interval ({lo}, {hi})")));
        }
        if kind == DomainKind::SphereStereo && bounds.len() != 2 {
            return Err(Error::Invalid("sphere charts are two-dimensional".into()));
        }
        Ok(CoordinateDomain { bounds, kind })
    }

    /// The cube `(-half_width, half_width)^dim`.
    pub fn cube(dim: usize, half_width: f64) -> Self {
        Self::new(vec![(-half_width, half_width); dim]).expect("valid cube")
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter().zip(&self.bounds).all(|(v, (lo, hi))| v.is_finite() && lo < v && v < hi)
    }

    /// Cartesian product, `self` coordinates first.
    pub fn product(&self, other: &CoordinateDomain) -> CoordinateDomain {
        let mut bounds = self.bounds.clone();
        bounds.extend_from_slice(&other.bounds);
        CoordinateDomain { bounds, kind: DomainKind::Box }
    }

    pub fn ensure_same(&self, other: &CoordinateDomain) -> Result<()> {
        if self.dim() != other.dim() || self.bounds != other.bounds {
            return Err(Error::DomainMismatch(format!(
                "{}-dimensional domain vs {}-dimensional domain",
                self.dim(),
                other.dim()
            )));
        }
        Ok(())
    }

    /// Deterministic sample points: a Halton sequence mapped into the inner
    /// 90% of the box, plus a small seeded jitter.
    pub fn samples(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|i| {
                self.bounds
                    .iter()
                    .enumerate()
                    .map(|(d, (lo, hi))| {
                        let u = halton(i + 1, PRIMES[d % PRIMES.len()]);
                        let jitter: f64 = rng.gen_range(-1e-3..1e-3);
                        let u = (u + jitter).clamp(0.0, 1.0);
                        let w = hi - lo;
                        lo + w * (0.05 + 0.9 * u)
                    })
                    .collect()
            })
            .collect()
    }
}

const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

fn halton(mut index: usize, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let b = base as f64;
    while index > 0 {
        f /= b;
        r += f * (index as u64 % base) as f64;
        index /= base as usize;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_intervals() {
        assert!(CoordinateDomain::new(vec![(1.0, 1.0)]).is_err());
        assert!(CoordinateDomain::new(vec![]).is_err());
    }

    #[test]
    fn samples_are_inside_and_reproducible() {
        let d = CoordinateDomain::new(vec![(-1.0, 2.0), (0.0, 0.5), (3.0, 4.0)]).unwrap();
        let a = d.samples(100, 7);
        assert!(a.iter().all(|p| d.contains(p)));
        assert_eq!(a, d.samples(100, 7));
        assert_ne!(a, d.samples(100, 8));
    }

    #[test]
    fn halton_base_two() {
        assert_eq!(halton(1, 2), 0.5);
        assert_eq!(halton(2, 2), 0.25);
        assert_eq!(halton(3, 2), 0.75);
    }
}
