//! IID random-walk drivers (Donsker regime).

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::IncrementSource;
use crate::linalg::psd_factor;
use crate::mc::{SeedSplitter, StreamPurpose};
use crate::Result;

/// Law of one walk increment; mean zero with finite covariance.
#[derive(Debug, Clone)]
pub enum WalkLaw {
    /// Independent ±1 coordinates (covariance I).
    Rademacher { dim: usize },
    /// Centered Gaussian with the given covariance.
    Gaussian { sigma: DMatrix<f64> },
}

/// IID increments ξ_1, ξ_2, ... for the scaled walk `ε Z_{t/ε²}`,
/// `ε = n^{-1/2}`.
pub struct WalkIncrementSource {
    law: WalkLaw,
    factor: Option<DMatrix<f64>>,
    splitter: SeedSplitter,
}

impl WalkIncrementSource {
    pub fn new(law: WalkLaw, splitter: SeedSplitter) -> Result<Self> {
        let factor = match &law {
            WalkLaw::Rademacher { .. } => None,
            WalkLaw::Gaussian { sigma } => Some(psd_factor(sigma)?),
        };
        Ok(Self {
            law,
            factor,
            splitter,
        })
    }

    /// The increment covariance Σ.
    pub fn covariance(&self) -> DMatrix<f64> {
        match &self.law {
            WalkLaw::Rademacher { dim } => DMatrix::identity(*dim, *dim),
            WalkLaw::Gaussian { sigma } => sigma.clone(),
        }
    }
}

impl IncrementSource for WalkIncrementSource {
    fn dim(&self) -> usize {
        match &self.law {
            WalkLaw::Rademacher { dim } => *dim,
            WalkLaw::Gaussian { sigma } => sigma.nrows(),
        }
    }

    fn mixing(&self) -> bool {
        true
    }

    fn label(&self) -> String {
        match &self.law {
            WalkLaw::Rademacher { dim } => format!("rademacher(dim={dim})"),
            WalkLaw::Gaussian { sigma } => format!("gaussian-walk(dim={})", sigma.nrows()),
        }
    }

    fn fill(&self, replica: u64, out: &mut [f64]) {
        let dim = self.dim();
        assert_eq!(out.len() % dim, 0);
        let mut rng = self.splitter.stream(StreamPurpose::Walk, replica);
        match &self.law {
            WalkLaw::Rademacher { .. } => {
                for x in out.iter_mut() {
                    *x = if rng.random::<bool>() { 1.0 } else { -1.0 };
                }
            }
            WalkLaw::Gaussian { .. } => {
                let factor = self.factor.as_ref().unwrap();
                let mut z = vec![0.0; dim];
                for chunk in out.chunks_exact_mut(dim) {
                    for zi in z.iter_mut() {
                        *zi = StandardNormal.sample(&mut rng);
                    }
                    for r in 0..dim {
                        let mut acc = 0.0;
                        for c in 0..dim {
                            acc += factor[(r, c)] * z[c];
                        }
                        chunk[r] = acc;
                    }
                }
            }
        }
    }
}
