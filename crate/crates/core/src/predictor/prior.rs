//! Latent priors: log-normal headway, categorical intention, Gaussian rest.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Location of the log-normal time-headway prior.
pub const HEADWAY_MU: f64 = 0.0682;
/// Scale of the log-normal time-headway prior.
pub const HEADWAY_SIGMA: f64 = 0.647;

/// The three latent groups of the encoder output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LatentGroup {
    Lon,
    Lat,
    Other,
}

impl LatentGroup {
    pub const ALL: [LatentGroup; 3] = [LatentGroup::Lon, LatentGroup::Lat, LatentGroup::Other];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            LatentGroup::Lon => "lon",
            LatentGroup::Lat => "lat",
            LatentGroup::Other => "other",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    pub lon_mu: f64,
    pub lon_sigma: f64,
    pub lat_probs: [f64; 3],
    pub other_width: usize,
}

impl PriorSpec {
    pub fn new(other_width: usize) -> Self {
        Self {
            lon_mu: HEADWAY_MU,
            lon_sigma: HEADWAY_SIGMA,
            lat_probs: [1.0 / 3.0; 3],
            other_width,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.lon_mu.is_finite() || !(self.lon_sigma > 0.0) || !self.lon_sigma.is_finite() {
            return Err(Error::Config("log-normal prior needs finite mu and sigma > 0".into()));
        }
        let total: f64 = self.lat_probs.iter().sum();
        if self.lat_probs.iter().any(|p| !(*p >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config("categorical prior must sum to 1".into()));
        }
        Ok(())
    }

    /// Categorical probabilities estimated from label counts (Laplace smoothed).
    pub fn with_lat_counts(mut self, counts: [usize; 3]) -> Self {
        let total = counts.iter().sum::<usize>() as f64 + 3.0;
        self.lat_probs = counts.map(|c| (c as f64 + 1.0) / total);
        self
    }

    pub fn width(&self, group: LatentGroup) -> usize {
        match group {
            LatentGroup::Lon => 1,
            LatentGroup::Lat => 3,
            LatentGroup::Other => self.other_width,
        }
    }

    /// One draw from the prior of `group` using the caller's generator.
    pub fn sample_with<T: Real>(&self, group: LatentGroup, rng: &mut impl Rng) -> Vec<T> {
        match group {
            LatentGroup::Lon => {
                let z: f64 = rng.sample(StandardNormal);
                vec![T::lit((self.lon_mu + self.lon_sigma * z).exp())]
            }
            LatentGroup::Lat => {
                let mut u = rng.random::<f64>();
                let mut pick = 2;
                for (i, p) in self.lat_probs.iter().enumerate() {
                    if u < *p {
                        pick = i;
                        break;
                    }
                    u -= p;
                }
                let mut v = vec![T::zero(); 3];
                v[pick] = T::one();
                v
            }
            LatentGroup::Other => (0..self.other_width)
                .map(|_| T::lit(StandardNormal.sample(rng)))
                .collect(),
        }
    }
}

/// Deterministic single draw for `seed`.
pub fn sample_prior<T: Real>(spec: &PriorSpec, group: LatentGroup, seed: u64) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    spec.sample_with(group, &mut rng)
}

/// `n` draws of the headway prior from one seeded stream.
pub fn sample_headways<T: Real>(spec: &PriorSpec, n: usize, seed: u64) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| spec.sample_with::<T>(LatentGroup::Lon, &mut rng)[0])
        .collect()
}

/// Log-normal density.
pub fn lognormal_pdf<T: Real>(x: T, mu: T, sigma: T) -> T {
    if x <= T::zero() {
        return T::zero();
    }
    let z = (x.ln() - mu) / sigma;
    let two = T::lit(2.0);
    (-(z * z) / two).exp() / (x * sigma * (two * T::PI()).sqrt())
}
