//! Seeded randomness and the nonuniform component-sampling distributions.
//!
//! Every random draw in the crate goes through [`SeededRng`], a ChaCha8
//! stream keyed by a single 64-bit seed. ChaCha8 output is specified
//! bit-for-bit, so a seed reproduces the same index sequence on every
//! platform. Seeds for concurrent runs are derived with [`mix_seed`].

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Name of the generator recorded in run metadata.
pub const GENERATOR: &str = "ChaCha8 (rand_chacha 0.9, seed_from_u64)";

#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent stream for run `index` of a batch started from `base`.
    pub fn derived(base: u64, index: u64) -> Self {
        Self::new(mix_seed(base, index))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform draw on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// SplitMix64 finalizer applied to `base + index·φ`, with φ the 64-bit golden ratio.
pub fn mix_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Probability vector over components with a cumulative table for inverse-CDF draws.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingDistribution {
    probs: Vec<f64>,
    cumulative: Vec<f64>,
}

impl SamplingDistribution {
    /// Builds a distribution from probabilities that already sum to one.
    pub fn from_probabilities(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Empty("sampling distribution"));
        }
        if let Some((i, p)) = probs.iter().enumerate().find(|(_, p)| !(**p > 0.0) || !p.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "probability {i} must be positive, got {p}"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        let mut cumulative = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for p in &probs {
            acc += p;
            cumulative.push(acc);
        }
        *cumulative.last_mut().unwrap() = 1.0;
        Ok(Self { probs, cumulative })
    }

    /// Normalizes positive weights.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Empty("sampling weights"));
        }
        positive("weight", weights)?;
        let total: f64 = weights.iter().sum();
        Self::from_probabilities(weights.iter().map(|w| w / total).collect())
    }

    pub fn uniform(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::Empty("sampling distribution"));
        }
        Self::from_probabilities(vec![1.0 / m as f64; m])
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, i: usize) -> f64 {
        self.probs[i]
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    /// Draws an index by binary search on the cumulative table.
    pub fn sample(&self, rng: &mut SeededRng) -> usize {
        let u = rng.uniform();
        let idx = self.cumulative.partition_point(|&c| c <= u);
        idx.min(self.probs.len() - 1)
    }
}

fn positive(what: &str, values: &[f64]) -> Result<()> {
    match values.iter().enumerate().find(|(_, v)| !(**v > 0.0) || !v.is_finite()) {
        Some((i, v)) => Err(Error::InvalidParameter(format!(
            "{what} {i} must be positive and finite, got {v}"
        ))),
        None => Ok(()),
    }
}

/// `π_i = √L_i / (2 Σ√L_j) + 1/(2m)`: half proportional to `√L_i`, half uniform.
pub fn ssnm_distribution(smoothness: &[f64]) -> Result<SamplingDistribution> {
    if smoothness.is_empty() {
        return Err(Error::Empty("smoothness constants"));
    }
    positive("smoothness constant", smoothness)?;
    let m = smoothness.len() as f64;
    let roots: Vec<f64> = smoothness.iter().map(|l| l.sqrt()).collect();
    let total: f64 = roots.iter().sum();
    let probs = roots
        .iter()
        .map(|r| r / (2.0 * total) + 1.0 / (2.0 * m))
        .collect();
    SamplingDistribution::from_probabilities(probs)
}

/// `π_i = B_i L_i / Σ B_j L_j`, used by the general composite estimator.
pub fn katyusha_distribution(upper: &[f64], smoothness: &[f64]) -> Result<SamplingDistribution> {
    if upper.len() != smoothness.len() {
        return Err(Error::DimensionMismatch {
            expected: upper.len(),
            got: smoothness.len(),
        });
    }
    positive("partial-derivative bound", upper)?;
    positive("smoothness constant", smoothness)?;
    let w: Vec<f64> = upper.iter().zip(smoothness).map(|(b, l)| b * l).collect();
    SamplingDistribution::from_weights(&w)
}

/// `π_i = l_i / Σ l_j`, used by the reduced composite estimator.
pub fn reduced_distribution(l: &[f64]) -> Result<SamplingDistribution> {
    SamplingDistribution::from_weights(l)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64]) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < 1e-15, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn ssnm_examples() {
        close(ssnm_distribution(&[1.0, 1.0]).unwrap().probs(), &[0.5, 0.5]);
        close(ssnm_distribution(&[4.0, 1.0]).unwrap().probs(), &[7.0 / 12.0, 5.0 / 12.0]);
        close(ssnm_distribution(&[3.7]).unwrap().probs(), &[1.0]);
    }

    #[test]
    fn ssnm_errors() {
        assert!(matches!(ssnm_distribution(&[]), Err(Error::Empty(_))));
        assert!(ssnm_distribution(&[1.0, 0.0]).is_err());
        assert!(ssnm_distribution(&[1.0, -2.0]).is_err());
    }

    #[test]
    fn katyusha_and_reduced_examples() {
        close(katyusha_distribution(&[1.0; 4], &[1.0; 4]).unwrap().probs(), &[0.25; 4]);
        close(katyusha_distribution(&[2.0, 1.0], &[1.0, 1.0]).unwrap().probs(), &[2.0 / 3.0, 1.0 / 3.0]);
        close(katyusha_distribution(&[5.0], &[0.2]).unwrap().probs(), &[1.0]);
        assert!(katyusha_distribution(&[1.0, 0.0], &[1.0, 1.0]).is_err());

        close(reduced_distribution(&[2.5; 3]).unwrap().probs(), &[1.0 / 3.0; 3]);
        close(reduced_distribution(&[3.0, 1.0]).unwrap().probs(), &[0.75, 0.25]);
        close(reduced_distribution(&[1.0]).unwrap().probs(), &[1.0]);
    }

    #[test]
    fn single_atom_always_zero() {
        let d = SamplingDistribution::uniform(1).unwrap();
        let mut rng = SeededRng::new(3);
        assert!((0..1000).all(|_| d.sample(&mut rng) == 0));
    }

    fn binomial_within_3_sigma(p: f64) {
        let d = SamplingDistribution::from_probabilities(vec![p, 1.0 - p]).unwrap();
        let mut rng = SeededRng::new(2024);
        let n = 1_000_000;
        let hits = (0..n).filter(|_| d.sample(&mut rng) == 0).count() as f64;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((hits - n as f64 * p).abs() <= 3.0 * sigma, "hits {hits} for p {p}");
    }

    #[test]
    fn empirical_frequencies() {
        binomial_within_3_sigma(0.5);
        binomial_within_3_sigma(7.0 / 12.0);
    }

    #[test]
    fn same_seed_same_sequence() {
        let d = ssnm_distribution(&[1.0, 4.0, 9.0, 0.5]).unwrap();
        let mut a = SeededRng::new(11);
        let mut b = SeededRng::new(11);
        let xs: Vec<usize> = (0..500).map(|_| d.sample(&mut a)).collect();
        let ys: Vec<usize> = (0..500).map(|_| d.sample(&mut b)).collect();
        assert_eq!(xs, ys);
        assert_ne!(mix_seed(1, 0), mix_seed(1, 1));
    }
}
