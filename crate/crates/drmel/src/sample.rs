//! Container for the m+1 independent samples consumed by every estimator.

use crate::error::{Error, Result};

/// The pooled data: samples indexed k = 0..=m, with sample 0 the baseline.
///
/// Order within a sample is irrelevant to all downstream results.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiSample {
    samples: Vec<Vec<f64>>,
    n_k: Vec<usize>,
    n: usize,
    rho: Vec<f64>,
}

impl MultiSample {
    /// Validate and wrap raw samples. Requires at least two samples, every
    /// sample nonempty, and all values finite.
    pub fn new(samples: Vec<Vec<f64>>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidData(format!(
                "need at least two samples (baseline plus one), got {}",
                samples.len()
            )));
        }
        for (k, s) in samples.iter().enumerate() {
            if s.is_empty() {
                return Err(Error::InvalidData(format!("sample {k} is empty")));
            }
            if let Some(bad) = s.iter().find(|v| !v.is_finite()) {
                return Err(Error::InvalidData(format!(
                    "sample {k} contains non-finite value {bad}"
                )));
            }
        }
        let n_k: Vec<usize> = samples.iter().map(Vec::len).collect();
        let n: usize = n_k.iter().sum();
        let rho: Vec<f64> = n_k.iter().map(|&nk| nk as f64 / n as f64).collect();
        Ok(MultiSample {
            samples,
            n_k,
            n,
            rho,
        })
    }

    /// Number of non-baseline populations (m).
    pub fn m(&self) -> usize {
        self.samples.len() - 1
    }

    /// Number of populations (m + 1).
    pub fn n_populations(&self) -> usize {
        self.samples.len()
    }

    pub fn sample(&self, k: usize) -> &[f64] {
        &self.samples[k]
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn size(&self, k: usize) -> usize {
        self.n_k[k]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.n_k
    }

    /// Total observation count n.
    pub fn total(&self) -> usize {
        self.n
    }

    /// Sample fraction rho_k = n_k / n.
    pub fn fraction(&self, k: usize) -> f64 {
        self.rho[k]
    }

    pub fn fractions(&self) -> &[f64] {
        &self.rho
    }

    /// Iterate over the pooled observations as (sample index, value), in
    /// sample-major order. This is the canonical flattening used by the fit.
    pub fn iter_pooled(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.samples
            .iter()
            .enumerate()
            .flat_map(|(k, s)| s.iter().map(move |&x| (k, x)))
    }
}
