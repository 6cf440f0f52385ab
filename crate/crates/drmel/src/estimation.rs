//! Fitted distribution functions and quantiles.
//!
//! The fitted distribution of population r places mass h_r(x_i)/n_r on every
//! pooled observation, so each population's estimate borrows strength from
//! all samples. Quantiles invert the step function with inf semantics. The
//! per-sample empirical quantile used as a baseline applies the level shift
//! i/n - 1/(2n) and linear interpolation.

use crate::error::{Error, Result};
use crate::model::DrmFit;
use crate::sample::MultiSample;

/// Which estimator produced a quantile.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuantileMethod {
    /// Pooled empirical-likelihood estimate.
    El,
    /// Per-sample empirical estimate.
    Em,
}

/// A point estimate of one population quantile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantileEstimate {
    pub population: usize,
    pub level: f64,
    pub value: f64,
    pub method: QuantileMethod,
}

/// Step-function CDFs fitted for all populations at once.
#[derive(Debug, Clone)]
pub struct FittedCdf {
    /// Sorted distinct pooled observation values.
    support: Vec<f64>,
    /// mass[r][g]: mass of population r at support point g.
    mass: Vec<Vec<f64>>,
    /// Running sums of `mass`.
    cum: Vec<Vec<f64>>,
    n: usize,
    n_k: Vec<usize>,
}

impl FittedCdf {
    /// Build the fitted CDFs from a fit and the data it was produced from.
    pub fn from_fit(fit: &DrmFit, data: &MultiSample) -> Result<Self> {
        if fit.n() != data.total() || fit.n_populations() != data.n_populations() {
            return Err(Error::InvalidData(
                "fit and data describe different samples".into(),
            ));
        }
        let n = data.total();
        let m1 = data.n_populations();
        let values: Vec<f64> = data.iter_pooled().map(|(_, x)| x).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());

        let hk = fit.hk_values();
        let mut support = Vec::new();
        let mut mass: Vec<Vec<f64>> = vec![Vec::new(); m1];
        for &i in &order {
            let x = values[i];
            if support.last() != Some(&x) {
                support.push(x);
                for row in mass.iter_mut() {
                    row.push(0.0);
                }
            }
            let g = support.len() - 1;
            for (r, row) in mass.iter_mut().enumerate() {
                row[g] += hk[(r, i)] / data.size(r) as f64;
            }
        }
        let cum = mass
            .iter()
            .map(|row| {
                let mut acc = 0.0;
                row.iter()
                    .map(|&v| {
                        acc += v;
                        acc
                    })
                    .collect()
            })
            .collect();
        Ok(FittedCdf {
            support,
            mass,
            cum,
            n,
            n_k: data.sizes().to_vec(),
        })
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    /// Total pooled observation count.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_populations(&self) -> usize {
        self.mass.len()
    }

    pub fn size(&self, r: usize) -> usize {
        self.n_k[r]
    }

    /// Point masses of population r along the support.
    pub fn masses(&self, r: usize) -> &[f64] {
        &self.mass[r]
    }

    /// Total fitted mass of population r; equals 1 at the MELE.
    pub fn total_mass(&self, r: usize) -> f64 {
        *self.cum[r].last().unwrap()
    }

    fn check_pop(&self, r: usize) -> Result<()> {
        if r >= self.n_populations() {
            return Err(Error::Index {
                index: r,
                len: self.n_populations(),
            });
        }
        Ok(())
    }

    /// Right-continuous fitted CDF of population r at x.
    pub fn el_cdf(&self, r: usize, x: f64) -> Result<f64> {
        self.check_pop(r)?;
        let idx = self.support.partition_point(|&v| v <= x);
        Ok(if idx == 0 { 0.0 } else { self.cum[r][idx - 1] })
    }

    /// Pooled-information quantile: the smallest support point whose
    /// cumulative mass for population r reaches alpha.
    pub fn el_quantile(&self, r: usize, alpha: f64) -> Result<QuantileEstimate> {
        self.check_pop(r)?;
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Level { value: alpha });
        }
        let row = &self.cum[r];
        let idx = row.partition_point(|&c| c < alpha).min(row.len() - 1);
        Ok(QuantileEstimate {
            population: r,
            level: alpha,
            value: self.support[idx],
            method: QuantileMethod::El,
        })
    }

    /// Smoothed pooled quantile: linear interpolation through the jump
    /// midpoints (x_i, cum_i - mass_i/2), clamped to the extreme support
    /// points. With uniform masses 1/n this reduces to the same level-shift
    /// construction as [`em_quantile`].
    pub fn el_quantile_interpolated(&self, r: usize, alpha: f64) -> Result<QuantileEstimate> {
        self.check_pop(r)?;
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Level { value: alpha });
        }
        let cum = &self.cum[r];
        let mass = &self.mass[r];
        let level = |i: usize| cum[i] - 0.5 * mass[i];
        let last = cum.len() - 1;
        let value = if alpha <= level(0) {
            self.support[0]
        } else if alpha >= level(last) {
            self.support[last]
        } else {
            // smallest j with level(j) >= alpha; j >= 1 here
            let (mut lo, mut hi) = (0usize, last);
            while lo < hi {
                let mid = (lo + hi) / 2;
                if level(mid) < alpha {
                    lo = mid + 1;
                } else {
                    hi = mid;
                }
            }
            let j = lo;
            let (l0, l1) = (level(j - 1), level(j));
            let (x0, x1) = (self.support[j - 1], self.support[j]);
            if l1 > l0 {
                x0 + (alpha - l0) / (l1 - l0) * (x1 - x0)
            } else {
                x1
            }
        };
        Ok(QuantileEstimate {
            population: r,
            level: alpha,
            value,
            method: QuantileMethod::El,
        })
    }

    /// Weighted standard deviation of the fitted distribution of r.
    pub fn weighted_sd(&self, r: usize) -> f64 {
        let total = self.total_mass(r);
        let mean: f64 = self
            .support
            .iter()
            .zip(&self.mass[r])
            .map(|(x, w)| x * w)
            .sum::<f64>()
            / total;
        let var: f64 = self
            .support
            .iter()
            .zip(&self.mass[r])
            .map(|(x, w)| w * (x - mean) * (x - mean))
            .sum::<f64>()
            / total;
        var.max(0.0).sqrt()
    }

    /// Interquartile range of the fitted distribution of r, by the same
    /// inf-style inversion as [`FittedCdf::el_quantile`].
    pub fn interquartile_range(&self, r: usize) -> f64 {
        let q25 = self.el_quantile(r, 0.25).map(|q| q.value).unwrap_or(0.0);
        let q75 = self.el_quantile(r, 0.75).map(|q| q.value).unwrap_or(0.0);
        q75 - q25
    }
}

/// Empirical CDF of one sample at x.
pub fn ecdf(sample: &[f64], x: f64) -> f64 {
    let count = sample.iter().filter(|&&v| v <= x).count();
    count as f64 / sample.len() as f64
}

/// Per-sample empirical quantile with the level shift i/n - 1/(2n) and
/// linear interpolation between order statistics; clamped to the extreme
/// order statistics outside the shifted-level range. Tied values are merged
/// and the interpolation runs across the merged levels, which places each
/// distinct value at the midpoint of its block of the shifted CDF.
pub fn em_quantile(sample: &[f64], alpha: f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::InvalidData("empty sample".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Level { value: alpha });
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    // merge ties: (value, shifted level at the block midpoint)
    let mut points: Vec<(f64, f64)> = Vec::new();
    let mut seen = 0usize;
    let mut i = 0;
    while i < sorted.len() {
        let value = sorted[i];
        let mut count = 0;
        while i < sorted.len() && sorted[i] == value {
            count += 1;
            i += 1;
        }
        seen += count;
        points.push((value, (seen as f64 - 0.5 * count as f64) / n));
    }
    if alpha <= points[0].1 {
        return Ok(points[0].0);
    }
    if alpha >= points.last().unwrap().1 {
        return Ok(points.last().unwrap().0);
    }
    let j = points.partition_point(|&(_, l)| l < alpha);
    let ((x0, l0), (x1, l1)) = (points[j - 1], points[j]);
    Ok(x0 + (alpha - l0) / (l1 - l0) * (x1 - x0))
}
