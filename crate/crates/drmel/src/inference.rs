//! End-to-end inference wrapper: fit once, then query quantiles, densities,
//! and confidence intervals for any population, level, or difference.

use crate::asymptotics::CovarianceKernel;
use crate::basis::BasisSpec;
use crate::density::{
    ci_quantile, ci_quantile_diff, ci_quantile_em, kde_density_discrete, silverman_bandwidth,
    silverman_bandwidth_sample, Bandwidth, IntervalEstimate, KdeSpec,
};
use crate::error::{Error, Result};
use crate::estimation::{ecdf, em_quantile, FittedCdf, QuantileEstimate, QuantileMethod};
use crate::model::{fit_mele, DrmFit, SolverOptions};
use crate::sample::MultiSample;

/// Which observations feed the bandwidth behind the per-sample baseline's
/// density estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EmBandwidth {
    /// Rule of thumb on the single sample alone.
    #[default]
    OwnSample,
    /// Reuse the pooled-fit bandwidth of the same population.
    Pooled,
}

/// Observation count driving the n^{-1/5} rate in the pooled fit's
/// bandwidth rule. The fitted distribution of each population is built from
/// all n observations, but its effective information about population r is
/// closer to n_r; the rule leaves the choice open, so it is configurable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ElBandwidthRate {
    /// Total pooled observation count n; the fitted distribution is built
    /// from all n observations.
    #[default]
    PooledN,
    /// Per-population sample size n_r.
    OwnSampleN,
}

/// How the pooled quantile point estimate inverts the fitted CDF.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ElQuantileRule {
    /// Smallest support point whose cumulative mass reaches the level
    /// (the definition the theory is stated for).
    #[default]
    StepInf,
    /// Linear interpolation through the jump midpoints, mirroring the
    /// smoothing applied to the per-sample baseline quantile. With pooled
    /// jumps of size ~1/n the difference is negligible.
    Interpolated,
}

#[derive(Debug, Clone, Default)]
pub struct AnalysisOptions {
    pub solver: SolverOptions,
    pub kde: KdeSpec,
    pub em_bandwidth: EmBandwidth,
    pub el_bandwidth_rate: ElBandwidthRate,
    pub el_quantile_rule: ElQuantileRule,
}

/// A fitted model with everything derived from it, ready for queries.
pub struct Analysis {
    data: MultiSample,
    fit: DrmFit,
    cdf: FittedCdf,
    kernel: CovarianceKernel,
    /// Resolved KDE bandwidth per population for the pooled fit.
    bandwidth: Vec<f64>,
    /// Sorted copy of each sample for the per-sample baseline.
    sorted_samples: Vec<Vec<f64>>,
    /// Resolved bandwidth per population for the baseline KDE.
    em_bandwidth: Vec<f64>,
    kde: KdeSpec,
    el_quantile_rule: ElQuantileRule,
}

impl Analysis {
    pub fn new(data: MultiSample, basis: &BasisSpec, options: &AnalysisOptions) -> Result<Self> {
        let fit = fit_mele(&data, basis, &options.solver)?;
        let cdf = FittedCdf::from_fit(&fit, &data)?;
        let kernel = CovarianceKernel::plug_in(&fit, &data, basis)?;
        let m1 = data.n_populations();
        let bandwidth: Vec<f64> = (0..m1)
            .map(|r| match options.kde.bandwidth {
                Bandwidth::Fixed(b) if b > 0.0 => Ok(b),
                Bandwidth::Fixed(b) => {
                    Err(Error::Param(format!("bandwidth must be positive, got {b}")))
                }
                Bandwidth::Auto => match options.el_bandwidth_rate {
                    ElBandwidthRate::PooledN => silverman_bandwidth(&cdf, r),
                    ElBandwidthRate::OwnSampleN => crate::density::silverman_bandwidth_discrete(
                        cdf.support(),
                        cdf.masses(r),
                        data.size(r),
                    ),
                },
            })
            .collect::<Result<Vec<_>>>()?;
        let sorted_samples: Vec<Vec<f64>> = data
            .samples()
            .iter()
            .map(|s| {
                let mut v = s.clone();
                v.sort_by(|a, b| a.partial_cmp(b).unwrap());
                v
            })
            .collect();
        let em_bandwidth: Vec<f64> = match options.em_bandwidth {
            EmBandwidth::Pooled => bandwidth.clone(),
            EmBandwidth::OwnSample => sorted_samples
                .iter()
                .map(|s| silverman_bandwidth_sample(s))
                .collect::<Result<Vec<_>>>()?,
        };
        Ok(Analysis {
            data,
            fit,
            cdf,
            kernel,
            bandwidth,
            sorted_samples,
            em_bandwidth,
            kde: options.kde,
            el_quantile_rule: options.el_quantile_rule,
        })
    }

    pub fn data(&self) -> &MultiSample {
        &self.data
    }

    pub fn fit(&self) -> &DrmFit {
        &self.fit
    }

    pub fn cdf(&self) -> &FittedCdf {
        &self.cdf
    }

    pub fn kernel(&self) -> &CovarianceKernel {
        &self.kernel
    }

    pub fn bandwidths(&self) -> &[f64] {
        &self.bandwidth
    }

    pub fn el_cdf(&self, r: usize, x: f64) -> Result<f64> {
        self.cdf.el_cdf(r, x)
    }

    pub fn el_quantile(&self, r: usize, alpha: f64) -> Result<QuantileEstimate> {
        match self.el_quantile_rule {
            ElQuantileRule::StepInf => self.cdf.el_quantile(r, alpha),
            ElQuantileRule::Interpolated => self.cdf.el_quantile_interpolated(r, alpha),
        }
    }

    /// Pooled-fit density estimate of population r at x.
    pub fn el_density(&self, r: usize, x: f64) -> Result<f64> {
        if r >= self.data.n_populations() {
            return Err(Error::Index {
                index: r,
                len: self.data.n_populations(),
            });
        }
        Ok(kde_density_discrete(
            self.cdf.support(),
            self.cdf.masses(r),
            self.kde.kernel,
            self.bandwidth[r],
            x,
        ))
    }

    pub fn el_ci(&self, r: usize, alpha: f64, conf: f64) -> Result<IntervalEstimate> {
        let xi = self.el_quantile(r, alpha)?.value;
        let g = self.el_density(r, xi)?;
        if g <= 0.0 {
            return Err(Error::DensityZero);
        }
        ci_quantile(&self.kernel, self.data.total(), r, alpha, xi, g, conf)
    }

    pub fn el_diff_ci(
        &self,
        r: usize,
        alpha_r: f64,
        s: usize,
        alpha_s: f64,
        conf: f64,
    ) -> Result<IntervalEstimate> {
        let xi_r = self.el_quantile(r, alpha_r)?.value;
        let xi_s = self.el_quantile(s, alpha_s)?.value;
        let g_r = self.el_density(r, xi_r)?;
        let g_s = self.el_density(s, xi_s)?;
        if g_r <= 0.0 || g_s <= 0.0 {
            return Err(Error::DensityZero);
        }
        ci_quantile_diff(
            &self.kernel,
            self.data.total(),
            r,
            alpha_r,
            xi_r,
            g_r,
            s,
            alpha_s,
            xi_s,
            g_s,
            conf,
        )
    }

    pub fn em_cdf(&self, r: usize, x: f64) -> Result<f64> {
        self.check_pop(r)?;
        Ok(ecdf(&self.sorted_samples[r], x))
    }

    pub fn em_quantile(&self, r: usize, alpha: f64) -> Result<QuantileEstimate> {
        self.check_pop(r)?;
        Ok(QuantileEstimate {
            population: r,
            level: alpha,
            value: em_quantile(&self.sorted_samples[r], alpha)?,
            method: QuantileMethod::Em,
        })
    }

    /// Per-sample baseline density estimate of population r at x.
    pub fn em_density(&self, r: usize, x: f64) -> Result<f64> {
        self.check_pop(r)?;
        let s = &self.sorted_samples[r];
        let masses = vec![1.0 / s.len() as f64; s.len()];
        Ok(kde_density_discrete(
            s,
            &masses,
            self.kde.kernel,
            self.em_bandwidth[r],
            x,
        ))
    }

    pub fn em_ci(&self, r: usize, alpha: f64, conf: f64) -> Result<IntervalEstimate> {
        let xi = self.em_quantile(r, alpha)?.value;
        let g = self.em_density(r, xi)?;
        if g <= 0.0 {
            return Err(Error::DensityZero);
        }
        ci_quantile_em(self.data.size(r), r, alpha, xi, g, conf)
    }

    /// Baseline interval for a quantile difference; the two samples are
    /// independent so the variances add.
    pub fn em_diff_ci(
        &self,
        r: usize,
        alpha_r: f64,
        s: usize,
        alpha_s: f64,
        conf: f64,
    ) -> Result<IntervalEstimate> {
        if r == s && alpha_r == alpha_s {
            return Err(Error::SameTarget);
        }
        let a = self.em_ci(r, alpha_r, conf)?;
        let b = self.em_ci(s, alpha_s, conf)?;
        let variance = a.variance + b.variance;
        let point = a.point - b.point;
        let z = crate::density::normal_quantile(1.0 - (1.0 - conf) / 2.0)?;
        let half = z * variance.sqrt();
        Ok(IntervalEstimate {
            target: crate::density::CiTarget::QuantileDiff {
                population_r: r,
                level_r: alpha_r,
                population_s: s,
                level_s: alpha_s,
            },
            point,
            variance,
            lo: point - half,
            hi: point + half,
            conf_level: conf,
        })
    }

    fn check_pop(&self, r: usize) -> Result<()> {
        if r >= self.data.n_populations() {
            return Err(Error::Index {
                index: r,
                len: self.data.n_populations(),
            });
        }
        Ok(())
    }
}
