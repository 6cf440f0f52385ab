//! Kernel density estimation on fitted distributions, rule-of-thumb
//! bandwidths, and Wald confidence intervals for quantiles and quantile
//! differences.

use crate::asymptotics::CovarianceKernel;
use crate::error::{Error, Result};
use crate::estimation::FittedCdf;

/// Smoothing kernels; all symmetric with unit mass and finite second moment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Kernel {
    #[default]
    Gaussian,
}

impl Kernel {
    fn eval(self, u: f64) -> f64 {
        match self {
            Kernel::Gaussian => (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt(),
        }
    }
}

/// Bandwidth selection: fixed, or the rule of thumb resolved per population.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    Auto,
    Fixed(f64),
}

/// Kernel density estimator configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KdeSpec {
    pub kernel: Kernel,
    pub bandwidth: Bandwidth,
}

impl Default for KdeSpec {
    fn default() -> Self {
        KdeSpec {
            kernel: Kernel::Gaussian,
            bandwidth: Bandwidth::Auto,
        }
    }
}

/// Rule-of-thumb bandwidth on an arbitrary discrete distribution:
/// b = 1.06 n^{-1/5} min(sd, iqr / 1.34), treating the distribution as
/// nonrandom. `n` sets the rate and is the observation count behind it.
pub fn silverman_bandwidth_discrete(support: &[f64], masses: &[f64], n: usize) -> Result<f64> {
    assert_eq!(support.len(), masses.len());
    let total: f64 = masses.iter().sum();
    if support.len() < 2 || total <= 0.0 || n == 0 {
        return Err(Error::DegenerateDistribution);
    }
    let mean: f64 = support
        .iter()
        .zip(masses)
        .map(|(x, w)| x * w)
        .sum::<f64>()
        / total;
    let var: f64 = support
        .iter()
        .zip(masses)
        .map(|(x, w)| w * (x - mean) * (x - mean))
        .sum::<f64>()
        / total;
    let sd = var.max(0.0).sqrt();
    if sd <= 0.0 {
        return Err(Error::DegenerateDistribution);
    }
    // quartiles by inf-style inversion of the cumulative masses
    let mut acc = 0.0;
    let mut q25 = None;
    let mut q75 = None;
    for (&x, &w) in support.iter().zip(masses) {
        acc += w;
        if q25.is_none() && acc >= 0.25 * total {
            q25 = Some(x);
        }
        if q75.is_none() && acc >= 0.75 * total {
            q75 = Some(x);
            break;
        }
    }
    let iqr = q75.unwrap_or(*support.last().unwrap()) - q25.unwrap_or(support[0]);
    let spread = sd.min(iqr / 1.34);
    if spread <= 0.0 {
        return Err(Error::DegenerateDistribution);
    }
    Ok(1.06 * (n as f64).powf(-0.2) * spread)
}

/// Rule-of-thumb bandwidth for the fitted distribution of population r,
/// with the rate set by the total pooled observation count behind the fit.
pub fn silverman_bandwidth(cdf: &FittedCdf, r: usize) -> Result<f64> {
    if r >= cdf.n_populations() {
        return Err(Error::Index {
            index: r,
            len: cdf.n_populations(),
        });
    }
    silverman_bandwidth_discrete(cdf.support(), cdf.masses(r), cdf.n())
}

/// Rule-of-thumb bandwidth for a single raw sample (each point mass 1/n).
pub fn silverman_bandwidth_sample(sample: &[f64]) -> Result<f64> {
    let mut sorted = sample.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let masses = vec![1.0 / sorted.len() as f64; sorted.len()];
    silverman_bandwidth_discrete(&sorted, &masses, sorted.len())
}

/// Kernel density value at x for a discrete distribution smoothed with
/// bandwidth b.
pub fn kde_density_discrete(
    support: &[f64],
    masses: &[f64],
    kernel: Kernel,
    bandwidth: f64,
    x: f64,
) -> f64 {
    support
        .iter()
        .zip(masses)
        .map(|(&y, &w)| w * kernel.eval((x - y) / bandwidth) / bandwidth)
        .sum()
}

/// Kernel density estimate of population r's density at x, smoothing the
/// fitted distribution.
pub fn kde_density(cdf: &FittedCdf, r: usize, spec: &KdeSpec, x: f64) -> Result<f64> {
    if r >= cdf.n_populations() {
        return Err(Error::Index {
            index: r,
            len: cdf.n_populations(),
        });
    }
    let b = match spec.bandwidth {
        Bandwidth::Fixed(b) if b > 0.0 => b,
        Bandwidth::Fixed(b) => {
            return Err(Error::Param(format!("bandwidth must be positive, got {b}")))
        }
        Bandwidth::Auto => silverman_bandwidth(cdf, r)?,
    };
    Ok(kde_density_discrete(
        cdf.support(),
        cdf.masses(r),
        spec.kernel,
        b,
        x,
    ))
}

/// Variance estimate of a pooled quantile estimator (of the estimator
/// itself, not its root-n scaling):
/// v = omega_rr(xi, xi) / (n g^2), with the level supplying the CDF values.
pub fn quantile_variance(
    kernel: &CovarianceKernel,
    n: usize,
    r: usize,
    alpha: f64,
    xi_hat: f64,
    g_hat: f64,
) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Level { value: alpha });
    }
    if g_hat <= 0.0 {
        return Err(Error::DensityZero);
    }
    let omega = kernel.omega(r, r, xi_hat, xi_hat, alpha, alpha)?;
    Ok(omega.max(0.0) / (n as f64 * g_hat * g_hat))
}

/// What an interval estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CiTarget {
    Quantile {
        population: usize,
        level: f64,
    },
    QuantileDiff {
        population_r: usize,
        level_r: f64,
        population_s: usize,
        level_s: f64,
    },
}

/// A symmetric Wald interval around a point estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalEstimate {
    pub target: CiTarget,
    pub point: f64,
    /// Variance of the point estimate itself.
    pub variance: f64,
    pub lo: f64,
    pub hi: f64,
    pub conf_level: f64,
}

impl IntervalEstimate {
    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn covers(&self, value: f64) -> bool {
        self.lo <= value && value <= self.hi
    }
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Level { value: p });
    }
    use statrs::distribution::{ContinuousCDF, Normal};
    Ok(Normal::standard().inverse_cdf(p))
}

fn z_for(conf: f64) -> Result<f64> {
    if !(conf > 0.0 && conf < 1.0) {
        return Err(Error::Level { value: conf });
    }
    normal_quantile(1.0 - (1.0 - conf) / 2.0)
}

/// Wald interval for one pooled quantile.
pub fn ci_quantile(
    kernel: &CovarianceKernel,
    n: usize,
    r: usize,
    alpha: f64,
    xi_hat: f64,
    g_hat: f64,
    conf: f64,
) -> Result<IntervalEstimate> {
    let z = z_for(conf)?;
    let variance = quantile_variance(kernel, n, r, alpha, xi_hat, g_hat)?;
    let half = z * variance.sqrt();
    Ok(IntervalEstimate {
        target: CiTarget::Quantile {
            population: r,
            level: alpha,
        },
        point: xi_hat,
        variance,
        lo: xi_hat - half,
        hi: xi_hat + half,
        conf_level: conf,
    })
}

/// Wald interval for a difference of pooled quantiles, including the
/// cross-covariance induced by pooling.
#[allow(clippy::too_many_arguments)]
pub fn ci_quantile_diff(
    kernel: &CovarianceKernel,
    n: usize,
    r: usize,
    alpha_r: f64,
    xi_r: f64,
    g_r: f64,
    s: usize,
    alpha_s: f64,
    xi_s: f64,
    g_s: f64,
    conf: f64,
) -> Result<IntervalEstimate> {
    if r == s && alpha_r == alpha_s {
        return Err(Error::SameTarget);
    }
    let z = z_for(conf)?;
    let v_r = quantile_variance(kernel, n, r, alpha_r, xi_r, g_r)?;
    let v_s = quantile_variance(kernel, n, s, alpha_s, xi_s, g_s)?;
    let omega_rs = kernel.omega(r, s, xi_r, xi_s, alpha_r, alpha_s)?;
    let cov = omega_rs / (n as f64 * g_r * g_s);
    let variance = (v_r + v_s - 2.0 * cov).max(0.0);
    let point = xi_r - xi_s;
    let half = z * variance.sqrt();
    Ok(IntervalEstimate {
        target: CiTarget::QuantileDiff {
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

/// Wald interval for a per-sample empirical quantile, with variance
/// alpha (1 - alpha) / (n_r g^2) from its own sample.
pub fn ci_quantile_em(
    n_r: usize,
    r: usize,
    alpha: f64,
    xi_breve: f64,
    g_breve: f64,
    conf: f64,
) -> Result<IntervalEstimate> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Level { value: alpha });
    }
    if g_breve <= 0.0 {
        return Err(Error::DensityZero);
    }
    let z = z_for(conf)?;
    let variance = alpha * (1.0 - alpha) / (n_r as f64 * g_breve * g_breve);
    let half = z * variance.sqrt();
    Ok(IntervalEstimate {
        target: CiTarget::Quantile {
            population: r,
            level: alpha,
        },
        point: xi_breve,
        variance,
        lo: xi_breve - half,
        hi: xi_breve + half,
        conf_level: conf,
    })
}
