//! Parametric population families used by the simulation studies, with
//! exact CDF/density/quantile evaluation and samplers.

use crate::basis::BasisSpec;
use crate::error::{Error, Result};
use crate::model::ThetaMatrix;
use crate::samplers;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF};

/// One population: family plus parameters.
///
/// Gamma and Weibull take (shape, scale); the normal takes (mean, variance).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum PopulationSpec {
    Gamma { shape: f64, scale: f64 },
    Normal { mean: f64, variance: f64 },
    Weibull { shape: f64, scale: f64 },
}

impl PopulationSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            PopulationSpec::Gamma { shape, scale } => shape > 0.0 && scale > 0.0,
            PopulationSpec::Normal { mean, variance } => mean.is_finite() && variance > 0.0,
            PopulationSpec::Weibull { shape, scale } => shape > 0.0 && scale > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Param(format!("invalid population parameters: {self:?}")))
        }
    }

    pub fn label(&self) -> String {
        match *self {
            PopulationSpec::Gamma { shape, scale } => format!("Gamma({shape}, {scale})"),
            PopulationSpec::Normal { mean, variance } => format!("Normal({mean}, {variance})"),
            PopulationSpec::Weibull { shape, scale } => format!("Weibull({shape}, {scale})"),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            PopulationSpec::Gamma { shape, scale } => shape * scale,
            PopulationSpec::Normal { mean, .. } => mean,
            PopulationSpec::Weibull { shape, scale } => {
                scale * statrs::function::gamma::gamma(1.0 + 1.0 / shape)
            }
        }
    }

    pub fn sd(&self) -> f64 {
        match *self {
            PopulationSpec::Gamma { shape, scale } => shape.sqrt() * scale,
            PopulationSpec::Normal { variance, .. } => variance.sqrt(),
            PopulationSpec::Weibull { shape, scale } => {
                let g1 = statrs::function::gamma::gamma(1.0 + 1.0 / shape);
                let g2 = statrs::function::gamma::gamma(1.0 + 2.0 / shape);
                scale * (g2 - g1 * g1).max(0.0).sqrt()
            }
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            PopulationSpec::Gamma { shape, scale } => {
                if x <= 0.0 {
                    0.0
                } else {
                    statrs::distribution::Gamma::new(shape, 1.0 / scale)
                        .unwrap()
                        .pdf(x)
                }
            }
            PopulationSpec::Normal { mean, variance } => {
                statrs::distribution::Normal::new(mean, variance.sqrt())
                    .unwrap()
                    .pdf(x)
            }
            PopulationSpec::Weibull { shape, scale } => {
                if x < 0.0 {
                    0.0
                } else {
                    statrs::distribution::Weibull::new(shape, scale)
                        .unwrap()
                        .pdf(x)
                }
            }
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        match *self {
            PopulationSpec::Gamma { shape, scale } => {
                statrs::distribution::Gamma::new(shape, 1.0 / scale)
                    .unwrap()
                    .ln_pdf(x)
            }
            PopulationSpec::Normal { mean, variance } => {
                statrs::distribution::Normal::new(mean, variance.sqrt())
                    .unwrap()
                    .ln_pdf(x)
            }
            PopulationSpec::Weibull { shape, scale } => {
                statrs::distribution::Weibull::new(shape, scale)
                    .unwrap()
                    .ln_pdf(x)
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            PopulationSpec::Gamma { shape, scale } => {
                if x <= 0.0 {
                    0.0
                } else {
                    statrs::distribution::Gamma::new(shape, 1.0 / scale)
                        .unwrap()
                        .cdf(x)
                }
            }
            PopulationSpec::Normal { mean, variance } => {
                statrs::distribution::Normal::new(mean, variance.sqrt())
                    .unwrap()
                    .cdf(x)
            }
            PopulationSpec::Weibull { shape, scale } => {
                if x < 0.0 {
                    0.0
                } else {
                    statrs::distribution::Weibull::new(shape, scale)
                        .unwrap()
                        .cdf(x)
                }
            }
        }
    }

    /// Whether values below zero are impossible under this family.
    fn nonnegative_support(&self) -> bool {
        !matches!(self, PopulationSpec::Normal { .. })
    }

    /// True quantile by monotone bisection on the family CDF to 1e-10.
    pub fn true_quantile(&self, alpha: f64) -> Result<f64> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Level { value: alpha });
        }
        self.validate()?;
        let (mean, sd) = (self.mean(), self.sd());
        let mut lo = if self.nonnegative_support() {
            0.0
        } else {
            mean - 8.0 * sd
        };
        let mut hi = mean + 8.0 * sd;
        let mut guard = 0;
        while self.cdf(lo) >= alpha && guard < 200 {
            lo -= 8.0 * sd;
            guard += 1;
        }
        while self.cdf(hi) < alpha && guard < 400 {
            hi += 8.0 * sd;
            guard += 1;
        }
        for _ in 0..200 {
            if hi - lo <= 1e-10 {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) >= alpha {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Draw n i.i.d. values; deterministic under a fixed-seed generator.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<f64>> {
        self.validate()?;
        if n == 0 {
            return Err(Error::Param("sample size must be positive".into()));
        }
        let out = match *self {
            PopulationSpec::Gamma { shape, scale } => {
                (0..n).map(|_| samplers::gamma(rng, shape, scale)).collect()
            }
            PopulationSpec::Normal { mean, variance } => {
                let sd = variance.sqrt();
                (0..n).map(|_| samplers::normal(rng, mean, sd)).collect()
            }
            PopulationSpec::Weibull { shape, scale } => (0..n)
                .map(|_| samplers::weibull(rng, shape, scale))
                .collect(),
        };
        Ok(out)
    }
}

/// Recover the model parameters tying `pops` together when their log density
/// ratios are exactly linear in the basis; `None` when the design does not
/// satisfy the model for this basis.
///
/// Solves a least-squares fit of each log ratio on the basis at probe points
/// and accepts only if the fit is exact to 1e-6 at all probes.
pub fn drm_theta_star(pops: &[PopulationSpec], basis: &BasisSpec) -> Result<Option<ThetaMatrix>> {
    if pops.len() < 2 {
        return Err(Error::Param("need at least two populations".into()));
    }
    for p in pops {
        p.validate()?;
    }
    let d = basis.dim();
    let n_probe = (4 * d).max(16);
    let baseline = &pops[0];
    let probes: Vec<f64> = (1..=n_probe)
        .map(|i| baseline.true_quantile(i as f64 / (n_probe + 1) as f64))
        .collect::<Result<Vec<_>>>()?;

    let mut design = nalgebra::DMatrix::zeros(n_probe, d);
    for (i, &x) in probes.iter().enumerate() {
        let q = match basis.eval(x) {
            Ok(q) => q,
            Err(_) => return Ok(None), // probe outside the basis domain
        };
        for j in 0..d {
            design[(i, j)] = q[j];
        }
    }
    let svd = design.clone().svd(true, true);

    let mut rows = Vec::with_capacity(pops.len() - 1);
    for pop in &pops[1..] {
        let y = nalgebra::DVector::from_fn(n_probe, |i, _| {
            pop.ln_pdf(probes[i]) - baseline.ln_pdf(probes[i])
        });
        if y.iter().any(|v| !v.is_finite()) {
            return Ok(None);
        }
        let theta = match svd.solve(&y, 1e-12) {
            Ok(t) => t,
            Err(_) => return Ok(None),
        };
        let residual = (&design * &theta - &y).amax();
        if residual > 1e-6 * (1.0 + y.amax()) {
            return Ok(None);
        }
        rows.push(theta.iter().cloned().collect::<Vec<f64>>());
    }
    Ok(Some(ThetaMatrix::from_rows(&rows)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gamma_quantiles_match_reference_values() {
        let g = PopulationSpec::Gamma {
            shape: 6.0,
            scale: 1.5,
        };
        assert_abs_diff_eq!(g.true_quantile(0.05).unwrap(), 3.92, epsilon = 5e-3);
        assert_abs_diff_eq!(g.true_quantile(0.50).unwrap(), 8.51, epsilon = 5e-3);
    }

    #[test]
    fn weibull_quantile_matches_closed_form() {
        let w = PopulationSpec::Weibull {
            shape: 10.0,
            scale: 4.5,
        };
        let expected = 4.5 * (-(0.05f64).ln()).powf(0.1);
        assert_abs_diff_eq!(w.true_quantile(0.95).unwrap(), expected, epsilon = 1e-8);
        assert_abs_diff_eq!(w.true_quantile(0.95).unwrap(), 5.022, epsilon = 5e-3);
    }

    #[test]
    fn quantile_inverts_cdf_on_a_grid() {
        let pops = [
            PopulationSpec::Gamma {
                shape: 6.0,
                scale: 1.5,
            },
            PopulationSpec::Normal {
                mean: 18.0,
                variance: 4.0,
            },
            PopulationSpec::Weibull {
                shape: 10.0,
                scale: 4.5,
            },
        ];
        for pop in &pops {
            for i in 1..20 {
                let alpha = i as f64 / 20.0;
                let x = pop.true_quantile(alpha).unwrap();
                assert_abs_diff_eq!(pop.cdf(x), alpha, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn rejects_invalid_parameters_and_levels() {
        let bad = PopulationSpec::Gamma {
            shape: -1.0,
            scale: 1.0,
        };
        assert!(matches!(bad.validate(), Err(Error::Param(_))));
        let ok = PopulationSpec::Normal {
            mean: 0.0,
            variance: 1.0,
        };
        assert!(matches!(
            ok.true_quantile(1.2),
            Err(Error::Level { .. })
        ));
    }

    #[test]
    fn sample_means_within_clt_bounds() {
        let n = 1_000_000;
        let normal = PopulationSpec::Normal {
            mean: 18.0,
            variance: 4.0,
        };
        let draws = normal
            .sample(n, &mut ChaCha8Rng::seed_from_u64(21))
            .unwrap();
        let mean = draws.iter().sum::<f64>() / n as f64;
        assert!((mean - 18.0).abs() < 0.02, "normal mean {mean}");

        let gamma = PopulationSpec::Gamma {
            shape: 6.0,
            scale: 1.5,
        };
        let draws = gamma
            .sample(n, &mut ChaCha8Rng::seed_from_u64(22))
            .unwrap();
        let mean = draws.iter().sum::<f64>() / n as f64;
        assert!((mean - 9.0).abs() < 0.02, "gamma mean {mean}");
    }

    #[test]
    fn sampling_is_deterministic_under_seed() {
        let pop = PopulationSpec::Gamma {
            shape: 6.0,
            scale: 1.5,
        };
        let a = pop
            .sample(50, &mut ChaCha8Rng::seed_from_u64(9))
            .unwrap();
        let b = pop
            .sample(50, &mut ChaCha8Rng::seed_from_u64(9))
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn theta_star_recovers_normal_log_ratio() {
        let pops = [
            PopulationSpec::Normal {
                mean: 0.0,
                variance: 1.0,
            },
            PopulationSpec::Normal {
                mean: 1.0,
                variance: 1.0,
            },
        ];
        let theta = drm_theta_star(&pops, &BasisSpec::quadratic())
            .unwrap()
            .expect("normals are compatible with the quadratic basis");
        assert_abs_diff_eq!(theta.get(0, 0), -0.5, epsilon = 1e-8);
        assert_abs_diff_eq!(theta.get(0, 1), 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(theta.get(0, 2), 0.0, epsilon = 1e-8);
    }

    #[test]
    fn theta_star_recovers_gamma_log_ratio() {
        let pops = [
            PopulationSpec::Gamma {
                shape: 6.0,
                scale: 1.5,
            },
            PopulationSpec::Gamma {
                shape: 7.0,
                scale: 1.3,
            },
        ];
        let theta = drm_theta_star(&pops, &BasisSpec::log_linear())
            .unwrap()
            .expect("gammas are compatible with the log-linear basis");
        // coefficients: on x, 1/scale_0 - 1/scale_1; on log x, shape_1 - shape_0
        assert_abs_diff_eq!(theta.get(0, 1), 1.0 / 1.5 - 1.0 / 1.3, epsilon = 1e-7);
        assert_abs_diff_eq!(theta.get(0, 2), 1.0, epsilon = 1e-7);
    }

    #[test]
    fn theta_star_rejects_incompatible_designs() {
        let pops = [
            PopulationSpec::Gamma {
                shape: 16.0,
                scale: 0.6,
            },
            PopulationSpec::Weibull {
                shape: 10.0,
                scale: 4.5,
            },
        ];
        let theta = drm_theta_star(&pops, &BasisSpec::robust_default()).unwrap();
        assert!(theta.is_none());
    }
}
