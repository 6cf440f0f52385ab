//! Replicated-experiment engine: draws samples from configured populations,
//! fits the model each replicate, and aggregates distribution, quantile, and
//! interval metrics for the pooled estimators against per-sample baselines.
//!
//! Replicates run in parallel; each derives its own counter-based stream
//! from the experiment seed, so results are bit-identical regardless of the
//! thread schedule.

use crate::asymptotics::CovarianceKernel;
use crate::basis::BasisSpec;
use crate::error::{Error, Result};
use crate::fmt::sig6;
use crate::inference::{Analysis, AnalysisOptions, EmBandwidth};
use crate::model::ThetaMatrix;
use crate::populations::{drm_theta_star, PopulationSpec};
use crate::quadrature::{QuadratureGrid, DEFAULT_NODES};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Quantile levels used throughout the study tables.
pub const STUDY_LEVELS: [f64; 5] = [0.05, 0.10, 0.50, 0.90, 0.95];

/// Scale for reported variance and mse entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum VarianceScale {
    /// Variances of the root-n-scaled estimators (table convention).
    #[default]
    SqrtN,
    /// Variances of the estimators themselves.
    Raw,
}

/// Full description of one replicated experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub populations: Vec<PopulationSpec>,
    pub basis: BasisSpec,
    pub n_per_sample: usize,
    pub reps: usize,
    pub levels: Vec<f64>,
    pub seed: u64,
    pub conf_level: f64,
    #[serde(default)]
    pub variance_scale: VarianceScale,
    /// Report CDF bias relative to sqrt(alpha (1 - alpha)); raw bias otherwise.
    #[serde(default = "default_true")]
    pub scale_cdf_bias: bool,
    #[serde(default)]
    pub em_bandwidth: EmBandwidthChoice,
    #[serde(default)]
    pub el_bandwidth_rate: ElBandwidthRateChoice,
    #[serde(default)]
    pub el_quantile_rule: ElQuantileRuleChoice,
}

fn default_true() -> bool {
    true
}

/// Serializable mirror of [`EmBandwidth`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EmBandwidthChoice {
    #[default]
    OwnSample,
    Pooled,
}

impl From<EmBandwidthChoice> for EmBandwidth {
    fn from(c: EmBandwidthChoice) -> Self {
        match c {
            EmBandwidthChoice::OwnSample => EmBandwidth::OwnSample,
            EmBandwidthChoice::Pooled => EmBandwidth::Pooled,
        }
    }
}

/// Serializable mirror of [`crate::inference::ElBandwidthRate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ElBandwidthRateChoice {
    #[default]
    PooledN,
    OwnSampleN,
}

impl From<ElBandwidthRateChoice> for crate::inference::ElBandwidthRate {
    fn from(c: ElBandwidthRateChoice) -> Self {
        match c {
            ElBandwidthRateChoice::OwnSampleN => crate::inference::ElBandwidthRate::OwnSampleN,
            ElBandwidthRateChoice::PooledN => crate::inference::ElBandwidthRate::PooledN,
        }
    }
}

/// Serializable mirror of [`crate::inference::ElQuantileRule`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ElQuantileRuleChoice {
    #[default]
    StepInf,
    Interpolated,
}

impl From<ElQuantileRuleChoice> for crate::inference::ElQuantileRule {
    fn from(c: ElQuantileRuleChoice) -> Self {
        match c {
            ElQuantileRuleChoice::StepInf => crate::inference::ElQuantileRule::StepInf,
            ElQuantileRuleChoice::Interpolated => crate::inference::ElQuantileRule::Interpolated,
        }
    }
}

impl ExperimentConfig {
    pub fn new(
        populations: Vec<PopulationSpec>,
        basis: BasisSpec,
        n_per_sample: usize,
        reps: usize,
        seed: u64,
    ) -> Self {
        ExperimentConfig {
            populations,
            basis,
            n_per_sample,
            reps,
            levels: STUDY_LEVELS.to_vec(),
            seed,
            conf_level: 0.95,
            variance_scale: VarianceScale::SqrtN,
            scale_cdf_bias: true,
            em_bandwidth: EmBandwidthChoice::OwnSample,
            el_bandwidth_rate: ElBandwidthRateChoice::PooledN,
            el_quantile_rule: ElQuantileRuleChoice::StepInf,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.populations.len() < 2 {
            return Err(Error::Param("need at least two populations".into()));
        }
        for p in &self.populations {
            p.validate()?;
        }
        if self.n_per_sample == 0 {
            return Err(Error::Param("n_per_sample must be positive".into()));
        }
        if self.reps == 0 {
            return Err(Error::Param("reps must be at least 1".into()));
        }
        if self.levels.is_empty() {
            return Err(Error::Param("need at least one quantile level".into()));
        }
        for &a in &self.levels {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::Level { value: a });
            }
        }
        if !(self.conf_level > 0.0 && self.conf_level < 1.0) {
            return Err(Error::Level {
                value: self.conf_level,
            });
        }
        Ok(())
    }

    fn total_n(&self) -> usize {
        self.n_per_sample * self.populations.len()
    }
}

/// Per-(population, level) metrics for the distribution function estimates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CdfCell {
    /// Asymptotic variance of the pooled estimate (oracle; model designs only).
    pub asym_var_el: Option<f64>,
    /// Ratio of baseline to pooled asymptotic variances.
    pub asym_ratio: Option<f64>,
    pub sim_var_el: Option<f64>,
    /// Ratio of baseline to pooled simulated variances.
    pub sim_ratio: Option<f64>,
    /// Mean plug-in variance estimate over its simulated variance.
    pub est_over_sim: Option<f64>,
    pub bias_el_pct: f64,
    pub bias_em_pct: f64,
}

/// Per-(population, level) metrics for the quantile estimates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantileCell {
    pub true_quantile: f64,
    pub asym_var_el: Option<f64>,
    pub sim_var_el: Option<f64>,
    pub mean_est_var_el: f64,
    /// Ratio of baseline to pooled simulated variances.
    pub sim_ratio: Option<f64>,
    pub mse_el: f64,
    /// Ratio of baseline to pooled mean squared errors.
    pub mse_ratio: f64,
    pub est_over_mse: f64,
    pub bias_el_pct: f64,
    pub bias_em_pct: f64,
}

/// Per-(target, level) confidence interval metrics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalCell {
    pub el_length: f64,
    pub el_coverage_pct: f64,
    pub em_length: f64,
    pub em_coverage_pct: f64,
}

/// Aggregated output of a replicated experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsTable {
    pub population_labels: Vec<String>,
    pub levels: Vec<f64>,
    pub n_per_sample: usize,
    pub reps_requested: usize,
    pub reps_used: usize,
    pub failures: usize,
    pub seed: u64,
    pub conf_level: f64,
    /// cdf[r][a]
    pub cdf: Vec<Vec<CdfCell>>,
    /// quantile[r][a]
    pub quantile: Vec<Vec<QuantileCell>>,
    /// interval[r][a]
    pub interval: Vec<Vec<IntervalCell>>,
    /// Labels of the difference targets (population 0 against each other).
    pub diff_labels: Vec<String>,
    /// diff_interval[k-1][a] for the pair (0, k)
    pub diff_interval: Vec<Vec<IntervalCell>>,
}

/// Everything recorded from one successful replicate.
struct RepOutcome {
    /// [pop][level]
    g_el: Vec<Vec<f64>>,
    g_em: Vec<Vec<f64>>,
    /// plug-in variance estimate of the pooled CDF value, per-estimator units
    g_var_est: Vec<Vec<f64>>,
    xi_el: Vec<Vec<f64>>,
    xi_em: Vec<Vec<f64>>,
    /// plug-in variance estimate of the pooled quantile, per-estimator units
    xi_var_est: Vec<Vec<f64>>,
    el_cover: Vec<Vec<f64>>,
    el_len: Vec<Vec<f64>>,
    em_cover: Vec<Vec<f64>>,
    em_len: Vec<Vec<f64>>,
    /// [pair][level]
    diff_el_cover: Vec<Vec<f64>>,
    diff_el_len: Vec<Vec<f64>>,
    diff_em_cover: Vec<Vec<f64>>,
    diff_em_len: Vec<Vec<f64>>,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut count) = (0.0, 0usize);
    for x in xs {
        sum += x;
        count += 1;
    }
    sum / count as f64
}

fn sample_variance(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs.iter().cloned());
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    Some(ss / (xs.len() - 1) as f64)
}

/// Population-level asymptotic variances, available when the design
/// satisfies the model for the configured basis.
struct AsymptoticReference {
    /// [pop][level] variance of the root-n pooled CDF estimate
    el_g_var: Vec<Vec<f64>>,
    /// [pop][level] variance of the root-n pooled quantile
    el_xi_var: Vec<Vec<f64>>,
}

fn oracle_reference(
    config: &ExperimentConfig,
    truth_xi: &[Vec<f64>],
    truth_g: &[Vec<f64>],
    theta: &ThetaMatrix,
) -> Result<AsymptoticReference> {
    let pops = &config.populations;
    let m1 = pops.len();
    let rho = vec![1.0 / m1 as f64; m1];
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in pops {
        lo = lo.min(p.true_quantile(1e-9)?);
        hi = hi.max(p.true_quantile(1.0 - 1e-9)?);
    }
    let grid = QuadratureGrid::gauss_legendre(lo, hi, DEFAULT_NODES)?;
    let densities: Vec<Box<dyn Fn(f64) -> f64 + Send + Sync>> = pops
        .iter()
        .map(|p| {
            let p = *p;
            Box::new(move |x: f64| p.pdf(x)) as Box<dyn Fn(f64) -> f64 + Send + Sync>
        })
        .collect();
    let kernel = CovarianceKernel::oracle(densities, &rho, &config.basis, theta, &grid)?;

    let mut el_g_var = vec![vec![0.0; config.levels.len()]; m1];
    let mut el_xi_var = vec![vec![0.0; config.levels.len()]; m1];
    for r in 0..m1 {
        for (ai, &alpha) in config.levels.iter().enumerate() {
            let xi = truth_xi[r][ai];
            let omega = kernel.omega(r, r, xi, xi, alpha, alpha)?;
            el_g_var[r][ai] = omega;
            el_xi_var[r][ai] = omega / (truth_g[r][ai] * truth_g[r][ai]);
        }
    }
    Ok(AsymptoticReference { el_g_var, el_xi_var })
}

fn run_rep(
    config: &ExperimentConfig,
    rep: usize,
    truth_xi: &[Vec<f64>],
    truth_diff: &[Vec<f64>],
) -> Result<RepOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(rep as u64);

    let m1 = config.populations.len();
    let n_levels = config.levels.len();
    let n = config.total_n();
    let conf = config.conf_level;

    let samples: Vec<Vec<f64>> = config
        .populations
        .iter()
        .map(|p| p.sample(config.n_per_sample, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let data = crate::sample::MultiSample::new(samples)?;
    let options = AnalysisOptions {
        em_bandwidth: config.em_bandwidth.into(),
        el_bandwidth_rate: config.el_bandwidth_rate.into(),
        el_quantile_rule: config.el_quantile_rule.into(),
        ..AnalysisOptions::default()
    };
    let analysis = Analysis::new(data, &config.basis, &options)?;

    let mut out = RepOutcome {
        g_el: vec![vec![0.0; n_levels]; m1],
        g_em: vec![vec![0.0; n_levels]; m1],
        g_var_est: vec![vec![0.0; n_levels]; m1],
        xi_el: vec![vec![0.0; n_levels]; m1],
        xi_em: vec![vec![0.0; n_levels]; m1],
        xi_var_est: vec![vec![0.0; n_levels]; m1],
        el_cover: vec![vec![0.0; n_levels]; m1],
        el_len: vec![vec![0.0; n_levels]; m1],
        em_cover: vec![vec![0.0; n_levels]; m1],
        em_len: vec![vec![0.0; n_levels]; m1],
        diff_el_cover: vec![vec![0.0; n_levels]; m1 - 1],
        diff_el_len: vec![vec![0.0; n_levels]; m1 - 1],
        diff_em_cover: vec![vec![0.0; n_levels]; m1 - 1],
        diff_em_len: vec![vec![0.0; n_levels]; m1 - 1],
    };

    for r in 0..m1 {
        for (ai, &alpha) in config.levels.iter().enumerate() {
            let xi_true = truth_xi[r][ai];
            out.g_el[r][ai] = analysis.el_cdf(r, xi_true)?;
            out.g_em[r][ai] = analysis.em_cdf(r, xi_true)?;
            out.g_var_est[r][ai] = analysis
                .kernel()
                .omega(r, r, xi_true, xi_true, alpha, alpha)?
                / n as f64;

            let el_ci = analysis.el_ci(r, alpha, conf)?;
            out.xi_el[r][ai] = el_ci.point;
            out.xi_var_est[r][ai] = el_ci.variance;
            out.el_cover[r][ai] = f64::from(el_ci.covers(xi_true));
            out.el_len[r][ai] = el_ci.length();

            let em_ci = analysis.em_ci(r, alpha, conf)?;
            out.xi_em[r][ai] = em_ci.point;
            out.em_cover[r][ai] = f64::from(em_ci.covers(xi_true));
            out.em_len[r][ai] = em_ci.length();
        }
    }
    for k in 1..m1 {
        for (ai, &alpha) in config.levels.iter().enumerate() {
            let d_true = truth_diff[k - 1][ai];
            let el = analysis.el_diff_ci(0, alpha, k, alpha, conf)?;
            out.diff_el_cover[k - 1][ai] = f64::from(el.covers(d_true));
            out.diff_el_len[k - 1][ai] = el.length();
            let em = analysis.em_diff_ci(0, alpha, k, alpha, conf)?;
            out.diff_em_cover[k - 1][ai] = f64::from(em.covers(d_true));
            out.diff_em_len[k - 1][ai] = em.length();
        }
    }
    Ok(out)
}

/// Run the replicated experiment described by `config`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<MetricsTable> {
    config.validate()?;
    let pops = &config.populations;
    let m1 = pops.len();
    let n_levels = config.levels.len();
    let n = config.total_n();
    let rho = 1.0 / m1 as f64;

    let mut truth_xi = vec![vec![0.0; n_levels]; m1];
    let mut truth_g = vec![vec![0.0; n_levels]; m1];
    for (r, pop) in pops.iter().enumerate() {
        for (ai, &alpha) in config.levels.iter().enumerate() {
            truth_xi[r][ai] = pop.true_quantile(alpha)?;
            truth_g[r][ai] = pop.pdf(truth_xi[r][ai]);
        }
    }
    let truth_diff: Vec<Vec<f64>> = (1..m1)
        .map(|k| {
            (0..n_levels)
                .map(|ai| truth_xi[0][ai] - truth_xi[k][ai])
                .collect()
        })
        .collect();

    let asym = match drm_theta_star(pops, &config.basis)? {
        Some(theta) => Some(oracle_reference(config, &truth_xi, &truth_g, &theta)?),
        None => None,
    };

    let outcomes: Vec<Result<RepOutcome>> = (0..config.reps)
        .into_par_iter()
        .map(|rep| run_rep(config, rep, &truth_xi, &truth_diff))
        .collect();
    let successes: Vec<&RepOutcome> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
    let failures = config.reps - successes.len();
    if successes.is_empty() {
        return Err(Error::Param(format!(
            "all {} replicates failed; first error: {}",
            config.reps,
            outcomes
                .into_iter()
                .find_map(|o| o.err())
                .map(|e| e.to_string())
                .unwrap_or_default()
        )));
    }

    let scale = match config.variance_scale {
        VarianceScale::SqrtN => n as f64,
        VarianceScale::Raw => 1.0,
    };

    let mut cdf = Vec::with_capacity(m1);
    let mut quantile = Vec::with_capacity(m1);
    let mut interval = Vec::with_capacity(m1);
    for r in 0..m1 {
        let mut cdf_row = Vec::with_capacity(n_levels);
        let mut q_row = Vec::with_capacity(n_levels);
        let mut i_row = Vec::with_capacity(n_levels);
        for (ai, &alpha) in config.levels.iter().enumerate() {
            let g_el: Vec<f64> = successes.iter().map(|o| o.g_el[r][ai]).collect();
            let g_em: Vec<f64> = successes.iter().map(|o| o.g_em[r][ai]).collect();
            let bias_denom = if config.scale_cdf_bias {
                (alpha * (1.0 - alpha)).sqrt()
            } else {
                1.0
            };
            let sim_var_el_raw = sample_variance(&g_el);
            let sim_var_em_raw = sample_variance(&g_em);
            let mean_g_var_est = mean(successes.iter().map(|o| o.g_var_est[r][ai]));
            let em_g_asym = alpha * (1.0 - alpha) / rho;
            cdf_row.push(CdfCell {
                asym_var_el: asym.as_ref().map(|a| a.el_g_var[r][ai] / n as f64 * scale),
                asym_ratio: asym.as_ref().map(|a| em_g_asym / a.el_g_var[r][ai]),
                sim_var_el: sim_var_el_raw.map(|v| v * scale),
                sim_ratio: sim_var_el_raw
                    .zip(sim_var_em_raw)
                    .map(|(el, em)| em / el),
                est_over_sim: sim_var_el_raw.map(|v| mean_g_var_est / v),
                bias_el_pct: 100.0 * mean(g_el.iter().map(|v| v - alpha)) / bias_denom,
                bias_em_pct: 100.0 * mean(g_em.iter().map(|v| v - alpha)) / bias_denom,
            });

            let xi_true = truth_xi[r][ai];
            let xi_el: Vec<f64> = successes.iter().map(|o| o.xi_el[r][ai]).collect();
            let xi_em: Vec<f64> = successes.iter().map(|o| o.xi_em[r][ai]).collect();
            let sim_var_xi_el = sample_variance(&xi_el);
            let sim_var_xi_em = sample_variance(&xi_em);
            let mse_el_raw = mean(xi_el.iter().map(|x| (x - xi_true) * (x - xi_true)));
            let mse_em_raw = mean(xi_em.iter().map(|x| (x - xi_true) * (x - xi_true)));
            let mean_est = mean(successes.iter().map(|o| o.xi_var_est[r][ai]));
            q_row.push(QuantileCell {
                true_quantile: xi_true,
                asym_var_el: asym.as_ref().map(|a| a.el_xi_var[r][ai] / n as f64 * scale),
                sim_var_el: sim_var_xi_el.map(|v| v * scale),
                mean_est_var_el: mean_est * scale,
                sim_ratio: sim_var_xi_el
                    .zip(sim_var_xi_em)
                    .map(|(el, em)| em / el),
                mse_el: mse_el_raw * scale,
                mse_ratio: mse_em_raw / mse_el_raw,
                est_over_mse: mean_est / mse_el_raw,
                bias_el_pct: 100.0 * mean(xi_el.iter().map(|x| x - xi_true)) / xi_true,
                bias_em_pct: 100.0 * mean(xi_em.iter().map(|x| x - xi_true)) / xi_true,
            });

            i_row.push(IntervalCell {
                el_length: mean(successes.iter().map(|o| o.el_len[r][ai])),
                el_coverage_pct: 100.0 * mean(successes.iter().map(|o| o.el_cover[r][ai])),
                em_length: mean(successes.iter().map(|o| o.em_len[r][ai])),
                em_coverage_pct: 100.0 * mean(successes.iter().map(|o| o.em_cover[r][ai])),
            });
        }
        cdf.push(cdf_row);
        quantile.push(q_row);
        interval.push(i_row);
    }

    let mut diff_interval = Vec::with_capacity(m1 - 1);
    for k in 1..m1 {
        let mut row = Vec::with_capacity(n_levels);
        for ai in 0..n_levels {
            row.push(IntervalCell {
                el_length: mean(successes.iter().map(|o| o.diff_el_len[k - 1][ai])),
                el_coverage_pct: 100.0
                    * mean(successes.iter().map(|o| o.diff_el_cover[k - 1][ai])),
                em_length: mean(successes.iter().map(|o| o.diff_em_len[k - 1][ai])),
                em_coverage_pct: 100.0
                    * mean(successes.iter().map(|o| o.diff_em_cover[k - 1][ai])),
            });
        }
        diff_interval.push(row);
    }

    let population_labels: Vec<String> = pops.iter().map(|p| p.label()).collect();
    let diff_labels: Vec<String> = (1..m1)
        .map(|k| format!("{} - {}", population_labels[0], population_labels[k]))
        .collect();
    Ok(MetricsTable {
        population_labels,
        levels: config.levels.clone(),
        n_per_sample: config.n_per_sample,
        reps_requested: config.reps,
        reps_used: successes.len(),
        failures,
        seed: config.seed,
        conf_level: config.conf_level,
        cdf,
        quantile,
        interval,
        diff_labels,
        diff_interval,
    })
}

/// The misspecification study: same engine, with the sign-safe working
/// basis (1, x, log(1+|x|), sqrt|x|) forced on.
pub fn misspecification_study(config: &ExperimentConfig) -> Result<MetricsTable> {
    let mut config = config.clone();
    config.basis = BasisSpec::robust_default();
    run_experiment(&config)
}

impl MetricsTable {
    fn opt(v: Option<f64>) -> String {
        v.map(sig6).unwrap_or_else(|| "na".into())
    }

    /// Human-readable tab-delimited tables, one section per metric family.
    pub fn to_delimited_text(&self) -> String {
        let mut out = String::new();
        let push_row = |out: &mut String, cells: &[String]| {
            out.push_str(&cells.join("\t"));
            out.push('\n');
        };
        out.push_str(&format!(
            "# replicated experiment: n_k = {}, reps = {} (used {}, failed {}), seed = {}, conf = {}\n",
            self.n_per_sample, self.reps_requested, self.reps_used, self.failures, self.seed,
            self.conf_level
        ));

        out.push_str("\n## distribution function estimates\n");
        push_row(
            &mut out,
            &[
                "population".into(),
                "alpha".into(),
                "asym_var_el".into(),
                "asym_ratio".into(),
                "sim_var_el".into(),
                "sim_ratio".into(),
                "est/sim".into(),
                "bias_el%".into(),
                "bias_em%".into(),
            ],
        );
        for (r, label) in self.population_labels.iter().enumerate() {
            for (ai, &alpha) in self.levels.iter().enumerate() {
                let c = &self.cdf[r][ai];
                push_row(
                    &mut out,
                    &[
                        label.clone(),
                        sig6(alpha),
                        Self::opt(c.asym_var_el),
                        Self::opt(c.asym_ratio),
                        Self::opt(c.sim_var_el),
                        Self::opt(c.sim_ratio),
                        Self::opt(c.est_over_sim),
                        sig6(c.bias_el_pct),
                        sig6(c.bias_em_pct),
                    ],
                );
            }
        }

        out.push_str("\n## quantile estimates\n");
        push_row(
            &mut out,
            &[
                "population".into(),
                "alpha".into(),
                "true_quantile".into(),
                "asym_var_el".into(),
                "sim_var_el".into(),
                "est_var_el".into(),
                "sim_ratio".into(),
                "mse_el".into(),
                "mse_ratio".into(),
                "est/mse".into(),
                "bias_el%".into(),
                "bias_em%".into(),
            ],
        );
        for (r, label) in self.population_labels.iter().enumerate() {
            for (ai, &alpha) in self.levels.iter().enumerate() {
                let q = &self.quantile[r][ai];
                push_row(
                    &mut out,
                    &[
                        label.clone(),
                        sig6(alpha),
                        sig6(q.true_quantile),
                        Self::opt(q.asym_var_el),
                        Self::opt(q.sim_var_el),
                        sig6(q.mean_est_var_el),
                        Self::opt(q.sim_ratio),
                        sig6(q.mse_el),
                        sig6(q.mse_ratio),
                        sig6(q.est_over_mse),
                        sig6(q.bias_el_pct),
                        sig6(q.bias_em_pct),
                    ],
                );
            }
        }

        for (title, labels, cells) in [
            (
                "confidence intervals for quantiles",
                &self.population_labels,
                &self.interval,
            ),
            (
                "confidence intervals for quantile differences",
                &self.diff_labels,
                &self.diff_interval,
            ),
        ] {
            out.push_str(&format!("\n## {title}\n"));
            push_row(
                &mut out,
                &[
                    "target".into(),
                    "alpha".into(),
                    "el_length".into(),
                    "el_coverage%".into(),
                    "em_length".into(),
                    "em_coverage%".into(),
                ],
            );
            for (t, label) in labels.iter().enumerate() {
                for (ai, &alpha) in self.levels.iter().enumerate() {
                    let c = &cells[t][ai];
                    push_row(
                        &mut out,
                        &[
                            label.clone(),
                            sig6(alpha),
                            sig6(c.el_length),
                            sig6(c.el_coverage_pct),
                            sig6(c.em_length),
                            sig6(c.em_coverage_pct),
                        ],
                    );
                }
            }
        }
        out
    }

    /// Machine-readable flat records: section,target,level,metric,value.
    pub fn to_records(&self) -> String {
        let mut out = String::from("section,target,level,metric,value\n");
        let mut push = |section: &str, target: &str, level: f64, metric: &str, value: Option<f64>| {
            if let Some(v) = value {
                out.push_str(&format!(
                    "{section},{target},{},{metric},{}\n",
                    sig6(level),
                    sig6(v)
                ));
            }
        };
        for (r, label) in self.population_labels.iter().enumerate() {
            for (ai, &alpha) in self.levels.iter().enumerate() {
                let c = &self.cdf[r][ai];
                push("cdf", label, alpha, "asym_var_el", c.asym_var_el);
                push("cdf", label, alpha, "asym_ratio", c.asym_ratio);
                push("cdf", label, alpha, "sim_var_el", c.sim_var_el);
                push("cdf", label, alpha, "sim_ratio", c.sim_ratio);
                push("cdf", label, alpha, "est_over_sim", c.est_over_sim);
                push("cdf", label, alpha, "bias_el_pct", Some(c.bias_el_pct));
                push("cdf", label, alpha, "bias_em_pct", Some(c.bias_em_pct));
                let q = &self.quantile[r][ai];
                push("quantile", label, alpha, "true_quantile", Some(q.true_quantile));
                push("quantile", label, alpha, "asym_var_el", q.asym_var_el);
                push("quantile", label, alpha, "sim_var_el", q.sim_var_el);
                push("quantile", label, alpha, "mean_est_var_el", Some(q.mean_est_var_el));
                push("quantile", label, alpha, "sim_ratio", q.sim_ratio);
                push("quantile", label, alpha, "mse_el", Some(q.mse_el));
                push("quantile", label, alpha, "mse_ratio", Some(q.mse_ratio));
                push("quantile", label, alpha, "est_over_mse", Some(q.est_over_mse));
                push("quantile", label, alpha, "bias_el_pct", Some(q.bias_el_pct));
                push("quantile", label, alpha, "bias_em_pct", Some(q.bias_em_pct));
                let i = &self.interval[r][ai];
                push("interval", label, alpha, "el_length", Some(i.el_length));
                push("interval", label, alpha, "el_coverage_pct", Some(i.el_coverage_pct));
                push("interval", label, alpha, "em_length", Some(i.em_length));
                push("interval", label, alpha, "em_coverage_pct", Some(i.em_coverage_pct));
            }
        }
        for (t, label) in self.diff_labels.iter().enumerate() {
            for (ai, &alpha) in self.levels.iter().enumerate() {
                let c = &self.diff_interval[t][ai];
                push("diff_interval", label, alpha, "el_length", Some(c.el_length));
                push(
                    "diff_interval",
                    label,
                    alpha,
                    "el_coverage_pct",
                    Some(c.el_coverage_pct),
                );
                push("diff_interval", label, alpha, "em_length", Some(c.em_length));
                push(
                    "diff_interval",
                    label,
                    alpha,
                    "em_coverage_pct",
                    Some(c.em_coverage_pct),
                );
            }
        }
        out
    }
}

/// The concrete study designs from the efficiency tables.
pub mod designs {
    use super::*;

    /// Six gamma populations paired with the (1, x, log x) basis.
    pub fn gamma_populations() -> Vec<PopulationSpec> {
        [
            (6.0, 1.5),
            (6.0, 1.4),
            (7.0, 1.3),
            (7.0, 1.2),
            (8.0, 1.1),
            (8.0, 1.0),
        ]
        .into_iter()
        .map(|(shape, scale)| PopulationSpec::Gamma { shape, scale })
        .collect()
    }

    /// Six normal populations paired with the (1, x, x^2) basis.
    pub fn normal_populations() -> Vec<PopulationSpec> {
        [
            (18.0, 4.0),
            (18.0, 9.0),
            (20.0, 6.0),
            (20.0, 9.0),
            (22.0, 8.0),
            (22.0, 10.0),
        ]
        .into_iter()
        .map(|(mean, variance)| PopulationSpec::Normal { mean, variance })
        .collect()
    }

    /// Mixed gamma/normal/Weibull populations that no single basis fits.
    pub fn misspec_populations() -> Vec<PopulationSpec> {
        vec![
            PopulationSpec::Gamma {
                shape: 16.0,
                scale: 0.6,
            },
            PopulationSpec::Gamma {
                shape: 19.0,
                scale: 0.5,
            },
            PopulationSpec::Normal {
                mean: 9.0,
                variance: 5.0,
            },
            PopulationSpec::Normal {
                mean: 9.6,
                variance: 5.6,
            },
            PopulationSpec::Weibull {
                shape: 10.0,
                scale: 4.5,
            },
            PopulationSpec::Weibull {
                shape: 11.0,
                scale: 5.0,
            },
        ]
    }

    pub fn gamma50(reps: usize, seed: u64) -> ExperimentConfig {
        ExperimentConfig::new(gamma_populations(), BasisSpec::log_linear(), 50, reps, seed)
    }

    pub fn normal50(reps: usize, seed: u64) -> ExperimentConfig {
        ExperimentConfig::new(normal_populations(), BasisSpec::quadratic(), 50, reps, seed)
    }

    pub fn misspec50(reps: usize, seed: u64) -> ExperimentConfig {
        ExperimentConfig::new(
            misspec_populations(),
            BasisSpec::robust_default(),
            50,
            reps,
            seed,
        )
    }
}
