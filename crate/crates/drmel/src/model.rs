//! The density ratio model, its dual profile log-empirical-likelihood, and
//! the maximum empirical likelihood estimator (MELE).
//!
//! With m+1 samples and sample fractions rho_k, the dual objective is
//!
//! ```text
//! l(theta) = sum_{k,j} theta_k' q(x_kj)
//!          - sum_{k,j} log( sum_r rho_r exp{ theta_r' q(x_kj) } )
//! ```
//!
//! with theta_0 = 0. The objective is smooth and concave with cheap exact
//! derivatives, so the maximizer is found by damped Newton iteration with a
//! backtracking line search guaranteeing monotone ascent. All mixture terms
//! are evaluated in log-sum-exp form so that components like x^2 cannot
//! overflow the exponentials.

use crate::basis::BasisSpec;
use crate::error::{Error, Result};
use crate::sample::MultiSample;
use nalgebra::{Cholesky, DMatrix, DVector};

/// The m x d free parameter block; row r holds theta_{r+1}. The baseline
/// row theta_0 is identically zero and never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaMatrix {
    entries: DMatrix<f64>,
}

impl ThetaMatrix {
    pub fn zeros(m: usize, d: usize) -> Self {
        ThetaMatrix {
            entries: DMatrix::zeros(m, d),
        }
    }

    /// Build from m rows of d finite entries each.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Param("theta needs at least one row".into()));
        }
        let d = rows[0].len();
        if d == 0 || rows.iter().any(|r| r.len() != d) {
            return Err(Error::Param("theta rows must share a positive length".into()));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Param("theta entries must be finite".into()));
        }
        let entries = DMatrix::from_fn(rows.len(), d, |r, c| rows[r][c]);
        Ok(ThetaMatrix { entries })
    }

    /// Rebuild from the flat segment layout used by score and hessian
    /// (segment r of length d holds row r).
    pub fn from_flat(v: &DVector<f64>, m: usize, d: usize) -> Self {
        assert_eq!(v.len(), m * d);
        ThetaMatrix {
            entries: DMatrix::from_fn(m, d, |r, c| v[r * d + c]),
        }
    }

    pub fn m(&self) -> usize {
        self.entries.nrows()
    }

    pub fn d(&self) -> usize {
        self.entries.ncols()
    }

    /// Entry (r, j) for the free row r = 0..m (i.e. population r+1).
    pub fn get(&self, r: usize, j: usize) -> f64 {
        self.entries[(r, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Row-major flattening into md segments.
    pub fn flatten(&self) -> DVector<f64> {
        let (m, d) = (self.m(), self.d());
        DVector::from_fn(m * d, |i, _| self.entries[(i / d, i % d)])
    }

    fn stepped(&self, direction: &DVector<f64>, t: f64) -> ThetaMatrix {
        let (m, d) = (self.m(), self.d());
        let entries = DMatrix::from_fn(m, d, |r, c| self.entries[(r, c)] + t * direction[r * d + c]);
        ThetaMatrix { entries }
    }
}

/// Precomputed per-observation quantities shared by the likelihood routines.
pub(crate) struct Prepared {
    pub(crate) values: Vec<f64>,
    pub(crate) sample_idx: Vec<usize>,
    /// n x d matrix of basis values, one row per pooled observation.
    pub(crate) q: DMatrix<f64>,
    pub(crate) rho: Vec<f64>,
    pub(crate) log_rho: Vec<f64>,
    pub(crate) n_k: Vec<usize>,
}

impl Prepared {
    pub(crate) fn new(data: &MultiSample, spec: &BasisSpec) -> Result<Self> {
        let n = data.total();
        let d = spec.dim();
        let mut q = DMatrix::zeros(n, d);
        let mut values = Vec::with_capacity(n);
        let mut sample_idx = Vec::with_capacity(n);
        let mut buf = vec![0.0; d];
        for (i, (k, x)) in data.iter_pooled().enumerate() {
            spec.eval_into(x, &mut buf)?;
            for (j, &v) in buf.iter().enumerate() {
                q[(i, j)] = v;
            }
            values.push(x);
            sample_idx.push(k);
        }
        Ok(Prepared {
            values,
            sample_idx,
            q,
            rho: data.fractions().to_vec(),
            log_rho: data.fractions().iter().map(|r| r.ln()).collect(),
            n_k: data.sizes().to_vec(),
        })
    }

    pub(crate) fn n(&self) -> usize {
        self.values.len()
    }

    pub(crate) fn m(&self) -> usize {
        self.rho.len() - 1
    }

    pub(crate) fn d(&self) -> usize {
        self.q.ncols()
    }

    fn check_theta(&self, theta: &ThetaMatrix) -> Result<()> {
        if theta.m() != self.m() || theta.d() != self.d() {
            return Err(Error::Param(format!(
                "theta is {}x{} but the data/basis require {}x{}",
                theta.m(),
                theta.d(),
                self.m(),
                self.d()
            )));
        }
        Ok(())
    }

    /// Exponent terms log rho_r + theta_r' q_i for observation i.
    fn terms_at(&self, theta: &ThetaMatrix, i: usize, terms: &mut [f64]) {
        let d = self.d();
        terms[0] = self.log_rho[0];
        for r in 1..=self.m() {
            let mut dot = 0.0;
            for j in 0..d {
                dot += theta.get(r - 1, j) * self.q[(i, j)];
            }
            terms[r] = self.log_rho[r] + dot;
        }
    }

    /// Objective value only; used by the line search.
    fn loglik(&self, theta: &ThetaMatrix) -> f64 {
        let m1 = self.m() + 1;
        let mut terms = vec![0.0; m1];
        let mut total = 0.0;
        for i in 0..self.n() {
            self.terms_at(theta, i, &mut terms);
            let k = self.sample_idx[i];
            let linear = if k > 0 { terms[k] - self.log_rho[k] } else { 0.0 };
            total += linear - log_sum_exp(&terms);
        }
        total
    }

    /// Objective, gradient, and the per-observation mixing weights
    /// h_k(x_i; theta) in one pass.
    fn evaluate(&self, theta: &ThetaMatrix) -> Evaluated {
        let (n, m, d) = (self.n(), self.m(), self.d());
        let m1 = m + 1;
        let mut terms = vec![0.0; m1];
        let mut hk = DMatrix::zeros(m1, n);
        let mut log_h = vec![0.0; n];
        let mut grad = DVector::zeros(m * d);
        let mut loglik = 0.0;
        for i in 0..n {
            self.terms_at(theta, i, &mut terms);
            let lse = log_sum_exp(&terms);
            log_h[i] = lse;
            let k = self.sample_idx[i];
            let linear = if k > 0 { terms[k] - self.log_rho[k] } else { 0.0 };
            loglik += linear - lse;
            for r in 0..m1 {
                hk[(r, i)] = (terms[r] - lse).exp();
            }
            for r in 1..=m {
                let coeff = if k == r { 1.0 - hk[(r, i)] } else { -hk[(r, i)] };
                let seg = (r - 1) * d;
                for j in 0..d {
                    grad[seg + j] += coeff * self.q[(i, j)];
                }
            }
        }
        Evaluated {
            loglik,
            grad,
            hk,
            log_h,
        }
    }

    /// Exact second-derivative matrix of the objective at the h-values
    /// produced by [`Prepared::evaluate`]. Symmetric negative semidefinite.
    fn hessian_from_hk(&self, hk: &DMatrix<f64>) -> DMatrix<f64> {
        let (n, m, d) = (self.n(), self.m(), self.d());
        let mut hess = DMatrix::zeros(m * d, m * d);
        for i in 0..n {
            for r in 1..=m {
                let hr = hk[(r, i)];
                for s in r..=m {
                    let hs = hk[(s, i)];
                    let c = if r == s { hr * (1.0 - hr) } else { -hr * hs };
                    if c == 0.0 {
                        continue;
                    }
                    let (br, bs) = ((r - 1) * d, (s - 1) * d);
                    for a in 0..d {
                        let qa = c * self.q[(i, a)];
                        for b in 0..d {
                            hess[(br + a, bs + b)] -= qa * self.q[(i, b)];
                        }
                    }
                }
            }
        }
        // mirror the strictly-upper blocks
        for r in 0..m * d {
            for s in (r + 1)..m * d {
                hess[(s, r)] = hess[(r, s)];
            }
        }
        hess
    }
}

struct Evaluated {
    loglik: f64,
    grad: DVector<f64>,
    hk: DMatrix<f64>,
    log_h: Vec<f64>,
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let mx = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = terms.iter().map(|t| (t - mx).exp()).sum();
    mx + sum.ln()
}

/// Dual profile log-empirical-likelihood at theta.
pub fn log_profile_el(theta: &ThetaMatrix, data: &MultiSample, spec: &BasisSpec) -> Result<f64> {
    let prep = Prepared::new(data, spec)?;
    prep.check_theta(theta)?;
    Ok(prep.loglik(theta))
}

/// Gradient of the dual objective in flat md layout (segment r of length d
/// differentiates with respect to theta_r).
pub fn score(theta: &ThetaMatrix, data: &MultiSample, spec: &BasisSpec) -> Result<DVector<f64>> {
    let prep = Prepared::new(data, spec)?;
    prep.check_theta(theta)?;
    Ok(prep.evaluate(theta).grad)
}

/// Exact md x md Hessian of the dual objective.
pub fn hessian(theta: &ThetaMatrix, data: &MultiSample, spec: &BasisSpec) -> Result<DMatrix<f64>> {
    let prep = Prepared::new(data, spec)?;
    prep.check_theta(theta)?;
    let eval = prep.evaluate(theta);
    Ok(prep.hessian_from_hk(&eval.hk))
}

/// Newton solver controls.
#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Stop when the max-abs gradient entry falls at or below this.
    pub grad_tol: f64,
    pub max_iter: usize,
    /// Armijo sufficient-increase constant for the backtracking line search.
    pub armijo: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            grad_tol: 1e-8,
            max_iter: 200,
            armijo: 1e-4,
        }
    }
}

/// Convergence diagnostics of a fit.
#[derive(Debug, Clone)]
pub struct Convergence {
    pub iterations: usize,
    pub grad_norm: f64,
    /// Objective value after each iteration, starting at theta = 0.
    pub loglik_path: Vec<f64>,
}

/// A fitted model: the MELE together with the per-observation weights it
/// induces.
#[derive(Debug, Clone)]
pub struct DrmFit {
    theta_hat: ThetaMatrix,
    /// h(x_i; theta_hat), the mixture denominator per pooled observation.
    h_values: Vec<f64>,
    /// (m+1) x n matrix of h_k(x_i; theta_hat); columns follow the
    /// sample-major pooled order of the data.
    hk_values: DMatrix<f64>,
    /// Baseline masses p_i = 1 / (n h(x_i; theta_hat)).
    p_hat: Vec<f64>,
    loglik: f64,
    convergence: Convergence,
    rho: Vec<f64>,
    n_k: Vec<usize>,
}

impl DrmFit {
    pub fn theta_hat(&self) -> &ThetaMatrix {
        &self.theta_hat
    }

    pub fn h_values(&self) -> &[f64] {
        &self.h_values
    }

    pub fn hk_values(&self) -> &DMatrix<f64> {
        &self.hk_values
    }

    pub fn p_hat(&self) -> &[f64] {
        &self.p_hat
    }

    pub fn loglik(&self) -> f64 {
        self.loglik
    }

    pub fn convergence(&self) -> &Convergence {
        &self.convergence
    }

    pub fn n(&self) -> usize {
        self.h_values.len()
    }

    pub fn n_populations(&self) -> usize {
        self.rho.len()
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn sizes(&self) -> &[usize] {
        &self.n_k
    }

    /// Evaluate all fit quantities at a fixed theta without optimizing.
    /// Useful for diagnostics and for population-level reference values.
    pub fn evaluate_at(theta: &ThetaMatrix, data: &MultiSample, spec: &BasisSpec) -> Result<DrmFit> {
        let prep = Prepared::new(data, spec)?;
        prep.check_theta(theta)?;
        let eval = prep.evaluate(theta);
        Ok(assemble(&prep, theta.clone(), eval, 0, Vec::new()))
    }
}

fn assemble(
    prep: &Prepared,
    theta: ThetaMatrix,
    eval: Evaluated,
    iterations: usize,
    loglik_path: Vec<f64>,
) -> DrmFit {
    let n = prep.n() as f64;
    let h_values: Vec<f64> = eval.log_h.iter().map(|lh| lh.exp()).collect();
    let p_hat: Vec<f64> = h_values.iter().map(|h| 1.0 / (n * h)).collect();
    let grad_norm = eval.grad.amax();
    DrmFit {
        theta_hat: theta,
        h_values,
        hk_values: eval.hk,
        p_hat,
        loglik: eval.loglik,
        convergence: Convergence {
            iterations,
            grad_norm,
            loglik_path,
        },
        rho: prep.rho.clone(),
        n_k: prep.n_k.clone(),
    }
}

/// Fail unless the pooled n x d basis matrix has full column rank, judged by
/// a pivoted QR with tolerance 1e-10 times the largest column norm.
fn check_rank(q: &DMatrix<f64>) -> Result<()> {
    let d = q.ncols();
    let max_norm = (0..d).map(|j| q.column(j).norm()).fold(0.0, f64::max);
    if max_norm <= 0.0 || !max_norm.is_finite() {
        return Err(Error::RankDeficient);
    }
    let qr = q.clone().col_piv_qr();
    let r = qr.r();
    let tol = 1e-10 * max_norm;
    let rank = (0..d.min(q.nrows()))
        .filter(|&i| r[(i, i)].abs() > tol)
        .count();
    if rank < d {
        return Err(Error::RankDeficient);
    }
    Ok(())
}

/// Maximize the dual objective by damped Newton iteration from theta = 0.
///
/// The returned fit satisfies the first-order condition to `opts.grad_tol`
/// in the max norm, and the objective path is nondecreasing.
pub fn fit_mele(data: &MultiSample, spec: &BasisSpec, opts: &SolverOptions) -> Result<DrmFit> {
    let prep = Prepared::new(data, spec)?;
    check_rank(&prep.q)?;
    let (m, d) = (prep.m(), prep.d());
    let md = m * d;

    let mut theta = ThetaMatrix::zeros(m, d);
    let mut eval = prep.evaluate(&theta);
    let mut path = vec![eval.loglik];
    let mut iterations = 0usize;

    loop {
        let grad_norm = eval.grad.amax();
        if grad_norm <= opts.grad_tol {
            return Ok(assemble(&prep, theta, eval, iterations, path));
        }
        if iterations >= opts.max_iter {
            return Err(Error::NoConvergence {
                iterations,
                grad_norm,
            });
        }

        // Newton direction from the negated Hessian, ridge-regularized only
        // if the factorization fails to working precision.
        let curvature = -prep.hessian_from_hk(&eval.hk);
        let base_ridge = 1e-10 * curvature.trace() / md as f64;
        let mut direction = None;
        let mut ridge = 0.0;
        for _ in 0..4 {
            let mut attempt = curvature.clone();
            if ridge > 0.0 {
                for i in 0..md {
                    attempt[(i, i)] += ridge;
                }
            }
            if let Some(chol) = Cholesky::new(attempt) {
                direction = Some(chol.solve(&eval.grad));
                break;
            }
            ridge = if ridge == 0.0 {
                base_ridge.max(f64::MIN_POSITIVE)
            } else {
                ridge * 1e3
            };
        }
        let Some(direction) = direction else {
            return Err(Error::NoConvergence {
                iterations,
                grad_norm,
            });
        };

        let slope = eval.grad.dot(&direction);
        // ascent within the resolution of the objective: near the optimum
        // the true increase drops below f64 rounding of the sum, so the
        // Armijo test carries a rounding-scale slack
        let slack = 8.0 * f64::EPSILON * (1.0 + eval.loglik.abs());
        let mut step = 1.0;
        let mut accepted = None;
        while step >= 1e-13 {
            let candidate = theta.stepped(&direction, step);
            let value = prep.loglik(&candidate);
            if value.is_finite() && value >= eval.loglik + opts.armijo * step * slope - slack {
                accepted = Some(candidate);
                break;
            }
            step *= 0.5;
        }
        let Some(next) = accepted else {
            return Err(Error::NoConvergence {
                iterations,
                grad_norm,
            });
        };

        theta = next;
        eval = prep.evaluate(&theta);
        path.push(eval.loglik);
        iterations += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn two_point_data() -> MultiSample {
        MultiSample::new(vec![vec![0.0], vec![1.0]]).unwrap()
    }

    /// Central finite differences of the objective.
    fn fd_score(theta: &ThetaMatrix, data: &MultiSample, spec: &BasisSpec) -> DVector<f64> {
        let (m, d) = (theta.m(), theta.d());
        let flat = theta.flatten();
        let mut out = DVector::zeros(m * d);
        for i in 0..m * d {
            let h = 6e-6 * (1.0 + flat[i].abs());
            let mut up = flat.clone();
            up[i] += h;
            let mut dn = flat.clone();
            dn[i] -= h;
            let lu = log_profile_el(&ThetaMatrix::from_flat(&up, m, d), data, spec).unwrap();
            let ld = log_profile_el(&ThetaMatrix::from_flat(&dn, m, d), data, spec).unwrap();
            out[i] = (lu - ld) / (2.0 * h);
        }
        out
    }

    /// Central finite differences of the score.
    fn fd_hessian(theta: &ThetaMatrix, data: &MultiSample, spec: &BasisSpec) -> DMatrix<f64> {
        let (m, d) = (theta.m(), theta.d());
        let flat = theta.flatten();
        let md = m * d;
        let mut out = DMatrix::zeros(md, md);
        for i in 0..md {
            let h = 2e-5 * (1.0 + flat[i].abs());
            let mut up = flat.clone();
            up[i] += h;
            let mut dn = flat.clone();
            dn[i] -= h;
            let su = score(&ThetaMatrix::from_flat(&up, m, d), data, spec).unwrap();
            let sd = score(&ThetaMatrix::from_flat(&dn, m, d), data, spec).unwrap();
            for j in 0..md {
                out[(j, i)] = (su[j] - sd[j]) / (2.0 * h);
            }
        }
        out
    }

    #[test]
    fn loglik_is_zero_at_zero_theta() {
        let spec = BasisSpec::quadratic();
        let data = MultiSample::new(vec![vec![0.3, -1.2, 0.7], vec![1.5, 2.0]]).unwrap();
        let theta = ThetaMatrix::zeros(1, 3);
        assert_abs_diff_eq!(
            log_profile_el(&theta, &data, &spec).unwrap(),
            0.0,
            epsilon = 1e-12
        );

        let theta = ThetaMatrix::zeros(1, 2);
        assert_abs_diff_eq!(
            log_profile_el(&theta, &two_point_data(), &BasisSpec::linear()).unwrap(),
            0.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn two_point_loglik_matches_hand_formula() {
        // m = 1, samples {0} and {1}, q = (1, x), theta_1 = (a, b):
        // l = -log(1/2 + 1/2 e^a) - log(1/2 + 1/2 e^{a+b}) + a + b
        let (a, b) = (0.1f64, 0.2f64);
        let hand = -(0.5 + 0.5 * a.exp()).ln() - (0.5 + 0.5 * (a + b).exp()).ln() + a + b;
        let theta = ThetaMatrix::from_rows(&[vec![a, b]]).unwrap();
        let got = log_profile_el(&theta, &two_point_data(), &BasisSpec::linear()).unwrap();
        assert_relative_eq!(got, hand, max_relative = 1e-14);
    }

    #[test]
    fn score_at_zero_matches_closed_form() {
        let spec = BasisSpec::quadratic();
        let data =
            MultiSample::new(vec![vec![0.3, -1.2, 0.7], vec![1.5, 2.0], vec![-0.4, 0.9]]).unwrap();
        let theta = ThetaMatrix::zeros(2, 3);
        let g = score(&theta, &data, &spec).unwrap();
        // segment r: sum_j q(x_rj) - rho_r * sum_{k,j} q(x_kj)
        let total: DVector<f64> = data
            .iter_pooled()
            .map(|(_, x)| spec.eval(x).unwrap())
            .sum::<DVector<f64>>();
        for r in 1..=2usize {
            let own: DVector<f64> = data
                .sample(r)
                .iter()
                .map(|&x| spec.eval(x).unwrap())
                .sum::<DVector<f64>>();
            let expected = own - data.fraction(r) * &total;
            for j in 0..3 {
                assert_abs_diff_eq!(g[(r - 1) * 3 + j], expected[j], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn score_matches_finite_differences() {
        let spec = BasisSpec::quadratic();
        let data = MultiSample::new(vec![
            vec![0.4, -0.8, 1.3, 0.2],
            vec![0.9, 1.7, -0.3],
            vec![2.1, 0.5],
        ])
        .unwrap();
        let theta = ThetaMatrix::from_rows(&[vec![0.2, -0.3, 0.1], vec![-0.1, 0.25, -0.05]]).unwrap();
        let analytic = score(&theta, &data, &spec).unwrap();
        let numeric = fd_score(&theta, &data, &spec);
        for i in 0..analytic.len() {
            assert_relative_eq!(analytic[i], numeric[i], max_relative = 1e-6, epsilon = 1e-8);
        }
    }

    #[test]
    fn hessian_matches_finite_differences_and_is_symmetric() {
        let spec = BasisSpec::linear();
        let data = MultiSample::new(vec![vec![0.4, -0.8, 1.3], vec![0.9, 1.7, -0.3]]).unwrap();
        let theta = ThetaMatrix::from_rows(&[vec![0.15, -0.2]]).unwrap();
        let analytic = hessian(&theta, &data, &spec).unwrap();
        let numeric = fd_hessian(&theta, &data, &spec);
        for i in 0..analytic.nrows() {
            for j in 0..analytic.ncols() {
                assert_relative_eq!(
                    analytic[(i, j)],
                    numeric[(i, j)],
                    max_relative = 1e-5,
                    epsilon = 1e-7
                );
                assert_eq!(analytic[(i, j)], analytic[(j, i)]);
            }
        }
    }

    #[test]
    fn hessian_scalar_case_is_negative() {
        // m = 1, constant-only basis, one observation per sample:
        // the 1x1 Hessian is -sum_i h_1 (1 - h_1) < 0.
        let data = two_point_data();
        let theta = ThetaMatrix::zeros(1, 1);
        let h = hessian(&theta, &data, &BasisSpec::constant_only()).unwrap();
        assert_eq!(h.nrows(), 1);
        assert_abs_diff_eq!(h[(0, 0)], -0.5, epsilon = 1e-14);
        assert!(h[(0, 0)] < 0.0);
    }

    #[test]
    fn constant_only_basis_fits_theta_zero() {
        let data = MultiSample::new(vec![vec![1.0, 4.0, 2.2], vec![0.5, 9.1]]).unwrap();
        let fit = fit_mele(&data, &BasisSpec::constant_only(), &SolverOptions::default()).unwrap();
        assert_abs_diff_eq!(fit.theta_hat().get(0, 0), 0.0, epsilon = 1e-8);
        assert_eq!(fit.convergence().iterations, 0);
    }

    #[test]
    fn identical_observations_are_rank_deficient() {
        let data = MultiSample::new(vec![vec![3.0, 3.0], vec![3.0, 3.0]]).unwrap();
        let err = fit_mele(&data, &BasisSpec::linear(), &SolverOptions::default()).unwrap_err();
        assert!(matches!(err, Error::RankDeficient));
    }

    #[test]
    fn fit_satisfies_first_order_condition_and_ascends() {
        let spec = BasisSpec::quadratic();
        let data = MultiSample::new(vec![
            vec![0.1, -0.5, 0.9, 1.4, -1.1, 0.3],
            vec![1.0, 0.6, 1.9, 0.2, 1.2],
        ])
        .unwrap();
        let fit = fit_mele(&data, &spec, &SolverOptions::default()).unwrap();
        let g = score(fit.theta_hat(), &data, &spec).unwrap();
        assert!(g.amax() <= 1e-8);
        let path = &fit.convergence().loglik_path;
        assert!(path
            .windows(2)
            .all(|w| w[1] >= w[0] - 1e-12 * (1.0 + w[0].abs())));
        assert!(fit.loglik() >= 0.0 - 1e-12); // no worse than the start theta = 0
    }

    #[test]
    fn h_weights_sum_to_one_and_masses_normalize() {
        let spec = BasisSpec::quadratic();
        let data = MultiSample::new(vec![
            vec![0.1, -0.5, 0.9, 1.4, -1.1, 0.3, 0.8, -0.2],
            vec![1.0, 0.6, 1.9, 0.2, 1.2, 0.4],
        ])
        .unwrap();
        let opts = SolverOptions {
            grad_tol: 1e-12,
            ..SolverOptions::default()
        };
        let fit = fit_mele(&data, &spec, &opts).unwrap();
        let hk = fit.hk_values();
        for i in 0..fit.n() {
            let mut sum = 0.0;
            for r in 0..fit.n_populations() {
                let h = hk[(r, i)];
                assert!((0.0..=1.0).contains(&h));
                sum += h;
            }
            assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
        }
        // at the MELE the baseline masses sum to one
        let total: f64 = fit.p_hat().iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn permuting_within_samples_leaves_fit_unchanged() {
        let spec = BasisSpec::quadratic();
        let a = vec![0.1, -0.5, 0.9, 1.4, -1.1];
        let b = vec![1.0, 0.6, 1.9, 0.2];
        let data = MultiSample::new(vec![a.clone(), b.clone()]).unwrap();
        let mut a2 = a;
        a2.reverse();
        let mut b2 = b;
        b2.rotate_left(2);
        let data2 = MultiSample::new(vec![a2, b2]).unwrap();
        let fit1 = fit_mele(&data, &spec, &SolverOptions::default()).unwrap();
        let fit2 = fit_mele(&data2, &spec, &SolverOptions::default()).unwrap();
        for j in 0..3 {
            assert_abs_diff_eq!(
                fit1.theta_hat().get(0, j),
                fit2.theta_hat().get(0, j),
                epsilon = 1e-6
            );
        }
    }

    #[test]
    fn score_at_fit_is_small_on_larger_instance() {
        let spec = BasisSpec::log_linear();
        let data = MultiSample::new(vec![
            vec![1.2, 3.4, 0.8, 2.2, 5.1, 1.9, 0.6, 2.8],
            vec![2.5, 4.1, 1.4, 3.3, 6.0, 2.2],
            vec![0.9, 1.8, 2.6, 3.9, 1.1],
        ])
        .unwrap();
        let fit = fit_mele(&data, &spec, &SolverOptions::default()).unwrap();
        assert!(fit.convergence().grad_norm <= 1e-8);
        assert!(fit.convergence().iterations < 50);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn small_instance() -> impl Strategy<Value = (MultiSample, ThetaMatrix)> {
            let sample = prop::collection::vec(-2.0f64..2.0, 2..6);
            (sample.clone(), sample, prop::collection::vec(-0.6f64..0.6, 2))
                .prop_map(|(s0, s1, th)| {
                    let data = MultiSample::new(vec![s0, s1]).unwrap();
                    let theta = ThetaMatrix::from_rows(&[th]).unwrap();
                    (data, theta)
                })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn h_is_a_probability_vector((data, theta) in small_instance()) {
                let fit = DrmFit::evaluate_at(&theta, &data, &BasisSpec::linear()).unwrap();
                let hk = fit.hk_values();
                for i in 0..fit.n() {
                    let sum: f64 = (0..2).map(|r| hk[(r, i)]).sum();
                    prop_assert!((sum - 1.0).abs() < 1e-12);
                    prop_assert!((0..2).all(|r| (0.0..=1.0).contains(&hk[(r, i)])));
                }
            }

            #[test]
            fn score_tracks_finite_differences((data, theta) in small_instance()) {
                let spec = BasisSpec::linear();
                let analytic = score(&theta, &data, &spec).unwrap();
                let numeric = tests::fd_score(&theta, &data, &spec);
                for i in 0..analytic.len() {
                    let scale = 1.0f64.max(numeric[i].abs());
                    prop_assert!((analytic[i] - numeric[i]).abs() <= 1e-6 * scale);
                }
            }
        }
    }
}
