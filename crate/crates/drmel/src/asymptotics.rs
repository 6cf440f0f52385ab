//! Asymptotic covariance machinery for the fitted distributions and
//! quantiles: the information matrix W, the adjustment matrix S, the
//! cumulative kernel pieces a_rs(x), c_rs(x) and B_r(x), and the covariance
//! function omega_rs(x, y) of the root-n CDF errors.
//!
//! Everything is driven by one weighted measure representing
//! dGbar = h(x; theta) dG_0(x):
//!
//! * plug-in form: every pooled observation carries weight 1/n, since
//!   h(x_i) p_i = 1/n exactly at the fitted masses;
//! * oracle form: Gauss-Legendre nodes weighted by h(t; theta*) g_0(t),
//!   used to evaluate population-level quantities in tests.

use crate::basis::BasisSpec;
use crate::error::{Error, Result};
use crate::model::{DrmFit, ThetaMatrix};
use crate::quadrature::QuadratureGrid;
use crate::sample::MultiSample;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn, Matrix2};

/// Support points with nonnegative masses summing to one; the discrete
/// realization of dGbar that all kernel integrals run over.
#[derive(Debug, Clone)]
pub struct WeightedMeasure {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl WeightedMeasure {
    /// Validate a sorted support with nonnegative weights summing to one.
    pub fn new(points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() || points.is_empty() {
            return Err(Error::InvalidData(
                "measure needs matching nonempty points and weights".into(),
            ));
        }
        if points.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidData("measure points must be sorted".into()));
        }
        if weights.iter().any(|&w| !w.is_finite() || w < 0.0) {
            return Err(Error::InvalidData("measure weights must be >= 0".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidData(format!(
                "measure weights sum to {total}, expected 1"
            )));
        }
        Ok(WeightedMeasure { points, weights })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// A population-level integrand backend: keeps the densities and parameter
/// value so that cumulative integrals up to an arbitrary cutoff can be
/// re-quadratured exactly instead of truncating a fixed panel rule mid-panel.
struct OracleBackend {
    densities: Vec<Box<dyn Fn(f64) -> f64 + Send + Sync>>,
    spec: BasisSpec,
    theta: ThetaMatrix,
    lo: f64,
    hi: f64,
    sub_nodes: usize,
}

impl OracleBackend {
    /// Mixing weights h_k(x), basis values q(x), and the dGbar density at x.
    fn point(&self, rho: &[f64], x: f64) -> Result<(Vec<f64>, DVector<f64>, f64)> {
        let q = self.spec.eval(x)?;
        let m1 = rho.len();
        let mut terms = vec![0.0; m1];
        terms[0] = rho[0].ln();
        for r in 1..m1 {
            let mut dot = 0.0;
            for j in 0..q.len() {
                dot += self.theta.get(r - 1, j) * q[j];
            }
            terms[r] = rho[r].ln() + dot;
        }
        let mx = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = terms.iter().map(|t| (t - mx).exp()).sum();
        let log_h = mx + sum.ln();
        let h: Vec<f64> = terms.iter().map(|t| (t - log_h).exp()).collect();
        let dgbar = log_h.exp() * (self.densities[0])(x);
        Ok((h, q, dgbar))
    }
}

impl std::fmt::Debug for CovarianceKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CovarianceKernel")
            .field("m", &self.m)
            .field("d", &self.d)
            .field("rho", &self.rho)
            .field("points", &self.measure.len())
            .field("oracle", &self.oracle.is_some())
            .finish()
    }
}

/// The assembled covariance kernel: W, S, and query tables for a, c, B.
pub struct CovarianceKernel {
    m: usize,
    d: usize,
    rho: Vec<f64>,
    measure: WeightedMeasure,
    /// (m+1) x npoints mixing weights h_k at the support points.
    h: DMatrix<f64>,
    /// d x npoints basis values at the support points.
    q: DMatrix<f64>,
    w: DMatrix<f64>,
    w_chol: Cholesky<f64, Dyn>,
    s: DMatrix<f64>,
    /// B_k(+infinity) for k = 0..=m.
    b_inf: Vec<DVector<f64>>,
    /// Present for population-level kernels; plug-in kernels query the
    /// discrete measure directly.
    oracle: Option<OracleBackend>,
}

impl CovarianceKernel {
    /// Plug-in kernel from a fitted model: integrals become sums over the
    /// observations, each carrying weight 1/n.
    pub fn plug_in(fit: &DrmFit, data: &MultiSample, spec: &BasisSpec) -> Result<Self> {
        if fit.n() != data.total() || fit.n_populations() != data.n_populations() {
            return Err(Error::InvalidData(
                "fit and data describe different samples".into(),
            ));
        }
        let n = data.total();
        let m1 = data.n_populations();
        let d = spec.dim();
        let values: Vec<f64> = data.iter_pooled().map(|(_, x)| x).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());

        let hk = fit.hk_values();
        let mut points = Vec::with_capacity(n);
        let mut h = DMatrix::zeros(m1, n);
        let mut q = DMatrix::zeros(d, n);
        let mut buf = vec![0.0; d];
        for (col, &i) in order.iter().enumerate() {
            points.push(values[i]);
            for r in 0..m1 {
                h[(r, col)] = hk[(r, i)];
            }
            spec.eval_into(values[i], &mut buf)?;
            for (j, &v) in buf.iter().enumerate() {
                q[(j, col)] = v;
            }
        }
        let weights = vec![1.0 / n as f64; n];
        let measure = WeightedMeasure::new(points, weights)?;
        Self::from_parts(fit.rho().to_vec(), measure, h, q, None)
    }

    /// Population-level kernel evaluated by quadrature against the supplied
    /// densities, mixing fractions, and parameter value.
    ///
    /// Every density must integrate to one over the grid to 1e-6; the grid
    /// must therefore cover all but a negligible tail of every population.
    pub fn oracle(
        densities: Vec<Box<dyn Fn(f64) -> f64 + Send + Sync>>,
        rho: &[f64],
        spec: &BasisSpec,
        theta_star: &ThetaMatrix,
        grid: &QuadratureGrid,
    ) -> Result<Self> {
        let m1 = densities.len();
        if m1 < 2 || rho.len() != m1 {
            return Err(Error::Param(
                "need at least two densities with matching fractions".into(),
            ));
        }
        if theta_star.m() != m1 - 1 || theta_star.d() != spec.dim() {
            return Err(Error::Param("theta dimensions do not match".into()));
        }
        if rho.iter().any(|&r| r <= 0.0) || (rho.iter().sum::<f64>() - 1.0).abs() > 1e-8 {
            return Err(Error::Param("fractions must be positive and sum to 1".into()));
        }
        for (k, g) in densities.iter().enumerate() {
            let total = grid.integrate(g);
            if (total - 1.0).abs() > 1e-6 {
                return Err(Error::Quadrature(format!(
                    "density {k} integrates to {total} over the grid"
                )));
            }
        }

        let d = spec.dim();
        let npts = grid.len();
        let log_rho: Vec<f64> = rho.iter().map(|r| r.ln()).collect();
        let mut h = DMatrix::zeros(m1, npts);
        let mut q = DMatrix::zeros(d, npts);
        let mut weights = Vec::with_capacity(npts);
        let mut terms = vec![0.0; m1];
        let mut buf = vec![0.0; d];
        for (col, (&x, &gw)) in grid.nodes().iter().zip(grid.weights()).enumerate() {
            spec.eval_into(x, &mut buf)?;
            for (j, &v) in buf.iter().enumerate() {
                q[(j, col)] = v;
            }
            terms[0] = log_rho[0];
            for r in 1..m1 {
                let mut dot = 0.0;
                for j in 0..d {
                    dot += theta_star.get(r - 1, j) * buf[j];
                }
                terms[r] = log_rho[r] + dot;
            }
            let mx = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = terms.iter().map(|t| (t - mx).exp()).sum();
            let log_h = mx + sum.ln();
            for r in 0..m1 {
                h[(r, col)] = (terms[r] - log_h).exp();
            }
            weights.push(gw * log_h.exp() * densities[0](x));
        }
        // quadrature leaves the total a hair off one; normalize exactly
        let total: f64 = weights.iter().sum();
        if !(total.is_finite() && total > 0.0) || (total - 1.0).abs() > 1e-4 {
            return Err(Error::Quadrature(format!(
                "reference measure integrates to {total} over the grid"
            )));
        }
        for w in &mut weights {
            *w /= total;
        }
        let measure = WeightedMeasure::new(grid.nodes().to_vec(), weights)?;
        let lo = grid.nodes()[0].min(grid.nodes()[grid.len() - 1]);
        let hi = grid.nodes()[0].max(grid.nodes()[grid.len() - 1]);
        let backend = OracleBackend {
            densities,
            spec: spec.clone(),
            theta: theta_star.clone(),
            lo,
            hi,
            sub_nodes: grid.len().max(256),
        };
        Self::from_parts(rho.to_vec(), measure, h, q, Some(backend))
    }

    fn from_parts(
        rho: Vec<f64>,
        measure: WeightedMeasure,
        h: DMatrix<f64>,
        q: DMatrix<f64>,
        oracle: Option<OracleBackend>,
    ) -> Result<Self> {
        let m1 = rho.len();
        let m = m1 - 1;
        let d = q.nrows();
        let md = m * d;
        let npts = measure.len();

        let mut w = DMatrix::zeros(md, md);
        for i in 0..npts {
            let wt = measure.weights()[i];
            for r in 1..=m {
                let hr = h[(r, i)];
                for s in r..=m {
                    let hs = h[(s, i)];
                    let c = wt * if r == s { hr * (1.0 - hr) } else { -hr * hs };
                    if c == 0.0 {
                        continue;
                    }
                    let (br, bs) = ((r - 1) * d, (s - 1) * d);
                    for a in 0..d {
                        let qa = c * q[(a, i)];
                        for b in 0..d {
                            w[(br + a, bs + b)] += qa * q[(b, i)];
                        }
                    }
                }
            }
        }
        for r in 0..md {
            for s in (r + 1)..md {
                w[(s, r)] = w[(r, s)];
            }
        }

        let w_chol = Cholesky::new(w.clone()).ok_or(Error::SingularW)?;

        // S blocks: (1/rho_r delta_rs + 1/rho_0) on the leading element only
        let mut s = DMatrix::zeros(md, md);
        for r in 1..=m {
            for c in 1..=m {
                let v = if r == c { 1.0 / rho[r] } else { 0.0 } + 1.0 / rho[0];
                s[((r - 1) * d, (c - 1) * d)] = v;
            }
        }

        let mut kernel = CovarianceKernel {
            m,
            d,
            rho,
            measure,
            h,
            q,
            w,
            w_chol,
            s,
            b_inf: Vec::new(),
            oracle,
        };
        kernel.b_inf = (0..m1)
            .map(|k| kernel.b_vec(k, f64::INFINITY))
            .collect::<Result<Vec<_>>>()?;
        Ok(kernel)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn measure(&self) -> &WeightedMeasure {
        &self.measure
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn s(&self) -> &DMatrix<f64> {
        &self.s
    }

    /// W^{-1}, materialized.
    pub fn w_inverse(&self) -> DMatrix<f64> {
        self.w_chol.inverse()
    }

    /// Solve W v = rhs.
    pub fn w_solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.w_chol.solve(rhs)
    }

    fn check_pop(&self, r: usize) -> Result<()> {
        if r > self.m {
            return Err(Error::Index {
                index: r,
                len: self.m + 1,
            });
        }
        Ok(())
    }

    /// Integrate `integrand(h, q, slot)` against dGbar up to x, where the
    /// closure fills `slot` from the mixing weights and basis values at one
    /// support point.
    fn cumulative(
        &self,
        x: f64,
        slots: usize,
        integrand: impl Fn(&[f64], &[f64], &mut [f64]),
    ) -> Result<Vec<f64>> {
        let mut acc = vec![0.0; slots];
        let mut slot = vec![0.0; slots];
        match &self.oracle {
            None => {
                let mut h_buf = vec![0.0; self.m + 1];
                let mut q_buf = vec![0.0; self.d];
                for i in 0..self.measure.len() {
                    if self.measure.points()[i] > x {
                        break;
                    }
                    for r in 0..=self.m {
                        h_buf[r] = self.h[(r, i)];
                    }
                    for j in 0..self.d {
                        q_buf[j] = self.q[(j, i)];
                    }
                    integrand(&h_buf, &q_buf, &mut slot);
                    let wt = self.measure.weights()[i];
                    for (a, s) in acc.iter_mut().zip(&slot) {
                        *a += wt * s;
                    }
                }
            }
            Some(backend) => {
                // integrate [lo, min(x, hi)] with a fresh composite rule so
                // the cutoff never lands inside a panel
                let hi = x.min(backend.hi);
                if hi > backend.lo {
                    let grid =
                        QuadratureGrid::gauss_legendre(backend.lo, hi, backend.sub_nodes)?;
                    for (&t, &gw) in grid.nodes().iter().zip(grid.weights()) {
                        let (h, q, dgbar) = backend.point(&self.rho, t)?;
                        integrand(&h, q.as_slice(), &mut slot);
                        for (a, s) in acc.iter_mut().zip(&slot) {
                            *a += gw * dgbar * s;
                        }
                    }
                }
            }
        }
        Ok(acc)
    }

    /// a_rs(x) = integral up to x of (delta_rs h_r - h_r h_s) dGbar.
    pub fn a(&self, r: usize, s: usize, x: f64) -> Result<f64> {
        self.check_pop(r)?;
        self.check_pop(s)?;
        let acc = self.cumulative(x, 1, |h, _, out| {
            out[0] = if r == s {
                h[r] * (1.0 - h[r])
            } else {
                -h[r] * h[s]
            };
        })?;
        Ok(acc[0])
    }

    /// c_rs(x) = integral up to x of h_r h_s dGbar.
    pub fn c(&self, r: usize, s: usize, x: f64) -> Result<f64> {
        self.check_pop(r)?;
        self.check_pop(s)?;
        let acc = self.cumulative(x, 1, |h, _, out| out[0] = h[r] * h[s])?;
        Ok(acc[0])
    }

    /// B_r(x): md-vector whose segment s (s = 1..m) integrates
    /// (delta_rs h_r - h_r h_s) q up to x.
    pub fn b_vec(&self, r: usize, x: f64) -> Result<DVector<f64>> {
        self.check_pop(r)?;
        let (m, d) = (self.m, self.d);
        let acc = self.cumulative(x, m * d, |h, q, out| {
            for s in 1..=m {
                let core = if r == s {
                    h[r] * (1.0 - h[r])
                } else {
                    -h[r] * h[s]
                };
                let seg = (s - 1) * d;
                for j in 0..d {
                    out[seg + j] = core * q[j];
                }
            }
        })?;
        Ok(DVector::from_vec(acc))
    }

    /// B_r(+infinity), cached at construction.
    pub fn b_inf(&self, r: usize) -> Result<&DVector<f64>> {
        self.check_pop(r)?;
        Ok(&self.b_inf[r])
    }

    /// The population CDF implied by the kernel's own measure:
    /// G_r(x) = rho_r^{-1} * integral up to x of h_r dGbar.
    pub fn g_cdf(&self, r: usize, x: f64) -> Result<f64> {
        self.check_pop(r)?;
        let acc = self.cumulative(x, 1, |h, _, out| out[0] = h[r])?;
        Ok(acc[0] / self.rho[r])
    }

    /// Covariance kernel of the root-n CDF errors:
    ///
    /// omega_rs(x, y) = sigma_rs(x, y)
    ///   - (rho_r rho_s)^{-1} { a_rs(x ^ y) - B_r(x)' W^{-1} B_s(y) }
    ///
    /// with sigma_rs(x, y) = delta_rs rho_r^{-1} { G_r(x ^ y) - G_r(x) G_s(y) }.
    /// `g_r_at_x` and `g_s_at_y` supply the CDF values G_r(x), G_s(y); for
    /// quantile plug-ins these are the known levels.
    pub fn omega(
        &self,
        r: usize,
        s: usize,
        x: f64,
        y: f64,
        g_r_at_x: f64,
        g_s_at_y: f64,
    ) -> Result<f64> {
        self.check_pop(r)?;
        self.check_pop(s)?;
        let sigma = if r == s {
            (g_r_at_x.min(g_s_at_y) - g_r_at_x * g_s_at_y) / self.rho[r]
        } else {
            0.0
        };
        let a = self.a(r, s, x.min(y))?;
        let br = self.b_vec(r, x)?;
        let bs = self.b_vec(s, y)?;
        let cross = br.dot(&self.w_solve(&bs));
        Ok(sigma - (a - cross) / (self.rho[r] * self.rho[s]))
    }
}

/// Asymptotic covariance of the root-n errors of a pair of pooled quantile
/// estimates, built from kernel omega values and density values at the
/// quantiles. `big_g_r` / `big_g_s` are the CDF levels at the two points.
#[allow(clippy::too_many_arguments)]
pub fn sigma_el(
    kernel: &CovarianceKernel,
    r: usize,
    s: usize,
    xi_r: f64,
    xi_s: f64,
    g_r: f64,
    g_s: f64,
    big_g_r: f64,
    big_g_s: f64,
) -> Result<Matrix2<f64>> {
    if g_r <= 0.0 || g_s <= 0.0 {
        return Err(Error::DensityZero);
    }
    let w_rr = kernel.omega(r, r, xi_r, xi_r, big_g_r, big_g_r)?;
    let w_ss = kernel.omega(s, s, xi_s, xi_s, big_g_s, big_g_s)?;
    let w_rs = kernel.omega(r, s, xi_r, xi_s, big_g_r, big_g_s)?;
    let off = w_rs / (g_r * g_s);
    Ok(Matrix2::new(w_rr / (g_r * g_r), off, off, w_ss / (g_s * g_s)))
}

/// Asymptotic covariance of the root-n errors of a pair of per-sample
/// empirical quantiles. Off-diagonal vanishes across different populations;
/// for r == s it carries the within-sample CDF covariance.
#[allow(clippy::too_many_arguments)]
pub fn sigma_em(
    rho_r: f64,
    rho_s: f64,
    alpha_r: f64,
    alpha_s: f64,
    g_r: f64,
    g_s: f64,
    r: usize,
    s: usize,
) -> Result<Matrix2<f64>> {
    if g_r <= 0.0 || g_s <= 0.0 {
        return Err(Error::DensityZero);
    }
    let var_r = alpha_r * (1.0 - alpha_r) / (rho_r * g_r * g_r);
    let var_s = alpha_s * (1.0 - alpha_s) / (rho_s * g_s * g_s);
    let off = if r == s {
        (alpha_r.min(alpha_s) - alpha_r * alpha_s) / (rho_r * g_r * g_s)
    } else {
        0.0
    };
    Ok(Matrix2::new(var_r, off, off, var_s))
}
