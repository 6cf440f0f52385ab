//! Composite Gauss-Legendre quadrature for population-level covariance
//! integrals in tests and reference computations.

use crate::error::{Error, Result};

/// Total node count used when callers do not ask for a specific resolution.
pub const DEFAULT_NODES: usize = 2048;

const PANEL_ORDER: usize = 32;

/// Nodes and weights of a composite rule on a finite interval.
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureGrid {
    /// Composite Gauss-Legendre rule over [lo, hi] with at least
    /// `total_nodes` nodes, split into 32-point panels.
    pub fn gauss_legendre(lo: f64, hi: f64, total_nodes: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Quadrature(format!(
                "invalid integration range [{lo}, {hi}]"
            )));
        }
        if total_nodes == 0 {
            return Err(Error::Quadrature("need a positive node count".into()));
        }
        let panels = total_nodes.div_ceil(PANEL_ORDER);
        let (ref_nodes, ref_weights) = legendre_rule(PANEL_ORDER);
        let width = (hi - lo) / panels as f64;
        let mut nodes = Vec::with_capacity(panels * PANEL_ORDER);
        let mut weights = Vec::with_capacity(panels * PANEL_ORDER);
        for p in 0..panels {
            let a = lo + p as f64 * width;
            let half = 0.5 * width;
            let mid = a + half;
            for (&t, &w) in ref_nodes.iter().zip(&ref_weights) {
                nodes.push(mid + half * t);
                weights.push(half * w);
            }
        }
        Ok(QuadratureGrid { nodes, weights })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on the
/// Legendre recurrence.
fn legendre_rule(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let n = order as f64;
    for i in 0..order.div_ceil(2) {
        // Chebyshev-like initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // evaluate P_n(x) and P_n'(x) by recurrence
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=order {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        weights[i] = w;
        nodes[order - 1 - i] = x;
        weights[order - 1 - i] = w;
    }
    (nodes, weights)
}
