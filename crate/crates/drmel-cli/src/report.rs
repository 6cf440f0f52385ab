//! Rendering of fit, quantile, and interval results as aligned text or flat
//! delimited records. Numbers carry six significant digits.

use drmel::fmt::sig6;
use drmel::{Analysis, QuantileMethod};
use crate::CliResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutFormat {
    Text,
    Records,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuantileSide {
    El,
    Em,
    Both,
}

fn method_name(m: QuantileMethod) -> &'static str {
    match m {
        QuantileMethod::El => "el",
        QuantileMethod::Em => "em",
    }
}

pub fn render_fit(analysis: &Analysis, format: OutFormat) -> String {
    let fit = analysis.fit();
    let theta = fit.theta_hat();
    match format {
        OutFormat::Records => {
            let mut out = String::from("population,component,theta\n");
            for r in 0..theta.m() {
                for j in 0..theta.d() {
                    out.push_str(&format!("{},{},{}\n", r + 1, j, sig6(theta.get(r, j))));
                }
            }
            out
        }
        OutFormat::Text => {
            let conv = fit.convergence();
            let mut out = String::new();
            out.push_str(&format!(
                "populations: {} (m = {}), sizes: {:?}, total n = {}\n",
                fit.n_populations(),
                theta.m(),
                fit.sizes(),
                fit.n()
            ));
            out.push_str(&format!(
                "log-likelihood: {}  iterations: {}  gradient norm: {}\n",
                sig6(fit.loglik()),
                conv.iterations,
                sig6(conv.grad_norm)
            ));
            out.push_str("theta_hat (one row per non-baseline population):\n");
            for r in 0..theta.m() {
                let row: Vec<String> = (0..theta.d()).map(|j| sig6(theta.get(r, j))).collect();
                out.push_str(&format!("  population {}: [{}]\n", r + 1, row.join(", ")));
            }
            out
        }
    }
}

pub fn render_quantiles(
    analysis: &Analysis,
    levels: &[f64],
    side: QuantileSide,
    format: OutFormat,
) -> CliResult<String> {
    let m1 = analysis.data().n_populations();
    let mut rows: Vec<(usize, f64, QuantileMethod, f64)> = Vec::new();
    for r in 0..m1 {
        for &alpha in levels {
            if matches!(side, QuantileSide::El | QuantileSide::Both) {
                let q = analysis.el_quantile(r, alpha)?;
                rows.push((r, alpha, q.method, q.value));
            }
            if matches!(side, QuantileSide::Em | QuantileSide::Both) {
                let q = analysis.em_quantile(r, alpha)?;
                rows.push((r, alpha, q.method, q.value));
            }
        }
    }
    let mut out = String::new();
    match format {
        OutFormat::Records => {
            out.push_str("population,level,method,estimate\n");
            for (r, alpha, method, value) in rows {
                out.push_str(&format!(
                    "{r},{},{},{}\n",
                    sig6(alpha),
                    method_name(method),
                    sig6(value)
                ));
            }
        }
        OutFormat::Text => {
            out.push_str(&format!(
                "{:>10} {:>8} {:>6} {:>12}\n",
                "population", "level", "method", "estimate"
            ));
            for (r, alpha, method, value) in rows {
                out.push_str(&format!(
                    "{r:>10} {:>8} {:>6} {:>12}\n",
                    sig6(alpha),
                    method_name(method),
                    sig6(value)
                ));
            }
        }
    }
    Ok(out)
}

/// Point/low/high series per level, for quantile or quantile-difference
/// targets; ready for plotting as bands.
pub fn render_cis(
    analysis: &Analysis,
    levels: &[f64],
    conf: f64,
    diff: Option<(usize, usize)>,
    format: OutFormat,
) -> CliResult<String> {
    struct Row {
        target: String,
        level: f64,
        method: &'static str,
        point: f64,
        lo: f64,
        hi: f64,
        variance: f64,
    }
    let mut rows: Vec<Row> = Vec::new();
    match diff {
        Some((r, s)) => {
            for &alpha in levels {
                let el = analysis.el_diff_ci(r, alpha, s, alpha, conf)?;
                let em = analysis.em_diff_ci(r, alpha, s, alpha, conf)?;
                for (method, ci) in [("el", el), ("em", em)] {
                    rows.push(Row {
                        target: format!("{r}-{s}"),
                        level: alpha,
                        method,
                        point: ci.point,
                        lo: ci.lo,
                        hi: ci.hi,
                        variance: ci.variance,
                    });
                }
            }
        }
        None => {
            let m1 = analysis.data().n_populations();
            for r in 0..m1 {
                for &alpha in levels {
                    let el = analysis.el_ci(r, alpha, conf)?;
                    let em = analysis.em_ci(r, alpha, conf)?;
                    for (method, ci) in [("el", el), ("em", em)] {
                        rows.push(Row {
                            target: r.to_string(),
                            level: alpha,
                            method,
                            point: ci.point,
                            lo: ci.lo,
                            hi: ci.hi,
                            variance: ci.variance,
                        });
                    }
                }
            }
        }
    }
    let mut out = String::new();
    match format {
        OutFormat::Records => {
            out.push_str("target,level,method,point,lo,hi,variance\n");
            for row in rows {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    row.target,
                    sig6(row.level),
                    row.method,
                    sig6(row.point),
                    sig6(row.lo),
                    sig6(row.hi),
                    sig6(row.variance)
                ));
            }
        }
        OutFormat::Text => {
            out.push_str(&format!(
                "confidence level: {}\n{:>8} {:>8} {:>6} {:>12} {:>12} {:>12}\n",
                sig6(conf),
                "target",
                "level",
                "method",
                "point",
                "lo",
                "hi"
            ));
            for row in rows {
                out.push_str(&format!(
                    "{:>8} {:>8} {:>6} {:>12} {:>12} {:>12}\n",
                    row.target,
                    sig6(row.level),
                    row.method,
                    sig6(row.point),
                    sig6(row.lo),
                    sig6(row.hi)
                ));
            }
        }
    }
    Ok(out)
}
