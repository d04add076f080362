//! Small least-squares and 1-d minimization helpers shared by the
//! exponent-extraction code paths (half-space synthesis and the de Sitter
//! PDE solve). Channel models are linear in amplitudes, so nonlinear
//! exponent searches project the amplitudes out (variable projection) and
//! minimize the projected SSR.

use crate::error::Result;

/// Least squares of `y` on `(1, x)`; returns `(slope, intercept)`.
pub(crate) fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Least squares of `y` on the given columns, solved through unit-norm
/// column scaling. Returns coefficients in original units and the SSR.
pub(crate) fn lsq_fit(columns: &[Vec<f64>], y: &[f64]) -> Result<(Vec<f64>, f64)> {
    let m = columns.len();
    let n = y.len();
    let norms: Vec<f64> = columns
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300))
        .collect();
    let mut ata = vec![0.0f64; m * m];
    let mut atb = vec![0.0f64; m];
    for i in 0..m {
        for j in 0..m {
            ata[i * m + j] =
                (0..n).map(|r| columns[i][r] * columns[j][r]).sum::<f64>() / (norms[i] * norms[j]);
        }
        atb[i] = (0..n).map(|r| columns[i][r] * y[r]).sum::<f64>() / norms[i];
    }
    let mut coef = crate::util::solve_dense(&mut ata, &mut atb, m)?;
    for (c, nm) in coef.iter_mut().zip(&norms) {
        *c /= nm;
    }
    let ssr = (0..n)
        .map(|r| {
            let fitted: f64 = (0..m).map(|i| coef[i] * columns[i][r]).sum();
            let d = y[r] - fitted;
            d * d
        })
        .sum();
    Ok((coef, ssr))
}

pub(crate) fn power_column(sv: &[f64], e: f64) -> Vec<f64> {
    sv.iter().map(|&s| s.powf(e)).collect()
}

/// SSR of the best linear combination of the given power channels
/// (variable projection: amplitudes are solved exactly per exponent set).
pub(crate) fn projected_ssr(sv: &[f64], uv: &[f64], exps: &[f64]) -> f64 {
    let cols: Vec<Vec<f64>> = exps.iter().map(|&e| power_column(sv, e)).collect();
    match lsq_fit(&cols, uv) {
        Ok((_, ssr)) => ssr,
        Err(_) => f64::INFINITY,
    }
}

/// Golden-section minimizer on `[lo, hi]`.
pub(crate) fn golden_min(mut lo: f64, mut hi: f64, iters: usize, f: impl Fn(f64) -> f64) -> f64 {
    let phi = 0.5 * (5.0f64.sqrt() - 1.0);
    let mut a = hi - phi * (hi - lo);
    let mut b = lo + phi * (hi - lo);
    let mut fa = f(a);
    let mut fb = f(b);
    for _ in 0..iters {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - phi * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + phi * (hi - lo);
            fb = f(b);
        }
    }
    0.5 * (lo + hi)
}

/// `1.96 sigma` half-widths for the channel model, from the Gauss-Newton
/// covariance `sigma^2 (J^T J)^{-1}` at the optimum. One column of `jac`
/// per parameter; singular information yields infinite half-widths.
pub(crate) fn fit_half_widths(jac: &[Vec<f64>], ssr: f64, n_pts: usize) -> Vec<f64> {
    let m = jac.len();
    let dof = (n_pts as f64 - m as f64).max(1.0);
    let sigma2 = ssr / dof;
    let norms: Vec<f64> = jac
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300))
        .collect();
    let ata: Vec<f64> = (0..m * m)
        .map(|idx| {
            let (i, j) = (idx / m, idx % m);
            (0..n_pts).map(|r| jac[i][r] * jac[j][r]).sum::<f64>() / (norms[i] * norms[j])
        })
        .collect();
    (0..m)
        .map(|i| {
            let mut a = ata.clone();
            let mut e = vec![0.0f64; m];
            e[i] = 1.0;
            match crate::util::solve_dense(&mut a, &mut e, m) {
                Ok(x) if x[i] > 0.0 => 1.96 * (sigma2 * x[i]).sqrt() / norms[i],
                _ => f64::INFINITY,
            }
        })
        .collect()
}
