//! Small shared numerics: an embedded Runge-Kutta 5(4) integrator, dense
//! linear least squares, a derivative-free minimizer, and quadrature helpers.

use crate::error::{Error, Result};

/// Dormand-Prince 5(4) adaptive integrator.
///
/// Propagates the 5th-order solution; the embedded 4th-order difference
/// drives the step controller. No drift renormalization of any kind is
/// performed on the state.
#[derive(Clone, Debug)]
pub struct AdaptiveRk {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for AdaptiveRk {
    fn default() -> Self {
        AdaptiveRk { rtol: 1e-10, atol: 1e-12, h_init: 1e-3, h_max: 0.25, max_steps: 200_000 }
    }
}

pub enum StepControl {
    Continue,
    Stop,
}

const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_B5: [f64; 7] =
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

impl AdaptiveRk {
    /// Integrate `y' = f(t, y)` from `t0` with initial state `y0`.
    ///
    /// The observer sees every accepted step (including the initial state)
    /// and can stop the run. Returns the number of accepted steps.
    pub fn integrate<F, O>(&self, t0: f64, y0: &[f64], mut f: F, mut observe: O) -> Result<usize>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
        O: FnMut(f64, &[f64]) -> StepControl,
    {
        let dim = y0.len();
        let mut t = t0;
        let mut y = y0.to_vec();
        let mut h = self.h_init.min(self.h_max);
        let mut k = vec![vec![0.0; dim]; 7];
        let mut y_stage = vec![0.0; dim];
        let mut y5 = vec![0.0; dim];
        let mut accepted = 0usize;

        if let StepControl::Stop = observe(t, &y) {
            return Ok(0);
        }

        for _attempt in 0..self.max_steps {
            for s in 0..7 {
                for i in 0..dim {
                    let mut acc = 0.0;
                    for (j, kj) in k.iter().enumerate().take(s) {
                        acc += DP_A[s][j] * kj[i];
                    }
                    y_stage[i] = y[i] + h * acc;
                }
                let ts = t + DP_C[s] * h;
                let (before, after) = k.split_at_mut(s);
                let _ = before;
                f(ts, if s == 0 { &y } else { &y_stage }, &mut after[0]);
            }
            let mut err: f64 = 0.0;
            for i in 0..dim {
                let mut acc5 = 0.0;
                let mut acc4 = 0.0;
                for (j, kj) in k.iter().enumerate() {
                    acc5 += DP_B5[j] * kj[i];
                    acc4 += DP_B4[j] * kj[i];
                }
                y5[i] = y[i] + h * acc5;
                let scale = self.atol + self.rtol * y[i].abs().max(y5[i].abs());
                let e = (h * (acc5 - acc4) / scale).abs();
                // A non-finite component (field poisoned a stage) must reject
                // the step; f64::max would silently drop a NaN here.
                if !e.is_finite() {
                    err = f64::INFINITY;
                    break;
                }
                err = err.max(e);
            }
            if err <= 1.0 {
                t += h;
                std::mem::swap(&mut y, &mut y5);
                accepted += 1;
                if let StepControl::Stop = observe(t, &y) {
                    return Ok(accepted);
                }
            }
            let factor = if err > 0.0 { 0.9 * err.powf(-0.2) } else { 5.0 };
            h *= factor.clamp(0.2, 5.0);
            h = h.min(self.h_max);
            if h.abs() < 1e-16 {
                return Err(Error::Numerical(format!("step size underflow at t = {t:.6}")));
            }
        }
        Err(Error::TrajectoryStalled { last_x: f64::NAN, steps: self.max_steps })
    }

    /// Integrate from `t0` to exactly `t1` (either direction), updating `y`
    /// in place. The final step is clamped to land on `t1`.
    pub fn integrate_to<F>(&self, t0: f64, t1: f64, y: &mut [f64], mut f: F) -> Result<usize>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        if t0 == t1 {
            return Ok(0);
        }
        let sign = (t1 - t0).signum();
        let span = (t1 - t0).abs();
        let dim = y.len();
        let mut s = 0.0;
        let mut h = self.h_init.min(self.h_max).min(span);
        let mut k = vec![vec![0.0; dim]; 7];
        let mut y_stage = vec![0.0; dim];
        let mut y5 = vec![0.0; dim];
        let mut accepted = 0usize;
        let mut eval = |s: f64, ys: &[f64], dys: &mut [f64]| {
            f(t0 + sign * s, ys, dys);
            if sign < 0.0 {
                for d in dys.iter_mut() {
                    *d = -*d;
                }
            }
        };

        for _attempt in 0..self.max_steps {
            h = h.min(span - s);
            for stage in 0..7 {
                for i in 0..dim {
                    let mut acc = 0.0;
                    for (j, kj) in k.iter().enumerate().take(stage) {
                        acc += DP_A[stage][j] * kj[i];
                    }
                    y_stage[i] = y[i] + h * acc;
                }
                let ss = s + DP_C[stage] * h;
                let (before, after) = k.split_at_mut(stage);
                let _ = before;
                eval(ss, if stage == 0 { &*y } else { &y_stage }, &mut after[0]);
            }
            let mut err: f64 = 0.0;
            for i in 0..dim {
                let mut acc5 = 0.0;
                let mut acc4 = 0.0;
                for (j, kj) in k.iter().enumerate() {
                    acc5 += DP_B5[j] * kj[i];
                    acc4 += DP_B4[j] * kj[i];
                }
                y5[i] = y[i] + h * acc5;
                let scale = self.atol + self.rtol * y[i].abs().max(y5[i].abs());
                let e = (h * (acc5 - acc4) / scale).abs();
                if !e.is_finite() {
                    err = f64::INFINITY;
                    break;
                }
                err = err.max(e);
            }
            if err <= 1.0 {
                s += h;
                y.copy_from_slice(&y5);
                accepted += 1;
                if s >= span - 1e-300 || (span - s) < 1e-14 * span {
                    return Ok(accepted);
                }
            }
            let factor = if err > 0.0 { 0.9 * err.powf(-0.2) } else { 5.0 };
            h *= factor.clamp(0.2, 5.0);
            h = h.min(self.h_max);
            if h.abs() < 1e-16 {
                return Err(Error::Numerical(format!(
                    "step size underflow at t = {:.6}",
                    t0 + sign * s
                )));
            }
        }
        Err(Error::TrajectoryStalled { last_x: f64::NAN, steps: self.max_steps })
    }
}

/// Solve the dense linear system `A x = b` by Gaussian elimination with
/// partial pivoting. `a` is row-major `n x n`.
pub fn solve_dense(a: &mut [f64], b: &mut [f64], n: usize) -> Result<Vec<f64>> {
    assert_eq!(a.len(), n * n);
    assert_eq!(b.len(), n);
    for col in 0..n {
        let mut piv = col;
        for row in col + 1..n {
            if a[row * n + col].abs() > a[piv * n + col].abs() {
                piv = row;
            }
        }
        if a[piv * n + col].abs() < 1e-300 {
            return Err(Error::Numerical("singular linear system".into()));
        }
        if piv != col {
            for j in 0..n {
                a.swap(col * n + j, piv * n + j);
            }
            b.swap(col, piv);
        }
        let d = a[col * n + col];
        for row in col + 1..n {
            let m = a[row * n + col] / d;
            if m == 0.0 {
                continue;
            }
            for j in col..n {
                a[row * n + j] -= m * a[col * n + j];
            }
            b[row] -= m * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for j in row + 1..n {
            acc -= a[row * n + j] * x[j];
        }
        x[row] = acc / a[row * n + row];
    }
    Ok(x)
}

/// Least squares `min ||D c - y||` for a design matrix with `cols` columns
/// (row-major, `rows >= cols`), via the normal equations. Returns the
/// coefficients and the residual sum of squares.
pub fn least_squares(design: &[f64], y: &[f64], rows: usize, cols: usize) -> Result<(Vec<f64>, f64)> {
    assert_eq!(design.len(), rows * cols);
    assert_eq!(y.len(), rows);
    let mut ata = vec![0.0; cols * cols];
    let mut aty = vec![0.0; cols];
    for r in 0..rows {
        for i in 0..cols {
            let di = design[r * cols + i];
            aty[i] += di * y[r];
            for j in 0..cols {
                ata[i * cols + j] += di * design[r * cols + j];
            }
        }
    }
    let coef = solve_dense(&mut ata, &mut aty, cols)?;
    let mut rss = 0.0;
    for r in 0..rows {
        let mut pred = 0.0;
        for i in 0..cols {
            pred += design[r * cols + i] * coef[i];
        }
        rss += (y[r] - pred) * (y[r] - pred);
    }
    Ok((coef, rss))
}

/// Fit `log|y| = intercept + slope * log x` over strictly positive samples.
/// Returns `(slope, intercept, max abs residual in log space)`.
pub fn fit_log_log(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    assert_eq!(xs.len(), ys.len());
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && y.abs() > 0.0)
        .map(|(x, y)| (x.ln(), y.abs().ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Numerical("too few usable samples for a log-log fit".into()));
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let det = n * sxx - sx * sx;
    if det.abs() < 1e-30 {
        return Err(Error::Numerical("degenerate abscissas in log-log fit".into()));
    }
    let slope = (n * sxy - sx * sy) / det;
    let intercept = (sy - slope * sx) / n;
    let max_resid = pts
        .iter()
        .map(|(x, y)| (y - intercept - slope * x).abs())
        .fold(0.0f64, f64::max);
    Ok((slope, intercept, max_resid))
}

/// Nelder-Mead simplex minimizer for small dimensions.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    scale: f64,
    iterations: usize,
) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += scale;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    for _ in 0..iterations {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
        let best = order[0];
        let worst = order[n];
        let second_worst = order[n - 1];
        if (values[worst] - values[best]).abs()
            <= 1e-14 * (1.0 + values[best].abs())
        {
            break;
        }
        let mut centroid = vec![0.0; n];
        for &i in order.iter().take(n) {
            for d in 0..n {
                centroid[d] += simplex[i][d] / n as f64;
            }
        }
        let reflect: Vec<f64> =
            (0..n).map(|d| centroid[d] + (centroid[d] - simplex[worst][d])).collect();
        let f_reflect = f(&reflect);
        if f_reflect < values[best] {
            let expand: Vec<f64> =
                (0..n).map(|d| centroid[d] + 2.0 * (centroid[d] - simplex[worst][d])).collect();
            let f_expand = f(&expand);
            if f_expand < f_reflect {
                simplex[worst] = expand;
                values[worst] = f_expand;
            } else {
                simplex[worst] = reflect;
                values[worst] = f_reflect;
            }
        } else if f_reflect < values[second_worst] {
            simplex[worst] = reflect;
            values[worst] = f_reflect;
        } else {
            let contract: Vec<f64> =
                (0..n).map(|d| centroid[d] + 0.5 * (simplex[worst][d] - centroid[d])).collect();
            let f_contract = f(&contract);
            if f_contract < values[worst] {
                simplex[worst] = contract;
                values[worst] = f_contract;
            } else {
                let best_point = simplex[best].clone();
                for i in 0..=n {
                    if i == best {
                        continue;
                    }
                    for d in 0..n {
                        simplex[i][d] = best_point[d] + 0.5 * (simplex[i][d] - best_point[d]);
                    }
                    values[i] = f(&simplex[i]);
                }
            }
        }
    }
    let mut best = 0;
    for i in 1..=n {
        if values[i] < values[best] {
            best = i;
        }
    }
    (simplex[best].clone(), values[best])
}

/// Cumulative trapezoid integral of `y` over abscissas `x`, starting at 0.
pub fn cumulative_trapezoid(x: &[f64], y: &[f64]) -> Vec<f64> {
    assert_eq!(x.len(), y.len());
    let mut out = Vec::with_capacity(x.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..x.len() {
        acc += 0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1]);
        out.push(acc);
    }
    out
}

/// Cumulative integral of `y` over possibly non-uniform abscissas `x` by
/// integrating the interpolating parabola through each point and its two
/// neighbors over the trailing subinterval. Third-order accurate; needs at
/// least three points.
pub fn cumulative_simpson(x: &[f64], y: &[f64]) -> Vec<f64> {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    if n < 3 {
        return cumulative_trapezoid(x, y);
    }
    let mut out = Vec::with_capacity(n);
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..n {
        // Parabola through (x[j-1], x[j], x[j+1]) integrated over
        // [x[i-1], x[i]], where j = i-1 except at the left edge.
        let j = if i == 1 { 1 } else { i - 1 }.min(n - 2);
        let (x0, x1, x2) = (x[j - 1], x[j], x[j + 1]);
        let (y0, y1, y2) = (y[j - 1], y[j], y[j + 1]);
        // Simpson on [x[i-1], x[i]] is exact for each quadratic Lagrange basis.
        let int_quad = |l: &dyn Fn(f64) -> f64| -> f64 {
            let (a, b) = (x[i - 1], x[i]);
            (b - a) / 6.0 * (l(a) + 4.0 * l(0.5 * (a + b)) + l(b))
        };
        acc += int_quad(&|t| (t - x1) * (t - x2)) * y0 / ((x0 - x1) * (x0 - x2))
            + int_quad(&|t| (t - x0) * (t - x2)) * y1 / ((x1 - x0) * (x1 - x2))
            + int_quad(&|t| (t - x0) * (t - x1)) * y2 / ((x2 - x0) * (x2 - x1));
        out.push(acc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rk_integrates_exponential() {
        let rk = AdaptiveRk::default();
        let mut last = (0.0, vec![1.0]);
        rk.integrate(
            0.0,
            &[1.0],
            |_t, y, dy| dy[0] = -y[0],
            |t, y| {
                last = (t, y.to_vec());
                if t >= 2.0 {
                    StepControl::Stop
                } else {
                    StepControl::Continue
                }
            },
        )
        .unwrap();
        assert!(last.0 >= 2.0);
        assert!((last.1[0] - (-last.0).exp()).abs() < 1e-9);
    }

    #[test]
    fn rk_harmonic_oscillator_energy() {
        let rk = AdaptiveRk { rtol: 1e-11, atol: 1e-13, ..Default::default() };
        let mut worst = 0.0f64;
        rk.integrate(
            0.0,
            &[1.0, 0.0],
            |_t, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            |t, y| {
                let e = y[0] * y[0] + y[1] * y[1];
                worst = worst.max((e - 1.0).abs());
                if t >= 20.0 {
                    StepControl::Stop
                } else {
                    StepControl::Continue
                }
            },
        )
        .unwrap();
        assert!(worst < 1e-8, "energy drift {worst:.3e}");
    }

    #[test]
    fn least_squares_recovers_plane() {
        // y = 2 + 3 a - b
        let mut design = Vec::new();
        let mut ys = Vec::new();
        for i in 0..20 {
            let a = i as f64 * 0.1;
            let b = (i as f64 * 0.37).sin();
            design.extend_from_slice(&[1.0, a, b]);
            ys.push(2.0 + 3.0 * a - b);
        }
        let (c, rss) = least_squares(&design, &ys, 20, 3).unwrap();
        assert!((c[0] - 2.0).abs() < 1e-10);
        assert!((c[1] - 3.0).abs() < 1e-10);
        assert!((c[2] + 1.0).abs() < 1e-10);
        assert!(rss < 1e-18);
    }

    #[test]
    fn log_log_fit_recovers_power() {
        let xs: Vec<f64> = (1..40).map(|i| 1e-3 * 1.2f64.powi(i)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 4.0 * x.powf(-0.17)).collect();
        let (slope, _ic, resid) = fit_log_log(&xs, &ys).unwrap();
        assert!((slope + 0.17).abs() < 1e-12);
        assert!(resid < 1e-12);
    }

    #[test]
    fn nelder_mead_minimizes_quadratic() {
        let (x, v) = nelder_mead(
            |p| (p[0] - 1.5).powi(2) + 4.0 * (p[1] + 0.5).powi(2),
            &[0.0, 0.0],
            0.5,
            400,
        );
        assert!(v < 1e-16);
        assert!((x[0] - 1.5).abs() < 1e-7);
        assert!((x[1] + 0.5).abs() < 1e-7);
    }
}
