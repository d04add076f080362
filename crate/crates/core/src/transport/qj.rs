//! The light-cone-face normal operators `Q_j` in both projective charts,
//! their indicial data, and a variation-of-parameters solver for flat
//! forcing.
//!
//! In the chart `(s, w)` with `w` a scaled defining function of the cone,
//! the level-`j` operator reads
//!
//! ```text
//! Q_j = (-(d_s rho) + w) w d²/dw² - ((d_s rho)(n + 1/2 - 2 g_j) - (n + 1/2) w) d/dw
//!       - (n - 1 - g_j) g_j - (1/2)(n - 1/2) - lambda,        g_j = j - k - 1/4,
//! ```
//!
//! with indicial roots `0` and `2j - 2k - n` at `w = 0`. In the chart
//! `(rho, W = 1/w)` valid up to the side face the same operator becomes
//!
//! ```text
//! Q_j = (1 - q2 W) W² d²/dW² - (n - 2 + q1 W) W d/dW - (lambda + q0 W),
//! ```
//!
//! whose indicial roots at `W = 0` are the indicial roots `s±(lambda)` of
//! the ambient operator. The geometric samples `d_s rho`, `g(d rho, d rho)`
//! and `|d_z rho|²` are frozen constants here; position-dependent couplings
//! belong in the forcing.

use crate::error::{Error, Result};
use crate::exact::{characteristic_roots_rational, CharacteristicRoots};
use crate::util::{cumulative_simpson, fit_log_log, AdaptiveRk};
use num_rational::Rational64;

/// Indicial roots of the cone-face operator at the cone (`w`-chart):
/// always `(0, 2j - 2k - n)`.
pub fn indicial_roots_newface(j: i64, k: i64, n: u32) -> (i64, i64) {
    (0, 2 * (j - k) - n as i64)
}

/// Exact indicial roots `s±(lambda) = (n-1)/2 ± sqrt((n-1)²/4 + lambda)` of
/// the side-face form, with the integer-coincidence flag.
pub type SideRoots = CharacteristicRoots;

pub fn indicial_roots_side(n: u32, lambda: Rational64) -> SideRoots {
    characteristic_roots_rational(n, lambda)
}

/// Constants multiplying the symbol in the first-order transport terms when
/// the operator acts on a conormal ansatz: the operator acting on the left
/// factor produces `n - 3 - 2 g`, its transpose on the right factor
/// `n + 3 + 2 g`. Both are implemented exactly as stated; the asymmetry
/// encodes the transposition and the density convention.
pub fn conormal_transport_constants(n: u32, gamma: f64) -> (f64, f64) {
    (n as f64 - 3.0 - 2.0 * gamma, n as f64 + 3.0 + 2.0 * gamma)
}

#[derive(Clone, Debug)]
pub struct QjOperator {
    pub n: u32,
    pub lambda: f64,
    pub j: u32,
    pub k: i64,
    /// Frozen sample of `d rho / d s` on the face; 1 in the model.
    pub d_s_rho: f64,
    /// Frozen sample of `g(d rho, d rho)`; 0 on the characteristic cone.
    pub g_drho_drho: f64,
    /// Frozen sample of `|d_z rho|²_h`; 0 in the model.
    pub dz_rho_sq: f64,
}

impl QjOperator {
    /// Model-case operator: unit slope defining function, exactly
    /// characteristic cone.
    pub fn model(n: u32, lambda: f64, j: u32, k: i64) -> Self {
        QjOperator { n, lambda, j, k, d_s_rho: 1.0, g_drho_drho: 0.0, dz_rho_sq: 0.0 }
    }

    pub fn gamma(&self) -> f64 {
        self.j as f64 - self.k as f64 - 0.25
    }

    /// Coefficients `[p2, p1, p0]` of `Q_j = p2 d² + p1 d + p0` in the
    /// `w`-chart.
    pub fn w_coefficients(&self, w: f64) -> [f64; 3] {
        let nf = self.n as f64;
        let c1 = self.d_s_rho;
        let g = self.gamma();
        let p2 = (-c1 + w) * w;
        let p1 = -(c1 * (nf + 0.5 - 2.0 * g) - (nf + 0.5) * w);
        let p0 = -(nf - 1.0 - g) * g - 0.5 * (nf - 0.5) - self.lambda;
        [p2, p1, p0]
    }

    pub fn apply_w(&self, u: f64, du: f64, d2u: f64, w: f64) -> f64 {
        let [p2, p1, p0] = self.w_coefficients(w);
        p2 * d2u + p1 * du + p0 * u
    }

    /// Indicial roots at `w = 0` computed from the frozen coefficients (not
    /// from the closed formula): `p2 ~ P2 w`, `p1(0) = P1` give the indicial
    /// polynomial `P2 m(m-1) + P1 m`.
    pub fn indicial_roots_w(&self) -> (f64, f64) {
        let h = 1e-6;
        let p2_slope = self.w_coefficients(h)[0] / h;
        // Remove the O(h) part of p2/w exactly: p2 = (-c1 + w) w.
        let p2_lin = 2.0 * p2_slope - self.w_coefficients(2.0 * h)[0] / (2.0 * h);
        let p1_0 = self.w_coefficients(0.0)[1];
        (0.0, 1.0 - p1_0 / p2_lin)
    }

    pub fn q2(&self, bw: f64) -> f64 {
        2.0 * self.d_s_rho - self.d_s_rho * self.d_s_rho * bw + self.dz_rho_sq * bw
    }

    pub fn q1(&self, bw: f64) -> f64 {
        let g = self.gamma();
        -(self.n as f64 + 2.0 * g - 4.0) * self.d_s_rho
            + (2.0 * g - 2.0) * self.g_drho_drho * bw
    }

    pub fn q0(&self, bw: f64) -> f64 {
        let g = self.gamma();
        (self.n as f64 - 2.0) * g * self.d_s_rho - g * (g - 1.0) * self.g_drho_drho * bw
    }

    /// Coefficients `[a2, a1, a0]` of `Q_j = a2 d² + a1 d + a0` in the
    /// side-face chart `W = 1/w`.
    pub fn bigw_coefficients(&self, bw: f64) -> [f64; 3] {
        let nf = self.n as f64;
        let a2 = (1.0 - self.q2(bw) * bw) * bw * bw;
        let a1 = -(nf - 2.0 + self.q1(bw) * bw) * bw;
        let a0 = -(self.lambda + self.q0(bw) * bw);
        [a2, a1, a0]
    }

    /// Indicial roots at `W = 0` from the frozen coefficients; fails when
    /// the discriminant is negative.
    pub fn indicial_roots_bigw(&self) -> Result<(f64, f64)> {
        // a2 ~ W², a1 ~ A1 W, a0(0): indicial m(m-1) + A1 m + A0.
        let h = 1e-7;
        let a1_lin = self.bigw_coefficients(h)[1] / h;
        let a1_0 = 2.0 * a1_lin - self.bigw_coefficients(2.0 * h)[1] / (2.0 * h);
        let a0 = self.bigw_coefficients(0.0)[2];
        let b = a1_0 - 1.0;
        let disc = b * b - 4.0 * a0;
        if disc < 0.0 {
            return Err(Error::ComplexIndicialRoots { disc });
        }
        let r1 = (-b - disc.sqrt()) / 2.0;
        let r2 = (-b + disc.sqrt()) / 2.0;
        Ok((r1, r2))
    }
}

/// Strictly increasing positive sample points for the `w`-chart solver.
#[derive(Clone, Debug)]
pub struct QjGrid {
    pub w: Vec<f64>,
}

impl QjGrid {
    pub fn log_spaced(w_min: f64, w_max: f64, n: usize) -> Self {
        assert!(w_min > 0.0 && w_max > w_min && n >= 2);
        let l0 = w_min.ln();
        let l1 = w_max.ln();
        let w = (0..n)
            .map(|i| (l0 + (l1 - l0) * i as f64 / (n - 1) as f64).exp())
            .collect();
        QjGrid { w }
    }
}

#[derive(Clone, Debug)]
pub struct QjFlatSolution {
    pub w: Vec<f64>,
    pub u: Vec<f64>,
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
    pub wronskian: Vec<f64>,
    /// Log-log slope of `|u|` over the first decade of the grid.
    pub fitted_flatness: Option<f64>,
    /// Indicial roots `(0, mu2)` used for the fundamental system.
    pub mu: (f64, f64),
}

const WRONSKIAN_FLOOR: f64 = 1e-280;

/// Solve `Q_j u = r` for forcing flat at `w = 0`, by variation of
/// parameters over a numerically constructed fundamental system: a
/// Frobenius series from the upper indicial root and a second solution
/// integrated from the matching point `w = 1/2` in both directions. Both
/// quadratures start at 0, which pins the unique solution flat at the cone.
pub fn solve_qj_flat<F: Fn(f64) -> f64>(
    q: &QjOperator,
    forcing: F,
    grid: &QjGrid,
    declared_flatness: u32,
) -> Result<QjFlatSolution> {
    let w = &grid.w;
    let npts = w.len();
    if npts < 16 {
        return Err(Error::Validation("grid too coarse for the flat solver (need >= 16 points)".into()));
    }
    if w[0] <= 0.0 || w.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::Validation("grid must be strictly increasing and positive".into()));
    }
    if w[npts - 1] >= q.d_s_rho - 0.05 {
        return Err(Error::Domain(format!(
            "grid reaches {} but the w-chart is singular at w = d_s_rho = {}",
            w[npts - 1],
            q.d_s_rho
        )));
    }
    if declared_flatness < 6 {
        return Err(Error::Validation(format!(
            "declared flatness order {declared_flatness} is below the required 6"
        )));
    }

    let r: Vec<f64> = w.iter().map(|&wi| forcing(wi)).collect();
    let r_max = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mu = q.indicial_roots_w();
    if r_max == 0.0 {
        return Ok(QjFlatSolution {
            w: w.clone(),
            u: vec![0.0; npts],
            v1: vec![0.0; npts],
            v2: vec![0.0; npts],
            wronskian: vec![0.0; npts],
            fitted_flatness: None,
            mu,
        });
    }

    // Flatness admission: over the first decade the forcing must decay at
    // least at the declared rate.
    let decade_end = w.iter().position(|&wi| wi > w[0] * 10.0).unwrap_or(npts);
    let window = &r[..decade_end];
    if window.iter().any(|v| v.abs() > r_max * 1e-280) {
        let (slope, _, _) = fit_log_log(&w[..decade_end], window)?;
        if slope < declared_flatness as f64 - 0.5 {
            return Err(Error::Validation(format!(
                "forcing decays like w^{slope:.2} on the first decade, below the declared \
                 flatness order {declared_flatness}"
            )));
        }
    }

    // Frobenius solution from the upper indicial root: no further root of
    // the indicial polynomial lies above it, so the recursion never divides
    // by zero.
    let mu_top = if mu.1 > 0.0 { mu.1 } else { 0.0 };
    let c1 = q.d_s_rho;
    let nf = q.n as f64;
    let g = q.gamma();
    let beta = nf + 0.5 - 2.0 * g;
    let ghat = nf + 0.5;
    let p0 = q.w_coefficients(0.0)[2];
    let indicial = |m: f64| -c1 * m * (m - 1.0) - c1 * beta * m;
    let regular = |m: f64| m * (m - 1.0) + ghat * m + p0;
    let w_max = w[npts - 1];
    let mut coeff = vec![1.0f64];
    let mut scale_max = w_max.powf(mu_top);
    for m in 0..600 {
        let mf = mu_top + m as f64;
        let next = -regular(mf) * coeff[m] / indicial(mf + 1.0);
        coeff.push(next);
        let term = next.abs() * w_max.powf(mu_top + m as f64 + 1.0);
        scale_max = scale_max.max(term);
        if term < 1e-18 * scale_max && m > 8 {
            break;
        }
    }
    let eval_v1 = |wi: f64| -> (f64, f64) {
        let mut v = 0.0;
        let mut dv = 0.0;
        // Horner from the top in w.
        for (m, &c) in coeff.iter().enumerate().rev() {
            let e = mu_top + m as f64;
            v = v * wi + c;
            dv = dv * wi + c * e;
        }
        let head = wi.powf(mu_top);
        (v * head, dv * head / wi)
    };
    let mut v1 = vec![0.0; npts];
    let mut dv1 = vec![0.0; npts];
    for i in 0..npts {
        let (v, dv) = eval_v1(w[i]);
        v1[i] = v;
        dv1[i] = dv;
    }

    // Second solution by adaptive integration from the matching point.
    let i0 = w
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - 0.5).abs().total_cmp(&(b.1 - 0.5).abs()))
        .map(|(i, _)| i)
        .unwrap();
    let mut v2 = vec![0.0; npts];
    let mut dv2 = vec![0.0; npts];
    v2[i0] = 0.0;
    dv2[i0] = 1.0;
    let rk = AdaptiveRk { rtol: 1e-11, atol: 1e-30, ..AdaptiveRk::default() };
    let rhs = |wi: f64, y: &[f64], dy: &mut [f64]| {
        let [p2, p1, p0] = q.w_coefficients(wi);
        dy[0] = y[1];
        dy[1] = -(p1 * y[1] + p0 * y[0]) / p2;
    };
    let mut state = [v2[i0], dv2[i0]];
    for i in (0..i0).rev() {
        rk.integrate_to(w[i + 1], w[i], &mut state, rhs)?;
        v2[i] = state[0];
        dv2[i] = state[1];
    }
    state = [v2[i0], dv2[i0]];
    for i in i0 + 1..npts {
        rk.integrate_to(w[i - 1], w[i], &mut state, rhs)?;
        v2[i] = state[0];
        dv2[i] = state[1];
    }

    let wronskian: Vec<f64> = (0..npts).map(|i| v1[i] * dv2[i] - dv1[i] * v2[i]).collect();

    // Variation of parameters, integrating in log w (the grid is positive,
    // so the substitution is exact and well conditioned near 0).
    let lnw: Vec<f64> = w.iter().map(|wi| wi.ln()).collect();
    let mut f1 = vec![0.0; npts];
    let mut f2 = vec![0.0; npts];
    for i in 0..npts {
        let p2 = q.w_coefficients(w[i])[0];
        let denom = p2 * wronskian[i];
        if denom.abs() < WRONSKIAN_FLOOR {
            return Err(Error::WronskianUnderflow {
                value: denom,
                floor: WRONSKIAN_FLOOR,
                w: w[i],
            });
        }
        f1[i] = v2[i] * r[i] / denom * w[i];
        f2[i] = v1[i] * r[i] / denom * w[i];
    }
    let i1 = cumulative_simpson(&lnw, &f1);
    let i2 = cumulative_simpson(&lnw, &f2);
    let u: Vec<f64> = (0..npts).map(|i| -v1[i] * i1[i] + v2[i] * i2[i]).collect();

    let u_window: Vec<f64> = u[..decade_end].to_vec();
    let fitted_flatness = fit_log_log(&w[..decade_end], &u_window)
        .ok()
        .map(|(slope, _, _)| slope);

    Ok(QjFlatSolution { w: w.clone(), u, v1, v2, wronskian, fitted_flatness, mu })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::Exponent;
    use approx::assert_relative_eq;

    #[test]
    fn printed_newface_roots() {
        assert_eq!(indicial_roots_newface(0, 0, 4), (0, -4));
        assert_eq!(indicial_roots_newface(3, 3, 6), (0, -6));
        assert_eq!(indicial_roots_newface(3, 0, 4), (0, 2));
    }

    #[test]
    fn side_roots_examples() {
        let r = indicial_roots_side(4, Rational64::from_integer(0));
        assert!(r.s_minus.same(&Exponent::from_integer(0)));
        assert!(r.s_plus.same(&Exponent::from_integer(3)));
        assert_eq!(r.integer_coincidence, Some(3));

        let r = indicial_roots_side(4, Rational64::from_integer(-2));
        assert!(r.s_minus.same(&Exponent::from_integer(1)));
        assert!(r.s_plus.same(&Exponent::from_integer(2)));
        assert_eq!(r.integer_coincidence, Some(1));

        let r = indicial_roots_side(2, Rational64::new(1, 5));
        assert_relative_eq!(r.s_minus.re_f64(), -0.17082039324993692, epsilon = 1e-12);
        assert_relative_eq!(r.s_plus.re_f64(), 1.170820393249937, epsilon = 1e-12);
        assert_eq!(r.integer_coincidence, None);
    }

    #[test]
    fn frozen_coefficients_reproduce_printed_roots() {
        for (n, lambda, j, k) in [
            (4u32, 0.0, 0u32, 0i64),
            (4, 0.0, 3, 0),
            (2, 0.0, 0, 0),
            (6, -1.5, 2, 1),
            (3, 0.75, 1, -1),
        ] {
            let q = QjOperator::model(n, lambda, j, k);
            let (m1, m2) = q.indicial_roots_w();
            let (e1, e2) = indicial_roots_newface(j as i64, k, n);
            assert!((m1 - e1 as f64).abs() < 1e-12, "mu1 mismatch for {n},{lambda},{j},{k}");
            assert!(
                (m2 - e2 as f64).abs() < 1e-6,
                "mu2 {m2} vs printed {e2} for {n},{lambda},{j},{k}"
            );
        }
    }

    #[test]
    fn sideface_chart_roots_are_characteristic_roots() {
        for (n, lambda) in [(4u32, 0.0), (2, 0.2), (3, -0.9), (5, 2.5)] {
            let q = QjOperator::model(n, lambda, 2, 0);
            let (r1, r2) = q.indicial_roots_bigw().unwrap();
            let exact = crate::exact::characteristic_roots_f64(n, lambda);
            assert_relative_eq!(r1, exact.0, epsilon = 1e-6);
            assert_relative_eq!(r2, exact.1, epsilon = 1e-6);
        }
        // Complex branch is reported, not silently realified.
        let q = QjOperator::model(2, -3.0, 0, 0);
        assert!(matches!(q.indicial_roots_bigw(), Err(Error::ComplexIndicialRoots { .. })));
    }

    #[test]
    fn zero_forcing_gives_zero() {
        let q = QjOperator::model(4, 0.0, 0, 0);
        let grid = QjGrid::log_spaced(1e-6, 0.75, 64);
        let sol = solve_qj_flat(&q, |_| 0.0, &grid, 10).unwrap();
        assert!(sol.u.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn non_flat_forcing_rejected() {
        let q = QjOperator::model(4, 0.0, 0, 0);
        let grid = QjGrid::log_spaced(1e-6, 0.75, 512);
        assert!(solve_qj_flat(&q, |w| w * w, &grid, 8).is_err());
        assert!(solve_qj_flat(&q, |w| w.powi(10), &grid, 4).is_err());
    }

    #[test]
    fn manufactured_solution_recovered() {
        // u* = w^8 exp(-w); r = Q u* computed in closed form.
        let q = QjOperator::model(4, 0.0, 0, 0);
        let ustar = |w: f64| w.powi(8) * (-w).exp();
        let dustar = |w: f64| (8.0 * w.powi(7) - w.powi(8)) * (-w).exp();
        let d2ustar = |w: f64| (56.0 * w.powi(6) - 16.0 * w.powi(7) + w.powi(8)) * (-w).exp();
        let forcing = |w: f64| q.apply_w(ustar(w), dustar(w), d2ustar(w), w);

        let grid = QjGrid::log_spaced(1e-6, 0.75, 8000);
        let sol = solve_qj_flat(&q, forcing, &grid, 7).unwrap();
        let scale = grid.w.iter().map(|&w| ustar(w).abs()).fold(0.0, f64::max);
        let worst = grid
            .w
            .iter()
            .zip(&sol.u)
            .map(|(&w, &u)| (u - ustar(w)).abs())
            .fold(0.0, f64::max);
        assert!(worst / scale < 1e-6, "relative sup error {}", worst / scale);
    }

    #[test]
    fn wronskian_satisfies_abel_identity() {
        let q = QjOperator::model(4, 0.0, 0, 0);
        let grid = QjGrid::log_spaced(1e-4, 0.7, 2000);
        let sol = solve_qj_flat(&q, |w: f64| w.powi(10), &grid, 10).unwrap();
        // W(w) = W(w_a) exp(-int p1/p2), checked between two interior points.
        let (ia, ib) = (600, 1500);
        let lnw: Vec<f64> = grid.w.iter().map(|w| w.ln()).collect();
        let integrand: Vec<f64> = grid
            .w
            .iter()
            .map(|&w| {
                let [p2, p1, _] = q.w_coefficients(w);
                p1 / p2 * w
            })
            .collect();
        let acc = cumulative_simpson(&lnw, &integrand);
        let predicted = sol.wronskian[ia] * (-(acc[ib] - acc[ia])).exp();
        assert_relative_eq!(sol.wronskian[ib], predicted, max_relative = 1e-6);
    }

    #[test]
    fn flat_forcing_yields_flat_solution() {
        let q = QjOperator::model(4, 0.0, 0, 0);
        let grid = QjGrid::log_spaced(1e-6, 0.75, 3000);
        let sol = solve_qj_flat(&q, |w: f64| w.powi(10), &grid, 10).unwrap();
        let slope = sol.fitted_flatness.expect("nonzero solution fits");
        assert!(slope >= 8.0, "fitted flatness {slope} below the guaranteed order");
    }

    #[test]
    fn solver_is_linear_in_the_forcing() {
        let q = QjOperator::model(4, 0.0, 0, 0);
        let grid = QjGrid::log_spaced(1e-6, 0.75, 1500);
        let r1 = |w: f64| w.powi(10);
        let r2 = |w: f64| w.powi(8) * (-2.0 * w).exp() * 0.3;
        let s1 = solve_qj_flat(&q, r1, &grid, 10).unwrap();
        let s2 = solve_qj_flat(&q, r2, &grid, 8).unwrap();
        let s12 = solve_qj_flat(&q, |w| r1(w) + r2(w), &grid, 8).unwrap();
        let scale = s12.u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..grid.w.len() {
            assert!(
                (s1.u[i] + s2.u[i] - s12.u[i]).abs() <= 1e-10 * scale,
                "nonlinearity at w = {}",
                grid.w[i]
            );
        }
    }

    #[test]
    fn wronskian_underflow_is_reported() {
        // Huge upper indicial root: the fundamental system degenerates near
        // zero and the solver must refuse rather than divide by 0.
        let q = QjOperator::model(4, 0.0, 80, 0);
        let grid = QjGrid::log_spaced(1e-6, 0.75, 256);
        let err = solve_qj_flat(&q, |w: f64| w.powi(10), &grid, 10).unwrap_err();
        assert!(matches!(err, Error::WronskianUnderflow { .. }), "got {err:?}");
    }

    #[test]
    fn transport_constant_pair_as_printed() {
        let (l, r) = conormal_transport_constants(4, 0.5);
        assert_eq!(l, 0.0);
        assert_eq!(r, 8.0);
    }
}
