//! Direct forward solve of the Klein-Gordon equation on exact de Sitter
//! space with an S^1 cross-section, posed in the global time tau of the
//! metric -dtau^2 + cosh^2(tau) dtheta^2. Acting on functions, the operator
//! realized here is
//!
//! ```text
//!     P u = u_tt + tanh(tau) u_t - sech^2(tau) u_qq - lambda u
//! ```
//!
//! (t = tau, q = theta), the overall sign fixed so that the frozen
//! coefficients at tau -> +inf annihilate e^{-s tau} exactly at the roots of
//! s^2 - s - lambda, i.e. at the side exponents s_-(lambda), s_+(lambda) of
//! the boundary expansion. Every solve replays that statement against the
//! discrete stencil (`indicial_self_test`), so a sign regression in any term
//! surfaces as a hard error instead of a quietly wrong expansion.
//!
//! Time stepping is leapfrog with the damping term centered, second order
//! and explicit:
//!
//! ```text
//!     (1 + b) u^{m+1} = 2 u^m - (1 - b) u^{m-1}
//!                       + dtau^2 (sech^2(tau_m) D2 u^m + lambda u^m + f^m),
//!     b = tanh(tau_m) dtau / 2,
//! ```
//!
//! with D2 the spectral second derivative on the theta circle. The fastest
//! mode has frequency sech(tau) k_max with k_max = pi / dtheta, so stability
//! requires dtau <= (2/pi) dtheta cosh(tau) at the slice where cosh is
//! smallest; the grid constructor enforces a 10% margin under that bound.

mod expansion;
mod lp;

pub use expansion::{extract_expansion, ExpansionReport, FittedExponent};
pub use lp::{
    bump_family, lp_scaling_scan, standard_profile, weighted_lp_norm, BumpFamily, ScanReport,
    ScanRow,
};

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::modelsolver::side_exponents;

/// Safety factor kept under the pseudospectral stability bound.
const CFL_SAFETY: f64 = 0.9;

/// Uniform grid on [tau_min, tau_max] x S^1 with n_tau time steps
/// (n_tau + 1 slices) and n_theta angular cells. Construction validates the
/// stability bound, so a value of this type is always safe to step on.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SpacetimeGrid {
    tau_min: f64,
    tau_max: f64,
    n_tau: usize,
    n_theta: usize,
}

impl SpacetimeGrid {
    /// Largest admissible time step (safety margin included) for a grid
    /// spanning [tau_min, tau_max] with n_theta angular cells. The binding
    /// slice is the one nearest tau = 0, where cosh is smallest and the top
    /// angular mode oscillates fastest.
    pub fn stable_dtau(tau_min: f64, tau_max: f64, n_theta: usize) -> f64 {
        let tau_star = 0f64.clamp(tau_min, tau_max);
        CFL_SAFETY * (2.0 / PI) * (2.0 * PI / n_theta as f64) * tau_star.cosh()
    }

    pub fn new(tau_min: f64, tau_max: f64, n_tau: usize, n_theta: usize) -> Result<Self> {
        if !tau_min.is_finite() || !tau_max.is_finite() || tau_max - tau_min < 0.1 {
            return Err(Error::Validation(format!(
                "tau range [{tau_min}, {tau_max}] must be finite and at least 0.1 wide"
            )));
        }
        if n_tau < 8 {
            return Err(Error::Validation(format!("need n_tau >= 8, got {n_tau}")));
        }
        if n_theta < 16 || n_theta % 2 != 0 {
            return Err(Error::Validation(format!(
                "need even n_theta >= 16, got {n_theta}"
            )));
        }
        let grid = SpacetimeGrid { tau_min, tau_max, n_tau, n_theta };
        let dt = grid.delta_tau();
        let dt_max = Self::stable_dtau(tau_min, tau_max, n_theta);
        if dt > dt_max * (1.0 + 1e-12) {
            return Err(Error::CflViolation { dt, dt_max, suggested: dt_max });
        }
        Ok(grid)
    }

    pub fn tau_min(&self) -> f64 {
        self.tau_min
    }

    pub fn tau_max(&self) -> f64 {
        self.tau_max
    }

    pub fn n_tau(&self) -> usize {
        self.n_tau
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn n_slices(&self) -> usize {
        self.n_tau + 1
    }

    pub fn delta_tau(&self) -> f64 {
        (self.tau_max - self.tau_min) / self.n_tau as f64
    }

    pub fn delta_theta(&self) -> f64 {
        2.0 * PI / self.n_theta as f64
    }

    pub fn tau(&self, i: usize) -> f64 {
        self.tau_min + i as f64 * self.delta_tau()
    }

    /// Boundary-defining coordinate x = e^{-tau} of slice i.
    pub fn x(&self, i: usize) -> f64 {
        (-self.tau(i)).exp()
    }

    pub fn theta(&self, j: usize) -> f64 {
        -PI + j as f64 * self.delta_theta()
    }
}

/// Field history of one forward solve.
#[derive(Clone, Debug)]
pub struct Evolution {
    pub grid: SpacetimeGrid,
    /// u[i][j] = field at (tau_i, theta_j); slice 0 is the initial slice.
    pub u: Vec<Vec<f64>>,
    /// Per-slice quadratic diagnostic: (1/2) dtheta sum_j (v^2 + sech^2 w^2
    /// + mu u^2) with v, w the tau and theta derivatives and mu =
    /// max(lambda, 1/4) a mass floor keeping the form positive definite.
    /// Bookkeeping only: the damping term pumps it, no conservation holds.
    pub energy: Vec<f64>,
}

impl Evolution {
    pub fn max_abs(&self) -> f64 {
        self.u
            .iter()
            .flat_map(|s| s.iter())
            .fold(0.0, |a, &v| a.max(v.abs()))
    }
}

/// Spectral derivatives on the theta circle via a complex FFT pair.
struct ThetaSpectral {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    buf: Vec<Complex64>,
}

impl ThetaSpectral {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        ThetaSpectral { n, fwd, inv, buf: vec![Complex64::default(); n] }
    }

    /// Signed integer wavenumber carried by bin k.
    fn wavenumber(&self, k: usize) -> f64 {
        if k <= self.n / 2 {
            k as f64
        } else {
            k as f64 - self.n as f64
        }
    }

    fn load(&mut self, f: &[f64]) {
        for (b, &v) in self.buf.iter_mut().zip(f) {
            *b = Complex64::new(v, 0.0);
        }
    }

    fn store(&self, out: &mut [f64]) {
        let scale = 1.0 / self.n as f64;
        for (o, b) in out.iter_mut().zip(&self.buf) {
            *o = b.re * scale;
        }
    }

    fn d2(&mut self, f: &[f64], out: &mut [f64]) {
        self.load(f);
        self.fwd.process(&mut self.buf);
        for k in 0..self.n {
            let m = self.wavenumber(k);
            self.buf[k] *= -m * m;
        }
        self.inv.process(&mut self.buf);
        self.store(out);
    }

    /// First derivative; the unpaired Nyquist bin is dropped (the centered
    /// derivative of its real-grid mode is identically zero).
    fn d1(&mut self, f: &[f64], out: &mut [f64]) {
        self.load(f);
        self.fwd.process(&mut self.buf);
        for k in 0..self.n {
            let m = if k == self.n / 2 { 0.0 } else { self.wavenumber(k) };
            self.buf[k] *= Complex64::new(0.0, m);
        }
        self.inv.process(&mut self.buf);
        self.store(out);
    }
}

/// One pointwise leapfrog update. Kept as a free function so the
/// frequency-zero self-test exercises the exact same expression the main
/// loop runs.
#[inline]
fn leapfrog_next(
    u_cur: f64,
    u_prev: f64,
    d2: f64,
    f: f64,
    tau: f64,
    dt: f64,
    lambda: f64,
) -> f64 {
    let b = 0.5 * tau.tanh() * dt;
    let c = tau.cosh();
    let sech2 = 1.0 / (c * c);
    (2.0 * u_cur - (1.0 - b) * u_prev + dt * dt * (sech2 * d2 + lambda * u_cur + f))
        / (1.0 + b)
}

/// Frequency-zero tripwire: two leapfrog steps on the theta-constant mode
/// must track e^{-s tau} at large tau for both side exponents s. A sign
/// error in the damping, the potential, or the root convention produces an
/// O(dt^2) relative defect; the correct stencil leaves only the
/// e^{-2 tau_0} freeze-out remainder plus the dt^4 truncation term, orders
/// below the threshold.
fn indicial_self_test(lambda: f64) -> Result<()> {
    const TAU0: f64 = 6.0;
    const DT: f64 = 1e-3;
    let (s_minus, s_plus) = side_exponents(2, lambda)?;
    for s in [s_minus, s_plus] {
        let u_prev = (-s * (TAU0 - DT)).exp();
        let u_cur = (-s * TAU0).exp();
        let got = leapfrog_next(u_cur, u_prev, 0.0, 0.0, TAU0, DT, lambda);
        let want = (-s * (TAU0 + DT)).exp();
        let rel = ((got - want) / want).abs();
        if rel > 1e-8 {
            return Err(Error::Numerical(format!(
                "frequency-zero self-test failed at side exponent {s}: relative defect \
                 {rel:.3e}; the stencil no longer matches the indicial roots"
            )));
        }
    }
    Ok(())
}

/// Core stepping loop. `source` fills slice m of the forcing on request;
/// `observe` receives every slice of the solution in order, including the
/// two zero initial slices. Zero data in the far past requires the forcing
/// to vanish on slice 0 (then u = 0 on slice 1 is exact, not an
/// approximation).
pub(crate) fn evolve_observed(
    grid: &SpacetimeGrid,
    lambda: f64,
    mut source: impl FnMut(usize, &mut [f64]),
    mut observe: impl FnMut(usize, &[f64]),
) -> Result<()> {
    if !(lambda > -0.25) {
        return Err(Error::Validation(format!(
            "need lambda > -1/4 for real side exponents, got {lambda}"
        )));
    }
    indicial_self_test(lambda)?;
    let n = grid.n_theta();
    let dt = grid.delta_tau();
    let mut spectral = ThetaSpectral::new(n);
    let mut prev = vec![0.0; n];
    let mut cur = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut f = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    source(0, &mut f);
    if f.iter().any(|&v| v != 0.0) {
        return Err(Error::Validation(
            "source must vanish on the first slice; the solve assumes zero data in the far past"
                .into(),
        ));
    }
    observe(0, &prev);
    observe(1, &cur);
    for m in 1..grid.n_tau() {
        let tau = grid.tau(m);
        source(m, &mut f);
        spectral.d2(&cur, &mut d2);
        for j in 0..n {
            next[j] = leapfrog_next(cur[j], prev[j], d2[j], f[j], tau, dt, lambda);
        }
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
        observe(m + 1, &cur);
    }
    if !cur.iter().all(|v| v.is_finite()) {
        return Err(Error::Numerical(
            "evolution produced non-finite values despite satisfying the stability bound; \
             the source is likely unresolved"
                .into(),
        ));
    }
    Ok(())
}

/// Forward solve with zero data in the far past. `source[m]` is the forcing
/// on slice m (the last slice's value is unused by the stencil); it must
/// vanish identically on slice 0.
pub fn evolve_kg(grid: &SpacetimeGrid, lambda: f64, source: &[Vec<f64>]) -> Result<Evolution> {
    if source.len() != grid.n_slices() {
        return Err(Error::Validation(format!(
            "source has {} slices, grid has {}",
            source.len(),
            grid.n_slices()
        )));
    }
    if let Some(bad) = source.iter().position(|s| s.len() != grid.n_theta()) {
        return Err(Error::Validation(format!(
            "source slice {bad} has {} cells, grid has {}",
            source[bad].len(),
            grid.n_theta()
        )));
    }
    let mut u = Vec::with_capacity(grid.n_slices());
    evolve_observed(
        grid,
        lambda,
        |m, out| out.copy_from_slice(&source[m]),
        |_, slice| u.push(slice.to_vec()),
    )?;
    let energy = slice_energies(grid, lambda, &u);
    Ok(Evolution { grid: *grid, u, energy })
}

/// Sample a pointwise source f(tau, theta) on every grid node.
pub fn sample_source(grid: &SpacetimeGrid, f: impl Fn(f64, f64) -> f64) -> Vec<Vec<f64>> {
    (0..grid.n_slices())
        .map(|i| {
            let tau = grid.tau(i);
            (0..grid.n_theta()).map(|j| f(tau, grid.theta(j))).collect()
        })
        .collect()
}

fn slice_energies(grid: &SpacetimeGrid, lambda: f64, u: &[Vec<f64>]) -> Vec<f64> {
    let n = grid.n_theta();
    let ns = u.len();
    let dt = grid.delta_tau();
    let dtheta = grid.delta_theta();
    let mu = lambda.max(0.25);
    let mut spectral = ThetaSpectral::new(n);
    let mut w = vec![0.0; n];
    let mut out = Vec::with_capacity(ns);
    for m in 0..ns {
        let tau = grid.tau(m);
        let c = tau.cosh();
        let sech2 = 1.0 / (c * c);
        spectral.d1(&u[m], &mut w);
        let mut e = 0.0;
        for j in 0..n {
            let v = if m == 0 {
                (u[1][j] - u[0][j]) / dt
            } else if m == ns - 1 {
                (u[m][j] - u[m - 1][j]) / dt
            } else {
                (u[m + 1][j] - u[m - 1][j]) / (2.0 * dt)
            };
            e += v * v + sech2 * w[j] * w[j] + mu * u[m][j] * u[m][j];
        }
        out.push(0.5 * dtheta * e);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cbump(t: f64) -> f64 {
        if t * t < 1.0 {
            (1.0 - 1.0 / (1.0 - t * t)).exp()
        } else {
            0.0
        }
    }

    #[test]
    fn grid_validation_and_cfl() {
        assert!(SpacetimeGrid::new(f64::NAN, 8.0, 100, 64).is_err());
        assert!(SpacetimeGrid::new(0.0, 8.0, 100, 63).is_err());
        assert!(SpacetimeGrid::new(0.0, 8.0, 4, 64).is_err());
        // dtheta = 2pi/64, bound at tau* = 0 is 0.9*(2/pi)*dtheta ~ 0.0563;
        // 80 steps over [-1, 8] give dt = 0.1125, over the bound.
        let err = SpacetimeGrid::new(-1.0, 8.0, 80, 64).unwrap_err();
        match err {
            Error::CflViolation { dt, dt_max, suggested } => {
                assert!(dt > dt_max);
                assert!(suggested <= dt_max);
                let n = (9.0 / suggested).ceil() as usize;
                assert!(SpacetimeGrid::new(-1.0, 8.0, n, 64).is_ok());
            }
            other => panic!("expected CFL violation, got {other}"),
        }
        // A grid away from tau = 0 relaxes the bound through cosh.
        assert!(SpacetimeGrid::new(2.0, 8.0, 80, 64).is_ok());
    }

    #[test]
    fn spectral_derivative_oracle() {
        let n = 32;
        let mut spectral = ThetaSpectral::new(n);
        let dtheta = 2.0 * PI / n as f64;
        let f: Vec<f64> = (0..n)
            .map(|j| {
                let q = -PI + j as f64 * dtheta;
                (2.0 * q).sin() + 0.5 * (5.0 * q).cos() + 1.0
            })
            .collect();
        let mut d2 = vec![0.0; n];
        let mut d1 = vec![0.0; n];
        spectral.d2(&f, &mut d2);
        spectral.d1(&f, &mut d1);
        for j in 0..n {
            let q = -PI + j as f64 * dtheta;
            let d2_exact = -4.0 * (2.0 * q).sin() - 12.5 * (5.0 * q).cos();
            let d1_exact = 2.0 * (2.0 * q).cos() - 2.5 * (5.0 * q).sin();
            assert!((d2[j] - d2_exact).abs() <= 1e-11);
            assert!((d1[j] - d1_exact).abs() <= 1e-11);
        }
    }

    #[test]
    fn zero_source_zero_solution() {
        let grid = SpacetimeGrid::new(-1.0, 3.0, 256, 32).unwrap();
        let src = vec![vec![0.0; 32]; grid.n_slices()];
        let ev = evolve_kg(&grid, 0.2, &src).unwrap();
        assert_eq!(ev.max_abs(), 0.0);
        assert!(ev.energy.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn rejects_nonzero_source_on_first_slice() {
        let grid = SpacetimeGrid::new(-1.0, 3.0, 256, 32).unwrap();
        let mut src = vec![vec![0.0; 32]; grid.n_slices()];
        src[0][5] = 1.0;
        assert!(matches!(
            evolve_kg(&grid, 0.0, &src),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn rejects_lambda_at_or_below_minus_quarter() {
        let grid = SpacetimeGrid::new(-1.0, 3.0, 256, 32).unwrap();
        let src = vec![vec![0.0; 32]; grid.n_slices()];
        assert!(evolve_kg(&grid, -0.25, &src).is_err());
        assert!(evolve_kg(&grid, -0.3, &src).is_err());
    }

    /// Forcing built from the discrete stencil itself must be inverted to
    /// rounding: the recurrence is reproduced term by term, so this pins the
    /// exact update formula, not an approximation of it.
    #[test]
    fn discrete_manufactured_solution_recovered_exactly() {
        let grid = SpacetimeGrid::new(-2.0, 2.0, 400, 64).unwrap();
        let lambda = 0.3;
        let n = grid.n_theta();
        let dt = grid.delta_tau();
        let psi = |tau: f64| cbump(tau / 1.2);
        let g = |q: f64| 1.3 + q.sin() + 0.4 * (3.0 * q).cos();
        let ustar: Vec<Vec<f64>> = (0..grid.n_slices())
            .map(|i| {
                let p = psi(grid.tau(i));
                (0..n).map(|j| p * g(grid.theta(j))).collect()
            })
            .collect();
        assert!(ustar[0].iter().chain(&ustar[1]).all(|&v| v == 0.0));
        let mut spectral = ThetaSpectral::new(n);
        let mut d2 = vec![0.0; n];
        let mut src = vec![vec![0.0; n]; grid.n_slices()];
        for m in 1..grid.n_tau() {
            let tau = grid.tau(m);
            let b = 0.5 * tau.tanh() * dt;
            let c = tau.cosh();
            let sech2 = 1.0 / (c * c);
            spectral.d2(&ustar[m], &mut d2);
            for j in 0..n {
                src[m][j] = ((1.0 + b) * ustar[m + 1][j] - 2.0 * ustar[m][j]
                    + (1.0 - b) * ustar[m - 1][j])
                    / (dt * dt)
                    - sech2 * d2[j]
                    - lambda * ustar[m][j];
            }
        }
        assert!(src[0].iter().all(|&v| v == 0.0));
        let ev = evolve_kg(&grid, lambda, &src).unwrap();
        let scale = ustar
            .iter()
            .flatten()
            .fold(0f64, |a, &v| a.max(v.abs()));
        let err = ev
            .u
            .iter()
            .zip(&ustar)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max);
        assert!(err <= 1e-10 * scale, "sup error {err:.3e} vs scale {scale:.3e}");
    }

    fn manufactured_error(n_tau: usize, n_theta: usize) -> f64 {
        let grid = SpacetimeGrid::new(-2.0, 2.0, n_tau, n_theta).unwrap();
        let lambda = 0.4;
        let psi = |tau: f64| {
            if tau.abs() < 1.0 {
                (PI * tau / 2.0).cos().powi(4)
            } else {
                0.0
            }
        };
        let dpsi = |tau: f64| {
            if tau.abs() < 1.0 {
                let c = (PI * tau / 2.0).cos();
                let s = (PI * tau / 2.0).sin();
                -2.0 * PI * c.powi(3) * s
            } else {
                0.0
            }
        };
        let ddpsi = |tau: f64| {
            if tau.abs() < 1.0 {
                let c = (PI * tau / 2.0).cos();
                let s = (PI * tau / 2.0).sin();
                PI * PI * c * c * (3.0 * s * s - c * c)
            } else {
                0.0
            }
        };
        let g = |q: f64| 1.2 + q.sin() + 0.5 * (2.0 * q).cos();
        let ddg = |q: f64| -q.sin() - 2.0 * (2.0 * q).cos();
        let src = sample_source(&grid, |tau, q| {
            let c = tau.cosh();
            let sech2 = 1.0 / (c * c);
            ddpsi(tau) * g(q) + tau.tanh() * dpsi(tau) * g(q)
                - sech2 * psi(tau) * ddg(q)
                - lambda * psi(tau) * g(q)
        });
        let ev = evolve_kg(&grid, lambda, &src).unwrap();
        let mut err = 0f64;
        for i in 0..grid.n_slices() {
            let p = psi(grid.tau(i));
            for j in 0..grid.n_theta() {
                err = err.max((ev.u[i][j] - p * g(grid.theta(j))).abs());
            }
        }
        err
    }

    /// The theta direction is exact for a band-limited profile, so joint
    /// halving exposes the pure dtau^2 order of the stepper.
    #[test]
    fn manufactured_convergence_under_joint_halving() {
        let coarse = manufactured_error(320, 32);
        let fine = manufactured_error(640, 64);
        assert!(fine > 1e-12, "fine error {fine:.3e} suspiciously small");
        assert!(
            coarse / fine >= 3.0,
            "error ratio {:.2} under joint halving (coarse {coarse:.3e}, fine {fine:.3e})",
            coarse / fine
        );
    }

    /// A pulse released at tau = 0 must stay inside the null cone
    /// |theta| <= width + int_0^tau sech, up to 3 cells of smearing, and the
    /// field must vanish identically before the pulse acts.
    ///
    /// The smearing allowance is honest only for data with negligible
    /// content near the grid Nyquist: leapfrog makes the top modes
    /// superluminal (group speedup 1/sqrt(1 - (omega dt/2)^2), over 2x at
    /// the CFL edge), so the pulse below is kept wide and smooth enough
    /// that everything above ~k = 60 sits at rounding level.
    #[test]
    fn finite_propagation_cone() {
        let grid = SpacetimeGrid::new(-0.5, 8.0, 1216, 512).unwrap();
        let n = grid.n_theta();
        let dt = grid.delta_tau();
        let dtheta = grid.delta_theta();
        let m0 = ((0.0 - grid.tau_min()) / dt).round() as usize;
        let w = 32.0 * dtheta;
        let mut src = vec![vec![0.0; n]; grid.n_slices()];
        for j in 0..n {
            let q = grid.theta(j);
            if q.abs() < w {
                src[m0][j] = (1.0 - (q / w).powi(2)).powi(12);
            }
        }
        let ev = evolve_kg(&grid, 0.0, &src).unwrap();
        for m in 0..=m0 {
            assert!(ev.u[m].iter().all(|&v| v == 0.0), "leak before the pulse at slice {m}");
        }
        assert!(ev.energy[..m0.saturating_sub(1)].iter().all(|&e| e == 0.0));
        assert!(*ev.energy.last().unwrap() > 0.0);
        let umax = ev.max_abs();
        let gd = |tau: f64| 2.0 * tau.exp().atan() - PI / 2.0;
        let tau0 = grid.tau(m0);
        let mut worst = 0f64;
        for m in ((m0 + 1)..=grid.n_tau()).step_by(40) {
            let allowed = w + gd(grid.tau(m)) - gd(tau0) + 3.0 * dtheta;
            for j in 0..n {
                if grid.theta(j).abs() > allowed {
                    worst = worst.max(ev.u[m][j].abs());
                }
            }
        }
        assert!(
            worst <= 1e-10 * umax,
            "cone leak {worst:.3e} vs peak {umax:.3e}"
        );
    }
}
