//! Metric charts: the coefficient split `h = h0(y, eta) + x h1(x, y, eta)`
//! of `g = (-dx^2 + h(x, y, dy))/x^2` near the boundary, with analytic
//! derivatives for the built-in charts and finite differences for custom
//! ones.

use crate::error::{Error, Result};
use std::fmt;
use std::sync::Arc;

/// Central finite-difference step for custom charts without analytic
/// gradients.
const FD_STEP: f64 = 1e-5;

type Coeff0 = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;
type Coeff1 = Arc<dyn Fn(f64, &[f64], &[f64]) -> f64 + Send + Sync>;
type Grad0 = Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;

/// User-supplied chart coefficients. `h0(y, eta)` must be a positive
/// definite quadratic form in `eta` for each `y`; `h1(x, y, eta)` is the
/// first-order correction. Analytic gradients are optional; when absent,
/// central differences with step `1e-5` are used.
#[derive(Clone)]
pub struct CustomChart {
    pub h0: Coeff0,
    pub h1: Coeff1,
    pub grad_h0_y: Option<Grad0>,
    pub grad_h0_eta: Option<Grad0>,
}

impl CustomChart {
    pub fn new(h0: Coeff0, h1: Coeff1) -> Self {
        CustomChart { h0, h1, grad_h0_y: None, grad_h0_eta: None }
    }
}

#[derive(Clone)]
enum Kind {
    HalfSpace,
    ExactDeSitter { radius: f64 },
    Custom(CustomChart),
}

/// A coordinate patch of an asymptotically de Sitter space near future
/// infinity, `g = (-dx^2 + h)/x^2`.
#[derive(Clone)]
pub struct MetricChart {
    n: u32,
    kind: Kind,
}

impl fmt::Debug for MetricChart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            Kind::HalfSpace => write!(f, "MetricChart::half_space(n={})", self.n),
            Kind::ExactDeSitter { radius } => {
                write!(f, "MetricChart::exact_desitter(R={radius})")
            }
            Kind::Custom(_) => write!(f, "MetricChart::custom(n={})", self.n),
        }
    }
}

impl MetricChart {
    /// Flat model `h = |dy|^2`: `h0 = |eta|^2`, `h1 = 0`.
    pub fn half_space(n: u32) -> Result<Self> {
        if n < 2 {
            return Err(Error::Validation(format!("spacetime dimension {n} < 2")));
        }
        Ok(MetricChart { n, kind: Kind::HalfSpace })
    }

    /// Exact de Sitter surface with circular cross-section of scale
    /// `radius`, in the chart `x = e^{-t}` near future infinity:
    ///
    /// ```text
    /// h0 = 4 eta^2 / R^2,
    /// h1 = -(4 eta^2 / R^2) x (2 + x^2) / (1 + x^2)^2,
    /// ```
    ///
    /// so that `p = -tau^2 + 4 eta^2 / (R^2 (1 + x^2)^2)` globally. Only the
    /// two-dimensional case (one angular coordinate) is built in.
    pub fn exact_desitter(radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::Validation(format!("cross-section scale {radius} must be > 0")));
        }
        Ok(MetricChart { n: 2, kind: Kind::ExactDeSitter { radius } })
    }

    pub fn custom(n: u32, chart: CustomChart) -> Result<Self> {
        if n < 2 {
            return Err(Error::Validation(format!("spacetime dimension {n} < 2")));
        }
        Ok(MetricChart { n, kind: Kind::Custom(chart) })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn dim_y(&self) -> usize {
        self.n as usize - 1
    }

    pub fn is_exact_desitter(&self) -> Option<f64> {
        match self.kind {
            Kind::ExactDeSitter { radius } => Some(radius),
            _ => None,
        }
    }

    pub fn h0(&self, y: &[f64], eta: &[f64]) -> f64 {
        match &self.kind {
            Kind::HalfSpace => eta.iter().map(|e| e * e).sum(),
            Kind::ExactDeSitter { radius } => 4.0 * eta[0] * eta[0] / (radius * radius),
            Kind::Custom(c) => (c.h0)(y, eta),
        }
    }

    pub fn h1(&self, x: f64, y: &[f64], eta: &[f64]) -> f64 {
        match &self.kind {
            Kind::HalfSpace => 0.0,
            Kind::ExactDeSitter { radius } => {
                let d = 1.0 + x * x;
                -(4.0 * eta[0] * eta[0] / (radius * radius)) * x * (2.0 + x * x) / (d * d)
            }
            Kind::Custom(c) => (c.h1)(x, y, eta),
        }
    }

    pub fn dh0_dy(&self, y: &[f64], eta: &[f64]) -> Vec<f64> {
        match &self.kind {
            Kind::HalfSpace => vec![0.0; y.len()],
            Kind::ExactDeSitter { .. } => vec![0.0],
            Kind::Custom(c) => match &c.grad_h0_y {
                Some(g) => g(y, eta),
                None => fd_grad(|yy| (c.h0)(yy, eta), y),
            },
        }
    }

    pub fn dh0_deta(&self, y: &[f64], eta: &[f64]) -> Vec<f64> {
        match &self.kind {
            Kind::HalfSpace => eta.iter().map(|e| 2.0 * e).collect(),
            Kind::ExactDeSitter { radius } => vec![8.0 * eta[0] / (radius * radius)],
            Kind::Custom(c) => match &c.grad_h0_eta {
                Some(g) => g(y, eta),
                None => fd_grad(|ee| (c.h0)(y, ee), eta),
            },
        }
    }

    pub fn dh1_dx(&self, x: f64, y: &[f64], eta: &[f64]) -> f64 {
        match &self.kind {
            Kind::HalfSpace => 0.0,
            Kind::ExactDeSitter { radius } => {
                let d = 1.0 + x * x;
                -(4.0 * eta[0] * eta[0] / (radius * radius)) * (2.0 - 3.0 * x * x - x.powi(4))
                    / (d * d * d)
            }
            Kind::Custom(c) => {
                ((c.h1)(x + FD_STEP, y, eta) - (c.h1)(x - FD_STEP, y, eta)) / (2.0 * FD_STEP)
            }
        }
    }

    pub fn dh1_dy(&self, x: f64, y: &[f64], eta: &[f64]) -> Vec<f64> {
        match &self.kind {
            Kind::HalfSpace => vec![0.0; y.len()],
            Kind::ExactDeSitter { .. } => vec![0.0],
            Kind::Custom(c) => fd_grad(|yy| (c.h1)(x, yy, eta), y),
        }
    }

    pub fn dh1_deta(&self, x: f64, y: &[f64], eta: &[f64]) -> Vec<f64> {
        match &self.kind {
            Kind::HalfSpace => vec![0.0; eta.len()],
            Kind::ExactDeSitter { radius } => {
                let d = 1.0 + x * x;
                vec![-(8.0 * eta[0] / (radius * radius)) * x * (2.0 + x * x) / (d * d)]
            }
            Kind::Custom(c) => fd_grad(|ee| (c.h1)(x, y, ee), eta),
        }
    }

    /// Positive-definiteness of the boundary metric `h0(y, .)` at the given
    /// base points, via a Cholesky attempt on the Gram matrix of the
    /// quadratic form.
    pub fn check_boundary_metric(&self, y_samples: &[Vec<f64>]) -> Result<()> {
        let d = self.dim_y();
        for y in y_samples {
            if y.len() != d {
                return Err(Error::Validation(format!(
                    "sample has {} tangential coordinates, chart expects {d}",
                    y.len()
                )));
            }
            // Polarization: G_ij = (h0(e_i+e_j) - h0(e_i) - h0(e_j)) / 2.
            let basis: Vec<Vec<f64>> = (0..d)
                .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect();
            let diag: Vec<f64> = basis.iter().map(|e| self.h0(y, e)).collect();
            let mut gram = vec![0.0; d * d];
            for i in 0..d {
                for j in 0..d {
                    if i == j {
                        gram[i * d + j] = diag[i];
                    } else {
                        let mut sum = basis[i].clone();
                        for (s, b) in sum.iter_mut().zip(&basis[j]) {
                            *s += b;
                        }
                        gram[i * d + j] = (self.h0(y, &sum) - diag[i] - diag[j]) / 2.0;
                    }
                }
            }
            if !cholesky_ok(&gram, d) {
                return Err(Error::Domain(format!(
                    "boundary metric fails positive definiteness at y = {y:?}"
                )));
            }
        }
        Ok(())
    }
}

fn fd_grad<F: Fn(&[f64]) -> f64>(f: F, at: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; at.len()];
    let mut probe = at.to_vec();
    for i in 0..at.len() {
        probe[i] = at[i] + FD_STEP;
        let hi = f(&probe);
        probe[i] = at[i] - FD_STEP;
        let lo = f(&probe);
        probe[i] = at[i];
        out[i] = (hi - lo) / (2.0 * FD_STEP);
    }
    out
}

fn cholesky_ok(gram: &[f64], d: usize) -> bool {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut sum = gram[i * d + j];
            for k in 0..j {
                sum -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if sum <= 0.0 {
                    return false;
                }
                l[i * d + i] = sum.sqrt();
            } else {
                l[i * d + j] = sum / l[j * d + j];
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desitter_chart_matches_global_metric() {
        // The chart split must reproduce the global dual metric
        // -p_t^2 + p_w^2 / (R^2 cosh^2 t) under x = e^{-t}, tau = -p_t,
        // eta = x p_w.
        for radius in [1.0, 1.25, 0.8] {
            let chart = MetricChart::exact_desitter(radius).unwrap();
            for t in [-1.5f64, -0.3, 0.0, 0.7, 2.4] {
                let x = (-t).exp();
                let (p_t, p_w) = (0.37, -1.21);
                let (tau, eta) = (-p_t, x * p_w);
                let p_chart = -tau * tau
                    + chart.h0(&[0.0], &[eta])
                    + x * chart.h1(x, &[0.0], &[eta]);
                let p_global = -p_t * p_t + p_w * p_w / (radius * radius * t.cosh().powi(2));
                assert!(
                    (p_chart - p_global).abs() < 1e-13 * (1.0 + p_global.abs()),
                    "chart/global mismatch at t={t}, R={radius}: {p_chart} vs {p_global}"
                );
            }
        }
    }

    #[test]
    fn desitter_analytic_derivatives_match_differences() {
        let chart = MetricChart::exact_desitter(1.3).unwrap();
        let (x, eta) = (0.45, &[0.8][..]);
        let h = 1e-6;
        let fd_x = (chart.h1(x + h, &[0.0], eta) - chart.h1(x - h, &[0.0], eta)) / (2.0 * h);
        assert!((chart.dh1_dx(x, &[0.0], eta) - fd_x).abs() < 1e-8);
        let fd_e = (chart.h1(x, &[0.0], &[eta[0] + h]) - chart.h1(x, &[0.0], &[eta[0] - h]))
            / (2.0 * h);
        assert!((chart.dh1_deta(x, &[0.0], eta)[0] - fd_e).abs() < 1e-8);
    }

    #[test]
    fn boundary_metric_check() {
        MetricChart::half_space(4).unwrap().check_boundary_metric(&[vec![0.0; 3]]).unwrap();
        MetricChart::exact_desitter(1.0).unwrap().check_boundary_metric(&[vec![0.7]]).unwrap();
        // Degenerate custom form is refused.
        let degenerate = CustomChart::new(
            Arc::new(|_y: &[f64], eta: &[f64]| eta[0] * eta[0] - eta[1] * eta[1]),
            Arc::new(|_x, _y: &[f64], _eta: &[f64]| 0.0),
        );
        let chart = MetricChart::custom(3, degenerate).unwrap();
        assert!(chart.check_boundary_metric(&[vec![0.0, 0.0]]).is_err());
    }
}
