//! The projective double-space coordinates and the lifted Hamilton fields.
//!
//! Left chart: `s = x/xt`, `z = (y - yt)/xt`, static base `(xt, yt)`, duals
//! `(sigma, xi, zeta, mu)` fixed by matching the product canonical 1-form
//!
//! ```text
//! tau dx/x + taut dxt/xt + eta . dy/x + etat . dyt/xt
//!   = sigma ds + xi dxt + zeta . dz + mu . dyt .
//! ```
//!
//! Right chart: `st = xt/x = 1/s`, `zt = (y - yt)/x = z/s`, static base
//! `(x, y)`; the dual match gives `sigmat = taut x / xt`,
//! `zetat = -x etat / xt`, `mut = mu`, and the right-side lifted symbol has
//! the same shape as the left one with the base argument `y - x zt` (the
//! sign flip in `zetat` is absorbed because `h` is quadratic in the fiber
//! variable). Both sides therefore share one field routine, differing only
//! in the sign of the `z`-chain rule.

use super::chart::MetricChart;
use crate::error::{Error, Result};
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FlowSide {
    Left,
    Right,
}

impl FlowSide {
    /// Sign of the base-argument shift `y_arg = base_y + sign * base_x * z`.
    fn arg_sign(self) -> f64 {
        match self {
            FlowSide::Left => 1.0,
            FlowSide::Right => -1.0,
        }
    }
}

/// Point of the lifted cotangent space in one projective chart. On the left
/// the fields read `(s, z, xt, yt, sigma, xi, zeta, mu)`; on the right the
/// same slots hold `(st, zt, x, y, sigmat, xit, zetat, mut)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DoublePhasePoint {
    pub s: f64,
    pub z: Vec<f64>,
    pub base_x: f64,
    pub base_y: Vec<f64>,
    pub sigma: f64,
    pub xi: f64,
    pub zeta: Vec<f64>,
    pub mu: Vec<f64>,
}

impl DoublePhasePoint {
    pub fn dim_y(&self) -> usize {
        self.z.len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DoubleTangent {
    pub ds: f64,
    pub dz: Vec<f64>,
    pub dbase_x: f64,
    pub dbase_y: Vec<f64>,
    pub dsigma: f64,
    pub dxi: f64,
    pub dzeta: Vec<f64>,
    pub dmu: Vec<f64>,
}

/// Identify a pair of interior 0-cotangent points with a point of the left
/// projective chart, by the displayed coordinate formulas.
#[allow(clippy::too_many_arguments)]
pub fn lift_cotangent_coordinates(
    x: f64,
    y: &[f64],
    tau: f64,
    eta: &[f64],
    xt: f64,
    yt: &[f64],
    taut: f64,
    etat: &[f64],
) -> Result<DoublePhasePoint> {
    if !(x > 0.0) || !(xt > 0.0) {
        return Err(Error::Validation(format!(
            "the identification is interior-only: x = {x}, xt = {xt} must be positive"
        )));
    }
    let dim = y.len();
    if yt.len() != dim || eta.len() != dim || etat.len() != dim {
        return Err(Error::Validation("tangential dimensions disagree".into()));
    }
    let s = x / xt;
    let z: Vec<f64> = y.iter().zip(yt).map(|(a, b)| (a - b) / xt).collect();
    let sigma = tau * xt / x;
    let xi = tau / xt + taut / xt + eta.iter().zip(&z).map(|(e, zi)| e / x * zi).sum::<f64>();
    let zeta: Vec<f64> = eta.iter().map(|e| xt * e / x).collect();
    let mu: Vec<f64> = eta.iter().zip(etat).map(|(e, et)| e / x + et / xt).collect();
    Ok(DoublePhasePoint { s, z, base_x: xt, base_y: yt.to_vec(), sigma, xi, zeta, mu })
}

/// The lifted principal symbol in the given chart:
/// `-s^2 sigma^2 + s^2 h0(Y, zeta) + s^3 X h1(X s, Y, zeta)` with
/// `X = base_x`, `Y = base_y + arg_sign * base_x * z`.
pub fn double_space_symbol(chart: &MetricChart, side: FlowSide, q: &DoublePhasePoint) -> f64 {
    let a = side.arg_sign();
    let y_arg: Vec<f64> =
        q.base_y.iter().zip(&q.z).map(|(yb, zi)| yb + a * q.base_x * zi).collect();
    let x_arg = q.base_x * q.s;
    let h0 = chart.h0(&y_arg, &q.zeta);
    let h1 = chart.h1(x_arg, &y_arg, &q.zeta);
    let s2 = q.s * q.s;
    -s2 * q.sigma * q.sigma + s2 * h0 + s2 * q.s * q.base_x * h1
}

/// Full lifted Hamilton field and its smooth factored form, with
/// `full = s^2 * factored` on the characteristic set.
///
/// The input must be on-shell: the factored sigma-component uses the
/// on-shell substitution `sigma^2 = h0 + s X h1` and is only claimed there.
pub fn double_space_hamilton_field(
    chart: &MetricChart,
    side: FlowSide,
    q: &DoublePhasePoint,
) -> Result<(DoubleTangent, DoubleTangent)> {
    let dim = chart.dim_y();
    if q.dim_y() != dim || q.base_y.len() != dim || q.zeta.len() != dim || q.mu.len() != dim {
        return Err(Error::Validation(format!(
            "point dimensions disagree with the chart (dim_y = {dim})"
        )));
    }
    let p = double_space_symbol(chart, side, q);
    let s2 = q.s * q.s;
    let scale = 1.0 + s2 * (q.sigma * q.sigma + chart.h0(&q.base_y, &q.zeta).abs());
    if p.abs() > 1e-8 * scale {
        return Err(Error::Validation(format!(
            "point is off-shell: lifted symbol = {p:.3e}; the factored field is only \
             defined in the characteristic set"
        )));
    }

    let a = side.arg_sign();
    let xb = q.base_x;
    let s = q.s;
    let y_arg: Vec<f64> = q.base_y.iter().zip(&q.z).map(|(yb, zi)| yb + a * xb * zi).collect();
    let x_arg = xb * s;

    let h0 = chart.h0(&y_arg, &q.zeta);
    let h1 = chart.h1(x_arg, &y_arg, &q.zeta);
    let dh0_dy = chart.dh0_dy(&y_arg, &q.zeta);
    let dh0_de = chart.dh0_deta(&y_arg, &q.zeta);
    let dh1_dx = chart.dh1_dx(x_arg, &y_arg, &q.zeta);
    let dh1_dy = chart.dh1_dy(x_arg, &y_arg, &q.zeta);
    let dh1_de = chart.dh1_deta(x_arg, &y_arg, &q.zeta);

    let z_dot_dh0: f64 = q.z.iter().zip(&dh0_dy).map(|(zi, d)| zi * d).sum();
    let z_dot_dh1: f64 = q.z.iter().zip(&dh1_dy).map(|(zi, d)| zi * d).sum();

    let factored = DoubleTangent {
        ds: -2.0 * q.sigma,
        dz: dh0_de.iter().zip(&dh1_de).map(|(d0, d1)| d0 + s * xb * d1).collect(),
        dbase_x: 0.0,
        dbase_y: vec![0.0; dim],
        dsigma: -(xb * h1 + s * xb * xb * dh1_dx),
        dxi: -(a * z_dot_dh0 + s * h1 + s * s * xb * dh1_dx + s * xb * a * z_dot_dh1),
        dzeta: dh0_dy
            .iter()
            .zip(&dh1_dy)
            .map(|(d0, d1)| -a * (xb * d0 + s * xb * xb * d1))
            .collect(),
        dmu: dh0_dy.iter().zip(&dh1_dy).map(|(d0, d1)| -(d0 + s * xb * d1)).collect(),
    };

    // Full field before the on-shell substitution; only the sigma slot
    // differs from s^2 * factored.
    let full = DoubleTangent {
        ds: s2 * factored.ds,
        dz: factored.dz.iter().map(|v| s2 * v).collect(),
        dbase_x: 0.0,
        dbase_y: vec![0.0; dim],
        dsigma: -s
            * (-2.0 * q.sigma * q.sigma + 2.0 * h0 + 3.0 * s * xb * h1
                + s * s * xb * xb * dh1_dx),
        dxi: s2 * factored.dxi,
        dzeta: factored.dzeta.iter().map(|v| s2 * v).collect(),
        dmu: factored.dmu.iter().map(|v| s2 * v).collect(),
    };

    Ok((full, factored))
}
