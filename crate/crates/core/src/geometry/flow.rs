//! Principal symbol, 0-Hamilton field, and adaptive bicharacteristic
//! integration on a single chart.

use super::chart::MetricChart;
use super::double::FlowSide;
use super::{BoundaryLimit, PhasePoint, Trajectory, TrajectorySample};
use crate::error::{Error, Result};
use crate::util::{AdaptiveRk, StepControl};

/// Below this boundary coordinate a trajectory is annotated as having
/// reached future infinity.
const FUTURE_DETECT_X: f64 = 1e-2;

pub fn principal_symbol(chart: &MetricChart, q: &PhasePoint) -> Result<f64> {
    if q.x < 0.0 {
        return Err(Error::Domain(format!("boundary coordinate x = {} < 0", q.x)));
    }
    if q.dim_y() != chart.dim_y() {
        return Err(Error::Validation(format!(
            "point has {} tangential coordinates, chart expects {}",
            q.dim_y(),
            chart.dim_y()
        )));
    }
    Ok(-q.tau * q.tau + chart.h0(&q.y, &q.eta) + q.x * chart.h1(q.x, &q.y, &q.eta))
}

/// Phase-space tangent `(dx, dy, dtau, deta)` of the 0-Hamilton field.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseTangent {
    pub dx: f64,
    pub dy: Vec<f64>,
    pub dtau: f64,
    pub deta: Vec<f64>,
}

pub fn hamilton_field(chart: &MetricChart, q: &PhasePoint) -> Result<PhaseTangent> {
    if q.x < 0.0 {
        return Err(Error::Domain(format!("boundary coordinate x = {} < 0", q.x)));
    }
    let dim = chart.dim_y();
    if q.dim_y() != dim {
        return Err(Error::Validation(format!(
            "point has {} tangential coordinates, chart expects {dim}",
            q.dim_y()
        )));
    }

    // p = -tau^2 + h0 + x h1, so
    //   p_tau = -2 tau
    //   p_x   = h1 + x dh1/dx
    //   p_y   = dh0/dy + x dh1/dy
    //   p_eta = dh0/deta + x dh1/deta
    let p_tau = -2.0 * q.tau;
    let p_x = chart.h1(q.x, &q.y, &q.eta) + q.x * chart.dh1_dx(q.x, &q.y, &q.eta);
    let dh0_dy = chart.dh0_dy(&q.y, &q.eta);
    let dh1_dy = chart.dh1_dy(q.x, &q.y, &q.eta);
    let dh0_de = chart.dh0_deta(&q.y, &q.eta);
    let dh1_de = chart.dh1_deta(q.x, &q.y, &q.eta);

    let p_y: Vec<f64> = dh0_dy.iter().zip(&dh1_dy).map(|(a, b)| a + q.x * b).collect();
    let p_eta: Vec<f64> = dh0_de.iter().zip(&dh1_de).map(|(a, b)| a + q.x * b).collect();

    let eta_dot_peta: f64 = q.eta.iter().zip(&p_eta).map(|(e, pe)| e * pe).sum();
    let out = PhaseTangent {
        dx: q.x * p_tau,
        dy: p_eta.iter().map(|pe| q.x * pe).collect(),
        dtau: -(q.x * p_x + eta_dot_peta),
        deta: p_y
            .iter()
            .zip(&q.eta)
            .map(|(py, e)| -(q.x * py - p_tau * e))
            .collect(),
    };
    if !(out.dx.is_finite()
        && out.dtau.is_finite()
        && out.dy.iter().all(|v| v.is_finite())
        && out.deta.iter().all(|v| v.is_finite()))
    {
        return Err(Error::Numerical(format!("non-finite Hamilton field at x = {}", q.x)));
    }
    Ok(out)
}

fn field_into(chart: &MetricChart, state: &[f64], dstate: &mut [f64]) {
    let dim = chart.dim_y();
    let q = PhasePoint::unpack(state, dim);
    match hamilton_field(chart, &q) {
        Ok(t) => {
            dstate[0] = t.dx;
            dstate[1..1 + dim].copy_from_slice(&t.dy);
            dstate[1 + dim] = t.dtau;
            dstate[2 + dim..2 + 2 * dim].copy_from_slice(&t.deta);
        }
        Err(_) => {
            // Signal the step controller instead of panicking mid-stage.
            for d in dstate.iter_mut() {
                *d = f64::NAN;
            }
        }
    }
}

/// Integrate the affine-parametrized bicharacteristic through `q0` up to
/// flow time `horizon`.
///
/// `q0` must be on-shell to within `tol`; the conserved symbol is monitored
/// at every accepted step and drift beyond `10 tol` aborts the run. No
/// renormalization is applied to the state between steps.
pub fn integrate_bicharacteristic(
    chart: &MetricChart,
    q0: &PhasePoint,
    horizon: f64,
    tol: f64,
) -> Result<Trajectory> {
    if !(tol > 0.0) {
        return Err(Error::Validation(format!("tolerance {tol} must be positive")));
    }
    if horizon < 0.0 {
        return Err(Error::Validation(format!("flow horizon {horizon} must be >= 0")));
    }
    let p0 = principal_symbol(chart, q0)?;
    if p0.abs() > tol {
        return Err(Error::Validation(format!(
            "initial point is off-shell: |p| = {:.3e} > tol = {tol:.3e}",
            p0.abs()
        )));
    }

    let mut samples = vec![TrajectorySample { t: 0.0, point: q0.clone(), drift: 0.0 }];
    if horizon == 0.0 {
        return Ok(Trajectory { side: FlowSide::Left, samples, steps: 0, max_drift: 0.0, limit: None });
    }

    let rk = AdaptiveRk { rtol: (tol * 1e-2).min(1e-9), atol: 1e-14, ..AdaptiveRk::default() };
    let dim = chart.dim_y();
    let mut max_drift = 0.0f64;
    let mut drift_failure: Option<Error> = None;
    let bound = 10.0 * tol;
    let steps = rk.integrate(
        0.0,
        &q0.pack(),
        |_t, y, dy| field_into(chart, y, dy),
        |t, y| {
            if t == 0.0 {
                return StepControl::Continue;
            }
            let q = PhasePoint::unpack(y, dim);
            let p = principal_symbol(chart, &q).unwrap_or(f64::NAN);
            let drift = (p - p0).abs();
            max_drift = max_drift.max(drift);
            samples.push(TrajectorySample { t, point: q, drift: p - p0 });
            if !drift.is_finite() || drift > bound {
                drift_failure = Some(Error::DriftExceeded { drift, bound, t });
                return StepControl::Stop;
            }
            if t >= horizon {
                return StepControl::Stop;
            }
            StepControl::Continue
        },
    )?;
    if let Some(err) = drift_failure {
        return Err(err);
    }

    let end = samples.last().unwrap().point.clone();
    let falling = samples.len() >= 2 && end.x < samples[samples.len() - 2].point.x;
    let limit = if end.x <= FUTURE_DETECT_X && falling {
        Some(BoundaryLimit::FutureInfinity)
    } else {
        None
    };
    Ok(Trajectory { side: FlowSide::Left, samples, steps, max_drift, limit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::chart::CustomChart;
    use std::sync::Arc;

    fn q(x: f64, y: f64, tau: f64, eta: f64) -> PhasePoint {
        PhasePoint::new(x, vec![y], tau, vec![eta])
    }

    #[test]
    fn symbol_examples() {
        let hs = MetricChart::half_space(2).unwrap();
        assert_eq!(principal_symbol(&hs, &q(1.0, 0.0, 1.0, 1.0)).unwrap(), 0.0);
        assert_eq!(principal_symbol(&hs, &q(0.5, 0.0, 2.0, 0.0)).unwrap(), -4.0);
        assert!(principal_symbol(&hs, &q(-0.1, 0.0, 0.0, 0.0)).is_err());

        // On the de Sitter chart at x = 0, eta = R/2 makes h0 = 1.
        let ds = MetricChart::exact_desitter(1.0).unwrap();
        let p = principal_symbol(&ds, &q(0.0, 0.3, 1.0, 0.5)).unwrap();
        assert!(p.abs() < 1e-15);
    }

    #[test]
    fn half_space_field_hand_value() {
        let hs = MetricChart::half_space(2).unwrap();
        let t = hamilton_field(&hs, &q(1.0, 0.0, 1.0, 1.0)).unwrap();
        assert_eq!(t.dx, -2.0);
        assert_eq!(t.dy, vec![2.0]);
        assert_eq!(t.dtau, -2.0);
        assert_eq!(t.deta, vec![-2.0]);
        // tau = 0 forces dx = 0 regardless of the rest.
        let t0 = hamilton_field(&hs, &q(0.7, 0.4, 0.0, 2.0)).unwrap();
        assert_eq!(t0.dx, 0.0);
    }

    /// Finite-difference oracle: recompute the field from the displayed
    /// formula using only difference quotients of the principal symbol.
    fn fd_field(chart: &MetricChart, q0: &PhasePoint) -> PhaseTangent {
        let h = 1e-6;
        let p = |q: &PhasePoint| principal_symbol(chart, q).unwrap();
        let mut qp = q0.clone();
        let mut qm = q0.clone();
        let d_of = |qp: &PhasePoint, qm: &PhasePoint| (p(qp) - p(qm)) / (2.0 * h);

        qp.tau += h;
        qm.tau -= h;
        let p_tau = d_of(&qp, &qm);
        qp.tau = q0.tau;
        qm.tau = q0.tau;

        qp.x += h;
        qm.x -= h;
        let p_x = d_of(&qp, &qm);
        qp.x = q0.x;
        qm.x = q0.x;

        let dim = q0.dim_y();
        let mut p_y = vec![0.0; dim];
        let mut p_eta = vec![0.0; dim];
        for i in 0..dim {
            qp.y[i] += h;
            qm.y[i] -= h;
            p_y[i] = d_of(&qp, &qm);
            qp.y[i] = q0.y[i];
            qm.y[i] = q0.y[i];

            qp.eta[i] += h;
            qm.eta[i] -= h;
            p_eta[i] = d_of(&qp, &qm);
            qp.eta[i] = q0.eta[i];
            qm.eta[i] = q0.eta[i];
        }
        let eta_dot: f64 = q0.eta.iter().zip(&p_eta).map(|(e, pe)| e * pe).sum();
        PhaseTangent {
            dx: q0.x * p_tau,
            dy: p_eta.iter().map(|pe| q0.x * pe).collect(),
            dtau: -(q0.x * p_x + eta_dot),
            deta: p_y.iter().zip(&q0.eta).map(|(py, e)| -(q0.x * py - p_tau * e)).collect(),
        }
    }

    #[test]
    fn field_matches_finite_difference_oracle() {
        let ds = MetricChart::exact_desitter(1.0).unwrap();
        let samples = [q(0.8, 0.2, 0.9, 0.6), q(0.35, -1.0, -0.4, 0.25), q(1.7, 0.0, 0.1, -1.0)];
        for q0 in &samples {
            let a = hamilton_field(&ds, q0).unwrap();
            let b = fd_field(&ds, q0);
            let scale = 1.0 + a.dx.abs() + a.dtau.abs();
            assert!((a.dx - b.dx).abs() / scale < 1e-6);
            assert!((a.dtau - b.dtau).abs() / scale < 1e-6);
            assert!((a.dy[0] - b.dy[0]).abs() / scale < 1e-6);
            assert!((a.deta[0] - b.deta[0]).abs() / scale < 1e-6);
        }
    }

    #[test]
    fn custom_chart_reproduces_half_space() {
        // Same coefficients as the built-in flat chart, but exercised
        // through the finite-difference fallback.
        let custom = MetricChart::custom(
            3,
            CustomChart::new(
                Arc::new(|_y: &[f64], eta: &[f64]| eta.iter().map(|e| e * e).sum()),
                Arc::new(|_x, _y: &[f64], _eta: &[f64]| 0.0),
            ),
        )
        .unwrap();
        let builtin = MetricChart::half_space(3).unwrap();
        let q0 = PhasePoint::new(0.9, vec![0.1, -0.4], 1.0, vec![0.8, 0.6]);
        let a = hamilton_field(&custom, &q0).unwrap();
        let b = hamilton_field(&builtin, &q0).unwrap();
        assert!((a.dx - b.dx).abs() < 1e-9);
        assert!((a.dtau - b.dtau).abs() < 1e-9);
        for i in 0..2 {
            assert!((a.dy[i] - b.dy[i]).abs() < 1e-9);
            assert!((a.deta[i] - b.deta[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn half_space_null_line_is_conserved() {
        // On tau = eta the projected path keeps x + y constant.
        let hs = MetricChart::half_space(2).unwrap();
        let traj = integrate_bicharacteristic(&hs, &q(1.0, 0.0, 1.0, 1.0), 8.0, 1e-8).unwrap();
        for s in &traj.samples {
            assert!(
                (s.point.x + s.point.y[0] - 1.0).abs() <= 1e-8,
                "left the null line at t = {}",
                s.t
            );
        }
        assert!(traj.max_drift <= 1e-7);
        assert!(traj.last().point.x < 0.1);
    }

    #[test]
    fn zero_horizon_gives_single_sample() {
        let hs = MetricChart::half_space(2).unwrap();
        let traj = integrate_bicharacteristic(&hs, &q(1.0, 0.0, 1.0, 1.0), 0.0, 1e-8).unwrap();
        assert_eq!(traj.samples.len(), 1);
        assert_eq!(traj.steps, 0);
    }

    #[test]
    fn off_shell_start_is_rejected() {
        let hs = MetricChart::half_space(2).unwrap();
        assert!(integrate_bicharacteristic(&hs, &q(1.0, 0.0, 1.0, 0.5), 1.0, 1e-8).is_err());
    }

    #[test]
    fn desitter_angle_follows_closed_form() {
        // Along a null bicharacteristic dw/dt = sech(t)/R with t = -ln x,
        // so w(t) - w(0) = (2/R)(atan e^t - atan 1).
        let radius = 1.0;
        let ds = MetricChart::exact_desitter(radius).unwrap();
        // Start at the equator t = 0 (x = 1): tau = 2 eta / (R (1+x^2)) on-shell.
        let eta0 = 0.5;
        let tau0 = 2.0 * eta0 / (radius * 2.0);
        let traj = integrate_bicharacteristic(
            &ds,
            &PhasePoint::new(1.0, vec![0.0], tau0, vec![eta0]),
            40.0,
            1e-8,
        )
        .unwrap();
        assert!(traj.max_drift <= 1e-7, "drift {}", traj.max_drift);
        for s in traj.samples.iter().skip(1) {
            let t = -s.point.x.ln();
            let predicted = (2.0 / radius) * (t.exp().atan() - 1.0f64.atan());
            assert!(
                (s.point.y[0] - predicted).abs() < 1e-6,
                "angle {} vs closed form {predicted} at x = {}",
                s.point.y[0],
                s.point.x
            );
        }
        // The run should have pushed x well toward future infinity.
        assert!(traj.last().point.x < 0.2, "x only reached {}", traj.last().point.x);
    }
}
