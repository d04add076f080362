//! 0-cotangent geometry: metric charts, the 0-Hamilton flow, the projective
//! double-space fields, and light-cone flowouts with the embeddedness check.
//!
//! Convention (pinned here, used everywhere): Lorentzian signature
//! `(-, +, ..., +)`, principal symbol
//!
//! ```text
//! p = -tau^2 + h0(y, eta) + x h1(x, y, eta),
//! ```
//!
//! and the Hamilton field normalized by `omega(., H_p) = dp`, which in the
//! 0-coordinates reads
//!
//! ```text
//! H_p = x p_tau d_x + x p_eta . d_y - (x p_x + eta . p_eta) d_tau
//!       - (x p_y - p_tau eta) . d_eta .
//! ```

mod chart;
mod double;
mod flow;
mod flowout;

pub use chart::{CustomChart, MetricChart};
pub use double::{
    double_space_hamilton_field, double_space_symbol, lift_cotangent_coordinates,
    DoublePhasePoint, DoubleTangent, FlowSide,
};
pub use flow::{hamilton_field, integrate_bicharacteristic, principal_symbol, PhaseTangent};
pub use flowout::{check_a3, flowout_light_cone, A3Verdict, FlowoutSurface, IntersectionReport, ProjectedCurve};

use serde::Serialize;

/// Point in the 0-cotangent coordinates `(x, y, tau, eta)`: `tau` is dual to
/// `dx/x`, `eta` to `dy/x`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhasePoint {
    pub x: f64,
    pub y: Vec<f64>,
    pub tau: f64,
    pub eta: Vec<f64>,
}

impl PhasePoint {
    pub fn new(x: f64, y: Vec<f64>, tau: f64, eta: Vec<f64>) -> Self {
        assert_eq!(y.len(), eta.len(), "y and eta must have the same dimension");
        PhasePoint { x, y, tau, eta }
    }

    pub fn dim_y(&self) -> usize {
        self.y.len()
    }

    pub(crate) fn pack(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 + 2 * self.y.len());
        v.push(self.x);
        v.extend_from_slice(&self.y);
        v.push(self.tau);
        v.extend_from_slice(&self.eta);
        v
    }

    pub(crate) fn unpack(state: &[f64], dim_y: usize) -> Self {
        PhasePoint {
            x: state[0],
            y: state[1..1 + dim_y].to_vec(),
            tau: state[1 + dim_y],
            eta: state[2 + dim_y..2 + 2 * dim_y].to_vec(),
        }
    }
}

/// Which boundary component a trajectory was observed to approach.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BoundaryLimit {
    FutureInfinity,
    PastInfinity,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub point: PhasePoint,
    /// Symbol drift `p(point) - p(start)` at this sample.
    pub drift: f64,
}

/// Time-stamped bicharacteristic with integrator statistics.
#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub side: FlowSide,
    pub samples: Vec<TrajectorySample>,
    pub steps: usize,
    pub max_drift: f64,
    pub limit: Option<BoundaryLimit>,
}

impl Trajectory {
    pub fn last(&self) -> &TrajectorySample {
        self.samples.last().expect("trajectories are never empty")
    }
}
