//! Weighted Lp norms and the self-similar source-scaling scan.
//!
//! The volume form of the 0-metric is dg = cosh(tau) dtau dtheta (in x it
//! is dx dtheta / x^2 up to the compact factor), so every x-power in an
//! integrand shifts convergence at the boundary by a full power. The
//! weighted norm here is
//!
//! ```text
//!     ||u||_{x^a Lp} = ( integral |x^{-a} u|^p dg )^{1/p},
//! ```
//!
//! the norm of the space x^a Lp(dg): membership means u = x^a v with v in
//! Lp. A divergence check on the tail of the slice contributions guards
//! against quietly reporting a finite number for a non-member.
//!
//! The scan drives a fixed profile through shrinking self-similar supports
//! x ~ x_anchor, solves forward, and compares x_anchor^{2r/p} ||u|| across
//! anchors. Each anchor gets its own grid: resolution requirements scale
//! like 1/x_anchor, so a shared grid would either waste the large anchors
//! or under-resolve the small ones, and the common discretization bias
//! cancels in the ratio.

use serde::Serialize;

use super::{evolve_observed, SpacetimeGrid};
use crate::error::{Error, Result};

/// Fraction of the support diameter that must be resolved per direction.
const MIN_CELLS: usize = 8;
/// Support of the standard profile in self-similar coordinates
/// (s, z) = (x / x_anchor, (y - y_anchor) / x_anchor).
const SUPPORT_S: (f64, f64) = (0.75, 1.25);
const SUPPORT_Z: f64 = 0.25;

fn cinf_bump(t: f64) -> f64 {
    if t * t < 1.0 {
        (1.0 - 1.0 / (1.0 - t * t)).exp()
    } else {
        0.0
    }
}

/// Smooth bump in self-similar coordinates, supported in s in (0.75, 1.25),
/// |z| < 0.25.
pub fn standard_profile(s: f64, z: f64) -> f64 {
    cinf_bump((s - 1.0) / 0.25) * cinf_bump(z / 0.25)
}

fn wrap_angle(q: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut w = q.rem_euclid(two_pi);
    if w >= std::f64::consts::PI {
        w -= two_pi;
    }
    w
}

/// Source member phi((x - ..)/x_anchor, ..) sampled on a grid and
/// normalized to unit mass in the 0-volume form. Samples are stored only
/// for the slice range that meets the support.
#[derive(Clone, Debug)]
pub struct BumpFamily {
    pub grid: SpacetimeGrid,
    pub x_anchor: f64,
    pub y_anchor: f64,
    /// First slice index with support.
    pub first_slice: usize,
    samples: Vec<Vec<f64>>,
    /// Mass in dg after normalization; 1 up to quadrature roundoff.
    pub l1_norm: f64,
}

impl BumpFamily {
    /// Writes slice m of the source into out (zero outside the support
    /// rows). out.len() must equal n_theta.
    pub fn write_slice(&self, m: usize, out: &mut [f64]) {
        out.fill(0.0);
        let k = m.wrapping_sub(self.first_slice);
        if k < self.samples.len() {
            out.copy_from_slice(&self.samples[k]);
        }
    }

    /// Full source table shaped for the batch evolver.
    pub fn source_samples(&self) -> Vec<Vec<f64>> {
        let ns = self.grid.n_slices();
        let n_theta = self.grid.n_theta();
        let mut src = vec![vec![0.0; n_theta]; ns];
        for (m, row) in src.iter_mut().enumerate() {
            self.write_slice(m, row);
        }
        src
    }
}

pub fn bump_family(
    phi: impl Fn(f64, f64) -> f64,
    x_anchor: f64,
    y_anchor: f64,
    grid: &SpacetimeGrid,
) -> Result<BumpFamily> {
    if !(x_anchor.is_finite() && x_anchor > 0.0 && y_anchor.is_finite()) {
        return Err(Error::Validation(format!(
            "anchor ({x_anchor}, {y_anchor}) must be finite with x_anchor > 0"
        )));
    }
    // Support in tau: x in (0.75, 1.25) x_anchor.
    let tau_lo = (1.0 / (SUPPORT_S.1 * x_anchor)).ln();
    let tau_hi = (1.0 / (SUPPORT_S.0 * x_anchor)).ln();
    let d_theta = grid.delta_theta();
    let dt = grid.delta_tau();
    let theta_cells = (2.0 * SUPPORT_Z * x_anchor / d_theta).floor() as usize;
    if theta_cells < MIN_CELLS {
        let needed = 2.0 * std::f64::consts::PI * MIN_CELLS as f64 / (2.0 * SUPPORT_Z * x_anchor);
        return Err(Error::UnresolvedSource {
            required: MIN_CELLS,
            suggested_cells: needed.ceil() as usize,
        });
    }
    let tau_cells = ((tau_hi - tau_lo) / dt).floor() as usize;
    if tau_cells < MIN_CELLS {
        return Err(Error::Validation(format!(
            "source support spans {tau_cells} time steps; need at least {MIN_CELLS} \
             (shrink the step below {:.3e})",
            (tau_hi - tau_lo) / MIN_CELLS as f64
        )));
    }
    // The evolver needs two quiet slices before the support and the scan
    // reads the solution after it.
    if !(tau_lo > grid.tau_min() + dt && tau_hi < grid.tau_max()) {
        return Err(Error::Validation(format!(
            "source support tau in [{tau_lo:.3}, {tau_hi:.3}] does not fit inside the grid \
             [{:.3}, {:.3}] with a quiet lead-in",
            grid.tau_min(),
            grid.tau_max()
        )));
    }

    let first_slice = ((tau_lo - grid.tau_min()) / dt).ceil() as usize;
    let last_slice = ((tau_hi - grid.tau_min()) / dt).floor() as usize;
    let n_theta = grid.n_theta();
    let mut samples = vec![vec![0.0; n_theta]; last_slice - first_slice + 1];
    let mut mass = 0.0;
    for (k, row) in samples.iter_mut().enumerate() {
        let i = first_slice + k;
        let tau = grid.tau(i);
        let s = grid.x(i) / x_anchor;
        let cell = tau.cosh() * dt * d_theta;
        for (j, v) in row.iter_mut().enumerate() {
            let z = wrap_angle(grid.theta(j) - y_anchor) / x_anchor;
            *v = phi(s, z);
            mass += *v * cell;
        }
    }
    if !(mass.is_finite() && mass > 0.0) {
        return Err(Error::Validation(
            "profile has no mass on the grid; support may fall between sample points".into(),
        ));
    }
    let mut l1_norm = 0.0;
    for (k, row) in samples.iter_mut().enumerate() {
        let cell = grid.tau(first_slice + k).cosh() * dt * d_theta;
        for v in row.iter_mut() {
            *v /= mass;
            l1_norm += v.abs() * cell;
        }
    }
    Ok(BumpFamily {
        grid: *grid,
        x_anchor,
        y_anchor,
        first_slice,
        samples,
        l1_norm,
    })
}

fn slice_contribution(grid: &SpacetimeGrid, i: usize, slice: &[f64], p: f64, a: f64) -> f64 {
    let x = grid.x(i);
    let w = x.powf(-a * p) * grid.tau(i).cosh() * grid.delta_tau() * grid.delta_theta();
    slice.iter().map(|&u| u.abs().powf(p)).sum::<f64>() * w
}

/// Trapezoid reduction with a divergence guard: if the contributions are
/// still growing across the last tenth of the time range the integral has
/// not converged on this grid and the norm is reported as infinite.
fn reduce_contributions(contrib: &[f64], p: f64) -> f64 {
    let ns = contrib.len();
    let k = (ns / 10).clamp(2, ns / 2);
    let tail: f64 = contrib[ns - k..].iter().sum();
    let prev: f64 = contrib[ns - 2 * k..ns - k].iter().sum();
    if tail > 0.0 && tail > 1.02 * prev {
        return f64::INFINITY;
    }
    let total: f64 =
        contrib.iter().sum::<f64>() - 0.5 * contrib[0] - 0.5 * contrib[ns - 1];
    total.powf(1.0 / p)
}

/// Norm of u in the space x^a Lp(dg): the integral computed is
/// |x^{-a} u|^p against the 0-volume, then the 1/p power.
pub fn weighted_lp_norm(ev: &super::Evolution, p: f64, a: f64) -> Result<f64> {
    if !(p.is_finite() && p > 2.0) {
        return Err(Error::Validation(format!("p = {p} out of range (2, inf)")));
    }
    if !a.is_finite() {
        return Err(Error::Validation("weight exponent must be finite".into()));
    }
    let grid = &ev.grid;
    let contrib: Vec<f64> = ev
        .u
        .iter()
        .enumerate()
        .map(|(i, s)| slice_contribution(grid, i, s, p, a))
        .collect();
    Ok(reduce_contributions(&contrib, p))
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanRow {
    pub x_anchor: f64,
    pub n_theta: usize,
    pub n_tau: usize,
    pub norm: f64,
    /// x_anchor^{2r/p} * norm; bounded uniformly in the anchor when the
    /// forward estimate holds.
    pub normalized: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanReport {
    pub lambda: f64,
    pub p: f64,
    pub r: f64,
    pub l: f64,
    /// Space exponent: the norm weighs the field by x^{-weight_a}.
    pub weight_a: f64,
    pub hypotheses_ok: bool,
    pub violations: Vec<String>,
    pub rows: Vec<ScanRow>,
    /// max/min of the normalized column.
    pub ratio: f64,
}

fn anchor_grid(x_anchor: f64, tau_max: f64) -> Result<SpacetimeGrid> {
    // 16 cells across the angular support width 0.5 x_anchor, rounded up to
    // a power of two for the FFT.
    let cells = 2.0 * std::f64::consts::PI * 2.0 * MIN_CELLS as f64 / (2.0 * SUPPORT_Z * x_anchor);
    let n_theta = (cells.ceil() as usize).next_power_of_two().max(256);
    let tau_min = (1.0 / (SUPPORT_S.1 * x_anchor)).ln() - 0.15;
    if tau_max < tau_min + 1.5 {
        return Err(Error::Validation(format!(
            "tau_max = {tau_max:.2} leaves less than 1.5 units past the source at anchor \
             {x_anchor:.3e}; raise it above {:.2}",
            tau_min + 1.5
        )));
    }
    let dt_cap = SpacetimeGrid::stable_dtau(tau_min, tau_max, n_theta).min(0.04);
    let dt = 0.75 * dt_cap;
    let n_tau = ((tau_max - tau_min) / dt).ceil() as usize;
    SpacetimeGrid::new(tau_min, tau_max, n_tau, n_theta)
}

/// Scaling scan of the forward estimate: for each anchor, a unit-mass
/// self-similar source is solved forward and its weighted norm recorded.
/// Hypothesis checks (r and l against the indicial bounds) only annotate
/// the report; the scan still runs so violations can be observed.
pub fn lp_scaling_scan(
    lambda: f64,
    p: f64,
    r: f64,
    l: f64,
    anchors: &[f64],
    tau_max: f64,
) -> Result<ScanReport> {
    if !(p.is_finite() && p > 2.0) {
        return Err(Error::Validation(format!("p = {p} out of range (2, inf)")));
    }
    if anchors.is_empty() {
        return Err(Error::Validation("need at least one anchor".into()));
    }
    for &xa in anchors {
        if !(xa.is_finite() && xa > 0.0 && xa <= 0.4) {
            return Err(Error::Validation(format!(
                "anchor {xa} out of range (0, 0.4]; the source must sit near the boundary"
            )));
        }
    }
    let nu = (0.25 + lambda).max(0.0).sqrt();
    let mut violations = Vec::new();
    if !(r > 0.5f64.max(nu)) {
        violations.push(format!(
            "r = {r} violates r > max(1/2, {nu:.4}); uniformity is not guaranteed"
        ));
    }
    if !(l >= 0.0f64.max(nu - 0.5)) {
        violations.push(format!(
            "l = {l} violates l >= max(0, {:.4}); the target space misses the range",
            nu - 0.5
        ));
    }
    let hypotheses_ok = violations.is_empty();
    let weight_a = -l + 2.0 * (l - r) / p;

    let mut rows = Vec::with_capacity(anchors.len());
    for &xa in anchors {
        let grid = anchor_grid(xa, tau_max)?;
        let family = bump_family(standard_profile, xa, 0.0, &grid)?;
        let ns = grid.n_slices();
        let mut contrib = vec![0.0; ns];
        {
            let contrib_ref = &mut contrib;
            let g = &grid;
            evolve_observed(
                &grid,
                lambda,
                |m, out| family.write_slice(m, out),
                |i, slice| contrib_ref[i] = slice_contribution(g, i, slice, p, weight_a),
            )?;
        }
        let norm = reduce_contributions(&contrib, p);
        if !norm.is_finite() {
            violations.push(format!(
                "norm diverges at anchor {xa:.3e}: the field is not in the weighted space"
            ));
        }
        rows.push(ScanRow {
            x_anchor: xa,
            n_theta: grid.n_theta(),
            n_tau: grid.n_tau(),
            norm,
            normalized: xa.powf(2.0 * r / p) * norm,
        });
    }
    let max = rows.iter().map(|r| r.normalized).fold(f64::NEG_INFINITY, f64::max);
    let min = rows.iter().map(|r| r.normalized).fold(f64::INFINITY, f64::min);
    let ratio = if min > 0.0 && max.is_finite() { max / min } else { f64::INFINITY };
    Ok(ScanReport {
        lambda,
        p,
        r,
        l,
        weight_a,
        hypotheses_ok,
        violations,
        rows,
        ratio,
    })
}
