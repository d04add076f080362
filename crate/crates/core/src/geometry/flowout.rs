//! Light-cone flowout and the embeddedness verdicts.
//!
//! A flowout traces the projected null flow from the fiber over one base
//! point, one curve per initial direction on the unit sphere of the
//! boundary metric. Curves are parametrized by `ln(base_x / x)`: the null
//! flow rescaled so the boundary-defining coordinate decays exactly like
//! `e^{-t}`. This reaches `x = 1e-6` in ~14 parameter units where the
//! affine flow would need ~1e6, and the rescaling leaves both the
//! projected curve and the conserved symbol untouched.
//!
//! The truncation depth is a double-precision constraint, not a choice: the
//! flow conserves the symbol only to machine rounding, and near the light
//! cone the relative on-shell error is |delta p| / (2 tau^2), which reaches
//! O(1) once tau ~ sqrt(machine epsilon), i.e. ~18.4 log units below the
//! seed scale. There `tau` can cross zero and the forward flow loses
//! meaning. Stopping at 1e-6 (13.8 log units) keeps four decades of margin.
//!
//! The exact de Sitter chart gets a dedicated first leg: seeding a cone far
//! in the past inside the boundary chart loses `h0 + x h1` to cancellation
//! (the on-shell `tau` is exponentially smaller than either term), so for
//! `x > e^{-1}` the angle is advanced in the global frame, where the null
//! condition is explicit, and the run switches to the boundary chart once
//! cancellation is harmless.
//!
//! Self-intersections are found on a spatial hash of curve segments at
//! resolution `cell = sqrt(tol)`; a pair is flagged when the exact
//! segment-segment distance drops below `cell / 2`, and pairs within 3
//! cells of the base cone point are discarded (the cone vertex is a real
//! conic singularity, not an embeddedness failure). With those constants a
//! fan of up to 16 directions cannot false-positive at the vertex: curves
//! leaving the exclusion ball are separated by at least
//! `2 sin(pi/16) * 3 cell / sqrt(2) > cell / 2`. Denser fans would
//! outresolve the exclusion zone and are rejected.

use super::chart::MetricChart;
use super::flow::{hamilton_field, principal_symbol};
use super::PhasePoint;
use crate::error::{Error, Result};
use crate::util::{AdaptiveRk, StepControl};
use serde::Serialize;
use std::collections::HashMap;

/// Flow is truncated once the boundary-defining coordinate falls to this.
/// See the module docs: depth is limited by on-shell conservation in double
/// precision, so this cannot be pushed much below 1e-6 at seed scale 1.
const X_CUTOFF: f64 = 1e-6;
/// Intersections with x at or below this count as boundary contacts.
const BOUNDARY_X: f64 = 1e-2;
/// Boundary coordinate standing in for a base at past infinity (e^18; the
/// angular truncation this induces on the exact de Sitter chart is ~3e-8).
const PAST_INFINITY_X: f64 = 6.565996913733051e7;
/// Global-frame time at which exact de Sitter tracing switches to the
/// boundary chart.
const GLOBAL_SWITCH_T: f64 = 1.0;
/// Cap on the parameter step, keeping curve segments short enough for the
/// candidate hash (projected speeds are O(1) on the charts in scope).
const MAX_PARAM_STEP: f64 = 0.01;
/// Candidate hash pitch; segments under MAX_PARAM_STEP * speed always fit
/// in a small block of cells.
const CAND_CELL: f64 = 0.03;
/// Two raw contacts of the same curve pair within this parameter gap are
/// reported as one intersection.
const MERGE_GAP: f64 = 0.1;

/// One projected null curve: chart coordinates `(x(t), y(t))` sampled along
/// strictly increasing parameter values.
#[derive(Clone, Debug, Serialize)]
pub struct ProjectedCurve {
    /// Euclidean unit direction of the seed covector in eta-space.
    pub direction: Vec<f64>,
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<Vec<f64>>,
}

/// A close approach of two distinct curves. Location is given in chart
/// coordinates of curve `curve_a` at its parameter `t_a`.
#[derive(Clone, Debug, Serialize)]
pub struct IntersectionReport {
    pub curve_a: usize,
    pub curve_b: usize,
    pub t_a: f64,
    pub t_b: f64,
    pub x: f64,
    pub y: Vec<f64>,
    pub separation: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FlowoutSurface {
    pub base_x: f64,
    pub base_y: Vec<f64>,
    pub tol: f64,
    pub curves: Vec<ProjectedCurve>,
    pub intersections: Vec<IntersectionReport>,
    /// Largest parameter window, starting at the base, whose samples are
    /// free of (non-vertex) close approaches.
    pub intersection_free_window: (f64, f64),
    pub max_drift: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum A3Verdict {
    Holds,
    FailsAtInterior { x: f64, y: Vec<f64>, t: f64 },
    FailsAtBoundary { x: f64, y: Vec<f64>, t: f64 },
}

/// Trace the projected light cone over `(base_x, base_y)`.
///
/// `base_x = f64::INFINITY` places the base at past infinity (exact de
/// Sitter); model charts may use an interior pole such as `base_x = 1`.
/// A curve that fails to reach future infinity (a turning point, or step
/// exhaustion) aborts the flowout with `TrajectoryStalled`.
pub fn flowout_light_cone(
    chart: &MetricChart,
    base_x: f64,
    base_y: &[f64],
    n_dirs: usize,
    tol: f64,
) -> Result<FlowoutSurface> {
    if !(tol > 0.0 && tol <= 1e-4) {
        return Err(Error::Validation(format!(
            "tolerance {tol} outside (0, 1e-4]; the detection cell is sqrt(tol)"
        )));
    }
    if n_dirs < 8 {
        return Err(Error::Validation(format!("need at least 8 fan directions, got {n_dirs}")));
    }
    if n_dirs > 16 {
        return Err(Error::Validation(format!(
            "{n_dirs} directions would outresolve the base-cone exclusion zone (max 16)"
        )));
    }
    let dim = chart.dim_y();
    if base_y.len() != dim {
        return Err(Error::Validation(format!(
            "base has {} tangential coordinates, chart expects {dim}",
            base_y.len()
        )));
    }
    if dim > 2 {
        return Err(Error::Validation(
            "direction fans are implemented for spacetime dimensions 2 and 3".into(),
        ));
    }
    let x0 = if base_x.is_infinite() { PAST_INFINITY_X } else { base_x };
    if !(x0 > 0.0) {
        return Err(Error::Domain(format!("base coordinate {base_x} must be positive")));
    }

    let mut max_drift = 0.0f64;
    let mut curves = Vec::new();
    for dir in fan_directions(dim, n_dirs) {
        let curve = if let Some(radius) = chart.is_exact_desitter() {
            trace_desitter(chart, radius, x0, base_y, dir[0], tol, &mut max_drift)?
        } else {
            let seed = seed_null_covector(chart, x0, base_y, &dir)?;
            let mut curve = ProjectedCurve { direction: dir, t: vec![], x: vec![], y: vec![] };
            extend_generic_leg(chart, &seed, 0.0, false, tol, &mut curve, &mut max_drift)?;
            curve
        };
        curves.push(curve);
    }

    let desitter = chart.is_exact_desitter();
    let embed = move |x: f64, y: &[f64]| -> [f64; 3] {
        match desitter {
            // Compactified global frame: the angle is periodic and the
            // time coordinate (1 - x^2)/(1 + x^2) = tanh(-ln x) is bounded.
            Some(_) => [(1.0 - x * x) / (1.0 + x * x), y[0].cos(), y[0].sin()],
            None => [x, y[0], if y.len() > 1 { y[1] } else { 0.0 }],
        }
    };
    let (intersections, first_contact) = detect_intersections(&embed, x0, base_y, &curves, tol);
    let full_end = curves
        .iter()
        .filter_map(|c| c.t.last().copied())
        .fold(f64::INFINITY, f64::min);
    let window_end = first_contact.unwrap_or(full_end);

    Ok(FlowoutSurface {
        base_x: x0,
        base_y: base_y.to_vec(),
        tol,
        curves,
        intersections,
        intersection_free_window: (0.0, window_end),
        max_drift,
    })
}

/// Classify a flowout: embedded, or failing at an interior / boundary
/// location. Interior failures take precedence.
pub fn check_a3(surface: &FlowoutSurface) -> Result<A3Verdict> {
    if surface.curves.is_empty() || surface.curves.iter().all(|c| c.t.len() < 2) {
        return Err(Error::Validation("empty flowout surface".into()));
    }
    let earliest = |reports: Vec<&IntersectionReport>| {
        reports.into_iter().min_by(|a, b| a.t_a.total_cmp(&b.t_a)).cloned()
    };
    let interior: Vec<_> =
        surface.intersections.iter().filter(|r| r.x > BOUNDARY_X).collect();
    if let Some(r) = earliest(interior) {
        return Ok(A3Verdict::FailsAtInterior { x: r.x, y: r.y, t: r.t_a });
    }
    if let Some(r) = earliest(surface.intersections.iter().collect()) {
        return Ok(A3Verdict::FailsAtBoundary { x: r.x, y: r.y, t: r.t_a });
    }
    Ok(A3Verdict::Holds)
}

fn fan_directions(dim: usize, n_dirs: usize) -> Vec<Vec<f64>> {
    match dim {
        // S^0: only two null directions exist; the requested count keeps
        // its role as a density contract for higher dimensions.
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..n_dirs)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / n_dirs as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        _ => unreachable!("dimension checked by the caller"),
    }
}

/// Future-directed null covector over `(x0, y0)` with eta along `dir`,
/// normalized to h0 = 1.
fn seed_null_covector(
    chart: &MetricChart,
    x0: f64,
    y0: &[f64],
    dir: &[f64],
) -> Result<PhasePoint> {
    let nh = chart.h0(y0, dir);
    if !(nh > 0.0) {
        return Err(Error::Domain(format!(
            "boundary metric is not positive along the fan direction (h0 = {nh})"
        )));
    }
    let scale = nh.sqrt();
    let eta: Vec<f64> = dir.iter().map(|d| d / scale).collect();
    let q = 1.0 + x0 * chart.h1(x0, y0, &eta);
    if q <= 0.0 {
        return Err(Error::Domain(format!(
            "no real null covector over the base in this direction (h0 + x h1 = {q})"
        )));
    }
    if q <= 1e-6 {
        return Err(Error::Numerical(format!(
            "null cone seed lost to cancellation at x = {x0} (h0 + x h1 = {q:.3e}); \
             move the base toward the boundary"
        )));
    }
    Ok(PhasePoint::new(x0, y0.to_vec(), q.sqrt(), eta))
}

/// Append the log-time-parametrized null flow from `seed` to `curve` until
/// x reaches the cutoff. On-shell, tau shrinks proportionally to x on the
/// way to the boundary; a drop 1000x below that track is a turning point,
/// where forward log-time no longer parametrizes the affine flow.
fn extend_generic_leg(
    chart: &MetricChart,
    seed: &PhasePoint,
    t_offset: f64,
    skip_first: bool,
    tol: f64,
    curve: &mut ProjectedCurve,
    max_drift: &mut f64,
) -> Result<()> {
    let dim = chart.dim_y();
    let p0 = principal_symbol(chart, seed)?;
    let horizon = (seed.x / X_CUTOFF).ln();
    if horizon <= 0.0 {
        return Err(Error::Validation(format!(
            "seed is already past the cutoff (x = {})",
            seed.x
        )));
    }
    let rk = AdaptiveRk {
        rtol: (tol * 1e-2).min(1e-9),
        atol: 1e-14,
        h_max: MAX_PARAM_STEP,
        max_steps: 400_000,
        ..AdaptiveRk::default()
    };
    let tau_idx = 1 + dim;
    let field = |_t: f64, state: &[f64], dstate: &mut [f64]| {
        let q = PhasePoint::unpack(state, dim);
        let rate = 2.0 * q.tau;
        match hamilton_field(chart, &q) {
            Ok(f) if rate > 0.0 => {
                dstate[0] = f.dx / rate;
                dstate[1..1 + dim]
                    .iter_mut()
                    .zip(&f.dy)
                    .for_each(|(d, v)| *d = v / rate);
                dstate[tau_idx] = f.dtau / rate;
                dstate[tau_idx + 1..tau_idx + 1 + dim]
                    .iter_mut()
                    .zip(&f.deta)
                    .for_each(|(d, v)| *d = v / rate);
            }
            // Poison the stage; the controller rejects the step.
            _ => dstate.iter_mut().for_each(|d| *d = f64::NAN),
        }
    };

    let bound = 10.0 * tol;
    let tau_seed = seed.tau;
    let x_seed = seed.x;
    let mut failure: Option<Error> = None;
    let mut recorded = 0usize;
    rk.integrate(0.0, &seed.pack(), field, |t, state| {
        let q = PhasePoint::unpack(state, dim);
        if t > 0.0 {
            let p = principal_symbol(chart, &q).unwrap_or(f64::NAN);
            let drift = (p - p0).abs();
            if !drift.is_finite() || drift > bound {
                failure = Some(Error::DriftExceeded { drift, bound, t: t_offset + t });
                return StepControl::Stop;
            }
            *max_drift = max_drift.max(drift);
            if q.tau <= 1e-3 * tau_seed * (q.x / x_seed) {
                failure = Some(Error::TrajectoryStalled { last_x: q.x, steps: recorded });
                return StepControl::Stop;
            }
        } else if skip_first {
            return StepControl::Continue;
        }
        curve.t.push(t_offset + t);
        curve.x.push(q.x);
        curve.y.push(q.y);
        recorded += 1;
        if t >= horizon { StepControl::Stop } else { StepControl::Continue }
    })?;
    match failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// Exact de Sitter tracing. For x > e^{-1} the angle advances in the
/// global frame (d omega / dt = sech(t) / R along null flows, with t =
/// -ln x), then the run continues on the boundary chart. The junction is
/// seamless: both legs advance d omega / d t = 2x / (R (1 + x^2)).
fn trace_desitter(
    chart: &MetricChart,
    radius: f64,
    x0: f64,
    y0: &[f64],
    sign: f64,
    tol: f64,
    max_drift: &mut f64,
) -> Result<ProjectedCurve> {
    let mut curve =
        ProjectedCurve { direction: vec![sign], t: vec![], x: vec![], y: vec![] };
    let t0 = -x0.ln();
    if t0 < GLOBAL_SWITCH_T {
        let rk = AdaptiveRk {
            rtol: 1e-10,
            atol: 1e-14,
            h_max: MAX_PARAM_STEP,
            max_steps: 400_000,
            ..AdaptiveRk::default()
        };
        rk.integrate(
            t0,
            &[y0[0]],
            |t, _y, dy| dy[0] = sign / (t.cosh() * radius),
            |t, y| {
                curve.t.push(t - t0);
                curve.x.push((-t).exp());
                curve.y.push(vec![y[0]]);
                if t >= GLOBAL_SWITCH_T { StepControl::Stop } else { StepControl::Continue }
            },
        )?;
        let t_star = curve.t.last().copied().unwrap() + t0;
        let x_star = (-t_star).exp();
        let y_star = curve.y.last().cloned().unwrap();
        let seed = seed_null_covector(chart, x_star, &y_star, &[sign])?;
        extend_generic_leg(chart, &seed, t_star - t0, true, tol, &mut curve, max_drift)?;
    } else {
        let seed = seed_null_covector(chart, x0, y0, &[sign])?;
        extend_generic_leg(chart, &seed, 0.0, false, tol, &mut curve, max_drift)?;
    }
    Ok(curve)
}

fn point_segment_distance(p: &[f64; 3], a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let ap = [p[0] - a[0], p[1] - a[1], p[2] - a[2]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1] + ab[2] * ab[2];
    let u = if len2 > 1e-300 {
        ((ap[0] * ab[0] + ap[1] * ab[1] + ap[2] * ab[2]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let mut d2 = 0.0;
    for i in 0..3 {
        let e = p[i] - (a[i] + u * ab[i]);
        d2 += e * e;
    }
    d2.sqrt()
}

/// Minimum distance between two segments together with the closest-point
/// parameters on each.
fn segment_pair_distance(
    p1: &[f64; 3],
    q1: &[f64; 3],
    p2: &[f64; 3],
    q2: &[f64; 3],
) -> (f64, f64, f64) {
    let d1 = [q1[0] - p1[0], q1[1] - p1[1], q1[2] - p1[2]];
    let d2 = [q2[0] - p2[0], q2[1] - p2[1], q2[2] - p2[2]];
    let r = [p1[0] - p2[0], p1[1] - p2[1], p1[2] - p2[2]];
    let dot = |a: &[f64; 3], b: &[f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let a = dot(&d1, &d1);
    let e = dot(&d2, &d2);
    let f = dot(&d2, &r);
    const EPS: f64 = 1e-300;

    let (mut u, mut v);
    if a <= EPS && e <= EPS {
        u = 0.0;
        v = 0.0;
    } else if a <= EPS {
        u = 0.0;
        v = (f / e).clamp(0.0, 1.0);
    } else {
        let c = dot(&d1, &r);
        if e <= EPS {
            v = 0.0;
            u = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = dot(&d1, &d2);
            let denom = a * e - b * b;
            u = if denom > EPS { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
            v = (b * u + f) / e;
            if v < 0.0 {
                v = 0.0;
                u = (-c / a).clamp(0.0, 1.0);
            } else if v > 1.0 {
                v = 1.0;
                u = ((b - c) / a).clamp(0.0, 1.0);
            }
        }
    }
    let mut d2sum = 0.0;
    for i in 0..3 {
        let e_i = (p1[i] + u * d1[i]) - (p2[i] + v * d2[i]);
        d2sum += e_i * e_i;
    }
    (d2sum.sqrt(), u, v)
}

struct Contact {
    seg_a: usize,
    u: f64,
    t_a: f64,
    t_b: f64,
    separation: f64,
}

/// Run of nearby contacts of one curve pair; `best` is the closest one.
struct Cluster {
    last_t_a: f64,
    best: Contact,
}

/// Segment-hash sweep over all distinct curve pairs. Returns the merged
/// reports and the parameter of the first raw contact, if any.
fn detect_intersections(
    embed: &dyn Fn(f64, &[f64]) -> [f64; 3],
    base_x: f64,
    base_y: &[f64],
    curves: &[ProjectedCurve],
    tol: f64,
) -> (Vec<IntersectionReport>, Option<f64>) {
    let cell = tol.sqrt();
    let detect = 0.5 * cell;
    let discard = 3.0 * cell;
    let pitch = CAND_CELL.max(cell);
    let base_pt = embed(base_x, base_y);

    let pts: Vec<Vec<[f64; 3]>> = curves
        .iter()
        .map(|c| c.x.iter().zip(&c.y).map(|(x, y)| embed(*x, y)).collect())
        .collect();

    let mut buckets: HashMap<(i64, i64, i64), Vec<(u32, u32)>> = HashMap::new();
    for (ci, cpts) in pts.iter().enumerate() {
        for si in 0..cpts.len().saturating_sub(1) {
            let (a, b) = (&cpts[si], &cpts[si + 1]);
            let mut lo = [0i64; 3];
            let mut hi = [0i64; 3];
            for d in 0..3 {
                lo[d] = ((a[d].min(b[d]) - detect) / pitch).floor() as i64;
                hi[d] = ((a[d].max(b[d]) + detect) / pitch).floor() as i64;
            }
            for ix in lo[0]..=hi[0] {
                for iy in lo[1]..=hi[1] {
                    for iz in lo[2]..=hi[2] {
                        buckets.entry((ix, iy, iz)).or_default().push((ci as u32, si as u32));
                    }
                }
            }
        }
    }

    let mut cands: Vec<(u32, u32, u32, u32)> = Vec::new();
    for list in buckets.values() {
        for i in 0..list.len() {
            for j in i + 1..list.len() {
                let (c1, s1) = list[i];
                let (c2, s2) = list[j];
                if c1 == c2 {
                    continue;
                }
                let t = if c1 < c2 { (c1, s1, c2, s2) } else { (c2, s2, c1, s1) };
                cands.push(t);
            }
        }
    }
    cands.sort_unstable();
    cands.dedup();

    // cands is ordered by (curve_a, seg_a), so contacts per curve pair
    // arrive in increasing t_a and can be clustered online.
    let mut open: HashMap<(u32, u32), Cluster> = HashMap::new();
    let mut reports: Vec<(u32, u32, Contact)> = Vec::new();
    let mut first_contact: Option<f64> = None;

    for (a, sa, b, sb) in cands {
        let (a, sa, b, sb) = (a as usize, sa as usize, b as usize, sb as usize);
        let (pa, qa) = (&pts[a][sa], &pts[a][sa + 1]);
        let (pb, qb) = (&pts[b][sb], &pts[b][sb + 1]);
        if point_segment_distance(&base_pt, pa, qa) <= discard
            && point_segment_distance(&base_pt, pb, qb) <= discard
        {
            continue;
        }
        let (d, u, v) = segment_pair_distance(pa, qa, pb, qb);
        if d > detect {
            continue;
        }
        let (ca, cb) = (&curves[a], &curves[b]);
        let t_a = ca.t[sa] + u * (ca.t[sa + 1] - ca.t[sa]);
        let t_b = cb.t[sb] + v * (cb.t[sb + 1] - cb.t[sb]);
        let earliest = t_a.min(t_b);
        if first_contact.map_or(true, |w| earliest < w) {
            first_contact = Some(earliest);
        }
        let contact = Contact { seg_a: sa, u, t_a, t_b, separation: d };
        match open.get_mut(&(a as u32, b as u32)) {
            Some(cluster) if t_a - cluster.last_t_a <= MERGE_GAP => {
                cluster.last_t_a = cluster.last_t_a.max(t_a);
                if contact.separation < cluster.best.separation {
                    cluster.best = contact;
                }
            }
            Some(cluster) => {
                let done = std::mem::replace(cluster, Cluster { last_t_a: t_a, best: contact });
                reports.push((a as u32, b as u32, done.best));
            }
            None => {
                open.insert((a as u32, b as u32), Cluster { last_t_a: t_a, best: contact });
            }
        }
    }
    reports.extend(open.into_iter().map(|((a, b), c)| (a, b, c.best)));

    let mut out: Vec<IntersectionReport> = reports
        .into_iter()
        .map(|(a, b, c)| {
            let ca = &curves[a as usize];
            let (sa, u) = (c.seg_a, c.u);
            let x = ca.x[sa] + u * (ca.x[sa + 1] - ca.x[sa]);
            let y: Vec<f64> = ca.y[sa]
                .iter()
                .zip(&ca.y[sa + 1])
                .map(|(p, q)| p + u * (q - p))
                .collect();
            IntersectionReport {
                curve_a: a as usize,
                curve_b: b as usize,
                t_a: c.t_a,
                t_b: c.t_b,
                x,
                y,
                separation: c.separation,
            }
        })
        .collect();
    out.sort_by(|p, q| p.t_a.total_cmp(&q.t_a));
    (out, first_contact)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::chart::CustomChart;
    use crate::geometry::{double_space_hamilton_field, DoublePhasePoint, FlowSide};
    use std::sync::Arc;

    #[test]
    fn half_space_cone_is_embedded() {
        let hs = MetricChart::half_space(3).unwrap();
        let base_y = [0.3, -0.2];
        for n_dirs in [8, 16] {
            let surface = flowout_light_cone(&hs, 1.0, &base_y, n_dirs, 1e-8).unwrap();
            assert_eq!(surface.curves.len(), n_dirs);
            for curve in &surface.curves {
                assert_eq!(curve.x[0], 1.0);
                assert_eq!(curve.y[0], base_y.to_vec());
                for (i, (x, y)) in curve.x.iter().zip(&curve.y).enumerate() {
                    let r: f64 = y
                        .iter()
                        .zip(&base_y)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt();
                    assert!(
                        (r - (1.0 - x)).abs() <= 1e-6,
                        "sample {i} off the cone: |y - y0| = {r}, 1 - x = {}",
                        1.0 - x
                    );
                    assert!(i == 0 || curve.t[i] > curve.t[i - 1]);
                }
                let last = *curve.x.last().unwrap();
                assert!(last <= 1.1e-6, "curve stopped early at x = {last}");
            }
            assert!(surface.intersections.is_empty());
            assert_eq!(check_a3(&surface).unwrap(), A3Verdict::Holds);
            assert!(surface.intersection_free_window.1 > 13.8);
            assert!(surface.max_drift <= 1e-7);
        }
    }

    #[test]
    fn desitter_critical_radius_touches_at_future_infinity() {
        let ds = MetricChart::exact_desitter(1.0).unwrap();
        let surface = flowout_light_cone(&ds, f64::INFINITY, &[0.4], 8, 1e-8).unwrap();
        assert_eq!(surface.curves.len(), 2);
        // Two antipodal curves refocus exactly on the future boundary.
        assert_eq!(surface.intersections.len(), 1);
        let verdict = check_a3(&surface).unwrap();
        match verdict {
            A3Verdict::FailsAtBoundary { x, y, .. } => {
                assert!(x < 1.2e-6, "contact at x = {x} is not on the boundary");
                assert!(
                    ((y[0] - 0.4).abs() - std::f64::consts::PI).abs() < 1e-3,
                    "contact not antipodal: y = {}",
                    y[0]
                );
            }
            other => panic!("expected a boundary failure, got {other:?}"),
        }
        // The curves converge like 4x, so the minimum resolved separation is
        // set by the truncation depth.
        assert!(surface.intersections[0].separation < 1e-5);
        // Curves approach each other only near the end of the run.
        let window = surface.intersection_free_window.1;
        assert!((28.0..31.0).contains(&window), "window ended at {window}");
    }

    #[test]
    fn desitter_enlarged_radius_is_embedded() {
        let radius = 1.25;
        let ds = MetricChart::exact_desitter(radius).unwrap();
        let surface = flowout_light_cone(&ds, f64::INFINITY, &[0.4], 8, 1e-8).unwrap();
        assert!(surface.intersections.is_empty());
        assert_eq!(check_a3(&surface).unwrap(), A3Verdict::Holds);
        assert!(surface.intersection_free_window.1 > 31.5);
        // Total angular advance from past to future infinity is pi/R; the
        // truncated tail contributes 2 atan(x_end)/R ~ 1.6e-6 of it.
        for curve in &surface.curves {
            let advance = (curve.y.last().unwrap()[0] - curve.y[0][0]).abs();
            assert!(
                (advance - std::f64::consts::PI / radius).abs() < 5e-6,
                "advance {advance} vs {}",
                std::f64::consts::PI / radius
            );
        }
    }

    #[test]
    fn desitter_shrunk_radius_crosses_in_the_interior() {
        let radius = 0.8;
        let ds = MetricChart::exact_desitter(radius).unwrap();
        let surface = flowout_light_cone(&ds, f64::INFINITY, &[0.4], 8, 1e-8).unwrap();
        assert_eq!(surface.intersections.len(), 1);
        match check_a3(&surface).unwrap() {
            A3Verdict::FailsAtInterior { x, y, t } => {
                // Crossing where each curve has advanced by pi: global time
                // atanh... t_g with 2 atan(e^{t_g}) - pi/2 = (pi - pi/2) R.
                let t_g = (0.4 * std::f64::consts::PI).tan().ln();
                assert!((x - (-t_g).exp()).abs() < 5e-3, "crossing at x = {x}");
                assert!((t - (18.0 + t_g)).abs() < 0.3, "crossing at t = {t}");
                let antipode = 0.4 + std::f64::consts::PI;
                assert!((y[0] - antipode).abs() < 1e-2, "crossing at y = {}", y[0]);
            }
            other => panic!("expected an interior failure, got {other:?}"),
        }
        let window = surface.intersection_free_window.1;
        assert!((18.5..20.0).contains(&window), "window ended at {window}");
    }

    #[test]
    fn desitter_angular_advance_matches_law_at_critical_radius() {
        let ds = MetricChart::exact_desitter(1.0).unwrap();
        let surface = flowout_light_cone(&ds, f64::INFINITY, &[0.0], 8, 1e-8).unwrap();
        for curve in &surface.curves {
            let advance = (curve.y.last().unwrap()[0] - curve.y[0][0]).abs();
            assert!((advance - std::f64::consts::PI).abs() < 5e-6, "advance {advance}");
        }
    }

    #[test]
    fn turning_null_flow_reports_a2_failure() {
        // h0 + x h1 = eta^2 (2x - 1)^2: the cone degenerates at x = 1/2 and
        // forward null flows from x = 1 turn around there.
        let chart = MetricChart::custom(
            2,
            CustomChart::new(
                Arc::new(|_y: &[f64], eta: &[f64]| eta[0] * eta[0]),
                Arc::new(|x, _y: &[f64], eta: &[f64]| 4.0 * eta[0] * eta[0] * (x - 1.0)),
            ),
        )
        .unwrap();
        let err = flowout_light_cone(&chart, 1.0, &[0.0], 8, 1e-8).unwrap_err();
        match err {
            Error::TrajectoryStalled { last_x, .. } => {
                assert!((last_x - 0.5).abs() < 0.01, "stalled at x = {last_x}");
            }
            other => panic!("expected a stall, got {other}"),
        }
    }

    #[test]
    fn fan_and_tolerance_validation() {
        let hs = MetricChart::half_space(3).unwrap();
        assert!(flowout_light_cone(&hs, 1.0, &[0.0, 0.0], 4, 1e-8).is_err());
        assert!(flowout_light_cone(&hs, 1.0, &[0.0, 0.0], 32, 1e-8).is_err());
        assert!(flowout_light_cone(&hs, 1.0, &[0.0, 0.0], 8, 0.0).is_err());
        assert!(flowout_light_cone(&hs, 0.0, &[0.0, 0.0], 8, 1e-8).is_err());
        let empty = FlowoutSurface {
            base_x: 1.0,
            base_y: vec![],
            tol: 1e-8,
            curves: vec![],
            intersections: vec![],
            intersection_free_window: (0.0, 0.0),
            max_drift: 0.0,
        };
        assert!(check_a3(&empty).is_err());
    }

    /// Seeds flowed with the right-side lifted field land on the same
    /// surface as the left-side flowout. On the flat model the left surface
    /// is the cone |z| = 1 - s, so membership is a closed-form distance.
    #[test]
    fn right_flow_lands_on_left_flowout_surface() {
        let hs = MetricChart::half_space(3).unwrap();
        let rk = AdaptiveRk::default();
        for k in 0..8 {
            let a = 2.0 * std::f64::consts::PI * k as f64 / 8.0;
            let zeta = [a.cos(), a.sin()];

            // Left chart: seed on the lifted diagonal cone, sigma = +1.
            let mut worst_left = 0.0f64;
            let seed_l = [1.0, 0.0, 0.0, 1.0, 0.0, zeta[0], zeta[1], 0.0, 0.0];
            rk.integrate(
                0.0,
                &seed_l,
                |_t, y, dy| fill_factored(&hs, FlowSide::Left, y, dy),
                |t, y| {
                    let z = (y[1] * y[1] + y[2] * y[2]).sqrt();
                    worst_left = worst_left.max((z - (1.0 - y[0])).abs());
                    if t >= 0.45 { StepControl::Stop } else { StepControl::Continue }
                },
            )
            .unwrap();
            assert!(worst_left <= 1e-6, "left flow off its own cone by {worst_left}");

            // Right chart: the matched seed has reversed time orientation.
            let mut worst_right = 0.0f64;
            let seed_r = [1.0, 0.0, 0.0, -1.0, 0.0, zeta[0], zeta[1], 0.0, 0.0];
            rk.integrate(
                0.0,
                &seed_r,
                |_t, y, dy| fill_factored(&hs, FlowSide::Right, y, dy),
                |t, y| {
                    // Map right-chart samples into the left chart.
                    let s = 1.0 / y[0];
                    let z = (y[1] * y[1] + y[2] * y[2]).sqrt() / y[0];
                    worst_right = worst_right.max((z - (1.0 - s)).abs());
                    if t >= 2.0 { StepControl::Stop } else { StepControl::Continue }
                },
            )
            .unwrap();
            assert!(worst_right <= 1e-6, "right flow off the left surface by {worst_right}");
        }
    }

    fn fill_factored(chart: &MetricChart, side: FlowSide, y: &[f64], dy: &mut [f64]) {
        let q = DoublePhasePoint {
            s: y[0],
            z: vec![y[1], y[2]],
            base_x: 1.0,
            base_y: vec![0.0, 0.0],
            sigma: y[3],
            xi: y[4],
            zeta: vec![y[5], y[6]],
            mu: vec![y[7], y[8]],
        };
        match double_space_hamilton_field(chart, side, &q) {
            Ok((_, fac)) => {
                dy[0] = fac.ds;
                dy[1] = fac.dz[0];
                dy[2] = fac.dz[1];
                dy[3] = fac.dsigma;
                dy[4] = fac.dxi;
                dy[5] = fac.dzeta[0];
                dy[6] = fac.dzeta[1];
                dy[7] = fac.dmu[0];
                dy[8] = fac.dmu[1];
            }
            Err(_) => dy.iter_mut().for_each(|d| *d = f64::NAN),
        }
    }
}
