//! Fuchsian transport equations `t dv/dt - c v = t a(t) v + b(t)` solved by
//! formal series recursion on the exponent lattice of the forcing.

use super::LogSeries;
use crate::error::{Error, Result};

/// Tolerance for deciding that a level is resonant (`base + l == c`).
const RESONANCE_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct FuchsianProblem {
    /// Indicial constant: the homogeneous solution is `t^c`.
    pub c: f64,
    /// Smooth multiplier `a(t) = sum a[m] t^m`; enters as `t a(t) v`.
    pub a: Vec<f64>,
    /// Forcing series; its base fixes the expansion lattice of the solution.
    pub b: LogSeries,
    /// Value of the free coefficient at the resonant slot, when one exists.
    pub resonant_seed: f64,
    /// Cap on log columns in the solution.
    pub l_max: usize,
    /// When set to `j`, the forcing must have log degree at most
    /// `min(l, j-1)` at level `l` (the hypothesis under which the solution
    /// stays within the level-`j` index set).
    pub forcing_log_bound: Option<usize>,
}

impl FuchsianProblem {
    pub fn new(c: f64, a: Vec<f64>, b: LogSeries) -> Self {
        FuchsianProblem {
            c,
            a,
            b,
            resonant_seed: 0.0,
            l_max: super::DEFAULT_L_MAX,
            forcing_log_bound: None,
        }
    }
}

/// Solve `t dv/dt - c v = t a(t) v + b` as a series on the lattice
/// `base(b) + N0`, to `n_trunc` levels.
///
/// Writing `v = sum v[l][i] t^(base+l) (log t)^i`, the equation couples the
/// slots as `(base + l - c) v[l][i] + (i+1) v[l][i+1] = rhs[l][i]` where the
/// right side collects the forcing and the lower levels through `a`. Away
/// from resonance the slots solve top log column downward; at the resonant
/// level `base + l = c` the slot `v[l][0]` is the free initial condition
/// (`resonant_seed`) and the equation instead determines the column above,
/// raising the log degree by exactly one.
pub fn solve_fuchsian(p: &FuchsianProblem, n_trunc: usize) -> Result<LogSeries> {
    let base = p.b.base();
    let alpha = base.re_f64();

    if p.a.len() + 1 < n_trunc {
        return Err(Error::Validation(format!(
            "multiplier a(t) given to order {} but {} levels requested",
            p.a.len(),
            n_trunc
        )));
    }
    if let Some(j) = p.forcing_log_bound {
        for l in 0..p.b.levels() {
            for i in 0..p.b.logs() {
                if p.b.get(l, i) != 0.0 && i > l.min(j.saturating_sub(1)) {
                    return Err(Error::Validation(format!(
                        "forcing coefficient at level {l}, log power {i} exceeds the \
                         admissible log degree {}",
                        l.min(j.saturating_sub(1))
                    )));
                }
            }
        }
    }

    let resonant_level = {
        let d = p.c - alpha;
        let k = d.round();
        (k >= 0.0 && (d - k).abs() <= RESONANCE_TOL && (k as usize) < n_trunc)
            .then_some(k as usize)
    };

    let logs = p.b.logs() + usize::from(resonant_level.is_some());
    if logs > p.l_max {
        return Err(Error::LogDegreeOverflow {
            level: resonant_level.unwrap_or(0),
            log_power: logs - 1,
        });
    }

    let mut v = LogSeries::zeros(base, n_trunc, logs);
    for l in 0..n_trunc {
        // rhs[l][i] = b[l][i] + sum_m a[m] v[l-1-m][i]
        let rhs = |v: &LogSeries, i: usize| -> f64 {
            let mut r = p.b.get(l, i);
            for (m, &am) in p.a.iter().enumerate() {
                if m + 1 > l {
                    break;
                }
                r += am * v.get(l - 1 - m, i);
            }
            r
        };
        if resonant_level == Some(l) {
            v.set(l, 0, p.resonant_seed);
            for i in 0..logs - 1 {
                let val = rhs(&v, i) / (i as f64 + 1.0);
                v.set(l, i + 1, val);
            }
            // The top slot has no successor; the structure of the recursion
            // guarantees its equation is already satisfied, which the
            // substitution test checks independently.
        } else {
            let beta = alpha + l as f64 - p.c;
            for i in (0..logs).rev() {
                let val = (rhs(&v, i) - (i as f64 + 1.0) * v.get(l, i + 1)) / beta;
                v.set(l, i, val);
            }
        }
    }
    Ok(v)
}
