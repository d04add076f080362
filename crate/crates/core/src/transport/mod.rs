//! Log-series arithmetic and the transport recursions of the parametrix
//! construction: Fuchsian equations along the flow, the light-cone-face
//! normal operators in both projective charts, and the front-face
//! coefficient recursion.

mod frontface;
mod fuchsian;
mod qj;

pub use frontface::{front_face_step, symbol_order_exponent};
pub use fuchsian::{solve_fuchsian, FuchsianProblem};
pub use qj::{
    conormal_transport_constants, indicial_roots_newface, indicial_roots_side, solve_qj_flat,
    QjFlatSolution, QjGrid, QjOperator, SideRoots,
};

use crate::error::{Error, Result};
use crate::exact::Exponent;
use crate::indexsets::IndexSet;

/// Default expansion depth (powers of t above the base exponent).
pub const DEFAULT_N_TRUNC: usize = 12;
/// Default cap on log columns; recursions that would exceed it fail loudly.
pub const DEFAULT_L_MAX: usize = 12;

/// Truncated expansion `sum_{l,i} c[l][i] t^(base+l) (log t)^i`.
///
/// The coefficient array is rectangular: `levels()` rows, `logs()` columns.
/// The base exponent is kept exact when possible so that resonance offsets
/// and index-set membership stay decidable.
#[derive(Clone, Debug, PartialEq)]
pub struct LogSeries {
    base: Exponent,
    coeffs: Vec<Vec<f64>>,
}

impl LogSeries {
    /// Zero series with the given shape.
    pub fn zeros(base: Exponent, levels: usize, logs: usize) -> Self {
        assert!(levels > 0 && logs > 0, "series shape must be nonempty");
        LogSeries { base, coeffs: vec![vec![0.0; logs]; levels] }
    }

    /// Single term `c * t^base`.
    pub fn monomial(base: Exponent, c: f64) -> Self {
        let mut s = Self::zeros(base, 1, 1);
        s.coeffs[0][0] = c;
        s
    }

    /// Log-free series `sum coeffs[l] t^(base+l)`.
    pub fn from_powers(base: Exponent, coeffs: &[f64]) -> Self {
        assert!(!coeffs.is_empty());
        LogSeries { base, coeffs: coeffs.iter().map(|&c| vec![c]).collect() }
    }

    pub fn base(&self) -> Exponent {
        self.base
    }

    pub fn levels(&self) -> usize {
        self.coeffs.len()
    }

    pub fn logs(&self) -> usize {
        self.coeffs[0].len()
    }

    pub fn get(&self, l: usize, i: usize) -> f64 {
        if l < self.levels() && i < self.logs() {
            self.coeffs[l][i]
        } else {
            0.0
        }
    }

    pub fn set(&mut self, l: usize, i: usize, v: f64) {
        assert!(l < self.levels() && i < self.logs(), "slot ({l}, {i}) out of shape");
        self.coeffs[l][i] = v;
    }

    /// Largest log column index holding a coefficient above `tol`.
    pub fn max_log_degree(&self, tol: f64) -> usize {
        let mut top = 0;
        for row in &self.coeffs {
            for (i, &c) in row.iter().enumerate() {
                if c.abs() > tol {
                    top = top.max(i);
                }
            }
        }
        top
    }

    pub fn scale(&self, f: f64) -> LogSeries {
        let mut out = self.clone();
        for row in &mut out.coeffs {
            for c in row.iter_mut() {
                *c *= f;
            }
        }
        out
    }

    /// Sum of two series. The bases must differ by an integer so that both
    /// live on one exponent lattice, and after alignment the truncation
    /// orders must agree (adding series truncated at different absolute
    /// orders would silently drop information).
    pub fn add(&self, other: &LogSeries) -> Result<LogSeries> {
        let offset = other.base.integer_difference(&self.base).ok_or_else(|| {
            Error::Validation(format!(
                "series bases {:?} and {:?} do not differ by an integer",
                self.base, other.base
            ))
        })?;
        let (lo, hi, off) = if offset >= 0 {
            (self, other, offset as usize)
        } else {
            (other, self, (-offset) as usize)
        };
        // lo starts at the smaller exponent; hi sits off levels above it.
        if lo.levels() != hi.levels() + off {
            return Err(Error::Validation(format!(
                "truncation mismatch: {} levels vs {} levels at offset {}",
                lo.levels(),
                hi.levels(),
                off
            )));
        }
        let logs = lo.logs().max(hi.logs());
        let mut out = LogSeries::zeros(lo.base, lo.levels(), logs);
        for l in 0..lo.levels() {
            for i in 0..logs {
                out.coeffs[l][i] = lo.get(l, i) + if l >= off { hi.get(l - off, i) } else { 0.0 };
            }
        }
        Ok(out)
    }

    /// Product as exact polynomial arithmetic on the coefficient arrays:
    /// full convolution in the level index, additive in the log index.
    pub fn multiply(&self, other: &LogSeries) -> LogSeries {
        let levels = self.levels() + other.levels() - 1;
        let logs = self.logs() + other.logs() - 1;
        let mut out = LogSeries::zeros(self.base.add(&other.base), levels, logs);
        for (l1, row1) in self.coeffs.iter().enumerate() {
            for (i1, &c1) in row1.iter().enumerate() {
                if c1 == 0.0 {
                    continue;
                }
                for (l2, row2) in other.coeffs.iter().enumerate() {
                    for (i2, &c2) in row2.iter().enumerate() {
                        out.coeffs[l1 + l2][i1 + i2] += c1 * c2;
                    }
                }
            }
        }
        out
    }

    /// `t d/dt`, acting slotwise: `t^(a+l) log^i` maps to
    /// `(a+l) t^(a+l) log^i + i t^(a+l) log^(i-1)`.
    pub fn apply_tdt(&self) -> LogSeries {
        let alpha = self.base.re_f64();
        let mut out = LogSeries::zeros(self.base, self.levels(), self.logs());
        for l in 0..self.levels() {
            for i in 0..self.logs() {
                out.coeffs[l][i] =
                    (alpha + l as f64) * self.get(l, i) + (i as f64 + 1.0) * self.get(l, i + 1);
            }
        }
        out
    }

    /// Drop levels and log columns beyond the given shape.
    pub fn truncate(&self, levels: usize, logs: usize) -> LogSeries {
        let mut out = LogSeries::zeros(self.base, levels.min(self.levels()), logs.min(self.logs()));
        for l in 0..out.levels() {
            for i in 0..out.logs() {
                out.coeffs[l][i] = self.coeffs[l][i];
            }
        }
        out
    }

    /// Evaluate at `t > 0`.
    pub fn eval(&self, t: f64) -> f64 {
        let lt = t.ln();
        let mut total = 0.0;
        for (l, row) in self.coeffs.iter().enumerate() {
            // Horner in log t.
            let mut poly = 0.0;
            for &c in row.iter().rev() {
                poly = poly * lt + c;
            }
            total += poly * t.powf(self.base.re_f64() + l as f64);
        }
        total
    }

    /// True when every coefficient above `tol` sits at a pair
    /// `(base + l, i)` belonging to `set`.
    pub fn support_in(&self, set: &IndexSet, tol: f64) -> bool {
        for (l, row) in self.coeffs.iter().enumerate() {
            for (i, &c) in row.iter().enumerate() {
                if c.abs() > tol && !set.contains(&self.base.add_integer(l as i64), i as u32) {
                    return false;
                }
            }
        }
        true
    }

    /// Largest absolute coefficient, for scale-relative comparisons.
    pub fn max_abs(&self) -> f64 {
        self.coeffs
            .iter()
            .flat_map(|row| row.iter().map(|c| c.abs()))
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "alpha": self.base.re_f64(),
            "coeffs": self.coeffs,
        })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<LogSeries> {
        let alpha = v
            .get("alpha")
            .and_then(|a| a.as_f64())
            .ok_or_else(|| Error::Validation("series JSON lacks numeric 'alpha'".into()))?;
        let coeffs: Vec<Vec<f64>> = serde_json::from_value(
            v.get("coeffs")
                .cloned()
                .ok_or_else(|| Error::Validation("series JSON lacks 'coeffs'".into()))?,
        )
        .map_err(|e| Error::Validation(format!("series JSON coeffs malformed: {e}")))?;
        if coeffs.is_empty() || coeffs.iter().any(|row| row.len() != coeffs[0].len()) {
            return Err(Error::Validation("series coefficient array must be rectangular".into()));
        }
        // Snap near-rational bases (halves and quarters occur throughout) so
        // lattice alignment stays exact after a JSON round trip.
        let base = snap_to_rational(alpha);
        Ok(LogSeries { base, coeffs })
    }
}

fn snap_to_rational(x: f64) -> Exponent {
    for den in [1i64, 2, 4] {
        let scaled = x * den as f64;
        if (scaled - scaled.round()).abs() < 1e-12 && scaled.abs() < 1e15 {
            return Exponent::from_rational(num_rational::Rational64::new(
                scaled.round() as i64,
                den,
            ));
        }
    }
    Exponent::from_f64(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ei(z: i64) -> Exponent {
        Exponent::from_integer(z)
    }

    fn er(n: i64, d: i64) -> Exponent {
        Exponent::from_rational(num_rational::Rational64::new(n, d))
    }

    #[test]
    fn tdt_product_rule() {
        // t (log t): t d/dt gives t log t + t.
        let mut s = LogSeries::zeros(ei(1), 1, 2);
        s.set(0, 1, 1.0);
        let d = s.apply_tdt();
        assert_eq!(d.get(0, 1), 1.0);
        assert_eq!(d.get(0, 0), 1.0);
        // Check against a numerical derivative.
        let t = 0.37;
        let h = 1e-6;
        let fd = t * (s.eval(t + h) - s.eval(t - h)) / (2.0 * h);
        assert_relative_eq!(d.eval(t), fd, max_relative = 1e-8);
    }

    #[test]
    fn multiply_halves_to_whole() {
        let a = LogSeries::monomial(er(1, 2), 1.0);
        let p = a.multiply(&a);
        assert!(p.base().same(&ei(1)));
        assert_eq!(p.get(0, 0), 1.0);
        assert_relative_eq!(p.eval(0.3), 0.3, max_relative = 1e-14);
    }

    #[test]
    fn add_aligns_integer_offset_bases() {
        // (t + t^2) log t plus (-t log t) = t^2 log t.
        let mut a = LogSeries::zeros(ei(1), 2, 2);
        a.set(0, 1, 1.0);
        a.set(1, 1, 1.0);
        let mut b = LogSeries::zeros(ei(1), 2, 2);
        b.set(0, 1, -1.0);
        let sum = a.add(&b).unwrap();
        assert_eq!(sum.get(0, 1), 0.0);
        assert_eq!(sum.get(1, 1), 1.0);

        // Offset lattice: base 2 series occupies upper levels of a base 1 series.
        let c = LogSeries::from_powers(ei(2), &[5.0]);
        let mut d = LogSeries::zeros(ei(1), 2, 1);
        d.set(0, 0, 1.0);
        let sum = d.add(&c).unwrap();
        assert!(sum.base().same(&ei(1)));
        assert_eq!(sum.get(0, 0), 1.0);
        assert_eq!(sum.get(1, 0), 5.0);

        // Fractional offset rejected.
        let e = LogSeries::monomial(er(1, 2), 1.0);
        assert!(d.add(&e).is_err());

        // Truncation mismatch rejected.
        let f = LogSeries::zeros(ei(1), 3, 1);
        assert!(d.add(&f).is_err());
    }

    #[test]
    fn eval_matches_closed_form() {
        // 2 t^(1/2) + 3 t^(3/2) log t
        let mut s = LogSeries::zeros(er(1, 2), 2, 2);
        s.set(0, 0, 2.0);
        s.set(1, 1, 3.0);
        let t: f64 = 0.2;
        let expect = 2.0 * t.sqrt() + 3.0 * t.powf(1.5) * t.ln();
        assert_relative_eq!(s.eval(t), expect, max_relative = 1e-14);
    }

    #[test]
    fn support_check_against_index_set() {
        let mut s = LogSeries::zeros(er(1, 2), 3, 2);
        s.set(0, 0, 1.0);
        s.set(2, 1, 0.5);
        let ok = IndexSet::from_generators(vec![(er(1, 2), 0), (er(5, 2), 1)]);
        assert!(s.support_in(&ok, 1e-14));
        let narrow = IndexSet::from_generators(vec![(er(1, 2), 0)]);
        assert!(!s.support_in(&narrow, 1e-14));
    }

    #[test]
    fn json_round_trip() {
        let mut s = LogSeries::zeros(er(-1, 2), 2, 2);
        s.set(0, 0, 1.5);
        s.set(1, 1, -0.25);
        let j = s.to_json();
        let back = LogSeries::from_json(&j).unwrap();
        assert!(back.base().same(&s.base()));
        assert_eq!(back.coeffs, s.coeffs);
        // Base survives exactly, so lattice alignment still works.
        assert!(back.add(&s).is_ok());
    }
}
