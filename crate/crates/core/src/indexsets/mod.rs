//! Polyhomogeneous index sets and the operations the parametrix construction
//! performs on them.
//!
//! An index set here is a discrete subset `E` of `C x N0` that is closed
//! under `(z, k) -> (z + 1, k)` and `(z, k) -> (z, p)` for `p < k`. Such a
//! set is determined by finitely many generators `(z, k)` (each standing for
//! its closure), which is the representation used throughout: exact
//! generator arithmetic instead of enumerated members. Enumeration up to a
//! cutoff exists for reporting and as the reference semantics the test suite
//! compares against (see [`reference`]).

mod expr;
mod family;
mod matrix;

pub use expr::{eval_expression, ExprValue};
pub use family::{
    parametrix_index_families, solution_index_family, Face, IndexFamily, ParametrixFamilies,
    SolutionFamily, DEFAULT_MAX_LEVEL,
};
pub use matrix::{pushforward, ExponentMatrix, MatrixEntry};

use crate::exact::Exponent;
use num_rational::Rational64;
use std::collections::HashSet;
use std::fmt;

/// A polyhomogeneous index set, stored as minimal generators.
#[derive(Clone, Debug, PartialEq)]
pub struct IndexSet {
    gens: Vec<(Exponent, u32)>,
}

/// One enumerated member `z^... (log)^k`, for reporting.
#[derive(Clone, Copy, Debug)]
pub struct Member {
    pub exponent: Exponent,
    pub log_power: u32,
}

impl IndexSet {
    /// The empty index set (index set of the zero function).
    pub fn empty() -> Self {
        IndexSet { gens: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.gens.is_empty()
    }

    /// Closure of the given generators, canonicalized.
    pub fn from_generators(gens: Vec<(Exponent, u32)>) -> Self {
        let mut set = IndexSet { gens };
        set.canonicalize();
        set
    }

    pub fn singleton(z: Exponent, k: u32) -> Self {
        Self::from_generators(vec![(z, k)])
    }

    pub fn generators(&self) -> &[(Exponent, u32)] {
        &self.gens
    }

    /// Remove generators dominated by another one: `(z, k)` is redundant if
    /// some `(z', k')` has `z - z'` a nonnegative integer and `k <= k'`.
    fn canonicalize(&mut self) {
        let gens = std::mem::take(&mut self.gens);
        let mut keep: Vec<(Exponent, u32)> = Vec::with_capacity(gens.len());
        'outer: for (i, (z, k)) in gens.iter().enumerate() {
            for (j, (z2, k2)) in gens.iter().enumerate() {
                if i == j {
                    continue;
                }
                if let Some(d) = z.integer_difference(z2) {
                    let strictly = d > 0 || k < k2 || (d == 0 && *k == *k2 && j < i);
                    if d >= 0 && k <= k2 && strictly {
                        continue 'outer;
                    }
                }
            }
            keep.push((*z, *k));
        }
        keep.sort_by(|a, b| {
            a.0.re_f64()
                .total_cmp(&b.0.re_f64())
                .then(a.0.im_f64().total_cmp(&b.0.im_f64()))
                .then(a.1.cmp(&b.1))
        });
        self.gens = keep;
    }

    /// Membership test against the closure of the generators.
    pub fn contains(&self, z: &Exponent, k: u32) -> bool {
        self.gens.iter().any(|(zg, kg)| {
            k <= *kg && z.integer_difference(zg).map(|d| d >= 0).unwrap_or(false)
        })
    }

    /// Plain union (as sets of pairs).
    pub fn union(&self, other: &IndexSet) -> IndexSet {
        let mut gens = self.gens.clone();
        gens.extend_from_slice(&other.gens);
        IndexSet::from_generators(gens)
    }

    /// Extended union `E u F u {(z, p' + p'' + 1) : (z, p') in E, (z, p'') in F}`.
    ///
    /// Generator pairs whose exponents differ by an integer contribute a new
    /// generator at the larger exponent with log degree `k1 + k2 + 1`; the
    /// downward closure supplies all intermediate members.
    pub fn extended_union(&self, other: &IndexSet) -> IndexSet {
        let mut gens = self.gens.clone();
        gens.extend_from_slice(&other.gens);
        for (z1, k1) in &self.gens {
            for (z2, k2) in &other.gens {
                if let Some(d) = z1.integer_difference(z2) {
                    let z = if d >= 0 { *z1 } else { *z2 };
                    gens.push((z, k1 + k2 + 1));
                }
            }
        }
        IndexSet::from_generators(gens)
    }

    /// Index set of products: pairwise sums of members. Empty absorbs.
    pub fn add(&self, other: &IndexSet) -> IndexSet {
        if self.is_empty() || other.is_empty() {
            return IndexSet::empty();
        }
        let mut gens = Vec::with_capacity(self.gens.len() * other.gens.len());
        for (z1, k1) in &self.gens {
            for (z2, k2) in &other.gens {
                gens.push((z1.add(z2), k1 + k2));
            }
        }
        IndexSet::from_generators(gens)
    }

    /// Shift every exponent by a rational amount (`F + c`).
    pub fn shift(&self, c: Rational64) -> IndexSet {
        IndexSet {
            gens: self.gens.iter().map(|(z, k)| (z.add_rational(c), *k)).collect(),
        }
    }

    pub fn shift_integer(&self, c: i64) -> IndexSet {
        self.shift(Rational64::from_integer(c))
    }

    /// Smallest real part over the generators; `None` when empty.
    pub fn min_re(&self) -> Option<f64> {
        self.gens.iter().map(|(z, _)| z.re_f64()).min_by(f64::total_cmp)
    }

    /// True if any generator carries a nonzero imaginary part.
    pub fn has_complex_exponents(&self) -> bool {
        self.gens.iter().any(|(z, _)| !z.is_real())
    }

    /// Enumerate members with `Re z <= re_cutoff` and `k <= k_cutoff`,
    /// sorted by real part, imaginary part, then log power.
    pub fn members_up_to(&self, re_cutoff: f64, k_cutoff: u32) -> Vec<Member> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for (z, k) in &self.gens {
            let mut m = 0i64;
            loop {
                let ex = z.add_integer(m);
                if ex.re_f64() > re_cutoff + 1e-12 {
                    break;
                }
                for kk in 0..=(*k).min(k_cutoff) {
                    if seen.insert((ex.key(), kk)) {
                        out.push(Member { exponent: ex, log_power: kk });
                    }
                }
                m += 1;
                if m > 4096 {
                    break;
                }
            }
        }
        out.sort_by(|a, b| {
            a.exponent
                .re_f64()
                .total_cmp(&b.exponent.re_f64())
                .then(a.exponent.im_f64().total_cmp(&b.exponent.im_f64()))
                .then(a.log_power.cmp(&b.log_power))
        });
        out
    }
}

impl fmt::Display for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "EMPTY");
        }
        write!(f, "closure{{")?;
        for (i, (z, k)) in self.gens.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "({z}, {k})")?;
        }
        write!(f, "}}")
    }
}

/// Reference semantics by brute-force member enumeration.
///
/// Everything here recomputes the defining set operations on enumerated
/// members up to a cutoff, independently of the generator algebra above. The
/// test suites compare the two paths exactly.
pub mod reference {
    use super::*;
    use crate::exact::ExponentKey;

    pub type MemberSet = HashSet<(ExponentKey, u32)>;

    pub fn enumerate(set: &IndexSet, re_cutoff: f64, k_cutoff: u32) -> MemberSet {
        set.members_up_to(re_cutoff, k_cutoff)
            .into_iter()
            .map(|m| (m.exponent.key(), m.log_power))
            .collect()
    }

    fn enumerate_pairs(set: &IndexSet, re_cutoff: f64, k_cutoff: u32) -> Vec<(Exponent, u32)> {
        set.members_up_to(re_cutoff, k_cutoff)
            .into_iter()
            .map(|m| (m.exponent, m.log_power))
            .collect()
    }

    /// Definitional extended union on enumerated members.
    pub fn extended_union(
        e: &IndexSet,
        f: &IndexSet,
        re_cutoff: f64,
        k_cutoff: u32,
    ) -> MemberSet {
        let me = enumerate_pairs(e, re_cutoff, k_cutoff);
        let mf = enumerate_pairs(f, re_cutoff, k_cutoff);
        let mut out: MemberSet = me.iter().map(|(z, k)| (z.key(), *k)).collect();
        out.extend(mf.iter().map(|(z, k)| (z.key(), *k)));
        for (z1, p1) in &me {
            for (z2, p2) in &mf {
                if z1.same(z2) && p1 + p2 + 1 <= k_cutoff {
                    out.insert((z1.key(), p1 + p2 + 1));
                }
            }
        }
        out
    }

    /// Definitional sum on enumerated members.
    pub fn sum(e: &IndexSet, f: &IndexSet, re_cutoff: f64, k_cutoff: u32) -> MemberSet {
        if e.is_empty() || f.is_empty() {
            return MemberSet::new();
        }
        // Enumerate each factor far enough that every pair sum below the
        // cutoff is seen.
        let slack_e = re_cutoff - f.min_re().unwrap();
        let slack_f = re_cutoff - e.min_re().unwrap();
        let me = enumerate_pairs(e, slack_e, k_cutoff);
        let mf = enumerate_pairs(f, slack_f, k_cutoff);
        let mut out = MemberSet::new();
        for (z1, k1) in &me {
            for (z2, k2) in &mf {
                let z = z1.add(z2);
                if z.re_f64() <= re_cutoff + 1e-12 && k1 + k2 <= k_cutoff {
                    out.insert((z.key(), k1 + k2));
                }
            }
        }
        out
    }
}
