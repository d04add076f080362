//! Face-indexed index families for the forward solution and the parametrix.
//!
//! The double space carries nine boundary hypersurfaces: the two front faces
//! (`ff+`, `ff-`), the left and right faces (`lf+-`, `rf+-`), the two light
//! cone faces (`lcf+-`) and the face between the cones (`scf`). A family is a
//! total map from those faces to index sets; an empty set records that the
//! kernel vanishes to infinite order there.

use super::IndexSet;
use crate::exact::{characteristic_roots_rational, CharacteristicRoots, Exponent};
use num_rational::Rational64;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

/// Enumeration cap for level-indexed families like `{(j, l) : l <= j}`:
/// generators are emitted for `j <= DEFAULT_MAX_LEVEL`. Members above the cap
/// are not represented; reporting stays exact below it.
pub const DEFAULT_MAX_LEVEL: u32 = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Face {
    FrontPlus,
    FrontMinus,
    LeftPlus,
    LeftMinus,
    RightPlus,
    RightMinus,
    ConePlus,
    ConeMinus,
    Spacelike,
}

impl Face {
    pub const ALL: [Face; 9] = [
        Face::FrontPlus,
        Face::FrontMinus,
        Face::LeftPlus,
        Face::LeftMinus,
        Face::RightPlus,
        Face::RightMinus,
        Face::ConePlus,
        Face::ConeMinus,
        Face::Spacelike,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Face::FrontPlus => "ff+",
            Face::FrontMinus => "ff-",
            Face::LeftPlus => "lf+",
            Face::LeftMinus => "lf-",
            Face::RightPlus => "rf+",
            Face::RightMinus => "rf-",
            Face::ConePlus => "lcf+",
            Face::ConeMinus => "lcf-",
            Face::Spacelike => "scf",
        }
    }
}

impl fmt::Display for Face {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Face {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Face::ALL
            .iter()
            .copied()
            .find(|face| face.name() == s)
            .ok_or_else(|| crate::Error::Validation(format!("unknown face name: {s:?}")))
    }
}

/// Total assignment of an index set to every boundary face.
#[derive(Clone, Debug, PartialEq)]
pub struct IndexFamily {
    sets: BTreeMap<Face, IndexSet>,
}

impl IndexFamily {
    /// Family that is empty (infinite-order vanishing) on every face.
    pub fn all_empty() -> Self {
        IndexFamily {
            sets: Face::ALL.iter().map(|&f| (f, IndexSet::empty())).collect(),
        }
    }

    pub fn set(&mut self, face: Face, set: IndexSet) {
        self.sets.insert(face, set);
    }

    pub fn get(&self, face: Face) -> &IndexSet {
        &self.sets[&face]
    }

    pub fn iter(&self) -> impl Iterator<Item = (Face, &IndexSet)> {
        self.sets.iter().map(|(f, s)| (*f, s))
    }

    pub fn as_named_map(&self) -> BTreeMap<String, IndexSet> {
        self.sets
            .iter()
            .map(|(f, s)| (f.name().to_string(), s.clone()))
            .collect()
    }
}

/// `{(j + offset, l) : 0 <= l <= j}`, generated by `(j + offset, j)`.
pub(super) fn level_log_set(offset: Rational64, max_level: u32) -> IndexSet {
    IndexSet::from_generators(
        (0..=max_level)
            .map(|j| {
                (
                    Exponent::from_rational(offset + Rational64::from_integer(j as i64)),
                    j,
                )
            })
            .collect(),
    )
}

/// `{(s- + m, 0)} u {(s+ + m, 0)}`: the two indicial branches with their
/// integer ladders and no logarithms.
pub(super) fn side_face_set(roots: &CharacteristicRoots) -> IndexSet {
    IndexSet::from_generators(vec![(roots.s_minus, 0), (roots.s_plus, 0)])
}

/// Side face set after the coincidence substitution: when `s+ - s- = N` is a
/// nonnegative integer the upper branch rides on the lower one's integer
/// ladder and acquires a single logarithm, so the generators become
/// `(s-, 0), (s+, 1)`.
fn side_face_set_coincident(roots: &CharacteristicRoots) -> IndexSet {
    match roots.integer_coincidence {
        Some(_) => IndexSet::from_generators(vec![(roots.s_minus, 0), (roots.s_plus, 1)]),
        None => side_face_set(roots),
    }
}

/// Index family of a solution to the model transport hierarchy with source
/// data `e_data`: the interior levels `{(j, l) : l <= j}` joined with the
/// indicial branches and the source's own set, all under extended union.
#[derive(Clone, Debug)]
pub struct SolutionFamily {
    pub set: IndexSet,
    pub roots: CharacteristicRoots,
}

pub fn solution_index_family(
    n: u32,
    lambda: Rational64,
    e_data: &IndexSet,
    max_level: u32,
) -> SolutionFamily {
    let roots = characteristic_roots_rational(n, lambda);
    let f1 = level_log_set(Rational64::from_integer(0), max_level);
    let f2 = side_face_set_coincident(&roots);
    let set = f1.extended_union(&f2).extended_union(e_data);
    SolutionFamily { set, roots }
}

/// The full face data of the two kernel theorems: the family `fundamental`
/// of the forward solution, the family `parametrix` of the constructed
/// approximation, and the one-sided error families `error_left` /
/// `error_right` measuring the defect of the parametrix under the operator
/// acting from each factor.
///
/// Faces the construction leaves untouched (both lower side faces, and the
/// front faces of the kernel families, whose uniform behavior is carried by
/// an explicit prefactor) are empty.
#[derive(Clone, Debug)]
pub struct ParametrixFamilies {
    pub fundamental: IndexFamily,
    pub parametrix: IndexFamily,
    pub error_left: IndexFamily,
    pub error_right: IndexFamily,
    pub roots: CharacteristicRoots,
}

impl ParametrixFamilies {
    /// Apply the coincidence substitution to every side-face set when the
    /// indicial roots differ by an integer. Identity otherwise.
    pub fn with_coincidence_logs(&self) -> Self {
        if self.roots.integer_coincidence.is_none() {
            return self.clone();
        }
        let plain = side_face_set(&self.roots);
        let subst = side_face_set_coincident(&self.roots);
        let fix = |fam: &IndexFamily| {
            let mut out = fam.clone();
            for face in Face::ALL {
                let s = fam.get(face);
                if *s == plain {
                    out.set(face, subst.clone());
                } else {
                    // Shifted copies of the side set appear on the opposite
                    // face; substitute through the shift.
                    for m in 1..=8i64 {
                        if *s == plain.shift_integer(-m) {
                            out.set(face, subst.shift_integer(-m));
                            break;
                        }
                    }
                }
            }
            out
        };
        ParametrixFamilies {
            fundamental: fix(&self.fundamental),
            parametrix: fix(&self.parametrix),
            error_left: fix(&self.error_left),
            error_right: fix(&self.error_right),
            roots: self.roots.clone(),
        }
    }
}

pub fn parametrix_index_families(
    n: u32,
    lambda: Rational64,
    max_level: u32,
) -> ParametrixFamilies {
    let roots = characteristic_roots_rational(n, lambda);
    let ni = n as i64;
    let half = |a: i64, b: i64| Rational64::new(a, b);

    let side = side_face_set(&roots);

    // Parametrix family: cone faces start at 1/2 with one extra log per
    // integer level, the spacelike face at -n, side faces on the indicial
    // ladders, the opposite side shifted down by n.
    let cone_plus = level_log_set(half(1, 2), max_level);
    let cone_minus = cone_plus.shift_integer(-ni);
    let scf = level_log_set(Rational64::from_integer(-ni), max_level);

    let mut parametrix = IndexFamily::all_empty();
    parametrix.set(Face::ConePlus, cone_plus.clone());
    parametrix.set(Face::ConeMinus, cone_minus.clone());
    parametrix.set(Face::LeftPlus, side.clone());
    parametrix.set(Face::RightMinus, side.shift_integer(-ni));
    parametrix.set(Face::Spacelike, scf.clone());

    // Left error family: the operator applied in the left factor removes the
    // side behavior at lf+ and improves the cone face by one order.
    let front = IndexSet::from_generators(
        (0..=max_level as i64)
            .map(|m| (Exponent::from_rational(half(-ni, 2) + Rational64::from_integer(m)), 0))
            .collect(),
    );
    let mut error_left = IndexFamily::all_empty();
    error_left.set(Face::RightMinus, side.shift_integer(-ni));
    error_left.set(Face::ConeMinus, cone_minus.shift_integer(-1));
    error_left.set(Face::Spacelike, scf.clone());
    error_left.set(Face::FrontMinus, front.clone());

    let mut error_right = IndexFamily::all_empty();
    error_right.set(Face::LeftPlus, side.clone());
    error_right.set(Face::ConePlus, cone_plus.shift_integer(-1));
    error_right.set(Face::Spacelike, scf);
    error_right.set(Face::FrontPlus, front);

    // Forward solution family: cone faces start at -1/2, the spacelike face
    // at -n-1; side faces as for the parametrix.
    let cone_plus_f = level_log_set(half(-1, 2), max_level);
    let mut fundamental = IndexFamily::all_empty();
    fundamental.set(Face::ConePlus, cone_plus_f.clone());
    fundamental.set(Face::ConeMinus, cone_plus_f.shift_integer(-ni));
    fundamental.set(Face::LeftPlus, side.clone());
    fundamental.set(Face::RightMinus, side.shift_integer(-ni));
    fundamental.set(Face::Spacelike, level_log_set(Rational64::from_integer(-ni - 1), max_level));

    ParametrixFamilies {
        fundamental,
        parametrix,
        error_left,
        error_right,
        roots,
    }
}
