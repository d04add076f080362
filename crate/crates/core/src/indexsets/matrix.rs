//! Pushforward of index families under a boundary fibration, recorded as an
//! exponent matrix: for each pair of a source face `G` and a target face `H`,
//! the order `e(G, H) >= 1` to which the defining function of `H` appears in
//! the one of `G` under pullback. Faces mapping into the interior of the
//! target (`e = 0` everywhere) are the null set of the fibration and must
//! carry integrable index sets.

use super::IndexSet;
use crate::error::{Error, Result};
use crate::exact::Exponent;
use std::collections::BTreeMap;

#[derive(Clone, Debug)]
pub struct MatrixEntry {
    pub source: String,
    pub target: String,
    pub order: u32,
}

#[derive(Clone, Debug, Default)]
pub struct ExponentMatrix {
    pub entries: Vec<MatrixEntry>,
}

impl ExponentMatrix {
    pub fn new(entries: Vec<MatrixEntry>) -> Self {
        ExponentMatrix { entries }
    }

    pub fn entry(mut self, source: &str, target: &str, order: u32) -> Self {
        self.entries.push(MatrixEntry {
            source: source.to_string(),
            target: target.to_string(),
            order,
        });
        self
    }

    fn targets(&self) -> Vec<String> {
        let mut out: Vec<String> = self.entries.iter().map(|e| e.target.clone()).collect();
        out.sort();
        out.dedup();
        out
    }
}

/// Divided index set `{(z / e, k) : (z, k) in K}` for a face met to order
/// `e`: since the members of `K` ladder up in integer steps, the quotient is
/// generated by `(z_g + m) / e` for `m = 0..e-1` over the generators of `K`.
fn divided_set(k: &IndexSet, e: u32) -> IndexSet {
    let mut gens: Vec<(Exponent, u32)> = Vec::new();
    for (z, kk) in k.generators() {
        for m in 0..e {
            gens.push((z.add_integer(m as i64).div_positive(e), *kk));
        }
    }
    IndexSet::from_generators(gens)
}

/// Index family of the pushforward (fiber integration) of a kernel with the
/// given face-indexed family along the fibration described by `matrix`.
///
/// Target sets are extended unions of the divided source sets; sources in
/// the null set contribute no exponents but must be integrable
/// (`min Re > -1`), otherwise the integral diverges and the call fails
/// naming the offending face.
pub fn pushforward(
    family: &BTreeMap<String, IndexSet>,
    matrix: &ExponentMatrix,
) -> Result<BTreeMap<String, IndexSet>> {
    for entry in &matrix.entries {
        if entry.order == 0 {
            return Err(Error::Validation(format!(
                "exponent matrix entry {} -> {} has order 0; omit interior-mapping pairs instead",
                entry.source, entry.target
            )));
        }
        if !family.contains_key(&entry.source) {
            return Err(Error::Validation(format!(
                "exponent matrix references source face {:?} absent from the family",
                entry.source
            )));
        }
    }

    // Null set: source faces with no row in the matrix at all.
    for (face, set) in family {
        let has_row = matrix.entries.iter().any(|e| &e.source == face);
        if !has_row && !set.is_empty() {
            let min_re = set.min_re().unwrap();
            if min_re <= -1.0 {
                return Err(Error::NonIntegrableFace {
                    face: face.clone(),
                    min_re,
                });
            }
        }
    }

    let mut out = BTreeMap::new();
    for target in matrix.targets() {
        let mut acc = IndexSet::empty();
        for entry in matrix.entries.iter().filter(|e| e.target == target) {
            let src = &family[&entry.source];
            if src.is_empty() {
                continue;
            }
            acc = acc.extended_union(&divided_set(src, entry.order));
        }
        out.insert(target, acc);
    }
    Ok(out)
}
