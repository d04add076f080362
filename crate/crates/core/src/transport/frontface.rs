//! The algebraic recursion on the front face.
//!
//! On the front face the operator acts on a two-index expansion
//! `sum u_{j,l} x^{alpha + j} (log x)^l` purely algebraically in the
//! exponent: each coefficient is obtained from already-known data by
//! inverting the scalar
//!
//! ```text
//! D(alpha) = -((n - 1 - alpha) alpha + lambda),
//! ```
//!
//! which vanishes exactly at the characteristic roots `s±(lambda)`. The
//! step below performs one inversion:
//!
//! ```text
//! u_{j,l} = D(alpha)^{-1} ( r
//!           + (n - 1 - 2 alpha)(l + 1) u_{j,l+1}
//!           - (l + 1)(l + 2) u_{j,l+2}
//!           - Lap_z u_{j-2,l} ),
//! ```
//!
//! pointwise on whatever spatial sampling the caller uses for the
//! coefficients.

use crate::error::{Error, Result};
use crate::exact::characteristic_roots_f64;

const RESONANCE_TOL: f64 = 1e-9;

/// Exponent of the overall symbol weight contributed at expansion level
/// `(j, k)` in dimension `n`: `k + n/2 - 2 - j`.
pub fn symbol_order_exponent(j: i64, k: i64, n: u32) -> f64 {
    k as f64 + n as f64 / 2.0 - 2.0 - j as f64
}

/// One coefficient extraction at exponent `alpha + j`, log power `l`.
///
/// `u_up1` and `u_up2` are the coefficients at log powers `l + 1` and
/// `l + 2` of the same exponent (zero slices when absent), `lap_prev` is
/// the spatial Laplacian of the coefficient two exponent levels down, and
/// `forcing` is the source coefficient at this slot. All slices share one
/// sampling and must have equal lengths.
pub fn front_face_step(
    n: u32,
    lambda: f64,
    alpha: f64,
    l: u32,
    u_up1: &[f64],
    u_up2: &[f64],
    lap_prev: &[f64],
    forcing: &[f64],
) -> Result<Vec<f64>> {
    let len = forcing.len();
    if u_up1.len() != len || u_up2.len() != len || lap_prev.len() != len {
        return Err(Error::Validation(format!(
            "coefficient slices disagree in length: {} / {} / {} / {}",
            u_up1.len(),
            u_up2.len(),
            lap_prev.len(),
            len
        )));
    }
    let nf = n as f64;
    let d = -((nf - 1.0 - alpha) * alpha + lambda);
    if d.abs() < RESONANCE_TOL {
        let (s_minus, s_plus) = characteristic_roots_f64(n, lambda);
        return Err(Error::Resonance { alpha, s_minus, s_plus });
    }
    let lf = l as f64;
    let c_up1 = (nf - 1.0 - 2.0 * alpha) * (lf + 1.0);
    let c_up2 = (lf + 1.0) * (lf + 2.0);
    Ok((0..len)
        .map(|i| (forcing[i] + c_up1 * u_up1[i] - c_up2 * u_up2[i] - lap_prev[i]) / d)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_example() {
        // n = 4, lambda = 0, alpha = 1: D = -2, so unit forcing maps to -1/2.
        let u = front_face_step(4, 0.0, 1.0, 0, &[0.0], &[0.0], &[0.0], &[1.0]).unwrap();
        assert_eq!(u, vec![-0.5]);
    }

    #[test]
    fn resonant_exponents_are_refused() {
        for alpha in [0.0, 3.0] {
            let err =
                front_face_step(4, 0.0, alpha, 0, &[0.0], &[0.0], &[0.0], &[1.0]).unwrap_err();
            match err {
                Error::Resonance { alpha: a, s_minus, s_plus } => {
                    assert_eq!(a, alpha);
                    assert_eq!(s_minus, 0.0);
                    assert_eq!(s_plus, 3.0);
                }
                other => panic!("expected resonance, got {other:?}"),
            }
        }
        // Just off the roots the step succeeds.
        assert!(front_face_step(4, 0.0, 2.9, 0, &[0.0], &[0.0], &[0.0], &[1.0]).is_ok());
    }

    #[test]
    fn zero_data_stays_zero() {
        let z = vec![0.0; 8];
        let u = front_face_step(3, 0.25, 1.5, 2, &z, &z, &z, &z).unwrap();
        assert!(u.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn inverts_the_defining_relation() {
        // Reconstruct the forcing from the output and the inputs; this pins
        // the sign conventions of all four terms.
        let n = 5u32;
        let (lambda, alpha, l) = (0.7, 1.3, 2u32);
        let u_up1 = [0.2, -0.4, 1.0];
        let u_up2 = [0.05, 0.3, -0.7];
        let lap = [1.0, 0.0, -2.5];
        let r = [0.9, -1.1, 0.33];
        let u = front_face_step(n, lambda, alpha, l, &u_up1, &u_up2, &lap, &r).unwrap();
        let nf = n as f64;
        let d = -((nf - 1.0 - alpha) * alpha + lambda);
        let lf = l as f64;
        for i in 0..3 {
            let back = d * u[i] - (nf - 1.0 - 2.0 * alpha) * (lf + 1.0) * u_up1[i]
                + (lf + 1.0) * (lf + 2.0) * u_up2[i]
                + lap[i];
            assert!((back - r[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn mismatched_slices_rejected() {
        assert!(front_face_step(4, 0.0, 1.0, 0, &[0.0; 2], &[0.0], &[0.0], &[1.0]).is_err());
    }

    #[test]
    fn symbol_order_examples() {
        assert_eq!(symbol_order_exponent(0, 0, 4), 0.0);
        assert_eq!(symbol_order_exponent(1, 0, 4), -1.0);
        assert_eq!(symbol_order_exponent(0, 0, 3), -0.5);
        // Each unit of j lowers the order by one; each unit of k raises it.
        assert_eq!(symbol_order_exponent(2, 1, 4), -1.0);
    }
}
