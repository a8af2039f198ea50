//! Arithmetic for geometrically stitched bounds.
//!
//! Time is cut into epochs `[2^k, 2^{k+1})`; epoch `k` is charged an error
//! budget `δ/ℓ(k)` with `ℓ(k) = k²·ζ(2)`, which sums to at most `δ`. The price
//! paid at time `t` is the iterated-logarithm term `IL_t`.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// `ζ(2) = π²/6`.
pub const ZETA2: f64 = std::f64::consts::PI * std::f64::consts::PI / 6.0;

/// Largest power of two not exceeding `t`.
pub fn eta(t: u64) -> Result<u64> {
    if t == 0 {
        return Err(Error::Domain {
            name: "t",
            value: 0.0,
            domain: "[1, inf)",
        });
    }
    Ok(1u64 << (63 - t.leading_zeros()))
}

/// `ℓ(k) = k²·ζ(2)` for real `k ≥ 1`.
pub fn ell(k: f64) -> Result<f64> {
    if !(k >= 1.0) {
        return Err(Error::Domain {
            name: "k",
            value: k,
            domain: "[1, inf)",
        });
    }
    Ok(k * k * ZETA2)
}

/// `IL_t = ln ℓ(log₂(2t))`, with the logarithm taken as a real number.
pub fn il(t: u64) -> Result<f64> {
    if t == 0 {
        return Err(Error::Domain {
            name: "t",
            value: 0.0,
            domain: "[1, inf)",
        });
    }
    let k = (2.0 * t as f64).log2();
    Ok(ell(k)?.ln())
}

/// `ξ(k) = Σ_{ℓ=0}^{k} C(k,ℓ)(ℓ/k)^ℓ(1−ℓ/k)^{k−ℓ}`.
///
/// Summands are evaluated in the log domain; the two boundary terms equal 1
/// under the `0⁰ = 1` convention.
pub fn xi(k: u64) -> Result<f64> {
    Ok(ln_xi(k)?.exp())
}

/// `ln ξ(k)`; the form consumed by the bounds.
///
/// Stitched bounds only ever ask for `ξ` at epoch starts, so values at powers
/// of two up to `2^30` are memoized.
pub fn ln_xi(k: u64) -> Result<f64> {
    if k == 0 {
        return Err(Error::Domain {
            name: "k",
            value: 0.0,
            domain: "[1, inf)",
        });
    }
    if k.is_power_of_two() {
        if let Some(cell) = POW2_CACHE.get(k.trailing_zeros() as usize) {
            return Ok(*cell.get_or_init(|| ln_xi_sum(k)));
        }
    }
    Ok(ln_xi_sum(k))
}

static POW2_CACHE: [OnceLock<f64>; 31] = [const { OnceLock::new() }; 31];

fn ln_xi_sum(k: u64) -> f64 {
    let kf = k as f64;
    let ln_k = kf.ln();
    let mut sum = 2.0;
    // ln C(k, l), advanced by the ratio C(k, l)/C(k, l−1) = (k−l+1)/l.
    let mut ln_binom = 0.0;
    for l in 1..k {
        let lf = l as f64;
        let m = kf - lf;
        ln_binom += ((m + 1.0) / lf).ln();
        sum += (ln_binom + lf * (lf.ln() - ln_k) + m * (m.ln() - ln_k)).exp();
    }
    sum.ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Direct summation with exact binomials; usable for small `k` only.
    fn xi_brute(k: u64) -> f64 {
        let kf = k as f64;
        (0..=k)
            .map(|l| {
                let mut binom = 1.0;
                for j in 0..l {
                    binom *= (k - j) as f64 / (j + 1) as f64;
                }
                let p = l as f64 / kf;
                binom * p.powi(l as i32) * (1.0 - p).powi((k - l) as i32)
            })
            .sum()
    }

    #[test]
    fn zeta2_value() {
        assert!((1.6449..=1.64494).contains(&ZETA2));
        let partial: f64 = (1..200_000u64).map(|j| 1.0 / (j * j) as f64).sum();
        assert_abs_diff_eq!(partial, ZETA2, epsilon = 1e-5);
    }

    #[test]
    fn eta_examples() {
        assert_eq!(eta(1).unwrap(), 1);
        assert_eq!(eta(3).unwrap(), 2);
        assert_eq!(eta(1024).unwrap(), 1024);
        assert_eq!(eta(1023).unwrap(), 512);
        assert_eq!(eta(u64::MAX).unwrap(), 1 << 63);
        assert!(eta(0).is_err());
    }

    #[test]
    fn ell_examples() {
        assert_abs_diff_eq!(ell(1.0).unwrap(), 1.644934, epsilon = 1e-6);
        assert_abs_diff_eq!(ell(2.0).unwrap(), 6.579736, epsilon = 1e-6);
        assert_abs_diff_eq!(ell(10.0).unwrap(), 164.4934, epsilon = 1e-4);
        assert!(ell(0.5).is_err());
    }

    #[test]
    fn il_examples() {
        assert_abs_diff_eq!(il(1).unwrap(), ZETA2.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(il(1).unwrap(), 0.49770, epsilon = 1e-5);
        assert_abs_diff_eq!(il(8).unwrap(), (16.0 * ZETA2).ln(), epsilon = 1e-14);
        assert_abs_diff_eq!(il(8).unwrap(), 3.27029, epsilon = 1e-5);
        assert!(il(8).unwrap() < 2.0 * 16f64.ln().ln() + 1.3);
        assert!(il(0).is_err());
    }

    #[test]
    fn xi_examples() {
        assert_abs_diff_eq!(xi(1).unwrap(), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(xi(2).unwrap(), 2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(xi(5).unwrap(), 3.5104, epsilon = 1e-4);
        assert!(xi(0).is_err());
    }

    #[test]
    fn xi_matches_brute_force() {
        for k in 1..=60 {
            let want = xi_brute(k);
            assert_abs_diff_eq!(xi(k).unwrap(), want, epsilon = 1e-10 * want);
        }
    }

    #[test]
    fn xi_large_k_is_finite() {
        let v = xi(1_000_000).unwrap();
        assert!(v.is_finite());
        assert!((1000.0..=2000.0).contains(&v));
    }

    #[test]
    fn ell_reciprocals_sum_below_one() {
        let s: f64 = (1..=1_000_000u64)
            .map(|k| 1.0 / ell(k as f64).unwrap())
            .sum();
        assert!(s < 1.0);
    }

    proptest! {
        #[test]
        fn eta_brackets(t in 1u64..1_000_000) {
            let e = eta(t).unwrap();
            prop_assert!(e.is_power_of_two());
            prop_assert!(2 * e > t && e <= t);
            prop_assert!(eta(t + 1).unwrap() >= e);
        }

        #[test]
        fn il_below_loglog(t in 1u64..1_000_000) {
            let v = il(t).unwrap();
            prop_assert!(v < 2.0 * (2.0 * t as f64).ln().ln() + 1.3);
            prop_assert!(il(t + 1).unwrap() >= v);
        }

        #[test]
        fn xi_sqrt_bracket(k in 1u64..3000) {
            let v = xi(k).unwrap();
            let r = (k as f64).sqrt();
            prop_assert!(r <= v && v <= 2.0 * r);
        }
    }
}
