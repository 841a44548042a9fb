//! Exponential integral `E1(z)` for complex arguments.
//!
//! `E1(z) = ∫_z^∞ e^{-u}/u du` on the principal branch, with the cut along the
//! closed negative real axis. Three evaluation regions are used:
//!
//! * a modified-Lentz continued fraction for `e^z E1(z)` wherever
//!   `Re √z ≥ 1` (this covers the right half-plane outside the unit disc and
//!   most of the left half-plane, including arguments of the form
//!   `(-1/2 - i s) x` with large `s`),
//! * the convergent power series `-γ - ln z - Σ (-z)^k / (k k!)` for the
//!   remaining points with `|z| ≤ 40`, i.e. near the origin and in a narrow
//!   wedge around the negative real axis where the series does not cancel,
//! * the asymptotic expansion `e^z E1(z) ~ Σ (-1)^k k! / z^{k+1}` in that
//!   wedge for `|z| > 40`, truncated at its smallest term.
//!
//! `e1_scaled` returns `g(z) = e^z E1(z)`, which stays representable where
//! `e^{±z}` on its own overflows.

use num_complex::Complex64;

use crate::error::{DecayError, Result};
use crate::ComplexValue;

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.57721566490153286061;

const MAX_ITERATIONS: usize = 500;
const SERIES_TOL: f64 = 1e-16;
const ASYMPTOTIC_RADIUS: f64 = 40.0;
const FPMIN: f64 = 1e-300;

// ln(f64::MAX)
const LN_MAX: f64 = 709.782712893384;

fn check_domain(z: ComplexValue) -> Result<()> {
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(DecayError::Domain(format!("E1 argument {z} is not finite")));
    }
    if z.im == 0.0 && z.re <= 0.0 {
        return Err(DecayError::Domain(format!(
            "E1 argument {z} lies on the branch cut or at the origin"
        )));
    }
    Ok(())
}

enum Region {
    ContinuedFraction,
    Series,
    Asymptotic,
}

fn region(z: ComplexValue) -> Region {
    let modulus = z.norm();
    // Re √z without forming the complex square root.
    let q = ((modulus + z.re) * 0.5).sqrt();
    if q >= 1.0 {
        Region::ContinuedFraction
    } else if modulus <= ASYMPTOTIC_RADIUS {
        Region::Series
    } else {
        Region::Asymptotic
    }
}

/// `e^z E1(z)` by the even continued fraction
/// `1/(z+1- 1/(z+3- 4/(z+5- ...)))`, modified Lentz.
fn scaled_continued_fraction(z: ComplexValue) -> Result<ComplexValue> {
    let tiny = Complex64::new(FPMIN, 0.0);
    let mut b = z + 1.0;
    let mut c = Complex64::new(1.0 / FPMIN, 0.0);
    let mut d = b.inv();
    let mut h = d;
    for i in 1..=MAX_ITERATIONS {
        let an = -((i * i) as f64);
        b += 2.0;
        d = d * an + b;
        if d.norm() < FPMIN {
            d = tiny;
        }
        d = d.inv();
        c = b + c.inv() * an;
        if c.norm() < FPMIN {
            c = tiny;
        }
        let delta = c * d;
        h *= delta;
        if (delta - 1.0).norm() <= f64::EPSILON {
            return Ok(h);
        }
    }
    Err(DecayError::NoConvergence {
        routine: "E1 continued fraction",
        iterations: MAX_ITERATIONS,
    })
}

/// `E1(z)` by the power series around the origin.
fn series(z: ComplexValue) -> Result<ComplexValue> {
    let mut sum = Complex64::new(0.0, 0.0);
    let mut power = Complex64::new(1.0, 0.0);
    for k in 1..=MAX_ITERATIONS {
        let kf = k as f64;
        power = power * (-z) / kf;
        let term = power / kf;
        sum += term;
        if term.norm() <= SERIES_TOL * sum.norm() {
            return Ok(-EULER_GAMMA - z.ln() - sum);
        }
    }
    Err(DecayError::NoConvergence {
        routine: "E1 power series",
        iterations: MAX_ITERATIONS,
    })
}

/// `e^z E1(z)` by the asymptotic expansion, stopped at the smallest term.
fn scaled_asymptotic(z: ComplexValue) -> Result<ComplexValue> {
    let inv = z.inv();
    let mut term = inv;
    let mut sum = term;
    let mut last = term.norm();
    for k in 1..=MAX_ITERATIONS {
        let next = term * (-(k as f64)) * inv;
        let size = next.norm();
        if size >= last {
            // Smallest term reached; its size bounds the truncation error.
            return Ok(sum);
        }
        sum += next;
        term = next;
        last = size;
        if size <= SERIES_TOL * sum.norm() {
            return Ok(sum);
        }
    }
    Err(DecayError::NoConvergence {
        routine: "E1 asymptotic expansion",
        iterations: MAX_ITERATIONS,
    })
}

/// Exponential integral `E1(z)` on the principal branch.
///
/// Arguments at the origin or on the closed negative real axis are rejected
/// with [`DecayError::Domain`]. When `|E1(z)|` is too large for an `f64`
/// (far into the left half-plane) the call fails with
/// [`DecayError::RangeExceeded`]; use [`e1_scaled`] there instead.
pub fn e1(z: ComplexValue) -> Result<ComplexValue> {
    check_domain(z)?;
    match region(z) {
        Region::Series => series(z),
        Region::ContinuedFraction => unscale(z, scaled_continued_fraction(z)?),
        Region::Asymptotic => unscale(z, scaled_asymptotic(z)?),
    }
}

/// Scaled exponential integral `g(z) = e^z E1(z)`.
///
/// For large `|z|`, `g(z) ≈ 1/z - 1/z² + …`, so it remains representable
/// wherever `E1` itself overflows or underflows.
pub fn e1_scaled(z: ComplexValue) -> Result<ComplexValue> {
    check_domain(z)?;
    match region(z) {
        Region::Series => Ok(z.exp() * series(z)?),
        Region::ContinuedFraction => scaled_continued_fraction(z),
        Region::Asymptotic => scaled_asymptotic(z),
    }
}

fn unscale(z: ComplexValue, scaled: ComplexValue) -> Result<ComplexValue> {
    let log_modulus = -z.re + scaled.norm().ln();
    if log_modulus > LN_MAX {
        return Err(DecayError::RangeExceeded(format!("|E1({z})| overflows")));
    }
    let value = (-z).exp() * scaled;
    if value.re.is_finite() && value.im.is_finite() {
        Ok(value)
    } else {
        Err(DecayError::RangeExceeded(format!("|E1({z})| overflows")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> ComplexValue {
        Complex64::new(re, im)
    }

    #[test]
    fn real_axis_reference_values() {
        let v = e1(c(1.0, 0.0)).unwrap();
        assert_relative_eq!(v.re, 0.21938393439552027, max_relative = 1e-13);
        assert_eq!(v.im, 0.0);
        let v = e1(c(10.0, 0.0)).unwrap();
        assert_relative_eq!(v.re, 4.156968929685324e-6, max_relative = 1e-12);
    }

    #[test]
    fn scaled_reference_values() {
        let g = e1_scaled(c(1.0, 0.0)).unwrap();
        assert_relative_eq!(g.re, 0.5963473623231941, max_relative = 1e-13);
        let z = c(1000.0, 0.0);
        let g = e1_scaled(z).unwrap();
        assert!((z * g - 1.0).norm() < 1e-3);
    }

    #[test]
    fn just_above_and_below_the_cut() {
        // E1(-x ± i0) = -Ei(x) ∓ iπ; Ei(1) = 1.8951178163559368.
        let above = e1(c(-1.0, 1e-300)).unwrap();
        let below = e1(c(-1.0, -1e-300)).unwrap();
        assert_relative_eq!(above.re, -1.8951178163559368, max_relative = 1e-13);
        assert_relative_eq!(above.im, -std::f64::consts::PI, max_relative = 1e-13);
        assert_eq!(below, above.conj());
    }

    #[test]
    fn rejects_cut_and_origin() {
        assert!(matches!(e1(c(0.0, 0.0)), Err(DecayError::Domain(_))));
        assert!(matches!(e1(c(-2.0, 0.0)), Err(DecayError::Domain(_))));
        assert!(matches!(e1_scaled(c(-2.0, 0.0)), Err(DecayError::Domain(_))));
        assert!(matches!(e1(c(f64::NAN, 1.0)), Err(DecayError::Domain(_))));
    }

    #[test]
    fn overflow_is_reported() {
        let z = c(-1000.0, 1.0);
        assert!(matches!(e1(z), Err(DecayError::RangeExceeded(_))));
        let g = e1_scaled(z).unwrap();
        assert!((z * g - 1.0).norm() < 1e-2);
    }

    #[test]
    fn regions_agree_at_their_boundaries() {
        // Points straddling the Re √z = 1 switch and the |z| = 40 switch.
        for &z in &[c(0.0, 2.0), c(-1.0, 2.83), c(-39.9, 0.5), c(-40.1, 0.5)] {
            let cf = scaled_continued_fraction(z).unwrap();
            let other = if z.norm() <= ASYMPTOTIC_RADIUS {
                z.exp() * series(z).unwrap()
            } else {
                scaled_asymptotic(z).unwrap()
            };
            assert!((cf - other).norm() <= 1e-12 * cf.norm(), "{z}: {cf} vs {other}");
        }
    }

    #[test]
    fn conjugate_symmetry_is_exact() {
        for &z in &[c(2.0, 3.0), c(-5.0, 0.3), c(0.01, -0.2), c(-60.0, 2.0), c(30.0, 40.0)] {
            assert_eq!(e1_scaled(z.conj()).unwrap(), e1_scaled(z).unwrap().conj());
        }
        let z = c(2.0, 3.0);
        assert_eq!(e1(z.conj()).unwrap(), e1(z).unwrap().conj());
    }
}
