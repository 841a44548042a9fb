//! Spectral-density models and the closed-form Breit–Wigner amplitude.
//!
//! With `E_min = 0` and energies in units of `Γ₀`, the Breit–Wigner density is
//!
//! ```text
//! ω(E) = (N / 2π) Θ(E) / ((E - s_R)² + 1/4),   N = 1 / (1/2 + arctan(2 s_R)/π)
//! ```
//!
//! and its Fourier transform splits into a pole term and a cut term,
//!
//! ```text
//! a(x) = N e^{-(1/2 + i s_R) x} - (i N / 2π) [g(w₊) - g(w₋)],
//! w± = (±1/2 - i s_R) x,   g(w) = e^w E1(w).
//! ```
//!
//! Every explicit exponential above has non-positive real exponent, so `a(x)`
//! never overflows. `ζ(x) = a(x) / a_c(x)` grows like `e^{x/2}/x` and is
//! evaluated in polar form until it leaves the `f64` range.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{DecayError, Result};
use crate::quadrature;
use crate::special_functions::e1_scaled;
use crate::ComplexValue;

// ln(f64::MAX)
const LN_MAX: f64 = 709.782712893384;

/// Number of resonance half-widths on each side of the peak treated as the
/// pole region by the quadrature layout.
pub const POLE_REGION_HALF_WIDTHS: f64 = 50.0;

/// An energy density `ω(E)` that can be evaluated pointwise.
///
/// Implementations are shared across threads by the quadrature engine, so
/// `density` must be safe to call concurrently.
pub trait SpectralDensity: Send + Sync {
    /// `ω(E)`; zero below [`threshold`](Self::threshold).
    fn density(&self, energy: f64) -> f64;

    /// Lower edge of the spectrum, `E_min`.
    fn threshold(&self) -> f64;

    /// Location and half-width of the resonance peak, if the density has one.
    fn resonance(&self) -> Option<Resonance>;

    /// Complex energy `E₀ - iΓ/2` defining the canonical exponential amplitude
    /// `a_c(x) = e^{-i (E₀ - iΓ/2) x}` that this density is compared against.
    fn canonical_pole(&self) -> ComplexValue;

    /// Exponent of the threshold factor `(E - E_min)^α`. A non-integer value
    /// makes the quadrature engine flatten the threshold with `E = E_min + u²`.
    fn threshold_exponent(&self) -> f64 {
        0.0
    }
}

/// Peak position and half-width at half maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resonance {
    pub center: f64,
    pub half_width: f64,
}

/// Breit–Wigner density with resonance `s_R = E_R/Γ₀` above threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BreitWignerParams {
    s_r: f64,
    normalization: f64,
}

impl BreitWignerParams {
    pub fn new(s_r: f64) -> Result<Self> {
        if !(s_r.is_finite() && s_r > 0.0) {
            return Err(DecayError::InvalidParameter(format!(
                "s_R must be positive and finite, got {s_r}"
            )));
        }
        Ok(Self {
            s_r,
            normalization: Self::normalization_for(s_r),
        })
    }

    /// Parameters with an explicitly chosen `N`, bypassing normalization.
    ///
    /// Only useful as a negative control: the resulting density does not
    /// integrate to one and `a(0) ≠ 1`.
    pub fn with_normalization(s_r: f64, normalization: f64) -> Result<Self> {
        let mut params = Self::new(s_r)?;
        if !(normalization.is_finite() && normalization > 0.0) {
            return Err(DecayError::InvalidParameter(format!(
                "normalization must be positive and finite, got {normalization}"
            )));
        }
        params.normalization = normalization;
        Ok(params)
    }

    /// `N = 1 / (1/2 + arctan(2 s_R)/π)`.
    pub fn normalization_for(s_r: f64) -> f64 {
        1.0 / (0.5 + (2.0 * s_r).atan() / PI)
    }

    pub fn s_r(&self) -> f64 {
        self.s_r
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    /// `∫_Λ^∞ ω(E) dE`, the spectral weight above `Λ`.
    pub fn tail_weight(&self, cutoff: f64) -> f64 {
        self.normalization * (0.5 - (2.0 * (cutoff - self.s_r)).atan() / PI)
    }

    /// `g(w₊) - g(w₋)` for `x > 0`.
    fn cut_difference(&self, x: f64) -> Result<ComplexValue> {
        let plus = Complex64::new(0.5, -self.s_r) * x;
        let minus = Complex64::new(-0.5, -self.s_r) * x;
        Ok(e1_scaled(plus)? - e1_scaled(minus)?)
    }

    /// Limit of the bracket `1 - (i/2π)[e^x E1(w₊) - E1(w₋)]` at `x = 0`,
    /// where the E1 difference tends to `ln w₋ - ln w₊ = i (2 arctan(2 s_R) - π)`.
    fn origin_value(&self) -> ComplexValue {
        // N (1/2 + arctan(2 s_R)/π), written so that it is exactly 1 when normalized
        Complex64::new(self.normalization / Self::normalization_for(self.s_r), 0.0)
    }

    pub fn density(&self, energy: f64) -> f64 {
        omega_bw(energy, self)
    }

    pub fn amplitude(&self, x: f64) -> Result<ComplexValue> {
        amplitude_closed_form(x, self)
    }

    pub fn zeta(&self, x: f64) -> Result<ComplexValue> {
        zeta_closed_form(x, self)
    }

    pub fn dzeta_dx(&self, x: f64) -> Result<ComplexValue> {
        dzeta_dx_closed_form(x, self)
    }
}

impl SpectralDensity for BreitWignerParams {
    fn density(&self, energy: f64) -> f64 {
        omega_bw(energy, self)
    }

    fn threshold(&self) -> f64 {
        0.0
    }

    fn resonance(&self) -> Option<Resonance> {
        Some(Resonance {
            center: self.s_r,
            half_width: 0.5,
        })
    }

    fn canonical_pole(&self) -> ComplexValue {
        Complex64::new(self.s_r, -0.5)
    }
}

/// `ω_BW(E) = (N/2π) Θ(E) / ((E - s_R)² + 1/4)`.
pub fn omega_bw(energy: f64, params: &BreitWignerParams) -> f64 {
    if energy <= 0.0 {
        return 0.0;
    }
    let detuning = energy - params.s_r;
    params.normalization / (2.0 * PI) / (detuning * detuning + 0.25)
}

fn check_time(x: f64) -> Result<()> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err(DecayError::InvalidParameter(format!(
            "time must be finite and non-negative, got {x}"
        )))
    }
}

/// Survival amplitude `a(x)` of the Breit–Wigner state in closed form.
///
/// Phases are measured from `E_min = 0`, i.e. `a(x)` carries `e^{-i s_R x}`.
pub fn amplitude_closed_form(x: f64, params: &BreitWignerParams) -> Result<ComplexValue> {
    check_time(x)?;
    if x == 0.0 {
        return Ok(params.origin_value());
    }
    let n = params.normalization;
    let pole = Complex64::from_polar(n * (-0.5 * x).exp(), -params.s_r * x);
    let cut = Complex64::new(0.0, -n / (2.0 * PI)) * params.cut_difference(x)?;
    Ok(pole + cut)
}

/// `ζ(x) = a(x) / a_c(x)` for the Breit–Wigner state.
///
/// Fails with [`DecayError::RangeExceeded`] once `|ζ|` leaves the `f64`
/// range (around `x ≈ 1400`).
pub fn zeta_closed_form(x: f64, params: &BreitWignerParams) -> Result<ComplexValue> {
    check_time(x)?;
    if x == 0.0 {
        return Ok(params.origin_value());
    }
    let n = params.normalization;
    let difference = params.cut_difference(x)?;
    let growth = grown(x, params.s_r, difference)?;
    Ok(Complex64::new(n, 0.0) - Complex64::new(0.0, n / (2.0 * PI)) * growth)
}

/// `dζ/dx = -(i N / 2π) e^x E1(w₊)`, evaluated as `-(i N/2π) e^{(1/2 + i s_R) x} g(w₊)`.
///
/// This is the derivative of [`zeta_closed_form`]. Undefined at `x = 0`,
/// where `E1(w₊)` has its logarithmic singularity.
pub fn dzeta_dx_closed_form(x: f64, params: &BreitWignerParams) -> Result<ComplexValue> {
    check_time(x)?;
    if x == 0.0 {
        return Err(DecayError::Domain(
            "dζ/dx is singular at x = 0".to_string(),
        ));
    }
    let n = params.normalization;
    let g = e1_scaled(Complex64::new(0.5, -params.s_r) * x)?;
    let growth = grown(x, params.s_r, g)?;
    Ok(Complex64::new(0.0, -n / (2.0 * PI)) * growth)
}

/// `e^{(1/2 + i s_R) x} · value` in polar form, so that `e^{x/2}` is never
/// formed on its own.
fn grown(x: f64, s_r: f64, value: ComplexValue) -> Result<ComplexValue> {
    let modulus = value.norm();
    if modulus == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let log_modulus = 0.5 * x + modulus.ln();
    if log_modulus > LN_MAX {
        return Err(DecayError::RangeExceeded(format!(
            "|ζ| ~ e^{log_modulus:.1} at x = {x}"
        )));
    }
    let out = Complex64::from_polar(log_modulus.exp(), s_r * x + value.arg());
    if out.re.is_finite() && out.im.is_finite() {
        Ok(out)
    } else {
        Err(DecayError::RangeExceeded(format!("|ζ| overflows at x = {x}")))
    }
}

/// Real, non-negative form factor `F(E)`; must be callable from several threads.
pub type FormFactor = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Threshold factor × pole function × form factor:
/// `ω(E) ∝ Θ(E - E_min) (E - E_min)^{α + l} P(E) F(E)` with
/// `P(E) = 1 / |E - E_p|²` for a pole at `E_p = E₀ - iΓ/2`.
#[derive(Clone)]
pub struct GeneralDensityParams {
    pub threshold: f64,
    /// Fractional part of the threshold exponent, `0 ≤ α < 1`.
    pub alpha: f64,
    /// Angular momentum; the threshold exponent is `α + l`.
    pub angular_momentum: u32,
    /// `E₀ - iΓ/2`, with `Γ > 0`.
    pub pole_position: ComplexValue,
    pub form_factor: FormFactor,
}

impl fmt::Debug for GeneralDensityParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneralDensityParams")
            .field("threshold", &self.threshold)
            .field("alpha", &self.alpha)
            .field("angular_momentum", &self.angular_momentum)
            .field("pole_position", &self.pole_position)
            .finish_non_exhaustive()
    }
}

impl GeneralDensityParams {
    /// Breit–Wigner pole at `s_R - i/2` with no threshold factor and `F ≡ 1`.
    pub fn breit_wigner(s_r: f64) -> Self {
        Self {
            threshold: 0.0,
            alpha: 0.0,
            angular_momentum: 0,
            pole_position: Complex64::new(s_r, -0.5),
            form_factor: Arc::new(|_| 1.0),
        }
    }

    pub fn exponent(&self) -> f64 {
        self.alpha + self.angular_momentum as f64
    }

    fn unnormalized(&self, energy: f64) -> f64 {
        if energy <= self.threshold {
            return 0.0;
        }
        let above = energy - self.threshold;
        let exponent = self.exponent();
        let threshold_factor = if exponent == 0.0 { 1.0 } else { above.powf(exponent) };
        let detuning = energy - self.pole_position.re;
        let pole = 1.0 / (detuning * detuning + self.pole_position.im * self.pole_position.im);
        threshold_factor * pole * (self.form_factor)(energy)
    }
}

/// A [`GeneralDensityParams`] density, normalized by quadrature at construction.
#[derive(Debug, Clone)]
pub struct GeneralDensity {
    params: GeneralDensityParams,
    scale: f64,
}

impl GeneralDensity {
    /// Validates the parameters and normalizes the density numerically.
    ///
    /// Fails if the form factor is negative anywhere the normalization
    /// quadrature looks, or if the density is not integrable.
    pub fn new(params: GeneralDensityParams) -> Result<Self> {
        if !params.threshold.is_finite() {
            return Err(DecayError::InvalidParameter("threshold must be finite".into()));
        }
        if !(0.0..1.0).contains(&params.alpha) {
            return Err(DecayError::InvalidParameter(format!(
                "alpha must lie in [0, 1), got {}",
                params.alpha
            )));
        }
        let pole = params.pole_position;
        if !(pole.re.is_finite() && pole.im.is_finite() && pole.im < 0.0) {
            return Err(DecayError::InvalidParameter(format!(
                "pole must be finite with negative imaginary part, got {pole}"
            )));
        }

        let unnormalized = Self { params, scale: 1.0 };
        let negative = std::sync::atomic::AtomicBool::new(false);
        let weight = quadrature::integrate_density(
            &|e| {
                let v = unnormalized.params.unnormalized(e);
                if v < 0.0 || !v.is_finite() {
                    negative.store(true, std::sync::atomic::Ordering::Relaxed);
                }
                v
            },
            &unnormalized,
        )
        .map_err(|e| {
            DecayError::InvalidParameter(format!("density is not normalizable: {e}"))
        })?;
        if negative.load(std::sync::atomic::Ordering::Relaxed) {
            return Err(DecayError::InvalidParameter(
                "form factor produced a negative or non-finite density".into(),
            ));
        }
        if !(weight.is_finite() && weight > 0.0) {
            return Err(DecayError::InvalidParameter(format!(
                "density has non-positive total weight {weight}"
            )));
        }
        Ok(Self {
            scale: 1.0 / weight,
            ..unnormalized
        })
    }

    pub fn params(&self) -> &GeneralDensityParams {
        &self.params
    }
}

impl SpectralDensity for GeneralDensity {
    fn density(&self, energy: f64) -> f64 {
        omega_general(energy, self)
    }

    fn threshold(&self) -> f64 {
        self.params.threshold
    }

    fn resonance(&self) -> Option<Resonance> {
        Some(Resonance {
            center: self.params.pole_position.re,
            half_width: -self.params.pole_position.im,
        })
    }

    fn canonical_pole(&self) -> ComplexValue {
        self.params.pole_position
    }

    fn threshold_exponent(&self) -> f64 {
        self.params.exponent()
    }
}

/// Pointwise value of a normalized general density.
pub fn omega_general(energy: f64, density: &GeneralDensity) -> f64 {
    density.scale * density.params.unnormalized(energy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn normalization_closed_form() {
        let p = BreitWignerParams::new(1000.0).unwrap();
        assert_relative_eq!(p.normalization(), 1.0 / (1.0 - (0.5 - 2000f64.atan() / PI)));
        assert!(p.normalization() > 1.0);
        assert_relative_eq!(p.tail_weight(0.0), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn peak_and_threshold() {
        let p = BreitWignerParams::new(1000.0).unwrap();
        let peak = omega_bw(1000.0, &p);
        assert_relative_eq!(peak, 2.0 * p.normalization() / PI, max_relative = 1e-15);
        assert!((peak - 0.6367).abs() < 1e-3);
        assert_eq!(omega_bw(-1.0, &p), 0.0);
        assert_eq!(omega_bw(0.0, &p), 0.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(BreitWignerParams::new(0.0).is_err());
        assert!(BreitWignerParams::new(-3.0).is_err());
        assert!(BreitWignerParams::new(f64::NAN).is_err());
        assert!(BreitWignerParams::with_normalization(10.0, -1.0).is_err());
        let p = BreitWignerParams::new(10.0).unwrap();
        assert!(amplitude_closed_form(-1.0, &p).is_err());
    }

    #[test]
    fn values_at_origin() {
        for s in [0.3, 10.0, 100.0, 1000.0] {
            let p = BreitWignerParams::new(s).unwrap();
            let a = amplitude_closed_form(0.0, &p).unwrap();
            assert_eq!(a, Complex64::new(1.0, 0.0));
            assert_eq!(zeta_closed_form(0.0, &p).unwrap(), a);
        }
        let p = BreitWignerParams::new(10.0).unwrap();
        assert!(matches!(dzeta_dx_closed_form(0.0, &p), Err(DecayError::Domain(_))));
    }

    #[test]
    fn continuous_at_origin() {
        for s in [10.0, 100.0, 1000.0] {
            let p = BreitWignerParams::new(s).unwrap();
            let a = amplitude_closed_form(1e-10, &p).unwrap();
            let z = zeta_closed_form(1e-10, &p).unwrap();
            assert!((a - 1.0).norm() < 1e-6, "s = {s}: {a}");
            assert!((z - 1.0).norm() < 1e-6, "s = {s}: {z}");
        }
    }

    #[test]
    fn zeta_overflow_is_reported() {
        let p = BreitWignerParams::new(10.0).unwrap();
        assert!(zeta_closed_form(1300.0, &p).is_ok());
        assert!(matches!(
            zeta_closed_form(1500.0, &p),
            Err(DecayError::RangeExceeded(_))
        ));
        // the amplitude itself stays representable
        assert!(amplitude_closed_form(1e5, &p).unwrap().norm() > 0.0);
    }

    #[test]
    fn general_density_reduces_to_breit_wigner() {
        let bw = BreitWignerParams::new(10.0).unwrap();
        let general = GeneralDensity::new(GeneralDensityParams::breit_wigner(10.0)).unwrap();
        for e in [-1.0, 0.5, 9.0, 10.0, 10.3, 50.0, 1e4] {
            let a = omega_general(e, &general);
            let b = omega_bw(e, &bw);
            assert!((a - b).abs() <= 1e-10 * b.max(1e-300), "E = {e}: {a} vs {b}");
        }
    }

    #[test]
    fn threshold_factor_vanishes_like_square_root() {
        let mut params = GeneralDensityParams::breit_wigner(5.0);
        params.alpha = 0.5;
        params.threshold = 1.0;
        let d = GeneralDensity::new(params).unwrap();
        assert_eq!(omega_general(0.5, &d), 0.0);
        assert_eq!(omega_general(1.0, &d), 0.0);
        let r = omega_general(1.0 + 1e-8, &d) / omega_general(1.0 + 4e-8, &d);
        assert_relative_eq!(r, 0.5, max_relative = 1e-6);
    }

    #[test]
    fn general_density_validation() {
        let mut p = GeneralDensityParams::breit_wigner(5.0);
        p.alpha = 1.0;
        assert!(GeneralDensity::new(p).is_err());
        let mut p = GeneralDensityParams::breit_wigner(5.0);
        p.pole_position = Complex64::new(5.0, 0.5);
        assert!(GeneralDensity::new(p).is_err());
        let mut p = GeneralDensityParams::breit_wigner(5.0);
        p.form_factor = Arc::new(|e| if e > 7.0 { -1.0 } else { 1.0 });
        assert!(GeneralDensity::new(p).is_err());
        // l = 1 with F ≡ 1 decays like 1/E: not integrable
        let mut p = GeneralDensityParams::breit_wigner(5.0);
        p.angular_momentum = 1;
        assert!(GeneralDensity::new(p).is_err());
    }
}
