//! Survival amplitude, decay law and exponential-decay deviation diagnostics
//! for quantum unstable states described by an energy density `ω(E)`.
//!
//! Units: `ħ = 1`, energies in units of the decay width `Γ₀` (so the
//! Breit–Wigner resonance sits at `E = s_R` above threshold `E_min = 0`), and
//! time as `x = t/τ₀` with `τ₀ = ħ/Γ₀`.

pub mod analysis;
pub mod error;
pub mod quadrature;
pub mod special_functions;
pub mod spectral;

pub use num_complex::Complex64;

/// Complex number carrying amplitudes, `ζ` and `h(t)`.
pub type ComplexValue = Complex64;

pub use error::{DecayError, Result};
