//! Decay-law diagnostics: canonical amplitude, `ζ` and `f = |ζ|² - 1`, the
//! effective Hamiltonian `h(x) = i a'(x)/a(x)`, the late-time power-law
//! exponent, the dominant oscillation frequency of `f`, and the check that
//! `dζ/dx` vanishes at most at isolated points.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{DecayError, Result};
use crate::spectral::{amplitude_closed_form, dzeta_dx_closed_form, zeta_closed_form, BreitWignerParams};
use crate::ComplexValue;

/// Residual RMS (in `ln P`) above which a tail fit is not considered a power law.
pub const POWER_LAW_RESIDUAL_LIMIT: f64 = 0.05;

/// Minimum number of points a tail-fit window must contain.
pub const MIN_FIT_POINTS: usize = 20;

/// Longest run of consecutive near-zero `|dζ/dx|` samples still counted as isolated.
pub const MAX_ISOLATED_RUN: usize = 2;

/// Width (in lifetimes) of the windows that must each show a non-vanishing `dζ/dx`.
pub const ZERO_CHECK_WINDOW: f64 = 0.5;

/// Floor, relative to the largest sample, below which `|dζ/dx|` counts as zero.
pub const ZERO_CHECK_RELATIVE_FLOOR: f64 = 1e-12;

/// Smallest number of samples accepted by [`dominant_oscillation_frequency`].
pub const MIN_SPECTRUM_POINTS: usize = 256;

/// Samples per expected oscillation period required by [`dominant_oscillation_frequency`].
pub const MIN_POINTS_PER_CYCLE: f64 = 8.0;

/// Ratio to the previous window maximum still accepted as "nondecreasing".
pub const ENVELOPE_TOLERANCE: f64 = 0.9;

/// Floor on `|a|` below which `h(x)` is not evaluated.
pub const AMPLITUDE_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    Linear,
    Logarithmic,
}

/// Strictly increasing, finite, non-negative times `x = t/τ₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    points: Vec<f64>,
    spacing: Spacing,
}

impl TimeGrid {
    /// `count` evenly spaced points from `x_min` to `x_max` inclusive.
    /// A single point grid holds just `x_min`.
    pub fn linear(x_min: f64, x_max: f64, count: usize) -> Result<Self> {
        Self::check_range(x_min, x_max, count)?;
        let points = if count == 1 {
            vec![x_min]
        } else {
            let step = (x_max - x_min) / (count - 1) as f64;
            (0..count)
                .map(|i| if i + 1 == count { x_max } else { x_min + i as f64 * step })
                .collect()
        };
        Self::from_points(points, Spacing::Linear)
    }

    /// `count` log-spaced points from `x_min > 0` to `x_max` inclusive.
    pub fn logarithmic(x_min: f64, x_max: f64, count: usize) -> Result<Self> {
        Self::check_range(x_min, x_max, count)?;
        if x_min <= 0.0 {
            return Err(DecayError::InvalidGrid(format!(
                "logarithmic grid needs x_min > 0, got {x_min}"
            )));
        }
        let points = if count == 1 {
            vec![x_min]
        } else {
            let (lo, hi) = (x_min.ln(), x_max.ln());
            let step = (hi - lo) / (count - 1) as f64;
            (0..count)
                .map(|i| match i {
                    0 => x_min,
                    i if i + 1 == count => x_max,
                    i => (lo + i as f64 * step).exp(),
                })
                .collect()
        };
        Self::from_points(points, Spacing::Logarithmic)
    }

    pub fn from_points(points: Vec<f64>, spacing: Spacing) -> Result<Self> {
        if points.is_empty() {
            return Err(DecayError::InvalidGrid("grid is empty".into()));
        }
        if let Some(bad) = points.iter().find(|x| !x.is_finite() || **x < 0.0) {
            return Err(DecayError::InvalidGrid(format!(
                "grid points must be finite and non-negative, found {bad}"
            )));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(DecayError::InvalidGrid("grid must be strictly increasing".into()));
        }
        Ok(Self { points, spacing })
    }

    fn check_range(x_min: f64, x_max: f64, count: usize) -> Result<()> {
        if count == 0 {
            return Err(DecayError::InvalidGrid("grid is empty".into()));
        }
        if !(x_min.is_finite() && x_max.is_finite()) {
            return Err(DecayError::InvalidGrid("grid bounds must be finite".into()));
        }
        if count > 1 && x_max <= x_min {
            return Err(DecayError::InvalidGrid(format!(
                "x_max ({x_max}) must exceed x_min ({x_min})"
            )));
        }
        Ok(())
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// One time point of a decay curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayRecord {
    pub x: f64,
    pub amplitude: ComplexValue,
    pub probability: f64,
    pub canonical_amplitude: ComplexValue,
    pub canonical_probability: f64,
    pub zeta: ComplexValue,
    /// `f = |ζ|² - 1`; `+∞` once `|ζ|²` overflows.
    pub deviation: f64,
    /// Certified error of `a`; `None` for closed-form values.
    pub amplitude_error: Option<f64>,
    pub probability_error: Option<f64>,
    pub converged: bool,
}

impl DecayRecord {
    /// Builds a record from `a(x)`, deriving `ζ = a · e^{i p x}` in polar form
    /// so that an underflowed `a_c` does not matter.
    pub fn new(x: f64, amplitude: ComplexValue, canonical: ComplexValue, pole: ComplexValue) -> Self {
        let modulus = amplitude.norm();
        let zeta = if modulus == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            let log_modulus = modulus.ln() - pole.im * x;
            let z = Complex64::from_polar(log_modulus.exp(), amplitude.arg() + pole.re * x);
            if z.re.is_finite() && z.im.is_finite() {
                z
            } else {
                OUT_OF_RANGE
            }
        };
        Self::from_parts(x, amplitude, canonical, zeta)
    }

    fn from_parts(x: f64, amplitude: ComplexValue, canonical: ComplexValue, zeta: ComplexValue) -> Self {
        Self {
            x,
            amplitude,
            probability: amplitude.norm_sqr(),
            canonical_amplitude: canonical,
            canonical_probability: canonical.norm_sqr(),
            zeta,
            deviation: if zeta.re.is_nan() { f64::INFINITY } else { zeta.norm_sqr() - 1.0 },
            amplitude_error: None,
            probability_error: None,
            converged: true,
        }
    }
}

/// Value stored for `ζ` once `|ζ|` exceeds the `f64` range; `f` is then `+∞`.
pub const OUT_OF_RANGE: ComplexValue = Complex64::new(f64::NAN, f64::NAN);

/// A sampled decay law with its canonical comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayCurve {
    spacing: Spacing,
    records: Vec<DecayRecord>,
}

impl DecayCurve {
    pub fn from_records(spacing: Spacing, records: Vec<DecayRecord>) -> Self {
        Self { spacing, records }
    }

    /// Curve of the Breit–Wigner state from the closed form; `ζ` comes from
    /// its own closed form, not from the ratio `a/a_c`.
    pub fn closed_form(grid: &TimeGrid, params: &BreitWignerParams) -> Result<Self> {
        let records: Result<Vec<DecayRecord>> = grid
            .points()
            .par_iter()
            .map(|&x| {
                let amplitude = amplitude_closed_form(x, params)?;
                let zeta = match zeta_closed_form(x, params) {
                    Ok(z) => z,
                    Err(DecayError::RangeExceeded(_)) => OUT_OF_RANGE,
                    Err(e) => return Err(e),
                };
                let canonical = canonical_amplitude(x, params.s_r());
                Ok(DecayRecord::from_parts(x, amplitude, canonical, zeta))
            })
            .collect();
        Ok(Self::from_records(grid.spacing(), records?))
    }

    pub fn records(&self) -> &[DecayRecord] {
        &self.records
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.x).collect()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.probability).collect()
    }

    pub fn deviations(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.deviation).collect()
    }

    pub fn all_converged(&self) -> bool {
        self.records.iter().all(|r| r.converged)
    }
}

/// `a_c(x) = e^{-i s_R x - x/2}`.
pub fn canonical_amplitude(x: f64, s_r: f64) -> ComplexValue {
    canonical_amplitude_for_pole(x, Complex64::new(s_r, -0.5))
}

/// `e^{-i p x}` for a complex energy `p = E₀ - iΓ/2`.
pub fn canonical_amplitude_for_pole(x: f64, pole: ComplexValue) -> ComplexValue {
    Complex64::from_polar((pole.im * x).exp(), -pole.re * x)
}

/// `ζ = a / a_c`.
///
/// Fails with [`DecayError::Domain`] once `a_c` has underflowed; use
/// [`zeta_closed_form`] for large times.
pub fn zeta(a: ComplexValue, a_c: ComplexValue) -> Result<ComplexValue> {
    let scale = a_c.norm();
    if !(scale >= f64::MIN_POSITIVE) {
        return Err(DecayError::Domain(format!(
            "canonical amplitude {a_c} has underflowed"
        )));
    }
    let value = (a / scale) * (a_c / scale).conj();
    if value.re.is_finite() && value.im.is_finite() {
        Ok(value)
    } else {
        Err(DecayError::RangeExceeded(format!("ζ = {a} / {a_c} overflows")))
    }
}

/// `h(x) = i a'(x)/a(x)` at one time point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveHamiltonianPoint {
    pub x: f64,
    pub h: ComplexValue,
    /// `Re h`.
    pub instantaneous_energy: f64,
    /// `-2 Im h`.
    pub instantaneous_rate: f64,
    /// Estimated absolute error of `h`; zero for analytic sources.
    pub error_estimate: f64,
}

impl EffectiveHamiltonianPoint {
    fn new(x: f64, h: ComplexValue, error_estimate: f64) -> Self {
        Self {
            x,
            h,
            instantaneous_energy: h.re,
            instantaneous_rate: -2.0 * h.im,
            error_estimate,
        }
    }
}

/// Where the amplitude and its derivative come from.
#[derive(Debug, Clone, PartialEq)]
pub enum AmplitudeSource {
    /// Pure exponential `a_c(x)` for the given `s_R`.
    Canonical { s_r: f64 },
    /// Breit–Wigner closed form; `a'` from `ζ'` analytically.
    ClosedForm(BreitWignerParams),
    /// Amplitude sampled on a uniform grid `start + i·step`.
    Sampled {
        start: f64,
        step: f64,
        values: Vec<ComplexValue>,
    },
}

impl AmplitudeSource {
    /// Sampled source from a linearly spaced curve.
    pub fn from_curve(curve: &DecayCurve) -> Result<Self> {
        if curve.spacing() != Spacing::Linear || curve.len() < 5 {
            return Err(DecayError::InvalidGrid(
                "a sampled amplitude needs at least 5 points on a linear grid".into(),
            ));
        }
        let records = curve.records();
        Ok(Self::Sampled {
            start: records[0].x,
            step: records[1].x - records[0].x,
            values: records.iter().map(|r| r.amplitude).collect(),
        })
    }
}

/// Effective Hamiltonian `h(x) = i a'(x)/a(x)` (energies in units of `Γ₀`).
///
/// For a sampled source `x` must be a grid point with two neighbours on each
/// side; the derivative is a centred difference with one Richardson level and
/// the difference between levels as error estimate.
pub fn effective_hamiltonian(source: &AmplitudeSource, x: f64) -> Result<EffectiveHamiltonianPoint> {
    if !(x.is_finite() && x > 0.0) {
        return Err(DecayError::InvalidParameter(format!("h(x) needs x > 0, got {x}")));
    }
    let i = Complex64::new(0.0, 1.0);
    match source {
        AmplitudeSource::Canonical { s_r } => {
            let pole = Complex64::new(*s_r, -0.5);
            let a = canonical_amplitude_for_pole(x, pole);
            check_amplitude(a, x)?;
            let derivative = -i * pole * a;
            Ok(EffectiveHamiltonianPoint::new(x, i * derivative / a, 0.0))
        }
        AmplitudeSource::ClosedForm(params) => {
            let a = amplitude_closed_form(x, params)?;
            check_amplitude(a, x)?;
            // a = ζ a_c  ⇒  h = s_R - i/2 + i ζ'/ζ
            let z = zeta_closed_form(x, params)?;
            let dz = dzeta_dx_closed_form(x, params)?;
            let h = Complex64::new(params.s_r(), -0.5) + i * dz / z;
            Ok(EffectiveHamiltonianPoint::new(x, h, 0.0))
        }
        AmplitudeSource::Sampled { start, step, values } => {
            let position = (x - start) / step;
            let index = position.round();
            if (position - index).abs() > 1e-6 || index < 2.0 || index + 2.0 > (values.len() - 1) as f64 {
                return Err(DecayError::InvalidParameter(format!(
                    "x = {x} is not an interior grid point of the sampled amplitude"
                )));
            }
            let k = index as usize;
            let a = values[k];
            check_amplitude(a, x)?;
            let d1 = (values[k + 1] - values[k - 1]) / (2.0 * step);
            let d2 = (values[k + 2] - values[k - 2]) / (4.0 * step);
            let derivative = (d1 * 4.0 - d2) / 3.0;
            let h = i * derivative / a;
            let error = ((derivative - d1) / a).norm();
            let relative = error / h.norm();
            if relative > 0.01 {
                return Err(DecayError::StepTooCoarse { relative_error: relative });
            }
            Ok(EffectiveHamiltonianPoint::new(x, h, error))
        }
    }
}

fn check_amplitude(a: ComplexValue, x: f64) -> Result<()> {
    if a.norm() > AMPLITUDE_FLOOR {
        Ok(())
    } else {
        Err(DecayError::Domain(format!("amplitude has underflowed at x = {x}")))
    }
}

/// Least-squares power law `P ≈ C x^k` fitted on `ln P` against `ln x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailFit {
    pub exponent: f64,
    /// `ln C`.
    pub intercept: f64,
    pub fit_window: (f64, f64),
    /// RMS residual in `ln P`.
    pub residual_rms: f64,
    pub points: usize,
}

impl TailFit {
    pub fn is_power_law(&self) -> bool {
        self.residual_rms <= POWER_LAW_RESIDUAL_LIMIT
    }
}

/// Fits the late-time exponent of `P(x)` over the points with `x` in `window`.
pub fn fit_tail_exponent(curve: &DecayCurve, window: (f64, f64)) -> Result<TailFit> {
    let samples: Vec<(f64, f64)> = curve
        .records()
        .iter()
        .filter(|r| r.x >= window.0 && r.x <= window.1)
        .map(|r| (r.x, r.probability))
        .collect();
    fit_power_law(&samples, window)
}

/// Same fit on raw `(x, P)` samples already restricted to the window.
pub fn fit_power_law(samples: &[(f64, f64)], window: (f64, f64)) -> Result<TailFit> {
    if let Some(&(x, value)) = samples.iter().find(|(x, p)| *p <= 0.0 || *x <= 0.0) {
        return Err(DecayError::NonPositiveProbability { x, value });
    }
    if samples.len() < MIN_FIT_POINTS {
        return Err(DecayError::InsufficientPoints {
            needed: MIN_FIT_POINTS,
            found: samples.len(),
        });
    }
    let n = samples.len() as f64;
    let logs: Vec<(f64, f64)> = samples.iter().map(|(x, p)| (x.ln(), p.ln())).collect();
    let mean_x = logs.iter().map(|l| l.0).sum::<f64>() / n;
    let mean_y = logs.iter().map(|l| l.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|l| (l.0 - mean_x).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|l| (l.0 - mean_x) * (l.1 - mean_y)).sum();
    if sxx == 0.0 {
        return Err(DecayError::InsufficientPoints {
            needed: 2,
            found: 1,
        });
    }
    let exponent = sxy / sxx;
    let intercept = mean_y - exponent * mean_x;
    let residual_rms = (logs
        .iter()
        .map(|l| (l.1 - intercept - exponent * l.0).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(TailFit {
        exponent,
        intercept,
        fit_window: window,
        residual_rms,
        points: samples.len(),
    })
}

/// Frequency (cycles per lifetime) of the strongest oscillation in `values`.
///
/// `times` must be uniformly spaced. The mean is removed and the peak is the
/// largest local maximum of the DFT magnitude above the first bin, refined by
/// parabolic interpolation. When `expected` is given, the grid must sample it
/// with at least [`MIN_POINTS_PER_CYCLE`] points per cycle.
pub fn dominant_oscillation_frequency(times: &[f64], values: &[f64], expected: Option<f64>) -> Result<f64> {
    if times.len() != values.len() {
        return Err(DecayError::InvalidParameter(format!(
            "{} times but {} values",
            times.len(),
            values.len()
        )));
    }
    let n = times.len();
    if n < MIN_SPECTRUM_POINTS {
        return Err(DecayError::InsufficientPoints {
            needed: MIN_SPECTRUM_POINTS,
            found: n,
        });
    }
    let step = (times[n - 1] - times[0]) / (n - 1) as f64;
    if !(step > 0.0) || times.windows(2).any(|w| ((w[1] - w[0]) - step).abs() > 1e-6 * step) {
        return Err(DecayError::InvalidGrid("spectrum needs a uniform grid".into()));
    }
    let nyquist = 0.5 / step;
    if let Some(freq) = expected {
        if 1.0 / (step * freq) < MIN_POINTS_PER_CYCLE {
            return Err(DecayError::GridTooCoarse {
                nyquist,
                required: 0.5 * MIN_POINTS_PER_CYCLE * freq,
            });
        }
    }

    let mean = values.iter().sum::<f64>() / n as f64;
    let mut buffer: Vec<Complex64> = values.iter().map(|v| Complex64::new(v - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buffer);
    let magnitude: Vec<f64> = buffer[..n / 2 + 1].iter().map(|c| c.norm()).collect();

    let last = magnitude.len() - 1;
    let peak = (2..last)
        .filter(|&k| magnitude[k] > magnitude[k - 1] && magnitude[k] >= magnitude[k + 1])
        .max_by(|&a, &b| magnitude[a].total_cmp(&magnitude[b]))
        .or_else(|| (1..=last).max_by(|&a, &b| magnitude[a].total_cmp(&magnitude[b])))
        .ok_or_else(|| DecayError::InvalidParameter("spectrum has no non-zero bins".into()))?;

    let offset = if peak >= 1 && peak < last {
        let (l, c, r) = (magnitude[peak - 1], magnitude[peak], magnitude[peak + 1]);
        let denominator = l - 2.0 * c + r;
        if denominator != 0.0 {
            0.5 * (l - r) / denominator
        } else {
            0.0
        }
    } else {
        0.0
    };
    Ok((peak as f64 + offset) / (n as f64 * step))
}

/// Outcome of [`isolated_zero_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsolatedZeroReport {
    /// Longest run of consecutive samples with `|dζ/dx| < epsilon`.
    pub max_run_length: usize,
    /// `1e-12 · max |dζ/dx|`.
    pub floor: f64,
    pub windows: usize,
    /// Windows of width 0.5 lifetimes with no sample above `floor`.
    pub silent_windows: usize,
    pub passed: bool,
}

/// Checks that `|dζ/dx|` vanishes at most at isolated grid points, i.e. that
/// no interval of purely exponential decay shows up on the grid.
pub fn isolated_zero_check(times: &[f64], dzeta_abs: &[f64], epsilon: f64) -> IsolatedZeroReport {
    let mut max_run = 0;
    let mut run = 0;
    for &v in dzeta_abs {
        if v < epsilon {
            run += 1;
            max_run = max_run.max(run);
        } else {
            run = 0;
        }
    }

    let peak = dzeta_abs.iter().cloned().fold(0.0, f64::max);
    let floor = ZERO_CHECK_RELATIVE_FLOOR * peak;
    let (windows, silent) = match (times.first(), times.last()) {
        (Some(&first), Some(&last)) if times.len() == dzeta_abs.len() => {
            let count = (((last - first) / ZERO_CHECK_WINDOW).ceil() as usize).max(1);
            let mut heard = vec![false; count];
            for (&x, &v) in times.iter().zip(dzeta_abs) {
                let w = (((x - first) / ZERO_CHECK_WINDOW) as usize).min(count - 1);
                if v > floor {
                    heard[w] = true;
                }
            }
            (count, heard.iter().filter(|h| !**h).count())
        }
        _ => (0, 1),
    };

    IsolatedZeroReport {
        max_run_length: max_run,
        floor,
        windows,
        silent_windows: silent,
        passed: max_run <= MAX_ISOLATED_RUN && silent == 0,
    }
}

/// `|dζ/dx|` of the Breit–Wigner state on the given times (all `> 0`).
pub fn dzeta_magnitudes(times: &[f64], params: &BreitWignerParams) -> Result<Vec<f64>> {
    times
        .par_iter()
        .map(|&x| dzeta_dx_closed_form(x, params).map(|d| d.norm()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvelopeTrend {
    Nondecreasing,
    Mixed,
}

impl EnvelopeTrend {
    pub fn as_str(&self) -> &'static str {
        match self {
            EnvelopeTrend::Nondecreasing => "nondecreasing",
            EnvelopeTrend::Mixed => "mixed",
        }
    }
}

/// Maximum of `|f|` over consecutive windows `[x_lo + k w, x_lo + (k+1) w)`
/// covering `[x_lo, x_hi]`. Windows without samples are skipped.
pub fn envelope_maxima(times: &[f64], values: &[f64], range: (f64, f64), width: f64) -> Vec<f64> {
    let count = (((range.1 - range.0) / width).round() as usize).max(1);
    let mut maxima = vec![f64::NAN; count];
    for (&x, &v) in times.iter().zip(values) {
        if x < range.0 || x > range.1 {
            continue;
        }
        let w = (((x - range.0) / width) as usize).min(count - 1);
        let m = &mut maxima[w];
        if m.is_nan() || v.abs() > *m {
            *m = v.abs();
        }
    }
    maxima.into_iter().filter(|m| !m.is_nan()).collect()
}

/// Whether each window maximum is at least [`ENVELOPE_TOLERANCE`] × the previous one.
pub fn envelope_trend(maxima: &[f64]) -> EnvelopeTrend {
    if maxima.windows(2).all(|w| w[1] >= ENVELOPE_TOLERANCE * w[0]) {
        EnvelopeTrend::Nondecreasing
    } else {
        EnvelopeTrend::Mixed
    }
}

/// Period `2π/s_R` of the pole–cut interference, in lifetimes.
pub fn interference_period(s_r: f64) -> f64 {
    2.0 * PI / s_r
}
