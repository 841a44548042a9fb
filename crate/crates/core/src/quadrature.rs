//! Direct evaluation of the Fourier integral `a(x) = ∫ ω(E) e^{-iEx} dE`.
//!
//! The spectrum is split at the pole region (`E₀ ± 50` half-widths) and at the
//! tail cutoff `Λ`. Everything below `Λ` is cut into panels no longer than
//! half an oscillation period `π/x` and refined by globally adaptive 21-point
//! Gauss–Kronrod bisection. Above `Λ` the integral is summed half-period by
//! half-period; those contributions alternate in sign and their partial sums
//! are accelerated with Wynn's epsilon algorithm. At `x = 0` the tail is
//! mapped onto `[0, 1)` instead.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::analysis::{canonical_amplitude_for_pole, DecayCurve, DecayRecord, TimeGrid};
use crate::error::{DecayError, Result};
use crate::spectral::{SpectralDensity, POLE_REGION_HALF_WIDTHS};
use crate::ComplexValue;

/// Gauss–Kronrod 21-point abscissae (Kronrod nodes, descending; the last is the centre).
const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077208034891880,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];

/// 10-point Gauss weights, paired with the odd-indexed entries of `XGK`.
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

const MAX_TAIL_CYCLES: usize = 400;
const MIN_TAIL_CYCLES: usize = 8;

/// Tolerances and budgets for [`amplitude_by_quadrature`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
    /// Energy `Λ` (in units of `Γ₀`, absolute) above which the integrand is
    /// handled by the extrapolated half-period summation.
    pub tail_cutoff_energy: f64,
}

impl QuadratureConfig {
    pub const DEFAULT_ABS_TOL: f64 = 1e-10;
    pub const DEFAULT_REL_TOL: f64 = 1e-9;
    pub const DEFAULT_MAX_PANELS: usize = 200_000;
    /// Default distance of `Λ` above the resonance centre.
    pub const DEFAULT_TAIL_OFFSET: f64 = 100.0;

    pub fn new(abs_tol: f64, rel_tol: f64, max_panels: usize, tail_cutoff_energy: f64) -> Result<Self> {
        let cfg = Self {
            abs_tol,
            rel_tol,
            max_panels,
            tail_cutoff_energy,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Default tolerances with `Λ` placed [`DEFAULT_TAIL_OFFSET`](Self::DEFAULT_TAIL_OFFSET)
    /// above the density's resonance (or threshold).
    pub fn default_for(density: &dyn SpectralDensity) -> Self {
        let anchor = density
            .resonance()
            .map(|r| r.center)
            .unwrap_or_else(|| density.threshold())
            .max(density.threshold());
        Self {
            abs_tol: Self::DEFAULT_ABS_TOL,
            rel_tol: Self::DEFAULT_REL_TOL,
            max_panels: Self::DEFAULT_MAX_PANELS,
            tail_cutoff_energy: (anchor + Self::DEFAULT_TAIL_OFFSET).max(Self::DEFAULT_TAIL_OFFSET),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol >= 1e-14) {
            return Err(DecayError::InvalidParameter(format!(
                "abs_tol must be at least 1e-14, got {}",
                self.abs_tol
            )));
        }
        if !(self.rel_tol >= 1e-13) {
            return Err(DecayError::InvalidParameter(format!(
                "rel_tol must be at least 1e-13, got {}",
                self.rel_tol
            )));
        }
        if self.max_panels == 0 {
            return Err(DecayError::InvalidParameter("max_panels must be positive".into()));
        }
        if !(self.tail_cutoff_energy.is_finite() && self.tail_cutoff_energy > 0.0) {
            return Err(DecayError::InvalidParameter(format!(
                "tail_cutoff_energy must be positive and finite, got {}",
                self.tail_cutoff_energy
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    pub value: ComplexValue,
    pub error_estimate: f64,
    pub panels_used: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Mapping {
    Identity,
    /// `E = origin + u²`, flattens algebraic threshold behaviour.
    Square { origin: f64 },
    /// `E = origin + t/(1 - t)` for `t ∈ [0, 1)`.
    SemiInfinite { origin: f64 },
}

impl Mapping {
    #[inline]
    fn eval<F: Fn(f64) -> ComplexValue + ?Sized>(&self, f: &F, t: f64) -> ComplexValue {
        match *self {
            Mapping::Identity => f(t),
            Mapping::Square { origin } => f(origin + t * t) * (2.0 * t),
            Mapping::SemiInfinite { origin } => {
                let s = 1.0 - t;
                if s <= 0.0 {
                    return Complex64::new(0.0, 0.0);
                }
                f(origin + t / s) / (s * s)
            }
        }
    }
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut scaled = err;
    if res_asc != 0.0 && scaled != 0.0 {
        scaled = res_asc * (200.0 * scaled / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        scaled = scaled.max(50.0 * f64::EPSILON * res_abs);
    }
    scaled
}

/// 21-point Gauss–Kronrod estimate and error of `∫_a^b f` under `map`.
fn gauss_kronrod<F: Fn(f64) -> ComplexValue + ?Sized>(
    f: &F,
    map: Mapping,
    a: f64,
    b: f64,
) -> (ComplexValue, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut values = [Complex64::new(0.0, 0.0); 21];
    values[10] = map.eval(f, center);
    for j in 0..10 {
        let offset = half * XGK[j];
        values[j] = map.eval(f, center - offset);
        values[20 - j] = map.eval(f, center + offset);
    }

    let mut kronrod = values[10] * WGK[10];
    let mut gauss = Complex64::new(0.0, 0.0);
    let mut res_abs = values[10].norm() * WGK[10];
    for j in 0..10 {
        let pair = values[j] + values[20 - j];
        kronrod += pair * WGK[j];
        res_abs += WGK[j] * (values[j].norm() + values[20 - j].norm());
        if j % 2 == 1 {
            gauss += pair * WG[j / 2];
        }
    }
    let mean = kronrod * 0.5;
    let mut res_asc = WGK[10] * (values[10] - mean).norm();
    for j in 0..10 {
        res_asc += WGK[j] * ((values[j] - mean).norm() + (values[20 - j] - mean).norm());
    }

    let scale = half.abs();
    let err = ((kronrod - gauss) * half).norm();
    (kronrod * half, rescale_error(err, res_abs * scale, res_asc * scale))
}

struct Segment {
    a: f64,
    b: f64,
    map: Mapping,
    value: ComplexValue,
    error: f64,
}

struct Worst {
    error: f64,
    index: usize,
}

impl PartialEq for Worst {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Worst {}
impl PartialOrd for Worst {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Worst {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.index.cmp(&self.index))
    }
}

fn sum_segments(segments: &[Segment]) -> (ComplexValue, f64) {
    segments
        .iter()
        .fold((Complex64::new(0.0, 0.0), 0.0), |(v, e), s| (v + s.value, e + s.error))
}

/// Globally adaptive bisection starting from `initial` panels.
///
/// `target` maps the current total to the error it must reach. On failure the
/// best available total is returned inside `ConvergenceFailure`.
fn adaptive<F, T>(f: &F, initial: &[(f64, f64, Mapping)], target: T, max_panels: usize) -> Result<QuadratureResult>
where
    F: Fn(f64) -> ComplexValue + ?Sized,
    T: Fn(ComplexValue) -> f64,
{
    let mut segments: Vec<Segment> = initial
        .iter()
        .map(|&(a, b, map)| {
            let (value, error) = gauss_kronrod(f, map, a, b);
            Segment { a, b, map, value, error }
        })
        .collect();
    let mut heap: BinaryHeap<Worst> = segments
        .iter()
        .enumerate()
        .map(|(index, s)| Worst { error: s.error, index })
        .collect();
    let (mut total, mut total_error) = sum_segments(&segments);

    loop {
        if total_error <= target(total) {
            // re-sum to shed the drift of the running totals
            let (value, error) = sum_segments(&segments);
            if error <= target(value) {
                return Ok(QuadratureResult {
                    value,
                    error_estimate: error,
                    panels_used: segments.len(),
                });
            }
            total = value;
            total_error = error;
        }
        if segments.len() >= max_panels {
            break;
        }
        let Some(worst) = heap.pop() else { break };
        let (a, b, map) = {
            let s = &segments[worst.index];
            (s.a, s.b, s.map)
        };
        let mid = 0.5 * (a + b);
        if !(mid > a && mid < b) {
            // cannot be refined further at this precision; leave it in the sum
            continue;
        }
        let (left, left_err) = gauss_kronrod(f, map, a, mid);
        let (right, right_err) = gauss_kronrod(f, map, mid, b);
        let old = &segments[worst.index];
        total += left + right - old.value;
        total_error += left_err + right_err - old.error;

        segments[worst.index] = Segment {
            a,
            b: mid,
            map,
            value: left,
            error: left_err,
        };
        heap.push(Worst {
            error: left_err,
            index: worst.index,
        });
        segments.push(Segment {
            a: mid,
            b,
            map,
            value: right,
            error: right_err,
        });
        heap.push(Worst {
            error: right_err,
            index: segments.len() - 1,
        });
    }

    let (best, error_estimate) = sum_segments(&segments);
    Err(DecayError::ConvergenceFailure {
        best,
        error_estimate,
        panels_used: segments.len(),
    })
}

/// Wynn's epsilon algorithm: best even-column estimate of the limit of `sums`.
fn wynn_epsilon(sums: &[ComplexValue]) -> ComplexValue {
    let n = sums.len();
    if n < 3 {
        return sums[n - 1];
    }
    // previous and current columns; column k has n - k entries
    let mut previous = vec![Complex64::new(0.0, 0.0); n + 1];
    let mut current: Vec<ComplexValue> = sums.to_vec();
    let mut best = sums[n - 1];
    for k in 1..n {
        let mut next = Vec::with_capacity(n - k);
        for i in 0..(n - k) {
            let diff = current[i + 1] - current[i];
            if diff.norm() == 0.0 {
                // converged exactly along this diagonal
                return if k % 2 == 1 { current[i + 1] } else { best };
            }
            next.push(previous[i + 1] + diff.inv());
        }
        if k % 2 == 0 {
            best = next[next.len() - 1];
        }
        previous = current;
        current = next;
    }
    best
}

/// `∫_Λ^∞ f` for an integrand oscillating as `e^{-iEx}`, by half-period
/// summation with epsilon extrapolation.
fn fourier_tail<F: Fn(f64) -> ComplexValue + ?Sized>(
    f: &F,
    start: f64,
    x: f64,
    tol: f64,
    max_panels: usize,
) -> Result<QuadratureResult> {
    let step = PI / x;
    let mut sums: Vec<ComplexValue> = Vec::new();
    let mut estimates: Vec<ComplexValue> = Vec::new();
    let mut partial = Complex64::new(0.0, 0.0);
    let mut quad_error = 0.0;
    let mut panels = 0;
    let per_cycle_tol = 0.01 * tol;

    for k in 0..MAX_TAIL_CYCLES {
        let a = start + k as f64 * step;
        let b = a + step;
        let cycle = adaptive(f, &[(a, b, Mapping::Identity)], |_| per_cycle_tol, max_panels.saturating_sub(panels).max(1));
        let cycle = match cycle {
            Ok(r) => r,
            Err(DecayError::ConvergenceFailure {
                best,
                error_estimate,
                panels_used,
            }) => {
                return Err(DecayError::ConvergenceFailure {
                    best: partial + best,
                    error_estimate: quad_error + error_estimate,
                    panels_used: panels + panels_used,
                })
            }
            Err(e) => return Err(e),
        };
        panels += cycle.panels_used;
        quad_error += cycle.error_estimate;
        partial += cycle.value;
        sums.push(partial);
        let estimate = wynn_epsilon(&sums);
        estimates.push(estimate);

        let m = estimates.len();
        if m >= MIN_TAIL_CYCLES {
            let extrapolation_error =
                (estimates[m - 1] - estimates[m - 2]).norm() + (estimates[m - 1] - estimates[m - 3]).norm();
            let error = extrapolation_error + quad_error;
            if error <= tol {
                return Ok(QuadratureResult {
                    value: estimate,
                    error_estimate: error,
                    panels_used: panels,
                });
            }
        }
        if panels >= max_panels {
            break;
        }
    }
    let m = estimates.len();
    let error_estimate = if m >= 3 {
        (estimates[m - 1] - estimates[m - 2]).norm() + (estimates[m - 1] - estimates[m - 3]).norm() + quad_error
    } else {
        quad_error
    };
    Err(DecayError::ConvergenceFailure {
        best: estimates[m - 1],
        error_estimate,
        panels_used: panels,
    })
}

/// Panel layout of `[E_min, Λ]` (plus the mapped tail when `x = 0`).
fn layout(density: &dyn SpectralDensity, cutoff: f64, x: f64) -> Vec<(f64, f64, Mapping)> {
    let threshold = density.threshold();
    let mut breaks = vec![threshold];
    if let Some(r) = density.resonance() {
        for edge in [
            r.center - POLE_REGION_HALF_WIDTHS * r.half_width,
            r.center + POLE_REGION_HALF_WIDTHS * r.half_width,
        ] {
            if edge > threshold && edge < cutoff {
                breaks.push(edge);
            }
        }
    }
    breaks.push(cutoff);

    let max_width = if x > 0.0 { PI / x } else { f64::INFINITY };
    let exponent = density.threshold_exponent();
    let flatten = exponent.fract() != 0.0;

    let mut panels = Vec::new();
    for w in breaks.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let count = ((hi - lo) / max_width).ceil().max(1.0) as usize;
        let width = (hi - lo) / count as f64;
        for i in 0..count {
            let a = lo + i as f64 * width;
            let b = if i + 1 == count { hi } else { a + width };
            panels.push((a, b, Mapping::Identity));
        }
    }
    if flatten {
        let (a, b, _) = panels[0];
        panels[0] = (0.0, (b - a).sqrt(), Mapping::Square { origin: a });
    }
    if x == 0.0 {
        panels.push((0.0, 1.0, Mapping::SemiInfinite { origin: cutoff }));
    }
    panels
}

fn panel_count_estimate(density: &dyn SpectralDensity, cutoff: f64, x: f64) -> f64 {
    if x == 0.0 {
        4.0
    } else {
        (cutoff - density.threshold()) * x / PI + 3.0
    }
}

/// `∫ ω(E) dE` over the whole spectrum, for normalizing densities.
pub(crate) fn integrate_density(f: &dyn Fn(f64) -> f64, density: &dyn SpectralDensity) -> Result<f64> {
    let cutoff = density
        .resonance()
        .map(|r| r.center + POLE_REGION_HALF_WIDTHS * r.half_width)
        .unwrap_or(density.threshold() + 1.0)
        .max(density.threshold() + 1.0);
    let panels = layout(density, cutoff, 0.0);
    let g = |e: f64| Complex64::new(f(e), 0.0);
    adaptive(&g, &panels, |v| (1e-13 * v.norm()).max(1e-300), 20_000).map(|r| r.value.re)
}

/// `a(x) = ∫ ω(E) e^{-iEx} dE` with a certified error estimate.
///
/// `density` must be normalized. Fails with [`DecayError::ConvergenceFailure`]
/// (carrying the best value and its error estimate) when `max_panels` runs out
/// before `|error| ≤ max(abs_tol, rel_tol·|a|)`.
pub fn amplitude_by_quadrature(
    x: f64,
    density: &dyn SpectralDensity,
    cfg: &QuadratureConfig,
) -> Result<QuadratureResult> {
    cfg.validate()?;
    if !(x.is_finite() && x >= 0.0) {
        return Err(DecayError::InvalidParameter(format!(
            "time must be finite and non-negative, got {x}"
        )));
    }
    let threshold = density.threshold();
    let mut cutoff = cfg.tail_cutoff_energy.max(threshold);
    if let Some(r) = density.resonance() {
        cutoff = cutoff.max(r.center + POLE_REGION_HALF_WIDTHS * r.half_width);
    }

    if panel_count_estimate(density, cutoff, x) > cfg.max_panels as f64 {
        // |a| ≤ ∫ω = 1 bounds the error of the trivial estimate
        return Err(DecayError::ConvergenceFailure {
            best: Complex64::new(0.0, 0.0),
            error_estimate: 1.0,
            panels_used: 0,
        });
    }

    let integrand = |e: f64| Complex64::from_polar(density.density(e), -e * x);

    let (tail, tail_panels) = if x > 0.0 {
        let tail_tol = 0.1 * cfg.abs_tol;
        let r = fourier_tail(&integrand, cutoff, x, tail_tol, cfg.max_panels / 2)?;
        (r, r.panels_used)
    } else {
        (
            QuadratureResult {
                value: Complex64::new(0.0, 0.0),
                error_estimate: 0.0,
                panels_used: 0,
            },
            0,
        )
    };

    let panels = layout(density, cutoff, x);
    let budget = cfg.max_panels.saturating_sub(tail_panels).max(panels.len());
    let target = |body: ComplexValue| {
        let total = (body + tail.value).norm();
        (cfg.abs_tol.max(cfg.rel_tol * total) - tail.error_estimate).max(0.0)
    };
    match adaptive(&integrand, &panels, target, budget) {
        Ok(body) => Ok(QuadratureResult {
            value: body.value + tail.value,
            error_estimate: body.error_estimate + tail.error_estimate,
            panels_used: body.panels_used + tail_panels,
        }),
        Err(DecayError::ConvergenceFailure {
            best,
            error_estimate,
            panels_used,
        }) => Err(DecayError::ConvergenceFailure {
            best: best + tail.value,
            error_estimate: error_estimate + tail.error_estimate,
            panels_used: panels_used + tail_panels,
        }),
        Err(e) => Err(e),
    }
}

/// Decay curve `P(x) = |a(x)|²` on `grid` from quadrature of the density.
///
/// Points that fail to converge keep their best estimate and are marked with
/// `converged = false`; the probability error is propagated as
/// `|ΔP| ≤ 2|a||Δa| + |Δa|²`.
pub fn decay_law_by_quadrature(
    grid: &TimeGrid,
    density: &dyn SpectralDensity,
    cfg: &QuadratureConfig,
) -> Result<DecayCurve> {
    cfg.validate()?;
    let pole = density.canonical_pole();
    let records: Vec<Result<DecayRecord>> = grid
        .points()
        .par_iter()
        .map(|&x| {
            let (amplitude, error, converged) = match amplitude_by_quadrature(x, density, cfg) {
                Ok(r) => (r.value, r.error_estimate, true),
                Err(DecayError::ConvergenceFailure {
                    best, error_estimate, ..
                }) => (best, error_estimate, false),
                Err(e) => return Err(e),
            };
            let canonical = canonical_amplitude_for_pole(x, pole);
            let mut record = DecayRecord::new(x, amplitude, canonical, pole);
            record.amplitude_error = Some(error);
            record.probability_error = Some(2.0 * amplitude.norm() * error + error * error);
            record.converged = converged;
            Ok(record)
        })
        .collect();
    let records = records.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(DecayCurve::from_records(grid.spacing(), records))
}
