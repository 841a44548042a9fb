//! Acceptance suite: one PASS/FAIL line per criterion, then a single assertion.
//!
//! Lines go straight to the stderr handle so they show up without
//! `--nocapture`.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use decaylaw::analysis::{
    dominant_oscillation_frequency, dzeta_magnitudes, effective_hamiltonian, envelope_maxima, envelope_trend,
    fit_tail_exponent, isolated_zero_check, AmplitudeSource, DecayCurve, EnvelopeTrend, TimeGrid,
};
use decaylaw::quadrature::{amplitude_by_quadrature, decay_law_by_quadrature, QuadratureConfig};
use decaylaw::special_functions::{e1, e1_scaled};
use decaylaw::spectral::{amplitude_closed_form, dzeta_dx_closed_form, zeta_closed_form, BreitWignerParams};
use decaylaw::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

fn bw(s: f64) -> BreitWignerParams {
    BreitWignerParams::new(s).unwrap()
}

fn relative(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm()
}

fn special_functions() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut worst_value, mut worst_derivative) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let modulus = 10f64.powf(rng.gen_range(-2.0..3.0));
        let angle = rng.gen_range(-(PI - 0.01)..(PI - 0.01));
        let z = Complex64::from_polar(modulus, angle);
        worst_value = worst_value.max(relative(e1_scaled(z).unwrap(), common::e1_scaled_oracle(z)));

        // E1 varies on the scale of min(|z|, 1) through e^{-z} and ln z
        let h = 1e-4 * modulus.min(1.0);
        let error = if z.re.abs() < 600.0 {
            // E1'(z) = -e^{-z}/z
            let difference = (e1(z + h).unwrap() - e1(z - h).unwrap()) / (2.0 * h);
            relative(difference, -(-z).exp() / z)
        } else {
            // same identity for g = e^z E1(z), which stays in range: g' = g - 1/z
            let difference = (e1_scaled(z + h).unwrap() - e1_scaled(z - h).unwrap()) / (2.0 * h);
            relative(difference, e1_scaled(z).unwrap() - 1.0 / z)
        };
        worst_derivative = worst_derivative.max(error);
    }
    verdict(
        worst_value < 1e-11 && worst_derivative < 1e-6,
        format!("max relative error {worst_value:.2e} vs oracle, {worst_derivative:.2e} in E1' = -e^-z/z"),
    )
}

fn normalization() -> Verdict {
    let mut worst = 0.0f64;
    for s in [10.0, 100.0, 1000.0] {
        let p = bw(s);
        let cfg = QuadratureConfig::new(1e-12, 1e-12, 200_000, s + 100.0).unwrap();
        let engine = amplitude_by_quadrature(0.0, &p, &cfg).unwrap().value;
        let oracle = common::bw_amplitude_oracle(s, 0.0);
        worst = worst.max((engine - 1.0).norm()).max((oracle - 1.0).norm());
    }
    verdict(worst < 1e-9, format!("max |∫ω - 1| = {worst:.2e} over engine and oracle"))
}

fn dual_oracle() -> Verdict {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut converged = true;
    let grid = TimeGrid::logarithmic(0.01, 30.0, 500).unwrap();
    for s in [10.0, 100.0, 1000.0] {
        let p = bw(s);
        let cfg = QuadratureConfig::new(1e-10, 1e-9, 200_000, s + 100.0).unwrap();
        let quad = decay_law_by_quadrature(&grid, &p, &cfg).unwrap();
        converged &= quad.all_converged();
        for r in quad.records() {
            let closed = amplitude_closed_form(r.x, &p).unwrap();
            worst = worst.max((closed - r.amplitude).norm());
        }
    }
    let seconds = start.elapsed().as_secs_f64();
    verdict(
        worst < 1e-6 && converged && seconds < 60.0,
        format!("max |closed - quadrature| = {worst:.2e} on 3 × 500 points in {seconds:.2} s"),
    )
}

fn derivative_consistency() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst = 0.0f64;
    for s in [10.0, 100.0] {
        let p = bw(s);
        let h = 0.02 / s;
        for _ in 0..100 {
            let x = rng.gen_range(0.1..30.0);
            let z = |k: f64| zeta_closed_form(x + k * h, &p).unwrap();
            let stencil = (z(-2.0) - z(-1.0) * 8.0 + z(1.0) * 8.0 - z(2.0)) / (12.0 * h);
            worst = worst.max(relative(stencil, dzeta_dx_closed_form(x, &p).unwrap()));
        }
    }
    verdict(worst < 1e-6, format!("max relative difference {worst:.2e} at 2 × 100 random points"))
}

fn isolated_zeros() -> Verdict {
    let grid = TimeGrid::linear(0.1, 30.0, 100_000).unwrap();
    let mut passed = true;
    let mut runs = Vec::new();
    for s in [10.0, 100.0, 1000.0] {
        let d = dzeta_magnitudes(grid.points(), &bw(s)).unwrap();
        let peak = d.iter().cloned().fold(0.0, f64::max);
        let report = isolated_zero_check(grid.points(), &d, 1e-12 * peak);
        passed &= report.passed && report.max_run_length <= 2;
        runs.push(format!("{}/{} silent", report.max_run_length, report.silent_windows));
    }
    verdict(passed, format!("longest low run / silent windows: {}", runs.join(", ")))
}

fn oscillation_frequency() -> Verdict {
    let mut passed = true;
    let mut detail = Vec::new();
    for s in [10.0, 100.0] {
        let p = bw(s);
        let expected = s / (2.0 * PI);
        let grid = TimeGrid::linear(0.0, 20.0, 8192).unwrap();
        let curve = DecayCurve::closed_form(&grid, &p).unwrap();
        let nu = dominant_oscillation_frequency(&curve.times(), &curve.deviations(), Some(expected)).unwrap();

        // the oscillating part of f is 2N Re(ζ - N), which crosses zero twice per cycle
        let (lo, hi) = (1.0, 20.0);
        let n = p.normalization();
        let mut crossings = 0;
        let mut previous: Option<f64> = None;
        for x in grid.points().iter().filter(|x| (lo..=hi).contains(*x)) {
            let v = (zeta_closed_form(*x, &p).unwrap() - n).re;
            if previous.is_some_and(|u| u * v < 0.0) {
                crossings += 1;
            }
            previous = Some(v);
        }
        let nu_crossings = crossings as f64 / (2.0 * (hi - lo));

        passed &= (nu / expected - 1.0).abs() < 0.05 && (nu_crossings / expected - 1.0).abs() < 0.05;
        detail.push(format!("s={s}: {nu:.4} (spectrum), {nu_crossings:.4} (crossings) vs {expected:.4}"));
    }
    verdict(passed, detail.join("; "))
}

fn envelope_growth() -> Verdict {
    let grid = TimeGrid::linear(5.0, 25.0, 100_001).unwrap();
    let curve = DecayCurve::closed_form(&grid, &bw(1000.0)).unwrap();
    let maxima = envelope_maxima(&curve.times(), &curve.deviations(), (5.0, 25.0), 1.0);
    let worst_ratio = maxima.windows(2).map(|w| w[1] / w[0]).fold(f64::INFINITY, f64::min);
    verdict(
        maxima.len() == 20 && envelope_trend(&maxima) == EnvelopeTrend::Nondecreasing,
        format!("{} windows, smallest ratio to the previous window {worst_ratio:.3}", maxima.len()),
    )
}

fn late_time_tail() -> Verdict {
    let mut passed = true;
    let mut detail = Vec::new();
    for s in [10.0, 100.0] {
        let grid = TimeGrid::logarithmic(100.0, 1000.0, 200).unwrap();
        let curve = DecayCurve::closed_form(&grid, &bw(s)).unwrap();
        let fit = fit_tail_exponent(&curve, (100.0, 1000.0)).unwrap();
        passed &= (fit.exponent + 2.0).abs() < 0.05;
        detail.push(format!("s={s}: {:.6}", fit.exponent));
    }
    verdict(passed, format!("exponents {}", detail.join(", ")))
}

fn exponential_regime() -> Verdict {
    let grid = TimeGrid::linear(0.5, 10.0, 2000).unwrap();
    let curve = DecayCurve::closed_form(&grid, &bw(1000.0)).unwrap();
    let worst = curve
        .records()
        .iter()
        .map(|r| (r.probability / r.canonical_probability - 1.0).abs())
        .fold(0.0, f64::max);
    verdict(worst < 0.05, format!("max |P/P_c - 1| = {worst:.2e}"))
}

fn effective_hamiltonians() -> Verdict {
    let canonical = AmplitudeSource::Canonical { s_r: 100.0 };
    let canonical_worst = (1..=300)
        .map(|i| {
            let h = effective_hamiltonian(&canonical, 0.1 * i as f64).unwrap();
            (h.h - Complex64::new(100.0, -0.5)).norm()
        })
        .fold(0.0, f64::max);

    let h = effective_hamiltonian(&AmplitudeSource::ClosedForm(bw(1000.0)), 1.0).unwrap();
    let pole = Complex64::new(1000.0, -0.5);
    let deep = relative(h.h, pole);

    let mut paths = 0.0f64;
    for (s, x) in [(10.0, 1.0), (10.0, 5.0), (100.0, 2.0), (100.0, 10.0)] {
        let p = bw(s);
        let step = 0.02 / s;
        let grid = TimeGrid::linear(x - 10.0 * step, x + 10.0 * step, 21).unwrap();
        let curve = DecayCurve::closed_form(&grid, &p).unwrap();
        let sampled = effective_hamiltonian(&AmplitudeSource::from_curve(&curve).unwrap(), x).unwrap();
        let analytic = effective_hamiltonian(&AmplitudeSource::ClosedForm(p), x).unwrap();
        paths = paths.max(relative(sampled.h, analytic.h));
    }
    verdict(
        canonical_worst < 1e-12 && deep < 0.01 && paths < 1e-6,
        format!(
            "canonical deviation {canonical_worst:.1e}, closed form at x=1 off by {deep:.2e}, \
             analytic vs finite difference {paths:.2e}"
        ),
    )
}

fn cli_contract() -> Verdict {
    let script = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/cli_contract.sh");
    let out = Command::new("bash")
        .arg(script)
        .arg(env!("CARGO_BIN_EXE_decaylaw"))
        .output()
        .unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    let checks = text.lines().filter(|l| l.starts_with("ok ")).count();
    let failures: Vec<&str> = text.lines().filter(|l| l.starts_with("FAIL")).collect();
    let detail = if failures.is_empty() {
        format!("{checks} shell-level checks passed")
    } else {
        failures.join("; ")
    };
    verdict(out.status.success(), detail)
}

#[test]
fn acceptance_criteria() {
    let criteria: [(&str, fn() -> Verdict); 11] = [
        ("E1 against the quadrature oracle", special_functions),
        ("normalization of the density", normalization),
        ("closed form against quadrature", dual_oracle),
        ("dζ/dx against a numerical derivative", derivative_consistency),
        ("no interval of exponential decay", isolated_zeros),
        ("oscillation frequency", oscillation_frequency),
        ("envelope growth at s_R = 1000", envelope_growth),
        ("inverse-square tail", late_time_tail),
        ("exponential regime at s_R = 1000", exponential_regime),
        ("effective Hamiltonian", effective_hamiltonians),
        ("command-line contract", cli_contract),
    ];
    let mut failed = Vec::new();
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err);
    for (index, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        let mark = if v.passed { "PASS" } else { "FAIL" };
        let _ = writeln!(err, "acceptance {:>2} {mark} {name}: {}", index + 1, v.detail);
        if !v.passed {
            failed.push(index + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
