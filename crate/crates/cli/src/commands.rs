use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context};
use decaylaw::analysis::{
    dominant_oscillation_frequency, dzeta_magnitudes, effective_hamiltonian, envelope_maxima, envelope_trend,
    fit_power_law, isolated_zero_check, AmplitudeSource, DecayCurve, Spacing, TimeGrid,
};
use decaylaw::quadrature::{decay_law_by_quadrature, QuadratureConfig};
use decaylaw::spectral::{
    amplitude_closed_form, BreitWignerParams, GeneralDensity, GeneralDensityParams, SpectralDensity,
};
use decaylaw::{DecayError, Result as DecayResult};
use num_complex::Complex64;

use crate::config::{Command, GridSpacing, Method, Model, RunConfig};
use crate::output::{number, Cell, Table};

/// Largest `max |closed form - quadrature|` accepted by `compare`.
pub const COMPARE_TOLERANCE: f64 = 1e-6;

const WORST_OFFENDERS: usize = 5;
const MAX_AUTO_POINTS: usize = 1_000_001;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    NotConverged,
    Disagreement,
}

pub struct Run {
    pub table: Table,
    pub status: Status,
    pub warnings: Vec<String>,
}

/// Invalid input detected after parsing; reported with exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(message: impl Into<String>) -> anyhow::Error {
    UsageError(message.into()).into()
}

enum Density {
    Bw(BreitWignerParams),
    General(GeneralDensity),
}

impl Density {
    fn build(cfg: &RunConfig) -> anyhow::Result<Self> {
        match cfg.model {
            Model::Bw => {
                let params = if cfg.unnormalized {
                    BreitWignerParams::with_normalization(cfg.s_r, 1.0)
                } else {
                    BreitWignerParams::new(cfg.s_r)
                };
                Ok(Density::Bw(params.map_err(|e| usage(e.to_string()))?))
            }
            Model::General => {
                if cfg.unnormalized {
                    return Err(usage("--unnormalized applies to the bw model only"));
                }
                let threshold = cfg.threshold;
                let form_factor: decaylaw::spectral::FormFactor = match cfg.form_cutoff {
                    None => Arc::new(|_| 1.0),
                    Some(c) if c > 0.0 => Arc::new(move |e: f64| (-(e - threshold) / c).exp()),
                    Some(c) => return Err(usage(format!("form_cutoff must be positive, got {c}"))),
                };
                let params = GeneralDensityParams {
                    threshold,
                    alpha: cfg.alpha,
                    angular_momentum: cfg.angular_momentum,
                    pole_position: Complex64::new(cfg.pole_re.or(threshold + cfg.s_r), cfg.pole_im),
                    form_factor,
                };
                Ok(Density::General(
                    GeneralDensity::new(params).map_err(|e| usage(e.to_string()))?,
                ))
            }
        }
    }

    fn as_dyn(&self) -> &dyn SpectralDensity {
        match self {
            Density::Bw(p) => p,
            Density::General(d) => d,
        }
    }

    /// Resonance energy above threshold, which sets the interference frequency.
    fn resonance_energy(&self) -> f64 {
        let d = self.as_dyn();
        d.canonical_pole().re - d.threshold()
    }
}

struct Setup<'a> {
    cfg: &'a RunConfig,
    command: Command,
    density: Density,
    method: Method,
    quadrature: QuadratureConfig,
}

impl<'a> Setup<'a> {
    fn new(cfg: &'a RunConfig, command: Command) -> anyhow::Result<Self> {
        if !(cfg.s_r.is_finite() && cfg.s_r > 0.0) {
            return Err(usage(format!("s_r must be positive, got {}", cfg.s_r)));
        }
        let density = Density::build(cfg)?;
        let method = match (cfg.method, &density) {
            (Method::Auto, Density::Bw(_)) => Method::Closed,
            (Method::Auto, Density::General(_)) => Method::Quadrature,
            (Method::Closed, Density::General(_)) => {
                return Err(usage("the general model has no closed form; use --method quadrature"))
            }
            (m, _) => m,
        };
        let default = QuadratureConfig::default_for(density.as_dyn());
        let quadrature = QuadratureConfig::new(
            cfg.abs_tol,
            cfg.rel_tol,
            cfg.max_panels,
            cfg.tail_cutoff.or(default.tail_cutoff_energy),
        )
        .map_err(|e| usage(e.to_string()))?;
        Ok(Self {
            cfg,
            command,
            density,
            method,
            quadrature,
        })
    }

    fn expected_frequency(&self) -> f64 {
        self.density.resonance_energy() / (2.0 * PI)
    }

    fn time_grid(&self) -> anyhow::Result<TimeGrid> {
        let cfg = self.cfg;
        let (x_min, x_max) = (self.x_min(), cfg.x_max);
        let grid = match cfg.spacing {
            GridSpacing::Lin => {
                let auto = (8.0 * (x_max - x_min) * self.expected_frequency()).ceil() + 1.0;
                let points = cfg
                    .points
                    .or((auto.max(1001.0) as usize).min(MAX_AUTO_POINTS));
                TimeGrid::linear(x_min, x_max, points)
            }
            GridSpacing::Log => {
                let auto = if self.command == Command::Compare { 500 } else { 200 };
                TimeGrid::logarithmic(x_min, x_max, cfg.points.or(auto))
            }
        };
        grid.map_err(|e| usage(e.to_string()))
    }

    fn x_min(&self) -> f64 {
        let fallback = match (self.cfg.spacing, self.command) {
            (GridSpacing::Log, _) => 0.01,
            (GridSpacing::Lin, Command::Hamiltonian) => 0.1,
            (GridSpacing::Lin, _) => 0.0,
        };
        self.cfg.x_min.or(fallback)
    }

    fn curve(&self, grid: &TimeGrid) -> DecayResult<DecayCurve> {
        match (self.method, &self.density) {
            (Method::Closed, Density::Bw(p)) => DecayCurve::closed_form(grid, p),
            _ => decay_law_by_quadrature(grid, self.density.as_dyn(), &self.quadrature),
        }
    }
}

fn failed_points(curve: &DecayCurve) -> usize {
    curve.records().iter().filter(|r| !r.converged).count()
}

fn status_for(failed: usize) -> Status {
    if failed == 0 {
        Status::Ok
    } else {
        Status::NotConverged
    }
}

pub fn run(cfg: &RunConfig, command: Command) -> anyhow::Result<Run> {
    let setup = Setup::new(cfg, command)?;
    match command {
        Command::Curve => curve(&setup),
        Command::Deviation => deviation(&setup),
        Command::Hamiltonian => hamiltonian(&setup),
        Command::Tail => tail(&setup),
        Command::Compare => compare(&setup),
        Command::Spectrum => spectrum(&setup),
    }
}

fn method_name(method: Method) -> &'static str {
    match method {
        Method::Closed => "closed",
        _ => "quadrature",
    }
}

fn curve(setup: &Setup) -> anyhow::Result<Run> {
    let grid = setup.time_grid()?;
    let curve = setup.curve(&grid)?;
    let mut table = Table::new(&["x", "re_a", "im_a", "p", "p_c", "error", "converged"]);
    for r in curve.records() {
        let error = match r.amplitude_error {
            Some(e) => Cell::Num(e),
            None => Cell::from("exact"),
        };
        table.push(vec![
            r.x.into(),
            r.amplitude.re.into(),
            r.amplitude.im.into(),
            r.probability.into(),
            r.canonical_probability.into(),
            error,
            r.converged.into(),
        ]);
    }
    let failed = failed_points(&curve);
    table.note("method", method_name(setup.method));
    table.note("points", curve.len());
    table.note("failed_points", failed);
    let mut warnings = Vec::new();
    if failed > 0 {
        warnings.push(format!("{failed} point(s) did not reach the requested tolerance"));
    }
    Ok(Run {
        table,
        status: status_for(failed),
        warnings,
    })
}

fn deviation(setup: &Setup) -> anyhow::Result<Run> {
    let grid = setup.time_grid()?;
    let curve = setup.curve(&grid)?;
    let mut table = Table::new(&["x", "re_zeta", "im_zeta", "f"]);
    for r in curve.records() {
        table.push(vec![r.x.into(), r.zeta.re.into(), r.zeta.im.into(), r.deviation.into()]);
    }
    let times = curve.times();
    let f = curve.deviations();
    let expected = setup.expected_frequency();

    table.note("method", method_name(setup.method));
    table.note("expected_frequency", expected);
    let frequency = if grid.spacing() != Spacing::Linear {
        Cell::from("unavailable: needs a linear grid")
    } else if f.iter().any(|v| !v.is_finite()) {
        Cell::from("unavailable: f leaves the floating-point range")
    } else {
        match dominant_oscillation_frequency(&times, &f, Some(expected)) {
            Ok(nu) => Cell::Num(nu),
            Err(e) => Cell::Text(format!("unavailable: {e}")),
        }
    };
    table.note("dominant_frequency", frequency);

    // unit-lifetime windows over [5, 25] where the grid covers it
    let (first, last) = (times[0], times[times.len() - 1]);
    let range = (first.max(5.0), last.min(25.0));
    let range = if range.1 - range.0 >= 2.0 { range } else { (first, last) };
    let maxima = envelope_maxima(&times, &f, range, 1.0);
    table.note("envelope_window", format!("{}:{}", number(range.0), number(range.1)));
    table.note("envelope_trend", envelope_trend(&maxima).as_str());

    let (zero_times, magnitudes) = dzeta_samples(setup, &curve)?;
    if magnitudes.is_empty() {
        table.note("isolated_zero_check", "unavailable: too few points");
    } else {
        let peak = magnitudes.iter().cloned().fold(0.0, f64::max);
        let report = isolated_zero_check(&zero_times, &magnitudes, 1e-12 * peak);
        table.note("isolated_zero_check", if report.passed { "pass" } else { "fail" });
        table.note("max_low_derivative_run", report.max_run_length);
    }

    let failed = failed_points(&curve);
    table.note("failed_points", failed);
    Ok(Run {
        table,
        status: status_for(failed),
        warnings: Vec::new(),
    })
}

/// `|dζ/dx|` analytically for the closed form, otherwise from differences of ζ.
fn dzeta_samples(setup: &Setup, curve: &DecayCurve) -> anyhow::Result<(Vec<f64>, Vec<f64>)> {
    match (setup.method, &setup.density) {
        (Method::Closed, Density::Bw(p)) => {
            let times: Vec<f64> = curve.times().into_iter().filter(|x| *x > 0.0).collect();
            let values = match dzeta_magnitudes(&times, p) {
                Ok(v) => v,
                // beyond the range of ζ there is nothing left to check
                Err(DecayError::RangeExceeded(_)) => return Ok((Vec::new(), Vec::new())),
                Err(e) => return Err(e.into()),
            };
            Ok((times, values))
        }
        _ => {
            let records = curve.records();
            let mut times = Vec::new();
            let mut values = Vec::new();
            for w in records.windows(2) {
                times.push(0.5 * (w[0].x + w[1].x));
                values.push((w[1].zeta - w[0].zeta).norm() / (w[1].x - w[0].x));
            }
            Ok((times, values))
        }
    }
}

fn hamiltonian(setup: &Setup) -> anyhow::Result<Run> {
    let grid = setup.time_grid()?;
    let mut table = Table::new(&["x", "re_h", "im_h", "energy", "rate", "error"]);
    let mut failed = 0;
    let mut skipped = 0;
    let source = match (setup.method, &setup.density) {
        (Method::Closed, Density::Bw(p)) => {
            table.note("source", "closed-form");
            AmplitudeSource::ClosedForm(*p)
        }
        _ => {
            if grid.spacing() != Spacing::Linear {
                return Err(usage("the sampled effective Hamiltonian needs --spacing lin"));
            }
            let curve = setup.curve(&grid)?;
            failed = failed_points(&curve);
            table.note("source", "sampled");
            AmplitudeSource::from_curve(&curve).map_err(|e| usage(e.to_string()))?
        }
    };
    let points = grid.points();
    let interior = match source {
        AmplitudeSource::Sampled { .. } => 2..points.len().saturating_sub(2),
        _ => 0..points.len(),
    };
    for &x in &points[interior] {
        if x <= 0.0 {
            skipped += 1;
            continue;
        }
        match effective_hamiltonian(&source, x) {
            Ok(h) => table.push(vec![
                x.into(),
                h.h.re.into(),
                h.h.im.into(),
                h.instantaneous_energy.into(),
                h.instantaneous_rate.into(),
                h.error_estimate.into(),
            ]),
            Err(DecayError::Domain(_)) => skipped += 1,
            Err(e @ DecayError::StepTooCoarse { .. }) => {
                bail!("{e} at x = {x}; use more --points")
            }
            Err(e) => return Err(e.into()),
        }
    }
    table.note("skipped_points", skipped);
    table.note("failed_points", failed);
    Ok(Run {
        table,
        status: status_for(failed),
        warnings: Vec::new(),
    })
}

fn tail(setup: &Setup) -> anyhow::Result<Run> {
    let cfg = setup.cfg;
    let window = cfg.window;
    if !(window.0 > 0.0 && window.1 > window.0) {
        return Err(usage(format!(
            "window must satisfy 0 < lo < hi, got {}:{}",
            window.0, window.1
        )));
    }
    let mut failed = 0;
    let (samples, source) = match &cfg.input {
        Some(path) => (read_samples(path)?, "input"),
        None => {
            // the grid spans exactly the fit window
            let grid = TimeGrid::logarithmic(window.0, window.1, cfg.points.or(200))
                .map_err(|e| usage(e.to_string()))?;
            let curve = setup.curve(&grid)?;
            failed = failed_points(&curve);
            let samples = curve.records().iter().map(|r| (r.x, r.probability)).collect();
            (samples, method_name(setup.method))
        }
    };
    let inside: Vec<(f64, f64)> = samples
        .into_iter()
        .filter(|(x, _)| *x >= window.0 && *x <= window.1)
        .collect();
    let fit = fit_power_law(&inside, window)?;

    let mut table = Table::new(&[
        "exponent",
        "intercept",
        "x_lo",
        "x_hi",
        "residual_rms",
        "points",
        "power_law",
    ]);
    table.push(vec![
        fit.exponent.into(),
        fit.intercept.into(),
        window.0.into(),
        window.1.into(),
        fit.residual_rms.into(),
        fit.points.into(),
        fit.is_power_law().into(),
    ]);
    table.note("source", source);
    table.note("failed_points", failed);
    let mut warnings = Vec::new();
    if !fit.is_power_law() {
        let warning = format!(
            "residual {} exceeds {}: the data do not follow a power law in this window",
            number(fit.residual_rms),
            decaylaw::analysis::POWER_LAW_RESIDUAL_LIMIT
        );
        table.note("warning", warning.clone());
        warnings.push(warning);
    }
    Ok(Run {
        table,
        status: status_for(failed),
        warnings,
    })
}

/// `(x, P)` pairs from a CSV file with columns named `x` and `p`.
fn read_samples(path: &Path) -> anyhow::Result<Vec<(f64, f64)>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| usage(format!("{} has no `{name}` column", path.display())))
    };
    let (ix, ip) = (column("x")?, column("p")?);
    let mut samples = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let parse = |k: usize| -> anyhow::Result<f64> {
            let field = record.get(k).unwrap_or("");
            field
                .parse()
                .map_err(|_| usage(format!("{}: row {}: cannot parse `{field}`", path.display(), i + 2)))
        };
        samples.push((parse(ix)?, parse(ip)?));
    }
    Ok(samples)
}

fn compare(setup: &Setup) -> anyhow::Result<Run> {
    let cfg = setup.cfg;
    if cfg.model != Model::Bw {
        return Err(usage("compare needs the bw model"));
    }
    let grid = setup.time_grid()?;
    // the negative control corrupts N on the closed-form side only
    let closed_params = if cfg.unnormalized {
        BreitWignerParams::with_normalization(cfg.s_r, 1.0)?
    } else {
        BreitWignerParams::new(cfg.s_r)?
    };
    let density = BreitWignerParams::new(cfg.s_r)?;
    let quad = decay_law_by_quadrature(&grid, &density, &setup.quadrature)?;

    let mut table = Table::new(&[
        "x",
        "re_closed",
        "im_closed",
        "re_quad",
        "im_quad",
        "abs_diff",
        "quad_error",
        "converged",
    ]);
    let mut diffs = Vec::with_capacity(grid.len());
    for r in quad.records() {
        let closed = amplitude_closed_form(r.x, &closed_params)?;
        let diff = (closed - r.amplitude).norm();
        diffs.push((r.x, diff));
        table.push(vec![
            r.x.into(),
            closed.re.into(),
            closed.im.into(),
            r.amplitude.re.into(),
            r.amplitude.im.into(),
            diff.into(),
            r.amplitude_error.unwrap_or(f64::NAN).into(),
            r.converged.into(),
        ]);
    }
    let max = diffs.iter().map(|d| d.1).fold(0.0, f64::max);
    let rms = (diffs.iter().map(|d| d.1 * d.1).sum::<f64>() / diffs.len() as f64).sqrt();
    let failed = failed_points(&quad);
    let agree = max < COMPARE_TOLERANCE;

    table.note("max_abs_diff", max);
    table.note("rms_abs_diff", rms);
    table.note("tolerance", COMPARE_TOLERANCE);
    table.note("agreement", if agree { "pass" } else { "fail" });
    table.note("failed_points", failed);

    let mut warnings = Vec::new();
    if !agree {
        let mut worst = diffs.clone();
        worst.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.total_cmp(&b.0)));
        for (rank, (x, d)) in worst.iter().take(WORST_OFFENDERS).enumerate() {
            let line = format!("x = {}, abs_diff = {}", number(*x), number(*d));
            warnings.push(format!("worst {}: {line}", rank + 1));
            table.note(format!("worst_{}", rank + 1), line);
        }
    }
    let status = if !agree {
        Status::Disagreement
    } else {
        status_for(failed)
    };
    Ok(Run { table, status, warnings })
}

fn spectrum(setup: &Setup) -> anyhow::Result<Run> {
    let cfg = setup.cfg;
    let density = setup.density.as_dyn();
    let resonance = density.resonance();
    let e_max = cfg
        .e_max
        .or(resonance.map_or(density.threshold() + 10.0, |r| r.center + 20.0 * r.half_width));
    let points = cfg.points.or(1001);
    if !(cfg.e_min.is_finite() && e_max.is_finite()) || points == 0 || (points > 1 && e_max <= cfg.e_min) {
        return Err(usage(format!(
            "energy range {}..{} with {points} points is empty",
            cfg.e_min, e_max
        )));
    }
    let step = if points > 1 {
        (e_max - cfg.e_min) / (points - 1) as f64
    } else {
        0.0
    };
    let mut table = Table::new(&["e", "omega"]);
    for i in 0..points {
        let e = if i + 1 == points && points > 1 { e_max } else { cfg.e_min + i as f64 * step };
        table.push(vec![e.into(), density.density(e).into()]);
    }
    if let Density::Bw(p) = &setup.density {
        table.note("normalization", p.normalization());
    }
    Ok(Run {
        table,
        status: Status::Ok,
        warnings: Vec::new(),
    })
}
