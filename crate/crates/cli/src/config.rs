//! Run configuration: built-in defaults, `key = value` files and flag overrides.
//!
//! The canonical text form lists every key in a fixed order, so that parsing
//! it back and serializing again reproduces the same bytes.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Curve,
    Deviation,
    Hamiltonian,
    Tail,
    Compare,
    Spectrum,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Curve => "curve",
            Command::Deviation => "deviation",
            Command::Hamiltonian => "hamiltonian",
            Command::Tail => "tail",
            Command::Compare => "compare",
            Command::Spectrum => "spectrum",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Model {
    Bw,
    General,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Method {
    Auto,
    Closed,
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum GridSpacing {
    Lin,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// A value that is either chosen by the program or given explicitly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Auto<T> {
    Auto,
    Set(T),
}

impl<T: Copy> Auto<T> {
    pub fn or(self, fallback: T) -> T {
        match self {
            Auto::Auto => fallback,
            Auto::Set(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: Model,
    pub s_r: f64,
    pub x_min: Auto<f64>,
    pub x_max: f64,
    pub points: Auto<usize>,
    pub spacing: GridSpacing,
    pub format: Format,
    pub method: Method,
    pub unnormalized: bool,
    pub window: (f64, f64),
    pub e_min: f64,
    pub e_max: Auto<f64>,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
    pub tail_cutoff: Auto<f64>,
    pub threshold: f64,
    pub alpha: f64,
    pub angular_momentum: u32,
    pub pole_re: Auto<f64>,
    pub pole_im: f64,
    pub form_cutoff: Option<f64>,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

/// Keys in canonical order.
pub const KEYS: [&str; 24] = [
    "model",
    "s_r",
    "x_min",
    "x_max",
    "points",
    "spacing",
    "format",
    "method",
    "unnormalized",
    "window",
    "e_min",
    "e_max",
    "abs_tol",
    "rel_tol",
    "max_panels",
    "tail_cutoff",
    "threshold",
    "alpha",
    "angular_momentum",
    "pole_re",
    "pole_im",
    "form_cutoff",
    "input",
    "output",
];

/// A config-file problem at a 1-based line and column.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.column, self.message)
    }
}

impl std::error::Error for ConfigError {}

impl RunConfig {
    pub fn defaults(command: Command) -> Self {
        let (x_max, spacing) = match command {
            Command::Compare => (30.0, GridSpacing::Log),
            _ => (10.0, GridSpacing::Lin),
        };
        Self {
            model: Model::Bw,
            s_r: 10.0,
            x_min: Auto::Auto,
            x_max,
            points: Auto::Auto,
            spacing,
            format: Format::Csv,
            method: Method::Auto,
            unnormalized: false,
            window: (100.0, 1000.0),
            e_min: 0.0,
            e_max: Auto::Auto,
            abs_tol: 1e-10,
            rel_tol: 1e-9,
            max_panels: 200_000,
            tail_cutoff: Auto::Auto,
            threshold: 0.0,
            alpha: 0.0,
            angular_momentum: 0,
            pole_re: Auto::Auto,
            pole_im: -0.5,
            form_cutoff: None,
            input: None,
            output: None,
        }
    }

    /// Applies a config file on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        let mut seen: Vec<&str> = Vec::new();
        for (index, raw) in text.lines().enumerate() {
            let line = index + 1;
            let content = strip_comment(raw);
            if content.trim().is_empty() {
                continue;
            }
            let key_column = content.len() - content.trim_start().len() + 1;
            let Some(eq) = content.find('=') else {
                return Err(ConfigError {
                    line,
                    column: key_column,
                    message: "expected `key = value`".into(),
                });
            };
            let key = content[..eq].trim();
            let value_part = &content[eq + 1..];
            let value = value_part.trim();
            let value_column = eq + 2 + (value_part.len() - value_part.trim_start().len());
            let Some(&known) = KEYS.iter().find(|k| **k == key) else {
                return Err(ConfigError {
                    line,
                    column: key_column,
                    message: format!("unknown key `{key}`"),
                });
            };
            if seen.contains(&known) {
                return Err(ConfigError {
                    line,
                    column: key_column,
                    message: format!("duplicate key `{key}`"),
                });
            }
            seen.push(known);
            if value.is_empty() {
                return Err(ConfigError {
                    line,
                    column: value_column,
                    message: format!("missing value for `{key}`"),
                });
            }
            self.set(known, value).map_err(|message| ConfigError {
                line,
                column: value_column,
                message,
            })?;
        }
        Ok(())
    }

    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "model" => self.model = parse_enum(value)?,
            "s_r" => self.s_r = parse_num(value)?,
            "x_min" => self.x_min = parse_auto(value)?,
            "x_max" => self.x_max = parse_num(value)?,
            "points" => self.points = parse_auto(value)?,
            "spacing" => self.spacing = parse_enum(value)?,
            "format" => self.format = parse_enum(value)?,
            "method" => self.method = parse_enum(value)?,
            "unnormalized" => self.unnormalized = parse_num(value)?,
            "window" => self.window = parse_window(value)?,
            "e_min" => self.e_min = parse_num(value)?,
            "e_max" => self.e_max = parse_auto(value)?,
            "abs_tol" => self.abs_tol = parse_num(value)?,
            "rel_tol" => self.rel_tol = parse_num(value)?,
            "max_panels" => self.max_panels = parse_num(value)?,
            "tail_cutoff" => self.tail_cutoff = parse_auto(value)?,
            "threshold" => self.threshold = parse_num(value)?,
            "alpha" => self.alpha = parse_num(value)?,
            "angular_momentum" => self.angular_momentum = parse_num(value)?,
            "pole_re" => self.pole_re = parse_auto(value)?,
            "pole_im" => self.pole_im = parse_num(value)?,
            "form_cutoff" => {
                self.form_cutoff = if value == "none" { None } else { Some(parse_num(value)?) }
            }
            "input" => self.input = parse_path(value),
            "output" => self.output = parse_path(value),
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    /// Text form of one key.
    pub fn get(&self, key: &str) -> String {
        match key {
            "model" => enum_name(self.model),
            "s_r" => num(self.s_r),
            "x_min" => auto(self.x_min, num),
            "x_max" => num(self.x_max),
            "points" => auto(self.points, |p| p.to_string()),
            "spacing" => enum_name(self.spacing),
            "format" => enum_name(self.format),
            "method" => enum_name(self.method),
            "unnormalized" => self.unnormalized.to_string(),
            "window" => format!("{}:{}", num(self.window.0), num(self.window.1)),
            "e_min" => num(self.e_min),
            "e_max" => auto(self.e_max, num),
            "abs_tol" => num(self.abs_tol),
            "rel_tol" => num(self.rel_tol),
            "max_panels" => self.max_panels.to_string(),
            "tail_cutoff" => auto(self.tail_cutoff, num),
            "threshold" => num(self.threshold),
            "alpha" => num(self.alpha),
            "angular_momentum" => self.angular_momentum.to_string(),
            "pole_re" => auto(self.pole_re, num),
            "pole_im" => num(self.pole_im),
            "form_cutoff" => self.form_cutoff.map_or_else(|| "none".to_string(), num),
            "input" => path(&self.input),
            "output" => path(&self.output),
            _ => unreachable!("unknown key {key}"),
        }
    }

    pub fn entries(&self) -> Vec<(&'static str, String)> {
        KEYS.iter().map(|k| (*k, self.get(k))).collect()
    }

    /// Canonical `key = value` text.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# decaylaw run configuration\n");
        for (key, value) in self.entries() {
            out.push_str(key);
            out.push_str(" = ");
            out.push_str(&value);
            out.push('\n');
        }
        out
    }
}

/// Removes a `#` comment that starts the line or follows whitespace.
fn strip_comment(line: &str) -> &str {
    let bytes = line.as_bytes();
    for (i, &b) in bytes.iter().enumerate() {
        if b == b'#' && (i == 0 || bytes[i - 1].is_ascii_whitespace()) {
            return &line[..i];
        }
    }
    line
}

fn parse_num<T: FromStr>(value: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("cannot parse `{value}` as {}", std::any::type_name::<T>()))
}

fn parse_auto<T: FromStr>(value: &str) -> Result<Auto<T>, String> {
    if value == "auto" {
        Ok(Auto::Auto)
    } else {
        parse_num(value).map(Auto::Set)
    }
}

fn parse_enum<T: clap::ValueEnum>(value: &str) -> Result<T, String> {
    T::from_str(value, false).map_err(|_| {
        let names: Vec<String> = T::value_variants()
            .iter()
            .filter_map(|v| v.to_possible_value().map(|p| p.get_name().to_string()))
            .collect();
        format!("`{value}` is not one of {}", names.join(", "))
    })
}

pub fn parse_window(value: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = value
        .split_once(':')
        .ok_or_else(|| format!("window `{value}` must look like lo:hi"))?;
    Ok((parse_num(lo.trim())?, parse_num(hi.trim())?))
}

fn parse_path(value: &str) -> Option<PathBuf> {
    if value == "none" {
        None
    } else {
        Some(PathBuf::from(value))
    }
}

fn enum_name<T: clap::ValueEnum>(value: T) -> String {
    value
        .to_possible_value()
        .map(|p| p.get_name().to_string())
        .unwrap_or_default()
}

/// Shortest text that parses back to the same `f64`.
fn num(value: f64) -> String {
    format!("{value:?}")
}

fn auto<T: Copy>(value: Auto<T>, show: impl Fn(T) -> String) -> String {
    match value {
        Auto::Auto => "auto".to_string(),
        Auto::Set(v) => show(v),
    }
}

fn path(value: &Option<PathBuf>) -> String {
    value
        .as_ref()
        .map_or_else(|| "none".to_string(), |p| p.display().to_string())
}
