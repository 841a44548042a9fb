//! Independent reference integrals used as test oracles.
//!
//! Nothing here calls into the library's quadrature engine: the rule is a
//! 15-point Gauss–Legendre formula whose nodes are generated by Newton
//! iteration on the Legendre polynomial, applied with recursive bisection.

#![allow(dead_code)]

use num_complex::Complex64;
use std::f64::consts::PI;
use std::sync::OnceLock;

const ORDER: usize = 15;

fn legendre_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = ORDER;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut derivative = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                derivative = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / derivative;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * derivative * derivative);
        }
        (nodes, weights)
    })
}

fn rule<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> Complex64 {
    let (nodes, weights) = legendre_rule();
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    nodes
        .iter()
        .zip(weights)
        .map(|(&t, &w)| f(mid + half * t) * w)
        .sum::<Complex64>()
        * half
}

fn recurse<F: Fn(f64) -> Complex64>(
    f: &F,
    a: f64,
    b: f64,
    whole: Complex64,
    tol: f64,
    depth: usize,
) -> Complex64 {
    let mid = 0.5 * (a + b);
    let left = rule(f, a, mid);
    let right = rule(f, mid, b);
    let refined = left + right;
    let diff = (refined - whole).norm();
    // stop at the rounding floor of this panel as well as at the tolerance
    let floor = 1e-14 * rule(&|t| Complex64::new(f(t).norm(), 0.0), a, b).re;
    if diff <= tol || diff <= floor || depth == 0 || mid <= a || mid >= b {
        return refined;
    }
    recurse(f, a, mid, left, 0.5 * tol, depth - 1) + recurse(f, mid, b, right, 0.5 * tol, depth - 1)
}

/// Adaptive integral of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64, tol: f64) -> Complex64 {
    recurse(f, a, b, rule(f, a, b), tol, 40)
}

/// Integral over consecutive breakpoints, `tol` shared evenly.
pub fn integrate_pieces<F: Fn(f64) -> Complex64>(f: &F, breaks: &[f64], tol: f64) -> Complex64 {
    let pieces = (breaks.len() - 1) as f64;
    breaks
        .windows(2)
        .map(|w| integrate(f, w[0], w[1], tol / pieces))
        .sum()
}

/// `e^z E1(z) = ∫_0^∞ e^{-s} / (z + s) ds` along the horizontal ray from `z`.
pub fn e1_scaled_oracle(z: Complex64) -> Complex64 {
    let f = |s: f64| Complex64::new((-s).exp(), 0.0) / (z + s);
    let pole = -z.re;
    let width = z.im.abs().max(1e-300);
    let end = pole.max(0.0) + 60.0;
    let mut breaks = vec![0.0, end];
    if pole > 0.0 {
        for k in [1.0, 10.0, 100.0] {
            breaks.push(pole - k * width);
            breaks.push(pole + k * width);
        }
        breaks.push(pole);
    }
    breaks.retain(|&b| (0.0..=end).contains(&b));
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breaks.dedup();
    // magnitude scale for the tolerance: the integrand size near its peak
    let scale = 1.0 / z.norm().min(width.max(1e-3)).max(1e-6);
    integrate_pieces(&f, &breaks, 1e-15 * scale)
}

pub fn e1_oracle(z: Complex64) -> Complex64 {
    (-z).exp() * e1_scaled_oracle(z)
}

/// `∫_0^∞ ω(E) e^{-iEx} dE` for a Breit–Wigner density by brute force: fine
/// fixed panels through the resonance, tail mapped and integrated with the
/// same Gauss–Legendre recursion.
pub fn bw_amplitude_oracle(s_r: f64, x: f64) -> Complex64 {
    let n = 1.0 / (0.5 + (2.0 * s_r).atan() / PI);
    let omega = |e: f64| n / (2.0 * PI) / ((e - s_r).powi(2) + 0.25);
    let cut = s_r + 2000.0;
    let mut breaks = vec![0.0];
    let step = if x > 0.0 { (PI / x).min(1.0) } else { 1.0 };
    let mut e = 0.0;
    while e < cut {
        e = (e + step).min(cut);
        breaks.push(e);
    }
    // each panel is integrated in the local offset δ = E - a so that the
    // phase δ·x carries no rounding from the size of E
    let tol = 1e-12 / (breaks.len() - 1) as f64;
    let body: Complex64 = breaks
        .windows(2)
        .map(|w| {
            let local = |d: f64| Complex64::from_polar(omega(w[0] + d), -d * x);
            Complex64::from_polar(1.0, -w[0] * x) * integrate(&local, 0.0, w[1] - w[0], tol)
        })
        .sum();
    // tail: E = cut + u/(1-u); oscillation handled by the integration-by-parts
    // series, which is accurate once (E - s_R)·x is large
    let tail = if x == 0.0 {
        let g = |u: f64| {
            let e = cut + u / (1.0 - u);
            Complex64::new(omega(e) / (1.0 - u).powi(2), 0.0)
        };
        integrate(&g, 0.0, 1.0, 1e-14)
    } else {
        // k-th derivative of the Lorentzian from its partial fractions
        let d = cut - s_r;
        let c = n / (2.0 * PI);
        let p = Complex64::new(d, -0.5);
        let q = Complex64::new(d, 0.5);
        let ix = Complex64::new(0.0, x);
        let mut sum = Complex64::new(0.0, 0.0);
        let mut factorial = 1.0;
        for k in 0..12 {
            if k > 0 {
                factorial *= k as f64;
            }
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let derivative = (p.powi(-(k + 1)) - q.powi(-(k + 1))) / Complex64::new(0.0, 1.0)
                * (c * sign * factorial);
            sum += derivative / ix.powi(k + 1);
        }
        Complex64::from_polar(1.0, -cut * x) * sum
    };
    body + tail
}
