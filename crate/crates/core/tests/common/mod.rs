//! Independent numerical oracles shared by the integration tests.
#![allow(dead_code)]

use num_complex::Complex64;
use stopgame::equilibrium::GameSpec;
use stopgame::levy_model::LevyModel;

pub fn case_study() -> LevyModel {
    LevyModel::new(0.31333, 0.2, 1.0, 2.0).unwrap()
}

pub fn case_spec() -> GameSpec {
    GameSpec::puts(case_study(), 0.05, 1.0, 50.0, 60.0).unwrap()
}

/// Gauss–Legendre nodes and weights on [-1, 1], Newton on the three-term
/// recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Composite 64-point Gauss–Legendre over `panels` equal panels.
pub fn gl64<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let (nodes, weights) = gauss_legendre(64);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let mid = lo + 0.5 * h;
        let s: f64 = nodes.iter().zip(&weights).map(|(x, w)| w * f(mid + 0.5 * h * x)).sum();
        total += 0.5 * h * s;
    }
    total
}

/// Composite Simpson with `n` (even) panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    assert!(n.is_multiple_of(2));
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Numerical Laplace inversion (Euler summation of the Bromwich integral).
/// `transform` must be analytic on `Re s > 0` with a bounded original.
pub fn euler_inversion<F: Fn(Complex64) -> Complex64>(transform: F, t: f64) -> f64 {
    const A: f64 = 18.4;
    const N: usize = 15;
    const M: usize = 11;
    let scale = (A / 2.0).exp() / t;
    let mut partial = Vec::with_capacity(N + M + 1);
    let mut sum = 0.5 * transform(Complex64::new(A / (2.0 * t), 0.0)).re;
    partial.push(sum);
    for k in 1..=N + M {
        let s = Complex64::new(A, 2.0 * k as f64 * std::f64::consts::PI) / (2.0 * t);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * transform(s).re;
        partial.push(sum);
    }
    let mut binom = 1.0;
    let mut acc = 0.0;
    for k in 0..=M {
        acc += binom * partial[N + k];
        binom *= (M - k) as f64 / (k + 1) as f64;
    }
    scale * acc / 2f64.powi(M as i32)
}

/// `W^(q)(x)` by Laplace inversion of `1/(psi(theta) - q)`, with the growth
/// `e^{c x}` (c above Phi(q)) factored out.
pub fn w_by_inversion(model: &LevyModel, q: f64, x: f64) -> f64 {
    let c = model.phi(q).unwrap() + 0.1;
    let shifted = |s: Complex64| 1.0 / (model.laplace_exponent_complex(s + c) - q);
    (c * x).exp() * euler_inversion(shifted, x)
}

/// Largest absolute relative deviation helper.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
