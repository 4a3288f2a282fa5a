//! Spectrally positive jump-diffusion
//!
//! ```text
//! X_t = X_0 - mu t + nu B_t + sum_{n <= M_t} Z_n,   M ~ Poisson(alpha), Z_n ~ Exp(beta)
//! ```
//!
//! with Laplace exponent `psi(s) = log E[exp(-s X_1)]
//! = mu s + nu^2 s^2 / 2 + alpha (beta / (beta + s) - 1)`.
//!
//! Because the jump law is exponential, `(psi(s) - q)(beta + s)` is a
//! polynomial of degree at most three. Its roots give the partial-fraction
//! basis that every scale function in [`crate::scale`] is built from.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_nonnegative, check_positive, domain, Error, Result};
use crate::numeric::bisect;

/// Minimum separation between two roots of `psi(s) = q` before the
/// distinct-root partial fraction expansion is refused.
pub const ROOT_SEPARATION: f64 = 1e-8;

pub const DEFAULT_MU: f64 = 0.31333;
pub const DEFAULT_NU: f64 = 0.2;
pub const DEFAULT_ALPHA: f64 = 1.0;
pub const DEFAULT_BETA: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VariationClass {
    Bounded,
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevyModel {
    mu: f64,
    nu: f64,
    alpha: f64,
    beta: f64,
}

impl Default for LevyModel {
    fn default() -> Self {
        LevyModel {
            mu: DEFAULT_MU,
            nu: DEFAULT_NU,
            alpha: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
        }
    }
}

/// Roots of `psi(s) = q`, one per term of the scale-function expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct RootSet {
    pub q: f64,
    pub roots: Vec<Complex64>,
    pub phi: f64,
}

impl LevyModel {
    pub fn new(mu: f64, nu: f64, alpha: f64, beta: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::InvalidParameter {
                name: "mu",
                value: mu,
                reason: "must be finite",
            });
        }
        check_nonnegative("nu", nu)?;
        check_nonnegative("alpha", alpha)?;
        check_positive("beta", beta)?;
        if nu == 0.0 && mu <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "mu",
                value: mu,
                reason: "must be > 0 when nu = 0 (the process would be a subordinator)",
            });
        }
        Ok(LevyModel { mu, nu, alpha, beta })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn nu(&self) -> f64 {
        self.nu
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn variation_class(&self) -> VariationClass {
        if self.nu > 0.0 {
            VariationClass::Unbounded
        } else {
            VariationClass::Bounded
        }
    }

    fn check_arg(&self, op: &'static str, s: f64) -> Result<()> {
        if s.is_nan() || s <= -self.beta {
            Err(domain(op, format!("s = {s} must exceed -beta = {}", -self.beta)))
        } else {
            Ok(())
        }
    }

    /// `psi(s)` for `s > -beta`.
    pub fn laplace_exponent(&self, s: f64) -> Result<f64> {
        self.check_arg("laplace_exponent", s)?;
        Ok(self.psi(s))
    }

    pub fn laplace_exponent_derivative(&self, s: f64) -> Result<f64> {
        self.check_arg("laplace_exponent_derivative", s)?;
        Ok(self.psi_prime(s))
    }

    #[inline]
    pub(crate) fn psi(&self, s: f64) -> f64 {
        self.mu * s + 0.5 * self.nu * self.nu * s * s + self.alpha * (self.beta / (self.beta + s) - 1.0)
    }

    #[inline]
    pub(crate) fn psi_prime(&self, s: f64) -> f64 {
        let d = self.beta + s;
        self.mu + self.nu * self.nu * s - self.alpha * self.beta / (d * d)
    }

    /// Analytic continuation of `psi` to the complex plane (pole at `-beta`).
    pub fn laplace_exponent_complex(&self, s: Complex64) -> Complex64 {
        let half_var = 0.5 * self.nu * self.nu;
        s * self.mu + s * s * half_var + (Complex64::new(self.beta, 0.0) / (s + self.beta) - 1.0) * self.alpha
    }

    pub fn laplace_exponent_derivative_complex(&self, s: Complex64) -> Complex64 {
        let d = s + self.beta;
        Complex64::new(self.mu, 0.0) + s * (self.nu * self.nu) - Complex64::new(self.alpha * self.beta, 0.0) / (d * d)
    }

    /// Right inverse `Phi(q) = sup{s >= 0 : psi(s) = q}`.
    pub fn phi(&self, q: f64) -> Result<f64> {
        check_positive("q", q)?;
        let mut hi = 1.0;
        while self.psi(hi) <= q {
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(Error::NoFiniteRoot { what: "psi(s) - q" });
            }
        }
        let root = bisect(|s| self.psi(s) - q, 0.0, hi, 1e-12);
        let slope = self.psi_prime(root);
        let polished = if slope > 0.0 {
            root - (self.psi(root) - q) / slope
        } else {
            root
        };
        Ok(polished)
    }

    /// Coefficients (lowest degree first) of `(psi(s) - q)(beta + s)`, or of
    /// `psi(s) - q` itself when there are no jumps.
    fn polynomial(&self, q: f64) -> Vec<f64> {
        let half_var = 0.5 * self.nu * self.nu;
        let mut c = if self.alpha > 0.0 {
            vec![
                -q * self.beta,
                self.mu * self.beta - self.alpha - q,
                self.mu + half_var * self.beta,
                half_var,
            ]
        } else {
            vec![-q, self.mu, half_var]
        };
        while c.len() > 1 && *c.last().unwrap() == 0.0 {
            c.pop();
        }
        c
    }

    /// All roots of `psi(s) = q` (as roots of the cleared polynomial).
    pub fn equation_roots(&self, q: f64) -> Result<RootSet> {
        check_positive("q", q)?;
        let phi = self.phi(q)?;
        let coeffs = self.polynomial(q);
        let mut roots = solve_polynomial(&coeffs);

        for r in roots.iter_mut() {
            *r = self.polish(*r, q);
            if r.im.abs() <= 1e-12 * (1.0 + r.norm()) {
                r.im = 0.0;
            }
        }
        // Replace the largest real root by the bracketed Phi(q).
        let mut best: Option<usize> = None;
        for (i, r) in roots.iter().enumerate() {
            if r.im == 0.0 && best.is_none_or(|b| r.re > roots[b].re) {
                best = Some(i);
            }
        }
        match best {
            Some(i) if (roots[i].re - phi).abs() <= 1e-6 * (1.0 + phi) => roots[i] = Complex64::new(phi, 0.0),
            _ => {
                return Err(Error::NoFiniteRoot {
                    what: "real root matching Phi(q)",
                })
            }
        }
        enforce_conjugates(&mut roots);

        let mut separation = f64::INFINITY;
        for i in 0..roots.len() {
            for j in (i + 1)..roots.len() {
                separation = separation.min((roots[i] - roots[j]).norm());
            }
        }
        if separation < ROOT_SEPARATION {
            return Err(Error::NearlyRepeatedRoots { separation });
        }
        roots.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
        Ok(RootSet { q, roots, phi })
    }

    fn polish(&self, mut s: Complex64, q: f64) -> Complex64 {
        let mut resid = (self.laplace_exponent_complex(s) - q).norm();
        for _ in 0..3 {
            let d = self.laplace_exponent_derivative_complex(s);
            if d.norm() == 0.0 || !resid.is_finite() {
                break;
            }
            let next = s - (self.laplace_exponent_complex(s) - q) / d;
            let next_resid = (self.laplace_exponent_complex(next) - q).norm();
            if next_resid.is_finite() && next_resid < resid {
                s = next;
                resid = next_resid;
            } else {
                break;
            }
        }
        s
    }
}

fn enforce_conjugates(roots: &mut [Complex64]) {
    let n = roots.len();
    for i in 0..n {
        if roots[i].im > 0.0 {
            if let Some(j) = (0..n).filter(|&j| j != i && roots[j].im < 0.0).min_by(|&a, &b| {
                (roots[a] - roots[i].conj())
                    .norm()
                    .total_cmp(&(roots[b] - roots[i].conj()).norm())
            }) {
                let avg = 0.5 * (roots[i] + roots[j].conj());
                roots[i] = avg;
                roots[j] = avg.conj();
            }
        }
    }
}

/// Closed-form roots of a polynomial of degree 1 to 3 (coefficients lowest
/// degree first).
pub(crate) fn solve_polynomial(c: &[f64]) -> Vec<Complex64> {
    match c.len() {
        2 => vec![Complex64::new(-c[0] / c[1], 0.0)],
        3 => solve_quadratic(c[2], c[1], c[0]).to_vec(),
        4 => solve_cubic(c[3], c[2], c[1], c[0]).to_vec(),
        _ => Vec::new(),
    }
}

fn solve_quadratic(a: f64, b: f64, c: f64) -> [Complex64; 2] {
    let disc = Complex64::new(b * b - 4.0 * a * c, 0.0).sqrt();
    let sign = if b >= 0.0 { 1.0 } else { -1.0 };
    let t = -(Complex64::new(b, 0.0) + disc * sign) * 0.5;
    if t.norm() == 0.0 {
        return [Complex64::new(0.0, 0.0); 2];
    }
    [t / a, Complex64::new(c, 0.0) / t]
}

fn solve_cubic(a3: f64, a2: f64, a1: f64, a0: f64) -> [Complex64; 3] {
    let (a, b, c) = (a2 / a3, a1 / a3, a0 / a3);
    let shift = a / 3.0;
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let disc = Complex64::new(q * q / 4.0 + p * p * p / 27.0, 0.0).sqrt();
    let half_q = Complex64::new(-q / 2.0, 0.0);
    let cand1 = half_q + disc;
    let cand2 = half_q - disc;
    let u3 = if cand1.norm() >= cand2.norm() { cand1 } else { cand2 };
    let omega = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
    let mut out = [Complex64::new(0.0, 0.0); 3];
    if u3.norm() == 0.0 {
        out.iter_mut().for_each(|r| *r = Complex64::new(-shift, 0.0));
        return out;
    }
    let u0 = u3.powf(1.0 / 3.0);
    let mut u = u0;
    for r in out.iter_mut() {
        *r = u - p / (3.0 * u) - shift;
        u *= omega;
    }
    out
}
