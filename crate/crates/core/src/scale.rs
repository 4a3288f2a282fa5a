//! Scale functions of the spectrally positive jump-diffusion.
//!
//! With the exponential jump law the Laplace transform `1 / (psi(theta) - q)`
//! is rational, so
//!
//! ```text
//! W^(q)(x) = sum_i e^{r_i x} / psi'(r_i),   x >= 0,
//! ```
//!
//! over the roots `r_i` of `psi(s) = q`. Every derived object (`Z`, the
//! two-rate composite `W_b^(q,lambda)`, the reward integral `Gamma`) is an
//! integral of exponentials and is evaluated term by term in closed form.
//! Quadrature is only used for rewards without an exponential-affine form
//! and for the resolvent.

use num_complex::Complex64;

use crate::error::{check_positive, domain, Result};
use crate::levy_model::{LevyModel, VariationClass};
use crate::numeric::{exp_integral, integrate};
use crate::rewards::Reward;

/// Exponent above which sums are evaluated with the dominant exponential
/// factored out.
pub const OVERFLOW_EXPONENT: f64 = 600.0;

/// Rates closer than this are treated as coincident in term-wise integrals.
pub const COINCIDENT_RATE: f64 = 1e-9;

#[inline]
fn cexp_integral(k: Complex64, y: f64) -> Complex64 {
    if k.norm() < COINCIDENT_RATE {
        Complex64::new(y, 0.0) * (k * (0.5 * y) + 1.0)
    } else if k.im == 0.0 {
        Complex64::new(exp_integral(k.re, y), 0.0)
    } else {
        ((k * y).exp() - 1.0) / k
    }
}

/// Exponential-sum representation of `W^(q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpSum {
    pub q: f64,
    /// `(root, residue)` pairs; residue `= 1 / psi'(root)`.
    pub terms: Vec<(Complex64, Complex64)>,
    value_at_zero: f64,
    dominant: f64,
}

impl ExpSum {
    pub fn new(model: &LevyModel, q: f64) -> Result<Self> {
        let roots = model.equation_roots(q)?;
        let terms: Vec<_> = roots
            .roots
            .iter()
            .map(|&r| (r, model.laplace_exponent_derivative_complex(r).inv()))
            .collect();
        let value_at_zero = match model.variation_class() {
            VariationClass::Unbounded => 0.0,
            VariationClass::Bounded => 1.0 / model.mu(),
        };
        Ok(ExpSum {
            q,
            terms,
            value_at_zero,
            dominant: roots.phi,
        })
    }

    /// Largest real part among the roots, i.e. `Phi(q)`.
    pub fn dominant_rate(&self) -> f64 {
        self.dominant
    }

    #[inline]
    fn fold<F: Fn(Complex64, Complex64) -> Complex64>(&self, f: F) -> f64 {
        self.terms.iter().map(|&(r, c)| f(r, c)).sum::<Complex64>().re
    }

    /// `W^(q)(x)`; zero on the negative half-line.
    pub fn eval(&self, x: f64) -> f64 {
        if x < 0.0 {
            0.0
        } else if x == 0.0 {
            self.value_at_zero
        } else if self.dominant * x > OVERFLOW_EXPONENT {
            self.eval_scaled(x, self.dominant * x) * (self.dominant * x).exp()
        } else {
            self.fold(|r, c| c * (r * x).exp())
        }
    }

    /// `W^(q)(x) e^{-shift}` without forming `W^(q)(x)` itself.
    pub fn eval_scaled(&self, x: f64, shift: f64) -> f64 {
        if x < 0.0 {
            0.0
        } else if x == 0.0 {
            self.value_at_zero * (-shift).exp()
        } else {
            self.fold(|r, c| c * (r * x - shift).exp())
        }
    }

    /// Complex sum over all terms; the imaginary part only reflects rounding.
    pub fn eval_complex(&self, x: f64) -> Complex64 {
        if x < 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        self.terms.iter().map(|&(r, c)| c * (r * x).exp()).sum()
    }

    /// `W^(q)'(x)` for `x > 0`.
    pub fn derivative(&self, x: f64) -> f64 {
        if x < 0.0 {
            0.0
        } else {
            self.fold(|r, c| c * r * (r * x).exp())
        }
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        if x < 0.0 {
            0.0
        } else {
            self.fold(|r, c| c * r * r * (r * x).exp())
        }
    }

    /// `int_0^x e^{-theta u} W^(q)(u) du` for `x >= 0`.
    pub fn exp_weighted_integral(&self, theta: f64, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        self.fold(|r, c| c * cexp_integral(r - theta, x))
    }

    /// Analytic Laplace transform `sum_i c_i / (theta - r_i)`, valid for
    /// `theta > Phi(q)`.
    pub fn laplace_transform(&self, theta: f64) -> f64 {
        self.fold(|r, c| c / (Complex64::new(theta, 0.0) - r))
    }

    /// `e^{-shift} int_0^y (c0 + c1 e^{x + u}) W^(q)(u) du` for `y >= 0`.
    pub(crate) fn exp_affine_integral(&self, c0: f64, c1: f64, x: f64, y: f64, shift: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        let scale = (-shift).exp();
        let shifted = |k: Complex64| -> Complex64 {
            // e^{-shift} (e^{k y} - 1) / k
            if k.norm() < COINCIDENT_RATE {
                Complex64::new(y * scale, 0.0)
            } else if shift == 0.0 {
                cexp_integral(k, y)
            } else {
                ((k * y - shift).exp() - scale) / k
            }
        };
        let ex = x.exp();
        self.fold(|r, c| c * (shifted(r) * c0 + shifted(r + 1.0) * (c1 * ex)))
    }
}

/// `Z^(r)(x; theta) = e^{theta x} (1 + (r - psi(theta)) int_0^x e^{-theta u} W^(r)(u) du)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZFunction {
    pub underlying: ExpSum,
    pub theta: f64,
    pub r: f64,
    factor: f64,
}

impl ZFunction {
    pub fn new(model: &LevyModel, r: f64, theta: f64) -> Result<Self> {
        check_positive("r", r)?;
        if !(theta >= 0.0 && theta.is_finite()) {
            return Err(domain("z", format!("theta = {theta} must be >= 0")));
        }
        let underlying = ExpSum::new(model, r)?;
        let factor = r - model.laplace_exponent(theta)?;
        Ok(ZFunction {
            underlying,
            theta,
            r,
            factor,
        })
    }

    pub(crate) fn from_parts(underlying: ExpSum, theta: f64, factor: f64) -> Self {
        let r = underlying.q;
        ZFunction {
            underlying,
            theta,
            r,
            factor,
        }
    }

    pub fn dominant_rate(&self) -> f64 {
        self.theta.max(self.underlying.dominant_rate())
    }

    /// Shift that keeps `eval_scaled(x, shift)` finite.
    pub fn shift_for(&self, x: f64) -> f64 {
        let e = self.dominant_rate() * x;
        if e > OVERFLOW_EXPONENT {
            e
        } else {
            0.0
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let shift = self.shift_for(x);
        if shift == 0.0 {
            self.eval_scaled(x, 0.0)
        } else {
            self.eval_scaled(x, shift) * shift.exp()
        }
    }

    /// `Z(x) e^{-shift}`.
    pub fn eval_scaled(&self, x: f64, shift: f64) -> f64 {
        let base = (self.theta * x - shift).exp();
        if x <= 0.0 {
            return base;
        }
        let theta = self.theta;
        let integral = self.underlying.fold(|r, c| {
            let k = r - theta;
            if k.norm() < COINCIDENT_RATE {
                c * (x * base)
            } else {
                c * ((r * x - shift).exp() - base) / k
            }
        });
        base + self.factor * integral
    }

    /// `Z'(x) = theta Z(x) + (r - psi(theta)) W^(r)(x)` for `x != 0`.
    pub fn derivative(&self, x: f64) -> f64 {
        self.theta * self.eval(x) + self.factor * self.underlying.eval(x)
    }

    pub(crate) fn second_derivative(&self, x: f64) -> f64 {
        self.theta * self.derivative(x) + self.factor * self.underlying.derivative(x)
    }

    /// `Z(x1) / Z(x2)` computed with a common shift.
    pub fn ratio(&self, x1: f64, x2: f64) -> f64 {
        let shift = self.shift_for(x1.max(x2));
        self.eval_scaled(x1, shift) / self.eval_scaled(x2, shift)
    }
}

/// Scale objects needed by the game at one `(model, q, lambda)`:
/// `Phi(q)`, `W^(q)`, `W^(q+lambda)` and `Z^(q+lambda)(.; Phi(q))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleSet {
    pub model: LevyModel,
    pub q: f64,
    pub lambda: f64,
    pub phi: f64,
    pub w_q: ExpSum,
    pub w_ql: ExpSum,
    pub z_ql: ZFunction,
}

impl ScaleSet {
    pub fn new(model: &LevyModel, q: f64, lambda: f64) -> Result<Self> {
        check_positive("q", q)?;
        check_positive("lambda", lambda)?;
        let phi = model.phi(q)?;
        let w_q = ExpSum::new(model, q)?;
        let w_ql = ExpSum::new(model, q + lambda)?;
        // r - psi(Phi(q)) = q + lambda - q
        let z_ql = ZFunction::from_parts(w_ql.clone(), phi, lambda);
        Ok(ScaleSet {
            model: *model,
            q,
            lambda,
            phi,
            w_q,
            w_ql,
            z_ql,
        })
    }

    /// `W^(q+lambda)(x) / Z^(q+lambda)(x; Phi(q))`.
    pub fn w_over_z(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let shift = self.z_ql.shift_for(x);
        self.w_ql.eval_scaled(x, shift) / self.z_ql.eval_scaled(x, shift)
    }

    /// `Z^(q+lambda)'(x; Phi(q))`.
    pub fn z_prime(&self, x: f64) -> f64 {
        if x < 0.0 {
            self.phi * (self.phi * x).exp()
        } else {
            self.phi * self.z_ql.eval(x) + self.lambda * self.w_ql.eval(x)
        }
    }

    /// `W_b^(q,lambda)(x) = W^(q)(x+b) + lambda int_0^x W^(q+lambda)(x-u) W^(q)(u+b) du`.
    pub fn script_w(&self, b: f64, x: f64) -> f64 {
        let head = self.w_q.eval(x + b);
        let lo = (-b).max(0.0);
        if x <= 0.0 || lo >= x {
            return head;
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for &(ri, di) in &self.w_ql.terms {
            for &(sj, cj) in &self.w_q.terms {
                let k = sj - ri;
                let lead = (ri * x + sj * b + k * lo).exp();
                acc += di * cj * lead * cexp_integral(k, x - lo);
            }
        }
        head + self.lambda * acc.re
    }

    /// `Gamma(x; l) = int_0^{l-x} f_p(u + x) W^(q+lambda)(u) du`, zero for `x >= l`.
    pub fn gamma(&self, reward: &dyn Reward, x: f64, l: f64) -> f64 {
        self.gamma_scaled(reward, x, l, 0.0)
    }

    pub(crate) fn gamma_scaled(&self, reward: &dyn Reward, x: f64, l: f64, shift: f64) -> f64 {
        let y = l - x;
        if y <= 0.0 {
            return 0.0;
        }
        match reward.exp_affine() {
            Some((c0, c1)) => self.w_ql.exp_affine_integral(c0, c1, x, y, shift),
            None => {
                let s = (-shift).exp();
                integrate(|u| reward.value(u + x) * self.w_ql.eval_scaled(u, 0.0), 0.0, y) * s
            }
        }
    }

    /// `int_0^{l-x} f_p'(u + x) W^(q+lambda)(u) du`.
    pub(crate) fn gamma_of_derivative(&self, reward: &dyn Reward, x: f64, l: f64) -> f64 {
        let y = l - x;
        if y <= 0.0 {
            return 0.0;
        }
        match reward.exp_affine() {
            Some((_, c1)) => self.w_ql.exp_affine_integral(0.0, c1, x, y, 0.0),
            None => integrate(|u| reward.derivative(u + x) * self.w_ql.eval(u), 0.0, y),
        }
    }

    /// `int_0^{l-x} f_p''(u + x) W^(q+lambda)(u) du`.
    pub(crate) fn gamma_of_second_derivative(&self, reward: &dyn Reward, x: f64, l: f64) -> f64 {
        let y = l - x;
        if y <= 0.0 {
            return 0.0;
        }
        match reward.exp_affine() {
            Some((_, c1)) => self.w_ql.exp_affine_integral(0.0, c1, x, y, 0.0),
            None => integrate(|u| reward.second_derivative(u + x) * self.w_ql.eval(u), 0.0, y),
        }
    }
}

// ---------------------------------------------------------------------------
// Free-function surface.

pub fn w(model: &LevyModel, q: f64, x: f64) -> Result<f64> {
    Ok(ExpSum::new(model, q)?.eval(x))
}

pub fn w_prime(model: &LevyModel, q: f64, x: f64) -> Result<f64> {
    if x.is_nan() || x <= 0.0 {
        return Err(domain("w_prime", format!("x = {x} must be > 0")));
    }
    Ok(ExpSum::new(model, q)?.derivative(x))
}

pub fn z(model: &LevyModel, r: f64, theta: f64, x: f64) -> Result<f64> {
    Ok(ZFunction::new(model, r, theta)?.eval(x))
}

/// `Z^(q+lambda)'(x; Phi(q)) = Phi(q) Z^(q+lambda)(x; Phi(q)) + lambda W^(q+lambda)(x)`.
pub fn z_prime(model: &LevyModel, q: f64, lambda: f64, x: f64) -> Result<f64> {
    if x == 0.0 && model.variation_class() == VariationClass::Bounded {
        return Err(domain("z_prime", "Z' has a kink at 0 for bounded variation"));
    }
    Ok(ScaleSet::new(model, q, lambda)?.z_prime(x))
}

pub fn script_w(model: &LevyModel, q: f64, lambda: f64, b: f64, x: f64) -> Result<f64> {
    Ok(ScaleSet::new(model, q, lambda)?.script_w(b, x))
}

pub fn gamma_integral(model: &LevyModel, q: f64, lambda: f64, reward: &dyn Reward, x: f64, l: f64) -> Result<f64> {
    Ok(ScaleSet::new(model, q, lambda)?.gamma(reward, x, l))
}

/// `E_x[e^{-q tau_0^-}; tau_0^- < inf] = e^{-Phi(q) x}`.
pub fn exit_down_one_sided(model: &LevyModel, q: f64, x: f64) -> Result<f64> {
    if x.is_nan() || x < 0.0 {
        return Err(domain("exit_down_one_sided", format!("x = {x} must be >= 0")));
    }
    Ok((-model.phi(q)? * x).exp())
}

/// `E_x[e^{-q tau_0^-}; tau_0^- < tau_b^+] = W(b-x) / W(b)`.
pub fn exit_down_two_sided(model: &LevyModel, q: f64, x: f64, b: f64) -> Result<f64> {
    if !(b > 0.0) || !(0.0..=b).contains(&x) {
        return Err(domain(
            "exit_down_two_sided",
            format!("need 0 <= x <= b, b > 0 (x = {x}, b = {b})"),
        ));
    }
    let ws = ExpSum::new(model, q)?;
    let shift = ws.dominant_rate() * b;
    Ok(ws.eval_scaled(b - x, shift) / ws.eval_scaled(b, shift))
}

/// `E_x[e^{-q tau_b^+ - theta (X_{tau_b^+} - b)}; tau_b^+ < tau_0^-]`.
pub fn exit_up_overshoot_laplace(model: &LevyModel, q: f64, x: f64, b: f64, theta: f64) -> Result<f64> {
    if !(b > 0.0) || !(0.0..=b).contains(&x) {
        return Err(domain(
            "exit_up_overshoot_laplace",
            format!("need 0 <= x <= b, b > 0 (x = {x}, b = {b})"),
        ));
    }
    let zf = ZFunction::new(model, q, theta)?;
    let shift = zf.shift_for(b);
    let wb = zf.underlying.eval_scaled(b, shift);
    let v = zf.eval_scaled(b - x, shift) - zf.eval_scaled(b, shift) / wb * zf.underlying.eval_scaled(b - x, shift);
    Ok(v)
}

/// `E_x[int_0^{tau_a^- ^ tau_b^+} e^{-q s} f(X_s) ds]`; zero outside `[a, b]`.
pub fn resolvent_two_sided<F>(model: &LevyModel, q: f64, f: F, x: f64, a: f64, b: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(a < b) {
        return Err(domain("resolvent_two_sided", format!("need a < b (a = {a}, b = {b})")));
    }
    if x <= a || x >= b {
        return Ok(0.0);
    }
    let ws = ExpSum::new(model, q)?;
    let ratio = ws.eval(b - x) / ws.eval(b - a);
    let kernel = |u: f64| f(b - u) * (ratio * ws.eval(b - a - u) - ws.eval(b - x - u));
    // The second term switches off at u = b - x.
    Ok(integrate(kernel, 0.0, b - x) + integrate(kernel, b - x, b - a))
}
