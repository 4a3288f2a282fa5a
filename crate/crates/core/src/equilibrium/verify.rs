//! Numerical check of the optimality conditions at a solved equilibrium:
//! generator equations and inequalities for player P's value, the sign
//! flip of the average-problem function for player C, and smooth fit.

use std::fmt;

use super::{Equilibrium, GameSpec};
use crate::levy_model::VariationClass;
use crate::numeric::{integrate_tol, linspace};

/// Tolerance on generator residuals.
pub const GENERATOR_TOL: f64 = 1e-5;
/// Tolerance on the first-order residuals `I` and `f_p - v_p` at the solution.
pub const FIRST_ORDER_TOL: f64 = 1e-8;
/// Step of the one-sided difference quotients used for smooth fit, divided
/// by the growth rate of `W^(q+lambda)` when that exceeds one.
pub const FIT_STEP: f64 = 1e-4;
/// Tolerance on derivative jumps (relative to the derivative's size).
pub const FIT_TOL: f64 = 1e-5;
/// Slack for pointwise inequalities.
const INEQ_SLACK: f64 = 1e-9;
/// Jump sizes beyond this carry weight below `e^{-beta * 30}`.
const JUMP_CUTOFF: f64 = 30.0;
const GRID: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed value of the checked quantity.
    pub value: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub a_star: f64,
    pub l_star: f64,
    pub checks: Vec<CheckResult>,
}

impl VerificationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "a* = {:.12}  l* = {:.12}", self.a_star, self.l_star)?;
        for c in &self.checks {
            writeln!(
                f,
                "{:<4} {:<40} value = {:.6e}  tol = {:.1e}",
                if c.passed { "ok" } else { "FAIL" },
                c.name,
                c.value,
                c.tolerance
            )?;
        }
        write!(
            f,
            "{}",
            if self.all_passed() {
                "all checks passed"
            } else {
                "verification failed"
            }
        )
    }
}

/// Runs every optimality check at `(eq.a_star, eq.l_star)`. Failures are
/// reported, never raised.
pub fn verify_equilibrium(spec: &GameSpec, eq: &Equilibrium) -> VerificationReport {
    let (a, l) = (eq.a_star, eq.l_star);
    let vp = PValue { spec, a, l };
    let mut checks = Vec::new();

    let max_abs =
        |it: &mut dyn Iterator<Item = f64>| it.fold(0.0f64, |m, v| if v.is_nan() { f64::NAN } else { m.max(v.abs()) });

    // First-order conditions.
    let i_res = spec.big_i(a, l).abs();
    checks.push(le("first-order C_a |I|", i_res, FIRST_ORDER_TOL));
    let j_res = (spec.f_p(l) - spec.v_p(l, a, l)).abs();
    checks.push(le("first-order C_l |f_p-v_p|", j_res, FIRST_ORDER_TOL));

    // Generator equations.
    let above = linspace(l, l + 3.0, GRID + 1);
    let r_above = max_abs(&mut above[1..].iter().map(|&x| vp.generator(x) - spec.q() * vp.value(x)));
    checks.push(le("generator (L-q)v_p above l*", r_above, GENERATOR_TOL));
    let below = linspace(a, l, GRID + 2);
    let ql = spec.q() + spec.lambda();
    let r_below = max_abs(
        &mut below[1..=GRID]
            .iter()
            .map(|&x| vp.generator(x) - ql * vp.value(x) + spec.lambda() * spec.f_p(x)),
    );
    checks.push(le("generator (L-q-lambda)v_p+lf_p", r_below, GENERATOR_TOL));

    // Inequalities.
    let worst_above = linspace(l, l + 5.0, 101)
        .into_iter()
        .map(|x| spec.f_p(x) - spec.v_p(x, a, l))
        .fold(f64::NEG_INFINITY, f64::max);
    checks.push(le("v_p >= f_p on [l*, l*+5]", worst_above, INEQ_SLACK));
    let worst_between = linspace(a, l, 101)
        .into_iter()
        .map(|x| spec.v_p(x, a, l) - spec.f_p(x))
        .fold(f64::NEG_INFINITY, f64::max);
    checks.push(le("v_p <= f_p on [a*, l*]", worst_between, INEQ_SLACK));
    let below_a = max_abs(&mut linspace(a - 5.0, a, 101).into_iter().map(|x| spec.v_p(x, a, l)));
    checks.push(le("v_p = 0 below a*", below_a, 0.0));

    // Sign flip of h_hat(y) = f_c(-y) + f_c'(-y) / Lambda(y) at y = -a*.
    let flip = hat_h_violation(spec, a, l);
    checks.push(le("h_hat sign flip at -a*", flip, 0.0));

    // Smooth fit.
    let h = FIT_STEP / spec.scales.w_ql.dominant_rate().max(1.0);
    let vc = |x: f64| spec.v_c(x, a, l);
    let (dl, dr) = one_sided(&vc, a, h);
    checks.push(le("v_c' continuous at a*", rel_jump(dl, dr), FIT_TOL));
    let (dl, dr) = one_sided(&vc, l, h);
    let kink = rel_jump(dl, dr);
    match spec.model().variation_class() {
        VariationClass::Unbounded => checks.push(le("v_c' continuous at l*", kink, FIT_TOL)),
        VariationClass::Bounded => checks.push(CheckResult {
            name: "v_c' kinked at l*",
            passed: kink > FIT_TOL,
            value: kink,
            tolerance: FIT_TOL,
        }),
    }
    let (dl, dr) = one_sided(&|x| spec.v_p(x, a, l), l, h);
    checks.push(le("v_p' continuous at l*", rel_jump(dl, dr), FIT_TOL));

    // v_c decreasing and convex above a*.
    let xs = linspace(a, a + 5.0, 501);
    let vals: Vec<f64> = xs.iter().map(|&x| vc(x)).collect();
    let rise = vals.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    checks.push(le("v_c decreasing above a*", rise, 0.0));
    let scale = vals[0].abs().max(1.0);
    let concavity = vals
        .windows(3)
        .map(|w| -(w[2] - 2.0 * w[1] + w[0]) / scale)
        .fold(f64::NEG_INFINITY, f64::max);
    checks.push(le("v_c convex above a*", concavity, 1e-12));

    VerificationReport {
        a_star: a,
        l_star: l,
        checks,
    }
}

fn le(name: &'static str, value: f64, tolerance: f64) -> CheckResult {
    CheckResult {
        name,
        passed: value <= tolerance,
        value,
        tolerance,
    }
}

fn rel_jump(dl: f64, dr: f64) -> f64 {
    (dr - dl).abs() / dl.abs().max(dr.abs()).max(1.0)
}

/// Second-order one-sided difference quotients at `x`.
pub(crate) fn one_sided(f: &dyn Fn(f64) -> f64, x: f64, h: f64) -> (f64, f64) {
    let left = (3.0 * f(x) - 4.0 * f(x - h) + f(x - 2.0 * h)) / (2.0 * h);
    let right = (-3.0 * f(x) + 4.0 * f(x + h) - f(x + 2.0 * h)) / (2.0 * h);
    (left, right)
}

/// Largest violation of `h_hat <= 0` for `y < -a*` and `h_hat > 0` for
/// `y > -a*`; zero when the sign pattern holds.
fn hat_h_violation(spec: &GameSpec, a: f64, l: f64) -> f64 {
    let rc = spec.reward_c();
    let h_hat = |y: f64| {
        let hazard = spec.phi() + spec.lambda() * spec.scales.w_over_z(l + y);
        rc.value(-y) + rc.derivative(-y) / hazard
    };
    let center = -a;
    let mut worst = 0.0f64;
    for y in linspace(center - 2.0, center + 2.0, 401) {
        if (y - center).abs() < 1e-6 {
            continue;
        }
        let v = h_hat(y);
        let bad = if y < center {
            v.max(0.0)
        } else {
            (-v).max(0.0) + if v == 0.0 { f64::MIN_POSITIVE } else { 0.0 }
        };
        worst = worst.max(bad);
    }
    worst
}

/// Player P's value at fixed thresholds with analytic derivatives.
struct PValue<'a> {
    spec: &'a GameSpec,
    a: f64,
    l: f64,
}

impl PValue<'_> {
    fn value(&self, x: f64) -> f64 {
        self.spec.v_p(x, self.a, self.l)
    }

    /// `(v_p'(x), v_p''(x))` for `x > a`, `x != l`.
    fn derivatives(&self, x: f64) -> (f64, f64) {
        let s = self.spec;
        let (a, l) = (self.a, self.l);
        let lam = s.lambda();
        let lead = s.gamma_over_z(a, l);
        if x > l {
            let v = lam * lead * (s.phi() * (l - x)).exp();
            return (-s.phi() * v, s.phi() * s.phi() * v);
        }
        let sc = &s.scales;
        let fl = s.f_p(l);
        let rp = s.reward_p();
        let y = l - x;
        let d1 = -lead * sc.z_ql.derivative(y) + fl * sc.w_ql.eval(y) - sc.gamma_of_derivative(rp, x, l);
        let d2 = lead * sc.z_ql.second_derivative(y) - fl * sc.w_ql.derivative(y) + rp.derivative(l) * sc.w_ql.eval(y)
            - sc.gamma_of_second_derivative(rp, x, l);
        (lam * d1, lam * d2)
    }

    /// Generator in the truncated-compensator form.
    fn generator(&self, x: f64) -> f64 {
        let m = self.spec.model();
        let (alpha, beta) = (m.alpha(), m.beta());
        let gamma = m.mu() - alpha * (1.0 - (1.0 + beta) * (-beta).exp()) / beta;
        let v = self.value(x);
        let (d1, d2) = self.derivatives(x);
        let integrand = |z: f64| {
            let comp = if z < 1.0 { d1 * z } else { 0.0 };
            (self.value(x + z) - v - comp) * alpha * beta * (-beta * z).exp()
        };
        let mut cuts = vec![0.0, 1.0, JUMP_CUTOFF];
        if self.l - x > 0.0 && self.l - x < JUMP_CUTOFF {
            cuts.push(self.l - x);
        }
        cuts.sort_by(f64::total_cmp);
        let jumps: f64 = cuts
            .windows(2)
            .map(|w| integrate_tol(integrand, w[0], w[1], 1e-11))
            .sum();
        -gamma * d1 + 0.5 * m.nu() * m.nu() * d2 + jumps
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy_model::LevyModel;

    #[test]
    fn one_sided_differences_are_second_order() {
        let (l, r) = one_sided(&|x: f64| x.exp(), 0.0, FIT_STEP);
        assert!((l - 1.0).abs() < 1e-7 && (r - 1.0).abs() < 1e-7);
        let (l, r) = one_sided(&|x: f64| x.abs(), 0.0, FIT_STEP);
        assert!((l + 1.0).abs() < 1e-12 && (r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn analytic_derivatives_match_differences() {
        let s = GameSpec::default();
        let (a, l) = (30f64.ln(), 38f64.ln());
        let p = PValue { spec: &s, a, l };
        let h = 1e-5;
        for x in [3.45, 3.55, 3.62, 3.7, 4.0] {
            let (d1, d2) = p.derivatives(x);
            let fd1 = (p.value(x + h) - p.value(x - h)) / (2.0 * h);
            let fd2 = (p.value(x + h) - 2.0 * p.value(x) + p.value(x - h)) / (h * h);
            assert!((d1 - fd1).abs() < 1e-6 * d1.abs().max(1.0), "x = {x}: {d1} vs {fd1}");
            assert!((d2 - fd2).abs() < 1e-3 * d2.abs().max(1.0), "x = {x}: {d2} vs {fd2}");
        }
    }

    #[test]
    fn case_study_passes() {
        let s = GameSpec::default();
        let eq = s.solve_equilibrium().unwrap();
        let report = verify_equilibrium(&s, &eq);
        assert!(report.all_passed(), "{report}");
    }

    #[test]
    fn bounded_variation_model_passes_with_kink() {
        let m = LevyModel::new(0.5, 0.0, 1.0, 2.0).unwrap();
        let s = GameSpec::puts(m, 0.05, 1.0, 50.0, 60.0).unwrap();
        let eq = s.solve_equilibrium().unwrap();
        let report = verify_equilibrium(&s, &eq);
        assert!(report.all_passed(), "{report}");
        assert!(report.check("v_c' kinked at l*").unwrap().passed);
    }

    #[test]
    fn shifted_a_star_fails_first_order_check() {
        let s = GameSpec::default();
        let mut eq = s.solve_equilibrium().unwrap();
        eq.a_star += 0.1;
        let report = verify_equilibrium(&s, &eq);
        assert!(!report.check("first-order C_a |I|").unwrap().passed);
        assert!(!report.all_passed());
    }
}
