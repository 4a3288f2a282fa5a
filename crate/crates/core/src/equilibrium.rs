//! Threshold-strategy values, first-order functions and the equilibrium
//! solver.
//!
//! Player C stops at `tau_a^-`, the first time `X < a`; player P stops at
//! `T_l^-`, the first Poisson observation with `X < l`. With
//! `Z(y) = Z^(q+lambda)(y; Phi(q))` and `W = W^(q+lambda)`:
//!
//! ```text
//! v_c(x; a, l) = f_c(a) Z(l-x) / Z(l-a)                          x > a
//! v_p(x; a, l) = lambda (Z(l-x) / Z(l-a) Gamma(a; l) - Gamma(x; l))  x > a
//! I(a; l)      = f_c'(a) + (Phi(q) + lambda W(l-a) / Z(l-a)) f_c(a)
//! J(l; a)      = f_p(l) Z(l-a) - lambda Gamma(a; l)
//! ```
//!
//! `I(.; l) = 0` is player C's best response `a~(l)`, `J(.; a) = 0` is
//! player P's best response `l~(a)`, and an equilibrium is a root of
//! `l -> J(l; a~(l))`.

mod verify;

use rayon::prelude::*;

use crate::error::{check_positive, domain, Error, Result};
use crate::levy_model::LevyModel;
use crate::numeric::{bisect, linspace};
use crate::rewards::{self, GameRewards, Level, Player, Reward};
use crate::scale::ScaleSet;

pub use verify::{verify_equilibrium, CheckResult, VerificationReport};

/// Points of the uniform scan for sign changes of `J(l; a~(l))`.
pub const SCAN_POINTS: usize = 2000;
/// Inset of the scan interval from `x_c` and `x_bar_p`.
pub const SCAN_INSET: f64 = 1e-9;
/// Gap tolerance of the value-of-information bisection.
pub const VOI_TOL: f64 = 1e-6;
/// Coarse grid used to check monotonicity of the gap in `K_c`.
pub const VOI_GRID: usize = 16;

/// Scan settings of [`GameSpec::solve_equilibrium`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub scan_points: usize,
    pub scan_inset: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            scan_points: SCAN_POINTS,
            scan_inset: SCAN_INSET,
        }
    }
}

/// Model, discount rate, observation rate and rewards, with the scale
/// functions and reward roots precomputed.
#[derive(Debug, Clone)]
pub struct GameSpec {
    options: SolverOptions,
    model: LevyModel,
    q: f64,
    lambda: f64,
    rewards: GameRewards,
    scales: ScaleSet,
    x_bar_c: f64,
    x_bar_p: f64,
    a_underbar: f64,
    x_under_c: f64,
    x_under_p: Level,
}

impl GameSpec {
    pub fn new(model: LevyModel, q: f64, lambda: f64, rewards: GameRewards) -> Result<Self> {
        check_positive("q", q)?;
        check_positive("lambda", lambda)?;
        let scales = ScaleSet::new(&model, q, lambda)?;
        let rc = rewards.reward_c.as_ref();
        let rp = rewards.reward_p.as_ref();
        let a_underbar = rewards::a_underbar(&model, q, rc)?;
        let x_under_c = rewards::x_under(&model, q, lambda, rc, Player::C)?
            .finite()
            .ok_or(Error::NoFiniteRoot { what: "h_c" })?;
        let x_under_p = rewards::x_under(&model, q, lambda, rp, Player::P)?;
        Ok(GameSpec {
            options: SolverOptions::default(),
            x_bar_c: rc.zero(),
            x_bar_p: rp.zero(),
            model,
            q,
            lambda,
            rewards,
            scales,
            a_underbar,
            x_under_c,
            x_under_p,
        })
    }

    /// Put rewards with strikes `k_c < k_p`.
    pub fn puts(model: LevyModel, q: f64, lambda: f64, k_c: f64, k_p: f64) -> Result<Self> {
        Self::new(model, q, lambda, GameRewards::puts(k_c, k_p)?)
    }

    /// Same game with another observation rate.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Ok(Self::new(self.model, self.q, lambda, self.rewards.clone())?.with_options(self.options))
    }

    /// Same game with other rewards.
    pub fn with_rewards(&self, rewards: GameRewards) -> Result<Self> {
        Ok(Self::new(self.model, self.q, self.lambda, rewards)?.with_options(self.options))
    }

    pub fn with_options(mut self, options: SolverOptions) -> Self {
        self.options = options;
        self
    }

    pub fn options(&self) -> &SolverOptions {
        &self.options
    }

    pub fn model(&self) -> &LevyModel {
        &self.model
    }
    pub fn q(&self) -> f64 {
        self.q
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn rewards(&self) -> &GameRewards {
        &self.rewards
    }
    pub fn scales(&self) -> &ScaleSet {
        &self.scales
    }
    pub fn phi(&self) -> f64 {
        self.scales.phi
    }
    pub fn x_bar_c(&self) -> f64 {
        self.x_bar_c
    }
    pub fn x_bar_p(&self) -> f64 {
        self.x_bar_p
    }
    pub fn a_underbar(&self) -> f64 {
        self.a_underbar
    }
    pub fn x_under_c(&self) -> f64 {
        self.x_under_c
    }
    pub fn x_under_p(&self) -> Level {
        self.x_under_p
    }

    pub fn f_c(&self, x: f64) -> f64 {
        self.rewards.reward_c.value(x)
    }
    pub fn f_p(&self, x: f64) -> f64 {
        self.rewards.reward_p.value(x)
    }
    pub fn reward_c(&self) -> &dyn Reward {
        self.rewards.reward_c.as_ref()
    }
    pub fn reward_p(&self) -> &dyn Reward {
        self.rewards.reward_p.as_ref()
    }

    fn z(&self, y: f64) -> f64 {
        self.scales.z_ql.eval(y)
    }

    fn z_ratio(&self, y1: f64, y2: f64) -> f64 {
        self.scales.z_ql.ratio(y1, y2)
    }

    fn gamma(&self, x: f64, l: f64) -> f64 {
        self.scales.gamma(self.reward_p(), x, l)
    }

    /// `Gamma(a; l) / Z(l - a)` with a common exponential shift.
    fn gamma_over_z(&self, a: f64, l: f64) -> f64 {
        let shift = self.scales.z_ql.shift_for(l - a);
        self.scales.gamma_scaled(self.reward_p(), a, l, shift) / self.scales.z_ql.eval_scaled(l - a, shift)
    }

    // -----------------------------------------------------------------------
    // Values

    /// Player C's value; falls back to the single-player value when `l < a`.
    pub fn v_c(&self, x: f64, a: f64, l: f64) -> f64 {
        if x <= a {
            return self.f_c(x);
        }
        if l < a {
            return (self.phi() * (a - x)).exp() * self.f_c(a);
        }
        self.f_c(a) * self.z_ratio(l - x, l - a)
    }

    pub fn v_p(&self, x: f64, a: f64, l: f64) -> f64 {
        if x <= a || l <= a {
            return 0.0;
        }
        let lead = self.gamma_over_z(a, l);
        if x >= l {
            return self.lambda * lead * (self.phi() * (l - x)).exp();
        }
        self.lambda * (self.z(l - x) * lead - self.gamma(x, l))
    }

    /// Values with additional killing at the first passage above `b`.
    pub fn v_c_finite(&self, x: f64, a: f64, l: f64, b: f64) -> Result<f64> {
        check_wedge(a, l, b)?;
        if x <= a {
            return Ok(self.f_c(x));
        }
        let s = &self.scales;
        Ok(self.f_c(a) * s.script_w(b - l, l - x) / s.script_w(b - l, l - a))
    }

    pub fn v_p_finite(&self, x: f64, a: f64, l: f64, b: f64) -> Result<f64> {
        check_wedge(a, l, b)?;
        if x <= a || l == a {
            return Ok(0.0);
        }
        let s = &self.scales;
        let ratio = s.script_w(b - l, l - x) / s.script_w(b - l, l - a);
        Ok(self.lambda * (ratio * self.gamma(a, l) - self.gamma(x, l)))
    }

    // -----------------------------------------------------------------------
    // First-order functions

    /// `I(a; l)`. For `a > l` this reduces to `h_c^o(a)`.
    pub fn big_i(&self, a: f64, l: f64) -> f64 {
        let rc = self.reward_c();
        let weight = self.phi() + self.lambda * self.scales.w_over_z(l - a);
        rc.derivative(a) + weight * rc.value(a)
    }

    /// `J(l; a)`.
    pub fn big_j(&self, l: f64, a: f64) -> f64 {
        self.f_p(l) * self.z(l - a) - self.lambda * self.gamma(a, l)
    }

    /// `J(l; a) / Z(l - a) = f_p(l) - v_p(l; a, l)`: same sign as `J`,
    /// bounded in `lambda`.
    pub fn big_j_normalized(&self, l: f64, a: f64) -> f64 {
        if l <= a {
            return self.f_p(l);
        }
        self.f_p(l) - self.lambda * self.gamma_over_z(a, l)
    }

    /// `d/da v_c(x; a, l)` for `a < l` and `a < x`.
    pub fn dv_c_da(&self, x: f64, a: f64, l: f64) -> Result<f64> {
        if !(a < l && a < x) {
            return Err(domain(
                "dv_c_da",
                format!("need a < min(l, x) (x = {x}, a = {a}, l = {l})"),
            ));
        }
        Ok(self.z_ratio(l - x, l - a) * self.big_i(a, l))
    }

    /// `d/dl v_p(x; a, l)` for `x >= a`, `l > a`, `l != x`.
    pub fn dv_p_dl(&self, x: f64, a: f64, l: f64) -> Result<f64> {
        if !(x >= a && l > a && l != x) {
            return Err(domain(
                "dv_p_dl",
                format!("need x >= a, l > a, l != x (x = {x}, a = {a}, l = {l})"),
            ));
        }
        let w = &self.scales.w_ql;
        let shift = self.scales.z_ql.shift_for(l - a);
        let lead = self.scales.z_ql.eval_scaled(l - x, shift) * w.eval_scaled(l - a, shift)
            / self.scales.z_ql.eval_scaled(l - a, shift);
        let gap = self.f_p(l) - self.v_p(l, a, l);
        Ok(self.lambda * (lead - w.eval(l - x)) * gap)
    }

    // -----------------------------------------------------------------------
    // Best responses

    /// Player C's best response `a~(l)`: the zero of `I(.; l)` on
    /// `[x_c, min(x_bar_c, l)]`.
    pub fn best_response_a(&self, l: f64) -> Result<f64> {
        if l.is_nan() || l < self.x_under_c {
            return Err(Error::NoBestResponse {
                l,
                x_under_c: self.x_under_c,
            });
        }
        let lo = self.x_under_c;
        let hi = self.x_bar_c.min(l);
        if hi <= lo {
            return Ok(lo);
        }
        Ok(bisect(|a| self.big_i(a, l), lo, hi, 0.0))
    }

    /// Player P's best response `l~(a)`: the zero of `J(.; a)` on
    /// `[max(x_p, a), x_bar_p]`.
    pub fn best_response_l(&self, a: f64) -> Result<f64> {
        if a.is_nan() || a >= self.x_bar_p {
            return Err(domain(
                "best_response_l",
                format!("a = {a} must be below x_bar_p = {}", self.x_bar_p),
            ));
        }
        let lo = self.x_under_p.max_with(a);
        Ok(bisect(|l| self.big_j_normalized(l, a), lo, self.x_bar_p, 0.0))
    }

    /// Scan function `f_p(l) - v_p(l; a~(l), l)`, signed like `J(l; a~(l))`.
    fn scan_value(&self, l: f64) -> Result<f64> {
        let a = self.best_response_a(l)?;
        Ok(self.big_j_normalized(l, a))
    }

    // -----------------------------------------------------------------------
    // Equilibrium

    /// Scans `l -> J(l; a~(l))` on a uniform grid over `(x_c, x_bar_p)`,
    /// bisects every sign change and selects the smallest root.
    pub fn solve_equilibrium(&self) -> Result<Equilibrium> {
        let lo = self.x_under_c + self.options.scan_inset;
        let hi = self.x_bar_p - self.options.scan_inset;
        let err = Error::NoSignChange { lo, hi };
        if !(lo < hi) || self.options.scan_points < 2 {
            return Err(err);
        }
        // Endpoint signs: J(x_c; a~(x_c)) = f_p(x_c) > 0 and J(x_bar_p; .) < 0.
        if !(self.f_p(self.x_under_c) > 0.0) || !(self.scan_value(self.x_bar_p)? < 0.0) {
            return Err(err);
        }
        let grid = linspace(lo, hi, self.options.scan_points);
        let values = grid.iter().map(|&l| self.scan_value(l)).collect::<Result<Vec<_>>>()?;
        let mut brackets = Vec::new();
        for i in 0..grid.len() - 1 {
            let (g0, g1) = (values[i], values[i + 1]);
            if g0 == 0.0 {
                brackets.push((grid[i], grid[i]));
            } else if (g0 > 0.0) != (g1 > 0.0) && g1 != 0.0 {
                brackets.push((grid[i], grid[i + 1]));
            }
        }
        if values[grid.len() - 1] == 0.0 {
            brackets.push((hi, hi));
        }
        if brackets.is_empty() {
            return Err(err);
        }
        let mut all_roots = Vec::with_capacity(brackets.len());
        for &(b0, b1) in &brackets {
            let root = if b0 == b1 {
                b0
            } else {
                bisect(|l| self.scan_value(l).unwrap_or(f64::NAN), b0, b1, 0.0)
            };
            all_roots.push(root);
        }
        let l_star = all_roots[0];
        let a_star = self.best_response_a(l_star)?;
        let pareto_minimal = all_roots[1..].iter().try_fold(true, |ok, &l| -> Result<bool> {
            let a = self.best_response_a(l)?;
            Ok(ok && self.dominates((a_star, l_star), (a, l)))
        })?;
        Ok(Equilibrium {
            a_star,
            l_star,
            i_residual: self.big_i(a_star, l_star),
            j_residual: self.big_j(l_star, a_star),
            all_roots,
            brackets,
            pareto_minimal,
        })
    }

    /// Whether both players weakly prefer `first` to `second` on a grid.
    fn dominates(&self, first: (f64, f64), second: (f64, f64)) -> bool {
        let lo = first.0.min(second.0) - 1.0;
        let hi = self.x_bar_p + 1.0;
        linspace(lo, hi, 200).into_iter().all(|x| {
            self.v_c(x, first.0, first.1) >= self.v_c(x, second.0, second.1) - 1e-12
                && self.v_p(x, first.0, first.1) >= self.v_p(x, second.0, second.1) - 1e-12
        })
    }
}

fn check_wedge(a: f64, l: f64, b: f64) -> Result<()> {
    if a <= l && l <= b {
        Ok(())
    } else {
        Err(domain(
            "finite-horizon value",
            format!("need a <= l <= b (a = {a}, l = {l}, b = {b})"),
        ))
    }
}

impl Default for GameSpec {
    /// The put case study: `K_c = 50`, `K_p = 60`, `q = 0.05`, `lambda = 1`.
    fn default() -> Self {
        GameSpec::puts(LevyModel::default(), 0.05, 1.0, 50.0, 60.0).expect("case-study parameters are valid")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub a_star: f64,
    pub l_star: f64,
    /// `I(a*; l*)`.
    pub i_residual: f64,
    /// `J(l*; a*)`.
    pub j_residual: f64,
    /// Every root of `J(l; a~(l))` resolved by the scan, ascending.
    pub all_roots: Vec<f64>,
    /// Scan brackets that contained a sign change.
    pub brackets: Vec<(f64, f64)>,
    /// The selected (minimal) root is weakly preferred by both players.
    pub pareto_minimal: bool,
}

// ---------------------------------------------------------------------------
// Value of information

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueOfInformation {
    /// `K_p - K_c` at the balancing strike.
    pub delta: f64,
    pub k_c: f64,
    /// `v_c - v_p` at the returned strike.
    pub gap: f64,
}

/// Reward gap `K_p - K_c` at which `v_c(x; a*, l*) = v_p(x; a*, l*)`.
/// The template must have put rewards; its `K_c` is ignored and replaced
/// by the bisection variable on `(1, K_p)`.
pub fn value_of_information(template: &GameSpec, x: f64) -> Result<ValueOfInformation> {
    let k_p = match template.reward_p().exp_affine() {
        Some((c0, -1.0)) => c0,
        _ => {
            return Err(Error::InvalidParameter {
                name: "reward_p",
                value: f64::NAN,
                reason: "value of information needs put rewards",
            })
        }
    };
    if !(k_p > 1.0) {
        return Err(Error::InvalidParameter {
            name: "k_p",
            value: k_p,
            reason: "must exceed 1",
        });
    }
    let gap = |k_c: f64| -> Result<f64> {
        let spec = template.with_rewards(GameRewards::puts(k_c, k_p)?)?;
        let eq = spec.solve_equilibrium()?;
        Ok(spec.v_c(x, eq.a_star, eq.l_star) - spec.v_p(x, eq.a_star, eq.l_star))
    };
    let width = k_p - 1.0;
    let lo = 1.0 + 1e-6 * width;
    let hi = k_p - 1e-6 * width;
    let grid = linspace(lo, hi, VOI_GRID);
    let values = grid.iter().map(|&k| gap(k)).collect::<Result<Vec<_>>>()?;
    // Flat stretches (l* pinned at its lower bound) carry rounding noise.
    let slack = 1e-9 * values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let increasing = values.windows(2).all(|w| w[1] >= w[0] - slack);
    let decreasing = values.windows(2).all(|w| w[1] <= w[0] + slack);
    if !increasing && !decreasing {
        return Err(Error::NotMonotone {
            what: "v_c - v_p in K_c",
        });
    }
    let Some(i) = values
        .windows(2)
        .position(|w| (w[0] > 0.0) != (w[1] > 0.0) || w[0] == 0.0)
    else {
        return Err(Error::NoBracket {
            what: "v_c - v_p in K_c",
            lo,
            hi,
        });
    };
    // Bisect on the sign of the gap down to the resolution of K_c; the
    // gap tolerance is then checked on the closer endpoint.
    let (mut k0, mut k1) = (grid[i], grid[i + 1]);
    let (mut g0, mut g1) = (values[i], values[i + 1]);
    while g0 != 0.0 && g1 != 0.0 {
        let mid = 0.5 * (k0 + k1);
        if mid <= k0 || mid >= k1 {
            break;
        }
        let gm = gap(mid)?;
        if (gm > 0.0) == (g0 > 0.0) {
            k0 = mid;
            g0 = gm;
        } else {
            k1 = mid;
            g1 = gm;
        }
    }
    let (k, g) = if g0.abs() <= g1.abs() { (k0, g0) } else { (k1, g1) };
    if g.abs() > VOI_TOL {
        return Err(Error::NoBracket {
            what: "v_c - v_p in K_c (gap above tolerance)",
            lo: k0,
            hi: k1,
        });
    }
    Ok(ValueOfInformation {
        delta: k_p - k,
        k_c: k,
        gap: g,
    })
}

// ---------------------------------------------------------------------------
// Sweep over the observation rate

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub lambda: f64,
    pub equilibrium: Equilibrium,
    /// `v_c(x; a*, l*)` on the sweep's x-grid.
    pub v_c: Vec<f64>,
    /// `v_p(x; a*, l*)` on the sweep's x-grid.
    pub v_p: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub xs: Vec<f64>,
    pub rows: Vec<SweepRow>,
    /// `(lambda, x)` pairs where `v_c` increased from the previous lambda.
    pub v_c_increases: Vec<(f64, f64)>,
}

impl Sweep {
    pub fn v_c_monotone(&self) -> bool {
        self.v_c_increases.is_empty()
    }
}

/// Equilibria for each `lambda` (evaluated in parallel) with curves on `xs`.
pub fn sweep_lambda(template: &GameSpec, lambdas: &[f64], xs: &[f64]) -> Result<Sweep> {
    if lambdas.is_empty() {
        return Err(domain("sweep_lambda", "empty lambda list"));
    }
    if lambdas.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(domain("sweep_lambda", "lambda list must be strictly increasing"));
    }
    let rows = lambdas
        .par_iter()
        .map(|&lambda| -> Result<SweepRow> {
            let spec = template.with_lambda(lambda)?;
            let eq = spec.solve_equilibrium()?;
            let v_c = xs.iter().map(|&x| spec.v_c(x, eq.a_star, eq.l_star)).collect();
            let v_p = xs.iter().map(|&x| spec.v_p(x, eq.a_star, eq.l_star)).collect();
            Ok(SweepRow {
                lambda,
                equilibrium: eq,
                v_c,
                v_p,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut v_c_increases = Vec::new();
    for pair in rows.windows(2) {
        for (j, &x) in xs.iter().enumerate() {
            if pair[1].v_c[j] > pair[0].v_c[j] + 1e-12 {
                v_c_increases.push((pair[1].lambda, x));
            }
        }
    }
    Ok(Sweep {
        xs: xs.to_vec(),
        rows,
        v_c_increases,
    })
}
