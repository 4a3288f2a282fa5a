//! Stopping rewards and the auxiliary functions whose sign changes bound
//! the equilibrium thresholds.
//!
//! A reward must be strictly decreasing, C^1 and concave on the whole real
//! line with a single zero `x_bar`. For every `k > 0` the function
//! `k f(x) + f'(x)` is then decreasing and negative at `x_bar`, so it has a
//! sign-change point in `[-inf, x_bar)`:
//!
//! * `h_c^o = Phi(q) f_c + f_c'`            -> `a_underbar` (single-player threshold)
//! * `h_c = (Phi(q) + lambda W^(q+lambda)(0)) f_c + f_c'` -> `x_c`
//! * `h_p = Phi(q) f_p + f_p'`              -> `x_p`

use std::fmt;
use std::sync::Arc;

use crate::error::{check_positive, Error, Result};
use crate::levy_model::{LevyModel, VariationClass};
use crate::numeric::{bisect, linspace};

/// Step for finite-difference fallbacks of reward derivatives.
pub const FD_STEP: f64 = 1e-5;

pub trait Reward: Send + Sync + fmt::Debug {
    fn value(&self, x: f64) -> f64;

    fn derivative(&self, x: f64) -> f64;

    fn second_derivative(&self, x: f64) -> f64 {
        (self.derivative(x + FD_STEP) - self.derivative(x - FD_STEP)) / (2.0 * FD_STEP)
    }

    /// The unique zero `x_bar` of the reward.
    fn zero(&self) -> f64 {
        let mut lo = -1.0;
        let mut hi = 1.0;
        while self.value(lo) <= 0.0 && lo > -1e6 {
            lo *= 2.0;
        }
        while self.value(hi) >= 0.0 && hi < 1e6 {
            hi *= 2.0;
        }
        bisect(|x| self.value(x), lo, hi, 1e-14)
    }

    /// `Some((c0, c1))` when `f(x) = c0 + c1 e^x`. Enables closed-form
    /// integrals against scale functions.
    fn exp_affine(&self) -> Option<(f64, f64)> {
        None
    }
}

/// Put payoff `K - e^x` on the log price.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Put {
    strike: f64,
}

impl Put {
    pub fn new(strike: f64) -> Result<Self> {
        check_positive("strike", strike)?;
        Ok(Put { strike })
    }

    pub fn strike(&self) -> f64 {
        self.strike
    }
}

impl Reward for Put {
    fn value(&self, x: f64) -> f64 {
        self.strike - x.exp()
    }
    fn derivative(&self, x: f64) -> f64 {
        -x.exp()
    }
    fn second_derivative(&self, x: f64) -> f64 {
        -x.exp()
    }
    fn zero(&self) -> f64 {
        self.strike.ln()
    }
    fn exp_affine(&self) -> Option<(f64, f64)> {
        Some((self.strike, -1.0))
    }
}

/// Rewards of the continuously observing player (C) and the periodically
/// observing player (P).
#[derive(Debug, Clone)]
pub struct GameRewards {
    pub reward_c: Arc<dyn Reward>,
    pub reward_p: Arc<dyn Reward>,
}

impl GameRewards {
    /// Checks `f_c < f_p` on a grid around both zeros.
    pub fn new(reward_c: Arc<dyn Reward>, reward_p: Arc<dyn Reward>) -> Result<Self> {
        let (zc, zp) = (reward_c.zero(), reward_p.zero());
        let grid = linspace(zc.min(zp) - 10.0, zc.max(zp) + 10.0, 401);
        if let Some(&x) = grid.iter().find(|&&x| reward_c.value(x) >= reward_p.value(x)) {
            return Err(Error::InvalidParameter {
                name: "rewards",
                value: x,
                reason: "f_c must lie strictly below f_p",
            });
        }
        Ok(GameRewards { reward_c, reward_p })
    }

    pub fn puts(k_c: f64, k_p: f64) -> Result<Self> {
        let c = Put::new(k_c)?;
        let p = Put::new(k_p)?;
        if !(k_c < k_p) {
            return Err(Error::InvalidParameter {
                name: "k_c",
                value: k_c,
                reason: "must be below k_p",
            });
        }
        Self::new(Arc::new(c), Arc::new(p))
    }
}

/// A threshold that may be `-inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Level {
    NegInfinity,
    Finite(f64),
}

impl Level {
    pub fn finite(self) -> Option<f64> {
        match self {
            Level::Finite(v) => Some(v),
            Level::NegInfinity => None,
        }
    }

    /// `max(self, x)`.
    pub fn max_with(self, x: f64) -> f64 {
        match self {
            Level::Finite(v) => v.max(x),
            Level::NegInfinity => x,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Player {
    C,
    P,
}

pub fn x_bar(reward: &dyn Reward) -> f64 {
    reward.zero()
}

/// Sign-change point of `k f + f'` (decreasing, negative at `x_bar`).
pub(crate) fn weighted_root(reward: &dyn Reward, k: f64) -> Level {
    if let Some((c0, c1)) = reward.exp_affine() {
        // k c0 + (k + 1) c1 e^x = 0
        let ratio = -k * c0 / ((k + 1.0) * c1);
        return if ratio > 0.0 {
            Level::Finite(ratio.ln())
        } else {
            Level::NegInfinity
        };
    }
    weighted_root_bisection(reward, k)
}

pub(crate) fn weighted_root_bisection(reward: &dyn Reward, k: f64) -> Level {
    let h = |x: f64| k * reward.value(x) + reward.derivative(x);
    let upper = reward.zero();
    let mut step = 0.5;
    let mut hi = upper;
    let mut lo = upper - step;
    while h(lo) <= 0.0 {
        if step > 1e4 {
            return Level::NegInfinity;
        }
        hi = lo;
        step *= 2.0;
        lo = upper - step;
    }
    Level::Finite(bisect(h, lo, hi, 1e-14))
}

pub fn h_c_o(model: &LevyModel, q: f64, reward_c: &dyn Reward, x: f64) -> Result<f64> {
    let phi = model.phi(q)?;
    Ok(phi * reward_c.value(x) + reward_c.derivative(x))
}

/// Single-player threshold: sign change of `h_c^o`.
pub fn a_underbar(model: &LevyModel, q: f64, reward_c: &dyn Reward) -> Result<f64> {
    let phi = model.phi(q)?;
    weighted_root(reward_c, phi)
        .finite()
        .ok_or(Error::NoFiniteRoot { what: "h_c^o" })
}

/// `Phi(q) + lambda W^(q+lambda)(0)`.
pub(crate) fn c_weight(model: &LevyModel, phi: f64, lambda: f64) -> f64 {
    match model.variation_class() {
        VariationClass::Unbounded => phi,
        VariationClass::Bounded => phi + lambda / model.mu(),
    }
}

pub fn h_c(model: &LevyModel, q: f64, lambda: f64, reward_c: &dyn Reward, x: f64) -> Result<f64> {
    check_positive("lambda", lambda)?;
    let k = c_weight(model, model.phi(q)?, lambda);
    Ok(k * reward_c.value(x) + reward_c.derivative(x))
}

pub fn h_p(model: &LevyModel, q: f64, reward_p: &dyn Reward, x: f64) -> Result<f64> {
    h_c_o(model, q, reward_p, x)
}

/// Sign-change point `x_c` (of `h_c`) or `x_p` (of `h_p`).
pub fn x_under(model: &LevyModel, q: f64, lambda: f64, reward: &dyn Reward, which: Player) -> Result<Level> {
    check_positive("lambda", lambda)?;
    let phi = model.phi(q)?;
    match which {
        Player::C => {
            let level = weighted_root(reward, c_weight(model, phi, lambda));
            match level {
                Level::Finite(_) => Ok(level),
                Level::NegInfinity => Err(Error::NoFiniteRoot { what: "h_c" }),
            }
        }
        Player::P => Ok(weighted_root(reward, phi)),
    }
}

/// Value of stopping at `tau_a^-` with no opponent.
pub fn v_single_player(model: &LevyModel, q: f64, reward_c: &dyn Reward, x: f64, a: f64) -> Result<f64> {
    if x <= a {
        return Ok(reward_c.value(x));
    }
    let phi = model.phi(q)?;
    Ok((phi * (a - x)).exp() * reward_c.value(a))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Linear reward `K - x`; no exponential-affine form.
    #[derive(Debug)]
    struct Linear(f64);
    impl Reward for Linear {
        fn value(&self, x: f64) -> f64 {
            self.0 - x
        }
        fn derivative(&self, _x: f64) -> f64 {
            -1.0
        }
    }

    #[test]
    fn put_zero_is_log_strike() {
        assert_eq!(x_bar(&Put::new(50.0).unwrap()), 50f64.ln());
        assert_eq!(x_bar(&Put::new(60.0).unwrap()), 60f64.ln());
        assert_eq!(x_bar(&Put::new(1.0).unwrap()), 0.0);
        assert!(Put::new(0.0).is_err());
    }

    #[test]
    fn generic_zero_by_bisection() {
        assert!((x_bar(&Linear(3.0)) - 3.0).abs() < 1e-12);
        assert!((Linear(3.0).second_derivative(0.0)).abs() < 1e-12);
    }

    #[test]
    fn put_shape_invariants() {
        let put = Put::new(50.0).unwrap();
        let xb = put.zero();
        assert!(put.value(xb - 0.1) > 0.0 && put.value(xb + 0.1) < 0.0);
        for x in linspace(-5.0, 6.0, 100) {
            assert!(put.derivative(x) < 0.0);
            assert!(put.second_derivative(x) <= 0.0);
        }
    }

    #[test]
    fn dominance_is_enforced() {
        assert!(GameRewards::puts(50.0, 60.0).is_ok());
        assert!(GameRewards::puts(60.0, 50.0).is_err());
        assert!(GameRewards::puts(60.0, 60.0).is_err());
        assert!(GameRewards::new(Arc::new(Linear(4.0)), Arc::new(Linear(3.0))).is_err());
    }

    #[test]
    fn h_functions_hand_arithmetic() {
        // Phi = 1: h(x) = 50 - 2 e^x, root log 25.
        let put = Put::new(50.0).unwrap();
        match weighted_root(&put, 1.0) {
            Level::Finite(v) => assert!((v - 25f64.ln()).abs() < 1e-14),
            Level::NegInfinity => panic!(),
        }
        let m = LevyModel::default();
        let xb = put.zero();
        assert!((h_c_o(&m, 0.05, &put, xb).unwrap() - put.derivative(xb)).abs() < 1e-12);
    }

    #[test]
    fn a_underbar_case_study() {
        let m = LevyModel::default();
        let put = Put::new(50.0).unwrap();
        let a = a_underbar(&m, 0.05, &put).unwrap();
        let phi = m.phi(0.05).unwrap();
        assert!((a - (phi * 50.0 / (1.0 + phi)).ln()).abs() < 1e-14);
        assert!(h_c_o(&m, 0.05, &put, a).unwrap().abs() < 1e-9);
        assert!(a < put.zero());
        assert!((a.exp() - 28.4).abs() < 0.2, "e^a = {}", a.exp());
    }

    #[test]
    fn closed_form_roots_match_bisection() {
        let m = LevyModel::default();
        let phi = m.phi(0.05).unwrap();
        for (k, put) in [
            (phi, Put::new(50.0).unwrap()),
            (phi, Put::new(60.0).unwrap()),
            (phi + 1.0, Put::new(50.0).unwrap()),
        ] {
            let closed = weighted_root(&put, k).finite().unwrap();
            let bis = weighted_root_bisection(&put, k).finite().unwrap();
            assert!((closed - bis).abs() < 1e-9);
        }
    }

    #[test]
    fn h_c_equals_h_c_o_for_unbounded_variation() {
        let m = LevyModel::default();
        let put = Put::new(50.0).unwrap();
        for x in linspace(2.0, 4.5, 20) {
            assert_eq!(h_c(&m, 0.05, 1.0, &put, x).unwrap(), h_c_o(&m, 0.05, &put, x).unwrap());
        }
        let bv = LevyModel::new(1.0, 0.0, 1.0, 2.0).unwrap();
        for x in linspace(2.0, 4.5, 20) {
            let diff = h_c(&bv, 0.05, 1.0, &put, x).unwrap() - h_c_o(&bv, 0.05, &put, x).unwrap();
            assert!((diff - put.value(x)).abs() < 1e-10);
        }
    }

    #[test]
    fn x_under_ordering() {
        let m = LevyModel::default();
        let (c, p) = (Put::new(50.0).unwrap(), Put::new(60.0).unwrap());
        let a = a_underbar(&m, 0.05, &c).unwrap();
        let xc = x_under(&m, 0.05, 1.0, &c, Player::C).unwrap().finite().unwrap();
        let xp = x_under(&m, 0.05, 1.0, &p, Player::P).unwrap().finite().unwrap();
        assert_eq!(xc, a);
        let phi = m.phi(0.05).unwrap();
        assert!((xp - (60.0 * phi / (1.0 + phi)).ln()).abs() < 1e-14);
        assert!(a <= xc && xc < c.zero() && c.zero() < p.zero());

        let bv = LevyModel::new(1.0, 0.0, 1.0, 2.0).unwrap();
        let a = a_underbar(&bv, 0.05, &c).unwrap();
        let xc = x_under(&bv, 0.05, 1.0, &c, Player::C).unwrap().finite().unwrap();
        assert!(a < xc);
    }

    #[test]
    fn x_under_p_can_be_minus_infinity() {
        // h_p = Phi f + f' with f' = -1 and f linear: root K - 1/Phi, always finite;
        // a reward with f' dominating everywhere has no root.
        #[derive(Debug)]
        struct Steep;
        impl Reward for Steep {
            fn value(&self, x: f64) -> f64 {
                -x
            }
            fn derivative(&self, _x: f64) -> f64 {
                -1.0
            }
        }
        let m = LevyModel::default();
        let lv = x_under(&m, 0.05, 1.0, &Steep, Player::P).unwrap();
        assert!(lv.finite().is_some());
        assert_eq!(weighted_root(&Put::new(5.0).unwrap(), 0.0), Level::NegInfinity);
        assert_eq!(Level::NegInfinity.max_with(2.0), 2.0);
    }

    #[test]
    fn single_player_value_is_maximised_at_a_underbar() {
        let m = LevyModel::default();
        let put = Put::new(50.0).unwrap();
        let a = a_underbar(&m, 0.05, &put).unwrap();
        let x = 40f64.ln();
        let best = v_single_player(&m, 0.05, &put, x, a).unwrap();
        for da in linspace(-0.2, 0.2, 41) {
            assert!(v_single_player(&m, 0.05, &put, x, a + da).unwrap() <= best + 1e-12);
        }
        assert_eq!(v_single_player(&m, 0.05, &put, 3.0, 3.2).unwrap(), put.value(3.0));
    }
}
