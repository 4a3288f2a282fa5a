//! Monte Carlo estimates of the game's payoffs and of the exit identities,
//! used as an independent check on the analytic formulas.
//!
//! Two path schemes are available:
//!
//! * [`Scheme::Exact`] moves from event to event (jumps, observations,
//!   horizon). Between events the path is a Brownian motion with drift, and
//!   barrier crossings are decided from the Brownian-bridge law given both
//!   endpoints, with the crossing time drawn from its conditional law. There
//!   is no time-discretisation bias.
//! * [`Scheme::Grid`] steps on a `dt` grid refined so that event times are
//!   grid points and detects crossings only at grid times. Its bias is
//!   `O(sqrt(dt))`; it is kept for comparison with the exact scheme.
//!
//! Every path draws from its own ChaCha streams, keyed by the seed and the
//! path index, so results do not depend on the number of worker threads.
//! Jump times, jump sizes and Brownian increments come from one stream,
//! observation times from a second and bridge-crossing decisions from a
//! third; paths therefore stay identical across different thresholds, which
//! gives common random numbers for strategy comparisons.

use rand::distr::Open01;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{InverseGaussian, StandardNormal};
use rayon::prelude::*;

use crate::equilibrium::{Equilibrium, GameSpec};
use crate::error::{Error, Result};
use crate::levy_model::LevyModel;
use crate::numeric::linspace;
use crate::rewards::Reward;

/// Below this many paths standard-error based checks are inconclusive.
pub const MIN_CONCLUSIVE_PATHS: usize = 1000;
/// Bridges where both barriers have a crossing probability above this are
/// split at their midpoint.
const SPLIT_THRESHOLD: f64 = 1e-12;
const MAX_SPLIT_DEPTH: u32 = 48;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Exact,
    Grid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Time step of [`Scheme::Grid`].
    pub dt: f64,
    /// Paths still running at this time pay nothing.
    pub horizon: f64,
    pub paths: usize,
    pub seed: u64,
    /// Pair each path with its mirror image (uniforms `u -> 1 - u`,
    /// normals `z -> -z`).
    pub antithetic: bool,
    pub scheme: Scheme,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 1e-3,
            horizon: 200.0,
            paths: 100_000,
            seed: 20_240_601,
            antithetic: false,
            scheme: Scheme::Exact,
        }
    }
}

impl SimConfig {
    /// Checks the fields and that `q * horizon >= 9`, which bounds the
    /// truncation bias by `e^{-9}` of the payoff scale.
    pub fn validate(&self, q: f64) -> Result<()> {
        let bad = |m: String| Err(Error::SimConfig(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt = {} must be finite and > 0", self.dt));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad(format!("horizon = {} must be finite and > 0", self.horizon));
        }
        if self.paths == 0 {
            return bad("paths must be >= 1".into());
        }
        if self.antithetic && !self.paths.is_multiple_of(2) {
            return bad(format!(
                "antithetic sampling needs an even path count, got {}",
                self.paths
            ));
        }
        if !(q * self.horizon >= 9.0) {
            return bad(format!("q * horizon = {} must be >= 9", q * self.horizon));
        }
        Ok(())
    }

    pub fn is_conclusive(&self) -> bool {
        self.paths >= MIN_CONCLUSIVE_PATHS
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
    /// Fraction of paths that reached the horizon.
    pub truncated_fraction: f64,
}

impl Estimate {
    /// `|mean - target| <= n_se * stderr + rel_bias * |target|`.
    pub fn agrees_with(&self, target: f64, n_se: f64, rel_bias: f64) -> bool {
        (self.mean - target).abs() <= n_se * self.stderr + rel_bias * target.abs()
    }

    /// Distance to `target` in standard errors.
    pub fn z_score(&self, target: f64) -> f64 {
        if self.stderr == 0.0 {
            if self.mean == target {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.mean - target) / self.stderr
        }
    }
}

/// How a simulated path ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exit {
    /// First passage below the lower barrier at time `t`, position `x`.
    Lower {
        t: f64,
        x: f64,
    },
    /// First observation time with `X < l`.
    Observed {
        t: f64,
        x: f64,
    },
    /// First passage above the upper barrier.
    Upper {
        t: f64,
        x: f64,
    },
    Horizon,
}

/// Barriers of one simulation. `-inf`/`+inf` disable a barrier and `None`
/// disables observations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Barriers {
    pub lower: f64,
    pub observe_below: Option<f64>,
    pub upper: f64,
}

impl Barriers {
    pub fn lower(a: f64) -> Self {
        Barriers {
            lower: a,
            observe_below: None,
            upper: f64::INFINITY,
        }
    }

    pub fn game(a: f64, l: f64) -> Self {
        Barriers {
            lower: a,
            observe_below: Some(l),
            upper: f64::INFINITY,
        }
    }

    pub fn with_upper(mut self, b: f64) -> Self {
        self.upper = b;
        self
    }
}

/// Random source for one stream; `mirror` gives the antithetic partner.
struct Source {
    rng: ChaCha8Rng,
    mirror: bool,
}

impl Source {
    fn new(seed: u64, stream: u64, mirror: bool) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Source { rng, mirror }
    }

    fn uniform(&mut self) -> f64 {
        let u: f64 = self.rng.sample(Open01);
        if self.mirror {
            1.0 - u
        } else {
            u
        }
    }

    fn normal(&mut self) -> f64 {
        let z: f64 = self.rng.sample(StandardNormal);
        if self.mirror {
            -z
        } else {
            z
        }
    }

    fn exponential(&mut self, rate: f64) -> f64 {
        if rate > 0.0 {
            -self.uniform().ln() / rate
        } else {
            f64::INFINITY
        }
    }
}

/// Path simulator for one model, discount rate and observation rate.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub model: LevyModel,
    pub q: f64,
    pub lambda: f64,
    pub cfg: SimConfig,
}

impl Simulator {
    pub fn new(model: LevyModel, q: f64, lambda: f64, cfg: SimConfig) -> Result<Self> {
        cfg.validate(q)?;
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::SimConfig(format!("lambda = {lambda} must be finite and >= 0")));
        }
        Ok(Simulator { model, q, lambda, cfg })
    }

    /// Simulates path `index` started at `x`; `mirror` selects the
    /// antithetic partner.
    pub fn run_path(&self, x: f64, barriers: &Barriers, index: u64, mirror: bool) -> Exit {
        if x < barriers.lower || (x == barriers.lower && self.creeps_immediately()) {
            return Exit::Lower { t: 0.0, x };
        }
        if x > barriers.upper {
            return Exit::Upper { t: 0.0, x };
        }
        let seed = self.cfg.seed;
        let mut motion = Source::new(seed, 3 * index, mirror);
        let mut clock = Source::new(seed, 3 * index + 1, mirror);
        let mut bridge = Source::new(seed, 3 * index + 2, false);
        let (alpha, beta) = (self.model.alpha(), self.model.beta());
        let horizon = self.cfg.horizon;

        let mut t = 0.0;
        let mut x = x;
        let mut next_jump = motion.exponential(alpha);
        let mut next_obs = match barriers.observe_below {
            Some(_) => clock.exponential(self.lambda),
            None => f64::INFINITY,
        };
        loop {
            let t_next = next_jump.min(next_obs).min(horizon);
            if let Some(exit) = self.advance(&mut t, &mut x, t_next, barriers, &mut motion, &mut bridge) {
                return exit;
            }
            if t_next >= horizon {
                return Exit::Horizon;
            }
            if next_jump <= next_obs {
                x += motion.exponential(beta);
                if x > barriers.upper {
                    return Exit::Upper { t, x };
                }
                next_jump = t + motion.exponential(alpha);
            } else {
                if let Some(l) = barriers.observe_below {
                    if x < l {
                        return Exit::Observed { t, x };
                    }
                }
                next_obs = t + clock.exponential(self.lambda);
            }
        }
    }

    fn creeps_immediately(&self) -> bool {
        self.model.nu() > 0.0 || self.model.mu() > 0.0
    }

    /// Moves the continuous part from `t` to `t_next`, returning the exit if
    /// a barrier is crossed on the way.
    fn advance(
        &self,
        t: &mut f64,
        x: &mut f64,
        t_next: f64,
        barriers: &Barriers,
        motion: &mut Source,
        bridge: &mut Source,
    ) -> Option<Exit> {
        let (mu, nu) = (self.model.mu(), self.model.nu());
        match self.cfg.scheme {
            Scheme::Exact => {
                let dt = t_next - *t;
                let x0 = *x;
                let x1 = if nu > 0.0 {
                    x0 - mu * dt + nu * dt.sqrt() * motion.normal()
                } else {
                    x0 - mu * dt
                };
                let hit = if nu > 0.0 {
                    bridge_exit(x0, x1, dt, nu * nu, barriers.lower, barriers.upper, bridge, 0)
                } else {
                    linear_exit(x0, x1, dt, barriers.lower, barriers.upper)
                };
                if let Some((s, side)) = hit {
                    let te = *t + s;
                    return Some(match side {
                        Side::Lower => Exit::Lower {
                            t: te,
                            x: barriers.lower,
                        },
                        Side::Upper => Exit::Upper {
                            t: te,
                            x: barriers.upper,
                        },
                    });
                }
                *t = t_next;
                *x = x1;
                None
            }
            Scheme::Grid => {
                let step = self.cfg.dt;
                while *t < t_next {
                    let h = step.min(t_next - *t);
                    let z = if nu > 0.0 { motion.normal() } else { 0.0 };
                    *x += -mu * h + nu * h.sqrt() * z;
                    *t = if t_next - *t <= step { t_next } else { *t + h };
                    if *x < barriers.lower {
                        return Some(Exit::Lower { t: *t, x: *x });
                    }
                    if *x > barriers.upper {
                        return Some(Exit::Upper { t: *t, x: *x });
                    }
                }
                None
            }
        }
    }

    /// Per-path payoffs for every path index, in index order. `payoff`
    /// maps an exit to one or more discounted values.
    fn payoffs<const K: usize, F>(&self, x: f64, barriers: &Barriers, payoff: F) -> (Vec<[f64; K]>, usize)
    where
        F: Fn(Exit) -> [f64; K] + Sync,
    {
        let n = self.cfg.paths;
        let anti = self.cfg.antithetic;
        let results: Vec<([f64; K], bool)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let (index, mirror) = if anti {
                    ((i / 2) as u64, i % 2 == 1)
                } else {
                    (i as u64, false)
                };
                let exit = self.run_path(x, barriers, index, mirror);
                (payoff(exit), exit == Exit::Horizon)
            })
            .collect();
        let truncated = results.iter().filter(|r| r.1).count();
        (results.into_iter().map(|r| r.0).collect(), truncated)
    }

    /// Estimates for each payoff component.
    pub fn estimate<const K: usize, F>(&self, x: f64, barriers: &Barriers, payoff: F) -> [Estimate; K]
    where
        F: Fn(Exit) -> [f64; K] + Sync,
    {
        let (values, truncated) = self.payoffs(x, barriers, payoff);
        let n = values.len();
        let truncated_fraction = truncated as f64 / n as f64;
        std::array::from_fn(|k| {
            let samples: Vec<f64> = if self.cfg.antithetic {
                values.chunks(2).map(|p| 0.5 * (p[0][k] + p[1][k])).collect()
            } else {
                values.iter().map(|v| v[k]).collect()
            };
            let (mean, stderr) = mean_stderr(&samples);
            Estimate {
                mean,
                stderr,
                n,
                truncated_fraction,
            }
        })
    }

    fn discount(&self, t: f64) -> f64 {
        (-self.q * t).exp()
    }

    /// `E_x[e^{-q tau_0^-}; tau_0^- < inf]`.
    pub fn exit_down_one_sided(&self, x: f64) -> Estimate {
        let [e] = self.estimate(x, &Barriers::lower(0.0), |exit| match exit {
            Exit::Lower { t, .. } => [self.discount(t)],
            _ => [0.0],
        });
        e
    }

    /// `E_x[e^{-q tau_0^-}; tau_0^- < tau_b^+]`.
    pub fn exit_down_two_sided(&self, x: f64, b: f64) -> Estimate {
        let [e] = self.estimate(x, &Barriers::lower(0.0).with_upper(b), |exit| match exit {
            Exit::Lower { t, .. } => [self.discount(t)],
            _ => [0.0],
        });
        e
    }

    /// `E_x[e^{-q tau_b^+ - theta (X_{tau_b^+} - b)}; tau_b^+ < tau_0^-]`.
    pub fn exit_up_overshoot_laplace(&self, x: f64, b: f64, theta: f64) -> Estimate {
        let [e] = self.estimate(x, &Barriers::lower(0.0).with_upper(b), |exit| match exit {
            Exit::Upper { t, x } => [self.discount(t) * (-theta * (x - b)).exp()],
            _ => [0.0],
        });
        e
    }

    /// `E_x[int_0^{tau_a^- ^ tau_b^+} e^{-q s} ds]`.
    pub fn resolvent_unit(&self, x: f64, a: f64, b: f64) -> Estimate {
        let horizon = self.cfg.horizon;
        let [e] = self.estimate(x, &Barriers::lower(a).with_upper(b), |exit| {
            let t = match exit {
                Exit::Lower { t, .. } | Exit::Upper { t, .. } | Exit::Observed { t, .. } => t,
                Exit::Horizon => horizon,
            };
            [-(-self.q * t).exp_m1() / self.q]
        });
        e
    }

    /// `E_x[e^{-q tau_a^-} f(X_{tau_a^-})]` with no opponent.
    pub fn single_player(&self, reward: &dyn Reward, x: f64, a: f64) -> Estimate {
        let [e] = self.estimate(x, &Barriers::lower(a), |exit| match exit {
            Exit::Lower { t, x } => [self.discount(t) * reward.value(x)],
            _ => [0.0],
        });
        e
    }

    /// `(V_c, V_p)` for thresholds `a` (player C) and `l` (player P) with
    /// optional upper killing at `b`.
    pub fn game(&self, spec: &GameSpec, x: f64, barriers: &Barriers) -> (Estimate, Estimate) {
        let [c, p] = self.estimate(x, barriers, |exit| match exit {
            Exit::Lower { t, x } => [self.discount(t) * spec.f_c(x), 0.0],
            Exit::Observed { t, x } => [0.0, self.discount(t) * spec.f_p(x)],
            _ => [0.0, 0.0],
        });
        (c, p)
    }
}

fn mean_stderr(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Lower,
    Upper,
}

/// Straight-line motion (no diffusion) from `x0` to `x1` over `dt`.
fn linear_exit(x0: f64, x1: f64, dt: f64, lower: f64, upper: f64) -> Option<(f64, Side)> {
    if x1 < lower {
        Some((dt * (x0 - lower) / (x0 - x1), Side::Lower))
    } else if x1 > upper {
        Some((dt * (upper - x0) / (x1 - x0), Side::Upper))
    } else {
        None
    }
}

/// Probability that a Brownian bridge from `x0` to `x1` over `dt` with
/// variance rate `var` crosses `level`, where `x0` is on the safe side.
fn cross_probability(x0: f64, x1: f64, dt: f64, var: f64, level: f64, side: Side) -> f64 {
    if !level.is_finite() {
        return 0.0;
    }
    let (d0, d1) = match side {
        Side::Lower => (x0 - level, x1 - level),
        Side::Upper => (level - x0, level - x1),
    };
    if d1 <= 0.0 || d0 <= 0.0 {
        1.0
    } else {
        (-2.0 * d0 * d1 / (var * dt)).exp()
    }
}

/// Crossing time of `level` by a bridge from `x0` to `x1` conditioned to
/// cross. With `d0`, `d1` the distances of the endpoints from the level,
/// `u = s / (dt - s)` is inverse Gaussian with mean `d0 / d1` and shape
/// `d0^2 / (var dt)`.
fn crossing_time(x0: f64, x1: f64, dt: f64, var: f64, level: f64, rng: &mut Source) -> f64 {
    let d0 = (x0 - level).abs();
    let d1 = (x1 - level).abs();
    if d0 == 0.0 {
        return 0.0;
    }
    if d1 == 0.0 {
        return dt;
    }
    let u: f64 = match InverseGaussian::new(d0 / d1, d0 * d0 / (var * dt)) {
        Ok(ig) => rng.rng.sample(ig),
        Err(_) => return dt,
    };
    if u.is_finite() {
        dt * u / (1.0 + u)
    } else {
        dt
    }
}

/// First exit of a Brownian bridge through `lower` or `upper`.
#[allow(clippy::too_many_arguments)]
fn bridge_exit(
    x0: f64,
    x1: f64,
    dt: f64,
    var: f64,
    lower: f64,
    upper: f64,
    rng: &mut Source,
    depth: u32,
) -> Option<(f64, Side)> {
    let pa = cross_probability(x0, x1, dt, var, lower, Side::Lower);
    let pb = cross_probability(x0, x1, dt, var, upper, Side::Upper);
    if pa == 0.0 && pb == 0.0 {
        return None;
    }
    if pa > SPLIT_THRESHOLD && pb > SPLIT_THRESHOLD && depth < MAX_SPLIT_DEPTH {
        let half = 0.5 * dt;
        let mid = 0.5 * (x0 + x1) + (0.25 * var * dt).sqrt() * rng.normal();
        if let Some(hit) = bridge_exit(x0, mid, half, var, lower, upper, rng, depth + 1) {
            return Some(hit);
        }
        return bridge_exit(mid, x1, half, var, lower, upper, rng, depth + 1).map(|(s, side)| (s + half, side));
    }
    let (p, level, side) = if pa >= pb {
        (pa, lower, Side::Lower)
    } else {
        (pb, upper, Side::Upper)
    };
    if p >= 1.0 || rng.uniform() < p {
        Some((crossing_time(x0, x1, dt, var, level, rng), side))
    } else {
        None
    }
}

// ---------------------------------------------------------------------------
// Game-level entry points

fn simulator(spec: &GameSpec, cfg: &SimConfig) -> Result<Simulator> {
    Simulator::new(*spec.model(), spec.q(), spec.lambda(), cfg.clone())
}

/// `(V_c, V_p)` under `tau_a^-` against `T_l^-`, both from the same paths.
pub fn simulate_game(spec: &GameSpec, x: f64, a: f64, l: f64, cfg: &SimConfig) -> Result<(Estimate, Estimate)> {
    if !(a <= l) {
        return Err(Error::SimConfig(format!("need a <= l (a = {a}, l = {l})")));
    }
    Ok(simulator(spec, cfg)?.game(spec, x, &Barriers::game(a, l)))
}

/// As [`simulate_game`] with both payoffs killed at the first passage
/// above `b`.
pub fn simulate_game_two_sided(
    spec: &GameSpec,
    x: f64,
    a: f64,
    l: f64,
    b: f64,
    cfg: &SimConfig,
) -> Result<(Estimate, Estimate)> {
    if !(a <= l && l <= b) {
        return Err(Error::SimConfig(format!(
            "need a <= l <= b (a = {a}, l = {l}, b = {b})"
        )));
    }
    Ok(simulator(spec, cfg)?.game(spec, x, &Barriers::game(a, l).with_upper(b)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanSide {
    pub grid: Vec<f64>,
    pub estimates: Vec<Estimate>,
    /// Estimate at the analytic threshold.
    pub at_optimum: Estimate,
    /// Largest grid estimate minus the estimate at the optimum.
    pub excess: f64,
    /// `at_optimum` is within 3 standard errors of the grid maximum.
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestResponseScan {
    pub x: f64,
    /// `v_c(x; a, l*)` over an a-grid.
    pub c: ScanSide,
    /// `v_p(x; a*, l)` over an l-grid.
    pub p: ScanSide,
}

impl BestResponseScan {
    pub fn passed(&self) -> bool {
        self.c.consistent && self.p.consistent
    }
}

/// Monte Carlo counterpart of the analytic best-response check: estimates
/// each player's value over a grid of own thresholds, the opponent fixed at
/// equilibrium, with common random numbers.
pub fn empirical_best_response_scan(
    spec: &GameSpec,
    eq: &Equilibrium,
    x: f64,
    grid_size: usize,
    cfg: &SimConfig,
) -> Result<BestResponseScan> {
    let sim = simulator(spec, cfg)?;
    let (a_star, l_star) = (eq.a_star, eq.l_star);
    let half_width = 0.25;
    let a_hi = (a_star + half_width).min(l_star).min(x);
    let a_grid = grid(a_star - half_width, a_hi, grid_size, a_star);
    let l_grid = grid(
        l_star - half_width,
        (l_star + half_width).min(spec.x_bar_p()),
        grid_size,
        l_star,
    );

    let side = |grid: Vec<f64>, optimum: f64, pick: &dyn Fn(f64) -> (Barriers, usize)| -> ScanSide {
        let run = |th: f64| {
            let (b, k) = pick(th);
            let (c, p) = sim.game(spec, x, &b);
            if k == 0 {
                c
            } else {
                p
            }
        };
        let estimates: Vec<Estimate> = grid.iter().map(|&th| run(th)).collect();
        let at_optimum = run(optimum);
        let best = estimates.iter().map(|e| e.mean).fold(f64::NEG_INFINITY, f64::max);
        let excess = best - at_optimum.mean;
        let se = estimates.iter().map(|e| e.stderr).fold(at_optimum.stderr, f64::max);
        ScanSide {
            consistent: grid.len() <= 1 || excess <= 3.0 * se,
            grid,
            estimates,
            at_optimum,
            excess,
        }
    };
    let c = side(a_grid, a_star, &|a| (Barriers::game(a, l_star.max(a)), 0));
    let p = side(l_grid, l_star, &|l| (Barriers::game(a_star, l.max(a_star)), 1));
    Ok(BestResponseScan { x, c, p })
}

fn grid(lo: f64, hi: f64, n: usize, center: f64) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![center],
        _ => linspace(lo, hi.max(lo), n),
    }
}
