//! Jump-diffusion capital dynamics and the financial-friction match.
//!
//! Capital is `K_t = lambda W_t` with
//! `d log K = (r_f + alpha mu_hat - alpha^2 sigma_w^2 / 2 - lambda) dt
//!            + alpha sigma_w dZ + log(1 - alpha L) dN`,
//! `N` a Poisson process with intensity `w`. Between jumps the log is an
//! arithmetic Brownian motion, so paths are simulated exactly at the jump
//! times.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::numerics::rng::{mean_and_se, tree_sum};
use crate::numerics::{brent, make_stream, RandomStream};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WealthPath<T> {
    /// `0`, every jump time, and the horizon.
    pub times: Vec<T>,
    /// `log K` at each entry of `times`, taken after any jump at that time.
    pub log_k: Vec<T>,
    pub jump_times: Vec<T>,
    pub jump_losses: Vec<T>,
}

impl<T: Real> WealthPath<T> {
    pub fn terminal_log_k(&self) -> T {
        *self.log_k.last().expect("path has at least one point")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaSolution<T> {
    pub lambda: T,
    /// `lambda t* - log(lambda) - log(target)` at the root.
    pub residual: T,
    /// `lambda t* > 1`: the root sits on the increasing branch.
    pub branch_ok: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub standard_error: f64,
    pub n_paths: usize,
}

/// Initial aggregate and firm shocks entering `W0 = y_0 (1 - tau_0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialShocks<T> {
    pub eps0: T,
    pub eps_i0: T,
}

impl<T: Real> InitialShocks<T> {
    /// Both shocks at their means `-sigma^2/2`, `-sigma_1^2/2`.
    pub fn at_means(params: &ModelParams<T>) -> Self {
        Self { eps0: params.agg_shock().mean, eps_i0: params.idio_shock().mean }
    }
}

fn check_lambda<T: Real>(lambda: T) -> Result<()> {
    if lambda >= T::one() && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("lambda must be finite and >= 1, got {lambda}")))
    }
}

fn check_horizon<T: Real>(t: T) -> Result<()> {
    if t > T::zero() && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("horizon must be positive, got {t}")))
    }
}

/// Drift of `log K` between jumps.
pub fn log_drift<T: Real>(params: &ModelParams<T>, lambda: T) -> T {
    let vol = params.alpha * params.sigma_w;
    params.r_f + params.alpha * params.mu_hat() - vol * vol / T::lit(2.0) - lambda
}

/// Closed form `E K_t = lambda W0 exp{(r_f + alpha mu_hat - lambda + w[E(1 - alpha L) - 1]) t}`.
pub fn expected_capital<T: Real>(params: &ModelParams<T>, t: T, lambda: T) -> Result<T> {
    check_horizon(t)?;
    check_lambda(lambda)?;
    let rate = params.capital_growth_ex_lambda() - lambda;
    Ok(lambda * params.initial_wealth * (rate * t).exp())
}

/// Exact simulation of one path on `[0, horizon]`.
pub fn simulate_path<T: Real>(
    params: &ModelParams<T>,
    lambda: T,
    horizon: T,
    stream: &mut RandomStream,
) -> Result<WealthPath<T>> {
    check_horizon(horizon)?;
    check_lambda(lambda)?;
    let drift = log_drift(params, lambda);
    let vol = params.alpha * params.sigma_w;
    let w = params.w.as_f64();

    let mut t = T::zero();
    let base = (lambda * params.initial_wealth).ln();
    // cumulative Brownian motion and jump sum, so that log K at a time does
    // not depend on how the interval was split
    let mut brownian = T::zero();
    let mut jumps = T::zero();
    let mut path = WealthPath {
        times: vec![t],
        log_k: vec![base],
        jump_times: Vec::new(),
        jump_losses: Vec::new(),
    };
    loop {
        let next = if w > 0.0 { t + T::lit(stream.exponential(w)) } else { T::infinity() };
        let stop = next.min(horizon);
        let dt = stop - t;
        brownian = brownian + dt.sqrt() * T::lit(stream.standard_normal());
        t = stop;
        if next >= horizon {
            path.times.push(horizon);
            path.log_k.push(base + drift * horizon + vol * brownian + jumps);
            break;
        }
        let loss = params.loss.sample(stream);
        jumps = jumps + (T::one() - params.alpha * loss).ln();
        path.times.push(t);
        path.log_k.push(base + drift * t + vol * brownian + jumps);
        path.jump_times.push(t);
        path.jump_losses.push(loss);
    }
    Ok(path)
}

/// Monte Carlo estimate of `E K_t`, one stream per path.
///
/// Terminal values are collected in path order and reduced with a fixed tree,
/// so the result is bit-identical for any worker count.
pub fn mc_expected_capital<T: Real>(
    params: &ModelParams<T>,
    lambda: T,
    t: T,
    n_paths: usize,
    master_seed: u64,
) -> Result<McEstimate> {
    if n_paths < 100 {
        return Err(Error::InvalidInput(format!("need at least 100 paths, got {n_paths}")));
    }
    check_horizon(t)?;
    check_lambda(lambda)?;
    let terminal: Vec<f64> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut stream = make_stream(master_seed, i as u64);
            simulate_path(params, lambda, t, &mut stream).map(|p| p.terminal_log_k().exp().as_f64())
        })
        .collect::<Result<_>>()?;
    let (estimate, standard_error) = if terminal.iter().all(|&k| k == terminal[0]) {
        (terminal[0], 0.0)
    } else {
        mean_and_se(&terminal)
    };
    Ok(McEstimate { estimate, standard_error, n_paths })
}

/// Sample mean of the jump product `prod (1 - alpha L_i)` over `[0, t]`, with
/// its standard error. Checks `E prod = exp{w t [E(1 - alpha L) - 1]}`.
pub fn mc_jump_product<T: Real>(
    params: &ModelParams<T>,
    t: T,
    n_paths: usize,
    master_seed: u64,
) -> Result<McEstimate> {
    check_horizon(t)?;
    let products: Vec<f64> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut stream = make_stream(master_seed, i as u64);
            let path = simulate_path(params, T::one(), t, &mut stream)?;
            Ok(path
                .jump_losses
                .iter()
                .map(|&l| (T::one() - params.alpha * l).as_f64())
                .product())
        })
        .collect::<Result<_>>()?;
    let (estimate, standard_error) = mean_and_se(&products);
    Ok(McEstimate { estimate, standard_error, n_paths })
}

/// `e^(lambda t) / lambda`.
pub fn f_lambda<T: Real>(lambda: T, t: T) -> Result<T> {
    if !(lambda > T::zero()) {
        return Err(Error::InvalidInput(format!("lambda must be positive, got {lambda}")));
    }
    let exponent = lambda * t;
    if exponent > T::max_value().ln() {
        return Err(Error::NumericalRange(format!("e^(lambda t) overflows at lambda t = {exponent}")));
    }
    Ok(exponent.exp() / lambda)
}

/// Log of the ability-side level `e^(mu_i + eps0 + eps_i0) D (1 - tau) / EK e^(g t*)`.
pub fn log_f_mu<T: Real>(mu_i: T, params: &ModelParams<T>, shocks: &InitialShocks<T>) -> T {
    mu_i + shocks.eps0
        + shocks.eps_i0
        + params.data_contribution.ln()
        + (T::one() - params.tau).ln()
        - params.ek_target.ln()
        + params.capital_growth_ex_lambda() * params.t_star
}

/// Ability-side level of the friction match, evaluated at `t*`; strictly
/// increasing in `mu_i`.
pub fn f_mu<T: Real>(mu_i: T, params: &ModelParams<T>, shocks: &InitialShocks<T>) -> T {
    log_f_mu(mu_i, params, shocks).exp()
}

/// Solves `e^(lambda t*) / lambda = f_mu(mu_i)` on `lambda >= 1`.
///
/// With `t* > 1` the left side is increasing there, with minimum `e^(t*)` at
/// `lambda = 1`; a level below that minimum has no solution.
pub fn solve_lambda<T: Real>(
    mu_i: T,
    params: &ModelParams<T>,
    shocks: &InitialShocks<T>,
) -> Result<LambdaSolution<T>> {
    let log_target = log_f_mu(mu_i, params, shocks);
    solve_lambda_for_level(log_target, params.t_star)
}

/// Same as [`solve_lambda`] for an explicit log level.
pub fn solve_lambda_for_level<T: Real>(log_target: T, t_star: T) -> Result<LambdaSolution<T>> {
    if !(t_star > T::one()) {
        return Err(Error::InvalidInput(format!("t* must exceed 1, got {t_star}")));
    }
    if !log_target.is_finite() {
        return Err(Error::InvalidInput(format!("log level must be finite, got {log_target}")));
    }
    let h = |lambda: T| lambda * t_star - lambda.ln() - log_target;
    let at_one = h(T::one());
    let slack = T::epsilon() * T::lit(16.0) * log_target.abs().max(T::one());
    if at_one > slack {
        return Err(Error::NoSolution {
            target: log_target.as_f64().exp(),
            minimum: t_star.as_f64().exp(),
        });
    }
    if at_one >= -slack {
        return Ok(LambdaSolution { lambda: T::one(), residual: at_one, branch_ok: t_star > T::one() });
    }
    let mut hi = T::lit(2.0);
    while h(hi) < T::zero() {
        hi = hi * T::lit(2.0);
        if hi > T::lit(1e12) {
            return Err(Error::Solver {
                message: "could not bracket lambda".into(),
                trace: vec![(1.0, hi.as_f64())],
            });
        }
    }
    let root = brent(h, T::one(), hi, T::epsilon() * T::lit(4.0))?;
    Ok(LambdaSolution {
        lambda: root.x,
        residual: root.fx,
        branch_ok: root.x * t_star > T::one(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FigureLevel<T> {
    pub mu: T,
    pub level: T,
    /// `None` when the level is below the curve's minimum.
    pub lambda_star: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Figure1Table<T> {
    pub t_star: T,
    pub curve: Vec<(T, T)>,
    pub levels: Vec<FigureLevel<T>>,
}

impl<T: Real> Figure1Table<T> {
    /// Two CSV sections separated by a blank line: `lambda,f_lambda` and
    /// `mu,level,lambda_star` (empty `lambda_star` when there is no root).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lambda,f_lambda\n");
        for (l, f) in &self.curve {
            out.push_str(&format!("{},{}\n", l.as_f64(), f.as_f64()));
        }
        out.push_str("\nmu,level,lambda_star\n");
        for lv in &self.levels {
            let star = lv.lambda_star.map(|x| x.as_f64().to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{}\n", lv.mu.as_f64(), lv.level.as_f64(), star));
        }
        out
    }
}

/// Tabulates `f_lambda(., t*)` on `lambda_grid` and the ability levels for
/// `mu_values`, with their intersections where they exist.
pub fn figure1_curves<T: Real>(
    params: &ModelParams<T>,
    lambda_grid: &[T],
    mu_values: &[T],
    shocks: &InitialShocks<T>,
) -> Result<Figure1Table<T>> {
    if lambda_grid.is_empty() || mu_values.is_empty() {
        return Err(Error::InvalidInput("figure grids must be non-empty".into()));
    }
    let t = params.t_star;
    let curve = lambda_grid
        .iter()
        .map(|&l| f_lambda(l, t).map(|f| (l, f)))
        .collect::<Result<Vec<_>>>()?;
    let mut levels = Vec::with_capacity(mu_values.len());
    for &mu in mu_values {
        let lambda_star = match solve_lambda(mu, params, shocks) {
            Ok(sol) => Some(sol.lambda),
            Err(Error::NoSolution { .. }) => None,
            Err(e) => return Err(e),
        };
        levels.push(FigureLevel { mu, level: f_mu(mu, params, shocks), lambda_star });
    }
    Ok(Figure1Table { t_star: t, curve, levels })
}

/// Simulated terminal `K` samples and their tree-reduced sum, exposed for
/// determinism checks.
pub fn terminal_capital_sum<T: Real>(
    params: &ModelParams<T>,
    lambda: T,
    t: T,
    n_paths: usize,
    master_seed: u64,
) -> Result<f64> {
    let terminal: Vec<f64> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut stream = make_stream(master_seed, i as u64);
            simulate_path(params, lambda, t, &mut stream).map(|p| p.terminal_log_k().exp().as_f64())
        })
        .collect::<Result<_>>()?;
    Ok(tree_sum(&terminal))
}
