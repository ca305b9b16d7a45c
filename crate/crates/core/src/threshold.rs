//! Ability threshold separating data users from data providers.
//!
//! An agent with ability `mu_i` prefers to use data when its expected utility
//! as a user exceeds the provider's. Equating the two at the margin gives the
//! centered threshold `mu_k` as the fixed point `mu_k = F(tau, mu_k)`, solved
//! here as the root of the strictly increasing `G(mu) = mu - F(tau, mu)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::numerics::normal::{std_log_sf, std_sf};
use crate::numerics::{brent, portfolio_moment};
use crate::scalar::Real;

/// Cost rates outside `[TAU_MIN, 1 - TAU_MIN]` are rejected.
pub const TAU_MIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSolution<T> {
    pub tau: T,
    /// Centered threshold `K - mu_bar`.
    pub mu_k: T,
    /// Uncentered threshold.
    #[serde(rename = "K")]
    pub k: T,
    /// Mass of data users, `1 - Phi(mu_k; 0, sigma_mu^2)`.
    pub m: T,
    /// `E[e^mu | mu - mu_bar > mu_k]`.
    pub tail_mean: T,
    pub residual: T,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    HighUser,
    LowProvider,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub role: Role,
    /// Set when the ability sits exactly on the threshold.
    pub tie: bool,
}

/// Truncated lognormal mean `E[e^mu | mu > k]` for `mu ~ N(mu_bar, sigma_mu^2)`.
pub fn tail_expectation<T: Real>(k: T, mu_bar: T, sigma_mu: T) -> Result<T> {
    if !(sigma_mu > T::zero() && sigma_mu.is_finite()) {
        return Err(Error::InvalidInput(format!("sigma_mu must be positive, got {sigma_mu}")));
    }
    if k.is_nan() {
        return Err(Error::InvalidInput("threshold is NaN".into()));
    }
    let base = (mu_bar + sigma_mu * sigma_mu / T::lit(2.0)).exp();
    if k == T::neg_infinity() {
        return Ok(base);
    }
    let z = (k - mu_bar) / sigma_mu;
    let out = base * (std_log_sf(z - sigma_mu) - std_log_sf(z)).exp();
    if out.is_finite() && out > T::zero() {
        Ok(out)
    } else {
        Err(Error::NumericalRange(format!("tail expectation out of range at K = {k}")))
    }
}

/// The portfolio term subtracted in `F`: `log E[g^(1-gamma)] / (1-gamma)`, or
/// `E[log g]` under log utility. It does not depend on `mu`.
pub fn portfolio_adjustment<T: Real>(params: &ModelParams<T>) -> Result<T> {
    let moment = portfolio_moment(params.theta, params.sigma_idio, params.gamma)?;
    if params.is_log_utility() {
        Ok(moment)
    } else {
        Ok(moment.ln() / (T::one() - params.gamma))
    }
}

fn check_tau<T: Real>(tau: T) -> Result<()> {
    let lo = T::lit(TAU_MIN);
    if tau >= lo && tau <= T::one() - lo {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("tau must lie in [{TAU_MIN}, 1 - {TAU_MIN}], got {tau}")))
    }
}

pub(crate) fn f_threshold_with<T: Real>(tau: T, mu: T, sigma_mu: T, adjustment: T) -> T {
    let z = mu / sigma_mu;
    // log[(1 - Phi(mu; s^2, s^2)) / Phi(mu; 0, s^2)]
    let log_ratio = std_log_sf(z - sigma_mu) - std_log_sf(-z);
    (tau / (T::one() - tau)).ln() + sigma_mu * sigma_mu / T::lit(2.0) + log_ratio - adjustment
}

/// Right-hand side `F(tau, mu)` of the threshold fixed point.
pub fn f_threshold<T: Real>(tau: T, mu: T, params: &ModelParams<T>) -> Result<T> {
    check_tau(tau)?;
    if !mu.is_finite() {
        return Err(Error::InvalidInput(format!("mu must be finite, got {mu}")));
    }
    let adj = portfolio_adjustment(params)?;
    let out = f_threshold_with(tau, mu, params.sigma_mu, adj);
    if out.is_finite() {
        Ok(out)
    } else {
        Err(Error::NumericalRange(format!("F({tau}, {mu}) is not finite")))
    }
}

/// Solves `mu_k = F(tau, mu_k)`.
pub fn solve_threshold<T: Real>(tau: T, params: &ModelParams<T>) -> Result<ThresholdSolution<T>> {
    check_tau(tau)?;
    let sigma = params.sigma_mu;
    let adj = portfolio_adjustment(params)?;
    let g = |mu: T| mu - f_threshold_with(tau, mu, sigma, adj);

    let center = (tau / (T::one() - tau)).ln();
    let mut step = T::lit(6.0) * sigma;
    let mut lo = center - step;
    let mut hi = center + step;
    let mut trace = vec![(lo.as_f64(), hi.as_f64())];
    let mut expansions = 0;
    while !(g(lo) < T::zero()) || !(g(hi) > T::zero()) {
        expansions += 1;
        if expansions > 60 {
            return Err(Error::Solver {
                message: format!("could not bracket the threshold at tau = {tau}"),
                trace,
            });
        }
        if !(g(lo) < T::zero()) {
            lo = lo - step;
        }
        if !(g(hi) > T::zero()) {
            hi = hi + step;
        }
        step = step * T::lit(2.0);
        trace.push((lo.as_f64(), hi.as_f64()));
    }

    let root = brent(g, lo, hi, T::epsilon() * T::lit(4.0))?;
    let mu_k = root.x;
    let k = mu_k + params.mu_bar;
    Ok(ThresholdSolution {
        tau,
        mu_k,
        k,
        m: std_sf(mu_k / sigma),
        tail_mean: tail_expectation(k, params.mu_bar, sigma)?,
        residual: root.fx,
        iterations: root.iterations,
    })
}

/// `E[e^((1-gamma) eps)]` for the aggregate shock.
fn agg_shock_moment_log<T: Real>(params: &ModelParams<T>) -> T {
    let one_m = T::one() - params.gamma;
    let spec = params.agg_shock();
    one_m * spec.mean + one_m * one_m * spec.variance / T::lit(2.0)
}

/// Expected utility of acting as a data user with ability `mu_i`.
pub fn user_utility<T: Real>(mu_i: T, tau: T, params: &ModelParams<T>) -> Result<T> {
    if !(tau > T::zero() && tau < T::one()) {
        return Err(Error::InvalidInput(format!("tau must lie in (0, 1), got {tau}")));
    }
    let moment = portfolio_moment(params.theta, params.sigma_idio, params.gamma)?;
    let d = params.data_contribution;
    if params.is_log_utility() {
        Ok((T::one() - tau).ln() + d.ln() + mu_i + params.agg_shock().mean + moment)
    } else {
        let one_m = T::one() - params.gamma;
        let log_mag = one_m * ((T::one() - tau).ln() + d.ln() + mu_i)
            + agg_shock_moment_log(params)
            + moment.ln();
        Ok(log_mag.exp() / one_m)
    }
}

/// Expected utility of a data provider given the user mass `m` and the users'
/// tail mean.
pub fn provider_utility<T: Real>(tau: T, m: T, tail_mean: T, params: &ModelParams<T>) -> Result<T> {
    if !(m > T::zero() && m < T::one()) {
        return Err(Error::DegeneratePopulation(format!("user mass must lie in (0, 1), got {m}")));
    }
    if !(tau > T::zero() && tau < T::one()) {
        return Err(Error::InvalidInput(format!("tau must lie in (0, 1), got {tau}")));
    }
    if !(tail_mean > T::zero()) {
        return Err(Error::InvalidInput(format!("tail mean must be positive, got {tail_mean}")));
    }
    let d = params.data_contribution;
    let log_share = tau.ln() + d.ln() + tail_mean.ln() + m.ln() - (T::one() - m).ln();
    if params.is_log_utility() {
        Ok(log_share + params.agg_shock().mean)
    } else {
        let one_m = T::one() - params.gamma;
        Ok((one_m * log_share + agg_shock_moment_log(params)).exp() / one_m)
    }
}

/// Assigns the role implied by the threshold; ties go to providers.
pub fn classify<T: Real>(mu_i: T, solution: &ThresholdSolution<T>) -> Classification {
    let centered = mu_i - (solution.k - solution.mu_k);
    if centered > solution.mu_k {
        Classification { role: Role::HighUser, tie: false }
    } else {
        Classification { role: Role::LowProvider, tie: centered == solution.mu_k }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{make_stream, normal_sf, GaussianSpec};

    fn params(theta: f64, sigma_mu: f64, gamma: f64) -> ModelParams<f64> {
        let mut p = ModelParams::reference();
        p.theta = theta;
        p.sigma_mu = sigma_mu;
        p.gamma = gamma;
        p.revalidate().unwrap()
    }

    #[test]
    fn tail_expectation_values() {
        let e05 = 0.5f64.exp();
        assert!((tail_expectation(f64::NEG_INFINITY, 0.0, 1.0).unwrap() - e05).abs() < 1e-15);
        assert!((tail_expectation(-40.0, 0.0, 1.0).unwrap() - e05).abs() < 1e-14);
        // mpmath: e^0.5 (1 - Phi(0; 1, 1)) / 0.5
        let v = tail_expectation(0.0f64, 0.0, 1.0).unwrap();
        assert!((v - 2.774_285_957_670_009_5).abs() < 1e-13);
        assert!(tail_expectation(1.0, 0.0, 1.0).unwrap() > v);
    }

    #[test]
    fn tail_expectation_monte_carlo() {
        let mut s = make_stream(11, 0);
        let (mut sum, mut sum2, mut n) = (0.0, 0.0, 0usize);
        while n < 1_000_000 {
            let x = s.standard_normal();
            if x > 0.0 {
                let e = x.exp();
                sum += e;
                sum2 += e * e;
                n += 1;
            }
        }
        let mean = sum / n as f64;
        let se = ((sum2 / n as f64 - mean * mean) / n as f64).sqrt();
        let want = tail_expectation(0.0, 0.0, 1.0).unwrap();
        assert!((mean - want).abs() <= 3.0 * se, "{mean} vs {want} (se {se})");
    }

    #[test]
    fn tail_expectation_deep_tail() {
        let v = tail_expectation(30.0f64, 0.0, 1.0).unwrap();
        // E[e^X | X > k] ~ e^k for large k
        assert!(v.is_finite() && v > 30f64.exp());
    }

    #[test]
    fn f_at_symmetric_point() {
        for &g in &[1.0, 2.0, 5.0] {
            let p = params(0.0, 1.0, g);
            assert!((f_threshold(0.5, 0.5, &p).unwrap() - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn f_matches_term_by_term_oracle() {
        // mpmath quadrature for the portfolio moment and ncdf for the log-ratio
        let p = params(0.1, 1.0, 2.0);
        let v = f_threshold(0.6, 0.3, &p).unwrap();
        assert!((v - 1.112_479_730_708_360_5).abs() < 1e-12, "{v}");
    }

    #[test]
    fn f_portfolio_moment_monte_carlo() {
        let p = params(0.1, 1.0, 2.0);
        let mut s = make_stream(3, 0);
        let spec = p.idio_shock();
        let n = 1_000_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| (0.1 * s.normal(spec.mean, spec.std_dev()).exp() + 0.9).powf(-1.0))
            .collect();
        let (mean, se) = crate::numerics::rng::mean_and_se(&draws);
        let quad = portfolio_moment(0.1, 0.5, 2.0).unwrap();
        assert!((mean - quad).abs() <= 3.0 * se);
    }

    #[test]
    fn f_diverges_as_tau_vanishes() {
        let p = params(0.1, 1.0, 2.0);
        let a = f_threshold(1e-3, 0.0, &p).unwrap();
        let b = f_threshold(1e-6, 0.0, &p).unwrap();
        assert!(b < a - 6.0);
        assert!(f_threshold(0.0, 0.0, &p).is_err());
    }

    #[test]
    fn f_decreasing_in_mu() {
        let p = params(0.1, 1.0, 2.0);
        let mut prev = f_threshold(0.4, -5.0, &p).unwrap();
        for i in 1..=1000 {
            let mu = -5.0 + i as f64 * 0.01;
            let cur = f_threshold(0.4, mu, &p).unwrap();
            assert!(cur < prev, "mu={mu}");
            prev = cur;
        }
    }

    #[test]
    fn symmetric_solution() {
        let p = params(0.0, 1.0, 2.0);
        let sol = solve_threshold(0.5, &p).unwrap();
        assert!((sol.mu_k - 0.5).abs() < 1e-12);
        // mpmath: 1 - ncdf(0.5)
        assert!((sol.m - 0.308_537_538_725_986_9).abs() < 1e-14);
        assert!(sol.residual.abs() < 1e-12);
    }

    #[test]
    fn solution_matches_grid_bisection_oracle() {
        let p = params(0.1, 1.0, 2.0);
        let sol = solve_threshold(0.6, &p).unwrap();
        // independent oracle: scan on a 1e-6 grid for the sign change of G,
        // then bisect inside that cell
        let adj = portfolio_adjustment(&p).unwrap();
        let g = |mu: f64| mu - f_threshold_with(0.6, mu, 1.0, adj);
        let mut a = -3.0;
        let step = 1e-6;
        while g(a + step) < 0.0 {
            a += step;
            assert!(a < 3.0);
        }
        let mut b = a + step;
        for _ in 0..60 {
            let mid = 0.5 * (a + b);
            if g(mid) < 0.0 {
                a = mid
            } else {
                b = mid
            }
        }
        assert!((sol.mu_k - 0.5 * (a + b)).abs() < 1e-8);
        // mpmath findroot
        assert!((sol.mu_k - 0.701_826_932_051_050_3).abs() < 1e-10);
    }

    #[test]
    fn solution_fields_consistent() {
        let mut p = ModelParams::<f64>::reference();
        p.mu_bar = 0.7;
        let p = p.revalidate().unwrap();
        let sol = solve_threshold(0.35, &p).unwrap();
        assert!((sol.k - sol.mu_k - 0.7).abs() < 1e-15);
        let m = normal_sf(sol.mu_k, &GaussianSpec::new(0.0, 1.0).unwrap()).unwrap();
        assert!((sol.m - m).abs() < 1e-10);
        assert!(sol.tail_mean >= (0.7 + 0.5f64).exp());
    }

    #[test]
    fn rejects_degenerate_tau() {
        let p = ModelParams::<f64>::reference();
        assert!(solve_threshold(1e-7, &p).is_err());
        assert!(solve_threshold(1.0 - 1e-7, &p).is_err());
        assert!(solve_threshold(1e-6, &p).is_ok());
    }

    #[test]
    fn log_user_utility_collapses() {
        let p = params(0.0, 1.0, 1.0);
        let u = user_utility(0.3, 0.4, &p).unwrap();
        let want = 0.6f64.ln() + 1f64.ln() + 0.3 - 0.02;
        assert!((u - want).abs() < 1e-14);
    }

    #[test]
    fn user_utility_increasing() {
        for &g in &[1.0, 2.0, 0.5, 5.0] {
            let p = params(0.1, 1.0, g);
            let mut prev = user_utility(-3.0, 0.5, &p).unwrap();
            for i in 1..60 {
                let cur = user_utility(-3.0 + 0.1 * i as f64, 0.5, &p).unwrap();
                assert!(cur > prev);
                prev = cur;
            }
        }
    }

    #[test]
    fn user_utility_monte_carlo() {
        let p = params(0.1, 1.0, 2.0);
        let (mu_i, tau) = (0.3f64, 0.4f64);
        let agg = p.agg_shock();
        let idio = p.idio_shock();
        let mut s = make_stream(21, 0);
        let draws: Vec<f64> = (0..1_000_000)
            .map(|_| {
                let e = s.normal(agg.mean, agg.std_dev());
                let ei = s.normal(idio.mean, idio.std_dev());
                let c = (1.0 - tau) * mu_i.exp() * e.exp() * (0.1 * ei.exp() + 0.9);
                -1.0 / c
            })
            .collect();
        let (mean, se) = crate::numerics::rng::mean_and_se(&draws);
        let u = user_utility(mu_i, tau, &p).unwrap();
        assert!((mean - u).abs() <= 3.0 * se, "{mean} vs {u} ({se})");
    }

    #[test]
    fn provider_utility_log_expansion() {
        let p = params(0.1, 1.0, 1.0);
        let (tau, m, tm) = (0.3, 0.4, 2.2);
        let u = provider_utility(tau, m, tm, &p).unwrap();
        let want = tau.ln() + 0.0 - 0.02 + m.ln() + tm.ln() - (1.0f64 - m).ln();
        assert!((u - want).abs() < 1e-14);
        let tiny = provider_utility(1e-300, m, tm, &p).unwrap();
        assert!(tiny < -600.0);
    }

    #[test]
    fn provider_utility_monte_carlo() {
        let p = params(0.1, 1.0, 2.0);
        let (tau, m, tm) = (0.3, 0.4, 2.2);
        let agg = p.agg_shock();
        let mut s = make_stream(22, 0);
        let draws: Vec<f64> = (0..1_000_000)
            .map(|_| {
                let e = s.normal(agg.mean, agg.std_dev());
                let c = tau * e.exp() * m * tm / (1.0 - m);
                -1.0 / c
            })
            .collect();
        let (mean, se) = crate::numerics::rng::mean_and_se(&draws);
        let u = provider_utility(tau, m, tm, &p).unwrap();
        assert!((mean - u).abs() <= 3.0 * se);
    }

    #[test]
    fn provider_utility_rejects_degenerate_mass() {
        let p = ModelParams::<f64>::reference();
        assert!(matches!(provider_utility(0.5, 0.0, 1.0, &p), Err(Error::DegeneratePopulation(_))));
        assert!(matches!(provider_utility(0.5, 1.0, 1.0, &p), Err(Error::DegeneratePopulation(_))));
    }

    #[test]
    fn indifference_at_threshold() {
        for &(g, theta) in &[(1.0, 0.1), (2.0, 0.1), (5.0, 0.3), (0.5, 0.7)] {
            let mut p = params(theta, 0.8, g);
            p.mu_bar = -0.4;
            let p = p.revalidate().unwrap();
            let sol = solve_threshold(0.45, &p).unwrap();
            let u = user_utility(sol.k, 0.45, &p).unwrap();
            let v = provider_utility(0.45, sol.m, sol.tail_mean, &p).unwrap();
            assert!((u - v).abs() <= 1e-8 * u.abs().max(1.0), "gamma {g}: {u} vs {v}");
        }
    }

    #[test]
    fn classification() {
        let p = ModelParams::<f64>::reference();
        let sol = solve_threshold(0.5, &p).unwrap();
        let above = classify(p.mu_bar + sol.mu_k + 1.0, &sol);
        assert_eq!(above, Classification { role: Role::HighUser, tie: false });
        let at = classify(sol.k, &sol);
        assert_eq!(at, Classification { role: Role::LowProvider, tie: true });
        let below = classify(sol.k - 1e-9, &sol);
        assert_eq!(below, Classification { role: Role::LowProvider, tie: false });
    }

    #[test]
    fn classification_agrees_with_utilities() {
        let p = ModelParams::<f64>::reference();
        let sol = solve_threshold(0.5, &p).unwrap();
        let v = provider_utility(0.5, sol.m, sol.tail_mean, &p).unwrap();
        let mut s = make_stream(99, 0);
        for _ in 0..10_000 {
            let mu = s.normal(p.mu_bar, p.sigma_mu);
            if (mu - sol.k).abs() < 1e-8 {
                continue;
            }
            let prefers_use = user_utility(mu, 0.5, &p).unwrap() > v;
            assert_eq!(prefers_use, classify(mu, &sol).role == Role::HighUser);
        }
    }
}
