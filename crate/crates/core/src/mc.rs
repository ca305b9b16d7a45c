//! Finite-population Monte Carlo checks of the continuum results.
//!
//! Statistical checks pass when the observed value is within three standard
//! errors of the expected one.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::numerics::rng::{mean_and_se, par_chunks, tree_sum, CHUNK};
use crate::numerics::{make_stream, RandomStream};
use crate::scalar::Real;
use crate::statics::aggregate_output;
use crate::threshold::{classify, provider_utility, solve_threshold, user_utility, Role, ThresholdSolution};

/// Acceptance width in standard errors.
pub const SE_RULE: f64 = 3.0;

/// Half-width of the band around the threshold excluded from sorting checks.
pub const BOUNDARY_BAND: f64 = 1e-8;

/// One line of a verification report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub statistic: String,
    pub expected: f64,
    pub observed: f64,
    pub se: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

impl CheckReport {
    /// `|observed - expected| <= 3 se`.
    pub fn statistical(statistic: &str, expected: f64, observed: f64, se: f64) -> Self {
        let pass = (observed - expected).abs() <= SE_RULE * se && se.is_finite();
        Self { statistic: statistic.into(), expected, observed, se, pass, seed: None, note: None }
    }

    /// `|observed - expected| <= tol`, no sampling error involved.
    pub fn exact(statistic: &str, expected: f64, observed: f64, tol: f64) -> Self {
        let pass = (observed - expected).abs() <= tol;
        Self { statistic: statistic.into(), expected, observed, se: 0.0, pass, seed: None, note: None }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSample<T> {
    pub abilities: Vec<T>,
    pub roles: Vec<Role>,
    pub idio_shocks: Vec<T>,
    pub agg_shock: T,
    pub n: usize,
    /// Threshold the roles were assigned with.
    pub threshold: ThresholdSolution<T>,
    pub seed: u64,
}

/// Draws `n` agents with abilities `N(mu_bar, sigma_mu^2)` and idiosyncratic
/// shocks, plus one aggregate shock, and assigns roles at the threshold for
/// `params.tau`.
///
/// The aggregate shock comes from `stream`; agents are drawn in chunks of
/// [`CHUNK`] from streams derived from it, so the sample does not depend on
/// the worker count.
pub fn draw_population<T: Real>(
    n: usize,
    params: &ModelParams<T>,
    stream: &mut RandomStream,
) -> Result<PopulationSample<T>> {
    if n == 0 {
        return Err(Error::InvalidInput("population size must be at least 1".into()));
    }
    let threshold = solve_threshold(params.tau, params)?;
    let agg = params.agg_shock();
    let agg_shock = stream.normal(agg.mean, agg.std_dev());

    let seed = stream.master_seed();
    let base = stream.stream_index().wrapping_shl(32);
    let ability = params.ability();
    let idio = params.idio_shock();
    let pairs: Vec<(T, T)> = par_chunks(n, CHUNK, |c, range| {
        let mut s = make_stream(seed, base.wrapping_add(c + 1));
        range
            .map(|_| {
                let mu = s.normal(ability.mean, ability.std_dev());
                let e = s.normal(idio.mean, idio.std_dev());
                (mu, e)
            })
            .collect()
    });
    let (abilities, idio_shocks): (Vec<T>, Vec<T>) = pairs.into_iter().unzip();
    let roles = abilities.par_iter().map(|&mu| classify(mu, &threshold).role).collect();
    Ok(PopulationSample { abilities, roles, idio_shocks, agg_shock, n, threshold, seed })
}

fn user_terms<T: Real>(sample: &PopulationSample<T>, threshold: &ThresholdSolution<T>) -> (Vec<f64>, usize) {
    let terms: Vec<f64> = sample
        .abilities
        .par_iter()
        .zip(&sample.idio_shocks)
        .map(|(&mu, &e)| match classify(mu, threshold).role {
            Role::HighUser => (mu + e).exp().as_f64(),
            Role::LowProvider => 0.0,
        })
        .collect();
    let users = terms.iter().filter(|&&x| x > 0.0).count();
    (terms, users)
}

fn power_note<T: Real>(params: &ModelParams<T>) -> Option<&'static str> {
    (params.sigma_mu.as_f64() > 2.0)
        .then_some("insufficient power: sigma_mu > 2 makes the sample SE unreliable")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlnReport {
    /// `(1/n) sum_users e^(mu_j + eps_j)` against `m E[e^mu | user]`.
    pub aggregate: CheckReport,
    /// `(1/n) sum_users y_j` against the aggregate output formula.
    pub output: CheckReport,
}

impl LlnReport {
    pub fn pass(&self) -> bool {
        self.aggregate.pass && self.output.pass
    }
}

pub fn lln_check<T: Real>(
    sample: &PopulationSample<T>,
    threshold: &ThresholdSolution<T>,
    params: &ModelParams<T>,
) -> Result<LlnReport> {
    let (terms, users) = user_terms(sample, threshold);
    if users == 0 {
        return Err(Error::DegeneratePopulation("no data users in the sample".into()));
    }
    let (observed, se) = mean_and_se(&terms);
    let expected = (threshold.m * threshold.tail_mean).as_f64();
    let mut aggregate = CheckReport::statistical("lln_aggregate", expected, observed, se).with_seed(sample.seed);

    let scale = (params.data_contribution * sample.agg_shock.exp()).as_f64();
    let y: Vec<f64> = terms.iter().map(|x| x * scale).collect();
    let (y_obs, y_se) = mean_and_se(&y);
    let y_exp = aggregate_output(threshold.mu_k, sample.agg_shock, params)?.as_f64();
    let mut output = CheckReport::statistical("lln_aggregate_output", y_exp, y_obs, y_se).with_seed(sample.seed);
    if let Some(note) = power_note(params) {
        aggregate = aggregate.with_note(note);
        output = output.with_note(note);
    }
    Ok(LlnReport { aggregate, output })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClearingReport {
    /// `sum_i N^{ij}` against `1 - theta`.
    pub share_sum: CheckReport,
    /// Largest `|N^0_i|`.
    pub risk_free: CheckReport,
}

impl ClearingReport {
    pub fn pass(&self) -> bool {
        self.share_sum.pass && self.risk_free.pass
    }
}

/// Equity shares `N^{ij} = (1 - theta) e^(mu_i) / sum_p e^(mu_p)`.
pub fn equity_shares<T: Real>(abilities: &[T], theta: T) -> Vec<T> {
    let top = abilities.iter().copied().fold(T::neg_infinity(), T::max);
    let weights: Vec<T> = abilities.iter().map(|&mu| (mu - top).exp()).collect();
    let total = tree_sum(&weights);
    weights.iter().map(|&w| (T::one() - theta) * w / total).collect()
}

pub fn market_clearing_check<T: Real>(sample: &PopulationSample<T>, theta: T) -> Result<ClearingReport> {
    if sample.n < 2 {
        return Err(Error::InvalidInput("market clearing needs at least two agents".into()));
    }
    if !(theta >= T::zero() && theta <= T::one()) {
        return Err(Error::InvalidInput(format!("theta must lie in [0, 1], got {theta}")));
    }
    let shares = equity_shares(&sample.abilities, theta);
    let sum = tree_sum(&shares).as_f64();
    let share_sum = CheckReport::exact("market_clearing_share_sum", (T::one() - theta).as_f64(), sum, 1e-12);

    // N^0_i = (1 - theta) M_i - sum_j N^{ij} M_j = (1 - theta) M_i (1 - S / S)
    let top = sample.abilities.iter().copied().fold(T::neg_infinity(), T::max);
    let m: Vec<T> = sample.abilities.iter().map(|&mu| (mu - top).exp()).collect();
    let total = tree_sum(&m);
    #[allow(clippy::eq_op)]
    let worst = m
        .iter()
        .map(|&mi| ((T::one() - theta) * mi * (T::one() - total / total)).abs().as_f64())
        .fold(0.0, f64::max);
    let risk_free = CheckReport::exact("risk_free_holdings_max_abs", 0.0, worst, 0.0);
    Ok(ClearingReport { share_sum, risk_free })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeRow {
    pub n: usize,
    /// Signed relative deviation of total portfolio consumption from the
    /// closed form.
    pub deviation: f64,
    pub se: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsumptionReport {
    pub rows: Vec<SizeRow>,
    /// Standard errors shrink with `n`.
    pub shrinking: bool,
    pub provider: CheckReport,
    pub seed: u64,
}

impl ConsumptionReport {
    pub fn pass(&self) -> bool {
        self.rows.last().is_some_and(|r| r.pass) && self.shrinking && self.provider.pass
    }
}

struct Economy<T> {
    abilities: Vec<T>,
    idio: Vec<T>,
    eps: T,
}

fn draw_economy<T: Real>(n: usize, params: &ModelParams<T>, seed: u64, index: u64) -> Economy<T> {
    let mut s = make_stream(seed, index);
    let agg = params.agg_shock();
    let eps = s.normal(agg.mean, agg.std_dev());
    let ability = params.ability();
    let idio = params.idio_shock();
    let pairs: Vec<(T, T)> = par_chunks(n, CHUNK, |c, range| {
        let mut s = make_stream(seed, index.wrapping_shl(32).wrapping_add(c + 1));
        range
            .map(|_| (s.normal(ability.mean, ability.std_dev()), s.normal(idio.mean, idio.std_dev())))
            .collect()
    });
    let (abilities, idio) = pairs.into_iter().unzip();
    Economy { abilities, idio, eps }
}

/// Compares consumption built from portfolio holdings (retained share of own
/// output plus diversified claims on every user) with the closed form
/// `(1 - tau) D e^(mu_i) e^eps [theta e^(eps_i) + 1 - theta]`, and provider
/// consumption from pooled data payments with its closed form.
pub fn consumption_convergence<T: Real>(
    params: &ModelParams<T>,
    sizes: &[usize],
    stream: &RandomStream,
) -> Result<ConsumptionReport> {
    if sizes.is_empty() || sizes.windows(2).any(|w| w[1] <= w[0]) || sizes[0] < 2 {
        return Err(Error::InvalidInput("sizes must be strictly increasing and at least 2".into()));
    }
    let seed = stream.master_seed();
    let base = stream.stream_index().wrapping_shl(8);
    let theta = params.theta;
    let one = T::one();
    let mut rows = Vec::with_capacity(sizes.len());
    for (k, &n) in sizes.iter().enumerate() {
        let eco = draw_economy(n, params, seed, base.wrapping_add(k as u64 + 1));
        let top = eco.abilities.iter().copied().fold(T::neg_infinity(), T::max);
        let m: Vec<T> = eco.abilities.iter().map(|&mu| (mu - top).exp()).collect();
        let me: Vec<T> = m.iter().zip(&eco.idio).map(|(&mi, &e)| mi * e.exp()).collect();
        let total = tree_sum(&m);
        let ratio = tree_sum(&me) / total;
        let common = (one - params.tau) * params.data_contribution * eco.eps.exp() * top.exp();
        let portfolio: Vec<T> = m
            .iter()
            .zip(&eco.idio)
            .map(|(&mi, &e)| common * mi * (theta * e.exp() + (one - theta) * ratio))
            .collect();
        let closed: Vec<T> = m
            .iter()
            .zip(&eco.idio)
            .map(|(&mi, &e)| common * mi * (theta * e.exp() + (one - theta)))
            .collect();
        let closed_total = tree_sum(&closed);
        let deviation = ((tree_sum(&portfolio) - closed_total) / closed_total).as_f64();

        // delta method for R = sum m_j e^(eps_j) / sum m_j
        let u: Vec<f64> = m.iter().zip(&me).map(|(&mi, &mei)| (mei - mi).as_f64()).collect();
        let (_, u_se) = mean_and_se(&u);
        let mean_m = (total / T::from_usize_lossy(n)).as_f64();
        let r_se = u_se / mean_m;
        let k_factor = ((one - theta) * common * total / closed_total).as_f64();
        let se = k_factor * r_se;
        let pass = if se == 0.0 { deviation == 0.0 } else { deviation.abs() <= SE_RULE * se };
        rows.push(SizeRow { n, deviation, se, pass });
    }
    let shrinking = rows.windows(2).all(|w| w[1].se <= w[0].se);

    let n = *sizes.last().expect("non-empty");
    let provider = provider_consumption_check(params, n, seed, base)?;
    Ok(ConsumptionReport { rows, shrinking, provider, seed })
}

fn provider_consumption_check<T: Real>(params: &ModelParams<T>, n: usize, seed: u64, base: u64) -> Result<CheckReport> {
    let sol = solve_threshold(params.tau, params)?;
    let eco = draw_economy(n, params, seed, base.wrapping_add(0xff));
    let d = params.data_contribution.as_f64();
    let x: Vec<f64> = eco
        .abilities
        .iter()
        .zip(&eco.idio)
        .map(|(&mu, &e)| match classify(mu, &sol).role {
            Role::HighUser => d * (mu + e).exp().as_f64(),
            Role::LowProvider => 0.0,
        })
        .collect();
    let p: Vec<f64> = eco
        .abilities
        .iter()
        .map(|&mu| if classify(mu, &sol).role == Role::LowProvider { 1.0 } else { 0.0 })
        .collect();
    let a = tree_sum(&x) / n as f64;
    let b = tree_sum(&p) / n as f64;
    if b == 0.0 || b == 1.0 {
        return Err(Error::DegeneratePopulation("sample has no providers or no users".into()));
    }
    let scale = (params.tau * eco.eps.exp()).as_f64();
    let ratio = a / b;
    let resid: Vec<f64> = x.iter().zip(&p).map(|(xi, pi)| xi - ratio * pi).collect();
    let (_, resid_se) = mean_and_se(&resid);
    let observed = scale * ratio;
    let se = scale * resid_se / b;
    let expected = scale * d * (sol.m * sol.tail_mean / (T::one() - sol.m)).as_f64();
    Ok(CheckReport::statistical("provider_consumption", expected, observed, se).with_seed(seed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SortingReport {
    pub check: CheckReport,
    pub compared: usize,
    /// Agents within the boundary band, left out of the comparison.
    pub excluded: usize,
}

/// Checks that `user_utility > provider_utility` exactly for the agents the
/// threshold classifies as users.
pub fn role_sorting_check<T: Real>(
    sample: &PopulationSample<T>,
    tau: T,
    params: &ModelParams<T>,
) -> Result<SortingReport> {
    let sol = solve_threshold(tau, params)?;
    let v_s = provider_utility(tau, sol.m, sol.tail_mean, params)?;
    let band = T::lit(BOUNDARY_BAND);
    let outcomes: Vec<Option<bool>> = sample
        .abilities
        .par_iter()
        .map(|&mu| {
            if (mu - params.mu_bar - sol.mu_k).abs() < band {
                return Ok(None);
            }
            let prefers_use = user_utility(mu, tau, params)? > v_s;
            let is_user = classify(mu, &sol).role == Role::HighUser;
            Ok(Some(prefers_use == is_user))
        })
        .collect::<Result<_>>()?;
    let compared = outcomes.iter().filter(|o| o.is_some()).count();
    let excluded = outcomes.len() - compared;
    let agree = outcomes.iter().filter(|o| **o == Some(true)).count();
    let fraction = if compared == 0 { 1.0 } else { agree as f64 / compared as f64 };
    let mut check = CheckReport::exact("role_sorting_agreement", 1.0, fraction, 0.0).with_seed(sample.seed);
    if excluded > 0 {
        check = check.with_note(format!("{excluded} agent(s) inside the boundary band"));
    }
    Ok(SortingReport { check, compared, excluded })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ModelParams<f64> {
        ModelParams::reference()
    }

    #[test]
    fn population_moments() {
        let p = params();
        let mut s = make_stream(42, 0);
        let pop = draw_population(100_000, &p, &mut s).unwrap();
        assert_eq!(pop.abilities.len(), 100_000);
        assert_eq!(pop.roles.len(), 100_000);
        let (mean, _) = mean_and_se(&pop.abilities);
        assert!(mean.abs() <= 3.0 / (1e5f64).sqrt());
        let e: Vec<f64> = pop.abilities.iter().map(|m| m.exp()).collect();
        let (em, se) = mean_and_se(&e);
        assert!((em - 0.5f64.exp()).abs() <= 3.0 * se);
        for (mu, role) in pop.abilities.iter().zip(&pop.roles) {
            assert_eq!(*role, classify(*mu, &pop.threshold).role);
        }
    }

    #[test]
    fn single_agent_and_determinism() {
        let p = params();
        let one = draw_population(1, &p, &mut make_stream(1, 0)).unwrap();
        assert_eq!(one.n, 1);
        let a = draw_population(40_000, &p, &mut make_stream(9, 2)).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| draw_population(40_000, &p, &mut make_stream(9, 2)).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn lln_passes() {
        let p = params();
        let pop = draw_population(200_000, &p, &mut make_stream(42, 0)).unwrap();
        let r = lln_check(&pop, &pop.threshold, &p).unwrap();
        assert!(r.pass(), "{r:?}");
    }

    #[test]
    fn lln_degenerate_ability() {
        let mut p = params();
        p.sigma_mu = 1e-3;
        let p = p.revalidate().unwrap();
        let pop = draw_population(50_000, &p, &mut make_stream(3, 0)).unwrap();
        let r = lln_check(&pop, &pop.threshold, &p).unwrap();
        assert!((r.aggregate.expected - pop.threshold.m).abs() < 1e-2);
        assert!(r.pass(), "{r:?}");
    }

    #[test]
    fn lln_rejects_empty_user_set() {
        let p = params();
        let mut pop = draw_population(10, &p, &mut make_stream(3, 0)).unwrap();
        let mut th = pop.threshold;
        th.mu_k = 1e6;
        th.k = 1e6;
        pop.threshold = th;
        assert!(matches!(lln_check(&pop, &th, &p), Err(Error::DegeneratePopulation(_))));
    }

    #[test]
    fn clearing_is_exact() {
        let p = params();
        let pop = draw_population(10_000, &p, &mut make_stream(5, 0)).unwrap();
        let r = market_clearing_check(&pop, 0.1).unwrap();
        assert!(r.pass(), "{r:?}");
        assert_eq!(r.risk_free.observed, 0.0);
        let shares = equity_shares(&[0.3f64, 0.3], 0.1);
        assert!(shares.iter().all(|&s| (s - 0.45).abs() < 1e-15));
    }

    #[test]
    fn consumption_coincides_without_diversification() {
        let mut p = params();
        p.theta = 1.0;
        let p = p.revalidate().unwrap();
        let r = consumption_convergence(&p, &[100, 1000], &make_stream(7, 0)).unwrap();
        assert!(r.rows.iter().all(|row| row.deviation == 0.0 && row.se == 0.0 && row.pass));
    }

    #[test]
    fn consumption_converges() {
        let p = params();
        let r = consumption_convergence(&p, &[1_000, 10_000, 100_000], &make_stream(42, 1)).unwrap();
        assert!(r.pass(), "{r:?}");
        let ratio = r.rows[0].se / r.rows[2].se;
        assert!(ratio > 5.0 && ratio < 20.0, "se ratio {ratio}");
        assert!(consumption_convergence(&p, &[100, 100], &make_stream(1, 0)).is_err());
    }

    #[test]
    fn sorting_agrees_both_branches() {
        for gamma in [2.0, 1.0, 0.5] {
            let mut p = params();
            p.gamma = gamma;
            let p = p.revalidate().unwrap();
            let pop = draw_population(10_000, &p, &mut make_stream(11, 0)).unwrap();
            let r = role_sorting_check(&pop, p.tau, &p).unwrap();
            assert!(r.check.pass, "gamma={gamma}: {r:?}");
        }
    }

    #[test]
    fn sorting_excludes_boundary_agent() {
        let p = params();
        let mut pop = draw_population(100, &p, &mut make_stream(2, 0)).unwrap();
        pop.abilities[0] = pop.threshold.k;
        let r = role_sorting_check(&pop, p.tau, &p).unwrap();
        assert_eq!(r.excluded, 1);
        assert_eq!(r.compared, 99);
        assert!(r.check.note.is_some());
    }

    #[test]
    fn report_json_fields() {
        let c = CheckReport::statistical("x", 1.0, 1.1, 0.05).with_seed(4);
        let v = serde_json::to_value(&c).unwrap();
        for key in ["statistic", "expected", "observed", "se", "pass", "seed"] {
            assert!(v.get(key).is_some());
        }
        assert!(v.get("note").is_none());
        assert!(c.pass);
        assert!(!CheckReport::statistical("x", 1.0, 1.2, 0.05).pass);
    }
}
