//! The full property suite: every invariant as one [`CheckReport`] line.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mc::{
    consumption_convergence, draw_population, lln_check, market_clearing_check, role_sorting_check, CheckReport,
};
use crate::model::{validate, ModelParams};
use crate::numerics::normal::std_hazard;
use crate::numerics::rng::mean_and_se;
use crate::numerics::{
    expect_gauss_hermite, make_stream, normal_cdf, portfolio_moment, solve_bracketed, GaussianSpec, DEFAULT_ORDER,
};
use crate::statics::{
    aggregate_output_forms, hazard_inequality_holds, log_output_ratio, threshold_sensitivity, theorem1_report,
};
use crate::threshold::{f_threshold, provider_utility, solve_threshold, user_utility};
use crate::wealth::{
    expected_capital, f_lambda, f_mu, log_drift, mc_expected_capital, mc_jump_product, simulate_path, solve_lambda,
    solve_lambda_for_level, InitialShocks,
};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Agents in the large-population checks.
    pub population: usize,
    /// Paths in the capital checks.
    pub paths: usize,
}

impl VerifyOptions {
    pub fn new(seed: u64) -> Self {
        Self { seed, population: 1_000_000, paths: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suite {
    pub seed: u64,
    pub population: usize,
    pub paths: usize,
    pub passed: usize,
    pub failed: usize,
    pub pass: bool,
    pub checks: Vec<CheckReport>,
}

impl Suite {
    pub fn get(&self, statistic: &str) -> Option<&CheckReport> {
        self.checks.iter().find(|c| c.statistic == statistic)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckReport> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|i| lo + step * i as f64).collect()
}

/// Counts grid steps where `values` fails to increase; expected 0.
fn increasing(statistic: &str, values: &[f64]) -> CheckReport {
    let bad = values.windows(2).filter(|w| !(w[1] > w[0])).count();
    CheckReport::exact(statistic, 0.0, bad as f64, 0.0)
}

fn max_abs(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().fold(0.0, |a, b| if b.is_nan() { f64::NAN } else { a.max(b.abs()) })
}

fn edit(base: &ModelParams<f64>, f: impl FnOnce(&mut ModelParams<f64>)) -> Result<ModelParams<f64>> {
    let mut p = *base;
    f(&mut p);
    Ok(p.revalidate()?)
}

fn numerics_checks(p: &ModelParams<f64>, out: &mut Vec<CheckReport>) -> Result<()> {
    let spec = GaussianSpec::new(p.mu_bar, p.sigma_mu * p.sigma_mu)?;
    let xs = grid(0.0, 8.0, 0.01);
    let mut sym = Vec::with_capacity(xs.len());
    for &x in &xs {
        sym.push(normal_cdf(p.mu_bar + x, &spec)? + normal_cdf(p.mu_bar - x, &spec)? - 1.0);
    }
    out.push(CheckReport::exact("normal_cdf_symmetry_max_error", 0.0, max_abs(sym), 1e-12));
    let cdf: Vec<f64> = grid(-8.0, 8.0, 0.01)
        .iter()
        .map(|&z| normal_cdf(p.mu_bar + z * p.sigma_mu, &spec))
        .collect::<Result<_>>()?;
    let non_monotone = cdf.windows(2).filter(|w| w[1] < w[0]).count();
    out.push(CheckReport::exact("normal_cdf_monotone_violations", 0.0, non_monotone as f64, 0.0));

    let hz: Vec<f64> = grid(-5.0, 5.0, 0.01).iter().map(|&z| std_hazard(z)).collect();
    out.push(increasing("hazard_rate_increasing_violations", &hz));

    let shock = GaussianSpec::new(-0.3, 0.49)?;
    let mut worst: f64 = 0.0;
    for a in -2..=2 {
        let a = a as f64;
        let got = expect_gauss_hermite(|x: f64| (a * x).exp(), &shock, DEFAULT_ORDER)?;
        let want = (a * -0.3 + a * a * 0.49 / 2.0).exp();
        worst = worst.max(((got - want) / want).abs());
    }
    out.push(CheckReport::exact("gauss_hermite_lognormal_max_rel_error", 0.0, worst, 1e-10));

    let s1 = p.sigma_idio;
    let mut endpoint: f64 = 0.0;
    for gamma in [0.5, 2.0, 5.0] {
        let at0 = portfolio_moment(0.0, s1, gamma)?;
        let at1 = portfolio_moment(1.0, s1, gamma)?;
        let k = 1.0 - gamma;
        let want1 = (k * -s1 * s1 / 2.0 + k * k * s1 * s1 / 2.0).exp();
        endpoint = endpoint.max((at0 - 1.0).abs()).max((at1 - want1).abs());
    }
    endpoint = endpoint
        .max(portfolio_moment(0.0, s1, 1.0)?.abs())
        .max((portfolio_moment(1.0, s1, 1.0)? + s1 * s1 / 2.0).abs());
    out.push(CheckReport::exact("portfolio_moment_endpoints_max_error", 0.0, endpoint, 1e-8));

    let mut limit: f64 = 0.0;
    for theta in [0.05, 0.1, 0.2] {
        let log_branch = portfolio_moment(theta, s1, 1.0)?;
        for gamma in [1.0 - 1e-4, 1.0 + 1e-4] {
            let transformed = (portfolio_moment(theta, s1, gamma)? - 1.0) / (1.0 - gamma);
            limit = limit.max((transformed - log_branch).abs());
        }
    }
    out.push(CheckReport::exact("portfolio_moment_log_limit_max_gap", 0.0, limit, 1e-6));

    let mut outside = 0;
    for (i, (lo, hi)) in [(-3.0, 2.0), (0.0, 1.0), (-10.0, 10.0), (0.5, 7.0)].into_iter().enumerate() {
        let shift = 0.37 * i as f64 - 0.4;
        let x = solve_bracketed(|x: f64| x * x * x - shift, lo, hi, 1e-14);
        match x {
            Ok(x) if x < lo || x > hi => outside += 1,
            Ok(_) | Err(Error::Bracketing { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    out.push(CheckReport::exact("bracketed_root_outside_bracket", 0.0, outside as f64, 0.0));
    Ok(())
}

fn model_checks(p: &ModelParams<f64>, out: &mut Vec<CheckReport>) -> Result<()> {
    let once = validate(&p.to_raw())?;
    let twice = validate(&once.to_raw())?;
    let same = if once == twice && once == *p { 1.0 } else { 0.0 };
    out.push(CheckReport::exact("validation_idempotent", 1.0, same, 0.0));
    let mut gap: f64 = 0.0;
    for spec in [p.agg_shock(), p.idio_shock()] {
        let mean = expect_gauss_hermite(|x: f64| x.exp(), &spec, DEFAULT_ORDER)?;
        gap = gap.max((mean - 1.0).abs());
    }
    out.push(CheckReport::exact("shock_exp_mean_max_error", 0.0, gap, 1e-12));
    Ok(())
}

fn threshold_checks(p: &ModelParams<f64>, seed: u64, out: &mut Vec<CheckReport>) -> Result<()> {
    let mut sym: f64 = 0.0;
    for s in [0.25, 0.5, 1.0, 2.0] {
        for gamma in [1.0, 2.0, 5.0] {
            let q = edit(p, |q| {
                q.theta = 0.0;
                q.sigma_mu = s;
                q.gamma = gamma;
            })?;
            sym = sym.max((solve_threshold(0.5, &q)?.mu_k - s * s / 2.0).abs());
        }
    }
    out.push(CheckReport::exact("symmetry_fixed_point_max_error", 0.0, sym, 1e-10));

    let mut rng = make_stream(seed, 0x5eed_0001);
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        let u = |r: &mut crate::numerics::RandomStream, lo: f64, hi: f64| lo + (hi - lo) * r.uniform();
        let gamma = if i % 2 == 0 { 1.0 } else { u(&mut rng, 0.5, 5.0) };
        let q = edit(p, |q| {
            q.gamma = gamma;
            q.sigma_mu = u(&mut rng, 0.3, 2.0);
            q.theta = u(&mut rng, 0.0, 0.5);
            q.sigma_agg = u(&mut rng, 0.05, 0.5);
            q.sigma_idio = u(&mut rng, 0.1, 1.0);
            q.data_contribution = u(&mut rng, 0.5, 2.0);
            q.mu_bar = u(&mut rng, -0.5, 0.5);
        })?;
        let tau = u(&mut rng, 0.1, 0.9);
        let sol = solve_threshold(tau, &q)?;
        let vu = user_utility(sol.k, tau, &q)?;
        let vs = provider_utility(tau, sol.m, sol.tail_mean, &q)?;
        worst = worst.max((vu - vs).abs());
    }
    out.push(CheckReport::exact("threshold_indifference_max_gap", 0.0, worst, 1e-8));

    let h = 1e-5;
    let mut slopes = Vec::new();
    for &z in &grid(-5.0, 5.0, 0.05) {
        let mu = z * p.sigma_mu;
        slopes.push((f_threshold(p.tau, mu + h, p)? - f_threshold(p.tau, mu - h, p)?) / (2.0 * h));
    }
    let non_negative = slopes.iter().filter(|&&s| !(s < 0.0)).count();
    out.push(CheckReport::exact("threshold_map_slope_nonnegative_count", 0.0, non_negative as f64, 0.0));

    let mut m = Vec::new();
    for &tau in &grid(0.05, 0.95, 0.05) {
        m.push(-solve_threshold(tau, p)?.m);
    }
    out.push(increasing("participation_decreasing_in_tau_violations", &m));
    Ok(())
}

fn statics_checks(p: &ModelParams<f64>, out: &mut Vec<CheckReport>) -> Result<()> {
    let mus = grid(-4.0, 4.0, 0.01);
    let mut bad = 0;
    for s in [0.25, 0.5, 1.0, 2.0] {
        let vals: Vec<f64> = mus.iter().map(|&mu| log_output_ratio(mu, s)).collect::<Result<_>>()?;
        bad += vals.windows(2).filter(|w| !(w[1] > w[0])).count();
    }
    out.push(CheckReport::exact("output_ratio_monotone_violations", 0.0, bad as f64, 0.0));

    let bad = [0.25, 1.0, 4.0]
        .iter()
        .flat_map(|&v| mus.iter().map(move |&mu| hazard_inequality_holds(mu, v)))
        .filter(|ok| !ok)
        .count();
    out.push(CheckReport::exact("hazard_inequality_violations", 0.0, bad as f64, 0.0));

    let h = 1e-5;
    let mut non_positive = 0;
    let mut worst: f64 = 0.0;
    for &tau in &grid(0.05, 0.95, 0.05) {
        let s = threshold_sensitivity(tau, p)?;
        if !(s > 0.0) {
            non_positive += 1;
        }
        let fd = (solve_threshold(tau + h, p)?.mu_k - solve_threshold(tau - h, p)?.mu_k) / (2.0 * h);
        worst = worst.max(((s - fd) / fd).abs());
    }
    out.push(CheckReport::exact("sensitivity_nonpositive_count", 0.0, non_positive as f64, 0.0));
    out.push(CheckReport::exact("sensitivity_fd_max_rel_error", 0.0, worst, 1e-5));

    let eps = p.agg_shock().mean;
    let mut gap: f64 = 0.0;
    for &mu in &grid(-5.0, 5.0, 0.05) {
        let f = aggregate_output_forms(mu, eps, p)?;
        gap = gap.max(((f.with_participation - f.simplified) / f.simplified).abs());
    }
    out.push(CheckReport::exact("aggregate_output_forms_max_rel_gap", 0.0, gap, 1e-12));

    let r = theorem1_report(0.3, 0.6, p)?;
    let v = r.recompute_verdicts();
    let holding = [v.d_h_gt_d_l, v.z_h_gt_z_l, v.y_h_gt_y_l, v.lambda_h_gt_lambda_l]
        .iter()
        .filter(|&&b| b)
        .count();
    let mut check = CheckReport::exact("theorem1_orderings_holding", 4.0, holding as f64, 0.0);
    if !(r.lambda_l >= 1.0) {
        check.pass = false;
        check = check.with_note("lambda_L below 1");
    }
    out.push(check);
    Ok(())
}

fn wealth_checks(p: &ModelParams<f64>, opts: &VerifyOptions, out: &mut Vec<CheckReport>) -> Result<()> {
    let (lambda, t) = (2.0, 1.0);
    let sets = [
        ("no_risky_share", edit(p, |q| q.alpha = 0.0)?),
        ("diffusion_only", edit(p, |q| q.w = 0.0)?),
        ("diffusion_and_jumps", edit(p, |q| q.w = 0.5)?),
    ];
    for (i, (name, q)) in sets.iter().enumerate() {
        let seed = opts.seed.wrapping_add(100 + i as u64);
        let est = mc_expected_capital(q, lambda, t, opts.paths, seed)?;
        let want = expected_capital(q, t, lambda)?;
        let stat = format!("expected_capital_mc_{name}");
        let check = if est.standard_error == 0.0 {
            CheckReport::exact(&stat, want, est.estimate, 1e-12 * want)
        } else {
            CheckReport::statistical(&stat, want, est.estimate, est.standard_error)
        };
        out.push(check.with_seed(seed));
    }

    let q = edit(p, |q| q.w = 0.5)?;
    let seed = opts.seed.wrapping_add(200);
    let est = mc_jump_product(&q, 2.0, opts.paths, seed)?;
    let want = (q.w * 2.0 * (q.mean_jump_factor() - 1.0)).exp();
    out.push(CheckReport::statistical("jump_product_mean", want, est.estimate, est.standard_error).with_seed(seed));

    // standardized log K increments between jumps
    let q = edit(p, |q| {
        q.w = 2.0;
        if q.sigma_w == 0.0 {
            q.sigma_w = 0.2;
        }
        if q.alpha == 0.0 {
            q.alpha = 0.5;
        }
    })?;
    let seed = opts.seed.wrapping_add(300);
    let drift = log_drift(&q, lambda);
    let vol = q.alpha * q.sigma_w;
    let mut z = Vec::new();
    for i in 0..(opts.paths / 10).max(1000) {
        let mut s = make_stream(seed, i as u64);
        let path = simulate_path(&q, lambda, 2.0, &mut s)?;
        let mut jumps = path.jump_times.iter().zip(&path.jump_losses).peekable();
        for k in 0..path.times.len() - 1 {
            let dt = path.times[k + 1] - path.times[k];
            if dt <= 0.0 {
                continue;
            }
            let mut inc = path.log_k[k + 1] - path.log_k[k];
            if let Some(&(&jt, &loss)) = jumps.peek() {
                if jt == path.times[k + 1] {
                    inc -= (1.0 - q.alpha * loss).ln();
                    jumps.next();
                }
            }
            z.push((inc - drift * dt) / (vol * dt.sqrt()));
        }
    }
    let (zm, zse) = mean_and_se(&z);
    out.push(CheckReport::statistical("log_increment_standardized_mean", 0.0, zm, zse).with_seed(seed));
    let sq: Vec<f64> = z.iter().map(|x| x * x).collect();
    let (vm, vse) = mean_and_se(&sq);
    out.push(CheckReport::statistical("log_increment_standardized_variance", 1.0, vm, vse).with_seed(seed));

    let shocks = InitialShocks::at_means(p);
    let lo = p.t_star - f_mu(0.0, p, &shocks).ln();
    let lambdas: Vec<f64> = (0..50)
        .map(|i| solve_lambda(lo + 0.05 + 0.1 * i as f64, p, &shocks).map(|s| s.lambda))
        .collect::<Result<_>>()?;
    out.push(increasing("lambda_increasing_in_ability_violations", &lambdas));

    let trivial = solve_lambda_for_level(p.t_star, p.t_star)?;
    out.push(CheckReport::exact("lambda_trivial_root", 1.0, trivial.lambda, 1e-12));

    let reported = matches!(solve_lambda_for_level(p.t_star - 0.5, p.t_star), Err(Error::NoSolution { .. }));
    out.push(CheckReport::exact("lambda_no_solution_reported", 1.0, if reported { 1.0 } else { 0.0 }, 0.0));

    let mut gap: f64 = 0.0;
    for &l in &grid(1.0, 20.0, 0.5) {
        for &tt in &[1.5, 2.0, 5.0] {
            gap = gap.max((f_lambda(l, tt)? * l * (-l * tt).exp() - 1.0).abs());
        }
    }
    out.push(CheckReport::exact("f_lambda_identity_max_error", 0.0, gap, 1e-12));
    Ok(())
}

fn mc_checks(p: &ModelParams<f64>, opts: &VerifyOptions, out: &mut Vec<CheckReport>) -> Result<()> {
    let mut stream = make_stream(opts.seed, 1);
    let pop = draw_population(opts.population, p, &mut stream)?;
    let lln = lln_check(&pop, &pop.threshold, p)?;
    out.push(lln.aggregate);
    out.push(lln.output);
    let clearing = market_clearing_check(&pop, p.theta)?;
    out.push(clearing.share_sum);
    out.push(clearing.risk_free);

    let sizes = [1_000, 10_000, 100_000];
    let cons = consumption_convergence(p, &sizes, &make_stream(opts.seed, 2))?;
    let last = cons.rows.last().expect("sizes non-empty");
    let mut check = CheckReport::statistical("consumption_relative_deviation", 0.0, last.deviation, last.se)
        .with_seed(opts.seed);
    if last.se == 0.0 {
        check.pass = last.deviation == 0.0;
    }
    if !cons.shrinking {
        check.pass = false;
        check = check.with_note("standard error did not shrink with n");
    }
    out.push(check);
    out.push(cons.provider);

    let sample = draw_population(10_000, p, &mut make_stream(opts.seed, 3))?;
    let sorting = role_sorting_check(&sample, p.tau, p)?;
    let mut c = sorting.check;
    c.statistic = "role_sorting_agreement".into();
    out.push(c);
    let log_p = edit(p, |q| q.gamma = 1.0)?;
    let sample = draw_population(10_000, &log_p, &mut make_stream(opts.seed, 4))?;
    let mut c = role_sorting_check(&sample, log_p.tau, &log_p)?.check;
    c.statistic = "role_sorting_agreement_log_utility".into();
    out.push(c);
    Ok(())
}

/// Runs every check. Errors only when a computation cannot be carried out;
/// a failed property is a `pass: false` line.
pub fn run_suite(params: &ModelParams<f64>, opts: &VerifyOptions) -> Result<Suite> {
    let mut checks = Vec::new();
    numerics_checks(params, &mut checks)?;
    model_checks(params, &mut checks)?;
    threshold_checks(params, opts.seed, &mut checks)?;
    statics_checks(params, &mut checks)?;
    wealth_checks(params, opts, &mut checks)?;
    mc_checks(params, opts, &mut checks)?;
    let passed = checks.iter().filter(|c| c.pass).count();
    let failed = checks.len() - passed;
    Ok(Suite {
        seed: opts.seed,
        population: opts.population,
        paths: opts.paths,
        passed,
        failed,
        pass: failed == 0,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suite_passes_and_is_reproducible() {
        let p = ModelParams::<f64>::reference();
        let opts = VerifyOptions { seed: 42, population: 100_000, paths: 20_000 };
        let a = run_suite(&p, &opts).unwrap();
        for c in a.failures() {
            eprintln!("{c:?}");
        }
        assert!(a.pass);
        let b = run_suite(&p, &opts).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let names: std::collections::HashSet<_> = a.checks.iter().map(|c| c.statistic.as_str()).collect();
        assert_eq!(names.len(), a.checks.len());
    }
}
