use hetdata_core::mc::CheckReport;
use hetdata_core::statics::{output_ratio, partials, theorem1_report_with, Theorem1Options};
use hetdata_core::threshold::solve_threshold;
use hetdata_core::verify::{run_suite, Suite, VerifyOptions};
use hetdata_core::wealth::{expected_capital, figure1_curves, mc_expected_capital, InitialShocks};
use serde::Serialize;

use crate::config::{Command, RunConfig};
use crate::error::CliError;

/// A file to be written into the output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: &'static str,
    pub contents: String,
}

/// Artifacts plus the checks the run is judged by.
#[derive(Debug, Default)]
pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    pub checks: Vec<CheckReport>,
}

impl Outcome {
    pub fn failures(&self) -> Vec<&CheckReport> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }
}

fn json<T: Serialize>(name: &'static str, value: &T) -> Result<Artifact, CliError> {
    let mut contents = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Config(format!("cannot serialize {name}: {e}")))?;
    contents.push('\n');
    Ok(Artifact { name, contents })
}

fn threshold(cfg: &RunConfig, out: &mut Outcome) -> Result<(), CliError> {
    let sols = cfg
        .tau_grid
        .iter()
        .map(|&tau| solve_threshold(tau, &cfg.params))
        .collect::<Result<Vec<_>, _>>()?;
    out.artifacts.push(json("threshold.json", &sols)?);
    Ok(())
}

fn statics(cfg: &RunConfig, out: &mut Outcome) -> Result<(), CliError> {
    let p = &cfg.params;
    let mut csv = String::from("tau,mu_k,m,dF_dtau,dF_dmu,sensitivity,output_ratio\n");
    for &tau in &cfg.tau_grid {
        let sol = solve_threshold(tau, p)?;
        let d = partials(tau, sol.mu_k, p);
        let sensitivity = d.df_dtau / (1.0 - d.df_dmu);
        let ratio = output_ratio(sol.mu_k, p.sigma_mu)?;
        csv.push_str(&format!(
            "{tau},{},{},{},{},{sensitivity},{ratio}\n",
            sol.mu_k, sol.m, d.df_dtau, d.df_dmu
        ));
        out.checks.push(CheckReport::exact(
            &format!("sensitivity_positive_tau_{tau}"),
            1.0,
            if sensitivity > 0.0 { 1.0 } else { 0.0 },
            0.0,
        ));
    }
    out.artifacts.push(Artifact { name: "statics.csv", contents: csv });

    let report = theorem1_report_with(cfg.tau_low, cfg.tau_high, p, &Theorem1Options::default())?;
    let holding = report.verdicts;
    out.checks.push(CheckReport::exact(
        "theorem1_orderings",
        1.0,
        if holding.all() { 1.0 } else { 0.0 },
        0.0,
    ));
    out.artifacts.push(json("theorem1.json", &report)?);
    Ok(())
}

fn wealth(cfg: &RunConfig, out: &mut Outcome) -> Result<(), CliError> {
    let p = &cfg.params;
    let seed = cfg.seed.expect("seed checked at load");
    let horizons = [0.5, 1.0, p.t_star];
    let mut csv = String::from("lambda,t,expected_capital\n");
    for &lambda in &cfg.lambda_grid {
        for &t in &horizons {
            csv.push_str(&format!("{lambda},{t},{}\n", expected_capital(p, t, lambda)?));
        }
    }
    out.artifacts.push(Artifact { name: "wealth.csv", contents: csv });

    let first = cfg.lambda_grid[0];
    let last = *cfg.lambda_grid.last().expect("grid non-empty");
    let mut reports = Vec::new();
    for (i, &(lambda, t)) in [(first, 1.0), (last, 1.0), (first, p.t_star)].iter().enumerate() {
        let s = seed.wrapping_add(i as u64);
        let est = mc_expected_capital(p, lambda, t, cfg.paths, s)?;
        let want = expected_capital(p, t, lambda)?;
        let stat = format!("expected_capital_lambda_{lambda}_t_{t}");
        let check = if est.standard_error == 0.0 {
            CheckReport::exact(&stat, want, est.estimate, 1e-12 * want)
        } else {
            CheckReport::statistical(&stat, want, est.estimate, est.standard_error)
        };
        reports.push(check.with_seed(s));
    }
    out.artifacts.push(json("wealth_mc.json", &reports)?);
    out.checks.extend(reports);
    Ok(())
}

fn figure1(cfg: &RunConfig, out: &mut Outcome) -> Result<(), CliError> {
    let shocks = InitialShocks::at_means(&cfg.params);
    let table = figure1_curves(&cfg.params, &cfg.lambda_grid, &cfg.mu_grid, &shocks)?;
    out.artifacts.push(Artifact { name: "figure1.csv", contents: table.to_csv() });
    Ok(())
}

fn verify(cfg: &RunConfig, out: &mut Outcome) -> Result<Suite, CliError> {
    let opts = VerifyOptions {
        seed: cfg.seed.expect("seed checked at load"),
        population: cfg.population,
        paths: cfg.paths,
    };
    let suite = run_suite(&cfg.params, &opts)?;
    out.artifacts.push(json("verify.json", &suite)?);
    out.checks.extend(suite.checks.iter().cloned());
    Ok(suite)
}

/// Computes every artifact in memory; nothing touches the disk here.
pub fn run(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    match cfg.command {
        Command::Threshold => threshold(cfg, &mut out)?,
        Command::Statics => statics(cfg, &mut out)?,
        Command::Wealth => wealth(cfg, &mut out)?,
        Command::Figure1 => figure1(cfg, &mut out)?,
        Command::Verify => {
            verify(cfg, &mut out)?;
        }
        Command::Report => {
            threshold(cfg, &mut out)?;
            statics(cfg, &mut out)?;
            wealth(cfg, &mut out)?;
            figure1(cfg, &mut out)?;
            verify(cfg, &mut out)?;
            let summary = serde_json::json!({
                "params": cfg.params,
                "seed": cfg.seed,
                "artifacts": out.artifacts.iter().map(|a| a.name).collect::<Vec<_>>(),
                "checks": out.checks.len(),
                "failed": out.failures().len(),
            });
            out.artifacts.push(json("summary.json", &summary)?);
        }
    }
    Ok(out)
}

/// Writes all artifacts; the single writer for a run.
pub fn write_all(dir: &std::path::Path, artifacts: &[Artifact]) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    for a in artifacts {
        std::fs::write(dir.join(a.name), &a.contents)?;
    }
    Ok(())
}
