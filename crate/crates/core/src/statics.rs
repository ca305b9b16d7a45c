//! Comparative statics of the threshold and the High/Low ordering report.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::numerics::normal::{std_hazard, std_log_sf, std_sf};
use crate::scalar::Real;
use crate::threshold::{f_threshold, solve_threshold};
use crate::wealth::{solve_lambda, InitialShocks};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Partials<T> {
    #[serde(rename = "dF_dtau")]
    pub df_dtau: T,
    #[serde(rename = "dF_dmu")]
    pub df_dmu: T,
}

/// Analytic partial derivatives of `F(tau, mu)` at `mu_k`.
pub fn partials<T: Real>(tau: T, mu_k: T, params: &ModelParams<T>) -> Partials<T> {
    let s = params.sigma_mu;
    let z = mu_k / s;
    // hazard of N(s^2, s^2) at mu_k plus the reverse hazard of N(0, s^2)
    let up = std_hazard(z - s) / s;
    let down = std_hazard(-z) / s;
    Partials { df_dtau: T::one() / (tau * (T::one() - tau)), df_dmu: -(up + down) }
}

/// `d mu_k / d tau` by the implicit function theorem.
pub fn threshold_sensitivity<T: Real>(tau: T, params: &ModelParams<T>) -> Result<T> {
    let sol = solve_threshold(tau, params)?;
    let p = partials(tau, sol.mu_k, params);
    Ok(p.df_dtau / (T::one() - p.df_dmu))
}

/// Central finite difference of `F` in each argument.
pub fn partials_fd<T: Real>(tau: T, mu: T, params: &ModelParams<T>, h: T) -> Result<Partials<T>> {
    let two_h = h + h;
    Ok(Partials {
        df_dtau: (f_threshold(tau + h, mu, params)? - f_threshold(tau - h, mu, params)?) / two_h,
        df_dmu: (f_threshold(tau, mu + h, params)? - f_threshold(tau, mu - h, params)?) / two_h,
    })
}

/// `f(mu) = (1 - Phi(mu; s^2, s^2)) / (1 - Phi(mu; 0, s^2))`; increasing in `mu`.
pub fn output_ratio<T: Real>(mu_k: T, sigma_mu: T) -> Result<T> {
    log_output_ratio(mu_k, sigma_mu).map(|v| v.exp())
}

/// `log f(mu)`. Far in the left tail `f - 1` is below one ulp of `f`, while
/// the log keeps full relative precision there.
pub fn log_output_ratio<T: Real>(mu_k: T, sigma_mu: T) -> Result<T> {
    if !(sigma_mu > T::zero() && sigma_mu.is_finite()) {
        return Err(Error::InvalidInput(format!("sigma_mu must be positive, got {sigma_mu}")));
    }
    if mu_k == T::neg_infinity() {
        return Ok(T::zero());
    }
    if !mu_k.is_finite() {
        return Err(Error::InvalidInput(format!("mu_k must be finite, got {mu_k}")));
    }
    let z = mu_k / sigma_mu;
    Ok(std_log_sf(z - sigma_mu) - std_log_sf(z))
}

/// Output per unit of `D e^eps e^(mu_bar + s^2/2)` when user mass is `m`:
/// `m f(mu)`.
fn output_with_participation<T: Real>(mu: T, m: T, eps: T, params: &ModelParams<T>) -> Result<T> {
    let s = params.sigma_mu;
    let scale = params.data_contribution * (eps + params.mu_bar + s * s / T::lit(2.0)).exp();
    Ok(scale * m * output_ratio(mu, s)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutputForms<T> {
    /// `D e^eps m e^(mu_bar + s^2/2) f(mu_k)` with `m = 1 - Phi(mu_k; 0, s^2)`.
    pub with_participation: T,
    /// `D e^eps e^(mu_bar + s^2/2) (1 - Phi(mu_k; s^2, s^2))`.
    pub simplified: T,
}

pub fn aggregate_output_forms<T: Real>(mu_k: T, eps_agg: T, params: &ModelParams<T>) -> Result<OutputForms<T>> {
    if !eps_agg.is_finite() {
        return Err(Error::InvalidInput(format!("aggregate shock must be finite, got {eps_agg}")));
    }
    let s = params.sigma_mu;
    let scale = params.data_contribution * (eps_agg + params.mu_bar + s * s / T::lit(2.0)).exp();
    let (m, simplified) = if mu_k == T::neg_infinity() {
        (T::one(), scale)
    } else {
        (std_sf(mu_k / s), scale * std_sf(mu_k / s - s))
    };
    Ok(OutputForms {
        with_participation: output_with_participation(mu_k, m, eps_agg, params)?,
        simplified,
    })
}

/// Aggregate user output at threshold `mu_k` and aggregate shock `eps_agg`.
///
/// Both algebraic forms are evaluated; a disagreement beyond rounding is
/// reported as a range error.
pub fn aggregate_output<T: Real>(mu_k: T, eps_agg: T, params: &ModelParams<T>) -> Result<T> {
    let forms = aggregate_output_forms(mu_k, eps_agg, params)?;
    let tol = T::lit(1e-12).max(T::epsilon() * T::lit(64.0));
    let (a, b) = (forms.with_participation, forms.simplified);
    if (a - b).abs() > tol * b.abs() {
        return Err(Error::NumericalRange(format!(
            "aggregate output forms disagree at mu_k = {mu_k}: {a} vs {b}"
        )));
    }
    Ok(b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Technology<T> {
    pub d: T,
    pub z: T,
}

/// Data scale `d = d0 tau` and technology `z = d^eta`.
pub fn tech_from_tau<T: Real>(tau: T, params: &ModelParams<T>) -> Result<Technology<T>> {
    if !(tau > T::zero() && tau < T::one()) {
        return Err(Error::InvalidInput(format!("tau must lie in (0, 1), got {tau}")));
    }
    let d = params.d0 * tau;
    Ok(Technology { d, z: d.powf(params.eta) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdicts {
    #[serde(rename = "d_H_gt_d_L")]
    pub d_h_gt_d_l: bool,
    #[serde(rename = "z_H_gt_z_L")]
    pub z_h_gt_z_l: bool,
    #[serde(rename = "y_H_gt_y_L")]
    pub y_h_gt_y_l: bool,
    #[serde(rename = "lambda_H_gt_lambda_L")]
    pub lambda_h_gt_lambda_l: bool,
}

impl Verdicts {
    pub fn all(&self) -> bool {
        self.d_h_gt_d_l && self.z_h_gt_z_l && self.y_h_gt_y_l && self.lambda_h_gt_lambda_l
    }
}

/// Options for [`theorem1_report_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Theorem1Options<T> {
    /// Ability gap around each threshold; `None` means `0.5 sigma_mu`.
    pub delta: Option<T>,
    /// Common aggregate shock; `None` means its mean.
    pub eps_agg: Option<T>,
    pub shocks: Option<InitialShocks<T>>,
}

impl<T> Default for Theorem1Options<T> {
    fn default() -> Self {
        Self { delta: None, eps_agg: None, shocks: None }
    }
}

/// High/Low comparison at two data cost rates.
///
/// `y` is output at the two abilities under a common aggregate shock and a
/// common user mass `m_ref`, the participation at the midpoint cost rate.
/// The variant that lets `m` move with each threshold is reported alongside
/// in `y_*_own_participation`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Report<T> {
    #[serde(rename = "tau_L")]
    pub tau_l: T,
    #[serde(rename = "tau_H")]
    pub tau_h: T,
    pub delta: T,
    pub eps_agg: T,
    #[serde(rename = "mu_k_L")]
    pub mu_k_l: T,
    #[serde(rename = "mu_k_H")]
    pub mu_k_h: T,
    #[serde(rename = "mu_L")]
    pub mu_l: T,
    #[serde(rename = "mu_H")]
    pub mu_h: T,
    pub tau_ref: T,
    pub m_ref: T,
    #[serde(rename = "d_L")]
    pub d_l: T,
    #[serde(rename = "d_H")]
    pub d_h: T,
    #[serde(rename = "z_L")]
    pub z_l: T,
    #[serde(rename = "z_H")]
    pub z_h: T,
    #[serde(rename = "y_L")]
    pub y_l: T,
    #[serde(rename = "y_H")]
    pub y_h: T,
    #[serde(rename = "y_L_own_participation")]
    pub y_l_own: T,
    #[serde(rename = "y_H_own_participation")]
    pub y_h_own: T,
    #[serde(rename = "lambda_L")]
    pub lambda_l: T,
    #[serde(rename = "lambda_H")]
    pub lambda_h: T,
    pub verdicts: Verdicts,
}

impl<T: Real> Theorem1Report<T> {
    /// Orderings computed from the stored values.
    pub fn recompute_verdicts(&self) -> Verdicts {
        Verdicts {
            d_h_gt_d_l: self.d_h > self.d_l,
            z_h_gt_z_l: self.z_h > self.z_l,
            y_h_gt_y_l: self.y_h > self.y_l,
            lambda_h_gt_lambda_l: self.lambda_h > self.lambda_l,
        }
    }
}

pub fn theorem1_report<T: Real>(tau_l: T, tau_h: T, params: &ModelParams<T>) -> Result<Theorem1Report<T>> {
    theorem1_report_with(tau_l, tau_h, params, &Theorem1Options::default())
}

pub fn theorem1_report_with<T: Real>(
    tau_l: T,
    tau_h: T,
    params: &ModelParams<T>,
    opts: &Theorem1Options<T>,
) -> Result<Theorem1Report<T>> {
    if tau_l == tau_h {
        return Err(Error::InvalidInput(format!("degenerate cost rates: tau_L = tau_H = {tau_l}")));
    }
    if tau_h < tau_l {
        return Err(Error::Ordering(format!("expected tau_L < tau_H, got {tau_l} and {tau_h}")));
    }
    let delta = opts.delta.unwrap_or(params.sigma_mu / T::lit(2.0));
    if !(delta > T::zero()) {
        return Err(Error::InvalidInput(format!("ability gap must be positive, got {delta}")));
    }
    let eps = opts.eps_agg.unwrap_or(params.agg_shock().mean);
    let shocks = opts.shocks.unwrap_or_else(|| InitialShocks::at_means(params));

    let low = solve_threshold(tau_l, params)?;
    let high = solve_threshold(tau_h, params)?;
    let tau_ref = (tau_l + tau_h) / T::lit(2.0);
    let reference = solve_threshold(tau_ref, params)?;
    let mu_h = high.mu_k + delta;
    let mu_l = low.mu_k - delta;

    let tech_l = tech_from_tau(tau_l, params)?;
    let tech_h = tech_from_tau(tau_h, params)?;
    let y_h = output_with_participation(mu_h, reference.m, eps, params)?;
    let y_l = output_with_participation(mu_l, reference.m, eps, params)?;
    let lambda_h = solve_lambda(params.mu_bar + mu_h, params, &shocks)?.lambda;
    let lambda_l = solve_lambda(params.mu_bar + mu_l, params, &shocks)?.lambda;

    let mut report = Theorem1Report {
        tau_l,
        tau_h,
        delta,
        eps_agg: eps,
        mu_k_l: low.mu_k,
        mu_k_h: high.mu_k,
        mu_l,
        mu_h,
        tau_ref,
        m_ref: reference.m,
        d_l: tech_l.d,
        d_h: tech_h.d,
        z_l: tech_l.z,
        z_h: tech_h.z,
        y_l,
        y_h,
        y_l_own: aggregate_output(mu_l, eps, params)?,
        y_h_own: aggregate_output(mu_h, eps, params)?,
        lambda_l,
        lambda_h,
        verdicts: Verdicts { d_h_gt_d_l: false, z_h_gt_z_l: false, y_h_gt_y_l: false, lambda_h_gt_lambda_l: false },
    };
    report.verdicts = report.recompute_verdicts();
    Ok(report)
}

/// `phi(mu; 0, s^2) / (1 - Phi(mu; 0, s^2)) > phi(mu - s^2; 0, s^2) / (1 - Phi(mu - s^2; 0, s^2))`.
pub fn hazard_inequality_holds<T: Real>(mu: T, variance: T) -> bool {
    let s = variance.sqrt();
    std_hazard(mu / s) > std_hazard((mu - variance) / s)
}
