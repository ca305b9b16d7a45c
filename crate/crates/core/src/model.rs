//! Model parameters and their validation.
//!
//! [`RawParams`] is the JSON-facing record: every field optional, unknown keys
//! rejected. [`validate`] turns it into an immutable [`ModelParams`] or returns
//! every violated constraint at once.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::numerics::{GaussianSpec, RandomStream};
use crate::scalar::Real;

/// Distribution of the proportional asset loss `L` at a jump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LossDistribution<T> {
    Constant(T),
    /// `high` with probability `p_high`, otherwise `low`.
    TwoPoint { low: T, high: T, p_high: T },
}

impl<T: Real> LossDistribution<T> {
    pub fn mean(&self) -> T {
        match *self {
            Self::Constant(l) => l,
            Self::TwoPoint { low, high, p_high } => low + p_high * (high - low),
        }
    }

    pub fn max(&self) -> T {
        match *self {
            Self::Constant(l) => l,
            Self::TwoPoint { low, high, .. } => low.max(high),
        }
    }

    pub fn sample(&self, stream: &mut RandomStream) -> T {
        match *self {
            Self::Constant(l) => l,
            Self::TwoPoint { low, high, p_high } => {
                if T::lit(stream.uniform()) < p_high {
                    high
                } else {
                    low
                }
            }
        }
    }
}

/// Unvalidated parameter record, as read from JSON.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawParams<T> {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_bar: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_mu: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_agg: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_idio: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<T>,
    #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
    pub data_contribution: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi_depr: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d0: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_f: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu0: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss: Option<LossDistribution<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_w: Option<T>,
    #[serde(rename = "W0", default, skip_serializing_if = "Option::is_none")]
    pub initial_wealth: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_star: Option<T>,
    #[serde(rename = "EK_target", default, skip_serializing_if = "Option::is_none")]
    pub ek_target: Option<T>,
}

impl<T: Real> RawParams<T> {
    /// The reference parameter set used by the CLI and the verification suite.
    pub fn reference() -> Self {
        let l = T::lit;
        Self {
            gamma: Some(l(2.0)),
            mu_bar: Some(l(0.0)),
            sigma_mu: Some(l(1.0)),
            sigma_agg: Some(l(0.2)),
            sigma_idio: Some(l(0.5)),
            theta: Some(l(0.1)),
            tau: Some(l(0.5)),
            data_contribution: Some(l(1.0)),
            pi_depr: Some(l(1.0)),
            eta: Some(l(0.5)),
            d0: Some(l(1.0)),
            r_f: Some(l(0.02)),
            alpha: Some(l(0.5)),
            mu0: Some(l(0.08)),
            w: Some(l(0.1)),
            loss: Some(LossDistribution::Constant(l(0.2))),
            sigma_w: Some(l(0.2)),
            initial_wealth: Some(l(1.0)),
            t_star: Some(l(2.0)),
            ek_target: Some(l(0.01)),
        }
    }

    /// Fields set in `over` replace those in `self`.
    pub fn overlay(mut self, over: &RawParams<T>) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if over.$f.is_some() { self.$f = over.$f; } )* };
        }
        take!(
            gamma, mu_bar, sigma_mu, sigma_agg, sigma_idio, theta, tau, data_contribution,
            pi_depr, eta, d0, r_f, alpha, mu0, w, loss, sigma_w, initial_wealth, t_star, ek_target
        );
        self
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Validated model parameters. Immutable once built; see [`validate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams<T> {
    /// Relative risk aversion; one selects log utility.
    pub gamma: T,
    pub mu_bar: T,
    pub sigma_mu: T,
    /// Std of the aggregate output shock.
    pub sigma_agg: T,
    /// Std of the firm-specific output shock.
    pub sigma_idio: T,
    /// Share of own output a user must retain.
    pub theta: T,
    pub tau: T,
    #[serde(rename = "D")]
    pub data_contribution: T,
    pub pi_depr: T,
    pub eta: T,
    pub d0: T,
    pub r_f: T,
    pub alpha: T,
    pub mu0: T,
    /// Jump intensity.
    pub w: T,
    pub loss: LossDistribution<T>,
    /// Volatility of the wealth diffusion (distinct from `sigma_agg`).
    pub sigma_w: T,
    #[serde(rename = "W0")]
    pub initial_wealth: T,
    pub t_star: T,
    #[serde(rename = "EK_target")]
    pub ek_target: T,
}

impl<T: Real> ModelParams<T> {
    pub fn reference() -> Self {
        validate(&RawParams::reference()).expect("reference parameters are valid")
    }

    pub fn to_raw(&self) -> RawParams<T> {
        RawParams {
            gamma: Some(self.gamma),
            mu_bar: Some(self.mu_bar),
            sigma_mu: Some(self.sigma_mu),
            sigma_agg: Some(self.sigma_agg),
            sigma_idio: Some(self.sigma_idio),
            theta: Some(self.theta),
            tau: Some(self.tau),
            data_contribution: Some(self.data_contribution),
            pi_depr: Some(self.pi_depr),
            eta: Some(self.eta),
            d0: Some(self.d0),
            r_f: Some(self.r_f),
            alpha: Some(self.alpha),
            mu0: Some(self.mu0),
            w: Some(self.w),
            loss: Some(self.loss),
            sigma_w: Some(self.sigma_w),
            initial_wealth: Some(self.initial_wealth),
            t_star: Some(self.t_star),
            ek_target: Some(self.ek_target),
        }
    }

    /// Re-runs validation, typically after editing a field of a copy.
    pub fn revalidate(self) -> Result<Self, ValidationError> {
        validate(&self.to_raw())
    }

    pub fn ability(&self) -> GaussianSpec<T> {
        GaussianSpec { mean: self.mu_bar, variance: self.sigma_mu * self.sigma_mu }
    }

    /// `N(-sigma^2/2, sigma^2)` for the aggregate shock.
    pub fn agg_shock(&self) -> GaussianSpec<T> {
        let v = self.sigma_agg * self.sigma_agg;
        GaussianSpec { mean: -v / T::lit(2.0), variance: v }
    }

    /// `N(-sigma_1^2/2, sigma_1^2)` for the firm-specific shock.
    pub fn idio_shock(&self) -> GaussianSpec<T> {
        let v = self.sigma_idio * self.sigma_idio;
        GaussianSpec { mean: -v / T::lit(2.0), variance: v }
    }

    pub fn is_log_utility(&self) -> bool {
        crate::numerics::is_log_utility(self.gamma)
    }

    /// Total expected excess return `mu0 + w E[L]`.
    pub fn mu_hat(&self) -> T {
        self.mu0 + self.w * self.loss.mean()
    }

    /// `E[1 - alpha L]`.
    pub fn mean_jump_factor(&self) -> T {
        T::one() - self.alpha * self.loss.mean()
    }

    /// Growth rate of expected capital excluding the `-lambda` term:
    /// `r_f + alpha mu_hat + w (E[1 - alpha L] - 1)`.
    pub fn capital_growth_ex_lambda(&self) -> T {
        self.r_f + self.alpha * self.mu_hat() + self.w * (self.mean_jump_factor() - T::one())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationError {
    pub violations: Vec<Violation>,
}

impl ValidationError {
    pub fn has_field(&self, field: &str) -> bool {
        self.violations.iter().any(|v| v.field == field)
    }
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} parameter violation(s): ", self.violations.len())?;
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{}: {}", v.field, v.message)?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationError {}

struct Checker {
    violations: Vec<Violation>,
}

impl Checker {
    fn fail(&mut self, field: &str, message: String) {
        self.violations.push(Violation { field: field.to_string(), message });
    }

    fn required<T: Real>(&mut self, field: &str, v: Option<T>) -> T {
        match v {
            Some(x) if x.is_finite() => x,
            Some(x) => {
                self.fail(field, format!("must be finite, got {x}"));
                T::nan()
            }
            None => {
                self.fail(field, "is required".into());
                T::nan()
            }
        }
    }

    fn positive<T: Real>(&mut self, field: &str, x: T) {
        if x.is_finite() && !(x > T::zero()) {
            self.fail(field, format!("must be > 0, got {x}"));
        }
    }

    fn non_negative<T: Real>(&mut self, field: &str, x: T) {
        if x.is_finite() && !(x >= T::zero()) {
            self.fail(field, format!("must be >= 0, got {x}"));
        }
    }

    fn open_unit<T: Real>(&mut self, field: &str, x: T) {
        if x.is_finite() && !(x > T::zero() && x < T::one()) {
            self.fail(field, format!("must lie in (0, 1), got {x}"));
        }
    }

    fn closed_unit<T: Real>(&mut self, field: &str, x: T) {
        if x.is_finite() && !(x >= T::zero() && x <= T::one()) {
            self.fail(field, format!("must lie in [0, 1], got {x}"));
        }
    }

    fn loss_value<T: Real>(&mut self, field: &str, x: T) {
        if !(x.is_finite() && x >= T::zero() && x < T::one()) {
            self.fail(field, format!("must lie in [0, 1), got {x}"));
        }
    }
}

/// Validates `raw`, filling the defaults `mu_bar = 0`, `pi_depr = 1`, `d0 = 1`.
/// All violations are collected before returning.
pub fn validate<T: Real>(raw: &RawParams<T>) -> Result<ModelParams<T>, ValidationError> {
    let mut c = Checker { violations: Vec::new() };

    let gamma = c.required("gamma", raw.gamma);
    c.positive("gamma", gamma);
    let mu_bar = c.required("mu_bar", Some(raw.mu_bar.unwrap_or_else(T::zero)));
    let sigma_mu = c.required("sigma_mu", raw.sigma_mu);
    c.positive("sigma_mu", sigma_mu);
    let sigma_agg = c.required("sigma_agg", raw.sigma_agg);
    c.positive("sigma_agg", sigma_agg);
    let sigma_idio = c.required("sigma_idio", raw.sigma_idio);
    c.positive("sigma_idio", sigma_idio);
    let theta = c.required("theta", raw.theta);
    c.closed_unit("theta", theta);
    let tau = c.required("tau", raw.tau);
    c.open_unit("tau", tau);
    let data_contribution = c.required("D", raw.data_contribution);
    c.positive("D", data_contribution);
    let pi_depr = c.required("pi_depr", Some(raw.pi_depr.unwrap_or_else(T::one)));
    c.positive("pi_depr", pi_depr);
    let eta = c.required("eta", raw.eta);
    c.open_unit("eta", eta);
    let d0 = c.required("d0", Some(raw.d0.unwrap_or_else(T::one)));
    c.positive("d0", d0);
    let r_f = c.required("r_f", raw.r_f);
    let alpha = c.required("alpha", raw.alpha);
    c.closed_unit("alpha", alpha);
    let mu0 = c.required("mu0", raw.mu0);
    c.positive("mu0", mu0);
    let w = c.required("w", raw.w);
    c.non_negative("w", w);
    let sigma_w = c.required("sigma_w", raw.sigma_w);
    c.non_negative("sigma_w", sigma_w);
    let initial_wealth = c.required("W0", raw.initial_wealth);
    c.positive("W0", initial_wealth);
    let t_star = c.required("t_star", raw.t_star);
    if t_star.is_finite() && !(t_star > T::one()) {
        c.fail("t_star", format!("must be > 1 so that e^(lambda t)/lambda increases on lambda >= 1, got {t_star}"));
    }
    let ek_target = c.required("EK_target", raw.ek_target);
    c.positive("EK_target", ek_target);

    let loss = match raw.loss {
        None => {
            c.fail("loss", "is required".into());
            LossDistribution::Constant(T::zero())
        }
        Some(loss) => {
            match loss {
                LossDistribution::Constant(l) => c.loss_value("loss", l),
                LossDistribution::TwoPoint { low, high, p_high } => {
                    c.loss_value("loss.low", low);
                    c.loss_value("loss.high", high);
                    if !(p_high >= T::zero() && p_high <= T::one()) {
                        c.fail("loss.p_high", format!("must lie in [0, 1], got {p_high}"));
                    }
                }
            }
            loss
        }
    };

    let max_loss = loss.max();
    if alpha.is_finite() && max_loss.is_finite() && !(alpha * max_loss < T::one()) {
        c.fail(
            "alpha",
            format!("alpha * max(L) = {} must be < 1 so that log(1 - alpha L) is defined", alpha * max_loss),
        );
    }
    let mu_hat = mu0 + w * loss.mean();
    if mu0.is_finite() && w.is_finite() && !(mu_hat.is_finite() && mu_hat > T::zero()) {
        c.fail("mu0", format!("mu_hat = mu0 + w E[L] must be finite and positive, got {mu_hat}"));
    }

    if !c.violations.is_empty() {
        return Err(ValidationError { violations: c.violations });
    }
    Ok(ModelParams {
        gamma,
        mu_bar,
        sigma_mu,
        sigma_agg,
        sigma_idio,
        theta,
        tau,
        data_contribution,
        pi_depr,
        eta,
        d0,
        r_f,
        alpha,
        mu0,
        w,
        loss,
        sigma_w,
        initial_wealth,
        t_star,
        ek_target,
    })
}
