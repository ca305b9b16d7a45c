//! Distribution kernels, quadrature, root finding and random streams.

pub mod normal;
pub mod quadrature;
pub mod rng;
pub mod roots;

pub use normal::{
    hazard_rate, normal_cdf, normal_log_cdf, normal_log_sf, normal_pdf, normal_sf, GaussianSpec,
};
pub use quadrature::{expect_adaptive, expect_gauss_hermite, QuadratureRule, DEFAULT_ORDER};
pub use rng::{make_stream, RandomStream};
pub use roots::{brent, solve_bracketed, Root};

use crate::error::Result;
use crate::scalar::Real;

/// Tolerance for the adaptive doubling check on quadrature orders.
fn moment_tol<T: Real>() -> T {
    T::lit(1e-10).max(T::epsilon() * T::lit(1e3))
}

/// `γ` within this distance of one selects the logarithmic branch.
pub(crate) fn is_log_utility<T: Real>(gamma: T) -> bool {
    (gamma - T::one()).abs() <= T::epsilon() * T::lit(8.0)
}

/// Moment of the retained-plus-diversified portfolio return
/// `g = theta e^e + (1 - theta)`, `e ~ N(-s^2/2, s^2)`:
/// `E[g^(1-gamma)]` for `gamma != 1`, `E[log g]` for `gamma == 1`.
pub fn portfolio_moment<T: Real>(theta: T, sigma1: T, gamma: T) -> Result<T> {
    use crate::error::Error;
    if !(theta >= T::zero() && theta <= T::one()) {
        return Err(Error::InvalidInput(format!("theta must lie in [0, 1], got {theta}")));
    }
    if !(gamma > T::zero() && gamma.is_finite()) {
        return Err(Error::InvalidInput(format!("gamma must be positive, got {gamma}")));
    }
    let spec = GaussianSpec::mean_one_log(sigma1)?;
    let keep = T::one() - theta;
    let (value, _) = if is_log_utility(gamma) {
        expect_adaptive(|e| (theta * e.exp() + keep).ln(), &spec, DEFAULT_ORDER, moment_tol())?
    } else {
        let p = T::one() - gamma;
        expect_adaptive(|e| (theta * e.exp() + keep).powf(p), &spec, DEFAULT_ORDER, moment_tol())?
    };
    Ok(value)
}
