//! Normal distribution kernels.
//!
//! Right-tail quantities are evaluated through `erfc` directly, and beyond
//! six standard deviations through the Mills-ratio continued fraction, so
//! `1 - cdf` is never formed by subtraction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Standardized abscissa beyond which tails switch to the asymptotic form.
const TAIL_SWITCH: f64 = 6.0;

/// `N(mean, variance)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec<T> {
    pub mean: T,
    pub variance: T,
}

impl<T: Real> GaussianSpec<T> {
    pub fn new(mean: T, variance: T) -> Result<Self> {
        if !mean.is_finite() {
            return Err(Error::InvalidInput(format!("gaussian mean must be finite, got {mean}")));
        }
        if !(variance.is_finite() && variance > T::zero()) {
            return Err(Error::InvalidInput(format!(
                "gaussian variance must be positive, got {variance}"
            )));
        }
        Ok(Self { mean, variance })
    }

    pub fn standard() -> Self {
        Self { mean: T::zero(), variance: T::one() }
    }

    /// Lognormal shock with `E[e^X] = 1`: `N(-s^2/2, s^2)`.
    pub fn mean_one_log(std: T) -> Result<Self> {
        let v = std * std;
        Self::new(-v / T::lit(2.0), v)
    }

    #[inline]
    pub fn std_dev(&self) -> T {
        self.variance.sqrt()
    }

    #[inline]
    fn standardize(&self, x: T) -> T {
        (x - self.mean) / self.std_dev()
    }
}

fn check_finite<T: Real>(x: T) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("argument must be finite, got {x}")))
    }
}

#[inline]
pub(crate) fn std_pdf<T: Real>(z: T) -> T {
    let inv_sqrt_2pi = T::FRAC_2_SQRT_PI() * T::FRAC_1_SQRT_2() / T::lit(2.0);
    inv_sqrt_2pi * (-z * z / T::lit(2.0)).exp()
}

/// Mills ratio `(1 - Phi(z)) / phi(z)` by Lentz's continued fraction.
/// Converges quickly for `z` above a few units.
pub(crate) fn mills_ratio_cf<T: Real>(z: T) -> T {
    let tiny = T::min_positive_value().sqrt();
    let eps = T::epsilon();
    // R(z) = 1 / (z + 1/(z + 2/(z + 3/(z + ...))))
    let mut f = z;
    if f == T::zero() {
        f = tiny;
    }
    let mut c = f;
    let mut d = T::zero();
    for k in 1..500 {
        let a = T::from_usize_lossy(k);
        d = z + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = z + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = T::one() / d;
        let delta = c * d;
        f = f * delta;
        if (delta - T::one()).abs() < eps {
            break;
        }
    }
    T::one() / f
}

/// Standard normal survival function `1 - Phi(z)`.
#[inline]
pub(crate) fn std_sf<T: Real>(z: T) -> T {
    (z * T::FRAC_1_SQRT_2()).erfc() / T::lit(2.0)
}

#[inline]
pub(crate) fn std_cdf<T: Real>(z: T) -> T {
    (-z * T::FRAC_1_SQRT_2()).erfc() / T::lit(2.0)
}

/// `log(1 - Phi(z))`, finite for every finite `z`.
pub(crate) fn std_log_sf<T: Real>(z: T) -> T {
    if z > T::lit(TAIL_SWITCH) {
        let log_pdf = -z * z / T::lit(2.0) - (T::lit(2.0) * T::PI()).sqrt().ln();
        log_pdf + mills_ratio_cf(z).ln()
    } else if z < T::zero() {
        (-std_cdf(z)).ln_1p()
    } else {
        std_sf(z).ln()
    }
}

/// `phi(z) / (1 - Phi(z))`.
pub(crate) fn std_hazard<T: Real>(z: T) -> T {
    if z > T::lit(TAIL_SWITCH) {
        T::one() / mills_ratio_cf(z)
    } else {
        std_pdf(z) / std_sf(z)
    }
}

pub fn normal_pdf<T: Real>(x: T, spec: &GaussianSpec<T>) -> Result<T> {
    check_finite(x)?;
    Ok(std_pdf(spec.standardize(x)) / spec.std_dev())
}

pub fn normal_cdf<T: Real>(x: T, spec: &GaussianSpec<T>) -> Result<T> {
    check_finite(x)?;
    Ok(std_cdf(spec.standardize(x)))
}

/// Survival function `1 - cdf(x)` without cancellation.
pub fn normal_sf<T: Real>(x: T, spec: &GaussianSpec<T>) -> Result<T> {
    check_finite(x)?;
    Ok(std_sf(spec.standardize(x)))
}

/// `log(1 - cdf(x))`; stays finite deep in the right tail.
pub fn normal_log_sf<T: Real>(x: T, spec: &GaussianSpec<T>) -> Result<T> {
    check_finite(x)?;
    let out = std_log_sf(spec.standardize(x));
    if out.is_finite() {
        Ok(out)
    } else {
        Err(Error::NumericalRange(format!("log survival underflow at x = {x}")))
    }
}

/// `log(cdf(x))`; stays finite deep in the left tail.
pub fn normal_log_cdf<T: Real>(x: T, spec: &GaussianSpec<T>) -> Result<T> {
    check_finite(x)?;
    let out = std_log_sf(-spec.standardize(x));
    if out.is_finite() {
        Ok(out)
    } else {
        Err(Error::NumericalRange(format!("log cdf underflow at x = {x}")))
    }
}

/// Hazard rate `pdf(x) / (1 - cdf(x))`.
pub fn hazard_rate<T: Real>(x: T, spec: &GaussianSpec<T>) -> Result<T> {
    check_finite(x)?;
    let h = std_hazard(spec.standardize(x)) / spec.std_dev();
    if h.is_finite() && h > T::zero() {
        Ok(h)
    } else {
        Err(Error::NumericalRange(format!("hazard rate out of range at x = {x}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn std() -> GaussianSpec<f64> {
        GaussianSpec::standard()
    }

    #[test]
    fn pdf_values() {
        assert!((normal_pdf(0.0, &std()).unwrap() - 0.398_942_280_401_432_7).abs() < 1e-15);
        // mpmath: exp(-1/2)/sqrt(2 pi)
        assert!((normal_pdf(1.0, &std()).unwrap() - 0.241_970_724_519_143_35).abs() < 1e-15);
        let spec = GaussianSpec::new(1.7, 0.36).unwrap();
        let mode = normal_pdf(1.7, &spec).unwrap();
        assert!((mode - 1.0 / (2.0 * std::f64::consts::PI * 0.36).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn cdf_values() {
        assert_eq!(normal_cdf(0.0, &std()).unwrap(), 0.5);
        assert!((normal_cdf(40.0, &std()).unwrap() - 1.0).abs() < 1e-15);
        // mpmath: ncdf(1.6449) = 0.95000478253165...
        assert!((normal_cdf(1.6449, &std()).unwrap() - 0.950_004_782_531_653_7).abs() < 1e-14);
    }

    #[test]
    fn hazard_values() {
        assert!((hazard_rate(0.0, &std()).unwrap() - 0.797_884_560_802_865_4).abs() < 1e-14);
        // mpmath: npdf(1)/(1-ncdf(1))
        assert!((hazard_rate(1.0, &std()).unwrap() - 1.525_135_276_160_981_2).abs() < 1e-13);
    }

    #[test]
    fn hazard_location_scale() {
        let spec = GaussianSpec::new(0.4, 2.25).unwrap();
        for &x in &[-3.0, -0.2, 0.4, 1.1, 5.0] {
            let direct = hazard_rate(x, &spec).unwrap();
            let scaled = hazard_rate((x - 0.4) / 1.5, &std()).unwrap() / 1.5;
            assert!((direct - scaled).abs() < 1e-13 * direct.max(1.0));
        }
    }

    #[test]
    fn tail_forms_agree_near_switch() {
        for &z in &[4.0f64, 5.0, 5.5, 6.0, 6.5, 7.5] {
            let direct = std_pdf(z) / std_sf(z);
            let cf = 1.0 / mills_ratio_cf(z);
            assert!(((direct - cf) / cf).abs() < 1e-12, "z={z}");
            let log_direct = std_sf(z).ln();
            let log_cf = -z * z / 2.0 - (2.0 * std::f64::consts::PI).sqrt().ln() + mills_ratio_cf(z).ln();
            assert!((log_direct - log_cf).abs() < 1e-12, "z={z}");
        }
    }

    #[test]
    fn deep_tail_stays_finite() {
        let h = hazard_rate(60.0, &std()).unwrap();
        assert!((h - 60.0).abs() / 60.0 < 1e-3);
        let ls = normal_log_sf(60.0, &std()).unwrap();
        assert!(ls < -1800.0 && ls.is_finite());
        let lc = normal_log_cdf(-60.0, &std()).unwrap();
        assert_eq!(ls, lc);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(matches!(normal_pdf(f64::NAN, &std()), Err(Error::InvalidInput(_))));
        assert!(matches!(normal_cdf(f64::INFINITY, &std()), Err(Error::InvalidInput(_))));
        assert!(GaussianSpec::new(0.0, 0.0).is_err());
        assert!(GaussianSpec::<f64>::new(0.0, -1.0).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let s = GaussianSpec::<f32>::standard();
        assert!((normal_cdf(1.0f32, &s).unwrap() - 0.841_344_7).abs() < 1e-6);
        assert!((hazard_rate(1.0f32, &s).unwrap() - 1.525_135_3).abs() < 1e-5);
    }
}
