//! Gauss-Hermite expectations under a Gaussian law.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::numerics::normal::GaussianSpec;
use crate::scalar::Real;

/// Default number of nodes for expectations of smooth integrands.
pub const DEFAULT_ORDER: usize = 40;
const MAX_ORDER: usize = 320;

/// Nodes and weights for `E[g(Z)]`, `Z ~ N(0, 1)`.
///
/// Stored in probabilists' normalization: nodes are `sqrt(2) x_i` and weights
/// are `w_i / sqrt(pi)` for the physicists' rule `(x_i, w_i)`, so the weights
/// sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
    pub order: usize,
}

impl<T: Real> QuadratureRule<T> {
    pub fn gauss_hermite(order: usize) -> Result<Self> {
        let base = cached_rule(order)?;
        Ok(Self {
            nodes: base.nodes.iter().map(|&x| T::lit(x)).collect(),
            weights: base.weights.iter().map(|&w| T::lit(w)).collect(),
            order,
        })
    }

    /// `E[g(X)]` for `X ~ spec`.
    pub fn expect<G>(&self, spec: &GaussianSpec<T>, mut g: G) -> Result<T>
    where
        G: FnMut(T) -> T,
    {
        let sd = spec.std_dev();
        let mut acc = T::zero();
        for (i, (&z, &w)) in self.nodes.iter().zip(&self.weights).enumerate() {
            let x = spec.mean + sd * z;
            let gx = g(x);
            if !gx.is_finite() {
                return Err(Error::Evaluation { node: i, x: x.as_f64() });
            }
            acc = acc + w * gx;
        }
        Ok(acc)
    }
}

fn cached_rule(order: usize) -> Result<Arc<QuadratureRule<f64>>> {
    if order < 2 {
        return Err(Error::InvalidInput(format!("quadrature order must be >= 2, got {order}")));
    }
    if order > MAX_ORDER {
        return Err(Error::InvalidInput(format!(
            "quadrature order {order} exceeds the supported maximum {MAX_ORDER}"
        )));
    }
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<QuadratureRule<f64>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    if let Some(rule) = guard.get(&order) {
        return Ok(Arc::clone(rule));
    }
    let rule = Arc::new(build_rule(order)?);
    guard.insert(order, Arc::clone(&rule));
    Ok(rule)
}

/// Golub-Welsch: the nodes are the eigenvalues of the symmetric tridiagonal
/// Jacobi matrix of the probabilists' Hermite recurrence (zero diagonal,
/// off-diagonal `sqrt(k)`), and each weight is the squared first component of
/// the matching unit eigenvector. Eigenpairs by implicit QL with Wilkinson
/// shifts, tracking only the first row of the eigenvector matrix.
fn build_rule(n: usize) -> Result<QuadratureRule<f64>> {
    let mut d = vec![0.0f64; n];
    let mut e: Vec<f64> = (1..=n).map(|k| if k < n { (k as f64).sqrt() } else { 0.0 }).collect();
    let mut z = vec![0.0f64; n];
    z[0] = 1.0;

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 100 {
                return Err(Error::Solver {
                    message: format!("Jacobi eigenvalue {l} of order {n} did not converge"),
                    trace: vec![(d[l], e[l])],
                });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0f64, 1.0f64, 0.0f64);
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let zf = z[i + 1];
                z[i + 1] = s * z[i] + c * zf;
                z[i] = c * z[i] - s * zf;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }

    let mut pairs: Vec<(f64, f64)> = d.into_iter().zip(z.into_iter().map(|v| v * v)).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // the rule is symmetric; enforce it exactly
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (pairs[j].0 - pairs[i].0);
        let w = 0.5 * (pairs[i].1 + pairs[j].1);
        pairs[i] = (-x, w);
        pairs[j] = (x, w);
    }
    if n % 2 == 1 {
        pairs[n / 2].0 = 0.0;
    }
    let nodes = pairs.iter().map(|p| p.0).collect();
    let weights = pairs.iter().map(|p| p.1).collect();
    Ok(QuadratureRule { nodes, weights, order: n })
}

/// Gauss-Hermite approximation of `E[g(X)]`, `X ~ spec`; exact for
/// polynomials of degree `<= 2 order - 1`.
pub fn expect_gauss_hermite<T, G>(g: G, spec: &GaussianSpec<T>, order: usize) -> Result<T>
where
    T: Real,
    G: FnMut(T) -> T,
{
    QuadratureRule::gauss_hermite(order)?.expect(spec, g)
}

/// Doubles the order from `start` until successive estimates differ by less
/// than `tol`. Returns the estimate and the order that achieved it.
pub fn expect_adaptive<T, G>(
    mut g: G,
    spec: &GaussianSpec<T>,
    start: usize,
    tol: T,
) -> Result<(T, usize)>
where
    T: Real,
    G: FnMut(T) -> T,
{
    let mut order = start.max(2);
    let mut prev = expect_gauss_hermite(&mut g, spec, order)?;
    while order * 2 <= MAX_ORDER {
        let next = expect_gauss_hermite(&mut g, spec, order * 2)?;
        if (next - prev).abs() < tol {
            return Ok((next, order * 2));
        }
        prev = next;
        order *= 2;
    }
    Err(Error::NumericalRange(format!(
        "Gauss-Hermite expectation did not settle below {tol} by order {order}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_are_normalized() {
        for &n in &[2usize, 5, 20, 40, 80, 160, 320] {
            let rule = QuadratureRule::<f64>::gauss_hermite(n).unwrap();
            assert_eq!(rule.nodes.len(), n);
            assert_eq!(rule.weights.len(), n);
            assert!(rule.weights.iter().all(|&w| w >= 0.0));
            let total: f64 = rule.weights.iter().sum();
            assert!((total - 1.0).abs() < 1e-12, "order {n}: {total}");
            assert!(rule.nodes.windows(2).all(|p| p[0] < p[1]));
        }
    }

    #[test]
    fn two_point_rule_is_plus_minus_one() {
        let rule = QuadratureRule::<f64>::gauss_hermite(2).unwrap();
        assert!((rule.nodes[0] + 1.0).abs() < 1e-14 && (rule.nodes[1] - 1.0).abs() < 1e-14);
        assert!((rule.weights[0] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn constant_and_quadratic() {
        let spec = GaussianSpec::new(0.3, 2.0).unwrap();
        assert!((expect_gauss_hermite(|_| 1.0f64, &spec, 20).unwrap() - 1.0).abs() < 1e-13);
        let s = GaussianSpec::standard();
        assert!((expect_gauss_hermite(|x: f64| x * x, &s, 20).unwrap() - 1.0).abs() < 1e-13);
        // E[X^4] = 3, exact once 2n-1 >= 4
        assert!((expect_gauss_hermite(|x: f64| x.powi(4), &s, 3).unwrap() - 3.0).abs() < 1e-13);
    }

    #[test]
    fn mean_one_lognormal() {
        let spec = GaussianSpec::new(-0.125, 0.25).unwrap();
        let m = expect_gauss_hermite(|x: f64| x.exp(), &spec, 40).unwrap();
        assert!((m - 1.0).abs() < 1e-13);
    }

    #[test]
    fn lognormal_moment_identity() {
        for spec in [GaussianSpec::standard(), GaussianSpec::new(-0.125, 0.25).unwrap()] {
            for a in -2..=2 {
                let a = a as f64;
                let got = expect_gauss_hermite(|x: f64| (a * x).exp(), &spec, 40).unwrap();
                let want = (a * spec.mean + a * a * spec.variance / 2.0).exp();
                assert!(((got - want) / want).abs() < 1e-10, "a={a}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn names_the_failing_node() {
        let s = GaussianSpec::standard();
        let err = expect_gauss_hermite(|x: f64| if x > 0.0 { f64::NAN } else { 1.0 }, &s, 4);
        match err {
            Err(Error::Evaluation { node, x }) => {
                assert_eq!(node, 2);
                assert!(x > 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_order_below_two() {
        let s = GaussianSpec::<f64>::standard();
        assert!(matches!(expect_gauss_hermite(|_| 1.0, &s, 1), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn adaptive_settles() {
        let s = GaussianSpec::new(-0.125, 0.25).unwrap();
        let (v, order) = expect_adaptive(|x: f64| (0.1 * x.exp() + 0.9).powf(-1.0), &s, 40, 1e-10).unwrap();
        assert!(order >= 80);
        assert!(v.is_finite());
    }
}
