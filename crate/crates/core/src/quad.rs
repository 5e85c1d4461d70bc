//! Gauss-Legendre quadrature, used for chord integrals and the ellipsoid
//! parametrizations of the kernel series.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Nodes and weights of an `n`-point Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre<S> {
    pub nodes: Vec<S>,
    pub weights: Vec<S>,
}

impl<S: Scalar> GaussLegendre<S> {
    /// Builds the rule by Newton iteration on the Legendre recurrence.
    pub fn new(n: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::validation("Gauss-Legendre order must be >= 1"));
        }
        let mut nodes = vec![S::zero(); n];
        let mut weights = vec![S::zero(); n];
        let nf = S::of_usize(n);
        let eps = S::epsilon() * S::of(4.0);
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess for the i-th root.
            let mut x = (S::PI() * (S::of_usize(i) + S::of(0.75)) / (nf + S::of(0.5))).cos();
            let mut dp = S::one();
            for _ in 0..100 {
                // Legendre recurrence for P_n(x) and P_{n-1}(x).
                let mut p0 = S::one();
                let mut p1 = x;
                for j in 2..=n {
                    let jf = S::of_usize(j);
                    let p2 = ((S::of(2.0) * jf - S::one()) * x * p1 - (jf - S::one()) * p0) / jf;
                    p0 = p1;
                    p1 = p2;
                }
                dp = nf * (x * p1 - p0) / (x * x - S::one());
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() <= eps {
                    break;
                }
            }
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            let w = S::of(2.0) / ((S::one() - x * x) * dp * dp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = S::zero();
        }
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate(&self, a: S, b: S, mut f: impl FnMut(S) -> S) -> S {
        let half = (b - a) * S::of(0.5);
        let mid = (b + a) * S::of(0.5);
        let mut acc = S::zero();
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }

    /// Node/weight pairs mapped onto `[a, b]`.
    pub fn mapped(&self, a: S, b: S) -> impl Iterator<Item = (S, S)> + '_ {
        let half = (b - a) * S::of(0.5);
        let mid = (b + a) * S::of(0.5);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, w * half))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        let rule = GaussLegendre::<f64>::new(6).unwrap();
        // degree 11 is exact for a 6-point rule
        let got = rule.integrate(0.0, 1.0, |x| x.powi(11));
        assert!((got - 1.0 / 12.0).abs() < 1e-14, "got {got}");
    }

    #[test]
    fn symmetric_bump_integral_closed_form() {
        // \int_{-1}^{1} (1-u^2)^5 du = 512/693
        let rule = GaussLegendre::<f64>::new(8).unwrap();
        let got = rule.integrate(-1.0, 1.0, |u| (1.0 - u * u).powi(5));
        assert!((got - 512.0 / 693.0).abs() < 1e-14, "got {got}");
    }

    #[test]
    fn works_in_f32() {
        let rule = GaussLegendre::<f32>::new(16).unwrap();
        let got = rule.integrate(0.0f32, std::f32::consts::PI, |x| x.sin());
        assert!((got - 2.0).abs() < 1e-5, "got {got}");
    }

    #[test]
    fn rejects_zero_order() {
        assert!(GaussLegendre::<f64>::new(0).is_err());
    }
}
