//! Test potentials: sums of nonnegative radial bumps that are C^4 across
//! their support boundary, compactly supported inside the ball of radius `B`.
//!
//! Each bump evaluates to `amplitude * (1 - |x - center|^2 / radius^2)^5`
//! inside its support sphere and to zero outside; the fifth power vanishes
//! to order five at the boundary, which keeps the global function C^4 while
//! admitting closed-form line integrals for test oracles.

use crate::error::{Error, Result};
use crate::geometry::Chord;
use crate::quad::GaussLegendre;
use crate::scalar::Scalar;
use crate::vec3::Vec3;

/// One radial bump term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpTerm<S> {
    pub center: Vec3<S>,
    pub radius: S,
    pub amplitude: S,
}

/// A potential satisfying the admissibility conditions: C^4, nonnegative,
/// zero outside the ball of radius `B`.
#[derive(Debug, Clone)]
pub struct Potential<S> {
    terms: Vec<BumpTerm<S>>,
    support_radius: S,
}

impl<S: Scalar> Potential<S> {
    /// Validates that every bump is nonnegative and contained in the ball.
    pub fn new(support_radius: S, terms: Vec<BumpTerm<S>>) -> Result<Self> {
        if !(support_radius > S::zero()) {
            return Err(Error::validation("support radius must be > 0"));
        }
        for (i, t) in terms.iter().enumerate() {
            if !(t.radius > S::zero()) {
                return Err(Error::validation(format!("term {i}: radius must be > 0")));
            }
            if t.amplitude < S::zero() {
                return Err(Error::validation(format!(
                    "term {i}: negative amplitude violates nonnegativity"
                )));
            }
            let reach = t.center.norm() + t.radius;
            if reach > support_radius * (S::one() + S::of(1e-12)) {
                return Err(Error::validation(format!(
                    "term {i}: |center| + radius = {reach} escapes the support ball of radius {support_radius}"
                )));
            }
        }
        Ok(Self {
            terms,
            support_radius,
        })
    }

    /// Ball radius `B` containing the support.
    pub fn support_radius(&self) -> S {
        self.support_radius
    }

    pub fn terms(&self) -> &[BumpTerm<S>] {
        &self.terms
    }

    /// Potential scaled by a nonnegative factor.
    pub fn scaled(&self, lambda: S) -> Result<Self> {
        let terms = self
            .terms
            .iter()
            .map(|t| BumpTerm {
                amplitude: t.amplitude * lambda,
                ..*t
            })
            .collect();
        Self::new(self.support_radius, terms)
    }

    /// Pointwise value; zero outside the union of bump supports.
    #[inline]
    pub fn eval(&self, x: Vec3<S>) -> S {
        let mut acc = S::zero();
        for t in &self.terms {
            let d2 = (x - t.center).norm_sq();
            let r2 = t.radius * t.radius;
            if d2 < r2 {
                let u = S::one() - d2 / r2;
                let u2 = u * u;
                acc += t.amplitude * u2 * u2 * u;
            }
        }
        acc
    }

    /// Largest time-of-flight extent of the support as seen from two points:
    /// `max_{xi in supp q} |x - xi| + |x0 - xi|`, bounded bump-by-bump.
    pub fn support_exit_time(&self, x: Vec3<S>, x0: Vec3<S>) -> S {
        let mut t = S::zero();
        for b in &self.terms {
            let cand = x.dist(b.center) + x0.dist(b.center) + S::of(2.0) * b.radius;
            t = t.max(cand);
        }
        t
    }

    /// Grid-estimated sup-norms `(q0, q2, q4)` of the potential and of its
    /// radial derivatives up to orders 2 and 4. These are lower bounds on
    /// the true C^m norms, adequate for the loose series bounds they feed.
    pub fn norms(&self, grid_n: usize) -> Result<(S, S, S)> {
        if grid_n < 32 {
            return Err(Error::validation("norms: need grid_n >= 32 per axis"));
        }
        if self.terms.is_empty() {
            return Ok((S::zero(), S::zero(), S::zero()));
        }
        // q0 on a 3-d grid over the support ball, seeded with the bump
        // centers so isolated peaks are never missed
        let b = self.support_radius;
        let mut q0 = S::zero();
        for t in &self.terms {
            q0 = q0.max(self.eval(t.center));
        }
        let n = grid_n;
        for i in 0..n {
            let x = -b + (S::of_usize(i) + S::of(0.5)) * S::of(2.0) * b / S::of_usize(n);
            for j in 0..n {
                let y = -b + (S::of_usize(j) + S::of(0.5)) * S::of(2.0) * b / S::of_usize(n);
                for k in 0..n {
                    let z = -b + (S::of_usize(k) + S::of(0.5)) * S::of(2.0) * b / S::of_usize(n);
                    q0 = q0.max(self.eval(Vec3::new(x, y, z)));
                }
            }
        }
        // radial-derivative sups per bump on a fine 1-d grid
        let mut d1 = S::zero();
        let mut d2m = S::zero();
        let mut d3 = S::zero();
        let mut d4 = S::zero();
        let m = grid_n * 16;
        for t in &self.terms {
            for i in 0..=m {
                let r = t.radius * S::of_usize(i) / S::of_usize(m);
                d1 = d1.max(radial_derivative(t, r, 1).abs());
                d2m = d2m.max(radial_derivative(t, r, 2).abs());
                d3 = d3.max(radial_derivative(t, r, 3).abs());
                d4 = d4.max(radial_derivative(t, r, 4).abs());
            }
        }
        let q2 = q0.max(d1).max(d2m);
        let q4 = q2.max(d3).max(d4);
        Ok((q0, q2, q4))
    }

    /// Breakpoints in segment parameter `z` where `x0 + z(x - x0)` crosses
    /// a bump boundary; sorted, interior to `(0, 1)`.
    fn segment_breakpoints(&self, x: Vec3<S>, x0: Vec3<S>) -> Vec<S> {
        let d = x - x0;
        let dd = d.norm_sq();
        let mut cuts = Vec::new();
        for t in &self.terms {
            let e = x0 - t.center;
            // |e + z d|^2 = radius^2
            let bq = e.dot(d);
            let cq = e.norm_sq() - t.radius * t.radius;
            let disc = bq * bq - dd * cq;
            if disc > S::zero() {
                let sq = disc.sqrt();
                for z in [(-bq - sq) / dd, (-bq + sq) / dd] {
                    if z > S::zero() && z < S::one() {
                        cuts.push(z);
                    }
                }
            }
        }
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts.dedup_by(|a, b| (*a - *b).abs() < S::of(1e-14));
        cuts
    }

    /// Arc-length integral of the potential over the segment from `x0` to
    /// `x`, applied separately on each smooth piece between bump crossings.
    pub fn segment_integral_with_rule(
        &self,
        x: Vec3<S>,
        x0: Vec3<S>,
        rule: &GaussLegendre<S>,
    ) -> S {
        let cuts = self.segment_breakpoints(x, x0);
        let d = x - x0;
        let mut acc = S::zero();
        let mut lo = S::zero();
        for hi in cuts.into_iter().chain(std::iter::once(S::one())) {
            acc += rule.integrate(lo, hi, |z| self.eval(x0 + d * z));
            lo = hi;
        }
        acc * d.norm()
    }

    /// Chord integral of the potential with a supplied Gauss-Legendre rule.
    pub fn line_integral_with_rule(&self, c: &Chord<S>, rule: &GaussLegendre<S>) -> S {
        self.segment_integral_with_rule(c.x(), c.x0(), rule)
    }

    /// Gauss-Legendre approximation of the arc-length integral of the
    /// potential over the chord.
    pub fn line_integral(&self, c: &Chord<S>, n_quad: usize) -> Result<S> {
        if n_quad < 2 {
            return Err(Error::validation("line_integral: need n_quad >= 2"));
        }
        let rule = GaussLegendre::new(n_quad)?;
        Ok(self.line_integral_with_rule(c, &rule))
    }
}

/// `order`-th derivative of a bump with respect to the radial coordinate,
/// evaluated by exact polynomial differentiation of the degree-10 profile.
pub fn radial_derivative<S: Scalar>(term: &BumpTerm<S>, r: S, order: usize) -> S {
    if r >= term.radius {
        return S::zero();
    }
    // (1 - r^2/rho^2)^5 = sum_k binom(5,k) (-1)^k rho^{-2k} r^{2k}
    let mut coeff = [S::zero(); 11];
    let binom = [1.0, 5.0, 10.0, 10.0, 5.0, 1.0];
    let r2 = term.radius * term.radius;
    let mut p = S::one();
    for (k, &bk) in binom.iter().enumerate() {
        let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
        coeff[2 * k] = term.amplitude * S::of(bk * sign) / p;
        p *= r2;
    }
    for _ in 0..order {
        let mut next = [S::zero(); 11];
        for (k, slot) in next.iter_mut().enumerate().take(10) {
            *slot = coeff[k + 1] * S::of_usize(k + 1);
        }
        coeff = next;
    }
    let mut val = S::zero();
    for &ck in coeff.iter().rev() {
        val = val * r + ck;
    }
    val
}
