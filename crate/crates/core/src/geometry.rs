//! Acquisition geometry: slice circles, source/detector chords and their
//! Radon parametrization, and the rotated ellipsoid frame used by the
//! time-domain kernel series.
//!
//! A measurement line in the slice plane `x3 = a` is described either by its
//! two endpoints `x`, `x0` on the circle of radius `B_a = sqrt(B^2 - a^2)`
//! or by the normal angle `alpha` and signed offset `s` of the line; the two
//! descriptions are bijective and both directions are implemented here.

use crate::error::{Error, Result};
use crate::scalar::{clamped_acos, Scalar};
use crate::vec3::Vec3;

/// One horizontal cross-section of the ball of radius `B`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceGeometry<S> {
    b: S,
    a: S,
    radius: S,
}

impl<S: Scalar> SliceGeometry<S> {
    /// Cross-section at height `a`; empty sections (`|a| >= B`) are rejected.
    pub fn new(b: S, a: S) -> Result<Self> {
        if !(b > S::zero()) {
            return Err(Error::validation(format!("sphere radius must be > 0, got {b}")));
        }
        if a.abs() >= b {
            return Err(Error::geometry(format!(
                "slice height |{a}| >= {b}: empty cross-section"
            )));
        }
        Ok(Self {
            b,
            a,
            radius: (b * b - a * a).sqrt(),
        })
    }

    /// Ball radius `B`.
    pub fn b(&self) -> S {
        self.b
    }

    /// Slice height `a`.
    pub fn a(&self) -> S {
        self.a
    }

    /// Circle radius `B_a`.
    pub fn radius(&self) -> S {
        self.radius
    }

    /// Projection of the origin onto the slice plane.
    pub fn center(&self) -> Vec3<S> {
        Vec3::new(S::zero(), S::zero(), self.a)
    }

    fn check_on_circle(&self, p: Vec3<S>, tol: S) -> Result<()> {
        let dz = (p.z - self.a).abs();
        let dr = (p.dist(self.center()) - self.radius).abs();
        if dz > tol || dr > tol {
            return Err(Error::geometry(format!(
                "point ({}, {}, {}) not on slice circle (dz={dz}, dr={dr})",
                p.x, p.y, p.z
            )));
        }
        Ok(())
    }
}

/// A measurement line `L(x, x0)` between two points of the slice circle,
/// together with its Radon parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Chord<S> {
    alpha: S,
    s: S,
    x: Vec3<S>,
    x0: Vec3<S>,
    length: S,
}

impl<S: Scalar> Chord<S> {
    /// Normal angle in `(0, 2*pi]`.
    pub fn alpha(&self) -> S {
        self.alpha
    }

    /// Signed offset from the slice center.
    pub fn s(&self) -> S {
        self.s
    }

    pub fn x(&self) -> Vec3<S> {
        self.x
    }

    pub fn x0(&self) -> Vec3<S> {
        self.x0
    }

    pub fn length(&self) -> S {
        self.length
    }

    /// In-plane unit normal `n(alpha) = (cos alpha, sin alpha)`.
    pub fn normal(&self) -> (S, S) {
        (self.alpha.cos(), self.alpha.sin())
    }

    /// Point `x0 + z (x - x0)` for `z` in `[0, 1]`.
    pub fn point(&self, z: S) -> Vec3<S> {
        self.x0 + (self.x - self.x0) * z
    }
}

/// Normalizes an angle to `(0, 2*pi]`.
fn wrap_angle<S: Scalar>(a: S) -> S {
    let tau = S::TAU();
    let mut a = a % tau;
    if a <= S::zero() {
        a += tau;
    }
    a
}

/// Radon parameters of an ordered pair of circle points, inverting
/// [`pair_from_chord`] exactly: the endpoint order fixes the normal
/// direction, so the signed offset is recovered too.
pub fn chord_from_pair<S: Scalar>(
    g: &SliceGeometry<S>,
    x: Vec3<S>,
    x0: Vec3<S>,
) -> Result<Chord<S>> {
    let on_circle_tol = S::of(1e-9) * g.b();
    g.check_on_circle(x, on_circle_tol)?;
    g.check_on_circle(x0, on_circle_tol)?;
    if x.dist(x0) <= on_circle_tol {
        return Err(Error::geometry("coincident endpoints: zero-length chord"));
    }
    // x - x0 runs along the tangent (-sin a, cos a); rotating it by -90
    // degrees gives the normal (cos a, sin a)
    let u = x - x0;
    let alpha = wrap_angle((-u.x).atan2(u.y));
    let mid = (x + x0) * S::of(0.5);
    let d = mid - g.center();
    let s = d.x * alpha.cos() + d.y * alpha.sin();
    chord(g, alpha, s)
}

/// Endpoints of the chord with Radon parameters `(alpha, s)`.
///
/// Order convention: `x0` is the endpoint whose angular position on the
/// circle, measured counterclockwise from `n(alpha)`, is larger.
pub fn pair_from_chord<S: Scalar>(
    g: &SliceGeometry<S>,
    alpha: S,
    s: S,
) -> Result<(Vec3<S>, Vec3<S>)> {
    let c = chord(g, alpha, s)?;
    Ok((c.x, c.x0))
}

/// Chord with Radon parameters `(alpha, s)`, `|s| < B_a`.
pub fn chord<S: Scalar>(g: &SliceGeometry<S>, alpha: S, s: S) -> Result<Chord<S>> {
    if s.abs() >= g.radius() {
        return Err(Error::geometry(format!(
            "offset |{s}| >= circle radius {}: chord misses or is tangent",
            g.radius()
        )));
    }
    if alpha <= S::zero() || alpha > S::TAU() {
        return Err(Error::validation(format!("alpha {alpha} outside (0, 2*pi]")));
    }
    let (cn, sn) = (alpha.cos(), alpha.sin());
    let half = (g.radius() * g.radius() - s * s).sqrt();
    let foot = Vec3::new(s * cn, s * sn, g.a());
    // in-plane tangent direction (-sin, cos)
    let tang = Vec3::new(-sn, cn, S::zero());
    let x = foot + tang * half;
    let x0 = foot - tang * half;
    Ok(Chord {
        alpha,
        s,
        x,
        x0,
        length: S::of(2.0) * half,
    })
}

/// Rotated coordinate frame attached to the segment from `x0` to `x`,
/// in which the confocal ellipsoids `|x - xi| + |x0 - xi| = t` have the
/// closed-form parametrization of [`ellipsoid_point`].
#[derive(Debug, Clone, Copy)]
pub struct EllipsoidFrame<S> {
    x: Vec3<S>,
    x0: Vec3<S>,
    rho: S,
    theta_hat: S,
    psi: S,
    rot: [[S; 3]; 3],
}

impl<S: Scalar> EllipsoidFrame<S> {
    pub fn x(&self) -> Vec3<S> {
        self.x
    }

    pub fn x0(&self) -> Vec3<S> {
        self.x0
    }

    /// Separation `|x - x0|`.
    pub fn rho(&self) -> S {
        self.rho
    }

    /// Polar angle of `x - x0`.
    pub fn theta_hat(&self) -> S {
        self.theta_hat
    }

    /// Azimuthal angle of `x - x0`, in `[0, 2*pi)`.
    pub fn psi(&self) -> S {
        self.psi
    }

    /// Rotation matrix rows.
    pub fn rotation(&self) -> &[[S; 3]; 3] {
        &self.rot
    }

    /// Row-vector product `nu(theta, phi) * A`.
    pub fn direction(&self, theta: S, phi: S) -> Vec3<S> {
        let (st, ct) = (theta.sin(), theta.cos());
        let (sp, cp) = (phi.sin(), phi.cos());
        let nu = [st * cp, st * sp, ct];
        let a = &self.rot;
        Vec3::new(
            nu[0] * a[0][0] + nu[1] * a[1][0] + nu[2] * a[2][0],
            nu[0] * a[0][1] + nu[1] * a[1][1] + nu[2] * a[2][1],
            nu[0] * a[0][2] + nu[1] * a[1][2] + nu[2] * a[2][2],
        )
    }
}

/// Unit vector with spherical angles `(theta, phi)`.
pub fn unit_vector<S: Scalar>(theta: S, phi: S) -> Vec3<S> {
    Vec3::new(
        theta.sin() * phi.cos(),
        theta.sin() * phi.sin(),
        theta.cos(),
    )
}

/// Frame for a pair of distinct points.
pub fn ellipsoid_frame<S: Scalar>(x: Vec3<S>, x0: Vec3<S>) -> Result<EllipsoidFrame<S>> {
    let d = x - x0;
    let rho = d.norm();
    if !(rho > S::zero()) {
        return Err(Error::geometry("coincident points: ellipsoid frame undefined"));
    }
    let theta_hat = clamped_acos(d.z / rho);
    let psi = {
        let p = d.y.atan2(d.x);
        if p < S::zero() {
            p + S::TAU()
        } else {
            p
        }
    };
    let (sv, cv) = (theta_hat.sin(), theta_hat.cos());
    let (sp, cp) = (psi.sin(), psi.cos());
    let rot = [
        [-cv * cp, -cv * sp, sv],
        [sp, -cp, S::zero()],
        [sv * cp, sv * sp, cv],
    ];
    Ok(EllipsoidFrame {
        x,
        x0,
        rho,
        theta_hat,
        psi,
        rot,
    })
}

/// Point of the ellipsoid `E(x, x0, t)` at parameters `(z, phi)`,
/// `z` in `[0, 1]`, `phi` in `[0, 2*pi)`; requires `t > rho`.
pub fn ellipsoid_point<S: Scalar>(fr: &EllipsoidFrame<S>, t: S, z: S, phi: S) -> Result<Vec3<S>> {
    if !(t > fr.rho) {
        return Err(Error::validation(format!(
            "time {t} <= separation {}: inside or on the light cone",
            fr.rho
        )));
    }
    Ok(ellipsoid_point_unchecked(fr, t, z, phi))
}

/// Same as [`ellipsoid_point`] without the precondition check; quadrature
/// hot path.
#[inline]
pub fn ellipsoid_point_unchecked<S: Scalar>(fr: &EllipsoidFrame<S>, t: S, z: S, phi: S) -> Vec3<S> {
    let denom = t - fr.rho + S::of(2.0) * z * fr.rho;
    let r = S::of(0.5) * denom;
    let theta = clamped_acos((fr.rho - t + S::of(2.0) * z * t) / denom);
    fr.x0 + fr.direction(theta, phi) * r
}

/// `r` as a function of `(t, theta)` on the ellipsoid.
pub fn ellipsoid_radius<S: Scalar>(rho: S, t: S, theta: S) -> S {
    (t * t - rho * rho) / (S::of(2.0) * (t - rho * theta.cos()))
}

/// `theta` as a function of `(t, r)` on the ellipsoid.
pub fn ellipsoid_angle<S: Scalar>(rho: S, t: S, r: S) -> S {
    clamped_acos((S::of(2.0) * t * r - t * t + rho * rho) / (S::of(2.0) * r * rho))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TAU: f64 = std::f64::consts::TAU;
    const PI: f64 = std::f64::consts::PI;

    fn g(b: f64, a: f64) -> SliceGeometry<f64> {
        SliceGeometry::new(b, a).unwrap()
    }

    #[test]
    fn slice_radius() {
        assert_eq!(g(1.0, 0.0).radius(), 1.0);
        assert!((g(1.0, 0.6).radius() - 0.8).abs() < 1e-15);
        assert!(SliceGeometry::new(1.0, 1.0).is_err());
        assert!(SliceGeometry::new(1.0, -1.2).is_err());
        assert!(SliceGeometry::new(0.0, 0.0).is_err());
    }

    #[test]
    fn chord_from_pair_reference() {
        let sl = g(1.0, 0.0);
        let c = chord_from_pair(
            &sl,
            Vec3::new(0.6, 0.8, 0.0),
            Vec3::new(0.6, -0.8, 0.0),
        )
        .unwrap();
        assert!((c.alpha() - TAU).abs() < 1e-12);
        assert!((c.s() - 0.6).abs() < 1e-12);
        // both endpoints satisfy <y, n> = s
        for p in [c.x(), c.x0()] {
            assert!((p.x * c.alpha().cos() + p.y * c.alpha().sin() - c.s()).abs() < 1e-12);
        }
    }

    #[test]
    fn diameter_orientation() {
        // through the center the endpoint order still fixes the normal:
        // swapping endpoints flips alpha by pi
        let sl = g(1.0, 0.0);
        let c = chord_from_pair(&sl, Vec3::new(1.0, 0.0, 0.0), Vec3::new(-1.0, 0.0, 0.0)).unwrap();
        assert!(c.s().abs() < 1e-12);
        assert!((c.alpha() - 3.0 * PI / 2.0).abs() < 1e-12);
        let c = chord_from_pair(&sl, Vec3::new(-1.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0)).unwrap();
        assert!((c.alpha() - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn pair_from_chord_reference() {
        let sl = g(1.0, 0.0);
        let (x, x0) = pair_from_chord(&sl, TAU, 0.6).unwrap();
        assert!((x.x - 0.6).abs() < 1e-12 && (x.y - 0.8).abs() < 1e-12);
        assert!((x0.x - 0.6).abs() < 1e-12 && (x0.y + 0.8).abs() < 1e-12);
        // diameter
        let (x, x0) = pair_from_chord(&sl, 1.234, 0.0).unwrap();
        assert!((x.dist(x0) - 2.0).abs() < 1e-12);
        // tangent excluded
        assert!(pair_from_chord(&sl, TAU, 1.0).is_err());
    }

    #[test]
    fn rejects_bad_endpoints() {
        let sl = g(1.0, 0.0);
        let p = Vec3::new(1.0, 0.0, 0.0);
        assert!(chord_from_pair(&sl, p, p).is_err());
        assert!(chord_from_pair(&sl, Vec3::new(0.5, 0.0, 0.0), p).is_err());
        assert!(chord_from_pair(&sl, Vec3::new(1.0, 0.0, 0.2), p).is_err());
    }

    #[test]
    fn chord_point_endpoints_and_midpoint() {
        let sl = g(1.0, 0.3);
        let c = chord(&sl, 1.0, 0.4).unwrap();
        assert!(c.point(0.0).dist(c.x0()) < 1e-15);
        assert!(c.point(1.0).dist(c.x()) < 1e-15);
        let mid = c.point(0.5);
        let expect = sl.center() + Vec3::new(c.alpha().cos(), c.alpha().sin(), 0.0) * c.s();
        assert!(mid.dist(expect) < 1e-12);
        // affine parametrization
        let (z1, z2) = (0.2, 0.9);
        let d = c.point(z2).dist(c.point(z1));
        assert!((d - (z2 - z1) * c.length()).abs() < 1e-12);
    }

    #[test]
    fn frame_axis_aligned() {
        let fr = ellipsoid_frame(Vec3::new(0.0, 0.0, 2.0), Vec3::new(0.0, 0.0, 0.5)).unwrap();
        let a = fr.rotation();
        let expect: [[f64; 3]; 3] = [[-1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((a[i][j] - expect[i][j]).abs() < 1e-12, "A[{i}][{j}]");
            }
        }
        assert!(ellipsoid_frame(fr.x(), fr.x()).is_err());
    }

    fn assert_orthonormal(fr: &EllipsoidFrame<f64>) {
        let a = fr.rotation();
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| a[i][k] * a[j][k]).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-12);
            }
        }
        let det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
        assert!((det - 1.0).abs() < 1e-12);
    }

    #[test]
    fn frame_rotation_properties() {
        let fr = ellipsoid_frame(Vec3::new(0.3, -0.7, 0.2), Vec3::new(-0.5, 0.1, 0.9)).unwrap();
        assert_orthonormal(&fr);
        // nu(0, phi) * A = nu(theta_hat, psi) for any phi
        for phi in [0.0, 1.0, 4.5] {
            let d = fr.direction(0.0, phi);
            let expect = unit_vector(fr.theta_hat(), fr.psi());
            assert!(d.dist(expect) < 1e-12);
        }
        // x0 + rho * nu(theta_hat, psi) = x
        let rebuilt = fr.x0() + unit_vector(fr.theta_hat(), fr.psi()) * fr.rho();
        assert!(rebuilt.dist(fr.x()) < 1e-12);
    }

    #[test]
    fn ellipsoid_vertices() {
        let fr = ellipsoid_frame(Vec3::new(1.0, 0.0, 0.0), Vec3::new(-1.0, 0.0, 0.0)).unwrap();
        let t = 3.0f64;
        let v1 = ellipsoid_point(&fr, t, 1.0, 0.0).unwrap();
        // vertex beyond x at distance (t + rho)/2 from x0
        assert!((v1.dist(fr.x0()) - (t + 2.0) / 2.0).abs() < 1e-12);
        let v0 = ellipsoid_point(&fr, t, 0.0, 0.0).unwrap();
        assert!((v0.dist(fr.x0()) - (t - 2.0) / 2.0).abs() < 1e-12);
        assert!(ellipsoid_point(&fr, 2.0, 0.5, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn bijection_roundtrip(alpha in 1e-9..TAU, sfrac in -0.999..0.999f64, a in -0.9..0.9f64) {
            let sl = g(1.0, a);
            let s = sfrac * sl.radius();
            let (x, x0) = pair_from_chord(&sl, alpha, s).unwrap();
            let c = chord_from_pair(&sl, x, x0).unwrap();
            // angles compared on the circle (alpha near 0 wraps to 2 pi)
            let dist_on_circle = {
                let d = (c.alpha() - alpha).abs() % TAU;
                d.min(TAU - d)
            };
            prop_assert!(dist_on_circle < 1e-9, "alpha {} vs {}", c.alpha(), alpha);
            prop_assert!((c.s() - s).abs() < 1e-12);
            prop_assert!(c.x().dist(x) < 1e-12);
            prop_assert!(c.x0().dist(x0) < 1e-12);
        }

        #[test]
        fn chord_invariants(alpha in 1e-9..TAU, sfrac in -0.99..0.99f64) {
            let sl = g(2.0, 0.7);
            let s = sfrac * sl.radius();
            let c = chord(&sl, alpha, s).unwrap();
            // midpoint identity and <p - 0_a, n> = s for both endpoints
            let n = Vec3::new(alpha.cos(), alpha.sin(), 0.0);
            for p in [c.x(), c.x0()] {
                prop_assert!(((p - sl.center()).dot(n) - s).abs() < 1e-12 * sl.b());
                prop_assert!((p.dist(sl.center()) - sl.radius()).abs() < 1e-12 * sl.b());
            }
            prop_assert!((c.x().dist(c.x0()) - c.length()).abs() < 1e-12 * sl.b());
        }

        #[test]
        fn ellipsoid_defining_sum(t_ex in 0.01..3.0f64, z in 0.0..1.0f64, phi in 0.0..TAU) {
            let x = Vec3::new(0.4, -0.2, 0.6);
            let x0 = Vec3::new(-0.8, 0.3, -0.1);
            let fr = ellipsoid_frame(x, x0).unwrap();
            let t = fr.rho() + t_ex;
            let xi = ellipsoid_point(&fr, t, z, phi).unwrap();
            let sum = xi.dist(x) + xi.dist(x0);
            prop_assert!((sum - t).abs() < 1e-9 * t, "sum {} vs t {}", sum, t);
        }

        #[test]
        fn radius_angle_inverse(t_ex in 0.01..3.0f64, thfrac in 0.001..0.999f64) {
            let rho = 1.3;
            let t = rho + t_ex;
            let theta = thfrac * PI;
            let r = ellipsoid_radius(rho, t, theta);
            let back = ellipsoid_angle(rho, t, r);
            prop_assert!((back - theta).abs() < 1e-10);
        }
    }
}
