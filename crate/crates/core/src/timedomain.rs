//! Regular part of the causal fundamental solution of the perturbed wave
//! equation, built as a series over confocal ellipsoids: the first term is a
//! surface integral of the potential, higher terms rescatter the previous
//! one through a time-delayed volume recursion, and a factorial tail bound
//! controls truncation.

use std::collections::HashMap;
use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::geometry::{ellipsoid_frame, EllipsoidFrame};
use crate::phantom::Potential;
use crate::quad::GaussLegendre;
use crate::scalar::Scalar;
use crate::vec3::Vec3;

/// Quadrature resolution for the ellipsoid parametrization:
/// Gauss-Legendre in `z`, uniform (trapezoid, periodic) in `phi`,
/// Gauss-Legendre in the recursion time `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct QuadratureSpec {
    pub n_z: usize,
    pub n_phi: usize,
    pub n_tau: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            n_z: 24,
            n_phi: 24,
            n_tau: 12,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_z < 2 || self.n_phi < 2 || self.n_tau < 2 {
            return Err(Error::validation("quadrature spec: all node counts must be >= 2"));
        }
        if !self.n_phi.is_multiple_of(2) {
            return Err(Error::validation("quadrature spec: n_phi must be even"));
        }
        Ok(())
    }

    /// Spec halved `level` times, floored at the minimum usable sizes.
    /// Higher series terms are orders of magnitude smaller and tolerate
    /// much coarser rules.
    pub fn coarsened(&self, level: usize) -> Self {
        let shrink = |v: usize, floor: usize| (v >> level).max(floor);
        Self {
            n_z: shrink(self.n_z, 4),
            n_phi: {
                let p = shrink(self.n_phi, 4);
                p + p % 2
            },
            n_tau: shrink(self.n_tau, 3),
        }
    }
}

/// Bound on the `n`-th series term magnitude for `n >= 2`:
/// `q0^n T^{n-1} (t - rho)^{n-1} / (4 (n-1)!)`.
pub fn series_term_bound<S: Scalar>(q0: S, t_horizon: S, dt: S, n: usize) -> S {
    let mut b = q0 / S::of(4.0);
    for j in 1..n {
        b = b * q0 * t_horizon * dt / S::of_usize(j);
    }
    b
}

/// Analytic tail bound `sum_{n >= n_from}` of [`series_term_bound`].
pub fn series_tail_bound<S: Scalar>(q0: S, t_horizon: S, dt: S, n_from: usize) -> S {
    let mut total = S::zero();
    for n in n_from..n_from + 200 {
        let term = series_term_bound(q0, t_horizon, dt, n);
        total += term;
        if term < total * S::of(1e-18) {
            break;
        }
    }
    total
}

/// First series term: surface integral of the potential over the ellipsoid
/// in the `(z, phi)` parametrization.
pub fn w1<S: Scalar>(
    q: &Potential<S>,
    fr: &EllipsoidFrame<S>,
    t: S,
    spec: &QuadratureSpec,
) -> Result<S> {
    spec.validate()?;
    if !(t > fr.rho()) {
        return Err(Error::validation(format!(
            "w1: time {t} <= separation {}",
            fr.rho()
        )));
    }
    let rule_z = GaussLegendre::new(spec.n_z)?;
    let phi = PhiTable::new(spec.n_phi);
    Ok(w1_inner(q, fr, t, &rule_z, &phi))
}

/// Precomputed azimuthal trigonometry for the periodic trapezoid rule.
struct PhiTable<S> {
    sin_cos: Vec<(S, S)>,
    weight: S,
}

impl<S: Scalar> PhiTable<S> {
    fn new(n_phi: usize) -> Self {
        let sin_cos = (0..n_phi)
            .map(|j| {
                let phi = S::TAU() * S::of_usize(j) / S::of_usize(n_phi);
                (phi.sin(), phi.cos())
            })
            .collect();
        Self {
            sin_cos,
            weight: S::TAU() / S::of_usize(n_phi),
        }
    }
}

#[inline]
fn w1_inner<S: Scalar>(
    q: &Potential<S>,
    fr: &EllipsoidFrame<S>,
    t: S,
    rule_z: &GaussLegendre<S>,
    phi: &PhiTable<S>,
) -> S {
    let rho = fr.rho();
    let a = fr.rotation();
    let x0 = fr.x0();
    let mut acc = S::zero();
    for (z, wz) in rule_z.mapped(S::zero(), S::one()) {
        let denom = t - rho + S::of(2.0) * z * rho;
        let r = S::of(0.5) * denom;
        let ct = {
            let c = (rho - t + S::of(2.0) * z * t) / denom;
            c.max(-S::one()).min(S::one())
        };
        let st = (S::one() - ct * ct).sqrt();
        let mut ring = S::zero();
        for &(sp, cp) in &phi.sin_cos {
            let nu = [st * cp, st * sp, ct];
            let xi = Vec3::new(
                x0.x + r * (nu[0] * a[0][0] + nu[1] * a[1][0] + nu[2] * a[2][0]),
                x0.y + r * (nu[0] * a[0][1] + nu[1] * a[1][1] + nu[2] * a[2][1]),
                x0.z + r * (nu[0] * a[0][2] + nu[1] * a[1][2] + nu[2] * a[2][2]),
            );
            ring += q.eval(xi);
        }
        acc += wz * ring;
    }
    -acc * phi.weight / (S::of(4.0) * S::PI())
}

/// Quantized-key memo for sub-evaluations of lower-order terms inside the
/// recursion. Concurrent reads share the map through a mutex; entries are
/// keyed by position and time quantized to `quantum`.
pub struct WnMemo<S> {
    quantum: S,
    maps: Vec<Mutex<HashMap<[i64; 4], S>>>,
}

impl<S: Scalar> WnMemo<S> {
    /// `levels` is the highest term order that will be memoized.
    pub fn new(quantum: S, levels: usize) -> Self {
        Self {
            quantum,
            maps: (0..levels).map(|_| Mutex::new(HashMap::new())).collect(),
        }
    }

    fn key(&self, p: Vec3<S>, t: S) -> [i64; 4] {
        let qz = |v: S| (v / self.quantum).round().to_i64().unwrap_or(0);
        [qz(p.x), qz(p.y), qz(p.z), qz(t)]
    }

    fn lookup_or(&self, level: usize, p: Vec3<S>, t: S, f: impl FnOnce() -> S) -> S {
        match self.maps.get(level.wrapping_sub(1)) {
            None => f(),
            Some(m) => {
                let key = self.key(p, t);
                if let Some(&v) = m.lock().unwrap().get(&key) {
                    return v;
                }
                let v = f();
                m.lock().unwrap().insert(key, v);
                v
            }
        }
    }
}

/// One recursion step: the `n`-th term from a callable giving the
/// `(n-1)`-th term as a function of (point, time).
pub fn wn_with<S: Scalar>(
    q: &Potential<S>,
    fr: &EllipsoidFrame<S>,
    t: S,
    prev: &dyn Fn(Vec3<S>, S) -> S,
    spec: &QuadratureSpec,
) -> Result<S> {
    spec.validate()?;
    if !(t > fr.rho()) {
        return Err(Error::validation(format!(
            "wn: time {t} <= separation {}",
            fr.rho()
        )));
    }
    let rule_z = GaussLegendre::new(spec.n_z)?;
    let rule_tau = GaussLegendre::new(spec.n_tau)?;
    let phi = PhiTable::new(spec.n_phi);
    Ok(wn_step(q, fr, t, prev, &rule_z, &rule_tau, &phi))
}

fn wn_step<S: Scalar>(
    q: &Potential<S>,
    fr: &EllipsoidFrame<S>,
    t: S,
    prev: &dyn Fn(Vec3<S>, S) -> S,
    rule_z: &GaussLegendre<S>,
    rule_tau: &GaussLegendre<S>,
    phi: &PhiTable<S>,
) -> S {
    let rho = fr.rho();
    let a = fr.rotation();
    let x0 = fr.x0();
    let mut acc = S::zero();
    for (tau, wtau) in rule_tau.mapped(rho, t) {
        for (z, wz) in rule_z.mapped(S::zero(), S::one()) {
            let denom = tau - rho + S::of(2.0) * z * rho;
            let r = S::of(0.5) * denom;
            if r <= S::zero() {
                continue;
            }
            let ct = clamped_cos((rho - tau + S::of(2.0) * z * tau) / denom);
            let st = (S::one() - ct * ct).sqrt();
            let delayed = t - tau + r;
            let mut ring = S::zero();
            for &(sp, cp) in &phi.sin_cos {
                let nu = [st * cp, st * sp, ct];
                let xi = Vec3::new(
                    x0.x + r * (nu[0] * a[0][0] + nu[1] * a[1][0] + nu[2] * a[2][0]),
                    x0.y + r * (nu[0] * a[0][1] + nu[1] * a[1][1] + nu[2] * a[2][1]),
                    x0.z + r * (nu[0] * a[0][2] + nu[1] * a[1][2] + nu[2] * a[2][2]),
                );
                let qv = q.eval(xi);
                if qv != S::zero() {
                    ring += qv * prev(xi, delayed);
                }
            }
            acc += wtau * wz * r * ring;
        }
    }
    -acc * phi.weight / (S::of(4.0) * S::PI())
}

#[inline]
fn clamped_cos<S: Scalar>(c: S) -> S {
    c.max(-S::one()).min(S::one())
}

/// The `n`-th series term (`n >= 2`) by direct recursion down to the first
/// term; `memo`, when given, caches sub-evaluations with quantized keys.
pub fn wn<S: Scalar>(
    q: &Potential<S>,
    fr: &EllipsoidFrame<S>,
    t: S,
    n: usize,
    spec: &QuadratureSpec,
    memo: Option<&WnMemo<S>>,
) -> Result<S> {
    if n < 2 {
        return Err(Error::validation("wn: order must be >= 2"));
    }
    spec.validate()?;
    if !(t > fr.rho()) {
        return Err(Error::validation(format!(
            "wn: time {t} <= separation {}",
            fr.rho()
        )));
    }
    let rule_z = GaussLegendre::new(spec.n_z)?;
    let rule_tau = GaussLegendre::new(spec.n_tau)?;
    let phi = PhiTable::new(spec.n_phi);
    Ok(wn_recursive(
        q, fr, t, n, &rule_z, &rule_tau, &phi, memo,
    ))
}

#[allow(clippy::too_many_arguments)]
fn wn_recursive<S: Scalar>(
    q: &Potential<S>,
    fr: &EllipsoidFrame<S>,
    t: S,
    n: usize,
    rule_z: &GaussLegendre<S>,
    rule_tau: &GaussLegendre<S>,
    phi: &PhiTable<S>,
    memo: Option<&WnMemo<S>>,
) -> S {
    let tiny = q.support_radius() * S::of(1e-12);
    let prev = |p: Vec3<S>, tp: S| -> S {
        let eval = || -> S {
            let sub = match ellipsoid_frame(p, fr.x0()) {
                Ok(f) => f,
                // p ~ x0 only where the radial weight r vanishes
                Err(_) => return S::zero(),
            };
            if tp <= sub.rho() + tiny {
                return if n - 1 == 1 {
                    // continuous limit of the first term on the cone
                    boundary_limit(q, &sub, rule_z)
                } else {
                    S::zero()
                };
            }
            if n - 1 == 1 {
                w1_inner(q, &sub, tp, rule_z, phi)
            } else {
                wn_recursive(q, &sub, tp, n - 1, rule_z, rule_tau, phi, memo)
            }
        };
        match memo {
            Some(m) => m.lookup_or(n - 1, p, tp, eval),
            None => eval(),
        }
    };
    wn_step(q, fr, t, &prev, rule_z, rule_tau, phi)
}

/// Boundary value of the series on the cone `t = rho`: minus one half of
/// the unit-parameter chord integral of the potential.
fn boundary_limit<S: Scalar>(
    q: &Potential<S>,
    fr: &EllipsoidFrame<S>,
    rule_z: &GaussLegendre<S>,
) -> S {
    let d = fr.x() - fr.x0();
    let x0 = fr.x0();
    -S::of(0.5) * rule_z.integrate(S::zero(), S::one(), |z| q.eval(x0 + d * z))
}

/// Truncated series sum with the analytic tail bound: returns
/// `(value, n_used, remainder_bound)`.
///
/// The number of terms is the smallest making the tail bound fall below
/// `tol`, capped at `max_terms`; at desk scales the bound is extremely
/// loose, so the cap is usually what binds and the achieved bound is
/// reported honestly.
pub fn wtilde<S: Scalar>(
    q: &Potential<S>,
    fr: &EllipsoidFrame<S>,
    t: S,
    tol: S,
    max_terms: usize,
    spec: &QuadratureSpec,
) -> Result<(S, usize, S)> {
    if !(tol > S::zero()) {
        return Err(Error::validation("wtilde: tol must be > 0"));
    }
    if !(t > fr.rho()) {
        return Err(Error::validation(format!(
            "wtilde: time {t} <= separation {}",
            fr.rho()
        )));
    }
    if q.terms().is_empty() {
        return Ok((S::zero(), 1, S::zero()));
    }
    let (q0, _, _) = q.norms(32)?;
    let dt = t - fr.rho();
    let mut n_used = max_terms.max(1);
    for n in 1..=max_terms {
        if series_tail_bound(q0, t, dt, n + 1) < tol {
            n_used = n;
            break;
        }
    }
    let mut value = w1(q, fr, t, spec)?;
    for n in 2..=n_used {
        value += wn(q, fr, t, n, &spec.coarsened(n - 2), None)?;
    }
    Ok((value, n_used, series_tail_bound(q0, t, dt, n_used + 1)))
}

/// Tabulated kernel trace for one pair of points: the regular part of the
/// fundamental solution on a time grid graded toward the cone.
#[derive(Debug, Clone)]
pub struct KernelEvaluation<S> {
    x: Vec3<S>,
    x0: Vec3<S>,
    rho: S,
    t_grid: Vec<S>,
    values: Vec<S>,
    n_terms: usize,
    remainder_bound: S,
}

impl<S: Scalar> KernelEvaluation<S> {
    /// Builds an evaluation from externally tabulated samples.
    pub fn from_samples(
        x: Vec3<S>,
        x0: Vec3<S>,
        t_grid: Vec<S>,
        values: Vec<S>,
        n_terms: usize,
        remainder_bound: S,
    ) -> Result<Self> {
        let rho = x.dist(x0);
        if t_grid.len() < 2 || t_grid.len() != values.len() {
            return Err(Error::validation(
                "kernel evaluation: need >= 2 samples with matching grids",
            ));
        }
        if t_grid[0] < rho || t_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::validation(
                "kernel evaluation: t grid must start at the cone and increase",
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("kernel evaluation: non-finite values"));
        }
        Ok(Self {
            x,
            x0,
            rho,
            t_grid,
            values,
            n_terms,
            remainder_bound,
        })
    }

    pub fn x(&self) -> Vec3<S> {
        self.x
    }

    pub fn x0(&self) -> Vec3<S> {
        self.x0
    }

    pub fn rho(&self) -> S {
        self.rho
    }

    pub fn t_grid(&self) -> &[S] {
        &self.t_grid
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn n_terms(&self) -> usize {
        self.n_terms
    }

    pub fn remainder_bound(&self) -> S {
        self.remainder_bound
    }

    /// Debug CSV: `t,wtilde` per row.
    pub fn write_csv(&self, mut w: impl std::io::Write) -> Result<()> {
        writeln!(w, "t,wtilde")?;
        for (t, v) in self.t_grid.iter().zip(&self.values) {
            writeln!(w, "{},{}", t.as_f64(), v.as_f64())?;
        }
        Ok(())
    }
}

/// Trace evaluation controls beyond the base quadrature spec.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct TraceSpec {
    /// Approximate number of grid points.
    pub n_t: usize,
    /// Geometric step ratio of the graded region near the cone.
    pub grading_ratio: f64,
    /// Second term evaluated on every `w2_stride`-th point, interpolated.
    pub w2_stride: usize,
    /// Terms of order >= 3 evaluated on every `deep_stride`-th point.
    pub deep_stride: usize,
    /// Series truncation cap.
    pub max_terms: usize,
    /// Target truncation tolerance for the tail bound.
    pub tol: f64,
}

impl Default for TraceSpec {
    fn default() -> Self {
        Self {
            n_t: 400,
            grading_ratio: 1.3,
            w2_stride: 4,
            deep_stride: 16,
            max_terms: 3,
            tol: 1e-8,
        }
    }
}

impl TraceSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_t < 16 {
            return Err(Error::validation("trace: n_t must be >= 16"));
        }
        if self.grading_ratio <= 1.0 {
            return Err(Error::validation("trace: grading ratio must be > 1"));
        }
        if self.w2_stride == 0 || self.deep_stride == 0 || self.max_terms == 0 {
            return Err(Error::validation("trace: strides and max_terms must be >= 1"));
        }
        Ok(())
    }
}

/// Conservative horizon past which every term of the truncated series
/// vanishes: first-term support exit plus one support crossing per extra
/// rescattering order, floored at `rho + 2B`.
pub fn auto_horizon<S: Scalar>(q: &Potential<S>, x: Vec3<S>, x0: Vec3<S>, max_terms: usize) -> S {
    let rho = x.dist(x0);
    let floor = rho + S::of(2.0) * q.support_radius();
    let exit = q.support_exit_time(x, x0);
    if exit == S::zero() {
        return floor;
    }
    let reach = q
        .terms()
        .iter()
        .map(|t| t.center.norm() + t.radius)
        .fold(S::zero(), S::max);
    let extra = S::of(2.0) * reach * S::of_usize(max_terms.saturating_sub(1));
    floor.max(exit + extra + S::of(0.05) * q.support_radius())
}

/// Evaluates the truncated series on a graded time grid over
/// `[rho, t_horizon]`.
///
/// The first term is evaluated at every grid point; higher terms are
/// evaluated on progressively strided subgrids with coarsened quadrature
/// and linearly interpolated, since they are orders of magnitude smaller.
pub fn kernel_trace<S: Scalar>(
    q: &Potential<S>,
    x: Vec3<S>,
    x0: Vec3<S>,
    t_horizon: S,
    trace: &TraceSpec,
    spec: &QuadratureSpec,
) -> Result<KernelEvaluation<S>> {
    trace.validate()?;
    spec.validate()?;
    let fr = ellipsoid_frame(x, x0)?;
    let rho = fr.rho();
    if !(t_horizon > rho) {
        return Err(Error::validation(format!(
            "trace horizon {t_horizon} <= separation {rho}"
        )));
    }
    let t_grid = graded_grid(rho, t_horizon, trace.n_t, S::of(trace.grading_ratio));
    let n_pts = t_grid.len();

    let rule_z = GaussLegendre::new(spec.n_z)?;
    let phi = PhiTable::new(spec.n_phi);
    let mut values: Vec<S> = t_grid
        .iter()
        .map(|&t| w1_inner(q, &fr, t, &rule_z, &phi))
        .collect();

    // truncation order from the tail bound, capped
    let (q0, _, _) = q.norms(32)?;
    let dt = t_horizon - rho;
    let tol = S::of(trace.tol);
    let mut n_terms = trace.max_terms.max(1);
    for n in 1..=trace.max_terms {
        if series_tail_bound(q0, t_horizon, dt, n + 1) < tol {
            n_terms = n;
            break;
        }
    }

    let mut used = 1;
    for n in 2..=n_terms {
        let stride = if n == 2 {
            trace.w2_stride
        } else {
            trace.deep_stride
        };
        let sub_idx: Vec<usize> = subgrid_indices(n_pts, stride);
        let spec_n = spec.coarsened(n - 2);
        let rz = GaussLegendre::new(spec_n.n_z)?;
        let rt = GaussLegendre::new(spec_n.n_tau)?;
        let ph = PhiTable::new(spec_n.n_phi);
        let sub_vals: Vec<S> = sub_idx
            .iter()
            .map(|&i| wn_recursive(q, &fr, t_grid[i], n, &rz, &rt, &ph, None))
            .collect();
        let max_abs = sub_vals.iter().fold(S::zero(), |m, v| m.max(v.abs()));
        add_interpolated(&mut values, &t_grid, &sub_idx, &sub_vals);
        used = n;
        if max_abs < tol * S::of(0.1) {
            break;
        }
    }

    Ok(KernelEvaluation {
        x,
        x0,
        rho,
        t_grid,
        values,
        n_terms: used,
        remainder_bound: series_tail_bound(q0, t_horizon, dt, used + 1),
    })
}

/// Time grid on `[rho, horizon]` starting just above the cone, with steps
/// growing geometrically up to the uniform step `~(horizon - rho)/n_t`.
fn graded_grid<S: Scalar>(rho: S, horizon: S, n_t: usize, ratio: S) -> Vec<S> {
    let span = horizon - rho;
    let t0 = rho + span * S::of(1e-9);
    let h_uni = span / S::of_usize(n_t);
    let mut h = h_uni / ratio.powi(18);
    let mut grid = vec![t0];
    let mut t = t0;
    loop {
        t += h;
        if t >= horizon - h_uni * S::of(0.5) {
            grid.push(horizon);
            break;
        }
        grid.push(t);
        h = (h * ratio).min(h_uni);
    }
    grid
}

fn subgrid_indices(n: usize, stride: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).step_by(stride).collect();
    if *idx.last().unwrap() != n - 1 {
        idx.push(n - 1);
    }
    idx
}

/// Adds a term tabulated on a subgrid to the full grid, linear in `t`
/// between subgrid nodes.
fn add_interpolated<S: Scalar>(values: &mut [S], t_grid: &[S], sub_idx: &[usize], sub_vals: &[S]) {
    let mut seg = 0;
    for (i, v) in values.iter_mut().enumerate() {
        while seg + 1 < sub_idx.len() && sub_idx[seg + 1] < i {
            seg += 1;
        }
        let (i0, i1) = (sub_idx[seg], sub_idx[(seg + 1).min(sub_idx.len() - 1)]);
        let add = if i <= i0 || i0 == i1 {
            sub_vals[seg]
        } else if i >= i1 {
            sub_vals[(seg + 1).min(sub_vals.len() - 1)]
        } else {
            let f = (t_grid[i] - t_grid[i0]) / (t_grid[i1] - t_grid[i0]);
            sub_vals[seg] * (S::one() - f) + sub_vals[seg + 1] * f
        };
        *v += add;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{chord, SliceGeometry};
    use crate::phantom::BumpTerm;

    fn standard_phantom() -> Potential<f64> {
        Potential::new(
            1.0,
            vec![BumpTerm {
                center: Vec3::new(0.2, 0.0, 0.0),
                radius: 0.5,
                amplitude: 1.0,
            }],
        )
        .unwrap()
    }

    fn equator_chord(alpha: f64, s: f64) -> crate::geometry::Chord<f64> {
        let g = SliceGeometry::new(1.0, 0.0).unwrap();
        chord(&g, alpha, s).unwrap()
    }

    #[test]
    fn w1_zero_potential_and_bound() {
        let c = equator_chord(std::f64::consts::TAU, 0.1);
        let fr = ellipsoid_frame(c.x(), c.x0()).unwrap();
        let spec = QuadratureSpec::default();
        let z = Potential::<f64>::new(1.0, vec![]).unwrap();
        assert_eq!(w1(&z, &fr, fr.rho() + 0.5, &spec).unwrap(), 0.0);
        let q = standard_phantom();
        let (q0, _, _) = q.norms(32).unwrap();
        for dt in [1e-4, 0.1, 0.5, 1.5, 3.0] {
            let v = w1(&q, &fr, fr.rho() + dt, &spec).unwrap();
            assert!(v.abs() <= q0 / 2.0 + 1e-12, "dt={dt}: |w1|={}", v.abs());
        }
        assert!(w1(&q, &fr, fr.rho(), &spec).is_err());
    }

    #[test]
    fn w1_jump_relation() {
        // w1(t -> rho+) = -(1/(2 rho)) * chord integral
        let q = standard_phantom();
        let c = equator_chord(std::f64::consts::TAU, 0.15);
        let fr = ellipsoid_frame(c.x(), c.x0()).unwrap();
        let spec = QuadratureSpec {
            n_z: 32,
            n_phi: 32,
            n_tau: 12,
        };
        let t = fr.rho() * (1.0 + 1e-6);
        let got = w1(&q, &fr, t, &spec).unwrap();
        let oracle = -q.line_integral(&c, 64).unwrap() / (2.0 * fr.rho());
        assert!(
            (got - oracle).abs() <= 1e-4 * oracle.abs(),
            "w1 {got} vs jump oracle {oracle}"
        );
    }

    #[test]
    fn w1_symmetric_in_endpoint_swap() {
        let q = standard_phantom();
        let c = equator_chord(1.1, -0.2);
        let spec = QuadratureSpec::default();
        let fr = ellipsoid_frame(c.x(), c.x0()).unwrap();
        let fr_swapped = ellipsoid_frame(c.x0(), c.x()).unwrap();
        let t = fr.rho() + 0.7;
        let a = w1(&q, &fr, t, &spec).unwrap();
        let b = w1(&q, &fr_swapped, t, &spec).unwrap();
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }

    #[test]
    fn w1_quadrature_convergence() {
        let q = standard_phantom();
        let c = equator_chord(2.0, 0.05);
        let fr = ellipsoid_frame(c.x(), c.x0()).unwrap();
        let t = fr.rho() + 0.8;
        let a = w1(
            &q,
            &fr,
            t,
            &QuadratureSpec {
                n_z: 24,
                n_phi: 24,
                n_tau: 8,
            },
        )
        .unwrap();
        let b = w1(
            &q,
            &fr,
            t,
            &QuadratureSpec {
                n_z: 48,
                n_phi: 48,
                n_tau: 8,
            },
        )
        .unwrap();
        assert!((a - b).abs() <= 1e-8 * b.abs().max(1e-12), "{a} vs {b}");
    }

    #[test]
    fn wn_zero_potential_small_limit_and_bound() {
        let z = Potential::<f64>::new(1.0, vec![]).unwrap();
        let q = standard_phantom();
        let c = equator_chord(std::f64::consts::TAU, 0.1);
        let fr = ellipsoid_frame(c.x(), c.x0()).unwrap();
        let spec = QuadratureSpec {
            n_z: 10,
            n_phi: 10,
            n_tau: 8,
        };
        assert_eq!(wn(&z, &fr, fr.rho() + 0.5, 2, &spec, None).unwrap(), 0.0);
        assert!(wn(&q, &fr, fr.rho() + 0.5, 1, &spec, None).is_err());
        assert!(wn(&q, &fr, fr.rho(), 2, &spec, None).is_err());
        // w2 -> 0 on the cone
        let near = wn(&q, &fr, fr.rho() * (1.0 + 1e-6), 2, &spec, None).unwrap();
        assert!(near.abs() < 1e-6, "w2 near cone: {near}");
        // |w2| <= T q0^2 (t - rho) / 4
        let (q0, _, _) = q.norms(32).unwrap();
        for dt in [0.3, 0.8, 1.5] {
            let t = fr.rho() + dt;
            let v = wn(&q, &fr, t, 2, &spec, None).unwrap();
            let bound = t * q0 * q0 * dt / 4.0;
            assert!(v.abs() <= bound * 1.05, "|w2|={} bound={bound}", v.abs());
        }
    }

    #[test]
    fn wn_memo_agrees_with_direct() {
        let q = standard_phantom();
        let c = equator_chord(1.0, 0.2);
        let fr = ellipsoid_frame(c.x(), c.x0()).unwrap();
        let spec = QuadratureSpec {
            n_z: 6,
            n_phi: 6,
            n_tau: 4,
        };
        let t = fr.rho() + 1.0;
        let direct = wn(&q, &fr, t, 3, &spec, None).unwrap();
        let memo = WnMemo::new(1e-4, 2);
        let cached = wn(&q, &fr, t, 3, &spec, Some(&memo)).unwrap();
        assert!(
            (direct - cached).abs() <= 1e-3 * direct.abs().max(1e-9),
            "{direct} vs {cached}"
        );
    }

    #[test]
    fn wtilde_zero_and_jump() {
        let z = Potential::<f64>::new(1.0, vec![]).unwrap();
        let c = equator_chord(std::f64::consts::TAU, 0.1);
        let fr = ellipsoid_frame(c.x(), c.x0()).unwrap();
        let spec = QuadratureSpec::default();
        assert_eq!(
            wtilde(&z, &fr, fr.rho() + 0.5, 1e-8, 4, &spec).unwrap(),
            (0.0, 1, 0.0)
        );
        // jump relation for the full (truncated) series
        let q = standard_phantom();
        let t = fr.rho() * (1.0 + 1e-6);
        let (v, _, _) = wtilde(&q, &fr, t, 1e-8, 4, &spec).unwrap();
        let rule = GaussLegendre::new(64).unwrap();
        let oracle = -0.5
            * rule.integrate(0.0, 1.0, |zz| q.eval(c.x0() + (c.x() - c.x0()) * zz));
        assert!((v - oracle).abs() <= 1e-4 * oracle.abs(), "{v} vs {oracle}");
    }

    #[test]
    fn tail_bound_arithmetic() {
        // closed-form check of the bound terms
        let b2: f64 = series_term_bound(1.0, 4.0, 0.5, 2);
        assert!((b2 - 4.0 * 0.5 / 4.0).abs() < 1e-15);
        let b3: f64 = series_term_bound(1.0, 4.0, 0.5, 3);
        assert!((b3 - 16.0 * 0.25 / 8.0).abs() < 1e-14);
        let tail = series_tail_bound(1.0, 4.0, 0.5, 2);
        assert!(tail > b2 && tail < 10.0 * b2);
    }

    #[test]
    fn trace_zero_potential_and_boundary() {
        let z = Potential::<f64>::new(1.0, vec![]).unwrap();
        let c = equator_chord(std::f64::consts::TAU, 0.1);
        let trace = TraceSpec {
            n_t: 64,
            ..TraceSpec::default()
        };
        let spec = QuadratureSpec::default();
        let ev = kernel_trace(&z, c.x(), c.x0(), c.length() + 2.0, &trace, &spec).unwrap();
        assert!(ev.values().iter().all(|&v| v == 0.0));
        // boundary value matches the jump oracle for the standard phantom
        let q = standard_phantom();
        let horizon = auto_horizon(&q, c.x(), c.x0(), 2);
        let trace = TraceSpec {
            n_t: 128,
            max_terms: 2,
            ..TraceSpec::default()
        };
        let ev = kernel_trace(&q, c.x(), c.x0(), horizon, &trace, &spec).unwrap();
        let oracle = -q.line_integral(&c, 64).unwrap() / (2.0 * ev.rho());
        let first = ev.values()[0];
        assert!(
            (first - oracle).abs() <= 1e-4 * oracle.abs(),
            "{first} vs {oracle}"
        );
        // past the horizon construction the kernel has died off
        assert!(ev.values().last().unwrap().abs() < 1e-10);
    }

    #[test]
    fn trace_refinement_continuity() {
        // max adjacent jump shrinks as the grid refines
        let q = standard_phantom();
        let c = equator_chord(std::f64::consts::TAU, 0.1);
        let spec = QuadratureSpec {
            n_z: 16,
            n_phi: 16,
            n_tau: 8,
        };
        let horizon = auto_horizon(&q, c.x(), c.x0(), 2);
        let jump = |n_t: usize| {
            let trace = TraceSpec {
                n_t,
                max_terms: 2,
                ..TraceSpec::default()
            };
            let ev = kernel_trace(&q, c.x(), c.x0(), horizon, &trace, &spec).unwrap();
            ev.values()
                .windows(2)
                .map(|w| (w[1] - w[0]).abs())
                .fold(0.0f64, f64::max)
        };
        let coarse = jump(64);
        let fine = jump(128);
        assert!(fine < coarse, "jumps did not shrink: {coarse} -> {fine}");
    }

    #[test]
    fn kernel_vanishes_before_support_entry() {
        // chord far from the bump: the ellipsoid only meets the support for
        // large enough t, and the kernel is exactly zero before that
        let q = Potential::new(
            1.0,
            vec![BumpTerm {
                center: Vec3::new(0.0, 0.55, 0.0),
                radius: 0.2,
                amplitude: 1.0,
            }],
        )
        .unwrap();
        let c = equator_chord(std::f64::consts::FRAC_PI_2, -0.6);
        let fr = ellipsoid_frame(c.x(), c.x0()).unwrap();
        let spec = QuadratureSpec::default();
        // entry time: min over support of |x-xi| + |x0-xi|
        let entry = {
            let mut best = f64::INFINITY;
            let t = &q.terms()[0];
            for i in 0..2000 {
                let ang = std::f64::consts::TAU * i as f64 / 2000.0;
                let p = t.center + Vec3::new(ang.cos(), ang.sin(), 0.0) * t.radius;
                best = best.min(p.dist(c.x()) + p.dist(c.x0()));
            }
            best
        };
        let t_before = fr.rho() + 0.9 * (entry - fr.rho());
        assert!(w1(&q, &fr, t_before, &spec).unwrap() == 0.0);
        let t_after = entry + 0.2;
        assert!(w1(&q, &fr, t_after, &spec).unwrap() != 0.0);
    }

    #[test]
    fn csv_export() {
        let q = standard_phantom();
        let c = equator_chord(std::f64::consts::TAU, 0.1);
        let trace = TraceSpec {
            n_t: 32,
            max_terms: 1,
            ..TraceSpec::default()
        };
        let ev = kernel_trace(
            &q,
            c.x(),
            c.x0(),
            c.length() + 1.0,
            &trace,
            &QuadratureSpec::default(),
        )
        .unwrap();
        let mut buf = Vec::new();
        ev.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,wtilde\n"));
        assert_eq!(text.lines().count(), ev.t_grid().len() + 1);
    }
}
