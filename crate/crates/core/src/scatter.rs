//! Frequency-domain scattered fields and phaseless data: the exact route
//! integrates the time-domain kernel trace against `exp(-ikt)` with a
//! Filon-type rule, the fast route uses the leading large-`k` asymptotic,
//! and both reduce to nonnegative moduli `f = |u_sc|`.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{chord, Chord, SliceGeometry};
use crate::phantom::Potential;
use crate::quad::GaussLegendre;
use crate::radon::Sinogram;
use crate::scalar::Scalar;
use crate::timedomain::{auto_horizon, kernel_trace, KernelEvaluation, QuadratureSpec, TraceSpec};
use crate::vec3::Vec3;

/// Strictly increasing positive wavenumbers.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FrequencyLadder<S> {
    k_values: Vec<S>,
}

impl<S: Scalar> FrequencyLadder<S> {
    pub fn new(k_values: Vec<S>) -> Result<Self> {
        if k_values.is_empty() {
            return Err(Error::validation("frequency ladder: empty"));
        }
        if !(k_values[0] > S::zero()) {
            return Err(Error::validation("frequency ladder: min must be > 0"));
        }
        if k_values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::validation(
                "frequency ladder: values must be strictly increasing",
            ));
        }
        Ok(Self { k_values })
    }

    /// `n` geometrically spaced values from `k_min` to `k_max` inclusive.
    pub fn geometric(k_min: S, k_max: S, n: usize) -> Result<Self> {
        if n < 2 || !(k_min > S::zero()) || k_max <= k_min {
            return Err(Error::validation(
                "frequency ladder: need n >= 2 and 0 < k_min < k_max",
            ));
        }
        let ratio = (k_max / k_min).powf(S::one() / S::of_usize(n - 1));
        let values = (0..n)
            .map(|i| {
                if i == n - 1 {
                    k_max
                } else {
                    k_min * ratio.powi(i as i32)
                }
            })
            .collect();
        Self::new(values)
    }

    /// Default ladder: 8 values geometric over [20, 160] (units 1/length).
    pub fn standard() -> Self {
        Self::geometric(S::of(20.0), S::of(160.0), 8).unwrap()
    }

    pub fn k_values(&self) -> &[S] {
        &self.k_values
    }

    pub fn len(&self) -> usize {
        self.k_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k_values.is_empty()
    }

    pub fn k_min(&self) -> S {
        self.k_values[0]
    }

    pub fn k_max(&self) -> S {
        *self.k_values.last().unwrap()
    }

    /// Spanning ratio k_max / k_min.
    pub fn span(&self) -> S {
        self.k_max() / self.k_min()
    }
}

/// Incident point-source field `exp(-ik|x - x0|) / (4 pi |x - x0|)`.
pub fn free_field<S: Scalar>(x: Vec3<S>, x0: Vec3<S>, k: S) -> Result<Complex<S>> {
    if !(k > S::zero()) {
        return Err(Error::validation("free_field: k must be > 0"));
    }
    let rho = x.dist(x0);
    if rho == S::zero() {
        return Err(Error::validation("free_field: coincident points"));
    }
    let phase = -k * rho;
    Ok(Complex::new(phase.cos(), phase.sin()) / (S::of(4.0) * S::PI() * rho))
}

/// Modulus of the field: the measured quantity; the phase is discarded.
pub fn phaseless<S: Scalar>(u: Complex<S>) -> S {
    u.norm()
}

/// Leading-order scattered field:
/// `i exp(-ik rho) / (8 pi rho k)` times the line integral of the
/// potential over the segment from `x0` to `x`.
pub fn usc_asymptotic<S: Scalar>(
    q: &Potential<S>,
    x: Vec3<S>,
    x0: Vec3<S>,
    k: S,
) -> Result<Complex<S>> {
    if !(k > S::zero()) {
        return Err(Error::validation("usc_asymptotic: k must be > 0"));
    }
    let rho = x.dist(x0);
    if rho == S::zero() {
        return Err(Error::validation("usc_asymptotic: coincident points"));
    }
    let rule = GaussLegendre::new(32)?;
    let rq = q.segment_integral_with_rule(x, x0, &rule);
    let amp = rq / (S::of(8.0) * S::PI() * rho * k);
    let phase = -k * rho;
    // i * e^{-ik rho} = e^{i(pi/2 - k rho)}
    Ok(Complex::new(-phase.sin(), phase.cos()).scale(amp))
}

/// `int_0^h e^{-iku} du` and `int_0^h u e^{-iku} du`, stable for small `kh`.
fn filon_moments<S: Scalar>(k: S, h: S) -> (Complex<S>, Complex<S>) {
    let kh = k * h;
    if kh.abs() < S::of(1e-3) {
        // Taylor in (i k h); relative error O((kh)^4)
        let z = Complex::new(S::zero(), -kh);
        let one = Complex::new(S::one(), S::zero());
        let e0 = (one
            + z.scale(S::of(0.5))
            + (z * z).scale(S::of(1.0 / 6.0))
            + (z * z * z).scale(S::of(1.0 / 24.0)))
        .scale(h);
        let e1 = (one.scale(S::of(0.5))
            + z.scale(S::of(1.0 / 3.0))
            + (z * z).scale(S::of(1.0 / 8.0))
            + (z * z * z).scale(S::of(1.0 / 30.0)))
        .scale(h * h);
        return (e0, e1);
    }
    let ik = Complex::new(S::zero(), k);
    let eh = Complex::new((-kh).cos(), (-kh).sin());
    let e0 = (Complex::new(S::one(), S::zero()) - eh) / ik;
    let e1 = (e0 - eh.scale(h)) / ik;
    (e0, e1)
}

/// Fourier integral of a piecewise-linear tabulated function against
/// `exp(-ikt)`, exact on each linear piece (Filon rule).
fn filon_transform<S: Scalar>(t_grid: &[S], values: &[S], k: S) -> Complex<S> {
    let mut acc = Complex::new(S::zero(), S::zero());
    for i in 0..t_grid.len() - 1 {
        let (t0, t1) = (t_grid[i], t_grid[i + 1]);
        let (v0, v1) = (values[i], values[i + 1]);
        let h = t1 - t0;
        if h <= S::zero() {
            continue;
        }
        let (e0, e1) = filon_moments(k, h);
        let phase = -k * t0;
        let rot = Complex::new(phase.cos(), phase.sin());
        acc += rot * (e0.scale(v0) + e1.scale((v1 - v0) / h));
    }
    acc
}

/// Exact-series scattered field: `(1/4pi)` times the Fourier integral of
/// the kernel trace, exact for the piecewise-linear trace at every `k`.
pub fn usc_series<S: Scalar>(
    x: Vec3<S>,
    x0: Vec3<S>,
    k: S,
    trace: &KernelEvaluation<S>,
) -> Result<Complex<S>> {
    if !(k > S::zero()) {
        return Err(Error::validation("usc_series: k must be > 0"));
    }
    let tol = S::of(1e-9) * (S::one() + trace.rho());
    if trace.x().dist(x) > tol || trace.x0().dist(x0) > tol {
        return Err(Error::validation(
            "usc_series: trace endpoints do not match the requested pair",
        ));
    }
    Ok(filon_transform(trace.t_grid(), trace.values(), k)
        .scale(S::one() / (S::of(4.0) * S::PI())))
}

/// Forward model choice for dataset synthesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScatterModel {
    /// Kernel-series trace + Fourier integral: exact up to truncation.
    Series,
    /// Leading large-k term only: fast, definitionally Radon-consistent.
    Asymptotic,
}

impl ScatterModel {
    pub fn tag(&self) -> &'static str {
        match self {
            ScatterModel::Series => "series",
            ScatterModel::Asymptotic => "asymptotic",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "series" => Ok(ScatterModel::Series),
            "asymptotic" => Ok(ScatterModel::Asymptotic),
            other => Err(Error::validation(format!("unknown model tag {other:?}"))),
        }
    }
}

/// Moduli of the scattered field on a chord x frequency grid for one slice.
#[derive(Debug, Clone)]
pub struct PhaselessDataset<S> {
    slice: SliceGeometry<S>,
    alphas: Vec<S>,
    offsets: Vec<S>,
    s_max: S,
    chords: Vec<Chord<S>>,
    ladder: FrequencyLadder<S>,
    /// Row-major chords x frequencies.
    f_values: Vec<S>,
    model: ScatterModel,
    noise_level: S,
    seed: u64,
}

impl<S: Scalar> PhaselessDataset<S> {
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        slice: SliceGeometry<S>,
        alphas: Vec<S>,
        offsets: Vec<S>,
        s_max: S,
        ladder: FrequencyLadder<S>,
        f_values: Vec<S>,
        model: ScatterModel,
        noise_level: S,
        seed: u64,
    ) -> Result<Self> {
        if f_values.len() != alphas.len() * offsets.len() * ladder.len() {
            return Err(Error::validation("dataset: f grid size mismatch"));
        }
        if f_values.iter().any(|v| !v.is_finite() || *v < S::zero()) {
            return Err(Error::validation(
                "dataset: moduli must be finite and nonnegative",
            ));
        }
        let mut chords = Vec::with_capacity(alphas.len() * offsets.len());
        for &alpha in &alphas {
            for &s in &offsets {
                chords.push(chord(&slice, alpha, s)?);
            }
        }
        Ok(Self {
            slice,
            alphas,
            offsets,
            s_max,
            chords,
            ladder,
            f_values,
            model,
            noise_level,
            seed,
        })
    }

    pub fn slice(&self) -> &SliceGeometry<S> {
        &self.slice
    }

    pub fn alphas(&self) -> &[S] {
        &self.alphas
    }

    pub fn offsets(&self) -> &[S] {
        &self.offsets
    }

    pub fn s_max(&self) -> S {
        self.s_max
    }

    /// Chords in row-major (alpha, s) order.
    pub fn chords(&self) -> &[Chord<S>] {
        &self.chords
    }

    pub fn ladder(&self) -> &FrequencyLadder<S> {
        &self.ladder
    }

    pub fn f_values(&self) -> &[S] {
        &self.f_values
    }

    pub fn f(&self, i_chord: usize, i_k: usize) -> S {
        self.f_values[i_chord * self.ladder.len() + i_k]
    }

    pub fn model(&self) -> ScatterModel {
        self.model
    }

    pub fn noise_level(&self) -> S {
        self.noise_level
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_chords(&self) -> usize {
        self.chords.len()
    }
}

/// Controls for dataset synthesis.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SynthesisSpec {
    pub n_alpha: usize,
    pub n_s: usize,
    /// Fraction of the circle radius excluded at the offset-grid edge.
    pub edge_frac: f64,
    pub model: ScatterModel,
    /// Relative multiplicative noise sigma (0 disables).
    pub noise_level: f64,
    pub seed: u64,
    /// Maximum chord x frequency evaluations for the series model.
    pub budget: usize,
    pub trace: TraceSpec,
    pub quad: QuadratureSpec,
}

impl Default for SynthesisSpec {
    fn default() -> Self {
        Self {
            n_alpha: 90,
            n_s: 64,
            edge_frac: crate::radon::EDGE_MARGIN_FRAC,
            model: ScatterModel::Asymptotic,
            noise_level: 0.0,
            seed: 0,
            budget: 2_000_000,
            trace: TraceSpec::default(),
            quad: QuadratureSpec::default(),
        }
    }
}

/// Standard normal deviate from a deterministic per-sample stream.
fn normal_deviate<S: Scalar>(seed: u64, index: u64) -> S {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    S::of((-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos())
}

/// Synthesizes phaseless data for one slice on the standard chord grid.
///
/// The series model computes one kernel trace per chord and reuses it for
/// every frequency; chords relate by the half-turn mirror
/// `(alpha + pi, -s)`, which swaps the endpoints and leaves the modulus
/// unchanged, so only half the traces are computed when `n_alpha` is even.
pub fn synthesize_dataset<S: Scalar>(
    q: &Potential<S>,
    slice: &SliceGeometry<S>,
    ladder: &FrequencyLadder<S>,
    spec: &SynthesisSpec,
) -> Result<PhaselessDataset<S>> {
    let (alphas, offsets, s_max) =
        Sinogram::<S>::grid(*slice, spec.n_alpha, spec.n_s, S::of(spec.edge_frac))?;
    let n_k = ladder.len();
    let n_chords = alphas.len() * offsets.len();
    if spec.model == ScatterModel::Series && n_chords * n_k > spec.budget {
        return Err(Error::Budget(format!(
            "series synthesis needs {} evaluations, budget is {}",
            n_chords * n_k,
            spec.budget
        )));
    }

    let zero_phantom = q.terms().is_empty();
    let mut f_values = vec![S::zero(); n_chords * n_k];

    if !zero_phantom {
        match spec.model {
            ScatterModel::Asymptotic => {
                let rows: Vec<Vec<S>> = (0..n_chords)
                    .into_par_iter()
                    .map(|c_idx| {
                        let ch = &layout_chord(slice, &alphas, &offsets, c_idx);
                        let rule = GaussLegendre::new(32).unwrap();
                        let rq = q.segment_integral_with_rule(ch.x(), ch.x0(), &rule);
                        let rho = ch.length();
                        ladder
                            .k_values()
                            .iter()
                            .map(|&k| rq / (S::of(8.0) * S::PI() * rho * k))
                            .collect()
                    })
                    .collect();
                for (c_idx, row) in rows.into_iter().enumerate() {
                    f_values[c_idx * n_k..(c_idx + 1) * n_k].copy_from_slice(&row);
                }
            }
            ScatterModel::Series => {
                // representative chords: first half of the angles when the
                // count is even, otherwise all of them
                let dedup = spec.n_alpha.is_multiple_of(2);
                let reps: Vec<usize> = if dedup {
                    (0..n_chords)
                        .filter(|c| c / offsets.len() < spec.n_alpha / 2)
                        .collect()
                } else {
                    (0..n_chords).collect()
                };
                let rows: Vec<(usize, Vec<S>)> = reps
                    .par_iter()
                    .map(|&c_idx| {
                        let ch = layout_chord(slice, &alphas, &offsets, c_idx);
                        let horizon = auto_horizon(q, ch.x(), ch.x0(), spec.trace.max_terms);
                        let trace =
                            kernel_trace(q, ch.x(), ch.x0(), horizon, &spec.trace, &spec.quad)?;
                        let row = ladder
                            .k_values()
                            .iter()
                            .map(|&k| {
                                usc_series(ch.x(), ch.x0(), k, &trace).map(phaseless)
                            })
                            .collect::<Result<Vec<S>>>()?;
                        Ok((c_idx, row))
                    })
                    .collect::<Result<_>>()?;
                for (c_idx, row) in rows {
                    f_values[c_idx * n_k..(c_idx + 1) * n_k].copy_from_slice(&row);
                    if dedup {
                        let i = c_idx / offsets.len();
                        let j = c_idx % offsets.len();
                        let mirror =
                            (i + spec.n_alpha / 2) * offsets.len() + (offsets.len() - 1 - j);
                        let row_copy = f_values[c_idx * n_k..(c_idx + 1) * n_k].to_vec();
                        f_values[mirror * n_k..(mirror + 1) * n_k].copy_from_slice(&row_copy);
                    }
                }
            }
        }
    }

    let sigma = S::of(spec.noise_level);
    if sigma > S::zero() {
        for (idx, v) in f_values.iter_mut().enumerate() {
            let xi: S = normal_deviate(spec.seed, idx as u64);
            *v = (*v * (S::one() + sigma * xi)).max(S::zero());
        }
    }

    PhaselessDataset::from_parts(
        *slice,
        alphas,
        offsets,
        s_max,
        ladder.clone(),
        f_values,
        spec.model,
        sigma,
        spec.seed,
    )
}

fn layout_chord<S: Scalar>(
    slice: &SliceGeometry<S>,
    alphas: &[S],
    offsets: &[S],
    c_idx: usize,
) -> Chord<S> {
    let i = c_idx / offsets.len();
    let j = c_idx % offsets.len();
    chord(slice, alphas[i], offsets[j]).expect("layout chords are interior by construction")
}
