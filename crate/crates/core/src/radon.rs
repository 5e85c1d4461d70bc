//! Forward 2-d Radon transform on slice planes and its inverse by filtered
//! back-projection with a Hann-apodized ramp filter.

use num_complex::Complex;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::geometry::{chord, SliceGeometry};
use crate::phantom::Potential;
use crate::quad::GaussLegendre;
use crate::scalar::Scalar;
use crate::vec3::Vec3;

/// Fraction of the circle radius excluded at the edge of the offset grid.
/// Near-tangent chords have `x -> x0` and the `1/|x - x0|` prefactor of the
/// scattering model degenerates there.
pub const EDGE_MARGIN_FRAC: f64 = 0.02;

/// Radon values on a uniform `(alpha, s)` grid for one slice.
#[derive(Debug, Clone)]
pub struct Sinogram<S> {
    slice: SliceGeometry<S>,
    alphas: Vec<S>,
    offsets: Vec<S>,
    s_max: S,
    /// Row-major `n_alpha x n_s`.
    values: Vec<S>,
}

impl<S: Scalar> Sinogram<S> {
    /// Grid layout shared by sinograms and phaseless datasets: angles
    /// `(0, 2*pi]` uniform, offsets cell-centered in `(-s_max, s_max)` with
    /// `s_max = (1 - edge_frac) * B_a`.
    pub fn grid(
        slice: SliceGeometry<S>,
        n_alpha: usize,
        n_s: usize,
        edge_frac: S,
    ) -> Result<(Vec<S>, Vec<S>, S)> {
        if n_alpha < 4 || n_s < 4 {
            return Err(Error::validation("sinogram grid needs n_alpha >= 4, n_s >= 4"));
        }
        if edge_frac < S::zero() || edge_frac >= S::one() {
            return Err(Error::validation("edge fraction must be in [0, 1)"));
        }
        let s_max = slice.radius() * (S::one() - edge_frac);
        let alphas = (0..n_alpha)
            .map(|i| S::of_usize(i + 1) * S::TAU() / S::of_usize(n_alpha))
            .collect();
        let ds = S::of(2.0) * s_max / S::of_usize(n_s);
        let offsets = (0..n_s)
            .map(|j| -s_max + (S::of_usize(j) + S::of(0.5)) * ds)
            .collect();
        Ok((alphas, offsets, s_max))
    }

    pub fn from_values(
        slice: SliceGeometry<S>,
        alphas: Vec<S>,
        offsets: Vec<S>,
        s_max: S,
        values: Vec<S>,
    ) -> Result<Self> {
        if values.len() != alphas.len() * offsets.len() {
            return Err(Error::validation("sinogram value grid size mismatch"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("sinogram contains non-finite values"));
        }
        Ok(Self {
            slice,
            alphas,
            offsets,
            s_max,
            values,
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

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn value(&self, i_alpha: usize, j_s: usize) -> S {
        self.values[i_alpha * self.offsets.len() + j_s]
    }

    /// Pointwise sum, used by linearity checks.
    pub fn add(&self, other: &Sinogram<S>) -> Result<Sinogram<S>> {
        if self.alphas.len() != other.alphas.len() || self.offsets.len() != other.offsets.len() {
            return Err(Error::validation("sinogram shapes differ"));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| a + b)
            .collect();
        Sinogram::from_values(
            self.slice,
            self.alphas.clone(),
            self.offsets.clone(),
            self.s_max,
            values,
        )
    }
}

/// Reconstructed slice of the potential on a square grid over
/// `[-B_a, B_a]^2`, cell-centered.
#[derive(Debug, Clone)]
pub struct SliceImage<S> {
    slice: SliceGeometry<S>,
    n: usize,
    half_extent: S,
    values: Vec<S>,
}

impl<S: Scalar> SliceImage<S> {
    pub fn new(slice: SliceGeometry<S>, n: usize, half_extent: S, values: Vec<S>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::validation("image grid size mismatch"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("image contains non-finite values"));
        }
        Ok(Self {
            slice,
            n,
            half_extent,
            values,
        })
    }

    pub fn slice(&self) -> &SliceGeometry<S> {
        &self.slice
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_extent(&self) -> S {
        self.half_extent
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    /// In-plane coordinate of the pixel center with index `i` along an axis.
    pub fn coord(&self, i: usize) -> S {
        let e = self.half_extent;
        -e + (S::of_usize(i) + S::of(0.5)) * S::of(2.0) * e / S::of_usize(self.n)
    }

    /// 3-d position of pixel `(ix, iy)`.
    pub fn point(&self, ix: usize, iy: usize) -> Vec3<S> {
        Vec3::new(self.coord(ix), self.coord(iy), self.slice.a())
    }

    pub fn value(&self, ix: usize, iy: usize) -> S {
        self.values[iy * self.n + ix]
    }
}

/// Radon transform of the potential over the chord `(alpha, s)`.
pub fn radon_forward<S: Scalar>(
    q: &Potential<S>,
    g: &SliceGeometry<S>,
    alpha: S,
    s: S,
    n_quad: usize,
) -> Result<S> {
    let c = chord(g, alpha, s)?;
    q.line_integral(&c, n_quad)
}

/// Full sinogram of the potential on the uniform grid.
pub fn sinogram<S: Scalar>(
    q: &Potential<S>,
    g: &SliceGeometry<S>,
    n_alpha: usize,
    n_s: usize,
    edge_frac: S,
    n_quad: usize,
) -> Result<Sinogram<S>> {
    let (alphas, offsets, s_max) = Sinogram::grid(*g, n_alpha, n_s, edge_frac)?;
    let rule = GaussLegendre::new(n_quad.max(2))?;
    let values: Vec<S> = alphas
        .par_iter()
        .flat_map_iter(|&alpha| {
            let rule = &rule;
            offsets.iter().map(move |&s| {
                let c = chord(g, alpha, s).expect("grid offsets are interior");
                q.line_integral_with_rule(&c, rule)
            })
        })
        .collect();
    Sinogram::from_values(*g, alphas, offsets, s_max, values)
}

/// Ramp filter choice for the back-projection step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FbpFilter {
    /// Plain Ram-Lak ramp.
    Ramp,
    /// Ramp with Hann apodization at the offset-grid Nyquist frequency.
    RampHann,
}

/// Inverts the sinogram by filtered back-projection.
///
/// Each angular profile is ramp-filtered in the frequency domain after
/// zero-padding to at least twice its length, then back-projected with
/// linear interpolation in `s`; values outside the offset range count as 0.
pub fn fbp_invert<S: Scalar>(
    sg: &Sinogram<S>,
    n_image: usize,
    filter: FbpFilter,
) -> Result<SliceImage<S>> {
    let n_s = sg.offsets.len();
    let n_alpha = sg.alphas.len();
    if n_s < 4 {
        return Err(Error::validation("fbp: degenerate offset grid"));
    }
    if n_image < 2 {
        return Err(Error::validation("fbp: n_image must be >= 2"));
    }
    let ds = (sg.offsets[n_s - 1] - sg.offsets[0]) / S::of_usize(n_s - 1);
    let padded = (2 * n_s).next_power_of_two();
    let mut planner = FftPlanner::<S>::new();
    let fft = planner.plan_fft_forward(padded);
    let ifft = planner.plan_fft_inverse(padded);

    // frequency response |nu| * window(nu) at physical frequencies
    let nyquist = S::of(0.5) / ds;
    let dnu = S::one() / (S::of_usize(padded) * ds);
    let response: Vec<S> = (0..padded)
        .map(|m| {
            let m_signed = if m <= padded / 2 {
                S::of_usize(m)
            } else {
                -S::of_usize(padded - m)
            };
            let nu = m_signed * dnu;
            let w = match filter {
                FbpFilter::Ramp => S::one(),
                FbpFilter::RampHann => {
                    S::of(0.5) * (S::one() + (S::PI() * nu / nyquist).cos())
                }
            };
            nu.abs() * w
        })
        .collect();

    // filter every angular profile
    let filtered: Vec<Vec<S>> = (0..n_alpha)
        .into_par_iter()
        .map(|i| {
            let mut buf: Vec<Complex<S>> = (0..padded)
                .map(|j| {
                    if j < n_s {
                        Complex::new(sg.value(i, j), S::zero())
                    } else {
                        Complex::new(S::zero(), S::zero())
                    }
                })
                .collect();
            fft.process(&mut buf);
            for (c, &h) in buf.iter_mut().zip(&response) {
                *c *= h;
            }
            ifft.process(&mut buf);
            let norm = S::one() / S::of_usize(padded);
            buf[..n_s].iter().map(|c| c.re * norm).collect()
        })
        .collect();

    let half_extent = sg.slice.radius();
    let n = n_image;
    let s0 = sg.offsets[0];
    let dalpha = S::TAU() / S::of_usize(n_alpha);
    let trig: Vec<(S, S)> = sg.alphas.iter().map(|&a| (a.cos(), a.sin())).collect();
    let values: Vec<S> = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let (iy, ix) = (idx / n, idx % n);
            let y1 = -half_extent
                + (S::of_usize(ix) + S::of(0.5)) * S::of(2.0) * half_extent / S::of_usize(n);
            let y2 = -half_extent
                + (S::of_usize(iy) + S::of(0.5)) * S::of(2.0) * half_extent / S::of_usize(n);
            let mut acc = S::zero();
            for (row, &(ca, sa)) in filtered.iter().zip(&trig) {
                let s = y1 * ca + y2 * sa;
                let u = (s - s0) / ds;
                if u >= S::zero() {
                    let j = u.floor();
                    let jj = j.to_usize().unwrap_or(usize::MAX);
                    if jj + 1 < n_s {
                        let frac = u - j;
                        acc += row[jj] * (S::one() - frac) + row[jj + 1] * frac;
                    }
                }
            }
            acc * dalpha * S::of(0.5)
        })
        .collect();
    SliceImage::new(sg.slice, n, half_extent, values)
}
