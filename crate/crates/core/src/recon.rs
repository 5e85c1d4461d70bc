//! Inversion of phaseless data: per-chord extrapolation of `lim k·f`,
//! rescaling into a sinogram of the potential, slice-wise filtered
//! back-projection, and stacking into a volume.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::Chord;
use crate::phantom::Potential;
use crate::radon::{fbp_invert, FbpFilter, Sinogram, SliceImage};
use crate::scalar::Scalar;
use crate::scatter::{FrequencyLadder, PhaselessDataset};

/// Estimated high-frequency limit of `k * f` for one chord.
#[derive(Debug, Clone)]
pub struct LimitEstimate<S> {
    pub chord: Chord<S>,
    /// Estimated `lim k f`; the true limit is `(Rq)/(8 pi rho) >= 0`.
    pub value: S,
    /// RMS misfit of the two-parameter model over the ladder.
    pub residual: S,
    pub k_range_used: (S, S),
}

/// Weighted least-squares fit of `k f(k) = A + B/k` with weights `k^2`
/// (inverse variance for an absolute error of order `1/k` in `k f`).
pub fn extract_limit<S: Scalar>(
    chord: Chord<S>,
    f_samples: &[S],
    ladder: &FrequencyLadder<S>,
) -> Result<LimitEstimate<S>> {
    let ks = ladder.k_values();
    if f_samples.len() != ks.len() {
        return Err(Error::validation("extract_limit: sample/ladder length mismatch"));
    }
    if ks.len() < 3 {
        return Err(Error::validation("extract_limit: need at least 3 frequencies"));
    }
    if ladder.span() < S::of(4.0 * (1.0 - 1e-12)) {
        return Err(Error::validation(
            "extract_limit: ladder must span a factor >= 4",
        ));
    }
    if f_samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("extract_limit: non-finite samples"));
    }
    // normal equations for basis {1, 1/k} under weights k^2
    let mut s11 = S::zero();
    let mut s12 = S::zero();
    let mut s22 = S::zero();
    let mut b1 = S::zero();
    let mut b2 = S::zero();
    for (&k, &f) in ks.iter().zip(f_samples) {
        let w = k * k;
        let y = k * f;
        let inv = S::one() / k;
        s11 += w;
        s12 += w * inv;
        s22 += w * inv * inv;
        b1 += w * y;
        b2 += w * y * inv;
    }
    let det = s11 * s22 - s12 * s12;
    if det.abs() <= S::epsilon() * s11 * s22 {
        return Err(Error::validation("extract_limit: degenerate ladder"));
    }
    let a = (b1 * s22 - b2 * s12) / det;
    let b = (s11 * b2 - s12 * b1) / det;
    let mut rss = S::zero();
    for (&k, &f) in ks.iter().zip(f_samples) {
        let r = k * f - a - b / k;
        rss += r * r;
    }
    let residual = (rss / S::of_usize(ks.len())).sqrt();
    Ok(LimitEstimate {
        chord,
        value: a,
        residual,
        k_range_used: (ladder.k_min(), ladder.k_max()),
    })
}

/// Sinogram of the potential from phaseless data:
/// `entry(alpha, s) = 8 pi |x - x0| * lim k f`.
///
/// With `clamp` set, negative limit estimates are zeroed before
/// back-projection (physical prior for noisy runs; off by default to
/// preserve linearity).
pub fn sinogram_from_data<S: Scalar>(
    ds: &PhaselessDataset<S>,
    clamp: bool,
) -> Result<Sinogram<S>> {
    let n_k = ds.ladder().len();
    let values: Vec<S> = ds
        .chords()
        .par_iter()
        .enumerate()
        .map(|(c_idx, ch)| {
            let row = &ds.f_values()[c_idx * n_k..(c_idx + 1) * n_k];
            let est = extract_limit(*ch, row, ds.ladder())?;
            let mut v = S::of(8.0) * S::PI() * ch.length() * est.value;
            if clamp && v < S::zero() {
                v = S::zero();
            }
            Ok(v)
        })
        .collect::<Result<_>>()?;
    Sinogram::from_values(
        *ds.slice(),
        ds.alphas().to_vec(),
        ds.offsets().to_vec(),
        ds.s_max(),
        values,
    )
}

/// Filtered back-projection of the data-derived sinogram.
pub fn reconstruct_slice<S: Scalar>(
    sg: &Sinogram<S>,
    n_image: usize,
    filter: FbpFilter,
) -> Result<SliceImage<S>> {
    fbp_invert(sg, n_image, filter)
}

/// Stack of independently reconstructed slices.
#[derive(Debug, Clone)]
pub struct Volume<S> {
    slices: Vec<(S, SliceImage<S>)>,
    b: S,
}

impl<S: Scalar> Volume<S> {
    pub fn new(b: S, mut slices: Vec<(S, SliceImage<S>)>) -> Result<Self> {
        if slices.is_empty() {
            return Err(Error::validation("volume: no slices"));
        }
        slices.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());
        if slices.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::validation("volume: duplicate slice heights"));
        }
        if slices.iter().any(|(a, _)| a.abs() >= b) {
            return Err(Error::validation("volume: slice height outside (-B, B)"));
        }
        Ok(Self { slices, b })
    }

    pub fn slices(&self) -> &[(S, SliceImage<S>)] {
        &self.slices
    }

    pub fn b(&self) -> S {
        self.b
    }
}

/// Reconstructs one slice per dataset; slices are fully independent
/// (the acquisition itself is slice-wise).
pub fn reconstruct_volume<S: Scalar>(
    datasets: &[PhaselessDataset<S>],
    n_image: usize,
    filter: FbpFilter,
    clamp: bool,
) -> Result<Volume<S>> {
    if datasets.is_empty() {
        return Err(Error::validation("reconstruct_volume: no datasets"));
    }
    let b = datasets[0].slice().b();
    let slices: Vec<(S, SliceImage<S>)> = datasets
        .par_iter()
        .map(|ds| {
            if ds.slice().b() != b {
                return Err(Error::validation("reconstruct_volume: mixed domain radii"));
            }
            let sg = sinogram_from_data(ds, clamp)?;
            Ok((ds.slice().a(), reconstruct_slice(&sg, n_image, filter)?))
        })
        .collect::<Result<_>>()?;
    Volume::new(b, slices)
}

/// Error norms of a reconstruction against direct phantom evaluation on
/// the same grid.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Metrics {
    pub rel_l2: f64,
    pub rel_linf: f64,
    pub max_abs: f64,
}

fn accumulate<S: Scalar>(
    img: &SliceImage<S>,
    truth: &Potential<S>,
) -> (f64, f64, f64, f64, f64) {
    let mut num2 = 0.0;
    let mut den2 = 0.0;
    let mut max_diff = 0.0f64;
    let mut max_truth = 0.0f64;
    let n = img.n();
    for iy in 0..n {
        for ix in 0..n {
            let t = truth.eval(img.point(ix, iy)).as_f64();
            let d = img.value(ix, iy).as_f64() - t;
            num2 += d * d;
            den2 += t * t;
            max_diff = max_diff.max(d.abs());
            max_truth = max_truth.max(t.abs());
        }
    }
    (num2, den2, max_diff, max_truth, (n * n) as f64)
}

fn finish(num2: f64, den2: f64, max_diff: f64, max_truth: f64) -> Metrics {
    let ratio = |num: f64, den: f64| {
        if den == 0.0 {
            if num == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            num / den
        }
    };
    Metrics {
        rel_l2: ratio(num2.sqrt(), den2.sqrt()),
        rel_linf: ratio(max_diff, max_truth),
        max_abs: max_diff,
    }
}

/// Metrics for a single slice.
pub fn metrics_slice<S: Scalar>(img: &SliceImage<S>, truth: &Potential<S>) -> Metrics {
    let (num2, den2, max_diff, max_truth, _) = accumulate(img, truth);
    finish(num2, den2, max_diff, max_truth)
}

/// Metrics aggregated over all slices of a volume.
pub fn metrics_volume<S: Scalar>(vol: &Volume<S>, truth: &Potential<S>) -> Metrics {
    let mut num2 = 0.0;
    let mut den2 = 0.0;
    let mut max_diff = 0.0f64;
    let mut max_truth = 0.0f64;
    for (_, img) in vol.slices() {
        let (n2, d2, md, mt, _) = accumulate(img, truth);
        num2 += n2;
        den2 += d2;
        max_diff = max_diff.max(md);
        max_truth = max_truth.max(mt);
    }
    finish(num2, den2, max_diff, max_truth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{chord, SliceGeometry};
    use crate::phantom::BumpTerm;
    use crate::radon;
    use crate::scatter::{synthesize_dataset, ScatterModel, SynthesisSpec};
    use crate::vec3::Vec3;
    use rand::{Rng, SeedableRng};

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

    fn test_chord() -> Chord<f64> {
        let g = SliceGeometry::new(1.0, 0.0).unwrap();
        chord(&g, 1.0, 0.1).unwrap()
    }

    #[test]
    fn extract_limit_exact_on_model_class() {
        let ladder = FrequencyLadder::geometric(20.0, 160.0, 6).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let a: f64 = rng.gen_range(-3.0..3.0);
            let b: f64 = rng.gen_range(-30.0..30.0);
            let f: Vec<f64> = ladder.k_values().iter().map(|k| (a + b / k) / k).collect();
            let est = extract_limit(test_chord(), &f, &ladder).unwrap();
            assert!((est.value - a).abs() < 1e-11, "A={a}: got {}", est.value);
            assert!(est.residual < 1e-12, "residual {}", est.residual);
        }
        // pure c/k input is nested in the model
        let f: Vec<f64> = ladder.k_values().iter().map(|k| 2.5 / k).collect();
        let est = extract_limit(test_chord(), &f, &ladder).unwrap();
        assert!((est.value - 2.5).abs() < 1e-12);
        assert_eq!(est.k_range_used, (20.0, 160.0));
    }

    #[test]
    fn extract_limit_preconditions() {
        let short = FrequencyLadder::new(vec![20.0, 80.0]).unwrap();
        assert!(extract_limit(test_chord(), &[1.0, 2.0], &short).is_err());
        let narrow = FrequencyLadder::new(vec![20.0, 30.0, 40.0]).unwrap();
        assert!(extract_limit(test_chord(), &[1.0, 2.0, 3.0], &narrow).is_err());
        let ok = FrequencyLadder::new(vec![20.0, 40.0, 80.0]).unwrap();
        assert!(extract_limit(test_chord(), &[1.0, f64::NAN, 3.0], &ok).is_err());
        assert!(extract_limit(test_chord(), &[1.0, 2.0], &ok).is_err());
    }

    #[test]
    fn zero_dataset_zero_pipeline() {
        let z = Potential::<f64>::new(1.0, vec![]).unwrap();
        let g = SliceGeometry::new(1.0, 0.0).unwrap();
        let ladder = FrequencyLadder::geometric(20.0, 160.0, 4).unwrap();
        let spec = SynthesisSpec {
            n_alpha: 12,
            n_s: 8,
            ..SynthesisSpec::default()
        };
        let ds = synthesize_dataset(&z, &g, &ladder, &spec).unwrap();
        let sg = sinogram_from_data(&ds, false).unwrap();
        assert!(sg.values().iter().all(|&v| v == 0.0));
        let img = reconstruct_slice(&sg, 16, FbpFilter::RampHann).unwrap();
        assert!(img.values().iter().all(|&v| v == 0.0));
        let m = metrics_slice(&img, &z);
        assert_eq!((m.rel_l2, m.rel_linf, m.max_abs), (0.0, 0.0, 0.0));
    }

    #[test]
    fn asymptotic_dataset_recovers_forward_sinogram() {
        let q = standard_phantom();
        let g = SliceGeometry::new(1.0, 0.0).unwrap();
        let ladder = FrequencyLadder::standard();
        let spec = SynthesisSpec {
            n_alpha: 24,
            n_s: 16,
            ..SynthesisSpec::default()
        };
        let ds = synthesize_dataset(&q, &g, &ladder, &spec).unwrap();
        let got = sinogram_from_data(&ds, false).unwrap();
        let want = radon::sinogram(&q, &g, 24, 16, 0.02, 32).unwrap();
        for (a, b) in got.values().iter().zip(want.values()) {
            assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn end_to_end_asymptotic_accuracy() {
        let q = standard_phantom();
        let g = SliceGeometry::new(1.0, 0.0).unwrap();
        let ladder = FrequencyLadder::standard();
        let spec = SynthesisSpec {
            n_alpha: 180,
            n_s: 128,
            ..SynthesisSpec::default()
        };
        let ds = synthesize_dataset(&q, &g, &ladder, &spec).unwrap();
        let sg = sinogram_from_data(&ds, false).unwrap();
        let img = reconstruct_slice(&sg, 64, FbpFilter::RampHann).unwrap();
        let m = metrics_slice(&img, &q);
        assert!(m.rel_l2 < 0.10, "rel_l2 = {}", m.rel_l2);
    }

    #[test]
    fn clamp_zeroes_negative_estimates() {
        // craft a dataset whose fitted limits are negative on some chords
        let g = SliceGeometry::new(1.0, 0.0).unwrap();
        let ladder = FrequencyLadder::new(vec![20.0, 40.0, 80.0, 160.0]).unwrap();
        let (alphas, offsets, s_max) = Sinogram::<f64>::grid(g, 4, 4, 0.02).unwrap();
        let n_chords = 16;
        // f = max(0, (A + B/k)/k) with A < 0 but small |A| so noise-free
        // moduli stay nonnegative thanks to B
        let mut f = Vec::new();
        for _ in 0..n_chords {
            for &k in ladder.k_values() {
                f.push((-0.01 + 10.0 / k) / k);
            }
        }
        let ds = PhaselessDataset::from_parts(
            g,
            alphas,
            offsets,
            s_max,
            ladder,
            f,
            ScatterModel::Asymptotic,
            0.0,
            0,
        )
        .unwrap();
        let open = sinogram_from_data(&ds, false).unwrap();
        assert!(open.values().iter().all(|&v| v < 0.0));
        let clamped = sinogram_from_data(&ds, true).unwrap();
        assert!(clamped.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn volume_heights_and_independence() {
        let q = standard_phantom();
        let ladder = FrequencyLadder::standard();
        let spec = SynthesisSpec {
            n_alpha: 12,
            n_s: 8,
            ..SynthesisSpec::default()
        };
        let make = |a: f64| {
            let g = SliceGeometry::new(1.0, a).unwrap();
            synthesize_dataset(&q, &g, &ladder, &spec).unwrap()
        };
        let ds0 = make(0.0);
        let ds1 = make(0.3);
        let vol = reconstruct_volume(
            &[ds0.clone(), ds1.clone()],
            16,
            FbpFilter::RampHann,
            false,
        )
        .unwrap();
        assert_eq!(vol.slices().len(), 2);
        assert!(vol.slices()[0].0 < vol.slices()[1].0);
        // duplicate heights rejected
        assert!(
            reconstruct_volume(&[ds0.clone(), ds0.clone()], 16, FbpFilter::RampHann, false)
                .is_err()
        );
        // perturbing one slice leaves the other bit-identical
        let noisy_spec = SynthesisSpec {
            noise_level: 0.05,
            seed: 3,
            ..spec
        };
        let g1 = SliceGeometry::new(1.0, 0.3).unwrap();
        let ds1_noisy = synthesize_dataset(&q, &g1, &ladder, &noisy_spec).unwrap();
        let vol2 =
            reconstruct_volume(&[ds0, ds1_noisy], 16, FbpFilter::RampHann, false).unwrap();
        assert_eq!(vol.slices()[0].1.values(), vol2.slices()[0].1.values());
        assert_ne!(vol.slices()[1].1.values(), vol2.slices()[1].1.values());
    }

    #[test]
    fn symmetric_phantom_symmetric_slices() {
        // bump centered on the equator: slices at +/- a see the same data
        let q = Potential::new(
            1.0,
            vec![BumpTerm {
                center: Vec3::new(0.0, 0.0, 0.0),
                radius: 0.5,
                amplitude: 1.0,
            }],
        )
        .unwrap();
        let ladder = FrequencyLadder::standard();
        let spec = SynthesisSpec {
            n_alpha: 16,
            n_s: 12,
            ..SynthesisSpec::default()
        };
        let up = SliceGeometry::new(1.0, 0.25).unwrap();
        let dn = SliceGeometry::new(1.0, -0.25).unwrap();
        let img_up = reconstruct_slice(
            &sinogram_from_data(&synthesize_dataset(&q, &up, &ladder, &spec).unwrap(), false)
                .unwrap(),
            24,
            FbpFilter::RampHann,
        )
        .unwrap();
        let img_dn = reconstruct_slice(
            &sinogram_from_data(&synthesize_dataset(&q, &dn, &ladder, &spec).unwrap(), false)
                .unwrap(),
            24,
            FbpFilter::RampHann,
        )
        .unwrap();
        for (a, b) in img_up.values().iter().zip(img_dn.values()) {
            let d: f64 = a - b;
            assert!(d.abs() < 1e-10);
        }
    }

    #[test]
    fn metrics_trivial_cases() {
        let q = standard_phantom();
        let g = SliceGeometry::new(1.0, 0.0).unwrap();
        let n = 32;
        let blank = SliceImage::new(g, n, g.radius(), vec![0.0; n * n]).unwrap();
        // sample the truth onto the grid
        let truth_vals: Vec<f64> = (0..n * n)
            .map(|idx| q.eval(blank.point(idx % n, idx / n)))
            .collect();
        let exact = SliceImage::new(g, n, g.radius(), truth_vals.clone()).unwrap();
        let m = metrics_slice(&exact, &q);
        assert_eq!((m.rel_l2, m.rel_linf, m.max_abs), (0.0, 0.0, 0.0));
        let m0 = metrics_slice(&blank, &q);
        assert!((m0.rel_l2 - 1.0).abs() < 1e-14);
        let scaled = SliceImage::new(
            g,
            n,
            g.radius(),
            truth_vals.iter().map(|v| 1.1 * v).collect(),
        )
        .unwrap();
        let ms = metrics_slice(&scaled, &q);
        assert!((ms.rel_linf - 0.1).abs() < 1e-10, "{}", ms.rel_linf);
    }
}
