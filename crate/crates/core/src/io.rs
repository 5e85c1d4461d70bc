//! On-disk formats: phantom JSON, sinogram/image/dataset binaries with
//! JSON sidecars, PGM export, and the concatenated volume file. All binary
//! fields are little-endian; float payloads are 64-bit.

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::SliceGeometry;
use crate::phantom::{BumpTerm, Potential};
use crate::radon::{Sinogram, SliceImage};
use crate::recon::Volume;
use crate::scalar::Scalar;
use crate::scatter::{FrequencyLadder, PhaselessDataset, ScatterModel};
use crate::vec3::Vec3;

pub const FORMAT_VERSION: u32 = 1;

/// Hex SHA-256 of a byte string, used for provenance records.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let digest = h.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Hex SHA-256 of a file's contents.
pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

/// Sidecar path convention: the data path with `.json` appended.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".json");
    PathBuf::from(os)
}

fn format_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

// ---------------------------------------------------------------------------
// phantom/1 JSON

#[derive(serde::Serialize, serde::Deserialize)]
struct PhantomFile {
    format: String,
    support_radius: f64,
    terms: Vec<PhantomTerm>,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct PhantomTerm {
    center: [f64; 3],
    radius: f64,
    amplitude: f64,
}

pub fn write_phantom<S: Scalar>(path: &Path, q: &Potential<S>) -> Result<()> {
    let file = PhantomFile {
        format: "phantom/1".into(),
        support_radius: q.support_radius().as_f64(),
        terms: q
            .terms()
            .iter()
            .map(|t| PhantomTerm {
                center: [t.center.x.as_f64(), t.center.y.as_f64(), t.center.z.as_f64()],
                radius: t.radius.as_f64(),
                amplitude: t.amplitude.as_f64(),
            })
            .collect(),
    };
    std::fs::write(path, serde_json::to_string_pretty(&file)? + "\n")?;
    Ok(())
}

pub fn read_phantom<S: Scalar>(path: &Path) -> Result<Potential<S>> {
    let text = std::fs::read_to_string(path)?;
    let file: PhantomFile =
        serde_json::from_str(&text).map_err(|e| format_err(path, format!("bad phantom JSON: {e}")))?;
    if file.format != "phantom/1" {
        return Err(format_err(
            path,
            format!("unsupported phantom format {:?}", file.format),
        ));
    }
    let terms = file
        .terms
        .iter()
        .map(|t| BumpTerm {
            center: Vec3::new(S::of(t.center[0]), S::of(t.center[1]), S::of(t.center[2])),
            radius: S::of(t.radius),
            amplitude: S::of(t.amplitude),
        })
        .collect();
    Potential::new(S::of(file.support_radius), terms)
}

// ---------------------------------------------------------------------------
// little-endian primitives

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8], path: &'a Path) -> Self {
        Self { buf, pos: 0, path }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(format_err(self.path, "truncated file"));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64_vec(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(8 * n)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn magic(&mut self, want: &[u8; 4]) -> Result<()> {
        let got = self.take(4)?;
        if got != want {
            return Err(format_err(
                self.path,
                format!(
                    "bad magic {:?}, expected {:?}",
                    String::from_utf8_lossy(got),
                    String::from_utf8_lossy(want)
                ),
            ));
        }
        let version = self.u32()?;
        if version != FORMAT_VERSION {
            return Err(format_err(self.path, format!("unsupported version {version}")));
        }
        Ok(())
    }

    fn done(&self) -> bool {
        self.pos == self.buf.len()
    }
}

fn push_f64s<S: Scalar>(out: &mut Vec<u8>, values: &[S]) {
    for v in values {
        out.extend_from_slice(&v.as_f64().to_le_bytes());
    }
}

// ---------------------------------------------------------------------------
// SGRM sinogram

#[derive(serde::Serialize, serde::Deserialize)]
pub struct GridSidecar {
    pub format: String,
    pub n_alpha: usize,
    pub n_s: usize,
    pub b: f64,
    pub a: f64,
    pub s_max: f64,
    pub data_sha256: String,
}

fn sinogram_bytes<S: Scalar>(sg: &Sinogram<S>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(b"SGRM");
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(sg.alphas().len() as u32).to_le_bytes());
    out.extend_from_slice(&(sg.offsets().len() as u32).to_le_bytes());
    out.extend_from_slice(&sg.slice().b().as_f64().to_le_bytes());
    out.extend_from_slice(&sg.slice().a().as_f64().to_le_bytes());
    out.extend_from_slice(&sg.s_max().as_f64().to_le_bytes());
    push_f64s(&mut out, sg.values());
    out
}

pub fn write_sinogram<S: Scalar>(path: &Path, sg: &Sinogram<S>) -> Result<()> {
    let bytes = sinogram_bytes(sg);
    let sidecar = GridSidecar {
        format: "sgrm/1".into(),
        n_alpha: sg.alphas().len(),
        n_s: sg.offsets().len(),
        b: sg.slice().b().as_f64(),
        a: sg.slice().a().as_f64(),
        s_max: sg.s_max().as_f64(),
        data_sha256: sha256_hex(&bytes),
    };
    std::fs::write(path, &bytes)?;
    std::fs::write(
        sidecar_path(path),
        serde_json::to_string_pretty(&sidecar)? + "\n",
    )?;
    Ok(())
}

pub fn read_sinogram<S: Scalar>(path: &Path) -> Result<Sinogram<S>> {
    let buf = std::fs::read(path)?;
    let mut r = Reader::new(&buf, path);
    r.magic(b"SGRM")?;
    let n_alpha = r.u32()? as usize;
    let n_s = r.u32()? as usize;
    let b = r.f64()?;
    let a = r.f64()?;
    let s_max = r.f64()?;
    let values: Vec<S> = r.f64_vec(n_alpha * n_s)?.into_iter().map(S::of).collect();
    if !r.done() {
        return Err(format_err(path, "trailing bytes"));
    }
    let slice = SliceGeometry::new(S::of(b), S::of(a))?;
    let (alphas, offsets) = uniform_grid::<S>(n_alpha, n_s, S::of(s_max));
    Sinogram::from_values(slice, alphas, offsets, S::of(s_max), values)
}

/// Regenerates the uniform grid implied by `(n_alpha, n_s, s_max)`.
fn uniform_grid<S: Scalar>(n_alpha: usize, n_s: usize, s_max: S) -> (Vec<S>, Vec<S>) {
    let alphas = (0..n_alpha)
        .map(|i| S::of_usize(i + 1) * S::TAU() / S::of_usize(n_alpha))
        .collect();
    let ds = S::of(2.0) * s_max / S::of_usize(n_s);
    let offsets = (0..n_s)
        .map(|j| -s_max + (S::of_usize(j) + S::of(0.5)) * ds)
        .collect();
    (alphas, offsets)
}

// ---------------------------------------------------------------------------
// SIMG slice image

fn image_bytes<S: Scalar>(img: &SliceImage<S>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(b"SIMG");
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(img.n() as u32).to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    out.extend_from_slice(&img.slice().b().as_f64().to_le_bytes());
    out.extend_from_slice(&img.slice().a().as_f64().to_le_bytes());
    out.extend_from_slice(&img.half_extent().as_f64().to_le_bytes());
    push_f64s(&mut out, img.values());
    out
}

#[derive(serde::Serialize, serde::Deserialize)]
pub struct ImageSidecar {
    pub format: String,
    pub n: usize,
    pub b: f64,
    pub a: f64,
    pub half_extent: f64,
    pub data_sha256: String,
    /// Linear min-max scaling used by a PGM export, when one was written.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pgm_scale: Option<(f64, f64)>,
}

pub fn write_image<S: Scalar>(path: &Path, img: &SliceImage<S>) -> Result<()> {
    write_image_with_pgm(path, img, None)
}

/// Writes the binary image plus sidecar; with `pgm` set, also an 8-bit
/// PGM preview with linear min-max scaling recorded in the sidecar.
pub fn write_image_with_pgm<S: Scalar>(
    path: &Path,
    img: &SliceImage<S>,
    pgm: Option<&Path>,
) -> Result<()> {
    let bytes = image_bytes(img);
    let mut sidecar = ImageSidecar {
        format: "simg/1".into(),
        n: img.n(),
        b: img.slice().b().as_f64(),
        a: img.slice().a().as_f64(),
        half_extent: img.half_extent().as_f64(),
        data_sha256: sha256_hex(&bytes),
        pgm_scale: None,
    };
    if let Some(pgm_path) = pgm {
        sidecar.pgm_scale = Some(write_pgm(pgm_path, img)?);
    }
    std::fs::write(path, &bytes)?;
    std::fs::write(
        sidecar_path(path),
        serde_json::to_string_pretty(&sidecar)? + "\n",
    )?;
    Ok(())
}

pub fn read_image<S: Scalar>(path: &Path) -> Result<SliceImage<S>> {
    let buf = std::fs::read(path)?;
    let mut r = Reader::new(&buf, path);
    let img = read_image_record(&mut r)?;
    if !r.done() {
        return Err(format_err(path, "trailing bytes"));
    }
    Ok(img)
}

fn read_image_record<S: Scalar>(r: &mut Reader) -> Result<SliceImage<S>> {
    r.magic(b"SIMG")?;
    let n = r.u32()? as usize;
    let _reserved = r.u32()?;
    let b = r.f64()?;
    let a = r.f64()?;
    let half_extent = r.f64()?;
    let values: Vec<S> = r.f64_vec(n * n)?.into_iter().map(S::of).collect();
    let slice = SliceGeometry::new(S::of(b), S::of(a))?;
    SliceImage::new(slice, n, S::of(half_extent), values)
}

/// 8-bit binary PGM with linear min-max scaling; returns `(min, max)`.
pub fn write_pgm<S: Scalar>(path: &Path, img: &SliceImage<S>) -> Result<(f64, f64)> {
    let lo = img
        .values()
        .iter()
        .fold(f64::INFINITY, |m, v| m.min(v.as_f64()));
    let hi = img
        .values()
        .iter()
        .fold(f64::NEG_INFINITY, |m, v| m.max(v.as_f64()));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let n = img.n();
    let mut out = Vec::with_capacity(n * n + 32);
    out.extend_from_slice(format!("P5\n{n} {n}\n255\n").as_bytes());
    // top row of the file is the largest y coordinate
    for iy in (0..n).rev() {
        for ix in 0..n {
            let v = (img.value(ix, iy).as_f64() - lo) / span;
            out.push((v * 255.0).round().clamp(0.0, 255.0) as u8);
        }
    }
    std::fs::write(path, out)?;
    Ok((lo, hi))
}

// ---------------------------------------------------------------------------
// PHDS phaseless dataset

#[derive(serde::Serialize, serde::Deserialize)]
pub struct DatasetSidecar {
    pub format: String,
    pub model: String,
    pub noise_level: f64,
    pub seed: u64,
    pub n_alpha: usize,
    pub n_s: usize,
    pub k_values: Vec<f64>,
    pub b: f64,
    pub a: f64,
    pub s_max: f64,
    pub data_sha256: String,
    /// SHA-256 of the phantom file the data was synthesized from.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phantom_sha256: Option<String>,
    /// Serialized run configuration, for exact reproduction.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

fn dataset_bytes<S: Scalar>(ds: &PhaselessDataset<S>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(b"PHDS");
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(ds.n_chords() as u32).to_le_bytes());
    out.extend_from_slice(&(ds.ladder().len() as u32).to_le_bytes());
    out.push(match ds.model() {
        ScatterModel::Series => 0u8,
        ScatterModel::Asymptotic => 1u8,
    });
    out.extend_from_slice(&[0u8; 7]);
    out.extend_from_slice(&ds.slice().b().as_f64().to_le_bytes());
    out.extend_from_slice(&ds.slice().a().as_f64().to_le_bytes());
    out.extend_from_slice(&ds.s_max().as_f64().to_le_bytes());
    out.extend_from_slice(&ds.noise_level().as_f64().to_le_bytes());
    out.extend_from_slice(&ds.seed().to_le_bytes());
    for ch in ds.chords() {
        out.extend_from_slice(&ch.alpha().as_f64().to_le_bytes());
        out.extend_from_slice(&ch.s().as_f64().to_le_bytes());
    }
    push_f64s(&mut out, ds.ladder().k_values());
    push_f64s(&mut out, ds.f_values());
    out
}

pub fn write_dataset<S: Scalar>(
    path: &Path,
    ds: &PhaselessDataset<S>,
    phantom_sha256: Option<String>,
    config: Option<serde_json::Value>,
) -> Result<()> {
    let bytes = dataset_bytes(ds);
    let sidecar = DatasetSidecar {
        format: "phds/1".into(),
        model: ds.model().tag().into(),
        noise_level: ds.noise_level().as_f64(),
        seed: ds.seed(),
        n_alpha: ds.alphas().len(),
        n_s: ds.offsets().len(),
        k_values: ds.ladder().k_values().iter().map(|k| k.as_f64()).collect(),
        b: ds.slice().b().as_f64(),
        a: ds.slice().a().as_f64(),
        s_max: ds.s_max().as_f64(),
        data_sha256: sha256_hex(&bytes),
        phantom_sha256,
        config,
    };
    std::fs::write(path, &bytes)?;
    std::fs::write(
        sidecar_path(path),
        serde_json::to_string_pretty(&sidecar)? + "\n",
    )?;
    Ok(())
}

pub fn read_dataset<S: Scalar>(path: &Path) -> Result<PhaselessDataset<S>> {
    let buf = std::fs::read(path)?;
    let mut r = Reader::new(&buf, path);
    r.magic(b"PHDS")?;
    let n_chords = r.u32()? as usize;
    let n_k = r.u32()? as usize;
    let model_tag = r.take(8)?[0];
    let model = match model_tag {
        0 => ScatterModel::Series,
        1 => ScatterModel::Asymptotic,
        other => return Err(format_err(path, format!("unknown model byte {other}"))),
    };
    let b = r.f64()?;
    let a = r.f64()?;
    let s_max = r.f64()?;
    let noise = r.f64()?;
    let seed = r.u64()?;
    let chord_table = r.f64_vec(2 * n_chords)?;
    let k_values: Vec<S> = r.f64_vec(n_k)?.into_iter().map(S::of).collect();
    let f_values: Vec<S> = r.f64_vec(n_chords * n_k)?.into_iter().map(S::of).collect();
    if !r.done() {
        return Err(format_err(path, "trailing bytes"));
    }

    // recover the (alpha, s) product structure: offsets repeat per angle
    let n_s = {
        let a0 = chord_table[0];
        let mut n_s = n_chords;
        for c in 1..n_chords {
            if chord_table[2 * c] != a0 {
                n_s = c;
                break;
            }
        }
        n_s
    };
    if n_s == 0 || !n_chords.is_multiple_of(n_s) {
        return Err(format_err(path, "chord table is not an (alpha, s) grid"));
    }
    let n_alpha = n_chords / n_s;
    let alphas: Vec<S> = (0..n_alpha)
        .map(|i| S::of(chord_table[2 * i * n_s]))
        .collect();
    let offsets: Vec<S> = (0..n_s).map(|j| S::of(chord_table[2 * j + 1])).collect();
    for (i, &alpha) in alphas.iter().enumerate() {
        for (j, &s) in offsets.iter().enumerate() {
            let c = i * n_s + j;
            if S::of(chord_table[2 * c]) != alpha || S::of(chord_table[2 * c + 1]) != s {
                return Err(format_err(path, "chord table is not an (alpha, s) grid"));
            }
        }
    }

    let slice = SliceGeometry::new(S::of(b), S::of(a))?;
    let ladder = FrequencyLadder::new(k_values)?;
    PhaselessDataset::from_parts(
        slice,
        alphas,
        offsets,
        S::of(s_max),
        ladder,
        f_values,
        model,
        S::of(noise),
        seed,
    )
}

pub fn read_dataset_sidecar(path: &Path) -> Result<DatasetSidecar> {
    let sidecar = sidecar_path(path);
    let text = std::fs::read_to_string(&sidecar)?;
    let parsed: DatasetSidecar = serde_json::from_str(&text)
        .map_err(|e| format_err(&sidecar, format!("bad sidecar JSON: {e}")))?;
    if parsed.format != "phds/1" {
        return Err(format_err(
            &sidecar,
            format!("unsupported sidecar format {:?}", parsed.format),
        ));
    }
    Ok(parsed)
}

// ---------------------------------------------------------------------------
// volume file: concatenated SIMG records + manifest

#[derive(serde::Serialize, serde::Deserialize)]
pub struct VolumeManifest {
    pub format: String,
    pub b: f64,
    pub heights: Vec<f64>,
    pub n_image: usize,
    pub data_sha256: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phantom_sha256: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset_sha256: Option<Vec<String>>,
}

pub fn write_volume<S: Scalar>(
    path: &Path,
    vol: &Volume<S>,
    phantom_sha256: Option<String>,
    dataset_sha256: Option<Vec<String>>,
) -> Result<()> {
    let mut bytes = Vec::new();
    for (_, img) in vol.slices() {
        bytes.extend_from_slice(&image_bytes(img));
    }
    let manifest = VolumeManifest {
        format: "volume/1".into(),
        b: vol.b().as_f64(),
        heights: vol.slices().iter().map(|(a, _)| a.as_f64()).collect(),
        n_image: vol.slices()[0].1.n(),
        data_sha256: sha256_hex(&bytes),
        phantom_sha256,
        dataset_sha256,
    };
    std::fs::write(path, &bytes)?;
    std::fs::write(
        sidecar_path(path),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    Ok(())
}

pub fn read_volume<S: Scalar>(path: &Path) -> Result<Volume<S>> {
    let buf = std::fs::read(path)?;
    let mut r = Reader::new(&buf, path);
    let mut slices = Vec::new();
    let mut b = S::zero();
    while !r.done() {
        let img = read_image_record::<S>(&mut r)?;
        b = img.slice().b();
        slices.push((img.slice().a(), img));
    }
    Volume::new(b, slices)
}
