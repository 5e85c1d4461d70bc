//! Pipeline front end: phantom authoring, phaseless data synthesis,
//! slice-wise reconstruction, metric evaluation, and simple plot emission.
//!
//! Runs are driven by a single JSON config; individual fields can be
//! overridden on the command line with dotted paths, e.g.
//! `--fbp.n_image=256`. Exit codes: 0 success, 2 validation error,
//! 3 I/O error, 4 budget exceeded.

mod config;
mod plot;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use phaseless_core::error::Error as CoreError;
use phaseless_core::geometry::SliceGeometry;
use phaseless_core::io;
use phaseless_core::phantom::{BumpTerm, Potential};
use phaseless_core::recon::{self, Metrics};
use phaseless_core::scatter::synthesize_dataset;
use phaseless_core::vec3::Vec3;

use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "phaseless",
    about = "Phaseless inverse-scattering pipeline",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a phantom description file.
    Phantom(PhantomArgs),
    /// Synthesize phaseless datasets, one per configured slice.
    Synthesize(ConfigArgs),
    /// Reconstruct a volume from previously synthesized datasets.
    Reconstruct(ReconstructArgs),
    /// Compare a volume against a phantom and emit a metrics table.
    Evaluate(EvaluateArgs),
    /// Render a CSV series as an SVG line plot.
    Plot(PlotArgs),
}

#[derive(Args)]
struct PhantomArgs {
    /// Preset: "standard" (one off-center bump) or "two-bumps".
    #[arg(long, default_value = "standard")]
    preset: String,
    /// Support ball radius B.
    #[arg(long, default_value_t = 1.0)]
    b: f64,
    /// Extra bump as "cx,cy,cz,radius,amplitude"; repeatable. Overrides the
    /// preset when given.
    #[arg(long = "bump")]
    bumps: Vec<String>,
    /// Output path.
    #[arg(long, default_value = "phantom.json")]
    out: PathBuf,
}

#[derive(Args)]
struct ConfigArgs {
    /// Run configuration JSON.
    #[arg(long)]
    config: PathBuf,
    /// Dotted-path override, e.g. "fbp.n_image=256"; repeatable. Bare
    /// "--section.field=value" flags are accepted as shorthand.
    #[arg(long = "set")]
    set: Vec<String>,
}

#[derive(Args)]
struct ReconstructArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Accept datasets whose provenance does not match the config.
    #[arg(long)]
    force: bool,
    /// Clamp negative limit estimates to zero before back-projection.
    #[arg(long)]
    clamp: bool,
    /// Also export each slice as an 8-bit PGM preview.
    #[arg(long)]
    pgm: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Volume file written by `reconstruct`.
    #[arg(long)]
    volume: PathBuf,
    /// Phantom the volume should reproduce.
    #[arg(long)]
    phantom: PathBuf,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    csv: PathBuf,
    /// Column for the x axis.
    #[arg(long)]
    x: String,
    /// Column for the y axis; repeatable for several series.
    #[arg(long)]
    y: Vec<String>,
    /// Use log scales on both axes.
    #[arg(long)]
    log: bool,
    /// Output SVG path.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let argv = rewrite_dotted_flags(std::env::args().collect());
    let cli = Cli::parse_from(argv);
    init_threads();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

/// `--section.field=value` is shorthand for `--set section.field=value`.
fn rewrite_dotted_flags(argv: Vec<String>) -> Vec<String> {
    let mut out = Vec::with_capacity(argv.len());
    for arg in argv {
        let is_dotted = arg.starts_with("--")
            && arg.contains('=')
            && arg[2..arg.find('=').unwrap()].contains('.');
        if is_dotted {
            out.push("--set".into());
            out.push(arg[2..].to_string());
        } else {
            out.push(arg);
        }
    }
    out
}

fn init_threads() {
    if let Ok(v) = std::env::var("PHASELESS_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<CoreError>() {
        Some(CoreError::Budget(_)) => 4,
        Some(CoreError::Io(_)) | Some(CoreError::Json(_)) | Some(CoreError::Format { .. }) => 3,
        Some(_) => 2,
        None => {
            if err.downcast_ref::<std::io::Error>().is_some() {
                3
            } else {
                2
            }
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Phantom(args) => cmd_phantom(args),
        Command::Synthesize(args) => cmd_synthesize(&RunConfig::load(&args.config, &args.set)?),
        Command::Reconstruct(args) => {
            let cfg = RunConfig::load(&args.config.config, &args.config.set)?;
            cmd_reconstruct(&cfg, args.force, args.clamp, args.pgm)
        }
        Command::Evaluate(args) => cmd_evaluate(&args),
        Command::Plot(args) => plot::cmd_plot(&args.csv, &args.x, &args.y, args.log, &args.out),
    }
}

fn cmd_phantom(args: PhantomArgs) -> anyhow::Result<()> {
    let terms = if !args.bumps.is_empty() {
        args.bumps
            .iter()
            .map(|spec| parse_bump(spec))
            .collect::<anyhow::Result<Vec<_>>>()?
    } else {
        match args.preset.as_str() {
            "standard" => vec![BumpTerm {
                center: Vec3::new(0.2, 0.0, 0.0),
                radius: 0.5,
                amplitude: 1.0,
            }],
            "two-bumps" => vec![
                BumpTerm {
                    center: Vec3::new(0.25, 0.15, 0.0),
                    radius: 0.35,
                    amplitude: 1.0,
                },
                BumpTerm {
                    center: Vec3::new(-0.35, -0.2, 0.1),
                    radius: 0.3,
                    amplitude: 0.6,
                },
            ],
            other => anyhow::bail!(CoreError::validation(format!("unknown preset {other:?}"))),
        }
    };
    let q = Potential::new(args.b, terms)?;
    io::write_phantom(&args.out, &q)?;
    println!("wrote {}", args.out.display());
    Ok(())
}

fn parse_bump(spec: &str) -> anyhow::Result<BumpTerm<f64>> {
    let parts: Vec<f64> = spec
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CoreError::validation(format!("bad bump spec {spec:?}")))?;
    if parts.len() != 5 {
        anyhow::bail!(CoreError::validation(
            "bump spec must be cx,cy,cz,radius,amplitude"
        ));
    }
    Ok(BumpTerm {
        center: Vec3::new(parts[0], parts[1], parts[2]),
        radius: parts[3],
        amplitude: parts[4],
    })
}

fn dataset_path(out_dir: &Path, slice_idx: usize) -> PathBuf {
    out_dir.join(format!("slice_{slice_idx:03}.phds"))
}

fn cmd_synthesize(cfg: &RunConfig) -> anyhow::Result<()> {
    cfg.validate()?;
    let q: Potential<f64> = io::read_phantom(&cfg.phantom)?;
    let phantom_hash = io::sha256_file(&cfg.phantom)?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let ladder = cfg.ladder()?;
    let spec = cfg.synthesis_spec();
    let config_json = serde_json::to_value(cfg)?;
    for (idx, &a) in cfg.slices.iter().enumerate() {
        let slice = SliceGeometry::new(cfg.b(), a)?;
        let ds = synthesize_dataset(&q, &slice, &ladder, &spec)?;
        let path = dataset_path(&cfg.out_dir, idx);
        io::write_dataset(
            &path,
            &ds,
            Some(phantom_hash.clone()),
            Some(config_json.clone()),
        )?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_reconstruct(cfg: &RunConfig, force: bool, clamp: bool, pgm: bool) -> anyhow::Result<()> {
    cfg.validate()?;
    let q: Potential<f64> = io::read_phantom(&cfg.phantom)?;
    let phantom_hash = io::sha256_file(&cfg.phantom)?;
    let mut datasets = Vec::new();
    let mut dataset_hashes = Vec::new();
    for idx in 0..cfg.slices.len() {
        let path = dataset_path(&cfg.out_dir, idx);
        let sidecar = io::read_dataset_sidecar(&path)?;
        if !force {
            if sidecar.phantom_sha256.as_deref() != Some(phantom_hash.as_str()) {
                anyhow::bail!(CoreError::Provenance {
                    path: path.clone(),
                    msg: "dataset was synthesized from a different phantom (rerun synthesize \
                          or pass --force)"
                        .into(),
                });
            }
            let expect = io::sha256_file(&path)?;
            if sidecar.data_sha256 != expect {
                anyhow::bail!(CoreError::Provenance {
                    path: path.clone(),
                    msg: "dataset bytes do not match the sidecar hash".into(),
                });
            }
        }
        dataset_hashes.push(io::sha256_file(&path)?);
        let ds = io::read_dataset::<f64>(&path)?;
        let want_a = cfg.slices[idx];
        if (ds.slice().a() - want_a).abs() > 1e-12 || (ds.slice().b() - cfg.b()).abs() > 1e-12 {
            anyhow::bail!(CoreError::validation(format!(
                "dataset {} geometry does not match the config (slice {want_a})",
                path.display()
            )));
        }
        datasets.push(ds);
    }
    let volume = recon::reconstruct_volume(&datasets, cfg.fbp.n_image, cfg.fbp.filter, clamp)?;
    let vol_path = cfg.out_dir.join("volume.bin");
    io::write_volume(
        &vol_path,
        &volume,
        Some(phantom_hash),
        Some(dataset_hashes),
    )?;
    println!("wrote {}", vol_path.display());
    if pgm {
        for (i, (_, img)) in volume.slices().iter().enumerate() {
            let pgm_path = cfg.out_dir.join(format!("slice_{i:03}.pgm"));
            io::write_pgm(&pgm_path, img)?;
            println!("wrote {}", pgm_path.display());
        }
    }
    let metrics = recon::metrics_volume(&volume, &q);
    let per_slice: Vec<SliceMetrics> = volume
        .slices()
        .iter()
        .map(|(a, img)| SliceMetrics {
            a: *a,
            metrics: recon::metrics_slice(img, &q),
        })
        .collect();
    let report = MetricsReport {
        volume: metrics,
        slices: per_slice,
    };
    let metrics_path = cfg.out_dir.join("metrics.json");
    std::fs::write(&metrics_path, serde_json::to_string_pretty(&report)? + "\n")?;
    println!("wrote {}", metrics_path.display());
    println!("rel_l2 = {:.6}", report.volume.rel_l2);
    Ok(())
}

#[derive(serde::Serialize, serde::Deserialize)]
struct SliceMetrics {
    a: f64,
    #[serde(flatten)]
    metrics: Metrics,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct MetricsReport {
    volume: Metrics,
    slices: Vec<SliceMetrics>,
}

fn cmd_evaluate(args: &EvaluateArgs) -> anyhow::Result<()> {
    let q: Potential<f64> = io::read_phantom(&args.phantom)?;
    let volume = io::read_volume::<f64>(&args.volume)?;
    let mut csv = String::from("a,rel_l2,rel_linf,max_abs\n");
    for (a, img) in volume.slices() {
        let m = recon::metrics_slice(img, &q);
        csv.push_str(&format!("{a},{},{},{}\n", m.rel_l2, m.rel_linf, m.max_abs));
    }
    match &args.out {
        Some(path) => {
            std::fs::write(path, &csv)?;
            println!("wrote {}", path.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}
