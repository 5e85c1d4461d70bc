//! Numerical study of the high-frequency consistency of the series model:
//! prints e(k) = |8 pi rho k |u_sc| - Rq| / Rq for several trace settings.
//!
//! Run: cargo run --release -p phaseless-core --example asymptotic_study

use phaseless_core::geometry::{chord, SliceGeometry};
use phaseless_core::phantom::{BumpTerm, Potential};
use phaseless_core::scatter::{phaseless, usc_series};
use phaseless_core::timedomain::{auto_horizon, kernel_trace, QuadratureSpec, TraceSpec};
use phaseless_core::vec3::Vec3;

fn main() {
    let q = Potential::new(
        1.0,
        vec![BumpTerm {
            center: Vec3::new(0.2, 0.0, 0.0),
            radius: 0.5,
            amplitude: 1.0,
        }],
    )
    .unwrap();
    let g = SliceGeometry::new(1.0, 0.0).unwrap();
    let c = chord(&g, std::f64::consts::TAU, 0.1).unwrap();
    let rq = q.line_integral(&c, 64).unwrap();
    let rho = c.length();
    println!("chord: alpha=2pi s=0.1 rho={rho:.6} Rq={rq:.8}");

    let ks = [20.0, 40.0, 80.0, 160.0];
    let cases: &[(&str, usize, usize, usize, usize, usize, usize)] = &[
        // label, n_t, max_terms, n_z, n_phi, n_tau, w2_stride
        ("nt300 N2 q20", 300, 2, 20, 20, 10, 4),
        ("nt600 N2 q20", 600, 2, 20, 20, 10, 4),
        ("nt1200 N2 q20", 1200, 2, 20, 20, 10, 4),
        ("nt600 N2 q32", 600, 2, 32, 32, 16, 4),
        ("nt600 N3 q20", 600, 3, 20, 20, 10, 4),
        ("nt600 N4 q20", 600, 4, 20, 20, 10, 4),
        ("nt1200 N3 q32 s2", 1200, 3, 32, 32, 16, 2),
        ("nt2400 N3 q32 s2", 2400, 3, 32, 32, 16, 2),
    ];
    for &(label, n_t, max_terms, n_z, n_phi, n_tau, w2_stride) in cases {
        let spec = QuadratureSpec { n_z, n_phi, n_tau };
        let trace_spec = TraceSpec {
            n_t,
            max_terms,
            w2_stride,
            ..TraceSpec::default()
        };
        let horizon = auto_horizon(&q, c.x(), c.x0(), max_terms);
        let t0 = std::time::Instant::now();
        let trace = kernel_trace(&q, c.x(), c.x0(), horizon, &trace_spec, &spec).unwrap();
        let dt = t0.elapsed().as_secs_f64();
        let errs: Vec<f64> = ks
            .iter()
            .map(|&k| {
                let f = phaseless(usc_series(c.x(), c.x0(), k, &trace).unwrap());
                (8.0 * std::f64::consts::PI * rho * k * f - rq).abs() / rq
            })
            .collect();
        // least-squares slope of log e vs log k
        let lx: Vec<f64> = ks.iter().map(|k| k.ln()).collect();
        let ly: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
        let n = lx.len() as f64;
        let sx: f64 = lx.iter().sum();
        let sy: f64 = ly.iter().sum();
        let sxx: f64 = lx.iter().map(|x| x * x).sum();
        let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| x * y).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        println!(
            "{label:<20} horizon={horizon:.3} trace_time={dt:6.2}s e={:?} slope={slope:+.3}",
            errs.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>()
        );
    }
}
