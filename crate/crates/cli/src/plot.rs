//! Minimal SVG line plots from CSV series — enough for error-vs-frequency
//! and error-vs-resolution figures, nothing interactive.

use std::path::Path;

use phaseless_core::error::Error as CoreError;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;
const COLORS: &[&str] = &["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

pub fn cmd_plot(
    csv: &Path,
    x_col: &str,
    y_cols: &[String],
    log: bool,
    out: &Path,
) -> anyhow::Result<()> {
    if y_cols.is_empty() {
        anyhow::bail!(CoreError::validation("plot: at least one --y column required"));
    }
    let text = std::fs::read_to_string(csv)?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| CoreError::validation("plot: empty CSV"))?
        .split(',')
        .map(str::trim)
        .collect();
    let col = |name: &str| -> anyhow::Result<usize> {
        header.iter().position(|h| *h == name).ok_or_else(|| {
            CoreError::validation(format!("plot: no column {name:?} in {header:?}")).into()
        })
    };
    let xi = col(x_col)?;
    let yis = y_cols.iter().map(|c| col(c)).collect::<anyhow::Result<Vec<_>>>()?;

    let mut xs: Vec<f64> = Vec::new();
    let mut series: Vec<Vec<f64>> = vec![Vec::new(); yis.len()];
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parse = |i: usize| -> anyhow::Result<f64> {
            fields
                .get(i)
                .and_then(|f| f.parse::<f64>().ok())
                .ok_or_else(|| CoreError::validation(format!("plot: bad row {line:?}")).into())
        };
        xs.push(parse(xi)?);
        for (s, &yi) in series.iter_mut().zip(&yis) {
            s.push(parse(yi)?);
        }
    }
    if xs.len() < 2 {
        anyhow::bail!(CoreError::validation("plot: need at least two rows"));
    }
    let transform = |v: f64| -> anyhow::Result<f64> {
        if log {
            if v <= 0.0 {
                anyhow::bail!(CoreError::validation("plot: log scale needs positive values"));
            }
            Ok(v.ln())
        } else {
            Ok(v)
        }
    };
    let txs = xs.iter().map(|&v| transform(v)).collect::<anyhow::Result<Vec<_>>>()?;
    let tseries = series
        .iter()
        .map(|s| s.iter().map(|&v| transform(v)).collect::<anyhow::Result<Vec<_>>>())
        .collect::<anyhow::Result<Vec<_>>>()?;

    let (x_lo, x_hi) = bounds(&txs);
    let (y_lo, y_hi) = bounds(&tseries.iter().flatten().copied().collect::<Vec<_>>());
    let sx = |v: f64| MARGIN + (v - x_lo) / (x_hi - x_lo).max(1e-300) * (WIDTH - 2.0 * MARGIN);
    let sy = |v: f64| {
        HEIGHT - MARGIN - (v - y_lo) / (y_hi - y_lo).max(1e-300) * (HEIGHT - 2.0 * MARGIN)
    };

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    ));
    // axes
    svg.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n",
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN,
        t = MARGIN
    ));
    let label = |v: f64| {
        let raw = if log { v.exp() } else { v };
        format!("{raw:.3e}")
    };
    svg.push_str(&format!(
        "<text x=\"{m}\" y=\"{y}\" font-size=\"12\">{}</text>\n\
         <text x=\"{r}\" y=\"{y}\" font-size=\"12\" text-anchor=\"end\">{}</text>\n",
        label(x_lo),
        label(x_hi),
        m = MARGIN,
        r = WIDTH - MARGIN,
        y = HEIGHT - MARGIN + 20.0
    ));
    svg.push_str(&format!(
        "<text x=\"{x}\" y=\"{b}\" font-size=\"12\" text-anchor=\"end\">{}</text>\n\
         <text x=\"{x}\" y=\"{t}\" font-size=\"12\" text-anchor=\"end\">{}</text>\n",
        label(y_lo),
        label(y_hi),
        x = MARGIN - 6.0,
        b = HEIGHT - MARGIN,
        t = MARGIN + 10.0
    ));
    svg.push_str(&format!(
        "<text x=\"{x}\" y=\"{y}\" font-size=\"13\" text-anchor=\"middle\">{x_col}</text>\n",
        x = WIDTH / 2.0,
        y = HEIGHT - 12.0
    ));
    for (s_idx, ts) in tseries.iter().enumerate() {
        let color = COLORS[s_idx % COLORS.len()];
        let pts: Vec<String> = txs
            .iter()
            .zip(ts)
            .map(|(&x, &y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            pts.join(" ")
        ));
        for p in &pts {
            let (px, py) = p.split_once(',').unwrap();
            svg.push_str(&format!(
                "<circle cx=\"{px}\" cy=\"{py}\" r=\"2.5\" fill=\"{color}\"/>\n"
            ));
        }
        svg.push_str(&format!(
            "<text x=\"{x}\" y=\"{y}\" font-size=\"12\" fill=\"{color}\">{}</text>\n",
            y_cols[s_idx],
            x = WIDTH - MARGIN + 4.0,
            y = MARGIN + 16.0 * s_idx as f64
        ));
    }
    svg.push_str("</svg>\n");
    std::fs::write(out, svg)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn bounds(values: &[f64]) -> (f64, f64) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}
