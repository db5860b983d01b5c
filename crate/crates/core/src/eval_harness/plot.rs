//! Static SVG figures: class-conditional logit densities with the default
//! threshold and every fitted offset drawn as vertical lines.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::report::{write_file, EvalReport};
use crate::error::{Error, Result};
use crate::kde::{estimate_density, DensityEstimate, KdeConfig};
use crate::logit_data::{split_by_label, LogitDataset};

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 560.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 350.0;
const PALETTE: [&str; 6] = [
    "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SourceDensities {
    pub real: Option<DensityEstimate>,
    pub fake: Option<DensityEstimate>,
    pub pooled: DensityEstimate,
}

/// Per-source densities of the real class, the fake class, and all logits.
pub fn source_densities(
    data: &LogitDataset,
    kde: &KdeConfig,
) -> Result<BTreeMap<String, SourceDensities>> {
    let mut out = BTreeMap::new();
    for source in data.sources() {
        let pool = data.filter_source(&source).expect("tag from dataset");
        let (real, fake) = match split_by_label(&pool) {
            Ok(split) => (
                (!split.reals.is_empty())
                    .then(|| estimate_density(&split.reals, kde))
                    .transpose()?,
                (!split.fakes.is_empty())
                    .then(|| estimate_density(&split.fakes, kde))
                    .transpose()?,
            ),
            Err(Error::NoLabels) => (None, None),
            Err(e) => return Err(e),
        };
        let pooled = estimate_density(&pool.logits(), kde)?;
        out.insert(source, SourceDensities { real, fake, pooled });
    }
    Ok(out)
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Render one source's figure. `thresholds` pairs a legend label with an offset.
pub fn render_svg(
    source: &str,
    densities: &SourceDensities,
    thresholds: &[(String, f64)],
) -> String {
    let curves: Vec<(&str, &str, &DensityEstimate)> = match (&densities.real, &densities.fake) {
        (None, None) => vec![("all logits", "#555555", &densities.pooled)],
        (real, fake) => real
            .iter()
            .map(|d| ("real", "#1f77b4", d))
            .chain(fake.iter().map(|d| ("fake", "#d62728", d)))
            .collect(),
    };

    let mut x_lo = 0.0f64;
    let mut x_hi = 0.0f64;
    let mut y_hi = 0.0f64;
    for (_, _, d) in &curves {
        x_lo = x_lo.min(d.lower());
        x_hi = x_hi.max(d.upper());
        y_hi = d.density().iter().copied().fold(y_hi, f64::max);
    }
    for (_, a) in thresholds {
        if a.is_finite() {
            x_lo = x_lo.min(*a);
            x_hi = x_hi.max(*a);
        }
    }
    if x_hi <= x_lo {
        x_hi = x_lo + 1.0;
    }
    if !(y_hi > 0.0) {
        y_hi = 1.0;
    }
    let sx = |z: f64| LEFT + (z - x_lo) / (x_hi - x_lo) * (RIGHT - LEFT);
    let sy = |p: f64| BOTTOM - p / (1.05 * y_hi) * (BOTTOM - TOP);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="22" font-size="14" text-anchor="middle">{}</text>"#,
        0.5 * (LEFT + RIGHT),
        escape(source)
    );
    let _ = writeln!(
        svg,
        r#"<path d="M{LEFT},{TOP} L{LEFT},{BOTTOM} L{RIGHT},{BOTTOM}" fill="none" stroke="black"/>"#
    );
    for k in 0..=5 {
        let z = x_lo + (x_hi - x_lo) * k as f64 / 5.0;
        let x = sx(z);
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{BOTTOM}" x2="{x:.2}" y2="{:.1}" stroke="black"/><text x="{x:.2}" y="{:.1}" text-anchor="middle">{z:.2}</text>"#,
            BOTTOM + 4.0,
            BOTTOM + 16.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">logit</text>"#,
        0.5 * (LEFT + RIGHT),
        BOTTOM + 32.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">density</text>"#,
        0.5 * (TOP + BOTTOM),
        0.5 * (TOP + BOTTOM)
    );

    let mut legend: Vec<(String, String, bool)> = Vec::new();
    for (name, color, d) in &curves {
        let mut path = String::new();
        for (j, (z, p)) in d.grid().iter().zip(d.density()).enumerate() {
            let _ = write!(
                path,
                "{}{:.2},{:.2}",
                if j == 0 { "M" } else { " L" },
                sx(*z),
                sy(*p)
            );
        }
        let _ = writeln!(
            svg,
            r#"<path d="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>"#
        );
        legend.push((name.to_string(), color.to_string(), false));
    }

    let vline = |svg: &mut String, z: f64, color: &str, dashed: bool| {
        let dash = if dashed {
            r#" stroke-dasharray="6,4""#
        } else {
            ""
        };
        let x = sx(z);
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{BOTTOM}" stroke="{color}" stroke-width="1.5"{dash}/>"#
        );
    };
    vline(&mut svg, 0.0, "black", true);
    legend.push(("original threshold (0)".into(), "black".into(), true));
    for (k, (label, alpha)) in thresholds.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        vline(&mut svg, *alpha, color, false);
        legend.push((format!("{label} ({alpha:.3})"), color.into(), false));
    }

    for (k, (label, color, dashed)) in legend.iter().enumerate() {
        let y = TOP + 8.0 + 18.0 * k as f64;
        let dash = if *dashed {
            r#" stroke-dasharray="6,4""#
        } else {
            ""
        };
        let _ = writeln!(
            svg,
            r#"<line x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{color}" stroke-width="2"{dash}/><text x="{:.1}" y="{:.1}">{}</text>"#,
            RIGHT + 15.0,
            RIGHT + 40.0,
            RIGHT + 46.0,
            y + 4.0,
            escape(label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn file_stem(source: &str) -> String {
    let cleaned: String = source
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    if cleaned.is_empty() {
        "unnamed".into()
    } else {
        cleaned
    }
}

/// Write `plot_<source>.svg` per source plus `summary.txt` and `summary.csv`.
pub fn emit_plots(
    report: &EvalReport,
    densities: &BTreeMap<String, SourceDensities>,
    thresholds: &BTreeMap<String, Vec<(String, f64)>>,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    for source in report.sources().iter().chain(thresholds.keys()) {
        if !densities.contains_key(source) {
            return Err(Error::InvalidArgument(format!(
                "no densities for source '{source}'"
            )));
        }
    }
    let mut written = Vec::new();
    for (source, dens) in densities {
        let lines = thresholds.get(source).map(Vec::as_slice).unwrap_or(&[]);
        let path = out_dir.join(format!("plot_{}.svg", file_stem(source)));
        write_file(&path, &render_svg(source, dens, lines))?;
        written.push(path);
    }
    let txt = out_dir.join("summary.txt");
    let csv = out_dir.join("summary.csv");
    write_file(&txt, &report.to_table())?;
    write_file(&csv, &report.to_csv())?;
    written.push(txt);
    written.push(csv);
    Ok(written)
}

/// Re-render figures for a persisted report: densities come from the report's
/// input, offsets are the per-method mean alphas.
pub fn render_report_plots(report: &EvalReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let data = report.config.input.load()?;
    let densities = source_densities(&data, &report.config.kde)?;
    let mut thresholds: BTreeMap<String, Vec<(String, f64)>> = BTreeMap::new();
    for agg in &report.aggregates {
        thresholds
            .entry(agg.source.clone())
            .or_default()
            .push((agg.method.name().to_string(), agg.alpha.mean));
    }
    emit_plots(report, &densities, &thresholds, out_dir)
}
