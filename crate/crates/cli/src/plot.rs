use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use clap::Args;

use crate::failure::Failure;
use crate::manifest::{create_dir, RunManifest};
use crate::table::Columns;
use crate::Common;

#[derive(Args, Debug)]
pub struct PlotArgs {
    /// Headed CSV files whose first column is `time_s`.
    #[arg(long = "input", required = true)]
    pub inputs: Vec<PathBuf>,
    /// Columns to draw, comma separated; default is every non-time column.
    #[arg(long, value_delimiter = ',')]
    pub columns: Vec<String>,
    #[arg(long, default_value = "plot.svg")]
    pub name: String,
    #[arg(long, default_value = "")]
    pub title: String,
}

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];
const MAX_POINTS: usize = 2000;

pub struct Series {
    pub label: String,
    pub time: Vec<f64>,
    pub values: Vec<f64>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Overlaid polylines with axes and a legend.
pub fn render_svg(series: &[Series], title: &str) -> String {
    let all_t = series.iter().flat_map(|s| s.time.iter().copied());
    let (t0, t1) = all_t.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), t| (a.min(t), b.max(t)));
    let all_v = series.iter().flat_map(|s| s.values.iter().copied());
    let (mut v0, mut v1) = all_v.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if v1 - v0 < 1e-12 {
        v0 -= 1.0;
        v1 += 1.0;
    }
    let span_t = if t1 > t0 { t1 - t0 } else { 1.0 };
    let x = |t: f64| MARGIN + (t - t0) / span_t * (WIDTH - 2.0 * MARGIN);
    let y = |v: f64| HEIGHT - MARGIN - (v - v0) / (v1 - v0) * (HEIGHT - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    if !title.is_empty() {
        let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title));
    }
    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        s,
        r#"<path d="M{left} {top} L{left} {bottom} L{right} {bottom}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(s, r#"<text x="{left}" y="{}" font-size="11">{t0:.2}</text>"#, bottom + 15.0);
    let _ = writeln!(s, r#"<text x="{right}" y="{}" font-size="11" text-anchor="end">{t1:.2}</text>"#, bottom + 15.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="11" text-anchor="middle">time (s)</text>"#, WIDTH / 2.0, bottom + 30.0);
    let _ = writeln!(s, r#"<text x="{}" y="{bottom}" font-size="11" text-anchor="end">{v0:.2}</text>"#, left - 4.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{v1:.2}</text>"#, left - 4.0, top + 4.0);

    for (i, ser) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let stride = ser.values.len().div_ceil(MAX_POINTS).max(1);
        let mut pts = String::new();
        for k in (0..ser.values.len()).step_by(stride) {
            let _ = write!(pts, "{:.2},{:.2} ", x(ser.time[k]), y(ser.values[k]));
        }
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.2"/>"#,
            pts.trim_end()
        );
        let ly = top + 14.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            right - 140.0,
            right - 120.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="11">{}</text>"#,
            right - 115.0,
            ly + 4.0,
            escape(&ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn run(common: &Common, args: &PlotArgs) -> Result<(), Failure> {
    let tables = args.inputs.iter().map(|p| Columns::read(p)).collect::<Result<Vec<_>, _>>()?;
    for (t, p) in tables.iter().zip(&args.inputs) {
        if t.header.first().map(String::as_str) != Some("time_s") {
            return Err(Failure::invalid(format!("{}: first column must be time_s", p.display())));
        }
    }
    let multi = tables.len() > 1;
    let label = |i: usize, col: &str| {
        if multi {
            let stem = args.inputs[i].file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            format!("{stem}:{col}")
        } else {
            col.to_string()
        }
    };
    let mut series = Vec::new();
    if args.columns.is_empty() {
        for (i, t) in tables.iter().enumerate() {
            for col in &t.header[1..] {
                series.push(Series {
                    label: label(i, col),
                    time: t.column("time_s").unwrap(),
                    values: t.column(col).unwrap(),
                });
            }
        }
    } else {
        for col in &args.columns {
            let mut found = false;
            for (i, t) in tables.iter().enumerate() {
                if let Some(values) = t.column(col) {
                    series.push(Series {
                        label: label(i, col),
                        time: t.column("time_s").unwrap(),
                        values,
                    });
                    found = true;
                }
            }
            if !found {
                return Err(Failure::invalid(format!("column `{col}` not found in any input")));
            }
        }
    }
    if series.is_empty() {
        return Err(Failure::invalid("nothing to plot"));
    }
    let mut manifest = RunManifest::new("plot", &serde_json::json!({ "columns": args.columns, "title": args.title }), vec![]);
    for p in &args.inputs {
        manifest.input(p);
    }
    create_dir(&common.out)?;
    let path = common.out.join(&args.name);
    fs::write(&path, render_svg(&series, &args.title)).map_err(|e| Failure::io(&path, e))?;
    manifest.output(&path);
    manifest.stage("render");
    manifest.write(&common.out)
}
