use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::metrics::Metrics;
use super::sim::{ExperimentResult, SimLog, SimRecord};

pub const CSV_HEADER: &str =
    "t,v,omega_t,omega_g,t_tw,t_g,beta,t_g_ref,beta_ref,p_g,p_t,p_max,omega_g_ref,mode,qp_iters,qp_status";

/// Writes one header line and one row per record. Floats use the shortest
/// representation that parses back to the same bits.
pub fn write_csv<W: Write>(log: &SimLog, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(true).from_writer(out);
    if log.records.is_empty() {
        w.write_record(CSV_HEADER.split(','))?;
    }
    for r in &log.records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<SimLog> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers()?.iter().collect::<Vec<_>>().join(",");
    if header != CSV_HEADER {
        return Err(Error::Io(format!("unexpected CSV header '{header}'")));
    }
    let records = rdr.deserialize::<SimRecord>().collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(SimLog { records, ..SimLog::default() })
}

pub fn write_csv_file(log: &SimLog, path: &Path) -> Result<()> {
    write_csv(log, std::io::BufWriter::new(fs::File::create(path)?))
}

pub fn read_csv_file(path: &Path) -> Result<SimLog> {
    read_csv(std::io::BufReader::new(fs::File::open(path)?))
}

/// `key,value` lines for every metric.
pub fn metrics_table(m: &Metrics) -> String {
    let rows: [(&str, String); 14] = [
        ("samples", m.samples.to_string()),
        ("rms_power_error", m.rms_power_error.to_string()),
        ("rms_speed_error", m.rms_speed_error.to_string()),
        ("constraint_violations", m.constraint_violations.to_string()),
        ("input_violations", m.input_violations.to_string()),
        ("output_violations", m.output_violations.to_string()),
        ("mean_qp_time", m.mean_qp_time.to_string()),
        ("max_qp_time", m.max_qp_time.to_string()),
        ("mean_step_time", m.mean_step_time.to_string()),
        ("max_step_time", m.max_step_time.to_string()),
        ("energy", m.energy.to_string()),
        ("torque_variation", m.torque_variation.to_string()),
        ("fallback_steps", m.fallback_steps.to_string()),
        ("held_steps", m.held_steps.to_string()),
    ];
    let mut s = String::from("metric,value\n");
    for (k, v) in rows {
        let _ = writeln!(s, "{k},{v}");
    }
    s
}

/// A named polyline for [`line_plot`].
#[derive(Debug, Clone)]
pub struct Series<'a> {
    pub label: &'a str,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e"];
const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 60.0;
const MAX_POINTS: usize = 2000;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 * lo.abs().max(1.0) {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

/// Self-contained SVG line chart with axes, tick labels and a legend.
pub fn line_plot(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (x0, x1) = extent(series.iter().flat_map(|s| s.x.iter().copied()));
    let (y0, y1) = extent(series.iter().flat_map(|s| s.y.iter().copied()));
    let pw = WIDTH - 2.0 * MARGIN;
    let ph = HEIGHT - 2.0 * MARGIN;
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, WIDTH / 2.0, escape(title));
    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, sx(xv), HEIGHT - MARGIN + 16.0, tick(xv));
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, MARGIN - 6.0, sy(yv) + 4.0, tick(yv));
        let _ = writeln!(svg, r##"<line x1="{MARGIN}" x2="{:.1}" y1="{:.1}" y2="{:.1}" stroke="#ddd"/>"##, WIDTH - MARGIN, sy(yv), sy(yv));
    }
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, WIDTH / 2.0, HEIGHT - 14.0, escape(x_label));
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
        HEIGHT / 2.0,
        escape(y_label)
    );
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let stride = s.x.len().div_ceil(MAX_POINTS).max(1);
        let mut points = String::new();
        for (x, y) in s.x.iter().zip(&s.y).step_by(stride) {
            if x.is_finite() && y.is_finite() {
                let _ = write!(points, "{:.2},{:.2} ", sx(*x), sy(*y));
            }
        }
        let _ = writeln!(
            svg,
            r#"<polyline class="series" data-label="{}" fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#,
            escape(s.label),
            points.trim_end()
        );
        let ly = MARGIN + 14.0 + 16.0 * i as f64;
        let _ = writeln!(svg, r#"<line x1="{0}" x2="{1}" y1="{ly}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, WIDTH - MARGIN - 130.0, WIDTH - MARGIN - 110.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{}">{}</text>"#, WIDTH - MARGIN - 104.0, ly + 4.0, escape(s.label));
    }
    svg.push_str("</svg>\n");
    svg
}

fn tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-2..1e5).contains(&a) {
        format!("{v:.2e}")
    } else {
        format!("{v:.2}")
    }
}

fn column(log: &SimLog, f: impl Fn(&SimRecord) -> f64) -> Vec<f64> {
    log.records.iter().map(f).collect()
}

/// Speed, power and input plots for one run.
pub fn run_plots(label: &str, log: &SimLog) -> Vec<(String, String)> {
    let t = column(log, |r| r.t);
    let s = |name: &'static str, f: fn(&SimRecord) -> f64| Series { label: name, x: t.clone(), y: column(log, f) };
    vec![
        (
            format!("{label}_speed.svg"),
            line_plot(&format!("Generator speed ({label})"), "t [s]", "rad/s", &[s("omega_g", |r| r.omega_g), s("omega_g_ref", |r| r.omega_g_ref)]),
        ),
        (
            format!("{label}_power.svg"),
            line_plot(&format!("Captured power ({label})"), "t [s]", "W", &[s("p_t", |r| r.p_t), s("p_max", |r| r.p_max)]),
        ),
        (
            format!("{label}_torque.svg"),
            line_plot(&format!("Generator torque reference ({label})"), "t [s]", "N m", &[s("t_g_ref", |r| r.t_g_ref)]),
        ),
        (
            format!("{label}_pitch.svg"),
            line_plot(&format!("Pitch reference ({label})"), "t [s]", "deg", &[s("beta_ref", |r| r.beta_ref)]),
        ),
    ]
}

/// Power tracking error `P_max − P_t` of several runs on one chart.
pub fn error_comparison_plot(results: &[ExperimentResult]) -> String {
    let series: Vec<Series> = results
        .iter()
        .map(|r| Series {
            label: r.mode.as_str(),
            x: column(&r.log, |rec| rec.t),
            y: column(&r.log, |rec| rec.p_max - rec.p_t),
        })
        .collect();
    line_plot("Power tracking error", "t [s]", "P_max - P_t [W]", &series)
}

/// Writes `<mode>.csv`, `<mode>_metrics.csv` and, with `plots`, the SVG charts.
/// Several results also produce `error_comparison.svg`. Returns the paths written.
pub fn emit(results: &[ExperimentResult], dir: &Path, plots: bool) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: String, body: &str| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, body)?;
        written.push(path);
        Ok(())
    };
    for r in results {
        let mut buf = Vec::new();
        write_csv(&r.log, &mut buf)?;
        put(format!("{}.csv", r.mode), std::str::from_utf8(&buf).map_err(|e| Error::Io(e.to_string()))?)?;
        put(format!("{}_metrics.csv", r.mode), &metrics_table(&r.metrics))?;
        if plots {
            for (name, svg) in run_plots(r.mode.as_str(), &r.log) {
                put(name, &svg)?;
            }
        }
    }
    if plots && results.len() > 1 {
        put("error_comparison.svg".into(), &error_comparison_plot(results))?;
    }
    Ok(written)
}
