use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::csv::{parse_curves_csv, parse_trajectories_csv, parse_trials_csv, CurveRow, TrajectoryRow};
use crate::error::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 56.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Linear map from data space onto the plot area.
#[derive(Clone, Copy)]
struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        let widen = |a: f64, b: f64| if b > a { (a, b) } else { (a - 0.5, a + 0.5) };
        let (x0, x1) = widen(x0, x1);
        let (y0, y1) = widen(y0, y1);
        Frame { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn open(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn axes(out: &mut String, f: &Frame, xlabel: &str, ylabel: &str) {
    let (l, r, b, t) = (MARGIN, WIDTH - MARGIN, HEIGHT - MARGIN, MARGIN);
    let _ = writeln!(
        out,
        r#"<path d="M{l},{t} L{l},{b} L{r},{b}" fill="none" stroke="black" stroke-width="1"/>"#
    );
    for i in 0..=4 {
        let fx = f.x0 + (f.x1 - f.x0) * i as f64 / 4.0;
        let fy = f.y0 + (f.y1 - f.y0) * i as f64 / 4.0;
        let (x, y) = (f.px(fx), f.py(fy));
        let _ = writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{b}" x2="{x:.2}" y2="{}" stroke="black"/><text x="{x:.2}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="11">{}</text>"#,
            b + 4.0,
            b + 18.0,
            tick(fx)
        );
        let _ = writeln!(
            out,
            r#"<line x1="{}" y1="{y:.2}" x2="{l}" y2="{y:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end" font-family="sans-serif" font-size="11">{}</text>"#,
            l - 4.0,
            l - 6.0,
            y + 4.0,
            tick(fy)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 14.0,
        escape(xlabel)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 16 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(ylabel)
    );
}

fn tick(v: f64) -> String {
    if v.abs() >= 100.0 || v == v.round() {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
];

/// Explored ratio against path length, one polyline per curve, each ending
/// in a marker at its final ratio.
pub fn curves_svg(title: &str, curves: &[Vec<(f64, f64)>]) -> Result<String> {
    if curves.is_empty() || curves.iter().any(Vec::is_empty) {
        return Err(Error::contract("curve plot needs at least one nonempty curve"));
    }
    let xmax = curves.iter().flatten().map(|p| p.0).fold(0.0, f64::max);
    let f = Frame::new(0.0, xmax, 0.0, 1.0);
    let mut out = String::new();
    open(&mut out, title);
    axes(&mut out, &f, "path length [m]", "explored ratio");
    for (i, c) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = c.iter().map(|&(x, y)| format!("{:.2},{:.2}", f.px(x), f.py(y))).collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5" stroke-opacity="0.8"/>"#,
            pts.join(" ")
        );
        let &(x, y) = c.last().expect("nonempty");
        let _ = writeln!(
            out,
            r#"<circle class="terminal" cx="{:.2}" cy="{:.2}" r="3" fill="{color}"><title>{y:.3}</title></circle>"#,
            f.px(x),
            f.py(y)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Type-7 quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// One box per group: quartiles, whiskers at 1.5 IQR, outliers as dots.
pub fn boxplot_svg(title: &str, groups: &[(String, Vec<f64>)]) -> Result<String> {
    let groups: Vec<_> = groups.iter().filter(|(_, v)| !v.is_empty()).collect();
    if groups.is_empty() {
        return Err(Error::contract("box plot needs at least one nonempty group"));
    }
    let all = groups.iter().flat_map(|(_, v)| v.iter().copied());
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let pad = 0.05 * (hi - lo).max(1.0);
    let f = Frame::new(0.0, groups.len() as f64, (lo - pad).max(0.0), hi + pad);
    let mut out = String::new();
    open(&mut out, title);
    axes(&mut out, &f, "strategy", "path length [m]");
    let slot = (WIDTH - 2.0 * MARGIN) / groups.len() as f64;
    for (i, (name, values)) in groups.iter().enumerate() {
        let mut v = values.clone();
        v.sort_by(f64::total_cmp);
        let (q1, med, q3) = (quantile(&v, 0.25), quantile(&v, 0.5), quantile(&v, 0.75));
        let iqr = q3 - q1;
        let wlo = v.iter().copied().find(|&x| x >= q1 - 1.5 * iqr).unwrap_or(q1);
        let whi = v.iter().rev().copied().find(|&x| x <= q3 + 1.5 * iqr).unwrap_or(q3);
        let cx = MARGIN + slot * (i as f64 + 0.5);
        let half = slot * 0.25;
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(
            out,
            r#"<g class="box"><line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="black"/><rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{color}" fill-opacity="0.35" stroke="black"/><line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black" stroke-width="2"/></g>"#,
            f.py(whi),
            f.py(wlo),
            cx - half,
            f.py(q3),
            2.0 * half,
            (f.py(q1) - f.py(q3)).max(0.5),
            cx - half,
            f.py(med),
            cx + half,
            f.py(med),
        );
        for &x in v.iter().filter(|&&x| x < wlo || x > whi) {
            let _ = writeln!(out, r#"<circle cx="{cx:.2}" cy="{:.2}" r="2.5" fill="none" stroke="black"/>"#, f.py(x));
        }
        let _ = writeln!(
            out,
            r#"<text x="{cx:.2}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">{} (n={})</text>"#,
            MARGIN - 8.0,
            escape(name),
            v.len()
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// The robot's path; segment brightness grows with the decision index.
pub fn trajectory_svg(title: &str, points: &[(f64, f64, usize)]) -> Result<String> {
    if points.is_empty() {
        return Err(Error::contract("trajectory plot needs at least one point"));
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y, _) in points {
        (x0, x1, y0, y1) = (x0.min(x), x1.max(x), y0.min(y), y1.max(y));
    }
    // equal aspect: grow the narrower axis
    let (pw, ph) = (WIDTH - 2.0 * MARGIN, HEIGHT - 2.0 * MARGIN);
    let span = ((x1 - x0) / pw).max((y1 - y0) / ph).max(1e-9);
    let (cx, cy) = ((x0 + x1) / 2.0, (y0 + y1) / 2.0);
    let f = Frame::new(cx - span * pw / 2.0, cx + span * pw / 2.0, cy - span * ph / 2.0, cy + span * ph / 2.0);
    let last = points.iter().map(|p| p.2).max().unwrap_or(0).max(1) as f64;
    let mut out = String::new();
    open(&mut out, title);
    axes(&mut out, &f, "x [m]", "y [m]");
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        let t = b.2 as f64 / last;
        let green = (90.0 + 165.0 * t).round() as u8;
        let _ = writeln!(
            out,
            r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#00{green:02x}00" stroke-width="2"/>"##,
            f.px(a.0),
            f.py(a.1),
            f.px(b.0),
            f.py(b.1)
        );
    }
    let (sx, sy, _) = points[0];
    let _ = writeln!(
        out,
        r#"<circle class="start" cx="{:.2}" cy="{:.2}" r="4" fill="black"/>"#,
        f.px(sx),
        f.py(sy)
    );
    out.push_str("</svg>\n");
    Ok(out)
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn with_file<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Parse { row, message } => Error::Parse {
            row,
            message: format!("{}: {message}", path.display()),
        },
        e => e,
    })
}

/// CSV files in `dir` named `<prefix>_<strategy>.csv`, sorted by strategy.
fn inputs(dir: &Path, prefix: &str) -> Result<Vec<(String, PathBuf)>> {
    let mut found = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        if let Some(strategy) = name.strip_prefix(prefix).and_then(|n| n.strip_suffix(".csv")) {
            found.push((strategy.to_owned(), path.clone()));
        }
    }
    found.sort();
    Ok(found)
}

/// Renders every run found in `in_dir`: `boxplot.svg` over all strategies,
/// plus `curves_<strategy>.svg` and `trajectory_<strategy>.svg` for each.
pub fn emit_plots(in_dir: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let trials = inputs(in_dir, "trials_")?;
    let curves = inputs(in_dir, "curves_")?;
    let trajectories = inputs(in_dir, "trajectories_")?;
    if trials.is_empty() && curves.is_empty() && trajectories.is_empty() {
        return Err(Error::Config(format!("no run CSV files in {}", in_dir.display())));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    let mut save = |name: String, svg: String| -> Result<()> {
        let path = out_dir.join(name);
        std::fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
        written.push(path);
        Ok(())
    };

    let mut groups = Vec::new();
    for (strategy, path) in &trials {
        let rows = with_file(path, parse_trials_csv(&read(path)?))?;
        let lengths = rows.iter().filter(|r| r.success).filter_map(|r| r.path_length).collect();
        groups.push((strategy.clone(), lengths));
    }
    if groups.iter().any(|(_, v): &(String, Vec<f64>)| !v.is_empty()) {
        save("boxplot.svg".into(), boxplot_svg("path length at done ratio", &groups)?)?;
    }

    for (strategy, path) in &curves {
        let rows: Vec<CurveRow> = with_file(path, parse_curves_csv(&read(path)?))?;
        let mut by_trial: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
        for r in rows {
            by_trial.entry(r.trial).or_default().push((r.path_length, r.explored_ratio));
        }
        let list: Vec<_> = by_trial.into_values().collect();
        save(
            format!("curves_{strategy}.svg"),
            curves_svg(&format!("explored ratio, {strategy}"), &list)?,
        )?;
    }

    for (strategy, path) in &trajectories {
        let rows: Vec<TrajectoryRow> = with_file(path, parse_trajectories_csv(&read(path)?))?;
        let first = rows[0].trial;
        let pts: Vec<_> = rows
            .iter()
            .filter(|r| r.trial == first)
            .map(|r| (r.x, r.y, r.decision))
            .collect();
        save(
            format!("trajectory_{strategy}.svg"),
            trajectory_svg(&format!("trajectory of trial {first}, {strategy}"), &pts)?,
        )?;
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 0.25), 1.75);
        assert_eq!(quantile(&[5.0], 0.75), 5.0);
    }

    #[test]
    fn titles_are_escaped() {
        let svg = curves_svg("a<b & c", &[vec![(0.0, 0.0), (1.0, 1.0)]]).unwrap();
        assert!(svg.contains("a&lt;b &amp; c"));
    }

    #[test]
    fn empty_inputs_are_rejected() {
        assert!(curves_svg("t", &[]).is_err());
        assert!(boxplot_svg("t", &[("x".into(), vec![])]).is_err());
        assert!(trajectory_svg("t", &[]).is_err());
    }
}
