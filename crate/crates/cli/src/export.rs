//! CSV, SVG and summary writers.

use std::fmt::Write as _;
use std::io::{self, Write};

use vortex_shape::descent::IterationRecord;
use vortex_shape::geom::Point;

pub const HISTORY_HEADER: &str = "iteration,accepted,j1 [-],j2 [-],perimeter [length],volume [area],objective [-],\
lagrangian [-],t_k [-],retries,ell [-],b [-],min_angle [deg]";

pub fn history_row<W: Write>(mut out: W, r: &IterationRecord) -> io::Result<()> {
    let b = &r.breakdown;
    writeln!(
        out,
        "{},{},{},{},{},{},{},{},{},{},{},{},{}",
        r.iteration,
        r.accepted as u8,
        b.j1,
        b.j2,
        b.perimeter,
        b.volume,
        b.objective,
        b.lagrangian,
        r.step,
        r.retries,
        r.ell,
        r.b,
        r.quality.min_angle
    )
}

pub fn write_polyline<W: Write>(mut out: W, points: &[Point]) -> io::Result<()> {
    writeln!(out, "x [length],y [length]")?;
    for p in points {
        writeln!(out, "{},{}", p[0], p[1])?;
    }
    Ok(())
}

/// All iterates in one file, keyed by iteration.
pub fn write_polylines<W: Write>(mut out: W, polylines: &[(usize, &[Point])]) -> io::Result<()> {
    writeln!(out, "iteration,point,x [length],y [length]")?;
    for (k, poly) in polylines {
        for (i, p) in poly.iter().enumerate() {
            writeln!(out, "{k},{i},{},{}", p[0], p[1])?;
        }
    }
    Ok(())
}

/// Reads a polyline CSV: one point per row, `x,y` in the last two columns,
/// optional header.
pub fn read_polyline(text: &str) -> Result<Vec<Point>, String> {
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() < 2 {
            return Err(format!("line {}: expected at least two columns", i + 1));
        }
        let parsed = (cols[cols.len() - 2].parse::<f64>(), cols[cols.len() - 1].parse::<f64>());
        match parsed {
            (Ok(x), Ok(y)) => points.push([x, y]),
            _ if i == 0 => continue,
            _ => return Err(format!("line {}: cannot parse coordinates", i + 1)),
        }
    }
    if points.is_empty() {
        return Err("no points".into());
    }
    Ok(points)
}

pub struct Series<'a> {
    pub name: &'a str,
    pub color: &'a str,
    pub values: Vec<f64>,
}

/// Line chart of series divided by their first value, against iteration.
pub fn trend_svg(title: &str, series: &[Series]) -> String {
    let (w, h, pad) = (640.0, 400.0, 60.0);
    let normalized: Vec<Vec<f64>> = series
        .iter()
        .map(|s| {
            let v0 = s.values.first().copied().unwrap_or(1.0);
            s.values.iter().map(|v| v / v0).collect()
        })
        .collect();
    let n = normalized.iter().map(Vec::len).max().unwrap_or(1).max(2);
    let all = normalized.iter().flatten().copied().filter(|v| v.is_finite());
    let (mut lo, mut hi) = all.fold((1.0f64, 1.0f64), |(a, b), v| (a.min(v), b.max(v)));
    if hi - lo < 1e-9 {
        lo -= 0.01;
        hi += 0.01;
    }
    let margin = 0.05 * (hi - lo);
    let (lo, hi) = (lo - margin, hi + margin);
    let x = |i: usize| pad + (w - 2.0 * pad) * i as f64 / (n - 1) as f64;
    let y = |v: f64| h - pad - (h - 2.0 * pad) * (v - lo) / (hi - lo);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{title}</text>"#, w / 2.0);
    let _ = writeln!(
        s,
        r#"<path d="M{pad},{pad} V{} H{}" fill="none" stroke="black"/>"#,
        h - pad,
        w - pad
    );
    for k in 0..=4 {
        let v = lo + (hi - lo) * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.1}" text-anchor="end" font-family="sans-serif" font-size="11">{v:.4}</text>"#,
            pad - 6.0,
            y(v) + 4.0
        );
        let _ = writeln!(s, r##"<line x1="{pad}" x2="{}" y1="{:.1}" y2="{:.1}" stroke="#ddd"/>"##, w - pad, y(v), y(v));
    }
    for i in [0, (n - 1) / 2, n - 1] {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="11">{i}</text>"#,
            x(i),
            h - pad + 16.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">iteration</text>"#,
        w / 2.0,
        h - 16.0
    );
    for (k, (ser, vals)) in series.iter().zip(&normalized).enumerate() {
        let pts: Vec<String> = vals.iter().enumerate().map(|(i, &v)| format!("{:.2},{:.2}", x(i), y(v))).collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="2"/>"#,
            pts.join(" "),
            ser.color
        );
        let ly = pad + 16.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{}" x2="{}" y1="{ly}" y2="{ly}" stroke="{}" stroke-width="2"/><text x="{}" y="{}" font-family="sans-serif" font-size="12">{}</text>"#,
            w - pad - 150.0,
            w - pad - 130.0,
            ser.color,
            w - pad - 124.0,
            ly + 4.0,
            ser.name
        );
    }
    s.push_str("</svg>\n");
    s
}
