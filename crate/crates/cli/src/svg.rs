//! Self-contained SVG figures. Output depends only on the input data.

use std::fmt::Write;

use skyris_core::{Point, ScenarioConfig, Trajectory};

const W: f64 = 640.0;
const H: f64 = 480.0;
const PAD: f64 = 56.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone, margin: f64) -> Self {
        let span = |v: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) = v.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
            if !lo.is_finite() {
                return (0.0, 1.0);
            }
            let pad = ((hi - lo) * margin).max(if hi == lo { lo.abs().max(1.0) * 0.05 } else { 0.0 });
            (lo - pad, hi + pad)
        };
        Self { x: span(&mut xs.clone()), y: span(&mut ys.clone()) }
    }

    fn px(&self, x: f64) -> f64 {
        PAD + (x - self.x.0) / (self.x.1 - self.x.0) * (W - 2.0 * PAD)
    }

    fn py(&self, y: f64) -> f64 {
        H - PAD - (y - self.y.0) / (self.y.1 - self.y.0) * (H - 2.0 * PAD)
    }
}

fn header(out: &mut String, title: &str) {
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = write!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = write!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
}

fn axes(out: &mut String, f: &Frame, x_label: &str, y_label: &str) {
    let _ = write!(
        out,
        r##"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="#444"/>"##,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let (xv, yv) = (f.x.0 + t * (f.x.1 - f.x.0), f.y.0 + t * (f.y.1 - f.y.0));
        let _ = write!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, f.px(xv), H - PAD + 16.0, tick(xv));
        let _ = write!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, PAD - 4.0, f.py(yv) + 4.0, tick(yv));
    }
    let _ = write!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 12.0, escape(x_label));
    let _ = write!(
        out,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        format!("{v:.2}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn polyline(out: &mut String, f: &Frame, pts: &[(f64, f64)], color: &str, dashed: bool) {
    let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", f.px(x), f.py(y))).collect();
    let dash = if dashed { r#" stroke-dasharray="6 4""# } else { "" };
    let _ = write!(out, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"{dash}/>"#, coords.join(" "));
}

fn legend(out: &mut String, entries: &[(String, &str)]) {
    for (i, (name, color)) in entries.iter().enumerate() {
        let y = PAD + 14.0 + 16.0 * i as f64;
        let _ = write!(out, r#"<rect x="{}" y="{}" width="12" height="4" fill="{color}"/>"#, W - PAD - 150.0, y - 4.0);
        let _ = write!(out, r#"<text x="{}" y="{}">{}</text>"#, W - PAD - 132.0, y, escape(name));
    }
}

/// Map view: users, base station, eavesdropper, initial and optimized paths,
/// silent slots crossed out.
pub fn trajectory_map(cfg: &ScenarioConfig, initial: &Trajectory, optimized: &Trajectory, silent: &[usize]) -> String {
    let all: Vec<Point> = cfg
        .users
        .iter()
        .chain([&cfg.bs, &cfg.eve])
        .chain(&initial.points)
        .chain(&optimized.points)
        .copied()
        .collect();
    let f = Frame::new(all.iter().map(|p| p[0]), all.iter().map(|p| p[1]), 0.08);
    let mut out = String::new();
    header(&mut out, "UAV trajectory");
    axes(&mut out, &f, "x (m)", "y (m)");
    let path = |t: &Trajectory| t.points.iter().map(|p| (p[0], p[1])).collect::<Vec<_>>();
    polyline(&mut out, &f, &path(initial), "#999999", true);
    polyline(&mut out, &f, &path(optimized), COLORS[0], false);
    for p in &optimized.points[1..] {
        let _ = write!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}"/>"#, f.px(p[0]), f.py(p[1]), COLORS[0]);
    }
    for &s in silent {
        let p = optimized.slot_position(s);
        let (x, y) = (f.px(p[0]), f.py(p[1]));
        let _ = write!(
            out,
            r#"<path d="M{:.2},{:.2}L{:.2},{:.2}M{:.2},{:.2}L{:.2},{:.2}" stroke="black" stroke-width="2"/>"#,
            x - 6.0,
            y - 6.0,
            x + 6.0,
            y + 6.0,
            x - 6.0,
            y + 6.0,
            x + 6.0,
            y - 6.0
        );
    }
    for (k, u) in cfg.users.iter().enumerate() {
        let _ = write!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="6" fill="{}"/>"#, f.px(u[0]), f.py(u[1]), COLORS[2]);
        let _ = write!(out, r#"<text x="{:.2}" y="{:.2}">user {}</text>"#, f.px(u[0]) + 8.0, f.py(u[1]) - 8.0, k + 1);
    }
    let (bx, by) = (f.px(cfg.bs[0]), f.py(cfg.bs[1]));
    let _ = write!(out, r#"<rect x="{:.2}" y="{:.2}" width="12" height="12" fill="{}"/>"#, bx - 6.0, by - 6.0, COLORS[3]);
    let _ = write!(out, r#"<text x="{:.2}" y="{:.2}">BS</text>"#, bx + 8.0, by - 8.0);
    let (ex, ey) = (f.px(cfg.eve[0]), f.py(cfg.eve[1]));
    let _ = write!(
        out,
        r#"<path d="M{:.2},{:.2}L{:.2},{:.2}L{:.2},{:.2}Z" fill="{}"/>"#,
        ex,
        ey - 8.0,
        ex - 7.0,
        ey + 6.0,
        ex + 7.0,
        ey + 6.0,
        COLORS[1]
    );
    let _ = write!(out, r#"<text x="{:.2}" y="{:.2}">Eve</text>"#, ex + 8.0, ey - 8.0);
    legend(&mut out, &[("initial".into(), "#999999"), ("optimized".into(), COLORS[0]), ("silent slot ×".into(), "black")]);
    out.push_str("</svg>\n");
    out
}

/// One line per series over a shared x axis.
pub fn line_plot(title: &str, x_label: &str, y_label: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let pts = series.iter().flat_map(|(_, s)| s.iter().copied()).filter(|(x, y)| x.is_finite() && y.is_finite());
    let f = Frame::new(pts.clone().map(|p| p.0), pts.map(|p| p.1), 0.05);
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, &f, x_label, y_label);
    let mut entries = Vec::new();
    for (i, (name, s)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let finite: Vec<(f64, f64)> = s.iter().copied().filter(|(x, y)| x.is_finite() && y.is_finite()).collect();
        polyline(&mut out, &f, &finite, color, false);
        for &(x, y) in &finite {
            let _ = write!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, f.px(x), f.py(y));
        }
        entries.push((name.clone(), color));
    }
    legend(&mut out, &entries);
    out.push_str("</svg>\n");
    out
}
