//! Minimal SVG plots. Numbers are printed with fixed precision so identical
//! data always gives identical bytes.

use std::fmt::Write;

use crate::geometry::Vec3;

const W: f64 = 800.0;
const H: f64 = 400.0;
const MARGIN: f64 = 50.0;

fn header(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W:.0}" height="{H:.0}" viewBox="0 0 {W:.0} {H:.0}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Linear map from data range to pixel range; a flat range maps to the middle.
#[derive(Clone, Copy)]
struct Scale {
    lo: f64,
    hi: f64,
    p0: f64,
    p1: f64,
}

impl Scale {
    fn new(lo: f64, hi: f64, p0: f64, p1: f64) -> Self {
        let (lo, hi) = if (hi - lo).abs() < 1e-12 {
            (lo - 1.0, hi + 1.0)
        } else {
            (lo, hi)
        };
        Scale { lo, hi, p0, p1 }
    }

    fn at(&self, v: f64) -> f64 {
        self.p0 + (v - self.lo) / (self.hi - self.lo) * (self.p1 - self.p0)
    }
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    })
}

fn axes(s: &mut String, x: Scale, y: Scale, xlabel: &str, ylabel: &str) {
    let (x0, x1, y0, y1) = (x.p0, x.p1, y.p0, y.p1);
    let _ = writeln!(
        s,
        r#"<path d="M{x0:.1},{y1:.1} L{x0:.1},{y0:.1} L{x1:.1},{y0:.1}" stroke="black" fill="none"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        H - 12.0,
        escape(xlabel)
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.1}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 14 {:.1})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(ylabel)
    );
    for (v, px) in [(y.lo, y0), (y.hi, y1)] {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="10" text-anchor="end">{v:.3}</text>"#,
            x0 - 4.0,
            px + 4.0
        );
    }
    for (v, px) in [(x.lo, x0), (x.hi, x1)] {
        let _ = writeln!(
            s,
            r#"<text x="{px:.1}" y="{:.1}" font-family="sans-serif" font-size="10" text-anchor="middle">{v:.2}</text>"#,
            y0 + 14.0
        );
    }
}

fn polyline(s: &mut String, pts: impl Iterator<Item = (f64, f64)>, color: &str, dash: bool) {
    let mut d = String::new();
    for (i, (x, y)) in pts.enumerate() {
        let _ = write!(d, "{}{x:.2},{y:.2}", if i == 0 { "M" } else { " L" });
    }
    if d.is_empty() {
        return;
    }
    let dash = if dash { r#" stroke-dasharray="6 3""# } else { "" };
    let _ = writeln!(
        s,
        r#"<path d="{d}" stroke="{color}" stroke-width="1.2" fill="none"{dash}/>"#
    );
}

fn legend(s: &mut String, entries: &[(&str, &str)]) {
    for (i, (label, color)) in entries.iter().enumerate() {
        let y = 40.0 + 16.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{:.1}" y="{:.1}" width="10" height="10" fill="{color}"/><text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11">{}</text>"#,
            W - 170.0,
            y,
            W - 155.0,
            y + 9.0,
            escape(label)
        );
    }
}

/// Highlighted bars in the candidate chart.
#[derive(Debug, Clone, Copy)]
pub struct Highlights {
    pub best: usize,
    pub worst: usize,
    pub second_best: Option<usize>,
    pub second_worst: Option<usize>,
}

/// Bar chart of the summed PEC per candidate.
pub fn candidate_totals_chart(totals: &[f64], marks: &Highlights) -> String {
    let mut s = header("Summed position error covariance per candidate");
    let x = Scale::new(0.0, totals.len().max(1) as f64, MARGIN, W - MARGIN);
    let (_, hi) = bounds(totals.iter().copied());
    let y = Scale::new(0.0, if hi.is_finite() { hi } else { 1.0 }, H - MARGIN, MARGIN);
    axes(&mut s, x, y, "candidate", "total PEC (m^2)");
    let bar = (x.at(1.0) - x.at(0.0)) * 0.8;
    for (i, &v) in totals.iter().enumerate() {
        let color = if i == marks.best {
            "green"
        } else if i == marks.worst {
            "red"
        } else if Some(i) == marks.second_best {
            "gold"
        } else if Some(i) == marks.second_worst {
            "black"
        } else {
            "steelblue"
        };
        let top = y.at(v);
        let _ = writeln!(
            s,
            r#"<rect x="{:.2}" y="{top:.2}" width="{bar:.2}" height="{:.2}" fill="{color}"/>"#,
            x.at(i as f64) + 0.1 * bar,
            (y.p0 - top).max(0.0)
        );
    }
    legend(
        &mut s,
        &[
            ("best", "green"),
            ("worst", "red"),
            ("second best", "gold"),
            ("second worst", "black"),
        ],
    );
    s.push_str("</svg>\n");
    s
}

/// One series for [`xy_overlay`].
pub struct Series<'a> {
    pub label: String,
    pub color: &'a str,
    pub dashed: bool,
    pub points: Vec<Vec3>,
}

/// Top-down (north/east) view of several 3D tracks.
pub fn xy_overlay(title: &str, series: &[Series]) -> String {
    let mut s = header(title);
    let all = || series.iter().flat_map(|t| t.points.iter());
    let (nlo, nhi) = bounds(all().map(|p| p.n));
    let (elo, ehi) = bounds(all().map(|p| p.e));
    if !nlo.is_finite() {
        s.push_str("</svg>\n");
        return s;
    }
    let x = Scale::new(nlo, nhi, MARGIN, W - 200.0);
    let y = Scale::new(elo, ehi, H - MARGIN, MARGIN);
    axes(&mut s, x, y, "north (m)", "east (m)");
    for t in series {
        polyline(
            &mut s,
            t.points.iter().map(|p| (x.at(p.n), y.at(p.e))),
            t.color,
            t.dashed,
        );
    }
    let entries: Vec<(&str, &str)> = series.iter().map(|t| (t.label.as_str(), t.color)).collect();
    legend(&mut s, &entries);
    s.push_str("</svg>\n");
    s
}

/// Palette cycled for multi-run overlays.
pub const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22",
    "#17becf",
];
