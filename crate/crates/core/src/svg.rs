//! Minimal deterministic SVG charts for the pipeline figures. Output depends
//! only on the inputs: fixed element order, fixed number formatting.

use std::fmt::Write as _;

use crate::cluster::Point;
use crate::eval::cluster_name;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#bcbd22", "#17becf", "#7f7f7f",
];
const UNCLUSTERED: &str = "#b0b0b0";

pub fn cluster_color(k: usize) -> &'static str {
    PALETTE[k % PALETTE.len()]
}

fn f(x: f64) -> String {
    let s = format!("{x:.2}");
    if s == "-0.00" { "0.00".into() } else { s }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Linear map from a data interval onto a pixel interval.
#[derive(Debug, Clone, Copy)]
struct Scale {
    d0: f64,
    d1: f64,
    p0: f64,
    p1: f64,
}

impl Scale {
    fn new(lo: f64, hi: f64, p0: f64, p1: f64) -> Self {
        let (lo, hi) = if hi - lo > 1e-12 { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        Self { d0: lo, d1: hi, p0, p1 }
    }

    fn padded(lo: f64, hi: f64, p0: f64, p1: f64) -> Self {
        let pad = 0.05 * (hi - lo).max(1e-9);
        Self::new(lo - pad, hi + pad, p0, p1)
    }

    fn map(&self, x: f64) -> f64 {
        self.p0 + (x - self.d0) / (self.d1 - self.d0) * (self.p1 - self.p0)
    }
}

struct Doc {
    body: String,
    width: f64,
    height: f64,
}

impl Doc {
    fn new(width: f64, height: f64) -> Self {
        Self {
            body: String::new(),
            width,
            height,
        }
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, width: f64) {
        let _ = writeln!(
            self.body,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{stroke}" stroke-width="{}"/>"#,
            f(x1),
            f(y1),
            f(x2),
            f(y2),
            f(width)
        );
    }

    fn text(&mut self, x: f64, y: f64, size: f64, anchor: &str, s: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{}" y="{}" font-size="{}" font-family="sans-serif" text-anchor="{anchor}">{}</text>"#,
            f(x),
            f(y),
            f(size),
            escape(s)
        );
    }

    fn polyline(&mut self, pts: &[(f64, f64)], stroke: &str) {
        let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{},{}", f(*x), f(*y))).collect();
        let _ = writeln!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="1.5"/>"#,
            coords.join(" ")
        );
    }

    fn axes(&mut self, x0: f64, y0: f64, x1: f64, y1: f64) {
        self.line(x0, y1, x1, y1, "black", 1.0);
        self.line(x0, y0, x0, y1, "black", 1.0);
    }

    fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n{}</svg>\n",
            self.body,
            w = f(self.width),
            h = f(self.height)
        )
    }
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Latent scatter: points colored by cluster, unclustered in gray, centers
/// as black crosses.
pub fn latent_scatter(points: &[Point], assignments: &[Option<usize>], centers: &[Point]) -> String {
    let (w, h, m) = (520.0, 520.0, 50.0);
    let mut doc = Doc::new(w, h);
    let (xlo, xhi) = bounds(points.iter().chain(centers).map(|p| p[0]));
    let (ylo, yhi) = bounds(points.iter().chain(centers).map(|p| p[1]));
    let (xlo, xhi) = if xlo.is_finite() { (xlo, xhi) } else { (0.0, 1.0) };
    let (ylo, yhi) = if ylo.is_finite() { (ylo, yhi) } else { (0.0, 1.0) };
    let sx = Scale::padded(xlo, xhi, m, w - m);
    let sy = Scale::padded(ylo, yhi, h - m, m);
    doc.axes(m, m, w - m, h - m);
    doc.text(w / 2.0, h - 15.0, 13.0, "middle", "PC1");
    doc.text(15.0, h / 2.0, 13.0, "middle", "PC2");
    // Unclustered first so cluster colors sit on top.
    let order = points
        .iter()
        .zip(assignments)
        .filter(|(_, a)| a.is_none())
        .chain(points.iter().zip(assignments).filter(|(_, a)| a.is_some()));
    for (p, a) in order {
        let color = a.map_or(UNCLUSTERED, cluster_color);
        let _ = writeln!(
            doc.body,
            r#"<circle cx="{}" cy="{}" r="2.5" fill="{color}" fill-opacity="0.8"/>"#,
            f(sx.map(p[0])),
            f(sy.map(p[1]))
        );
    }
    for (k, c) in centers.iter().enumerate() {
        let (x, y) = (sx.map(c[0]), sy.map(c[1]));
        doc.line(x - 6.0, y - 6.0, x + 6.0, y + 6.0, "black", 2.0);
        doc.line(x - 6.0, y + 6.0, x + 6.0, y - 6.0, "black", 2.0);
        doc.text(x + 8.0, y - 8.0, 12.0, "start", &cluster_name(k));
    }
    doc.finish()
}

/// One panel per prototype contour, in the given (largest-first) order.
pub fn prototype_panels(prototypes: &[Vec<f64>], sizes: &[usize]) -> String {
    let (pw, ph, m) = (180.0, 160.0, 25.0);
    let k = prototypes.len().max(1);
    let mut doc = Doc::new(pw * k as f64, ph + 20.0);
    for (i, proto) in prototypes.iter().enumerate() {
        let x0 = i as f64 * pw;
        let sx = Scale::new(0.0, (proto.len().max(2) - 1) as f64, x0 + m, x0 + pw - 10.0);
        let sy = Scale::new(0.0, 1.0, ph - m, m);
        doc.axes(x0 + m, m, x0 + pw - 10.0, ph - m);
        let pts: Vec<(f64, f64)> = proto
            .iter()
            .enumerate()
            .map(|(j, v)| (sx.map(j as f64), sy.map(*v)))
            .collect();
        doc.polyline(&pts, cluster_color(i));
        let label = match sizes.get(i) {
            Some(n) => format!("{} (n={n})", cluster_name(i)),
            None => cluster_name(i),
        };
        doc.text(x0 + pw / 2.0, ph + 5.0, 12.0, "middle", &label);
    }
    doc.finish()
}

/// Bar chart of every mean shift cluster's size (largest first) with the
/// spurious-cluster threshold as a horizontal line.
pub fn cluster_size_bars(sizes: &[usize], threshold: usize) -> String {
    let (w, h, m) = (560.0, 320.0, 45.0);
    let mut doc = Doc::new(w, h);
    let top = sizes.iter().copied().max().unwrap_or(1).max(threshold).max(1) as f64;
    let sy = Scale::new(0.0, top * 1.05, h - m, m);
    doc.axes(m, m, w - m, h - m);
    let n = sizes.len().max(1) as f64;
    let slot = (w - 2.0 * m) / n;
    for (i, &s) in sizes.iter().enumerate() {
        let color = if s >= threshold { cluster_color(i) } else { UNCLUSTERED };
        let y = sy.map(s as f64);
        let _ = writeln!(
            doc.body,
            r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{color}"/>"#,
            f(m + i as f64 * slot + 0.1 * slot),
            f(y),
            f(0.8 * slot),
            f(h - m - y)
        );
    }
    let ty = sy.map(threshold as f64);
    doc.line(m, ty, w - m, ty, "black", 2.0);
    doc.text(w - m, ty - 5.0, 12.0, "end", &format!("threshold {threshold}"));
    doc.text(m - 5.0, m, 11.0, "end", &format!("{}", top as usize));
    doc.text(w / 2.0, h - 12.0, 13.0, "middle", "clusters by size");
    doc.finish()
}

/// Per-epoch training loss.
pub fn loss_curve(losses: &[f64]) -> String {
    let (w, h, m) = (560.0, 320.0, 50.0);
    let mut doc = Doc::new(w, h);
    doc.axes(m, m, w - m, h - m);
    let (lo, hi) = bounds(losses.iter().copied().filter(|v| v.is_finite()));
    if lo.is_finite() {
        let sx = Scale::new(1.0, losses.len().max(2) as f64, m, w - m);
        let sy = Scale::padded(lo.min(0.0), hi, h - m, m);
        let pts: Vec<(f64, f64)> = losses
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .map(|(i, v)| (sx.map((i + 1) as f64), sy.map(*v)))
            .collect();
        doc.polyline(&pts, PALETTE[0]);
        doc.text(m - 5.0, sy.map(hi), 11.0, "end", &format!("{hi:.4}"));
    }
    doc.text(w / 2.0, h - 15.0, 13.0, "middle", "epoch");
    doc.text(15.0, h / 2.0, 13.0, "middle", "MSE");
    doc.finish()
}
