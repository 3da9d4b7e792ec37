//! Minimal static SVG figures: line plots, stem plots and heatmaps.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 32.0;
const BOTTOM: f64 = 52.0;

pub const PALETTE: [&str; 4] = ["#1f5fbf", "#c0392b", "#2e8b57", "#8e44ad"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Linear map from data range to pixel range.
#[derive(Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
    a: f64,
    b: f64,
}

impl Axis {
    fn new(lo: f64, hi: f64, a: f64, b: f64) -> Self {
        let (lo, hi) = if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, lo + 0.5)
        };
        Self { lo, hi, a, b }
    }

    fn map(&self, v: f64) -> f64 {
        self.a + (v - self.lo) / (self.hi - self.lo) * (self.b - self.a)
    }
}

pub struct Figure {
    body: String,
    title: String,
    xlabel: String,
    ylabel: String,
    x: Axis,
    y: Axis,
    legend: Vec<(String, String)>,
}

impl Figure {
    pub fn new(title: &str, xlabel: &str, ylabel: &str, xr: (f64, f64), yr: (f64, f64)) -> Self {
        Self {
            body: String::new(),
            title: title.into(),
            xlabel: xlabel.into(),
            ylabel: ylabel.into(),
            x: Axis::new(xr.0, xr.1, LEFT, W - RIGHT),
            y: Axis::new(yr.0, yr.1, H - BOTTOM, TOP),
            legend: Vec::new(),
        }
    }

    pub fn polyline(&mut self, pts: &[(f64, f64)], color: &str, label: Option<&str>) {
        let mut d = String::new();
        for (x, y) in pts {
            let _ = write!(d, "{:.2},{:.2} ", self.x.map(*x), self.y.map(*y));
        }
        let _ = writeln!(
            self.body,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            d.trim_end()
        );
        if let Some(l) = label {
            self.legend.push((l.into(), color.into()));
        }
    }

    pub fn markers(&mut self, pts: &[(f64, f64)], color: &str, label: Option<&str>) {
        for (x, y) in pts {
            let _ = writeln!(
                self.body,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="{color}"/>"#,
                self.x.map(*x),
                self.y.map(*y)
            );
        }
        if let Some(l) = label {
            self.legend.push((l.into(), color.into()));
        }
    }

    pub fn vlines(&mut self, xs: &[f64], color: &str, dash: bool, label: Option<&str>) {
        let style = if dash {
            r#" stroke-dasharray="4 3""#
        } else {
            ""
        };
        for x in xs {
            let px = self.x.map(*x);
            let _ = writeln!(
                self.body,
                r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="{color}"{style}/>"#,
                self.y.a, self.y.b
            );
        }
        if let Some(l) = label {
            self.legend.push((l.into(), color.into()));
        }
    }

    pub fn hline(&mut self, y: f64, color: &str, label: Option<&str>) {
        let py = self.y.map(y);
        let _ = writeln!(
            self.body,
            r#"<line x1="{:.2}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="{color}" stroke-dasharray="4 3"/>"#,
            self.x.a, self.x.b
        );
        if let Some(l) = label {
            self.legend.push((l.into(), color.into()));
        }
    }

    pub fn stems(&mut self, pts: &[(f64, f64)], color: &str) {
        let base = self.y.map(self.y.lo.max(0.0));
        for (x, y) in pts {
            let (px, py) = (self.x.map(*x), self.y.map(*y));
            let _ = writeln!(
                self.body,
                r#"<line x1="{px:.2}" y1="{base:.2}" x2="{px:.2}" y2="{py:.2}" stroke="{color}"/>"#
            );
        }
    }

    pub fn error_bars(&mut self, pts: &[(f64, f64, f64)], color: &str) {
        for (x, y, e) in pts {
            let px = self.x.map(*x);
            let _ = writeln!(
                self.body,
                r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="{color}"/>"#,
                self.y.map(y - e),
                self.y.map(y + e)
            );
        }
    }

    /// Renders the figure; `meta` lands verbatim (escaped) in `<metadata>`.
    pub fn render(&self, meta: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, "<metadata>{}</metadata>", esc(meta));
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            W - LEFT - RIGHT,
            H - TOP - BOTTOM
        );
        for i in 0..=4 {
            let t = i as f64 / 4.0;
            let xv = self.x.lo + t * (self.x.hi - self.x.lo);
            let yv = self.y.lo + t * (self.y.hi - self.y.lo);
            let (px, py) = (self.x.map(xv), self.y.map(yv));
            let _ = writeln!(
                s,
                r#"<text x="{px:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                H - BOTTOM + 16.0,
                tick(xv)
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
                LEFT - 6.0,
                py + 4.0,
                tick(yv)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
            W / 2.0,
            esc(&self.title)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            (LEFT + W - RIGHT) / 2.0,
            H - 12.0,
            esc(&self.xlabel)
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
            (TOP + H - BOTTOM) / 2.0,
            (TOP + H - BOTTOM) / 2.0,
            esc(&self.ylabel)
        );
        s.push_str(&self.body);
        for (i, (label, color)) in self.legend.iter().enumerate() {
            let y = TOP + 14.0 + 16.0 * i as f64;
            let x = W - RIGHT - 150.0;
            let _ = writeln!(
                s,
                r#"<rect x="{x}" y="{:.1}" width="12" height="4" fill="{color}"/><text x="{:.1}" y="{y:.1}">{}</text>"#,
                y - 5.0,
                x + 18.0,
                esc(label)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn tick(v: f64) -> String {
    if v == 0.0 || (v.abs() >= 1e-2 && v.abs() < 1e4) {
        let t = format!("{v:.3}");
        t.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.1e}")
    }
}

/// Grey-scale grid, white for rate 1 and black for rate 0.
pub fn heatmap(
    title: &str,
    xs: &[usize],
    ys: &[usize],
    rate: impl Fn(usize, usize) -> f64,
    meta: &str,
) -> String {
    let (nx, ny) = (xs.len().max(1), ys.len().max(1));
    let cw = (W - LEFT - RIGHT) / nx as f64;
    let ch = (H - TOP - BOTTOM) / ny as f64;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, "<metadata>{}</metadata>", esc(meta));
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    for (i, x) in xs.iter().enumerate() {
        for (j, _) in ys.iter().enumerate() {
            let v = (rate(i, j).clamp(0.0, 1.0) * 255.0).round() as u8;
            let px = LEFT + i as f64 * cw;
            let py = H - BOTTOM - (j + 1) as f64 * ch;
            let _ = writeln!(
                s,
                r#"<rect x="{px:.2}" y="{py:.2}" width="{:.2}" height="{:.2}" fill="rgb({v},{v},{v})"/>"#,
                cw + 0.2,
                ch + 0.2
            );
        }
        if nx <= 24 || i % (nx / 12).max(1) == 0 {
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{x}</text>"#,
                LEFT + (i as f64 + 0.5) * cw,
                H - BOTTOM + 16.0
            );
        }
    }
    for (j, y) in ys.iter().enumerate() {
        if ny <= 24 || j % (ny / 12).max(1) == 0 {
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{y}</text>"#,
                LEFT - 6.0,
                H - BOTTOM - (j as f64 + 0.5) * ch + 4.0
            );
        }
    }
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - LEFT - RIGHT,
        H - TOP - BOTTOM
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        W / 2.0,
        esc(title)
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">s (paths)</text>"#,
        (LEFT + W - RIGHT) / 2.0,
        H - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{0:.1}" text-anchor="middle" transform="rotate(-90 16 {0:.1})">r (impulses)</text>"#,
        (TOP + H - BOTTOM) / 2.0
    );
    s.push_str("</svg>\n");
    s
}
