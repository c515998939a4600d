//! Minimal SVG line and scatter charts with deterministic output.

use std::fmt::Write;

const MARGIN: f64 = 60.0;

/// Linear map from a data box to the plot area of a `width` x `height`
/// canvas; y grows upwards in data space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub width: f64,
    pub height: f64,
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return (-1.0, 1.0);
    }
    let span = hi - lo;
    if span <= 1e-12 * lo.abs().max(1.0) {
        return (lo - 1.0, hi + 1.0);
    }
    (lo - 0.05 * span, hi + 0.05 * span)
}

fn bounds<'a>(xs: impl Iterator<Item = &'a f64>) -> (f64, f64) {
    xs.filter(|x| x.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        })
}

impl Frame {
    pub fn fit(xs: &[f64], ys: &[f64], width: u32, height: u32) -> Self {
        let (x0, x1) = bounds(xs.iter());
        let (y0, y1) = bounds(ys.iter());
        Self {
            x: padded(x0, x1),
            y: padded(y0, y1),
            width: width as f64,
            height: height as f64,
        }
    }

    pub fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (self.width - 1.5 * MARGIN)
    }

    pub fn py(&self, y: f64) -> f64 {
        self.height - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (self.height - 1.5 * MARGIN)
    }

    /// Inverse of [`Frame::px`] and [`Frame::py`].
    pub fn data(&self, px: f64, py: f64) -> (f64, f64) {
        let x = self.x.0 + (px - MARGIN) / (self.width - 1.5 * MARGIN) * (self.x.1 - self.x.0);
        let y = self.y.0
            + (self.height - MARGIN - py) / (self.height - 1.5 * MARGIN) * (self.y.1 - self.y.0);
        (x, y)
    }
}

pub struct Series<'a> {
    pub class: &'a str,
    pub color: &'a str,
    pub xs: &'a [f64],
    pub ys: &'a [f64],
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn open(out: &mut String, f: &Frame, title: &str, xlabel: &str, ylabel: &str) {
    let (w, h) = (f.width, f.height);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let (l, r, t, b) = (MARGIN, w - MARGIN / 2.0, MARGIN / 2.0, h - MARGIN);
    let _ = writeln!(
        out,
        r#"<defs><clipPath id="area"><rect x="{l}" y="{t}" width="{}" height="{}"/></clipPath></defs>"#,
        r - l,
        b - t
    );
    let _ = writeln!(
        out,
        r#"<rect class="axes" x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        r - l,
        b - t
    );
    for i in 0..=4 {
        let fx = f.x.0 + (f.x.1 - f.x.0) * i as f64 / 4.0;
        let fy = f.y.0 + (f.y.1 - f.y.0) * i as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text class="tick" x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">{fx:.3}</text>"#,
            f.px(fx),
            b + 16.0
        );
        let _ = writeln!(
            out,
            r#"<text class="tick" x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{fy:.3}</text>"#,
            l - 4.0,
            f.py(fy) + 4.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" font-size="14" text-anchor="middle">{}</text>"#,
        w / 2.0,
        t - 10.0,
        escape(title)
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">{}</text>"#,
        (l + r) / 2.0,
        h - 12.0,
        escape(xlabel)
    );
    let _ = writeln!(
        out,
        r#"<text x="14" y="{:.2}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {:.2})">{}</text>"#,
        (t + b) / 2.0,
        (t + b) / 2.0,
        escape(ylabel)
    );
}

fn polyline(out: &mut String, f: &Frame, s: &Series) {
    let mut d = String::new();
    for (i, (x, y)) in s.xs.iter().zip(s.ys).enumerate() {
        let cmd = if i == 0 { 'M' } else { 'L' };
        let _ = write!(d, "{cmd}{:.2} {:.2} ", f.px(*x), f.py(*y));
    }
    let _ = writeln!(
        out,
        r#"<path class="{}" d="{}" fill="none" stroke="{}" stroke-width="1.5" clip-path="url(#area)"/>"#,
        s.class,
        d.trim_end(),
        s.color
    );
}

/// Curves in a common frame with circular markers at `markers`.
pub fn line_chart(
    title: &str,
    xlabel: &str,
    ylabel: &str,
    series: &[Series],
    markers: &[(f64, f64)],
    width: u32,
    height: u32,
) -> String {
    let xs: Vec<f64> = series.iter().flat_map(|s| s.xs.iter().copied()).collect();
    let ys: Vec<f64> = series.iter().flat_map(|s| s.ys.iter().copied()).collect();
    let frame = Frame::fit(&xs, &ys, width, height);
    let mut out = String::new();
    open(&mut out, &frame, title, xlabel, ylabel);
    for s in series {
        polyline(&mut out, &frame, s);
    }
    for &(x, y) in markers {
        let _ = writeln!(
            out,
            r#"<circle class="breakpoint" cx="{:.2}" cy="{:.2}" r="5" fill="none" stroke="black" stroke-width="2"/>"#,
            frame.px(x),
            frame.py(y)
        );
    }
    let mut y = MARGIN / 2.0 + 14.0;
    for s in series {
        let _ = writeln!(
            out,
            r#"<text class="legend" x="{:.2}" y="{y:.2}" font-size="11" fill="{}">{}</text>"#,
            MARGIN + 8.0,
            s.color,
            escape(s.class)
        );
        y += 14.0;
    }
    out.push_str("</svg>\n");
    out
}

/// A labelled point of a scatter plot.
pub struct Point<'a> {
    pub label: &'a str,
    pub group: &'a str,
    pub x: f64,
    pub y: f64,
}

/// Scatter of `points` with straight lines `y = slope * x + c` for each
/// intercept `c`.
#[allow(clippy::too_many_arguments)]
pub fn scatter_with_lines(
    title: &str,
    xlabel: &str,
    ylabel: &str,
    points: &[Point],
    slope: f64,
    intercepts: &[f64],
    width: u32,
    height: u32,
) -> String {
    let xs: Vec<f64> = points.iter().map(|p| p.x).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.y).collect();
    let frame = Frame::fit(&xs, &ys, width, height);
    let mut out = String::new();
    open(&mut out, &frame, title, xlabel, ylabel);
    let (x0, x1) = frame.x;
    for &c in intercepts {
        let _ = writeln!(
            out,
            r#"<path class="boundary" data-slope="{slope}" data-intercept="{c}" d="M{:.2} {:.2} L{:.2} {:.2}" stroke="gray" stroke-dasharray="6 4" clip-path="url(#area)"/>"#,
            frame.px(x0),
            frame.py(slope * x0 + c),
            frame.px(x1),
            frame.py(slope * x1 + c)
        );
    }
    let palette = [
        "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
    ];
    let mut groups: Vec<&str> = points.iter().map(|p| p.group).collect();
    groups.sort_unstable();
    groups.dedup();
    for p in points {
        let color = palette[groups.iter().position(|g| *g == p.group).unwrap_or(0) % palette.len()];
        let _ = writeln!(
            out,
            r#"<circle class="trial" data-group="{}" cx="{:.2}" cy="{:.2}" r="4" fill="{color}"><title>{}</title></circle>"#,
            escape(p.group),
            frame.px(p.x),
            frame.py(p.y),
            escape(p.label)
        );
    }
    let mut y = MARGIN / 2.0 + 14.0;
    for (i, g) in groups.iter().enumerate() {
        let _ = writeln!(
            out,
            r#"<text class="legend" x="{:.2}" y="{y:.2}" font-size="11" fill="{}">{}</text>"#,
            MARGIN + 8.0,
            palette[i % palette.len()],
            escape(g)
        );
        y += 14.0;
    }
    out.push_str("</svg>\n");
    out
}
