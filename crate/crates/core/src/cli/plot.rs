//! Minimal deterministic SVG rendering of curve, histogram and bar data.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 56.0;

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Self {
        let span = |it: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) = it
                .filter(|v| v.is_finite())
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi - lo < 1e-12 {
                (lo - 0.5, hi + 0.5)
            } else {
                (lo, hi)
            }
        };
        let (x0, x1) = span(&mut xs.clone());
        let (y0, y1) = span(&mut ys.clone());
        let margin = 0.05 * (y1 - y0);
        Frame {
            x0,
            x1,
            y0: y0 - margin,
            y1: y1 + margin,
        }
    }

    fn x(&self, v: f64) -> f64 {
        PAD + (v - self.x0) / (self.x1 - self.x0) * (W - 2.0 * PAD)
    }

    fn y(&self, v: f64) -> f64 {
        H - PAD - (v - self.y0) / (self.y1 - self.y0) * (H - 2.0 * PAD)
    }
}

fn open(out: &mut String, title: &str, xlabel: &str, ylabel: &str, f: &Frame) {
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{title}</text>"#, W / 2.0).unwrap();
    writeln!(
        out,
        r#"<path d="M{PAD} {PAD} V{b} H{r}" fill="none" stroke="black"/>"#,
        b = H - PAD,
        r = W - PAD
    )
    .unwrap();
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let (xv, yv) = (f.x0 + t * (f.x1 - f.x0), f.y0 + t * (f.y1 - f.y0));
        writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{xv:.3}</text>"#,
            f.x(xv),
            H - PAD + 18.0
        )
        .unwrap();
        writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{yv:.3}</text>"#,
            PAD - 6.0,
            f.y(yv) + 4.0
        )
        .unwrap();
    }
    writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{xlabel}</text>"#, W / 2.0, H - 12.0).unwrap();
    writeln!(
        out,
        r#"<text x="16" y="{y}" text-anchor="middle" transform="rotate(-90 16 {y})">{ylabel}</text>"#,
        y = H / 2.0
    )
    .unwrap();
}

/// Mean curve with a shaded band of one standard error.
pub fn curve_svg(title: &str, points: &[(f64, f64, f64)]) -> String {
    let f = Frame::new(
        points.iter().map(|p| p.0),
        points.iter().flat_map(|p| [p.1 - p.2, p.1 + p.2]),
    );
    let mut out = String::new();
    open(&mut out, title, "planning horizon H", "normalized return", &f);
    let mut band = String::new();
    for (i, p) in points.iter().enumerate() {
        write!(band, "{}{:.2} {:.2} ", if i == 0 { "M" } else { "L" }, f.x(p.0), f.y(p.1 + p.2)).unwrap();
    }
    for p in points.iter().rev() {
        write!(band, "L{:.2} {:.2} ", f.x(p.0), f.y(p.1 - p.2)).unwrap();
    }
    writeln!(out, r##"<path d="{}Z" fill="#4477aa" fill-opacity="0.25" stroke="none"/>"##, band).unwrap();
    let line: Vec<String> = points
        .iter()
        .map(|p| format!("{:.2},{:.2}", f.x(p.0), f.y(p.1)))
        .collect();
    writeln!(out, r##"<polyline points="{}" fill="none" stroke="#4477aa" stroke-width="2"/>"##, line.join(" ")).unwrap();
    for p in points {
        writeln!(out, r##"<circle cx="{:.2}" cy="{:.2}" r="3" fill="#4477aa"/>"##, f.x(p.0), f.y(p.1)).unwrap();
    }
    out.push_str("</svg>\n");
    out
}

/// Two overlaid step densities on shared bins.
pub fn histogram_svg(title: &str, edges: &[f64], policy: &[f64], expert: &[f64]) -> String {
    let f = Frame::new(edges.iter().copied(), policy.iter().chain(expert).copied().chain([0.0]));
    let mut out = String::new();
    open(&mut out, title, "inferred reward", "density", &f);
    for (series, color, name, row) in [(policy, "#cc6677", "policy", 0.0), (expert, "#117733", "expert", 1.0)] {
        let mut d = format!("M{:.2} {:.2} ", f.x(edges[0]), f.y(0.0));
        for (i, v) in series.iter().enumerate() {
            write!(d, "L{:.2} {:.2} L{:.2} {:.2} ", f.x(edges[i]), f.y(*v), f.x(edges[i + 1]), f.y(*v)).unwrap();
        }
        write!(d, "L{:.2} {:.2}", f.x(edges[edges.len() - 1]), f.y(0.0)).unwrap();
        writeln!(out, r#"<path d="{d}" fill="{color}" fill-opacity="0.3" stroke="{color}"/>"#).unwrap();
        let ly = PAD + 14.0 * row;
        writeln!(
            out,
            r#"<rect x="{:.2}" y="{:.2}" width="10" height="10" fill="{color}"/><text x="{:.2}" y="{:.2}">{name}</text>"#,
            W - PAD - 70.0,
            ly,
            W - PAD - 55.0,
            ly + 9.0
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}

/// Horizontal bars of mean normalized return with one-std whiskers.
pub fn bars_svg(title: &str, bars: &[(String, f64, f64)]) -> String {
    let f = Frame::new(
        [0.0, bars.len() as f64].into_iter(),
        bars.iter().flat_map(|b| [b.1 - b.2, b.1 + b.2]).chain([0.0]),
    );
    let mut out = String::new();
    open(&mut out, title, "", "normalized return", &f);
    let slot = (W - 2.0 * PAD) / bars.len().max(1) as f64;
    for (i, (label, mean, std)) in bars.iter().enumerate() {
        let cx = PAD + slot * (i as f64 + 0.5);
        let (top, base) = (f.y(mean.max(0.0)), f.y(mean.min(0.0)));
        writeln!(
            out,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#4477aa"/>"##,
            cx - slot * 0.3,
            top,
            slot * 0.6,
            (base - top).max(0.5)
        )
        .unwrap();
        writeln!(
            out,
            r#"<path d="M{cx:.2} {:.2} V{:.2}" stroke="black"/>"#,
            f.y(mean - std),
            f.y(mean + std)
        )
        .unwrap();
        writeln!(
            out,
            r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle" font-size="10">{label}</text>"#,
            PAD + 12.0 + 12.0 * (i % 2) as f64
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}
