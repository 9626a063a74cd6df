//! Static line plots as standalone SVG, with the series also written as CSV.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

/// A named `(x, y)` series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub x_label: String,
    pub y_label: String,
    #[serde(default)]
    pub log_x: bool,
    #[serde(default)]
    pub log_y: bool,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(name: impl Into<String>, x_label: impl Into<String>, y_label: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            log_x: false,
            log_y: false,
            points: Vec::new(),
        }
    }

    pub fn log_log(mut self) -> Self {
        self.log_x = true;
        self.log_y = true;
        self
    }

    pub fn push(&mut self, x: f64, y: f64) {
        self.points.push((x, y));
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("{},{}\n", self.x_label, self.y_label);
        for (x, y) in &self.points {
            let _ = writeln!(s, "{x},{y}");
        }
        s
    }
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const PAD: f64 = 64.0;

fn scale(v: f64, log: bool) -> f64 {
    if log {
        v.log10()
    } else {
        v
    }
}

fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if hi - lo < 1e-300 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

/// Renders the series as an SVG line plot. Returns `None` for fewer than two
/// finite points. Log axes silently fall back to linear when a coordinate is
/// not positive.
pub fn render_svg(series: &Series) -> Option<String> {
    let pts: Vec<(f64, f64)> = series.points.iter().copied().filter(|(x, y)| x.is_finite() && y.is_finite()).collect();
    if pts.len() < 2 {
        return None;
    }
    let log_x = series.log_x && pts.iter().all(|p| p.0 > 0.0);
    let log_y = series.log_y && pts.iter().all(|p| p.1 > 0.0);
    let sx: Vec<f64> = pts.iter().map(|p| scale(p.0, log_x)).collect();
    let sy: Vec<f64> = pts.iter().map(|p| scale(p.1, log_y)).collect();
    let (x0, x1) = range(sx.iter().copied());
    let (y0, y1) = range(sy.iter().copied());
    let px = |v: f64| PAD + (v - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let py = |v: f64| H - PAD - (v - y0) / (y1 - y0) * (H - 2.0 * PAD);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{a} {b} L{a} {c} L{d} {c}" fill="none" stroke="black"/>"#,
        a = PAD,
        b = PAD,
        c = H - PAD,
        d = W - PAD
    );
    let axis_label = |v: f64, log: bool| if log { format!("{:.3e}", 10f64.powf(v)) } else { format!("{v:.4}") };
    for (v, anchor) in [(x0, "start"), (x1, "end")] {
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="{anchor}">{}</text>"#, px(v), H - PAD + 16.0, axis_label(v, log_x));
    }
    for v in [y0, y1] {
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, PAD - 4.0, py(v) + 4.0, axis_label(v, log_y));
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, W / 2.0, H - 16.0, escape(&axis_title(&series.x_label, log_x)));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(&axis_title(&series.y_label, log_y))
    );
    let _ = writeln!(s, r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(&series.name));
    let path: Vec<String> = sx.iter().zip(&sy).map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
    let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="2"/>"#, path.join(" "));
    for (&x, &y) in sx.iter().zip(&sy) {
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="steelblue"/>"#, px(x), py(y));
    }
    s.push_str("</svg>\n");
    Some(s)
}

fn axis_title(label: &str, log: bool) -> String {
    if log {
        format!("{label} (log scale)")
    } else {
        label.to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn too_few_points() {
        let mut s = Series::new("a", "x", "y");
        assert!(render_svg(&s).is_none());
        s.push(1.0, 2.0);
        assert!(render_svg(&s).is_none());
        assert_eq!(s.to_csv(), "x,y\n1,2\n");
    }

    #[test]
    fn renders_points() {
        let mut s = Series::new("decay <n>", "n", "bound").log_log();
        for (x, y) in [(2.0, 1e-3), (4.0, 5e-4), (8.0, 2e-4)] {
            s.push(x, y);
        }
        let svg = render_svg(&s).unwrap();
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<circle").count(), 3);
        assert!(svg.contains("decay &lt;n&gt;"));
        s.points[0].1 = 0.0;
        assert!(render_svg(&s).unwrap().contains("bound</text>"));
    }
}
