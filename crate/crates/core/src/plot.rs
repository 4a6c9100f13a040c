//! Minimal static SVG charts. Output is plain text with fixed number
//! formatting so identical data gives identical files.

use std::fmt::Write;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

pub fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Canvas {
    out: String,
}

impl Canvas {
    fn new(width: f64, height: f64) -> Self {
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
        Self { out }
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, s: &str) {
        let _ = writeln!(
            self.out,
            r#"<text x="{x:.2}" y="{y:.2}" text-anchor="{anchor}">{}</text>"#,
            escape(s)
        );
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, width: f64) {
        let _ = writeln!(
            self.out,
            r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{stroke}" stroke-width="{width:.2}"/>"#
        );
    }

    fn circle(&mut self, x: f64, y: f64, r: f64, fill: &str) {
        let _ = writeln!(
            self.out,
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="{r:.2}" fill="{fill}" fill-opacity="0.75"/>"#
        );
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str) {
        let _ = writeln!(
            self.out,
            r#"<rect x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{h:.2}" fill="{fill}"/>"#
        );
    }

    fn polyline(&mut self, pts: &[(f64, f64)], stroke: &str, width: f64) {
        if pts.len() < 2 {
            return;
        }
        let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let _ = writeln!(
            self.out,
            r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="{width:.2}"/>"#,
            coords.join(" ")
        );
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

/// Chart shown when there is nothing to plot.
pub fn placeholder(title: &str) -> String {
    let mut c = Canvas::new(480.0, 120.0);
    c.text(240.0, 50.0, "middle", title);
    c.text(240.0, 80.0, "middle", "no data");
    c.finish()
}

/// Rounds an axis maximum up to 1, 2 or 5 times a power of ten.
fn nice_ceiling(v: f64) -> f64 {
    if !(v > 0.0) {
        return 1.0;
    }
    let p = 10f64.powf(v.log10().floor());
    for m in [1.0, 2.0, 5.0, 10.0] {
        if v <= m * p * (1.0 + 1e-12) {
            return m * p;
        }
    }
    10.0 * p
}

pub struct ScatterSeries<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
    /// Straight line `y = intercept + slope * x`, drawn over the x range.
    pub fit: Option<(f64, f64)>,
}

pub struct Panel<'a> {
    pub x_label: &'a str,
    pub series: Vec<ScatterSeries<'a>>,
}

/// Side-by-side scatter panels sharing a logarithmic y axis.
pub fn log_scatter(title: &str, y_label: &str, panels: &[Panel<'_>]) -> String {
    let ys: Vec<f64> = panels
        .iter()
        .flat_map(|p| p.series.iter())
        .flat_map(|s| s.points.iter().map(|p| p.1))
        .filter(|y| *y > 0.0)
        .collect();
    if ys.is_empty() || panels.is_empty() {
        return placeholder(title);
    }
    let y_floor = 1e-4;
    let lo = ys.iter().copied().fold(f64::INFINITY, f64::min).max(y_floor);
    let hi = ys.iter().copied().fold(0.0, f64::max).max(lo * 10.0);
    let (dec_lo, dec_hi) = (lo.log10().floor(), hi.log10().ceil());

    let (pw, ph, ml, mt, mb, gap) = (360.0, 260.0, 70.0, 40.0, 50.0, 40.0);
    let width = ml + panels.len() as f64 * (pw + gap) + 160.0;
    let height = mt + ph + mb;
    let mut c = Canvas::new(width, height);
    c.text(width / 2.0, 20.0, "middle", title);
    let y_of = |y: f64| mt + ph - (y.max(y_floor).log10() - dec_lo) / (dec_hi - dec_lo) * ph;

    for (pi, panel) in panels.iter().enumerate() {
        let x0 = ml + pi as f64 * (pw + gap);
        let xmax = nice_ceiling(
            panel
                .series
                .iter()
                .flat_map(|s| s.points.iter().map(|p| p.0))
                .fold(0.0, f64::max),
        );
        let x_of = |x: f64| x0 + x / xmax * pw;
        c.line(x0, mt + ph, x0 + pw, mt + ph, "black", 1.0);
        c.line(x0, mt, x0, mt + ph, "black", 1.0);
        for k in 0..=4 {
            let xv = xmax * k as f64 / 4.0;
            c.line(x_of(xv), mt + ph, x_of(xv), mt + ph + 4.0, "black", 1.0);
            c.text(x_of(xv), mt + ph + 18.0, "middle", &format!("{xv}"));
        }
        let mut d = dec_lo;
        while d <= dec_hi + 0.5 {
            let y = y_of(10f64.powf(d));
            c.line(x0 - 4.0, y, x0 + pw, y, "#dddddd", 0.5);
            c.text(x0 - 6.0, y + 4.0, "end", &format!("1e{d:.0}"));
            d += 1.0;
        }
        c.text(x0 + pw / 2.0, mt + ph + 38.0, "middle", panel.x_label);
        if pi == 0 {
            c.text(16.0, mt + ph / 2.0, "middle", y_label);
        }
        for (si, s) in panel.series.iter().enumerate() {
            for (x, y) in &s.points {
                c.circle(x_of(*x), y_of(*y), 3.0, color(si));
            }
            if let Some((b, a)) = s.fit {
                let pts: Vec<(f64, f64)> = (0..=50)
                    .map(|k| {
                        let x = xmax * k as f64 / 50.0;
                        (x_of(x), y_of(b + a * x))
                    })
                    .collect();
                c.polyline(&pts, color(si), 1.5);
            }
        }
    }
    if let Some(first) = panels.first() {
        let lx = ml + panels.len() as f64 * (pw + gap);
        for (si, s) in first.series.iter().enumerate() {
            let y = mt + 14.0 + si as f64 * 18.0;
            c.rect(lx, y - 9.0, 10.0, 10.0, color(si));
            c.text(lx + 16.0, y, "start", s.label);
        }
    }
    c.finish()
}

/// Grouped bars: one group per category, one bar per series.
pub fn grouped_bars(title: &str, y_label: &str, categories: &[String], series: &[(String, Vec<Option<f64>>)]) -> String {
    let vmax = series
        .iter()
        .flat_map(|(_, v)| v.iter().flatten())
        .copied()
        .fold(0.0, f64::max);
    if categories.is_empty() || series.is_empty() {
        return placeholder(title);
    }
    let ymax = nice_ceiling(vmax);
    let (ml, mt, mb, ph) = (70.0, 40.0, 70.0, 260.0);
    let group_w = (series.len() as f64 * 14.0 + 12.0).max(30.0);
    let pw = categories.len() as f64 * group_w;
    let width = ml + pw + 180.0;
    let mut c = Canvas::new(width, mt + ph + mb);
    c.text(width / 2.0, 20.0, "middle", title);
    let y_of = |v: f64| mt + ph - v / ymax * ph;
    c.line(ml, mt + ph, ml + pw, mt + ph, "black", 1.0);
    c.line(ml, mt, ml, mt + ph, "black", 1.0);
    for k in 0..=4 {
        let v = ymax * k as f64 / 4.0;
        c.line(ml - 4.0, y_of(v), ml + pw, y_of(v), "#dddddd", 0.5);
        c.text(ml - 6.0, y_of(v) + 4.0, "end", &format!("{v}"));
    }
    c.text(16.0, mt + ph / 2.0, "middle", y_label);
    for (ci, cat) in categories.iter().enumerate() {
        let gx = ml + ci as f64 * group_w + 6.0;
        for (si, (_, vals)) in series.iter().enumerate() {
            if let Some(Some(v)) = vals.get(ci) {
                let y = y_of(*v);
                c.rect(gx + si as f64 * 14.0, y, 12.0, mt + ph - y, color(si));
            }
        }
        c.text(ml + (ci as f64 + 0.5) * group_w, mt + ph + 18.0, "middle", cat);
    }
    for (si, (label, _)) in series.iter().enumerate() {
        let y = mt + 14.0 + si as f64 * 18.0;
        c.rect(ml + pw + 20.0, y - 9.0, 10.0, 10.0, color(si));
        c.text(ml + pw + 36.0, y, "start", label);
    }
    c.finish()
}

/// Plan view of tracks and labelled points, equal axis scaling.
pub fn plan_view(title: &str, tracks: &[(String, Vec<(f64, f64)>)], marks: &[(String, f64, f64)]) -> String {
    let all: Vec<(f64, f64)> = tracks
        .iter()
        .flat_map(|(_, p)| p.iter().copied())
        .chain(marks.iter().map(|(_, x, y)| (*x, *y)))
        .collect();
    if all.is_empty() {
        return placeholder(title);
    }
    let (xmin, xmax) = all.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (ymin, ymax) = all.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
    let span = (xmax - xmin).max(ymax - ymin).max(1.0);
    let (size, m) = (560.0, 40.0);
    let sx = |x: f64| m + (x - xmin) / span * size;
    let sy = |y: f64| m + size - (y - ymin) / span * size;
    let mut c = Canvas::new(size + 2.0 * m + 180.0, size + 2.0 * m);
    c.text((size + 2.0 * m) / 2.0, 20.0, "middle", title);
    for (i, (label, pts)) in tracks.iter().enumerate() {
        // Thin long tracks so the file stays small.
        let stride = (pts.len() / 2000).max(1);
        let thinned: Vec<(f64, f64)> = pts.iter().step_by(stride).map(|(x, y)| (sx(*x), sy(*y))).collect();
        c.polyline(&thinned, color(i), 1.0);
        let y = m + 14.0 + i as f64 * 18.0;
        c.rect(size + 2.0 * m, y - 9.0, 10.0, 10.0, color(i));
        c.text(size + 2.0 * m + 16.0, y, "start", label);
    }
    for (id, x, y) in marks {
        c.circle(sx(*x), sy(*y), 4.0, "black");
        c.text(sx(*x) + 6.0, sy(*y) - 6.0, "start", id);
    }
    c.text(m, size + 2.0 * m - 8.0, "start", &format!("grid span {span:.1} m"));
    c.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nice_ceilings() {
        assert_eq!(nice_ceiling(0.0), 1.0);
        assert_eq!(nice_ceiling(0.7), 1.0);
        assert_eq!(nice_ceiling(1.3), 2.0);
        assert_eq!(nice_ceiling(3.0), 5.0);
        assert_eq!(nice_ceiling(120.0), 200.0);
    }

    #[test]
    fn empty_inputs_give_placeholders() {
        assert!(log_scatter("t", "y", &[]).contains("no data"));
        assert!(grouped_bars("t", "y", &[], &[]).contains("no data"));
        assert!(plan_view("t", &[], &[]).contains("no data"));
    }

    #[test]
    fn labels_are_escaped_and_output_is_stable() {
        let series = vec![("a<b".to_string(), vec![Some(0.5), None])];
        let cats = vec!["CP&1".to_string(), "CP2".to_string()];
        let svg = grouped_bars("x", "y", &cats, &series);
        assert!(svg.contains("a&lt;b") && svg.contains("CP&amp;1"));
        assert_eq!(svg, grouped_bars("x", "y", &cats, &series));
        assert!(svg.ends_with("</svg>\n"));
    }
}
