//! Minimal static SVG line charts.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const PANEL: f64 = 240.0;
const MARGIN: f64 = 50.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

struct Frame {
    top: f64,
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(top: f64, xs: &[f64], ys: impl Iterator<Item = f64>) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in ys.filter(|v| v.is_finite()) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 {
            (lo, hi) = (lo - 0.5, hi + 0.5);
        }
        let xlo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let xhi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self {
            top,
            x: (xlo, if xhi > xlo { xhi } else { xlo + 1.0 }),
            y: (lo, hi),
        }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        self.top + PANEL - (y - self.y.0) / (self.y.1 - self.y.0) * PANEL
    }

    fn axes(&self, out: &mut String, ylabel: &str) {
        let (l, r) = (MARGIN, WIDTH - MARGIN);
        let (t, b) = (self.top, self.top + PANEL);
        let _ = writeln!(
            out,
            r##"<rect x="{l}" y="{t}" width="{}" height="{PANEL}" fill="none" stroke="#444"/>"##,
            r - l
        );
        let _ = writeln!(out, r#"<text x="{l}" y="{}" font-size="12">{ylabel}</text>"#, t - 6.0);
        let _ = writeln!(out, r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{:.3}</text>"#, l - 4.0, t + 10.0, self.y.1);
        let _ = writeln!(out, r#"<text x="{}" y="{b}" font-size="10" text-anchor="end">{:.3}</text>"#, l - 4.0, self.y.0);
        let _ = writeln!(out, r#"<text x="{l}" y="{}" font-size="10">{:.2}</text>"#, b + 14.0, self.x.0);
        let _ = writeln!(out, r#"<text x="{r}" y="{}" font-size="10" text-anchor="end">{:.2}</text>"#, b + 14.0, self.x.1);
    }

    fn polyline(&self, out: &mut String, xs: &[f64], ys: &[f64], color: &str) {
        let pts: Vec<String> = xs
            .iter()
            .zip(ys)
            .filter(|(_, y)| y.is_finite())
            .map(|(x, y)| format!("{:.2},{:.2}", self.px(*x), self.py(*y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
    }

    fn vline(&self, out: &mut String, x: f64) {
        let px = self.px(x);
        let _ = writeln!(
            out,
            r##"<line x1="{px:.2}" y1="{}" x2="{px:.2}" y2="{}" stroke="#888" stroke-dasharray="4 3"/>"##,
            self.top,
            self.top + PANEL
        );
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Coefficient paths (top) and cross-validation error (bottom) against
/// log10(lambda), with the selected lambda marked.
pub fn path_plot(lambdas: &[f64], series: &[(String, Vec<f64>)], cve: &[f64], selected: f64) -> String {
    let xs: Vec<f64> = lambdas.iter().map(|l| l.log10()).collect();
    let height = 2.0 * PANEL + 3.0 * MARGIN;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif">"#
    );
    let coef = Frame::new(MARGIN, &xs, series.iter().flat_map(|s| s.1.iter().copied()).chain([0.0]));
    coef.axes(&mut out, "standardized coefficient");
    for (k, (name, ys)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        coef.polyline(&mut out, &xs, ys, color);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="10" fill="{color}">{}</text>"#,
            WIDTH - MARGIN + 4.0,
            MARGIN + 12.0 * (k as f64 + 1.0),
            escape(name)
        );
    }
    coef.vline(&mut out, selected.log10());

    let err = Frame::new(2.0 * MARGIN + PANEL, &xs, cve.iter().copied());
    err.axes(&mut out, "cross-validation error");
    err.polyline(&mut out, &xs, cve, "#000");
    err.vline(&mut out, selected.log10());
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">log10(lambda)</text>"#,
        WIDTH / 2.0,
        height - 8.0
    );
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plot_has_one_polyline_per_series_plus_cve() {
        let s = path_plot(
            &[1.0, 0.1, 0.01],
            &[("a".into(), vec![0.0, 0.5, 0.9]), ("b<c".into(), vec![0.0, 0.0, -0.2])],
            &[0.3, 0.2, 0.25],
            0.1,
        );
        assert!(s.starts_with("<svg"));
        assert!(s.trim_end().ends_with("</svg>"));
        assert_eq!(s.matches("<polyline").count(), 3);
        assert!(s.contains("b&lt;c"));
    }
}
