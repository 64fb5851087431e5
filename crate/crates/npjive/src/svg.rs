//! Minimal hand-emitted SVG line charts (metric vs K, one polyline per
//! estimator). No plotting dependency; output is plain SVG 1.1.

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 170.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 55.0;

const COLORS: [&str; 8] =
    ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"];

/// Render series of (x, y) points as a line chart. Non-finite y values are
/// skipped. Returns the SVG document as a string.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|(_, s)| s.iter().cloned())
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .collect();
    let (mut x_lo, mut x_hi) = bounds(pts.iter().map(|p| p.0));
    let (mut y_lo, mut y_hi) = bounds(pts.iter().map(|p| p.1));
    if x_lo == x_hi {
        x_lo -= 1.0;
        x_hi += 1.0;
    }
    if y_lo == y_hi {
        y_lo -= 1.0;
        y_hi += 1.0;
    }
    let pad = 0.05 * (y_hi - y_lo);
    y_lo -= pad;
    y_hi += pad;
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let sx = |x: f64| MARGIN_L + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let sy = |y: f64| MARGIN_T + (1.0 - (y - y_lo) / (y_hi - y_lo)) * plot_h;

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    out.push_str(&format!(
        "<text x=\"{}\" y=\"22\" font-family=\"sans-serif\" font-size=\"15\" text-anchor=\"middle\">{}</text>\n",
        MARGIN_L + plot_w / 2.0,
        escape(title)
    ));
    // Axes.
    out.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        MARGIN_L,
        MARGIN_T + plot_h,
        MARGIN_L + plot_w,
        MARGIN_T + plot_h
    ));
    out.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        MARGIN_L, MARGIN_T, MARGIN_L, MARGIN_T + plot_h
    ));
    // Ticks.
    for i in 0..=4 {
        let fx = x_lo + (x_hi - x_lo) * i as f64 / 4.0;
        let fy = y_lo + (y_hi - y_lo) * i as f64 / 4.0;
        out.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
            sx(fx),
            MARGIN_T + plot_h + 18.0,
            fmt_tick(fx)
        ));
        out.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
            MARGIN_L - 6.0,
            sy(fy) + 4.0,
            fmt_tick(fy)
        ));
        out.push_str(&format!(
            "<line x1=\"{}\" y1=\"{:.1}\" x2=\"{}\" y2=\"{:.1}\" stroke=\"#dddddd\"/>\n",
            MARGIN_L,
            sy(fy),
            MARGIN_L + plot_w,
            sy(fy)
        ));
    }
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
        MARGIN_L + plot_w / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    ));
    out.push_str(&format!(
        "<text x=\"16\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
        MARGIN_T + plot_h / 2.0,
        MARGIN_T + plot_h / 2.0,
        escape(y_label)
    ));
    // Series.
    for (si, (name, points)) in series.iter().enumerate() {
        let color = COLORS[si % COLORS.len()];
        let path: Vec<String> = points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        if path.len() > 1 {
            out.push_str(&format!(
                "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\" points=\"{}\"/>\n",
                path.join(" ")
            ));
        }
        for point in &path {
            let mut it = point.split(',');
            let (x, y) = (it.next().unwrap(), it.next().unwrap());
            out.push_str(&format!("<circle cx=\"{x}\" cy=\"{y}\" r=\"2.6\" fill=\"{color}\"/>\n"));
        }
        let ly = MARGIN_T + 16.0 * si as f64;
        out.push_str(&format!(
            "<rect x=\"{}\" y=\"{:.1}\" width=\"12\" height=\"3\" fill=\"{color}\"/>\n",
            MARGIN_L + plot_w + 12.0,
            ly
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
            MARGIN_L + plot_w + 30.0,
            ly + 5.0,
            escape(name)
        ));
    }
    out.push_str("</svg>\n");
    out
}

fn bounds<I: Iterator<Item = f64>>(values: I) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || !hi.is_finite() {
        (0.0, 1.0)
    } else {
        (lo, hi)
    }
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1000.0 || v.abs() < 0.01 {
        format!("{v:.1e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_contains_series() {
        let svg = line_chart(
            "coverage vs K",
            "K",
            "coverage",
            &[
                ("crossfold".into(), vec![(100.0, 0.95), (200.0, 0.94)]),
                ("2sls".into(), vec![(100.0, 0.6), (200.0, 0.3)]),
            ],
        );
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("polyline"));
        assert!(svg.contains("crossfold"));
        assert!(svg.ends_with("</svg>\n"));
    }

    #[test]
    fn degenerate_ranges_do_not_panic() {
        let svg = line_chart("t", "x", "y", &[("s".into(), vec![(1.0, 2.0)])]);
        assert!(svg.contains("circle"));
    }
}
