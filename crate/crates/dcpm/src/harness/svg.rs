//! Minimal dependency-free SVG line charts. CSV files carry the
//! authoritative numbers; these plots exist for quick visual checks.

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 170.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;

const PALETTE: [&str; 8] =
    ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"];

fn nice_number(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if a >= 1000.0 {
        format!("{:.0}", v)
    } else if a >= 10.0 {
        format!("{:.1}", v)
    } else {
        format!("{:.2}", v)
    }
}

/// Renders one polyline per series with labeled axes, ticks and a legend.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let all: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().copied()).collect();
    let (mut x0, mut x1) = all
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(x, _)| (lo.min(x), hi.max(x)));
    let (mut y0, mut y1) = all
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, y)| (lo.min(y), hi.max(y)));
    if !x0.is_finite() {
        x0 = 0.0;
        x1 = 1.0;
    }
    if !y0.is_finite() {
        y0 = 0.0;
        y1 = 1.0;
    }
    if x0 == x1 {
        x1 = x0 + 1.0;
    }
    if y0 == y1 {
        y1 = y0 + 1.0;
    }
    // A little headroom on the value axis.
    let pad = (y1 - y0) * 0.05;
    y0 -= pad;
    y1 += pad;

    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let sx = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * plot_w;
    let sy = |y: f64| MARGIN_T + plot_h - (y - y0) / (y1 - y0) * plot_h;

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {} {}\" font-family=\"sans-serif\" font-size=\"13\">\n",
        WIDTH, HEIGHT
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"16\">{}</text>\n",
        MARGIN_L + plot_w / 2.0,
        title
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

    // Ticks: five per axis.
    for k in 0..=4 {
        let fx = x0 + (x1 - x0) * k as f64 / 4.0;
        let px = sx(fx);
        out.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{}\" x2=\"{:.2}\" y2=\"{}\" stroke=\"black\"/>\n",
            px,
            MARGIN_T + plot_h,
            px,
            MARGIN_T + plot_h + 5.0
        ));
        out.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            px,
            MARGIN_T + plot_h + 20.0,
            nice_number(fx)
        ));

        let fy = y0 + (y1 - y0) * k as f64 / 4.0;
        let py = sy(fy);
        out.push_str(&format!(
            "<line x1=\"{}\" y1=\"{:.2}\" x2=\"{}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
            MARGIN_L - 5.0,
            py,
            MARGIN_L,
            py
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{:.2}\" text-anchor=\"end\" dominant-baseline=\"middle\">{}</text>\n",
            MARGIN_L - 8.0,
            py,
            nice_number(fy)
        ));
    }

    // Axis labels.
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
        MARGIN_L + plot_w / 2.0,
        HEIGHT - 10.0,
        x_label
    ));
    out.push_str(&format!(
        "<text x=\"18\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {})\">{}</text>\n",
        MARGIN_T + plot_h / 2.0,
        MARGIN_T + plot_h / 2.0,
        y_label
    ));

    // Series polylines and legend.
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut pts: Vec<(f64, f64)> = s.points.clone();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let path: Vec<String> =
            pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        out.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"2\" points=\"{}\"/>\n",
            color,
            path.join(" ")
        ));
        for &(x, y) in &pts {
            out.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{}\"/>\n",
                sx(x),
                sy(y),
                color
            ));
        }
        let ly = MARGIN_T + 18.0 * i as f64;
        out.push_str(&format!(
            "<rect x=\"{}\" y=\"{:.2}\" width=\"12\" height=\"12\" fill=\"{}\"/>\n",
            WIDTH - MARGIN_R + 10.0,
            ly,
            color
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{:.2}\">{}</text>\n",
            WIDTH - MARGIN_R + 28.0,
            ly + 11.0,
            s.label
        ));
    }

    out.push_str("</svg>\n");
    out
}
