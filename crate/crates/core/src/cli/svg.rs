//! Minimal SVG figures: scatter markers, polylines and log-scaled heat maps
//! over one pair of axes.

use std::fmt::Write;

#[derive(Clone, Debug, PartialEq)]
pub enum Layer {
    /// One `<circle class="marker">` per point.
    Points { label: String, points: Vec<(f64, f64)> },
    /// One `<polyline class="curve">` per line.
    Lines { label: String, lines: Vec<Vec<(f64, f64)>> },
    /// Row-major values on the tensor grid `ys x xs`, colored by `log10`.
    Heatmap { label: String, xs: Vec<f64>, ys: Vec<f64>, values: Vec<Option<f64>> },
}

impl Layer {
    fn coordinates(&self) -> Vec<(f64, f64)> {
        match self {
            Layer::Points { points, .. } => points.clone(),
            Layer::Lines { lines, .. } => lines.iter().flatten().copied().collect(),
            Layer::Heatmap { xs, ys, values, .. } => {
                if values.iter().any(|v| v.is_some_and(|v| v > 0.0 && v.is_finite())) {
                    let (x0, x1) = (xs.first().copied(), xs.last().copied());
                    let (y0, y1) = (ys.first().copied(), ys.last().copied());
                    [(x0, y0), (x1, y1)].into_iter().filter_map(|(x, y)| Some((x?, y?))).collect()
                } else {
                    vec![]
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Dataset {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub layers: Vec<Layer>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Style {
    pub width: f64,
    pub height: f64,
    pub margin: f64,
    pub marker_radius: f64,
    pub palette: Vec<String>,
}

impl Default for Style {
    fn default() -> Self {
        Self {
            width: 640.0,
            height: 480.0,
            margin: 60.0,
            marker_radius: 2.5,
            palette: ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    }
}

/// Position of `value` on a log scale between `lo` and `hi`, clamped to
/// `[0, 1]`. Non-positive values map to 0.
pub fn log_position(value: f64, lo: f64, hi: f64) -> f64 {
    if !(value > 0.0) {
        return 0.0;
    }
    let (a, b) = (lo.max(f64::MIN_POSITIVE).log10(), hi.max(f64::MIN_POSITIVE).log10());
    if b <= a {
        return 0.5;
    }
    ((value.log10() - a) / (b - a)).clamp(0.0, 1.0)
}

/// Dark indigo through magenta and orange to pale yellow. Every channel is
/// non-decreasing along the ramp, so lightness is monotone even after rounding.
const RAMP: [(u8, u8, u8); 5] = [(20, 20, 60), (70, 40, 140), (190, 70, 140), (250, 170, 140), (255, 250, 200)];

pub fn ramp_color(t: f64) -> (u8, u8, u8) {
    let t = t.clamp(0.0, 1.0) * (RAMP.len() - 1) as f64;
    let i = (t.floor() as usize).min(RAMP.len() - 2);
    let f = t - i as f64;
    let mix = |a: u8, b: u8| (a as f64 + f * (b as f64 - a as f64)).round() as u8;
    let (a, b) = (RAMP[i], RAMP[i + 1]);
    (mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

pub fn log_color(value: f64, lo: f64, hi: f64) -> (u8, u8, u8) {
    ramp_color(log_position(value, lo, hi))
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    style: Style,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        let m = self.style.margin;
        m + (x - self.x0) / (self.x1 - self.x0) * (self.style.width - 2.0 * m)
    }

    fn py(&self, y: f64) -> f64 {
        let m = self.style.margin;
        self.style.height - m - (y - self.y0) / (self.y1 - self.y0) * (self.style.height - 2.0 * m)
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (-1.0, 1.0);
    }
    if hi - lo <= 1e-12 * (1.0 + lo.abs().max(hi.abs())) {
        let d = 0.5 * (1.0 + lo.abs());
        return (lo - d, hi + d);
    }
    let p = 0.05 * (hi - lo);
    (lo - p, hi + p)
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Renders the dataset. Pure function of its inputs; empty datasets give an
/// empty frame with a warning annotation.
pub fn export_svg(data: &Dataset, style: &Style) -> String {
    let coords: Vec<(f64, f64)> = data
        .layers
        .iter()
        .flat_map(|l| l.coordinates())
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .collect();
    let fold = |f: fn(&(f64, f64)) -> f64| {
        coords.iter().map(f).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
    };
    let (x0, x1) = padded(fold(|p| p.0).0, fold(|p| p.0).1);
    let (y0, y1) = padded(fold(|p| p.1).0, fold(|p| p.1).1);
    let fr = Frame { x0, x1, y0, y1, style: style.clone() };
    let (w, h, m) = (style.width, style.height, style.margin);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect class="background" x="0" y="0" width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text class="title" x="{:.1}" y="{:.1}" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, m / 2.0, escape(&data.title));

    // clip everything drawn inside the axes
    let _ = writeln!(
        s,
        r#"<defs><clipPath id="plot"><rect x="{m}" y="{m}" width="{:.1}" height="{:.1}"/></clipPath></defs>"#,
        w - 2.0 * m,
        h - 2.0 * m
    );
    let _ = writeln!(s, r#"<g clip-path="url(#plot)">"#);
    let mut color_index = 0;
    let mut legend = Vec::new();
    for layer in &data.layers {
        match layer {
            Layer::Heatmap { xs, ys, values, label } => {
                let finite: Vec<f64> = values.iter().flatten().copied().filter(|v| *v > 0.0 && v.is_finite()).collect();
                let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let half = |v: &[f64], i: usize| {
                    let a = if i > 0 { 0.5 * (v[i] - v[i - 1]) } else { 0.5 * (v.get(1).copied().unwrap_or(v[0] + 1.0) - v[0]) };
                    let b = if i + 1 < v.len() { 0.5 * (v[i + 1] - v[i]) } else { a };
                    (v[i] - a, v[i] + b)
                };
                let _ = writeln!(s, r#"<g class="heatmap">"#);
                for (j, _) in ys.iter().enumerate() {
                    for (i, _) in xs.iter().enumerate() {
                        let Some(v) = values.get(j * xs.len() + i).copied().flatten() else { continue };
                        let (r, g, b) = log_color(v, lo, hi);
                        let (xa, xb) = half(xs, i);
                        let (ya, yb) = half(ys, j);
                        let _ = writeln!(
                            s,
                            r#"<rect class="cell" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="rgb({r},{g},{b})"/>"#,
                            fr.px(xa),
                            fr.py(yb),
                            fr.px(xb) - fr.px(xa),
                            fr.py(ya) - fr.py(yb)
                        );
                    }
                }
                let _ = writeln!(s, "</g>");
                if finite.is_empty() {
                    continue;
                }
                legend.push((format!("{label} (log10 {:.2} .. {:.2})", lo.log10(), hi.log10()), "url(#ramp)".to_string()));
            }
            Layer::Points { label, points } => {
                let color = &style.palette[color_index % style.palette.len()];
                color_index += 1;
                let _ = writeln!(s, r#"<g class="points" fill="{color}">"#);
                for &(x, y) in points.iter().filter(|(x, y)| x.is_finite() && y.is_finite()) {
                    let _ = writeln!(s, r#"<circle class="marker" cx="{:.2}" cy="{:.2}" r="{}"/>"#, fr.px(x), fr.py(y), style.marker_radius);
                }
                let _ = writeln!(s, "</g>");
                legend.push((label.clone(), color.clone()));
            }
            Layer::Lines { label, lines } => {
                let color = &style.palette[color_index % style.palette.len()];
                color_index += 1;
                let _ = writeln!(s, r#"<g class="lines" fill="none" stroke="{color}" stroke-width="1.2">"#);
                for line in lines {
                    let pts: Vec<String> = line
                        .iter()
                        .filter(|(x, y)| x.is_finite() && y.is_finite())
                        .map(|&(x, y)| format!("{:.2},{:.2}", fr.px(x), fr.py(y)))
                        .collect();
                    if pts.len() >= 2 {
                        let _ = writeln!(s, r#"<polyline class="curve" points="{}"/>"#, pts.join(" "));
                    }
                }
                let _ = writeln!(s, "</g>");
                legend.push((label.clone(), color.clone()));
            }
        }
    }
    let _ = writeln!(s, "</g>");

    // axes
    let _ = writeln!(s, r#"<g class="axes" stroke="black" fill="none">"#);
    let _ = writeln!(s, r#"<rect class="frame" x="{m}" y="{m}" width="{:.1}" height="{:.1}"/>"#, w - 2.0 * m, h - 2.0 * m);
    for t in ticks(x0, x1) {
        let x = fr.px(t);
        let _ = writeln!(s, r#"<line class="tick" x1="{x:.2}" y1="{:.1}" x2="{x:.2}" y2="{:.1}"/>"#, h - m, h - m + 4.0);
    }
    for t in ticks(y0, y1) {
        let y = fr.py(t);
        let _ = writeln!(s, r#"<line class="tick" x1="{:.1}" y1="{y:.2}" x2="{m}" y2="{y:.2}"/>"#, m - 4.0);
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r#"<g class="tick-labels">"#);
    for t in ticks(x0, x1) {
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.1}" text-anchor="middle">{}</text>"#, fr.px(t), h - m + 16.0, tick_label(t));
    }
    for t in ticks(y0, y1) {
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.2}" text-anchor="end">{}</text>"#, m - 6.0, fr.py(t) + 4.0, tick_label(t));
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r#"<text class="x-label" x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, w / 2.0, h - m / 4.0, escape(&data.x_label));
    let _ = writeln!(
        s,
        r#"<text class="y-label" transform="translate({:.1},{:.1}) rotate(-90)" text-anchor="middle">{}</text>"#,
        m / 4.0,
        h / 2.0,
        escape(&data.y_label)
    );

    if legend.iter().any(|(_, c)| c == "url(#ramp)") {
        let stops: String = (0..=8)
            .map(|i| {
                let (r, g, b) = ramp_color(i as f64 / 8.0);
                format!(r#"<stop offset="{}" stop-color="rgb({r},{g},{b})"/>"#, i as f64 / 8.0)
            })
            .collect();
        let _ = writeln!(s, r#"<defs><linearGradient id="ramp">{stops}</linearGradient></defs>"#);
    }
    let _ = writeln!(s, r#"<g class="legend">"#);
    for (i, (label, color)) in legend.iter().enumerate() {
        let y = m + 6.0 + 14.0 * i as f64;
        let x = w - m - 150.0;
        let _ = writeln!(s, r#"<rect class="swatch" x="{x:.1}" y="{y:.1}" width="10" height="10" fill="{color}"/>"#);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, x + 14.0, y + 9.0, escape(label));
    }
    let _ = writeln!(s, "</g>");

    if coords.is_empty() {
        let _ = writeln!(
            s,
            r#"<text class="warning" x="{:.1}" y="{:.1}" text-anchor="middle" fill="firebrick">warning: empty dataset</text>"#,
            w / 2.0,
            h / 2.0
        );
    }
    s.push_str("</svg>\n");
    s
}

fn tick_label(t: f64) -> String {
    let r = (t * 1e6).round() / 1e6;
    if r == 0.0 {
        "0".into()
    } else {
        format!("{r}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn count(svg: &str, tag: &str, class: &str) -> usize {
        let doc = roxmltree::Document::parse(svg).expect("well-formed SVG");
        doc.descendants().filter(|n| n.has_tag_name(tag) && n.attribute("class") == Some(class)).count()
    }

    #[test]
    fn one_point_one_marker() {
        let data = Dataset {
            layers: vec![Layer::Points { label: "origin".into(), points: vec![(0.0, 0.0)] }],
            ..Default::default()
        };
        let svg = export_svg(&data, &Style::default());
        assert_eq!(count(&svg, "circle", "marker"), 1);
        assert_eq!(svg.matches("<circle").count(), 1);
        assert_eq!(count(&svg, "text", "warning"), 0);
    }

    #[test]
    fn spectra_and_curves_both_render() {
        let eig: Vec<(f64, f64)> = (0..7).map(|i| (-(i as f64), 0.3 * i as f64)).collect();
        let abs = vec![vec![(-1.0, 0.0), (-2.0, 0.5), (-3.0, 1.0)], vec![(-1.0, 0.0), (-2.0, -0.5)]];
        let data = Dataset {
            title: "spectrum <R = 25>".into(),
            layers: vec![
                Layer::Points { label: "eigenvalues".into(), points: eig },
                Layer::Lines { label: "absolute spectrum".into(), lines: abs },
            ],
            ..Default::default()
        };
        let svg = export_svg(&data, &Style::default());
        assert_eq!(count(&svg, "circle", "marker"), 7);
        assert_eq!(count(&svg, "polyline", "curve"), 2);
        assert_eq!(count(&svg, "rect", "swatch"), 2);
        assert!(svg.contains("&lt;R = 25&gt;"));
    }

    #[test]
    fn empty_dataset_warns() {
        for data in [
            Dataset::default(),
            Dataset { layers: vec![Layer::Points { label: "none".into(), points: vec![] }], ..Default::default() },
        ] {
            let svg = export_svg(&data, &Style::default());
            assert_eq!(count(&svg, "text", "warning"), 1);
            assert_eq!(count(&svg, "circle", "marker"), 0);
        }
    }

    #[test]
    fn heatmap_cells_skip_missing_values() {
        let data = Dataset {
            layers: vec![Layer::Heatmap {
                label: "sigma_min".into(),
                xs: vec![0.0, 1.0, 2.0],
                ys: vec![0.0, 1.0],
                values: vec![Some(1e-8), Some(1e-4), None, Some(1.0), Some(1e-2), Some(0.1)],
            }],
            ..Default::default()
        };
        let svg = export_svg(&data, &Style::default());
        assert_eq!(count(&svg, "rect", "cell"), 5);
    }

    #[test]
    fn rendering_is_pure() {
        let data = Dataset { layers: vec![Layer::Points { label: "p".into(), points: vec![(1.0, 2.0), (3.0, -1.0)] }], ..Default::default() };
        assert_eq!(export_svg(&data, &Style::default()), export_svg(&data, &Style::default()));
    }

    fn luminance((r, g, b): (u8, u8, u8)) -> f64 {
        let lin = |c: u8| {
            let c = c as f64 / 255.0;
            if c <= 0.04045 { c / 12.92 } else { ((c + 0.055) / 1.055).powf(2.4) }
        };
        0.2126 * lin(r) + 0.7152 * lin(g) + 0.0722 * lin(b)
    }

    proptest! {
        #[test]
        fn log_colors_are_monotone(a in -12.0f64..2.0, b in -12.0f64..2.0) {
            let (lo, hi) = (1e-12, 1e2);
            let (va, vb) = (10f64.powf(a.min(b)), 10f64.powf(a.max(b)));
            prop_assert!(log_position(va, lo, hi) <= log_position(vb, lo, hi));
            prop_assert!(luminance(log_color(va, lo, hi)) <= luminance(log_color(vb, lo, hi)) + 1e-12);
        }
    }
}
