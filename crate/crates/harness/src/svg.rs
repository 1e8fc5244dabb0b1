//! Minimal SVG charts: line, bar and heatmap.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(s: &mut String, title: &str) {
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, escape(title));
}

fn extent(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        let pad = if lo.abs() > 0.0 { lo.abs() * 0.1 } else { 1.0 };
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

fn axes(s: &mut String, (x0, x1): (f64, f64), (y0, y1): (f64, f64), xlabel: &str, ylabel: &str) {
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let (x, y) = (LEFT + f * pw, TOP + ph - f * ph);
        let _ = writeln!(s, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, TOP + ph + 16.0, tick(x0 + f * (x1 - x0)));
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, LEFT - 6.0, y + 4.0, tick(y0 + f * (y1 - y0)));
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, H - 12.0, escape(xlabel));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(ylabel)
    );
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.2}")
    }
}

fn legend(s: &mut String, labels: &[&str]) {
    for (i, l) in labels.iter().enumerate() {
        let y = TOP + 10.0 + 18.0 * i as f64;
        let x = W - RIGHT + 12.0;
        let _ = writeln!(s, r#"<rect x="{x}" y="{:.1}" width="12" height="12" fill="{}"/>"#, y - 10.0, PALETTE[i % PALETTE.len()]);
        let _ = writeln!(s, r#"<text x="{}" y="{y:.1}">{}</text>"#, x + 18.0, escape(l));
    }
}

pub fn line_chart(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let mut s = String::new();
    header(&mut s, title);
    let xs = extent(series.iter().flat_map(|c| c.points.iter().map(|p| p.0)));
    let ys = extent(series.iter().flat_map(|c| c.points.iter().map(|p| p.1)));
    axes(&mut s, xs, ys, xlabel, ylabel);
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let map = |(x, y): (f64, f64)| (LEFT + (x - xs.0) / (xs.1 - xs.0) * pw, TOP + ph - (y - ys.0) / (ys.1 - ys.0) * ph);
    for (i, c) in series.iter().enumerate() {
        let pts: Vec<String> = c
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&p| {
                let (x, y) = map(p);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let colour = PALETTE[i % PALETTE.len()];
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
    }
    legend(&mut s, &series.iter().map(|c| c.label.as_str()).collect::<Vec<_>>());
    s.push_str("</svg>\n");
    s
}

pub fn bar_chart(title: &str, ylabel: &str, bars: &[(String, f64)]) -> String {
    let mut s = String::new();
    header(&mut s, title);
    let top = bars.iter().map(|b| b.1).filter(|v| v.is_finite()).fold(0.0, f64::max);
    let ys = (0.0, if top > 0.0 { top * 1.05 } else { 1.0 });
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let y = TOP + ph - f * ph;
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, LEFT - 6.0, y + 4.0, tick(f * ys.1));
    }
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(ylabel)
    );
    let slot = pw / bars.len().max(1) as f64;
    for (i, (label, v)) in bars.iter().enumerate() {
        let h = if v.is_finite() { v / ys.1 * ph } else { 0.0 };
        let x = LEFT + i as f64 * slot + 0.15 * slot;
        let _ = writeln!(
            s,
            r#"<rect x="{x:.2}" y="{:.2}" width="{:.2}" height="{h:.2}" fill="{}"/>"#,
            TOP + ph - h,
            0.7 * slot,
            PALETTE[i % PALETTE.len()]
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.1}" text-anchor="middle" font-size="10">{}</text>"#,
            x + 0.35 * slot,
            TOP + ph + 14.0,
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// `values[y * nx + x]`, drawn with y increasing upward.
pub fn heatmap(title: &str, xlabel: &str, ylabel: &str, nx: usize, ny: usize, values: &[f64]) -> String {
    let mut s = String::new();
    header(&mut s, title);
    let (lo, hi) = extent(values.iter().copied());
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let (cw, chh) = (pw / nx.max(1) as f64, ph / ny.max(1) as f64);
    for y in 0..ny {
        for x in 0..nx {
            let t = ((values[y * nx + x] - lo) / (hi - lo)).clamp(0.0, 1.0);
            let (r, g, b) = (255.0 * t, 80.0 + 120.0 * (1.0 - (2.0 * t - 1.0).abs()), 255.0 * (1.0 - t));
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="rgb({:.0},{:.0},{:.0})"/>"#,
                LEFT + x as f64 * cw,
                TOP + ph - (y + 1) as f64 * chh,
                cw + 0.05,
                chh + 0.05,
                r,
                g,
                b
            );
        }
    }
    axes(&mut s, (0.0, nx as f64 - 1.0), (0.0, ny as f64 - 1.0), xlabel, ylabel);
    let x = W - RIGHT + 12.0;
    let _ = writeln!(s, r#"<text x="{x}" y="{}">max {}</text>"#, TOP + 10.0, tick(hi));
    let _ = writeln!(s, r#"<text x="{x}" y="{}">min {}</text>"#, TOP + ph, tick(lo));
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn charts_are_well_formed() {
        let line = line_chart("t", "x", "y", &[Series { label: "a<b".into(), points: vec![(0.0, 1.0), (1.0, 2.0)] }]);
        assert!(line.starts_with("<svg") && line.ends_with("</svg>\n"));
        assert!(line.contains("a&lt;b"));
        let bars = bar_chart("t", "y", &[("p".into(), 1.0), ("q".into(), 0.0)]);
        assert_eq!(bars.matches("<rect").count(), 2 + 2);
        let heat = heatmap("t", "x", "w", 2, 2, &[0.0, 1.0, 2.0, 3.0]);
        assert!(heat.contains("rgb(255,80,0)"));
    }
}
