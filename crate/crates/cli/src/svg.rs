//! Standalone SVG plots built from plain strings. Output depends only on the
//! input numbers: no timestamps, ids or locale-dependent formatting.

use std::fmt::Write;

const PALETTE: [&str; 4] = ["#4c72b0", "#dd8452", "#55a868", "#c44e52"];
const FONT: &str = "font-family=\"sans-serif\" font-size=\"11\"";

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn open(w: f64, h: f64, title: &str) -> String {
    let mut s = String::new();
    writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\">"
    )
    .unwrap();
    writeln!(s, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>").unwrap();
    writeln!(
        s,
        "<text x=\"{:.1}\" y=\"18\" text-anchor=\"middle\" {FONT} font-weight=\"bold\">{}</text>",
        w / 2.0,
        escape(title)
    )
    .unwrap();
    s
}

fn legend(s: &mut String, x: f64, y: f64, names: &[&str]) {
    for (k, name) in names.iter().enumerate() {
        let yy = y + 14.0 * k as f64;
        writeln!(
            s,
            "<rect x=\"{x:.1}\" y=\"{:.1}\" width=\"10\" height=\"10\" fill=\"{}\"/>",
            yy - 9.0,
            PALETTE[k % PALETTE.len()]
        )
        .unwrap();
        writeln!(s, "<text x=\"{:.1}\" y=\"{yy:.1}\" {FONT}>{}</text>", x + 14.0, escape(name)).unwrap();
    }
}

/// Line plot of one or more series on a log10 y axis (values are floored at
/// 1e-16 so exact zeros stay plottable).
pub fn line_plot(title: &str, x_label: &str, series: &[(&str, Vec<(f64, f64)>)]) -> String {
    let (w, h) = (640.0, 360.0);
    let (left, right, top, bottom) = (70.0, 130.0, 30.0, 40.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let floor = 1e-16_f64;
    let pts: Vec<(f64, f64)> = series.iter().flat_map(|(_, p)| p.iter().copied()).collect();
    let x_max = pts.iter().map(|p| p.0).fold(1.0, f64::max);
    let ly = |v: f64| v.max(floor).log10();
    let y_lo = pts.iter().map(|p| ly(p.1)).fold(f64::INFINITY, f64::min).floor();
    let y_hi = pts.iter().map(|p| ly(p.1)).fold(f64::NEG_INFINITY, f64::max).ceil();
    let (y_lo, y_hi) = if y_hi > y_lo { (y_lo, y_hi) } else { (y_lo - 1.0, y_lo + 1.0) };
    let sx = |x: f64| left + pw * x / x_max;
    let sy = |v: f64| top + ph * (y_hi - ly(v)) / (y_hi - y_lo);

    let mut s = open(w, h, title);
    writeln!(
        s,
        "<rect x=\"{left:.1}\" y=\"{top:.1}\" width=\"{pw:.1}\" height=\"{ph:.1}\" fill=\"none\" stroke=\"#888\"/>"
    )
    .unwrap();
    let step = ((y_hi - y_lo) / 8.0).ceil().max(1.0);
    let mut e = y_lo;
    while e <= y_hi {
        let y = top + ph * (y_hi - e) / (y_hi - y_lo);
        writeln!(
            s,
            "<line x1=\"{left:.1}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#eee\"/>",
            left + pw
        )
        .unwrap();
        writeln!(s, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" {FONT}>1e{e:.0}</text>", left - 4.0, y + 4.0).unwrap();
        e += step;
    }
    writeln!(
        s,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" {FONT}>{}</text>",
        left + pw / 2.0,
        h - 10.0,
        escape(x_label)
    )
    .unwrap();
    writeln!(s, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" {FONT}>{x_max:.0}</text>", left + pw, top + ph + 14.0).unwrap();
    writeln!(s, "<text x=\"{left:.1}\" y=\"{:.1}\" {FONT}>0</text>", top + ph + 14.0).unwrap();
    for (k, (_, p)) in series.iter().enumerate() {
        if p.is_empty() {
            continue;
        }
        let path: Vec<String> = p.iter().map(|&(x, v)| format!("{:.2},{:.2}", sx(x), sy(v))).collect();
        writeln!(
            s,
            "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>",
            PALETTE[k % PALETTE.len()],
            path.join(" ")
        )
        .unwrap();
    }
    let names: Vec<&str> = series.iter().map(|(n, _)| *n).collect();
    legend(&mut s, left + pw + 12.0, top + 12.0, &names);
    s.push_str("</svg>\n");
    s
}

/// Grouped bar chart: one group per label, one bar per series.
pub fn bar_chart(title: &str, labels: &[String], series: &[(&str, Vec<f64>)]) -> String {
    let n = labels.len().max(1);
    let per = series.len().max(1);
    let group_w = (24.0 * per as f64 + 12.0).max(28.0);
    let (left, right, top, bottom) = (50.0, 130.0, 30.0, 90.0);
    let pw = group_w * n as f64;
    let (w, h) = (left + pw + right, 340.0);
    let ph = h - top - bottom;
    let y_max = series
        .iter()
        .flat_map(|(_, v)| v.iter().copied())
        .fold(0.0, f64::max)
        .max(1e-12);
    let mut s = open(w, h, title);
    for k in 0..=4 {
        let v = y_max * k as f64 / 4.0;
        let y = top + ph * (1.0 - k as f64 / 4.0);
        writeln!(s, "<line x1=\"{left:.1}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#eee\"/>", left + pw).unwrap();
        writeln!(s, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" {FONT}>{v:.3}</text>", left - 4.0, y + 4.0).unwrap();
    }
    let bar_w = (group_w - 12.0) / per as f64;
    for (g, label) in labels.iter().enumerate() {
        let gx = left + group_w * g as f64 + 6.0;
        for (k, (_, vals)) in series.iter().enumerate() {
            let v = vals.get(g).copied().unwrap_or(0.0).max(0.0);
            let bh = ph * v / y_max;
            writeln!(
                s,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{bh:.2}\" fill=\"{}\"/>",
                gx + bar_w * k as f64,
                top + ph - bh,
                bar_w,
                PALETTE[k % PALETTE.len()]
            )
            .unwrap();
        }
        let cx = gx + (group_w - 12.0) / 2.0;
        let cy = top + ph + 10.0;
        writeln!(
            s,
            "<text x=\"{cx:.1}\" y=\"{cy:.1}\" text-anchor=\"end\" transform=\"rotate(-60 {cx:.1} {cy:.1})\" {FONT}>{}</text>",
            escape(label)
        )
        .unwrap();
    }
    writeln!(
        s,
        "<line x1=\"{left:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#888\"/>",
        top + ph,
        left + pw,
        top + ph
    )
    .unwrap();
    let names: Vec<&str> = series.iter().map(|(n, _)| *n).collect();
    legend(&mut s, left + pw + 12.0, top + 12.0, &names);
    s.push_str("</svg>\n");
    s
}

/// Heatmap of a nonnegative matrix, white (0) to dark blue (max).
pub fn heatmap(title: &str, rows: &[Vec<f64>], row_axis: &str, col_axis: &str) -> String {
    let nr = rows.len().max(1);
    let nc = rows.iter().map(Vec::len).max().unwrap_or(0).max(1);
    let cell = (480.0 / nr.max(nc) as f64).clamp(4.0, 28.0);
    let (left, top) = (60.0, 40.0);
    let (w, h) = (left + cell * nc as f64 + 90.0, top + cell * nr as f64 + 40.0);
    let v_max = rows.iter().flatten().copied().fold(0.0, f64::max).max(1e-300);
    let shade = |v: f64| {
        let t = (v / v_max).clamp(0.0, 1.0);
        let c = |lo: f64, hi: f64| (lo + (hi - lo) * t).round() as u8;
        format!("#{:02x}{:02x}{:02x}", c(255.0, 8.0), c(255.0, 48.0), c(255.0, 107.0))
    };
    let mut s = open(w, h, title);
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            writeln!(
                s,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{cell:.2}\" height=\"{cell:.2}\" fill=\"{}\"/>",
                left + cell * j as f64,
                top + cell * i as f64,
                shade(v)
            )
            .unwrap();
        }
    }
    writeln!(
        s,
        "<rect x=\"{left:.1}\" y=\"{top:.1}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"#888\"/>",
        cell * nc as f64,
        cell * nr as f64
    )
    .unwrap();
    writeln!(
        s,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" {FONT}>{} ({nc})</text>",
        left + cell * nc as f64 / 2.0,
        top - 6.0,
        escape(col_axis)
    )
    .unwrap();
    let cy = top + cell * nr as f64 / 2.0;
    writeln!(
        s,
        "<text x=\"{:.1}\" y=\"{cy:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 {:.1} {cy:.1})\" {FONT}>{} ({nr})</text>",
        left - 10.0,
        left - 10.0,
        escape(row_axis)
    )
    .unwrap();
    let lx = left + cell * nc as f64 + 16.0;
    writeln!(s, "<rect x=\"{lx:.1}\" y=\"{top:.1}\" width=\"12\" height=\"12\" fill=\"{}\"/>", shade(v_max)).unwrap();
    writeln!(s, "<text x=\"{:.1}\" y=\"{:.1}\" {FONT}>{v_max:.3}</text>", lx + 16.0, top + 10.0).unwrap();
    writeln!(s, "<rect x=\"{lx:.1}\" y=\"{:.1}\" width=\"12\" height=\"12\" fill=\"{}\" stroke=\"#888\"/>", top + 18.0, shade(0.0)).unwrap();
    writeln!(s, "<text x=\"{:.1}\" y=\"{:.1}\" {FONT}>0</text>", lx + 16.0, top + 28.0).unwrap();
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plots_are_deterministic_and_closed() {
        let a = line_plot("t", "iteration", &[("v", vec![(0.0, 1.0), (1.0, 0.0)])]);
        assert_eq!(a, line_plot("t", "iteration", &[("v", vec![(0.0, 1.0), (1.0, 0.0)])]));
        assert!(a.ends_with("</svg>\n"));
        let b = bar_chart("b", &["x<1".into()], &[("p", vec![0.5])]);
        assert!(b.contains("x&lt;1"));
        let h = heatmap("h", &[vec![0.0, 1.0]], "z", "y");
        assert!(h.contains("#ffffff") && h.contains("#08306b"));
    }
}
