//! Minimal SVG charts: polyline series with axes and a legend, and grids of
//! bar-chart panels for shed histograms. No plotting dependency; output is
//! deterministic for identical inputs.

use std::fmt::Write;

const PALETTE: [&str; 6] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
];

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

/// Chooses a tick spacing of 1, 2, or 5 times a power of ten so that about
/// `target` ticks cover the span.
fn tick_step(span: f64, target: usize) -> f64 {
    if span <= 0.0 {
        return 1.0;
    }
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    for m in [1.0, 2.0, 5.0, 10.0] {
        if mag * m >= raw {
            return mag * m;
        }
    }
    mag * 10.0
}

fn axis_label(v: f64) -> String {
    if v.abs() >= 1e6 {
        format!("{:.1}M", v / 1e6)
    } else if v.abs() >= 1e3 {
        format!("{:.0}k", v / 1e3)
    } else if v == v.trunc() {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

/// A line chart of one or more series sharing axes.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (width, height) = (720.0, 440.0);
    let (left, right, top, bottom) = (70.0, 150.0, 40.0, 50.0);
    let plot_w = width - left - right;
    let plot_h = height - top - bottom;

    let xs = series.iter().flat_map(|s| s.points.iter().map(|p| p.0));
    let ys = series.iter().flat_map(|s| s.points.iter().map(|p| p.1));
    let x_max = xs.fold(0.0f64, f64::max).max(1e-9);
    let y_max = ys.fold(0.0f64, f64::max).max(1e-9) * 1.05;

    let px = |x: f64| left + x / x_max * plot_w;
    let py = |y: f64| top + plot_h - y / y_max * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{title}</text>"#,
        left + plot_w / 2.0
    );

    // Gridlines and ticks.
    let x_step = tick_step(x_max, 6);
    let mut x = 0.0;
    while x <= x_max + 1e-9 {
        let sx = px(x);
        let _ = writeln!(
            svg,
            r##"<line x1="{}" y1="{top}" x2="{}" y2="{}" stroke="#dddddd"/>"##,
            fmt(sx),
            fmt(sx),
            fmt(top + plot_h)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
            fmt(sx),
            fmt(top + plot_h + 16.0),
            axis_label(x)
        );
        x += x_step;
    }
    let y_step = tick_step(y_max, 6);
    let mut y = 0.0;
    while y <= y_max + 1e-9 {
        let sy = py(y);
        let _ = writeln!(
            svg,
            r##"<line x1="{left}" y1="{}" x2="{}" y2="{}" stroke="#dddddd"/>"##,
            fmt(sy),
            fmt(left + plot_w),
            fmt(sy)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#,
            fmt(left - 6.0),
            fmt(sy + 4.0),
            axis_label(y)
        );
        y += y_step;
    }

    // Axes and labels.
    let _ = writeln!(
        svg,
        r#"<line x1="{left}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        fmt(top + plot_h),
        fmt(left + plot_w),
        fmt(top + plot_h)
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{}" stroke="black"/>"#,
        fmt(top + plot_h)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">{x_label}</text>"#,
        fmt(left + plot_w / 2.0),
        fmt(height - 12.0)
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 16 {})">{y_label}</text>"#,
        fmt(top + plot_h / 2.0),
        fmt(top + plot_h / 2.0)
    );

    // Series and legend.
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{},{}", fmt(px(x)), fmt(py(y))))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            path.join(" ")
        );
        for &(x, y) in &s.points {
            let _ = writeln!(
                svg,
                r#"<circle cx="{}" cy="{}" r="2.5" fill="{color}"/>"#,
                fmt(px(x)),
                fmt(py(y))
            );
        }
        let ly = top + 16.0 * i as f64;
        let lx = left + plot_w + 12.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{color}" stroke-width="2"/>"#,
            fmt(lx),
            fmt(ly),
            fmt(lx + 18.0),
            fmt(ly)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11">{}</text>"#,
            fmt(lx + 24.0),
            fmt(ly + 4.0),
            s.name
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// One histogram panel: labelled bar groups, one bar per named series.
pub struct HistogramPanel {
    pub title: String,
    /// Bin labels, shared by all series in the panel.
    pub bins: Vec<String>,
    /// (series name, counts per bin).
    pub series: Vec<(String, Vec<usize>)>,
}

/// Panels laid out in two columns.
pub fn histogram_grid(title: &str, panels: &[HistogramPanel]) -> String {
    let (panel_w, panel_h) = (340.0, 240.0);
    let cols = 2usize;
    let rows = panels.len().div_ceil(cols);
    let width = panel_w * cols as f64 + 40.0;
    let height = panel_h * rows as f64 + 60.0;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{title}</text>"#,
        width / 2.0
    );
    for (p, panel) in panels.iter().enumerate() {
        let ox = 20.0 + (p % cols) as f64 * panel_w;
        let oy = 40.0 + (p / cols) as f64 * panel_h;
        let (left, top, plot_w, plot_h) = (40.0, 28.0, panel_w - 60.0, panel_h - 70.0);
        let max_count = panel
            .series
            .iter()
            .flat_map(|(_, counts)| counts.iter().copied())
            .max()
            .unwrap_or(1)
            .max(1) as f64;
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#,
            fmt(ox + left + plot_w / 2.0),
            fmt(oy + 14.0),
            panel.title
        );
        let nbins = panel.bins.len().max(1);
        let group_w = plot_w / nbins as f64;
        let bar_w = group_w / (panel.series.len() as f64 + 0.5);
        for (si, (name, counts)) in panel.series.iter().enumerate() {
            let color = PALETTE[si % PALETTE.len()];
            for (bi, &count) in counts.iter().enumerate() {
                let h = count as f64 / max_count * plot_h;
                let x = ox + left + bi as f64 * group_w + si as f64 * bar_w + bar_w * 0.25;
                let y = oy + top + plot_h - h;
                let _ = writeln!(
                    svg,
                    r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{color}" fill-opacity="0.8"/>"#,
                    fmt(x),
                    fmt(y),
                    fmt(bar_w),
                    fmt(h)
                );
            }
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{}" font-family="sans-serif" font-size="10" fill="{color}">{name}</text>"#,
                fmt(ox + left + 4.0 + si as f64 * 60.0),
                fmt(oy + top + plot_h + 30.0)
            );
        }
        for (bi, label) in panel.bins.iter().enumerate() {
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{}" font-family="sans-serif" font-size="9" text-anchor="middle">{label}</text>"#,
                fmt(ox + left + bi as f64 * group_w + group_w / 2.0),
                fmt(oy + top + plot_h + 12.0)
            );
        }
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
            fmt(ox + left),
            fmt(oy + top + plot_h),
            fmt(ox + left + plot_w),
            fmt(oy + top + plot_h)
        );
    }
    svg.push_str("</svg>\n");
    svg
}
