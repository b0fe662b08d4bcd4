//! Minimal static SVG renderers. Purely derived from report data; numeric
//! outputs never depend on these.

use std::fmt::Write as _;

use crate::experiments::{ArcReport, GeometryReport, SweepResult};

const PALETTE: [&str; 8] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7",
];

/// Circle diagram: data circle, reconstruction trace, firing arcs, decoder
/// directions.
pub fn circle_diagram(report: &ArcReport) -> String {
    let size = 420.0;
    let center = size / 2.0;
    let radius = 140.0;
    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size}\" height=\"{size}\" viewBox=\"0 0 {size} {size}\">\n"
    );
    let _ = writeln!(
        svg,
        "<circle cx=\"{center}\" cy=\"{center}\" r=\"{radius}\" fill=\"none\" stroke=\"#cccccc\" stroke-width=\"2\"/>"
    );
    // Reconstruction trace.
    let mut path = String::new();
    for (i, p) in report.reconstruction.iter().enumerate() {
        let x = center + radius * p[0];
        let y = center - radius * p[1];
        let _ = write!(path, "{}{x:.2},{y:.2} ", if i == 0 { "M" } else { "L" });
    }
    let _ = writeln!(
        svg,
        "<path d=\"{path}Z\" fill=\"none\" stroke=\"#222222\" stroke-width=\"1.5\"/>"
    );
    // Arcs and decoder arrows.
    let mut color_idx = 0usize;
    for latent in &report.latents {
        if latent.dead {
            continue;
        }
        let color = PALETTE[color_idx % PALETTE.len()];
        color_idx += 1;
        for &(start, width) in &latent.spans {
            let r_arc = radius + 12.0;
            let (x0, y0) = (
                center + r_arc * start.cos(),
                center - r_arc * start.sin(),
            );
            let end = start + width;
            let (x1, y1) = (center + r_arc * end.cos(), center - r_arc * end.sin());
            let large = if width > std::f64::consts::PI { 1 } else { 0 };
            let _ = writeln!(
                svg,
                "<path d=\"M{x0:.2},{y0:.2} A{r_arc:.2},{r_arc:.2} 0 {large} 0 {x1:.2},{y1:.2}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"4\" stroke-linecap=\"round\"/>"
            );
        }
        let scale = radius * latent.decoder_norm.min(1.2);
        let (ax, ay) = (
            center + scale * latent.decoder_direction[0],
            center - scale * latent.decoder_direction[1],
        );
        let _ = writeln!(
            svg,
            "<line x1=\"{center}\" y1=\"{center}\" x2=\"{ax:.2}\" y2=\"{ay:.2}\" stroke=\"{color}\" stroke-width=\"2\" marker-end=\"none\"/>"
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"10\" y=\"20\" font-family=\"sans-serif\" font-size=\"13\">{} latents, {} live</text>",
        report.n_latents, report.live_latents
    );
    svg.push_str("</svg>\n");
    svg
}

/// Histogram of nearest-neighbor similarities.
pub fn similarity_histogram(report: &GeometryReport) -> String {
    let (w, h, pad) = (460.0, 300.0, 40.0);
    let bins = report.histogram.counts.len();
    let max_count = report.histogram.counts.iter().copied().max().unwrap_or(1).max(1);
    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    );
    let plot_w = w - 2.0 * pad;
    let plot_h = h - 2.0 * pad;
    for (i, &count) in report.histogram.counts.iter().enumerate() {
        if count == 0 {
            continue;
        }
        let bar_h = plot_h * count as f64 / max_count as f64;
        let x = pad + plot_w * i as f64 / bins as f64;
        let y = h - pad - bar_h;
        let bw = plot_w / bins as f64;
        let _ = writeln!(
            svg,
            "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{bw:.2}\" height=\"{bar_h:.2}\" fill=\"#4e79a7\"/>"
        );
    }
    let _ = writeln!(
        svg,
        "<line x1=\"{pad}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#333\"/>",
        h - pad,
        w - pad,
        h - pad
    );
    for (frac, label) in [(0.0f64, report.histogram.lo), (1.0, report.histogram.hi)] {
        let x = pad + plot_w * frac;
        let _ = writeln!(
            svg,
            "<text x=\"{x:.1}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{label}</text>",
            h - pad + 16.0
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"{pad}\" y=\"20\" font-family=\"sans-serif\" font-size=\"13\">nearest-neighbor |cos|; median {:.4}, {} above {}</text>",
        report.median_nn,
        report.high_similarity_count,
        crate::experiments::HIGH_SIMILARITY
    );
    svg.push_str("</svg>\n");
    svg
}

/// Log-log best-loss curve of a sweep, with the fitted line if present.
pub fn sweep_curve(sweep: &SweepResult) -> String {
    let (w, h, pad) = (460.0, 320.0, 45.0);
    let points = sweep.best_points();
    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    );
    let finite: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|&(x, y)| (x.log10(), y.log10()))
        .collect();
    if finite.len() >= 2 {
        let (x_lo, x_hi) = finite
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(x, _)| {
                (lo.min(x), hi.max(x))
            });
        let (y_lo, y_hi) = finite
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, y)| {
                (lo.min(y), hi.max(y))
            });
        let span = |v: f64, lo: f64, hi: f64| if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
        let to_px = |x: f64, y: f64| {
            (
                pad + (w - 2.0 * pad) * span(x, x_lo, x_hi),
                h - pad - (h - 2.0 * pad) * span(y, y_lo, y_hi),
            )
        };
        let mut path = String::new();
        for (i, &(x, y)) in finite.iter().enumerate() {
            let (px, py) = to_px(x, y);
            let _ = write!(path, "{}{px:.2},{py:.2} ", if i == 0 { "M" } else { "L" });
            let _ = writeln!(
                svg,
                "<circle cx=\"{px:.2}\" cy=\"{py:.2}\" r=\"3\" fill=\"#e15759\"/>"
            );
        }
        let _ = writeln!(
            svg,
            "<path d=\"{path}\" fill=\"none\" stroke=\"#e15759\" stroke-width=\"1.2\"/>"
        );
        if let Some(fit) = &sweep.fit {
            let ln10 = std::f64::consts::LN_10;
            let y_at = |lx: f64| (fit.intercept + fit.slope * lx * ln10) / ln10;
            let (x0, y0) = to_px(x_lo, y_at(x_lo));
            let (x1, y1) = to_px(x_hi, y_at(x_hi));
            let _ = writeln!(
                svg,
                "<line x1=\"{x0:.2}\" y1=\"{y0:.2}\" x2=\"{x1:.2}\" y2=\"{y1:.2}\" stroke=\"#4e79a7\" stroke-dasharray=\"5 4\" stroke-width=\"1.5\"/>"
            );
            let _ = writeln!(
                svg,
                "<text x=\"{pad}\" y=\"20\" font-family=\"sans-serif\" font-size=\"13\">log-log slope {:.4}</text>",
                fit.slope
            );
        }
    }
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">latents (log)</text>",
        w / 2.0,
        h - 8.0
    );
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::Histogram;

    #[test]
    fn histogram_svg_is_well_formed() {
        let report = GeometryReport {
            nn_similarity: vec![Some(0.2), Some(0.4)],
            dead: vec![false, false],
            live_latents: 2,
            median_nn: 0.3,
            high_similarity_count: 0,
            histogram: Histogram {
                lo: -1.0,
                hi: 1.0,
                counts: vec![0, 1, 1, 0],
            },
        };
        let svg = similarity_histogram(&report);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("median 0.3"));
    }
}
