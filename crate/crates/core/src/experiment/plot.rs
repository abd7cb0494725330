//! Histogram, kernel density estimate and a static SVG rendering.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::ExperimentReport;
use crate::special::normal_pdf;

pub const KDE_POINTS: usize = 256;
const MAX_BINS: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `counts.len() + 1` bin edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Kde {
    pub bandwidth: f64,
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
}

fn sorted(x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Linearly interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn iqr(sorted: &[f64]) -> f64 {
    quantile(sorted, 0.75) - quantile(sorted, 0.25)
}

fn std_dev(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = x.len() as f64;
    let mean = x.iter().sum::<f64>() / m;
    (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
}

/// Histogram with Freedman-Diaconis bin width `2 IQR m^{-1/3}`.
pub fn freedman_diaconis(samples: &[f64]) -> Histogram {
    if samples.is_empty() {
        return Histogram { edges: Vec::new(), counts: Vec::new() };
    }
    let x = sorted(samples);
    let (lo, hi) = (x[0], x[x.len() - 1]);
    let width = 2.0 * iqr(&x) * (x.len() as f64).powf(-1.0 / 3.0);
    let bins = if hi > lo && width > 0.0 {
        (((hi - lo) / width).ceil() as usize).clamp(1, MAX_BINS)
    } else {
        1
    };
    let step = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let edges: Vec<f64> = (0..=bins).map(|b| lo + b as f64 * step).collect();
    let mut counts = vec![0usize; bins];
    for v in &x {
        let b = (((v - lo) / step) as usize).min(bins - 1);
        counts[b] += 1;
    }
    Histogram { edges, counts }
}

/// Gaussian-kernel density on `points` grid points with Silverman's bandwidth
/// `0.9 min(sd, IQR/1.34) m^{-1/5}`.
pub fn silverman_kde(samples: &[f64], points: usize) -> Kde {
    if samples.is_empty() || points == 0 {
        return Kde { bandwidth: 0.0, grid: Vec::new(), density: Vec::new() };
    }
    let x = sorted(samples);
    let m = x.len() as f64;
    let sd = std_dev(&x);
    let spread = match iqr(&x) / 1.34 {
        r if r > 0.0 => sd.min(r),
        _ => sd,
    };
    let mut bandwidth = 0.9 * spread * m.powf(-0.2);
    if !(bandwidth > 0.0) {
        bandwidth = 1.0;
    }
    let (lo, hi) = (x[0] - 3.0 * bandwidth, x[x.len() - 1] + 3.0 * bandwidth);
    let step = if points > 1 { (hi - lo) / (points - 1) as f64 } else { 0.0 };
    let grid: Vec<f64> = (0..points).map(|i| lo + i as f64 * step).collect();
    let density = grid
        .iter()
        .map(|g| x.iter().map(|v| normal_pdf((g - v) / bandwidth)).sum::<f64>() / (m * bandwidth))
        .collect();
    Kde { bandwidth, grid, density }
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 40.0;

/// Histogram (as a density), KDE and the standard normal density as SVG.
///
/// The output depends only on the report's histogram and KDE.
pub fn emit_plot(report: &ExperimentReport) -> String {
    let h = &report.histogram;
    let k = &report.kde;
    let total: usize = h.counts.iter().sum();

    let mut x_lo = -4.0f64;
    let mut x_hi = 4.0f64;
    if let (Some(a), Some(b)) = (h.edges.first(), h.edges.last()) {
        x_lo = x_lo.min(*a);
        x_hi = x_hi.max(*b);
    }
    if let (Some(a), Some(b)) = (k.grid.first(), k.grid.last()) {
        x_lo = x_lo.min(*a);
        x_hi = x_hi.max(*b);
    }
    let bar_heights: Vec<f64> = h
        .counts
        .iter()
        .zip(h.edges.windows(2))
        .map(|(&c, e)| if total == 0 { 0.0 } else { c as f64 / (total as f64 * (e[1] - e[0])) })
        .collect();
    let y_hi = bar_heights
        .iter()
        .chain(&k.density)
        .copied()
        .fold(normal_pdf(0.0), f64::max)
        * 1.05;

    let sx = |x: f64| MARGIN + (x - x_lo) / (x_hi - x_lo) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - y / y_hi * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (bh, e) in bar_heights.iter().zip(h.edges.windows(2)) {
        let (x0, x1) = (sx(e[0]), sx(e[1]));
        let y = sy(*bh);
        let _ = writeln!(
            svg,
            r##"<rect x="{x0:.3}" y="{y:.3}" width="{:.3}" height="{:.3}" fill="#b0c4de" stroke="#4682b4" stroke-width="0.5"/>"##,
            x1 - x0,
            sy(0.0) - y
        );
    }
    let polyline = |pts: Vec<(f64, f64)>, style: &str| {
        let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{:.3},{:.3}", sx(*x), sy(*y))).collect();
        format!(r#"<polyline fill="none" {style} points="{}"/>"#, coords.join(" "))
    };
    if !k.grid.is_empty() {
        let pts = k.grid.iter().copied().zip(k.density.iter().copied()).collect();
        let _ = writeln!(svg, "{}", polyline(pts, r##"stroke="#c0392b" stroke-width="2""##));
    }
    let normal: Vec<(f64, f64)> = (0..=200)
        .map(|i| {
            let x = x_lo + (x_hi - x_lo) * i as f64 / 200.0;
            (x, normal_pdf(x))
        })
        .collect();
    let _ = writeln!(svg, "{}", polyline(normal, r##"stroke="black" stroke-width="1.5" stroke-dasharray="6,4""##));
    let _ = writeln!(
        svg,
        r#"<line x1="{MARGIN}" y1="{0:.3}" x2="{1:.3}" y2="{0:.3}" stroke="black"/>"#,
        sy(0.0),
        WIDTH - MARGIN
    );
    let mut tick = x_lo.ceil();
    while tick <= x_hi {
        let _ = writeln!(
            svg,
            r#"<text x="{:.3}" y="{:.3}" font-size="11" text-anchor="middle">{tick}</text>"#,
            sx(tick),
            sy(0.0) + 15.0
        );
        tick += 1.0;
    }
    let cfg = &report.config;
    let _ = writeln!(
        svg,
        r#"<text x="{MARGIN}" y="20" font-size="13">{:?} p={} n={} reps={}</text>"#,
        cfg.statistic, cfg.p, cfg.n, report.reps
    );
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_counts_everything() {
        let x: Vec<f64> = (0..1000).map(|i| ((i * 37) % 1000) as f64 / 100.0).collect();
        let h = freedman_diaconis(&x);
        assert_eq!(h.counts.iter().sum::<usize>(), 1000);
        assert_eq!(h.edges.len(), h.counts.len() + 1);
        assert_eq!(h.edges[0], 0.0);
        // Bin width 2 * 4.995 / 10 over a range of 9.99.
        assert!((10..=11).contains(&h.counts.len()));
        let flat = freedman_diaconis(&[1.0; 5]);
        assert_eq!(flat.counts, vec![5]);
    }

    #[test]
    fn kde_integrates_to_one() {
        let x: Vec<f64> = (0..500).map(|i| (i as f64 / 499.0 - 0.5) * 4.0).collect();
        let k = silverman_kde(&x, KDE_POINTS);
        assert_eq!(k.grid.len(), KDE_POINTS);
        let step = k.grid[1] - k.grid[0];
        let mass: f64 = k.density.iter().sum::<f64>() * step;
        assert!((mass - 1.0).abs() < 1e-2, "{mass}");
        assert!(k.bandwidth > 0.0);
    }
}
