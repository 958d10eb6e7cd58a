//! Minimal SVG line plots.

use std::fmt::Write;

use super::{DelayScan, GvdSweepRow};
use crate::observables::Spectrum;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub markers: bool,
}

#[derive(Debug, Clone, Default)]
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Shaded `(x, lower, upper)` band drawn under the series.
    pub band: Option<(Vec<f64>, Vec<f64>, Vec<f64>)>,
    pub hide_y_ticks: bool,
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo <= 0.0 {
        let pad = if lo == 0.0 { 1.0 } else { 0.05 * lo.abs() };
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

fn tick_label(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

impl LinePlot {
    pub fn render(&self) -> String {
        let xs = self.series.iter().flat_map(|s| s.x.iter().copied());
        let (x0, x1) = extent(xs);
        let mut ys: Vec<f64> = self.series.iter().flat_map(|s| s.y.iter().copied()).collect();
        if let Some((_, lo, hi)) = &self.band {
            ys.extend(lo.iter().chain(hi));
        }
        let (y0, y1) = extent(ys.into_iter());
        let (y0, y1) = (y0 - 0.05 * (y1 - y0), y1 + 0.05 * (y1 - y0));
        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let py = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );
        if let Some((bx, lo, hi)) = &self.band {
            let mut pts = String::new();
            for (x, y) in bx.iter().zip(hi) {
                let _ = write!(pts, "{:.2},{:.2} ", px(*x), py(*y));
            }
            for (x, y) in bx.iter().zip(lo).rev() {
                let _ = write!(pts, "{:.2},{:.2} ", px(*x), py(*y));
            }
            let _ = writeln!(s, r##"<polygon points="{}" fill="#1f77b4" fill-opacity="0.2" stroke="none"/>"##, pts.trim_end());
        }
        let _ = writeln!(
            s,
            r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );
        for k in 0..=4 {
            let f = k as f64 / 4.0;
            let xv = x0 + f * (x1 - x0);
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                px(xv),
                TOP + ph + 16.0,
                tick_label(xv)
            );
            if !self.hide_y_ticks {
                let yv = y0 + f * (y1 - y0);
                let _ = writeln!(
                    s,
                    r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                    LEFT - 6.0,
                    py(yv) + 4.0,
                    tick_label(yv)
                );
            }
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            HEIGHT - 10.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );
        for (k, series) in self.series.iter().enumerate() {
            let color = COLORS[k % COLORS.len()];
            let mut pts = String::new();
            for (x, y) in series.x.iter().zip(&series.y).filter(|(x, y)| x.is_finite() && y.is_finite()) {
                let _ = write!(pts, "{:.2},{:.2} ", px(*x), py(*y));
            }
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                pts.trim_end()
            );
            if series.markers {
                for (x, y) in series.x.iter().zip(&series.y).filter(|(x, y)| x.is_finite() && y.is_finite()) {
                    let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, px(*x), py(*y));
                }
            }
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" fill="{color}">{}</text>"#,
                LEFT + pw - 150.0,
                TOP + 16.0 + 14.0 * k as f64,
                escape(&series.label)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// FWHM against round-trip `k''d`: constructive-phase line, phase mean, and a
/// ±1σ band when more than one phase was sampled.
pub fn sweep_svg(rows: &[GvdSweepRow], phases: usize) -> String {
    let ok: Vec<&GvdSweepRow> = rows.iter().filter(|r| r.error.is_none()).collect();
    let x: Vec<f64> = ok.iter().map(|r| r.k_double_prime_d).collect();
    let mut plot = LinePlot {
        title: "Signal bandwidth against gap dispersion".into(),
        x_label: "round-trip k''d (ps^2)".into(),
        y_label: "FWHM (THz)".into(),
        series: vec![Series {
            label: "constructive phase".into(),
            x: x.clone(),
            y: ok.iter().map(|r| r.fwhm_constructive).collect(),
            markers: true,
        }],
        ..Default::default()
    };
    if phases > 1 {
        plot.series.push(Series {
            label: format!("mean over {phases} phases"),
            x: x.clone(),
            y: ok.iter().map(|r| r.fwhm_mean).collect(),
            markers: false,
        });
        plot.band = Some((
            x,
            ok.iter().map(|r| r.fwhm_mean - r.fwhm_std).collect(),
            ok.iter().map(|r| r.fwhm_mean + r.fwhm_std).collect(),
        ));
    }
    plot.render()
}

/// Overlaid spectra against frequency.
pub fn spectra_overlay_svg(title: &str, spectra: &[(String, &Spectrum)]) -> String {
    LinePlot {
        title: title.into(),
        x_label: "frequency (THz)".into(),
        y_label: "photons per THz".into(),
        series: spectra
            .iter()
            .map(|(label, s)| Series {
                label: label.clone(),
                x: s.frequencies_thz(),
                y: s.density_per_thz(),
                markers: false,
            })
            .collect(),
        ..Default::default()
    }
    .render()
}

/// Convolved delay-scan spectra, each normalized to its maximum and stacked.
pub fn delay_waterfall_svg(scan: &DelayScan) -> String {
    let series = scan
        .rows
        .iter()
        .enumerate()
        .map(|(k, row)| {
            let v = row.convolved.values();
            let top = v.iter().copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
            Series {
                label: format!("{:.2} mm", row.delta_l_p_mm),
                x: row.convolved.frequencies_thz(),
                y: v.iter().map(|y| y / top + 1.1 * k as f64).collect(),
                markers: false,
            }
        })
        .collect();
    LinePlot {
        title: "Spectra against pump delay".into(),
        x_label: "frequency (THz)".into(),
        y_label: "normalized density (offset)".into(),
        series,
        hide_y_ticks: true,
        ..Default::default()
    }
    .render()
}
