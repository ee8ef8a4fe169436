//! Self-contained SVG figures: embedding scatter plots, topic term bars and
//! training curves.
//!
//! Output is plain text with fixed numeric formatting, so identical inputs
//! give byte-identical files.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::nn::RunHistory;

/// Ten-color qualitative palette, cycled in label order.
pub const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

pub fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

/// Escapes text for use in element content and attribute values.
pub fn escape(text: &str) -> String {
    let mut s = String::with_capacity(text.len());
    for ch in text.chars() {
        match ch {
            '&' => s.push_str("&amp;"),
            '<' => s.push_str("&lt;"),
            '>' => s.push_str("&gt;"),
            '"' => s.push_str("&quot;"),
            '\'' => s.push_str("&apos;"),
            c => s.push(c),
        }
    }
    s
}

fn header(s: &mut String, width: f64, height: f64) {
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif">"#
    );
    let _ = writeln!(s, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
}

fn title(s: &mut String, x: f64, y: f64, text: &str) {
    let _ = writeln!(
        s,
        r#"<text x="{x}" y="{y}" font-size="16" text-anchor="middle">{}</text>"#,
        escape(text)
    );
}

/// Maps a data interval onto a pixel interval, padding the data range by 5%
/// on both sides. A degenerate range is widened to unit length.
#[derive(Debug, Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
    px_lo: f64,
    px_hi: f64,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, px_lo: f64, px_hi: f64) -> Self {
        let (mut lo, mut hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(v), b.max(v))
        });
        if !(hi > lo) {
            lo -= 0.5;
            hi += 0.5;
        }
        let pad = 0.05 * (hi - lo);
        Axis {
            lo: lo - pad,
            hi: hi + pad,
            px_lo,
            px_hi,
        }
    }

    fn map(&self, v: f64) -> f64 {
        self.px_lo + (v - self.lo) / (self.hi - self.lo) * (self.px_hi - self.px_lo)
    }
}

fn legend(s: &mut String, x: f64, y: f64, entries: &[(String, &str, bool)]) {
    let _ = writeln!(s, r#"<g class="legend">"#);
    for (i, (label, col, dashed)) in entries.iter().enumerate() {
        let yy = y + 18.0 * i as f64;
        let dash = if *dashed { r#" stroke-dasharray="5,3""# } else { "" };
        let _ = writeln!(
            s,
            r#"<line x1="{x}" y1="{yy}" x2="{}" y2="{yy}" stroke="{col}" stroke-width="3"{dash}/>"#,
            x + 18.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="12">{}</text>"#,
            x + 24.0,
            yy + 4.0,
            escape(label)
        );
    }
    let _ = writeln!(s, "</g>");
}

/// Scatter plot of 2-D coordinates, one circle per point, colored by
/// `labels[i]` (an index into `legend_names`).
pub fn render_scatter(
    coords: &[[f64; 2]],
    labels: &[usize],
    legend_names: &[String],
    title_text: &str,
) -> Result<String> {
    if coords.is_empty() {
        return Err(Error::empty("scatter plot: embedding"));
    }
    if coords.len() != labels.len() {
        return Err(Error::Data(format!(
            "{} points but {} labels",
            coords.len(),
            labels.len()
        )));
    }
    if let Some(i) = coords.iter().position(|c| !c[0].is_finite() || !c[1].is_finite()) {
        return Err(Error::Numeric(format!("embedding point {i} is not finite")));
    }
    let (w, h) = (900.0, 640.0);
    let (left, right, top, bottom) = (50.0, 680.0, 50.0, 610.0);
    let x = Axis::fit(coords.iter().map(|c| c[0]), left, right);
    let y = Axis::fit(coords.iter().map(|c| c[1]), bottom, top);
    let mut s = String::new();
    header(&mut s, w, h);
    title(&mut s, (left + right) / 2.0, 30.0, title_text);
    let _ = writeln!(
        s,
        r##"<rect x="{left}" y="{top}" width="{}" height="{}" fill="none" stroke="#444"/>"##,
        right - left,
        bottom - top
    );
    let _ = writeln!(s, r#"<g class="points">"#);
    for (c, &l) in coords.iter().zip(labels) {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{}" fill-opacity="0.75"/>"#,
            x.map(c[0]),
            y.map(c[1]),
            color(l)
        );
    }
    let _ = writeln!(s, "</g>");
    let n_labels = labels.iter().max().map_or(0, |&m| m + 1).max(legend_names.len());
    let entries: Vec<(String, &str, bool)> = (0..n_labels)
        .map(|i| {
            let name = legend_names.get(i).cloned().unwrap_or_else(|| i.to_string());
            (name, color(i), false)
        })
        .collect();
    legend(&mut s, right + 20.0, top + 10.0, &entries);
    s.push_str("</svg>\n");
    Ok(s)
}

/// Longest bar, in pixels, used for the largest probability on the figure.
pub const BAR_MAX_PX: f64 = 160.0;

/// One horizontal bar panel per topic; bar length is proportional to the
/// term probability, on a scale shared by all panels.
pub fn render_topic_bars(topics: &[Vec<(String, f64)>], title_text: &str) -> Result<String> {
    if topics.is_empty() {
        return Err(Error::empty("topic bars: topics"));
    }
    let max_p = topics
        .iter()
        .flatten()
        .map(|(_, p)| *p)
        .fold(0.0f64, f64::max);
    let scale = if max_p > 0.0 { BAR_MAX_PX / max_p } else { 0.0 };
    let rows_per_panel = topics.iter().map(Vec::len).max().unwrap_or(0).max(1);
    let cols = topics.len().min(4);
    let grid_rows = topics.len().div_ceil(cols);
    let (panel_w, bar_h) = (300.0, 14.0);
    let panel_h = 40.0 + bar_h * rows_per_panel as f64;
    let w = panel_w * cols as f64 + 20.0;
    let h = 50.0 + panel_h * grid_rows as f64;
    let mut s = String::new();
    header(&mut s, w, h);
    title(&mut s, w / 2.0, 30.0, title_text);
    for (t, terms) in topics.iter().enumerate() {
        let px = 10.0 + panel_w * (t % cols) as f64;
        let py = 50.0 + panel_h * (t / cols) as f64;
        let _ = writeln!(s, r#"<g class="panel" data-topic="{t}">"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="13" font-weight="bold">Topic {t}</text>"#,
            px + 10.0,
            py + 16.0
        );
        let bar_x = px + 110.0;
        for (r, (term, p)) in terms.iter().enumerate() {
            let y = py + 26.0 + bar_h * r as f64;
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{:.1}" font-size="10" text-anchor="end">{}</text>"#,
                bar_x - 4.0,
                y + bar_h - 4.0,
                escape(term)
            );
            let _ = writeln!(
                s,
                r#"<rect class="bar" x="{bar_x}" y="{y:.1}" width="{:.1}" height="{}" fill="{}" data-prob="{p}"/>"#,
                p * scale,
                bar_h - 2.0,
                color(t)
            );
        }
        let _ = writeln!(s, "</g>");
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Accuracy and loss panels with one train line (solid) and one validation
/// line (dashed) per named history.
pub fn render_curves(series: &[(String, RunHistory)], title_text: &str) -> Result<String> {
    if series.is_empty() || series.iter().any(|(_, h)| h.epochs.is_empty()) {
        return Err(Error::empty("training curves: histories"));
    }
    let (w, h) = (1100.0, 480.0);
    let panel_w = 400.0;
    let (top, bottom) = (60.0, 420.0);
    let mut s = String::new();
    header(&mut s, w, h);
    title(&mut s, 450.0, 30.0, title_text);
    let max_epoch = series
        .iter()
        .flat_map(|(_, h)| h.epochs.iter().map(|e| e.epoch as f64))
        .fold(1.0f64, f64::max);
    type Getter = fn(&crate::nn::EpochMetrics) -> (f64, f64);
    let panels: [(&str, Getter); 2] = [
        ("accuracy", |e| (e.train_acc, e.val_acc)),
        ("loss", |e| (e.train_loss, e.val_loss)),
    ];
    for (pi, (name, get)) in panels.iter().enumerate() {
        let left = 60.0 + pi as f64 * (panel_w + 60.0);
        let right = left + panel_w;
        let x = Axis::fit([1.0, max_epoch].into_iter(), left, right);
        let values = series
            .iter()
            .flat_map(|(_, h)| h.epochs.iter().flat_map(|e| {
                let (a, b) = get(e);
                [a, b]
            }))
            .filter(|v| v.is_finite());
        let y = Axis::fit(values, bottom, top);
        let _ = writeln!(s, r#"<g class="panel" data-metric="{name}">"#);
        let _ = writeln!(
            s,
            r##"<rect x="{left}" y="{top}" width="{panel_w}" height="{}" fill="none" stroke="#444"/>"##,
            bottom - top
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="13" text-anchor="middle">{name}</text>"#,
            (left + right) / 2.0,
            top - 8.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="11" text-anchor="middle">epoch</text>"#,
            (left + right) / 2.0,
            bottom + 20.0
        );
        for (si, (_, hist)) in series.iter().enumerate() {
            for (split, dashed) in [("train", false), ("val", true)] {
                let points: Vec<String> = hist
                    .epochs
                    .iter()
                    .map(|e| {
                        let (tr, va) = get(e);
                        let v = if dashed { va } else { tr };
                        format!("{:.2},{:.2}", x.map(e.epoch as f64), y.map(v))
                    })
                    .collect();
                let dash = if dashed { r#" stroke-dasharray="5,3""# } else { "" };
                let _ = writeln!(
                    s,
                    r#"<polyline class="{split}" data-series="{si}" points="{}" fill="none" stroke="{}" stroke-width="2"{dash}/>"#,
                    points.join(" "),
                    color(si)
                );
            }
        }
        let _ = writeln!(s, "</g>");
    }
    let entries: Vec<(String, &str, bool)> = series
        .iter()
        .enumerate()
        .flat_map(|(i, (name, _))| {
            [
                (format!("{name} train"), color(i), false),
                (format!("{name} val"), color(i), true),
            ]
        })
        .collect();
    legend(&mut s, 60.0 + 2.0 * (panel_w + 60.0), top + 10.0, &entries);
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn escape_handles_markup() {
        assert_eq!(escape("a<b & \"c\""), "a&lt;b &amp; &quot;c&quot;");
    }

    #[test]
    fn axis_pads_five_percent() {
        let a = Axis::fit([0.0, 10.0].into_iter(), 0.0, 110.0);
        assert!((a.map(0.0) - 5.0).abs() < 1e-12);
        assert!((a.map(10.0) - 105.0).abs() < 1e-12);
        let flat = Axis::fit([3.0, 3.0].into_iter(), 0.0, 100.0);
        assert!((flat.map(3.0) - 50.0).abs() < 1e-12);
    }

    #[test]
    fn scatter_rejects_empty_and_non_finite() {
        assert!(render_scatter(&[], &[], &[], "t").is_err());
        assert!(render_scatter(&[[f64::NAN, 0.0]], &[0], &[], "t").is_err());
    }
}
