//! Standalone HTML with hand-written inline SVG charts.
//!
//! Layout per slide: title bar, chart region, insight bullets below. All
//! output is deterministic and self-contained (no scripts, fonts or links to
//! external resources). Every element is either closed or self-closing so
//! the document is also well-formed XML.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::deck::{serialize_deck, ChartKind, ChartSpec, Deck, DeckError, Slide, SlideObject, TableSpec};

#[derive(Debug, Error, PartialEq)]
pub enum RenderError {
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("invalid render options: {0}")]
    Options(String),
    #[error(transparent)]
    Deck(#[from] DeckError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Theme {
    #[default]
    Light,
    Dark,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderOptions {
    pub theme: Theme,
    pub page_size: (u32, u32),
    /// Embed the deck-JSON in a `<script type="application/json">` block.
    pub embed_data: bool,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self { theme: Theme::Light, page_size: (960, 540), embed_data: false }
    }
}

impl RenderOptions {
    pub fn validate(&self) -> Result<(), RenderError> {
        if self.page_size.0 == 0 || self.page_size.1 == 0 {
            return Err(RenderError::Options("page size must be positive".into()));
        }
        Ok(())
    }

    fn chart_size(&self) -> (f64, f64) {
        let (w, h) = self.page_size;
        (w as f64 * 0.9, h as f64 * 0.6)
    }
}

struct Palette {
    background: &'static str,
    foreground: &'static str,
    grid: &'static str,
    title_bar: &'static str,
}

impl Theme {
    fn palette(self) -> Palette {
        match self {
            Theme::Light => Palette { background: "#ffffff", foreground: "#1a1a1a", grid: "#cccccc", title_bar: "#12355b" },
            Theme::Dark => Palette { background: "#1e1e1e", foreground: "#eeeeee", grid: "#555555", title_bar: "#0b2239" },
        }
    }
}

const SERIES_COLORS: [&str; 8] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

fn color(i: usize) -> &'static str {
    SERIES_COLORS[i % SERIES_COLORS.len()]
}

pub fn escape_html(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            _ => out.push(c),
        }
    }
    out
}

/// Wedge sweep angles in degrees, proportional to the values.
pub fn pie_wedge_angles(values: &[f64]) -> Result<Vec<f64>, RenderError> {
    let total: f64 = values.iter().sum();
    if values.is_empty() || total <= 0.0 {
        return Err(RenderError::DegenerateData("piechart values sum to zero".into()));
    }
    Ok(values.iter().map(|v| v / total * 360.0).collect())
}

/// Bar heights in pixels, proportional to |value| against the largest magnitude.
pub fn bar_heights(values: &[f64], plot_height: f64) -> Vec<f64> {
    let max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max == 0.0 {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| v.abs() / max * plot_height).collect()
}

fn point(cx: f64, cy: f64, r: f64, deg: f64) -> (f64, f64) {
    let rad = (deg - 90.0).to_radians();
    (cx + r * rad.cos(), cy + r * rad.sin())
}

fn svg_open(out: &mut String, w: f64, h: f64, kind: ChartKind, title: &str, p: &Palette) {
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" class="chart {kind}" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}"><title>{t}</title><rect x="0" y="0" width="{w:.0}" height="{h:.0}" fill="{bg}"/>"#,
        kind = kind.as_str(),
        t = escape_html(title),
        bg = p.background,
    );
    let _ = write!(
        out,
        r#"<text x="{x:.2}" y="20" text-anchor="middle" font-size="14" fill="{fg}">{t}</text>"#,
        x = w / 2.0,
        fg = p.foreground,
        t = escape_html(title),
    );
}

fn legend(out: &mut String, labels: &[&str], x: f64, y0: f64, p: &Palette) {
    for (i, label) in labels.iter().enumerate() {
        let y = y0 + i as f64 * 16.0;
        let _ = write!(
            out,
            r#"<rect class="legend" x="{x:.2}" y="{ry:.2}" width="10" height="10" fill="{c}"/><text x="{tx:.2}" y="{ty:.2}" font-size="11" fill="{fg}">{l}</text>"#,
            ry = y - 9.0,
            c = color(i),
            tx = x + 14.0,
            ty = y,
            fg = p.foreground,
            l = escape_html(label),
        );
    }
}

fn render_pie(out: &mut String, chart: &ChartSpec, w: f64, h: f64, p: &Palette) -> Result<(), RenderError> {
    let values = &chart.series[0].values;
    let angles = pie_wedge_angles(values)?;
    let (cx, cy) = (w * 0.4, h / 2.0 + 10.0);
    let r = (h / 2.0 - 30.0).max(10.0);
    let mut start = 0.0;
    for (i, sweep) in angles.iter().enumerate() {
        let end = start + sweep;
        let (x0, y0) = point(cx, cy, r, start);
        let d = if *sweep >= 360.0 - 1e-9 {
            // a full circle needs two half arcs
            let (xm, ym) = point(cx, cy, r, start + 180.0);
            format!("M {x0:.4} {y0:.4} A {r:.4} {r:.4} 0 1 1 {xm:.4} {ym:.4} A {r:.4} {r:.4} 0 1 1 {x0:.4} {y0:.4} Z")
        } else {
            let (x1, y1) = point(cx, cy, r, end);
            let large = if *sweep > 180.0 { 1 } else { 0 };
            format!("M {cx:.4} {cy:.4} L {x0:.4} {y0:.4} A {r:.4} {r:.4} 0 {large} 1 {x1:.4} {y1:.4} Z")
        };
        let _ = write!(
            out,
            r#"<path class="wedge" data-angle="{sweep:.6}" d="{d}" fill="{c}" stroke="{bg}"/>"#,
            c = color(i),
            bg = p.background,
        );
        start = end;
    }
    let labels: Vec<&str> = chart.x_labels.iter().map(String::as_str).collect();
    legend(out, &labels, w * 0.75, h * 0.3, p);
    Ok(())
}

struct Plot {
    left: f64,
    top: f64,
    width: f64,
    height: f64,
}

impl Plot {
    fn new(w: f64, h: f64) -> Self {
        Self { left: 50.0, top: 35.0, width: (w - 170.0).max(10.0), height: (h - 70.0).max(10.0) }
    }

    fn axes(&self, out: &mut String, p: &Palette) {
        let _ = write!(
            out,
            r#"<line class="axis" x1="{l:.2}" y1="{b:.2}" x2="{r:.2}" y2="{b:.2}" stroke="{g}"/><line class="axis" x1="{l:.2}" y1="{t:.2}" x2="{l:.2}" y2="{b:.2}" stroke="{g}"/>"#,
            l = self.left,
            r = self.left + self.width,
            t = self.top,
            b = self.top + self.height,
            g = p.grid,
        );
    }
}

fn value_range(chart: &ChartSpec) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in chart.series.iter().flat_map(|s| &s.values) {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    (lo, hi)
}

fn x_tick_labels(out: &mut String, plot: &Plot, labels: &[String], step_x: f64, offset: f64, p: &Palette) {
    let every = labels.len().div_ceil(8).max(1);
    for (i, l) in labels.iter().enumerate().filter(|(i, _)| i % every == 0) {
        let _ = write!(
            out,
            r#"<text x="{x:.2}" y="{y:.2}" font-size="9" text-anchor="middle" fill="{fg}">{l}</text>"#,
            x = plot.left + offset + i as f64 * step_x,
            y = plot.top + plot.height + 14.0,
            fg = p.foreground,
            l = escape_html(l),
        );
    }
}

fn render_bars(out: &mut String, chart: &ChartSpec, w: f64, h: f64, p: &Palette) {
    let plot = Plot::new(w, h);
    plot.axes(out, p);
    let n = chart.x_labels.len().max(1);
    let groups = chart.series.len().max(1);
    let slot = plot.width / n as f64;
    let bar_w = slot * 0.8 / groups as f64;
    let all: Vec<f64> = chart.series.iter().flat_map(|s| s.values.iter().copied()).collect();
    let heights = bar_heights(&all, plot.height);
    let has_negative = all.iter().any(|v| *v < 0.0);
    // with negatives the zero line sits mid-plot and heights use half the room
    let (baseline, scale) = if has_negative { (plot.top + plot.height / 2.0, 0.5) } else { (plot.top + plot.height, 1.0) };
    let mut k = 0;
    for (si, s) in chart.series.iter().enumerate() {
        for (i, v) in s.values.iter().enumerate() {
            let bh = heights[k] * scale;
            k += 1;
            let x = plot.left + i as f64 * slot + slot * 0.1 + si as f64 * bar_w;
            let y = if *v >= 0.0 { baseline - bh } else { baseline };
            let _ = write!(
                out,
                r#"<rect class="bar" data-value="{v}" x="{x:.4}" y="{y:.4}" width="{bar_w:.4}" height="{bh:.4}" fill="{c}"/>"#,
                c = color(si),
            );
        }
    }
    x_tick_labels(out, &plot, &chart.x_labels, slot, slot / 2.0, p);
    let labels: Vec<&str> = chart.series.iter().map(|s| s.label.as_str()).collect();
    legend(out, &labels, plot.left + plot.width + 10.0, plot.top + 10.0, p);
}

fn render_lines(out: &mut String, chart: &ChartSpec, w: f64, h: f64, p: &Palette) {
    let plot = Plot::new(w, h);
    plot.axes(out, p);
    let (lo, hi) = value_range(chart);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let n = chart.x_labels.len();
    let step = if n > 1 { plot.width / (n - 1) as f64 } else { 0.0 };
    for (si, s) in chart.series.iter().enumerate() {
        let pts: Vec<String> = s
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let x = plot.left + i as f64 * step;
                let y = if hi > lo { plot.top + plot.height - (v - lo) / span * plot.height } else { plot.top + plot.height / 2.0 };
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = write!(
            out,
            r#"<polyline class="series" points="{pts}" fill="none" stroke="{c}" stroke-width="2"/>"#,
            pts = pts.join(" "),
            c = color(si),
        );
    }
    for (label, v) in [("max", hi), ("min", lo)] {
        let y = if label == "max" { plot.top + 4.0 } else { plot.top + plot.height };
        let _ = write!(
            out,
            r#"<text x="{x:.2}" y="{y:.2}" font-size="9" text-anchor="end" fill="{fg}">{v:.2}</text>"#,
            x = plot.left - 4.0,
            fg = p.foreground,
        );
    }
    x_tick_labels(out, &plot, &chart.x_labels, step, 0.0, p);
    let labels: Vec<&str> = chart.series.iter().map(|s| s.label.as_str()).collect();
    legend(out, &labels, plot.left + plot.width + 10.0, plot.top + 10.0, p);
}

fn render_grid(out: &mut String, chart: &ChartSpec, w: f64, p: &Palette) {
    let cols = chart.series.len() + 1;
    let cw = w / cols as f64;
    let header = std::iter::once("").chain(chart.series.iter().map(|s| s.label.as_str()));
    for (c, text) in header.enumerate() {
        let _ = write!(
            out,
            r#"<text x="{x:.2}" y="50" font-size="11" font-weight="bold" fill="{fg}">{t}</text>"#,
            x = 8.0 + c as f64 * cw,
            fg = p.foreground,
            t = escape_html(text),
        );
    }
    for (r, label) in chart.x_labels.iter().enumerate() {
        let y = 68.0 + r as f64 * 16.0;
        let _ = write!(out, r#"<text x="8" y="{y:.2}" font-size="11" fill="{fg}">{l}</text>"#, fg = p.foreground, l = escape_html(label));
        for (c, s) in chart.series.iter().enumerate() {
            let _ = write!(
                out,
                r#"<text x="{x:.2}" y="{y:.2}" font-size="11" fill="{fg}">{v:.2}</text>"#,
                x = 8.0 + (c + 1) as f64 * cw,
                fg = p.foreground,
                v = s.values[r],
            );
        }
    }
}

pub fn render_chart_svg(chart: &ChartSpec, opts: &RenderOptions) -> Result<String, RenderError> {
    opts.validate()?;
    chart.validate()?;
    let (w, mut h) = opts.chart_size();
    if chart.chart_kind == ChartKind::Table {
        h = h.max(80.0 + chart.x_labels.len() as f64 * 16.0);
    }
    let p = opts.theme.palette();
    let mut out = String::new();
    svg_open(&mut out, w, h, chart.chart_kind, &chart.title, &p);
    match chart.chart_kind {
        ChartKind::Piechart => render_pie(&mut out, chart, w, h, &p)?,
        ChartKind::Barchart => render_bars(&mut out, chart, w, h, &p),
        ChartKind::Linechart => render_lines(&mut out, chart, w, h, &p),
        ChartKind::Table => render_grid(&mut out, chart, w, &p),
    }
    out.push_str("</svg>");
    Ok(out)
}

fn render_table(out: &mut String, t: &TableSpec) {
    out.push_str(r#"<table class="data"><thead><tr>"#);
    for h in &t.headers {
        let _ = write!(out, "<th>{}</th>", escape_html(h));
    }
    out.push_str("</tr></thead><tbody>");
    for row in &t.rows {
        out.push_str("<tr>");
        for cell in row {
            let _ = write!(out, "<td>{}</td>", escape_html(cell));
        }
        out.push_str("</tr>");
    }
    out.push_str("</tbody></table>");
}

fn render_slide(out: &mut String, index: usize, slide: &Slide, opts: &RenderOptions) -> Result<(), RenderError> {
    let _ = write!(
        out,
        r#"<section class="slide" id="slide-{n}"><header class="title-bar"><h2>{t}</h2><span class="date">{d}</span></header><div class="charts">"#,
        n = index + 1,
        t = escape_html(&slide.title),
        d = slide.date,
    );
    for obj in &slide.objects {
        match obj {
            SlideObject::Chart(c) => out.push_str(&render_chart_svg(c, opts)?),
            SlideObject::Table(t) => render_table(out, t),
            SlideObject::Insight { .. } => {}
        }
    }
    out.push_str("</div>");
    for obj in &slide.objects {
        if let SlideObject::Insight { lines } = obj {
            out.push_str(r#"<ul class="insights">"#);
            for l in lines {
                let _ = write!(out, "<li>{}</li>", escape_html(l));
            }
            out.push_str("</ul>");
        }
    }
    out.push_str("</section>\n");
    Ok(())
}

pub fn render_html(deck: &Deck, opts: &RenderOptions) -> Result<String, RenderError> {
    opts.validate()?;
    deck.validate()?;
    let p = opts.theme.palette();
    let (w, h) = opts.page_size;
    let mut out = String::new();
    let _ = write!(
        out,
        "<!DOCTYPE html>\n<html lang=\"en\"><head><meta charset=\"utf-8\"/><title>{t}</title><style>\
body{{background:{bg};color:{fg};font-family:sans-serif;margin:0;padding:16px}}\
.slide{{width:{w}px;min-height:{h}px;margin:0 auto 24px;border:1px solid {g};padding:0 0 12px}}\
.title-bar{{background:{tb};color:#ffffff;padding:8px 16px;display:flex;justify-content:space-between}}\
.title-bar h2{{margin:0;font-size:20px}}.charts{{padding:12px;text-align:center}}\
.insights{{margin:0 24px}}table.data{{border-collapse:collapse;margin:0 auto}}\
table.data td,table.data th{{border:1px solid {g};padding:2px 8px}}\
</style></head><body><header class=\"deck-header\"><h1>{t}</h1><p>{n} slides, horizon {hm} months, {agg} aggregation, comparables: {cf}</p></header>\n",
        t = escape_html(&deck.name),
        bg = p.background,
        fg = p.foreground,
        g = p.grid,
        tb = p.title_bar,
        n = deck.slides.len(),
        hm = deck.parameters.horizon_months,
        agg = deck.parameters.aggregation_metric.as_str(),
        cf = escape_html(&deck.parameters.comparable_firms.join(", ")),
    );
    for (i, slide) in deck.slides.iter().enumerate() {
        render_slide(&mut out, i, slide, opts)?;
    }
    if opts.embed_data {
        // '<' only occurs inside JSON strings, where < is an equivalent escape
        let json = serialize_deck(deck).replace('<', "\\u003c");
        let _ = write!(out, "<script type=\"application/json\" id=\"deck-data\">{json}</script>");
    }
    out.push_str("</body></html>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deck::DataSeries;

    fn chart(kind: ChartKind, values: &[f64]) -> ChartSpec {
        let labels = (0..values.len()).map(|i| format!("c{i}")).collect();
        ChartSpec::new(kind, "t", vec![DataSeries { label: "s".into(), values: values.to_vec() }], labels).unwrap()
    }

    #[test]
    fn wedge_angles() {
        assert_eq!(pie_wedge_angles(&[1.0; 4]).unwrap(), vec![90.0; 4]);
        let a = pie_wedge_angles(&[2.0, 3.0, 5.0]).unwrap();
        for (got, want) in a.iter().zip([72.0, 108.0, 180.0]) {
            assert!((got - want).abs() < 1e-9);
        }
        assert!(matches!(pie_wedge_angles(&[0.0, 0.0]), Err(RenderError::DegenerateData(_))));
        let svg = render_chart_svg(&chart(ChartKind::Piechart, &[0.0, 0.0]), &RenderOptions::default());
        assert!(matches!(svg, Err(RenderError::DegenerateData(_))));
    }

    #[test]
    fn bars_and_lines() {
        assert_eq!(bar_heights(&[0.0, 5.0], 100.0), vec![0.0, 100.0]);
        let svg = render_chart_svg(&chart(ChartKind::Barchart, &[0.0, 5.0]), &RenderOptions::default()).unwrap();
        assert_eq!(svg.matches("class=\"bar\"").count(), 2);
        assert!(svg.contains("height=\"0.0000\""));
        let svg = render_chart_svg(&chart(ChartKind::Linechart, &[1.0, 2.0, 3.0]), &RenderOptions::default()).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 1);
    }

    #[test]
    fn single_full_wedge_is_drawn() {
        let svg = render_chart_svg(&chart(ChartKind::Piechart, &[0.0, 4.0]), &RenderOptions::default()).unwrap();
        assert_eq!(svg.matches("class=\"wedge\"").count(), 2);
        assert!(svg.contains("data-angle=\"360.000000\""));
    }

    #[test]
    fn escaping_and_options() {
        assert_eq!(escape_html("<a & 'b'>"), "&lt;a &amp; &#39;b&#39;&gt;");
        let bad = RenderOptions { page_size: (0, 10), ..Default::default() };
        assert!(render_html(&Deck::new("d"), &bad).is_err());
        let embedded = render_html(&Deck::new("x</script>"), &RenderOptions { embed_data: true, ..Default::default() }).unwrap();
        assert_eq!(embedded.matches("</script>").count(), 1);
    }
}
