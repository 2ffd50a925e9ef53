//! Grouped boxplots as standalone SVG 1.1 documents.
//!
//! Output is a pure function of the input stats: coordinates are printed
//! with fixed precision and iteration order follows the stats order, so
//! identical inputs give byte-identical files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::aggregate::{part_order, CategoryStats, GroupStats};
use crate::error::{Error, Result};

const PALETTE: [&str; 8] = [
    "#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860", "#da8bc3", "#8c8c8c",
];

const MARGIN_LEFT: f64 = 56.0;
const MARGIN_RIGHT: f64 = 16.0;
const MARGIN_TOP: f64 = 48.0;
const MARGIN_BOTTOM: f64 = 40.0;
const PLOT_HEIGHT: f64 = 280.0;
const BOX_WIDTH: f64 = 18.0;
const BOX_GAP: f64 = 4.0;
const SLOT_PAD: f64 = 16.0;

/// A labelled set of stats, e.g. one network.
#[derive(Debug, Clone, Copy)]
pub struct Series<'a> {
    pub label: &'a str,
    pub stats: &'a CategoryStats,
}

/// Parts of `category` across all series, alphabetical with `Bg` last.
fn parts_of(category: &str, series: &[Series<'_>]) -> Vec<String> {
    let mut parts: Vec<String> = series
        .iter()
        .flat_map(|s| s.stats.category(category).map(|g| g.part.clone()))
        .collect();
    parts.sort_by(|a, b| part_order(a, b));
    parts.dedup();
    parts
}

/// Renders one category panel.
pub fn render_category_svg(category: &str, series: &[Series<'_>]) -> String {
    let parts = parts_of(category, series);
    let n_series = series.len().max(1) as f64;
    let slot = n_series * BOX_WIDTH + (n_series - 1.0) * BOX_GAP + SLOT_PAD;
    let legend_w: f64 = series.iter().map(|s| legend_entry_width(s.label)).sum();
    let plot_w = (parts.len().max(1) as f64 * slot).max(160.0).max(legend_w);
    let width = MARGIN_LEFT + plot_w + MARGIN_RIGHT;
    let height = MARGIN_TOP + PLOT_HEIGHT + MARGIN_BOTTOM;
    let y = |v: f64| MARGIN_TOP + (1.0 - v.clamp(0.0, 1.0)) * PLOT_HEIGHT;

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="18" font-size="14" text-anchor="middle">{}</text>"#,
        width / 2.0,
        escape(category)
    );

    // y axis with ticks every 0.2
    let _ = writeln!(s, r##"<g stroke="#333" stroke-width="1">"##);
    let _ = writeln!(
        s,
        r#"<line x1="{MARGIN_LEFT:.2}" y1="{:.2}" x2="{MARGIN_LEFT:.2}" y2="{:.2}"/>"#,
        y(1.0),
        y(0.0)
    );
    let _ = writeln!(
        s,
        r#"<line x1="{MARGIN_LEFT:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/>"#,
        y(0.0),
        MARGIN_LEFT + plot_w,
        y(0.0)
    );
    for i in 0..=5 {
        let v = i as f64 / 5.0;
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{MARGIN_LEFT:.2}" y2="{:.2}"/>"#,
            MARGIN_LEFT - 4.0,
            y(v),
            y(v)
        );
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r#"<g font-size="10" text-anchor="end">"#);
    for i in 0..=5 {
        let v = i as f64 / 5.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}">{v:.1}</text>"#,
            MARGIN_LEFT - 7.0,
            y(v) + 3.5
        );
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.2}" font-size="11" text-anchor="middle" transform="rotate(-90 14 {:.2})">PH</text>"#,
        y(0.5),
        y(0.5)
    );

    // legend
    let _ = writeln!(s, r#"<g font-size="10">"#);
    let mut lx = MARGIN_LEFT;
    for (k, ser) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let _ = writeln!(
            s,
            r#"<rect x="{lx:.2}" y="28" width="10" height="10" fill="{color}"/><text x="{:.2}" y="37">{}</text>"#,
            lx + 14.0,
            escape(ser.label)
        );
        lx += legend_entry_width(ser.label);
    }
    let _ = writeln!(s, "</g>");

    for (j, part) in parts.iter().enumerate() {
        let slot_x = MARGIN_LEFT + j as f64 * slot;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"#,
            slot_x + slot / 2.0,
            y(0.0) + 16.0,
            escape(part)
        );
        for (k, ser) in series.iter().enumerate() {
            let Some(g) = ser.stats.get(category, part) else {
                continue;
            };
            let x0 = slot_x + SLOT_PAD / 2.0 + k as f64 * (BOX_WIDTH + BOX_GAP);
            draw_box(&mut s, g, x0, PALETTE[k % PALETTE.len()], &y);
        }
    }
    let _ = writeln!(s, "</svg>");
    s
}

fn legend_entry_width(label: &str) -> f64 {
    14.0 + 7.0 * label.chars().count() as f64 + 12.0
}

fn draw_box(s: &mut String, g: &GroupStats, x0: f64, color: &str, y: &impl Fn(f64) -> f64) {
    let xc = x0 + BOX_WIDTH / 2.0;
    let x1 = x0 + BOX_WIDTH;
    let cap = BOX_WIDTH / 4.0;
    let _ = writeln!(s, r##"<g class="box" stroke="#222" stroke-width="1">"##);
    let _ = writeln!(
        s,
        r#"<line x1="{xc:.2}" y1="{:.2}" x2="{xc:.2}" y2="{:.2}"/>"#,
        y(g.whisker_high),
        y(g.q3)
    );
    let _ = writeln!(
        s,
        r#"<line x1="{xc:.2}" y1="{:.2}" x2="{xc:.2}" y2="{:.2}"/>"#,
        y(g.q1),
        y(g.whisker_low)
    );
    for w in [g.whisker_low, g.whisker_high] {
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/>"#,
            xc - cap,
            y(w),
            xc + cap,
            y(w)
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{x0:.2}" y="{:.2}" width="{BOX_WIDTH:.2}" height="{:.2}" fill="{color}" fill-opacity="0.85"/>"#,
        y(g.q3),
        y(g.q1) - y(g.q3)
    );
    let _ = writeln!(
        s,
        r#"<line x1="{x0:.2}" y1="{:.2}" x2="{x1:.2}" y2="{:.2}" stroke-width="2"/>"#,
        y(g.q2),
        y(g.q2)
    );
    for &o in &g.outliers {
        let _ = writeln!(
            s,
            r#"<circle class="outlier" cx="{xc:.2}" cy="{:.2}" r="2.5" fill="none"/>"#,
            y(o)
        );
    }
    let _ = writeln!(s, "</g>");
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// File name for a category panel; anything outside `[A-Za-z0-9_-]` becomes `_`.
pub fn panel_file_name(category: &str) -> String {
    let stem: String = category
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{stem}.svg")
}

/// Writes one SVG per category plus `index.html` linking them, returning the
/// panel paths in category order.
pub fn render_boxplots(series: &[Series<'_>], out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let out_dir = out_dir.as_ref();
    let mut categories: Vec<&str> = series.iter().flat_map(|s| s.stats.categories()).collect();
    categories.sort_unstable();
    categories.dedup();
    if categories.is_empty() {
        return Err(Error::EmptyInput("no groups to plot"));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let mut written = Vec::with_capacity(categories.len());
    let mut index = String::from(
        "<!DOCTYPE html>\n<html>\n<head><meta charset=\"utf-8\"><title>PH boxplots</title></head>\n<body>\n",
    );
    let mut used_names = std::collections::HashSet::new();
    for cat in categories {
        let mut name = panel_file_name(cat);
        let mut k = 1;
        while !used_names.insert(name.clone()) {
            k += 1;
            name = format!("{}-{k}.svg", panel_file_name(cat).trim_end_matches(".svg"));
        }
        let path = out_dir.join(&name);
        std::fs::write(&path, render_category_svg(cat, series)).map_err(|e| Error::io(&path, e))?;
        let _ = writeln!(
            index,
            "<figure><img src=\"{}\" alt=\"{}\"><figcaption>{}</figcaption></figure>",
            escape(&name),
            escape(cat),
            escape(cat)
        );
        written.push(path);
    }
    index.push_str("</body>\n</html>\n");
    let index_path = out_dir.join("index.html");
    std::fs::write(&index_path, index).map_err(|e| Error::io(&index_path, e))?;
    Ok(written)
}
