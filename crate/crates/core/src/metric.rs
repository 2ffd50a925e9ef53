//! Per-image PH scoring.
//!
//! A heatmap is binarized at `θ`; each part gets an F1-style score that
//! combines its own recall with the object-level precision of the whole
//! foreground (part-level precision is unobservable because the heatmap is
//! not split by part). The background is scored on the complements `1 - M`
//! and `1 - H`, where both precision and recall are exact.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{BinaryGrid, BinaryMap};
use crate::io::{Heatmap, PartMaskSet};

/// Part name used for the background record.
pub const BACKGROUND: &str = "Bg";

/// Default binarization threshold.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// One score row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PHRecord {
    pub image_id: String,
    pub category: String,
    /// Part name, or [`BACKGROUND`].
    pub part: String,
    pub ph: f64,
    pub recall: f64,
    /// Approximate object precision for parts; exact background precision for `Bg`.
    pub precision_used: f64,
    /// Pixels in the part mask (for `Bg`, pixels outside the foreground).
    pub part_pixels: u64,
}

impl PHRecord {
    pub fn is_background(&self) -> bool {
        self.part == BACKGROUND
    }
}

/// Min-max normalization; a constant map becomes all zeros.
pub fn normalize_minmax(h: &Heatmap) -> Heatmap {
    let (min, max) = h
        .values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let range = max - min;
    let values = if h.values().is_empty() || range <= 0.0 {
        vec![0.0; h.values().len()]
    } else {
        h.values()
            .iter()
            .map(|&v| ((v - min) / range).clamp(0.0, 1.0))
            .collect()
    };
    Heatmap::from_trusted(h.width(), h.height(), values)
}

/// `bit = 1` iff `value > θ`.
pub fn binarize(h: &Heatmap, threshold: f64) -> Result<BinaryMap> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidThreshold(threshold));
    }
    let bits: Vec<u8> = h.values().iter().map(|&v| (v > threshold) as u8).collect();
    Ok(BinaryGrid::from_bits(h.width(), h.height(), bits))
}

fn check_dims(expected: &BinaryGrid, actual: &BinaryGrid) -> Result<()> {
    if expected.dims() != actual.dims() {
        return Err(Error::DimensionMismatch {
            expected: expected.dims(),
            actual: actual.dims(),
        });
    }
    Ok(())
}

#[inline]
fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Object-level precision `TP / ΣH` with `TP = Σ(M ⊙ H)`; 0 when `ΣH = 0`.
pub fn approx_precision(foreground: &BinaryGrid, hb: &BinaryMap) -> Result<f64> {
    check_dims(foreground, hb)?;
    Ok(ratio(foreground.overlap(hb), hb.count()))
}

/// Part recall `Σ(M^p ⊙ H) / ΣM^p`. Empty parts are an error; callers skip them.
pub fn part_recall(part: &BinaryGrid, hb: &BinaryMap) -> Result<f64> {
    check_dims(part, hb)?;
    let area = part.count();
    if area == 0 {
        return Err(Error::EmptyPart);
    }
    Ok(ratio(part.overlap(hb), area))
}

/// Harmonic mean of precision and recall; 0 when both are 0.
#[inline]
pub fn ph_score(precision: f64, recall: f64) -> f64 {
    let sum = precision + recall;
    if sum <= 0.0 {
        0.0
    } else {
        2.0 * precision * recall / sum
    }
}

/// Exact precision, recall and F1 of `1 - H` against `1 - M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackgroundScore {
    pub precision: f64,
    pub recall: f64,
    pub ph: f64,
    /// `Σ(1 - M)`.
    pub pixels: u64,
}

pub fn background_score(foreground: &BinaryGrid, hb: &BinaryMap) -> Result<BackgroundScore> {
    check_dims(foreground, hb)?;
    let total = foreground.len() as u64;
    let tp = foreground.overlap_of_complements(hb);
    let cold = total - hb.count();
    let outside = total - foreground.count();
    let precision = ratio(tp, cold);
    let recall = ratio(tp, outside);
    Ok(BackgroundScore {
        precision,
        recall,
        ph: ph_score(precision, recall),
        pixels: outside,
    })
}

/// Background PH.
pub fn background_ph(foreground: &BinaryGrid, hb: &BinaryMap) -> Result<f64> {
    background_score(foreground, hb).map(|s| s.ph)
}

/// Scores one image: a record per nonempty part (manifest order) then a `Bg`
/// record unless the object fills the frame.
///
/// The heatmap must already match the mask resolution. With `normalize` set
/// the heatmap is min-max normalized before binarization.
pub fn score_image(
    image_id: &str,
    masks: &PartMaskSet,
    heatmap: &Heatmap,
    threshold: f64,
    normalize: bool,
) -> Result<Vec<PHRecord>> {
    if heatmap.dims() != masks.dims() {
        return Err(Error::DimensionMismatch {
            expected: masks.dims(),
            actual: heatmap.dims(),
        });
    }
    let hb = if normalize {
        binarize(&normalize_minmax(heatmap), threshold)?
    } else {
        binarize(heatmap, threshold)?
    };
    score_binary(image_id, masks, &hb)
}

/// Scores an already binarized heatmap.
pub fn score_binary(image_id: &str, masks: &PartMaskSet, hb: &BinaryMap) -> Result<Vec<PHRecord>> {
    let precision = approx_precision(&masks.foreground, hb)?;
    let mut records = Vec::with_capacity(masks.parts.len() + 1);
    let record = |part: &str, ph, recall, precision_used, part_pixels| PHRecord {
        image_id: image_id.to_owned(),
        category: masks.category.clone(),
        part: part.to_owned(),
        ph,
        recall,
        precision_used,
        part_pixels,
    };
    for (name, grid) in &masks.parts {
        check_dims(grid, hb)?;
        let area = grid.count();
        if area == 0 {
            continue;
        }
        let recall = ratio(grid.overlap(hb), area);
        records.push(record(
            name,
            ph_score(precision, recall),
            recall,
            precision,
            area,
        ));
    }
    let bg = background_score(&masks.foreground, hb)?;
    if bg.pixels > 0 {
        records.push(record(
            BACKGROUND,
            bg.ph,
            bg.recall,
            bg.precision,
            bg.pixels,
        ));
    }
    Ok(records)
}

/// Writes records as JSON Lines.
pub fn write_jsonl<'a, W: Write>(
    mut out: W,
    records: impl IntoIterator<Item = &'a PHRecord>,
) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Parses JSON Lines records, skipping blank lines.
pub fn read_jsonl(text: &str) -> std::result::Result<Vec<PHRecord>, (usize, serde_json::Error)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| (i + 1, e)))
        .collect()
}
