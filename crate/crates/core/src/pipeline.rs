//! Batch scoring over a manifest.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::{load_heatmap, load_part_masks, resize_bilinear, ImageEntry, Manifest};
use crate::metric::{normalize_minmax, score_image, PHRecord};

/// Loads, normalizes (optionally), resizes and scores one entry.
///
/// Normalization runs at the heatmap's native resolution, before resizing to
/// the mask; masks are never resampled.
pub fn score_entry(entry: &ImageEntry, threshold: f64, normalize: bool) -> Result<Vec<PHRecord>> {
    let masks = load_part_masks(entry)?;
    let mut heatmap = load_heatmap(&entry.heatmap_path)?;
    if normalize {
        heatmap = normalize_minmax(&heatmap);
    }
    if heatmap.dims() != masks.dims() {
        heatmap = resize_bilinear(&heatmap, masks.width, masks.height)?;
    }
    score_image(&entry.id, &masks, &heatmap, threshold, false)
}

#[derive(Debug, Default)]
pub struct RunOutcome {
    /// Records of all successfully scored images, in manifest order.
    pub records: Vec<PHRecord>,
    pub scored: usize,
    /// `(image id, error)` for every skipped image, in manifest order.
    pub failures: Vec<(String, Error)>,
}

/// Scores every entry on a pool of `workers` threads. Output order is the
/// manifest order regardless of completion order.
pub fn score_manifest(
    manifest: &Manifest,
    threshold: f64,
    normalize: bool,
    workers: usize,
) -> Result<RunOutcome> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidThreshold(threshold));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool");
    let results: Vec<Result<Vec<PHRecord>>> = pool.install(|| {
        manifest
            .entries
            .par_iter()
            .map(|e| score_entry(e, threshold, normalize))
            .collect()
    });

    let mut outcome = RunOutcome::default();
    for (entry, result) in manifest.entries.iter().zip(results) {
        match result {
            Ok(mut recs) => {
                outcome.scored += 1;
                outcome.records.append(&mut recs);
            }
            Err(e) => outcome.failures.push((entry.id.clone(), e)),
        }
    }
    Ok(outcome)
}
