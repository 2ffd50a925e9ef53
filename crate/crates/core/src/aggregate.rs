//! Quartile statistics per (category, part) and dataset-level summary rows.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{PHRecord, BACKGROUND};

/// Linearly interpolated quantile at rank `(n - 1) * q` of an ascending slice.
pub fn quantile(sorted: &[f64], q: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::EmptyInput("quantile of an empty list"));
    }
    let q = q.clamp(0.0, 1.0);
    let rank = (sorted.len() - 1) as f64 * q;
    let lo = rank.floor() as usize;
    let frac = rank - lo as f64;
    let v = if lo + 1 < sorted.len() {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    } else {
        sorted[lo]
    };
    Ok(v)
}

/// Boxplot statistics of one (category, part) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub category: String,
    pub part: String,
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
    pub n: usize,
}

impl GroupStats {
    /// Quartiles plus Tukey whiskers (most extreme points within 1.5·IQR of the box).
    pub fn from_values(
        category: impl Into<String>,
        part: impl Into<String>,
        mut values: Vec<f64>,
    ) -> Result<Self> {
        values.sort_by(f64::total_cmp);
        let q1 = quantile(&values, 0.25)?;
        let q2 = quantile(&values, 0.5)?;
        let q3 = quantile(&values, 0.75)?;
        let iqr = q3 - q1;
        let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
        let whisker_low = values
            .iter()
            .copied()
            .find(|&v| v >= lo_fence)
            .unwrap_or(q1)
            .min(q1);
        let whisker_high = values
            .iter()
            .rev()
            .copied()
            .find(|&v| v <= hi_fence)
            .unwrap_or(q3)
            .max(q3);
        let outliers = values
            .iter()
            .copied()
            .filter(|&v| v < whisker_low || v > whisker_high)
            .collect();
        Ok(Self {
            category: category.into(),
            part: part.into(),
            q1,
            q2,
            q3,
            whisker_low,
            whisker_high,
            outliers,
            n: values.len(),
        })
    }

    pub fn is_background(&self) -> bool {
        self.part == BACKGROUND
    }
}

/// Orders part names alphabetically with the background last.
pub fn part_order(a: &str, b: &str) -> Ordering {
    (a == BACKGROUND, a).cmp(&(b == BACKGROUND, b))
}

/// All groups of a run, sorted by category then part (`Bg` last).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CategoryStats {
    pub groups: Vec<GroupStats>,
}

impl CategoryStats {
    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Category names in sorted order, deduplicated.
    pub fn categories(&self) -> Vec<&str> {
        let mut cats: Vec<&str> = self.groups.iter().map(|g| g.category.as_str()).collect();
        cats.dedup();
        cats
    }

    pub fn category(&self, name: &str) -> impl Iterator<Item = &GroupStats> {
        let name = name.to_owned();
        self.groups.iter().filter(move |g| g.category == name)
    }

    pub fn get(&self, category: &str, part: &str) -> Option<&GroupStats> {
        self.groups
            .iter()
            .find(|g| g.category == category && g.part == part)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut stats: Self = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        stats.sort();
        Ok(stats)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("stats serialize");
        s.push('\n');
        s
    }

    fn sort(&mut self) {
        self.groups.sort_by(|a, b| {
            a.category
                .cmp(&b.category)
                .then_with(|| part_order(&a.part, &b.part))
        });
    }
}

/// Accumulates PH values per (category, part). Partial accumulators from
/// different workers can be merged in any order.
#[derive(Debug, Clone, Default)]
pub struct Aggregator {
    values: BTreeMap<(String, String), Vec<f64>>,
}

impl Aggregator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, record: &PHRecord) {
        self.values
            .entry((record.category.clone(), record.part.clone()))
            .or_default()
            .push(record.ph);
    }

    pub fn merge(&mut self, other: Aggregator) {
        for (key, mut vals) in other.values {
            self.values.entry(key).or_default().append(&mut vals);
        }
    }

    pub fn finish(self) -> CategoryStats {
        let mut stats = CategoryStats {
            groups: self
                .values
                .into_iter()
                .map(|((cat, part), vals)| {
                    GroupStats::from_values(cat, part, vals).expect("groups are nonempty")
                })
                .collect(),
        };
        stats.sort();
        stats
    }
}

impl<'a> Extend<&'a PHRecord> for Aggregator {
    fn extend<I: IntoIterator<Item = &'a PHRecord>>(&mut self, iter: I) {
        for r in iter {
            self.push(r);
        }
    }
}

pub fn aggregate_scores<'a>(records: impl IntoIterator<Item = &'a PHRecord>) -> CategoryStats {
    let mut agg = Aggregator::new();
    agg.extend(records);
    agg.finish()
}

/// Averaged quartile columns for one labelled run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub label: String,
    pub mean_q1: f64,
    pub mean_q2: f64,
    pub mean_q3: f64,
}

/// Mean of each quartile over all (category, part) cells; background cells
/// only count when `include_bg` is set.
pub fn dataset_summary(stats: &CategoryStats, label: &str, include_bg: bool) -> Result<SummaryRow> {
    let cells: Vec<&GroupStats> = stats
        .groups
        .iter()
        .filter(|g| include_bg || !g.is_background())
        .collect();
    if cells.is_empty() {
        return Err(Error::EmptyInput("no stats cells to summarize"));
    }
    let n = cells.len() as f64;
    let mean = |f: fn(&GroupStats) -> f64| cells.iter().map(|g| f(g)).sum::<f64>() / n;
    Ok(SummaryRow {
        label: label.to_owned(),
        mean_q1: mean(|g| g.q1),
        mean_q2: mean(|g| g.q2),
        mean_q3: mean(|g| g.q3),
    })
}

pub const SUMMARY_HEADER: &str = "label,mean_q1,mean_q2,mean_q3";

pub fn write_summary_csv<W: Write>(mut out: W, rows: &[SummaryRow]) -> std::io::Result<()> {
    writeln!(out, "{SUMMARY_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{}",
            csv_field(&r.label),
            r.mean_q1,
            r.mean_q2,
            r.mean_q3
        )?;
    }
    out.flush()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}
