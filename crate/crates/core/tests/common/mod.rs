#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::Path;
use std::thread::JoinHandle;

use pqah::io::{write_f32_grid, write_indexed_png};
use pqah::{BinaryGrid, Heatmap, PartMaskSet};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// A randomly generated scoring instance kept in plain nested vectors so the
/// reference below never touches the library's grid helpers.
#[derive(Debug, Clone)]
pub struct Scene {
    pub width: usize,
    pub height: usize,
    /// `labels[y][x]`: 0 = background, k = part k.
    pub labels: Vec<Vec<u8>>,
    pub part_names: Vec<String>,
    pub heat: Vec<Vec<f64>>,
    pub threshold: f64,
}

impl Scene {
    pub fn random(rng: &mut StdRng, max_side: usize) -> Self {
        let width = rng.random_range(1..=max_side);
        let height = rng.random_range(1..=max_side);
        let n_parts = rng.random_range(1..=4u8);
        let bg_bias = rng.random_range(0.0..1.0);
        let labels = (0..height)
            .map(|_| {
                (0..width)
                    .map(|_| {
                        if rng.random_bool(bg_bias) {
                            0
                        } else {
                            rng.random_range(1..=n_parts)
                        }
                    })
                    .collect()
            })
            .collect();
        let threshold = match rng.random_range(0..10) {
            0 => 0.0,
            1 => 1.0,
            2 => 0.5,
            _ => rng.random_range(0.0..=1.0),
        };
        let heat = (0..height)
            .map(|_| {
                (0..width)
                    .map(|_| match rng.random_range(0..12) {
                        0 => threshold,
                        1 => 0.0,
                        2 => 1.0,
                        _ => rng.random_range(0.0..=1.0),
                    })
                    .collect()
            })
            .collect();
        Self {
            width,
            height,
            labels,
            part_names: (1..=n_parts).map(|k| format!("p{k}")).collect(),
            heat,
            threshold,
        }
    }

    pub fn label_map(&self) -> Vec<(u8, String)> {
        self.part_names
            .iter()
            .enumerate()
            .map(|(k, n)| (k as u8 + 1, n.clone()))
            .collect()
    }

    pub fn flat_labels(&self) -> Vec<u8> {
        self.labels.iter().flatten().copied().collect()
    }

    pub fn mask_set(&self) -> PartMaskSet {
        PartMaskSet::from_indexed(
            self.width as u32,
            self.height as u32,
            &self.flat_labels(),
            &self.label_map(),
            "cat",
        )
        .unwrap()
    }

    pub fn heatmap(&self) -> Heatmap {
        Heatmap::new(
            self.width as u32,
            self.height as u32,
            self.heat.iter().flatten().copied().collect(),
        )
        .unwrap()
    }
}

/// Reference result row: (part, ph, recall, precision).
pub type RefRow = (String, f64, f64, f64);

/// Nested-loop transcription of the per-image procedure, with the empty-map,
/// zero-sum, empty-part and full-frame conventions written out explicitly.
pub fn reference_scores(scene: &Scene, normalize: bool) -> Vec<RefRow> {
    let mut heat = scene.heat.clone();
    if normalize {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for row in &heat {
            for &v in row {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        for row in heat.iter_mut() {
            for v in row.iter_mut() {
                *v = if hi > lo { (*v - lo) / (hi - lo) } else { 0.0 };
            }
        }
    }
    let on = |x: usize, y: usize| heat[y][x] > scene.threshold;
    let in_m = |x: usize, y: usize| scene.labels[y][x] != 0;

    let mut tp = 0u64;
    let mut sum_h = 0u64;
    for y in 0..scene.height {
        for x in 0..scene.width {
            if on(x, y) {
                sum_h += 1;
                if in_m(x, y) {
                    tp += 1;
                }
            }
        }
    }
    let fp = sum_h - tp;
    let precision = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let f1 = |p: f64, r: f64| {
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    };

    let mut rows = Vec::new();
    for (k, name) in scene.part_names.iter().enumerate() {
        let label = k as u8 + 1;
        let mut tp = 0u64;
        let mut area = 0u64;
        for y in 0..scene.height {
            for x in 0..scene.width {
                if scene.labels[y][x] == label {
                    area += 1;
                    if on(x, y) {
                        tp += 1;
                    }
                }
            }
        }
        if area == 0 {
            continue;
        }
        let fn_ = area - tp;
        let recall = tp as f64 / (tp + fn_) as f64;
        rows.push((name.clone(), f1(precision, recall), recall, precision));
    }

    let (mut tp, mut cold, mut outside) = (0u64, 0u64, 0u64);
    for y in 0..scene.height {
        for x in 0..scene.width {
            let not_h = !on(x, y);
            let not_m = !in_m(x, y);
            if not_h {
                cold += 1;
            }
            if not_m {
                outside += 1;
            }
            if not_h && not_m {
                tp += 1;
            }
        }
    }
    if outside > 0 {
        let fp = cold - tp;
        let fn_ = outside - tp;
        let p = if tp + fp == 0 {
            0.0
        } else {
            tp as f64 / (tp + fp) as f64
        };
        let r = if tp + fn_ == 0 {
            0.0
        } else {
            tp as f64 / (tp + fn_) as f64
        };
        rows.push(("Bg".to_string(), f1(p, r), r, p));
    }
    rows
}

pub fn seeded(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// 4×4 scene with parts at the top-left and bottom-right 2×2 blocks and a
/// heatmap of `hot` on the left half, 0.1 elsewhere.
pub fn oracle_scene(hot: f64) -> (PartMaskSet, Heatmap) {
    let p1 = BinaryGrid::from_fn(4, 4, |x, y| x < 2 && y < 2);
    let p2 = BinaryGrid::from_fn(4, 4, |x, y| x >= 2 && y >= 2);
    let set = PartMaskSet::from_parts("toy", vec![("p1".into(), p1), ("p2".into(), p2)]);
    let h = Heatmap::from_fn(4, 4, |x, _| if x < 2 { hot } else { 0.1 }).unwrap();
    (set, h)
}

/// Writes the 4×4 oracle scene's mask and heatmap under `dir` with the given stem.
pub fn write_oracle_files(dir: &Path, stem: &str, hot: f64) {
    #[rustfmt::skip]
    let idx = [
        1, 1, 0, 0,
        1, 1, 0, 0,
        0, 0, 2, 2,
        0, 0, 2, 2,
    ];
    write_indexed_png(dir.join(format!("{stem}_mask.png")), 4, 4, &idx).unwrap();
    let (_, h) = oracle_scene(hot);
    write_f32_grid(dir.join(format!("{stem}_heat.pqf")), &h).unwrap();
}

pub fn oracle_entry_json(id: &str, stem: &str) -> String {
    format!(
        r#"{{"id": "{id}", "category": "toy", "mask_path": "{stem}_mask.png", "heatmap_path": "{stem}_heat.pqf", "label_map": {{"1": "p1", "2": "p2"}}}}"#
    )
}

/// Minimal one-shot HTTP server answering a single request with `status`
/// and `body`. The join handle yields the raw request text.
pub fn stub_server(status: u16, body: String) -> (String, JoinHandle<String>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!(
        "http://{}/v1/chat/completions",
        listener.local_addr().unwrap()
    );
    let handle = std::thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut reader = BufReader::new(stream.try_clone().unwrap());
        let mut head = String::new();
        let mut content_length = 0usize;
        loop {
            let mut line = String::new();
            if reader.read_line(&mut line).unwrap() == 0 {
                break;
            }
            if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                content_length = v.trim().parse().unwrap();
            }
            let end = line == "\r\n";
            head.push_str(&line);
            if end {
                break;
            }
        }
        let mut req_body = vec![0; content_length];
        reader.read_exact(&mut req_body).unwrap();
        head.push_str(&String::from_utf8_lossy(&req_body));
        let mut stream = stream;
        let reason = if status == 200 { "OK" } else { "Error" };
        write!(
            stream,
            "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            body.len()
        )
        .unwrap();
        stream.flush().unwrap();
        head
    });
    (url, handle)
}

pub fn chat_response(content: &str) -> String {
    serde_json::json!({
        "id": "stub",
        "object": "chat.completion",
        "choices": [{"index": 0, "message": {"role": "assistant", "content": content}, "finish_reason": "stop"}]
    })
    .to_string()
}
