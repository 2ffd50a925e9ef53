//! On-disk formats: JSON manifests, indexed part-mask PNGs, and heatmaps
//! (8/16-bit grayscale PNG or the raw `PQF1` float grid).

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::grid::BinaryGrid;

/// Magic prefix of the raw float grid format.
pub const F32_GRID_MAGIC: &[u8; 4] = b"PQF1";
const PNG_SIGNATURE: &[u8; 8] = b"\x89PNG\r\n\x1a\n";

/// A validated set of annotated images.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub dataset: String,
    /// Directory the manifest was loaded from; entry paths are resolved against it.
    pub root: PathBuf,
    pub entries: Vec<ImageEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageEntry {
    pub id: String,
    pub category: String,
    /// Resolved path of the indexed mask PNG.
    pub mask_path: PathBuf,
    /// Resolved path of the heatmap file.
    pub heatmap_path: PathBuf,
    /// Mask index to part name, in manifest order.
    pub label_map: Vec<(u8, String)>,
}

impl ImageEntry {
    pub fn part_names(&self) -> impl Iterator<Item = &str> {
        self.label_map.iter().map(|(_, n)| n.as_str())
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifest {
    dataset: String,
    entries: Vec<RawEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    id: String,
    category: String,
    mask_path: String,
    heatmap_path: String,
    label_map: serde_json::Map<String, serde_json::Value>,
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let raw: RawManifest = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
    validate_manifest(raw, root)
}

/// Parses manifest JSON with entry paths resolved against `root`.
pub fn parse_manifest(json: &str, root: impl Into<PathBuf>) -> Result<Manifest> {
    let raw: RawManifest =
        serde_json::from_str(json).map_err(|e| Error::Manifest(format!("parse failure: {e}")))?;
    validate_manifest(raw, root.into())
}

fn validate_manifest(raw: RawManifest, root: PathBuf) -> Result<Manifest> {
    let mut seen = HashSet::new();
    let mut entries = Vec::with_capacity(raw.entries.len());
    for e in raw.entries {
        if !seen.insert(e.id.clone()) {
            return Err(Error::Manifest(format!("duplicate image id {:?}", e.id)));
        }
        let mut label_map = Vec::with_capacity(e.label_map.len());
        let mut names = HashSet::new();
        for (key, value) in e.label_map {
            let index: u8 = key.trim().parse().map_err(|_| {
                Error::Manifest(format!(
                    "entry {:?}: label_map key {key:?} is not a mask index in 1..=255",
                    e.id
                ))
            })?;
            if index == 0 {
                return Err(Error::Manifest(format!(
                    "entry {:?}: index 0 reserved for background",
                    e.id
                )));
            }
            let name = value.as_str().ok_or_else(|| {
                Error::Manifest(format!(
                    "entry {:?}: part name for index {index} must be a string",
                    e.id
                ))
            })?;
            if !names.insert(name.to_owned()) {
                return Err(Error::Manifest(format!(
                    "entry {:?}: duplicate part name {name:?}",
                    e.id
                )));
            }
            label_map.push((index, name.to_owned()));
        }
        entries.push(ImageEntry {
            mask_path: resolve(&root, &e.id, &e.mask_path)?,
            heatmap_path: resolve(&root, &e.id, &e.heatmap_path)?,
            id: e.id,
            category: e.category,
            label_map,
        });
    }
    Ok(Manifest {
        dataset: raw.dataset,
        root,
        entries,
    })
}

fn resolve(root: &Path, id: &str, rel: &str) -> Result<PathBuf> {
    let p = Path::new(rel);
    if p.is_absolute() {
        return Err(Error::Manifest(format!(
            "entry {id:?}: path {rel:?} must be relative to the manifest directory"
        )));
    }
    Ok(root.join(p))
}

/// Named binary part masks of one image plus their union.
#[derive(Debug, Clone, PartialEq)]
pub struct PartMaskSet {
    pub width: u32,
    pub height: u32,
    pub category: String,
    /// Part masks in manifest order; pairwise disjoint.
    pub parts: Vec<(String, BinaryGrid)>,
    pub foreground: BinaryGrid,
}

impl PartMaskSet {
    /// Decodes an index image (0 = background) into one grid per label.
    pub fn from_indexed(
        width: u32,
        height: u32,
        indices: &[u8],
        label_map: &[(u8, String)],
        category: impl Into<String>,
    ) -> Result<Self> {
        assert_eq!(indices.len(), width as usize * height as usize);
        let mut slot_of = [usize::MAX; 256];
        for (slot, (index, _)) in label_map.iter().enumerate() {
            slot_of[*index as usize] = slot;
        }
        let n = indices.len();
        let mut part_bits = vec![vec![0u8; n]; label_map.len()];
        let mut fg = vec![0u8; n];
        for (i, &v) in indices.iter().enumerate() {
            if v == 0 {
                continue;
            }
            let slot = slot_of[v as usize];
            if slot == usize::MAX {
                let w = width.max(1) as usize;
                return Err(Error::UnmappedPartIndex {
                    index: v,
                    x: (i % w) as u32,
                    y: (i / w) as u32,
                });
            }
            part_bits[slot][i] = 1;
            fg[i] = 1;
        }
        let parts = label_map
            .iter()
            .zip(part_bits)
            .map(|((_, name), bits)| (name.clone(), BinaryGrid::from_bits(width, height, bits)))
            .collect();
        Ok(Self {
            width,
            height,
            category: category.into(),
            parts,
            foreground: BinaryGrid::from_bits(width, height, fg),
        })
    }

    /// Builds a set from explicit part grids. Panics if grids disagree in size
    /// or overlap.
    pub fn from_parts(category: impl Into<String>, parts: Vec<(String, BinaryGrid)>) -> Self {
        let (width, height) = parts.first().map(|(_, g)| g.dims()).unwrap_or((0, 0));
        let mut foreground = BinaryGrid::zeros(width, height);
        for (name, g) in &parts {
            assert_eq!(g.dims(), (width, height), "part {name} has mismatched size");
            assert!(
                foreground.is_disjoint(g),
                "part {name} overlaps another part"
            );
            foreground.union_with(g);
        }
        Self {
            width,
            height,
            category: category.into(),
            parts,
            foreground,
        }
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn part(&self, name: &str) -> Option<&BinaryGrid> {
        self.parts.iter().find(|(n, _)| n == name).map(|(_, g)| g)
    }

    /// Re-encodes the parts as an index image using `label_map`.
    pub fn to_indexed(&self, label_map: &[(u8, String)]) -> Vec<u8> {
        let mut out = vec![0u8; self.width as usize * self.height as usize];
        for (name, grid) in &self.parts {
            let Some((index, _)) = label_map.iter().find(|(_, n)| n == name) else {
                continue;
            };
            for (o, &b) in out.iter_mut().zip(grid.bits()) {
                if b != 0 {
                    *o = *index;
                }
            }
        }
        out
    }
}

pub fn load_part_masks(entry: &ImageEntry) -> Result<PartMaskSet> {
    let (width, height, indices) = read_indexed_png(&entry.mask_path)?;
    PartMaskSet::from_indexed(width, height, &indices, &entry.label_map, &entry.category)
}

/// Reads an 8-bit grayscale (or 8-bit palette) PNG as raw indices.
pub fn read_indexed_png(path: impl AsRef<Path>) -> Result<(u32, u32, Vec<u8>)> {
    let path = path.as_ref();
    let (width, height, color, depth, buf) = decode_png(path)?;
    match (color, depth) {
        (png::ColorType::Grayscale | png::ColorType::Indexed, png::BitDepth::Eight) => {
            Ok((width, height, buf))
        }
        _ => Err(Error::UnsupportedFormat(format!(
            "{}: mask must be an 8-bit grayscale PNG, found {color:?}/{depth:?}",
            path.display()
        ))),
    }
}

/// Writes raw indices as an 8-bit grayscale PNG.
pub fn write_indexed_png(
    path: impl AsRef<Path>,
    width: u32,
    height: u32,
    indices: &[u8],
) -> Result<()> {
    write_gray_png(path.as_ref(), width, height, png::BitDepth::Eight, indices)
}

fn decode_png(path: &Path) -> Result<(u32, u32, png::ColorType, png::BitDepth, Vec<u8>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let decode_err = |source| Error::PngDecode {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = decoder.read_info().map_err(decode_err)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::UnsupportedFormat(format!("{}: image too large", path.display())))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(decode_err)?;
    buf.truncate(info.buffer_size());
    Ok((
        info.width,
        info.height,
        info.color_type,
        info.bit_depth,
        buf,
    ))
}

fn write_gray_png(
    path: &Path,
    width: u32,
    height: u32,
    depth: png::BitDepth,
    data: &[u8],
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), width, height);
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(depth);
    let mut writer = encoder.write_header()?;
    writer.write_image_data(data)?;
    writer.finish()?;
    Ok(())
}

/// A `width × height` relevance map with every value in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    width: u32,
    height: u32,
    values: Vec<f64>,
}

impl Heatmap {
    /// Validates that every value is finite and within `[0, 1]`.
    pub fn new(width: u32, height: u32, values: Vec<f64>) -> Result<Self> {
        if values.len() != width as usize * height as usize {
            return Err(Error::DimensionMismatch {
                expected: (width, height),
                actual: (values.len() as u32, 1),
            });
        }
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0 || **v > 1.0)
        {
            return Err(Error::ValueOutOfRange { index, value });
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self::new(width, height, values)
    }

    /// Caller guarantees the range invariant.
    pub(crate) fn from_trusted(width: u32, height: u32, values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| (0.0..=1.0).contains(v)));
        Self {
            width,
            height,
            values,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.values[y as usize * self.width as usize + x as usize]
    }
}

/// Loads a heatmap, sniffing the format from its leading bytes.
pub fn load_heatmap(path: impl AsRef<Path>) -> Result<Heatmap> {
    let path = path.as_ref();
    let mut head = [0u8; 8];
    let n = {
        let mut f = File::open(path).map_err(|e| Error::io(path, e))?;
        read_up_to(&mut f, &mut head).map_err(|e| Error::io(path, e))?
    };
    if n >= 8 && &head == PNG_SIGNATURE {
        load_png_heatmap(path)
    } else if n >= 4 && &head[..4] == F32_GRID_MAGIC {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        decode_f32_grid(&bytes)
    } else {
        Err(Error::UnsupportedFormat(format!(
            "{}: neither a PNG nor a PQF1 grid",
            path.display()
        )))
    }
}

fn read_up_to(r: &mut impl Read, buf: &mut [u8]) -> std::io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..])? {
            0 => break,
            n => filled += n,
        }
    }
    Ok(filled)
}

fn load_png_heatmap(path: &Path) -> Result<Heatmap> {
    let (width, height, color, depth, buf) = decode_png(path)?;
    if color != png::ColorType::Grayscale {
        return Err(Error::UnsupportedFormat(format!(
            "{}: heatmap PNG must be grayscale, found {color:?}",
            path.display()
        )));
    }
    let values: Vec<f64> = match depth {
        png::BitDepth::Eight => buf.iter().map(|&v| v as f64 / 255.0).collect(),
        png::BitDepth::Sixteen => buf
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 / 65535.0)
            .collect(),
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "{}: heatmap PNG must be 8- or 16-bit, found {other:?}",
                path.display()
            )))
        }
    };
    Ok(Heatmap::from_trusted(width, height, values))
}

/// Decodes a `PQF1` grid: magic, u32 LE width, u32 LE height, then
/// `width * height` f32 LE values in row-major order.
pub fn decode_f32_grid(bytes: &[u8]) -> Result<Heatmap> {
    if bytes.len() < 12 || &bytes[..4] != F32_GRID_MAGIC {
        return Err(Error::UnsupportedFormat("missing PQF1 header".into()));
    }
    let width = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    let height = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    let count = width as u64 * height as u64;
    let body = &bytes[12..];
    if body.len() as u64 != count * 4 {
        return Err(Error::UnsupportedFormat(format!(
            "PQF1 body holds {} bytes, expected {} for {width}x{height}",
            body.len(),
            count * 4
        )));
    }
    let values = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Heatmap::new(width, height, values)
}

pub fn encode_f32_grid(heatmap: &Heatmap) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + heatmap.values.len() * 4);
    out.extend_from_slice(F32_GRID_MAGIC);
    out.extend_from_slice(&heatmap.width.to_le_bytes());
    out.extend_from_slice(&heatmap.height.to_le_bytes());
    for &v in &heatmap.values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn write_f32_grid(path: impl AsRef<Path>, heatmap: &Heatmap) -> Result<()> {
    let path = path.as_ref();
    let mut f = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    f.write_all(&encode_f32_grid(heatmap))
        .and_then(|_| f.flush())
        .map_err(|e| Error::io(path, e))
}

/// Writes a heatmap as a 16-bit grayscale PNG (values rounded to the nearest level).
pub fn write_png16_heatmap(path: impl AsRef<Path>, heatmap: &Heatmap) -> Result<()> {
    let data: Vec<u8> = heatmap
        .values
        .iter()
        .flat_map(|&v| ((v * 65535.0).round() as u16).to_be_bytes())
        .collect();
    write_gray_png(
        path.as_ref(),
        heatmap.width,
        heatmap.height,
        png::BitDepth::Sixteen,
        &data,
    )
}

/// Writes a heatmap as an 8-bit grayscale PNG (values rounded to the nearest level).
pub fn write_png8_heatmap(path: impl AsRef<Path>, heatmap: &Heatmap) -> Result<()> {
    let data: Vec<u8> = heatmap
        .values
        .iter()
        .map(|&v| (v * 255.0).round() as u8)
        .collect();
    write_gray_png(
        path.as_ref(),
        heatmap.width,
        heatmap.height,
        png::BitDepth::Eight,
        &data,
    )
}

/// Bilinear resampling with half-pixel centers:
/// `src = (dst + 0.5) * (src_len / dst_len) - 0.5`, clamped to the source extent.
pub fn resize_bilinear(h: &Heatmap, target_w: u32, target_h: u32) -> Result<Heatmap> {
    if target_w == 0 || target_h == 0 || h.width == 0 || h.height == 0 {
        return Err(Error::ZeroDimension);
    }
    if (target_w, target_h) == h.dims() {
        return Ok(h.clone());
    }
    let xs = axis_taps(h.width, target_w);
    let ys = axis_taps(h.height, target_h);
    let src_w = h.width as usize;
    let mut values = Vec::with_capacity(target_w as usize * target_h as usize);
    for &(y0, y1, fy) in &ys {
        let row0 = &h.values[y0 * src_w..(y0 + 1) * src_w];
        let row1 = &h.values[y1 * src_w..(y1 + 1) * src_w];
        for &(x0, x1, fx) in &xs {
            let top = row0[x0] + (row0[x1] - row0[x0]) * fx;
            let bottom = row1[x0] + (row1[x1] - row1[x0]) * fx;
            let v = top + (bottom - top) * fy;
            values.push(v.clamp(0.0, 1.0));
        }
    }
    Ok(Heatmap::from_trusted(target_w, target_h, values))
}

/// For each destination index: the two source taps and the weight of the second.
fn axis_taps(src_len: u32, dst_len: u32) -> Vec<(usize, usize, f64)> {
    let scale = src_len as f64 / dst_len as f64;
    let max = (src_len - 1) as f64;
    (0..dst_len)
        .map(|d| {
            let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, max);
            let i0 = s.floor() as usize;
            let i1 = (i0 + 1).min(src_len as usize - 1);
            (i0, i1, s - i0 as f64)
        })
        .collect()
}
