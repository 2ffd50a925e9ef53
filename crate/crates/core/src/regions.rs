//! Positional six-region split of whole-lung masks.

use serde_json::json;

use crate::error::{Error, Result};
use crate::grid::BinaryGrid;

/// Inclusive pixel bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundingBox {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl BoundingBox {
    pub fn width(&self) -> u32 {
        self.x1 - self.x0 + 1
    }

    pub fn height(&self) -> u32 {
        self.y1 - self.y0 + 1
    }

    /// Doubled center x, kept integral.
    fn center_x2(&self) -> u32 {
        self.x0 + self.x1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub mask: BinaryGrid,
    pub bbox: BoundingBox,
    pub area: u64,
}

/// 4-connected components sorted by area, largest first (ties keep raster
/// order of each component's first pixel).
pub fn connected_components(mask: &BinaryGrid) -> Vec<Component> {
    let (w, h) = mask.dims();
    let mut visited = vec![false; mask.len()];
    let mut components = Vec::new();
    let mut stack = Vec::new();
    let bits = mask.bits();
    for start in 0..bits.len() {
        if bits[start] == 0 || visited[start] {
            continue;
        }
        let mut comp = vec![0u8; bits.len()];
        let (sx, sy) = ((start % w as usize) as u32, (start / w as usize) as u32);
        let mut bbox = BoundingBox {
            x0: sx,
            y0: sy,
            x1: sx,
            y1: sy,
        };
        let mut area = 0u64;
        visited[start] = true;
        stack.push(start);
        while let Some(i) = stack.pop() {
            comp[i] = 1;
            area += 1;
            let (x, y) = ((i % w as usize) as u32, (i / w as usize) as u32);
            bbox.x0 = bbox.x0.min(x);
            bbox.x1 = bbox.x1.max(x);
            bbox.y0 = bbox.y0.min(y);
            bbox.y1 = bbox.y1.max(y);
            let mut visit = |j: usize| {
                if bits[j] != 0 && !visited[j] {
                    visited[j] = true;
                    stack.push(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w as usize);
            }
            if y + 1 < h {
                visit(i + w as usize);
            }
        }
        components.push(Component {
            mask: BinaryGrid::from_bits(w, h, comp),
            bbox,
            area,
        });
    }
    components.sort_by_key(|c| std::cmp::Reverse(c.area));
    components
}

/// Region names in label order (index 1..=6 when encoded).
pub const REGION_NAMES: [&str; 6] = ["lt", "lm", "lb", "rt", "rm", "rb"];

/// Six positional lung parts. "Left" is image-left.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionSplit {
    pub width: u32,
    pub height: u32,
    pub lt: BinaryGrid,
    pub lm: BinaryGrid,
    pub lb: BinaryGrid,
    pub rt: BinaryGrid,
    pub rm: BinaryGrid,
    pub rb: BinaryGrid,
}

impl RegionSplit {
    /// `(name, grid)` pairs in [`REGION_NAMES`] order.
    pub fn regions(&self) -> [(&'static str, &BinaryGrid); 6] {
        [
            ("lt", &self.lt),
            ("lm", &self.lm),
            ("lb", &self.lb),
            ("rt", &self.rt),
            ("rm", &self.rm),
            ("rb", &self.rb),
        ]
    }

    /// Index image with values 1..=6 for lt, lm, lb, rt, rm, rb.
    pub fn to_indexed(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.width as usize * self.height as usize];
        for (k, (_, grid)) in self.regions().iter().enumerate() {
            for (o, &b) in out.iter_mut().zip(grid.bits()) {
                if b != 0 {
                    *o = k as u8 + 1;
                }
            }
        }
        out
    }

    /// Label map matching [`Self::to_indexed`], in manifest `label_map` shape.
    pub fn label_map_fragment() -> serde_json::Value {
        let mut map = serde_json::Map::new();
        for (k, name) in REGION_NAMES.iter().enumerate() {
            map.insert((k + 1).to_string(), json!(name));
        }
        json!({ "label_map": map, "laterality": "image" })
    }
}

/// Splits the two largest components of a lung mask into top/middle/bottom
/// bands of their bounding boxes. Band edges sit at `⌊h/3⌋` and `⌊2h/3⌋`
/// rows below the box top, so the bottom band takes the remainder.
pub fn split_lung_mask(mask: &BinaryGrid) -> Result<RegionSplit> {
    let comps = connected_components(mask);
    if comps.len() < 2 {
        return Err(Error::NotEnoughComponents(comps.len()));
    }
    let (a, b) = (&comps[0], &comps[1]);
    let (left, right) = if b.bbox.center_x2() < a.bbox.center_x2() {
        (b, a)
    } else {
        (a, b)
    };
    let [lt, lm, lb] = bands(left);
    let [rt, rm, rb] = bands(right);
    Ok(RegionSplit {
        width: mask.width(),
        height: mask.height(),
        lt,
        lm,
        lb,
        rt,
        rm,
        rb,
    })
}

fn bands(c: &Component) -> [BinaryGrid; 3] {
    let h = c.bbox.height();
    let top_end = c.bbox.y0 + h / 3;
    let mid_end = c.bbox.y0 + 2 * h / 3;
    let (w, gh) = c.mask.dims();
    let band =
        |lo: u32, hi: u32| BinaryGrid::from_fn(w, gh, |x, y| y >= lo && y < hi && c.mask.get(x, y));
    [
        band(c.bbox.y0, top_end),
        band(top_end, mid_end),
        band(mid_end, c.bbox.y1 + 1),
    ]
}
