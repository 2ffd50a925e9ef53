//! Row-major binary grids shared by masks, binarized heatmaps and lung regions.

/// A `width × height` grid of 0/1 cells stored one byte per cell, row-major.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinaryGrid {
    width: u32,
    height: u32,
    bits: Vec<u8>,
}

/// A binarized heatmap.
pub type BinaryMap = BinaryGrid;

impl BinaryGrid {
    pub fn zeros(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            bits: vec![0; width as usize * height as usize],
        }
    }

    pub fn ones(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            bits: vec![1; width as usize * height as usize],
        }
    }

    /// Builds a grid from arbitrary bytes; any nonzero byte becomes 1.
    ///
    /// Panics if `bits.len() != width * height`.
    pub fn from_bits(width: u32, height: u32, bits: impl Into<Vec<u8>>) -> Self {
        let mut bits = bits.into();
        assert_eq!(
            bits.len(),
            width as usize * height as usize,
            "grid buffer length does not match {width}x{height}"
        );
        for b in &mut bits {
            *b = (*b != 0) as u8;
        }
        Self {
            width,
            height,
            bits,
        }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y) as u8);
            }
        }
        Self {
            width,
            height,
            bits,
        }
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.width
    }

    #[inline]
    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Raw cells, each 0 or 1.
    #[inline]
    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[self.index(x, y)] != 0
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, on: bool) {
        let i = self.index(x, y);
        self.bits[i] = on as u8;
    }

    #[inline]
    fn index(&self, x: u32, y: u32) -> usize {
        debug_assert!(x < self.width && y < self.height);
        y as usize * self.width as usize + x as usize
    }

    /// Number of set cells.
    pub fn count(&self) -> u64 {
        self.bits.iter().map(|&b| b as u64).sum()
    }

    /// Number of cells set in both grids.
    ///
    /// Panics on dimension mismatch; callers check dimensions first.
    pub fn overlap(&self, other: &BinaryGrid) -> u64 {
        assert_eq!(self.dims(), other.dims());
        self.bits
            .iter()
            .zip(&other.bits)
            .map(|(&a, &b)| (a & b) as u64)
            .sum()
    }

    /// Number of cells clear in both grids.
    pub fn overlap_of_complements(&self, other: &BinaryGrid) -> u64 {
        assert_eq!(self.dims(), other.dims());
        self.bits
            .iter()
            .zip(&other.bits)
            .map(|(&a, &b)| ((a | b) ^ 1) as u64)
            .sum()
    }

    pub fn union_with(&mut self, other: &BinaryGrid) {
        assert_eq!(self.dims(), other.dims());
        for (a, &b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= b;
        }
    }

    pub fn is_disjoint(&self, other: &BinaryGrid) -> bool {
        self.overlap(other) == 0
    }
}

impl std::fmt::Debug for BinaryGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "BinaryGrid {}x{}", self.width, self.height)?;
        if self.width <= 64 && self.height <= 64 {
            for row in self.bits.chunks(self.width.max(1) as usize) {
                let line: String = row
                    .iter()
                    .map(|&b| if b != 0 { '#' } else { '.' })
                    .collect();
                writeln!(f, "  {line}")?;
            }
        }
        Ok(())
    }
}
