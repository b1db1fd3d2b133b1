//! Binary images, pixel addressing and exact (full-knowledge) connectivity.
//!
//! Coordinates are `(x, y) = (column, row)` with the origin in the top-left
//! corner. Black pixels are `true`.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PixelCoord {
    pub x: usize,
    pub y: usize,
}

impl PixelCoord {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }

    /// Packs the coordinate into a single word, row-major order preserved.
    pub(crate) fn key(self) -> u64 {
        ((self.y as u64) << 32) | self.x as u64
    }

    pub(crate) fn from_key(key: u64) -> Self {
        Self {
            x: (key & 0xffff_ffff) as usize,
            y: (key >> 32) as usize,
        }
    }
}

impl fmt::Display for PixelCoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Anything that can answer "is pixel (x, y) black" for a square canvas.
///
/// Implemented by [`Image`] and by procedural images that are too large to
/// materialise.
pub trait PixelSource: Sync {
    fn side(&self) -> usize;

    /// Color of an in-range pixel. Callers check the range.
    fn is_black(&self, x: usize, y: usize) -> bool;
}

impl<T: PixelSource + ?Sized> PixelSource for Box<T> {
    fn side(&self) -> usize {
        (**self).side()
    }

    #[inline]
    fn is_black(&self, x: usize, y: usize) -> bool {
        (**self).is_black(x, y)
    }
}

/// An `n × n` black-and-white image.
#[derive(Clone, PartialEq, Eq)]
pub struct Image {
    side: usize,
    bits: Vec<bool>,
}

impl fmt::Debug for Image {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Image {}x{}", self.side, self.side)?;
        if self.side <= 32 {
            for y in 0..self.side {
                let row: String = (0..self.side)
                    .map(|x| if self.get(x, y) { '#' } else { '.' })
                    .collect();
                writeln!(f, "{row}")?;
            }
        }
        Ok(())
    }
}

impl Image {
    /// All-white image. Panics on `side == 0`.
    pub fn white(side: usize) -> Self {
        assert!(side >= 1, "image side must be at least 1");
        Self {
            side,
            bits: vec![false; side * side],
        }
    }

    pub fn black(side: usize) -> Self {
        let mut img = Self::white(side);
        img.bits.fill(true);
        img
    }

    pub fn from_fn(side: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut img = Self::white(side);
        for y in 0..side {
            for x in 0..side {
                img.bits[y * side + x] = f(x, y);
            }
        }
        img
    }

    /// Builds an image from row-major bits. Returns `None` unless
    /// `bits.len()` is a positive perfect square.
    pub fn from_bits(bits: Vec<bool>) -> Option<Self> {
        let side = (bits.len() as f64).sqrt().round() as usize;
        (side >= 1 && side * side == bits.len()).then_some(Self { side, bits })
    }

    /// Parses rows of `#`/`1` (black) and `.`/`0` (white). Handy in tests.
    pub fn from_ascii(rows: &[&str]) -> Self {
        let side = rows.len();
        Self::from_fn(side, |x, y| {
            let row = rows[y].as_bytes();
            assert_eq!(row.len(), side, "ragged ascii image");
            matches!(row[x], b'#' | b'1')
        })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.side + x]
    }

    #[inline]
    pub fn at(&self, p: PixelCoord) -> bool {
        self.get(p.x, p.y)
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, black: bool) {
        self.bits[y * self.side + x] = black;
    }

    pub fn contains(&self, p: PixelCoord) -> bool {
        p.x < self.side && p.y < self.side
    }

    pub fn black_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn black_pixels(&self) -> impl Iterator<Item = PixelCoord> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| PixelCoord::new(i % self.side, i / self.side))
    }

    pub fn is_on_border(&self, p: PixelCoord) -> bool {
        p.x == 0 || p.y == 0 || p.x + 1 == self.side || p.y + 1 == self.side
    }

    /// Copies the `side × side` block whose top-left pixel is `(x0, y0)`.
    pub fn extract(&self, x0: usize, y0: usize, side: usize) -> Image {
        assert!(x0 + side <= self.side && y0 + side <= self.side);
        Image::from_fn(side, |x, y| self.get(x0 + x, y0 + y))
    }

    /// Writes `block` into this image with its top-left pixel at `(x0, y0)`.
    pub fn paste(&mut self, x0: usize, y0: usize, block: &Image) {
        for y in 0..block.side {
            for x in 0..block.side {
                self.set(x0 + x, y0 + y, block.get(x, y));
            }
        }
    }

    /// Number of pixels on which the two images differ.
    pub fn hamming(&self, other: &Image) -> usize {
        assert_eq!(self.side, other.side);
        self.bits
            .iter()
            .zip(&other.bits)
            .filter(|(a, b)| a != b)
            .count()
    }
}

impl PixelSource for Image {
    fn side(&self) -> usize {
        self.side
    }

    #[inline]
    fn is_black(&self, x: usize, y: usize) -> bool {
        self.get(x, y)
    }
}

/// 4-neighbours of `(x, y)` inside a `side × side` canvas, in the fixed
/// order up, down, left, right.
#[inline]
pub(crate) fn neighbors(x: usize, y: usize, side: usize) -> impl Iterator<Item = (usize, usize)> {
    let up = (y > 0).then(|| (x, y - 1));
    let down = (y + 1 < side).then(|| (x, y + 1));
    let left = (x > 0).then(|| (x - 1, y));
    let right = (x + 1 < side).then(|| (x + 1, y));
    [up, down, left, right].into_iter().flatten()
}

/// Partition of the black pixels into connected components of the image
/// graph.
#[derive(Clone, Debug)]
pub struct ComponentLabeling {
    side: usize,
    labels: Vec<u32>,
    sizes: Vec<usize>,
    touches_border: Vec<bool>,
}

impl ComponentLabeling {
    pub const WHITE: u32 = u32::MAX;

    pub fn component_count(&self) -> usize {
        self.sizes.len()
    }

    /// Component id of a black pixel, `None` for white pixels.
    pub fn label(&self, p: PixelCoord) -> Option<u32> {
        let l = self.labels[p.y * self.side + p.x];
        (l != Self::WHITE).then_some(l)
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn touches_border(&self) -> &[bool] {
        &self.touches_border
    }
}

/// Labels the components of the image graph by breadth-first search.
///
/// Ids are assigned in first-visit order of a row-major scan; neighbours
/// are expanded up, down, left, right.
pub fn connected_components(img: &Image) -> ComponentLabeling {
    let side = img.side();
    let mut labels = vec![ComponentLabeling::WHITE; side * side];
    let mut sizes = Vec::new();
    let mut touches_border = Vec::new();
    let mut queue = VecDeque::new();

    for start in 0..side * side {
        if !img.bits[start] || labels[start] != ComponentLabeling::WHITE {
            continue;
        }
        let id = sizes.len() as u32;
        labels[start] = id;
        queue.push_back(start);
        let mut size = 0;
        let mut border = false;
        while let Some(i) = queue.pop_front() {
            let (x, y) = (i % side, i / side);
            size += 1;
            border |= x == 0 || y == 0 || x + 1 == side || y + 1 == side;
            for (nx, ny) in neighbors(x, y, side) {
                let j = ny * side + nx;
                if img.bits[j] && labels[j] == ComponentLabeling::WHITE {
                    labels[j] = id;
                    queue.push_back(j);
                }
            }
        }
        sizes.push(size);
        touches_border.push(border);
    }

    ComponentLabeling {
        side,
        labels,
        sizes,
        touches_border,
    }
}

/// A graph with at most one vertex counts as connected, so blank images are
/// connected.
pub fn is_connected(img: &Image) -> bool {
    connected_components(img).component_count() <= 1
}

/// True iff every black pixel has a black path to the image border.
pub fn is_border_connected(img: &Image) -> bool {
    connected_components(img).touches_border.iter().all(|&t| t)
}

/// The first (in label order) component that does not reach the border,
/// as a list of its pixels in row-major order.
pub fn first_unanchored_component(img: &Image) -> Option<Vec<PixelCoord>> {
    let labeling = connected_components(img);
    let id = labeling.touches_border.iter().position(|&t| !t)? as u32;
    Some(
        labeling
            .labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == id)
            .map(|(i, _)| PixelCoord::new(i % img.side, i / img.side))
            .collect(),
    )
}
