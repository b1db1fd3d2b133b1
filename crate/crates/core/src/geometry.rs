//! Level geometry: grid pixels, squares of each level, and the diagonal
//! lattice that splits a square into diamonds.

use std::collections::{HashMap, VecDeque};
use std::sync::{Arc, Mutex, OnceLock};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eps::DyadicEps;
use crate::image::PixelCoord;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GeometryError {
    #[error("1/eps = {0} is not a power of two")]
    InvalidEps(u64),
    #[error("level {level} is out of range for 1/eps = {inv_eps} (levels 0..{max})")]
    LevelOutOfRange { level: u32, inv_eps: u64, max: u32 },
    #[error("side {n} is not normalized for square pitch {pitch}: n-1 must be a power of two divisible by the pitch")]
    NotNormalized { n: usize, pitch: usize },
    #[error("lattice pitch {m} for square side {k} is below 3; no diamonds")]
    DegenerateLattice { k: usize, m: usize },
}

/// Side `k_i = (4/ε)·2^-i − 1` of the squares of level `i`.
pub fn level_side(inv_eps: u64, level: u32) -> Result<usize, GeometryError> {
    if inv_eps < 2 || !inv_eps.is_power_of_two() {
        return Err(GeometryError::InvalidEps(inv_eps));
    }
    let levels = inv_eps.trailing_zeros();
    if level >= levels {
        return Err(GeometryError::LevelOutOfRange {
            level,
            inv_eps,
            max: levels,
        });
    }
    Ok(((4 * inv_eps) >> level) as usize - 1)
}

/// Constants of one level of the square partition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LevelGeometry {
    pub eps: DyadicEps,
    pub level: u32,
    /// Square side.
    pub k: usize,
    /// Distance between consecutive grid lines, `k + 1`.
    pub pitch: usize,
}

impl LevelGeometry {
    pub fn new(eps: DyadicEps, level: u32) -> Result<Self, GeometryError> {
        let k = level_side(eps.inv(), level)?;
        Ok(Self {
            eps,
            level,
            k,
            pitch: k + 1,
        })
    }

    /// All levels `0..log₂(1/ε)`.
    pub fn levels(eps: DyadicEps) -> impl Iterator<Item = LevelGeometry> {
        (0..eps.log2_inv()).map(move |i| LevelGeometry::new(eps, i).expect("level in range"))
    }

    pub fn is_grid_pixel(&self, p: PixelCoord) -> bool {
        p.x.is_multiple_of(self.pitch) || p.y.is_multiple_of(self.pitch)
    }

    pub fn check_normalized(&self, n: usize) -> Result<(), GeometryError> {
        let ok = n >= 2 && (n - 1).is_power_of_two() && (n - 1).is_multiple_of(self.pitch);
        if ok {
            Ok(())
        } else {
            Err(GeometryError::NotNormalized { n, pitch: self.pitch })
        }
    }

    /// Squares per row (and per column) of an `n × n` image.
    pub fn squares_per_row(&self, n: usize) -> Result<usize, GeometryError> {
        self.check_normalized(n)?;
        Ok((n - 1) / self.pitch)
    }

    pub fn square_at(&self, col: usize, row: usize) -> SquareRef {
        SquareRef {
            level: self.level,
            k: self.k,
            u: col * self.pitch,
            v: row * self.pitch,
        }
    }

    /// All squares of this level, row-major.
    pub fn enumerate_squares(&self, n: usize) -> Result<Vec<SquareRef>, GeometryError> {
        let per_row = self.squares_per_row(n)?;
        Ok((0..per_row)
            .flat_map(|row| (0..per_row).map(move |col| (col, row)))
            .map(|(col, row)| self.square_at(col, row))
            .collect())
    }

    /// A uniformly random square of this level.
    pub fn sample_square<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<SquareRef, GeometryError> {
        let per_row = self.squares_per_row(n)?;
        let idx = rng.random_range(0..per_row * per_row);
        Ok(self.square_at(idx % per_row, idx / per_row))
    }
}

/// Free-function form of [`LevelGeometry::is_grid_pixel`].
pub fn is_grid_pixel(eps: DyadicEps, level: u32, p: PixelCoord) -> Result<bool, GeometryError> {
    Ok(LevelGeometry::new(eps, level)?.is_grid_pixel(p))
}

/// A `k × k` square of some level. It occupies pixels `u+1..=u+k` by
/// `v+1..=v+k`; its origin `(u, v)` is a grid-line crossing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SquareRef {
    pub level: u32,
    pub k: usize,
    pub u: usize,
    pub v: usize,
}

impl SquareRef {
    /// A square of side `k` with origin `(u, v)`, unattached to any level.
    pub fn standalone(k: usize, u: usize, v: usize) -> Self {
        Self { level: 0, k, u, v }
    }

    pub fn contains(&self, p: PixelCoord) -> bool {
        p.x > self.u && p.x <= self.u + self.k && p.y > self.v && p.y <= self.v + self.k
    }

    /// Pixel of the square at 1-based local coordinates.
    #[inline]
    pub fn pixel(&self, lx: usize, ly: usize) -> PixelCoord {
        debug_assert!((1..=self.k).contains(&lx) && (1..=self.k).contains(&ly));
        PixelCoord::new(self.u + lx, self.v + ly)
    }

    /// 1-based local coordinates of a pixel of the square.
    #[inline]
    pub fn local(&self, p: PixelCoord) -> (usize, usize) {
        (p.x - self.u, p.y - self.v)
    }

    /// Boundary pixels are the square's outer ring, the pixels adjacent to
    /// grid pixels of its level.
    pub fn is_boundary(&self, p: PixelCoord) -> bool {
        self.contains(p) && {
            let (lx, ly) = self.local(p);
            lx == 1 || ly == 1 || lx == self.k || ly == self.k
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.k * self.k
    }

    /// Row-major pixel iterator.
    pub fn pixels(&self) -> impl Iterator<Item = PixelCoord> + '_ {
        (1..=self.k).flat_map(move |ly| (1..=self.k).map(move |lx| self.pixel(lx, ly)))
    }
}

/// Largest odd integer not exceeding `⌈√(k / log₂ k)⌉`.
pub fn lattice_pitch(k: usize) -> usize {
    assert!(k >= 2, "lattice pitch needs k >= 2");
    let kf = k as f64;
    let c = (kf / kf.log2()).sqrt().ceil() as usize;
    if c % 2 == 1 {
        c
    } else {
        c - 1
    }
}

const LATTICE_BIT: u32 = 1 << 31;

/// Diamonds and fences of a `k × k` square, in 1-based local coordinates.
///
/// Pixel index `(ly − 1)·k + (lx − 1)`. A pixel is on the lattice when
/// `m | (lx + ly)` or `m | (lx − ly)`; the diamonds are the 4-connected
/// components of the rest.
#[derive(Debug)]
pub struct DiamondDecomposition {
    k: usize,
    m: usize,
    cells: Vec<u32>,
    lattice: Vec<u32>,
    lattice_neighbors: Vec<[u32; 4]>,
    on_boundary: Vec<bool>,
    fence_offsets: Vec<u32>,
    fence_slots: Vec<u32>,
}

impl DiamondDecomposition {
    pub const NO_DIAMOND: u32 = u32::MAX;

    pub fn build(k: usize) -> Result<Self, GeometryError> {
        let m = lattice_pitch(k);
        if m < 3 {
            return Err(GeometryError::DegenerateLattice { k, m });
        }
        Ok(Self::with_pitch(k, m))
    }

    /// Decomposition for an explicit odd pitch `m ≥ 3`.
    pub fn with_pitch(k: usize, m: usize) -> Self {
        assert!(m >= 3 && m % 2 == 1, "lattice pitch must be odd and at least 3");
        let mut cells = vec![0u32; k * k];
        let mut lattice = Vec::new();
        for ly in 1..=k {
            for lx in 1..=k {
                if (lx + ly) % m == 0 || lx.abs_diff(ly) % m == 0 {
                    cells[(ly - 1) * k + lx - 1] = LATTICE_BIT | lattice.len() as u32;
                    lattice.push(((ly - 1) * k + lx - 1) as u32);
                }
            }
        }

        let unvisited = LATTICE_BIT - 1;
        for c in cells.iter_mut() {
            if *c & LATTICE_BIT == 0 {
                *c = unvisited;
            }
        }
        let mut on_boundary = Vec::new();
        let mut queue = VecDeque::new();
        for start in 0..k * k {
            if cells[start] != unvisited {
                continue;
            }
            let id = on_boundary.len() as u32;
            let mut boundary = false;
            cells[start] = id;
            queue.push_back(start);
            while let Some(i) = queue.pop_front() {
                let (x, y) = (i % k, i / k);
                boundary |= x == 0 || y == 0 || x + 1 == k || y + 1 == k;
                for (nx, ny) in crate::image::neighbors(x, y, k) {
                    let j = ny * k + nx;
                    if cells[j] == unvisited {
                        cells[j] = id;
                        queue.push_back(j);
                    }
                }
            }
            on_boundary.push(boundary);
        }

        let lattice_neighbors = lattice
            .iter()
            .map(|&i| {
                let (x, y) = (i as usize % k, i as usize / k);
                let mut adj = [Self::NO_DIAMOND; 4];
                let mut n = 0;
                for (nx, ny) in crate::image::neighbors(x, y, k) {
                    let c = cells[ny * k + nx];
                    if c & LATTICE_BIT == 0 && !adj[..n].contains(&c) {
                        adj[n] = c;
                        n += 1;
                    }
                }
                adj
            })
            .collect::<Vec<[u32; 4]>>();

        // fence of each diamond as lattice slots, CSR layout
        let diamond_count = on_boundary.len();
        let mut fence_offsets = vec![0u32; diamond_count + 1];
        for adj in &lattice_neighbors {
            for &d in adj.iter().take_while(|&&d| d != Self::NO_DIAMOND) {
                fence_offsets[d as usize + 1] += 1;
            }
        }
        for i in 0..diamond_count {
            fence_offsets[i + 1] += fence_offsets[i];
        }
        let mut fill = fence_offsets.clone();
        let mut fence_slots = vec![0u32; fence_offsets[diamond_count] as usize];
        for (slot, adj) in lattice_neighbors.iter().enumerate() {
            for &d in adj.iter().take_while(|&&d| d != Self::NO_DIAMOND) {
                fence_slots[fill[d as usize] as usize] = slot as u32;
                fill[d as usize] += 1;
            }
        }

        Self {
            k,
            m,
            cells,
            lattice,
            lattice_neighbors,
            on_boundary,
            fence_offsets,
            fence_slots,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn diamond_count(&self) -> usize {
        self.on_boundary.len()
    }

    pub fn lattice_len(&self) -> usize {
        self.lattice.len()
    }

    /// Local pixel indices of the lattice, row-major.
    pub fn lattice(&self) -> &[u32] {
        &self.lattice
    }

    #[inline]
    pub fn index(&self, lx: usize, ly: usize) -> usize {
        (ly - 1) * self.k + lx - 1
    }

    #[inline]
    pub fn coords(&self, index: usize) -> (usize, usize) {
        (index % self.k + 1, index / self.k + 1)
    }

    #[inline]
    pub fn is_lattice(&self, index: usize) -> bool {
        self.cells[index] & LATTICE_BIT != 0
    }

    /// Diamond id of a non-lattice pixel.
    #[inline]
    pub fn diamond_of(&self, index: usize) -> Option<u32> {
        let c = self.cells[index];
        (c & LATTICE_BIT == 0).then_some(c)
    }

    /// Position of a lattice pixel in [`Self::lattice`].
    #[inline]
    pub fn lattice_slot(&self, index: usize) -> Option<usize> {
        let c = self.cells[index];
        (c & LATTICE_BIT != 0).then_some((c & !LATTICE_BIT) as usize)
    }

    /// Diamonds whose fence contains the given lattice slot.
    #[inline]
    pub fn fence_owners(&self, slot: usize) -> impl Iterator<Item = u32> + '_ {
        self.lattice_neighbors[slot]
            .iter()
            .copied()
            .take_while(|&d| d != Self::NO_DIAMOND)
    }

    /// Lattice slots forming the fence of a diamond.
    #[inline]
    pub fn fence_slots(&self, diamond: u32) -> &[u32] {
        let d = diamond as usize;
        &self.fence_slots[self.fence_offsets[d] as usize..self.fence_offsets[d + 1] as usize]
    }

    /// Whether the diamond contains a boundary pixel of the square.
    pub fn touches_boundary(&self, diamond: u32) -> bool {
        self.on_boundary[diamond as usize]
    }

    /// Pixel indices of every diamond.
    pub fn diamonds(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.diamond_count()];
        for (i, &c) in self.cells.iter().enumerate() {
            if c & LATTICE_BIT == 0 {
                out[c as usize].push(i);
            }
        }
        out
    }

    /// Lattice pixel indices of every diamond's fence.
    pub fn fences(&self) -> Vec<Vec<usize>> {
        (0..self.diamond_count() as u32)
            .map(|d| {
                self.fence_slots(d)
                    .iter()
                    .map(|&slot| self.lattice[slot as usize] as usize)
                    .collect()
            })
            .collect()
    }

    /// Pairs of diamonds with intersecting fences, each with the shared
    /// fence pixels.
    pub fn adjacency(&self) -> Vec<((u32, u32), Vec<usize>)> {
        let mut shared: HashMap<(u32, u32), Vec<usize>> = HashMap::new();
        for (slot, &i) in self.lattice.iter().enumerate() {
            let owners: Vec<u32> = self.fence_owners(slot).collect();
            for (a, &d1) in owners.iter().enumerate() {
                for &d2 in &owners[a + 1..] {
                    shared.entry((d1.min(d2), d1.max(d2))).or_default().push(i as usize);
                }
            }
        }
        let mut out: Vec<_> = shared.into_iter().collect();
        out.sort_unstable_by_key(|(pair, _)| *pair);
        out
    }
}

/// Memoised decomposition for squares of side `k`.
pub fn diamond_decomposition(k: usize) -> Result<Arc<DiamondDecomposition>, GeometryError> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<DiamondDecomposition>>>> = OnceLock::new();
    let m = lattice_pitch(k);
    if m < 3 {
        return Err(GeometryError::DegenerateLattice { k, m });
    }
    let cache = CACHE.get_or_init(Default::default);
    if let Some(d) = cache.lock().unwrap().get(&k) {
        return Ok(Arc::clone(d));
    }
    let built = Arc::new(DiamondDecomposition::with_pitch(k, m));
    Ok(Arc::clone(cache.lock().unwrap().entry(k).or_insert(built)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn eps(inv: u64) -> DyadicEps {
        DyadicEps::from_inverse(inv).unwrap()
    }

    #[test]
    fn level_sides() {
        assert_eq!(level_side(16, 0), Ok(63));
        assert_eq!(level_side(16, 3), Ok(7));
        assert!(matches!(level_side(2, 1), Err(GeometryError::LevelOutOfRange { .. })));
        assert_eq!(level_side(12, 0), Err(GeometryError::InvalidEps(12)));
    }

    #[test]
    fn grid_pixels() {
        let g = LevelGeometry::new(eps(2), 0).unwrap();
        assert_eq!(g.pitch, 8);
        assert!(g.is_grid_pixel(PixelCoord::new(8, 3)));
        assert!(!g.is_grid_pixel(PixelCoord::new(3, 5)));
        for level in 0..4 {
            assert!(is_grid_pixel(eps(16), level, PixelCoord::new(0, 0)).unwrap());
        }
    }

    #[test]
    fn square_enumeration() {
        let g = LevelGeometry::new(eps(2), 0).unwrap();
        let squares = g.enumerate_squares(9).unwrap();
        assert_eq!(squares.len(), 1);
        let s = squares[0];
        assert_eq!((s.u, s.v, s.k), (0, 0, 7));
        let pixels: Vec<_> = s.pixels().collect();
        assert_eq!(pixels.first(), Some(&PixelCoord::new(1, 1)));
        assert_eq!(pixels.last(), Some(&PixelCoord::new(7, 7)));
        assert_eq!(pixels.len(), 49);
        assert_eq!(g.enumerate_squares(17).unwrap().len(), 4);
        assert!(matches!(g.enumerate_squares(10), Err(GeometryError::NotNormalized { .. })));
    }

    #[test]
    fn sampling_is_uniform_over_squares() {
        let g = LevelGeometry::new(eps(2), 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut hits = [0usize; 4];
        for _ in 0..40_000 {
            let s = g.sample_square(17, &mut rng).unwrap();
            hits[s.v / 8 * 2 + s.u / 8] += 1;
        }
        for h in hits {
            assert!((h as f64 - 10_000.0).abs() < 400.0, "{hits:?}");
        }
    }

    #[test]
    fn grid_and_squares_tile_the_image() {
        for inv in [2u64, 4, 8, 16] {
            for n in [9usize, 17, 33, 65, 129] {
                for g in LevelGeometry::levels(eps(inv)) {
                    let Ok(squares) = g.enumerate_squares(n) else { continue };
                    let mut owner = vec![0u32; n * n];
                    for y in 0..n {
                        for x in 0..n {
                            if g.is_grid_pixel(PixelCoord::new(x, y)) {
                                owner[y * n + x] += 1;
                            }
                        }
                    }
                    for s in &squares {
                        for p in s.pixels() {
                            owner[p.y * n + p.x] += 1;
                        }
                    }
                    assert!(owner.iter().all(|&c| c == 1), "n={n} inv={inv} level={}", g.level);
                }
            }
        }
    }

    #[test]
    fn boundary_is_next_to_grid() {
        let g = LevelGeometry::new(eps(4), 1).unwrap();
        for s in g.enumerate_squares(17).unwrap() {
            for p in s.pixels() {
                let near_grid = [(0i64, 1i64), (0, -1), (1, 0), (-1, 0)].iter().any(|(dx, dy)| {
                    let q = PixelCoord::new((p.x as i64 + dx) as usize, (p.y as i64 + dy) as usize);
                    g.is_grid_pixel(q)
                });
                assert_eq!(s.is_boundary(p), near_grid);
            }
        }
    }

    #[test]
    fn lattice_pitches() {
        assert_eq!(lattice_pitch(63), 3);
        assert_eq!(lattice_pitch(31), 3);
        assert_eq!(lattice_pitch(7), 1);
        assert_eq!(lattice_pitch(15), 1);
        assert!(matches!(diamond_decomposition(7), Err(GeometryError::DegenerateLattice { m: 1, .. })));
    }

    fn check_decomposition(d: &DiamondDecomposition) {
        let k = d.k();
        let m = d.m();
        let diamonds = d.diamonds();
        let fences = d.fences();
        let mut covered = vec![0u32; k * k];
        for &i in d.lattice() {
            let (lx, ly) = d.coords(i as usize);
            assert!((lx + ly) % m == 0 || lx.abs_diff(ly) % m == 0);
            covered[i as usize] += 1;
        }
        for (id, pixels) in diamonds.iter().enumerate() {
            for &i in pixels {
                assert!(!d.is_lattice(i));
                covered[i] += 1;
            }
            let touches = pixels.iter().any(|&i| {
                let (lx, ly) = d.coords(i);
                lx == 1 || ly == 1 || lx == k || ly == k
            });
            assert_eq!(touches, d.touches_boundary(id as u32));
            for &f in &fences[id] {
                assert!(d.is_lattice(f));
                let (fx, fy) = d.coords(f);
                let has_neighbor = crate::image::neighbors(fx - 1, fy - 1, k)
                    .any(|(nx, ny)| d.diamond_of(ny * k + nx) == Some(id as u32));
                assert!(has_neighbor, "fence pixel without a neighbour in its diamond");
            }
        }
        assert!(covered.iter().all(|&c| c == 1), "lattice and diamonds must partition the square");
        assert!(d.lattice_len() * m <= 2 * k * k + 4 * k * m, "|L| = {} too large", d.lattice_len());
    }

    #[test]
    fn decompositions_partition_the_square() {
        for k in [31, 63, 127, 255] {
            check_decomposition(&diamond_decomposition(k).unwrap());
        }
        for (k, m) in [(15, 3), (20, 5), (63, 5), (64, 7)] {
            check_decomposition(&DiamondDecomposition::with_pitch(k, m));
        }
    }

    /// Two pixels of one diamond are joined by a monotone path through the
    /// diamond of fewer than `m` intermediate pixels.
    #[test]
    fn diamonds_have_small_diameter() {
        let d = diamond_decomposition(63).unwrap();
        let m = d.m();
        for pixels in d.diamonds() {
            for &a in &pixels {
                for &b in &pixels {
                    let (ax, ay) = d.coords(a);
                    let (bx, by) = d.coords(b);
                    let dist = ax.abs_diff(bx) + ay.abs_diff(by);
                    assert!(dist < 2 * m);
                    // intermediate pixels on a shortest path
                    assert!(dist.saturating_sub(1) < m, "dist {dist} for m {m}");
                }
            }
        }
    }

    #[test]
    fn adjacency_is_symmetric_and_on_lattice() {
        let d = diamond_decomposition(63).unwrap();
        let fences = d.fences();
        for ((a, b), shared) in d.adjacency() {
            assert!(a < b);
            for i in shared {
                assert!(fences[a as usize].contains(&i) && fences[b as usize].contains(&i));
            }
        }
    }
}
