//! Ground-truth costs: brute-force distances on tiny images, the
//! constructive fixes, local costs of squares and the structural audit.

use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eps::DyadicEps;
use crate::geometry::{GeometryError, LevelGeometry, SquareRef};
use crate::image::{is_border_connected, is_connected, Image, PixelSource};

/// Largest side handled by the brute-force oracles (2^16 candidates).
pub const MAX_BRUTE_SIDE: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CostError {
    #[error("brute force handles sides up to {max}, got {side}")]
    TooLarge { side: usize, max: usize },
    #[error("dot pattern violated: {0}")]
    PatternViolation(String),
    #[error("no local cost available for the level-{level} square at ({u}, {v})")]
    CostUnavailable { level: u32, u: usize, v: usize },
    #[error("grid connection produced a disconnected image")]
    OutputNotConnected,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Target {
    BorderConnected,
    Connected,
}

/// Distances from every `side × side` image to a property, found by a
/// multi-source BFS over the Boolean hypercube started from all members.
struct DistanceTable {
    dist: Vec<u8>,
    nearest: Vec<u16>,
}

fn mask_image(mask: u32, side: usize) -> Image {
    Image::from_fn(side, |x, y| mask >> (y * side + x) & 1 == 1)
}

fn image_mask(img: &Image) -> u32 {
    img.bits()
        .iter()
        .enumerate()
        .fold(0, |m, (i, &b)| m | (b as u32) << i)
}

impl DistanceTable {
    fn build(side: usize, target: Target) -> Self {
        let bits = side * side;
        let size = 1usize << bits;
        let mut dist = vec![u8::MAX; size];
        let mut nearest = vec![0u16; size];
        let mut frontier = Vec::new();
        for mask in 0..size {
            let img = mask_image(mask as u32, side);
            let member = match target {
                Target::BorderConnected => is_border_connected(&img),
                Target::Connected => is_connected(&img),
            };
            if member {
                dist[mask] = 0;
                nearest[mask] = mask as u16;
                frontier.push(mask);
            }
        }
        let mut d = 0u8;
        while !frontier.is_empty() {
            d += 1;
            let mut next = Vec::new();
            for &mask in &frontier {
                for b in 0..bits {
                    let other = mask ^ (1 << b);
                    if dist[other] == u8::MAX {
                        dist[other] = d;
                        nearest[other] = nearest[mask];
                        next.push(other);
                    }
                }
            }
            frontier = next;
        }
        Self { dist, nearest }
    }
}

fn table(side: usize, target: Target) -> Arc<DistanceTable> {
    static TABLES: OnceLock<[[OnceLock<Arc<DistanceTable>>; MAX_BRUTE_SIDE + 1]; 2]> = OnceLock::new();
    let tables = TABLES.get_or_init(Default::default);
    let row = match target {
        Target::BorderConnected => 0,
        Target::Connected => 1,
    };
    tables[row][side]
        .get_or_init(|| Arc::new(DistanceTable::build(side, target)))
        .clone()
}

fn check_brute(side: usize) -> Result<(), CostError> {
    if side > MAX_BRUTE_SIDE {
        Err(CostError::TooLarge {
            side,
            max: MAX_BRUTE_SIDE,
        })
    } else {
        Ok(())
    }
}

/// Exact Hamming distance to the nearest border-connected image of the same
/// side.
pub fn exact_dist_border_connected(sub: &Image) -> Result<u32, CostError> {
    check_brute(sub.side())?;
    Ok(table(sub.side(), Target::BorderConnected).dist[image_mask(sub) as usize] as u32)
}

/// Exact Hamming distance to the nearest connected image of the same side.
pub fn exact_dist_connected(img: &Image) -> Result<u32, CostError> {
    check_brute(img.side())?;
    Ok(table(img.side(), Target::Connected).dist[image_mask(img) as usize] as u32)
}

/// A nearest border-connected image and its distance.
pub fn exact_border_fix(sub: &Image) -> Result<(Image, u32), CostError> {
    check_brute(sub.side())?;
    let t = table(sub.side(), Target::BorderConnected);
    let mask = image_mask(sub) as usize;
    Ok((mask_image(t.nearest[mask] as u32, sub.side()), t.dist[mask] as u32))
}

/// The constructive fix with at most `k²/4` changes.
///
/// With at most `k²/4` black pixels everything is whitened. Otherwise the
/// rows `y ≡ r (mod 3)` of the cheapest residue `r` are blackened: every
/// other row is adjacent to one of them or is a border row, and the rows
/// themselves reach the left and right border.
pub fn mod3_border_fix(sub: &Image) -> (Image, u64) {
    let k = sub.side();
    let black = sub.black_count();
    if 4 * black <= k * k {
        return (Image::white(k), black as u64);
    }
    let mut white_per_class = [0u64; 3];
    for y in 0..k {
        white_per_class[y % 3] += (0..k).filter(|&x| !sub.get(x, y)).count() as u64;
    }
    let r = (0..3).min_by_key(|&r| white_per_class[r]).expect("three classes");
    let mut fixed = sub.clone();
    for y in (r..k).step_by(3) {
        for x in 0..k {
            fixed.set(x, y, true);
        }
    }
    (fixed, white_per_class[r])
}

/// Makes a non-connected image connected: blacken all level-0 grid pixels
/// and border-fix every level-0 square (exactly when `k ≤ 4`). Connected
/// images are returned unchanged.
pub fn connectify_via_grid(img: &Image, eps: DyadicEps) -> Result<(Image, u64), CostError> {
    if is_connected(img) {
        return Ok((img.clone(), 0));
    }
    let n = img.side();
    let level0 = LevelGeometry::new(eps, 0)?;
    let mut out = img.clone();
    for y in 0..n {
        for x in 0..n {
            if x % level0.pitch == 0 || y % level0.pitch == 0 {
                out.set(x, y, true);
            }
        }
    }
    for square in level0.enumerate_squares(n)? {
        let block = out.extract(square.u + 1, square.v + 1, square.k);
        let fixed = if square.k <= MAX_BRUTE_SIDE {
            exact_border_fix(&block)?.0
        } else {
            mod3_border_fix(&block).0
        };
        out.paste(square.u + 1, square.v + 1, &fixed);
    }
    if !is_connected(&out) {
        return Err(CostError::OutputNotConnected);
    }
    let cost = img.hamming(&out) as u64;
    Ok((out, cost))
}

/// Local cost of a square holding well-separated interior dots: pairwise
/// L∞ distance at least 3 and every dot at L∞ distance at least 2 from the
/// square's ring. Each dot then needs its own change and deleting it is
/// enough, so the cost is the dot count.
pub fn dot_local_cost(sub: &Image) -> Result<u64, CostError> {
    let k = sub.side();
    let dots: Vec<_> = sub.black_pixels().collect();
    for p in &dots {
        if p.x < 2 || p.y < 2 || p.x + 3 > k || p.y + 3 > k {
            return Err(CostError::PatternViolation(format!("dot {p} is within distance 1 of the ring")));
        }
    }
    for (i, a) in dots.iter().enumerate() {
        for b in &dots[i + 1..] {
            if a.x.abs_diff(b.x).max(a.y.abs_diff(b.y)) < 3 {
                return Err(CostError::PatternViolation(format!("dots {a} and {b} are closer than 3")));
            }
        }
    }
    Ok(dots.len() as u64)
}

/// Local cost of a square whose black pixels are pairwise at L1 distance at
/// least 3: the number of black pixels off the ring.
///
/// The closed 4-neighbourhoods of the dots are disjoint, an off-ring dot
/// stays a violation unless something in its closed neighbourhood changes,
/// and deleting the off-ring dots fixes the square.
pub fn sparse_dot_local_cost(sub: &Image) -> Result<u64, CostError> {
    let k = sub.side();
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut off_ring = 0;
    for p in sub.black_pixels() {
        // earlier rows within L1 distance 2
        for dy in 0..=2.min(p.y) {
            let row = &rows[p.y - dy];
            if row.iter().any(|&x| x.abs_diff(p.x) + dy < 3) {
                return Err(CostError::PatternViolation(format!("dot {p} has a black pixel within L1 distance 2")));
            }
        }
        rows[p.y].push(p.x);
        if !sub.is_on_border(p) {
            off_ring += 1;
        }
    }
    Ok(off_ring)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Provenance {
    BruteForce,
    Analytic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CostRecord {
    pub square: SquareRef,
    pub lc: u64,
    pub elc: u64,
    pub provenance: Provenance,
}

impl CostRecord {
    pub fn new(square: SquareRef, lc: u64, provenance: Provenance) -> Self {
        Self {
            square,
            lc,
            elc: lc.min(2 * square.k as u64),
            provenance,
        }
    }
}

/// Supplies exact local costs. Providers must not return upper bounds.
pub trait CostProvider: Sync {
    fn local_cost(&self, square: &SquareRef, contents: &Image) -> Result<CostRecord, CostError>;
}

/// Brute force on squares with `k ≤ 4`.
pub struct BruteForceCost;

impl CostProvider for BruteForceCost {
    fn local_cost(&self, square: &SquareRef, contents: &Image) -> Result<CostRecord, CostError> {
        let lc = exact_dist_border_connected(contents).map_err(|_| unavailable(square))?;
        Ok(CostRecord::new(*square, lc as u64, Provenance::BruteForce))
    }
}

/// [`sparse_dot_local_cost`], falling back to brute force on tiny squares.
pub struct DotCost;

impl CostProvider for DotCost {
    fn local_cost(&self, square: &SquareRef, contents: &Image) -> Result<CostRecord, CostError> {
        match sparse_dot_local_cost(contents) {
            Ok(lc) => Ok(CostRecord::new(*square, lc, Provenance::Analytic)),
            Err(_) => BruteForceCost.local_cost(square, contents),
        }
    }
}

fn unavailable(square: &SquareRef) -> CostError {
    CostError::CostUnavailable {
        level: square.level,
        u: square.u,
        v: square.v,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AuditReport {
    pub side: usize,
    pub eps: DyadicEps,
    pub per_level_sums: Vec<u64>,
    pub grand_total: u64,
    /// `ε n² / 2`.
    pub threshold: f64,
    pub passed: bool,
    /// Within 2% of the threshold either way.
    pub near_threshold: bool,
}

/// Sums the effective local costs of all squares of all levels and compares
/// with `ε n² / 2`. Fails with [`CostError::CostUnavailable`] as soon as the
/// provider cannot price a square.
pub fn structural_audit(
    img: &dyn PixelSource,
    eps: DyadicEps,
    provider: &dyn CostProvider,
) -> Result<AuditReport, CostError> {
    let n = img.side();
    let mut per_level_sums = Vec::new();
    for g in LevelGeometry::levels(eps) {
        let mut sum = 0;
        for square in g.enumerate_squares(n)? {
            let contents = Image::from_fn(square.k, |x, y| img.is_black(square.u + 1 + x, square.v + 1 + y));
            sum += provider.local_cost(&square, &contents)?.elc;
        }
        per_level_sums.push(sum);
    }
    let grand_total = per_level_sums.iter().sum();
    let threshold = eps.value() * (n as f64).powi(2) / 2.0;
    Ok(AuditReport {
        side: n,
        eps,
        per_level_sums,
        grand_total,
        threshold,
        passed: grand_total as f64 >= threshold,
        near_threshold: (grand_total as f64 - threshold).abs() <= 0.02 * threshold,
    })
}
