//! The nonadaptive lower-bound game on the hard distribution: how likely a
//! fixed query set is to contain a revealing set, and the covered-cell
//! bookkeeping that bounds it.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::image::PixelCoord;
use crate::rng::{substream, trial_seed};

use super::hard::{sample_layout, HardParams, WindowIndex};
use super::LabError;

/// A deterministic nonadaptive algorithm, identified with its query set.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryStrategy {
    pixels: Vec<PixelCoord>,
}

impl QueryStrategy {
    /// Duplicates are dropped; order is irrelevant.
    pub fn from_pixels(pixels: impl IntoIterator<Item = PixelCoord>) -> Self {
        let mut pixels: Vec<PixelCoord> = pixels.into_iter().collect();
        pixels.sort_unstable_by_key(|p| (p.y, p.x));
        pixels.dedup();
        Self { pixels }
    }

    /// The first `q` distinct pixels of an ordering.
    pub fn prefix(ordering: &[PixelCoord], q: usize) -> Self {
        Self::from_pixels(ordering.iter().copied().take(q))
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[PixelCoord] {
        &self.pixels
    }

    pub fn check_bounds(&self, params: &HardParams) -> Result<(), LabError> {
        let side = params.canvas_side();
        match self.pixels.iter().find(|p| p.x >= side || p.y >= side) {
            Some(p) => Err(LabError::QueryOutOfRange { pixel: *p, side }),
            None => Ok(()),
        }
    }

    fn bitmap(&self, params: &HardParams) -> Vec<bool> {
        let side = params.canvas_side();
        let mut bits = vec![false; side * side];
        for p in &self.pixels {
            if p.x < side && p.y < side {
                bits[p.y * side + p.x] = true;
            }
        }
        bits
    }
}

/// Natural query orderings; a strategy with `q` queries takes the first `q`
/// pixels, so larger budgets always contain smaller ones.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyKind {
    /// A uniformly random permutation of the `n × n` region.
    Uniform,
    /// Whole bridge rows of bridge squares, one square per window of every
    /// level per round, lowest level first.
    BridgeFocused,
    /// Grid lines from coarse to fine: pixels sorted by the 2-adic valuation
    /// of their coordinates.
    GridFocused,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 3] = [Self::Uniform, Self::BridgeFocused, Self::GridFocused];

    pub fn name(self) -> &'static str {
        match self {
            Self::Uniform => "uniform",
            Self::BridgeFocused => "bridge-focused",
            Self::GridFocused => "grid-focused",
        }
    }

    pub fn ordering(self, params: &HardParams, seed: u64) -> Vec<PixelCoord> {
        let n = params.n;
        match self {
            Self::Uniform => {
                let mut all: Vec<PixelCoord> = (0..n)
                    .flat_map(|y| (0..n).map(move |x| PixelCoord::new(x, y)))
                    .collect();
                all.shuffle(&mut substream(seed, 0));
                all
            }
            Self::BridgeFocused => bridge_ordering(params, seed),
            Self::GridFocused => {
                let val = |v: usize| if v == 0 { u32::MAX } else { v.trailing_zeros() };
                let mut all: Vec<PixelCoord> = (0..n)
                    .flat_map(|y| (0..n).map(move |x| PixelCoord::new(x, y)))
                    .collect();
                all.sort_by_key(|p| (std::cmp::Reverse(val(p.x).max(val(p.y))), p.y, p.x));
                all
            }
        }
    }

    pub fn strategy(self, params: &HardParams, q: usize, seed: u64) -> QueryStrategy {
        QueryStrategy::prefix(&self.ordering(params, seed), q)
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| LabError::UnknownStrategy(s.to_string()))
    }
}

fn bridge_ordering(params: &HardParams, seed: u64) -> Vec<PixelCoord> {
    let mut rng = substream(seed, 0);
    // (level, window x, window y, bridge cells in random order)
    type Queue = (u32, usize, usize, Vec<(usize, usize)>);
    let mut queues: Vec<Queue> = Vec::new();
    for level in params.levels() {
        let cells = params.cells_per_window_row(level);
        let w = params.windows_per_row(level);
        for wy in 0..w {
            for wx in 0..w {
                let mut bridge_cells: Vec<(usize, usize)> = (0..cells)
                    .flat_map(|cy| (0..cells).map(move |cx| (cx, cy)))
                    .filter(|&(cx, cy)| HardParams::is_bridge_cell(cx, cy))
                    .collect();
                bridge_cells.shuffle(&mut rng);
                queues.push((level, wx, wy, bridge_cells));
            }
        }
    }
    let rounds = queues.iter().map(|q| q.3.len()).max().unwrap_or(0);
    let mut out = Vec::new();
    for r in 0..rounds {
        for (level, wx, wy, cells) in &queues {
            let Some(&(cx, cy)) = cells.get(r) else { continue };
            let a = params.cell_side(*level);
            let nw = params.window_side(*level);
            let (x0, y0) = (wx * nw + cx * a, wy * nw + cy * a);
            for k in 1..=params.bridges_per_square(*level) {
                out.extend((0..a).map(|dx| PixelCoord::new(x0 + dx, y0 + 2 * k - 1)));
            }
        }
    }
    out
}

/// `Pr[E]` computed exactly: disconnecting pixels are independent and
/// uniform on their bridges, so a bridge square is revealed with
/// probability `Π_k x_k / a` and bridge squares of one window independently.
pub fn revealing_probability_exact(queries: &QueryStrategy, params: &HardParams) -> f64 {
    let n = params.n;
    let mut total = 0.0;
    for level in params.levels() {
        let a = params.cell_side(level);
        let nw = params.window_side(level);
        let cells = params.cells_per_window_row(level);
        let bridges = params.bridges_per_square(level);
        // bridge cell (global cell coords) -> queried pixels per bridge
        let mut hits: BTreeMap<(usize, usize), Vec<u32>> = BTreeMap::new();
        for p in queries.pixels() {
            if p.x >= n || p.y >= n {
                continue;
            }
            let (cx, cy) = (p.x / a, p.y / a);
            if !HardParams::is_bridge_cell(cx % cells, cy % cells) {
                continue;
            }
            if let Some(k) = params.bridge_of_row(level, p.y % a) {
                hits.entry((cy, cx)).or_insert_with(|| vec![0; bridges])[k - 1] += 1;
            }
        }
        // window -> probability that none of its bridge squares is revealed
        let mut miss: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (&(cy, cx), counts) in &hits {
            let reveal: f64 = counts.iter().map(|&x| x as f64 / a as f64).product();
            if reveal > 0.0 {
                *miss.entry((cy * a / nw, cx * a / nw)).or_insert(1.0) *= 1.0 - reveal;
            }
        }
        let windows = params.windows_per_row(level).pow(2) as f64;
        let level_sum: f64 = miss.values().map(|m| 1.0 - m).sum();
        total += level_sum / windows;
    }
    total / params.level_count() as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct McEstimate {
    pub trials: u64,
    pub hits: u64,
    pub estimate: f64,
    pub stderr: f64,
}

/// Monte Carlo `Pr[E]`: samples layouts exactly as [`super::sample_hard`]
/// does and checks whether the query set holds every disconnecting pixel
/// of some bridge square.
pub fn revealing_probability_mc(queries: &QueryStrategy, params: &HardParams, trials: u64, seed: u64) -> McEstimate {
    let bits = queries.bitmap(params);
    let side = params.canvas_side();
    let trial = |t: u64| -> bool {
        let layout = sample_layout(params, &mut substream(trial_seed(seed, t), 0));
        let revealed = layout
            .revealing_sets(params)
            .any(|set| set.iter().all(|p| bits[p.y * side + p.x]));
        revealed
    };
    let hits = count_hits(trials, trial);
    let p = hits as f64 / trials as f64;
    McEstimate {
        trials,
        hits,
        estimate: p,
        stderr: (p * (1.0 - p) / trials as f64).sqrt(),
    }
}

#[cfg(feature = "parallel")]
fn count_hits(trials: u64, trial: impl Fn(u64) -> bool + Sync) -> u64 {
    use rayon::prelude::*;
    (0..trials).into_par_iter().filter(|&t| trial(t)).count() as u64
}

#[cfg(not(feature = "parallel"))]
fn count_hits(trials: u64, trial: impl Fn(u64) -> bool) -> u64 {
    (0..trials).filter(|&t| trial(t)).count() as u64
}

/// Smallest prefix length of `ordering` whose exact `Pr[E]` reaches
/// `target`, by bisection (prefixes are nested and `E` is monotone).
pub fn critical_query_count(ordering: &[PixelCoord], params: &HardParams, target: f64) -> Option<usize> {
    let pr = |q: usize| revealing_probability_exact(&QueryStrategy::prefix(ordering, q), params);
    if pr(ordering.len()) < target {
        return None;
    }
    let (mut lo, mut hi) = (0usize, ordering.len());
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if pr(mid) >= target {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Some(lo)
}

/// `q / ((1/ε) log₂(1/ε))`.
pub fn query_constant(q: usize, params: &HardParams) -> f64 {
    q as f64 / (params.eps.inv() as f64 * params.eps.log2_inv() as f64)
}

/// A cell of some level, by cell row and column.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellRef {
    pub level: u32,
    pub row: usize,
    pub col: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Association {
    pub window_level: u32,
    pub window: WindowIndex,
    pub cell: CellRef,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LevelStats {
    pub level: u32,
    pub covered_cells: usize,
    pub maximal_cells: usize,
    /// `t_i`.
    pub good_windows: usize,
    /// `g_i`.
    pub associated_windows: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CoverageChecks {
    /// `q ≥ Σ a_i² g_i / 8`.
    pub queries_cover_associations: bool,
    /// `g_h = t_h`.
    pub top_level_all_associated: bool,
    /// `g_i ≥ t_i − t_{i+1}` below the top level.
    pub recursion: bool,
    /// `q ≥ (3/32) Σ 4^i t_i`.
    pub good_window_bound: bool,
}

impl CoverageChecks {
    pub fn all(&self) -> bool {
        self.queries_cover_associations && self.top_level_all_associated && self.recursion && self.good_window_bound
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WindowStats {
    pub q: usize,
    pub levels: Vec<LevelStats>,
    pub associations: Vec<Association>,
    pub checks: CoverageChecks,
}

impl WindowStats {
    pub fn level(&self, level: u32) -> &LevelStats {
        self.levels.iter().find(|l| l.level == level).expect("level in range")
    }
}

/// Covered, maximal and good bookkeeping plus the association procedure:
/// levels from highest to lowest, good windows row-major, and among the
/// free maximal cells of a window the smallest `(level, row, col)`.
pub fn classify_windows(queries: &QueryStrategy, params: &HardParams) -> WindowStats {
    let n = params.n;
    let mut covered: BTreeSet<CellRef> = BTreeSet::new();
    for level in params.levels() {
        let a = params.cell_side(level);
        let mut counts: HashMap<(usize, usize), usize> = HashMap::new();
        for p in queries.pixels() {
            if p.x < n && p.y < n {
                *counts.entry((p.y / a, p.x / a)).or_default() += 1;
            }
        }
        covered.extend(
            counts
                .into_iter()
                .filter(|&(_, c)| 8 * c >= a * a)
                .map(|((row, col), _)| CellRef { level, row, col }),
        );
    }
    let parent = |c: &CellRef, level: u32| {
        let shift = level - c.level;
        CellRef {
            level,
            row: c.row >> shift,
            col: c.col >> shift,
        }
    };
    let maximal: BTreeSet<CellRef> = covered
        .iter()
        .filter(|c| (c.level + 1..=params.high_level).all(|j| !covered.contains(&parent(c, j))))
        .copied()
        .collect();
    let window_of = |c: &CellRef, level: u32| {
        let a = params.cell_side(c.level);
        let nw = params.window_side(level);
        WindowIndex {
            row: c.row * a / nw,
            col: c.col * a / nw,
        }
    };

    let mut associated: BTreeSet<CellRef> = BTreeSet::new();
    let mut associations = Vec::new();
    let mut levels = Vec::new();
    for level in params.levels().rev() {
        let good: BTreeSet<WindowIndex> = covered
            .iter()
            .filter(|c| c.level >= level)
            .map(|c| window_of(c, level))
            .collect();
        let mut by_window: BTreeMap<WindowIndex, Vec<CellRef>> = BTreeMap::new();
        for c in maximal.iter().filter(|c| c.level >= level) {
            by_window.entry(window_of(c, level)).or_default().push(*c);
        }
        let mut g = 0;
        for w in &good {
            let Some(cells) = by_window.get(w) else { continue };
            if cells.iter().all(|c| !associated.contains(c)) {
                let cell = cells[0];
                associated.insert(cell);
                associations.push(Association {
                    window_level: level,
                    window: *w,
                    cell,
                });
                g += 1;
            }
        }
        levels.push(LevelStats {
            level,
            covered_cells: covered.iter().filter(|c| c.level == level).count(),
            maximal_cells: maximal.iter().filter(|c| c.level == level).count(),
            good_windows: good.len(),
            associated_windows: g,
        });
    }
    levels.reverse();

    let q = queries.len() as u128;
    let t = |i: usize| levels[i].good_windows as u128;
    let g = |i: usize| levels[i].associated_windows as u128;
    let top = levels.len() - 1;
    let a2 = |i: usize| (params.cell_side(levels[i].level) as u128).pow(2);
    let checks = CoverageChecks {
        queries_cover_associations: 8 * q >= (0..levels.len()).map(|i| a2(i) * g(i)).sum::<u128>(),
        top_level_all_associated: g(top) == t(top),
        recursion: (0..top).all(|i| g(i) + t(i + 1) >= t(i)),
        good_window_bound: 32 * q >= 3 * (0..levels.len()).map(|i| a2(i) * t(i)).sum::<u128>(),
    };
    WindowStats {
        q: queries.len(),
        levels,
        associations,
        checks,
    }
}
