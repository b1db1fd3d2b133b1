//! The hard distribution: a checkerboard with bridges hidden in a random
//! window of a random level, plus a black line right of the window.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::eps::DyadicEps;
use crate::image::{connected_components, Image, PixelCoord};
use crate::rng::substream;

use super::LabError;

/// Validated parameters. All sizes are powers of two: cells of level `i`
/// have side `a_i = 2^i`, windows have side `n_i = 2^{i+4} √ε n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HardParams {
    pub n: usize,
    pub eps: DyadicEps,
    pub low_level: u32,
    pub high_level: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LevelShape {
    pub level: u32,
    pub cell_side: usize,
    pub window_side: usize,
    pub windows_per_row: usize,
    pub bridges_per_square: usize,
}

pub fn make_hard_params(n: usize, eps: DyadicEps) -> Result<HardParams, LabError> {
    let mut problems = Vec::new();
    if !n.is_power_of_two() {
        problems.push(format!("n = {n} is not a power of two"));
    }
    let j = eps.log2_inv() as i64;
    if j % 8 != 0 {
        problems.push(format!("1/eps = 2^{j} is not of the form 2^(8m)"));
        return Err(LabError::InvalidParams(problems));
    }
    let m = j / 8;
    let p = n.max(1).ilog2() as i64;
    if m < 2 {
        problems.push(format!("1/eps = 2^{j} needs m >= 2 in 2^(8m)"));
    }
    // n_i = 2^(4 - 4m + i + p)
    let window_exp = |i: i64| 4 - 4 * m + i + p;
    if window_exp(2 * m) > p {
        problems.push(format!(
            "highest-level window side 2^{} exceeds n = 2^{p}",
            window_exp(2 * m)
        ));
    }
    if window_exp(m) < 0 {
        problems.push(format!("lowest-level window side 2^{} is not an integer", window_exp(m)));
    }
    if p <= 5 * m - 4 {
        problems.push(format!("n = {n} must exceed (1/eps)^(5/8) / 16 = 2^{}", 5 * m - 4));
    }
    if 2 * m >= window_exp(m) {
        problems.push(format!(
            "largest cell side 2^{} is not smaller than smallest window side 2^{}",
            2 * m,
            window_exp(m)
        ));
    }
    if !problems.is_empty() {
        return Err(LabError::InvalidParams(problems));
    }
    Ok(HardParams {
        n,
        eps,
        low_level: m as u32,
        high_level: 2 * m as u32,
    })
}

impl HardParams {
    pub fn levels(&self) -> std::ops::RangeInclusive<u32> {
        self.low_level..=self.high_level
    }

    pub fn level_count(&self) -> usize {
        (self.high_level - self.low_level + 1) as usize
    }

    pub fn cell_side(&self, level: u32) -> usize {
        1 << level
    }

    pub fn window_side(&self, level: u32) -> usize {
        let shift = 4 * self.low_level as i64 - 4 - level as i64;
        if shift >= 0 {
            self.n >> shift
        } else {
            self.n << -shift
        }
    }

    pub fn windows_per_row(&self, level: u32) -> usize {
        self.n / self.window_side(level)
    }

    pub fn bridges_per_square(&self, level: u32) -> usize {
        self.cell_side(level) / 2 - 1
    }

    /// Cells per window row.
    pub fn cells_per_window_row(&self, level: u32) -> usize {
        self.window_side(level) / self.cell_side(level)
    }

    pub fn shape(&self, level: u32) -> LevelShape {
        LevelShape {
            level,
            cell_side: self.cell_side(level),
            window_side: self.window_side(level),
            windows_per_row: self.windows_per_row(level),
            bridges_per_square: self.bridges_per_square(level),
        }
    }

    /// Side of the rendered canvas, `n + 1`.
    pub fn canvas_side(&self) -> usize {
        self.n + 1
    }

    /// Is the cell at window-local cell coordinates a bridge square: white
    /// in the checkerboard (top-left black) and not in the first column.
    pub fn is_bridge_cell(local_cx: usize, local_cy: usize) -> bool {
        local_cx >= 1 && (local_cx + local_cy) % 2 == 1
    }

    /// Bridge number `k ∈ 1..=a/2−1` occupying row `r` of a bridge square.
    pub fn bridge_of_row(&self, level: u32, r: usize) -> Option<usize> {
        let a = self.cell_side(level);
        (r % 2 == 1 && r + 3 <= a).then_some(r.div_ceil(2))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WindowIndex {
    pub row: usize,
    pub col: usize,
}

/// The random choices behind one sample, without the rendered image.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HardLayout {
    pub level: u32,
    pub window: WindowIndex,
    /// Bridge squares in row-major order, bridges top to bottom within
    /// each: `a/2 − 1` consecutive entries per bridge square.
    pub disconnecting_pixels: Vec<PixelCoord>,
}

impl HardLayout {
    /// Disconnecting pixels grouped per bridge square.
    pub fn revealing_sets<'a>(&'a self, params: &HardParams) -> impl Iterator<Item = &'a [PixelCoord]> + 'a {
        self.disconnecting_pixels
            .chunks(params.bridges_per_square(self.level).max(1))
    }
}

pub fn sample_layout<R: Rng + ?Sized>(params: &HardParams, rng: &mut R) -> HardLayout {
    let level = rng.random_range(params.low_level..=params.high_level);
    let w = params.windows_per_row(level);
    let idx = rng.random_range(0..w * w);
    let window = WindowIndex { row: idx / w, col: idx % w };
    let a = params.cell_side(level);
    let nw = params.window_side(level);
    let cells = params.cells_per_window_row(level);
    let (x0, y0) = (window.col * nw, window.row * nw);
    let mut pixels = Vec::with_capacity(cells * cells / 2 * params.bridges_per_square(level));
    for cy in 0..cells {
        for cx in 0..cells {
            if !HardParams::is_bridge_cell(cx, cy) {
                continue;
            }
            for k in 1..=params.bridges_per_square(level) {
                let x = x0 + cx * a + rng.random_range(0..a);
                let y = y0 + cy * a + 2 * k - 1;
                pixels.push(PixelCoord::new(x, y));
            }
        }
    }
    HardLayout {
        level,
        window,
        disconnecting_pixels: pixels,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct HardInstance {
    pub params: HardParams,
    pub seed: u64,
    #[serde(flatten)]
    pub layout: HardLayout,
    #[serde(skip)]
    pub image: Image,
}

pub fn sample_hard(params: &HardParams, seed: u64) -> HardInstance {
    let layout = sample_layout(params, &mut substream(seed, 0));
    let image = render(params, &layout);
    HardInstance {
        params: *params,
        seed,
        layout,
        image,
    }
}

pub fn render(params: &HardParams, layout: &HardLayout) -> Image {
    let level = layout.level;
    let a = params.cell_side(level);
    let nw = params.window_side(level);
    let (x0, y0) = (layout.window.col * nw, layout.window.row * nw);
    let mut img = Image::white(params.canvas_side());
    for ly in 0..nw {
        for lx in 0..nw {
            let (cx, cy) = (lx / a, ly / a);
            let black = if (cx + cy) % 2 == 0 {
                true
            } else {
                HardParams::is_bridge_cell(cx, cy) && params.bridge_of_row(level, ly % a).is_some()
            };
            if black {
                img.set(x0 + lx, y0 + ly, true);
            }
        }
        img.set(x0 + nw, y0 + ly, true);
    }
    for p in &layout.disconnecting_pixels {
        img.set(p.x, p.y, false);
    }
    img
}

impl HardInstance {
    /// Black checkerboard cells of the window that are fully black in the
    /// rendered image.
    pub fn black_regions(&self) -> usize {
        let p = &self.params;
        let level = self.layout.level;
        let a = p.cell_side(level);
        let nw = p.window_side(level);
        let cells = p.cells_per_window_row(level);
        let (x0, y0) = (self.layout.window.col * nw, self.layout.window.row * nw);
        let mut count = 0;
        for cy in 0..cells {
            for cx in 0..cells {
                if (cx + cy) % 2 == 0
                    && (0..a).all(|dy| (0..a).all(|dx| self.image.get(x0 + cx * a + dx, y0 + cy * a + dy)))
                {
                    count += 1;
                }
            }
        }
        count
    }

    /// For every bridge, the number of white pixels on its row (expected 1).
    pub fn white_pixels_per_bridge(&self) -> Vec<usize> {
        let p = &self.params;
        let level = self.layout.level;
        let a = p.cell_side(level);
        self.layout
            .disconnecting_pixels
            .iter()
            .map(|d| {
                let x_start = d.x - d.x % a;
                (x_start..x_start + a).filter(|&x| !self.image.get(x, d.y)).count()
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FarnessAudit {
    pub component_count: usize,
    /// `⌈(components − 1) / 3⌉`; one pixel change merges at most four
    /// components into one.
    pub distance_lower_bound: u64,
    pub is_eps_far: bool,
}

/// Component-count farness certificate against `ε · nominal_side²`.
pub fn farness_audit(img: &Image, eps: DyadicEps, nominal_side: usize) -> FarnessAudit {
    let c = connected_components(img).component_count();
    let bound = (c.saturating_sub(1) as u64).div_ceil(3);
    FarnessAudit {
        component_count: c,
        distance_lower_bound: bound,
        is_eps_far: c > 0 && bound as u128 * eps.inv() as u128 >= (nominal_side as u128).pow(2),
    }
}

impl HardInstance {
    pub fn farness(&self) -> FarnessAudit {
        farness_audit(&self.image, self.params.eps, self.params.n)
    }
}
