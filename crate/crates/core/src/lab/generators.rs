use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::eps::DyadicEps;
use crate::image::{connected_components, Image, PixelCoord};
use crate::rng::substream;

use super::LabError;

/// Families of connected images used to exercise one-sided error.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConnectedFamily {
    /// A random tree grown pixel by pixel from one seed pixel.
    Blob,
    /// Filled rectangles, each crossing one shared horizontal spine.
    Rectangles,
    /// A width-1 path sweeping the image row by row at random spacings.
    Serpentine,
}

impl ConnectedFamily {
    pub const ALL: [ConnectedFamily; 3] = [Self::Blob, Self::Rectangles, Self::Serpentine];

    pub fn name(self) -> &'static str {
        match self {
            Self::Blob => "blob",
            Self::Rectangles => "rectangles",
            Self::Serpentine => "serpentine",
        }
    }
}

impl fmt::Display for ConnectedFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ConnectedFamily {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| LabError::UnknownFamily(s.to_string()))
    }
}

pub fn gen_connected(n: usize, family: ConnectedFamily, seed: u64) -> Image {
    assert!(n >= 1, "image side must be positive");
    let mut rng = substream(seed, 0);
    match family {
        ConnectedFamily::Blob => blob(n, &mut rng),
        ConnectedFamily::Rectangles => rectangles(n, &mut rng),
        ConnectedFamily::Serpentine => serpentine(n, &mut rng),
    }
}

/// Grows a tree: a black pixel is added only when it has exactly one black
/// neighbour, which keeps thin branches and lots of dead ends near square
/// boundaries.
fn blob<R: Rng>(n: usize, rng: &mut R) -> Image {
    let mut img = Image::white(n);
    let target = (n * n * 2 / 5).max(1);
    let start = (rng.random_range(0..n), rng.random_range(0..n));
    img.set(start.0, start.1, true);
    let mut grown = 1;
    let mut frontier = vec![start];
    while grown < target && !frontier.is_empty() {
        let i = rng.random_range(0..frontier.len());
        let (x, y) = frontier[i];
        let mut options: Vec<(usize, usize)> = crate::image::neighbors(x, y, n)
            .filter(|&(a, b)| !img.get(a, b) && black_neighbours(&img, a, b) == 1)
            .collect();
        if options.is_empty() {
            frontier.swap_remove(i);
            continue;
        }
        let (nx, ny) = options.swap_remove(rng.random_range(0..options.len()));
        img.set(nx, ny, true);
        frontier.push((nx, ny));
        grown += 1;
    }
    img
}

fn black_neighbours(img: &Image, x: usize, y: usize) -> usize {
    crate::image::neighbors(x, y, img.side())
        .filter(|&(a, b)| img.get(a, b))
        .count()
}

fn rectangles<R: Rng>(n: usize, rng: &mut R) -> Image {
    let mut img = Image::white(n);
    let spine = rng.random_range(0..n);
    for x in 0..n {
        img.set(x, spine, true);
    }
    let count = (n / 4).max(1);
    for _ in 0..count {
        let w = rng.random_range(1..=(n / 6).max(1));
        let h = rng.random_range(1..=(n / 3).max(1));
        let x0 = rng.random_range(0..n);
        // the rectangle's rows must contain the spine
        let lo = spine.saturating_sub(h - 1);
        let y0 = rng.random_range(lo..=spine);
        for y in y0..(y0 + h).min(n) {
            for x in x0..(x0 + w).min(n) {
                img.set(x, y, true);
            }
        }
    }
    img
}

/// Horizontal runs joined alternately at the left and right ends, with
/// run spacing 2 to 4 and a few random stubs hanging off each run.
fn serpentine<R: Rng>(n: usize, rng: &mut R) -> Image {
    let mut img = Image::white(n);
    let mut y = rng.random_range(0..n.min(3));
    let mut left_to_right = true;
    let mut prev: Option<usize> = None;
    while y < n {
        for x in 0..n {
            img.set(x, y, true);
        }
        if let Some(p) = prev {
            let x = if left_to_right { 0 } else { n - 1 };
            for yy in p..=y {
                img.set(x, yy, true);
            }
        }
        // dead-end stubs one pixel long below the run
        if y + 2 < n {
            for _ in 0..n / 16 {
                let x = rng.random_range(1..n.saturating_sub(1).max(2));
                if x < n {
                    img.set(x, y + 1, true);
                }
            }
        }
        prev = Some(y);
        left_to_right = !left_to_right;
        y += rng.random_range(2..=4);
    }
    img
}

/// A dot image with a component-count farness certificate.
#[derive(Clone, Debug)]
pub struct DotFarImage {
    pub image: Image,
    pub dots: Vec<PixelCoord>,
    pub component_count: usize,
    /// `(components − 1) / 3 ≥ ε n²`.
    pub certified_far: bool,
}

/// Number of dots [`gen_dot_far`] places: the smallest count whose
/// component bound certifies ε-farness, `⌈3εn²⌉ + 1`.
pub fn dot_count(n: usize, eps: DyadicEps) -> usize {
    (3 * n * n).div_ceil(eps.inv() as usize) + 1
}

/// Isolated dots drawn uniformly from the L1 perfect code
/// `{(x, y) : x + 2y ≡ 0 (mod 5)}`, keeping two pixels of clearance from
/// the image border. Any two code points are at L1 distance at least 3, so
/// every dot is its own component.
pub fn gen_dot_far(n: usize, eps: DyadicEps, seed: u64) -> Result<DotFarImage, LabError> {
    let count = dot_count(n, eps);
    let sites: Vec<PixelCoord> = if n >= 5 {
        (2..n - 2)
            .flat_map(|y| (2..n - 2).map(move |x| PixelCoord::new(x, y)))
            .filter(|p| (p.x + 2 * p.y) % 5 == 0)
            .collect()
    } else {
        Vec::new()
    };
    if count > sites.len() {
        return Err(LabError::DensityInfeasible {
            n,
            eps,
            needed: count,
            available: sites.len(),
        });
    }
    let mut rng = substream(seed, 0);
    let mut dots: Vec<PixelCoord> = index::sample(&mut rng, sites.len(), count)
        .into_iter()
        .map(|i| sites[i])
        .collect();
    dots.sort_unstable_by_key(|p| (p.y, p.x));
    let mut image = Image::white(n);
    for p in &dots {
        image.set(p.x, p.y, true);
    }
    let component_count = connected_components(&image).component_count();
    let certified_far = component_far(component_count, n, eps);
    Ok(DotFarImage {
        image,
        dots,
        component_count,
        certified_far,
    })
}

/// `(c − 1) / 3 ≥ ε n²` in exact arithmetic.
pub fn component_far(components: usize, n: usize, eps: DyadicEps) -> bool {
    components >= 1 && (components as u128 - 1) * eps.inv() as u128 >= 3 * (n as u128).pow(2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::is_connected;

    #[test]
    fn connected_families_are_connected() {
        for family in ConnectedFamily::ALL {
            for (n, seed) in [(1, 0), (2, 1), (17, 2), (65, 3), (129, 4)] {
                let img = gen_connected(n, family, seed);
                assert!(is_connected(&img), "{family} n={n} seed={seed}");
                assert!(img.black_count() > 0);
            }
        }
    }

    #[test]
    fn serpentine_coverage() {
        let img = gen_connected(257, ConnectedFamily::Serpentine, 9);
        let frac = img.black_count() as f64 / (257.0 * 257.0);
        assert!((0.25..0.45).contains(&frac), "{frac}");
    }

    #[test]
    fn generators_are_deterministic() {
        for family in ConnectedFamily::ALL {
            assert_eq!(gen_connected(65, family, 5), gen_connected(65, family, 5));
        }
        let e = DyadicEps::from_inverse(32).unwrap();
        assert_eq!(gen_dot_far(65, e, 1).unwrap().image, gen_dot_far(65, e, 1).unwrap().image);
    }

    #[test]
    fn family_names_round_trip() {
        for family in ConnectedFamily::ALL {
            assert_eq!(family.name().parse::<ConnectedFamily>().unwrap(), family);
        }
        assert!("tree".parse::<ConnectedFamily>().is_err());
    }

    #[test]
    fn dots_are_isolated_and_certified() {
        let e = DyadicEps::from_inverse(32).unwrap();
        let far = gen_dot_far(33, e, 3).unwrap();
        assert_eq!(far.dots.len(), dot_count(33, e));
        assert_eq!(far.component_count, far.dots.len());
        assert!(far.certified_far);
        for p in &far.dots {
            assert!(p.x >= 2 && p.y >= 2 && p.x <= 30 && p.y <= 30);
        }
    }

    #[test]
    fn dot_count_is_the_smallest_certified_count() {
        let e = DyadicEps::from_inverse(16).unwrap();
        let c = dot_count(1025, e);
        assert!(component_far(c, 1025, e));
        assert!(!component_far(c - 1, 1025, e));
    }

    #[test]
    fn dense_requests_are_infeasible() {
        let e = DyadicEps::from_inverse(16).unwrap();
        assert!(matches!(gen_dot_far(65, e, 0), Err(LabError::DensityInfeasible { .. })));
        assert!(gen_dot_far(129, e, 0).unwrap().certified_far);
    }
}
