//! Images defined by a formula, for sides too large to store.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::image::{Image, PixelSource};
use crate::rng::mix64;

use super::LabError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "kind")]
pub enum Procedural {
    White { side: usize },
    /// Rows `y ≡ 0 (mod period)` plus column 0: a connected comb.
    Comb { side: usize, period: usize },
    /// Isolated dots on the code `x + 2y ≡ 0 (mod 5)`, each present with
    /// probability `density`, two pixels clear of the border.
    Dots { side: usize, density: f64, seed: u64 },
}

impl Procedural {
    pub fn render(&self) -> Image {
        Image::from_fn(self.side(), |x, y| self.is_black(x, y))
    }

    pub fn family(&self) -> ProceduralFamily {
        match self {
            Procedural::White { .. } => ProceduralFamily::White,
            Procedural::Comb { .. } => ProceduralFamily::Comb,
            Procedural::Dots { .. } => ProceduralFamily::Dots,
        }
    }
}

impl PixelSource for Procedural {
    fn side(&self) -> usize {
        match *self {
            Procedural::White { side } | Procedural::Comb { side, .. } | Procedural::Dots { side, .. } => side,
        }
    }

    #[inline]
    fn is_black(&self, x: usize, y: usize) -> bool {
        match *self {
            Procedural::White { .. } => false,
            Procedural::Comb { period, .. } => x == 0 || y.is_multiple_of(period),
            Procedural::Dots { side, density, seed } => {
                x >= 2
                    && y >= 2
                    && x + 2 < side
                    && y + 2 < side
                    && (x + 2 * y).is_multiple_of(5)
                    && (mix64(seed ^ mix64(((y as u64) << 32) | x as u64)) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
                        < density
            }
        }
    }
}

/// Names of the procedural families, as accepted on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProceduralFamily {
    White,
    Comb,
    Dots,
}

impl ProceduralFamily {
    pub const ALL: [ProceduralFamily; 3] = [Self::White, Self::Comb, Self::Dots];

    pub fn name(self) -> &'static str {
        match self {
            Self::White => "white",
            Self::Comb => "comb",
            Self::Dots => "dots",
        }
    }

    /// The family member of side `n`: combs with period 3, dots at density
    /// one half of the code.
    pub fn instance(self, n: usize, seed: u64) -> Procedural {
        match self {
            Self::White => Procedural::White { side: n },
            Self::Comb => Procedural::Comb { side: n, period: 3 },
            Self::Dots => Procedural::Dots {
                side: n,
                density: 0.5,
                seed,
            },
        }
    }
}

impl fmt::Display for ProceduralFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProceduralFamily {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| LabError::UnknownFamily(s.to_string()))
    }
}
