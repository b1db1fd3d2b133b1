//! Instance generators: connected families, far dot images, procedural
//! images, and the hard distribution with its lower-bound game.

use thiserror::Error;

use crate::eps::DyadicEps;
use crate::image::PixelCoord;

pub mod generators;
pub mod hard;
pub mod lowerbound;
pub mod procedural;

pub use generators::{component_far, dot_count, gen_connected, gen_dot_far, ConnectedFamily, DotFarImage};
pub use hard::{
    farness_audit, make_hard_params, render, sample_hard, sample_layout, FarnessAudit, HardInstance, HardLayout,
    HardParams, LevelShape, WindowIndex,
};
pub use lowerbound::{
    classify_windows, critical_query_count, query_constant, revealing_probability_exact, revealing_probability_mc,
    Association, CellRef, CoverageChecks, LevelStats, McEstimate, QueryStrategy, StrategyKind, WindowStats,
};
pub use procedural::{Procedural, ProceduralFamily};

#[derive(Debug, Error)]
pub enum LabError {
    #[error("unknown family `{0}`")]
    UnknownFamily(String),
    #[error("unknown strategy `{0}`")]
    UnknownStrategy(String),
    #[error("cannot place {needed} isolated dots in a {n}x{n} image at eps = {eps}: only {available} sites")]
    DensityInfeasible {
        n: usize,
        eps: DyadicEps,
        needed: usize,
        available: usize,
    },
    #[error("invalid hard-distribution parameters: {}", .0.join("; "))]
    InvalidParams(Vec<String>),
    #[error("query {pixel:?} lies outside the {side}x{side} canvas")]
    QueryOutOfRange { pixel: PixelCoord, side: usize },
}
