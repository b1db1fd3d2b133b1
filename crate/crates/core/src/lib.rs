//! Sublinear-query testers for connectedness of binary images, with the
//! exact machinery needed to check them: component labeling, brute-force
//! distances, instance generators and the lower-bound game.

pub mod cost;
pub mod eps;
pub mod geometry;
pub mod harness;
pub mod image;
pub mod lab;
pub mod oracle;
pub mod pbm;
pub mod rng;
pub mod testers;

pub use eps::DyadicEps;
pub use image::{Image, PixelCoord, PixelSource};
pub use oracle::{OracleMode, PixelOracle};
