use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

/// Bumped whenever a report's field names or meanings change.
pub const SCHEMA_VERSION: u32 = 1;

/// Exit-code classes: bad input (2) or a broken internal guarantee (3).
pub enum Failure {
    Input(anyhow::Error),
    Invariant(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Input(e.into())
    }
}

pub fn invariant(msg: impl std::fmt::Display) -> Failure {
    Failure::Invariant(anyhow::anyhow!("{msg}"))
}

/// Every JSON artifact: version and command first, then the body, then
/// timing, which is the only part that differs between identical runs.
#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Report<T: Serialize> {
    pub schema_version: u32,
    pub command: &'static str,
    #[serde(flatten)]
    pub body: T,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Timing {
    pub wall_clock_ms: f64,
}

impl<T: Serialize> Report<T> {
    pub fn new(command: &'static str, body: T) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command,
            body,
            timing: None,
        }
    }

    pub fn timed(mut self, wall_clock_ms: f64) -> Self {
        self.timing = Some(Timing { wall_clock_ms });
        self
    }
}

/// Writes pretty JSON to `path`, or stdout when absent.
pub fn write_json(path: Option<&Path>, value: &impl Serialize) -> Result<(), Failure> {
    let mut out = sink(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

pub fn sink(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// `image.pbm` → `image.pbm.json`.
pub fn sidecar_path(image: &Path) -> PathBuf {
    let mut s = image.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}
