//! Query-counting access to an image.
//!
//! Every answered query is counted and logged, repeats included. A
//! nonadaptive oracle refuses to answer anything until its query set has
//! been registered and sealed, and afterwards answers only registered
//! pixels.

use thiserror::Error;

use crate::image::{PixelCoord, PixelSource};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("pixel {pixel} is outside the {side}x{side} canvas")]
    OutOfRange { pixel: PixelCoord, side: usize },
    #[error("phase violation: {0}")]
    PhaseViolation(&'static str),
    #[error("query budget of {0} exhausted")]
    BudgetExhausted(u64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum OracleMode {
    Adaptive,
    Nonadaptive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Collect,
    Answer,
}

pub struct PixelOracle<'a> {
    target: &'a dyn PixelSource,
    side: usize,
    mode: OracleMode,
    phase: Phase,
    registered: Vec<u64>,
    cursor: usize,
    sorted: Option<Vec<u64>>,
    log: Vec<u64>,
    budget: Option<u64>,
}

impl<'a> PixelOracle<'a> {
    pub fn adaptive(target: &'a dyn PixelSource) -> Self {
        Self::new(target, OracleMode::Adaptive)
    }

    pub fn nonadaptive(target: &'a dyn PixelSource) -> Self {
        Self::new(target, OracleMode::Nonadaptive)
    }

    pub fn new(target: &'a dyn PixelSource, mode: OracleMode) -> Self {
        Self {
            target,
            side: target.side(),
            mode,
            phase: match mode {
                OracleMode::Adaptive => Phase::Answer,
                OracleMode::Nonadaptive => Phase::Collect,
            },
            registered: Vec::new(),
            cursor: 0,
            sorted: None,
            log: Vec::new(),
            budget: None,
        }
    }

    /// Enlarges the canvas to `side × side`; pixels beyond the target answer
    /// white without touching it, but are still counted.
    pub fn padded_to(mut self, side: usize) -> Self {
        assert!(side >= self.target.side(), "padding cannot shrink the canvas");
        self.side = side;
        self
    }

    pub fn with_budget(mut self, budget: Option<u64>) -> Self {
        self.budget = budget;
        self
    }

    pub fn set_budget(&mut self, budget: Option<u64>) {
        self.budget = budget;
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn mode(&self) -> OracleMode {
        self.mode
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn budget(&self) -> Option<u64> {
        self.budget
    }

    /// Number of queries answered so far.
    pub fn count(&self) -> u64 {
        self.log.len() as u64
    }

    /// Answered queries in order.
    pub fn log(&self) -> impl ExactSizeIterator<Item = (PixelCoord, bool)> + '_ {
        self.log
            .iter()
            .map(|&e| (PixelCoord::from_key(e >> 1), e & 1 == 1))
    }

    pub fn registered_len(&self) -> usize {
        self.registered.len()
    }

    fn check_range(&self, p: PixelCoord) -> Result<(), OracleError> {
        if p.x < self.side && p.y < self.side {
            Ok(())
        } else {
            Err(OracleError::OutOfRange {
                pixel: p,
                side: self.side,
            })
        }
    }

    /// Adds a pixel to the nonadaptive query set.
    pub fn register(&mut self, p: PixelCoord) -> Result<(), OracleError> {
        if self.mode != OracleMode::Nonadaptive || self.phase != Phase::Collect {
            return Err(OracleError::PhaseViolation(
                "registration is only possible during the collect phase of a nonadaptive oracle",
            ));
        }
        self.check_range(p)?;
        self.registered.push(p.key());
        Ok(())
    }

    /// Ends the collect phase. Irreversible.
    pub fn seal(&mut self) -> Result<(), OracleError> {
        if self.mode != OracleMode::Nonadaptive || self.phase != Phase::Collect {
            return Err(OracleError::PhaseViolation("only an unsealed nonadaptive oracle can be sealed"));
        }
        self.phase = Phase::Answer;
        Ok(())
    }

    fn is_registered(&mut self, key: u64) -> bool {
        if self.registered.get(self.cursor) == Some(&key) {
            self.cursor += 1;
            return true;
        }
        let sorted = self.sorted.get_or_insert_with(|| {
            let mut keys = self.registered.clone();
            keys.sort_unstable();
            keys.dedup();
            keys
        });
        sorted.binary_search(&key).is_ok()
    }

    pub fn query(&mut self, p: PixelCoord) -> Result<bool, OracleError> {
        self.check_range(p)?;
        if self.mode == OracleMode::Nonadaptive {
            if self.phase == Phase::Collect {
                return Err(OracleError::PhaseViolation("answer requested before the query set was sealed"));
            }
            if !self.is_registered(p.key()) {
                return Err(OracleError::PhaseViolation("answer requested for an unregistered pixel"));
            }
        }
        if let Some(budget) = self.budget {
            if self.count() >= budget {
                return Err(OracleError::BudgetExhausted(budget));
            }
        }
        let ts = self.target.side();
        let black = p.x < ts && p.y < ts && self.target.is_black(p.x, p.y);
        self.log.push((p.key() << 1) | black as u64);
        Ok(black)
    }

    /// Answers every registered query in registration order.
    pub fn answer_registered(&mut self) -> Result<Vec<bool>, OracleError> {
        if self.mode != OracleMode::Nonadaptive || self.phase != Phase::Answer {
            return Err(OracleError::PhaseViolation("batch answers need a sealed nonadaptive oracle"));
        }
        let mut out = Vec::with_capacity(self.registered.len());
        self.cursor = 0;
        for i in 0..self.registered.len() {
            let p = PixelCoord::from_key(self.registered[i]);
            out.push(self.query(p)?);
        }
        Ok(out)
    }
}
