use rand::Rng;

/// Draws the BFS step limit `x ∈ [1, k²]` with `Pr[x ≥ j] = 1/j`.
///
/// Inverse transform: for `u` uniform on `(0, 1]`, `min(⌊1/u⌋, k²)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StopSampler {
    k_squared: u64,
}

impl StopSampler {
    pub fn new(k_squared: u64) -> Self {
        assert!(k_squared >= 1, "stop distribution needs a positive support bound");
        Self { k_squared }
    }

    pub fn k_squared(&self) -> u64 {
        self.k_squared
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u = 1.0 - rng.random::<f64>();
        let inv = 1.0 / u;
        if inv >= self.k_squared as f64 {
            self.k_squared
        } else {
            (inv.floor() as u64).clamp(1, self.k_squared)
        }
    }

    /// `Pr[x = j]`: `1/(j(j+1))` below the cap, `1/k²` at it.
    pub fn pmf(&self, j: u64) -> f64 {
        match j {
            0 => 0.0,
            j if j < self.k_squared => 1.0 / (j as f64 * (j + 1) as f64),
            j if j == self.k_squared => 1.0 / j as f64,
            _ => 0.0,
        }
    }

    /// `Pr[x ≥ j]`.
    pub fn tail(&self, j: u64) -> f64 {
        match j {
            0 | 1 => 1.0,
            j if j <= self.k_squared => 1.0 / j as f64,
            _ => 0.0,
        }
    }

    /// `E[x] = H(k²)`, the `k²`-th harmonic number.
    pub fn mean(&self) -> f64 {
        harmonic(self.k_squared)
    }
}

pub(crate) fn harmonic(n: u64) -> f64 {
    if n <= 1000 {
        (1..=n).map(|j| 1.0 / j as f64).sum()
    } else {
        let nf = n as f64;
        nf.ln() + 0.577_215_664_901_532_9 + 1.0 / (2.0 * nf) - 1.0 / (12.0 * nf * nf)
    }
}
