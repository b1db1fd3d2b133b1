//! Monte Carlo trials of the tester: independent runs keyed by trial index,
//! aggregated in index order so the result does not depend on scheduling.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::eps::DyadicEps;
use crate::image::PixelSource;
use crate::rng::trial_seed;
use crate::testers::{run_tester, verify_certificate, TesterConfig, TesterError, Variant};

/// How trials are scheduled. Without the `parallel` feature both run
/// sequentially.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Parallelism {
    #[default]
    Parallel,
    Sequential,
}

/// What one trial contributes to a summary.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrialOutcome {
    pub index: u64,
    pub seed: u64,
    pub rejected: bool,
    pub queries: u64,
    pub step_one_queries: u64,
    pub level_queries: Vec<u64>,
    pub budget_exhausted: bool,
    /// `None` for accepts and when verification is off.
    pub certificate_sound: Option<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

/// Wilson score interval for `successes` out of `n` at normal quantile `z`.
pub fn wilson_interval(successes: u64, n: u64, z: f64) -> Interval {
    if n == 0 {
        return Interval { lo: 0.0, hi: 1.0 };
    }
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    // clamp so the interval always contains p despite rounding
    Interval {
        lo: (centre - half).max(0.0).min(p),
        hi: (centre + half).min(1.0).max(p),
    }
}

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QueryStats {
    pub mean: f64,
    pub min: u64,
    pub max: u64,
    pub mean_step_one: f64,
    /// Mean queries spent in each level's squares, lowest level first.
    pub mean_per_level: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrialSummary {
    pub seed: u64,
    pub variant: Variant,
    /// Proximity parameter as requested.
    pub eps: DyadicEps,
    /// Proximity parameter and side the tester ran with after padding.
    pub eps_used: DyadicEps,
    pub side_used: usize,
    pub trials: u64,
    pub rejections: u64,
    pub rejection_rate: f64,
    pub rejection_interval: Interval,
    pub queries: QueryStats,
    pub budget_exhausted: u64,
    pub certificates_checked: u64,
    pub certificates_sound: u64,
}

impl TrialSummary {
    pub fn all_certificates_sound(&self) -> bool {
        self.certificates_sound == self.certificates_checked
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrialRun {
    pub summary: TrialSummary,
    /// Milliseconds; kept apart so summaries compare equal across runs.
    pub wall_clock_ms: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrialSpec {
    pub config: TesterConfig,
    pub trials: u64,
    pub verify_certificates: bool,
    pub parallelism: Parallelism,
}

impl TrialSpec {
    /// `config.seed` is the root seed; trial `i` runs with
    /// [`trial_seed`]`(root, i)`.
    pub fn new(config: TesterConfig, trials: u64) -> Self {
        Self {
            config,
            trials,
            verify_certificates: true,
            parallelism: Parallelism::Parallel,
        }
    }

    pub fn sequential(mut self) -> Self {
        self.parallelism = Parallelism::Sequential;
        self
    }
}

pub fn run_trial(target: &dyn PixelSource, spec: &TrialSpec, index: u64) -> Result<TrialOutcome, TesterError> {
    let seed = trial_seed(spec.config.seed, index);
    let verdict = run_tester(target, &spec.config.with_seed(seed))?;
    let certificate_sound = (spec.verify_certificates && verdict.rejected())
        .then(|| verify_certificate(target, &verdict).is_ok());
    Ok(TrialOutcome {
        index,
        seed,
        rejected: verdict.rejected(),
        queries: verdict.queries_used,
        step_one_queries: verdict.report.step_one,
        level_queries: verdict.report.per_level.iter().map(|l| l.queries).collect(),
        budget_exhausted: verdict.budget_exhausted,
        certificate_sound,
    })
}

/// Runs every trial and returns the outcomes in index order.
pub fn run_outcomes(target: &dyn PixelSource, spec: &TrialSpec) -> Result<Vec<TrialOutcome>, TesterError> {
    match spec.parallelism {
        #[cfg(feature = "parallel")]
        Parallelism::Parallel => {
            use rayon::prelude::*;
            (0..spec.trials).into_par_iter().map(|i| run_trial(target, spec, i)).collect()
        }
        _ => (0..spec.trials).map(|i| run_trial(target, spec, i)).collect(),
    }
}

pub fn run_trials(target: &dyn PixelSource, spec: &TrialSpec) -> Result<TrialRun, TesterError> {
    let start = Instant::now();
    let outcomes = run_outcomes(target, spec)?;
    let summary = summarize(target.side(), spec, &outcomes)?;
    Ok(TrialRun {
        summary,
        wall_clock_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Aggregates outcomes, which must be in index order.
pub fn summarize(side: usize, spec: &TrialSpec, outcomes: &[TrialOutcome]) -> Result<TrialSummary, TesterError> {
    let norm = crate::testers::normalize(side, spec.config.eps)?;
    let n = outcomes.len() as u64;
    let rejections = outcomes.iter().filter(|o| o.rejected).count() as u64;
    let levels = outcomes.iter().map(|o| o.level_queries.len()).max().unwrap_or(0);
    let mut per_level = vec![0u64; levels];
    for o in outcomes {
        for (acc, q) in per_level.iter_mut().zip(&o.level_queries) {
            *acc += q;
        }
    }
    let mean = |total: u64| if n == 0 { 0.0 } else { total as f64 / n as f64 };
    let queries = QueryStats {
        mean: mean(outcomes.iter().map(|o| o.queries).sum()),
        min: outcomes.iter().map(|o| o.queries).min().unwrap_or(0),
        max: outcomes.iter().map(|o| o.queries).max().unwrap_or(0),
        mean_step_one: mean(outcomes.iter().map(|o| o.step_one_queries).sum()),
        mean_per_level: per_level.into_iter().map(mean).collect(),
    };
    Ok(TrialSummary {
        seed: spec.config.seed,
        variant: spec.config.variant,
        eps: spec.config.eps,
        eps_used: norm.eps_prime,
        side_used: norm.padded_side,
        trials: n,
        rejections,
        rejection_rate: mean(rejections),
        rejection_interval: wilson_interval(rejections, n, Z95),
        queries,
        budget_exhausted: outcomes.iter().filter(|o| o.budget_exhausted).count() as u64,
        certificates_checked: outcomes.iter().filter(|o| o.certificate_sound.is_some()).count() as u64,
        certificates_sound: outcomes.iter().filter(|o| o.certificate_sound == Some(true)).count() as u64,
    })
}

/// One row of a query-complexity sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepRow {
    pub eps: DyadicEps,
    pub seed: u64,
    pub side: usize,
    pub trials: u64,
    pub mean_queries: f64,
    pub max_queries: u64,
    pub rejection_rate: f64,
    pub runtime_ms: f64,
}

impl SweepRow {
    pub const HEADER: [&'static str; 8] = [
        "eps",
        "seed",
        "side",
        "trials",
        "meanQueries",
        "maxQueries",
        "rejectionRate",
        "runtimeMs",
    ];

    pub fn record(&self) -> [String; 8] {
        [
            self.eps.to_string(),
            self.seed.to_string(),
            self.side.to_string(),
            self.trials.to_string(),
            format!("{:.3}", self.mean_queries),
            self.max_queries.to_string(),
            format!("{:.6}", self.rejection_rate),
            format!("{:.1}", self.runtime_ms),
        ]
    }
}

/// Runs `trials` trials per ε on the image `instance(ε)` returns.
pub fn sweep<S, E, F>(
    eps_list: &[DyadicEps],
    variant: Variant,
    trials: u64,
    seed: u64,
    parallelism: Parallelism,
    mut instance: F,
) -> Result<Vec<SweepRow>, E>
where
    S: PixelSource,
    E: From<TesterError>,
    F: FnMut(DyadicEps) -> Result<S, E>,
{
    eps_list
        .iter()
        .map(|&eps| {
            let image = instance(eps)?;
            let mut spec = TrialSpec::new(TesterConfig::new(eps, variant, seed), trials);
            spec.parallelism = parallelism;
            let run = run_trials(&image, &spec)?;
            Ok(SweepRow {
                eps,
                seed,
                side: image.side(),
                trials,
                mean_queries: run.summary.queries.mean,
                max_queries: run.summary.queries.max,
                rejection_rate: run.summary.rejection_rate,
                runtime_ms: run.wall_clock_ms,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Image;
    use crate::lab::{gen_connected, ConnectedFamily};
    use crate::testers::nonadaptive_query_count;

    fn e16() -> DyadicEps {
        DyadicEps::from_inverse(16).unwrap()
    }

    #[test]
    fn wilson_matches_hand_values() {
        // 50/100 at z = 1.96: centre 0.5, half-width 0.0962
        let i = wilson_interval(50, 100, Z95);
        assert!((i.lo - 0.403_832).abs() < 1e-5 && (i.hi - 0.596_168).abs() < 1e-5, "{i:?}");
        let zero = wilson_interval(0, 10, Z95);
        assert_eq!(zero.lo, 0.0);
        assert!((zero.hi - 0.277_532).abs() < 1e-5);
        let all = wilson_interval(10, 10, Z95);
        assert_eq!(all.hi, 1.0);
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let img = gen_connected(513, ConnectedFamily::Blob, 1);
        let spec = TrialSpec::new(TesterConfig::new(e16(), Variant::Adaptive, 9), 6);
        let par = run_trials(&img, &spec).unwrap().summary;
        let seq = run_trials(&img, &spec.sequential()).unwrap().summary;
        assert_eq!(par, seq);
        assert_eq!(par.rejections, 0);
    }

    #[test]
    fn nonadaptive_counts_are_fixed() {
        let a = gen_connected(513, ConnectedFamily::Serpentine, 2);
        let b = Image::white(513);
        let spec = TrialSpec::new(TesterConfig::new(e16(), Variant::Nonadaptive, 3), 3);
        for img in [&a, &b] {
            let s = run_trials(img, &spec).unwrap().summary;
            assert_eq!(s.queries.min, nonadaptive_query_count(e16()));
            assert_eq!(s.queries.max, s.queries.min);
        }
    }

    #[test]
    fn summary_of_nothing_is_well_formed() {
        let spec = TrialSpec::new(TesterConfig::new(e16(), Variant::Adaptive, 0), 0);
        let s = summarize(513, &spec, &[]).unwrap();
        assert_eq!((s.trials, s.rejection_rate), (0, 0.0));
        let rows = sweep(&[], Variant::Adaptive, 1, 0, Parallelism::Sequential, |_| {
            Ok::<_, TesterError>(Image::white(1))
        });
        assert!(rows.unwrap().is_empty());
    }
}
