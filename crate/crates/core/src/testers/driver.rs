use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eps::{DyadicEps, MAX_LOG2_INV};
use crate::geometry::{diamond_decomposition, lattice_pitch, GeometryError, LevelGeometry, SquareRef};
use crate::image::{connected_components, Image, PixelCoord, PixelSource};
use crate::oracle::{OracleError, OracleMode, PixelOracle};
use crate::rng::{stream, substream};

use super::square::{
    diagonal_square_test, evaluate_square, BfsRecord, Certificate, CertificateKind,
    DiagonalOptions, SubVerdict,
};
use super::stop::harmonic;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TesterError {
    #[error("image side {n_prime} is below the required {required} for eps {eps} (n >= 8 eps^-3/2)")]
    PremiseViolated { n_prime: usize, eps: DyadicEps, required: f64 },
    #[error("normalised proximity parameter for side {n} underflows 2^-{max}")]
    EpsUnderflow { n: usize, max: u32 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Variant {
    Nonadaptive,
    Adaptive,
}

impl Variant {
    pub fn oracle_mode(self) -> OracleMode {
        match self {
            Variant::Nonadaptive => OracleMode::Nonadaptive,
            Variant::Adaptive => OracleMode::Adaptive,
        }
    }
}

/// Query cap of the adaptive variant. Ignored by the nonadaptive one,
/// whose query count is fixed in advance.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum QueryBudget {
    /// Eight times [`adaptive_expected_bound`].
    #[default]
    Auto,
    Unlimited,
    Cap(u64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TesterConfig {
    pub eps: DyadicEps,
    pub variant: Variant,
    pub seed: u64,
    pub budget: QueryBudget,
    /// Reject right after the fence fixpoint of the diamond subroutine.
    pub early_reject: bool,
}

impl TesterConfig {
    pub fn new(eps: DyadicEps, variant: Variant, seed: u64) -> Self {
        Self {
            eps,
            variant,
            seed,
            budget: QueryBudget::Auto,
            early_reject: false,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// A side padded to `2^j + 1` and the matching, smaller proximity
/// parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NormalizedInstance {
    pub original_side: usize,
    pub padded_side: usize,
    pub eps_prime: DyadicEps,
}

impl NormalizedInstance {
    pub fn oracle<'a>(&self, target: &'a dyn PixelSource, mode: OracleMode) -> PixelOracle<'a> {
        PixelOracle::new(target, mode).padded_to(self.padded_side)
    }
}

/// Pads `n` up to the next `2^j + 1` and shrinks `eps` by `n²/n′²`,
/// rounded down to a power of two.
pub fn normalize(n: usize, eps: DyadicEps) -> Result<NormalizedInstance, TesterError> {
    let mut padded = 2usize;
    while padded < n {
        padded = (padded - 1) * 2 + 1;
    }
    // smallest j with 2^-j <= eps n² / n′², i.e. 2^j n² >= inv n′²
    let n2 = (n as u128).pow(2).max(1);
    let target = eps.inv() as u128 * (padded as u128).pow(2);
    let mut j = eps.log2_inv();
    while (1u128 << j) * n2 < target {
        j += 1;
        if j > MAX_LOG2_INV {
            return Err(TesterError::EpsUnderflow { n, max: MAX_LOG2_INV });
        }
    }
    Ok(NormalizedInstance {
        original_side: n,
        padded_side: padded,
        eps_prime: DyadicEps::from_log2_inv(j).expect("exponent checked"),
    })
}

/// Checks `n ≥ 8 ε^{-3/2}`.
pub fn check_premise(n: usize, eps: DyadicEps) -> Result<(), TesterError> {
    let inv = eps.inv() as u128;
    if (n as u128).pow(2) >= 64 * inv * inv * inv {
        Ok(())
    } else {
        Err(TesterError::PremiseViolated {
            n_prime: n,
            eps,
            required: 8.0 * (inv as f64).powf(1.5),
        })
    }
}

/// Smallest side of the form `2^j + 1` meeting the premise at `eps`.
pub fn premise_side(eps: DyadicEps) -> usize {
    let mut n = 2usize;
    while check_premise(n, eps).is_err() {
        n = (n - 1) * 2 + 1;
    }
    n
}

/// Number of Step-1 samples, `8/ε`.
pub fn step_one_samples(eps: DyadicEps) -> u64 {
    8 * eps.inv()
}

/// Exact query count of every nonadaptive run: `8/ε + Σ_i 2^{i+1} k_i²`.
pub fn nonadaptive_query_count(eps: DyadicEps) -> u64 {
    step_one_samples(eps)
        + LevelGeometry::levels(eps)
            .map(|g| (2u64 << g.level) * (g.k as u64).pow(2))
            .sum::<u64>()
}

/// The cap `64/ε² + 8/ε` on nonadaptive queries.
pub fn nonadaptive_query_cap(eps: DyadicEps) -> u64 {
    64 * eps.inv() * eps.inv() + 8 * eps.inv()
}

/// Analytic upper bound on the expected number of adaptive queries.
///
/// Per diamond subroutine: every lattice pixel, plus per sampling round one
/// query and a BFS that finds at most `x + 1` black pixels, each costing at
/// most four neighbour queries, with `E[x] = H(k²)`. Levels with a
/// degenerate lattice cost `k²` per square.
pub fn adaptive_expected_bound(eps: DyadicEps) -> f64 {
    let mut total = step_one_samples(eps) as f64;
    for g in LevelGeometry::levels(eps) {
        let k = g.k;
        let per_square = match diamond_decomposition(k) {
            Ok(deco) if lattice_pitch(k) >= 3 => {
                let rounds = (k * deco.m()).div_ceil(2) as f64;
                deco.lattice_len() as f64 + rounds * (1.0 + 4.0 * (harmonic((k * k) as u64) + 1.0))
            }
            _ => (k * k) as f64,
        };
        total += (2u64 << g.level) as f64 * per_square;
    }
    total
}

fn resolve_budget(config: &TesterConfig, eps: DyadicEps) -> Option<u64> {
    match (config.variant, config.budget) {
        (Variant::Nonadaptive, _) | (_, QueryBudget::Unlimited) => None,
        (Variant::Adaptive, QueryBudget::Cap(c)) => Some(c),
        (Variant::Adaptive, QueryBudget::Auto) => Some((8.0 * adaptive_expected_bound(eps)).ceil() as u64),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Decision {
    Accept,
    Reject,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Witness {
    pub level: u32,
    pub k: usize,
    /// Grid corner `(u, v)`; the square covers `u+1..=u+k × v+1..=v+k`.
    pub origin: PixelCoord,
    pub certificate: Certificate,
    /// A black Step-1 pixel lying outside the square.
    pub outside: PixelCoord,
}

impl Witness {
    pub fn square(&self) -> SquareRef {
        SquareRef {
            level: self.level,
            k: self.k,
            u: self.origin.x,
            v: self.origin.y,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LevelQueries {
    pub level: u32,
    pub k: usize,
    pub squares: u64,
    pub queries: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QueryReport {
    pub total: u64,
    pub step_one: u64,
    pub per_level: Vec<LevelQueries>,
    pub bfs: Vec<BfsRecord>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Verdict {
    pub decision: Decision,
    pub witness: Option<Witness>,
    pub queries_used: u64,
    pub budget_exhausted: bool,
    pub seed: u64,
    pub variant: Variant,
    /// Proximity parameter the tester actually ran with.
    pub eps: DyadicEps,
    /// Canvas side the tester actually ran on.
    pub side: usize,
    pub report: QueryReport,
}

impl Verdict {
    pub fn rejected(&self) -> bool {
        self.decision == Decision::Reject
    }

    pub fn query_report(&self) -> &QueryReport {
        &self.report
    }
}

/// Normalises the target, then runs the tester on the padded canvas.
pub fn run_tester(target: &dyn PixelSource, config: &TesterConfig) -> Result<Verdict, TesterError> {
    let inst = normalize(target.side(), config.eps)?;
    let mut oracle = inst.oracle(target, config.variant.oracle_mode());
    test_connectedness(&mut oracle, inst.eps_prime, config)
}

/// The top-level tester on an already normalised canvas.
///
/// `eps` is the parameter in force on this canvas; `config.eps` is only
/// recorded. `config.variant` must match the oracle's mode.
pub fn test_connectedness(
    oracle: &mut PixelOracle<'_>,
    eps: DyadicEps,
    config: &TesterConfig,
) -> Result<Verdict, TesterError> {
    let n = oracle.side();
    check_premise(n, eps)?;
    let levels: Vec<LevelGeometry> = LevelGeometry::levels(eps).collect();
    for g in &levels {
        g.check_normalized(n)?;
    }
    if oracle.mode() != config.variant.oracle_mode() {
        return Err(OracleError::PhaseViolation("oracle mode does not match the tester variant").into());
    }

    let mut step_rng = substream(config.seed, stream::STEP_ONE);
    let step_one: Vec<PixelCoord> = (0..step_one_samples(eps))
        .map(|_| {
            let x = step_rng.random_range(0..n);
            let y = step_rng.random_range(0..n);
            PixelCoord::new(x, y)
        })
        .collect();
    let mut square_rng = substream(config.seed, stream::SQUARES);
    let mut plan: Vec<SquareRef> = Vec::new();
    for g in &levels {
        for _ in 0..(2u64 << g.level) {
            plan.push(g.sample_square(n, &mut square_rng)?);
        }
    }

    let mut verdict = Verdict {
        decision: Decision::Accept,
        witness: None,
        queries_used: 0,
        budget_exhausted: false,
        seed: config.seed,
        variant: config.variant,
        eps,
        side: n,
        report: QueryReport::default(),
    };
    match config.variant {
        Variant::Nonadaptive => run_nonadaptive(oracle, &step_one, &plan, &mut verdict)?,
        Variant::Adaptive => {
            if oracle.budget().is_none() {
                oracle.set_budget(resolve_budget(config, eps));
            }
            match run_adaptive(oracle, &step_one, &plan, config, &mut verdict) {
                Ok(()) => {}
                Err(OracleError::BudgetExhausted(_)) => {
                    verdict.decision = Decision::Accept;
                    verdict.witness = None;
                    verdict.budget_exhausted = true;
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
    verdict.queries_used = oracle.count();
    verdict.report.total = oracle.count();
    Ok(verdict)
}

fn level_entry<'r>(report: &'r mut QueryReport, square: &SquareRef) -> &'r mut LevelQueries {
    if report.per_level.last().map(|l| l.level) != Some(square.level) {
        report.per_level.push(LevelQueries {
            level: square.level,
            k: square.k,
            squares: 0,
            queries: 0,
        });
    }
    report.per_level.last_mut().expect("just pushed")
}

fn first_outside(blacks: &[PixelCoord], square: &SquareRef) -> Option<PixelCoord> {
    blacks.iter().copied().find(|&p| !square.contains(p))
}

fn run_nonadaptive(
    oracle: &mut PixelOracle<'_>,
    step_one: &[PixelCoord],
    plan: &[SquareRef],
    verdict: &mut Verdict,
) -> Result<(), OracleError> {
    for &p in step_one {
        oracle.register(p)?;
    }
    for square in plan {
        for p in square.pixels() {
            oracle.register(p)?;
        }
    }
    oracle.seal()?;
    let answers = oracle.answer_registered()?;

    let (first, mut rest) = answers.split_at(step_one.len());
    let blacks: Vec<PixelCoord> = step_one.iter().zip(first).filter(|(_, &b)| b).map(|(&p, _)| p).collect();
    verdict.report.step_one = step_one.len() as u64;
    for square in plan {
        let (colors, tail) = rest.split_at(square.pixel_count());
        rest = tail;
        let entry = level_entry(&mut verdict.report, square);
        entry.squares += 1;
        entry.queries += colors.len() as u64;
        if verdict.witness.is_some() {
            continue;
        }
        if let SubVerdict::Fail(certificate) = evaluate_square(square, colors) {
            if let Some(outside) = first_outside(&blacks, square) {
                verdict.decision = Decision::Reject;
                verdict.witness = Some(Witness {
                    level: square.level,
                    k: square.k,
                    origin: PixelCoord::new(square.u, square.v),
                    certificate,
                    outside,
                });
            }
        }
    }
    Ok(())
}

fn run_adaptive(
    oracle: &mut PixelOracle<'_>,
    step_one: &[PixelCoord],
    plan: &[SquareRef],
    config: &TesterConfig,
    verdict: &mut Verdict,
) -> Result<(), OracleError> {
    let mut blacks = Vec::new();
    for &p in step_one {
        if oracle.query(p)? {
            blacks.push(p);
        }
        verdict.report.step_one += 1;
    }
    let opts = DiagonalOptions {
        early_reject: config.early_reject,
    };
    for (j, square) in plan.iter().enumerate() {
        let before = oracle.count();
        let mut rng = substream(config.seed, stream::SUBROUTINE_BASE + j as u64);
        let result = diagonal_square_test(oracle, square, &mut rng, opts);
        let entry = level_entry(&mut verdict.report, square);
        entry.squares += 1;
        entry.queries += oracle.count() - before;
        let outcome = result?;
        verdict.report.bfs.extend(outcome.bfs);
        if let SubVerdict::Fail(certificate) = outcome.verdict {
            if let Some(outside) = first_outside(&blacks, square) {
                verdict.decision = Decision::Reject;
                verdict.witness = Some(Witness {
                    level: square.level,
                    k: square.k,
                    origin: PixelCoord::new(square.u, square.v),
                    certificate,
                    outside,
                });
                return Ok(());
            }
        }
    }
    Ok(())
}

/// Why a certificate does not hold up under full knowledge.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CertificateError {
    #[error("accept verdicts carry no witness")]
    NoWitness,
    #[error("reject verdict without a witness")]
    MissingWitness,
    #[error("outside pixel {0} is white or inside the square")]
    BadOutside(PixelCoord),
    #[error("certificate pixel {0} is white or not inside the square")]
    BadPixel(PixelCoord),
    #[error("certificate pixels span more than one component")]
    Split,
    #[error("certified component reaches the square's boundary ring")]
    ReachesRing,
    #[error("certificate lists {listed} pixels but the component has {actual}")]
    Incomplete { listed: usize, actual: usize },
}

/// Re-checks a reject verdict against the full image (pixels beyond the
/// target's side count as white padding).
pub fn verify_certificate(target: &dyn PixelSource, verdict: &Verdict) -> Result<(), CertificateError> {
    let witness = match (&verdict.decision, &verdict.witness) {
        (Decision::Accept, _) => return Err(CertificateError::NoWitness),
        (Decision::Reject, None) => return Err(CertificateError::MissingWitness),
        (Decision::Reject, Some(w)) => w,
    };
    let ts = target.side();
    let color = |p: PixelCoord| p.x < ts && p.y < ts && target.is_black(p.x, p.y);
    let square = witness.square();
    if square.contains(witness.outside) || !color(witness.outside) {
        return Err(CertificateError::BadOutside(witness.outside));
    }
    let k = square.k;
    let block = Image::from_fn(k, |lx, ly| color(square.pixel(lx + 1, ly + 1)));
    let labels = connected_components(&block);
    let mut label = None;
    for &p in &witness.certificate.pixels {
        if !square.contains(p) {
            return Err(CertificateError::BadPixel(p));
        }
        let (lx, ly) = square.local(p);
        let l = labels
            .label(PixelCoord::new(lx - 1, ly - 1))
            .ok_or(CertificateError::BadPixel(p))?;
        if *label.get_or_insert(l) != l {
            return Err(CertificateError::Split);
        }
    }
    let l = label.ok_or(CertificateError::MissingWitness)? as usize;
    if labels.touches_border()[l] {
        return Err(CertificateError::ReachesRing);
    }
    if witness.certificate.kind == CertificateKind::Component && labels.sizes()[l] != witness.certificate.pixels.len() {
        return Err(CertificateError::Incomplete {
            listed: witness.certificate.pixels.len(),
            actual: labels.sizes()[l],
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::is_connected;

    fn eps(inv: u64) -> DyadicEps {
        DyadicEps::from_inverse(inv).unwrap()
    }

    #[test]
    fn premise_sides() {
        // n² ≥ 64/ε³: 512² = 64·16³ exactly, so 513 is the first 2^j + 1
        assert_eq!(premise_side(eps(16)), 513);
        assert_eq!(premise_side(eps(64)), 4097);
        assert_eq!(premise_side(eps(1024)), 262_145);
    }

    #[test]
    fn normalization_examples() {
        let a = normalize(9, eps(2)).unwrap();
        assert_eq!((a.padded_side, a.eps_prime.inv()), (9, 2));
        let b = normalize(10, eps(2)).unwrap();
        assert_eq!((b.padded_side, b.eps_prime.inv()), (17, 8));
        let c = normalize(1000, eps(16)).unwrap();
        // 1/16 · 10⁶ / 1025² ≈ 0.0595 rounds down to 1/32
        assert_eq!((c.padded_side, c.eps_prime.inv()), (1025, 32));
        assert_eq!(normalize(1025, eps(16)).unwrap().eps_prime.inv(), 16);
    }

    #[test]
    fn premise_boundary() {
        assert!(check_premise(512, eps(16)).is_ok());
        assert!(check_premise(511, eps(16)).is_err());
        assert!(check_premise(4096, eps(64)).is_ok());
        let err = run_tester(&Image::white(100), &TesterConfig::new(eps(16), Variant::Adaptive, 0)).unwrap_err();
        assert!(matches!(err, TesterError::PremiseViolated { .. }));
    }

    #[test]
    fn nonadaptive_count_matches_series() {
        // 128 + 2·63² + 4·31² + 8·15² + 16·7²
        assert_eq!(nonadaptive_query_count(eps(16)), 128 + 7938 + 3844 + 1800 + 784);
        assert!(nonadaptive_query_count(eps(16)) <= nonadaptive_query_cap(eps(16)));
        assert_eq!(nonadaptive_query_cap(eps(16)), 16512);
        let v = run_tester(&Image::white(513), &TesterConfig::new(eps(16), Variant::Nonadaptive, 3)).unwrap();
        assert_eq!(v.queries_used, nonadaptive_query_count(eps(16)));
        assert_eq!(v.report.per_level.iter().map(|l| l.queries).sum::<u64>() + v.report.step_one, v.queries_used);
    }

    #[test]
    fn nonadaptive_queries_ignore_the_image() {
        let white = Image::white(513);
        let noisy = Image::from_fn(513, |x, y| (x * 31 + y * 17) % 7 == 0);
        let cfg = TesterConfig::new(eps(16), Variant::Nonadaptive, 11);
        let inst = normalize(513, cfg.eps).unwrap();
        let mut o1 = inst.oracle(&white, OracleMode::Nonadaptive);
        let mut o2 = inst.oracle(&noisy, OracleMode::Nonadaptive);
        test_connectedness(&mut o1, inst.eps_prime, &cfg).unwrap();
        test_connectedness(&mut o2, inst.eps_prime, &cfg).unwrap();
        assert!(o1.log().map(|(p, _)| p).eq(o2.log().map(|(p, _)| p)));
    }

    #[test]
    fn connected_images_are_accepted() {
        let comb = Image::from_fn(513, |x, y| y == 0 || x % 4 == 0);
        assert!(is_connected(&comb));
        for img in [Image::white(513), Image::black(513), comb] {
            for variant in [Variant::Nonadaptive, Variant::Adaptive] {
                for seed in 0..5 {
                    let v = run_tester(&img, &TesterConfig::new(eps(16), variant, seed)).unwrap();
                    assert_eq!(v.decision, Decision::Accept);
                }
            }
        }
    }

    #[test]
    fn isolated_dots_are_rejected_with_sound_certificates() {
        let dots = Image::from_fn(513, |x, y| x % 4 == 2 && y % 4 == 2);
        for variant in [Variant::Nonadaptive, Variant::Adaptive] {
            let mut rejected = 0;
            for seed in 0..20 {
                let v = run_tester(&dots, &TesterConfig::new(eps(16), variant, seed)).unwrap();
                if v.rejected() {
                    rejected += 1;
                    verify_certificate(&dots, &v).unwrap();
                }
            }
            assert!(rejected >= 15, "{variant:?}: {rejected}/20");
        }
    }

    #[test]
    fn tampered_certificates_fail_verification() {
        let dots = Image::from_fn(513, |x, y| x % 4 == 2 && y % 4 == 2);
        let v = run_tester(&dots, &TesterConfig::new(eps(16), Variant::Nonadaptive, 1)).unwrap();
        assert!(v.rejected());
        let mut bad = v.clone();
        bad.witness.as_mut().unwrap().outside = PixelCoord::new(0, 0);
        assert!(matches!(verify_certificate(&dots, &bad), Err(CertificateError::BadOutside(_))));
        let mut bad = v.clone();
        let w = bad.witness.as_mut().unwrap();
        w.certificate.pixels = vec![w.square().pixel(1, 1)];
        assert!(verify_certificate(&dots, &bad).is_err());
    }

    #[test]
    fn budget_exhaustion_accepts() {
        let dots = Image::from_fn(513, |x, y| x % 4 == 2 && y % 4 == 2);
        let mut cfg = TesterConfig::new(eps(16), Variant::Adaptive, 1);
        cfg.budget = QueryBudget::Cap(200);
        let v = run_tester(&dots, &cfg).unwrap();
        assert_eq!(v.decision, Decision::Accept);
        assert!(v.budget_exhausted);
        assert_eq!(v.queries_used, 200);
    }

    #[test]
    fn runs_are_reproducible() {
        let img = Image::from_fn(513, |x, y| (x ^ y) % 5 == 0);
        for variant in [Variant::Nonadaptive, Variant::Adaptive] {
            let cfg = TesterConfig::new(eps(16), variant, 77);
            assert_eq!(run_tester(&img, &cfg).unwrap(), run_tester(&img, &cfg).unwrap());
        }
    }

    #[test]
    fn verdict_json_field_names() {
        let dots = Image::from_fn(513, |x, y| x % 4 == 2 && y % 4 == 2);
        let v = run_tester(&dots, &TesterConfig::new(eps(16), Variant::Nonadaptive, 1)).unwrap();
        let json = serde_json::to_value(&v).unwrap();
        for key in ["decision", "witness", "queriesUsed", "budgetExhausted", "seed"] {
            assert!(json.get(key).is_some(), "{key}");
        }
        assert_eq!(json["decision"], "reject");
        let w = &json["witness"];
        for key in ["level", "origin", "certificate", "outside"] {
            assert!(w.get(key).is_some(), "{key}");
        }
        let back: Verdict = serde_json::from_value(json).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn adaptive_bound_is_above_white_image_cost() {
        let v = run_tester(&Image::white(513), &TesterConfig::new(eps(16), Variant::Adaptive, 5)).unwrap();
        assert!((v.queries_used as f64) < adaptive_expected_bound(eps(16)));
    }
}
