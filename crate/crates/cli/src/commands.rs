use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context};
use serde::Serialize;

use imgconn::cost::{self, structural_audit, BruteForceCost, CostProvider, DotCost};
use imgconn::harness::{run_outcomes, summarize, sweep as run_sweep, Parallelism, SweepRow, TrialOutcome, TrialSpec};
use imgconn::image::is_connected;
use imgconn::lab::{
    classify_windows, critical_query_count, farness_audit, gen_connected, gen_dot_far, make_hard_params,
    query_constant, revealing_probability_exact, revealing_probability_mc, sample_hard, ConnectedFamily,
    McEstimate, ProceduralFamily, QueryStrategy, StrategyKind, WindowStats,
};
use imgconn::pbm::{self, PbmFormat};
use imgconn::testers::{premise_side, QueryBudget, TesterConfig, TesterError, Variant};
use imgconn::{DyadicEps, Image, PixelCoord, PixelSource};

use crate::output::{invariant, sidecar_path, sink, write_json, Failure, Report};
use crate::{
    AuditArgs, EpsArg, GenArgs, GenCommon, GenKind, LowerboundArgs, OracleArgs, ProviderArg, RunArgs, Source,
    SweepArgs, TestArgs, VariantArg,
};

fn parse_eps(s: &str, normalize: bool) -> Result<DyadicEps, Failure> {
    let parsed = if normalize {
        DyadicEps::parse_normalizing(s)
    } else {
        s.parse()
    };
    parsed.with_context(|| format!("invalid --eps `{s}`")).map_err(Failure::Input)
}

fn eps_of(arg: &EpsArg) -> Result<DyadicEps, Failure> {
    parse_eps(&arg.eps, arg.normalize)
}

fn read_image(path: &Path) -> Result<Image, Failure> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(pbm::read(BufReader::new(file)).with_context(|| format!("cannot read {}", path.display()))?)
}

fn write_image(path: &Path, img: &Image, plain: bool) -> Result<(), Failure> {
    let format = if plain { PbmFormat::Plain } else { PbmFormat::Raw };
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    pbm::write(std::io::BufWriter::new(file), img, format)?;
    Ok(())
}

/// Premise and parameter problems are the caller's; anything else means
/// the tester broke one of its own guarantees.
fn tester_failure(e: TesterError) -> Failure {
    match e {
        TesterError::PremiseViolated { .. } | TesterError::EpsUnderflow { .. } => Failure::Input(e.into()),
        other => Failure::Invariant(other.into()),
    }
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct GenBody<T: Serialize> {
    generator: &'static str,
    image: PathBuf,
    side: usize,
    seed: u64,
    #[serde(flatten)]
    details: T,
}

pub fn gen(args: GenArgs) -> Result<(), Failure> {
    match args.kind {
        GenKind::Connected { family, n, common } => {
            if n == 0 {
                return Err(Failure::Input(anyhow!("--n must be positive")));
            }
            let img = gen_connected(n, family, common.seed);
            if !is_connected(&img) {
                return Err(invariant(format!("{family} generator produced a disconnected image")));
            }
            #[derive(Serialize)]
            #[serde(rename_all = "camelCase")]
            struct D {
                family: ConnectedFamily,
                black_pixels: usize,
                connected: bool,
            }
            let details = D {
                family,
                black_pixels: img.black_count(),
                connected: true,
            };
            emit_generated("connected", &img, &common, details)
        }
        GenKind::Dots { n, eps, common } => {
            let eps = eps_of(&eps)?;
            let far = gen_dot_far(n, eps, common.seed)?;
            if !far.certified_far {
                return Err(invariant("dot image failed its own farness certificate"));
            }
            #[derive(Serialize)]
            #[serde(rename_all = "camelCase")]
            struct D {
                eps: DyadicEps,
                dot_count: usize,
                component_count: usize,
                certified_far: bool,
            }
            let details = D {
                eps,
                dot_count: far.dots.len(),
                component_count: far.component_count,
                certified_far: far.certified_far,
            };
            emit_generated("dots", &far.image, &common, details)
        }
        GenKind::Hard { n, eps, common } => {
            let eps = eps_of(&eps)?;
            let params = make_hard_params(n, eps)?;
            let inst = sample_hard(&params, common.seed);
            #[derive(Serialize)]
            #[serde(rename_all = "camelCase")]
            struct D<'a> {
                instance: &'a imgconn::lab::HardInstance,
                levels: Vec<imgconn::lab::LevelShape>,
                black_regions: usize,
                farness: imgconn::lab::FarnessAudit,
            }
            let details = D {
                instance: &inst,
                levels: params.levels().map(|l| params.shape(l)).collect(),
                black_regions: inst.black_regions(),
                farness: inst.farness(),
            };
            emit_generated("hard", &inst.image, &common, details)
        }
    }
}

fn emit_generated<T: Serialize>(generator: &'static str, img: &Image, common: &GenCommon, details: T) -> Result<(), Failure> {
    write_image(&common.out, img, common.plain)?;
    let body = GenBody {
        generator,
        image: common.out.clone(),
        side: img.side(),
        seed: common.seed,
        details,
    };
    write_json(Some(&sidecar_path(&common.out)), &Report::new("gen", body))
}

fn load_source(source: &Source) -> Result<(Box<dyn PixelSource>, String), Failure> {
    match (&source.image, source.procedural, source.n) {
        (Some(path), None, _) => Ok((Box::new(read_image(path)?), path.display().to_string())),
        (None, Some(family), Some(n)) => {
            let img = family.instance(n, source.image_seed);
            let label = serde_json::to_string(&img)?;
            Ok((Box::new(img), label))
        }
        _ => Err(Failure::Input(anyhow!("give either --image or --procedural with --n"))),
    }
}

fn config_of(run: &RunArgs, eps: DyadicEps) -> Result<TesterConfig, Failure> {
    let variant = match run.variant {
        VariantArg::Nonadaptive => Variant::Nonadaptive,
        VariantArg::Adaptive => Variant::Adaptive,
    };
    let budget = match run.budget.as_str() {
        "auto" => QueryBudget::Auto,
        "unlimited" => QueryBudget::Unlimited,
        s => QueryBudget::Cap(s.parse().with_context(|| format!("invalid --budget `{s}`"))?),
    };
    if run.trials == 0 {
        return Err(Failure::Input(anyhow!("--trials must be at least 1")));
    }
    Ok(TesterConfig {
        budget,
        ..TesterConfig::new(eps, variant, run.seed)
    })
}

fn parallelism(run: &RunArgs) -> Parallelism {
    if run.sequential {
        Parallelism::Sequential
    } else {
        Parallelism::Parallel
    }
}

pub fn test(args: TestArgs) -> Result<(), Failure> {
    let eps = eps_of(&args.eps)?;
    let (target, label) = load_source(&args.source)?;
    let config = config_of(&args.run, eps)?;
    let spec = TrialSpec {
        config,
        trials: args.run.trials,
        verify_certificates: !args.no_verify,
        parallelism: parallelism(&args.run),
    };
    let start = Instant::now();
    let outcomes = run_outcomes(&target, &spec).map_err(tester_failure)?;
    let summary = summarize(target.side(), &spec, &outcomes).map_err(tester_failure)?;
    let elapsed = start.elapsed().as_secs_f64() * 1e3;

    #[derive(Serialize)]
    #[serde(rename_all = "camelCase")]
    struct Body<'a> {
        source: String,
        side: usize,
        budget: QueryBudget,
        summary: &'a imgconn::harness::TrialSummary,
        #[serde(skip_serializing_if = "Option::is_none")]
        per_trial: Option<&'a [TrialOutcome]>,
    }
    let body = Body {
        source: label,
        side: target.side(),
        budget: config.budget,
        summary: &summary,
        per_trial: args.per_trial.then_some(&outcomes[..]),
    };
    write_json(args.out.as_deref(), &Report::new("test", body).timed(elapsed))?;
    if !summary.all_certificates_sound() {
        return Err(invariant(format!(
            "{} of {} rejection certificates did not verify",
            summary.certificates_checked - summary.certificates_sound,
            summary.certificates_checked
        )));
    }
    Ok(())
}

#[derive(Clone, Copy)]
enum SweepFamily {
    Procedural(ProceduralFamily),
    Connected(ConnectedFamily),
    DotFar,
}

fn parse_sweep_family(s: &str) -> Result<SweepFamily, Failure> {
    if s == "dot-far" {
        return Ok(SweepFamily::DotFar);
    }
    if let Ok(f) = s.parse() {
        return Ok(SweepFamily::Procedural(f));
    }
    s.parse()
        .map(SweepFamily::Connected)
        .map_err(|_| Failure::Input(anyhow!("unknown sweep family `{s}`")))
}

pub fn sweep(args: SweepArgs) -> Result<(), Failure> {
    let eps_list: Vec<DyadicEps> = args
        .eps_list
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_eps(s, false))
        .collect::<Result<_, _>>()?;
    let family = parse_sweep_family(&args.family)?;
    let config = config_of(&args.run, DyadicEps::from_inverse(2).expect("1/2 is dyadic"))?;
    let seed = args.image_seed;
    let rows = run_sweep(
        &eps_list,
        config.variant,
        args.run.trials,
        args.run.seed,
        parallelism(&args.run),
        |eps| -> Result<Box<dyn PixelSource>, Failure> {
            let n = args.n.unwrap_or_else(|| premise_side(eps));
            Ok(match family {
                SweepFamily::Procedural(f) => Box::new(f.instance(n, seed)),
                SweepFamily::Connected(f) => Box::new(gen_connected(n, f, seed)),
                SweepFamily::DotFar => Box::new(gen_dot_far(n, eps, seed)?.image),
            })
        },
    )?;
    let mut out = csv::Writer::from_writer(sink(args.out.as_deref())?);
    out.write_record(SweepRow::HEADER)?;
    for row in &rows {
        out.write_record(row.record())?;
    }
    out.flush()?;
    Ok(())
}

pub fn audit(args: AuditArgs) -> Result<(), Failure> {
    let eps = eps_of(&args.eps)?;
    let img = read_image(&args.image)?;
    let provider: &dyn CostProvider = match args.provider {
        ProviderArg::Dots => &DotCost,
        ProviderArg::Brute => &BruteForceCost,
    };
    let structural = structural_audit(&img, eps, provider).context("structural audit")?;
    let farness = farness_audit(&img, eps, img.side());

    #[derive(Serialize)]
    #[serde(rename_all = "camelCase")]
    struct Body {
        image: PathBuf,
        structural: cost::AuditReport,
        farness: imgconn::lab::FarnessAudit,
    }
    let body = Body {
        image: args.image,
        structural,
        farness,
    };
    write_json(args.out.as_deref(), &Report::new("audit", body))
}

pub fn lowerbound(args: LowerboundArgs) -> Result<(), Failure> {
    let eps = parse_eps(&args.eps, false)?;
    let params = make_hard_params(args.n, eps)?;
    let (strategy, ordering) = match &args.queries {
        Some(path) => {
            let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
            let pixels: Vec<PixelCoord> = serde_json::from_reader(BufReader::new(file))
                .with_context(|| format!("{} is not a JSON array of pixels", path.display()))?;
            ("file".to_string(), pixels)
        }
        None => {
            let kind: StrategyKind = args.strategy.parse()?;
            (kind.name().to_string(), kind.ordering(&params, args.seed))
        }
    };
    let take = if args.queries.is_some() { ordering.len() } else { args.q };
    let queries = QueryStrategy::prefix(&ordering, take);
    queries.check_bounds(&params)?;

    let pr_exact = revealing_probability_exact(&queries, &params);
    let monte_carlo = (args.mc_trials > 0).then(|| revealing_probability_mc(&queries, &params, args.mc_trials, args.seed));
    let stats = classify_windows(&queries, &params);
    let critical_q = if args.queries.is_none() {
        critical_query_count(&ordering, &params, 1.0 / 3.0)
    } else {
        None
    };

    #[derive(Serialize)]
    #[serde(rename_all = "camelCase")]
    struct Body {
        params: imgconn::lab::HardParams,
        strategy: String,
        seed: u64,
        q: usize,
        query_constant: f64,
        pr_exact: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        monte_carlo: Option<McEstimate>,
        window_stats: WindowStats,
        checks_passed: bool,
        /// Smallest prefix of the ordering with `Pr[E] ≥ 1/3`.
        critical_q: Option<usize>,
        critical_constant: Option<f64>,
    }
    let checks_passed = stats.checks.all();
    let body = Body {
        params,
        strategy,
        seed: args.seed,
        q: queries.len(),
        query_constant: query_constant(queries.len(), &params),
        pr_exact,
        monte_carlo,
        window_stats: stats,
        checks_passed,
        critical_q,
        critical_constant: critical_q.map(|q| query_constant(q, &params)),
    };
    write_json(args.out.as_deref(), &Report::new("lowerbound", body))?;
    if !checks_passed {
        return Err(invariant("a covered-cell inequality failed"));
    }
    Ok(())
}

pub fn oracle(args: OracleArgs) -> Result<(), Failure> {
    let img = read_image(&args.image)?;
    let (target, distance) = if args.border {
        ("borderConnected", cost::exact_dist_border_connected(&img)?)
    } else {
        ("connected", cost::exact_dist_connected(&img)?)
    };

    #[derive(Serialize)]
    #[serde(rename_all = "camelCase")]
    struct Body {
        image: PathBuf,
        side: usize,
        target: &'static str,
        distance: u32,
    }
    let body = Body {
        image: args.image,
        side: img.side(),
        target,
        distance,
    };
    write_json(None, &Report::new("oracle", body))
}
