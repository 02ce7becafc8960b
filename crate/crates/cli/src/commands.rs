//! Subcommands. Each returns the JSON document printed on stdout.

use std::io::IsTerminal;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use rankos::basis::{ScoreDenominator, TiePolicy};
use rankos::calibrate::{
    build_null, exact_null_with, monte_carlo_null_with, BuiltNull, CalibrationRequest, NullKind, TestConfig,
    BAYES_LIMIT_REPS, BAYES_LIMIT_TRUNCATION, DEFAULT_ENUMERATION_CAP,
};
use rankos::loflinear::{least_squares_fit, LinearModelBasis, RESIDUAL_CAVEAT};
use rankos::power::{
    are_report, pitman_demo, power_curve, Beta, CurveSettings, ErrorLaw, LocalAlternativeSpec, DEFAULT_TRUNCATION,
};
use rankos::smooth::{paired_smooth, plot_grid, Truncation, DEFAULT_PLOT_POINTS};
use rankos::stats::{variance_estimate, Method, RankStatistic};
use serde_json::{json, Value};

use crate::cache::{load_or_build, write_table, TableKey};
use crate::curves::{write_power, write_smooth};
use crate::dataset::read_dataset;
use crate::error::{CliError, CliResult};

pub const RESULT_SCHEMA: &str = "rankos-result v1";

fn parse_method(s: &str) -> Result<Method, String> {
    Method::from_id(s).ok_or_else(|| {
        let ids: Vec<_> = Method::ALL.iter().map(|m| m.id()).collect();
        format!("unknown method {s:?}; expected one of {}", ids.join(", "))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum CalibrationChoice {
    /// Exact below 11, Monte Carlo below 50, asymptotic from 50 on.
    Auto,
    Exact,
    MonteCarlo,
    Asymptotic,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum TableKind {
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Ties {
    Reject,
    Midrank,
}

impl From<Ties> for TiePolicy {
    fn from(t: Ties) -> Self {
        match t {
            Ties::Reject => TiePolicy::Reject,
            Ties::Midrank => TiePolicy::Midrank,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Scores {
    /// U = R/(n+1)
    NPlusOne,
    /// U = R/n
    SampleSize,
}

impl From<Scores> for ScoreDenominator {
    fn from(s: Scores) -> Self {
        match s {
            Scores::NPlusOne => ScoreDenominator::NPlusOne,
            Scores::SampleSize => ScoreDenominator::SampleSize,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum SmoothTruncation {
    Paired,
    Independent,
}

/// Returns `seed`, or a clock-derived one when interactive, or an error.
fn resolve_seed(seed: Option<u64>, what: &str) -> CliResult<u64> {
    if let Some(seed) = seed {
        return Ok(seed);
    }
    if std::io::stdin().is_terminal() && std::io::stdout().is_terminal() {
        let nanos =
            std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_nanos() as u64);
        eprintln!("rankos: no --seed given; using {nanos}");
        return Ok(nanos);
    }
    Err(CliError::SeedRequired(what.to_string()))
}

#[derive(Debug, Args)]
pub struct TestArgs {
    /// CSV with a header and a `y` column, optionally `x`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "os_rank", value_parser = parse_method)]
    pub method: Method,
    /// Order for neyman_fixed.
    #[arg(long)]
    pub order: Option<usize>,
    #[arg(long, value_enum, default_value_t = CalibrationChoice::Auto)]
    pub calibration: CalibrationChoice,
    /// Monte Carlo permutations.
    #[arg(long, default_value_t = 100_000)]
    pub reps: usize,
    /// Largest n enumerated exactly.
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
    pub cap: usize,
    #[arg(long, value_enum, default_value_t = Ties::Reject)]
    pub ties: Ties,
    #[arg(long, value_enum, default_value_t = Scores::NPlusOne)]
    pub scores: Scores,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Null model: constant, linear, polynomial:K, cosine:K, or a CSV of columns.
    #[arg(long, default_value = "constant")]
    pub basis: String,
    /// Directory of cached null tables.
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
}

fn calibration_request(args: &TestArgs, n: usize, seed: Option<u64>) -> CliResult<CalibrationRequest> {
    let needs = |req: CalibrationRequest| req.needs_seed(args.method);
    let what = "Monte Carlo or simulated calibration";
    let request = match args.calibration {
        CalibrationChoice::Auto => {
            let req = CalibrationRequest::default_for(n, args.method, None);
            if needs(req) {
                CalibrationRequest::default_for(n, args.method, Some(resolve_seed(seed, what)?))
            } else {
                req
            }
        }
        CalibrationChoice::Exact => CalibrationRequest::Exact { cap: args.cap },
        CalibrationChoice::MonteCarlo => {
            CalibrationRequest::MonteCarlo { reps: args.reps, seed: resolve_seed(seed, what)? }
        }
        CalibrationChoice::Asymptotic => {
            let seed = if args.method == Method::BayesRank { Some(resolve_seed(seed, what)?) } else { seed };
            CalibrationRequest::Asymptotic { seed }
        }
        CalibrationChoice::None => CalibrationRequest::None,
    };
    Ok(request)
}

/// Builds the null law, going through the table cache when one is given.
fn null_with_provenance(
    method: Method,
    order: Option<usize>,
    n: usize,
    scores: ScoreDenominator,
    request: CalibrationRequest,
    cache_dir: Option<&Path>,
) -> CliResult<(BuiltNull, Value)> {
    let base = json!({ "request": request, "scores": scores.id() });
    let with = |mut v: Value, extra: Value| {
        v.as_object_mut().unwrap().extend(extra.as_object().unwrap().clone());
        v
    };
    let table_key = |kind, reps, seed| -> CliResult<TableKey> {
        Ok(TableKey { statistic: RankStatistic::for_method(method, order)?, n, kind, reps, seed, scores })
    };
    match (request, cache_dir) {
        (CalibrationRequest::Exact { cap }, Some(dir)) if method != Method::OsRaw => {
            let key = table_key(NullKind::Exact, None, None)?;
            let (table, path, hit) = load_or_build(dir, key, || Ok(exact_null_with(n, key.statistic, scores, cap)?))?;
            let prov = with(base, json!({ "source": "enumeration", "table_file": path, "cache_hit": hit }));
            Ok((BuiltNull::Table(table), prov))
        }
        (CalibrationRequest::MonteCarlo { reps, seed }, Some(dir)) if method != Method::OsRaw => {
            let key = table_key(NullKind::MonteCarlo, Some(reps as u64), Some(seed))?;
            let (table, path, hit) =
                load_or_build(dir, key, || Ok(monte_carlo_null_with(n, key.statistic, scores, reps, seed)?))?;
            let prov = with(base, json!({ "source": "permutation_simulation", "table_file": path, "cache_hit": hit }));
            Ok((BuiltNull::Table(table), prov))
        }
        _ => {
            let built = build_null(method, order, n, scores, request)?;
            let source = match &built {
                BuiltNull::None => json!({ "source": "none" }),
                BuiltNull::Table(t) if t.kind() == NullKind::Exact => json!({ "source": "enumeration" }),
                BuiltNull::Table(_) => json!({ "source": "permutation_simulation" }),
                BuiltNull::Asymptotic(law) if method == Method::NeymanFixed => {
                    json!({ "source": "chi_squared", "df": order, "law": law })
                }
                BuiltNull::Asymptotic(law) => json!({ "source": "limit_series", "law": law }),
                BuiltNull::Empirical(_) => json!({
                    "source": "limit_simulation",
                    "reps": BAYES_LIMIT_REPS,
                    "truncation": BAYES_LIMIT_TRUNCATION,
                }),
            };
            Ok((built, with(base, source)))
        }
    }
}

pub fn cmd_test(args: &TestArgs, seed: Option<u64>) -> CliResult<Value> {
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(CliError::Usage(format!("--alpha must lie in (0, 1), got {}", args.alpha)));
    }
    let data = read_dataset(&args.input)?;
    let sample = &data.sample;
    let n = sample.n();
    let config = TestConfig {
        method: args.method,
        order: args.order,
        ties: args.ties.into(),
        scores: args.scores.into(),
        calibration: None,
        seed: None,
    };

    let basis = if args.basis.contains(['/', '.']) || Path::new(&args.basis).is_file() {
        let path = Path::new(&args.basis);
        let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
        LinearModelBasis::from_csv(file)?
    } else {
        LinearModelBasis::builtin(&args.basis, n)?
    };
    if basis.n() != n {
        return Err(CliError::Input(format!("basis has {} rows but the data have {n}", basis.n())));
    }

    let (outcome, model) = if args.basis == "constant" {
        (config.statistic(sample.y(), || variance_estimate(sample))?, Value::Null)
    } else {
        let fit = least_squares_fit(sample, &basis)?;
        if fit.is_perfect_fit() {
            return Err(rankos::Error::DegenerateResiduals.into());
        }
        let outcome = config.statistic(fit.residuals(), || Ok(fit.sigma_sq()))?;
        let model = json!({
            "basis": basis.names(),
            "p": basis.p(),
            "theta_hat": fit.theta_hat(),
            "residual_sigma_sq": fit.sigma_sq(),
        });
        (outcome, model)
    };

    // Data errors take precedence over a missing seed.
    let request = calibration_request(args, n, seed)?;
    let (null, provenance) =
        null_with_provenance(config.method, config.order, n, config.scores, request, args.cache_dir.as_deref())?;
    let mut outcome = null.apply(outcome)?;
    if !model.is_null() && !(basis.spans_constants_only() && config.method != Method::OsRaw) {
        outcome = outcome.with_note(RESIDUAL_CAVEAT);
    }
    let reject = outcome.p_value.map(|p| p <= args.alpha);

    let mut doc = json!({ "schema": RESULT_SCHEMA, "command": "test" });
    let obj = doc.as_object_mut().unwrap();
    obj.extend(serde_json::to_value(&outcome).unwrap().as_object().unwrap().clone());
    obj.insert("n".into(), json!(n));
    obj.insert("alpha".into(), json!(args.alpha));
    obj.insert("reject".into(), json!(reject));
    obj.insert("ties".into(), json!(TiePolicy::from(args.ties)));
    obj.insert("input".into(), serde_json::to_value(&data.input).unwrap());
    obj.insert("provenance".into(), provenance);
    obj.insert("model".into(), model);
    Ok(doc)
}

#[derive(Debug, Args)]
pub struct NullTableArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value = "os_rank", value_parser = parse_method)]
    pub method: Method,
    #[arg(long)]
    pub order: Option<usize>,
    #[arg(long, value_enum)]
    pub kind: TableKind,
    #[arg(long, default_value_t = 1_000_000)]
    pub reps: usize,
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
    pub cap: usize,
    #[arg(long, value_enum, default_value_t = Scores::NPlusOne)]
    pub scores: Scores,
    /// Report tail probabilities at these thresholds.
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Vec<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn cmd_null_table(args: &NullTableArgs, seed: Option<u64>) -> CliResult<Value> {
    let statistic = RankStatistic::for_method(args.method, args.order)?;
    let scores: ScoreDenominator = args.scores.into();
    let table = match args.kind {
        TableKind::Exact => exact_null_with(args.n, statistic, scores, args.cap)?,
        TableKind::MonteCarlo => {
            let seed = resolve_seed(seed, "Monte Carlo tables")?;
            monte_carlo_null_with(args.n, statistic, scores, args.reps, seed)?
        }
    };
    write_table(&table, &args.out)?;
    let tails: Vec<Value> = args
        .thresholds
        .iter()
        .map(|&t| json!({ "threshold": t, "tail_probability": table.tail_probability(t) }))
        .collect();
    Ok(json!({
        "schema": RESULT_SCHEMA,
        "command": "null-table",
        "statistic": statistic.id(),
        "n": args.n,
        "kind": table.kind().id(),
        "reps": table.reps(),
        "seed": table.seed(),
        "scores": scores.id(),
        "support_size": table.support().len(),
        "total": table.total(),
        "out": args.out,
        "tails": tails,
    }))
}

#[derive(Debug, Args)]
pub struct SmoothArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Penalty per term in the order criterion.
    #[arg(long = "a", default_value_t = 4.18)]
    pub a: f64,
    #[arg(long, default_value_t = DEFAULT_PLOT_POINTS)]
    pub points: usize,
    #[arg(long, value_enum, default_value_t = SmoothTruncation::Paired)]
    pub truncation: SmoothTruncation,
    #[arg(long, value_enum, default_value_t = Ties::Reject)]
    pub ties: Ties,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn cmd_smooth(args: &SmoothArgs) -> CliResult<Value> {
    let data = read_dataset(&args.input)?;
    let truncation = match args.truncation {
        SmoothTruncation::Paired => Truncation::Paired,
        SmoothTruncation::Independent => Truncation::Independent,
    };
    let smooth = paired_smooth(&data.sample, args.a, args.ties.into(), truncation)?;
    let rows = smooth.rows(&plot_grid(args.points)?);
    write_smooth(&args.out, &rows)?;
    Ok(json!({
        "schema": RESULT_SCHEMA,
        "command": "smooth",
        "n": data.sample.n(),
        "a": args.a,
        "m": smooth.raw.m,
        "m_rank": smooth.rank.m,
        "truncation": truncation,
        "raw_factor": smooth.raw.factor,
        "rank_factor": smooth.rank.factor,
        "centered": true,
        "points": rows.len(),
        "input": data.input,
        "out": args.out,
    }))
}

#[derive(Debug, Args)]
pub struct PowerArgs {
    /// normal[:SIGMA], uniform[:LO:HI], logistic, laplace, t:K
    #[arg(long, default_value = "normal")]
    pub law: String,
    /// C (for C cos(pi x)), cosine:C:K or linear:C
    #[arg(long, default_value = "1")]
    pub beta: String,
    #[arg(long, default_value = "os_rank", value_parser = parse_method)]
    pub method: Method,
    #[arg(long)]
    pub order: Option<usize>,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Signal multipliers.
    #[arg(long = "c", value_delimiter = ',', default_value = "0,1,2,3,4")]
    pub multipliers: Vec<f64>,
    /// Finite-sample replications per point.
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    /// Replications of the limiting experiment per point.
    #[arg(long, default_value_t = 10_000)]
    pub limit_reps: usize,
    #[arg(long, default_value_t = DEFAULT_TRUNCATION)]
    pub truncation: usize,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn cmd_power(args: &PowerArgs, seed: Option<u64>) -> CliResult<Value> {
    let seed = resolve_seed(seed, "power simulation")?;
    let law = ErrorLaw::parse(&args.law)?;
    let spec = LocalAlternativeSpec::new(Beta::parse(&args.beta)?, law)?;
    let config = TestConfig { order: args.order, seed: Some(seed), ..TestConfig::new(args.method) };
    let settings = CurveSettings {
        n: args.n,
        alpha: args.alpha,
        reps: args.reps,
        limit_reps: args.limit_reps,
        truncation: args.truncation,
        seed,
    };
    let points = power_curve(&spec, &args.multipliers, &config, &settings)?;
    write_power(&args.out, &points)?;
    Ok(json!({
        "schema": RESULT_SCHEMA,
        "command": "power",
        "law": law,
        "beta": spec.beta,
        "method": args.method,
        "n": args.n,
        "alpha": args.alpha,
        "reps": args.reps,
        "limit_reps": args.limit_reps,
        "truncation": args.truncation,
        "seed": seed,
        "calibration": config.request_for(args.n),
        "points": points,
        "out": args.out,
    }))
}

#[derive(Debug, Args)]
pub struct AreArgs {
    /// Law name and parameters, e.g. `normal`, `t 5`, `uniform 0 1`.
    #[arg(required = true, num_args = 1..)]
    pub law: Vec<String>,
}

pub fn cmd_are(args: &AreArgs) -> CliResult<Value> {
    let law = ErrorLaw::parse(&args.law.join(":"))?;
    let report = are_report(&law)?;
    let mut doc = json!({ "schema": RESULT_SCHEMA, "command": "are", "name": law.name() });
    let obj = doc.as_object_mut().unwrap();
    obj.extend(serde_json::to_value(report).unwrap().as_object().unwrap().clone());
    obj.insert("closed_form_gap".into(), json!((report.are - report.are_closed_form).abs()));
    obj.insert("rank_more_efficient".into(), json!(report.are > 1.0));
    Ok(doc)
}

#[derive(Debug, Args)]
pub struct PitmanArgs {
    #[arg(long, default_value = "normal")]
    pub law: String,
    #[arg(long, default_value = "4")]
    pub beta: String,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 2000)]
    pub reps: usize,
}

pub fn cmd_pitman(args: &PitmanArgs, seed: Option<u64>) -> CliResult<Value> {
    let seed = resolve_seed(seed, "power simulation")?;
    let spec = LocalAlternativeSpec::new(Beta::parse(&args.beta)?, ErrorLaw::parse(&args.law)?)?;
    let demo = pitman_demo(&spec, args.n, args.alpha, args.reps, seed)?;
    let mut doc = json!({ "schema": RESULT_SCHEMA, "command": "pitman", "beta": spec.beta, "alpha": args.alpha });
    doc.as_object_mut().unwrap().extend(serde_json::to_value(demo).unwrap().as_object().unwrap().clone());
    Ok(doc)
}
