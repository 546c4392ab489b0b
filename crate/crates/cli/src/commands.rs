use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use hullaudit_core::harness::{convex_combinations, make_synthetic, run_analysis, run_cv, SplitPlan};
use hullaudit_core::ingest::infer_schema;
use hullaudit_core::report::{to_json_line, to_json_pretty, CohortSummary, ExtrapolationReport};
use hullaudit_core::{load_table, RawTable, Schema, Status};
use serde::Serialize;

use crate::args::{AnalyzeArgs, CheckArgs, Cli, Command, CvArgs, Shared, SynthArgs};

pub enum CliError {
    /// Bad flags or configuration, detected before any work starts.
    Validation(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(err: anyhow::Error) -> Self {
        CliError::Runtime(err)
    }
}

fn invalid(msg: impl std::fmt::Display) -> CliError {
    CliError::Validation(msg.to_string())
}

pub fn run(cli: Cli) -> Result<u8, CliError> {
    let shared = match &cli.command {
        Command::Analyze(a) => &a.shared,
        Command::Cv(a) => &a.shared,
        Command::Check(a) => &a.shared,
        Command::Synth(a) => &a.shared,
    };
    validate_shared(shared)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = shared.jobs {
        pool = pool.num_threads(jobs);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Runtime(anyhow::anyhow!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Analyze(a) => analyze(a),
        Command::Cv(a) => cv(a),
        Command::Check(a) => check(a),
        Command::Synth(a) => synth(a),
    })
}

fn validate_shared(shared: &Shared) -> Result<(), CliError> {
    shared.solver_config().validate().map_err(invalid)?;
    if !(0.0..=1.0).contains(&shared.significance) {
        return Err(invalid(format!(
            "--significance must lie in [0, 1], got {}",
            shared.significance
        )));
    }
    if shared.jobs == Some(0) {
        return Err(invalid("--jobs must be at least 1"));
    }
    Ok(())
}

fn schema_for(shared: &Shared, data: &Path) -> Result<Schema, CliError> {
    match &shared.schema {
        Some(path) => Schema::from_path(path).map_err(invalid),
        None => {
            let inferred = infer_schema(data)
                .with_context(|| format!("inferring a schema from {}", data.display()))?;
            for w in &inferred.warnings {
                eprintln!("warning: {w}");
            }
            Ok(inferred.schema)
        }
    }
}

fn load(path: &Path, schema: &Schema) -> anyhow::Result<RawTable> {
    let table = load_table(path, schema).with_context(|| format!("loading {}", path.display()))?;
    if table.dropped_incomplete() > 0 {
        eprintln!(
            "note: dropped {} incomplete rows from {}",
            table.dropped_incomplete(),
            path.display()
        );
    }
    Ok(table)
}

fn out_dir(shared: &Shared) -> anyhow::Result<Option<&PathBuf>> {
    if let Some(dir) = &shared.out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(shared.out.as_ref())
}

fn write(path: PathBuf, text: &str) -> anyhow::Result<()> {
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_reports(dir: &Path, reports: &[ExtrapolationReport]) -> anyhow::Result<()> {
    let mut text = String::new();
    for r in reports {
        text.push_str(&to_json_line(r));
        text.push('\n');
    }
    write(dir.join("reports.jsonl"), &text)
}

fn write_summary(dir: &Path, summary: &CohortSummary) -> anyhow::Result<()> {
    write(dir.join("summary.json"), &(to_json_pretty(summary) + "\n"))?;
    write(dir.join("summary.txt"), &summary.to_table())
}

fn analyze(args: &AnalyzeArgs) -> Result<u8, CliError> {
    let s = &args.shared;
    let schema = schema_for(s, &args.train)?;
    let train = load(&args.train, &schema)?;
    let test = load(&args.test, &schema)?;
    let start = Instant::now();
    let analysis = run_analysis(&train, &test, &s.solver_config(), s.scaling, s.significance)
        .context("analysis failed")?;
    eprintln!(
        "classified {} queries against {} training rows in {:.1?}",
        test.row_count(),
        train.row_count(),
        start.elapsed()
    );
    if let Some(dir) = out_dir(s)? {
        write_reports(dir, &analysis.reports)?;
        write_summary(dir, &analysis.summary)?;
    }
    print!("{}", analysis.summary.to_table());
    Ok(0)
}

#[derive(Serialize)]
struct FoldSummary<'a> {
    fold: usize,
    test_rows: usize,
    summary: &'a CohortSummary,
}

#[derive(Serialize)]
struct CvSummary<'a> {
    k: usize,
    seed: u64,
    folds: Vec<FoldSummary<'a>>,
    pooled: &'a CohortSummary,
}

fn cv(args: &CvArgs) -> Result<u8, CliError> {
    let s = &args.shared;
    let plan = SplitPlan::kfold(args.k, args.seed);
    plan.validate().map_err(invalid)?;
    let schema = schema_for(s, &args.data)?;
    let table = load(&args.data, &schema)?;
    if table.row_count() < args.k {
        return Err(invalid(format!(
            "{} rows cannot be split into {} folds",
            table.row_count(),
            args.k
        )));
    }
    let start = Instant::now();
    let result = run_cv(&table, &plan, &s.solver_config(), s.scaling, s.significance)
        .context("cross-validation failed")?;
    eprintln!("{}-fold cross-validation finished in {:.1?}", args.k, start.elapsed());

    let mut text = String::new();
    for f in &result.folds {
        text.push_str(&format!("fold {} ({} test rows)\n", f.index, f.test_rows.len()));
        text.push_str(&f.analysis.summary.to_table());
        text.push('\n');
    }
    text.push_str("pooled\n");
    text.push_str(&result.pooled.to_table());

    if let Some(dir) = out_dir(s)? {
        let summary = CvSummary {
            k: args.k,
            seed: args.seed,
            folds: result
                .folds
                .iter()
                .map(|f| FoldSummary {
                    fold: f.index,
                    test_rows: f.test_rows.len(),
                    summary: &f.analysis.summary,
                })
                .collect(),
            pooled: &result.pooled,
        };
        write(dir.join("summary.json"), &(to_json_pretty(&summary) + "\n"))?;
        write(dir.join("summary.txt"), &text)?;
        if args.fold_reports {
            for f in &result.folds {
                let fold_dir = dir.join(format!("fold-{}", f.index));
                fs::create_dir_all(&fold_dir)
                    .with_context(|| format!("creating {}", fold_dir.display()))?;
                write_reports(&fold_dir, &f.analysis.reports)?;
            }
        }
    }
    print!("{text}");
    Ok(0)
}

fn check(args: &CheckArgs) -> Result<u8, CliError> {
    let s = &args.shared;
    let schema = schema_for(s, &args.train)?;
    let train = load(&args.train, &schema)?;
    let query = load(&args.query, &schema)?;
    if query.row_count() != 1 {
        return Err(invalid(format!(
            "{} must hold exactly one complete data row, found {}",
            args.query.display(),
            query.row_count()
        )));
    }
    let analysis = run_analysis(&train, &query, &s.solver_config(), s.scaling, s.significance)
        .context("check failed")?;
    let report = &analysis.reports[0];
    let text = to_json_pretty(report) + "\n";
    if let Some(dir) = out_dir(s)? {
        write(dir.join("report.json"), &text)?;
    }
    print!("{text}");
    Ok(match report.status {
        Status::Inside => 0,
        Status::Outside => 3,
        Status::Indeterminate => 4,
    })
}

fn synth(args: &SynthArgs) -> Result<u8, CliError> {
    let s = &args.shared;
    if args.n == 0 || args.d == 0 || args.queries == 0 {
        return Err(invalid("--n, --d and --queries must be at least 1"));
    }
    let start = Instant::now();
    let train = make_synthetic(args.n, args.d, args.distribution, args.seed)
        .context("generating training rows")?;
    let queries = if args.interior {
        convex_combinations(&train, args.queries, args.n.min(args.d + 1), args.seed + 1)
    } else {
        make_synthetic(args.queries, args.d, args.distribution, args.seed + 1)
    }
    .context("generating queries")?;
    eprintln!("generated {} x {} {} rows in {:.1?}", args.n, args.d, args.distribution, start.elapsed());

    let start = Instant::now();
    let analysis = run_analysis(&train, &queries, &s.solver_config(), s.scaling, s.significance)
        .context("analysis failed")?;
    eprintln!("classified {} queries in {:.1?}", args.queries, start.elapsed());
    if let Some(dir) = out_dir(s)? {
        write_reports(dir, &analysis.reports)?;
        write_summary(dir, &analysis.summary)?;
    }
    print!("{}", analysis.summary.to_table());
    Ok(0)
}
