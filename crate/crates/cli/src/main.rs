//! Command-line surface for the image-text plagiarism detector.
//!
//! Three subcommands: `index` extracts a corpus of images and persists the
//! similarity index, `check` scores a suspicious image against that index,
//! and `selftest` runs the built-in oracle suite. Exit codes are part of the
//! contract: 0 success, 1 usage or input problems, 2 OCR/embedding provider
//! failures (any partially built cache is kept), 3 options mismatch between
//! a check and the index it targets.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use imgplag_core::embed::Embedder;
use imgplag_core::index::{build_index, options_fingerprint, PlagiarismIndex};
use imgplag_core::ingest::{extract_corpus, extract_query, scan_corpus};
use imgplag_core::ner::Gazetteer;
use imgplag_core::preprocess::{NerMode, PreprocessContext};
use imgplag_core::report::{build_report, render, AggregationMode, OutputFormat, ReportRequest};
use imgplag_core::selftest::{run_selftest, SelftestOptions};
use imgplag_core::similarity::AlgorithmId;
use imgplag_core::wordnet::Lexicon;
use imgplag_core::{Error, Result};

mod settings;
use settings::Layered;

#[derive(Parser)]
#[command(
    name = "imgplag",
    version,
    about = "Detect plagiarism in the textual content of images",
    after_help = "Credentials are read from the environment only: the vision key from \
                  VISION_API_KEY (or the variable named by --ocr-key-env) and the \
                  embedding bearer token from EMBED_API_KEY. Every flag below can also \
                  be set in a key=value config file (--config) or as IMGPLAG_* \
                  environment variables; flags win over the file, the file over the \
                  environment."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract every image in a corpus directory and build the index.
    Index(IndexArgs),
    /// Score a suspicious image against an existing index.
    Check(CheckArgs),
    /// Run the oracle and invariant suite; exits non-zero on any failure.
    Selftest(SelftestArgs),
}

/// Keys shared by `index` and `check`; every one of these can also come from
/// the config file or an `IMGPLAG_*` variable.
#[derive(Args, Debug, Default)]
struct ConfigFlags {
    /// Flat key=value settings file.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// OCR backend: sidecar or http_vision.
    #[arg(long, value_name = "BACKEND")]
    ocr: Option<String>,
    /// Vision endpoint URL (http_vision only).
    #[arg(long, value_name = "URL")]
    ocr_endpoint: Option<String>,
    /// Name of the environment variable holding the vision key.
    #[arg(long, value_name = "NAME")]
    ocr_key_env: Option<String>,
    /// Monthly backend-call budget; omitted means unlimited.
    #[arg(long, value_name = "N")]
    ocr_quota: Option<u64>,
    /// Concurrent OCR requests.
    #[arg(long, value_name = "N")]
    ocr_workers: Option<usize>,
    /// Embedding provider: fallback or http.
    #[arg(long, value_name = "PROVIDER")]
    embed: Option<String>,
    /// Embedding endpoint URL (http provider only).
    #[arg(long, value_name = "URL")]
    embed_endpoint: Option<String>,
    /// Fallback embedding dimension (>= 8).
    #[arg(long, value_name = "N")]
    embed_dim: Option<usize>,
    /// Fallback embedding seed.
    #[arg(long, value_name = "N")]
    embed_seed: Option<u64>,
    /// Taxonomy file for the wordnet algorithm (default: embedded lexicon).
    #[arg(long, value_name = "FILE")]
    lexicon: Option<PathBuf>,
    /// Gazetteer TSV (LABEL<TAB>Name per line) for entity tagging.
    #[arg(long, value_name = "FILE")]
    gazetteer: Option<PathBuf>,
    /// LSA truncation rank (default: min(50, docs - 1, terms)).
    #[arg(long, value_name = "K")]
    lsa_rank: Option<usize>,
    /// Wordnet measure: wu-palmer or path.
    #[arg(long, value_name = "MEASURE")]
    measure: Option<String>,
    /// Aggregation: pairwise or pooled.
    #[arg(long, value_name = "MODE")]
    mode: Option<String>,
    /// Output format: table, csv or json.
    #[arg(long, value_name = "FORMAT")]
    format: Option<String>,
}

#[derive(Args)]
struct IndexArgs {
    /// Directory of corpus images (jpg/jpeg/png/bmp; non-recursive).
    #[arg(long, value_name = "DIR")]
    corpus: PathBuf,
    /// Output directory for index.json, ocr_cache.json and ocr_quota.json.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    #[command(flatten)]
    flags: ConfigFlags,
}

#[derive(Args)]
struct CheckArgs {
    /// Index directory (or the index.json itself).
    #[arg(long, value_name = "DIR")]
    index: PathBuf,
    /// Suspicious image to score.
    #[arg(long, value_name = "FILE")]
    input: PathBuf,
    /// Comma-separated algorithms (default: all six).
    #[arg(long, value_name = "LIST")]
    algorithms: Option<String>,
    /// Entity handling: include, exclude or both.
    #[arg(long, value_name = "AXIS", default_value = "both")]
    ner: String,
    /// Also write report.txt, report.csv and report.json into this directory.
    #[arg(long, value_name = "DIR")]
    report_dir: Option<PathBuf>,
    #[command(flatten)]
    flags: ConfigFlags,
}

#[derive(Args)]
struct SelftestArgs {
    /// Run only checks whose name contains this substring.
    #[arg(long, value_name = "NAME")]
    only: Option<String>,
    /// Corrupt the SVD spectrum first, to demonstrate the oracle detects it.
    #[arg(long, hide = true)]
    perturb_svd: bool,
}

/// Folds the typed clap flags into a settings layer so flags, file and env
/// all validate through the same code path.
fn layer_from_flags(flags: &ConfigFlags) -> Result<Layered> {
    let mut layer = Layered::default();
    for (key, value) in [
        ("ocr", &flags.ocr),
        ("ocr-endpoint", &flags.ocr_endpoint),
        ("ocr-key-env", &flags.ocr_key_env),
        ("embed", &flags.embed),
        ("embed-endpoint", &flags.embed_endpoint),
        ("measure", &flags.measure),
        ("mode", &flags.mode),
        ("format", &flags.format),
    ] {
        if let Some(value) = value {
            layer.set(key, value, &format!("flag --{key}"))?;
        }
    }
    layer.ocr_quota = flags.ocr_quota;
    layer.ocr_workers = flags.ocr_workers;
    layer.embed_dim = flags.embed_dim;
    layer.embed_seed = flags.embed_seed;
    layer.lexicon = flags.lexicon.clone();
    layer.gazetteer = flags.gazetteer.clone();
    layer.lsa_rank = flags.lsa_rank;
    Ok(layer)
}

fn resolve(flags: &ConfigFlags) -> Result<Layered> {
    let env = Layered::from_env()?;
    let file = match &flags.config {
        Some(path) => Layered::from_file(path)?,
        None => Layered::default(),
    };
    Ok(layer_from_flags(flags)?.over(file.over(env)))
}

fn preprocess_context(gazetteer: Option<&Path>) -> Result<PreprocessContext> {
    Ok(match gazetteer {
        Some(path) => PreprocessContext::with_gazetteer(Gazetteer::load(path)?),
        None => PreprocessContext::embedded(),
    })
}

fn run_index(args: &IndexArgs) -> Result<()> {
    let layered = resolve(&args.flags)?;
    let ocr = layered.ocr_config();
    let ctx = preprocess_context(layered.gazetteer.as_deref())?;
    let config = imgplag_core::index::IndexConfig {
        lsa_rank: layered.lsa_rank,
        embed: layered.embed_provider()?,
        measure: layered.measure.unwrap_or_default(),
        ..Default::default()
    };

    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let scan = scan_corpus(&args.corpus)?;
    for note in &scan.skipped {
        eprintln!("warning: {note}");
    }
    let texts = extract_corpus(
        &scan.docs,
        &ocr,
        &args.out.join("ocr_cache.json"),
        &args.out.join("ocr_quota.json"),
    )?;
    let index = build_index(&texts, &config, &ctx, ocr.kind.label())?;
    let path = args.out.join("index.json");
    index.save(&path)?;
    println!(
        "indexed {} documents ({} include-side terms, lsa rank {}) -> {}",
        index.side(NerMode::Include).n_docs(),
        index.side(NerMode::Include).vocabulary.len(),
        index.side(NerMode::Include).latent.k,
        path.display()
    );
    Ok(())
}

fn parse_algorithms(raw: Option<&str>) -> Result<Vec<AlgorithmId>> {
    match raw {
        None => Ok(AlgorithmId::ALL.to_vec()),
        Some(list) => {
            let mut algorithms = Vec::new();
            for name in list.split(',') {
                let name = name.trim();
                if name.is_empty() {
                    continue;
                }
                let algorithm: AlgorithmId = name.parse()?;
                if !algorithms.contains(&algorithm) {
                    algorithms.push(algorithm);
                }
            }
            if algorithms.is_empty() {
                return Err(Error::InvalidConfig(
                    "--algorithms named no algorithms".to_string(),
                ));
            }
            Ok(algorithms)
        }
    }
}

fn parse_ner(axis: &str) -> Result<Vec<NerMode>> {
    match axis.to_lowercase().as_str() {
        "include" => Ok(vec![NerMode::Include]),
        "exclude" => Ok(vec![NerMode::Exclude]),
        "both" => Ok(vec![NerMode::Include, NerMode::Exclude]),
        other => Err(Error::InvalidConfig(format!(
            "unknown ner axis {other:?} (expected include, exclude or both)"
        ))),
    }
}

fn run_check(args: &CheckArgs) -> Result<()> {
    let layered = resolve(&args.flags)?;
    let index_file = if args.index.is_file() {
        args.index.clone()
    } else {
        args.index.join("index.json")
    };
    let index = PlagiarismIndex::load(&index_file)?;

    // Artifact-shaping overrides must reproduce the stored fingerprint;
    // anything else would silently score against vectors built under
    // different preprocessing than the query gets.
    let mut effective_config = index.config.clone();
    let mut effective_resources = index.resources.clone();
    if layered.lsa_rank.is_some() {
        effective_config.lsa_rank = layered.lsa_rank;
    }
    if let Some(path) = &layered.gazetteer {
        effective_resources.gazetteer = Gazetteer::load(path)?.canonical_lines();
    }
    let fingerprint = options_fingerprint(&effective_config, &effective_resources);
    if fingerprint != index.fingerprint {
        return Err(Error::OptionsMismatch(format!(
            "requested options fingerprint {} differs from the index's {}; \
             rebuild the index or drop the overriding flags",
            &fingerprint[..12],
            &index.fingerprint[..12]
        )));
    }

    // Scoring-time knobs may override what the index stored.
    let provider = if layered.any_embed_key() {
        layered.embed_provider()?
    } else {
        index.config.embed.clone()
    };
    let embedder = Embedder::new(provider);
    let measure = layered.measure.unwrap_or(index.config.measure);
    let lexicon = match &layered.lexicon {
        Some(path) => Lexicon::load(path)?,
        None => Lexicon::embedded(),
    };

    let ocr = layered.ocr_config();
    let quota_path = index_file
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join("ocr_quota.json");
    let query = extract_query(&args.input, &ocr, &quota_path)?;

    let request = ReportRequest {
        algorithms: parse_algorithms(args.algorithms.as_deref())?,
        ner_modes: parse_ner(&args.ner)?,
        mode: layered.mode.unwrap_or(AggregationMode::Pairwise),
        measure,
    };
    let report = build_report(&index, &query, &lexicon, &embedder, &request)?;
    print!(
        "{}",
        render(&report, layered.format.unwrap_or(OutputFormat::Table))
    );

    if let Some(dir) = &args.report_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, format) in [
            ("report.txt", OutputFormat::Table),
            ("report.csv", OutputFormat::Csv),
            ("report.json", OutputFormat::Json),
        ] {
            let path = dir.join(name);
            std::fs::write(&path, render(&report, format)).map_err(|e| Error::io(&path, e))?;
        }
    }
    Ok(())
}

/// Prints one PASS/FAIL line per check plus a summary; `Ok(false)` means at
/// least one check failed (the lines themselves carry the details).
fn run_selftest_cmd(args: &SelftestArgs) -> Result<bool> {
    let outcomes = run_selftest(&SelftestOptions {
        only: args.only.clone(),
        perturb_svd: args.perturb_svd,
    });
    if outcomes.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "no checks match {:?}",
            args.only.as_deref().unwrap_or("")
        )));
    }
    let mut failed = 0usize;
    for outcome in &outcomes {
        let status = if outcome.passed { "PASS" } else { "FAIL" };
        println!(
            "{status} {} ({} ms) - {}",
            outcome.name, outcome.millis, outcome.detail
        );
        if !outcome.passed {
            failed += 1;
        }
    }
    println!(
        "{}/{} checks passed",
        outcomes.len() - failed,
        outcomes.len()
    );
    Ok(failed == 0)
}

/// Stable exit-code contract (also documented in the README).
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::OptionsMismatch(_) => 3,
        Error::OcrHttp(_)
        | Error::MissingSidecar { .. }
        | Error::QuotaExceeded { .. }
        | Error::EmbedHttp(_)
        | Error::DimensionMismatch { .. } => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version land here too; they are not failures.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Index(args) => run_index(args).map(|()| true),
        Command::Check(args) => run_check(args).map(|()| true),
        Command::Selftest(args) => run_selftest_cmd(args),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
