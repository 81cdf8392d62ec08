//! Scoring a query against the whole corpus and rendering the results.
//!
//! All three renderers are byte-deterministic for a fixed index and query:
//! row order is fixed (entity modes in declaration order, then algorithms in
//! request order), ties in the pairwise scan break toward the smallest
//! document id, and numbers are formatted with a fixed precision everywhere
//! except JSON, which keeps full float precision so reports round-trip.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::embed::Embedder;
use crate::error::{Error, Result};
use crate::index::PlagiarismIndex;
use crate::ingest::ExtractedText;
use crate::preprocess::{preprocess, NerMode};
use crate::similarity::{AlgorithmId, ScoreContext, Target, Warning};
use crate::wordnet::{Lexicon, Measure};

/// Whether the query is scored against each document or against the pooled
/// corpus concatenation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregationMode {
    Pairwise,
    Pooled,
}

impl fmt::Display for AggregationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AggregationMode::Pairwise => "pairwise",
            AggregationMode::Pooled => "pooled",
        })
    }
}

impl FromStr for AggregationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_lowercase().as_str() {
            "pairwise" => Ok(AggregationMode::Pairwise),
            "pooled" => Ok(AggregationMode::Pooled),
            other => Err(Error::InvalidConfig(format!(
                "unknown mode {other:?} (expected pairwise or pooled)"
            ))),
        }
    }
}

/// Output format for a rendered report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Table,
    Csv,
    Json,
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Table => "table",
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        })
    }
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_lowercase().as_str() {
            "table" => Ok(OutputFormat::Table),
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::InvalidConfig(format!(
                "unknown format {other:?} (expected table, csv or json)"
            ))),
        }
    }
}

/// One algorithm's verdict for the query under one entity mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub algorithm: AlgorithmId,
    pub ner_mode: NerMode,
    pub mode: AggregationMode,
    /// Best-matching document id; `None` in pooled mode.
    pub best_doc: Option<String>,
    /// Similarity as a percentage in [0, 100].
    pub percent: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub warning: Option<Warning>,
}

/// The full report for one query image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlagiarismReport {
    pub input: String,
    pub ocr_backend: String,
    pub embed_provider: String,
    pub measure: Measure,
    pub mode: AggregationMode,
    pub results: Vec<MatchResult>,
}

/// What to compute for one query.
#[derive(Debug, Clone)]
pub struct ReportRequest {
    pub algorithms: Vec<AlgorithmId>,
    pub ner_modes: Vec<NerMode>,
    pub mode: AggregationMode,
    pub measure: Measure,
}

impl Default for ReportRequest {
    fn default() -> Self {
        ReportRequest {
            algorithms: AlgorithmId::ALL.to_vec(),
            ner_modes: vec![NerMode::Include],
            mode: AggregationMode::Pairwise,
            measure: Measure::default(),
        }
    }
}

/// Scores every requested algorithm for one entity mode. In pairwise mode
/// each algorithm reports its best-scoring document (first in id order on
/// ties); in pooled mode the corpus is treated as one concatenated document.
pub fn score_against_corpus(
    ctx: &ScoreContext<'_>,
    query: &crate::similarity::QueryArtifacts,
    algorithms: &[AlgorithmId],
    mode: AggregationMode,
) -> Result<Vec<MatchResult>> {
    let ner_mode = ctx.side.options.ner_mode;
    let mut results = Vec::with_capacity(algorithms.len());
    for &algorithm in algorithms {
        let result = match mode {
            AggregationMode::Pairwise => {
                let mut best: Option<(usize, crate::similarity::SimilarityScore)> = None;
                for i in 0..ctx.side.docs.len() {
                    let s = ctx.score(algorithm, query, &Target::Doc(i))?;
                    if best.as_ref().is_none_or(|(_, b)| s.value > b.value) {
                        best = Some((i, s));
                    }
                }
                let (i, s) = best.expect("index sides are never empty");
                MatchResult {
                    algorithm,
                    ner_mode,
                    mode,
                    best_doc: Some(ctx.side.docs[i].doc_id.clone()),
                    percent: 100.0 * s.value,
                    warning: s.warning,
                }
            }
            AggregationMode::Pooled => {
                let s = ctx.score(algorithm, query, &Target::Pool)?;
                MatchResult {
                    algorithm,
                    ner_mode,
                    mode,
                    best_doc: None,
                    percent: 100.0 * s.value,
                    warning: s.warning,
                }
            }
        };
        results.push(result);
    }
    Ok(results)
}

/// Runs the full check for one extracted query against a loaded index.
pub fn build_report(
    index: &PlagiarismIndex,
    query: &ExtractedText,
    lexicon: &Lexicon,
    embedder: &Embedder,
    request: &ReportRequest,
) -> Result<PlagiarismReport> {
    if request.algorithms.is_empty() {
        return Err(Error::InvalidConfig("no algorithms requested".to_string()));
    }
    if request.ner_modes.is_empty() {
        return Err(Error::InvalidConfig(
            "no entity modes requested".to_string(),
        ));
    }
    let pctx = index.preprocess_context()?;
    let mut results = Vec::new();
    for &ner_mode in &request.ner_modes {
        let side = index.side(ner_mode);
        let ctx = ScoreContext {
            side,
            lexicon,
            embedder,
            measure: request.measure,
        };
        let query_doc = preprocess(query, side.options, &pctx);
        let artifacts = ctx.prepare_query(query_doc)?;
        results.extend(score_against_corpus(
            &ctx,
            &artifacts,
            &request.algorithms,
            request.mode,
        )?);
    }
    Ok(PlagiarismReport {
        input: query.doc_id.clone(),
        ocr_backend: query.backend_id.label().to_string(),
        embed_provider: embedder.provider().label(),
        measure: request.measure,
        mode: request.mode,
        results,
    })
}

/// Renders to the requested format. Table and CSV round percentages to two
/// decimals; JSON keeps full precision.
pub fn render(report: &PlagiarismReport, format: OutputFormat) -> String {
    match format {
        OutputFormat::Table => render_table(report),
        OutputFormat::Csv => render_csv(report),
        OutputFormat::Json => render_json(report),
    }
}

/// Distinct entity modes in first-appearance order.
fn ner_modes_of(report: &PlagiarismReport) -> Vec<NerMode> {
    let mut modes = Vec::new();
    for r in &report.results {
        if !modes.contains(&r.ner_mode) {
            modes.push(r.ner_mode);
        }
    }
    modes
}

/// Distinct algorithms in first-appearance order.
fn algorithms_of(report: &PlagiarismReport) -> Vec<AlgorithmId> {
    let mut algs = Vec::new();
    for r in &report.results {
        if !algs.contains(&r.algorithm) {
            algs.push(r.algorithm);
        }
    }
    algs
}

fn render_table(report: &PlagiarismReport) -> String {
    let modes = ner_modes_of(report);
    let algorithms = algorithms_of(report);
    let single_mode = modes.len() == 1;

    let mut out = String::new();
    out.push_str(&format!(
        "# input={} mode={} backend={} embed={} measure={}\n\n",
        report.input, report.mode, report.ocr_backend, report.embed_provider, report.measure
    ));

    let row_label = |mode: NerMode| -> String {
        if single_mode {
            report.input.clone()
        } else {
            format!("{} [{}]", report.input, mode)
        }
    };

    let label_width = modes
        .iter()
        .map(|&m| row_label(m).len())
        .chain(std::iter::once("Input".len()))
        .max()
        .unwrap();
    let col_widths: Vec<usize> = algorithms.iter().map(|a| a.title().len().max(6)).collect();

    out.push_str(&format!("{:<label_width$}", "Input"));
    for (a, w) in algorithms.iter().zip(&col_widths) {
        out.push_str(&format!("  {:>w$}", a.title(), w = w));
    }
    out.push('\n');
    let total = label_width + col_widths.iter().map(|w| w + 2).sum::<usize>();
    out.push_str(&"-".repeat(total));
    out.push('\n');

    let mut any_warning = false;
    for &mode in &modes {
        out.push_str(&format!("{:<label_width$}", row_label(mode)));
        for (&alg, w) in algorithms.iter().zip(&col_widths) {
            let r = report
                .results
                .iter()
                .find(|r| r.ner_mode == mode && r.algorithm == alg)
                .expect("every (mode, algorithm) pair was scored");
            let mut cell = format!("{:.2}", r.percent);
            if r.warning.is_some() {
                any_warning = true;
                cell.push('*');
            }
            out.push_str(&format!("  {cell:>w$}", w = w));
        }
        out.push('\n');
    }
    if any_warning {
        out.push_str("* empty comparison: no usable text on one side\n");
    }
    out
}

fn csv_escape(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

fn render_csv(report: &PlagiarismReport) -> String {
    let mut out = String::from("input,algorithm,ner_mode,mode,best_doc,percent\n");
    for r in &report.results {
        out.push_str(&format!(
            "{},{},{},{},{},{:.2}\n",
            csv_escape(&report.input),
            r.algorithm,
            r.ner_mode,
            r.mode,
            csv_escape(r.best_doc.as_deref().unwrap_or("")),
            r.percent
        ));
    }
    out
}

fn render_json(report: &PlagiarismReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::{build_index, IndexConfig};
    use crate::ingest::OcrBackendKind;
    use crate::ner::Gazetteer;
    use crate::preprocess::PreprocessContext;

    fn extracted(id: &str, raw: &str) -> ExtractedText {
        ExtractedText {
            doc_id: id.to_string(),
            raw_text: raw.to_string(),
            backend_id: OcrBackendKind::Sidecar,
            extracted_at: String::new(),
        }
    }

    fn sample_index() -> PlagiarismIndex {
        let texts = vec![
            extracted("flow", "start process end decision branch loop"),
            extracted("graph", "axis label legend series trend baseline"),
            extracted("note", "Ada Lovelace start process axis notes"),
        ];
        let gaz = Gazetteer::parse("PERSON\tAda Lovelace\n", "test").unwrap();
        build_index(
            &texts,
            &IndexConfig::default(),
            &PreprocessContext::with_gazetteer(gaz),
            "sidecar",
        )
        .unwrap()
    }

    fn report_for(query_raw: &str, request: &ReportRequest) -> PlagiarismReport {
        let index = sample_index();
        let lexicon = Lexicon::embedded();
        let embedder = Embedder::new(index.config.embed.clone());
        build_report(
            &index,
            &extracted("query", query_raw),
            &lexicon,
            &embedder,
            request,
        )
        .unwrap()
    }

    #[test]
    fn self_match_reports_hundred_percent() {
        let report = report_for(
            "start process end decision branch loop",
            &ReportRequest::default(),
        );
        assert_eq!(report.results.len(), AlgorithmId::ALL.len());
        for r in &report.results {
            assert_eq!(r.best_doc.as_deref(), Some("flow"), "{}", r.algorithm);
            assert!(
                (r.percent - 100.0).abs() < 1e-6,
                "{} reported {}",
                r.algorithm,
                r.percent
            );
        }
    }

    #[test]
    fn pairwise_tie_breaks_toward_smallest_id() {
        // "decision" hits only flow and "legend" only graph; both corpus
        // docs have six lemmas, so the jaccard scores tie exactly at 1/7
        // and the scan must keep the alphabetically first id.
        let report = report_for("decision legend", &ReportRequest::default());
        let jaccard = report
            .results
            .iter()
            .find(|r| r.algorithm == AlgorithmId::Jaccard)
            .unwrap();
        assert!((jaccard.percent - 100.0 / 7.0).abs() < 1e-9);
        assert_eq!(jaccard.best_doc.as_deref(), Some("flow"));
    }

    #[test]
    fn pooled_mode_has_no_best_doc() {
        let request = ReportRequest {
            mode: AggregationMode::Pooled,
            ..Default::default()
        };
        let report = report_for("start process axis", &request);
        for r in &report.results {
            assert_eq!(r.best_doc, None);
            assert_eq!(r.mode, AggregationMode::Pooled);
        }
    }

    #[test]
    fn both_ner_modes_double_the_rows() {
        let request = ReportRequest {
            ner_modes: vec![NerMode::Include, NerMode::Exclude],
            ..Default::default()
        };
        let report = report_for("Ada Lovelace start process", &request);
        assert_eq!(report.results.len(), 2 * AlgorithmId::ALL.len());
        let include_jaccard = report
            .results
            .iter()
            .find(|r| r.ner_mode == NerMode::Include && r.algorithm == AlgorithmId::Jaccard)
            .unwrap();
        let exclude_jaccard = report
            .results
            .iter()
            .find(|r| r.ner_mode == NerMode::Exclude && r.algorithm == AlgorithmId::Jaccard)
            .unwrap();
        // Dropping the shared entity lowers the overlap with "note".
        assert!(include_jaccard.percent > exclude_jaccard.percent);
    }

    #[test]
    fn table_lists_algorithms_in_request_order() {
        let request = ReportRequest {
            algorithms: vec![AlgorithmId::Wordnet, AlgorithmId::Jaccard],
            ..Default::default()
        };
        let report = report_for("start process", &request);
        let table = render(&report, OutputFormat::Table);
        let header = table.lines().nth(2).unwrap();
        let wn = header.find("WordNet").unwrap();
        let jc = header.find("Jaccard").unwrap();
        assert!(wn < jc, "header was {header:?}");
    }

    #[test]
    fn table_labels_rows_with_mode_only_when_both_present() {
        let single = report_for("start process", &ReportRequest::default());
        let table = render(&single, OutputFormat::Table);
        assert!(table.contains("\nquery "), "table was:\n{table}");
        assert!(!table.contains("[include]"));

        let both = report_for(
            "start process",
            &ReportRequest {
                ner_modes: vec![NerMode::Include, NerMode::Exclude],
                ..Default::default()
            },
        );
        let table = render(&both, OutputFormat::Table);
        assert!(table.contains("query [include]"), "table was:\n{table}");
        assert!(table.contains("query [exclude]"));
    }

    #[test]
    fn csv_has_fixed_header_and_two_decimals() {
        let report = report_for("start process", &ReportRequest::default());
        let csv = render(&report, OutputFormat::Csv);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "input,algorithm,ner_mode,mode,best_doc,percent"
        );
        let first = lines.next().unwrap();
        let fields: Vec<&str> = first.split(',').collect();
        assert_eq!(fields[0], "query");
        assert_eq!(fields[1], "jaccard");
        assert_eq!(fields[2], "include");
        assert_eq!(fields[3], "pairwise");
        let percent = fields[5];
        assert_eq!(percent.split('.').nth(1).unwrap().len(), 2, "{percent}");
    }

    #[test]
    fn csv_escapes_commas_and_quotes() {
        assert_eq!(csv_escape("plain"), "plain");
        assert_eq!(csv_escape("a,b"), "\"a,b\"");
        assert_eq!(csv_escape("say \"hi\""), "\"say \"\"hi\"\"\"");
    }

    #[test]
    fn json_round_trips() {
        let report = report_for(
            "Ada Lovelace start process",
            &ReportRequest {
                ner_modes: vec![NerMode::Include, NerMode::Exclude],
                ..Default::default()
            },
        );
        let json = render(&report, OutputFormat::Json);
        let parsed: PlagiarismReport = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed, report);
    }

    #[test]
    fn renderers_are_deterministic() {
        let request = ReportRequest {
            ner_modes: vec![NerMode::Include, NerMode::Exclude],
            ..Default::default()
        };
        let a = report_for("start process axis trend", &request);
        let b = report_for("start process axis trend", &request);
        assert_eq!(a, b);
        for format in [OutputFormat::Table, OutputFormat::Csv, OutputFormat::Json] {
            assert_eq!(render(&a, format), render(&b, format));
        }
    }

    #[test]
    fn empty_query_reports_zero_with_warning_marker() {
        let report = report_for("the of is", &ReportRequest::default());
        for r in &report.results {
            assert_eq!(r.percent, 0.0);
            assert_eq!(r.warning, Some(Warning::EmptyComparison));
        }
        let table = render(&report, OutputFormat::Table);
        assert!(table.contains("0.00*"), "table was:\n{table}");
        assert!(table.contains("* empty comparison"));
    }

    #[test]
    fn mode_strings_parse() {
        assert_eq!(
            "pairwise".parse::<AggregationMode>().unwrap(),
            AggregationMode::Pairwise
        );
        assert_eq!(
            "POOLED".parse::<AggregationMode>().unwrap(),
            AggregationMode::Pooled
        );
        assert!("both".parse::<AggregationMode>().is_err());
        assert_eq!("csv".parse::<OutputFormat>().unwrap(), OutputFormat::Csv);
        assert!("xml".parse::<OutputFormat>().is_err());
    }
}
