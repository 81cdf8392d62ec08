//! Acceptance gate: one pass/fail line per criterion, each enforcing its
//! stated tolerance and, where one applies, its wall-clock budget.
//!
//! Criteria 1-8 and 10 reuse the library's self-test checks (the tolerances
//! live next to the checks themselves); criterion 9 drives the real binary
//! twice from scratch and byte-compares every artifact it produces.

mod common;

use common::{assert_exit, cmd, run, stdout, write_corpus, write_query};
use imgplag_core::selftest::{fixture, run_selftest, SelftestOptions};

struct Criterion {
    number: u32,
    name: &'static str,
    run: fn() -> Result<String, String>,
}

const CRITERIA: &[Criterion] = &[
    Criterion {
        number: 1,
        name: "self-match",
        run: || selftest("self-match", Some(5_000)),
    },
    Criterion {
        number: 2,
        name: "dissimilar-input",
        run: || selftest("disjoint", Some(5_000)),
    },
    Criterion {
        number: 3,
        name: "jaccard-oracle",
        run: || selftest("jaccard-oracle", Some(1_000)),
    },
    Criterion {
        number: 4,
        name: "cosine-oracle",
        run: || selftest("cosine-oracle", Some(1_000)),
    },
    Criterion {
        number: 5,
        name: "svd-oracle",
        run: || selftest("svd-oracle", Some(10_000)),
    },
    Criterion {
        number: 6,
        name: "wordnet-oracle",
        run: || selftest("taxonomy-oracle", Some(2_000)),
    },
    Criterion {
        number: 7,
        name: "ner-axis-golden",
        run: || selftest("entity-golden", None),
    },
    Criterion {
        number: 8,
        name: "tfidf-hand-check",
        run: || selftest("tfidf-hand", None),
    },
    Criterion {
        number: 9,
        name: "determinism",
        run: determinism,
    },
    Criterion {
        number: 10,
        name: "tfidf-exceeds-cosine",
        run: || selftest("tfidf-vs-cosine", None),
    },
];

/// Runs one named self-test check and folds its budget into the verdict.
fn selftest(check: &str, budget_ms: Option<u128>) -> Result<String, String> {
    let options = SelftestOptions {
        only: Some(check.to_string()),
        perturb_svd: false,
    };
    let outcomes = run_selftest(&options);
    let outcome = outcomes
        .iter()
        .find(|o| o.name == check)
        .ok_or_else(|| format!("no check named {check}"))?;
    if !outcome.passed {
        return Err(outcome.detail.clone());
    }
    match budget_ms {
        Some(budget) if outcome.millis >= budget => {
            Err(format!("took {} ms, budget {budget} ms", outcome.millis))
        }
        Some(budget) => Ok(format!(
            "{} ({} ms < {budget} ms)",
            outcome.detail, outcome.millis
        )),
        None => Ok(format!("{} ({} ms)", outcome.detail, outcome.millis)),
    }
}

/// Criterion 9: two full index + check runs in fresh directories must produce
/// byte-identical index files and byte-identical reports in every format.
fn determinism() -> Result<String, String> {
    fn full_run() -> (Vec<u8>, [String; 3]) {
        let dir = tempfile::tempdir().unwrap();
        write_corpus(dir.path());
        let out = run(cmd(dir.path())
            .args(["index", "--corpus", "corpus", "--out", "idx"])
            .args(["--gazetteer", "gazetteer.tsv"]));
        assert_exit(&out, 0);

        write_query(dir.path(), "query", fixture::QUERY_ENTITY);
        let reports = ["table", "csv", "json"].map(|format| {
            let out = run(cmd(dir.path()).args([
                "check",
                "--index",
                "idx",
                "--input",
                "query.png",
                "--format",
                format,
            ]));
            assert_exit(&out, 0);
            stdout(&out)
        });
        (
            std::fs::read(dir.path().join("idx/index.json")).unwrap(),
            reports,
        )
    }

    let (index_a, reports_a) = full_run();
    let (index_b, reports_b) = full_run();
    if index_a != index_b {
        return Err("index.json differs between identical runs".into());
    }
    for (format, (a, b)) in ["table", "csv", "json"]
        .iter()
        .zip(reports_a.iter().zip(&reports_b))
    {
        if a != b {
            return Err(format!("{format} report differs between identical runs"));
        }
    }
    Ok(format!(
        "index.json ({} bytes) and table/csv/json reports byte-identical across fresh runs",
        index_a.len()
    ))
}

#[test]
fn acceptance() {
    let mut failed = 0;
    for criterion in CRITERIA {
        let verdict = (criterion.run)();
        let (status, detail) = match &verdict {
            Ok(detail) => ("PASS", detail.as_str()),
            Err(reason) => {
                failed += 1;
                ("FAIL", reason.as_str())
            }
        };
        println!(
            "{status} criterion {:>2} {} - {}",
            criterion.number, criterion.name, detail
        );
    }
    assert_eq!(failed, 0, "{failed} acceptance criteria failed");
}
