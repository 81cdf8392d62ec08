//! Helpers shared by the integration-test targets: fixture corpus layout
//! and a scrubbed-environment wrapper around the real binary.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use imgplag_core::selftest::fixture;

pub const BIN: &str = env!("CARGO_BIN_EXE_imgplag");

/// A command with a scrubbed environment so ambient `IMGPLAG_*` variables or
/// credentials cannot leak into test runs.
pub fn cmd(dir: &Path) -> Command {
    let mut c = Command::new(BIN);
    c.current_dir(dir);
    for (key, _) in std::env::vars() {
        if key.starts_with("IMGPLAG_") {
            c.env_remove(key);
        }
    }
    c.env_remove("VISION_API_KEY");
    c.env_remove("EMBED_API_KEY");
    c
}

pub fn run(c: &mut Command) -> Output {
    c.output().expect("binary runs")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout is utf-8")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("stderr is utf-8")
}

pub fn assert_exit(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "expected exit {code}\n--- stdout ---\n{}\n--- stderr ---\n{}",
        stdout(out),
        stderr(out)
    );
}

/// Writes the shared fixture corpus (six sidecar-backed "images") plus the
/// gazetteer, returning the corpus directory.
pub fn write_corpus(root: &Path) -> PathBuf {
    let corpus = root.join("corpus");
    std::fs::create_dir_all(&corpus).unwrap();
    for (id, text) in fixture::CORPUS {
        std::fs::write(corpus.join(format!("{id}.png")), format!("pixels of {id}")).unwrap();
        std::fs::write(corpus.join(format!("{id}.txt")), text).unwrap();
    }
    std::fs::write(root.join("gazetteer.tsv"), fixture::GAZETTEER).unwrap();
    corpus
}

pub fn write_query(root: &Path, name: &str, text: &str) -> PathBuf {
    let image = root.join(format!("{name}.png"));
    std::fs::write(&image, format!("pixels of {name}")).unwrap();
    std::fs::write(root.join(format!("{name}.txt")), text).unwrap();
    image
}

/// Builds an index under `root/idx` and returns that directory.
pub fn build_index(root: &Path) -> PathBuf {
    write_corpus(root);
    let out = run(cmd(root)
        .args(["index", "--corpus", "corpus", "--out", "idx"])
        .args(["--gazetteer", "gazetteer.tsv"]));
    assert_exit(&out, 0);
    root.join("idx")
}
