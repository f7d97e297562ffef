//! Helpers shared by the binary-driving test suites.
#![allow(dead_code)] // each test binary uses its own subset

use std::path::Path;
use std::process::{Command, Output, Stdio};

/// Runs the `nseg` binary with the given arguments.
pub fn run_nseg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nseg"))
        .args(args)
        .output()
        .expect("spawn nseg")
}

/// Runs the binary feeding `input` on standard input.
pub fn run_nseg_stdin(args: &[&str], input: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_nseg"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("spawn nseg");
    {
        use std::io::Write;
        // A broken pipe just means the command failed before reading.
        let _ = child.stdin.as_mut().unwrap().write_all(input.as_bytes());
    }
    child.wait_with_output().expect("wait for nseg")
}

pub fn stdout_str(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 stdout")
}

pub fn stderr_str(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("utf-8 stderr")
}

/// Asserts success, returning stdout; prints both streams on failure.
pub fn expect_success(out: &Output) -> String {
    assert!(
        out.status.success(),
        "command failed\nstdout:\n{}\nstderr:\n{}",
        stdout_str(out),
        stderr_str(out)
    );
    stdout_str(out)
}

pub fn write_file(path: &Path, text: &str) {
    std::fs::write(path, text).expect("write test file");
}

/// Renders sentences as a segmented corpus file body.
pub fn corpus_text(sentences: &[nseg::corpusio::SegmentedSentence]) -> String {
    let mut s = String::new();
    for sent in sentences {
        s.push_str(&sent.to_line());
        s.push('\n');
    }
    s
}

/// Renders sentences as raw (unsegmented) text.
pub fn raw_text(sentences: &[nseg::corpusio::SegmentedSentence]) -> String {
    let mut s = String::new();
    for sent in sentences {
        s.extend(sent.chars().iter());
        s.push('\n');
    }
    s
}
