use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn vircis(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vircis"))
        .args(args)
        .output()
        .unwrap()
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn fixture(name: &str) -> String {
    fixtures().join(name).to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn replay_fixture_passes() {
    let o = vircis(&[
        "session",
        "replay",
        &fixture("session.script"),
        "--index",
        &fixture("corpus"),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.starts_with("hmm.txt\t1.0\t1\n"), "{out}");
    assert!(out.contains("# 4 expectation(s) passed"));
}

#[test]
fn failed_expectation_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("bad.script");
    std::fs::write(&script, "JOIN a\nQUERY a speech\nEXPECT_TOP store.txt\n").unwrap();
    let o = vircis(&[
        "session",
        "replay",
        script.to_str().unwrap(),
        "--index",
        &fixture("corpus"),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("expected top store.txt, got asr.txt"));
}

#[test]
fn input_errors_exit_two() {
    let o = vircis(&["search", "--index", "/nonexistent/corpus", "speech"]);
    assert_eq!(o.status.code(), Some(2));
    let o = vircis(&["extract", &fixture("vocab.txt")]);
    assert_eq!(o.status.code(), Some(2));
    let o = vircis(&["train", "--manifest"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn stopword_query_is_empty_success() {
    let o = vircis(&["search", "--index", &fixture("corpus"), "the", "of", "over"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "");
}

#[test]
fn search_matches_library_and_saved_index() {
    let dir = tempfile::tempdir().unwrap();
    let idx = dir.path().join("corpus.idx");
    let o = vircis(&[
        "index",
        "--corpus",
        &fixture("corpus"),
        "--out",
        idx.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let from_index = stdout(&vircis(&[
        "search",
        "--index",
        idx.to_str().unwrap(),
        "speech",
        "data",
    ]));
    let from_corpus = stdout(&vircis(&["search", "--index", &fixture("corpus"), "speech data"]));
    assert_eq!(from_index, from_corpus);

    let docs = vircis_core::ir::load_corpus(fixtures().join("corpus")).unwrap();
    let index = vircis_core::ir::index_documents(&docs, &vircis_core::ir::default_stopwords()).unwrap();
    let expected: String = index
        .search("speech data", 10)
        .entries
        .iter()
        .map(|e| format!("{}\t{:?}\n", e.doc_id, e.score))
        .collect();
    assert_eq!(from_index, expected);
}

#[test]
fn synth_train_eval_round() {
    let dir = tempfile::tempdir().unwrap();
    let d = |s: &str| dir.path().join(s).to_string_lossy().into_owned();
    let vocab = dir.path().join("two.txt");
    std::fs::write(&vocab, "low 300\nhigh 2000\n").unwrap();
    let v = vocab.to_str().unwrap();
    assert!(
        vircis(&["synth", "--vocab", v, "--out", &d("train"), "--count", "5"])
            .status
            .success()
    );
    assert!(vircis(&[
        "synth",
        "--vocab",
        v,
        "--out",
        &d("test"),
        "--count",
        "3",
        "--seed",
        "9"
    ])
    .status
    .success());
    let o = vircis(&[
        "train",
        "--manifest",
        &d("train/manifest.tsv"),
        "--out",
        &d("models"),
        "--states",
        "3",
    ]);
    assert!(o.status.success());
    assert!(dir.path().join("models/low.hmm").exists());
    let o = vircis(&[
        "eval",
        "--manifest",
        &d("test/manifest.tsv"),
        "--models",
        &d("models"),
    ]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "total: 6\ncorrect: 6\naccuracy_percent: 100.00\n");

    let o = vircis(&["recognize", &d("test/high-000.wav"), "--models", &d("models")]);
    assert!(stdout(&o).starts_with("transcript: high\nhigh\t"));

    let feats = dir.path().join("f.txt");
    let o = vircis(&[
        "extract",
        &d("test/low-000.wav"),
        "--out",
        feats.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&feats).unwrap();
    let fm = vircis_core::mfcc::FeatureMatrix::from_text(&text).unwrap();
    assert_eq!(fm.dim(), 39);
}

#[test]
fn help_documents_flags() {
    let o = vircis(&["train", "--help"]);
    let help = stdout(&o);
    for flag in ["--manifest", "--out", "--states", "--iterations", "--seed"] {
        assert!(help.contains(flag), "{flag}");
    }
}
