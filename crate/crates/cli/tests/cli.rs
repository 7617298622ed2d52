use std::path::Path;
use std::process::{Command, Output};

fn wildskill(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wildskill"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn no_args_prints_usage_and_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = wildskill(&[], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
}

#[test]
fn unknown_flag_or_subcommand_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    for args in [&["gen-corpus", "--bogus"][..], &["fly"][..]] {
        let o = wildskill(args, dir.path());
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
    }
}

#[test]
fn help_exits_0() {
    let dir = tempfile::tempdir().unwrap();
    let o = wildskill(&["--help"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("oracle-run"));
}

#[test]
fn gen_corpus_writes_declared_clip_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.cfg");
    std::fs::write(&cfg, "# tiny corpus\ncorpus.per_class = 3\ncorpus.seed = 5\n").unwrap();
    let out = dir.path().join("d");
    let o = wildskill(
        &["gen-corpus", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", "1"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let bytes = std::fs::read(out.join("corpus.bin")).expect("dataset file exists");
    assert_eq!(&bytes[..8], b"RLWVCLIP");
    let count = u32::from_le_bytes(bytes[12..16].try_into().unwrap());
    assert_eq!(count, 12);
    assert_eq!(bytes.len(), 16 + 12 * (4 + 1 + 8 * 64 * 64));
}

#[test]
fn eval_policy_on_missing_checkpoint_exits_2_with_path() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("nowhere").join("policy.ckpt");
    let o = wildskill(&["eval-policy", "--checkpoint", ckpt.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains(ckpt.to_str().unwrap()), "{}", stderr(&o));
}

#[test]
fn bad_config_key_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = wildskill(&["gen-corpus", "--set", "corpus.colour=red"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("corpus.colour"), "{}", stderr(&o));
}

#[test]
fn run_experiment_without_build_names_missing_stage() {
    let dir = tempfile::tempdir().unwrap();
    let o = wildskill(&["run-experiment", "--no-build", "--out", "exp"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("classifier"), "{}", stderr(&o));
}
