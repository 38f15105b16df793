use std::path::PathBuf;
use std::process::{Command, Output};

fn promptvm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_promptvm")).args(args).env_remove("PTM_GUARD_BITS").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn corpus(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name).display().to_string()
}

/// A scratch corpus directory holding a single small program.
fn small_corpus(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("promptvm-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(dir.join("flip.ptm"), "A1 AR #\n").unwrap();
    dir
}

#[test]
fn tokenize_prints_the_input_encoding() {
    let o = promptvm(&["tokenize", "--input", "01"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "AR AR AR AR AL A1 AL A1 AL AL A1 = - - - - - - - - - - - @");
}

#[test]
fn generate_dyck_on_empty_input() {
    for backend in ["exact", "float"] {
        let o = promptvm(&["generate", "--program", &corpus("dyck.ptm"), "--backend", backend]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(stdout(&o).trim(), "/ A0 AL A0 AL / AR AR A1 AR BL / A1 : 1 $");
    }
}

#[test]
fn run_ptm_on_compiled_parity() {
    let o = promptvm(&["run-ptm", "--program", &corpus("parity.tm"), "--input", "1101"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "1");
}

#[test]
fn compile_parity() {
    let o = promptvm(&["compile", "--tm", &corpus("parity.tm")]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).split_whitespace().count(), 136);
}

#[test]
fn errors_are_json_on_stderr() {
    let o = promptvm(&["run-ptm", "--program", "/nonexistent.ptm"]);
    assert!(!o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert!(v["error"].is_object());
    assert!(v["message"].as_str().unwrap().contains("nonexistent"));

    let o = promptvm(&["tokenize", "--input", "012"]);
    assert!(!o.status.success());
    assert!(serde_json::from_slice::<serde_json::Value>(&o.stderr).is_ok());
}

#[test]
fn verify_small_corpus() {
    let dir = small_corpus("verify");
    let o = promptvm(&["verify", "--corpus", dir.to_str().unwrap(), "--random-programs", "0"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["failed"], 0);
    assert_eq!(v["programs"], 1);
}

#[test]
fn bench_is_deterministic() {
    let dir = small_corpus("bench");
    let args = ["bench", "--corpus", dir.to_str().unwrap(), "--random-programs", "0", "--skip-bits"];
    let a = promptvm(&args);
    let b = promptvm(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(text.starts_with("# measured by this implementation"));
    // Header plus the 511 inputs of length at most 8.
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1 + 511);
}
