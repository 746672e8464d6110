use std::path::Path;
use std::process::{Command, Output};

fn rispriv(args: &[&str], dir: &Path, threads: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rispriv"))
        .args(args)
        .current_dir(dir)
        .env("RISPRIV_THREADS", threads)
        .output()
        .unwrap()
}

#[test]
fn help_succeeds_and_bad_usage_fails() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(rispriv(&["--help"], dir.path(), "1").status.code(), Some(0));
    assert_eq!(
        rispriv(&["run", "--bogus"], dir.path(), "1").status.code(),
        Some(1)
    );
    assert_eq!(
        rispriv(&["sweep", "--param", "Q", "--values", "1"], dir.path(), "1")
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn invalid_config_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "k = 0\n").unwrap();
    let out = rispriv(&["--config", "bad.toml", "run"], dir.path(), "1");
    assert_eq!(
        out.status.code(),
        Some(1),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    std::fs::write(dir.path().join("typo.toml"), "[experiment]\ntrails = 3\n").unwrap();
    assert_eq!(
        rispriv(&["--config", "typo.toml", "run"], dir.path(), "1")
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn unwritable_output_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = rispriv(
        &["--trials", "1", "--out", "no/such/dir.csv", "run"],
        dir.path(),
        "1",
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let mut csvs = Vec::new();
    for threads in ["1", "2"] {
        let name = format!("t{threads}.csv");
        let args = [
            "--trials", "3", "--out", &name, "sweep", "--param", "m_R", "--values", "0,8",
        ];
        let out = rispriv(&args, dir.path(), threads);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        csvs.push(std::fs::read(dir.path().join(&name)).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
    let text = String::from_utf8(csvs.remove(0)).unwrap();
    assert!(text.starts_with("sweep_param,sweep_value,scenario,ris,nmse_analytic_mean"));
    assert_eq!(text.lines().count(), 3);
}
