use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn tabprep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tabprep"))
        .args(args)
        .env_remove("TABPREP_SERVER")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = tabprep(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn local_pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let tsv = dir.path().join("data.tsv");
    let bin = dir.path().join("data.bin");
    ok(&["gen-data", "--rows", "2000", "--seed", "3", "--missing-prob", "0.1", "--out", s(&tsv)]);
    ok(&["to-binary", s(&tsv), "--out", s(&bin)]);
    assert_eq!(std::fs::metadata(&bin).unwrap().len(), 24 + 2000 * 160);

    let a = dir.path().join("a.out");
    let b = dir.path().join("b.out");
    let c = dir.path().join("c.out");
    let stats = dir.path().join("stats.csv");
    ok(&["preprocess", s(&tsv), "--out", s(&a), "--stats", s(&stats)]);
    ok(&[
        "preprocess", s(&bin), "--out", s(&b), "--encoding", "binary", "--engine", "rowwise",
        "--threads", "3", "--spill", "disk", "--stats", s(&stats),
    ]);
    ok(&["preprocess", s(&tsv), "--out", s(&c), "--channel-capacity", "16", "--cache"]);
    assert!(String::from_utf8(ok(&["verify", s(&a), s(&b)]).stdout).unwrap().starts_with("equal"));
    ok(&["verify", s(&a), s(&c)]);
    let csv = std::fs::read_to_string(&stats).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.starts_with("engine,rows_processed,"));

    let mut bytes = std::fs::read(&b).unwrap();
    bytes[24 + 5 * 160 + 100] ^= 0x40;
    std::fs::write(&b, bytes).unwrap();
    let out = tabprep(&["verify", s(&a), s(&b)]);
    assert_eq!(out.status.code(), Some(1));
    let report = String::from_utf8(out.stdout).unwrap();
    assert!(report.contains("byte 924") && report.contains("row 5"), "{report}");
}

#[test]
fn config_file_then_flags() {
    let dir = tempfile::tempdir().unwrap();
    let tsv = dir.path().join("data.tsv");
    ok(&["gen-data", "--rows", "300", "--seed", "1", "--out", s(&tsv)]);
    let conf = dir.path().join("p.conf");
    std::fs::write(&conf, "# small vocab\nmodulus = 7\napply_log = false\n").unwrap();
    let x = dir.path().join("x.out");
    let y = dir.path().join("y.out");
    let vocab = dir.path().join("v.pvoc");
    ok(&["preprocess", s(&tsv), "--out", s(&x), "--config", s(&conf), "--vocab-out", s(&vocab)]);
    ok(&["preprocess", s(&tsv), "--out", s(&y), "--modulus", "7", "--no-log"]);
    ok(&["verify", s(&x), s(&y)]);
    let v = tabprep::VocabSet::read_sidecar(&vocab).unwrap();
    assert_eq!(v.modulus(), 7);

    std::fs::write(&conf, "modulus = 0\n").unwrap();
    let out = tabprep(&["preprocess", s(&tsv), "--out", s(&x), "--config", s(&conf)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("modulus"));
}

#[test]
fn serve_and_send() {
    let dir = tempfile::tempdir().unwrap();
    let tsv = dir.path().join("data.tsv");
    ok(&["gen-data", "--rows", "1500", "--seed", "8", "--out", s(&tsv)]);
    let local = dir.path().join("local.out");
    ok(&["preprocess", s(&tsv), "--out", s(&local), "--modulus", "300"]);

    let mut server = Command::new(env!("CARGO_BIN_EXE_tabprep"))
        .args(["serve", "--listen", "127.0.0.1:0", "--max-connections", "1"])
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(server.stderr.as_mut().unwrap())
        .read_line(&mut line)
        .unwrap();
    let addr = line.trim().strip_prefix("listening on ").unwrap().to_string();

    let remote = dir.path().join("remote.out");
    let out = Command::new(env!("CARGO_BIN_EXE_tabprep"))
        .args(["send", s(&tsv), "--out", s(&remote), "--modulus", "300", "--frame-bytes", "5000"])
        .env("TABPREP_SERVER", &addr)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(server.wait().unwrap().success());
    ok(&["verify", s(&local), s(&remote)]);
}

#[test]
fn bench_writes_csv() {
    let out = ok(&[
        "bench", "--rows", "300", "--threads", "1,2", "--modulus", "50", "--reps", "1",
    ]);
    let csv = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines.len(), 1 + 2 * 3);
    assert!(lines[0].starts_with("engine,threads,encoding,modulus,rows"));
    assert!(lines[1..].iter().all(|l| l.contains(",true,")));
}

#[test]
fn gen_data_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("e.tsv");
    ok(&["gen-data", "--rows", "0", "--out", s(&p)]);
    assert_eq!(std::fs::read(&p).unwrap().len(), 0);
    ok(&["gen-data", "--rows", "3", "--missing-prob", "1", "--out", s(&p)]);
    for line in std::fs::read_to_string(&p).unwrap().lines() {
        assert_eq!(line.len(), 40);
        assert_eq!(line.matches('\t').count(), 39);
    }
    let out = tabprep(&["gen-data", "--rows", "3", "--missing-prob", "2", "--out", s(&p)]);
    assert_eq!(out.status.code(), Some(2));
}
