use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};

const BIN: &str = env!("CARGO_BIN_EXE_cdsedge");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn gen_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = run(&["gen", "--n", "650", "--seed", "7", "--out", p(out)]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let text = std::fs::read_to_string(a.join("prices-650.tsv")).unwrap();
    assert_eq!(text.lines().count(), 650);
    assert!(!text.contains('\r'));
    assert!(text.lines().all(|l| l.starts_with("SPOTINSTANCEPRICE\t")));
    assert_eq!(text, std::fs::read_to_string(b.join("prices-650.tsv")).unwrap());

    let o = run(&["gen", "--n", "0", "--out", p(dir.path())]);
    assert!(o.status.success());
    assert_eq!(std::fs::read(dir.path().join("prices-0.tsv")).unwrap(), b"");
}

#[test]
fn encode_decode_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let dict = d.join("dict.tsv");
    let o = run(&["gen", "--n", "100", "--out", p(d), "--dict-out", p(&dict)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let raw = d.join("prices-100.tsv");

    for enc in ["bytewise", "huffman"] {
        let compact = d.join(format!("c-{enc}.txt"));
        let back = d.join(format!("back-{enc}.tsv"));
        let o = run(&["encode", "--in", p(&raw), "--out", p(&compact), "--dict", p(&dict), "--id-encoding", enc]);
        assert!(o.status.success(), "{}", stderr(&o));
        let head = std::fs::read_to_string(&compact).unwrap();
        assert!(head.starts_with(&format!("#C {enc} 86400 100\n")));
        let o = run(&["decode", "--in", p(&compact), "--out", p(&back), "--dict", p(&dict)]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert_eq!(std::fs::read(&raw).unwrap(), std::fs::read(&back).unwrap());
    }

    let empty = d.join("empty.tsv");
    std::fs::write(&empty, "").unwrap();
    let o = run(&["encode", "--in", p(&empty), "--out", p(&d.join("e.txt")), "--dict", p(&dict)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(d.join("e.txt")).unwrap(), "#C bytewise 86400 0\n");
}

#[test]
fn encode_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let dict = d.join("dict.tsv");
    assert!(run(&["gen", "--n", "3", "--out", p(d), "--dict-out", p(&dict)]).status.success());
    let mut text = std::fs::read_to_string(d.join("prices-3.tsv")).unwrap();
    text.push_str("SPOTINSTANCEPRICE\t0.041500\t2030-01-01T00:00:00+0000\tz9.huge\tPlan9\tmoon-1a\n");
    let input = d.join("bad.tsv");
    std::fs::write(&input, &text).unwrap();
    let o = run(&["encode", "--in", p(&input), "--out", p(&d.join("o.txt")), "--dict", p(&dict)]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("bad.tsv:4"), "{err}");
    assert!(err.contains("unknown key"), "{err}");

    std::fs::write(&input, "SPOTINSTANCEPRICE\t0.0415\t2019-05-08T17:08:38+0000\ta\tb\tc\n").unwrap();
    let o = run(&["encode", "--in", p(&input), "--out", p(&d.join("o.txt")), "--dict", p(&dict)]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("bad.tsv:1"), "{}", stderr(&o));
}

#[test]
fn fixture_passes() {
    let o = run(&["fixture"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.contains("0.658"), "{out}");
    assert!(out.contains("4.557"), "{out}");
}

#[test]
fn help_lists_flags() {
    let o = run(&["serve-edge", "--help"]);
    assert!(o.status.success());
    let help = String::from_utf8_lossy(&o.stdout);
    for flag in ["--config", "--addr", "--source-url", "--dictionary", "--max-records", "--mode", "--id-encoding", "--base-interval"] {
        assert!(help.contains(flag), "{flag} missing from\n{help}");
    }
    assert!(help.contains("650"));
    let o = run(&["--help"]);
    let help = String::from_utf8_lossy(&o.stdout);
    for sub in ["gen", "serve-source", "serve-edge", "encode", "decode", "bench", "fixture"] {
        assert!(help.contains(sub), "{sub}");
    }
}

#[test]
fn serve_edge_reports_missing_dictionary() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.tsv");
    let o = run(&["serve-edge", "--addr", "127.0.0.1:0", "--dictionary", p(&missing)]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("nope.tsv"), "{}", stderr(&o));
}

#[test]
fn bad_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[edge]\nmax_record = 3\n").unwrap();
    let o = run(&["serve-edge", "--config", p(&cfg)]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("c.toml"), "{}", stderr(&o));
}

/// Starts a server and returns it with the address from its ready line.
fn spawn_service(args: &[&str], ready: &str) -> (Child, String) {
    let mut child = Command::new(BIN)
        .args(args)
        .env("RUST_LOG", "info")
        .env("NO_COLOR", "1")
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut reader = BufReader::new(child.stderr.take().unwrap());
    let mut line = String::new();
    loop {
        line.clear();
        assert!(reader.read_line(&mut line).unwrap() > 0, "service exited before ready");
        if line.contains(ready) {
            break;
        }
    }
    let addr = line
        .split_whitespace()
        .find_map(|w| w.strip_prefix("addr="))
        .expect("ready line carries addr")
        .to_string();
    std::thread::spawn(move || std::io::copy(&mut reader, &mut std::io::sink()));
    (child, addr)
}

fn terminate(child: &mut Child) -> std::process::ExitStatus {
    let pid = child.id().to_string();
    assert!(Command::new("kill").args(["-TERM", &pid]).status().unwrap().success());
    child.wait().unwrap()
}

#[test]
fn services_and_bench_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let dict = d.join("dict.tsv");
    assert!(run(&["gen", "--n", "650", "--out", p(d), "--dict-out", p(&dict)]).status.success());

    let (mut source, source_addr) =
        spawn_service(&["serve-source", "--dir", p(d), "--addr", "127.0.0.1:0"], "source ready");
    let cfg = d.join("edge.toml");
    std::fs::write(
        &cfg,
        format!("[edge]\nsource_url = \"http://{source_addr}\"\ndictionary = \"{}\"\nmax_records = 100\n", p(&dict)),
    )
    .unwrap();
    let (mut edge, edge_addr) =
        spawn_service(&["serve-edge", "--config", p(&cfg), "--addr", "127.0.0.1:0"], "edge ready");

    let out = d.join("report.csv");
    let url = format!("http://{edge_addr}");
    let o = run(&["bench", "--edge-url", &url, "--amounts", "12,25", "--reps", "2", "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines.len(), 3, "{csv}");
    assert!(lines[1].starts_with("12,"));
    assert!(lines[2].starts_with("25,"));

    // The config cap of 100 applies, so the sweep is reported incomplete.
    let o = run(&["bench", "--edge-url", &url, "--amounts", "12,200", "--reps", "1", "--format", "markdown"]);
    assert!(!o.status.success());
    let md = String::from_utf8_lossy(&o.stdout);
    assert!(md.contains("Incomplete"), "{md}");

    assert!(terminate(&mut edge).success());
    assert!(terminate(&mut source).success());

    let o = run(&["bench", "--edge-url", &url, "--amounts", "12", "--reps", "1"]);
    assert!(!o.status.success());
}
