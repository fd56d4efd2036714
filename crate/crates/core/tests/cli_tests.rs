use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use facf::ingestion::load_sequence;
use facf::metrics::{evaluate, parse_metrics_summary};
use facf::report::parse_results_csv;
use facf::{run_tracker, RunConfig};

const SCRIPT: &str = "name = cli\nframes = 16\ndx = 1.5\ndy = -0.5\nseed = 4\n";
const CONFIG: &str = "executive_count = 6\ndelta_t = 3\n";

fn facf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_facf"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn synth_track_eval_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let script = tmp.path().join("seq.txt");
    let config = tmp.path().join("run.conf");
    let seq_dir = tmp.path().join("seq");
    let out_dir = tmp.path().join("out");
    fs::write(&script, SCRIPT).unwrap();
    fs::write(&config, CONFIG).unwrap();

    ok(&facf(&["synth", p(&script), "--out-dir", p(&seq_dir)]));
    ok(&facf(&[
        "track",
        p(&seq_dir),
        "--config",
        p(&config),
        "--seed",
        "5",
        "--out-dir",
        p(&out_dir),
    ]));
    for f in [
        "results.csv",
        "metrics.csv",
        "fitness.csv",
        "config.txt",
        "precision.dat",
        "success.dat",
    ] {
        assert!(out_dir.join(f).is_file(), "{f}");
    }

    // the library run with the same settings is the same record
    let seq = load_sequence(&seq_dir).unwrap();
    let mut cfg = RunConfig::load(&config).unwrap();
    cfg.seed = 5;
    let record = run_tracker(&cfg, &seq).unwrap();
    let table =
        parse_results_csv(&fs::read_to_string(out_dir.join("results.csv")).unwrap()).unwrap();
    assert_eq!(table.boxes, record.boxes);
    assert_eq!(table.winners, record.winners);
    assert_eq!(table.executives, record.executives);
    // the whole pool runs until delta_t frames have been scored
    for (frame, execs) in record.executives.iter().enumerate().skip(1) {
        assert_eq!(
            execs.len(),
            if frame <= 3 { 63 } else { 6 },
            "frame {frame}"
        );
    }

    let curves = evaluate(&record.boxes, seq.ground_truth()).unwrap();
    let (p20, auc) =
        parse_metrics_summary(&fs::read_to_string(out_dir.join("metrics.csv")).unwrap()).unwrap();
    assert_eq!((p20, auc), (curves.p20(), curves.auc()));

    let stdout = ok(&facf(&[
        "eval",
        p(&out_dir.join("results.csv")),
        p(&seq_dir),
    ]));
    assert_eq!(
        stdout,
        format!("p20,{}\nauc,{}\n", curves.p20(), curves.auc())
    );

    // the emitted configuration snapshot reproduces the run
    let again = tmp.path().join("again");
    ok(&facf(&[
        "track",
        p(&seq_dir),
        "--config",
        p(&out_dir.join("config.txt")),
        "--out-dir",
        p(&again),
    ]));
    assert_eq!(
        fs::read_to_string(again.join("results.csv")).unwrap(),
        fs::read_to_string(out_dir.join("results.csv")).unwrap()
    );
}

#[test]
fn script_files_are_tracked_directly() {
    let tmp = tempfile::tempdir().unwrap();
    let script = tmp.path().join("seq.txt");
    let config = tmp.path().join("hog.conf");
    fs::write(&script, SCRIPT).unwrap();
    fs::write(&config, "pool = HOG\nexecutive_count = 1\n").unwrap();
    let out_dir = tmp.path().join("out");
    ok(&facf(&[
        "track",
        p(&script),
        "--config",
        p(&config),
        "--out-dir",
        p(&out_dir),
    ]));
    let table =
        parse_results_csv(&fs::read_to_string(out_dir.join("results.csv")).unwrap()).unwrap();
    let seq = facf::ingestion::synth_sequence(&SCRIPT.parse().unwrap()).unwrap();
    let mean_err = table
        .boxes
        .iter()
        .zip(seq.ground_truth())
        .map(|(a, b)| a.center_distance(b))
        .sum::<f64>()
        / table.boxes.len() as f64;
    assert!(mean_err <= 2.0, "mean center error {mean_err}");
    assert!(table.winners[1..]
        .iter()
        .all(|w| w.unwrap().to_string() == "HOG"));
}

#[test]
fn exit_codes_classify_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let script = tmp.path().join("seq.txt");
    fs::write(&script, SCRIPT).unwrap();
    let bad = tmp.path().join("bad.conf");
    fs::write(&bad, "executive_count = 0\n").unwrap();
    let unknown = tmp.path().join("unknown.conf");
    fs::write(&unknown, "no_such_key = 1\n").unwrap();
    let out = p(tmp.path());

    let code = |args: &[&str]| facf(args).status.code();
    assert_eq!(
        code(&["track", p(&script), "--config", p(&bad), "--out-dir", out]),
        Some(2)
    );
    assert_eq!(
        code(&[
            "track",
            p(&script),
            "--config",
            p(&unknown),
            "--out-dir",
            out
        ]),
        Some(2)
    );
    assert_eq!(
        code(&["track", "/nonexistent/sequence", "--out-dir", out]),
        Some(3)
    );
    assert_eq!(
        code(&["eval", "/nonexistent/results.csv", "/nonexistent"]),
        Some(3)
    );
}
