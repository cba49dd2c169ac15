use std::process::{Command, Output};

use serde_json::Value;

use flatspot::density::{component, error_bound};
use flatspot::{interval_i, t_of, upper_string, Rational, RotationFraction};

fn flatspot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flatspot"))
        .args(args)
        .env_remove("FLATSPOT_MAX_Q")
        .output()
        .unwrap()
}

fn stdout(args: &[&str]) -> String {
    let out = flatspot(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).unwrap()
}

#[test]
fn table_round_trips_through_csv() {
    let text = stdout(&["table", "--max-q", "12"]);
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut rows = 0;
    for record in reader.records() {
        let record = record.unwrap();
        let r: RotationFraction = record[0].parse().unwrap();
        let rat = |i: usize| record[i].parse::<Rational>().unwrap();
        assert_eq!(record[1], upper_string(r).to_string());
        assert_eq!(rat(2), t_of(r));
        let iv = interval_i(r);
        assert_eq!((rat(3), rat(4)), (iv.lo, iv.hi));
        let j = component(r).support;
        assert_eq!((rat(5), rat(6)), (j.lo, j.hi));
        rows += 1;
    }
    assert_eq!(rows, 45);
}

#[test]
fn table_small_cases() {
    let two = stdout(&["table", "--max-q", "2"]);
    let lines: Vec<&str> = two.lines().collect();
    assert_eq!(
        lines,
        [
            "fraction,s_plus,t,i_left,i_right,j_left,j_right",
            "1/2,10,1/2,1/3,2/3,-1/4,1/4"
        ]
    );
    let three = stdout(&["table", "--max-q", "3"]);
    assert!(three.lines().any(|l| l == "2/3,110,3/4,5/7,6/7,-1/12,1/4"));
}

#[test]
fn eval_error_bound_and_locate() {
    assert_eq!(
        stdout(&["eval", "--x", "0", "--max-q", "3"])
            .split_whitespace()
            .next(),
        Some("32/21")
    );
    let line = stdout(&["error-bound", "--max-q", "50"]);
    let mut parts = line.split_whitespace();
    let exact: Rational = parts.next().unwrap().parse().unwrap();
    let float: f64 = parts.next().unwrap().parse().unwrap();
    assert_eq!(exact, error_bound(50));
    assert!(float < 1e-13);
    assert_eq!(
        stdout(&["locate", "--t", "3/10", "--max-q", "10"]).trim(),
        "2/5 [9/31,10/31]"
    );
}

#[test]
fn density_formats() {
    let csv = stdout(&["density", "--max-q", "2", "--format", "csv"]);
    assert_eq!(csv.lines().count(), 2);
    let json: Value =
        serde_json::from_str(&stdout(&["density", "--max-q", "3", "--format", "json"])).unwrap();
    assert!(json.is_array() || json.is_object());
    let svg = stdout(&["density", "--max-q", "5", "--format", "svg"]);
    assert!(svg.starts_with("<svg") && svg.contains("<polyline"));
}

#[test]
fn density_writes_to_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nu.csv");
    let path_str = path.to_str().unwrap();
    assert_eq!(
        stdout(&["density", "--max-q", "6", "--output", path_str]),
        ""
    );
    let written = std::fs::read_to_string(&path).unwrap();
    assert_eq!(written, stdout(&["density", "--max-q", "6"]));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    for args in [
        &["table", "--max-q", "9", "--format", "json"][..],
        &["density", "--max-q", "20"],
        &["tail", "--q-from", "8", "--q-to", "20"],
        &["fit", "--max-q", "30"],
        &[
            "simulate",
            "--samples",
            "3000",
            "--iters",
            "500",
            "--bins",
            "50",
            "--seed",
            "9",
        ],
    ] {
        assert_eq!(stdout(args), stdout(args), "{args:?}");
    }
}

#[test]
fn simulate_does_not_depend_on_thread_count() {
    let base = [
        "simulate",
        "--samples",
        "4000",
        "--iters",
        "1000",
        "--bins",
        "40",
        "--seed",
        "3",
    ];
    let one = stdout(&[&base[..], &["--threads", "1"]].concat());
    let four = stdout(&[&base[..], &["--threads", "4"]].concat());
    assert_eq!(one, four);
    let header = one.lines().next().unwrap();
    assert_eq!(
        header,
        "bin_left,bin_right,count,empirical_density,exact_density"
    );
    assert_eq!(one.lines().count(), 41);
}

#[test]
fn simulate_report_has_the_documented_fields() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    stdout(&[
        "simulate",
        "--samples",
        "2000",
        "--iters",
        "300",
        "--bins",
        "20",
        "--seed",
        "5",
        "--report",
        path.to_str().unwrap(),
    ]);
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    for key in ["L1", "KS", "M", "n", "B", "seed"] {
        assert!(report.get(key).is_some(), "missing {key}: {report}");
    }
    assert_eq!(report["M"], 2000);
    assert_eq!(report["B"], 20);
}

#[test]
fn tail_ratio_column_increases() {
    let text = stdout(&[
        "tail", "--q-from", "8", "--q-to", "20", "--Q", "0.7", "--beta", "16.1", "--C", "1",
    ]);
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let ratios: Vec<f64> = reader
        .records()
        .map(|r| r.unwrap()[5].parse().unwrap())
        .collect();
    assert_eq!(ratios.len(), 13);
    assert!(ratios.windows(2).all(|w| w[1] > w[0]), "{ratios:?}");
}

#[test]
fn fit_emits_the_documented_json() {
    let json: Value = serde_json::from_str(&stdout(&["fit", "--max-q", "50"])).unwrap();
    for key in ["Q", "beta", "C", "y0", "discrepancy", "samples"] {
        assert!(json.get(key).is_some(), "missing {key}: {json}");
    }
}

#[test]
fn verify_suites_exit_zero() {
    let text = stdout(&["verify", "--suite", "overlap"]);
    assert!(text.starts_with("PASS overlap"));
    let all = stdout(&["verify", "--suite", "all"]);
    assert_eq!(all.lines().filter(|l| l.starts_with("PASS")).count(), 11);
}

#[test]
fn exit_codes_and_json_errors() {
    let unknown = flatspot(&["table", "--bogus"]);
    assert_eq!(unknown.status.code(), Some(2));
    assert_eq!(stderr_json(&unknown)["error"], "usage");

    let bad_suite = flatspot(&["verify", "--suite", "nope"]);
    assert_eq!(bad_suite.status.code(), Some(2));

    let bad_value = flatspot(&["eval", "--x", "1/0"]);
    assert_eq!(bad_value.status.code(), Some(2));

    let outside = flatspot(&["limit", "--r", "1/2", "--t", "1/10"]);
    assert_eq!(outside.status.code(), Some(2));

    let too_big = flatspot(&["density", "--max-q", "65"]);
    assert_eq!(too_big.status.code(), Some(3));
    let err = stderr_json(&too_big);
    assert_eq!(err["error"], "capacity");
    assert_eq!(err["exit_code"], 3);

    let capped = Command::new(env!("CARGO_BIN_EXE_flatspot"))
        .args(["table", "--max-q", "12"])
        .env("FLATSPOT_MAX_Q", "10")
        .output()
        .unwrap();
    assert_eq!(capped.status.code(), Some(3));
}

#[test]
fn help_lists_every_subcommand() {
    let help = stdout(&["--help"]);
    for name in [
        "table",
        "density",
        "eval",
        "error-bound",
        "simulate",
        "tail",
        "fit",
        "locate",
        "verify",
    ] {
        assert!(help.contains(name), "{name} missing from --help");
    }
}
