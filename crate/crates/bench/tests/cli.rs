use std::process::{Command, Output};

fn cascm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cascm"))
        .args(args)
        .env_remove("CASCM_PRESET")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn csv_rows(text: &str) -> Vec<csv::StringRecord> {
    csv::Reader::from_reader(text.as_bytes())
        .records()
        .map(|r| r.unwrap())
        .collect()
}

const COLUMNS: usize = 21;

#[test]
fn single_thread_cas_row() {
    let o = cascm(&[
        "bench",
        "--bench",
        "cas",
        "--algo",
        "cb",
        "--threads",
        "1",
        "--mode",
        "ops",
        "--ops",
        "1000",
        "--seed",
        "7",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 1);
    let r = &rows[0];
    assert_eq!(r.len(), COLUMNS);
    assert_eq!(&r[1], "cb");
    assert_eq!(&r[4], "7");
    assert_eq!(&r[5], "1000");
    assert_eq!(&r[6], "0");
}

#[test]
fn sweep_row_count() {
    let o = cascm(&[
        "bench",
        "--bench",
        "cas",
        "--algo",
        "all",
        "--threads",
        "1..4",
        "--runs",
        "2",
        "--mode",
        "ops",
        "--ops",
        "500",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 6 * 4 * 2);
    assert!(rows.iter().all(|r| r.len() == COLUMNS));
}

#[test]
fn xeon_preset_for_exp() {
    let o = cascm(&[
        "bench", "--preset", "xeon", "--algo", "exp", "--mode", "ops", "--ops", "10", "--seed",
        "1", "--format", "jsonl",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(stdout(&o).lines().next().unwrap()).unwrap();
    assert_eq!(v["c"], 8);
    assert_eq!(v["m"], 24);
    assert_eq!(v["exp_threshold"], 2);
}

#[test]
fn preset_from_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_cascm"))
        .args([
            "bench", "--algo", "ts", "--mode", "ops", "--ops", "10", "--seed", "1",
        ])
        .env("CASCM_PRESET", "sparc")
        .output()
        .unwrap();
    let rows = csv_rows(&stdout(&o));
    assert_eq!(&rows[0][16], "10"); // conc
    assert_eq!(&rows[0][17], "6"); // slice
}

#[test]
fn csv_and_jsonl_carry_identical_values() {
    let dir = tempfile::tempdir().unwrap();
    let seeds = dir.path().join("seeds.txt");
    std::fs::write(&seeds, "11\n12\n").unwrap();
    let common = [
        "bench",
        "--bench",
        "stack",
        "--algo",
        "native",
        "--threads",
        "1",
        "--mode",
        "ops",
        "--ops",
        "300",
        "--seeds",
    ];
    let csv_out = dir.path().join("out.csv");
    let json_out = dir.path().join("out.jsonl");
    let mut a: Vec<&str> = common.to_vec();
    a.extend([seeds.to_str().unwrap(), "--out", csv_out.to_str().unwrap()]);
    assert_eq!(cascm(&a).status.code(), Some(0));
    let mut b: Vec<&str> = common.to_vec();
    b.extend([
        seeds.to_str().unwrap(),
        "--format",
        "jsonl",
        "--out",
        json_out.to_str().unwrap(),
    ]);
    assert_eq!(cascm(&b).status.code(), Some(0));

    let mut rdr = csv::Reader::from_path(&csv_out).unwrap();
    let headers = rdr.headers().unwrap().clone();
    let csv_rows: Vec<_> = rdr.records().map(|r| r.unwrap()).collect();
    let json_text = std::fs::read_to_string(&json_out).unwrap();
    let json_rows: Vec<serde_json::Value> = json_text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(csv_rows.len(), 2);
    assert_eq!(json_rows.len(), 2);
    for (c, j) in csv_rows.iter().zip(&json_rows) {
        assert_eq!(j.as_object().unwrap().len(), headers.len());
        for (name, field) in headers.iter().zip(c.iter()) {
            let v = &j[name];
            // Wall time differs between the two invocations.
            if matches!(name, "wall_time_s" | "throughput") {
                continue;
            }
            let text = match v {
                serde_json::Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            assert_eq!(text, field, "column {name}");
        }
    }
    assert_eq!(&csv_rows[0][4], "11");
    assert_eq!(&csv_rows[1][4], "12");
}

#[test]
fn usage_errors_exit_2() {
    let cases: &[&[&str]] = &[
        &["verify", "--suite", "nope"],
        &["bench", "--algo", "bogus"],
        &["bench", "--threads", "4..1"],
        &["bench", "--mode", "timed", "--ops", "5"],
        &["bench", "--seed", "1", "--seeds", "x"],
        &["bench", "--max-wait-ms", "-1"],
        &["tune", "--algo", "exp", "--grid-param", "nope=1"],
        &["frobnicate"],
    ];
    for args in cases {
        assert_eq!(cascm(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn runtime_errors_exit_1() {
    let o = cascm(&[
        "bench",
        "--mode",
        "ops",
        "--ops",
        "1",
        "--out",
        "/nonexistent/dir/x.csv",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn tune_logs_one_measurement_per_point_and_level() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("grid.csv");
    std::fs::write(&grid, "c,m\n1,10\n8,24\n9,27\n").unwrap();
    let o = cascm(&[
        "tune",
        "--algo",
        "exp",
        "--grid",
        grid.to_str().unwrap(),
        "--threads",
        "1..2",
        "--mode",
        "ops",
        "--ops",
        "200",
        "--seed",
        "3",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let log = String::from_utf8(o.stderr.clone()).unwrap();
    assert_eq!(log.lines().filter(|l| l.starts_with("measure ")).count(), 6);
    let preset: toml::Table = stdout(&o).parse().unwrap();
    assert!(preset["exp"]["c"].as_integer().is_some());
}

#[test]
fn tune_single_point_is_echoed() {
    let o = cascm(&[
        "tune",
        "--algo",
        "mcs",
        "--preset",
        "i7",
        "--grid-param",
        "num_ops=77",
        "--mode",
        "ops",
        "--ops",
        "100",
        "--seed",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let preset: toml::Table = stdout(&o).parse().unwrap();
    let t = &preset["mcs"];
    assert_eq!(t["num_ops"].as_integer(), Some(77));
    assert_eq!(t["contention_threshold"].as_integer(), Some(8));
    assert_eq!(t["max_wait_ms"].as_float(), Some(7.5));
}

#[test]
fn verify_targeted_suite() {
    let o = cascm(&[
        "verify",
        "--quick",
        "--policy",
        "mcs",
        "--suite",
        "bounded-wait",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 1);
    assert!(out.starts_with("PASS bounded-wait mcs"), "{out}");
}
