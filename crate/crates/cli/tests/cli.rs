use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use histif_core::fixtures::{ORDER_CSV, ORDER_SCHEMA_JSON, U1, U1_PRIME, U2, U3};

fn histif(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_histif"))
        .arg("--data-dir")
        .arg(dir.join("data"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p: PathBuf = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

/// Loads the order table and its three-statement history.
fn loaded() -> tempfile::TempDir {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let schema = write(d, "schema.json", ORDER_SCHEMA_JSON);
    let csv = write(d, "Order.csv", ORDER_CSV);
    let hist = write(d, "history.sql", &format!("{U1}\n{U2}\n{U3}\n"));
    let o = histif(d, &["load", "--schema", &schema, "--csv", &csv, "--history", &hist]);
    stdout(&o);
    tmp
}

fn running_mods(d: &Path) -> String {
    write(
        d,
        "mods.json",
        &format!(r#"[{{"op": "replace", "pos": 1, "statement": "{U1_PRIME}"}}]"#),
    )
}

#[test]
fn running_example_end_to_end() {
    let tmp = loaded();
    let d = tmp.path();
    let mods = running_mods(d);
    let out = stdout(&histif(d, &["whatif", "--mods", &mods]));
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(
        lines,
        [
            "# relation: Order",
            "sign,ID,Customer,Country,Price,ShippingFee",
            "-,12,Alex,UK,50,5",
            "+,12,Alex,UK,50,10",
        ]
    );
}

#[test]
fn every_method_prints_the_same_bytes() {
    let tmp = loaded();
    let d = tmp.path();
    let mods = running_mods(d);
    let naive = stdout(&histif(d, &["whatif", "--mods", &mods, "--method", "naive"]));
    for m in ["r", "r+ds", "r+ps", "r+ps+ds"] {
        let got = stdout(&histif(d, &["whatif", "--mods", &mods, "--method", m, "--slicer", "greedy"]));
        assert_eq!(got, naive, "{m}");
    }
    let json = stdout(&histif(d, &["whatif", "--mods", &mods, "--format", "json"]));
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 2);
}

#[test]
fn report_and_output_files() {
    let tmp = loaded();
    let d = tmp.path();
    let mods = running_mods(d);
    let out = d.join("delta.csv");
    let report = d.join("report.json");
    let o = histif(
        d,
        &[
            "whatif",
            "--mods",
            &mods,
            "--out",
            out.to_str().unwrap(),
            "--report",
            report.to_str().unwrap(),
            "--dump-slices",
        ],
    );
    assert!(stdout(&o).is_empty());
    assert!(String::from_utf8_lossy(&o.stderr).contains("slice kept [1, 2] removed [3]"));
    assert!(fs::read_to_string(out).unwrap().contains("+,12,Alex,UK,50,10"));
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(r["method"], "r+ps+ds");
    assert_eq!(r["delta_rows"], 2);
}

#[test]
fn empty_modifications_give_an_empty_delta() {
    let tmp = loaded();
    let d = tmp.path();
    let mods = write(d, "none.json", "[]");
    assert_eq!(stdout(&histif(d, &["whatif", "--mods", &mods])), "");
}

#[test]
fn load_then_dump_is_byte_identical() {
    let tmp = loaded();
    let d = tmp.path();
    assert_eq!(stdout(&histif(d, &["dump", "Order", "--at", "0"])), ORDER_CSV);
    let last = stdout(&histif(d, &["dump", "Order"]));
    assert!(last.contains("12,Alex,UK,50,5\n"));
    let o = histif(d, &["dump", "Order", "--at", "7"]);
    assert_eq!(o.status.code(), Some(2));
    let o = histif(d, &["dump", "Nope"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn empty_csv_loads_an_empty_relation() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let schema = write(d, "schema.json", ORDER_SCHEMA_JSON);
    let csv = write(d, "empty.csv", "ID,Customer,Country,Price,ShippingFee\n");
    stdout(&histif(d, &["load", "--schema", &schema, "--csv", &format!("Order={csv}")]));
    assert_eq!(
        stdout(&histif(d, &["dump", "Order"])),
        "ID,Customer,Country,Price,ShippingFee\n"
    );
}

#[test]
fn bad_inputs_fail_with_a_message() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let schema = write(d, "schema.json", ORDER_SCHEMA_JSON);
    let csv = write(d, "Order.csv", "ID,Customer,Country,Price,ShippingFee\n11,Susan,UK,twenty,5\n");
    let o = histif(d, &["load", "--schema", &schema, "--csv", &csv]);
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("row 2") && err.contains("Price"), "{err}");

    let tmp = loaded();
    let d = tmp.path();
    let mods = write(d, "bad.json", r#"[{"op": "replace", "pos": 9, "statement": "DELETE FROM Order WHERE Price > 1"}]"#);
    assert_eq!(histif(d, &["whatif", "--mods", &mods]).status.code(), Some(3));
    let mods = running_mods(d);
    assert_eq!(histif(d, &["whatif", "--mods", &mods, "--method", "fast"]).status.code(), Some(2));
}

#[test]
fn bench_prints_a_row_per_cell_and_method() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let spec = write(d, "spec.json", r#"{"methods": ["all"], "U": [10, 20, 50], "size": 200, "D": 10, "reps": 1}"#);
    let out = stdout(&histif(d, &["bench", &spec]));
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 13);
    assert!(lines[0].starts_with("method,U,M,D,T,I,X,size,seed,normalize_ms"));
    let mut rdr = csv::Reader::from_reader(out.as_bytes());
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    for u in ["10", "20", "50"] {
        let deltas: Vec<&str> = rows.iter().filter(|r| &r[1] == u).map(|r| &r[16]).collect();
        assert_eq!(deltas.len(), 4);
        assert!(deltas.iter().all(|x| *x == deltas[0]), "U={u}: {deltas:?}");
    }
}
