use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use varilet::io::{field_from_json, field_to_json};

const WORKED: &str = "0\n2\n1\n3\n0\n";

const CYCLE: &str = r#"{"vertices":[{"id":"a","value":0},{"id":"b","value":3},{"id":"c","value":1},{"id":"d","value":2.5},{"id":"e","value":-1}],
 "edges":[{"id":"ab","endpoints":["a","b"]},{"id":"bc","endpoints":["b","c"]},{"id":"cd","endpoints":["c","d"]},{"id":"da","endpoints":["d","a"]},{"id":"ce","endpoints":["c","e"]}]}"#;

fn varilet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_varilet"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        let ws = Self {
            dir: TempDir::new().unwrap(),
        };
        ws.write("worked.csv", WORKED);
        ws.write("cycle.json", CYCLE);
        ws
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn arg(&self, name: &str) -> String {
        self.path(name).to_str().unwrap().to_string()
    }

    fn write(&self, name: &str, text: &str) {
        fs::write(self.path(name), text).unwrap();
    }

    fn read(&self, name: &str) -> String {
        fs::read_to_string(self.path(name)).unwrap()
    }

    fn run(&self, args: &[&str]) -> Output {
        let owned: Vec<String> = args
            .iter()
            .map(|a| match a.strip_prefix('@') {
                Some(name) => self.arg(name),
                None => a.to_string(),
            })
            .collect();
        let refs: Vec<&str> = owned.iter().map(String::as_str).collect();
        varilet(&refs)
    }

    /// Worked-example basis with the superlevel region at 1.
    fn worked_basis(&self) {
        let out = self.run(&[
            "transform",
            "--input",
            "@worked.csv",
            "--cut",
            "1:up:3",
            "--output",
            "@basis.json",
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
    }
}

fn amplitudes(doc: &str) -> Vec<f64> {
    let v: serde_json::Value = serde_json::from_str(doc).unwrap();
    v["varilets"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x["amplitude"].as_f64().unwrap())
        .collect()
}

fn vertex_values(doc: &str) -> Vec<(String, f64)> {
    let v: serde_json::Value = serde_json::from_str(doc).unwrap();
    v["vertices"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| {
            (
                x["id"].as_str().unwrap().to_string(),
                x["value"].as_f64().unwrap(),
            )
        })
        .collect()
}

#[test]
fn ttv_of_series() {
    let ws = Workspace::new();
    let out = ws.run(&["ttv", "--input", "@worked.csv"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "8\n");

    ws.write("monotone.csv", "value\n0\n1\n");
    assert_eq!(stdout(&ws.run(&["ttv", "--input", "@monotone.csv"])), "1\n");

    ws.write("third.csv", "0\n0.3333333333333333\n0\n");
    assert_eq!(
        stdout(&ws.run(&["ttv", "--input", "@third.csv"])),
        "0.666666666667\n"
    );
}

#[test]
fn ttv_of_document() {
    let ws = Workspace::new();
    let out = ws.run(&["ttv", "--input", "@cycle.json"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout(&out), "11\n");
}

#[test]
fn malformed_input_exits_2() {
    let ws = Workspace::new();
    ws.write("bad.csv", "0\n1\nnope\n");
    let out = ws.run(&["ttv", "--input", "@bad.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));

    let out = ws.run(&["ttv", "--input", "@missing.csv"]);
    assert_eq!(out.status.code(), Some(2));

    ws.write(
        "loop.json",
        r#"{"vertices":[{"id":"a","value":0}],"edges":[{"id":"x","endpoints":["a","a"]}]}"#,
    );
    assert_eq!(ws.run(&["ttv", "--input", "@loop.json"]).status.code(), Some(2));
}

#[test]
fn transform_worked_example() {
    let ws = Workspace::new();
    let out = ws.run(&[
        "transform",
        "--input",
        "@worked.csv",
        "--cut",
        "1:up:3",
        "--output",
        "@basis.json",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let table = stdout(&out);
    let rows: Vec<Vec<&str>> = table
        .lines()
        .skip(1)
        .take(2)
        .map(|l| l.split_whitespace().collect())
        .collect();
    assert_eq!(rows[0][..2], ["1", "2"]);
    assert_eq!(rows[1][..3], ["2", "6", "1"]);
    assert!(table.contains("ttv 8"));

    let doc = ws.read("basis.json");
    assert_eq!(amplitudes(&doc), vec![2.0, 6.0]);
    let v: serde_json::Value = serde_json::from_str(&doc).unwrap();
    let g2: Vec<f64> = v["varilets"][1]["values"].as_array().unwrap()[..5]
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    assert_eq!(g2, vec![0.0, 1.0 / 6.0, 0.0, 2.0 / 6.0, 0.0]);
}

#[test]
fn transform_trivial_lens() {
    let ws = Workspace::new();
    let out = ws.run(&["transform", "--input", "@worked.csv", "--output", "@basis.json"]);
    assert!(out.status.success());
    assert_eq!(amplitudes(&ws.read("basis.json")), vec![8.0]);
}

#[test]
fn transform_is_deterministic() {
    let ws = Workspace::new();
    for name in ["one.json", "two.json"] {
        let out = ws.run(&[
            "transform",
            "--input",
            "@cycle.json",
            "--branch",
            "0",
            "--output",
            &format!("@{name}"),
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
    }
    assert_eq!(ws.read("one.json"), ws.read("two.json"));
}

#[test]
fn lens_errors_exit_3() {
    let ws = Workspace::new();
    let out = ws.run(&["transform", "--input", "@worked.csv", "--cut", "1:up:nowhere"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("nowhere"));

    // Overlapping regions that are neither nested nor disjoint.
    ws.write(
        "overlap.json",
        r#"{"kind":"regions","regions":[
            [{"edge":0,"lo":0,"hi":2},{"edge":1,"lo":0,"hi":3},{"edge":2,"lo":1,"hi":2},{"edge":3,"lo":1,"hi":3}],
            [{"edge":1,"lo":0,"hi":3}],
            [{"edge":1,"lo":1,"hi":3},{"edge":3,"lo":1,"hi":3}]]}"#,
    );
    let out = ws.run(&["transform", "--input", "@worked.csv", "--lens", "@overlap.json"]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
}

#[test]
fn filter_identity_reproduces_input() {
    let ws = Workspace::new();
    ws.worked_basis();
    let out = ws.run(&[
        "filter",
        "--input",
        "@basis.json",
        "--coeffs",
        "2,6",
        "--output",
        "@out.csv",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(ws.read("out.csv"), WORKED);

    let out = ws.run(&[
        "transform",
        "--input",
        "@cycle.json",
        "--branch",
        "0",
        "--output",
        "@cb.json",
    ]);
    assert!(out.status.success());
    let a: Vec<String> = amplitudes(&ws.read("cb.json"))
        .iter()
        .map(|x| x.to_string())
        .collect();
    let out = ws.run(&[
        "filter",
        "--input",
        "@cb.json",
        "--coeffs",
        &a.join(","),
        "--output",
        "@cout.json",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let canonical = field_to_json(&field_from_json(CYCLE).unwrap());
    assert_eq!(ws.read("cout.json"), canonical);
}

#[test]
fn filter_worked_coefficients() {
    let ws = Workspace::new();
    ws.worked_basis();
    let out = ws.run(&[
        "filter",
        "--input",
        "@basis.json",
        "--coeffs",
        "2,0",
        "--output",
        "@low.json",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let values = vertex_values(&ws.read("low.json"));
    let originals: Vec<f64> = values[..5].iter().map(|(_, v)| *v).collect();
    assert_eq!(originals, vec![0.0, 1.0, 1.0, 1.0, 0.0]);
    let ttv = ws.run(&["ttv", "--input", "@low.json"]);
    assert_eq!(stdout(&ttv), "2\n");

    let out = ws.run(&[
        "filter",
        "--input",
        "@basis.json",
        "--coeffs",
        "2,0",
        "--output",
        "@low.csv",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).contains("inserted breakpoints"));
    let samples: Vec<f64> = ws.read("low.csv").lines().map(|l| l.parse().unwrap()).collect();
    assert_eq!(samples.first(), Some(&0.0));
    assert_eq!(samples.last(), Some(&0.0));
    assert!(
        samples[1..samples.len() - 1].iter().all(|&x| x == 1.0),
        "{samples:?}"
    );
    assert_eq!(stdout(&ws.run(&["ttv", "--input", "@low.csv"])), "2\n");

    ws.write("coeffs.csv", "index,value\n2,6\n1,-2\n");
    let out = ws.run(&[
        "filter",
        "--input",
        "@basis.json",
        "--coeffs",
        "@coeffs.csv",
        "--output",
        "@flip.json",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout(&ws.run(&["ttv", "--input", "@flip.json"])), "8\n");

    let out = ws.run(&[
        "filter",
        "--input",
        "@basis.json",
        "--coeffs",
        "2,6",
        "--no-self-check",
    ]);
    assert_eq!(stdout(&out), WORKED);
}

#[test]
fn coefficient_errors_exit_4() {
    let ws = Workspace::new();
    ws.worked_basis();
    let out = ws.run(&["filter", "--input", "@basis.json", "--coeffs", "1,2,3"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr(&out).contains("expected 2"));
    let out = ws.run(&["filter", "--input", "@basis.json", "--coeffs", "1,zz"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn tampered_basis_is_rejected() {
    let ws = Workspace::new();
    ws.worked_basis();
    let doc = ws
        .read("basis.json")
        .replacen("\"amplitude\":6.0", "\"amplitude\":7.0", 1);
    ws.write("tampered.json", &doc);
    let out = ws.run(&["filter", "--input", "@tampered.json", "--coeffs", "1,1"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn verify_passes_and_reports() {
    let ws = Workspace::new();
    let out = ws.run(&[
        "verify",
        "--input",
        "@worked.csv",
        "--cut",
        "1:up:3",
        "--trials",
        "30",
        "--seed",
        "4",
        "--output",
        "@report.json",
    ]);
    assert!(out.status.success(), "{}", stdout(&out));
    let report: serde_json::Value = serde_json::from_str(&ws.read("report.json")).unwrap();
    let names: Vec<&str> = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    for name in [
        "restriction_extension",
        "link_pairs",
        "filter_quotient",
        "basis_property",
    ] {
        assert!(names.contains(&name), "{names:?}");
    }
    let again = ws.run(&[
        "verify",
        "--input",
        "@worked.csv",
        "--cut",
        "1:up:3",
        "--trials",
        "30",
        "--seed",
        "4",
    ]);
    assert_eq!(stdout(&again), stdout(&out));
}

#[test]
fn verify_with_fault_fails() {
    let ws = Workspace::new();
    for fault in ["scale-varilet", "misplace-link", "leak-gamma", "scale-amplitude"] {
        let out = ws.run(&[
            "verify",
            "--input",
            "@worked.csv",
            "--cut",
            "1:up:3",
            "--trials",
            "10",
            "--fault",
            fault,
        ]);
        assert_eq!(out.status.code(), Some(1), "{fault}: {}", stdout(&out));
        assert!(stdout(&out).contains("FAIL"));
    }
}

#[test]
fn verify_fuzz() {
    let out = varilet(&[
        "verify",
        "--fuzz",
        "4",
        "--lenses",
        "2",
        "--max-vertices",
        "40",
        "--trials",
        "10",
        "--seed",
        "9",
    ]);
    assert!(out.status.success(), "{}", stdout(&out));
    assert!(stdout(&out).contains("8 cases"));
}

#[test]
fn lens_build_round_trips() {
    let ws = Workspace::new();
    let out = ws.run(&[
        "lens-build",
        "--input",
        "@worked.csv",
        "--cut",
        "1:up:3",
        "--output",
        "@lens.json",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("2 regions"));
    let out = ws.run(&[
        "transform",
        "--input",
        "@worked.csv",
        "--lens",
        "@lens.json",
        "--output",
        "@basis.json",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(amplitudes(&ws.read("basis.json")), vec![2.0, 6.0]);

    let out = ws.run(&["lens-build", "--input", "@cycle.json", "--branch", "0"]);
    assert!(out.status.success());
    let spec: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(spec["kind"], "regions");
}

#[test]
fn plots() {
    let ws = Workspace::new();
    let out = ws.run(&["plot", "--input", "@worked.csv", "--output", "@signal.svg"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(ws.read("signal.svg").contains(r#"points="0,0 1,2 2,1 3,3 4,0""#));

    ws.write("worked.json", &{
        let ids = ["0", "1", "2", "3", "4"];
        let values = [0, 2, 1, 3, 0];
        let vertices: Vec<String> = ids
            .iter()
            .zip(values)
            .map(|(id, v)| format!(r#"{{"id":"v{id}","value":{v}}}"#))
            .collect();
        let edges: Vec<String> = (0..4)
            .map(|k| format!(r#"{{"id":"e{k}","endpoints":["v{k}","v{}"]}}"#, k + 1))
            .collect();
        format!(
            r#"{{"vertices":[{}],"edges":[{}]}}"#,
            vertices.join(","),
            edges.join(",")
        )
    });
    let out = ws.run(&["plot", "--input", "@worked.json", "--output", "@middle.svg"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(ws.read("middle.svg").matches("<line").count(), 4);

    ws.worked_basis();
    let out = ws.run(&["plot", "--input", "@basis.json", "--output", "@basis.svg"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let svg = ws.read("basis.svg");
    assert_eq!(svg.matches("<polyline").count(), 2);
    assert!(svg.contains("varilet 2 (amplitude 6)"));

    let out = ws.run(&[
        "transform",
        "--input",
        "@worked.csv",
        "--output",
        "@b.json",
        "--plot",
    ]);
    assert!(out.status.success());
    assert!(Path::new(&ws.path("b.svg")).exists());
}

#[test]
fn output_directory_is_checked_first() {
    let ws = Workspace::new();
    let out = ws.run(&[
        "transform",
        "--input",
        "@worked.csv",
        "--output",
        "@nowhere/basis.json",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).is_empty(), "work ran before the path check");
}
