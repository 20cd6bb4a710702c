use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value as Json;

use sheaflens_cli::ProblemFile;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sheaflens")).args(args).output().expect("binary runs")
}

fn run_json(args: &[&str]) -> Json {
    let mut all = args.to_vec();
    all.push("--json");
    let out = run(&all);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn num(v: &Json) -> f64 {
    match v {
        Json::String(s) if s == "inf" => f64::INFINITY,
        v => v.as_f64().expect("number"),
    }
}

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-9
}

fn diagnostic(out: &Output) -> Json {
    serde_json::from_slice(&out.stderr).expect("stderr is a JSON diagnostic")
}

#[test]
fn radius_of_the_worked_example() {
    for (r, scale) in [("r0.5", 0.5), ("r1", 1.0), ("r2", 2.0)] {
        let path = fixture(&format!("abc_{r}.json"));
        // the largest restriction is X → {A,B}, scaled by 2r, or the identity {A,C} → {A}
        let k = f64::max(2.0 * scale, 1.0);
        let report = run_json(&["radius", "--extend", path.to_str().unwrap()]);
        assert!(close(num(&report["consistency_radius"]), 2.0 / 3.0));
        assert!(close(num(&report["lipschitz"]), k));
        assert!(close(num(&report["section_lower_bound"]), 2.0 / 3.0 / (1.0 + k)));
        let mut t: Vec<f64> = report["thresholds"].as_array().unwrap().iter().map(|t| num(&t["value"])).collect();
        t.sort_by(f64::total_cmp);
        for (got, want) in t.iter().zip([1.0 / 6.0, 0.5, 0.5, 2.0 / 3.0, 2.0 / 3.0]) {
            assert!(close(*got, want), "{r}: {t:?}");
        }
        assert_eq!(t.len(), 5);
        assert!(close(num(&report["extension"]["values"]["{A}"][0]), 0.5));
        assert_eq!(report["extension"]["support"], serde_json::json!(["{A,B}", "{A,C}"]));
    }
}

#[test]
fn global_section_has_radius_zero() {
    let report = run_json(&["radius", fixture("abc_section.json").to_str().unwrap()]);
    assert_eq!(num(&report["consistency_radius"]), 0.0);
    assert_eq!(num(&report["diameter"]), 0.0);
}

#[test]
fn partial_assignment_needs_extend() {
    let out = run(&["radius", fixture("abc_r1.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(diagnostic(&out)["error"], "partial_assignment");
    assert!(out.stdout.is_empty());
}

#[test]
fn filtration_of_the_worked_example() {
    let report = run_json(&["filtration", "--extend", "--persist", fixture("abc_r1.json").to_str().unwrap()]);
    let bp: Vec<f64> = report["breakpoints"].as_array().unwrap().iter().map(num).collect();
    assert_eq!(bp.len(), 2);
    assert!(close(bp[0], 0.5) && close(bp[1], 2.0 / 3.0));
    let members: Vec<&Json> = report["covers"].as_array().unwrap().iter().map(|c| &c["members"]).collect();
    assert_eq!(
        members,
        [&serde_json::json!([["A"]]), &serde_json::json!([["A", "B"], ["A", "C"]]), &serde_json::json!([["A", "B", "C"]])]
    );
    for c in report["covers"].as_array().unwrap() {
        assert_eq!(c["ranks"], serde_json::json!([1, 0]));
    }
    let bars = report["barcode"].as_array().unwrap();
    assert_eq!(bars.len(), 1);
    assert_eq!((bars[0]["degree"].as_u64(), &bars[0]["death"]), (Some(0), &Json::from("inf")));
}

#[test]
fn constant_sheaf_has_a_single_cover() {
    let report = run_json(&["filtration", fixture("constant.json").to_str().unwrap()]);
    assert_eq!(report["breakpoints"], serde_json::json!([]));
    assert_eq!(report["covers"][0]["members"], serde_json::json!([["a", "b", "c"]]));
}

#[test]
fn two_chain_breaks_at_its_top_radius() {
    let report = run_json(&["filtration", fixture("two_chain.json").to_str().unwrap()]);
    assert_eq!(report["breakpoints"], serde_json::json!([3.0]));
}

#[test]
fn plot_data_is_csv() {
    let out = run(&["filtration", "--extend", "--plot-data", fixture("abc_r2.json").to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "degree,birth,death,multiplicity\n0,0,inf,1\n");
}

#[test]
fn point_clouds() {
    let triangle = run_json(&["pointcloud", fixture("triangle.csv").to_str().unwrap()]);
    assert_eq!(triangle["equal"], true);
    let bars: Vec<(u64, f64, f64, u64)> = triangle["pipeline"]
        .as_array()
        .unwrap()
        .iter()
        .map(|b| (b["degree"].as_u64().unwrap(), num(&b["birth"]), num(&b["death"]), b["multiplicity"].as_u64().unwrap()))
        .collect();
    assert_eq!(bars.len(), 3);
    assert_eq!((bars[0].0, bars[0].2, bars[0].3), (0, 0.5, 2));
    assert_eq!((bars[1].0, bars[1].2, bars[1].3), (0, f64::INFINITY, 1));
    assert!(bars[2].0 == 1 && close(bars[2].1, 0.5) && close(bars[2].2, 1.0 / 3f64.sqrt()));
    for row in triangle["cross_check"].as_array().unwrap() {
        assert!(close(num(&row["ball_radius"]), num(&row["local_radius"])));
    }

    let pair = run_json(&["pointcloud", fixture("pair.csv").to_str().unwrap()]);
    assert_eq!(pair["pipeline"], serde_json::json!([
        {"degree": 0, "birth": 0.0, "death": 1.0, "multiplicity": 1},
        {"degree": 0, "birth": 0.0, "death": "inf", "multiplicity": 1},
    ]));
    let single = run_json(&["pointcloud", fixture("single.csv").to_str().unwrap()]);
    assert_eq!(single["pipeline"], serde_json::json!([{"degree": 0, "birth": 0.0, "death": "inf", "multiplicity": 1}]));
    assert_eq!(single["oracle"], single["pipeline"]);
}

#[test]
fn point_clouds_from_json_and_caps() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pair.json");
    std::fs::write(&path, r#"{"points": [[0, 0], [2, 0]]}"#).unwrap();
    let report = run_json(&["pointcloud", path.to_str().unwrap()]);
    assert_eq!(report["points"], 2);

    let out = run(&["pointcloud", "--cap", "2", fixture("triangle.csv").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(diagnostic(&out)["error"], "cap_exceeded");

    let ragged = dir.path().join("ragged.csv");
    std::fs::write(&ragged, "0,0\n1\n").unwrap();
    assert_eq!(run(&["pointcloud", ragged.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn interleaving() {
    let a = fixture("abc_total.json");
    let same = run_json(&["interleave", a.to_str().unwrap(), a.to_str().unwrap()]);
    assert_eq!(num(&same["interleaving_bound"]), 0.0);
    assert_eq!(same["bottleneck"], serde_json::json!([0.0, 0.0]));

    let b = fixture("abc_total_perturbed.json");
    let moved = run_json(&["interleave", a.to_str().unwrap(), b.to_str().unwrap()]);
    let bound = num(&moved["interleaving_bound"]);
    assert!(bound <= 0.15 + 1e-9, "{bound}");
    assert_eq!(moved["stable"], true);

    let out = run(&["interleave", a.to_str().unwrap(), fixture("two_chain.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(5));
    assert_eq!(diagnostic(&out)["error"], "space_mismatch");
}

#[test]
fn schema_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("not json", "{"),
        ("wrong version", r#"{"version": "sheaflens/9", "sheaf": {}}"#),
        ("unknown field", r#"{"version": "sheaflens/1", "sheaf": {}, "extra": 1}"#),
        ("no space", r#"{"version": "sheaflens/1", "sheaf": {}}"#),
    ];
    for (name, text) in cases {
        let path = dir.path().join(format!("{name}.json"));
        std::fs::write(&path, text).unwrap();
        let out = run(&["radius", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2), "{name}");
        assert_eq!(diagnostic(&out)["error"], "schema", "{name}");
    }
    let out = run(&["radius", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(diagnostic(&out)["error"], "io");
}

#[test]
fn exact_output_uses_dyadic_pairs() {
    let report = run_json(&["radius", "--exact", fixture("two_chain.json").to_str().unwrap()]);
    assert_eq!(report["consistency_radius"], serde_json::json!([3, 1]));
    assert_eq!(report["section_lower_bound"], serde_json::json!([3, 2]));
}

#[test]
fn rational_field_agrees_on_the_worked_example() {
    let path = fixture("abc_r1.json");
    let f2 = run_json(&["filtration", "--extend", "--persist", "--field", "f2", path.to_str().unwrap()]);
    let q = run_json(&["filtration", "--extend", "--persist", "--field", "q", path.to_str().unwrap()]);
    assert_eq!(f2["barcode"], q["barcode"]);
    assert_eq!(q["field"], "q");
}

#[test]
fn thread_count_from_the_environment() {
    let bin = env!("CARGO_BIN_EXE_sheaflens");
    let path = fixture("triangle.csv");
    let ok = Command::new(bin).env("SHEAFLENS_THREADS", "1").args(["pointcloud", path.to_str().unwrap()]).output().unwrap();
    assert!(ok.status.success());
    let bad = Command::new(bin).env("SHEAFLENS_THREADS", "zero").args(["pointcloud", path.to_str().unwrap()]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn text_output_is_a_table() {
    let out = run(&["radius", fixture("abc_total.json").to_str().unwrap()]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("consistency radius           0.666666666667"), "{text}");
    assert!(text.contains("{A,B}  {A,B,C}  0.666666666667"), "{text}");
}

#[test]
fn fixtures_round_trip() {
    for entry in std::fs::read_dir(fixture("")).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let file = ProblemFile::read(&path).unwrap();
            let again = ProblemFile::from_json(&file.to_json()).unwrap();
            assert_eq!(file, again, "{}", path.display());
            assert_eq!(file.to_json(), again.to_json());
        }
    }
}
