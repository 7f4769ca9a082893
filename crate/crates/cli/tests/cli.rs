use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ciu_core::report::{ExplanationDocument, Method, Record};

fn ciu(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ciu")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = ciu(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn fails(args: &[&str]) -> String {
    let out = ciu(args);
    assert!(!out.status.success(), "{args:?} should fail");
    String::from_utf8(out.stderr).unwrap()
}

fn small_titanic(dir: &Path) -> String {
    let model = dir.join("titanic.model");
    let stdout = ok(&["train", "--data", "titanic", "--trees", "30", "--out", model.to_str().unwrap()]);
    assert!(stdout.contains("test accuracy: 0."), "{stdout}");
    model.to_string_lossy().into_owned()
}

fn json(doc: &str) -> ExplanationDocument {
    ExplanationDocument::from_json(doc).unwrap()
}

#[test]
fn explain_titanic_concepts() {
    let tmp = tempfile::tempdir().unwrap();
    let model = small_titanic(tmp.path());
    let args = ["explain", "--model", &model, "--instance", "johnny_d", "--voc", "titanic", "--class", "survived", "--budget", "500", "--emit", "json"];
    let doc = json(&ok(&args));
    assert_eq!(doc.output.name, "yes");
    assert_eq!(doc.records.len(), 5);
    assert_eq!(doc.method, Method::Ciu);

    let by_name = json(&ok(&[&args[..7], &["--class", "yes", "--budget", "500", "--emit", "json"]].concat()));
    assert_eq!(by_name, doc);
    let by_index = json(&ok(&[&args[..7], &["--class", "1", "--budget", "500", "--emit", "json"]].concat()));
    assert_eq!(by_index, doc);
}

#[test]
fn baseline_zero_gives_non_negative_influence() {
    let tmp = tempfile::tempdir().unwrap();
    let model = small_titanic(tmp.path());
    let doc = json(&ok(&[
        "explain", "--model", &model, "--instance", "johnny_d", "--voc", "titanic", "--class", "yes", "--baseline", "0.0", "--influence", "--budget", "500", "--emit", "json",
    ]));
    assert_eq!(doc.method, Method::Influence);
    for r in &doc.records {
        let Record::Ciu(c) = r else { panic!("CIU records expected") };
        assert_eq!(c.baseline, 0.0);
        assert_eq!(c.influence, c.ci * c.cu);
        assert!(c.influence >= 0.0);
    }
}

#[test]
fn drilldown_writes_all_renderings() {
    let tmp = tempfile::tempdir().unwrap();
    let model = small_titanic(tmp.path());
    let out = tmp.path().join("out");
    let text = ok(&[
        "drilldown", "--model", &model, "--instance", "johnny_d", "--voc", "titanic", "--concept", "WEALTH", "--concept", "FAMILY", "--budget", "500", "--out", out.to_str().unwrap(),
    ]);
    assert!(text.contains("Details of WEALTH:") && text.contains("Details of FAMILY:"), "{text}");
    for ext in ["json", "txt", "svg", "bars.json"] {
        assert!(out.join(format!("explanation.{ext}")).exists(), "{ext}");
    }
    let doc = json(&fs::read_to_string(out.join("explanation.json")).unwrap());
    assert_eq!(doc.render.drilldown_path, ["WEALTH", "FAMILY"]);
    let svg = fs::read_to_string(out.join("explanation.svg")).unwrap();
    assert!(svg.starts_with("<svg") && !svg.contains("<script"));
}

#[test]
fn vocabulary_is_found_through_config_dir() {
    let tmp = tempfile::tempdir().unwrap();
    let model = small_titanic(tmp.path());
    let config = tmp.path().join("config");
    fs::create_dir(&config).unwrap();
    fs::write(config.join("pairs.voc"), "CLASS_FARE = [1, 6]\nKIN = [4, 5]\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_ciu"))
        .args(["explain", "--model", &model, "--instance", "johnny_d", "--voc", "pairs", "--budget", "300", "--emit", "json"])
        .env("CIU_CONFIG_DIR", &config)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = json(&String::from_utf8(out.stdout).unwrap());
    let names: Vec<&str> = doc.records.iter().map(|r| r.name()).collect();
    assert!(names.contains(&"CLASS_FARE") && names.contains(&"KIN"), "{names:?}");
}

#[test]
fn instances_from_rows_and_values_agree() {
    let tmp = tempfile::tempdir().unwrap();
    let model = tmp.path().join("cars.model");
    ok(&["train", "--data", "cars", "--trees", "30", "--all-rows", "--out", model.to_str().unwrap()]);
    let csv = tmp.path().join("cars.csv");
    fs::write(&csv, ciu_core::fixtures::CARS_CSV).unwrap();
    let m = model.to_str().unwrap();
    let common = ["--voc", "cars", "--class", "vgood", "--budget", "500", "--emit", "json"];
    let named = json(&ok(&[&["explain", "--model", m, "--instance", "car1098"][..], &common].concat()));
    let row = json(&ok(&[&["explain", "--model", m, "--instance", "row:1098", "--data", csv.to_str().unwrap()][..], &common].concat()));
    let values = json(&ok(&[&["explain", "--model", m, "--instance", "med,med,2,4,big,high"][..], &common].concat()));
    assert_eq!(named.records, row.records);
    assert_eq!(named.records, values.records);
    let names: Vec<&str> = named.records.iter().map(|r| r.name()).collect();
    assert_eq!(names.len(), 2);
}

#[test]
fn shapley_groups_by_vocabulary() {
    let tmp = tempfile::tempdir().unwrap();
    let model = small_titanic(tmp.path());
    let doc = json(&ok(&[
        "shapley", "--model", &model, "--instance", "johnny_d", "--background", "titanic", "--voc", "titanic", "--class", "yes", "--permutations", "200", "--emit", "json",
    ]));
    assert_eq!(doc.method, Method::Shapley);
    assert_eq!(doc.records.len(), 5);
    let total: f64 = doc
        .records
        .iter()
        .map(|r| match r {
            Record::Attribution(a) => a.value,
            Record::Ciu(_) => unreachable!(),
        })
        .sum();
    // Permutation estimates are exactly efficient for each sampled row.
    assert!((doc.baseline + total - doc.prediction).abs() < 0.1, "{} + {total} vs {}", doc.baseline, doc.prediction);
}

#[test]
fn game_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("pairs.game");
    fs::write(&path, "n_players=3\n0 0\n1 0\n2 0\n4 0\n3 1\n5 1\n6 1\n7 1\n").unwrap();
    let g = path.to_str().unwrap();
    assert_eq!(ok(&["game", "dividends", "--in", g]), "n_players=3\n1 0\n2 0\n3 1\n4 0\n5 1\n6 1\n7 -2\n");
    let props = ok(&["game", "properties", "--in", g]);
    assert!(props.contains("monotonic: true") && props.contains("convex: false"), "{props}");
    let core = ok(&["game", "core", "--in", g, "--payoff", "0.3333333333333333,0.3333333333333333,0.3333333333333334"]);
    assert_eq!(core, "imputation: true\ncore: false\n");
    let shapley = ok(&["game", "shapley", "--in", g]);
    assert_eq!(shapley.lines().count(), 3);
    assert_eq!(ok(&["game", "induced", "--in", g, "--partition", "0,1;2"]), "n_players=2\n0 0\n1 1\n2 0\n3 1\n");
    let u = ok(&["game", "unanimity", "--players", "0,2", "--n", "3"]);
    assert_eq!(u.lines().filter(|l| l.ends_with(" 1")).count(), 2);
}

#[test]
fn errors_are_reported_on_stderr() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("none.model");
    let err = fails(&["explain", "--model", missing.to_str().unwrap(), "--instance", "johnny_d"]);
    assert!(err.starts_with("error: cannot read or write model file"), "{err}");

    let model = small_titanic(tmp.path());
    let err = fails(&["explain", "--model", &model, "--instance", "johnny_d", "--class", "maybe"]);
    assert!(err.starts_with("error: unknown class `maybe`"), "{err}");
    let err = fails(&["explain", "--model", &model, "--instance", "johnny_d", "--voc", "nowhere"]);
    assert!(err.starts_with("error: vocabulary `nowhere` not found"), "{err}");
    let err = fails(&["explain", "--model", &model, "--instance", "1st,male"]);
    assert!(err.starts_with("error:"), "{err}");

    let bad = tmp.path().join("cycle.voc");
    fs::write(&bad, "A = [B]\nB = [A]\n").unwrap();
    let err = fails(&["explain", "--model", &model, "--instance", "johnny_d", "--voc", bad.to_str().unwrap()]);
    assert!(err.contains("cycle"), "{err}");

    let err = fails(&["explain", "--no-such-flag"]);
    assert!(err.contains("--no-such-flag"), "{err}");
    let game = tmp.path().join("bad.game");
    fs::write(&game, "n_players=2\n0 1\n").unwrap();
    assert!(fails(&["game", "dividends", "--in", game.to_str().unwrap()]).starts_with("error:"));
}
