use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;

use rxngraph_core::perception::{AgentClient, PromptSet, RecorderBackend};
use rxngraph_core::pipeline::{Pipeline, PipelineConfig};
use serde_json::Value;

const FIG_DOC: &str = include_str!("../../core/tests/data/fig_document.json");
const FIG_RX: &str = include_str!("../../core/tests/data/fig_reactions.json");

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rxngraph"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes the figure document and records combiner fixtures that answer with the figure reactions.
fn fig_setup(dir: &Path) -> (PathBuf, PathBuf) {
    let doc = dir.join("fig.json");
    std::fs::write(&doc, FIG_DOC).unwrap();
    let fx = dir.join("fixtures");
    let rec = RecorderBackend::new(&fx, |_, _| FIG_RX.to_string());
    let client = AgentClient::new(PromptSet::builtin(), Arc::new(rec));
    Pipeline::with_client(PipelineConfig::default(), client)
        .unwrap()
        .parse_bytes(FIG_DOC.as_bytes())
        .unwrap();
    (doc, fx)
}

fn sorted_items(v: &Value) -> Vec<String> {
    let mut out: Vec<String> = v.as_array().unwrap().iter().map(|x| x.to_string()).collect();
    out.sort();
    out
}

#[test]
fn parse_fig_document_matches_example() {
    let dir = tempfile::tempdir().unwrap();
    let (doc, fx) = fig_setup(dir.path());
    let out = dir.path().join("out");
    let o = run(&["parse", s(&doc), "--fixtures_dir", s(&fx), "--output-dir", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let got: Value = serde_json::from_slice(&std::fs::read(out.join("fig.reactions.json")).unwrap()).unwrap();
    let want: Value = serde_json::from_str(FIG_RX).unwrap();
    assert_eq!(sorted_items(&got), sorted_items(&want));
    let manifest: Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["documents"][0]["status"], "ok");
    for stage in ["load", "plan", "reason", "emit"] {
        assert!(manifest["documents"][0]["stages"][stage].is_number(), "{stage}");
    }
}

#[test]
fn empty_detection_file_gives_empty_array() {
    let dir = tempfile::tempdir().unwrap();
    let doc = dir.path().join("empty.json");
    std::fs::write(&doc, "").unwrap();
    let out = dir.path().join("out");
    let o = run(&["parse", s(&doc), "--output_dir", s(&out)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(out.join("empty.reactions.json")).unwrap(), "[]\n");
}

#[test]
fn missing_fixture_fails_the_document() {
    let dir = tempfile::tempdir().unwrap();
    let doc = dir.path().join("fig.json");
    std::fs::write(&doc, FIG_DOC).unwrap();
    let fx = dir.path().join("nothing");
    std::fs::create_dir(&fx).unwrap();
    let out = dir.path().join("out");
    let o = run(&["parse", s(&doc), "--fixtures_dir", s(&fx), "--output_dir", s(&out)]);
    assert_eq!(o.status.code(), Some(4));
    let manifest: Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["documents"][0]["status"], "failed");
    assert_eq!(manifest["documents"][0]["error_class"], "FixtureMissing");
}

#[test]
fn partial_batch_and_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let (doc, fx) = fig_setup(dir.path());
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "[1, 2]").unwrap();
    let out = dir.path().join("out");
    let o = run(&["parse", s(&doc), s(&bad), "--fixtures_dir", s(&fx), "--output_dir", s(&out)]);
    assert_eq!(o.status.code(), Some(2));

    let o = run(&["parse", s(&doc), "--tau_fuse", "1.5"]);
    assert_eq!(o.status.code(), Some(3));
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "no_such_key = 1\n").unwrap();
    let o = run(&["--config", s(&cfg), "parse", s(&doc)]);
    assert_eq!(o.status.code(), Some(3));
    let o = run(&["parse", "--bogus"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let (doc, fx) = fig_setup(dir.path());
    let cfg = dir.path().join("c.toml");
    let file_out = dir.path().join("from_file");
    let flag_out = dir.path().join("from_flag");
    std::fs::write(
        &cfg,
        format!("output_dir = {:?}\nfixtures_dir = {:?}\n", s(&file_out), s(&fx)),
    )
    .unwrap();
    let o = run(&["--config", s(&cfg), "parse", s(&doc), "--output_dir", s(&flag_out)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(flag_out.join("manifest.json").is_file());
    assert!(!file_out.exists());
}

fn corpus(docs: &[(&str, &str, &str)]) -> String {
    let items: Vec<String> = docs
        .iter()
        .map(|(id, layout, rx)| format!(r#"{{"id": "{id}", "layout": "{layout}", "reactions": {rx}}}"#))
        .collect();
    format!(r#"{{"documents": [{}]}}"#, items.join(","))
}

#[test]
fn eval_reports() {
    let dir = tempfile::tempdir().unwrap();
    let gt = dir.path().join("gt.json");
    let layouts = ["single_line", "multiple_line", "tree", "graph"];
    let docs: Vec<(&str, &str, &str)> = layouts.iter().map(|l| (*l, *l, FIG_RX)).collect();
    std::fs::write(&gt, corpus(&docs)).unwrap();
    let out = dir.path().join("rep");
    let o = run(&["eval", "--gt", s(&gt), "--pred", s(&gt), "--output_dir", s(&out), "--per_layout", "true"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let reports: Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(reports.as_array().unwrap().len(), 2);
    for r in reports.as_array().unwrap() {
        assert_eq!(r["f1"], 1.0);
    }
    let table = String::from_utf8(o.stdout).unwrap();
    for l in layouts {
        assert_eq!(table.lines().filter(|x| x.starts_with(l)).count(), 1, "{table}");
    }

    // prediction with one condition box removed
    let mut pred: Value = serde_json::from_str(FIG_RX).unwrap();
    pred[0]["conditions"].as_array_mut().unwrap().pop();
    let pred_rx = pred.to_string();
    let pred_file = dir.path().join("pred.json");
    std::fs::write(&pred_file, corpus(&[("single_line", "single_line", &pred_rx)])).unwrap();
    let gt1 = dir.path().join("gt1.json");
    std::fs::write(&gt1, corpus(&[("single_line", "single_line", FIG_RX)])).unwrap();
    let o = run(&["eval", "--gt", s(&gt1), "--pred", s(&pred_file), "--output_dir", s(&out)]);
    assert_eq!(o.status.code(), Some(0));
    let reports: Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    let f1 = |c: &str| {
        reports
            .as_array()
            .unwrap()
            .iter()
            .find(|r| r["criterion"] == c)
            .unwrap()["f1"]
            .as_f64()
            .unwrap()
    };
    assert_eq!(f1("soft"), 1.0);
    assert!(f1("hard") < f1("soft"));
}

#[test]
fn render_is_stable_and_checks_references() {
    let dir = tempfile::tempdir().unwrap();
    let doc = dir.path().join("fig.json");
    std::fs::write(&doc, FIG_DOC).unwrap();
    let rx = dir.path().join("rx.json");
    std::fs::write(&rx, FIG_RX).unwrap();
    let a = run(&["render", s(&doc), s(&rx)]);
    let b = run(&["render", s(&doc), s(&rx)]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let svg = String::from_utf8(a.stdout).unwrap();
    assert_eq!(svg.matches("<g class=\"reaction\"").count(), 2);
    let empty = dir.path().join("none.json");
    std::fs::write(&empty, "[]").unwrap();
    let svg_path = dir.path().join("x.svg");
    let o = run(&["render", s(&doc), s(&empty), "-o", s(&svg_path)]);
    assert_eq!(o.status.code(), Some(0));
    let svg = std::fs::read_to_string(&svg_path).unwrap();
    assert!(!svg.contains("class=\"reaction\""));
    let far = dir.path().join("far.json");
    std::fs::write(&far, r#"[{"reactants": [{"label": "molecule", "bbox": [1, 1, 2, 2]}], "products": [], "conditions": [], "arrow": []}]"#).unwrap();
    assert_eq!(run(&["render", s(&doc), s(&far)]).status.code(), Some(4));
}

#[test]
fn plan_examples() {
    let dir = tempfile::tempdir().unwrap();
    let doc = dir.path().join("fig.json");
    std::fs::write(&doc, FIG_DOC).unwrap();
    let o = run(&["plan", s(&doc), "--query", "extract all reactions"]);
    assert_eq!(
        String::from_utf8(o.stdout).unwrap().trim(),
        r#"{"plan":{"molecule_expert":true,"arrow_expert":true,"text_expert":true,"reaction_expert":true}}"#
    );
    let o = run(&["plan", s(&doc), "--query", "convert molecule to SMILES"]);
    assert_eq!(
        String::from_utf8(o.stdout).unwrap().trim(),
        r#"{"plan":{"molecule_expert":true,"arrow_expert":false,"text_expert":false,"reaction_expert":false}}"#
    );
}

#[test]
fn debug_commands() {
    let o = run(&["fingerprint", "CCO"]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["counts"]["C"], 2);
    assert_eq!(v["width"], 2048);
    assert_eq!(run(&["fingerprint", "C1CC"]).status.code(), Some(4));

    let dir = tempfile::tempdir().unwrap();
    let (doc, fx) = fig_setup(dir.path());
    let o = run(&["score-edge", s(&doc), "m1", "a1", "--fixtures_dir", s(&fx)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let typed = v["edges"].as_array().unwrap().iter().find(|e| e["type"] == 5).unwrap();
    assert_eq!(typed["s_init"], 1.0);
}
