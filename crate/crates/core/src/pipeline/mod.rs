//! End-to-end driver: config, per-document parse (plan, ingest, reason, emit),
//! batch runs with a manifest, evaluation and rendering.

mod config;
mod manifest;
mod svg;
pub mod synth;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde_json::{json, Value};
use thiserror::Error;

pub use config::{config_keys, Backend, CriterionSet, PipelineConfig, PlannerPolicy, Settings};
pub use manifest::{
    DocStatus, DocumentEntry, RunManifest, StatusCounts, EXIT_CONFIG, EXIT_FAILED, EXIT_OK,
    EXIT_PARTIAL,
};
pub use svg::render_svg;

use crate::chem::{fingerprint, parse_smiles, write_smiles, ChemError, FingerprintConfig};
use crate::eval::{
    align, format_table, load_corpus, score_corpus, EvalDocument, EvalError, MatchReport,
};
use crate::perception::{
    load_document, reactions_to_wire, resolve_reactions, AgentClient, AgentError, Lexicon,
    LiveBackend, MockBackend, PerceptionError, PromptSet, ReactionDocument, RESOLVE_IOU,
};
use crate::planner::{
    extract_features, plan_to_json, route, AgentPlan, Expert, PlanError, PlanningContext, Policy,
};
use crate::reaction::{wire_to_json_pretty, ConservationFlag, Reaction, WireReaction};
use crate::reasoning::{
    reason, EdgeRelation, GnnWeights, ReasoningError, ReasoningOutput, EDGE_FEATURES,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Perception(#[from] PerceptionError),
    #[error(transparent)]
    Reasoning(#[from] ReasoningError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Chem(#[from] ChemError),
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn agent_class(e: &AgentError) -> &'static str {
    match e {
        AgentError::MissingTemplate(_) => "MissingTemplate",
        AgentError::BadTemplate { .. } => "BadTemplate",
        AgentError::UnboundVariable { .. } => "UnboundVariable",
        AgentError::FixtureMissing { .. } => "FixtureMissing",
        AgentError::BackendUnavailable { .. } => "BackendUnavailable",
        AgentError::Config(_) => "AgentConfig",
        AgentError::Io(_) => "FixtureIo",
    }
}

impl PipelineError {
    /// Short class name recorded in the manifest.
    pub fn class(&self) -> &'static str {
        match self {
            PipelineError::Config(_) => "Config",
            PipelineError::Io { .. } => "Io",
            PipelineError::Perception(p) => match p {
                PerceptionError::Schema { .. } => "Schema",
                PerceptionError::Payload { .. } => "Payload",
                PerceptionError::Lexicon { .. } => "Lexicon",
                PerceptionError::ResponseFormat(_) => "ResponseFormat",
                PerceptionError::Constraint { .. } => "Constraint",
                PerceptionError::Resolution { .. } => "Resolution",
                PerceptionError::Reference { .. } => "Reference",
                PerceptionError::Agent(a) => agent_class(a),
            },
            PipelineError::Reasoning(r) => match r {
                ReasoningError::Agent(a) => agent_class(a),
                ReasoningError::Config(_) => "ReasoningConfig",
                ReasoningError::Weight(_) => "Weight",
            },
            PipelineError::Plan(p) => match p {
                PlanError::Agent(a) => agent_class(a),
                _ => "Plan",
            },
            PipelineError::Eval(_) => "Eval",
            PipelineError::Chem(_) => "Chem",
        }
    }
}

/// Result of parsing one document in memory.
#[derive(Debug, Clone)]
pub struct DocumentResult {
    pub document: ReactionDocument,
    pub plan: AgentPlan,
    pub reactions: Vec<Reaction>,
    pub wire: Vec<WireReaction>,
    pub warnings: Vec<String>,
    /// Clusters whose combiner answer could not be used.
    pub failed_clusters: usize,
    pub output: Option<ReasoningOutput>,
    pub stages: BTreeMap<String, f64>,
}

impl DocumentResult {
    pub fn status(&self) -> DocStatus {
        if self.failed_clusters > 0 {
            DocStatus::Partial
        } else {
            DocStatus::Ok
        }
    }

    /// Scores and flags that do not fit the reaction output format.
    pub fn meta_json(&self) -> Value {
        let reactions: Vec<Value> = self
            .reactions
            .iter()
            .map(|r| {
                let mut v = json!({
                    "reactants": r.reactants,
                    "products": r.products,
                    "conditions": r.conditions,
                    "arrows": r.arrows,
                    "score": r.score,
                    "conservation": r.conservation.as_str(),
                    "molecule_conditions": r.molecule_conditions,
                });
                if let ConservationFlag::Unbalanced(res) = &r.conservation {
                    v["residual"] = json!({"elements": res.elements, "charge": res.charge});
                }
                v
            })
            .collect();
        let clusters: Vec<Value> = self
            .output
            .as_ref()
            .map(|o| {
                o.trace
                    .hypotheses
                    .outcomes
                    .iter()
                    .zip(&o.trace.hypotheses.clusters)
                    .map(|(c, members)| {
                        json!({
                            "size": members.len(),
                            "reactions": c.reactions,
                            "edges": c.edges,
                            "dropped": c.dropped,
                            "error": c.error,
                        })
                    })
                    .collect()
            })
            .unwrap_or_default();
        let plan: Value =
            serde_json::from_str(&plan_to_json(&self.plan)).expect("plan json is valid");
        json!({
            "id": self.document.id,
            "plan": plan["plan"],
            "warnings": self.warnings,
            "reactions": reactions,
            "clusters": clusters,
        })
    }
}

fn elapsed_ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Loaded resources shared by every document of a run.
pub struct Pipeline {
    config: PipelineConfig,
    lexicon: Lexicon,
    weights: Arc<GnnWeights>,
    client: Option<AgentClient>,
}

impl Pipeline {
    /// Builds the lexicon, weights and agent client named in `config`.
    pub fn new(config: PipelineConfig) -> Result<Self, PipelineError> {
        let s = &config.settings;
        let prompts = match &s.prompts_dir {
            Some(dir) => PromptSet::builtin()
                .with_overrides(dir)
                .map_err(|e| PipelineError::Config(e.to_string()))?,
            None => PromptSet::builtin(),
        };
        let client = match s.backend {
            Backend::Mock => s
                .fixtures_dir
                .as_ref()
                .map(|d| AgentClient::new(prompts, Arc::new(MockBackend::new(d)))),
            Backend::Live => {
                let live = LiveBackend::new(config.live_config())
                    .map_err(|e| PipelineError::Config(e.to_string()))?;
                Some(AgentClient::new(prompts, Arc::new(live)))
            }
        };
        Pipeline::build(config, client)
    }

    /// Same as [`Pipeline::new`] with a caller-supplied agent client.
    pub fn with_client(config: PipelineConfig, client: AgentClient) -> Result<Self, PipelineError> {
        Pipeline::build(config, Some(client))
    }

    fn build(config: PipelineConfig, client: Option<AgentClient>) -> Result<Self, PipelineError> {
        config.validate()?;
        let s = &config.settings;
        let mut lexicon = Lexicon::builtin();
        if let Some(p) = &s.lexicon_file {
            lexicon.extend(&Lexicon::load(p).map_err(|e| PipelineError::Config(e.to_string()))?);
        }
        let r = &config.reasoning;
        let weights = match &s.weights_file {
            Some(p) => GnnWeights::load(p).map_err(|e| PipelineError::Config(e.to_string()))?,
            None => GnnWeights::seeded(r.dim, EDGE_FEATURES, r.layers, r.weights_seed),
        };
        if weights.dim != r.dim || weights.layers.len() != r.layers {
            return Err(PipelineError::Config(format!(
                "weights file has dim {} and {} layers; config asks for dim {} and {} layers",
                weights.dim,
                weights.layers.len(),
                r.dim,
                r.layers
            )));
        }
        Ok(Pipeline {
            config,
            lexicon,
            weights: Arc::new(weights),
            client,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    fn client(&self) -> Result<&AgentClient, PipelineError> {
        self.client
            .as_ref()
            .ok_or_else(|| PipelineError::Config("mock backend needs fixtures_dir".into()))
    }

    /// Detection bytes to a document. Blank input is an empty document.
    pub fn load(&self, bytes: &[u8]) -> Result<(ReactionDocument, Vec<String>), PipelineError> {
        let blank = bytes.iter().all(u8::is_ascii_whitespace);
        let src: &[u8] = if blank {
            br#"{"width": 1, "height": 1, "entities": []}"#
        } else {
            bytes
        };
        let loaded = load_document(src, &self.lexicon)?;
        Ok((
            loaded.document,
            loaded.warnings.iter().map(|w| w.to_string()).collect(),
        ))
    }

    pub fn plan(&self, doc: &ReactionDocument, query: &str) -> Result<AgentPlan, PipelineError> {
        let features = extract_features(doc);
        let ctx = PlanningContext::new(query);
        let plan = match self.config.settings.planner {
            PlannerPolicy::Rule => route(query, &features, &ctx, &Policy::Rule)?,
            PlannerPolicy::Vlm => route(
                query,
                &features,
                &ctx,
                &Policy::Vlm {
                    client: self.client()?,
                    fallback_to_rule: self.config.settings.planner_fallback,
                },
            )?,
        };
        Ok(plan)
    }

    /// Plan JSON for a detection file's contents.
    pub fn plan_json(&self, bytes: &[u8], query: &str) -> Result<String, PipelineError> {
        let (doc, _) = self.load(bytes)?;
        Ok(plan_to_json(&self.plan(&doc, query)?))
    }

    /// Full pass for one detection file's contents.
    pub fn parse_bytes(&self, bytes: &[u8]) -> Result<DocumentResult, PipelineError> {
        let mut stages = BTreeMap::new();
        let t = Instant::now();
        let (document, warnings) = self.load(bytes)?;
        stages.insert("load".to_string(), elapsed_ms(t));

        let t = Instant::now();
        let plan = self.plan(&document, &self.config.settings.query)?;
        stages.insert("plan".to_string(), elapsed_ms(t));

        let t = Instant::now();
        let output = if plan.contains(Expert::ReactionExpert) && !document.entities.is_empty() {
            Some(reason(
                &document,
                &self.config.reasoning,
                self.weights.clone(),
                self.client()?,
            )?)
        } else {
            None
        };
        stages.insert("reason".to_string(), elapsed_ms(t));

        let reactions = output
            .as_ref()
            .map(|o| o.reactions.clone())
            .unwrap_or_default();
        let wire = reactions_to_wire(&reactions, &document)?;
        let failed_clusters = output
            .as_ref()
            .map_or(0, |o| o.trace.hypotheses.failed_clusters());
        Ok(DocumentResult {
            document,
            plan,
            reactions,
            wire,
            warnings,
            failed_clusters,
            output,
            stages,
        })
    }

    pub fn parse_file(&self, path: &Path) -> Result<DocumentResult, PipelineError> {
        let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
        self.parse_bytes(&bytes)
    }

    /// Parses every input on a worker pool, writes outputs under `settings.output_dir`
    /// and returns the manifest, which is also written there.
    pub fn run_batch(&self, inputs: &[PathBuf]) -> Result<RunManifest, PipelineError> {
        let started = Instant::now();
        let started_unix_ms = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0);
        let out_dir = self.config.settings.output_dir.clone();
        std::fs::create_dir_all(&out_dir).map_err(|e| io_err(&out_dir, e))?;
        let stems = output_stems(inputs);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.config.settings.workers)
            .build()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        let results: Vec<(DocumentEntry, Option<EvalDocument>)> = pool.install(|| {
            inputs
                .par_iter()
                .zip(&stems)
                .map(|(input, stem)| self.run_one(input, stem, &out_dir))
                .collect()
        });
        let (entries, corpus): (Vec<DocumentEntry>, Vec<Option<EvalDocument>>) =
            results.into_iter().unzip();
        let corpus: Vec<EvalDocument> = corpus.into_iter().flatten().collect();
        let corpus_path = out_dir.join("predictions.json");
        std::fs::write(&corpus_path, corpus_json_pretty(&corpus))
            .map_err(|e| io_err(&corpus_path, e))?;
        let mut manifest = RunManifest::new(self.config.hash(), started_unix_ms, entries);
        manifest.total_ms = elapsed_ms(started);
        let path = out_dir.join("manifest.json");
        std::fs::write(&path, manifest.to_json()).map_err(|e| io_err(&path, e))?;
        Ok(manifest)
    }

    fn run_one(
        &self,
        input: &Path,
        stem: &str,
        out_dir: &Path,
    ) -> (DocumentEntry, Option<EvalDocument>) {
        let mut entry = DocumentEntry {
            input: input.display().to_string(),
            id: None,
            status: DocStatus::Failed,
            error_class: None,
            error: None,
            warnings: Vec::new(),
            reactions: 0,
            stages: BTreeMap::new(),
            outputs: Vec::new(),
        };
        let result = self.parse_file(input).and_then(|r| {
            let t = Instant::now();
            let outputs = self.emit(&r, stem, out_dir)?;
            let mut r = r;
            r.stages.insert("emit".to_string(), elapsed_ms(t));
            Ok((r, outputs))
        });
        match result {
            Ok((r, outputs)) => {
                entry.id = r.document.id.clone();
                entry.status = r.status();
                entry.warnings = r.warnings.clone();
                entry.reactions = r.reactions.len();
                entry.stages = r.stages.clone();
                entry.outputs = outputs;
                let doc = EvalDocument {
                    id: r.document.id.clone().unwrap_or_else(|| stem.to_string()),
                    layout: r.document.layout_class,
                    reactions: r.wire,
                };
                (entry, Some(doc))
            }
            Err(e) => {
                log::warn!("{}: {e}", input.display());
                entry.error_class = Some(e.class().to_string());
                entry.error = Some(e.to_string());
                (entry, None)
            }
        }
    }

    fn emit(
        &self,
        r: &DocumentResult,
        stem: &str,
        out_dir: &Path,
    ) -> Result<Vec<String>, PipelineError> {
        let mut written = Vec::new();
        let mut put = |name: String, body: String| -> Result<(), PipelineError> {
            let p = out_dir.join(&name);
            std::fs::write(&p, body).map_err(|e| io_err(&p, e))?;
            written.push(name);
            Ok(())
        };
        put(
            format!("{stem}.reactions.json"),
            wire_to_json_pretty(&r.wire),
        )?;
        let mut meta = serde_json::to_string_pretty(&r.meta_json()).expect("meta serializes");
        meta.push('\n');
        put(format!("{stem}.meta.json"), meta)?;
        if self.config.settings.render {
            put(
                format!("{stem}.svg"),
                render_svg(&r.document, &r.reactions)?,
            )?;
        }
        Ok(written)
    }

    /// Scores one entity pair of `doc` after a full reasoning pass.
    pub fn score_edge(
        &self,
        doc: &ReactionDocument,
        a: &str,
        b: &str,
    ) -> Result<EdgeReport, PipelineError> {
        let ia = doc
            .index_of(a)
            .ok_or_else(|| PerceptionError::Reference { id: a.into() })?;
        let ib = doc
            .index_of(b)
            .ok_or_else(|| PerceptionError::Reference { id: b.into() })?;
        let out = reason(
            doc,
            &self.config.reasoning,
            self.weights.clone(),
            self.client()?,
        )?;
        let fused = &out.trace.fused;
        let mut relations: Vec<EdgeLine> = fused
            .candidates()
            .iter()
            .filter(|e| (e.from == ia && e.to == ib) || (e.from == ib && e.to == ia))
            .map(|e| EdgeLine {
                from: doc.entities[e.from].id.clone(),
                to: doc.entities[e.to].id.clone(),
                relation: e.relation,
                s_space: e.s_space,
                s_chem: e.s_chem,
                s_init: e.s_init,
                s_fuse: e.s_fuse,
                retained: e.s_fuse > fused.tau(),
            })
            .collect();
        relations.sort_by(|x, y| x.relation.cmp(&y.relation).then(x.from.cmp(&y.from)));
        Ok(EdgeReport {
            s_space: out.trace.spatial.score(ia, ib),
            s_chem: out.trace.chem.score(ia, ib),
            relations,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeLine {
    pub from: String,
    pub to: String,
    pub relation: EdgeRelation,
    pub s_space: f64,
    pub s_chem: f64,
    pub s_init: f64,
    pub s_fuse: f64,
    pub retained: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeReport {
    /// None when the pair is not a spatial edge.
    pub s_space: Option<f64>,
    /// None unless both are molecules.
    pub s_chem: Option<f64>,
    pub relations: Vec<EdgeLine>,
}

impl EdgeReport {
    pub fn to_json(&self) -> Value {
        let rels: Vec<Value> = self
            .relations
            .iter()
            .map(|e| {
                json!({
                    "from": e.from, "to": e.to, "type": e.relation.code(),
                    "s_space": e.s_space, "s_chem": e.s_chem, "s_init": e.s_init,
                    "s_fuse": e.s_fuse, "retained": e.retained,
                })
            })
            .collect();
        json!({"s_space": self.s_space, "s_chem": self.s_chem, "edges": rels})
    }
}

/// File stems for outputs, suffixed `-2`, `-3`, ... on collisions.
fn output_stems(inputs: &[PathBuf]) -> Vec<String> {
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    inputs
        .iter()
        .map(|p| {
            let base = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "document".into());
            let n = seen.entry(base.clone()).or_insert(0);
            *n += 1;
            if *n == 1 {
                base
            } else {
                format!("{base}-{n}")
            }
        })
        .collect()
}

fn corpus_json_pretty(docs: &[EvalDocument]) -> String {
    let v: Value = serde_json::from_str(&crate::eval::corpus_to_json(docs)).expect("corpus json");
    let mut s = serde_json::to_string_pretty(&v).expect("serializable");
    s.push('\n');
    s
}

/// `*.json` files directly inside `dir`, sorted.
pub fn detection_files(dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| io_err(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "json"))
        .collect();
    out.sort();
    Ok(out)
}

/// Scores `pred` against `gt` under each criterion.
pub fn evaluate(
    gt: &[u8],
    pred: &[u8],
    criteria: &[crate::eval::Criterion],
    iou: f64,
) -> Result<Vec<MatchReport>, PipelineError> {
    let pairs = align(load_corpus(gt)?, load_corpus(pred)?)?;
    criteria
        .iter()
        .map(|c| score_corpus(&pairs, *c, iou).map_err(PipelineError::from))
        .collect()
}

/// Writes `report.json` and `report.txt` into `out_dir`; returns the table text.
pub fn write_reports(
    reports: &[MatchReport],
    per_layout: bool,
    out_dir: &Path,
) -> Result<String, PipelineError> {
    std::fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let refs: Vec<&MatchReport> = reports.iter().collect();
    let table = format_table(&refs, per_layout);
    let mut body = serde_json::to_string_pretty(reports).expect("reports serialize");
    body.push('\n');
    let p = out_dir.join("report.json");
    std::fs::write(&p, body).map_err(|e| io_err(&p, e))?;
    let p = out_dir.join("report.txt");
    std::fs::write(&p, &table).map_err(|e| io_err(&p, e))?;
    Ok(table)
}

/// SVG for a document and a reaction file in the output format.
pub fn render_files(
    doc: &ReactionDocument,
    reactions_json: &[u8],
) -> Result<String, PipelineError> {
    let wire: Vec<WireReaction> = serde_json::from_slice(reactions_json)
        .map_err(|e| PerceptionError::ResponseFormat(format!("reaction file: {e}")))?;
    let reactions = resolve_reactions(&wire, doc, RESOLVE_IOU)?;
    Ok(render_svg(doc, &reactions)?)
}

/// Debug view of one molecule's fingerprint.
pub fn fingerprint_report(
    smiles: &str,
    config: &FingerprintConfig,
) -> Result<Value, PipelineError> {
    let mol = parse_smiles(smiles)?;
    let fp = fingerprint(&mol, config);
    let counts: BTreeMap<String, u32> = mol
        .atom_count_vector()
        .iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    Ok(json!({
        "smiles": smiles,
        "canonical": write_smiles(&mol),
        "atoms": mol.atom_count(),
        "bonds": mol.bonds().len(),
        "counts": counts,
        "charge": mol.formal_charge_sum(),
        "width": fp.width(),
        "algorithm": fp.algorithm_tag(),
        "popcount": fp.popcount(),
        "on_bits": fp.on_bits().collect::<Vec<_>>(),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::Criterion;
    use crate::perception::RecorderBackend;

    const FIG_DOC: &[u8] = include_bytes!("../../tests/data/fig_document.json");
    const FIG_RX: &str = include_str!("../../tests/data/fig_reactions.json");

    fn config(fixtures: &Path, out: &Path) -> PipelineConfig {
        let over = vec![
            ("fixtures_dir".to_string(), fixtures.display().to_string()),
            ("output_dir".to_string(), out.display().to_string()),
            ("render".to_string(), "true".to_string()),
        ];
        PipelineConfig::from_toml("", &over).unwrap()
    }

    fn record_fig(dir: &Path) {
        let rec = RecorderBackend::new(dir, |_, _| FIG_RX.to_string());
        let client = AgentClient::new(PromptSet::builtin(), Arc::new(rec));
        let p = Pipeline::with_client(config(dir, dir), client).unwrap();
        p.parse_bytes(FIG_DOC).unwrap();
    }

    fn sorted(v: Value) -> Vec<String> {
        let mut out: Vec<String> = v
            .as_array()
            .unwrap()
            .iter()
            .map(|x| x.to_string())
            .collect();
        out.sort();
        out
    }

    #[test]
    fn fig_document_reproduces_example() {
        let fx = tempfile::tempdir().unwrap();
        record_fig(fx.path());
        let out = tempfile::tempdir().unwrap();
        let p = Pipeline::new(config(fx.path(), out.path())).unwrap();
        let r = p.parse_bytes(FIG_DOC).unwrap();
        assert_eq!(r.status(), DocStatus::Ok);
        let got: Value = serde_json::from_str(&wire_to_json_pretty(&r.wire)).unwrap();
        let want: Value = serde_json::from_str(FIG_RX).unwrap();
        assert_eq!(sorted(got), sorted(want));
    }

    #[test]
    fn batch_isolates_failures() {
        let fx = tempfile::tempdir().unwrap();
        record_fig(fx.path());
        let inputs_dir = tempfile::tempdir().unwrap();
        let good = inputs_dir.path().join("fig.json");
        std::fs::write(&good, FIG_DOC).unwrap();
        let empty = inputs_dir.path().join("empty.json");
        std::fs::write(&empty, "").unwrap();
        let other = inputs_dir.path().join("other.json");
        std::fs::write(
            &other,
            r#"{"width": 100, "height": 100, "entities": [
                {"id": "a", "label": "molecule", "bbox": [0, 0, 10, 10], "smiles": "C"}]}"#,
        )
        .unwrap();
        let broken = inputs_dir.path().join("broken.json");
        std::fs::write(&broken, "{not json").unwrap();
        let out = tempfile::tempdir().unwrap();
        let p = Pipeline::new(config(fx.path(), out.path())).unwrap();
        let m = p.run_batch(&[good, empty.clone(), other, broken]).unwrap();
        let status: Vec<DocStatus> = m.documents.iter().map(|d| d.status).collect();
        assert_eq!(
            status,
            [
                DocStatus::Ok,
                DocStatus::Ok,
                DocStatus::Failed,
                DocStatus::Failed
            ]
        );
        assert_eq!(
            m.documents[2].error_class.as_deref(),
            Some("FixtureMissing")
        );
        assert_eq!(m.documents[3].error_class.as_deref(), Some("Schema"));
        assert_eq!(m.exit_code(), EXIT_PARTIAL);
        let e = std::fs::read_to_string(out.path().join("empty.reactions.json")).unwrap();
        assert_eq!(e, "[]\n");
        let svg = std::fs::read_to_string(out.path().join("fig.svg")).unwrap();
        assert_eq!(svg.matches("<g class=\"reaction\"").count(), 2);
        assert!(out.path().join("manifest.json").is_file());

        let solo_out = tempfile::tempdir().unwrap();
        let p = Pipeline::new(config(fx.path(), solo_out.path())).unwrap();
        p.run_batch(&[inputs_dir.path().join("fig.json")]).unwrap();
        for f in ["fig.reactions.json", "fig.meta.json", "fig.svg"] {
            assert_eq!(
                std::fs::read(out.path().join(f)).unwrap(),
                std::fs::read(solo_out.path().join(f)).unwrap(),
                "{f}"
            );
        }
    }

    #[test]
    fn self_eval_is_perfect() {
        let gt =
            format!(r#"{{"documents": [{{"id": "a", "layout": "tree", "reactions": {FIG_RX}}}]}}"#);
        let reports = evaluate(
            gt.as_bytes(),
            gt.as_bytes(),
            &[Criterion::Hard, Criterion::Soft],
            0.5,
        )
        .unwrap();
        assert!(reports.iter().all(|r| r.f1 == 1.0));
        let dir = tempfile::tempdir().unwrap();
        let table = write_reports(&reports, true, dir.path()).unwrap();
        assert!(table.contains("tree"));
        assert!(dir.path().join("report.json").is_file());
    }

    #[test]
    fn molecule_only_plan_skips_reasoning() {
        let over = vec![(
            "query".to_string(),
            "convert molecule to SMILES".to_string(),
        )];
        let p = Pipeline::new(PipelineConfig::from_toml("", &over).unwrap()).unwrap();
        let r = p.parse_bytes(FIG_DOC).unwrap();
        assert!(r.reactions.is_empty());
        assert_eq!(r.plan.steps(), [Expert::MoleculeExpert]);
    }

    #[test]
    fn render_and_fingerprint_helpers() {
        let p = Pipeline::new(PipelineConfig::default()).unwrap();
        let (doc, _) = p.load(FIG_DOC).unwrap();
        let svg = render_files(&doc, FIG_RX.as_bytes()).unwrap();
        assert_eq!(svg.matches("<g class=\"reaction\"").count(), 2);
        let f = fingerprint_report("CCO", &FingerprintConfig::default()).unwrap();
        assert_eq!(f["atoms"], 3);
        assert!(fingerprint_report("C(", &FingerprintConfig::default()).is_err());
    }

    #[test]
    fn score_edge_reports_channels() {
        let fx = tempfile::tempdir().unwrap();
        record_fig(fx.path());
        let p = Pipeline::new(config(fx.path(), fx.path())).unwrap();
        let (doc, _) = p.load(FIG_DOC).unwrap();
        let r = p.score_edge(&doc, "m1", "a1").unwrap();
        let typed = r
            .relations
            .iter()
            .find(|e| e.relation == EdgeRelation::ReactantToArrow)
            .unwrap();
        assert_eq!(typed.s_init, 1.0);
        assert!(typed.retained);
        assert!(p.score_edge(&doc, "m1", "zz").is_err());
    }
}
