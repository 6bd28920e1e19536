//! Shared inputs for the benchmarks: a recorded synthetic batch and a pipeline that
//! replays it from fixtures.

use std::sync::Arc;

use rxngraph_core::eval::EvalDocument;
use rxngraph_core::perception::{AgentClient, PromptSet, RecorderBackend};
use rxngraph_core::pipeline::synth::{synthetic_batch, synthetic_responder, SyntheticDoc};
use rxngraph_core::pipeline::{Pipeline, PipelineConfig};
use tempfile::TempDir;

pub struct Recorded {
    pub docs: Vec<SyntheticDoc>,
    /// Mock backend over the recorded fixtures.
    pub pipeline: Pipeline,
    _fixtures: TempDir,
}

/// Records combiner answers for `n` synthetic documents, then reopens them read-only.
pub fn recorded(n: usize, seed: u64) -> Recorded {
    let docs = synthetic_batch(n, seed);
    let dir = tempfile::tempdir().expect("temp dir");
    let client = AgentClient::new(
        PromptSet::builtin(),
        Arc::new(RecorderBackend::new(dir.path(), synthetic_responder(&docs))),
    );
    let recorder =
        Pipeline::with_client(PipelineConfig::default(), client).expect("default config");
    for d in &docs {
        recorder
            .parse_bytes(d.detections.as_bytes())
            .expect("synthetic document parses");
    }
    let mut cfg = PipelineConfig::default();
    cfg.settings.fixtures_dir = Some(dir.path().to_path_buf());
    Recorded {
        docs,
        pipeline: Pipeline::new(cfg).expect("mock pipeline"),
        _fixtures: dir,
    }
}

impl Recorded {
    pub fn truth(&self) -> Vec<EvalDocument> {
        self.docs.iter().map(SyntheticDoc::eval_document).collect()
    }
}
