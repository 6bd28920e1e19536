use std::sync::Arc;

use rxngraph_core::eval::{score_corpus, Criterion, EvalDocument};
use rxngraph_core::perception::{AgentClient, PromptSet, RecorderBackend};
use rxngraph_core::pipeline::synth::{synthetic_batch, synthetic_responder};
use rxngraph_core::pipeline::{Pipeline, PipelineConfig};

#[test]
fn synthetic_batch_recovers_truth() {
    let docs = synthetic_batch(20, 11);
    let fx = tempfile::tempdir().unwrap();
    let client = AgentClient::new(
        PromptSet::builtin(),
        Arc::new(RecorderBackend::new(fx.path(), synthetic_responder(&docs))),
    );
    let p = Pipeline::with_client(PipelineConfig::default(), client).unwrap();
    let mut pairs = Vec::new();
    for d in &docs {
        let r = p.parse_bytes(d.detections.as_bytes()).unwrap();
        let pred = EvalDocument {
            id: d.id.clone(),
            layout: Some(d.layout),
            reactions: r.wire,
        };
        pairs.push((d.eval_document(), pred));
    }
    for c in [Criterion::Hard, Criterion::Soft] {
        let rep = score_corpus(&pairs, c, 0.5).unwrap();
        assert_eq!(rep.f1, 1.0, "{c:?}");
    }
}
