//! Per-cluster relation hypotheses from the reaction combiner.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde_json::{json, Value};

use super::{ChemGraph, EdgeRelation, ReasoningError, SpatialGraph};
use crate::perception::{
    parse_combiner_response, AgentClient, AgentRequest, AgentRole, Payload, ReactionDocument,
};
use crate::reaction::Reaction;

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisEdge {
    pub from: usize,
    pub to: usize,
    pub relation: EdgeRelation,
    pub s_init: f64,
    pub cluster: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClusterOutcome {
    pub reactions: usize,
    pub edges: usize,
    /// Edges naming an entity outside the cluster.
    pub dropped: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct HypothesisGraph {
    pub clusters: Vec<Vec<usize>>,
    pub edges: Vec<HypothesisEdge>,
    pub outcomes: Vec<ClusterOutcome>,
}

impl HypothesisGraph {
    pub fn failed_clusters(&self) -> usize {
        self.outcomes.iter().filter(|o| o.error.is_some()).count()
    }

    /// True when some typed edge joins `i` and `j` in either direction.
    pub fn links(&self, i: usize, j: usize) -> bool {
        self.edges
            .iter()
            .any(|e| (e.from == i && e.to == j) || (e.from == j && e.to == i))
    }
}

/// Typed edges implied by a reaction list, keyed (from, to, relation) with the max score.
pub fn edges_from_reactions(
    reactions: &[Reaction],
    doc: &ReactionDocument,
) -> BTreeMap<(usize, usize, EdgeRelation), f64> {
    let mut out: BTreeMap<(usize, usize, EdgeRelation), f64> = BTreeMap::new();
    let idx =
        |ids: &[String]| -> Vec<usize> { ids.iter().filter_map(|id| doc.index_of(id)).collect() };
    for r in reactions {
        let (re, pr, co, ar) = (
            idx(&r.reactants),
            idx(&r.products),
            idx(&r.conditions),
            idx(&r.arrows),
        );
        let mut put = |a: usize, b: usize, rel: EdgeRelation| {
            if a != b {
                let s = out.entry((a, b, rel)).or_insert(r.score);
                *s = s.max(r.score);
            }
        };
        for &x in &re {
            for &a in &ar {
                put(x, a, EdgeRelation::ReactantToArrow);
            }
            for &c in &co {
                put(x, c, EdgeRelation::ReactantToCond);
            }
            for &p in &pr {
                put(x, p, EdgeRelation::ReactantToProduct);
            }
        }
        for &p in &pr {
            for &a in &ar {
                put(a, p, EdgeRelation::ArrowToProduct);
            }
            for &c in &co {
                put(c, p, EdgeRelation::CondToProduct);
            }
        }
    }
    out
}

fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

/// Compact JSON description of one cluster: its nodes and the preliminary untyped edges.
pub(crate) fn cluster_graph_json(
    cluster: &[usize],
    doc: &ReactionDocument,
    spatial: &SpatialGraph,
    chem: &ChemGraph,
) -> String {
    let nodes: Vec<Value> = cluster
        .iter()
        .map(|&i| {
            let e = &doc.entities[i];
            let mut v = json!({"id": e.id, "label": e.kind.as_str(), "bbox": e.region});
            match &e.payload {
                Payload::Molecule {
                    smiles: Some(s), ..
                } => v["smiles"] = json!(s),
                Payload::Text { raw, .. } => v["text"] = json!(raw),
                Payload::Identifier { label, .. } => v["text"] = json!(label),
                _ => {}
            }
            v
        })
        .collect();
    let members: BTreeSet<usize> = cluster.iter().copied().collect();
    let mut pairs: BTreeSet<(usize, usize)> = BTreeSet::new();
    pairs.extend(spatial.edges().iter().copied());
    pairs.extend(chem.edges().iter().copied());
    let edges: Vec<Value> = pairs
        .into_iter()
        .filter(|(a, b)| members.contains(a) && members.contains(b))
        .map(|(a, b)| {
            let mut v = json!({
                "source": doc.entities[a].id,
                "target": doc.entities[b].id,
                "type": EdgeRelation::NoEdge.code(),
                "weight": round4(spatial.score(a, b).unwrap_or(0.5)),
            });
            if let Some(c) = chem.score(a, b) {
                v["chem"] = json!(round4(c));
            }
            v
        })
        .collect();
    json!({"nodes": nodes, "edges": edges}).to_string()
}

/// One combiner request per cluster. Agent failures abort; malformed or unresolvable
/// responses only mark their own cluster.
pub fn collect_hypotheses(
    clusters: &[Vec<usize>],
    client: &AgentClient,
    doc: &ReactionDocument,
    spatial: &SpatialGraph,
    chem: &ChemGraph,
) -> Result<HypothesisGraph, ReasoningError> {
    let results: Vec<Result<(Vec<HypothesisEdge>, ClusterOutcome), ReasoningError>> = clusters
        .par_iter()
        .enumerate()
        .map(|(k, cluster)| {
            let req = AgentRequest::default()
                .var("graph", cluster_graph_json(cluster, doc, spatial, chem));
            let raw = client.request(AgentRole::ReactionCombiner, &req)?;
            let reactions = match parse_combiner_response(&raw, doc) {
                Ok(r) => r,
                Err(e) => {
                    log::warn!("cluster {k}: {e}");
                    return Ok((
                        Vec::new(),
                        ClusterOutcome {
                            error: Some(e.to_string()),
                            ..Default::default()
                        },
                    ));
                }
            };
            let members: BTreeSet<usize> = cluster.iter().copied().collect();
            let mut outcome = ClusterOutcome {
                reactions: reactions.len(),
                ..Default::default()
            };
            let mut edges = Vec::new();
            for ((from, to, relation), s_init) in edges_from_reactions(&reactions, doc) {
                if !members.contains(&from) || !members.contains(&to) {
                    log::warn!(
                        "cluster {k}: dropping edge {} -> {} outside the cluster",
                        doc.entities[from].id,
                        doc.entities[to].id
                    );
                    outcome.dropped += 1;
                    continue;
                }
                edges.push(HypothesisEdge {
                    from,
                    to,
                    relation,
                    s_init,
                    cluster: k,
                });
            }
            outcome.edges = edges.len();
            Ok((edges, outcome))
        })
        .collect();
    let mut graph = HypothesisGraph {
        clusters: clusters.to_vec(),
        ..Default::default()
    };
    for r in results {
        let (edges, outcome) = r?;
        graph.edges.extend(edges);
        graph.outcomes.push(outcome);
    }
    Ok(graph)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perception::{fixture_path, load_document, Lexicon};
    use crate::reasoning::{
        build_chem_graph, build_spatial_graph, GnnWeights, ReasoningConfig, EDGE_FEATURES,
    };
    use std::sync::Arc;

    pub(crate) const FIG: &str = include_str!("../../tests/data/fig_reactions.json");
    pub(crate) const FIG_DOC: &str = include_str!("../../tests/data/fig_document.json");

    struct Setup {
        doc: ReactionDocument,
        spatial: SpatialGraph,
        chem: ChemGraph,
        dir: tempfile::TempDir,
    }

    fn setup(src: &str) -> Setup {
        let doc = load_document(src.as_bytes(), &Lexicon::builtin())
            .unwrap()
            .document;
        let cfg = ReasoningConfig::default();
        let w = Arc::new(GnnWeights::seeded(cfg.dim, EDGE_FEATURES, cfg.layers, 0));
        let spatial = build_spatial_graph(&doc, &cfg, w)
            .unwrap()
            .propagate(2)
            .unwrap();
        let chem = build_chem_graph(&doc, &cfg);
        Setup {
            doc,
            spatial,
            chem,
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn write_fixture(s: &Setup, cluster: &[usize], body: &str) {
        let client = AgentClient::mock(s.dir.path());
        let graph = cluster_graph_json(cluster, &s.doc, &s.spatial, &s.chem);
        let prompt = client
            .prompts()
            .render(
                AgentRole::ReactionCombiner,
                &AgentRequest::default().var("graph", graph).vars,
            )
            .unwrap();
        let hash = crate::perception::content_hash(&prompt, None);
        let p = fixture_path(s.dir.path(), AgentRole::ReactionCombiner, &hash);
        std::fs::create_dir_all(p.parent().unwrap()).unwrap();
        std::fs::write(p, body).unwrap();
    }

    fn id_edges(g: &HypothesisGraph, doc: &ReactionDocument) -> BTreeSet<(String, String, u8)> {
        g.edges
            .iter()
            .map(|e| {
                (
                    doc.entities[e.from].id.clone(),
                    doc.entities[e.to].id.clone(),
                    e.relation.code(),
                )
            })
            .collect()
    }

    #[test]
    fn fig_response_yields_typed_edges() {
        let s = setup(FIG_DOC);
        let all: Vec<usize> = (0..s.doc.entities.len()).collect();
        write_fixture(&s, &all, FIG);
        let g = collect_hypotheses(
            &[all],
            &AgentClient::mock(s.dir.path()),
            &s.doc,
            &s.spatial,
            &s.chem,
        )
        .unwrap();
        let e = id_edges(&g, &s.doc);
        let has = |a: &str, b: &str, r: u8| e.contains(&(a.to_string(), b.to_string(), r));
        assert!(has("m1", "a1", 5));
        assert!(has("a1", "m2", 6));
        assert!(has("m1", "t1", 0));
        assert!(has("t2", "m2", 1));
        assert!(has("m1", "m2", 2));
        assert!(has("t3", "a2", 5));
        assert!(has("i1", "a2", 5));
        assert!(has("a2", "m3", 6));
        assert!(has("t4", "m3", 1));
        // 7 edges for the first reaction, 11 for the second
        assert_eq!(e.len(), 18);
        assert!(g
            .edges
            .iter()
            .all(|e| e.relation != EdgeRelation::NoEdge && e.s_init == 1.0));
        assert_eq!(g.outcomes[0].reactions, 2);
    }

    #[test]
    fn empty_response_and_outside_edges() {
        let s = setup(FIG_DOC);
        let ix = |id: &str| s.doc.index_of(id).unwrap();
        let first: Vec<usize> = ["m1", "t1", "t2", "a1"].iter().map(|i| ix(i)).collect();
        let mut rest: Vec<usize> = (0..s.doc.entities.len())
            .filter(|i| !first.contains(i))
            .collect();
        rest.sort();
        let mut first_sorted = first.clone();
        first_sorted.sort();
        // the first cluster's answer names m2, which lives in the other cluster
        let r1 = &FIG[..FIG.find("},\n    {").unwrap() + 1];
        write_fixture(&s, &first_sorted, &format!("{r1}]"));
        write_fixture(&s, &rest, "[]");
        let g = collect_hypotheses(
            &[first_sorted, rest],
            &AgentClient::mock(s.dir.path()),
            &s.doc,
            &s.spatial,
            &s.chem,
        )
        .unwrap();
        assert_eq!(g.outcomes[1], ClusterOutcome::default());
        // edges touching m2: a1->m2, t1->m2, t2->m2, m1->m2
        assert_eq!(g.outcomes[0].dropped, 4);
        assert_eq!(g.outcomes[0].edges, 3);
        assert!(g.edges.iter().all(|e| e.cluster == 0));
    }

    #[test]
    fn malformed_response_is_partial_missing_fixture_is_fatal() {
        let s = setup(FIG_DOC);
        let n = s.doc.entities.len();
        let a: Vec<usize> = (0..n / 2).collect();
        let b: Vec<usize> = (n / 2..n).collect();
        write_fixture(&s, &a, "sorry, I cannot help");
        write_fixture(&s, &b, "[]");
        let client = AgentClient::mock(s.dir.path());
        let g = collect_hypotheses(&[a.clone(), b], &client, &s.doc, &s.spatial, &s.chem).unwrap();
        assert_eq!(g.failed_clusters(), 1);
        assert!(g.outcomes[0].error.is_some());
        let c: Vec<usize> = vec![0];
        let err = collect_hypotheses(&[a, c], &client, &s.doc, &s.spatial, &s.chem).unwrap_err();
        assert!(matches!(err, ReasoningError::Agent(_)));
    }

    #[test]
    fn graph_prompt_is_stable() {
        let s = setup(FIG_DOC);
        let all: Vec<usize> = (0..s.doc.entities.len()).collect();
        let a = cluster_graph_json(&all, &s.doc, &s.spatial, &s.chem);
        assert_eq!(a, cluster_graph_json(&all, &s.doc, &s.spatial, &s.chem));
        let v: Value = serde_json::from_str(&a).unwrap();
        assert_eq!(v["nodes"].as_array().unwrap().len(), 11);
        assert!(v["edges"]
            .as_array()
            .unwrap()
            .iter()
            .all(|e| e["type"] == 3));
    }
}
