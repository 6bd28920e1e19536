//! Seeded synthetic detection documents with known reactions, plus a combiner
//! responder that answers from that ground truth.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::eval::EvalDocument;
use crate::geometry::Region;
use crate::perception::{AgentRole, EntityKind, LayoutClass};
use crate::reaction::{wire_to_json, WireEntity, WireReaction};

const SMILES: [&str; 12] = [
    "CCO", "C=C", "O", "CC(=O)O", "c1ccccc1", "CCN", "CO", "OC=O", "CC", "N", "CC(C)O", "c1ccncc1",
];
const CONDITIONS: [&str; 8] = [
    "H2O, rt",
    "NaOH, EtOH",
    "reflux, 2 h",
    "Pd/C, H2",
    "THF, -78 °C",
    "HCl (aq)",
    "DMF, 80 °C",
    "hv",
];

pub const WIDTH: f64 = 900.0;
pub const HEIGHT: f64 = 500.0;

/// Entity ids per role.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TruthReaction {
    pub reactants: Vec<String>,
    pub products: Vec<String>,
    pub conditions: Vec<String>,
    pub arrows: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SyntheticDoc {
    pub id: String,
    pub layout: LayoutClass,
    /// Detection file contents.
    pub detections: String,
    pub truth: Vec<TruthReaction>,
    /// Entity id to (kind, bbox numbers).
    entities: BTreeMap<String, (EntityKind, Vec<f64>)>,
}

impl SyntheticDoc {
    pub fn truth_wire(&self) -> Vec<WireReaction> {
        self.truth.iter().map(|t| self.wire(t)).collect()
    }

    pub fn eval_document(&self) -> EvalDocument {
        EvalDocument {
            id: self.id.clone(),
            layout: Some(self.layout),
            reactions: self.truth_wire(),
        }
    }

    fn wire(&self, t: &TruthReaction) -> WireReaction {
        let conv = |ids: &[String]| -> Vec<WireEntity> {
            ids.iter()
                .map(|id| {
                    let (kind, bbox) = &self.entities[id];
                    WireEntity {
                        label: *kind,
                        bbox: Region::from_slice(bbox).expect("generated boxes are valid"),
                    }
                })
                .collect()
        };
        WireReaction {
            reactants: conv(&t.reactants),
            products: conv(&t.products),
            conditions: conv(&t.conditions),
            arrow: conv(&t.arrows),
            confidence: None,
        }
    }
}

struct Builder<'r> {
    prefix: String,
    rng: &'r mut ChaCha8Rng,
    json: Vec<Value>,
    entities: BTreeMap<String, (EntityKind, Vec<f64>)>,
    counts: BTreeMap<&'static str, usize>,
}

impl Builder<'_> {
    fn next_id(&mut self, tag: &'static str) -> String {
        let n = self.counts.entry(tag).or_insert(0);
        *n += 1;
        format!("{}_{tag}{n}", self.prefix)
    }

    fn push(&mut self, id: &str, kind: EntityKind, bbox: Vec<f64>, extra: Value) {
        let nums: Vec<Value> = bbox
            .iter()
            .map(|&x| {
                if x == x.trunc() {
                    json!(x as i64)
                } else {
                    json!(x)
                }
            })
            .collect();
        let mut v = json!({"id": id, "label": kind.as_str(), "bbox": nums});
        if let (Value::Object(m), Value::Object(x)) = (&mut v, extra) {
            m.extend(x);
        }
        self.json.push(v);
        self.entities.insert(id.to_string(), (kind, bbox));
    }

    fn molecule(&mut self, cx: f64, cy: f64) -> String {
        let id = self.next_id("m");
        let smiles = *SMILES.choose(self.rng).expect("non-empty");
        let w = 50.0 + 10.0 * self.rng.random_range(0..3) as f64;
        let h = 35.0 + 5.0 * self.rng.random_range(0..3) as f64;
        self.push(
            &id,
            EntityKind::Molecule,
            vec![cx - w, cy - h, cx + w, cy + h],
            json!({"smiles": smiles}),
        );
        if self.rng.random_bool(0.3) {
            let lid = self.next_id("i");
            let label = format!("{}", self.counts["m"]);
            self.push(
                &lid,
                EntityKind::Identifier,
                vec![cx - 12.0, cy + h + 4.0, cx + 12.0, cy + h + 24.0],
                json!({"text": label, "molecule_ref": id}),
            );
        }
        id
    }

    fn text(&mut self, cx: f64, cy: f64) -> String {
        let id = self.next_id("t");
        let t = *CONDITIONS.choose(self.rng).expect("non-empty");
        self.push(
            &id,
            EntityKind::Text,
            vec![cx - 45.0, cy - 11.0, cx + 45.0, cy + 11.0],
            json!({"text": t}),
        );
        id
    }

    /// Quad listed tail side first so the end midpoints give the direction.
    fn arrow(&mut self, tail: (f64, f64), head: (f64, f64)) -> String {
        let id = self.next_id("a");
        let (dx, dy) = (head.0 - tail.0, head.1 - tail.1);
        let len = dx.hypot(dy);
        let (nx, ny) = (-dy / len * 6.0, dx / len * 6.0);
        let q = vec![
            tail.0 + nx,
            tail.1 + ny,
            head.0 + nx,
            head.1 + ny,
            head.0 - nx,
            head.1 - ny,
            tail.0 - nx,
            tail.1 - ny,
        ];
        self.push(&id, EntityKind::Arrow, q, json!({}));
        id
    }

    /// Horizontal or vertical step with its condition text.
    fn step(
        &mut self,
        tail: (f64, f64),
        head: (f64, f64),
        r: Vec<String>,
        p: Vec<String>,
    ) -> TruthReaction {
        let a = self.arrow(tail, head);
        let mid = ((tail.0 + head.0) / 2.0, (tail.1 + head.1) / 2.0);
        let mut conditions = Vec::new();
        if self.rng.random_bool(0.8) {
            let c = if (head.1 - tail.1).abs() > (head.0 - tail.0).abs() {
                self.text(mid.0 + 60.0, mid.1)
            } else {
                self.text(mid.0, mid.1 - 26.0)
            };
            conditions.push(c);
        }
        TruthReaction {
            reactants: r,
            products: p,
            conditions,
            arrows: vec![a],
        }
    }
}

fn build(b: &mut Builder<'_>, layout: LayoutClass) -> Vec<TruthReaction> {
    match layout {
        LayoutClass::SingleLine => {
            let y = 250.0;
            let m0 = b.molecule(100.0, y);
            let m1 = b.molecule(420.0, y);
            let mut out = vec![b.step((180.0, y), (340.0, y), vec![m0], vec![m1.clone()])];
            if b.rng.random_bool(0.5) {
                let m2 = b.molecule(740.0, y);
                out.push(b.step((500.0, y), (660.0, y), vec![m1], vec![m2]));
            }
            out
        }
        LayoutClass::MultipleLine => {
            let (y1, y2) = (110.0, 370.0);
            let a = b.molecule(120.0, y1);
            let p = b.molecule(560.0, y1);
            let r1 = b.step((200.0, y1), (460.0, y1), vec![a], vec![p]);
            let c = b.molecule(100.0, y2);
            let d = b.molecule(270.0, y2);
            let q = b.molecule(700.0, y2);
            let r2 = b.step((360.0, y2), (600.0, y2), vec![c, d], vec![q]);
            vec![r1, r2]
        }
        LayoutClass::Tree => {
            let a = b.molecule(100.0, 130.0);
            let c = b.molecule(100.0, 370.0);
            let mid = b.molecule(440.0, 250.0);
            let end = b.molecule(790.0, 250.0);
            let r1 = b.step(
                (190.0, 250.0),
                (350.0, 250.0),
                vec![a, c],
                vec![mid.clone()],
            );
            let r2 = b.step((530.0, 250.0), (700.0, 250.0), vec![mid], vec![end]);
            vec![r1, r2]
        }
        LayoutClass::Graph => {
            let a = b.molecule(120.0, 110.0);
            let m = b.molecule(520.0, 110.0);
            let c = b.molecule(520.0, 390.0);
            let d = b.molecule(120.0, 390.0);
            let r1 = b.step((200.0, 110.0), (420.0, 110.0), vec![a], vec![m.clone()]);
            let r2 = b.step((520.0, 170.0), (520.0, 330.0), vec![m], vec![c.clone()]);
            let r3 = b.step((420.0, 390.0), (200.0, 390.0), vec![c], vec![d]);
            vec![r1, r2, r3]
        }
    }
}

pub fn synthetic_document(index: usize, layout: LayoutClass, seed: u64) -> SyntheticDoc {
    let mut rng =
        ChaCha8Rng::seed_from_u64(seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let id = format!("syn{index:02}");
    let mut b = Builder {
        prefix: id.clone(),
        rng: &mut rng,
        json: Vec::new(),
        entities: BTreeMap::new(),
        counts: BTreeMap::new(),
    };
    let truth = build(&mut b, layout);
    let doc = json!({
        "id": id,
        "width": WIDTH as i64,
        "height": HEIGHT as i64,
        "layout": layout.as_str(),
        "entities": b.json,
    });
    SyntheticDoc {
        detections: serde_json::to_string_pretty(&doc).expect("serializable") + "\n",
        entities: b.entities,
        id,
        layout,
        truth,
    }
}

/// `n` documents cycling through the four layout classes.
pub fn synthetic_batch(n: usize, seed: u64) -> Vec<SyntheticDoc> {
    (0..n)
        .map(|i| synthetic_document(i, LayoutClass::ALL[i % LayoutClass::ALL.len()], seed))
        .collect()
}

/// Node ids listed in a combiner prompt's graph.
pub fn prompt_node_ids(prompt: &str) -> BTreeSet<String> {
    let Some(start) = prompt.find("Graph:\n") else {
        return BTreeSet::new();
    };
    let rest = &prompt[start + "Graph:\n".len()..];
    let body = rest.split("\n\nReturn strictly").next().unwrap_or(rest);
    let Ok(v) = serde_json::from_str::<Value>(body.trim()) else {
        return BTreeSet::new();
    };
    v["nodes"]
        .as_array()
        .map(|ns| {
            ns.iter()
                .filter_map(|n| n["id"].as_str().map(str::to_string))
                .collect()
        })
        .unwrap_or_default()
}

/// Answers combiner prompts with every true reaction fully inside the prompt's cluster,
/// and planner prompts with the full plan.
pub fn synthetic_responder(
    docs: &[SyntheticDoc],
) -> impl Fn(AgentRole, &str) -> String + Send + Sync + 'static {
    let truth: Vec<(BTreeSet<String>, WireReaction)> = docs
        .iter()
        .flat_map(|d| {
            d.truth.iter().map(move |t| {
                let ids = t
                    .reactants
                    .iter()
                    .chain(&t.products)
                    .chain(&t.conditions)
                    .chain(&t.arrows)
                    .cloned()
                    .collect();
                (ids, d.wire(t))
            })
        })
        .collect();
    move |role, prompt| {
        match role {
        AgentRole::ReactionCombiner => {
            let nodes = prompt_node_ids(prompt);
            let hits: Vec<WireReaction> = truth
                .iter()
                .filter(|(ids, _)| ids.is_subset(&nodes))
                .map(|(_, w)| w.clone())
                .collect();
            wire_to_json(&hits)
        }
        AgentRole::Planner => {
            r#"{"plan":{"molecule_expert":true,"arrow_expert":true,"text_expert":true,"reaction_expert":true}}"#
                .to_string()
        }
        AgentRole::MoleculeRecognition => "[]".to_string(),
    }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perception::{load_document, Lexicon};

    #[test]
    fn batch_is_seeded_and_covers_layouts() {
        let a = synthetic_batch(8, 7);
        let b = synthetic_batch(8, 7);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.detections, y.detections);
        }
        let layouts: BTreeSet<_> = a.iter().map(|d| d.layout).collect();
        assert_eq!(layouts.len(), 4);
    }

    #[test]
    fn documents_load_and_truth_resolves() {
        for d in synthetic_batch(12, 1) {
            let doc = load_document(d.detections.as_bytes(), &Lexicon::builtin())
                .unwrap()
                .document;
            assert_eq!(doc.layout_class, Some(d.layout));
            for t in &d.truth {
                for id in t
                    .reactants
                    .iter()
                    .chain(&t.products)
                    .chain(&t.conditions)
                    .chain(&t.arrows)
                {
                    assert!(doc.entity(id).is_some(), "{id}");
                }
                let a = doc.entity(&t.arrows[0]).unwrap();
                let (tail, head) = a.arrow_axis().unwrap();
                let r = doc.entity(&t.reactants[0]).unwrap().region.center();
                assert!(r.dist(tail) < r.dist(head));
            }
        }
    }

    #[test]
    fn responder_reads_cluster_nodes() {
        let docs = synthetic_batch(1, 3);
        let f = synthetic_responder(&docs);
        let t = &docs[0].truth[0];
        let ids: Vec<&String> = t
            .reactants
            .iter()
            .chain(&t.products)
            .chain(&t.conditions)
            .chain(&t.arrows)
            .collect();
        let nodes: Vec<Value> = ids.iter().map(|i| json!({"id": i})).collect();
        let prompt = format!(
            "x\nGraph:\n{}\n\nReturn strictly ...",
            json!({"nodes": nodes, "edges": []})
        );
        let out: Vec<WireReaction> =
            serde_json::from_str(&f(AgentRole::ReactionCombiner, &prompt)).unwrap();
        assert_eq!(out, vec![docs[0].truth_wire()[0].clone()]);
        assert_eq!(f(AgentRole::ReactionCombiner, "no graph"), "[]");
    }
}
