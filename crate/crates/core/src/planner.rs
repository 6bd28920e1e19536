//! Agent routing: diagram features, plans and the rule / VLM policies.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use crate::geometry::center_distance_normalized;
use crate::perception::{
    AgentClient, AgentError, AgentRequest, AgentRole, ArrowDirection, EntityKind, ReactionDocument,
};
use crate::util::{strip_code_fence, UnionFind};

/// Proximity threshold for the complexity score, in diagram diagonals.
pub const FEATURE_PROXIMITY: f64 = 0.35;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Expert {
    MoleculeExpert,
    ArrowExpert,
    TextExpert,
    ReactionExpert,
}

impl Expert {
    /// Canonical execution order.
    pub const ALL: [Expert; 4] = [
        Expert::MoleculeExpert,
        Expert::ArrowExpert,
        Expert::TextExpert,
        Expert::ReactionExpert,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Expert::MoleculeExpert => "molecule_expert",
            Expert::ArrowExpert => "arrow_expert",
            Expert::TextExpert => "text_expert",
            Expert::ReactionExpert => "reaction_expert",
        }
    }

    pub fn parse(s: &str) -> Option<Expert> {
        Expert::ALL.into_iter().find(|e| e.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    RulePolicy,
    VlmPolicy,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PlanError {
    #[error("plan parse error: {0}")]
    Parse(String),
    #[error("invalid plan: {0}")]
    Invalid(String),
    #[error("query must not be empty")]
    EmptyQuery,
    #[error("every role in the plan is already complete")]
    Exhausted,
    #[error(transparent)]
    Agent(#[from] AgentError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AgentPlan {
    steps: Vec<Expert>,
    provenance: Provenance,
}

impl AgentPlan {
    /// Steps must be non-empty, unique and in canonical order (so reaction_expert is last).
    pub fn new(steps: Vec<Expert>, provenance: Provenance) -> Result<Self, PlanError> {
        if steps.is_empty() {
            return Err(PlanError::Invalid("plan has no steps".into()));
        }
        if steps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(PlanError::Invalid(
                "steps must be unique and in molecule, arrow, text, reaction order".into(),
            ));
        }
        Ok(AgentPlan { steps, provenance })
    }

    pub fn full(provenance: Provenance) -> Self {
        AgentPlan {
            steps: Expert::ALL.to_vec(),
            provenance,
        }
    }

    pub fn steps(&self) -> &[Expert] {
        &self.steps
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn contains(&self, e: Expert) -> bool {
        self.steps.contains(&e)
    }
}

/// Fixed-key-order wire form.
pub fn plan_to_json(plan: &AgentPlan) -> String {
    let flags: Vec<String> = Expert::ALL
        .iter()
        .map(|e| format!("\"{}\":{}", e.as_str(), plan.contains(*e)))
        .collect();
    format!("{{\"plan\":{{{}}}}}", flags.join(","))
}

/// Accepts `{"plan": {...}}` or the bare flag object. Missing flags read as false.
pub fn plan_from_json(s: &str, provenance: Provenance) -> Result<AgentPlan, PlanError> {
    let v: Value =
        serde_json::from_str(strip_code_fence(s)).map_err(|e| PlanError::Parse(e.to_string()))?;
    let obj = v
        .as_object()
        .ok_or_else(|| PlanError::Parse("expected a JSON object".into()))?;
    let flags = match obj.get("plan") {
        Some(inner) => {
            if obj.len() != 1 {
                return Err(PlanError::Parse("unexpected keys beside 'plan'".into()));
            }
            inner
                .as_object()
                .ok_or_else(|| PlanError::Parse("'plan' must be an object".into()))?
        }
        None => obj,
    };
    let mut on = BTreeSet::new();
    for (k, val) in flags {
        let e =
            Expert::parse(k).ok_or_else(|| PlanError::Parse(format!("unknown role key '{k}'")))?;
        match val.as_bool() {
            Some(true) => {
                on.insert(e);
            }
            Some(false) => {}
            None => return Err(PlanError::Parse(format!("'{k}' must be a boolean"))),
        }
    }
    AgentPlan::new(on.into_iter().collect(), provenance)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct KindCounts {
    pub molecule: usize,
    pub arrow: usize,
    pub text: usize,
    pub identifier: usize,
}

impl KindCounts {
    pub fn get(&self, k: EntityKind) -> usize {
        match k {
            EntityKind::Molecule => self.molecule,
            EntityKind::Arrow => self.arrow,
            EntityKind::Text => self.text,
            EntityKind::Identifier => self.identifier,
        }
    }

    pub fn total(&self) -> usize {
        self.molecule + self.arrow + self.text + self.identifier
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagramFeatures {
    pub counts: KindCounts,
    pub arrow_classes: BTreeMap<ArrowDirection, usize>,
    /// Entities per proximity component; 0 for an empty diagram.
    pub layout_complexity: f64,
    /// Text area over diagram area.
    pub text_density: f64,
}

pub fn extract_features(doc: &ReactionDocument) -> DiagramFeatures {
    let mut counts = KindCounts::default();
    let mut arrow_classes = BTreeMap::new();
    let mut text_area = 0.0;
    for e in &doc.entities {
        match e.kind {
            EntityKind::Molecule => counts.molecule += 1,
            EntityKind::Arrow => counts.arrow += 1,
            EntityKind::Text => {
                counts.text += 1;
                text_area += e.region.area();
            }
            EntityKind::Identifier => counts.identifier += 1,
        }
        if let Some(d) = e.direction() {
            *arrow_classes.entry(d).or_insert(0) += 1;
        }
    }
    let n = doc.entities.len();
    let mut uf = UnionFind::new(n);
    for i in 0..n {
        for j in i + 1..n {
            let d = center_distance_normalized(
                &doc.entities[i].region,
                &doc.entities[j].region,
                &doc.diagram_bounds,
            );
            if d < FEATURE_PROXIMITY {
                uf.union(i, j);
            }
        }
    }
    let components = uf.groups().len();
    DiagramFeatures {
        counts,
        arrow_classes,
        layout_complexity: if n == 0 {
            0.0
        } else {
            n as f64 / components as f64
        },
        text_density: text_area / doc.diagram_bounds.area(),
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlanningContext {
    pub query: String,
    completed: BTreeSet<Expert>,
    /// Entities produced per completed role.
    produced: BTreeMap<Expert, usize>,
    step: usize,
}

impl PlanningContext {
    pub fn new(query: impl Into<String>) -> Self {
        PlanningContext {
            query: query.into(),
            ..Default::default()
        }
    }

    pub fn complete(&mut self, e: Expert, produced: usize) {
        if self.completed.insert(e) {
            self.step += 1;
        }
        self.produced.insert(e, produced);
    }

    pub fn is_complete(&self, e: Expert) -> bool {
        self.completed.contains(&e)
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn produced(&self, e: Expert) -> Option<usize> {
        self.produced.get(&e).copied()
    }
}

/// Called between steps; may replace the remaining plan.
pub trait ReplanHook: Send + Sync {
    fn replan(
        &self,
        plan: &AgentPlan,
        ctx: &PlanningContext,
        features: &DiagramFeatures,
    ) -> Option<AgentPlan>;
}

/// Keeps the current plan.
pub struct NoReplan;

impl ReplanHook for NoReplan {
    fn replan(&self, _: &AgentPlan, _: &PlanningContext, _: &DiagramFeatures) -> Option<AgentPlan> {
        None
    }
}

pub enum Policy<'a> {
    Rule,
    Vlm {
        client: &'a AgentClient,
        fallback_to_rule: bool,
    },
}

const FULL_KEYWORDS: [&str; 3] = ["reaction", "pathway", "parse"];
const MOLECULE_KEYWORDS: [&str; 2] = ["smiles", "structure only"];
const TEXT_KEYWORDS: [&str; 2] = ["conditions", "text"];

fn rule_plan(query: &str) -> AgentPlan {
    let q = query.to_lowercase();
    let has = |words: &[&str]| words.iter().any(|w| q.contains(w));
    if has(&FULL_KEYWORDS) || !has(&MOLECULE_KEYWORDS) {
        return AgentPlan::full(Provenance::RulePolicy);
    }
    let mut steps = vec![Expert::MoleculeExpert];
    if has(&TEXT_KEYWORDS) {
        steps.push(Expert::TextExpert);
    }
    AgentPlan {
        steps,
        provenance: Provenance::RulePolicy,
    }
}

/// Chooses the experts still to run for `query`.
pub fn route(
    query: &str,
    features: &DiagramFeatures,
    ctx: &PlanningContext,
    policy: &Policy<'_>,
) -> Result<AgentPlan, PlanError> {
    let _ = features;
    if query.trim().is_empty() {
        return Err(PlanError::EmptyQuery);
    }
    let plan = match policy {
        Policy::Rule => rule_plan(query),
        Policy::Vlm {
            client,
            fallback_to_rule,
        } => {
            let req = AgentRequest::default().var("query", query);
            let answer = client
                .request(AgentRole::Planner, &req)
                .map_err(PlanError::from)
                .and_then(|raw| plan_from_json(&raw, Provenance::VlmPolicy));
            match answer {
                Ok(p) => p,
                Err(e) if *fallback_to_rule => {
                    log::warn!("planner response rejected ({e}); using rule policy");
                    rule_plan(query)
                }
                Err(e) => return Err(e),
            }
        }
    };
    let remaining: Vec<Expert> = plan
        .steps
        .iter()
        .copied()
        .filter(|e| !ctx.is_complete(*e))
        .collect();
    if remaining.is_empty() {
        return Err(PlanError::Exhausted);
    }
    AgentPlan::new(remaining, plan.provenance)
}
