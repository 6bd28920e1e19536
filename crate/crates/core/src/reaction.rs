//! Reactions over document entities and their wire form.

use serde::{Deserialize, Serialize};

use crate::chem::ConservationResidual;
use crate::geometry::Region;
use crate::perception::EntityKind;

/// Element/charge balance status of a reaction.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum ConservationFlag {
    Balanced,
    Unbalanced(ConservationResidual),
    #[default]
    Unknown,
}

impl ConservationFlag {
    pub fn as_str(&self) -> &'static str {
        match self {
            ConservationFlag::Balanced => "balanced",
            ConservationFlag::Unbalanced(_) => "unbalanced",
            ConservationFlag::Unknown => "unknown",
        }
    }
}

/// A reaction referencing document entities by id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Reaction {
    pub reactants: Vec<String>,
    pub products: Vec<String>,
    pub conditions: Vec<String>,
    pub arrows: Vec<String>,
    pub score: f64,
    pub conservation: ConservationFlag,
    /// Set when a molecule entity sits among the conditions.
    pub molecule_conditions: bool,
}

impl Reaction {
    pub fn new(
        reactants: Vec<String>,
        products: Vec<String>,
        conditions: Vec<String>,
        arrows: Vec<String>,
    ) -> Self {
        Reaction {
            reactants,
            products,
            conditions,
            arrows,
            ..Default::default()
        }
    }

    pub fn entity_ids(&self) -> impl Iterator<Item = &String> {
        self.reactants
            .iter()
            .chain(&self.products)
            .chain(&self.conditions)
            .chain(&self.arrows)
    }
}

/// One `{label, bbox}` element of the reaction output format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireEntity {
    pub label: EntityKind,
    pub bbox: Region,
}

/// Reaction output record. Field order is the serialized key order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireReaction {
    pub reactants: Vec<WireEntity>,
    pub products: Vec<WireEntity>,
    pub conditions: Vec<WireEntity>,
    pub arrow: Vec<WireEntity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

/// Serializes reactions as a JSON array, keys in output order.
pub fn wire_to_json(reactions: &[WireReaction]) -> String {
    serde_json::to_string(reactions).expect("wire reactions always serialize")
}

/// Multi-line layout: one reaction object per line.
pub fn wire_to_json_pretty(reactions: &[WireReaction]) -> String {
    if reactions.is_empty() {
        return "[]\n".to_string();
    }
    let rows: Vec<String> = reactions
        .iter()
        .map(|r| format!("  {}", serde_json::to_string(r).expect("serializable")))
        .collect();
    format!("[\n{}\n]\n", rows.join(",\n"))
}
