//! Reaction-list responses: parsing, entity resolution and serialization.

use super::{EntityKind, PerceptionError, ReactionDocument};
use crate::geometry::{iou_region, IouMode};
use crate::reaction::{Reaction, WireEntity, WireReaction};
use crate::util::strip_code_fence;

/// Minimum IoU for a response box to resolve to a document entity.
pub const RESOLVE_IOU: f64 = 0.9;

/// Strict parse of a reaction array. Reactants and products must be non-empty and the
/// `arrow` field may hold arrows only.
pub fn parse_wire_reactions(raw: &str) -> Result<Vec<WireReaction>, PerceptionError> {
    let body = strip_code_fence(raw);
    let list: Vec<WireReaction> =
        serde_json::from_str(body).map_err(|e| PerceptionError::ResponseFormat(e.to_string()))?;
    for (i, r) in list.iter().enumerate() {
        if r.reactants.is_empty() {
            return Err(PerceptionError::Constraint {
                reaction: i,
                field: "reactants",
            });
        }
        if r.products.is_empty() {
            return Err(PerceptionError::Constraint {
                reaction: i,
                field: "products",
            });
        }
        if let Some(a) = r.arrow.iter().find(|a| a.label != EntityKind::Arrow) {
            return Err(PerceptionError::ResponseFormat(format!(
                "reaction {i}: arrow field holds a {} element",
                a.label
            )));
        }
        if let Some(c) = r.confidence {
            if !(0.0..=1.0).contains(&c) {
                return Err(PerceptionError::ResponseFormat(format!(
                    "reaction {i}: confidence {c} outside [0, 1]"
                )));
            }
        }
    }
    Ok(list)
}

/// Resolves one wire entity to the best-overlapping document entity.
pub fn resolve_entity(
    w: &WireEntity,
    doc: &ReactionDocument,
    min_iou: f64,
    pointer: &str,
) -> Result<String, PerceptionError> {
    let mut best: Option<(f64, bool, usize)> = None;
    for (idx, e) in doc.entities.iter().enumerate() {
        let iou = iou_region(&w.bbox, &e.region, IouMode::Polygon);
        let same = e.kind == w.label;
        let better = match best {
            None => true,
            Some((bi, bs, _)) => iou > bi || (iou == bi && same && !bs),
        };
        if better {
            best = Some((iou, same, idx));
        }
    }
    match best {
        Some((iou, _, idx)) if iou >= min_iou => Ok(doc.entities[idx].id.clone()),
        other => Err(PerceptionError::Resolution {
            pointer: pointer.to_string(),
            best_iou: other.map(|b| b.0).unwrap_or(0.0),
        }),
    }
}

pub fn resolve_reactions(
    wire: &[WireReaction],
    doc: &ReactionDocument,
    min_iou: f64,
) -> Result<Vec<Reaction>, PerceptionError> {
    let mut out = Vec::with_capacity(wire.len());
    for (i, w) in wire.iter().enumerate() {
        let ids = |list: &[WireEntity], field: &str| -> Result<Vec<String>, PerceptionError> {
            list.iter()
                .enumerate()
                .map(|(j, e)| resolve_entity(e, doc, min_iou, &format!("/{i}/{field}/{j}")))
                .collect()
        };
        let mut r = Reaction::new(
            ids(&w.reactants, "reactants")?,
            ids(&w.products, "products")?,
            ids(&w.conditions, "conditions")?,
            ids(&w.arrow, "arrow")?,
        );
        r.score = w.confidence.unwrap_or(1.0);
        out.push(r);
    }
    Ok(out)
}

/// Parses a combiner response and resolves it against `doc`.
pub fn parse_combiner_response(
    raw: &str,
    doc: &ReactionDocument,
) -> Result<Vec<Reaction>, PerceptionError> {
    resolve_reactions(&parse_wire_reactions(raw)?, doc, RESOLVE_IOU)
}

/// Output form of `reactions`; errors on ids missing from `doc`.
pub fn reactions_to_wire(
    reactions: &[Reaction],
    doc: &ReactionDocument,
) -> Result<Vec<WireReaction>, PerceptionError> {
    let conv = |ids: &[String]| -> Result<Vec<WireEntity>, PerceptionError> {
        ids.iter()
            .map(|id| {
                let e = doc
                    .entity(id)
                    .ok_or_else(|| PerceptionError::Reference { id: id.clone() })?;
                Ok(WireEntity {
                    label: e.kind,
                    bbox: e.region.clone(),
                })
            })
            .collect()
    };
    reactions
        .iter()
        .map(|r| {
            Ok(WireReaction {
                reactants: conv(&r.reactants)?,
                products: conv(&r.products)?,
                conditions: conv(&r.conditions)?,
                arrow: conv(&r.arrows)?,
                confidence: None,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perception::{load_document, Lexicon};
    use crate::reaction::wire_to_json;

    pub(crate) const FIG: &str = r#"[
    {
        "reactants": [{"label": "molecule", "bbox": [38, 2, 434, 234]}],
        "products": [{"label": "molecule", "bbox": [912, 14, 1309, 231]}],
        "conditions": [
            {"label": "text", "bbox": [515, 66, 855, 126]},
            {"label": "text", "bbox": [577, 172, 780, 223]}
        ],
        "arrow": [{"label": "arrow", "bbox": [513, 155, 880, 153, 880, 130, 513, 132]}]
    },
    {
        "reactants": [
            {"label": "text", "bbox": [246, 48, 370, 99]},
            {"label": "identifier", "bbox": [482, 48, 540, 96]}
        ],
        "products": [{"label": "molecule", "bbox": [837, 9, 1095, 132]}],
        "conditions": [
            {"label": "text", "bbox": [597, 3, 759, 50]},
            {"label": "text", "bbox": [592, 87, 767, 137]}
        ],
        "arrow": [{"label": "arrow", "bbox": [585, 76, 789, 75, 789, 57, 585, 59]}]
    }
]"#;

    fn fig_doc() -> ReactionDocument {
        let src = r#"{"width": 1320, "height": 240, "entities": [
            {"id": "m1", "label": "molecule", "bbox": [38, 2, 434, 234]},
            {"id": "m2", "label": "molecule", "bbox": [912, 14, 1309, 231]},
            {"id": "t1", "label": "text", "bbox": [515, 66, 855, 126]},
            {"id": "t2", "label": "text", "bbox": [577, 172, 780, 223]},
            {"id": "a1", "label": "arrow", "bbox": [513, 155, 880, 153, 880, 130, 513, 132]},
            {"id": "t3", "label": "text", "bbox": [246, 48, 370, 99]},
            {"id": "i1", "label": "identifier", "bbox": [482, 48, 540, 96]},
            {"id": "m3", "label": "molecule", "bbox": [837, 9, 1095, 132]},
            {"id": "t4", "label": "text", "bbox": [597, 3, 759, 50]},
            {"id": "t5", "label": "text", "bbox": [592, 87, 767, 137]},
            {"id": "a2", "label": "arrow", "bbox": [585, 76, 789, 75, 789, 57, 585, 59]}
        ]}"#;
        load_document(src.as_bytes(), &Lexicon::builtin())
            .unwrap()
            .document
    }

    #[test]
    fn two_reaction_example() {
        let wire = parse_wire_reactions(FIG).unwrap();
        assert_eq!(wire.len(), 2);
        let shape: Vec<_> = wire
            .iter()
            .map(|r| {
                (
                    r.reactants.len(),
                    r.products.len(),
                    r.conditions.len(),
                    r.arrow.len(),
                )
            })
            .collect();
        assert_eq!(shape, [(1, 1, 2, 1), (2, 1, 2, 1)]);
        let doc = fig_doc();
        let rs = parse_combiner_response(FIG, &doc).unwrap();
        assert_eq!(rs[0].reactants, ["m1"]);
        assert_eq!(rs[0].arrows, ["a1"]);
        assert_eq!(rs[1].reactants, ["t3", "i1"]);
        assert_eq!(rs[1].conditions, ["t4", "t5"]);
    }

    #[test]
    fn reserializes_key_for_key() {
        let wire = parse_wire_reactions(FIG).unwrap();
        let out = wire_to_json(&wire);
        let a: serde_json::Value = serde_json::from_str(FIG).unwrap();
        let b: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(a, b);
        assert!(out.starts_with(
            r#"[{"reactants":[{"label":"molecule","bbox":[38,2,434,234]}],"products""#
        ));
        assert!(out.contains("[513,155,880,153,880,130,513,132]"));
    }

    #[test]
    fn empty_and_constraint_errors() {
        assert!(parse_wire_reactions("[]").unwrap().is_empty());
        let no_products = r#"[{"reactants": [{"label": "molecule", "bbox": [0,0,1,1]}], "products": [], "conditions": [], "arrow": []}]"#;
        assert!(matches!(
            parse_wire_reactions(no_products),
            Err(PerceptionError::Constraint {
                reaction: 0,
                field: "products"
            })
        ));
        assert!(matches!(
            parse_wire_reactions("not json"),
            Err(PerceptionError::ResponseFormat(_))
        ));
        assert!(matches!(
            parse_wire_reactions(r#"{"reactants": []}"#),
            Err(PerceptionError::ResponseFormat(_))
        ));
        let bad_arrow = r#"[{"reactants": [{"label": "molecule", "bbox": [0,0,1,1]}], "products": [{"label": "molecule", "bbox": [0,0,1,1]}], "conditions": [], "arrow": [{"label": "text", "bbox": [0,0,1,1]}]}]"#;
        assert!(matches!(
            parse_wire_reactions(bad_arrow),
            Err(PerceptionError::ResponseFormat(_))
        ));
        let missing_key = r#"[{"reactants": [{"label": "molecule", "bbox": [0,0,1,1]}], "products": [{"label": "molecule", "bbox": [0,0,1,1]}], "conditions": []}]"#;
        assert!(parse_wire_reactions(missing_key).is_err());
        let fenced = format!("```json\n{FIG}\n```");
        assert_eq!(parse_wire_reactions(&fenced).unwrap().len(), 2);
    }

    #[test]
    fn resolution_tolerates_small_perturbation_only() {
        let doc = fig_doc();
        let nudged = FIG.replace("[38, 2, 434, 234]", "[40, 3, 434, 233]");
        assert_eq!(
            parse_combiner_response(&nudged, &doc).unwrap()[0].reactants,
            ["m1"]
        );
        let far = FIG.replace("[38, 2, 434, 234]", "[138, 2, 434, 234]");
        match parse_combiner_response(&far, &doc) {
            Err(PerceptionError::Resolution { pointer, best_iou }) => {
                assert_eq!(pointer, "/0/reactants/0");
                assert!(best_iou < 0.9);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn own_output_round_trips() {
        let doc = fig_doc();
        let rs = parse_combiner_response(FIG, &doc).unwrap();
        let text = wire_to_json(&reactions_to_wire(&rs, &doc).unwrap());
        assert_eq!(parse_combiner_response(&text, &doc).unwrap(), rs);
        let dangling = vec![Reaction::new(
            vec!["nope".into()],
            vec!["m1".into()],
            vec![],
            vec![],
        )];
        assert!(matches!(
            reactions_to_wire(&dangling, &doc),
            Err(PerceptionError::Reference { .. })
        ));
    }
}
