//! Clean-up of inferred reactions: identifier substitution, empty-side removal,
//! conservation flags and output order.

use std::collections::BTreeSet;

use super::ReasoningConfig;
use crate::chem::{conservation_residual, Molecule};
use crate::perception::{EntityKind, ReactionDocument};
use crate::reaction::{ConservationFlag, Reaction};

/// Swaps identifiers for their referenced molecules. An entity listed twice keeps its
/// first direct (non-substituted) occurrence, scanning reactants, products, conditions.
fn substitute(r: &mut Reaction, doc: &ReactionDocument) {
    let sub = |id: &String| -> (String, bool) {
        match doc.entity(id).and_then(|e| e.molecule_ref()) {
            Some(m) if doc.entity(m).is_some() => (m.to_string(), true),
            _ => (id.clone(), false),
        }
    };
    let lists: [Vec<(String, bool)>; 3] = [
        r.reactants.iter().map(sub).collect(),
        r.products.iter().map(sub).collect(),
        r.conditions.iter().map(sub).collect(),
    ];
    let mut keep: Vec<(String, usize)> = Vec::new();
    let ids: BTreeSet<&String> = lists.iter().flatten().map(|(id, _)| id).collect();
    for id in ids {
        let direct = lists
            .iter()
            .position(|l| l.iter().any(|(x, s)| x == id && !s));
        let any = lists.iter().position(|l| l.iter().any(|(x, _)| x == id));
        keep.push((id.clone(), direct.or(any).expect("id came from a list")));
    }
    let mut out: [Vec<String>; 3] = Default::default();
    for (k, list) in lists.iter().enumerate() {
        for (id, _) in list {
            let home = keep.iter().find(|(x, _)| x == id).map(|(_, h)| *h);
            if home == Some(k) && !out[k].contains(id) {
                out[k].push(id.clone());
            }
        }
    }
    let [re, pr, co] = out;
    r.reactants = re;
    r.products = pr;
    r.conditions = co;
}

fn molecules<'a>(ids: &[String], doc: &'a ReactionDocument) -> Option<Vec<Molecule>> {
    ids.iter()
        .map(|id| doc.entity(id).and_then(|e| e.molecule()).cloned())
        .collect()
}

fn top_left(r: &Reaction, doc: &ReactionDocument) -> (f64, f64) {
    r.reactants
        .iter()
        .filter_map(|id| doc.entity(id))
        .map(|e| {
            let b = e.region.bounding_box();
            (b.y_min(), b.x_min())
        })
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)))
        .unwrap_or((f64::INFINITY, f64::INFINITY))
}

pub fn post_process(
    reactions: Vec<Reaction>,
    doc: &ReactionDocument,
    config: &ReasoningConfig,
) -> Vec<Reaction> {
    let mut out: Vec<Reaction> = Vec::with_capacity(reactions.len());
    for mut r in reactions {
        substitute(&mut r, doc);
        r.arrows
            .retain(|id| doc.entity(id).is_some_and(|e| e.kind == EntityKind::Arrow));
        if r.reactants.is_empty() || r.products.is_empty() {
            continue;
        }
        r.molecule_conditions = r.conditions.iter().any(|id| {
            doc.entity(id)
                .is_some_and(|e| e.kind == EntityKind::Molecule)
        });
        r.conservation = match (molecules(&r.reactants, doc), molecules(&r.products, doc)) {
            (Some(a), Some(b)) => {
                let res = conservation_residual(&a, &b);
                if res.is_balanced() {
                    ConservationFlag::Balanced
                } else {
                    r.score *= config.conservation_penalty;
                    ConservationFlag::Unbalanced(res)
                }
            }
            _ => ConservationFlag::Unknown,
        };
        out.push(r);
    }
    let mut keyed: Vec<((f64, f64), Reaction)> =
        out.into_iter().map(|r| (top_left(&r, doc), r)).collect();
    keyed.sort_by(|(ka, a), (kb, b)| {
        b.score
            .total_cmp(&a.score)
            .then(ka.0.total_cmp(&kb.0))
            .then(ka.1.total_cmp(&kb.1))
    });
    keyed.into_iter().map(|(_, r)| r).collect()
}
