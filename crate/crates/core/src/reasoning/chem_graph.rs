//! Chemistry-aware graph over molecule entities.

use std::collections::BTreeMap;

use super::ReasoningConfig;
use crate::chem::{fingerprint, tanimoto, Fingerprint};
use crate::perception::{EntityKind, ReactionDocument};

/// Neutral score for pairs where either side has no parsed structure.
pub const NEUTRAL_CHEM: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct ChemGraph {
    /// Every molecule-molecule pair, keyed (i, j) with i < j.
    scores: BTreeMap<(usize, usize), f64>,
    edges: Vec<(usize, usize)>,
    tau: f64,
}

/// beta * s_fp + (1 - beta) * exp(-dq)
pub fn chem_score(s_fp: f64, dq: f64, beta: f64) -> f64 {
    (beta * s_fp + (1.0 - beta) * (-dq.abs()).exp()).clamp(0.0, 1.0)
}

impl ChemGraph {
    pub fn from_scores(scores: BTreeMap<(usize, usize), f64>, tau: f64) -> Self {
        let scores: BTreeMap<_, _> = scores
            .into_iter()
            .map(|((a, b), s)| ((a.min(b), a.max(b)), s))
            .collect();
        let edges = scores
            .iter()
            .filter(|(_, s)| **s > tau)
            .map(|(k, _)| *k)
            .collect();
        ChemGraph { scores, edges, tau }
    }

    pub fn score(&self, i: usize, j: usize) -> Option<f64> {
        self.scores.get(&(i.min(j), i.max(j))).copied()
    }

    pub fn scores(&self) -> &BTreeMap<(usize, usize), f64> {
        &self.scores
    }

    /// Pairs with score above the threshold.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }
}

pub fn build_chem_graph(doc: &ReactionDocument, config: &ReasoningConfig) -> ChemGraph {
    let mols: Vec<usize> = (0..doc.entities.len())
        .filter(|&i| doc.entities[i].kind == EntityKind::Molecule)
        .collect();
    let fps: BTreeMap<usize, (Fingerprint, i64)> = mols
        .iter()
        .filter_map(|&i| {
            doc.entities[i].molecule().map(|m| {
                (
                    i,
                    (fingerprint(m, &config.fingerprint), m.formal_charge_sum()),
                )
            })
        })
        .collect();
    let mut scores = BTreeMap::new();
    for (x, &i) in mols.iter().enumerate() {
        for &j in &mols[x + 1..] {
            let s = match (fps.get(&i), fps.get(&j)) {
                (Some((fa, qa)), Some((fb, qb))) => {
                    let sim = tanimoto(fa, fb).expect("fingerprints share one config");
                    chem_score(sim, (qa - qb).abs() as f64, config.beta)
                }
                _ => NEUTRAL_CHEM,
            };
            scores.insert((i, j), s);
        }
    }
    ChemGraph::from_scores(scores, config.tau_chem)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perception::{load_document, Lexicon};

    fn doc(smiles: &[Option<&str>]) -> ReactionDocument {
        let ents: Vec<String> = smiles
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let x = 10 * i;
                let sm = s
                    .map(|s| format!(r#", "smiles": "{s}""#))
                    .unwrap_or_default();
                format!(
                    r#"{{"id": "m{i}", "label": "molecule", "bbox": [{x}, 0, {}, 5]{sm}}}"#,
                    x + 5
                )
            })
            .collect();
        let src = format!(
            r#"{{"width": 200, "height": 20, "entities": [{}]}}"#,
            ents.join(",")
        );
        load_document(src.as_bytes(), &Lexicon::builtin())
            .unwrap()
            .document
    }

    #[test]
    fn identical_molecules_score_one() {
        let d = doc(&[Some("CCO"), Some("CCO")]);
        let g = build_chem_graph(&d, &ReasoningConfig::default());
        assert!((g.score(0, 1).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(g.edges(), &[(0, 1)]);
    }

    #[test]
    fn formula_values() {
        assert!((chem_score(0.0, 0.0, 0.7) - 0.3).abs() < 1e-12);
        assert!((chem_score(1.0, 0.0, 0.7) - 1.0).abs() < 1e-12);
        assert!((chem_score(1.0, 60.0, 0.7) - 0.7).abs() < 1e-12);
    }

    #[test]
    fn disjoint_fingerprints_sit_at_threshold() {
        // no shared paths: only the charge term remains
        let d = doc(&[Some("C"), Some("O")]);
        let g = build_chem_graph(&d, &ReasoningConfig::default());
        let s = g.score(0, 1).unwrap();
        assert!((s - 0.3).abs() < 1e-12);
        assert_eq!(g.edges().is_empty(), s <= g.tau());
        let strict = ChemGraph::from_scores(g.scores().clone(), 0.31);
        assert!(strict.edges().is_empty());
    }

    #[test]
    fn missing_structures_are_neutral() {
        let d = doc(&[Some("CCO"), None, Some("C1CC")]);
        let g = build_chem_graph(&d, &ReasoningConfig::default());
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            assert_eq!(g.score(a, b), Some(NEUTRAL_CHEM));
        }
        assert_eq!(g.edges().len(), 3);
    }

    #[test]
    fn charge_difference_lowers_score() {
        let d = doc(&[Some("[NH4+]"), Some("N")]);
        let g = build_chem_graph(&d, &ReasoningConfig::default());
        let s = g.score(0, 1).unwrap();
        assert!(s < 0.7 + 0.3 * (-1.0f64).exp() + 1e-12);
        assert!((0.0..=1.0).contains(&s));
    }
}
