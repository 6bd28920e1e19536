//! Weighted evidence fusion and threshold pruning.

use std::collections::BTreeSet;

use super::{ChemGraph, EdgeRelation, HypothesisGraph, ReasoningError, SpatialGraph};

pub const NEUTRAL_SPACE: f64 = 0.5;
pub const NEUTRAL_CHEM: f64 = 0.5;
pub const NEUTRAL_INIT: f64 = 0.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionWeights {
    space: f64,
    chem: f64,
    init: f64,
}

impl FusionWeights {
    /// Non-negative weights summing to 1 within 1e-9.
    pub fn new(space: f64, chem: f64, init: f64) -> Result<Self, ReasoningError> {
        let all = [space, chem, init];
        if all.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(ReasoningError::Weight(format!(
                "weights ({space}, {chem}, {init}) must be finite and non-negative"
            )));
        }
        let sum: f64 = all.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(ReasoningError::Weight(format!(
                "weights ({space}, {chem}, {init}) sum to {sum}, not 1"
            )));
        }
        Ok(FusionWeights { space, chem, init })
    }

    pub fn space(&self) -> f64 {
        self.space
    }

    pub fn chem(&self) -> f64 {
        self.chem
    }

    pub fn init(&self) -> f64 {
        self.init
    }
}

pub fn fuse_score(w: FusionWeights, s_space: f64, s_chem: f64, s_init: f64) -> f64 {
    w.space * s_space + w.chem * s_chem + w.init * s_init
}

/// Candidate edge. Typed edges are directed; `NoEdge` ones have `from < to`.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedEdge {
    pub from: usize,
    pub to: usize,
    pub relation: EdgeRelation,
    pub s_space: f64,
    pub s_chem: f64,
    pub s_init: f64,
    pub s_fuse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedGraph {
    node_count: usize,
    weights: FusionWeights,
    tau: f64,
    candidates: Vec<FusedEdge>,
    retained: Vec<FusedEdge>,
}

impl FusedGraph {
    /// Scores `candidates` (channels already filled in) and prunes at `tau`.
    pub fn from_candidates(
        node_count: usize,
        mut candidates: Vec<FusedEdge>,
        weights: FusionWeights,
        tau: f64,
    ) -> Result<Self, ReasoningError> {
        if !(0.0..=1.0).contains(&tau) {
            return Err(ReasoningError::Config(format!(
                "tau_fuse = {tau} outside [0, 1]"
            )));
        }
        for e in &mut candidates {
            if e.from >= node_count || e.to >= node_count || e.from == e.to {
                return Err(ReasoningError::Config(format!(
                    "bad edge ({}, {})",
                    e.from, e.to
                )));
            }
            e.s_fuse = fuse_score(weights, e.s_space, e.s_chem, e.s_init);
        }
        let retained = candidates
            .iter()
            .filter(|e| e.s_fuse > tau)
            .cloned()
            .collect();
        Ok(FusedGraph {
            node_count,
            weights,
            tau,
            candidates,
            retained,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn weights(&self) -> FusionWeights {
        self.weights
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn candidates(&self) -> &[FusedEdge] {
        &self.candidates
    }

    pub fn edges(&self) -> &[FusedEdge] {
        &self.retained
    }
}

pub fn fuse(
    spatial: &SpatialGraph,
    chem: &ChemGraph,
    hyp: &HypothesisGraph,
    weights: FusionWeights,
    tau: f64,
) -> Result<FusedGraph, ReasoningError> {
    let s_space = |a: usize, b: usize| spatial.score(a, b).unwrap_or(NEUTRAL_SPACE);
    let s_chem = |a: usize, b: usize| chem.score(a, b).unwrap_or(NEUTRAL_CHEM);
    let mut candidates = Vec::new();
    let mut typed: BTreeSet<(usize, usize)> = BTreeSet::new();
    for h in &hyp.edges {
        typed.insert((h.from.min(h.to), h.from.max(h.to)));
        candidates.push(FusedEdge {
            from: h.from,
            to: h.to,
            relation: h.relation,
            s_space: s_space(h.from, h.to),
            s_chem: s_chem(h.from, h.to),
            s_init: h.s_init,
            s_fuse: 0.0,
        });
    }
    let untyped: BTreeSet<(usize, usize)> = spatial
        .edges()
        .iter()
        .chain(chem.edges())
        .copied()
        .collect();
    for (a, b) in untyped {
        if typed.contains(&(a, b)) {
            continue;
        }
        candidates.push(FusedEdge {
            from: a,
            to: b,
            relation: EdgeRelation::NoEdge,
            s_space: s_space(a, b),
            s_chem: s_chem(a, b),
            s_init: NEUTRAL_INIT,
            s_fuse: 0.0,
        });
    }
    FusedGraph::from_candidates(spatial.node_count(), candidates, weights, tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn edge(from: usize, to: usize, s: (f64, f64, f64)) -> FusedEdge {
        FusedEdge {
            from,
            to,
            relation: EdgeRelation::NoEdge,
            s_space: s.0,
            s_chem: s.1,
            s_init: s.2,
            s_fuse: 0.0,
        }
    }

    #[test]
    fn equal_weights_average() {
        let w = FusionWeights::new(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0).unwrap();
        assert!((fuse_score(w, 0.9, 0.6, 0.3) - 0.6).abs() < 1e-12);
    }

    #[test]
    fn weight_validation() {
        assert!(FusionWeights::new(0.3, 0.2, 0.5).is_ok());
        assert!(matches!(
            FusionWeights::new(0.5, 0.5, 0.5),
            Err(ReasoningError::Weight(_))
        ));
        assert!(matches!(
            FusionWeights::new(1.2, -0.2, 0.0),
            Err(ReasoningError::Weight(_))
        ));
        assert!(FusionWeights::new(f64::NAN, 0.5, 0.5).is_err());
    }

    #[test]
    fn threshold_filter() {
        let w = FusionWeights::new(1.0, 0.0, 0.0).unwrap();
        let c = vec![
            edge(0, 1, (0.6, 0.0, 0.0)),
            edge(1, 2, (0.5, 0.0, 0.0)),
            edge(0, 2, (0.7, 0.0, 0.0)),
        ];
        let g = FusedGraph::from_candidates(3, c, w, 0.55).unwrap();
        assert_eq!(g.edges().len(), 2);
        assert!(g.edges().iter().all(|e| e.s_fuse > 0.55));
    }

    fn unit() -> impl Strategy<Value = f64> {
        0.0..=1.0f64
    }

    fn alphas() -> impl Strategy<Value = FusionWeights> {
        (0.01..1.0f64, 0.01..1.0f64, 0.01..1.0f64).prop_map(|(a, b, c)| {
            let s = a + b + c;
            let (a, b) = (a / s, b / s);
            FusionWeights::new(a, b, 1.0 - a - b).unwrap()
        })
    }

    proptest! {
        #[test]
        fn monotone_in_each_channel(w in alphas(), s in (unit(), unit(), unit()), bump in 0.0..0.5f64, ch in 0usize..3) {
            let base = fuse_score(w, s.0, s.1, s.2);
            let mut t = [s.0, s.1, s.2];
            t[ch] = (t[ch] + bump).min(1.0);
            prop_assert!(fuse_score(w, t[0], t[1], t[2]) >= base - 1e-15);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&base));
        }

        #[test]
        fn degenerate_weights_follow_one_channel(
            scores in prop::collection::vec((unit(), unit(), unit()), 1..20),
            ch in 0usize..3,
        ) {
            let mut a = [0.0; 3];
            a[ch] = 1.0;
            let w = FusionWeights::new(a[0], a[1], a[2]).unwrap();
            let fused: Vec<f64> = scores.iter().map(|s| fuse_score(w, s.0, s.1, s.2)).collect();
            let chan: Vec<f64> = scores.iter().map(|s| [s.0, s.1, s.2][ch]).collect();
            let order = |v: &[f64]| {
                let mut ix: Vec<usize> = (0..v.len()).collect();
                ix.sort_by(|&x, &y| v[x].total_cmp(&v[y]).then(x.cmp(&y)));
                ix
            };
            prop_assert_eq!(order(&fused), order(&chan));
        }

        #[test]
        fn pruning_is_sound(scores in prop::collection::vec((unit(), unit(), unit()), 1..30), tau in unit(), w in alphas()) {
            let n = scores.len() + 1;
            let c: Vec<FusedEdge> = scores.iter().enumerate().map(|(i, s)| edge(i, i + 1, *s)).collect();
            let g = FusedGraph::from_candidates(n, c, w, tau).unwrap();
            for e in g.candidates() {
                let kept = g.edges().iter().any(|r| r.from == e.from && r.to == e.to);
                prop_assert_eq!(kept, e.s_fuse > tau);
            }
        }
    }
}
