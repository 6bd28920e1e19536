//! Graph reasoning: spatial, chemical and hypothesis graphs, fusion, inference and
//! post-processing.

mod chem_graph;
mod cluster;
mod fuse;
mod hypothesis;
mod infer;
mod post;
mod spatial;
mod weights;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use chem_graph::{build_chem_graph, chem_score, ChemGraph};
pub use cluster::cluster_entities;
pub use fuse::{fuse, fuse_score, FusedEdge, FusedGraph, FusionWeights};
pub use hypothesis::{
    collect_hypotheses, edges_from_reactions, ClusterOutcome, HypothesisEdge, HypothesisGraph,
};
pub use infer::{arrow_groups, infer_reactions, ArrowGroup, Role};
pub use post::post_process;
pub use spatial::{
    build_spatial_graph, edge_features, shifted_cosine, spatial_edges, SpatialGraph, BASE_FEATURES,
    EDGE_FEATURES, SKETCH_BINS,
};
pub use weights::{GnnWeights, LayerWeights, Matrix, WEIGHTS_FORMAT};

use crate::chem::FingerprintConfig;
use crate::perception::{AgentClient, AgentError, ReactionDocument};
use crate::reaction::Reaction;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ReasoningError {
    #[error("reasoning config: {0}")]
    Config(String),
    #[error("fusion weights: {0}")]
    Weight(String),
    #[error(transparent)]
    Agent(#[from] AgentError),
}

/// Typed relation between two entities. Code 4 is reserved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EdgeRelation {
    ReactantToCond,
    CondToProduct,
    ReactantToProduct,
    NoEdge,
    ReactantToArrow,
    ArrowToProduct,
}

pub const NUM_RELATIONS: u8 = 4;

impl EdgeRelation {
    pub fn code(self) -> u8 {
        match self {
            EdgeRelation::ReactantToCond => 0,
            EdgeRelation::CondToProduct => 1,
            EdgeRelation::ReactantToProduct => 2,
            EdgeRelation::NoEdge => 3,
            EdgeRelation::ReactantToArrow => 5,
            EdgeRelation::ArrowToProduct => 6,
        }
    }

    pub fn from_code(code: u8) -> Option<EdgeRelation> {
        Some(match code {
            0 => EdgeRelation::ReactantToCond,
            1 => EdgeRelation::CondToProduct,
            2 => EdgeRelation::ReactantToProduct,
            3 => EdgeRelation::NoEdge,
            5 => EdgeRelation::ReactantToArrow,
            6 => EdgeRelation::ArrowToProduct,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReasoningConfig {
    pub k_nn: usize,
    pub radius: f64,
    pub layers: usize,
    pub dim: usize,
    pub beta: f64,
    pub tau_chem: f64,
    pub tau_cluster: f64,
    pub tau_fuse: f64,
    pub alpha_space: f64,
    pub alpha_chem: f64,
    pub alpha_init: f64,
    pub exact_search_limit: usize,
    pub conservation_penalty: f64,
    /// Max head-to-tail gap, as a fraction of the diagram diagonal, for merging arrows.
    pub merge_gap: f64,
    pub weights_seed: u64,
    #[serde(skip)]
    pub fingerprint: FingerprintConfig,
}

impl Default for ReasoningConfig {
    fn default() -> Self {
        ReasoningConfig {
            k_nn: 4,
            radius: 0.25,
            layers: 2,
            dim: 32,
            beta: 0.7,
            tau_chem: 0.3,
            tau_cluster: 0.35,
            tau_fuse: 0.45,
            alpha_space: 0.3,
            alpha_chem: 0.2,
            alpha_init: 0.5,
            exact_search_limit: 12,
            conservation_penalty: 0.9,
            merge_gap: 0.05,
            weights_seed: 0,
            fingerprint: FingerprintConfig::default(),
        }
    }
}

impl ReasoningConfig {
    pub fn fusion_weights(&self) -> Result<FusionWeights, ReasoningError> {
        FusionWeights::new(self.alpha_space, self.alpha_chem, self.alpha_init)
    }

    pub fn validate(&self) -> Result<(), ReasoningError> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(ReasoningError::Config(format!(
                    "{name} = {v} outside [0, 1]"
                )))
            }
        };
        unit("beta", self.beta)?;
        unit("tau_chem", self.tau_chem)?;
        unit("tau_cluster", self.tau_cluster)?;
        unit("tau_fuse", self.tau_fuse)?;
        unit("conservation_penalty", self.conservation_penalty)?;
        if !(self.radius.is_finite() && self.radius >= 0.0) {
            return Err(ReasoningError::Config(format!(
                "radius = {} must be >= 0",
                self.radius
            )));
        }
        if !(self.merge_gap.is_finite() && self.merge_gap >= 0.0) {
            return Err(ReasoningError::Config(format!(
                "merge_gap = {} must be >= 0",
                self.merge_gap
            )));
        }
        if self.layers == 0 {
            return Err(ReasoningError::Config("layers must be >= 1".into()));
        }
        if self.dim < BASE_FEATURES {
            return Err(ReasoningError::Config(format!(
                "dim = {} is below the {BASE_FEATURES} base features",
                self.dim
            )));
        }
        self.fusion_weights().map(|_| ())
    }
}

/// Intermediate graphs of one reasoning pass, kept for inspection.
#[derive(Debug, Clone)]
pub struct ReasoningTrace {
    pub spatial: SpatialGraph,
    pub chem: ChemGraph,
    pub hypotheses: HypothesisGraph,
    pub fused: FusedGraph,
}

#[derive(Debug, Clone)]
pub struct ReasoningOutput {
    pub reactions: Vec<Reaction>,
    pub trace: ReasoningTrace,
}

/// Full pass: graphs, fusion, inference and post-processing.
pub fn reason(
    doc: &ReactionDocument,
    config: &ReasoningConfig,
    weights: Arc<GnnWeights>,
    client: &AgentClient,
) -> Result<ReasoningOutput, ReasoningError> {
    config.validate()?;
    let alpha = config.fusion_weights()?;
    let spatial = build_spatial_graph(doc, config, weights)?.propagate(config.layers)?;
    let chem = build_chem_graph(doc, config);
    let clusters = cluster_entities(doc, config);
    let hypotheses = collect_hypotheses(&clusters, client, doc, &spatial, &chem)?;
    let fused = fuse(&spatial, &chem, &hypotheses, alpha, config.tau_fuse)?;
    let inferred = infer_reactions(&fused, doc, config);
    let reactions = post_process(inferred, doc, config);
    Ok(ReasoningOutput {
        reactions,
        trace: ReasoningTrace {
            spatial,
            chem,
            hypotheses,
            fused,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relation_codes() {
        let all = [
            (EdgeRelation::ReactantToCond, 0),
            (EdgeRelation::CondToProduct, 1),
            (EdgeRelation::ReactantToProduct, 2),
            (EdgeRelation::NoEdge, 3),
            (EdgeRelation::ReactantToArrow, 5),
            (EdgeRelation::ArrowToProduct, 6),
        ];
        for (r, c) in all {
            assert_eq!(r.code(), c);
            assert_eq!(EdgeRelation::from_code(c), Some(r));
        }
        assert_eq!(NUM_RELATIONS, 4);
        assert_eq!(EdgeRelation::from_code(NUM_RELATIONS), None);
    }

    #[test]
    fn config_validation() {
        ReasoningConfig::default().validate().unwrap();
        let c = ReasoningConfig {
            alpha_init: 0.6,
            ..Default::default()
        };
        assert!(matches!(c.validate(), Err(ReasoningError::Weight(_))));
        let c = ReasoningConfig {
            tau_fuse: 1.5,
            ..Default::default()
        };
        assert!(matches!(c.validate(), Err(ReasoningError::Config(_))));
        let c = ReasoningConfig {
            dim: 8,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }
}
