//! Single-link proximity clustering.

use super::ReasoningConfig;
use crate::geometry::center_distance_normalized;
use crate::perception::ReactionDocument;
use crate::util::UnionFind;

/// Components of the graph linking entities closer than `tau_cluster`. Members are in
/// document order; clusters are ordered by their top-left-most member box.
pub fn cluster_entities(doc: &ReactionDocument, config: &ReasoningConfig) -> Vec<Vec<usize>> {
    let n = doc.entities.len();
    let mut uf = UnionFind::new(n);
    for i in 0..n {
        for j in i + 1..n {
            let d = center_distance_normalized(
                &doc.entities[i].region,
                &doc.entities[j].region,
                &doc.diagram_bounds,
            );
            if d < config.tau_cluster {
                uf.union(i, j);
            }
        }
    }
    let mut groups = uf.groups();
    let key = |g: &Vec<usize>| {
        g.iter()
            .map(|&i| {
                let b = doc.entities[i].region.bounding_box();
                (b.y_min(), b.x_min(), i)
            })
            .min_by(|a, b| {
                a.0.total_cmp(&b.0)
                    .then(a.1.total_cmp(&b.1))
                    .then(a.2.cmp(&b.2))
            })
            .expect("groups are non-empty")
    };
    groups.sort_by(|a, b| {
        let (ka, kb) = (key(a), key(b));
        ka.0.total_cmp(&kb.0)
            .then(ka.1.total_cmp(&kb.1))
            .then(ka.2.cmp(&kb.2))
    });
    groups
}
