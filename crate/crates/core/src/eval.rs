//! Box-level evaluation of predicted reactions against ground truth.
//!
//! Entities match when their labels agree and IoU strictly exceeds the threshold.
//! Reaction sets are paired by maximum bipartite matching; among maximum matchings the
//! lexicographically smallest list of (gt, pred) pairs is reported.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::geometry::{iou_region, IouMode, Region};
use crate::perception::{EntityKind, LayoutClass};
use crate::reaction::{WireEntity, WireReaction};

pub const DEFAULT_IOU: f64 = 0.5;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("document ids differ: only in gt {only_gt:?}, only in pred {only_pred:?}")]
    Alignment {
        only_gt: Vec<String>,
        only_pred: Vec<String>,
    },
    #[error("corpus format: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Hard,
    Soft,
}

impl Criterion {
    pub fn as_str(self) -> &'static str {
        match self {
            Criterion::Hard => "hard",
            Criterion::Soft => "soft",
        }
    }

    pub fn parse(s: &str) -> Option<Criterion> {
        match s {
            "hard" => Some(Criterion::Hard),
            "soft" => Some(Criterion::Soft),
            _ => None,
        }
    }
}

/// IoU strictly above `threshold`.
pub fn entities_match(a: &Region, b: &Region, threshold: f64) -> bool {
    iou_region(a, b, IouMode::Polygon) > threshold
}

fn entity_match(a: &WireEntity, b: &WireEntity, threshold: f64) -> bool {
    a.label == b.label && entities_match(&a.bbox, &b.bbox, threshold)
}

/// Hopcroft-Karp. `adj[i]` lists the right vertices of left vertex `i`.
pub fn max_matching_size(adj: &[Vec<usize>], n_right: usize) -> usize {
    const INF: usize = usize::MAX;
    let n = adj.len();
    let mut ml = vec![None; n];
    let mut mr: Vec<Option<usize>> = vec![None; n_right];
    let mut dist = vec![INF; n];
    let mut size = 0;
    loop {
        let mut q = VecDeque::new();
        for i in 0..n {
            if ml[i].is_none() {
                dist[i] = 0;
                q.push_back(i);
            } else {
                dist[i] = INF;
            }
        }
        let mut found = false;
        while let Some(i) = q.pop_front() {
            for &j in &adj[i] {
                match mr[j] {
                    None => found = true,
                    Some(k) if dist[k] == INF => {
                        dist[k] = dist[i] + 1;
                        q.push_back(k);
                    }
                    _ => {}
                }
            }
        }
        if !found {
            return size;
        }
        fn dfs(
            i: usize,
            adj: &[Vec<usize>],
            ml: &mut [Option<usize>],
            mr: &mut [Option<usize>],
            dist: &mut [usize],
        ) -> bool {
            for &j in &adj[i] {
                let ok = match mr[j] {
                    None => true,
                    Some(k) => dist[k] == dist[i] + 1 && dfs(k, adj, ml, mr, dist),
                };
                if ok {
                    ml[i] = Some(j);
                    mr[j] = Some(i);
                    return true;
                }
            }
            dist[i] = usize::MAX;
            false
        }
        for i in 0..n {
            if ml[i].is_none() && dfs(i, adj, &mut ml, &mut mr, &mut dist) {
                size += 1;
            }
        }
    }
}

/// Maximum matching whose pair list, sorted by left index, is lexicographically smallest.
pub fn lexicographic_max_matching(adj: &[Vec<usize>], n_right: usize) -> Vec<(usize, usize)> {
    let target = max_matching_size(adj, n_right);
    let mut pairs = Vec::with_capacity(target);
    let mut used = vec![false; n_right];
    for i in 0..adj.len() {
        if pairs.len() == target {
            break;
        }
        let mut cands: Vec<usize> = adj[i].iter().copied().filter(|&j| !used[j]).collect();
        cands.sort_unstable();
        cands.dedup();
        for j in cands {
            used[j] = true;
            let rest: Vec<Vec<usize>> = adj[i + 1..]
                .iter()
                .map(|row| row.iter().copied().filter(|&k| !used[k]).collect())
                .collect();
            if pairs.len() + 1 + max_matching_size(&rest, n_right) == target {
                pairs.push((i, j));
                break;
            }
            used[j] = false;
        }
    }
    pairs
}

fn sets_match(a: &[&WireEntity], b: &[&WireEntity], threshold: f64) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let adj: Vec<Vec<usize>> = a
        .iter()
        .map(|x| {
            (0..b.len())
                .filter(|&j| entity_match(x, b[j], threshold))
                .collect()
        })
        .collect();
    max_matching_size(&adj, b.len()) == a.len()
}

fn all(list: &[WireEntity]) -> Vec<&WireEntity> {
    list.iter().collect()
}

fn molecules(list: &[WireEntity]) -> Vec<&WireEntity> {
    list.iter()
        .filter(|e| e.label == EntityKind::Molecule)
        .collect()
}

pub fn reaction_matches_hard(pred: &WireReaction, gt: &WireReaction, threshold: f64) -> bool {
    sets_match(&all(&pred.reactants), &all(&gt.reactants), threshold)
        && sets_match(&all(&pred.conditions), &all(&gt.conditions), threshold)
        && sets_match(&all(&pred.products), &all(&gt.products), threshold)
}

pub fn reaction_matches_soft(pred: &WireReaction, gt: &WireReaction, threshold: f64) -> bool {
    sets_match(
        &molecules(&pred.reactants),
        &molecules(&gt.reactants),
        threshold,
    ) && sets_match(
        &molecules(&pred.products),
        &molecules(&gt.products),
        threshold,
    )
}

pub fn reaction_matches(
    pred: &WireReaction,
    gt: &WireReaction,
    criterion: Criterion,
    threshold: f64,
) -> bool {
    match criterion {
        Criterion::Hard => reaction_matches_hard(pred, gt, threshold),
        Criterion::Soft => reaction_matches_soft(pred, gt, threshold),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub gt: usize,
    pub pred: usize,
    pub matched: usize,
}

impl Prf {
    /// Empty prediction sets score precision 1, empty gt sets recall 1.
    pub fn from_counts(gt: usize, pred: usize, matched: usize) -> Prf {
        let precision = if pred == 0 {
            1.0
        } else {
            matched as f64 / pred as f64
        };
        let recall = if gt == 0 {
            1.0
        } else {
            matched as f64 / gt as f64
        };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Prf {
            precision,
            recall,
            f1,
            gt,
            pred,
            matched,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentScore {
    pub id: String,
    pub layout: Option<LayoutClass>,
    pub gt: usize,
    pub pred: usize,
    pub matched_pairs: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub criterion: Criterion,
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub gt: usize,
    pub pred: usize,
    pub matched: usize,
    pub matched_pairs: Vec<(usize, usize)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_layout: Option<BTreeMap<String, Prf>>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub documents: Vec<DocumentScore>,
}

impl MatchReport {
    fn new(criterion: Criterion, threshold: f64, prf: Prf) -> Self {
        MatchReport {
            criterion,
            threshold,
            precision: prf.precision,
            recall: prf.recall,
            f1: prf.f1,
            gt: prf.gt,
            pred: prf.pred,
            matched: prf.matched,
            matched_pairs: Vec::new(),
            per_layout: None,
            documents: Vec::new(),
        }
    }

    pub fn prf(&self) -> Prf {
        Prf::from_counts(self.gt, self.pred, self.matched)
    }
}

fn matched_pairs(
    gt: &[WireReaction],
    pred: &[WireReaction],
    criterion: Criterion,
    threshold: f64,
) -> Vec<(usize, usize)> {
    let adj: Vec<Vec<usize>> = gt
        .iter()
        .map(|g| {
            (0..pred.len())
                .filter(|&j| reaction_matches(&pred[j], g, criterion, threshold))
                .collect()
        })
        .collect();
    lexicographic_max_matching(&adj, pred.len())
}

pub fn score(
    gt: &[WireReaction],
    pred: &[WireReaction],
    criterion: Criterion,
    threshold: f64,
) -> MatchReport {
    let pairs = matched_pairs(gt, pred, criterion, threshold);
    let mut r = MatchReport::new(
        criterion,
        threshold,
        Prf::from_counts(gt.len(), pred.len(), pairs.len()),
    );
    r.matched_pairs = pairs;
    r
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalDocument {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<LayoutClass>,
    pub reactions: Vec<WireReaction>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CorpusFile {
    documents: Vec<EvalDocument>,
}

/// Either `{"documents": [{"id", "layout", "reactions"}]}` or a bare reaction array,
/// read as one unnamed document.
pub fn load_corpus(bytes: &[u8]) -> Result<Vec<EvalDocument>, EvalError> {
    let v: Value = serde_json::from_slice(bytes).map_err(|e| EvalError::Format(e.to_string()))?;
    if v.is_array() {
        let reactions: Vec<WireReaction> =
            serde_json::from_value(v).map_err(|e| EvalError::Format(e.to_string()))?;
        return Ok(vec![EvalDocument {
            id: String::new(),
            layout: None,
            reactions,
        }]);
    }
    let file: CorpusFile =
        serde_json::from_value(v).map_err(|e| EvalError::Format(e.to_string()))?;
    let mut seen = BTreeSet::new();
    for d in &file.documents {
        if !seen.insert(d.id.as_str()) {
            return Err(EvalError::Format(format!(
                "duplicate document id '{}'",
                d.id
            )));
        }
    }
    Ok(file.documents)
}

pub fn corpus_to_json(docs: &[EvalDocument]) -> String {
    serde_json::to_string(&CorpusFile {
        documents: docs.to_vec(),
    })
    .expect("corpus serializes")
}

/// Pairs documents by id, in gt order.
pub fn align(
    gt: Vec<EvalDocument>,
    pred: Vec<EvalDocument>,
) -> Result<Vec<(EvalDocument, EvalDocument)>, EvalError> {
    let gt_ids: BTreeSet<String> = gt.iter().map(|d| d.id.clone()).collect();
    let pred_ids: BTreeSet<String> = pred.iter().map(|d| d.id.clone()).collect();
    if gt_ids != pred_ids {
        return Err(EvalError::Alignment {
            only_gt: gt_ids.difference(&pred_ids).cloned().collect(),
            only_pred: pred_ids.difference(&gt_ids).cloned().collect(),
        });
    }
    let mut by_id: BTreeMap<String, EvalDocument> =
        pred.into_iter().map(|d| (d.id.clone(), d)).collect();
    Ok(gt
        .into_iter()
        .map(|g| {
            let p = by_id.remove(&g.id).expect("ids checked");
            (g, p)
        })
        .collect())
}

pub const UNLABELED_LAYOUT: &str = "unlabeled";

/// Micro-averaged score with a per-layout breakdown keyed by the gt layouts present.
pub fn score_corpus(
    pairs: &[(EvalDocument, EvalDocument)],
    criterion: Criterion,
    threshold: f64,
) -> Result<MatchReport, EvalError> {
    for (g, p) in pairs {
        if g.id != p.id {
            return Err(EvalError::Alignment {
                only_gt: vec![g.id.clone()],
                only_pred: vec![p.id.clone()],
            });
        }
    }
    let docs: Vec<DocumentScore> = pairs
        .par_iter()
        .map(|(g, p)| DocumentScore {
            id: g.id.clone(),
            layout: g.layout,
            gt: g.reactions.len(),
            pred: p.reactions.len(),
            matched_pairs: matched_pairs(&g.reactions, &p.reactions, criterion, threshold),
        })
        .collect();
    let mut layouts: BTreeMap<String, (usize, usize, usize)> = BTreeMap::new();
    let (mut gt, mut pred, mut matched) = (0, 0, 0);
    for d in &docs {
        gt += d.gt;
        pred += d.pred;
        matched += d.matched_pairs.len();
        let key = d
            .layout
            .map_or(UNLABELED_LAYOUT, |l| l.as_str())
            .to_string();
        let e = layouts.entry(key).or_default();
        e.0 += d.gt;
        e.1 += d.pred;
        e.2 += d.matched_pairs.len();
    }
    let mut r = MatchReport::new(criterion, threshold, Prf::from_counts(gt, pred, matched));
    r.per_layout = Some(
        layouts
            .into_iter()
            .map(|(k, (g, p, m))| (k, Prf::from_counts(g, p, m)))
            .collect(),
    );
    r.documents = docs;
    Ok(r)
}

const LAYOUT_ORDER: [&str; 5] = [
    "single_line",
    "multiple_line",
    "tree",
    "graph",
    UNLABELED_LAYOUT,
];

/// Percent table with one column triple per report, optionally one row per layout.
pub fn format_table(reports: &[&MatchReport], per_layout: bool) -> String {
    let mut out = String::new();
    let _ = write!(out, "{:<16}", "");
    for r in reports {
        let _ = write!(out, " | {:^23}", format!("{} match", r.criterion.as_str()));
    }
    out.push('\n');
    let _ = write!(out, "{:<16}", "subset");
    for _ in reports {
        let _ = write!(out, " | {:>7}{:>8}{:>8}", "P", "R", "F1");
    }
    out.push('\n');
    let row = |out: &mut String, name: &str, cells: Vec<Option<Prf>>| {
        let _ = write!(out, "{name:<16}");
        for c in cells {
            match c {
                Some(p) => {
                    let _ = write!(
                        out,
                        " | {:>7.1}{:>8.1}{:>8.1}",
                        100.0 * p.precision,
                        100.0 * p.recall,
                        100.0 * p.f1
                    );
                }
                None => {
                    let _ = write!(out, " | {:>7}{:>8}{:>8}", "-", "-", "-");
                }
            }
        }
        out.push('\n');
    };
    row(
        &mut out,
        "overall",
        reports.iter().map(|r| Some(r.prf())).collect(),
    );
    if per_layout {
        let keys: BTreeSet<&str> = reports
            .iter()
            .filter_map(|r| r.per_layout.as_ref())
            .flat_map(|m| m.keys().map(String::as_str))
            .collect();
        for k in LAYOUT_ORDER.iter().filter(|k| keys.contains(*k)) {
            let cells = reports
                .iter()
                .map(|r| r.per_layout.as_ref().and_then(|m| m.get(*k)).copied())
                .collect();
            row(&mut out, k, cells);
        }
    }
    out
}
