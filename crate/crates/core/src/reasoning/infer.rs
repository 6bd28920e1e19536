//! Global reaction inference over the pruned fused graph.
//!
//! Each connected component is solved on its own. Arrows that continue one another are
//! merged into groups first. Every non-arrow entity then gets the (group, role) pairs its
//! edges support, and the search picks for each entity at most one group per role and
//! one role per group, maximizing the summed s_fuse of edges that agree with the picks.
//! Only groups with a reactant and a product count.

use std::collections::BTreeSet;

use super::{EdgeRelation, FusedEdge, FusedGraph, ReasoningConfig};
use crate::geometry::{AxisBox, Point};
use crate::perception::{EntityKind, ReactionDocument};
use crate::reaction::Reaction;
use crate::util::UnionFind;

const EPS: f64 = 1e-12;
const MERGE_COS: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    Reactant = 0,
    Condition = 1,
    Product = 2,
}

const ROLES: [Role; 3] = [Role::Reactant, Role::Condition, Role::Product];

#[derive(Debug, Clone, PartialEq)]
pub struct ArrowGroup {
    pub arrows: Vec<usize>,
    pub tail: Point,
    pub head: Point,
}

impl ArrowGroup {
    /// Position of `p` along tail -> head: 0 at the tail, 1 at the head.
    pub fn projection(&self, p: Point) -> f64 {
        let (dx, dy) = (self.head.x - self.tail.x, self.head.y - self.tail.y);
        let l2 = dx * dx + dy * dy;
        if l2 == 0.0 {
            return 0.5;
        }
        ((p.x - self.tail.x) * dx + (p.y - self.tail.y) * dy) / l2
    }

    pub fn side(&self, p: Point) -> Role {
        let t = self.projection(p);
        if t < 0.0 {
            Role::Reactant
        } else if t > 1.0 {
            Role::Product
        } else {
            Role::Condition
        }
    }
}

fn segment_hits_box(p: Point, q: Point, b: &AxisBox) -> bool {
    let (dx, dy) = (q.x - p.x, q.y - p.y);
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for (den, num) in [
        (-dx, p.x - b.x_min()),
        (dx, b.x_max() - p.x),
        (-dy, p.y - b.y_min()),
        (dy, b.y_max() - p.y),
    ] {
        if den == 0.0 {
            if num < 0.0 {
                return false;
            }
        } else {
            let r = num / den;
            if den < 0.0 {
                if r > t1 {
                    return false;
                }
                t0 = t0.max(r);
            } else {
                if r < t0 {
                    return false;
                }
                t1 = t1.min(r);
            }
        }
    }
    true
}

fn unit(a: Point, b: Point) -> Option<(f64, f64)> {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let l = dx.hypot(dy);
    (l > 0.0).then(|| (dx / l, dy / l))
}

/// Arrows grouped by chaining: near-parallel, head within `merge_gap` (fraction of the
/// diagram diagonal) of the next tail, nothing in between. Ordered by first arrow.
pub fn arrow_groups(doc: &ReactionDocument, merge_gap: f64) -> Vec<ArrowGroup> {
    let arrows: Vec<usize> = (0..doc.entities.len())
        .filter(|&i| {
            doc.entities[i].kind == EntityKind::Arrow && doc.entities[i].arrow_axis().is_some()
        })
        .collect();
    let axis = |i: usize| doc.entities[i].arrow_axis().expect("filtered on axis");
    let gap = merge_gap * doc.diagram_bounds.diagonal();
    let blocked = |p: Point, q: Point, a: usize, b: usize| {
        doc.entities
            .iter()
            .enumerate()
            .any(|(k, e)| k != a && k != b && segment_hits_box(p, q, &e.region.bounding_box()))
    };
    let mut uf = UnionFind::new(arrows.len());
    for x in 0..arrows.len() {
        for y in x + 1..arrows.len() {
            let (a, b) = (arrows[x], arrows[y]);
            let ((ta, ha), (tb, hb)) = (axis(a), axis(b));
            let (Some(ua), Some(ub)) = (unit(ta, ha), unit(tb, hb)) else {
                continue;
            };
            if ua.0 * ub.0 + ua.1 * ub.1 <= MERGE_COS {
                continue;
            }
            if [(ha, tb), (hb, ta)]
                .iter()
                .any(|&(h, t)| h.dist(t) < gap && !blocked(h, t, a, b))
            {
                uf.union(x, y);
            }
        }
    }
    uf.groups()
        .into_iter()
        .map(|members| {
            let ids: Vec<usize> = members.iter().map(|&m| arrows[m]).collect();
            let (mut sx, mut sy) = (0.0, 0.0);
            for &i in &ids {
                let (t, h) = axis(i);
                if let Some((ux, uy)) = unit(t, h) {
                    sx += ux;
                    sy += uy;
                }
            }
            let ends: Vec<Point> = ids.iter().flat_map(|&i| [axis(i).0, axis(i).1]).collect();
            let proj = |p: &Point| p.x * sx + p.y * sy;
            let tail = *ends
                .iter()
                .min_by(|a, b| proj(a).total_cmp(&proj(b)))
                .unwrap();
            let head = *ends
                .iter()
                .max_by(|a, b| proj(a).total_cmp(&proj(b)))
                .unwrap();
            ArrowGroup {
                arrows: ids,
                tail,
                head,
            }
        })
        .collect()
}

type Assign = [Option<usize>; 3];

fn role_in(a: &Assign, g: usize) -> Option<Role> {
    ROLES.into_iter().find(|r| a[*r as usize] == Some(g))
}

#[derive(Debug, Clone)]
enum Link {
    /// Entity to arrow group. `need` is `None` for untyped edges, which accept any role.
    Arrow {
        x: usize,
        g: usize,
        need: Option<Role>,
        side: Role,
        w: f64,
    },
    /// Two entities; `rel` is `None` for untyped edges, which only ask for a shared group.
    Pair {
        x: usize,
        y: usize,
        rel: Option<(Role, Role)>,
        w: f64,
    },
}

impl Link {
    fn weight(&self) -> f64 {
        match self {
            Link::Arrow { w, .. } | Link::Pair { w, .. } => *w,
        }
    }

    fn last(&self) -> usize {
        match self {
            Link::Arrow { x, .. } => *x,
            Link::Pair { x, y, .. } => (*x).max(*y),
        }
    }

    /// Group the link is consistent with under `assign`, if any.
    fn consistent(&self, assign: &[Assign], valid: &dyn Fn(usize) -> bool) -> Option<usize> {
        match *self {
            Link::Arrow { x, g, need, .. } => match role_in(&assign[x], g) {
                Some(r) if need.is_none_or(|n| n == r) && valid(g) => Some(g),
                _ => None,
            },
            Link::Pair {
                x,
                y,
                rel: Some((rx, ry)),
                ..
            } => {
                let g = assign[x][rx as usize]?;
                (assign[y][ry as usize] == Some(g) && valid(g)).then_some(g)
            }
            Link::Pair {
                x, y, rel: None, ..
            } => ROLES.into_iter().find_map(|r| {
                let g = assign[x][r as usize]?;
                (role_in(&assign[y], g).is_some() && valid(g)).then_some(g)
            }),
        }
    }
}

fn pair_roles(rel: EdgeRelation) -> Option<(Role, Role)> {
    match rel {
        EdgeRelation::ReactantToCond => Some((Role::Reactant, Role::Condition)),
        EdgeRelation::CondToProduct => Some((Role::Condition, Role::Product)),
        EdgeRelation::ReactantToProduct => Some((Role::Reactant, Role::Product)),
        _ => None,
    }
}

struct Component<'a> {
    ents: Vec<usize>,
    links: Vec<Link>,
    groups: &'a [ArrowGroup],
    support: Vec<BTreeSet<(usize, Role)>>,
}

impl<'a> Component<'a> {
    fn new(
        comp: &[usize],
        edges: &[&FusedEdge],
        doc: &ReactionDocument,
        groups: &'a [ArrowGroup],
        group_of: &[Option<usize>],
    ) -> Self {
        let ents: Vec<usize> = comp
            .iter()
            .copied()
            .filter(|&i| group_of[i].is_none())
            .collect();
        let local = |i: usize| ents.binary_search(&i).ok();
        let mut links = Vec::new();
        for e in edges {
            let w = e.s_fuse;
            let link = match (local(e.from), local(e.to), group_of[e.from], group_of[e.to]) {
                (Some(x), None, None, Some(g)) if e.relation == EdgeRelation::ReactantToArrow => {
                    Some(Link::Arrow {
                        x,
                        g,
                        need: Some(Role::Reactant),
                        side: Role::Reactant,
                        w,
                    })
                }
                (None, Some(x), Some(g), None) if e.relation == EdgeRelation::ArrowToProduct => {
                    Some(Link::Arrow {
                        x,
                        g,
                        need: Some(Role::Product),
                        side: Role::Product,
                        w,
                    })
                }
                (Some(x), None, None, Some(g)) | (None, Some(x), Some(g), None)
                    if e.relation == EdgeRelation::NoEdge =>
                {
                    let c = doc.entities[ents[x]].region.center();
                    Some(Link::Arrow {
                        x,
                        g,
                        need: None,
                        side: groups[g].side(c),
                        w,
                    })
                }
                (Some(x), Some(y), None, None) => match e.relation {
                    EdgeRelation::NoEdge => Some(Link::Pair { x, y, rel: None, w }),
                    r => pair_roles(r).map(|rel| Link::Pair {
                        x,
                        y,
                        rel: Some(rel),
                        w,
                    }),
                },
                _ => None,
            };
            links.extend(link);
        }
        let mut support = vec![BTreeSet::new(); ents.len()];
        for l in &links {
            if let Link::Arrow { x, g, side, .. } = *l {
                support[x].insert((g, side));
            }
        }
        loop {
            let mut changed = false;
            for l in &links {
                if let Link::Pair {
                    x,
                    y,
                    rel: Some((rx, ry)),
                    ..
                } = *l
                {
                    let from_y: Vec<usize> = support[y]
                        .iter()
                        .filter(|s| s.1 == ry)
                        .map(|s| s.0)
                        .collect();
                    let from_x: Vec<usize> = support[x]
                        .iter()
                        .filter(|s| s.1 == rx)
                        .map(|s| s.0)
                        .collect();
                    for g in from_y {
                        changed |= support[x].insert((g, rx));
                    }
                    for g in from_x {
                        changed |= support[y].insert((g, ry));
                    }
                }
            }
            if !changed {
                break;
            }
        }
        Component {
            ents,
            links,
            groups,
            support,
        }
    }

    fn options(&self, x: usize) -> Vec<Assign> {
        let by_role = |r: Role| -> Vec<Option<usize>> {
            std::iter::once(None)
                .chain(
                    self.support[x]
                        .iter()
                        .filter(|s| s.1 == r)
                        .map(|s| Some(s.0)),
                )
                .collect()
        };
        let (rs, cs, ps) = (
            by_role(Role::Reactant),
            by_role(Role::Condition),
            by_role(Role::Product),
        );
        let mut out = Vec::new();
        for &r in &rs {
            for &c in &cs {
                for &p in &ps {
                    let picked: Vec<usize> = [r, c, p].into_iter().flatten().collect();
                    let distinct: BTreeSet<usize> = picked.iter().copied().collect();
                    if distinct.len() == picked.len() {
                        out.push([r, c, p]);
                    }
                }
            }
        }
        out.sort_by_key(|a| (std::cmp::Reverse(a.iter().flatten().count()), *a));
        out
    }

    fn valid_groups(&self, assign: &[Assign]) -> Vec<bool> {
        let mut has = vec![[false; 2]; self.groups.len()];
        for a in assign {
            if let Some(g) = a[Role::Reactant as usize] {
                has[g][0] = true;
            }
            if let Some(g) = a[Role::Product as usize] {
                has[g][1] = true;
            }
        }
        has.iter().map(|h| h[0] && h[1]).collect()
    }

    fn value(&self, assign: &[Assign]) -> f64 {
        let valid = self.valid_groups(assign);
        let ok = |g: usize| valid[g];
        self.links
            .iter()
            .filter(|l| l.consistent(assign, &ok).is_some())
            .map(Link::weight)
            .sum()
    }

    fn greedy(&self) -> Vec<Assign> {
        let m = self.ents.len();
        let mut items: Vec<(f64, usize, usize, Role)> = Vec::new();
        for x in 0..m {
            for &(g, r) in &self.support[x] {
                let mut w = 0.0;
                for l in &self.links {
                    w += match *l {
                        Link::Arrow {
                            x: lx,
                            g: lg,
                            need,
                            w,
                            ..
                        } if lx == x && lg == g && need.is_none_or(|n| n == r) => w,
                        Link::Pair { x: a, y: b, rel, w } if a == x || b == x => {
                            let other = if a == x { b } else { a };
                            match rel {
                                Some((ra, rb)) => {
                                    let (mine, theirs) = if a == x { (ra, rb) } else { (rb, ra) };
                                    if mine == r && self.support[other].contains(&(g, theirs)) {
                                        w
                                    } else {
                                        0.0
                                    }
                                }
                                None if self.support[other].iter().any(|s| s.0 == g) => w,
                                None => 0.0,
                            }
                        }
                        _ => 0.0,
                    };
                }
                items.push((w, x, g, r));
            }
        }
        items.sort_by(|a, b| {
            b.0.total_cmp(&a.0)
                .then((a.1, a.2, a.3).cmp(&(b.1, b.2, b.3)))
        });
        let mut assign = vec![[None; 3]; m];
        for (_, x, g, r) in items {
            if assign[x][r as usize].is_none() && role_in(&assign[x], g).is_none() {
                assign[x][r as usize] = Some(g);
            }
        }
        assign
    }

    fn exact(&self, incumbent: Vec<Assign>) -> Vec<Assign> {
        let m = self.ents.len();
        let opts: Vec<Vec<Assign>> = (0..m).map(|x| self.options(x)).collect();
        let mut by_pos: Vec<Vec<&Link>> = vec![Vec::new(); m];
        for l in &self.links {
            by_pos[l.last()].push(l);
        }
        let mut suffix = vec![0.0; m + 1];
        for p in (0..m).rev() {
            suffix[p] = suffix[p + 1] + by_pos[p].iter().map(|l| l.weight()).sum::<f64>();
        }
        struct Search<'s, 'c> {
            c: &'s Component<'c>,
            opts: Vec<Vec<Assign>>,
            by_pos: Vec<Vec<&'s Link>>,
            suffix: Vec<f64>,
            best: f64,
            best_assign: Vec<Assign>,
        }
        fn go(s: &mut Search, pos: usize, assign: &mut Vec<Assign>, optimistic: f64) {
            if optimistic + s.suffix[pos] <= s.best + EPS {
                return;
            }
            if pos == assign.len() {
                let v = s.c.value(assign);
                if v > s.best + EPS {
                    s.best = v;
                    s.best_assign = assign.clone();
                }
                return;
            }
            for k in 0..s.opts[pos].len() {
                assign[pos] = s.opts[pos][k];
                let add: f64 = s.by_pos[pos]
                    .iter()
                    .filter(|l| l.consistent(assign, &|_| true).is_some())
                    .map(|l| l.weight())
                    .sum();
                go(s, pos + 1, assign, optimistic + add);
            }
            assign[pos] = [None; 3];
        }
        let mut s = Search {
            c: self,
            opts,
            by_pos,
            suffix,
            best: self.value(&incumbent),
            best_assign: incumbent,
        };
        let mut assign = vec![[None; 3]; m];
        go(&mut s, 0, &mut assign, 0.0);
        s.best_assign
    }

    fn reactions(&self, assign: &[Assign], doc: &ReactionDocument) -> Vec<Reaction> {
        let valid = self.valid_groups(assign);
        let ok = |g: usize| valid[g];
        let mut score = vec![0.0; self.groups.len()];
        for l in &self.links {
            if let Some(g) = l.consistent(assign, &ok) {
                score[g] += l.weight();
            }
        }
        let present: BTreeSet<usize> = assign.iter().flatten().flatten().copied().collect();
        let mut out = Vec::new();
        for g in present {
            if !valid[g] {
                continue;
            }
            let with = |r: Role| -> Vec<usize> {
                (0..self.ents.len())
                    .filter(|&x| assign[x][r as usize] == Some(g))
                    .map(|x| self.ents[x])
                    .collect()
            };
            out.push(make_reaction(
                doc,
                with(Role::Reactant),
                with(Role::Product),
                with(Role::Condition),
                self.groups[g].arrows.clone(),
                score[g],
            ));
        }
        out
    }
}

fn by_xy(doc: &ReactionDocument, mut v: Vec<usize>) -> Vec<String> {
    v.sort_by(|&a, &b| {
        let (ca, cb) = (
            doc.entities[a].region.center(),
            doc.entities[b].region.center(),
        );
        ca.x.total_cmp(&cb.x)
            .then(ca.y.total_cmp(&cb.y))
            .then(a.cmp(&b))
    });
    v.into_iter().map(|i| doc.entities[i].id.clone()).collect()
}

fn by_yx(doc: &ReactionDocument, mut v: Vec<usize>) -> Vec<String> {
    v.sort_by(|&a, &b| {
        let (ca, cb) = (
            doc.entities[a].region.center(),
            doc.entities[b].region.center(),
        );
        ca.y.total_cmp(&cb.y)
            .then(ca.x.total_cmp(&cb.x))
            .then(a.cmp(&b))
    });
    v.into_iter().map(|i| doc.entities[i].id.clone()).collect()
}

fn make_reaction(
    doc: &ReactionDocument,
    reactants: Vec<usize>,
    products: Vec<usize>,
    conditions: Vec<usize>,
    arrows: Vec<usize>,
    score: f64,
) -> Reaction {
    let molecule_conditions = conditions
        .iter()
        .any(|&c| doc.entities[c].kind == EntityKind::Molecule);
    let mut r = Reaction::new(
        by_xy(doc, reactants),
        by_xy(doc, products),
        by_yx(doc, conditions),
        by_xy(doc, arrows),
    );
    r.score = score;
    r.molecule_conditions = molecule_conditions;
    r
}

/// Arrowless components: one reaction per connected set of reactant-to-product edges.
fn arrowless(edges: &[&FusedEdge], doc: &ReactionDocument) -> Vec<Reaction> {
    let n = doc.entities.len();
    let non_arrow = |i: usize| doc.entities[i].kind != EntityKind::Arrow;
    let rp: Vec<&FusedEdge> = edges
        .iter()
        .copied()
        .filter(|e| {
            e.relation == EdgeRelation::ReactantToProduct && non_arrow(e.from) && non_arrow(e.to)
        })
        .collect();
    let mut uf = UnionFind::new(n);
    let mut touched = BTreeSet::new();
    for e in &rp {
        uf.union(e.from, e.to);
        touched.insert(e.from);
        touched.insert(e.to);
    }
    let mut out = Vec::new();
    for set in uf.groups() {
        if !touched.contains(&set[0]) {
            continue;
        }
        let members: BTreeSet<usize> = set.iter().copied().collect();
        let inner: Vec<&&FusedEdge> = rp.iter().filter(|e| members.contains(&e.from)).collect();
        let products: BTreeSet<usize> = inner.iter().map(|e| e.to).collect();
        let reactants: BTreeSet<usize> = inner
            .iter()
            .map(|e| e.from)
            .filter(|f| !products.contains(f))
            .collect();
        let mut score: f64 = inner
            .iter()
            .filter(|e| reactants.contains(&e.from))
            .map(|e| e.s_fuse)
            .sum();
        let mut conditions = BTreeSet::new();
        for e in edges {
            let (c, used) = match e.relation {
                EdgeRelation::ReactantToCond if reactants.contains(&e.from) => (e.to, true),
                EdgeRelation::CondToProduct if products.contains(&e.to) => (e.from, true),
                _ => (0, false),
            };
            if used && non_arrow(c) && !reactants.contains(&c) && !products.contains(&c) {
                conditions.insert(c);
                score += e.s_fuse;
            }
        }
        if reactants.is_empty() {
            continue;
        }
        out.push(make_reaction(
            doc,
            reactants.into_iter().collect(),
            products.into_iter().collect(),
            conditions.into_iter().collect(),
            Vec::new(),
            score,
        ));
    }
    out
}

/// Candidate reactions, one per valid arrow group of every component, plus arrowless
/// reactant-to-product sets.
pub fn infer_reactions(
    fused: &FusedGraph,
    doc: &ReactionDocument,
    config: &ReasoningConfig,
) -> Vec<Reaction> {
    let n = doc.entities.len();
    debug_assert_eq!(fused.node_count(), n);
    let groups = arrow_groups(doc, config.merge_gap);
    let mut group_of = vec![None; n];
    let mut uf = UnionFind::new(n);
    for e in fused.edges() {
        uf.union(e.from, e.to);
    }
    for (g, grp) in groups.iter().enumerate() {
        for &a in &grp.arrows {
            group_of[a] = Some(g);
            uf.union(grp.arrows[0], a);
        }
    }
    let mut out = Vec::new();
    for comp in uf.groups() {
        let members: BTreeSet<usize> = comp.iter().copied().collect();
        let edges: Vec<&FusedEdge> = fused
            .edges()
            .iter()
            .filter(|e| members.contains(&e.from))
            .collect();
        if comp.iter().all(|&i| group_of[i].is_none()) {
            out.extend(arrowless(&edges, doc));
            continue;
        }
        let c = Component::new(&comp, &edges, doc, &groups, &group_of);
        if c.ents.is_empty() {
            continue;
        }
        let mut assign = c.greedy();
        if c.ents.len() <= config.exact_search_limit {
            assign = c.exact(assign);
        }
        out.extend(c.reactions(&assign, doc));
    }
    out
}
