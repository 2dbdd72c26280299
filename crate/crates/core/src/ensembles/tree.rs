//! Binary decision trees and the level-wise greedy grower shared by CART,
//! forests and boosting.
//!
//! The grower scans every feature once per tree level in a presorted order,
//! so a whole level of nodes is evaluated in `O(features * rows)`.

use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::impurity::Criterion;

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left. `gain` is the weighted
    /// impurity decrease of the split.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        gain: f64,
    },
    Leaf {
        value: Vec<f64>,
    },
}

/// Arena-stored tree rooted at node 0. Serialized as nested objects.
/// Equality is structural, independent of arena layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(into = "NestedNode", from = "NestedNode")]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl PartialEq for Tree {
    fn eq(&self, other: &Self) -> bool {
        fn go(a: &Tree, i: usize, b: &Tree, j: usize) -> bool {
            match (&a.nodes[i], &b.nodes[j]) {
                (
                    Node::Split { feature: f1, threshold: t1, left: l1, right: r1, gain: g1 },
                    Node::Split { feature: f2, threshold: t2, left: l2, right: r2, gain: g2 },
                ) => f1 == f2 && t1 == t2 && g1 == g2 && go(a, *l1, b, *l2) && go(a, *r1, b, *r2),
                (Node::Leaf { value: v1 }, Node::Leaf { value: v2 }) => v1 == v2,
                _ => false,
            }
        }
        go(self, 0, other, 0)
    }
}

impl Tree {
    pub fn leaf(value: Vec<f64>) -> Self {
        Self { nodes: vec![Node::Leaf { value }] }
    }

    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split { feature, threshold, left, right, .. } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
                Node::Leaf { .. } => return i,
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> &[f64] {
        match &self.nodes[self.leaf_index(x)] {
            Node::Leaf { value } => value,
            Node::Split { .. } => unreachable!("leaf_index stops at leaves"),
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        go(self, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .max()
    }

    /// Replace every leaf payload.
    pub fn map_leaves(&mut self, mut f: impl FnMut(usize, &[f64]) -> Vec<f64>) {
        for (i, n) in self.nodes.iter_mut().enumerate() {
            if let Node::Leaf { value } = n {
                *value = f(i, value);
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct NestedNode {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    feature: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gain: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    left: Option<Box<NestedNode>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    right: Option<Box<NestedNode>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    value: Option<Vec<f64>>,
}

impl From<Tree> for NestedNode {
    fn from(t: Tree) -> Self {
        fn go(t: &Tree, i: usize) -> NestedNode {
            match &t.nodes[i] {
                Node::Split { feature, threshold, left, right, gain } => NestedNode {
                    feature: Some(*feature),
                    threshold: Some(*threshold),
                    gain: Some(*gain),
                    left: Some(Box::new(go(t, *left))),
                    right: Some(Box::new(go(t, *right))),
                    value: None,
                },
                Node::Leaf { value } => NestedNode {
                    feature: None,
                    threshold: None,
                    gain: None,
                    left: None,
                    right: None,
                    value: Some(value.clone()),
                },
            }
        }
        go(&t, 0)
    }
}

impl From<NestedNode> for Tree {
    fn from(n: NestedNode) -> Self {
        fn go(n: NestedNode, nodes: &mut Vec<Node>) -> usize {
            let id = nodes.len();
            nodes.push(Node::Leaf { value: Vec::new() });
            match (n.feature, n.threshold, n.left, n.right) {
                (Some(feature), Some(threshold), Some(l), Some(r)) => {
                    let left = go(*l, nodes);
                    let right = go(*r, nodes);
                    nodes[id] = Node::Split { feature, threshold, left, right, gain: n.gain.unwrap_or(0.0) };
                }
                _ => nodes[id] = Node::Leaf { value: n.value.unwrap_or_default() },
            }
            id
        }
        let mut nodes = Vec::new();
        go(n, &mut nodes);
        Tree { nodes }
    }
}

/// Column-major training matrix with per-feature row orderings.
pub(crate) struct Presorted {
    pub cols: Vec<Vec<f64>>,
    pub order: Vec<Vec<u32>>,
}

impl Presorted {
    pub fn new(rows: &[Vec<f64>]) -> Self {
        let d = rows.first().map_or(0, Vec::len);
        let cols: Vec<Vec<f64>> = (0..d).map(|f| rows.iter().map(|r| r[f]).collect()).collect();
        let order = cols
            .iter()
            .map(|c| {
                let mut idx: Vec<u32> = (0..c.len() as u32).collect();
                idx.sort_by(|&a, &b| c[a as usize].total_cmp(&c[b as usize]));
                idx
            })
            .collect();
        Self { cols, order }
    }

    pub fn n_rows(&self) -> usize {
        self.cols.first().map_or(0, Vec::len)
    }

    pub fn n_features(&self) -> usize {
        self.cols.len()
    }
}

pub(crate) enum Targets<'a> {
    Class { labels: &'a [usize], n_classes: usize },
    Real(&'a [f64]),
}

impl Targets<'_> {
    fn add(&self, s: &mut [f64], i: usize, w: f64) {
        match self {
            Targets::Class { labels, .. } => s[labels[i]] += w,
            Targets::Real(r) => {
                s[0] += w;
                s[1] += w * r[i];
                s[2] += w * r[i] * r[i];
            }
        }
    }

    fn n_classes(&self) -> usize {
        match self {
            Targets::Class { n_classes, .. } => *n_classes,
            Targets::Real(_) => 0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct GrowParams {
    pub criterion: Criterion,
    pub max_depth: usize,
    pub min_samples_split: usize,
    /// Features drawn per node; `None` scans all.
    pub max_features: Option<usize>,
}

pub(crate) struct Grown {
    /// Leaves hold the raw weighted statistics of their rows.
    pub tree: Tree,
    /// Final leaf of every row with positive weight; `u32::MAX` otherwise.
    pub leaf_of: Vec<u32>,
}

const NONE: u32 = u32::MAX;

struct Open {
    id: usize,
    stats: Vec<f64>,
    count: usize,
    depth: usize,
}

/// Midpoint strictly separating `a < b`, falling back to `a` when rounding
/// would land on `b`.
fn midpoint(a: f64, b: f64) -> f64 {
    let m = 0.5 * (a + b);
    if m >= a && m < b {
        m
    } else {
        a
    }
}

fn splittable(p: &GrowParams, o: &Open) -> bool {
    if o.depth >= p.max_depth || o.count < p.min_samples_split.max(2) {
        return false;
    }
    match p.criterion {
        Criterion::Class(_) => o.stats.iter().filter(|&&c| c > 0.0).count() > 1,
        Criterion::Squared => p.criterion.weighted(&o.stats) > 0.0,
    }
}

/// Greedy best-first-by-level tree growth. At each node every candidate
/// threshold (midpoints of consecutive distinct values) of every allowed
/// feature is scored; the largest gain wins, ties resolved toward the lower
/// feature and then the lower threshold. Impure nodes split even at zero
/// gain so long as some feature separates their rows.
pub(crate) fn grow(
    data: &Presorted,
    targets: &Targets,
    weights: &[f64],
    params: &GrowParams,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Grown {
    let n = data.n_rows();
    let d = data.n_features();
    let crit = params.criterion;
    let width = crit.width(targets.n_classes());

    let mut leaf_of = vec![NONE; n];
    let mut root = vec![0.0; width];
    let mut count = 0;
    for i in 0..n {
        if weights[i] > 0.0 {
            leaf_of[i] = 0;
            targets.add(&mut root, i, weights[i]);
            count += 1;
        }
    }
    let mut nodes = vec![Node::Leaf { value: Vec::new() }];
    let mut open = vec![Open { id: 0, stats: root, count, depth: 0 }];

    let mut slot_of: Vec<u32> = vec![NONE];
    while !open.is_empty() {
        slot_of.resize(nodes.len(), NONE);
        slot_of.iter_mut().for_each(|s| *s = NONE);
        let mut slots: Vec<usize> = Vec::new();
        for (k, o) in open.iter().enumerate() {
            if splittable(params, o) && d > 0 {
                slot_of[o.id] = slots.len() as u32;
                slots.push(k);
            }
        }
        let ns = slots.len();
        let mut mask = vec![true; ns * d];
        if let (Some(mf), Some(rng)) = (params.max_features, rng.as_deref_mut()) {
            if mf < d {
                for s in 0..ns {
                    mask[s * d..(s + 1) * d].iter_mut().for_each(|m| *m = false);
                    for f in sample(rng, d, mf.max(1)).into_iter() {
                        mask[s * d + f] = true;
                    }
                }
            }
        }
        let parent_imp: Vec<f64> = slots.iter().map(|&k| crit.weighted(&open[k].stats)).collect();
        let mut best: Vec<Option<(f64, usize, f64)>> = vec![None; ns];
        let mut run = vec![0.0; ns * width];
        let mut last = vec![0.0; ns];
        let mut seen = vec![false; ns];
        let mut right = vec![0.0; width];

        if ns > 0 {
            for f in 0..d {
                run.iter_mut().for_each(|v| *v = 0.0);
                seen.iter_mut().for_each(|v| *v = false);
                let col = &data.cols[f];
                for &i in &data.order[f] {
                    let i = i as usize;
                    let nd = leaf_of[i];
                    if nd == NONE {
                        continue;
                    }
                    let s = slot_of[nd as usize];
                    if s == NONE || !mask[s as usize * d + f] {
                        continue;
                    }
                    let s = s as usize;
                    let v = col[i];
                    if seen[s] && v > last[s] {
                        let left = &run[s * width..(s + 1) * width];
                        let total = &open[slots[s]].stats;
                        for j in 0..width {
                            right[j] = total[j] - left[j];
                        }
                        let gain = parent_imp[s] - crit.weighted(left) - crit.weighted(&right);
                        if best[s].is_none_or(|b| gain > b.0) {
                            best[s] = Some((gain, f, midpoint(last[s], v)));
                        }
                    }
                    targets.add(&mut run[s * width..(s + 1) * width], i, weights[i]);
                    last[s] = v;
                    seen[s] = true;
                }
            }
        }

        // Materialize splits; children inherit rows by the threshold test.
        let mut next = Vec::new();
        let mut child_of_slot: Vec<Option<(usize, usize, usize, f64)>> = vec![None; ns];
        for (s, b) in best.iter().enumerate() {
            if let Some((gain, f, thr)) = *b {
                let parent = open[slots[s]].id;
                let l = nodes.len();
                nodes.push(Node::Leaf { value: Vec::new() });
                nodes.push(Node::Leaf { value: Vec::new() });
                nodes[parent] = Node::Split { feature: f, threshold: thr, left: l, right: l + 1, gain: gain.max(0.0) };
                child_of_slot[s] = Some((l, l + 1, f, thr));
            }
        }
        let mut child_stats: Vec<[Vec<f64>; 2]> = vec![[vec![0.0; width], vec![0.0; width]]; ns];
        let mut child_count = vec![[0usize; 2]; ns];
        for i in 0..n {
            let nd = leaf_of[i];
            if nd == NONE {
                continue;
            }
            let s = slot_of[nd as usize];
            if s == NONE {
                continue;
            }
            if let Some((l, r, f, thr)) = child_of_slot[s as usize] {
                let side = usize::from(data.cols[f][i] > thr);
                leaf_of[i] = if side == 0 { l as u32 } else { r as u32 };
                targets.add(&mut child_stats[s as usize][side], i, weights[i]);
                child_count[s as usize][side] += 1;
            }
        }
        for o in open.drain(..) {
            let s = slot_of[o.id];
            match (s != NONE).then(|| child_of_slot[s as usize]).flatten() {
                Some((l, r, _, _)) => {
                    let s = s as usize;
                    let [ls, rs] = std::mem::take(&mut child_stats[s]);
                    next.push(Open { id: l, stats: ls, count: child_count[s][0], depth: o.depth + 1 });
                    next.push(Open { id: r, stats: rs, count: child_count[s][1], depth: o.depth + 1 });
                }
                None => nodes[o.id] = Node::Leaf { value: o.stats },
            }
        }
        open = next;
    }
    Grown { tree: Tree { nodes }, leaf_of }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::impurity::Impurity;

    fn params(depth: usize) -> GrowParams {
        GrowParams {
            criterion: Criterion::Class(Impurity::Gini),
            max_depth: depth,
            min_samples_split: 2,
            max_features: None,
        }
    }

    #[test]
    fn xor_needs_a_zero_gain_root_split() {
        let rows = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
        let y = [0, 1, 1, 0];
        let data = Presorted::new(&rows);
        let g = grow(&data, &Targets::Class { labels: &y, n_classes: 2 }, &[1.0; 4], &params(2), None);
        assert_eq!(g.tree.depth(), 2);
        for (r, &c) in rows.iter().zip(&y) {
            let v = g.tree.predict(r);
            assert_eq!(v[c], 1.0);
            assert_eq!(v[1 - c], 0.0);
        }
        // Root tie at zero gain goes to feature 0.
        assert!(matches!(g.tree.nodes[0], Node::Split { feature: 0, threshold, .. } if threshold == 0.5));
    }

    #[test]
    fn depth_zero_is_one_leaf_and_rows_partition() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, (i * 7 % 5) as f64]).collect();
        let y: Vec<usize> = (0..20).map(|i| usize::from(i % 3 == 0)).collect();
        let data = Presorted::new(&rows);
        let t = &Targets::Class { labels: &y, n_classes: 2 };
        let g = grow(&data, t, &[1.0; 20], &params(0), None);
        assert_eq!(g.tree.nodes.len(), 1);
        let g = grow(&data, t, &[1.0; 20], &params(6), None);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(g.tree.leaf_index(r), g.leaf_of[i] as usize);
        }
        let back: Tree = serde_json::from_str(&serde_json::to_string(&g.tree).unwrap()).unwrap();
        assert_eq!(back, g.tree);
    }

    #[test]
    fn midpoint_never_reaches_upper_value() {
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        let m = midpoint(a, b);
        assert!(m >= a && m < b);
        assert_eq!(midpoint(0.0, 1.0), 0.5);
    }
}
