//! Fill-reducing orderings.
//!
//! Two nested-dissection variants are provided: a generic one that bisects
//! the sparsity graph with breadth-first level structures, and one that uses
//! the C⁰ interface DOFs of an rIGA discretization as separators, falling back
//! to the generic ordering inside each macroelement block.

use serde::{Deserialize, Serialize};

use crate::bspline::{BasisRole, SplineSpace};
use crate::sparse::Pattern;
use crate::{Error, Result};

/// Symmetric permutation; `order[new] = old`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    order: Vec<u32>,
    inverse: Vec<u32>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        let order: Vec<u32> = (0..n as u32).collect();
        Self {
            inverse: order.clone(),
            order,
        }
    }

    /// Build from an elimination order (`order[new] = old`), checking that it
    /// is a bijection.
    pub fn from_order(order: Vec<u32>) -> Result<Self> {
        let n = order.len();
        let mut inverse = vec![u32::MAX; n];
        for (new, &old) in order.iter().enumerate() {
            let slot = inverse
                .get_mut(old as usize)
                .ok_or_else(|| Error::InvalidSystem(format!("index {old} out of range")))?;
            if *slot != u32::MAX {
                return Err(Error::InvalidSystem(format!("index {old} repeated")));
            }
            *slot = new as u32;
        }
        Ok(Self { order, inverse })
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// `order[new] = old`.
    pub fn order(&self) -> &[u32] {
        &self.order
    }

    /// `inverse[old] = new`.
    pub fn inverse(&self) -> &[u32] {
        &self.inverse
    }
}

/// How to order a system before factorization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderingStrategy {
    Natural,
    /// Generic nested dissection on the sparsity graph.
    NestedDissection,
    /// C⁰ separators first (top level), generic dissection inside blocks.
    Separator,
}

/// Order `graph` with `strategy`; `spaces` are the per-direction spline
/// spaces of the system (x first) and are only consulted by
/// [`OrderingStrategy::Separator`].
pub fn compute_ordering(
    strategy: OrderingStrategy,
    graph: &Pattern,
    spaces: &[SplineSpace],
) -> Permutation {
    match strategy {
        OrderingStrategy::Natural => Permutation::identity(graph.dim()),
        OrderingStrategy::NestedDissection => nested_dissection(graph),
        OrderingStrategy::Separator => separator_ordering(spaces, graph),
    }
}

const LEAF_SIZE: usize = 16;
const NO_LABEL: u32 = u32::MAX;

enum Task {
    Split(Vec<u32>),
    Emit(Vec<u32>),
}

/// Recursive graph bisection with breadth-first level-set separators.
struct Dissector<'a> {
    graph: &'a Pattern,
    label: Vec<u32>,
    dist: Vec<u32>,
    next_label: u32,
}

impl<'a> Dissector<'a> {
    fn new(graph: &'a Pattern) -> Self {
        let n = graph.dim();
        Self {
            graph,
            label: vec![NO_LABEL; n],
            dist: vec![u32::MAX; n],
            next_label: 0,
        }
    }

    fn relabel(&mut self, nodes: &[u32]) -> u32 {
        let lab = self.next_label;
        self.next_label += 1;
        for &v in nodes {
            self.label[v as usize] = lab;
        }
        lab
    }

    /// BFS restricted to `lab`; returns the level sets.
    fn levels(&mut self, root: u32, lab: u32) -> Vec<Vec<u32>> {
        let mut levels = vec![vec![root]];
        // Visited nodes carry their depth in `dist`; callers reset it.
        self.dist[root as usize] = 0;
        loop {
            let depth = levels.len() as u32;
            let mut next = Vec::new();
            for &v in levels.last().unwrap() {
                for &w in self.graph.row(v as usize) {
                    let wi = w as usize;
                    if self.label[wi] == lab && self.dist[wi] == u32::MAX {
                        self.dist[wi] = depth;
                        next.push(w);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            levels.push(next);
        }
        levels
    }

    fn clear_dist(&mut self, levels: &[Vec<u32>]) {
        for l in levels {
            for &v in l {
                self.dist[v as usize] = u32::MAX;
            }
        }
    }

    fn pseudo_peripheral(&mut self, start: u32, lab: u32) -> (u32, Vec<Vec<u32>>) {
        let mut root = start;
        let mut levels = self.levels(root, lab);
        for _ in 0..8 {
            let candidate = *levels
                .last()
                .unwrap()
                .iter()
                .min_by_key(|&&v| self.graph.row(v as usize).len())
                .unwrap();
            self.clear_dist(&levels);
            let trial = self.levels(candidate, lab);
            if trial.len() > levels.len() {
                root = candidate;
                levels = trial;
            } else {
                self.clear_dist(&trial);
                levels = self.levels(root, lab);
                break;
            }
        }
        (root, levels)
    }

    fn run(&mut self, nodes: Vec<u32>, out: &mut Vec<u32>) {
        let mut stack = vec![Task::Split(nodes)];
        while let Some(task) = stack.pop() {
            let nodes = match task {
                Task::Emit(nodes) => {
                    out.extend(nodes);
                    continue;
                }
                Task::Split(nodes) => nodes,
            };
            if nodes.len() <= LEAF_SIZE {
                out.extend(nodes);
                continue;
            }
            let lab = self.relabel(&nodes);
            let (_, levels) = self.pseudo_peripheral(nodes[0], lab);
            let reached: usize = levels.iter().map(Vec::len).sum();
            if reached < nodes.len() {
                // Disconnected: peel off the component just explored.
                let comp: Vec<u32> = levels.iter().flatten().copied().collect();
                self.clear_dist(&levels);
                let comp_label = self.relabel(&comp);
                let rest: Vec<u32> = nodes
                    .into_iter()
                    .filter(|&v| self.label[v as usize] != comp_label)
                    .collect();
                stack.push(Task::Split(rest));
                stack.push(Task::Split(comp));
                continue;
            }
            if levels.len() < 3 {
                self.clear_dist(&levels);
                out.extend(nodes);
                continue;
            }
            let k = choose_separator_level(&levels);
            let mut part_a: Vec<u32> = levels[..k].iter().flatten().copied().collect();
            let mut sep = Vec::with_capacity(levels[k].len());
            for &v in &levels[k] {
                let touches_b = self.graph.row(v as usize).iter().any(|&w| {
                    self.label[w as usize] == lab && self.dist[w as usize] == k as u32 + 1
                });
                if touches_b {
                    sep.push(v);
                } else {
                    part_a.push(v);
                }
            }
            let part_b: Vec<u32> = levels[k + 1..].iter().flatten().copied().collect();
            self.clear_dist(&levels);
            stack.push(Task::Emit(sep));
            stack.push(Task::Split(part_b));
            stack.push(Task::Split(part_a));
        }
    }
}

/// Pick the level with the smallest size among reasonably balanced splits.
fn choose_separator_level(levels: &[Vec<u32>]) -> usize {
    let total: usize = levels.iter().map(Vec::len).sum();
    let mut before = vec![0usize; levels.len()];
    for k in 1..levels.len() {
        before[k] = before[k - 1] + levels[k - 1].len();
    }
    let candidates = 1..levels.len() - 1;
    let balanced = candidates.clone().filter(|&k| {
        let a = before[k];
        let b = total - a - levels[k].len();
        a.max(b) as f64 <= 0.65 * (a + b) as f64
    });
    balanced
        .min_by_key(|&k| (levels[k].len(), k))
        .unwrap_or_else(|| {
            candidates
                .min_by_key(|&k| {
                    let a = before[k];
                    let b = total - a - levels[k].len();
                    a.max(b)
                })
                .unwrap()
        })
}

/// Generic nested dissection of the whole graph.
pub fn nested_dissection(graph: &Pattern) -> Permutation {
    let nodes: Vec<u32> = (0..graph.dim() as u32).collect();
    let mut out = Vec::with_capacity(graph.dim());
    Dissector::new(graph).run(nodes, &mut out);
    Permutation::from_order(out).expect("dissection visits every node once")
}

/// Nested dissection whose top levels are the C⁰ interface DOFs.
///
/// The macroelement grid is bisected recursively across its longest
/// direction; the separator at each step is the layer of interface DOFs
/// between the two halves. Blocks are ordered by generic dissection. At
/// level 0 this is plain generic dissection.
pub fn separator_ordering(spaces: &[SplineSpace], graph: &Pattern) -> Permutation {
    let d = spaces.len();
    let roles: Vec<Vec<BasisRole>> = spaces.iter().map(|s| s.interior_roles()).collect();
    let nblocks: Vec<usize> = spaces.iter().map(|s| 1usize << s.level()).collect();
    let mut strides = vec![1usize; d];
    for dir in 1..d {
        strides[dir] = strides[dir - 1] * roles[dir - 1].len();
    }
    debug_assert_eq!(strides[d - 1] * roles[d - 1].len(), graph.dim());

    let mut ctx = BoxOrdering {
        roles,
        strides,
        dissector: Dissector::new(graph),
        out: Vec::with_capacity(graph.dim()),
    };
    let lo = vec![0usize; d];
    ctx.order_box(&lo, &nblocks);
    Permutation::from_order(ctx.out).expect("separator ordering visits every node once")
}

struct BoxOrdering<'a> {
    roles: Vec<Vec<BasisRole>>,
    strides: Vec<usize>,
    dissector: Dissector<'a>,
    out: Vec<u32>,
}

impl BoxOrdering<'_> {
    /// Interior indices of direction `dir` inside blocks `[lo, hi)`,
    /// including the separators strictly between them.
    fn indices_in(&self, dir: usize, lo: usize, hi: usize) -> Vec<usize> {
        self.roles[dir]
            .iter()
            .enumerate()
            .filter(|(_, r)| match **r {
                BasisRole::Block(b) => lo <= b && b < hi,
                BasisRole::Separator(j) => lo < j && j < hi,
            })
            .map(|(i, _)| i)
            .collect()
    }

    fn cartesian(&self, per_dir: &[Vec<usize>]) -> Vec<u32> {
        let mut nodes = vec![0usize];
        for (dir, idx) in per_dir.iter().enumerate() {
            let mut next = Vec::with_capacity(nodes.len() * idx.len());
            for &i in idx {
                next.extend(nodes.iter().map(|&base| base + i * self.strides[dir]));
            }
            nodes = next;
        }
        let mut nodes: Vec<u32> = nodes.into_iter().map(|v| v as u32).collect();
        nodes.sort_unstable();
        nodes
    }

    fn order_box(&mut self, lo: &[usize], hi: &[usize]) {
        let d = lo.len();
        let (dir, width) = (0..d)
            .map(|k| (k, hi[k] - lo[k]))
            .max_by_key(|&(k, w)| (w, std::cmp::Reverse(k)))
            .unwrap();
        if width == 1 {
            let per_dir: Vec<Vec<usize>> = (0..d).map(|k| self.indices_in(k, lo[k], hi[k])).collect();
            let nodes = self.cartesian(&per_dir);
            self.dissector.run(nodes, &mut self.out);
            return;
        }
        let mid = (lo[dir] + hi[dir]) / 2;
        let mut hi_a = hi.to_vec();
        hi_a[dir] = mid;
        self.order_box(lo, &hi_a);
        let mut lo_b = lo.to_vec();
        lo_b[dir] = mid;
        self.order_box(&lo_b, hi);

        let per_dir: Vec<Vec<usize>> = (0..d)
            .map(|k| {
                if k == dir {
                    self.roles[k]
                        .iter()
                        .position(|r| *r == BasisRole::Separator(mid))
                        .into_iter()
                        .collect()
                } else {
                    self.indices_in(k, lo[k], hi[k])
                }
            })
            .collect();
        let sep = self.cartesian(&per_dir);
        self.out.extend(sep);
    }
}
