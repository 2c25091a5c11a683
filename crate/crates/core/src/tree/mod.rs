//! Unrooted weighted trees: Neighbor-Joining construction, Newick text, and SVG dendrograms.

mod newick;
mod nj;
mod svg;

use std::collections::BTreeSet;

pub use newick::{parse_newick, to_newick};
pub use nj::{nj_from_matrix, nj_tree};
pub use svg::{render_svg, FamilyColors, Layout};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    /// Leaves carry the model id; internal nodes are unlabeled.
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub length: f64,
}

/// An unrooted tree with labeled leaves and non-negative edge lengths.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PhyloTree {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
}

/// A nontrivial split induced by an internal edge: the side not containing the
/// smallest leaf label, plus the edge length.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub side: BTreeSet<String>,
    pub length: f64,
}

impl PhyloTree {
    pub fn add_node(&mut self, label: Option<String>) -> usize {
        self.nodes.push(Node { label });
        self.nodes.len() - 1
    }

    pub fn add_edge(&mut self, a: usize, b: usize, length: f64) {
        self.edges.push(Edge { a, b, length });
    }

    /// Neighbors of `node` with edge lengths, in edge insertion order.
    pub fn neighbors(&self, node: usize) -> Vec<(usize, f64)> {
        self.edges
            .iter()
            .filter_map(|e| {
                if e.a == node {
                    Some((e.b, e.length))
                } else if e.b == node {
                    Some((e.a, e.length))
                } else {
                    None
                }
            })
            .collect()
    }

    pub fn degree(&self, node: usize) -> usize {
        self.edges
            .iter()
            .filter(|e| e.a == node || e.b == node)
            .count()
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        self.nodes[node].label.is_some() && self.degree(node) <= 1
    }

    pub fn leaves(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&n| self.is_leaf(n)).collect()
    }

    pub fn leaf_labels(&self) -> BTreeSet<String> {
        self.leaves()
            .into_iter()
            .filter_map(|n| self.nodes[n].label.clone())
            .collect()
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves().len()
    }

    pub fn find_leaf(&self, label: &str) -> Option<usize> {
        self.leaves()
            .into_iter()
            .find(|&n| self.nodes[n].label.as_deref() == Some(label))
    }

    /// Internal node used as the Newick/drawing anchor: the last internal node
    /// added (the final Neighbor-Joining center).
    pub fn anchor(&self) -> Option<usize> {
        (0..self.nodes.len()).rev().find(|&n| !self.is_leaf(n))
    }

    /// Connected, acyclic, non-negative edges, unique leaf labels.
    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        if n == 0 {
            return Err(Error::input("tree has no nodes"));
        }
        if self.edges.len() + 1 != n {
            return Err(Error::input(format!(
                "tree with {n} nodes must have {} edges, has {}",
                n - 1,
                self.edges.len()
            )));
        }
        if self
            .edges
            .iter()
            .any(|e| e.length.is_nan() || e.length < 0.0 || e.a >= n || e.b >= n)
        {
            return Err(Error::input(
                "edges must join existing nodes with non-negative lengths",
            ));
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for (v, _) in self.neighbors(u) {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::input("tree is not connected"));
        }
        let labels: Vec<_> = self
            .leaves()
            .into_iter()
            .filter_map(|l| self.nodes[l].label.as_ref())
            .collect();
        let unique: BTreeSet<_> = labels.iter().collect();
        if unique.len() != labels.len() {
            return Err(Error::input("leaf labels are not unique"));
        }
        Ok(())
    }

    /// Path lengths from `from` to every node.
    pub fn distances_from(&self, from: usize) -> Vec<f64> {
        let mut dist = vec![f64::NAN; self.nodes.len()];
        dist[from] = 0.0;
        let mut stack = vec![from];
        while let Some(u) = stack.pop() {
            for (v, l) in self.neighbors(u) {
                if dist[v].is_nan() {
                    dist[v] = dist[u] + l;
                    stack.push(v);
                }
            }
        }
        dist
    }

    /// Leaf-to-leaf path length between two labels.
    pub fn path_length(&self, a: &str, b: &str) -> Option<f64> {
        let (ia, ib) = (self.find_leaf(a)?, self.find_leaf(b)?);
        Some(self.distances_from(ia)[ib])
    }

    /// Leaves reachable from `to` without crossing the edge `from`–`to`.
    pub fn leaves_beyond(&self, from: usize, to: usize) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let mut stack = vec![(from, to)];
        while let Some((parent, u)) = stack.pop() {
            if self.is_leaf(u) {
                if let Some(l) = &self.nodes[u].label {
                    out.insert(l.clone());
                }
            }
            for (v, _) in self.neighbors(u) {
                if v != parent {
                    stack.push((u, v));
                }
            }
        }
        out
    }

    /// Nontrivial bipartitions, one per internal edge, sorted by side.
    pub fn splits(&self) -> Vec<Split> {
        let all = self.leaf_labels();
        let Some(first) = all.iter().next().cloned() else {
            return Vec::new();
        };
        let mut out: Vec<Split> = self
            .edges
            .iter()
            .filter(|e| !self.is_leaf(e.a) && !self.is_leaf(e.b))
            .filter_map(|e| {
                let side = self.leaves_beyond(e.a, e.b);
                let side = if side.contains(&first) {
                    all.difference(&side).cloned().collect()
                } else {
                    side
                };
                (side.len() >= 2 && all.len() - side.len() >= 2).then_some(Split {
                    side,
                    length: e.length,
                })
            })
            .collect();
        out.sort_by(|a, b| a.side.cmp(&b.side));
        out
    }

    /// Length of the edge joining leaf `label` to the rest of the tree.
    pub fn pendant_length(&self, label: &str) -> Option<f64> {
        let leaf = self.find_leaf(label)?;
        self.neighbors(leaf).first().map(|&(_, l)| l)
    }

    /// Removes internal nodes of degree two by merging their two edges.
    pub(crate) fn suppress_degree_two(&mut self) {
        while let Some(node) =
            (0..self.nodes.len()).find(|&n| self.nodes[n].label.is_none() && self.degree(n) == 2)
        {
            let nb = self.neighbors(node);
            self.edges.retain(|e| e.a != node && e.b != node);
            self.add_edge(nb[0].0, nb[1].0, nb[0].1 + nb[1].1);
            self.remove_node(node);
        }
    }

    fn remove_node(&mut self, node: usize) {
        self.nodes.remove(node);
        for e in &mut self.edges {
            if e.a > node {
                e.a -= 1;
            }
            if e.b > node {
                e.b -= 1;
            }
        }
    }
}
