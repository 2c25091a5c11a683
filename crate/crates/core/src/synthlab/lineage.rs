use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::model::{blend, mutate, spawn_root, SyntheticModel};
use crate::error::{Error, Result};
use crate::io;
use crate::rng::{self, hash_str};
use crate::tree::PhyloTree;

/// One node of a lineage: the root has no parent; every other node descends
/// from its parent through a mutation of the given rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineageNode {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
    #[serde(default)]
    pub rate: f64,
    /// Inherited from the nearest ancestor that sets one; defaults to the node id.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineageSpec {
    pub nodes: Vec<LineageNode>,
    pub vocab_size: usize,
    pub gene_count: usize,
    pub concentration: f64,
    /// Also return internal (ancestor) models as roster members.
    #[serde(default)]
    pub include_ancestors: bool,
}

impl LineageSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = io::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))
    }

    /// The balanced quartet `((A,B),(C,D))` with every edge mutated at `rate`.
    pub fn quartet(rate: f64, vocab_size: usize, gene_count: usize, concentration: f64) -> Self {
        let node = |id: &str, parent: Option<&str>, family: Option<&str>| LineageNode {
            id: id.into(),
            parent: parent.map(Into::into),
            rate: if parent.is_some() { rate } else { 0.0 },
            family: family.map(Into::into),
        };
        LineageSpec {
            nodes: vec![
                node("root", None, None),
                node("X", Some("root"), Some("fx")),
                node("Y", Some("root"), Some("fy")),
                node("A", Some("X"), None),
                node("B", Some("X"), None),
                node("C", Some("Y"), None),
                node("D", Some("Y"), None),
            ],
            vocab_size,
            gene_count,
            concentration,
            include_ancestors: false,
        }
    }

    /// Chain `n0 -> n1 -> ... ` of `len` nodes with a constant rate per step.
    pub fn chain(
        len: usize,
        rate: f64,
        vocab_size: usize,
        gene_count: usize,
        concentration: f64,
    ) -> Self {
        LineageSpec {
            nodes: (0..len)
                .map(|i| LineageNode {
                    id: format!("n{i}"),
                    parent: (i > 0).then(|| format!("n{}", i - 1)),
                    rate: if i > 0 { rate } else { 0.0 },
                    family: Some("chain".into()),
                })
                .collect(),
            vocab_size,
            gene_count,
            concentration,
            include_ancestors: true,
        }
    }

    /// Parent-before-child order of node indices; fails on cycles, dangling
    /// parents, duplicate ids, or a missing/extra root.
    fn topological_order(&self) -> Result<Vec<usize>> {
        let mut index = HashMap::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if index.insert(n.id.as_str(), i).is_some() {
                return Err(Error::input(format!("duplicate lineage node {}", n.id)));
            }
            if !(0.0..=1.0).contains(&n.rate) {
                return Err(Error::input(format!(
                    "node {}: rate {} outside [0, 1]",
                    n.id, n.rate
                )));
            }
        }
        let roots: Vec<usize> = (0..self.nodes.len())
            .filter(|&i| self.nodes[i].parent.is_none())
            .collect();
        if roots.len() != 1 {
            return Err(Error::input(format!(
                "lineage needs exactly one root, found {}",
                roots.len()
            )));
        }
        let mut children: HashMap<usize, Vec<usize>> = HashMap::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if let Some(p) = &n.parent {
                let pi = *index
                    .get(p.as_str())
                    .ok_or_else(|| Error::input(format!("node {}: unknown parent {p}", n.id)))?;
                children.entry(pi).or_default().push(i);
            }
        }
        let mut order = Vec::new();
        let mut stack = vec![roots[0]];
        let mut seen = HashSet::new();
        while let Some(u) = stack.pop() {
            seen.insert(u);
            order.push(u);
            if let Some(cs) = children.get(&u) {
                stack.extend(cs.iter().rev());
            }
        }
        if seen.len() != self.nodes.len() {
            let stuck: Vec<_> = (0..self.nodes.len())
                .filter(|i| !seen.contains(i))
                .map(|i| self.nodes[i].id.as_str())
                .collect();
            return Err(Error::input(format!(
                "lineage contains a cycle through {}",
                stuck.join(", ")
            )));
        }
        Ok(order)
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticRoster {
    pub models: Vec<SyntheticModel>,
    /// Ground-truth unrooted tree over the roster's model ids; edge lengths are mutation rates.
    pub truth: PhyloTree,
}

/// Instantiates every lineage node depth-first. Leaves (and ancestors, when
/// requested) are returned together with the true topology.
pub fn build_family(spec: &LineageSpec, seed: u64) -> Result<SyntheticRoster> {
    let order = spec.topological_order()?;
    let mut built: HashMap<usize, SyntheticModel> = HashMap::new();
    let mut families: HashMap<usize, String> = HashMap::new();
    let index: HashMap<&str, usize> = spec
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.id.as_str(), i))
        .collect();

    let mut tree = PhyloTree::default();
    let mut tree_node: HashMap<usize, usize> = HashMap::new();
    let has_children: HashSet<usize> = spec
        .nodes
        .iter()
        .filter_map(|n| n.parent.as_deref().map(|p| index[p]))
        .collect();

    for &i in &order {
        let node = &spec.nodes[i];
        let node_seed = rng::mix(&[seed, hash_str(&node.id)]);
        let parent = node.parent.as_deref().map(|p| index[p]);
        let mut model = match parent {
            None => spawn_root(
                spec.vocab_size,
                spec.gene_count,
                spec.concentration,
                node_seed,
            )?,
            Some(p) => mutate(&built[&p], node.rate, node_seed)?,
        };
        let family = node
            .family
            .clone()
            .or_else(|| parent.map(|p| families[&p].clone()))
            .unwrap_or_else(|| node.id.clone());
        model.id = node.id.clone();
        model.family = family.clone();
        model.parent = node.parent.clone();
        families.insert(i, family);
        built.insert(i, model);

        let is_leaf = !has_children.contains(&i);
        let t = tree.add_node(is_leaf.then(|| node.id.clone()));
        if let Some(p) = parent {
            tree.add_edge(tree_node[&p], t, node.rate);
        }
        if !is_leaf && spec.include_ancestors {
            let a = tree.add_node(Some(node.id.clone()));
            tree.add_edge(t, a, 0.0);
        }
        tree_node.insert(i, t);
    }
    tree.suppress_degree_two();

    let models = order
        .iter()
        .filter(|i| spec.include_ancestors || !has_children.contains(i))
        .map(|i| built[i].clone())
        .collect();
    Ok(SyntheticRoster {
        models,
        truth: tree,
    })
}

/// Parameters of a roster whose members sit at known positions on a gradient
/// between two unrelated founders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientSpec {
    pub families: usize,
    pub members: usize,
    pub vocab_size: usize,
    pub gene_count: usize,
    pub concentration: f64,
    /// Fraction of genes a member inherits from its family ancestor.
    pub family_share: f64,
    /// Half-width of the member position spread around the family position.
    pub member_spread: f64,
}

impl Default for GradientSpec {
    fn default() -> Self {
        GradientSpec {
            families: 5,
            members: 10,
            vocab_size: 8,
            gene_count: 256,
            concentration: 0.5,
            family_share: 0.3,
            member_spread: 0.1,
        }
    }
}

/// Models with their gradient positions in `[0, 1]`, keyed by model id.
#[derive(Debug, Clone)]
pub struct GradientRoster {
    pub models: Vec<SyntheticModel>,
    pub positions: BTreeMap<String, f64>,
}

/// Each family gets a position `t_f`; each member a position `t` near it. A
/// member takes a gene from its family ancestor with probability
/// `family_share`, otherwise from the high founder with probability `t` and
/// from the low founder else.
pub fn gradient_roster(spec: &GradientSpec, seed: u64) -> Result<GradientRoster> {
    if spec.families == 0 || spec.members == 0 {
        return Err(Error::input("gradient roster needs families and members"));
    }
    let low = spawn_root(
        spec.vocab_size,
        spec.gene_count,
        spec.concentration,
        rng::mix(&[seed, 1]),
    )?;
    let high = spawn_root(
        spec.vocab_size,
        spec.gene_count,
        spec.concentration,
        rng::mix(&[seed, 2]),
    )?;
    let mut r = rng::keyed_rng(&[seed, 3]);
    let mut models = Vec::new();
    let mut positions = BTreeMap::new();
    for f in 0..spec.families {
        let base = (f as f64 + 0.5) / spec.families as f64;
        let tf = (base + r.random_range(-0.25..0.25) / spec.families as f64).clamp(0.0, 1.0);
        let ancestor = blend(&low, &high, tf, rng::mix(&[seed, 10, f as u64]))?;
        let ancestor = mutate(&ancestor, 0.2, rng::mix(&[seed, 11, f as u64]))?;
        for m in 0..spec.members {
            let t = (tf + r.random_range(-spec.member_spread..=spec.member_spread)).clamp(0.0, 1.0);
            let mix = blend(&low, &high, t, rng::mix(&[seed, 12, f as u64, m as u64]))?;
            let mut member = blend(
                &mix,
                &ancestor,
                spec.family_share,
                rng::mix(&[seed, 13, f as u64, m as u64]),
            )?;
            member.id = format!("f{f}-m{m}");
            member.family = format!("family{f}");
            member.parent = Some(format!("family{f}"));
            member.seed = rng::mix(&[seed, 14, f as u64, m as u64]);
            positions.insert(member.id.clone(), t);
            models.push(member);
        }
    }
    Ok(GradientRoster { models, positions })
}
