use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::PhyloTree;

const CANVAS: f64 = 800.0;
const MARGIN: f64 = 120.0;
const NEUTRAL: &str = "#555555";
const PALETTE: &[&str] = &[
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
    "#bcbd22", "#7f7f7f",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    Radial,
    Rectangular,
}

/// Leaf → family assignment plus family → color overrides.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FamilyColors {
    #[serde(default)]
    pub leaf_family: BTreeMap<String, String>,
    #[serde(default)]
    pub colors: BTreeMap<String, String>,
}

impl FamilyColors {
    /// Every family gets its configured color or the next unused palette entry.
    fn resolved(&self) -> BTreeMap<String, String> {
        let families: BTreeSet<&String> = self.leaf_family.values().collect();
        let mut out = BTreeMap::new();
        let mut next = 0;
        for f in families {
            let c = match self.colors.get(f) {
                Some(c) => c.clone(),
                None => {
                    let c = PALETTE[next % PALETTE.len()].to_string();
                    next += 1;
                    c
                }
            };
            out.insert(f.clone(), c);
        }
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

struct Drawing {
    pos: Vec<(f64, f64)>,
    /// (parent, child, branch length) in drawing order.
    branches: Vec<(usize, usize, f64)>,
    /// Vertical connectors of the rectangular layout.
    connectors: Vec<((f64, f64), (f64, f64))>,
}

fn children(tree: &PhyloTree, node: usize, parent: Option<usize>) -> Vec<(usize, f64)> {
    tree.neighbors(node)
        .into_iter()
        .filter(|&(v, _)| Some(v) != parent)
        .collect()
}

fn leaf_counts(tree: &PhyloTree, node: usize, parent: Option<usize>, out: &mut [usize]) -> usize {
    let kids = children(tree, node, parent);
    let c = if kids.is_empty() {
        1
    } else {
        kids.iter()
            .map(|&(k, _)| leaf_counts(tree, k, Some(node), out))
            .sum()
    };
    out[node] = c;
    c
}

/// Equal-angle layout: each subtree gets a wedge proportional to its leaf
/// count and every branch is a straight segment of its own length.
fn radial(tree: &PhyloTree, root: usize) -> Drawing {
    let mut counts = vec![0; tree.nodes.len()];
    leaf_counts(tree, root, None, &mut counts);
    let mut d = Drawing {
        pos: vec![(0.0, 0.0); tree.nodes.len()],
        branches: Vec::new(),
        connectors: Vec::new(),
    };
    let mut stack = vec![(root, None::<usize>, 0.0_f64, 2.0 * PI)];
    while let Some((node, parent, start, wedge)) = stack.pop() {
        let kids = children(tree, node, parent);
        let total: usize = kids.iter().map(|&(k, _)| counts[k]).sum();
        let mut a = start;
        for (k, len) in kids {
            let w = wedge * counts[k] as f64 / total as f64;
            let mid = a + w / 2.0;
            let (x, y) = d.pos[node];
            d.pos[k] = (x + len * mid.cos(), y + len * mid.sin());
            d.branches.push((node, k, len));
            stack.push((k, Some(node), a, w));
            a += w;
        }
    }
    d
}

fn rectangular(tree: &PhyloTree, root: usize) -> Drawing {
    fn place(
        tree: &PhyloTree,
        node: usize,
        parent: Option<usize>,
        x: f64,
        next_leaf: &mut f64,
        d: &mut Drawing,
    ) -> f64 {
        let kids = children(tree, node, parent);
        let y = if kids.is_empty() {
            *next_leaf += 1.0;
            *next_leaf - 1.0
        } else {
            let ys: Vec<f64> = kids
                .iter()
                .map(|&(k, len)| {
                    d.branches.push((node, k, len));
                    place(tree, k, Some(node), x + len, next_leaf, d)
                })
                .collect();
            let (lo, hi) = ys
                .iter()
                .fold((f64::MAX, f64::MIN), |(lo, hi), &y| (lo.min(y), hi.max(y)));
            d.connectors.push(((x, lo), (x, hi)));
            (lo + hi) / 2.0
        };
        d.pos[node] = (x, y);
        y
    }
    let mut d = Drawing {
        pos: vec![(0.0, 0.0); tree.nodes.len()],
        branches: Vec::new(),
        connectors: Vec::new(),
    };
    let mut next = 0.0;
    place(tree, root, None, 0.0, &mut next, &mut d);
    d
}

/// Renders a self-contained SVG. In the radial layout the ink along the path
/// between two leaves is proportional to their tree distance; in the
/// rectangular layout horizontal segments are.
pub fn render_svg(tree: &PhyloTree, families: &FamilyColors, layout: Layout) -> String {
    let Some(root) = tree.anchor() else {
        return format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{CANVAS}\" height=\"{CANVAS}\"/>\n"
        );
    };
    let d = match layout {
        Layout::Radial => radial(tree, root),
        Layout::Rectangular => rectangular(tree, root),
    };
    let palette = families.resolved();
    let leaf_color = |label: &str| -> Option<&String> {
        families.leaf_family.get(label).and_then(|f| palette.get(f))
    };
    let branch_color = |parent: usize, child: usize| -> String {
        let below = tree.leaves_beyond(parent, child);
        let colors: BTreeSet<Option<&String>> = below.iter().map(|l| leaf_color(l)).collect();
        match colors.into_iter().collect::<Vec<_>>().as_slice() {
            [Some(c)] => (*c).clone(),
            _ => NEUTRAL.to_string(),
        }
    };

    // Fit the drawing into the canvas with a uniform scale.
    let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for &(x, y) in &d.pos {
        x0 = x0.min(x);
        y0 = y0.min(y);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    let span = match layout {
        Layout::Radial => (x1 - x0).max(y1 - y0),
        Layout::Rectangular => x1 - x0,
    };
    let inner = CANVAS - 2.0 * MARGIN;
    let scale = if span > 0.0 { inner / span } else { 1.0 };
    let (yscale, height) = match layout {
        Layout::Radial => (scale, CANVAS),
        Layout::Rectangular => (24.0, (y1 - y0) * 24.0 + 2.0 * 40.0),
    };
    let yoff = match layout {
        Layout::Radial => MARGIN,
        Layout::Rectangular => 40.0,
    };
    let px = |(x, y): (f64, f64)| ((x - x0) * scale + MARGIN, (y - y0) * yscale + yoff);

    let mut out = String::new();
    let _ = writeln!(out, "<?xml version=\"1.0\" encoding=\"UTF-8\"?>");
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{CANVAS}\" height=\"{height:.1}\" viewBox=\"0 0 {CANVAS} {height:.1}\" data-scale=\"{scale:.6}\">"
    );
    let _ = writeln!(out, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let _ = writeln!(
        out,
        "<g fill=\"none\" stroke-width=\"2\" stroke-linecap=\"round\">"
    );
    for &((ax, ay), (bx, by)) in &d.connectors {
        let (ax, ay) = px((ax, ay));
        let (bx, by) = px((bx, by));
        let _ = writeln!(
            out,
            "<line class=\"connector\" x1=\"{ax:.4}\" y1=\"{ay:.4}\" x2=\"{bx:.4}\" y2=\"{by:.4}\" stroke=\"{NEUTRAL}\"/>"
        );
    }
    for &(p, c, len) in &d.branches {
        let (ax, ay) = match layout {
            Layout::Radial => px(d.pos[p]),
            Layout::Rectangular => px((d.pos[p].0, d.pos[c].1)),
        };
        let (bx, by) = px(d.pos[c]);
        let _ = writeln!(
            out,
            "<line class=\"branch\" x1=\"{ax:.4}\" y1=\"{ay:.4}\" x2=\"{bx:.4}\" y2=\"{by:.4}\" stroke=\"{}\" data-length=\"{len}\"/>",
            branch_color(p, c)
        );
    }
    let _ = writeln!(out, "</g>");
    let _ = writeln!(out, "<g font-family=\"sans-serif\" font-size=\"12\">");
    for leaf in tree.leaves() {
        let Some(label) = &tree.nodes[leaf].label else {
            continue;
        };
        let (x, y) = px(d.pos[leaf]);
        let (anchor, dx) = match layout {
            Layout::Radial if x < CANVAS / 2.0 => ("end", -4.0),
            _ => ("start", 4.0),
        };
        let fill = leaf_color(label).map_or(NEUTRAL, String::as_str);
        let _ = writeln!(
            out,
            "<text class=\"leaf\" x=\"{:.4}\" y=\"{:.4}\" text-anchor=\"{anchor}\" dominant-baseline=\"middle\" fill=\"{fill}\">{}</text>",
            x + dx,
            y,
            escape(label)
        );
    }
    let _ = writeln!(out, "</g>");
    let _ = writeln!(out, "</svg>");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::parse_newick;

    #[test]
    fn leaf_text_elements_and_colors() {
        let t = parse_newick("(A:1,B:1,C:2);").unwrap();
        let mut fam = FamilyColors::default();
        fam.leaf_family.insert("A".into(), "x".into());
        fam.leaf_family.insert("B".into(), "x".into());
        fam.leaf_family.insert("C".into(), "y".into());
        for layout in [Layout::Radial, Layout::Rectangular] {
            let svg = render_svg(&t, &fam, layout);
            assert_eq!(svg.matches("class=\"leaf\"").count(), 3);
            assert!(svg.contains(PALETTE[0]) && svg.contains(PALETTE[1]));
        }
        fam.colors.insert("y".into(), "#000001".into());
        assert!(render_svg(&t, &fam, Layout::Radial).contains("#000001"));
    }

    #[test]
    fn labels_are_escaped() {
        let t = parse_newick("('a<b':1,c:1,d:1);").unwrap();
        let svg = render_svg(&t, &FamilyColors::default(), Layout::Radial);
        assert!(svg.contains("a&lt;b"));
    }
}
