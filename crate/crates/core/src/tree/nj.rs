use super::PhyloTree;
use crate::error::{Error, Result};
use crate::phylo::{DistanceMatrix, LabeledMatrix};

/// Neighbor-Joining on a distance matrix. Infinite distances are replaced by
/// the matrix's finite cap first.
pub fn nj_tree(d: &DistanceMatrix) -> Result<PhyloTree> {
    if d.has_infinite() {
        nj_from_matrix(&d.capped())
    } else {
        nj_from_matrix(&d.matrix)
    }
}

/// Clamps a negative branch to zero, moving the deficit onto its sibling so
/// the pair sum is unchanged (while it stays non-negative).
fn clamp_pair(li: f64, lj: f64) -> (f64, f64) {
    if li < 0.0 {
        (0.0, (lj + li).max(0.0))
    } else if lj < 0.0 {
        ((li + lj).max(0.0), 0.0)
    } else {
        (li, lj)
    }
}

/// Neighbor-Joining on a finite, symmetric matrix with at least three rows.
///
/// The pair minimizing `Q(i,j) = (n-2)d(i,j) - r_i - r_j` is joined at each
/// step; ties keep the lexicographically first `(i, j)` over the current
/// active ordering. The last three clusters meet at a central node.
pub fn nj_from_matrix(m: &LabeledMatrix) -> Result<PhyloTree> {
    let n = m.n();
    if n < 3 {
        return Err(Error::input(format!(
            "neighbor joining needs at least 3 taxa, got {n}"
        )));
    }
    let scale = m.values.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    for i in 0..n {
        if m.get(i, i) != 0.0 {
            return Err(Error::input(format!(
                "diagonal entry for {} is not zero",
                m.model_ids[i]
            )));
        }
        for j in 0..i {
            let (a, b) = (m.get(i, j), m.get(j, i));
            if !a.is_finite() || !b.is_finite() {
                return Err(Error::input("distance matrix has non-finite entries"));
            }
            if (a - b).abs() > 1e-12 * scale.max(1.0) {
                return Err(Error::input(format!(
                    "distance matrix is not symmetric at ({}, {})",
                    m.model_ids[i], m.model_ids[j]
                )));
            }
        }
    }

    let mut tree = PhyloTree::default();
    let mut active: Vec<usize> = m
        .model_ids
        .iter()
        .map(|id| tree.add_node(Some(id.clone())))
        .collect();
    let mut d: Vec<Vec<f64>> = (0..n).map(|i| m.row(i).to_vec()).collect();

    while active.len() > 3 {
        let k = active.len();
        let r: Vec<f64> = d.iter().map(|row| row.iter().sum()).collect();
        let mut best = (0, 1);
        let mut best_q = f64::INFINITY;
        for i in 0..k {
            for j in i + 1..k {
                let q = (k as f64 - 2.0) * d[i][j] - r[i] - r[j];
                if q < best_q {
                    best_q = q;
                    best = (i, j);
                }
            }
        }
        let (i, j) = best;
        let dij = d[i][j];
        let li = 0.5 * dij + (r[i] - r[j]) / (2.0 * (k as f64 - 2.0));
        let (li, lj) = clamp_pair(li, dij - li);

        let u = tree.add_node(None);
        tree.add_edge(u, active[i], li);
        tree.add_edge(u, active[j], lj);

        let du: Vec<f64> = (0..k).map(|x| 0.5 * (d[i][x] + d[j][x] - dij)).collect();
        for x in 0..k {
            d[i][x] = du[x];
            d[x][i] = du[x];
        }
        d[i][i] = 0.0;
        d.remove(j);
        for row in &mut d {
            row.remove(j);
        }
        active[i] = u;
        active.remove(j);
    }

    let (ab, ac, bc) = (d[0][1], d[0][2], d[1][2]);
    let la = 0.5 * (ab + ac - bc);
    let (la, lb) = clamp_pair(la, ab - la);
    let lc = (0.5 * (ac + bc - ab)).max(0.0);
    let center = tree.add_node(None);
    tree.add_edge(center, active[0], la);
    tree.add_edge(center, active[1], lb);
    tree.add_edge(center, active[2], lc);
    Ok(tree)
}
