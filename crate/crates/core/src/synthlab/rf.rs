use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::tree::PhyloTree;

/// Robinson–Foulds distance: the number of nontrivial bipartitions present in
/// exactly one of the two trees.
pub fn rf_distance(a: &PhyloTree, b: &PhyloTree) -> Result<usize> {
    let (la, lb) = (a.leaf_labels(), b.leaf_labels());
    if la != lb {
        let diff: Vec<_> = la.symmetric_difference(&lb).cloned().collect();
        return Err(Error::input(format!(
            "trees have different leaf sets: {}",
            diff.join(", ")
        )));
    }
    let sa: BTreeSet<_> = a.splits().into_iter().map(|s| s.side).collect();
    let sb: BTreeSet<_> = b.splits().into_iter().map(|s| s.side).collect();
    Ok(sa.symmetric_difference(&sb).count())
}
