use super::{analysis_step, check_dyadic, synthesis_step, FilterPair};
use crate::{Error, Result};

/// Depth-`level` packet tree; only the `2^level` leaves are kept.
///
/// Leaves are in natural filter-bank order: the binary digits of a leaf
/// index, most significant first, spell the path from the root (0 = lowpass,
/// 1 = highpass). Leaf 0 is the all-lowpass path.
#[derive(Debug, Clone, PartialEq)]
pub struct WpdTree {
    pub level: usize,
    pub leaves: Vec<Vec<f64>>,
    pub original_length: usize,
    pub filter_name: String,
}

pub fn wpd(x: &[f64], filter: &FilterPair, level: usize) -> Result<WpdTree> {
    check_dyadic(x.len(), level, filter)?;
    let mut nodes = vec![x.to_vec()];
    for _ in 0..level {
        nodes = nodes
            .iter()
            .flat_map(|node| {
                let (a, d) = analysis_step(node, filter);
                [a, d]
            })
            .collect();
    }
    Ok(WpdTree {
        level,
        leaves: nodes,
        original_length: x.len(),
        filter_name: filter.name().to_string(),
    })
}

pub fn iwpd(tree: &WpdTree, filter: &FilterPair) -> Result<Vec<f64>> {
    if tree.level < 1 || tree.leaves.len() != 1 << tree.level {
        return Err(Error::Shape(format!(
            "{} leaves for a level-{} tree",
            tree.leaves.len(),
            tree.level
        )));
    }
    let width = tree.leaves[0].len();
    if tree.leaves.iter().any(|l| l.len() != width) || width << tree.level != tree.original_length {
        return Err(Error::Shape(format!(
            "leaf lengths inconsistent with original length {}",
            tree.original_length
        )));
    }
    let mut nodes = tree.leaves.clone();
    while nodes.len() > 1 {
        nodes = nodes
            .chunks_exact(2)
            .map(|pair| synthesis_step(&pair[0], &pair[1], filter))
            .collect();
    }
    Ok(nodes.pop().unwrap())
}
