//! Chow-Liu structure estimation: the maximum-weight spanning tree over
//! absolute pair correlations.
//!
//! Absolute correlation is a monotone proxy for pairwise mutual information
//! between uniform signs, and the channel scales every correlation by the same
//! `(1 - 2q)^2`, so the learned tree does not depend on `q`.

use crate::channel::CorrelationTable;
use crate::dsu::DisjointSets;
use crate::error::{Error, Result};
use crate::tree::TreeTopology;

/// Kruskal over all pairs with weight `|corr[i][j]|`.
///
/// Candidate edges are ordered by weight descending, then `(i, j)` ascending,
/// which makes the output deterministic under ties.
pub fn chow_liu(corr: &CorrelationTable) -> Result<TreeTopology> {
    max_spanning_tree(corr.p(), |i, j| corr.get(i, j).abs())
}

/// Maximum spanning tree of the complete graph on `p` vertices with the given
/// symmetric weight function, using the same tie-break as [`chow_liu`].
pub fn max_spanning_tree(p: usize, weight: impl Fn(usize, usize) -> f64) -> Result<TreeTopology> {
    if p == 0 {
        return Err(Error::InvalidTree("cannot span an empty vertex set".into()));
    }
    let mut candidates: Vec<(f64, usize, usize)> = Vec::with_capacity(p * (p - 1) / 2);
    for i in 0..p {
        for j in (i + 1)..p {
            candidates.push((weight(i, j), i, j));
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    let mut sets = DisjointSets::new(p);
    let mut edges = Vec::with_capacity(p - 1);
    for (_, i, j) in candidates {
        if sets.union(i, j) {
            edges.push((i, j));
            if edges.len() == p - 1 {
                break;
            }
        }
    }
    TreeTopology::new(p, edges)
}

/// Zero-one loss: 0 when the edge sets coincide, 1 otherwise.
pub fn structure_error(estimated: &TreeTopology, truth: &TreeTopology) -> Result<u8> {
    if estimated.vertex_count() != truth.vertex_count() {
        return Err(Error::DimensionMismatch {
            expected: truth.vertex_count(),
            found: estimated.vertex_count(),
        });
    }
    Ok(u8::from(estimated.edges() != truth.edges()))
}

/// Number of true edges missing from the estimate.
pub fn missed_edges(estimated: &TreeTopology, truth: &TreeTopology) -> Result<usize> {
    structure_error(estimated, truth)?;
    Ok(truth
        .edges()
        .iter()
        .filter(|&&(a, b)| estimated.edge_index(a, b).is_none())
        .count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::rng_from_seed;
    use crate::tree::{IsingTreeModel, TreeDistribution};
    use rand::Rng;

    #[test]
    fn triangle_drops_weakest_edge() {
        let corr = CorrelationTable::new(3, vec![1.0, 0.9, 0.72, 0.9, 1.0, -0.8, 0.72, -0.8, 1.0]).unwrap();
        assert_eq!(chow_liu(&corr).unwrap().edges(), &[(0, 1), (1, 2)]);
    }

    #[test]
    fn ties_resolve_lexicographically() {
        let corr = CorrelationTable::new(3, vec![1.0; 9]).unwrap();
        assert_eq!(chow_liu(&corr).unwrap().edges(), &[(0, 1), (0, 2)]);
    }

    #[test]
    fn zero_correlations_still_span() {
        let mut values = vec![0.0; 16];
        (0..4).for_each(|i| values[i * 4 + i] = 1.0);
        let tree = chow_liu(&CorrelationTable::new(4, values).unwrap()).unwrap();
        assert_eq!(tree.edges(), &[(0, 1), (0, 2), (0, 3)]);
    }

    #[test]
    fn single_vertex() {
        let corr = CorrelationTable::new(1, vec![1.0]).unwrap();
        assert_eq!(chow_liu(&corr).unwrap().edge_count(), 0);
    }

    #[test]
    fn recovers_tree_from_exact_correlations() {
        let mut rng = rng_from_seed(17);
        for _ in 0..50 {
            let p = rng.gen_range(2..20);
            let topo = TreeTopology::random(p, &mut rng).unwrap();
            let theta = (0..p - 1)
                .map(|_| rng.gen_range(0.1..1.5) * if rng.gen::<bool>() { 1.0 } else { -1.0 })
                .collect();
            let model = IsingTreeModel::from_topology(topo, theta).unwrap();
            let exact = CorrelationTable::from_distribution(&model);
            assert_eq!(&chow_liu(&exact).unwrap(), model.topology());
        }
    }

    #[test]
    fn structure_error_uses_set_semantics() {
        let a = TreeTopology::new(4, [(0, 1), (1, 2), (2, 3)]).unwrap();
        let b = TreeTopology::new(4, [(3, 2), (2, 1), (0, 1)]).unwrap();
        let c = TreeTopology::new(4, [(0, 1), (1, 2), (1, 3)]).unwrap();
        assert_eq!(structure_error(&a, &b).unwrap(), 0);
        assert_eq!(structure_error(&a, &c).unwrap(), 1);
        assert_eq!(missed_edges(&c, &a).unwrap(), 1);
        assert!(structure_error(&a, &TreeTopology::chain(3).unwrap()).is_err());
    }
}
