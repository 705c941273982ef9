//! Higher-order moments of sign-valued tree models.
//!
//! For an even vertex subset `V'`, the vertices can be paired so that the tree
//! paths joining each pair are edge-disjoint. With `CP(V')` the union of those
//! paths,
//!
//! ```text
//! E[prod_{s in V'} X_s] = prod_{e in CP(V')} mu_e      (|V'| even)
//!                       = 0                            (|V'| odd)
//! ```
//!
//! [`matching_pairs`] finds the pairing with one leaf-to-root sweep: every
//! marked vertex hands a token to its parent, two tokens meeting at a vertex
//! are matched, and the edges a token crosses form `CP(V')`.

use crate::channel::CorrelationTable;
use crate::error::{Error, Result};
use crate::predictive::fit_distribution;
use crate::tree::{IsingTreeModel, TreeDistribution, TreeTopology};

/// Edge-disjoint pairing of an even vertex subset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathMatching {
    /// Matched vertex pairs, each as `(a, b)` with `a < b`, sorted.
    pub pairs: Vec<(usize, usize)>,
    /// Indices (into `topology.edges()`) of the edges on the matched paths, sorted.
    pub edge_union: Vec<usize>,
    /// Number of vertices the sweep processed; never exceeds `p - 1`.
    pub edge_visits: usize,
}

fn validate_subset(tree: &TreeTopology, subset: &[usize]) -> Result<Vec<bool>> {
    if subset.is_empty() {
        return Err(Error::InvalidSubset("subset is empty".into()));
    }
    let mut marked = vec![false; tree.vertex_count()];
    for &v in subset {
        tree.check_vertex(v)?;
        if marked[v] {
            return Err(Error::InvalidSubset(format!("vertex {v} listed twice")));
        }
        marked[v] = true;
    }
    Ok(marked)
}

/// Pairs up an even subset so the connecting paths share no edge.
pub fn matching_pairs(tree: &TreeTopology, subset: &[usize]) -> Result<PathMatching> {
    let marked = validate_subset(tree, subset)?;
    if subset.len() % 2 == 1 {
        return Err(Error::InvalidSubset(format!("subset size {} is odd", subset.len())));
    }
    // token[v] = the subset vertex whose unmatched path currently ends at v
    let mut token: Vec<Option<usize>> = marked.iter().enumerate().map(|(v, &m)| m.then_some(v)).collect();
    let mut open = subset.len();
    let mut pairs = Vec::with_capacity(subset.len() / 2);
    let mut edge_union = Vec::new();
    let mut edge_visits = 0;
    // reversed BFS order visits vertices by nonincreasing depth
    for &v in tree.bfs_order().iter().rev() {
        if open == 0 {
            break;
        }
        edge_visits += 1;
        let Some(origin) = token[v].take() else { continue };
        let parent = tree.parent(v).expect("tokens never reach the root unmatched");
        edge_union.push(tree.parent_edge(v).expect("non-root vertex"));
        match token[parent].take() {
            Some(other) => {
                pairs.push((origin.min(other), origin.max(other)));
                open -= 2;
            }
            None => token[parent] = Some(origin),
        }
    }
    debug_assert_eq!(open, 0);
    pairs.sort_unstable();
    edge_union.sort_unstable();
    Ok(PathMatching { pairs, edge_union, edge_visits })
}

fn moment_over<D: TreeDistribution + ?Sized>(dist: &D, subset: &[usize]) -> Result<f64> {
    validate_subset(dist.topology(), subset)?;
    if subset.len() % 2 == 1 {
        return Ok(0.0);
    }
    let mu = dist.edge_mu();
    Ok(matching_pairs(dist.topology(), subset)?
        .edge_union
        .iter()
        .map(|&e| mu[e])
        .product())
}

/// Exact `E[prod_{s in subset} X_s]` of the model.
pub fn exact_moment(model: &IsingTreeModel, subset: &[usize]) -> Result<f64> {
    moment_over(model, subset)
}

/// Moment of any tree distribution (e.g. a fitted estimate).
pub fn tree_moment<D: TreeDistribution + ?Sized>(dist: &D, subset: &[usize]) -> Result<f64> {
    moment_over(dist, subset)
}

/// Plug-in moment estimate: the exact formula on `tree` with clamped denoised
/// edge correlations `noisy_corr_e / (1 - 2q)^2`.
pub fn estimate_moment(tree: &TreeTopology, noisy_corr: &CorrelationTable, q: f64, subset: &[usize]) -> Result<f64> {
    let fitted = fit_distribution(tree, noisy_corr, q)?;
    moment_over(&fitted, subset)
}
