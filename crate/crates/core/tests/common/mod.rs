#![allow(dead_code)]

use rand::Rng;
use treeising::channel::{rng_from_seed, SampleRng};
use treeising::{IsingTreeModel, TreeTopology};

pub fn rng(seed: u64) -> SampleRng {
    rng_from_seed(seed)
}

/// Random sign times a magnitude uniform in `[lo, hi]`.
pub fn signed<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    let m = rng.gen_range(lo..=hi);
    if rng.gen::<bool>() {
        m
    } else {
        -m
    }
}

pub fn random_model<R: Rng>(rng: &mut R, p: usize, lo: f64, hi: f64) -> IsingTreeModel {
    let topo = TreeTopology::random(p, rng).unwrap();
    let theta = (0..p.saturating_sub(1)).map(|_| signed(rng, lo, hi)).collect();
    IsingTreeModel::from_topology(topo, theta).unwrap()
}

/// All subsets of `0..p` as sorted vertex lists, skipping the empty set.
pub fn nonempty_subsets(p: usize) -> impl Iterator<Item = Vec<usize>> {
    (1usize..1 << p).map(move |mask| (0..p).filter(|&v| mask >> v & 1 == 1).collect())
}

/// Every perfect matching of `vertices` (length must be even).
pub fn perfect_matchings(vertices: &[usize]) -> Vec<Vec<(usize, usize)>> {
    if vertices.is_empty() {
        return vec![Vec::new()];
    }
    let first = vertices[0];
    let mut out = Vec::new();
    for k in 1..vertices.len() {
        let rest: Vec<usize> = vertices[1..].iter().copied().filter(|&v| v != vertices[k]).collect();
        for mut m in perfect_matchings(&rest) {
            m.push((first, vertices[k]));
            out.push(m);
        }
    }
    out
}

/// Edge sets of the tree paths joining each pair, or `None` if two paths share an edge.
pub fn disjoint_path_union(tree: &TreeTopology, pairs: &[(usize, usize)]) -> Option<Vec<usize>> {
    let mut used = vec![false; tree.edge_count()];
    for &(a, b) in pairs {
        for e in tree.path_edges(a, b).unwrap() {
            if used[e] {
                return None;
            }
            used[e] = true;
        }
    }
    Some((0..used.len()).filter(|&e| used[e]).collect())
}
