//! Brute-force ground truth over all `2^p` spin configurations.
//!
//! State `s` encodes vertex `b` as -1 when bit `b` of `s` is set and +1
//! otherwise. Everything here is exact; oversized inputs are refused.

use crate::channel::NoiseChannel;
use crate::error::{Error, Result};
use crate::tree::TreeDistribution;

pub const MAX_HIDDEN_P: usize = 20;
pub const MAX_NOISY_P: usize = 14;

/// Probability of every state, indexed as described in the module docs.
#[derive(Debug, Clone, PartialEq)]
pub struct PmfTable {
    p: usize,
    probs: Vec<f64>,
}

impl PmfTable {
    pub fn new(p: usize, probs: Vec<f64>) -> Result<Self> {
        if p > MAX_HIDDEN_P {
            return Err(Error::Unsupported(format!("pmf tables need p <= {MAX_HIDDEN_P}, got {p}")));
        }
        if probs.len() != 1 << p {
            return Err(Error::DimensionMismatch { expected: 1 << p, found: probs.len() });
        }
        Ok(PmfTable { p, probs })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, state: usize) -> f64 {
        self.probs[state]
    }
}

/// Spin of vertex `v` in state `s`.
#[inline]
pub fn spin(state: usize, v: usize) -> i8 {
    if state >> v & 1 == 1 {
        -1
    } else {
        1
    }
}

/// Exact pmf of a tree distribution: `1/2 prod_e (1 + x_i x_j mu_e) / 2`.
pub fn enumerate_hidden<D: TreeDistribution + ?Sized>(dist: &D) -> Result<PmfTable> {
    let p = dist.vertex_count();
    if p > MAX_HIDDEN_P {
        return Err(Error::Unsupported(format!("exact enumeration needs p <= {MAX_HIDDEN_P}, got {p}")));
    }
    let edges = dist.topology().edges();
    let mu = dist.edge_mu();
    let probs = (0..1usize << p)
        .map(|s| {
            edges.iter().zip(mu).fold(0.5, |acc, (&(a, b), &m)| {
                let agree = f64::from(spin(s, a) * spin(s, b));
                acc * (1.0 + agree * m) / 2.0
            })
        })
        .collect();
    Ok(PmfTable { p, probs })
}

/// Exact pmf of the channel output,
/// `p_Y(y) = sum_x p(x) q^d(x,y) (1-q)^(p - d(x,y))` with Hamming distance d.
pub fn enumerate_noisy<D: TreeDistribution + ?Sized>(dist: &D, q: f64) -> Result<PmfTable> {
    let p = dist.vertex_count();
    if p > MAX_NOISY_P {
        return Err(Error::Unsupported(format!("noisy enumeration needs p <= {MAX_NOISY_P}, got {p}")));
    }
    if !(0.0..=0.5).contains(&q) {
        return Err(Error::DegenerateChannel(q));
    }
    let hidden = enumerate_hidden(dist)?;
    // weight of a flip pattern with d flips
    let by_distance: Vec<f64> = (0..=p as i32).map(|d| q.powi(d) * (1.0 - q).powi(p as i32 - d)).collect();
    let probs = (0..1usize << p)
        .map(|y| {
            hidden
                .probs
                .iter()
                .enumerate()
                .map(|(x, &px)| px * by_distance[(x ^ y).count_ones() as usize])
                .sum()
        })
        .collect();
    Ok(PmfTable { p, probs })
}

/// Noisy pmf for a validated channel.
pub fn enumerate_channel<D: TreeDistribution + ?Sized>(dist: &D, channel: &NoiseChannel) -> Result<PmfTable> {
    enumerate_noisy(dist, channel.q())
}

/// `E[prod_{s in subset} X_s]` under the table.
pub fn oracle_moment(table: &PmfTable, subset: &[usize]) -> Result<f64> {
    let mut mask = 0usize;
    for &v in subset {
        if v >= table.p {
            return Err(Error::VertexOutOfRange { vertex: v, p: table.p });
        }
        mask ^= 1 << v;
    }
    Ok(table
        .probs
        .iter()
        .enumerate()
        .map(|(s, &pr)| if (s & mask).count_ones() % 2 == 1 { -pr } else { pr })
        .sum())
}

fn check_same_p(a: &PmfTable, b: &PmfTable) -> Result<()> {
    if a.p != b.p {
        return Err(Error::DimensionMismatch { expected: a.p, found: b.p });
    }
    Ok(())
}

/// Total variation distance `1/2 sum |a - b|`.
pub fn oracle_tv(a: &PmfTable, b: &PmfTable) -> Result<f64> {
    check_same_p(a, b)?;
    Ok(0.5 * a.probs.iter().zip(&b.probs).map(|(x, y)| (x - y).abs()).sum::<f64>())
}

/// The four-cell marginal of `(X_i, X_j)`, indexed by `(bit_i, bit_j)`.
pub fn pair_marginal(table: &PmfTable, i: usize, j: usize) -> [f64; 4] {
    let mut cells = [0.0; 4];
    for (s, &pr) in table.probs.iter().enumerate() {
        cells[(s >> i & 1) << 1 | (s >> j & 1)] += pr;
    }
    cells
}

/// Largest total variation between pairwise marginals (0 when p < 2).
pub fn oracle_pairwise_tv_sup(a: &PmfTable, b: &PmfTable) -> Result<f64> {
    check_same_p(a, b)?;
    let mut sup = 0.0f64;
    for i in 0..a.p {
        for j in (i + 1)..a.p {
            let (ma, mb) = (pair_marginal(a, i, j), pair_marginal(b, i, j));
            let tv = 0.5 * ma.iter().zip(&mb).map(|(x, y)| (x - y).abs()).sum::<f64>();
            sup = sup.max(tv);
        }
    }
    Ok(sup)
}

/// `P(X_i = +1 | X_j = x_j)` from the joint table.
pub fn oracle_conditional(table: &PmfTable, i: usize, j: usize, xj: i8) -> f64 {
    let m = pair_marginal(table, i, j);
    let bj = usize::from(xj < 0);
    m[bj] / (m[bj] + m[2 | bj])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::rng_from_seed;
    use crate::tree::{IsingTreeModel, TreeTopology};

    #[test]
    fn single_vertex_is_fair_coin() {
        let model = IsingTreeModel::new(1, []).unwrap();
        assert_eq!(enumerate_hidden(&model).unwrap().probs(), &[0.5, 0.5]);
    }

    #[test]
    fn two_node_table() {
        let model = IsingTreeModel::new(2, [(0, 1, 0.8f64.atanh())]).unwrap();
        let t = enumerate_hidden(&model).unwrap();
        let expected = [0.45, 0.05, 0.05, 0.45];
        for (a, b) in t.probs().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn noisy_extremes() {
        let mut rng = rng_from_seed(2);
        let topo = TreeTopology::random(5, &mut rng).unwrap();
        let model = IsingTreeModel::uniform(topo, 0.9).unwrap();
        let hidden = enumerate_hidden(&model).unwrap();
        assert_eq!(enumerate_noisy(&model, 0.0).unwrap(), hidden);
        let uniform = enumerate_noisy(&model, 0.5).unwrap();
        assert!(uniform.probs().iter().all(|&x| (x - 1.0 / 32.0).abs() < 1e-15));
    }

    #[test]
    fn size_guards() {
        let big = IsingTreeModel::uniform(TreeTopology::chain(21).unwrap(), 0.3).unwrap();
        assert!(matches!(enumerate_hidden(&big), Err(Error::Unsupported(_))));
        let mid = IsingTreeModel::uniform(TreeTopology::chain(15).unwrap(), 0.3).unwrap();
        assert!(matches!(enumerate_noisy(&mid, 0.1), Err(Error::Unsupported(_))));
    }

    #[test]
    fn tv_extremes() {
        let a = PmfTable::new(1, vec![1.0, 0.0]).unwrap();
        let b = PmfTable::new(1, vec![0.0, 1.0]).unwrap();
        assert_eq!(oracle_tv(&a, &a).unwrap(), 0.0);
        assert_eq!(oracle_tv(&a, &b).unwrap(), 1.0);
        assert_eq!(oracle_pairwise_tv_sup(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn moment_of_empty_subset_is_one() {
        let model = IsingTreeModel::uniform(TreeTopology::chain(3).unwrap(), 0.4).unwrap();
        let t = enumerate_hidden(&model).unwrap();
        assert!((oracle_moment(&t, &[]).unwrap() - 1.0).abs() < 1e-15);
        assert!(oracle_moment(&t, &[3]).is_err());
    }
}
