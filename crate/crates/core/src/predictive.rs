//! Correlation-matched distribution estimate over a learned tree, and the
//! metrics used to score it.

use serde::{Deserialize, Serialize};

use crate::channel::{CorrelationTable, NoiseChannel};
use crate::error::{Error, Result};
use crate::oracle;
use crate::tree::{TreeDistribution, TreeTopology};

/// Largest `p` for which cross-topology KL falls back to enumeration.
pub const MAX_BRUTE_FORCE_KL_P: usize = 20;

/// Tree distribution whose edge correlations are denoised empirical
/// correlations, clamped to `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedTreeDistribution {
    topology: TreeTopology,
    edge_mu: Vec<f64>,
    q_used: f64,
}

impl FittedTreeDistribution {
    /// `edge_mu` must be aligned with `topology.edges()`, each within [-1, 1].
    pub fn new(topology: TreeTopology, edge_mu: Vec<f64>, q_used: f64) -> Result<Self> {
        if edge_mu.len() != topology.edge_count() {
            return Err(Error::DimensionMismatch { expected: topology.edge_count(), found: edge_mu.len() });
        }
        if let Some(m) = edge_mu.iter().find(|m| !(m.abs() <= 1.0)) {
            return Err(Error::InvalidParameter(format!("edge correlation {m} outside [-1, 1]")));
        }
        Ok(FittedTreeDistribution { topology, edge_mu, q_used })
    }

    pub fn q_used(&self) -> f64 {
        self.q_used
    }

    pub fn to_json(&self) -> FittedJson {
        FittedJson {
            p: self.topology.vertex_count(),
            edges: self
                .topology
                .edges()
                .iter()
                .zip(&self.edge_mu)
                .map(|(&(a, b), &m)| (a, b, m))
                .collect(),
            q: self.q_used,
        }
    }

    pub fn from_json(json: &FittedJson) -> Result<Self> {
        let mut triples = json.edges.clone();
        triples.iter_mut().for_each(|t| *t = (t.0.min(t.1), t.0.max(t.1), t.2));
        triples.sort_by_key(|t| (t.0, t.1));
        let topology = TreeTopology::new(json.p, triples.iter().map(|t| (t.0, t.1)))?;
        Self::new(topology, triples.into_iter().map(|t| t.2).collect(), json.q)
    }
}

impl TreeDistribution for FittedTreeDistribution {
    fn topology(&self) -> &TreeTopology {
        &self.topology
    }

    fn edge_mu(&self) -> &[f64] {
        &self.edge_mu
    }
}

/// Wire form: `{"p": int, "edges": [[i, j, mu], ...], "q": real}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FittedJson {
    pub p: usize,
    pub edges: Vec<(usize, usize, f64)>,
    pub q: f64,
}

/// Matches correlations on the edges of `tree`:
/// `mu_e = clamp(noisy_corr_e / (1 - 2q)^2, -1, 1)`.
pub fn fit_distribution(tree: &TreeTopology, noisy_corr: &CorrelationTable, q: f64) -> Result<FittedTreeDistribution> {
    let channel = NoiseChannel::new(q)?;
    if tree.vertex_count() != noisy_corr.p() {
        return Err(Error::DimensionMismatch { expected: tree.vertex_count(), found: noisy_corr.p() });
    }
    let shrink = channel.c_q() * channel.c_q();
    let edge_mu = tree
        .edges()
        .iter()
        .map(|&(a, b)| (noisy_corr.get(a, b) / shrink).clamp(-1.0, 1.0))
        .collect();
    Ok(FittedTreeDistribution { topology: tree.clone(), edge_mu, q_used: q })
}

/// Second-order small-set total variation,
/// `sup_{i<j} 1/2 |E_a[X_i X_j] - E_b[X_i X_j]|`,
/// which for sign variables with uniform marginals equals the largest total
/// variation between pairwise marginals.
pub fn sstv2<A, B>(a: &A, b: &B) -> Result<f64>
where
    A: TreeDistribution + ?Sized,
    B: TreeDistribution + ?Sized,
{
    let p = a.vertex_count();
    if b.vertex_count() != p {
        return Err(Error::DimensionMismatch { expected: p, found: b.vertex_count() });
    }
    let mut sup = 0.0f64;
    for i in 0..p {
        let row_a = a.correlations_from(i);
        let row_b = b.correlations_from(i);
        for j in (i + 1)..p {
            sup = sup.max(0.5 * (row_a[j] - row_b[j]).abs());
        }
    }
    Ok(sup)
}

/// `D(a||b) + D(b||a)` in nats.
///
/// On a shared edge set this is `sum_e (theta_e - theta'_e)(mu_e - mu'_e)`
/// with `theta = artanh(mu)`. Different topologies are handled by enumeration
/// up to [`MAX_BRUTE_FORCE_KL_P`] vertices.
pub fn symmetric_kl<A, B>(a: &A, b: &B) -> Result<f64>
where
    A: TreeDistribution + ?Sized,
    B: TreeDistribution + ?Sized,
{
    let p = a.vertex_count();
    if b.vertex_count() != p {
        return Err(Error::DimensionMismatch { expected: p, found: b.vertex_count() });
    }
    let saturated = |topo: &TreeTopology, mu: &[f64]| {
        topo.edges().iter().zip(mu).find(|(_, m)| m.abs() >= 1.0).map(|(&e, _)| e)
    };
    if let Some((i, j)) = saturated(a.topology(), a.edge_mu()).or_else(|| saturated(b.topology(), b.edge_mu())) {
        return Err(Error::DegenerateParameter(i, j));
    }
    if a.topology().edges() == b.topology().edges() {
        return Ok(a
            .edge_mu()
            .iter()
            .zip(b.edge_mu())
            .map(|(&ma, &mb)| (ma.atanh() - mb.atanh()) * (ma - mb))
            .sum());
    }
    if p > MAX_BRUTE_FORCE_KL_P {
        return Err(Error::Unsupported(format!(
            "symmetric KL between different topologies needs p <= {MAX_BRUTE_FORCE_KL_P}, got {p}"
        )));
    }
    let ta = oracle::enumerate_hidden(a)?;
    let tb = oracle::enumerate_hidden(b)?;
    Ok(ta
        .probs()
        .iter()
        .zip(tb.probs())
        .map(|(&pa, &pb)| (pa - pb) * (pa.ln() - pb.ln()))
        .sum())
}

/// `P(X_i = +1 | X_j = x_j) = (1 + x_j * E[X_i X_j]) / 2`.
pub fn predict_conditional<D>(dist: &D, i: usize, observed: (usize, i8)) -> Result<f64>
where
    D: TreeDistribution + ?Sized,
{
    let (j, xj) = observed;
    if xj != 1 && xj != -1 {
        return Err(Error::InvalidParameter(format!("observed spin {xj} is not +1 or -1")));
    }
    let rho = dist.pair_correlation(i, j)?;
    Ok((1.0 + f64::from(xj) * rho) / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::IsingTreeModel;

    fn two_node(mu: f64) -> FittedTreeDistribution {
        FittedTreeDistribution::new(TreeTopology::chain(2).unwrap(), vec![mu], 0.0).unwrap()
    }

    fn table(p: usize, entries: &[(usize, usize, f64)]) -> CorrelationTable {
        let mut values = vec![0.0; p * p];
        (0..p).for_each(|i| values[i * p + i] = 1.0);
        for &(i, j, v) in entries {
            values[i * p + j] = v;
            values[j * p + i] = v;
        }
        CorrelationTable::new(p, values).unwrap()
    }

    #[test]
    fn fit_divides_and_clamps() {
        let tree = TreeTopology::chain(3).unwrap();
        let corr = table(3, &[(0, 1, 0.2), (1, 2, 0.3), (0, 2, -0.1)]);
        let fitted = fit_distribution(&tree, &corr, 0.25).unwrap();
        assert!((fitted.edge_mu()[0] - 0.8).abs() < 1e-15);
        assert_eq!(fitted.edge_mu()[1], 1.0);
        let raw = fit_distribution(&tree, &corr, 0.0).unwrap();
        assert_eq!(raw.edge_mu(), &[0.2, 0.3]);
        assert_eq!(fit_distribution(&tree, &corr, 0.5), Err(Error::DegenerateChannel(0.5)));
        assert!(fit_distribution(&TreeTopology::chain(2).unwrap(), &corr, 0.1).is_err());
    }

    #[test]
    fn sstv2_single_pair() {
        assert_eq!(sstv2(&two_node(0.8), &two_node(0.8)).unwrap(), 0.0);
        assert!((sstv2(&two_node(0.8), &two_node(0.6)).unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn skl_closed_form_one_edge() {
        let chain = TreeTopology::chain(3).unwrap();
        let a = IsingTreeModel::from_topology(chain.clone(), vec![0.5, 0.9]).unwrap();
        let b = IsingTreeModel::from_topology(chain, vec![0.5, 0.2]).unwrap();
        let expected = (0.9 - 0.2) * (0.9f64.tanh() - 0.2f64.tanh());
        assert!((symmetric_kl(&a, &b).unwrap() - expected).abs() < 1e-15);
        assert_eq!(symmetric_kl(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn skl_flags_unit_correlations() {
        let deg = two_node(1.0);
        assert_eq!(symmetric_kl(&deg, &two_node(0.5)), Err(Error::DegenerateParameter(0, 1)));
    }

    #[test]
    fn skl_refuses_large_mismatched_topologies() {
        let p = MAX_BRUTE_FORCE_KL_P + 1;
        let a = FittedTreeDistribution::new(TreeTopology::chain(p).unwrap(), vec![0.5; p - 1], 0.0).unwrap();
        let b = FittedTreeDistribution::new(TreeTopology::star(p, 0).unwrap(), vec![0.5; p - 1], 0.0).unwrap();
        assert!(matches!(symmetric_kl(&a, &b), Err(Error::Unsupported(_))));
    }

    #[test]
    fn conditional_prediction() {
        assert_eq!(predict_conditional(&two_node(0.8), 0, (1, 1)).unwrap(), 0.9);
        assert!((predict_conditional(&two_node(0.8), 0, (1, -1)).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(predict_conditional(&two_node(0.0), 1, (0, -1)).unwrap(), 0.5);
        assert_eq!(predict_conditional(&two_node(0.3), 1, (1, 1)), Err(Error::InvalidPair(1)));
    }

    #[test]
    fn fitted_json_round_trip() {
        let fitted = FittedTreeDistribution::new(TreeTopology::star(3, 1).unwrap(), vec![0.25, -1.0], 0.1).unwrap();
        let text = serde_json::to_string(&fitted.to_json()).unwrap();
        assert_eq!(text, r#"{"p":3,"edges":[[0,1,0.25],[1,2,-1.0]],"q":0.1}"#);
        let back: FittedJson = serde_json::from_str(&text).unwrap();
        assert_eq!(FittedTreeDistribution::from_json(&back).unwrap(), fitted);
    }
}
