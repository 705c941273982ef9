mod common;

use proptest::prelude::*;
use rand::Rng;

use common::{disjoint_path_union, perfect_matchings, random_model, rng};
use treeising::channel::{empirical_correlations, sample_hidden, sample_noisy_correlations, CorrelationTable};
use treeising::oracle::{self, enumerate_hidden, enumerate_noisy, oracle_moment, oracle_tv};
use treeising::predictive::FittedTreeDistribution;
use treeising::tree::mutual_information;
use treeising::{
    chow_liu, estimate_moment, exact_moment, matching_pairs, predict_conditional, sstv2, symmetric_kl,
    IsingTreeModel, NoiseChannel, SpinVector, TreeDistribution, TreeTopology,
};

fn model_strategy(max_p: usize) -> impl Strategy<Value = IsingTreeModel> {
    (2..=max_p, any::<u64>()).prop_map(|(p, seed)| random_model(&mut rng(seed), p, 0.05, 2.0))
}

fn fitted_strategy(p: usize) -> impl Strategy<Value = FittedTreeDistribution> {
    any::<u64>().prop_map(move |seed| {
        let mut r = rng(seed);
        let topo = TreeTopology::random(p, &mut r).unwrap();
        let mu = (0..p - 1).map(|_| r.gen_range(-0.95..0.95)).collect();
        FittedTreeDistribution::new(topo, mu, 0.0).unwrap()
    })
}

fn even_subset(p: usize, seed: u64) -> Vec<usize> {
    let mut r = rng(seed);
    let mut vertices: Vec<usize> = (0..p).filter(|_| r.gen::<bool>()).collect();
    if vertices.len() % 2 == 1 {
        vertices.pop();
    }
    if vertices.is_empty() {
        vertices = vec![0, p - 1];
    }
    vertices
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pmf_is_normalized_and_matches_log_pmf(model in model_strategy(9)) {
        let table = enumerate_hidden(&model).unwrap();
        let total: f64 = table.probs().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        let p = model.vertex_count();
        for s in 0..1usize << p {
            let x = SpinVector::from_state_index(s, p);
            let lp = model.log_pmf(&x).unwrap();
            prop_assert!((lp.exp() - table.prob(s)).abs() < 1e-12);
        }
    }

    #[test]
    fn marginals_are_uniform(model in model_strategy(9)) {
        let table = enumerate_hidden(&model).unwrap();
        for v in 0..model.vertex_count() {
            prop_assert!(oracle_moment(&table, &[v]).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn correlation_is_path_product(model in model_strategy(9)) {
        let table = enumerate_hidden(&model).unwrap();
        let p = model.vertex_count();
        for i in 0..p {
            let row = model.correlations_from(i);
            for (j, &rho) in row.iter().enumerate().skip(i + 1) {
                let path: f64 = model.topology().path_edges(i, j).unwrap().iter().map(|&e| model.edge_mu()[e]).product();
                let brute = oracle_moment(&table, &[i, j]).unwrap();
                prop_assert!((rho - brute).abs() < 1e-12);
                prop_assert!((model.pair_correlation(i, j).unwrap() - path).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn edge_products_are_independent(model in model_strategy(9)) {
        // products x_i x_j over distinct edges are independent with mean mu_e
        let table = enumerate_hidden(&model).unwrap();
        let edges = model.topology().edges();
        if edges.len() >= 2 {
            let (a, b) = (edges[0], edges[edges.len() - 1]);
            // a shared endpoint cancels in the product
            let mut vertices: Vec<usize> = Vec::new();
            for v in [a.0, a.1, b.0, b.1] {
                match vertices.iter().position(|&u| u == v) {
                    Some(k) => { vertices.remove(k); }
                    None => vertices.push(v),
                }
            }
            let joint = oracle_moment(&table, &vertices).unwrap();
            let mu = model.edge_mu();
            prop_assert!((joint - mu[0] * mu[edges.len() - 1]).abs() < 1e-12);
        }
    }

    #[test]
    fn mutual_information_is_symmetric_and_bounded(mu in -0.999f64..0.999) {
        let i = mutual_information(mu).unwrap();
        prop_assert!((i - mutual_information(-mu).unwrap()).abs() < 1e-15);
        prop_assert!((0.0..=1.0).contains(&i));
    }

    #[test]
    fn sstv2_bounds_conditional_prediction(a in fitted_strategy(6), b in fitted_strategy(6)) {
        let l2 = sstv2(&a, &b).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                if i == j { continue; }
                for xj in [1i8, -1] {
                    let gap = (predict_conditional(&a, i, (j, xj)).unwrap() - predict_conditional(&b, i, (j, xj)).unwrap()).abs();
                    prop_assert!(gap <= l2 + 1e-15);
                }
            }
        }
    }

    #[test]
    fn skl_matches_enumeration(a in fitted_strategy(5), b in fitted_strategy(5)) {
        let ta = enumerate_hidden(&a).unwrap();
        let tb = enumerate_hidden(&b).unwrap();
        let brute: f64 = ta.probs().iter().zip(tb.probs()).map(|(&x, &y)| (x - y) * (x.ln() - y.ln())).sum();
        prop_assert!((symmetric_kl(&a, &b).unwrap() - brute).abs() < 1e-10);
        // same topology goes through the closed form
        let twin = FittedTreeDistribution::new(a.topology().clone(), b.edge_mu().to_vec(), 0.0).unwrap();
        let t2 = enumerate_hidden(&twin).unwrap();
        let brute2: f64 = ta.probs().iter().zip(t2.probs()).map(|(&x, &y)| (x - y) * (x.ln() - y.ln())).sum();
        prop_assert!((symmetric_kl(&a, &twin).unwrap() - brute2).abs() < 1e-10);
    }

    #[test]
    fn matching_is_edge_disjoint_and_linear(p in 2usize..=64, seed in any::<u64>(), subset_seed in any::<u64>()) {
        let tree = TreeTopology::random(p, &mut rng(seed)).unwrap();
        let subset = even_subset(p, subset_seed);
        let m = matching_pairs(&tree, &subset).unwrap();
        prop_assert_eq!(m.pairs.len(), subset.len() / 2);
        let mut covered: Vec<usize> = m.pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
        covered.sort_unstable();
        let mut sorted = subset.clone();
        sorted.sort_unstable();
        prop_assert_eq!(covered, sorted);
        prop_assert_eq!(disjoint_path_union(&tree, &m.pairs), Some(m.edge_union.clone()));
        prop_assert!(m.edge_visits < p);
    }

    #[test]
    fn moment_is_matching_independent(model in model_strategy(10), subset_seed in any::<u64>()) {
        let p = model.vertex_count();
        let mut subset = even_subset(p, subset_seed);
        subset.truncate(6);
        let moment = exact_moment(&model, &subset).unwrap();
        let mu = model.edge_mu();
        let mut valid = 0;
        for matching in perfect_matchings(&subset) {
            if let Some(union) = disjoint_path_union(model.topology(), &matching) {
                valid += 1;
                let product: f64 = union.iter().map(|&e| mu[e]).product();
                prop_assert!((product - moment).abs() < 1e-14);
            }
        }
        prop_assert!(valid >= 1);
    }

    #[test]
    fn noisy_moments_scale(model in model_strategy(7), q in 0.0f64..0.5) {
        let noisy = enumerate_noisy(&model, q).unwrap();
        let hidden = enumerate_hidden(&model).unwrap();
        let total: f64 = noisy.probs().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        let c = 1.0 - 2.0 * q;
        for subset in common::nonempty_subsets(model.vertex_count()) {
            let y = oracle_moment(&noisy, &subset).unwrap();
            if subset.len() % 2 == 1 {
                prop_assert!(y.abs() < 1e-12);
            } else {
                let x = oracle_moment(&hidden, &subset).unwrap();
                prop_assert!((y - c.powi(subset.len() as i32) * x).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn chow_liu_ignores_channel_scaling(model in model_strategy(20), q in 0.0f64..0.49) {
        let exact = CorrelationTable::from_distribution(&model);
        let noisy = CorrelationTable::exact_noisy(&model, &NoiseChannel::new(q).unwrap());
        prop_assert_eq!(chow_liu(&noisy).unwrap(), chow_liu(&exact).unwrap());
    }

    #[test]
    fn fused_sampler_matches_batch_path(model in model_strategy(12), n in 1usize..300, q in 0.0f64..0.49, seed in any::<u64>()) {
        let channel = NoiseChannel::new(q).unwrap();
        let hidden = sample_hidden(&model, n, seed).unwrap();
        let noisy = treeising::apply_channel(&hidden, &channel, seed ^ 1).unwrap();
        let direct = empirical_correlations(&noisy);
        let fused = sample_noisy_correlations(&model, &channel, n, seed, seed ^ 1).unwrap();
        prop_assert_eq!(direct, fused);
    }
}

#[test]
fn noisy_chain_does_not_factorize_over_any_tree() {
    // KL projection onto a fixed tree keeps the pair marginals on its edges;
    // a positive gap for all three trees on three vertices means no tree fits
    let model = IsingTreeModel::new(3, [(0, 1, 2.5), (1, 2, 2.5)]).unwrap();
    let noisy = enumerate_noisy(&model, 0.2).unwrap();
    let corr = |i, j| oracle_moment(&noisy, &[i, j]).unwrap();
    for tree in [[(0, 1), (1, 2)], [(0, 1), (0, 2)], [(0, 2), (1, 2)]] {
        let topo = TreeTopology::new(3, tree).unwrap();
        let mu = topo.edges().iter().map(|&(a, b)| corr(a, b)).collect();
        let projection = enumerate_hidden(&FittedTreeDistribution::new(topo, mu, 0.0).unwrap()).unwrap();
        assert!(oracle_tv(&noisy, &projection).unwrap() > 1e-3);
    }
    // the noiseless distribution factorizes over its own chain
    let clean = enumerate_hidden(&model).unwrap();
    let chain = FittedTreeDistribution::new(TreeTopology::chain(3).unwrap(), model.edge_mu().to_vec(), 0.0).unwrap();
    assert!(oracle_tv(&clean, &enumerate_hidden(&chain).unwrap()).unwrap() < 1e-15);
}

#[test]
fn sampler_frequencies_match_enumeration() {
    let mut r = rng(404);
    for p in [3, 6] {
        let model = random_model(&mut r, p, 0.2, 1.2);
        let batch = sample_hidden(&model, 1_000_000, 9 + p as u64).unwrap();
        let mut counts = vec![0.0; 1 << p];
        for row in batch.rows() {
            let s = row.iter().enumerate().fold(0, |acc, (v, &x)| acc | (usize::from(x < 0) << v));
            counts[s] += 1.0;
        }
        let n = batch.n() as f64;
        let empirical = oracle::PmfTable::new(p, counts.iter().map(|c| c / n).collect()).unwrap();
        let tv = oracle_tv(&empirical, &enumerate_hidden(&model).unwrap()).unwrap();
        assert!(tv <= 0.01, "p = {p}: tv = {tv}");
    }
}

#[test]
fn moment_estimate_from_large_sample() {
    let model = IsingTreeModel::new(4, [(0, 1, 0.9), (1, 2, -0.4), (2, 3, 0.7)]).unwrap();
    let q = 0.1;
    let corr = sample_noisy_correlations(&model, &NoiseChannel::new(q).unwrap(), 1_000_000, 71, 72).unwrap();
    let est = estimate_moment(model.topology(), &corr, q, &[0, 1, 2, 3]).unwrap();
    let exact = exact_moment(&model, &[0, 1, 2, 3]).unwrap();
    assert!((est - exact).abs() < 0.05, "{est} vs {exact}");
    // noiseless estimate on exact correlations is exact
    let clean = CorrelationTable::from_distribution(&model);
    assert!((estimate_moment(model.topology(), &clean, 0.0, &[0, 1, 2, 3]).unwrap() - exact).abs() < 1e-15);
}
