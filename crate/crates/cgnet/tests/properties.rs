//! Property tests for cross-cutting invariants of the graph and
//! signal machinery.

use cgnet::coarsen::{graclus_coarsen, perm_data};
use cgnet::data::split;
use cgnet::dsp::band_entropy;
use cgnet::graph::{
    cheb_basis, merge_bands, normalized_laplacian, rand_graph, scale_laplacian, sparsify_topk,
    spectral_filter_oracle, WeightedGraph,
};
use cgnet::linalg::symmetric_eigen;
use cgnet::nn::{graph_maxpool2, relu, softmax_cross_entropy};
use ndarray::{Array1, Array2};
use proptest::prelude::*;

fn arb_graph() -> impl Strategy<Value = WeightedGraph> {
    (2usize..20, 0.05f64..0.95, 0u64..1000).prop_map(|(n, p, seed)| {
        let base = rand_graph(n, p, seed).unwrap();
        let edges: Vec<(usize, usize, f64)> = base
            .edges()
            .iter()
            .enumerate()
            .map(|(k, &(i, j, _))| (i, j, 0.1 + ((seed as usize + k * 7) % 50) as f64 * 0.1))
            .collect();
        WeightedGraph::from_edges(n, edges).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sparsify_keeps_symmetry_weights_and_degrees(g in arb_graph(), k in 1usize..6) {
        let s = sparsify_topk(&g, k).unwrap();
        let orig: std::collections::HashMap<(usize, usize), f64> =
            g.edges().iter().map(|&(i, j, w)| ((i, j), w)).collect();
        let d_orig: Vec<usize> = g.adjacency().iter().map(|a| a.len()).collect();
        let d_new: Vec<usize> = s.adjacency().iter().map(|a| a.len()).collect();
        for v in 0..g.n() {
            prop_assert!(d_new[v] <= d_orig[v]);
            if d_orig[v] > 0 {
                prop_assert!(d_new[v] >= 1);
            }
        }
        for &(i, j, w) in s.edges() {
            prop_assert_eq!(orig[&(i, j)], w);
        }
    }

    #[test]
    fn laplacian_spectrum_and_scaling(g in arb_graph()) {
        let l = normalized_laplacian(&g);
        let (vals, _) = symmetric_eigen(&l.matrix.to_dense().view());
        for &v in vals.iter() {
            prop_assert!((-1e-9..=2.0 + 1e-9).contains(&v), "eigenvalue {}", v);
        }
        let ls = scale_laplacian(&l);
        let (svals, _) = symmetric_eigen(&ls.to_dense().view());
        for &v in svals.iter() {
            prop_assert!((-1.0 - 1e-9..=1.0 + 1e-6).contains(&v), "scaled eigenvalue {}", v);
        }
    }

    #[test]
    fn chebyshev_matches_oracle(g in arb_graph(), m in 1usize..16, seed in 0u64..500) {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let l = normalized_laplacian(&g);
        let ls = scale_laplacian(&l);
        let theta: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x: Vec<f64> = (0..g.n()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let oracle = spectral_filter_oracle(&l, &theta, &x).unwrap();
        let xm = Array2::from_shape_vec((g.n(), 1), x).unwrap();
        let basis = cheb_basis(&ls, &xm, m).unwrap();
        let mut fast = vec![0.0; g.n()];
        for (c, t) in theta.iter().zip(&basis) {
            for (f, row) in fast.iter_mut().zip(t.column(0)) {
                *f += c * row;
            }
        }
        let norm: f64 = oracle.iter().map(|v| v * v).sum::<f64>().sqrt();
        let err: f64 = oracle.iter().zip(&fast).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        prop_assert!(err <= 1e-10 * norm.max(1e-12), "relative error {}", err / norm.max(1e-300));
    }

    #[test]
    fn merge_without_interband_is_block_diagonal(seed in 0u64..200) {
        let graphs: Vec<WeightedGraph> =
            (0..8).map(|b| rand_graph(16, 0.4, seed + b).unwrap()).collect();
        let merged = merge_bands(&graphs, false).unwrap();
        for &(i, j, _) in merged.edges() {
            prop_assert_eq!(i / 16, j / 16);
        }
        prop_assert!(merged.num_components() >= 8);
    }

    #[test]
    fn coarsening_determinism_and_perm_inverse(g in arb_graph(), seed in 0u64..100) {
        let a = graclus_coarsen(&g, 2, seed).unwrap();
        let b = graclus_coarsen(&g, 2, seed).unwrap();
        prop_assert_eq!(a.perm(), b.perm());
        // a permutation applied through perm_data then gathered back by its
        // inverse reproduces the original rows
        let x = Array2::from_shape_fn((g.n(), 2), |(i, c)| (i * 2 + c) as f64);
        let padded = perm_data(&x, a.perm(), a.padded_sizes()[0]).unwrap();
        let mut back = Array2::zeros((g.n(), 2));
        for (slot, &src) in a.perm().iter().enumerate() {
            if src < g.n() {
                back.row_mut(src).assign(&padded.row(slot));
            }
        }
        prop_assert_eq!(back, x);
    }

    #[test]
    fn entropy_bounds(values in proptest::collection::vec(-1e3f64..1e3, 1..200), bins in 2usize..32) {
        let h = band_entropy(&values, bins).unwrap();
        prop_assert!(h >= 0.0);
        prop_assert!(h <= (bins as f64).ln() + 1e-12);
    }

    #[test]
    fn softmax_gradient_sums_to_zero(logits in proptest::collection::vec(-30.0f64..30.0, 2..40)) {
        let label = logits.len() / 2;
        let arr = Array1::from(logits);
        let (loss, grad) = softmax_cross_entropy(&arr, label).unwrap();
        prop_assert!(loss >= 0.0);
        prop_assert!(grad.sum().abs() < 1e-12);
    }

    #[test]
    fn pool_neutrality_after_relu(values in proptest::collection::vec(-5.0f64..5.0, 4..40)) {
        // zero-valued fakes never win against a non-negative real partner
        let n = values.len() / 2 * 2;
        let x = Array2::from_shape_vec((n / 2, 2), values[..n].to_vec()).unwrap();
        let activated = relu(&x);
        // interleave real rows with zero fake rows
        let mut padded = Array2::zeros((n, 2));
        for i in 0..n / 2 {
            padded.row_mut(2 * i).assign(&activated.row(i));
        }
        let (pooled, _) = graph_maxpool2(&padded).unwrap();
        prop_assert_eq!(pooled, activated);
    }

    #[test]
    fn split_partitions(labels in proptest::collection::vec(0usize..5, 2..300), seed in 0u64..50) {
        let s = split(&labels, 0.8, seed).unwrap();
        let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
        let want = 0.8 * labels.len() as f64;
        prop_assert!((s.train.len() as f64 - want).abs() <= 1.0 + 1e-9);
    }
}
