mod support;

use rand::Rng;
use relloc::relgraph::{component_count, graph_rank, observability_check, spectral_matrix, Edge, RelGraph};
use support::*;

fn unit_graph(n: usize, edges: &[(usize, usize)]) -> RelGraph {
    RelGraph::new(n, edges.iter().map(|&(i, j)| Edge { i, j, w: 1.0 })).unwrap()
}

#[test]
fn incidence_rank_equals_nodes_minus_components() {
    let mut rng = rng(11);
    for case in 0..200 {
        let n = rng.random_range(1..=10);
        let p = rng.random_range(0.0..0.7);
        let edges = random_edges(n, p, &mut rng);
        let g = unit_graph(n, &edges);
        let lambda = bfs_components(n, &edges);
        assert_eq!(component_count(&g), lambda, "case {case}");
        assert_eq!(exact_rank(&oriented_incidence_rows(n, &edges)), n - lambda, "case {case}");
        assert_eq!(graph_rank(&g), n - lambda, "case {case}: edges {edges:?}");
    }
}

fn corpus() -> Vec<(usize, Vec<(usize, usize)>)> {
    let mut out: Vec<(usize, Vec<(usize, usize)>)> = Vec::new();
    for n in 1..=4 {
        out.extend(all_graphs(n).into_iter().map(|e| (n, e)));
    }
    let mut rng = rng(12);
    for _ in 0..450 {
        let n = rng.random_range(5..=6);
        let p = rng.random_range(0.15..0.8);
        out.push((n, random_edges(n, p, &mut rng)));
    }
    out
}

#[test]
fn observability_matches_connectivity() {
    let graphs = corpus();
    assert!(graphs.len() >= 500);
    let mut rng = rng(13);
    for (n, edges) in &graphs {
        let g = with_weights(*n, edges, &mut rng);
        let connected = bfs_components(*n, edges) == 1;
        for d in [3usize, 4] {
            let r = observability_check(&g, d).unwrap();
            assert_eq!(r.observable, connected && *n >= 2, "n={n} d={d} edges={edges:?}");
            let c = spectral_matrix(&g, d);
            assert_eq!(r.spectral_rank, eigen_rank(&c, 1e-8), "n={n} edges={edges:?}");
            assert_eq!(r.spectral_rank, d * (n - bfs_components(*n, edges)));
            if connected && *n >= 2 {
                assert_eq!(r.spectral_rank, d * (n - 1));
            }
        }
    }
}

#[test]
fn spectral_matrix_is_laplacian_kronecker_identity() {
    let mut rng = rng(14);
    for _ in 0..50 {
        let n = rng.random_range(2..=6);
        let edges = random_edges(n, 0.5, &mut rng);
        let g = with_weights(n, &edges, &mut rng);
        let c = spectral_matrix(&g, 3);
        // Oracle Laplacian assembled entry by entry.
        let mut l = nalgebra::DMatrix::<f64>::zeros(n, n);
        for e in g.edges() {
            l[(e.i, e.j)] -= e.w;
            l[(e.j, e.i)] -= e.w;
            l[(e.i, e.i)] += e.w;
            l[(e.j, e.j)] += e.w;
        }
        for a in 0..n {
            for b in 0..n {
                for r in 0..3 {
                    for s in 0..3 {
                        let expect = if r == s { l[(a, b)] } else { 0.0 };
                        assert!((c[(3 * a + r, 3 * b + s)] - expect).abs() < 1e-9);
                    }
                }
            }
        }
    }
}
