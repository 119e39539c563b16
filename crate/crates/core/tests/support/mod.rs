//! Reference implementations used as oracles by the integration tests. They
//! share no code with the library beyond its data types.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relloc::relgraph::{Edge, RelGraph};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Exact rank of an integer matrix by fraction-free (Bareiss) elimination.
pub fn exact_rank(rows: &[Vec<i64>]) -> usize {
    let mut m: Vec<Vec<i128>> = rows.iter().map(|r| r.iter().map(|&v| v as i128).collect()).collect();
    let nrows = m.len();
    let ncols = m.first().map_or(0, Vec::len);
    let mut rank = 0;
    let mut prev: i128 = 1;
    for col in 0..ncols {
        let Some(p) = (rank..nrows).find(|&r| m[r][col] != 0) else {
            continue;
        };
        m.swap(rank, p);
        for r in rank + 1..nrows {
            for c in col + 1..ncols {
                m[r][c] = (m[rank][col] * m[r][c] - m[r][col] * m[rank][c]) / prev;
            }
            m[r][col] = 0;
        }
        prev = m[rank][col];
        rank += 1;
        if rank == nrows {
            break;
        }
    }
    rank
}

/// Signed incidence rows: +1 at the lower endpoint, −1 at the higher.
pub fn oriented_incidence_rows(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<i64>> {
    edges
        .iter()
        .map(|&(i, j)| {
            let mut row = vec![0i64; n];
            row[i.min(j)] = 1;
            row[i.max(j)] = -1;
            row
        })
        .collect()
}

/// Connected components by breadth-first search over an adjacency list.
pub fn bfs_components(n: usize, edges: &[(usize, usize)]) -> usize {
    let mut adj = vec![Vec::new(); n];
    for &(i, j) in edges {
        adj[i].push(j);
        adj[j].push(i);
    }
    let mut seen = vec![false; n];
    let mut count = 0;
    for s in 0..n {
        if seen[s] {
            continue;
        }
        count += 1;
        let mut queue = std::collections::VecDeque::from([s]);
        seen[s] = true;
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
    }
    count
}

/// Random simple graph: each pair present with probability `p`.
pub fn random_edges<R: Rng>(n: usize, p: f64, rng: &mut R) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p) {
                edges.push((i, j));
            }
        }
    }
    edges
}

/// Every simple graph on `n` labelled nodes.
pub fn all_graphs(n: usize) -> Vec<Vec<(usize, usize)>> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    (0u64..1 << pairs.len())
        .map(|mask| {
            pairs
                .iter()
                .enumerate()
                .filter(|(b, _)| mask >> b & 1 == 1)
                .map(|(_, &e)| e)
                .collect()
        })
        .collect()
}

pub fn with_weights<R: Rng>(n: usize, edges: &[(usize, usize)], rng: &mut R) -> RelGraph {
    RelGraph::new(
        n,
        edges.iter().map(|&(i, j)| Edge {
            i,
            j,
            w: rng.random_range(0.1..50.0),
        }),
    )
    .expect("generated graphs are simple")
}

/// Central finite difference of `f` at `x` along coordinate `k`.
pub fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], k: usize, h: f64) -> f64 {
    let mut a = x.to_vec();
    let mut b = x.to_vec();
    a[k] += h;
    b[k] -= h;
    (f(&a) - f(&b)) / (2.0 * h)
}

/// Whether `analytic` matches `numeric` to `tol` relative (absolute below 1).
pub fn close_relative(analytic: f64, numeric: f64, tol: f64) -> bool {
    (analytic - numeric).abs() <= tol * analytic.abs().max(numeric.abs()).max(1.0)
}

/// Count of eigenvalues of a symmetric matrix above `tol`.
pub fn eigen_rank(m: &nalgebra::DMatrix<f64>, tol: f64) -> usize {
    m.clone().symmetric_eigen().eigenvalues.iter().filter(|v| v.abs() > tol).count()
}
