use std::collections::VecDeque;

use crate::{Error, Result};

fn bfs(adjacency: &[Vec<usize>], source: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; adjacency.len()];
    dist[source] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].unwrap_or(0);
        for &v in &adjacency[u] {
            if dist[v].is_none() {
                dist[v] = Some(du + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

fn reverse(adjacency: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut rev = vec![Vec::new(); adjacency.len()];
    for (u, succ) in adjacency.iter().enumerate() {
        for &v in succ {
            rev[v].push(u);
        }
    }
    rev
}

/// Hop distance from `source` to every node, `None` where unreachable.
pub fn hop_distances(adjacency: &[Vec<usize>], source: usize) -> Vec<Option<usize>> {
    bfs(adjacency, source)
}

/// Every minimum-hop path from `s` to `g` over a directed adjacency list, in
/// lexicographic order of node ids, truncated to `cap` paths.
pub fn shortest_paths(adjacency: &[Vec<usize>], s: usize, g: usize, cap: usize) -> Result<Vec<Vec<usize>>> {
    let n = adjacency.len();
    if s >= n || g >= n {
        return Err(Error::NoPath { from: s, to: g });
    }
    let forward = bfs(adjacency, s);
    let Some(total) = forward[g] else {
        return Err(Error::NoPath { from: s, to: g });
    };
    let backward = bfs(&reverse(adjacency), g);
    let on_path = |v: usize, depth: usize| forward[v] == Some(depth) && backward[v] == Some(total - depth);

    let mut sorted: Vec<Vec<usize>> = adjacency.to_vec();
    for succ in &mut sorted {
        succ.sort_unstable();
        succ.dedup();
    }

    let mut paths = Vec::new();
    let mut path = vec![s];
    // Each frame holds the next successor index to try at that depth.
    let mut stack = vec![0usize];
    while let Some(next) = stack.last_mut() {
        if paths.len() >= cap {
            break;
        }
        let depth = path.len() - 1;
        let u = path[depth];
        if depth == total {
            paths.push(path.clone());
            stack.pop();
            path.pop();
            continue;
        }
        match sorted[u][*next..].iter().position(|&v| on_path(v, depth + 1)) {
            Some(offset) => {
                let v = sorted[u][*next + offset];
                *next += offset + 1;
                path.push(v);
                stack.push(0);
            }
            None => {
                stack.pop();
                path.pop();
            }
        }
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn undirected(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    #[test]
    fn same_node_is_one_empty_path() {
        let adj = undirected(2, &[(0, 1)]);
        assert_eq!(shortest_paths(&adj, 1, 1, 64).unwrap(), vec![vec![1]]);
    }

    #[test]
    fn square_has_two_paths() {
        let adj = undirected(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]);
        assert_eq!(shortest_paths(&adj, 0, 2, 64).unwrap(), vec![vec![0, 1, 2], vec![0, 3, 2]]);
        assert_eq!(shortest_paths(&adj, 0, 2, 1).unwrap(), vec![vec![0, 1, 2]]);
    }

    #[test]
    fn unreachable() {
        let adj = vec![vec![1], vec![], vec![]];
        assert!(matches!(shortest_paths(&adj, 0, 2, 64), Err(Error::NoPath { from: 0, to: 2 })));
        assert!(matches!(shortest_paths(&adj, 1, 0, 64), Err(Error::NoPath { .. })));
    }

    #[test]
    fn grid_path_count_is_binomial() {
        // 3x3 lattice directed right/down: C(4, 2) = 6 monotone paths.
        let idx = |r: usize, c: usize| r * 3 + c;
        let mut adj = vec![Vec::new(); 9];
        for r in 0..3 {
            for c in 0..3 {
                if c + 1 < 3 {
                    adj[idx(r, c)].push(idx(r, c + 1));
                }
                if r + 1 < 3 {
                    adj[idx(r, c)].push(idx(r + 1, c));
                }
            }
        }
        let paths = shortest_paths(&adj, 0, 8, 64).unwrap();
        assert_eq!(paths.len(), 6);
        let mut sorted = paths.clone();
        sorted.sort();
        assert_eq!(sorted, paths);
    }
}
