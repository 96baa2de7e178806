use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use super::SparseSym;

/// Minimum-degree fill-reducing ordering on the graph of `q`.
///
/// Returns `perm` with `perm[k]` = original index eliminated at step `k`.
/// Ties are broken by the smallest original index, so the ordering is
/// deterministic. Nodes are eliminated on an explicit elimination graph; this
/// is adequate for the matrix sizes this crate targets (up to ~10⁴).
pub fn minimum_degree(q: &SparseSym) -> Vec<usize> {
    let n = q.n();
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for (i, j, _) in q.iter() {
        if i != j {
            adj[i].insert(j);
            adj[j].insert(i);
        }
    }

    let mut eliminated = vec![false; n];
    let mut heap: BinaryHeap<Reverse<(usize, usize)>> =
        (0..n).map(|v| Reverse((adj[v].len(), v))).collect();
    let mut perm = Vec::with_capacity(n);

    while let Some(Reverse((deg, v))) = heap.pop() {
        if eliminated[v] || deg != adj[v].len() {
            continue;
        }
        eliminated[v] = true;
        perm.push(v);
        let nbrs: Vec<usize> = std::mem::take(&mut adj[v]).into_iter().collect();
        for &a in &nbrs {
            adj[a].remove(&v);
        }
        for (k, &a) in nbrs.iter().enumerate() {
            for &b in &nbrs[k + 1..] {
                adj[a].insert(b);
                adj[b].insert(a);
            }
        }
        for &a in &nbrs {
            heap.push(Reverse((adj[a].len(), a)));
        }
    }
    perm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering_is_a_permutation() {
        let mut t = vec![];
        for i in 0..10 {
            t.push((i, i, 4.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            t.push((i, 0, -0.1));
        }
        let q = SparseSym::from_triplets(10, &t).unwrap();
        let mut p = minimum_degree(&q);
        assert_eq!(p.len(), 10);
        p.sort();
        assert_eq!(p, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn arrow_matrix_keeps_hub_last() {
        let n = 6;
        let mut t = vec![(0, 0, 10.0)];
        for i in 1..n {
            t.push((i, i, 2.0));
            t.push((i, 0, 1.0));
        }
        let q = SparseSym::from_triplets(n, &t).unwrap();
        let p = minimum_degree(&q);
        assert!(p[n - 2..].contains(&0));
        // no fill
        let s = crate::sparse::Symbolic::with_ordering(&q, p);
        assert_eq!(s.nnz_l(), q.nnz());
    }
}
