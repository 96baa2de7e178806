use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Undirected neighbourhood graph on nodes `0..n`.
///
/// Files use 1-based labels: the first token is `n`, then for each node
/// `i k j1 … jk`. Tokens may be split across lines freely.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    neighbors: Vec<Vec<usize>>,
}

impl Graph {
    /// Validates symmetry and the absence of self-loops; neighbor lists are sorted.
    pub fn new(mut neighbors: Vec<Vec<usize>>) -> Result<Self> {
        let n = neighbors.len();
        for (i, nb) in neighbors.iter_mut().enumerate() {
            nb.sort_unstable();
            if nb.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Graph(format!(
                    "node {} lists a neighbor twice",
                    i + 1
                )));
            }
            if let Some(&j) = nb.iter().find(|&&j| j >= n) {
                return Err(Error::Graph(format!(
                    "node {} has neighbor {} outside 1..={n}",
                    i + 1,
                    j + 1
                )));
            }
            if nb.contains(&i) {
                return Err(Error::Graph(format!(
                    "node {} lists itself as a neighbor",
                    i + 1
                )));
            }
        }
        for (i, nb) in neighbors.iter().enumerate() {
            for &j in nb {
                if neighbors[j].binary_search(&i).is_err() {
                    return Err(Error::Graph(format!(
                        "adjacency is not symmetric: {} lists {} but not vice versa",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(Self { neighbors })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut tokens = text.split_whitespace().map(|t| {
            t.parse::<usize>()
                .map_err(|_| Error::Graph(format!("expected a non-negative integer, found `{t}`")))
        });
        let mut next = |what: &str| -> Result<usize> {
            tokens
                .next()
                .unwrap_or_else(|| Err(Error::Graph(format!("file ended while reading {what}"))))
        };
        let n = next("the node count")?;
        let mut neighbors = vec![None; n];
        for _ in 0..n {
            let i = next("a node label")?;
            if i == 0 || i > n {
                return Err(Error::Graph(format!("node label {i} outside 1..={n}")));
            }
            let k = next("a neighbor count")?;
            let mut nb = Vec::with_capacity(k);
            for _ in 0..k {
                let j = next("a neighbor label")?;
                if j == 0 || j > n {
                    return Err(Error::Graph(format!(
                        "node {i} has neighbor {j} outside 1..={n}"
                    )));
                }
                nb.push(j - 1);
            }
            if neighbors[i - 1].replace(nb).is_some() {
                return Err(Error::Graph(format!("node {i} is listed twice")));
            }
        }
        if let Some(Ok(t)) = tokens.next() {
            return Err(Error::Graph(format!("unexpected trailing token `{t}`")));
        }
        Self::new(
            neighbors
                .into_iter()
                .map(Option::unwrap_or_default)
                .collect(),
        )
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Graph(m) => Error::Graph(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// The file representation accepted by [`Graph::parse`].
    pub fn to_file_string(&self) -> String {
        let mut s = format!("{}\n", self.n());
        for (i, nb) in self.neighbors.iter().enumerate() {
            let _ = write!(s, "{} {}", i + 1, nb.len());
            for j in nb {
                let _ = write!(s, " {}", j + 1);
            }
            s.push('\n');
        }
        s
    }

    pub fn n(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    /// Number of undirected edges.
    pub fn n_edges(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Connected components, each sorted, ordered by smallest node.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for s in 0..n {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            let mut comp = vec![s];
            let mut stack = vec![s];
            while let Some(i) = stack.pop() {
                for &j in &self.neighbors[i] {
                    if !seen[j] {
                        seen[j] = true;
                        comp.push(j);
                        stack.push(j);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_of_three() {
        let g = Graph::parse("3\n1 1 2\n2 2 1 3\n3 1 2\n").unwrap();
        assert_eq!(g.neighbors(0), &[1]);
        assert_eq!(g.neighbors(1), &[0, 2]);
        assert_eq!(g.neighbors(2), &[1]);
        assert_eq!(g.n_edges(), 2);
        assert_eq!(Graph::parse(&g.to_file_string()).unwrap(), g);
    }

    #[test]
    fn rejects_bad_graphs() {
        assert!(Graph::parse("2\n1 1 1\n2 0\n").is_err());
        assert!(Graph::parse("2\n1 1 2\n2 0\n").is_err());
        assert!(Graph::parse("2\n1 1 3\n2 0\n").is_err());
        assert!(Graph::parse("2\n1 0\n").is_err());
    }

    #[test]
    fn isolated_nodes_are_their_own_components() {
        let g = Graph::parse("3 1 0 2 1 3 3 1 2").unwrap();
        assert_eq!(g.components(), vec![vec![0], vec![1, 2]]);
    }
}
