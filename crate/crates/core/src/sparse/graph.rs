//! Queries on the directed graph G(M): an edge i -> j for every stored
//! off-diagonal entry m_ij.

use std::collections::HashSet;

use super::SparseMatrix;

/// Indices `j` with `targets[j]` that are reachable from `i` by a directed
/// path of at most `z` edges. `i` itself is never included. Sorted.
pub fn neighborhood(m: &SparseMatrix, i: usize, z: usize, targets: &[bool]) -> Vec<usize> {
    let mut seen = HashSet::new();
    seen.insert(i);
    let mut frontier = vec![i];
    let mut found = Vec::new();
    for _ in 0..z {
        let mut next = Vec::new();
        for &u in &frontier {
            let (cols, _) = m.row(u);
            for &v in cols {
                if v != u && seen.insert(v) {
                    if targets[v] {
                        found.push(v);
                    }
                    next.push(v);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    found.sort_unstable();
    found
}

/// Pattern of `M + M^t` with unit values and no diagonal.
pub fn symmetrized_pattern(m: &SparseMatrix) -> SparseMatrix {
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); m.nrows()];
    for (i, j, _) in m.triplets() {
        if i != j {
            rows[i].push(j);
            rows[j].push(i);
        }
    }
    let rows = rows
        .into_iter()
        .map(|mut r| {
            r.sort_unstable();
            r.dedup();
            r.into_iter().map(|j| (j, 1.0)).collect()
        })
        .collect();
    SparseMatrix::from_sorted_rows(m.nrows(), m.ncols(), rows)
}

/// Number of strongly connected components of G(M) (Tarjan, iterative).
pub fn strong_components(m: &SparseMatrix) -> usize {
    let n = m.nrows();
    const UNSEEN: usize = usize::MAX;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut next_index = 0;
    let mut count = 0;
    // (vertex, position in its adjacency list)
    let mut call: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        call.push((root, 0));
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            let (cols, _) = m.row(v);
            if *pos < cols.len() {
                let w = cols[*pos];
                *pos += 1;
                if w == v {
                    continue;
                }
                if index[w] == UNSEEN {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    count += 1;
                    while let Some(w) = stack.pop() {
                        on_stack[w] = false;
                        if w == v {
                            break;
                        }
                    }
                }
            }
        }
    }
    count
}
