use nalgebra::DMatrix;

use super::{GridCase, LineId};
use crate::error::{Error, Result};

/// Incidence structures of a case, all indexed by bus row.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceMatrices {
    /// Bus-line incidence, N x L: +1 at the from-bus, -1 at the to-bus.
    pub w: DMatrix<f64>,
    /// Bus-load incidence, N x ND.
    pub v: DMatrix<f64>,
    /// Bus-generator incidence, N x NG.
    pub u: DMatrix<f64>,
}

pub fn build_incidence(case: &GridCase) -> IncidenceMatrices {
    let n = case.n_buses();
    let mut w = DMatrix::zeros(n, case.n_lines());
    for (l, line) in case.lines().iter().enumerate() {
        w[(case.bus_index[&line.from], l)] = 1.0;
        w[(case.bus_index[&line.to], l)] = -1.0;
    }
    let mut v = DMatrix::zeros(n, case.loads().len());
    for (d, load) in case.loads().iter().enumerate() {
        v[(case.bus_index[&load.bus], d)] = 1.0;
    }
    let mut u = DMatrix::zeros(n, case.gens().len());
    for (g, gen) in case.gens().iter().enumerate() {
        u[(case.bus_index[&gen.bus], g)] = 1.0;
    }
    IncidenceMatrices { w, v, u }
}

/// Whether the in-service network stays connected with `skip` removed.
pub fn is_connected_without(case: &GridCase, skip: Option<LineId>) -> bool {
    let n = case.n_buses();
    let adj = adjacency(case);
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut count = 1;
    while let Some(b) = stack.pop() {
        for &(nb, l) in &adj[b] {
            if Some(LineId(l)) == skip || seen[nb] {
                continue;
            }
            seen[nb] = true;
            count += 1;
            stack.push(nb);
        }
    }
    count == n
}

fn adjacency(case: &GridCase) -> Vec<Vec<(usize, usize)>> {
    let mut adj = vec![Vec::new(); case.n_buses()];
    for (l, line) in case.lines().iter().enumerate() {
        if !line.in_service {
            continue;
        }
        let (i, j) = (case.bus_index[&line.from], case.bus_index[&line.to]);
        adj[i].push((j, l));
        adj[j].push((i, l));
    }
    adj
}

/// All in-service bridge lines (Tarjan low-link over the multigraph; parallel
/// lines are never bridges).
pub fn bridge_lines(case: &GridCase) -> Vec<LineId> {
    let n = case.n_buses();
    let adj = adjacency(case);
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut bridges = Vec::new();
    let mut timer = 0;

    // iterative DFS: (node, parent edge, next neighbour position)
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        let mut stack: Vec<(usize, Option<usize>, usize)> = vec![(root, None, 0)];
        disc[root] = timer;
        low[root] = timer;
        timer += 1;
        while let Some(&mut (node, parent_edge, ref mut pos)) = stack.last_mut() {
            if *pos < adj[node].len() {
                let (nb, edge) = adj[node][*pos];
                *pos += 1;
                if Some(edge) == parent_edge {
                    continue;
                }
                if disc[nb] == usize::MAX {
                    disc[nb] = timer;
                    low[nb] = timer;
                    timer += 1;
                    stack.push((nb, Some(edge), 0));
                } else {
                    low[node] = low[node].min(disc[nb]);
                }
            } else {
                stack.pop();
                if let Some(&(parent, _, _)) = stack.last() {
                    low[parent] = low[parent].min(low[node]);
                    if low[node] > disc[parent] {
                        bridges.push(LineId(parent_edge.expect("non-root has a parent edge")));
                    }
                }
            }
        }
    }
    bridges.sort();
    bridges
}

/// True iff removing in-service line `k` disconnects the network.
pub fn is_islanding_line(case: &GridCase, k: LineId) -> Result<bool> {
    let line = case.line(k)?;
    if !line.in_service {
        return Err(Error::LineOutOfService { line: k });
    }
    Ok(bridge_lines(case).contains(&k))
}
