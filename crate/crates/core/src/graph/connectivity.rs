use std::collections::{BTreeSet, VecDeque};

use super::{GraphError, NodeId, Path, Topology};

/// Unit-capacity flow network obtained by splitting every vertex into an
/// in/out pair. Vertex `x` becomes `2x` (in) and `2x + 1` (out).
struct SplitNetwork {
    head: Vec<usize>,
    cap: Vec<i32>,
    adj: Vec<Vec<usize>>,
}

impl SplitNetwork {
    fn new(g: &Topology, s: NodeId, t: NodeId) -> Self {
        let mut net = SplitNetwork {
            head: Vec::new(),
            cap: Vec::new(),
            adj: vec![Vec::new(); 2 * g.n()],
        };
        let big = g.n() as i32 + 1;
        for x in g.nodes() {
            let c = if x == s || x == t { big } else { 1 };
            net.arc(2 * x.index(), 2 * x.index() + 1, c);
        }
        for &(a, b) in g.edges() {
            net.arc(2 * a.index() + 1, 2 * b.index(), 1);
            net.arc(2 * b.index() + 1, 2 * a.index(), 1);
        }
        // Adjacency in NodeId order keeps augmentation deterministic.
        for list in &mut net.adj {
            list.sort_by_key(|&e| net.head[e]);
        }
        net
    }

    fn arc(&mut self, from: usize, to: usize, c: i32) {
        self.adj[from].push(self.head.len());
        self.head.push(to);
        self.cap.push(c);
        self.adj[to].push(self.head.len());
        self.head.push(from);
        self.cap.push(0);
    }

    /// Edmonds-Karp; returns the flow value, stopping early at `limit`.
    fn max_flow(&mut self, source: usize, sink: usize, limit: usize) -> usize {
        let mut flow = 0;
        let mut pred = vec![usize::MAX; self.adj.len()];
        while flow < limit {
            pred.iter_mut().for_each(|p| *p = usize::MAX);
            let mut queue = VecDeque::from([source]);
            let mut reached = false;
            while let Some(x) = queue.pop_front() {
                for &e in &self.adj[x] {
                    let y = self.head[e];
                    if self.cap[e] > 0 && y != source && pred[y] == usize::MAX {
                        pred[y] = e;
                        if y == sink {
                            reached = true;
                            break;
                        }
                        queue.push_back(y);
                    }
                }
                if reached {
                    break;
                }
            }
            if !reached {
                break;
            }
            let mut y = sink;
            while y != source {
                let e = pred[y];
                self.cap[e] -= 1;
                self.cap[e ^ 1] += 1;
                y = self.head[e ^ 1];
            }
            flow += 1;
        }
        flow
    }

    /// Arcs `e` (forward arcs have even index) carrying one unit of flow.
    fn used(&self, e: usize) -> bool {
        e % 2 == 0 && self.cap[e ^ 1] > 0
    }
}

fn check_pair(g: &Topology, u: NodeId, v: NodeId) -> Result<(), GraphError> {
    for w in [u, v] {
        if !g.contains(w) {
            return Err(GraphError::OutOfRange { node: w, n: g.n() });
        }
    }
    if u == v {
        return Err(GraphError::SameEndpoints(u));
    }
    Ok(())
}

/// Maximum number of internally disjoint `u`–`v` paths (the direct edge, if
/// any, counts as one path).
pub fn local_connectivity(g: &Topology, u: NodeId, v: NodeId) -> Result<usize, GraphError> {
    check_pair(g, u, v)?;
    let mut net = SplitNetwork::new(g, u, v);
    Ok(net.max_flow(2 * u.index() + 1, 2 * v.index(), g.n()))
}

/// Largest `k` such that removing any `k - 1` vertices leaves the graph
/// connected; `n - 1` for complete graphs and `0` when disconnected.
pub fn vertex_connectivity(g: &Topology) -> usize {
    connectivity_search(g).0
}

/// Vertex connectivity together with a pair attaining it and a maximum set of
/// disjoint paths between that pair. `None` for graphs with fewer than two nodes.
pub fn connectivity_witness(g: &Topology) -> Option<(usize, NodeId, NodeId, Vec<Path>)> {
    let (k, pair) = connectivity_search(g);
    let (u, v) = pair?;
    let (_, paths) = max_disjoint_paths(g, u, v).ok()?;
    Some((k, u, v, paths))
}

fn connectivity_search(g: &Topology) -> (usize, Option<(NodeId, NodeId)>) {
    let n = g.n();
    if n < 2 {
        return (0, None);
    }
    if !g.is_connected() {
        let other = (1..n)
            .map(NodeId::from)
            .find(|&v| {
                let mut seen = BTreeSet::from([NodeId(0)]);
                let mut stack = vec![NodeId(0)];
                while let Some(x) = stack.pop() {
                    for &y in g.neighbors(x) {
                        if seen.insert(y) {
                            stack.push(y);
                        }
                    }
                }
                !seen.contains(&v)
            })
            .expect("disconnected graph has an unreachable node");
        return (0, Some((NodeId(0), other)));
    }
    let mut best = n - 1;
    let mut pair = Some((NodeId(0), NodeId(1)));
    // Any minimum cut misses one of the first best+1 vertices; that vertex is
    // separated from some later, non-adjacent vertex.
    let mut i = 0;
    while i <= best && i < n {
        let u = NodeId::from(i);
        for j in i + 1..n {
            let v = NodeId::from(j);
            if g.has_edge(u, v) {
                continue;
            }
            let mut net = SplitNetwork::new(g, u, v);
            let k = net.max_flow(2 * i + 1, 2 * j, best);
            if k < best {
                best = k;
                pair = Some((u, v));
            }
        }
        i += 1;
    }
    (best, pair)
}

/// A maximum set of internally disjoint `u`–`v` paths, sorted lexicographically.
pub fn max_disjoint_paths(
    g: &Topology,
    u: NodeId,
    v: NodeId,
) -> Result<(usize, Vec<Path>), GraphError> {
    check_pair(g, u, v)?;
    let mut net = SplitNetwork::new(g, u, v);
    let source = 2 * u.index() + 1;
    let sink = 2 * v.index();
    let count = net.max_flow(source, sink, g.n());
    let mut taken = vec![false; net.head.len()];
    let mut paths = Vec::with_capacity(count);
    for _ in 0..count {
        let mut nodes = vec![u];
        let mut x = source;
        while x != sink {
            let e = *net.adj[x]
                .iter()
                .find(|&&e| net.used(e) && !taken[e])
                .expect("flow conservation");
            taken[e] = true;
            let y = net.head[e];
            if y % 2 == 0 {
                nodes.push(NodeId::from(y / 2));
            }
            // Step through the internal in->out arc of the entered vertex.
            x = if y == sink { sink } else { y + 1 };
            if y != sink {
                let internal = net.adj[y]
                    .iter()
                    .copied()
                    .find(|&e| net.head[e] == y + 1 && e % 2 == 0)
                    .expect("split arc");
                taken[internal] = true;
            }
        }
        paths.push(Path(nodes));
    }
    paths.sort();
    Ok((count, paths))
}

/// True iff no node other than the shared endpoints occurs in two paths.
pub fn are_internally_disjoint(paths: &[Path]) -> Result<bool, GraphError> {
    let mut ends: Option<(NodeId, NodeId)> = None;
    for p in paths {
        let (a, b) = p.endpoints().ok_or(GraphError::DegeneratePath)?;
        if p.nodes().len() < 2 {
            return Err(GraphError::DegeneratePath);
        }
        let key = if a < b { (a, b) } else { (b, a) };
        match ends {
            None => ends = Some(key),
            Some(e) if e != key => return Err(GraphError::MismatchedEndpoints),
            _ => {}
        }
    }
    let mut seen = BTreeSet::new();
    for p in paths {
        for &x in p.internal() {
            if !seen.insert(x) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &[u32]) -> Path {
        Path(v.iter().map(|&i| NodeId(i)).collect())
    }

    fn cycle(n: usize) -> Topology {
        Topology::new(n, (0..n).map(|i| (NodeId::from(i), NodeId::from((i + 1) % n)))).unwrap()
    }

    fn wheel(n: usize) -> Topology {
        let rim = n - 1;
        let mut e: Vec<_> = (1..n).map(|i| (NodeId(0), NodeId::from(i))).collect();
        e.extend((0..rim).map(|i| (NodeId::from(1 + i), NodeId::from(1 + (i + 1) % rim))));
        Topology::new(n, e).unwrap()
    }

    #[test]
    fn connectivity_of_small_families() {
        assert_eq!(vertex_connectivity(&Topology::complete(4)), 3);
        assert_eq!(vertex_connectivity(&cycle(5)), 2);
        assert_eq!(vertex_connectivity(&wheel(6)), 3);
        assert_eq!(vertex_connectivity(&Topology::complete(1)), 0);
        let split = Topology::new(4, [(NodeId(0), NodeId(1)), (NodeId(2), NodeId(3))]).unwrap();
        assert_eq!(vertex_connectivity(&split), 0);
    }

    #[test]
    fn disjoint_paths_examples() {
        let (k, paths) = max_disjoint_paths(&cycle(5), NodeId(0), NodeId(2)).unwrap();
        assert_eq!(k, 2);
        assert_eq!(paths, vec![ids(&[0, 1, 2]), ids(&[0, 4, 3, 2])]);
        let (k, paths) = max_disjoint_paths(&Topology::complete(4), NodeId(0), NodeId(1)).unwrap();
        assert_eq!(k, 3);
        assert_eq!(paths, vec![ids(&[0, 1]), ids(&[0, 2, 1]), ids(&[0, 3, 1])]);
        let (k, _) = max_disjoint_paths(&wheel(6), NodeId(1), NodeId(3)).unwrap();
        assert_eq!(k, 3);
        assert_eq!(
            max_disjoint_paths(&cycle(5), NodeId(1), NodeId(1)),
            Err(GraphError::SameEndpoints(NodeId(1)))
        );
    }

    #[test]
    fn disjointness_checks() {
        assert_eq!(are_internally_disjoint(&[ids(&[0, 1, 2]), ids(&[0, 4, 3, 2])]), Ok(true));
        assert_eq!(are_internally_disjoint(&[ids(&[0, 1, 3]), ids(&[0, 1, 4, 3])]), Ok(false));
        assert_eq!(are_internally_disjoint(&[ids(&[0, 1, 3])]), Ok(true));
        assert_eq!(
            are_internally_disjoint(&[ids(&[0, 1, 3]), ids(&[0, 2])]),
            Err(GraphError::MismatchedEndpoints)
        );
    }

    #[test]
    fn witness_attains_connectivity() {
        let (k, u, v, paths) = connectivity_witness(&wheel(6)).unwrap();
        assert_eq!(k, 3);
        assert_eq!(paths.len(), 3);
        assert!(!wheel(6).has_edge(u, v));
        let (k, _, _, paths) = connectivity_witness(&Topology::complete(4)).unwrap();
        assert_eq!((k, paths.len()), (3, 3));
    }
}
