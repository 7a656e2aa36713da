use std::fmt::Write as _;
use std::path::Path as FsPath;

use super::{GraphError, NodeId, Topology};

/// Parses `n m` followed by `m` lines of `u v`. Blank lines and `#` comments
/// are skipped.
pub fn parse_graph(text: &str) -> Result<Topology, GraphError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let parse_err = |line: usize, message: String| GraphError::Parse { line, message };
    let (hline, header) = lines.next().ok_or_else(|| parse_err(1, "missing header".into()))?;
    let nums = numbers(hline, header)?;
    let [n, m] = nums[..] else {
        return Err(parse_err(hline, format!("expected `n m`, got `{header}`")));
    };
    let mut edges = Vec::with_capacity(m);
    for (line, body) in lines.by_ref().take(m) {
        let nums = numbers(line, body)?;
        let [u, v] = nums[..] else {
            return Err(parse_err(line, format!("expected `u v`, got `{body}`")));
        };
        edges.push((line, NodeId::from(u), NodeId::from(v)));
    }
    if edges.len() != m {
        return Err(parse_err(0, format!("header announces {m} edges, found {}", edges.len())));
    }
    if let Some((line, _)) = lines.next() {
        return Err(parse_err(line, "trailing content after the last edge".into()));
    }
    // Build incrementally so errors point at the offending line.
    let mut seen = std::collections::BTreeSet::new();
    for &(line, u, v) in &edges {
        let bad = |e: GraphError| parse_err(line, e.to_string());
        if u.index() >= n || v.index() >= n {
            return Err(bad(GraphError::OutOfRange { node: if u.index() >= n { u } else { v }, n }));
        }
        if u == v {
            return Err(bad(GraphError::SelfLoop(u)));
        }
        if !seen.insert((u.min(v), u.max(v))) {
            return Err(bad(GraphError::DuplicateEdge(u.min(v), u.max(v))));
        }
    }
    Topology::new(n, edges.into_iter().map(|(_, u, v)| (u, v)))
}

fn numbers(line: usize, body: &str) -> Result<Vec<usize>, GraphError> {
    body.split_whitespace()
        .map(|tok| {
            tok.parse::<usize>().map_err(|_| GraphError::Parse {
                line,
                message: format!("`{tok}` is not a non-negative integer"),
            })
        })
        .collect()
}

pub fn read_graph(path: impl AsRef<FsPath>) -> Result<Topology, GraphError> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| GraphError::Io(format!("{}: {e}", path.as_ref().display())))?;
    parse_graph(&text)
}

pub fn write_graph(g: &Topology) -> String {
    let mut out = format!("{} {}\n", g.n(), g.edge_count());
    for &(u, v) in g.edges() {
        let _ = writeln!(out, "{u} {v}");
    }
    out
}
