//! Compact metric graphs.
//!
//! A [`MetricGraph`] is a finite, connected multigraph whose edges carry
//! positive finite lengths. Self-loops and parallel edges are allowed. Vertex
//! and edge identifiers are dense indices assigned in input order, so every
//! derived quantity (meshes, spectra, reports) is reproducible.
//!
//! Graph description files use one record per line:
//!
//! ```text
//! # comment
//! name dumbbell
//! edge <id> <vertex_a> <vertex_b> <length>
//! ```
//!
//! The equivalent JSON object form is
//! `{"name": "...", "edges": [{"id": "e0", "a": "u", "b": "v", "length": 1.0}]}`.

use std::collections::{HashMap, VecDeque};
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Critical mass of the quintic NLS on the half-line, `π√3/4`.
pub const MU_HALF_LINE: f64 = PI * 1.732_050_807_568_877_2 / 4.0;
/// Critical mass of the quintic NLS on the real line, `π√3/2`.
pub const MU_LINE: f64 = PI * 1.732_050_807_568_877_2 / 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VertexId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeId(pub usize);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub label: String,
    pub a: VertexId,
    pub b: VertexId,
    pub length: f64,
}

impl Edge {
    pub fn is_loop(&self) -> bool {
        self.a == self.b
    }

    /// The endpoint opposite to `v`. For a loop this is `v` itself.
    pub fn other(&self, v: VertexId) -> VertexId {
        if self.a == v {
            self.b
        } else {
            self.a
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricGraph {
    name: String,
    vertex_labels: Vec<String>,
    edges: Vec<Edge>,
}

impl MetricGraph {
    /// Validates and builds a graph. Fails on non-positive or non-finite
    /// lengths, dangling vertex references, empty edge sets and disconnected
    /// input.
    pub fn new(name: impl Into<String>, vertex_labels: Vec<String>, edges: Vec<Edge>) -> Result<Self> {
        if edges.is_empty() {
            return Err(Error::InvalidGraph("graph has no edges".into()));
        }
        for e in &edges {
            if !(e.length.is_finite() && e.length > 0.0) {
                return Err(Error::InvalidGraph(format!(
                    "edge `{}` has invalid length {}",
                    e.label, e.length
                )));
            }
            for v in [e.a, e.b] {
                if v.0 >= vertex_labels.len() {
                    return Err(Error::InvalidGraph(format!(
                        "edge `{}` references vertex index {} out of range",
                        e.label, v.0
                    )));
                }
            }
        }
        let g = Self {
            name: name.into(),
            vertex_labels,
            edges,
        };
        if !g.is_connected_without(None) {
            return Err(Error::InvalidGraph(format!("graph `{}` is not connected", g.name)));
        }
        Ok(g)
    }

    pub fn builder(name: impl Into<String>) -> GraphBuilder {
        GraphBuilder::new(name)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id.0]
    }

    pub fn vertex_label(&self, v: VertexId) -> &str {
        &self.vertex_labels[v.0]
    }

    pub fn vertex_by_label(&self, label: &str) -> Option<VertexId> {
        self.vertex_labels.iter().position(|l| l == label).map(VertexId)
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> {
        (0..self.vertex_labels.len()).map(VertexId)
    }

    /// Total length `ℓ = |G|`.
    pub fn total_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).sum()
    }

    pub fn min_edge_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).fold(f64::INFINITY, f64::min)
    }

    /// Vertex degree; a self-loop counts twice.
    pub fn degree(&self, v: VertexId) -> usize {
        self.edges
            .iter()
            .map(|e| usize::from(e.a == v) + usize::from(e.b == v))
            .sum()
    }

    /// Edges with at least one endpoint of degree 1.
    pub fn terminal_edges(&self) -> Vec<EdgeId> {
        let degrees: Vec<usize> = self.vertices().map(|v| self.degree(v)).collect();
        self.edges
            .iter()
            .enumerate()
            .filter(|(_, e)| degrees[e.a.0] == 1 || degrees[e.b.0] == 1)
            .map(|(i, _)| EdgeId(i))
            .collect()
    }

    /// Edges whose removal disconnects the graph, in increasing id order.
    ///
    /// Iterative lowlink search over edge ids, so parallel edges are never
    /// bridges and self-loops are skipped outright.
    pub fn bridges(&self) -> Vec<EdgeId> {
        let n = self.vertex_count();
        let adj = self.adjacency();
        let mut disc = vec![usize::MAX; n];
        let mut low = vec![0usize; n];
        let mut timer = 0;
        let mut out = Vec::new();

        for root in 0..n {
            if disc[root] != usize::MAX {
                continue;
            }
            // (vertex, edge used to enter it, next adjacency slot)
            let mut stack: Vec<(usize, Option<usize>, usize)> = vec![(root, None, 0)];
            disc[root] = timer;
            low[root] = timer;
            timer += 1;
            while let Some(frame) = stack.last_mut() {
                let (v, parent_edge, slot) = *frame;
                if slot < adj[v].len() {
                    frame.2 += 1;
                    let (w, eid) = adj[v][slot];
                    if Some(eid) == parent_edge || w == v {
                        continue;
                    }
                    if disc[w] == usize::MAX {
                        disc[w] = timer;
                        low[w] = timer;
                        timer += 1;
                        stack.push((w, Some(eid), 0));
                    } else {
                        low[v] = low[v].min(disc[w]);
                    }
                } else {
                    stack.pop();
                    if let (Some(&(u, _, _)), Some(eid)) = (stack.last(), parent_edge) {
                        low[u] = low[u].min(low[v]);
                        if low[v] > disc[u] {
                            out.push(EdgeId(eid));
                        }
                    }
                }
            }
        }
        out.sort();
        out
    }

    /// A covering by cycles exists iff every edge lies on a cycle, i.e. the
    /// graph is bridgeless.
    pub fn has_cycle_covering(&self) -> bool {
        self.bridges().is_empty()
    }

    /// Critical mass `μ_G` of the quintic problem: `π√3/4` with a terminal
    /// edge, `π√3/2` otherwise.
    pub fn critical_mass(&self) -> f64 {
        if self.terminal_edges().is_empty() {
            MU_LINE
        } else {
            MU_HALF_LINE
        }
    }

    /// Connectivity, optionally pretending one edge is absent.
    pub fn is_connected_without(&self, removed: Option<EdgeId>) -> bool {
        let n = self.vertex_count();
        if n == 0 {
            return false;
        }
        let adj = self.adjacency();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(v) = queue.pop_front() {
            for &(w, eid) in &adj[v] {
                if Some(EdgeId(eid)) == removed || seen[w] {
                    continue;
                }
                seen[w] = true;
                queue.push_back(w);
            }
        }
        seen.into_iter().all(|s| s)
    }

    fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.vertex_count()];
        for (i, e) in self.edges.iter().enumerate() {
            adj[e.a.0].push((e.b.0, i));
            if !e.is_loop() {
                adj[e.b.0].push((e.a.0, i));
            }
        }
        adj
    }

    /// Uniform metric dilation: every length multiplied by `t`.
    pub fn scaled(&self, t: f64) -> Result<Self> {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::InvalidParameter(format!("scale factor {t} must be positive")));
        }
        let mut g = self.clone();
        for e in &mut g.edges {
            e.length *= t;
        }
        Ok(g)
    }

    /// Joins `g1` and `g2` by a new edge of length `ell` between the given
    /// attachment vertices. The new edge is the last edge of the result and is
    /// labelled `bridge`.
    pub fn bridged(
        g1: &MetricGraph,
        g2: &MetricGraph,
        attach_1: VertexId,
        attach_2: VertexId,
        ell: f64,
    ) -> Result<Self> {
        for (g, v) in [(g1, attach_1), (g2, attach_2)] {
            if v.0 >= g.vertex_count() {
                return Err(Error::UnknownVertex(format!("{} in graph `{}`", v.0, g.name)));
            }
            if !g.terminal_edges().is_empty() {
                return Err(Error::InvalidGraph(format!(
                    "graph `{}` has a terminal edge; bridged families need terminal-free parts",
                    g.name
                )));
            }
        }
        if !(ell.is_finite() && ell > 0.0) {
            return Err(Error::InvalidParameter(format!("bridge length {ell} must be positive")));
        }
        let offset = g1.vertex_count();
        let mut labels: Vec<String> = g1.vertex_labels.iter().map(|l| format!("1:{l}")).collect();
        labels.extend(g2.vertex_labels.iter().map(|l| format!("2:{l}")));
        let mut edges: Vec<Edge> = g1
            .edges
            .iter()
            .map(|e| Edge {
                label: format!("1:{}", e.label),
                ..e.clone()
            })
            .collect();
        edges.extend(g2.edges.iter().map(|e| Edge {
            label: format!("2:{}", e.label),
            a: VertexId(e.a.0 + offset),
            b: VertexId(e.b.0 + offset),
            length: e.length,
        }));
        edges.push(Edge {
            label: "bridge".into(),
            a: attach_1,
            b: VertexId(attach_2.0 + offset),
            length: ell,
        });
        MetricGraph::new(format!("{}+{}[{ell}]", g1.name, g2.name), labels, edges)
    }

    // ---- standard families -------------------------------------------------

    pub fn interval(length: f64) -> Result<Self> {
        Self::builder("interval").edge("e0", "a", "b", length).build()
    }

    pub fn circle(length: f64) -> Result<Self> {
        Self::builder("loop").edge("e0", "v", "v", length).build()
    }

    /// Star with one terminal edge per entry of `lengths`.
    pub fn star(lengths: &[f64]) -> Result<Self> {
        let mut b = Self::builder(format!("star{}", lengths.len()));
        for (i, &l) in lengths.iter().enumerate() {
            b = b.edge(&format!("e{i}"), "o", &format!("leaf{i}"), l);
        }
        b.build()
    }

    /// Loop – edge – loop.
    pub fn dumbbell(loop_1: f64, bridge: f64, loop_2: f64) -> Result<Self> {
        Self::builder("dumbbell")
            .edge("loop1", "a", "a", loop_1)
            .edge("bridge", "a", "b", bridge)
            .edge("loop2", "b", "b", loop_2)
            .build()
    }

    /// Two loops at one vertex.
    pub fn figure_eight(loop_1: f64, loop_2: f64) -> Result<Self> {
        Self::builder("figure-eight")
            .edge("loop1", "v", "v", loop_1)
            .edge("loop2", "v", "v", loop_2)
            .build()
    }

    /// A loop with a pendant edge.
    pub fn tadpole(loop_length: f64, tail: f64) -> Result<Self> {
        Self::builder("tadpole")
            .edge("loop", "v", "v", loop_length)
            .edge("tail", "v", "tip", tail)
            .build()
    }

    /// Parallel edges between two vertices.
    pub fn theta(lengths: &[f64]) -> Result<Self> {
        let mut b = Self::builder(format!("theta{}", lengths.len()));
        for (i, &l) in lengths.iter().enumerate() {
            b = b.edge(&format!("e{i}"), "a", "b", l);
        }
        b.build()
    }

    // ---- I/O ---------------------------------------------------------------

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::parse(&text)
    }

    /// Parses either description format; input whose first non-blank
    /// character is `{` is read as JSON.
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            Self::parse_json(text)
        } else {
            Self::parse_text(text)
        }
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut builder = GraphBuilder::new("graph");
        let mut seen_ids: HashMap<String, usize> = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut tokens = line.split_whitespace();
            let keyword = tokens.next().unwrap_or_default();
            match keyword {
                "name" => {
                    let rest = line["name".len()..].trim();
                    if rest.is_empty() {
                        return Err(parse_err(line_no, "`name` needs a value"));
                    }
                    builder.name = rest.to_string();
                }
                "edge" => {
                    let fields: Vec<&str> = tokens.collect();
                    if fields.len() != 4 {
                        return Err(parse_err(
                            line_no,
                            format!(
                                "expected `edge <id> <vertex_a> <vertex_b> <length>`, got {} field(s)",
                                fields.len()
                            ),
                        ));
                    }
                    let length: f64 = fields[3].parse().map_err(|_| {
                        parse_err(line_no, format!("invalid length `{}`", fields[3]))
                    })?;
                    if !(length.is_finite() && length > 0.0) {
                        return Err(parse_err(line_no, format!("length must be positive and finite, got {length}")));
                    }
                    if let Some(prev) = seen_ids.insert(fields[0].to_string(), line_no) {
                        return Err(parse_err(
                            line_no,
                            format!("duplicate edge id `{}` (first defined on line {prev})", fields[0]),
                        ));
                    }
                    builder = builder.edge(fields[0], fields[1], fields[2], length);
                }
                other => {
                    return Err(parse_err(line_no, format!("unknown record `{other}`")));
                }
            }
        }
        builder.build()
    }

    pub fn parse_json(text: &str) -> Result<Self> {
        let doc: GraphDocument = serde_json::from_str(text)?;
        let mut builder = GraphBuilder::new(doc.name.unwrap_or_else(|| "graph".into()));
        let mut seen = HashMap::new();
        for (i, e) in doc.edges.into_iter().enumerate() {
            let id = e.id.to_string();
            if seen.insert(id.clone(), i).is_some() {
                return Err(Error::InvalidGraph(format!("duplicate edge id `{id}`")));
            }
            builder = builder.edge(&id, &e.a.to_string(), &e.b.to_string(), e.length);
        }
        builder.build()
    }

    pub fn to_document(&self) -> GraphDocument {
        GraphDocument {
            name: Some(self.name.clone()),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeRecord {
                    id: Token::Str(e.label.clone()),
                    a: Token::Str(self.vertex_labels[e.a.0].clone()),
                    b: Token::Str(self.vertex_labels[e.b.0].clone()),
                    length: e.length,
                })
                .collect(),
        }
    }
}

impl fmt::Display for MetricGraph {
    /// Writes the line-oriented description format.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "name {}", self.name)?;
        for e in &self.edges {
            writeln!(
                f,
                "edge {} {} {} {:?}",
                e.label, self.vertex_labels[e.a.0], self.vertex_labels[e.b.0], e.length
            )?;
        }
        Ok(())
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Structured form of a graph description.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GraphDocument {
    #[serde(default)]
    pub name: Option<String>,
    pub edges: Vec<EdgeRecord>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub id: Token,
    pub a: Token,
    pub b: Token,
    pub length: f64,
}

/// Identifier that may be written as a string or an integer.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Token {
    Int(i64),
    Str(String),
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Int(i) => write!(f, "{i}"),
            Token::Str(s) => f.write_str(s),
        }
    }
}

/// Builds graphs from string vertex labels; vertices are numbered in order of
/// first appearance.
#[derive(Clone, Debug)]
pub struct GraphBuilder {
    name: String,
    labels: Vec<String>,
    index: HashMap<String, usize>,
    edges: Vec<Edge>,
}

impl GraphBuilder {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            labels: Vec::new(),
            index: HashMap::new(),
            edges: Vec::new(),
        }
    }

    fn vertex(&mut self, label: &str) -> VertexId {
        if let Some(&i) = self.index.get(label) {
            return VertexId(i);
        }
        let i = self.labels.len();
        self.labels.push(label.to_string());
        self.index.insert(label.to_string(), i);
        VertexId(i)
    }

    pub fn edge(mut self, label: &str, a: &str, b: &str, length: f64) -> Self {
        let a = self.vertex(a);
        let b = self.vertex(b);
        self.edges.push(Edge {
            label: label.to_string(),
            a,
            b,
            length,
        });
        self
    }

    pub fn build(self) -> Result<MetricGraph> {
        MetricGraph::new(self.name, self.labels, self.edges)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force_bridges(g: &MetricGraph) -> Vec<EdgeId> {
        (0..g.edge_count())
            .map(EdgeId)
            .filter(|&e| !g.is_connected_without(Some(e)))
            .collect()
    }

    #[test]
    fn total_lengths() {
        assert_eq!(MetricGraph::interval(1.0).unwrap().total_length(), 1.0);
        assert_eq!(MetricGraph::circle(2.0 * PI).unwrap().total_length(), 2.0 * PI);
        assert_eq!(MetricGraph::dumbbell(1.0, 3.0, 1.0).unwrap().total_length(), 5.0);
    }

    #[test]
    fn terminal_edges_of_standard_graphs() {
        assert_eq!(MetricGraph::interval(1.0).unwrap().terminal_edges(), vec![EdgeId(0)]);
        assert!(MetricGraph::circle(1.0).unwrap().terminal_edges().is_empty());
        let tadpole = MetricGraph::tadpole(1.0, 0.5).unwrap();
        assert_eq!(tadpole.terminal_edges(), vec![EdgeId(1)]);
    }

    #[test]
    fn bridges_of_standard_graphs() {
        assert_eq!(MetricGraph::interval(1.0).unwrap().bridges(), vec![EdgeId(0)]);
        assert!(MetricGraph::circle(1.0).unwrap().bridges().is_empty());
        let db = MetricGraph::dumbbell(1.0, 3.0, 1.0).unwrap();
        assert_eq!(db.bridges(), vec![EdgeId(1)]);
        assert!(!db.has_cycle_covering());
        assert!(MetricGraph::theta(&[1.0, 1.0]).unwrap().bridges().is_empty());
    }

    #[test]
    fn two_triangles_sharing_a_vertex_are_covered() {
        let g = MetricGraph::builder("bowtie")
            .edge("a", "o", "x", 1.0)
            .edge("b", "x", "y", 1.0)
            .edge("c", "y", "o", 1.0)
            .edge("d", "o", "z", 1.0)
            .edge("e", "z", "w", 1.0)
            .edge("f", "w", "o", 1.0)
            .build()
            .unwrap();
        assert_eq!(brute_force_bridges(&g), Vec::<EdgeId>::new());
        assert!(g.has_cycle_covering());
    }

    #[test]
    fn critical_mass_dichotomy() {
        assert!((MetricGraph::interval(1.0).unwrap().critical_mass() - 1.360_349_523_175_663).abs() < 1e-12);
        assert!((MetricGraph::circle(1.0).unwrap().critical_mass() - 2.720_699_046_351_326).abs() < 1e-12);
        assert_eq!(MetricGraph::dumbbell(1.0, 3.0, 1.0).unwrap().critical_mass(), MU_LINE);
    }

    #[test]
    fn bridged_family() {
        let l = MetricGraph::circle(1.0).unwrap();
        let g = MetricGraph::bridged(&l, &l, VertexId(0), VertexId(0), 3.0).unwrap();
        assert_eq!(g.total_length(), 5.0);
        assert_eq!(g.bridges(), vec![EdgeId(2)]);

        let f8 = MetricGraph::figure_eight(1.0, 2.0).unwrap();
        let g = MetricGraph::bridged(&f8, &f8, VertexId(0), VertexId(0), 0.1).unwrap();
        assert!(g.bridges().contains(&EdgeId(g.edge_count() - 1)));
        assert!((g.total_length() - 6.1).abs() < 1e-12);

        let err = MetricGraph::bridged(&l, &l, VertexId(3), VertexId(0), 1.0).unwrap_err();
        assert!(matches!(err, Error::UnknownVertex(_)));
        let iv = MetricGraph::interval(1.0).unwrap();
        assert!(MetricGraph::bridged(&iv, &l, VertexId(0), VertexId(0), 1.0).is_err());
    }

    #[test]
    fn rejects_disconnected_and_bad_lengths() {
        let err = MetricGraph::builder("two")
            .edge("a", "x", "y", 1.0)
            .edge("b", "z", "w", 1.0)
            .build()
            .unwrap_err();
        assert!(matches!(err, Error::InvalidGraph(_)));
        assert!(MetricGraph::interval(0.0).is_err());
        assert!(MetricGraph::interval(f64::INFINITY).is_err());
    }

    #[test]
    fn text_format_round_trip_and_errors() {
        let text = "# a dumbbell\nname db\nedge l1 a a 1\nedge br a b 3.5\n\nedge l2 b b 1 # trailing\n";
        let g = MetricGraph::parse(text).unwrap();
        assert_eq!(g.name(), "db");
        assert_eq!(g.edge_count(), 3);
        assert_eq!(g.total_length(), 5.5);
        assert_eq!(MetricGraph::parse(&g.to_string()).unwrap(), g);

        let err = MetricGraph::parse("edge e0 a b 1\nedge e1 b c\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = MetricGraph::parse("edge e0 a b -1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = MetricGraph::parse("edge e0 a b 1\nedge e0 b c 1\n").unwrap_err();
        assert!(err.to_string().contains("duplicate"));
        let err = MetricGraph::parse("vertex v\n").unwrap_err();
        assert!(err.to_string().contains("line 1"));
    }

    #[test]
    fn json_format_matches_text() {
        let json = r#"{"name": "db", "edges": [
            {"id": "l1", "a": "a", "b": "a", "length": 1.0},
            {"id": "br", "a": "a", "b": "b", "length": 3.5},
            {"id": 7, "a": "b", "b": "b", "length": 1.0}]}"#;
        let g = MetricGraph::parse(json).unwrap();
        assert_eq!(g.edge(EdgeId(2)).label, "7");
        let text = MetricGraph::parse("name db\nedge l1 a a 1\nedge br a b 3.5\nedge 7 b b 1\n").unwrap();
        assert_eq!(g, text);
        let round = serde_json::to_string(&g.to_document()).unwrap();
        assert_eq!(MetricGraph::parse(&round).unwrap(), g);
    }
}
