//! Core domain types: account levels, sectors, organization types, events,
//! roster entries, weighted digraphs, collapsed organization graphs and
//! vertex partitions.

use crate::error::{Error, Result};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::Write;

/// The four account levels. The declared order is fixed: it is the row/column
/// order of every level-by-level matrix artifact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    OrgMain,
    OrgSide,
    IndMain,
    IndSide,
}

impl Level {
    pub const ALL: [Level; 4] = [Level::OrgMain, Level::OrgSide, Level::IndMain, Level::IndSide];

    pub fn token(self) -> &'static str {
        match self {
            Level::OrgMain => "org_main",
            Level::OrgSide => "org_side",
            Level::IndMain => "ind_main",
            Level::IndSide => "ind_side",
        }
    }

    pub fn parse(s: &str) -> Result<Level> {
        match s.trim().to_ascii_lowercase().as_str() {
            "org_main" => Ok(Level::OrgMain),
            "org_side" => Ok(Level::OrgSide),
            "ind_main" => Ok(Level::IndMain),
            "ind_side" => Ok(Level::IndSide),
            other => Err(Error::invalid(format!("unknown level `{other}`"))),
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sector {
    Government,
    Science,
    Business,
    CivilSociety,
    Media,
    InterestGroup,
    PoliticalParty,
}

impl Sector {
    pub const ALL: [Sector; 7] = [
        Sector::Government,
        Sector::Science,
        Sector::Business,
        Sector::CivilSociety,
        Sector::Media,
        Sector::InterestGroup,
        Sector::PoliticalParty,
    ];

    pub fn token(self) -> &'static str {
        match self {
            Sector::Government => "government",
            Sector::Science => "science",
            Sector::Business => "business",
            Sector::CivilSociety => "civil_society",
            Sector::Media => "media",
            Sector::InterestGroup => "interest_group",
            Sector::PoliticalParty => "political_party",
        }
    }

    pub fn parse(s: &str) -> Result<Sector> {
        match s.trim().to_ascii_lowercase().as_str() {
            "government" => Ok(Sector::Government),
            "science" => Ok(Sector::Science),
            "business" => Ok(Sector::Business),
            "civil_society" => Ok(Sector::CivilSociety),
            "media" => Ok(Sector::Media),
            "interest_group" => Ok(Sector::InterestGroup),
            "political_party" => Ok(Sector::PoliticalParty),
            other => Err(Error::invalid(format!("unknown sector `{other}`"))),
        }
    }
}

impl fmt::Display for Sector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrgType {
    Party,
    Government,
    Ngo,
    InterestGroup,
    Corporation,
    Science,
    Media,
}

impl OrgType {
    pub const ALL: [OrgType; 7] = [
        OrgType::Party,
        OrgType::Government,
        OrgType::Ngo,
        OrgType::InterestGroup,
        OrgType::Corporation,
        OrgType::Science,
        OrgType::Media,
    ];

    pub fn token(self) -> &'static str {
        match self {
            OrgType::Party => "party",
            OrgType::Government => "government",
            OrgType::Ngo => "ngo",
            OrgType::InterestGroup => "interest_group",
            OrgType::Corporation => "corporation",
            OrgType::Science => "science",
            OrgType::Media => "media",
        }
    }

    pub fn parse(s: &str) -> Result<OrgType> {
        match s.trim().to_ascii_lowercase().as_str() {
            "party" => Ok(OrgType::Party),
            "government" => Ok(OrgType::Government),
            "ngo" => Ok(OrgType::Ngo),
            "interest_group" => Ok(OrgType::InterestGroup),
            "corporation" => Ok(OrgType::Corporation),
            "science" => Ok(OrgType::Science),
            "media" => Ok(OrgType::Media),
            other => Err(Error::invalid(format!("unknown org type `{other}`"))),
        }
    }
}

impl fmt::Display for OrgType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Tweet,
    Retweet,
    Reply,
    Quote,
}

impl EventKind {
    pub fn token(self) -> &'static str {
        match self {
            EventKind::Tweet => "tweet",
            EventKind::Retweet => "retweet",
            EventKind::Reply => "reply",
            EventKind::Quote => "quote",
        }
    }

    pub fn parse(s: &str) -> Result<EventKind> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tweet" => Ok(EventKind::Tweet),
            "retweet" => Ok(EventKind::Retweet),
            "reply" => Ok(EventKind::Reply),
            "quote" => Ok(EventKind::Quote),
            other => Err(Error::invalid(format!("unknown kind `{other}`"))),
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub account_id: String,
    pub target_account_id: Option<String>,
    pub timestamp: DateTime<Utc>,
    pub kind: EventKind,
    pub text: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RosterEntry {
    pub account_id: String,
    pub organization_id: String,
    pub level: Level,
    pub sector: Sector,
    pub org_type: OrgType,
}

/// Provenance carried by a graph into its artifacts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphMeta {
    pub level: Option<Level>,
    pub window: Option<(DateTime<Utc>, DateTime<Utc>)>,
    /// sha256 hex of the sorted keyword list, if any filter was applied.
    pub keyword_hash: Option<String>,
}

/// Directed weighted graph with interned vertex ids. Weights are event
/// counts, always ≥ 1; self-loops are rejected at insertion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightedDigraph {
    names: Vec<String>,
    index: HashMap<String, usize>,
    edges: BTreeMap<(usize, usize), u64>,
    pub meta: GraphMeta,
}

impl Default for WeightedDigraph {
    fn default() -> Self {
        Self::new()
    }
}

impl WeightedDigraph {
    pub fn new() -> Self {
        WeightedDigraph {
            names: Vec::new(),
            index: HashMap::new(),
            edges: BTreeMap::new(),
            meta: GraphMeta::default(),
        }
    }

    /// Intern `name`, returning its dense index.
    pub fn add_vertex(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), i);
        i
    }

    /// Accumulate weight on (src, dst). Self-loops are dropped: every
    /// downstream statistic is defined over distinct dyads.
    pub fn add_edge(&mut self, src: usize, dst: usize, w: u64) {
        assert!(src < self.names.len() && dst < self.names.len(), "unknown vertex index");
        if src == dst || w == 0 {
            return;
        }
        *self.edges.entry((src, dst)).or_insert(0) += w;
    }

    pub fn n_vertices(&self) -> usize {
        self.names.len()
    }

    /// Number of directed edges (distinct ordered pairs).
    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn total_weight(&self) -> u64 {
        self.edges.values().sum()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn vertex(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn weight(&self, src: usize, dst: usize) -> u64 {
        self.edges.get(&(src, dst)).copied().unwrap_or(0)
    }

    /// Directed edges in (src, dst) index order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        self.edges.iter().map(|(&(s, d), &w)| (s, d, w))
    }

    /// Per-vertex (out_strength, in_strength).
    pub fn strengths(&self) -> (Vec<u64>, Vec<u64>) {
        let n = self.n_vertices();
        let mut out = vec![0u64; n];
        let mut inn = vec![0u64; n];
        for (&(s, d), &w) in &self.edges {
            out[s] += w;
            inn[d] += w;
        }
        (out, inn)
    }

    /// Symmetrized weights w'(i,j) = w(i,j) + w(j,i), keyed i < j.
    pub fn undirected_weights(&self) -> BTreeMap<(usize, usize), u64> {
        let mut und = BTreeMap::new();
        for (&(s, d), &w) in &self.edges {
            let key = if s < d { (s, d) } else { (d, s) };
            *und.entry(key).or_insert(0) += w;
        }
        und
    }

    /// Degree on the undirected view.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.n_vertices()];
        for &(i, j) in self.undirected_weights().keys() {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg
    }

    /// Restrict to `vertex_set`; keeps exactly the edges with both endpoints
    /// inside. Vertex order follows the original graph.
    pub fn induced_subgraph<'a, I>(&self, vertex_set: I) -> Result<WeightedDigraph>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut keep = vec![false; self.n_vertices()];
        for name in vertex_set {
            let i = self
                .vertex(name)
                .ok_or_else(|| Error::invalid(format!("unknown vertex `{name}`")))?;
            keep[i] = true;
        }
        let mut g = WeightedDigraph::new();
        g.meta = self.meta.clone();
        let mut remap = vec![usize::MAX; self.n_vertices()];
        for (i, name) in self.names.iter().enumerate() {
            if keep[i] {
                remap[i] = g.add_vertex(name);
            }
        }
        for (&(s, d), &w) in &self.edges {
            if keep[s] && keep[d] {
                g.add_edge(remap[s], remap[d], w);
            }
        }
        Ok(g)
    }

    /// Rebuild with the same vertices and an explicit directed edge set.
    pub fn with_edges(&self, edges: impl IntoIterator<Item = ((usize, usize), u64)>) -> WeightedDigraph {
        let mut g = WeightedDigraph::new();
        g.meta = self.meta.clone();
        for name in &self.names {
            g.add_vertex(name);
        }
        for ((s, d), w) in edges {
            g.add_edge(s, d, w);
        }
        g
    }

    /// Directed weighted edge list: `src,dst,weight`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "src,dst,weight")?;
        for (s, d, wt) in self.edges() {
            writeln!(w, "{},{},{}", csv_field(&self.names[s]), csv_field(&self.names[d]), wt)?;
        }
        Ok(())
    }

    pub fn write_graphml<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, r#"<?xml version="1.0" encoding="UTF-8"?>"#)?;
        writeln!(w, r#"<graphml xmlns="http://graphml.graphdrawing.org/xmlns">"#)?;
        writeln!(w, r#"  <key id="w" for="edge" attr.name="weight" attr.type="long"/>"#)?;
        writeln!(w, r#"  <graph edgedefault="directed">"#)?;
        for name in &self.names {
            writeln!(w, r#"    <node id="{}"/>"#, xml_escape(name))?;
        }
        for (s, d, wt) in self.edges() {
            writeln!(
                w,
                r#"    <edge source="{}" target="{}"><data key="w">{}</data></edge>"#,
                xml_escape(&self.names[s]),
                xml_escape(&self.names[d]),
                wt
            )?;
        }
        writeln!(w, "  </graph>")?;
        writeln!(w, "</graphml>")?;
        Ok(())
    }
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Binary undirected graph over all roster organizations; vertices persist
/// even when isolated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CollapsedGraph {
    names: Vec<String>,
    index: HashMap<String, usize>,
    edges: BTreeSet<(usize, usize)>,
}

impl CollapsedGraph {
    /// `orgs` fixes the vertex set (deduplicated, order preserved).
    pub fn new(orgs: impl IntoIterator<Item = String>) -> Self {
        let mut names = Vec::new();
        let mut index = HashMap::new();
        for o in orgs {
            if !index.contains_key(&o) {
                index.insert(o.clone(), names.len());
                names.push(o);
            }
        }
        CollapsedGraph { names, index, edges: BTreeSet::new() }
    }

    pub fn connect(&mut self, a: &str, b: &str) -> Result<()> {
        let ia = self.vertex(a).ok_or_else(|| Error::invalid(format!("unknown organization `{a}`")))?;
        let ib = self.vertex(b).ok_or_else(|| Error::invalid(format!("unknown organization `{b}`")))?;
        if ia == ib {
            return Ok(()); // intra-org edges are dropped
        }
        self.edges.insert((ia.min(ib), ia.max(ib)));
        Ok(())
    }

    pub fn vertex(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_vertices(&self) -> usize {
        self.names.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.n_vertices()];
        for &(i, j) in &self.edges {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg
    }

    /// Binary undirected edge list: `src,dst`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "src,dst")?;
        for &(i, j) in &self.edges {
            writeln!(w, "{},{}", csv_field(&self.names[i]), csv_field(&self.names[j]))?;
        }
        Ok(())
    }
}

/// Assignment of vertices to contiguous blocks 0..B−1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    assignment: Vec<u32>,
    block_count: usize,
}

impl Partition {
    /// Compact arbitrary labels to contiguous block ids (first-seen order).
    pub fn from_labels(labels: &[u32]) -> Partition {
        let mut remap: HashMap<u32, u32> = HashMap::new();
        let mut assignment = Vec::with_capacity(labels.len());
        for &l in labels {
            let next = remap.len() as u32;
            let id = *remap.entry(l).or_insert(next);
            assignment.push(id);
        }
        let block_count = remap.len().max(1);
        Partition { assignment, block_count }
    }

    pub fn single_block(n: usize) -> Partition {
        Partition { assignment: vec![0; n], block_count: 1 }
    }

    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    pub fn block_count(&self) -> usize {
        self.block_count
    }

    pub fn block_of(&self, v: usize) -> u32 {
        self.assignment[v]
    }

    pub fn assignment(&self) -> &[u32] {
        &self.assignment
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.block_count];
        for &b in &self.assignment {
            sizes[b as usize] += 1;
        }
        sizes
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> WeightedDigraph {
        let mut g = WeightedDigraph::new();
        let a = g.add_vertex("a");
        let b = g.add_vertex("b");
        let c = g.add_vertex("c");
        g.add_edge(a, b, 1);
        g.add_edge(b, c, 1);
        g.add_edge(c, a, 1);
        g
    }

    #[test]
    fn strengths_single_edge() {
        let mut g = WeightedDigraph::new();
        let a = g.add_vertex("a");
        let b = g.add_vertex("b");
        g.add_edge(a, b, 5);
        let (out, inn) = g.strengths();
        assert_eq!(out, vec![5, 0]);
        assert_eq!(inn, vec![0, 5]);
    }

    #[test]
    fn strengths_empty() {
        let g = WeightedDigraph::new();
        let (out, inn) = g.strengths();
        assert!(out.is_empty() && inn.is_empty());
    }

    #[test]
    fn strengths_triangle() {
        let g = triangle();
        let (out, inn) = g.strengths();
        assert_eq!(out, vec![1, 1, 1]);
        assert_eq!(inn, vec![1, 1, 1]);
        assert_eq!(g.degrees(), vec![2, 2, 2]);
    }

    #[test]
    fn undirected_strength_is_out_plus_in() {
        let mut g = WeightedDigraph::new();
        let a = g.add_vertex("a");
        let b = g.add_vertex("b");
        let c = g.add_vertex("c");
        g.add_edge(a, b, 3);
        g.add_edge(b, a, 2);
        g.add_edge(a, c, 4);
        let (out, inn) = g.strengths();
        let und = g.undirected_weights();
        let und_strength = |i: usize| -> u64 {
            und.iter()
                .filter(|(&(x, y), _)| x == i || y == i)
                .map(|(_, &w)| w)
                .sum()
        };
        for i in 0..3 {
            assert_eq!(und_strength(i), out[i] + inn[i]);
        }
        assert_eq!(und[&(0, 1)], 5);
    }

    #[test]
    fn self_loops_dropped() {
        let mut g = WeightedDigraph::new();
        let a = g.add_vertex("a");
        g.add_edge(a, a, 7);
        assert_eq!(g.n_edges(), 0);
        assert_eq!(g.total_weight(), 0);
    }

    #[test]
    fn induced_identity_and_empty() {
        let g = triangle();
        let full = g.induced_subgraph(["a", "b", "c"]).unwrap();
        assert_eq!(full, g);
        let empty = g.induced_subgraph([]).unwrap();
        assert_eq!(empty.n_vertices(), 0);
        assert_eq!(empty.n_edges(), 0);
    }

    #[test]
    fn induced_pair_keeps_one_edge() {
        let g = triangle();
        let sub = g.induced_subgraph(["a", "b"]).unwrap();
        assert_eq!(sub.n_vertices(), 2);
        assert_eq!(sub.n_edges(), 1);
        let (a, b) = (sub.vertex("a").unwrap(), sub.vertex("b").unwrap());
        assert_eq!(sub.weight(a, b), 1);
        assert!(sub.total_weight() <= g.total_weight());
    }

    #[test]
    fn induced_unknown_vertex_errors() {
        let g = triangle();
        assert!(g.induced_subgraph(["a", "zz"]).is_err());
    }

    #[test]
    fn level_tokens_round_trip() {
        for l in Level::ALL {
            assert_eq!(Level::parse(l.token()).unwrap(), l);
        }
        for s in Sector::ALL {
            assert_eq!(Sector::parse(s.token()).unwrap(), s);
        }
        for t in OrgType::ALL {
            assert_eq!(OrgType::parse(t.token()).unwrap(), t);
        }
        assert!(Level::parse("main").is_err());
    }

    #[test]
    fn collapsed_drops_intra_org_and_keeps_isolates() {
        let mut cg = CollapsedGraph::new(["x".into(), "y".into(), "z".into()]);
        cg.connect("x", "x").unwrap();
        cg.connect("x", "y").unwrap();
        cg.connect("y", "x").unwrap(); // same unordered pair
        assert_eq!(cg.n_vertices(), 3);
        assert_eq!(cg.n_edges(), 1);
        assert!(cg.has_edge(0, 1));
        assert!(cg.connect("x", "absent").is_err());
    }

    #[test]
    fn partition_compacts_labels() {
        let p = Partition::from_labels(&[7, 7, 3, 9, 3]);
        assert_eq!(p.block_count(), 3);
        assert_eq!(p.assignment(), &[0, 0, 1, 2, 1]);
        assert_eq!(p.block_sizes(), vec![2, 2, 1]);
    }

    #[test]
    fn csv_export_shape() {
        let g = triangle();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("src,dst,weight"));
        assert!(text.contains("a,b,1"));
    }

    #[test]
    fn graphml_export_mentions_all_edges() {
        let g = triangle();
        let mut buf = Vec::new();
        g.write_graphml(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.matches("<edge ").count(), 3);
        assert_eq!(text.matches("<node ").count(), 3);
        assert!(text.contains("edgedefault=\"directed\""));
    }
}
