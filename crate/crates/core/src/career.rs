//! Career tree: an SME-authored role hierarchy with explicit next-position
//! and second-jump edges, plus mapping of a candidate onto it.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embeddings::{cosine, EmbedError, Embedder};
use crate::ingest::ParsedResume;
use crate::time::Timestamp;

pub const DEFAULT_MAPPING_THRESHOLD: f64 = 0.35;

/// Number of bullets from the latest role that go into the mapping text.
const ROLE_TEXT_BULLETS: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CareerNode {
    pub node_id: String,
    pub title: String,
    pub description: String,
    #[serde(default)]
    pub next_positions: Vec<String>,
    #[serde(default)]
    pub second_jump_positions: Vec<String>,
    #[serde(default)]
    pub required_skill_refs: Vec<String>,
}

impl CareerNode {
    /// Text embedded to represent this node.
    pub fn mapping_text(&self) -> String {
        format!("{}\n{}", self.title, self.description)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct TreeDocument {
    tree_id: String,
    version: String,
    roots: Vec<String>,
    nodes: Vec<CareerNode>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum TreeViolation {
    DuplicateId(String),
    DanglingReference { from: String, to: String },
    SelfEdge(String),
    Cycle(Vec<String>),
    EmptyRoots,
    UnknownRoot(String),
    Unreachable(String),
}

impl TreeViolation {
    pub fn code(&self) -> &'static str {
        match self {
            TreeViolation::DuplicateId(_) => "duplicate",
            TreeViolation::DanglingReference { .. } => "dangling",
            TreeViolation::SelfEdge(_) => "self_edge",
            TreeViolation::Cycle(_) => "cycle",
            TreeViolation::EmptyRoots => "empty_roots",
            TreeViolation::UnknownRoot(_) => "unknown_root",
            TreeViolation::Unreachable(_) => "unreachable",
        }
    }
}

impl fmt::Display for TreeViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TreeViolation::DuplicateId(id) => write!(f, "duplicate node id `{id}`"),
            TreeViolation::DanglingReference { from, to } => {
                write!(f, "node `{from}` references unknown node `{to}`")
            }
            TreeViolation::SelfEdge(id) => write!(f, "node `{id}` lists itself"),
            TreeViolation::Cycle(path) => write!(f, "next_positions cycle: {}", path.join(" -> ")),
            TreeViolation::EmptyRoots => write!(f, "tree has no roots"),
            TreeViolation::UnknownRoot(id) => write!(f, "root `{id}` is not a node"),
            TreeViolation::Unreachable(id) => {
                write!(f, "node `{id}` is not reachable from any root")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum CareerError {
    #[error("career tree document is not valid JSON: {0}")]
    Parse(String),
    #[error("invalid career tree: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidTree(Vec<TreeViolation>),
    #[error("resume has no experience entries")]
    NoExperience,
    #[error("best role match `{best_node}` has similarity {similarity:.3}, below {threshold}")]
    UnmappableRole {
        best_node: String,
        similarity: f64,
        threshold: f64,
    },
    #[error("unknown career node `{0}`")]
    UnknownNode(String),
    #[error(transparent)]
    Embedding(#[from] EmbedError),
}

/// Validated, immutable career tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CareerTree {
    tree_id: String,
    version: String,
    roots: Vec<String>,
    nodes: Vec<CareerNode>,
    index: HashMap<String, usize>,
    depth: HashMap<String, usize>,
}

/// Authoring hints that do not make a tree invalid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeWarning {
    pub node_id: String,
    pub message: String,
}

impl CareerTree {
    pub fn from_json(text: &str) -> Result<Self, CareerError> {
        let doc: TreeDocument =
            serde_json::from_str(text).map_err(|e| CareerError::Parse(e.to_string()))?;
        Self::from_document(doc)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CareerError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CareerError::Parse(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn from_document(doc: TreeDocument) -> Result<Self, CareerError> {
        let mut violations = BTreeSet::new();
        let mut index = HashMap::new();
        for (i, node) in doc.nodes.iter().enumerate() {
            if index.insert(node.node_id.clone(), i).is_some() {
                violations.insert(TreeViolation::DuplicateId(node.node_id.clone()));
            }
        }
        for node in &doc.nodes {
            for target in node
                .next_positions
                .iter()
                .chain(&node.second_jump_positions)
            {
                if target == &node.node_id {
                    violations.insert(TreeViolation::SelfEdge(node.node_id.clone()));
                } else if !index.contains_key(target) {
                    violations.insert(TreeViolation::DanglingReference {
                        from: node.node_id.clone(),
                        to: target.clone(),
                    });
                }
            }
        }
        if doc.roots.is_empty() {
            violations.insert(TreeViolation::EmptyRoots);
        }
        for root in &doc.roots {
            if !index.contains_key(root) {
                violations.insert(TreeViolation::UnknownRoot(root.clone()));
            }
        }
        if let Some(cycle) = find_cycle(&doc.nodes, &index) {
            violations.insert(TreeViolation::Cycle(cycle));
        }
        let depth = root_depths(&doc.roots, &doc.nodes, &index);
        if !doc.roots.is_empty() {
            for node in &doc.nodes {
                if !depth.contains_key(&node.node_id) {
                    violations.insert(TreeViolation::Unreachable(node.node_id.clone()));
                }
            }
        }
        if !violations.is_empty() {
            return Err(CareerError::InvalidTree(violations.into_iter().collect()));
        }
        Ok(CareerTree {
            tree_id: doc.tree_id,
            version: doc.version,
            roots: doc.roots,
            nodes: doc.nodes,
            index,
            depth,
        })
    }

    pub fn to_json(&self) -> String {
        let doc = TreeDocument {
            tree_id: self.tree_id.clone(),
            version: self.version.clone(),
            roots: self.roots.clone(),
            nodes: self.nodes.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("tree serializes")
    }

    pub fn tree_id(&self) -> &str {
        &self.tree_id
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn roots(&self) -> &[String] {
        &self.roots
    }

    /// Nodes in document order.
    pub fn nodes(&self) -> &[CareerNode] {
        &self.nodes
    }

    pub fn node(&self, node_id: &str) -> Option<&CareerNode> {
        self.index.get(node_id).map(|&i| &self.nodes[i])
    }

    pub fn contains(&self, node_id: &str) -> bool {
        self.index.contains_key(node_id)
    }

    /// Shortest next-positions distance from any root.
    pub fn depth(&self, node_id: &str) -> Option<usize> {
        self.depth.get(node_id).copied()
    }

    /// Nodes whose authored second-jump list differs from the set reachable in
    /// exactly two next-position steps.
    pub fn warnings(&self) -> Vec<TreeWarning> {
        let mut out = Vec::new();
        for node in &self.nodes {
            let mut two_step: BTreeSet<&str> = BTreeSet::new();
            for next in &node.next_positions {
                if let Some(n) = self.node(next) {
                    two_step.extend(n.next_positions.iter().map(String::as_str));
                }
            }
            two_step.remove(node.node_id.as_str());
            let authored: BTreeSet<&str> = node
                .second_jump_positions
                .iter()
                .map(String::as_str)
                .collect();
            if authored != two_step {
                out.push(TreeWarning {
                    node_id: node.node_id.clone(),
                    message: format!(
                        "second_jump_positions {:?} differ from two-step reachable {:?}",
                        authored, two_step
                    ),
                });
            }
        }
        out
    }
}

fn find_cycle(nodes: &[CareerNode], index: &HashMap<String, usize>) -> Option<Vec<String>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let mut marks = vec![Mark::New; nodes.len()];
    for start in 0..nodes.len() {
        if marks[start] != Mark::New {
            continue;
        }
        // iterative DFS: (node, next edge position)
        let mut stack = vec![(start, 0usize)];
        marks[start] = Mark::Active;
        while let Some(&mut (at, ref mut edge)) = stack.last_mut() {
            let edges = &nodes[at].next_positions;
            if *edge == edges.len() {
                marks[at] = Mark::Done;
                stack.pop();
                continue;
            }
            let target = &edges[*edge];
            *edge += 1;
            let Some(&to) = index.get(target) else {
                continue;
            };
            if to == at {
                continue;
            }
            match marks[to] {
                Mark::Active => {
                    let from = stack.iter().position(|&(n, _)| n == to).unwrap_or(0);
                    let mut path: Vec<String> = stack[from..]
                        .iter()
                        .map(|&(n, _)| nodes[n].node_id.clone())
                        .collect();
                    path.push(nodes[to].node_id.clone());
                    return Some(path);
                }
                Mark::New => {
                    marks[to] = Mark::Active;
                    stack.push((to, 0));
                }
                Mark::Done => {}
            }
        }
    }
    None
}

fn root_depths(
    roots: &[String],
    nodes: &[CareerNode],
    index: &HashMap<String, usize>,
) -> HashMap<String, usize> {
    let mut depth = HashMap::new();
    let mut queue = VecDeque::new();
    for root in roots {
        if index.contains_key(root) && !depth.contains_key(root) {
            depth.insert(root.clone(), 0);
            queue.push_back(root.clone());
        }
    }
    while let Some(id) = queue.pop_front() {
        let d = depth[&id];
        for next in &nodes[index[&id]].next_positions {
            if index.contains_key(next) && !depth.contains_key(next) {
                depth.insert(next.clone(), d + 1);
                queue.push_back(next.clone());
            }
        }
    }
    depth
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleMapping {
    pub node_id: String,
    pub similarity: f64,
    pub candidate_role_text: String,
    pub mapped_at: Timestamp,
}

/// Latest role title and organization plus its first few bullets.
pub fn candidate_role_text(resume: &ParsedResume) -> Option<String> {
    let latest = resume.latest_experience()?;
    let mut lines = vec![latest.title.clone()];
    if !latest.organization.trim().is_empty() {
        lines.push(latest.organization.clone());
    }
    lines.extend(latest.bullets.iter().take(ROLE_TEXT_BULLETS).cloned());
    Some(lines.join("\n"))
}

/// Orders `(node_id, similarity)` candidates best first: similarity
/// descending, then shallower depth, then node id.
pub fn rank_candidates(tree: &CareerTree, mut scored: Vec<(String, f64)>) -> Vec<(String, f64)> {
    scored.sort_by(|(a_id, a), (b_id, b)| {
        b.total_cmp(a)
            .then_with(|| tree.depth(a_id).cmp(&tree.depth(b_id)))
            .then_with(|| a_id.cmp(b_id))
    });
    scored
}

/// Cosine similarity of `role_text` against every node, in document order.
pub fn node_similarities(
    role_text: &str,
    tree: &CareerTree,
    embedder: &dyn Embedder,
) -> Result<Vec<(String, f64)>, CareerError> {
    let mut texts: Vec<String> = tree.nodes().iter().map(CareerNode::mapping_text).collect();
    texts.push(role_text.to_string());
    let mut vectors = embedder.embed_texts(&texts)?;
    let query = vectors.pop().expect("query vector");
    tree.nodes()
        .iter()
        .zip(&vectors)
        .map(|(node, v)| Ok((node.node_id.clone(), cosine(&query, v)?)))
        .collect()
}

/// Places the candidate's most recent role on the tree.
pub fn map_role(
    resume: &ParsedResume,
    tree: &CareerTree,
    embedder: &dyn Embedder,
    threshold: f64,
    mapped_at: Timestamp,
) -> Result<RoleMapping, CareerError> {
    let role_text = candidate_role_text(resume).ok_or(CareerError::NoExperience)?;
    map_role_text(&role_text, tree, embedder, threshold, mapped_at)
}

/// Maps free text describing a role, e.g. a Q&A answer.
pub fn map_role_text(
    role_text: &str,
    tree: &CareerTree,
    embedder: &dyn Embedder,
    threshold: f64,
    mapped_at: Timestamp,
) -> Result<RoleMapping, CareerError> {
    if role_text.trim().is_empty() {
        return Err(CareerError::NoExperience);
    }
    let ranked = rank_candidates(tree, node_similarities(role_text, tree, embedder)?);
    let (node_id, similarity) = ranked
        .into_iter()
        .next()
        .expect("validated trees have nodes");
    if similarity < threshold {
        return Err(CareerError::UnmappableRole {
            best_node: node_id,
            similarity,
            threshold,
        });
    }
    Ok(RoleMapping {
        node_id,
        similarity,
        candidate_role_text: role_text.to_string(),
        mapped_at,
    })
}

/// Builds a mapping for a role the candidate picked explicitly.
pub fn manual_mapping(
    tree: &CareerTree,
    node_id: &str,
    mapped_at: Timestamp,
) -> Result<RoleMapping, CareerError> {
    let node = tree
        .node(node_id)
        .ok_or_else(|| CareerError::UnknownNode(node_id.to_string()))?;
    Ok(RoleMapping {
        node_id: node.node_id.clone(),
        similarity: 1.0,
        candidate_role_text: node.title.clone(),
        mapped_at,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathRecommendation {
    pub immediate: Vec<CareerNode>,
    pub advanced: Vec<CareerNode>,
}

/// Next positions as immediate steps; second-jump positions not already
/// immediate as advanced steps. Tree order is preserved.
pub fn recommend_paths(
    node_id: &str,
    tree: &CareerTree,
) -> Result<PathRecommendation, CareerError> {
    let node = tree
        .node(node_id)
        .ok_or_else(|| CareerError::UnknownNode(node_id.to_string()))?;
    let immediate: Vec<CareerNode> = node
        .next_positions
        .iter()
        .filter_map(|id| tree.node(id).cloned())
        .collect();
    let taken: HashSet<&str> = node.next_positions.iter().map(String::as_str).collect();
    let mut seen = HashSet::new();
    let advanced = node
        .second_jump_positions
        .iter()
        .filter(|id| !taken.contains(id.as_str()) && seen.insert(id.as_str()))
        .filter_map(|id| tree.node(id).cloned())
        .collect();
    Ok(PathRecommendation {
        immediate,
        advanced,
    })
}
