//! Role-labeled causal DAGs, directed-path enumeration, and the
//! recanting-witness identifiability check for path-specific effects.
//!
//! Nodes carry a [`Role`] describing their function in a fairness analysis:
//! the sensitive attribute `A`, latent background `Z`, base variables `B`
//! (unaffected by `A`), ordinary covariates `X`, resolving variables `R`
//! (affected by `A` in an admissible way), treatments `T`, and the outcome
//! `Y`. Four builtin graphs cover the standard analysis settings; arbitrary
//! graphs round-trip through a small JSON interchange format.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Function of a node in the fairness analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    /// Protected attribute whose influence is under scrutiny (binary).
    Sensitive,
    /// Unobserved background confounder; reconstructed by the VAE.
    Latent,
    /// Background variable causally unaffected by the sensitive attribute.
    Base,
    /// Ordinary observed covariate.
    Covariate,
    /// Variable influenced by the sensitive attribute along admissible paths.
    Resolving,
    /// Treatment/intervention variable.
    Treatment,
    /// Outcome being predicted.
    Outcome,
    /// Anything else.
    Other,
}

/// A graph node: name, role, and whether it is observed in data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub name: String,
    pub role: Role,
    pub observed: bool,
}

/// A directed path, stored as the sequence of node names from source to
/// target. Ordering is lexicographic on that sequence.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Path(pub Vec<String>);

impl Path {
    /// Render as `A>X>Y`.
    pub fn display(&self) -> String {
        self.0.join(">")
    }

    /// Parse from `A>X>Y` notation.
    pub fn parse(s: &str) -> Result<Path> {
        let parts: Vec<String> = s.split('>').map(|p| p.trim().to_string()).collect();
        if parts.len() < 2 || parts.iter().any(|p| p.is_empty()) {
            return Err(Error::Validation(format!("malformed path '{s}' (want e.g. A>X>Y)")));
        }
        Ok(Path(parts))
    }

    /// Consecutive edges of the path.
    pub fn edges(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.windows(2).map(|w| (w[0].as_str(), w[1].as_str()))
    }
}

/// A set of directed paths (deduplicated, deterministically ordered).
pub type PathSet = BTreeSet<Path>;

/// Outcome of the identifiability check for a path set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum Identifiability {
    Identifiable,
    /// A recanting witness exists; the effect is not identifiable.
    NonIdentifiable { witness: String },
}

/// JSON interchange form: `{"nodes": [{"name","role","observed"}], "edges": [["from","to"]]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct GraphDoc {
    nodes: Vec<Node>,
    edges: Vec<(String, String)>,
}

/// A directed acyclic graph with role-labeled nodes.
#[derive(Debug, Clone)]
pub struct CausalGraph {
    nodes: Vec<Node>,
    index: BTreeMap<String, usize>,
    /// Children of each node, sorted by child name for deterministic walks.
    children: Vec<Vec<usize>>,
    /// Parents of each node, sorted by parent name.
    parents: Vec<Vec<usize>>,
    edges: BTreeSet<(String, String)>,
}

impl CausalGraph {
    /// Build a graph from nodes and name pairs. Fails on duplicate node
    /// names, unknown edge endpoints, self-loops, or directed cycles.
    pub fn new(nodes: Vec<Node>, edges: &[(&str, &str)]) -> Result<CausalGraph> {
        let mut index = BTreeMap::new();
        for (i, node) in nodes.iter().enumerate() {
            if index.insert(node.name.clone(), i).is_some() {
                return Err(Error::Validation(format!("duplicate node '{}'", node.name)));
            }
        }
        let mut children = vec![Vec::new(); nodes.len()];
        let mut parents = vec![Vec::new(); nodes.len()];
        let mut edge_set = BTreeSet::new();
        for (from, to) in edges {
            let fi = *index.get(*from).ok_or_else(|| Error::UnknownName(from.to_string()))?;
            let ti = *index.get(*to).ok_or_else(|| Error::UnknownName(to.to_string()))?;
            if fi == ti {
                return Err(Error::Validation(format!("self-loop on '{from}'")));
            }
            if edge_set.insert((from.to_string(), to.to_string())) {
                children[fi].push(ti);
                parents[ti].push(fi);
            }
        }
        for list in children.iter_mut().chain(parents.iter_mut()) {
            list.sort_by(|a, b| nodes[*a].name.cmp(&nodes[*b].name));
        }
        let graph = CausalGraph { nodes, index, children, parents, edges: edge_set };
        graph.validate_dag()?;
        Ok(graph)
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &BTreeSet<(String, String)> {
        &self.edges
    }

    pub fn has_edge(&self, from: &str, to: &str) -> bool {
        self.edges.contains(&(from.to_string(), to.to_string()))
    }

    /// Index of a node by name.
    pub fn node_index(&self, name: &str) -> Result<usize> {
        self.index.get(name).copied().ok_or_else(|| Error::UnknownName(name.to_string()))
    }

    pub fn node(&self, name: &str) -> Result<&Node> {
        Ok(&self.nodes[self.node_index(name)?])
    }

    /// Parent names of `name`, sorted.
    pub fn parents_of(&self, name: &str) -> Result<Vec<&str>> {
        let i = self.node_index(name)?;
        Ok(self.parents[i].iter().map(|&p| self.nodes[p].name.as_str()).collect())
    }

    /// Names of nodes with the given role, in node-declaration order.
    pub fn nodes_with_role(&self, role: Role) -> Vec<&str> {
        self.nodes.iter().filter(|n| n.role == role).map(|n| n.name.as_str()).collect()
    }

    /// The unique node with `role`, or an error when absent/ambiguous.
    pub fn unique_role(&self, role: Role) -> Result<&Node> {
        let hits: Vec<&Node> = self.nodes.iter().filter(|n| n.role == role).collect();
        match hits.len() {
            1 => Ok(hits[0]),
            0 => Err(Error::Validation(format!("graph has no {role:?} node"))),
            _ => Err(Error::Validation(format!("graph has multiple {role:?} nodes"))),
        }
    }

    /// Kahn topological order; on a cycle, reports one offending cycle.
    /// (`new` already enforces acyclicity; public for direct use on load.)
    pub fn validate_dag(&self) -> Result<Vec<usize>> {
        let n = self.nodes.len();
        let mut indeg: Vec<usize> = (0..n).map(|i| self.parents[i].len()).collect();
        let mut queue: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(&i) = queue.iter().min_by_key(|&&i| &self.nodes[i].name) {
            queue.retain(|&q| q != i);
            order.push(i);
            for &c in &self.children[i] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    queue.push(c);
                }
            }
        }
        if order.len() == n {
            return Ok(order);
        }
        // Extract one cycle from the leftover subgraph for the report. Nodes
        // merely downstream of a cycle are pruned first (no successor left),
        // so the walk below always has a next hop.
        let mut leftover: BTreeSet<usize> = (0..n).filter(|i| indeg[*i] > 0).collect();
        loop {
            let prune: Vec<usize> = leftover
                .iter()
                .copied()
                .filter(|&i| !self.children[i].iter().any(|c| leftover.contains(c)))
                .collect();
            if prune.is_empty() {
                break;
            }
            for p in prune {
                leftover.remove(&p);
            }
        }
        let start = *leftover.iter().next().expect("leftover nonempty");
        let mut seen = vec![usize::MAX; n];
        let mut walk = vec![start];
        seen[start] = 0;
        let mut cur = start;
        loop {
            let next = *self.children[cur]
                .iter()
                .find(|c| leftover.contains(c))
                .expect("cycle node must have a successor in the cycle subgraph");
            if seen[next] != usize::MAX {
                let names = walk[seen[next]..].iter().map(|&i| self.nodes[i].name.clone()).collect();
                return Err(Error::Cycle { nodes: names });
            }
            seen[next] = walk.len();
            walk.push(next);
            cur = next;
        }
    }

    /// Topological order of node names.
    pub fn topo_names(&self) -> Vec<&str> {
        self.validate_dag()
            .expect("graph was validated at construction")
            .into_iter()
            .map(|i| self.nodes[i].name.as_str())
            .collect()
    }

    /// All simple directed paths `from -> … -> to`, in lexicographic order
    /// of their node-name sequences.
    pub fn enumerate_paths(&self, from: &str, to: &str) -> Result<Vec<Path>> {
        let start = self.node_index(from)?;
        let goal = self.node_index(to)?;
        let mut out = Vec::new();
        let mut stack = vec![start];
        let mut on_path = vec![false; self.nodes.len()];
        on_path[start] = true;
        self.dfs_paths(goal, &mut stack, &mut on_path, &mut out);
        out.sort();
        Ok(out)
    }

    fn dfs_paths(&self, goal: usize, stack: &mut Vec<usize>, on_path: &mut [bool], out: &mut Vec<Path>) {
        let cur = *stack.last().expect("stack nonempty");
        if cur == goal {
            out.push(Path(stack.iter().map(|&i| self.nodes[i].name.clone()).collect()));
            return;
        }
        for &c in &self.children[cur] {
            if !on_path[c] {
                on_path[c] = true;
                stack.push(c);
                self.dfs_paths(goal, stack, on_path, out);
                stack.pop();
                on_path[c] = false;
            }
        }
    }

    /// Check a proposed path set against the graph's A→Y paths: every member
    /// must be one of them. Returns the full path list for reuse.
    fn check_path_set(&self, pi: &PathSet, from: &str, to: &str) -> Result<Vec<Path>> {
        let all = self.enumerate_paths(from, to)?;
        let all_set: BTreeSet<&Path> = all.iter().collect();
        for p in pi {
            if !all_set.contains(p) {
                return Err(Error::Validation(format!(
                    "path {} is not a {from}->{to} path of the graph",
                    p.display()
                )));
            }
        }
        Ok(all)
    }

    /// Recanting-witness identifiability of the path-specific effect along
    /// `pi` (effect of the sensitive node on the outcome node).
    ///
    /// Non-identifiable iff some interior node `W` lies on a selected path
    /// and an unselected path that share their entire initial segment up to
    /// `W`: the single mechanism feeding `W` would have to carry the active
    /// value down one continuation and the base value down the other.
    pub fn check_identifiability(&self, pi: &PathSet) -> Result<Identifiability> {
        let a = self.unique_role(Role::Sensitive)?.name.clone();
        let y = self.unique_role(Role::Outcome)?.name.clone();
        let all = self.check_path_set(pi, &a, &y)?;
        let excluded: Vec<&Path> = all.iter().filter(|p| !pi.contains(p)).collect();
        let mut witnesses: BTreeSet<String> = BTreeSet::new();
        for p1 in pi {
            for p2 in &excluded {
                // Walk the shared prefix; every shared interior node at the
                // same position with an identical prefix is a witness.
                let limit = p1.0.len().min(p2.0.len());
                for w in 1..limit {
                    if p1.0[w] != p2.0[w] {
                        break;
                    }
                    if p1.0[w] != y {
                        witnesses.insert(p1.0[w].clone());
                    }
                }
            }
        }
        Ok(match witnesses.into_iter().next() {
            Some(witness) => Identifiability::NonIdentifiable { witness },
            None => Identifiability::Identifiable,
        })
    }

    /// Serialize to the JSON interchange format.
    pub fn to_json(&self) -> Result<String> {
        let doc = GraphDoc {
            nodes: self.nodes.clone(),
            edges: self.edges.iter().cloned().collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    /// Parse from the JSON interchange format (validates acyclicity).
    pub fn from_json(text: &str) -> Result<CausalGraph> {
        let doc: GraphDoc = serde_json::from_str(text)?;
        let edges: Vec<(&str, &str)> = doc.edges.iter().map(|(f, t)| (f.as_str(), t.as_str())).collect();
        CausalGraph::new(doc.nodes, &edges)
    }
}

fn node(name: &str, role: Role) -> Node {
    Node { name: name.to_string(), role, observed: role != Role::Latent }
}

/// Builtin graph: latent-confounder structure with sensitive attribute and
/// covariates only (`A`, `Z`, `X`, `Y`).
pub fn fig1a() -> CausalGraph {
    CausalGraph::new(
        vec![
            node("A", Role::Sensitive),
            node("Z", Role::Latent),
            node("X", Role::Covariate),
            node("Y", Role::Outcome),
        ],
        &[("Z", "X"), ("Z", "Y"), ("A", "X"), ("A", "Y"), ("X", "Y")],
    )
    .expect("builtin graph is valid")
}

/// Builtin graph: adds base variables `B` (unaffected by `A`) to [`fig1a`].
pub fn fig1b() -> CausalGraph {
    CausalGraph::new(
        vec![
            node("A", Role::Sensitive),
            node("Z", Role::Latent),
            node("B", Role::Base),
            node("X", Role::Covariate),
            node("Y", Role::Outcome),
        ],
        &[
            ("Z", "X"),
            ("Z", "Y"),
            ("B", "X"),
            ("B", "Y"),
            ("A", "X"),
            ("A", "Y"),
            ("X", "Y"),
        ],
    )
    .expect("builtin graph is valid")
}

/// Builtin graph: full structure with a resolving variable `R` mediating
/// part of the sensitive influence (`A`, `Z`, `B`, `X`, `R`, `Y`).
pub fn fig1c() -> CausalGraph {
    CausalGraph::new(
        vec![
            node("A", Role::Sensitive),
            node("Z", Role::Latent),
            node("B", Role::Base),
            node("X", Role::Covariate),
            node("R", Role::Resolving),
            node("Y", Role::Outcome),
        ],
        &[
            ("Z", "X"),
            ("Z", "R"),
            ("Z", "Y"),
            ("B", "X"),
            ("B", "R"),
            ("B", "Y"),
            ("A", "X"),
            ("A", "R"),
            ("A", "Y"),
            ("X", "R"),
            ("X", "Y"),
            ("R", "Y"),
        ],
    )
    .expect("builtin graph is valid")
}

/// Builtin graph: treatment-effect structure with latent confounding
/// (`A`, `Z`, `X`, `T`, `Y`).
pub fn fig2() -> CausalGraph {
    CausalGraph::new(
        vec![
            node("A", Role::Sensitive),
            node("Z", Role::Latent),
            node("X", Role::Covariate),
            node("T", Role::Treatment),
            node("Y", Role::Outcome),
        ],
        &[
            ("Z", "X"),
            ("Z", "T"),
            ("Z", "Y"),
            ("A", "X"),
            ("A", "T"),
            ("A", "Y"),
            ("X", "Y"),
            ("T", "Y"),
        ],
    )
    .expect("builtin graph is valid")
}

/// Look up a builtin graph by name (`fig1a`, `fig1b`, `fig1c`, `fig2`).
pub fn builtin(name: &str) -> Result<CausalGraph> {
    match name {
        "fig1a" => Ok(fig1a()),
        "fig1b" => Ok(fig1b()),
        "fig1c" => Ok(fig1c()),
        "fig2" => Ok(fig2()),
        other => Err(Error::UnknownName(format!("builtin graph '{other}'"))),
    }
}
