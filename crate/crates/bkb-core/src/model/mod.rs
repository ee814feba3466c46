//! Core data model: variables, I-nodes, S-nodes, and the directed
//! correlation graph connecting them.
//!
//! The graph is stored as plain node tables plus an explicit edge list, so
//! structurally broken graphs (an S-node with two heads, an edge between two
//! I-nodes) are representable and reported by [`validate`](crate::model::validate)
//! instead of being unconstructible. Engines that assume a valid graph compile
//! an [`Adjacency`] first, which requires the structural rules to hold.

mod inference;
mod parse;
mod validate;

pub use inference::{check_inference, Inference, InferenceCandidate, Rejection};
pub use parse::{
    parse_bkb, parse_bkb_with, serialize_bkb, BkbFile, ParseError, ParseErrorKind, ParseOptions,
};
pub use validate::{validate, Rule, ValidateOptions, ValidationReport, Violation};

use std::fmt;

use thiserror::Error;

/// Index of a variable (one partition cell) in a [`KnowledgeGraph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VariableId(pub u32);

/// Index of an I-node (one variable=state instantiation).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct INodeId(pub u32);

/// Index of an S-node (one weighted support).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SNodeId(pub u32);

/// Either side of an edge in the correlation graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeRef {
    I(INodeId),
    S(SNodeId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    /// State names, in declaration order.
    pub states: Vec<String>,
    /// I-node for each state, parallel to `states`.
    pub inodes: Vec<INodeId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct INode {
    pub variable: VariableId,
    /// Index into the owning variable's `states`.
    pub state: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SNode {
    pub name: String,
    pub weight: f64,
}

/// A directed edge of the correlation graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub from: NodeRef,
    pub to: NodeRef,
}

/// The correlation graph of a Bayesian knowledge base, partitioned into
/// variables. Construction never checks the graph-level rules; run
/// [`validate`] to get a report, and compile an [`Adjacency`] before handing
/// the graph to the heuristic, search, or oracle.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KnowledgeGraph {
    pub variables: Vec<Variable>,
    pub i_nodes: Vec<INode>,
    pub s_nodes: Vec<SNode>,
    pub edges: Vec<Edge>,
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("duplicate variable name `{0}`")]
    DuplicateVariable(String),
    #[error("duplicate state `{state}` in variable `{variable}`")]
    DuplicateState { variable: String, state: String },
    #[error("variable `{0}` declares no states")]
    EmptyVariable(String),
    #[error("duplicate support id `{0}`")]
    DuplicateSupport(String),
    #[error("duplicate tail `{tail}` in support `{support}`")]
    DuplicateTail { support: String, tail: String },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("unknown state `{state}` of variable `{variable}`")]
    UnknownState { variable: String, state: String },
    #[error("`{0}` is ambiguous: variable has more than one state")]
    AmbiguousStateRef(String),
    #[error("probability {0} outside (0, 1]")]
    ProbabilityOutOfRange(f64),
    #[error("weight {0} is not a finite nonnegative number")]
    BadWeight(f64),
    #[error("identifier `{0}` contains a reserved character")]
    ReservedIdentifier(String),
}

fn check_identifier(name: &str) -> Result<(), ModelError> {
    let reserved = name.is_empty()
        || name.contains(['#', '[', ']', ',', '=', '*'])
        || name.contains("->")
        || name.chars().any(char::is_whitespace);
    if reserved {
        return Err(ModelError::ReservedIdentifier(name.to_string()));
    }
    Ok(())
}

impl KnowledgeGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declares a variable with the given states, creating one I-node per state.
    pub fn add_variable<S: AsRef<str>>(
        &mut self,
        name: &str,
        states: &[S],
    ) -> Result<VariableId, ModelError> {
        check_identifier(name)?;
        if self.variables.iter().any(|v| v.name == name) {
            return Err(ModelError::DuplicateVariable(name.to_string()));
        }
        if states.is_empty() {
            return Err(ModelError::EmptyVariable(name.to_string()));
        }
        let var = VariableId(self.variables.len() as u32);
        let mut named = Vec::new();
        let mut inodes = Vec::new();
        for (idx, state) in states.iter().enumerate() {
            let state = state.as_ref();
            check_identifier(state)?;
            if named.contains(&state) {
                return Err(ModelError::DuplicateState {
                    variable: name.to_string(),
                    state: state.to_string(),
                });
            }
            named.push(state);
            let inode = INodeId(self.i_nodes.len() as u32);
            self.i_nodes.push(INode {
                variable: var,
                state: idx,
            });
            inodes.push(inode);
        }
        self.variables.push(Variable {
            name: name.to_string(),
            states: states.iter().map(|s| s.as_ref().to_string()).collect(),
            inodes,
        });
        Ok(var)
    }

    /// Adds an S-node with its tail and head edges.
    pub fn add_support(
        &mut self,
        name: &str,
        tails: &[INodeId],
        head: INodeId,
        weight: f64,
    ) -> Result<SNodeId, ModelError> {
        check_identifier(name)?;
        if self.s_nodes.iter().any(|s| s.name == name) {
            return Err(ModelError::DuplicateSupport(name.to_string()));
        }
        if !weight.is_finite() || weight < 0.0 {
            return Err(ModelError::BadWeight(weight));
        }
        let mut seen = Vec::new();
        for &t in tails {
            if seen.contains(&t) {
                return Err(ModelError::DuplicateTail {
                    support: name.to_string(),
                    tail: self.label(t),
                });
            }
            seen.push(t);
        }
        let snode = SNodeId(self.s_nodes.len() as u32);
        self.s_nodes.push(SNode {
            name: name.to_string(),
            weight,
        });
        for &t in tails {
            self.edges.push(Edge {
                from: NodeRef::I(t),
                to: NodeRef::S(snode),
            });
        }
        self.edges.push(Edge {
            from: NodeRef::S(snode),
            to: NodeRef::I(head),
        });
        Ok(snode)
    }

    /// Pushes a raw edge without any structural checks. Intended for tests
    /// that need to build graphs `validate` must reject.
    pub fn add_edge(&mut self, from: NodeRef, to: NodeRef) {
        self.edges.push(Edge { from, to });
    }

    pub fn variable(&self, id: VariableId) -> &Variable {
        &self.variables[id.0 as usize]
    }

    pub fn i_node(&self, id: INodeId) -> &INode {
        &self.i_nodes[id.0 as usize]
    }

    pub fn s_node(&self, id: SNodeId) -> &SNode {
        &self.s_nodes[id.0 as usize]
    }

    pub fn weight(&self, id: SNodeId) -> f64 {
        self.s_nodes[id.0 as usize].weight
    }

    /// Partition cell of an I-node.
    pub fn cell(&self, id: INodeId) -> VariableId {
        self.i_nodes[id.0 as usize].variable
    }

    /// Display label of an I-node, `variable=state`.
    pub fn label(&self, id: INodeId) -> String {
        let node = &self.i_nodes[id.0 as usize];
        let var = &self.variables[node.variable.0 as usize];
        format!("{}={}", var.name, var.states[node.state])
    }

    /// Display name for either kind of node.
    pub fn node_name(&self, node: NodeRef) -> String {
        match node {
            NodeRef::I(i) => self.label(i),
            NodeRef::S(s) => self.s_node(s).name.clone(),
        }
    }

    pub fn find_variable(&self, name: &str) -> Option<VariableId> {
        self.variables
            .iter()
            .position(|v| v.name == name)
            .map(|i| VariableId(i as u32))
    }

    pub fn find_support(&self, name: &str) -> Option<SNodeId> {
        self.s_nodes
            .iter()
            .position(|s| s.name == name)
            .map(|i| SNodeId(i as u32))
    }

    /// Resolves `name=state`, or a bare variable name when the variable has
    /// exactly one state.
    pub fn resolve_inode(&self, text: &str) -> Result<INodeId, ModelError> {
        let (var_name, state_name) = match text.split_once('=') {
            Some((v, s)) => (v, Some(s)),
            None => (text, None),
        };
        let var = self
            .find_variable(var_name)
            .ok_or_else(|| ModelError::UnknownVariable(var_name.to_string()))?;
        let variable = self.variable(var);
        match state_name {
            Some(state) => {
                let idx = variable
                    .states
                    .iter()
                    .position(|s| s == state)
                    .ok_or_else(|| ModelError::UnknownState {
                        variable: var_name.to_string(),
                        state: state.to_string(),
                    })?;
                Ok(variable.inodes[idx])
            }
            None if variable.states.len() == 1 => Ok(variable.inodes[0]),
            None => Err(ModelError::AmbiguousStateRef(text.to_string())),
        }
    }

    pub fn i_node_ids(&self) -> impl Iterator<Item = INodeId> {
        (0..self.i_nodes.len() as u32).map(INodeId)
    }

    pub fn s_node_ids(&self) -> impl Iterator<Item = SNodeId> {
        (0..self.s_nodes.len() as u32).map(SNodeId)
    }

    /// Sum of all S-node weights.
    pub fn total_weight(&self) -> f64 {
        self.s_nodes.iter().map(|s| s.weight).sum()
    }
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeRef::I(i) => write!(f, "I{}", i.0),
            NodeRef::S(s) => write!(f, "S{}", s.0),
        }
    }
}

/// Per-node neighbor tables compiled from the edge list. Building one
/// requires the structural part of validation to hold (bipartite edges,
/// exactly one head per S-node); engines take this as proof the graph was
/// validated.
#[derive(Debug, Clone)]
pub struct Adjacency {
    /// Head I-node of each S-node.
    head: Vec<INodeId>,
    /// Tail I-nodes of each S-node, in edge order.
    tails: Vec<Vec<INodeId>>,
    /// Parent S-nodes of each I-node (supports with that head), in edge order.
    parents: Vec<Vec<SNodeId>>,
    /// Child S-nodes of each I-node (supports using it as a tail), in edge order.
    children: Vec<Vec<SNodeId>>,
}

impl Adjacency {
    /// Compiles neighbor tables. Returns `None` if the graph breaks the
    /// structural rules (call [`validate`] for a detailed report).
    pub fn build(graph: &KnowledgeGraph) -> Option<Adjacency> {
        let mut head: Vec<Option<INodeId>> = vec![None; graph.s_nodes.len()];
        let mut tails: Vec<Vec<INodeId>> = vec![Vec::new(); graph.s_nodes.len()];
        let mut parents: Vec<Vec<SNodeId>> = vec![Vec::new(); graph.i_nodes.len()];
        let mut children: Vec<Vec<SNodeId>> = vec![Vec::new(); graph.i_nodes.len()];
        for edge in &graph.edges {
            match (edge.from, edge.to) {
                (NodeRef::I(i), NodeRef::S(s)) => {
                    if i.0 as usize >= graph.i_nodes.len() || s.0 as usize >= graph.s_nodes.len() {
                        return None;
                    }
                    tails[s.0 as usize].push(i);
                    children[i.0 as usize].push(s);
                }
                (NodeRef::S(s), NodeRef::I(i)) => {
                    if i.0 as usize >= graph.i_nodes.len() || s.0 as usize >= graph.s_nodes.len() {
                        return None;
                    }
                    let slot = &mut head[s.0 as usize];
                    if slot.is_some() {
                        return None;
                    }
                    *slot = Some(i);
                    parents[i.0 as usize].push(s);
                }
                _ => return None,
            }
        }
        let head = head.into_iter().collect::<Option<Vec<_>>>()?;
        Some(Adjacency {
            head,
            tails,
            parents,
            children,
        })
    }

    pub fn head(&self, s: SNodeId) -> INodeId {
        self.head[s.0 as usize]
    }

    pub fn tails(&self, s: SNodeId) -> &[INodeId] {
        &self.tails[s.0 as usize]
    }

    pub fn parents(&self, i: INodeId) -> &[SNodeId] {
        &self.parents[i.0 as usize]
    }

    pub fn children(&self, i: INodeId) -> &[SNodeId] {
        &self.children[i.0 as usize]
    }
}

/// Converts a probability in (0, 1] to a support weight, `w = -ln p`.
pub fn weight_from_probability(p: f64) -> Result<f64, ModelError> {
    if !p.is_finite() || p <= 0.0 || p > 1.0 {
        return Err(ModelError::ProbabilityOutOfRange(p));
    }
    Ok(-p.ln())
}

/// Converts a support weight back to a probability, `p = e^{-w}`.
pub fn probability_from_weight(w: f64) -> Result<f64, ModelError> {
    if !w.is_finite() || w < 0.0 {
        return Err(ModelError::BadWeight(w));
    }
    Ok((-w).exp())
}
