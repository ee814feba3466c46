//! Inference subgraphs and their acceptance test.

use super::{Adjacency, Edge, INodeId, KnowledgeGraph, NodeRef, SNodeId, VariableId};

use std::collections::BTreeSet;

/// A candidate subgraph, named by its node sets. The induced edges are the
/// tail and head edges of the chosen S-nodes restricted to the chosen nodes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InferenceCandidate {
    pub i_nodes: BTreeSet<INodeId>,
    pub s_nodes: BTreeSet<SNodeId>,
}

/// An accepted inference: a consistent, acyclic, self-supporting subgraph.
#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    pub i_nodes: BTreeSet<INodeId>,
    pub s_nodes: BTreeSet<SNodeId>,
    pub edges: Vec<Edge>,
    /// Total weight: the sum of the S-node weights.
    pub weight: f64,
}

/// First failed acceptance condition, with witnesses.
#[derive(Debug, Clone, PartialEq)]
pub enum Rejection {
    /// A directed cycle through the listed nodes.
    Cyclic { nodes: Vec<NodeRef> },
    /// Two I-nodes from the same cell.
    Inconsistent {
        cell: VariableId,
        first: INodeId,
        second: INodeId,
    },
    /// An I-node with no incoming S-node in the candidate.
    Unsupported { i_node: INodeId },
    /// An S-node whose tail is outside the candidate.
    MissingTail { s_node: SNodeId, tail: INodeId },
    /// An S-node whose head is outside the candidate.
    MissingHead { s_node: SNodeId },
    /// A required evidence I-node is not in the candidate.
    MissingEvidence { i_node: INodeId },
}

impl Rejection {
    pub fn describe(&self, graph: &KnowledgeGraph) -> String {
        match self {
            Rejection::Cyclic { nodes } => {
                let names: Vec<String> = nodes.iter().map(|&n| graph.node_name(n)).collect();
                format!("cycle through {}", names.join(" -> "))
            }
            Rejection::Inconsistent { first, second, .. } => format!(
                "{} and {} are states of the same variable",
                graph.label(*first),
                graph.label(*second)
            ),
            Rejection::Unsupported { i_node } => {
                format!("{} has no incoming S-node", graph.label(*i_node))
            }
            Rejection::MissingTail { s_node, tail } => format!(
                "S-node {} requires {}",
                graph.s_node(*s_node).name,
                graph.label(*tail)
            ),
            Rejection::MissingHead { s_node } => {
                format!("S-node {} has no head in the subgraph", graph.s_node(*s_node).name)
            }
            Rejection::MissingEvidence { i_node } => {
                format!("evidence {} is not in the subgraph", graph.label(*i_node))
            }
        }
    }
}

/// Accepts a candidate iff it is acyclic, consistent (at most one I-node per
/// cell), every I-node is supported by some member S-node, every S-node has
/// its full tail and its head in the candidate, and every evidence I-node is
/// present. On success returns the inference with its induced edges and
/// total weight.
pub fn check_inference(
    graph: &KnowledgeGraph,
    adj: &Adjacency,
    candidate: &InferenceCandidate,
    evidence: &[INodeId],
) -> Result<Inference, Rejection> {
    if let Some(cycle) = find_cycle(adj, candidate) {
        return Err(Rejection::Cyclic { nodes: cycle });
    }

    let mut by_cell: Vec<(VariableId, INodeId)> = Vec::new();
    for &i in &candidate.i_nodes {
        let cell = graph.cell(i);
        if let Some(&(_, first)) = by_cell.iter().find(|&&(c, _)| c == cell) {
            return Err(Rejection::Inconsistent {
                cell,
                first,
                second: i,
            });
        }
        by_cell.push((cell, i));
    }

    for &i in &candidate.i_nodes {
        let supported = adj
            .parents(i)
            .iter()
            .any(|s| candidate.s_nodes.contains(s));
        if !supported {
            return Err(Rejection::Unsupported { i_node: i });
        }
    }

    for &s in &candidate.s_nodes {
        if !candidate.i_nodes.contains(&adj.head(s)) {
            return Err(Rejection::MissingHead { s_node: s });
        }
        for &t in adj.tails(s) {
            if !candidate.i_nodes.contains(&t) {
                return Err(Rejection::MissingTail { s_node: s, tail: t });
            }
        }
    }

    for &e in evidence {
        if !candidate.i_nodes.contains(&e) {
            return Err(Rejection::MissingEvidence { i_node: e });
        }
    }

    let mut edges = Vec::new();
    for &s in &candidate.s_nodes {
        for &t in adj.tails(s) {
            edges.push(Edge {
                from: NodeRef::I(t),
                to: NodeRef::S(s),
            });
        }
        edges.push(Edge {
            from: NodeRef::S(s),
            to: NodeRef::I(adj.head(s)),
        });
    }
    let weight = candidate.s_nodes.iter().map(|&s| graph.weight(s)).sum();
    Ok(Inference {
        i_nodes: candidate.i_nodes.clone(),
        s_nodes: candidate.s_nodes.clone(),
        edges,
        weight,
    })
}

/// Depth-first cycle search over the candidate's induced subgraph. Returns a
/// witness cycle as a node sequence.
fn find_cycle(adj: &Adjacency, candidate: &InferenceCandidate) -> Option<Vec<NodeRef>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Color {
        White,
        Gray,
        Black,
    }
    use Color::*;

    let nodes: Vec<NodeRef> = candidate
        .i_nodes
        .iter()
        .map(|&i| NodeRef::I(i))
        .chain(candidate.s_nodes.iter().map(|&s| NodeRef::S(s)))
        .collect();
    let index = |n: NodeRef| nodes.binary_search_by(|probe| cmp_ref(*probe, n)).ok();

    let succ = |n: NodeRef| -> Vec<NodeRef> {
        match n {
            NodeRef::I(i) => adj
                .children(i)
                .iter()
                .filter(|s| candidate.s_nodes.contains(s))
                .map(|&s| NodeRef::S(s))
                .collect(),
            NodeRef::S(s) => {
                let head = adj.head(s);
                if candidate.i_nodes.contains(&head) {
                    vec![NodeRef::I(head)]
                } else {
                    vec![]
                }
            }
        }
    };

    let mut color = vec![White; nodes.len()];
    let mut stack: Vec<NodeRef> = Vec::new();

    // Iterative DFS with an explicit path stack so we can report the cycle.
    fn dfs(
        start: usize,
        nodes: &[NodeRef],
        color: &mut [Color],
        stack: &mut Vec<NodeRef>,
        succ: &dyn Fn(NodeRef) -> Vec<NodeRef>,
        index: &dyn Fn(NodeRef) -> Option<usize>,
    ) -> Option<Vec<NodeRef>> {
        let mut work: Vec<(usize, usize)> = vec![(start, 0)];
        color[start] = Gray;
        stack.push(nodes[start]);
        while let Some(&mut (node, ref mut next)) = work.last_mut() {
            let successors = succ(nodes[node]);
            if *next < successors.len() {
                let target = successors[*next];
                *next += 1;
                let Some(t_idx) = index(target) else { continue };
                match color[t_idx] {
                    Gray => {
                        let pos = stack.iter().position(|&n| n == target).unwrap();
                        let mut cycle = stack[pos..].to_vec();
                        cycle.push(target);
                        return Some(cycle);
                    }
                    White => {
                        color[t_idx] = Gray;
                        stack.push(target);
                        work.push((t_idx, 0));
                    }
                    Black => {}
                }
            } else {
                color[node] = Black;
                stack.pop();
                work.pop();
            }
        }
        None
    }

    for start in 0..nodes.len() {
        if color[start] == White {
            if let Some(cycle) = dfs(start, &nodes, &mut color, &mut stack, &succ, &index) {
                return Some(cycle);
            }
        }
    }
    None
}

fn cmp_ref(a: NodeRef, b: NodeRef) -> std::cmp::Ordering {
    use std::cmp::Ordering;
    match (a, b) {
        (NodeRef::I(x), NodeRef::I(y)) => x.cmp(&y),
        (NodeRef::S(x), NodeRef::S(y)) => x.cmp(&y),
        (NodeRef::I(_), NodeRef::S(_)) => Ordering::Less,
        (NodeRef::S(_), NodeRef::I(_)) => Ordering::Greater,
    }
}
