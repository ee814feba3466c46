//! Evidence-rooted view of a knowledge graph.
//!
//! Building the cost tables needs three things layered on top of the plain
//! graph: a single effective evidence node (multi-node evidence is conjoined
//! under a synthetic zero-weight support), the strongly connected components
//! of the support digraph, and the fanout of every I-node (how many distinct
//! variables its dependent supports feed). All three are computed once here
//! and shared by the cost solver, the searcher, and the verifier.

use std::collections::BTreeSet;

use crate::model::{Adjacency, INodeId, KnowledgeGraph, NodeRef, SNodeId, VariableId};

use super::HeuristicError;

/// Nodes added to conjoin multi-node evidence: a fresh single-state variable
/// whose only support lists every evidence node as a tail.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticNodes {
    pub variable: VariableId,
    pub i_node: INodeId,
    pub s_node: SNodeId,
}

/// One strongly connected component, members sorted by id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Component {
    pub i_nodes: Vec<INodeId>,
    pub s_nodes: Vec<SNodeId>,
}

impl Component {
    pub fn node_count(&self) -> usize {
        self.i_nodes.len() + self.s_nodes.len()
    }

    /// Debug label like `{i1=t, i2=t, s2, s3}`.
    pub fn describe(&self, graph: &KnowledgeGraph) -> String {
        let mut parts: Vec<String> = self.i_nodes.iter().map(|&v| graph.label(v)).collect();
        parts.extend(self.s_nodes.iter().map(|&s| graph.s_node(s).name.clone()));
        format!("{{{}}}", parts.join(", "))
    }
}

/// The graph a cost analysis runs on: possibly extended with a synthetic
/// conjunction node, decomposed into components, fanouts counted.
#[derive(Debug, Clone)]
pub struct AugmentedGraph {
    pub graph: KnowledgeGraph,
    pub adjacency: Adjacency,
    /// The single node all evidence funnels through; equals the sole
    /// evidence node, or the synthetic conjunction head.
    pub root: INodeId,
    /// Original evidence nodes, deduplicated, in the order given.
    pub evidence: Vec<INodeId>,
    pub synthetic: Option<SyntheticNodes>,
    /// Components in discovery order: the root's component comes first and
    /// every edge points from a later component to an earlier one (or stays
    /// inside its own).
    pub components: Vec<Component>,
    comp_of: Vec<usize>,
    fanout: Vec<usize>,
    /// Upper bound used for unreachable costs: one more than the sum of all
    /// weights, so no genuine cost ever reaches it.
    pub cap: f64,
}

impl AugmentedGraph {
    pub fn build(graph: &KnowledgeGraph, evidence: &[INodeId]) -> Result<Self, HeuristicError> {
        if evidence.is_empty() {
            return Err(HeuristicError::NoEvidence);
        }
        let n_i = graph.i_nodes.len() as u32;
        let mut seen = BTreeSet::new();
        let mut unique = Vec::new();
        for &e in evidence {
            if e.0 >= n_i {
                return Err(HeuristicError::UnknownEvidence(e));
            }
            if seen.insert(e) {
                unique.push(e);
            }
        }
        for (a, &first) in unique.iter().enumerate() {
            for &second in &unique[a + 1..] {
                if graph.cell(first) == graph.cell(second) {
                    return Err(HeuristicError::ConflictingEvidence { first, second });
                }
            }
        }

        let mut augmented = graph.clone();
        let (root, synthetic) = if unique.len() == 1 {
            (unique[0], None)
        } else {
            let var_name = fresh_name(&augmented, "evidence-conjunction");
            let variable = augmented
                .add_variable(&var_name, &["holds"])
                .map_err(|_| HeuristicError::InvalidStructure)?;
            let i_node = augmented.variable(variable).inodes[0];
            let s_name = fresh_name(&augmented, "conjoin-evidence");
            let s_node = augmented
                .add_support(&s_name, &unique, i_node, 0.0)
                .map_err(|_| HeuristicError::InvalidStructure)?;
            (
                i_node,
                Some(SyntheticNodes {
                    variable,
                    i_node,
                    s_node,
                }),
            )
        };

        let adjacency =
            Adjacency::build(&augmented).ok_or(HeuristicError::InvalidStructure)?;
        let cap = augmented.total_weight() + 1.0;

        let fanout = (0..augmented.i_nodes.len())
            .map(|v| {
                let cells: BTreeSet<VariableId> = adjacency
                    .children(INodeId(v as u32))
                    .iter()
                    .map(|&s| augmented.cell(adjacency.head(s)))
                    .collect();
                cells.len()
            })
            .collect();

        let (components, comp_of) = condense(&augmented, &adjacency, root);

        Ok(AugmentedGraph {
            graph: augmented,
            adjacency,
            root,
            evidence: unique,
            synthetic,
            components,
            comp_of,
            fanout,
            cap,
        })
    }

    pub fn component_of(&self, node: NodeRef) -> usize {
        self.comp_of[self.node_index(node)]
    }

    /// Number of distinct variables fed by the supports this I-node tails
    /// into; zero when nothing depends on it.
    pub fn fanout(&self, v: INodeId) -> usize {
        self.fanout[v.0 as usize]
    }

    /// The share of an I-node's cost carried by each of its outgoing edges.
    pub fn share_divisor(&self, v: INodeId) -> f64 {
        self.fanout(v).max(1) as f64
    }

    fn node_index(&self, node: NodeRef) -> usize {
        match node {
            NodeRef::I(v) => v.0 as usize,
            NodeRef::S(s) => self.graph.i_nodes.len() + s.0 as usize,
        }
    }
}

/// Picks an identifier not used by any variable or support yet.
fn fresh_name(graph: &KnowledgeGraph, base: &str) -> String {
    let mut name = base.to_string();
    let mut n = 1usize;
    while graph.find_variable(&name).is_some() || graph.find_support(&name).is_some() {
        n += 1;
        name = format!("{base}-{n}");
    }
    name
}

/// Tarjan's algorithm over the support digraph. Traversal starts at the
/// root, then visits remaining nodes in id order, so the root's component is
/// emitted first and components on the evidence side precede the sources
/// they depend on.
fn condense(
    graph: &KnowledgeGraph,
    adjacency: &Adjacency,
    root: INodeId,
) -> (Vec<Component>, Vec<usize>) {
    let n_i = graph.i_nodes.len();
    let n = n_i + graph.s_nodes.len();

    // Successors by node index: an I-node feeds the supports it tails into
    // (sorted for a stable traversal); an S-node feeds its head.
    let successors: Vec<Vec<usize>> = (0..n)
        .map(|idx| {
            if idx < n_i {
                let mut out: Vec<usize> = adjacency
                    .children(INodeId(idx as u32))
                    .iter()
                    .map(|&s| n_i + s.0 as usize)
                    .collect();
                out.sort_unstable();
                out
            } else {
                vec![adjacency.head(SNodeId((idx - n_i) as u32)).0 as usize]
            }
        })
        .collect();

    const UNVISITED: u32 = u32::MAX;
    let mut index = vec![UNVISITED; n];
    let mut lowlink = vec![0u32; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut next_index = 0u32;
    let mut components = Vec::new();
    let mut comp_of = vec![usize::MAX; n];

    let starts = std::iter::once(root.0 as usize).chain(0..n);
    for start in starts {
        if index[start] != UNVISITED {
            continue;
        }
        // Iterative DFS: each frame remembers how many successors it has
        // already expanded.
        let mut frames: Vec<(usize, usize)> = vec![(start, 0)];
        index[start] = next_index;
        lowlink[start] = next_index;
        next_index += 1;
        stack.push(start);
        on_stack[start] = true;

        while let Some(&mut (node, ref mut pos)) = frames.last_mut() {
            if let Some(&succ) = successors[node].get(*pos) {
                *pos += 1;
                if index[succ] == UNVISITED {
                    index[succ] = next_index;
                    lowlink[succ] = next_index;
                    next_index += 1;
                    stack.push(succ);
                    on_stack[succ] = true;
                    frames.push((succ, 0));
                } else if on_stack[succ] {
                    lowlink[node] = lowlink[node].min(index[succ]);
                }
            } else {
                frames.pop();
                if let Some(&mut (parent, _)) = frames.last_mut() {
                    lowlink[parent] = lowlink[parent].min(lowlink[node]);
                }
                if lowlink[node] == index[node] {
                    let mut component = Component::default();
                    let comp_idx = components.len();
                    loop {
                        let member = stack.pop().expect("Tarjan stack underflow");
                        on_stack[member] = false;
                        comp_of[member] = comp_idx;
                        if member < n_i {
                            component.i_nodes.push(INodeId(member as u32));
                        } else {
                            component.s_nodes.push(SNodeId((member - n_i) as u32));
                        }
                        if member == node {
                            break;
                        }
                    }
                    component.i_nodes.sort_unstable();
                    component.s_nodes.sort_unstable();
                    components.push(component);
                }
            }
        }
    }

    (components, comp_of)
}
