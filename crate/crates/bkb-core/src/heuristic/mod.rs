//! Cost-sharing analysis over a knowledge graph.
//!
//! Every node is assigned the cost of the cheapest way to establish it,
//! with one twist: when an I-node feeds supports of `k` distinct variables,
//! each of those directions is charged only `1/k` of the node's cost. The
//! resulting node and edge costs underestimate the weight of any inference
//! passing through them, which is what makes them usable as a search
//! heuristic.
//!
//! Costs are defined as the greatest solution of
//!
//! ```text
//! c(s) = w(s) + sum over tails t of c(t) / k(t)      for S-nodes
//! c(v) = min(min over supports u of v of c(u), cap)  for I-nodes
//! ```
//!
//! where `cap` exceeds the total graph weight and marks the unreachable.
//! On an acyclic graph the system evaluates directly; cycles are handled by
//! solving a small linear program per strongly connected component
//! ([`compute_cost_sharing`]). [`propagate_costs`] approximates the same
//! fixpoint iteratively and exists to cross-check the solver, and
//! [`verify_cost_solution`] audits any proposed table against the equations.

mod augment;
mod programs;

pub use augment::{AugmentedGraph, Component, SyntheticNodes};
pub use programs::{compute_cost_sharing, compute_cost_sharing_with_programs, ComponentLp};

use crate::lp::{LpError, LpStatus};
use crate::model::{INodeId, NodeRef, SNodeId};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum HeuristicError {
    #[error("no evidence nodes given")]
    NoEvidence,
    #[error("evidence node {0:?} is not in the graph")]
    UnknownEvidence(INodeId),
    #[error("evidence nodes {first:?} and {second:?} assign states to the same variable")]
    ConflictingEvidence { first: INodeId, second: INodeId },
    #[error("graph structure is invalid; run validation for details")]
    InvalidStructure,
    #[error("cost program for component {component} ended {status:?}")]
    Solver { component: usize, status: LpStatus },
    #[error("cost program construction failed: {0}")]
    Lp(#[from] LpError),
    #[error("component {component} is larger than a single node; the graph has cycles")]
    NotAcyclic { component: usize },
}

/// Finished cost assignment for every node of an augmented graph.
///
/// Edge costs are derived rather than stored: every edge out of an I-node
/// carries the node's cost divided by its fanout, and the edge out of an
/// S-node carries the S-node's full cost.
#[derive(Debug, Clone, PartialEq)]
pub struct CostTable {
    i_costs: Vec<f64>,
    s_costs: Vec<f64>,
    share: Vec<f64>,
    cap: f64,
}

impl CostTable {
    pub(crate) fn new(aug: &AugmentedGraph, i_costs: Vec<f64>, s_costs: Vec<f64>) -> Self {
        debug_assert_eq!(i_costs.len(), aug.graph.i_nodes.len());
        debug_assert_eq!(s_costs.len(), aug.graph.s_nodes.len());
        let share = (0..i_costs.len())
            .map(|v| aug.share_divisor(INodeId(v as u32)))
            .collect();
        CostTable {
            i_costs,
            s_costs,
            share,
            cap: aug.cap,
        }
    }

    /// Sentinel bound marking unreachable nodes; exceeds any genuine cost.
    pub fn cap(&self) -> f64 {
        self.cap
    }

    pub fn i_node_cost(&self, v: INodeId) -> f64 {
        self.i_costs[v.0 as usize]
    }

    pub fn s_node_cost(&self, s: SNodeId) -> f64 {
        self.s_costs[s.0 as usize]
    }

    pub fn node_cost(&self, node: NodeRef) -> f64 {
        match node {
            NodeRef::I(v) => self.i_node_cost(v),
            NodeRef::S(s) => self.s_node_cost(s),
        }
    }

    /// Cost carried by each edge from this I-node into a support: the
    /// node's cost split across the distinct variables it feeds.
    pub fn tail_edge_cost(&self, v: INodeId) -> f64 {
        self.i_costs[v.0 as usize] / self.share[v.0 as usize]
    }

    /// Cost carried by the edge from an S-node to its head.
    pub fn head_edge_cost(&self, s: SNodeId) -> f64 {
        self.s_costs[s.0 as usize]
    }

    /// Cost of any edge leaving the given node.
    pub fn edge_cost(&self, from: NodeRef) -> f64 {
        match from {
            NodeRef::I(v) => self.tail_edge_cost(v),
            NodeRef::S(s) => self.head_edge_cost(s),
        }
    }
}

/// Evaluates the cost equations directly on an acyclic graph, visiting
/// components from the sources toward the evidence. Fails with
/// [`HeuristicError::NotAcyclic`] if any component holds more than one node.
pub fn evaluate_acyclic(aug: &AugmentedGraph) -> Result<CostTable, HeuristicError> {
    let mut i_costs = vec![f64::NAN; aug.graph.i_nodes.len()];
    let mut s_costs = vec![f64::NAN; aug.graph.s_nodes.len()];
    for (ci, comp) in aug.components.iter().enumerate().rev() {
        if comp.node_count() != 1 {
            return Err(HeuristicError::NotAcyclic { component: ci });
        }
        if let Some(&v) = comp.i_nodes.first() {
            i_costs[v.0 as usize] = best_support_cost(aug, &i_costs, v);
        } else {
            let s = comp.s_nodes[0];
            s_costs[s.0 as usize] = support_cost(aug, &i_costs, s);
        }
    }
    Ok(CostTable::new(aug, i_costs, s_costs))
}

/// Iterative approximation of the same fixpoint: start every I-node at the
/// cap and sweep the update `c(v) = min(best support, cap)` until no entry
/// moves more than `tol`. Sweeps run from the source components toward the
/// evidence so constants propagate in one pass where possible.
///
/// This exists as an independent cross-check of the linear-programming
/// path; it converges geometrically on components whose cycles split costs
/// and anchors quickly elsewhere, but offers no iteration-count guarantee,
/// so production callers should prefer [`compute_cost_sharing`].
pub fn propagate_costs(aug: &AugmentedGraph, max_sweeps: usize, tol: f64) -> CostTable {
    let mut i_costs = vec![aug.cap; aug.graph.i_nodes.len()];
    let order: Vec<INodeId> = aug
        .components
        .iter()
        .rev()
        .flat_map(|c| c.i_nodes.iter().copied())
        .collect();
    for _ in 0..max_sweeps {
        let mut moved: f64 = 0.0;
        for &v in &order {
            let next = best_support_cost(aug, &i_costs, v);
            moved = moved.max((i_costs[v.0 as usize] - next).abs());
            i_costs[v.0 as usize] = next;
        }
        if moved <= tol {
            break;
        }
    }
    let s_costs = (0..aug.graph.s_nodes.len() as u32)
        .map(|s| support_cost(aug, &i_costs, SNodeId(s)))
        .collect();
    CostTable::new(aug, i_costs, s_costs)
}

/// `w(s) + sum of tail shares` given current I-node costs.
fn support_cost(aug: &AugmentedGraph, i_costs: &[f64], s: SNodeId) -> f64 {
    let mut cost = aug.graph.weight(s);
    for &t in aug.adjacency.tails(s) {
        cost += i_costs[t.0 as usize] / aug.share_divisor(t);
    }
    cost
}

/// Cheapest support cost for an I-node, clamped at the cap; the cap itself
/// when the node has no supports.
fn best_support_cost(aug: &AugmentedGraph, i_costs: &[f64], v: INodeId) -> f64 {
    let mut best = aug.cap;
    for &u in aug.adjacency.parents(v) {
        best = best.min(support_cost(aug, i_costs, u));
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostViolationKind {
    /// A cost is NaN or infinite.
    NotFinite,
    /// A cost is below zero.
    Negative,
    /// An I-node cost exceeds the cap.
    AboveCap,
    /// An S-node cost disagrees with its weight plus tail shares.
    SupportFormula,
    /// An I-node costs more than one of its supports.
    ExceedsSupport,
    /// An I-node sits strictly below its cheapest support and the cap.
    NotTight,
    /// An I-node without supports is not pinned at the cap.
    UnsupportedOffCap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostViolation {
    pub node: NodeRef,
    pub kind: CostViolationKind,
    pub message: String,
}

/// Audits a cost table against the cost equations at the given tolerance.
/// Returns every violation found; an empty list means the table is a valid
/// greatest solution as far as floating-point checking can tell.
pub fn verify_cost_solution(
    aug: &AugmentedGraph,
    table: &CostTable,
    tolerance: f64,
) -> Vec<CostViolation> {
    let mut out = Vec::new();
    let mut flag = |node: NodeRef, kind: CostViolationKind, message: String| {
        out.push(CostViolation {
            node,
            kind,
            message,
        });
    };

    for s in aug.graph.s_node_ids() {
        let node = NodeRef::S(s);
        let c = table.s_node_cost(s);
        if !c.is_finite() {
            flag(node, CostViolationKind::NotFinite, format!("cost is {c}"));
            continue;
        }
        if c < -tolerance {
            flag(node, CostViolationKind::Negative, format!("cost is {c}"));
        }
        let want = support_cost(aug, &table.i_costs, s);
        if (c - want).abs() > tolerance {
            flag(
                node,
                CostViolationKind::SupportFormula,
                format!("cost is {c} but weight plus tail shares gives {want}"),
            );
        }
    }

    for v in aug.graph.i_node_ids() {
        let node = NodeRef::I(v);
        let c = table.i_node_cost(v);
        if !c.is_finite() {
            flag(node, CostViolationKind::NotFinite, format!("cost is {c}"));
            continue;
        }
        if c < -tolerance {
            flag(node, CostViolationKind::Negative, format!("cost is {c}"));
        }
        if c > table.cap + tolerance {
            flag(
                node,
                CostViolationKind::AboveCap,
                format!("cost is {c}, cap is {}", table.cap),
            );
        }
        let parents = aug.adjacency.parents(v);
        if parents.is_empty() {
            if (c - table.cap).abs() > tolerance {
                flag(
                    node,
                    CostViolationKind::UnsupportedOffCap,
                    format!("unsupported node costs {c}, expected the cap {}", table.cap),
                );
            }
            continue;
        }
        let mut cheapest = f64::INFINITY;
        for &u in parents {
            let cu = table.s_node_cost(u);
            cheapest = cheapest.min(cu);
            if c > cu + tolerance {
                flag(
                    node,
                    CostViolationKind::ExceedsSupport,
                    format!(
                        "cost {c} exceeds support {} at {cu}",
                        aug.graph.s_node(u).name
                    ),
                );
            }
        }
        let target = cheapest.min(table.cap);
        if c + tolerance < target {
            flag(
                node,
                CostViolationKind::NotTight,
                format!("cost {c} is slack; cheapest support allows {target}"),
            );
        }
    }
    out
}
