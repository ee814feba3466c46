//! Exhaustive reference implementations for checking the fast paths.
//!
//! The oracle enumerates every minimal explanation of the evidence by plain
//! backtracking — one support chosen per needed I-node, with consistency and
//! cycle pruning — and derives ground truths from the full list: the true
//! minimum weight, and the admissibility of a cost table (no reachable
//! search state may cost more than the cheapest explanation extending it).
//! Everything here favors obviousness over speed and is meant for small
//! instances; budgets turn runaway cases into errors rather than hangs.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::heuristic::AugmentedGraph;
use crate::model::{
    check_inference, Adjacency, INodeId, Inference, InferenceCandidate, KnowledgeGraph, SNodeId,
    VariableId,
};
use crate::search::{self, EdgeCosts, SearchLimits, Termination};

#[derive(Debug, Clone, Copy, Default)]
pub struct OracleLimits {
    /// Branches needing more supports than this are abandoned; enumeration
    /// is then incomplete by construction, so comparisons against it must
    /// scope themselves accordingly.
    pub max_supports: Option<usize>,
    /// Cap on backtracking steps before giving up with an error.
    pub max_steps: Option<u64>,
}

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("enumeration budget exhausted after {steps} steps")]
    BudgetExhausted { steps: u64 },
    #[error("state walk budget exhausted after {states} states")]
    StateBudgetExhausted { states: usize },
}

/// Enumerates every minimal explanation of the evidence: assignments of one
/// support to each needed I-node, consistent, acyclic, and closed over
/// tails. Emission order follows the backtracker (smallest pending node
/// first, supports in id order), not weight.
pub fn enumerate_inferences(
    graph: &KnowledgeGraph,
    adjacency: &Adjacency,
    evidence: &[INodeId],
    limits: &OracleLimits,
) -> Result<Vec<Inference>, OracleError> {
    let mut pending: BTreeSet<INodeId> = BTreeSet::new();
    let mut cells: BTreeMap<VariableId, INodeId> = BTreeMap::new();
    for &e in evidence {
        if let Some(&pinned) = cells.get(&graph.cell(e)) {
            if pinned != e {
                // Evidence that contradicts itself has no explanations.
                return Ok(Vec::new());
            }
        }
        cells.insert(graph.cell(e), e);
        pending.insert(e);
    }
    let mut enumerator = Enumerator {
        graph,
        adjacency,
        evidence,
        limits,
        steps: 0,
        found: Vec::new(),
    };
    let chosen = BTreeMap::new();
    enumerator.descend(&pending, &chosen, &cells)?;
    Ok(enumerator.found)
}

/// The cheapest explanation, or `None` when the evidence has none. Weight
/// ties resolve toward the lexicographically smallest support id list.
pub fn min_weight_inference(
    graph: &KnowledgeGraph,
    adjacency: &Adjacency,
    evidence: &[INodeId],
    limits: &OracleLimits,
) -> Result<Option<Inference>, OracleError> {
    let all = enumerate_inferences(graph, adjacency, evidence, limits)?;
    Ok(all.into_iter().min_by(|a, b| {
        a.weight
            .total_cmp(&b.weight)
            .then_with(|| a.s_nodes.cmp(&b.s_nodes))
    }))
}

struct Enumerator<'a> {
    graph: &'a KnowledgeGraph,
    adjacency: &'a Adjacency,
    evidence: &'a [INodeId],
    limits: &'a OracleLimits,
    steps: u64,
    found: Vec<Inference>,
}

impl Enumerator<'_> {
    fn descend(
        &mut self,
        pending: &BTreeSet<INodeId>,
        chosen: &BTreeMap<INodeId, SNodeId>,
        cells: &BTreeMap<VariableId, INodeId>,
    ) -> Result<(), OracleError> {
        self.steps += 1;
        if let Some(cap) = self.limits.max_steps {
            if self.steps > cap {
                return Err(OracleError::BudgetExhausted { steps: self.steps });
            }
        }
        let Some(&node) = pending.first() else {
            let candidate = InferenceCandidate {
                i_nodes: chosen.keys().copied().collect(),
                s_nodes: chosen.values().copied().collect(),
            };
            let inference = check_inference(self.graph, self.adjacency, &candidate, self.evidence)
                .expect("backtracker assembled an invalid inference");
            self.found.push(inference);
            return Ok(());
        };
        if let Some(cap) = self.limits.max_supports {
            if chosen.len() >= cap {
                return Ok(());
            }
        }

        let mut supports = self.adjacency.parents(node).to_vec();
        supports.sort_unstable();
        'support: for u in supports {
            let tails = self.adjacency.tails(u);
            for &t in tails {
                if let Some(&pinned) = cells.get(&self.graph.cell(t)) {
                    if pinned != t {
                        continue 'support;
                    }
                }
            }
            if self.closes_cycle(chosen, node, tails) {
                continue;
            }
            let mut next_pending = pending.clone();
            next_pending.remove(&node);
            let mut next_cells = cells.clone();
            for &t in tails {
                next_cells.insert(self.graph.cell(t), t);
                if !chosen.contains_key(&t) {
                    next_pending.insert(t);
                }
            }
            let mut next_chosen = chosen.clone();
            next_chosen.insert(node, u);
            self.descend(&next_pending, &next_chosen, &next_cells)?;
        }
        Ok(())
    }

    /// True if resolving `node` through a support with these tails would
    /// close a directed cycle: some tail is already reachable from `node`
    /// along the supports chosen so far.
    fn closes_cycle(
        &self,
        chosen: &BTreeMap<INodeId, SNodeId>,
        node: INodeId,
        tails: &[INodeId],
    ) -> bool {
        let mut reachable = BTreeSet::new();
        let mut queue = vec![node];
        while let Some(x) = queue.pop() {
            if !reachable.insert(x) {
                continue;
            }
            for (&head, &s) in chosen {
                if self.adjacency.tails(s).contains(&x) && !reachable.contains(&head) {
                    queue.push(head);
                }
            }
        }
        tails.iter().any(|t| reachable.contains(t))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityViolation {
    /// Index of the offending state in the exhaustive walk.
    pub state: usize,
    /// The state's cut cost.
    pub cost: f64,
    /// Weight of the cheapest explanation extending the state.
    pub bound: f64,
    /// Supports the state had committed to.
    pub chosen: Vec<SNodeId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub violations: Vec<AdmissibilityViolation>,
    pub states_checked: usize,
    pub inference_count: usize,
}

/// Walks the entire reachable search space under the given cost model and
/// checks every state's cost against the cheapest explanation still reachable
/// from it; states no explanation extends are vacuously fine. The walk and
/// the enumeration both run on the augmented graph, so synthetic conjunction
/// nodes need no special treatment.
///
/// Reachability is stricter than set inclusion: expanding an I-node retires
/// its outgoing edges, so an explanation whose remaining (not yet chosen)
/// supports lean on an already-expanded tail cannot be completed from the
/// state and must not constrain its cost.
pub fn audit_admissibility(
    aug: &AugmentedGraph,
    costs: EdgeCosts,
    state_budget: usize,
    limits: &OracleLimits,
    tolerance: f64,
) -> Result<AuditReport, OracleError> {
    let inferences = enumerate_inferences(&aug.graph, &aug.adjacency, &[aug.root], limits)?;

    let walk_limits = SearchLimits {
        max_states: Some(state_budget),
        max_seconds: None,
    };
    let outcome = search::find_best_inferences(aug, costs, usize::MAX, &walk_limits, false);
    if outcome.termination != Termination::Exhausted {
        return Err(OracleError::StateBudgetExhausted {
            states: outcome.stats.generated,
        });
    }

    let mut violations = Vec::new();
    for (id, state) in outcome.states.iter().enumerate() {
        let bound = inferences
            .iter()
            .filter(|inf| {
                state.chosen.is_subset(&inf.s_nodes)
                    && state.expanded.is_subset(&inf.i_nodes)
                    && inf.s_nodes.iter().all(|&s| {
                        state.chosen.contains(&s)
                            || aug
                                .adjacency
                                .tails(s)
                                .iter()
                                .all(|t| !state.expanded.contains(t))
                    })
            })
            .map(|inf| inf.weight)
            .min_by(f64::total_cmp);
        let Some(bound) = bound else {
            continue;
        };
        if state.cost > bound + tolerance {
            violations.push(AdmissibilityViolation {
                state: id,
                cost: state.cost,
                bound,
                chosen: state.chosen.iter().copied().collect(),
            });
        }
    }
    Ok(AuditReport {
        violations,
        states_checked: outcome.states.len(),
        inference_count: inferences.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heuristic::compute_cost_sharing;
    use crate::model::parse_bkb;

    fn figure3() -> KnowledgeGraph {
        let text = std::fs::read_to_string(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/../../fixtures/figure3.bkb"
        ))
        .unwrap();
        parse_bkb(&text).unwrap().graph
    }

    fn support_names(graph: &KnowledgeGraph, inference: &Inference) -> Vec<String> {
        inference
            .s_nodes
            .iter()
            .map(|&s| graph.s_node(s).name.clone())
            .collect()
    }

    #[test]
    fn enumeration_finds_the_three_explanations() {
        let graph = figure3();
        let adj = Adjacency::build(&graph).unwrap();
        let i3 = graph.resolve_inode("i3").unwrap();
        let all =
            enumerate_inferences(&graph, &adj, &[i3], &OracleLimits::default()).unwrap();
        let mut weights: Vec<f64> = all.iter().map(|inf| inf.weight).collect();
        weights.sort_by(f64::total_cmp);
        assert_eq!(weights, vec![7.0, 12.0, 16.0]);
        // The s2+s3 combination is a support cycle and must not appear.
        for inf in &all {
            let names = support_names(&graph, inf);
            assert!(!(names.contains(&"s2".into()) && names.contains(&"s3".into())));
        }
    }

    #[test]
    fn min_weight_picks_the_cheapest() {
        let graph = figure3();
        let adj = Adjacency::build(&graph).unwrap();
        let i3 = graph.resolve_inode("i3").unwrap();
        let best = min_weight_inference(&graph, &adj, &[i3], &OracleLimits::default())
            .unwrap()
            .unwrap();
        assert_eq!(best.weight, 7.0);
        assert_eq!(support_names(&graph, &best), vec!["s2", "s4", "s5"]);
    }

    #[test]
    fn weight_ties_resolve_to_first_declared() {
        let mut g = KnowledgeGraph::new();
        let x = g.add_variable("x", &["t"]).unwrap();
        let xi = g.variable(x).inodes[0];
        g.add_support("first", &[], xi, 1.0).unwrap();
        g.add_support("second", &[], xi, 1.0).unwrap();
        let adj = Adjacency::build(&g).unwrap();
        let best = min_weight_inference(&g, &adj, &[xi], &OracleLimits::default())
            .unwrap()
            .unwrap();
        assert_eq!(support_names(&g, &best), vec!["first"]);
    }

    #[test]
    fn conflicting_demands_leave_no_explanations() {
        // z needs both x1 and x2, which pin the same variable to different
        // states two levels down.
        let mut g = KnowledgeGraph::new();
        let y = g.add_variable("y", &["a", "b"]).unwrap();
        let ya = g.variable(y).inodes[0];
        let yb = g.variable(y).inodes[1];
        let x1 = {
            let v = g.add_variable("x1", &["t"]).unwrap();
            g.variable(v).inodes[0]
        };
        let x2 = {
            let v = g.add_variable("x2", &["t"]).unwrap();
            g.variable(v).inodes[0]
        };
        let z = {
            let v = g.add_variable("z", &["t"]).unwrap();
            g.variable(v).inodes[0]
        };
        g.add_support("sya", &[], ya, 1.0).unwrap();
        g.add_support("syb", &[], yb, 1.0).unwrap();
        g.add_support("sx1", &[ya], x1, 1.0).unwrap();
        g.add_support("sx2", &[yb], x2, 1.0).unwrap();
        g.add_support("sz", &[x1, x2], z, 1.0).unwrap();
        let adj = Adjacency::build(&g).unwrap();
        let all = enumerate_inferences(&g, &adj, &[z], &OracleLimits::default()).unwrap();
        assert_eq!(all, vec![]);

        // The searcher must agree that nothing explains z.
        let aug = AugmentedGraph::build(&g, &[z]).unwrap();
        let table = compute_cost_sharing(&aug).unwrap();
        let outcome = search::find_best_inferences(
            &aug,
            EdgeCosts::Shared(&table),
            1,
            &SearchLimits::default(),
            false,
        );
        assert_eq!(outcome.termination, Termination::Exhausted);
        assert!(outcome.solutions.is_empty());
    }

    #[test]
    fn step_budget_is_enforced() {
        let graph = figure3();
        let adj = Adjacency::build(&graph).unwrap();
        let i3 = graph.resolve_inode("i3").unwrap();
        let limits = OracleLimits {
            max_supports: None,
            max_steps: Some(2),
        };
        assert!(matches!(
            enumerate_inferences(&graph, &adj, &[i3], &limits),
            Err(OracleError::BudgetExhausted { .. })
        ));
    }

    #[test]
    fn support_cap_scopes_the_enumeration() {
        let graph = figure3();
        let adj = Adjacency::build(&graph).unwrap();
        let i3 = graph.resolve_inode("i3").unwrap();
        let limits = OracleLimits {
            max_supports: Some(2),
            max_steps: None,
        };
        // Every explanation of i3 takes three supports, so capping at two
        // leaves nothing.
        let all = enumerate_inferences(&graph, &adj, &[i3], &limits).unwrap();
        assert_eq!(all, vec![]);
    }

    #[test]
    fn computed_costs_audit_admissible() {
        let graph = figure3();
        let i3 = graph.resolve_inode("i3").unwrap();
        let aug = AugmentedGraph::build(&graph, &[i3]).unwrap();
        let table = compute_cost_sharing(&aug).unwrap();
        let report = audit_admissibility(
            &aug,
            EdgeCosts::Shared(&table),
            100_000,
            &OracleLimits::default(),
            1e-9,
        )
        .unwrap();
        assert_eq!(report.violations, vec![]);
        // The full space of this instance: ten states, three explanations.
        assert_eq!(report.states_checked, 10);
        assert_eq!(report.inference_count, 3);
    }

    #[test]
    fn inflated_costs_fail_the_audit() {
        let graph = figure3();
        let i3 = graph.resolve_inode("i3").unwrap();
        let aug = AugmentedGraph::build(&graph, &[i3]).unwrap();

        // A table computed for the same topology with tripled weights
        // overstates every cost; against the real graph it must lose
        // admissibility at the initial state already (9 > 7).
        let mut heavier = graph.clone();
        for s in heavier.s_nodes.iter_mut() {
            s.weight *= 3.0;
        }
        let heavy_aug = AugmentedGraph::build(&heavier, &[i3]).unwrap();
        let bad_table = compute_cost_sharing(&heavy_aug).unwrap();

        let report = audit_admissibility(
            &aug,
            EdgeCosts::Shared(&bad_table),
            100_000,
            &OracleLimits::default(),
            1e-9,
        )
        .unwrap();
        assert!(!report.violations.is_empty());
        assert_eq!(report.violations[0].state, 0);
        assert_eq!(report.violations[0].bound, 7.0);
        assert_eq!(report.violations[0].cost, 9.0);
    }

    #[test]
    fn accumulated_costs_are_trivially_admissible() {
        let graph = figure3();
        let i3 = graph.resolve_inode("i3").unwrap();
        let aug = AugmentedGraph::build(&graph, &[i3]).unwrap();
        let report = audit_admissibility(
            &aug,
            EdgeCosts::Accumulated,
            100_000,
            &OracleLimits::default(),
            1e-9,
        )
        .unwrap();
        assert_eq!(report.violations, vec![]);
    }

    #[test]
    fn state_budget_is_enforced() {
        let graph = figure3();
        let i3 = graph.resolve_inode("i3").unwrap();
        let aug = AugmentedGraph::build(&graph, &[i3]).unwrap();
        let table = compute_cost_sharing(&aug).unwrap();
        assert!(matches!(
            audit_admissibility(
                &aug,
                EdgeCosts::Shared(&table),
                3,
                &OracleLimits::default(),
                1e-9,
            ),
            Err(OracleError::StateBudgetExhausted { .. })
        ));
    }
}
