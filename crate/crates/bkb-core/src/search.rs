//! Best-first enumeration of explanations.
//!
//! The searcher walks over *cuts*: sets of edges separating the part of the
//! graph whose demand is already resolved (the evidence side) from the part
//! still owing support. A state's frontier holds three edge kinds — the
//! evidence node's outgoing dummy, real tail edges into already-chosen
//! supports, and the incoming dummy of each chosen support, which carries
//! that support's weight for the rest of the search. Expanding a state
//! picks the frontier I-nodes in the earliest component and tries each of
//! their supports in turn; a goal is reached when only support dummies
//! remain, at which point the cut cost equals the exact weight of the
//! assembled explanation.
//!
//! Under [`EdgeCosts::Shared`] frontier edges are priced by the cost-sharing
//! table, so a state's cost blends work already committed with an optimistic
//! estimate of what remains. [`EdgeCosts::Accumulated`] prices real edges at
//! zero, reducing the order to "cheapest committed weight first" — the
//! baseline the shared variant is benchmarked against. Both orderings stay
//! below the true remaining weight, so the first goal popped is optimal and
//! successive distinct goals come out in nondecreasing weight.

use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::time::Instant;

use crate::heuristic::{AugmentedGraph, CostTable};
use crate::model::{INodeId, KnowledgeGraph, SNodeId, VariableId};

/// One edge of a cut.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum CutEdge {
    /// The evidence node's outgoing dummy edge; present only until the
    /// evidence node is expanded.
    Evidence(INodeId),
    /// A real edge from a not-yet-expanded tail into a chosen support.
    Tail { tail: INodeId, support: SNodeId },
    /// The incoming dummy edge of a chosen support, carrying its weight.
    Dummy(SNodeId),
}

impl CutEdge {
    /// Renders the edge the way listings name them: `i1=t->s3`, `i3=t->*`,
    /// `*->s5`.
    pub fn describe(&self, graph: &KnowledgeGraph) -> String {
        match *self {
            CutEdge::Evidence(v) => format!("{}->*", graph.label(v)),
            CutEdge::Tail { tail, support } => {
                format!("{}->{}", graph.label(tail), graph.s_node(support).name)
            }
            CutEdge::Dummy(s) => format!("*->{}", graph.s_node(s).name),
        }
    }
}

/// How frontier edges are priced.
#[derive(Debug, Clone, Copy)]
pub enum EdgeCosts<'a> {
    /// Price edges by the cost-sharing table.
    Shared(&'a CostTable),
    /// Price only committed support weights; real edges cost nothing.
    Accumulated,
}

impl EdgeCosts<'_> {
    fn edge_cost(&self, aug: &AugmentedGraph, edge: &CutEdge) -> f64 {
        match (*self, *edge) {
            (EdgeCosts::Shared(table), CutEdge::Evidence(v)) => table.i_node_cost(v),
            (EdgeCosts::Shared(table), CutEdge::Tail { tail, .. }) => table.tail_edge_cost(tail),
            (EdgeCosts::Accumulated, CutEdge::Evidence(_) | CutEdge::Tail { .. }) => 0.0,
            (_, CutEdge::Dummy(s)) => aug.graph.weight(s),
        }
    }

    /// Sort key for trying a node's supports: most expensive first, so the
    /// cheapest lands nearest the top of a last-in-first-out tie break.
    fn support_order_key(&self, aug: &AugmentedGraph, s: SNodeId) -> f64 {
        match *self {
            EdgeCosts::Shared(table) => table.s_node_cost(s),
            EdgeCosts::Accumulated => aug.graph.weight(s),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SearchLimits {
    /// Cap on states ever created, the initial state included.
    pub max_states: Option<usize>,
    /// Wall-clock budget for the whole search.
    pub max_seconds: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// The requested number of explanations was delivered.
    FoundK,
    /// The whole space was enumerated first.
    Exhausted,
    /// The state cap was hit first.
    StateLimit,
    /// The time budget ran out first.
    TimeLimit,
}

/// A search state: one cut, plus the bookkeeping to extend it.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchState {
    pub frontier: BTreeSet<CutEdge>,
    /// I-nodes whose support has been chosen.
    pub expanded: BTreeSet<INodeId>,
    /// Supports chosen so far.
    pub chosen: BTreeSet<SNodeId>,
    /// The state each involved variable is pinned to.
    pub cells: BTreeMap<VariableId, INodeId>,
    pub cost: f64,
    pub parent: Option<usize>,
    real_edges: usize,
}

impl SearchState {
    pub fn is_goal(&self) -> bool {
        self.real_edges == 0
    }
}

/// An explanation delivered by the search, synthetic conjunction stripped.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    /// 1-based position in delivery order.
    pub rank: usize,
    /// Total weight of the chosen supports, summed fresh in id order.
    pub weight: f64,
    pub supports: Vec<SNodeId>,
    pub i_nodes: Vec<INodeId>,
    /// Index of the goal state this came from.
    pub goal_state: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchStats {
    /// Non-goal states popped and extended.
    pub expanded: usize,
    /// States ever created, the initial state included.
    pub generated: usize,
    /// Total agenda pops.
    pub popped: usize,
    /// Largest agenda size observed.
    pub peak_agenda: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TraceEvent {
    Generate {
        state: usize,
        parent: usize,
        node: INodeId,
        support: SNodeId,
        cost: f64,
    },
    Pop {
        state: usize,
        cost: f64,
        goal: bool,
    },
    Emit {
        state: usize,
        rank: usize,
        weight: f64,
    },
}

#[derive(Debug)]
pub struct SearchOutcome {
    pub solutions: Vec<Solution>,
    pub termination: Termination,
    pub stats: SearchStats,
    /// Every state created, indexed by id; parents always precede children.
    pub states: Vec<SearchState>,
    /// Filled only when tracing was requested.
    pub trace: Vec<TraceEvent>,
}

/// Agenda entry ordered so the max-heap pops the cheapest state, breaking
/// cost ties toward the most recently created state.
struct Entry {
    cost: f64,
    state: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == std::cmp::Ordering::Equal
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Entry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then(self.state.cmp(&other.state))
    }
}

/// Enumerates up to `k` distinct explanations of the evidence in
/// nondecreasing weight order.
pub fn find_best_inferences(
    aug: &AugmentedGraph,
    costs: EdgeCosts,
    k: usize,
    limits: &SearchLimits,
    collect_trace: bool,
) -> SearchOutcome {
    let started = Instant::now();
    let mut stats = SearchStats::default();
    let mut trace = Vec::new();
    let mut solutions = Vec::new();
    let mut emitted: BTreeSet<Vec<SNodeId>> = BTreeSet::new();

    let initial = {
        let mut frontier = BTreeSet::new();
        frontier.insert(CutEdge::Evidence(aug.root));
        let mut cells = BTreeMap::new();
        cells.insert(aug.graph.cell(aug.root), aug.root);
        let cost = costs.edge_cost(aug, &CutEdge::Evidence(aug.root));
        SearchState {
            frontier,
            expanded: BTreeSet::new(),
            chosen: BTreeSet::new(),
            cells,
            cost,
            parent: None,
            real_edges: 1,
        }
    };
    let mut states = vec![initial];
    stats.generated = 1;
    let mut agenda = BinaryHeap::new();
    agenda.push(Entry { cost: states[0].cost, state: 0 });
    stats.peak_agenda = 1;

    let termination = loop {
        if k == 0 || solutions.len() >= k {
            break Termination::FoundK;
        }
        if let Some(budget) = limits.max_seconds {
            if started.elapsed().as_secs_f64() > budget {
                break Termination::TimeLimit;
            }
        }
        let Some(entry) = agenda.pop() else {
            break Termination::Exhausted;
        };
        stats.popped += 1;
        let popped_id = entry.state;
        let goal = states[popped_id].is_goal();
        if collect_trace {
            trace.push(TraceEvent::Pop {
                state: popped_id,
                cost: states[popped_id].cost,
                goal,
            });
        }

        if goal {
            let solution = extract_solution(aug, &states[popped_id], popped_id, solutions.len() + 1);
            if emitted.insert(solution.supports.clone()) {
                if collect_trace {
                    trace.push(TraceEvent::Emit {
                        state: popped_id,
                        rank: solution.rank,
                        weight: solution.weight,
                    });
                }
                solutions.push(solution);
            }
            continue;
        }

        stats.expanded += 1;
        let mut hit_state_limit = false;
        for (node, support) in expansion_choices(aug, &costs, &states[popped_id]) {
            let Some(successor) = apply_choice(aug, &costs, &states[popped_id], popped_id, node, support)
            else {
                continue;
            };
            if let Some(cap) = limits.max_states {
                if states.len() >= cap {
                    hit_state_limit = true;
                    break;
                }
            }
            let id = states.len();
            if collect_trace {
                trace.push(TraceEvent::Generate {
                    state: id,
                    parent: popped_id,
                    node,
                    support,
                    cost: successor.cost,
                });
            }
            agenda.push(Entry { cost: successor.cost, state: id });
            states.push(successor);
            stats.generated += 1;
            stats.peak_agenda = stats.peak_agenda.max(agenda.len());
        }
        if hit_state_limit {
            break Termination::StateLimit;
        }
    };

    SearchOutcome {
        solutions,
        termination,
        stats,
        states,
        trace,
    }
}

/// Lists the `(node, support)` pairs a state branches over: every
/// unexpanded frontier node within the earliest component, trying supports
/// in descending price order so cost ties on the agenda resolve toward the
/// cheaper support.
fn expansion_choices(
    aug: &AugmentedGraph,
    costs: &EdgeCosts,
    state: &SearchState,
) -> Vec<(INodeId, SNodeId)> {
    let mut sources = BTreeSet::new();
    for edge in &state.frontier {
        match *edge {
            CutEdge::Evidence(v) => {
                sources.insert(v);
            }
            CutEdge::Tail { tail, .. } => {
                sources.insert(tail);
            }
            CutEdge::Dummy(_) => {}
        }
    }
    let Some(first_component) = sources
        .iter()
        .map(|&v| aug.component_of(crate::model::NodeRef::I(v)))
        .min()
    else {
        return Vec::new();
    };

    let mut choices = Vec::new();
    for &v in &sources {
        if aug.component_of(crate::model::NodeRef::I(v)) != first_component {
            continue;
        }
        debug_assert!(!state.expanded.contains(&v), "expanded node on frontier");
        let mut parents = aug.adjacency.parents(v).to_vec();
        parents.sort_by(|&a, &b| {
            costs
                .support_order_key(aug, b)
                .total_cmp(&costs.support_order_key(aug, a))
                .then(a.cmp(&b))
        });
        for u in parents {
            let blocked = aug
                .adjacency
                .tails(u)
                .iter()
                .any(|&t| t == v || state.expanded.contains(&t));
            if !blocked {
                choices.push((v, u));
            }
        }
    }
    choices
}

/// Builds the successor reached by resolving `node` through `support`, or
/// `None` when the support's tails clash with the variable states already
/// pinned.
fn apply_choice(
    aug: &AugmentedGraph,
    costs: &EdgeCosts,
    state: &SearchState,
    parent: usize,
    node: INodeId,
    support: SNodeId,
) -> Option<SearchState> {
    let tails = aug.adjacency.tails(support);
    let mut cells = state.cells.clone();
    for &t in tails {
        match cells.get(&aug.graph.cell(t)) {
            Some(&pinned) if pinned != t => return None,
            _ => {
                cells.insert(aug.graph.cell(t), t);
            }
        }
    }

    let mut frontier: BTreeSet<CutEdge> = state
        .frontier
        .iter()
        .filter(|e| match **e {
            CutEdge::Evidence(v) => v != node,
            CutEdge::Tail { tail, .. } => tail != node,
            CutEdge::Dummy(_) => true,
        })
        .copied()
        .collect();
    for &t in tails {
        frontier.insert(CutEdge::Tail {
            tail: t,
            support,
        });
    }
    frontier.insert(CutEdge::Dummy(support));

    let mut expanded = state.expanded.clone();
    expanded.insert(node);
    let mut chosen = state.chosen.clone();
    chosen.insert(support);

    // Recompute the cut cost from scratch in frontier order: the cost of a
    // state is then a pure function of the cut, independent of the path
    // that produced it.
    let mut cost = 0.0;
    let mut real_edges = 0;
    for edge in &frontier {
        cost += costs.edge_cost(aug, edge);
        if !matches!(edge, CutEdge::Dummy(_)) {
            real_edges += 1;
        }
    }

    Some(SearchState {
        frontier,
        expanded,
        chosen,
        cells,
        cost,
        parent: Some(parent),
        real_edges,
    })
}

/// Reads the explanation out of a goal state, dropping the synthetic
/// conjunction nodes if the evidence was conjoined.
fn extract_solution(
    aug: &AugmentedGraph,
    state: &SearchState,
    goal_state: usize,
    rank: usize,
) -> Solution {
    let synthetic_s = aug.synthetic.as_ref().map(|s| s.s_node);
    let synthetic_i = aug.synthetic.as_ref().map(|s| s.i_node);
    let supports: Vec<SNodeId> = state
        .chosen
        .iter()
        .copied()
        .filter(|&s| Some(s) != synthetic_s)
        .collect();
    let mut i_nodes: BTreeSet<INodeId> = aug.evidence.iter().copied().collect();
    for &s in &supports {
        i_nodes.insert(aug.adjacency.head(s));
        i_nodes.extend(aug.adjacency.tails(s).iter().copied());
    }
    debug_assert!(synthetic_i.is_none_or(|top| !i_nodes.contains(&top)));
    let weight = supports.iter().map(|&s| aug.graph.weight(s)).sum();
    Solution {
        rank,
        weight,
        supports,
        i_nodes: i_nodes.into_iter().collect(),
        goal_state,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heuristic::compute_cost_sharing;
    use crate::model::{check_inference, InferenceCandidate};
    use crate::model::{parse_bkb, Adjacency, KnowledgeGraph};

    fn figure3() -> KnowledgeGraph {
        let text = std::fs::read_to_string(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/../../fixtures/figure3.bkb"
        ))
        .unwrap();
        parse_bkb(&text).unwrap().graph
    }

    fn searcher(
        graph: &KnowledgeGraph,
        evidence: &[INodeId],
        k: usize,
        trace: bool,
    ) -> (AugmentedGraph, CostTable, SearchOutcome) {
        let aug = AugmentedGraph::build(graph, evidence).unwrap();
        let table = compute_cost_sharing(&aug).unwrap();
        let outcome = find_best_inferences(
            &aug,
            EdgeCosts::Shared(&table),
            k,
            &SearchLimits::default(),
            trace,
        );
        (aug, table, outcome)
    }

    fn support_names(graph: &KnowledgeGraph, ids: &[SNodeId]) -> Vec<String> {
        ids.iter().map(|&s| graph.s_node(s).name.clone()).collect()
    }

    #[test]
    fn worked_example_trace_is_reproduced() {
        let graph = figure3();
        let evidence = vec![graph.resolve_inode("i3").unwrap()];
        let (_aug, _table, outcome) = searcher(&graph, &evidence, 1, true);

        let pops: Vec<(usize, f64, bool)> = outcome
            .trace
            .iter()
            .filter_map(|e| match *e {
                TraceEvent::Pop { state, cost, goal } => Some((state, cost, goal)),
                _ => None,
            })
            .collect();
        assert_eq!(
            pops,
            vec![
                (0, 3.0, false),
                (1, 3.0, false),
                (5, 4.0, false),
                (3, 4.0, false),
                (7, 7.0, true),
            ]
        );
        assert_eq!(outcome.stats.expanded, 4);
        assert_eq!(outcome.stats.generated, 8);
        assert_eq!(outcome.termination, Termination::FoundK);

        let costs: Vec<f64> = outcome.states.iter().map(|s| s.cost).collect();
        assert_eq!(costs, vec![3.0, 3.0, 12.0, 4.0, 7.0, 4.0, 12.0, 7.0]);

        let best = &outcome.solutions[0];
        assert_eq!(best.weight, 7.0);
        assert_eq!(support_names(&graph, &best.supports), vec!["s2", "s4", "s5"]);
    }

    #[test]
    fn k_best_exhausts_the_three_explanations() {
        let graph = figure3();
        let evidence = vec![graph.resolve_inode("i3").unwrap()];
        let (_aug, _table, outcome) = searcher(&graph, &evidence, 5, false);
        assert_eq!(outcome.termination, Termination::Exhausted);
        let weights: Vec<f64> = outcome.solutions.iter().map(|s| s.weight).collect();
        assert_eq!(weights, vec![7.0, 12.0, 16.0]);
        // The 16-weight explanation is reachable through two expansion
        // orders; only one may be delivered.
        assert_eq!(outcome.solutions.len(), 3);
        assert_eq!(
            support_names(&graph, &outcome.solutions[1].supports),
            vec!["s1", "s3", "s5"]
        );
        assert_eq!(
            support_names(&graph, &outcome.solutions[2].supports),
            vec!["s1", "s4", "s5"]
        );
    }

    #[test]
    fn accumulated_costs_expand_more_states() {
        let graph = figure3();
        let evidence = vec![graph.resolve_inode("i3").unwrap()];
        let aug = AugmentedGraph::build(&graph, &evidence).unwrap();
        let plain = find_best_inferences(
            &aug,
            EdgeCosts::Accumulated,
            1,
            &SearchLimits::default(),
            false,
        );
        assert_eq!(plain.solutions[0].weight, 7.0);
        assert_eq!(
            support_names(&graph, &plain.solutions[0].supports),
            vec!["s2", "s4", "s5"]
        );
        // The informed search above settles this instance in 4 expansions;
        // pricing real edges at zero costs one more.
        assert_eq!(plain.stats.expanded, 5);
    }

    #[test]
    fn conjoined_evidence_solutions_check_out() {
        let graph = figure3();
        let i1 = graph.resolve_inode("i1").unwrap();
        let i2 = graph.resolve_inode("i2").unwrap();
        let (_aug, _table, outcome) = searcher(&graph, &[i1, i2], 3, false);
        let weights: Vec<f64> = outcome.solutions.iter().map(|s| s.weight).collect();
        assert_eq!(weights, vec![6.0, 11.0, 15.0]);

        let adj = Adjacency::build(&graph).unwrap();
        for solution in &outcome.solutions {
            // Everything delivered must be expressed over the original
            // graph: no synthetic ids anywhere.
            assert!(solution.i_nodes.iter().all(|v| (v.0 as usize) < 3));
            assert!(solution.supports.iter().all(|s| (s.0 as usize) < 5));
            let candidate = InferenceCandidate {
                i_nodes: solution.i_nodes.iter().copied().collect(),
                s_nodes: solution.supports.iter().copied().collect(),
            };
            let checked = check_inference(&graph, &adj, &candidate, &[i1, i2]).unwrap();
            assert_eq!(checked.weight, solution.weight);
        }
    }

    #[test]
    fn state_cap_stops_generation() {
        let graph = figure3();
        let evidence = vec![graph.resolve_inode("i3").unwrap()];
        let aug = AugmentedGraph::build(&graph, &evidence).unwrap();
        let table = compute_cost_sharing(&aug).unwrap();
        let limits = SearchLimits {
            max_states: Some(3),
            max_seconds: None,
        };
        let outcome =
            find_best_inferences(&aug, EdgeCosts::Shared(&table), 1, &limits, false);
        assert_eq!(outcome.termination, Termination::StateLimit);
        assert_eq!(outcome.stats.generated, 3);
        assert!(outcome.solutions.is_empty());
    }

    #[test]
    fn time_budget_of_zero_stops_immediately() {
        let graph = figure3();
        let evidence = vec![graph.resolve_inode("i3").unwrap()];
        let aug = AugmentedGraph::build(&graph, &evidence).unwrap();
        let table = compute_cost_sharing(&aug).unwrap();
        let limits = SearchLimits {
            max_states: None,
            max_seconds: Some(0.0),
        };
        let outcome =
            find_best_inferences(&aug, EdgeCosts::Shared(&table), 1, &limits, false);
        assert_eq!(outcome.termination, Termination::TimeLimit);
        assert_eq!(outcome.stats.popped, 0);
    }

    #[test]
    fn unreachable_evidence_exhausts_without_solutions() {
        let mut graph = KnowledgeGraph::new();
        let x = graph.add_variable("x", &["t"]).unwrap();
        let xi = graph.variable(x).inodes[0];
        let aug = AugmentedGraph::build(&graph, &[xi]).unwrap();
        let table = compute_cost_sharing(&aug).unwrap();
        let outcome = find_best_inferences(
            &aug,
            EdgeCosts::Shared(&table),
            1,
            &SearchLimits::default(),
            false,
        );
        assert_eq!(outcome.termination, Termination::Exhausted);
        assert!(outcome.solutions.is_empty());
        assert_eq!(outcome.stats.expanded, 1);
    }

    #[test]
    fn solutions_satisfy_the_inference_contract() {
        let graph = figure3();
        let i3 = graph.resolve_inode("i3").unwrap();
        let (_aug, _table, outcome) = searcher(&graph, &[i3], 3, false);
        let adj = Adjacency::build(&graph).unwrap();
        for solution in &outcome.solutions {
            let candidate = InferenceCandidate {
                i_nodes: solution.i_nodes.iter().copied().collect(),
                s_nodes: solution.supports.iter().copied().collect(),
            };
            let checked = check_inference(&graph, &adj, &candidate, &[i3]).unwrap();
            assert_eq!(checked.weight, solution.weight);
        }
    }

    #[test]
    fn cut_edges_render_in_arrow_form() {
        let graph = figure3();
        let i3 = graph.resolve_inode("i3").unwrap();
        let s5 = graph.find_support("s5").unwrap();
        let i1 = graph.resolve_inode("i1").unwrap();
        assert_eq!(CutEdge::Evidence(i3).describe(&graph), "i3=t->*");
        assert_eq!(CutEdge::Dummy(s5).describe(&graph), "*->s5");
        assert_eq!(
            CutEdge::Tail {
                tail: i1,
                support: s5
            }
            .describe(&graph),
            "i1=t->s5"
        );
    }
}
