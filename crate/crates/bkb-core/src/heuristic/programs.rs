//! Per-component linear programs for the cost equations.
//!
//! Components are processed from the sources toward the evidence, so by the
//! time a component is reached every cost outside it is known. Within a
//! component the I-node costs become LP variables; each support of such a
//! node contributes one `<=` row bounding the node by the support's weight
//! plus its tail shares (in-component tails appear with coefficient
//! `-1/k`, out-of-component tails fold into the right-hand side).
//! Maximizing the sum of the variables then drives every node up against
//! its cheapest support or the cap, which is exactly the greatest solution
//! of the min-equations: any slack entry could be raised without leaving
//! the feasible region, contradicting optimality, and the region is closed
//! under entrywise max so the optimum is unique.
//!
//! S-node costs follow directly from their tails once the component is
//! solved, and I-nodes with no supports are pinned at the cap without
//! entering any program.

use std::collections::BTreeMap;

use crate::lp::{self, Constraint, LinearProgram, LpStatus, LpVariable, Relation};
use crate::model::INodeId;

use super::{AugmentedGraph, CostTable, HeuristicError};

/// The program one component contributed, kept for diagnostics: variables
/// are the component's supported I-nodes in id order.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentLp {
    pub component: usize,
    pub variables: Vec<INodeId>,
    pub program: LinearProgram,
}

/// Solves the cost equations and returns the node costs.
pub fn compute_cost_sharing(aug: &AugmentedGraph) -> Result<CostTable, HeuristicError> {
    solve_components(aug).map(|(table, _)| table)
}

/// As [`compute_cost_sharing`], also returning each component's program for
/// inspection.
pub fn compute_cost_sharing_with_programs(
    aug: &AugmentedGraph,
) -> Result<(CostTable, Vec<ComponentLp>), HeuristicError> {
    solve_components(aug)
}

fn solve_components(
    aug: &AugmentedGraph,
) -> Result<(CostTable, Vec<ComponentLp>), HeuristicError> {
    let graph = &aug.graph;
    let adj = &aug.adjacency;
    let mut i_costs = vec![f64::NAN; graph.i_nodes.len()];
    let mut s_costs = vec![f64::NAN; graph.s_nodes.len()];
    let mut programs = Vec::new();

    for (ci, comp) in aug.components.iter().enumerate().rev() {
        let mut variables = Vec::new();
        for &v in &comp.i_nodes {
            if adj.parents(v).is_empty() {
                i_costs[v.0 as usize] = aug.cap;
            } else {
                variables.push(v);
            }
        }

        if !variables.is_empty() {
            let var_index: BTreeMap<INodeId, usize> = variables
                .iter()
                .enumerate()
                .map(|(i, &v)| (v, i))
                .collect();
            let mut program = LinearProgram {
                variables: variables
                    .iter()
                    .map(|&v| LpVariable {
                        name: format!("c[{}]", graph.label(v)),
                        upper: aug.cap,
                    })
                    .collect(),
                constraints: Vec::new(),
                objective: vec![1.0; variables.len()],
            };
            for (vi, &v) in variables.iter().enumerate() {
                let mut parents = adj.parents(v).to_vec();
                parents.sort_unstable();
                for u in parents {
                    let mut coeffs = vec![(vi, 1.0)];
                    let mut rhs = graph.weight(u);
                    for &t in adj.tails(u) {
                        let share = aug.share_divisor(t);
                        if let Some(&ti) = var_index.get(&t) {
                            coeffs.push((ti, -1.0 / share));
                        } else {
                            let cost = i_costs[t.0 as usize];
                            debug_assert!(
                                cost.is_finite(),
                                "tail {} solved out of order",
                                graph.label(t)
                            );
                            rhs += cost / share;
                        }
                    }
                    program.constraints.push(Constraint {
                        coeffs,
                        relation: Relation::Le,
                        rhs,
                    });
                }
            }

            let solution = lp::solve(&program)?;
            if solution.status != LpStatus::Optimal {
                return Err(HeuristicError::Solver {
                    component: ci,
                    status: solution.status,
                });
            }
            for (vi, &v) in variables.iter().enumerate() {
                i_costs[v.0 as usize] = solution.values[vi];
            }
            programs.push(ComponentLp {
                component: ci,
                variables,
                program,
            });
        }

        for &s in &comp.s_nodes {
            let mut cost = graph.weight(s);
            for &t in adj.tails(s) {
                cost += i_costs[t.0 as usize] / aug.share_divisor(t);
            }
            s_costs[s.0 as usize] = cost;
        }
    }

    Ok((CostTable::new(aug, i_costs, s_costs), programs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_bkb;
    use crate::model::KnowledgeGraph;

    fn figure3() -> KnowledgeGraph {
        let text = std::fs::read_to_string(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/../../fixtures/figure3.bkb"
        ))
        .unwrap();
        parse_bkb(&text).unwrap().graph
    }

    fn figure3_aug() -> AugmentedGraph {
        let graph = figure3();
        let evidence = vec![graph.resolve_inode("i3").unwrap()];
        AugmentedGraph::build(&graph, &evidence).unwrap()
    }

    #[test]
    fn figure3_costs_are_exact() {
        let aug = figure3_aug();
        let table = compute_cost_sharing(&aug).unwrap();
        let g = &aug.graph;
        let cost_i = |name: &str| table.i_node_cost(g.resolve_inode(name).unwrap());
        let cost_s = |name: &str| table.s_node_cost(g.find_support(name).unwrap());
        // The cycle splits its costs in half and settles at 2 apiece; the
        // rest follows by direct evaluation. All arithmetic is dyadic, so
        // the comparisons are exact.
        assert_eq!(cost_i("i1"), 2.0);
        assert_eq!(cost_i("i2"), 2.0);
        assert_eq!(cost_i("i3"), 3.0);
        assert_eq!(cost_s("s1"), 10.0);
        assert_eq!(cost_s("s2"), 2.0);
        assert_eq!(cost_s("s3"), 2.0);
        assert_eq!(cost_s("s4"), 5.0);
        assert_eq!(cost_s("s5"), 3.0);
    }

    #[test]
    fn figure3_edge_costs_follow_the_shares() {
        let aug = figure3_aug();
        let table = compute_cost_sharing(&aug).unwrap();
        let g = &aug.graph;
        let i = |name: &str| g.resolve_inode(name).unwrap();
        let s = |name: &str| g.find_support(name).unwrap();
        assert_eq!(table.tail_edge_cost(i("i1")), 1.0);
        assert_eq!(table.tail_edge_cost(i("i2")), 1.0);
        assert_eq!(table.head_edge_cost(s("s5")), 3.0);
        // The evidence node fans out nowhere; its full cost rides the
        // single outgoing (dummy) edge.
        assert_eq!(table.tail_edge_cost(i("i3")), 3.0);
    }

    #[test]
    fn programs_cover_exactly_the_supported_components() {
        let aug = figure3_aug();
        let (_, programs) = compute_cost_sharing_with_programs(&aug).unwrap();
        // Of the five components only {i1,i2,s2,s3} and {i3} hold supported
        // I-nodes. Programs are reported in processing order.
        assert_eq!(programs.len(), 2);
        assert_eq!(programs[0].component, 2);
        assert_eq!(programs[0].variables.len(), 2);
        assert_eq!(programs[0].program.constraints.len(), 4);
        assert_eq!(programs[1].component, 0);
        assert_eq!(programs[1].variables.len(), 1);
        let row = &programs[1].program.constraints[0];
        // By the time i3's component runs, s5's inputs are constants:
        // 1 + 2/2 + 2/2 = 3.
        assert_eq!(row.rhs, 3.0);
        assert_eq!(row.coeffs, vec![(0, 1.0)]);
    }

    #[test]
    fn cycle_rows_carry_the_half_shares() {
        let aug = figure3_aug();
        let (_, programs) = compute_cost_sharing_with_programs(&aug).unwrap();
        let cycle = &programs[0];
        // Rows for i1: its support s1 is constant 10, s2 couples to i2.
        let coupled: Vec<&Constraint> = cycle
            .program
            .constraints
            .iter()
            .filter(|c| c.coeffs.len() == 2)
            .collect();
        assert_eq!(coupled.len(), 2);
        for row in coupled {
            assert_eq!(row.rhs, 1.0);
            assert_eq!(row.coeffs[1].1, -0.5);
        }
    }

    #[test]
    fn conjoined_evidence_costs_a_third_share_each() {
        let aug = {
            let graph = figure3();
            let i1 = graph.resolve_inode("i1").unwrap();
            let i2 = graph.resolve_inode("i2").unwrap();
            AugmentedGraph::build(&graph, &[i1, i2]).unwrap()
        };
        let table = compute_cost_sharing(&aug).unwrap();
        // With the conjunction in place both cycle nodes feed three
        // variables, so the cycle equations become c = 1 + c/3 and settle
        // at 3/2 apiece; the free conjunction support then collects a
        // third of each: 1/2 + 1/2.
        let i1 = aug.graph.resolve_inode("i1").unwrap();
        assert!((table.i_node_cost(i1) - 1.5).abs() < 1e-12);
        let root_cost = table.i_node_cost(aug.root);
        assert!((root_cost - 1.0).abs() < 1e-12, "{root_cost}");
    }

    #[test]
    fn weights_reach_the_rows_unscaled() {
        // A two-node chain: evidence y supported by x, x by a source.
        let mut g = KnowledgeGraph::new();
        let x = g.add_variable("x", &["t"]).unwrap();
        let y = g.add_variable("y", &["t"]).unwrap();
        let xi = g.variable(x).inodes[0];
        let yi = g.variable(y).inodes[0];
        g.add_support("root", &[], xi, 0.5).unwrap();
        g.add_support("step", &[xi], yi, 0.25).unwrap();
        let aug = AugmentedGraph::build(&g, &[yi]).unwrap();
        let table = compute_cost_sharing(&aug).unwrap();
        assert_eq!(table.i_node_cost(xi), 0.5);
        assert_eq!(table.s_node_cost(g.find_support("step").unwrap()), 0.75);
        assert_eq!(table.i_node_cost(yi), 0.75);
    }
}
