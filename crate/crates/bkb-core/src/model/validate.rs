//! Graph-level validation.
//!
//! Checks the structural and partition rules a knowledge graph must satisfy
//! before the heuristic, search, or oracle may run on it:
//!
//! * edges connect I-nodes to S-nodes only, with no duplicates or dangling
//!   endpoints;
//! * every S-node has exactly one outgoing edge (its head);
//! * every S-node weight is strictly positive (zero permitted only when
//!   explicitly allowed, for internally generated conjunction supports);
//! * no S-node has a tail in its head's cell other than the head itself;
//! * any two tailed supports of the same I-node are mutually exclusive:
//!   some variable appears in both tails with different states. Tailless
//!   supports are unconditional and exempt from the pairwise check.

use super::{KnowledgeGraph, NodeRef};

use std::collections::BTreeSet;
use std::fmt;

#[derive(Debug, Clone, Copy, Default)]
pub struct ValidateOptions {
    /// Permit zero-weight S-nodes (negative weights are always violations).
    pub allow_zero_weights: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    DanglingEdge,
    Bipartite,
    DuplicateEdge,
    SingleHead,
    PositiveWeight,
    IRespect,
    SRespect,
}

impl Rule {
    pub fn id(self) -> &'static str {
        match self {
            Rule::DanglingEdge => "dangling-edge",
            Rule::Bipartite => "bipartite",
            Rule::DuplicateEdge => "duplicate-edge",
            Rule::SingleHead => "single-head",
            Rule::PositiveWeight => "positive-weight",
            Rule::IRespect => "i-respect",
            Rule::SRespect => "s-respect",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub rule: Rule,
    /// Display names of the offending nodes.
    pub nodes: Vec<String>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.rule.id(), self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Runs every graph-level check and reports all violations, in a
/// deterministic order.
pub fn validate(graph: &KnowledgeGraph, options: ValidateOptions) -> ValidationReport {
    let mut violations = Vec::new();
    let n_i = graph.i_nodes.len() as u32;
    let n_s = graph.s_nodes.len() as u32;

    let in_bounds = |node: NodeRef| match node {
        NodeRef::I(i) => i.0 < n_i,
        NodeRef::S(s) => s.0 < n_s,
    };

    // Edge scan: dangling endpoints, non-bipartite edges, duplicates.
    let mut seen = BTreeSet::new();
    let mut heads_of: Vec<Vec<u32>> = vec![Vec::new(); graph.s_nodes.len()];
    let mut tails_of: Vec<Vec<u32>> = vec![Vec::new(); graph.s_nodes.len()];
    for (idx, edge) in graph.edges.iter().enumerate() {
        if !in_bounds(edge.from) || !in_bounds(edge.to) {
            violations.push(Violation {
                rule: Rule::DanglingEdge,
                nodes: vec![],
                message: format!("edge #{idx} references a node outside the graph"),
            });
            continue;
        }
        match (edge.from, edge.to) {
            (NodeRef::I(i), NodeRef::S(s)) => tails_of[s.0 as usize].push(i.0),
            (NodeRef::S(s), NodeRef::I(i)) => heads_of[s.0 as usize].push(i.0),
            _ => {
                violations.push(Violation {
                    rule: Rule::Bipartite,
                    nodes: vec![
                        graph.node_name(edge.from),
                        graph.node_name(edge.to),
                    ],
                    message: format!(
                        "edge {} -> {} does not connect an I-node and an S-node",
                        graph.node_name(edge.from),
                        graph.node_name(edge.to)
                    ),
                });
                continue;
            }
        }
        if !seen.insert((edge.from, edge.to)) {
            violations.push(Violation {
                rule: Rule::DuplicateEdge,
                nodes: vec![graph.node_name(edge.from), graph.node_name(edge.to)],
                message: format!(
                    "edge {} -> {} appears more than once",
                    graph.node_name(edge.from),
                    graph.node_name(edge.to)
                ),
            });
        }
    }

    for s in graph.s_node_ids() {
        let name = &graph.s_node(s).name;
        let heads = &heads_of[s.0 as usize];
        if heads.len() != 1 {
            violations.push(Violation {
                rule: Rule::SingleHead,
                nodes: vec![name.clone()],
                message: format!(
                    "S-node {name} has {} outgoing edges; exactly one head is required",
                    heads.len()
                ),
            });
        }
        let weight = graph.weight(s);
        let positive = weight > 0.0 || (options.allow_zero_weights && weight == 0.0);
        if !positive {
            violations.push(Violation {
                rule: Rule::PositiveWeight,
                nodes: vec![name.clone()],
                message: format!("S-node {name} has nonpositive weight {weight}"),
            });
        }
        // A tail in the head's cell is only allowed when it is the head itself.
        for &head in heads {
            let head = super::INodeId(head);
            let head_cell = graph.cell(head);
            for &tail in &tails_of[s.0 as usize] {
                let tail = super::INodeId(tail);
                if tail != head && graph.cell(tail) == head_cell {
                    violations.push(Violation {
                        rule: Rule::IRespect,
                        nodes: vec![name.clone(), graph.label(tail), graph.label(head)],
                        message: format!(
                            "S-node {name} supports {} but is conditioned on {}, another state of the same variable",
                            graph.label(head),
                            graph.label(tail)
                        ),
                    });
                }
            }
        }
    }

    // Pairwise mutual exclusion between tailed supports of the same I-node.
    let mut parents: Vec<Vec<u32>> = vec![Vec::new(); graph.i_nodes.len()];
    for s in graph.s_node_ids() {
        for &head in &heads_of[s.0 as usize] {
            parents[head as usize].push(s.0);
        }
    }
    for inode in graph.i_node_ids() {
        let list = &parents[inode.0 as usize];
        for (pos, &a) in list.iter().enumerate() {
            let tails_a = &tails_of[a as usize];
            if tails_a.is_empty() {
                continue;
            }
            for &b in &list[pos + 1..] {
                let tails_b = &tails_of[b as usize];
                if tails_b.is_empty() {
                    continue;
                }
                let exclusive = tails_a.iter().any(|&ta| {
                    tails_b.iter().any(|&tb| {
                        ta != tb
                            && graph.cell(super::INodeId(ta)) == graph.cell(super::INodeId(tb))
                    })
                });
                if !exclusive {
                    let a_name = graph.s_node(super::SNodeId(a)).name.clone();
                    let b_name = graph.s_node(super::SNodeId(b)).name.clone();
                    violations.push(Violation {
                        rule: Rule::SRespect,
                        nodes: vec![graph.label(inode), a_name.clone(), b_name.clone()],
                        message: format!(
                            "supports {a_name} and {b_name} of {} are not mutually exclusive: no variable appears in both tails with different states",
                            graph.label(inode)
                        ),
                    });
                }
            }
        }
    }

    ValidationReport { violations }
}

#[cfg(test)]
mod tests {
    use super::super::{parse_bkb, NodeRef};
    use super::*;

    const FIXTURE: &str = include_str!("../../../../fixtures/figure3.bkb");

    fn rules(report: &ValidationReport) -> Vec<Rule> {
        report.violations.iter().map(|v| v.rule).collect()
    }

    #[test]
    fn fixture_is_valid() {
        let file = parse_bkb(FIXTURE).unwrap();
        let report = validate(&file.graph, ValidateOptions::default());
        assert!(report.is_valid(), "unexpected violations: {report:?}");
    }

    #[test]
    fn second_outgoing_edge_breaks_single_head() {
        let mut file = parse_bkb(FIXTURE).unwrap();
        let s1 = file.graph.find_support("s1").unwrap();
        let i2 = file.graph.resolve_inode("i2").unwrap();
        file.graph.add_edge(NodeRef::S(s1), NodeRef::I(i2));
        let report = validate(&file.graph, ValidateOptions::default());
        assert!(rules(&report).contains(&Rule::SingleHead));
    }

    #[test]
    fn tail_in_heads_cell_breaks_i_respect() {
        let text = "\
variable a x y
variable b z
support sb [] -> b=z weight 1
support sa [a=y, b=z] -> a=x weight 1
";
        let file = parse_bkb(text).unwrap();
        let report = validate(&file.graph, ValidateOptions::default());
        assert_eq!(rules(&report), vec![Rule::IRespect]);
    }

    #[test]
    fn head_as_its_own_tail_is_not_an_i_respect_violation() {
        let text = "\
variable a x
support sa [a=x] -> a=x weight 1
";
        let file = parse_bkb(text).unwrap();
        let report = validate(&file.graph, ValidateOptions::default());
        assert!(report.is_valid(), "{report:?}");
    }

    #[test]
    fn overlapping_tailed_supports_break_s_respect() {
        let text = "\
variable a x
variable b y
variable c z w
support sb [] -> b=y weight 1
support sc [] -> c=z weight 1
support s1 [b=y] -> a=x weight 1
support s2 [c=z] -> a=x weight 1
";
        let file = parse_bkb(text).unwrap();
        let report = validate(&file.graph, ValidateOptions::default());
        assert_eq!(rules(&report), vec![Rule::SRespect]);

        // Conflicting states of a shared variable make the pair exclusive.
        let text = "\
variable a x
variable c z w
support sc [] -> c=z weight 1
support sd [] -> c=w weight 1
support s1 [c=z] -> a=x weight 1
support s2 [c=w] -> a=x weight 1
";
        let file = parse_bkb(text).unwrap();
        let report = validate(&file.graph, ValidateOptions::default());
        assert!(report.is_valid(), "{report:?}");
    }

    #[test]
    fn tailless_supports_are_exempt_from_exclusion() {
        // The fixture itself relies on this: s1 (unconditional) and s2
        // (conditioned on i2) both support i1.
        let text = "\
variable a x
variable b y
support sb [] -> b=y weight 1
support s1 [] -> a=x weight 2
support s2 [b=y] -> a=x weight 1
";
        let file = parse_bkb(text).unwrap();
        let report = validate(&file.graph, ValidateOptions::default());
        assert!(report.is_valid(), "{report:?}");
    }

    #[test]
    fn nonpositive_weights_are_flagged() {
        let mut file = parse_bkb(FIXTURE).unwrap();
        let s1 = file.graph.find_support("s1").unwrap();
        file.graph.s_nodes[s1.0 as usize].weight = 0.0;
        let report = validate(&file.graph, ValidateOptions::default());
        assert_eq!(rules(&report), vec![Rule::PositiveWeight]);
        let report = validate(
            &file.graph,
            ValidateOptions {
                allow_zero_weights: true,
            },
        );
        assert!(report.is_valid());
        file.graph.s_nodes[s1.0 as usize].weight = -1.0;
        let report = validate(
            &file.graph,
            ValidateOptions {
                allow_zero_weights: true,
            },
        );
        assert_eq!(rules(&report), vec![Rule::PositiveWeight]);
    }

    #[test]
    fn non_bipartite_and_duplicate_edges_are_flagged() {
        let mut file = parse_bkb(FIXTURE).unwrap();
        let i1 = file.graph.resolve_inode("i1").unwrap();
        let i2 = file.graph.resolve_inode("i2").unwrap();
        file.graph.add_edge(NodeRef::I(i1), NodeRef::I(i2));
        let s5 = file.graph.find_support("s5").unwrap();
        file.graph.add_edge(NodeRef::I(i1), NodeRef::S(s5));
        let report = validate(&file.graph, ValidateOptions::default());
        assert!(rules(&report).contains(&Rule::Bipartite));
        assert!(rules(&report).contains(&Rule::DuplicateEdge));
    }
}
