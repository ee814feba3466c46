//! Command implementations behind the `bkb` binary.
//!
//! Each command returns the text it wants printed plus the process exit
//! code: 0 for success, 1 when validation (of the input or of a computed
//! result) fails, 2 when a search or enumeration budget ran out, and 3 for
//! I/O and parse problems. Fatal problems short-circuit as [`CliError`];
//! partial results that still deserve printing travel in [`CmdOutput`]
//! with a nonzero code.

pub mod bench;

use std::fmt::Write as _;
use std::fs;

use thiserror::Error;

use bkb_core::gen::{self, GenParams};
use bkb_core::heuristic::{
    compute_cost_sharing, compute_cost_sharing_with_programs, AugmentedGraph, CostTable,
    HeuristicError,
};
use bkb_core::model::{
    parse_bkb_with, validate, Adjacency, BkbFile, INodeId, KnowledgeGraph, NodeRef, ParseOptions,
    ValidateOptions,
};
use bkb_core::oracle::{enumerate_inferences, OracleError, OracleLimits};
use bkb_core::search::{
    find_best_inferences, EdgeCosts, SearchLimits, SearchOutcome, Solution, Termination,
    TraceEvent,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, Default)]
pub struct GlobalOpts {
    pub seed: u64,
    pub csv: bool,
    pub quiet: bool,
}

#[derive(Debug, Error)]
pub enum CliError {
    /// The input (or a computed solution) failed validation. Exit 1.
    #[error("{0}")]
    Validation(String),
    /// A budget or limit was exhausted before an answer. Exit 2.
    #[error("{0}")]
    Limits(String),
    /// File access or parsing failed. Exit 3.
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Limits(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

/// Text to print plus the exit code to end with.
#[derive(Debug, Default)]
pub struct CmdOutput {
    pub text: String,
    pub code: u8,
}

impl CmdOutput {
    fn ok(text: String) -> Self {
        CmdOutput { text, code: 0 }
    }
}

fn load_file(path: &str, allow_zero_weights: bool) -> Result<BkbFile, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{path}: {e}")))?;
    parse_bkb_with(&text, ParseOptions { allow_zero_weights })
        .map_err(|e| CliError::Io(format!("{path}: {e}")))
}

fn check_valid(graph: &KnowledgeGraph, allow_zero_weights: bool) -> Result<(), CliError> {
    let report = validate(graph, ValidateOptions { allow_zero_weights });
    if report.is_valid() {
        Ok(())
    } else {
        let mut msg = String::from("knowledge base fails validation:");
        for v in &report.violations {
            let _ = write!(msg, "\n  {v}");
        }
        Err(CliError::Validation(msg))
    }
}

/// Evidence named in the file and on the command line, in that order.
fn resolve_evidence(file: &BkbFile, args: &[String]) -> Result<Vec<INodeId>, CliError> {
    let mut evidence = file.evidence.clone();
    for arg in args {
        let node = file
            .graph
            .resolve_inode(arg)
            .map_err(|e| CliError::Validation(format!("--evidence {arg}: {e}")))?;
        evidence.push(node);
    }
    if evidence.is_empty() {
        return Err(CliError::Validation(
            "no evidence: the file declares none and no --evidence was given".into(),
        ));
    }
    Ok(evidence)
}

fn map_heuristic_error(e: HeuristicError) -> CliError {
    CliError::Validation(e.to_string())
}

fn map_oracle_error(e: OracleError) -> CliError {
    CliError::Limits(e.to_string())
}

fn evidence_labels(graph: &KnowledgeGraph, evidence: &[INodeId]) -> String {
    let labels: Vec<String> = evidence.iter().map(|&e| graph.label(e)).collect();
    labels.join(";")
}

// ---------------------------------------------------------------- validate

pub fn cmd_validate(
    path: &str,
    allow_zero_weights: bool,
    opts: &GlobalOpts,
) -> Result<CmdOutput, CliError> {
    let file = load_file(path, allow_zero_weights)?;
    let report = validate(&file.graph, ValidateOptions { allow_zero_weights });
    let g = &file.graph;
    let mut text = String::new();
    if opts.csv {
        text.push_str("rule,message\n");
        for v in &report.violations {
            let _ = writeln!(text, "{},{}", v.rule.id(), v.message);
        }
    } else if report.is_valid() {
        let _ = writeln!(
            text,
            "ok: {} variables, {} i-nodes, {} s-nodes, {} edges",
            g.variables.len(),
            g.i_nodes.len(),
            g.s_nodes.len(),
            g.edges.len()
        );
    } else {
        for v in &report.violations {
            let _ = writeln!(text, "{v}");
        }
        let _ = writeln!(text, "{} violations", report.violations.len());
    }
    Ok(CmdOutput {
        text,
        code: if report.is_valid() { 0 } else { 1 },
    })
}

// --------------------------------------------------------------- heuristic

pub fn cmd_heuristic(
    path: &str,
    evidence_args: &[String],
    tolerance: f64,
    dump_lp: bool,
    allow_zero_weights: bool,
    opts: &GlobalOpts,
) -> Result<CmdOutput, CliError> {
    let file = load_file(path, allow_zero_weights)?;
    check_valid(&file.graph, allow_zero_weights)?;
    let evidence = resolve_evidence(&file, evidence_args)?;
    let aug = AugmentedGraph::build(&file.graph, &evidence).map_err(map_heuristic_error)?;

    let mut text = String::new();
    let table = if dump_lp {
        let (table, programs) =
            compute_cost_sharing_with_programs(&aug).map_err(map_heuristic_error)?;
        for lp in &programs {
            let _ = writeln!(
                text,
                "# component {} {}",
                lp.component,
                aug.components[lp.component].describe(&aug.graph)
            );
            text.push_str(&lp.program.render_text());
            text.push('\n');
        }
        table
    } else {
        compute_cost_sharing(&aug).map_err(map_heuristic_error)?
    };
    let violations = bkb_core::heuristic::verify_cost_solution(&aug, &table, tolerance);

    // One row per node and per edge, dummies included, ordered by id.
    let g = &aug.graph;
    let mut rows: Vec<(String, &'static str, f64)> = Vec::new();
    for i in g.i_node_ids() {
        rows.push((g.label(i), "node", table.i_node_cost(i)));
    }
    for s in g.s_node_ids() {
        rows.push((g.s_node(s).name.clone(), "node", table.s_node_cost(s)));
        rows.push((format!("*->{}", g.s_node(s).name), "edge", g.weight(s)));
    }
    for edge in &g.edges {
        let (id, cost) = match (edge.from, edge.to) {
            (NodeRef::I(v), NodeRef::S(s)) => (
                format!("{}->{}", g.label(v), g.s_node(s).name),
                table.tail_edge_cost(v),
            ),
            (NodeRef::S(s), NodeRef::I(v)) => (
                format!("{}->{}", g.s_node(s).name, g.label(v)),
                table.head_edge_cost(s),
            ),
            _ => continue,
        };
        rows.push((id, "edge", cost));
    }
    rows.push((
        format!("{}->*", g.label(aug.root)),
        "edge",
        table.i_node_cost(aug.root),
    ));
    rows.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(b.1)));

    if opts.csv {
        let _ = writeln!(text, "# cap={} tolerance={}", table.cap(), tolerance);
        text.push_str("node_or_edge,id,cost\n");
        for (id, kind, cost) in &rows {
            let _ = writeln!(text, "{kind},{id},{cost}");
        }
        for v in &violations {
            let _ = writeln!(text, "# violation {}", v.message);
        }
    } else {
        let _ = writeln!(text, "cap = {}", table.cap());
        for (id, kind, cost) in &rows {
            let _ = writeln!(text, "c({id}) = {cost}  [{kind}]");
        }
        if violations.is_empty() {
            let _ = writeln!(text, "verification: ok (tolerance {tolerance})");
        } else {
            for v in &violations {
                let _ = writeln!(text, "violation: {}", v.message);
            }
            let _ = writeln!(text, "verification: {} violations", violations.len());
        }
    }
    Ok(CmdOutput {
        text,
        code: if violations.is_empty() { 0 } else { 1 },
    })
}

// ------------------------------------------------------------------- solve

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeuristicKind {
    CostSharing,
    CostSoFar,
}

impl HeuristicKind {
    pub fn name(self) -> &'static str {
        match self {
            HeuristicKind::CostSharing => "cost-sharing",
            HeuristicKind::CostSoFar => "cost-so-far",
        }
    }
}

fn termination_name(t: Termination) -> &'static str {
    match t {
        Termination::FoundK => "found-k",
        Termination::Exhausted => "exhausted",
        Termination::StateLimit => "state-limit",
        Termination::TimeLimit => "time-limit",
    }
}

fn render_solution_block(g: &KnowledgeGraph, s: &Solution, kind: &str) -> String {
    let supports: Vec<String> = s
        .supports
        .iter()
        .map(|&id| g.s_node(id).name.clone())
        .collect();
    let inodes: Vec<String> = s.i_nodes.iter().map(|&id| g.label(id)).collect();
    format!(
        "{kind} {}: weight {}\n  supports: {}\n  i-nodes: {}\n",
        s.rank,
        s.weight,
        supports.join(", "),
        inodes.join(", ")
    )
}

fn render_solution_row(g: &KnowledgeGraph, s: &Solution) -> String {
    let supports: Vec<String> = s
        .supports
        .iter()
        .map(|&id| g.s_node(id).name.clone())
        .collect();
    let inodes: Vec<String> = s.i_nodes.iter().map(|&id| g.label(id)).collect();
    format!(
        "{},{},{},{}\n",
        s.rank,
        s.weight,
        supports.join(";"),
        inodes.join(";")
    )
}

/// Table-style log of the whole search: every pop with its frontier, every
/// state generation with its cost, every emitted solution.
fn render_trace(g: &KnowledgeGraph, outcome: &SearchOutcome) -> String {
    let mut text = String::new();
    if let Some(initial) = outcome.states.first() {
        let _ = writeln!(text, "state S0 cost {}", initial.cost);
    }
    let mut iteration = 0usize;
    for event in &outcome.trace {
        match *event {
            TraceEvent::Pop { state, cost, goal } => {
                iteration += 1;
                let flag = if goal { " goal" } else { "" };
                let _ = writeln!(text, "[{iteration}] pop S{state} cost {cost}{flag}");
                let frontier: Vec<String> = outcome.states[state]
                    .frontier
                    .iter()
                    .map(|e| e.describe(g))
                    .collect();
                let _ = writeln!(text, "    frontier: {}", frontier.join(", "));
            }
            TraceEvent::Generate {
                state,
                parent,
                node,
                support,
                cost,
            } => {
                let _ = writeln!(
                    text,
                    "    S{parent} -> S{state} via {} expanding {} cost {cost}",
                    g.s_node(support).name,
                    g.label(node)
                );
            }
            TraceEvent::Emit {
                state,
                rank,
                weight,
            } => {
                let _ = writeln!(text, "emit S{state} rank {rank} weight {weight}");
            }
        }
    }
    text
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_solve(
    path: &str,
    evidence_args: &[String],
    k: usize,
    kind: HeuristicKind,
    limits: &SearchLimits,
    trace: bool,
    allow_zero_weights: bool,
    opts: &GlobalOpts,
) -> Result<CmdOutput, CliError> {
    let file = load_file(path, allow_zero_weights)?;
    check_valid(&file.graph, allow_zero_weights)?;
    let evidence = resolve_evidence(&file, evidence_args)?;
    let aug = AugmentedGraph::build(&file.graph, &evidence).map_err(map_heuristic_error)?;

    let table: Option<CostTable> = match kind {
        HeuristicKind::CostSharing => {
            Some(compute_cost_sharing(&aug).map_err(map_heuristic_error)?)
        }
        HeuristicKind::CostSoFar => None,
    };
    let costs = match &table {
        Some(t) => EdgeCosts::Shared(t),
        None => EdgeCosts::Accumulated,
    };
    let outcome = find_best_inferences(&aug, costs, k, limits, trace);

    let g = &file.graph;
    let mut text = String::new();
    if trace {
        text.push_str(&render_trace(&aug.graph, &outcome));
    }
    let stats = &outcome.stats;
    if opts.csv {
        let _ = writeln!(
            text,
            "# instance={path} evidence={} k={k} heuristic={}",
            evidence_labels(g, &evidence),
            kind.name()
        );
        text.push_str("rank,weight,supports,inodes\n");
        for s in &outcome.solutions {
            text.push_str(&render_solution_row(g, s));
        }
        let _ = writeln!(
            text,
            "# expanded={} generated={} popped={} peak={} termination={}",
            stats.expanded,
            stats.generated,
            stats.popped,
            stats.peak_agenda,
            termination_name(outcome.termination)
        );
    } else {
        for s in &outcome.solutions {
            text.push_str(&render_solution_block(g, s, "solution"));
        }
        if outcome.solutions.is_empty() {
            text.push_str("no solutions found\n");
        }
        let _ = writeln!(
            text,
            "expanded {}, generated {}, popped {}, peak agenda {}, termination {}",
            stats.expanded,
            stats.generated,
            stats.popped,
            stats.peak_agenda,
            termination_name(outcome.termination)
        );
    }
    let code = match outcome.termination {
        Termination::StateLimit | Termination::TimeLimit => 2,
        Termination::FoundK | Termination::Exhausted => 0,
    };
    Ok(CmdOutput { text, code })
}

// ------------------------------------------------------------------ oracle

pub fn cmd_oracle(
    path: &str,
    evidence_args: &[String],
    list: bool,
    limits: &OracleLimits,
    allow_zero_weights: bool,
    opts: &GlobalOpts,
) -> Result<CmdOutput, CliError> {
    let file = load_file(path, allow_zero_weights)?;
    check_valid(&file.graph, allow_zero_weights)?;
    let evidence = resolve_evidence(&file, evidence_args)?;
    let g = &file.graph;
    let adjacency = Adjacency::build(g)
        .ok_or_else(|| CliError::Validation("graph structure does not support adjacency".into()))?;

    let mut inferences =
        enumerate_inferences(g, &adjacency, &evidence, limits).map_err(map_oracle_error)?;
    inferences.sort_by(|a, b| {
        a.weight
            .total_cmp(&b.weight)
            .then_with(|| a.s_nodes.cmp(&b.s_nodes))
    });
    let total = inferences.len();
    if !list {
        inferences.truncate(1);
    }

    let mut text = String::new();
    let solutions: Vec<Solution> = inferences
        .iter()
        .enumerate()
        .map(|(idx, inf)| Solution {
            rank: idx + 1,
            weight: inf.weight,
            supports: inf.s_nodes.iter().copied().collect(),
            i_nodes: inf.i_nodes.iter().copied().collect(),
            goal_state: 0,
        })
        .collect();
    if opts.csv {
        let _ = writeln!(
            text,
            "# instance={path} evidence={} mode={}",
            evidence_labels(g, &evidence),
            if list { "list" } else { "min" }
        );
        text.push_str("rank,weight,supports,inodes\n");
        for s in &solutions {
            text.push_str(&render_solution_row(g, s));
        }
        let _ = writeln!(text, "# inferences={total}");
    } else {
        for s in &solutions {
            text.push_str(&render_solution_block(g, s, "inference"));
        }
        if solutions.is_empty() {
            text.push_str("no inferences exist for this evidence\n");
        }
        let _ = writeln!(text, "total inferences: {total}");
    }
    Ok(CmdOutput::ok(text))
}

// --------------------------------------------------------------------- gen

#[allow(clippy::too_many_arguments)]
pub fn cmd_gen(
    out_path: &str,
    params: GenParams,
    evidence_count: usize,
    force_cyclic: bool,
    opts: &GlobalOpts,
) -> Result<CmdOutput, CliError> {
    let instance = if force_cyclic {
        let template = params.clone();
        gen::cyclic_instance(
            move |seed| GenParams {
                seed,
                ..template.clone()
            },
            params.seed,
        )
    } else {
        gen::generate_instance(&params)
    };
    let instance = instance.map_err(|e| match e {
        gen::GenError::BadParams(_) => CliError::Validation(e.to_string()),
        gen::GenError::RetriesExhausted => CliError::Limits(e.to_string()),
    })?;

    let graph = instance.graph;
    let evidence = if evidence_count > 0 {
        let adjacency = Adjacency::build(&graph).ok_or_else(|| {
            CliError::Validation("generated graph does not support adjacency".into())
        })?;
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed.wrapping_add(0xE1));
        gen::sample_evidence(&graph, &adjacency, evidence_count, &mut rng)
    } else {
        Vec::new()
    };

    let file = BkbFile {
        graph: graph.clone(),
        evidence,
    };
    let serialized = bkb_core::model::serialize_bkb(&file)
        .map_err(|e| CliError::Validation(format!("serialization failed: {e}")))?;
    fs::write(out_path, &serialized).map_err(|e| CliError::Io(format!("{out_path}: {e}")))?;

    let c = instance.cycles;
    let mut text = String::new();
    if opts.csv {
        text.push_str("variables,inodes,snodes,evidence,attempted,accepted,cyclic\n");
        let _ = writeln!(
            text,
            "{},{},{},{},{},{},{}",
            graph.variables.len(),
            graph.i_nodes.len(),
            graph.s_nodes.len(),
            file.evidence.len(),
            c.attempted,
            c.accepted,
            c.has_cycle
        );
    } else {
        let _ = writeln!(
            text,
            "wrote {out_path}: {} variables, {} i-nodes, {} s-nodes, {} evidence; injection attempted {} accepted {}; cyclic {}",
            graph.variables.len(),
            graph.i_nodes.len(),
            graph.s_nodes.len(),
            file.evidence.len(),
            c.attempted,
            c.accepted,
            c.has_cycle
        );
    }
    Ok(CmdOutput::ok(text))
}
