//! Random instance generation.
//!
//! Builds layered acyclic knowledge graphs (tails only reference strictly
//! earlier variables), then optionally makes them cyclic by reversing the
//! arc pair through randomly chosen supports — swapping an S-node's head
//! with one of its tails, which is the only reversal that keeps the
//! single-head shape. Each swap is accepted only if the graph still
//! validates and rolled back otherwise. Everything is deterministic in the
//! seed.
//!
//! Mutual exclusivity between tailed supports of one I-node is arranged by
//! construction: when an I-node receives several tailed supports, they all
//! condition on a shared "discriminator" variable, each on a different
//! state. Tailless supports are unconditional and need no such care.

use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{
    validate, Adjacency, INodeId, KnowledgeGraph, NodeRef, SNodeId, ValidateOptions, VariableId,
};

#[derive(Debug, Clone, PartialEq)]
pub struct GenParams {
    pub variable_count: usize,
    /// Inclusive range of states per variable.
    pub states_per_variable: (usize, usize),
    /// Inclusive range of supports per I-node.
    pub supports_per_inode: (usize, usize),
    /// Inclusive range of tails per support; clamped by what earlier
    /// variables can provide.
    pub tail_size: (usize, usize),
    /// Inclusive range of support weights; must be positive.
    pub weight_range: (f64, f64),
    /// Arc-pair reversals to attempt after the acyclic base is built.
    pub cycle_pairs: usize,
    pub seed: u64,
}

impl GenParams {
    fn check(&self) -> Result<(), GenError> {
        let bad = |what: &str| Err(GenError::BadParams(what.to_string()));
        if self.variable_count == 0 {
            return bad("variable_count must be at least 1");
        }
        if self.states_per_variable.0 < 1 || self.states_per_variable.0 > self.states_per_variable.1
        {
            return bad("states_per_variable range is empty");
        }
        if self.supports_per_inode.0 < 1 || self.supports_per_inode.0 > self.supports_per_inode.1 {
            return bad("supports_per_inode range is empty");
        }
        if self.tail_size.0 > self.tail_size.1 {
            return bad("tail_size range is empty");
        }
        let (wlo, whi) = self.weight_range;
        if !(wlo.is_finite() && whi.is_finite() && 0.0 < wlo && wlo <= whi) {
            return bad("weight_range must be positive and nonempty");
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GenError {
    #[error("invalid generation parameters: {0}")]
    BadParams(String),
    #[error("generation retry budget exhausted")]
    RetriesExhausted,
}

/// What cycle injection did to a graph.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CycleReport {
    /// Reversals tried.
    pub attempted: usize,
    /// Reversals that survived validation.
    pub accepted: usize,
    /// Whether the final graph contains a directed cycle.
    pub has_cycle: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedInstance {
    pub graph: KnowledgeGraph,
    pub cycles: CycleReport,
}

/// Generates a random acyclic knowledge graph. Deterministic in
/// `params.seed`; the result always passes `validate`.
pub fn generate(params: &GenParams) -> Result<KnowledgeGraph, GenError> {
    params.check()?;
    for attempt in 0..8u64 {
        let graph = build_layered(params, derive_seed(params.seed, attempt));
        if let Ok(graph) = graph {
            if validate(&graph, ValidateOptions::default()).is_valid() {
                return Ok(graph);
            }
        }
    }
    Err(GenError::RetriesExhausted)
}

/// Generates the acyclic base and then injects cycles per
/// `params.cycle_pairs`.
pub fn generate_instance(params: &GenParams) -> Result<GeneratedInstance, GenError> {
    let base = generate(params)?;
    let (graph, cycles) = inject_cycles(&base, params.cycle_pairs, derive_seed(params.seed, 0xCC));
    Ok(GeneratedInstance { graph, cycles })
}

fn derive_seed(seed: u64, salt: u64) -> u64 {
    // SplitMix64 step keeps derived streams well separated.
    let mut z = seed.wrapping_add(salt.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn build_layered(params: &GenParams, seed: u64) -> Result<KnowledgeGraph, GenError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut graph = KnowledgeGraph::new();
    let oops = |_| GenError::BadParams("construction produced a malformed graph".into());

    for vi in 0..params.variable_count {
        let n_states =
            rng.random_range(params.states_per_variable.0..=params.states_per_variable.1);
        let states: Vec<String> = (0..n_states).map(|k| format!("s{k}")).collect();
        graph.add_variable(&format!("v{vi}"), &states).map_err(oops)?;
    }

    let mut support_counter = 0usize;
    for vi in 0..params.variable_count {
        let var = VariableId(vi as u32);
        let inodes = graph.variable(var).inodes.clone();
        for head in inodes {
            let n_sup =
                rng.random_range(params.supports_per_inode.0..=params.supports_per_inode.1);
            let plan = plan_supports(&graph, params, vi, n_sup, &mut rng);
            for tails in plan {
                let name = format!("u{support_counter}");
                support_counter += 1;
                let weight = rng.random_range(params.weight_range.0..=params.weight_range.1);
                graph.add_support(&name, &tails, head, weight).map_err(oops)?;
            }
        }
    }
    Ok(graph)
}

/// Decides the tail sets for one I-node's supports. Multiple tailed
/// supports all condition on one discriminator variable with pairwise
/// distinct states so they stay mutually exclusive; when no earlier
/// variable has enough states, the surplus collapses to a single tailless
/// support.
fn plan_supports(
    graph: &KnowledgeGraph,
    params: &GenParams,
    vi: usize,
    n_sup: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<INodeId>> {
    let (tail_lo, tail_hi) = params.tail_size;
    if vi == 0 || tail_hi == 0 {
        // No earlier variables to condition on (or tails disallowed):
        // everything is a root support, exempt from the exclusivity rule.
        return vec![Vec::new(); n_sup];
    }

    let sample_size = |rng: &mut ChaCha8Rng| rng.random_range(tail_lo..=tail_hi);
    let mut plan = Vec::new();

    if n_sup == 1 {
        plan.push(random_tails(graph, vi, sample_size(rng), None, rng));
        return plan;
    }

    let discriminators: Vec<usize> = (0..vi)
        .filter(|&d| graph.variable(VariableId(d as u32)).states.len() >= 2)
        .collect();
    match discriminators.choose(rng) {
        Some(&d) => {
            let d_var = VariableId(d as u32);
            let d_inodes = &graph.variable(d_var).inodes;
            let tailed = n_sup.min(d_inodes.len());
            let mut states: Vec<INodeId> = d_inodes.clone();
            states.shuffle(rng);
            for &pin in states.iter().take(tailed) {
                // The discriminator tail is mandatory, so the sampled size
                // is raised to at least one.
                let size = sample_size(rng).max(1);
                let mut tails = random_tails(graph, vi, size - 1, Some(d), rng);
                tails.insert(0, pin);
                plan.push(tails);
            }
            if tailed < n_sup {
                plan.push(Vec::new());
            }
        }
        None => {
            // All earlier variables are single-state: only one tailed
            // support can exist; give the head one unconditional fallback.
            plan.push(random_tails(graph, vi, sample_size(rng), None, rng));
            plan.push(Vec::new());
        }
    }
    plan
}

/// Picks tails from up to `count` distinct variables strictly before `vi`,
/// optionally excluding one, with a uniformly random state for each.
fn random_tails(
    graph: &KnowledgeGraph,
    vi: usize,
    count: usize,
    exclude: Option<usize>,
    rng: &mut ChaCha8Rng,
) -> Vec<INodeId> {
    let mut pool: Vec<usize> = (0..vi).filter(|&d| Some(d) != exclude).collect();
    pool.shuffle(rng);
    pool.truncate(count);
    pool.sort_unstable();
    pool.into_iter()
        .map(|d| {
            let inodes = &graph.variable(VariableId(d as u32)).inodes;
            *inodes.choose(rng).expect("variables always have states")
        })
        .collect()
}

/// Reverses up to `pairs` arc pairs: each attempt picks a random tailed
/// S-node and one of its tails and swaps that tail with the head. Swaps
/// that break validation roll back. The report says how many attempts were
/// made, how many stuck, and whether the result is cyclic.
pub fn inject_cycles(
    graph: &KnowledgeGraph,
    pairs: usize,
    seed: u64,
) -> (KnowledgeGraph, CycleReport) {
    let mut g = graph.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = CycleReport::default();

    for _ in 0..pairs {
        let Some(adj) = Adjacency::build(&g) else {
            break;
        };
        let candidates: Vec<SNodeId> = g
            .s_node_ids()
            .filter(|&s| !adj.tails(s).is_empty())
            .collect();
        let Some(&s) = candidates.choose(&mut rng) else {
            break;
        };
        let &tail = adj.tails(s).choose(&mut rng).expect("candidate has tails");
        let head = adj.head(s);
        report.attempted += 1;

        swap_head_and_tail(&mut g, s, head, tail);
        if validate(&g, ValidateOptions::default()).is_valid() {
            report.accepted += 1;
        } else {
            swap_head_and_tail(&mut g, s, tail, head);
        }
    }
    report.has_cycle = has_cycle(&g);
    (g, report)
}

/// Rewrites the two arcs through `s`: the tail edge `tail -> s` becomes
/// `head -> s` and the head edge `s -> head` becomes `s -> tail`.
fn swap_head_and_tail(g: &mut KnowledgeGraph, s: SNodeId, head: INodeId, tail: INodeId) {
    for edge in g.edges.iter_mut() {
        if edge.from == NodeRef::I(tail) && edge.to == NodeRef::S(s) {
            edge.from = NodeRef::I(head);
        } else if edge.from == NodeRef::S(s) && edge.to == NodeRef::I(head) {
            edge.to = NodeRef::I(tail);
        }
    }
}

/// Directed-cycle test over the bipartite graph (Kahn's algorithm: a cycle
/// exists iff peeling sources never empties the graph).
pub fn has_cycle(graph: &KnowledgeGraph) -> bool {
    let n_i = graph.i_nodes.len();
    let n = n_i + graph.s_nodes.len();
    let index = |node: NodeRef| match node {
        NodeRef::I(i) => i.0 as usize,
        NodeRef::S(s) => n_i + s.0 as usize,
    };
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut indegree = vec![0usize; n];
    for edge in &graph.edges {
        out[index(edge.from)].push(index(edge.to));
        indegree[index(edge.to)] += 1;
    }
    let mut queue: Vec<usize> = (0..n).filter(|&x| indegree[x] == 0).collect();
    let mut peeled = 0;
    while let Some(x) = queue.pop() {
        peeled += 1;
        for &y in &out[x] {
            indegree[y] -= 1;
            if indegree[y] == 0 {
                queue.push(y);
            }
        }
    }
    peeled < n
}

/// I-nodes derivable from root supports alone: the least fixpoint of
/// "some support's tails are all derivable". Evidence drawn from this set
/// is never trivially unexplainable.
pub fn supportable_evidence(graph: &KnowledgeGraph, adjacency: &Adjacency) -> Vec<INodeId> {
    let mut derivable = vec![false; graph.i_nodes.len()];
    loop {
        let mut changed = false;
        for s in graph.s_node_ids() {
            let head = adjacency.head(s);
            if !derivable[head.0 as usize]
                && adjacency.tails(s).iter().all(|t| derivable[t.0 as usize])
            {
                derivable[head.0 as usize] = true;
                changed = true;
            }
        }
        if !changed {
            return graph
                .i_node_ids()
                .filter(|i| derivable[i.0 as usize])
                .collect();
        }
    }
}

/// A random consistent assignment that is derivable as a whole: variables
/// are processed in declaration order with states tried in random order,
/// and a state joins when some support's tails already all belong to the
/// assignment. Because tails then only reference earlier variables, the
/// chosen supports form one acyclic, consistent inference — so every
/// subset of the returned nodes is jointly explainable.
pub fn consistent_assignment(
    graph: &KnowledgeGraph,
    adjacency: &Adjacency,
    rng: &mut ChaCha8Rng,
) -> Vec<INodeId> {
    let mut assigned: BTreeSet<INodeId> = BTreeSet::new();
    for var in 0..graph.variables.len() {
        let mut inodes = graph.variable(VariableId(var as u32)).inodes.clone();
        inodes.shuffle(rng);
        'states: for x in inodes {
            for &s in adjacency.parents(x) {
                if adjacency.tails(s).iter().all(|t| assigned.contains(t)) {
                    assigned.insert(x);
                    break 'states;
                }
            }
        }
    }
    assigned.into_iter().collect()
}

/// Samples up to `count` I-nodes with pairwise distinct variables,
/// uniformly from a random consistent derivable assignment, so the picked
/// evidence always has at least one joint explanation. Returned sorted by
/// id; may return fewer when the graph cannot supply that many.
pub fn sample_evidence(
    graph: &KnowledgeGraph,
    adjacency: &Adjacency,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<INodeId> {
    let mut pool = consistent_assignment(graph, adjacency, rng);
    pool.shuffle(rng);
    pool.truncate(count);
    pool.sort_unstable();
    pool
}

/// Small cyclic instances: at most 6 variables of 1–2 states with 1–2
/// supports each, so no more than 12 I-nodes and 24 S-nodes.
pub fn desk_params(seed: u64) -> GenParams {
    GenParams {
        variable_count: 6,
        states_per_variable: (1, 2),
        supports_per_inode: (1, 2),
        tail_size: (0, 2),
        weight_range: (0.5, 8.0),
        cycle_pairs: 3,
        seed,
    }
}

/// Benchmark-sized instances: exactly 100 I-nodes and 200 S-nodes.
pub fn bench_params(seed: u64) -> GenParams {
    GenParams {
        variable_count: 50,
        states_per_variable: (2, 2),
        supports_per_inode: (2, 2),
        tail_size: (1, 3),
        weight_range: (0.5, 8.0),
        cycle_pairs: 8,
        seed,
    }
}

/// An instance from the given profile guaranteed to contain a directed
/// cycle, found by retrying derived seeds until injection takes hold.
pub fn cyclic_instance<F>(profile: F, seed: u64) -> Result<GeneratedInstance, GenError>
where
    F: Fn(u64) -> GenParams,
{
    for attempt in 0..64u64 {
        let params = profile(derive_seed(seed, attempt.wrapping_mul(2).wrapping_add(1)));
        let instance = generate_instance(&params)?;
        if instance.cycles.has_cycle {
            return Ok(instance);
        }
    }
    Err(GenError::RetriesExhausted)
}

/// A desk-scale instance guaranteed to contain a directed cycle.
pub fn cyclic_desk_instance(seed: u64) -> Result<GeneratedInstance, GenError> {
    cyclic_instance(desk_params, seed)
}

/// A benchmark-scale instance guaranteed to contain a directed cycle.
pub fn cyclic_bench_instance(seed: u64) -> Result<GeneratedInstance, GenError> {
    cyclic_instance(bench_params, seed)
}
