//! Benchmark harness: generates a suite of cyclic instances, runs both
//! heuristics on each with identical limits, and reports one CSV row per
//! (instance, heuristic) plus a summary — solve counts, median expansion
//! counts and their ratio, and a problems-solved-versus-cumulative-time
//! curve per heuristic.
//!
//! Wall-clock columns are measurements and naturally vary run to run;
//! every other column is deterministic in the suite seed.

use std::fmt::Write as _;
use std::time::Instant;

use bkb_core::gen::{self, GenParams};
use bkb_core::heuristic::{compute_cost_sharing, AugmentedGraph};
use bkb_core::model::Adjacency;
use bkb_core::search::{find_best_inferences, EdgeCosts, SearchLimits};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::HeuristicKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    Desk,
    Bench,
}

impl Profile {
    pub fn name(self) -> &'static str {
        match self {
            Profile::Desk => "desk",
            Profile::Bench => "bench",
        }
    }

    fn params(self) -> fn(u64) -> GenParams {
        match self {
            Profile::Desk => gen::desk_params,
            Profile::Bench => gen::bench_params,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub instances: usize,
    pub profile: Profile,
    pub evidence_count: usize,
    pub k: usize,
    pub limits: SearchLimits,
    pub seed: u64,
}

/// One run of one heuristic on one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub instance: usize,
    pub seed: u64,
    pub heuristic: &'static str,
    pub solved: bool,
    /// First-solution weight, when solved.
    pub weight: Option<f64>,
    pub expansions: usize,
    pub generated: usize,
    pub wall_ms: f64,
    pub precompute_ms: f64,
    pub largest_scc: usize,
}

pub const CSV_HEADER: &str =
    "instance,seed,heuristic,solved,weight,expansions,generated,wall_ms,precompute_ms,largest_scc";

impl BenchRecord {
    pub fn csv_row(&self) -> String {
        let weight = match self.weight {
            Some(w) => format!("{w}"),
            None => String::new(),
        };
        format!(
            "{},{},{},{},{},{},{},{:.3},{:.3},{}",
            self.instance,
            self.seed,
            self.heuristic,
            self.solved,
            weight,
            self.expansions,
            self.generated,
            self.wall_ms,
            self.precompute_ms,
            self.largest_scc
        )
    }

    fn failed(instance: usize, seed: u64, heuristic: &'static str) -> Self {
        BenchRecord {
            instance,
            seed,
            heuristic,
            solved: false,
            weight: None,
            expansions: 0,
            generated: 0,
            wall_ms: 0.0,
            precompute_ms: 0.0,
            largest_scc: 0,
        }
    }
}

/// Runs the whole suite sequentially. Per-instance failures (no evidence,
/// no cost table) turn into unsolved rows; nothing aborts the suite.
pub fn run_benchmark(config: &BenchConfig) -> Vec<BenchRecord> {
    let mut records = Vec::new();
    for idx in 0..config.instances {
        let seed = config.seed.wrapping_add(idx as u64);
        records.extend(run_instance(config, idx, seed));
    }
    records
}

fn run_instance(config: &BenchConfig, idx: usize, seed: u64) -> Vec<BenchRecord> {
    let both_failed = |_: &str| {
        vec![
            BenchRecord::failed(idx, seed, HeuristicKind::CostSharing.name()),
            BenchRecord::failed(idx, seed, HeuristicKind::CostSoFar.name()),
        ]
    };

    let Ok(instance) = gen::cyclic_instance(config.profile.params(), seed) else {
        return both_failed("generation");
    };
    let graph = &instance.graph;
    let Some(adjacency) = Adjacency::build(graph) else {
        return both_failed("adjacency");
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ EVIDENCE_SALT);
    let evidence = gen::sample_evidence(graph, &adjacency, config.evidence_count, &mut rng);
    if evidence.is_empty() {
        return both_failed("evidence");
    }
    let Ok(aug) = AugmentedGraph::build(graph, &evidence) else {
        return both_failed("augment");
    };
    let largest_scc = aug
        .components
        .iter()
        .map(|c| c.node_count())
        .max()
        .unwrap_or(0);

    let mut out = Vec::new();
    for kind in [HeuristicKind::CostSharing, HeuristicKind::CostSoFar] {
        let started = Instant::now();
        let (table, precompute_ms) = match kind {
            HeuristicKind::CostSharing => match compute_cost_sharing(&aug) {
                Ok(t) => (Some(t), started.elapsed().as_secs_f64() * 1e3),
                Err(_) => {
                    out.push(BenchRecord {
                        largest_scc,
                        ..BenchRecord::failed(idx, seed, kind.name())
                    });
                    continue;
                }
            },
            HeuristicKind::CostSoFar => (None, 0.0),
        };
        let costs = match &table {
            Some(t) => EdgeCosts::Shared(t),
            None => EdgeCosts::Accumulated,
        };
        let outcome = find_best_inferences(&aug, costs, config.k, &config.limits, false);
        let wall_ms = started.elapsed().as_secs_f64() * 1e3;
        out.push(BenchRecord {
            instance: idx,
            seed,
            heuristic: kind.name(),
            solved: !outcome.solutions.is_empty(),
            weight: outcome.solutions.first().map(|s| s.weight),
            expansions: outcome.stats.expanded,
            generated: outcome.stats.generated,
            wall_ms,
            precompute_ms,
            largest_scc,
        });
    }
    out
}

/// Salt separating the evidence-sampling stream from instance generation.
const EVIDENCE_SALT: u64 = 0xE71D;

fn median(values: &mut Vec<f64>) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Per-heuristic aggregates plus the solved-versus-cumulative-time curves,
/// rendered as `#`-prefixed comment lines that ride along in the CSV.
pub fn render_summary(records: &[BenchRecord]) -> String {
    let mut text = String::new();
    for kind in [HeuristicKind::CostSharing, HeuristicKind::CostSoFar] {
        let rows: Vec<&BenchRecord> = records
            .iter()
            .filter(|r| r.heuristic == kind.name())
            .collect();
        let solved = rows.iter().filter(|r| r.solved).count();
        let mut expansions: Vec<f64> = rows.iter().map(|r| r.expansions as f64).collect();
        let _ = writeln!(
            text,
            "# summary heuristic={} solved={}/{} median_expansions={}",
            kind.name(),
            solved,
            rows.len(),
            median(&mut expansions)
        );
    }

    // Expansion ratio, instance by instance, where both heuristics ran.
    let mut ratios = Vec::new();
    let sharing: Vec<&BenchRecord> = records
        .iter()
        .filter(|r| r.heuristic == HeuristicKind::CostSharing.name())
        .collect();
    for a in sharing {
        if let Some(b) = records.iter().find(|r| {
            r.instance == a.instance && r.heuristic == HeuristicKind::CostSoFar.name()
        }) {
            if b.expansions > 0 {
                ratios.push(a.expansions as f64 / b.expansions as f64);
            }
        }
    }
    let _ = writeln!(
        text,
        "# median-expansion-ratio {}",
        median(&mut ratios)
    );

    for kind in [HeuristicKind::CostSharing, HeuristicKind::CostSoFar] {
        let mut times: Vec<f64> = records
            .iter()
            .filter(|r| r.heuristic == kind.name() && r.solved)
            .map(|r| r.wall_ms)
            .collect();
        times.sort_by(f64::total_cmp);
        let mut cumulative = 0.0;
        let points: Vec<String> = times
            .iter()
            .enumerate()
            .map(|(i, t)| {
                cumulative += t;
                format!("{}@{:.3}ms", i + 1, cumulative)
            })
            .collect();
        let _ = writeln!(
            text,
            "# curve heuristic={} {}",
            kind.name(),
            points.join(" ")
        );
    }
    text
}
