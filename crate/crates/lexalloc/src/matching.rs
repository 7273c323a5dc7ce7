//! Matchings, blocking-pair detection, stability checks, and exhaustive
//! enumeration of the matching space.
//!
//! A matching assigns each task to at most one agent and each agent a
//! feasible task set. Stability reduces to the absence of blocking
//! agent-task pairs; the pair test sorts M(a) ∪ {t} by the agent's
//! preference and checks feasibility of the prefix ending at t, which is
//! kept as an auditable witness.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::Deserialize;
use thiserror::Error;

use crate::instance::Instance;
use crate::lextree::{self, LexTree, TreeError, TreeLimits};

#[derive(Debug, Error)]
pub enum MatchingError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("task `{0}` is assigned to more than one agent")]
    TaskMultiplyAssigned(String),
    #[error("allocation for agent `{0}` is not feasible")]
    InfeasibleAgentAllocation(String),
    #[error("pair ({0}, {1}) is not acceptable")]
    NotAcceptable(String, String),
    #[error("pair ({0}, {1}) is already matched")]
    AlreadyMatched(String, String),
}

/// A task-to-agent association satisfying the matching conditions: each
/// task assigned at most once and each agent's match feasible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matching {
    /// Per agent: M(a), task indices sorted ascending.
    by_agent: Vec<Vec<usize>>,
    /// Per task: the assigned agent, if any.
    by_task: Vec<Option<usize>>,
}

#[derive(Debug, Deserialize)]
struct MatchingDoc {
    matches: BTreeMap<String, Vec<String>>,
}

impl Matching {
    pub fn empty(inst: &Instance) -> Matching {
        Matching {
            by_agent: vec![Vec::new(); inst.agent_count()],
            by_task: vec![None; inst.task_count()],
        }
    }

    /// Builds a matching from per-agent allocations, enforcing the matching
    /// conditions.
    pub fn new(inst: &Instance, mut by_agent: Vec<Vec<usize>>) -> Result<Matching, MatchingError> {
        assert_eq!(by_agent.len(), inst.agent_count());
        let mut by_task = vec![None; inst.task_count()];
        for (a, tasks) in by_agent.iter_mut().enumerate() {
            tasks.sort_unstable();
            tasks.dedup();
            for &t in tasks.iter() {
                if by_task[t].is_some() {
                    return Err(MatchingError::TaskMultiplyAssigned(
                        inst.task_name(t).to_string(),
                    ));
                }
                by_task[t] = Some(a);
            }
            if !inst.feasible(a, tasks) {
                return Err(MatchingError::InfeasibleAgentAllocation(
                    inst.agent_name(a).to_string(),
                ));
            }
        }
        Ok(Matching { by_agent, by_task })
    }

    /// Parses the matching file format `{"matches": {agent: [task, ...]}}`.
    /// Unlisted agents are unassigned.
    pub fn parse(text: &str, inst: &Instance) -> Result<Matching, MatchingError> {
        let doc: MatchingDoc =
            serde_json::from_str(text).map_err(|e| MatchingError::Schema(e.to_string()))?;
        let mut by_agent = vec![Vec::new(); inst.agent_count()];
        for (agent, tasks) in doc.matches {
            let a = inst
                .agent_id(&agent)
                .ok_or_else(|| MatchingError::Schema(format!("unknown agent `{agent}`")))?;
            for task in tasks {
                let t = inst
                    .task_id(&task)
                    .ok_or_else(|| MatchingError::Schema(format!("unknown task `{task}`")))?;
                by_agent[a].push(t);
            }
        }
        Matching::new(inst, by_agent)
    }

    /// M(a), sorted by task index.
    pub fn agent_tasks(&self, a: usize) -> &[usize] {
        &self.by_agent[a]
    }

    /// M(t).
    pub fn task_agent(&self, t: usize) -> Option<usize> {
        self.by_task[t]
    }

    pub fn contains_pair(&self, a: usize, t: usize) -> bool {
        self.by_task[t] == Some(a)
    }

    pub fn assigned_task_count(&self) -> usize {
        self.by_task.iter().filter(|x| x.is_some()).count()
    }

    pub fn to_json(&self, inst: &Instance) -> String {
        let matches: BTreeMap<String, Vec<String>> = (0..inst.agent_count())
            .filter(|&a| !self.by_agent[a].is_empty())
            .map(|a| {
                (
                    inst.agent_name(a).to_string(),
                    self.by_agent[a]
                        .iter()
                        .map(|&t| inst.task_name(t).to_string())
                        .collect(),
                )
            })
            .collect();
        serde_json::to_string(&serde_json::json!({ "matches": matches })).unwrap()
    }
}

/// A blocking pair with its certifying prefix ŝ of M(a) ∪ {t}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockingPair {
    pub agent: usize,
    pub task: usize,
    /// Preference-sorted prefix of M(a) ∪ {t} ending at t; feasible for the
    /// agent and containing t.
    pub witness: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub stable: bool,
    pub blocking_pairs: Vec<BlockingPair>,
}

impl StabilityReport {
    pub fn to_json(&self, inst: &Instance) -> String {
        let pairs: Vec<serde_json::Value> = self
            .blocking_pairs
            .iter()
            .map(|bp| {
                serde_json::json!({
                    "agent": inst.agent_name(bp.agent),
                    "task": inst.task_name(bp.task),
                    "witness": bp.witness.iter().map(|&t| inst.task_name(t)).collect::<Vec<_>>(),
                })
            })
            .collect();
        serde_json::to_string(&serde_json::json!({
            "stable": self.stable,
            "blocking_pairs": pairs,
        }))
        .unwrap()
    }
}

/// Individual rationality: Ch(x, M(x)) = M(x) for every participant. Holds
/// for every valid matching; kept as an executable theorem check.
pub fn is_individually_rational(inst: &Instance, m: &Matching) -> bool {
    for a in 0..inst.agent_count() {
        let mut chosen = lextree::choice(inst, a, m.agent_tasks(a));
        chosen.sort_unstable();
        if chosen != m.agent_tasks(a) {
            return false;
        }
    }
    for t in 0..inst.task_count() {
        let current: Vec<usize> = m.task_agent(t).into_iter().collect();
        if lextree::task_choice(inst, t, &current) != m.task_agent(t) {
            return false;
        }
    }
    true
}

/// Tests whether (a, t) blocks `m`. Requires (a, t) ∈ E and (a, t) ∉ M.
pub fn is_blocking_pair(
    inst: &Instance,
    m: &Matching,
    a: usize,
    t: usize,
) -> Result<Option<BlockingPair>, MatchingError> {
    if inst.agent_pref_pos(a, t).is_none() {
        return Err(MatchingError::NotAcceptable(
            inst.agent_name(a).to_string(),
            inst.task_name(t).to_string(),
        ));
    }
    if m.contains_pair(a, t) {
        return Err(MatchingError::AlreadyMatched(
            inst.agent_name(a).to_string(),
            inst.task_name(t).to_string(),
        ));
    }
    Ok(blocking_pair_unchecked(inst, m, a, t))
}

/// Pair test without precondition checks; used by the stability scan.
fn blocking_pair_unchecked(
    inst: &Instance,
    m: &Matching,
    a: usize,
    t: usize,
) -> Option<BlockingPair> {
    // Task side: t unassigned, or t prefers a to its current match.
    if let Some(current) = m.task_agent(t) {
        let pos_a = inst.task_pref_pos(t, a)?;
        let pos_cur = inst
            .task_pref_pos(t, current)
            .expect("valid matching assigns acceptable agents");
        if pos_a >= pos_cur {
            return None;
        }
    }
    // Agent side: the preference-sorted prefix of M(a) ∪ {t} ending at t
    // must be feasible.
    let t_pos = inst.agent_pref_pos(a, t).expect("pair is acceptable");
    let mut witness: Vec<usize> = m
        .agent_tasks(a)
        .iter()
        .copied()
        .filter(|&u| inst.agent_pref_pos(a, u).expect("match is acceptable") < t_pos)
        .collect();
    witness.push(t);
    witness.sort_by_key(|&u| inst.agent_pref_pos(a, u).unwrap());
    if inst.feasible(a, &witness) {
        Some(BlockingPair {
            agent: a,
            task: t,
            witness,
        })
    } else {
        None
    }
}

/// Scans every acceptable unmatched pair in canonical order (agents then
/// tasks in declaration order) and reports all blocking pairs.
pub fn check_stability(inst: &Instance, m: &Matching) -> StabilityReport {
    let mut blocking_pairs = Vec::new();
    for a in 0..inst.agent_count() {
        for t in 0..inst.task_count() {
            if !inst.accepts(a, t) || m.contains_pair(a, t) {
                continue;
            }
            if let Some(bp) = blocking_pair_unchecked(inst, m, a, t) {
                blocking_pairs.push(bp);
            }
        }
    }
    StabilityReport {
        stable: blocking_pairs.is_empty(),
        blocking_pairs,
    }
}

/// Streams every valid matching exactly once: one tree node per agent
/// (agents in declaration order, nodes in rank order), filtered for
/// task-disjointness.
pub struct MatchingEnumerator {
    /// Per agent: allocations in rank order (most preferred first).
    allocations: Vec<Vec<Vec<usize>>>,
    task_count: usize,
    /// Odometer over allocation indices; `None` once exhausted.
    cursor: Option<Vec<usize>>,
}

impl MatchingEnumerator {
    /// Total number of node combinations (valid or not).
    pub fn combination_count(&self) -> u128 {
        self.allocations
            .iter()
            .map(|nodes| nodes.len() as u128)
            .product()
    }
}

pub fn enumerate_matchings(
    inst: &Instance,
    limits: &TreeLimits,
) -> Result<MatchingEnumerator, TreeError> {
    let mut allocations = Vec::with_capacity(inst.agent_count());
    for a in 0..inst.agent_count() {
        let tree = lextree::build_tree(inst, a, limits)?;
        let allocs: Vec<Vec<usize>> = tree
            .nodes_by_rank()
            .map(|n| {
                let mut tasks = n.path.clone();
                tasks.sort_unstable();
                tasks
            })
            .collect();
        allocations.push(allocs);
    }
    let cursor = if allocations.iter().all(|a| !a.is_empty()) {
        Some(vec![0; allocations.len()])
    } else {
        None
    };
    Ok(MatchingEnumerator {
        allocations,
        task_count: inst.task_count(),
        cursor,
    })
}

impl Iterator for MatchingEnumerator {
    type Item = Matching;

    fn next(&mut self) -> Option<Matching> {
        loop {
            let cursor = self.cursor.as_ref()?.clone();
            let result = self.build(&cursor);
            self.advance();
            if result.is_some() {
                return result;
            }
        }
    }
}

impl MatchingEnumerator {
    fn build(&self, cursor: &[usize]) -> Option<Matching> {
        let mut by_task = vec![None; self.task_count];
        let mut by_agent = Vec::with_capacity(cursor.len());
        for (a, &i) in cursor.iter().enumerate() {
            let tasks = &self.allocations[a][i];
            for &t in tasks {
                if by_task[t].is_some() {
                    return None; // task conflict
                }
                by_task[t] = Some(a);
            }
            by_agent.push(tasks.clone());
        }
        Some(Matching { by_agent, by_task })
    }

    fn advance(&mut self) {
        let Some(cursor) = self.cursor.as_mut() else {
            return;
        };
        if cursor.is_empty() {
            self.cursor = None;
            return;
        }
        for a in (0..cursor.len()).rev() {
            cursor[a] += 1;
            if cursor[a] < self.allocations[a].len() {
                return;
            }
            cursor[a] = 0;
        }
        self.cursor = None;
    }
}

/// All stable matchings, in enumeration order.
pub fn enumerate_stable(inst: &Instance, limits: &TreeLimits) -> Result<Vec<Matching>, TreeError> {
    Ok(enumerate_matchings(inst, limits)?
        .filter(|m| check_stability(inst, m).stable)
        .collect())
}

fn task_pref(inst: &Instance, t: usize, m1: &Matching, m2: &Matching) -> Ordering {
    let pos = |m: &Matching| m.task_agent(t).map(|a| inst.task_pref_pos(t, a).unwrap());
    match (pos(m1), pos(m2)) {
        (Some(p1), Some(p2)) => p2.cmp(&p1), // smaller position = preferred
        (Some(_), None) => Ordering::Greater,
        (None, Some(_)) => Ordering::Less,
        (None, None) => Ordering::Equal,
    }
}

/// Weak task-preference of `m1` over `m2`: every task weakly prefers its
/// match in `m1`.
pub fn task_weakly_preferred(inst: &Instance, m1: &Matching, m2: &Matching) -> bool {
    (0..inst.task_count()).all(|t| task_pref(inst, t, m1, m2) != Ordering::Less)
}

/// Strong task-preference: weak preference with at least one strict gain.
pub fn task_strongly_preferred(inst: &Instance, m1: &Matching, m2: &Matching) -> bool {
    task_weakly_preferred(inst, m1, m2)
        && (0..inst.task_count()).any(|t| task_pref(inst, t, m1, m2) == Ordering::Greater)
}

/// Weak agent-preference of `m1` over `m2` under the lexicographic order.
pub fn agent_weakly_preferred(inst: &Instance, m1: &Matching, m2: &Matching) -> bool {
    (0..inst.agent_count()).all(|a| {
        lextree::compare_alloc(inst, a, m1.agent_tasks(a), m2.agent_tasks(a))
            .expect("matched allocations are feasible")
            != Ordering::Less
    })
}

/// Strong agent-preference: weak preference with at least one strict gain.
pub fn agent_strongly_preferred(inst: &Instance, m1: &Matching, m2: &Matching) -> bool {
    agent_weakly_preferred(inst, m1, m2)
        && (0..inst.agent_count()).any(|a| {
            lextree::compare_alloc(inst, a, m1.agent_tasks(a), m2.agent_tasks(a)).unwrap()
                == Ordering::Greater
        })
}

/// Builds all agents' trees with the same limits; convenience for callers
/// needing the full forest.
pub fn build_forest(inst: &Instance, limits: &TreeLimits) -> Result<Vec<LexTree>, TreeError> {
    (0..inst.agent_count())
        .map(|a| lextree::build_tree(inst, a, limits))
        .collect()
}
