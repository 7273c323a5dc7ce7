//! Problem instances: agents, tasks, mutual preference lists, and per-agent
//! feasibility oracles.
//!
//! An instance is loaded from a JSON document (see [`Instance::parse`]),
//! validated against the structural invariants of the model, and queried for
//! feasibility of task sets through [`Instance::feasible`]. Feasibility
//! families are downward closed and are represented either by their maximal
//! elements or by a knapsack (capacity/size) rule.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::Mutex;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("schema error at line {line}, column {column}: {message}")]
    Schema {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown feasibility kind `{0}`")]
    UnknownFeasibilityKind(String),
    #[error("unknown agent `{0}`")]
    UnknownAgent(String),
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
}

/// Raw document shape of the instance file format.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceDoc {
    agents: Vec<String>,
    tasks: Vec<String>,
    #[serde(default)]
    task_prefs: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    agent_prefs: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    feasibility: BTreeMap<String, OracleDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum OracleDoc {
    MaximalSets { sets: Vec<Vec<String>> },
    Knapsack { capacity: u64, sizes: BTreeMap<String, u64> },
}

/// Kind selector for feasibility oracles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleKind {
    MaximalSets,
    Knapsack,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleData {
    /// Downward closure of the listed maximal sets. Sets are normalized:
    /// sorted by task index, deduplicated, dominated sets removed.
    MaximalSets { sets: Vec<Vec<usize>> },
    Knapsack {
        capacity: u64,
        sizes: HashMap<usize, u64>,
    },
}

/// Membership oracle for one agent's feasibility family, with memoized
/// queries. Immutable after construction; safe for concurrent use.
#[derive(Debug)]
pub struct FeasibilityOracle {
    data: OracleData,
    memo: Mutex<HashMap<Vec<usize>, bool>>,
}

impl FeasibilityOracle {
    fn new(data: OracleData) -> Self {
        FeasibilityOracle {
            data,
            memo: Mutex::new(HashMap::new()),
        }
    }

    pub fn data(&self) -> &OracleData {
        &self.data
    }

    pub fn kind(&self) -> OracleKind {
        match self.data {
            OracleData::MaximalSets { .. } => OracleKind::MaximalSets,
            OracleData::Knapsack { .. } => OracleKind::Knapsack,
        }
    }

    /// Membership test for a canonical (sorted, deduplicated) task set.
    fn contains(&self, key: &[usize]) -> bool {
        if key.is_empty() {
            return true;
        }
        if let Some(&hit) = self.memo.lock().unwrap().get(key) {
            return hit;
        }
        let answer = match &self.data {
            OracleData::MaximalSets { sets } => sets
                .iter()
                .any(|s| key.iter().all(|t| s.binary_search(t).is_ok())),
            OracleData::Knapsack { capacity, sizes } => {
                let mut total: u64 = 0;
                let mut known = true;
                for t in key {
                    match sizes.get(t) {
                        Some(&s) => total = total.saturating_add(s),
                        None => {
                            known = false;
                            break;
                        }
                    }
                }
                known && total <= *capacity
            }
        };
        self.memo.lock().unwrap().insert(key.to_vec(), answer);
        answer
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, Serialize)]
pub struct Issue {
    pub severity: Severity,
    pub location: String,
    pub message: String,
}

impl Issue {
    fn error(location: impl Into<String>, message: impl Into<String>) -> Self {
        Issue {
            severity: Severity::Error,
            location: location.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub issues: Vec<Issue>,
}

/// A complete problem datum: participants, preference lists, and oracles.
///
/// Immutable after construction. Identifier canonical order is the
/// declaration order in the instance file; all index-based accessors follow
/// that order.
#[derive(Debug)]
pub struct Instance {
    agents: Vec<String>,
    tasks: Vec<String>,
    agent_index: HashMap<String, usize>,
    task_index: HashMap<String, usize>,
    /// Per agent: acceptable tasks T(a) in decreasing preference.
    agent_prefs: Vec<Vec<usize>>,
    /// Per task: acceptable agents A(t) in decreasing preference.
    task_prefs: Vec<Vec<usize>>,
    /// Per agent: task -> position in T(a).
    agent_pos: Vec<HashMap<usize, usize>>,
    /// Per task: agent -> position in A(t).
    task_pos: Vec<HashMap<usize, usize>>,
    oracles: Vec<FeasibilityOracle>,
    /// Resolution problems recorded at load time, surfaced by `validate`.
    load_issues: Vec<Issue>,
}

impl PartialEq for Instance {
    fn eq(&self, other: &Self) -> bool {
        self.agents == other.agents
            && self.tasks == other.tasks
            && self.agent_prefs == other.agent_prefs
            && self.task_prefs == other.task_prefs
            && self
                .oracles
                .iter()
                .zip(&other.oracles)
                .all(|(x, y)| x.data == y.data)
    }
}

impl Instance {
    /// Parses the UTF-8 JSON instance format. Only the document shape is
    /// checked here; semantic invariants are reported by [`Instance::validate`].
    pub fn parse(text: &str) -> Result<Instance, InstanceError> {
        let doc: InstanceDoc = serde_json::from_str(text).map_err(classify_schema_error)?;
        Ok(Instance::from_doc(doc))
    }

    fn from_doc(doc: InstanceDoc) -> Instance {
        let mut issues = Vec::new();
        let mut agents = Vec::new();
        let mut agent_index = HashMap::new();
        for name in doc.agents {
            if agent_index.contains_key(&name) {
                issues.push(Issue::error("agents", format!("duplicate agent `{name}`")));
                continue;
            }
            agent_index.insert(name.clone(), agents.len());
            agents.push(name);
        }
        let mut tasks = Vec::new();
        let mut task_index = HashMap::new();
        for name in doc.tasks {
            if task_index.contains_key(&name) {
                issues.push(Issue::error("tasks", format!("duplicate task `{name}`")));
                continue;
            }
            task_index.insert(name.clone(), tasks.len());
            tasks.push(name);
        }

        let resolve_list = |list: &[String],
                            index: &HashMap<String, usize>,
                            loc: &str,
                            what: &str,
                            issues: &mut Vec<Issue>| {
            let mut out = Vec::new();
            let mut seen = HashSet::new();
            for name in list {
                match index.get(name) {
                    Some(&i) => {
                        if !seen.insert(i) {
                            issues.push(Issue::error(loc, format!("duplicate {what} `{name}`")));
                        } else {
                            out.push(i);
                        }
                    }
                    None => {
                        issues.push(Issue::error(loc, format!("unknown {what} `{name}`")));
                    }
                }
            }
            out
        };

        let mut agent_prefs = vec![Vec::new(); agents.len()];
        for (agent, list) in &doc.agent_prefs {
            match agent_index.get(agent) {
                Some(&a) => {
                    let loc = format!("agent_prefs.{agent}");
                    agent_prefs[a] = resolve_list(list, &task_index, &loc, "task", &mut issues);
                }
                None => issues.push(Issue::error(
                    "agent_prefs",
                    format!("unknown agent `{agent}`"),
                )),
            }
        }
        let mut task_prefs = vec![Vec::new(); tasks.len()];
        for (task, list) in &doc.task_prefs {
            match task_index.get(task) {
                Some(&t) => {
                    let loc = format!("task_prefs.{task}");
                    task_prefs[t] = resolve_list(list, &agent_index, &loc, "agent", &mut issues);
                }
                None => issues.push(Issue::error("task_prefs", format!("unknown task `{task}`"))),
            }
        }

        let mut oracles: Vec<Option<FeasibilityOracle>> = (0..agents.len()).map(|_| None).collect();
        for (agent, spec) in &doc.feasibility {
            let a = match agent_index.get(agent) {
                Some(&a) => a,
                None => {
                    issues.push(Issue::error(
                        "feasibility",
                        format!("unknown agent `{agent}`"),
                    ));
                    continue;
                }
            };
            let loc = format!("feasibility.{agent}");
            let data = match spec {
                OracleDoc::MaximalSets { sets } => {
                    let mut resolved: Vec<Vec<usize>> = Vec::new();
                    for set in sets {
                        resolved.push(resolve_list(set, &task_index, &loc, "task", &mut issues));
                    }
                    OracleData::MaximalSets {
                        sets: normalize_sets(resolved),
                    }
                }
                OracleDoc::Knapsack { capacity, sizes } => {
                    let mut resolved = HashMap::new();
                    for (task, &size) in sizes {
                        match task_index.get(task) {
                            Some(&t) => {
                                resolved.insert(t, size);
                            }
                            None => {
                                issues.push(Issue::error(&loc, format!("unknown task `{task}`")))
                            }
                        }
                    }
                    OracleData::Knapsack {
                        capacity: *capacity,
                        sizes: resolved,
                    }
                }
            };
            oracles[a] = Some(FeasibilityOracle::new(data));
        }
        let oracles = oracles
            .into_iter()
            .enumerate()
            .map(|(a, oracle)| {
                oracle.unwrap_or_else(|| {
                    issues.push(Issue::error(
                        "feasibility",
                        format!("missing feasibility oracle for agent `{}`", agents[a]),
                    ));
                    FeasibilityOracle::new(OracleData::MaximalSets { sets: Vec::new() })
                })
            })
            .collect();

        let agent_pos = agent_prefs
            .iter()
            .map(|list| list.iter().enumerate().map(|(i, &t)| (t, i)).collect())
            .collect();
        let task_pos = task_prefs
            .iter()
            .map(|list| list.iter().enumerate().map(|(i, &a)| (a, i)).collect())
            .collect();

        Instance {
            agents,
            tasks,
            agent_index,
            task_index,
            agent_prefs,
            task_prefs,
            agent_pos,
            task_pos,
            oracles,
            load_issues: issues,
        }
    }

    pub fn agent_count(&self) -> usize {
        self.agents.len()
    }

    pub fn task_count(&self) -> usize {
        self.tasks.len()
    }

    pub fn agent_name(&self, a: usize) -> &str {
        &self.agents[a]
    }

    pub fn task_name(&self, t: usize) -> &str {
        &self.tasks[t]
    }

    pub fn agent_id(&self, name: &str) -> Option<usize> {
        self.agent_index.get(name).copied()
    }

    pub fn task_id(&self, name: &str) -> Option<usize> {
        self.task_index.get(name).copied()
    }

    /// T(a) in decreasing preference.
    pub fn agent_pref_list(&self, a: usize) -> &[usize] {
        &self.agent_prefs[a]
    }

    /// A(t) in decreasing preference.
    pub fn task_pref_list(&self, t: usize) -> &[usize] {
        &self.task_prefs[t]
    }

    /// Position of task `t` in T(a) (0 = most preferred), if acceptable.
    pub fn agent_pref_pos(&self, a: usize, t: usize) -> Option<usize> {
        self.agent_pos[a].get(&t).copied()
    }

    /// Position of agent `a` in A(t) (0 = most preferred), if acceptable.
    pub fn task_pref_pos(&self, t: usize, a: usize) -> Option<usize> {
        self.task_pos[t].get(&a).copied()
    }

    /// t ∈ T(a)?
    pub fn accepts(&self, a: usize, t: usize) -> bool {
        self.agent_pos[a].contains_key(&t)
    }

    pub fn oracle(&self, a: usize) -> &FeasibilityOracle {
        &self.oracles[a]
    }

    /// Index-level feasibility query. Sets holding tasks outside T(a) are
    /// infeasible; the empty set is always feasible.
    pub fn feasible(&self, a: usize, set: &[usize]) -> bool {
        let mut key = set.to_vec();
        key.sort_unstable();
        key.dedup();
        if key.iter().any(|t| !self.agent_pos[a].contains_key(t)) {
            return false;
        }
        self.oracles[a].contains(&key)
    }

    /// Name-level feasibility query. Unknown task names count as outside
    /// T(a) and make the set infeasible without error.
    pub fn is_feasible(&self, agent: &str, set: &[&str]) -> Result<bool, InstanceError> {
        let a = self
            .agent_id(agent)
            .ok_or_else(|| InstanceError::UnknownAgent(agent.to_string()))?;
        let mut ids = Vec::with_capacity(set.len());
        for name in set {
            match self.task_id(name) {
                Some(t) => ids.push(t),
                None => return Ok(false),
            }
        }
        Ok(self.feasible(a, &ids))
    }

    /// The acceptable-pair set E, agents then tasks in declaration order.
    pub fn acceptable_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs = Vec::new();
        for a in 0..self.agents.len() {
            for t in 0..self.tasks.len() {
                if self.accepts(a, t) {
                    pairs.push((a, t));
                }
            }
        }
        pairs
    }

    /// Reports every violated structural invariant. `ok` is true iff no
    /// error-severity issue was found.
    pub fn validate(&self) -> ValidationReport {
        let mut issues = self.load_issues.clone();
        // Mutual consistency: t ∈ T(a) ⇔ a ∈ A(t).
        for a in 0..self.agents.len() {
            for &t in &self.agent_prefs[a] {
                if self.task_pref_pos(t, a).is_none() {
                    issues.push(Issue::error(
                        format!("agent_prefs.{}", self.agents[a]),
                        format!(
                            "mutual consistency: `{}` lists `{}` but not vice versa",
                            self.agents[a], self.tasks[t]
                        ),
                    ));
                }
            }
        }
        for t in 0..self.tasks.len() {
            for &a in &self.task_prefs[t] {
                if self.agent_pref_pos(a, t).is_none() {
                    issues.push(Issue::error(
                        format!("task_prefs.{}", self.tasks[t]),
                        format!(
                            "mutual consistency: `{}` lists `{}` but not vice versa",
                            self.tasks[t], self.agents[a]
                        ),
                    ));
                }
            }
        }
        // Oracle-specific shape checks.
        for a in 0..self.agents.len() {
            let loc = format!("feasibility.{}", self.agents[a]);
            match self.oracles[a].data() {
                OracleData::MaximalSets { sets } => {
                    for set in sets {
                        for &t in set {
                            if !self.accepts(a, t) {
                                issues.push(Issue::error(
                                    &loc,
                                    format!(
                                        "set lists task `{}` outside T({})",
                                        self.tasks[t], self.agents[a]
                                    ),
                                ));
                            }
                        }
                    }
                }
                OracleData::Knapsack { capacity, sizes } => {
                    for &t in &self.agent_prefs[a] {
                        match sizes.get(&t) {
                            None => issues.push(Issue::error(
                                &loc,
                                format!("missing size for task `{}`", self.tasks[t]),
                            )),
                            Some(&s) if s > *capacity => issues.push(Issue::error(
                                &loc,
                                format!(
                                    "infeasible singleton: size {s} of `{}` exceeds capacity {capacity}",
                                    self.tasks[t]
                                ),
                            )),
                            _ => {}
                        }
                    }
                }
            }
        }
        // Singleton feasibility for maximal-set oracles (the knapsack case
        // is covered by the size checks above).
        for a in 0..self.agents.len() {
            if self.oracles[a].kind() == OracleKind::MaximalSets {
                for &t in &self.agent_prefs[a] {
                    if !self.feasible(a, &[t]) {
                        issues.push(Issue::error(
                            format!("feasibility.{}", self.agents[a]),
                            format!(
                                "infeasible singleton: {{{}}} not covered for agent `{}`",
                                self.tasks[t], self.agents[a]
                            ),
                        ));
                    }
                }
            }
        }
        let ok = !issues.iter().any(|i| i.severity == Severity::Error);
        ValidationReport { ok, issues }
    }

    /// Canonical serialization: object keys sorted, arrays in declaration
    /// order, maximal sets normalized. Byte-identical for equal instances.
    pub fn to_canonical_json(&self) -> String {
        let doc = InstanceDoc {
            agents: self.agents.clone(),
            tasks: self.tasks.clone(),
            task_prefs: self
                .tasks
                .iter()
                .enumerate()
                .map(|(t, name)| {
                    (
                        name.clone(),
                        self.task_prefs[t]
                            .iter()
                            .map(|&a| self.agents[a].clone())
                            .collect(),
                    )
                })
                .collect(),
            agent_prefs: self
                .agents
                .iter()
                .enumerate()
                .map(|(a, name)| {
                    (
                        name.clone(),
                        self.agent_prefs[a]
                            .iter()
                            .map(|&t| self.tasks[t].clone())
                            .collect(),
                    )
                })
                .collect(),
            feasibility: self
                .agents
                .iter()
                .enumerate()
                .map(|(a, name)| {
                    let spec = match self.oracles[a].data() {
                        OracleData::MaximalSets { sets } => OracleDoc::MaximalSets {
                            sets: sets
                                .iter()
                                .map(|s| s.iter().map(|&t| self.tasks[t].clone()).collect())
                                .collect(),
                        },
                        OracleData::Knapsack { capacity, sizes } => {
                            let mut by_name = BTreeMap::new();
                            for (&t, &s) in sizes {
                                by_name.insert(self.tasks[t].clone(), s);
                            }
                            OracleDoc::Knapsack {
                                capacity: *capacity,
                                sizes: by_name,
                            }
                        }
                    };
                    (name.clone(), spec)
                })
                .collect(),
        };
        let mut out = serde_json::to_string_pretty(&doc).expect("instance serialization");
        out.push('\n');
        out
    }

    /// Deterministic random instance; the output always validates.
    pub fn generate_random(params: &GenParams, seed: u64) -> Result<Instance, InstanceError> {
        params.check()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let agents: Vec<String> = (1..=params.n_agents).map(|i| format!("a{i}")).collect();
        let tasks: Vec<String> = (1..=params.n_tasks).map(|i| format!("t{i}")).collect();

        // Acceptability with the requested density, then random strict orders.
        let mut t_of_a: Vec<Vec<usize>> = vec![Vec::new(); params.n_agents];
        let mut a_of_t: Vec<Vec<usize>> = vec![Vec::new(); params.n_tasks];
        for a in 0..params.n_agents {
            for t in 0..params.n_tasks {
                if rng.gen_bool(params.density) {
                    t_of_a[a].push(t);
                    a_of_t[t].push(a);
                }
            }
        }
        for list in &mut t_of_a {
            list.shuffle(&mut rng);
        }
        for list in &mut a_of_t {
            list.shuffle(&mut rng);
        }

        let mut feasibility = BTreeMap::new();
        for a in 0..params.n_agents {
            let ta = &t_of_a[a];
            let spec = match params.oracle_kind {
                OracleKind::MaximalSets => {
                    let cap = params.max_set_size.unwrap_or(3).max(1);
                    let mut sets: Vec<Vec<usize>> = Vec::new();
                    if !ta.is_empty() {
                        let n_sets = rng.gen_range(1..=3);
                        for _ in 0..n_sets {
                            let size = rng.gen_range(1..=cap.min(ta.len()));
                            let mut pool = ta.clone();
                            pool.shuffle(&mut rng);
                            pool.truncate(size);
                            sets.push(pool);
                        }
                    }
                    // Singleton feasibility by construction.
                    for &t in ta {
                        if !sets.iter().any(|s| s.contains(&t)) {
                            sets.push(vec![t]);
                        }
                    }
                    OracleDoc::MaximalSets {
                        sets: normalize_sets(sets)
                            .into_iter()
                            .map(|s| s.iter().map(|&t| tasks[t].clone()).collect())
                            .collect(),
                    }
                }
                OracleKind::Knapsack => {
                    let (lo, hi) = params.capacity_range.unwrap_or((1, 6));
                    let capacity = rng.gen_range(lo..=hi);
                    let mut sizes = BTreeMap::new();
                    for &t in ta {
                        sizes.insert(tasks[t].clone(), rng.gen_range(1..=capacity));
                    }
                    OracleDoc::Knapsack { capacity, sizes }
                }
            };
            feasibility.insert(agents[a].clone(), spec);
        }

        let doc = InstanceDoc {
            task_prefs: (0..params.n_tasks)
                .map(|t| {
                    (
                        tasks[t].clone(),
                        a_of_t[t].iter().map(|&a| agents[a].clone()).collect(),
                    )
                })
                .collect(),
            agent_prefs: (0..params.n_agents)
                .map(|a| {
                    (
                        agents[a].clone(),
                        t_of_a[a].iter().map(|&t| tasks[t].clone()).collect(),
                    )
                })
                .collect(),
            agents,
            tasks,
            feasibility,
        };
        Ok(Instance::from_doc(doc))
    }
}

/// Parameters for [`Instance::generate_random`].
#[derive(Debug, Clone)]
pub struct GenParams {
    pub n_agents: usize,
    pub n_tasks: usize,
    pub oracle_kind: OracleKind,
    /// Probability that any (agent, task) pair is acceptable.
    pub density: f64,
    /// Maximal-set oracles: cap on listed set cardinality (default 3).
    pub max_set_size: Option<usize>,
    /// Knapsack oracles: inclusive capacity range (default 1..=6).
    pub capacity_range: Option<(u64, u64)>,
}

impl GenParams {
    fn check(&self) -> Result<(), InstanceError> {
        if self.n_agents == 0 || self.n_tasks == 0 {
            return Err(InstanceError::InvalidParams(
                "agent and task counts must be positive".into(),
            ));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(InstanceError::InvalidParams(
                "density must lie in (0, 1]".into(),
            ));
        }
        if let Some((lo, hi)) = self.capacity_range {
            if lo == 0 || lo > hi {
                return Err(InstanceError::InvalidParams(
                    "capacity range must be nonempty and positive".into(),
                ));
            }
        }
        if self.max_set_size == Some(0) {
            return Err(InstanceError::InvalidParams(
                "max_set_size must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Sorts, deduplicates, and drops sets contained in another listed set.
fn normalize_sets(mut sets: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    for s in &mut sets {
        s.sort_unstable();
        s.dedup();
    }
    sets.sort();
    sets.dedup();
    let mut kept: Vec<Vec<usize>> = Vec::new();
    for s in &sets {
        let dominated = sets
            .iter()
            .any(|other| other != s && s.iter().all(|t| other.binary_search(t).is_ok()));
        if !dominated {
            kept.push(s.clone());
        }
    }
    kept
}

fn classify_schema_error(err: serde_json::Error) -> InstanceError {
    let message = err.to_string();
    if let Some(rest) = message.strip_prefix("unknown variant `") {
        if let Some(end) = rest.find('`') {
            return InstanceError::UnknownFeasibilityKind(rest[..end].to_string());
        }
    }
    InstanceError::Schema {
        line: err.line(),
        column: err.column(),
        message,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EX1: &str = include_str!("../fixtures/ex1.json");

    #[test]
    fn parses_example_instance() {
        let inst = Instance::parse(EX1).unwrap();
        assert_eq!(inst.agent_count(), 2);
        assert_eq!(inst.task_count(), 2);
        assert!(inst.validate().ok);
        let a1 = inst.agent_id("a1").unwrap();
        let prefs: Vec<&str> = inst
            .agent_pref_list(a1)
            .iter()
            .map(|&t| inst.task_name(t))
            .collect();
        assert_eq!(prefs, ["t1", "t2"]);
    }

    #[test]
    fn parses_empty_participants() {
        let inst = Instance::parse(
            r#"{"agents": [], "tasks": [], "task_prefs": {}, "agent_prefs": {}, "feasibility": {}}"#,
        )
        .unwrap();
        assert_eq!(inst.agent_count(), 0);
        assert!(inst.validate().ok);
        assert!(inst.acceptable_pairs().is_empty());
    }

    #[test]
    fn parses_knapsack_oracle() {
        let text = r#"{
            "agents": ["a"], "tasks": ["t1", "t2"],
            "task_prefs": {"t1": ["a"], "t2": ["a"]},
            "agent_prefs": {"a": ["t1", "t2"]},
            "feasibility": {"a": {"kind": "knapsack", "capacity": 2, "sizes": {"t1": 2, "t2": 1}}}
        }"#;
        let inst = Instance::parse(text).unwrap();
        assert!(inst.validate().ok);
        assert!(inst.is_feasible("a", &["t1"]).unwrap());
        assert!(!inst.is_feasible("a", &["t1", "t2"]).unwrap());
    }

    #[test]
    fn unknown_kind_is_reported() {
        let text = r#"{
            "agents": ["a"], "tasks": [],
            "feasibility": {"a": {"kind": "mystery"}}
        }"#;
        match Instance::parse(text) {
            Err(InstanceError::UnknownFeasibilityKind(k)) => assert_eq!(k, "mystery"),
            other => panic!("expected UnknownFeasibilityKind, got {other:?}"),
        }
    }

    #[test]
    fn malformed_document_is_schema_error() {
        assert!(matches!(
            Instance::parse("{ not json"),
            Err(InstanceError::Schema { .. })
        ));
    }

    #[test]
    fn feasibility_of_example_sets() {
        let inst = Instance::parse(EX1).unwrap();
        assert!(!inst.is_feasible("a2", &["t1", "t2"]).unwrap());
        assert!(inst.is_feasible("a2", &[]).unwrap());
        assert!(inst.is_feasible("a1", &["t1", "t2"]).unwrap());
        assert!(matches!(
            inst.is_feasible("zz", &[]),
            Err(InstanceError::UnknownAgent(_))
        ));
    }

    #[test]
    fn acceptable_pairs_of_example() {
        let inst = Instance::parse(EX1).unwrap();
        let pairs: Vec<(&str, &str)> = inst
            .acceptable_pairs()
            .into_iter()
            .map(|(a, t)| (inst.agent_name(a), inst.task_name(t)))
            .collect();
        assert_eq!(
            pairs,
            [("a1", "t1"), ("a1", "t2"), ("a2", "t1"), ("a2", "t2")]
        );
    }

    #[test]
    fn mutual_consistency_violation_detected() {
        let text = r#"{
            "agents": ["a1", "a2"], "tasks": ["t1", "t2"],
            "task_prefs": {"t1": ["a2"], "t2": ["a1", "a2"]},
            "agent_prefs": {"a1": ["t1", "t2"], "a2": ["t2", "t1"]},
            "feasibility": {
                "a1": {"kind": "maximal_sets", "sets": [["t1", "t2"]]},
                "a2": {"kind": "maximal_sets", "sets": [["t1"], ["t2"]]}
            }
        }"#;
        let report = Instance::parse(text).unwrap().validate();
        assert!(!report.ok);
        assert!(report
            .issues
            .iter()
            .any(|i| i.message.contains("mutual consistency")));
    }

    #[test]
    fn oversized_singleton_is_an_error() {
        let text = r#"{
            "agents": ["a"], "tasks": ["t1", "t2"],
            "task_prefs": {"t1": ["a"], "t2": ["a"]},
            "agent_prefs": {"a": ["t1", "t2"]},
            "feasibility": {"a": {"kind": "knapsack", "capacity": 2, "sizes": {"t1": 3, "t2": 1}}}
        }"#;
        let report = Instance::parse(text).unwrap().validate();
        assert!(!report.ok);
        assert!(report
            .issues
            .iter()
            .any(|i| i.message.contains("infeasible singleton")));
    }

    #[test]
    fn generator_is_deterministic_and_valid() {
        let params = GenParams {
            n_agents: 2,
            n_tasks: 2,
            oracle_kind: OracleKind::MaximalSets,
            density: 1.0,
            max_set_size: None,
            capacity_range: None,
        };
        let one = Instance::generate_random(&params, 7).unwrap();
        let two = Instance::generate_random(&params, 7).unwrap();
        assert!(one.validate().ok);
        assert_eq!(one.to_canonical_json(), two.to_canonical_json());
    }

    #[test]
    fn generated_knapsack_sizes_fit_capacity() {
        let params = GenParams {
            n_agents: 3,
            n_tasks: 5,
            oracle_kind: OracleKind::Knapsack,
            density: 0.6,
            max_set_size: None,
            capacity_range: None,
        };
        let inst = Instance::generate_random(&params, 1).unwrap();
        assert!(inst.validate().ok);
        for a in 0..inst.agent_count() {
            for &t in inst.agent_pref_list(a) {
                assert!(inst.feasible(a, &[t]));
            }
        }
    }

    #[test]
    fn invalid_params_rejected() {
        let params = GenParams {
            n_agents: 0,
            n_tasks: 1,
            oracle_kind: OracleKind::MaximalSets,
            density: 0.5,
            max_set_size: None,
            capacity_range: None,
        };
        assert!(matches!(
            Instance::generate_random(&params, 0),
            Err(InstanceError::InvalidParams(_))
        ));
    }

    #[test]
    fn round_trip_preserves_instance() {
        let inst = Instance::parse(EX1).unwrap();
        let text = inst.to_canonical_json();
        let back = Instance::parse(&text).unwrap();
        assert!(back.validate().ok);
        assert_eq!(inst, back);
        assert_eq!(text, back.to_canonical_json());
    }
}
