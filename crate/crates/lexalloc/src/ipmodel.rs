//! Binary-program encoding of the stable-matching space.
//!
//! One X variable per (agent, tree node) selects the agent's allocation;
//! assignment rows force exactly one selection per agent, capacity rows
//! keep each task with at most one agent, and one stability row per
//! acceptable (task, agent) pair forbids that pair from blocking. The
//! relaxed variant adds one binary Y variable per stability row and a
//! penalty objective so that any tolerated instability is minimal.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::Instance;
use crate::lextree::{self, LexTree, TreeError, TreeLimits};
use crate::matching::Matching;

#[derive(Debug, Error)]
pub enum IpError {
    #[error("valuation covers {got} variables, model has {expected}")]
    PartialValuation { got: usize, expected: usize },
}

/// Objective over allocation variables.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// c_an = |T(n)|: maximize the number of assigned tasks.
    MaxTasks,
    /// Explicit c_an table: agent name -> node rank -> coefficient.
    /// Missing entries default to 0.
    Weights(BTreeMap<String, BTreeMap<usize, i64>>),
}

impl Objective {
    fn coefficient(&self, inst: &Instance, agent: usize, rank: usize, n_tasks: usize) -> i64 {
        match self {
            Objective::MaxTasks => n_tasks as i64,
            Objective::Weights(table) => table
                .get(inst.agent_name(agent))
                .and_then(|by_rank| by_rank.get(&rank))
                .copied()
                .unwrap_or(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VarKind {
    /// X_an: agent takes the allocation of the node with this rank.
    X {
        agent: usize,
        rank: usize,
        /// T(n), sorted by task index.
        tasks: Vec<usize>,
    },
    /// Y_ta: pair (t, a) is tolerated as blocking (relaxed models only).
    Y { task: usize, agent: usize },
}

#[derive(Debug, Clone)]
pub struct VarInfo {
    pub name: String,
    pub kind: VarKind,
    pub objective: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    /// c-1: Σ_n X_an = 1 for one agent.
    AgentAssignment(usize),
    /// c-2: Σ X_an over nodes holding the task ≤ 1.
    TaskCapacity(usize),
    /// c-3 / c-3′ for one (task, agent) pair.
    Stability(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
}

#[derive(Debug, Clone)]
pub struct LinearRow {
    pub kind: RowKind,
    /// (variable index, ±1) pairs.
    pub terms: Vec<(usize, i8)>,
    pub relation: Relation,
    pub rhs: i64,
}

#[derive(Debug, Clone)]
pub struct IpModel {
    pub vars: Vec<VarInfo>,
    pub rows: Vec<LinearRow>,
    pub relaxed: bool,
    /// The instability penalty c_y (0 for strict models).
    pub penalty: i64,
}

/// Feasibility report for one valuation, plus the decoded matching when the
/// assignment rows hold.
#[derive(Debug, Clone)]
pub struct ValuationReport {
    pub row_satisfied: Vec<bool>,
    /// True iff every assignment and capacity row holds.
    pub assignment_ok: bool,
    pub matching: Option<Matching>,
    /// Stability rows violated by the valuation, as (task, agent) pairs.
    pub violated_stability: Vec<(usize, usize)>,
    pub objective_value: i64,
}

impl ValuationReport {
    pub fn all_satisfied(&self) -> bool {
        self.row_satisfied.iter().all(|&s| s)
    }
}

/// Builds the strict stability program (Constraints c-1..c-4).
pub fn build_ip(
    inst: &Instance,
    objective: &Objective,
    limits: &TreeLimits,
) -> Result<IpModel, TreeError> {
    build(inst, objective, limits, false)
}

/// Builds the relaxed program: stability rows gain a binary Y variable and
/// the objective charges each Y more than any achievable allocation value.
pub fn build_relaxed_ip(
    inst: &Instance,
    objective: &Objective,
    limits: &TreeLimits,
) -> Result<IpModel, TreeError> {
    build(inst, objective, limits, true)
}

fn build(
    inst: &Instance,
    objective: &Objective,
    limits: &TreeLimits,
    relaxed: bool,
) -> Result<IpModel, TreeError> {
    let trees: Vec<LexTree> = (0..inst.agent_count())
        .map(|a| lextree::build_tree(inst, a, limits))
        .collect::<Result<_, _>>()?;

    let mut vars = Vec::new();
    // x_var[a][rank - 1] = variable index.
    let mut x_var: Vec<Vec<usize>> = Vec::with_capacity(trees.len());
    for (a, tree) in trees.iter().enumerate() {
        let mut by_rank = Vec::with_capacity(tree.len());
        for rank in 1..=tree.len() {
            let node = tree.node(tree.by_rank(rank));
            let mut tasks = node.path.clone();
            tasks.sort_unstable();
            by_rank.push(vars.len());
            vars.push(VarInfo {
                name: format!("X_{}_{rank}", inst.agent_name(a)),
                objective: objective.coefficient(inst, a, rank, tasks.len()),
                kind: VarKind::X {
                    agent: a,
                    rank,
                    tasks,
                },
            });
        }
        x_var.push(by_rank);
    }

    let penalty = if relaxed {
        let best_per_agent: i64 = x_var
            .iter()
            .map(|ranks| ranks.iter().map(|&v| vars[v].objective).max().unwrap_or(0))
            .sum();
        best_per_agent + 1
    } else {
        0
    };

    // Stability pairs in canonical order: tasks then agents by declaration.
    let pairs: Vec<(usize, usize)> = (0..inst.task_count())
        .flat_map(|t| (0..inst.agent_count()).map(move |a| (t, a)))
        .filter(|&(t, a)| inst.task_pref_pos(t, a).is_some())
        .collect();

    let mut y_var: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    if relaxed {
        for &(t, a) in &pairs {
            y_var.insert((t, a), vars.len());
            vars.push(VarInfo {
                name: format!("Y_{}_{}", inst.task_name(t), inst.agent_name(a)),
                objective: -penalty,
                kind: VarKind::Y { task: t, agent: a },
            });
        }
    }

    let mut rows = Vec::new();
    for a in 0..inst.agent_count() {
        rows.push(LinearRow {
            kind: RowKind::AgentAssignment(a),
            terms: x_var[a].iter().map(|&v| (v, 1)).collect(),
            relation: Relation::Eq,
            rhs: 1,
        });
    }
    for t in 0..inst.task_count() {
        let mut terms = Vec::new();
        for ranks in &x_var {
            for &v in ranks {
                if let VarKind::X { ref tasks, .. } = vars[v].kind {
                    if tasks.binary_search(&t).is_ok() {
                        terms.push((v, 1i8));
                    }
                }
            }
        }
        rows.push(LinearRow {
            kind: RowKind::TaskCapacity(t),
            terms,
            relation: Relation::Le,
            rhs: 1,
        });
    }
    for &(t, a) in &pairs {
        let tree = &trees[a];
        let mut terms = Vec::new();
        // LHS: nodes of D(a) from which a would still take t.
        for rank in 1..=tree.len() {
            if stability_lhs_tree(inst, tree, tree.by_rank(rank), t) {
                terms.push((x_var[a][rank - 1], 1i8));
            }
        }
        // RHS: allocations that serve t at least as well as a would.
        // Agents in declaration order so identical models print identically.
        let a_pos = inst.task_pref_pos(t, a).unwrap();
        for a2 in 0..inst.agent_count() {
            match inst.task_pref_pos(t, a2) {
                Some(p) if p <= a_pos => {}
                _ => continue,
            }
            for (rank0, &v) in x_var[a2].iter().enumerate() {
                let node = trees[a2].node(trees[a2].by_rank(rank0 + 1));
                if node.path.contains(&t) {
                    terms.push((v, -1i8));
                }
            }
        }
        if let Some(&y) = y_var.get(&(t, a)) {
            terms.push((y, -1i8));
        }
        rows.push(LinearRow {
            kind: RowKind::Stability(t, a),
            terms,
            relation: Relation::Le,
            rhs: 0,
        });
    }

    Ok(IpModel {
        vars,
        rows,
        relaxed,
        penalty,
    })
}

/// Tree-structural membership test for the stability left-hand side: the
/// ancestor holding exactly the tasks of T(n) preferred to `t` must have a
/// child holding `t`.
pub fn stability_lhs_tree(inst: &Instance, tree: &LexTree, node_idx: usize, t: usize) -> bool {
    let agent = tree.agent();
    let node = tree.node(node_idx);
    if node.path.contains(&t) {
        return false;
    }
    let Some(t_pos) = inst.agent_pref_pos(agent, t) else {
        return false;
    };
    let keep = node
        .path
        .iter()
        .filter(|&&u| inst.agent_pref_pos(agent, u).unwrap() < t_pos)
        .count();
    let mut anc = node_idx;
    for _ in 0..(node.path.len() - keep) {
        anc = tree.node(anc).parent.expect("depth bounded by path length");
    }
    tree.node(anc)
        .children
        .iter()
        .any(|&c| tree.node(c).held == Some(t))
}

/// Choice-based membership test for the same condition:
/// t ∉ T(n) and t ∈ Ch(a, T(n) ∪ {t}). Independent route used to
/// cross-check [`stability_lhs_tree`].
pub fn stability_lhs_choice(inst: &Instance, agent: usize, node_tasks: &[usize], t: usize) -> bool {
    if node_tasks.contains(&t) {
        return false;
    }
    let mut offered = node_tasks.to_vec();
    offered.push(t);
    lextree::choice(inst, agent, &offered).contains(&t)
}

impl IpModel {
    /// Evaluates a total valuation: per-row satisfaction, the decoded
    /// matching when assignment and capacity rows hold, and the violated
    /// stability rows.
    pub fn check_valuation(
        &self,
        inst: &Instance,
        values: &[bool],
    ) -> Result<ValuationReport, IpError> {
        if values.len() != self.vars.len() {
            return Err(IpError::PartialValuation {
                got: values.len(),
                expected: self.vars.len(),
            });
        }
        let mut row_satisfied = Vec::with_capacity(self.rows.len());
        let mut assignment_ok = true;
        let mut violated_stability = Vec::new();
        for row in &self.rows {
            let total: i64 = row
                .terms
                .iter()
                .map(|&(v, c)| if values[v] { c as i64 } else { 0 })
                .sum();
            let ok = match row.relation {
                Relation::Le => total <= row.rhs,
                Relation::Eq => total == row.rhs,
            };
            row_satisfied.push(ok);
            if !ok {
                match row.kind {
                    RowKind::Stability(t, a) => violated_stability.push((t, a)),
                    _ => assignment_ok = false,
                }
            }
        }
        let matching = if assignment_ok {
            let mut by_agent = vec![Vec::new(); inst.agent_count()];
            for (v, info) in self.vars.iter().enumerate() {
                if values[v] {
                    if let VarKind::X { agent, ref tasks, .. } = info.kind {
                        by_agent[agent] = tasks.clone();
                    }
                }
            }
            Matching::new(inst, by_agent).ok()
        } else {
            None
        };
        let objective_value = self
            .vars
            .iter()
            .enumerate()
            .map(|(v, info)| if values[v] { info.objective } else { 0 })
            .sum();
        Ok(ValuationReport {
            row_satisfied,
            assignment_ok,
            matching,
            violated_stability,
            objective_value,
        })
    }

    /// Emits the model in LP text format (Maximize / Subject To / Binary /
    /// End); deterministic and byte-identical for identical models.
    pub fn export_lp(&self, inst: &Instance) -> String {
        let mut out = String::from("Maximize\n obj:");
        let mut first = true;
        for info in &self.vars {
            let c = info.objective;
            if first {
                out.push_str(&format!(" {c} {}", info.name));
                first = false;
            } else if c < 0 {
                out.push_str(&format!(" - {} {}", -c, info.name));
            } else {
                out.push_str(&format!(" + {c} {}", info.name));
            }
        }
        out.push_str("\nSubject To\n");
        for row in &self.rows {
            let name = match row.kind {
                RowKind::AgentAssignment(a) => format!("r_agent_{}", inst.agent_name(a)),
                RowKind::TaskCapacity(t) => format!("r_task_{}", inst.task_name(t)),
                RowKind::Stability(t, a) => {
                    format!("r_stab_{}_{}", inst.task_name(t), inst.agent_name(a))
                }
            };
            out.push_str(&format!(" {name}:"));
            if row.terms.is_empty() {
                // LP readers reject empty expressions; 0 <var> is inert.
                if let Some(info) = self.vars.first() {
                    out.push_str(&format!(" 0 {}", info.name));
                }
            }
            for (i, &(v, c)) in row.terms.iter().enumerate() {
                let name = &self.vars[v].name;
                if i == 0 {
                    if c < 0 {
                        out.push_str(&format!(" - {name}"));
                    } else {
                        out.push_str(&format!(" {name}"));
                    }
                } else if c < 0 {
                    out.push_str(&format!(" - {name}"));
                } else {
                    out.push_str(&format!(" + {name}"));
                }
            }
            let rel = match row.relation {
                Relation::Le => "<=",
                Relation::Eq => "=",
            };
            out.push_str(&format!(" {rel} {}\n", row.rhs));
        }
        out.push_str("Binary\n");
        for info in &self.vars {
            out.push_str(&format!(" {}\n", info.name));
        }
        out.push_str("End\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EX1: &str = include_str!("../fixtures/ex1.json");
    const EX2: &str = include_str!("../fixtures/ex2.json");

    fn inst(text: &str) -> Instance {
        Instance::parse(text).unwrap()
    }

    fn example_model() -> (Instance, IpModel) {
        let inst = inst(EX1);
        let model = build_ip(&inst, &Objective::MaxTasks, &TreeLimits::default()).unwrap();
        (inst, model)
    }

    #[test]
    fn example_formulation_shape() {
        let (_, model) = example_model();
        assert_eq!(model.vars.len(), 7);
        assert_eq!(model.rows.len(), 8);
        let coeffs: Vec<i64> = model.vars.iter().map(|v| v.objective).collect();
        assert_eq!(coeffs, [2, 1, 1, 0, 1, 1, 0]);
        let names: Vec<&str> = model.vars.iter().map(|v| v.name.as_str()).collect();
        assert_eq!(
            names,
            ["X_a1_1", "X_a1_2", "X_a1_3", "X_a1_4", "X_a2_1", "X_a2_2", "X_a2_3"]
        );
    }

    #[test]
    fn example_stability_row_t1_a2() {
        // Example row: X23 <= X22.
        let (_, model) = example_model();
        let row = model
            .rows
            .iter()
            .find(|r| matches!(r.kind, RowKind::Stability(0, 1)))
            .unwrap();
        let terms: Vec<(&str, i8)> = row
            .terms
            .iter()
            .map(|&(v, c)| (model.vars[v].name.as_str(), c))
            .collect();
        assert_eq!(terms, [("X_a2_3", 1), ("X_a2_2", -1)]);
    }

    #[test]
    fn example_full_row_listing() {
        let (inst, model) = example_model();
        let lp = model.export_lp(&inst);
        let expected = "\
Maximize
 obj: 2 X_a1_1 + 1 X_a1_2 + 1 X_a1_3 + 0 X_a1_4 + 1 X_a2_1 + 1 X_a2_2 + 0 X_a2_3
Subject To
 r_agent_a1: X_a1_1 + X_a1_2 + X_a1_3 + X_a1_4 = 1
 r_agent_a2: X_a2_1 + X_a2_2 + X_a2_3 = 1
 r_task_t1: X_a1_1 + X_a1_2 + X_a2_2 <= 1
 r_task_t2: X_a1_1 + X_a1_3 + X_a2_1 <= 1
 r_stab_t1_a1: X_a1_3 + X_a1_4 - X_a1_1 - X_a1_2 - X_a2_2 <= 0
 r_stab_t1_a2: X_a2_3 - X_a2_2 <= 0
 r_stab_t2_a1: X_a1_2 + X_a1_4 - X_a1_1 - X_a1_3 <= 0
 r_stab_t2_a2: X_a2_2 + X_a2_3 - X_a1_1 - X_a1_3 - X_a2_1 <= 0
Binary
 X_a1_1
 X_a1_2
 X_a1_3
 X_a1_4
 X_a2_1
 X_a2_2
 X_a2_3
End
";
        assert_eq!(lp, expected);
    }

    #[test]
    fn minimal_instance_has_three_rows() {
        let text = r#"{
            "agents": ["a"], "tasks": ["t"],
            "task_prefs": {"t": ["a"]},
            "agent_prefs": {"a": ["t"]},
            "feasibility": {"a": {"kind": "maximal_sets", "sets": [["t"]]}}
        }"#;
        let model = build_ip(&inst(text), &Objective::MaxTasks, &TreeLimits::default()).unwrap();
        assert_eq!(model.rows.len(), 3);
    }

    #[test]
    fn relaxed_model_has_one_y_per_pair() {
        let inst = inst(EX2);
        let model = build_relaxed_ip(&inst, &Objective::MaxTasks, &TreeLimits::default()).unwrap();
        let y_count = model
            .vars
            .iter()
            .filter(|v| matches!(v.kind, VarKind::Y { .. }))
            .count();
        assert_eq!(y_count, 5);
        assert!(model.penalty > 0);
    }

    #[test]
    fn valuation_of_example_solution() {
        let (inst, model) = example_model();
        // X13 = X22 = 1.
        let mut values = vec![false; model.vars.len()];
        values[2] = true;
        values[5] = true;
        let report = model.check_valuation(&inst, &values).unwrap();
        assert!(report.all_satisfied());
        let m = report.matching.unwrap();
        assert_eq!(m.agent_tasks(0), &[inst.task_id("t2").unwrap()]);
        assert_eq!(m.agent_tasks(1), &[inst.task_id("t1").unwrap()]);
        assert_eq!(report.objective_value, 2);
    }

    #[test]
    fn valuation_capacity_violation() {
        let (inst, model) = example_model();
        // X11 = X21 = 1: both want t2.
        let mut values = vec![false; model.vars.len()];
        values[0] = true;
        values[4] = true;
        let report = model.check_valuation(&inst, &values).unwrap();
        assert!(!report.assignment_ok);
        let t2_row = model
            .rows
            .iter()
            .position(|r| matches!(r.kind, RowKind::TaskCapacity(1)))
            .unwrap();
        assert!(!report.row_satisfied[t2_row]);
    }

    #[test]
    fn valuation_all_roots() {
        let (inst, model) = example_model();
        // X14 = X23 = 1: valid empty matching, stability rows violated.
        let mut values = vec![false; model.vars.len()];
        values[3] = true;
        values[6] = true;
        let report = model.check_valuation(&inst, &values).unwrap();
        assert!(report.assignment_ok);
        assert!(!report.violated_stability.is_empty());
        assert_eq!(report.matching.unwrap().assigned_task_count(), 0);
    }

    #[test]
    fn partial_valuation_rejected() {
        let (inst, model) = example_model();
        assert!(matches!(
            model.check_valuation(&inst, &[true]),
            Err(IpError::PartialValuation { .. })
        ));
    }

    #[test]
    fn lhs_routes_agree_on_examples() {
        for text in [EX1, EX2] {
            let inst = inst(text);
            for a in 0..inst.agent_count() {
                let tree = lextree::build_tree(&inst, a, &TreeLimits::default()).unwrap();
                for idx in 0..tree.len() {
                    for &t in inst.agent_pref_list(a) {
                        assert_eq!(
                            stability_lhs_tree(&inst, &tree, idx, t),
                            stability_lhs_choice(&inst, a, &tree.node(idx).path, t),
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn empty_instance_exports_empty_program() {
        let inst = inst(r#"{"agents": [], "tasks": []}"#);
        let model = build_ip(&inst, &Objective::MaxTasks, &TreeLimits::default()).unwrap();
        assert!(model.vars.is_empty());
        assert!(model.rows.is_empty());
        let lp = model.export_lp(&inst);
        assert!(lp.starts_with("Maximize"));
        assert!(lp.ends_with("End\n"));
    }
}
