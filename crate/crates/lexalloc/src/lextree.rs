//! Lexicographic preference machinery: the per-agent allocation tree, the
//! induced total order on feasible task sets, and choice functions.
//!
//! Each node of the tree represents one feasible allocation by its
//! preference-sorted task sequence; children are ordered left-to-right in
//! decreasing preference of the held task, and only tasks strictly less
//! preferred than the parent's held task extend a path, so every feasible
//! set appears exactly once. Node ranks follow a post-order traversal with
//! children visited left-to-right: the leftmost leaf (the agent's most
//! preferred allocation) gets rank 1 and the root rank |D(a)|.

use std::cmp::Ordering;
use std::collections::HashSet;

use thiserror::Error;

use crate::instance::Instance;

#[derive(Debug, Error)]
pub enum TreeError {
    #[error("lexicographic tree exceeds the node limit {0}")]
    TooManyNodes(usize),
    #[error("lexicographic tree exceeds the depth limit {0}")]
    TooDeep(usize),
    #[error("unknown agent `{0}`")]
    UnknownAgent(String),
    #[error("allocation {0:?} is not feasible for agent `{1}`")]
    InfeasibleAllocation(Vec<String>, String),
}

/// Guards against the super-polynomial worst-case tree size.
#[derive(Debug, Clone, Copy)]
pub struct TreeLimits {
    pub max_nodes: usize,
    pub max_depth: Option<usize>,
}

impl Default for TreeLimits {
    fn default() -> Self {
        TreeLimits {
            max_nodes: 1_000_000,
            max_depth: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TreeNode {
    /// Task held by this node; `None` for the root.
    pub held: Option<usize>,
    pub parent: Option<usize>,
    /// Child node indices, left-to-right in decreasing held-task preference.
    pub children: Vec<usize>,
    /// T(q): tasks on the root path, in decreasing preference.
    pub path: Vec<usize>,
    /// 1-based preference rank; 1 = most preferred allocation.
    pub rank: usize,
}

/// The lexicographic tree D(a) of one agent's feasible allocations.
#[derive(Debug, Clone)]
pub struct LexTree {
    agent: usize,
    nodes: Vec<TreeNode>,
    /// order[r - 1] = index of the node with rank r.
    order: Vec<usize>,
}

impl LexTree {
    pub fn agent(&self) -> usize {
        self.agent
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false // a tree always has its root
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn node(&self, idx: usize) -> &TreeNode {
        &self.nodes[idx]
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    /// Node index holding rank `r` (1-based).
    pub fn by_rank(&self, r: usize) -> usize {
        self.order[r - 1]
    }

    /// Nodes sorted by rank, most preferred allocation first.
    pub fn nodes_by_rank(&self) -> impl Iterator<Item = &TreeNode> {
        self.order.iter().map(|&i| &self.nodes[i])
    }

    /// Leftmost leaf of the subtree rooted at `idx`.
    pub fn leftmost_leaf(&self, mut idx: usize) -> usize {
        while let Some(&first) = self.nodes[idx].children.first() {
            idx = first;
        }
        idx
    }

    /// D(a; S): the subtree induced by root paths holding only tasks in
    /// `keep`. Child order is preserved and ranks are recomputed.
    pub fn restricted_subtree(&self, keep: &[usize]) -> LexTree {
        let keep: HashSet<usize> = keep.iter().copied().collect();
        let mut nodes = vec![TreeNode {
            held: None,
            parent: None,
            children: Vec::new(),
            path: Vec::new(),
            rank: 0,
        }];
        // (old node, new parent) pairs, depth-first, children left-to-right.
        let mut stack: Vec<(usize, usize)> = self.nodes[0]
            .children
            .iter()
            .rev()
            .map(|&c| (c, 0))
            .collect();
        while let Some((old, parent)) = stack.pop() {
            let node = &self.nodes[old];
            let held = node.held.expect("non-root node holds a task");
            if !keep.contains(&held) {
                continue;
            }
            let new = nodes.len();
            nodes.push(TreeNode {
                held: Some(held),
                parent: Some(parent),
                children: Vec::new(),
                path: node.path.clone(),
                rank: 0,
            });
            nodes[parent].children.push(new);
            for &c in node.children.iter().rev() {
                stack.push((c, new));
            }
        }
        let order = assign_ranks(&mut nodes);
        LexTree {
            agent: self.agent,
            nodes,
            order,
        }
    }
}

/// Builds D(a) depth-first, extending each path with every strictly less
/// preferred task that keeps the path feasible.
pub fn build_tree(inst: &Instance, agent: usize, limits: &TreeLimits) -> Result<LexTree, TreeError> {
    let prefs = inst.agent_pref_list(agent);
    let mut nodes = vec![TreeNode {
        held: None,
        parent: None,
        children: Vec::new(),
        path: Vec::new(),
        rank: 0,
    }];
    // Stack entries: (node index, position in T(a) after which to extend).
    let mut stack: Vec<(usize, usize)> = vec![(0, 0)];
    while let Some((idx, start)) = stack.pop() {
        let mut children = Vec::new();
        for pos in start..prefs.len() {
            let t = prefs[pos];
            let mut candidate = nodes[idx].path.clone();
            candidate.push(t);
            if !inst.feasible(agent, &candidate) {
                continue;
            }
            if let Some(max_depth) = limits.max_depth {
                if candidate.len() > max_depth {
                    return Err(TreeError::TooDeep(max_depth));
                }
            }
            let child = nodes.len();
            if child >= limits.max_nodes {
                return Err(TreeError::TooManyNodes(limits.max_nodes));
            }
            nodes.push(TreeNode {
                held: Some(t),
                parent: Some(idx),
                children: Vec::new(),
                path: candidate,
                rank: 0,
            });
            children.push((child, pos + 1));
        }
        for &(child, _) in &children {
            nodes[idx].children.push(child);
        }
        for &entry in children.iter().rev() {
            stack.push(entry);
        }
    }
    let order = assign_ranks(&mut nodes);
    Ok(LexTree {
        agent,
        nodes,
        order,
    })
}

/// Post-order traversal, children left-to-right; returns rank order.
fn assign_ranks(nodes: &mut [TreeNode]) -> Vec<usize> {
    let mut order = Vec::with_capacity(nodes.len());
    // (node, next child position)
    let mut stack: Vec<(usize, usize)> = vec![(0, 0)];
    while let Some(&(idx, next)) = stack.last() {
        if next < nodes[idx].children.len() {
            stack.last_mut().unwrap().1 += 1;
            stack.push((nodes[idx].children[next], 0));
        } else {
            stack.pop();
            nodes[idx].rank = order.len() + 1;
            order.push(idx);
        }
    }
    order
}

/// Lexicographic comparison of two feasible allocations of `agent`.
/// `Greater` means `s1` is preferred; a proper prefix loses to its extension.
pub fn compare_alloc(
    inst: &Instance,
    agent: usize,
    s1: &[usize],
    s2: &[usize],
) -> Result<Ordering, TreeError> {
    let seq1 = pref_sorted(inst, agent, s1)?;
    let seq2 = pref_sorted(inst, agent, s2)?;
    for (p1, p2) in seq1.iter().zip(&seq2) {
        match p1.cmp(p2) {
            Ordering::Equal => continue,
            // Smaller position = more preferred task = greater allocation.
            Ordering::Less => return Ok(Ordering::Greater),
            Ordering::Greater => return Ok(Ordering::Less),
        }
    }
    Ok(seq1.len().cmp(&seq2.len()))
}

/// Preference positions of a feasible set, sorted decreasing-preference.
fn pref_sorted(inst: &Instance, agent: usize, set: &[usize]) -> Result<Vec<usize>, TreeError> {
    if !inst.feasible(agent, set) {
        return Err(TreeError::InfeasibleAllocation(
            set.iter().map(|&t| inst.task_name(t).to_string()).collect(),
            inst.agent_name(agent).to_string(),
        ));
    }
    let mut seq: Vec<usize> = set
        .iter()
        .map(|&t| inst.agent_pref_pos(agent, t).expect("feasible ⇒ acceptable"))
        .collect();
    seq.sort_unstable();
    Ok(seq)
}

/// Ch(a, S): the lexicographic maximum of F(a, S), computed greedily over
/// T(a) ∩ S in decreasing preference. Tasks outside T(a) are ignored.
/// Returned in decreasing preference order.
pub fn choice(inst: &Instance, agent: usize, offered: &[usize]) -> Vec<usize> {
    let offered: HashSet<usize> = offered.iter().copied().collect();
    let mut chosen: Vec<usize> = Vec::new();
    for &t in inst.agent_pref_list(agent) {
        if offered.contains(&t) {
            chosen.push(t);
            if !inst.feasible(agent, &chosen) {
                chosen.pop();
            }
        }
    }
    chosen
}

/// Ch(t, S): the most preferred agent of A(t) among `offered`, if any.
pub fn task_choice(inst: &Instance, task: usize, offered: &[usize]) -> Option<usize> {
    offered
        .iter()
        .copied()
        .filter(|&a| inst.task_pref_pos(task, a).is_some())
        .min_by_key(|&a| inst.task_pref_pos(task, a).unwrap())
}

/// Renders a tree as indented text, one node per line.
pub fn render_text(inst: &Instance, tree: &LexTree) -> String {
    let mut out = format!(
        "D({})  {} nodes\n",
        inst.agent_name(tree.agent()),
        tree.len()
    );
    let mut stack: Vec<(usize, usize)> = vec![(tree.root(), 0)];
    while let Some((idx, depth)) = stack.pop() {
        let node = tree.node(idx);
        let label = match node.held {
            Some(t) => inst.task_name(t),
            None => "∅",
        };
        let path = if node.path.is_empty() {
            "∅".to_string()
        } else {
            node.path
                .iter()
                .map(|&t| inst.task_name(t))
                .collect::<Vec<_>>()
                .join(" ")
        };
        out.push_str(&format!(
            "{}{label} [rank {}] T(q)={path}\n",
            "  ".repeat(depth),
            node.rank
        ));
        for &c in node.children.iter().rev() {
            stack.push((c, depth + 1));
        }
    }
    out
}

/// Renders a tree as a DOT digraph; node label = held task, annotated with
/// rank and T(q).
pub fn render_dot(inst: &Instance, tree: &LexTree) -> String {
    let mut out = String::from("digraph lextree {\n  node [shape=circle];\n");
    for (idx, node) in tree.nodes().iter().enumerate() {
        let label = match node.held {
            Some(t) => inst.task_name(t).to_string(),
            None => "∅".to_string(),
        };
        let path = node
            .path
            .iter()
            .map(|&t| inst.task_name(t))
            .collect::<Vec<_>>()
            .join(" ");
        out.push_str(&format!(
            "  n{idx} [label=\"{label}\\nrank {}\\n{{{path}}}\"];\n",
            node.rank
        ));
    }
    for (idx, node) in tree.nodes().iter().enumerate() {
        for &c in &node.children {
            out.push_str(&format!("  n{idx} -> n{c};\n"));
        }
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const EX1: &str = include_str!("../fixtures/ex1.json");
    const EX2: &str = include_str!("../fixtures/ex2.json");

    fn inst(text: &str) -> Instance {
        let inst = Instance::parse(text).unwrap();
        assert!(inst.validate().ok);
        inst
    }

    fn rank_paths(inst: &Instance, tree: &LexTree) -> Vec<Vec<String>> {
        tree.nodes_by_rank()
            .map(|n| {
                n.path
                    .iter()
                    .map(|&t| inst.task_name(t).to_string())
                    .collect()
            })
            .collect()
    }

    #[test]
    fn example_tree_a1() {
        let inst = inst(EX1);
        let a1 = inst.agent_id("a1").unwrap();
        let tree = build_tree(&inst, a1, &TreeLimits::default()).unwrap();
        assert_eq!(tree.len(), 4);
        let paths = rank_paths(&inst, &tree);
        assert_eq!(
            paths,
            [
                vec!["t1".to_string(), "t2".to_string()],
                vec!["t1".to_string()],
                vec!["t2".to_string()],
                vec![],
            ]
        );
        assert_eq!(tree.node(tree.root()).rank, 4);
        assert_eq!(tree.node(tree.leftmost_leaf(tree.root())).rank, 1);
    }

    #[test]
    fn example_tree_a2() {
        let inst = inst(EX1);
        let a2 = inst.agent_id("a2").unwrap();
        let tree = build_tree(&inst, a2, &TreeLimits::default()).unwrap();
        assert_eq!(tree.len(), 3);
        let paths = rank_paths(&inst, &tree);
        assert_eq!(
            paths,
            [vec!["t2".to_string()], vec!["t1".to_string()], vec![]]
        );
    }

    #[test]
    fn ex2_tree_a1_shape() {
        let inst = inst(EX2);
        let a1 = inst.agent_id("a1").unwrap();
        let tree = build_tree(&inst, a1, &TreeLimits::default()).unwrap();
        assert_eq!(tree.len(), 5);
        let level1: Vec<&str> = tree
            .node(tree.root())
            .children
            .iter()
            .map(|&c| inst.task_name(tree.node(c).held.unwrap()))
            .collect();
        assert_eq!(level1, ["t1", "t3", "t2"]);
        // Single level-2 node: t2 under t1.
        let t1_node = tree.node(tree.root()).children[0];
        let kids = &tree.node(t1_node).children;
        assert_eq!(kids.len(), 1);
        assert_eq!(inst.task_name(tree.node(kids[0]).held.unwrap()), "t2");
    }

    #[test]
    fn empty_acceptance_gives_root_only() {
        let text = r#"{
            "agents": ["a"], "tasks": [],
            "agent_prefs": {"a": []},
            "feasibility": {"a": {"kind": "maximal_sets", "sets": []}}
        }"#;
        let inst = Instance::parse(text).unwrap();
        let tree = build_tree(&inst, 0, &TreeLimits::default()).unwrap();
        assert_eq!(tree.len(), 1);
        assert_eq!(tree.node(0).rank, 1);
    }

    #[test]
    fn node_limit_enforced() {
        let inst = inst(EX1);
        let a1 = inst.agent_id("a1").unwrap();
        let limits = TreeLimits {
            max_nodes: 2,
            max_depth: None,
        };
        assert!(matches!(
            build_tree(&inst, a1, &limits),
            Err(TreeError::TooManyNodes(2))
        ));
    }

    #[test]
    fn compare_follows_figure_ranks() {
        let inst = inst(EX1);
        let a1 = inst.agent_id("a1").unwrap();
        let t1 = inst.task_id("t1").unwrap();
        let t2 = inst.task_id("t2").unwrap();
        assert_eq!(
            compare_alloc(&inst, a1, &[t1, t2], &[t1]).unwrap(),
            Ordering::Greater
        );
        assert_eq!(
            compare_alloc(&inst, a1, &[t1], &[t2]).unwrap(),
            Ordering::Greater
        );
        assert_eq!(
            compare_alloc(&inst, a1, &[t1], &[t1]).unwrap(),
            Ordering::Equal
        );
        assert!(matches!(
            compare_alloc(&inst, inst.agent_id("a2").unwrap(), &[t1, t2], &[t1]),
            Err(TreeError::InfeasibleAllocation(..))
        ));
    }

    #[test]
    fn choice_examples() {
        let ex1 = inst(EX1);
        let a1 = ex1.agent_id("a1").unwrap();
        let t1 = ex1.task_id("t1").unwrap();
        let t2 = ex1.task_id("t2").unwrap();
        assert_eq!(choice(&ex1, a1, &[t1, t2]), vec![t1, t2]);
        assert_eq!(choice(&ex1, a1, &[]), Vec::<usize>::new());

        let ex2 = inst(EX2);
        let a1 = ex2.agent_id("a1").unwrap();
        let t1 = ex2.task_id("t1").unwrap();
        let t3 = ex2.task_id("t3").unwrap();
        assert_eq!(choice(&ex2, a1, &[t1, t3]), vec![t1]);
    }

    #[test]
    fn task_choice_examples() {
        let ex1 = inst(EX1);
        let t1 = ex1.task_id("t1").unwrap();
        assert_eq!(task_choice(&ex1, t1, &[0, 1]), ex1.agent_id("a2"));
        assert_eq!(task_choice(&ex1, t1, &[]), None);

        let ex2 = inst(EX2);
        let t3 = ex2.task_id("t3").unwrap();
        let a2 = ex2.agent_id("a2").unwrap();
        assert_eq!(task_choice(&ex2, t3, &[a2]), None);
    }

    #[test]
    fn restricted_subtree_examples() {
        let ex2 = inst(EX2);
        let a1 = ex2.agent_id("a1").unwrap();
        let tree = build_tree(&ex2, a1, &TreeLimits::default()).unwrap();
        let all: Vec<usize> = (0..ex2.task_count()).collect();
        assert_eq!(tree.restricted_subtree(&all).len(), tree.len());

        let t2 = ex2.task_id("t2").unwrap();
        let t3 = ex2.task_id("t3").unwrap();
        let sub = tree.restricted_subtree(&[t3, t2]);
        assert_eq!(sub.len(), 3);
        let level1: Vec<&str> = sub
            .node(sub.root())
            .children
            .iter()
            .map(|&c| ex2.task_name(sub.node(c).held.unwrap()))
            .collect();
        assert_eq!(level1, ["t3", "t2"]);

        assert_eq!(tree.restricted_subtree(&[]).len(), 1);
    }

    #[test]
    fn leftmost_leaf_of_restriction_is_choice() {
        let ex2 = inst(EX2);
        let a1 = ex2.agent_id("a1").unwrap();
        let tree = build_tree(&ex2, a1, &TreeLimits::default()).unwrap();
        for mask in 0u32..(1 << ex2.task_count()) {
            let set: Vec<usize> =
                (0..ex2.task_count()).filter(|t| mask >> t & 1 == 1).collect();
            let sub = tree.restricted_subtree(&set);
            let leaf = sub.node(sub.leftmost_leaf(sub.root()));
            let mut expect = choice(&ex2, a1, &set);
            let mut got = leaf.path.clone();
            expect.sort_unstable();
            got.sort_unstable();
            assert_eq!(got, expect);
        }
    }
}
