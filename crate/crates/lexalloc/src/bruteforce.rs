//! Exhaustive reference implementations used to cross-check the main
//! algorithms at toy scale: subset-enumeration choice, coalition-based
//! blocking, and minimum-instability search. None of these are on the main
//! solving path; they exist as independent oracles for tests and audits.

use std::cmp::Ordering;

use crate::instance::Instance;
use crate::lextree::{self, TreeError, TreeLimits};
use crate::matching::{self, Matching};

/// Lexicographic argmax of F(a, S) by enumerating every subset of
/// S ∩ T(a). Exponential; intended for |T(a)| at desk scale only.
/// Returned sorted by task index.
pub fn choice_argmax(inst: &Instance, agent: usize, offered: &[usize]) -> Vec<usize> {
    let pool: Vec<usize> = inst
        .agent_pref_list(agent)
        .iter()
        .copied()
        .filter(|t| offered.contains(t))
        .collect();
    let mut best: Vec<usize> = Vec::new();
    for mask in 0u64..(1 << pool.len()) {
        let subset: Vec<usize> = pool
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, &t)| t)
            .collect();
        if !inst.feasible(agent, &subset) {
            continue;
        }
        if lextree::compare_alloc(inst, agent, &subset, &best).unwrap() == Ordering::Greater {
            best = subset;
        }
    }
    best.sort_unstable();
    best
}

/// Tests whether the coalition made of exactly `agents` and `tasks` blocks
/// `m`: some matching reassigns every coalition task within the coalition,
/// leaves outside tasks either untouched or unassigned, and strictly
/// improves every coalition member.
fn coalition_blocks(
    inst: &Instance,
    m: &Matching,
    agents: &[usize],
    tasks: &[usize],
    universe: &[Matching],
) -> bool {
    universe.iter().any(|m2| {
        // (i) every coalition task is matched inside the coalition
        tasks
            .iter()
            .all(|&t| matches!(m2.task_agent(t), Some(a) if agents.contains(&a)))
            // (ii) tasks outside keep their match or become unassigned
            && (0..inst.task_count()).all(|t| {
                tasks.contains(&t)
                    || m2.task_agent(t) == m.task_agent(t)
                    || m2.task_agent(t).is_none()
            })
            // (iii) strict improvement for every coalition member
            && tasks.iter().all(|&t| {
                let new = m2.task_agent(t).map(|a| inst.task_pref_pos(t, a).unwrap());
                let old = m.task_agent(t).map(|a| inst.task_pref_pos(t, a).unwrap());
                match (new, old) {
                    (Some(n), Some(o)) => n < o,
                    (Some(_), None) => true,
                    _ => false,
                }
            })
            && agents.iter().all(|&a| {
                lextree::compare_alloc(inst, a, m2.agent_tasks(a), m.agent_tasks(a)).unwrap()
                    == Ordering::Greater
            })
    })
}

/// Blocking test for the pair coalition C = {a, t}, straight from the
/// coalition definition (exhaustive over all matchings).
pub fn pair_blocks_by_coalition(
    inst: &Instance,
    m: &Matching,
    a: usize,
    t: usize,
    limits: &TreeLimits,
) -> Result<bool, TreeError> {
    let universe: Vec<Matching> = matching::enumerate_matchings(inst, limits)?.collect();
    Ok(coalition_blocks(inst, m, &[a], &[t], &universe))
}

/// Whether any blocking coalition of any size exists for `m`.
pub fn has_blocking_coalition(
    inst: &Instance,
    m: &Matching,
    limits: &TreeLimits,
) -> Result<bool, TreeError> {
    let universe: Vec<Matching> = matching::enumerate_matchings(inst, limits)?.collect();
    let na = inst.agent_count();
    let nt = inst.task_count();
    for amask in 1u64..(1 << na) {
        let agents: Vec<usize> = (0..na).filter(|a| amask >> a & 1 == 1).collect();
        for tmask in 1u64..(1 << nt) {
            let tasks: Vec<usize> = (0..nt).filter(|t| tmask >> t & 1 == 1).collect();
            if coalition_blocks(inst, m, &agents, &tasks, &universe) {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

/// Minimum blocking-pair count over all valid matchings, with one witness
/// matching attaining it. `None` for instances with no matchings at all
/// (cannot happen: the empty matching always exists).
pub fn min_blocking_count(
    inst: &Instance,
    limits: &TreeLimits,
) -> Result<Option<(usize, Matching)>, TreeError> {
    let mut best: Option<(usize, Matching)> = None;
    for m in matching::enumerate_matchings(inst, limits)? {
        let count = matching::check_stability(inst, &m).blocking_pairs.len();
        if best.as_ref().map_or(true, |(b, _)| count < *b) {
            best = Some((count, m));
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    const EX2: &str = include_str!("../fixtures/ex2.json");

    #[test]
    fn choice_argmax_matches_greedy_on_ex2() {
        let inst = Instance::parse(EX2).unwrap();
        for a in 0..inst.agent_count() {
            for mask in 0u32..(1 << inst.task_count()) {
                let offered: Vec<usize> = (0..inst.task_count())
                    .filter(|t| mask >> t & 1 == 1)
                    .collect();
                let mut greedy = lextree::choice(&inst, a, &offered);
                greedy.sort_unstable();
                assert_eq!(greedy, choice_argmax(&inst, a, &offered));
            }
        }
    }

    #[test]
    fn every_ex2_matching_has_a_coalition_and_a_pair() {
        let inst = Instance::parse(EX2).unwrap();
        let limits = TreeLimits::default();
        for m in matching::enumerate_matchings(&inst, &limits).unwrap() {
            assert!(has_blocking_coalition(&inst, &m, &limits).unwrap());
            assert!(!matching::check_stability(&inst, &m).stable);
        }
    }

    #[test]
    fn ex2_min_blocking_is_positive() {
        let inst = Instance::parse(EX2).unwrap();
        let (count, m) = min_blocking_count(&inst, &TreeLimits::default())
            .unwrap()
            .unwrap();
        assert!(count >= 1);
        assert_eq!(
            matching::check_stability(&inst, &m).blocking_pairs.len(),
            count
        );
    }
}
