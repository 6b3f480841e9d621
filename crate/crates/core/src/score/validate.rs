use std::collections::VecDeque;

use super::types::{DependencyGraph, QuestionCategory, QuestionId};
use super::{CategoryViolation, ScoreError};

/// A graph that passed structural validation, with its topological order
/// and per-question depth precomputed.
#[derive(Debug, Clone)]
pub struct ValidatedGraph {
    graph: DependencyGraph,
    parents: Vec<Vec<usize>>,
    topo_order: Vec<usize>,
    depths: Vec<Option<u32>>,
}

impl ValidatedGraph {
    pub fn graph(&self) -> &DependencyGraph {
        &self.graph
    }

    pub fn into_graph(self) -> DependencyGraph {
        self.graph
    }

    /// Question indices, parents before children.
    pub fn topo_order(&self) -> &[usize] {
        &self.topo_order
    }

    pub(crate) fn parent_indices(&self, idx: usize) -> &[usize] {
        &self.parents[idx]
    }

    /// Edge distance to the nearest ICQ ancestor; `None` for ICQ and CPQ roots.
    pub fn depth(&self, id: &QuestionId) -> Option<u32> {
        self.graph.position(id).and_then(|i| self.depths[i])
    }

    pub(crate) fn depth_at(&self, idx: usize) -> Option<u32> {
        self.depths[idx]
    }
}

/// Checks the structural rules of a dependency graph.
///
/// Checks run in a fixed order: emptiness, dangling parents, cycles, then
/// category placement. The first failing check determines the error.
pub fn validate_graph(graph: DependencyGraph) -> Result<ValidatedGraph, ScoreError> {
    if graph.is_empty() {
        return Err(ScoreError::EmptyGraph);
    }

    let questions = graph.questions();
    let mut dangling = Vec::new();
    let mut parents = Vec::with_capacity(questions.len());
    for q in questions {
        let mut resolved = Vec::with_capacity(q.parents().len());
        for p in q.parents() {
            match graph.position(p) {
                Some(i) => resolved.push(i),
                None => dangling.push((q.id().clone(), p.clone())),
            }
        }
        parents.push(resolved);
    }
    if !dangling.is_empty() {
        return Err(ScoreError::DanglingParent { unresolved: dangling });
    }

    if let Some(cycle) = find_cycle(&parents) {
        let cycle = cycle.into_iter().map(|i| questions[i].id().clone()).collect();
        return Err(ScoreError::CycleDetected { cycle });
    }

    for (q, ps) in questions.iter().zip(&parents) {
        match q.category() {
            QuestionCategory::Icq if !ps.is_empty() => {
                return Err(CategoryViolation::ParentedIcq(q.id().clone()).into());
            }
            QuestionCategory::Cpq if !ps.is_empty() => {
                return Err(CategoryViolation::ParentedCpq(q.id().clone()).into());
            }
            QuestionCategory::Idq if ps.is_empty() => {
                return Err(CategoryViolation::OrphanIdq(q.id().clone()).into());
            }
            QuestionCategory::Idq => {
                if let Some(&p) = ps.iter().find(|&&p| questions[p].category() == QuestionCategory::Cpq) {
                    return Err(CategoryViolation::IdqUnderCpq {
                        question: q.id().clone(),
                        parent: questions[p].id().clone(),
                    }
                    .into());
                }
            }
            _ => {}
        }
    }
    if !questions.iter().any(|q| q.category() == QuestionCategory::Icq) {
        return Err(CategoryViolation::NoIcq.into());
    }

    let topo_order = topological_order(&parents);
    let mut depths: Vec<Option<u32>> = vec![None; questions.len()];
    for &i in &topo_order {
        if questions[i].category() != QuestionCategory::Idq {
            continue;
        }
        // Parents are ICQ or IDQ here, and IDQ parents were visited first.
        depths[i] = parents[i]
            .iter()
            .map(|&p| match questions[p].category() {
                QuestionCategory::Icq => 1,
                _ => depths[p].expect("IDQ parent depth assigned in topological order") + 1,
            })
            .min();
    }

    Ok(ValidatedGraph { graph, parents, topo_order, depths })
}

/// Iterative three-colour DFS over parent edges. Returns the nodes of one cycle.
fn find_cycle(parents: &[Vec<usize>]) -> Option<Vec<usize>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        White,
        Grey,
        Black,
    }
    let mut mark = vec![Mark::White; parents.len()];
    for start in 0..parents.len() {
        if mark[start] != Mark::White {
            continue;
        }
        // (node, next parent slot)
        let mut stack = vec![(start, 0usize)];
        mark[start] = Mark::Grey;
        while let Some(&mut (node, ref mut slot)) = stack.last_mut() {
            if *slot < parents[node].len() {
                let next = parents[node][*slot];
                *slot += 1;
                match mark[next] {
                    Mark::White => {
                        mark[next] = Mark::Grey;
                        stack.push((next, 0));
                    }
                    Mark::Grey => {
                        let from = stack.iter().position(|&(n, _)| n == next).unwrap();
                        return Some(stack[from..].iter().map(|&(n, _)| n).collect());
                    }
                    Mark::Black => {}
                }
            } else {
                mark[node] = Mark::Black;
                stack.pop();
            }
        }
    }
    None
}

/// Kahn's algorithm; ties broken by document order. Assumes acyclic input.
fn topological_order(parents: &[Vec<usize>]) -> Vec<usize> {
    let n = parents.len();
    let mut children = vec![Vec::new(); n];
    let mut pending: Vec<usize> = parents.iter().map(Vec::len).collect();
    for (child, ps) in parents.iter().enumerate() {
        for &p in ps {
            children[p].push(child);
        }
    }
    let mut ready: VecDeque<usize> = (0..n).filter(|&i| pending[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(i) = ready.pop_front() {
        order.push(i);
        for &c in &children[i] {
            pending[c] -= 1;
            if pending[c] == 0 {
                ready.push_back(c);
            }
        }
    }
    order
}
