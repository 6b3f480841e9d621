//! Graph fixtures shared by the benchmarks.

use garment_edit::score::{AnswerSet, DependencyGraph, Question, QuestionCategory, QuestionId, Verdict};

/// `icqs` roots, each with a chain of `chain` IDQs below it, plus `cpqs`
/// preservation questions. Chain links after the first also depend on the
/// previous chain's node at the same level, so nodes have up to two parents.
pub fn layered_graph(icqs: usize, chain: usize, cpqs: usize) -> DependencyGraph {
    let mut questions = Vec::new();
    for r in 0..icqs {
        questions
            .push(Question::root(&format!("i{r}"), &format!("Was edit {r} applied?"), QuestionCategory::Icq).unwrap());
        for level in 1..=chain {
            let above = if level == 1 { format!("i{r}") } else { format!("d{r}_{}", level - 1) };
            let mut parents = vec![QuestionId::new(above)];
            if r > 0 {
                parents.push(QuestionId::new(format!("d{}_{level}", r - 1)));
            }
            let id = format!("d{r}_{level}");
            questions.push(
                Question::new(
                    id.as_str(),
                    &format!("Is detail {level} of edit {r} right?"),
                    QuestionCategory::Idq,
                    parents,
                )
                .unwrap(),
            );
        }
    }
    for c in 0..cpqs {
        questions.push(
            Question::root(&format!("c{c}"), &format!("Is region {c} unchanged?"), QuestionCategory::Cpq).unwrap(),
        );
    }
    DependencyGraph::new("bench", questions).unwrap()
}

/// Yes everywhere except every `stride`-th question.
pub fn striped_answers(graph: &DependencyGraph, stride: usize) -> AnswerSet {
    graph
        .questions()
        .iter()
        .enumerate()
        .map(|(i, q)| (q.id().clone(), if i % stride == stride - 1 { Verdict::No } else { Verdict::Yes }))
        .collect()
}
