#![allow(dead_code)]

//! Independent reference evaluator and random graph generator for tests.
//!
//! The evaluator shares nothing with the library: it enumerates every upward
//! path from each question, takes the ancestor set as the union of nodes on
//! those paths and the depth as the shortest path ending at an ICQ, and sums
//! weights in exact rational arithmetic.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::seq::SliceRandom;
use rand::Rng;

use garment_edit::score::{AnswerSet, DependencyGraph, Question, QuestionCategory, QuestionId, Verdict};

#[derive(Debug, Clone)]
pub struct GraphPlan {
    pub categories: Vec<QuestionCategory>,
    /// Parent indices, always pointing at earlier ICQ or IDQ entries.
    pub parents: Vec<Vec<usize>>,
}

impl GraphPlan {
    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn id(i: usize) -> String {
        format!("n{i}")
    }

    /// Library graph with questions listed in `order`.
    pub fn graph(&self, order: &[usize]) -> DependencyGraph {
        let questions = order
            .iter()
            .map(|&i| {
                let parents = self.parents[i].iter().map(|&p| QuestionId::new(Self::id(p)));
                Question::new(Self::id(i).as_str(), &format!("Question {i}?"), self.categories[i], parents).unwrap()
            })
            .collect();
        DependencyGraph::new("oracle", questions).unwrap()
    }

    pub fn answers(&self, verdicts: &[Verdict]) -> AnswerSet {
        verdicts.iter().enumerate().map(|(i, v)| (QuestionId::new(Self::id(i)), *v)).collect()
    }

    /// Every path from `q` to a root, as node lists starting at `q`.
    fn upward_paths(&self, q: usize) -> Vec<Vec<usize>> {
        if self.parents[q].is_empty() {
            return vec![vec![q]];
        }
        let mut out = Vec::new();
        for &p in &self.parents[q] {
            for mut path in self.upward_paths(p) {
                path.insert(0, q);
                out.push(path);
            }
        }
        out
    }

    pub fn ancestors(&self, q: usize) -> Vec<usize> {
        let mut seen: Vec<usize> = self.upward_paths(q).into_iter().flatten().filter(|&n| n != q).collect();
        seen.sort_unstable();
        seen.dedup();
        seen
    }

    /// Edges on the shortest upward path ending at an ICQ.
    pub fn depth(&self, q: usize) -> usize {
        self.upward_paths(q)
            .iter()
            .filter(|p| self.categories[*p.last().unwrap()] == QuestionCategory::Icq)
            .map(|p| p.len() - 1)
            .min()
            .expect("every IDQ reaches an ICQ")
    }
}

#[derive(Debug, Clone)]
pub struct ExactWeights {
    pub w_icq: BigRational,
    pub w_cpq: BigRational,
    pub t_decay: BigRational,
}

pub fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

impl ExactWeights {
    pub fn defaults() -> Self {
        Self { w_icq: ratio(3, 1), w_cpq: ratio(1, 1), t_decay: ratio(3, 10) }
    }

    pub fn idq(&self, depth: usize) -> BigRational {
        let mut decay = BigRational::one();
        for _ in 0..depth {
            decay *= &self.t_decay;
        }
        BigRational::one() + &self.w_icq * decay
    }
}

/// Per-question weights in exact arithmetic.
pub fn exact_weights(plan: &GraphPlan, w: &ExactWeights) -> Vec<BigRational> {
    (0..plan.len())
        .map(|i| match plan.categories[i] {
            QuestionCategory::Icq => w.w_icq.clone(),
            QuestionCategory::Cpq => w.w_cpq.clone(),
            QuestionCategory::Idq => w.idq(plan.depth(i)),
        })
        .collect()
}

/// Brute-force score: a question passes iff it and every ancestor answered Yes.
pub fn brute_force_score(weights: &[BigRational], ancestors: &[Vec<usize>], verdicts: &[Verdict]) -> BigRational {
    let yes = |i: usize| verdicts[i] == Verdict::Yes;
    let mut num = BigRational::zero();
    let mut den = BigRational::zero();
    for (i, w) in weights.iter().enumerate() {
        den += w;
        if yes(i) && ancestors[i].iter().all(|&a| yes(a)) {
            num += w;
        }
    }
    num / den
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap()
}

/// Random valid graph with 1..=max_n questions and at least one ICQ.
pub fn random_plan<R: Rng>(rng: &mut R, max_n: usize) -> GraphPlan {
    let n = rng.random_range(1..=max_n);
    random_plan_sized(rng, n)
}

/// Random valid graph with exactly `n` questions, the first an ICQ.
pub fn random_plan_sized<R: Rng>(rng: &mut R, n: usize) -> GraphPlan {
    let mut categories = Vec::with_capacity(n);
    let mut parents = Vec::with_capacity(n);
    for i in 0..n {
        let cat = if i == 0 {
            QuestionCategory::Icq
        } else {
            match rng.random_range(0..10) {
                0..=2 => QuestionCategory::Icq,
                3..=7 => QuestionCategory::Idq,
                _ => QuestionCategory::Cpq,
            }
        };
        let mut ps = Vec::new();
        if cat == QuestionCategory::Idq {
            let mut eligible: Vec<usize> = (0..i).filter(|&j| categories[j] != QuestionCategory::Cpq).collect();
            eligible.shuffle(rng);
            let k = rng.random_range(1..=eligible.len().min(3));
            ps = eligible[..k].to_vec();
        }
        categories.push(cat);
        parents.push(ps);
    }
    GraphPlan { categories, parents }
}

pub fn random_order<R: Rng>(rng: &mut R, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order
}

pub fn random_verdicts<R: Rng>(rng: &mut R, n: usize, allow_unparseable: bool) -> Vec<Verdict> {
    (0..n)
        .map(|_| match rng.random_range(0..if allow_unparseable { 5 } else { 4 }) {
            0 | 1 => Verdict::Yes,
            2 | 3 => Verdict::No,
            _ => Verdict::Unparseable,
        })
        .collect()
}

/// The `mask`-th Yes/No assignment over `n` questions.
pub fn assignment(mask: u32, n: usize) -> Vec<Verdict> {
    (0..n).map(|i| if mask >> i & 1 == 1 { Verdict::Yes } else { Verdict::No }).collect()
}
