//! Fact entailment: the dataset fast path, relevant rules, plain
//! materialisation for non-recursive programs, and otherwise a race between
//! continued materialisation and the automata procedure.

use std::fmt;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use serde::{Serialize, Serializer};

use crate::analysis::{dependency_info, is_recursive, relevant_rules};
use crate::automata::{consistent_with, entail_to_inconsist, AutomataConfig};
use crate::materialisation::{apply_rules_round, materialise, materialise_with, Limits, Status};
use crate::store::FactStore;
use crate::syntax::{Fact, Program};
use crate::{Error, Result};

/// Which code path produced the answer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum FactType {
    /// Entailed by the dataset alone.
    T1,
    /// Decided by materialising a non-recursive relevant program.
    T2,
    /// Not entailed; materialisation of a recursive program reached a fixpoint.
    T3,
    /// Entailed; found by materialising a recursive program.
    T4,
    /// Decided by the automata procedure.
    T5,
}

impl FactType {
    pub const ALL: [FactType; 5] = [FactType::T1, FactType::T2, FactType::T3, FactType::T4, FactType::T5];
}

impl fmt::Display for FactType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Winner {
    FastPath,
    Materialisation,
    Automata,
}

fn seconds<S: Serializer>(d: &Duration, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64())
}

/// Wall-clock time per phase, serialised in seconds.
#[derive(Clone, Copy, Debug, Default, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Timings {
    #[serde(serialize_with = "seconds")]
    pub total: Duration,
    #[serde(serialize_with = "seconds")]
    pub relevant_rules: Duration,
    /// Pre-materialisation, or the whole materialisation for non-recursive programs.
    #[serde(serialize_with = "seconds")]
    pub pre_materialisation: Duration,
    #[serde(serialize_with = "seconds")]
    pub materialisation: Duration,
    #[serde(serialize_with = "seconds")]
    pub automata: Duration,
    /// Time spent inserting and coalescing derived facts.
    #[serde(serialize_with = "seconds")]
    pub coalescing: Duration,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct EntailmentResult {
    pub answer: bool,
    pub fact_type: FactType,
    /// Materialisation rounds applied, pre-materialisation included.
    pub rounds: usize,
    pub winner: Winner,
    /// The program and dataset were found inconsistent, so every fact is entailed.
    pub inconsistent: bool,
    /// States explored by the automaton when it answered.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub automata_states: Option<usize>,
    pub timings: Timings,
}

#[derive(Clone, Debug)]
pub struct PipelineConfig {
    /// Race the two workers on separate threads; otherwise materialisation
    /// runs to `round_budget` first and the automaton afterwards.
    pub concurrent: bool,
    /// Rounds materialisation may spend (pre-materialisation included)
    /// before it gives up in favour of the automaton.
    pub round_budget: Option<usize>,
    /// Cap on the pre-materialisation loop.
    pub pre_rounds: usize,
    pub automata: AutomataConfig,
}

impl PipelineConfig {
    pub const SEQUENTIAL_BUDGET: usize = 512;

    /// Deterministic mode: the answer and its fact type do not depend on scheduling.
    pub fn sequential() -> Self {
        PipelineConfig {
            concurrent: false,
            round_budget: Some(Self::SEQUENTIAL_BUDGET),
            pre_rounds: 64,
            automata: AutomataConfig::default(),
        }
    }

    pub fn concurrent() -> Self {
        PipelineConfig { concurrent: true, round_budget: None, ..Self::sequential() }
    }
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self::concurrent()
    }
}

struct Pre {
    store: FactStore,
    rounds: usize,
    coalescing: Duration,
    /// Set when the loop already decided the query.
    decided: Option<(bool, FactType, bool)>,
}

/// Rounds until one adds nothing over predicates that are not recursive in
/// the program, or until `cap` rounds. Entailment of `target`, a fixpoint and
/// ⊥ end the loop early.
fn pre_loop(program: &Program, store: &FactStore, target: Option<&Fact>, cap: usize) -> Pre {
    let recursive = dependency_info(program).recursive;
    let mut pre = Pre { store: store.clone(), rounds: 0, coalescing: Duration::ZERO, decided: None };
    while pre.rounds < cap {
        let round = apply_rules_round(program, &pre.store, None);
        pre.rounds += 1;
        pre.coalescing += round.coalescing_time;
        let changed = round.changed();
        let nonrecursive_grew = round.bottom_grew || round.grown.iter().any(|p| !recursive.contains(p));
        pre.store = round.store;
        if pre.store.is_inconsistent() {
            pre.decided = Some((true, FactType::T4, true));
        } else if target.is_some_and(|t| pre.store.entails_fact(t)) {
            pre.decided = Some((true, FactType::T4, false));
        } else if !changed {
            pre.decided = Some((false, FactType::T3, false));
        }
        if pre.decided.is_some() || !nonrecursive_grew {
            break;
        }
    }
    pre
}

/// Materialises a recursive program until a round derives nothing new over
/// its non-recursive predicates.
pub fn pre_materialise(program: &Program, store: &FactStore) -> FactStore {
    pre_loop(program, store, None, usize::MAX).store
}

enum Outcome {
    Materialisation {
        answer: bool,
        fact_type: FactType,
        inconsistent: bool,
        rounds: usize,
        coalescing: Duration,
    },
    /// Materialisation stopped without an answer.
    Undecided {
        rounds: usize,
        coalescing: Duration,
    },
    Automata {
        answer: bool,
        states: usize,
    },
    Failed(Error),
}

fn thread_one(
    program: &Program,
    pre: &FactStore,
    query: &Fact,
    max_rounds: Option<usize>,
    cancel: Option<&AtomicBool>,
) -> Outcome {
    let out = materialise_with(program, pre, Limits { max_rounds, target: Some(query), horizon: None, cancel });
    let (rounds, coalescing) = (out.rounds, out.coalescing_time);
    let (answer, fact_type, inconsistent) = match out.status {
        Status::TargetEntailed => (true, FactType::T4, false),
        Status::Inconsistent => (true, FactType::T4, true),
        Status::Fixpoint => (false, FactType::T3, false),
        Status::RoundLimit | Status::Cancelled => return Outcome::Undecided { rounds, coalescing },
    };
    Outcome::Materialisation { answer, fact_type, inconsistent, rounds, coalescing }
}

fn thread_two(
    program: &Program,
    pre: &FactStore,
    query: &Fact,
    config: &AutomataConfig,
    cancel: Option<&AtomicBool>,
) -> Outcome {
    let reduced = match entail_to_inconsist(program, &pre.facts(), query) {
        Ok(r) => r,
        Err(e) => return Outcome::Failed(e),
    };
    match consistent_with(&reduced.program, &reduced.dataset, Some(pre), config, cancel) {
        Ok(report) => Outcome::Automata { answer: !report.consistent, states: report.states },
        Err(e) => Outcome::Failed(e),
    }
}

/// Decides whether the program and dataset entail `query`.
pub fn check_entailment(
    program: &Program,
    store: &FactStore,
    query: &Fact,
    config: &PipelineConfig,
) -> Result<EntailmentResult> {
    let start = Instant::now();
    if query.interval.is_empty() {
        return Err(Error::UnsupportedQuery(format!("{query} has an empty interval")));
    }
    let mut timings = Timings::default();
    let mut result = EntailmentResult {
        answer: true,
        fact_type: FactType::T1,
        rounds: 0,
        winner: Winner::FastPath,
        inconsistent: false,
        automata_states: None,
        timings,
    };
    if store.entails_fact(query) {
        result.timings.total = start.elapsed();
        return Ok(result);
    }

    let t = Instant::now();
    let relevant = relevant_rules(program, &query.atom.predicate);
    timings.relevant_rules = t.elapsed();
    result.winner = Winner::Materialisation;

    if !is_recursive(&relevant) {
        let t = Instant::now();
        let out = materialise(&relevant, store, None, Some(query));
        timings.pre_materialisation = t.elapsed();
        timings.coalescing = out.coalescing_time;
        result.fact_type = FactType::T2;
        result.rounds = out.rounds;
        result.inconsistent = out.status == Status::Inconsistent;
        result.answer = matches!(out.status, Status::TargetEntailed | Status::Inconsistent);
        timings.total = start.elapsed();
        result.timings = timings;
        return Ok(result);
    }

    let t = Instant::now();
    let cap = config.round_budget.map_or(config.pre_rounds, |b| b.min(config.pre_rounds));
    let pre = pre_loop(&relevant, store, Some(query), cap);
    timings.pre_materialisation = t.elapsed();
    timings.coalescing = pre.coalescing;
    result.rounds = pre.rounds;
    if let Some((answer, fact_type, inconsistent)) = pre.decided {
        result.answer = answer;
        result.fact_type = fact_type;
        result.inconsistent = inconsistent;
        timings.total = start.elapsed();
        result.timings = timings;
        return Ok(result);
    }
    let remaining = config.round_budget.map(|b| b.saturating_sub(pre.rounds));
    let dpre = pre.store;

    let outcomes = if config.concurrent {
        race(&relevant, &dpre, query, remaining, &config.automata, &mut timings)
    } else {
        let t = Instant::now();
        let first = thread_one(&relevant, &dpre, query, remaining, None);
        timings.materialisation = t.elapsed();
        if matches!(first, Outcome::Materialisation { .. }) {
            vec![first]
        } else {
            let t = Instant::now();
            let second = thread_two(&relevant, &dpre, query, &config.automata, None);
            timings.automata = t.elapsed();
            vec![first, second]
        }
    };

    let mut failure = None;
    let mut decided = false;
    for o in outcomes {
        match o {
            Outcome::Materialisation { answer, fact_type, inconsistent, rounds, coalescing } => {
                result.answer = answer;
                result.fact_type = fact_type;
                result.inconsistent = inconsistent;
                result.rounds += rounds;
                timings.coalescing += coalescing;
                result.winner = Winner::Materialisation;
                decided = true;
                break;
            }
            Outcome::Undecided { rounds, coalescing } => {
                result.rounds += rounds;
                timings.coalescing += coalescing;
            }
            Outcome::Automata { answer, states } => {
                result.answer = answer;
                result.fact_type = FactType::T5;
                result.winner = Winner::Automata;
                result.automata_states = Some(states);
                decided = true;
                break;
            }
            Outcome::Failed(e) => failure = Some(e),
        }
    }
    if !decided {
        return Err(failure.unwrap_or(Error::Cancelled));
    }
    timings.total = start.elapsed();
    result.timings = timings;
    Ok(result)
}

/// Runs both workers and returns the first definitive outcome, preceded by
/// any inconclusive ones that arrived earlier.
fn race(
    program: &Program,
    pre: &FactStore,
    query: &Fact,
    max_rounds: Option<usize>,
    automata: &AutomataConfig,
    timings: &mut Timings,
) -> Vec<Outcome> {
    let cancel = AtomicBool::new(false);
    let (tx, rx) = mpsc::channel();
    let start = Instant::now();
    std::thread::scope(|s| {
        let tx1 = tx.clone();
        let cancel = &cancel;
        s.spawn(move || {
            let _ = tx1.send((Winner::Materialisation, thread_one(program, pre, query, max_rounds, Some(cancel))));
        });
        s.spawn(move || {
            let _ = tx.send((Winner::Automata, thread_two(program, pre, query, automata, Some(cancel))));
        });
        let mut seen = Vec::new();
        for (who, outcome) in rx.iter().take(2) {
            let elapsed = start.elapsed();
            match who {
                Winner::Automata => timings.automata = elapsed,
                _ => timings.materialisation = elapsed,
            }
            let definitive = matches!(outcome, Outcome::Materialisation { .. } | Outcome::Automata { .. });
            seen.push(outcome);
            if definitive {
                cancel.store(true, Ordering::Relaxed);
                break;
            }
        }
        seen
    })
}
