//! Rounds of the immediate consequence operator and the materialisation
//! loop built on them.

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::evaluation::{evaluate_rule_over, Derived};
use crate::store::{store_equal, FactStore};
use crate::syntax::{Fact, Program, Symbol};
use crate::Interval;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Status {
    Fixpoint,
    TargetEntailed,
    RoundLimit,
    Inconsistent,
    /// Stopped through the cancellation flag.
    Cancelled,
}

#[derive(Clone, Debug)]
pub struct MaterialisationOutcome {
    pub store: FactStore,
    pub status: Status,
    pub rounds: usize,
    pub coalescing_time: Duration,
    /// Coalescing time of each round, in order.
    pub round_coalescing: Vec<Duration>,
}

/// Result of a single round.
#[derive(Clone, Debug)]
pub struct Round {
    pub store: FactStore,
    /// Predicates whose covered point set grew this round.
    pub grown: BTreeSet<Symbol>,
    pub bottom_grew: bool,
    pub coalescing_time: Duration,
}

impl Round {
    pub fn changed(&self) -> bool {
        self.bottom_grew || !self.grown.is_empty()
    }
}

/// One round: evaluates every rule against the input store and inserts the
/// derivations into a copy of it. Derived facts are intersected with
/// `horizon` when one is given; ⊥ derivations are never clipped. Variables
/// in optional positions range over the store's and the program's constants.
pub fn apply_rules_round(program: &Program, store: &FactStore, horizon: Option<&Interval>) -> Round {
    let domain = program.constants();
    let derived: Vec<Derived> = program.rules.iter().flat_map(|r| evaluate_rule_over(r, store, &domain)).collect();
    let mut out = store.clone();
    let mut grown = BTreeSet::new();
    let mut bottom_grew = false;
    let start = Instant::now();
    for d in derived {
        match d {
            Derived::Fact(mut f) => {
                if let Some(h) = horizon {
                    f.interval = f.interval.intersect(h);
                    if f.interval.is_empty() {
                        continue;
                    }
                }
                if out.insert(&f) {
                    grown.insert(f.atom.predicate.clone());
                }
            }
            Derived::Bottom(i) => bottom_grew |= out.insert_bottom(&i),
        }
    }
    Round { store: out, grown, bottom_grew, coalescing_time: start.elapsed() }
}

/// `I ∪ T_Π(I)` for the interpretation represented by the store.
pub fn apply_rules(program: &Program, store: &FactStore) -> FactStore {
    apply_rules_round(program, store, None).store
}

/// Optional knobs of [`materialise_with`].
#[derive(Clone, Copy, Default)]
pub struct Limits<'a> {
    pub max_rounds: Option<usize>,
    pub target: Option<&'a Fact>,
    pub horizon: Option<&'a Interval>,
    pub cancel: Option<&'a AtomicBool>,
}

/// Repeats rounds until a fixpoint, the target is entailed, ⊥ is derived or
/// the round limit is hit.
pub fn materialise(
    program: &Program,
    store: &FactStore,
    max_rounds: Option<usize>,
    target: Option<&Fact>,
) -> MaterialisationOutcome {
    materialise_with(program, store, Limits { max_rounds, target, ..Limits::default() })
}

pub fn materialise_with(program: &Program, store: &FactStore, limits: Limits<'_>) -> MaterialisationOutcome {
    let mut current = store.clone();
    let mut rounds = 0;
    let mut round_coalescing = Vec::new();
    let finish = |store: FactStore, status, rounds, round_coalescing: Vec<Duration>| MaterialisationOutcome {
        store,
        status,
        rounds,
        coalescing_time: round_coalescing.iter().sum(),
        round_coalescing,
    };
    if current.is_inconsistent() {
        return finish(current, Status::Inconsistent, 0, round_coalescing);
    }
    if limits.target.is_some_and(|t| current.entails_fact(t)) {
        return finish(current, Status::TargetEntailed, 0, round_coalescing);
    }
    loop {
        if limits.max_rounds.is_some_and(|m| rounds >= m) {
            return finish(current, Status::RoundLimit, rounds, round_coalescing);
        }
        if limits.cancel.is_some_and(|c| c.load(Ordering::Relaxed)) {
            return finish(current, Status::Cancelled, rounds, round_coalescing);
        }
        let round = apply_rules_round(program, &current, limits.horizon);
        rounds += 1;
        round_coalescing.push(round.coalescing_time);
        let unchanged = store_equal(&round.store, &current);
        debug_assert_eq!(unchanged, !round.changed());
        current = round.store;
        tracing::trace!(rounds, intervals = current.interval_count(), "materialisation round");
        if current.is_inconsistent() {
            return finish(current, Status::Inconsistent, rounds, round_coalescing);
        }
        if limits.target.is_some_and(|t| current.entails_fact(t)) {
            return finish(current, Status::TargetEntailed, rounds, round_coalescing);
        }
        if unchanged {
            return finish(current, Status::Fixpoint, rounds, round_coalescing);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse_dataset, parse_fact, parse_program};

    fn store(text: &str) -> FactStore {
        FactStore::from_facts(parse_dataset(text).unwrap())
    }

    const BIRTHDAY: &str = "BOXPLUS[1,1] Bday(X) :- Bday(X) .";
    const IMMUNE: &str = "Immune(X) :- BOXMINUS[0,7] NoSympt(X) .";

    #[test]
    fn apply_rules_examples() {
        let p = parse_program(IMMUNE).unwrap();
        let out = apply_rules(&p, &store("NoSympt(james)@[0,14]"));
        assert!(out.entails_fact(&parse_fact("Immune(james)@[7,14]").unwrap()));
        let s = store("P(a)@[0,1]");
        assert!(store_equal(&apply_rules(&Program::default(), &s), &s));
        let bad = apply_rules(&parse_program("BOTTOM :- P(a) .").unwrap(), &s);
        assert!(bad.is_inconsistent());
    }

    #[test]
    fn materialise_examples() {
        let b = parse_program(BIRTHDAY).unwrap();
        let target = parse_fact("Bday(t)@[2,2]").unwrap();
        let out = materialise(&b, &store("Bday(t)@[0,0]"), None, Some(&target));
        assert_eq!((out.status, out.rounds), (Status::TargetEntailed, 2));

        let i = parse_program(IMMUNE).unwrap();
        let out = materialise(&i, &store("NoSympt(james)@[0,14]"), None, None);
        assert_eq!((out.status, out.rounds), (Status::Fixpoint, 2));
        assert!(store_equal(&apply_rules(&i, &out.store), &out.store));

        let out = materialise(&b, &store("Bday(t)@[0,0]"), Some(5), None);
        assert_eq!((out.status, out.rounds), (Status::RoundLimit, 5));
    }

    #[test]
    fn horizon_truncates_derivations() {
        let b = parse_program(BIRTHDAY).unwrap();
        let h: Interval = "[-2,2]".parse().unwrap();
        let out = materialise_with(&b, &store("Bday(t)@[0,0]"), Limits { horizon: Some(&h), ..Limits::default() });
        assert_eq!(out.status, Status::Fixpoint);
        assert_eq!(out.store.interval_count(), 3);
    }

    #[test]
    fn cancellation_stops_the_loop() {
        let b = parse_program(BIRTHDAY).unwrap();
        let flag = AtomicBool::new(true);
        let out = materialise_with(&b, &store("Bday(t)@[0,0]"), Limits { cancel: Some(&flag), ..Limits::default() });
        assert_eq!(out.status, Status::Cancelled);
    }
}
