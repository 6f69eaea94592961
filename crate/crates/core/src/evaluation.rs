//! Interval semantics of metric atoms over a store, the n-way interval
//! intersection sweep, and single-rule evaluation.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::intervals::{coalesce, interval_op, IntervalOp};
use crate::store::FactStore;
use crate::syntax::{Fact, MetricAtom, RelationalAtom, Rule, Symbol};
use crate::{Bound, Interval};

pub use crate::syntax::Substitution;

/// Sorted list of disjoint, non-coalescable intervals.
pub type IntervalList = Vec<Interval>;

/// Something a rule derived: a fact, or ⊥ over an interval.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Derived {
    Fact(Fact),
    Bottom(Interval),
}

fn positive_part(r: &Interval) -> Interval {
    r.intersect(&Interval::new(Bound::Finite(crate::rat(0)), Bound::PosInf, true, true))
}

fn map_op(list: IntervalList, op: IntervalOp, r: &Interval) -> IntervalList {
    coalesce(list.iter().map(|t| interval_op(op, t, r).expect("non-empty operands")).collect())
}

/// Shared pairwise construction of Since (`past = true`) and Until.
fn since_until(past: bool, r: &Interval, held: &[Interval], goal: &[Interval]) -> IntervalList {
    let mut out: IntervalList = Vec::new();
    if r.contains(&crate::rat(0)) {
        out.extend(goal.iter().cloned());
    }
    let pos = positive_part(r);
    if !pos.is_empty() {
        let shift = if past { IntervalOp::Plus } else { IntervalOp::Minus };
        for h in held {
            let closure = interval_op(IntervalOp::Closure, h, h).expect("non-empty");
            for g in goal {
                let start = g.intersect(&closure);
                if start.is_empty() {
                    continue;
                }
                let reach = interval_op(shift, &start, &pos).expect("non-empty");
                out.push(reach.intersect(&closure));
            }
        }
    }
    coalesce(out)
}

/// Where a ground metric atom holds given only the facts of the store.
pub fn apply_operator(literal: &MetricAtom, store: &FactStore) -> IntervalList {
    match literal {
        MetricAtom::Top => vec![Interval::all()],
        MetricAtom::Bottom => store.bottom_intervals().to_vec(),
        MetricAtom::Rel(a) => match a.ground(&Substitution::new()) {
            Some(g) => store.intervals(&g).to_vec(),
            None => Vec::new(),
        },
        MetricAtom::DiamondMinus(r, m) => map_op(apply_operator(m, store), IntervalOp::Plus, r),
        MetricAtom::DiamondPlus(r, m) => map_op(apply_operator(m, store), IntervalOp::Minus, r),
        MetricAtom::BoxMinus(r, m) => map_op(apply_operator(m, store), IntervalOp::CirclePlus, r),
        MetricAtom::BoxPlus(r, m) => map_op(apply_operator(m, store), IntervalOp::CircleMinus, r),
        MetricAtom::Since(r, a, b) => since_until(true, r, &apply_operator(a, store), &apply_operator(b, store)),
        MetricAtom::Until(r, a, b) => since_until(false, r, &apply_operator(a, store), &apply_operator(b, store)),
    }
}

/// Intersection of the point sets of several canonical lists, by a sweep
/// with one cursor per list.
pub fn merge_intervals(lists: &[IntervalList]) -> IntervalList {
    match lists.len() {
        0 => return vec![Interval::all()],
        1 => return lists[0].clone(),
        _ => {}
    }
    let mut cursor = vec![0usize; lists.len()];
    let mut out = Vec::new();
    loop {
        if cursor.iter().zip(lists).any(|(&c, l)| c >= l.len()) {
            break;
        }
        let mut acc = lists[0][cursor[0]].clone();
        for (k, l) in lists.iter().enumerate().skip(1) {
            acc = acc.intersect(&l[cursor[k]]);
        }
        if !acc.is_empty() {
            out.push(acc);
        }
        let mut first = 0;
        for k in 1..lists.len() {
            if lists[k][cursor[k]].cmp_right(&lists[first][cursor[first]]) == std::cmp::Ordering::Less {
                first = k;
            }
        }
        cursor[first] += 1;
    }
    coalesce(out)
}

/// Turns "the body holds throughout `interval`" into the fact the head
/// asserts.
pub fn reverse_head(head: &MetricAtom, interval: &Interval) -> Result<Derived> {
    match head {
        MetricAtom::Rel(a) => match a.ground(&Substitution::new()) {
            Some(g) => Ok(Derived::Fact(Fact::new(g, interval.clone()))),
            None => Err(Error::NonGround(a.to_string())),
        },
        MetricAtom::Bottom => Ok(Derived::Bottom(interval.clone())),
        MetricAtom::BoxMinus(r, m) => reverse_head(m, &interval_op(IntervalOp::Minus, interval, r)?),
        MetricAtom::BoxPlus(r, m) => reverse_head(m, &interval_op(IntervalOp::Plus, interval, r)?),
        other => Err(Error::ForbiddenHead(other.to_string())),
    }
}

/// Relational atoms that must hold somewhere for the literal to hold
/// anywhere; they drive the join. Atoms outside this set (the held side of
/// a Since/Until whose interval contains 0) may be absent.
pub fn necessary_atoms(literal: &MetricAtom) -> Vec<&RelationalAtom> {
    let mut out = Vec::new();
    fn walk<'a>(m: &'a MetricAtom, out: &mut Vec<&'a RelationalAtom>) {
        match m {
            MetricAtom::Top | MetricAtom::Bottom => {}
            MetricAtom::Rel(a) => out.push(a),
            MetricAtom::DiamondMinus(_, c)
            | MetricAtom::DiamondPlus(_, c)
            | MetricAtom::BoxMinus(_, c)
            | MetricAtom::BoxPlus(_, c) => walk(c, out),
            MetricAtom::Since(r, a, b) | MetricAtom::Until(r, a, b) => {
                if !r.contains(&crate::rat(0)) {
                    walk(a, out);
                }
                walk(b, out);
            }
        }
    }
    walk(literal, &mut out);
    out
}

/// Body literals in join order: ground literals first, then the written
/// order.
fn ordered_body(rule: &Rule) -> Vec<&MetricAtom> {
    let mut body: Vec<&MetricAtom> = rule.body().iter().collect();
    body.sort_by_key(|m| !m.is_ground());
    body
}

/// Enumerates the substitutions under which every necessary body atom
/// matches a stored atom; variables occurring only in optional positions
/// range over the active domain (the store's and the rule's constants).
pub fn substitutions(rule: &Rule, store: &FactStore) -> Vec<Substitution> {
    substitutions_over(rule, store, &rule.constants())
}

/// [`substitutions`] with `extra` added to the active domain, typically the
/// constants of the whole program.
pub fn substitutions_over(rule: &Rule, store: &FactStore, extra: &BTreeSet<Symbol>) -> Vec<Substitution> {
    let body = ordered_body(rule);
    let patterns: Vec<&RelationalAtom> = body.iter().flat_map(|m| necessary_atoms(m)).collect();
    let vars = rule.variables();
    let mut out = Vec::new();
    let mut domain: Option<Vec<Symbol>> = None;
    let mut stack: Vec<(usize, Substitution)> = vec![(0, Substitution::new())];
    while let Some((k, sigma)) = stack.pop() {
        if k == patterns.len() {
            let free: Vec<&Symbol> = vars.iter().filter(|v| !sigma.contains_key(*v)).collect();
            if free.is_empty() {
                out.push(sigma);
                continue;
            }
            let dom = domain.get_or_insert_with(|| {
                let mut d: BTreeSet<Symbol> = store.constants().cloned().collect();
                d.extend(rule.constants());
                d.extend(extra.iter().cloned());
                d.into_iter().collect()
            });
            let mut partial = vec![sigma];
            for v in free {
                partial = partial
                    .into_iter()
                    .flat_map(|s| {
                        dom.iter().map(move |c| {
                            let mut t = s.clone();
                            t.insert(v.clone(), c.clone());
                            t
                        })
                    })
                    .collect();
            }
            out.extend(partial);
            continue;
        }
        let mut next: Vec<(usize, Substitution)> =
            store.matches(patterns[k], &sigma).into_iter().map(|(s, _)| (k + 1, s)).collect();
        next.reverse();
        stack.extend(next);
    }
    out
}

/// One application of a rule to a store: every derivation the immediate
/// consequence operator makes with this rule.
pub fn evaluate_rule(rule: &Rule, store: &FactStore) -> Vec<Derived> {
    evaluate_rule_over(rule, store, &BTreeSet::new())
}

/// [`evaluate_rule`] with `extra` added to the active domain.
pub fn evaluate_rule_over(rule: &Rule, store: &FactStore, extra: &BTreeSet<Symbol>) -> Vec<Derived> {
    let body = ordered_body(rule);
    let mut out = Vec::new();
    for sigma in substitutions_over(rule, store, extra) {
        let mut lists = Vec::with_capacity(body.len());
        let mut empty = false;
        for lit in &body {
            let t = apply_operator(&lit.apply(&sigma), store);
            if t.is_empty() {
                empty = true;
                break;
            }
            lists.push(t);
        }
        if empty {
            continue;
        }
        let head = rule.head().apply(&sigma);
        for t in merge_intervals(&lists) {
            out.push(reverse_head(&head, &t).expect("validated head"));
        }
    }
    out
}
