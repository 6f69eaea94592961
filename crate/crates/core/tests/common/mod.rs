//! Seeded random programs, datasets and intervals shared by the property
//! tests and the acceptance harness.
#![allow(dead_code)]

use dmtl::{Bound, Fact, GroundAtom, Interval, MetricAtom, Program, Rational, RelationalAtom, Rule, Term};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn q(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

/// Non-empty interval with integer endpoints in `[lo, hi]`.
pub fn bounded_interval(rng: &mut ChaCha8Rng, lo: i64, hi: i64) -> Interval {
    let a = rng.gen_range(lo..=hi);
    let b = rng.gen_range(a..=hi);
    let (lo_open, hi_open) = if a == b { (false, false) } else { (rng.gen_bool(0.3), rng.gen_bool(0.3)) };
    Interval::new(Bound::Finite(q(a, 1)), Bound::Finite(q(b, 1)), lo_open, hi_open)
}

/// Non-empty operator interval inside `[0, max]`, or unbounded on the right.
pub fn operator_interval(rng: &mut ChaCha8Rng, max: i64, unbounded: bool) -> Interval {
    let a = rng.gen_range(0..=max);
    if unbounded && rng.gen_bool(0.2) {
        return Interval::new(Bound::Finite(q(a, 1)), Bound::PosInf, rng.gen_bool(0.3), true);
    }
    let b = rng.gen_range(a..=max);
    let (lo_open, hi_open) = if a == b { (false, false) } else { (rng.gen_bool(0.3), rng.gen_bool(0.3)) };
    Interval::new(Bound::Finite(q(a, 1)), Bound::Finite(q(b, 1)), lo_open, hi_open)
}

/// Predicate names with arities; unary ones take the variable `X`.
#[derive(Clone)]
pub struct Signature {
    pub predicates: Vec<(String, usize)>,
    pub constants: Vec<String>,
}

impl Signature {
    pub fn small(n: usize) -> Self {
        let names = ["P", "Q", "R", "S"];
        Signature {
            predicates: names[..n]
                .iter()
                .enumerate()
                .map(|(i, p)| (p.to_string(), if i % 2 == 0 { 1 } else { 0 }))
                .collect(),
            constants: vec!["a".into(), "b".into()],
        }
    }

    pub fn propositional(n: usize) -> Self {
        let names = ["P", "Q", "R", "S"];
        Signature { predicates: names[..n].iter().map(|p| (p.to_string(), 0)).collect(), constants: vec!["a".into()] }
    }
}

pub struct Shape {
    pub depth: usize,
    pub max_bound: i64,
    pub unbounded: bool,
    pub since_until: bool,
}

fn atom(sig: &Signature, pred: usize, var: bool, rng: &mut ChaCha8Rng) -> RelationalAtom {
    let (name, arity) = &sig.predicates[pred];
    let args = (0..*arity)
        .map(|_| if var { Term::variable("X") } else { Term::constant(sig.constants.choose(rng).unwrap()) })
        .collect();
    RelationalAtom::new(name, args)
}

/// A body literal over predicates `preds`, nesting at most `shape.depth` operators.
pub fn literal(
    sig: &Signature,
    preds: &[usize],
    var: bool,
    shape: &Shape,
    depth: usize,
    rng: &mut ChaCha8Rng,
) -> MetricAtom {
    let leaf = depth == 0 || rng.gen_bool(0.3);
    if leaf {
        return MetricAtom::Rel(atom(sig, *preds.choose(rng).unwrap(), var, rng));
    }
    let r = operator_interval(rng, shape.max_bound, shape.unbounded);
    let sub = |rng: &mut ChaCha8Rng| Box::new(literal(sig, preds, var, shape, depth - 1, rng));
    let kinds = if shape.since_until { 6 } else { 4 };
    match rng.gen_range(0..kinds) {
        0 => MetricAtom::DiamondMinus(r, sub(rng)),
        1 => MetricAtom::DiamondPlus(r, sub(rng)),
        2 => MetricAtom::BoxMinus(r, sub(rng)),
        3 => MetricAtom::BoxPlus(r, sub(rng)),
        4 => MetricAtom::Since(r, sub(rng), sub(rng)),
        _ => MetricAtom::Until(r, sub(rng), sub(rng)),
    }
}

/// Whether any atom of the literal takes the variable.
fn uses_x(m: &MetricAtom) -> bool {
    !m.variables().is_empty()
}

/// A safe rule whose head predicate is `head` and whose body uses `body_preds`.
pub fn rule(sig: &Signature, head: Option<usize>, body_preds: &[usize], shape: &Shape, rng: &mut ChaCha8Rng) -> Rule {
    let n = rng.gen_range(1..=2);
    let body: Vec<MetricAtom> =
        (0..n).map(|_| literal(sig, body_preds, rng.gen_bool(0.8), shape, shape.depth, rng)).collect();
    let has_x = body.iter().any(uses_x);
    let head = match head {
        None => MetricAtom::Bottom,
        Some(p) => {
            let core = MetricAtom::Rel(atom(sig, p, has_x, rng));
            match rng.gen_range(0..5) {
                0 => MetricAtom::BoxMinus(operator_interval(rng, shape.max_bound, false), Box::new(core)),
                1 => MetricAtom::BoxPlus(operator_interval(rng, shape.max_bound, false), Box::new(core)),
                _ => core,
            }
        }
    };
    Rule::new(head, body).expect("generated rules are safe")
}

/// Rules whose heads only use predicates later in the signature order than
/// their bodies, so the program is non-recursive.
pub fn nonrecursive_program(sig: &Signature, rules: usize, shape: &Shape, rng: &mut ChaCha8Rng) -> Program {
    let n = sig.predicates.len();
    let out = (0..rules)
        .map(|_| {
            let h = rng.gen_range(1..n);
            let body: Vec<usize> = (0..h).collect();
            rule(sig, Some(h), &body, shape, rng)
        })
        .collect();
    Program::new(out)
}

/// Rules over arbitrary predicates; `bottom` adds a rule with ⊥ in the head.
pub fn program(sig: &Signature, rules: usize, bottom: bool, shape: &Shape, rng: &mut ChaCha8Rng) -> Program {
    let all: Vec<usize> = (0..sig.predicates.len()).collect();
    let mut out: Vec<Rule> = (0..rules).map(|_| rule(sig, Some(*all.choose(rng).unwrap()), &all, shape, rng)).collect();
    if bottom {
        out.push(rule(sig, None, &all, shape, rng));
    }
    Program::new(out)
}

pub fn dataset(sig: &Signature, max_facts: usize, lo: i64, hi: i64, rng: &mut ChaCha8Rng) -> Vec<Fact> {
    let n = rng.gen_range(1..=max_facts);
    (0..n)
        .map(|_| {
            let (name, arity) = sig.predicates.choose(rng).unwrap();
            let args: Vec<&str> = (0..*arity).map(|_| sig.constants.choose(rng).unwrap().as_str()).collect();
            Fact::new(GroundAtom::new(name, &args), bounded_interval(rng, lo, hi))
        })
        .collect()
}

/// Any syntactically valid program: all operators, rational and infinite
/// bounds, constants, ⊤ and ⊥ in bodies.
pub fn any_program(rng: &mut ChaCha8Rng) -> Program {
    let sig = Signature {
        predicates: vec![("P".into(), 1), ("Q".into(), 2), ("Rr".into(), 0), ("s_1".into(), 3)],
        constants: vec!["a".into(), "b2".into(), "c_c".into()],
    };
    let shape = Shape { depth: 3, max_bound: 9, unbounded: true, since_until: true };
    let n = rng.gen_range(1..=4);
    let rules = (0..n)
        .map(|_| {
            let mut r = program(&sig, 1, false, &shape, rng).rules.remove(0);
            if rng.gen_bool(0.2) {
                let mut body = r.body().to_vec();
                body.push(if rng.gen_bool(0.5) { MetricAtom::Top } else { MetricAtom::Bottom });
                let scale = MetricAtom::DiamondMinus(
                    Interval::new(Bound::Finite(q(1, 2)), Bound::Finite(q(7, 3)), true, false),
                    Box::new(body[0].clone()),
                );
                body.push(scale);
                r = Rule::new(r.head().clone(), body).unwrap();
            }
            if rng.gen_bool(0.1) {
                r = Rule::new(MetricAtom::Bottom, r.body().to_vec()).unwrap();
            }
            r
        })
        .collect();
    Program::new(rules)
}
