//! Consistency checking by searching for an ultimately periodic model.
//!
//! Time is cut into ruler intervals: the points `k·d` and the open segments
//! between them, where `d` is the gcd of every number in the instance. A
//! model is a bi-infinite word of letters, one per ruler interval, each
//! letter recording which ground sub-formulas hold there. The search
//! places letters from the left end of the dataset span to the right end
//! and then looks for accepting loops beyond both ends.

mod compile;
mod engine;
mod letter;

use std::collections::BTreeSet;
use std::fmt;
use std::sync::atomic::AtomicBool;
use std::sync::Arc;

use num_traits::{Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::intervals::gcd_rationals;
use crate::materialisation::{materialise_with, Limits, Status};
use crate::store::FactStore;
use crate::syntax::{dataset_constants, ground, Fact, GroundAtom, MetricAtom, Program, RelationalAtom, Rule, Symbol};
use crate::{rat, Bound, Interval, Rational};

use compile::{Compiled, NodeKind};
use engine::{Key, Scan, State};
use letter::Letter;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Direction {
    Left,
    Right,
}

/// Output of the reduction from fact entailment to inconsistency.
#[derive(Clone, Debug)]
pub struct ReductionOutput {
    pub program: Program,
    pub dataset: Vec<Fact>,
    pub fresh_predicate: Symbol,
}

/// Spacing and extent of the ruler.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RulerGrid {
    pub d: Rational,
    /// Largest absolute finite endpoint in the dataset.
    pub x: Rational,
    /// Largest finite operator bound in the program.
    pub z: Rational,
    /// `[-x-z, x+z]`.
    pub span: Interval,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum RulerInterval {
    Point(Rational),
    Segment(Rational, Rational),
}

impl RulerInterval {
    pub fn to_interval(&self) -> Interval {
        match self {
            RulerInterval::Point(t) => Interval::point(t.clone()),
            RulerInterval::Segment(a, b) => {
                Interval::new(Bound::Finite(a.clone()), Bound::Finite(b.clone()), true, true)
            }
        }
    }
}

impl fmt::Display for RulerInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RulerInterval::Point(t) => write!(f, "[{t},{t}]"),
            RulerInterval::Segment(a, b) => write!(f, "({a},{b})"),
        }
    }
}

impl RulerGrid {
    pub fn new(program: &Program, dataset: &[Fact]) -> RulerGrid {
        let mut endpoints = Vec::new();
        for f in dataset {
            for b in [f.interval.left(), f.interval.right()] {
                if let Some(v) = b.finite() {
                    endpoints.push(v.abs());
                }
            }
        }
        let ops: Vec<Rational> = program.operator_endpoints().into_iter().map(|v| v.abs()).collect();
        let all: Vec<Rational> = endpoints.iter().chain(ops.iter()).cloned().collect();
        let d = gcd_rationals(&all).unwrap_or_else(|_| rat(1));
        let x = endpoints.into_iter().max().unwrap_or_else(Rational::zero);
        let z = ops.into_iter().max().unwrap_or_else(Rational::zero);
        let r = &x + &z;
        let span = Interval::closed(-r.clone(), r);
        RulerGrid { d, x, z, span }
    }

    /// Index of the ruler interval containing `t`: `2k` for the point
    /// `k·d`, `2k+1` for the segment after it.
    pub fn locate(&self, t: &Rational) -> i64 {
        let q = t / &self.d;
        let k = q.floor().to_integer().to_i64().expect("time fits the ruler");
        if q.is_integer() {
            2 * k
        } else {
            2 * k + 1
        }
    }

    pub(crate) fn index_of(&self, t: &Rational) -> i64 {
        self.locate(t)
    }

    /// A time inside ruler interval `n`: the point itself or the segment
    /// midpoint.
    pub fn time_of(&self, n: i64) -> Rational {
        &self.d * Rational::new(n.into(), 2.into())
    }

    pub fn ruler_interval(&self, n: i64) -> RulerInterval {
        let k = Rational::from_integer(n.div_euclid(2).into());
        if n.rem_euclid(2) == 0 {
            RulerInterval::Point(k * &self.d)
        } else {
            RulerInterval::Segment(&k * &self.d, (k + rat(1)) * &self.d)
        }
    }
}

/// A block of consecutive ruler intervals starting at index `start`, each
/// labelled with the ground metric atoms claimed to hold on it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Window {
    pub start: i64,
    pub letters: Vec<BTreeSet<MetricAtom>>,
}

impl Window {
    pub fn end(&self) -> i64 {
        self.start + self.letters.len() as i64 - 1
    }

    pub fn ruler_intervals(&self, grid: &RulerGrid) -> Vec<RulerInterval> {
        (self.start..=self.end()).map(|n| grid.ruler_interval(n)).collect()
    }

    /// Ground atoms holding somewhere in the window, as facts over ruler
    /// intervals.
    pub fn facts(&self, grid: &RulerGrid) -> Vec<Fact> {
        let mut out = Vec::new();
        for (i, l) in self.letters.iter().enumerate() {
            let ri = grid.ruler_interval(self.start + i as i64).to_interval();
            for m in l {
                if let MetricAtom::Rel(a) = m {
                    if let Some(g) = a.ground(&Default::default()) {
                        if !g.predicate.as_str().starts_with('#') {
                            out.push(Fact::new(g, ri.clone()));
                        }
                    }
                }
            }
        }
        out
    }
}

/// Fairness conditions of one direction: for every listed unbounded box,
/// the box must hold or its operand fail infinitely often.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AcceptingConditions {
    pub direction: Direction,
    pub boxes: Vec<MetricAtom>,
}

#[derive(Clone, Debug)]
pub struct AutomataConfig {
    /// Carry unbounded boxes forward once claimed.
    pub prune_unbounded_boxes: bool,
    pub max_states: Option<usize>,
    pub trace: bool,
}

impl Default for AutomataConfig {
    fn default() -> Self {
        AutomataConfig { prune_unbounded_boxes: true, max_states: None, trace: false }
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ConsistencyReport {
    pub consistent: bool,
    pub states: usize,
    /// Rounds of the span-bounded materialisation run first.
    pub rounds: usize,
    /// Explored states in DOT form when tracing.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dot: Option<String>,
}

/// The compiled automaton of a program and dataset.
pub struct Automaton {
    compiled: Compiled,
    config: AutomataConfig,
}

impl Automaton {
    /// Compiles an instance. Content of `preinstalled` is known to hold in
    /// every model and is installed as a lower bound on every letter.
    pub fn new(
        program: &Program,
        dataset: &[Fact],
        preinstalled: Option<&FactStore>,
        config: AutomataConfig,
    ) -> Automaton {
        Automaton { compiled: Compiled::new(program, dataset, preinstalled), config }
    }

    pub fn grid(&self) -> &RulerGrid {
        &self.compiled.grid
    }

    /// Number of ruler intervals a node looks across.
    pub fn radius(&self) -> i64 {
        self.compiled.k
    }

    /// Ruler indices of the two ends of the span.
    pub fn span_indices(&self) -> (i64, i64) {
        (self.compiled.lq, self.compiled.rq)
    }

    pub fn node_count(&self) -> usize {
        self.compiled.nodes.len()
    }

    pub fn accepting_conditions(&self, direction: Direction) -> AcceptingConditions {
        let sigma = if direction == Direction::Right { 1 } else { -1 };
        let scan = Scan::new(&self.compiled, sigma);
        let mut boxes = Vec::new();
        for n in &self.compiled.nodes {
            if let NodeKind::Box { dir, tail: Some(_), .. } = &n.kind {
                if dir.sign() == sigma {
                    boxes.extend(n.formula.clone());
                }
            }
        }
        debug_assert_eq!(boxes.len(), scan.fairness_count());
        AcceptingConditions { direction, boxes }
    }

    fn scan<'a>(&'a self, sigma: i64, cancel: Option<&'a AtomicBool>) -> Scan<'a> {
        let mut s = Scan::new(&self.compiled, sigma);
        s.prune = self.config.prune_unbounded_boxes;
        s.max_states = self.config.max_states;
        s.cancel = cancel;
        s
    }

    fn to_letters(&self, w: &Window) -> Vec<Letter> {
        let c = &self.compiled;
        let mut letters: Vec<Letter> = w
            .letters
            .iter()
            .map(|set| {
                let mut l = Letter::new(c.nodes.len());
                l.set(c.top);
                for m in set {
                    if let Some(&id) = c.ids.get(m) {
                        l.set(id);
                    }
                }
                l
            })
            .collect();
        // Auxiliary nodes take their least values inside the window.
        let tails: Vec<usize> =
            (0..c.nodes.len()).filter(|&i| c.nodes[i].formula.is_none() || c.nodes[i].kind.dir().is_none()).collect();
        loop {
            let mut changed = false;
            for q in 0..letters.len() {
                for &id in &tails {
                    if letters[q].get(id) || matches!(c.nodes[id].kind, NodeKind::Atom(_) | NodeKind::Top) {
                        continue;
                    }
                    if engine_eval(c, id, w.start, &letters, w.start + q as i64) {
                        letters[q].set(id);
                        changed = true;
                    }
                }
            }
            if !changed {
                return letters;
            }
        }
    }

    fn to_window(&self, start: i64, letters: &[Letter]) -> Window {
        let c = &self.compiled;
        Window { start, letters: letters.iter().map(|l| c.describe(l).into_iter().collect()).collect() }
    }

    /// Local check of a window: dataset facts installed, every claimed
    /// operator covering what the window itself forces, and every rule
    /// whose body is claimed having its head claimed.
    pub fn check_satisfiability(&self, w: &Window) -> bool {
        let c = &self.compiled;
        let letters = self.to_letters(w);
        for (i, l) in letters.iter().enumerate() {
            let q = w.start + i as i64;
            let t = c.grid.time_of(q);
            for (id, interval) in &c.data {
                if interval.contains(&t) && !l.get(*id) {
                    return false;
                }
            }
            for (id, node) in c.nodes.iter().enumerate() {
                if node.kind.dir().is_some() && !l.get(id) && engine_eval(c, id, w.start, &letters, q) {
                    return false;
                }
            }
            for r in &c.rules {
                if r.body.iter().all(|&b| l.get(b)) {
                    match r.head {
                        None => return false,
                        Some(h) if !l.get(h) => return false,
                        Some(_) => {}
                    }
                }
            }
        }
        true
    }

    fn state_at_end(&self, letters: &[Letter], last: i64, sigma: i64) -> State {
        let two_k = 2 * self.compiled.k as usize;
        let mut w: Vec<Letter> = letters.to_vec();
        if sigma < 0 {
            w.reverse();
        }
        let skip = w.len().saturating_sub(two_k);
        let scan = Scan::new(&self.compiled, sigma);
        let key = match scan.key_of(last) {
            Key::Tail(_) => Key::Fixed(last),
            k => k,
        };
        State { key, window: w[skip..].to_vec().into() }
    }

    /// Extends a window rightwards until it covers the right end of the
    /// span; `None` if no extension passes every check.
    pub fn search_window(&self, w: &Window, cancel: Option<&AtomicBool>) -> Result<Option<Window>> {
        let letters = self.to_letters(w);
        if w.letters.is_empty() {
            return Err(Error::UnsupportedQuery("empty window".into()));
        }
        let mut scan = self.scan(1, cancel);
        let init = self.state_at_end(&letters, w.end(), 1);
        match scan.extend_to(init, self.compiled.rq)? {
            None => Ok(None),
            Some(more) => {
                let mut all = letters;
                all.extend(more);
                Ok(Some(self.to_window(w.start, &all)))
            }
        }
    }

    /// Whether the window extends forever in the given direction with
    /// every fairness condition met infinitely often.
    pub fn buchi_emptiness(&self, direction: Direction, w0: &Window, cancel: Option<&AtomicBool>) -> Result<bool> {
        let letters = self.to_letters(w0);
        let sigma = if direction == Direction::Right { 1 } else { -1 };
        let last = if sigma > 0 { w0.end() } else { w0.start };
        let mut scan = self.scan(sigma, cancel);
        let init = self.state_at_end(&letters, last, sigma);
        scan.buchi(init)
    }

    /// Full search: a word over the span with accepting continuations on
    /// both sides.
    pub fn run(&self, cancel: Option<&AtomicBool>) -> Result<ConsistencyReport> {
        let mut scan = self.scan(1, cancel);
        scan.check_left = true;
        if self.config.trace {
            scan.trace = Some(Default::default());
        }
        let init = State { key: Key::Start, window: Vec::new().into() };
        let consistent = scan.buchi(init)?;
        Ok(ConsistencyReport {
            consistent,
            states: scan.explored,
            rounds: 0,
            dot: scan.trace.as_ref().map(|t| t.to_dot()),
        })
    }

    /// The letters of a model found over the span, if any: used to show
    /// witnesses.
    pub fn span_model(&self, cancel: Option<&AtomicBool>) -> Result<Option<Window>> {
        let mut scan = self.scan(1, cancel);
        let init = State { key: Key::Start, window: Vec::new().into() };
        let start = self.compiled.fixed_lo;
        Ok(scan.extend_to(init, self.compiled.rq)?.map(|l| self.to_window(start, &l)))
    }
}

fn engine_eval(c: &Compiled, id: usize, start: i64, letters: &[Letter], q: i64) -> bool {
    engine::eval_in(c, id, start, letters, q)
}

/// Reduces `Π, D ⊨ query` to inconsistency of a new program and dataset
/// with a fresh nullary predicate marking the anchor point.
pub fn entail_to_inconsist(program: &Program, dataset: &[Fact], query: &Fact) -> Result<ReductionOutput> {
    let r = &query.interval;
    if r.is_empty() {
        return Err(Error::UnsupportedQuery(format!("{query}: empty interval")));
    }
    let mut taken: BTreeSet<Symbol> = program.head_predicates();
    taken.extend(program.body_predicates());
    taken.extend(dataset.iter().map(|f| f.atom.predicate.clone()));
    taken.insert(query.atom.predicate.clone());
    let fresh = (0..)
        .map(|i| Symbol::new(&if i == 0 { "QueryAnchor".to_string() } else { format!("QueryAnchor{i}") }))
        .find(|s| !taken.contains(s))
        .expect("fresh name");
    let m = Box::new(MetricAtom::Rel(query.atom.to_relational()));
    let zero = Bound::Finite(rat(0));
    let (b, anchor) = match (r.left(), r.right()) {
        (Bound::Finite(t1), Bound::Finite(t2)) if t1 == t2 => (*m, t1.clone()),
        (Bound::Finite(t1), Bound::Finite(t2)) => (
            MetricAtom::BoxMinus(Interval::new(zero, Bound::Finite(t2 - t1), r.right_open(), r.left_open()), m),
            t2.clone(),
        ),
        (Bound::Finite(t), Bound::PosInf) => {
            (MetricAtom::BoxPlus(Interval::new(zero, Bound::PosInf, r.left_open(), true), m), t.clone())
        }
        (Bound::NegInf, Bound::Finite(t)) => {
            (MetricAtom::BoxMinus(Interval::new(zero, Bound::PosInf, r.right_open(), true), m), t.clone())
        }
        _ => return Err(Error::UnsupportedQuery(format!("{query}: unbounded on both sides"))),
    };
    let marker = MetricAtom::Rel(RelationalAtom::new(fresh.as_str(), vec![]));
    let mut rules = program.rules.clone();
    rules.push(Rule::new(MetricAtom::Bottom, vec![marker, b])?);
    let mut data = dataset.to_vec();
    data.push(Fact::new(GroundAtom { predicate: fresh.clone(), args: Arc::from(Vec::new()) }, Interval::point(anchor)));
    Ok(ReductionOutput { program: Program::new(rules), dataset: data, fresh_predicate: fresh })
}

/// Ground literals whose subsets label ruler intervals: ⊤, every ground
/// sub-formula of the program's rules over the constants of the program
/// and dataset, and the four unbounded boxes over each dataset atom.
pub fn literal_universe(program: &Program, dataset: &[Fact]) -> BTreeSet<MetricAtom> {
    let mut constants = dataset_constants(dataset);
    constants.extend(program.constants());
    let mut out = BTreeSet::new();
    out.insert(MetricAtom::Top);
    for r in ground(program, &constants) {
        for m in std::iter::once(r.head()).chain(r.body()) {
            for s in m.subformulas() {
                if !matches!(s, MetricAtom::Bottom) {
                    out.insert(s.clone());
                }
            }
        }
    }
    let zero = Bound::Finite(rat(0));
    for f in dataset {
        let a = Box::new(MetricAtom::Rel(f.atom.to_relational()));
        out.insert((*a).clone());
        for open in [false, true] {
            let r = Interval::new(zero.clone(), Bound::PosInf, open, true);
            out.insert(MetricAtom::BoxMinus(r.clone(), a.clone()));
            out.insert(MetricAtom::BoxPlus(r, a.clone()));
        }
    }
    out
}

pub fn check_satisfiability(w: &Window, program: &Program, dataset: &[Fact]) -> bool {
    Automaton::new(program, dataset, None, AutomataConfig::default()).check_satisfiability(w)
}

pub fn search_window(w: &Window, program: &Program, dataset: &[Fact]) -> Result<Option<Window>> {
    Automaton::new(program, dataset, None, AutomataConfig::default()).search_window(w, None)
}

pub fn buchi_emptiness(direction: Direction, w0: &Window, program: &Program, dataset: &[Fact]) -> Result<bool> {
    Automaton::new(program, dataset, None, AutomataConfig::default()).buchi_emptiness(direction, w0, None)
}

/// Whether the program and dataset have a model.
pub fn consistent(program: &Program, dataset: &[Fact]) -> bool {
    consistent_with(program, dataset, None, &AutomataConfig::default(), None).expect("no limits configured").consistent
}

/// The full decision procedure with a pre-installed store, limits and
/// cancellation. A program without ⊥ in any head is consistent at once;
/// otherwise materialisation bounded to the span runs first and the
/// automaton search is only needed when it finds no ⊥.
pub fn consistent_with(
    program: &Program,
    dataset: &[Fact],
    preinstalled: Option<&FactStore>,
    config: &AutomataConfig,
    cancel: Option<&AtomicBool>,
) -> Result<ConsistencyReport> {
    if !program.has_bottom_head() {
        return Ok(ConsistencyReport { consistent: true, states: 0, rounds: 0, dot: None });
    }
    let body = program.body_predicates();
    let data: Vec<Fact> = dataset.iter().filter(|f| body.contains(&f.atom.predicate)).cloned().collect();
    let mut store = FactStore::from_facts(data.iter().cloned());
    if let Some(pre) = preinstalled {
        for f in pre.facts() {
            if body.contains(&f.atom.predicate) {
                store.insert(&f);
            }
        }
    }
    let shape = Compiled::new(program, &data, None);
    let g = &shape.grid;
    let horizon = Interval::closed(g.time_of(shape.fixed_lo - shape.k), g.time_of(shape.fixed_hi + shape.k));
    let limits = Limits { horizon: Some(&horizon), cancel, ..Limits::default() };
    let out = materialise_with(program, &store, limits);
    match out.status {
        Status::Inconsistent => {
            return Ok(ConsistencyReport { consistent: false, states: 0, rounds: out.rounds, dot: None })
        }
        Status::Cancelled => return Err(Error::Cancelled),
        _ => {}
    }
    let automaton = Automaton::new(program, &data, Some(&out.store), config.clone());
    let mut report = automaton.run(cancel)?;
    report.rounds = out.rounds;
    Ok(report)
}
