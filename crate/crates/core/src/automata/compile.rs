//! Grounding, head normalisation and the node table the search works on.

use std::collections::{BTreeSet, HashMap};

use num_traits::{ToPrimitive, Zero};

use crate::evaluation::{apply_operator, substitutions_over};
use crate::intervals::{interval_op, IntervalOp};
use crate::store::FactStore;
use crate::syntax::{Fact, GroundAtom, MetricAtom, Program, Rule, Symbol};
use crate::{rat, Bound, Interval, Rational};

use super::letter::Letter;
use super::RulerGrid;

pub(crate) type NodeId = usize;

/// Direction a temporal node looks in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub(crate) enum Dir {
    Past,
    Future,
}

impl Dir {
    pub(crate) fn sign(self) -> i64 {
        match self {
            Dir::Past => -1,
            Dir::Future => 1,
        }
    }
}

/// Ruler offsets an operator interval reaches from a point (`near[0]`) or
/// a segment (`near[1]`), plus the offset from which every further one is
/// reached when the interval is unbounded.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub(crate) struct Reach {
    pub near: [Vec<i64>; 2],
    pub tail: Option<i64>,
}

impl Reach {
    fn new(r: &Interval, d: &Rational, skip_zero: bool) -> Reach {
        let units = |v: &Rational| -> i64 { (v / d).to_integer().to_i64().expect("operator bound fits") };
        let a = units(r.left().finite().expect("operator intervals start at a finite point"));
        let (b, tail) = match r.right() {
            Bound::Finite(v) => (Some(units(v)), None),
            _ => (None, Some(2 * a + 1)),
        };
        let lo_open = r.left_open() as i64;
        let hi_open = r.right_open() as i64;
        let point_hi = b.map_or(2 * a, |b| 2 * b - hi_open);
        let seg_hi = b.map_or(2 * a, |b| 2 * b);
        let first = if skip_zero { 1 } else { 0 };
        let point: Vec<i64> = ((2 * a + lo_open).max(first)..=point_hi).collect();
        let seg: Vec<i64> = ((2 * a).max(first)..=seg_hi).collect();
        Reach { near: [point, seg], tail }
    }

    fn max(&self) -> i64 {
        let near = self.near.iter().flat_map(|v| v.last().copied()).max().unwrap_or(0);
        near.max(self.tail.unwrap_or(0))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub(crate) enum NodeKind {
    Top,
    Never,
    Atom(GroundAtom),
    Diamond {
        dir: Dir,
        child: NodeId,
        reach: Reach,
        tail: Option<NodeId>,
    },
    Box {
        dir: Dir,
        child: NodeId,
        reach: Reach,
        tail: Option<NodeId>,
    },
    /// Since (past) and Until (future). `zero` records whether 0 is in the
    /// interval; `zero_open` whether the interval is `(0, ...`.
    Until {
        dir: Dir,
        hold: NodeId,
        goal: NodeId,
        zero: bool,
        zero_open: bool,
        reach: Reach,
        tail: Option<NodeId>,
    },
    EventuallyTail {
        dir: Dir,
        child: NodeId,
    },
    AlwaysTail {
        dir: Dir,
        child: NodeId,
    },
    UntilTail {
        dir: Dir,
        hold: NodeId,
        goal: NodeId,
    },
}

impl NodeKind {
    pub(crate) fn dir(&self) -> Option<Dir> {
        match self {
            NodeKind::Diamond { dir, .. }
            | NodeKind::Box { dir, .. }
            | NodeKind::Until { dir, .. }
            | NodeKind::EventuallyTail { dir, .. }
            | NodeKind::AlwaysTail { dir, .. }
            | NodeKind::UntilTail { dir, .. } => Some(*dir),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Node {
    pub kind: NodeKind,
    /// The ground metric atom this node stands for; `None` for the
    /// auxiliary tail nodes.
    pub formula: Option<MetricAtom>,
    /// Farthest ruler offset the node's definition looks at.
    pub span: i64,
}

/// A ground rule over nodes; `head == None` is ⊥.
#[derive(Clone, Debug)]
pub(crate) struct GroundRule {
    pub body: Vec<NodeId>,
    pub head: Option<NodeId>,
}

#[derive(Clone, Debug)]
pub(crate) struct Compiled {
    pub grid: RulerGrid,
    pub nodes: Vec<Node>,
    pub ids: HashMap<MetricAtom, NodeId>,
    pub rules: Vec<GroundRule>,
    pub top: NodeId,
    /// Window radius: the farthest any node looks.
    pub k: i64,
    pub lq: i64,
    pub rq: i64,
    /// Positions with individual content; outside, content depends only
    /// on the side and the parity.
    pub fixed_lo: i64,
    pub fixed_hi: i64,
    fixed: Vec<Letter>,
    left_tail: [Letter; 2],
    right_tail: [Letter; 2],
    /// Nodes that can be true somewhere.
    pub possible: Letter,
    /// Facts used, for reporting.
    pub data: Vec<(NodeId, Interval)>,
}

pub(crate) fn aux_name(k: usize) -> Symbol {
    Symbol::new(&format!("#aux{k}"))
}

struct Builder {
    d: Rational,
    nodes: Vec<Node>,
    ids: HashMap<MetricAtom, NodeId>,
    kinds: HashMap<NodeKind, NodeId>,
}

impl Builder {
    fn push(&mut self, kind: NodeKind, formula: Option<MetricAtom>) -> NodeId {
        if let Some(&id) = self.kinds.get(&kind) {
            if let Some(f) = formula {
                self.ids.entry(f.clone()).or_insert(id);
                if self.nodes[id].formula.is_none() {
                    self.nodes[id].formula = Some(f);
                }
            }
            return id;
        }
        let span = match &kind {
            NodeKind::Diamond { reach, .. } | NodeKind::Box { reach, .. } | NodeKind::Until { reach, .. } => {
                reach.max()
            }
            NodeKind::EventuallyTail { .. } | NodeKind::AlwaysTail { .. } | NodeKind::UntilTail { .. } => 1,
            _ => 0,
        };
        let id = self.nodes.len();
        self.nodes.push(Node { kind: kind.clone(), formula: formula.clone(), span });
        self.kinds.insert(kind, id);
        if let Some(f) = formula {
            self.ids.insert(f, id);
        }
        id
    }

    fn node(&mut self, m: &MetricAtom) -> NodeId {
        if let Some(&id) = self.ids.get(m) {
            return id;
        }
        let kind = match m {
            MetricAtom::Top => NodeKind::Top,
            MetricAtom::Bottom => NodeKind::Never,
            MetricAtom::Rel(a) => NodeKind::Atom(a.ground(&Default::default()).expect("ground literal")),
            MetricAtom::DiamondMinus(r, c) | MetricAtom::DiamondPlus(r, c) => {
                let dir = if matches!(m, MetricAtom::DiamondMinus(..)) { Dir::Past } else { Dir::Future };
                let child = self.node(c);
                let reach = Reach::new(r, &self.d, false);
                let tail = reach.tail.map(|_| self.push(NodeKind::EventuallyTail { dir, child }, None));
                NodeKind::Diamond { dir, child, reach, tail }
            }
            MetricAtom::BoxMinus(r, c) | MetricAtom::BoxPlus(r, c) => {
                let dir = if matches!(m, MetricAtom::BoxMinus(..)) { Dir::Past } else { Dir::Future };
                let child = self.node(c);
                let reach = Reach::new(r, &self.d, false);
                let tail = reach.tail.map(|_| self.push(NodeKind::AlwaysTail { dir, child }, None));
                NodeKind::Box { dir, child, reach, tail }
            }
            MetricAtom::Since(r, a, b) | MetricAtom::Until(r, a, b) => {
                let dir = if matches!(m, MetricAtom::Since(..)) { Dir::Past } else { Dir::Future };
                let hold = self.node(a);
                let goal = self.node(b);
                let zero_left = r.left().finite().is_some_and(|v| v.is_zero());
                let reach = Reach::new(r, &self.d, true);
                let tail = reach.tail.map(|_| self.push(NodeKind::UntilTail { dir, hold, goal }, None));
                NodeKind::Until {
                    dir,
                    hold,
                    goal,
                    zero: zero_left && !r.left_open(),
                    zero_open: zero_left && r.left_open(),
                    reach,
                    tail,
                }
            }
        };
        self.push(kind, Some(m.clone()))
    }
}

/// Ground rules whose body can hold: atoms start from the dataset and grow
/// with the heads of grounded rules until nothing new appears.
pub(crate) fn relevant_grounding(program: &Program, dataset: &[Fact]) -> Vec<Rule> {
    let mut possible = FactStore::new();
    for f in dataset {
        possible.insert(&Fact::new(f.atom.clone(), Interval::all()));
    }
    let mut out: Vec<Rule> = Vec::new();
    let mut seen: BTreeSet<Rule> = BTreeSet::new();
    let domain = program.constants();
    loop {
        let mut grew = false;
        for r in &program.rules {
            for sigma in substitutions_over(r, &possible, &domain) {
                let g = r.apply(&sigma);
                if !seen.insert(g.clone()) {
                    continue;
                }
                if let Some(a) = g.head().head_atom() {
                    let atom = a.ground(&Default::default()).expect("safe rule");
                    grew |= possible.insert(&Fact::new(atom, Interval::all()));
                }
                out.push(g);
            }
        }
        if !grew {
            return out;
        }
    }
}

/// Offsets at which a box-headed rule places its atom, relative to the
/// time its body holds.
fn head_offsets(head: &MetricAtom) -> Interval {
    let mut offset = Interval::point(rat(0));
    let mut m = head;
    loop {
        match m {
            MetricAtom::BoxPlus(r, c) => {
                offset = interval_op(IntervalOp::Plus, &offset, r).expect("non-empty");
                m = c;
            }
            MetricAtom::BoxMinus(r, c) => {
                offset = interval_op(IntervalOp::Minus, &offset, r).expect("non-empty");
                m = c;
            }
            _ => return offset,
        }
    }
}

impl Compiled {
    pub(crate) fn new(program: &Program, dataset: &[Fact], preinstalled: Option<&FactStore>) -> Compiled {
        let grid = RulerGrid::new(program, dataset);
        let mut b = Builder { d: grid.d.clone(), nodes: Vec::new(), ids: HashMap::new(), kinds: HashMap::new() };
        let top = b.node(&MetricAtom::Top);
        for f in dataset {
            b.node(&MetricAtom::Rel(f.atom.to_relational()));
        }
        let mut rules = Vec::new();
        let mut aux = 0usize;
        for g in relevant_grounding(program, dataset) {
            let body: Vec<NodeId> = g.body().iter().map(|m| b.node(m)).collect();
            let head = g.head();
            match head.head_atom() {
                None => rules.push(GroundRule { body, head: None }),
                Some(a) if matches!(head, MetricAtom::Rel(_)) => {
                    let h = b.node(&MetricAtom::Rel(a.clone()));
                    rules.push(GroundRule { body, head: Some(h) });
                }
                Some(a) => {
                    // A box head becomes an auxiliary atom marking where the
                    // body holds, copied to the atom through diamonds.
                    let marker = MetricAtom::Rel(crate::syntax::RelationalAtom::new(aux_name(aux).as_str(), vec![]));
                    aux += 1;
                    let m = b.node(&marker);
                    rules.push(GroundRule { body, head: Some(m) });
                    let target = b.node(&MetricAtom::Rel(a.clone()));
                    let o = head_offsets(head);
                    let zero = Bound::Finite(rat(0));
                    let fwd = o.intersect(&Interval::new(zero.clone(), Bound::PosInf, false, true));
                    if !fwd.is_empty() {
                        let n = b.node(&MetricAtom::DiamondMinus(fwd, Box::new(marker.clone())));
                        rules.push(GroundRule { body: vec![n], head: Some(target) });
                    }
                    let back = o.intersect(&Interval::new(Bound::NegInf, zero, true, false));
                    if !back.is_empty() {
                        let mirrored =
                            Interval::new(back.right().neg(), back.left().neg(), back.right_open(), back.left_open());
                        let n = b.node(&MetricAtom::DiamondPlus(mirrored, Box::new(marker)));
                        rules.push(GroundRule { body: vec![n], head: Some(target) });
                    }
                }
            }
        }
        let n = b.nodes.len();
        let k = b.nodes.iter().map(|x| x.span).max().unwrap_or(0).max(1);
        let lq = grid.index_of(grid.span.left().finite().expect("finite span"));
        let rq = grid.index_of(grid.span.right().finite().expect("finite span"));
        let fixed_lo = lq - 2 * k;
        let fixed_hi = rq + 2 * k;

        let mut data = Vec::new();
        for f in dataset {
            let id = b.ids[&MetricAtom::Rel(f.atom.to_relational())];
            data.push((id, f.interval.clone()));
        }
        let letter_at = |pos: i64, base: Option<&Vec<(NodeId, Vec<Interval>)>>| -> Letter {
            let t = grid.time_of(pos);
            let mut l = Letter::new(n);
            l.set(top);
            for (id, i) in &data {
                if i.contains(&t) {
                    l.set(*id);
                }
            }
            if let Some(base) = base {
                for (id, list) in base {
                    if list.iter().any(|i| i.contains(&t)) {
                        l.set(*id);
                    }
                }
            }
            l
        };
        let base: Option<Vec<(NodeId, Vec<Interval>)>> = preinstalled.map(|store| {
            b.nodes
                .iter()
                .enumerate()
                .filter_map(|(id, node)| node.formula.as_ref().map(|f| (id, f)))
                .filter(|(_, f)| !matches!(f, MetricAtom::Top))
                .map(|(id, f)| (id, apply_operator(f, store)))
                .filter(|(_, l)| !l.is_empty())
                .collect()
        });
        let fixed = (fixed_lo..=fixed_hi).map(|p| letter_at(p, base.as_ref())).collect();
        let left_tail = [letter_at(fixed_lo - 2, None), letter_at(fixed_lo - 1, None)];
        let right_tail = [letter_at(fixed_hi + 2, None), letter_at(fixed_hi + 1, None)];
        let left_tail =
            if (fixed_lo - 2).rem_euclid(2) == 0 { left_tail } else { [left_tail[1].clone(), left_tail[0].clone()] };
        let right_tail =
            if (fixed_hi + 2).rem_euclid(2) == 0 { right_tail } else { [right_tail[1].clone(), right_tail[0].clone()] };

        let mut c = Compiled {
            grid,
            nodes: b.nodes,
            ids: b.ids,
            rules,
            top,
            k,
            lq,
            rq,
            fixed_lo,
            fixed_hi,
            fixed,
            left_tail,
            right_tail,
            possible: Letter::new(n),
            data,
        };
        c.possible = c.compute_possible();
        c
    }

    /// Data and pre-installed content at a position.
    pub(crate) fn forced(&self, pos: i64) -> &Letter {
        let parity = pos.rem_euclid(2) as usize;
        if pos < self.fixed_lo {
            &self.left_tail[parity]
        } else if pos > self.fixed_hi {
            &self.right_tail[parity]
        } else {
            &self.fixed[(pos - self.fixed_lo) as usize]
        }
    }

    fn compute_possible(&self) -> Letter {
        let mut p = Letter::new(self.nodes.len());
        p.set(self.top);
        for (id, _) in &self.data {
            p.set(*id);
        }
        for l in &self.fixed {
            p.or_assign(l);
        }
        loop {
            let mut changed = false;
            for (id, node) in self.nodes.iter().enumerate() {
                let v = match &node.kind {
                    NodeKind::Top => true,
                    NodeKind::Never | NodeKind::Atom(_) => p.get(id),
                    NodeKind::Diamond { child, .. }
                    | NodeKind::Box { child, .. }
                    | NodeKind::EventuallyTail { child, .. }
                    | NodeKind::AlwaysTail { child, .. } => p.get(*child),
                    NodeKind::Until { goal, .. } | NodeKind::UntilTail { goal, .. } => p.get(*goal),
                };
                if v && !p.get(id) {
                    p.set(id);
                    changed = true;
                }
            }
            for r in &self.rules {
                if let Some(h) = r.head {
                    if !p.get(h) && r.body.iter().all(|&x| p.get(x)) {
                        p.set(h);
                        changed = true;
                    }
                }
            }
            if !changed {
                return p;
            }
        }
    }

    pub(crate) fn describe(&self, l: &Letter) -> Vec<MetricAtom> {
        l.iter().filter_map(|id| self.nodes[id].formula.clone()).filter(|f| !matches!(f, MetricAtom::Top)).collect()
    }
}
