//! Letter placement, window checks and the generalised Büchi search.
//!
//! A scan places one letter per ruler position, moving right (`sigma = 1`)
//! or left (`sigma = -1`). Nodes looking back over already placed letters
//! are computed; nodes looking ahead are claimed, starting from the values
//! forced by what is known and adding guesses smallest set first. Claims
//! may exceed the truth but never fall below it: each ahead claim is
//! re-checked as later letters arrive, and unbounded boxes in the scan
//! direction carry a fairness condition so that a box cannot stay
//! unclaimed forever while its operand keeps holding.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};

use super::compile::{Compiled, NodeId, NodeKind};
use super::letter::Letter;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub(crate) enum Key {
    Start,
    Fixed(i64),
    Tail(u8),
}

/// A search state: where the scan stands and the letters behind it, oldest
/// first, at most `2k` of them.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub(crate) struct State {
    pub key: Key,
    pub window: Arc<[Letter]>,
}

/// Letters visible while placing position `p`.
struct View<'a> {
    prev: &'a [Letter],
    cur: Option<&'a Letter>,
    p: i64,
    sigma: i64,
}

impl View<'_> {
    fn get(&self, q: i64) -> Option<&Letter> {
        let back = self.sigma * (self.p - q);
        if back < 0 {
            None
        } else if back == 0 {
            self.cur
        } else {
            let i = self.prev.len() as i64 - back;
            if i < 0 {
                None
            } else {
                Some(&self.prev[i as usize])
            }
        }
    }

    fn claim(&self, id: NodeId, q: i64) -> bool {
        self.get(q).is_some_and(|l| l.get(id))
    }
}

fn parity(q: i64) -> usize {
    q.rem_euclid(2) as usize
}

/// Lower bound of a node's value at `q`: unknown letters count as empty.
fn eval(c: &Compiled, id: NodeId, q: i64, v: &View<'_>) -> bool {
    let par = parity(q);
    match &c.nodes[id].kind {
        NodeKind::Top => true,
        NodeKind::Never => false,
        NodeKind::Atom(_) => v.claim(id, q),
        NodeKind::Diamond { dir, child, reach, tail } => {
            let s = dir.sign();
            reach.near[par].iter().any(|&d| v.claim(*child, q + s * d))
                || tail.is_some_and(|t| v.claim(t, q + s * reach.tail.expect("tail offset")))
        }
        NodeKind::Box { dir, child, reach, tail } => {
            let s = dir.sign();
            reach.near[par].iter().all(|&d| v.claim(*child, q + s * d))
                && tail.map_or(true, |t| v.claim(t, q + s * reach.tail.expect("tail offset")))
        }
        NodeKind::Until { dir, hold, goal, zero, zero_open, reach, tail } => {
            let s = dir.sign();
            let seg = par == 1;
            if *zero && v.claim(*goal, q) {
                return true;
            }
            if seg && !v.claim(*hold, q) {
                return false;
            }
            if *zero_open && seg && v.claim(*goal, q) {
                return true;
            }
            let near = &reach.near[par];
            let (lo, hi) = (near.first().copied().unwrap_or(1), near.last().copied().unwrap_or(0));
            let limit = hi.max(reach.tail.unwrap_or(0));
            for d in 1..=limit {
                if d > 1 && !v.claim(*hold, q + s * (d - 1)) {
                    return false;
                }
                let at = q + s * d;
                if d >= lo && d <= hi && v.claim(*goal, at) && (parity(at) == 0 || v.claim(*hold, at)) {
                    return true;
                }
                if reach.tail == Some(d) && tail.is_some_and(|t| v.claim(t, at)) {
                    return true;
                }
            }
            false
        }
        NodeKind::EventuallyTail { dir, child } => v.claim(*child, q) || v.claim(id, q + dir.sign()),
        NodeKind::AlwaysTail { dir, child } => v.claim(*child, q) && v.claim(id, q + dir.sign()),
        NodeKind::UntilTail { dir, hold, goal } => {
            (v.claim(*goal, q) && (par == 0 || v.claim(*hold, q))) || (v.claim(*hold, q) && v.claim(id, q + dir.sign()))
        }
    }
}

/// [`eval`] over a block of letters starting at ruler index `start`.
pub(crate) fn eval_in(c: &Compiled, id: NodeId, start: i64, letters: &[Letter], q: i64) -> bool {
    let view = View { prev: letters, cur: None, p: start + letters.len() as i64, sigma: 1 };
    eval(c, id, q, &view)
}

/// Subsets of `0..m` by increasing size, then lexicographically.
#[derive(Clone, Debug)]
struct Subsets {
    m: usize,
    idx: Vec<usize>,
    done: bool,
}

impl Subsets {
    fn new(m: usize) -> Self {
        Subsets { m, idx: Vec::new(), done: false }
    }

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.idx.clone();
        // Advance to the next combination of the same size, or grow.
        let k = self.idx.len();
        let mut i = k;
        loop {
            if i == 0 {
                if k == self.m {
                    self.done = true;
                } else {
                    self.idx = (0..k + 1).collect();
                }
                break;
            }
            i -= 1;
            if self.idx[i] < self.m - k + i {
                self.idx[i] += 1;
                for j in i + 1..k {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}

/// Lazy successor enumeration of one state.
pub(crate) struct SuccGen {
    p: i64,
    prev: Arc<[Letter]>,
    free: Vec<NodeId>,
    subsets: Subsets,
    seen: HashSet<Letter>,
}

#[derive(Clone, Debug, Default)]
pub(crate) struct Trace {
    pub states: Vec<String>,
    pub edges: Vec<(usize, usize)>,
}

impl Trace {
    pub(crate) fn to_dot(&self) -> String {
        let mut s = String::from("digraph states {\n");
        for (i, label) in self.states.iter().enumerate() {
            let _ = writeln!(s, "  s{i} [label=\"{}\"];", label.replace('"', "\\\""));
        }
        for (a, b) in &self.edges {
            let _ = writeln!(s, "  s{a} -> s{b};");
        }
        s.push_str("}\n");
        s
    }
}

pub(crate) struct Scan<'c> {
    pub c: &'c Compiled,
    pub sigma: i64,
    pub prune: bool,
    /// Check the infinite part behind the start once the first full
    /// window is placed (forward search of the consistency check).
    pub check_left: bool,
    pub cancel: Option<&'c AtomicBool>,
    pub max_states: Option<usize>,
    pub explored: usize,
    pub trace: Option<Trace>,
    trace_ids: HashMap<State, usize>,
    left_memo: HashMap<Arc<[Letter]>, bool>,
    ahead: Vec<bool>,
    behind: Vec<bool>,
    monotone: Vec<NodeId>,
    fairness: Vec<(NodeId, NodeId)>,
}

impl<'c> Scan<'c> {
    pub(crate) fn new(c: &'c Compiled, sigma: i64) -> Self {
        let dirs: Vec<Option<i64>> = c.nodes.iter().map(|n| n.kind.dir().map(|d| d.sign())).collect();
        let ahead: Vec<bool> = dirs.iter().map(|d| *d == Some(sigma)).collect();
        let behind = dirs.iter().map(|d| *d == Some(-sigma)).collect();
        let monotone = (0..c.nodes.len())
            .filter(|&i| ahead[i])
            .filter(|&i| match &c.nodes[i].kind {
                NodeKind::Box { tail, .. } => tail.is_some(),
                NodeKind::AlwaysTail { .. } => true,
                _ => false,
            })
            .collect();
        let fairness = (0..c.nodes.len())
            .filter(|&i| ahead[i])
            .filter_map(|i| match &c.nodes[i].kind {
                NodeKind::AlwaysTail { child, .. } => Some((i, *child)),
                _ => None,
            })
            .collect();
        Scan {
            c,
            sigma,
            prune: true,
            check_left: false,
            cancel: None,
            max_states: None,
            explored: 0,
            trace: None,
            trace_ids: HashMap::new(),
            left_memo: HashMap::new(),
            ahead,
            behind,
            monotone,
            fairness,
        }
    }

    pub(crate) fn fairness_count(&self) -> usize {
        self.fairness.len()
    }

    fn all_fair(&self) -> u64 {
        if self.fairness.len() >= 64 {
            u64::MAX
        } else {
            (1u64 << self.fairness.len()) - 1
        }
    }

    pub(crate) fn position(&self, key: &Key) -> i64 {
        match key {
            Key::Fixed(n) => *n,
            Key::Start => {
                if self.sigma > 0 {
                    self.c.fixed_lo - 1
                } else {
                    self.c.fixed_hi + 1
                }
            }
            Key::Tail(par) => {
                let edge = if self.sigma > 0 { self.c.fixed_hi + 1 } else { self.c.fixed_lo - 1 };
                if parity(edge) == *par as usize {
                    edge
                } else {
                    edge + self.sigma
                }
            }
        }
    }

    pub(crate) fn key_of(&self, p: i64) -> Key {
        if (self.sigma > 0 && p > self.c.fixed_hi) || (self.sigma < 0 && p < self.c.fixed_lo) {
            Key::Tail(parity(p) as u8)
        } else {
            Key::Fixed(p)
        }
    }

    /// The least letter at `p` containing `guess`, or `None` if a ⊥ rule
    /// fires.
    fn letter(&self, p: i64, prev: &[Letter], guess: &[NodeId]) -> Option<Letter> {
        let c = self.c;
        let mut l = c.forced(p).clone();
        for &g in guess {
            l.set(g);
        }
        if self.prune {
            if let Some(last) = prev.last() {
                for &m in &self.monotone {
                    if last.get(m) {
                        l.set(m);
                    }
                }
            }
        }
        loop {
            let mut changed = false;
            for id in 0..c.nodes.len() {
                if l.get(id) || !(self.ahead[id] || self.behind[id]) {
                    continue;
                }
                let v = eval(c, id, p, &View { prev, cur: Some(&l), p, sigma: self.sigma });
                if v {
                    l.set(id);
                    changed = true;
                }
            }
            for r in &c.rules {
                if r.body.iter().all(|&b| l.get(b)) {
                    match r.head {
                        None => return None,
                        Some(h) => changed |= l.set(h),
                    }
                }
            }
            if !changed {
                return Some(l);
            }
        }
    }

    /// Ahead claims at the last `k` positions must cover their values now
    /// that `p` is known.
    fn window_ok(&self, p: i64, prev: &[Letter], cur: &Letter) -> bool {
        let view = View { prev, cur: Some(cur), p, sigma: self.sigma };
        let depth = (self.c.k as usize).min(prev.len());
        for j in 1..=depth as i64 {
            let q = p - self.sigma * j;
            let l = view.get(q).expect("in window");
            for id in 0..self.c.nodes.len() {
                if self.ahead[id] && !l.get(id) && eval(self.c, id, q, &view) {
                    return false;
                }
            }
        }
        true
    }

    pub(crate) fn start(&self, s: &State) -> SuccGen {
        let p = self.position(&s.key) + self.sigma;
        let prev = s.window.clone();
        let base = self.letter(p, &prev, &[]);
        let mut free = Vec::new();
        if let Some(base) = &base {
            for (id, node) in self.c.nodes.iter().enumerate() {
                if base.get(id) || !self.c.possible.get(id) || node.span == 0 {
                    continue;
                }
                if self.ahead[id] || (self.behind[id] && node.span > prev.len() as i64) {
                    free.push(id);
                }
            }
        }
        let mut subsets = Subsets::new(free.len());
        if base.is_none() {
            subsets.done = true;
        }
        SuccGen { p, prev, free, subsets, seen: HashSet::new() }
    }

    pub(crate) fn next(&mut self, g: &mut SuccGen) -> Result<Option<(State, u64)>> {
        let two_k = 2 * self.c.k as usize;
        while let Some(pick) = g.subsets.next() {
            if self.cancel.is_some_and(|f| f.load(Ordering::Relaxed)) {
                return Err(Error::Cancelled);
            }
            let guess: Vec<NodeId> = pick.iter().map(|&i| g.free[i]).collect();
            let Some(l) = self.letter(g.p, &g.prev, &guess) else { continue };
            if !g.seen.insert(l.clone()) {
                continue;
            }
            if !self.window_ok(g.p, &g.prev, &l) {
                continue;
            }
            let mut w: Vec<Letter> = g.prev.iter().cloned().collect();
            w.push(l);
            let mut label = 0u64;
            if w.len() > self.c.k as usize {
                let q = g.p - self.sigma * self.c.k;
                let view = View { prev: &w[..w.len() - 1], cur: w.last(), p: g.p, sigma: self.sigma };
                let at = view.get(q).expect("in window");
                for (i, &(a, child)) in self.fairness.iter().enumerate() {
                    if at.get(a) || !at.get(child) {
                        label |= 1 << i.min(63);
                    }
                }
            }
            if w.len() > two_k {
                w.remove(0);
            }
            let window: Arc<[Letter]> = w.into();
            if self.check_left && g.prev.len() + 1 == two_k && !self.left_ok(&window)? {
                continue;
            }
            return Ok(Some((State { key: self.key_of(g.p), window }, label)));
        }
        Ok(None)
    }

    /// Whether the first full window of a forward scan extends to the left
    /// forever.
    fn left_ok(&mut self, window: &Arc<[Letter]>) -> Result<bool> {
        if let Some(&v) = self.left_memo.get(window) {
            return Ok(v);
        }
        let mut back = Scan::new(self.c, -self.sigma);
        back.prune = self.prune;
        back.cancel = self.cancel;
        back.max_states = self.max_states.map(|m| m.saturating_sub(self.explored));
        let rev: Vec<Letter> = window.iter().rev().cloned().collect();
        let first = if self.sigma > 0 { self.c.fixed_lo } else { self.c.fixed_hi };
        let init = State { key: Key::Fixed(first), window: rev.into() };
        let ok = back.buchi(init)?;
        self.explored += back.explored;
        self.left_memo.insert(window.clone(), ok);
        Ok(ok)
    }

    fn count_state(&mut self, s: &State) -> Result<()> {
        self.explored += 1;
        if self.max_states.is_some_and(|m| self.explored > m) {
            return Err(Error::StateLimit(self.explored));
        }
        if let Some(t) = &mut self.trace {
            let id = t.states.len();
            let pos = match s.key {
                Key::Start => "start".to_string(),
                Key::Fixed(n) => format!("{}", self.c.grid.ruler_interval(n)),
                Key::Tail(p) => format!("tail/{p}"),
            };
            let last = s.window.last().map(|l| self.c.describe(l)).unwrap_or_default();
            let text: Vec<String> = last.iter().map(|m| m.to_string()).collect();
            t.states.push(format!("{pos}: {{{}}}", text.join(", ")));
            self.trace_ids.insert(s.clone(), id);
        }
        Ok(())
    }

    fn trace_edge(&mut self, a: &State, b: &State) {
        if let Some(t) = &mut self.trace {
            if let (Some(&x), Some(&y)) = (self.trace_ids.get(a), self.trace_ids.get(b)) {
                t.edges.push((x, y));
            }
        }
    }

    /// On-the-fly emptiness check for generalised Büchi conditions on
    /// edges: true iff some path from `init` reaches a cycle whose edges
    /// together satisfy every fairness condition.
    pub(crate) fn buchi(&mut self, init: State) -> Result<bool> {
        let all = self.all_fair();
        let mut num: HashMap<State, usize> = HashMap::new();
        let mut roots: Vec<(usize, u64)> = Vec::new();
        let mut arcs: Vec<u64> = Vec::new();
        let mut live: Vec<State> = Vec::new();
        let mut todo: Vec<(State, SuccGen)> = Vec::new();
        let mut counter = 0usize;

        self.count_state(&init)?;
        counter += 1;
        num.insert(init.clone(), counter);
        roots.push((counter, 0));
        arcs.push(0);
        live.push(init.clone());
        let g = self.start(&init);
        todo.push((init, g));

        while let Some((s, mut g)) = todo.pop() {
            match self.next(&mut g)? {
                Some((t, label)) => {
                    todo.push((s.clone(), g));
                    match num.get(&t).copied() {
                        None => {
                            self.count_state(&t)?;
                            self.trace_edge(&s, &t);
                            counter += 1;
                            num.insert(t.clone(), counter);
                            roots.push((counter, 0));
                            arcs.push(label);
                            live.push(t.clone());
                            let gt = self.start(&t);
                            todo.push((t, gt));
                        }
                        Some(0) => {}
                        Some(h) => {
                            self.trace_edge(&s, &t);
                            let mut acc = label;
                            while roots.last().expect("root").0 > h {
                                let (_, a) = roots.pop().expect("root");
                                acc |= a | arcs.pop().expect("arc");
                            }
                            let top = roots.last_mut().expect("root");
                            top.1 |= acc;
                            if top.1 & all == all {
                                return Ok(true);
                            }
                        }
                    }
                }
                None => {
                    let h = num[&s];
                    if roots.last().expect("root").0 == h {
                        roots.pop();
                        arcs.pop();
                        while let Some(x) = live.last() {
                            if num[x] >= h {
                                num.insert(x.clone(), 0);
                                live.pop();
                            } else {
                                break;
                            }
                        }
                    }
                }
            }
        }
        Ok(false)
    }

    /// Depth-first extension until position `target` is placed; returns
    /// the placed letters.
    pub(crate) fn extend_to(&mut self, init: State, target: i64) -> Result<Option<Vec<Letter>>> {
        if self.sigma * (target - self.position(&init.key)) <= 0 {
            return Ok(Some(Vec::new()));
        }
        let mut dead: HashSet<State> = HashSet::new();
        let mut path: Vec<(State, SuccGen)> = Vec::new();
        let g = self.start(&init);
        path.push((init, g));
        while let Some((s, mut g)) = path.pop() {
            match self.next(&mut g)? {
                Some((t, _)) => {
                    path.push((s, g));
                    if dead.contains(&t) {
                        continue;
                    }
                    self.count_state(&t)?;
                    if self.position(&t.key) == target {
                        let mut out: Vec<Letter> =
                            path.iter().skip(1).map(|(x, _)| x.window.last().expect("placed").clone()).collect();
                        out.push(t.window.last().expect("placed").clone());
                        return Ok(Some(out));
                    }
                    let gt = self.start(&t);
                    path.push((t, gt));
                }
                None => {
                    dead.insert(s);
                }
            }
        }
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subsets_by_size() {
        let mut s = Subsets::new(3);
        let mut all = Vec::new();
        while let Some(x) = s.next() {
            all.push(x);
        }
        assert_eq!(all, vec![vec![], vec![0], vec![1], vec![2], vec![0, 1], vec![0, 2], vec![1, 2], vec![0, 1, 2]]);
        assert_eq!(Subsets::new(0).next(), Some(vec![]));
    }
}
