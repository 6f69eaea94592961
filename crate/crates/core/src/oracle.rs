//! Brute-force pointwise semantics on a dense grid, used as a reference
//! implementation in tests.
//!
//! With `d` the gcd of every number in an instance, the truth of every
//! formula is constant on each point `k·d` and on each open segment between
//! consecutive such points. The oracle therefore samples one time per
//! ruler interval (multiples of `d/2`) and evaluates the pointwise
//! semantics there, quantifying over the finer `d/4` grid. Beyond the
//! sampled range every atom is assumed constant, equal to its value at the
//! nearest edge sample; callers pad the range so this holds.

use std::collections::{BTreeMap, BTreeSet};

use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::intervals::gcd_rationals;
use crate::store::FactStore;
use crate::syntax::{dataset_constants, ground, Fact, GroundAtom, MetricAtom, Program, Substitution};
use crate::{rat, Bound, Interval, Rational};

/// Truth values per sample for every atom and for ⊥.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Model {
    pub atoms: BTreeMap<GroundAtom, Vec<bool>>,
    pub bottom: Vec<bool>,
}

impl Model {
    pub fn get(&self, atom: &GroundAtom) -> Option<&Vec<bool>> {
        self.atoms.get(atom)
    }

    /// Equality ignoring atoms that are false everywhere.
    pub fn same_as(&self, other: &Model) -> bool {
        let live = |m: &Model| -> BTreeMap<GroundAtom, Vec<bool>> {
            m.atoms.iter().filter(|(_, v)| v.iter().any(|&b| b)).map(|(a, v)| (a.clone(), v.clone())).collect()
        };
        self.bottom == other.bottom && live(self) == live(other)
    }

    pub fn is_inconsistent(&self) -> bool {
        self.bottom.iter().any(|&b| b)
    }
}

/// An operator interval in quarter-spacing units; `None` ends are infinite.
#[derive(Clone, Copy)]
struct Fine {
    lo: Option<i64>,
    hi: Option<i64>,
    lo_open: bool,
    hi_open: bool,
}

impl Fine {
    fn contains(&self, k: i64) -> bool {
        let above = match self.lo {
            None => true,
            Some(l) => k > l || (k == l && !self.lo_open),
        };
        let below = match self.hi {
            None => true,
            Some(h) => k < h || (k == h && !self.hi_open),
        };
        above && below
    }

    /// `k + self` going forward, `k - self` going backward.
    fn shifted(&self, k: i64, forward: bool) -> Fine {
        if forward {
            Fine { lo: self.lo.map(|l| k + l), hi: self.hi.map(|h| k + h), ..*self }
        } else {
            Fine {
                lo: self.hi.map(|h| k - h),
                hi: self.lo.map(|l| k - l),
                lo_open: self.hi_open,
                hi_open: self.lo_open,
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct GridOracle {
    d: Rational,
    lo: Rational,
    /// Samples are `0..=2n`.
    n: i64,
}

impl GridOracle {
    /// Grid with spacing `d` covering `[lo, hi]`, both multiples of `d`.
    pub fn new(d: Rational, lo: Rational, hi: Rational) -> Self {
        assert!(d > Rational::zero() && hi >= lo);
        let n = ((hi - &lo) / &d).to_integer().to_i64().expect("grid size");
        GridOracle { d, lo, n }
    }

    /// Grid for an instance: spacing from every number mentioned, range
    /// padded by `(rules + 2)` times the sum of operator bounds.
    pub fn for_instance(program: &Program, facts: &[Fact], literals: &[&MetricAtom]) -> Self {
        let mut numbers: Vec<Rational> = program.operator_endpoints();
        let mut spread = Rational::zero();
        let note_interval = |i: &Interval, numbers: &mut Vec<Rational>, spread: &mut Rational| {
            for b in [i.left(), i.right()] {
                if let Some(v) = b.finite() {
                    numbers.push(v.clone());
                    *spread += v.abs();
                }
            }
        };
        for l in literals {
            for s in l.subformulas() {
                if let Some(i) = s.interval() {
                    note_interval(i, &mut numbers, &mut spread);
                }
            }
        }
        for r in &program.rules {
            for m in std::iter::once(r.head()).chain(r.body().iter()) {
                for s in m.subformulas() {
                    if let Some(i) = s.interval() {
                        let mut scratch = Vec::new();
                        note_interval(i, &mut scratch, &mut spread);
                    }
                }
            }
        }
        let mut endpoints = Vec::new();
        for f in facts {
            for b in [f.interval.left(), f.interval.right()] {
                if let Some(v) = b.finite() {
                    endpoints.push(v.clone());
                }
            }
        }
        let abs: Vec<Rational> = numbers.iter().chain(endpoints.iter()).map(|v| v.abs()).collect();
        let d = gcd_rationals(&abs).unwrap_or_else(|_| rat(1));
        let min = endpoints.iter().min().cloned().unwrap_or_else(Rational::zero);
        let max = endpoints.iter().max().cloned().unwrap_or_else(Rational::zero);
        let pad = (spread + &d) * rat(program.len() as i64 + 2);
        let lo = ((min - &pad) / &d).floor() * &d;
        let hi = ((max + &pad) / &d).ceil() * &d;
        GridOracle::new(d, lo, hi)
    }

    pub fn spacing(&self) -> &Rational {
        &self.d
    }

    pub fn sample_count(&self) -> usize {
        (2 * self.n + 1) as usize
    }

    pub fn sample_time(&self, i: usize) -> Rational {
        &self.lo + &self.d * Rational::new((i as i64).into(), 2.into())
    }

    fn fine_time(&self, j: i64) -> Rational {
        &self.lo + &self.d * Rational::new(j.into(), 4.into())
    }

    /// Sample index representing the fine point `j`, clamped to the range.
    fn sample_of_fine(&self, j: i64) -> usize {
        let s = if j.rem_euclid(4) == 0 { j / 2 } else { 2 * Integer::div_floor(&j, &4) + 1 };
        s.clamp(0, 2 * self.n) as usize
    }

    /// Sample of the open stretch between fine points `j` and `j + 1`,
    /// which always lies inside one segment.
    fn sample_after(&self, j: i64) -> usize {
        (2 * Integer::div_floor(&j, &4) + 1).clamp(0, 2 * self.n) as usize
    }

    /// Fine grid points of a set, with flags for whether it also reaches
    /// beyond the extended range on either side.
    fn fine_points(&self, set: &Interval) -> (Vec<i64>, bool, bool) {
        if set.is_empty() {
            return (Vec::new(), false, false);
        }
        let (jmin, jmax) = (-4, 4 * self.n + 4);
        let quarter = &self.d / rat(4);
        let to_j = |v: &Rational, up: bool| -> i64 {
            let x = (v - &self.lo) / &quarter;
            let r = if up { x.ceil() } else { x.floor() };
            r.to_integer().to_i64().unwrap_or(if up { i64::MAX } else { i64::MIN })
        };
        let lo_j = match set.left() {
            Bound::Finite(v) => to_j(v, true).max(jmin),
            _ => jmin,
        };
        let hi_j = match set.right() {
            Bound::Finite(v) => to_j(v, false).min(jmax),
            _ => jmax,
        };
        let pts = (lo_j..=hi_j).filter(|&j| set.contains(&self.fine_time(j))).collect();
        let before = Interval::new(Bound::NegInf, Bound::Finite(self.fine_time(jmin)), true, true);
        let after = Interval::new(Bound::Finite(self.fine_time(jmax)), Bound::PosInf, true, true);
        (pts, set.meets(&before), set.meets(&after))
    }

    /// `r` in quarter-spacing units, if its finite ends are on that grid.
    fn fine(&self, r: &Interval) -> Option<Fine> {
        let quarter = &self.d / rat(4);
        let units = |b: &Bound| -> Option<Option<i64>> {
            match b.finite() {
                None => Some(None),
                Some(v) => {
                    let x = v / &quarter;
                    x.is_integer().then(|| x.to_integer().to_i64()).flatten().map(Some)
                }
            }
        };
        if r.is_empty() {
            return None;
        }
        Some(Fine { lo: units(r.left())?, hi: units(r.right())?, lo_open: r.left_open(), hi_open: r.right_open() })
    }

    /// Fine points of `set` inside the extended range, with flags for
    /// whether it reaches beyond either side.
    fn fine_range(&self, set: &Fine) -> (std::ops::RangeInclusive<i64>, bool, bool) {
        let (jmin, jmax) = (-4, 4 * self.n + 4);
        let first = set.lo.map_or(jmin, |l| if set.lo_open { l + 1 } else { l }).max(jmin);
        let last = set.hi.map_or(jmax, |h| if set.hi_open { h - 1 } else { h }).min(jmax);
        let nonempty = match (set.lo, set.hi) {
            (Some(l), Some(h)) => l < h || (l == h && !set.lo_open && !set.hi_open),
            _ => true,
        };
        let before = nonempty && set.lo.map_or(true, |l| l < jmin);
        let after = nonempty && set.hi.map_or(true, |h| h > jmax);
        (if nonempty { first..=last } else { 1..=0 }, before, after)
    }

    /// Samples whose ruler intervals meet the shifted set, integer version
    /// of [`Self::reached`].
    fn reached_fine(&self, i: usize, r: &Fine, forward: bool) -> impl Iterator<Item = usize> + '_ {
        let (range, before, after) = self.fine_range(&r.shifted(2 * i as i64, forward));
        let edge = 2 * self.n as usize;
        range.map(move |j| self.sample_of_fine(j)).chain(before.then_some(0)).chain(after.then_some(edge))
    }

    fn shifted(&self, t: &Rational, r: &Interval, forward: bool) -> Interval {
        let shift = |b: &Bound| match b {
            Bound::Finite(v) => Bound::Finite(if forward { t + v } else { t - v }),
            Bound::NegInf => {
                if forward {
                    Bound::NegInf
                } else {
                    Bound::PosInf
                }
            }
            Bound::PosInf => {
                if forward {
                    Bound::PosInf
                } else {
                    Bound::NegInf
                }
            }
        };
        if forward {
            Interval::new(shift(r.left()), shift(r.right()), r.left_open(), r.right_open())
        } else {
            Interval::new(shift(r.right()), shift(r.left()), r.right_open(), r.left_open())
        }
    }

    /// Samples whose ruler intervals meet `t + r` (`forward`) or `t - r`.
    fn reached(&self, t: &Rational, r: &Interval, forward: bool) -> Vec<usize> {
        let (pts, before, after) = self.fine_points(&self.shifted(t, r, forward));
        let mut out: BTreeSet<usize> = pts.into_iter().map(|j| self.sample_of_fine(j)).collect();
        if before {
            out.insert(0);
        }
        if after {
            out.insert(2 * self.n as usize);
        }
        out.into_iter().collect()
    }

    pub fn model_of_store(&self, store: &FactStore) -> Model {
        let mut atoms = BTreeMap::new();
        for (a, list) in store.atoms() {
            atoms.insert(a.clone(), self.list_to_samples(list));
        }
        Model { atoms, bottom: self.list_to_samples(store.bottom_intervals()) }
    }

    pub fn model_of_facts(&self, facts: &[Fact]) -> Model {
        let mut m = self.empty_model();
        for f in facts {
            let v = m.atoms.entry(f.atom.clone()).or_insert_with(|| vec![false; self.sample_count()]);
            self.fill(v, &f.interval);
        }
        m
    }

    pub fn empty_model(&self) -> Model {
        Model { atoms: BTreeMap::new(), bottom: vec![false; self.sample_count()] }
    }

    pub fn list_to_samples(&self, list: &[Interval]) -> Vec<bool> {
        let mut v = vec![false; self.sample_count()];
        for x in list {
            self.fill(&mut v, x);
        }
        v
    }

    /// Sets the samples lying in `x`.
    fn fill(&self, v: &mut [bool], x: &Interval) {
        if x.is_empty() {
            return;
        }
        let half = &self.d / rat(2);
        let last = 2 * self.n;
        let first = match x.left().finite() {
            None => 0,
            Some(l) => {
                let k = (l - &self.lo) / &half;
                let c = k.ceil();
                let c = if x.left_open() && c == k { c + rat(1) } else { c };
                c.to_integer().to_i64().unwrap_or(i64::MAX).max(0)
            }
        };
        let end = match x.right().finite() {
            None => last,
            Some(r) => {
                let k = (r - &self.lo) / &half;
                let f = k.floor();
                let f = if x.right_open() && f == k { f - rat(1) } else { f };
                f.to_integer().to_i64().unwrap_or(i64::MIN).min(last)
            }
        };
        for i in first..=end {
            v[i as usize] = true;
        }
    }

    /// Pointwise truth of a ground formula at every sample.
    pub fn eval(&self, formula: &MetricAtom, model: &Model) -> Vec<bool> {
        let n = self.sample_count();
        match formula {
            MetricAtom::Top => vec![true; n],
            MetricAtom::Bottom => model.bottom.clone(),
            MetricAtom::Rel(a) => {
                let g = a.ground(&Substitution::new()).expect("ground formula");
                model.atoms.get(&g).cloned().unwrap_or_else(|| vec![false; n])
            }
            MetricAtom::DiamondMinus(r, m) | MetricAtom::DiamondPlus(r, m) => {
                let inner = self.eval(m, model);
                let forward = matches!(formula, MetricAtom::DiamondPlus(..));
                match self.fine(r) {
                    Some(f) => (0..n).map(|i| self.reached_fine(i, &f, forward).any(|s| inner[s])).collect(),
                    None => (0..n)
                        .map(|i| self.reached(&self.sample_time(i), r, forward).iter().any(|&s| inner[s]))
                        .collect(),
                }
            }
            MetricAtom::BoxMinus(r, m) | MetricAtom::BoxPlus(r, m) => {
                let inner = self.eval(m, model);
                let forward = matches!(formula, MetricAtom::BoxPlus(..));
                match self.fine(r) {
                    Some(f) => (0..n).map(|i| self.reached_fine(i, &f, forward).all(|s| inner[s])).collect(),
                    None => (0..n)
                        .map(|i| self.reached(&self.sample_time(i), r, forward).iter().all(|&s| inner[s]))
                        .collect(),
                }
            }
            MetricAtom::Since(r, a, b) | MetricAtom::Until(r, a, b) => {
                let held = self.eval(a, model);
                let goal = self.eval(b, model);
                let forward = matches!(formula, MetricAtom::Until(..));
                let f = self.fine(r);
                (0..n).map(|i| self.since_until_at(i, r, f.as_ref(), &held, &goal, forward)).collect()
            }
        }
    }

    /// Walks witnesses away from sample `i`, tracking whether the held
    /// formula covers the open stretch between witness and `i`.
    fn since_until_at(
        &self,
        i: usize,
        r: &Interval,
        fine: Option<&Fine>,
        held: &[bool],
        goal: &[bool],
        forward: bool,
    ) -> bool {
        let t = self.sample_time(i);
        let start = 2 * i as i64;
        let step: i64 = if forward { 1 } else { -1 };
        let (jmin, jmax) = (-4, 4 * self.n + 4);
        let mut covered = true;
        let mut j = start;
        loop {
            if covered && goal[self.sample_of_fine(j)] {
                let within = match fine {
                    Some(f) => f.contains((j - start).abs()),
                    None => {
                        let s = self.fine_time(j);
                        r.contains(&if forward { &s - &t } else { &t - &s })
                    }
                };
                if within {
                    return true;
                }
            }
            let next = j + step;
            if next < jmin || next > jmax {
                break;
            }
            if j != start {
                covered &= held[self.sample_of_fine(j)];
            }
            let between = if forward { self.sample_after(j) } else { self.sample_after(next) };
            covered &= held[between];
            if !covered {
                return false;
            }
            j = next;
        }
        // Beyond the range: witnesses in the constant tail.
        let edge = if forward { 2 * self.n as usize } else { 0 };
        let tail = if forward {
            Interval::new(Bound::Finite(&self.fine_time(jmax) - &t), Bound::PosInf, true, true)
        } else {
            Interval::new(Bound::Finite(&t - &self.fine_time(jmin)), Bound::PosInf, true, true)
        };
        covered && held[edge] && goal[edge] && r.meets(&tail)
    }

    fn mark_head(&self, head: &MetricAtom, t: &Rational, model: &mut Model) -> bool {
        match head {
            MetricAtom::Rel(a) => {
                let g = a.ground(&Substitution::new()).expect("ground head");
                let idx = self.sample_at(t);
                let v = model.atoms.entry(g).or_insert_with(|| vec![false; 2 * self.n as usize + 1]);
                let changed = !v[idx];
                v[idx] = true;
                changed
            }
            MetricAtom::Bottom => {
                let idx = self.sample_at(t);
                let changed = !model.bottom[idx];
                model.bottom[idx] = true;
                changed
            }
            MetricAtom::BoxMinus(r, m) | MetricAtom::BoxPlus(r, m) => {
                let forward = matches!(head, MetricAtom::BoxPlus(..));
                let (pts, before, after) = self.fine_points(&self.shifted(t, r, forward));
                let mut changed = false;
                for j in pts {
                    changed |= self.mark_head(m, &self.fine_time(j), model);
                }
                if before {
                    changed |= self.mark_head(m, &self.fine_time(-4), model);
                }
                if after {
                    changed |= self.mark_head(m, &self.fine_time(4 * self.n + 4), model);
                }
                changed
            }
            other => panic!("not a head: {other}"),
        }
    }

    /// [`Self::mark_head`] at fine point `j`, staying in integers while the
    /// box intervals allow it.
    fn mark_head_fine(&self, head: &MetricAtom, j: i64, model: &mut Model) -> bool {
        match head {
            MetricAtom::Rel(_) | MetricAtom::Bottom => {
                let idx = self.sample_of_fine(j);
                let v = match head {
                    MetricAtom::Rel(a) => {
                        let g = a.ground(&Substitution::new()).expect("ground head");
                        model.atoms.entry(g).or_insert_with(|| vec![false; 2 * self.n as usize + 1])
                    }
                    _ => &mut model.bottom,
                };
                let changed = !v[idx];
                v[idx] = true;
                changed
            }
            MetricAtom::BoxMinus(r, m) | MetricAtom::BoxPlus(r, m) => {
                let Some(f) = self.fine(r) else {
                    return self.mark_head(head, &self.fine_time(j), model);
                };
                let (range, before, after) = self.fine_range(&f.shifted(j, matches!(head, MetricAtom::BoxPlus(..))));
                let mut changed = false;
                for k in range.chain(before.then_some(-4)).chain(after.then_some(4 * self.n + 4)) {
                    changed |= self.mark_head_fine(m, k, model);
                }
                changed
            }
            other => panic!("not a head: {other}"),
        }
    }

    fn sample_at(&self, t: &Rational) -> usize {
        let j = ((t - &self.lo) / (&self.d / rat(4))).floor().to_integer().to_i64().expect("in range");
        self.sample_of_fine(j)
    }

    /// One application of the ground rules: the model extended with every
    /// head the rules force.
    pub fn one_step(&self, rules: &[crate::syntax::Rule], model: &Model) -> Model {
        let mut next = model.clone();
        for r in rules {
            let mut body = vec![true; self.sample_count()];
            for b in r.body() {
                for (x, y) in body.iter_mut().zip(self.eval(b, model)) {
                    *x &= y;
                }
            }
            for (i, &holds) in body.iter().enumerate() {
                if holds {
                    self.mark_head_fine(r.head(), 2 * i as i64, &mut next);
                }
            }
        }
        next
    }

    /// Least model of the program over the facts, iterating at most
    /// `max_steps` times; `None` if no fixpoint was reached.
    pub fn canonical_model(&self, program: &Program, facts: &[Fact], max_steps: usize) -> Option<Model> {
        let mut constants = dataset_constants(facts);
        constants.extend(program.constants());
        let rules = ground(program, &constants);
        let mut model = self.model_of_facts(facts);
        for _ in 0..max_steps {
            let next = self.one_step(&rules, &model);
            if next.same_as(&model) {
                return Some(next);
            }
            model = next;
        }
        None
    }

    /// Restricts a model's sample vectors to samples `[from, to]`.
    pub fn window(&self, v: &[bool], from: usize, to: usize) -> Vec<bool> {
        v[from..=to.min(v.len() - 1)].to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse_dataset, parse_metric_atom, parse_program};

    #[test]
    fn oracle_matches_worked_examples() {
        let facts = parse_dataset("Q(a)@[0,5]\nR(a)@[4,4]").unwrap();
        let f = parse_metric_atom("Q(a) UNTIL[0,2] R(a)").unwrap();
        let g = GridOracle::for_instance(&Program::default(), &facts, &[&f]);
        let m = g.model_of_facts(&facts);
        let expect: Interval = "[2,4]".parse().unwrap();
        assert_eq!(g.eval(&f, &m), g.list_to_samples(&[expect]));
    }

    #[test]
    fn oracle_canonical_model_immune() {
        let p = parse_program("Immune(X) :- BOXMINUS[0,7] NoSympt(X) .").unwrap();
        let facts = parse_dataset("NoSympt(james)@[0,14]").unwrap();
        let g = GridOracle::for_instance(&p, &facts, &[]);
        let m = g.canonical_model(&p, &facts, 10).unwrap();
        let immune = &m.atoms[&GroundAtom::new("Immune", &["james"])];
        assert_eq!(immune, &g.list_to_samples(&["[7,14]".parse().unwrap()]));
    }

    #[test]
    fn oracle_box_heads() {
        let p = parse_program("BOXMINUS[0,1] ExcHeat(X) :- BOXMINUS[0,1] Temp24(X), DIAMONDMINUS[0,1] Temp41(X) .")
            .unwrap();
        let facts = parse_dataset("Temp24(d)@[0,3]\nTemp41(d)@[2,2]").unwrap();
        let g = GridOracle::for_instance(&p, &facts, &[]);
        let m = g.canonical_model(&p, &facts, 10).unwrap();
        let e = &m.atoms[&GroundAtom::new("ExcHeat", &["d"])];
        assert_eq!(e, &g.list_to_samples(&["[1,3]".parse().unwrap()]));
    }
}
