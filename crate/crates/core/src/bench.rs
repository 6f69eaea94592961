//! Synthetic datasets and queries, the fact-type census and a timing harness.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::intervals::gcd_rationals;
use crate::pipeline::{check_entailment, FactType, PipelineConfig};
use crate::store::FactStore;
use crate::syntax::{Fact, GroundAtom, Program, Symbol};
use crate::{Bound, Error, Interval, Rational, Result};

mod text {
    use std::fmt::Display;
    use std::str::FromStr;

    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<T: Display, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(v)
    }

    pub fn deserialize<'de, T, D>(d: D) -> Result<T, D::Error>
    where
        T: FromStr,
        T::Err: Display,
        D: Deserializer<'de>,
    {
        String::deserialize(d)?.parse().map_err(de::Error::custom)
    }
}

mod rational_text {
    use serde::{de, Deserialize, Deserializer, Serializer};

    use crate::Rational;

    pub fn serialize<S: Serializer>(v: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(v)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        crate::intervals::parse_rational(&String::deserialize(d)?).map_err(de::Error::custom)
    }
}

/// Parameters of a synthetic dataset. Intervals and rationals are written
/// as strings in JSON, e.g. `"[0,100]"` and `"1/2"`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct GeneratorSpec {
    /// `(name, arity)` pairs.
    pub predicates: Vec<(String, usize)>,
    pub constant_pool: usize,
    pub fact_count: usize,
    #[serde(with = "text")]
    pub endpoint_range: Interval,
    #[serde(with = "rational_text")]
    pub max_interval_length: Rational,
    #[serde(with = "rational_text")]
    pub granularity: Rational,
    pub seed: u64,
}

impl GeneratorSpec {
    /// Multiples of the granularity inside the endpoint range, as an
    /// inclusive range of factors.
    fn steps(&self) -> Result<(i64, i64)> {
        let bad = |why: &str| Error::Generator(why.to_string());
        if self.fact_count == 0 {
            return Err(bad("factCount must be at least 1"));
        }
        if self.predicates.is_empty() {
            return Err(bad("no predicates"));
        }
        if self.constant_pool == 0 && self.predicates.iter().any(|(_, a)| *a > 0) {
            return Err(bad("constantPool must be positive"));
        }
        if self.granularity <= Rational::zero() {
            return Err(bad("granularity must be positive"));
        }
        if self.max_interval_length < Rational::zero() {
            return Err(bad("maxIntervalLength must be non-negative"));
        }
        let r = &self.endpoint_range;
        let (Bound::Finite(lo), Bound::Finite(hi)) = (r.left(), r.right()) else {
            return Err(bad("endpointRange must be bounded"));
        };
        let g = &self.granularity;
        let mut first = (lo / g).ceil().to_integer();
        let mut last = (hi / g).floor().to_integer();
        if r.left_open() && Rational::from_integer(first.clone()) * g == *lo {
            first += 1;
        }
        if r.right_open() && Rational::from_integer(last.clone()) * g == *hi {
            last -= 1;
        }
        let (Some(first), Some(last)) = (first.to_i64(), last.to_i64()) else {
            return Err(bad("endpointRange too wide for its granularity"));
        };
        if first > last {
            return Err(bad("no multiple of the granularity inside endpointRange"));
        }
        Ok((first, last))
    }
}

fn random_interval(rng: &mut ChaCha8Rng, g: &Rational, first: i64, last: i64, max_steps: i64) -> Interval {
    let k = rng.gen_range(first..=last);
    let j = rng.gen_range(0..=max_steps.min(last - k));
    let at = |n: i64| Bound::Finite(Rational::from_integer(n.into()) * g);
    if j == 0 {
        return Interval::new(at(k), at(k), false, false);
    }
    Interval::new(at(k), at(k + j), rng.gen_bool(0.25), rng.gen_bool(0.25))
}

/// Facts with uniformly drawn predicates, constants and intervals; equal
/// specifications give equal output.
pub fn generate_dataset(spec: &GeneratorSpec) -> Result<Vec<Fact>> {
    let (first, last) = spec.steps()?;
    let max_steps = (&spec.max_interval_length / &spec.granularity).floor().to_integer().to_i64().unwrap_or(i64::MAX);
    let constants: Vec<String> = (0..spec.constant_pool).map(|i| format!("c{i}")).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut facts = Vec::with_capacity(spec.fact_count);
    for _ in 0..spec.fact_count {
        let (name, arity) = spec.predicates.choose(&mut rng).expect("non-empty");
        let args: Vec<&str> = (0..*arity).map(|_| constants.choose(&mut rng).expect("non-empty").as_str()).collect();
        let interval = random_interval(&mut rng, &spec.granularity, first, last, max_steps);
        facts.push(Fact::new(GroundAtom::new(name, &args), interval));
    }
    Ok(facts)
}

/// One fact per line in the dataset format.
pub fn write_dataset(facts: &[Fact]) -> String {
    let mut out = String::new();
    for f in facts {
        writeln!(out, "{f}").expect("write to string");
    }
    out
}

/// Query facts over the predicates and constants of `dataset`, with
/// intervals inside the range its endpoints span. Half of the atoms are
/// copied from the dataset, the rest get fresh argument tuples.
pub fn generate_queries(_program: &Program, dataset: &[Fact], count: usize, seed: u64) -> Result<Vec<Fact>> {
    if dataset.is_empty() {
        return Err(Error::Generator("cannot sample queries from an empty dataset".into()));
    }
    let finite: Vec<Rational> = dataset
        .iter()
        .flat_map(|f| [f.interval.left(), f.interval.right()])
        .filter_map(|b| b.finite().cloned())
        .collect();
    let nonzero: Vec<Rational> = finite.iter().filter(|v| !v.is_zero()).cloned().collect();
    let g = if nonzero.is_empty() { Rational::from_integer(1.into()) } else { gcd_rationals(&nonzero)? };
    let (first, last) = match (finite.iter().min(), finite.iter().max()) {
        (Some(lo), Some(hi)) => (lo / &g).to_integer().to_i64().zip((hi / &g).to_integer().to_i64()),
        _ => Some((0, 0)),
    }
    .ok_or_else(|| Error::Generator("dataset range too wide".into()))?;
    let atoms: Vec<&GroundAtom> = dataset.iter().map(|f| &f.atom).collect::<BTreeSet<_>>().into_iter().collect();
    let constants: Vec<Symbol> =
        atoms.iter().flat_map(|a| a.args.iter().cloned()).collect::<BTreeSet<_>>().into_iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let span = last - first;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let template = *atoms.choose(&mut rng).expect("non-empty");
        let atom = if rng.gen_bool(0.5) {
            template.clone()
        } else {
            let args: Vec<&str> =
                template.args.iter().map(|_| constants.choose(&mut rng).expect("non-empty").as_str()).collect();
            GroundAtom::new(template.predicate.as_str(), &args)
        };
        out.push(Fact::new(atom, random_interval(&mut rng, &g, first, last, Integer::div_ceil(&span, &4))));
    }
    Ok(out)
}

/// Number of queries per fact type.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Census {
    pub counts: BTreeMap<FactType, usize>,
    pub total: usize,
}

impl Census {
    pub fn add(&mut self, t: FactType) {
        *self.counts.entry(t).or_default() += 1;
        self.total += 1;
    }

    pub fn count(&self, t: FactType) -> usize {
        self.counts.get(&t).copied().unwrap_or(0)
    }

    /// Share of each type in percent; all five types are present.
    pub fn percentages(&self) -> BTreeMap<FactType, f64> {
        FactType::ALL
            .iter()
            .map(|&t| {
                let p = if self.total == 0 { 0.0 } else { 100.0 * self.count(t) as f64 / self.total as f64 };
                (t, p)
            })
            .collect()
    }
}

/// Classifies every query with the pipeline in sequential mode.
pub fn census(program: &Program, store: &FactStore, queries: &[Fact]) -> Result<Census> {
    let config = PipelineConfig::sequential();
    let mut c = Census::default();
    for q in queries {
        c.add(check_entailment(program, store, q, &config)?.fact_type);
    }
    Ok(c)
}

fn seconds<S: serde::Serializer>(d: &Duration, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64())
}

/// Timings of one query: total time, coalescing time `c`, rounds `n` and
/// pre-materialisation time `p`.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BenchRow {
    pub query: String,
    pub answer: bool,
    pub fact_type: FactType,
    #[serde(serialize_with = "seconds")]
    pub total: Duration,
    #[serde(serialize_with = "seconds")]
    pub coalescing: Duration,
    pub rounds: usize,
    #[serde(serialize_with = "seconds")]
    pub pre_materialisation: Duration,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BenchReport {
    pub facts: usize,
    pub rules: usize,
    pub rows: Vec<BenchRow>,
    pub census: Census,
    pub percentages: BTreeMap<FactType, f64>,
    #[serde(serialize_with = "seconds")]
    pub total: Duration,
}

impl BenchReport {
    /// Plain-text table, one row per query followed by the census.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let w = self.rows.iter().map(|r| r.query.len()).max().unwrap_or(5).max(5);
        writeln!(
            out,
            "{:<w$}  {:>6}  {:>4}  {:>10}  {:>10}  {:>6}  {:>10}",
            "query", "answer", "type", "total(s)", "c(s)", "n", "p(s)"
        )
        .unwrap();
        for r in &self.rows {
            writeln!(
                out,
                "{:<w$}  {:>6}  {:>4}  {:>10.4}  {:>10.4}  {:>6}  {:>10.4}",
                r.query,
                r.answer,
                r.fact_type,
                r.total.as_secs_f64(),
                r.coalescing.as_secs_f64(),
                r.rounds,
                r.pre_materialisation.as_secs_f64()
            )
            .unwrap();
        }
        let shares: Vec<String> = self.percentages.iter().map(|(t, p)| format!("{t} {p:.1}%")).collect();
        writeln!(
            out,
            "{} queries, {} facts, {} rules: {}",
            self.census.total,
            self.facts,
            self.rules,
            shares.join(", ")
        )
        .unwrap();
        out
    }
}

/// Runs every query through the pipeline and collects per-query timings.
pub fn run_bench(
    program: &Program,
    store: &FactStore,
    queries: &[Fact],
    config: &PipelineConfig,
) -> Result<BenchReport> {
    let start = Instant::now();
    let mut rows = Vec::with_capacity(queries.len());
    let mut census = Census::default();
    for q in queries {
        let r = check_entailment(program, store, q, config)?;
        census.add(r.fact_type);
        rows.push(BenchRow {
            query: q.to_string(),
            answer: r.answer,
            fact_type: r.fact_type,
            total: r.timings.total,
            coalescing: r.timings.coalescing,
            rounds: r.rounds,
            pre_materialisation: r.timings.pre_materialisation,
        });
    }
    let percentages = census.percentages();
    Ok(BenchReport {
        facts: store.interval_count(),
        rules: program.len(),
        rows,
        census,
        percentages,
        total: start.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse_dataset, parse_program};

    fn spec(count: usize, seed: u64) -> GeneratorSpec {
        GeneratorSpec {
            predicates: vec![("P".into(), 1), ("Q".into(), 2), ("R".into(), 0)],
            constant_pool: 5,
            fact_count: count,
            endpoint_range: "[0,100]".parse().unwrap(),
            max_interval_length: Rational::from_integer(5.into()),
            granularity: Rational::new(1.into(), 2.into()),
            seed,
        }
    }

    #[test]
    fn generated_facts_respect_the_spec() {
        let s = spec(1000, 7);
        let facts = generate_dataset(&s).unwrap();
        assert_eq!(write_dataset(&facts).lines().count(), 1000);
        let range = Interval::closed(Rational::zero(), Rational::from_integer(100.into()));
        for f in &facts {
            assert!(f.interval.is_subset_of(&range));
            let (Bound::Finite(a), Bound::Finite(b)) = (f.interval.left(), f.interval.right()) else { panic!() };
            assert!(b - a <= s.max_interval_length);
            assert!((a / &s.granularity).is_integer() && (b / &s.granularity).is_integer());
        }
        assert_eq!(write_dataset(&generate_dataset(&s).unwrap()), write_dataset(&facts));
        assert_ne!(write_dataset(&generate_dataset(&spec(1000, 8)).unwrap()), write_dataset(&facts));
    }

    #[test]
    fn bad_specs_are_rejected() {
        let mut s = spec(0, 1);
        assert!(generate_dataset(&s).is_err());
        s.fact_count = 1;
        s.endpoint_range = "(0,1/2)".parse().unwrap();
        assert!(generate_dataset(&s).is_err());
        s.endpoint_range = "[0,+inf)".parse().unwrap();
        assert!(generate_dataset(&s).is_err());
    }

    #[test]
    fn spec_json_shape() {
        let json = r#"{"predicates":[["P",1]],"constantPool":3,"factCount":2,"endpointRange":"[0,10]",
            "maxIntervalLength":"2.5","granularity":"1/2","seed":9}"#;
        let s: GeneratorSpec = serde_json::from_str(json).unwrap();
        assert_eq!(s.granularity, Rational::new(1.into(), 2.into()));
        let back: GeneratorSpec = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn queries_come_from_the_dataset_signature() {
        let d = parse_dataset("P(a)@[0,4]\nQ(a,b)@[1,2]").unwrap();
        let qs = generate_queries(&Program::default(), &d, 10, 3).unwrap();
        assert_eq!(qs.len(), 10);
        assert!(qs.iter().all(|q| ["P", "Q"].contains(&q.atom.predicate.as_str())));
        assert!(qs.iter().all(|q| q.interval.is_subset_of(&"[0,4]".parse().unwrap())));
        assert_eq!(qs, generate_queries(&Program::default(), &d, 10, 3).unwrap());
        assert!(generate_queries(&Program::default(), &[], 1, 0).is_err());
    }

    #[test]
    fn census_of_subsumed_queries() {
        let d = parse_dataset("P(a)@[0,4]").unwrap();
        let store = FactStore::from_facts(d.clone());
        let q = parse_dataset("P(a)@[1,2]\nP(a)@[0,4]").unwrap();
        let c = census(&parse_program("Q(X) :- P(X) .").unwrap(), &store, &q).unwrap();
        assert_eq!(c.count(FactType::T1), 2);
        assert_eq!(c.percentages()[&FactType::T1], 100.0);
        let sum: f64 = c.percentages().values().sum();
        assert!((sum - 100.0).abs() < 1e-9);
    }
}
