/*!
A reasoner for DatalogMTL, Datalog extended with metric temporal operators
over the rational timeline.

Fact entailment is decided by combining forward-chaining materialisation
over coalesced interval stores with an automata-based consistency check
that covers the cases materialisation alone cannot finish.

```
use dmtl::{parse_program, parse_dataset, parse_fact, FactStore};
use dmtl::pipeline::{check_entailment, PipelineConfig};

let program = parse_program("Immune(X) :- BOXMINUS[0,7] NoSympt(X) .").unwrap();
let store = FactStore::from_facts(parse_dataset("NoSympt(james)@[0,14]").unwrap());
let query = parse_fact("Immune(james)@[7,10]").unwrap();
let result = check_entailment(&program, &store, &query, &PipelineConfig::sequential()).unwrap();
assert!(result.answer);
```
*/

pub mod analysis;
pub mod automata;
pub mod bench;
pub mod error;
pub mod evaluation;
pub mod intervals;
pub mod materialisation;
pub mod oracle;
pub mod pipeline;
pub mod store;
pub mod syntax;

pub use error::{Error, Result};
pub use store::FactStore;
pub use syntax::{
    parse_dataset, parse_fact, parse_metric_atom, parse_program, Fact, GroundAtom, MetricAtom, Program, RelationalAtom,
    Rule, Symbol, Term,
};

/// Exact time value used throughout the reasoner.
pub type Rational = num_rational::BigRational;

/// Interval endpoint over [`Rational`].
pub type Bound = intervals::Bound<Rational>;

/// Interval over [`Rational`].
pub type Interval = intervals::Interval<Rational>;

/// Integer `n` as a [`Rational`].
pub fn rat(n: i64) -> Rational {
    Rational::from_integer(n.into())
}
