use std::path::Path;

use dmtl::automata::{consistent_with, AutomataConfig};
use dmtl::oracle::GridOracle;
use dmtl::pipeline::{check_entailment, pre_materialise, FactType, PipelineConfig, Winner};
use dmtl::{parse_dataset, parse_fact, parse_program, rat, FactStore, GroundAtom, Program};

fn fixture(name: &str) -> (Program, FactStore) {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let p = std::fs::read_to_string(dir.join(format!("{name}.dmtl"))).unwrap();
    let d = std::fs::read_to_string(dir.join(format!("{name}.dtf"))).unwrap();
    (parse_program(&p).unwrap(), FactStore::from_facts(parse_dataset(&d).unwrap()))
}

fn ask(name: &str, query: &str, config: &PipelineConfig) -> dmtl::pipeline::EntailmentResult {
    let (p, d) = fixture(name);
    check_entailment(&p, &d, &parse_fact(query).unwrap(), config).unwrap()
}

#[test]
fn immune_is_decided_by_plain_materialisation() {
    let r = ask("immune", "Immune(james)@[7,10]", &PipelineConfig::sequential());
    assert!(r.answer && !r.inconsistent);
    assert_eq!(r.fact_type, FactType::T2);
    assert!(r.rounds <= 2);
    let r = ask("immune", "Immune(james)@[6,10]", &PipelineConfig::sequential());
    assert!(!r.answer);
    assert_eq!(r.fact_type, FactType::T2);
}

#[test]
fn birthday_positive_query_needs_one_round_per_year() {
    let r = ask("birthday", "Bday(t)@[100,100]", &PipelineConfig::sequential());
    assert!(r.answer);
    assert_eq!((r.fact_type, r.winner, r.rounds), (FactType::T4, Winner::Materialisation, 100));
}

#[test]
fn birthday_negative_query_is_answered_by_the_automaton() {
    let r = ask("birthday", "Bday(t)@[0.5,0.5]", &PipelineConfig::sequential());
    assert!(!r.answer);
    assert_eq!((r.fact_type, r.winner), (FactType::T5, Winner::Automata));
    let r = ask("birthday", "Bday(t)@[0.5,0.5]", &PipelineConfig::concurrent());
    assert!(!r.answer);
    assert_eq!(r.winner, Winner::Automata);
}

#[test]
fn concurrent_answers_match_sequential_ones() {
    for q in ["Bday(t)@[3,3]", "Bday(t)@[2.5,2.5]", "Bday(t)@[1,2]", "Bday(u)@[1,1]", "Bday(t)@[0,0]"] {
        let a = ask("birthday", q, &PipelineConfig::sequential());
        let b = ask("birthday", q, &PipelineConfig::concurrent());
        assert_eq!(a.answer, b.answer, "{q}");
    }
}

#[test]
fn pre_materialisation_of_the_professor_program() {
    let (p, _) = fixture("professor");
    let d = FactStore::from_facts(parse_dataset("Lecturer(a)@[0,10]").unwrap());
    let pre = pre_materialise(&p, &d);
    // Independent check: the two non-recursive-head rules on a dense grid.
    let g = GridOracle::new(rat(1), rat(-2), rat(14));
    let facts = parse_dataset("Lecturer(a)@[0,10]").unwrap();
    let rules = Program::new(p.rules[..2].to_vec());
    let model = g.canonical_model(&rules, &facts, 10).unwrap();
    for name in ["AssistantProfessor", "AssociateProfessor"] {
        let atom = GroundAtom::new(name, &["a"]);
        assert_eq!(model.get(&atom), g.model_of_store(&pre).get(&atom), "{name}");
    }
    assert_eq!(pre.intervals(&GroundAtom::new("AssistantProfessor", &["a"]))[0].to_string(), "[3,10]");
    assert_eq!(pre.intervals(&GroundAtom::new("AssociateProfessor", &["a"]))[0].to_string(), "[7,10]");
    assert_eq!(pre_materialise(&p, &pre).intervals(&GroundAtom::new("AssociateProfessor", &["a"])).len(), 1);
}

#[test]
fn professor_queries() {
    let config = PipelineConfig::sequential();
    let r = ask("professor", "AssistantProfessor(a)@[3,10]", &config);
    assert!(r.answer);
    assert_eq!(r.fact_type, FactType::T2);
    let r = ask("professor", "Chair(b)@[4,40]", &config);
    assert!(r.answer);
    assert_eq!(r.fact_type, FactType::T4);
    let r = ask("professor", "Chair(b)@[2,4]", &config);
    assert!(!r.answer);
}

#[test]
fn excheat_and_university() {
    let r = ask("excheat", "ExcHeat(d)@[1,3]", &PipelineConfig::sequential());
    assert!(r.answer);
    let (p, d) = fixture("university");
    let report = consistent_with(&p, &d.facts(), None, &AutomataConfig::default(), None).unwrap();
    assert!(report.consistent);
    let r = ask("university", "Alumnus(sam)@[6,7]", &PipelineConfig::sequential());
    assert!(r.answer && !r.inconsistent);
}
