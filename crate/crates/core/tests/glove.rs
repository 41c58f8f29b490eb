//! Word-vector training on a toy corpus.

use alertclf::corpus::TokenSeq;
use alertclf::glove::{build_cooccurrence, train_glove, EmbeddingTable, GloveConfig};
use alertclf::numerics::{seeded_rng, Rng};
use rand::seq::SliceRandom;
use rand::Rng as _;

const SUBJECTS: [&str; 5] = ["officials", "doctors", "residents", "farmers", "nurses"];
const VERBS: [&str; 4] = ["report", "confirm", "fear", "track"];
const OBJECTS: [&str; 6] = ["ebola", "cholera", "measles", "flooding", "cases", "deaths"];
const PLACES: [&str; 4] = ["liberia", "haiti", "kenya", "peru"];

fn sentences(n: usize, rng: &mut Rng) -> Vec<TokenSeq> {
    (0..n)
        .map(|_| {
            let mut s = vec![
                SUBJECTS[rng.random_range(0..SUBJECTS.len())],
                VERBS[rng.random_range(0..VERBS.len())],
                OBJECTS[rng.random_range(0..OBJECTS.len())],
            ];
            if rng.random_bool(0.6) {
                s.push("in");
                s.push(PLACES[rng.random_range(0..PLACES.len())]);
            }
            s.into_iter().collect()
        })
        .collect()
}

fn config() -> GloveConfig {
    GloveConfig {
        dim: 10,
        epochs: 25,
        x_max: 10.0,
        ..GloveConfig::default()
    }
}

#[test]
fn objective_falls_on_200_sentences() {
    let docs = sentences(200, &mut seeded_rng(1));
    let table = build_cooccurrence(&docs, 5).unwrap();
    let run = train_glove(&table, &config(), &mut seeded_rng(2)).unwrap();
    let trace = &run.objective_trace;
    assert_eq!(trace.len(), config().epochs + 1);
    assert!(trace.last().unwrap() < &trace[0]);
    assert!(trace.iter().all(|v| v.is_finite()));
}

#[test]
fn training_is_bit_reproducible() {
    let docs = sentences(200, &mut seeded_rng(3));
    let table = build_cooccurrence(&docs, 5).unwrap();
    let a = train_glove(&table, &config(), &mut seeded_rng(4)).unwrap();
    let b = train_glove(&table, &config(), &mut seeded_rng(4)).unwrap();
    assert_eq!(a.objective_trace, b.objective_trace);
    assert_eq!(a.table.checksum(), b.table.checksum());
}

#[test]
fn cooccurrence_ignores_document_order() {
    let mut rng = seeded_rng(5);
    let docs = sentences(60, &mut rng);
    let table = build_cooccurrence(&docs, 4).unwrap();
    let mut shuffled = docs.clone();
    shuffled.shuffle(&mut rng);
    let other = build_cooccurrence(&shuffled, 4).unwrap();
    for a in table.words() {
        for b in table.words() {
            assert_eq!(table.get(a, b), other.get(a, b));
        }
    }
    assert_eq!(table.entries().len(), other.entries().len());
}

#[test]
fn embedding_file_round_trip() {
    let docs = sentences(50, &mut seeded_rng(6));
    let table = build_cooccurrence(&docs, 3).unwrap();
    let run = train_glove(&table, &config(), &mut seeded_rng(7)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("vectors.txt");
    run.table.write_text(&path).unwrap();
    let back = EmbeddingTable::read_text(&path).unwrap();
    assert_eq!(back.checksum(), run.table.checksum());
    assert_eq!(back.vector("ebola"), run.table.vector("ebola"));
    assert_eq!(back.vector("never-seen"), run.table.unk_vector());
}

#[test]
fn bad_windows_are_rejected() {
    let docs = sentences(5, &mut seeded_rng(8));
    assert!(build_cooccurrence(&docs, 0).is_err());
    assert!(build_cooccurrence(&docs, 41).is_err());
}
