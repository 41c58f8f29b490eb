//! Reproducibility of training, search and projection, and exact
//! prediction agreement after a model-file round trip.

use std::sync::Arc;

use alertclf::corpus::{split_dataset, AlertDocument, SplitSpec};
use alertclf::eval::{evaluate, random_search, LogRange, SearchData, SearchSpace};
use alertclf::features::{feature_vector, RepresentationSelector, ViewSelector};
use alertclf::glove::EmbeddingTable;
use alertclf::model_file;
use alertclf::numerics::Features;
use alertclf::pipeline::{HyperParams, Pipeline};
use alertclf::synth::{generate_corpus, random_embeddings, vocabulary, SynthConfig};
use alertclf::tsne::{project, TsneConfig};

fn data() -> (Vec<AlertDocument>, Vec<AlertDocument>, Arc<EmbeddingTable>) {
    let cfg = SynthConfig {
        num_docs: 240,
        seed: 5,
        ..SynthConfig::default()
    };
    let docs = generate_corpus(&cfg).unwrap();
    let split = split_dataset(&docs, &SplitSpec::new(0.8, 0.1, 0.1, 1)).unwrap();
    let emb = random_embeddings(&vocabulary(&cfg), 8, 2).unwrap();
    (split.train, split.dev, Arc::new(emb))
}

fn small_rnn() -> HyperParams {
    HyperParams {
        hidden_size: 4,
        epochs: 3,
        batch_size: 16,
        learning_rate: 1e-2,
        ..HyperParams::default()
    }
}

fn dense(f: Features) -> Vec<f64> {
    f.to_dense()
}

#[test]
fn training_is_bit_reproducible_and_survives_the_model_file() {
    let (train, dev, emb) = data();
    let hp = small_rnn();
    let dir = tempfile::tempdir().unwrap();
    for rep in RepresentationSelector::ALL {
        for view in ViewSelector::ALL {
            let a = Pipeline::train(&train, &dev, rep, view, &hp, Some(emb.clone()), 11).unwrap();
            let b = Pipeline::train(&train, &dev, rep, view, &hp, Some(emb.clone()), 11).unwrap();
            assert_eq!(model_file::to_bytes(&a, None).unwrap(), model_file::to_bytes(&b, None).unwrap());

            let path = dir.path().join(format!("{rep}_{view}.model"));
            model_file::save(&path, &a, None).unwrap();
            let (mut loaded, meta) = model_file::load(&path).unwrap();
            assert_eq!(meta.seed, 11);
            if loaded.needs_embeddings() {
                loaded.attach_embeddings(a.embeddings().unwrap().clone()).unwrap();
            }
            for d in train.iter().chain(&dev) {
                assert_eq!(a.predict(d).unwrap(), loaded.predict(d).unwrap(), "{rep} {view} {}", d.id);
            }
        }
    }
}

#[test]
fn both_view_is_description_block_then_title_block() {
    let (train, dev, emb) = data();
    let hp = small_rnn();
    for rep in RepresentationSelector::ALL {
        let both = Pipeline::train(&train, &dev, rep, ViewSelector::Both, &hp, Some(emb.clone()), 3).unwrap();
        let fitted = &both.features;
        for d in dev.iter().take(10) {
            let b = dense(feature_vector(d, rep, ViewSelector::Both, fitted).unwrap());
            let desc = dense(feature_vector(d, rep, ViewSelector::Description, fitted).unwrap());
            let title = dense(feature_vector(d, rep, ViewSelector::Title, fitted).unwrap());
            assert_eq!(b.len(), desc.len() + title.len());
            assert_eq!(b[..desc.len()], desc[..]);
            assert_eq!(b[desc.len()..], title[..]);
        }
    }
}

#[test]
fn search_is_reproducible_and_best_model_matches_its_log() {
    let (train, dev, emb) = data();
    let space = SearchSpace {
        lambda: Some(LogRange::new(1e-5, 1e-1)),
        learning_rate: Some(LogRange::new(1e-3, 1e-2)),
        hidden_sizes: Some(vec![2, 4]),
        batch_sizes: Some(vec![16, 32]),
    };
    let data = SearchData {
        train: &train,
        dev: &dev,
        embeddings: Some(emb),
    };
    for rep in RepresentationSelector::ALL {
        let run = |seed| random_search(&space, &small_rnn(), 3, &data, rep, ViewSelector::Both, seed).unwrap();
        let (a, b) = (run(7), run(7));
        assert_eq!(a.log, b.log);
        assert_eq!(a.log.trials.len(), 3);
        let best = &a.log.trials[a.log.selected];
        let again = evaluate(&a.best, &dev).unwrap();
        assert_eq!(again.matrix, best.dev.matrix);
        assert_eq!(again.f1, best.dev.f1);
    }
}

#[test]
fn empty_search_space_and_zero_budget_are_rejected() {
    let (train, dev, _) = data();
    let data = SearchData {
        train: &train,
        dev: &dev,
        embeddings: None,
    };
    let empty = SearchSpace {
        lambda: None,
        learning_rate: None,
        hidden_sizes: None,
        batch_sizes: None,
    };
    let hp = HyperParams::default();
    assert!(random_search(&empty, &hp, 2, &data, RepresentationSelector::Tf, ViewSelector::Title, 0).is_err());
    let space = SearchSpace {
        lambda: Some(LogRange::new(1e-4, 1e-2)),
        ..empty
    };
    assert!(random_search(&space, &hp, 0, &data, RepresentationSelector::Tf, ViewSelector::Title, 0).is_err());
}

#[test]
fn projection_of_document_vectors_is_reproducible() {
    let (train, dev, emb) = data();
    let p = Pipeline::train(&train, &dev, RepresentationSelector::Rnn, ViewSelector::Both, &small_rnn(), Some(emb), 4)
        .unwrap();
    let vectors: Vec<Vec<f64>> = dev.iter().map(|d| p.feature_vector(d).unwrap().to_dense()).collect();
    let cfg = TsneConfig {
        perplexity: 5.0,
        seed: 8,
        ..TsneConfig::default()
    };
    let a = project(&vectors, None, &cfg).unwrap();
    let b = project(&vectors, None, &cfg).unwrap();
    assert_eq!(a.points, b.points);
    assert!(a.kl_final < a.kl_initial);
}
