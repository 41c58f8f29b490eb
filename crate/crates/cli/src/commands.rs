use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use alertclf::corpus::{
    corpus_stats, load_corpus, read_corpus_lenient, split_dataset, tokenize, write_corpus, AlertDocument,
    CorpusStats, Label, SplitSpec, TokenSeq,
};
use alertclf::eval::{evaluate, random_search, results_table, EvalReport, LogRange, SearchData, SearchSpace};
use alertclf::features::{all_configurations, RepresentationSelector, TextField, ViewSelector};
use alertclf::glove::{build_cooccurrence, train_glove, EmbeddingTable, GloveConfig};
use alertclf::model_file;
use alertclf::numerics::seeded_rng;
use alertclf::pipeline::{tfidf_classifier_sweep, HyperParams, Pipeline};
use alertclf::synth::{generate_corpus, SynthConfig};
use alertclf::tsne::{project, render_svg, write_points_csv, TsneConfig};

use crate::*;

pub fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Ingest(a) => ingest(&a),
        Command::Stats(a) => stats(&a),
        Command::Split(a) => split(&a),
        Command::Synth(a) => synth(&a),
        Command::Glove(a) => glove(&a),
        Command::Train(a) => train(&a),
        Command::Evaluate(a) => evaluate_cmd(&a),
        Command::Predict(a) => predict(&a),
        Command::Search(a) => search(&a),
        Command::Project(a) => project_cmd(&a),
        Command::Sweep(a) => sweep(&a),
        Command::Baselines(a) => baselines(&a),
    }
}

fn io_err(path: &Path, e: io::Error) -> CliError {
    CliError::Core(alertclf::Error::io(path, e))
}

/// `model.bin` + `dev.json` → `model.bin.dev.json`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".");
    name.push(suffix);
    path.with_file_name(name)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(alertclf::Error::from)?;
    fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| io_err(path, e))
}

fn load_embeddings(path: &Path) -> CliResult<Arc<EmbeddingTable>> {
    Ok(Arc::new(EmbeddingTable::read_text(path)?))
}

fn absolute(path: &Path) -> String {
    std::path::absolute(path)
        .unwrap_or_else(|_| path.to_path_buf())
        .to_string_lossy()
        .into_owned()
}

fn hyperparams(h: &HyperArgs) -> HyperParams {
    let mut hp = HyperParams::default();
    if let Some(v) = h.hidden_size {
        hp.hidden_size = v;
    }
    if let Some(v) = h.lambda {
        hp.lambda = v;
    }
    if let Some(v) = h.epochs {
        hp.epochs = v;
    }
    if let Some(v) = h.batch_size {
        hp.batch_size = v;
    }
    if let Some(v) = h.learning_rate {
        hp.learning_rate = v;
    }
    if let Some(v) = h.patience {
        hp.patience = v;
    }
    if let Some(v) = h.dropout {
        hp.input_dropout = v;
    }
    hp.fine_tune_embeddings = h.fine_tune;
    hp
}

fn rnn_embeddings(rep: RepresentationSelector, h: &HyperArgs) -> CliResult<Option<Arc<EmbeddingTable>>> {
    if rep != RepresentationSelector::Rnn {
        return Ok(None);
    }
    let path = h
        .embeddings
        .as_ref()
        .ok_or_else(|| CliError::Usage("--embeddings is required for --rep rnn".into()))?;
    Ok(Some(load_embeddings(path)?))
}

struct Data {
    train: Vec<AlertDocument>,
    dev: Vec<AlertDocument>,
    /// Present when the corpus was split here.
    test: Option<Vec<AlertDocument>>,
}

fn load_data(a: &DataArgs) -> CliResult<Data> {
    let docs = load_corpus(&a.corpus)?;
    if docs.is_empty() {
        return Err(alertclf::Error::EmptyCorpus.into());
    }
    if let Some(dev) = &a.dev {
        return Ok(Data {
            train: docs,
            dev: load_corpus(dev)?,
            test: None,
        });
    }
    let s = split_dataset(&docs, &SplitSpec::new(0.8, 0.1, 0.1, a.split_seed))?;
    Ok(Data {
        train: s.train,
        dev: s.dev,
        test: Some(s.test),
    })
}

/// Writes the model, plus fine-tuned word vectors next to it when present.
fn save_pipeline(out: &Path, p: &Pipeline, embeddings: Option<&Path>) -> CliResult<()> {
    let hint = match (p.embeddings(), p.hyperparams.fine_tune_embeddings) {
        (Some(table), true) => {
            let path = sibling(out, "emb.txt");
            table.write_text(&path)?;
            Some(absolute(&path))
        }
        _ => embeddings.map(absolute),
    };
    model_file::save(out, p, hint.as_deref())?;
    Ok(())
}

fn open_model(path: &Path, embeddings: Option<&Path>) -> CliResult<Pipeline> {
    let (mut p, meta) = model_file::load(path)?;
    if p.needs_embeddings() {
        let emb_path = match (embeddings, &meta.embedding_path) {
            (Some(e), _) => e.to_path_buf(),
            (None, Some(hint)) => PathBuf::from(hint),
            (None, None) => {
                return Err(alertclf::Error::MissingComponent("embeddings (pass --embeddings)".into()).into())
            }
        };
        p.attach_embeddings(load_embeddings(&emb_path)?)?;
    }
    Ok(p)
}

fn score(p: &Pipeline, docs: &[AlertDocument]) -> CliResult<EvalReport> {
    if docs.is_empty() {
        return Err(alertclf::Error::EmptyCorpus.into());
    }
    Ok(evaluate(p, docs)?)
}

fn ingest(a: &IngestArgs) -> CliResult<()> {
    let (docs, rejected) = read_corpus_lenient(&a.input)?;
    write_corpus(&a.out, &docs)?;
    println!("{} accepted, {} rejected", docs.len(), rejected.len());
    for r in &rejected {
        eprintln!("line {}: {}", r.line, r.reason);
    }
    if rejected.is_empty() {
        Ok(())
    } else {
        Err(CliError::Data(format!("{} record(s) rejected", rejected.len())))
    }
}

#[derive(Serialize)]
struct StatsRow {
    text: &'static str,
    #[serde(flatten)]
    stats: CorpusStats,
}

fn stats(a: &StatsArgs) -> CliResult<()> {
    let docs = load_corpus(&a.corpus)?;
    let mut rows = Vec::new();
    for field in [TextField::Title, TextField::Description] {
        let seqs: Vec<TokenSeq> = docs.iter().map(|d| tokenize(field.text(d))).collect();
        rows.push(StatsRow {
            text: field.name(),
            stats: corpus_stats(&seqs)?,
        });
    }
    println!(
        "{:<12}  {:>15}  {:>15}  {:>13}  {:>11}",
        "Text", "Number of Texts", "Vocabulary Size", "Median Length", "Mean Length"
    );
    for r in &rows {
        println!(
            "{:<12}  {:>15}  {:>15}  {:>13}  {:>11.1}",
            r.text, r.stats.num_texts, r.stats.vocab_size, r.stats.median_length, r.stats.mean_length
        );
    }
    if let Some(path) = &a.json {
        write_json(path, &rows)?;
    }
    Ok(())
}

fn split(a: &SplitArgs) -> CliResult<()> {
    let docs = load_corpus(&a.corpus)?;
    let spec = SplitSpec::new(a.train_fraction, a.dev_fraction, a.test_fraction, a.seed);
    let s = split_dataset(&docs, &spec)?;
    create_dir(&a.out)?;
    for (name, part) in [("train", &s.train), ("dev", &s.dev), ("test", &s.test)] {
        write_corpus(&a.out.join(format!("{name}.jsonl")), part)?;
    }
    println!("train {}  dev {}  test {}", s.train.len(), s.dev.len(), s.test.len());
    Ok(())
}

fn synth(a: &SynthArgs) -> CliResult<()> {
    let cfg = SynthConfig {
        num_docs: a.num_docs,
        noise: a.noise,
        event_fraction: a.event_fraction,
        seed: a.seed,
        ..SynthConfig::default()
    };
    let docs = generate_corpus(&cfg)?;
    write_corpus(&a.out, &docs)?;
    println!("{} documents written", docs.len());
    Ok(())
}

fn field_sequences(docs: &[AlertDocument]) -> Vec<TokenSeq> {
    docs.iter()
        .flat_map(|d| [tokenize(&d.title), tokenize(&d.description)])
        .filter(|s| !s.is_empty())
        .collect()
}

fn fit_glove(docs: &[AlertDocument], cfg: &GloveConfig, window: usize, seed: u64) -> CliResult<(EmbeddingTable, f64, f64)> {
    let table = build_cooccurrence(&field_sequences(docs), window)?;
    let run = train_glove(&table, cfg, &mut seeded_rng(seed))?;
    let first = run.objective_trace[0];
    let last = *run.objective_trace.last().expect("trace is never empty");
    Ok((run.table, first, last))
}

fn glove(a: &GloveArgs) -> CliResult<()> {
    let docs = load_corpus(&a.corpus)?;
    let cfg = GloveConfig {
        dim: a.dim,
        epochs: a.epochs,
        learning_rate: a.learning_rate,
        x_max: a.x_max,
        ..GloveConfig::default()
    };
    let (table, first, last) = fit_glove(&docs, &cfg, a.window, a.seed)?;
    table.write_text(&a.out)?;
    println!("{} words, objective {first:.4} -> {last:.4}", table.len());
    Ok(())
}

fn train(a: &TrainArgs) -> CliResult<()> {
    let data = load_data(&a.data)?;
    let hp = hyperparams(&a.hyper);
    let emb = rnn_embeddings(a.rep, &a.hyper)?;
    let p = Pipeline::train(&data.train, &data.dev, a.rep, a.view, &hp, emb, a.hyper.seed)?;
    save_pipeline(&a.out, &p, a.hyper.embeddings.as_deref())?;
    if let Some(log) = &p.train_log {
        for (e, loss) in log.epoch_loss.iter().enumerate() {
            let f1 = log.dev_f1.get(e).map(|f| format!("  dev f1 {:.1}", 100.0 * f)).unwrap_or_default();
            eprintln!("epoch {:>3}  loss {loss:.4}{f1}", e + 1);
        }
        eprintln!("kept epoch {}", log.best_epoch + 1);
    }
    if data.dev.is_empty() {
        println!("model written to {}; no dev documents to report on", a.out.display());
        return Ok(());
    }
    let report = score(&p, &data.dev)?;
    write_json(&sibling(&a.out, "dev.json"), &report)?;
    print!("{}", report.to_text());
    Ok(())
}

fn evaluate_cmd(a: &EvaluateArgs) -> CliResult<()> {
    let p = open_model(&a.model, a.embeddings.as_deref())?;
    let docs = load_corpus(&a.corpus)?;
    let report = score(&p, &docs)?;
    print!("{}", report.to_text());
    if let Some(path) = &a.json {
        write_json(path, &report)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct PredictionRecord<'a> {
    id: &'a str,
    label: Label,
    probability: f64,
}

fn predict(a: &PredictArgs) -> CliResult<()> {
    let p = open_model(&a.model, a.embeddings.as_deref())?;
    let docs = match (&a.corpus, &a.title, &a.description) {
        (Some(path), _, _) => load_corpus(path)?,
        (None, None, None) => {
            return Err(CliError::Usage("pass --corpus or --title/--description".into()));
        }
        (None, t, d) => vec![AlertDocument::new(
            "input",
            t.clone().unwrap_or_default(),
            d.clone().unwrap_or_default(),
        )],
    };
    let sink: Box<dyn Write> = match &a.out {
        Some(path) => Box::new(File::create(path).map_err(|e| io_err(path, e))?),
        None => Box::new(io::stdout().lock()),
    };
    let mut w = BufWriter::new(sink);
    let out_path = a.out.clone().unwrap_or_else(|| PathBuf::from("<stdout>"));
    for d in &docs {
        let (label, probability) = p.predict(d)?;
        let rec = PredictionRecord {
            id: &d.id,
            label,
            probability,
        };
        serde_json::to_writer(&mut w, &rec).map_err(alertclf::Error::from)?;
        w.write_all(b"\n").map_err(|e| io_err(&out_path, e))?;
    }
    w.flush().map_err(|e| io_err(&out_path, e))
}

fn parse_range(flag: &str, s: &str) -> CliResult<LogRange> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let bad = || CliError::Usage(format!("--{flag} expects LOW,HIGH, got \"{s}\""));
    if parts.len() != 2 {
        return Err(bad());
    }
    let low = parts[0].parse().map_err(|_| bad())?;
    let high = parts[1].parse().map_err(|_| bad())?;
    Ok(LogRange::new(low, high))
}

fn parse_list(flag: &str, s: &str) -> CliResult<Vec<usize>> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("--{flag} expects comma-separated integers, got \"{s}\"")))
        })
        .collect()
}

fn search(a: &SearchArgs) -> CliResult<()> {
    let data = load_data(&a.data)?;
    let base = hyperparams(&a.hyper);
    let mut space = SearchSpace {
        lambda: Some(parse_range("lambda-range", &a.lambda_range)?),
        ..SearchSpace::default()
    };
    if a.rep == RepresentationSelector::Rnn {
        space.learning_rate = Some(parse_range("learning-rate-range", &a.learning_rate_range)?);
        space.hidden_sizes = Some(parse_list("hidden-sizes", &a.hidden_sizes)?);
        space.batch_sizes = Some(parse_list("batch-sizes", &a.batch_sizes)?);
    }
    let sd = SearchData {
        train: &data.train,
        dev: &data.dev,
        embeddings: rnn_embeddings(a.rep, &a.hyper)?,
    };
    let outcome = random_search(&space, &base, a.budget, &sd, a.rep, a.view, a.hyper.seed)?;
    save_pipeline(&a.out, &outcome.best, a.hyper.embeddings.as_deref())?;
    write_json(&sibling(&a.out, "trials.json"), &outcome.log)?;
    for t in &outcome.log.trials {
        let mark = if t.index == outcome.log.selected { '*' } else { ' ' };
        println!(
            "{mark} trial {:>3}  lambda {:.3e}  f1 {:.1}  accuracy {:.1}",
            t.index,
            t.hyperparams.lambda,
            100.0 * t.dev.f1,
            100.0 * t.dev.accuracy
        );
    }
    Ok(())
}

#[derive(Deserialize)]
struct VectorRow {
    id: String,
    vector: Vec<f64>,
}

fn read_vectors(path: &Path) -> CliResult<Vec<VectorRow>> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row = serde_json::from_str(&line).map_err(|e| alertclf::Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        rows.push(row);
    }
    Ok(rows)
}

#[derive(Serialize)]
struct ProjectionLog<'a> {
    view: &'a str,
    points: usize,
    perplexity: f64,
    iterations: usize,
    seed: u64,
    kl_initial: f64,
    kl_final: f64,
    kl_trace: &'a [(usize, f64)],
}

fn project_cmd(a: &ProjectArgs) -> CliResult<()> {
    let docs = load_corpus(&a.corpus)?;
    let (ids, vectors, labels, view) = match (&a.model, &a.vectors) {
        (Some(model), _) => {
            let p = open_model(model, a.embeddings.as_deref())?;
            let vectors = docs
                .iter()
                .map(|d| p.feature_vector(d).map(|f| f.to_dense()))
                .collect::<alertclf::Result<Vec<_>>>()?;
            let labels: Option<Vec<Label>> = docs.iter().map(|d| d.label).collect();
            let ids: Vec<String> = docs.iter().map(|d| d.id.clone()).collect();
            (ids, vectors, labels, a.view.unwrap_or(p.view))
        }
        (None, Some(path)) => {
            let view = a
                .view
                .ok_or_else(|| CliError::Usage("--view is required with --vectors".into()))?;
            let by_id: HashMap<&str, Option<Label>> = docs.iter().map(|d| (d.id.as_str(), d.label)).collect();
            let rows = read_vectors(path)?;
            let labels: Option<Vec<Label>> = rows.iter().map(|r| by_id.get(r.id.as_str()).copied().flatten()).collect();
            let (ids, vectors) = rows.into_iter().map(|r| (r.id, r.vector)).unzip();
            (ids, vectors, labels, view)
        }
        (None, None) => return Err(CliError::Usage("pass --model or --vectors".into())),
    };
    let cfg = TsneConfig {
        perplexity: a.perplexity,
        iterations: a.iterations,
        learning_rate: a.learning_rate,
        seed: a.seed,
        ..TsneConfig::default()
    };
    let proj = project(&vectors, labels.as_deref(), &cfg)?;
    create_dir(&a.out)?;
    let stem = format!("tsne_{}", view.name());
    let csv_path = a.out.join(format!("{stem}.csv"));
    let file = File::create(&csv_path).map_err(|e| io_err(&csv_path, e))?;
    let mut w = BufWriter::new(file);
    write_points_csv(&mut w, &ids, &proj).map_err(|e| io_err(&csv_path, e))?;
    w.flush().map_err(|e| io_err(&csv_path, e))?;
    let svg_path = a.out.join(format!("{stem}.svg"));
    fs::write(&svg_path, render_svg(&proj, view.name())).map_err(|e| io_err(&svg_path, e))?;
    write_json(
        &a.out.join(format!("{stem}.json")),
        &ProjectionLog {
            view: view.name(),
            points: proj.points.len(),
            perplexity: cfg.perplexity,
            iterations: cfg.iterations,
            seed: cfg.seed,
            kl_initial: proj.kl_initial,
            kl_final: proj.kl_final,
            kl_trace: &proj.kl_trace,
        },
    )?;
    println!(
        "{} points  kl_initial {:.4}  kl_final {:.4}",
        proj.points.len(),
        proj.kl_initial,
        proj.kl_final
    );
    Ok(())
}

#[derive(Serialize)]
struct SweepRow {
    representation: RepresentationSelector,
    view: ViewSelector,
    dev: EvalReport,
    test: EvalReport,
}

fn sweep(a: &SweepArgs) -> CliResult<()> {
    let docs = load_corpus(&a.corpus)?;
    let s = split_dataset(&docs, &SplitSpec::new(0.8, 0.1, 0.1, a.split_seed))?;
    if s.dev.is_empty() || s.test.is_empty() {
        return Err(CliError::Data("corpus too small for a dev and a test split".into()));
    }
    create_dir(&a.out)?;
    let hp = hyperparams(&a.hyper);
    let (emb, emb_path) = match &a.hyper.embeddings {
        Some(path) => (load_embeddings(path)?, path.clone()),
        None => {
            let cfg = GloveConfig {
                dim: a.glove_dim,
                epochs: a.glove_epochs,
                x_max: a.glove_x_max,
                ..GloveConfig::default()
            };
            let (table, first, last) = fit_glove(&s.train, &cfg, 10, a.hyper.seed)?;
            let path = a.out.join("embeddings.txt");
            table.write_text(&path)?;
            eprintln!("word vectors: {} words, objective {first:.4} -> {last:.4}", table.len());
            (Arc::new(table), path)
        }
    };
    let mut rows = Vec::new();
    for (rep, view) in all_configurations() {
        let e = (rep == RepresentationSelector::Rnn).then(|| emb.clone());
        let p = Pipeline::train(&s.train, &s.dev, rep, view, &hp, e, a.hyper.seed)?;
        save_pipeline(&a.out.join(format!("{}_{}.model", rep.name(), view.name())), &p, Some(&emb_path))?;
        let row = SweepRow {
            representation: rep,
            view,
            dev: score(&p, &s.dev)?,
            test: score(&p, &s.test)?,
        };
        eprintln!("{:<4} {:<5} test f1 {:.1}", rep.name(), view.name(), 100.0 * row.test.f1);
        rows.push(row);
    }
    let table = results_table(
        &rows
            .iter()
            .map(|r| (r.representation, r.view, r.test.clone()))
            .collect::<Vec<_>>(),
    );
    let table_path = a.out.join("results.txt");
    fs::write(&table_path, &table).map_err(|e| io_err(&table_path, e))?;
    write_json(&a.out.join("results.json"), &rows)?;
    print!("{table}");
    Ok(())
}

fn baselines(a: &BaselinesArgs) -> CliResult<()> {
    let data = load_data(&a.data)?;
    let mut hp = HyperParams::default();
    if let Some(l) = a.lambda {
        hp.lambda = l;
    }
    let eval_docs = data.test.as_ref().unwrap_or(&data.dev);
    if eval_docs.is_empty() {
        return Err(alertclf::Error::EmptyCorpus.into());
    }
    let results = tfidf_classifier_sweep(&data.train, eval_docs, a.view, &hp, a.svm_c, a.nb_alpha)?;
    println!(
        "{:<20} {:<17} {:>6} {:>6} {:>6} {:>6}",
        "Classifier", "Input", "Prec.", "Rec.", "F-scr.", "Acc."
    );
    for r in &results {
        println!(
            "{:<20} {:<17} {:>6.1} {:>6.1} {:>6.1} {:>6.1}",
            r.classifier.name(),
            r.input,
            100.0 * r.report.precision,
            100.0 * r.report.recall,
            100.0 * r.report.f1,
            100.0 * r.report.accuracy
        );
    }
    if let Some(path) = &a.json {
        write_json(path, &results)?;
    }
    Ok(())
}
