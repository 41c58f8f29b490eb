//! Alert documents, tokenization, corpus statistics and dataset splits.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::seeded_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Event,
    Other,
}

impl Label {
    pub fn is_event(self) -> bool {
        self == Label::Event
    }

    pub fn from_bool(event: bool) -> Self {
        if event {
            Label::Event
        } else {
            Label::Other
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Event => "event",
            Label::Other => "other",
        }
    }
}

/// One retrieved alert. The JSONL representation is the corpus file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlertDocument {
    pub id: String,
    pub title: String,
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retrieved_at: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
}

impl AlertDocument {
    pub fn new(id: impl Into<String>, title: impl Into<String>, description: impl Into<String>) -> Self {
        AlertDocument {
            id: id.into(),
            title: title.into(),
            description: description.into(),
            label: None,
            retrieved_at: None,
            url: None,
        }
    }

    pub fn with_label(mut self, label: Label) -> Self {
        self.label = Some(label);
        self
    }

    pub fn require_label(&self) -> Result<Label> {
        self.label.ok_or_else(|| Error::Unlabeled(self.id.clone()))
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.id.is_empty() {
            return Err("empty id".into());
        }
        if let Some(ts) = &self.retrieved_at {
            chrono::DateTime::parse_from_rfc3339(ts)
                .map_err(|e| format!("retrieved_at \"{ts}\" is not ISO-8601: {e}"))?;
        }
        Ok(())
    }
}

/// Lowercase tokens with no whitespace and no empty entries.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSeq(pub Vec<String>);

impl TokenSeq {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }
}

impl<S: Into<String>> FromIterator<S> for TokenSeq {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        TokenSeq(iter.into_iter().map(Into::into).collect())
    }
}

pub fn tokenize(text: &str) -> TokenSeq {
    text.split_whitespace()
        .map(|raw| {
            raw.to_lowercase()
                .trim_matches(|c: char| !c.is_alphanumeric())
                .to_string()
        })
        .filter(|t| !t.is_empty())
        .collect()
}

/// Unigrams in order, then adjacent bigrams joined by one space.
pub fn ngram_terms(seq: &TokenSeq) -> Vec<String> {
    let toks = seq.tokens();
    let mut terms = Vec::with_capacity(toks.len() * 2);
    terms.extend(toks.iter().cloned());
    terms.extend(toks.windows(2).map(|w| format!("{} {}", w[0], w[1])));
    terms
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub num_texts: usize,
    pub vocab_size: usize,
    pub median_length: usize,
    pub mean_length: f64,
}

pub fn corpus_stats(docs: &[TokenSeq]) -> Result<CorpusStats> {
    if docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut lengths: Vec<usize> = docs.iter().map(TokenSeq::len).collect();
    lengths.sort_unstable();
    let median_length = lengths[(lengths.len() - 1) / 2];
    let total: usize = lengths.iter().sum();
    let vocab: HashSet<&str> = docs.iter().flat_map(|d| d.iter()).collect();
    Ok(CorpusStats {
        num_texts: docs.len(),
        vocab_size: vocab.len(),
        median_length,
        mean_length: total as f64 / docs.len() as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub dev_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train: f64, dev: f64, test: f64, seed: u64) -> Self {
        SplitSpec {
            train_fraction: train,
            dev_fraction: dev,
            test_fraction: test,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fr = [self.train_fraction, self.dev_fraction, self.test_fraction];
        if fr.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::InvalidArgument(format!(
                "split fractions must lie in [0, 1], got {fr:?}"
            )));
        }
        if (fr.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "split fractions must sum to 1, got {fr:?}"
            )));
        }
        Ok(())
    }

    /// (train, dev, test) sizes: dev and test are floored, train takes the rest.
    pub fn sizes(&self, n: usize) -> Result<(usize, usize, usize)> {
        self.validate()?;
        let dev = (n as f64 * self.dev_fraction).floor() as usize;
        let test = (n as f64 * self.test_fraction).floor() as usize;
        Ok((n - dev - test, dev, test))
    }
}

pub struct Split {
    pub train: Vec<AlertDocument>,
    pub dev: Vec<AlertDocument>,
    pub test: Vec<AlertDocument>,
}

pub fn split_dataset(docs: &[AlertDocument], spec: &SplitSpec) -> Result<Split> {
    let (n_train, n_dev, _) = spec.sizes(docs.len())?;
    for d in docs {
        d.require_label()?;
    }
    let mut order: Vec<usize> = (0..docs.len()).collect();
    order.shuffle(&mut seeded_rng(spec.seed));
    let pick = |idx: &[usize]| idx.iter().map(|&i| docs[i].clone()).collect::<Vec<_>>();
    Ok(Split {
        train: pick(&order[..n_train]),
        dev: pick(&order[n_train..n_train + n_dev]),
        test: pick(&order[n_train + n_dev..]),
    })
}

/// A line-level problem found while reading a corpus file.
#[derive(Debug, Clone, PartialEq)]
pub struct Rejection {
    pub line: usize,
    pub reason: String,
}

/// Lenient reader used by ingestion: keeps good records, reports bad ones.
pub fn read_corpus_lenient(path: &Path) -> Result<(Vec<AlertDocument>, Vec<Rejection>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut docs = Vec::new();
    let mut rejected = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_record(&line) {
            Ok(doc) if !seen.insert(doc.id.clone()) => rejected.push(Rejection {
                line: line_no,
                reason: format!("duplicate id \"{}\"", doc.id),
            }),
            Ok(doc) => docs.push(doc),
            Err(reason) => rejected.push(Rejection {
                line: line_no,
                reason,
            }),
        }
    }
    Ok((docs, rejected))
}

fn parse_record(line: &str) -> std::result::Result<AlertDocument, String> {
    let doc: AlertDocument = serde_json::from_str(line).map_err(|e| e.to_string())?;
    doc.validate()?;
    Ok(doc)
}

/// Strict loader: the first malformed line or duplicate id is an error.
pub fn load_corpus(path: &Path) -> Result<Vec<AlertDocument>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let doc = parse_record(&line).map_err(|message| Error::Parse {
            line: i + 1,
            message,
        })?;
        if !seen.insert(doc.id.clone()) {
            return Err(Error::DuplicateId(doc.id));
        }
        docs.push(doc);
    }
    check_label_consistency(&docs)?;
    Ok(docs)
}

/// Either every document is labeled or none is.
pub fn check_label_consistency(docs: &[AlertDocument]) -> Result<()> {
    let labeled = docs.iter().filter(|d| d.label.is_some()).count();
    if labeled != 0 && labeled != docs.len() {
        let first = docs.iter().find(|d| d.label.is_none()).unwrap();
        return Err(Error::Unlabeled(first.id.clone()));
    }
    Ok(())
}

pub fn write_corpus(path: &Path, docs: &[AlertDocument]) -> Result<()> {
    use std::io::Write;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for d in docs {
        serde_json::to_writer(&mut w, d)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn labels_of(docs: &[AlertDocument]) -> Result<Vec<Label>> {
    docs.iter().map(AlertDocument::require_label).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write;

    fn toks(words: &[&str]) -> TokenSeq {
        words.iter().copied().collect()
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(
            tokenize("Ebola survivors sue state"),
            toks(&["ebola", "survivors", "sue", "state"])
        );
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("Zika, Dengue!"), toks(&["zika", "dengue"]));
    }

    #[test]
    fn tokenize_keeps_internal_punctuation() {
        assert_eq!(
            tokenize("(Hepatitis-A) survivor's  ... \"case\""),
            toks(&["hepatitis-a", "survivor's", "case"])
        );
    }

    #[test]
    fn ngram_examples() {
        assert_eq!(ngram_terms(&toks(&["a", "b", "c"])), vec!["a", "b", "c", "a b", "b c"]);
        assert_eq!(ngram_terms(&toks(&["a"])), vec!["a"]);
        assert!(ngram_terms(&TokenSeq::default()).is_empty());
    }

    #[test]
    fn stats_examples() {
        let s = corpus_stats(&[toks(&["a", "b"]), toks(&["c", "d", "e", "f"])]).unwrap();
        assert_eq!(s.median_length, 2);
        assert_eq!(s.mean_length, 3.0);
        let one = corpus_stats(&[toks(&["a", "b"])]).unwrap();
        assert_eq!(
            one,
            CorpusStats {
                num_texts: 1,
                vocab_size: 2,
                median_length: 2,
                mean_length: 2.0
            }
        );
        assert!(matches!(corpus_stats(&[]), Err(Error::EmptyCorpus)));
    }

    fn brute_stats(docs: &[Vec<String>]) -> (usize, usize, usize, f64) {
        let mut distinct: Vec<&String> = Vec::new();
        for d in docs {
            for t in d {
                if !distinct.contains(&t) {
                    distinct.push(t);
                }
            }
        }
        let mut lens: Vec<usize> = docs.iter().map(Vec::len).collect();
        // insertion sort, independent of the library's sort
        for i in 1..lens.len() {
            let mut j = i;
            while j > 0 && lens[j - 1] > lens[j] {
                lens.swap(j - 1, j);
                j -= 1;
            }
        }
        let median = if lens.len() % 2 == 1 {
            lens[lens.len() / 2]
        } else {
            lens[lens.len() / 2 - 1]
        };
        let mut total = 0usize;
        for l in &lens {
            total += l;
        }
        (docs.len(), distinct.len(), median, total as f64 / docs.len() as f64)
    }

    #[test]
    fn stats_ten_synthetic_docs_match_recount() {
        let words = ["ebola", "zika", "flu", "case", "outbreak", "water"];
        let docs: Vec<Vec<String>> = (0..10)
            .map(|i| (0..(i * 7 % 5 + 1)).map(|j| words[(i + j * 3) % 6].to_string()).collect())
            .collect();
        let seqs: Vec<TokenSeq> = docs.iter().map(|d| TokenSeq(d.clone())).collect();
        let s = corpus_stats(&seqs).unwrap();
        let (n, v, m, mean) = brute_stats(&docs);
        assert_eq!((s.num_texts, s.vocab_size, s.median_length), (n, v, m));
        assert_eq!(s.mean_length, mean);
    }

    #[test]
    fn split_sizes_floor_dev_and_test() {
        let spec = SplitSpec::new(0.8, 0.1, 0.1, 1);
        assert_eq!(spec.sizes(30_893).unwrap(), (24_715, 3_089, 3_089));
        assert_eq!(spec.sizes(10).unwrap(), (8, 1, 1));
    }

    fn labeled(n: usize) -> Vec<AlertDocument> {
        (0..n)
            .map(|i| {
                AlertDocument::new(format!("d{i}"), "t", "d").with_label(Label::from_bool(i % 2 == 0))
            })
            .collect()
    }

    #[test]
    fn split_deterministic_and_validated() {
        let docs = labeled(10);
        let spec = SplitSpec::new(0.8, 0.1, 0.1, 99);
        let a = split_dataset(&docs, &spec).unwrap();
        let b = split_dataset(&docs, &spec).unwrap();
        assert_eq!((a.train.len(), a.dev.len(), a.test.len()), (8, 1, 1));
        assert_eq!(a.train, b.train);
        assert_eq!(a.dev, b.dev);
        assert_eq!(a.test, b.test);
        assert!(split_dataset(&docs, &SplitSpec::new(0.8, 0.3, 0.1, 0)).is_err());
        assert!(split_dataset(&docs, &SplitSpec::new(1.2, -0.1, -0.1, 0)).is_err());
        let mut unl = labeled(3);
        unl[1].label = None;
        assert!(matches!(
            split_dataset(&unl, &SplitSpec::new(0.8, 0.1, 0.1, 0)),
            Err(Error::Unlabeled(id)) if id == "d1"
        ));
    }

    fn write_lines(lines: &[&str]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        f
    }

    #[test]
    fn load_well_formed() {
        let f = write_lines(&[
            r#"{"id":"a1","title":"Ebola survivors sue state","description":"Two Ebola survivors","label":"event"}"#,
            r#"{"id":"a2","title":"Match report","description":"soccer","label":"other","url":"http://x"}"#,
            r#"{"id":"a3","title":"Zika","description":"","label":"event","retrieved_at":"2017-03-01T10:00:00Z"}"#,
        ]);
        let docs = load_corpus(f.path()).unwrap();
        assert_eq!(docs.len(), 3);
        assert_eq!(docs[0].id, "a1");
        assert_eq!(docs[2].label, Some(Label::Event));
    }

    #[test]
    fn load_missing_title_reports_line() {
        let f = write_lines(&[
            r#"{"id":"a1","title":"x","description":"y"}"#,
            r#"{"id":"a2","description":"y"}"#,
        ]);
        match load_corpus(f.path()) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("title"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn load_duplicate_names_id() {
        let f = write_lines(&[
            r#"{"id":"a1","title":"x","description":"y"}"#,
            r#"{"id":"a1","title":"z","description":"w"}"#,
        ]);
        let err = load_corpus(f.path()).unwrap_err();
        assert!(err.to_string().contains("\"a1\""), "{err}");
    }

    #[test]
    fn load_rejects_mixed_labels_and_bad_timestamp() {
        let f = write_lines(&[
            r#"{"id":"a1","title":"x","description":"y","label":"event"}"#,
            r#"{"id":"a2","title":"z","description":"w"}"#,
        ]);
        assert!(matches!(load_corpus(f.path()), Err(Error::Unlabeled(id)) if id == "a2"));
        let g = write_lines(&[r#"{"id":"a1","title":"x","description":"y","retrieved_at":"yesterday"}"#]);
        assert!(matches!(load_corpus(g.path()), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn lenient_reader_counts_rejections() {
        let f = write_lines(&[
            r#"{"id":"a1","title":"x","description":"y"}"#,
            "not json",
            r#"{"id":"a1","title":"x","description":"y"}"#,
            r#"{"id":"a2","title":"x","description":"y"}"#,
        ]);
        let (docs, rej) = read_corpus_lenient(f.path()).unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(rej.iter().map(|r| r.line).collect::<Vec<_>>(), vec![2, 3]);
    }

    proptest! {
        #[test]
        fn tokenize_idempotent(text in "\\PC{0,60}") {
            let once = tokenize(&text);
            let twice = tokenize(&once.0.join(" "));
            prop_assert_eq!(&once, &twice);
            prop_assert!(once.iter().all(|t| !t.is_empty() && !t.chars().any(char::is_whitespace)));
        }

        #[test]
        fn split_partitions(n in 3usize..200, dev in 0.0f64..0.5, seed in any::<u64>()) {
            let test = (1.0 - dev) / 3.0;
            let spec = SplitSpec::new(1.0 - dev - test, dev, test, seed);
            let docs = labeled(n);
            let s = split_dataset(&docs, &spec).unwrap();
            let mut ids: Vec<String> = s.train.iter().chain(&s.dev).chain(&s.test).map(|d| d.id.clone()).collect();
            prop_assert_eq!(ids.len(), n);
            ids.sort();
            ids.dedup();
            prop_assert_eq!(ids.len(), n);
        }

        #[test]
        fn stats_match_recount(docs in proptest::collection::vec(
            proptest::collection::vec("[a-e]{1,2}", 0..12), 1..100)) {
            let seqs: Vec<TokenSeq> = docs.iter().map(|d| TokenSeq(d.clone())).collect();
            let s = corpus_stats(&seqs).unwrap();
            let (n, v, m, mean) = brute_stats(&docs);
            prop_assert_eq!((s.num_texts, s.vocab_size, s.median_length), (n, v, m));
            prop_assert!((s.mean_length - mean).abs() < 1e-12);
        }
    }
}
