//! Selecting a document representation and a view, and assembling the
//! feature vector the classifier sees.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bilstm::{prepare_tokens, BiLstmEncoder};
use crate::bow::{count_row, lcr_vector, tfidf_vector, LcrModel, Vocabulary};
use crate::corpus::{tokenize, AlertDocument};
use crate::error::{Error, Result};
use crate::glove::EmbeddingTable;
use crate::numerics::Features;

/// One of the two texts carried by an alert.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TextField {
    Description,
    Title,
}

impl TextField {
    pub fn text(self, doc: &AlertDocument) -> &str {
        match self {
            TextField::Description => &doc.description,
            TextField::Title => &doc.title,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TextField::Description => "description",
            TextField::Title => "title",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViewSelector {
    Title,
    #[serde(rename = "desc")]
    Description,
    Both,
}

impl ViewSelector {
    pub const ALL: [ViewSelector; 3] = [ViewSelector::Description, ViewSelector::Title, ViewSelector::Both];

    /// Texts in feature order; `Both` puts the description block first.
    pub fn fields(self) -> &'static [TextField] {
        match self {
            ViewSelector::Title => &[TextField::Title],
            ViewSelector::Description => &[TextField::Description],
            ViewSelector::Both => &[TextField::Description, TextField::Title],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ViewSelector::Title => "title",
            ViewSelector::Description => "desc",
            ViewSelector::Both => "both",
        }
    }
}

impl fmt::Display for ViewSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ViewSelector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "title" => Ok(ViewSelector::Title),
            "desc" | "description" => Ok(ViewSelector::Description),
            "both" => Ok(ViewSelector::Both),
            _ => Err(Error::InvalidArgument(format!("unknown view \"{s}\" (title|desc|both)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RepresentationSelector {
    Tf,
    Lcr,
    Rnn,
}

impl RepresentationSelector {
    pub const ALL: [RepresentationSelector; 3] =
        [RepresentationSelector::Tf, RepresentationSelector::Lcr, RepresentationSelector::Rnn];

    pub fn name(self) -> &'static str {
        match self {
            RepresentationSelector::Tf => "tf",
            RepresentationSelector::Lcr => "lcr",
            RepresentationSelector::Rnn => "rnn",
        }
    }
}

impl fmt::Display for RepresentationSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RepresentationSelector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tf" => Ok(RepresentationSelector::Tf),
            "lcr" => Ok(RepresentationSelector::Lcr),
            "rnn" => Ok(RepresentationSelector::Rnn),
            _ => Err(Error::InvalidArgument(format!("unknown representation \"{s}\" (tf|lcr|rnn)"))),
        }
    }
}

/// The nine (representation, view) configurations.
pub fn all_configurations() -> Vec<(RepresentationSelector, ViewSelector)> {
    RepresentationSelector::ALL
        .iter()
        .flat_map(|&r| ViewSelector::ALL.iter().map(move |&v| (r, v)))
        .collect()
}

/// Vocabulary (and log-count ratios, when fitted) for one text field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BowView {
    pub vocab: Vocabulary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lcr: Option<LcrModel>,
}

/// Fitted per-field document models. Title and description never share one.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FittedFeatures {
    pub bow: BTreeMap<TextField, BowView>,
    pub encoders: BTreeMap<TextField, BiLstmEncoder>,
    #[serde(skip)]
    pub embeddings: Option<Arc<EmbeddingTable>>,
}

impl FittedFeatures {
    fn block(&self, rep: RepresentationSelector, field: TextField, text: &str) -> Result<Features> {
        let missing = |what: &str| Error::MissingComponent(format!("{what} for {}", field.name()));
        match rep {
            RepresentationSelector::Tf => {
                let bow = self.bow.get(&field).ok_or_else(|| missing("vocabulary"))?;
                Ok(Features::Sparse(tfidf_vector(&count_row(&tokenize(text), &bow.vocab), &bow.vocab)))
            }
            RepresentationSelector::Lcr => {
                let bow = self.bow.get(&field).ok_or_else(|| missing("vocabulary"))?;
                let lcr = bow.lcr.as_ref().ok_or_else(|| missing("log-count ratio model"))?;
                Ok(Features::Sparse(lcr_vector(&count_row(&tokenize(text), &bow.vocab), lcr)))
            }
            RepresentationSelector::Rnn => {
                let enc = self.encoders.get(&field).ok_or_else(|| missing("encoder"))?;
                let emb = self
                    .embeddings
                    .as_ref()
                    .ok_or_else(|| Error::MissingComponent("embeddings".into()))?;
                Ok(Features::Dense(enc.encode(emb, &prepare_tokens(tokenize(text)))?.0))
            }
        }
    }
}

/// Feature vector for `doc`; `Both` concatenates description then title,
/// offsetting sparse title indices by the description vocabulary size.
pub fn feature_vector(
    doc: &AlertDocument,
    rep: RepresentationSelector,
    view: ViewSelector,
    fitted: &FittedFeatures,
) -> Result<Features> {
    let mut blocks = view
        .fields()
        .iter()
        .map(|&f| fitted.block(rep, f, f.text(doc)));
    let first = blocks.next().expect("every view has a field")?;
    blocks.try_fold(first, |acc, b| Ok(acc.concat(&b?)))
}
