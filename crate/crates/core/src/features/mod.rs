//! Feature representations: graph-level vectors for tree ensembles and node feature
//! matrices for message-passing models.
//!
//! | scheme      | level | dim                        |
//! |-------------|-------|----------------------------|
//! | `graph23`   | graph | 23                         |
//! | `tfidf128`  | graph | 128                        |
//! | `identity`  | node  | 1                          |
//! | `mclass27`  | node  | 27                         |
//! | `pcode_sem` | node  | 11 + Pcode vocabulary      |
//! | `asm_sem`   | node  | 11 + assembly vocabulary   |

pub mod graph;
pub mod node;
pub mod taxonomy;
pub mod tfidf;

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::cfg::{build_vocabulary, ControlFlowGraph, FunctionSample, Vocabulary};
use crate::error::{Error, Result};

pub use graph::{cyclomatic_complexity, GRAPH23_DIM};
pub use node::{node_features, FeatureContext, NodeFeatureMatrix, STRUCTURAL_DIM};
pub use taxonomy::MnemonicClassTaxonomy;
pub use tfidf::{tfidf_fit, TfidfModel, TFIDF_DIM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureScheme {
    Graph23,
    Tfidf128,
    Identity,
    Mclass27,
    #[serde(alias = "pcode-sem")]
    PcodeSem,
    #[serde(alias = "asm-sem")]
    AsmSem,
}

impl FeatureScheme {
    pub const ALL: [FeatureScheme; 6] = [
        FeatureScheme::Graph23,
        FeatureScheme::Tfidf128,
        FeatureScheme::Identity,
        FeatureScheme::Mclass27,
        FeatureScheme::PcodeSem,
        FeatureScheme::AsmSem,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureScheme::Graph23 => "graph23",
            FeatureScheme::Tfidf128 => "tfidf128",
            FeatureScheme::Identity => "identity",
            FeatureScheme::Mclass27 => "mclass27",
            FeatureScheme::PcodeSem => "pcode_sem",
            FeatureScheme::AsmSem => "asm_sem",
        }
    }

    pub fn is_graph_level(self) -> bool {
        matches!(self, FeatureScheme::Graph23 | FeatureScheme::Tfidf128)
    }
}

impl fmt::Display for FeatureScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let normalized = s.to_ascii_lowercase().replace('-', "_");
        Self::ALL
            .iter()
            .copied()
            .find(|f| f.name() == normalized)
            .ok_or_else(|| Error::UnknownScheme(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphFeatureVector {
    pub scheme: FeatureScheme,
    pub values: Vec<f64>,
}

impl GraphFeatureVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

pub fn default_taxonomy() -> &'static MnemonicClassTaxonomy {
    static TAXONOMY: OnceLock<MnemonicClassTaxonomy> = OnceLock::new();
    TAXONOMY.get_or_init(MnemonicClassTaxonomy::default)
}

/// The 23-component graph-level vector under the default taxonomy.
pub fn graph_level_features(cfg: &ControlFlowGraph) -> GraphFeatureVector {
    graph_level_features_with(cfg, default_taxonomy())
}

pub fn graph_level_features_with(cfg: &ControlFlowGraph, taxonomy: &MnemonicClassTaxonomy) -> GraphFeatureVector {
    GraphFeatureVector {
        scheme: FeatureScheme::Graph23,
        values: graph::graph_level_values(cfg, taxonomy),
    }
}

pub fn tfidf_transform(model: &TfidfModel, cfg: &ControlFlowGraph) -> GraphFeatureVector {
    GraphFeatureVector {
        scheme: FeatureScheme::Tfidf128,
        values: model.transform(cfg),
    }
}

/// A feature scheme together with everything fitted for it on a training corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Featurizer {
    pub scheme: FeatureScheme,
    pub taxonomy: MnemonicClassTaxonomy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tfidf: Option<TfidfModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vocabulary: Option<Vocabulary>,
}

impl Featurizer {
    /// Fits the scheme's corpus-dependent state (TF-IDF weights or token vocabulary).
    pub fn fit(scheme: FeatureScheme, train: &[&FunctionSample], taxonomy: MnemonicClassTaxonomy) -> Result<Self> {
        let mut featurizer = Featurizer {
            scheme,
            taxonomy,
            tfidf: None,
            vocabulary: None,
        };
        match scheme {
            FeatureScheme::Tfidf128 => featurizer.tfidf = Some(tfidf_fit(train)?),
            FeatureScheme::PcodeSem => featurizer.vocabulary = Some(build_vocabulary(train, None)?.pcode),
            FeatureScheme::AsmSem => featurizer.vocabulary = Some(build_vocabulary(train, None)?.assembly),
            _ => {}
        }
        Ok(featurizer)
    }

    fn context(&self) -> FeatureContext<'_> {
        FeatureContext {
            taxonomy: Some(&self.taxonomy),
            pcode_vocabulary: self.vocabulary.as_ref().filter(|_| self.scheme == FeatureScheme::PcodeSem),
            assembly_vocabulary: self.vocabulary.as_ref().filter(|_| self.scheme == FeatureScheme::AsmSem),
        }
    }

    pub fn dim(&self) -> usize {
        match self.scheme {
            FeatureScheme::Graph23 => GRAPH23_DIM,
            FeatureScheme::Tfidf128 => TFIDF_DIM,
            s => node::node_feature_dim(s, &self.context()).expect("fitted featurizer has its context"),
        }
    }

    pub fn graph_vector(&self, cfg: &ControlFlowGraph) -> Result<GraphFeatureVector> {
        match self.scheme {
            FeatureScheme::Graph23 => Ok(graph_level_features_with(cfg, &self.taxonomy)),
            FeatureScheme::Tfidf128 => {
                let model = self.tfidf.as_ref().ok_or_else(|| Error::MissingContext {
                    scheme: self.scheme.name().into(),
                    what: "a fitted TF-IDF model".into(),
                })?;
                Ok(tfidf_transform(model, cfg))
            }
            s => Err(Error::UnknownScheme(format!("{s} is not a graph-level scheme"))),
        }
    }

    pub fn node_matrix(&self, cfg: &ControlFlowGraph) -> Result<NodeFeatureMatrix> {
        node_features(cfg, self.scheme, &self.context())
    }
}

#[derive(Serialize)]
struct NodeMatrixRecord<'a> {
    function_id: &'a str,
    scheme: &'a str,
    node_order: &'a [String],
    rows: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct GraphVectorRecord<'a> {
    function_id: &'a str,
    scheme: &'a str,
    values: &'a [f64],
}

/// Writes one JSON line per sample: `{function_id, scheme, node_order, rows}` for node
/// schemes, `{function_id, scheme, values}` for graph-level ones.
pub fn export_features<W: Write>(mut out: W, featurizer: &Featurizer, corpus: &[FunctionSample]) -> Result<()> {
    for sample in corpus {
        let line = if featurizer.scheme.is_graph_level() {
            let v = featurizer.graph_vector(&sample.cfg)?;
            serde_json::to_string(&GraphVectorRecord {
                function_id: &sample.function_id,
                scheme: featurizer.scheme.name(),
                values: &v.values,
            })?
        } else {
            let m = featurizer.node_matrix(&sample.cfg)?;
            serde_json::to_string(&NodeMatrixRecord {
                function_id: &sample.function_id,
                scheme: featurizer.scheme.name(),
                node_order: &m.node_order,
                rows: m.values.outer_iter().map(|r| r.to_vec()).collect(),
            })?
        };
        writeln!(out, "{line}")?;
    }
    Ok(())
}
