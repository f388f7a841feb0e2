//! Benchmark tables: one trained and evaluated model per cell.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::report::{evaluate, EvalReport};
use crate::cfg::FunctionSample;
use crate::dataset::{SplitManifest, SplitSet};
use crate::error::{Error, Result};
use crate::features::MnemonicClassTaxonomy;
use crate::model::{train_model, TrainSpec};

fn default_dataset() -> String {
    "dataset".into()
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkSpec {
    /// Name written in the `dataset` column.
    #[serde(default = "default_dataset")]
    pub dataset: String,
    /// Drop samples whose transform fell back to a passthrough.
    #[serde(default = "yes")]
    pub exclude_degenerate: bool,
    pub cells: Vec<TrainSpec>,
}

impl BenchmarkSpec {
    /// Parses TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<Self> {
        let spec: BenchmarkSpec = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?
        } else {
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?
        };
        if spec.cells.is_empty() {
            return Err(Error::Config("benchmark has no cells".into()));
        }
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("benchmark serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Ok,
    Failed,
    /// The architecture is listed but not implemented.
    Unimplemented,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub features: String,
    pub dim: Option<usize>,
    pub algorithm: String,
    pub dataset: String,
    pub task: String,
    pub mode: String,
    pub balanced_accuracy: Option<f64>,
    pub runtime_s: f64,
    pub status: CellStatus,
    pub error: Option<String>,
    pub report: Option<EvalReport>,
}

#[derive(Serialize)]
struct CsvRow<'a> {
    features: &'a str,
    dim: Option<usize>,
    algorithm: &'a str,
    dataset: &'a str,
    task: &'a str,
    balanced_accuracy: Option<f64>,
    runtime_s: f64,
    status: CellStatus,
    error: &'a str,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkTable {
    pub rows: Vec<BenchmarkRow>,
}

impl BenchmarkTable {
    pub fn failed(&self) -> usize {
        self.rows.iter().filter(|r| r.status == CellStatus::Failed).count()
    }

    /// Columns `features, dim, algorithm, dataset, task, balanced_accuracy, runtime_s`,
    /// followed by `status` and `error`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(CsvRow {
                features: &r.features,
                dim: r.dim,
                algorithm: &r.algorithm,
                dataset: &r.dataset,
                task: &r.task,
                balanced_accuracy: r.balanced_accuracy,
                runtime_s: r.runtime_s,
                status: r.status,
                error: r.error.as_deref().unwrap_or(""),
            })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }

    /// Writes `benchmark.csv` and `benchmark.json` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        self.write_csv(std::fs::File::create(dir.join("benchmark.csv"))?)?;
        std::fs::write(dir.join("benchmark.json"), self.to_json())?;
        Ok(())
    }
}

/// Trains every cell on the manifest's train set (validation for selection) and scores it on
/// the test set. A failing cell is recorded and the run moves on.
pub fn run_benchmark(
    corpus: &[FunctionSample],
    manifest: &SplitManifest,
    spec: &BenchmarkSpec,
    taxonomy: &MnemonicClassTaxonomy,
    seed: u64,
) -> BenchmarkTable {
    let kept: Vec<FunctionSample> = corpus
        .iter()
        .filter(|s| !(spec.exclude_degenerate && s.degenerate))
        .cloned()
        .collect();
    let train = manifest.select(&kept, SplitSet::Train);
    let validation = manifest.select(&kept, SplitSet::Validation);
    let test = manifest.select(&kept, SplitSet::Test);
    let rows = spec
        .cells
        .iter()
        .map(|cell| {
            let started = Instant::now();
            let mut dim = None;
            let result = train_model(cell, &train, &validation, taxonomy.clone(), seed).and_then(|outcome| {
                dim = Some(outcome.model.featurizer.dim());
                evaluate(&outcome.model, &test, cell.task, cell.mode, &spec.dataset)
            });
            let runtime_s = started.elapsed().as_secs_f64();
            let space = cell.class_space();
            let (status, error, report) = match result {
                Ok(r) => (CellStatus::Ok, None, Some(r)),
                Err(e @ Error::Unimplemented(_)) => (CellStatus::Unimplemented, Some(e.to_string()), None),
                Err(e) => {
                    log::warn!("cell {}+{} failed: {e}", cell.algorithm, cell.features);
                    (CellStatus::Failed, Some(e.to_string()), None)
                }
            };
            log::info!(
                "{} {} {}: {:?} in {runtime_s:.1}s",
                cell.algorithm,
                cell.features,
                space.task,
                report.as_ref().map(|r| r.balanced_accuracy)
            );
            BenchmarkRow {
                features: cell.features.name().into(),
                dim,
                algorithm: cell.algorithm.name().into(),
                dataset: spec.dataset.clone(),
                task: space.task.name().into(),
                mode: space.mode.name().into(),
                balanced_accuracy: report.as_ref().map(|r| r.balanced_accuracy),
                runtime_s,
                status,
                error,
                report,
            }
        })
        .collect();
    BenchmarkTable { rows }
}
