//! Tasks, class spaces and evaluation reports.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::metrics::{confusion_matrix, mean_present, per_class_recall};
use crate::cfg::{FunctionSample, Obfuscation};
use crate::error::{Error, Result};
use crate::model::TrainedModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// Obfuscated or not.
    Binary,
    /// Which obfuscation.
    Multiclass,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Binary => "binary",
            Task::Multiclass => "multiclass",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(Task::Binary),
            "multiclass" | "multi-class" => Ok(Task::Multiclass),
            _ => Err(Error::InvalidInput(format!("unknown task {s:?}"))),
        }
    }
}

/// Which samples a multi-class evaluation covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// All twelve labels, the unobfuscated class included.
    All,
    /// Obfuscated samples only, scored over the eleven obfuscation classes.
    #[default]
    #[serde(alias = "obfuscated-only")]
    ObfuscatedOnly,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::All => "all",
            Mode::ObfuscatedOnly => "obfuscated_only",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "all" => Ok(Mode::All),
            "obfuscated_only" => Ok(Mode::ObfuscatedOnly),
            _ => Err(Error::InvalidInput(format!("unknown mode {s:?}"))),
        }
    }
}

/// A task with its mode; the binary task always covers every sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClassSpace {
    pub task: Task,
    pub mode: Mode,
}

impl ClassSpace {
    pub fn new(task: Task, mode: Mode) -> Self {
        let mode = if task == Task::Binary { Mode::All } else { mode };
        ClassSpace { task, mode }
    }

    pub fn class_names(self) -> Vec<&'static str> {
        match (self.task, self.mode) {
            (Task::Binary, _) => vec!["unobfuscated", "obfuscated"],
            (Task::Multiclass, Mode::All) => Obfuscation::ALL.iter().map(|o| o.name()).collect(),
            (Task::Multiclass, Mode::ObfuscatedOnly) => Obfuscation::OBFUSCATED.iter().map(|o| o.name()).collect(),
        }
    }

    pub fn n_classes(self) -> usize {
        self.class_names().len()
    }

    /// Class index of `label`, or `None` when the space excludes it.
    pub fn class_of(self, label: Obfuscation) -> Option<usize> {
        match (self.task, self.mode) {
            (Task::Binary, _) => Some(label.is_obfuscated() as usize),
            (Task::Multiclass, Mode::All) => Some(label.index()),
            (Task::Multiclass, Mode::ObfuscatedOnly) => label.is_obfuscated().then(|| label.index() - 1),
        }
    }

    /// The samples this space covers, paired with their class indices.
    pub fn labelled<'a>(self, samples: &[&'a FunctionSample]) -> (Vec<&'a FunctionSample>, Vec<usize>) {
        samples
            .iter()
            .filter_map(|s| self.class_of(s.label()).map(|c| (*s, c)))
            .unzip()
    }
}

/// `false` for unobfuscated labels, `true` for any obfuscation.
pub fn to_binary_task(labels: &[Obfuscation]) -> Vec<bool> {
    labels.iter().map(|l| l.is_obfuscated()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: Task,
    pub mode: Mode,
    pub dataset: String,
    pub model_id: String,
    pub feature_scheme: String,
    pub dim: usize,
    /// Mean of the recalls of the classes present in the evaluated samples.
    pub balanced_accuracy: f64,
    pub class_names: Vec<String>,
    pub support: Vec<u64>,
    /// `None` for classes without support.
    pub per_class_recall: Vec<Option<f64>>,
    /// Rows are true classes, columns predicted ones.
    pub confusion: Vec<Vec<u64>>,
    /// Classes left out of the recall mean for lack of support.
    pub excluded_classes: Vec<String>,
    pub n_samples: usize,
}

impl EvalReport {
    /// Builds a report from predicted and true class indices.
    pub fn from_predictions(
        space: ClassSpace,
        predictions: &[usize],
        truth: &[usize],
        dataset: &str,
        model_id: &str,
        feature_scheme: &str,
        dim: usize,
    ) -> Result<Self> {
        let names = space.class_names();
        let confusion = confusion_matrix(predictions, truth, names.len())?;
        let recall = per_class_recall(&confusion);
        let support: Vec<u64> = confusion.iter().map(|row| row.iter().sum()).collect();
        Ok(EvalReport {
            task: space.task,
            mode: space.mode,
            dataset: dataset.to_string(),
            model_id: model_id.to_string(),
            feature_scheme: feature_scheme.to_string(),
            dim,
            balanced_accuracy: mean_present(&recall),
            class_names: names.iter().map(|s| s.to_string()).collect(),
            excluded_classes: names
                .iter()
                .zip(&support)
                .filter(|(_, &s)| s == 0)
                .map(|(n, _)| n.to_string())
                .collect(),
            support,
            per_class_recall: recall,
            confusion,
            n_samples: truth.len(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Scores `model` on `samples` under `task`/`mode`.
///
/// The model's class space fixes the confusion-matrix layout. A model trained over all
/// twelve labels may be scored obfuscated-only; the reverse is rejected.
pub fn evaluate(
    model: &TrainedModel,
    samples: &[&FunctionSample],
    task: Task,
    mode: Mode,
    dataset: &str,
) -> Result<EvalReport> {
    let requested = ClassSpace::new(task, mode);
    let space = model.class_space();
    if space.task != task {
        return Err(Error::InvalidInput(format!(
            "model was trained for the {} task, not {task}",
            space.task
        )));
    }
    if requested.mode == Mode::All && space.mode == Mode::ObfuscatedOnly {
        return Err(Error::InvalidInput(
            "model trained on obfuscated samples only cannot score unobfuscated ones; use mode obfuscated_only".into(),
        ));
    }
    let (eligible, _) = requested.labelled(samples);
    if eligible.is_empty() {
        return Err(Error::EmptyEvaluation(format!("no samples eligible for {task} / {}", requested.mode)));
    }
    let (eligible, truth) = space.labelled(&eligible);
    let predicted = model.predict(&eligible)?;
    let mut report = EvalReport::from_predictions(
        space,
        &predicted.labels,
        &truth,
        dataset,
        &model.id(),
        model.featurizer.scheme.name(),
        model.featurizer.dim(),
    )?;
    report.mode = requested.mode;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_mapping() {
        let v = to_binary_task(&[Obfuscation::None, Obfuscation::Flatten, Obfuscation::Mix1]);
        assert_eq!(v, [false, true, true]);
    }

    #[test]
    fn class_spaces() {
        let obf = ClassSpace::new(Task::Multiclass, Mode::ObfuscatedOnly);
        assert_eq!(obf.n_classes(), 11);
        assert_eq!(obf.class_of(Obfuscation::None), None);
        assert_eq!(obf.class_of(Obfuscation::EncodeArithmetic), Some(0));
        assert_eq!(ClassSpace::new(Task::Multiclass, Mode::All).n_classes(), 12);
        assert_eq!(ClassSpace::new(Task::Binary, Mode::ObfuscatedOnly).mode, Mode::All);
    }

    #[test]
    fn report_identity() {
        let space = ClassSpace::new(Task::Binary, Mode::All);
        let r = EvalReport::from_predictions(space, &[0, 1, 1, 1], &[0, 0, 1, 1], "d", "m", "graph23", 23).unwrap();
        assert_eq!(r.support, [2, 2]);
        assert!((r.balanced_accuracy - 0.75).abs() < 1e-15);
        assert!(r.excluded_classes.is_empty());
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("obfuscated-only".parse::<Mode>().unwrap(), Mode::ObfuscatedOnly);
        assert_eq!(serde_json::from_str::<Mode>("\"obfuscated-only\"").unwrap(), Mode::ObfuscatedOnly);
    }
}
