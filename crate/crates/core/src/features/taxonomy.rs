//! 27-class mnemonic taxonomy, loadable from a `mnemonic<TAB>class` table.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const N_CLASSES: usize = 27;
pub const OTHER: &str = "other";

const DEFAULT_TABLE: &str = include_str!("default_taxonomy.tsv");

/// Seven coarse instruction categories used by the graph-level vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BroadCategory {
    DataMovement,
    Arithmetic,
    Logic,
    ShiftRotate,
    ControlTransfer,
    CompareTest,
    Other,
}

impl BroadCategory {
    pub const COUNT: usize = 7;

    pub fn index(self) -> usize {
        self as usize
    }

    fn of_class(name: &str) -> Self {
        match name {
            "data_movement" | "stack" | "lea" | "float_move" | "conversion" | "string" => {
                BroadCategory::DataMovement
            }
            "arithmetic" | "extended_arithmetic" | "float_arith" | "simd_int" | "simd_float" => {
                BroadCategory::Arithmetic
            }
            "logic" | "bit_manipulation" => BroadCategory::Logic,
            "shift_rotate" => BroadCategory::ShiftRotate,
            "conditional_jump" | "unconditional_jump" | "call" | "return" | "interrupt" => {
                BroadCategory::ControlTransfer
            }
            "compare" => BroadCategory::CompareTest,
            _ => BroadCategory::Other,
        }
    }
}

/// Per-instruction roles feeding the structural slice of the semantic node features.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Roles {
    pub call_like: bool,
    pub ret_like: bool,
    pub cond_branch: bool,
    pub uncond_branch: bool,
    pub arithmetic: bool,
    pub load_store: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct MnemonicClassTaxonomy {
    classes: Vec<String>,
    mapping: BTreeMap<String, usize>,
    other: usize,
    broad: Vec<BroadCategory>,
    roles: Vec<Roles>,
}

impl Default for MnemonicClassTaxonomy {
    fn default() -> Self {
        Self::parse(DEFAULT_TABLE).expect("shipped taxonomy is valid")
    }
}

impl MnemonicClassTaxonomy {
    pub fn parse(text: &str) -> Result<Self> {
        let mut classes: Option<Vec<String>> = None;
        let mut mapping = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim_end();
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let err = |message: String| Error::Taxonomy {
                line: line_no,
                message,
            };
            match &classes {
                None => {
                    if fields[0] != "classes" {
                        return Err(err("expected `classes` header".into()));
                    }
                    let names: Vec<String> = fields[1..].iter().map(|s| s.to_string()).collect();
                    if names.len() != N_CLASSES {
                        return Err(err(format!("expected {N_CLASSES} classes, found {}", names.len())));
                    }
                    if !names.iter().any(|n| n == OTHER) {
                        return Err(err("class list must include `other`".into()));
                    }
                    let mut sorted = names.clone();
                    sorted.sort();
                    sorted.dedup();
                    if sorted.len() != names.len() {
                        return Err(err("duplicate class name".into()));
                    }
                    classes = Some(names);
                }
                Some(names) => {
                    if fields.len() != 2 {
                        return Err(err("expected `mnemonic<TAB>class`".into()));
                    }
                    let class = names
                        .iter()
                        .position(|n| n == fields[1])
                        .ok_or_else(|| err(format!("unknown class {:?}", fields[1])))?;
                    if mapping.insert(fields[0].to_ascii_lowercase(), class).is_some() {
                        return Err(err(format!("mnemonic {:?} listed twice", fields[0])));
                    }
                }
            }
        }
        let classes = classes.ok_or(Error::Taxonomy {
            line: 0,
            message: "missing `classes` header".into(),
        })?;
        let other = classes.iter().position(|c| c == OTHER).unwrap();
        let broad = classes.iter().map(|c| BroadCategory::of_class(c)).collect();
        let roles = classes
            .iter()
            .map(|c| Roles {
                call_like: c == "call",
                ret_like: c == "return",
                cond_branch: c == "conditional_jump",
                uncond_branch: c == "unconditional_jump",
                arithmetic: c == "arithmetic" || c == "extended_arithmetic",
                load_store: c == "data_movement" || c == "stack" || c == "string",
            })
            .collect();
        Ok(Self {
            classes,
            mapping,
            other,
            broad,
            roles,
        })
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    /// Class index of a mnemonic; unknown mnemonics map to `other`.
    pub fn class_of(&self, mnemonic: &str) -> usize {
        match self.mapping.get(mnemonic) {
            Some(&c) => c,
            None => self
                .mapping
                .get(&mnemonic.to_ascii_lowercase())
                .copied()
                .unwrap_or(self.other),
        }
    }

    pub fn broad_category(&self, mnemonic: &str) -> BroadCategory {
        self.broad[self.class_of(mnemonic)]
    }

    pub fn roles(&self, mnemonic: &str) -> Roles {
        self.roles[self.class_of(mnemonic)]
    }

    pub fn to_table(&self) -> String {
        let mut out = format!("classes\t{}\n", self.classes.join("\t"));
        for (m, &c) in &self.mapping {
            out.push_str(&format!("{m}\t{}\n", self.classes[c]));
        }
        out
    }
}

impl TryFrom<String> for MnemonicClassTaxonomy {
    type Error = Error;

    fn try_from(text: String) -> Result<Self> {
        Self::parse(&text)
    }
}

impl From<MnemonicClassTaxonomy> for String {
    fn from(t: MnemonicClassTaxonomy) -> String {
        t.to_table()
    }
}
