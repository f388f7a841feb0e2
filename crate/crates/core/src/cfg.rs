//! Attributed control-flow graph model and its JSON-Lines interchange format.
//!
//! One line of a corpus file holds one function:
//!
//! ```text
//! {"function_id":"zlib/libz/gzerror","project":"zlib","binary":"libz","opt_level":"O0",
//!  "obfuscation":{"label":"None","obfuscator":"none"},"entry":"B0",
//!  "blocks":[{"id":"B0","insns":[{"m":"mov","nops":2},{"m":"ret","nops":0}]}],"edges":[]}
//! ```
//!
//! Two optional keys extend the format: `symbol` (written only when it cannot be derived
//! from `function_id`) and `degenerate` (written only when true). Unknown keys are ignored.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pcode;

pub const MAX_OPERANDS: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instruction {
    pub mnemonic: String,
    pub operand_count: usize,
    pub pcode_ops: Option<Vec<String>>,
}

impl Instruction {
    pub fn new(mnemonic: impl Into<String>, operand_count: usize) -> Self {
        Self {
            mnemonic: mnemonic.into(),
            operand_count,
            pcode_ops: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasicBlock {
    pub id: String,
    pub instructions: Vec<Instruction>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControlFlowGraph {
    pub blocks: Vec<BasicBlock>,
    pub edges: Vec<(String, String)>,
    pub entry: String,
}

/// Obfuscation pass identity. `None` marks an unobfuscated function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Obfuscation {
    None,
    EncodeArithmetic,
    EncodeLiterals,
    Virtualize,
    OpaquePredicates,
    Flatten,
    Split,
    Merge,
    Copy,
    Mix1,
    Mix2,
    /// Fixed-pattern instruction substitution (the OLLVM arithmetic pass).
    Substitution,
}

impl Obfuscation {
    pub const ALL: [Obfuscation; 12] = [
        Obfuscation::None,
        Obfuscation::EncodeArithmetic,
        Obfuscation::EncodeLiterals,
        Obfuscation::Virtualize,
        Obfuscation::OpaquePredicates,
        Obfuscation::Flatten,
        Obfuscation::Split,
        Obfuscation::Merge,
        Obfuscation::Copy,
        Obfuscation::Mix1,
        Obfuscation::Mix2,
        Obfuscation::Substitution,
    ];

    /// The eleven obfuscated classes, in label order.
    pub const OBFUSCATED: [Obfuscation; 11] = [
        Obfuscation::EncodeArithmetic,
        Obfuscation::EncodeLiterals,
        Obfuscation::Virtualize,
        Obfuscation::OpaquePredicates,
        Obfuscation::Flatten,
        Obfuscation::Split,
        Obfuscation::Merge,
        Obfuscation::Copy,
        Obfuscation::Mix1,
        Obfuscation::Mix2,
        Obfuscation::Substitution,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Obfuscation::None => "None",
            Obfuscation::EncodeArithmetic => "EncodeArithmetic",
            Obfuscation::EncodeLiterals => "EncodeLiterals",
            Obfuscation::Virtualize => "Virtualize",
            Obfuscation::OpaquePredicates => "OpaquePredicates",
            Obfuscation::Flatten => "Flatten",
            Obfuscation::Split => "Split",
            Obfuscation::Merge => "Merge",
            Obfuscation::Copy => "Copy",
            Obfuscation::Mix1 => "Mix1",
            Obfuscation::Mix2 => "Mix2",
            Obfuscation::Substitution => "Substitution",
        }
    }

    pub fn is_obfuscated(self) -> bool {
        self != Obfuscation::None
    }

    /// Position in [`Obfuscation::ALL`].
    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&o| o == self).unwrap()
    }
}

impl fmt::Display for Obfuscation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Obfuscation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        let found = match lower.as_str() {
            "cff" | "flattening" => Some(Obfuscation::Flatten),
            "mba" => Some(Obfuscation::EncodeArithmetic),
            "sub" => Some(Obfuscation::Substitution),
            _ => Self::ALL
                .iter()
                .copied()
                .find(|o| o.name().to_ascii_lowercase() == lower),
        };
        found.ok_or_else(|| Error::InvalidInput(format!("unknown obfuscation label {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Obfuscator {
    None,
    Tigress,
    Ollvm,
    Synthetic,
}

impl Obfuscator {
    pub fn name(self) -> &'static str {
        match self {
            Obfuscator::None => "none",
            Obfuscator::Tigress => "tigress",
            Obfuscator::Ollvm => "ollvm",
            Obfuscator::Synthetic => "synthetic",
        }
    }
}

impl FromStr for Obfuscator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Obfuscator::None),
            "tigress" => Ok(Obfuscator::Tigress),
            "ollvm" => Ok(Obfuscator::Ollvm),
            "synthetic" => Ok(Obfuscator::Synthetic),
            _ => Err(Error::InvalidInput(format!("unknown obfuscator {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ObfuscationLabel {
    pub value: Obfuscation,
    pub obfuscator: Obfuscator,
}

impl ObfuscationLabel {
    pub const NONE: ObfuscationLabel = ObfuscationLabel {
        value: Obfuscation::None,
        obfuscator: Obfuscator::None,
    };

    pub fn synthetic(value: Obfuscation) -> Self {
        Self {
            value,
            obfuscator: if value == Obfuscation::None {
                Obfuscator::None
            } else {
                Obfuscator::Synthetic
            },
        }
    }

    fn violation(&self) -> Option<String> {
        match (self.value, self.obfuscator) {
            (Obfuscation::None, Obfuscator::Tigress | Obfuscator::Ollvm) => Some(format!(
                "label None with obfuscator {}",
                self.obfuscator.name()
            )),
            (v, Obfuscator::None) if v != Obfuscation::None => {
                Some(format!("label {v} with obfuscator none"))
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OptLevel {
    O0,
    O2,
}

impl OptLevel {
    pub fn name(self) -> &'static str {
        match self {
            OptLevel::O0 => "O0",
            OptLevel::O2 => "O2",
        }
    }
}

impl FromStr for OptLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "O0" => Ok(OptLevel::O0),
            "O2" => Ok(OptLevel::O2),
            _ => Err(Error::InvalidInput(format!("opt_level {s:?} is not O0 or O2"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionSample {
    pub function_id: String,
    /// Base-function symbol shared by a function and all its obfuscated variants.
    pub symbol: String,
    pub project: String,
    pub binary: String,
    pub opt_level: OptLevel,
    pub obfuscation: ObfuscationLabel,
    pub cfg: ControlFlowGraph,
    /// Set when an obfuscating transform could not apply and passed its input through.
    pub degenerate: bool,
}

impl FunctionSample {
    pub fn label(&self) -> Obfuscation {
        self.obfuscation.value
    }

    /// Key grouping a base function with its obfuscated variants.
    pub fn group_key(&self) -> (String, String) {
        (self.project.clone(), self.symbol.clone())
    }
}

/// Symbol implied by a function id of the form `project/binary/symbol[@label]`.
pub fn derive_symbol(function_id: &str) -> &str {
    let tail = function_id.rsplit('/').next().unwrap_or(function_id);
    tail.split('@').next().unwrap_or(tail)
}

/// Checks every [`ControlFlowGraph`] and [`BasicBlock`] invariant. An empty list means valid.
pub fn validate_cfg(cfg: &ControlFlowGraph) -> Vec<String> {
    let mut violations = Vec::new();
    if cfg.blocks.is_empty() {
        violations.push("cfg has no blocks".to_string());
    }
    let mut ids = HashSet::new();
    for block in &cfg.blocks {
        if !ids.insert(block.id.as_str()) {
            violations.push(format!("block {}: duplicate block_id", block.id));
        }
        if block.instructions.is_empty() {
            violations.push(format!("block {}: empty instruction list", block.id));
        }
        for (i, insn) in block.instructions.iter().enumerate() {
            if insn.mnemonic.is_empty() {
                violations.push(format!("block {}: instruction {i} has empty mnemonic", block.id));
            } else if insn.mnemonic.chars().any(char::is_whitespace) {
                violations.push(format!(
                    "block {}: instruction {i} mnemonic {:?} contains whitespace",
                    block.id, insn.mnemonic
                ));
            }
            if insn.operand_count > MAX_OPERANDS {
                violations.push(format!(
                    "block {}: instruction {i} operand_count {} exceeds {MAX_OPERANDS}",
                    block.id, insn.operand_count
                ));
            }
        }
    }
    let mut seen_edges = HashSet::new();
    for (src, dst) in &cfg.edges {
        for end in [src, dst] {
            if !ids.contains(end.as_str()) {
                violations.push(format!("edge {src}->{dst}: unknown block {end}"));
            }
        }
        if !seen_edges.insert((src.as_str(), dst.as_str())) {
            violations.push(format!("edge {src}->{dst}: duplicate edge"));
        }
    }
    if !ids.contains(cfg.entry.as_str()) {
        violations.push(format!("entry {}: unknown block", cfg.entry));
    }
    violations
}

/// Index-based adjacency view of a valid CFG. Node `i` is `cfg.blocks[i]`;
/// successor lists follow edge-list order.
#[derive(Debug, Clone)]
pub struct CfgIndex {
    pub succ: Vec<Vec<usize>>,
    pub pred: Vec<Vec<usize>>,
    pub entry: usize,
}

impl CfgIndex {
    pub fn new(cfg: &ControlFlowGraph) -> Self {
        let pos: HashMap<&str, usize> = cfg
            .blocks
            .iter()
            .enumerate()
            .map(|(i, b)| (b.id.as_str(), i))
            .collect();
        let n = cfg.blocks.len();
        let mut succ = vec![Vec::new(); n];
        let mut pred = vec![Vec::new(); n];
        for (s, d) in &cfg.edges {
            let (s, d) = (pos[s.as_str()], pos[d.as_str()]);
            succ[s].push(d);
            pred[d].push(s);
        }
        Self {
            succ,
            pred,
            entry: pos[cfg.entry.as_str()],
        }
    }

    pub fn len(&self) -> usize {
        self.succ.len()
    }

    pub fn is_empty(&self) -> bool {
        self.succ.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.succ.iter().map(Vec::len).sum()
    }
}

// ---------------------------------------------------------------------------
// Interchange records

#[derive(Serialize, Deserialize)]
struct InsnRecord {
    m: String,
    nops: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pcode: Option<Vec<String>>,
}

#[derive(Serialize, Deserialize)]
struct BlockRecord {
    id: String,
    insns: Vec<InsnRecord>,
}

#[derive(Serialize, Deserialize)]
struct LabelRecord {
    label: String,
    obfuscator: String,
}

#[derive(Serialize, Deserialize)]
struct FunctionRecord {
    function_id: String,
    project: String,
    binary: String,
    opt_level: String,
    obfuscation: LabelRecord,
    entry: String,
    blocks: Vec<BlockRecord>,
    edges: Vec<(String, String)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    symbol: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    degenerate: bool,
}

impl FunctionRecord {
    fn into_sample(self) -> std::result::Result<FunctionSample, Vec<String>> {
        let mut violations = Vec::new();
        let opt_level = OptLevel::from_str(&self.opt_level).map_err(|e| violations.push(e.to_string()));
        let value = Obfuscation::from_str(&self.obfuscation.label).map_err(|e| violations.push(e.to_string()));
        let obfuscator =
            Obfuscator::from_str(&self.obfuscation.obfuscator).map_err(|e| violations.push(e.to_string()));
        let symbol = self
            .symbol
            .unwrap_or_else(|| derive_symbol(&self.function_id).to_string());
        let cfg = ControlFlowGraph {
            blocks: self
                .blocks
                .into_iter()
                .map(|b| BasicBlock {
                    id: b.id,
                    instructions: b
                        .insns
                        .into_iter()
                        .map(|i| Instruction {
                            mnemonic: i.m,
                            operand_count: i.nops,
                            pcode_ops: i.pcode,
                        })
                        .collect(),
                })
                .collect(),
            edges: self.edges,
            entry: self.entry,
        };
        violations.extend(validate_cfg(&cfg));
        let (Ok(opt_level), Ok(value), Ok(obfuscator)) = (opt_level, value, obfuscator) else {
            return Err(violations);
        };
        let obfuscation = ObfuscationLabel { value, obfuscator };
        violations.extend(obfuscation.violation());
        if !violations.is_empty() {
            return Err(violations);
        }
        Ok(FunctionSample {
            function_id: self.function_id,
            symbol,
            project: self.project,
            binary: self.binary,
            opt_level,
            obfuscation,
            cfg,
            degenerate: self.degenerate,
        })
    }

    fn from_sample(s: &FunctionSample) -> Self {
        let symbol = (derive_symbol(&s.function_id) != s.symbol).then(|| s.symbol.clone());
        Self {
            function_id: s.function_id.clone(),
            project: s.project.clone(),
            binary: s.binary.clone(),
            opt_level: s.opt_level.name().to_string(),
            obfuscation: LabelRecord {
                label: s.obfuscation.value.name().to_string(),
                obfuscator: s.obfuscation.obfuscator.name().to_string(),
            },
            entry: s.cfg.entry.clone(),
            blocks: s
                .cfg
                .blocks
                .iter()
                .map(|b| BlockRecord {
                    id: b.id.clone(),
                    insns: b
                        .instructions
                        .iter()
                        .map(|i| InsnRecord {
                            m: i.mnemonic.clone(),
                            nops: i.operand_count,
                            pcode: i.pcode_ops.clone(),
                        })
                        .collect(),
                })
                .collect(),
            edges: s.cfg.edges.clone(),
            symbol,
            degenerate: s.degenerate,
        }
    }
}

/// Parses one interchange line. `line` is only used for error reporting.
pub fn parse_record(text: &str, line: usize) -> Result<FunctionSample> {
    let record: FunctionRecord = serde_json::from_str(text).map_err(|e| Error::Parse {
        line,
        message: e.to_string(),
    })?;
    record
        .into_sample()
        .map_err(|violations| Error::Validation { line, violations })
}

/// Reads a JSON-Lines corpus. Blank lines are skipped; every other line must be a valid record.
pub fn parse_corpus<R: BufRead>(reader: R) -> Result<Vec<FunctionSample>> {
    let mut samples = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let text = line?;
        if text.trim().is_empty() {
            continue;
        }
        let sample = parse_record(&text, line_no)?;
        if seen.insert(sample.function_id.clone(), line_no).is_some() {
            return Err(Error::DuplicateFunctionId {
                line: line_no,
                id: sample.function_id,
            });
        }
        samples.push(sample);
    }
    Ok(samples)
}

pub fn read_corpus(path: impl AsRef<std::path::Path>) -> Result<Vec<FunctionSample>> {
    let file = std::fs::File::open(path)?;
    parse_corpus(std::io::BufReader::new(file))
}

pub fn to_record_line(sample: &FunctionSample) -> String {
    serde_json::to_string(&FunctionRecord::from_sample(sample)).expect("records always serialize")
}

pub fn write_corpus<W: Write>(mut out: W, corpus: &[FunctionSample]) -> Result<()> {
    for sample in corpus {
        writeln!(out, "{}", to_record_line(sample))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Vocabulary

/// Token list ranked by total occurrence count (descending, ties by token).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "RawVocabulary")]
pub struct Vocabulary {
    pub tokens: Vec<String>,
    pub counts: Vec<u64>,
    /// Number of functions containing each token.
    pub doc_freq: Vec<u64>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

#[derive(Deserialize)]
struct RawVocabulary {
    tokens: Vec<String>,
    counts: Vec<u64>,
    doc_freq: Vec<u64>,
}

impl From<RawVocabulary> for Vocabulary {
    fn from(raw: RawVocabulary) -> Self {
        let mut vocab = Vocabulary {
            tokens: raw.tokens,
            counts: raw.counts,
            doc_freq: raw.doc_freq,
            index: HashMap::new(),
        };
        vocab.rebuild_index();
        vocab
    }
}

impl Vocabulary {
    fn from_tallies(tallies: BTreeMap<String, (u64, u64)>, max_size: Option<usize>) -> Self {
        let mut ranked: Vec<(String, u64, u64)> =
            tallies.into_iter().map(|(t, (c, d))| (t, c, d)).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        if let Some(max) = max_size {
            ranked.truncate(max);
        }
        let mut vocab = Vocabulary {
            tokens: ranked.iter().map(|r| r.0.clone()).collect(),
            counts: ranked.iter().map(|r| r.1).collect(),
            doc_freq: ranked.iter().map(|r| r.2).collect(),
            index: HashMap::new(),
        };
        vocab.rebuild_index();
        vocab
    }

    fn rebuild_index(&mut self) {
        self.index = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MnemonicVocabulary {
    pub assembly: Vocabulary,
    pub pcode: Vocabulary,
}

fn tally<'a, I>(corpus: &[&FunctionSample], tokens_of: I) -> BTreeMap<String, (u64, u64)>
where
    I: Fn(&FunctionSample) -> Vec<std::borrow::Cow<'a, str>>,
{
    let mut tallies: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    for sample in corpus {
        let mut in_doc = HashSet::new();
        for tok in tokens_of(sample) {
            let entry = tallies.entry(tok.to_string()).or_default();
            entry.0 += 1;
            if in_doc.insert(tok) {
                entry.1 += 1;
            }
        }
    }
    tallies
}

/// Ranks assembly and Pcode tokens over a corpus, keeping at most `max_size` of each.
pub fn build_vocabulary(corpus: &[&FunctionSample], max_size: Option<usize>) -> Result<MnemonicVocabulary> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let assembly = tally(corpus, |s| {
        s.cfg
            .blocks
            .iter()
            .flat_map(|b| &b.instructions)
            .map(|i| std::borrow::Cow::Owned(i.mnemonic.clone()))
            .collect()
    });
    let pcode = tally(corpus, |s| {
        s.cfg
            .blocks
            .iter()
            .flat_map(|b| &b.instructions)
            .flat_map(|i| pcode::lift(i).into_iter().map(|op| std::borrow::Cow::Owned(op.into_owned())))
            .collect()
    });
    Ok(MnemonicVocabulary {
        assembly: Vocabulary::from_tallies(assembly, max_size),
        pcode: Vocabulary::from_tallies(pcode, max_size),
    })
}
