//! Block programs: the data model, the connection-rule validator, the
//! canonical wire codec, and lowering to an [`ActionTimeline`].

mod codec;
pub mod generate;
mod lower;
mod validate;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use codec::{decode, encode, MalformedProgram};
pub use lower::{
    lower, Action, ActionTimeline, ArmSide, LoweringError, RangeError, TimedAction, DEFAULT_SPEECH_RATE_WPS,
    INSTANT_DURATION,
};
pub use validate::{validate, ValidationReport, Violation, ViolationKind};

pub const FORMAT_VERSION: u32 = 1;

/// A parameter value: a literal or a plugged-in value block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ArgValue {
    Number(f64),
    Text(String),
    Block(Box<Block>),
}

impl From<f64> for ArgValue {
    fn from(v: f64) -> Self {
        ArgValue::Number(v)
    }
}

impl From<&str> for ArgValue {
    fn from(v: &str) -> Self {
        ArgValue::Text(v.to_owned())
    }
}

impl From<Block> for ArgValue {
    fn from(b: Block) -> Self {
        ArgValue::Block(Box::new(b))
    }
}

// Fields are declared in key order so serialization is already sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Block {
    #[serde(default)]
    pub args: BTreeMap<String, ArgValue>,
    #[serde(default)]
    pub children: BTreeMap<String, Vec<Block>>,
    pub kind: String,
}

impl Block {
    pub fn new(kind: impl Into<String>) -> Self {
        Self {
            args: BTreeMap::new(),
            children: BTreeMap::new(),
            kind: kind.into(),
        }
    }

    pub fn arg(mut self, name: &str, value: impl Into<ArgValue>) -> Self {
        self.args.insert(name.to_owned(), value.into());
        self
    }

    pub fn body(mut self, blocks: Vec<Block>) -> Self {
        self.children.insert("body".to_owned(), blocks);
        self
    }

    /// Statements of the named body; missing bodies read as empty.
    pub fn seq(&self, name: &str) -> &[Block] {
        self.children.get(name).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Number of blocks in this subtree, value blocks included.
    pub fn size(&self) -> usize {
        1 + self
            .args
            .values()
            .map(|a| match a {
                ArgValue::Block(b) => b.size(),
                _ => 0,
            })
            .sum::<usize>()
            + self
                .children
                .values()
                .flatten()
                .map(Block::size)
                .sum::<usize>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockProgram {
    pub root: Block,
    pub seed: u64,
    pub version: u32,
}

impl BlockProgram {
    /// A `start` block holding `body`.
    pub fn new(body: Vec<Block>) -> Self {
        Self {
            root: Block::new("start").body(body),
            seed: 0,
            version: FORMAT_VERSION,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Every block kind used anywhere in the program.
    pub fn kinds_used(&self) -> std::collections::BTreeSet<&str> {
        fn walk<'a>(b: &'a Block, out: &mut std::collections::BTreeSet<&'a str>) {
            out.insert(b.kind.as_str());
            for a in b.args.values() {
                if let ArgValue::Block(inner) = a {
                    walk(inner, out);
                }
            }
            for child in b.children.values().flatten() {
                walk(child, out);
            }
        }
        let mut out = Default::default();
        walk(&self.root, &mut out);
        out
    }
}
