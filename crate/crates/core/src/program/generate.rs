//! Random catalog-valid programs, for fuzzing and property tests.

use rand::seq::IndexedRandom;
use rand::Rng;

use super::{ArgValue, Block, BlockProgram};
use crate::catalog::{Catalog, Connection, ParamSpec, Slot};

#[derive(Debug, Clone)]
pub struct GenOptions {
    /// Maximum nesting of bodies below `start`.
    pub max_depth: usize,
    /// Maximum statements per body.
    pub max_body: usize,
    /// Upper bound for whole-number parameters of body-bearing blocks
    /// (repeat counts), keeping unrolled timelines small.
    pub max_repeat: u32,
    /// Probability of plugging a value block into a slot that accepts one.
    pub value_block_p: f64,
}

impl Default for GenOptions {
    fn default() -> Self {
        Self {
            max_depth: 3,
            max_body: 5,
            max_repeat: 4,
            value_block_p: 0.15,
        }
    }
}

const WORDS: [&str; 12] = [
    "hello", "friend", "let's", "study", "together", "great", "job", "how", "is", "it", "going", "today",
];

pub fn random_program<R: Rng + ?Sized>(catalog: &Catalog, rng: &mut R, opts: &GenOptions) -> BlockProgram {
    let mut g = Gen { catalog, rng, opts };
    let root = catalog.root();
    let mut block = Block::new(root.id.clone());
    for p in &root.params {
        let v = g.arg(p, false, 0);
        block.args.insert(p.name.clone(), v);
    }
    for body in &root.bodies {
        let seq = g.body(0);
        block.children.insert(body.clone(), seq);
    }
    BlockProgram {
        root: block,
        seed: g.rng.random(),
        version: super::FORMAT_VERSION,
    }
}

struct Gen<'a, R: ?Sized> {
    catalog: &'a Catalog,
    rng: &'a mut R,
    opts: &'a GenOptions,
}

impl<R: Rng + ?Sized> Gen<'_, R> {
    fn body(&mut self, depth: usize) -> Vec<Block> {
        let statements: Vec<_> = self
            .catalog
            .kinds()
            .iter()
            .filter(|k| k.connects_as == Connection::Statement)
            .filter(|k| depth < self.opts.max_depth || k.bodies.is_empty())
            .collect();
        let n = self.rng.random_range(0..=self.opts.max_body);
        (0..n)
            .map(|_| {
                let kind = *statements.choose(self.rng).expect("catalog has statements");
                let mut block = Block::new(kind.id.clone());
                let capped = !kind.bodies.is_empty();
                for p in &kind.params {
                    let v = self.arg(p, capped, depth);
                    block.args.insert(p.name.clone(), v);
                }
                for body in &kind.bodies {
                    let seq = self.body(depth + 1);
                    block.children.insert(body.clone(), seq);
                }
                block
            })
            .collect()
    }

    fn arg(&mut self, param: &ParamSpec, capped: bool, depth: usize) -> ArgValue {
        match &param.slot {
            Slot::Number {
                min, max, integer, ..
            } => {
                if param.accepts_value_block && !capped && depth < 4 && self.rng.random_bool(self.opts.value_block_p) {
                    return ArgValue::Block(Box::new(self.value_block(depth + 1)));
                }
                let max = if capped {
                    max.min(f64::from(self.opts.max_repeat)).max(*min)
                } else {
                    *max
                };
                if *integer {
                    ArgValue::Number(self.rng.random_range(min.ceil() as i64..=max.floor() as i64) as f64)
                } else {
                    // Two decimals, like values typed into a block field.
                    let v: f64 = self.rng.random_range(*min..=max);
                    ArgValue::Number(((v * 100.0).round() / 100.0).clamp(*min, max))
                }
            }
            Slot::Text { max_len } => {
                let n = self.rng.random_range(0..=8);
                let mut s = (0..n)
                    .map(|_| *WORDS.choose(self.rng).unwrap())
                    .collect::<Vec<_>>()
                    .join(" ");
                s.truncate(*max_len);
                ArgValue::Text(s)
            }
            Slot::Enum { options } => ArgValue::Text(options.choose(self.rng).unwrap().clone()),
        }
    }

    fn value_block(&mut self, depth: usize) -> Block {
        let values: Vec<_> = self
            .catalog
            .kinds()
            .iter()
            .filter(|k| k.connects_as == Connection::Value)
            .collect();
        let kind = *values.choose(self.rng).expect("catalog has value kinds");
        let mut block = Block::new(kind.id.clone());
        for p in &kind.params {
            let v = self.arg(p, false, depth);
            block.args.insert(p.name.clone(), v);
        }
        block
    }
}
