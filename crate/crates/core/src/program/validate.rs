use std::fmt;

use serde::Serialize;

use super::{ArgValue, Block, BlockProgram, FORMAT_VERSION};
use crate::catalog::{Catalog, Connection, ParamSpec, Slot};

/// One broken rule, located by a slash path from the program root
/// (`/root/body/0/args/text`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub path: String,
    #[serde(flatten)]
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "code", rename_all = "snake_case")]
pub enum ViolationKind {
    UnsupportedVersion { found: u32 },
    UnknownKind { kind: String },
    /// Block placed where its connection type does not fit (a value block
    /// in a statement sequence, a second root, ...).
    WrongConnection { expected: Connection, found: Connection },
    MissingArg { name: String },
    UnexpectedArg { name: String },
    TypeMismatch { expected: &'static str },
    NotFinite,
    OutOfRange { value: f64, min: f64, max: f64 },
    NotInteger { value: f64 },
    TextTooLong { len: usize, max_len: usize },
    NotAnOption { value: String, options: Vec<String> },
    /// A block was plugged into a slot that only takes literals.
    ValueBlockNotAccepted,
    UnknownBody { name: String },
}

impl ViolationKind {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            ViolationKind::UnsupportedVersion { .. } => "unsupported_version",
            ViolationKind::UnknownKind { .. } => "unknown_kind",
            ViolationKind::WrongConnection { .. } => "wrong_connection",
            ViolationKind::MissingArg { .. } => "missing_arg",
            ViolationKind::UnexpectedArg { .. } => "unexpected_arg",
            ViolationKind::TypeMismatch { .. } => "type_mismatch",
            ViolationKind::NotFinite => "not_finite",
            ViolationKind::OutOfRange { .. } => "out_of_range",
            ViolationKind::NotInteger { .. } => "not_integer",
            ViolationKind::TextTooLong { .. } => "text_too_long",
            ViolationKind::NotAnOption { .. } => "not_an_option",
            ViolationKind::ValueBlockNotAccepted => "value_block_not_accepted",
            ViolationKind::UnknownBody { .. } => "unknown_body",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use ViolationKind::*;
        let label = self.kind.code().replace('_', " ");
        write!(f, "{label} at {}", self.path)?;
        match &self.kind {
            UnsupportedVersion { found } => write!(f, ": version {found}"),
            UnknownKind { kind } => write!(f, ": `{kind}`"),
            WrongConnection { expected, found } => {
                write!(f, ": expected a {expected:?} block, found {found:?}")
            }
            MissingArg { name } | UnexpectedArg { name } | UnknownBody { name } => {
                write!(f, ": `{name}`")
            }
            TypeMismatch { expected } => write!(f, ": expected {expected}"),
            OutOfRange { value, min, max } => write!(f, ": {value} not in {min}..{max}"),
            NotInteger { value } => write!(f, ": {value}"),
            TextTooLong { len, max_len } => write!(f, ": {len} > {max_len} characters"),
            NotAnOption { value, options } => {
                write!(f, ": `{value}` not one of {}", options.join(", "))
            }
            NotFinite | ValueBlockNotAccepted => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("\n")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Check a program against the catalog's connection and parameter rules.
///
/// Every violation is reported, in depth-first order. An empty report means
/// the program can be lowered.
pub fn validate(program: &BlockProgram, catalog: &Catalog) -> ValidationReport {
    let mut v = Validator {
        catalog,
        out: Vec::new(),
    };
    if program.version != FORMAT_VERSION {
        v.push("/version".into(), ViolationKind::UnsupportedVersion {
            found: program.version,
        });
    }
    v.block(&program.root, "/root".into(), Connection::Root);
    ValidationReport { violations: v.out }
}

struct Validator<'a> {
    catalog: &'a Catalog,
    out: Vec<Violation>,
}

impl Validator<'_> {
    fn push(&mut self, path: String, kind: ViolationKind) {
        self.out.push(Violation { path, kind });
    }

    fn block(&mut self, block: &Block, path: String, expected: Connection) {
        let Some(kind) = self.catalog.get(&block.kind) else {
            self.push(path, ViolationKind::UnknownKind {
                kind: block.kind.clone(),
            });
            return;
        };
        if kind.connects_as != expected {
            self.push(path.clone(), ViolationKind::WrongConnection {
                expected,
                found: kind.connects_as,
            });
        }
        for param in &kind.params {
            let arg_path = format!("{path}/args/{}", param.name);
            match block.args.get(&param.name) {
                None => self.push(arg_path, ViolationKind::MissingArg {
                    name: param.name.clone(),
                }),
                Some(value) => self.arg(value, param, arg_path),
            }
        }
        for name in block.args.keys() {
            if kind.param(name).is_none() {
                self.push(format!("{path}/args/{name}"), ViolationKind::UnexpectedArg {
                    name: name.clone(),
                });
            }
        }
        for (name, seq) in &block.children {
            if !kind.bodies.contains(name) {
                self.push(format!("{path}/{name}"), ViolationKind::UnknownBody {
                    name: name.clone(),
                });
                continue;
            }
            for (i, child) in seq.iter().enumerate() {
                self.block(child, format!("{path}/{name}/{i}"), Connection::Statement);
            }
        }
    }

    fn arg(&mut self, value: &ArgValue, param: &ParamSpec, path: String) {
        match (value, &param.slot) {
            (
                ArgValue::Number(v),
                Slot::Number {
                    min, max, integer, ..
                },
            ) => {
                if !v.is_finite() {
                    self.push(path, ViolationKind::NotFinite);
                } else if v < min || v > max {
                    self.push(path, ViolationKind::OutOfRange {
                        value: *v,
                        min: *min,
                        max: *max,
                    });
                } else if *integer && v.fract() != 0.0 {
                    self.push(path, ViolationKind::NotInteger { value: *v });
                }
            }
            (ArgValue::Text(s), Slot::Text { max_len }) => {
                let len = s.chars().count();
                if len > *max_len {
                    self.push(path, ViolationKind::TextTooLong {
                        len,
                        max_len: *max_len,
                    });
                }
            }
            (ArgValue::Text(s), Slot::Enum { options }) => {
                if !options.contains(s) {
                    self.push(path, ViolationKind::NotAnOption {
                        value: s.clone(),
                        options: options.clone(),
                    });
                }
            }
            (ArgValue::Block(inner), Slot::Number { .. }) if param.accepts_value_block => {
                self.block(inner, path, Connection::Value);
            }
            (ArgValue::Block(_), _) => self.push(path, ViolationKind::ValueBlockNotAccepted),
            (_, slot) => self.push(path, ViolationKind::TypeMismatch {
                expected: slot.type_name(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::builtin_catalog;

    fn check(program: &BlockProgram) -> Vec<(String, &'static str)> {
        let (catalog, _) = builtin_catalog();
        validate(program, &catalog)
            .violations
            .iter()
            .map(|v| (v.path.clone(), v.kind.code()))
            .collect()
    }

    fn one(path: &str, code: &'static str) -> Vec<(String, &'static str)> {
        vec![(path.to_owned(), code)]
    }

    #[test]
    fn empty_start_is_valid() {
        assert!(check(&BlockProgram::new(vec![])).is_empty());
        let mut bare = BlockProgram::new(vec![]);
        bare.root.children.clear();
        assert!(check(&bare).is_empty());
    }

    #[test]
    fn hello_is_valid() {
        let p = BlockProgram::new(vec![Block::new("speak").arg("text", "Hello!")]);
        assert!(check(&p).is_empty());
    }

    #[test]
    fn unknown_kind_reports_path() {
        let (catalog, _) = builtin_catalog();
        let p = BlockProgram::new(vec![Block::new("set_timer")]);
        let report = validate(&p, &catalog);
        assert_eq!(report.violations.len(), 1);
        assert!(report.violations[0]
            .to_string()
            .starts_with("unknown kind at /root/body/0"));
    }

    #[test]
    fn version_and_root_checks() {
        let mut p = BlockProgram::new(vec![]);
        p.version = 2;
        assert_eq!(check(&p), one("/version", "unsupported_version"));

        let mut p = BlockProgram::new(vec![]);
        p.root = Block::new("wait").arg("seconds", 1.0);
        assert_eq!(check(&p), one("/root", "wrong_connection"));

        let p = BlockProgram::new(vec![Block::new("start")]);
        assert_eq!(check(&p), one("/root/body/0", "wrong_connection"));
    }

    #[test]
    fn value_block_cannot_be_a_statement() {
        let p = BlockProgram::new(vec![Block::new("number").arg("value", 3.0)]);
        assert_eq!(check(&p), one("/root/body/0", "wrong_connection"));
    }

    #[test]
    fn statement_block_cannot_be_plugged() {
        let p = BlockProgram::new(vec![Block::new("wait").arg("seconds", Block::new("speak").arg("text", "x"))]);
        assert_eq!(check(&p), one("/root/body/0/args/seconds", "wrong_connection"));
    }

    #[test]
    fn value_block_only_in_pluggable_slots() {
        let p = BlockProgram::new(vec![Block::new("speak").arg("text", Block::new("number").arg("value", 1.0))]);
        assert_eq!(check(&p), one("/root/body/0/args/text", "value_block_not_accepted"));
        let p = BlockProgram::new(vec![Block::new("wait").arg("seconds", Block::new("number").arg("value", 1.0))]);
        assert!(check(&p).is_empty());
    }

    #[test]
    fn arg_set_must_match_params() {
        let p = BlockProgram::new(vec![Block::new("set_led").arg("red", 1.0).arg("green", 2.0).arg("alpha", 3.0)]);
        assert_eq!(
            check(&p),
            vec![
                ("/root/body/0/args/blue".to_owned(), "missing_arg"),
                ("/root/body/0/args/alpha".to_owned(), "unexpected_arg"),
            ]
        );
    }

    #[test]
    fn literal_checks() {
        let led = |r: f64| BlockProgram::new(vec![Block::new("set_led").arg("red", r).arg("green", 0.0).arg("blue", 0.0)]);
        assert_eq!(check(&led(256.0)), one("/root/body/0/args/red", "out_of_range"));
        assert_eq!(check(&led(1.5)), one("/root/body/0/args/red", "not_integer"));
        assert_eq!(check(&led(f64::NAN)), one("/root/body/0/args/red", "not_finite"));
        assert!(check(&led(255.0)).is_empty());

        let long = "a".repeat(501);
        let p = BlockProgram::new(vec![Block::new("speak").arg("text", long.as_str())]);
        assert_eq!(check(&p), one("/root/body/0/args/text", "text_too_long"));

        let p = BlockProgram::new(vec![Block::new("set_face").arg("expression", "confused")]);
        assert_eq!(check(&p), one("/root/body/0/args/expression", "not_an_option"));

        let p = BlockProgram::new(vec![Block::new("speak").arg("text", 4.0)]);
        assert_eq!(check(&p), one("/root/body/0/args/text", "type_mismatch"));
    }

    #[test]
    fn repeat_bodies_are_walked() {
        let p = BlockProgram::new(vec![Block::new("repeat")
            .arg("count", 3.0)
            .body(vec![Block::new("wait").arg("seconds", 2.0), Block::new("hourly_alarm")])]);
        assert_eq!(check(&p), one("/root/body/0/body/1", "unknown_kind"));

        let mut wait = Block::new("wait").arg("seconds", 1.0);
        wait.children.insert("body".into(), vec![]);
        let p = BlockProgram::new(vec![wait]);
        assert_eq!(check(&p), one("/root/body/0/body", "unknown_body"));
    }
}
