use super::BlockProgram;

/// The input could not be read as a program document at all. Distinct from
/// validation violations, which describe well-formed but illegal programs.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed program: {reason}")]
pub struct MalformedProgram {
    pub reason: String,
}

/// Canonical encoding: compact JSON with keys in sorted order.
///
/// Map keys are `BTreeMap`s and struct fields are declared alphabetically, so
/// equal programs always produce identical bytes.
pub fn encode(program: &BlockProgram) -> Vec<u8> {
    serde_json::to_vec(program).expect("program with finite numbers serializes")
}

pub fn decode(bytes: &[u8]) -> Result<BlockProgram, MalformedProgram> {
    serde_json::from_slice(bytes).map_err(|e| MalformedProgram {
        reason: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::Block;

    #[test]
    fn empty_program_round_trips_byte_identical() {
        let p = BlockProgram::new(vec![]);
        let bytes = encode(&p);
        assert_eq!(
            std::str::from_utf8(&bytes).unwrap(),
            r#"{"root":{"args":{},"children":{"body":[]},"kind":"start"},"seed":0,"version":1}"#
        );
        let back = decode(&bytes).unwrap();
        assert_eq!(back, p);
        assert_eq!(encode(&back), bytes);
    }

    #[test]
    fn nested_value_block_round_trips() {
        let p = BlockProgram::new(vec![Block::new("set_led")
            .arg("red", Block::new("random_int").arg("min", 0.0).arg("max", 255.0))
            .arg("green", 10.0)
            .arg("blue", 0.5)])
        .with_seed(7);
        assert_eq!(decode(&encode(&p)).unwrap(), p);
    }

    #[test]
    fn truncated_input_is_malformed() {
        let bytes = encode(&BlockProgram::new(vec![Block::new("speak").arg("text", "hi")]));
        let err = decode(&bytes[..bytes.len() / 2]).unwrap_err();
        assert!(err.reason.contains("EOF"), "{}", err.reason);
    }

    #[test]
    fn shape_errors_are_malformed() {
        assert!(decode(b"[]").is_err());
        assert!(decode(br#"{"root":{"kind":"start"},"seed":0}"#).is_err());
        assert!(decode(br#"{"root":{"kind":"start","colour":1},"seed":0,"version":1}"#).is_err());
        assert!(decode(br#"{"root":{"kind":"start","args":{"x":[1]}},"seed":0,"version":1}"#).is_err());
        assert!(decode(br#"{"root":{"kind":"start"},"seed":-1,"version":1}"#).is_err());
    }

    #[test]
    fn unknown_kinds_decode_and_are_left_to_the_validator() {
        let p = decode(br#"{"root":{"kind":"start","children":{"body":[{"kind":"set_timer"}]}},"seed":0,"version":1}"#)
            .unwrap();
        assert_eq!(p.root.seq("body")[0].kind, "set_timer");
    }

    #[test]
    fn integer_literals_decode_as_numbers() {
        let p = decode(br#"{"root":{"kind":"start","children":{"body":[{"kind":"wait","args":{"seconds":2}}]}},"seed":3,"version":1}"#)
            .unwrap();
        assert_eq!(
            p.root.seq("body")[0].args["seconds"],
            crate::program::ArgValue::Number(2.0)
        );
    }
}
