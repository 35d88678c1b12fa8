use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use storybot_core::catalog::builtin_catalog;
use storybot_core::program::generate::{random_program, GenOptions};
use storybot_core::program::{decode, encode, lower, Block, BlockProgram};
use storybot_core::simulator::{self, run_with_tick};
use storybot_testkit as oracle;

fn program_from_seed(seed: u64) -> BlockProgram {
    let (catalog, _) = builtin_catalog();
    random_program(&catalog, &mut ChaCha8Rng::seed_from_u64(seed), &GenOptions::default())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn encode_decode_round_trips(seed in any::<u64>()) {
        let p = program_from_seed(seed);
        let bytes = encode(&p);
        let back = decode(&bytes).unwrap();
        prop_assert_eq!(&back, &p);
        prop_assert_eq!(encode(&back), bytes);
    }

    #[test]
    fn validator_matches_oracle(seed in any::<u64>(), mutate in any::<bool>()) {
        let (catalog, _) = builtin_catalog();
        let p = program_from_seed(seed);
        let mut doc: serde_json::Value = serde_json::from_slice(&encode(&p)).unwrap();
        if mutate {
            doc = oracle::mutate_invalid(&doc, &catalog, &mut ChaCha8Rng::seed_from_u64(seed ^ 0x5eed));
        }
        let program = decode(doc.to_string().as_bytes()).unwrap();
        let expected = oracle::oracle_violations(&doc, &catalog);
        prop_assert_eq!(oracle::library_violations(&program, &catalog), expected.clone());
        prop_assert_eq!(expected.is_empty(), !mutate);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn lowering_is_deterministic_and_well_formed(seed in any::<u64>()) {
        let (catalog, _) = builtin_catalog();
        let p = program_from_seed(seed);
        let a = lower(&p, &catalog, 2.5).unwrap();
        let b = lower(&p, &catalog, 2.5).unwrap();
        prop_assert_eq!(a.to_json(), b.to_json());
        prop_assert!(a.check().is_ok());
        for action in a.iter() {
            prop_assert!(action.check_ranges().is_ok(), "{:?}", action);
        }
        let doc: serde_json::Value = serde_json::from_slice(&encode(&p)).unwrap();
        if let Some(n) = oracle::closed_form_count(&doc) {
            prop_assert_eq!(a.len() as u64, n);
        }
        if let Some(total) = oracle::closed_form_total(&doc, 2.5) {
            prop_assert!((a.total_duration - total).abs() < 1e-9, "{} vs {}", a.total_duration, total);
        }
    }

    #[test]
    fn repeat_multiplies_body(seed in any::<u64>(), n in 1u32..=10) {
        let (catalog, _) = builtin_catalog();
        let body = program_from_seed(seed).root.seq("body").to_vec();
        let once = lower(&BlockProgram::new(body.clone()).with_seed(seed), &catalog, 2.5).unwrap();
        let repeated = BlockProgram::new(vec![Block::new("repeat").arg("count", f64::from(n)).body(body)]).with_seed(seed);
        let many = lower(&repeated, &catalog, 2.5).unwrap();
        prop_assert_eq!(many.len(), n as usize * once.len());
        prop_assert!((many.total_duration - f64::from(n) * once.total_duration).abs() < 1e-9);
    }

    #[test]
    fn simulator_properties(seed in any::<u64>()) {
        let (catalog, _) = builtin_catalog();
        let t = lower(&program_from_seed(seed), &catalog, 2.5).unwrap();
        let a = simulator::run(&t).unwrap();
        prop_assert_eq!(a.to_json(), simulator::run(&t).unwrap().to_json());
        prop_assert_eq!(a.final_state.clock, t.total_duration);
        prop_assert!(a.frames.windows(2).all(|w| w[0].clock < w[1].clock));
        for f in &a.frames {
            prop_assert!(f.check().is_ok(), "{:?}", f);
        }
        let actions: Vec<_> = t.iter().cloned().collect();
        prop_assert_eq!(&a.final_state, &oracle::unsampled_final(&actions));
        for tick in [0.05, 0.37, 2.0] {
            prop_assert_eq!(&run_with_tick(&t, tick).unwrap().final_state, &a.final_state);
        }
    }
}

#[test]
fn speak_duration_matches_word_count_oracle() {
    let (catalog, _) = builtin_catalog();
    for (text, rate) in [
        ("Hello how are you today", 2.5),
        ("Hi", 2.5),
        ("one two three four five six seven eight nine ten eleven", 2.5),
        ("  spaced   out\twords ", 1.0),
        ("a b c", 3.0),
    ] {
        let t = lower(&BlockProgram::new(vec![Block::new("speak").arg("text", text)]), &catalog, rate).unwrap();
        assert_eq!(t.total_duration, oracle::speech_oracle(text, rate), "{text}");
    }
}
