use proptest::prelude::*;

use screme_core::gf256::FieldElement as Fe;
use screme_core::rs_codec::{
    decode_decoupled, decode_dsd_ssc, decode_ssc, decode_with_erasures, detect_phase, encode, syndromes, DecodeKind, Detection,
    ErasurePolicy, EvalPoints,
};

fn data_strategy() -> impl Strategy<Value = [Fe; 8]> {
    prop::array::uniform8(any::<u8>()).prop_map(|a| a.map(Fe::new))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn encoded_words_have_zero_syndromes(data in data_strategy(), checks in 2usize..=3) {
        let cw = encode(&data, &EvalPoints::default(), checks).unwrap();
        prop_assert!(syndromes(&cw, &EvalPoints::default()).iter().all(|s| s.is_zero()));
        prop_assert_eq!(detect_phase(&cw.data, cw.checks[0], &EvalPoints::default()), Detection::Pass);
    }

    #[test]
    fn single_symbol_errors_are_corrected(data in data_strategy(), chip in 0usize..10, e in 1u8..) {
        let p = EvalPoints::default();
        let mut cw = encode(&data, &p, 2).unwrap();
        cw.inject(chip, Fe::new(e));
        let r = decode_ssc(&cw, &p).unwrap();
        prop_assert_eq!(r.data, Some(data));
        prop_assert_eq!(&r.kind, &DecodeKind::Corrected { chip, error: Fe::new(e) });
        // decoupled path agrees whenever the detect phase flags
        let d = decode_decoupled(&cw, &p).unwrap();
        if detect_phase(&cw.data, cw.checks[0], &p) == Detection::Flag {
            prop_assert_eq!(d, r);
        } else {
            prop_assert_eq!(d.data, Some(data));
        }
    }

    #[test]
    fn dsd_never_miscorrects_two_errors(data in data_strategy(), a in 0usize..11, b in 0usize..11, ea in 1u8.., eb in 1u8..) {
        prop_assume!(a != b);
        let p = EvalPoints::default();
        let mut cw = encode(&data, &p, 3).unwrap();
        cw.inject(a, Fe::new(ea));
        cw.inject(b, Fe::new(eb));
        prop_assert_eq!(decode_dsd_ssc(&cw, &p).unwrap().kind, DecodeKind::Uncorrectable);
    }

    #[test]
    fn guarded_erasures_recover_up_to_capacity(
        data in data_strategy(),
        checks in 2usize..=3,
        chips in prop::collection::btree_set(0usize..11, 1..=2),
        errs in prop::array::uniform2(1u8..),
    ) {
        let chips: Vec<usize> = chips.into_iter().filter(|&c| c < 8 + checks).collect();
        prop_assume!(!chips.is_empty() && chips.len() < checks);
        let p = EvalPoints::default();
        let mut cw = encode(&data, &p, checks).unwrap();
        for (c, e) in chips.iter().zip(errs) {
            cw.inject(*c, Fe::new(e));
        }
        let r = decode_with_erasures(&cw, &p, &chips, ErasurePolicy::Guarded).unwrap();
        prop_assert_eq!(r.data, Some(data));
    }

    #[test]
    fn exhaustive_erasures_use_every_check(data in data_strategy(), chips in prop::collection::btree_set(0usize..11, 3), errs in prop::array::uniform3(any::<u8>())) {
        let p = EvalPoints::default();
        let chips: Vec<usize> = chips.into_iter().collect();
        let mut cw = encode(&data, &p, 3).unwrap();
        for (c, e) in chips.iter().zip(errs) {
            cw.inject(*c, Fe::new(e));
        }
        let r = decode_with_erasures(&cw, &p, &chips, ErasurePolicy::Exhaustive).unwrap();
        prop_assert_eq!(r.data, Some(data));
        let over = decode_with_erasures(&cw, &p, &chips, ErasurePolicy::Guarded).unwrap();
        prop_assert_eq!(over.kind, DecodeKind::Uncorrectable);
    }

    #[test]
    fn any_beta_gives_a_valid_code(l in 1i64..255, data in data_strategy(), chip in 0usize..10, e in 1u8..) {
        // construction may reject coinciding locators; accepted codes must correct
        if let Ok(p) = EvalPoints::from_beta_log(l) {
            let mut cw = encode(&data, &p, 2).unwrap();
            cw.inject(chip, Fe::new(e));
            prop_assert_eq!(decode_ssc(&cw, &p).unwrap().data, Some(data));
        }
    }
}
