use num_bigint::BigUint;
use powerq_core::largeness::{certify_power_quotient, find_avoiding_quotient, lemma_fi_bound, verify_certificate};
use powerq_core::periodic::{presented_quotient_order, replay, run_construction};
use powerq_core::{Caps, FiniteQuotient, Letter, LargenessCertificate, PrimeSeq, QuotientSpec, VerbalSeries, Verdict, Word};
use proptest::prelude::*;

fn arb_word(rank: usize, max_len: usize) -> impl Strategy<Value = Word> {
    prop::collection::vec((0..rank, any::<bool>()), 0..=max_len)
        .prop_map(move |v| Word::reduce(rank, v.into_iter().map(|(g, i)| Letter::new(g, i))).unwrap())
}

fn s3() -> QuotientSpec {
    QuotientSpec::permutation(2, 3, vec![vec![1, 0, 2], vec![0, 2, 1]]).unwrap()
}

fn magnus_3_3() -> QuotientSpec {
    QuotientSpec::magnus_units(2, &BigUint::from(3u32), 3).unwrap()
}

/// Substitutes the Schreier generator words back into a rewritten word.
fn expand(q: &FiniteQuotient, rewritten: &Word) -> Word {
    let pres = q.reidemeister_schreier(&[]).unwrap();
    let mut out = Word::identity(q.rank());
    for l in rewritten.letters() {
        let g = &pres.generators[l.gen()].word;
        out = out.mul(&if l.is_inverse() { g.inv() } else { g.clone() }).unwrap();
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn rewriting_inverts_substitution(u in arb_word(2, 12), which in 0..2usize) {
        let caps = Caps::default();
        let spec = [s3(), magnus_3_3()][which].clone();
        let q = FiniteQuotient::build(&spec, &caps).unwrap();
        // u times the inverse of its coset representative lies in N
        let c = q.trace(0, &u);
        let w = u.mul(&q.transversal(c).inv()).unwrap();
        let basis = q.schreier_basis();
        let (rewritten, end) = q.rewrite(&basis, &w).unwrap();
        prop_assert_eq!(end, 0);
        prop_assert_eq!(expand(&q, &rewritten), w);
    }

    #[test]
    fn lazy_and_enumerated_kernels_agree(u in arb_word(2, 16), which in 0..3usize) {
        let caps = Caps::default();
        let spec = [s3(), magnus_3_3(), QuotientSpec::mod_abelianization(2, 4).unwrap()][which].clone();
        let q = FiniteQuotient::build(&spec, &caps).unwrap();
        prop_assert_eq!(spec.kernel_contains(&u, &caps).unwrap(), q.kernel_contains(&u).unwrap());
        prop_assert_eq!(spec.image_order(&u, &caps).unwrap(), BigUint::from(q.image_order(&u).unwrap()));
    }

    #[test]
    fn abelian_witness_certificates(g in arb_word(2, 6), m in 3u64..6, t in 1u64..3) {
        let caps = Caps::default();
        let spec = QuotientSpec::mod_abelianization(2, m).unwrap();
        let order = spec.image_order(&g, &caps).unwrap();
        prop_assume!(order >= BigUint::from(2u32));
        let q = u64::try_from(order).unwrap() * t;
        let c = certify_power_quotient(std::slice::from_ref(&g), q, Some(spec), &caps).unwrap();
        let counts = c.certificate.counts;
        prop_assert_eq!(counts.gens, 1 + counts.j);
        prop_assert!(2 * counts.rels <= counts.j);
        prop_assert_eq!(c.certificate.verdict, Verdict::CertifiedLarge);
        let text = serde_json::to_string(&c.certificate).unwrap();
        let back: LargenessCertificate = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(&back, &c.certificate);
        prop_assert!(verify_certificate(&back, &caps).unwrap().ok);
    }
}

#[test]
fn threshold_itself_is_admitted() {
    let caps = Caps::default();
    for (words, m) in [(vec!["a"], 1), (vec!["ab", "aB"], 2), (vec!["abAB"], 1)] {
        let g: Vec<Word> = words.iter().map(|w| Word::parse(w, 2).unwrap()).collect();
        let bound = lemma_fi_bound(&g, m, &caps).unwrap();
        let big_m = bound.bound_value(4096).unwrap();
        let n = find_avoiding_quotient(&g, m, &big_m, &caps).unwrap();
        for w in &g {
            assert!(n.spec.power_in_kernel(w, &big_m, &caps).unwrap());
            for s in 1..=m {
                assert!(!n.spec.kernel_contains(&w.power(s as i64), &caps).unwrap());
            }
        }
    }
}

#[test]
fn certify_then_tamper() {
    let caps = Caps::default();
    let g = vec![Word::parse("a", 2).unwrap(), Word::parse("b", 2).unwrap()];
    let c = certify_power_quotient(&g, 3, None, &caps).unwrap();
    assert_eq!(c.certificate.counts.j, 9);
    let mut bad = c.certificate.clone();
    bad.counts.deficiency += 1;
    let report = verify_certificate(&bad, &caps).unwrap();
    assert!(!report.ok);
    assert_eq!(report.recomputed, Some(c.certificate.counts));
}

#[test]
fn construction_replays_and_matches_the_series() {
    let caps = Caps::default();
    let pi = PrimeSeq::new(vec![2, 3, 5, 7]).unwrap();
    let trace = run_construction(&pi, 2, 1, &caps).unwrap();
    assert!(trace.halted.is_none());
    assert!(replay(&trace, &caps).unwrap());
    // without relators the presented group is F itself
    let free = presented_quotient_order(&pi, 2, 2, &[], &caps).unwrap();
    let series = VerbalSeries::build(&pi, 2, 2, &caps).unwrap();
    assert_eq!(free, series.order(2).unwrap());
}
