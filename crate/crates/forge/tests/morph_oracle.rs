use fraisse_forge::morph::{self, enumerate_homs, Kind};
use fraisse_forge::{Signature, Structure};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn signature(symbols: usize) -> Signature {
    Signature::new((0..symbols).map(|i| (format!("R{i}"), 2))).unwrap()
}

fn random_structure(rng: &mut impl Rng, sig: &Signature, size: usize, density: f64) -> Structure {
    let labels: Vec<String> = (0..size).map(|i| format!("x{i}")).collect();
    let rels = (0..sig.len())
        .map(|_| {
            let mut ts = Vec::new();
            for a in 0..size {
                for b in 0..size {
                    if rng.gen_bool(density) {
                        ts.push(vec![a, b]);
                    }
                }
            }
            ts
        })
        .collect();
    Structure::new(sig.clone(), labels, rels).unwrap()
}

/// Every one of the |B|^|A| maps, filtered by the checker.
fn naive(a: &Structure, b: &Structure, kind: Kind) -> Vec<Vec<usize>> {
    let (n, m) = (a.size(), b.size());
    let total = m.pow(n as u32);
    let mut out = Vec::new();
    for mut code in 0..total {
        let mut map = vec![0; n];
        for x in (0..n).rev() {
            map[x] = code % m;
            code /= m;
        }
        if morph::is_valid(a, b, &map, kind) {
            out.push(map);
        }
    }
    out
}

#[test]
fn enumerate_homs_matches_naive_enumeration_on_200_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut counts = [0usize; 3];
    for _ in 0..200 {
        let sig = signature(rng.gen_range(1..=2));
        let (sa, da) = (rng.gen_range(0..=3), rng.gen_range(0.1..0.6));
        let (sb, db) = (rng.gen_range(0..=4), rng.gen_range(0.2..0.8));
        let a = random_structure(&mut rng, &sig, sa, da);
        let b = random_structure(&mut rng, &sig, sb, db);
        for (i, kind) in [Kind::Hom, Kind::Embedding, Kind::Iso].into_iter().enumerate() {
            let got: Vec<Vec<usize>> = enumerate_homs(&a, &b, kind, None).unwrap().into_iter().map(|m| m.map).collect();
            let want = naive(&a, &b, kind);
            assert_eq!(got, want, "{kind} from {a:?} to {b:?}");
            counts[i] += got.len();
        }
    }
    assert!(counts[0] > counts[1], "{counts:?}");
}

#[test]
fn limit_one_agrees_with_existence() {
    let mut rng = ChaCha8Rng::seed_from_u64(81);
    for _ in 0..100 {
        let sig = signature(1);
        let a = random_structure(&mut rng, &sig, 3, 0.4);
        let b = random_structure(&mut rng, &sig, 3, 0.5);
        let all = naive(&a, &b, Kind::Hom);
        match morph::find(&a, &b, Kind::Hom).unwrap() {
            Some(m) => assert!(all.contains(&m.map)),
            None => assert!(all.is_empty()),
        }
    }
}

fn arb_pair() -> impl Strategy<Value = (Structure, Structure, Structure)> {
    (any::<u64>(), 1usize..=2, 1usize..=3, 1usize..=3, 1usize..=4).prop_map(|(seed, k, s1, s2, s3)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sig = signature(k);
        (
            random_structure(&mut rng, &sig, s1, 0.4),
            random_structure(&mut rng, &sig, s2, 0.5),
            random_structure(&mut rng, &sig, s3, 0.6),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn homs_and_embeddings_compose((a, b, c) in arb_pair()) {
        for kind in [Kind::Hom, Kind::Embedding] {
            let ab = enumerate_homs(&a, &b, kind, Some(4)).unwrap();
            let bc = enumerate_homs(&b, &c, kind, Some(4)).unwrap();
            for f in &ab {
                for g in &bc {
                    let h = morph::compose(&f.map, &g.map);
                    prop_assert!(morph::is_valid(&a, &c, &h, kind));
                }
            }
        }
    }

    #[test]
    fn enumeration_is_deterministic((a, b, _c) in arb_pair()) {
        let first = enumerate_homs(&a, &b, Kind::Hom, None).unwrap();
        let again = enumerate_homs(&a, &b, Kind::Hom, None).unwrap();
        prop_assert_eq!(first, again);
    }
}
