use fraisse_forge::ageprops::AgeDescriptor;
use fraisse_forge::fraisse::LimitBuilder;
use fraisse_forge::upoly::{StageConfig, StageState};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn ages() -> Vec<AgeDescriptor> {
    ["graphs", "graphs-with-loops", "digraphs", "posets", "tournaments", "hypergraphs-3"]
        .iter()
        .map(|n| AgeDescriptor::by_name(n).unwrap())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn limit_steps_are_conservative(seed in any::<u64>(), which in 0usize..6) {
        let class = ages()[which].clone();
        let mut b = LimitBuilder::new(class.clone(), seed).unwrap();
        for _ in 0..25 {
            let old = b.current().clone();
            b.step().unwrap();
            let keep: Vec<usize> = (0..old.size()).collect();
            prop_assert_eq!(b.current().induced(&keep), old);
        }
        // Age soundness on random small subsets.
        let u = b.current();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<usize> = (0..u.size()).collect();
        for _ in 0..20 {
            let k = 4.min(u.size());
            let mut s: Vec<usize> = pts.choose_multiple(&mut rng, k).copied().collect();
            s.sort_unstable();
            prop_assert!(class.contains(&u.induced(&s)));
        }
    }

    #[test]
    fn limit_builds_are_deterministic(seed in any::<u64>(), which in 0usize..6) {
        let class = ages()[which].clone();
        let run = || {
            let mut b = LimitBuilder::new(class.clone(), seed).unwrap();
            b.run(20).unwrap();
            (b.current().clone(), b.transcript_json().to_string())
        };
        prop_assert_eq!(run(), run());
    }
}

#[test]
fn certification_is_never_lost() {
    for (name, k) in [("graphs", 3), ("posets", 1), ("tournaments", 2)] {
        let class = AgeDescriptor::by_name(name).unwrap();
        let mut b = LimitBuilder::new(class, 3).unwrap().with_max_task(k.max(2) - 1).unwrap();
        let mut certified = false;
        for _ in 0..12 {
            b.run(10).unwrap();
            let now = b.certify_extension_property(k).holds;
            assert!(now || !certified, "{name}: {k}-extension property lost at step {}", b.steps());
            certified |= now;
        }
        assert!(certified, "{name}");
    }
}

/// A finite poset has a maximal element, which nothing lies strictly above.
#[test]
fn finite_posets_fail_the_two_extension_property() {
    let class = AgeDescriptor::posets();
    let mut b = LimitBuilder::new(class, 5).unwrap();
    b.run(60).unwrap();
    let u = b.current();
    let c = b.certify_extension_property(2);
    assert!(!c.holds);
    let maximal = (0..u.size()).find(|&x| (0..u.size()).all(|y| y == x || !u.holds(0, &[x, y]))).unwrap();
    assert!(maximal < u.size());
}

#[test]
fn stage_transitions_are_conservative_and_audits_persist() {
    for name in ["graphs-with-loops", "posets"] {
        let class = AgeDescriptor::by_name(name).unwrap();
        let mut st = StageState::new(class, 2, 7, StageConfig::with_task_size(1)).unwrap();
        let mut held = false;
        for _ in 0..12 {
            let older = st.clone();
            st.step().unwrap();
            assert!(st.extends(&older), "{name} step {}", st.steps());
            assert!(st.u_table().unwrap().verify_polymorphism().unwrap());
            let now = st.universality_audit(1).unwrap().holds;
            assert!(now || !held, "{name}: audit lost at step {}", st.steps());
            held |= now;
        }
        assert!(held, "{name}");
    }
}

#[test]
fn stage_transcripts_are_deterministic() {
    let run = || {
        let class = AgeDescriptor::by_name("posets").unwrap();
        let mut st = StageState::new(class, 2, 11, StageConfig::with_task_size(1)).unwrap();
        st.run(8).unwrap();
        st.transcript_json().to_string()
    };
    assert_eq!(run(), run());
}
