mod common;

use proptest::prelude::*;
use sapo_core::nbest::rank_order;
use sapo_core::{astar_nbest, beam_nbest, enumerate_all, viterbi, Lattice, NBestList};

fn tags(nb: &NBestList) -> Vec<Vec<usize>> {
    nb.entries.iter().map(|e| e.tags.clone()).collect()
}

fn assert_same(a: &NBestList, b: &NBestList) {
    assert_eq!(tags(a), tags(b));
    for (x, y) in a.entries.iter().zip(&b.entries) {
        assert!((x.score - y.score).abs() <= 1e-9, "{} vs {}", x.score, y.score);
    }
}

#[test]
fn ties_follow_lexicographic_order() {
    let l = Lattice::new(2, 2, vec![0.0; 4], vec![0.0; 4]);
    let nb = astar_nbest(&l, 4);
    assert_eq!(tags(&nb), vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
    assert_eq!(tags(&beam_nbest(&l, 4, 1)), vec![vec![0, 0]]);
    assert_eq!(viterbi(&l).0, vec![0, 0]);
}

#[test]
fn short_lattice_reports_exhaustion() {
    let l = Lattice::new(2, 2, vec![1.0, 0.0, 0.0, 1.0], vec![0.0; 4]);
    let nb = astar_nbest(&l, 10);
    assert_eq!(nb.len(), 4);
    assert!(nb.exhausted);
    assert!(!astar_nbest(&l, 4).exhausted);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn astar_matches_enumeration(l in common::lattice(6, 4), n in 1usize..40) {
        let all = enumerate_all(&l).unwrap();
        let mut prefix = all.clone();
        prefix.entries.truncate(n);
        assert_same(&astar_nbest(&l, n), &prefix);
    }

    #[test]
    fn scores_decompose_along_the_path(l in common::lattice(6, 4), n in 1usize..20) {
        for e in astar_nbest(&l, n).entries.iter().chain(&beam_nbest(&l, n, 3).entries) {
            prop_assert_eq!(e.score, l.path_score(&e.tags));
        }
    }

    #[test]
    fn lists_are_sorted_and_distinct(l in common::lattice(6, 4), n in 1usize..20, beam in 1usize..8) {
        for nb in [astar_nbest(&l, n), beam_nbest(&l, n, beam)] {
            for w in nb.entries.windows(2) {
                prop_assert!(rank_order(&w[0].tags, w[0].score, &w[1].tags, w[1].score).is_lt());
            }
        }
    }

    #[test]
    fn longer_lists_extend_shorter_ones(l in common::lattice(6, 4), n in 1usize..15, extra in 0usize..15) {
        let short = astar_nbest(&l, n);
        let long = astar_nbest(&l, n + extra);
        prop_assert_eq!(&tags(&long)[..short.len()], &tags(&short)[..]);
    }

    #[test]
    fn viterbi_is_the_first_candidate(l in common::lattice(8, 5)) {
        let (y, s) = viterbi(&l);
        let best = &astar_nbest(&l, 1).entries[0];
        prop_assert_eq!(&y, &best.tags);
        prop_assert_eq!(s, best.score);
    }

    #[test]
    fn beam_never_beats_exact_search(l in common::lattice(7, 4), n in 1usize..12, beam in 1usize..10) {
        let exact = astar_nbest(&l, n);
        let approx = beam_nbest(&l, n, beam);
        prop_assert!(approx.len() <= exact.len());
        for (a, e) in approx.entries.iter().zip(&exact.entries) {
            prop_assert!(a.score <= e.score);
        }
    }

    #[test]
    fn loose_beam_is_exact(l in common::lattice(7, 4), n in 1usize..12) {
        let k = l.num_tags();
        assert_same(&beam_nbest(&l, n, k * n), &astar_nbest(&l, n));
    }
}
