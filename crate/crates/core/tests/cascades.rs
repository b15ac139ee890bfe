mod common;

use std::f64::consts::PI;

use common::*;
use proptest::prelude::*;
use vlmc_core::cascades::{cascade, kappa, kappa_terms, q_entry, SeriesPolicy};
use vlmc_core::prw1d::{theta, DoubleCombModel, DOWN, UP};
use vlmc_core::{Alphabet, Fallback, ProbabilizedTree, TailKind, Word};

/// `casc(w)` as the product of `q_{pref(β_{k+1}⋯αs)}(β_k)`, with `pref`
/// looked up by scanning the leaf list.
fn cascade_oracle(m: &ProbabilizedTree, w: &Word) -> f64 {
    let t = m.tree();
    let leaves = t.as_explicit().unwrap().leaves();
    let ell = t.alpha_lis(w).prefix.len();
    let mut c = 1.0;
    for k in 0..ell {
        let rest = &w[k + 1..];
        let ctx = leaves.iter().find(|l| rest.starts_with(l)).expect("non-internal suffix");
        c *= m.q(ctx, w[k]);
    }
    c
}

#[test]
fn cascade_formula_exhaustive() {
    let mut r = rng(11);
    let a = Alphabet::binary();
    let mut trees = vec![nine_leaf_tree()];
    for _ in 0..4 {
        trees.push(random_stable_tree(&mut r, a.clone(), 4, 8));
    }
    for t in trees {
        let m = probabilize(t, &mut r);
        for len in 1..=8 {
            for w in a.words_of_len(len) {
                let got = cascade(&m, &w).unwrap();
                let want = cascade_oracle(&m, &w);
                assert!((got - want).abs() <= 1e-15, "{}", a.render(&w));
            }
        }
    }
}

#[test]
fn explicit_kappa_is_the_finite_sum() {
    let mut r = rng(12);
    let m = probabilize(nine_leaf_tree(), &mut r);
    let t = m.tree();
    let p = SeriesPolicy::default();
    for s in t.alpha_lis_set().unwrap() {
        let brute: f64 = t
            .as_explicit()
            .unwrap()
            .leaves()
            .iter()
            .filter(|c| t.alpha_lis(c).word() == s)
            .map(|c| cascade_oracle(&m, c))
            .sum();
        let k = kappa(&m, &s, &p).unwrap();
        assert!(k.is_converged());
        assert!((k.value().unwrap() - brute).abs() < 1e-15);
    }
}

#[test]
fn nine_leaf_uniform_q_rows() {
    let a = Alphabet::binary();
    let q: Vec<(&str, &[f64])> = NINE_LEAF.iter().map(|c| (*c, &[0.5, 0.5][..])).collect();
    let m = ProbabilizedTree::explicit_from_strs(a.clone(), &q).unwrap();
    let s = m.tree().alpha_lis_set().unwrap();
    let p = SeriesPolicy::default();
    for row in &s {
        let mut sum = 0.0;
        for col in &s {
            // brute force: contexts c = s_col⋯ with α-lis `row`
            let (alpha, tail) = (col[0], &col[1..]);
            let brute: f64 = m
                .tree()
                .as_explicit()
                .unwrap()
                .leaves()
                .iter()
                .filter(|c| c.starts_with(tail) && m.tree().alpha_lis(c).word() == *row)
                .map(|c| cascade_oracle(&m, &c.prepend(alpha)))
                .sum();
            let e = q_entry(&m, row, col, &p).unwrap().value().unwrap();
            assert!((e - brute).abs() < 1e-15);
            sum += e;
        }
        assert!((sum - 1.0).abs() < 1e-12, "row {}", a.render(row));
    }
}

#[test]
fn comb_kappa_examples() {
    let p = SeriesPolicy::default();
    let a = Alphabet::down_up();
    let ud = a.parse("ud").unwrap();
    let comb = |k: TailKind| ProbabilizedTree::comb_uniform(a.clone(), move |_| k.clone()).unwrap();
    let k = kappa(&comb(TailKind::Polynomial(2.0)), &ud, &p).unwrap();
    assert!((k.value().unwrap() - PI * PI / 6.0).abs() < 1e-10);
    assert!(k.analytic);
    assert!(kappa(&comb(TailKind::Polynomial(0.5)), &ud, &p).unwrap().is_divergent());
    assert!(kappa(&comb(TailKind::Polynomial(1.0)), &ud, &p).unwrap().is_divergent());
    let terms = kappa_terms(&comb(TailKind::Polynomial(0.5)), &ud, 10_000).unwrap();
    assert!(terms.last().unwrap() < &0.011);
    let table = TailKind::Table { entries: vec![0.9, 0.2, 0.7], fallback: Fallback::Geometric(0.5) };
    let k = kappa(&comb(table.clone()), &ud, &p).unwrap().value().unwrap();
    let brute: f64 = (1..200).map(|n| table.tail(n)).sum();
    assert!((k - brute).abs() < 1e-12);
}

#[test]
fn comb_cascade_of_runs() {
    // casc(u d^k u) = (1 − p_d) p_d^{k−1}
    let a = Alphabet::down_up();
    let m = DoubleCombModel::new(TailKind::Geometric(0.3), TailKind::Geometric(0.6)).unwrap();
    for k in 1..12 {
        let w = Word::from_letters([vec![UP], vec![DOWN; k], vec![UP]].concat());
        let c = cascade(m.model(), &w).unwrap();
        assert!((c - 0.4 * 0.6f64.powi(k as i32 - 1)).abs() < 1e-15, "{}", a.render(&w));
    }
}

fn arb_kind() -> impl Strategy<Value = TailKind> {
    prop_oneof![
        (0.01f64..0.99).prop_map(TailKind::Geometric),
        (1.05f64..4.0).prop_map(TailKind::Polynomial),
        (proptest::collection::vec(0.05f64..0.95, 1..5), 0.05f64..0.95)
            .prop_map(|(entries, p)| TailKind::Table { entries, fallback: Fallback::Geometric(p) }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kappa_equals_theta_and_bounds_partial_sums(up in arb_kind(), down in arb_kind()) {
        let p = SeriesPolicy::default();
        let m = DoubleCombModel::new(up, down).unwrap();
        for (dir, s) in [(UP, [UP, DOWN]), (DOWN, [DOWN, UP])] {
            let k = kappa(m.model(), &s, &p).unwrap().value().unwrap();
            let th = theta(&m, dir).unwrap();
            prop_assert!((k - th).abs() <= 1e-10 * th.max(1.0));
            let terms = kappa_terms(m.model(), &s, 2000).unwrap();
            let mut partial = 0.0;
            for t in terms {
                prop_assert!(t >= 0.0);
                partial += t;
                prop_assert!(partial <= k * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn comb_q_rows_sum_to_one(kinds in proptest::collection::vec(arb_kind(), 4), seed in any::<u64>()) {
        let mut r = rng(seed);
        let a = Alphabet::compass();
        let mut rules = Vec::new();
        for x in a.letters() {
            for y in a.letters().filter(|&y| y != x) {
                let d = random_dist(&mut r, 3, 0.05);
                let mut w = vec![0.0; 4];
                for (i, z) in a.letters().filter(|&z| z != x).enumerate() {
                    w[z.index()] = d[i];
                }
                rules.push(((x, y), vlmc_core::TailRule::new(kinds[x.index()].clone(), x, w).unwrap()));
            }
        }
        let m = ProbabilizedTree::comb(a.clone(), rules).unwrap();
        let q = vlmc_core::stationary::build_q_matrix(&m, &SeriesPolicy::default()).unwrap();
        for i in 0..12 {
            prop_assert!((q.entries.row(i).sum() - 1.0).abs() <= 1e-9);
        }
    }
}
