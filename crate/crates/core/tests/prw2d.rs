mod common;

use std::collections::HashMap;

use common::*;
use vlmc_core::cascades::SeriesPolicy;
use vlmc_core::prw2d::{
    bend_index, bend_stationary, bends, build_bend_kernel, increment, return_prob_diagnostic, simulate_prw2,
    simulate_prw2_jumps, trace_from_letters, QuadCombModel, DEFAULT_RUN_CAP,
};
use vlmc_core::semi_markov::kernel_dim2;
use vlmc_core::stationary::{build_q_matrix, solve_left_fixed};
use vlmc_core::{Alphabet, Fallback, Letter, StreamRng, TailKind, TailRule};

fn random_quad(seed: u64, kinds: [TailKind; 4]) -> QuadCombModel {
    let mut r = rng(seed);
    let a = Alphabet::compass();
    let mut rules = Vec::new();
    for x in a.letters() {
        for y in a.letters().filter(|&y| y != x) {
            let d = random_dist(&mut r, 3, 0.1);
            let mut w = vec![0.0; 4];
            for (i, z) in a.letters().filter(|&z| z != x).enumerate() {
                w[z.index()] = d[i];
            }
            rules.push(((x, y), TailRule::new(kinds[x.index()].clone(), x, w).unwrap()));
        }
    }
    QuadCombModel::new(rules).unwrap()
}

fn mixed() -> [TailKind; 4] {
    [
        TailKind::Geometric(0.4),
        TailKind::Polynomial(2.5),
        TailKind::Table { entries: vec![0.8, 0.3], fallback: Fallback::Polynomial(1.7) },
        TailKind::Geometric(0.7),
    ]
}

#[test]
fn kernel_structure_and_semi_markov_sums() {
    let m = random_quad(1, mixed());
    let k = build_bend_kernel(&m, &SeriesPolicy::default()).unwrap();
    assert_eq!(k.states, bends());
    for (i, from) in k.states.iter().enumerate() {
        assert!((k.p.row(i).sum() - 1.0).abs() < 1e-12);
        assert_eq!(k.p.row(i).iter().filter(|&&x| x > 0.0).count(), 3);
        for (j, to) in k.states.iter().enumerate() {
            if from[1] != to[0] {
                assert_eq!(k.p[(i, j)], 0.0);
                continue;
            }
            let s: f64 = (1..=20_000).map(|n| kernel_dim2(&m, from, to, n)).sum();
            assert!((s - k.p[(i, j)]).abs() < 1e-3, "{i} → {j}");
        }
    }
}

#[test]
fn drrw_kernel_and_uniform_law() {
    let m = QuadCombModel::drrw(|_| TailKind::Polynomial(1.5)).unwrap();
    let k = build_bend_kernel(&m, &SeriesPolicy::default()).unwrap();
    for i in 0..12 {
        for j in 0..12 {
            let p = k.p[(i, j)];
            assert!(p == 0.0 || (p - 1.0 / 3.0).abs() < 1e-15);
        }
    }
    let pi = bend_stationary(&k).unwrap();
    assert!(pi.v.iter().all(|&x| (x - 1.0 / 12.0).abs() < 1e-12));
}

#[test]
fn bend_law_is_reindexed_q_law() {
    let m = random_quad(2, mixed());
    let p = SeriesPolicy::default();
    let pi = bend_stationary(&build_bend_kernel(&m, &p).unwrap()).unwrap();
    let q = build_q_matrix(m.model(), &p).unwrap();
    let v = solve_left_fixed(&q.entries).unwrap();
    for (i, b) in bends().iter().enumerate() {
        assert!((pi.v[i] - v.v[q.position(&b.reversed()).unwrap()]).abs() < 1e-12);
    }
}

#[test]
fn eeennnw_fixture_and_one_step() {
    let a = Alphabet::compass();
    let t = trace_from_letters(&a.parse("ne").unwrap(), a.parse("eeennnw").unwrap().into_letters());
    assert_eq!(t.breaking, vec![0, 4, 7]);
    let names: Vec<String> = t.internal.iter().map(|w| a.render(w)).collect();
    assert_eq!(names, ["ne", "en", "nw"]);
    assert_eq!(t.sojourns, vec![0, 4, 3]);
    assert_eq!(t.skeleton, vec![(0, 0), (3, 1), (2, 3)]);
    let m = QuadCombModel::drrw(|_| TailKind::Geometric(0.5)).unwrap();
    for seed in 0..20 {
        let t = simulate_prw2(&m, 1, seed).unwrap();
        let (x, y) = t.positions[1];
        assert_eq!(x.abs() + y.abs(), 1);
    }
    let empty = simulate_prw2(&m, 0, 0).unwrap();
    assert!(empty.letters.is_empty());
}

#[test]
fn skeleton_and_chain_identities() {
    let m = random_quad(3, mixed());
    for seed in 0..10 {
        let t = simulate_prw2(&m, 20_000, seed).unwrap();
        for (k, &b) in t.breaking.iter().enumerate() {
            assert_eq!(t.skeleton[k], t.positions[b as usize]);
            if k > 0 {
                assert_eq!(t.sojourns[k], b - t.breaking[k - 1]);
                let j = &t.internal[k];
                let prev = if t.breaking[k - 1] == 0 { Letter(1) } else { t.letters[t.breaking[k - 1] as usize - 1] };
                assert_eq!(j[..], [prev, t.letters[b as usize - 1]]);
            }
        }
        for n in 1..t.positions.len() {
            let (dx, dy) = increment(t.letters[n - 1]);
            assert_eq!(t.positions[n], (t.positions[n - 1].0 + dx, t.positions[n - 1].1 + dy));
        }
    }
}

#[test]
fn symmetric_drrw_direction_occupancy() {
    let m = QuadCombModel::drrw(|_| TailKind::Geometric(0.5)).unwrap();
    let t = simulate_prw2(&m, 1_000_000, 4).unwrap();
    // persistence correlates neighbouring letters, so use batch means
    let batches = 100;
    let size = t.letters.len() / batches;
    for l in 0..4u8 {
        let f: Vec<f64> = t
            .letters
            .chunks(size)
            .take(batches)
            .map(|c| c.iter().filter(|x| x.0 == l).count() as f64 / size as f64)
            .collect();
        let mean = f.iter().sum::<f64>() / batches as f64;
        let sd = (f.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (batches - 1) as f64).sqrt();
        assert!((mean - 0.25).abs() <= 4.0 * sd / (batches as f64).sqrt(), "letter {l}: {mean}");
    }
}

/// Chi-square quantile by the Wilson-Hilferty approximation.
fn chi2_quantile(df: f64, z: f64) -> f64 {
    let v = 2.0 / (9.0 * df);
    df * (1.0 - v + z * v.sqrt()).powi(3)
}

#[test]
fn markov_renewal_property() {
    // law of (J_{n+1}, T_{n+1}) given J_n does not depend on J_{n−1}
    let m = random_quad(5, [TailKind::Geometric(0.5), TailKind::Geometric(0.3), TailKind::Polynomial(2.0), TailKind::Geometric(0.6)]);
    let t = simulate_prw2_jumps(&m, 200_000, &mut StreamRng::new(5, 0), DEFAULT_RUN_CAP).unwrap();
    let j: Vec<usize> = t.internal.iter().map(|b| bend_index(b)).collect();
    let (mut stat, mut df) = (0.0, 0.0);
    for a in 0..12 {
        let mut table: HashMap<(usize, (usize, u64)), f64> = HashMap::new();
        for n in 1..j.len() - 1 {
            if j[n] == a {
                let outcome = (j[n + 1], t.sojourns[n + 1].min(4));
                *table.entry((j[n - 1], outcome)).or_default() += 1.0;
            }
        }
        let mut rows: Vec<usize> = table.keys().map(|k| k.0).collect();
        let mut cols: Vec<(usize, u64)> = table.keys().map(|k| k.1).collect();
        rows.sort();
        rows.dedup();
        cols.sort();
        cols.dedup();
        let rs: Vec<f64> = rows.iter().map(|r| cols.iter().map(|c| table.get(&(*r, *c)).copied().unwrap_or(0.0)).sum()).collect();
        let cs: Vec<f64> = cols.iter().map(|c| rows.iter().map(|r| table.get(&(*r, *c)).copied().unwrap_or(0.0)).sum()).collect();
        let total: f64 = rs.iter().sum();
        for (ri, r) in rows.iter().enumerate() {
            for (ci, c) in cols.iter().enumerate() {
                let e = rs[ri] * cs[ci] / total;
                stat += (table.get(&(*r, *c)).copied().unwrap_or(0.0) - e).powi(2) / e;
            }
        }
        df += ((rows.len() - 1) * (cols.len() - 1)) as f64;
    }
    assert!(df > 100.0);
    assert!(stat <= chi2_quantile(df, 2.326), "χ² = {stat} on {df} df");
}

#[test]
fn dichotomy_report_shape() {
    let m = QuadCombModel::drrw(|_| TailKind::Geometric(0.5)).unwrap();
    let r = return_prob_diagnostic(&m, 100, 500, 1).unwrap();
    assert_eq!(r.p_hat.len(), 101);
    assert_eq!(r.p_hat[0], 1.0);
    assert!(r.p_hat.iter().all(|&p| (0.0..=1.0).contains(&p)));
    assert!(r.partial_sums.windows(2).all(|w| w[1] >= w[0]));
    for (n, &(lo, hi)) in r.wilson.iter().enumerate() {
        assert!(lo <= r.p_hat[n] && r.p_hat[n] <= hi);
    }
    assert_eq!(r.min_norm.len(), 500);
    let again = return_prob_diagnostic(&m, 100, 500, 1).unwrap();
    assert_eq!(r, again);
}
