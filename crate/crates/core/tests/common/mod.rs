#![allow(dead_code)]

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vlmc_core::{Alphabet, ContextTree, Letter, ProbabilizedTree, Word};

pub const NINE_LEAF: [&str; 9] = ["10", "010", "110", "0010", "0110", "000", "111", "0111", "0011"];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A probability vector with every entry at least `floor`.
pub fn random_dist(rng: &mut ChaCha8Rng, n: usize, floor: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| floor + rng.random::<f64>()).collect();
    let s: f64 = raw.iter().sum();
    let mut d: Vec<f64> = raw.iter().map(|x| x / s).collect();
    let head: f64 = d[..n - 1].iter().sum();
    d[n - 1] = 1.0 - head;
    d
}

pub fn probabilize(tree: ContextTree, rng: &mut ChaCha8Rng) -> ProbabilizedTree {
    let n = tree.alphabet().len();
    let leaves = tree.as_explicit().unwrap().leaves().to_vec();
    let q = leaves.into_iter().map(|c| (c, random_dist(rng, n, 0.05))).collect();
    ProbabilizedTree::explicit(tree, q).unwrap()
}

pub fn nine_leaf_tree() -> ContextTree {
    ContextTree::explicit_from_strs(Alphabet::binary(), &NINE_LEAF).unwrap()
}

/// Random stable saturated tree: a leaf `u` is split only when `u[1..]` is
/// internal, which keeps every suffix of every node in the tree.
pub fn random_stable_tree(rng: &mut ChaCha8Rng, alphabet: Alphabet, max_height: usize, splits: usize) -> ContextTree {
    let letters: Vec<Letter> = alphabet.letters().collect();
    let mut leaves: Vec<Word> = letters.iter().map(|&a| Word::from_letters(vec![a])).collect();
    let mut internal: Vec<Word> = vec![Word::empty()];
    for _ in 0..splits {
        let candidates: Vec<usize> = (0..leaves.len())
            .filter(|&i| leaves[i].len() < max_height && internal.contains(&Word::from(&leaves[i][1..])))
            .collect();
        let Some(&i) = candidates.choose(rng) else { break };
        let u = leaves.swap_remove(i);
        for &b in &letters {
            leaves.push(u.append(b));
        }
        internal.push(u);
    }
    ContextTree::explicit(alphabet, &leaves).unwrap()
}

/// Stationary law of the order-`h` chain on words of length `h`, by Gaussian
/// elimination with partial pivoting. Returned map: word (newest first) → mass.
pub fn order_h_oracle(model: &ProbabilizedTree) -> Vec<(Word, f64)> {
    let t = model.tree().as_explicit().unwrap();
    let h = t.height();
    let a = model.alphabet();
    let states = a.words_of_len(h);
    let n = states.len();
    let pos = |w: &[Letter]| states.iter().position(|s| s[..] == *w).unwrap();
    // rows of (P^T - I), last row replaced by normalization
    let mut m = vec![vec![0.0f64; n + 1]; n];
    for (i, w) in states.iter().enumerate() {
        for b in a.letters() {
            let p = model.q_after(w, b).unwrap();
            let next = w.prepend(b);
            let j = pos(&next[..h]);
            m[j][i] += p;
        }
        m[i][i] -= 1.0;
    }
    for x in m[n - 1].iter_mut() {
        *x = 1.0;
    }
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs())).unwrap();
        m.swap(col, piv);
        let d = m[col][col];
        for k in col..=n {
            m[col][k] /= d;
        }
        for r in 0..n {
            if r != col && m[r][col] != 0.0 {
                let f = m[r][col];
                for k in col..=n {
                    m[r][k] -= f * m[col][k];
                }
            }
        }
    }
    states.into_iter().zip(m.iter().map(|row| row[n])).collect()
}

/// Cylinder mass `π(uℛ)` from the oracle, for `|u| ≤ h`.
pub fn oracle_cylinder(oracle: &[(Word, f64)], u: &[Letter]) -> f64 {
    oracle.iter().filter(|(w, _)| w.starts_with(u)).map(|(_, p)| p).sum()
}

/// All words of length 1..=h.
pub fn words_up_to(a: &Alphabet, h: usize) -> Vec<Word> {
    (1..=h).flat_map(|l| a.words_of_len(l)).collect()
}
