//! Semi-Markov kernels of the walks and of the α-lis chain, and the maps
//! between the VLMC side and the walk side.

use std::collections::HashMap;

use thiserror::Error;

use crate::cascades::{cascade, kappa, CascadeSeriesResult, SeriesPolicy};
use crate::model::{ContextRef, ProbabilizedTree};
use crate::process::LetterTrace;
use crate::prw1d::{DoubleCombModel, Walk1DTrace};
use crate::prw2d::{QuadCombModel, Walk2DTrace};
use crate::rng::StreamRng;
use crate::tree::{TreeError, TreeKind};
use crate::words::{Letter, Word};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SemiMarkovError {
    #[error("the context tree is not stable")]
    NotStable,
    #[error("'{0}' is not in the α-lis set")]
    UnknownState(String),
    #[error("sojourn drawn beyond the tabulated horizon from state {0}")]
    BeyondHorizon(usize),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

/// `p_{αβ}(k) = (∏_{j<k} q_{α^j β}(α)) q_{α^k β}(β)` on the double comb.
pub fn kernel_dim1(model: &DoubleCombModel, alpha: Letter, beta: Letter, k: u64) -> f64 {
    assert!(alpha != beta && k >= 1);
    let rule = model.model().comb_rule(alpha, beta);
    rule.kind.tail(k) * rule.q(alpha, k, beta)
}

/// `p_{βα, αγ}(k) = (∏_{j<k} q_{α^j β}(α)) q_{α^k β}(γ)`; zero unless the bends chain.
///
/// Bends are chronological: `from = βα`, `to = αγ`.
pub fn kernel_dim2(model: &QuadCombModel, from: &[Letter], to: &[Letter], k: u64) -> f64 {
    assert!(k >= 1);
    let (beta, alpha) = (from[0], from[1]);
    if to[0] != alpha {
        return 0.0;
    }
    let rule = model.model().comb_rule(alpha, beta);
    rule.kind.tail(k) * rule.q(alpha, k, to[1])
}

/// `p_{αs, βt}(k) = Σ casc(βc)` over contexts `c = t⋯` with α-lis `αs` and
/// `|c| = |αs| + k − 1`.
pub fn kernel_alpha_lis(model: &ProbabilizedTree, from: &[Letter], to: &[Letter], k: u64) -> Result<f64, SemiMarkovError> {
    assert!(k >= 1);
    if !model.tree().stable() {
        return Err(SemiMarkovError::NotStable);
    }
    let (beta, t) = (to[0], &to[1..]);
    let len = from.len() + k as usize - 1;
    match model.tree().kind() {
        TreeKind::Comb => {
            // contexts with α-lis ab are a^m b; here m = k and t must be a
            let (a, b) = (from[0], from[1]);
            if t != [a] || beta == a {
                return Ok(0.0);
            }
            let rule = model.comb_rule(a, b);
            Ok(rule.kind.tail(k) * rule.q(a, k, beta))
        }
        TreeKind::Explicit(tree) => {
            let mut sum = 0.0;
            for id in tree.leaves_with_prefix(t) {
                let c = tree.leaf(id);
                if c.len() == len && model.tree().alpha_lis(c).word()[..] == *from {
                    sum += cascade(model, &c.prepend(beta))?;
                }
            }
            Ok(sum)
        }
    }
}

/// `E(T_{n+1} | J_n = αs)`, the mean sojourn in `αs`, which is `κ_{αs}`.
pub fn expected_sojourn(model: &ProbabilizedTree, alpha_s: &[Letter], policy: &SeriesPolicy) -> Result<CascadeSeriesResult, TreeError> {
    kappa(model, alpha_s, policy)
}

/// A semi-Markov kernel tabulated for `k ≤ k_max`, with the mass of longer
/// sojourns kept per source state.
#[derive(Clone, Debug, PartialEq)]
pub struct TabulatedKernel {
    pub states: Vec<Word>,
    pub k_max: u64,
    /// `p[a][b][k − 1]`
    pub p: Vec<Vec<Vec<f64>>>,
    /// `P(T > k_max | J = a)`
    pub remainder: Vec<f64>,
}

impl TabulatedKernel {
    /// `Σ_{b, k ≤ k_max} p_{a,b}(k) + remainder[a]`, which should be 1.
    pub fn total_mass(&self, a: usize) -> f64 {
        self.p[a].iter().flatten().sum::<f64>() + self.remainder[a]
    }

    /// `Σ_k p_{a,b}(k)` over the tabulated horizon.
    pub fn embedded(&self, a: usize, b: usize) -> f64 {
        self.p[a][b].iter().sum()
    }
}

/// Tabulates the α-lis kernel of a stable model up to `k_max`.
///
/// The remainder is exact: on combs it is `P(τ > k_max)`, on finite trees
/// the sojourns are bounded by the height.
pub fn tabulate_alpha_lis_kernel(model: &ProbabilizedTree, k_max: u64) -> Result<TabulatedKernel, SemiMarkovError> {
    if !model.tree().stable() {
        return Err(SemiMarkovError::NotStable);
    }
    let states = model.tree().alpha_lis_set()?;
    let n = states.len();
    let mut p = vec![vec![vec![0.0; k_max as usize]; n]; n];
    let mut remainder = vec![0.0; n];
    for (i, from) in states.iter().enumerate() {
        for (j, to) in states.iter().enumerate() {
            for k in 1..=k_max {
                p[i][j][k as usize - 1] = kernel_alpha_lis(model, from, to, k)?;
            }
        }
        remainder[i] = match model.tree().kind() {
            TreeKind::Comb => {
                let kind = &model.comb_rule(from[0], from[1]).kind;
                kind.tail(k_max + 1)
            }
            TreeKind::Explicit(_) => {
                let tabulated: f64 = p[i].iter().flatten().sum();
                (1.0 - tabulated).max(0.0)
            }
        };
    }
    Ok(TabulatedKernel { states, k_max, p, remainder })
}

/// An MRC path and its semi-Markov chain.
#[derive(Clone, Debug, PartialEq)]
pub struct MrcPath {
    /// `J_0, J_1, …`
    pub states: Vec<Word>,
    /// `T_0 = 0, T_1, …`
    pub sojourns: Vec<u64>,
    /// `B_0 = 0, B_1, …`
    pub jump_times: Vec<u64>,
    /// `Z_0, …, Z_n`
    pub z: Vec<Word>,
}

/// Draws `jumps` transitions of the semi-Markov chain with kernel `kernel`
/// from the state `start`.
pub fn simulate_semi_markov(kernel: &TabulatedKernel, start: usize, jumps: usize, rng: &mut StreamRng) -> Result<MrcPath, SemiMarkovError> {
    let mut states = vec![kernel.states[start].clone()];
    let mut sojourns = vec![0];
    let mut jump_times = vec![0];
    let mut z = Vec::new();
    let mut a = start;
    for _ in 0..jumps {
        let u = rng.uniform();
        let mut acc = 0.0;
        let mut next = None;
        'outer: for (b, row) in kernel.p[a].iter().enumerate() {
            for (k, &p) in row.iter().enumerate() {
                acc += p;
                if u < acc {
                    next = Some((b, k as u64 + 1));
                    break 'outer;
                }
            }
        }
        let (b, k) = next.ok_or(SemiMarkovError::BeyondHorizon(a))?;
        z.extend(std::iter::repeat_n(kernel.states[a].clone(), k as usize));
        states.push(kernel.states[b].clone());
        sojourns.push(k);
        jump_times.push(jump_times.last().unwrap() + k);
        a = b;
    }
    z.push(kernel.states[a].clone());
    Ok(MrcPath { states, sojourns, jump_times, z })
}

fn context_alpha_lis(model: &ProbabilizedTree, ctx: &ContextRef, cache: &mut HashMap<u32, Word>) -> Word {
    match *ctx {
        ContextRef::Run { letter, before, .. } => Word::from_letters(vec![letter, before]),
        ContextRef::Leaf(id) => cache
            .entry(id)
            .or_insert_with(|| model.tree().alpha_lis(&model.context_word(ctx)).word())
            .clone(),
    }
}

/// The map `L`: `Z_j = α-lis(C_j)`, jumps at the `k` with `|C_k| ≤ |C_{k−1}|`.
pub fn extract_mrc_letters(model: &ProbabilizedTree, trace: &LetterTrace) -> MrcPath {
    let mut cache = HashMap::new();
    let z: Vec<Word> = trace.contexts.iter().map(|c| context_alpha_lis(model, c, &mut cache)).collect();
    let mut states = vec![z[0].clone()];
    let mut jump_times = vec![0];
    let mut sojourns = vec![0];
    for k in 1..trace.contexts.len() {
        if model.context_len(&trace.contexts[k]) <= model.context_len(&trace.contexts[k - 1]) {
            sojourns.push(k as u64 - jump_times.last().unwrap());
            jump_times.push(k as u64);
            states.push(z[k].clone());
        }
    }
    MrcPath { states, sojourns, jump_times, z }
}

/// The map `B` on a two-dimensional walk: bends at the breaking times.
pub fn extract_mrc_bends(trace: &Walk2DTrace) -> MrcPath {
    let z = (0..=trace.letters.len() as u64).map(|j| trace.bend_at(j).clone()).collect();
    MrcPath {
        states: trace.internal.clone(),
        sojourns: trace.sojourns.clone(),
        jump_times: trace.breaking.clone(),
        z,
    }
}

/// The map `B` on a one-dimensional walk, with `J_0 = ud`.
pub fn extract_mrc_bends_1d(trace: &Walk1DTrace) -> MrcPath {
    let states = trace.bends();
    let mut z = Vec::with_capacity(trace.letters.len() + 1);
    for (k, w) in trace.breaking.windows(2).enumerate() {
        z.extend(std::iter::repeat_n(states[k].clone(), (w[1] - w[0]) as usize));
    }
    let tail = trace.letters.len() + 1 - z.len();
    z.extend(std::iter::repeat_n(states.last().unwrap().clone(), tail));
    MrcPath { states, sojourns: trace.sojourns(), jump_times: trace.breaking.clone(), z }
}

/// `(J_n, M_n)` seen as a Markov additive process.
#[derive(Clone, Debug, PartialEq)]
pub struct MapView {
    pub states: Vec<Word>,
    pub additive: Vec<(i64, i64)>,
}

pub fn map_view(trace: &Walk2DTrace) -> MapView {
    MapView { states: trace.internal.clone(), additive: trace.skeleton.clone() }
}

/// The letters of a walk recovered from its positions (inverse of summing increments).
pub fn letters_from_positions_2d(positions: &[(i64, i64)]) -> Option<Vec<Letter>> {
    positions
        .windows(2)
        .map(|w| match (w[1].0 - w[0].0, w[1].1 - w[0].1) {
            (0, 1) => Some(Letter(0)),
            (1, 0) => Some(Letter(1)),
            (-1, 0) => Some(Letter(2)),
            (0, -1) => Some(Letter(3)),
            _ => None,
        })
        .collect()
}

pub fn letters_from_positions_1d(positions: &[i64]) -> Option<Vec<Letter>> {
    positions
        .windows(2)
        .map(|w| match w[1] - w[0] {
            -1 => Some(Letter(0)),
            1 => Some(Letter(1)),
            _ => None,
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiagramReport {
    pub jumps_compared: usize,
    pub steps_compared: usize,
    pub first_mismatch: Option<String>,
}

impl DiagramReport {
    pub fn consistent(&self) -> bool {
        self.first_mismatch.is_none()
    }
}

/// Checks `J^V_n = reverse(J^W_n)`, equal sojourns and `Z^V_j = reverse(Z^W_j)`.
pub fn check_diagram(v: &MrcPath, w: &MrcPath) -> DiagramReport {
    let mut first_mismatch = None;
    if v.states.len() != w.states.len() {
        first_mismatch = Some(format!("{} jumps on the VLMC side, {} on the walk side", v.states.len(), w.states.len()));
    }
    let jumps = v.states.len().min(w.states.len());
    for n in 0..jumps {
        if first_mismatch.is_some() {
            break;
        }
        if v.states[n] != w.states[n].reversed() {
            first_mismatch = Some(format!("J_{n} differs"));
        } else if v.sojourns[n] != w.sojourns[n] {
            first_mismatch = Some(format!("T_{n} differs: {} vs {}", v.sojourns[n], w.sojourns[n]));
        }
    }
    let steps = v.z.len().min(w.z.len());
    if first_mismatch.is_none() {
        if v.z.len() != w.z.len() {
            first_mismatch = Some("semi-Markov chains have different lengths".into());
        } else if let Some(j) = (0..steps).find(|&j| v.z[j] != w.z[j].reversed()) {
            first_mismatch = Some(format!("Z_{j} differs"));
        }
    }
    DiagramReport { jumps_compared: jumps, steps_compared: steps, first_mismatch }
}
