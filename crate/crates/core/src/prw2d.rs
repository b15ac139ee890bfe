//! Two-dimensional persistent random walk driven by the quadruple comb.
//!
//! Letters are `n, e, w, s` with increments `(0,1), (1,0), (−1,0), (0,−1)`.
//! Bends are written in chronological order: the bend `βα` turns from `β` to
//! `α`. Walks start from the bend `ne`, that is `X_{-1} = n`, `X_0 = e`.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::cascades::{q_entry, SeriesPolicy};
use crate::model::{ContextRef, ModelError, ProbabilizedTree};
use crate::process::{step, VlmcState};
use crate::rng::StreamRng;
use crate::stationary::{solve_left_fixed, FixedVector, SolveError, StationaryError};
use crate::tail::{TailClass, TailKind, TailRule};
use crate::words::{Alphabet, Letter, Word};

pub const NORTH: Letter = Letter(0);
pub const EAST: Letter = Letter(1);
pub const WEST: Letter = Letter(2);
pub const SOUTH: Letter = Letter(3);

pub const DEFAULT_RUN_CAP: u64 = 10_000_000;

/// Partial-sum growth over the last decade of `n` below which a trend is "plateauing".
pub const PLATEAU_THRESHOLD: f64 = 1e-3;

#[inline]
pub fn increment(l: Letter) -> (i64, i64) {
    match l.0 {
        0 => (0, 1),
        1 => (1, 0),
        2 => (-1, 0),
        3 => (0, -1),
        _ => unreachable!("compass letter"),
    }
}

/// A quadruple comb on `{n, e, w, s}`.
#[derive(Clone, Debug)]
pub struct QuadCombModel {
    model: ProbabilizedTree,
}

impl QuadCombModel {
    pub fn new(rules: Vec<((Letter, Letter), TailRule)>) -> Result<Self, ModelError> {
        Ok(Self { model: ProbabilizedTree::comb(Alphabet::compass(), rules)? })
    }

    /// Directionally reinforced walk: the switching mass is split in thirds.
    pub fn drrw(kind_of: impl Fn(Letter) -> TailKind) -> Result<Self, ModelError> {
        Ok(Self { model: ProbabilizedTree::comb_uniform(Alphabet::compass(), kind_of)? })
    }

    pub fn from_model(model: ProbabilizedTree) -> Result<Self, ModelError> {
        if !model.tree().is_comb() || model.alphabet().len() != 4 {
            return Err(ModelError::WrongFamily { expected: 4 });
        }
        Ok(Self { model })
    }

    pub fn model(&self) -> &ProbabilizedTree {
        &self.model
    }
}

/// The twelve bends `αβ`, `α ≠ β`, in chronological writing, ordered by letter index.
pub fn bends() -> Vec<Word> {
    let a = Alphabet::compass();
    a.letters()
        .flat_map(|x| a.letters().filter(move |&y| y != x).map(move |y| Word::from_letters(vec![x, y])))
        .collect()
}

pub fn bend_index(b: &[Letter]) -> usize {
    let (x, y) = (b[0].index(), b[1].index());
    x * 3 + if y < x { y } else { y - 1 }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BendKernel {
    pub states: Vec<Word>,
    pub p: DMatrix<f64>,
}

/// `P(βα; αγ)`, computed as the entry `Q_{αβ, γα}` of the α-lis matrix.
pub fn build_bend_kernel(model: &QuadCombModel, policy: &SeriesPolicy) -> Result<BendKernel, StationaryError> {
    let m = model.model();
    let a = m.alphabet();
    for x in a.letters() {
        for y in a.letters().filter(|&y| y != x) {
            if m.comb_rule(x, y).kind.class() == TailClass::Frozen {
                return Err(StationaryError::Unsupported(format!(
                    "cascades of the contexts {}^k{} do not tend to 0",
                    a.symbol(x),
                    a.symbol(y)
                )));
            }
        }
    }
    let states = bends();
    let mut p = DMatrix::zeros(12, 12);
    for (i, from) in states.iter().enumerate() {
        for (j, to) in states.iter().enumerate() {
            let r = q_entry(m, &from.reversed(), &to.reversed(), policy)?;
            p[(i, j)] = r.value().ok_or_else(|| StationaryError::InconclusiveEntry {
                row: a.render(from),
                col: a.render(to),
            })?;
        }
    }
    Ok(BendKernel { states, p })
}

/// Invariant law `π_J` of the internal chain.
pub fn bend_stationary(kernel: &BendKernel) -> Result<FixedVector, SolveError> {
    solve_left_fixed(&kernel.p)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Walk2DTrace {
    /// `X_1, …, X_n`
    pub letters: Vec<Letter>,
    /// `S_0, …, S_n`
    pub positions: Vec<(i64, i64)>,
    /// `B_0 = 0 < B_1 < …`
    pub breaking: Vec<u64>,
    /// `J_0 = ne`, `J_k = X_{B_{k−1}} X_{B_k}`
    pub internal: Vec<Word>,
    /// `T_0 = 0`, `T_k = B_k − B_{k−1}`
    pub sojourns: Vec<u64>,
    /// `M_k = S_{B_k}`
    pub skeleton: Vec<(i64, i64)>,
}

impl Walk2DTrace {
    /// `Z_j = J_k` for `B_k ≤ j < B_{k+1}`, for `j = 0..=n`.
    pub fn bend_at(&self, j: u64) -> &Word {
        let k = self.breaking.partition_point(|&b| b <= j) - 1;
        &self.internal[k]
    }

    pub fn is_breaking(&self, n: u64) -> bool {
        self.breaking[1..].binary_search(&n).is_ok()
    }
}

pub fn initial_word() -> Word {
    Word::from_letters(vec![EAST, NORTH])
}

fn run_len(ctx: &ContextRef) -> u64 {
    match *ctx {
        ContextRef::Run { len, .. } => len,
        ContextRef::Leaf(_) => unreachable!("quadruple comb"),
    }
}

/// Runs the walk, calling `visit(n, X_n, S_n, is_breaking)`; stops early when
/// `visit` returns `false`.
pub fn walk_2d(
    model: &QuadCombModel,
    steps: u64,
    rng: &mut StreamRng,
    run_cap: u64,
    mut visit: impl FnMut(u64, Letter, (i64, i64), bool) -> bool,
) -> Result<(), crate::Error> {
    let m = model.model();
    let mut state = VlmcState::with_cap(m, &initial_word(), 0)?;
    let mut prev = EAST;
    let (mut x, mut y) = (0i64, 0i64);
    for n in 1..=steps {
        let l = step(m, &mut state, rng)?;
        if run_len(state.context()) > run_cap {
            return Err(ModelError::RunCapExceeded { letter: m.alphabet().symbol(l), cap: run_cap }.into());
        }
        let (dx, dy) = increment(l);
        x += dx;
        y += dy;
        let go = visit(n, l, (x, y), l != prev);
        prev = l;
        if !go {
            break;
        }
    }
    Ok(())
}

/// Builds the jump structure of a letter sequence started from the bend `J_0`.
pub fn trace_from_letters(j0: &[Letter], letters: Vec<Letter>) -> Walk2DTrace {
    let mut positions = Vec::with_capacity(letters.len() + 1);
    positions.push((0, 0));
    let mut breaking = vec![0];
    let mut internal = vec![Word::from(j0)];
    let mut prev = j0[1];
    let (mut x, mut y) = (0, 0);
    for (i, &l) in letters.iter().enumerate() {
        let (dx, dy) = increment(l);
        x += dx;
        y += dy;
        positions.push((x, y));
        if l != prev {
            breaking.push(i as u64 + 1);
            internal.push(Word::from_letters(vec![prev, l]));
        }
        prev = l;
    }
    let sojourns = std::iter::once(0).chain(breaking.windows(2).map(|w| w[1] - w[0])).collect();
    let skeleton = breaking.iter().map(|&b| positions[b as usize]).collect();
    Walk2DTrace { letters, positions, breaking, internal, sojourns, skeleton }
}

pub fn simulate_prw2(model: &QuadCombModel, steps: u64, seed: u64) -> Result<Walk2DTrace, crate::Error> {
    simulate_prw2_on(model, steps, &mut StreamRng::new(seed, 0), DEFAULT_RUN_CAP)
}

pub fn simulate_prw2_on(model: &QuadCombModel, steps: u64, rng: &mut StreamRng, run_cap: u64) -> Result<Walk2DTrace, crate::Error> {
    let mut letters = Vec::with_capacity(steps as usize);
    walk_2d(model, steps, rng, run_cap, |_, l, _, _| {
        letters.push(l);
        true
    })?;
    Ok(trace_from_letters(&[NORTH, EAST], letters))
}

/// Simulates until `jumps` breaking times have occurred.
pub fn simulate_prw2_jumps(model: &QuadCombModel, jumps: usize, rng: &mut StreamRng, run_cap: u64) -> Result<Walk2DTrace, crate::Error> {
    let mut letters = Vec::new();
    let mut seen = 0;
    walk_2d(model, u64::MAX, rng, run_cap, |_, l, _, brk| {
        letters.push(l);
        seen += brk as usize;
        seen < jumps
    })?;
    Ok(trace_from_letters(&[NORTH, EAST], letters))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Trend {
    Growing,
    Plateauing,
}

impl Trend {
    pub fn label(&self) -> &'static str {
        match self {
            Trend::Growing => "growing",
            Trend::Plateauing => "plateauing",
        }
    }
}

/// Monte-Carlo estimates of `P(M_n = 0)`; a diagnostic, not a proof.
#[derive(Clone, Debug, PartialEq)]
pub struct DichotomyReport {
    pub horizon: usize,
    pub trials: usize,
    /// Trials with `M_n = 0`, for `n = 0..=horizon`.
    pub hits: Vec<u64>,
    pub p_hat: Vec<f64>,
    /// 95% Wilson intervals.
    pub wilson: Vec<(f64, f64)>,
    pub partial_sums: Vec<f64>,
    /// `min_{1≤n≤N} ‖M_n‖` per trial (Euclidean).
    pub min_norm: Vec<f64>,
    /// `Σ_{N/10 < n ≤ N} p̂_n`
    pub last_decade_growth: f64,
    pub trend: Trend,
}

pub fn wilson_interval(hits: u64, trials: u64, z: f64) -> (f64, f64) {
    let n = trials as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n);
    ((centre - half).min(p).max(0.0), (centre + half).max(p).min(1.0))
}

/// Runs `trials` independent walks for `horizon` jumps each; trial `i` uses
/// stream `i` of `seed`, so the result does not depend on the thread count.
pub fn return_prob_diagnostic(
    model: &QuadCombModel,
    horizon: usize,
    trials: usize,
    seed: u64,
) -> Result<DichotomyReport, crate::Error> {
    let per_trial: Vec<(Vec<u32>, f64)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = StreamRng::new(seed, t as u64);
            let tr = simulate_prw2_jumps(model, horizon, &mut rng, DEFAULT_RUN_CAP)?;
            let zeros = tr.skeleton.iter().enumerate().filter(|(_, &m)| m == (0, 0)).map(|(n, _)| n as u32).collect();
            let min = tr.skeleton[1..]
                .iter()
                .map(|&(x, y)| ((x * x + y * y) as f64).sqrt())
                .fold(f64::INFINITY, f64::min);
            Ok((zeros, min))
        })
        .collect::<Result<_, crate::Error>>()?;
    let mut hits = vec![0u64; horizon + 1];
    let mut min_norm = Vec::with_capacity(trials);
    for (zeros, min) in per_trial {
        for n in zeros {
            hits[n as usize] += 1;
        }
        min_norm.push(min);
    }
    let p_hat: Vec<f64> = hits.iter().map(|&h| h as f64 / trials as f64).collect();
    let wilson = hits.iter().map(|&h| wilson_interval(h, trials as u64, 1.96)).collect();
    let partial_sums: Vec<f64> = p_hat
        .iter()
        .scan(0.0, |s, p| {
            *s += p;
            Some(*s)
        })
        .collect();
    let last_decade_growth = partial_sums[horizon] - partial_sums[horizon / 10];
    let trend = if last_decade_growth < PLATEAU_THRESHOLD { Trend::Plateauing } else { Trend::Growing };
    Ok(DichotomyReport { horizon, trials, hits, p_hat, wilson, partial_sums, min_norm, last_decade_growth, trend })
}
