//! One-dimensional persistent random walk driven by the double comb.
//!
//! The first letter of the alphabet steps down (`d = −1`), the second steps
//! up (`u = +1`). Walks start from the context `du`, that is `X_{-1} = u`,
//! `X_0 = d`, with `S_0 = 0`.

use std::fmt;

use thiserror::Error;

use crate::cascades::{CascadeSeriesResult, SeriesPolicy, SeriesStatus};
use crate::model::{ContextRef, ModelError, ProbabilizedTree};
use crate::process::{step, VlmcState};
use crate::rng::StreamRng;
use crate::tail::{TailClass, TailKind, TailRule};
use crate::words::{Alphabet, Letter, Word};

pub const DOWN: Letter = Letter(0);
pub const UP: Letter = Letter(1);

/// Default cap on the length of a single run.
pub const DEFAULT_RUN_CAP: u64 = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Prw1Error {
    #[error("runs of '{0}' are infinite with positive probability")]
    InfiniteRun(char),
    #[error("internal inconsistency: {0}")]
    Internal(String),
}

/// A double comb `{d, u}` with its two persistence laws.
#[derive(Clone, Debug)]
pub struct DoubleCombModel {
    model: ProbabilizedTree,
}

impl DoubleCombModel {
    /// `up` governs `q_{u^k d}(u)`, `down` governs `q_{d^k u}(d)`.
    pub fn new(up: TailKind, down: TailKind) -> Result<Self, ModelError> {
        let rule = |kind: TailKind, l: Letter, pair: &str| {
            TailRule::uniform(kind, l, 2).map_err(|source| ModelError::Tail { pair: pair.into(), source })
        };
        let model = ProbabilizedTree::comb(
            Alphabet::down_up(),
            vec![((UP, DOWN), rule(up, UP, "ud")?), ((DOWN, UP), rule(down, DOWN, "du")?)],
        )?;
        Ok(Self { model })
    }

    pub fn from_model(model: ProbabilizedTree) -> Result<Self, ModelError> {
        if !model.tree().is_comb() || model.alphabet().len() != 2 {
            return Err(ModelError::WrongFamily { expected: 2 });
        }
        Ok(Self { model })
    }

    pub fn model(&self) -> &ProbabilizedTree {
        &self.model
    }

    /// Persistence law of the runs of `dir`.
    pub fn tail_kind(&self, dir: Letter) -> &TailKind {
        &self.model.comb_rule(dir, other(dir)).kind
    }

    fn symbol(&self, dir: Letter) -> char {
        self.model.alphabet().symbol(dir)
    }
}

fn other(l: Letter) -> Letter {
    Letter(1 - l.0)
}

/// `P(τ^α ≥ n) = ∏_{k<n} q_{α^k β}(α)`.
pub fn persistence_tail(model: &DoubleCombModel, dir: Letter, n: u64) -> f64 {
    model.tail_kind(dir).tail(n)
}

/// `Θ_α = E[τ^α]`, infinite when the tail series diverges.
pub fn theta(model: &DoubleCombModel, dir: Letter) -> Result<f64, Prw1Error> {
    let kind = model.tail_kind(dir);
    if kind.class() == TailClass::Frozen {
        return Err(Prw1Error::InfiniteRun(model.symbol(dir)));
    }
    Ok(kind.mean())
}

/// `J_{α|β} = Σ_n n P(τ^α = n) / Σ_{k≤n} P(τ^β ≥ k)`.
///
/// Convergence is decided from the tail classes. A converged value is the
/// partial sum plus, for power tails, an asymptotic estimate of the rest.
pub fn erickson_j(model: &DoubleCombModel, alpha: Letter, beta: Letter, policy: &SeriesPolicy) -> Result<CascadeSeriesResult, Prw1Error> {
    let (ka, kb) = (model.tail_kind(alpha), model.tail_kind(beta));
    for (k, l) in [(ka, alpha), (kb, beta)] {
        if k.class() == TailClass::Frozen {
            return Err(Prw1Error::InfiniteRun(model.symbol(l)));
        }
    }
    // exponent e with term_n ≍ n^{-e}
    let exponent = match (ka.class(), kb.class()) {
        (TailClass::Light(_), _) => None,
        (TailClass::Power(a), TailClass::Power(b)) if b < 1.0 => Some(a + 1.0 - b),
        (TailClass::Power(a), _) => Some(a),
        _ => unreachable!(),
    };
    if let Some(e) = exponent {
        if e <= 1.0 {
            return Ok(CascadeSeriesResult::diverges(0));
        }
    }
    let mut sum = 0.0;
    let mut denom = 0.0;
    let mut last = 0.0;
    let table = match ka {
        TailKind::Table { entries, .. } => entries.len() as u64,
        _ => 0,
    };
    for n in 1..=policy.max_terms {
        denom += kb.tail(n);
        last = n as f64 * ka.point(n) / denom;
        sum += last;
        if n <= table + 1 {
            continue;
        }
        if let TailClass::Light(p) = ka.class() {
            let r = p * (1.0 + 1.0 / n as f64);
            if r < 1.0 && last < policy.abs_tol && last * r / (1.0 - r) < policy.abs_tol {
                return Ok(CascadeSeriesResult::converged(sum, n, true));
            }
        }
    }
    match exponent {
        Some(e) => {
            let n = policy.max_terms as f64;
            let rest = last * n.powf(e) * (n + 0.5).powf(1.0 - e) / (e - 1.0);
            Ok(CascadeSeriesResult::converged(sum + rest, policy.max_terms, true))
        }
        None => Ok(CascadeSeriesResult {
            status: SeriesStatus::Inconclusive { partial_sum: sum, last_term: last },
            terms_used: policy.max_terms,
            analytic: false,
        }),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DriftReport {
    pub theta_u: f64,
    pub theta_d: f64,
    /// `Θ_u − Θ_d`, when some Θ is finite.
    pub d_m: Option<f64>,
    /// `(Θ_u − Θ_d)/(Θ_u + Θ_d)`, `±1` when exactly one Θ is infinite.
    pub d_s: Option<f64>,
    pub j_ud: CascadeSeriesResult,
    pub j_du: CascadeSeriesResult,
}

pub fn drift_report(model: &DoubleCombModel, policy: &SeriesPolicy) -> Result<DriftReport, Prw1Error> {
    let theta_u = theta(model, UP)?;
    let theta_d = theta(model, DOWN)?;
    let (d_m, d_s) = match (theta_u.is_finite(), theta_d.is_finite()) {
        (true, true) => (Some(theta_u - theta_d), Some((theta_u - theta_d) / (theta_u + theta_d))),
        (false, true) => (Some(f64::INFINITY), Some(1.0)),
        (true, false) => (Some(f64::NEG_INFINITY), Some(-1.0)),
        (false, false) => (None, None),
    };
    Ok(DriftReport {
        theta_u,
        theta_d,
        d_m,
        d_s,
        j_ud: erickson_j(model, UP, DOWN, policy)?,
        j_du: erickson_j(model, DOWN, UP, policy)?,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum Verdict1D {
    Recurrent,
    DriftingPlusInfinity,
    DriftingMinusInfinity,
    Undecidable(String),
}

impl fmt::Display for Verdict1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict1D::Recurrent => write!(f, "Recurrent"),
            Verdict1D::DriftingPlusInfinity => write!(f, "DriftingPlusInfinity"),
            Verdict1D::DriftingMinusInfinity => write!(f, "DriftingMinusInfinity"),
            Verdict1D::Undecidable(r) => write!(f, "Undecidable ({r})"),
        }
    }
}

/// The cells of the recurrence/transience table.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DriftCell {
    DsZero,
    DsPositive,
    DsNegative,
    ThetaUInfinite,
    ThetaDInfinite,
    BothJInfinite,
    JudInfinite,
    JduInfinite,
    Undecided,
}

impl fmt::Display for DriftCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DriftCell::DsZero => "d_S = 0",
            DriftCell::DsPositive => "d_S > 0",
            DriftCell::DsNegative => "d_S < 0",
            DriftCell::ThetaUInfinite => "Θ_d < ∞ = Θ_u",
            DriftCell::ThetaDInfinite => "Θ_u < ∞ = Θ_d",
            DriftCell::BothJInfinite => "J_{u|d} = J_{d|u} = ∞",
            DriftCell::JudInfinite => "J_{u|d} = ∞ > J_{d|u}",
            DriftCell::JduInfinite => "J_{d|u} = ∞ > J_{u|d}",
            DriftCell::Undecided => "undecided",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Classification1D {
    pub verdict: Verdict1D,
    pub rule_fired: DriftCell,
    pub report: DriftReport,
    pub warnings: Vec<String>,
}

/// Recurrence or drift of the walk, by the cell of the table that applies.
pub fn classify(model: &DoubleCombModel, policy: &SeriesPolicy) -> Result<Classification1D, Prw1Error> {
    let report = drift_report(model, policy)?;
    let mut warnings = Vec::new();
    let (verdict, cell) = match (report.theta_u.is_finite(), report.theta_d.is_finite()) {
        (true, true) => {
            let exact_zero = matches!(
                (model.tail_kind(UP), model.tail_kind(DOWN)),
                (TailKind::Geometric(a), TailKind::Geometric(b)) if a == b
            );
            let ds = report.d_s.unwrap();
            if exact_zero || ds == 0.0 {
                (Verdict1D::Recurrent, DriftCell::DsZero)
            } else if ds.abs() < 1e-12 {
                warnings.push(format!("|d_S| = {ds:e} is below 1e-12 and is treated as 0"));
                (Verdict1D::Recurrent, DriftCell::DsZero)
            } else if ds > 0.0 {
                (Verdict1D::DriftingPlusInfinity, DriftCell::DsPositive)
            } else {
                (Verdict1D::DriftingMinusInfinity, DriftCell::DsNegative)
            }
        }
        (false, true) => (Verdict1D::DriftingPlusInfinity, DriftCell::ThetaUInfinite),
        (true, false) => (Verdict1D::DriftingMinusInfinity, DriftCell::ThetaDInfinite),
        (false, false) => {
            let (ud, du) = (&report.j_ud, &report.j_du);
            if ud.is_inconclusive() || du.is_inconclusive() {
                (Verdict1D::Undecidable("an Erickson series is inconclusive".into()), DriftCell::Undecided)
            } else {
                match (ud.is_divergent(), du.is_divergent()) {
                    (true, true) => (Verdict1D::Recurrent, DriftCell::BothJInfinite),
                    (true, false) => (Verdict1D::DriftingPlusInfinity, DriftCell::JudInfinite),
                    (false, true) => (Verdict1D::DriftingMinusInfinity, DriftCell::JduInfinite),
                    (false, false) => {
                        return Err(Prw1Error::Internal("both J finite while both Θ are infinite".into()))
                    }
                }
            }
        }
    };
    Ok(Classification1D { verdict, rule_fired: cell, report, warnings })
}

/// The increment of a letter: `−1` for the first letter, `+1` for the second.
#[inline]
pub fn increment(l: Letter) -> i64 {
    if l == DOWN {
        -1
    } else {
        1
    }
}

/// A walk of `n` steps with its jump structure.
#[derive(Clone, Debug, PartialEq)]
pub struct Walk1DTrace {
    /// `X_1, …, X_n`
    pub letters: Vec<Letter>,
    /// `S_0, …, S_n`
    pub positions: Vec<i64>,
    /// `B_0 = 0 < B_1 < …`, all `≤ n`
    pub breaking: Vec<u64>,
    /// Completed runs `τ^d_1, τ^d_2, …`
    pub tau_d: Vec<u64>,
    /// Completed runs `τ^u_1, τ^u_2, …`
    pub tau_u: Vec<u64>,
    /// `M_k = S_{B_{2k}}`
    pub skeleton: Vec<i64>,
}

impl Walk1DTrace {
    /// Whether `X_n ≠ X_{n−1}` for `n = 1..`.
    pub fn is_breaking(&self, n: usize) -> bool {
        self.breaking[1..].binary_search(&(n as u64)).is_ok()
    }

    /// `J_0 = ud`, then `J_k = X_{B_{k−1}} X_{B_k}`: the old run direction and the new one.
    pub fn bends(&self) -> Vec<Word> {
        let mut prev = DOWN;
        let mut out = vec![Word::from_letters(vec![UP, DOWN])];
        for &b in &self.breaking[1..] {
            let x = self.letters[b as usize - 1];
            out.push(Word::from_letters(vec![prev, x]));
            prev = x;
        }
        out
    }

    /// `T_0 = 0`, `T_k = B_k − B_{k−1}`.
    pub fn sojourns(&self) -> Vec<u64> {
        std::iter::once(0).chain(self.breaking.windows(2).map(|w| w[1] - w[0])).collect()
    }
}

/// Initial word `du` (newest first): `X_0 = d` after `X_{-1} = u`.
pub fn initial_word() -> Word {
    Word::from_letters(vec![DOWN, UP])
}

fn run_len(ctx: &ContextRef) -> u64 {
    match *ctx {
        ContextRef::Run { len, .. } => len,
        ContextRef::Leaf(_) => unreachable!("double comb"),
    }
}

/// Runs the walk and calls `visit(n, X_n, S_n, is_breaking)` for `n = 1..=steps`.
pub fn walk_1d(
    model: &DoubleCombModel,
    steps: u64,
    rng: &mut StreamRng,
    run_cap: u64,
    mut visit: impl FnMut(u64, Letter, i64, bool),
) -> Result<(), crate::Error> {
    let m = model.model();
    let mut state = VlmcState::with_cap(m, &initial_word(), 0)?;
    let mut prev = DOWN;
    let mut s = 0i64;
    for n in 1..=steps {
        let x = step(m, &mut state, rng)?;
        if run_len(state.context()) > run_cap {
            return Err(ModelError::RunCapExceeded { letter: m.alphabet().symbol(x), cap: run_cap }.into());
        }
        s += increment(x);
        visit(n, x, s, x != prev);
        prev = x;
    }
    Ok(())
}

/// Simulates `steps` steps on stream 0 of `seed`.
pub fn simulate_prw1(model: &DoubleCombModel, steps: u64, seed: u64) -> Result<Walk1DTrace, crate::Error> {
    simulate_prw1_on(model, steps, &mut StreamRng::new(seed, 0), DEFAULT_RUN_CAP)
}

pub fn simulate_prw1_on(model: &DoubleCombModel, steps: u64, rng: &mut StreamRng, run_cap: u64) -> Result<Walk1DTrace, crate::Error> {
    let mut letters = Vec::with_capacity(steps as usize);
    walk_1d(model, steps, rng, run_cap, |_, x, _, _| letters.push(x))?;
    Ok(Walk1DTrace::from_letters(letters))
}

impl Walk1DTrace {
    /// Jump structure of `X_1, …, X_n` after the start `X_{-1} = u`, `X_0 = d`.
    pub fn from_letters(letters: Vec<Letter>) -> Self {
        let mut positions = Vec::with_capacity(letters.len() + 1);
        positions.push(0);
        let mut breaking = vec![0u64];
        let mut prev = DOWN;
        let mut s = 0;
        for (i, &x) in letters.iter().enumerate() {
            s += increment(x);
            positions.push(s);
            if x != prev {
                breaking.push(i as u64 + 1);
            }
            prev = x;
        }
        let (mut tau_d, mut tau_u) = (Vec::new(), Vec::new());
        // run k (k ≥ 1) lasts B_k − B_{k−1}; odd runs are down runs
        for (k, w) in breaking.windows(2).enumerate() {
            if k % 2 == 0 {
                tau_d.push(w[1] - w[0]);
            } else {
                tau_u.push(w[1] - w[0]);
            }
        }
        let skeleton = breaking.iter().step_by(2).map(|&b| positions[b as usize]).collect();
        Self { letters, positions, breaking, tau_d, tau_u, skeleton }
    }
}

/// Length of one run of `alpha` started from the context `alpha beta`,
/// censored at `censor`.
pub fn simulate_run(model: &ProbabilizedTree, alpha: Letter, beta: Letter, rng: &mut StreamRng, censor: u64) -> Result<u64, crate::Error> {
    let mut state = VlmcState::with_cap(model, &[alpha, beta], 0)?;
    let mut len = 1;
    while len < censor {
        if step(model, &mut state, rng)? != alpha {
            break;
        }
        len += 1;
    }
    Ok(len)
}
