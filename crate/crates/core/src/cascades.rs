//! Cascades of words and series of cascades.

use crate::model::ProbabilizedTree;
use crate::tail::TailClass;
use crate::tree::{TreeError, TreeKind};
use crate::words::Letter;

/// Budget and tolerances for numerically summed series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesPolicy {
    pub max_terms: u64,
    pub abs_tol: f64,
    pub divergence_threshold: f64,
}

impl Default for SeriesPolicy {
    fn default() -> Self {
        Self { max_terms: 1_000_000, abs_tol: 1e-12, divergence_threshold: 1e9 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SeriesStatus {
    Converged(f64),
    Diverges,
    Inconclusive { partial_sum: f64, last_term: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CascadeSeriesResult {
    pub status: SeriesStatus,
    pub terms_used: u64,
    /// A closed form or an analytic certificate decided the status.
    pub analytic: bool,
}

impl CascadeSeriesResult {
    pub fn converged(value: f64, terms_used: u64, analytic: bool) -> Self {
        Self { status: SeriesStatus::Converged(value), terms_used, analytic }
    }

    pub fn diverges(terms_used: u64) -> Self {
        Self { status: SeriesStatus::Diverges, terms_used, analytic: true }
    }

    pub fn value(&self) -> Option<f64> {
        match self.status {
            SeriesStatus::Converged(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_converged(&self) -> bool {
        matches!(self.status, SeriesStatus::Converged(_))
    }

    pub fn is_divergent(&self) -> bool {
        matches!(self.status, SeriesStatus::Diverges)
    }

    pub fn is_inconclusive(&self) -> bool {
        matches!(self.status, SeriesStatus::Inconclusive { .. })
    }

    /// The value on the extended half-line; `NaN` when inconclusive.
    pub fn extended(&self) -> f64 {
        match self.status {
            SeriesStatus::Converged(v) => v,
            SeriesStatus::Diverges => f64::INFINITY,
            SeriesStatus::Inconclusive { .. } => f64::NAN,
        }
    }

    /// `converged`, `diverges` or `inconclusive`.
    pub fn status_label(&self) -> &'static str {
        match self.status {
            SeriesStatus::Converged(_) => "converged",
            SeriesStatus::Diverges => "diverges",
            SeriesStatus::Inconclusive { .. } => "inconclusive",
        }
    }
}

/// What is known about the terms past the ones summed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Remainder {
    /// Nothing: truncation can never be certified.
    Unknown,
    /// `a_{n+1} ≤ ratio · a_n` from the first summed term on.
    Ratio(f64),
    /// `a_n ≤ constant · n^{-exponent}` with `exponent > 1`.
    Power { constant: f64, exponent: f64 },
}

impl Remainder {
    /// Bound on `Σ_{m>n} a_m` given the last summed term `a_n`.
    fn bound(&self, n: u64, last: f64) -> f64 {
        match *self {
            Remainder::Unknown => f64::INFINITY,
            Remainder::Ratio(r) if r < 1.0 => last * r / (1.0 - r),
            Remainder::Ratio(_) => f64::INFINITY,
            Remainder::Power { constant, exponent } if exponent > 1.0 => {
                constant * (n as f64).powf(1.0 - exponent) / (exponent - 1.0)
            }
            Remainder::Power { .. } => f64::INFINITY,
        }
    }
}

/// Sums `Σ_{n≥1} term(n)` until the certified remainder falls below `abs_tol`.
///
/// Converged only when `remainder` certifies the truncation; otherwise the
/// result is Inconclusive once `max_terms` terms are used.
pub fn sum_series(term: impl Fn(u64) -> f64, remainder: Remainder, policy: &SeriesPolicy) -> CascadeSeriesResult {
    let mut sum = 0.0;
    let mut last = 0.0;
    for n in 1..=policy.max_terms {
        last = term(n);
        sum += last;
        if last < policy.abs_tol && remainder.bound(n, last) < policy.abs_tol {
            return CascadeSeriesResult::converged(sum, n, false);
        }
    }
    CascadeSeriesResult {
        status: SeriesStatus::Inconclusive { partial_sum: sum, last_term: last },
        terms_used: policy.max_terms,
        analytic: false,
    }
}

/// `casc(w)`: product of the transition probabilities rebuilding `w` from its α-lis.
pub fn cascade(model: &ProbabilizedTree, w: &[Letter]) -> Result<f64, TreeError> {
    if w.is_empty() {
        return Ok(1.0);
    }
    let ell = model.tree().alpha_lis(w).prefix.len();
    let mut c = 1.0;
    for i in (0..ell).rev() {
        c *= model.q_after(&w[i + 1..], w[i])?;
    }
    Ok(c)
}

fn comb_pair(w: &[Letter]) -> (Letter, Letter) {
    assert!(w.len() == 2 && w[0] != w[1], "comb α-lis are two distinct letters");
    (w[0], w[1])
}

/// Leaf ids of an explicit tree whose α-lis is `alpha_s`, in shortlex order.
fn contexts_with_alpha_lis(model: &ProbabilizedTree, alpha_s: &[Letter], prefix: &[Letter]) -> Vec<usize> {
    let t = model.tree().as_explicit().expect("explicit tree");
    t.leaves_with_prefix(prefix)
        .into_iter()
        .filter(|&id| model.tree().alpha_lis(t.leaf(id)).word()[..] == *alpha_s)
        .collect()
}

/// The first `n` terms of `κ_{αs}`, by increasing context length.
pub fn kappa_terms(model: &ProbabilizedTree, alpha_s: &[Letter], n: usize) -> Result<Vec<f64>, TreeError> {
    match model.tree().kind() {
        TreeKind::Comb => {
            let (a, b) = comb_pair(alpha_s);
            let kind = &model.comb_rule(a, b).kind;
            Ok((1..=n as u64).map(|k| kind.tail(k)).collect())
        }
        TreeKind::Explicit(t) => contexts_with_alpha_lis(model, alpha_s, &[])
            .into_iter()
            .take(n)
            .map(|id| cascade(model, t.leaf(id)))
            .collect(),
    }
}

/// `κ_{αs} = Σ casc(c)` over the contexts `c` whose α-lis is `αs`.
///
/// On a comb the contexts are `α^k β` and the terms are the run tail
/// `P(τ ≥ k)`, so the series is decided in closed form.
pub fn kappa(model: &ProbabilizedTree, alpha_s: &[Letter], _policy: &SeriesPolicy) -> Result<CascadeSeriesResult, TreeError> {
    match model.tree().kind() {
        TreeKind::Comb => {
            let (a, b) = comb_pair(alpha_s);
            let kind = &model.comb_rule(a, b).kind;
            Ok(match kind.class() {
                TailClass::Frozen => CascadeSeriesResult::diverges(0),
                TailClass::Power(c) if c <= 1.0 => CascadeSeriesResult::diverges(0),
                _ => CascadeSeriesResult::converged(kind.mean(), 0, true),
            })
        }
        TreeKind::Explicit(_) => {
            let terms = kappa_terms(model, alpha_s, usize::MAX)?;
            Ok(CascadeSeriesResult::converged(terms.iter().sum(), terms.len() as u64, false))
        }
    }
}

/// `Q_{βt, αs} = Σ casc(αc)` over contexts `c = s⋯` whose α-lis is `βt`.
pub fn q_entry(
    model: &ProbabilizedTree,
    row: &[Letter],
    col: &[Letter],
    _policy: &SeriesPolicy,
) -> Result<CascadeSeriesResult, TreeError> {
    let alpha = col[0];
    let s = &col[1..];
    match model.tree().kind() {
        TreeKind::Comb => {
            // contexts starting with s = β' are β'^k γ, all with α-lis β'γ,
            // and casc(α β'^k γ) = P(τ = k) · w_{β'γ}(α)
            comb_pair(col);
            let (r0, r1) = comb_pair(row);
            if r0 != s[0] {
                return Ok(CascadeSeriesResult::converged(0.0, 0, true));
            }
            let rule = model.comb_rule(r0, r1);
            let value = rule.switch_weights[alpha.index()] * (1.0 - rule.kind.tail_limit());
            Ok(CascadeSeriesResult::converged(value, 0, true))
        }
        TreeKind::Explicit(t) => {
            let mut sum = 0.0;
            let ids = contexts_with_alpha_lis(model, row, s);
            for &id in &ids {
                sum += cascade(model, &t.leaf(id).prepend(alpha))?;
            }
            Ok(CascadeSeriesResult::converged(sum, ids.len() as u64, false))
        }
    }
}
