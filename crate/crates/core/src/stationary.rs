//! Stationary measures of stable VLMCs with a finite α-lis set.

use std::collections::{HashMap, VecDeque};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::cascades::{cascade, kappa, q_entry, CascadeSeriesResult, SeriesPolicy};
use crate::model::ProbabilizedTree;
use crate::tail::TailClass;
use crate::tree::{TreeError, TreeKind};
use crate::words::{leading_run, Letter, Word};

/// Largest set solved by a direct factorization; larger ones use power iteration.
pub const DIRECT_SOLVE_LIMIT: usize = 64;
const STOCHASTIC_TOL: f64 = 1e-9;
const RESIDUAL_TOL: f64 = 1e-12;
const MAX_POWER_ITERATIONS: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("row {row} sums to {sum}, not 1")]
    NotStochastic { row: usize, sum: f64 },
    #[error("matrix is reducible: states {closed:?} do not communicate with the rest")]
    Reducible { closed: Vec<usize> },
    #[error("no fixed vector within tolerance after {0} iterations")]
    NoConvergence(usize),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StationaryError {
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("entry ({row}, {col}) of Q is inconclusive")]
    InconclusiveEntry { row: String, col: String },
    #[error("series for the cylinder of '{0}' is inconclusive")]
    InconclusiveSum(String),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// The matrix `Q` indexed by the α-lis set `S` in shortlex order.
#[derive(Clone, Debug, PartialEq)]
pub struct QMatrix {
    pub index: Vec<Word>,
    pub entries: DMatrix<f64>,
}

impl QMatrix {
    pub fn position(&self, w: &[Letter]) -> Option<usize> {
        self.index.iter().position(|x| x[..] == *w)
    }
}

/// Builds `Q` cell by cell through [`q_entry`].
pub fn build_q_matrix(model: &ProbabilizedTree, policy: &SeriesPolicy) -> Result<QMatrix, StationaryError> {
    if !model.tree().stable() {
        return Err(StationaryError::Unsupported("the context tree is not stable".into()));
    }
    let index = model.tree().alpha_lis_set().map_err(|e| StationaryError::Unsupported(e.to_string()))?;
    let n = index.len();
    let mut entries = DMatrix::zeros(n, n);
    for (i, row) in index.iter().enumerate() {
        for (j, col) in index.iter().enumerate() {
            let r = q_entry(model, row, col, policy)?;
            entries[(i, j)] = r.value().ok_or_else(|| StationaryError::InconclusiveEntry {
                row: model.tree().render(row),
                col: model.tree().render(col),
            })?;
        }
    }
    Ok(QMatrix { index, entries })
}

/// Left-fixed probability vector of a stochastic matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct FixedVector {
    pub v: Vec<f64>,
    /// `‖vQ − v‖_∞`
    pub residual: f64,
}

fn check_stochastic(q: &DMatrix<f64>) -> Result<(), SolveError> {
    for i in 0..q.nrows() {
        let row = q.row(i);
        let sum: f64 = row.iter().sum();
        if row.iter().any(|&x| x < 0.0 || !x.is_finite()) || (sum - 1.0).abs() > STOCHASTIC_TOL {
            return Err(SolveError::NotStochastic { row: i, sum });
        }
    }
    Ok(())
}

fn reach(q: &DMatrix<f64>, forward: bool) -> Vec<bool> {
    let n = q.nrows();
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    while let Some(i) = queue.pop_front() {
        for j in 0..n {
            let w = if forward { q[(i, j)] } else { q[(j, i)] };
            if w > 0.0 && !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    seen
}

fn check_irreducible(q: &DMatrix<f64>) -> Result<(), SolveError> {
    for forward in [true, false] {
        let seen = reach(q, forward);
        if seen.iter().any(|s| !s) {
            let closed = (0..seen.len()).filter(|&i| seen[i]).collect();
            return Err(SolveError::Reducible { closed });
        }
    }
    Ok(())
}

fn residual(q: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    (q.tr_mul(v) - v).amax()
}

/// Solves `vQ = v`, `Σ v = 1` for a stochastic irreducible `Q`.
pub fn solve_left_fixed(q: &DMatrix<f64>) -> Result<FixedVector, SolveError> {
    assert!(q.is_square() && q.nrows() > 0);
    check_stochastic(q)?;
    check_irreducible(q)?;
    let n = q.nrows();
    let v = if n <= DIRECT_SOLVE_LIMIT { direct(q) } else { power(q)? };
    let r = residual(q, &v);
    if r > RESIDUAL_TOL {
        return Err(SolveError::NoConvergence(0));
    }
    Ok(FixedVector { v: v.iter().copied().collect(), residual: r })
}

/// `(Qᵀ − I) v = 0` with the last equation replaced by `Σ v = 1`.
fn direct(q: &DMatrix<f64>) -> DVector<f64> {
    let n = q.nrows();
    let mut a = q.transpose() - DMatrix::identity(n, n);
    a.row_mut(n - 1).fill(1.0);
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let lu = a.clone().lu();
    let mut v = lu.solve(&b).expect("irreducible stochastic matrices give a regular system");
    for _ in 0..3 {
        let r = &b - &a * &v;
        if let Some(dv) = lu.solve(&r) {
            v += dv;
        }
    }
    v.apply(|x| *x = x.max(0.0));
    let s = v.sum();
    v / s
}

/// Lazy power iteration `v ← v (I + Q)/2`, aperiodic for any irreducible `Q`.
fn power(q: &DMatrix<f64>) -> Result<DVector<f64>, SolveError> {
    let n = q.nrows();
    let mut v = DVector::from_element(n, 1.0 / n as f64);
    for it in 0..MAX_POWER_ITERATIONS {
        let next = (q.tr_mul(&v) + &v) * 0.5;
        let delta = (&next - &v).amax();
        v = next;
        if delta < RESIDUAL_TOL * 0.25 && residual(q, &v) <= RESIDUAL_TOL {
            return Ok(v);
        }
        if it % 1024 == 1023 {
            let s = v.sum();
            v /= s;
        }
    }
    Err(SolveError::NoConvergence(MAX_POWER_ITERATIONS))
}

/// The stationary probability of a stable VLMC, given on the α-lis set.
#[derive(Clone, Debug)]
pub struct StationaryMeasure<'m> {
    model: &'m ProbabilizedTree,
    pub index: Vec<Word>,
    /// `π(αsℛ)` for each α-lis in `index`.
    pub base: Vec<f64>,
    pub kappa: Vec<f64>,
    /// `‖vQ − v‖_∞` of the unnormalized fixed vector.
    pub residual: f64,
    /// `Σ_α π(αℛ)`, equal to 1 up to rounding.
    pub total_mass: f64,
    lookup: HashMap<Word, usize>,
}

#[derive(Clone, Debug)]
pub enum StationarityVerdict<'m> {
    UniqueProbability(StationaryMeasure<'m>),
    SigmaFiniteOnly(String),
    NoInvariantMeasure(String),
    Unsupported(String),
}

impl StationarityVerdict<'_> {
    pub fn label(&self) -> &'static str {
        match self {
            StationarityVerdict::UniqueProbability(_) => "UniqueProbability",
            StationarityVerdict::SigmaFiniteOnly(_) => "SigmaFiniteOnly",
            StationarityVerdict::NoInvariantMeasure(_) => "NoInvariantMeasure",
            StationarityVerdict::Unsupported(_) => "Unsupported",
        }
    }

    pub fn measure(&self) -> Option<&StationaryMeasure<'_>> {
        match self {
            StationarityVerdict::UniqueProbability(m) => Some(m),
            _ => None,
        }
    }

    pub fn reason(&self) -> Option<&str> {
        match self {
            StationarityVerdict::UniqueProbability(_) => None,
            StationarityVerdict::SigmaFiniteOnly(r)
            | StationarityVerdict::NoInvariantMeasure(r)
            | StationarityVerdict::Unsupported(r) => Some(r),
        }
    }
}

/// Decides existence and uniqueness of a stationary probability and builds it.
pub fn stationarity_verdict<'m>(model: &'m ProbabilizedTree, policy: &SeriesPolicy) -> StationarityVerdict<'m> {
    let tree = model.tree();
    if !tree.stable() {
        return StationarityVerdict::Unsupported("the context tree is not stable".into());
    }
    let index = match tree.alpha_lis_set() {
        Ok(s) => s,
        Err(e) => return StationarityVerdict::Unsupported(e.to_string()),
    };
    if tree.is_comb() {
        for s in &index {
            if model.comb_rule(s[0], s[1]).kind.class() == TailClass::Frozen {
                return StationarityVerdict::NoInvariantMeasure(format!(
                    "cascades of the contexts with α-lis {} do not tend to 0",
                    tree.render(s)
                ));
            }
        }
    }
    let mut kappas: Vec<CascadeSeriesResult> = Vec::with_capacity(index.len());
    for s in &index {
        match kappa(model, s, policy) {
            Ok(k) => kappas.push(k),
            Err(e) => return StationarityVerdict::Unsupported(e.to_string()),
        }
    }
    if let Some(i) = kappas.iter().position(|k| k.is_inconclusive()) {
        return StationarityVerdict::Unsupported(format!(
            "the cascade series of {} is inconclusive",
            tree.render(&index[i])
        ));
    }
    if let Some(i) = kappas.iter().position(|k| k.is_divergent()) {
        return StationarityVerdict::SigmaFiniteOnly(format!(
            "the cascade series of {} diverges while its terms tend to 0",
            tree.render(&index[i])
        ));
    }
    let nn = model.validate_non_null();
    if !nn.passed() {
        let (c, a) = &nn.zeros[0];
        return StationarityVerdict::Unsupported(format!(
            "the model is null: q_{}({}) = 0",
            tree.render(c),
            model.alphabet().symbol(*a)
        ));
    }
    let q = match build_q_matrix(model, policy) {
        Ok(q) => q,
        Err(e) => return StationarityVerdict::Unsupported(e.to_string()),
    };
    let fixed = match solve_left_fixed(&q.entries) {
        Ok(f) => f,
        Err(e) => return StationarityVerdict::Unsupported(e.to_string()),
    };
    let kappa: Vec<f64> = kappas.iter().map(|k| k.extended()).collect();
    // Σ_α π(αℛ) = Σ_{βt} κ_{βt} π(βtℛ)
    let mass: f64 = fixed.v.iter().zip(&kappa).map(|(v, k)| v * k).sum();
    let base: Vec<f64> = fixed.v.iter().map(|v| v / mass).collect();
    let lookup = index.iter().cloned().enumerate().map(|(i, w)| (w, i)).collect();
    let mut m = StationaryMeasure { model, index, base, kappa, residual: fixed.residual, total_mass: 0.0, lookup };
    m.total_mass = model.alphabet().letters().map(|a| m.cylinder(&[a]).unwrap_or(f64::NAN)).sum();
    StationarityVerdict::UniqueProbability(m)
}

impl<'m> StationaryMeasure<'m> {
    pub fn model(&self) -> &'m ProbabilizedTree {
        self.model
    }

    /// `π(αsℛ)` for an element of the α-lis set.
    pub fn base_of(&self, alpha_s: &[Letter]) -> Option<f64> {
        self.lookup.get(alpha_s).map(|&i| self.base[i])
    }

    /// `π(wℛ)`, the probability of the cylinder of words starting with `w`.
    pub fn cylinder(&self, w: &[Letter]) -> Result<f64, StationaryError> {
        if w.is_empty() {
            return Ok(1.0);
        }
        let d = self.model.tree().alpha_lis(w);
        let alpha_s = d.word();
        let c = cascade(self.model, w)?;
        if let Some(b) = self.base_of(&alpha_s) {
            return Ok(c * b);
        }
        Ok(c * self.expand(d.alpha, &d.lis)?)
    }

    /// `π(αsℛ) = Σ casc(αc) π(α_c s_c ℛ)` over contexts `c = s⋯`.
    fn expand(&self, alpha: Letter, s: &[Letter]) -> Result<f64, StationaryError> {
        let model = self.model;
        match model.tree().kind() {
            TreeKind::Explicit(t) => {
                let mut sum = 0.0;
                for id in t.leaves_with_prefix(s) {
                    let c = t.leaf(id);
                    let b = self.base_of(&model.tree().alpha_lis(c).word()).expect("α-lis of a context lies in S");
                    sum += cascade(model, &c.prepend(alpha))? * b;
                }
                Ok(sum)
            }
            TreeKind::Comb => {
                // s = γ^j; the contexts c = γ^k β' (k ≥ j) have α-lis γβ'
                let j = leading_run(s) as u64;
                let mut sum = 0.0;
                for gamma in model.alphabet().letters() {
                    if j > 0 && gamma != s[0] {
                        continue;
                    }
                    for beta in model.alphabet().letters().filter(|&b| b != gamma) {
                        let rule = model.comb_rule(gamma, beta);
                        let k0 = j.max(1);
                        let mass = if alpha == gamma {
                            rule.kind.mean_from(k0 + 1)
                        } else {
                            rule.switch_weights[alpha.index()] * (rule.kind.tail(k0) - rule.kind.tail_limit())
                        };
                        if mass > 0.0 {
                            sum += mass * self.base_of(&[gamma, beta]).expect("comb α-lis");
                        }
                    }
                }
                Ok(sum)
            }
        }
    }
}
