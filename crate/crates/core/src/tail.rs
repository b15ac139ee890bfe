//! Persistence laws for comb contexts.
//!
//! A [`TailRule`] attached to the ordered pair `(α, β)` gives, for every
//! `k ≥ 1`, the probability `q_{α^k β}(α)` of extending the current run of
//! `α`, and splits the remaining mass over the other letters with fixed
//! switch weights.

use thiserror::Error;

use crate::words::Letter;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TailError {
    #[error("geometric persistence must lie in (0, 1), got {0}")]
    BadGeometric(f64),
    #[error("polynomial exponent must be positive, got {0}")]
    BadPolynomial(f64),
    #[error("table entry {index} must lie in (0, 1), got {value}")]
    BadTableEntry { index: usize, value: f64 },
    #[error("switch weights must be nonnegative and sum to 1 (sum = {0})")]
    BadSwitchWeights(f64),
    #[error("switch weights give mass to the persisting letter")]
    SelfSwitch,
}

/// The law used past the end of a table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Fallback {
    /// `q_{α^k β}(α) = p`; `p = 1` freezes the walk (no switching ever again).
    Geometric(f64),
    /// `q_{α^k β}(α) = (k/(k+1))^c`.
    Polynomial(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub enum TailKind {
    /// Constant persistence `p ∈ (0, 1)`.
    Geometric(f64),
    /// `q_k = (k/(k+1))^c`, so that `P(τ ≥ n) = n^{-c}`.
    Polynomial(f64),
    /// Explicit `q_1, …, q_L`, then the fallback law evaluated at the absolute run length.
    Table { entries: Vec<f64>, fallback: Fallback },
}

/// Asymptotic behaviour of the persistence tail `P(τ ≥ n)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TailClass {
    /// Geometric decay with ratio `p < 1`.
    Light(f64),
    /// Tail `≍ n^{-c}`.
    Power(f64),
    /// Tail tends to a positive constant: runs are infinite with positive probability.
    Frozen,
}

impl TailKind {
    pub fn validate(&self) -> Result<(), TailError> {
        match self {
            TailKind::Geometric(p) if !(*p > 0.0 && *p < 1.0) => Err(TailError::BadGeometric(*p)),
            TailKind::Polynomial(c) if !(*c > 0.0 && c.is_finite()) => Err(TailError::BadPolynomial(*c)),
            TailKind::Table { entries, fallback } => {
                for (index, &value) in entries.iter().enumerate() {
                    if !(value > 0.0 && value < 1.0) {
                        return Err(TailError::BadTableEntry { index, value });
                    }
                }
                match *fallback {
                    Fallback::Geometric(p) if !(p > 0.0 && p <= 1.0) => Err(TailError::BadGeometric(p)),
                    Fallback::Polynomial(c) if !(c > 0.0 && c.is_finite()) => Err(TailError::BadPolynomial(c)),
                    _ => Ok(()),
                }
            }
            _ => Ok(()),
        }
    }

    fn table_len(&self) -> usize {
        match self {
            TailKind::Table { entries, .. } => entries.len(),
            _ => 0,
        }
    }

    fn asymptotic(&self) -> Fallback {
        match self {
            TailKind::Geometric(p) => Fallback::Geometric(*p),
            TailKind::Polynomial(c) => Fallback::Polynomial(*c),
            TailKind::Table { fallback, .. } => *fallback,
        }
    }

    pub fn class(&self) -> TailClass {
        match self.asymptotic() {
            Fallback::Geometric(p) if p >= 1.0 => TailClass::Frozen,
            Fallback::Geometric(p) => TailClass::Light(p),
            Fallback::Polynomial(c) => TailClass::Power(c),
        }
    }

    /// `q_{α^k β}(α)` for `k ≥ 1`.
    pub fn persist(&self, k: u64) -> f64 {
        debug_assert!(k >= 1);
        if let TailKind::Table { entries, .. } = self {
            if (k as usize) <= entries.len() {
                return entries[k as usize - 1];
            }
        }
        match self.asymptotic() {
            Fallback::Geometric(p) => p,
            Fallback::Polynomial(c) => (k as f64 / (k as f64 + 1.0)).powf(c),
        }
    }

    /// `1 − q_{α^k β}(α)`, computed without cancellation for polynomial laws.
    pub fn switch(&self, k: u64) -> f64 {
        if let TailKind::Table { entries, .. } = self {
            if (k as usize) <= entries.len() {
                return 1.0 - entries[k as usize - 1];
            }
        }
        match self.asymptotic() {
            Fallback::Geometric(p) => 1.0 - p,
            Fallback::Polynomial(c) => -(-c * (1.0 / k as f64).ln_1p()).exp_m1(),
        }
    }

    /// Product of the table entries `q_1 ⋯ q_L`.
    fn table_mass(&self) -> f64 {
        match self {
            TailKind::Table { entries, .. } => entries.iter().product(),
            _ => 1.0,
        }
    }

    /// `P(τ ≥ n) = ∏_{k=1}^{n-1} q_k`, in closed form past the table.
    pub fn tail(&self, n: u64) -> f64 {
        debug_assert!(n >= 1);
        let len = self.table_len() as u64;
        if n - 1 <= len {
            if let TailKind::Table { entries, .. } = self {
                return entries[..(n - 1) as usize].iter().product();
            }
        }
        let mass = self.table_mass();
        match self.asymptotic() {
            Fallback::Geometric(p) => mass * p.powf((n - 1 - len) as f64),
            Fallback::Polynomial(c) => mass * ((len + 1) as f64 / n as f64).powf(c),
        }
    }

    /// `P(τ = n)`.
    pub fn point(&self, n: u64) -> f64 {
        self.tail(n) * self.switch(n)
    }

    /// `lim_n P(τ ≥ n)`: zero unless the law is frozen.
    pub fn tail_limit(&self) -> f64 {
        match self.class() {
            TailClass::Frozen => self.table_mass(),
            _ => 0.0,
        }
    }

    /// `Σ_{n≥1} P(τ ≥ n)`, the mean run length, in closed form (`∞` when divergent).
    pub fn mean(&self) -> f64 {
        let len = self.table_len() as u64;
        let head: f64 = (1..=len + 1).map(|n| self.tail(n)).sum();
        let mass = self.table_mass();
        match self.class() {
            TailClass::Frozen => f64::INFINITY,
            TailClass::Light(p) => {
                if len == 0 {
                    1.0 / (1.0 - p)
                } else {
                    head + mass * p / (1.0 - p)
                }
            }
            TailClass::Power(c) if c <= 1.0 => f64::INFINITY,
            TailClass::Power(c) => {
                if len == 0 {
                    hurwitz_tail(c, 1)
                } else {
                    head + mass * ((len + 1) as f64).powf(c) * hurwitz_tail(c, len + 2)
                }
            }
        }
    }

    /// `Σ_{n≥m} P(τ ≥ n)` for `m ≥ 1`, closed form.
    pub fn mean_from(&self, m: u64) -> f64 {
        let total = self.mean();
        if m <= 1 {
            return total;
        }
        if total.is_infinite() {
            return total;
        }
        match (self, self.class()) {
            (TailKind::Geometric(_), TailClass::Light(p)) => p.powf((m - 1) as f64) / (1.0 - p),
            (TailKind::Polynomial(_), TailClass::Power(c)) => hurwitz_tail(c, m),
            _ => {
                let len = self.table_len() as u64;
                if m > len + 1 {
                    let mass = self.table_mass();
                    match self.class() {
                        TailClass::Light(p) => mass * p.powf((m - 1 - len) as f64) / (1.0 - p),
                        TailClass::Power(c) => mass * ((len + 1) as f64).powf(c) * hurwitz_tail(c, m),
                        TailClass::Frozen => f64::INFINITY,
                    }
                } else {
                    total - (1..m).map(|n| self.tail(n)).sum::<f64>()
                }
            }
        }
    }
}

/// `Σ_{n≥start} n^{-c}` for `c > 1`: explicit head plus an Euler-Maclaurin tail.
pub fn hurwitz_tail(c: f64, start: u64) -> f64 {
    assert!(c > 1.0, "p-series with exponent {c} diverges");
    assert!(start >= 1);
    let cut = start.max(64);
    let head: f64 = (start..cut).map(|n| (n as f64).powf(-c)).sum();
    let m = cut as f64;
    let mc = m.powf(-c);
    let tail = m.powf(1.0 - c) / (c - 1.0) + mc / 2.0 + c * mc / (12.0 * m)
        - c * (c + 1.0) * (c + 2.0) * mc / (720.0 * m.powi(3))
        + c * (c + 1.0) * (c + 2.0) * (c + 3.0) * (c + 4.0) * mc / (30240.0 * m.powi(5));
    head + tail
}

/// Persistence law for contexts `α^k β` together with the switch weights.
#[derive(Clone, Debug, PartialEq)]
pub struct TailRule {
    pub kind: TailKind,
    /// Indexed by letter; the persisting letter carries weight 0.
    pub switch_weights: Vec<f64>,
}

impl TailRule {
    /// Builds a rule for runs of `persisting` over an alphabet of `arity` letters.
    pub fn new(kind: TailKind, persisting: Letter, switch_weights: Vec<f64>) -> Result<Self, TailError> {
        kind.validate()?;
        if switch_weights[persisting.index()] != 0.0 {
            return Err(TailError::SelfSwitch);
        }
        let sum: f64 = switch_weights.iter().sum();
        if switch_weights.iter().any(|&w| !(w >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
            return Err(TailError::BadSwitchWeights(sum));
        }
        Ok(Self { kind, switch_weights })
    }

    /// Uniform switch weights over the letters other than `persisting`.
    pub fn uniform(kind: TailKind, persisting: Letter, arity: usize) -> Result<Self, TailError> {
        let w = 1.0 / (arity - 1) as f64;
        let weights = (0..arity).map(|i| if i == persisting.index() { 0.0 } else { w }).collect();
        Self::new(kind, persisting, weights)
    }

    /// `q_{α^k β}(γ)`.
    pub fn q(&self, persisting: Letter, k: u64, letter: Letter) -> f64 {
        if letter == persisting {
            self.kind.persist(k)
        } else {
            self.kind.switch(k) * self.switch_weights[letter.index()]
        }
    }
}
