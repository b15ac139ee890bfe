//! Probabilized context trees.

use thiserror::Error;

use crate::tail::{TailClass, TailError, TailKind, TailRule};
use crate::tree::{ContextTree, TreeError, TreeKind, Walk};
use crate::words::{leading_run, Alphabet, Letter, Word};

/// Probabilities below this are reported as zeros by [`ProbabilizedTree::validate_non_null`].
pub const ZERO_THRESHOLD: f64 = 1e-15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("context '{0}' has no distribution")]
    MissingDistribution(String),
    #[error("'{0}' is not a context of the tree")]
    UnknownContext(String),
    #[error("distribution of context '{context}' is invalid (sum = {sum})")]
    BadDistribution { context: String, sum: f64 },
    #[error("distribution of context '{context}' has {got} entries, expected {expected}")]
    WrongArity { context: String, got: usize, expected: usize },
    #[error("no tail rule for the pair '{0}'")]
    MissingRule(String),
    #[error("tail rule for '{pair}': {source}")]
    Tail { pair: String, source: TailError },
    #[error("the tree is not stable")]
    NotStable,
    #[error("history cap of {0} letters reached on a non-stable tree")]
    HistoryCapExceeded(usize),
    #[error("a run of '{letter}' exceeded the cap of {cap} steps")]
    RunCapExceeded { letter: char, cap: u64 },
    #[error("runs of '{0}' are infinite with positive probability (cascades do not vanish)")]
    RunsNotFinite(String),
    #[error("this operation needs a comb on {expected} letters")]
    WrongFamily { expected: usize },
}

/// Compact handle on a context: a leaf id or a comb run `α^len β`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ContextRef {
    Leaf(u32),
    Run { letter: Letter, len: u64, before: Letter },
}

#[derive(Clone, Debug)]
enum Transitions {
    /// One distribution per leaf id, plus the pref(α·c) table on stable trees.
    Explicit { dists: Vec<Vec<f64>>, next: Option<Vec<u32>> },
    /// Rule for `(α, β)` at `α * |A| + β`.
    Comb(Vec<Option<TailRule>>),
}

/// Non-nullness report: every `(context, letter)` pair with `q_c(letter) = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct NonNullReport {
    pub zeros: Vec<(Word, Letter)>,
}

impl NonNullReport {
    pub fn passed(&self) -> bool {
        self.zeros.is_empty()
    }
}

/// A context tree with one next-letter distribution per finite context.
#[derive(Clone, Debug)]
pub struct ProbabilizedTree {
    tree: ContextTree,
    q: Transitions,
}

impl ProbabilizedTree {
    /// Explicit tree with `q` given per context (any order).
    pub fn explicit(tree: ContextTree, q: Vec<(Word, Vec<f64>)>) -> Result<Self, ModelError> {
        let t = tree.as_explicit().expect("explicit tree required");
        let arity = tree.alphabet().len();
        let mut dists: Vec<Option<Vec<f64>>> = vec![None; t.leaves().len()];
        for (ctx, dist) in q {
            let id = t.leaf_id(&ctx).ok_or_else(|| ModelError::UnknownContext(tree.render(&ctx)))?;
            if dist.len() != arity {
                return Err(ModelError::WrongArity { context: tree.render(&ctx), got: dist.len(), expected: arity });
            }
            let sum: f64 = dist.iter().sum();
            if dist.iter().any(|&p| !(0.0..=1.0).contains(&p)) || (sum - 1.0).abs() > 1e-12 {
                return Err(ModelError::BadDistribution { context: tree.render(&ctx), sum });
            }
            dists[id] = Some(dist);
        }
        let dists = dists
            .into_iter()
            .enumerate()
            .map(|(id, d)| d.ok_or_else(|| ModelError::MissingDistribution(tree.render(t.leaf(id)))))
            .collect::<Result<Vec<_>, _>>()?;
        let next = tree.stable().then(|| {
            let mut next = Vec::with_capacity(t.leaves().len() * arity);
            for c in t.leaves() {
                for a in tree.alphabet().letters() {
                    match t.walk(std::iter::once(a).chain(c.iter().copied())) {
                        Walk::Leaf { id, .. } => next.push(id as u32),
                        Walk::Internal => unreachable!("αc is non-internal on a stable tree"),
                    }
                }
            }
            next
        });
        Ok(Self { tree, q: Transitions::Explicit { dists, next } })
    }

    /// Explicit tree from `(context, distribution)` pairs written as strings.
    pub fn explicit_from_strs(alphabet: Alphabet, q: &[(&str, &[f64])]) -> Result<Self, crate::Error> {
        let leaves = q.iter().map(|(c, _)| alphabet.parse(c)).collect::<Result<Vec<_>, _>>()?;
        let tree = ContextTree::explicit(alphabet, &leaves)?;
        let pairs = leaves.into_iter().zip(q.iter().map(|(_, d)| d.to_vec())).collect();
        Ok(Self::explicit(tree, pairs)?)
    }

    /// Comb with one rule per ordered pair `(α, β)`, `α ≠ β`.
    pub fn comb(alphabet: Alphabet, rules: Vec<((Letter, Letter), TailRule)>) -> Result<Self, ModelError> {
        let n = alphabet.len();
        let mut table: Vec<Option<TailRule>> = vec![None; n * n];
        for ((a, b), rule) in rules {
            assert_ne!(a, b, "comb rules are indexed by pairs of distinct letters");
            if rule.switch_weights.len() != n {
                return Err(ModelError::WrongArity {
                    context: alphabet.render(&[a, b]),
                    got: rule.switch_weights.len(),
                    expected: n,
                });
            }
            rule.kind.validate().map_err(|source| ModelError::Tail { pair: alphabet.render(&[a, b]), source })?;
            table[a.index() * n + b.index()] = Some(rule);
        }
        for a in alphabet.letters() {
            for b in alphabet.letters().filter(|&b| b != a) {
                if table[a.index() * n + b.index()].is_none() {
                    return Err(ModelError::MissingRule(alphabet.render(&[a, b])));
                }
            }
        }
        Ok(Self { tree: ContextTree::comb(alphabet), q: Transitions::Comb(table) })
    }

    /// Comb where every pair `(α, β)` uses `kind_of(α)` with uniform switch weights.
    pub fn comb_uniform(alphabet: Alphabet, kind_of: impl Fn(Letter) -> TailKind) -> Result<Self, ModelError> {
        let n = alphabet.len();
        let mut rules = Vec::new();
        for a in alphabet.letters() {
            for b in alphabet.letters().filter(|&b| b != a) {
                let rule = TailRule::uniform(kind_of(a), a, n)
                    .map_err(|source| ModelError::Tail { pair: alphabet.render(&[a, b]), source })?;
                rules.push(((a, b), rule));
            }
        }
        Self::comb(alphabet, rules)
    }

    pub fn tree(&self) -> &ContextTree {
        &self.tree
    }

    pub fn alphabet(&self) -> &Alphabet {
        self.tree.alphabet()
    }

    /// Rule governing the contexts `α^k β`.
    pub fn rule(&self, alpha: Letter, beta: Letter) -> Option<&TailRule> {
        match &self.q {
            Transitions::Comb(t) => t[alpha.index() * self.alphabet().len() + beta.index()].as_ref(),
            Transitions::Explicit { .. } => None,
        }
    }

    pub(crate) fn comb_rule(&self, alpha: Letter, beta: Letter) -> &TailRule {
        self.rule(alpha, beta).expect("comb model")
    }

    /// `q_c(letter)` for a finite context `c`.
    pub fn q(&self, context: &[Letter], letter: Letter) -> f64 {
        match &self.q {
            Transitions::Explicit { dists, .. } => {
                let id = self.tree.as_explicit().unwrap().leaf_id(context).expect("not a context");
                dists[id][letter.index()]
            }
            Transitions::Comb(_) => {
                let k = leading_run(context);
                assert_eq!(k + 1, context.len(), "not a comb context");
                self.comb_rule(context[0], context[k]).q(context[0], k as u64, letter)
            }
        }
    }

    /// `q_{pref(w)}(letter)` for a non-internal word `w`.
    pub fn q_after(&self, w: &[Letter], letter: Letter) -> Result<f64, TreeError> {
        Ok(self.q_ref(&self.context_of(w)?, letter))
    }

    pub(crate) fn q_ref(&self, ctx: &ContextRef, letter: Letter) -> f64 {
        match (&self.q, *ctx) {
            (Transitions::Explicit { dists, .. }, ContextRef::Leaf(id)) => dists[id as usize][letter.index()],
            (Transitions::Comb(_), ContextRef::Run { letter: a, len, before }) => {
                self.comb_rule(a, before).q(a, len, letter)
            }
            _ => unreachable!("context handle from another model"),
        }
    }

    /// Context handle of the non-internal word `w`.
    pub fn context_of(&self, w: &[Letter]) -> Result<ContextRef, TreeError> {
        self.context_of_stream(w.iter().copied()).map_err(|()| TreeError::InternalWord(self.tree.render(w)))
    }

    /// Context handle of a newest-first letter stream; `Err` when the stream
    /// ends on an internal node.
    pub(crate) fn context_of_stream<I: Iterator<Item = Letter>>(&self, mut letters: I) -> Result<ContextRef, ()> {
        match self.tree.kind() {
            TreeKind::Explicit(t) => match t.walk(letters) {
                Walk::Leaf { id, .. } => Ok(ContextRef::Leaf(id as u32)),
                Walk::Internal => Err(()),
            },
            TreeKind::Comb => {
                let first = letters.next().ok_or(())?;
                let mut len = 1u64;
                for l in letters {
                    if l != first {
                        return Ok(ContextRef::Run { letter: first, len, before: l });
                    }
                    len += 1;
                }
                Err(())
            }
        }
    }

    /// `pref(letter · c)` on a stable tree.
    pub(crate) fn advance(&self, ctx: &ContextRef, letter: Letter) -> ContextRef {
        match (&self.q, *ctx) {
            (Transitions::Explicit { next: Some(next), .. }, ContextRef::Leaf(id)) => {
                ContextRef::Leaf(next[id as usize * self.alphabet().len() + letter.index()])
            }
            (Transitions::Comb(_), ContextRef::Run { letter: a, len, before }) => {
                if a == letter {
                    ContextRef::Run { letter: a, len: len + 1, before }
                } else {
                    ContextRef::Run { letter, len: 1, before: a }
                }
            }
            _ => panic!("advance needs a stable tree"),
        }
    }

    pub fn context_len(&self, ctx: &ContextRef) -> u64 {
        match *ctx {
            ContextRef::Leaf(id) => self.tree.as_explicit().unwrap().leaf(id as usize).len() as u64,
            ContextRef::Run { len, .. } => len + 1,
        }
    }

    pub fn context_word(&self, ctx: &ContextRef) -> Word {
        match *ctx {
            ContextRef::Leaf(id) => self.tree.as_explicit().unwrap().leaf(id as usize).clone(),
            ContextRef::Run { letter, len, before } => Word::power(letter, len as usize).append(before),
        }
    }

    /// Renders a context; long comb runs use power notation `α^k β`.
    pub fn render_context(&self, ctx: &ContextRef) -> String {
        match *ctx {
            ContextRef::Run { letter, len, before } if len > 256 => {
                let a = self.alphabet();
                format!("{}^{}{}", a.symbol(letter), len, a.symbol(before))
            }
            _ => self.tree.render(&self.context_word(ctx)),
        }
    }

    /// Draws the next letter from `q_ctx` by inversion of `u ∈ [0, 1)`.
    pub(crate) fn sample(&self, ctx: &ContextRef, u: f64) -> Letter {
        let n = self.alphabet().len();
        match (&self.q, *ctx) {
            (Transitions::Explicit { dists, .. }, ContextRef::Leaf(id)) => {
                let d = &dists[id as usize];
                let mut acc = 0.0;
                for (i, &p) in d.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return Letter(i as u8);
                    }
                }
                last_positive(d)
            }
            (Transitions::Comb(_), ContextRef::Run { letter, len, before }) => {
                let rule = self.comb_rule(letter, before);
                let stay = rule.kind.persist(len);
                if u < stay {
                    return letter;
                }
                // rescale the remaining uniform onto the switch weights
                let v = (u - stay) / (1.0 - stay);
                let mut acc = 0.0;
                for i in 0..n {
                    acc += rule.switch_weights[i];
                    if v < acc {
                        return Letter(i as u8);
                    }
                }
                last_positive(&rule.switch_weights)
            }
            _ => unreachable!("context handle from another model"),
        }
    }

    /// Reports every `(context, letter)` with a vanishing transition probability.
    ///
    /// On combs a zero is reported once per family: a zero switch weight is
    /// witnessed by `αβ`, a frozen tail by the first frozen context `α^k β`.
    pub fn validate_non_null(&self) -> NonNullReport {
        let mut zeros = Vec::new();
        match &self.q {
            Transitions::Explicit { dists, .. } => {
                let t = self.tree.as_explicit().unwrap();
                for (id, d) in dists.iter().enumerate() {
                    for (i, &p) in d.iter().enumerate() {
                        if p < ZERO_THRESHOLD {
                            zeros.push((t.leaf(id).clone(), Letter(i as u8)));
                        }
                    }
                }
            }
            Transitions::Comb(_) => {
                for a in self.alphabet().letters() {
                    for b in self.alphabet().letters().filter(|&b| b != a) {
                        let rule = self.comb_rule(a, b);
                        for g in self.alphabet().letters().filter(|&g| g != a) {
                            if rule.switch_weights[g.index()] < ZERO_THRESHOLD {
                                zeros.push((Word::from_letters(vec![a, b]), g));
                            }
                        }
                        let mut frozen_at = None;
                        if let TailKind::Table { entries, .. } = &rule.kind {
                            if rule.kind.class() == TailClass::Frozen {
                                frozen_at = Some(entries.len() as u64 + 1);
                            }
                        }
                        if let Some(k) = frozen_at {
                            for g in self.alphabet().letters().filter(|&g| g != a) {
                                zeros.push((Word::power(a, k as usize).append(b), g));
                            }
                        }
                    }
                }
            }
        }
        zeros.sort_by(|x, y| crate::words::shortlex(&x.0, &y.0).then(x.1.cmp(&y.1)));
        zeros.dedup();
        NonNullReport { zeros }
    }
}

fn last_positive(weights: &[f64]) -> Letter {
    // only reached through rounding when u is within an ulp of 1
    Letter(weights.iter().rposition(|&w| w > 0.0).unwrap_or(weights.len() - 1) as u8)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tail::Fallback;

    #[test]
    fn symmetric_double_comb_is_non_null() {
        let m = ProbabilizedTree::comb_uniform(Alphabet::down_up(), |_| TailKind::Geometric(0.5)).unwrap();
        assert!(m.validate_non_null().passed());
        let a = m.alphabet().clone();
        assert_eq!(m.q(&a.parse("uuud").unwrap(), Letter(0)), 0.5);
    }

    #[test]
    fn explicit_zero_is_reported() {
        let m = ProbabilizedTree::explicit_from_strs(
            Alphabet::binary(),
            &[("00", &[1.0, 0.0]), ("01", &[0.5, 0.5]), ("1", &[0.3, 0.7])],
        )
        .unwrap();
        let r = m.validate_non_null();
        assert_eq!(r.zeros.len(), 1);
        assert_eq!(m.tree().render(&r.zeros[0].0), "00");
        assert_eq!(r.zeros[0].1, Letter(1));
    }

    #[test]
    fn drrw_with_third_split_is_non_null() {
        let m = ProbabilizedTree::comb_uniform(Alphabet::compass(), |_| TailKind::Polynomial(1.5)).unwrap();
        assert!(m.validate_non_null().passed());
        let a = m.alphabet().clone();
        let ctx = a.parse("nnne").unwrap();
        let q = TailKind::Polynomial(1.5).persist(3);
        assert!((m.q(&ctx, a.letter('w').unwrap()) - (1.0 - q) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn frozen_tail_is_null() {
        let a = Alphabet::down_up();
        let (d, u) = (Letter(0), Letter(1));
        let frozen = TailKind::Table { entries: vec![0.5, 0.5], fallback: Fallback::Geometric(1.0) };
        let m = ProbabilizedTree::comb(
            a.clone(),
            vec![
                ((u, d), TailRule::uniform(frozen, u, 2).unwrap()),
                ((d, u), TailRule::uniform(TailKind::Geometric(0.5), d, 2).unwrap()),
            ],
        )
        .unwrap();
        let r = m.validate_non_null();
        assert_eq!(r.zeros, vec![(a.parse("uuud").unwrap(), d)]);
    }

    #[test]
    fn construction_errors() {
        let a = Alphabet::binary();
        let e = ProbabilizedTree::explicit_from_strs(a.clone(), &[("0", &[0.5, 0.4]), ("1", &[0.5, 0.5])]).unwrap_err();
        assert!(matches!(e, crate::Error::Model(ModelError::BadDistribution { .. })));
        let tree = ContextTree::explicit_from_strs(a.clone(), &["0", "1"]).unwrap();
        let e = ProbabilizedTree::explicit(tree, vec![(a.parse("0").unwrap(), vec![0.5, 0.5])]).unwrap_err();
        assert_eq!(e, ModelError::MissingDistribution("1".into()));
        let e = ProbabilizedTree::comb(a, vec![]).unwrap_err();
        assert!(matches!(e, ModelError::MissingRule(_)));
    }

    #[test]
    fn advance_matches_pref() {
        let m = ProbabilizedTree::explicit_from_strs(
            Alphabet::binary(),
            &[
                ("10", &[0.5, 0.5]),
                ("010", &[0.5, 0.5]),
                ("110", &[0.5, 0.5]),
                ("0010", &[0.5, 0.5]),
                ("0110", &[0.5, 0.5]),
                ("000", &[0.5, 0.5]),
                ("111", &[0.5, 0.5]),
                ("0111", &[0.5, 0.5]),
                ("0011", &[0.5, 0.5]),
            ],
        )
        .unwrap();
        let a = m.alphabet().clone();
        let ctx = m.context_of(&a.parse("10").unwrap()).unwrap();
        let next = m.advance(&ctx, Letter(0));
        assert_eq!(m.tree().render(&m.context_word(&next)), "010");
    }
}
