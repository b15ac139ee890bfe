//! Model configuration files.
//!
//! A model is a TOML document; the grammar is described in `docs/config.md`.
//! Words are written newest letter first, and every file must say so with
//! `orientation = "left-growth"`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Deserialize;
use thiserror::Error;
use toml::Spanned;
use vlmc_core::cascades::SeriesPolicy;
use vlmc_core::words::shortlex;
use vlmc_core::{Alphabet, ContextTree, Fallback, Letter, ProbabilizedTree, TailKind, TailRule, Word};

pub const ORIENTATION: &str = "left-growth";

/// Rows of `q.explicit` must sum to 1 within this tolerance.
const SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("syntax error at line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("invalid `{field}`{}: {reason}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Semantic { field: String, line: Option<usize>, reason: String },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    orientation: Spanned<String>,
    alphabet: Spanned<Vec<String>>,
    init: Spanned<String>,
    seed: Option<u64>,
    #[serde(default)]
    policy: RawPolicy,
    tree: RawTree,
    q: RawQ,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawPolicy {
    max_terms: Option<u64>,
    abs_tol: Option<f64>,
    divergence_threshold: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTree {
    explicit: Option<RawLeaves>,
    comb: Option<BTreeMap<String, toml::Value>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLeaves {
    leaves: Spanned<Vec<String>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawQ {
    explicit: Option<BTreeMap<String, Spanned<Vec<f64>>>>,
    comb: Option<BTreeMap<String, RawRule>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRule {
    tail: String,
    p: Option<f64>,
    c: Option<f64>,
    entries: Option<Vec<f64>>,
    fallback: Option<RawFallback>,
    switch_weights: Option<BTreeMap<String, f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFallback {
    tail: String,
    p: Option<f64>,
    c: Option<f64>,
}

/// One comb rule: the pair `αβ` (newest first) and its persistence law.
#[derive(Clone, Debug, PartialEq)]
pub struct RuleSpec {
    pub pair: Word,
    pub kind: TailKind,
    /// Indexed by letter; zero for the persisting letter.
    pub switch_weights: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TreeSpec {
    /// Contexts with their distributions, in shortlex order.
    Explicit(Vec<(Word, Vec<f64>)>),
    /// One rule per ordered pair of distinct letters, in alphabet order.
    Comb(Vec<RuleSpec>),
}

/// A validated model file.
#[derive(Clone, Debug)]
pub struct ModelConfig {
    pub alphabet: Alphabet,
    pub init: Word,
    pub seed: Option<u64>,
    pub policy: SeriesPolicy,
    pub tree: TreeSpec,
    pub model: ProbabilizedTree,
}

struct Ctx<'a> {
    text: &'a str,
}

impl Ctx<'_> {
    fn line(&self, offset: usize) -> usize {
        self.text[..offset.min(self.text.len())].matches('\n').count() + 1
    }

    /// Span of the first line starting with `prefix`.
    fn header(&self, prefix: &str) -> Option<std::ops::Range<usize>> {
        let mut offset = 0;
        for l in self.text.split_inclusive('\n') {
            if l.trim_start().starts_with(prefix) {
                return Some(offset..offset + l.len());
            }
            offset += l.len();
        }
        None
    }

    fn err<T>(&self, field: impl Into<String>, span: Option<std::ops::Range<usize>>, reason: impl Into<String>) -> Result<T, ConfigError> {
        Err(ConfigError::Semantic { field: field.into(), line: span.map(|s| self.line(s.start)), reason: reason.into() })
    }
}

/// Parses and validates a model file.
pub fn parse_model_config(text: &str) -> Result<ModelConfig, ConfigError> {
    let cx = Ctx { text };
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Syntax {
        line: e.span().map(|s| cx.line(s.start)).unwrap_or(1),
        message: e.message().to_string(),
    })?;

    if raw.orientation.get_ref() != ORIENTATION {
        return cx.err("orientation", Some(raw.orientation.span()), format!("must be \"{ORIENTATION}\""));
    }

    let mut symbols = Vec::new();
    for s in raw.alphabet.get_ref() {
        let mut chars = s.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) if !c.is_whitespace() && c != ',' => symbols.push(c),
            _ => return cx.err("alphabet", Some(raw.alphabet.span()), format!("'{s}' is not a single printable symbol")),
        }
    }
    let alphabet = Alphabet::new(symbols).or_else(|e| cx.err("alphabet", Some(raw.alphabet.span()), e.to_string()))?;

    let defaults = SeriesPolicy::default();
    let policy = SeriesPolicy {
        max_terms: raw.policy.max_terms.unwrap_or(defaults.max_terms),
        abs_tol: raw.policy.abs_tol.unwrap_or(defaults.abs_tol),
        divergence_threshold: raw.policy.divergence_threshold.unwrap_or(defaults.divergence_threshold),
    };
    if policy.max_terms == 0 {
        return cx.err("policy.max_terms", None, "must be at least 1");
    }
    if !(policy.abs_tol > 0.0) {
        return cx.err("policy.abs_tol", None, "must be positive");
    }
    if !(policy.divergence_threshold > 0.0) {
        return cx.err("policy.divergence_threshold", None, "must be positive");
    }

    let tree_span = cx.header("[tree");
    let q_span = cx.header("[q");
    let (tree, q) = (raw.tree, raw.q);
    let spec = match (tree.explicit, tree.comb) {
        (Some(leaves), None) => {
            if q.comb.is_some() {
                return cx.err("q.comb", q_span.clone(), "an explicit tree takes `q.explicit`");
            }
            let Some(qe) = q.explicit else {
                return cx.err("q.explicit", q_span.clone(), "missing");
            };
            explicit_spec(&cx, &alphabet, leaves, qe)?
        }
        (None, Some(extra)) => {
            if let Some(k) = extra.keys().next() {
                return cx.err(format!("tree.comb.{k}"), tree_span.clone(), "`tree.comb` takes no fields");
            }
            if q.explicit.is_some() {
                return cx.err("q.explicit", q_span.clone(), "a comb takes `q.comb`");
            }
            let Some(qc) = q.comb else {
                return cx.err("q.comb", q_span.clone(), "missing");
            };
            comb_spec(&cx, &alphabet, qc)?
        }
        _ => return cx.err("tree", tree_span.clone(), "exactly one of `tree.explicit` and `tree.comb` is required"),
    };

    let model = build(&alphabet, &spec).or_else(|e| cx.err("q", q_span.clone(), e))?;

    let init = alphabet.parse(raw.init.get_ref()).or_else(|e| cx.err("init", Some(raw.init.span()), e.to_string()))?;
    if let Err(e) = model.context_of(&init) {
        return cx.err("init", Some(raw.init.span()), e.to_string());
    }

    Ok(ModelConfig { alphabet, init, seed: raw.seed, policy, tree: spec, model })
}

fn explicit_spec(
    cx: &Ctx,
    alphabet: &Alphabet,
    leaves: RawLeaves,
    q: BTreeMap<String, Spanned<Vec<f64>>>,
) -> Result<TreeSpec, ConfigError> {
    let span = leaves.leaves.span();
    let mut words = Vec::new();
    for s in leaves.leaves.get_ref() {
        words.push(alphabet.parse(s).or_else(|e| cx.err("tree.explicit.leaves", Some(span.clone()), e.to_string()))?);
    }
    let tree = ContextTree::explicit(alphabet.clone(), &words)
        .or_else(|e| cx.err("tree.explicit.leaves", Some(span.clone()), e.to_string()))?;
    let mut rows = Vec::new();
    for (key, probs) in &q {
        let field = format!("q.explicit.\"{key}\"");
        let w = alphabet.parse(key).or_else(|e| cx.err(&field, Some(probs.span()), e.to_string()))?;
        if tree.as_explicit().unwrap().leaf_id(&w).is_none() {
            return cx.err(&field, Some(probs.span()), "not a leaf of `tree.explicit`");
        }
        let p = probs.get_ref();
        if p.len() != alphabet.len() {
            return cx.err(&field, Some(probs.span()), format!("{} probabilities for {} letters", p.len(), alphabet.len()));
        }
        if p.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
            return cx.err(&field, Some(probs.span()), "probabilities must lie in [0, 1]");
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return cx.err(&field, Some(probs.span()), format!("probabilities sum to {sum}, not 1"));
        }
        rows.push((w, p.clone()));
    }
    for leaf in tree.as_explicit().unwrap().leaves() {
        if !rows.iter().any(|(w, _)| w == leaf) {
            return cx.err(format!("q.explicit.\"{}\"", alphabet.render(leaf)), None, "missing distribution for this context");
        }
    }
    rows.sort_by(|a, b| shortlex(&a.0, &b.0));
    Ok(TreeSpec::Explicit(rows))
}

fn tail_kind(cx: &Ctx, field: &str, span: Option<std::ops::Range<usize>>, r: &RawRule) -> Result<TailKind, ConfigError> {
    let need = |v: Option<f64>, name: &str| match v {
        Some(x) => Ok(x),
        None => cx.err(format!("{field}.{name}"), span.clone(), format!("required for tail = \"{}\"", r.tail)),
    };
    let unused = |present: bool, name: &str| {
        if present {
            cx.err(format!("{field}.{name}"), span.clone(), format!("not used by tail = \"{}\"", r.tail))
        } else {
            Ok(())
        }
    };
    let kind = match r.tail.as_str() {
        "geometric" => {
            unused(r.c.is_some(), "c")?;
            unused(r.entries.is_some(), "entries")?;
            unused(r.fallback.is_some(), "fallback")?;
            TailKind::Geometric(need(r.p, "p")?)
        }
        "polynomial" => {
            unused(r.p.is_some(), "p")?;
            unused(r.entries.is_some(), "entries")?;
            unused(r.fallback.is_some(), "fallback")?;
            TailKind::Polynomial(need(r.c, "c")?)
        }
        "table" => {
            unused(r.p.is_some(), "p")?;
            unused(r.c.is_some(), "c")?;
            let Some(entries) = r.entries.clone() else {
                return cx.err(format!("{field}.entries"), span, "required for tail = \"table\"");
            };
            let Some(fb) = &r.fallback else {
                return cx.err(format!("{field}.fallback"), span, "required for tail = \"table\"");
            };
            let ff = format!("{field}.fallback");
            let fallback = match (fb.tail.as_str(), fb.p, fb.c) {
                ("geometric", Some(p), None) => Fallback::Geometric(p),
                ("polynomial", None, Some(c)) => Fallback::Polynomial(c),
                _ => {
                    return cx.err(ff, span, "expected { tail = \"geometric\", p = … } or { tail = \"polynomial\", c = … }")
                }
            };
            TailKind::Table { entries, fallback }
        }
        other => return cx.err(format!("{field}.tail"), span, format!("unknown tail '{other}' (geometric, polynomial or table)")),
    };
    kind.validate().or_else(|e| cx.err(field, span, e.to_string()))?;
    Ok(kind)
}

fn comb_spec(cx: &Ctx, alphabet: &Alphabet, q: BTreeMap<String, RawRule>) -> Result<TreeSpec, ConfigError> {
    let mut rules = Vec::new();
    for (key, raw) in &q {
        let field = format!("q.comb.{key}");
        let span = cx.header(&format!("[{field}]"));
        let pair = alphabet.parse(key).or_else(|e| cx.err(&field, span.clone(), e.to_string()))?;
        if pair.len() != 2 || pair[0] == pair[1] {
            return cx.err(&field, span, "keys are two distinct letters αβ, newest first");
        }
        let r = raw;
        let kind = tail_kind(cx, &field, span.clone(), r)?;
        let alpha = pair[0];
        let switch_weights = match &r.switch_weights {
            None => {
                let w = 1.0 / (alphabet.len() - 1) as f64;
                alphabet.letters().map(|l| if l == alpha { 0.0 } else { w }).collect()
            }
            Some(map) => {
                let mut w = vec![0.0; alphabet.len()];
                for (s, &x) in map {
                    let wf = format!("{field}.switch_weights.{s}");
                    let l = match s.chars().collect::<Vec<_>>()[..] {
                        [c] => alphabet.letter(c).or_else(|e| cx.err(&wf, span.clone(), e.to_string()))?,
                        _ => return cx.err(&wf, span.clone(), "keys are single letters"),
                    };
                    if l == alpha {
                        return cx.err(&wf, span.clone(), "the persisting letter takes no switch weight");
                    }
                    if !(x >= 0.0) {
                        return cx.err(&wf, span.clone(), "weights must be nonnegative");
                    }
                    w[l.index()] = x;
                }
                let sum: f64 = w.iter().sum();
                if (sum - 1.0).abs() > SUM_TOL {
                    return cx.err(format!("{field}.switch_weights"), span, format!("weights sum to {sum}, not 1"));
                }
                w
            }
        };
        rules.push(RuleSpec { pair, kind, switch_weights });
    }
    for a in alphabet.letters() {
        for b in alphabet.letters().filter(|&b| b != a) {
            if !rules.iter().any(|r| r.pair[..] == [a, b]) {
                return cx.err(format!("q.comb.{}", alphabet.render(&[a, b])), None, "missing rule for this pair");
            }
        }
    }
    rules.sort_by_key(|r| (r.pair[0], r.pair[1]));
    Ok(TreeSpec::Comb(rules))
}

fn build(alphabet: &Alphabet, spec: &TreeSpec) -> Result<ProbabilizedTree, String> {
    match spec {
        TreeSpec::Explicit(rows) => {
            let leaves: Vec<Word> = rows.iter().map(|(w, _)| w.clone()).collect();
            let tree = ContextTree::explicit(alphabet.clone(), &leaves).map_err(|e| e.to_string())?;
            ProbabilizedTree::explicit(tree, rows.clone()).map_err(|e| e.to_string())
        }
        TreeSpec::Comb(rules) => {
            let rules = rules
                .iter()
                .map(|r| {
                    TailRule::new(r.kind.clone(), r.pair[0], r.switch_weights.clone())
                        .map(|t| ((r.pair[0], r.pair[1]), t))
                        .map_err(|e| format!("q.comb.{}: {e}", alphabet.render(&r.pair)))
                })
                .collect::<Result<Vec<_>, _>>()?;
            ProbabilizedTree::comb(alphabet.clone(), rules).map_err(|e| e.to_string())
        }
    }
}

fn quoted(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

fn key(s: &str) -> String {
    if !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
        s.to_string()
    } else {
        quoted(s)
    }
}

fn float(x: f64) -> String {
    format!("{x:?}")
}

fn floats(xs: &[f64]) -> String {
    xs.iter().map(|&x| float(x)).collect::<Vec<_>>().join(", ")
}

impl ModelConfig {
    /// The canonical text of this model; parsing it gives back the same text.
    pub fn emit(&self) -> String {
        let a = &self.alphabet;
        let mut out = String::new();
        writeln!(out, "orientation = {}", quoted(ORIENTATION)).unwrap();
        let symbols: Vec<String> = a.symbols().iter().map(|c| quoted(&c.to_string())).collect();
        writeln!(out, "alphabet = [{}]", symbols.join(", ")).unwrap();
        writeln!(out, "init = {}", quoted(&a.render(&self.init))).unwrap();
        if let Some(seed) = self.seed {
            writeln!(out, "seed = {seed}").unwrap();
        }
        writeln!(out, "\n[policy]").unwrap();
        writeln!(out, "max_terms = {}", self.policy.max_terms).unwrap();
        writeln!(out, "abs_tol = {}", float(self.policy.abs_tol)).unwrap();
        writeln!(out, "divergence_threshold = {}", float(self.policy.divergence_threshold)).unwrap();
        match &self.tree {
            TreeSpec::Explicit(rows) => {
                let leaves: Vec<String> = rows.iter().map(|(w, _)| quoted(&a.render(w))).collect();
                writeln!(out, "\n[tree.explicit]\nleaves = [{}]", leaves.join(", ")).unwrap();
                writeln!(out, "\n[q.explicit]").unwrap();
                for (w, p) in rows {
                    writeln!(out, "{} = [{}]", key(&a.render(w)), floats(p)).unwrap();
                }
            }
            TreeSpec::Comb(rules) => {
                writeln!(out, "\n[tree.comb]").unwrap();
                for r in rules {
                    writeln!(out, "\n[q.comb.{}]", key(&a.render(&r.pair))).unwrap();
                    match &r.kind {
                        TailKind::Geometric(p) => writeln!(out, "tail = \"geometric\"\np = {}", float(*p)).unwrap(),
                        TailKind::Polynomial(c) => writeln!(out, "tail = \"polynomial\"\nc = {}", float(*c)).unwrap(),
                        TailKind::Table { entries, fallback } => {
                            writeln!(out, "tail = \"table\"\nentries = [{}]", floats(entries)).unwrap();
                            match fallback {
                                Fallback::Geometric(p) => {
                                    writeln!(out, "fallback = {{ tail = \"geometric\", p = {} }}", float(*p)).unwrap()
                                }
                                Fallback::Polynomial(c) => {
                                    writeln!(out, "fallback = {{ tail = \"polynomial\", c = {} }}", float(*c)).unwrap()
                                }
                            }
                        }
                    }
                    let weights: Vec<String> = a
                        .letters()
                        .filter(|&l| l != r.pair[0])
                        .map(|l: Letter| format!("{} = {}", key(&a.symbol(l).to_string()), float(r.switch_weights[l.index()])))
                        .collect();
                    writeln!(out, "switch_weights = {{ {} }}", weights.join(", ")).unwrap();
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOUBLE: &str = r#"
orientation = "left-growth"
alphabet = ["d", "u"]
init = "du"

[tree.comb]

[q.comb.ud]
tail = "geometric"
p = 0.5

[q.comb.du]
tail = "geometric"
p = 0.5
"#;

    #[test]
    fn minimal_double_comb() {
        let c = parse_model_config(DOUBLE).unwrap();
        assert!(c.model.tree().is_comb());
        assert_eq!(c.policy, SeriesPolicy::default());
        let text = c.emit();
        assert_eq!(parse_model_config(&text).unwrap().emit(), text);
    }

    #[test]
    fn integers_are_accepted_as_probabilities() {
        let text = r#"
orientation = "left-growth"
alphabet = ["0", "1"]
init = "0"
[tree.explicit]
leaves = ["0", "1"]
[q.explicit]
0 = [1, 0]
1 = [0.5, 0.5]
"#;
        let c = parse_model_config(text).unwrap();
        assert!(!c.model.validate_non_null().passed());
    }

    #[test]
    fn bad_row_sum_is_located() {
        let text = r#"orientation = "left-growth"
alphabet = ["0", "1"]
init = "0"
[tree.explicit]
leaves = ["0", "1"]
[q.explicit]
0 = [0.5, 0.4]
1 = [0.5, 0.5]
"#;
        match parse_model_config(text) {
            Err(ConfigError::Semantic { field, line, reason }) => {
                assert_eq!(field, "q.explicit.\"0\"");
                assert_eq!(line, Some(7));
                assert!(reason.contains("0.9"), "{reason}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_errors_have_lines() {
        let err = parse_model_config("orientation = \"left-growth\"\nalphabet = [\n").unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { line: 2 | 3, .. }), "{err:?}");
    }

    #[test]
    fn orientation_is_mandatory() {
        let text = DOUBLE.replace("left-growth", "right-growth");
        let err = parse_model_config(&text).unwrap_err();
        assert!(matches!(err, ConfigError::Semantic { ref field, .. } if field == "orientation"));
    }

    #[test]
    fn missing_pair_and_bad_tail() {
        let text = DOUBLE.replace("[q.comb.du]\ntail = \"geometric\"\np = 0.5\n", "");
        let err = parse_model_config(&text).unwrap_err();
        assert!(matches!(err, ConfigError::Semantic { ref field, .. } if field == "q.comb.du"), "{err:?}");
        let text = DOUBLE.replacen("p = 0.5", "p = 1.5", 1);
        assert!(parse_model_config(&text).is_err());
        let text = DOUBLE.replacen("p = 0.5", "c = 0.5", 1);
        let err = parse_model_config(&text).unwrap_err();
        assert!(matches!(err, ConfigError::Semantic { ref field, .. } if field.ends_with(".c")), "{err:?}");
    }

    #[test]
    fn internal_init_is_rejected() {
        let text = DOUBLE.replace("init = \"du\"", "init = \"uu\"");
        let err = parse_model_config(&text).unwrap_err();
        assert!(matches!(err, ConfigError::Semantic { ref field, .. } if field == "init"), "{err:?}");
    }
}
