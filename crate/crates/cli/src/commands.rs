//! Subcommands. Each returns a [`RunReport`] whose body is deterministic
//! given the model, the flags and the seed.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;
use vlmc_core::cascades::{kappa, q_entry, CascadeSeriesResult};
use vlmc_core::prw1d::{self, classify, DoubleCombModel, Prw1Error, Verdict1D};
use vlmc_core::prw2d::{self, bend_stationary, build_bend_kernel, return_prob_diagnostic, QuadCombModel, PLATEAU_THRESHOLD};
use vlmc_core::semi_markov::{check_diagram, extract_mrc_bends, extract_mrc_bends_1d, extract_mrc_letters, tabulate_alpha_lis_kernel};
use vlmc_core::stationary::{build_q_matrix, stationarity_verdict, StationarityVerdict, StationaryError};
use vlmc_core::{simulate_letters, ProbabilizedTree, TreeError, Word};

use crate::config::ModelConfig;
use crate::csvout::CsvSink;

pub const SEED_ENV: &str = "VLMC_WALKS_SEED";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] crate::config::ConfigError),
    #[error("model error: {0}")]
    Model(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    /// A needed series could not be certified under the policy.
    #[error("inconclusive: {0}")]
    Inconclusive(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Inconclusive(_) => 2,
            _ => 1,
        }
    }
}

impl From<vlmc_core::Error> for CliError {
    fn from(e: vlmc_core::Error) -> Self {
        CliError::Model(e.to_string())
    }
}

impl From<TreeError> for CliError {
    fn from(e: TreeError) -> Self {
        CliError::Model(e.to_string())
    }
}

impl From<Prw1Error> for CliError {
    fn from(e: Prw1Error) -> Self {
        CliError::Model(e.to_string())
    }
}

/// Output of one command.
#[derive(Debug, Default)]
pub struct RunReport {
    pub body: String,
    pub warnings: Vec<String>,
    /// Some analytic result could not be certified.
    pub inconclusive: bool,
}

impl RunReport {
    fn line(&mut self, s: impl AsRef<str>) {
        self.body.push_str(s.as_ref());
        self.body.push('\n');
    }

    pub fn exit_code(&self) -> u8 {
        if self.inconclusive {
            2
        } else {
            0
        }
    }

    /// Command echo, model fingerprint, body and warnings.
    pub fn render(&self, command: &str, fingerprint: &str) -> String {
        let mut out = format!("command: {command}\nmodel: sha256:{fingerprint}\n");
        out.push_str(&self.body);
        if self.warnings.is_empty() {
            out.push_str("warnings: none\n");
        } else {
            out.push_str("warnings:\n");
            for w in &self.warnings {
                writeln!(out, "  - {w}").unwrap();
            }
        }
        out
    }
}

/// Where the seed came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeedSource {
    Flag,
    Config,
    Env,
    Default,
}

/// Flag, then config, then `VLMC_WALKS_SEED`, then 0.
pub fn resolve_seed(flag: Option<u64>, config: &ModelConfig) -> Result<(u64, SeedSource), CliError> {
    if let Some(s) = flag {
        return Ok((s, SeedSource::Flag));
    }
    if let Some(s) = config.seed {
        return Ok((s, SeedSource::Config));
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(|s| (s, SeedSource::Env))
            .map_err(|_| CliError::Model(format!("{SEED_ENV}='{v}' is not an unsigned integer"))),
        Err(_) => Ok((0, SeedSource::Default)),
    }
}

fn seed_line(r: &mut RunReport, (seed, src): (u64, SeedSource)) {
    let from = match src {
        SeedSource::Flag => "--seed",
        SeedSource::Config => "config",
        SeedSource::Env => SEED_ENV,
        SeedSource::Default => "default",
    };
    r.line(format!("seed: {seed} (from {from})"));
}

fn series(x: &CascadeSeriesResult) -> String {
    let cert = if x.analytic { "analytic" } else { "exact finite sum" };
    match x.status {
        vlmc_core::cascades::SeriesStatus::Converged(v) => format!("{v} [converged, {cert}]"),
        vlmc_core::cascades::SeriesStatus::Diverges => "inf [diverges, analytic]".into(),
        vlmc_core::cascades::SeriesStatus::Inconclusive { partial_sum, last_term } => {
            format!("{partial_sum} [inconclusive after {} terms, last term {last_term}]", x.terms_used)
        }
    }
}

fn csv_value(x: &CascadeSeriesResult) -> String {
    match x.status {
        vlmc_core::cascades::SeriesStatus::Converged(v) => v.to_string(),
        vlmc_core::cascades::SeriesStatus::Diverges => "inf".into(),
        vlmc_core::cascades::SeriesStatus::Inconclusive { partial_sum, .. } => partial_sum.to_string(),
    }
}

fn render(model: &ProbabilizedTree, w: &[vlmc_core::Letter]) -> String {
    model.alphabet().render(w)
}

fn double_comb(config: &ModelConfig) -> Result<DoubleCombModel, CliError> {
    DoubleCombModel::from_model(config.model.clone()).map_err(|e| CliError::Model(e.to_string()))
}

fn quad_comb(config: &ModelConfig) -> Result<QuadCombModel, CliError> {
    QuadCombModel::from_model(config.model.clone()).map_err(|e| CliError::Model(e.to_string()))
}

pub fn check(config: &ModelConfig) -> Result<RunReport, CliError> {
    let m = &config.model;
    let t = m.tree();
    let mut r = RunReport::default();
    r.line("status: valid");
    r.line(format!("alphabet: {}", config.alphabet.symbols().iter().map(char::to_string).collect::<Vec<_>>().join(" ")));
    match t.as_explicit() {
        Some(e) => r.line(format!("tree: explicit, {} contexts, height {}", e.leaves().len(), e.height())),
        None => r.line(format!("tree: comb on {} letters, contexts α^kβ for k ≥ 1", config.alphabet.len())),
    }
    let st = t.is_stable();
    match &st.witness {
        None => r.line("stable: yes"),
        Some(w) => r.line(format!("stable: no (witness {} is a node, {} is not)", render(m, w), render(m, &w[1..]))),
    }
    let s = t.alpha_lis_set()?;
    let names: Vec<String> = s.iter().map(|w| render(m, w)).collect();
    r.line(format!("alpha-lis set: {} elements {{{}}}", s.len(), names.join(", ")));
    let nn = m.validate_non_null();
    if nn.passed() {
        r.line("non-null: yes");
    } else {
        r.line(format!("non-null: no, {} vanishing transitions", nn.zeros.len()));
        for (c, a) in &nn.zeros {
            r.warnings.push(format!("q_{}({}) = 0", render(m, c), config.alphabet.symbol(*a)));
        }
    }
    let ctx = m.context_of(&config.init)?;
    r.line(format!("init: {} (context {})", render(m, &config.init), m.render_context(&ctx)));
    Ok(r)
}

pub fn cascades(config: &ModelConfig, csv: Option<&Path>) -> Result<RunReport, CliError> {
    let m = &config.model;
    let p = &config.policy;
    let mut r = RunReport::default();
    if !m.tree().stable() {
        r.warnings.push("the tree is not stable; Q is not the stationary system".into());
    }
    let s = m.tree().alpha_lis_set()?;
    let mut out = CsvSink::open(csv, &["table", "row", "col", "value", "status", "terms_used", "analytic"])?;
    r.line("kappa:");
    for a in &s {
        let k = kappa(m, a, p)?;
        r.inconclusive |= k.is_inconclusive();
        r.line(format!("  {} = {}", render(m, a), series(&k)));
        out.row(&["kappa", &render(m, a), "", &csv_value(&k), k.status_label(), &k.terms_used.to_string(), &k.analytic.to_string()])?;
    }
    r.line(format!("Q (rows and columns in order {}):", s.iter().map(|w| render(m, w)).collect::<Vec<_>>().join(", ")));
    for row in &s {
        let mut cells = Vec::new();
        for col in &s {
            let e = q_entry(m, row, col, p)?;
            r.inconclusive |= e.is_inconclusive();
            if !e.is_converged() {
                r.warnings.push(format!("Q[{}, {}] is {}", render(m, row), render(m, col), e.status_label()));
            }
            cells.push(csv_value(&e));
            out.row(&[
                "q",
                &render(m, row),
                &render(m, col),
                &csv_value(&e),
                e.status_label(),
                &e.terms_used.to_string(),
                &e.analytic.to_string(),
            ])?;
        }
        r.line(format!("  {}: [{}]", render(m, row), cells.join(", ")));
    }
    out.finish()?;
    Ok(r)
}

pub fn stationary(config: &ModelConfig, cylinders: &[String], csv: Option<&Path>) -> Result<RunReport, CliError> {
    let m = &config.model;
    let mut r = RunReport::default();
    let verdict = stationarity_verdict(m, &config.policy);
    r.line(format!("verdict: {}", verdict.label()));
    if let Some(reason) = verdict.reason() {
        r.line(format!("reason: {reason}"));
    }
    if matches!(verdict, StationarityVerdict::Unsupported(_)) {
        r.inconclusive = blocked_by_series(m, &config.policy);
    }
    let mut out = CsvSink::open(csv, &["alpha_lis", "mass", "kappa"])?;
    if let Some(mu) = verdict.measure() {
        r.line("base (π(αsR) on the alpha-lis set):");
        for (i, w) in mu.index.iter().enumerate() {
            r.line(format!("  {} = {} [linear solve] (kappa {})", render(m, w), mu.base[i], mu.kappa[i]));
            out.row(&[&render(m, w), &mu.base[i].to_string(), &mu.kappa[i].to_string()])?;
        }
        r.line(format!("fixed-vector residual: {:e}", mu.residual));
        r.line(format!("total mass of one-letter cylinders: {}", mu.total_mass));
    }
    out.finish()?;
    for c in cylinders {
        let w = config.alphabet.parse(c).map_err(|e| CliError::Model(format!("--cylinder {c}: {e}")))?;
        let Some(mu) = verdict.measure() else {
            return Err(CliError::Model(format!("--cylinder {c}: no stationary probability ({})", verdict.label())));
        };
        let v = mu.cylinder(&w).map_err(|e| CliError::Model(format!("--cylinder {c}: {e}")))?;
        r.line(format!("cylinder {c}: {v} [linear solve]"));
    }
    Ok(r)
}

/// True when some κ or Q entry could not be certified.
fn blocked_by_series(m: &ProbabilizedTree, policy: &vlmc_core::cascades::SeriesPolicy) -> bool {
    let Ok(s) = m.tree().alpha_lis_set() else { return false };
    s.iter().any(|a| kappa(m, a, policy).is_ok_and(|k| k.is_inconclusive()))
        || matches!(build_q_matrix(m, policy), Err(StationaryError::InconclusiveEntry { .. }))
}

pub fn classify1d(config: &ModelConfig) -> Result<RunReport, CliError> {
    let dc = double_comb(config)?;
    let c = classify(&dc, &config.policy)?;
    let (d, u) = (config.alphabet.symbols()[0], config.alphabet.symbols()[1]);
    let mut r = RunReport::default();
    r.line(format!("directions: {d} = -1, {u} = +1"));
    let rep = &c.report;
    r.line(format!("theta_{u} = {} [analytic]", rep.theta_u));
    r.line(format!("theta_{d} = {} [analytic]", rep.theta_d));
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_else(|| "undefined".into());
    r.line(format!("d_M = {} [analytic]", opt(rep.d_m)));
    r.line(format!("d_S = {} [analytic]", opt(rep.d_s)));
    r.line(format!("J_{{{u}|{d}}} = {}", series(&rep.j_ud)));
    r.line(format!("J_{{{d}|{u}}} = {}", series(&rep.j_du)));
    r.line(format!("verdict: {}", c.verdict));
    r.line(format!("cell: {}", c.rule_fired));
    r.warnings.extend(c.warnings.iter().cloned());
    if matches!(c.verdict, Verdict1D::Undecidable(_)) {
        r.inconclusive = true;
    }
    Ok(r)
}

pub fn simulate1d(config: &ModelConfig, steps: u64, seed: Option<u64>, csv: Option<&Path>) -> Result<RunReport, CliError> {
    let dc = double_comb(config)?;
    let seed = resolve_seed(seed, config)?;
    let t = prw1d::simulate_prw1(&dc, steps, seed.0)?;
    let mut r = RunReport::default();
    seed_line(&mut r, seed);
    r.line(format!("start: {} (X_-1 = {}, X_0 = {})", render(&config.model, &prw1d::initial_word()), config.alphabet.symbols()[1], config.alphabet.symbols()[0]));
    r.line(format!("steps: {steps}"));
    r.line(format!("final position: {}", t.positions.last().unwrap()));
    r.line(format!("breaking times: {}", t.breaking.len() - 1));
    r.line(format!("completed runs: {} down, {} up", t.tau_d.len(), t.tau_u.len()));
    let mut out = CsvSink::open(csv, &["n", "X", "S", "is_breaking"])?;
    for n in 1..=t.letters.len() {
        out.row(&[
            &n.to_string(),
            &prw1d::increment(t.letters[n - 1]).to_string(),
            &t.positions[n].to_string(),
            &u8::from(t.is_breaking(n)).to_string(),
        ])?;
    }
    out.finish()?;
    Ok(r)
}

pub fn simulate(config: &ModelConfig, steps: usize, seed: Option<u64>, csv: Option<&Path>) -> Result<RunReport, CliError> {
    let m = &config.model;
    let seed = resolve_seed(seed, config)?;
    let t = simulate_letters(m, &config.init, steps, seed.0)?;
    let mut r = RunReport::default();
    seed_line(&mut r, seed);
    r.line(format!("init: {} (context {})", render(m, &config.init), m.render_context(&t.contexts[0])));
    r.line(format!("steps: {steps}"));
    let mut counts = vec![0u64; config.alphabet.len()];
    for l in &t.letters {
        counts[l.index()] += 1;
    }
    let freq: Vec<String> = config.alphabet.letters().map(|l| format!("{} {}", config.alphabet.symbol(l), counts[l.index()])).collect();
    r.line(format!("letter counts: {}", freq.join(", ")));
    let mut out = CsvSink::open(csv, &["step", "letter", "context_length", "context"])?;
    for (i, l) in t.letters.iter().enumerate() {
        let c = &t.contexts[i + 1];
        out.row(&[
            &(i + 1).to_string(),
            &config.alphabet.symbol(*l).to_string(),
            &m.context_len(c).to_string(),
            &m.render_context(c),
        ])?;
    }
    out.finish()?;
    Ok(r)
}

pub fn kernel2d(config: &ModelConfig, csv: Option<&Path>) -> Result<RunReport, CliError> {
    let qc = quad_comb(config)?;
    let k = build_bend_kernel(&qc, &config.policy).map_err(|e| match e {
        StationaryError::InconclusiveEntry { .. } => CliError::Inconclusive(e.to_string()),
        e => CliError::Model(e.to_string()),
    })?;
    let pi = bend_stationary(&k).map_err(|e| CliError::Model(e.to_string()))?;
    let m = &config.model;
    let names: Vec<String> = k.states.iter().map(|b| render(m, b)).collect();
    let mut r = RunReport::default();
    r.line("bends are written in chronological order (older letter first)");
    r.line(format!("P (rows and columns in order {}):", names.join(", ")));
    let mut out = CsvSink::open(csv, &["from", "to", "probability", "status"])?;
    for (i, from) in names.iter().enumerate() {
        let row: Vec<String> = (0..k.states.len()).map(|j| k.p[(i, j)].to_string()).collect();
        r.line(format!("  {from}: [{}] [analytic]", row.join(", ")));
        for (j, to) in names.iter().enumerate() {
            out.row(&[from, to, &k.p[(i, j)].to_string(), "converged"])?;
        }
    }
    out.finish()?;
    r.line("invariant law of the internal chain:");
    for (i, b) in names.iter().enumerate() {
        r.line(format!("  {b} = {} [linear solve]", pi.v[i]));
    }
    r.line(format!("fixed-vector residual: {:e}", pi.residual));
    Ok(r)
}

pub fn simulate2d(config: &ModelConfig, steps: u64, seed: Option<u64>, csv: Option<&Path>) -> Result<RunReport, CliError> {
    let qc = quad_comb(config)?;
    let seed = resolve_seed(seed, config)?;
    let t = prw2d::simulate_prw2(&qc, steps, seed.0)?;
    let m = &config.model;
    let mut r = RunReport::default();
    seed_line(&mut r, seed);
    r.line(format!("start bend: {} (chronological)", render(m, &t.internal[0])));
    r.line(format!("steps: {steps}"));
    let (x, y) = t.positions.last().unwrap();
    r.line(format!("final position: ({x}, {y})"));
    r.line(format!("breaking times: {}", t.breaking.len() - 1));
    let mut out = CsvSink::open(csv, &["n", "letter", "x", "y", "is_breaking", "bend"])?;
    for n in 1..=t.letters.len() {
        let (x, y) = t.positions[n];
        out.row(&[
            &n.to_string(),
            &config.alphabet.symbol(t.letters[n - 1]).to_string(),
            &x.to_string(),
            &y.to_string(),
            &u8::from(t.is_breaking(n as u64)).to_string(),
            &render(m, t.bend_at(n as u64)),
        ])?;
    }
    out.finish()?;
    Ok(r)
}

pub fn dichotomy(config: &ModelConfig, horizon: usize, trials: usize, seed: Option<u64>, csv: Option<&Path>) -> Result<RunReport, CliError> {
    let qc = quad_comb(config)?;
    let seed = resolve_seed(seed, config)?;
    let d = return_prob_diagnostic(&qc, horizon, trials, seed.0)?;
    let mut r = RunReport::default();
    seed_line(&mut r, seed);
    r.line(format!("horizon: {horizon} jumps, trials: {trials}"));
    r.line(format!("sum of P(M_n = 0) for n <= {horizon}: {} (Monte Carlo)", d.partial_sums.last().unwrap()));
    r.line(format!("growth over the last decade of n: {}", d.last_decade_growth));
    r.line(format!(
        "trend: {} (plateauing when the last-decade growth is below {PLATEAU_THRESHOLD}; a diagnostic, not a proof)",
        d.trend.label()
    ));
    let mut norms = d.min_norm.clone();
    norms.sort_by(f64::total_cmp);
    if !norms.is_empty() {
        r.line(format!(
            "min |M_n| over 1 <= n <= N: min {}, median {}, max {}",
            norms[0],
            norms[norms.len() / 2],
            norms[norms.len() - 1]
        ));
    }
    let mut out = CsvSink::open(csv, &["n", "hits", "p_hat", "wilson_low", "wilson_high", "partial_sum"])?;
    for n in 0..=horizon {
        out.row(&[
            &n.to_string(),
            &d.hits[n].to_string(),
            &d.p_hat[n].to_string(),
            &d.wilson[n].0.to_string(),
            &d.wilson[n].1.to_string(),
            &d.partial_sums[n].to_string(),
        ])?;
    }
    out.finish()?;
    Ok(r)
}

pub fn kernel(config: &ModelConfig, source: &str, k_max: u64, csv: Option<&Path>) -> Result<RunReport, CliError> {
    let m = &config.model;
    let src = config.alphabet.parse(source).map_err(|e| CliError::Model(format!("--source {source}: {e}")))?;
    let tab = tabulate_alpha_lis_kernel(m, k_max).map_err(|e| CliError::Model(e.to_string()))?;
    let Some(a) = tab.states.iter().position(|w| *w == src) else {
        let names: Vec<String> = tab.states.iter().map(|w| render(m, w)).collect();
        return Err(CliError::Model(format!("--source {source} is not in the alpha-lis set {{{}}}", names.join(", "))));
    };
    let mut r = RunReport::default();
    r.line(format!("source: {source}"));
    r.line(format!("k_max: {k_max}"));
    let mut out = CsvSink::open(csv, &["source", "target", "k", "probability"])?;
    for (b, to) in tab.states.iter().enumerate() {
        let name = render(m, to);
        r.line(format!("  to {name}: mass {} over k <= {k_max} [exact]", tab.embedded(a, b)));
        for k in 1..=k_max {
            out.row(&[source, &name, &k.to_string(), &tab.p[a][b][k as usize - 1].to_string()])?;
        }
    }
    out.finish()?;
    r.line(format!("P(T > {k_max}) = {} [exact]", tab.remainder[a]));
    r.line(format!("total mass: {} [exact]", tab.total_mass(a)));
    Ok(r)
}

pub fn diagram_check(config: &ModelConfig, steps: usize, seed: Option<u64>) -> Result<RunReport, CliError> {
    let m = &config.model;
    let seed = resolve_seed(seed, config)?;
    let mut r = RunReport::default();
    seed_line(&mut r, seed);
    let (vlmc, walk) = match config.alphabet.len() {
        2 => {
            let dc = double_comb(config)?;
            let t = simulate_letters(m, &prw1d::initial_word(), steps, seed.0)?;
            let w = prw1d::Walk1DTrace::from_letters(t.letters.clone());
            (extract_mrc_letters(dc.model(), &t), extract_mrc_bends_1d(&w))
        }
        4 => {
            let qc = quad_comb(config)?;
            let start: Word = prw2d::initial_word();
            let t = simulate_letters(qc.model(), &start, steps, seed.0)?;
            let w = prw2d::trace_from_letters(&start.reversed(), t.letters.clone());
            (extract_mrc_letters(qc.model(), &t), extract_mrc_bends(&w))
        }
        _ => return Err(CliError::Model("diagram-check needs a comb on 2 or 4 letters".into())),
    };
    let rep = check_diagram(&vlmc, &walk);
    r.line(format!("steps: {steps}"));
    r.line(format!("jumps compared: {}", rep.jumps_compared));
    r.line(format!("steps compared: {}", rep.steps_compared));
    match &rep.first_mismatch {
        None => r.line("J^V_n = reverse(J^W_n), equal sojourns, Z^V = reverse(Z^W): all hold"),
        Some(why) => return Err(CliError::Model(format!("diagram does not commute: {why}"))),
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        let mut r = RunReport::default();
        assert_eq!(r.exit_code(), 0);
        r.inconclusive = true;
        assert_eq!(r.exit_code(), 2);
        assert_eq!(CliError::Inconclusive("Q[du, ud]".into()).exit_code(), 2);
        assert_eq!(CliError::Model("x".into()).exit_code(), 1);
    }

    #[test]
    fn report_layout() {
        let mut r = RunReport::default();
        r.line("verdict: Recurrent");
        r.warnings.push("w".into());
        assert_eq!(r.render("classify1d", "ab"), "command: classify1d\nmodel: sha256:ab\nverdict: Recurrent\nwarnings:\n  - w\n");
    }
}
