//! Context trees: explicit finite trees stored as a trie, and the comb family
//! whose contexts are the words `α^k β` (`α ≠ β`, `k ≥ 1`).
//!
//! The comb's infinite branches `α^∞` are never materialised; every query on
//! a comb is answered in closed form from the leading run of the word.

use std::cmp::Ordering;

use thiserror::Error;

use crate::words::{leading_run, shortlex, Alphabet, Letter, Word};

/// Default cap on the number of leaves of an explicit tree.
pub const DEFAULT_LEAF_BUDGET: usize = 1_000_000;

const NONE: u32 = u32::MAX;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreeError {
    #[error("the leaf set is empty")]
    NoLeaves,
    #[error("the empty word cannot be a leaf")]
    EmptyLeaf,
    #[error("{count} leaves exceed the leaf budget of {budget}")]
    LeafBudgetExceeded { count: usize, budget: usize },
    #[error("internal node '{node}' is missing its child '{missing}'")]
    NotSaturated { node: String, missing: String },
    #[error("leaf '{shorter}' is a prefix of leaf '{longer}'")]
    NotAntichain { shorter: String, longer: String },
    #[error("'{0}' is an internal node and has no pref")]
    InternalWord(String),
    #[error("no context is a prefix of the available history '{0}'")]
    NoContextPrefix(String),
    #[error("the set of context alpha-lis is infinite")]
    InfiniteAlphaLisSet,
}

/// Position of a finite word relative to a tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeKind {
    Internal,
    Leaf,
    External,
}

/// Decomposition `w = prefix · alpha · lis` where `lis` is the longest internal
/// proper suffix of `w`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AlphaLis {
    pub alpha: Letter,
    pub lis: Word,
    pub prefix: Word,
}

impl AlphaLis {
    /// The word `alpha · lis`.
    pub fn word(&self) -> Word {
        self.lis.prepend(self.alpha)
    }
}

/// Outcome of the stability check. `condition_i` is "`αw ∈ T ⇒ w ∈ T`",
/// `condition_ii` is "`αc` is non-internal for every finite context `c`".
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StabilityReport {
    pub stable: bool,
    pub condition_i: bool,
    pub condition_ii: bool,
    /// A node `αw` of the tree with `w` outside the tree.
    pub witness: Option<Word>,
}

#[derive(Clone, Debug)]
struct Node {
    parent: u32,
    letter: Letter,
    depth: u32,
    children: Option<Box<[u32]>>,
    leaf: u32,
}

/// Result of walking a letter stream down the trie.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Walk {
    /// Reached the leaf with this id after `depth` letters.
    Leaf { id: usize, depth: usize },
    /// The stream ran out on an internal node.
    Internal,
}

/// A finite saturated tree stored as a trie.
#[derive(Clone, Debug)]
pub struct ExplicitTree {
    arity: usize,
    nodes: Vec<Node>,
    /// Leaves in shortlex order; the position is the leaf id.
    leaves: Vec<Word>,
    leaf_nodes: Vec<u32>,
    height: usize,
}

impl ExplicitTree {
    fn build(alphabet: &Alphabet, leaves: &[Word], budget: usize) -> Result<Self, TreeError> {
        if leaves.is_empty() {
            return Err(TreeError::NoLeaves);
        }
        if leaves.len() > budget {
            return Err(TreeError::LeafBudgetExceeded { count: leaves.len(), budget });
        }
        let arity = alphabet.len();
        let mut nodes = vec![Node { parent: NONE, letter: Letter(0), depth: 0, children: None, leaf: NONE }];
        let mut terminal = vec![false];
        for w in leaves {
            if w.is_empty() {
                return Err(TreeError::EmptyLeaf);
            }
            let mut cur = 0usize;
            for (i, &a) in w.iter().enumerate() {
                let next = match &nodes[cur].children {
                    Some(ch) if ch[a.index()] != NONE => ch[a.index()] as usize,
                    _ => {
                        let id = nodes.len();
                        nodes.push(Node {
                            parent: cur as u32,
                            letter: a,
                            depth: i as u32 + 1,
                            children: None,
                            leaf: NONE,
                        });
                        terminal.push(false);
                        nodes[cur]
                            .children
                            .get_or_insert_with(|| vec![NONE; arity].into_boxed_slice())[a.index()] = id as u32;
                        id
                    }
                };
                cur = next;
            }
            terminal[cur] = true;
        }
        let tree = Self { arity, nodes, leaves: Vec::new(), leaf_nodes: Vec::new(), height: 0 };
        // antichain: a terminal node must not have descendants
        for (id, node) in tree.nodes.iter().enumerate() {
            if terminal[id] && node.children.is_some() {
                let mut below = id;
                while let Some(ch) = &tree.nodes[below].children {
                    below = ch.iter().copied().find(|&c| c != NONE).unwrap() as usize;
                }
                return Err(TreeError::NotAntichain {
                    shorter: alphabet.render(&tree.node_word(id)),
                    longer: alphabet.render(&tree.node_word(below)),
                });
            }
        }
        // saturation: every internal node has all its children
        let mut missing: Option<Word> = None;
        for (id, node) in tree.nodes.iter().enumerate() {
            if let Some(ch) = &node.children {
                if let Some(pos) = ch.iter().position(|&c| c == NONE) {
                    let m = tree.node_word(id).append(Letter(pos as u8));
                    if missing.as_ref().is_none_or(|old| shortlex(&m, old) == Ordering::Less) {
                        missing = Some(m);
                    }
                }
            }
        }
        if let Some(m) = missing {
            return Err(TreeError::NotSaturated {
                node: alphabet.render(&m[..m.len() - 1]),
                missing: alphabet.render(&m),
            });
        }
        let mut tree = tree;
        let mut leaf_nodes: Vec<u32> = (0..tree.nodes.len() as u32).filter(|&i| terminal[i as usize]).collect();
        let words: Vec<Word> = leaf_nodes.iter().map(|&i| tree.node_word(i as usize)).collect();
        let mut order: Vec<usize> = (0..leaf_nodes.len()).collect();
        order.sort_by(|&a, &b| shortlex(&words[a], &words[b]));
        leaf_nodes = order.iter().map(|&i| leaf_nodes[i]).collect();
        tree.leaves = order.iter().map(|&i| words[i].clone()).collect();
        for (id, &n) in leaf_nodes.iter().enumerate() {
            tree.nodes[n as usize].leaf = id as u32;
        }
        tree.height = tree.leaves.iter().map(|w| w.len()).max().unwrap_or(0);
        tree.leaf_nodes = leaf_nodes;
        Ok(tree)
    }

    fn node_word(&self, mut id: usize) -> Word {
        let mut letters = Vec::with_capacity(self.nodes[id].depth as usize);
        while self.nodes[id].parent != NONE {
            letters.push(self.nodes[id].letter);
            id = self.nodes[id].parent as usize;
        }
        letters.reverse();
        Word::from_letters(letters)
    }

    fn find(&self, w: &[Letter]) -> Option<usize> {
        let mut cur = 0usize;
        for &a in w {
            match &self.nodes[cur].children {
                Some(ch) => cur = ch[a.index()] as usize,
                None => return None,
            }
        }
        Some(cur)
    }

    /// Walks a newest-first letter stream from the root until a leaf.
    pub fn walk<I: IntoIterator<Item = Letter>>(&self, letters: I) -> Walk {
        let mut cur = 0usize;
        let mut depth = 0usize;
        let mut it = letters.into_iter();
        loop {
            match &self.nodes[cur].children {
                None => return Walk::Leaf { id: self.nodes[cur].leaf as usize, depth },
                Some(ch) => match it.next() {
                    Some(a) => {
                        cur = ch[a.index()] as usize;
                        depth += 1;
                    }
                    None => return Walk::Internal,
                },
            }
        }
    }

    pub fn leaves(&self) -> &[Word] {
        &self.leaves
    }

    pub fn leaf(&self, id: usize) -> &Word {
        &self.leaves[id]
    }

    pub fn leaf_id(&self, w: &[Letter]) -> Option<usize> {
        self.find(w)
            .filter(|&n| self.nodes[n].children.is_none())
            .map(|n| self.nodes[n].leaf as usize)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Leaf ids of all contexts having `s` as a prefix, in shortlex order.
    pub fn leaves_with_prefix(&self, s: &[Letter]) -> Vec<usize> {
        let Some(start) = self.find(s) else { return Vec::new() };
        let mut out = Vec::new();
        let mut stack = vec![start];
        while let Some(n) = stack.pop() {
            match &self.nodes[n].children {
                None => out.push(self.nodes[n].leaf as usize),
                Some(ch) => stack.extend(ch.iter().map(|&c| c as usize)),
            }
        }
        out.sort_unstable();
        out
    }

    /// All internal nodes in shortlex order.
    pub fn internal_nodes(&self) -> Vec<Word> {
        let mut out: Vec<Word> = self
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.children.is_some())
            .map(|(i, _)| self.node_word(i))
            .collect();
        out.sort_by(|a, b| shortlex(a, b));
        out
    }

    fn arity(&self) -> usize {
        self.arity
    }
}

#[derive(Clone, Debug)]
pub enum TreeKind {
    Explicit(ExplicitTree),
    /// Contexts `α^k β` for every ordered pair `α ≠ β` and every `k ≥ 1`.
    Comb,
}

/// A saturated context tree over a fixed alphabet.
#[derive(Clone, Debug)]
pub struct ContextTree {
    alphabet: Alphabet,
    kind: TreeKind,
    stable: bool,
}

impl ContextTree {
    /// Builds an explicit tree from its leaf set with the default leaf budget.
    pub fn explicit(alphabet: Alphabet, leaves: &[Word]) -> Result<Self, TreeError> {
        Self::explicit_with_budget(alphabet, leaves, DEFAULT_LEAF_BUDGET)
    }

    pub fn explicit_with_budget(alphabet: Alphabet, leaves: &[Word], budget: usize) -> Result<Self, TreeError> {
        let tree = ExplicitTree::build(&alphabet, leaves, budget)?;
        let mut out = Self { alphabet, kind: TreeKind::Explicit(tree), stable: false };
        out.stable = out.is_stable().stable;
        Ok(out)
    }

    /// Parses leaves written as strings over `alphabet`.
    pub fn explicit_from_strs(alphabet: Alphabet, leaves: &[&str]) -> Result<Self, crate::Error> {
        let words = leaves.iter().map(|s| alphabet.parse(s)).collect::<Result<Vec<_>, _>>()?;
        Ok(Self::explicit(alphabet, &words)?)
    }

    /// The comb over `alphabet`: the double comb on two letters, the quadruple
    /// comb on four.
    pub fn comb(alphabet: Alphabet) -> Self {
        Self { alphabet, kind: TreeKind::Comb, stable: true }
    }

    /// Depth-`depth` truncation of the comb: leaves `α^k β` for `k < depth` and `α^depth`.
    pub fn comb_truncation(alphabet: Alphabet, depth: usize) -> Result<Self, TreeError> {
        assert!(depth >= 1);
        let mut leaves = Vec::new();
        for a in alphabet.letters() {
            for k in 1..depth {
                for b in alphabet.letters().filter(|&b| b != a) {
                    leaves.push(Word::power(a, k).append(b));
                }
            }
            leaves.push(Word::power(a, depth));
        }
        Self::explicit(alphabet, &leaves)
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn kind(&self) -> &TreeKind {
        &self.kind
    }

    pub fn as_explicit(&self) -> Option<&ExplicitTree> {
        match &self.kind {
            TreeKind::Explicit(t) => Some(t),
            TreeKind::Comb => None,
        }
    }

    pub fn is_comb(&self) -> bool {
        matches!(self.kind, TreeKind::Comb)
    }

    /// Cached result of [`ContextTree::is_stable`].
    pub fn stable(&self) -> bool {
        self.stable
    }

    /// Number of finite contexts, `None` when infinite.
    pub fn context_count(&self) -> Option<usize> {
        self.as_explicit().map(|t| t.leaves.len())
    }

    pub fn render(&self, w: &[Letter]) -> String {
        self.alphabet.render(w)
    }

    pub fn classify(&self, w: &[Letter]) -> NodeKind {
        match &self.kind {
            TreeKind::Explicit(t) => match t.find(w) {
                Some(n) if t.nodes[n].children.is_some() => NodeKind::Internal,
                Some(_) => NodeKind::Leaf,
                None => NodeKind::External,
            },
            TreeKind::Comb => {
                let run = leading_run(w);
                if run == w.len() {
                    NodeKind::Internal
                } else if run + 1 == w.len() {
                    NodeKind::Leaf
                } else {
                    NodeKind::External
                }
            }
        }
    }

    pub fn is_internal(&self, w: &[Letter]) -> bool {
        self.classify(w) == NodeKind::Internal
    }

    /// Length of the context that prefixes `w`.
    pub fn pref_len(&self, w: &[Letter]) -> Result<usize, TreeError> {
        match &self.kind {
            TreeKind::Explicit(t) => match t.walk(w.iter().copied()) {
                Walk::Leaf { depth, .. } => Ok(depth),
                Walk::Internal => Err(TreeError::InternalWord(self.render(w))),
            },
            TreeKind::Comb => {
                let run = leading_run(w);
                if run == w.len() {
                    Err(TreeError::InternalWord(self.render(w)))
                } else {
                    Ok(run + 1)
                }
            }
        }
    }

    /// The unique context `c` with `w = c⋯`.
    pub fn pref(&self, w: &[Letter]) -> Result<Word, TreeError> {
        self.pref_len(w).map(|n| Word::from(&w[..n]))
    }

    /// Decomposes a nonempty word as `prefix · α · lis`, `lis` being its
    /// longest internal proper suffix.
    pub fn alpha_lis(&self, w: &[Letter]) -> AlphaLis {
        assert!(!w.is_empty(), "alpha_lis of the empty word");
        let split = match &self.kind {
            TreeKind::Explicit(t) => (1..=w.len())
                .find(|&i| matches!(t.find(&w[i..]), Some(n) if t.nodes[n].children.is_some()))
                .expect("the root is internal"),
            TreeKind::Comb => {
                // internal suffixes are ε and powers of the trailing letter
                let last = w[w.len() - 1];
                let trailing = w.iter().rev().take_while(|&&l| l == last).count();
                if trailing == w.len() {
                    1
                } else {
                    w.len() - trailing
                }
            }
        };
        AlphaLis { alpha: w[split - 1], lis: Word::from(&w[split..]), prefix: Word::from(&w[..split - 1]) }
    }

    /// The set `S` of context α-lis, in shortlex order.
    pub fn alpha_lis_set(&self) -> Result<Vec<Word>, TreeError> {
        let mut set: Vec<Word> = match &self.kind {
            TreeKind::Explicit(t) => t.leaves.iter().map(|c| self.alpha_lis(c).word()).collect(),
            TreeKind::Comb => {
                let letters: Vec<Letter> = self.alphabet.letters().collect();
                letters
                    .iter()
                    .flat_map(|&a| letters.iter().filter(move |&&b| b != a).map(move |&b| Word::from_letters(vec![a, b])))
                    .collect()
            }
        };
        set.sort_by(|a, b| shortlex(a, b));
        set.dedup();
        Ok(set)
    }

    /// Checks stability by exhaustive enumeration on explicit trees.
    pub fn is_stable(&self) -> StabilityReport {
        let t = match &self.kind {
            TreeKind::Comb => {
                return StabilityReport { stable: true, condition_i: true, condition_ii: true, witness: None }
            }
            TreeKind::Explicit(t) => t,
        };
        let mut witness: Option<Word> = None;
        for id in 1..t.nodes.len() {
            let w = t.node_word(id);
            if t.find(&w[1..]).is_none() && witness.as_ref().is_none_or(|old| shortlex(&w, old) == Ordering::Less) {
                witness = Some(w);
            }
        }
        let condition_ii = t.leaves.iter().all(|c| {
            (0..t.arity()).all(|a| {
                let ac = c.prepend(Letter(a as u8));
                !matches!(t.find(&ac), Some(n) if t.nodes[n].children.is_some())
            })
        });
        let condition_i = witness.is_none();
        StabilityReport { stable: condition_i, condition_i, condition_ii, witness }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nine_leaf_tree() -> ContextTree {
        ContextTree::explicit_from_strs(
            Alphabet::binary(),
            &["10", "010", "110", "0010", "0110", "000", "111", "0111", "0011"],
        )
        .unwrap()
    }

    fn w(t: &ContextTree, s: &str) -> Word {
        t.alphabet().parse(s).unwrap()
    }

    #[test]
    fn nine_leaf_tree_is_valid_and_stable() {
        let t = nine_leaf_tree();
        assert_eq!(t.context_count(), Some(9));
        let r = t.is_stable();
        assert!(r.stable && r.condition_ii && r.witness.is_none());
    }

    #[test]
    fn order_one_tree() {
        let t = ContextTree::explicit_from_strs(Alphabet::binary(), &["0", "1"]).unwrap();
        assert_eq!(t.context_count(), Some(2));
        assert_eq!(t.as_explicit().unwrap().height(), 1);
    }

    #[test]
    fn missing_sibling_is_not_saturated() {
        let err = ContextTree::explicit_from_strs(Alphabet::binary(), &["0", "10"]).unwrap_err();
        match err {
            crate::Error::Tree(TreeError::NotSaturated { node, missing }) => {
                assert_eq!(node, "1");
                assert_eq!(missing, "11");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn prefix_pair_is_not_an_antichain() {
        let err = ContextTree::explicit_from_strs(Alphabet::binary(), &["0", "1", "10", "11"]).unwrap_err();
        assert!(matches!(err, crate::Error::Tree(TreeError::NotAntichain { ref shorter, .. }) if shorter == "1"));
        let a = Alphabet::binary();
        assert_eq!(ContextTree::explicit(a.clone(), &[]).unwrap_err(), TreeError::NoLeaves);
        assert_eq!(ContextTree::explicit(a.clone(), &[Word::empty()]).unwrap_err(), TreeError::EmptyLeaf);
        let leaves = [a.parse("0").unwrap(), a.parse("1").unwrap()];
        assert!(matches!(
            ContextTree::explicit_with_budget(a, &leaves, 1),
            Err(TreeError::LeafBudgetExceeded { count: 2, budget: 1 })
        ));
    }

    #[test]
    fn double_comb_classification() {
        let t = ContextTree::comb(Alphabet::down_up());
        assert_eq!(t.classify(&w(&t, "u")), NodeKind::Internal);
        assert_eq!(t.classify(&w(&t, "")), NodeKind::Internal);
        assert_eq!(t.classify(&w(&t, "ud")), NodeKind::Leaf);
        assert_eq!(t.classify(&w(&t, "udu")), NodeKind::External);
    }

    #[test]
    fn udu_is_external_by_enumeration() {
        // every comb member of length ≤ 3: internal u^k, d^k and leaves α^kβ
        let t = ContextTree::comb(Alphabet::down_up());
        let a = t.alphabet().clone();
        let mut members = vec![Word::empty()];
        for x in a.letters() {
            for k in 1..=3 {
                members.push(Word::power(x, k));
            }
            for k in 1..=2 {
                for y in a.letters().filter(|&y| y != x) {
                    members.push(Word::power(x, k).append(y));
                }
            }
        }
        assert!(!members.contains(&w(&t, "udu")));
        assert!(members.contains(&w(&t, "ud")));
    }

    #[test]
    fn pref_examples() {
        let fig1 = ContextTree::explicit_from_strs(Alphabet::binary(), &["0", "1000", "1001", "101", "11"]).unwrap();
        assert_eq!(fig1.render(&fig1.pref(&w(&fig1, "100011")).unwrap()), "1000");

        let t = ContextTree::comb(Alphabet::down_up());
        assert_eq!(t.render(&t.pref(&w(&t, "uuud")).unwrap()), "uuud");
        assert_eq!(t.render(&t.pref(&w(&t, "uudud")).unwrap()), "uud");
        assert_eq!(t.pref(&w(&t, "u")), Err(TreeError::InternalWord("u".into())));
        let r = nine_leaf_tree();
        assert!(matches!(r.pref(&w(&r, "00")), Err(TreeError::InternalWord(_))));
    }

    #[test]
    fn alpha_lis_examples() {
        let r = nine_leaf_tree();
        let d = r.alpha_lis(&w(&r, "0010"));
        assert_eq!(r.render(&d.word()), "10");
        assert_eq!(r.render(&d.prefix), "00");
        let d = r.alpha_lis(&w(&r, "0011"));
        assert_eq!(r.render(&d.word()), "0011");
        assert!(d.prefix.is_empty());

        let t = ContextTree::comb(Alphabet::down_up());
        for k in 1..8 {
            let word = format!("u{}u", "d".repeat(k));
            let d = t.alpha_lis(&w(&t, &word));
            assert_eq!(t.render(&d.word()), "du");
            assert_eq!(t.render(&d.lis), "u");
        }
        // a power is internal: its lis is the power one shorter
        let d = t.alpha_lis(&w(&t, "uuu"));
        assert_eq!(t.render(&d.lis), "uu");
        assert!(d.prefix.is_empty());
    }

    #[test]
    fn alpha_lis_sets() {
        let t = ContextTree::comb(Alphabet::down_up());
        let s: Vec<String> = t.alpha_lis_set().unwrap().iter().map(|x| t.render(x)).collect();
        assert_eq!(s, ["du", "ud"]);
        // closed form agrees with enumeration of u^k d, d^k u for k ≤ 5
        for k in 1..=5 {
            let a = t.alpha_lis(&w(&t, &format!("{}d", "u".repeat(k)))).word();
            let b = t.alpha_lis(&w(&t, &format!("{}u", "d".repeat(k)))).word();
            assert_eq!((t.render(&a).as_str(), t.render(&b).as_str()), ("ud", "du"));
        }
        let q = ContextTree::comb(Alphabet::compass());
        assert_eq!(q.alpha_lis_set().unwrap().len(), 12);
        let r = nine_leaf_tree();
        let s: Vec<String> = r.alpha_lis_set().unwrap().iter().map(|x| r.render(x)).collect();
        assert_eq!(s, ["10", "000", "111", "0011"]);
    }

    #[test]
    fn stability_examples() {
        let t = ContextTree::explicit_from_strs(Alphabet::binary(), &["00", "01", "1"]).unwrap();
        assert!(t.is_stable().stable);
        let t = ContextTree::explicit_from_strs(Alphabet::binary(), &["0", "100", "101", "11"]).unwrap();
        let r = t.is_stable();
        assert!(!r.stable && !r.condition_ii);
        assert_eq!(t.render(r.witness.as_ref().unwrap()), "100");
        assert!(ContextTree::comb(Alphabet::compass()).is_stable().stable);
    }

    #[test]
    fn leaves_with_prefix_enumerates_subtree() {
        let r = nine_leaf_tree();
        let t = r.as_explicit().unwrap();
        let ids = t.leaves_with_prefix(&w(&r, "01"));
        let got: Vec<String> = ids.iter().map(|&i| r.render(t.leaf(i))).collect();
        assert_eq!(got, ["010", "0110", "0111"]);
        assert!(t.leaves_with_prefix(&w(&r, "1111")).is_empty());
        assert_eq!(t.leaves_with_prefix(&[]).len(), 9);
    }
}
