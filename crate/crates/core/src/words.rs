//! Letters, alphabets and finite words.
//!
//! Words are stored newest-letter-first: index 0 is the most recent letter,
//! so a VLMC grows its words on the left and a context is a *prefix* of the
//! past.

use std::borrow::Borrow;
use std::cmp::Ordering;
use std::fmt;
use std::ops::Deref;

use thiserror::Error;

/// A letter, identified by its index in the owning [`Alphabet`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter(pub u8);

impl Letter {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WordError {
    #[error("alphabet needs at least two letters, got {0}")]
    TooSmall(usize),
    #[error("duplicate symbol '{0}' in alphabet")]
    Duplicate(char),
    #[error("symbol '{symbol}' is not in the alphabet {alphabet}")]
    UnknownSymbol { symbol: char, alphabet: String },
}

/// A finite ordered alphabet of at least two distinct symbols.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Alphabet {
    symbols: Vec<char>,
}

impl Alphabet {
    pub fn new<I: IntoIterator<Item = char>>(symbols: I) -> Result<Self, WordError> {
        let symbols: Vec<char> = symbols.into_iter().collect();
        if symbols.len() < 2 {
            return Err(WordError::TooSmall(symbols.len()));
        }
        for (i, s) in symbols.iter().enumerate() {
            if symbols[..i].contains(s) {
                return Err(WordError::Duplicate(*s));
            }
        }
        assert!(symbols.len() <= u8::MAX as usize, "alphabet too large");
        Ok(Self { symbols })
    }

    /// `{0, 1}`
    pub fn binary() -> Self {
        Self::new(['0', '1']).unwrap()
    }

    /// `{d, u}`, down before up.
    pub fn down_up() -> Self {
        Self::new(['d', 'u']).unwrap()
    }

    /// `{n, e, w, s}` in that order.
    pub fn compass() -> Self {
        Self::new(['n', 'e', 'w', 's']).unwrap()
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[char] {
        &self.symbols
    }

    pub fn letters(&self) -> impl Iterator<Item = Letter> + Clone {
        (0..self.symbols.len() as u8).map(Letter)
    }

    pub fn symbol(&self, letter: Letter) -> char {
        self.symbols[letter.index()]
    }

    pub fn letter(&self, symbol: char) -> Result<Letter, WordError> {
        self.symbols
            .iter()
            .position(|&s| s == symbol)
            .map(|i| Letter(i as u8))
            .ok_or_else(|| WordError::UnknownSymbol {
                symbol,
                alphabet: self.symbols.iter().collect(),
            })
    }

    /// Parses a word written newest letter first.
    pub fn parse(&self, text: &str) -> Result<Word, WordError> {
        text.chars().map(|c| self.letter(c)).collect()
    }

    pub fn render(&self, word: &[Letter]) -> String {
        word.iter().map(|&l| self.symbol(l)).collect()
    }

    /// All words of length exactly `len`, in lexicographic order.
    pub fn words_of_len(&self, len: usize) -> Vec<Word> {
        let mut out = vec![Word::empty()];
        for _ in 0..len {
            out = out
                .into_iter()
                .flat_map(|w| self.letters().map(move |a| w.append(a)))
                .collect();
        }
        out
    }
}

impl fmt::Display for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, s) in self.symbols.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{s}")?;
        }
        write!(f, "}}")
    }
}

/// A finite word, newest letter first.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word(Vec<Letter>);

impl Word {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn from_letters(letters: Vec<Letter>) -> Self {
        Self(letters)
    }

    /// `α^k`
    pub fn power(letter: Letter, k: usize) -> Self {
        Self(vec![letter; k])
    }

    /// `letter · self`: one step of left growth.
    pub fn prepend(&self, letter: Letter) -> Self {
        let mut v = Vec::with_capacity(self.0.len() + 1);
        v.push(letter);
        v.extend_from_slice(&self.0);
        Self(v)
    }

    /// `self · letter`: the child of `self` in a tree.
    pub fn append(&self, letter: Letter) -> Self {
        let mut v = self.0.clone();
        v.push(letter);
        Self(v)
    }

    pub fn concat(&self, other: &[Letter]) -> Self {
        let mut v = self.0.clone();
        v.extend_from_slice(other);
        Self(v)
    }

    pub fn reversed(&self) -> Self {
        Self(self.0.iter().rev().copied().collect())
    }

    pub fn into_letters(self) -> Vec<Letter> {
        self.0
    }
}

impl Deref for Word {
    type Target = [Letter];
    fn deref(&self) -> &[Letter] {
        &self.0
    }
}

impl Borrow<[Letter]> for Word {
    fn borrow(&self) -> &[Letter] {
        &self.0
    }
}

impl From<&[Letter]> for Word {
    fn from(s: &[Letter]) -> Self {
        Self(s.to_vec())
    }
}

impl FromIterator<Letter> for Word {
    fn from_iter<I: IntoIterator<Item = Letter>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

/// Shortlex order: by length, then lexicographically by letter index.
pub fn shortlex(a: &[Letter], b: &[Letter]) -> Ordering {
    a.len().cmp(&b.len()).then_with(|| a.cmp(b))
}

/// Length of the leading run of identical letters.
pub fn leading_run(w: &[Letter]) -> usize {
    match w.first() {
        None => 0,
        Some(&a) => w.iter().take_while(|&&l| l == a).count(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alphabet_validation() {
        assert_eq!(Alphabet::new(['a']), Err(WordError::TooSmall(1)));
        assert_eq!(Alphabet::new(['a', 'b', 'a']), Err(WordError::Duplicate('a')));
        let a = Alphabet::binary();
        assert!(matches!(a.parse("012"), Err(WordError::UnknownSymbol { symbol: '2', .. })));
    }

    #[test]
    fn parse_render_orientation() {
        let a = Alphabet::down_up();
        let w = a.parse("ud").unwrap();
        // newest letter first: u was emitted after d
        assert_eq!(w[0], Letter(1));
        assert_eq!(a.render(&w.prepend(Letter(0))), "dud");
        assert_eq!(a.render(&w.reversed()), "du");
    }

    #[test]
    fn words_of_len_enumerates_all() {
        let a = Alphabet::new(['a', 'b', 'c']).unwrap();
        let ws = a.words_of_len(3);
        assert_eq!(ws.len(), 27);
        assert!(ws.windows(2).all(|p| shortlex(&p[0], &p[1]) == Ordering::Less));
    }

    #[test]
    fn runs() {
        let a = Alphabet::down_up();
        assert_eq!(leading_run(&a.parse("uuud").unwrap()), 3);
        assert_eq!(leading_run(&[]), 0);
    }
}
