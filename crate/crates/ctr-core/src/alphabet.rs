//! The character alphabet shared by every word model.
//!
//! Symbols are dense indices. The space character is always present
//! (index 0) because word boundaries are part of the channel, and a
//! reserved unknown symbol is always last so stray input characters map
//! somewhere instead of crashing recognition.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{CtrError, Result};

/// Placeholder character for the reserved unknown symbol.
pub const UNK_CHAR: char = '\u{FFFD}';

/// Ordered character inventory with a dense char-to-index map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CharacterAlphabet {
    chars: Vec<char>,
    index: BTreeMap<char, usize>,
}

impl CharacterAlphabet {
    /// Builds an alphabet from the characters of `words` (case-folded),
    /// plus space and the unknown symbol.
    pub fn from_words<'a, I>(words: I) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut set: std::collections::BTreeSet<char> = std::collections::BTreeSet::new();
        for word in words {
            for c in word.chars() {
                set.insert(fold(c));
            }
        }
        set.remove(&' ');
        set.remove(&UNK_CHAR);
        let mut chars = Vec::with_capacity(set.len() + 2);
        chars.push(' ');
        chars.extend(set);
        chars.push(UNK_CHAR);
        let index = chars.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        CharacterAlphabet { chars, index }
    }

    /// Rebuilds an alphabet from an explicit, previously serialized
    /// character list.
    pub fn from_chars(chars: Vec<char>) -> Result<Self> {
        if chars.first() != Some(&' ') || chars.last() != Some(&UNK_CHAR) {
            return Err(CtrError::Parse(
                "alphabet must start with space and end with the unknown symbol".into(),
            ));
        }
        let index: BTreeMap<char, usize> = chars.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        if index.len() != chars.len() {
            return Err(CtrError::Parse("duplicate character in alphabet".into()));
        }
        Ok(CharacterAlphabet { chars, index })
    }

    /// Number of symbols, unknown included.
    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn space_symbol(&self) -> usize {
        0
    }

    pub fn unk_symbol(&self) -> usize {
        self.chars.len() - 1
    }

    /// Symbol index of `c` after case folding; unknown characters map to
    /// the reserved symbol.
    pub fn symbol_of(&self, c: char) -> usize {
        self.index.get(&fold(c)).copied().unwrap_or_else(|| self.unk_symbol())
    }

    /// `true` when `c` (after folding) has its own symbol.
    pub fn contains(&self, c: char) -> bool {
        self.index.contains_key(&fold(c))
    }

    pub fn char_of(&self, symbol: usize) -> char {
        self.chars[symbol]
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    /// Maps a string to symbol indices.
    pub fn encode(&self, text: &str) -> Vec<usize> {
        text.chars().map(|c| self.symbol_of(c)).collect()
    }

    /// Strict variant of [`encode`](Self::encode): any character without
    /// its own symbol is an input error.
    pub fn encode_strict(&self, text: &str) -> Result<Vec<usize>> {
        text.chars()
            .map(|c| {
                self.index
                    .get(&fold(c))
                    .copied()
                    .ok_or_else(|| CtrError::Input(format!("character {c:?} not in alphabet")))
            })
            .collect()
    }
}

impl fmt::Display for CharacterAlphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, &c) in self.chars.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            match c {
                ' ' => write!(f, "\\s")?,
                UNK_CHAR => write!(f, "\\u")?,
                c => write!(f, "{c}")?,
            }
        }
        Ok(())
    }
}

fn fold(c: char) -> char {
    c.to_lowercase().next().unwrap_or(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn space_first_unknown_last() {
        let a = CharacterAlphabet::from_words(["show", "me"]);
        assert_eq!(a.space_symbol(), 0);
        assert_eq!(a.char_of(0), ' ');
        assert_eq!(a.unk_symbol(), a.len() - 1);
        // e, h, m, o, s, w plus space and unknown
        assert_eq!(a.len(), 8);
    }

    #[test]
    fn case_folding() {
        let a = CharacterAlphabet::from_words(["Show"]);
        assert_eq!(a.symbol_of('S'), a.symbol_of('s'));
        assert!(a.contains('H'));
    }

    #[test]
    fn unknown_maps_to_reserved_symbol() {
        let a = CharacterAlphabet::from_words(["ab"]);
        assert_eq!(a.symbol_of('z'), a.unk_symbol());
        assert!(a.encode_strict("az").is_err());
        assert_eq!(a.encode("az")[1], a.unk_symbol());
    }

    #[test]
    fn encode_round_trips_known_text() {
        let a = CharacterAlphabet::from_words(["show me"]);
        let syms = a.encode(" show me");
        let back: String = syms.iter().map(|&s| a.char_of(s)).collect();
        assert_eq!(back, " show me");
    }

    #[test]
    fn from_chars_validates() {
        let a = CharacterAlphabet::from_words(["ab"]);
        let rebuilt = CharacterAlphabet::from_chars(a.chars().to_vec()).unwrap();
        assert_eq!(a, rebuilt);
        assert!(CharacterAlphabet::from_chars(vec!['a', 'b']).is_err());
    }
}
