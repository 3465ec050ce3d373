//! Text normalization shared by topic matching and entity extraction.

use std::collections::HashSet;
use std::fs;
use std::io;
use std::path::Path;

/// Splits CamelCase runs into words.
///
/// A break is inserted before every uppercase letter that directly follows a
/// lowercase letter. Runs of capitals stay together, so `"NYC"` is one word
/// and `"MusicAndMusicians"` becomes `"Music And Musicians"`.
pub fn split_camel_case(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 8);
    let mut prev_lower = false;
    for c in s.chars() {
        if c.is_uppercase() && prev_lower {
            out.push(' ');
        }
        prev_lower = c.is_lowercase();
        out.push(c);
    }
    out
}

/// Case-folds `s` and removes special characters.
///
/// Apostrophes are deleted outright ("Rock 'n' Roll" -> "rock n roll",
/// "Women's" -> "womens"); every other non-alphanumeric character acts as a
/// word separator. The result is single-space separated with no leading or
/// trailing space.
pub fn fold_text(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut pending_space = false;
    for c in s.chars() {
        if matches!(c, '\'' | '\u{2019}' | '\u{2018}' | '`') {
            continue;
        }
        if c.is_alphanumeric() {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.extend(c.to_lowercase());
        } else {
            pending_space = true;
        }
    }
    out
}

/// Tokens of an already folded string.
pub fn tokens(folded: &str) -> impl Iterator<Item = &str> {
    folded.split(' ').filter(|t| !t.is_empty())
}

const DEFAULT_ENGLISH: &str = include_str!("../data/stopwords/english.txt");
const DEFAULT_SPANISH: &str = include_str!("../data/stopwords/spanish.txt");
const DEFAULT_PORTUGUESE: &str = include_str!("../data/stopwords/portuguese.txt");
const DEFAULT_TWITTER: &str = include_str!("../data/stopwords/twitter.txt");

/// A set of folded stopwords.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stopwords {
    words: HashSet<String>,
}

impl Stopwords {
    pub fn empty() -> Self {
        Self::default()
    }

    /// The embedded English, Spanish, Portuguese and Twitter-specific lists.
    pub fn defaults() -> Self {
        let mut sw = Self::empty();
        for src in [
            DEFAULT_ENGLISH,
            DEFAULT_SPANISH,
            DEFAULT_PORTUGUESE,
            DEFAULT_TWITTER,
        ] {
            sw.extend_from_str(src);
        }
        sw
    }

    /// Loads every `*.txt` file in `dir`, one word per line, `#` comments.
    pub fn from_dir(dir: &Path) -> io::Result<Self> {
        let mut paths: Vec<_> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "txt"))
            .collect();
        paths.sort();
        let mut sw = Self::empty();
        for p in paths {
            sw.extend_from_str(&fs::read_to_string(p)?);
        }
        Ok(sw)
    }

    pub fn extend_from_str(&mut self, src: &str) {
        for line in src.lines() {
            let line = line.split('#').next().unwrap_or("");
            for tok in tokens(&fold_text(line)) {
                self.words.insert(tok.to_string());
            }
        }
    }

    pub fn insert(&mut self, word: &str) {
        for tok in tokens(&fold_text(word)) {
            self.words.insert(tok.to_string());
        }
    }

    pub fn contains(&self, folded_token: &str) -> bool {
        self.words.contains(folded_token)
    }

    /// True when every token of the folded phrase is a stopword.
    /// The empty phrase counts as all-stopword.
    pub fn covers(&self, folded: &str) -> bool {
        tokens(folded).all(|t| self.contains(t))
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

impl<S: AsRef<str>> FromIterator<S> for Stopwords {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        let mut sw = Self::empty();
        for w in iter {
            sw.insert(w.as_ref());
        }
        sw
    }
}
