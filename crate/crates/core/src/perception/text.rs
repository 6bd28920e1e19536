//! Chemical text normalization against a reagent lexicon.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use super::PerceptionError;

const BUILTIN: &str = include_str!("../../data/lexicon.tsv");

/// Common OCR confusions, tried only when the result is a lexicon key.
const CONFUSIONS: [(&str, &str); 6] = [
    ("CI", "Cl"),
    ("0", "O"),
    ("I", "l"),
    ("l", "I"),
    ("1", "l"),
    ("rn", "m"),
];

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    /// True when `text` is a lexicon canonical key.
    pub canonical: bool,
}

impl Token {
    fn raw(s: &str) -> Token {
        Token {
            text: s.to_string(),
            canonical: false,
        }
    }

    fn canon(s: &str) -> Token {
        Token {
            text: s.to_string(),
            canonical: true,
        }
    }
}

/// Synonym table mapping phrases to canonical single-token keys.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    canonical: HashSet<String>,
    /// lowercased token phrase -> canonical key
    phrases: HashMap<String, String>,
    max_phrase_tokens: usize,
}

impl Lexicon {
    pub fn builtin() -> Lexicon {
        Lexicon::parse(BUILTIN).expect("bundled lexicon is well formed")
    }

    pub fn load(path: &Path) -> Result<Lexicon, PerceptionError> {
        let text = std::fs::read_to_string(path).map_err(|e| PerceptionError::Lexicon {
            line: 0,
            message: format!("{}: {e}", path.display()),
        })?;
        Lexicon::parse(&text)
    }

    /// Tab-separated `canonical<TAB>syn; syn; ...`; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Lexicon, PerceptionError> {
        let mut lex = Lexicon::default();
        let mut pending_canon: Vec<String> = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (key, syns) = line.split_once('\t').unwrap_or((line, ""));
            let key_tokens = tokenize(key);
            if key_tokens.len() != 1 || key_tokens[0] != key.nfkc().collect::<String>() {
                return Err(PerceptionError::Lexicon {
                    line: n + 1,
                    message: format!("canonical key '{key}' must be a single clean token"),
                });
            }
            let key = key_tokens[0].clone();
            lex.canonical.insert(key.clone());
            for syn in syns.split(';') {
                let toks = tokenize(syn);
                if toks.is_empty() {
                    continue;
                }
                lex.max_phrase_tokens = lex.max_phrase_tokens.max(toks.len());
                lex.phrases
                    .entry(lower_join(&toks))
                    .or_insert_with(|| key.clone());
            }
            pending_canon.push(key);
        }
        // case-folded canonical keys rank below explicit synonyms
        for key in pending_canon {
            lex.phrases.entry(key.to_lowercase()).or_insert(key);
        }
        lex.max_phrase_tokens = lex.max_phrase_tokens.max(1);
        Ok(lex)
    }

    /// Adds entries from `other`; existing entries win.
    pub fn extend(&mut self, other: &Lexicon) {
        self.canonical.extend(other.canonical.iter().cloned());
        for (k, v) in &other.phrases {
            self.phrases.entry(k.clone()).or_insert_with(|| v.clone());
        }
        self.max_phrase_tokens = self.max_phrase_tokens.max(other.max_phrase_tokens);
    }

    pub fn len(&self) -> usize {
        self.canonical.len()
    }

    pub fn is_empty(&self) -> bool {
        self.canonical.is_empty()
    }

    pub fn contains_key(&self, key: &str) -> bool {
        self.canonical.contains(key)
    }

    pub fn canonical_keys(&self) -> impl Iterator<Item = &str> {
        self.canonical.iter().map(String::as_str)
    }

    fn lookup_single(&self, tok: &str) -> Option<&str> {
        if let Some(k) = self.canonical.get(tok) {
            return Some(k);
        }
        if let Some(k) = self.phrases.get(&tok.to_lowercase()) {
            return Some(k);
        }
        for (from, to) in CONFUSIONS {
            if !tok.contains(from) {
                continue;
            }
            let all = tok.replace(from, to);
            if let Some(k) = self.canonical.get(&all) {
                return Some(k);
            }
            for (i, _) in tok.match_indices(from) {
                let one = format!("{}{}{}", &tok[..i], to, &tok[i + from.len()..]);
                if let Some(k) = self.canonical.get(&one) {
                    return Some(k);
                }
            }
        }
        None
    }
}

fn lower_join(toks: &[String]) -> String {
    toks.iter()
        .map(|t| t.to_lowercase())
        .collect::<Vec<_>>()
        .join(" ")
}

/// NFKC, whitespace split, separator punctuation trimmed from token ends.
fn tokenize(raw: &str) -> Vec<String> {
    let folded: String = raw.nfkc().collect();
    folded
        .split_whitespace()
        .map(|t| {
            let t = t.trim_matches(|c| matches!(c, ',' | ';' | ':'));
            t.strip_suffix('.')
                .unwrap_or(t)
                .trim_matches(|c| matches!(c, ',' | ';' | ':'))
        })
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Tokenizes `raw` and maps lexicon phrases (longest match first) to canonical keys.
/// Unknown tokens pass through with `canonical = false`.
pub fn normalize_text(raw: &str, lexicon: &Lexicon) -> Vec<Token> {
    let toks = tokenize(raw);
    let mut out = Vec::with_capacity(toks.len());
    let mut i = 0;
    while i < toks.len() {
        let mut matched = false;
        let longest = lexicon.max_phrase_tokens.min(toks.len() - i);
        for n in (2..=longest).rev() {
            if let Some(k) = lexicon.phrases.get(&lower_join(&toks[i..i + n])) {
                out.push(Token::canon(k));
                i += n;
                matched = true;
                break;
            }
        }
        if matched {
            continue;
        }
        match lexicon.lookup_single(&toks[i]) {
            Some(k) => out.push(Token::canon(k)),
            None => out.push(Token::raw(&toks[i])),
        }
        i += 1;
    }
    out
}

/// Space-joined token texts.
pub fn tokens_to_string(tokens: &[Token]) -> String {
    tokens
        .iter()
        .map(|t| t.text.as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn norm(s: &str) -> Vec<String> {
        normalize_text(s, &Lexicon::builtin())
            .into_iter()
            .map(|t| t.text)
            .collect()
    }

    #[test]
    fn synonyms_and_confusions() {
        assert_eq!(norm("ferric chloride"), ["FeCl3"]);
        assert_eq!(norm("FeCI3"), ["FeCl3"]);
        assert_eq!(norm("Ferric Chloride"), ["FeCl3"]);
        assert!(norm("").is_empty());
        assert_eq!(norm("FeCl₃"), ["FeCl3"]);
        assert_eq!(norm("H₂SO₄, reflux"), ["H2SO4", "reflux"]);
        assert_eq!(norm("heat to reflux"), ["reflux"]);
        assert_eq!(norm("Pd/C, H2 (1 atm)"), ["Pd/C", "H2", "(1", "atm)"]);
        assert_eq!(norm("SOCI2"), ["SOCl2"]);
    }

    #[test]
    fn guard_blocks_unknown_corrections() {
        let t = normalize_text("XCI9", &Lexicon::builtin());
        assert_eq!(t, vec![Token::raw("XCI9")]);
    }

    #[test]
    fn tokens_are_tagged() {
        let t = normalize_text("THF mystery", &Lexicon::builtin());
        assert!(t[0].canonical);
        assert!(!t[1].canonical);
    }

    #[test]
    fn builtin_keys_are_stable() {
        let lex = Lexicon::builtin();
        assert!(lex.len() >= 200, "{}", lex.len());
        for key in lex.canonical_keys() {
            assert_eq!(norm(key), [key.to_string()], "{key}");
        }
    }

    #[test]
    fn bad_lexicon_lines() {
        assert!(Lexicon::parse("two words\tx").is_err());
        let lex = Lexicon::parse("# c\nFoo\tbar baz\n").unwrap();
        assert_eq!(normalize_text("BAR baz", &lex), vec![Token::canon("Foo")]);
    }

    fn vocab() -> Vec<String> {
        let mut v: Vec<String> = vec![
            "ferric",
            "chloride",
            "acid",
            "to",
            "reflux",
            "heat",
            "CI",
            "FeCI3",
            "x",
            "2",
            "°C",
            "sodium",
            "hydroxide",
            "in",
            "THF",
            "r.t.",
            "0",
            "h",
            ",",
            "Cl",
            "SOCI2",
            "l",
            "I",
        ]
        .into_iter()
        .map(String::from)
        .collect();
        v.extend(
            Lexicon::builtin()
                .canonical_keys()
                .take(40)
                .map(String::from),
        );
        v
    }

    proptest! {
        #[test]
        fn idempotent(words in prop::collection::vec(prop::sample::select(vocab()), 0..8)) {
            let lex = Lexicon::builtin();
            let once = normalize_text(&words.join(" "), &lex);
            let twice = normalize_text(&tokens_to_string(&once), &lex);
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn never_panics(s in "\\PC{0,40}") {
            let _ = normalize_text(&s, &Lexicon::builtin());
        }
    }
}
