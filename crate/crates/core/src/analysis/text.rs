//! Chat corpus processing: tokens, n-grams and lexical categories.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

const STOPWORDS: &str = include_str!("stopwords.txt");

/// Lowercases, drops apostrophes and splits on any other non-alphanumeric
/// character. A `-` directly in front of a digit is kept as a sign.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut cur = String::new();
    let mut chars = text.chars().peekable();
    while let Some(ch) = chars.next() {
        if ch.is_alphanumeric() {
            cur.extend(ch.to_lowercase());
        } else if ch == '\'' || ch == '\u{2019}' {
            continue;
        } else if ch == '-' && cur.is_empty() && chars.peek().is_some_and(|c| c.is_ascii_digit()) {
            cur.push('-');
        } else if !cur.is_empty() {
            tokens.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        tokens.push(cur);
    }
    tokens
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    Shapes,
    Colors,
    Numbers,
    Relational,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::Shapes,
        Category::Colors,
        Category::Numbers,
        Category::Relational,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::Shapes => "Shapes",
            Category::Colors => "Colors",
            Category::Numbers => "Numbers",
            Category::Relational => "Relational",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryLexicon {
    words: BTreeMap<Category, BTreeSet<String>>,
    /// Numeric tokens such as `9` or `-7` count as Numbers.
    numerals_are_numbers: bool,
}

impl CategoryLexicon {
    pub fn new(words: BTreeMap<Category, BTreeSet<String>>) -> crate::Result<Self> {
        let mut seen: HashMap<&str, Category> = HashMap::new();
        for (cat, set) in &words {
            for w in set {
                if let Some(other) = seen.insert(w, *cat) {
                    return Err(crate::Error::InvalidInput(format!(
                        "word `{w}` appears in both {other} and {cat}"
                    )));
                }
            }
        }
        Ok(CategoryLexicon {
            words,
            numerals_are_numbers: true,
        })
    }

    pub fn category_of(&self, token: &str) -> Option<Category> {
        if self.numerals_are_numbers && is_numeral(token) {
            return Some(Category::Numbers);
        }
        self.words
            .iter()
            .find(|(_, set)| set.contains(token))
            .map(|(c, _)| *c)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.category_of(token).is_some()
    }

    pub fn words(&self, category: Category) -> impl Iterator<Item = &str> {
        self.words
            .get(&category)
            .into_iter()
            .flatten()
            .map(String::as_str)
    }
}

impl Default for CategoryLexicon {
    fn default() -> Self {
        let set = |ws: &[&str]| ws.iter().map(|w| w.to_string()).collect::<BTreeSet<_>>();
        let mut words = BTreeMap::new();
        words.insert(Category::Shapes, set(&["circle", "triangle", "square"]));
        words.insert(
            Category::Colors,
            set(&["pink", "yellow", "white", "cyan", "blue", "teal"]),
        );
        words.insert(
            Category::Numbers,
            set(&[
                "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine",
                "ten", "negative", "minus", "plus", "positive",
            ]),
        );
        words.insert(
            Category::Relational,
            set(&[
                "left", "right", "top", "bottom", "middle", "center", "corner", "side", "above",
                "below", "near", "next", "first", "second", "third", "last", "same", "other",
                "before", "after",
            ]),
        );
        CategoryLexicon::new(words).expect("default lexicon is disjoint")
    }
}

fn is_numeral(token: &str) -> bool {
    let digits = token.strip_prefix('-').unwrap_or(token);
    !digits.is_empty() && digits.chars().all(|c| c.is_ascii_digit())
}

/// Strips a plural `-es` or `-s` when the stem is a lexicon word.
pub fn lemmatize(token: &str, lexicon: &CategoryLexicon) -> String {
    if lexicon.contains(token) {
        return token.to_string();
    }
    for suffix in ["es", "s"] {
        if let Some(stem) = token.strip_suffix(suffix) {
            if !stem.is_empty() && lexicon.contains(stem) && !is_numeral(stem) {
                return stem.to_string();
            }
        }
    }
    token.to_string()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stopwords(BTreeSet<String>);

impl Stopwords {
    pub fn embedded() -> &'static Stopwords {
        static WORDS: OnceLock<Stopwords> = OnceLock::new();
        WORDS.get_or_init(|| {
            Stopwords(
                STOPWORDS
                    .lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty() && !l.starts_with('#'))
                    .map(String::from)
                    .collect(),
            )
        })
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.contains(token)
    }
}

/// Removes stopwords, never dropping lexicon words.
pub fn remove_stopwords(
    tokens: &[String],
    stopwords: &Stopwords,
    lexicon: &CategoryLexicon,
) -> Vec<String> {
    tokens
        .iter()
        .filter(|t| lexicon.contains(t) || !stopwords.contains(t))
        .cloned()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermCount {
    pub term: String,
    pub count: usize,
}

/// Counts contiguous n-grams (joined with a space), sorted by descending
/// count then lexicographically.
pub fn ngram_counts(tokens: &[String], n: usize) -> Vec<TermCount> {
    assert!(n >= 1, "n-gram order must be at least 1");
    let mut counts: HashMap<String, usize> = HashMap::new();
    for w in tokens.windows(n) {
        *counts.entry(w.join(" ")).or_default() += 1;
    }
    let mut out: Vec<TermCount> = counts
        .into_iter()
        .map(|(term, count)| TermCount { term, count })
        .collect();
    out.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.term.cmp(&b.term)));
    out
}

/// Fraction of all tokens falling in each category.
pub fn category_proportions(
    tokens: &[String],
    lexicon: &CategoryLexicon,
) -> BTreeMap<Category, f64> {
    let mut counts: BTreeMap<Category, usize> = Category::ALL.iter().map(|c| (*c, 0)).collect();
    for t in tokens {
        if let Some(c) = lexicon.category_of(t) {
            *counts.get_mut(&c).expect("all categories present") += 1;
        }
    }
    counts
        .into_iter()
        .map(|(c, k)| {
            let p = if tokens.is_empty() {
                0.0
            } else {
                k as f64 / tokens.len() as f64
            };
            (c, p)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub tokens: Vec<TermCount>,
    pub bigrams: Vec<TermCount>,
    pub categories: BTreeMap<Category, f64>,
    pub total_tokens: usize,
}

/// Tokenizes and lemmatizes every message; categories are measured on all
/// tokens, n-grams after stopword removal within each message.
pub fn summarize_corpus<'a>(
    messages: impl IntoIterator<Item = &'a str>,
    lexicon: &CategoryLexicon,
) -> CorpusSummary {
    let stop = Stopwords::embedded();
    let mut all = Vec::new();
    let mut unigrams: HashMap<String, usize> = HashMap::new();
    let mut bigrams: HashMap<String, usize> = HashMap::new();
    for msg in messages {
        let toks: Vec<String> = tokenize(msg)
            .iter()
            .map(|t| lemmatize(t, lexicon))
            .collect();
        let kept = remove_stopwords(&toks, stop, lexicon);
        for tc in ngram_counts(&kept, 1) {
            *unigrams.entry(tc.term).or_default() += tc.count;
        }
        for tc in ngram_counts(&kept, 2) {
            *bigrams.entry(tc.term).or_default() += tc.count;
        }
        all.extend(toks);
    }
    let sorted = |m: HashMap<String, usize>| {
        let mut v: Vec<TermCount> = m
            .into_iter()
            .map(|(term, count)| TermCount { term, count })
            .collect();
        v.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.term.cmp(&b.term)));
        v
    };
    CorpusSummary {
        tokens: sorted(unigrams),
        bigrams: sorted(bigrams),
        categories: category_proportions(&all, lexicon),
        total_tokens: all.len(),
    }
}
