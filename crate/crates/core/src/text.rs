//! Tokenization shared by every textual element.
//!
//! Lowercase, strip markup tags, split on non-alphanumerics, drop stopwords and
//! leftover HTML entity names.

use std::collections::HashSet;
use std::sync::OnceLock;

const STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are",
    "as", "at", "be", "because", "been", "before", "being", "below", "between", "both", "but",
    "by", "can", "did", "do", "does", "doing", "down", "during", "each", "few", "for", "from",
    "further", "had", "has", "have", "having", "he", "her", "here", "hers", "herself", "him",
    "himself", "his", "how", "i", "if", "in", "into", "is", "it", "its", "itself", "just", "me",
    "more", "most", "my", "myself", "no", "nor", "not", "now", "of", "off", "on", "once", "only",
    "or", "other", "our", "ours", "ourselves", "out", "over", "own", "same", "she", "should", "so",
    "some", "such", "than", "that", "the", "their", "theirs", "them", "themselves", "then",
    "there", "these", "they", "this", "those", "through", "to", "too", "under", "until", "up",
    "very", "was", "we", "were", "what", "when", "where", "which", "while", "who", "whom", "why",
    "will", "with", "you", "your", "yours", "yourself", "yourselves",
];

/// Entity names left behind by unescaped HTML (`&nbsp;` → `nbsp`).
const MARKUP: &[&str] = &["nbsp", "amp", "quot", "lt", "gt", "apos", "ndash", "mdash", "br"];

fn stopwords() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| STOPWORDS.iter().chain(MARKUP).copied().collect())
}

pub fn is_stopword(token: &str) -> bool {
    stopwords().contains(token)
}

/// Remove `<...>` tags, keeping the text between them.
fn strip_tags(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut depth = 0usize;
    for ch in text.chars() {
        match ch {
            '<' => depth += 1,
            '>' if depth > 0 => {
                depth -= 1;
                out.push(' ');
            }
            _ if depth == 0 => out.push(ch),
            _ => {}
        }
    }
    out
}

pub fn tokenize(text: &str) -> Vec<String> {
    let cleaned = strip_tags(text).to_lowercase();
    cleaned
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty() && !is_stopword(t))
        .map(str::to_owned)
        .collect()
}

/// Tokenize a sequence of strings, concatenating the tokens in order.
pub fn tokenize_all<'a>(texts: impl IntoIterator<Item = &'a str>) -> Vec<String> {
    texts.into_iter().flat_map(tokenize).collect()
}

/// Normalized form of a whole heading label: lowercase, markup removed,
/// internal whitespace collapsed.
pub fn normalize_heading(text: &str) -> String {
    strip_tags(text)
        .to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn topic_tokens() {
        assert_eq!(
            tokenize_all(["List of stadiums", "Norway"]),
            vec!["list", "stadiums", "norway"]
        );
    }

    #[test]
    fn markup_and_punctuation() {
        assert_eq!(
            tokenize("<b>FC Barcelona</b>&nbsp;(2015–16)"),
            vec!["fc", "barcelona", "2015", "16"]
        );
    }

    #[test]
    fn heading_normalization() {
        assert_eq!(normalize_heading("  Team <i>Name</i>\n"), "team name");
        assert_eq!(normalize_heading(""), "");
    }
}
