//! Commit message cleanup and normalization.

use super::porter::stem;
use std::collections::HashSet;
use std::sync::LazyLock;

pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

/// English stop words (127 entries, the classic NLTK list).
pub const STOP_WORDS: [&str; 127] = [
    "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you", "your", "yours",
    "yourself", "yourselves", "he", "him", "his", "himself", "she", "her", "hers", "herself",
    "it", "its", "itself", "they", "them", "their", "theirs", "themselves", "what", "which",
    "who", "whom", "this", "that", "these", "those", "am", "is", "are", "was", "were", "be",
    "been", "being", "have", "has", "had", "having", "do", "does", "did", "doing", "a", "an",
    "the", "and", "but", "if", "or", "because", "as", "until", "while", "of", "at", "by",
    "for", "with", "about", "against", "between", "into", "through", "during", "before",
    "after", "above", "below", "to", "from", "up", "down", "in", "out", "on", "off", "over",
    "under", "again", "further", "then", "once", "here", "there", "when", "where", "why",
    "how", "all", "any", "both", "each", "few", "more", "most", "other", "some", "such", "no",
    "nor", "not", "only", "own", "same", "so", "than", "too", "very", "s", "t", "can", "will",
    "just", "don", "should", "now",
];

static STOP_SET: LazyLock<HashSet<&'static str>> = LazyLock::new(|| STOP_WORDS.into_iter().collect());

/// Trailer tags removed from messages, compared case-insensitively.
pub const DROPPED_TAGS: [&str; 9] = [
    "cc:",
    "fixes:",
    "signed-off-by:",
    "reviewed-by:",
    "acked-by:",
    "tested-by:",
    "reported-by:",
    "suggested-by:",
    "link:",
];

pub fn is_stop_word(word: &str) -> bool {
    STOP_SET.contains(word)
}

/// Removes whole lines that start with one of [`DROPPED_TAGS`].
pub fn strip_tags(message: &str) -> String {
    let kept: Vec<&str> = message
        .lines()
        .filter(|line| {
            let l = line.trim_start().to_ascii_lowercase();
            !DROPPED_TAGS.iter().any(|t| l.starts_with(t))
        })
        .collect();
    kept.join("\n").trim().to_string()
}

/// Lowercased ASCII-alphanumeric runs of `text`.
pub fn split_words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_ascii_lowercase)
}

/// Lowercases, splits, drops stop words and stems. No padding.
pub fn message_words(message: &str) -> Vec<String> {
    split_words(message)
        .filter(|w| !is_stop_word(w))
        .map(|w| stem(&w))
        .collect()
}

/// [`message_words`] truncated or padded with [`PAD_TOKEN`] to exactly `len` tokens.
pub fn normalize_message(message: &str, len: usize) -> Vec<String> {
    let mut words = message_words(message);
    words.truncate(len);
    words.resize(len, PAD_TOKEN.to_string());
    words
}
