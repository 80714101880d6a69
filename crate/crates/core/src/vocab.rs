//! Word ↔ index vocabularies for the message and code channels.

use crate::preprocess::{FunctionNameTable, TokenizedPatch, PAD_TOKEN, UNK_TOKEN};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

pub const PAD: u32 = 0;
pub const UNK: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Message,
    Code,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    pub channel: Channel,
    index_to_word: Vec<String>,
    word_to_index: HashMap<String, u32>,
}

/// On-disk form: `words[i]` has index `i + 2`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VocabularyJson {
    pub channel: Channel,
    pub words: Vec<String>,
}

impl Vocabulary {
    fn from_words(channel: Channel, words: impl IntoIterator<Item = String>) -> Self {
        let mut index_to_word = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        index_to_word.extend(words);
        let word_to_index = index_to_word
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        Vocabulary {
            channel,
            index_to_word,
            word_to_index,
        }
    }

    pub fn len(&self) -> usize {
        self.index_to_word.len()
    }

    /// Always false: PAD and UNK are present.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index_of(&self, word: &str) -> u32 {
        self.word_to_index.get(word).copied().unwrap_or(UNK)
    }

    pub fn word(&self, index: u32) -> Option<&str> {
        self.index_to_word.get(index as usize).map(String::as_str)
    }

    pub fn to_json(&self) -> VocabularyJson {
        VocabularyJson {
            channel: self.channel,
            words: self.index_to_word[2..].to_vec(),
        }
    }

    pub fn from_json(v: VocabularyJson) -> Self {
        Self::from_words(v.channel, v.words)
    }
}

/// Builds a vocabulary ordered by descending frequency, ties broken lexicographically.
/// The reserved PAD/UNK spellings are never counted.
pub fn build_vocab<'a, I>(tokens: I, channel: Channel, min_count: usize) -> Vocabulary
where
    I: IntoIterator<Item = &'a str>,
{
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in tokens {
        if t == PAD_TOKEN || t == UNK_TOKEN || t.is_empty() {
            continue;
        }
        *counts.entry(t).or_default() += 1;
    }
    let mut ranked: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|(_, n)| *n >= min_count.max(1))
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    Vocabulary::from_words(channel, ranked.into_iter().map(|(w, _)| w.to_string()))
}

/// Message and code vocabularies plus the function table they were built with.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabularies {
    pub message: Vocabulary,
    pub code: Vocabulary,
    pub functions: FunctionNameTable,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VocabFile {
    pub message: VocabularyJson,
    pub code: VocabularyJson,
    #[serde(default)]
    pub function_names: Vec<String>,
}

impl Vocabularies {
    /// Builds both vocabularies from the training split only.
    pub fn from_training(train: &[TokenizedPatch], functions: FunctionNameTable, min_count: usize) -> Self {
        let message = build_vocab(
            train.iter().flat_map(|p| p.message.iter().map(String::as_str)),
            Channel::Message,
            min_count,
        );
        let code = build_vocab(
            train.iter().flat_map(|p| p.code_tokens()),
            Channel::Code,
            min_count,
        );
        Vocabularies {
            message,
            code,
            functions,
        }
    }

    pub fn to_file(&self) -> VocabFile {
        VocabFile {
            message: self.message.to_json(),
            code: self.code.to_json(),
            function_names: self.functions.retained.iter().cloned().collect(),
        }
    }

    pub fn from_file(f: VocabFile) -> Self {
        Vocabularies {
            message: Vocabulary::from_json(f.message),
            code: Vocabulary::from_json(f.code),
            functions: FunctionNameTable {
                retained: f.function_names.into_iter().collect(),
            },
        }
    }
}
