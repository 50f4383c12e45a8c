//! Character- and word-granularity vocabularies.
//!
//! Word mode treats every whitespace-separated run as one token, so a chord
//! like `C:maj` or a drum word like `110000000` is a single state. Char mode
//! treats every character, the space separator included, as a state.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Char,
    Word,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Char => "char",
            Mode::Word => "word",
        })
    }
}

impl FromStr for Mode {
    type Err = TokenizerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "char" => Ok(Mode::Char),
            "word" => Ok(Mode::Word),
            other => Err(TokenizerError::UnknownMode(other.to_string())),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TokenizerError {
    #[error("cannot build a vocabulary from an empty corpus")]
    EmptyCorpus,
    #[error("token {token:?} at position {position} is not in the vocabulary")]
    OutOfVocabulary { token: String, position: usize },
    #[error("token index {index} out of range for vocabulary of size {size}")]
    IndexOutOfRange { index: usize, size: usize },
    #[error("invalid vocabulary: {0}")]
    InvalidVocab(String),
    #[error("unknown tokenizer mode {0:?} (expected \"char\" or \"word\")")]
    UnknownMode(String),
}

/// Bidirectional token/index map, sorted lexicographically.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    mode: Mode,
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    /// Rebuilds a vocabulary from a stored token list, e.g. a checkpoint header.
    pub fn from_tokens(mode: Mode, tokens: Vec<String>) -> Result<Self, TokenizerError> {
        if tokens.is_empty() {
            return Err(TokenizerError::EmptyCorpus);
        }
        for t in &tokens {
            let ok = match mode {
                Mode::Char => t.chars().count() == 1,
                Mode::Word => !t.is_empty() && !t.chars().any(char::is_whitespace),
            };
            if !ok {
                return Err(TokenizerError::InvalidVocab(format!(
                    "{t:?} is not a valid {mode} token"
                )));
            }
        }
        if tokens.windows(2).any(|w| w[0] >= w[1]) {
            return Err(TokenizerError::InvalidVocab(
                "tokens must be unique and sorted".into(),
            ));
        }
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Ok(Self {
            mode,
            tokens,
            index,
        })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.tokens.get(index).map(String::as_str)
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Splits `text` into tokens according to the vocabulary mode, without
    /// looking anything up.
    pub fn split<'t>(&self, text: &'t str) -> Vec<&'t str> {
        split_tokens(text, self.mode)
    }

    pub fn encode_ids(&self, text: &str) -> Result<Vec<usize>, TokenizerError> {
        self.split(text)
            .into_iter()
            .enumerate()
            .map(|(position, tok)| {
                self.index_of(tok)
                    .ok_or_else(|| TokenizerError::OutOfVocabulary {
                        token: tok.to_string(),
                        position,
                    })
            })
            .collect()
    }

    pub fn decode_ids(&self, ids: &[usize]) -> Result<String, TokenizerError> {
        let toks = ids
            .iter()
            .map(|&i| {
                self.token(i).ok_or(TokenizerError::IndexOutOfRange {
                    index: i,
                    size: self.len(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(match self.mode {
            Mode::Char => toks.concat(),
            Mode::Word => toks.join(" "),
        })
    }
}

fn split_tokens(text: &str, mode: Mode) -> Vec<&str> {
    match mode {
        Mode::Word => text.split_whitespace().collect(),
        Mode::Char => text
            .char_indices()
            .map(|(i, c)| &text[i..i + c.len_utf8()])
            .collect(),
    }
}

pub fn build_vocab(corpus: &str, mode: Mode) -> Result<Vocab, TokenizerError> {
    let distinct: BTreeSet<&str> = split_tokens(corpus, mode).into_iter().collect();
    if distinct.is_empty() {
        return Err(TokenizerError::EmptyCorpus);
    }
    Vocab::from_tokens(mode, distinct.into_iter().map(str::to_string).collect())
}

/// Index sequence tied to the vocabulary that produced it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenStream<'v> {
    vocab: &'v Vocab,
    ids: Vec<usize>,
}

impl<'v> TokenStream<'v> {
    pub fn new(vocab: &'v Vocab, ids: Vec<usize>) -> Result<Self, TokenizerError> {
        if let Some(&bad) = ids.iter().find(|&&i| i >= vocab.len()) {
            return Err(TokenizerError::IndexOutOfRange {
                index: bad,
                size: vocab.len(),
            });
        }
        Ok(Self { vocab, ids })
    }

    pub fn vocab(&self) -> &'v Vocab {
        self.vocab
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

pub fn encode<'v>(text: &str, vocab: &'v Vocab) -> Result<TokenStream<'v>, TokenizerError> {
    Ok(TokenStream {
        vocab,
        ids: vocab.encode_ids(text)?,
    })
}

pub fn decode(stream: &TokenStream<'_>) -> Result<String, TokenizerError> {
    stream.vocab.decode_ids(&stream.ids)
}

/// Collapses every whitespace run to a single space and trims the ends, the
/// canonical form of a corpus file.
pub fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}
