//! Sentiment proportions and their providers.
//!
//! Every review enters the geometric pipeline as a [`SentimentTriple`]:
//! three proportions (pos, neu, neg) on the probability simplex. Triples
//! come either from the built-in lexicon scorer ([`score_text`]) or from
//! precomputed columns in the dataset ([`passthrough`]), so any upstream
//! sentiment tool can feed the pipeline as long as its output lands on
//! the simplex.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use thiserror::Error;

use crate::ingest::ReviewRecord;

/// Default tolerance when renormalizing raw proportion triples.
pub const RENORM_TOLERANCE: f64 = 1e-6;

/// Tolerance on `pos + neu + neg = 1` for an already-valid triple.
const SUM_TOLERANCE: f64 = 1e-9;

/// A point on the probability simplex: non-negative (pos, neu, neg)
/// proportions summing to 1 within `1e-9`.
///
/// Component order is (pos, neu, neg) everywhere in this crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SentimentTriple {
    pos: f64,
    neu: f64,
    neg: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum TripleError {
    #[error("non-finite component in ({0}, {1}, {2})")]
    NonFinite(f64, f64, f64),
    #[error("negative component in ({0}, {1}, {2})")]
    Negative(f64, f64, f64),
    #[error("component above 1 in ({0}, {1}, {2})")]
    AboveOne(f64, f64, f64),
    #[error("components sum to {sum}, outside tolerance {tolerance} around 1")]
    SumOutOfTolerance { sum: f64, tolerance: f64 },
}

impl SentimentTriple {
    /// Wholly neutral triple (0, 1, 0); the convention for texts with no
    /// scoreable tokens.
    pub const NEUTRAL: SentimentTriple = SentimentTriple {
        pos: 0.0,
        neu: 1.0,
        neg: 0.0,
    };

    /// Builds a triple that must already satisfy the simplex constraints:
    /// components in [0, 1] and sum within `1e-9` of 1. No renormalization
    /// is applied, so the stored components are bit-identical to the inputs.
    pub fn new(pos: f64, neu: f64, neg: f64) -> Result<Self, TripleError> {
        if !(pos.is_finite() && neu.is_finite() && neg.is_finite()) {
            return Err(TripleError::NonFinite(pos, neu, neg));
        }
        if pos < 0.0 || neu < 0.0 || neg < 0.0 {
            return Err(TripleError::Negative(pos, neu, neg));
        }
        if pos > 1.0 || neu > 1.0 || neg > 1.0 {
            return Err(TripleError::AboveOne(pos, neu, neg));
        }
        let sum = pos + neu + neg;
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(TripleError::SumOutOfTolerance {
                sum,
                tolerance: SUM_TOLERANCE,
            });
        }
        Ok(SentimentTriple { pos, neu, neg })
    }

    /// Validates a raw (pos, neu, neg) vector and renormalizes it onto the
    /// simplex: all components must be finite and non-negative, and their
    /// sum must lie within `renorm_tolerance` of 1. The components are then
    /// divided by the sum.
    pub fn from_raw(raw: [f64; 3], renorm_tolerance: f64) -> Result<Self, TripleError> {
        let [pos, neu, neg] = raw;
        if !(pos.is_finite() && neu.is_finite() && neg.is_finite()) {
            return Err(TripleError::NonFinite(pos, neu, neg));
        }
        if pos < 0.0 || neu < 0.0 || neg < 0.0 {
            return Err(TripleError::Negative(pos, neu, neg));
        }
        let sum = pos + neu + neg;
        if (sum - 1.0).abs() > renorm_tolerance {
            return Err(TripleError::SumOutOfTolerance {
                sum,
                tolerance: renorm_tolerance,
            });
        }
        Ok(SentimentTriple {
            pos: pos / sum,
            neu: neu / sum,
            neg: neg / sum,
        })
    }

    pub fn pos(&self) -> f64 {
        self.pos
    }

    pub fn neu(&self) -> f64 {
        self.neu
    }

    pub fn neg(&self) -> f64 {
        self.neg
    }

    /// Signed polarity lean `pos - neg`, in [-1, 1].
    pub fn lean(&self) -> f64 {
        self.pos - self.neg
    }
}

/// Token-to-valence map backing the built-in proportion scorer.
///
/// Tokens are stored lowercase; valences must be finite; at least one entry
/// is required. The on-disk format is tab-separated `token<TAB>valence`
/// lines with `#`-prefixed comment lines ignored. Only the first two fields
/// of each line are used, which makes the published VADER lexicon file a
/// drop-in.
#[derive(Debug, Clone)]
pub struct Lexicon {
    entries: HashMap<String, f64>,
}

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("cannot read lexicon {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("lexicon line {line}: missing valence field")]
    MissingValence { line: usize },
    #[error("lexicon line {line}: cannot parse valence {value:?}")]
    BadValence { line: usize, value: String },
    #[error("lexicon line {line}: non-finite valence for token {token:?}")]
    NonFiniteValence { line: usize, token: String },
    #[error("lexicon line {line}: duplicate token {token:?}")]
    DuplicateToken { line: usize, token: String },
    #[error("lexicon has no entries")]
    Empty,
}

impl Lexicon {
    /// Builds a lexicon from (token, valence) pairs. Tokens are lowercased;
    /// duplicates (after lowercasing) and non-finite valences are rejected.
    pub fn from_entries<I, S>(entries: I) -> Result<Self, LexiconError>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: AsRef<str>,
    {
        let mut map = HashMap::new();
        for (line, (token, valence)) in entries.into_iter().enumerate() {
            let token = token.as_ref().to_lowercase();
            if !valence.is_finite() {
                return Err(LexiconError::NonFiniteValence { line: line + 1, token });
            }
            if map.insert(token.clone(), valence).is_some() {
                return Err(LexiconError::DuplicateToken { line: line + 1, token });
            }
        }
        if map.is_empty() {
            return Err(LexiconError::Empty);
        }
        Ok(Lexicon { entries: map })
    }

    pub fn from_path(path: &Path) -> Result<Self, LexiconError> {
        let file = File::open(path).map_err(|source| LexiconError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_reader(BufReader::new(file))
    }

    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self, LexiconError> {
        let mut map = HashMap::new();
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|source| LexiconError::Io {
                path: String::from("<reader>"),
                source,
            })?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut fields = line.split('\t');
            let token = match fields.next() {
                Some(t) if !t.trim().is_empty() => t.trim().to_lowercase(),
                _ => continue,
            };
            let raw = fields
                .next()
                .ok_or(LexiconError::MissingValence { line: line_no })?
                .trim();
            let valence: f64 = raw.parse().map_err(|_| LexiconError::BadValence {
                line: line_no,
                value: raw.to_string(),
            })?;
            if !valence.is_finite() {
                return Err(LexiconError::NonFiniteValence {
                    line: line_no,
                    token,
                });
            }
            if map.insert(token.clone(), valence).is_some() {
                return Err(LexiconError::DuplicateToken {
                    line: line_no,
                    token,
                });
            }
        }
        if map.is_empty() {
            return Err(LexiconError::Empty);
        }
        Ok(Lexicon { entries: map })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn valence(&self, token: &str) -> Option<f64> {
        self.entries.get(token).copied()
    }
}

/// Tokenizes for scoring: split on Unicode whitespace, strip leading and
/// trailing non-alphanumeric characters, lowercase, drop tokens that end
/// up empty.
fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
}

/// Scores a text as token proportions: each token counts as positive
/// (valence > 0), negative (valence < 0) or neutral (absent or valence 0),
/// and the triple is the three counts divided by the total token count.
///
/// Texts with no tokens map to the wholly neutral triple (0, 1, 0).
/// The scorer is order-free, case-insensitive and whitespace-insensitive
/// by construction.
pub fn score_text(text: &str, lexicon: &Lexicon) -> SentimentTriple {
    let mut total = 0u64;
    let mut pos = 0u64;
    let mut neg = 0u64;
    for token in tokens(text) {
        total += 1;
        match lexicon.valence(&token) {
            Some(v) if v > 0.0 => pos += 1,
            Some(v) if v < 0.0 => neg += 1,
            _ => {}
        }
    }
    if total == 0 {
        return SentimentTriple::NEUTRAL;
    }
    let t = total as f64;
    let neu = total - pos - neg;
    SentimentTriple::new(pos as f64 / t, neu as f64 / t, neg as f64 / t)
        .expect("count proportions lie on the simplex")
}

/// Returns a record's precomputed triple, for datasets that carry
/// sentiment columns instead of text.
pub fn passthrough(record: &ReviewRecord) -> Result<SentimentTriple, TripleError> {
    record.precomputed.ok_or(TripleError::SumOutOfTolerance {
        sum: 0.0,
        tolerance: RENORM_TOLERANCE,
    })
}
