//! Parsers for external alignment artifacts: forced-alignment utterance
//! records, pharaoh word alignments, and sentence-level sync maps.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A word and its half-open phoneme span `[start, end)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Word {
    pub text: String,
    pub span: [usize; 2],
}

impl Word {
    pub fn start(&self) -> usize {
        self.span[0]
    }

    pub fn end(&self) -> usize {
        self.span[1]
    }

    pub fn phonemes(&self) -> std::ops::Range<usize> {
        self.span[0]..self.span[1]
    }
}

/// Forced-alignment output for one utterance. Durations are in frames.
///
/// Phonemes outside every word span (silences, punctuation) are allowed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Utterance {
    pub id: String,
    pub language: String,
    pub phonemes: Vec<String>,
    pub durations: Vec<i64>,
    pub words: Vec<Word>,
}

impl Utterance {
    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::Schema("utterance id is empty".into()));
        }
        if self.language.is_empty() {
            return Err(Error::Schema(format!("utterance {:?} has no language", self.id)));
        }
        if self.phonemes.len() != self.durations.len() {
            return Err(Error::DurationCountMismatch {
                phonemes: self.phonemes.len(),
                durations: self.durations.len(),
            });
        }
        if let Some((index, &value)) = self.durations.iter().enumerate().find(|(_, &d)| d < 0) {
            return Err(Error::NegativeDuration { index, value });
        }
        let mut prev_end = 0;
        for (i, w) in self.words.iter().enumerate() {
            if w.start() >= w.end() {
                return Err(Error::Schema(format!("word {i} ({:?}) has empty span {:?}", w.text, w.span)));
            }
            if i > 0 && w.start() < prev_end {
                return Err(Error::SpanOverlap { index: i });
            }
            if w.end() > self.phonemes.len() {
                return Err(Error::Schema(format!(
                    "word {i} span {:?} exceeds {} phonemes",
                    w.span,
                    self.phonemes.len()
                )));
            }
            prev_end = w.end();
        }
        Ok(())
    }

    pub fn num_frames(&self) -> i64 {
        self.durations.iter().sum()
    }

    /// Word index owning each phoneme, `None` outside every span.
    pub fn phoneme_words(&self) -> Vec<Option<usize>> {
        let mut owner = vec![None; self.phonemes.len()];
        for (w, word) in self.words.iter().enumerate() {
            for p in word.phonemes() {
                owner[p] = Some(w);
            }
        }
        owner
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("utterance serializes")
    }
}

/// Parse and validate one utterance record.
pub fn parse_utterance_record(document: &str) -> Result<Utterance> {
    let utt: Utterance = serde_json::from_str(document).map_err(|e| Error::Schema(e.to_string()))?;
    utt.validate()?;
    Ok(utt)
}

/// Source→target word links of one sentence pair.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WordAlignment {
    pub links: BTreeSet<(usize, usize)>,
}

impl WordAlignment {
    pub fn new(links: impl IntoIterator<Item = (usize, usize)>) -> Self {
        Self { links: links.into_iter().collect() }
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }
}

impl fmt::Display for WordAlignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, (s, t)) in self.links.iter().enumerate() {
            if k > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{s}-{t}")?;
        }
        Ok(())
    }
}

fn parse_index(s: &str, token: &str) -> Result<usize> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return Err(Error::Token(token.to_string()));
    }
    s.parse().map_err(|_| Error::Token(token.to_string()))
}

/// Parse one pharaoh line (`"0-0 1-2 2-2"`). Possible links (`i-j-p`) are rejected.
pub fn parse_word_alignment(line: &str) -> Result<WordAlignment> {
    let mut links = BTreeSet::new();
    for token in line.split_whitespace() {
        let mut parts = token.split('-');
        let (Some(s), Some(t), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::Token(token.to_string()));
        };
        links.insert((parse_index(s, token)?, parse_index(t, token)?));
    }
    Ok(WordAlignment { links })
}

/// Parse a pharaoh file, one sentence pair per line. Errors carry the 1-based line.
pub fn parse_word_alignment_file(text: &str) -> Result<Vec<WordAlignment>> {
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            parse_word_alignment(line).map_err(|e| match e {
                Error::Token(t) => Error::Token(format!("{t} (line {})", i + 1)),
                other => other,
            })
        })
        .collect()
}

/// One sentence of a chapter-level sync map, times in seconds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Segment {
    pub id: String,
    pub begin: f64,
    pub end: f64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentMap {
    pub entries: Vec<Segment>,
    /// Set when any two fragments overlap in time.
    pub overlap_warning: bool,
}

impl SegmentMap {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Doc<'a> {
            fragments: &'a [Segment],
        }
        serde_json::to_string(&Doc { fragments: &self.entries }).expect("sync map serializes")
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Seconds {
    Number(f64),
    Text(String),
}

impl Seconds {
    fn value(&self, field: &str, id: &str) -> Result<f64> {
        let v = match self {
            Seconds::Number(v) => *v,
            Seconds::Text(s) => s
                .trim()
                .parse()
                .map_err(|_| Error::Schema(format!("fragment {id:?}: {field} {s:?} is not a number")))?,
        };
        if !v.is_finite() || v < 0.0 {
            return Err(Error::Schema(format!("fragment {id:?}: {field} {v} must be a finite time >= 0")));
        }
        Ok(v)
    }
}

#[derive(Deserialize)]
struct RawFragment {
    id: String,
    begin: Seconds,
    end: Seconds,
    #[serde(default)]
    text: Option<String>,
    /// Sync-map writers that emit one entry per text line.
    #[serde(default)]
    lines: Option<Vec<String>>,
}

#[derive(Deserialize)]
struct RawSyncMap {
    fragments: Vec<RawFragment>,
}

/// Parse a sync map document. Begin/end may be numbers or numeric strings;
/// text comes from `text` or, failing that, the space-joined `lines`.
pub fn parse_sync_map(document: &str) -> Result<SegmentMap> {
    let raw: RawSyncMap = serde_json::from_str(document).map_err(|e| Error::Schema(e.to_string()))?;
    let mut entries = Vec::with_capacity(raw.fragments.len());
    for f in raw.fragments {
        let begin = f.begin.value("begin", &f.id)?;
        let end = f.end.value("end", &f.id)?;
        if end <= begin {
            return Err(Error::NegativeInterval { id: f.id, begin, end });
        }
        let text = f.text.or_else(|| f.lines.map(|l| l.join(" "))).unwrap_or_default();
        entries.push(Segment { id: f.id, begin, end, text });
    }
    entries.sort_by(|a, b| a.begin.total_cmp(&b.begin));
    let overlap_warning = entries.windows(2).any(|w| w[1].begin < w[0].end);
    Ok(SegmentMap { entries, overlap_warning })
}
