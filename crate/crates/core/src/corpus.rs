//! Dataset construction: cutting chapters into utterances, duration
//! filtering, corpus statistics and seeded train/val/test splits.

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::alignment::SegmentMap;
use crate::audio::AudioBuffer;
use crate::error::{Error, Result};
use crate::numeric::compensated_sum;

pub const MANIFEST_HEADER: [&str; 6] = ["id", "path", "language", "speaker", "duration_s", "text"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub id: String,
    pub path: String,
    pub language: String,
    pub speaker: String,
    pub duration_s: f64,
    pub text: String,
}

impl ManifestRecord {
    /// Book an utterance belongs to: the directory holding its audio.
    pub fn book(&self) -> String {
        Path::new(&self.path)
            .parent()
            .map(|p| p.to_string_lossy().into_owned())
            .unwrap_or_default()
    }
}

/// Utterance manifest with unique ids and positive durations.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    pub records: Vec<ManifestRecord>,
}

impl Manifest {
    pub fn new(records: Vec<ManifestRecord>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            if !seen.insert(r.id.as_str()) {
                return Err(Error::DuplicateId(r.id.clone()));
            }
            if !(r.duration_s > 0.0 && r.duration_s.is_finite()) {
                return Err(Error::Schema(format!("record {:?} has duration {}", r.id, r.duration_s)));
            }
        }
        Ok(Self { records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Transcript lookup built from the manifest's own text column.
    pub fn transcripts(&self) -> std::collections::BTreeMap<String, String> {
        self.records.iter().map(|r| (r.id.clone(), r.text.clone())).collect()
    }

    pub fn parse_tsv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Schema("manifest is empty, expected a header".into()))?;
        if header.split('\t').collect::<Vec<_>>() != MANIFEST_HEADER {
            return Err(Error::Schema(format!("manifest header {header:?}, expected {:?}", MANIFEST_HEADER.join("\t"))));
        }
        let mut records = Vec::new();
        for (n, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != MANIFEST_HEADER.len() {
                return Err(Error::Schema(format!("manifest line {}: {} fields, expected 6", n + 2, f.len())));
            }
            let duration_s = f[4]
                .parse()
                .map_err(|_| Error::Schema(format!("manifest line {}: bad duration {:?}", n + 2, f[4])))?;
            records.push(ManifestRecord {
                id: f[0].to_string(),
                path: f[1].to_string(),
                language: f[2].to_string(),
                speaker: f[3].to_string(),
                duration_s,
                text: f[5].to_string(),
            });
        }
        Self::new(records)
    }

    pub fn to_tsv(&self) -> Result<String> {
        let mut out = MANIFEST_HEADER.join("\t");
        out.push('\n');
        for r in &self.records {
            let fields = [&r.id, &r.path, &r.language, &r.speaker, &r.text];
            if fields.iter().any(|f| f.contains(['\t', '\n', '\r'])) {
                return Err(Error::Schema(format!("record {:?} has a tab or newline in a field", r.id)));
            }
            let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}\t{}", r.id, r.path, r.language, r.speaker, r.duration_s, r.text);
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// Segmentation

/// Sample index of a time, rounding half away from zero.
pub fn time_to_sample(seconds: f64, sample_rate: u32) -> usize {
    (seconds * sample_rate as f64).round() as usize
}

/// Cut a chapter into fragments `[round(begin*sr), round(end*sr))`.
pub fn segment_audio(chapter: &AudioBuffer, map: &SegmentMap) -> Result<Vec<AudioBuffer>> {
    let sr = chapter.sample_rate;
    map.entries
        .iter()
        .map(|seg| {
            let start = time_to_sample(seg.begin, sr);
            let end = time_to_sample(seg.end, sr);
            if end > chapter.len() {
                return Err(Error::OutOfRange { id: seg.id.clone(), end: seg.end, length: chapter.duration_secs() });
            }
            Ok(AudioBuffer { samples: chapter.samples[start..end].to_vec(), sample_rate: sr })
        })
        .collect()
}

/// Keep records with `min_s <= duration <= max_s`, preserving order.
pub fn duration_filter(man: &Manifest, min_s: f64, max_s: f64) -> Manifest {
    Manifest {
        records: man
            .records
            .iter()
            .filter(|r| r.duration_s >= min_s && r.duration_s <= max_s)
            .cloned()
            .collect(),
    }
}

// ---------------------------------------------------------------------------
// Statistics

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub audio_file_count: usize,
    pub unique_token_count: usize,
    pub word_count: usize,
    /// Distinct speakers per book, summed over books.
    pub speaker_count: usize,
    pub total_duration_s: f64,
}

impl CorpusStats {
    pub fn duration_hms(&self) -> String {
        format_hms(self.total_duration_s)
    }
}

/// Lowercased whitespace tokens with every non-alphanumeric character removed.
pub fn normalize_tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split_whitespace()
        .map(|t| t.chars().filter(|c| c.is_alphanumeric()).flat_map(char::to_lowercase).collect::<String>())
        .filter(|t| !t.is_empty())
}

pub fn corpus_stats(man: &Manifest, transcripts: &std::collections::BTreeMap<String, String>) -> Result<CorpusStats> {
    let mut vocab = HashSet::new();
    let mut word_count = 0;
    let mut speakers = BTreeSet::new();
    for r in &man.records {
        let text = transcripts.get(&r.id).ok_or_else(|| Error::MissingTranscript(r.id.clone()))?;
        for token in normalize_tokens(text) {
            word_count += 1;
            vocab.insert(token);
        }
        speakers.insert((r.book(), r.speaker.clone()));
    }
    Ok(CorpusStats {
        audio_file_count: man.len(),
        unique_token_count: vocab.len(),
        word_count,
        speaker_count: speakers.len(),
        total_duration_s: compensated_sum(man.records.iter().map(|r| r.duration_s)),
    })
}

/// `hh:mm:ss`, rounded to the nearest second; hours are not wrapped.
pub fn format_hms(seconds: f64) -> String {
    let total = seconds.max(0.0).round() as u64;
    format!("{:02}:{:02}:{:02}", total / 3600, (total / 60) % 60, total % 60)
}

/// Group digits in threes separated by a space, e.g. `25 635`.
pub fn format_thousands(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::with_capacity(digits.len() + digits.len() / 3);
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(' ');
        }
        out.push(c);
    }
    out
}

/// Table of statistics with one column per labelled corpus (e.g. per language).
pub fn render_stats_table(columns: &[(String, CorpusStats)]) -> String {
    let mut out = String::from("|");
    for (label, _) in columns {
        let _ = write!(out, " | {label}");
    }
    out.push_str(" |\n|---|");
    out.push_str(&"---|".repeat(columns.len()));
    out.push('\n');
    let rows: [(&str, fn(&CorpusStats) -> String); 5] = [
        ("# Audio files", |s| format_thousands(s.audio_file_count)),
        ("# unique Tokens", |s| format_thousands(s.unique_token_count)),
        ("# Words", |s| format_thousands(s.word_count)),
        ("# Speakers", |s| format_thousands(s.speaker_count)),
        ("Duration (hh:mm:ss)", |s| s.duration_hms()),
    ];
    for (name, value) in rows {
        out.push_str("| ");
        out.push_str(name);
        for (_, stats) in columns {
            let _ = write!(out, " | {}", value(stats));
        }
        out.push_str(" |\n");
    }
    out
}

// ---------------------------------------------------------------------------
// Splits

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitSizes {
    Counts { train: usize, val: usize, test: usize },
    Ratios { train: f64, val: f64, test: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub sizes: SplitSizes,
    pub seed: u64,
}

/// Sidecar written next to the three split manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSidecar {
    pub seed: u64,
    pub counts: SplitCounts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl SplitSpec {
    pub fn counts(train: usize, val: usize, test: usize, seed: u64) -> Self {
        Self { sizes: SplitSizes::Counts { train, val, test }, seed }
    }

    /// Resolve to exact counts for a manifest of `n` records. Ratio mode floors
    /// train and val and gives the remainder to test.
    pub fn resolve(&self, n: usize) -> Result<SplitCounts> {
        match self.sizes {
            SplitSizes::Counts { train, val, test } => {
                if train + val + test != n {
                    return Err(Error::BadSpec(format!("counts {train}+{val}+{test} != {n} records")));
                }
                Ok(SplitCounts { train, val, test })
            }
            SplitSizes::Ratios { train, val, test } => {
                if [train, val, test].iter().any(|r| !(0.0..=1.0).contains(r)) {
                    return Err(Error::BadSpec(format!("ratios must lie in [0, 1], got {train}, {val}, {test}")));
                }
                if (train + val + test - 1.0).abs() > 1e-9 {
                    return Err(Error::BadSpec(format!("ratios sum to {}", train + val + test)));
                }
                let tr = (train * n as f64).floor() as usize;
                let va = ((val * n as f64).floor() as usize).min(n - tr);
                Ok(SplitCounts { train: tr, val: va, test: n - tr - va })
            }
        }
    }
}

fn shuffle_key(seed: u64, id: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(id.as_bytes());
    h.finalize().into()
}

/// Deterministic split: records are ranked by `sha256(seed ‖ id)` and the
/// ranking is cut by the resolved counts. Each split keeps manifest order.
pub fn split_manifest(man: &Manifest, spec: &SplitSpec) -> Result<(Manifest, Manifest, Manifest)> {
    let counts = spec.resolve(man.len())?;
    let mut ranked: Vec<(usize, [u8; 32])> =
        man.records.iter().enumerate().map(|(i, r)| (i, shuffle_key(spec.seed, &r.id))).collect();
    ranked.sort_by(|a, b| a.1.cmp(&b.1).then(man.records[a.0].id.cmp(&man.records[b.0].id)));

    let mut assignment = vec![0u8; man.len()];
    for (rank, &(i, _)) in ranked.iter().enumerate() {
        assignment[i] = if rank < counts.train {
            0
        } else if rank < counts.train + counts.val {
            1
        } else {
            2
        };
    }
    let pick = |which: u8| Manifest {
        records: man
            .records
            .iter()
            .zip(&assignment)
            .filter(|(_, &a)| a == which)
            .map(|(r, _)| r.clone())
            .collect(),
    };
    Ok((pick(0), pick(1), pick(2)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alignment::Segment;

    fn rec(id: &str, duration_s: f64) -> ManifestRecord {
        ManifestRecord {
            id: id.into(),
            path: format!("book1/{id}.wav"),
            language: "en".into(),
            speaker: "spk".into(),
            duration_s,
            text: String::new(),
        }
    }

    fn seg(id: &str, begin: f64, end: f64) -> Segment {
        Segment { id: id.into(), begin, end, text: String::new() }
    }

    #[test]
    fn segment_lengths() {
        let chapter = AudioBuffer::new(vec![0.0; 22050 * 3], 22050).unwrap();
        let map = SegmentMap { entries: vec![seg("a", 0.0, 1.0), seg("b", 1.0, 2.5)], overlap_warning: false };
        let parts = segment_audio(&chapter, &map).unwrap();
        assert_eq!(parts.iter().map(|p| p.len()).collect::<Vec<_>>(), vec![22050, 33075]);

        let tiny = SegmentMap { entries: vec![seg("t", 0.0, 0.0001)], overlap_warning: false };
        assert_eq!(segment_audio(&chapter, &tiny).unwrap()[0].len(), 2);

        let short = AudioBuffer::new(vec![0.0; 22050 * 19 / 2], 22050).unwrap();
        let late = SegmentMap { entries: vec![seg("z", 9.0, 10.0)], overlap_warning: false };
        assert!(matches!(segment_audio(&short, &late), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn adjacent_segments_share_no_sample() {
        let chapter = AudioBuffer::new((0..1000).map(|i| i as f64 / 1000.0).collect(), 1000).unwrap();
        let map = SegmentMap { entries: vec![seg("a", 0.1234, 0.5555), seg("b", 0.5555, 0.9)], overlap_warning: false };
        let parts = segment_audio(&chapter, &map).unwrap();
        assert_ne!(parts[0].samples.last(), parts[1].samples.first());
        assert_eq!(parts[0].samples.last().unwrap() + 0.001, parts[1].samples[0]);
    }

    #[test]
    fn filter_bounds_are_inclusive() {
        let man = Manifest::new(
            [0.5, 1.0, 19.99, 20.0, 25.0].iter().enumerate().map(|(i, &d)| rec(&format!("r{i}"), d)).collect(),
        )
        .unwrap();
        let kept: Vec<f64> = duration_filter(&man, 1.0, 20.0).records.iter().map(|r| r.duration_s).collect();
        assert_eq!(kept, vec![1.0, 19.99, 20.0]);
        assert!(duration_filter(&Manifest::default(), 1.0, 20.0).is_empty());
    }

    #[test]
    fn stats_counts() {
        let mut records = vec![rec("a", 1.0), rec("b", 2.0), rec("c", 3.5)];
        records[0].text = "a b".into();
        records[1].text = "A, c".into();
        records[2].text = "b b!".into();
        records[2].speaker = "other".into();
        records[1].path = "book2/b.wav".into();
        let man = Manifest::new(records).unwrap();
        let s = corpus_stats(&man, &man.transcripts()).unwrap();
        assert_eq!(s.audio_file_count, 3);
        assert_eq!(s.word_count, 6);
        assert_eq!(s.unique_token_count, 3);
        // (book1, spk), (book2, spk), (book1, other)
        assert_eq!(s.speaker_count, 3);
        assert_eq!(s.total_duration_s, 6.5);
        assert_eq!(s.duration_hms(), "00:00:07");

        let mut missing = man.transcripts();
        missing.remove("b");
        assert_eq!(corpus_stats(&man, &missing), Err(Error::MissingTranscript("b".into())));

        let empty = corpus_stats(&Manifest::default(), &Default::default()).unwrap();
        assert_eq!((empty.audio_file_count, empty.word_count, empty.speaker_count), (0, 0, 0));
    }

    #[test]
    fn number_formats() {
        assert_eq!(format_thousands(25635), "25 635");
        assert_eq!(format_thousands(9322), "9 322");
        assert_eq!(format_thousands(42), "42");
        assert_eq!(format_thousands(1234567), "1 234 567");
        assert_eq!(format_hms(52.0 * 3600.0 + 30.0 * 60.0 + 57.0), "52:30:57");
        assert_eq!(format_hms(0.4), "00:00:00");
    }

    #[test]
    fn manifest_tsv_round_trip() {
        let mut r = rec("x", 1.25);
        r.text = "Hallo Welt".into();
        let man = Manifest::new(vec![r]).unwrap();
        let tsv = man.to_tsv().unwrap();
        assert!(tsv.starts_with("id\tpath\tlanguage\tspeaker\tduration_s\ttext\n"));
        assert_eq!(Manifest::parse_tsv(&tsv).unwrap(), man);
        assert!(Manifest::parse_tsv("id\tpath\n").is_err());
        let dup = format!("{tsv}x\tp\ten\ts\t1\tt\n");
        assert_eq!(Manifest::parse_tsv(&dup), Err(Error::DuplicateId("x".into())));
        let zero = "id\tpath\tlanguage\tspeaker\tduration_s\ttext\nx\tp\ten\ts\t0\tt\n";
        assert!(Manifest::parse_tsv(zero).is_err());
    }

    #[test]
    fn split_by_counts_and_ratios() {
        let man = Manifest::new((0..10).map(|i| rec(&format!("u{i}"), 1.0)).collect()).unwrap();
        let (a, b, c) = split_manifest(&man, &SplitSpec::counts(6, 2, 2, 7)).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (6, 2, 2));
        assert!(matches!(split_manifest(&man, &SplitSpec::counts(6, 2, 1, 7)), Err(Error::BadSpec(_))));

        let spec = SplitSpec { sizes: SplitSizes::Ratios { train: 0.8, val: 0.1, test: 0.1 }, seed: 1 };
        assert_eq!(spec.resolve(10).unwrap(), SplitCounts { train: 8, val: 1, test: 1 });
        let bad = SplitSpec { sizes: SplitSizes::Ratios { train: 0.8, val: 0.1, test: 0.2 }, seed: 1 };
        assert!(matches!(bad.resolve(10), Err(Error::BadSpec(_))));
    }

    #[test]
    fn split_spec_json() {
        let spec = SplitSpec::counts(2079, 129, 127, 42);
        let text = serde_json::to_string(&spec).unwrap();
        assert_eq!(text, r#"{"sizes":{"counts":{"train":2079,"val":129,"test":127}},"seed":42}"#);
        assert_eq!(serde_json::from_str::<SplitSpec>(&text).unwrap(), spec);
    }
}
