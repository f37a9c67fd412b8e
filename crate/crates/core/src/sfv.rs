//! Source Feature Vectors.
//!
//! Source-language word prosody (z-scored pitch and energy averaged per word)
//! is carried across a word alignment onto the target utterance, one value
//! per target phoneme. Target words without a link receive 0, which after
//! z-normalization reads as "average".
//!
//! The vectors feed a synthesis model in one of three layouts (`pho`, `emb`,
//! `epi`) or are added directly onto predictor outputs.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::alignment::{Utterance, WordAlignment};
use crate::error::{Error, Result};
use crate::features::{phoneme_average, z_normalize, FeatureKind, FeatureRecord, NormStats, PhonemeValues};

/// One z-scored value per word of an utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordValues {
    pub kind: FeatureKind,
    pub values: Vec<f64>,
}

impl WordValues {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Pool normalized phoneme values into word values, weighting each phoneme by
/// the number of frames behind it. Words with no supporting frames get 0.
pub fn word_averages(phoneme_values: &PhonemeValues, utt: &Utterance) -> Result<WordValues> {
    if phoneme_values.len() != utt.phonemes.len() || phoneme_values.support.len() != utt.phonemes.len() {
        return Err(Error::LengthMismatch(format!(
            "{} phoneme values for utterance {:?} with {} phonemes",
            phoneme_values.len(),
            utt.id,
            utt.phonemes.len()
        )));
    }
    if !phoneme_values.normalized {
        return Err(Error::Schema(format!(
            "{} values for {:?} are not z-normalized",
            phoneme_values.kind, utt.id
        )));
    }
    let mut values = Vec::with_capacity(utt.words.len());
    for word in &utt.words {
        if word.end() > phoneme_values.len() {
            return Err(Error::LengthMismatch(format!("word span {:?} exceeds phoneme count", word.span)));
        }
        let mut weighted = 0.0;
        let mut weight = 0u64;
        for p in word.phonemes() {
            weighted += phoneme_values.support[p] as f64 * phoneme_values.values[p];
            weight += phoneme_values.support[p];
        }
        values.push(if weight == 0 { 0.0 } else { weighted / weight as f64 });
    }
    Ok(WordValues { kind: phoneme_values.kind, values })
}

/// Per-target-phoneme source prosody.
///
/// Invariant: wherever `aligned_mask` is false both channels hold exactly 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceFeatureVector {
    pub utterance_id: String,
    pub pitch: Vec<f64>,
    pub energy: Vec<f64>,
    pub aligned_mask: Vec<bool>,
}

impl SourceFeatureVector {
    pub fn len(&self) -> usize {
        self.pitch.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pitch.is_empty()
    }

    pub fn channel(&self, kind: FeatureKind) -> &[f64] {
        match kind {
            FeatureKind::Pitch => &self.pitch,
            FeatureKind::Energy => &self.energy,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.energy.len() != self.pitch.len() || self.aligned_mask.len() != self.pitch.len() {
            return Err(Error::Schema(format!(
                "sfv {:?}: pitch {}, energy {}, mask {}",
                self.utterance_id,
                self.pitch.len(),
                self.energy.len(),
                self.aligned_mask.len()
            )));
        }
        let unaligned_nonzero = (0..self.len()).any(|i| !self.aligned_mask[i] && (self.pitch[i] != 0.0 || self.energy[i] != 0.0));
        if unaligned_nonzero {
            return Err(Error::Schema(format!("sfv {:?}: unaligned phoneme with nonzero value", self.utterance_id)));
        }
        Ok(())
    }
}

/// Map source word values onto target phonemes through the word alignment.
///
/// A target word linked to several source words takes the plain mean of their
/// values; the word's value is copied onto every phoneme of its span.
pub fn build_sfv(src_pitch: &WordValues, src_energy: &WordValues, align: &WordAlignment, tgt: &Utterance) -> Result<SourceFeatureVector> {
    if src_pitch.kind != FeatureKind::Pitch || src_energy.kind != FeatureKind::Energy {
        return Err(Error::KindMismatch { stats: src_pitch.kind, contour: FeatureKind::Pitch });
    }
    if src_pitch.len() != src_energy.len() {
        return Err(Error::LengthMismatch(format!(
            "{} source pitch words but {} energy words",
            src_pitch.len(),
            src_energy.len()
        )));
    }
    let n_src = src_pitch.len();
    let n_tgt = tgt.words.len();
    for &(s, t) in &align.links {
        if s >= n_src || t >= n_tgt {
            return Err(Error::IndexOutOfRange(format!(
                "link {s}-{t} with {n_src} source and {n_tgt} target words"
            )));
        }
    }

    // BTreeSet order is (source, target), so each target collects its sources ascending.
    let mut sources: Vec<Vec<usize>> = vec![Vec::new(); n_tgt];
    for &(s, t) in &align.links {
        sources[t].push(s);
    }

    let n = tgt.phonemes.len();
    let mut sfv = zero_sfv(tgt);
    for (word, linked) in tgt.words.iter().zip(&sources) {
        if linked.is_empty() {
            continue;
        }
        let count = linked.len() as f64;
        let pitch = linked.iter().map(|&s| src_pitch.values[s]).sum::<f64>() / count;
        let energy = linked.iter().map(|&s| src_energy.values[s]).sum::<f64>() / count;
        for p in word.phonemes().filter(|&p| p < n) {
            sfv.pitch[p] = pitch;
            sfv.energy[p] = energy;
            sfv.aligned_mask[p] = true;
        }
    }
    Ok(sfv)
}

/// All-zero SFV for the target, as used when ablating source information.
pub fn zero_sfv(tgt: &Utterance) -> SourceFeatureVector {
    let n = tgt.phonemes.len();
    SourceFeatureVector {
        utterance_id: tgt.id.clone(),
        pitch: vec![0.0; n],
        energy: vec![0.0; n],
        aligned_mask: vec![false; n],
    }
}

/// Phoneme- and word-level z-scored prosody of one utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtteranceProsody {
    pub utterance_id: String,
    pub pitch: PhonemeValues,
    pub energy: PhonemeValues,
    pub word_pitch: WordValues,
    pub word_energy: WordValues,
}

/// z-normalize an utterance's frame features and pool them per phoneme and word.
pub fn aggregate_utterance(
    features: &FeatureRecord,
    utt: &Utterance,
    pitch_stats: &NormStats,
    energy_stats: &NormStats,
) -> Result<UtteranceProsody> {
    features.validate()?;
    let pitch = z_normalize(&features.pitch(), pitch_stats)?;
    let energy = z_normalize(&features.energy(), energy_stats)?;
    let pitch = phoneme_average(&pitch, &utt.durations)?;
    let energy = phoneme_average(&energy, &utt.durations)?;
    Ok(UtteranceProsody {
        utterance_id: utt.id.clone(),
        word_pitch: word_averages(&pitch, utt)?,
        word_energy: word_averages(&energy, utt)?,
        pitch,
        energy,
    })
}

// ---------------------------------------------------------------------------
// Model inputs

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputMode {
    /// Source and target phonemes concatenated; no SFV.
    Pho,
    /// SFV replaces the last two embedding dimensions.
    Emb,
    /// As `Emb`, and the SFV is also stacked onto the predictor input.
    Epi,
}

impl fmt::Display for InputMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InputMode::Pho => "pho",
            InputMode::Emb => "emb",
            InputMode::Epi => "epi",
        })
    }
}

impl FromStr for InputMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pho" => Ok(InputMode::Pho),
            "emb" => Ok(InputMode::Emb),
            "epi" => Ok(InputMode::Epi),
            other => Err(Error::Schema(format!("unknown input mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InjectionSite {
    EmbeddingTail,
    EmbeddingTailAndPredictorInput,
    None,
}

/// Merged phoneme vocabulary. Tokens are namespaced `label@language` so the
/// two languages' inventories never collide. Id 0 is reserved for padding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PhonemeVocab {
    tokens: Vec<String>,
    #[serde(skip)]
    index: BTreeMap<String, u32>,
}

pub const PAD_TOKEN: &str = "<pad>";

impl PhonemeVocab {
    pub fn token(label: &str, language: &str) -> String {
        format!("{label}@{language}")
    }

    /// Sorted vocabulary over every phoneme of every utterance.
    pub fn from_utterances<'a>(utts: impl IntoIterator<Item = &'a Utterance>) -> Self {
        let mut set = std::collections::BTreeSet::new();
        for u in utts {
            for p in &u.phonemes {
                set.insert(Self::token(p, &u.language));
            }
        }
        Self::from_tokens(std::iter::once(PAD_TOKEN.to_string()).chain(set)).expect("sorted tokens are unique")
    }

    /// Build from an explicit token list; position is the id.
    pub fn from_tokens(tokens: impl IntoIterator<Item = String>) -> Result<Self> {
        let tokens: Vec<String> = tokens.into_iter().collect();
        let mut index = BTreeMap::new();
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(Error::Schema(format!("duplicate vocabulary token {t:?}")));
            }
        }
        Ok(Self { tokens, index })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Doc {
            tokens: Vec<String>,
        }
        let doc: Doc = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        Self::from_tokens(doc.tokens)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("vocab serializes")
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, label: &str, language: &str) -> Result<u32> {
        let token = Self::token(label, language);
        self.index.get(&token).copied().ok_or(Error::VocabMiss(token))
    }

    pub fn ids(&self, utt: &Utterance) -> Result<Vec<u32>> {
        utt.phonemes.iter().map(|p| self.id(p, &utt.language)).collect()
    }
}

/// Tensor-boundary description of one synthesis input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelInputs {
    pub mode: InputMode,
    pub phoneme_ids: Vec<u32>,
    /// `[2][#phonemes]`: row 0 pitch, row 1 energy. Absent for `pho`.
    pub sfv_channels: Option<[Vec<f64>; 2]>,
    pub injection_site: InjectionSite,
}

pub fn build_model_inputs(
    mode: InputMode,
    src_utt: Option<&Utterance>,
    tgt_utt: &Utterance,
    sfv: Option<&SourceFeatureVector>,
    vocab: &PhonemeVocab,
) -> Result<ModelInputs> {
    match mode {
        InputMode::Pho => {
            let src = src_utt.ok_or_else(|| Error::MissingInput("pho mode needs the source utterance".into()))?;
            let mut phoneme_ids = vocab.ids(src)?;
            phoneme_ids.extend(vocab.ids(tgt_utt)?);
            Ok(ModelInputs { mode, phoneme_ids, sfv_channels: None, injection_site: InjectionSite::None })
        }
        InputMode::Emb | InputMode::Epi => {
            let sfv = sfv.ok_or_else(|| Error::MissingInput(format!("{mode} mode needs an SFV")))?;
            let n = tgt_utt.phonemes.len();
            if n == 0 {
                return Err(Error::LengthMismatch(format!("target {:?} has no phonemes", tgt_utt.id)));
            }
            if sfv.pitch.len() != n || sfv.energy.len() != n {
                return Err(Error::LengthMismatch(format!(
                    "sfv has {} pitch and {} energy values for {n} target phonemes",
                    sfv.pitch.len(),
                    sfv.energy.len()
                )));
            }
            let injection_site = if mode == InputMode::Emb {
                InjectionSite::EmbeddingTail
            } else {
                InjectionSite::EmbeddingTailAndPredictorInput
            };
            Ok(ModelInputs {
                mode,
                phoneme_ids: vocab.ids(tgt_utt)?,
                sfv_channels: Some([sfv.pitch.clone(), sfv.energy.clone()]),
                injection_site,
            })
        }
    }
}

// ---------------------------------------------------------------------------
// Addition transform

/// Add an SFV channel onto predictor outputs, elementwise.
pub fn apply_addition(predicted: &[f64], sfv_channel: &[f64]) -> Result<Vec<f64>> {
    if predicted.len() != sfv_channel.len() {
        return Err(Error::LengthMismatch(format!(
            "{} predicted values but {} sfv values",
            predicted.len(),
            sfv_channel.len()
        )));
    }
    // a zero addend leaves the prediction untouched, down to the sign of zero
    Ok(predicted.iter().zip(sfv_channel).map(|(&p, &s)| if s == 0.0 { p } else { p + s }).collect())
}

/// Per-phoneme pitch/energy predictor outputs (z-scores) for one utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictorOutputs {
    pub utterance_id: String,
    pub pitch: Vec<f64>,
    pub energy: Vec<f64>,
}

/// Apply the addition transform to both channels.
pub fn add_sfv(pred: &PredictorOutputs, sfv: &SourceFeatureVector) -> Result<PredictorOutputs> {
    Ok(PredictorOutputs {
        utterance_id: pred.utterance_id.clone(),
        pitch: apply_addition(&pred.pitch, &sfv.pitch)?,
        energy: apply_addition(&pred.energy, &sfv.energy)?,
    })
}
