//! Frame-level pitch and energy, corpus z-normalization, and phoneme pooling.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::audio::{centered_frame, stft_magnitudes, AnalysisConfig, AudioBuffer, SpectrogramFrames};
use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, CompensatedSum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Pitch,
    Energy,
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureKind::Pitch => "pitch",
            FeatureKind::Energy => "energy",
        })
    }
}

/// Per-frame F0 in Hz (or z-scores once normalized). Unvoiced frames hold 0.
#[derive(Debug, Clone, PartialEq)]
pub struct PitchContour {
    pub f0: Vec<f64>,
    pub voiced: Vec<bool>,
    pub config: AnalysisConfig,
    pub normalized: bool,
}

impl PitchContour {
    pub fn voiced_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.f0.iter().zip(&self.voiced).filter(|(_, &v)| v).map(|(&f, _)| f)
    }

    pub fn voiced_fraction(&self) -> f64 {
        if self.voiced.is_empty() {
            return 0.0;
        }
        self.voiced.iter().filter(|&&v| v).count() as f64 / self.voiced.len() as f64
    }
}

/// Per-frame L2 norm of the STFT magnitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyContour {
    pub energy: Vec<f64>,
    pub config: AnalysisConfig,
    pub normalized: bool,
}

/// Common view over pitch and energy contours for pooling and normalization.
pub trait ProsodyContour: Clone {
    const KIND: FeatureKind;

    fn num_frames(&self) -> usize;

    /// The frame's value, or `None` where the frame is undefined (unvoiced pitch).
    fn frame_value(&self, i: usize) -> Option<f64>;

    /// Replace every defined value with `f(value)`; undefined frames are untouched.
    fn map_defined(&self, f: impl Fn(f64) -> f64) -> Self;

    fn is_normalized(&self) -> bool;

    fn mark_normalized(&mut self);

    fn defined_values(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.num_frames()).filter_map(|i| self.frame_value(i))
    }
}

impl ProsodyContour for PitchContour {
    const KIND: FeatureKind = FeatureKind::Pitch;

    fn num_frames(&self) -> usize {
        self.f0.len()
    }

    fn frame_value(&self, i: usize) -> Option<f64> {
        self.voiced[i].then(|| self.f0[i])
    }

    fn map_defined(&self, f: impl Fn(f64) -> f64) -> Self {
        let f0 = self
            .f0
            .iter()
            .zip(&self.voiced)
            .map(|(&x, &v)| if v { f(x) } else { 0.0 })
            .collect();
        Self { f0, voiced: self.voiced.clone(), config: self.config.clone(), normalized: self.normalized }
    }

    fn is_normalized(&self) -> bool {
        self.normalized
    }

    fn mark_normalized(&mut self) {
        self.normalized = true;
    }
}

impl ProsodyContour for EnergyContour {
    const KIND: FeatureKind = FeatureKind::Energy;

    fn num_frames(&self) -> usize {
        self.energy.len()
    }

    fn frame_value(&self, i: usize) -> Option<f64> {
        Some(self.energy[i])
    }

    fn map_defined(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            energy: self.energy.iter().map(|&x| f(x)).collect(),
            config: self.config.clone(),
            normalized: self.normalized,
        }
    }

    fn is_normalized(&self) -> bool {
        self.normalized
    }

    fn mark_normalized(&mut self) {
        self.normalized = true;
    }
}

/// Corpus-level z-normalization statistics (population std).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub kind: FeatureKind,
    pub mean: f64,
    pub std: f64,
    pub count: u64,
}

impl NormStats {
    /// True when every pooled value was identical, so z-scores collapse to 0.
    pub fn is_degenerate(&self) -> bool {
        self.std == 0.0
    }
}

/// One value per phoneme, plus how many frames contributed to each.
///
/// `support[p]` is the number of frames averaged for phoneme `p`: its
/// duration for energy, its voiced-frame count for pitch. Word-level pooling
/// weights by support, which makes it equal to averaging the frames directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhonemeValues {
    pub kind: FeatureKind,
    pub normalized: bool,
    pub values: Vec<f64>,
    pub support: Vec<u64>,
}

impl PhonemeValues {
    /// Build from per-phoneme values where every frame of each phoneme counted.
    pub fn from_durations(kind: FeatureKind, normalized: bool, values: Vec<f64>, durations: &[i64]) -> Result<Self> {
        if values.len() != durations.len() {
            return Err(Error::LengthMismatch(format!(
                "{} phoneme values but {} durations",
                values.len(),
                durations.len()
            )));
        }
        let support = durations
            .iter()
            .enumerate()
            .map(|(index, &d)| u64::try_from(d).map_err(|_| Error::NegativeDuration { index, value: d }))
            .collect::<Result<_>>()?;
        Ok(Self { kind, normalized, values, support })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

// ---------------------------------------------------------------------------
// Extraction

/// Result of the YIN search on one frame: `Some(f0)` when voiced.
fn yin_frame(frame: &[f64], sample_rate: f64, min_tau: usize, max_tau: usize, threshold: f64, diff: &mut Vec<f64>, cmnd: &mut Vec<f64>) -> Option<f64> {
    let window = frame.len() - max_tau;
    diff.clear();
    diff.push(0.0);
    for tau in 1..=max_tau {
        let d: f64 = frame[..window]
            .iter()
            .zip(&frame[tau..tau + window])
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        diff.push(d);
    }

    cmnd.clear();
    cmnd.push(1.0);
    let mut running = 0.0;
    for (tau, &d) in diff.iter().enumerate().skip(1) {
        running += d;
        cmnd.push(if running > 0.0 { d * tau as f64 / running } else { 1.0 });
    }

    let mut tau = (min_tau..=max_tau).find(|&t| cmnd[t] < threshold)?;
    while tau < max_tau && cmnd[tau + 1] < cmnd[tau] {
        tau += 1;
    }

    let refined = if tau > 1 && tau < max_tau {
        let (a, b, c) = (cmnd[tau - 1], cmnd[tau], cmnd[tau + 1]);
        let denom = a - 2.0 * b + c;
        if denom.abs() > f64::EPSILON {
            tau as f64 + 0.5 * (a - c) / denom
        } else {
            tau as f64
        }
    } else {
        tau as f64
    };
    Some(sample_rate / refined)
}

/// YIN pitch tracking on the STFT frame grid.
///
/// Frames whose normalized difference never dips below the voicing threshold,
/// or whose estimate falls outside `[pitch_floor, pitch_ceiling]`, are unvoiced.
pub fn extract_pitch(buf: &AudioBuffer, cfg: &AnalysisConfig) -> Result<PitchContour> {
    cfg.validate()?;
    if buf.sample_rate != cfg.sample_rate {
        return Err(Error::SampleRateMismatch { expected: cfg.sample_rate, actual: buf.sample_rate });
    }
    if buf.is_empty() {
        return Err(Error::EmptySignal);
    }
    let sr = cfg.sample_rate as f64;
    let max_tau = ((sr / cfg.pitch_floor).ceil() as usize).min(cfg.frame_length / 2);
    let min_tau = ((sr / cfg.pitch_ceiling).floor() as usize).max(2);
    if min_tau >= max_tau {
        return Err(Error::InvalidConfig(format!(
            "pitch range [{}, {}] Hz does not fit a {}-sample frame",
            cfg.pitch_floor, cfg.pitch_ceiling, cfg.frame_length
        )));
    }

    let frames = cfg.num_frames(buf.len());
    let mut f0 = Vec::with_capacity(frames);
    let mut voiced = Vec::with_capacity(frames);
    let (mut frame, mut diff, mut cmnd) = (Vec::new(), Vec::new(), Vec::new());
    for t in 0..frames {
        centered_frame(&buf.samples, t * cfg.hop_length, cfg.frame_length, &mut frame);
        match yin_frame(&frame, sr, min_tau, max_tau, cfg.voicing_threshold, &mut diff, &mut cmnd) {
            Some(hz) if hz >= cfg.pitch_floor && hz <= cfg.pitch_ceiling => {
                f0.push(hz);
                voiced.push(true);
            }
            _ => {
                f0.push(0.0);
                voiced.push(false);
            }
        }
    }
    Ok(PitchContour { f0, voiced, config: cfg.clone(), normalized: false })
}

/// Euclidean norm of each magnitude row.
pub fn extract_energy(spec: &SpectrogramFrames) -> EnergyContour {
    let energy = spec
        .magnitudes
        .iter()
        .map(|row| row.iter().map(|m| m * m).sum::<f64>().sqrt())
        .collect();
    EnergyContour { energy, config: spec.config.clone(), normalized: false }
}

// ---------------------------------------------------------------------------
// Normalization

/// Pool every defined frame (voiced only, for pitch) and fit mean/std.
pub fn fit_norm_stats<C: ProsodyContour>(contours: &[C]) -> Result<NormStats> {
    let mut count = 0u64;
    let mut sum = CompensatedSum::new();
    for c in contours {
        for v in c.defined_values() {
            sum.add(v);
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::NoValues(C::KIND));
    }
    let mean = sum.value() / count as f64;
    let sq = compensated_sum(contours.iter().flat_map(|c| c.defined_values()).map(|v| (v - mean) * (v - mean)));
    let std = (sq / count as f64).sqrt();
    // Constant pools can leave a rounding residue; snap them to exact zero.
    let std = if contours.iter().flat_map(|c| c.defined_values()).all(|v| v == mean) { 0.0 } else { std };
    Ok(NormStats { kind: C::KIND, mean, std, count })
}

/// `(v - mean) / std` on defined frames; undefined pitch frames stay 0 and unvoiced.
pub fn z_normalize<C: ProsodyContour>(contour: &C, stats: &NormStats) -> Result<C> {
    if stats.kind != C::KIND {
        return Err(Error::KindMismatch { stats: stats.kind, contour: C::KIND });
    }
    let (mean, std) = (stats.mean, stats.std);
    let mut out = if stats.is_degenerate() {
        contour.map_defined(|_| 0.0)
    } else {
        contour.map_defined(|v| (v - mean) / std)
    };
    out.mark_normalized();
    Ok(out)
}

/// Mean of the contour over each phoneme's frame span (voiced frames only for pitch).
pub fn phoneme_average<C: ProsodyContour>(contour: &C, durations: &[i64]) -> Result<PhonemeValues> {
    if let Some((index, &value)) = durations.iter().enumerate().find(|(_, &d)| d < 0) {
        return Err(Error::NegativeDuration { index, value });
    }
    let sum: i64 = durations.iter().sum();
    if sum != contour.num_frames() as i64 {
        return Err(Error::DurationMismatch { sum, frames: contour.num_frames() });
    }
    let mut values = Vec::with_capacity(durations.len());
    let mut support = Vec::with_capacity(durations.len());
    let mut start = 0usize;
    for &d in durations {
        let end = start + d as usize;
        let acc: CompensatedSum = (start..end).filter_map(|i| contour.frame_value(i)).collect();
        let n = (start..end).filter(|&i| contour.frame_value(i).is_some()).count() as u64;
        values.push(if n == 0 { 0.0 } else { acc.value() / n as f64 });
        support.push(n);
        start = end;
    }
    Ok(PhonemeValues { kind: C::KIND, normalized: contour.is_normalized(), values, support })
}

// ---------------------------------------------------------------------------
// Feature files

/// On-disk per-utterance feature record.
///
/// ```json
/// {"utterance_id": "u1", "normalized": false, "config": {...},
///  "f0": [0.0, 221.3], "voiced": [false, true], "energy": [0.1, 4.2]}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureRecord {
    pub utterance_id: String,
    #[serde(default)]
    pub normalized: bool,
    pub config: AnalysisConfig,
    pub f0: Vec<f64>,
    pub voiced: Vec<bool>,
    pub energy: Vec<f64>,
}

impl FeatureRecord {
    pub fn from_contours(utterance_id: impl Into<String>, pitch: &PitchContour, energy: &EnergyContour) -> Self {
        Self {
            utterance_id: utterance_id.into(),
            normalized: pitch.normalized && energy.normalized,
            config: pitch.config.clone(),
            f0: pitch.f0.clone(),
            voiced: pitch.voiced.clone(),
            energy: energy.energy.clone(),
        }
    }

    /// Check internal consistency after deserializing.
    pub fn validate(&self) -> Result<()> {
        if self.f0.len() != self.voiced.len() || self.f0.len() != self.energy.len() {
            return Err(Error::Schema(format!(
                "feature record {:?}: f0 {}, voiced {}, energy {} frames",
                self.utterance_id,
                self.f0.len(),
                self.voiced.len(),
                self.energy.len()
            )));
        }
        let values = self.f0.iter().chain(&self.energy);
        if values.clone().any(|v| !v.is_finite()) {
            return Err(Error::Schema(format!("feature record {:?} has non-finite values", self.utterance_id)));
        }
        if self.f0.iter().zip(&self.voiced).any(|(&f, &v)| !v && f != 0.0) {
            return Err(Error::Schema(format!("feature record {:?}: unvoiced frame with nonzero f0", self.utterance_id)));
        }
        Ok(())
    }

    pub fn pitch(&self) -> PitchContour {
        PitchContour {
            f0: self.f0.clone(),
            voiced: self.voiced.clone(),
            config: self.config.clone(),
            normalized: self.normalized,
        }
    }

    pub fn energy(&self) -> EnergyContour {
        EnergyContour { energy: self.energy.clone(), config: self.config.clone(), normalized: self.normalized }
    }

    pub fn num_frames(&self) -> usize {
        self.f0.len()
    }
}

/// Full analysis of one utterance: STFT, energy and pitch on a shared frame grid.
pub fn analyze(utterance_id: &str, buf: &AudioBuffer, cfg: &AnalysisConfig) -> Result<FeatureRecord> {
    let spec = stft_magnitudes(buf, cfg)?;
    let energy = extract_energy(&spec);
    let pitch = extract_pitch(buf, cfg)?;
    Ok(FeatureRecord::from_contours(utterance_id, &pitch, &energy))
}
