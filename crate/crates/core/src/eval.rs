//! Evaluation of generated speech against ground truth: pitch moments,
//! DTW pitch distance and energy MAE, rendered as a comparison table.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{EnergyContour, FeatureRecord, PitchContour};
use crate::numeric::compensated_sum;

/// Moments of a pooled voiced-F0 distribution. Kurtosis is non-excess.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PitchMoments {
    pub sigma: f64,
    pub gamma: f64,
    pub kappa: f64,
}

/// Population std, skewness `m3 / m2^1.5` and kurtosis `m4 / m2^2`.
pub fn pitch_moments(pooled_f0: &[f64]) -> Result<PitchMoments> {
    if pooled_f0.len() < 2 {
        return Err(Error::InsufficientData(format!("{} pitch values, need at least 2", pooled_f0.len())));
    }
    let n = pooled_f0.len() as f64;
    let mean = compensated_sum(pooled_f0.iter().copied()) / n;
    let central = |p: i32| compensated_sum(pooled_f0.iter().map(|&x| (x - mean).powi(p))) / n;
    let (m2, m3, m4) = (central(2), central(3), central(4));
    if m2 <= 0.0 {
        return Err(Error::InsufficientData("pitch values have zero variance".into()));
    }
    Ok(PitchMoments { sigma: m2.sqrt(), gamma: m3 / m2.powf(1.5), kappa: m4 / (m2 * m2) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DtwNormalization {
    /// Accumulated cost divided by `len(a) + len(b)`.
    #[default]
    PathLength,
    /// Raw accumulated cost.
    None,
}

impl FromStr for DtwNormalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "path-length" | "normalized" => Ok(Self::PathLength),
            "none" | "raw" => Ok(Self::None),
            other => Err(Error::Schema(format!("unknown dtw normalization {other:?}"))),
        }
    }
}

/// DTW with local cost `|a_i - b_j|` and the symmetric step pattern: diagonal
/// steps weigh 2, horizontal and vertical steps weigh 1, the first cell 1.
pub fn dtw_distance(a: &[f64], b: &[f64], norm: DtwNormalization) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySequence);
    }
    let m = b.len();
    let mut prev = vec![0.0; m];
    let mut cur = vec![0.0; m];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            let d = (x - y).abs();
            cur[j] = match (i, j) {
                (0, 0) => d,
                (0, _) => cur[j - 1] + d,
                (_, 0) => prev[0] + d,
                _ => (prev[j - 1] + 2.0 * d).min(prev[j] + d).min(cur[j - 1] + d),
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let total = prev[m - 1];
    Ok(match norm {
        DtwNormalization::PathLength => total / (a.len() + m) as f64,
        DtwNormalization::None => total,
    })
}

/// DTW between the voiced frames of two pitch contours.
pub fn dtw_pitch_distance(a: &PitchContour, b: &PitchContour, norm: DtwNormalization) -> Result<f64> {
    let a: Vec<f64> = a.voiced_values().collect();
    let b: Vec<f64> = b.voiced_values().collect();
    dtw_distance(&a, &b, norm)
}

/// Mean absolute frame difference. Equal frame counts are required, which
/// holds when generation was driven by ground-truth durations.
pub fn energy_mae(gt: &EnergyContour, gen: &EnergyContour) -> Result<f64> {
    mean_absolute_error(&gt.energy, &gen.energy)
}

pub fn mean_absolute_error(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(format!("{} vs {} energy frames", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::EmptySequence);
    }
    Ok(compensated_sum(a.iter().zip(b).map(|(x, y)| (x - y).abs())) / a.len() as f64)
}

// ---------------------------------------------------------------------------
// Corpus evaluation

pub const GROUND_TRUTH: &str = "GT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub system: String,
    pub mos: Option<f64>,
    pub pitch_moments: PitchMoments,
    /// Absent on the ground-truth row.
    pub pitch_dtw: Option<f64>,
    /// Absent on the ground-truth row.
    pub energy_mae: Option<f64>,
}

/// Ground truth first, then systems in lexicographic order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    pub fn ground_truth(&self) -> &EvalRow {
        &self.rows[0]
    }

    pub fn system(&self, name: &str) -> Option<&EvalRow> {
        self.rows.iter().skip(1).find(|r| r.system == name)
    }

    /// Attach precomputed MOS scores by row name.
    pub fn with_mos(mut self, scores: &BTreeMap<String, f64>) -> Self {
        for row in &mut self.rows {
            if let Some(&s) = scores.get(&row.system) {
                row.mos = Some(s);
            }
        }
        self
    }
}

/// Per-utterance failure found while evaluating a system.
#[derive(Debug, Clone, PartialEq)]
pub struct UtteranceFailure {
    pub system: String,
    pub utterance: String,
    pub error: Error,
}

pub type UtteranceSet = BTreeMap<String, FeatureRecord>;

fn pooled_moments(set: &UtteranceSet, name: &str) -> Result<PitchMoments> {
    let pooled: Vec<f64> = set.values().flat_map(|r| r.pitch().voiced_values().collect::<Vec<_>>()).collect();
    pitch_moments(&pooled).map_err(|e| match e {
        Error::InsufficientData(m) => Error::InsufficientData(format!("{name}: {m}")),
        other => other,
    })
}

fn score_utterance(gt: &FeatureRecord, gen: &FeatureRecord, norm: DtwNormalization) -> Result<(f64, f64)> {
    let dtw = dtw_pitch_distance(&gt.pitch(), &gen.pitch(), norm)?;
    let mae = energy_mae(&gt.energy(), &gen.energy())?;
    Ok((dtw, mae))
}

/// Evaluate every system, collecting per-utterance failures instead of
/// stopping at the first. Failed utterances are left out of the averages.
/// Errors that invalidate a whole row (empty system, no pitch to pool) are
/// still returned as `Err`.
pub fn evaluate_corpus_collect(
    gt_set: &UtteranceSet,
    gen_sets: &BTreeMap<String, UtteranceSet>,
    norm: DtwNormalization,
) -> Result<(EvalReport, Vec<UtteranceFailure>)> {
    let mut rows = vec![EvalRow {
        system: GROUND_TRUTH.to_string(),
        mos: None,
        pitch_moments: pooled_moments(gt_set, GROUND_TRUTH)?,
        pitch_dtw: None,
        energy_mae: None,
    }];
    let mut failures = Vec::new();

    for (system, gen) in gen_sets {
        if gen.is_empty() {
            return Err(Error::EmptySystem(system.clone()));
        }
        let missing = |utterance: &String| UtteranceFailure {
            system: system.clone(),
            utterance: utterance.clone(),
            error: Error::MissingUtterance { system: system.clone(), utterance: utterance.clone() },
        };
        failures.extend(gen.keys().filter(|id| !gt_set.contains_key(*id)).map(missing));
        failures.extend(gt_set.keys().filter(|id| !gen.contains_key(*id)).map(missing));

        let paired: Vec<(&String, &FeatureRecord, &FeatureRecord)> =
            gen.iter().filter_map(|(id, g)| gt_set.get(id).map(|t| (id, t, g))).collect();
        let scored: Vec<(&String, Result<(f64, f64)>)> =
            paired.par_iter().map(|&(id, t, g)| (id, score_utterance(t, g, norm))).collect();

        let mut dtws = Vec::with_capacity(scored.len());
        let mut maes = Vec::with_capacity(scored.len());
        for (id, result) in scored {
            match result {
                Ok((d, m)) => {
                    dtws.push(d);
                    maes.push(m);
                }
                Err(error) => failures.push(UtteranceFailure { system: system.clone(), utterance: id.clone(), error }),
            }
        }
        let mean = |v: &[f64]| (!v.is_empty()).then(|| compensated_sum(v.iter().copied()) / v.len() as f64);
        rows.push(EvalRow {
            system: system.clone(),
            mos: None,
            pitch_moments: pooled_moments(gen, system)?,
            pitch_dtw: mean(&dtws),
            energy_mae: mean(&maes),
        });
    }
    Ok((EvalReport { rows }, failures))
}

/// Strict evaluation: any unmatched or unscorable utterance is an error.
pub fn evaluate_corpus(gt_set: &UtteranceSet, gen_sets: &BTreeMap<String, UtteranceSet>, norm: DtwNormalization) -> Result<EvalReport> {
    let (report, failures) = evaluate_corpus_collect(gt_set, gen_sets, norm)?;
    match failures.into_iter().next() {
        Some(f) => Err(f.error),
        None => Ok(report),
    }
}

// ---------------------------------------------------------------------------
// Rendering

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Tsv,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tsv" => Ok(Self::Tsv),
            "markdown" | "md" => Ok(Self::Markdown),
            other => Err(Error::Schema(format!("unknown report format {other:?}"))),
        }
    }
}

fn fmt3(v: f64) -> String {
    let s = format!("{v:.3}");
    // "-0.000" reads as a sign error in a table
    if s.trim_start_matches('-').bytes().all(|b| b == b'0' || b == b'.') {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(fmt3).unwrap_or_else(|| "-".to_string())
}

/// Render the report as TSV or a markdown table, three decimals throughout.
/// A MOS column appears only when some row carries a score.
pub fn render_report(report: &EvalReport, format: ReportFormat) -> String {
    let with_mos = report.rows.iter().any(|r| r.mos.is_some());
    let mut header = vec!["system"];
    if with_mos {
        header.push("MOS");
    }
    header.extend(["Pitch σ", "Pitch γ", "Pitch κ", "Pitch DTW", "Energy MAE"]);

    let body: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            let mut cells = vec![r.system.clone()];
            if with_mos {
                cells.push(cell(r.mos));
            }
            cells.extend([
                fmt3(r.pitch_moments.sigma),
                fmt3(r.pitch_moments.gamma),
                fmt3(r.pitch_moments.kappa),
                cell(r.pitch_dtw),
                cell(r.energy_mae),
            ]);
            cells
        })
        .collect();

    let mut out = String::new();
    match format {
        ReportFormat::Tsv => {
            out.push_str(&header.join("\t"));
            out.push('\n');
            for row in &body {
                out.push_str(&row.join("\t"));
                out.push('\n');
            }
        }
        ReportFormat::Markdown => {
            let _ = writeln!(out, "| {} |", header.join(" | "));
            let _ = writeln!(out, "|{}", "---|".repeat(header.len()));
            for row in &body {
                let _ = writeln!(out, "| {} |", row.join(" | "));
            }
            out.push_str("\nκ is non-excess kurtosis (m4/m2²).\n");
        }
    }
    out
}
