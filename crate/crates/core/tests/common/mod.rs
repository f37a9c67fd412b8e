//! Brute-force reference implementations. None of these call into the
//! library's algorithm paths; they recompute each quantity from its definition.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use sfvkit::alignment::{Utterance, Word, WordAlignment};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn sine(hz: f64, sample_rate: u32, seconds: f64, amplitude: f64) -> Vec<f64> {
    let n = (sample_rate as f64 * seconds).round() as usize;
    (0..n).map(|i| amplitude * (2.0 * PI * hz * i as f64 / sample_rate as f64).sin()).collect()
}

// ---------------------------------------------------------------------------
// DFT

/// |X_k| for k = 0..=n/2 by direct summation, twiddles indexed mod n.
pub fn naive_dft_magnitudes(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let cos: Vec<f64> = (0..n).map(|i| (2.0 * PI * i as f64 / n as f64).cos()).collect();
    let sin: Vec<f64> = (0..n).map(|i| (2.0 * PI * i as f64 / n as f64).sin()).collect();
    (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, &v) in x.iter().enumerate() {
                let idx = (k * t) % n;
                re += v * cos[idx];
                im -= v * sin[idx];
            }
            (re * re + im * im).sqrt()
        })
        .collect()
}

/// Mirror index without repeating the edge sample, folding until in range.
fn mirror(mut i: i64, n: i64) -> usize {
    if n == 1 {
        return 0;
    }
    loop {
        if i < 0 {
            i = -i;
        } else if i >= n {
            i = 2 * (n - 1) - i;
        } else {
            return i as usize;
        }
    }
}

/// STFT magnitudes by definition: reflect-pad by n_fft/2, periodic Hann, naive DFT.
pub fn naive_stft(x: &[f64], n_fft: usize, hop: usize) -> Vec<Vec<f64>> {
    let pad = (n_fft / 2) as i64;
    let n = x.len() as i64;
    let padded: Vec<f64> = (-pad..n + pad).map(|i| x[mirror(i, n)]).collect();
    let window: Vec<f64> = (0..n_fft).map(|k| (PI * k as f64 / n_fft as f64).sin().powi(2)).collect();
    let frames = 1 + (padded.len() - n_fft) / hop;
    (0..frames)
        .map(|t| {
            let frame: Vec<f64> = (0..n_fft).map(|k| padded[t * hop + k] * window[k]).collect();
            naive_dft_magnitudes(&frame)
        })
        .collect()
}

/// Per-frame magnitude below which a DFT bin cannot be told apart from zero
/// in double precision: n_fft * eps * sum |windowed frame|.
pub fn dft_noise_floors(x: &[f64], n_fft: usize, hop: usize) -> Vec<f64> {
    let pad = (n_fft / 2) as i64;
    let n = x.len() as i64;
    let padded: Vec<f64> = (-pad..n + pad).map(|i| x[mirror(i, n)]).collect();
    let frames = 1 + (padded.len() - n_fft) / hop;
    (0..frames)
        .map(|t| {
            let l1: f64 = (0..n_fft).map(|k| (padded[t * hop + k] * (PI * k as f64 / n_fft as f64).sin().powi(2)).abs()).sum();
            n_fft as f64 * f64::EPSILON * l1
        })
        .collect()
}

/// Index of the largest DFT magnitude.
pub fn dft_peak_bin(x: &[f64]) -> usize {
    let mags = naive_dft_magnitudes(x);
    mags.iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap()
}

pub fn l2_rows(rows: &[Vec<f64>]) -> Vec<f64> {
    rows.iter()
        .map(|row| {
            let mut acc = 0.0;
            for v in row {
                acc += v * v;
            }
            acc.sqrt()
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Mel

/// Filter weight sums of a triangular mel bank, built from ln-form mel
/// (1127 ln(1 + f/700), numerically the same scale as 2595 log10).
pub fn mel_weight_sums(sample_rate: f64, n_fft: usize, bands: usize, fmin: f64, fmax: f64) -> Vec<f64> {
    let to_mel = |f: f64| 1127.0 * (f / 700.0).ln_1p();
    let to_hz = |m: f64| 700.0 * ((m / 1127.0).exp() - 1.0);
    let (lo, hi) = (to_mel(fmin), to_mel(fmax));
    let step = (hi - lo) / (bands + 1) as f64;
    (0..bands)
        .map(|m| {
            let left = to_hz(lo + step * m as f64);
            let center = to_hz(lo + step * (m + 1) as f64);
            let right = to_hz(lo + step * (m + 2) as f64);
            let mut total = 0.0;
            for k in 0..=n_fft / 2 {
                let f = k as f64 * sample_rate / n_fft as f64;
                let w = if f <= left || f >= right {
                    0.0
                } else if f <= center {
                    (f - left) / (center - left)
                } else {
                    (right - f) / (right - center)
                };
                total += w;
            }
            total
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Pitch

/// Frequency of the strongest autocorrelation peak in the admissible lag range,
/// refined by a parabola through the neighbouring lags.
pub fn autocorrelation_f0(x: &[f64], sample_rate: f64, fmin: f64, fmax: f64) -> f64 {
    let lo = (sample_rate / fmax).floor() as usize;
    let hi = (sample_rate / fmin).ceil() as usize;
    let ac = |lag: usize| -> f64 { (0..x.len() - lag).map(|i| x[i] * x[i + lag]).sum::<f64>() / (x.len() - lag) as f64 };
    let values: Vec<f64> = (lo - 1..=hi + 1).map(ac).collect();
    let mut best = 1;
    for i in 1..values.len() - 1 {
        // first local maximum that is nearly as strong as lag 0 wins
        if values[i] > values[i - 1] && values[i] >= values[i + 1] {
            if values[i] > 0.9 * ac(0) {
                best = i;
                break;
            }
            if values[i] > values[best] {
                best = i;
            }
        }
    }
    let (a, b, c) = (values[best - 1], values[best], values[best + 1]);
    let shift = 0.5 * (a - c) / (a - 2.0 * b + c);
    sample_rate / ((lo - 1 + best) as f64 + shift)
}

// ---------------------------------------------------------------------------
// DTW

/// Minimum weighted cost over every monotone path from (0,0) to (n-1,m-1),
/// enumerated recursively: diagonal steps cost 2d, others d, start cell d.
pub fn dtw_exhaustive(a: &[f64], b: &[f64], normalize: bool) -> f64 {
    fn walk(a: &[f64], b: &[f64], i: usize, j: usize, acc: f64, best: &mut f64) {
        if i == a.len() - 1 && j == b.len() - 1 {
            *best = best.min(acc);
            return;
        }
        if i + 1 < a.len() && j + 1 < b.len() {
            walk(a, b, i + 1, j + 1, acc + 2.0 * (a[i + 1] - b[j + 1]).abs(), best);
        }
        if i + 1 < a.len() {
            walk(a, b, i + 1, j, acc + (a[i + 1] - b[j]).abs(), best);
        }
        if j + 1 < b.len() {
            walk(a, b, i, j + 1, acc + (a[i] - b[j + 1]).abs(), best);
        }
    }
    let mut best = f64::INFINITY;
    walk(a, b, 0, 0, (a[0] - b[0]).abs(), &mut best);
    if normalize {
        best / (a.len() + b.len()) as f64
    } else {
        best
    }
}

/// Unnormalized DTW cost by memoized recursion from the end cell:
/// D(i,j) = min(D(i-1,j-1) + 2d, D(i-1,j) + d, D(i,j-1) + d), D(0,0) = d.
pub fn dtw_exhaustive_dp(a: &[f64], b: &[f64]) -> f64 {
    fn cost(a: &[f64], b: &[f64], i: usize, j: usize, memo: &mut Vec<Vec<Option<f64>>>) -> f64 {
        if let Some(v) = memo[i][j] {
            return v;
        }
        let d = (a[i] - b[j]).abs();
        let v = if i == 0 && j == 0 {
            d
        } else {
            let mut best = f64::INFINITY;
            if i > 0 && j > 0 {
                best = best.min(cost(a, b, i - 1, j - 1, memo) + 2.0 * d);
            }
            if i > 0 {
                best = best.min(cost(a, b, i - 1, j, memo) + d);
            }
            if j > 0 {
                best = best.min(cost(a, b, i, j - 1, memo) + d);
            }
            best
        };
        memo[i][j] = Some(v);
        v
    }
    let mut memo = vec![vec![None; b.len()]; a.len()];
    cost(a, b, a.len() - 1, b.len() - 1, &mut memo)
}

// ---------------------------------------------------------------------------
// SFV

/// Expected SFV by enumerating every (target word, linked source set) pair.
pub fn sfv_oracle(pitch: &[f64], energy: &[f64], links: &BTreeSet<(usize, usize)>, tgt: &Utterance) -> (Vec<f64>, Vec<f64>, Vec<bool>) {
    let n = tgt.phonemes.len();
    let mut p = vec![0.0; n];
    let mut e = vec![0.0; n];
    let mut mask = vec![false; n];
    for (w, word) in tgt.words.iter().enumerate() {
        let linked: Vec<usize> = (0..pitch.len()).filter(|s| links.contains(&(*s, w))).collect();
        if linked.is_empty() {
            continue;
        }
        let mut sp = 0.0;
        let mut se = 0.0;
        for &s in &linked {
            sp += pitch[s];
            se += energy[s];
        }
        for ph in word.span[0]..word.span[1] {
            p[ph] = sp / linked.len() as f64;
            e[ph] = se / linked.len() as f64;
            mask[ph] = true;
        }
    }
    (p, e, mask)
}

/// Random utterance: up to `max_words` words of 1-4 phonemes, with optional
/// silence phonemes between words.
pub fn random_utterance(rng: &mut ChaCha8Rng, id: &str, language: &str, max_words: usize) -> Utterance {
    let words = rng.gen_range(1..=max_words);
    let mut phonemes = Vec::new();
    let mut spans = Vec::new();
    for w in 0..words {
        if rng.gen_bool(0.3) {
            phonemes.push("sil".to_string());
        }
        let start = phonemes.len();
        for _ in 0..rng.gen_range(1..=4) {
            phonemes.push(format!("P{}", rng.gen_range(0..12)));
        }
        spans.push(Word { text: format!("w{w}"), span: [start, phonemes.len()] });
    }
    let durations = (0..phonemes.len()).map(|_| rng.gen_range(0..8)).collect();
    Utterance { id: id.into(), language: language.into(), phonemes, durations, words: spans }
}

pub fn random_alignment(rng: &mut ChaCha8Rng, n_src: usize, n_tgt: usize) -> WordAlignment {
    let density = rng.gen_range(0.0..0.5);
    let mut links = BTreeSet::new();
    for s in 0..n_src {
        for t in 0..n_tgt {
            if rng.gen_bool(density) {
                links.insert((s, t));
            }
        }
    }
    WordAlignment { links }
}

// ---------------------------------------------------------------------------
// Feature records

/// Synthetic per-utterance features: a wandering voiced f0 track with
/// unvoiced gaps and a positive energy track.
pub fn synthetic_record(rng: &mut ChaCha8Rng, id: &str, frames: usize) -> sfvkit::features::FeatureRecord {
    use sfvkit::audio::AnalysisConfig;
    use sfvkit::features::{EnergyContour, PitchContour};
    let mut f0 = Vec::with_capacity(frames);
    let mut voiced = Vec::with_capacity(frames);
    let mut hz = rng.gen_range(90.0..250.0);
    for i in 0..frames {
        hz = (hz + rng.gen_range(-8.0..8.0f64)).clamp(60.0, 500.0);
        let on = i == 0 || rng.gen_bool(0.8);
        f0.push(if on { hz } else { 0.0 });
        voiced.push(on);
    }
    let energy = (0..frames).map(|_| rng.gen_range(0.1..40.0)).collect();
    let cfg = AnalysisConfig::default();
    sfvkit::features::FeatureRecord::from_contours(
        id,
        &PitchContour { f0, voiced, config: cfg.clone(), normalized: false },
        &EnergyContour { energy, config: cfg, normalized: false },
    )
}

/// Population sigma, skewness and non-excess kurtosis by two-pass sums.
pub fn moments_oracle(x: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let m = |k: i32| x.iter().map(|v| (v - mean).powi(k)).sum::<f64>() / n;
    let (m2, m3, m4) = (m(2), m(3), m(4));
    (m2.sqrt(), m3 / m2.powf(1.5), m4 / (m2 * m2))
}
