//! Audio decoding, resampling and spectral analysis.
//!
//! All analysis uses center-padded frames: frame `t` is centered on sample
//! `t * hop_length` of the original signal, so a signal of `n` samples yields
//! `n / hop_length + 1` frames. Pitch extraction shares this framing.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mono waveform with samples in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidConfig("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidConfig(format!("non-finite sample at index {i}")));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

fn default_sample_rate() -> u32 {
    22050
}
fn default_hop() -> usize {
    256
}
fn default_frame() -> usize {
    1024
}
fn default_mel_bands() -> usize {
    80
}
fn default_pitch_floor() -> f64 {
    50.0
}
fn default_pitch_ceiling() -> f64 {
    600.0
}
fn default_voicing_threshold() -> f64 {
    0.15
}

/// Framing, mel and pitch-search parameters shared by every analysis step.
///
/// `fmax` of `None` means the Nyquist frequency of `sample_rate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default = "default_sample_rate")]
    pub sample_rate: u32,
    #[serde(default = "default_hop")]
    pub hop_length: usize,
    #[serde(default = "default_frame")]
    pub frame_length: usize,
    #[serde(default = "default_mel_bands")]
    pub mel_bands: usize,
    #[serde(default)]
    pub fmin: f64,
    #[serde(default)]
    pub fmax: Option<f64>,
    #[serde(default = "default_pitch_floor")]
    pub pitch_floor: f64,
    #[serde(default = "default_pitch_ceiling")]
    pub pitch_ceiling: f64,
    /// Cumulative-mean-normalized difference below which a frame is voiced.
    #[serde(default = "default_voicing_threshold")]
    pub voicing_threshold: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            sample_rate: default_sample_rate(),
            hop_length: default_hop(),
            frame_length: default_frame(),
            mel_bands: default_mel_bands(),
            fmin: 0.0,
            fmax: None,
            pitch_floor: default_pitch_floor(),
            pitch_ceiling: default_pitch_ceiling(),
            voicing_threshold: default_voicing_threshold(),
        }
    }
}

impl AnalysisConfig {
    pub fn fmax_hz(&self) -> f64 {
        self.fmax.unwrap_or(self.sample_rate as f64 / 2.0)
    }

    pub fn num_bins(&self) -> usize {
        self.frame_length / 2 + 1
    }

    pub fn num_frames(&self, num_samples: usize) -> usize {
        num_samples / self.hop_length + 1
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.sample_rate == 0 {
            return bad("sample_rate must be positive".into());
        }
        if self.hop_length == 0 || self.frame_length == 0 {
            return bad("hop_length and frame_length must be positive".into());
        }
        if self.hop_length > self.frame_length {
            return bad(format!(
                "hop_length {} exceeds frame_length {}",
                self.hop_length, self.frame_length
            ));
        }
        if self.mel_bands == 0 {
            return bad("mel_bands must be positive".into());
        }
        let nyquist = self.sample_rate as f64 / 2.0;
        let fmax = self.fmax_hz();
        if !(self.fmin >= 0.0 && self.fmin < fmax && fmax <= nyquist) {
            return bad(format!("need 0 <= fmin < fmax <= {nyquist}, got fmin {} fmax {fmax}", self.fmin));
        }
        if !(self.pitch_floor > 0.0 && self.pitch_floor < self.pitch_ceiling) {
            return bad(format!(
                "need 0 < pitch_floor < pitch_ceiling, got {} and {}",
                self.pitch_floor, self.pitch_ceiling
            ));
        }
        if !(self.voicing_threshold > 0.0 && self.voicing_threshold.is_finite()) {
            return bad("voicing_threshold must be positive".into());
        }
        Ok(())
    }
}

/// STFT magnitudes, `[num_frames][frame_length / 2 + 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrogramFrames {
    pub magnitudes: Vec<Vec<f64>>,
    pub config: AnalysisConfig,
}

impl SpectrogramFrames {
    pub fn num_frames(&self) -> usize {
        self.magnitudes.len()
    }
}

/// Mel-band magnitudes, `[num_frames][mel_bands]`. No log compression.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    pub values: Vec<Vec<f64>>,
    pub config: AnalysisConfig,
}

// ---------------------------------------------------------------------------
// WAV

const WAVE_FORMAT_PCM: u16 = 1;
const WAVE_FORMAT_EXTENSIBLE: u16 = 0xFFFE;

fn read_u16(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn read_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

/// Decode a RIFF/WAVE file holding 16-bit PCM. Channels are averaged.
pub fn decode_wav(bytes: &[u8]) -> Result<AudioBuffer> {
    if bytes.len() < 12 {
        return Err(Error::MalformedHeader(format!("{} bytes is too short for a RIFF header", bytes.len())));
    }
    if &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::MalformedHeader("missing RIFF/WAVE magic".into()));
    }

    let mut fmt: Option<(u16, u16, u32, u16)> = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = read_u32(bytes, pos + 4) as usize;
        let body_start = pos + 8;
        let available = bytes.len() - body_start;
        match id {
            b"fmt " => {
                if size < 16 || available < 16 {
                    return Err(Error::MalformedHeader("fmt chunk shorter than 16 bytes".into()));
                }
                let b = &bytes[body_start..];
                let mut format = read_u16(b, 0);
                let channels = read_u16(b, 2);
                let rate = read_u32(b, 4);
                let bits = read_u16(b, 14);
                if format == WAVE_FORMAT_EXTENSIBLE {
                    // cbSize(2) validBits(2) channelMask(4) then the subformat GUID,
                    // whose first two bytes carry the format tag.
                    if size < 40 || available < 26 {
                        return Err(Error::MalformedHeader("truncated extensible fmt chunk".into()));
                    }
                    format = read_u16(b, 24);
                }
                fmt = Some((format, channels, rate, bits));
            }
            b"data" => {
                // Streaming writers leave the size unset; take what is present.
                let len = size.min(available);
                data = Some(&bytes[body_start..body_start + len]);
            }
            _ => {}
        }
        if data.is_some() && fmt.is_some() {
            break;
        }
        pos = body_start.saturating_add(size).saturating_add(size & 1);
    }

    let (format, channels, rate, bits) =
        fmt.ok_or_else(|| Error::MalformedHeader("no fmt chunk".into()))?;
    let data = data.ok_or_else(|| Error::MalformedHeader("no data chunk".into()))?;
    if format != WAVE_FORMAT_PCM {
        return Err(Error::UnsupportedEncoding(format!("format tag {format}, expected PCM")));
    }
    if bits != 16 {
        return Err(Error::UnsupportedEncoding(format!("{bits}-bit samples, expected 16")));
    }
    if channels == 0 {
        return Err(Error::MalformedHeader("zero channels".into()));
    }
    if rate == 0 {
        return Err(Error::MalformedHeader("zero sample rate".into()));
    }

    let channels = channels as usize;
    let frame_bytes = 2 * channels;
    let samples = data
        .chunks_exact(frame_bytes)
        .map(|frame| {
            let sum: i64 = frame
                .chunks_exact(2)
                .map(|s| i16::from_le_bytes([s[0], s[1]]) as i64)
                .sum();
            if channels == 1 {
                sum as f64 / 32768.0
            } else {
                sum as f64 / channels as f64 / 32768.0
            }
        })
        .collect();
    Ok(AudioBuffer { samples, sample_rate: rate })
}

/// Encode a mono buffer as 16-bit PCM WAV. Samples are clamped and rounded.
pub fn encode_wav(buf: &AudioBuffer) -> Vec<u8> {
    let data_len = buf.samples.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&WAVE_FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&buf.sample_rate.to_le_bytes());
    out.extend_from_slice(&(buf.sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in &buf.samples {
        let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

// ---------------------------------------------------------------------------
// Resampling

const SINC_ZERO_CROSSINGS: f64 = 16.0;
const SINC_ROLLOFF: f64 = 0.97;
const MAX_TABLE_PHASES: u64 = 4096;

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = PI * x;
        px.sin() / px
    }
}

fn blackman(x: f64) -> f64 {
    // x in [-1, 1]
    if x.abs() >= 1.0 {
        return 0.0;
    }
    let t = PI * (x + 1.0);
    0.42 - 0.5 * t.cos() + 0.08 * (2.0 * t).cos()
}

/// Polyphase windowed-sinc resampler for a fixed rational ratio.
struct SincResampler {
    up: u64,
    down: u64,
    cutoff: f64,
    half_width: f64,
    /// Taps per side; offsets `-(taps-1)..=taps` around the base index.
    taps: i64,
    table: Option<Vec<Vec<f64>>>,
}

impl SincResampler {
    fn new(src: u32, dst: u32) -> Self {
        let g = gcd(src as u64, dst as u64);
        let up = dst as u64 / g;
        let down = src as u64 / g;
        let cutoff = (dst as f64 / src as f64).min(1.0) * SINC_ROLLOFF;
        let half_width = SINC_ZERO_CROSSINGS / cutoff;
        let taps = half_width.ceil() as i64;
        let mut r = Self { up, down, cutoff, half_width, taps, table: None };
        if up <= MAX_TABLE_PHASES {
            let table = (0..up).map(|p| r.phase_coefficients(p)).collect();
            r.table = Some(table);
        }
        r
    }

    fn kernel(&self, t: f64) -> f64 {
        self.cutoff * sinc(self.cutoff * t) * blackman(t / self.half_width)
    }

    fn phase_coefficients(&self, phase: u64) -> Vec<f64> {
        let frac = phase as f64 / self.up as f64;
        (-(self.taps - 1)..=self.taps)
            .map(|j| self.kernel(frac - j as f64))
            .collect()
    }

    fn process(&self, input: &[f64], out_len: usize) -> Vec<f64> {
        let n = input.len() as i64;
        let mut out = Vec::with_capacity(out_len);
        let mut scratch;
        for i in 0..out_len as u64 {
            let num = i * self.down;
            let base = (num / self.up) as i64;
            let phase = num % self.up;
            let coeffs: &[f64] = match &self.table {
                Some(t) => &t[phase as usize],
                None => {
                    scratch = self.phase_coefficients(phase);
                    &scratch
                }
            };
            let mut acc = 0.0;
            for (c, j) in coeffs.iter().zip(-(self.taps - 1)..=self.taps) {
                let k = base + j;
                if (0..n).contains(&k) {
                    acc += c * input[k as usize];
                }
            }
            out.push(acc);
        }
        out
    }
}

/// Band-limited sample-rate conversion. Identity (bit-exact) when the rates match.
pub fn resample(buf: &AudioBuffer, target_rate: u32) -> Result<AudioBuffer> {
    if target_rate == 0 {
        return Err(Error::InvalidConfig("target rate must be positive".into()));
    }
    if target_rate == buf.sample_rate {
        return Ok(buf.clone());
    }
    let src = buf.sample_rate as u128;
    let dst = target_rate as u128;
    let out_len = ((buf.samples.len() as u128 * dst + src / 2) / src) as usize;
    if buf.samples.is_empty() {
        return Ok(AudioBuffer { samples: Vec::new(), sample_rate: target_rate });
    }
    let r = SincResampler::new(buf.sample_rate, target_rate);
    Ok(AudioBuffer { samples: r.process(&buf.samples, out_len), sample_rate: target_rate })
}

// ---------------------------------------------------------------------------
// Framing and STFT

/// Map an index into the reflect-padded signal back onto `0..n`
/// (numpy `reflect` semantics, repeated for pads wider than the signal).
pub(crate) fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let mut m = i.rem_euclid(period);
    if m >= n as isize {
        m = period - m;
    }
    m as usize
}

/// Samples of the frame centered on `center`, reflect-padded at both ends.
pub(crate) fn centered_frame(samples: &[f64], center: usize, frame_length: usize, out: &mut Vec<f64>) {
    out.clear();
    let start = center as isize - (frame_length / 2) as isize;
    let n = samples.len();
    out.extend((0..frame_length as isize).map(|k| samples[reflect_index(start + k, n)]));
}

/// Periodic Hann window.
pub fn hann_window(len: usize) -> Vec<f64> {
    (0..len)
        .map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / len as f64).cos())
        .collect()
}

fn check_rate(buf: &AudioBuffer, cfg: &AnalysisConfig) -> Result<()> {
    if buf.sample_rate != cfg.sample_rate {
        return Err(Error::SampleRateMismatch { expected: cfg.sample_rate, actual: buf.sample_rate });
    }
    Ok(())
}

/// Hann-windowed, reflect-centered STFT magnitudes.
pub fn stft_magnitudes(buf: &AudioBuffer, cfg: &AnalysisConfig) -> Result<SpectrogramFrames> {
    cfg.validate()?;
    check_rate(buf, cfg)?;
    if buf.is_empty() {
        return Err(Error::EmptySignal);
    }
    let n_fft = cfg.frame_length;
    let window = hann_window(n_fft);
    let fft: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_forward(n_fft);
    let mut frame = Vec::with_capacity(n_fft);
    let mut spectrum = vec![Complex::new(0.0, 0.0); n_fft];
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];

    let magnitudes = (0..cfg.num_frames(buf.len()))
        .map(|t| {
            centered_frame(&buf.samples, t * cfg.hop_length, n_fft, &mut frame);
            for ((dst, &x), &w) in spectrum.iter_mut().zip(&frame).zip(&window) {
                *dst = Complex::new(x * w, 0.0);
            }
            fft.process_with_scratch(&mut spectrum, &mut scratch);
            spectrum[..cfg.num_bins()].iter().map(|c| c.norm()).collect()
        })
        .collect();
    Ok(SpectrogramFrames { magnitudes, config: cfg.clone() })
}

// ---------------------------------------------------------------------------
// Mel

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular HTK-mel filterbank, `[mel_bands][num_bins]`, unit peak height.
pub fn mel_filterbank(cfg: &AnalysisConfig) -> Vec<Vec<f64>> {
    let bins = cfg.num_bins();
    let bin_hz = cfg.sample_rate as f64 / cfg.frame_length as f64;
    let lo = hz_to_mel(cfg.fmin);
    let hi = hz_to_mel(cfg.fmax_hz());
    let edges: Vec<f64> = (0..cfg.mel_bands + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (cfg.mel_bands + 1) as f64))
        .collect();
    edges
        .windows(3)
        .map(|e| {
            let (left, center, right) = (e[0], e[1], e[2]);
            (0..bins)
                .map(|k| {
                    let f = k as f64 * bin_hz;
                    let rise = (f - left) / (center - left);
                    let fall = (right - f) / (right - center);
                    rise.min(fall).max(0.0)
                })
                .collect()
        })
        .collect()
}

/// Project STFT magnitudes onto the mel filterbank.
pub fn mel_spectrogram(spec: &SpectrogramFrames) -> MelSpectrogram {
    let bank = mel_filterbank(&spec.config);
    let values = spec
        .magnitudes
        .iter()
        .map(|row| {
            bank.iter()
                .map(|filter| filter.iter().zip(row).map(|(w, m)| w * m).sum())
                .collect()
        })
        .collect();
    MelSpectrogram { values, config: spec.config.clone() }
}
