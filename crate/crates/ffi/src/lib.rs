//! C ABI for sfvkit.
//!
//! Every fallible function returns `SFVKIT_OK` (0) or a nonzero error code and
//! writes results through out-pointers. The message for the most recent error
//! on the calling thread is available from [`sfvkit_last_error_message`].
//!
//! Handles (`SfvkitFeatures`, `SfvkitSfv`) are opaque; release them with their
//! `_free` function. Strings returned to the caller are released with
//! [`sfvkit_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sfvkit::alignment::{parse_utterance_record, parse_word_alignment};
use sfvkit::audio::{decode_wav, resample, AnalysisConfig};
use sfvkit::eval::{dtw_distance, mean_absolute_error, pitch_moments, DtwNormalization};
use sfvkit::features::{analyze, FeatureRecord};
use sfvkit::sfv::{apply_addition, build_sfv, zero_sfv, SourceFeatureVector, UtteranceProsody};
use sfvkit::Error;

pub const SFVKIT_OK: i32 = 0;
/// A required pointer argument was null.
pub const SFVKIT_ERR_NULL_POINTER: i32 = -1;
/// A string argument was not valid UTF-8.
pub const SFVKIT_ERR_INVALID_UTF8: i32 = -2;
/// An internal panic was caught at the boundary.
pub const SFVKIT_ERR_PANIC: i32 = -3;
/// A channel selector other than pitch or energy.
pub const SFVKIT_ERR_INVALID_ARGUMENT: i32 = -4;

pub const SFVKIT_ERR_MALFORMED_HEADER: i32 = 10;
pub const SFVKIT_ERR_UNSUPPORTED_ENCODING: i32 = 11;
pub const SFVKIT_ERR_EMPTY_SIGNAL: i32 = 12;
pub const SFVKIT_ERR_INVALID_CONFIG: i32 = 13;
pub const SFVKIT_ERR_SAMPLE_RATE_MISMATCH: i32 = 14;
pub const SFVKIT_ERR_NO_VALUES: i32 = 20;
pub const SFVKIT_ERR_KIND_MISMATCH: i32 = 21;
pub const SFVKIT_ERR_DURATION_MISMATCH: i32 = 22;
pub const SFVKIT_ERR_NEGATIVE_DURATION: i32 = 23;
pub const SFVKIT_ERR_SCHEMA: i32 = 30;
pub const SFVKIT_ERR_SPAN_OVERLAP: i32 = 31;
pub const SFVKIT_ERR_DURATION_COUNT_MISMATCH: i32 = 32;
pub const SFVKIT_ERR_TOKEN: i32 = 33;
pub const SFVKIT_ERR_NEGATIVE_INTERVAL: i32 = 34;
pub const SFVKIT_ERR_LENGTH_MISMATCH: i32 = 40;
pub const SFVKIT_ERR_INDEX_OUT_OF_RANGE: i32 = 41;
pub const SFVKIT_ERR_VOCAB_MISS: i32 = 42;
pub const SFVKIT_ERR_MISSING_INPUT: i32 = 43;
pub const SFVKIT_ERR_INSUFFICIENT_DATA: i32 = 50;
pub const SFVKIT_ERR_EMPTY_SEQUENCE: i32 = 51;
pub const SFVKIT_ERR_MISSING_UTTERANCE: i32 = 52;
pub const SFVKIT_ERR_EMPTY_SYSTEM: i32 = 53;
pub const SFVKIT_ERR_OUT_OF_RANGE: i32 = 60;
pub const SFVKIT_ERR_MISSING_TRANSCRIPT: i32 = 61;
pub const SFVKIT_ERR_BAD_SPEC: i32 = 62;
pub const SFVKIT_ERR_DUPLICATE_ID: i32 = 63;
pub const SFVKIT_ERR_IO: i32 = 70;

pub const SFVKIT_CHANNEL_PITCH: u32 = 0;
pub const SFVKIT_CHANNEL_ENERGY: u32 = 1;

/// Frame-level pitch and energy of one utterance.
pub struct SfvkitFeatures(FeatureRecord);

/// Per-target-phoneme source feature vector.
pub struct SfvkitSfv(SourceFeatureVector);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SfvkitPitchMoments {
    pub sigma: f64,
    pub gamma: f64,
    /// Non-excess kurtosis, m4 / m2^2.
    pub kappa: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(i32);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        set_last_error(e.to_string());
        Failure(e.code())
    }
}

fn fail(code: i32, message: &str) -> Failure {
    set_last_error(message.to_string());
    Failure(code)
}

/// Run `body` and turn its outcome, including panics, into a status code.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> i32 {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => SFVKIT_OK,
        Ok(Err(Failure(code))) => code,
        Err(_) => {
            set_last_error("internal panic".into());
            SFVKIT_ERR_PANIC
        }
    }
}

unsafe fn input_slice<'a, T>(data: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(fail(SFVKIT_ERR_NULL_POINTER, &format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

unsafe fn input_str<'a>(s: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(fail(SFVKIT_ERR_NULL_POINTER, &format!("{name} is null")));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(SFVKIT_ERR_INVALID_UTF8, &format!("{name} is not valid UTF-8")))
}

unsafe fn output<'a, T>(out: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    out.as_mut().ok_or_else(|| fail(SFVKIT_ERR_NULL_POINTER, &format!("{name} is null")))
}

unsafe fn handle<'a, T>(h: *const T) -> Result<&'a T, Failure> {
    h.as_ref().ok_or_else(|| fail(SFVKIT_ERR_NULL_POINTER, "handle is null"))
}

unsafe fn copy_out(values: &[f64], buf: *mut f64, len: usize) -> Result<(), Failure> {
    if len != values.len() {
        return Err(Error::LengthMismatch(format!("buffer holds {len} values, channel has {}", values.len())).into());
    }
    if len > 0 {
        if buf.is_null() {
            return Err(fail(SFVKIT_ERR_NULL_POINTER, "buffer is null"));
        }
        ptr::copy_nonoverlapping(values.as_ptr(), buf, len);
    }
    Ok(())
}

fn json_string<T: serde::Serialize>(value: &T) -> Result<*mut c_char, Failure> {
    let text = serde_json::to_string(value).map_err(|e| Error::Schema(e.to_string()))?;
    Ok(CString::new(text).expect("JSON has no interior nul").into_raw())
}

fn channel_of<'a>(pitch: &'a [f64], energy: &'a [f64], channel: u32) -> Result<&'a [f64], Failure> {
    match channel {
        SFVKIT_CHANNEL_PITCH => Ok(pitch),
        SFVKIT_CHANNEL_ENERGY => Ok(energy),
        other => Err(fail(SFVKIT_ERR_INVALID_ARGUMENT, &format!("unknown channel {other}"))),
    }
}

// ---------------------------------------------------------------------------
// Errors and strings

/// Copy of the last error message on this thread, or null if there is none.
/// Free the result with `sfvkit_string_free`.
#[no_mangle]
pub extern "C" fn sfvkit_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null_mut(), |m| m.clone().into_raw()))
}

/// # Safety
/// `s` must be null or a string returned by this library, freed only once.
#[no_mangle]
pub unsafe extern "C" fn sfvkit_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// ---------------------------------------------------------------------------
// Features

/// Decode a PCM-16 WAV image, resample to the analysis rate and extract
/// pitch and energy. `config_json` may be null for the default analysis
/// settings (22050 Hz, hop 256, frame 1024).
///
/// # Safety
/// `wav` must point to `len` readable bytes; strings must be nul-terminated;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sfvkit_features_from_wav(
    wav: *const u8,
    len: usize,
    utterance_id: *const c_char,
    config_json: *const c_char,
    out: *mut *mut SfvkitFeatures,
) -> i32 {
    guard(|| {
        let out = output(out, "out")?;
        let bytes = input_slice(wav, len, "wav")?;
        let id = input_str(utterance_id, "utterance_id")?;
        let cfg: AnalysisConfig = if config_json.is_null() {
            AnalysisConfig::default()
        } else {
            serde_json::from_str(input_str(config_json, "config_json")?).map_err(|e| Error::InvalidConfig(e.to_string()))?
        };
        cfg.validate()?;
        let mut buf = decode_wav(bytes)?;
        if buf.sample_rate != cfg.sample_rate {
            buf = resample(&buf, cfg.sample_rate)?;
        }
        *out = Box::into_raw(Box::new(SfvkitFeatures(analyze(id, &buf, &cfg)?)));
        Ok(())
    })
}

/// Load a feature record from its JSON form.
///
/// # Safety
/// `json` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sfvkit_features_from_json(json: *const c_char, out: *mut *mut SfvkitFeatures) -> i32 {
    guard(|| {
        let out = output(out, "out")?;
        let record: FeatureRecord = serde_json::from_str(input_str(json, "json")?).map_err(|e| Error::Schema(e.to_string()))?;
        record.validate()?;
        *out = Box::into_raw(Box::new(SfvkitFeatures(record)));
        Ok(())
    })
}

/// # Safety
/// `h` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sfvkit_features_to_json(h: *const SfvkitFeatures, out: *mut *mut c_char) -> i32 {
    guard(|| {
        let out = output(out, "out")?;
        *out = json_string(&handle(h)?.0)?;
        Ok(())
    })
}

/// # Safety
/// `h` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sfvkit_features_num_frames(h: *const SfvkitFeatures, out: *mut usize) -> i32 {
    guard(|| {
        *output(out, "out")? = handle(h)?.0.num_frames();
        Ok(())
    })
}

/// Copy one channel (f0 in Hz with 0 for unvoiced frames, or energy) into
/// `buf`, which must hold exactly `num_frames` values.
///
/// # Safety
/// `h` must be a live handle; `buf` must be writable for `len` values.
#[no_mangle]
pub unsafe extern "C" fn sfvkit_features_copy_channel(h: *const SfvkitFeatures, channel: u32, buf: *mut f64, len: usize) -> i32 {
    guard(|| {
        let rec = &handle(h)?.0;
        copy_out(channel_of(&rec.f0, &rec.energy, channel)?, buf, len)
    })
}

/// # Safety
/// `h` must be null or a handle from this library, freed only once.
#[no_mangle]
pub unsafe extern "C" fn sfvkit_features_free(h: *mut SfvkitFeatures) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

// ---------------------------------------------------------------------------
// Source feature vectors

/// Build an SFV from the source utterance's aggregated prosody (JSON written by
/// `sfvkit aggregate`), one pharaoh alignment line, and the target utterance
/// record (JSON).
///
/// # Safety
/// Strings must be nul-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sfvkit_sfv_build(
    source_prosody_json: *const c_char,
    pharaoh: *const c_char,
    target_utterance_json: *const c_char,
    out: *mut *mut SfvkitSfv,
) -> i32 {
    guard(|| {
        let out = output(out, "out")?;
        let src: UtteranceProsody =
            serde_json::from_str(input_str(source_prosody_json, "source_prosody_json")?).map_err(|e| Error::Schema(e.to_string()))?;
        let align = parse_word_alignment(input_str(pharaoh, "pharaoh")?)?;
        let tgt = parse_utterance_record(input_str(target_utterance_json, "target_utterance_json")?)?;
        let sfv = build_sfv(&src.word_pitch, &src.word_energy, &align, &tgt)?;
        *out = Box::into_raw(Box::new(SfvkitSfv(sfv)));
        Ok(())
    })
}

/// All-zero SFV for the target utterance.
///
/// # Safety
/// `target_utterance_json` must be nul-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sfvkit_sfv_zero(target_utterance_json: *const c_char, out: *mut *mut SfvkitSfv) -> i32 {
    guard(|| {
        let out = output(out, "out")?;
        let tgt = parse_utterance_record(input_str(target_utterance_json, "target_utterance_json")?)?;
        *out = Box::into_raw(Box::new(SfvkitSfv(zero_sfv(&tgt))));
        Ok(())
    })
}

/// Number of target phonemes.
///
/// # Safety
/// `h` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sfvkit_sfv_len(h: *const SfvkitSfv, out: *mut usize) -> i32 {
    guard(|| {
        *output(out, "out")? = handle(h)?.0.len();
        Ok(())
    })
}

/// # Safety
/// `h` must be a live handle; `buf` must be writable for `len` values.
#[no_mangle]
pub unsafe extern "C" fn sfvkit_sfv_copy_channel(h: *const SfvkitSfv, channel: u32, buf: *mut f64, len: usize) -> i32 {
    guard(|| {
        let sfv = &handle(h)?.0;
        copy_out(channel_of(&sfv.pitch, &sfv.energy, channel)?, buf, len)
    })
}

/// # Safety
/// `h` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sfvkit_sfv_to_json(h: *const SfvkitSfv, out: *mut *mut c_char) -> i32 {
    guard(|| {
        let out = output(out, "out")?;
        *out = json_string(&handle(h)?.0)?;
        Ok(())
    })
}

/// # Safety
/// `h` must be null or a handle from this library, freed only once.
#[no_mangle]
pub unsafe extern "C" fn sfvkit_sfv_free(h: *mut SfvkitSfv) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

// ---------------------------------------------------------------------------
// Numeric kernels

/// DTW distance with local cost |a_i - b_j| and the symmetric step pattern.
/// A nonzero `normalize` divides by `len_a + len_b`.
///
/// # Safety
/// `a` and `b` must be readable for their lengths; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sfvkit_dtw_distance(a: *const f64, len_a: usize, b: *const f64, len_b: usize, normalize: i32, out: *mut f64) -> i32 {
    guard(|| {
        let out = output(out, "out")?;
        let norm = if normalize != 0 { DtwNormalization::PathLength } else { DtwNormalization::None };
        *out = dtw_distance(input_slice(a, len_a, "a")?, input_slice(b, len_b, "b")?, norm)?;
        Ok(())
    })
}

/// Mean absolute error between two equally long contours.
///
/// # Safety
/// `a` and `b` must be readable for `len` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sfvkit_mean_absolute_error(a: *const f64, b: *const f64, len: usize, out: *mut f64) -> i32 {
    guard(|| {
        let out = output(out, "out")?;
        *out = mean_absolute_error(input_slice(a, len, "a")?, input_slice(b, len, "b")?)?;
        Ok(())
    })
}

/// Population sigma, skewness and non-excess kurtosis of pooled voiced f0.
///
/// # Safety
/// `values` must be readable for `len` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sfvkit_pitch_moments(values: *const f64, len: usize, out: *mut SfvkitPitchMoments) -> i32 {
    guard(|| {
        let out = output(out, "out")?;
        let m = pitch_moments(input_slice(values, len, "values")?)?;
        *out = SfvkitPitchMoments { sigma: m.sigma, gamma: m.gamma, kappa: m.kappa };
        Ok(())
    })
}

/// `out[i] = predicted[i] + sfv[i]`. `out` may alias `predicted`.
///
/// # Safety
/// `predicted` and `sfv` must be readable and `out` writable for `len` values.
#[no_mangle]
pub unsafe extern "C" fn sfvkit_apply_addition(predicted: *const f64, sfv: *const f64, len: usize, out: *mut f64) -> i32 {
    guard(|| {
        let sum = apply_addition(input_slice(predicted, len, "predicted")?, input_slice(sfv, len, "sfv")?)?;
        if len > 0 {
            if out.is_null() {
                return Err(fail(SFVKIT_ERR_NULL_POINTER, "out is null"));
            }
            ptr::copy_nonoverlapping(sum.as_ptr(), out, len);
        }
        Ok(())
    })
}
