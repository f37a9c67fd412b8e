mod common;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use sfvkit::alignment::{parse_sync_map, parse_utterance_record, parse_word_alignment, parse_word_alignment_file, Utterance, Word, WordAlignment};
use sfvkit::audio::AnalysisConfig;
use sfvkit::features::{fit_norm_stats, phoneme_average, z_normalize, EnergyContour, FeatureKind, PhonemeValues, PitchContour, ProsodyContour};
use sfvkit::sfv::{apply_addition, build_model_inputs, build_sfv, word_averages, zero_sfv, InjectionSite, InputMode, PhonemeVocab, WordValues};
use sfvkit::Error;

fn utt(id: &str, lang: &str, n: usize, spans: &[(usize, usize)]) -> Utterance {
    Utterance {
        id: id.into(),
        language: lang.into(),
        phonemes: (0..n).map(|i| format!("P{i}")).collect(),
        durations: vec![1; n],
        words: spans.iter().enumerate().map(|(i, &(s, e))| Word { text: format!("w{i}"), span: [s, e] }).collect(),
    }
}

fn pitch(f0: &[f64], voiced: &[bool]) -> PitchContour {
    PitchContour { f0: f0.to_vec(), voiced: voiced.to_vec(), config: AnalysisConfig::default(), normalized: false }
}

fn energy(values: &[f64]) -> EnergyContour {
    EnergyContour { energy: values.to_vec(), config: AnalysisConfig::default(), normalized: false }
}

#[test]
fn utterance_record_examples() {
    let doc = r#"{"id":"u1","language":"en","phonemes":["HH","AH0","L","OW1"],"durations":[3,2,4,6],"words":[{"text":"hello","span":[0,4]}]}"#;
    let u = parse_utterance_record(doc).unwrap();
    assert_eq!(u.num_frames(), 15);
    assert_eq!(parse_utterance_record(&u.to_json()).unwrap(), u);

    let overlap = r#"{"id":"u","language":"en","phonemes":["a","b","c","d","e"],"durations":[1,1,1,1,1],
        "words":[{"text":"x","span":[0,3]},{"text":"y","span":[2,5]}]}"#;
    assert!(matches!(parse_utterance_record(overlap), Err(Error::SpanOverlap { .. })));

    let counts = r#"{"id":"u","language":"en","phonemes":["a","b","c","d"],"durations":[1,1,1],"words":[]}"#;
    assert!(matches!(parse_utterance_record(counts), Err(Error::DurationCountMismatch { phonemes: 4, durations: 3 })));
}

#[test]
fn pharaoh_examples() {
    assert_eq!(parse_word_alignment("0-0 1-2 2-2").unwrap(), WordAlignment::new([(0, 0), (1, 2), (2, 2)]));
    assert!(parse_word_alignment("").unwrap().is_empty());
    assert!(matches!(parse_word_alignment("1-a"), Err(Error::Token(_))));
    assert!(matches!(parse_word_alignment("0-1-p"), Err(Error::Token(_))));
    let err = parse_word_alignment_file("0-0\n0-x\n").unwrap_err();
    assert!(err.to_string().contains("line 2"), "{err}");
}

#[test]
fn sync_map_examples() {
    let two = parse_sync_map(r#"{"fragments":[{"id":"f1","begin":0.0,"end":1.0,"text":"a"},{"id":"f2","begin":1.0,"end":2.5,"text":"b"}]}"#).unwrap();
    assert_eq!(two.len(), 2);
    assert!(!two.overlap_warning);
    assert!(matches!(
        parse_sync_map(r#"{"fragments":[{"id":"f","begin":2.0,"end":1.0,"text":""}]}"#),
        Err(Error::NegativeInterval { .. })
    ));
    let over = parse_sync_map(r#"{"fragments":[{"id":"a","begin":0,"end":2,"text":""},{"id":"b","begin":1.5,"end":3,"text":""}]}"#).unwrap();
    assert!(over.overlap_warning);
}

#[test]
fn normalization_examples() {
    let stats = fit_norm_stats(&[energy(&[1.0, 2.0, 3.0])]).unwrap();
    assert_eq!(stats.mean, 2.0);
    assert!((stats.std - 0.816497).abs() < 1e-6);

    let flat = fit_norm_stats(&[energy(&[5.0, 5.0, 5.0])]).unwrap();
    assert!(flat.is_degenerate());
    assert_eq!(z_normalize(&energy(&[5.0, 5.0, 5.0]), &flat).unwrap().energy, vec![0.0; 3]);

    let with_silent = fit_norm_stats(&[pitch(&[100.0, 300.0], &[true, true]), pitch(&[0.0, 0.0], &[false, false])]).unwrap();
    assert_eq!((with_silent.mean, with_silent.count), (200.0, 2));
    assert!(matches!(fit_norm_stats(&[pitch(&[0.0], &[false])]), Err(Error::NoValues(FeatureKind::Pitch))));

    let p = pitch(&[0.0, 220.0, 0.0], &[false, true, false]);
    let ps = sfvkit::features::NormStats { kind: FeatureKind::Pitch, mean: 220.0, std: 10.0, count: 1 };
    let z = z_normalize(&p, &ps).unwrap();
    assert_eq!(z.f0, vec![0.0, 0.0, 0.0]);
    assert_eq!(z.voiced, p.voiced);
    assert!(matches!(z_normalize(&energy(&[1.0]), &ps), Err(Error::KindMismatch { .. })));
}

#[test]
fn phoneme_average_examples() {
    let e = phoneme_average(&energy(&[1.0, 1.0, 2.0, 2.0]), &[2, 2]).unwrap();
    assert_eq!(e.values, vec![1.0, 2.0]);
    let p = phoneme_average(&pitch(&[1.0, 0.0, 3.0], &[true, false, true]), &[3]).unwrap();
    assert_eq!(p.values, vec![2.0]);
    assert!(matches!(
        phoneme_average(&energy(&[0.0; 5]), &[2, 2]),
        Err(Error::DurationMismatch { sum: 4, frames: 5 })
    ));
}

#[test]
fn word_average_examples() {
    let pv = PhonemeValues::from_durations(FeatureKind::Energy, true, vec![0.5, 0.5, -1.0], &[1, 1, 1]).unwrap();
    assert_eq!(word_averages(&pv, &utt("u", "en", 3, &[(0, 2), (2, 3)])).unwrap().values, vec![0.5, -1.0]);

    let pv = PhonemeValues::from_durations(FeatureKind::Energy, true, vec![1.0, 3.0], &[1, 3]).unwrap();
    assert_eq!(word_averages(&pv, &utt("u", "en", 2, &[(0, 2)])).unwrap().values, vec![2.5]);

    let mut silent = pitch(&[0.0; 4], &[false; 4]);
    silent.normalized = true;
    let pv = phoneme_average(&silent, &[2, 2]).unwrap();
    assert_eq!(word_averages(&pv, &utt("u", "en", 2, &[(0, 2)])).unwrap().values, vec![0.0]);
}

#[test]
fn sfv_examples() {
    let src_p = WordValues { kind: FeatureKind::Pitch, values: vec![0.5, -1.0] };
    let src_e = WordValues { kind: FeatureKind::Energy, values: vec![0.0, 0.0] };
    let tgt = utt("t", "de", 3, &[(0, 3)]);
    let sfv = build_sfv(&src_p, &src_e, &WordAlignment::new([(0, 0), (1, 0)]), &tgt).unwrap();
    assert_eq!(sfv.pitch, vec![-0.25; 3]);
    assert_eq!(sfv.aligned_mask, vec![true; 3]);

    let tgt = utt("t", "de", 5, &[(0, 2), (3, 5)]);
    let sfv = build_sfv(&src_p, &src_e, &WordAlignment::new([(1, 1)]), &tgt).unwrap();
    assert_eq!(sfv.pitch, vec![0.0, 0.0, 0.0, -1.0, -1.0]);
    assert_eq!(sfv.aligned_mask, vec![false, false, false, true, true]);

    let empty = build_sfv(&src_p, &src_e, &WordAlignment::default(), &tgt).unwrap();
    assert_eq!(empty, zero_sfv(&tgt));
    assert!(matches!(build_sfv(&src_p, &src_e, &WordAlignment::new([(2, 0)]), &tgt), Err(Error::IndexOutOfRange(_))));
    assert!(matches!(build_sfv(&src_p, &src_e, &WordAlignment::new([(0, 2)]), &tgt), Err(Error::IndexOutOfRange(_))));

    let seven = zero_sfv(&utt("t", "de", 7, &[]));
    assert_eq!((seven.pitch.clone(), seven.energy.clone()), (vec![0.0; 7], vec![0.0; 7]));
}

#[test]
fn model_input_examples() {
    let src = utt("s", "en", 5, &[(0, 5)]);
    let tgt = utt("t", "de", 8, &[(0, 8)]);
    let vocab = PhonemeVocab::from_utterances([&src, &tgt]);
    let pho = build_model_inputs(InputMode::Pho, Some(&src), &tgt, None, &vocab).unwrap();
    assert_eq!(pho.phoneme_ids.len(), 13);
    assert_eq!(pho.phoneme_ids[..5], vocab.ids(&src).unwrap()[..]);
    assert_eq!(pho.injection_site, InjectionSite::None);
    assert!(pho.sfv_channels.is_none());

    let two = utt("t2", "de", 2, &[(0, 2)]);
    let mut sfv = zero_sfv(&two);
    sfv.pitch = vec![0.0, -0.25];
    sfv.energy = vec![0.1, 0.0];
    let emb = build_model_inputs(InputMode::Emb, None, &two, Some(&sfv), &vocab).unwrap();
    assert_eq!(emb.sfv_channels, Some([vec![0.0, -0.25], vec![0.1, 0.0]]));
    assert_eq!(emb.injection_site, InjectionSite::EmbeddingTail);

    let none = utt("t0", "de", 0, &[]);
    assert!(matches!(
        build_model_inputs(InputMode::Epi, None, &none, Some(&zero_sfv(&none)), &vocab),
        Err(Error::LengthMismatch(_))
    ));
    let foreign = utt("x", "fr", 1, &[]);
    assert!(matches!(
        build_model_inputs(InputMode::Pho, Some(&foreign), &tgt, None, &vocab),
        Err(Error::VocabMiss(_))
    ));
}

#[test]
fn addition_examples() {
    let out = apply_addition(&[0.1, 0.2], &[0.0, -0.5]).unwrap();
    assert!((out[0] - 0.1).abs() < 1e-15 && (out[1] + 0.3).abs() < 1e-15);
    assert!(matches!(apply_addition(&[0.0; 3], &[0.0; 4]), Err(Error::LengthMismatch(_))));
}

fn finite() -> impl Strategy<Value = f64> {
    -1e3f64..1e3
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn z_normalized_pool_is_standard(values in prop::collection::vec(finite(), 2..200)) {
        let c = energy(&values);
        let stats = fit_norm_stats(std::slice::from_ref(&c)).unwrap();
        prop_assume!(!stats.is_degenerate());
        let z = z_normalize(&c, &stats).unwrap().energy;
        let n = z.len() as f64;
        let mean = z.iter().sum::<f64>() / n;
        let std = (z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        prop_assert!(mean.abs() <= 1e-9, "mean {}", mean);
        prop_assert!((std - 1.0).abs() <= 1e-9, "std {}", std);
    }

    #[test]
    fn phoneme_average_recovers_global_voiced_mean(
        frames in prop::collection::vec((finite(), any::<bool>()), 1..80),
        cuts in prop::collection::vec(0usize..80, 0..10),
    ) {
        let f0: Vec<f64> = frames.iter().map(|&(v, on)| if on { v } else { 0.0 }).collect();
        let voiced: Vec<bool> = frames.iter().map(|f| f.1).collect();
        prop_assume!(voiced.iter().any(|&v| v));
        let n = f0.len();
        let mut bounds: Vec<usize> = cuts.into_iter().map(|c| c % (n + 1)).chain([0, n]).collect();
        bounds.sort();
        let durations: Vec<i64> = bounds.windows(2).map(|w| (w[1] - w[0]) as i64).collect();
        let pv = phoneme_average(&pitch(&f0, &voiced), &durations).unwrap();
        let weighted: f64 = pv.values.iter().zip(&pv.support).map(|(v, &s)| v * s as f64).sum();
        let total: u64 = pv.support.iter().sum();
        let direct: Vec<f64> = f0.iter().zip(&voiced).filter(|p| *p.1).map(|p| *p.0).collect();
        let expected = direct.iter().sum::<f64>() / direct.len() as f64;
        prop_assert!((weighted / total as f64 - expected).abs() <= 1e-9);
    }

    #[test]
    fn pharaoh_is_order_independent_and_round_trips(links in prop::collection::vec((0usize..30, 0usize..30), 0..20), seed in any::<u64>()) {
        let mut tokens: Vec<String> = links.iter().map(|(s, t)| format!("{s}-{t}")).collect();
        let forward = parse_word_alignment(&tokens.join(" ")).unwrap();
        tokens.shuffle(&mut common::rng(seed));
        prop_assert_eq!(&parse_word_alignment(&tokens.join("  ")).unwrap(), &forward);
        prop_assert_eq!(parse_word_alignment(&forward.to_string()).unwrap(), forward);
    }

    #[test]
    fn utterance_round_trip(seed in any::<u64>()) {
        let u = common::random_utterance(&mut common::rng(seed), "u", "en", 8);
        let parsed = parse_utterance_record(&u.to_json()).unwrap();
        prop_assert_eq!(&parsed, &u);
        let mut end = 0;
        for w in &parsed.words {
            prop_assert!(w.start() >= end && w.start() < w.end() && w.end() <= parsed.phonemes.len());
            end = w.end();
        }
    }

    #[test]
    fn sync_map_round_trip(times in prop::collection::vec((0u32..100_000, 1u32..10_000), 0..12)) {
        let mut entries = Vec::new();
        for (i, (b, len)) in times.iter().enumerate() {
            let begin = *b as f64 / 1000.0;
            entries.push(format!(r#"{{"id":"f{i}","begin":{begin:?},"end":{:?},"text":"t {i}"}}"#, begin + *len as f64 / 1000.0));
        }
        let map = parse_sync_map(&format!(r#"{{"fragments":[{}]}}"#, entries.join(","))).unwrap();
        prop_assert_eq!(parse_sync_map(&map.to_json()).unwrap(), map);
    }

    #[test]
    fn unaligned_sfv_positions_are_zero(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let src = common::random_utterance(&mut rng, "s", "en", 10);
        let tgt = common::random_utterance(&mut rng, "t", "de", 10);
        let align = common::random_alignment(&mut rng, src.words.len(), tgt.words.len());
        let vals: Vec<f64> = (0..src.words.len()).map(|i| i as f64 - 1.5).collect();
        let sfv = build_sfv(
            &WordValues { kind: FeatureKind::Pitch, values: vals.clone() },
            &WordValues { kind: FeatureKind::Energy, values: vals },
            &align,
            &tgt,
        ).unwrap();
        prop_assert!(sfv.validate().is_ok());
        for i in 0..sfv.len() {
            if !sfv.aligned_mask[i] {
                prop_assert!(sfv.pitch[i] == 0.0 && sfv.energy[i] == 0.0);
            }
        }
    }
}

#[test]
fn contour_kinds() {
    assert_eq!(<PitchContour as ProsodyContour>::KIND, FeatureKind::Pitch);
    assert_eq!(<EnergyContour as ProsodyContour>::KIND, FeatureKind::Energy);
}
