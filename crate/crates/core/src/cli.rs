//! `sfvkit` command line.
//!
//! Exit codes: 0 on full success, 1 when any record failed (each failure is
//! listed on stderr), 2 on usage or configuration errors.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::alignment::{parse_sync_map, parse_utterance_record, parse_word_alignment_file, Utterance};
use crate::audio::{decode_wav, encode_wav, resample, AnalysisConfig};
use crate::config::ToolConfig;
use crate::corpus::{
    corpus_stats, duration_filter, render_stats_table, segment_audio, split_manifest, CorpusStats, Manifest,
    ManifestRecord, SplitCounts, SplitSidecar, SplitSizes, SplitSpec,
};
use crate::error::{Error, Result};
use crate::eval::{evaluate_corpus_collect, render_report, DtwNormalization, ReportFormat, UtteranceSet};
use crate::features::{analyze, fit_norm_stats, FeatureRecord, NormStats};
use crate::sfv::{
    add_sfv, aggregate_utterance, build_model_inputs, build_sfv, zero_sfv, InputMode, PhonemeVocab,
    PredictorOutputs, SourceFeatureVector, UtteranceProsody,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RECORD_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

pub const PITCH_STATS_FILE: &str = "pitch_stats.json";
pub const ENERGY_STATS_FILE: &str = "energy_stats.json";
pub const VOCAB_FILE: &str = "vocab.json";

#[derive(Debug, Parser)]
#[command(name = "sfvkit", version, about = "Prosody features, source feature vectors and evaluation for speech-to-speech corpora")]
pub struct Cli {
    /// TOML config file; falls back to $SFVKIT_CONFIG, then built-in defaults
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker threads for batch work; output order never depends on this
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decode WAV files and write per-utterance pitch/energy feature records
    Extract(ExtractArgs),
    /// Fit corpus z-normalization statistics from feature records
    StatsFit(StatsFitArgs),
    /// Normalize features and pool them per phoneme and per word
    Aggregate(AggregateArgs),
    /// Map source word prosody onto target phonemes
    BuildSfv(BuildSfvArgs),
    /// Emit model-input layouts (pho, emb, epi)
    ModelInputs(ModelInputsArgs),
    /// Add SFVs onto pitch/energy predictor outputs
    ApplyAddition(ApplyAdditionArgs),
    /// Compare generated features with ground truth and print a report
    Evaluate(EvaluateArgs),
    /// Dataset tooling: segmentation, filtering, statistics, splits
    #[command(subcommand)]
    Corpus(CorpusCommand),
}

/// Overrides for the `[analysis]` config block.
#[derive(Debug, Args, Default)]
pub struct AnalysisArgs {
    /// Target sample rate in Hz
    #[arg(long)]
    pub sample_rate: Option<u32>,
    /// Hop between frames, in samples
    #[arg(long)]
    pub hop_length: Option<usize>,
    /// Analysis frame (FFT) length, in samples
    #[arg(long)]
    pub frame_length: Option<usize>,
    /// Lowest admissible F0 in Hz
    #[arg(long)]
    pub pitch_floor: Option<f64>,
    /// Highest admissible F0 in Hz
    #[arg(long)]
    pub pitch_ceiling: Option<f64>,
}

impl AnalysisArgs {
    fn apply(&self, mut cfg: AnalysisConfig) -> Result<AnalysisConfig> {
        if let Some(v) = self.sample_rate {
            cfg.sample_rate = v;
        }
        if let Some(v) = self.hop_length {
            cfg.hop_length = v;
        }
        if let Some(v) = self.frame_length {
            cfg.frame_length = v;
        }
        if let Some(v) = self.pitch_floor {
            cfg.pitch_floor = v;
        }
        if let Some(v) = self.pitch_ceiling {
            cfg.pitch_ceiling = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// WAV files; the utterance id is the file stem
    #[arg(long, num_args = 1.., value_name = "FILE")]
    pub wav: Vec<PathBuf>,
    /// Manifest TSV; relative audio paths resolve against its directory
    #[arg(long, value_name = "TSV")]
    pub manifest: Option<PathBuf>,
    /// Output directory for `<id>.json` feature records [default: paths.features_dir or ./features]
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    #[command(flatten)]
    pub analysis: AnalysisArgs,
}

#[derive(Debug, Args)]
pub struct StatsFitArgs {
    /// Directory of feature records [default: paths.features_dir]
    #[arg(long, value_name = "DIR")]
    pub features: Option<PathBuf>,
    /// Only pool utterances listed in this manifest (e.g. the training split)
    #[arg(long, value_name = "TSV")]
    pub manifest: Option<PathBuf>,
    /// Output directory for pitch_stats.json and energy_stats.json
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    /// Directory of feature records [default: paths.features_dir]
    #[arg(long, value_name = "DIR")]
    pub features: Option<PathBuf>,
    /// Directory of utterance alignment records (`<id>.json`)
    #[arg(long, value_name = "DIR")]
    pub utterances: PathBuf,
    /// Directory holding pitch_stats.json and energy_stats.json
    #[arg(long, value_name = "DIR")]
    pub stats_dir: PathBuf,
    /// Output directory for per-utterance prosody records
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct BuildSfvArgs {
    /// TSV with header `source_id<TAB>target_id`, one sentence pair per line
    #[arg(long, value_name = "TSV")]
    pub pairs: PathBuf,
    /// Pharaoh alignment file, line N belongs to pair N [default: paths.alignments]
    #[arg(long, value_name = "FILE")]
    pub alignments: Option<PathBuf>,
    /// Directory of source-side prosody records from `aggregate`
    #[arg(long, value_name = "DIR")]
    pub aggregates: Option<PathBuf>,
    /// Directory of target utterance alignment records
    #[arg(long, value_name = "DIR")]
    pub utterances: PathBuf,
    /// Output directory for `<target_id>.json` SFV files
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
    /// Write all-zero SFVs (ablation); overrides sfv.zero_sfv
    #[arg(long)]
    pub zero: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Pho,
    Emb,
    Epi,
}

impl From<ModeArg> for InputMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Pho => InputMode::Pho,
            ModeArg::Emb => InputMode::Emb,
            ModeArg::Epi => InputMode::Epi,
        }
    }
}

#[derive(Debug, Args)]
pub struct ModelInputsArgs {
    /// pho: phonemes only; emb: SFV in the last two embedding dimensions; epi: emb plus SFV on the predictor input
    #[arg(long, value_enum)]
    pub mode: ModeArg,
    /// TSV with header `source_id<TAB>target_id`
    #[arg(long, value_name = "TSV")]
    pub pairs: PathBuf,
    /// Directory of utterance records for both languages
    #[arg(long, value_name = "DIR")]
    pub utterances: PathBuf,
    /// Directory of SFV files (emb and epi modes)
    #[arg(long, value_name = "DIR")]
    pub sfv_dir: Option<PathBuf>,
    /// Vocabulary JSON; when absent one is built from --utterances and saved as vocab.json
    #[arg(long, value_name = "FILE")]
    pub vocab: Option<PathBuf>,
    /// Output directory for per-pair model-input JSON
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ApplyAdditionArgs {
    /// Directory of predictor outputs `{utterance_id, pitch[], energy[]}`
    #[arg(long, value_name = "DIR")]
    pub predicted: PathBuf,
    /// Directory of SFV files, matched by utterance id
    #[arg(long, value_name = "DIR")]
    pub sfv_dir: Option<PathBuf>,
    /// Output directory for adjusted `<utterance_id>.json` predictions
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
    /// Add zero SFVs instead (output equals input); overrides sfv.zero_sfv
    #[arg(long)]
    pub zero: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Tsv,
    Markdown,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Tsv => ReportFormat::Tsv,
            FormatArg::Markdown => ReportFormat::Markdown,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DtwArg {
    PathLength,
    None,
}

impl From<DtwArg> for DtwNormalization {
    fn from(d: DtwArg) -> Self {
        match d {
            DtwArg::PathLength => DtwNormalization::PathLength,
            DtwArg::None => DtwNormalization::None,
        }
    }
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Directory of ground-truth feature records
    #[arg(long, value_name = "DIR")]
    pub gt: PathBuf,
    /// Generated feature records, `NAME=DIR` or `DIR` (named after the directory); repeatable
    #[arg(long, value_name = "[NAME=]DIR", required = true)]
    pub gen: Vec<String>,
    /// Report format [default: eval.report_format]
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// DTW normalization [default: eval.dtw_normalization]
    #[arg(long, value_enum)]
    pub dtw_normalization: Option<DtwArg>,
    /// TSV `system<TAB>mos` with precomputed MOS scores to show in the report
    #[arg(long, value_name = "TSV")]
    pub mos: Option<PathBuf>,
    /// Write the report here instead of stdout
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum CorpusCommand {
    /// Cut a chapter WAV into utterance WAVs using a sync map
    Segment(SegmentArgs),
    /// Keep manifest records whose duration lies in [min, max] seconds
    Filter(FilterArgs),
    /// Corpus statistics table
    Stats(StatsArgs),
    /// Seeded train/val/test split
    Split(SplitArgs),
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    /// Chapter-level WAV to cut
    #[arg(long, value_name = "WAV")]
    pub chapter: PathBuf,
    /// Sync map JSON with fragment ids and begin/end times in seconds
    #[arg(long, value_name = "JSON")]
    pub sync_map: PathBuf,
    /// Output directory for `<fragment id>.wav` and manifest.tsv
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
    /// Language tag written to the manifest
    #[arg(long, default_value = "und")]
    pub language: String,
    /// Speaker id written to the manifest
    #[arg(long, default_value = "unknown")]
    pub speaker: String,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    /// Input manifest TSV
    #[arg(long, value_name = "TSV")]
    pub manifest: PathBuf,
    /// Shortest kept duration in seconds, inclusive
    #[arg(long, default_value_t = 1.0)]
    pub min: f64,
    /// Longest kept duration in seconds, inclusive
    #[arg(long, default_value_t = 20.0)]
    pub max: f64,
    /// Output manifest TSV
    #[arg(long, value_name = "TSV")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StatsFormat {
    Markdown,
    Json,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Manifest, `LABEL=TSV` or `TSV`; repeat for one column per corpus
    #[arg(long, value_name = "[LABEL=]TSV", required = true)]
    pub manifest: Vec<String>,
    /// Output format for the statistics table
    #[arg(long, value_enum, default_value = "markdown")]
    pub format: StatsFormat,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Input manifest TSV
    #[arg(long, value_name = "TSV")]
    pub manifest: PathBuf,
    /// Training records (count mode)
    #[arg(long, requires_all = ["val", "test"], conflicts_with = "ratios")]
    pub train: Option<usize>,
    /// Validation records (count mode)
    #[arg(long)]
    pub val: Option<usize>,
    /// Test records (count mode)
    #[arg(long)]
    pub test: Option<usize>,
    /// Ratios `TRAIN,VAL,TEST` summing to 1 (ratio mode)
    #[arg(long, value_name = "R,R,R")]
    pub ratios: Option<String>,
    /// Seed for the deterministic hash ranking
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for train.tsv, val.tsv, test.tsv and split.json
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
}

// ---------------------------------------------------------------------------
// Outcome bookkeeping

/// Errors that abort a whole command, as opposed to per-record failures.
#[derive(Debug)]
enum Fatal {
    Usage(String),
    Run(Error),
}

impl From<Error> for Fatal {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(m) => Fatal::Usage(m),
            other => Fatal::Run(other),
        }
    }
}

#[derive(Default)]
struct Report {
    failures: Vec<(String, Error)>,
}

impl Report {
    fn fail(&mut self, item: impl Into<String>, err: Error) {
        self.failures.push((item.into(), err));
    }

    fn exit_code(&self) -> i32 {
        for (item, err) in &self.failures {
            eprintln!("error: {item}: {err}");
        }
        if self.failures.is_empty() {
            EXIT_OK
        } else {
            eprintln!("{} record(s) failed", self.failures.len());
            EXIT_RECORD_FAILURE
        }
    }
}

// ---------------------------------------------------------------------------
// File helpers

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string(value).map_err(|e| Error::Schema(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// `*.json` files of a directory, sorted by name.
fn list_json(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json") && p.is_file())
        .collect();
    files.sort();
    Ok(files)
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Split `NAME=VALUE`; a bare value is named after its final path component.
fn named(arg: &str) -> (String, PathBuf) {
    match arg.split_once('=') {
        Some((name, value)) if !name.is_empty() => (name.to_string(), PathBuf::from(value)),
        _ => {
            let p = PathBuf::from(arg);
            let name = p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| arg.to_string());
            (name, p)
        }
    }
}

fn read_pairs(path: &Path) -> Result<Vec<(String, String)>> {
    let text = read_text(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some("source_id\ttarget_id") => {}
        other => {
            return Err(Error::Schema(format!(
                "{}: header {other:?}, expected \"source_id\\ttarget_id\"",
                path.display()
            )))
        }
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(n, l)| {
            l.split_once('\t')
                .map(|(s, t)| (s.to_string(), t.to_string()))
                .ok_or_else(|| Error::Schema(format!("{}: line {} is not two tab-separated ids", path.display(), n + 2)))
        })
        .collect()
}

fn load_utterance(dir: &Path, id: &str) -> Result<Utterance> {
    let path = dir.join(format!("{id}.json"));
    parse_utterance_record(&read_text(&path)?).map_err(|e| match e {
        Error::Schema(m) => Error::Schema(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn feature_dir(explicit: &Option<PathBuf>, cfg: &ToolConfig) -> std::result::Result<PathBuf, Fatal> {
    explicit
        .clone()
        .or_else(|| cfg.paths.features_dir.clone())
        .ok_or_else(|| Fatal::Usage("no feature directory: pass --features or set paths.features_dir".into()))
}

// ---------------------------------------------------------------------------
// Entry point

/// Parse `argv` and run the command, returning the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(Fatal::Usage(m)) => {
            eprintln!("usage error: {m}");
            EXIT_USAGE
        }
        Err(Fatal::Run(e)) => {
            eprintln!("error: {e}");
            EXIT_RECORD_FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> std::result::Result<i32, Fatal> {
    let cfg = ToolConfig::discover(cli.config.as_deref()).map_err(|e| Fatal::Usage(e.to_string()))?;
    cfg.check_paths().map_err(|e| Fatal::Usage(e.to_string()))?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(Fatal::Usage("--jobs must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Fatal::Usage(e.to_string()))?;
    pool.install(|| match cli.command {
        Command::Extract(a) => extract(a, &cfg),
        Command::StatsFit(a) => stats_fit(a, &cfg),
        Command::Aggregate(a) => aggregate(a, &cfg),
        Command::BuildSfv(a) => build_sfv_cmd(a, &cfg),
        Command::ModelInputs(a) => model_inputs(a),
        Command::ApplyAddition(a) => apply_addition_cmd(a, &cfg),
        Command::Evaluate(a) => evaluate(a, &cfg),
        Command::Corpus(c) => match c {
            CorpusCommand::Segment(a) => corpus_segment(a),
            CorpusCommand::Filter(a) => corpus_filter(a),
            CorpusCommand::Stats(a) => corpus_stats_cmd(a),
            CorpusCommand::Split(a) => corpus_split(a),
        },
    })
}

// ---------------------------------------------------------------------------
// Commands

fn extract(a: ExtractArgs, cfg: &ToolConfig) -> std::result::Result<i32, Fatal> {
    let analysis = a.analysis.apply(cfg.analysis.clone())?;
    let out_dir = a.out_dir.or_else(|| cfg.paths.features_dir.clone()).unwrap_or_else(|| PathBuf::from("features"));

    let mut jobs: Vec<(String, PathBuf)> = a.wav.iter().map(|p| (stem(p), p.clone())).collect();
    if let Some(m) = &a.manifest {
        let man = Manifest::parse_tsv(&read_text(m)?)?;
        let base = m.parent().unwrap_or(Path::new(""));
        jobs.extend(man.records.into_iter().map(|r| (r.id, base.join(r.path))));
    }
    if jobs.is_empty() {
        return Err(Fatal::Usage("nothing to extract: pass --wav or --manifest".into()));
    }
    create_dir(&out_dir)?;

    let results: Vec<Result<()>> = jobs
        .par_iter()
        .map(|(id, path)| {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            let mut buf = decode_wav(&bytes)?;
            if buf.sample_rate != analysis.sample_rate {
                buf = resample(&buf, analysis.sample_rate)?;
            }
            let record = analyze(id, &buf, &analysis)?;
            write_json(&out_dir.join(format!("{id}.json")), &record)
        })
        .collect();
    let mut report = Report::default();
    for ((_, path), r) in jobs.iter().zip(results) {
        if let Err(e) = r {
            report.fail(path.display().to_string(), e);
        }
    }
    Ok(report.exit_code())
}

fn load_features(dir: &Path, only: Option<&std::collections::HashSet<String>>, report: &mut Report) -> Result<Vec<FeatureRecord>> {
    let files = list_json(dir)?;
    let loaded: Vec<(PathBuf, Result<FeatureRecord>)> = files
        .into_par_iter()
        .filter(|p| only.is_none_or(|set| set.contains(&stem(p))))
        .map(|p| {
            let r = read_json::<FeatureRecord>(&p).and_then(|rec| rec.validate().map(|_| rec));
            (p, r)
        })
        .collect();
    let mut records = Vec::with_capacity(loaded.len());
    for (p, r) in loaded {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) => report.fail(p.display().to_string(), e),
        }
    }
    Ok(records)
}

fn stats_fit(a: StatsFitArgs, cfg: &ToolConfig) -> std::result::Result<i32, Fatal> {
    let dir = feature_dir(&a.features, cfg)?;
    let only = match &a.manifest {
        Some(m) => Some(Manifest::parse_tsv(&read_text(m)?)?.records.into_iter().map(|r| r.id).collect()),
        None => None,
    };
    let mut report = Report::default();
    let records = load_features(&dir, only.as_ref(), &mut report)?;
    let pitch: Vec<_> = records.iter().map(FeatureRecord::pitch).collect();
    let energy: Vec<_> = records.iter().map(FeatureRecord::energy).collect();
    let pitch_stats = fit_norm_stats(&pitch)?;
    let energy_stats = fit_norm_stats(&energy)?;
    for s in [&pitch_stats, &energy_stats] {
        if s.is_degenerate() {
            log::warn!("{} statistics are degenerate (std = 0); z-scores will be 0", s.kind);
        }
    }
    create_dir(&a.out_dir)?;
    write_json(&a.out_dir.join(PITCH_STATS_FILE), &pitch_stats)?;
    write_json(&a.out_dir.join(ENERGY_STATS_FILE), &energy_stats)?;
    Ok(report.exit_code())
}

fn aggregate(a: AggregateArgs, cfg: &ToolConfig) -> std::result::Result<i32, Fatal> {
    let features = feature_dir(&a.features, cfg)?;
    let pitch_stats: NormStats = read_json(&a.stats_dir.join(PITCH_STATS_FILE))?;
    let energy_stats: NormStats = read_json(&a.stats_dir.join(ENERGY_STATS_FILE))?;
    let files = list_json(&a.utterances)?;
    create_dir(&a.out_dir)?;

    let results: Vec<Result<()>> = files
        .par_iter()
        .map(|path| {
            let utt = parse_utterance_record(&read_text(path)?)?;
            let rec: FeatureRecord = read_json(&features.join(format!("{}.json", utt.id)))?;
            let prosody = aggregate_utterance(&rec, &utt, &pitch_stats, &energy_stats)?;
            write_json(&a.out_dir.join(format!("{}.json", utt.id)), &prosody)
        })
        .collect();
    let mut report = Report::default();
    for (p, r) in files.iter().zip(results) {
        if let Err(e) = r {
            report.fail(p.display().to_string(), e);
        }
    }
    Ok(report.exit_code())
}

fn build_sfv_cmd(a: BuildSfvArgs, cfg: &ToolConfig) -> std::result::Result<i32, Fatal> {
    let zero = a.zero || cfg.sfv.zero_sfv;
    let pairs = read_pairs(&a.pairs)?;
    let alignments = if zero {
        None
    } else {
        let path = a
            .alignments
            .clone()
            .or_else(|| cfg.paths.alignments.clone())
            .ok_or_else(|| Fatal::Usage("build-sfv needs --alignments unless --zero is set".into()))?;
        let links = parse_word_alignment_file(&read_text(&path)?)?;
        if links.len() != pairs.len() {
            return Err(Fatal::Run(Error::LengthMismatch(format!(
                "{} alignment lines for {} sentence pairs",
                links.len(),
                pairs.len()
            ))));
        }
        Some(links)
    };
    let aggregates = match (&a.aggregates, zero) {
        (Some(d), _) => Some(d.clone()),
        (None, true) => None,
        (None, false) => return Err(Fatal::Usage("build-sfv needs --aggregates unless --zero is set".into())),
    };
    create_dir(&a.out_dir)?;

    let results: Vec<Result<()>> = pairs
        .par_iter()
        .enumerate()
        .map(|(i, (src_id, tgt_id))| {
            let tgt = load_utterance(&a.utterances, tgt_id)?;
            let sfv = match (&alignments, &aggregates) {
                (Some(links), Some(dir)) => {
                    let src: UtteranceProsody = read_json(&dir.join(format!("{src_id}.json")))?;
                    build_sfv(&src.word_pitch, &src.word_energy, &links[i], &tgt)?
                }
                _ => zero_sfv(&tgt),
            };
            write_json(&a.out_dir.join(format!("{tgt_id}.json")), &sfv)
        })
        .collect();
    let mut report = Report::default();
    for ((s, t), r) in pairs.iter().zip(results) {
        if let Err(e) = r {
            report.fail(format!("{s} -> {t}"), e);
        }
    }
    Ok(report.exit_code())
}

fn model_inputs(a: ModelInputsArgs) -> std::result::Result<i32, Fatal> {
    let mode: InputMode = a.mode.into();
    let pairs = read_pairs(&a.pairs)?;
    if mode != InputMode::Pho && a.sfv_dir.is_none() {
        return Err(Fatal::Usage(format!("{mode} mode needs --sfv-dir")));
    }
    create_dir(&a.out_dir)?;
    let vocab = match &a.vocab {
        Some(p) => PhonemeVocab::from_json(&read_text(p)?)?,
        None => {
            let mut utts = Vec::new();
            for p in list_json(&a.utterances)? {
                utts.push(parse_utterance_record(&read_text(&p)?)?);
            }
            let vocab = PhonemeVocab::from_utterances(&utts);
            write_text(&a.out_dir.join(VOCAB_FILE), &(vocab.to_json() + "\n"))?;
            vocab
        }
    };

    let results: Vec<Result<()>> = pairs
        .par_iter()
        .map(|(src_id, tgt_id)| {
            let tgt = load_utterance(&a.utterances, tgt_id)?;
            let src = if mode == InputMode::Pho { Some(load_utterance(&a.utterances, src_id)?) } else { None };
            let sfv: Option<SourceFeatureVector> = match &a.sfv_dir {
                Some(d) if mode != InputMode::Pho => Some(read_json(&d.join(format!("{tgt_id}.json")))?),
                _ => None,
            };
            let inputs = build_model_inputs(mode, src.as_ref(), &tgt, sfv.as_ref(), &vocab)?;
            write_json(&a.out_dir.join(format!("{tgt_id}.json")), &inputs)
        })
        .collect();
    let mut report = Report::default();
    for ((s, t), r) in pairs.iter().zip(results) {
        if let Err(e) = r {
            report.fail(format!("{s} -> {t}"), e);
        }
    }
    Ok(report.exit_code())
}

fn apply_addition_cmd(a: ApplyAdditionArgs, cfg: &ToolConfig) -> std::result::Result<i32, Fatal> {
    let zero = a.zero || cfg.sfv.zero_sfv;
    if !zero && a.sfv_dir.is_none() {
        return Err(Fatal::Usage("apply-addition needs --sfv-dir unless --zero is set".into()));
    }
    let files = list_json(&a.predicted)?;
    create_dir(&a.out_dir)?;
    let results: Vec<Result<()>> = files
        .par_iter()
        .map(|path| {
            let pred: PredictorOutputs = read_json(path)?;
            let sfv = match (&a.sfv_dir, zero) {
                (Some(d), false) => read_json::<SourceFeatureVector>(&d.join(format!("{}.json", pred.utterance_id)))?,
                _ => SourceFeatureVector {
                    utterance_id: pred.utterance_id.clone(),
                    pitch: vec![0.0; pred.pitch.len()],
                    energy: vec![0.0; pred.energy.len()],
                    aligned_mask: vec![false; pred.pitch.len()],
                },
            };
            let adjusted = add_sfv(&pred, &sfv)?;
            write_json(&a.out_dir.join(format!("{}.json", pred.utterance_id)), &adjusted)
        })
        .collect();
    let mut report = Report::default();
    for (p, r) in files.iter().zip(results) {
        if let Err(e) = r {
            report.fail(p.display().to_string(), e);
        }
    }
    Ok(report.exit_code())
}

fn load_set(dir: &Path, report: &mut Report) -> Result<UtteranceSet> {
    let records = load_features(dir, None, report)?;
    Ok(records.into_iter().map(|r| (r.utterance_id.clone(), r)).collect())
}

fn read_mos(path: &Path) -> Result<BTreeMap<String, f64>> {
    let text = read_text(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .filter(|(i, l)| !(*i == 0 && l.starts_with("system\t")))
        .map(|(i, l)| {
            let bad = || Error::Schema(format!("{}: line {} is not `system<TAB>mos`", path.display(), i + 1));
            let (name, v) = l.split_once('\t').ok_or_else(bad)?;
            Ok((name.to_string(), v.trim().parse().map_err(|_| bad())?))
        })
        .collect()
}

fn evaluate(a: EvaluateArgs, cfg: &ToolConfig) -> std::result::Result<i32, Fatal> {
    let format: ReportFormat = a.format.map(Into::into).unwrap_or(cfg.eval.report_format);
    let norm: DtwNormalization = a.dtw_normalization.map(Into::into).unwrap_or(cfg.eval.dtw_normalization);
    let mut report = Report::default();
    let gt = load_set(&a.gt, &mut report)?;
    let mut systems = BTreeMap::new();
    for g in &a.gen {
        let (name, dir) = named(g);
        if systems.contains_key(&name) {
            return Err(Fatal::Usage(format!("system {name:?} given twice")));
        }
        systems.insert(name, load_set(&dir, &mut report)?);
    }
    let (mut eval, failures) = evaluate_corpus_collect(&gt, &systems, norm)?;
    for f in failures {
        report.fail(format!("{}/{}", f.system, f.utterance), f.error);
    }
    if let Some(m) = &a.mos {
        eval = eval.with_mos(&read_mos(m)?);
    }
    let text = render_report(&eval, format);
    match &a.out {
        Some(p) => write_text(p, &text)?,
        None => print!("{text}"),
    }
    Ok(report.exit_code())
}

fn corpus_segment(a: SegmentArgs) -> std::result::Result<i32, Fatal> {
    let bytes = fs::read(&a.chapter).map_err(|e| Error::io(&a.chapter, e))?;
    let chapter = decode_wav(&bytes)?;
    let map = parse_sync_map(&read_text(&a.sync_map)?)?;
    if map.overlap_warning {
        log::warn!("{}: sync map fragments overlap", a.sync_map.display());
    }
    create_dir(&a.out_dir)?;
    let mut report = Report::default();
    let mut records = Vec::with_capacity(map.len());
    for seg in &map.entries {
        let one = crate::alignment::SegmentMap { entries: vec![seg.clone()], overlap_warning: false };
        let result = segment_audio(&chapter, &one).and_then(|mut parts| {
            let buf = parts.remove(0);
            if buf.is_empty() {
                return Err(Error::EmptySignal);
            }
            let file = format!("{}.wav", seg.id);
            let path = a.out_dir.join(&file);
            fs::write(&path, encode_wav(&buf)).map_err(|e| Error::io(&path, e))?;
            Ok(ManifestRecord {
                id: seg.id.clone(),
                path: file,
                language: a.language.clone(),
                speaker: a.speaker.clone(),
                duration_s: buf.duration_secs(),
                text: seg.text.replace(['\t', '\n', '\r'], " "),
            })
        });
        match result {
            Ok(r) => records.push(r),
            Err(e) => report.fail(&seg.id, e),
        }
    }
    let man = Manifest::new(records)?;
    write_text(&a.out_dir.join("manifest.tsv"), &man.to_tsv()?)?;
    Ok(report.exit_code())
}

fn corpus_filter(a: FilterArgs) -> std::result::Result<i32, Fatal> {
    if a.min > a.max {
        return Err(Fatal::Usage(format!("--min {} exceeds --max {}", a.min, a.max)));
    }
    let man = Manifest::parse_tsv(&read_text(&a.manifest)?)?;
    let kept = duration_filter(&man, a.min, a.max);
    log::info!("kept {} of {} records", kept.len(), man.len());
    write_text(&a.out, &kept.to_tsv()?)?;
    Ok(EXIT_OK)
}

fn corpus_stats_cmd(a: StatsArgs) -> std::result::Result<i32, Fatal> {
    let mut columns: Vec<(String, CorpusStats)> = Vec::new();
    for m in &a.manifest {
        let (label, path) = named(m);
        let man = Manifest::parse_tsv(&read_text(&path)?)?;
        columns.push((label, corpus_stats(&man, &man.transcripts())?));
    }
    match a.format {
        StatsFormat::Markdown => print!("{}", render_stats_table(&columns)),
        StatsFormat::Json => {
            let map: BTreeMap<&str, &CorpusStats> = columns.iter().map(|(l, s)| (l.as_str(), s)).collect();
            println!("{}", serde_json::to_string(&map).map_err(|e| Error::Schema(e.to_string()))?);
        }
    }
    Ok(EXIT_OK)
}

fn parse_ratios(s: &str) -> std::result::Result<SplitSizes, Fatal> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Fatal::Usage(format!("--ratios {s:?} is not three numbers")))?;
    match parts[..] {
        [train, val, test] => Ok(SplitSizes::Ratios { train, val, test }),
        _ => Err(Fatal::Usage(format!("--ratios {s:?} is not three numbers"))),
    }
}

fn corpus_split(a: SplitArgs) -> std::result::Result<i32, Fatal> {
    let sizes = match (&a.ratios, a.train, a.val, a.test) {
        (Some(r), None, None, None) => parse_ratios(r)?,
        (None, Some(train), Some(val), Some(test)) => SplitSizes::Counts { train, val, test },
        _ => return Err(Fatal::Usage("give either --train/--val/--test or --ratios".into())),
    };
    let man = Manifest::parse_tsv(&read_text(&a.manifest)?)?;
    let spec = SplitSpec { sizes, seed: a.seed };
    let counts: SplitCounts = spec.resolve(man.len())?;
    let (train, val, test) = split_manifest(&man, &spec)?;
    create_dir(&a.out_dir)?;
    write_text(&a.out_dir.join("train.tsv"), &train.to_tsv()?)?;
    write_text(&a.out_dir.join("val.tsv"), &val.to_tsv()?)?;
    write_text(&a.out_dir.join("test.tsv"), &test.to_tsv()?)?;
    write_json(&a.out_dir.join("split.json"), &SplitSidecar { seed: a.seed, counts })?;
    Ok(EXIT_OK)
}
