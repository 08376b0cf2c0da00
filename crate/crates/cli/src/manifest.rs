//! TOML pipeline manifests.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wpctc_core::am::{AmTrainConfig, SynthSpec};
use wpctc_core::decoder::DecodeConfig;
use wpctc_core::streaming::StreamConfig;
use wpctc_core::wordpiece::TrainConfig;

use crate::error::CliError;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineManifest {
    pub seed: Option<u64>,
    /// Base directory for relative artifact paths; relative to the
    /// manifest file itself.
    pub work_dir: Option<PathBuf>,
    /// Utterances held out for decoding, taken from the end of the corpus.
    pub test_utterances: Option<usize>,
    pub workers: Option<usize>,
    /// Input frame shift, for real-time factors.
    pub frame_shift_ms: Option<f64>,
    #[serde(default)]
    pub paths: Paths,
    #[serde(default)]
    pub synth: SynthSpec,
    #[serde(default)]
    pub wordpiece: WordpieceSection,
    #[serde(default)]
    pub am: AmSection,
    #[serde(default)]
    pub decode: DecodeConfig,
    pub stream: Option<StreamConfig>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub corpus: Option<PathBuf>,
    pub wordpiece: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub lm: Option<PathBuf>,
    pub graph: Option<PathBuf>,
    pub am: Option<PathBuf>,
    pub nbest: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WordpieceSection {
    /// A number or a preset such as `"2k"`.
    pub vocab_size: String,
    pub train: TrainConfig,
}

impl Default for WordpieceSection {
    fn default() -> Self {
        WordpieceSection { vocab_size: "1k".into(), train: TrainConfig::default() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AmSection {
    pub context: usize,
    pub stride: usize,
    pub hidden: Vec<usize>,
    pub train: AmTrainConfig,
}

impl Default for AmSection {
    fn default() -> Self {
        AmSection { context: 4, stride: 4, hidden: vec![64], train: AmTrainConfig::default() }
    }
}

/// A manifest with every required field present and paths resolved.
#[derive(Debug, Clone)]
pub struct ResolvedManifest {
    pub seed: u64,
    pub test_utterances: usize,
    pub workers: usize,
    pub frame_shift_ms: f64,
    pub corpus: PathBuf,
    pub wordpiece_path: PathBuf,
    pub lexicon: PathBuf,
    pub lm: PathBuf,
    pub graph: PathBuf,
    pub am_path: PathBuf,
    pub nbest: PathBuf,
    pub report: PathBuf,
    pub synth: SynthSpec,
    pub wordpiece: WordpieceSection,
    pub am: AmSection,
    pub decode: DecodeConfig,
    pub stream: Option<StreamConfig>,
}

impl PipelineManifest {
    pub fn from_file(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read manifest {}: {e}", path.display())))?;
        let mut m: PipelineManifest =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("invalid manifest {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        m.work_dir = Some(match m.work_dir.take() {
            Some(w) if w.is_relative() => base.join(w),
            Some(w) => w,
            None => base.to_path_buf(),
        });
        Ok(m)
    }

    /// Checks that every required field is present and resolves relative
    /// paths against the work directory.
    pub fn resolve(&self) -> Result<ResolvedManifest, CliError> {
        fn need<T: Clone>(v: &Option<T>, field: &str) -> Result<T, CliError> {
            v.clone().ok_or_else(|| CliError::Config(format!("manifest is missing required field `{field}`")))
        }
        let base = self.work_dir.clone().unwrap_or_else(|| PathBuf::from("."));
        let path = |v: &Option<PathBuf>, field: &str| need(v, field).map(|p| base.join(p));
        let p = &self.paths;
        let r = ResolvedManifest {
            seed: need(&self.seed, "seed")?,
            test_utterances: need(&self.test_utterances, "test_utterances")?,
            workers: self.workers.unwrap_or(1).max(1),
            frame_shift_ms: self.frame_shift_ms.unwrap_or(10.0),
            corpus: path(&p.corpus, "paths.corpus")?,
            wordpiece_path: path(&p.wordpiece, "paths.wordpiece")?,
            lexicon: path(&p.lexicon, "paths.lexicon")?,
            lm: path(&p.lm, "paths.lm")?,
            graph: path(&p.graph, "paths.graph")?,
            am_path: path(&p.am, "paths.am")?,
            nbest: path(&p.nbest, "paths.nbest")?,
            report: path(&p.report, "paths.report")?,
            synth: self.synth.clone(),
            wordpiece: self.wordpiece.clone(),
            am: self.am.clone(),
            decode: self.decode,
            stream: self.stream,
        };
        if r.test_utterances == 0 || r.test_utterances >= r.synth.utterances {
            return Err(CliError::Config(format!(
                "test_utterances must be between 1 and synth.utterances - 1 ({}), got {}",
                r.synth.utterances.saturating_sub(1),
                r.test_utterances
            )));
        }
        if !(r.frame_shift_ms > 0.0) {
            return Err(CliError::Config("frame_shift_ms must be positive".into()));
        }
        r.decode.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(s) = r.stream {
            s.validate().map_err(|e| CliError::Config(e.to_string()))?;
        }
        Ok(r)
    }
}
