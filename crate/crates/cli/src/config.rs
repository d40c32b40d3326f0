use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use cibnet::audiofp::{ClusterParams, MelParams};
use cibnet::ingest::EmbeddingKind;
use cibnet::pipeline::{check_windows, DetectConfig, Window};
use cibnet::synthbench::Scenario;
use cibnet::traces::TraceKind;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Embedding input: a JSON-lines file, or a packed file of one `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EmbeddingInput {
    Path(PathBuf),
    Packed { path: PathBuf, kind: EmbeddingKind },
}

impl EmbeddingInput {
    pub fn path(&self) -> &Path {
        match self {
            EmbeddingInput::Path(p) | EmbeddingInput::Packed { path: p, .. } => p,
        }
    }
}

/// A window given by label (`all`, `YYYY-MM`) or as an explicit range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WindowSpec {
    Label(String),
    Range(Window),
}

impl WindowSpec {
    pub fn resolve(&self) -> cibnet::Result<Window> {
        match self {
            WindowSpec::Label(l) => Window::parse(l),
            WindowSpec::Range(w) => Ok(w.clone()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub posts: Option<PathBuf>,
    pub comments: Option<PathBuf>,
    pub embeddings: Vec<EmbeddingInput>,
    pub audio_dir: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub windows: Vec<WindowSpec>,
    pub allow_overlapping_windows: bool,
    /// Empty means every trace.
    pub traces: Vec<TraceKind>,
    pub case_sensitive_hashtags: bool,
    pub detect: DetectConfig,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub preset: Option<String>,
    pub scenario: Option<Scenario>,
    pub loss_fractions: Vec<f64>,
    pub loss_seeds: u64,
    pub mel: MelParams,
    pub voice: ClusterParams,
    /// Directory relative paths are resolved against; not serialized.
    #[serde(skip)]
    pub base: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            posts: None,
            comments: None,
            embeddings: Vec::new(),
            audio_dir: None,
            truth: None,
            windows: Vec::new(),
            allow_overlapping_windows: false,
            traces: Vec::new(),
            case_sensitive_hashtags: false,
            detect: DetectConfig::default(),
            seed: 0,
            out: None,
            preset: None,
            scenario: None,
            loss_fractions: vec![0.05, 0.10],
            loss_seeds: 10,
            mel: MelParams::default(),
            voice: ClusterParams::default(),
            base: PathBuf::from("."),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| cibnet::Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| cibnet::Error::Config(format!("config {}: {e}", path.display())))?;
        cfg.base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn trace_list(&self) -> Vec<TraceKind> {
        if self.traces.is_empty() {
            TraceKind::ALL.to_vec()
        } else {
            let mut t = self.traces.clone();
            t.sort();
            t.dedup();
            t
        }
    }

    pub fn window_list(&self) -> cibnet::Result<Vec<Window>> {
        let windows = if self.windows.is_empty() {
            vec![Window::all()]
        } else {
            self.windows.iter().map(WindowSpec::resolve).collect::<cibnet::Result<_>>()?
        };
        check_windows(&windows, self.allow_overlapping_windows)?;
        Ok(windows)
    }

    pub fn validate(&self) -> cibnet::Result<()> {
        self.detect.validate()?;
        self.window_list()?;
        for &f in &self.loss_fractions {
            if !(0.0..1.0).contains(&f) {
                return Err(cibnet::Error::Config(format!("loss fraction must be in [0, 1), got {f}")));
            }
        }
        self.mel.validate()?;
        if let Some(s) = &self.scenario {
            s.validate()?;
        }
        Ok(())
    }

    /// Every referenced input must exist before a run starts.
    pub fn check_inputs(&self) -> cibnet::Result<()> {
        let mut paths: Vec<&Path> = Vec::new();
        paths.extend(self.posts.as_deref());
        paths.extend(self.comments.as_deref());
        paths.extend(self.embeddings.iter().map(EmbeddingInput::path));
        paths.extend(self.truth.as_deref());
        for p in paths {
            if !self.resolve(p).is_file() {
                return Err(cibnet::Error::Config(format!("input {} does not exist", p.display())));
            }
        }
        if let Some(d) = &self.audio_dir {
            if !self.resolve(d).is_dir() {
                return Err(cibnet::Error::Config(format!("audio directory {} does not exist", d.display())));
            }
        }
        Ok(())
    }

    /// SHA-256 of the effective configuration, excluding the output
    /// directory so that reruns elsewhere share a hash.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        let json = serde_json::to_vec(&c).expect("config serializes");
        format!("{:x}", Sha256::digest(&json))
    }

    pub fn out_dir(&self) -> cibnet::Result<PathBuf> {
        self.out
            .as_deref()
            .map(|p| self.resolve(p))
            .ok_or_else(|| cibnet::Error::Config("no output directory (use --out or set \"out\")".into()))
    }
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}
