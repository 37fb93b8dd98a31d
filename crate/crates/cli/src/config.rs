//! Experiment settings merged from a config file and command-line flags.

use std::path::{Path, PathBuf};

use anyhow::Result;
use bscramble_core::attack::{SolverMode, DEFAULT_TRIALS};
use bscramble_core::cipher::{CipherConfig, Orientation};
use bscramble_core::experiment::{Variant, DEFAULT_QUALITIES};
use bscramble_core::keystream::Scheme;
use bscramble_core::sns::{FacebookQfRule, Provider, SnsPolicy};
use serde::{Deserialize, Serialize};

use crate::args::{CipherArgs, ExperimentArgs, PolicyArgs};
use crate::usage;

/// Contents of a config file. Every key is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub inputs: Option<Vec<String>>,
    pub out_dir: Option<PathBuf>,
    pub qualities: Option<Qualities>,
    pub variants: Option<Vec<Variant>>,
    pub provider: Option<Provider>,
    pub facebook_qf_rule: Option<String>,
    pub downscale: Option<bool>,
    pub scheme: Option<Scheme>,
    pub block_size: Option<usize>,
    pub orientation: Option<Orientation>,
    pub mode: Option<SolverMode>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub key: Option<PathBuf>,
    pub crop: Option<bool>,
    pub svg: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum Qualities {
    Text(String),
    List(Vec<u8>),
}

impl FileConfig {
    /// Reads JSON when the extension is `.json`, TOML otherwise. Relative
    /// paths are taken relative to the file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => usage!("cannot read config {}: {e}", path.display()),
        };
        let parsed: std::result::Result<Self, String> = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| e.to_string())
        } else {
            toml::from_str(&text).map_err(|e| e.to_string())
        };
        let mut cfg = match parsed {
            Ok(c) => c,
            Err(e) => usage!("config {}: {e}", path.display()),
        };
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = cfg.out_dir.as_mut() {
            rebase(p);
        }
        if let Some(p) = cfg.key.as_mut() {
            rebase(p);
        }
        if let Some(inputs) = cfg.inputs.as_mut() {
            for i in inputs.iter_mut() {
                if Path::new(i).is_relative() {
                    *i = base.join(&*i).to_string_lossy().into_owned();
                }
            }
        }
        Ok(cfg)
    }
}

/// Fully resolved experiment settings.
#[derive(Clone, Debug, Serialize)]
pub struct ExperimentConfig {
    pub inputs: Vec<String>,
    pub out_dir: PathBuf,
    pub qualities: Vec<u8>,
    pub variants: Vec<Variant>,
    #[serde(skip)]
    pub policy: SnsPolicy,
    pub provider: Provider,
    pub facebook_qf_rule: String,
    pub downscale: bool,
    /// `None` runs both schemes at their default block sizes.
    pub scheme: Option<Scheme>,
    pub block_size: Option<usize>,
    pub orientation: Orientation,
    pub mode: SolverMode,
    pub trials: usize,
    pub seed: u64,
    pub key: Option<PathBuf>,
    pub crop: bool,
    pub svg: bool,
}

impl ExperimentConfig {
    pub fn resolve(args: &ExperimentArgs) -> Result<Self> {
        let file = match &args.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let inputs = if args.inputs.is_empty() {
            file.inputs.unwrap_or_default()
        } else {
            args.inputs.clone()
        };
        if inputs.is_empty() {
            usage!("no input images given");
        }
        let Some(out_dir) = args.out_dir.clone().or(file.out_dir) else {
            usage!("no output directory given (--out-dir)");
        };
        let qualities = match (&args.qualities, file.qualities) {
            (Some(text), _) => parse_qualities(text)?,
            (None, Some(Qualities::Text(text))) => parse_qualities(&text)?,
            (None, Some(Qualities::List(list))) => checked_qualities(list)?,
            (None, None) => DEFAULT_QUALITIES.collect(),
        };
        let PolicyArgs {
            provider,
            facebook_qf_rule,
            downscale,
        } = &args.policy;
        let provider = provider.or(file.provider).unwrap_or(Provider::Twitter);
        let facebook_rule = match (facebook_qf_rule, &file.facebook_qf_rule) {
            (Some(rule), _) => rule.clone(),
            (None, Some(text)) => match text.parse::<FacebookQfRule>() {
                Ok(rule) => rule,
                Err(e) => usage!("config facebook_qf_rule: {e}"),
            },
            (None, None) => FacebookQfRule::default(),
        };
        let facebook_qf_rule = match &facebook_rule {
            FacebookQfRule::Constant(q) => format!("const:{q}"),
            FacebookQfRule::PerUploadQuality(_) => "table".into(),
        };
        let downscale = *downscale || file.downscale.unwrap_or(false);
        let policy = SnsPolicy {
            provider,
            facebook_rule,
            downscale,
        };
        let CipherArgs {
            scheme,
            block_size,
            orientation,
        } = &args.cipher;
        let trials = args.trials.or(file.trials).unwrap_or(DEFAULT_TRIALS);
        if trials == 0 {
            usage!("trial count must be at least 1");
        }
        Ok(Self {
            inputs,
            out_dir,
            qualities,
            variants: args
                .variants
                .clone()
                .or(file.variants)
                .unwrap_or_else(|| Variant::ALL.to_vec()),
            policy,
            provider,
            facebook_qf_rule,
            downscale,
            scheme: scheme.or(file.scheme),
            block_size: block_size.or(file.block_size),
            orientation: orientation.or(file.orientation).unwrap_or_default(),
            mode: args.mode.or(file.mode).unwrap_or(SolverMode::Extended),
            trials,
            seed: args.seed.or(file.seed).unwrap_or(0),
            key: args.key.clone().or(file.key),
            crop: args.crop || file.crop.unwrap_or(false),
            svg: args.svg || file.svg.unwrap_or(false),
        })
    }

    /// Cipher configurations to attack: the chosen scheme, or both at their
    /// default block sizes.
    pub fn attack_configs(&self) -> Vec<CipherConfig> {
        let schemes = match self.scheme {
            Some(s) => vec![s],
            None => vec![Scheme::Conventional, Scheme::Grayscale],
        };
        schemes
            .into_iter()
            .map(|s| {
                let cfg = CipherConfig::for_scheme(s).with_orientation(self.orientation);
                match self.block_size {
                    Some(b) => cfg.with_block_size(b),
                    None => cfg,
                }
            })
            .collect()
    }
}

/// Parses `70-100`, `95` or `70,80,90`.
pub fn parse_qualities(text: &str) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let bad = || crate::UsageError(format!("bad quality list {text:?}"));
        match part.split_once('-') {
            Some((a, b)) => {
                let a: u8 = a.trim().parse().map_err(|_| bad())?;
                let b: u8 = b.trim().parse().map_err(|_| bad())?;
                if a > b {
                    usage!("empty quality range {part:?}");
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().map_err(|_| bad())?),
        }
    }
    checked_qualities(out)
}

fn checked_qualities(list: Vec<u8>) -> Result<Vec<u8>> {
    if list.is_empty() {
        usage!("empty quality list");
    }
    if let Some(q) = list.iter().find(|q| !(1..=100).contains(*q)) {
        usage!("quality {q} outside 1..=100");
    }
    Ok(list)
}

/// Cipher settings from flags for a single encrypt or decrypt.
pub fn cipher_from_args(args: &CipherArgs, fallback: Option<Scheme>) -> Result<CipherConfig> {
    let Some(scheme) = args.scheme.or(fallback) else {
        usage!("no encryption metadata found; pass --scheme (and --block-size, --orientation if not default)");
    };
    let mut cfg = CipherConfig::for_scheme(scheme);
    if let Some(b) = args.block_size {
        cfg = cfg.with_block_size(b);
    }
    if let Some(o) = args.orientation {
        cfg = cfg.with_orientation(o);
    }
    Ok(cfg)
}
