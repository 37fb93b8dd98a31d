//! Upload-download pipelines and report rows for corpus experiments.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::attack::{psnr, ProtocolReport};
use crate::cipher::{decrypt, encrypt, CipherConfig};
use crate::codec::{decode_jpeg, encode_jpeg, JpegParams, Subsampling};
use crate::keystream::{KeySet, Scheme, SecretKey};
use crate::raster::RasterImage;
use crate::sns::{simulate, RecompressionDecision, SnsPolicy};
use crate::{Error, Result};

/// Version of the column layout of [`EvaluationRow`] and [`MeanPsnrRow`].
pub const EVALUATION_SCHEMA_VERSION: u32 = 1;
/// Version of the column layout of [`AttackRow`].
pub const ATTACK_SCHEMA_VERSION: u32 = 1;
/// Default upload quality sweep.
pub const DEFAULT_QUALITIES: std::ops::RangeInclusive<u8> = 70..=100;

/// What is done to an image before upload.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "unencrypted")]
    Unencrypted,
    #[serde(rename = "conventional-16")]
    Conventional16,
    #[serde(rename = "conventional-8")]
    Conventional8,
    #[serde(rename = "grayscale-8")]
    Grayscale8,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Unencrypted,
        Variant::Conventional16,
        Variant::Conventional8,
        Variant::Grayscale8,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Variant::Unencrypted => "unencrypted",
            Variant::Conventional16 => "conventional-16",
            Variant::Conventional8 => "conventional-8",
            Variant::Grayscale8 => "grayscale-8",
        }
    }

    pub fn cipher_config(self) -> Option<CipherConfig> {
        match self {
            Variant::Unencrypted => None,
            Variant::Conventional16 => Some(CipherConfig::conventional()),
            Variant::Conventional8 => Some(CipherConfig::conventional().with_block_size(8)),
            Variant::Grayscale8 => Some(CipherConfig::grayscale()),
        }
    }

    /// Block side, or 0 when nothing is scrambled.
    pub fn block_size(self) -> usize {
        self.cipher_config().map_or(0, |c| c.block_w)
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.id())
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.id() == s)
            .ok_or_else(|| format!("unknown variant {s:?} (unencrypted, conventional-16, conventional-8, grayscale-8)"))
    }
}

/// Result of sending one image through a pipeline.
#[derive(Clone, Debug, PartialEq)]
pub struct PipelineOutcome {
    pub decision: RecompressionDecision,
    pub upload_bytes: usize,
    pub download_bytes: usize,
    /// Restored image against the original.
    pub psnr_db: f64,
    pub restored: RasterImage,
}

/// Encrypts (unless `variant` is [`Variant::Unencrypted`]), JPEG-encodes
/// at `quality` with 4:4:4 sampling for color, runs the SNS simulation,
/// decodes, decrypts and compares with `image`.
pub fn run_pipeline(
    image: &RasterImage,
    variant: Variant,
    master: &SecretKey,
    quality: u8,
    policy: &SnsPolicy,
) -> Result<PipelineOutcome> {
    let cfg = variant.cipher_config();
    let keys = cfg.map(|c| KeySet::derive(master, c.scheme));
    let sent = match (&cfg, &keys) {
        (Some(c), Some(k)) => encrypt(image, k, c)?,
        _ => image.clone(),
    };
    let upload = encode_jpeg(&sent, &JpegParams::for_image(&sent, quality, Subsampling::S444))?;
    let (download, decision) = simulate(policy, &upload)?;
    if decision.resized && cfg.is_some() {
        return Err(Error::Policy(format!(
            "{} downscaled the upload, so its blocks can no longer be decrypted",
            policy.provider
        )));
    }
    let (received, _) = decode_jpeg(&download)?;
    let restored = match (&cfg, &keys) {
        (Some(c), Some(k)) => decrypt(&received, k, c)?,
        _ => received,
    };
    let psnr_db = if restored.width() == image.width() && restored.height() == image.height() {
        psnr(image, &restored)?
    } else {
        return Err(Error::Policy(format!(
            "{} changed the image size, PSNR against the original is undefined",
            policy.provider
        )));
    };
    Ok(PipelineOutcome {
        decision,
        upload_bytes: upload.len(),
        download_bytes: download.len(),
        psnr_db,
        restored,
    })
}

/// One pipeline run in an evaluation report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRow {
    pub image_id: String,
    pub provider: String,
    pub variant: Variant,
    pub block_size: usize,
    pub qf: u8,
    pub recompressed: bool,
    /// Quality of the downloaded file, empty when passed through.
    pub output_qf: Option<u8>,
    pub upload_bytes: usize,
    pub download_bytes: usize,
    pub psnr_db: f64,
}

/// Runs every variant at every quality for one image.
pub fn evaluate_image(
    image_id: &str,
    image: &RasterImage,
    master: &SecretKey,
    qualities: &[u8],
    variants: &[Variant],
    policy: &SnsPolicy,
) -> Result<Vec<EvaluationRow>> {
    let mut rows = Vec::with_capacity(qualities.len() * variants.len());
    for &qf in qualities {
        for &variant in variants {
            let out = run_pipeline(image, variant, master, qf, policy)?;
            rows.push(EvaluationRow {
                image_id: image_id.to_string(),
                provider: policy.provider.id().to_string(),
                variant,
                block_size: variant.block_size(),
                qf,
                recompressed: out.decision.recompressed,
                output_qf: out.decision.output_quality,
                upload_bytes: out.upload_bytes,
                download_bytes: out.download_bytes,
                psnr_db: out.psnr_db,
            });
        }
    }
    Ok(rows)
}

/// Mean PSNR over images for one provider, variant and quality.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanPsnrRow {
    pub provider: String,
    pub variant: Variant,
    pub qf: u8,
    pub images: usize,
    pub mean_psnr_db: f64,
}

pub fn mean_psnr(rows: &[EvaluationRow]) -> Vec<MeanPsnrRow> {
    let mut groups: BTreeMap<(String, Variant, u8), (usize, f64)> = BTreeMap::new();
    for r in rows {
        let e = groups.entry((r.provider.clone(), r.variant, r.qf)).or_default();
        e.0 += 1;
        e.1 += r.psnr_db;
    }
    groups
        .into_iter()
        .map(|((provider, variant, qf), (images, sum))| MeanPsnrRow {
            provider,
            variant,
            qf,
            images,
            mean_psnr_db: sum / images as f64,
        })
        .collect()
}

/// Best-trial attack scores for one image, or the corpus mean when
/// `image_id` is `"mean"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackRow {
    pub image_id: String,
    pub scheme: Scheme,
    pub block_size: usize,
    pub n: usize,
    #[serde(rename = "Dc")]
    pub dc: f64,
    #[serde(rename = "Nc")]
    pub nc: f64,
    #[serde(rename = "Lc")]
    pub lc: f64,
    pub psnr_db: f64,
    pub trial_count: usize,
}

impl AttackRow {
    pub fn from_report(image_id: &str, cfg: &CipherConfig, report: &ProtocolReport) -> Self {
        let best = report.best();
        Self {
            image_id: image_id.to_string(),
            scheme: cfg.scheme,
            block_size: cfg.block_w,
            n: report.n,
            dc: best.dc,
            nc: best.nc,
            lc: best.lc,
            psnr_db: best.psnr_db,
            trial_count: report.trials.len(),
        }
    }

    /// Column means of `rows`, which must share a scheme and block size.
    pub fn mean(rows: &[AttackRow]) -> Option<AttackRow> {
        let first = rows.first()?;
        let k = rows.len() as f64;
        let avg = |f: fn(&AttackRow) -> f64| rows.iter().map(f).sum::<f64>() / k;
        Some(AttackRow {
            image_id: "mean".into(),
            scheme: first.scheme,
            block_size: first.block_size,
            n: first.n,
            dc: avg(|r| r.dc),
            nc: avg(|r| r.nc),
            lc: avg(|r| r.lc),
            psnr_db: avg(|r| r.psnr_db),
            trial_count: first.trial_count,
        })
    }
}
