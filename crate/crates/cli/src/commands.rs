use std::path::Path;

use anyhow::{Context, Result};
use bscramble_core::attack::{attack_trial_protocol, keysets_from_seed, psnr};
use bscramble_core::cipher::{decrypt as decrypt_image, encrypt as encrypt_image, EncryptionMetadata};
use bscramble_core::codec::{
    decode_jpeg, encode_jpeg, encode_png, insert_comment, is_jpeg, read_stream_info, JpegParams, Subsampling,
};
use bscramble_core::experiment::{
    evaluate_image, mean_psnr, AttackRow, EvaluationRow, ATTACK_SCHEMA_VERSION, EVALUATION_SCHEMA_VERSION,
};
use bscramble_core::keystream::{Scheme, SecretKey};
use bscramble_core::sns::{simulate, FacebookQfRule, Provider, SnsPolicy};
use bscramble_core::RasterImage;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::args::{DecryptArgs, EncryptArgs, ExperimentArgs, JpegRoundtripArgs, KeygenArgs, SnsSimArgs};
use crate::config::{cipher_from_args, ExperimentConfig};
use crate::files::{
    expand_inputs, image_id, is_jpeg_path, load_keys, load_master, read, read_image, sidecar_path, write_atomic,
    write_csv, write_json,
};
use crate::plot::mean_psnr_svg;
use crate::usage;

/// Quality of JPEG files written by `decrypt`.
const DECRYPTED_JPEG_QUALITY: u8 = 95;
/// Block side that every experiment variant divides.
const CROP_UNIT: usize = 16;

pub fn keygen(args: &KeygenArgs) -> Result<()> {
    if args.out.exists() && !args.force {
        usage!("{} already exists; pass --force to replace it", args.out.display());
    }
    let mut bytes = [0u8; 32];
    getrandom::fill(&mut bytes).map_err(|e| anyhow::anyhow!("system random source failed: {e}"))?;
    let key = SecretKey::from_bytes(&bytes)?;
    if args.hex {
        write_atomic(&args.out, format!("{}\n", key.to_hex()).as_bytes())?;
    } else {
        write_atomic(&args.out, key.as_bytes())?;
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

fn write_image(path: &Path, image: &RasterImage, jpeg: Option<(u8, Subsampling)>, comment: Option<&str>) -> Result<()> {
    let bytes = match jpeg {
        Some((quality, sub)) => {
            let mut bytes = encode_jpeg(image, &JpegParams::for_image(image, quality, sub))?;
            if let Some(c) = comment {
                bytes = insert_comment(&bytes, c.as_bytes())?;
            }
            bytes
        }
        None => encode_png(image)?,
    };
    write_atomic(path, &bytes)
}

pub fn encrypt(args: &EncryptArgs) -> Result<()> {
    let cfg = cipher_from_args(&args.cipher, Some(Scheme::Grayscale))?;
    let keys = load_keys(&args.key, cfg.scheme)?;
    let mut image = read_image(&args.input)?;
    if args.crop {
        image = image.crop_to_blocks(cfg.block_w, cfg.block_h)?;
    }
    let grid = cfg.geometry(image.width(), image.height()).with_context(|| {
        format!(
            "{}x{} does not split into {}x{} blocks; pass --crop to drop the margins",
            image.width(),
            image.height(),
            cfg.block_w,
            cfg.block_h
        )
    })?;
    let encrypted = encrypt_image(&image, &keys, &cfg)?;
    let meta = EncryptionMetadata::new(&cfg, image.width(), image.height());
    let jpeg = is_jpeg_path(&args.output).then_some((args.quality, args.subsampling));
    write_image(&args.output, &encrypted, jpeg, Some(&meta.to_comment()))?;
    let sidecar = sidecar_path(&args.output);
    write_atomic(&sidecar, format!("{}\n", meta.to_json()).as_bytes())?;
    println!(
        "{} scheme, {}x{} blocks, n = {}: wrote {} and {}",
        cfg.scheme,
        cfg.block_w,
        cfg.block_h,
        grid.n(),
        args.output.display(),
        sidecar.display()
    );
    Ok(())
}

/// Metadata from `--metadata`, the default sidecar, or a JPEG comment.
fn find_metadata(args: &DecryptArgs, bytes: &[u8]) -> Result<Option<EncryptionMetadata>> {
    let explicit = args.metadata.is_some();
    let path = args.metadata.clone().unwrap_or_else(|| sidecar_path(&args.input));
    if explicit || path.is_file() {
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let meta = EncryptionMetadata::from_json(&text).with_context(|| format!("metadata {}", path.display()))?;
        return Ok(Some(meta));
    }
    if is_jpeg(bytes) {
        let info = read_stream_info(bytes)?;
        if let Some(meta) = EncryptionMetadata::from_comments(info.comments.iter().map(Vec::as_slice)) {
            return Ok(Some(meta.context("embedded metadata")?));
        }
    }
    Ok(None)
}

pub fn decrypt(args: &DecryptArgs) -> Result<()> {
    let bytes = read(&args.input)?;
    let cfg = match find_metadata(args, &bytes)? {
        Some(meta) => meta.cipher_config(),
        None => cipher_from_args(&args.cipher, None)?,
    };
    let keys = load_keys(&args.key, cfg.scheme)?;
    let image =
        bscramble_core::codec::decode_image(&bytes).with_context(|| format!("decoding {}", args.input.display()))?;
    let plain = decrypt_image(&image, &keys, &cfg).context("decrypting")?;
    let jpeg = is_jpeg_path(&args.output).then_some((DECRYPTED_JPEG_QUALITY, Subsampling::S444));
    write_image(&args.output, &plain, jpeg, None)?;
    println!(
        "{} scheme, {}x{} blocks: wrote {}",
        cfg.scheme,
        cfg.block_w,
        cfg.block_h,
        args.output.display()
    );
    Ok(())
}

pub fn jpeg_roundtrip(args: &JpegRoundtripArgs) -> Result<()> {
    let image = read_image(&args.input)?;
    let bytes = encode_jpeg(&image, &JpegParams::for_image(&image, args.quality, args.subsampling))?;
    if let Some(out) = &args.output {
        write_atomic(out, &bytes)?;
    }
    let (decoded, info) = decode_jpeg(&bytes)?;
    let report = json!({
        "bytes": bytes.len(),
        "quality": args.quality,
        "estimated_quality": info.estimated_quality,
        "subsampling": info.subsampling().map(|s| s.to_string()),
        "psnr_db": psnr(&image, &decoded)?,
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn policy_from(provider: Option<Provider>, rule: &Option<FacebookQfRule>, downscale: bool) -> SnsPolicy {
    SnsPolicy {
        provider: provider.unwrap_or(Provider::Twitter),
        facebook_rule: rule.clone().unwrap_or_default(),
        downscale,
    }
}

pub fn sns_sim(args: &SnsSimArgs) -> Result<()> {
    let upload = read(&args.input)?;
    if !is_jpeg(&upload) {
        anyhow::bail!("{} is not a JPEG file", args.input.display());
    }
    let p = &args.policy;
    let policy = policy_from(p.provider, &p.facebook_qf_rule, p.downscale);
    let info = read_stream_info(&upload)?;
    let (download, decision) = simulate(&policy, &upload)?;
    write_atomic(&args.output, &download)?;
    let report = json!({
        "provider": policy.provider.id(),
        "upload_quality": info.estimated_quality,
        "upload_subsampling": info.subsampling().map(|s| s.to_string()),
        "decision": decision,
        "upload_bytes": upload.len(),
        "download_bytes": download.len(),
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn load_corpus(cfg: &ExperimentConfig) -> Result<Vec<(String, RasterImage)>> {
    let paths = expand_inputs(&cfg.inputs)?;
    paths
        .par_iter()
        .map(|p| {
            let mut img = read_image(p)?;
            if cfg.crop {
                img = img.crop_to_blocks(CROP_UNIT, CROP_UNIT)?;
            }
            Ok((image_id(p), img))
        })
        .collect()
}

fn seeded_master(seed: u64) -> SecretKey {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut bytes = [0u8; 32];
    rng.fill_bytes(&mut bytes);
    SecretKey::from_bytes(&bytes).expect("32 bytes")
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    tool_version: &'a str,
    schema_version: u32,
    config: &'a ExperimentConfig,
    images: Vec<&'a str>,
    files: Vec<&'a str>,
}

pub fn evaluate(args: &ExperimentArgs) -> Result<()> {
    let cfg = ExperimentConfig::resolve(args)?;
    let corpus = load_corpus(&cfg)?;
    let master = match &cfg.key {
        Some(path) => load_master(path)?,
        None => seeded_master(cfg.seed),
    };
    let rows: Vec<EvaluationRow> = corpus
        .par_iter()
        .map(|(id, img)| {
            evaluate_image(id, img, &master, &cfg.qualities, &cfg.variants, &cfg.policy)
                .with_context(|| format!("image {id}"))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let means = mean_psnr(&rows);

    let mut files = vec!["evaluation.csv", "mean_psnr.csv"];
    write_csv(&cfg.out_dir.join("evaluation.csv"), &rows)?;
    write_csv(&cfg.out_dir.join("mean_psnr.csv"), &means)?;
    if cfg.svg {
        write_atomic(&cfg.out_dir.join("mean_psnr.svg"), mean_psnr_svg(&means).as_bytes())?;
        files.push("mean_psnr.svg");
    }
    write_json(
        &cfg.out_dir.join("manifest.json"),
        &Manifest {
            command: "evaluate",
            tool_version: env!("CARGO_PKG_VERSION"),
            schema_version: EVALUATION_SCHEMA_VERSION,
            config: &cfg,
            images: corpus.iter().map(|(id, _)| id.as_str()).collect(),
            files,
        },
    )?;
    println!(
        "{} images, {} rows written to {}",
        corpus.len(),
        rows.len(),
        cfg.out_dir.display()
    );
    Ok(())
}

pub fn attack(args: &ExperimentArgs) -> Result<()> {
    let cfg = ExperimentConfig::resolve(args)?;
    let corpus = load_corpus(&cfg)?;
    let mut rows = Vec::new();
    for cipher in cfg.attack_configs() {
        let keys = keysets_from_seed(cfg.seed, cfg.trials, cipher.scheme);
        let mut scheme_rows = Vec::with_capacity(corpus.len());
        for (id, img) in &corpus {
            let report = attack_trial_protocol(img, &keys, &cipher, cfg.mode).with_context(|| format!("image {id}"))?;
            scheme_rows.push(AttackRow::from_report(id, &cipher, &report));
        }
        let mean = AttackRow::mean(&scheme_rows).expect("corpus is not empty");
        println!(
            "{}-{} n = {}: Dc {:.4} Nc {:.4} Lc {:.4}",
            cipher.scheme, cipher.block_w, mean.n, mean.dc, mean.nc, mean.lc
        );
        rows.extend(scheme_rows);
        rows.push(mean);
    }
    write_csv(&cfg.out_dir.join("attack.csv"), &rows)?;
    write_json(
        &cfg.out_dir.join("manifest.json"),
        &Manifest {
            command: "attack",
            tool_version: env!("CARGO_PKG_VERSION"),
            schema_version: ATTACK_SCHEMA_VERSION,
            config: &cfg,
            images: corpus.iter().map(|(id, _)| id.as_str()).collect(),
            files: vec!["attack.csv"],
        },
    )?;
    println!("wrote {}", cfg.out_dir.join("attack.csv").display());
    Ok(())
}
