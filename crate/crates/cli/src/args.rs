use std::path::PathBuf;

use bscramble_core::attack::SolverMode;
use bscramble_core::cipher::Orientation;
use bscramble_core::codec::Subsampling;
use bscramble_core::experiment::Variant;
use bscramble_core::keystream::Scheme;
use bscramble_core::sns::{FacebookQfRule, Provider};
use clap::{Args, Parser, Subcommand};

/// Block-scrambling image encryption for encryption-then-compression.
#[derive(Parser, Debug)]
#[command(name = "bscramble", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a fresh random 32-byte key.
    Keygen(KeygenArgs),
    /// Encrypt an image and write a metadata sidecar next to it.
    Encrypt(EncryptArgs),
    /// Decrypt an image using its sidecar, embedded metadata or flags.
    Decrypt(DecryptArgs),
    /// JPEG-encode an image, decode it again and report the PSNR.
    JpegRoundtrip(JpegRoundtripArgs),
    /// Pass a JPEG through a simulated social network upload.
    SnsSim(SnsSimArgs),
    /// PSNR after upload and download for every variant and quality.
    Evaluate(ExperimentArgs),
    /// Jigsaw-solver attack on encrypted images.
    Attack(ExperimentArgs),
}

#[derive(Args, Debug)]
pub struct KeygenArgs {
    #[arg(short, long, value_name = "FILE")]
    pub out: PathBuf,

    /// Write 64 hex digits and a newline instead of raw bytes.
    #[arg(long)]
    pub hex: bool,

    /// Replace an existing file.
    #[arg(long)]
    pub force: bool,
}

/// Where the key material comes from.
#[derive(Args, Debug, Default)]
pub struct KeyArgs {
    /// Master key file (32 raw bytes or 64 hex digits).
    #[arg(short, long, value_name = "FILE", conflicts_with = "subkeys")]
    pub key: Option<PathBuf>,

    /// Four subkey files, in the order permutation, rotation/flip,
    /// negative-positive, color shuffle.
    #[arg(long, num_args = 4, value_names = ["K1", "K2", "K3", "K4"])]
    pub subkeys: Option<Vec<PathBuf>>,
}

#[derive(Args, Debug, Default)]
pub struct CipherArgs {
    #[arg(long)]
    pub scheme: Option<Scheme>,

    /// Square block side in pixels.
    #[arg(long, value_name = "PIXELS")]
    pub block_size: Option<usize>,

    /// Stacking of the color planes in the grayscale composite.
    #[arg(long)]
    pub orientation: Option<Orientation>,
}

#[derive(Args, Debug)]
pub struct EncryptArgs {
    #[arg(short, long, value_name = "FILE")]
    pub input: PathBuf,

    /// Output image; `.jpg` or `.jpeg` writes JPEG, anything else PNG.
    #[arg(short, long, value_name = "FILE")]
    pub output: PathBuf,

    #[command(flatten)]
    pub key: KeyArgs,

    #[command(flatten)]
    pub cipher: CipherArgs,

    /// Crop to a whole number of blocks instead of rejecting the image.
    #[arg(long)]
    pub crop: bool,

    /// JPEG quality for JPEG output.
    #[arg(long, default_value_t = 95, value_parser = clap::value_parser!(u8).range(1..=100))]
    pub quality: u8,

    /// JPEG chroma sampling for color output.
    #[arg(long, default_value = "444")]
    pub subsampling: Subsampling,
}

#[derive(Args, Debug)]
pub struct DecryptArgs {
    #[arg(short, long, value_name = "FILE")]
    pub input: PathBuf,

    /// Output image; `.jpg` or `.jpeg` writes JPEG at quality 95, anything
    /// else PNG.
    #[arg(short, long, value_name = "FILE")]
    pub output: PathBuf,

    #[command(flatten)]
    pub key: KeyArgs,

    /// Metadata sidecar; defaults to `<input>.json` when present.
    #[arg(long, value_name = "FILE")]
    pub metadata: Option<PathBuf>,

    /// Settings used only when no metadata is found.
    #[command(flatten)]
    pub cipher: CipherArgs,
}

#[derive(Args, Debug)]
pub struct JpegRoundtripArgs {
    #[arg(short, long, value_name = "FILE")]
    pub input: PathBuf,

    /// Where to keep the JPEG file.
    #[arg(short, long, value_name = "FILE")]
    pub output: Option<PathBuf>,

    #[arg(long, default_value_t = 95, value_parser = clap::value_parser!(u8).range(1..=100))]
    pub quality: u8,

    #[arg(long, default_value = "444")]
    pub subsampling: Subsampling,
}

#[derive(Args, Debug, Default)]
pub struct PolicyArgs {
    /// twitter, facebook-hq or facebook-lq.
    #[arg(long)]
    pub provider: Option<Provider>,

    /// Facebook download quality, `const:<n>` with n in 71..=85.
    #[arg(long, value_name = "RULE")]
    pub facebook_qf_rule: Option<FacebookQfRule>,

    /// Downscale oversized uploads instead of rejecting them.
    #[arg(long)]
    pub downscale: bool,
}

#[derive(Args, Debug)]
pub struct SnsSimArgs {
    /// Uploaded JPEG.
    #[arg(short, long, value_name = "FILE")]
    pub input: PathBuf,

    /// Downloaded JPEG.
    #[arg(short, long, value_name = "FILE")]
    pub output: PathBuf,

    #[command(flatten)]
    pub policy: PolicyArgs,
}

#[derive(Args, Debug, Default)]
pub struct ExperimentArgs {
    /// TOML or JSON file with experiment settings; flags take precedence.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Image files, directories or glob patterns.
    #[arg(value_name = "INPUT")]
    pub inputs: Vec<String>,

    /// Directory for the CSV reports and manifest.
    #[arg(short, long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,

    /// Upload qualities, as `70-100`, `95` or `70,80,90`.
    #[arg(long, value_name = "LIST")]
    pub qualities: Option<String>,

    /// Comma-separated pipeline variants (evaluate).
    #[arg(long, value_delimiter = ',')]
    pub variants: Option<Vec<Variant>>,

    #[command(flatten)]
    pub policy: PolicyArgs,

    #[command(flatten)]
    pub cipher: CipherArgs,

    /// Transformations the solver searches over (attack).
    #[arg(long)]
    pub mode: Option<SolverMode>,

    /// Keys tried per image (attack).
    #[arg(long)]
    pub trials: Option<usize>,

    /// Seed for all key material.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Master key file for evaluate; overrides the seed.
    #[arg(short, long, value_name = "FILE")]
    pub key: Option<PathBuf>,

    /// Crop inputs to a whole number of blocks.
    #[arg(long)]
    pub crop: bool,

    /// Also draw the mean PSNR curves as SVG (evaluate).
    #[arg(long)]
    pub svg: bool,
}
