use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bscramble_core::codec::{decode_png, encode_jpeg, encode_png, JpegParams, Subsampling};
use bscramble_core::RasterImage;

fn bscramble(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bscramble"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = bscramble(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    bscramble(args).status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn photo(w: usize, h: usize, salt: usize) -> RasterImage {
    RasterImage::from_fn(w, h, 3, |x, y, c| {
        let v = 128.0 + 70.0 * ((x as f64 * 0.11 + (c + salt) as f64).sin() * (y as f64 * 0.07).cos());
        v as u8
    })
    .unwrap()
}

fn write_png(dir: &Path, name: &str, img: &RasterImage) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, encode_png(img).unwrap()).unwrap();
    p
}

fn keygen(dir: &Path, name: &str) -> PathBuf {
    let p = dir.join(name);
    ok(&["keygen", "--out", s(&p)]);
    p
}

#[test]
fn keygen_writes_fresh_keys() {
    let dir = tempfile::tempdir().unwrap();
    let a = keygen(dir.path(), "a.key");
    let b = keygen(dir.path(), "b.key");
    let (ka, kb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ka.len(), 32);
    assert_ne!(ka, kb);

    let h = dir.path().join("h.key");
    ok(&["keygen", "--out", s(&h), "--hex"]);
    let text = std::fs::read_to_string(&h).unwrap();
    assert_eq!(text.len(), 65);
    assert!(text.ends_with('\n'));
    assert!(text[..64].chars().all(|c| c.is_ascii_hexdigit()));

    assert_eq!(code(&["keygen", "--out", s(&a)]), 1);
    assert_eq!(std::fs::read(&a).unwrap(), ka);
    ok(&["keygen", "--out", s(&a), "--force"]);
}

#[test]
fn png_round_trip_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let key = keygen(dir.path(), "k");
    let img = photo(96, 64, 0);
    let input = write_png(dir.path(), "in.png", &img);
    for scheme in ["conventional", "grayscale"] {
        let enc = dir.path().join(format!("{scheme}.png"));
        let dec = dir.path().join(format!("{scheme}-dec.png"));
        ok(&[
            "encrypt",
            "-i",
            s(&input),
            "-o",
            s(&enc),
            "-k",
            s(&key),
            "--scheme",
            scheme,
        ]);
        assert!(dir.path().join(format!("{scheme}.png.json")).is_file());
        let scrambled = decode_png(&std::fs::read(&enc).unwrap()).unwrap();
        assert_ne!(scrambled, img);
        ok(&["decrypt", "-i", s(&enc), "-o", s(&dec), "-k", s(&key)]);
        assert_eq!(decode_png(&std::fs::read(&dec).unwrap()).unwrap(), img);
    }
}

#[test]
fn block_counts_at_full_size() {
    let dir = tempfile::tempdir().unwrap();
    let key = keygen(dir.path(), "k");
    let input = write_png(dir.path(), "in.png", &photo(672, 480, 1));
    let out = dir.path().join("e.png");
    let conv = ok(&[
        "encrypt",
        "-i",
        s(&input),
        "-o",
        s(&out),
        "-k",
        s(&key),
        "--scheme",
        "conventional",
    ]);
    assert!(conv.contains("n = 1260"), "{conv}");
    let gray = ok(&[
        "encrypt",
        "-i",
        s(&input),
        "-o",
        s(&out),
        "-k",
        s(&key),
        "--scheme",
        "grayscale",
    ]);
    assert!(gray.contains("n = 15120"), "{gray}");
    let composite = decode_png(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(
        (composite.width(), composite.height(), composite.channels()),
        (672, 1440, 1)
    );
}

#[test]
fn jpeg_carries_its_own_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let key = keygen(dir.path(), "k");
    let input = write_png(dir.path(), "in.png", &photo(64, 48, 2));
    let enc = dir.path().join("e.jpg");
    ok(&[
        "encrypt",
        "-i",
        s(&input),
        "-o",
        s(&enc),
        "-k",
        s(&key),
        "--block-size",
        "16",
        "--quality",
        "100",
    ]);
    std::fs::remove_file(dir.path().join("e.jpg.json")).unwrap();
    let dec = dir.path().join("d.png");
    ok(&["decrypt", "-i", s(&enc), "-o", s(&dec), "-k", s(&key)]);
    let back = decode_png(&std::fs::read(&dec).unwrap()).unwrap();
    assert_eq!((back.width(), back.height(), back.channels()), (64, 48, 3));
}

#[test]
fn decrypt_falls_back_to_flags() {
    let dir = tempfile::tempdir().unwrap();
    let key = keygen(dir.path(), "k");
    let img = photo(64, 32, 3);
    let input = write_png(dir.path(), "in.png", &img);
    let enc = dir.path().join("e.png");
    ok(&[
        "encrypt",
        "-i",
        s(&input),
        "-o",
        s(&enc),
        "-k",
        s(&key),
        "--scheme",
        "conventional",
    ]);
    std::fs::remove_file(dir.path().join("e.png.json")).unwrap();
    let dec = dir.path().join("d.png");
    assert_eq!(code(&["decrypt", "-i", s(&enc), "-o", s(&dec), "-k", s(&key)]), 1);
    ok(&[
        "decrypt",
        "-i",
        s(&enc),
        "-o",
        s(&dec),
        "-k",
        s(&key),
        "--scheme",
        "conventional",
    ]);
    assert_eq!(decode_png(&std::fs::read(&dec).unwrap()).unwrap(), img);
}

#[test]
fn four_subkeys_replace_the_master() {
    let dir = tempfile::tempdir().unwrap();
    let img = photo(32, 32, 4);
    let input = write_png(dir.path(), "in.png", &img);
    let subkeys: Vec<PathBuf> = (1..=4).map(|i| keygen(dir.path(), &format!("k{i}"))).collect();
    let sub: Vec<&str> = subkeys.iter().map(|p| s(p)).collect();
    let enc = dir.path().join("e.png");
    let dec = dir.path().join("d.png");
    let mut args = vec!["encrypt", "-i", s(&input), "-o", s(&enc), "--subkeys"];
    args.extend(&sub);
    ok(&args);
    let mut args = vec!["decrypt", "-i", s(&enc), "-o", s(&dec), "--subkeys"];
    args.extend(&sub);
    ok(&args);
    assert_eq!(decode_png(&std::fs::read(&dec).unwrap()).unwrap(), img);
}

#[test]
fn indivisible_input_needs_crop() {
    let dir = tempfile::tempdir().unwrap();
    let key = keygen(dir.path(), "k");
    let input = write_png(dir.path(), "in.png", &photo(70, 50, 5));
    let enc = dir.path().join("e.png");
    let out = bscramble(&["encrypt", "-i", s(&input), "-o", s(&enc), "-k", s(&key)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--crop"));
    ok(&["encrypt", "-i", s(&input), "-o", s(&enc), "-k", s(&key), "--crop"]);
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("e.png.json")).unwrap()).unwrap();
    assert_eq!(
        (meta["original_width"].as_u64(), meta["original_height"].as_u64()),
        (Some(64), Some(48))
    );
}

#[test]
fn exit_codes() {
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["frobnicate"]), 1);
    assert_eq!(code(&["encrypt", "--input"]), 1);
    assert_eq!(code(&["evaluate", "--qualities", "0-5", "x.png", "-o", "out"]), 1);
    let dir = tempfile::tempdir().unwrap();
    let key = keygen(dir.path(), "k");
    let missing = dir.path().join("missing.png");
    let out = dir.path().join("o.png");
    assert_eq!(code(&["encrypt", "-i", s(&missing), "-o", s(&out), "-k", s(&key)]), 2);
    let input = write_png(dir.path(), "in.png", &photo(32, 32, 0));
    assert_eq!(code(&["encrypt", "-i", s(&input), "-o", s(&out)]), 1);
}

#[test]
fn jpeg_roundtrip_reports_quality() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_png(dir.path(), "in.png", &photo(48, 48, 6));
    let jpg = dir.path().join("o.jpg");
    let out = ok(&[
        "jpeg-roundtrip",
        "-i",
        s(&input),
        "-o",
        s(&jpg),
        "--quality",
        "77",
        "--subsampling",
        "420",
    ]);
    let report: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(report["estimated_quality"], 77);
    assert_eq!(report["subsampling"], "4:2:0");
    assert!(report["psnr_db"].as_f64().unwrap() > 25.0);
    assert!(jpg.is_file());
}

#[test]
fn sns_sim_passes_low_quality_through_twitter() {
    let dir = tempfile::tempdir().unwrap();
    let img = photo(48, 32, 7);
    let up = dir.path().join("up.jpg");
    std::fs::write(
        &up,
        encode_jpeg(&img, &JpegParams::color(80, Subsampling::S420)).unwrap(),
    )
    .unwrap();
    let down = dir.path().join("down.jpg");
    let out = ok(&["sns-sim", "-i", s(&up), "-o", s(&down), "--provider", "twitter"]);
    assert_eq!(std::fs::read(&up).unwrap(), std::fs::read(&down).unwrap());
    let report: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(report["decision"]["recompressed"], false);

    let out = ok(&[
        "sns-sim",
        "-i",
        s(&up),
        "-o",
        s(&down),
        "--provider",
        "facebook-hq",
        "--facebook-qf-rule",
        "const:75",
    ]);
    let report: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(report["decision"]["output_quality"], 75);
    assert_eq!(
        code(&[
            "sns-sim",
            "-i",
            s(&up),
            "-o",
            s(&down),
            "--facebook-qf-rule",
            "const:99"
        ]),
        1
    );
}

fn corpus(dir: &Path) -> PathBuf {
    let images = dir.join("images");
    std::fs::create_dir(&images).unwrap();
    write_png(&images, "one.png", &photo(64, 48, 0));
    write_png(&images, "two.png", &photo(64, 48, 9));
    images
}

#[test]
fn evaluate_writes_versioned_reports() {
    let dir = tempfile::tempdir().unwrap();
    let images = corpus(dir.path());
    let out = dir.path().join("report");
    ok(&[
        "evaluate",
        s(&images),
        "-o",
        s(&out),
        "--qualities",
        "94-95",
        "--provider",
        "facebook-hq",
        "--svg",
    ]);

    let rows = std::fs::read_to_string(out.join("evaluation.csv")).unwrap();
    let mut lines = rows.lines();
    assert_eq!(
        lines.next().unwrap(),
        "image_id,provider,variant,block_size,qf,recompressed,output_qf,upload_bytes,download_bytes,psnr_db"
    );
    assert_eq!(lines.count(), 2 * 2 * 4);

    let means = std::fs::read_to_string(out.join("mean_psnr.csv")).unwrap();
    assert_eq!(means.lines().next().unwrap(), "provider,variant,qf,images,mean_psnr_db");
    assert_eq!(means.lines().count(), 1 + 2 * 4);

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["schema_version"], 1);
    assert_eq!(manifest["command"], "evaluate");
    assert_eq!(manifest["images"], serde_json::json!(["one", "two"]));
    assert!(std::fs::read_to_string(out.join("mean_psnr.svg"))
        .unwrap()
        .starts_with("<svg"));
}

#[test]
fn evaluate_twitter_passthrough_matches_local_jpeg() {
    let dir = tempfile::tempdir().unwrap();
    let images = corpus(dir.path());
    let out = dir.path().join("report");
    ok(&[
        "evaluate",
        s(&images),
        "-o",
        s(&out),
        "--qualities",
        "80",
        "--variants",
        "unencrypted",
    ]);
    let mut rdr = csv::Reader::from_path(out.join("evaluation.csv")).unwrap();
    for row in rdr.records() {
        let row = row.unwrap();
        assert_eq!(&row[5], "false");
        assert_eq!(&row[6], "");
        assert_eq!(row[7], row[8]);
    }
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path());
    let cfg = dir.path().join("exp.toml");
    std::fs::write(
        &cfg,
        "inputs = [\"images/*.png\"]\nout_dir = \"from-file\"\nqualities = [90]\nvariants = [\"grayscale-8\"]\n",
    )
    .unwrap();
    ok(&["evaluate", "--config", s(&cfg)]);
    let rows = std::fs::read_to_string(dir.path().join("from-file/evaluation.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 2);

    let flag_dir = dir.path().join("from-flag");
    ok(&[
        "evaluate",
        "--config",
        s(&cfg),
        "-o",
        s(&flag_dir),
        "--qualities",
        "90,91",
    ]);
    let rows = std::fs::read_to_string(flag_dir.join("evaluation.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 4);
}

#[test]
fn attack_report_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let images = corpus(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        ok(&["attack", s(&images), "-o", s(out), "--trials", "2", "--seed", "5"]);
    }
    let report = std::fs::read_to_string(a.join("attack.csv")).unwrap();
    assert_eq!(report, std::fs::read_to_string(b.join("attack.csv")).unwrap());
    let mut lines = report.lines();
    assert_eq!(
        lines.next().unwrap(),
        "image_id,scheme,block_size,n,Dc,Nc,Lc,psnr_db,trial_count"
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2 * 3);
    assert_eq!(rows[2][0], "mean");
    assert_eq!((rows[0][1], rows[0][3]), ("conventional", "12"));
    assert_eq!((rows[3][1], rows[3][3]), ("grayscale", "144"));
    assert!(rows.iter().all(|r| r[8] == "2"));

    let c = dir.path().join("c");
    ok(&["attack", s(&images), "-o", s(&c), "--trials", "2", "--seed", "6"]);
    assert_ne!(report, std::fs::read_to_string(c.join("attack.csv")).unwrap());
}
