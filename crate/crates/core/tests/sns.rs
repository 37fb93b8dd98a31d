use bscramble_core::codec::{decode_jpeg, encode_jpeg, estimate_quality, read_stream_info, JpegParams, Subsampling};
use bscramble_core::sns::{decide, simulate, FacebookQfRule, Provider, SnsPolicy, UploadProperties, UploadSampling};
use bscramble_core::RasterImage;
use proptest::prelude::*;

fn picture(w: usize, h: usize) -> RasterImage {
    RasterImage::from_fn(w, h, 3, |x, y, c| ((x * 3 + y * 7 + c * 80) % 256) as u8).unwrap()
}

#[test]
fn grayscale_uploads_stay_single_component() {
    let img = RasterImage::from_fn(32, 48, 1, |x, y, _| (x * 4 + y) as u8).unwrap();
    let upload = encode_jpeg(&img, &JpegParams::grayscale(95)).unwrap();
    for provider in Provider::ALL {
        let (down, decision) = simulate(&SnsPolicy::new(provider), &upload).unwrap();
        assert!(decision.recompressed, "{provider}");
        let info = read_stream_info(&down).unwrap();
        assert_eq!(info.component_count(), 1);
        assert_eq!(estimate_quality(&info), Some(85));
    }
}

#[test]
fn facebook_rule_sets_the_download_quality() {
    let upload = encode_jpeg(&picture(32, 32), &JpegParams::color(90, Subsampling::S444)).unwrap();
    let policy = SnsPolicy {
        facebook_rule: "const:72".parse().unwrap(),
        ..SnsPolicy::new(Provider::FacebookLq)
    };
    let (down, decision) = simulate(&policy, &upload).unwrap();
    assert_eq!(decision.output_quality, Some(72));
    assert_eq!(estimate_quality(&read_stream_info(&down).unwrap()), Some(72));
    assert!("const:90".parse::<FacebookQfRule>().is_err());
    assert!("linear".parse::<FacebookQfRule>().is_err());
}

#[test]
fn oversized_uploads_are_rejected_or_downscaled() {
    let upload = encode_jpeg(&picture(1000, 200), &JpegParams::color(95, Subsampling::S420)).unwrap();
    let strict = SnsPolicy::new(Provider::FacebookLq);
    assert!(simulate(&strict, &upload).is_err());
    let lenient = SnsPolicy {
        downscale: true,
        ..strict
    };
    let (down, decision) = simulate(&lenient, &upload).unwrap();
    assert!(decision.resized && decision.recompressed);
    let (img, _) = decode_jpeg(&down).unwrap();
    assert_eq!(img.width().max(img.height()), Provider::FacebookLq.max_dim());
}

proptest! {
    #[test]
    fn decide_is_deterministic_and_consistent(
        provider in prop::sample::select(Provider::ALL.to_vec()),
        q in prop::option::of(1u8..=100),
        s420 in any::<bool>(),
    ) {
        let sub = if s420 { Subsampling::S420 } else { Subsampling::S444 };
        let upload = UploadProperties { width: 640, height: 480, sampling: UploadSampling::Color(sub), quality: q };
        let policy = SnsPolicy::new(provider);
        let d = decide(&policy, &upload);
        prop_assert_eq!(d, decide(&policy, &upload));
        prop_assert_eq!(d.recompressed, d.output_quality.is_some());
        prop_assert_eq!(d.recompressed, d.output_subsampling == Some(Subsampling::S420));
        prop_assert!(!d.resized);
    }
}
