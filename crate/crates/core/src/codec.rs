//! JPEG and PNG carriers.
//!
//! Encoding and decoding are delegated to `jpeg-encoder` and `jpeg-decoder`.
//! This module adds what the experiments need on top: IJG quality and
//! chroma subsampling control, frame-header inspection, quality estimation
//! from the quantization tables, and comment segments for metadata.

use crate::raster::RasterImage;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Chroma subsampling of a color JPEG.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Subsampling {
    #[serde(rename = "4:4:4")]
    S444,
    #[serde(rename = "4:2:0")]
    S420,
}

impl std::fmt::Display for Subsampling {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Subsampling::S444 => "4:4:4",
            Subsampling::S420 => "4:2:0",
        })
    }
}

impl std::str::FromStr for Subsampling {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "4:4:4" | "444" => Ok(Subsampling::S444),
            "4:2:0" | "420" => Ok(Subsampling::S420),
            other => Err(format!("unknown subsampling {other:?} (use 444 or 420)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct JpegParams {
    /// IJG quality factor in `[1, 100]`.
    pub quality: u8,
    /// Ignored for single-channel images.
    pub subsampling: Subsampling,
    /// Requires a single-channel raster; no color conversion is done here.
    pub grayscale: bool,
}

impl JpegParams {
    pub fn color(quality: u8, subsampling: Subsampling) -> Self {
        Self {
            quality,
            subsampling,
            grayscale: false,
        }
    }

    pub fn grayscale(quality: u8) -> Self {
        Self {
            quality,
            subsampling: Subsampling::S444,
            grayscale: true,
        }
    }

    /// Parameters matching the raster's channel count.
    pub fn for_image(image: &RasterImage, quality: u8, subsampling: Subsampling) -> Self {
        if image.channels() == 1 {
            Self::grayscale(quality)
        } else {
            Self::color(quality, subsampling)
        }
    }
}

pub fn check_quality(quality: u8) -> Result<()> {
    if !(1..=100).contains(&quality) {
        return Err(Error::InvalidQuality(quality));
    }
    Ok(())
}

/// Encodes a baseline JPEG. Single-channel rasters produce one-component
/// streams, which carry no chroma and are therefore never subsampled.
pub fn encode_jpeg(image: &RasterImage, params: &JpegParams) -> Result<Vec<u8>> {
    check_quality(params.quality)?;
    let (w, h) = (image.width(), image.height());
    if w > u16::MAX as usize || h > u16::MAX as usize {
        return Err(Error::InvalidImage(format!("{w}x{h} exceeds JPEG dimension limits")));
    }
    let color_type = match (image.channels(), params.grayscale) {
        (1, _) => jpeg_encoder::ColorType::Luma,
        (3, false) => jpeg_encoder::ColorType::Rgb,
        (found, _) => return Err(Error::ChannelCount { expected: 1, found }),
    };
    let mut out = Vec::new();
    let mut encoder = jpeg_encoder::Encoder::new(&mut out, params.quality);
    encoder.set_sampling_factor(match params.subsampling {
        Subsampling::S444 => jpeg_encoder::SamplingFactor::R_4_4_4,
        Subsampling::S420 => jpeg_encoder::SamplingFactor::R_4_2_0,
    });
    encoder.encode(image.samples(), w as u16, h as u16, color_type)?;
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ComponentInfo {
    pub id: u8,
    pub h_sampling: u8,
    pub v_sampling: u8,
    pub quant_table: u8,
}

/// Properties read from the stream headers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JpegStreamInfo {
    pub width: usize,
    pub height: usize,
    pub components: Vec<ComponentInfo>,
    /// Quantization tables by destination id, in natural (row-major) order.
    pub quant_tables: [Option<[u16; 64]>; 4],
    pub progressive: bool,
    pub comments: Vec<Vec<u8>>,
    pub estimated_quality: Option<u8>,
}

impl JpegStreamInfo {
    pub fn component_count(&self) -> usize {
        self.components.len()
    }

    /// `Some` for three-component streams with 4:4:4 or 4:2:0 factors.
    pub fn subsampling(&self) -> Option<Subsampling> {
        let [y, cb, cr] = self.components.as_slice() else {
            return None;
        };
        let chroma_unit = [cb, cr].iter().all(|c| c.h_sampling == 1 && c.v_sampling == 1);
        match (y.h_sampling, y.v_sampling, chroma_unit) {
            (1, 1, true) => Some(Subsampling::S444),
            (2, 2, true) => Some(Subsampling::S420),
            _ => None,
        }
    }

    /// Pixel size of one minimum coded unit.
    pub fn mcu_size(&self) -> (usize, usize) {
        if self.components.len() == 1 {
            return (8, 8);
        }
        let h = self.components.iter().map(|c| c.h_sampling).max().unwrap_or(1) as usize;
        let v = self.components.iter().map(|c| c.v_sampling).max().unwrap_or(1) as usize;
        (8 * h, 8 * v)
    }

    fn table_for(&self, component: usize) -> Option<&[u16; 64]> {
        let c = self.components.get(component)?;
        self.quant_tables.get(c.quant_table as usize)?.as_ref()
    }
}

/// Position of the `k`-th zig-zag coefficient in natural order.
const ZIGZAG: [usize; 64] = [
    0, 1, 8, 16, 9, 2, 3, 10, 17, 24, 32, 25, 18, 11, 4, 5, 12, 19, 26, 33, 40, 48, 41, 34, 27, 20, 13, 6, 7, 14, 21,
    28, 35, 42, 49, 56, 57, 50, 43, 36, 29, 22, 15, 23, 30, 37, 44, 51, 58, 59, 52, 45, 38, 31, 39, 46, 53, 60, 61, 54,
    47, 55, 62, 63,
];

struct Segments<'a> {
    data: &'a [u8],
    pos: usize,
    done: bool,
}

impl<'a> Iterator for Segments<'a> {
    type Item = Result<(u8, &'a [u8])>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let d = self.data;
        while self.pos < d.len() && d[self.pos] != 0xFF {
            self.pos += 1;
        }
        while self.pos < d.len() && d[self.pos] == 0xFF {
            self.pos += 1;
        }
        if self.pos >= d.len() {
            self.done = true;
            return Some(Err(Error::MalformedJpeg("no start-of-scan marker".into())));
        }
        let marker = d[self.pos];
        self.pos += 1;
        if marker == 0xD8 || (0xD0..=0xD7).contains(&marker) || marker == 0x01 {
            return Some(Ok((marker, &[])));
        }
        if self.pos + 2 > d.len() {
            self.done = true;
            return Some(Err(Error::MalformedJpeg("truncated segment length".into())));
        }
        let len = u16::from_be_bytes([d[self.pos], d[self.pos + 1]]) as usize;
        if len < 2 || self.pos + len > d.len() {
            self.done = true;
            return Some(Err(Error::MalformedJpeg(format!(
                "segment 0xFF{marker:02X} overruns the stream"
            ))));
        }
        let payload = &d[self.pos + 2..self.pos + len];
        self.pos += len;
        if marker == 0xDA || marker == 0xD9 {
            self.done = true;
        }
        Some(Ok((marker, payload)))
    }
}

fn segments(data: &[u8]) -> Result<Segments<'_>> {
    if data.len() < 4 || data[0] != 0xFF || data[1] != 0xD8 {
        return Err(Error::MalformedJpeg("missing SOI marker".into()));
    }
    Ok(Segments {
        data,
        pos: 2,
        done: false,
    })
}

fn parse_dqt(payload: &[u8], tables: &mut [Option<[u16; 64]>; 4]) -> Result<()> {
    let mut rest = payload;
    while !rest.is_empty() {
        let precision = rest[0] >> 4;
        let id = (rest[0] & 0x0F) as usize;
        let size = if precision == 0 { 64 } else { 128 };
        if id > 3 || rest.len() < 1 + size {
            return Err(Error::MalformedJpeg("bad quantization table segment".into()));
        }
        let mut table = [0u16; 64];
        for (k, &pos) in ZIGZAG.iter().enumerate() {
            table[pos] = if precision == 0 {
                rest[1 + k] as u16
            } else {
                u16::from_be_bytes([rest[1 + 2 * k], rest[2 + 2 * k]])
            };
        }
        tables[id] = Some(table);
        rest = &rest[1 + size..];
    }
    Ok(())
}

/// Reads frame and table headers without decoding pixels.
pub fn read_stream_info(bytes: &[u8]) -> Result<JpegStreamInfo> {
    let mut info = JpegStreamInfo {
        width: 0,
        height: 0,
        components: Vec::new(),
        quant_tables: [None; 4],
        progressive: false,
        comments: Vec::new(),
        estimated_quality: None,
    };
    let mut saw_frame = false;
    let mut saw_scan = false;
    for seg in segments(bytes)? {
        let (marker, payload) = seg?;
        match marker {
            0xDB => parse_dqt(payload, &mut info.quant_tables)?,
            0xFE => info.comments.push(payload.to_vec()),
            0xC0..=0xCF if marker != 0xC4 && marker != 0xC8 && marker != 0xCC => {
                if payload.len() < 6 {
                    return Err(Error::MalformedJpeg("short frame header".into()));
                }
                info.height = u16::from_be_bytes([payload[1], payload[2]]) as usize;
                info.width = u16::from_be_bytes([payload[3], payload[4]]) as usize;
                let count = payload[5] as usize;
                if payload.len() < 6 + 3 * count {
                    return Err(Error::MalformedJpeg("short frame header".into()));
                }
                info.components = payload[6..6 + 3 * count]
                    .chunks_exact(3)
                    .map(|c| ComponentInfo {
                        id: c[0],
                        h_sampling: c[1] >> 4,
                        v_sampling: c[1] & 0x0F,
                        quant_table: c[2],
                    })
                    .collect();
                info.progressive = matches!(marker, 0xC2 | 0xC6 | 0xCA | 0xCE);
                saw_frame = true;
            }
            0xDA => saw_scan = true,
            _ => {}
        }
    }
    if !saw_frame || !saw_scan {
        return Err(Error::MalformedJpeg("missing frame header or scan".into()));
    }
    if info.component_count() != 1 && info.component_count() != 3 {
        return Err(Error::MalformedJpeg(format!(
            "{} components; only grayscale and YCbCr are supported",
            info.component_count()
        )));
    }
    info.estimated_quality = estimate_quality(&info);
    Ok(info)
}

/// Decodes pixels and reads the stream headers.
pub fn decode_jpeg(bytes: &[u8]) -> Result<(RasterImage, JpegStreamInfo)> {
    let info = read_stream_info(bytes)?;
    let mut decoder = jpeg_decoder::Decoder::new(bytes);
    let pixels = decoder.decode()?;
    let meta = decoder
        .info()
        .ok_or_else(|| Error::MalformedJpeg("decoder returned no frame info".into()))?;
    let channels = match meta.pixel_format {
        jpeg_decoder::PixelFormat::L8 => 1,
        jpeg_decoder::PixelFormat::RGB24 => 3,
        other => {
            return Err(Error::MalformedJpeg(format!("unsupported pixel format {other:?}")));
        }
    };
    let image = RasterImage::new(meta.width as usize, meta.height as usize, channels, pixels)?;
    Ok((image, info))
}

/// Annex K luminance table, natural order.
pub const BASE_LUMA_TABLE: [u16; 64] = [
    16, 11, 10, 16, 24, 40, 51, 61, 12, 12, 14, 19, 26, 58, 60, 55, 14, 13, 16, 24, 40, 57, 69, 56, 14, 17, 22, 29, 51,
    87, 80, 62, 18, 22, 37, 56, 68, 109, 103, 77, 24, 35, 55, 64, 81, 104, 113, 92, 49, 64, 78, 87, 103, 121, 120, 101,
    72, 92, 95, 98, 112, 100, 103, 99,
];

/// Annex K chrominance table, natural order.
pub const BASE_CHROMA_TABLE: [u16; 64] = [
    17, 18, 24, 47, 99, 99, 99, 99, 18, 21, 26, 66, 99, 99, 99, 99, 24, 26, 56, 99, 99, 99, 99, 99, 47, 66, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99,
];

/// IJG scaling of a base table for `quality`, clamped to baseline range.
pub fn ijg_table(base: &[u16; 64], quality: u8) -> [u16; 64] {
    let q = quality.clamp(1, 100) as u32;
    let scale = if q < 50 { 5000 / q } else { 200 - 2 * q };
    base.map(|v| ((v as u32 * scale + 50) / 100).clamp(1, 255) as u16)
}

/// Largest per-coefficient deviation from the IJG tables still reported
/// as a match (covers encoders that round the scaling differently).
const QUALITY_MATCH_TOLERANCE: u16 = 1;

/// Nearest IJG quality whose scaled Annex K tables reproduce the stream's
/// tables, or `None` for tables that are not IJG-scaled. Exact matches win,
/// with ties going to the lowest quality.
pub fn estimate_quality(info: &JpegStreamInfo) -> Option<u8> {
    let luma = info.table_for(0)?;
    let chroma = if info.component_count() == 3 {
        Some(info.table_for(1)?)
    } else {
        None
    };
    let mut best: Option<(u32, u16, u8)> = None;
    for q in 1..=100u8 {
        let mut tables = vec![(luma, ijg_table(&BASE_LUMA_TABLE, q))];
        if let Some(c) = chroma {
            tables.push((c, ijg_table(&BASE_CHROMA_TABLE, q)));
        }
        let (mut total, mut worst) = (0u32, 0u16);
        for (actual, expected) in &tables {
            for (a, e) in actual.iter().zip(expected.iter()) {
                let d = a.abs_diff(*e);
                total += d as u32;
                worst = worst.max(d);
            }
        }
        if total == 0 {
            return Some(q);
        }
        if worst <= QUALITY_MATCH_TOLERANCE && best.is_none_or(|(t, _, _)| total < t) {
            best = Some((total, worst, q));
        }
    }
    best.map(|(_, _, q)| q)
}

/// Inserts a COM segment right after SOI (and after a leading APP0).
pub fn insert_comment(jpeg: &[u8], comment: &[u8]) -> Result<Vec<u8>> {
    if comment.len() > u16::MAX as usize - 2 {
        return Err(Error::InvalidImage("comment too long for one segment".into()));
    }
    let mut iter = segments(jpeg)?;
    let mut insert_at = 2;
    if let Some(Ok((0xE0, _))) = iter.next() {
        insert_at = iter.pos;
    }
    let mut out = Vec::with_capacity(jpeg.len() + comment.len() + 4);
    out.extend_from_slice(&jpeg[..insert_at]);
    out.extend_from_slice(&[0xFF, 0xFE]);
    out.extend_from_slice(&((comment.len() + 2) as u16).to_be_bytes());
    out.extend_from_slice(comment);
    out.extend_from_slice(&jpeg[insert_at..]);
    Ok(out)
}

pub fn is_jpeg(bytes: &[u8]) -> bool {
    bytes.starts_with(&[0xFF, 0xD8, 0xFF])
}

pub fn encode_png(image: &RasterImage) -> Result<Vec<u8>> {
    use image::ImageEncoder;
    let color = match image.channels() {
        1 => image::ExtendedColorType::L8,
        _ => image::ExtendedColorType::Rgb8,
    };
    let mut out = Vec::new();
    image::codecs::png::PngEncoder::new(&mut out).write_image(
        image.samples(),
        image.width() as u32,
        image.height() as u32,
        color,
    )?;
    Ok(out)
}

/// Decodes an 8-bit grayscale or RGB PNG. Other layouts are rejected
/// rather than converted.
pub fn decode_png(bytes: &[u8]) -> Result<RasterImage> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        image::DynamicImage::ImageLuma8(buf) => RasterImage::new(w, h, 1, buf.into_raw()),
        image::DynamicImage::ImageRgb8(buf) => RasterImage::new(w, h, 3, buf.into_raw()),
        other => Err(Error::InvalidImage(format!(
            "unsupported PNG layout {:?}; expected 8-bit gray or RGB",
            other.color()
        ))),
    }
}

/// Decodes PNG or JPEG, picked by the leading magic bytes.
pub fn decode_image(bytes: &[u8]) -> Result<RasterImage> {
    if is_jpeg(bytes) {
        Ok(decode_jpeg(bytes)?.0)
    } else {
        decode_png(bytes)
    }
}
