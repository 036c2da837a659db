//! Radiance RGBE (`.hdr` / `.pic`) decoding and encoding, plus conversion of
//! decoded radiance to absolute luminance.
//!
//! The reader accepts flat and new-style run-length encoded scanlines in the
//! standard `-Y <h> +X <w>` orientation. The writer always emits flat
//! scanlines.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Luminous efficacy used by the Radiance toolchain, lm/W.
pub const RADIANCE_EFFICACY: f64 = 179.0;

/// Per-channel weights of the Radiance luminance conversion.
pub const RADIANCE_RGB_WEIGHTS: [f64; 3] = [0.265, 0.670, 0.065];

const FORMAT_RGBE: &str = "32-bit_rle_rgbe";

/// A decoded radiance image, row-major from the top-left pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct HdrImage {
    width: usize,
    height: usize,
    pixels: Vec<[f32; 3]>,
    /// Product of all `EXPOSURE=` header values. Pixel values have already
    /// been divided by it.
    pub exposure: f64,
    /// `KEY=VALUE` header lines in file order.
    pub header_vars: Vec<(String, String)>,
}

impl HdrImage {
    pub fn new(width: usize, height: usize, pixels: Vec<[f32; 3]>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidDimension { width, height });
        }
        if pixels.len() != width * height {
            return Err(Error::Shape(format!(
                "{} pixels supplied for a {width}x{height} image",
                pixels.len()
            )));
        }
        if let Some(bad) = pixels.iter().flatten().find(|c| !c.is_finite() || **c < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "pixel channel {bad} is not a finite non-negative radiance"
            )));
        }
        Ok(HdrImage {
            width,
            height,
            pixels,
            exposure: 1.0,
            header_vars: Vec::new(),
        })
    }

    /// Image filled with a single radiance triplet.
    pub fn uniform(width: usize, height: usize, rgb: [f32; 3]) -> Result<Self> {
        HdrImage::new(width, height, vec![rgb; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[f32; 3]] {
        &self.pixels
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        self.pixels[y * self.width + x]
    }

    /// Multiplies every channel by `k`.
    pub fn scaled(&self, k: f32) -> HdrImage {
        let mut out = self.clone();
        for px in &mut out.pixels {
            for c in px.iter_mut() {
                *c *= k;
            }
        }
        out
    }

    /// Rotates the image a quarter turn clockwise.
    pub fn rotated_cw(&self) -> HdrImage {
        let (w, h) = (self.width, self.height);
        let mut pixels = vec![[0.0; 3]; w * h];
        for y in 0..h {
            for x in 0..w {
                // new width is h; (x, y) -> (h - 1 - y, x)
                pixels[x * h + (h - 1 - y)] = self.pixels[y * w + x];
            }
        }
        HdrImage {
            width: h,
            height: w,
            pixels,
            exposure: self.exposure,
            header_vars: self.header_vars.clone(),
        }
    }
}

/// Per-pixel luminance in cd/m².
#[derive(Debug, Clone, PartialEq)]
pub struct LuminanceMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl LuminanceMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidDimension { width, height });
        }
        if values.len() != width * height {
            return Err(Error::Shape(format!(
                "{} luminance values supplied for a {width}x{height} map",
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "luminance {bad} is not finite and non-negative"
            )));
        }
        Ok(LuminanceMap { width, height, values })
    }

    /// Builds a map by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        LuminanceMap::new(width, height, values)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn scaled(&self, k: f64) -> LuminanceMap {
        LuminanceMap {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|v| v * k).collect(),
        }
    }
}

/// Radiance-to-luminance conversion constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LuminanceConversion {
    pub efficacy: f64,
    pub weights: [f64; 3],
}

impl Default for LuminanceConversion {
    fn default() -> Self {
        LuminanceConversion {
            efficacy: RADIANCE_EFFICACY,
            weights: RADIANCE_RGB_WEIGHTS,
        }
    }
}

impl LuminanceConversion {
    pub fn luminance(&self, rgb: [f32; 3]) -> f64 {
        let [wr, wg, wb] = self.weights;
        self.efficacy * (wr * rgb[0] as f64 + wg * rgb[1] as f64 + wb * rgb[2] as f64)
    }
}

/// Converts radiance to luminance with the Radiance constants.
pub fn to_luminance(img: &HdrImage) -> LuminanceMap {
    to_luminance_with(img, &LuminanceConversion::default())
}

pub fn to_luminance_with(img: &HdrImage, conv: &LuminanceConversion) -> LuminanceMap {
    LuminanceMap {
        width: img.width,
        height: img.height,
        values: img.pixels.iter().map(|&px| conv.luminance(px)).collect(),
    }
}

/// Decodes one RGBE quadruple: `(mantissa / 256) * 2^(exponent - 128)`,
/// with exponent 0 meaning black.
pub fn rgbe_to_rgb(q: [u8; 4]) -> [f32; 3] {
    if q[3] == 0 {
        return [0.0; 3];
    }
    let scale = f32::powi(2.0, q[3] as i32 - (128 + 8));
    [q[0] as f32 * scale, q[1] as f32 * scale, q[2] as f32 * scale]
}

/// Encodes a radiance triplet with round-to-nearest mantissas, so the decoded
/// value of every channel lies within `max(r, g, b) / 256` of the input.
pub fn rgb_to_rgbe(rgb: [f32; 3]) -> [u8; 4] {
    let v = rgb[0].max(rgb[1]).max(rgb[2]) as f64;
    if !(v > 1e-38) {
        return [0, 0, 0, 0];
    }
    let mut exp = frexp_exponent(v);
    loop {
        let scale = 256.0 / f64::powi(2.0, exp);
        let m = rgb.map(|c| (c as f64 * scale + 0.5).floor());
        if m.iter().all(|&c| c < 256.0) {
            let e = exp + 128;
            if e > 255 {
                // saturate rather than wrap
                return [255, 255, 255, 255];
            }
            if e < 1 {
                return [0, 0, 0, 0];
            }
            return [m[0] as u8, m[1] as u8, m[2] as u8, e as u8];
        }
        exp += 1;
    }
}

/// Exponent `e` with `v = m * 2^e`, `m` in [0.5, 1).
fn frexp_exponent(v: f64) -> i32 {
    let mut e = v.log2().floor() as i32 + 1;
    // correct for rounding in log2 near powers of two
    while v >= f64::powi(2.0, e) {
        e += 1;
    }
    while v < f64::powi(2.0, e - 1) {
        e -= 1;
    }
    e
}

/// Reads a Radiance RGBE image from `reader`.
pub fn read_radiance_hdr<R: BufRead>(mut reader: R) -> Result<HdrImage> {
    let mut line = Vec::new();
    read_header_line(&mut reader, &mut line)?;
    let magic = String::from_utf8_lossy(&line);
    let magic = magic.trim_end();
    if magic != "#?RADIANCE" && magic != "#?RGBE" {
        return Err(Error::Format(format!("bad signature `{magic}`")));
    }

    let mut exposure = 1.0f64;
    let mut header_vars = Vec::new();
    loop {
        line.clear();
        let n = read_header_line(&mut reader, &mut line)?;
        if n == 0 {
            return Err(Error::Format("header not terminated by a blank line".into()));
        }
        let text = String::from_utf8_lossy(&line);
        let text = text.trim_end_matches(['\n', '\r']);
        if text.trim().is_empty() {
            break;
        }
        if text.starts_with('#') {
            continue;
        }
        if let Some((key, value)) = text.split_once('=') {
            let key = key.trim();
            match key {
                "FORMAT" if value.trim() != FORMAT_RGBE => {
                    return Err(Error::Format(format!("unsupported FORMAT `{}`", value.trim())));
                }
                "EXPOSURE" => {
                    let e: f64 = value
                        .trim()
                        .parse()
                        .map_err(|_| Error::Format(format!("bad EXPOSURE `{}`", value.trim())))?;
                    if !(e.is_finite() && e > 0.0) {
                        return Err(Error::Format(format!("non-positive EXPOSURE {e}")));
                    }
                    exposure *= e;
                }
                _ => {}
            }
            header_vars.push((key.to_string(), value.to_string()));
        }
    }

    line.clear();
    read_header_line(&mut reader, &mut line)?;
    let res = String::from_utf8_lossy(&line).trim().to_string();
    let (width, height) = parse_resolution(&res)?;

    let mut pixels = Vec::with_capacity(width * height);
    let mut scan = vec![[0u8; 4]; width];
    for row in 0..height {
        read_scanline(&mut reader, &mut scan).map_err(|e| match e {
            Error::Io(io) if io.kind() == std::io::ErrorKind::UnexpectedEof => {
                Error::CorruptData(format!("truncated at scanline {row}"))
            }
            other => other,
        })?;
        let inv = (1.0 / exposure) as f32;
        pixels.extend(scan.iter().map(|&q| {
            let rgb = rgbe_to_rgb(q);
            if exposure == 1.0 {
                rgb
            } else {
                rgb.map(|c| c * inv)
            }
        }));
    }

    Ok(HdrImage {
        width,
        height,
        pixels,
        exposure,
        header_vars,
    })
}

/// Decodes an image held in memory.
pub fn decode_hdr(bytes: &[u8]) -> Result<HdrImage> {
    read_radiance_hdr(bytes)
}

fn read_header_line<R: BufRead>(reader: &mut R, buf: &mut Vec<u8>) -> Result<usize> {
    let n = reader.read_until(b'\n', buf)?;
    if buf.len() > 64 * 1024 {
        return Err(Error::Format("header line too long".into()));
    }
    Ok(n)
}

fn parse_resolution(line: &str) -> Result<(usize, usize)> {
    let parts: Vec<&str> = line.split_whitespace().collect();
    if parts.len() != 4 {
        return Err(Error::Format(format!("bad resolution line `{line}`")));
    }
    let axes_ok = |a: &str| matches!(a, "-Y" | "+Y" | "-X" | "+X");
    if !axes_ok(parts[0]) || !axes_ok(parts[2]) {
        return Err(Error::Format(format!("bad resolution line `{line}`")));
    }
    let a: usize = parts[1]
        .parse()
        .map_err(|_| Error::Format(format!("bad resolution line `{line}`")))?;
    let b: usize = parts[3]
        .parse()
        .map_err(|_| Error::Format(format!("bad resolution line `{line}`")))?;
    if parts[0] != "-Y" || parts[2] != "+X" {
        return Err(Error::UnsupportedOrientation(format!("{} {}", parts[0], parts[2])));
    }
    if a == 0 || b == 0 {
        return Err(Error::InvalidDimension { width: b, height: a });
    }
    Ok((b, a))
}

fn read_exact<R: BufRead>(reader: &mut R, buf: &mut [u8]) -> Result<()> {
    reader.read_exact(buf).map_err(Error::from)
}

fn read_scanline<R: BufRead>(reader: &mut R, scan: &mut [[u8; 4]]) -> Result<()> {
    let width = scan.len();
    let mut first = [0u8; 4];
    read_exact(reader, &mut first)?;
    let rle = (8..=0x7fff).contains(&width) && first[0] == 2 && first[1] == 2 && first[2] & 0x80 == 0;
    if !rle {
        scan[0] = first;
        for px in scan.iter_mut().skip(1) {
            read_exact(reader, px)?;
        }
        return Ok(());
    }
    let declared = ((first[2] as usize) << 8) | first[3] as usize;
    if declared != width {
        return Err(Error::CorruptData(format!(
            "RLE scanline length {declared} does not match width {width}"
        )));
    }
    for channel in 0..4 {
        let mut x = 0;
        while x < width {
            let mut count = [0u8; 1];
            read_exact(reader, &mut count)?;
            let count = count[0] as usize;
            if count > 128 {
                let run = count - 128;
                if x + run > width {
                    return Err(Error::CorruptData("RLE run overruns scanline".into()));
                }
                let mut value = [0u8; 1];
                read_exact(reader, &mut value)?;
                for px in &mut scan[x..x + run] {
                    px[channel] = value[0];
                }
                x += run;
            } else {
                if count == 0 || x + count > width {
                    return Err(Error::CorruptData("bad RLE literal count".into()));
                }
                let mut buf = [0u8; 128];
                read_exact(reader, &mut buf[..count])?;
                for (px, v) in scan[x..x + count].iter_mut().zip(&buf[..count]) {
                    px[channel] = *v;
                }
                x += count;
            }
        }
    }
    Ok(())
}

/// Writes `img` as a Radiance file with flat scanlines.
///
/// Pixel values are written as-is, so any `EXPOSURE` of the source header is
/// not repeated in the output.
pub fn write_radiance_hdr<W: Write>(img: &HdrImage, mut out: W) -> Result<()> {
    if img.width == 0 || img.height == 0 || img.pixels.len() != img.width * img.height {
        return Err(Error::InvalidDimension {
            width: img.width,
            height: img.height,
        });
    }
    let mut header = String::from("#?RADIANCE\n");
    for (k, v) in &img.header_vars {
        if k == "FORMAT" || k == "EXPOSURE" {
            continue;
        }
        header.push_str(k);
        header.push('=');
        header.push_str(v);
        header.push('\n');
    }
    header.push_str("FORMAT=");
    header.push_str(FORMAT_RGBE);
    header.push_str("\n\n");
    header.push_str(&format!("-Y {} +X {}\n", img.height, img.width));
    out.write_all(header.as_bytes())?;
    let mut buf = Vec::with_capacity(img.width * 4);
    for row in img.pixels.chunks(img.width) {
        buf.clear();
        for &px in row {
            buf.extend_from_slice(&rgb_to_rgbe(px));
        }
        out.write_all(&buf)?;
    }
    out.flush()?;
    Ok(())
}

pub fn encode_hdr(img: &HdrImage) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    write_radiance_hdr(img, &mut out)?;
    Ok(out)
}

/// Passes every pixel through RGBE quantization, giving exactly what a
/// write/read round trip would produce.
pub fn quantize_rgbe(img: &HdrImage) -> HdrImage {
    let mut out = img.clone();
    for px in &mut out.pixels {
        *px = rgbe_to_rgb(rgb_to_rgbe(*px));
    }
    out
}
