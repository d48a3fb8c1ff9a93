//! Raster buffers and the narrow set of codecs the pipeline needs.
//!
//! PNM (P4/P5/P6) is read and written in-house so the byte layout stays
//! under our control; PNG decoding and encoding is delegated to the `image`
//! crate. Coordinates are (x = column, y = row) with the origin top-left.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// 8-bit single-channel image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl GrayImage {
    /// Image filled with a constant value.
    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be nonzero");
        GrayImage {
            width,
            height,
            data: vec![value; width as usize * height as usize],
        }
    }

    /// Wraps an existing row-major buffer. Length must be width*height.
    pub fn from_raw(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::format("image", "zero dimension"));
        }
        if data.len() != width as usize * height as usize {
            return Err(Error::format(
                "image",
                format!(
                    "buffer holds {} bytes, expected {}",
                    data.len(),
                    width as usize * height as usize
                ),
            ));
        }
        Ok(GrayImage { width, height, data })
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> u8) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be nonzero");
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        GrayImage { width, height, data }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: u8) {
        self.data[y as usize * self.width as usize + x as usize] = value;
    }

    /// Loads a grayscale image, dispatching on magic bytes: raw PGM (P5) or
    /// PNG. Color PNG input is converted with [`luma_601`].
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        match bytes.first() {
            Some(b'P') if bytes.get(1) == Some(&b'5') => decode_pgm(&bytes),
            Some(0x89) if bytes.get(1..4) == Some(b"PNG") => decode_png_gray(&bytes),
            _ => Err(Error::format(
                "image",
                format!("{}: not a raw PGM (P5) or PNG file", path.display()),
            )),
        }
    }

    /// Writes a raw PGM (P5, maxval 255) file.
    pub fn save_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Writes an 8-bit grayscale PNG.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        image::save_buffer_with_format(
            path,
            &self.data,
            self.width,
            self.height,
            image::ExtendedColorType::L8,
            image::ImageFormat::Png,
        )
        .map_err(|e| Error::format("png", format!("{}: {e}", path.display())))
    }

    /// Saves by extension: `.pgm` or `.png`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        match extension(path) {
            Some("pgm") => self.save_pgm(path),
            Some("png") => self.save_png(path),
            _ => Err(Error::format(
                "image",
                format!("{}: unsupported output extension (use .pgm or .png)", path.display()),
            )),
        }
    }
}

/// 8-bit RGB image, row-major interleaved. Used only for overlay output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl RgbImage {
    /// Expands a grayscale image to three equal channels.
    pub fn from_gray(gray: &GrayImage) -> Self {
        let mut data = Vec::with_capacity(gray.data.len() * 3);
        for &v in &gray.data {
            data.extend_from_slice(&[v, v, v]);
        }
        RgbImage {
            width: gray.width,
            height: gray.height,
            data,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// Writes a raw PPM (P6, maxval 255) file.
    pub fn save_ppm(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Writes an 8-bit RGB PNG.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        image::save_buffer_with_format(
            path,
            &self.data,
            self.width,
            self.height,
            image::ExtendedColorType::Rgb8,
            image::ImageFormat::Png,
        )
        .map_err(|e| Error::format("png", format!("{}: {e}", path.display())))
    }

    /// Saves by extension: `.ppm` or `.png`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        match extension(path) {
            Some("ppm") => self.save_ppm(path),
            Some("png") => self.save_png(path),
            _ => Err(Error::format(
                "image",
                format!("{}: unsupported output extension (use .ppm or .png)", path.display()),
            )),
        }
    }
}

/// ITU-R BT.601 luma, rounded half-up. (255,0,0) maps to 76.
pub fn luma_601(r: u8, g: u8, b: u8) -> u8 {
    (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64 + 0.5).floor() as u8
}

fn extension(path: &Path) -> Option<&str> {
    path.extension().and_then(|e| e.to_str())
}

fn decode_png_gray(bytes: &[u8]) -> Result<GrayImage> {
    let img = image::load_from_memory(bytes).map_err(|e| Error::format("png", e.to_string()))?;
    match img {
        image::DynamicImage::ImageLuma8(g) => GrayImage::from_raw(g.width(), g.height(), g.into_raw()),
        other => {
            let rgb = other.to_rgb8();
            if rgb.width() == 0 || rgb.height() == 0 {
                return Err(Error::format("png", "zero dimension"));
            }
            Ok(GrayImage::from_fn(rgb.width(), rgb.height(), |x, y| {
                let p = rgb.get_pixel(x, y);
                luma_601(p[0], p[1], p[2])
            }))
        }
    }
}

// -------- PNM parsing --------

/// Header tokenizer shared by P4/P5 readers: skips whitespace and `#`
/// comments, leaves `pos` at the byte after the token.
struct PnmReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    format: &'static str,
}

impl<'a> PnmReader<'a> {
    fn new(bytes: &'a [u8], format: &'static str) -> Self {
        PnmReader { bytes, pos: 0, format }
    }

    fn next_token(&mut self) -> Result<&'a [u8]> {
        loop {
            match self.bytes.get(self.pos) {
                None => return Err(Error::format(self.format, "truncated header")),
                Some(b'#') => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                Some(c) if c.is_ascii_whitespace() => self.pos += 1,
                Some(_) => break,
            }
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        Ok(&self.bytes[start..self.pos])
    }

    fn next_u32(&mut self) -> Result<u32> {
        let tok = self.next_token()?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format(self.format, "non-numeric header field"))
    }

    /// Consumes the single whitespace byte that separates the header from
    /// the raster data.
    fn raster(&mut self) -> Result<&'a [u8]> {
        match self.bytes.get(self.pos) {
            Some(c) if c.is_ascii_whitespace() => Ok(&self.bytes[self.pos + 1..]),
            _ => Err(Error::format(self.format, "missing raster separator")),
        }
    }
}

fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut rd = PnmReader::new(bytes, "pgm");
    let magic = rd.next_token()?;
    if magic != b"P5" {
        return Err(Error::format("pgm", "expected P5 magic"));
    }
    let width = rd.next_u32()?;
    let height = rd.next_u32()?;
    let maxval = rd.next_u32()?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::format(
            "pgm",
            format!("unsupported maxval {maxval} (only 8-bit data)"),
        ));
    }
    let raster = rd.raster()?;
    let n = width as usize * height as usize;
    if raster.len() < n {
        return Err(Error::format("pgm", "truncated raster"));
    }
    let mut data = raster[..n].to_vec();
    if maxval != 255 {
        for v in &mut data {
            *v = ((*v as u32 * 255 + maxval / 2) / maxval).min(255) as u8;
        }
    }
    GrayImage::from_raw(width, height, data)
}

/// Decodes a PBM (P4) bitmask into row-major booleans, set bit = true.
pub(crate) fn decode_pbm(bytes: &[u8]) -> Result<(u32, u32, Vec<bool>)> {
    let mut rd = PnmReader::new(bytes, "pbm");
    let magic = rd.next_token()?;
    if magic != b"P4" {
        return Err(Error::format("pbm", "expected P4 magic"));
    }
    let width = rd.next_u32()?;
    let height = rd.next_u32()?;
    if width == 0 || height == 0 {
        return Err(Error::format("pbm", "zero dimension"));
    }
    let raster = rd.raster()?;
    let row_bytes = (width as usize).div_ceil(8);
    if raster.len() < row_bytes * height as usize {
        return Err(Error::format("pbm", "truncated raster"));
    }
    let mut bits = Vec::with_capacity(width as usize * height as usize);
    for y in 0..height as usize {
        let row = &raster[y * row_bytes..(y + 1) * row_bytes];
        for x in 0..width as usize {
            bits.push(row[x / 8] & (0x80 >> (x % 8)) != 0);
        }
    }
    Ok((width, height, bits))
}

/// Packs row-major booleans into PBM (P4) bytes, MSB-first rows padded
/// with zero bits.
pub(crate) fn encode_pbm(width: u32, height: u32, bits: &[bool]) -> Vec<u8> {
    assert_eq!(bits.len(), width as usize * height as usize);
    let row_bytes = (width as usize).div_ceil(8);
    let mut out = format!("P4\n{width} {height}\n").into_bytes();
    for y in 0..height as usize {
        let row = &bits[y * width as usize..(y + 1) * width as usize];
        let mut packed = vec![0u8; row_bytes];
        for (x, &b) in row.iter().enumerate() {
            if b {
                packed[x / 8] |= 0x80 >> (x % 8);
            }
        }
        out.extend_from_slice(&packed);
    }
    out
}
