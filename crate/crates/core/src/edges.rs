//! Edge extraction and edge-point sampling.
//!
//! The detector only needs a binary contour map. `detect_edges` is a
//! self-contained Canny implementation: Gaussian smoothing, Sobel
//! gradients, non-maximum suppression, and hysteresis with thresholds
//! expressed as fractions of the maximum gradient magnitude. No post
//! thinning is applied beyond the suppression pass.

use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{decode_pbm, encode_pbm, GrayImage};
use crate::seeding;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EdgeConfig {
    /// Standard deviation of the smoothing kernel, in pixels.
    pub blur_sigma: f64,
    /// Weak-edge threshold as a fraction of the peak gradient magnitude.
    pub low_thresh: f64,
    /// Strong-edge threshold as a fraction of the peak gradient magnitude.
    pub high_thresh: f64,
}

impl Default for EdgeConfig {
    fn default() -> Self {
        EdgeConfig {
            blur_sigma: 1.4,
            low_thresh: 0.1,
            high_thresh: 0.3,
        }
    }
}

impl EdgeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.blur_sigma.is_finite() && self.blur_sigma > 0.0) {
            return Err(Error::Config(format!(
                "blur_sigma must be finite and positive, got {}",
                self.blur_sigma
            )));
        }
        if !(self.low_thresh.is_finite() && self.high_thresh.is_finite())
            || self.low_thresh < 0.0
            || self.low_thresh > self.high_thresh
        {
            return Err(Error::Config(format!(
                "thresholds must satisfy 0 <= low <= high, got low={} high={}",
                self.low_thresh, self.high_thresh
            )));
        }
        Ok(())
    }
}

/// Binary edge mask plus the coordinate list of every set pixel, in
/// row-major scan order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeMap {
    width: u32,
    height: u32,
    mask: Vec<bool>,
    points: Vec<(i32, i32)>,
}

impl EdgeMap {
    /// Wraps a row-major mask; the point list is derived.
    pub fn from_mask(width: u32, height: u32, mask: Vec<bool>) -> Self {
        assert_eq!(mask.len(), width as usize * height as usize);
        let mut points = Vec::new();
        for y in 0..height {
            for x in 0..width {
                if mask[(y * width + x) as usize] {
                    points.push((x as i32, y as i32));
                }
            }
        }
        EdgeMap {
            width,
            height,
            mask,
            points,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Number of edge pixels.
    pub fn count(&self) -> usize {
        self.points.len()
    }

    /// All edge pixels as (x, y), row-major scan order.
    pub fn points(&self) -> &[(i32, i32)] {
        &self.points
    }

    #[inline]
    pub fn is_edge(&self, x: i32, y: i32) -> bool {
        x >= 0
            && y >= 0
            && (x as u32) < self.width
            && (y as u32) < self.height
            && self.mask[y as usize * self.width as usize + x as usize]
    }

    /// Renders the mask as a grayscale image (edge pixels = `on`).
    pub fn to_gray(&self, on: u8, off: u8) -> GrayImage {
        GrayImage::from_fn(self.width, self.height, |x, y| {
            if self.mask[(y * self.width + x) as usize] {
                on
            } else {
                off
            }
        })
    }

    /// Writes a PBM (P4) bitmask, set bit = edge pixel, plus a JSON sidecar
    /// `<file>.json` recording `{width, height, count}`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, encode_pbm(self.width, self.height, &self.mask))
            .map_err(|e| Error::io(path, e))?;
        let sidecar = sidecar_path(path);
        let meta = serde_json::json!({
            "width": self.width,
            "height": self.height,
            "count": self.count(),
        });
        fs::write(&sidecar, format!("{meta}\n")).map_err(|e| Error::io(sidecar, e))
    }

    /// Reads a PBM (P4) bitmask. The sidecar is advisory and ignored.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let (width, height, mask) = decode_pbm(&bytes)?;
        Ok(EdgeMap::from_mask(width, height, mask))
    }
}

/// Sidecar path for an edge map: the full file name plus `.json`.
pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".json");
    std::path::PathBuf::from(os)
}

/// Canny edge detection. Returns an empty map when the image has no
/// gradient (constant input) or is smaller than 3x3.
pub fn detect_edges(img: &GrayImage, cfg: &EdgeConfig) -> Result<EdgeMap> {
    cfg.validate()?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut mask = vec![false; w * h];
    if w >= 3 && h >= 3 {
        fill_edge_mask(img, cfg, w, h, &mut mask);
    }
    Ok(EdgeMap::from_mask(img.width(), img.height(), mask))
}

fn fill_edge_mask(img: &GrayImage, cfg: &EdgeConfig, w: usize, h: usize, mask: &mut [bool]) {
    let gray: Vec<f32> = img.pixels().iter().map(|&v| v as f32).collect();
    let smooth = gaussian_blur(&gray, w, h, cfg.blur_sigma);

    // Sobel gradients; the one-pixel border stays zero and never fires.
    let mut gx = vec![0f32; w * h];
    let mut gy = vec![0f32; w * h];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let i = y * w + x;
            let (tl, tc, tr) = (smooth[i - w - 1], smooth[i - w], smooth[i - w + 1]);
            let (ml, mr) = (smooth[i - 1], smooth[i + 1]);
            let (bl, bc, br) = (smooth[i + w - 1], smooth[i + w], smooth[i + w + 1]);
            gx[i] = (tr + 2.0 * mr + br) - (tl + 2.0 * ml + bl);
            gy[i] = (bl + 2.0 * bc + br) - (tl + 2.0 * tc + tr);
        }
    }
    let mut mag = vec![0f32; w * h];
    let mut peak = 0f32;
    for i in 0..w * h {
        let m = (gx[i] * gx[i] + gy[i] * gy[i]).sqrt();
        mag[i] = m;
        peak = peak.max(m);
    }
    if peak <= 0.0 {
        return;
    }
    let low = (cfg.low_thresh * peak as f64) as f32;
    let high = (cfg.high_thresh * peak as f64) as f32;

    // Non-maximum suppression: keep a pixel only if it is at least as
    // strong as both neighbors along the quantized gradient direction.
    let mut thin = vec![0f32; w * h];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let i = y * w + x;
            let m = mag[i];
            if m < low {
                continue;
            }
            let mut angle = gy[i].atan2(gx[i]).to_degrees();
            if angle < 0.0 {
                angle += 180.0;
            }
            let (n1, n2) = match ((angle + 22.5) / 45.0) as u32 % 4 {
                0 => (mag[i - 1], mag[i + 1]),
                1 => (mag[i - w - 1], mag[i + w + 1]),
                2 => (mag[i - w], mag[i + w]),
                _ => (mag[i - w + 1], mag[i + w - 1]),
            };
            if m >= n1 && m >= n2 {
                thin[i] = m;
            }
        }
    }

    // Hysteresis: strong pixels seed a flood fill across weak ones,
    // 8-connected. Traversal order does not affect the reachable set.
    let mut stack = Vec::new();
    for i in 0..w * h {
        if thin[i] >= high && !mask[i] {
            mask[i] = true;
            stack.push(i);
        }
    }
    while let Some(i) = stack.pop() {
        let (x, y) = (i % w, i / w);
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if nx < 1 || ny < 1 || nx >= w as i64 - 1 || ny >= h as i64 - 1 {
                    continue;
                }
                let n = ny as usize * w + nx as usize;
                if !mask[n] && thin[n] >= low {
                    mask[n] = true;
                    stack.push(n);
                }
            }
        }
    }
}

/// Separable Gaussian blur with edge replication; kernel radius ceil(3*sigma).
fn gaussian_blur(src: &[f32], w: usize, h: usize, sigma: f64) -> Vec<f32> {
    let radius = (3.0 * sigma).ceil() as i64;
    let mut kernel = Vec::with_capacity(2 * radius as usize + 1);
    for d in -radius..=radius {
        kernel.push((-((d * d) as f64) / (2.0 * sigma * sigma)).exp());
    }
    let sum: f64 = kernel.iter().sum();
    let kernel: Vec<f32> = kernel.iter().map(|k| (k / sum) as f32).collect();

    let mut horiz = vec![0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0f32;
            for (ki, k) in kernel.iter().enumerate() {
                let sx = (x as i64 + ki as i64 - radius).clamp(0, w as i64 - 1) as usize;
                acc += k * src[y * w + sx];
            }
            horiz[y * w + x] = acc;
        }
    }
    let mut out = vec![0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0f32;
            for (ki, k) in kernel.iter().enumerate() {
                let sy = (y as i64 + ki as i64 - radius).clamp(0, h as i64 - 1) as usize;
                acc += k * horiz[sy * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Uniform random subsample of the edge points, without replacement.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPoints {
    points: Vec<(i32, i32)>,
    source_seed: u64,
}

impl SampledPoints {
    pub fn points(&self) -> &[(i32, i32)] {
        &self.points
    }

    pub fn count(&self) -> usize {
        self.points.len()
    }

    pub fn source_seed(&self) -> u64 {
        self.source_seed
    }

    #[inline]
    pub fn get(&self, i: usize) -> (i32, i32) {
        self.points[i]
    }
}

/// Draws ceil(fraction * count) edge points by partial Fisher-Yates
/// shuffle. Deterministic in (edges, fraction, seed).
pub fn sample_edge_points(edges: &EdgeMap, fraction: f64, seed: u64) -> Result<SampledPoints> {
    if !(fraction.is_finite() && fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Config(format!(
            "sample fraction must be in (0, 1], got {fraction}"
        )));
    }
    let n_t = edges.count();
    let n_p = ceil_fraction(fraction, n_t);
    if n_p < 3 {
        return Err(Error::TooFewEdgePoints {
            needed: 3,
            found: n_p,
        });
    }
    let mut indices: Vec<usize> = (0..n_t).collect();
    let mut rng = seeding::stream_rng(seed, seeding::SAMPLING);
    for i in 0..n_p {
        let j = rng.random_range(i..n_t);
        indices.swap(i, j);
    }
    let points = indices[..n_p].iter().map(|&i| edges.points()[i]).collect();
    Ok(SampledPoints {
        points,
        source_seed: seed,
    })
}

/// ceil(fraction * count) computed so that products that are integers in
/// exact arithmetic (0.05 * 200 = 10) do not round up from representation
/// error.
fn ceil_fraction(fraction: f64, count: usize) -> usize {
    let raw = fraction * count as f64;
    ((raw - 1e-9).ceil().max(0.0) as usize).min(count)
}
