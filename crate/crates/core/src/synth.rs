//! Synthetic ground-truth scenes: randomly placed circles with exact
//! known parameters, plus salt & pepper contamination.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::seeding;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CircleStyle {
    /// Solid disk.
    Filled,
    /// Annulus of the given stroke width, centered on the true radius.
    Ring { thickness: u32 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneSpec {
    pub width: u32,
    pub height: u32,
    pub n_circles: usize,
    /// Radii are drawn uniformly from [r_lo, r_hi] (integers).
    pub r_lo: u32,
    pub r_hi: u32,
    /// Minimum pairwise center distance, pixels. 0 disables the check.
    pub min_separation: f64,
    /// Fraction of the circles placed so they clip the image border;
    /// floor(fraction * n_circles) circles are affected.
    pub partial_fraction: f64,
    pub style: CircleStyle,
    /// Circle intensity.
    pub fg: u8,
    /// Background intensity.
    pub bg: u8,
    /// Salt & pepper level applied by `realize_scene`, in [0, 1].
    pub noise: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            width: 256,
            height: 256,
            n_circles: 3,
            r_lo: 20,
            r_hi: 80,
            min_separation: 0.0,
            partial_fraction: 0.0,
            style: CircleStyle::Filled,
            fg: 0,
            bg: 255,
            noise: 0.0,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width < 8 || self.height < 8 {
            return Err(Error::Config(format!(
                "scene must be at least 8x8, got {}x{}",
                self.width, self.height
            )));
        }
        if self.n_circles == 0 {
            return Err(Error::Config("scene needs at least one circle".into()));
        }
        if self.r_lo < 1 || self.r_hi < self.r_lo {
            return Err(Error::Config(format!(
                "radius range [{}, {}] is invalid",
                self.r_lo, self.r_hi
            )));
        }
        if !(self.min_separation.is_finite() && self.min_separation >= 0.0) {
            return Err(Error::Config(format!(
                "min_separation must be nonnegative, got {}",
                self.min_separation
            )));
        }
        if !(0.0..=1.0).contains(&self.partial_fraction) {
            return Err(Error::Config(format!(
                "partial_fraction must be in [0, 1], got {}",
                self.partial_fraction
            )));
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(Error::Config(format!(
                "noise must be in [0, 1], got {}",
                self.noise
            )));
        }
        if let CircleStyle::Ring { thickness } = self.style {
            if thickness == 0 {
                return Err(Error::Config("ring thickness must be at least 1".into()));
            }
        }
        if self.fg == self.bg {
            return Err(Error::Config("fg and bg intensities must differ".into()));
        }
        Ok(())
    }
}

/// A drawn scene plus the exact parameters of every circle in it.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthScene {
    pub image: GrayImage,
    /// (x_true, y_true, r_true) per circle, placement order.
    pub circles: Vec<(f64, f64, f64)>,
    pub noise_level: f64,
    pub seed: u64,
}

const ATTEMPTS_PER_CIRCLE: usize = 10_000;

/// Border margin for fully visible circles, so edge extraction (which
/// skips a one-pixel frame) sees the whole contour.
const FULL_MARGIN: i64 = 3;

/// Draws the clean scene: circles placed by rejection sampling under the
/// separation constraint, radii and centers integer-valued, parameters
/// recorded exactly. The first floor(partial_fraction * n) circles are
/// pushed across a randomly chosen border; the rest stay fully inside.
pub fn generate_scene(spec: &SceneSpec, seed: u64) -> Result<GroundTruthScene> {
    spec.validate()?;
    let mut rng = seeding::stream_rng(seed, seeding::SCENE);
    let (w, h) = (spec.width as i64, spec.height as i64);
    let n_partial = (spec.partial_fraction * spec.n_circles as f64).floor() as usize;

    let mut placed: Vec<(i64, i64, i64)> = Vec::new();
    let mut attempts_total = 0usize;
    for idx in 0..spec.n_circles {
        let partial = idx < n_partial;
        let mut found = false;
        for _ in 0..ATTEMPTS_PER_CIRCLE {
            attempts_total += 1;
            let r = rng.random_range(spec.r_lo..=spec.r_hi) as i64;
            let candidate = if partial {
                place_partial(&mut rng, w, h, r)
            } else {
                place_full(&mut rng, w, h, r)
            };
            let Some((cx, cy)) = candidate else { continue };
            let far_enough = placed.iter().all(|&(px, py, _)| {
                let (dx, dy) = ((cx - px) as f64, (cy - py) as f64);
                (dx * dx + dy * dy).sqrt() >= spec.min_separation
            });
            if far_enough {
                placed.push((cx, cy, r));
                found = true;
                break;
            }
        }
        if !found {
            return Err(Error::PlacementFailure {
                requested: spec.n_circles,
                placed: placed.len(),
                attempts: attempts_total,
            });
        }
    }

    let mut image = GrayImage::filled(spec.width, spec.height, spec.bg);
    for &(cx, cy, r) in &placed {
        draw_circle(&mut image, cx, cy, r, spec.style, spec.fg);
    }
    Ok(GroundTruthScene {
        image,
        circles: placed
            .iter()
            .map(|&(cx, cy, r)| (cx as f64, cy as f64, r as f64))
            .collect(),
        noise_level: 0.0,
        seed,
    })
}

/// Clean scene plus the requested salt & pepper level.
pub fn realize_scene(spec: &SceneSpec, seed: u64) -> Result<GroundTruthScene> {
    let mut scene = generate_scene(spec, seed)?;
    if spec.noise > 0.0 {
        scene.image = add_salt_pepper(&scene.image, spec.noise, seed);
        scene.noise_level = spec.noise;
    }
    Ok(scene)
}

fn place_full(rng: &mut impl Rng, w: i64, h: i64, r: i64) -> Option<(i64, i64)> {
    let (lo_x, hi_x) = (r + FULL_MARGIN, w - 1 - r - FULL_MARGIN);
    let (lo_y, hi_y) = (r + FULL_MARGIN, h - 1 - r - FULL_MARGIN);
    if lo_x > hi_x || lo_y > hi_y {
        return None;
    }
    Some((rng.random_range(lo_x..=hi_x), rng.random_range(lo_y..=hi_y)))
}

/// Center placed so the circle crosses one randomly chosen border while
/// staying inside along the other axis.
fn place_partial(rng: &mut impl Rng, w: i64, h: i64, r: i64) -> Option<(i64, i64)> {
    let side = rng.random_range(0..4u32);
    let along_x = side < 2; // 0 = left, 1 = right, 2 = top, 3 = bottom
    let (span, cross) = if along_x { (h, w) } else { (w, h) };
    let (lo_a, hi_a) = (r + FULL_MARGIN, span - 1 - r - FULL_MARGIN);
    if lo_a > hi_a {
        return None;
    }
    let a = rng.random_range(lo_a..=hi_a);
    // center within [0, r-1] of the border: guaranteed clipping, and at
    // least the far half of the circle stays visible
    let depth = rng.random_range(0..r.min(cross));
    let b = if side % 2 == 0 { depth } else { cross - 1 - depth };
    Some(if along_x { (b, a) } else { (a, b) })
}

fn draw_circle(img: &mut GrayImage, cx: i64, cy: i64, r: i64, style: CircleStyle, fg: u8) {
    let (w, h) = (img.width() as i64, img.height() as i64);
    // A ring stroke is centered on the ideal perimeter, spanning
    // (r - t/2, r + t/2], so the recorded radius stays unbiased no matter
    // the thickness. Doubling all distances keeps the half-pixel bounds in
    // exact integer arithmetic.
    let (inner2, outer2, reach) = match style {
        CircleStyle::Filled => (-1, 4 * r * r, r),
        CircleStyle::Ring { thickness } => {
            let t = thickness as i64;
            let lo = 2 * r - t;
            let inner2 = if lo <= 0 { -1 } else { lo * lo };
            let hi = 2 * r + t;
            (inner2, hi * hi, r + (t + 1) / 2)
        }
    };
    let (x0, x1) = ((cx - reach).max(0), (cx + reach).min(w - 1));
    let (y0, y1) = ((cy - reach).max(0), (cy + reach).min(h - 1));
    for y in y0..=y1 {
        for x in x0..=x1 {
            let d2 = 4 * ((x - cx) * (x - cx) + (y - cy) * (y - cy));
            if d2 <= outer2 && d2 > inner2 {
                img.set(x as u32, y as u32, fg);
            }
        }
    }
}

/// Replaces each pixel independently with probability `level`, choosing
/// black or white with equal odds. The corrupted coordinate set depends
/// only on (dimensions, level, seed), never on image content.
pub fn add_salt_pepper(img: &GrayImage, level: f64, seed: u64) -> GrayImage {
    assert!(
        (0.0..=1.0).contains(&level),
        "noise level must be in [0, 1], got {level}"
    );
    let mut rng = seeding::stream_rng(seed, seeding::NOISE);
    let mut out = img.clone();
    for y in 0..img.height() {
        for x in 0..img.width() {
            if rng.random::<f64>() < level {
                let v = if rng.random::<f64>() < 0.5 { 0 } else { 255 };
                out.set(x, y, v);
            }
        }
    }
    out
}
