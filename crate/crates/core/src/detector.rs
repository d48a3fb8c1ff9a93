//! End-to-end detection: edge extraction, sampling, action-set
//! construction, the learning loop, and mining the converged distribution
//! for every sufficiently distinct circle.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::automaton::{
    build_action_set, run_learning, ActionSet, ActionSetConfig, BetaCache, LearningConfig,
    ProbabilityVector,
};
use crate::edges::{detect_edges, sample_edge_points, EdgeConfig, EdgeMap};
use crate::error::Result;
use crate::geometry::{distinctiveness, distinctiveness_threshold, rasterize_circle};
use crate::image::{GrayImage, RgbImage};

/// Full pipeline configuration. Defaults follow the reference parameter
/// set: radius window [40, 150], sensitivity 2, theta 0.001, action cap
/// 1000, probability floor divisor 10.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    /// Edge-extraction settings (ignored when detection starts from a
    /// precomputed edge map).
    pub edge: EdgeConfig,
    /// Fraction of edge points sampled to form triplets, in (0, 1].
    pub fraction: f64,
    /// Smallest admissible circle radius, pixels.
    pub r_min: f64,
    /// Largest admissible circle radius, pixels.
    pub r_max: f64,
    /// Sensitivity s of the distinctness threshold (r_max - r_min) / s;
    /// larger s lets more similar circles coexist.
    pub sensitivity: f64,
    /// Learning rate in (0, 1).
    pub theta: f64,
    /// Absolute iteration cap; the effective budget is
    /// min(n_actions / 2, k_cap).
    pub k_cap: usize,
    /// Stop the learning loop once any probability reaches this value.
    pub p_stop: f64,
    /// Extraction keeps walking the sorted distribution while
    /// probability >= max probability / pr_divisor.
    pub pr_divisor: f64,
    /// Maximum number of candidate circles (automaton actions).
    pub action_cap: usize,
    /// Candidates clipped by the border beyond this fraction are dropped.
    pub max_clip_fraction: f64,
    /// Extraction skips circles whose perimeter score is below this value;
    /// 0 disables the gate. Useful on noisy inputs where the probability
    /// floor alone admits junk candidates.
    pub beta_accept: f64,
    /// Optional learning-loop early stop on a high-scoring selection.
    pub beta_min_solution: Option<f64>,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            edge: EdgeConfig::default(),
            fraction: 0.05,
            r_min: 40.0,
            r_max: 150.0,
            sensitivity: 2.0,
            theta: 0.001,
            k_cap: 5000,
            p_stop: 0.2,
            pr_divisor: 10.0,
            action_cap: 1000,
            max_clip_fraction: 0.5,
            beta_accept: 0.0,
            beta_min_solution: None,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        use crate::error::Error;
        self.edge.validate()?;
        self.action_set_config().validate()?;
        self.learning_config(0, 0).validate()?;
        if !(self.fraction.is_finite() && self.fraction > 0.0 && self.fraction <= 1.0) {
            return Err(Error::Config(format!(
                "fraction must be in (0, 1], got {}",
                self.fraction
            )));
        }
        if !(self.sensitivity.is_finite() && self.sensitivity > 0.0) {
            return Err(Error::Config(format!(
                "sensitivity must be positive, got {}",
                self.sensitivity
            )));
        }
        if self.k_cap == 0 {
            return Err(Error::Config("k_cap must be at least 1".into()));
        }
        if !(self.pr_divisor.is_finite() && self.pr_divisor > 1.0) {
            return Err(Error::Config(format!(
                "pr_divisor must exceed 1, got {}",
                self.pr_divisor
            )));
        }
        if !(0.0..=1.0).contains(&self.beta_accept) {
            return Err(Error::Config(format!(
                "beta_accept must be in [0, 1], got {}",
                self.beta_accept
            )));
        }
        Ok(())
    }

    /// Distinctness floor derived from the radius window and sensitivity.
    pub fn es_th(&self) -> f64 {
        distinctiveness_threshold(self.r_min, self.r_max, self.sensitivity)
    }

    fn action_set_config(&self) -> ActionSetConfig {
        ActionSetConfig {
            r_min: self.r_min,
            r_max: self.r_max,
            cap: self.action_cap,
            max_clip_fraction: self.max_clip_fraction,
        }
    }

    fn learning_config(&self, n_actions: usize, seed: u64) -> LearningConfig {
        LearningConfig {
            theta: self.theta,
            k_max: (n_actions / 2).min(self.k_cap),
            p_stop: self.p_stop,
            beta_min_solution: self.beta_min_solution,
            seed,
        }
    }
}

/// One accepted circle, rank 1 = highest probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectedCircle {
    pub x0: f64,
    pub y0: f64,
    pub r: f64,
    pub probability: f64,
    pub beta: f64,
    pub rank: usize,
}

impl DetectedCircle {
    pub fn params(&self) -> (f64, f64, f64) {
        (self.x0, self.y0, self.r)
    }
}

/// Detection output. `elapsed_s` is wall-clock time and the only
/// non-deterministic field; strip it (or serialize without it) when
/// comparing runs byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub circles: Vec<DetectedCircle>,
    pub n_actions: usize,
    #[serde(rename = "iterations")]
    pub iterations_run: usize,
    pub seed: u64,
    #[serde(rename = "elapsed_s", skip_serializing_if = "Option::is_none", default)]
    pub elapsed: Option<f64>,
}

impl DetectionResult {
    /// Copy with the wall-clock field removed; byte-stable across reruns.
    pub fn without_timing(&self) -> DetectionResult {
        DetectionResult {
            elapsed: None,
            ..self.clone()
        }
    }

    pub fn to_json_pretty(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("serializable");
        s.push('\n');
        s
    }
}

/// Mines the converged distribution in descending probability order.
///
/// The walk stops at the probability floor max(p) / pr_divisor. A circle
/// is accepted when its mismatch against EVERY previously accepted circle
/// exceeds es_th; comparing against all of them (not just the last) is
/// what keeps near-duplicates of earlier finds out. Candidates scoring
/// below beta_accept are skipped during the walk rather than filtered
/// afterwards, so a low-scoring near-duplicate cannot shadow a genuine
/// circle further down the list. Ties in probability resolve by action
/// index, so the result is a pure function of its inputs.
pub fn extract_circles(
    actions: &ActionSet,
    pv: &ProbabilityVector,
    betas: &BetaCache,
    es_th: f64,
    pr_divisor: f64,
    beta_accept: f64,
) -> Vec<DetectedCircle> {
    assert_eq!(actions.len(), pv.len(), "distribution/action size mismatch");
    assert_eq!(actions.len(), betas.len(), "beta cache size mismatch");
    debug_assert!(es_th > 0.0 && pr_divisor > 1.0);
    if pv.is_empty() {
        return Vec::new();
    }
    let mut order: Vec<usize> = (0..pv.len()).collect();
    order.sort_by(|&a, &b| pv.get(b).total_cmp(&pv.get(a)).then(a.cmp(&b)));
    let p_th = pv.get(order[0]) / pr_divisor;

    let mut out: Vec<DetectedCircle> = Vec::new();
    for &idx in &order {
        let p = pv.get(idx);
        if p < p_th {
            break;
        }
        if betas[idx] < beta_accept {
            continue;
        }
        let cand = actions.get(idx).params();
        if out
            .iter()
            .all(|d| distinctiveness(d.params(), cand) > es_th)
        {
            out.push(DetectedCircle {
                x0: cand.0,
                y0: cand.1,
                r: cand.2,
                probability: p,
                beta: betas[idx],
                rank: out.len() + 1,
            });
        }
    }
    out
}

/// Detects circles in a grayscale image.
pub fn detect_image(img: &GrayImage, cfg: &DetectorConfig, seed: u64) -> Result<DetectionResult> {
    let start = Instant::now();
    cfg.validate()?;
    let edges = detect_edges(img, &cfg.edge)?;
    detect_inner(&edges, cfg, seed, start)
}

/// Detects circles in a precomputed edge map; edge settings are unused.
pub fn detect_edge_map(
    edges: &EdgeMap,
    cfg: &DetectorConfig,
    seed: u64,
) -> Result<DetectionResult> {
    let start = Instant::now();
    cfg.validate()?;
    detect_inner(edges, cfg, seed, start)
}

fn detect_inner(
    edges: &EdgeMap,
    cfg: &DetectorConfig,
    seed: u64,
    start: Instant,
) -> Result<DetectionResult> {
    let samples = sample_edge_points(edges, cfg.fraction, seed)?;
    let actions = build_action_set(
        &samples,
        edges.width(),
        edges.height(),
        &cfg.action_set_config(),
        seed,
    )?;
    let lcfg = cfg.learning_config(actions.len(), seed);
    let (pv, betas) = run_learning(&actions, edges, &lcfg)?;
    let circles = extract_circles(
        &actions,
        &pv,
        &betas,
        cfg.es_th(),
        cfg.pr_divisor,
        cfg.beta_accept,
    );
    Ok(DetectionResult {
        circles,
        n_actions: actions.len(),
        iterations_run: pv.iteration(),
        seed,
        elapsed: Some(start.elapsed().as_secs_f64()),
    })
}

/// Marker color for detected perimeters in overlay images.
const MARKER: [u8; 3] = [255, 0, 0];

/// Draws every detected perimeter over the base image.
pub fn render_overlay(base: &GrayImage, circles: &[DetectedCircle]) -> RgbImage {
    let mut rgb = RgbImage::from_gray(base);
    for c in circles {
        if let Ok(ras) = rasterize_circle(c.x0, c.y0, c.r, base.width(), base.height()) {
            for &(x, y) in ras.points() {
                rgb.set(x as u32, y as u32, MARKER);
            }
        }
    }
    rgb
}
