//! Detection quality metrics and a repeatable benchmark runner.
//!
//! Scoring matches detections to ground truth one-to-one, greedily by
//! smallest error score; missed circles are charged a fixed penalty so a
//! single miss is enough to fail a trial.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::{detect_image, DetectionResult, DetectorConfig};
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::synth::{realize_scene, GroundTruthScene, SceneSpec};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricConfig {
    /// Weight on the summed absolute center offset.
    pub eta: f64,
    /// Weight on the absolute radius offset.
    pub mu: f64,
    /// Score charged for each ground-truth circle left unmatched.
    pub es_fail: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            eta: 0.05,
            mu: 0.1,
            es_fail: 2.0,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("eta", self.eta), ("mu", self.mu), ("es_fail", self.es_fail)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Weighted L1 error between a detected circle and a true one:
/// eta * (|dx| + |dy|) + mu * |dr|. A value below 1 counts as a hit.
pub fn error_score(detected: (f64, f64, f64), truth: (f64, f64, f64), m: &MetricConfig) -> f64 {
    let (xd, yd, rd) = detected;
    let (xt, yt, rt) = truth;
    m.eta * ((xt - xd).abs() + (yt - yd).abs()) + m.mu * (rt - rd).abs()
}

/// One-to-one assignment of detections to ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchOutcome {
    /// Detection index assigned to each true circle, truth order.
    pub assignment: Vec<Option<usize>>,
    /// Per-truth score: the matched error, or `es_fail` when missed.
    pub es: Vec<f64>,
    /// Detections left over after every truth is considered.
    pub false_positives: usize,
    /// Mean of `es` over the true circles.
    pub me: f64,
}

/// Greedy matching: repeatedly bind the globally smallest error pair,
/// removing both sides. Ties resolve by (truth index, detection index),
/// with detections in rank order.
pub fn match_circles(
    detections: &[(f64, f64, f64)],
    truth: &[(f64, f64, f64)],
    m: &MetricConfig,
) -> MatchOutcome {
    assert!(!truth.is_empty(), "matching needs at least one true circle");
    let mut pairs = Vec::with_capacity(truth.len() * detections.len());
    for (t, &tc) in truth.iter().enumerate() {
        for (d, &dc) in detections.iter().enumerate() {
            pairs.push((error_score(dc, tc, m), t, d));
        }
    }
    pairs.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });

    let mut assignment: Vec<Option<usize>> = vec![None; truth.len()];
    let mut es = vec![m.es_fail; truth.len()];
    let mut det_used = vec![false; detections.len()];
    let mut bound = 0usize;
    for &(score, t, d) in &pairs {
        if bound == truth.len().min(detections.len()) {
            break;
        }
        if assignment[t].is_some() || det_used[d] {
            continue;
        }
        assignment[t] = Some(d);
        es[t] = score;
        det_used[d] = true;
        bound += 1;
    }
    let me = es.iter().sum::<f64>() / truth.len() as f64;
    MatchOutcome {
        assignment,
        es,
        false_positives: detections.len() - bound,
        me,
    }
}

/// Multiple error of a detection result against the scene that produced
/// the image: mean per-truth error score under greedy matching.
pub fn multiple_error(
    result: &DetectionResult,
    scene: &GroundTruthScene,
    m: &MetricConfig,
) -> f64 {
    let dets: Vec<(f64, f64, f64)> = result.circles.iter().map(|c| c.params()).collect();
    match_circles(&dets, &scene.circles, m).me
}

/// Percentage of trials with ME < 1, rounded to two decimals.
pub fn success_rate(me_values: &[f64]) -> f64 {
    assert!(!me_values.is_empty(), "success rate needs at least one trial");
    let hits = me_values.iter().filter(|&&me| me < 1.0).count();
    let pct = 100.0 * hits as f64 / me_values.len() as f64;
    (pct * 100.0).round() / 100.0
}

/// Truth-circle record used in sidecar and suite JSON.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthCircle {
    pub x: f64,
    pub y: f64,
    pub r: f64,
}

impl TruthCircle {
    pub fn params(&self) -> (f64, f64, f64) {
        (self.x, self.y, self.r)
    }
}

/// One benchmark input: either a scene drawn fresh per trial, or a fixed
/// image with externally supplied truth.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BenchInput {
    Scene {
        name: String,
        spec: SceneSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        detector: Option<DetectorConfig>,
    },
    Image {
        name: String,
        path: PathBuf,
        truth: Vec<TruthCircle>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        detector: Option<DetectorConfig>,
    },
}

impl BenchInput {
    pub fn name(&self) -> &str {
        match self {
            BenchInput::Scene { name, .. } | BenchInput::Image { name, .. } => name,
        }
    }

    fn detector_override(&self) -> Option<&DetectorConfig> {
        match self {
            BenchInput::Scene { detector, .. } | BenchInput::Image { detector, .. } => {
                detector.as_ref()
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchSuite {
    /// Detector settings for inputs without their own override.
    #[serde(default)]
    pub detector: DetectorConfig,
    #[serde(default)]
    pub metric: MetricConfig,
    pub inputs: Vec<BenchInput>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryReport {
    pub name: String,
    pub trials: usize,
    /// ME per trial, seed order.
    pub me_values: Vec<f64>,
    pub me_mean: f64,
    pub me_std: f64,
    pub sr: f64,
    /// Extra detections summed over all trials.
    pub false_positives: usize,
    /// Trials whose detection run failed outright (scored as misses).
    pub errors: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_mean_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_std_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub base_seed: u64,
    pub trials: usize,
    pub seeds: Vec<u64>,
    pub entries: Vec<EntryReport>,
}

impl BenchReport {
    /// Copy with wall-clock fields removed; what remains is a pure
    /// function of (suite, trials, base_seed).
    pub fn strip_timings(&self) -> Self {
        let mut out = self.clone();
        for e in &mut out.entries {
            e.elapsed_mean_s = None;
            e.elapsed_std_s = None;
        }
        out
    }

    pub fn to_json_pretty(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Plain-text summary, one row per input.
    pub fn to_table(&self) -> String {
        let name_w = self
            .entries
            .iter()
            .map(|e| e.name.len())
            .max()
            .unwrap_or(5)
            .max(5);
        let mut out = format!(
            "{:<name_w$}  {:>6}  {:>15}  {:>15}\n",
            "input", "SR%", "ME mean±std", "time mean±std"
        );
        for e in &self.entries {
            let time = match (e.elapsed_mean_s, e.elapsed_std_s) {
                (Some(m), Some(s)) => format!("{m:.2} ± {s:.2} s"),
                _ => "-".to_string(),
            };
            out.push_str(&format!(
                "{:<name_w$}  {:>6.2}  {:>15}  {:>15}\n",
                e.name,
                e.sr,
                format!("{:.3} ± {:.3}", e.me_mean, e.me_std),
                time
            ));
        }
        out
    }
}

struct TrialRow {
    me: f64,
    false_positives: usize,
    elapsed: Option<f64>,
    failed: bool,
}

/// Runs every input for `trials` seeded repetitions (seeds base_seed,
/// base_seed+1, ...). Scene inputs are redrawn per trial with the trial
/// seed; detection failures score as full misses. Trials run in parallel
/// and aggregate in seed order.
pub fn run_benchmark(suite: &BenchSuite, trials: usize, base_seed: u64) -> Result<BenchReport> {
    if trials == 0 {
        return Err(Error::Config("benchmark needs at least one trial".into()));
    }
    suite.metric.validate()?;
    suite.detector.validate()?;
    let seeds: Vec<u64> = (0..trials as u64).map(|t| base_seed + t).collect();

    let mut entries = Vec::with_capacity(suite.inputs.len());
    for input in &suite.inputs {
        let cfg = input.detector_override().unwrap_or(&suite.detector);
        cfg.validate()?;
        let fixed: Option<(GrayImage, Vec<(f64, f64, f64)>)> = match input {
            BenchInput::Scene { .. } => None,
            BenchInput::Image { path, truth, .. } => {
                if truth.is_empty() {
                    return Err(Error::Config(format!(
                        "input '{}' has no ground-truth circles",
                        input.name()
                    )));
                }
                Some((
                    GrayImage::load(path)?,
                    truth.iter().map(TruthCircle::params).collect(),
                ))
            }
        };

        let rows: Result<Vec<TrialRow>> = seeds
            .par_iter()
            .map(|&seed| -> Result<TrialRow> {
                let (image, truth): (GrayImage, Vec<(f64, f64, f64)>) = match input {
                    BenchInput::Scene { spec, .. } => {
                        let scene = realize_scene(spec, seed)?;
                        (scene.image, scene.circles)
                    }
                    BenchInput::Image { .. } => {
                        let (img, truth) = fixed.as_ref().expect("loaded above");
                        (img.clone(), truth.clone())
                    }
                };
                Ok(match detect_image(&image, cfg, seed) {
                    Ok(res) => {
                        let dets: Vec<(f64, f64, f64)> =
                            res.circles.iter().map(|c| c.params()).collect();
                        let outcome = match_circles(&dets, &truth, &suite.metric);
                        TrialRow {
                            me: outcome.me,
                            false_positives: outcome.false_positives,
                            elapsed: res.elapsed,
                            failed: false,
                        }
                    }
                    Err(_) => TrialRow {
                        me: suite.metric.es_fail,
                        false_positives: 0,
                        elapsed: None,
                        failed: true,
                    },
                })
            })
            .collect();
        let rows = rows?;

        let me_values: Vec<f64> = rows.iter().map(|r| r.me).collect();
        let me_mean = mean(&me_values);
        let timings: Vec<f64> = rows.iter().filter_map(|r| r.elapsed).collect();
        let elapsed_mean = (!timings.is_empty()).then(|| mean(&timings));
        entries.push(EntryReport {
            name: input.name().to_string(),
            trials,
            me_mean,
            me_std: sample_std(&me_values, me_mean),
            sr: success_rate(&me_values),
            false_positives: rows.iter().map(|r| r.false_positives).sum(),
            errors: rows.iter().filter(|r| r.failed).count(),
            elapsed_mean_s: elapsed_mean,
            elapsed_std_s: elapsed_mean.map(|m| sample_std(&timings, m)),
            me_values,
        });
    }
    Ok(BenchReport {
        base_seed,
        trials,
        seeds,
        entries,
    })
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_std(xs: &[f64], mean: f64) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    var.sqrt()
}
