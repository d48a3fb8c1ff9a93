//! The learning automaton: candidate-circle action sets, the
//! reward/inaction probability update, roulette selection, and the
//! learning loop that concentrates probability mass on circles whose
//! perimeters coincide with edge pixels.

use std::collections::{BTreeSet, HashSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::edges::{EdgeMap, SampledPoints};
use crate::error::{Error, Result};
use crate::geometry::{circle_from_triplet, rasterize_circle, CandidateCircle};
use crate::seeding;

/// Construction limits for the action set.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ActionSetConfig {
    /// Smallest admissible circle radius, in pixels. Tiny circles are
    /// usually noise.
    pub r_min: f64,
    /// Largest admissible circle radius, in pixels.
    pub r_max: f64,
    /// Maximum number of actions kept.
    pub cap: usize,
    /// Candidates whose ideal perimeter is clipped away by the image
    /// border beyond this fraction are rejected; their scores would rest
    /// on too few testable pixels.
    pub max_clip_fraction: f64,
}

impl Default for ActionSetConfig {
    fn default() -> Self {
        ActionSetConfig {
            r_min: 40.0,
            r_max: 150.0,
            cap: 1000,
            max_clip_fraction: 0.5,
        }
    }
}

impl ActionSetConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_min.is_finite() && self.r_min >= 1.0) {
            return Err(Error::Config(format!("r_min must be >= 1, got {}", self.r_min)));
        }
        if !(self.r_max.is_finite() && self.r_max > self.r_min) {
            return Err(Error::Config(format!(
                "r_max must exceed r_min ({}), got {}",
                self.r_min, self.r_max
            )));
        }
        if self.cap == 0 {
            return Err(Error::Config("action cap must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.max_clip_fraction) {
            return Err(Error::Config(format!(
                "max_clip_fraction must be in [0, 1], got {}",
                self.max_clip_fraction
            )));
        }
        Ok(())
    }
}

/// The automaton's actions: deduplicated, radius- and clip-filtered
/// candidate circles, tied to the image dimensions they were built for.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSet {
    actions: Vec<CandidateCircle>,
    width: u32,
    height: u32,
    r_min: f64,
    r_max: f64,
}

impl ActionSet {
    /// Test support: wraps explicit actions without running the filters.
    #[cfg(test)]
    pub(crate) fn from_parts(
        actions: Vec<CandidateCircle>,
        width: u32,
        height: u32,
        r_min: f64,
        r_max: f64,
    ) -> Self {
        ActionSet {
            actions,
            width,
            height,
            r_min,
            r_max,
        }
    }

    pub fn actions(&self) -> &[CandidateCircle] {
        &self.actions
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn get(&self, i: usize) -> &CandidateCircle {
        &self.actions[i]
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }
}

/// Builds the action set from sampled edge points.
///
/// When C(n,3) fits under the cap every triplet is considered in
/// lexicographic order; otherwise distinct triplets are drawn uniformly
/// (without replacement) until the cap is reached in survivors, the pool
/// is exhausted, or a fixed attempt budget (100x cap) runs out.
///
/// A candidate survives if its triplet is non-collinear, its radius lies
/// in [r_min, r_max], its perimeter is not over-clipped, and no earlier
/// survivor rounds to the same (x0, y0, r) integer triple.
pub fn build_action_set(
    pts: &SampledPoints,
    width: u32,
    height: u32,
    cfg: &ActionSetConfig,
    seed: u64,
) -> Result<ActionSet> {
    cfg.validate()?;
    let n = pts.count();
    if n < 3 {
        return Err(Error::TooFewEdgePoints { needed: 3, found: n });
    }

    let mut actions = Vec::new();
    let mut dedup: BTreeSet<(i64, i64, i64)> = BTreeSet::new();
    let mut consider = |i: usize, j: usize, k: usize, actions: &mut Vec<CandidateCircle>| {
        let Ok((x0, y0, r)) = circle_from_triplet(pts.get(i), pts.get(j), pts.get(k)) else {
            return;
        };
        if r < cfg.r_min || r > cfg.r_max {
            return;
        }
        let key = (x0.round() as i64, y0.round() as i64, r.round() as i64);
        if dedup.contains(&key) {
            return;
        }
        match rasterize_circle(x0, y0, r, width, height) {
            Ok(p) if p.clipped_fraction() <= cfg.max_clip_fraction => {
                dedup.insert(key);
                actions.push(CandidateCircle { i, j, k, x0, y0, r });
            }
            _ => {}
        }
    };

    let total = n as u128 * (n as u128 - 1) * (n as u128 - 2) / 6;
    if total <= cfg.cap as u128 {
        for i in 0..n - 2 {
            for j in i + 1..n - 1 {
                for k in j + 1..n {
                    consider(i, j, k, &mut actions);
                }
            }
        }
    } else {
        let mut rng = seeding::stream_rng(seed, seeding::TRIPLETS);
        let mut seen: HashSet<(usize, usize, usize)> = HashSet::new();
        let budget = cfg.cap.saturating_mul(100);
        let mut attempts = 0usize;
        while actions.len() < cfg.cap && attempts < budget && (seen.len() as u128) < total {
            attempts += 1;
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            let c = rng.random_range(0..n);
            if a == b || b == c || a == c {
                continue;
            }
            let mut t = [a, b, c];
            t.sort_unstable();
            if !seen.insert((t[0], t[1], t[2])) {
                continue;
            }
            consider(t[0], t[1], t[2], &mut actions);
        }
    }

    if actions.is_empty() {
        return Err(Error::NoFeasibleActions);
    }
    Ok(ActionSet {
        actions,
        width,
        height,
        r_min: cfg.r_min,
        r_max: cfg.r_max,
    })
}

/// Per-action probabilities, kept on the simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector {
    p: Vec<f64>,
    iteration: usize,
}

impl ProbabilityVector {
    pub fn uniform(n: usize) -> Self {
        assert!(n >= 1, "need at least one action");
        ProbabilityVector {
            p: vec![1.0 / n as f64; n],
            iteration: 0,
        }
    }

    /// Wraps explicit probabilities; they must already lie on the simplex
    /// (sum within 1e-6 of 1, components in [0,1]). The vector is
    /// renormalized exactly.
    pub fn from_probs(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::Config("probability vector must be nonempty".into()));
        }
        let sum: f64 = p.iter().sum();
        if !((sum - 1.0).abs() <= 1e-6) || p.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::Config(format!(
                "probabilities must be in [0, 1] and sum to 1, got sum {sum}"
            )));
        }
        let p = p.into_iter().map(|v| (v / sum).clamp(0.0, 1.0)).collect();
        Ok(ProbabilityVector { p, iteration: 0 })
    }

    pub fn probs(&self) -> &[f64] {
        &self.p
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        self.p[i]
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn max(&self) -> f64 {
        self.p.iter().copied().fold(0.0, f64::max)
    }
}

/// Reward/inaction update: the selected action's probability moves toward
/// 1 by theta*beta of the remaining gap, every other action shrinks by the
/// same factor. beta = 0 leaves the distribution unchanged. The update
/// preserves the simplex algebraically; an explicit renormalization guards
/// against float drift over long runs.
pub fn lri_update(
    pv: &ProbabilityVector,
    selected: usize,
    beta: f64,
    theta: f64,
) -> ProbabilityVector {
    assert!(selected < pv.len(), "action index out of range");
    assert!((0.0..=1.0).contains(&beta), "beta must be in [0, 1]");
    assert!(theta > 0.0 && theta < 1.0, "theta must be in (0, 1)");
    let g = theta * beta;
    let mut p: Vec<f64> = pv
        .p
        .iter()
        .enumerate()
        .map(|(i, &pi)| if i == selected { pi + g * (1.0 - pi) } else { pi - g * pi })
        .collect();
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        for v in &mut p {
            *v = (*v / sum).clamp(0.0, 1.0);
        }
    }
    ProbabilityVector {
        p,
        iteration: pv.iteration + 1,
    }
}

/// Roulette selection: smallest index whose cumulative probability
/// exceeds z. Falls back to the last nonzero entry if accumulated
/// rounding leaves the total a hair under z.
pub fn select_action(pv: &ProbabilityVector, z: f64) -> usize {
    debug_assert!((0.0..1.0).contains(&z), "z must be in [0, 1)");
    let mut cum = 0.0;
    let mut fallback = 0;
    for (i, &pi) in pv.p.iter().enumerate() {
        cum += pi;
        if cum > z {
            return i;
        }
        if pi > 0.0 {
            fallback = i;
        }
    }
    fallback
}

/// Fraction of a candidate's unique in-bounds perimeter pixels that land
/// on edge pixels.
pub fn reinforcement(c: &CandidateCircle, edges: &EdgeMap) -> Result<f64> {
    let ras = c.rasterize(edges.width(), edges.height())?;
    let hits = ras
        .points()
        .iter()
        .filter(|&&(x, y)| edges.is_edge(x, y))
        .count();
    Ok(hits as f64 / ras.count() as f64)
}

/// Every per-action score evaluated by a learning run, indexed like the
/// action set.
pub type BetaCache = Vec<f64>;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LearningConfig {
    /// Learning rate in (0, 1).
    pub theta: f64,
    /// Iteration cap.
    pub k_max: usize,
    /// Stop once any action's probability reaches this value.
    pub p_stop: f64,
    /// Optional early stop: halt once a selected action scores at least
    /// this beta.
    pub beta_min_solution: Option<f64>,
    /// Seed for the roulette stream.
    pub seed: u64,
}

impl Default for LearningConfig {
    fn default() -> Self {
        LearningConfig {
            theta: 0.001,
            k_max: 5000,
            p_stop: 0.2,
            beta_min_solution: None,
            seed: 0,
        }
    }
}

impl LearningConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta.is_finite() && self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::Config(format!("theta must be in (0, 1), got {}", self.theta)));
        }
        if !(self.p_stop.is_finite() && self.p_stop > 0.0 && self.p_stop <= 1.0) {
            return Err(Error::Config(format!(
                "p_stop must be in (0, 1], got {}",
                self.p_stop
            )));
        }
        if let Some(bm) = self.beta_min_solution {
            if !(0.0..=1.0).contains(&bm) {
                return Err(Error::Config(format!(
                    "beta_min_solution must be in [0, 1], got {bm}"
                )));
            }
        }
        Ok(())
    }
}

/// Runs the learning loop and returns the final distribution plus the
/// score of every action.
///
/// All scores are computed up front: reinforcement is a pure function of
/// (action, edge map), so precomputing is observationally identical to
/// evaluating lazily on first selection, and the extraction stage needs
/// the full cache anyway. The loop itself is strictly sequential; each
/// update depends on the previous distribution.
///
/// Stops when k_max is exhausted, when any probability reaches p_stop
/// (checked before each draw, so a saturated distribution runs zero
/// iterations), or when a selected action scores at least
/// beta_min_solution (if set).
pub fn run_learning(
    actions: &ActionSet,
    edges: &EdgeMap,
    cfg: &LearningConfig,
) -> Result<(ProbabilityVector, BetaCache)> {
    cfg.validate()?;
    if actions.is_empty() {
        return Err(Error::NoFeasibleActions);
    }
    if edges.width() != actions.width() || edges.height() != actions.height() {
        return Err(Error::DimensionMismatch {
            got_w: edges.width(),
            got_h: edges.height(),
            want_w: actions.width(),
            want_h: actions.height(),
        });
    }
    let betas: BetaCache = actions
        .actions()
        .iter()
        .map(|c| reinforcement(c, edges))
        .collect::<Result<_>>()?;

    let mut pv = ProbabilityVector::uniform(actions.len());
    let mut rng = seeding::stream_rng(cfg.seed, seeding::ROULETTE);
    for _ in 0..cfg.k_max {
        if pv.max() >= cfg.p_stop {
            break;
        }
        let z = rng.random::<f64>();
        let selected = select_action(&pv, z);
        let beta = betas[selected];
        pv = lri_update(&pv, selected, beta, cfg.theta);
        if cfg.beta_min_solution.is_some_and(|bm| beta >= bm) {
            break;
        }
    }
    Ok((pv, betas))
}
