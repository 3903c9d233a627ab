//! Adaptive linear and decision-feedback equalizers.
//!
//! Every update rule has the form `w ← w + μ·g(e)·r` for some error
//! nonlinearity `g`:
//!
//! | algorithm | g(e) |
//! |-----------|------|
//! | SA        | sign(e), with sign(0) = 0 |
//! | LMS       | e |
//! | LMF       | e³ |
//! | LCLMS     | 2a·e³ / (1 + a·e²) |
//! | LCLMA     | a·e / (1 + a·|e|) |
//! | NLCLMA    | a·e / (‖r‖·(‖r‖ + a·|e|)) |
//!
//! The logarithmic-cost rules are the stochastic gradients of
//! `C(e) = φ(e) − ln(1 + a·φ(e)) / a` with `φ(e) = e²` (LCLMS) or `φ(e) = |e|`
//! (LCLMA). LCLMS keeps the factor 2 of `φ'(e) = 2e` explicit; the
//! folded form `μ'·a·e³/(1 + a·e²)` corresponds to `μ' = 2μ`.
//!
//! A decision-feedback equalizer appends the last `h_f` hard decisions to the
//! feed-forward regressor and adapts the extended weight vector with the same
//! rule, using `mu` on the feed-forward block and `mu_fb` on the feedback block.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::signal::decide;
use crate::{Error, Result};

/// Weight norm beyond which an equalizer is declared diverged.
pub const DIVERGENCE_NORM: f64 = 1e12;

/// Regressor norm below which the normalized update is skipped.
pub const NORMALIZED_EPS: f64 = 1e-12;

/// Primary cost φ of the logarithmic cost family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CostKind {
    /// φ(e) = |e|
    AbsError,
    /// φ(e) = e²
    SquaredError,
}

impl CostKind {
    pub fn phi(self, e: f64) -> f64 {
        match self {
            CostKind::AbsError => e.abs(),
            CostKind::SquaredError => e * e,
        }
    }

    /// dφ/de, using sign(0) = 0 for the absolute error.
    pub fn phi_derivative(self, e: f64) -> f64 {
        match self {
            CostKind::AbsError => sign0(e),
            CostKind::SquaredError => 2.0 * e,
        }
    }
}

/// sign with sign(0) = 0.
#[inline]
pub fn sign0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// C(e) = φ(e) − ln(1 + a·φ(e)) / a.
pub fn log_cost(e: f64, a: f64, kind: CostKind) -> f64 {
    let phi = kind.phi(e);
    phi - (a * phi).ln_1p() / a
}

/// L(e) = ln(1 + φ(e)).
pub fn log_term(e: f64, kind: CostKind) -> f64 {
    kind.phi(e).ln_1p()
}

/// g(e) = φ'(e)·a·φ(e) / (1 + a·φ(e)), the derivative of [`log_cost`].
pub fn log_cost_gain(e: f64, a: f64, kind: CostKind) -> f64 {
    let phi = kind.phi(e);
    kind.phi_derivative(e) * a * phi / (1.0 + a * phi)
}

/// a·e / (1 + a·|e|). Bounded in magnitude by both 1 and a·|e|.
#[inline]
pub fn lclma_factor(e: f64, a: f64) -> f64 {
    a * e / (1.0 + a * e.abs())
}

/// 2a·e³ / (1 + a·e²).
#[inline]
pub fn lclms_factor(e: f64, a: f64) -> f64 {
    2.0 * a * e * e * e / (1.0 + a * e * e)
}

/// a·e / (‖r‖·(‖r‖ + a·|e|)), or zero when ‖r‖ is below [`NORMALIZED_EPS`].
#[inline]
pub fn normalized_lclma_factor(e: f64, a: f64, norm: f64) -> f64 {
    if norm < NORMALIZED_EPS {
        0.0
    } else {
        a * e / (norm * (norm + a * e.abs()))
    }
}

/// Adaptation rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Sa,
    Lms,
    Lmf,
    Lclms,
    Lclma,
    #[serde(rename = "nlclma")]
    NormalizedLclma,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Sa,
        Algorithm::Lms,
        Algorithm::Lmf,
        Algorithm::Lclms,
        Algorithm::Lclma,
        Algorithm::NormalizedLclma,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Sa => "sa",
            Algorithm::Lms => "lms",
            Algorithm::Lmf => "lmf",
            Algorithm::Lclms => "lclms",
            Algorithm::Lclma => "lclma",
            Algorithm::NormalizedLclma => "nlclma",
        }
    }

    /// Error nonlinearity g(e). `norm` is ‖r‖ and only matters for the
    /// normalized rule.
    #[inline]
    pub fn gain(self, e: f64, a: f64, norm: f64) -> f64 {
        match self {
            Algorithm::Sa => sign0(e),
            Algorithm::Lms => e,
            Algorithm::Lmf => e * e * e,
            Algorithm::Lclms => lclms_factor(e, a),
            Algorithm::Lclma => lclma_factor(e, a),
            Algorithm::NormalizedLclma => normalized_lclma_factor(e, a, norm),
        }
    }

    fn needs_norm(self) -> bool {
        matches!(self, Algorithm::NormalizedLclma)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown algorithm {s:?}")))
    }
}

/// The conventional baselines handled by [`step_baseline`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    Sa,
    Lms,
    Lmf,
}

impl From<Baseline> for Algorithm {
    fn from(b: Baseline) -> Self {
        match b {
            Baseline::Sa => Algorithm::Sa,
            Baseline::Lms => Algorithm::Lms,
            Baseline::Lmf => Algorithm::Lmf,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EqualizerConfig {
    /// L_a, taps on future received samples.
    pub anti_causal: usize,
    /// L_c, taps on past received samples.
    pub causal: usize,
    /// h_f, number of fed-back decisions; zero for a linear equalizer.
    #[serde(default)]
    pub feedback: usize,
    pub mu: f64,
    #[serde(default = "default_mu_fb")]
    pub mu_fb: f64,
    #[serde(default = "default_a")]
    pub a: f64,
    pub algorithm: Algorithm,
}

fn default_mu_fb() -> f64 {
    0.01
}

fn default_a() -> f64 {
    1.0
}

impl EqualizerConfig {
    pub fn linear(anti_causal: usize, causal: usize, mu: f64, a: f64, algorithm: Algorithm) -> Self {
        EqualizerConfig {
            anti_causal,
            causal,
            feedback: 0,
            mu,
            mu_fb: default_mu_fb(),
            a,
            algorithm,
        }
    }

    /// Feed-forward length h = L_a + L_c + 1.
    pub fn feedforward_len(&self) -> usize {
        self.anti_causal + self.causal + 1
    }

    /// Extended length h + h_f.
    pub fn total_len(&self) -> usize {
        self.feedforward_len() + self.feedback
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::invalid(format!("μ = {} must be > 0", self.mu)));
        }
        if self.feedback > 0 && !(self.mu_fb > 0.0 && self.mu_fb.is_finite()) {
            return Err(Error::invalid(format!("μ_fb = {} must be > 0", self.mu_fb)));
        }
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(Error::invalid(format!("a = {} must be > 0", self.a)));
        }
        Ok(())
    }
}

/// Writes `[r(t+L_a), …, r(t−L_c)]` into `out`, zero padding outside the record.
pub fn fill_regressor(received: &[f64], t: usize, anti_causal: usize, out: &mut [f64]) {
    let top = t as isize + anti_causal as isize;
    for (k, slot) in out.iter_mut().enumerate() {
        let i = top - k as isize;
        *slot = if i >= 0 && (i as usize) < received.len() {
            received[i as usize]
        } else {
            0.0
        };
    }
}

/// Feed-forward regressor `[r(t+L_a), …, r(t−L_c)]`.
pub fn build_regressor(
    received: &[f64],
    t: usize,
    anti_causal: usize,
    causal: usize,
) -> Result<Vec<f64>> {
    if t >= received.len() {
        return Err(Error::IndexOutOfRange {
            index: t,
            len: received.len(),
        });
    }
    let mut r = vec![0.0; anti_causal + causal + 1];
    fill_regressor(received, t, anti_causal, &mut r);
    Ok(r)
}

/// Soft estimate wᵀr.
pub fn predict(weights: &[f64], regressor: &[f64]) -> Result<f64> {
    if weights.len() != regressor.len() {
        return Err(Error::DimensionMismatch {
            expected: weights.len(),
            actual: regressor.len(),
        });
    }
    Ok(dot(weights, regressor))
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Extended DFE regressor: the feed-forward window followed by the `h_f`
/// most recent decisions (`decisions[0]` is b̄(t−1)). Missing history is zero.
pub fn dfe_extend(window: &[f64], decisions: &[f64], feedback: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(window.len() + feedback);
    out.extend_from_slice(window);
    out.extend((0..feedback).map(|k| decisions.get(k).copied().unwrap_or(0.0)));
    out
}

fn check_health(weights: &[f64]) -> Result<()> {
    let norm2: f64 = weights.iter().map(|w| w * w).sum();
    if !norm2.is_finite() || norm2 > DIVERGENCE_NORM * DIVERGENCE_NORM {
        return Err(Error::Diverged);
    }
    Ok(())
}

fn apply(weights: &mut [f64], regressor: &[f64], step: f64) -> Result<()> {
    if weights.len() != regressor.len() {
        return Err(Error::DimensionMismatch {
            expected: weights.len(),
            actual: regressor.len(),
        });
    }
    if step != 0.0 {
        for (w, r) in weights.iter_mut().zip(regressor) {
            *w += step * r;
        }
    }
    check_health(weights)
}

/// LCLMS update `w += μ·2a·e³/(1 + a·e²)·r`.
pub fn step_lclms(weights: &mut [f64], regressor: &[f64], e: f64, mu: f64, a: f64) -> Result<()> {
    apply(weights, regressor, mu * lclms_factor(e, a))
}

/// LCLMA update `w += μ·a·e/(1 + a·|e|)·r`.
pub fn step_lclma(weights: &mut [f64], regressor: &[f64], e: f64, mu: f64, a: f64) -> Result<()> {
    apply(weights, regressor, mu * lclma_factor(e, a))
}

/// SA, LMS or LMF update.
pub fn step_baseline(
    weights: &mut [f64],
    regressor: &[f64],
    e: f64,
    mu: f64,
    kind: Baseline,
) -> Result<()> {
    apply(weights, regressor, mu * Algorithm::from(kind).gain(e, 1.0, 0.0))
}

/// Normalized LCLMA update `w += μ·a·e/(‖r‖(‖r‖ + a|e|))·r`; skipped when
/// ‖r‖ < [`NORMALIZED_EPS`].
pub fn step_normalized_lclma(
    weights: &mut [f64],
    regressor: &[f64],
    e: f64,
    mu: f64,
    a: f64,
) -> Result<()> {
    let norm = dot(regressor, regressor).sqrt();
    apply(weights, regressor, mu * normalized_lclma_factor(e, a, norm))
}

/// Output of one equalizer step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutput {
    /// Soft estimate b̂(t).
    pub soft: f64,
    /// Hard decision Q(b̂(t)).
    pub decision: f64,
    /// Error used for adaptation.
    pub error: f64,
}

/// Adaptive equalizer state: extended weights `[w; f]` and the decision history.
#[derive(Debug, Clone)]
pub struct Equalizer {
    config: EqualizerConfig,
    weights: Vec<f64>,
    regressor: Vec<f64>,
    // Most recent decision first.
    history: Vec<f64>,
}

impl Equalizer {
    /// Zero-initialised equalizer.
    pub fn new(config: EqualizerConfig) -> Result<Self> {
        config.validate()?;
        let n = config.total_len();
        Ok(Equalizer {
            config,
            weights: vec![0.0; n],
            regressor: vec![0.0; n],
            history: vec![0.0; config.feedback],
        })
    }

    pub fn config(&self) -> &EqualizerConfig {
        &self.config
    }

    /// The extended weight vector `[w; f]`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn feedforward(&self) -> &[f64] {
        &self.weights[..self.config.feedforward_len()]
    }

    pub fn feedback(&self) -> &[f64] {
        &self.weights[self.config.feedforward_len()..]
    }

    /// Past decisions, most recent first.
    pub fn decisions(&self) -> &[f64] {
        &self.history
    }

    /// Regressor of the last [`Equalizer::load`] call.
    pub fn regressor(&self) -> &[f64] {
        &self.regressor
    }

    /// Fills the extended regressor for time `t` and returns the soft estimate.
    pub fn load(&mut self, received: &[f64], t: usize) -> f64 {
        let h = self.config.feedforward_len();
        fill_regressor(received, t, self.config.anti_causal, &mut self.regressor[..h]);
        self.regressor[h..].copy_from_slice(&self.history);
        dot(&self.weights, &self.regressor)
    }

    /// Adapts on the loaded regressor with error `e`.
    pub fn adapt(&mut self, e: f64) -> Result<()> {
        let cfg = &self.config;
        let norm = if cfg.algorithm.needs_norm() {
            dot(&self.regressor, &self.regressor).sqrt()
        } else {
            0.0
        };
        let g = cfg.algorithm.gain(e, cfg.a, norm);
        if g != 0.0 {
            let h = cfg.feedforward_len();
            let (ff_w, fb_w) = self.weights.split_at_mut(h);
            let (ff_r, fb_r) = self.regressor.split_at(h);
            let step = cfg.mu * g;
            ff_w.iter_mut().zip(ff_r).for_each(|(w, r)| *w += step * r);
            let step = cfg.mu_fb * g;
            fb_w.iter_mut().zip(fb_r).for_each(|(w, r)| *w += step * r);
        }
        check_health(&self.weights)
    }

    /// Records a hard decision in the feedback history.
    pub fn push_decision(&mut self, decision: f64) {
        if !self.history.is_empty() {
            self.history.rotate_right(1);
            self.history[0] = decision;
        }
    }

    /// One full equalization step at time `t`. With `reference = Some(b)` the
    /// error is `b − b̂` (training); otherwise it is `Q(b̂) − b̂`.
    pub fn step(&mut self, received: &[f64], t: usize, reference: Option<f64>) -> Result<StepOutput> {
        let soft = self.load(received, t);
        if !soft.is_finite() {
            return Err(Error::Diverged);
        }
        let decision = decide(soft);
        let error = reference.unwrap_or(decision) - soft;
        self.adapt(error)?;
        self.push_decision(decision);
        Ok(StepOutput {
            soft,
            decision,
            error,
        })
    }
}
