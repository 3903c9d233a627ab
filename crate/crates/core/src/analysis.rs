//! Steady-state tracking predictors for LCLMA and the Monte-Carlo oracles
//! used to check them.
//!
//! The predictors model the optimal weights as a random walk
//! `w*(t+1) = w*(t) + α(t)` with `E[ααᵀ] = A`, and the estimation noise as the
//! Bernoulli-Gaussian mixture of [`NoiseModel`]. Closed forms:
//!
//! ```text
//! Gaussian noise:   η  = (μ·a·Tr(R)·σ² + Tr(A)/(μ·a)) / (2 − μ·a·Tr(R))
//! impulsive noise:  η* = (μ·Tr(R)·(ν + a²(1−ν)σ_v²) + Tr(A)/μ)
//!                        / (a(1−ν)(2 − a·μ·Tr(R)) + √(8/π)·ν/σ_n)
//! steady MSE:       η + ν·σ_n² + (1−ν)·σ_v²
//! ```
//!
//! A decision-feedback equalizer with `h_f` feedback taps uses
//! `Tr(R) + h_f` in place of `Tr(R)`, since every fed-back BPSK decision has
//! unit power.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::NoiseModel;
use crate::equalizer::{log_cost_gain, Algorithm, CostKind};
use crate::seeding::derive_seed;
use crate::{Error, Result};

/// Inputs of the tracking EMSE predictors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackingScenario {
    /// Tr(R) of the (feed-forward) regressor autocorrelation.
    pub trace_r: f64,
    /// Tr(A) of the random-walk increment covariance.
    pub trace_a: f64,
    pub sigma_v2: f64,
    /// σ_n² = σ_v² + σ_γ².
    pub sigma_n2: f64,
    /// Impulse probability ν.
    pub nu: f64,
    pub mu: f64,
    pub a: f64,
    /// Feedback length h_f; zero for a linear equalizer.
    #[serde(default)]
    pub feedback: usize,
}

impl TrackingScenario {
    pub fn from_noise(noise: &NoiseModel, trace_r: f64, trace_a: f64, mu: f64, a: f64) -> Self {
        TrackingScenario {
            trace_r,
            trace_a,
            sigma_v2: noise.sigma_v2(),
            sigma_n2: noise.sigma_n2(),
            nu: noise.impulse_prob(),
            mu,
            a,
            feedback: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.trace_r,
            self.trace_a,
            self.sigma_v2,
            self.sigma_n2,
            self.nu,
            self.mu,
            self.a,
        ]
        .iter()
        .all(|x| x.is_finite());
        if !finite {
            return Err(Error::NonFinite("tracking scenario parameter".into()));
        }
        if self.trace_r < 0.0 || self.trace_a < 0.0 {
            return Err(Error::invalid("traces must be >= 0"));
        }
        if self.mu <= 0.0 || self.a <= 0.0 {
            return Err(Error::invalid("μ and a must be > 0"));
        }
        if self.sigma_v2 < 0.0 || self.sigma_n2 < self.sigma_v2 {
            return Err(Error::invalid("need 0 <= σ_v² <= σ_n²"));
        }
        if !(0.0..=1.0).contains(&self.nu) {
            return Err(Error::invalid(format!("ν = {} outside [0, 1]", self.nu)));
        }
        Ok(())
    }

    /// Tr(R) + h_f.
    pub fn effective_trace(&self) -> f64 {
        self.trace_r + self.feedback as f64
    }

    /// Overall noise power (1−ν)σ_v² + νσ_n²; equals σ_v² when ν = 0.
    pub fn noise_power(&self) -> f64 {
        (1.0 - self.nu) * self.sigma_v2 + self.nu * self.sigma_n2
    }
}

/// Tracking EMSE of LCLMA under Gaussian noise whose variance is the
/// scenario's overall noise power.
pub fn emse_lclma_gaussian(s: &TrackingScenario) -> Result<f64> {
    s.validate()?;
    let step = s.mu * s.a * s.effective_trace();
    let denominator = 2.0 - step;
    if denominator <= 0.0 {
        return Err(Error::StabilityBound { denominator });
    }
    Ok((step * s.noise_power() + s.trace_a / (s.mu * s.a)) / denominator)
}

/// Tracking EMSE of LCLMA (or LCLMA-DFE when `feedback > 0`) under
/// Bernoulli-Gaussian impulsive noise.
pub fn emse_lclma_impulsive(s: &TrackingScenario) -> Result<f64> {
    s.validate()?;
    let tr = s.effective_trace();
    let numerator =
        s.mu * tr * (s.nu + s.a * s.a * (1.0 - s.nu) * s.sigma_v2) + s.trace_a / s.mu;
    let impulse_term = if s.nu > 0.0 {
        (8.0 / PI).sqrt() * s.nu / s.sigma_n2.sqrt()
    } else {
        0.0
    };
    let denominator = s.a * (1.0 - s.nu) * (2.0 - s.a * s.mu * tr) + impulse_term;
    if !(denominator > 0.0) {
        return Err(Error::StabilityBound { denominator });
    }
    Ok(numerator / denominator)
}

/// Limiting MSE η + νσ_n² + (1−ν)σ_v².
pub fn steady_mse(s: &TrackingScenario, emse: f64) -> Result<f64> {
    if !(emse >= 0.0) {
        return Err(Error::invalid(format!("EMSE {emse} must be >= 0")));
    }
    Ok(emse + s.nu * s.sigma_n2 + (1.0 - s.nu) * s.sigma_v2)
}

/// h_G = E[e·g(e)]/E[e²] and h_U = E[g²(e)].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HFunctions {
    pub h_g: f64,
    pub h_u: f64,
}

// Simpson panels per mixture component, on ±QUAD_SPAN standard deviations.
// A multiple of four keeps the origin on a panel-pair boundary.
const QUAD_PANELS: usize = 8000;
const QUAD_SPAN: f64 = 14.0;

/// Expectation of `f(e)` for `e = e_a + n`, `e_a ~ N(0, σ_ea²)` and `n` the
/// mixture noise, by composite Simpson quadrature on each Gaussian component.
/// Relative accuracy is better than 10⁻⁸ for the gains used here.
pub fn mixture_expectation(noise: &NoiseModel, sigma_ea2: f64, f: impl Fn(f64) -> f64) -> f64 {
    let components = [
        (1.0 - noise.impulse_prob(), sigma_ea2 + noise.sigma_v2()),
        (noise.impulse_prob(), sigma_ea2 + noise.sigma_n2()),
    ];
    components
        .iter()
        .filter(|(w, _)| *w > 0.0)
        .map(|&(w, var)| w * gaussian_expectation(var, &f))
        .sum()
}

fn gaussian_expectation(var: f64, f: &impl Fn(f64) -> f64) -> f64 {
    let s = var.sqrt();
    let h = 2.0 * QUAD_SPAN / QUAD_PANELS as f64;
    let density = |u: f64| (-0.5 * u * u).exp() / (2.0 * PI).sqrt();
    let term = |i: usize| {
        let u = -QUAD_SPAN + i as f64 * h;
        f(s * u) * density(u)
    };
    let mut acc = term(0) + term(QUAD_PANELS);
    for i in 1..QUAD_PANELS {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * term(i);
    }
    acc * h / 3.0
}

/// h_G and h_U for an arbitrary error nonlinearity, by quadrature.
pub fn h_functions_with(noise: &NoiseModel, sigma_ea2: f64, g: impl Fn(f64) -> f64) -> Result<HFunctions> {
    if !(sigma_ea2 >= 0.0) {
        return Err(Error::invalid(format!("σ_ea² = {sigma_ea2} must be >= 0")));
    }
    let second_moment = sigma_ea2 + noise.variance();
    let eg = mixture_expectation(noise, sigma_ea2, |e| e * g(e));
    let gg = mixture_expectation(noise, sigma_ea2, |e| {
        let v = g(e);
        v * v
    });
    Ok(HFunctions {
        h_g: eg / second_moment,
        h_u: gg,
    })
}

/// h_G and h_U of the logarithmic-cost gain `g(e) = φ'(e)·aφ(e)/(1 + aφ(e))`.
pub fn h_functions(noise: &NoiseModel, sigma_ea2: f64, a: f64, kind: CostKind) -> Result<HFunctions> {
    if !(a > 0.0) {
        return Err(Error::invalid(format!("a = {a} must be > 0")));
    }
    h_functions_with(noise, sigma_ea2, |e| log_cost_gain(e, a, kind))
}

/// Monte-Carlo estimate of h_G and h_U from `samples` draws.
pub fn h_functions_monte_carlo(
    noise: &NoiseModel,
    sigma_ea2: f64,
    g: impl Fn(f64) -> f64,
    samples: usize,
    seed: u64,
) -> HFunctions {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (sv, sn, se) = (
        noise.sigma_v2().sqrt(),
        noise.sigma_n2().sqrt(),
        sigma_ea2.sqrt(),
    );
    let (mut eg, mut gg, mut ee) = (0.0, 0.0, 0.0);
    for _ in 0..samples {
        let impulse = rng.random::<f64>() < noise.impulse_prob();
        let n: f64 = rng.sample::<f64, _>(StandardNormal) * if impulse { sn } else { sv };
        let ea: f64 = rng.sample::<f64, _>(StandardNormal) * se;
        let e = ea + n;
        let v = g(e);
        eg += e * v;
        gg += v * v;
        ee += e * e;
    }
    let m = samples as f64;
    HFunctions {
        h_g: eg / ee,
        h_u: gg / m,
    }
}

/// Least-squares weights minimising Σ (d − wᵀr)² over the given rows.
pub fn least_squares_fit(regressors: &[Vec<f64>], targets: &[f64]) -> Result<Vec<f64>> {
    let Some(first) = regressors.first() else {
        return Err(Error::invalid("least squares needs at least one row"));
    };
    if regressors.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: regressors.len(),
            actual: targets.len(),
        });
    }
    let h = first.len();
    let mut gram = DMatrix::<f64>::zeros(h, h);
    let mut cross = DVector::<f64>::zeros(h);
    for (r, d) in regressors.iter().zip(targets) {
        if r.len() != h {
            return Err(Error::DimensionMismatch {
                expected: h,
                actual: r.len(),
            });
        }
        let v = DVector::from_column_slice(r);
        gram.ger(1.0, &v, &v, 1.0);
        cross.axpy(*d, &v, 1.0);
    }
    let solution = match gram.clone().cholesky() {
        Some(chol) => chol.solve(&cross),
        None => gram
            .svd(true, true)
            .solve(&cross, 1e-12)
            .map_err(|e| Error::invalid(format!("least squares: {e}")))?,
    };
    Ok(solution.iter().copied().collect())
}

/// Tapped delay line `[x(t), x(t−1), …, x(t−h+1)]`, zero before the record.
fn delay_line(x: &[f64], t: usize, h: usize) -> Vec<f64> {
    (0..h)
        .map(|k| if k <= t { x[t - k] } else { 0.0 })
        .collect()
}

/// Estimates Tr(A) from a noiseless input/target record by refitting the
/// optimal weights on consecutive windows of `window` samples.
///
/// For a random walk the difference of consecutive window means has per-tap
/// variance σ²(2W² + 1)/(3W), which is inverted here.
pub fn estimate_trace_a(input: &[f64], targets: &[f64], h: usize, window: usize) -> Result<f64> {
    if window <= h {
        return Err(Error::invalid("window must exceed the filter length"));
    }
    if input.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: input.len(),
            actual: targets.len(),
        });
    }
    let windows = input.len() / window;
    if windows < 2 {
        return Err(Error::invalid("need at least two windows"));
    }
    let fits = (0..windows)
        .map(|k| {
            let range = k * window..(k + 1) * window;
            let rows: Vec<Vec<f64>> = range.clone().map(|t| delay_line(input, t, h)).collect();
            least_squares_fit(&rows, &targets[range])
        })
        .collect::<Result<Vec<_>>>()?;
    let mean_sq: f64 = fits
        .windows(2)
        .map(|p| p[0].iter().zip(&p[1]).map(|(a, b)| (b - a).powi(2)).sum::<f64>())
        .sum::<f64>()
        / (windows - 1) as f64;
    let w = window as f64;
    Ok(mean_sq * 3.0 * w / (2.0 * w * w + 1.0))
}

/// Mean squared norm of a set of regressors, an estimate of Tr(R).
pub fn mean_square_norm<'a>(regressors: impl IntoIterator<Item = &'a [f64]>) -> f64 {
    let (sum, count) = regressors
        .into_iter()
        .fold((0.0, 0usize), |(s, c), r| (s + r.iter().map(|x| x * x).sum::<f64>(), c + 1));
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Input process of the steady-state oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InputKind {
    /// White ±1 symbols, R = I.
    Bpsk,
    /// White unit-variance Gaussian, R = I.
    Gaussian,
}

/// Steady-state EMSE experiment.
///
/// The adaptive filter identifies a plant `w*` of length `h` driven by a white
/// input; the desired signal is `d(t) = w*(t)ᵀr(t) + n(t)` with `n` drawn from
/// `noise`, so `n` is exactly the estimation noise of the optimal filter.
/// With `drift > 0` every plant tap performs a Gaussian random walk, giving
/// Tr(A) = h·drift².
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyStateConfig {
    pub plant: Vec<f64>,
    pub input: InputKind,
    pub drift: f64,
    pub noise: NoiseModel,
    pub algorithm: Algorithm,
    pub mu: f64,
    pub a: f64,
    pub samples: usize,
    pub burn_in: usize,
    pub trials: usize,
    pub seed: u64,
}

impl SteadyStateConfig {
    pub fn len(&self) -> usize {
        self.plant.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plant.is_empty()
    }

    /// Tr(R) = h for both unit-power inputs.
    pub fn trace_r(&self) -> f64 {
        self.plant.len() as f64
    }

    pub fn trace_a(&self) -> f64 {
        self.plant.len() as f64 * self.drift * self.drift
    }

    /// Predictor inputs matching this experiment.
    pub fn scenario(&self) -> TrackingScenario {
        TrackingScenario::from_noise(&self.noise, self.trace_r(), self.trace_a(), self.mu, self.a)
    }

    fn validate(&self) -> Result<()> {
        if self.plant.is_empty() {
            return Err(Error::invalid("plant needs at least one tap"));
        }
        if self.samples <= self.burn_in {
            return Err(Error::invalid("samples must exceed burn-in"));
        }
        if self.trials == 0 {
            return Err(Error::invalid("need at least one trial"));
        }
        if !(self.mu > 0.0 && self.a > 0.0 && self.drift >= 0.0) {
            return Err(Error::invalid("need μ > 0, a > 0, drift >= 0"));
        }
        Ok(())
    }
}

/// Averaged steady-state EMSE.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyStateEstimate {
    /// Mean over non-diverged trials.
    pub emse: f64,
    /// Standard error of the mean.
    pub std_err: f64,
    pub per_trial: Vec<f64>,
    pub diverged: usize,
    /// Time-averaged e² after burn-in, over non-diverged trials.
    pub mse: f64,
}

/// Runs the steady-state experiment; trials execute in parallel and are
/// reduced in trial order.
pub fn mc_steady_state_emse(cfg: &SteadyStateConfig) -> Result<SteadyStateEstimate> {
    cfg.validate()?;
    let w_star = if cfg.drift == 0.0 {
        fit_plant(cfg)?
    } else {
        cfg.plant.clone()
    };
    let outcomes: Vec<Option<(f64, f64)>> = (0..cfg.trials)
        .into_par_iter()
        .map(|k| steady_state_trial(cfg, &w_star, derive_seed(cfg.seed, &format!("emse-trial-{k}"))))
        .collect();
    let kept: Vec<(f64, f64)> = outcomes.iter().flatten().copied().collect();
    let diverged = outcomes.len() - kept.len();
    if kept.is_empty() {
        return Ok(SteadyStateEstimate {
            emse: f64::NAN,
            std_err: f64::NAN,
            per_trial: vec![],
            diverged,
            mse: f64::NAN,
        });
    }
    let per_trial: Vec<f64> = kept.iter().map(|p| p.0).collect();
    let m = per_trial.len() as f64;
    let emse = per_trial.iter().sum::<f64>() / m;
    let var = if per_trial.len() > 1 {
        per_trial.iter().map(|x| (x - emse).powi(2)).sum::<f64>() / (m - 1.0)
    } else {
        0.0
    };
    Ok(SteadyStateEstimate {
        emse,
        std_err: (var / m).sqrt(),
        per_trial,
        diverged,
        mse: kept.iter().map(|p| p.1).sum::<f64>() / m,
    })
}

fn draw_input(rng: &mut ChaCha8Rng, kind: InputKind) -> f64 {
    match kind {
        InputKind::Bpsk => {
            if rng.random_bool(0.5) {
                1.0
            } else {
                -1.0
            }
        }
        InputKind::Gaussian => rng.sample(StandardNormal),
    }
}

/// w* from a long noiseless record of the (stationary) plant.
fn fit_plant(cfg: &SteadyStateConfig) -> Result<Vec<f64>> {
    let h = cfg.len();
    let n = 50 * h + 1000;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "wiener-fit"));
    let x: Vec<f64> = (0..n).map(|_| draw_input(&mut rng, cfg.input)).collect();
    let rows: Vec<Vec<f64>> = (0..n).map(|t| delay_line(&x, t, h)).collect();
    let d: Vec<f64> = rows
        .iter()
        .map(|r| r.iter().zip(&cfg.plant).map(|(a, b)| a * b).sum())
        .collect();
    least_squares_fit(&rows, &d)
}

/// Returns (mean e_a², mean e²) after burn-in, or `None` on divergence.
fn steady_state_trial(cfg: &SteadyStateConfig, w_star: &[f64], seed: u64) -> Option<(f64, f64)> {
    let h = cfg.len();
    let mut input_rng = ChaCha8Rng::seed_from_u64(seed);
    input_rng.set_stream(0);
    let mut noise_rng = input_rng.clone();
    noise_rng.set_stream(1);
    let mut drift_rng = input_rng.clone();
    drift_rng.set_stream(2);

    let mut plant = w_star.to_vec();
    let mut w = vec![0.0; h];
    let mut line = vec![0.0; h];
    let (sv, sn) = (cfg.noise.sigma_v2().sqrt(), cfg.noise.sigma_n2().sqrt());
    let (mut ea_acc, mut e_acc) = (0.0, 0.0);

    for t in 0..cfg.samples {
        line.rotate_right(1);
        line[0] = draw_input(&mut input_rng, cfg.input);

        let impulse = noise_rng.random::<f64>() < cfg.noise.impulse_prob();
        let n = noise_rng.sample::<f64, _>(StandardNormal) * if impulse { sn } else { sv };

        let (mut y_opt, mut y, mut norm2) = (0.0, 0.0, 0.0);
        for k in 0..h {
            y_opt += plant[k] * line[k];
            y += w[k] * line[k];
            norm2 += line[k] * line[k];
        }
        let e = y_opt + n - y;
        if t >= cfg.burn_in {
            let ea = y_opt - y;
            ea_acc += ea * ea;
            e_acc += e * e;
        }

        let step = cfg.mu * cfg.algorithm.gain(e, cfg.a, norm2.sqrt());
        let mut wn2 = 0.0;
        for k in 0..h {
            w[k] += step * line[k];
            wn2 += w[k] * w[k];
        }
        if !wn2.is_finite() || wn2 > crate::equalizer::DIVERGENCE_NORM.powi(2) {
            return None;
        }
        if cfg.drift > 0.0 {
            for p in plant.iter_mut() {
                *p += cfg.drift * drift_rng.sample::<f64, _>(StandardNormal);
            }
        }
    }
    let m = (cfg.samples - cfg.burn_in) as f64;
    Some((ea_acc / m, e_acc / m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equalizer::lclma_factor;

    fn scenario() -> TrackingScenario {
        TrackingScenario {
            trace_r: 16.0,
            trace_a: 1e-6,
            sigma_v2: 0.01,
            sigma_n2: 100.01,
            nu: 0.1,
            mu: 0.002,
            a: 1.0,
            feedback: 0,
        }
    }

    #[test]
    fn gaussian_plug_in() {
        let s = TrackingScenario {
            trace_r: 10.0,
            trace_a: 0.0,
            sigma_v2: 0.01,
            sigma_n2: 0.01,
            nu: 0.0,
            mu: 0.1,
            a: 1.0,
            feedback: 0,
        };
        assert!((emse_lclma_gaussian(&s).unwrap() - 0.01).abs() < 1e-15);

        let s = TrackingScenario {
            trace_r: 0.0,
            trace_a: 0.3,
            mu: 0.2,
            a: 1.5,
            ..s
        };
        let expect = 0.3 / (0.2 * 1.5) / 2.0;
        assert!((emse_lclma_gaussian(&s).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn stability_bound_is_reported() {
        let s = TrackingScenario {
            mu: 0.2,
            trace_r: 10.0,
            nu: 0.0,
            ..scenario()
        };
        assert!(matches!(emse_lclma_gaussian(&s), Err(Error::StabilityBound { .. })));
        assert!(matches!(emse_lclma_impulsive(&s), Err(Error::StabilityBound { .. })));
    }

    #[test]
    fn impulsive_reduces_to_gaussian() {
        let s = TrackingScenario {
            nu: 0.0,
            sigma_n2: 0.01,
            ..scenario()
        };
        let a = emse_lclma_impulsive(&s).unwrap();
        let b = emse_lclma_gaussian(&s).unwrap();
        assert!(((a - b) / b).abs() < 1e-12);
    }

    #[test]
    fn dfe_uses_extended_trace() {
        let dfe = TrackingScenario {
            feedback: 150,
            trace_r: 3.0,
            mu: 1e-4,
            ..scenario()
        };
        let linear = TrackingScenario {
            feedback: 0,
            trace_r: 153.0,
            ..dfe
        };
        assert_eq!(
            emse_lclma_impulsive(&dfe).unwrap(),
            emse_lclma_impulsive(&linear).unwrap()
        );
    }

    #[test]
    fn emse_is_monotone() {
        let base = TrackingScenario {
            nu: 0.0,
            ..scenario()
        };
        let mut prev = 0.0;
        for k in 1..20 {
            let s = TrackingScenario {
                sigma_v2: 0.001 * k as f64,
                sigma_n2: 0.001 * k as f64,
                ..base
            };
            let eta = emse_lclma_gaussian(&s).unwrap();
            assert!(eta > prev);
            prev = eta;
        }
        let mut prev = 0.0;
        for k in 1..20 {
            let s = TrackingScenario {
                trace_r: k as f64,
                ..base
            };
            let eta = emse_lclma_gaussian(&s).unwrap();
            assert!(eta > prev);
            prev = eta;
        }
    }

    #[test]
    fn steady_mse_floor() {
        let s = scenario();
        let g = TrackingScenario { nu: 0.0, ..s };
        assert_eq!(steady_mse(&g, 0.0).unwrap(), g.sigma_v2);
        let all = TrackingScenario { nu: 1.0, ..s };
        assert_eq!(steady_mse(&all, 0.0).unwrap(), all.sigma_n2);
        assert!(steady_mse(&s, -1.0).is_err());
    }

    #[test]
    fn scenario_validation() {
        assert!(TrackingScenario { sigma_n2: 0.001, ..scenario() }.validate().is_err());
        assert!(TrackingScenario { nu: 2.0, ..scenario() }.validate().is_err());
        assert!(TrackingScenario { trace_a: -1.0, ..scenario() }.validate().is_err());
        assert!(TrackingScenario { mu: 0.0, ..scenario() }.validate().is_err());
    }

    #[test]
    fn h_functions_sa_limit() {
        let noise = NoiseModel::gaussian(1.0).unwrap();
        let h = h_functions(&noise, 0.0, 1e6, CostKind::AbsError).unwrap();
        assert!((h.h_u - 1.0).abs() < 5e-3, "h_U = {}", h.h_u);
    }

    #[test]
    fn h_functions_identity_gain() {
        let noise = NoiseModel::new(0.2, 3.0, 0.1).unwrap();
        let h = h_functions_with(&noise, 0.05, |e| e).unwrap();
        assert!((h.h_g - 1.0).abs() < 1e-9);
        assert!((h.h_u - (0.05 + noise.variance())).abs() < 1e-9);
    }

    #[test]
    fn h_functions_quadrature_vs_monte_carlo() {
        let noise = NoiseModel::gaussian(0.5).unwrap();
        let q = h_functions(&noise, 0.0, 1.0, CostKind::AbsError).unwrap();
        // Independent 1-D check of E[n·g(n)]/σ_v².
        let g = |e: f64| lclma_factor(e, 1.0);
        let mc = h_functions_monte_carlo(&noise, 0.0, g, 2_000_000, 5);
        assert!(((mc.h_g - q.h_g) / q.h_g).abs() < 0.01);
        assert!(((mc.h_u - q.h_u) / q.h_u).abs() < 0.01);

        let noise = NoiseModel::new(0.01, 100.0, 0.1).unwrap();
        let q = h_functions(&noise, 0.002, 1.0, CostKind::AbsError).unwrap();
        let mc = h_functions_monte_carlo(&noise, 0.002, g, 2_000_000, 6);
        assert!(((mc.h_g - q.h_g) / q.h_g).abs() < 0.01);
        assert!(((mc.h_u - q.h_u) / q.h_u).abs() < 0.01);
    }

    #[test]
    fn least_squares_recovers_plant() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let plant = [0.4, -0.3, 0.9, 0.05];
        let x: Vec<f64> = (0..500).map(|_| rng.sample(StandardNormal)).collect();
        let rows: Vec<Vec<f64>> = (0..x.len()).map(|t| delay_line(&x, t, 4)).collect();
        let d: Vec<f64> = rows
            .iter()
            .map(|r| r.iter().zip(&plant).map(|(a, b)| a * b).sum())
            .collect();
        let w = least_squares_fit(&rows, &d).unwrap();
        for (a, b) in w.iter().zip(&plant) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(least_squares_fit(&[], &[]).is_err());
    }

    #[test]
    fn trace_a_estimate_matches_drift() {
        let (h, drift, n) = (4, 1e-3, 200_000);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut plant = vec![0.5, -0.2, 0.1, 0.3];
        let x: Vec<f64> = (0..n).map(|_| draw_input(&mut rng, InputKind::Bpsk)).collect();
        let mut d = Vec::with_capacity(n);
        for t in 0..n {
            let r = delay_line(&x, t, h);
            d.push(r.iter().zip(&plant).map(|(a, b)| a * b).sum::<f64>());
            for p in plant.iter_mut() {
                *p += drift * rng.sample::<f64, _>(StandardNormal);
            }
        }
        let est = estimate_trace_a(&x, &d, h, 400).unwrap();
        let truth = h as f64 * drift * drift;
        assert!((est / truth - 1.0).abs() < 0.15, "estimate {est} vs {truth}");
    }

    #[test]
    fn noiseless_steady_state_emse_vanishes() {
        let cfg = SteadyStateConfig {
            plant: vec![0.3, -0.5, 0.8, 0.1],
            input: InputKind::Bpsk,
            drift: 0.0,
            noise: NoiseModel::gaussian(1e-300).unwrap(),
            algorithm: Algorithm::Lclma,
            mu: 0.02,
            a: 1.0,
            samples: 20_000,
            burn_in: 10_000,
            trials: 2,
            seed: 1,
        };
        let est = mc_steady_state_emse(&cfg).unwrap();
        assert!(est.emse < 1e-6, "emse {}", est.emse);
    }

    #[test]
    fn lms_matches_classical_emse() {
        let sigma_v2 = 0.01;
        let cfg = SteadyStateConfig {
            plant: (0..8).map(|k| 0.5f64.powi(k)).collect(),
            input: InputKind::Gaussian,
            drift: 0.0,
            noise: NoiseModel::gaussian(sigma_v2).unwrap(),
            algorithm: Algorithm::Lms,
            mu: 0.005,
            a: 1.0,
            samples: 60_000,
            burn_in: 10_000,
            trials: 8,
            seed: 2,
        };
        let est = mc_steady_state_emse(&cfg).unwrap();
        let classical = cfg.mu * sigma_v2 * cfg.trace_r() / 2.0;
        assert!((est.emse / classical - 1.0).abs() < 0.3, "{} vs {classical}", est.emse);
        assert!((est.mse - sigma_v2 - est.emse).abs() < 0.05 * sigma_v2);
    }

    #[test]
    fn divergent_trials_are_counted() {
        let cfg = SteadyStateConfig {
            plant: vec![1.0; 4],
            input: InputKind::Bpsk,
            drift: 0.0,
            noise: NoiseModel::new(0.01, 1e4, 0.1).unwrap(),
            algorithm: Algorithm::Lmf,
            mu: 0.01,
            a: 1.0,
            samples: 5_000,
            burn_in: 1_000,
            trials: 3,
            seed: 3,
        };
        let est = mc_steady_state_emse(&cfg).unwrap();
        assert_eq!(est.diverged, 3);
        assert!(est.emse.is_nan());
    }
}
