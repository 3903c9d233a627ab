//! Time-varying FIR intersymbol-interference channel with Bernoulli-Gaussian
//! impulsive noise.
//!
//! The received sample at time `t` is
//!
//! ```text
//! r(t) = Σ_{τ=-N₁..N₂} b(t-τ)·h(t,τ) + n(t),     n(t) = v(t) + z(t)·γ(t)
//! ```
//!
//! where `v ~ N(0, σ_v²)`, `γ ~ N(0, σ_γ²)` and `z ~ Bernoulli(ν)`. Taps are
//! stored in lag order `τ = -N₁..=N₂`; symbols outside the frame are zero.
//! With a nonzero drift every tap performs an independent Gaussian random walk
//! between consecutive samples.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::signal::SymbolFrame;
use crate::{Error, Result};

const NOISE_STREAM: u64 = 0;
const DRIFT_STREAM: u64 = 1;

/// FIR channel response with a fixed anti-causal/causal extent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    taps: Vec<f64>,
    anti_causal: usize,
    drift: f64,
}

impl ChannelModel {
    /// `taps` are ordered `τ = -anti_causal ..= taps.len() - 1 - anti_causal`;
    /// `drift` is the per-sample random-walk standard deviation of each tap.
    pub fn new(taps: Vec<f64>, anti_causal: usize, drift: f64) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::invalid("channel needs at least one tap"));
        }
        if anti_causal >= taps.len() {
            return Err(Error::invalid(format!(
                "anti-causal extent {anti_causal} leaves no room in {} taps",
                taps.len()
            )));
        }
        if taps.iter().any(|h| !h.is_finite()) {
            return Err(Error::NonFinite("channel tap".into()));
        }
        if taps.iter().all(|h| *h == 0.0) {
            return Err(Error::invalid("channel taps are all zero"));
        }
        if !(drift >= 0.0 && drift.is_finite()) {
            return Err(Error::invalid(format!("drift {drift} must be finite and >= 0")));
        }
        Ok(ChannelModel {
            taps,
            anti_causal,
            drift,
        })
    }

    /// Single unit tap, no drift.
    pub fn identity() -> Self {
        ChannelModel {
            taps: vec![1.0],
            anti_causal: 0,
            drift: 0.0,
        }
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    /// N₁.
    pub fn anti_causal(&self) -> usize {
        self.anti_causal
    }

    /// N₂.
    pub fn causal(&self) -> usize {
        self.taps.len() - 1 - self.anti_causal
    }

    pub fn drift(&self) -> f64 {
        self.drift
    }

    pub fn with_drift(mut self, drift: f64) -> Result<Self> {
        ChannelModel::new(std::mem::take(&mut self.taps), self.anti_causal, drift)
    }

    /// Scales the taps to unit energy so the received signal power equals the
    /// symbol energy.
    pub fn with_unit_energy(mut self) -> Self {
        let norm = self.taps.iter().map(|h| h * h).sum::<f64>().sqrt();
        self.taps.iter_mut().for_each(|h| *h /= norm);
        self
    }

    /// Noiseless channel output for an arbitrary real input sequence.
    ///
    /// Tap drift is driven by `seed`, independently of the noise stream that
    /// [`apply_channel`] draws from the same seed.
    pub fn propagate(&self, input: &[f64], seed: u64) -> Vec<f64> {
        let n = input.len();
        let n1 = self.anti_causal as isize;
        let mut taps = self.taps.clone();
        let mut drift_rng = stream_rng(seed, DRIFT_STREAM);
        let mut out = Vec::with_capacity(n);
        for t in 0..n as isize {
            let mut acc = 0.0;
            for (k, h) in taps.iter().enumerate() {
                let src = t - (k as isize - n1);
                if (0..n as isize).contains(&src) {
                    acc += input[src as usize] * h;
                }
            }
            out.push(acc);
            if self.drift > 0.0 {
                for h in taps.iter_mut() {
                    let step: f64 = drift_rng.sample(StandardNormal);
                    *h += self.drift * step;
                }
            }
        }
        out
    }
}

/// Parses channel taps, one real per line (blank lines and `#` comments skipped).
pub fn parse_taps(text: &str) -> Result<Vec<f64>> {
    let taps = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.parse::<f64>().map_err(|e| Error::Parse {
                context: "channel taps".into(),
                message: format!("{l:?}: {e}"),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if taps.is_empty() {
        return Err(Error::invalid("tap file contains no taps"));
    }
    Ok(taps)
}

pub fn load_taps(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_taps(&text)
}

/// Bernoulli-Gaussian mixture noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    sigma_v2: f64,
    sigma_gamma2: f64,
    impulse_prob: f64,
}

impl NoiseModel {
    pub fn new(sigma_v2: f64, sigma_gamma2: f64, impulse_prob: f64) -> Result<Self> {
        if !(sigma_v2 > 0.0 && sigma_v2.is_finite()) {
            return Err(Error::invalid(format!("σ_v² = {sigma_v2} must be > 0")));
        }
        if !(sigma_gamma2 >= 0.0 && sigma_gamma2.is_finite()) {
            return Err(Error::invalid(format!("σ_γ² = {sigma_gamma2} must be >= 0")));
        }
        if !(0.0..=1.0).contains(&impulse_prob) {
            return Err(Error::invalid(format!(
                "impulse probability {impulse_prob} outside [0, 1]"
            )));
        }
        Ok(NoiseModel {
            sigma_v2,
            sigma_gamma2,
            impulse_prob,
        })
    }

    /// Pure Gaussian noise with variance `sigma_v2`.
    pub fn gaussian(sigma_v2: f64) -> Result<Self> {
        NoiseModel::new(sigma_v2, 0.0, 0.0)
    }

    pub fn sigma_v2(&self) -> f64 {
        self.sigma_v2
    }

    pub fn sigma_gamma2(&self) -> f64 {
        self.sigma_gamma2
    }

    /// ν.
    pub fn impulse_prob(&self) -> f64 {
        self.impulse_prob
    }

    /// σ_n² = σ_v² + σ_γ², the variance of an impulse-hit sample.
    pub fn sigma_n2(&self) -> f64 {
        self.sigma_v2 + self.sigma_gamma2
    }

    /// Overall variance (1-ν)σ_v² + νσ_n².
    pub fn variance(&self) -> f64 {
        (1.0 - self.impulse_prob) * self.sigma_v2 + self.impulse_prob * self.sigma_n2()
    }
}

/// Noise draws together with the impulse indicators z(t).
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSamples {
    pub values: Vec<f64>,
    pub impulses: Vec<bool>,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws `n` samples of v + zγ. All three variates are drawn for every
/// sample, so the stream layout does not depend on the model parameters.
pub fn sample_noise_detailed(noise: &NoiseModel, n: usize, seed: u64) -> NoiseSamples {
    let mut rng = stream_rng(seed, NOISE_STREAM);
    let sv = noise.sigma_v2.sqrt();
    let sg = noise.sigma_gamma2.sqrt();
    let mut values = Vec::with_capacity(n);
    let mut impulses = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.random();
        let v: f64 = rng.sample(StandardNormal);
        let g: f64 = rng.sample(StandardNormal);
        let z = u < noise.impulse_prob;
        values.push(sv * v + if z { sg * g } else { 0.0 });
        impulses.push(z);
    }
    NoiseSamples { values, impulses }
}

pub fn sample_noise(noise: &NoiseModel, n: usize, seed: u64) -> Vec<f64> {
    sample_noise_detailed(noise, n, seed).values
}

/// Mixture density (1-ν)·N(x; 0, σ_v²) + ν·N(x; 0, σ_n²).
pub fn noise_pdf(noise: &NoiseModel, x: f64) -> f64 {
    let gauss = |var: f64| (-x * x / (2.0 * var)).exp() / (2.0 * PI * var).sqrt();
    (1.0 - noise.impulse_prob) * gauss(noise.sigma_v2) + noise.impulse_prob * gauss(noise.sigma_n2())
}

/// Received signal for a transmitted frame.
pub fn apply_channel(
    frame: &SymbolFrame,
    ch: &ChannelModel,
    noise: &NoiseModel,
    seed: u64,
) -> Vec<f64> {
    let mut r = ch.propagate(frame.bits(), seed);
    for (x, n) in r.iter_mut().zip(sample_noise(noise, frame.len(), seed)) {
        *x += n;
    }
    r
}

/// Noise model for a given E_b/N₀ with unit-energy BPSK: σ_v² = N₀/2 and
/// σ_γ² = `impulse_ratio`·σ_v².
pub fn snr_to_noise(ebn0_db: f64, impulse_ratio: f64, impulse_prob: f64) -> Result<NoiseModel> {
    if !ebn0_db.is_finite() {
        return Err(Error::NonFinite(format!("E_b/N_0 {ebn0_db} dB")));
    }
    if !(impulse_ratio >= 0.0) {
        return Err(Error::invalid(format!(
            "impulse ratio {impulse_ratio} must be >= 0"
        )));
    }
    let n0 = 10f64.powf(-ebn0_db / 10.0);
    let sigma_v2 = n0 / 2.0;
    NoiseModel::new(sigma_v2, impulse_ratio * sigma_v2, impulse_prob)
}
