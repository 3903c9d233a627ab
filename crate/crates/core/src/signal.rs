//! BPSK bit streams, training schedules and the hard-decision quantizer.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// The 28-symbol ±1 sequence shipped with the crate, used when no training
/// sequence is configured.
pub const DEFAULT_TRAINING_SEQUENCE: &str = include_str!("../data/training_sequence.txt");

/// Whether the equalizer knows the transmitted symbol at a given index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Training,
    DecisionDirected,
}

/// How much of a frame is spent in training mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TrainingSchedule {
    FullTraining,
    /// A training prefix covering `training_fraction` of the frame, then
    /// decision-directed operation.
    DecisionDirected { training_fraction: f64 },
}

impl TrainingSchedule {
    /// Builds a schedule from a plain fraction; `1.0` is full training.
    pub fn from_fraction(fraction: f64) -> Result<Self> {
        validate_fraction(fraction)?;
        if fraction == 1.0 {
            Ok(TrainingSchedule::FullTraining)
        } else {
            Ok(TrainingSchedule::DecisionDirected {
                training_fraction: fraction,
            })
        }
    }

    pub fn training_fraction(&self) -> f64 {
        match *self {
            TrainingSchedule::FullTraining => 1.0,
            TrainingSchedule::DecisionDirected { training_fraction } => training_fraction,
        }
    }
}

fn validate_fraction(fraction: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::invalid(format!(
            "training fraction {fraction} outside [0, 1]"
        )));
    }
    Ok(())
}

/// Source of the transmitted bits.
#[derive(Debug, Clone, PartialEq)]
pub enum BitPattern {
    Random,
    /// Tile the given ±1 sequence cyclically.
    RepeatedSequence(Vec<f64>),
}

/// Transmitted ±1 symbols together with the per-index training flags.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolFrame {
    bits: Vec<f64>,
    schedule: Vec<Phase>,
}

impl SymbolFrame {
    /// Wraps existing symbols. Every entry must be exactly −1 or +1.
    pub fn from_bits(bits: Vec<f64>) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::invalid("frame must contain at least one symbol"));
        }
        check_symbols(&bits)?;
        let schedule = vec![Phase::Training; bits.len()];
        Ok(SymbolFrame { bits, schedule })
    }

    /// Replaces the schedule with one built from `mode`.
    pub fn with_schedule(mut self, mode: &TrainingSchedule) -> Result<Self> {
        self.schedule = build_schedule(self.bits.len(), mode)?;
        Ok(self)
    }

    pub fn bits(&self) -> &[f64] {
        &self.bits
    }

    pub fn schedule(&self) -> &[Phase] {
        &self.schedule
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Number of leading training symbols.
    pub fn training_len(&self) -> usize {
        self.schedule
            .iter()
            .take_while(|p| **p == Phase::Training)
            .count()
    }
}

fn check_symbols(seq: &[f64]) -> Result<()> {
    if let Some((i, v)) = seq
        .iter()
        .enumerate()
        .find(|(_, v)| **v != 1.0 && **v != -1.0)
    {
        return Err(Error::invalid(format!(
            "symbol {v} at index {i} is not ±1"
        )));
    }
    Ok(())
}

/// Generates `n` BPSK symbols. The schedule of the returned frame is all training.
pub fn generate_bits(seed: u64, n: usize, pattern: &BitPattern) -> Result<SymbolFrame> {
    if n == 0 {
        return Err(Error::invalid("frame length must be at least 1"));
    }
    let bits = match pattern {
        BitPattern::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n)
                .map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 })
                .collect()
        }
        BitPattern::RepeatedSequence(seq) => {
            if seq.is_empty() {
                return Err(Error::invalid("repeated pattern sequence is empty"));
            }
            check_symbols(seq)?;
            seq.iter().copied().cycle().take(n).collect()
        }
    };
    Ok(SymbolFrame {
        schedule: vec![Phase::Training; n],
        bits,
    })
}

/// Hard decision on a soft estimate. Ties at exactly zero go to +1.
pub fn quantize(soft: f64) -> Result<f64> {
    if !soft.is_finite() {
        return Err(Error::NonFinite(format!("soft estimate {soft}")));
    }
    Ok(decide(soft))
}

#[inline]
pub(crate) fn decide(soft: f64) -> f64 {
    if soft >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Per-index phases: the first ⌈fraction·n⌉ indices train, the rest are
/// decision directed.
pub fn build_schedule(n: usize, mode: &TrainingSchedule) -> Result<Vec<Phase>> {
    if n == 0 {
        return Err(Error::invalid("schedule length must be at least 1"));
    }
    let fraction = mode.training_fraction();
    validate_fraction(fraction)?;
    let training = ((fraction * n as f64).ceil() as usize).min(n);
    let mut phases = vec![Phase::Training; training];
    phases.resize(n, Phase::DecisionDirected);
    Ok(phases)
}

/// Parses whitespace-separated ±1 entries (`+1`, `1`, `-1`).
pub fn parse_sequence(text: &str) -> Result<Vec<f64>> {
    let seq = text
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>().map_err(|e| Error::Parse {
                context: "training sequence".into(),
                message: format!("{tok:?}: {e}"),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if seq.is_empty() {
        return Err(Error::invalid("training sequence is empty"));
    }
    check_symbols(&seq)?;
    Ok(seq)
}

pub fn load_sequence(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_sequence(&text)
}

pub fn default_training_sequence() -> Vec<f64> {
    parse_sequence(DEFAULT_TRAINING_SEQUENCE).expect("bundled training sequence is valid")
}
