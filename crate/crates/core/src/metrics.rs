//! Learning curves, bit error ratio and trial averaging.

use serde::{Deserialize, Serialize};

use crate::signal::decide;
use crate::{Error, Result};

/// Outcome of one equalization run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    /// NASE(n) for n = 1..=len, from soft estimates.
    pub nase_curve: Vec<f64>,
    /// Trailing-window mean of (b − b̂)².
    pub mse_curve: Vec<f64>,
    /// Bit error ratio over the evaluation window.
    pub ber: f64,
    /// Number of symbols the BER was computed over.
    pub evaluated: usize,
    /// Set when the weights blew up. Curves then stop at the divergence index.
    pub diverged: bool,
    pub seed: u64,
}

impl TrialResult {
    pub fn final_nase(&self) -> Option<f64> {
        self.nase_curve.last().copied()
    }
}

fn check_lengths(soft: &[f64], bits: &[f64]) -> Result<()> {
    if soft.len() != bits.len() {
        return Err(Error::DimensionMismatch {
            expected: bits.len(),
            actual: soft.len(),
        });
    }
    Ok(())
}

/// Σ_{t<n} (b̂(t) − b(t))² / n.
pub fn nase(soft: &[f64], bits: &[f64], n: usize) -> Result<f64> {
    check_lengths(soft, bits)?;
    if n == 0 {
        return Err(Error::invalid("NASE needs n >= 1"));
    }
    if n > soft.len() {
        return Err(Error::IndexOutOfRange {
            index: n,
            len: soft.len(),
        });
    }
    let sum: f64 = soft[..n]
        .iter()
        .zip(&bits[..n])
        .map(|(y, b)| (y - b) * (y - b))
        .sum();
    Ok(sum / n as f64)
}

/// NASE at every prefix length.
pub fn nase_curve(soft: &[f64], bits: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    soft.iter()
        .zip(bits)
        .enumerate()
        .map(|(i, (y, b))| {
            acc += (y - b) * (y - b);
            acc / (i + 1) as f64
        })
        .collect()
}

/// Trailing mean of the squared soft error over `window` samples (fewer at
/// the start).
pub fn windowed_mse(soft: &[f64], bits: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let sq: Vec<f64> = soft.iter().zip(bits).map(|(y, b)| (y - b) * (y - b)).collect();
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(sq.len());
    for i in 0..sq.len() {
        acc += sq[i];
        if i >= window {
            acc -= sq[i - window];
        }
        out.push(acc / (i + 1).min(window) as f64);
    }
    out
}

/// Number of symbols whose hard decision differs from the transmitted bit.
pub fn bit_errors(soft: &[f64], bits: &[f64]) -> usize {
    soft.iter().zip(bits).filter(|(y, b)| decide(**y) != **b).count()
}

/// Fraction of symbols with `Q(b̂) ≠ b`.
pub fn ber(soft: &[f64], bits: &[f64]) -> Result<f64> {
    check_lengths(soft, bits)?;
    if soft.is_empty() {
        return Err(Error::invalid("BER of an empty sequence"));
    }
    Ok(bit_errors(soft, bits) as f64 / soft.len() as f64)
}

/// First index of the BER evaluation window: after the training prefix in
/// decision-directed runs, the second half in full-training runs.
pub fn ber_window_start(len: usize, training_len: usize) -> usize {
    if training_len >= len {
        len / 2
    } else {
        training_len
    }
}

/// Pointwise averages over the non-diverged trials of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialAverage {
    pub nase_curve: Vec<f64>,
    pub mse_curve: Vec<f64>,
    pub ber: f64,
    pub ber_std_err: f64,
    pub final_nase: f64,
    pub final_nase_std_err: f64,
    /// Trials that entered the average.
    pub trials: usize,
    pub diverged_count: usize,
}

impl TrialAverage {
    pub fn all_diverged(&self) -> bool {
        self.trials == 0
    }
}

fn mean_and_std_err(xs: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / m;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

fn pointwise_mean(curves: &[&[f64]]) -> Vec<f64> {
    let Some(len) = curves.iter().map(|c| c.len()).min() else {
        return vec![];
    };
    let m = curves.len() as f64;
    (0..len)
        .map(|i| curves.iter().map(|c| c[i]).sum::<f64>() / m)
        .collect()
}

/// Averages the non-diverged trials; diverged ones are only counted.
pub fn average_trials(results: &[TrialResult]) -> TrialAverage {
    let kept: Vec<&TrialResult> = results.iter().filter(|r| !r.diverged).collect();
    let diverged_count = results.len() - kept.len();
    let nase: Vec<&[f64]> = kept.iter().map(|r| r.nase_curve.as_slice()).collect();
    let mse: Vec<&[f64]> = kept.iter().map(|r| r.mse_curve.as_slice()).collect();
    let bers: Vec<f64> = kept.iter().map(|r| r.ber).collect();
    let finals: Vec<f64> = kept.iter().filter_map(|r| r.final_nase()).collect();
    let (ber, ber_std_err) = mean_and_std_err(&bers);
    let (final_nase, final_nase_std_err) = mean_and_std_err(&finals);
    TrialAverage {
        nase_curve: pointwise_mean(&nase),
        mse_curve: pointwise_mean(&mse),
        ber,
        ber_std_err,
        final_nase,
        final_nase_std_err,
        trials: kept.len(),
        diverged_count,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn trial(nase: Vec<f64>, ber: f64, diverged: bool) -> TrialResult {
        TrialResult {
            mse_curve: nase.clone(),
            nase_curve: nase,
            ber,
            evaluated: 10,
            diverged,
            seed: 0,
        }
    }

    #[test]
    fn nase_examples() {
        let b = [1.0, -1.0, -1.0, 1.0];
        assert_eq!(nase(&b, &b, 4).unwrap(), 0.0);
        let flipped: Vec<f64> = b.iter().map(|x| -x).collect();
        assert_eq!(nase(&flipped, &b, 4).unwrap(), 4.0);
        assert_eq!(nase(&[0.0; 4], &b, 4).unwrap(), 1.0);
        assert!(nase(&b, &b, 0).is_err());
        assert!(nase(&b, &b, 5).is_err());
        assert!(nase(&b[..3], &b, 2).is_err());
    }

    #[test]
    fn nase_curve_matches_prefixes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b: Vec<f64> = (0..50).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
        let y: Vec<f64> = b.iter().map(|x| x + rng.random_range(-1.0..1.0)).collect();
        let curve = nase_curve(&y, &b);
        for n in 1..=50 {
            assert!((curve[n - 1] - nase(&y, &b, n).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn ber_examples() {
        let b = vec![1.0; 1000];
        assert_eq!(ber(&b, &b).unwrap(), 0.0);
        let f: Vec<f64> = b.iter().map(|x| -x).collect();
        assert_eq!(ber(&f, &b).unwrap(), 1.0);
        let mut y = b.clone();
        y[10] = -0.5;
        y[500] = -2.0;
        y[999] = -1e-9;
        assert_eq!(ber(&y, &b).unwrap(), 0.003);
        assert!(ber(&[], &[]).is_err());
    }

    #[test]
    fn ber_window() {
        assert_eq!(ber_window_start(1000, 100), 100);
        assert_eq!(ber_window_start(1000, 1000), 500);
    }

    #[test]
    fn windowed_mse_is_trailing_mean() {
        let b = [0.0; 5];
        let y = [1.0, 2.0, 3.0, 4.0, 5.0];
        let m = windowed_mse(&y, &b, 2);
        assert_eq!(m, vec![1.0, 2.5, 6.5, 12.5, 20.5]);
    }

    #[test]
    fn averaging_identical_and_diverged() {
        let t = trial(vec![1.0, 0.5, 0.25], 0.1, false);
        let avg = average_trials(&[t.clone(), t.clone(), t.clone()]);
        assert_eq!(avg.nase_curve, t.nase_curve);
        assert!((avg.ber - 0.1).abs() < 1e-15);
        assert!(avg.ber_std_err < 1e-15);
        assert_eq!(avg.diverged_count, 0);

        let mut all: Vec<TrialResult> = (0..9).map(|k| trial(vec![k as f64], 0.0, false)).collect();
        all.push(trial(vec![1e9], 0.5, true));
        let avg = average_trials(&all);
        assert_eq!(avg.diverged_count, 1);
        assert_eq!(avg.trials, 9);
        assert_eq!(avg.final_nase, 4.0);

        let avg = average_trials(&[trial(vec![], 0.5, true)]);
        assert!(avg.all_diverged());
        assert!(avg.ber.is_nan());
    }

    #[test]
    fn averaging_matches_summation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let trials: Vec<TrialResult> = (0..7)
            .map(|_| trial((0..20).map(|_| rng.random::<f64>()).collect(), rng.random(), false))
            .collect();
        let avg = average_trials(&trials);
        for i in 0..20 {
            let mut s = 0.0;
            for t in &trials {
                s += t.nase_curve[i];
            }
            assert!((avg.nase_curve[i] - s / 7.0).abs() < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn nase_incremental_identity(
            pairs in prop::collection::vec((-3.0f64..3.0, prop::bool::ANY), 2..100)
        ) {
            let y: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let b: Vec<f64> = pairs.iter().map(|p| if p.1 { 1.0 } else { -1.0 }).collect();
            for n in 2..=y.len() {
                let lhs = nase(&y, &b, n).unwrap();
                let prev = nase(&y, &b, n - 1).unwrap();
                let d = y[n - 1] - b[n - 1];
                let rhs = (n - 1) as f64 / n as f64 * prev + d * d / n as f64;
                prop_assert!((lhs - rhs).abs() < 1e-12);
            }
        }

        #[test]
        fn ber_scale_invariant(
            pairs in prop::collection::vec((-3.0f64..3.0, prop::bool::ANY), 1..100),
            c in 1e-3f64..1e3,
        ) {
            let y: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let b: Vec<f64> = pairs.iter().map(|p| if p.1 { 1.0 } else { -1.0 }).collect();
            let scaled: Vec<f64> = y.iter().map(|v| v * c).collect();
            prop_assert_eq!(ber(&y, &b).unwrap(), ber(&scaled, &b).unwrap());
        }
    }
}
