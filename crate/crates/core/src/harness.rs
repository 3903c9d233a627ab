//! Experiment configuration, trial orchestration and result persistence.
//!
//! An experiment is a grid of cells keyed by (algorithm, E_b/N₀, a). Every
//! cell runs `trials` independent equalization trials and averages them.
//! Channel and noise realizations are seeded from (master seed, SNR, trial),
//! so all algorithms and `a` values in a trial see the same received signal,
//! and adding cells never perturbs existing ones.
//!
//! Configuration is TOML with unknown keys rejected. [`emit_results`] writes a
//! `manifest.toml` that embeds the resolved configuration; loading that
//! manifest with [`load_config`] reproduces the run exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{apply_channel, load_taps, snr_to_noise, ChannelModel};
use crate::equalizer::{Algorithm, Equalizer, EqualizerConfig};
use crate::metrics::{
    average_trials, ber_window_start, bit_errors, nase_curve, windowed_mse, TrialAverage,
    TrialResult,
};
use crate::seeding::derive_seed;
use crate::signal::{
    default_training_sequence, generate_bits, load_sequence, BitPattern, Phase, TrainingSchedule,
};
use crate::{Error, Result};

/// Experiment layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Linear equalizers in full training mode.
    LinearTraining,
    /// Linear equalizers, 10% training then decision directed.
    LinearDecisionDirected,
    /// Decision-feedback equalizers.
    Dfe,
    /// LCLMA over a grid of `a` values.
    ASweep,
    /// BER against E_b/N₀.
    SnrSweep,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::LinearTraining,
        Preset::LinearDecisionDirected,
        Preset::Dfe,
        Preset::ASweep,
        Preset::SnrSweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::LinearTraining => "linear-training",
            Preset::LinearDecisionDirected => "linear-decision-directed",
            Preset::Dfe => "dfe",
            Preset::ASweep => "a-sweep",
            Preset::SnrSweep => "snr-sweep",
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Preset::ALL.iter().map(|p| p.name()).collect();
                Error::invalid(format!("unknown preset {s:?}, expected one of {names:?}"))
            })
    }
}

/// Desk scale runs in seconds; full scale uses the published filter lengths
/// and frame size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Desk,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatternKind {
    Random,
    Repeated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BitsSpec {
    pub pattern: PatternKind,
    /// Inline ±1 sequence for the repeated pattern.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence: Option<Vec<f64>>,
    /// File of whitespace-separated ±1 entries; resolved into `sequence`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence_file: Option<PathBuf>,
}

impl BitsSpec {
    fn pattern(&self) -> BitPattern {
        match self.pattern {
            PatternKind::Random => BitPattern::Random,
            PatternKind::Repeated => BitPattern::RepeatedSequence(
                self.sequence.clone().unwrap_or_else(default_training_sequence),
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    /// Taps in lag order τ = −N₁..N₂.
    #[serde(default)]
    pub taps: Vec<f64>,
    /// One tap per line; resolved into `taps`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taps_file: Option<PathBuf>,
    /// N₁.
    pub anti_causal: usize,
    /// Per-sample random-walk standard deviation of every tap.
    #[serde(default)]
    pub drift: f64,
    /// Scale taps to unit energy.
    #[serde(default = "yes")]
    pub normalize: bool,
}

fn yes() -> bool {
    true
}

impl ChannelSpec {
    pub fn model(&self) -> Result<ChannelModel> {
        let ch = ChannelModel::new(self.taps.clone(), self.anti_causal, self.drift)?;
        Ok(if self.normalize { ch.with_unit_energy() } else { ch })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EqualizerSpec {
    pub anti_causal: usize,
    pub causal: usize,
    #[serde(default)]
    pub feedback: usize,
    pub mu: f64,
    #[serde(default = "default_mu_fb")]
    pub mu_fb: f64,
    #[serde(default = "default_a")]
    pub a: f64,
}

fn default_mu_fb() -> f64 {
    0.01
}

fn default_a() -> f64 {
    1.0
}

impl EqualizerSpec {
    pub fn config(&self, algorithm: Algorithm, a: f64) -> EqualizerConfig {
        EqualizerConfig {
            anti_causal: self.anti_causal,
            causal: self.causal,
            feedback: self.feedback,
            mu: self.mu,
            mu_fb: self.mu_fb,
            a,
            algorithm,
        }
    }
}

/// Full description of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub preset: Preset,
    pub algorithms: Vec<Algorithm>,
    /// E_b/N₀ grid in dB.
    pub snr_db: Vec<f64>,
    /// Values of `a` for the a-sweep preset; other presets use `equalizer.a`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub a_grid: Vec<f64>,
    /// ν.
    pub impulse_prob: f64,
    /// σ_γ² / σ_v².
    pub impulse_ratio: f64,
    pub frame_len: usize,
    pub trials: usize,
    /// 1.0 is full training.
    pub training_fraction: f64,
    pub seed: u64,
    /// Trailing window of the MSE curve.
    #[serde(default = "default_mse_window")]
    pub mse_window: usize,
    /// Keep every n-th point of the emitted curves.
    #[serde(default = "default_stride")]
    pub curve_stride: usize,
    /// Record the first trial's weights every n symbols (0 disables).
    #[serde(default)]
    pub weight_trace_every: usize,
    pub bits: BitsSpec,
    pub channel: ChannelSpec,
    pub equalizer: EqualizerSpec,
}

fn serialize<T: Serialize>(value: &T, context: &str) -> Result<String> {
    toml::to_string(value).map_err(|e| Error::Parse {
        context: context.into(),
        message: e.to_string(),
    })
}

fn default_mse_window() -> usize {
    500
}

fn default_stride() -> usize {
    1
}

/// Desk-scale channel: eight taps with a two-sample precursor.
pub const DESK_CHANNEL_TAPS: [f64; 8] = [0.1, 0.3, 1.0, 0.5, -0.3, 0.2, -0.1, 0.05];
const DESK_CHANNEL_ANTI_CAUSAL: usize = 2;
const DESK_CHANNEL_DRIFT: f64 = 1e-4;

/// Desk-scale feed-forward learning rate.
pub const DESK_MU: f64 = 0.0025;

impl ExperimentConfig {
    /// Default configuration for a preset at the given scale.
    pub fn preset(preset: Preset, scale: Scale) -> Self {
        let full = scale == Scale::Full;
        let linear = vec![
            Algorithm::Sa,
            Algorithm::Lms,
            Algorithm::Lmf,
            Algorithm::Lclms,
            Algorithm::Lclma,
        ];
        let (algorithms, snr_db, a_grid, training_fraction, feedback) = match preset {
            Preset::LinearTraining => (linear, vec![30.0], vec![], 1.0, 0),
            Preset::LinearDecisionDirected => (linear, vec![30.0], vec![], 0.1, 0),
            Preset::Dfe => (
                vec![Algorithm::Sa, Algorithm::Lms, Algorithm::Lclms, Algorithm::Lclma],
                vec![30.0],
                vec![],
                1.0,
                if full { 150 } else { 8 },
            ),
            Preset::ASweep => (vec![Algorithm::Lclma], vec![30.0], vec![0.1, 1.0, 10.0], 1.0, 0),
            Preset::SnrSweep => (
                vec![Algorithm::Sa, Algorithm::Lms, Algorithm::Lclms, Algorithm::Lclma],
                (0..=6).map(|k| 5.0 * k as f64).collect(),
                vec![],
                1.0,
                0,
            ),
        };
        let (anti_causal, causal, mu, frame_len) = if full {
            (181, 180, 0.1, 280_000)
        } else {
            (15, 16, DESK_MU, 50_000)
        };
        ExperimentConfig {
            preset,
            algorithms,
            snr_db,
            a_grid,
            impulse_prob: 0.1,
            impulse_ratio: 1e4,
            frame_len,
            trials: 10,
            training_fraction,
            seed: 1,
            mse_window: default_mse_window(),
            curve_stride: if full { 28 } else { 1 },
            weight_trace_every: 0,
            bits: BitsSpec {
                pattern: PatternKind::Repeated,
                sequence: Some(default_training_sequence()),
                sequence_file: None,
            },
            channel: ChannelSpec {
                taps: DESK_CHANNEL_TAPS.to_vec(),
                taps_file: None,
                anti_causal: DESK_CHANNEL_ANTI_CAUSAL,
                drift: DESK_CHANNEL_DRIFT,
                normalize: true,
            },
            equalizer: EqualizerSpec {
                anti_causal,
                causal,
                feedback,
                mu,
                mu_fb: 0.01,
                a: 1.0,
            },
        }
    }

    /// Parses TOML, rejecting unknown keys.
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            context: "experiment config".into(),
            message: e.to_string(),
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        serialize(self, "experiment config")
    }

    /// Inlines file-backed taps and sequences. Relative paths are taken
    /// relative to `base`.
    pub fn resolve(mut self, base: &Path) -> Result<Self> {
        if let Some(file) = self.channel.taps_file.take() {
            self.channel.taps = load_taps(&base.join(file))?;
        }
        if let Some(file) = self.bits.sequence_file.take() {
            self.bits.sequence = Some(load_sequence(&base.join(file))?);
        }
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::invalid("trials must be >= 1"));
        }
        if self.seed > i64::MAX as u64 {
            return Err(Error::invalid("seed must fit in a signed 64-bit integer"));
        }
        if self.snr_db.is_empty() {
            return Err(Error::invalid("SNR grid is empty"));
        }
        if self.frame_len == 0 {
            return Err(Error::invalid("frame length must be >= 1"));
        }
        if self.curve_stride == 0 || self.mse_window == 0 {
            return Err(Error::invalid("curve stride and MSE window must be >= 1"));
        }
        if self.preset == Preset::ASweep && self.a_grid.is_empty() {
            return Err(Error::invalid("a-sweep needs a nonempty a_grid"));
        }
        if self.a_grid.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(Error::invalid("every a in a_grid must be > 0"));
        }
        if self.channel.taps_file.is_some() || self.bits.sequence_file.is_some() {
            return Err(Error::invalid("file references must be resolved before running"));
        }
        TrainingSchedule::from_fraction(self.training_fraction)?;
        for snr in &self.snr_db {
            snr_to_noise(*snr, self.impulse_ratio, self.impulse_prob)?;
        }
        self.channel.model()?;
        for a in self.a_values() {
            self.equalizer.config(Algorithm::Lclma, a).validate()?;
        }
        generate_bits(0, 1, &self.bits.pattern())?;
        Ok(())
    }

    fn a_values(&self) -> Vec<f64> {
        if self.preset == Preset::ASweep {
            self.a_grid.clone()
        } else {
            vec![self.equalizer.a]
        }
    }

    /// Cells in emission order: algorithm, then SNR, then a.
    pub fn cells(&self) -> Vec<CellKey> {
        let mut out = Vec::new();
        for &algorithm in &self.algorithms {
            for &snr_db in &self.snr_db {
                for a in self.a_values() {
                    out.push(CellKey {
                        algorithm,
                        snr_db,
                        a,
                    });
                }
            }
        }
        out
    }

    /// Seed of the channel and noise realization shared by every cell at
    /// this SNR and trial index.
    pub fn trial_seed(&self, snr_db: f64, trial: usize) -> u64 {
        derive_seed(self.seed, &format!("snr={snr_db}/trial={trial}"))
    }

    /// SHA-256 of the canonical TOML form, hex encoded.
    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_toml()?.as_bytes());
        Ok(digest.iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        }))
    }
}

/// Reads an experiment config or a manifest written by [`emit_results`] and
/// resolves file references relative to the file's directory.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse {
        context: path.display().to_string(),
        message: e.to_string(),
    })?;
    let cfg = if table.contains_key("provenance") {
        Manifest::from_toml(&text)?.experiment
    } else {
        ExperimentConfig::from_toml(&text)?
    };
    cfg.resolve(path.parent().unwrap_or(Path::new(".")))
}

/// One grid point of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellKey {
    pub algorithm: Algorithm,
    pub snr_db: f64,
    pub a: f64,
}

impl CellKey {
    pub fn file_stem(&self) -> String {
        format!("{}_snr{}_a{}", self.algorithm, self.snr_db, self.a)
    }
}

/// Weight snapshots `(t, w(t))`.
pub type WeightTrace = Vec<(usize, Vec<f64>)>;

/// Runs one equalization trial.
///
/// On divergence the result is flagged and its curves stop at the divergence
/// index; the BER then covers the evaluated symbols seen so far, or is 0.5
/// when divergence happens before the evaluation window.
pub fn run_trial(config: &ExperimentConfig, cell: &CellKey, trial: usize) -> Result<TrialResult> {
    run_trial_traced(config, cell, trial, 0).map(|(r, _)| r)
}

/// [`run_trial`] that also records the weights every `trace_every` symbols.
pub fn run_trial_traced(
    config: &ExperimentConfig,
    cell: &CellKey,
    trial: usize,
    trace_every: usize,
) -> Result<(TrialResult, WeightTrace)> {
    let seed = config.trial_seed(cell.snr_db, trial);
    let schedule = TrainingSchedule::from_fraction(config.training_fraction)?;
    let frame = generate_bits(derive_seed(seed, "bits"), config.frame_len, &config.bits.pattern())?
        .with_schedule(&schedule)?;
    let noise = snr_to_noise(cell.snr_db, config.impulse_ratio, config.impulse_prob)?;
    let channel = config.channel.model()?;
    let received = apply_channel(&frame, &channel, &noise, derive_seed(seed, "channel"));
    let mut eq = Equalizer::new(config.equalizer.config(cell.algorithm, cell.a))?;

    let bits = frame.bits();
    let mut soft = Vec::with_capacity(bits.len());
    let mut trace = WeightTrace::new();
    let mut diverged = false;
    for (t, phase) in frame.schedule().iter().enumerate() {
        let reference = (*phase == Phase::Training).then_some(bits[t]);
        match eq.step(&received, t, reference) {
            Ok(out) => soft.push(out.soft),
            Err(Error::Diverged) => {
                diverged = true;
                break;
            }
            Err(e) => return Err(e),
        }
        if trace_every > 0 && t % trace_every == 0 {
            trace.push((t, eq.weights().to_vec()));
        }
    }

    let done = soft.len();
    let start = ber_window_start(bits.len(), frame.training_len());
    let (ber, evaluated) = if done > start {
        let n = done - start;
        (bit_errors(&soft[start..], &bits[start..done]) as f64 / n as f64, n)
    } else {
        (0.5, 0)
    };
    Ok((
        TrialResult {
            nase_curve: nase_curve(&soft, &bits[..done]),
            mse_curve: windowed_mse(&soft, &bits[..done], config.mse_window),
            ber,
            evaluated,
            diverged,
            seed,
        },
        trace,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CellStatus {
    Ok,
    AllDiverged,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub key: CellKey,
    pub average: TrialAverage,
    pub trial_seeds: Vec<u64>,
    pub status: CellStatus,
    /// Weight snapshots of trial 0 when tracing is enabled.
    pub weight_trace: WeightTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultBundle {
    pub config: ExperimentConfig,
    pub provenance: Provenance,
    pub cells: Vec<CellResult>,
}

impl ResultBundle {
    pub fn cell(&self, algorithm: Algorithm, snr_db: f64, a: f64) -> Option<&CellResult> {
        self.cells.iter().find(|c| {
            c.key.algorithm == algorithm && c.key.snr_db == snr_db && c.key.a == a
        })
    }
}

/// Runs every cell × trial on up to `workers` threads (0 = all cores) and
/// averages per cell. Results do not depend on the worker count.
pub fn run_experiment(config: &ExperimentConfig, workers: usize) -> Result<ResultBundle> {
    config.validate()?;
    let cells = config.cells();
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..config.trials).map(move |t| (c, t)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    let trace_every = config.weight_trace_every;
    let outcomes: Vec<Result<(TrialResult, WeightTrace)>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(c, t)| {
                let every = if t == 0 { trace_every } else { 0 };
                run_trial_traced(config, &cells[c], t, every)
            })
            .collect()
    });

    let mut outcomes = outcomes.into_iter();
    let mut results = Vec::with_capacity(cells.len());
    for key in cells {
        let mut trials = Vec::with_capacity(config.trials);
        let mut failure = None;
        let mut weight_trace = WeightTrace::new();
        for t in 0..config.trials {
            match outcomes.next().expect("one outcome per job") {
                Ok((r, trace)) => {
                    if t == 0 {
                        weight_trace = trace;
                    }
                    trials.push(r);
                }
                Err(e) => failure = Some(e.to_string()),
            }
        }
        let average = average_trials(&trials);
        let status = match failure {
            Some(msg) => CellStatus::Failed(msg),
            None if average.all_diverged() => CellStatus::AllDiverged,
            None => CellStatus::Ok,
        };
        results.push(CellResult {
            key,
            average,
            trial_seeds: (0..config.trials)
                .map(|t| config.trial_seed(key.snr_db, t))
                .collect(),
            status,
            weight_trace,
        });
    }
    Ok(ResultBundle {
        provenance: Provenance {
            config_hash: config.hash()?,
            seed: config.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
        config: config.clone(),
        cells: results,
    })
}

/// Run manifest: provenance, the resolved configuration and per-cell seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub provenance: Provenance,
    pub experiment: ExperimentConfig,
    #[serde(default)]
    pub cells: Vec<ManifestCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestCell {
    pub algorithm: Algorithm,
    pub snr_db: f64,
    pub a: f64,
    pub status: CellStatus,
    #[serde(with = "hex_seeds")]
    pub trial_seeds: Vec<u64>,
}

/// Derived seeds span the full u64 range, beyond TOML integers.
mod hex_seeds {
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(seeds: &[u64], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(seeds.iter().map(|x| format!("{x:#018x}")))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u64>, D::Error> {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|x| {
                u64::from_str_radix(x.trim_start_matches("0x"), 16)
                    .map_err(|e| D::Error::custom(format!("seed {x:?}: {e}")))
            })
            .collect()
    }
}

impl Manifest {
    pub fn from_bundle(bundle: &ResultBundle) -> Self {
        Manifest {
            provenance: bundle.provenance.clone(),
            experiment: bundle.config.clone(),
            cells: bundle
                .cells
                .iter()
                .map(|c| ManifestCell {
                    algorithm: c.key.algorithm,
                    snr_db: c.key.snr_db,
                    a: c.key.a,
                    status: c.status.clone(),
                    trial_seeds: c.trial_seeds.clone(),
                })
                .collect(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            context: "manifest".into(),
            message: e.to_string(),
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        serialize(self, "manifest")
    }
}

pub const SUMMARY_FILE: &str = "summary.csv";
pub const MANIFEST_FILE: &str = "manifest.toml";

/// Writes `summary.csv`, one `curve_<cell>.csv` per cell, optional
/// `weights_<cell>.csv` traces and `manifest.toml` into `dir`. Returns the
/// written paths. An empty bundle produces only the manifest.
pub fn emit_results(bundle: &ResultBundle, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();

    if !bundle.cells.is_empty() {
        let path = dir.join(SUMMARY_FILE);
        write_csv(&path, |w| {
            w.write_record([
                "algorithm",
                "snr_db",
                "ber",
                "final_nase",
                "diverged_count",
                "a",
                "ber_std_err",
                "final_nase_std_err",
                "trials",
                "status",
            ])?;
            for c in &bundle.cells {
                let avg = &c.average;
                let status = match &c.status {
                    CellStatus::Ok => "ok".to_string(),
                    CellStatus::AllDiverged => "all-diverged".to_string(),
                    CellStatus::Failed(m) => format!("failed: {m}"),
                };
                w.write_record([
                    c.key.algorithm.name().to_string(),
                    c.key.snr_db.to_string(),
                    avg.ber.to_string(),
                    avg.final_nase.to_string(),
                    avg.diverged_count.to_string(),
                    c.key.a.to_string(),
                    avg.ber_std_err.to_string(),
                    avg.final_nase_std_err.to_string(),
                    avg.trials.to_string(),
                    status,
                ])?;
            }
            Ok(())
        })?;
        written.push(path);
    }

    let stride = bundle.config.curve_stride.max(1);
    for c in &bundle.cells {
        let path = dir.join(format!("curve_{}.csv", c.key.file_stem()));
        write_csv(&path, |w| {
            w.write_record(["index", "nase", "windowed_mse"])?;
            let avg = &c.average;
            for i in (0..avg.nase_curve.len()).filter(|i| (i + 1) % stride == 0 || i + 1 == avg.nase_curve.len()) {
                w.write_record([
                    (i + 1).to_string(),
                    avg.nase_curve[i].to_string(),
                    avg.mse_curve[i].to_string(),
                ])?;
            }
            Ok(())
        })?;
        written.push(path);

        if !c.weight_trace.is_empty() {
            let path = dir.join(format!("weights_{}.csv", c.key.file_stem()));
            let width = c.weight_trace[0].1.len();
            write_csv(&path, |w| {
                let mut header = vec!["t".to_string()];
                header.extend((0..width).map(|k| format!("w{k}")));
                w.write_record(&header)?;
                for (t, weights) in &c.weight_trace {
                    let mut row = vec![t.to_string()];
                    row.extend(weights.iter().map(f64::to_string));
                    w.write_record(&row)?;
                }
                Ok(())
            })?;
            written.push(path);
        }
    }

    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, Manifest::from_bundle(bundle).to_toml()?).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(written)
}

fn write_csv(
    path: &Path,
    body: impl FnOnce(&mut csv::Writer<fs::File>) -> csv::Result<()>,
) -> Result<()> {
    let wrap = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(wrap)?;
    body(&mut w).map_err(wrap)?;
    w.flush().map_err(|e| Error::io(path, e))
}
