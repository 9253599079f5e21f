//! Training orchestration: encode a dataset once, run seeded mini-batch
//! training with best-validation snapshots, pick batch/epoch settings on a
//! held-out split, and score error rates and rank tables.

use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cnn::layers::{argmax_rows, softmax_xent};
use crate::cnn::optim::ADAM_LEARNING_RATE;
use crate::cnn::{
    ArchSpec, Network, OptimizerKind, OptimizerState, Tensor4, SUPPORTED_INPUT_SIZES,
};
use crate::error::{Error, Result};
use crate::rp::{encode_dataset, EmbeddingParams, EncodeConfig, Norm, Scaling};
use crate::ucr::{split_validation, Dataset, DEFAULT_VALIDATION_FRACTION};

pub const BATCH_SIZE_GRID: [usize; 2] = [5, 20];
pub const EPOCH_GRID: [usize; 4] = [50, 250, 1000, 2000];

/// Items per forward pass when only predictions are needed.
const EVAL_CHUNK: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub input_size: usize,
    pub kernel_size: usize,
    pub seed: u64,
    /// Share of each class held out for snapshot selection; 0 disables it.
    pub validation_fraction: f64,
    pub embedding: EmbeddingParams,
    pub norm: Norm,
    pub invert: bool,
    pub threshold: Option<f64>,
    pub scaling: Scaling,
    pub znormalize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 20,
            epochs: 250,
            optimizer: OptimizerKind::Adam,
            learning_rate: ADAM_LEARNING_RATE,
            input_size: 28,
            kernel_size: 3,
            seed: 0,
            validation_fraction: DEFAULT_VALIDATION_FRACTION,
            embedding: EmbeddingParams::default(),
            norm: Norm::L2,
            invert: false,
            threshold: None,
            scaling: Scaling::PerPlot,
            znormalize: false,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("bad value {value:?} for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::InvalidArgument(format!(
            "bad boolean {value:?} for {key}"
        ))),
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            ));
        }
        if !SUPPORTED_INPUT_SIZES.contains(&self.input_size) {
            return bad(format!(
                "input_size must be one of {SUPPORTED_INPUT_SIZES:?}, got {}",
                self.input_size
            ));
        }
        if !(self.validation_fraction == 0.0
            || (self.validation_fraction > 0.0 && self.validation_fraction < 0.5))
        {
            return bad(format!(
                "validation_fraction must be 0 or in (0, 0.5), got {}",
                self.validation_fraction
            ));
        }
        if let Some(eps) = self.threshold {
            if eps.is_nan() || eps < 0.0 {
                return bad(format!("threshold must be >= 0, got {eps}"));
            }
        }
        EmbeddingParams::new(self.embedding.m, self.embedding.tau)?;
        ArchSpec::new(self.input_size, self.kernel_size, 2).validate()
    }

    pub fn encode_config(&self) -> EncodeConfig {
        EncodeConfig {
            embedding: self.embedding,
            norm: self.norm,
            size: Some(self.input_size),
            invert: self.invert,
            threshold: self.threshold,
            scaling: self.scaling,
        }
    }

    pub fn arch(&self, num_classes: usize) -> ArchSpec {
        ArchSpec::new(self.input_size, self.kernel_size, num_classes)
    }

    /// Every setting as `key = value` pairs, in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("batch_size", self.batch_size.to_string()),
            ("epochs", self.epochs.to_string()),
            ("optimizer", self.optimizer.to_string()),
            ("learning_rate", self.learning_rate.to_string()),
            ("input_size", self.input_size.to_string()),
            ("kernel_size", self.kernel_size.to_string()),
            ("seed", self.seed.to_string()),
            ("validation_fraction", self.validation_fraction.to_string()),
            ("m", self.embedding.m.to_string()),
            ("tau", self.embedding.tau.to_string()),
            ("norm", self.norm.to_string()),
            ("invert", self.invert.to_string()),
            (
                "threshold",
                self.threshold
                    .map_or_else(|| "none".to_string(), |t| t.to_string()),
            ),
            ("scaling", self.scaling.to_string()),
            ("znormalize", self.znormalize.to_string()),
        ]
    }

    /// Update one setting from its textual form. Returns `false` for keys
    /// that are not training settings.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "batch_size" | "batch" => self.batch_size = parse_value(key, value)?,
            "epochs" => self.epochs = parse_value(key, value)?,
            "optimizer" => self.optimizer = value.trim().parse()?,
            "learning_rate" | "lr" => self.learning_rate = parse_value(key, value)?,
            "input_size" | "size" => self.input_size = parse_value(key, value)?,
            "kernel_size" | "kernel" => self.kernel_size = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "validation_fraction" => self.validation_fraction = parse_value(key, value)?,
            "m" => self.embedding.m = parse_value(key, value)?,
            "tau" => self.embedding.tau = parse_value(key, value)?,
            "norm" => self.norm = value.trim().parse()?,
            "invert" => self.invert = parse_bool(key, value)?,
            "threshold" => {
                self.threshold = match value.trim() {
                    "" | "none" => None,
                    v => Some(parse_value(key, v)?),
                }
            }
            "scaling" => self.scaling = value.trim().parse()?,
            "znormalize" | "znorm" => self.znormalize = parse_bool(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }
}

/// Images of a dataset in one flat buffer, ready to be sliced into batches.
#[derive(Debug, Clone)]
pub struct EncodedSet {
    pub size: usize,
    pub images: Vec<f64>,
    pub labels: Vec<usize>,
}

impl EncodedSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn batch(&self, indices: &[usize]) -> (Tensor4, Vec<usize>) {
        let px = self.size * self.size;
        let mut data = Vec::with_capacity(indices.len() * px);
        for &i in indices {
            data.extend_from_slice(&self.images[i * px..(i + 1) * px]);
        }
        let x = Tensor4::from_vec([indices.len(), 1, self.size, self.size], data)
            .expect("batch buffer sized from indices");
        (x, indices.iter().map(|&i| self.labels[i]).collect())
    }
}

/// Apply the configured preprocessing and encode every series as an image.
pub fn encode_for_training(dataset: &Dataset, config: &TrainConfig) -> Result<EncodedSet> {
    let prepared;
    let data = if config.znormalize {
        prepared = dataset.znormalized();
        &prepared
    } else {
        dataset
    };
    let images = encode_dataset(data, &config.encode_config())?;
    Ok(EncodedSet {
        size: config.input_size,
        images: images.into_iter().flat_map(|img| img.pixels).collect(),
        labels: dataset.labels(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub config: TrainConfig,
    pub history: Vec<EpochRecord>,
    /// Epoch (1-based) whose parameters were kept.
    pub best_epoch: usize,
    pub optimizer_steps: u64,
    pub test_error: Option<f64>,
    pub wall_clock_secs: f64,
}

impl RunReport {
    pub fn best_val_loss(&self) -> Option<f64> {
        self.history
            .get(self.best_epoch - 1)
            .and_then(|r| r.val_loss)
    }

    pub fn final_train_loss(&self) -> f64 {
        self.history.last().map_or(f64::NAN, |r| r.train_loss)
    }

    /// One row per epoch plus a trailing `# summary` comment. Wall-clock time
    /// is left out so identical runs give identical files.
    pub fn to_csv(&self) -> String {
        let opt =
            |v: Option<f64>, digits: usize| v.map_or_else(String::new, |v| format!("{v:.digits$}"));
        let mut out = String::from("epoch,train_loss,train_accuracy,val_loss,val_accuracy\n");
        for r in &self.history {
            let _ = writeln!(
                out,
                "{},{:.10},{:.6},{},{}",
                r.epoch,
                r.train_loss,
                r.train_accuracy,
                opt(r.val_loss, 10),
                opt(r.val_accuracy, 6),
            );
        }
        let _ = writeln!(
            out,
            "# summary: best_epoch={} optimizer_steps={} seed={} test_error={}",
            self.best_epoch,
            self.optimizer_steps,
            self.config.seed,
            self.test_error
                .map_or_else(|| "none".into(), |e| format!("{e:.6}")),
        );
        out
    }
}

fn derive_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Eval-mode mean loss and accuracy over a whole set.
pub fn score(net: &Network, set: &EncodedSet) -> Result<(f64, f64)> {
    let mut loss = 0.0;
    let mut correct = 0;
    let all: Vec<usize> = (0..set.len()).collect();
    for chunk in all.chunks(EVAL_CHUNK) {
        let (x, labels) = set.batch(chunk);
        let logits = net.logits(&x)?;
        let (l, _) = softmax_xent(&logits, &labels)?;
        loss += l * chunk.len() as f64;
        correct += argmax_rows(logits.data(), logits.item_len())
            .iter()
            .zip(&labels)
            .filter(|(p, y)| p == y)
            .count();
    }
    let n = set.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

pub fn predict_set(net: &Network, set: &EncodedSet) -> Result<Vec<usize>> {
    let all: Vec<usize> = (0..set.len()).collect();
    let mut out = Vec::with_capacity(set.len());
    for chunk in all.chunks(EVAL_CHUNK) {
        out.extend(net.predict(&set.batch(chunk).0)?);
    }
    Ok(out)
}

/// Train on pre-encoded images. When `validation` is non-empty the parameters
/// with the lowest validation loss are kept; otherwise the final parameters.
pub fn fit(
    train: &EncodedSet,
    validation: Option<&EncodedSet>,
    num_classes: usize,
    config: &TrainConfig,
) -> Result<(Network, RunReport)> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    let started = Instant::now();
    let validation = validation.filter(|v| !v.is_empty());
    let mut net = Network::from_spec(&config.arch(num_classes), config.seed)?;
    let mut opt = OptimizerState::new(config.optimizer, config.learning_rate, net.param_shapes());
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 2));
    let mut order: Vec<usize> = (0..train.len()).collect();

    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, Vec<Vec<f64>>)> = None;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        let mut correct = 0;
        for chunk in order.chunks(config.batch_size) {
            let (x, labels) = train.batch(chunk);
            let logits = net.forward(&x)?;
            correct += argmax_rows(logits.data(), logits.item_len())
                .iter()
                .zip(&labels)
                .filter(|(p, y)| p == y)
                .count();
            let (loss, grads) = net.backward(&labels)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
            opt.apply(net.params_mut(), &grads)?;
            loss_sum += loss * chunk.len() as f64;
        }
        let n = train.len() as f64;
        let mut record = EpochRecord {
            epoch,
            train_loss: loss_sum / n,
            train_accuracy: correct as f64 / n,
            val_loss: None,
            val_accuracy: None,
        };
        if let Some(val) = validation {
            let (val_loss, val_acc) = score(&net, val)?;
            record.val_loss = Some(val_loss);
            record.val_accuracy = Some(val_acc);
            if best.as_ref().is_none_or(|(b, _, _)| val_loss < *b) {
                best = Some((val_loss, epoch, net.snapshot()));
            }
        }
        history.push(record);
    }

    let best_epoch = match best {
        Some((_, epoch, snapshot)) => {
            net.restore(&snapshot)?;
            epoch
        }
        None => config.epochs,
    };
    let report = RunReport {
        config: config.clone(),
        history,
        best_epoch,
        optimizer_steps: opt.step,
        test_error: None,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    };
    Ok((net, report))
}

/// Encode `train_set`, hold out a stratified validation split when
/// configured, and train.
pub fn train_model(train_set: &Dataset, config: &TrainConfig) -> Result<(Network, RunReport)> {
    config.validate()?;
    if config.validation_fraction > 0.0 {
        let split = split_validation(train_set, config.validation_fraction, config.seed)?;
        let train = encode_for_training(&split.train, config)?;
        let val = encode_for_training(&split.validation, config)?;
        fit(&train, Some(&val), train_set.num_classes, config)
    } else {
        let train = encode_for_training(train_set, config)?;
        fit(&train, None, train_set.num_classes, config)
    }
}

/// Fraction of `test_set` the network misclassifies (eval mode).
pub fn evaluate(net: &Network, test_set: &Dataset, config: &TrainConfig) -> Result<f64> {
    if test_set.is_empty() {
        return Err(Error::InvalidArgument("empty test set".into()));
    }
    let set = encode_for_training(test_set, config)?;
    Ok(error_rate(&predict_set(net, &set)?, &set.labels))
}

pub fn error_rate(predicted: &[usize], truth: &[usize]) -> f64 {
    let wrong = predicted.iter().zip(truth).filter(|(p, t)| p != t).count();
    wrong as f64 / truth.len() as f64
}

/// The batch-size x epoch grid around `base`.
pub fn standard_grid(base: &TrainConfig) -> Vec<TrainConfig> {
    let mut grid = Vec::new();
    for &batch_size in &BATCH_SIZE_GRID {
        for &epochs in &EPOCH_GRID {
            grid.push(TrainConfig {
                batch_size,
                epochs,
                ..base.clone()
            });
        }
    }
    grid
}

#[derive(Debug, Clone)]
pub struct GridCell {
    pub config: TrainConfig,
    /// Seed actually used to train this cell.
    pub cell_seed: u64,
    pub outcome: std::result::Result<CellScore, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellScore {
    pub validation_error: f64,
    pub validation_loss: f64,
    pub best_epoch: usize,
}

#[derive(Debug, Clone)]
pub struct GridOutcome {
    pub selected: TrainConfig,
    pub cells: Vec<GridCell>,
}

impl GridOutcome {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "batch_size,epochs,cell_seed,validation_error,validation_loss,best_epoch,selected\n",
        );
        for cell in &self.cells {
            let selected = cell.config == self.selected;
            match &cell.outcome {
                Ok(s) => {
                    let _ = writeln!(
                        out,
                        "{},{},{},{:.6},{:.10},{},{}",
                        cell.config.batch_size,
                        cell.config.epochs,
                        cell.cell_seed,
                        s.validation_error,
                        s.validation_loss,
                        s.best_epoch,
                        selected
                    );
                }
                Err(e) => {
                    let _ = writeln!(
                        out,
                        "{},{},{},,,,false # failed: {}",
                        cell.config.batch_size,
                        cell.config.epochs,
                        cell.cell_seed,
                        e.replace(',', ";")
                    );
                }
            }
        }
        out
    }
}

/// Train every grid cell on one stratified split of `train_set` and return the
/// configuration with the lowest validation error. Ties go to fewer epochs,
/// then smaller batches, then grid order. The split uses the first cell's
/// validation fraction (default when zero) and seed; cell `i` trains with a
/// seed derived from `(seed, i)`. Cells that fail are logged and skipped.
pub fn grid_select(train_set: &Dataset, grid: &[TrainConfig]) -> Result<GridOutcome> {
    let first = grid
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty configuration grid".into()))?;
    let fraction = if first.validation_fraction > 0.0 {
        first.validation_fraction
    } else {
        DEFAULT_VALIDATION_FRACTION
    };
    let split = split_validation(train_set, fraction, first.seed)?;

    let cells: Vec<GridCell> = grid
        .par_iter()
        .enumerate()
        .map(|(i, config)| {
            let cell_seed = derive_seed(config.seed, 100 + i as u64);
            let cell_config = TrainConfig {
                seed: cell_seed,
                ..config.clone()
            };
            let outcome = (|| -> Result<CellScore> {
                let train = encode_for_training(&split.train, &cell_config)?;
                let val = encode_for_training(&split.validation, &cell_config)?;
                let (net, report) = fit(&train, Some(&val), train_set.num_classes, &cell_config)?;
                let (validation_loss, accuracy) = score(&net, &val)?;
                Ok(CellScore {
                    validation_error: 1.0 - accuracy,
                    validation_loss,
                    best_epoch: report.best_epoch,
                })
            })()
            .map_err(|e| e.to_string());
            GridCell {
                config: config.clone(),
                cell_seed,
                outcome,
            }
        })
        .collect();

    let selected = cells
        .iter()
        .filter_map(|c| c.outcome.as_ref().ok().map(|s| (c, s)))
        .min_by(|(a, sa), (b, sb)| {
            sa.validation_error
                .total_cmp(&sb.validation_error)
                .then(a.config.epochs.cmp(&b.config.epochs))
                .then(a.config.batch_size.cmp(&b.config.batch_size))
        })
        .map(|(c, _)| c.config.clone());
    match selected {
        Some(selected) => Ok(GridOutcome { selected, cells }),
        None => Err(Error::InvalidArgument(format!(
            "every grid cell failed; first error: {}",
            cells
                .first()
                .and_then(|c| c.outcome.as_ref().err().cloned())
                .unwrap_or_default()
        ))),
    }
}

/// How equal error rates share rank positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TiePolicy {
    /// Distinct error values get consecutive ranks: 1, 2, 2, 3.
    #[default]
    Dense,
    /// Tied entries share the mean of their positions: 1, 2.5, 2.5, 4.
    Average,
    /// Tied entries share the best position: 1, 2, 2, 4.
    Competition,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankTable {
    /// Datasets on which each algorithm has the (possibly shared) lowest error.
    pub wins: Vec<usize>,
    /// Mean rank over the datasets where the algorithm has an entry.
    pub average_rank: Vec<f64>,
    pub datasets_ranked: Vec<usize>,
    /// Per-dataset ranks, `None` where the entry is missing.
    pub ranks: Vec<Vec<Option<f64>>>,
}

/// Ranks of `values` (lower is better) under `policy`.
pub fn rank_values(values: &[f64], policy: TiePolicy) -> Vec<f64> {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct = sorted.clone();
    distinct.dedup();
    values
        .iter()
        .map(|&v| {
            let below = sorted.iter().filter(|&&s| s < v).count();
            let equal = sorted.iter().filter(|&&s| s == v).count();
            match policy {
                TiePolicy::Dense => (distinct.iter().filter(|&&d| d < v).count() + 1) as f64,
                TiePolicy::Competition => (below + 1) as f64,
                TiePolicy::Average => below as f64 + (equal as f64 + 1.0) / 2.0,
            }
        })
        .collect()
}

/// Wins and average ranks from an error-rate matrix with one row per dataset
/// and one column per algorithm. Missing entries are skipped, and each
/// algorithm's average is taken over the datasets where it has a value.
pub fn rank_table(errors: &[Vec<Option<f64>>], policy: TiePolicy) -> Result<RankTable> {
    let algorithms = errors.first().map_or(0, Vec::len);
    if errors.is_empty() || algorithms == 0 {
        return Err(Error::InvalidArgument("empty error-rate matrix".into()));
    }
    if errors.iter().any(|row| row.len() != algorithms) {
        return Err(Error::Shape("ragged error-rate matrix".into()));
    }
    let mut wins = vec![0; algorithms];
    let mut rank_sum = vec![0.0; algorithms];
    let mut counted = vec![0; algorithms];
    let mut ranks = Vec::with_capacity(errors.len());

    for row in errors {
        let present: Vec<(usize, f64)> = row
            .iter()
            .enumerate()
            .filter_map(|(a, v)| v.map(|v| (a, v)))
            .collect();
        let mut row_ranks = vec![None; algorithms];
        if present.is_empty() {
            ranks.push(row_ranks);
            continue;
        }
        let values: Vec<f64> = present.iter().map(|&(_, v)| v).collect();
        let best = values.iter().copied().fold(f64::INFINITY, f64::min);
        for (&(a, v), r) in present.iter().zip(rank_values(&values, policy)) {
            rank_sum[a] += r;
            counted[a] += 1;
            row_ranks[a] = Some(r);
            if v == best {
                wins[a] += 1;
            }
        }
        ranks.push(row_ranks);
    }
    let average_rank = rank_sum
        .iter()
        .zip(&counted)
        .map(|(&s, &n)| if n == 0 { f64::NAN } else { s / n as f64 })
        .collect();
    Ok(RankTable {
        wins,
        average_rank,
        datasets_ranked: counted,
        ranks,
    })
}

impl RankTable {
    /// Algorithms as columns; rows `wins` and `average_rank`.
    pub fn to_csv(&self, algorithms: &[String]) -> String {
        let mut out = String::from("metric");
        for name in algorithms {
            out.push(',');
            out.push_str(name);
        }
        out.push_str("\nwins");
        for w in &self.wins {
            let _ = write!(out, ",{w}");
        }
        out.push_str("\naverage_rank");
        for r in &self.average_rank {
            let _ = write!(out, ",{r:.4}");
        }
        out.push('\n');
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_roundtrips_through_entries() {
        let mut cfg = TrainConfig {
            batch_size: 5,
            epochs: 1000,
            threshold: Some(0.25),
            invert: true,
            seed: 77,
            ..TrainConfig::default()
        };
        cfg.embedding = EmbeddingParams::new(2, 3).unwrap();
        let mut back = TrainConfig::default();
        for (k, v) in cfg.entries() {
            assert!(back.set(k, &v).unwrap(), "{k}");
        }
        assert_eq!(back, cfg);
        assert!(!back.set("nonsense", "1").unwrap());
        assert!(back.set("epochs", "many").is_err());
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for cfg in [
            TrainConfig {
                batch_size: 0,
                ..TrainConfig::default()
            },
            TrainConfig {
                epochs: 0,
                ..TrainConfig::default()
            },
            TrainConfig {
                input_size: 32,
                ..TrainConfig::default()
            },
            TrainConfig {
                validation_fraction: 0.5,
                ..TrainConfig::default()
            },
            TrainConfig {
                kernel_size: 4,
                ..TrainConfig::default()
            },
            TrainConfig {
                learning_rate: 0.0,
                ..TrainConfig::default()
            },
        ] {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn grid_has_eight_cells() {
        let grid = standard_grid(&TrainConfig::default());
        assert_eq!(grid.len(), 8);
        assert_eq!((grid[0].batch_size, grid[0].epochs), (5, 50));
        assert_eq!((grid[7].batch_size, grid[7].epochs), (20, 2000));
    }

    #[test]
    fn ranks_under_each_policy() {
        let v = [0.1, 0.2, 0.2, 0.3];
        assert_eq!(rank_values(&v, TiePolicy::Dense), vec![1.0, 2.0, 2.0, 3.0]);
        assert_eq!(
            rank_values(&v, TiePolicy::Average),
            vec![1.0, 2.5, 2.5, 4.0]
        );
        assert_eq!(
            rank_values(&v, TiePolicy::Competition),
            vec![1.0, 2.0, 2.0, 4.0]
        );
    }

    #[test]
    fn rank_table_small_cases() {
        let single = vec![vec![Some(0.3)], vec![Some(0.0)], vec![Some(0.1)]];
        let t = rank_table(&single, TiePolicy::Average).unwrap();
        assert_eq!(t.wins, vec![3]);
        assert_eq!(t.average_rank, vec![1.0]);

        let two = vec![vec![Some(0.1), Some(0.2)]];
        let t = rank_table(&two, TiePolicy::Average).unwrap();
        assert_eq!(t.wins, vec![1, 0]);
        assert_eq!(t.average_rank, vec![1.0, 2.0]);

        let missing = vec![vec![Some(0.1), None], vec![Some(0.3), Some(0.2)]];
        let t = rank_table(&missing, TiePolicy::Dense).unwrap();
        assert_eq!(t.wins, vec![1, 1]);
        assert_eq!(t.average_rank, vec![1.5, 1.0]);
        assert_eq!(t.datasets_ranked, vec![2, 1]);

        assert!(rank_table(&[], TiePolicy::Dense).is_err());
        assert!(rank_table(&[vec![Some(0.1)], vec![]], TiePolicy::Dense).is_err());
    }

    #[test]
    fn error_rate_examples() {
        assert_eq!(error_rate(&[0, 1, 1, 0], &[0, 1, 1, 0]), 0.0);
        assert_eq!(error_rate(&[0, 0, 0, 0], &[0, 1, 0, 1]), 0.5);
    }

    #[test]
    fn report_csv_layout() {
        let report = RunReport {
            config: TrainConfig::default(),
            history: vec![EpochRecord {
                epoch: 1,
                train_loss: 0.5,
                train_accuracy: 0.75,
                val_loss: None,
                val_accuracy: None,
            }],
            best_epoch: 1,
            optimizer_steps: 2,
            test_error: Some(0.125),
            wall_clock_secs: 3.0,
        };
        let csv = report.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(
            lines[0],
            "epoch,train_loss,train_accuracy,val_loss,val_accuracy"
        );
        assert_eq!(lines[1], "1,0.5000000000,0.750000,,");
        assert!(lines[2].starts_with("# summary: best_epoch=1 optimizer_steps=2"));
        assert!(lines[2].ends_with("test_error=0.125000"));
    }
}
