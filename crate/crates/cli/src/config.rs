//! Flat `key = value` configuration files and resolution of the effective
//! settings: command-line flag, then config file, then built-in default.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rptsc_core::baseline::{DtwParams, Metric};
use rptsc_core::rp::{EmbeddingParams, EncodeConfig, Norm, Scaling};
use rptsc_core::train::TrainConfig;

/// Keys understood outside [`TrainConfig`].
const EXTRA_KEYS: [&str; 3] = ["metric", "window", "grid"];

/// Ordered `key = value` pairs. Blank lines and `#` comments are ignored and
/// dashes in keys are read as underscores, so keys may be spelled like flags.
#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    pub path: Option<PathBuf>,
    pub entries: Vec<(String, String)>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(ConfigFile::default());
        };
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("{}:{}: expected `key = value`", path.display(), n + 1);
            };
            let key = key.trim().replace('-', "_");
            if !is_known_key(&key) {
                bail!("{}:{}: unknown setting {key:?}", path.display(), n + 1);
            }
            entries.push((key, value.trim().to_string()));
        }
        Ok(ConfigFile {
            path: Some(path.to_path_buf()),
            entries,
        })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn describe_path(&self) -> String {
        self.path
            .as_ref()
            .map_or_else(|| "none".to_string(), |p| p.display().to_string())
    }
}

fn is_known_key(key: &str) -> bool {
    EXTRA_KEYS.contains(&key)
        || TrainConfig::default()
            .entries()
            .iter()
            .any(|(k, _)| *k == key)
        || matches!(key, "batch" | "lr" | "size" | "kernel" | "znorm")
}

/// Training settings from defaults, then the config file, then flags given on
/// the command line (`overrides`, already in `key`/text form).
pub fn resolve_train(file: &ConfigFile, overrides: &[(&str, String)]) -> Result<TrainConfig> {
    let mut config = TrainConfig::default();
    for (key, value) in file.entries.iter().map(|(k, v)| (k.as_str(), v.as_str())) {
        if !EXTRA_KEYS.contains(&key) {
            config
                .set(key, value)
                .with_context(|| format!("config file setting {key} = {value}"))?;
        }
    }
    for (key, value) in overrides {
        config
            .set(key, value)
            .with_context(|| format!("--{} {value}", key.replace('_', "-")))?;
    }
    config.validate()?;
    Ok(config)
}

/// Encoding settings for `rptsc encode`, which unlike training accepts any
/// output size (or `native` for the unresized `K x K` plot).
#[derive(Debug, Clone, PartialEq)]
pub struct EncodeSettings {
    pub encode: EncodeConfig,
    pub znormalize: bool,
}

pub fn resolve_encode(file: &ConfigFile, overrides: &[(&str, String)]) -> Result<EncodeSettings> {
    let mut settings = EncodeSettings {
        encode: EncodeConfig::default(),
        znormalize: false,
    };
    let file_entries = file.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()));
    let flag_entries = overrides.iter().map(|(k, v)| (*k, v.as_str()));
    for (key, value) in file_entries.chain(flag_entries) {
        apply_encode_key(&mut settings, key, value)
            .with_context(|| format!("setting {key} = {value}"))?;
    }
    EmbeddingParams::new(settings.encode.embedding.m, settings.encode.embedding.tau)?;
    Ok(settings)
}

fn apply_encode_key(s: &mut EncodeSettings, key: &str, value: &str) -> Result<()> {
    let v = value.trim();
    match key {
        "m" => s.encode.embedding.m = v.parse()?,
        "tau" => s.encode.embedding.tau = v.parse()?,
        "norm" => s.encode.norm = v.parse::<Norm>()?,
        "size" | "input_size" => {
            s.encode.size = match v {
                "native" | "none" => None,
                _ => {
                    let size: usize = v.parse()?;
                    if size == 0 {
                        bail!("size must be positive");
                    }
                    Some(size)
                }
            }
        }
        "invert" => s.encode.invert = parse_bool(v)?,
        "threshold" => {
            s.encode.threshold = match v {
                "" | "none" => None,
                _ => {
                    let eps: f64 = v.parse()?;
                    if eps.is_nan() || eps < 0.0 {
                        bail!("threshold must be >= 0");
                    }
                    Some(eps)
                }
            }
        }
        "scaling" => s.encode.scaling = v.parse::<Scaling>()?,
        "znormalize" | "znorm" => s.znormalize = parse_bool(v)?,
        // Training-only settings may share a config file with encoding.
        _ => {}
    }
    Ok(())
}

pub fn parse_bool(v: &str) -> Result<bool> {
    match v.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        other => bail!("expected a boolean, got {other:?}"),
    }
}

/// Metrics to run for `rptsc baseline`: flag, then config file, then DTW.
pub fn resolve_metrics(
    file: &ConfigFile,
    metric: Option<&str>,
    window: Option<usize>,
) -> Result<Vec<Metric>> {
    let name = metric.or(file.get("metric")).unwrap_or("dtw");
    let window = match window {
        Some(w) => Some(w),
        None => match file.get("window") {
            None | Some("none") | Some("") => None,
            Some(w) => Some(w.parse().with_context(|| format!("window = {w}"))?),
        },
    };
    let dtw = Metric::Dtw(DtwParams { window });
    Ok(match name.to_ascii_lowercase().as_str() {
        "both" | "all" => vec![Metric::Euclidean, dtw],
        "dtw" => vec![dtw],
        other => vec![other.parse::<Metric>()?],
    })
}

/// Render a manifest: a header comment followed by `key = value` lines.
pub fn manifest(lines: &[(&str, String)]) -> String {
    let mut out = String::from("# rptsc run manifest\n");
    for (key, value) in lines {
        let _ = writeln!(out, "{key} = {value}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file(text: &str) -> ConfigFile {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        fs::write(&path, text).unwrap();
        ConfigFile::load(Some(&path)).unwrap()
    }

    #[test]
    fn precedence_is_flag_then_file_then_default() {
        let f = file("# comment\nepochs = 50\nbatch-size = 5\n\nseed = 3 # trailing\n");
        let config = resolve_train(&f, &[("seed", "9".into())]).unwrap();
        assert_eq!(config.epochs, 50);
        assert_eq!(config.batch_size, 5);
        assert_eq!(config.seed, 9);
        assert_eq!(config.learning_rate, TrainConfig::default().learning_rate);
    }

    #[test]
    fn unknown_keys_and_bad_lines_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.conf");
        fs::write(&path, "colour = blue\n").unwrap();
        assert!(ConfigFile::load(Some(&path)).is_err());
        fs::write(&path, "epochs 50\n").unwrap();
        assert!(ConfigFile::load(Some(&path)).is_err());
    }

    #[test]
    fn encode_accepts_native_size_and_threshold() {
        let f = file("size = native\nthreshold = 0\nmetric = dtw\nepochs = 3\n");
        let s = resolve_encode(&f, &[("m", "2".into())]).unwrap();
        assert_eq!(s.encode.size, None);
        assert_eq!(s.encode.threshold, Some(0.0));
        assert_eq!(s.encode.embedding.m, 2);
    }

    #[test]
    fn metrics_resolution() {
        let f = file("metric = euclidean\nwindow = 4\n");
        assert_eq!(
            resolve_metrics(&f, None, None).unwrap(),
            vec![Metric::Euclidean]
        );
        assert_eq!(
            resolve_metrics(&f, Some("dtw"), None).unwrap(),
            vec![Metric::Dtw(DtwParams::band(4))]
        );
        assert_eq!(
            resolve_metrics(&ConfigFile::default(), Some("both"), Some(2)).unwrap(),
            vec![Metric::Euclidean, Metric::Dtw(DtwParams::band(2))]
        );
    }
}
