//! The `encode`, `train`, `baseline` and `rank` subcommands.

use std::fmt::Write as _;
use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rptsc_core::baseline::{one_nn_error, Metric};
use rptsc_core::cnn::checkpoint;
use rptsc_core::rp::{encode_dataset, write_png};
use rptsc_core::train::{evaluate, grid_select, rank_table, standard_grid, train_model, TiePolicy};
use rptsc_core::ucr::{find_archive_pair, load_train_test, load_ucr_file, Dataset};

use crate::config::{self, manifest, parse_bool, ConfigFile};
use crate::{BaselineArgs, DataArgs, EncodeArgs, RankArgs, TrainArgs};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

fn data_dir(explicit: Option<&Path>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os("RPTSC_DATA").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("data/ucr"))
}

fn archive_pair(dir: &Path, name: &str) -> Result<(PathBuf, PathBuf)> {
    find_archive_pair(dir, name)
        .with_context(|| format!("no {name}_TRAIN / {name}_TEST files in {}", dir.display()))
}

/// Paths of the train and test files selected by `args`.
fn train_test_paths(args: &DataArgs) -> Result<(PathBuf, PathBuf)> {
    match (&args.train, &args.test, &args.dataset) {
        (Some(train), Some(test), None) => Ok((train.clone(), test.clone())),
        (None, None, Some(name)) => archive_pair(&data_dir(args.data_dir.as_deref()), name),
        _ => bail!("give either --train and --test, or --dataset"),
    }
}

fn load_pair(args: &DataArgs) -> Result<(Dataset, Dataset, PathBuf, PathBuf)> {
    let (train_path, test_path) = train_test_paths(args)?;
    let (train, test) = load_train_test(&train_path, &test_path)?;
    Ok((train, test, train_path, test_path))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

pub fn encode(args: &EncodeArgs) -> Result<()> {
    let file = ConfigFile::load(args.config.as_deref())?;
    let mut overrides = args.encode.overrides();
    if let Some(size) = &args.size {
        overrides.push(("size", size.clone()));
    }
    let settings = config::resolve_encode(&file, &overrides)?;

    let input = match (&args.input, &args.dataset) {
        (Some(path), None) => path.clone(),
        (None, Some(name)) => {
            let (train, test) = archive_pair(&data_dir(args.data_dir.as_deref()), name)?;
            match args.split.to_ascii_lowercase().as_str() {
                "train" => train,
                "test" => test,
                other => bail!("--split must be train or test, got {other:?}"),
            }
        }
        _ => bail!("give either --input or --dataset"),
    };
    let dataset = load_ucr_file(&input)?;
    let dataset = if settings.znormalize {
        dataset.znormalized()
    } else {
        dataset
    };
    let images = encode_dataset(&dataset, &settings.encode)?;

    let image_dir = args.out.join("images");
    create_dir(&image_dir)?;
    let mut index = String::from("series,label,path\n");
    for (i, (img, series)) in images.iter().zip(&dataset.series).enumerate() {
        let name = format!("images/{i:05}.png");
        write_png(img, &args.out.join(&name))?;
        let _ = writeln!(index, "{i},{},{name}", series.raw_label);
    }
    write_file(&args.out.join("index.csv"), index)?;

    let e = &settings.encode;
    let lines = [
        ("command", "encode".to_string()),
        ("tool_version", TOOL_VERSION.to_string()),
        ("config_file", file.describe_path()),
        ("input", input.display().to_string()),
        ("output_dir", args.out.display().to_string()),
        ("series", dataset.len().to_string()),
        ("m", e.embedding.m.to_string()),
        ("tau", e.embedding.tau.to_string()),
        ("norm", e.norm.to_string()),
        (
            "size",
            e.size.map_or_else(|| "native".into(), |s| s.to_string()),
        ),
        ("invert", e.invert.to_string()),
        (
            "threshold",
            e.threshold.map_or_else(|| "none".into(), |t| t.to_string()),
        ),
        ("scaling", e.scaling.to_string()),
        ("znormalize", settings.znormalize.to_string()),
    ];
    write_file(&args.out.join("manifest.txt"), manifest(&lines))?;
    println!("wrote {} images to {}", images.len(), image_dir.display());
    Ok(())
}

pub fn train(args: &TrainArgs) -> Result<()> {
    let file = ConfigFile::load(args.config.as_deref())?;
    let base = config::resolve_train(&file, &args.overrides())?;
    let use_grid = match args.grid {
        Some(flag) => flag,
        None => file
            .get("grid")
            .map(parse_bool)
            .transpose()?
            .unwrap_or(false),
    };
    let (train_set, test_set, train_path, test_path) = load_pair(&args.data)?;
    create_dir(&args.out)?;

    let config = if use_grid {
        eprintln!("grid search over 8 cells on {}", train_set.name);
        let outcome = grid_select(&train_set, &standard_grid(&base))?;
        write_file(&args.out.join("grid.csv"), outcome.to_csv())?;
        eprintln!(
            "selected batch_size={} epochs={}",
            outcome.selected.batch_size, outcome.selected.epochs
        );
        outcome.selected
    } else {
        base
    };

    let (net, mut report) = train_model(&train_set, &config)?;
    let test_error = evaluate(&net, &test_set, &config)?;
    report.test_error = Some(test_error);

    checkpoint::save(&args.out.join("model.ckpt"), &net, None)?;
    write_file(&args.out.join("report.csv"), report.to_csv())?;
    let mut lines = vec![
        ("command", "train".to_string()),
        ("tool_version", TOOL_VERSION.to_string()),
        ("config_file", file.describe_path()),
        ("train", train_path.display().to_string()),
        ("test", test_path.display().to_string()),
        ("output_dir", args.out.display().to_string()),
        ("grid", use_grid.to_string()),
        ("architecture", net.architecture_string()),
    ];
    lines.extend(config.entries());
    write_file(&args.out.join("manifest.txt"), manifest(&lines))?;

    eprintln!(
        "trained {} epochs, best epoch {}, {:.1}s",
        report.history.len(),
        report.best_epoch,
        report.wall_clock_secs
    );
    println!("test error: {test_error:.4}");
    Ok(())
}

pub fn baseline(args: &BaselineArgs) -> Result<()> {
    let file = ConfigFile::load(args.config.as_deref())?;
    let metrics = config::resolve_metrics(&file, args.metric.as_deref(), args.window)?;
    let (train_set, test_set, _, _) = load_pair(&args.data)?;

    let mut rows = String::new();
    for metric in metrics {
        let error = one_nn_error(&train_set, &test_set, metric)?;
        let (name, window) = match metric {
            Metric::Euclidean => ("euclidean", String::new()),
            Metric::Dtw(p) => (
                "dtw",
                p.window.map_or_else(|| "none".into(), |w| w.to_string()),
            ),
        };
        println!("{} {metric}: {error:.4}", train_set.name);
        let _ = writeln!(rows, "{},{name},{window},{error:.6}", train_set.name);
    }

    let new_file = !args.results.exists();
    if let Some(parent) = args.results.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    let mut out = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&args.results)
        .with_context(|| format!("opening {}", args.results.display()))?;
    if new_file {
        rows.insert_str(0, "dataset,metric,window,error\n");
    }
    out.write_all(rows.as_bytes())
        .with_context(|| format!("appending to {}", args.results.display()))
}

pub fn rank(args: &RankArgs) -> Result<()> {
    let policy = match args.ties.to_ascii_lowercase().as_str() {
        "dense" => TiePolicy::Dense,
        "average" => TiePolicy::Average,
        "competition" | "min" => TiePolicy::Competition,
        other => bail!("--ties must be dense, average or competition, got {other:?}"),
    };
    let text = fs::read_to_string(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().context("empty error-rate table")?;
    let algorithms: Vec<String> = header
        .split(',')
        .skip(1)
        .map(|s| s.trim().to_string())
        .collect();
    if algorithms.is_empty() {
        bail!("table header names no algorithms");
    }
    let mut table = Vec::new();
    for (n, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != algorithms.len() + 1 {
            bail!(
                "row {} has {} cells, expected {}",
                n + 2,
                cells.len(),
                algorithms.len() + 1
            );
        }
        let row = cells[1..]
            .iter()
            .map(|c| match *c {
                "" | "-" => Ok(None),
                v => v
                    .parse::<f64>()
                    .map(Some)
                    .with_context(|| format!("row {}: bad error rate {v:?}", n + 2)),
            })
            .collect::<Result<Vec<_>>>()?;
        table.push(row);
    }
    let ranks = rank_table(&table, policy)?;
    print!("{}", ranks.to_csv(&algorithms));
    Ok(())
}
