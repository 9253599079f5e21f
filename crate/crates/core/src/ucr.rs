//! Reading and writing datasets in the UCR archive text format.
//!
//! Each non-empty line is one series: the class label followed by the samples,
//! separated either by commas or by runs of whitespace. Raw labels can be any
//! numeral (the archive uses `1`, `-1`, `0.0000000e+00`, ...); they are remapped
//! to `0..c` by ascending numeric value.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Standard deviation below which a series is treated as constant.
pub const ZNORM_EPSILON: f64 = 1e-12;

/// Default share of each class held out for validation.
pub const DEFAULT_VALIDATION_FRACTION: f64 = 0.2;

/// One labeled univariate series.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub values: Vec<f64>,
    /// Class index in `0..num_classes` of the owning dataset.
    pub label: usize,
    /// Label token exactly as it appeared in the source file.
    pub raw_label: String,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub series: Vec<TimeSeries>,
    pub num_classes: usize,
    pub series_length: usize,
    /// Distinct numeric raw labels in ascending order; `class_values[k]` is the
    /// raw value that maps to class index `k`.
    pub class_values: Vec<f64>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.series.iter().map(|s| s.label).collect()
    }

    /// Number of series per class index.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for s in &self.series {
            counts[s.label] += 1;
        }
        counts
    }

    /// A dataset holding the series at `indices` (in that order) with the same
    /// class mapping as `self`.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            series: indices.iter().map(|&i| self.series[i].clone()).collect(),
            num_classes: self.num_classes,
            series_length: self.series_length,
            class_values: self.class_values.clone(),
        }
    }

    /// Apply [`znormalize`] to every member series.
    pub fn znormalized(&self) -> Dataset {
        Dataset {
            series: self.series.iter().map(znormalize).collect(),
            ..self.clone()
        }
    }
}

#[derive(Clone, Copy)]
enum Delimiter {
    Comma,
    Whitespace,
}

impl Delimiter {
    fn detect(line: &str) -> Self {
        if line.contains(',') {
            Delimiter::Comma
        } else {
            Delimiter::Whitespace
        }
    }

    fn split<'a>(self, line: &'a str) -> Box<dyn Iterator<Item = &'a str> + 'a> {
        match self {
            Delimiter::Comma => Box::new(line.split(',').map(str::trim)),
            Delimiter::Whitespace => Box::new(line.split_whitespace()),
        }
    }
}

struct RawRecord {
    line: usize,
    label_token: String,
    label_value: f64,
    values: Vec<f64>,
}

fn parse_records(content: &str, name: &str) -> Result<Vec<RawRecord>> {
    let mut delimiter = None;
    let mut records: Vec<RawRecord> = Vec::new();
    let parse_err = |line: usize, message: String| Error::Parse {
        name: name.to_string(),
        line,
        message,
    };

    for (idx, raw_line) in content.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.trim();
        if line.is_empty() {
            continue;
        }
        let delim = *delimiter.get_or_insert_with(|| Delimiter::detect(line));
        let mut fields = delim.split(line);

        let label_token = fields.next().unwrap_or_default().to_string();
        let label_value: f64 = label_token
            .parse()
            .map_err(|_| parse_err(line_no, format!("non-numeric label {label_token:?}")))?;
        if !label_value.is_finite() {
            return Err(parse_err(
                line_no,
                format!("non-finite label {label_token:?}"),
            ));
        }

        let mut values = Vec::new();
        for (col, field) in fields.enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                parse_err(
                    line_no,
                    format!("non-numeric sample {field:?} in column {}", col + 2),
                )
            })?;
            if !v.is_finite() {
                return Err(parse_err(
                    line_no,
                    format!("non-finite sample {field:?} in column {}", col + 2),
                ));
            }
            values.push(v);
        }
        if values.is_empty() {
            return Err(parse_err(
                line_no,
                "record has a label but no samples".into(),
            ));
        }
        if let Some(first) = records.first() {
            if first.values.len() != values.len() {
                return Err(parse_err(
                    line_no,
                    format!(
                        "record has {} samples, expected {} (from line {})",
                        values.len(),
                        first.values.len(),
                        first.line
                    ),
                ));
            }
        }
        records.push(RawRecord {
            line: line_no,
            label_token,
            label_value,
            values,
        });
    }

    if records.is_empty() {
        return Err(Error::EmptyInput {
            name: name.to_string(),
        });
    }
    Ok(records)
}

fn build_dataset(name: &str, records: Vec<RawRecord>, class_values: Vec<f64>) -> Result<Dataset> {
    let series_length = records[0].values.len();
    let mut series = Vec::with_capacity(records.len());
    for rec in records {
        let label = class_values
            .iter()
            .position(|&c| c == rec.label_value)
            .ok_or_else(|| Error::Parse {
                name: name.to_string(),
                line: rec.line,
                message: format!("label {:?} is not among the known classes", rec.label_token),
            })?;
        series.push(TimeSeries {
            values: rec.values,
            label,
            raw_label: rec.label_token,
        });
    }
    Ok(Dataset {
        name: name.to_string(),
        series,
        num_classes: class_values.len(),
        series_length,
        class_values,
    })
}

/// Parse a UCR-format file. Labels are remapped to `0..c` in ascending numeric
/// order of the distinct raw labels.
pub fn parse_ucr_file(content: &str, name: &str) -> Result<Dataset> {
    let records = parse_records(content, name)?;
    let mut class_values: Vec<f64> = records.iter().map(|r| r.label_value).collect();
    class_values.sort_by(f64::total_cmp);
    class_values.dedup();
    if class_values.len() < 2 {
        return Err(Error::Parse {
            name: name.to_string(),
            line: records[0].line,
            message: format!(
                "need at least 2 distinct labels, found {}",
                class_values.len()
            ),
        });
    }
    build_dataset(name, records, class_values)
}

/// Parse a file using an existing class mapping, typically the test split
/// parsed against its training split. Unknown labels are an error.
pub fn parse_ucr_file_with_classes(
    content: &str,
    name: &str,
    class_values: &[f64],
) -> Result<Dataset> {
    let records = parse_records(content, name)?;
    build_dataset(name, records, class_values.to_vec())
}

/// Comma-delimited serialization with the raw label tokens preserved.
pub fn to_ucr_string(dataset: &Dataset) -> String {
    let mut out = String::new();
    for s in &dataset.series {
        out.push_str(&s.raw_label);
        for v in &s.values {
            // `{}` on f64 is the shortest representation that round-trips.
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub fn load_ucr_file(path: &Path) -> Result<Dataset> {
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_ucr_file(&content, &dataset_name_from_path(path))
}

fn dataset_name_from_path(path: &Path) -> String {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    stem.trim_end_matches("_TRAIN")
        .trim_end_matches("_TEST")
        .to_string()
}

/// Load a train file and a test file, mapping test labels with the training
/// classes.
pub fn load_train_test(train_path: &Path, test_path: &Path) -> Result<(Dataset, Dataset)> {
    let train = load_ucr_file(train_path)?;
    let content = fs::read_to_string(test_path).map_err(|e| Error::io(test_path, e))?;
    let test = parse_ucr_file_with_classes(&content, &train.name, &train.class_values)?;
    if test.series_length != train.series_length {
        return Err(Error::Shape(format!(
            "{}: train length {} differs from test length {}",
            train.name, train.series_length, test.series_length
        )));
    }
    Ok((train, test))
}

/// Locate `<name>_TRAIN` / `<name>_TEST` under `dir`, either flat or inside a
/// `<name>/` subdirectory, with `.txt`, `.tsv`, `.csv` or no extension.
pub fn find_archive_pair(dir: &Path, name: &str) -> Option<(PathBuf, PathBuf)> {
    let candidates = |split: &str| -> Vec<PathBuf> {
        let mut out = Vec::new();
        for base in [dir.to_path_buf(), dir.join(name)] {
            for ext in ["txt", "tsv", "csv", ""] {
                let file = if ext.is_empty() {
                    format!("{name}_{split}")
                } else {
                    format!("{name}_{split}.{ext}")
                };
                out.push(base.join(file));
            }
        }
        out
    };
    let train = candidates("TRAIN").into_iter().find(|p| p.is_file())?;
    let test = candidates("TEST").into_iter().find(|p| p.is_file())?;
    Some((train, test))
}

/// Z-normalize to zero mean and unit population standard deviation. Series with
/// standard deviation below [`ZNORM_EPSILON`] become all zeros.
pub fn znormalize(series: &TimeSeries) -> TimeSeries {
    let n = series.values.len() as f64;
    let mean = series.values.iter().sum::<f64>() / n;
    let var = series
        .values
        .iter()
        .map(|v| (v - mean).powi(2))
        .sum::<f64>()
        / n;
    let std = var.sqrt();
    let values = if std < ZNORM_EPSILON {
        vec![0.0; series.values.len()]
    } else {
        series.values.iter().map(|v| (v - mean) / std).collect()
    };
    TimeSeries {
        values,
        ..series.clone()
    }
}

#[derive(Debug, Clone)]
pub struct ValidationSplit {
    pub train: Dataset,
    pub validation: Dataset,
    /// Classes that ended up with no validation sample (single-member classes).
    pub classes_missing_from_validation: Vec<usize>,
}

/// Number of validation samples drawn from a class of `count` members.
pub fn validation_count(fraction: f64, count: usize) -> usize {
    if count < 2 {
        return 0;
    }
    // The small slack keeps products like 0.1 * 30 = 3.0000000000000004 at 3.
    let wanted = (fraction * count as f64 - 1e-9).ceil().max(0.0) as usize;
    wanted.min(count - 1)
}

/// Stratified, seeded train/validation split. Each class contributes
/// `ceil(fraction * count)` samples to validation but always keeps at least one
/// sample in training. Both halves preserve the original series order.
pub fn split_validation(dataset: &Dataset, fraction: f64, seed: u64) -> Result<ValidationSplit> {
    if !(fraction > 0.0 && fraction < 0.5) {
        return Err(Error::InvalidArgument(format!(
            "validation fraction must be in (0, 0.5), got {fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut is_validation = vec![false; dataset.len()];
    let mut missing = Vec::new();

    for class in 0..dataset.num_classes {
        let mut members: Vec<usize> = dataset
            .series
            .iter()
            .enumerate()
            .filter(|(_, s)| s.label == class)
            .map(|(i, _)| i)
            .collect();
        let n_val = validation_count(fraction, members.len());
        if n_val == 0 {
            missing.push(class);
            continue;
        }
        members.shuffle(&mut rng);
        for &i in &members[..n_val] {
            is_validation[i] = true;
        }
    }

    let (val_idx, train_idx): (Vec<usize>, Vec<usize>) =
        (0..dataset.len()).partition(|&i| is_validation[i]);
    Ok(ValidationSplit {
        train: dataset.subset(&train_idx),
        validation: dataset.subset(&val_idx),
        classes_missing_from_validation: missing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(values: &[f64]) -> TimeSeries {
        TimeSeries {
            values: values.to_vec(),
            label: 0,
            raw_label: "1".into(),
        }
    }

    #[test]
    fn comma_file_remaps_ascending() {
        let ds = parse_ucr_file("2,0.5,-0.1\n1,0.0,0.3", "t").unwrap();
        assert_eq!(ds.num_classes, 2);
        assert_eq!(ds.series_length, 2);
        assert_eq!(ds.series[0].raw_label, "2");
        assert_eq!(ds.series[0].label, 1);
        assert_eq!(ds.series[1].raw_label, "1");
        assert_eq!(ds.series[1].label, 0);
        assert_eq!(ds.series[0].values, vec![0.5, -0.1]);
    }

    #[test]
    fn whitespace_file_with_negative_labels() {
        let ds = parse_ucr_file("-1 0.1 0.2\n1 0.3 0.4\n", "t").unwrap();
        assert_eq!(ds.labels(), vec![0, 1]);
        assert_eq!(ds.class_values, vec![-1.0, 1.0]);
    }

    #[test]
    fn exponent_labels_and_tabs() {
        let ds = parse_ucr_file(
            "  1.0000000e+00\t 1.5 2.5\n\n 0.0000000e+00  3.5\t4.5\n",
            "t",
        )
        .unwrap();
        assert_eq!(ds.labels(), vec![1, 0]);
        assert_eq!(ds.series[0].raw_label, "1.0000000e+00");
    }

    #[test]
    fn non_contiguous_labels() {
        let ds = parse_ucr_file("7,1,2\n3,1,2\n11,1,2\n3,0,0", "t").unwrap();
        assert_eq!(ds.labels(), vec![1, 0, 2, 0]);
        assert_eq!(ds.num_classes, 3);
    }

    #[test]
    fn errors_report_line_numbers() {
        assert!(matches!(
            parse_ucr_file("\n  \n", "t"),
            Err(Error::EmptyInput { .. })
        ));
        match parse_ucr_file("1,1,2\n2,1,2,3", "t") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        match parse_ucr_file("1,1,2\n\n2,1,x", "t") {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("\"x\""));
            }
            other => panic!("unexpected {other:?}"),
        }
        match parse_ucr_file("1,1,2\n1,3,4", "t") {
            Err(Error::Parse { message, .. }) => assert!(message.contains("2 distinct")),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_ucr_file("1,1,NaN\n2,1,1", "t").is_err());
        assert!(parse_ucr_file("1\n2", "t").is_err());
    }

    #[test]
    fn test_split_uses_training_classes() {
        let train = parse_ucr_file("1,0,0\n2,1,1\n3,2,2", "t").unwrap();
        let test = parse_ucr_file_with_classes("3,0,0\n3,1,1", "t", &train.class_values).unwrap();
        assert_eq!(test.labels(), vec![2, 2]);
        assert!(parse_ucr_file_with_classes("4,0,0", "t", &train.class_values).is_err());
    }

    #[test]
    fn serialize_keeps_raw_labels() {
        let text = "-1 0.1 0.2\n1 0.3 0.4\n";
        let ds = parse_ucr_file(text, "t").unwrap();
        assert_eq!(to_ucr_string(&ds), "-1,0.1,0.2\n1,0.3,0.4\n");
    }

    #[test]
    fn znormalize_examples() {
        assert_eq!(znormalize(&series(&[1.0; 4])).values, vec![0.0; 4]);
        assert_eq!(znormalize(&series(&[0.0, 2.0])).values, vec![-1.0, 1.0]);

        // Two-pass oracle for [1..5]: mean 3, population variance 2.
        let out = znormalize(&series(&[1.0, 2.0, 3.0, 4.0, 5.0])).values;
        let s = 2f64.sqrt();
        let expected = [-2.0 / s, -1.0 / s, 0.0, 1.0 / s, 2.0 / s];
        for (a, b) in out.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        let mean: f64 = out.iter().sum::<f64>() / 5.0;
        let var: f64 = out.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 5.0;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-12);
    }

    fn balanced(per_class: usize, classes: usize) -> Dataset {
        let mut text = String::new();
        for i in 0..per_class * classes {
            let _ = writeln!(text, "{},{},{}", i % classes + 1, i, i * 2);
        }
        parse_ucr_file(&text, "bal").unwrap()
    }

    #[test]
    fn split_counts() {
        let split = split_validation(&balanced(5, 2), 0.2, 1).unwrap();
        assert_eq!(split.train.len(), 8);
        assert_eq!(split.validation.len(), 2);
        assert_eq!(split.validation.class_counts(), vec![1, 1]);
        assert!(split.classes_missing_from_validation.is_empty());

        let split = split_validation(&balanced(14, 2), 0.2, 1).unwrap();
        assert_eq!(split.train.len(), 22);
        assert_eq!(split.validation.class_counts(), vec![3, 3]);
    }

    #[test]
    fn split_is_seeded_partition() {
        let ds = balanced(9, 3);
        let a = split_validation(&ds, 0.3, 42).unwrap();
        let b = split_validation(&ds, 0.3, 42).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.validation, b.validation);

        let mut all: Vec<String> = a
            .train
            .series
            .iter()
            .chain(&a.validation.series)
            .map(|s| format!("{:?}", s.values))
            .collect();
        all.sort();
        let mut orig: Vec<String> = ds
            .series
            .iter()
            .map(|s| format!("{:?}", s.values))
            .collect();
        orig.sort();
        assert_eq!(all, orig);
    }

    #[test]
    fn singleton_class_stays_in_training() {
        let ds = parse_ucr_file("1,0,0\n1,1,1\n1,2,2\n2,5,5", "t").unwrap();
        let split = split_validation(&ds, 0.4, 0).unwrap();
        assert_eq!(split.classes_missing_from_validation, vec![1]);
        assert_eq!(split.validation.class_counts(), vec![2, 0]);
        assert_eq!(split.train.class_counts(), vec![1, 1]);
    }

    #[test]
    fn split_rejects_bad_fraction() {
        let ds = balanced(5, 2);
        for f in [0.0, 0.5, -0.1, 0.7] {
            assert!(split_validation(&ds, f, 0).is_err());
        }
    }

    #[test]
    fn validation_count_caps() {
        assert_eq!(validation_count(0.2, 5), 1);
        assert_eq!(validation_count(0.2, 14), 3);
        assert_eq!(validation_count(0.1, 30), 3);
        assert_eq!(validation_count(0.49, 2), 1);
        assert_eq!(validation_count(0.3, 1), 0);
    }

    #[test]
    fn archive_name_from_path() {
        assert_eq!(
            dataset_name_from_path(Path::new("/x/Coffee_TRAIN.txt")),
            "Coffee"
        );
        assert_eq!(
            dataset_name_from_path(Path::new("GunPoint_TEST")),
            "GunPoint"
        );
    }
}
