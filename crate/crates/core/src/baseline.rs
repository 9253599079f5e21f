//! 1-nearest-neighbour classifiers under Euclidean distance and dynamic time
//! warping.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ucr::Dataset;

/// Sakoe-Chiba band half-width in samples; `None` is unconstrained warping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DtwParams {
    pub window: Option<usize>,
}

impl DtwParams {
    pub fn unconstrained() -> Self {
        DtwParams { window: None }
    }

    pub fn band(window: usize) -> Self {
        DtwParams {
            window: Some(window),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Euclidean,
    Dtw(DtwParams),
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Euclidean => f.write_str("euclidean"),
            Metric::Dtw(DtwParams { window: None }) => f.write_str("dtw"),
            Metric::Dtw(DtwParams { window: Some(w) }) => write!(f, "dtw(w={w})"),
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "euclidean" | "ed" | "l2" => Ok(Metric::Euclidean),
            "dtw" => Ok(Metric::Dtw(DtwParams::unconstrained())),
            other => Err(Error::InvalidArgument(format!("unknown metric {other:?}"))),
        }
    }
}

pub fn euclidean_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "euclidean distance needs equal lengths, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

/// Cumulative squared-difference cost of the best warping path from `(0, 0)`
/// to `(n-1, m-1)` using steps `(1,0)`, `(0,1)`, `(1,1)`. No square root is
/// taken. With a window, cells with `|i - j| > window` are excluded.
///
/// Memory is two rows of length `m + 1`.
pub fn dtw_distance(a: &[f64], b: &[f64], params: DtwParams) -> Result<f64> {
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return Err(Error::InvalidArgument("dtw needs non-empty series".into()));
    }
    let band = match params.window {
        Some(w) if n.abs_diff(m) > w => {
            return Err(Error::InvalidArgument(format!(
                "window {w} cannot connect lengths {n} and {m}"
            )))
        }
        Some(w) => w,
        None => n.max(m),
    };

    let mut prev = vec![f64::INFINITY; m + 1];
    let mut cur = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for i in 1..=n {
        cur.fill(f64::INFINITY);
        let lo = i.saturating_sub(band).max(1);
        let hi = (i + band).min(m);
        let ai = a[i - 1];
        for j in lo..=hi {
            let d = ai - b[j - 1];
            let best = prev[j - 1].min(prev[j]).min(cur[j - 1]);
            cur[j] = d * d + best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m])
}

pub fn distance(metric: Metric, a: &[f64], b: &[f64]) -> Result<f64> {
    match metric {
        Metric::Euclidean => euclidean_distance(a, b),
        Metric::Dtw(p) => dtw_distance(a, b, p),
    }
}

/// Index of the closest training series under `dist`; ties go to the lowest
/// index.
pub fn nearest_index<F>(train: &Dataset, query: &[f64], dist: F) -> Result<usize>
where
    F: Fn(&[f64], &[f64]) -> Result<f64>,
{
    if train.is_empty() {
        return Err(Error::InvalidArgument(
            "1-NN needs a non-empty training set".into(),
        ));
    }
    let mut best = (f64::INFINITY, 0);
    for (i, s) in train.series.iter().enumerate() {
        let d = dist(&s.values, query)?;
        if d < best.0 {
            best = (d, i);
        }
    }
    Ok(best.1)
}

pub fn one_nn_classify(train: &Dataset, query: &[f64], metric: Metric) -> Result<usize> {
    let i = nearest_index(train, query, |a, b| distance(metric, a, b))?;
    Ok(train.series[i].label)
}

/// Predicted labels for every test series, computed in parallel.
pub fn one_nn_predict(train: &Dataset, test: &Dataset, metric: Metric) -> Result<Vec<usize>> {
    test.series
        .par_iter()
        .map(|s| one_nn_classify(train, &s.values, metric))
        .collect()
}

/// Fraction of misclassified test series.
pub fn one_nn_error(train: &Dataset, test: &Dataset, metric: Metric) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::InvalidArgument("empty test set".into()));
    }
    let predicted = one_nn_predict(train, test, metric)?;
    let wrong = predicted
        .iter()
        .zip(&test.series)
        .filter(|(p, s)| **p != s.label)
        .count();
    Ok(wrong as f64 / test.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ucr::parse_ucr_file;

    /// Minimum over every monotone warping path, enumerated recursively.
    fn brute_force_dtw(a: &[f64], b: &[f64]) -> f64 {
        fn walk(a: &[f64], b: &[f64], i: usize, j: usize) -> f64 {
            let here = (a[i] - b[j]).powi(2);
            if i == a.len() - 1 && j == b.len() - 1 {
                return here;
            }
            let mut best = f64::INFINITY;
            if i + 1 < a.len() {
                best = best.min(walk(a, b, i + 1, j));
            }
            if j + 1 < b.len() {
                best = best.min(walk(a, b, i, j + 1));
            }
            if i + 1 < a.len() && j + 1 < b.len() {
                best = best.min(walk(a, b, i + 1, j + 1));
            }
            here + best
        }
        walk(a, b, 0, 0)
    }

    #[test]
    fn euclidean_examples() {
        assert_eq!(euclidean_distance(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(euclidean_distance(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
        assert!(euclidean_distance(&[0.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn dtw_examples() {
        let a = [0.3, -1.0, 2.0, 0.5];
        assert_eq!(
            dtw_distance(&a, &a, DtwParams::unconstrained()).unwrap(),
            0.0
        );

        let b = [1.0, 1.0, 0.0, 0.0];
        let pointwise: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum();
        assert_eq!(dtw_distance(&a, &b, DtwParams::band(0)).unwrap(), pointwise);

        let long = [0.1, 0.7, -0.4, 1.3, 0.0];
        let expected = brute_force_dtw(&a, &long);
        let got = dtw_distance(&a, &long, DtwParams::unconstrained()).unwrap();
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn dtw_errors() {
        assert!(dtw_distance(&[], &[1.0], DtwParams::unconstrained()).is_err());
        assert!(dtw_distance(&[1.0, 2.0, 3.0], &[1.0], DtwParams::band(1)).is_err());
        assert!(dtw_distance(&[1.0, 2.0, 3.0], &[1.0], DtwParams::band(2)).is_ok());
    }

    #[test]
    fn one_nn_examples() {
        let train = parse_ucr_file("1,0,0,0\n2,5,5,5\n3,9,9,9", "t").unwrap();
        assert_eq!(
            one_nn_classify(&train, &[5.0, 5.0, 5.0], Metric::Euclidean).unwrap(),
            1
        );
        assert_eq!(
            one_nn_classify(
                &train,
                &[8.0, 9.5, 9.0],
                Metric::Dtw(DtwParams::unconstrained())
            )
            .unwrap(),
            2
        );
        // Equidistant from rows 0 and 1: lowest index wins.
        assert_eq!(
            one_nn_classify(&train, &[2.5, 2.5, 2.5], Metric::Euclidean).unwrap(),
            0
        );
    }

    #[test]
    fn self_match_error_is_zero() {
        let ds = parse_ucr_file("1,0,1,0\n2,5,4,5\n1,0,2,0\n2,6,6,5", "t").unwrap();
        assert_eq!(one_nn_error(&ds, &ds, Metric::Euclidean).unwrap(), 0.0);
    }

    #[test]
    fn metric_parse_and_display() {
        assert_eq!(
            "DTW".parse::<Metric>().unwrap(),
            Metric::Dtw(DtwParams::unconstrained())
        );
        assert_eq!("euclidean".parse::<Metric>().unwrap(), Metric::Euclidean);
        assert_eq!(Metric::Dtw(DtwParams::band(3)).to_string(), "dtw(w=3)");
    }
}
