//! Annual metric series and their trends: ordinary least squares with a
//! slope confidence band, and Pearson correlation with a seeded
//! permutation significance test.
//!
//! The permutation test is the primary p-value. The analytic Student-t
//! p-value exists only as a cross-check oracle in the test suites, so the
//! two routes stay independent.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

/// Default permutation count for the significance test.
pub const DEFAULT_PERMUTATIONS: usize = 100_000;
/// Default confidence level for the slope band (matching the figures).
pub const DEFAULT_CONFIDENCE: f64 = 0.90;
/// Permutations run in seeded batches of this size; counts merge
/// order-independently, so batch-parallel execution stays deterministic.
const PERMUTATION_BATCH: usize = 4096;
/// Largest series length accepted by the exhaustive permutation scheme.
const MAX_EXHAUSTIVE_POINTS: usize = 10;

#[derive(Debug, Error)]
pub enum TrendError {
    #[error("series `{metric}` has {points} points; need at least 3")]
    TooFewPoints { metric: String, points: usize },
    #[error("series `{metric}` repeats year {year}")]
    DuplicateYear { metric: String, year: i32 },
    #[error("series `{metric}` has zero variance in {axis}")]
    ZeroVariance { metric: String, axis: &'static str },
    #[error("confidence level must lie in (0, 1), got {0}")]
    BadConfidence(f64),
    #[error(
        "exhaustive permutation test supports at most {MAX_EXHAUSTIVE_POINTS} points, got {0}"
    )]
    TooManyForExhaustive(usize),
    #[error("failed to write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// A metric's annual observations, sorted by year with no duplicates.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnualSeries {
    pub metric: String,
    pub q: Option<f64>,
    points: Vec<(i32, f64)>,
}

impl AnnualSeries {
    pub fn new(
        metric: impl Into<String>,
        q: Option<f64>,
        mut points: Vec<(i32, f64)>,
    ) -> Result<Self, TrendError> {
        let metric = metric.into();
        points.sort_by_key(|&(year, _)| year);
        for w in points.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(TrendError::DuplicateYear {
                    metric,
                    year: w[0].0,
                });
            }
        }
        Ok(AnnualSeries { metric, q, points })
    }

    pub fn points(&self) -> &[(i32, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn xy(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.points.iter().map(|&(x, _)| f64::from(x)).collect(),
            self.points.iter().map(|&(_, y)| y).collect(),
        )
    }
}

/// Ordinary least squares fit of value against year.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Half-width of the slope confidence interval.
    pub ci_halfwidth: f64,
    pub confidence: f64,
}

/// OLS with the slope confidence interval from the t-quantile at n-2
/// degrees of freedom, at the default 90% level.
pub fn linear_fit(series: &AnnualSeries) -> Result<LinearFit, TrendError> {
    linear_fit_with_confidence(series, DEFAULT_CONFIDENCE)
}

pub fn linear_fit_with_confidence(
    series: &AnnualSeries,
    confidence: f64,
) -> Result<LinearFit, TrendError> {
    if !(0.0..1.0).contains(&confidence) || confidence == 0.0 {
        return Err(TrendError::BadConfidence(confidence));
    }
    let n = series.len();
    if n < 3 {
        return Err(TrendError::TooFewPoints {
            metric: series.metric.clone(),
            points: n,
        });
    }
    let (xs, ys) = series.xy();
    let nf = n as f64;
    let mean_x = xs.iter().sum::<f64>() / nf;
    let mean_y = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mean_x) * (x - mean_x)).sum();
    if sxx == 0.0 {
        return Err(TrendError::ZeroVariance {
            metric: series.metric.clone(),
            axis: "year",
        });
    }
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let dof = nf - 2.0;
    let stderr = (sse / dof / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, dof)
        .expect("dof >= 1")
        .inverse_cdf(0.5 + confidence / 2.0);
    Ok(LinearFit {
        slope,
        intercept,
        ci_halfwidth: t * stderr,
        confidence,
    })
}

/// Pearson correlation coefficient of `ys` against `xs`.
pub fn pearson_r(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mean_x;
        let dy = y - mean_y;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// How the permutation p-value is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PermutationScheme {
    /// Monte-Carlo sampling with the add-one estimator
    /// `p = (exceedances + 1) / (permutations + 1)`.
    Sampled { permutations: usize, seed: u64 },
    /// All n! permutations; exact, for short series (n <= 10).
    Exhaustive,
}

/// Significance stars at the report thresholds: `***` for p <= 0.01,
/// `**` for p <= 0.05, empty otherwise.
pub fn stars_for_p(p: f64) -> &'static str {
    if p <= 0.01 {
        "***"
    } else if p <= 0.05 {
        "**"
    } else {
        ""
    }
}

/// A metric's full trend summary: fit, correlation, significance.
#[derive(Debug, Clone, PartialEq)]
pub struct TrendReport {
    pub metric: String,
    pub q: Option<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub ci_halfwidth: f64,
    pub r: f64,
    pub p_value: f64,
    pub stars: &'static str,
}

/// Pearson r of value against year with a two-sided permutation p-value,
/// plus the linear fit, at the default confidence level.
pub fn pearson_trend(
    series: &AnnualSeries,
    scheme: PermutationScheme,
) -> Result<TrendReport, TrendError> {
    pearson_trend_with_confidence(series, scheme, DEFAULT_CONFIDENCE)
}

pub fn pearson_trend_with_confidence(
    series: &AnnualSeries,
    scheme: PermutationScheme,
    confidence: f64,
) -> Result<TrendReport, TrendError> {
    let fit = linear_fit_with_confidence(series, confidence)?;
    let (xs, ys) = series.xy();
    let r = pearson_r(&xs, &ys).ok_or_else(|| TrendError::ZeroVariance {
        metric: series.metric.clone(),
        axis: "value",
    })?;
    let p_value = match scheme {
        PermutationScheme::Sampled { permutations, seed } => {
            sampled_permutation_p(&xs, &ys, r.abs(), permutations, seed)
        }
        PermutationScheme::Exhaustive => exhaustive_permutation_p(&xs, &ys, r.abs())?,
    };
    Ok(TrendReport {
        metric: series.metric.clone(),
        q: series.q,
        slope: fit.slope,
        intercept: fit.intercept,
        ci_halfwidth: fit.ci_halfwidth,
        r,
        p_value,
        stars: stars_for_p(p_value),
    })
}

/// Count permutations at least as extreme as the observed |r|. Each batch
/// owns a seed derived from (seed, batch index), so the merged count does
/// not depend on scheduling.
fn sampled_permutation_p(
    xs: &[f64],
    ys: &[f64],
    observed_abs_r: f64,
    permutations: usize,
    seed: u64,
) -> f64 {
    let threshold = observed_abs_r - 1e-12;
    let batches: Vec<(usize, usize)> = (0..permutations)
        .step_by(PERMUTATION_BATCH)
        .enumerate()
        .map(|(b, start)| (b, (permutations - start).min(PERMUTATION_BATCH)))
        .collect();
    let exceed: u64 = batches
        .par_iter()
        .map(|&(batch, len)| {
            let mut rng = ChaCha8Rng::seed_from_u64(crate::stamp::derive_seed(
                seed,
                &format!("perm-{batch}"),
            ));
            let mut shuffled: Vec<f64> = ys.to_vec();
            let mut count = 0u64;
            for _ in 0..len {
                shuffled.shuffle(&mut rng);
                if let Some(r) = pearson_r(xs, &shuffled) {
                    if r.abs() >= threshold {
                        count += 1;
                    }
                }
            }
            count
        })
        .sum();
    (exceed as f64 + 1.0) / (permutations as f64 + 1.0)
}

/// Exact two-sided p over all n! permutations (Heap's algorithm).
fn exhaustive_permutation_p(
    xs: &[f64],
    ys: &[f64],
    observed_abs_r: f64,
) -> Result<f64, TrendError> {
    let n = ys.len();
    if n > MAX_EXHAUSTIVE_POINTS {
        return Err(TrendError::TooManyForExhaustive(n));
    }
    let threshold = observed_abs_r - 1e-12;
    let mut perm = ys.to_vec();
    let mut counters = vec![0usize; n];
    let mut exceed = 0u64;
    let mut total = 0u64;
    let mut tally = |p: &[f64]| {
        total += 1;
        if let Some(r) = pearson_r(xs, p) {
            if r.abs() >= threshold {
                exceed += 1;
            }
        }
    };
    tally(&perm);
    let mut i = 0;
    while i < n {
        if counters[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(counters[i], i);
            }
            tally(&perm);
            counters[i] += 1;
            i = 0;
        } else {
            counters[i] = 0;
            i += 1;
        }
    }
    Ok(exceed as f64 / total as f64)
}

type SeriesKey = (String, Option<u64>);
type SeriesAccumulator = (Option<f64>, Vec<(i32, f64)>);

/// Group metric observations into per-(metric, q) series.
pub fn series_from_values(values: &[crate::diversity::DiversityValue]) -> Vec<AnnualSeries> {
    let mut grouped: BTreeMap<SeriesKey, SeriesAccumulator> = BTreeMap::new();
    for v in values {
        let key = (v.metric.clone(), v.q.map(f64::to_bits));
        let entry = grouped.entry(key).or_insert((v.q, Vec::new()));
        entry.1.push((v.year, v.value));
    }
    grouped
        .into_iter()
        .filter_map(|((metric, _), (q, points))| AnnualSeries::new(metric, q, points).ok())
        .collect()
}

/// Write trend reports as CSV (`metric,q,slope,ci90,r,p,stars`).
pub fn write_reports_csv(
    reports: &[TrendReport],
    path: &Path,
    stamp: &crate::RunStamp,
) -> Result<(), TrendError> {
    let io_err = |source| TrendError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut file = std::fs::File::create(path).map_err(io_err)?;
    writeln!(file, "{}", stamp.comment_line()).map_err(io_err)?;
    writeln!(file, "metric,q,slope,ci90,r,p,stars").map_err(io_err)?;
    for r in reports {
        let q = r.q.map(|q| q.to_string()).unwrap_or_default();
        writeln!(
            file,
            "{},{},{},{},{},{},{}",
            r.metric, q, r.slope, r.ci_halfwidth, r.r, r.p_value, r.stars
        )
        .map_err(io_err)?;
    }
    Ok(())
}

/// Scatter-plus-fit SVG for one series, with the slope confidence band
/// drawn through the centroid.
pub fn write_scatter_svg(
    series: &AnnualSeries,
    fit: &LinearFit,
    path: &Path,
    stamp: &crate::RunStamp,
) -> Result<(), TrendError> {
    let io_err = |source| TrendError::Io {
        path: path.to_path_buf(),
        source,
    };
    let (width, height, margin) = (480.0, 320.0, 40.0);
    let (xs, ys) = series.xy();
    let (x_min, x_max) = bounds(&xs);
    let (y_min, y_max) = bounds(&ys);
    let x_span = (x_max - x_min).max(1e-9);
    let y_span = (y_max - y_min).max(1e-9);
    let sx = |x: f64| margin + (x - x_min) / x_span * (width - 2.0 * margin);
    let sy = |y: f64| height - margin - (y - y_min) / y_span * (height - 2.0 * margin);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\">\n"
    ));
    svg.push_str(&format!("<!-- {stamp} -->\n"));
    svg.push_str(&format!(
        "<text x=\"{margin}\" y=\"20\" font-size=\"12\">{} (slope {:.4})</text>\n",
        series.metric, fit.slope
    ));
    let mean_x = xs.iter().sum::<f64>() / xs.len() as f64;
    let mean_y = ys.iter().sum::<f64>() / ys.len() as f64;
    for (slope, style) in [
        (fit.slope, "stroke=\"black\""),
        (
            fit.slope - fit.ci_halfwidth,
            "stroke=\"gray\" stroke-dasharray=\"4\"",
        ),
        (
            fit.slope + fit.ci_halfwidth,
            "stroke=\"gray\" stroke-dasharray=\"4\"",
        ),
    ] {
        let y0 = mean_y + slope * (x_min - mean_x);
        let y1 = mean_y + slope * (x_max - mean_x);
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" {style}/>\n",
            sx(x_min),
            sy(y0),
            sx(x_max),
            sy(y1)
        ));
    }
    for (x, y) in xs.iter().zip(&ys) {
        svg.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"steelblue\"/>\n",
            sx(*x),
            sy(*y)
        ));
    }
    svg.push_str("</svg>\n");
    std::fs::write(path, svg).map_err(io_err)
}

fn bounds(values: &[f64]) -> (f64, f64) {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn series(points: &[(i32, f64)]) -> AnnualSeries {
        AnnualSeries::new("test", None, points.to_vec()).unwrap()
    }

    /// Analytic Student-t p-value: the cross-check oracle. Lives in test
    /// code; the permutation path never touches the t distribution.
    fn analytic_p(r: f64, n: usize) -> f64 {
        if (1.0 - r * r).abs() < 1e-15 {
            return 0.0;
        }
        let dof = (n - 2) as f64;
        let t = r * (dof / (1.0 - r * r)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, dof).unwrap();
        2.0 * (1.0 - dist.cdf(t.abs()))
    }

    #[test]
    fn perfect_line_fits_exactly() {
        let fit = linear_fit(&series(&[(0, 0.0), (1, 1.0), (2, 2.0)])).unwrap();
        assert_eq!(fit.slope, 1.0);
        assert_eq!(fit.intercept, 0.0);
        assert_eq!(fit.ci_halfwidth, 0.0);
    }

    #[test]
    fn constant_series_has_zero_slope() {
        let fit = linear_fit(&series(&[(2000, 5.0), (2001, 5.0), (2002, 5.0)])).unwrap();
        assert_eq!(fit.slope, 0.0);
        assert_eq!(fit.intercept, 5.0);
    }

    #[test]
    fn fit_matches_independent_least_squares_script() {
        // 21-point noisy series; the expected values come from solving
        // the normal equations directly, a different algebraic route than
        // the centered-sum implementation.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
        let points: Vec<(i32, f64)> = (0..21)
            .map(|i| {
                let x = f64::from(i);
                (1997 + i, 6.5 - 0.17 * x + (rng.random::<f64>() - 0.5) * 1.3)
            })
            .collect();
        let fit = linear_fit(&series(&points)).unwrap();
        // Independent route: solve the 2x2 normal equations directly.
        let n = points.len() as f64;
        let sx: f64 = points.iter().map(|&(x, _)| f64::from(x)).sum();
        let sy: f64 = points.iter().map(|&(_, y)| y).sum();
        let sxx: f64 = points
            .iter()
            .map(|&(x, _)| f64::from(x) * f64::from(x))
            .sum();
        let sxy: f64 = points.iter().map(|&(x, y)| f64::from(x) * y).sum();
        let det = n * sxx - sx * sx;
        let slope = (n * sxy - sx * sy) / det;
        let intercept = (sy * sxx - sx * sxy) / det;
        assert_relative_eq!(fit.slope, slope, epsilon = 1e-9);
        assert_relative_eq!(fit.intercept, intercept, epsilon = 1e-9);
        // CI half-width from the standard error formula.
        let mean_x = sx / n;
        let sse: f64 = points
            .iter()
            .map(|&(x, y)| {
                let e = y - (intercept + slope * f64::from(x));
                e * e
            })
            .sum();
        let sxx_centered: f64 = points
            .iter()
            .map(|&(x, _)| (f64::from(x) - mean_x) * (f64::from(x) - mean_x))
            .sum();
        let se = (sse / (n - 2.0) / sxx_centered).sqrt();
        let t = StudentsT::new(0.0, 1.0, n - 2.0).unwrap().inverse_cdf(0.95);
        assert_relative_eq!(fit.ci_halfwidth, t * se, epsilon = 1e-9);
    }

    #[test]
    fn all_years_equal_is_an_error() {
        let err =
            AnnualSeries::new("m", None, vec![(2000, 1.0), (2000, 2.0), (2001, 3.0)]).unwrap_err();
        assert!(matches!(err, TrendError::DuplicateYear { year: 2000, .. }));
    }

    #[test]
    fn too_few_points_is_an_error() {
        let err = linear_fit(&series(&[(2000, 1.0), (2001, 2.0)])).unwrap_err();
        assert!(matches!(err, TrendError::TooFewPoints { points: 2, .. }));
    }

    #[test]
    fn decreasing_line_has_r_minus_one_and_three_stars() {
        let s = series(&[
            (2000, 9.0),
            (2001, 8.0),
            (2002, 7.0),
            (2003, 6.0),
            (2004, 5.0),
            (2005, 4.0),
        ]);
        let report = pearson_trend(
            &s,
            PermutationScheme::Sampled {
                permutations: 20_000,
                seed: 7,
            },
        )
        .unwrap();
        assert_relative_eq!(report.r, -1.0, epsilon = 1e-12);
        // Only permutations that reproduce |r| = 1 count; the add-one
        // estimator keeps p near its floor.
        assert!(report.p_value < 0.01, "p = {}", report.p_value);
        assert_eq!(report.stars, "***");
    }

    #[test]
    fn permutation_p_is_deterministic_under_fixed_seed() {
        let s = series(&[
            (2000, 2.3),
            (2001, 2.9),
            (2002, 1.8),
            (2003, 3.1),
            (2004, 2.2),
            (2005, 3.4),
            (2006, 2.0),
            (2007, 3.3),
        ]);
        let scheme = PermutationScheme::Sampled {
            permutations: 10_000,
            seed: 123,
        };
        let a = pearson_trend(&s, scheme).unwrap();
        let b = pearson_trend(&s, scheme).unwrap();
        assert_eq!(a.p_value, b.p_value);
    }

    #[test]
    fn exhaustive_p_matches_sampled_p_on_short_series() {
        let s = series(&[
            (2000, 4.0),
            (2001, 2.1),
            (2002, 3.3),
            (2003, 1.2),
            (2004, 2.8),
            (2005, 0.9),
        ]);
        let exact = pearson_trend(&s, PermutationScheme::Exhaustive)
            .unwrap()
            .p_value;
        let sampled = pearson_trend(
            &s,
            PermutationScheme::Sampled {
                permutations: 200_000,
                seed: 5,
            },
        )
        .unwrap()
        .p_value;
        assert!(
            (exact - sampled).abs() < 0.01,
            "exact {exact} vs sampled {sampled}"
        );
    }

    #[test]
    fn exhaustive_rejects_long_series() {
        let points: Vec<(i32, f64)> = (0..12).map(|i| (2000 + i, f64::from(i))).collect();
        let err = pearson_trend(&series(&points), PermutationScheme::Exhaustive).unwrap_err();
        assert!(matches!(err, TrendError::TooManyForExhaustive(12)));
    }

    #[test]
    fn permutation_p_tracks_analytic_p() {
        // A moderately correlated series: the permutation p and the
        // analytic t-test p must agree closely.
        let points: Vec<(i32, f64)> = vec![
            (2000, 5.2),
            (2001, 4.9),
            (2002, 5.4),
            (2003, 4.1),
            (2004, 4.6),
            (2005, 3.9),
            (2006, 4.2),
            (2007, 3.5),
            (2008, 4.0),
            (2009, 3.2),
            (2010, 3.6),
            (2011, 3.0),
            (2012, 3.3),
            (2013, 2.8),
            (2014, 3.1),
            (2015, 2.4),
            (2016, 2.9),
            (2017, 2.2),
            (2018, 2.6),
            (2019, 2.1),
            (2020, 2.3),
        ];
        let s = series(&points);
        let report = pearson_trend(
            &s,
            PermutationScheme::Sampled {
                permutations: DEFAULT_PERMUTATIONS,
                seed: 11,
            },
        )
        .unwrap();
        let expected = analytic_p(report.r, points.len());
        assert!(
            (report.p_value - expected).abs() <= 0.005,
            "permutation {} vs analytic {expected}",
            report.p_value
        );
    }

    #[test]
    fn stars_at_table_thresholds() {
        assert_eq!(stars_for_p(0.009), "***");
        assert_eq!(stars_for_p(0.011), "**");
        assert_eq!(stars_for_p(0.049), "**");
        assert_eq!(stars_for_p(0.051), "");
        assert_eq!(stars_for_p(0.01), "***");
        assert_eq!(stars_for_p(0.05), "**");
    }

    #[test]
    fn r_is_affine_invariant_and_flips_under_negation() {
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 0.4 * x + (x * 0.9).sin()).collect();
        let r = pearson_r(&xs, &ys).unwrap();
        let scaled: Vec<f64> = ys.iter().map(|y| 2.5 * y + 7.0).collect();
        let negated: Vec<f64> = ys.iter().map(|y| -y).collect();
        assert_relative_eq!(pearson_r(&xs, &scaled).unwrap(), r, epsilon = 1e-12);
        assert_relative_eq!(pearson_r(&xs, &negated).unwrap(), -r, epsilon = 1e-12);
    }

    #[test]
    fn r_matches_slope_route() {
        // Independent identity: r = slope * sqrt(Sxx / Syy).
        let points: Vec<(i32, f64)> = (0..15)
            .map(|i| (2000 + i, 4.0 - 0.3 * f64::from(i) + f64::from((i * i) % 5) * 0.2))
            .collect();
        let s = series(&points);
        let (xs, ys) = (
            points.iter().map(|&(x, _)| f64::from(x)).collect::<Vec<_>>(),
            points.iter().map(|&(_, y)| y).collect::<Vec<_>>(),
        );
        let r = pearson_r(&xs, &ys).unwrap();
        let fit = linear_fit(&s).unwrap();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (mx, my) = (mean(&xs), mean(&ys));
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
        assert_relative_eq!(r, fit.slope * (sxx / syy).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn series_from_values_groups_by_metric_and_q() {
        use crate::diversity::DiversityValue;
        let values = vec![
            DiversityValue {
                metric: "qd_boolean".into(),
                q: Some(0.0),
                year: 2001,
                value: 4.0,
            },
            DiversityValue {
                metric: "qd_boolean".into(),
                q: Some(2.0),
                year: 2001,
                value: 3.0,
            },
            DiversityValue {
                metric: "qd_boolean".into(),
                q: Some(0.0),
                year: 2000,
                value: 5.0,
            },
            DiversityValue {
                metric: "richness".into(),
                q: None,
                year: 2000,
                value: 7.0,
            },
        ];
        let series = series_from_values(&values);
        assert_eq!(series.len(), 3);
        let q0 = series
            .iter()
            .find(|s| s.metric == "qd_boolean" && s.q == Some(0.0))
            .unwrap();
        assert_eq!(q0.points(), &[(2000, 5.0), (2001, 4.0)]);
    }

    #[test]
    fn reports_csv_has_expected_shape() {
        let s = series(&[(2000, 3.0), (2001, 2.0), (2002, 1.0), (2003, 0.5)]);
        let report = pearson_trend(
            &s,
            PermutationScheme::Sampled {
                permutations: 1000,
                seed: 1,
            },
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trends.csv");
        write_reports_csv(&[report], &path, &crate::RunStamp::ad_hoc(1)).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# prodiv"));
        assert_eq!(lines[1], "metric,q,slope,ci90,r,p,stars");
        assert!(lines[2].starts_with("test,,-"));
    }

    #[test]
    fn scatter_svg_renders() {
        let s = series(&[(2000, 3.0), (2001, 2.5), (2002, 1.0), (2003, 1.5)]);
        let fit = linear_fit(&s).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plot.svg");
        write_scatter_svg(&s, &fit, &path, &crate::RunStamp::ad_hoc(1)).unwrap();
        let svg = std::fs::read_to_string(&path).unwrap();
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<circle").count(), 4);
    }
}
