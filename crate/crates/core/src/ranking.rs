//! Average ranking within a category (R) and across categories (RC).
//!
//! Within one category each metric is ranked independently, 1 = best, with
//! tied methods sharing the mean of the ranks they span. Undefined values
//! rank behind every defined one. R is the mean of a method's eight ranks;
//! RC is the mean of its R over categories.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{Direction, Metric, MetricSet};

/// Ranking direction per metric.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricDirections(BTreeMap<Metric, Direction>);

impl Default for MetricDirections {
    /// Re↑ Sp↑ FPR↓ FNR↓ WCR↓ CCR↑ Pr↑ F1↑
    fn default() -> Self {
        MetricDirections(Metric::ALL.into_iter().map(|m| (m, m.direction())).collect())
    }
}

impl MetricDirections {
    pub fn get(&self, m: Metric) -> Direction {
        self.0.get(&m).copied().unwrap_or(m.direction())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub method: String,
    /// Rank per metric in [`Metric::ALL`] order.
    pub ranks: [f64; 8],
    /// Mean of `ranks`.
    pub r: f64,
}

impl RankEntry {
    pub fn rank(&self, m: Metric) -> f64 {
        self.ranks[Metric::ALL.iter().position(|&x| x == m).expect("metric listed")]
    }
}

/// Per-metric ranks and R for each method, in input order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    pub entries: Vec<RankEntry>,
}

impl RankTable {
    pub fn get(&self, method: &str) -> Option<&RankEntry> {
        self.entries.iter().find(|e| e.method == method)
    }

    /// Entries ordered by ascending R (stable for ties).
    pub fn by_r(&self) -> Vec<&RankEntry> {
        let mut v: Vec<_> = self.entries.iter().collect();
        v.sort_by(|a, b| a.r.total_cmp(&b.r));
        v
    }
}

/// Fractional ranks of `values` (1 = best) under `dir`.
pub fn rank_values(values: &[Option<f64>], dir: Direction) -> Vec<f64> {
    let key = |v: Option<f64>| v.filter(|x| !x.is_nan());
    let better = |a: f64, b: f64| match dir {
        Direction::HigherIsBetter => b.total_cmp(&a),
        Direction::LowerIsBetter => a.total_cmp(&b),
    };
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| match (key(values[i]), key(values[j])) {
        (Some(a), Some(b)) => better(a, b),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && key(values[order[end]]) == key(values[order[start]]) {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let shared = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = shared;
        }
        start = end;
    }
    ranks
}

pub fn rank_methods(methods: &[(String, MetricSet)], dirs: &MetricDirections) -> Result<RankTable> {
    if methods.is_empty() {
        return Err(Error::NoMethods);
    }
    let per_metric: Vec<Vec<f64>> = Metric::ALL
        .iter()
        .map(|&m| {
            let values: Vec<_> = methods.iter().map(|(_, s)| s.get(m)).collect();
            rank_values(&values, dirs.get(m))
        })
        .collect();
    let entries = methods
        .iter()
        .enumerate()
        .map(|(i, (name, _))| {
            let ranks: [f64; 8] = std::array::from_fn(|k| per_metric[k][i]);
            RankEntry {
                method: name.clone(),
                ranks,
                r: ranks.iter().sum::<f64>() / ranks.len() as f64,
            }
        })
        .collect();
    Ok(RankTable { entries })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossCategoryEntry {
    pub method: String,
    pub rc: f64,
    /// R per category, in category order.
    pub per_category: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossCategoryRank {
    pub categories: Vec<String>,
    pub entries: Vec<CrossCategoryEntry>,
}

impl CrossCategoryRank {
    pub fn get(&self, method: &str) -> Option<&CrossCategoryEntry> {
        self.entries.iter().find(|e| e.method == method)
    }
}

/// RC per method. Every method must appear in every category.
pub fn rank_across_categories(tables: &[(String, RankTable)]) -> Result<CrossCategoryRank> {
    let Some((_, first)) = tables.first() else {
        return Err(Error::NoMethods);
    };
    let mut methods: Vec<&str> = first.entries.iter().map(|e| e.method.as_str()).collect();
    for (_, t) in &tables[1..] {
        for e in &t.entries {
            if !methods.contains(&e.method.as_str()) {
                methods.push(&e.method);
            }
        }
    }
    let mut entries = Vec::with_capacity(methods.len());
    for method in methods {
        let mut per_category = Vec::with_capacity(tables.len());
        for (category, t) in tables {
            let e = t.get(method).ok_or_else(|| Error::MissingMethod {
                method: method.to_string(),
                category: category.clone(),
            })?;
            per_category.push(e.r);
        }
        entries.push(CrossCategoryEntry {
            method: method.to_string(),
            rc: per_category.iter().sum::<f64>() / per_category.len() as f64,
            per_category,
        });
    }
    Ok(CrossCategoryRank {
        categories: tables.iter().map(|(c, _)| c.clone()).collect(),
        entries,
    })
}

/// One row of a metric table: a method's scores in a category.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricRow {
    pub category: String,
    pub method: String,
    pub metrics: MetricSet,
}

/// Category used for rows of a fixture without a `category` column.
pub const DEFAULT_CATEGORY: &str = "overall";

/// Reads a metric table from CSV.
///
/// Required columns: `method` and the eight metric names (`Re, Sp, FPR,
/// FNR, WCR, CCR, Pr, F1`, any order, case-insensitive). An optional
/// `category` column groups rows; other columns are ignored. Empty cells,
/// `-`, `nan` and `undefined` read as undefined.
pub fn read_metric_rows(path: impl AsRef<Path>) -> Result<Vec<MetricRow>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::NotFound(path.to_path_buf())
        } else {
            Error::io(path, e)
        }
    })?;
    parse_metric_rows(file, path)
}

pub(crate) fn parse_metric_rows(input: impl std::io::Read, path: &Path) -> Result<Vec<MetricRow>> {
    let fixture_err = |message: String| Error::Fixture {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input);
    let headers = reader
        .headers()
        .map_err(|e| fixture_err(e.to_string()))?
        .clone();
    let find = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let method_col = find("method").ok_or_else(|| fixture_err("missing `method` column".into()))?;
    let category_col = find("category");
    let mut metric_cols = Vec::new();
    for m in Metric::ALL {
        let col = find(m.name()).ok_or_else(|| fixture_err(format!("missing `{}` column", m.name())))?;
        metric_cols.push((m, col));
    }
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| fixture_err(e.to_string()))?;
        let cell = |i: usize| record.get(i).unwrap_or("");
        let mut metrics = MetricSet::default();
        for &(m, col) in &metric_cols {
            let raw = cell(col);
            let value = match raw.to_ascii_lowercase().as_str() {
                "" | "-" | "nan" | "undefined" => None,
                s => Some(s.parse::<f64>().map_err(|_| {
                    fixture_err(format!(
                        "record {}: `{raw}` is not a number in column {}",
                        line + 1,
                        m.name()
                    ))
                })?),
            };
            metrics.set(m, value);
        }
        rows.push(MetricRow {
            category: category_col
                .map(|c| cell(c).to_string())
                .unwrap_or_else(|| DEFAULT_CATEGORY.to_string()),
            method: cell(method_col).to_string(),
            metrics,
        });
    }
    Ok(rows)
}

/// Per-category tables plus RC over all of them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    pub categories: Vec<(String, RankTable)>,
    pub across: CrossCategoryRank,
}

/// Groups rows by category (first-seen order) and ranks each group.
pub fn rank_rows(rows: &[MetricRow], dirs: &MetricDirections) -> Result<RankingReport> {
    let mut groups: Vec<(String, Vec<(String, MetricSet)>)> = Vec::new();
    for row in rows {
        match groups.iter_mut().find(|(c, _)| *c == row.category) {
            Some((_, g)) => g.push((row.method.clone(), row.metrics)),
            None => groups.push((row.category.clone(), vec![(row.method.clone(), row.metrics)])),
        }
    }
    let categories = groups
        .into_iter()
        .map(|(c, g)| rank_methods(&g, dirs).map(|t| (c, t)))
        .collect::<Result<Vec<_>>>()?;
    let across = rank_across_categories(&categories)?;
    Ok(RankingReport { categories, across })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{compute_metrics, Confusion};
    use proptest::prelude::*;

    fn set(v: f64) -> MetricSet {
        let mut s = MetricSet::default();
        for m in Metric::ALL {
            s.set(m, Some(v));
        }
        s
    }

    #[test]
    fn single_method_has_rank_one() {
        let t = rank_methods(&[("A".into(), set(0.3))], &MetricDirections::default()).unwrap();
        assert_eq!(t.entries[0].r, 1.0);
    }

    #[test]
    fn dominant_method_wins_everything() {
        let a = compute_metrics(&Confusion::new(90, 900, 10, 10));
        let b = compute_metrics(&Confusion::new(50, 850, 60, 50));
        let t = rank_methods(&[("A".into(), a), ("B".into(), b)], &MetricDirections::default()).unwrap();
        assert_eq!(t.get("A").unwrap().r, 1.0);
        assert_eq!(t.get("B").unwrap().r, 2.0);
    }

    #[test]
    fn identical_methods_tie() {
        let t = rank_methods(
            &[("A".into(), set(0.5)), ("B".into(), set(0.5))],
            &MetricDirections::default(),
        )
        .unwrap();
        assert_eq!(t.get("A").unwrap().r, 1.5);
        assert_eq!(t.get("B").unwrap().r, 1.5);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(
            rank_methods(&[], &MetricDirections::default()),
            Err(Error::NoMethods)
        ));
    }

    #[test]
    fn undefined_ranks_last() {
        let r = rank_values(&[None, Some(0.1), Some(0.9), None], Direction::HigherIsBetter);
        assert_eq!(r, vec![3.5, 2.0, 1.0, 3.5]);
        let r = rank_values(&[Some(0.1), None, Some(0.9)], Direction::LowerIsBetter);
        assert_eq!(r, vec![1.0, 3.0, 2.0]);
    }

    #[test]
    fn cross_category_examples() {
        let t = |r: f64| RankTable {
            entries: vec![RankEntry {
                method: "A".into(),
                ranks: [r; 8],
                r,
            }],
        };
        let one = rank_across_categories(&[("c1".into(), t(2.5))]).unwrap();
        assert_eq!(one.get("A").unwrap().rc, 2.5);
        let two = rank_across_categories(&[("c1".into(), t(2.0)), ("c2".into(), t(4.0))]).unwrap();
        assert_eq!(two.get("A").unwrap().rc, 3.0);

        let b_only = RankTable {
            entries: vec![RankEntry {
                method: "B".into(),
                ranks: [1.0; 8],
                r: 1.0,
            }],
        };
        let err = rank_across_categories(&[("c1".into(), t(1.0)), ("c2".into(), b_only)]).unwrap_err();
        assert!(matches!(err, Error::MissingMethod { .. }), "{err}");
    }

    #[test]
    fn parses_fixture_with_extra_columns() {
        let csv = "Method,RC,Re,Sp,FPR,FNR,WCR,CCR,F1,Pr\nX,2.8,0.5,0.9,0.1,0.5,0.1,0.9,-,0.4\n";
        let rows = parse_metric_rows(csv.as_bytes(), Path::new("t.csv")).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].category, DEFAULT_CATEGORY);
        assert_eq!(rows[0].metrics.f1, None);
        assert_eq!(rows[0].metrics.pr, Some(0.4));
        let bad = "method,Re\nX,1\n";
        assert!(parse_metric_rows(bad.as_bytes(), Path::new("t.csv")).is_err());
    }

    proptest! {
        #[test]
        fn ranks_are_a_fractional_permutation(values in proptest::collection::vec(proptest::option::of(0u8..5), 1..12)) {
            let vals: Vec<Option<f64>> = values.iter().map(|v| v.map(f64::from)).collect();
            let r = rank_values(&vals, Direction::HigherIsBetter);
            let n = vals.len() as f64;
            prop_assert!((r.iter().sum::<f64>() - n * (n + 1.0) / 2.0).abs() < 1e-9);
            for (i, a) in vals.iter().enumerate() {
                for (j, b) in vals.iter().enumerate() {
                    if a == b { prop_assert_eq!(r[i], r[j]); }
                }
            }
        }

        #[test]
        fn ranks_ignore_monotone_transforms(values in proptest::collection::vec(0.0f64..1.0, 1..10)) {
            let a: Vec<_> = values.iter().map(|&v| Some(v)).collect();
            let b: Vec<_> = values.iter().map(|&v| Some((3.0 * v).exp() + 2.0)).collect();
            prop_assert_eq!(rank_values(&a, Direction::LowerIsBetter), rank_values(&b, Direction::LowerIsBetter));
            prop_assert_eq!(rank_values(&a, Direction::HigherIsBetter), rank_values(&b, Direction::HigherIsBetter));
        }
    }
}
