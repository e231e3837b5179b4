//! Cohort aggregation: per-case metric records into mean/std with explicit
//! NA accounting, cross-variant rankings, and the console tables.
//!
//! NA values are never imputed: a case where a metric is undefined (zero
//! denominator, no matched pairs) is excluded from mean/std and surfaced
//! through `na_count` instead, so detection failures cannot leak into
//! localisation scores unnoticed.

use std::collections::BTreeMap;

use crate::detection::StrategyKind;
use crate::error::{Error, Result};
use crate::localisation::LocalisationMethod;

/// The closed set of metric names a record may carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MetricName {
    Tpr,
    Ppv,
    TprAnt,
    TprInf,
    PpvAnt,
    PpvInf,
    DAnt,
    DInf,
    DeltaAlpha,
}

impl MetricName {
    pub const ALL: [MetricName; 9] = [
        MetricName::Tpr,
        MetricName::Ppv,
        MetricName::TprAnt,
        MetricName::TprInf,
        MetricName::PpvAnt,
        MetricName::PpvInf,
        MetricName::DAnt,
        MetricName::DInf,
        MetricName::DeltaAlpha,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricName::Tpr => "tpr",
            MetricName::Ppv => "ppv",
            MetricName::TprAnt => "tpr_ant",
            MetricName::TprInf => "tpr_inf",
            MetricName::PpvAnt => "ppv_ant",
            MetricName::PpvInf => "ppv_inf",
            MetricName::DAnt => "d_ant",
            MetricName::DInf => "d_inf",
            MetricName::DeltaAlpha => "delta_alpha",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Input(format!("unknown metric {s:?}")))
    }

    /// Detection rates improve upward, distances and angle errors downward.
    pub fn direction(self) -> Direction {
        match self {
            MetricName::Tpr
            | MetricName::Ppv
            | MetricName::TprAnt
            | MetricName::TprInf
            | MetricName::PpvAnt
            | MetricName::PpvInf => Direction::HigherBetter,
            MetricName::DAnt | MetricName::DInf | MetricName::DeltaAlpha => Direction::LowerBetter,
        }
    }

    pub fn is_detection(self) -> bool {
        self.direction() == Direction::HigherBetter
    }
}

impl std::fmt::Display for MetricName {
    fmt_via_name!();
}

macro_rules! fmt_via_name {
    () => {
        fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
            f.write_str(self.name())
        }
    };
}
use fmt_via_name;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    LowerBetter,
    HigherBetter,
}

/// One metric value for one case under one configuration. `method` is
/// `None` for detection metrics, which do not depend on a localisation
/// scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRecord {
    pub case_id: String,
    pub variant: String,
    pub strategy: StrategyKind,
    pub method: Option<LocalisationMethod>,
    pub metric: MetricName,
    pub value: Option<f64>,
}

/// A (strategy, method, metric) cell of the report grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellKey {
    pub strategy: StrategyKind,
    pub method: Option<LocalisationMethod>,
    pub metric: MetricName,
}

impl std::fmt::Display for CellKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.method {
            Some(m) => write!(f, "{}/{}/{}", self.strategy, m, self.metric),
            None => write!(f, "{}/-/{}", self.strategy, self.metric),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct AggregateKey {
    pub variant: String,
    pub cell: CellKey,
}

/// Mean and sample standard deviation over the non-NA values of a cell,
/// with the NA count reported alongside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateStats {
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub na_count: usize,
    pub n: usize,
}

impl AggregateStats {
    /// The paper-style cell rendering, e.g. `5.92±4.83`; `NA` when no case
    /// produced a value.
    pub fn render(&self) -> String {
        match (self.mean, self.std) {
            (Some(m), Some(s)) => format!("{m:.2}\u{b1}{s:.2}"),
            _ => "NA".to_string(),
        }
    }
}

/// Per-case records plus their aggregates, keyed by variant and grid cell.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CohortReport {
    pub records: Vec<MetricRecord>,
    pub aggregates: BTreeMap<AggregateKey, AggregateStats>,
}

impl CohortReport {
    pub fn variants(&self) -> Vec<String> {
        let mut vs: Vec<String> = self
            .aggregates
            .keys()
            .map(|k| k.variant.clone())
            .collect();
        vs.dedup();
        vs
    }

    pub fn cells(&self) -> Vec<CellKey> {
        let mut cs: Vec<CellKey> = self.aggregates.keys().map(|k| k.cell).collect();
        cs.sort();
        cs.dedup();
        cs
    }

    pub fn stats(&self, variant: &str, cell: &CellKey) -> Option<&AggregateStats> {
        self.aggregates.get(&AggregateKey {
            variant: variant.to_string(),
            cell: *cell,
        })
    }
}

fn mean_and_sample_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() == 1 {
        0.0
    } else {
        let ss = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
        (ss / (n - 1.0)).sqrt()
    };
    (Some(mean), Some(std))
}

/// Fold records into a [`CohortReport`]. Permutation-invariant in record
/// order; an empty record set yields an empty report.
pub fn aggregate(records: Vec<MetricRecord>) -> CohortReport {
    let mut groups: BTreeMap<AggregateKey, Vec<Option<f64>>> = BTreeMap::new();
    for r in &records {
        groups
            .entry(AggregateKey {
                variant: r.variant.clone(),
                cell: CellKey {
                    strategy: r.strategy,
                    method: r.method,
                    metric: r.metric,
                },
            })
            .or_default()
            .push(r.value);
    }
    let aggregates = groups
        .into_iter()
        .map(|(key, values)| {
            let mut present: Vec<f64> = values.iter().filter_map(|v| *v).collect();
            present.sort_by(f64::total_cmp); // summation order independent of input order
            let (mean, std) = mean_and_sample_std(&present);
            let stats = AggregateStats {
                mean,
                std,
                na_count: values.len() - present.len(),
                n: values.len(),
            };
            (key, stats)
        })
        .collect();
    CohortReport {
        records,
        aggregates,
    }
}

/// Variants ordered best-first by their aggregate mean for one grid cell.
///
/// Variants without a computable mean rank last; ties are broken by NA
/// count (NA-heavy last), then by variant name, so the ordering is total
/// and deterministic.
pub fn rank_variants(
    report: &CohortReport,
    cell: &CellKey,
    direction: Direction,
) -> Result<Vec<String>> {
    let variants = report.variants();
    if variants.is_empty() {
        return Err(Error::Input("report holds no variants".into()));
    }
    let mut entries: Vec<(String, AggregateStats)> = Vec::with_capacity(variants.len());
    for v in variants {
        let stats = report
            .stats(&v, cell)
            .ok_or_else(|| Error::Input(format!("variant {v:?} has no aggregate for {cell}")))?;
        entries.push((v, *stats));
    }
    entries.sort_by(|(name_a, a), (name_b, b)| {
        use std::cmp::Ordering;
        let by_mean = match (a.mean, b.mean) {
            (Some(ma), Some(mb)) => match direction {
                Direction::LowerBetter => ma.total_cmp(&mb),
                Direction::HigherBetter => mb.total_cmp(&ma),
            },
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => Ordering::Equal,
        };
        by_mean
            .then(a.na_count.cmp(&b.na_count))
            .then(name_a.cmp(name_b))
    });
    Ok(entries.into_iter().map(|(name, _)| name).collect())
}

/// Whether two rankings over the same variants crown different winners.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Divergence {
    pub diverged: bool,
    pub winner_a: String,
    pub winner_b: String,
}

pub fn ranking_divergence(a: &[String], b: &[String]) -> Result<Divergence> {
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort();
    sb.sort();
    if sa != sb {
        return Err(Error::Input(format!(
            "rankings cover different variant sets: {sa:?} vs {sb:?}"
        )));
    }
    let (Some(wa), Some(wb)) = (a.first(), b.first()) else {
        return Err(Error::Input("cannot compare empty rankings".into()));
    };
    Ok(Divergence {
        diverged: wa != wb,
        winner_a: wa.clone(),
        winner_b: wb.clone(),
    })
}

const DETECTION_COLUMNS: [(StrategyKind, MetricName); 10] = [
    (StrategyKind::Line, MetricName::Tpr),
    (StrategyKind::Line, MetricName::Ppv),
    (StrategyKind::Point, MetricName::TprAnt),
    (StrategyKind::Point, MetricName::TprInf),
    (StrategyKind::Point, MetricName::PpvAnt),
    (StrategyKind::Point, MetricName::PpvInf),
    (StrategyKind::PointThreshold, MetricName::TprAnt),
    (StrategyKind::PointThreshold, MetricName::TprInf),
    (StrategyKind::PointThreshold, MetricName::PpvAnt),
    (StrategyKind::PointThreshold, MetricName::PpvInf),
];

/// Render the console tables for one variant: a detection table (strategy
/// rows) and a localisation table (method x strategy rows). The best value
/// in each column is marked with `*`; cells with NA cases are listed in a
/// footer.
pub fn render_tables(report: &CohortReport, variant: &str) -> String {
    let mut out = String::new();
    out.push_str(&format!("variant: {variant}\n"));
    out.push_str(&render_detection_table(report, variant));
    out.push('\n');
    out.push_str(&render_localisation_table(report, variant));
    let na_lines = na_footer(report, variant);
    if !na_lines.is_empty() {
        out.push('\n');
        out.push_str(&na_lines);
    }
    out
}

fn render_detection_table(report: &CohortReport, variant: &str) -> String {
    let mut header = vec!["strategy".to_string()];
    let mut col_keys: Vec<(StrategyKind, MetricName)> = Vec::new();
    for (strategy, metric) in DETECTION_COLUMNS {
        header.push(format!("{metric}"));
        col_keys.push((strategy, metric));
    }
    // Detection metrics live on one row per strategy; group columns by
    // strategy to mirror the two-section layout.
    let mut rows: Vec<Vec<String>> = Vec::new();
    for strategy in StrategyKind::ALL {
        let mut row = vec![strategy.name().to_string()];
        for &(col_strategy, metric) in &col_keys {
            if col_strategy != strategy {
                row.push(String::new());
                continue;
            }
            let cell = CellKey {
                strategy,
                method: None,
                metric,
            };
            row.push(match report.stats(variant, &cell) {
                Some(s) => s.render(),
                None => String::new(),
            });
        }
        rows.push(row);
    }
    mark_best_per_column(report, variant, &mut rows, &|col| {
        let (strategy, metric) = col_keys[col - 1];
        (
            CellKey {
                strategy,
                method: None,
                metric,
            },
            metric.direction(),
        )
    });
    format_table(&header, &rows)
}

fn render_localisation_table(report: &CohortReport, variant: &str) -> String {
    let header = vec![
        "method".to_string(),
        "strategy".to_string(),
        "d_ant".to_string(),
        "d_inf".to_string(),
        "delta_alpha".to_string(),
    ];
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut row_cells: Vec<(LocalisationMethod, StrategyKind)> = Vec::new();
    for method in LocalisationMethod::ALL {
        for strategy in StrategyKind::ALL {
            let mut row = vec![method.name().to_string(), strategy.name().to_string()];
            let mut any = false;
            for metric in [MetricName::DAnt, MetricName::DInf, MetricName::DeltaAlpha] {
                let cell = CellKey {
                    strategy,
                    method: Some(method),
                    metric,
                };
                match report.stats(variant, &cell) {
                    Some(s) => {
                        any = true;
                        row.push(s.render());
                    }
                    None => row.push(String::new()),
                }
            }
            if any {
                rows.push(row);
                row_cells.push((method, strategy));
            }
        }
    }
    // Best per metric column across all (method, strategy) rows.
    for (col, metric) in [
        (2, MetricName::DAnt),
        (3, MetricName::DInf),
        (4, MetricName::DeltaAlpha),
    ] {
        let mut best: Option<(usize, f64)> = None;
        for (i, (method, strategy)) in row_cells.iter().enumerate() {
            let cell = CellKey {
                strategy: *strategy,
                method: Some(*method),
                metric,
            };
            if let Some(stats) = report.stats(variant, &cell) {
                if let Some(mean) = stats.mean {
                    let better = match best {
                        None => true,
                        Some((_, b)) => mean < b,
                    };
                    if better {
                        best = Some((i, mean));
                    }
                }
            }
        }
        if let Some((i, _)) = best {
            let cell = &mut rows[i][col];
            if !cell.is_empty() {
                cell.push('*');
            }
        }
    }
    format_table(&header, &rows)
}

fn mark_best_per_column(
    report: &CohortReport,
    variant: &str,
    rows: &mut [Vec<String>],
    cell_of_col: &dyn Fn(usize) -> (CellKey, Direction),
) {
    if rows.is_empty() {
        return;
    }
    let n_cols = rows[0].len();
    for col in 1..n_cols {
        let (cell, direction) = cell_of_col(col);
        let Some(stats) = report.stats(variant, &cell) else {
            continue;
        };
        let Some(mean) = stats.mean else { continue };
        // Detection columns carry exactly one populated row; the best mark
        // confirms the column is comparable across variants, and within a
        // single-variant table it simply tags the populated cell.
        let mut best: Option<(usize, f64)> = None;
        for (i, row) in rows.iter().enumerate() {
            if !row[col].is_empty() {
                let candidate = mean;
                let better = match (best, direction) {
                    (None, _) => true,
                    (Some((_, b)), Direction::LowerBetter) => candidate < b,
                    (Some((_, b)), Direction::HigherBetter) => candidate > b,
                };
                if better {
                    best = Some((i, candidate));
                }
            }
        }
        if let Some((i, _)) = best {
            rows[i][col].push('*');
        }
    }
}

fn format_table(header: &[String], rows: &[Vec<String>]) -> String {
    let n_cols = header.len();
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.chars().count());
        }
    }
    let render_row = |cells: &[String]| {
        let mut line = String::new();
        for i in 0..n_cols {
            let cell = cells.get(i).map(String::as_str).unwrap_or("");
            let pad = widths[i] - cell.chars().count();
            line.push_str(cell);
            line.extend(std::iter::repeat_n(' ', pad));
            if i + 1 < n_cols {
                line.push_str("  ");
            }
        }
        line.trim_end().to_string()
    };
    let mut out = render_row(header);
    out.push('\n');
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (n_cols - 1)));
    out.push('\n');
    for row in rows {
        out.push_str(&render_row(row));
        out.push('\n');
    }
    out
}

fn na_footer(report: &CohortReport, variant: &str) -> String {
    let mut lines = String::new();
    for cell in report.cells() {
        if let Some(stats) = report.stats(variant, &cell) {
            if stats.na_count > 0 {
                lines.push_str(&format!(
                    "NA: {cell} undefined for {}/{} cases\n",
                    stats.na_count, stats.n
                ));
            }
        }
    }
    lines
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn record(
        case: &str,
        variant: &str,
        metric: MetricName,
        value: Option<f64>,
    ) -> MetricRecord {
        MetricRecord {
            case_id: case.into(),
            variant: variant.into(),
            strategy: StrategyKind::Point,
            method: metric.is_detection().then_some(None).flatten().or(Some(
                LocalisationMethod::SliceBased,
            )),
            metric,
            value,
        }
    }

    fn d_ant_cell() -> CellKey {
        CellKey {
            strategy: StrategyKind::Point,
            method: Some(LocalisationMethod::SliceBased),
            metric: MetricName::DAnt,
        }
    }

    #[test]
    fn sample_std_over_three_values() {
        let records = vec![
            record("c1", "base", MetricName::DAnt, Some(1.0)),
            record("c2", "base", MetricName::DAnt, Some(2.0)),
            record("c3", "base", MetricName::DAnt, Some(3.0)),
        ];
        let report = aggregate(records);
        let stats = report.stats("base", &d_ant_cell()).unwrap();
        assert_abs_diff_eq!(stats.mean.unwrap(), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(stats.std.unwrap(), 1.0, epsilon = 1e-12);
        assert_eq!(stats.render(), "2.00\u{b1}1.00");
        assert_eq!((stats.na_count, stats.n), (0, 3));
    }

    #[test]
    fn all_na_keeps_counts_only() {
        let records = vec![
            record("c1", "base", MetricName::DAnt, None),
            record("c2", "base", MetricName::DAnt, None),
        ];
        let report = aggregate(records);
        let stats = report.stats("base", &d_ant_cell()).unwrap();
        assert_eq!(stats.mean, None);
        assert_eq!(stats.std, None);
        assert_eq!((stats.na_count, stats.n), (2, 2));
        assert_eq!(stats.render(), "NA");
    }

    #[test]
    fn single_value_has_zero_std() {
        let report = aggregate(vec![record("c1", "base", MetricName::DAnt, Some(3.5))]);
        let stats = report.stats("base", &d_ant_cell()).unwrap();
        assert_eq!(stats.mean, Some(3.5));
        assert_eq!(stats.std, Some(0.0));
    }

    #[test]
    fn rendering_convention_matches_two_decimals() {
        let report = aggregate(vec![
            record("c1", "v3", MetricName::DInf, Some(1.0)),
            record("c2", "v3", MetricName::DInf, Some(2.0)),
            record("c3", "v3", MetricName::DInf, Some(7.0)),
        ]);
        let cell = CellKey {
            metric: MetricName::DInf,
            ..d_ant_cell()
        };
        let stats = report.stats("v3", &cell).unwrap();
        // mean 10/3, sample std sqrt(((1-10/3)^2+(2-10/3)^2+(7-10/3)^2)/2)
        assert_eq!(stats.render(), "3.33\u{b1}3.21");
    }

    #[test]
    fn aggregation_is_permutation_invariant() {
        let mut records = vec![
            record("c1", "base", MetricName::DAnt, Some(0.125)),
            record("c2", "base", MetricName::DAnt, Some(7.5)),
            record("c3", "base", MetricName::DAnt, None),
            record("c4", "base", MetricName::DAnt, Some(2.25)),
        ];
        let forward = aggregate(records.clone());
        records.reverse();
        records.swap(0, 2);
        let shuffled = aggregate(records);
        assert_eq!(forward.aggregates, shuffled.aggregates);
    }

    #[test]
    fn removing_na_record_changes_only_counts() {
        let with_na = aggregate(vec![
            record("c1", "base", MetricName::DAnt, Some(1.0)),
            record("c2", "base", MetricName::DAnt, Some(5.0)),
            record("c3", "base", MetricName::DAnt, None),
        ]);
        let without = aggregate(vec![
            record("c1", "base", MetricName::DAnt, Some(1.0)),
            record("c2", "base", MetricName::DAnt, Some(5.0)),
        ]);
        let a = with_na.stats("base", &d_ant_cell()).unwrap();
        let b = without.stats("base", &d_ant_cell()).unwrap();
        assert_eq!(a.mean, b.mean);
        assert_eq!(a.std, b.std);
        assert_eq!(a.na_count, 1);
        assert_eq!(b.na_count, 0);
    }

    #[test]
    fn empty_records_make_empty_report() {
        let report = aggregate(Vec::new());
        assert!(report.aggregates.is_empty());
        assert!(report.records.is_empty());
    }

    #[test]
    fn ranking_orders_by_mean_with_direction() {
        let report = aggregate(vec![
            record("c1", "a", MetricName::DAnt, Some(5.0)),
            record("c1", "b", MetricName::DAnt, Some(4.0)),
        ]);
        let ranked = rank_variants(&report, &d_ant_cell(), Direction::LowerBetter).unwrap();
        assert_eq!(ranked, vec!["b".to_string(), "a".to_string()]);
        let ranked_up = rank_variants(&report, &d_ant_cell(), Direction::HigherBetter).unwrap();
        assert_eq!(ranked_up, vec!["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn ranking_puts_na_heavy_variants_last() {
        let report = aggregate(vec![
            record("c1", "a", MetricName::DAnt, Some(3.0)),
            record("c2", "a", MetricName::DAnt, None),
            record("c1", "b", MetricName::DAnt, Some(3.0)),
            record("c2", "b", MetricName::DAnt, Some(3.0)),
            record("c1", "c", MetricName::DAnt, None),
            record("c2", "c", MetricName::DAnt, None),
        ]);
        let ranked = rank_variants(&report, &d_ant_cell(), Direction::LowerBetter).unwrap();
        // Tied means: fewer NAs first; no mean at all: last.
        assert_eq!(
            ranked,
            vec!["b".to_string(), "a".to_string(), "c".to_string()]
        );
    }

    #[test]
    fn ranking_unknown_cell_is_an_error() {
        let report = aggregate(vec![record("c1", "a", MetricName::DAnt, Some(1.0))]);
        let missing = CellKey {
            strategy: StrategyKind::Line,
            method: Some(LocalisationMethod::VolumeBased),
            metric: MetricName::DeltaAlpha,
        };
        assert!(rank_variants(&report, &missing, Direction::LowerBetter).is_err());
    }

    #[test]
    fn divergence_detects_winner_changes() {
        let a = vec!["x".to_string(), "y".to_string()];
        let same = ranking_divergence(&a, &a).unwrap();
        assert!(!same.diverged);

        let b = vec!["y".to_string(), "x".to_string()];
        let diff = ranking_divergence(&a, &b).unwrap();
        assert!(diff.diverged);
        assert_eq!(diff.winner_a, "x");
        assert_eq!(diff.winner_b, "y");

        let other = vec!["x".to_string(), "z".to_string()];
        assert!(ranking_divergence(&a, &other).is_err());
    }

    #[test]
    fn tables_render_without_panicking_and_mark_best() {
        let mut records = Vec::new();
        for (case, v) in [("c1", 1.0), ("c2", 3.0)] {
            records.push(MetricRecord {
                case_id: case.into(),
                variant: "base".into(),
                strategy: StrategyKind::Line,
                method: None,
                metric: MetricName::Tpr,
                value: Some(v.min(1.0)),
            });
            for method in LocalisationMethod::ALL {
                records.push(MetricRecord {
                    case_id: case.into(),
                    variant: "base".into(),
                    strategy: StrategyKind::Line,
                    method: Some(method),
                    metric: MetricName::DAnt,
                    value: Some(v),
                });
            }
        }
        let report = aggregate(records);
        let text = render_tables(&report, "base");
        assert!(text.contains("variant: base"));
        assert!(text.contains("d_ant"));
        assert!(text.contains('*'));
    }
}
