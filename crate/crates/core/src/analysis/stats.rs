use serde::{Deserialize, Serialize};

use crate::log::SessionSummary;

/// Sample quantile by linear interpolation between order statistics:
/// with `h = (n - 1) p`, returns `x[⌊h⌋] + (h - ⌊h⌋)(x[⌊h⌋+1] - x[⌊h⌋])`.
/// This is the default method of R's `quantile` and `summary`.
///
/// `sorted` must be ascending and non-empty; `p` is clamped to [0, 1].
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DurationStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub mean: f64,
    pub q3: f64,
    pub max: f64,
}

impl DurationStats {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        Some(Self {
            min: v[0],
            q1: quantile(&v, 0.25),
            median: quantile(&v, 0.5),
            // summation error can push the mean a hair outside the range
            mean: mean.clamp(v[0], v[v.len() - 1]),
            q3: quantile(&v, 0.75),
            max: v[v.len() - 1],
        })
    }
}

/// One row of the attack-duration table. `stats` is `None` when the
/// instance has no sessions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurationSummary {
    pub instance: String,
    pub n: usize,
    pub stats: Option<DurationStats>,
}

fn of_instance<'a>(sessions: &'a [SessionSummary], instance: &'a str) -> impl Iterator<Item = &'a SessionSummary> {
    sessions.iter().filter(move |s| s.instance == instance)
}

pub fn duration_summary(sessions: &[SessionSummary], instance: &str) -> DurationSummary {
    let values: Vec<f64> = of_instance(sessions, instance).map(|s| s.duration_seconds).collect();
    DurationSummary { instance: instance.to_string(), n: values.len(), stats: DurationStats::from_values(&values) }
}

/// Labels of the interaction bins, lowest first.
pub const BIN_LABELS: [&str; 8] = ["[0,1]", "(1,15]", "(15,35]", "(35,50]", "(50,100]", "(100,200]", "(200,350]", "(350,700]"];
/// Inclusive upper edge of each bin.
pub const BIN_UPPER: [u64; 8] = [1, 15, 35, 50, 100, 200, 350, 700];
pub const OVERFLOW_LABEL: &str = ">700";

/// Bin index for a command count, or `None` past the last edge.
pub fn bin_index(count: u64) -> Option<usize> {
    BIN_UPPER.iter().position(|upper| count <= *upper)
}

pub fn round_to(x: f64, decimals: i32) -> f64 {
    let f = 10f64.powi(decimals);
    (x * f).round() / f
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionBins {
    pub instance: String,
    pub n: u64,
    pub totals: [u64; 8],
    pub overflow: u64,
    /// `100 * total / n` rounded to two decimals; zero when `n` is zero.
    pub percentages: [f64; 8],
    pub overflow_percentage: f64,
}

impl InteractionBins {
    pub fn from_counts(instance: &str, counts: impl IntoIterator<Item = u64>) -> Self {
        let mut totals = [0u64; 8];
        let mut overflow = 0;
        for c in counts {
            match bin_index(c) {
                Some(i) => totals[i] += 1,
                None => overflow += 1,
            }
        }
        Self::from_totals(instance, totals, overflow)
    }

    pub fn from_totals(instance: &str, totals: [u64; 8], overflow: u64) -> Self {
        let n = totals.iter().sum::<u64>() + overflow;
        let pct = |t: u64| if n == 0 { 0.0 } else { round_to(100.0 * t as f64 / n as f64, 2) };
        Self {
            instance: instance.to_string(),
            n,
            totals,
            overflow,
            percentages: totals.map(pct),
            overflow_percentage: pct(overflow),
        }
    }

    /// Unrounded percentages, overflow last.
    pub fn exact_percentages(&self) -> Vec<f64> {
        let n = self.n.max(1) as f64;
        self.totals.iter().chain(std::iter::once(&self.overflow)).map(|t| 100.0 * *t as f64 / n).collect()
    }
}

pub fn interaction_bins(sessions: &[SessionSummary], instance: &str) -> InteractionBins {
    InteractionBins::from_counts(instance, of_instance(sessions, instance).map(|s| s.command_count))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singleton() {
        let s = DurationStats::from_values(&[10.0]).unwrap();
        assert_eq!([s.min, s.q1, s.median, s.mean, s.q3, s.max], [10.0; 6]);
    }

    #[test]
    fn four_values() {
        let s = DurationStats::from_values(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!(s.median, 2.5);
        assert_eq!(s.mean, 2.5);
        assert_eq!(s.q1, 1.75);
        assert_eq!(s.q3, 3.25);
    }

    #[test]
    fn empty_is_marked() {
        let d = duration_summary(&[], "gamepot");
        assert_eq!(d.n, 0);
        assert!(d.stats.is_none());
    }

    #[test]
    fn bin_edges() {
        let b = InteractionBins::from_counts("x", [0, 1, 2, 15, 16]);
        assert_eq!(b.totals, [2, 2, 1, 0, 0, 0, 0, 0]);
        assert_eq!(bin_index(700), Some(7));
        assert_eq!(bin_index(701), None);
        let empty = InteractionBins::from_counts("x", []);
        assert_eq!(empty.totals, [0; 8]);
        assert_eq!(empty.percentages, [0.0; 8]);
    }

    #[test]
    fn table_two_rows() {
        let heliza = InteractionBins::from_totals("heliza", [15, 15, 10, 5, 6, 5, 9, 2], 0);
        assert_eq!(heliza.percentages, [22.39, 22.39, 14.93, 7.46, 8.96, 7.46, 13.43, 2.99]);
        let gamepot = InteractionBins::from_totals("gamepot", [1, 4, 3, 1, 3, 0, 2, 0], 0);
        assert_eq!(gamepot.percentages, [7.14, 28.57, 21.43, 7.14, 21.43, 0.0, 14.29, 0.0]);
        let control = InteractionBins::from_totals("control", [50, 28, 18, 19, 21, 10, 3, 0], 0);
        assert_eq!(control.n, 149);
        assert_eq!(control.percentages, [33.56, 18.79, 12.08, 12.75, 14.09, 6.71, 2.01, 0.0]);
    }
}
