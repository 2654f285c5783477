//! The eight change-detection metrics.

use serde::{Deserialize, Serialize};

/// True/false positive and negative pixel counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl Confusion {
    pub fn new(tp: u64, tn: u64, fp: u64, fn_: u64) -> Self {
        Confusion { tp, tn, fp, fn_ }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

impl std::ops::Add for Confusion {
    type Output = Confusion;

    fn add(self, o: Confusion) -> Confusion {
        Confusion {
            tp: self.tp + o.tp,
            tn: self.tn + o.tn,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
        }
    }
}

impl std::ops::AddAssign for Confusion {
    fn add_assign(&mut self, o: Confusion) {
        *self = *self + o;
    }
}

impl std::iter::Sum for Confusion {
    fn sum<I: Iterator<Item = Confusion>>(iter: I) -> Confusion {
        iter.fold(Confusion::default(), |a, b| a + b)
    }
}

/// Componentwise sum.
pub fn accumulate<'a>(parts: impl IntoIterator<Item = &'a Confusion>) -> Confusion {
    parts.into_iter().copied().sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    Re,
    Sp,
    Fpr,
    Fnr,
    Wcr,
    Ccr,
    Pr,
    F1,
}

/// Whether larger or smaller values rank first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    /// Larger is better; ranked in descending order.
    HigherIsBetter,
    /// Smaller is better; ranked in ascending order.
    LowerIsBetter,
}

impl Metric {
    pub const ALL: [Metric; 8] = [
        Metric::Re,
        Metric::Sp,
        Metric::Fpr,
        Metric::Fnr,
        Metric::Wcr,
        Metric::Ccr,
        Metric::Pr,
        Metric::F1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Re => "Re",
            Metric::Sp => "Sp",
            Metric::Fpr => "FPR",
            Metric::Fnr => "FNR",
            Metric::Wcr => "WCR",
            Metric::Ccr => "CCR",
            Metric::Pr => "Pr",
            Metric::F1 => "F1",
        }
    }

    pub fn from_name(name: &str) -> Option<Metric> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(name.trim()))
    }

    pub fn direction(self) -> Direction {
        match self {
            Metric::Fpr | Metric::Fnr | Metric::Wcr => Direction::LowerIsBetter,
            _ => Direction::HigherIsBetter,
        }
    }
}

/// The eight metrics. `None` marks an undefined value (zero denominator).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub re: Option<f64>,
    pub sp: Option<f64>,
    pub fpr: Option<f64>,
    pub fnr: Option<f64>,
    pub wcr: Option<f64>,
    pub ccr: Option<f64>,
    pub pr: Option<f64>,
    pub f1: Option<f64>,
}

impl MetricSet {
    pub fn get(&self, m: Metric) -> Option<f64> {
        match m {
            Metric::Re => self.re,
            Metric::Sp => self.sp,
            Metric::Fpr => self.fpr,
            Metric::Fnr => self.fnr,
            Metric::Wcr => self.wcr,
            Metric::Ccr => self.ccr,
            Metric::Pr => self.pr,
            Metric::F1 => self.f1,
        }
    }

    pub fn set(&mut self, m: Metric, v: Option<f64>) {
        let slot = match m {
            Metric::Re => &mut self.re,
            Metric::Sp => &mut self.sp,
            Metric::Fpr => &mut self.fpr,
            Metric::Fnr => &mut self.fnr,
            Metric::Wcr => &mut self.wcr,
            Metric::Ccr => &mut self.ccr,
            Metric::Pr => &mut self.pr,
            Metric::F1 => &mut self.f1,
        };
        *slot = v;
    }

    /// Per-metric mean over `sets`, skipping undefined entries. A metric
    /// undefined everywhere stays undefined.
    pub fn mean<'a>(sets: impl IntoIterator<Item = &'a MetricSet> + Clone) -> MetricSet {
        let mut out = MetricSet::default();
        for m in Metric::ALL {
            let (sum, n) = sets
                .clone()
                .into_iter()
                .filter_map(|s| s.get(m))
                .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
            out.set(m, (n > 0).then(|| sum / n as f64));
        }
        out
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den != 0).then(|| num as f64 / den as f64)
}

pub fn compute_metrics(c: &Confusion) -> MetricSet {
    let total = c.total();
    let re = ratio(c.tp, c.tp + c.fn_);
    let pr = ratio(c.tp, c.tp + c.fp);
    let f1 = match (pr, re) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        _ => None,
    };
    MetricSet {
        re,
        sp: ratio(c.tn, c.tn + c.fp),
        fpr: ratio(c.fp, c.fp + c.tn),
        fnr: ratio(c.fn_, c.fn_ + c.tp),
        wcr: ratio(c.fn_ + c.fp, total),
        ccr: ratio(c.tp + c.tn, total),
        pr,
        f1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: Option<f64>, b: f64) -> bool {
        a.is_some_and(|a| (a - b).abs() < 5e-5)
    }

    #[test]
    fn worked_example() {
        let m = compute_metrics(&Confusion::new(50, 900, 25, 25));
        assert!(close(m.re, 0.6667));
        assert!(close(m.sp, 0.9730));
        assert!(close(m.fpr, 0.0270));
        assert!(close(m.fnr, 0.3333));
        assert!(close(m.wcr, 0.05));
        assert!(close(m.ccr, 0.95));
        assert!(close(m.pr, 0.6667));
        assert!(close(m.f1, 0.6667));
    }

    #[test]
    fn perfect_prediction() {
        let m = compute_metrics(&Confusion::new(10, 90, 0, 0));
        for metric in [Metric::Re, Metric::Sp, Metric::Ccr, Metric::Pr, Metric::F1] {
            assert_eq!(m.get(metric), Some(1.0));
        }
        for metric in [Metric::Fpr, Metric::Fnr, Metric::Wcr] {
            assert_eq!(m.get(metric), Some(0.0));
        }
    }

    #[test]
    fn zero_denominators_are_undefined() {
        let m = compute_metrics(&Confusion::new(0, 10, 0, 5));
        assert_eq!(m.pr, None);
        assert_eq!(m.f1, None);
        assert_eq!(m.re, Some(0.0));
        assert_eq!(compute_metrics(&Confusion::default()), MetricSet::default());
    }

    #[test]
    fn accumulate_examples() {
        assert_eq!(accumulate(&[]), Confusion::default());
        let parts = [Confusion::new(1, 2, 3, 4), Confusion::new(1, 1, 1, 1)];
        assert_eq!(accumulate(&parts), Confusion::new(2, 3, 4, 5));
        assert_eq!(accumulate(&parts[..1]), parts[0]);
    }

    #[test]
    fn mean_skips_undefined() {
        let a = compute_metrics(&Confusion::new(0, 10, 0, 5));
        let b = compute_metrics(&Confusion::new(5, 10, 5, 0));
        let m = MetricSet::mean([&a, &b]);
        assert_eq!(m.pr, Some(0.5));
        assert_eq!(m.re, Some(0.5));
    }

    #[test]
    fn metric_names_round_trip() {
        for m in Metric::ALL {
            assert_eq!(Metric::from_name(m.name()), Some(m));
        }
        assert_eq!(Metric::from_name("fpr"), Some(Metric::Fpr));
        assert_eq!(Metric::from_name("R"), None);
    }

    proptest! {
        #[test]
        fn scaling_counts_keeps_metrics(tp in 0u64..1000, tn in 0u64..1000, fp in 0u64..1000, fn_ in 0u64..1000, k in 1u64..50) {
            let a = compute_metrics(&Confusion::new(tp, tn, fp, fn_));
            let b = compute_metrics(&Confusion::new(tp * k, tn * k, fp * k, fn_ * k));
            for m in Metric::ALL {
                match (a.get(m), b.get(m)) {
                    (Some(x), Some(y)) => prop_assert!((x - y).abs() < 1e-12),
                    (x, y) => prop_assert_eq!(x, y),
                }
            }
        }

        #[test]
        fn f1_bounds(tp in 1u64..1000, fp in 0u64..1000, fn_ in 0u64..1000) {
            let m = compute_metrics(&Confusion::new(tp, 0, fp, fn_));
            let (p, r, f) = (m.pr.unwrap(), m.re.unwrap(), m.f1.unwrap());
            prop_assert!(f <= (p + r) / 2.0 + 1e-12);
            prop_assert!(f >= p.min(r) - 1e-12 && f <= p.max(r) + 1e-12);
            if p == r {
                prop_assert!((f - p).abs() < 1e-12);
            }
        }
    }
}
