use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::dataset::EvalRecord;
use super::EvalError;
use crate::model::ClarificationLabel;

/// Counts with `needed` as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        Self { tp, fp, fn_, tn }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn record(&mut self, gold: ClarificationLabel, predicted: ClarificationLabel) {
        use ClarificationLabel::*;
        match (gold, predicted) {
            (Needed, Needed) => self.tp += 1,
            (NotNeeded, Needed) => self.fp += 1,
            (Needed, NotNeeded) => self.fn_ += 1,
            (NotNeeded, NotNeeded) => self.tn += 1,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl ClassMetrics {
    /// Unrounded metrics for a class with the given counts; any zero
    /// denominator yields 0.
    pub fn from_counts(true_pos: u64, false_pos: u64, false_neg: u64) -> Self {
        ExactClass::from_counts(true_pos, false_pos, false_neg).map(Ratio::to_f64)
    }
}

/// Exact fraction with a positive denominator. Metrics are kept exact until
/// the final rounding so ties at the third decimal always break the same way.
#[derive(Debug, Clone, Copy)]
struct Ratio {
    num: i128,
    den: i128,
}

impl Ratio {
    const ZERO: Self = Self { num: 0, den: 1 };

    fn of(num: u64, den: u64) -> Self {
        if den == 0 {
            Self::ZERO
        } else {
            Self::new(i128::from(num), i128::from(den))
        }
    }

    fn new(num: i128, den: i128) -> Self {
        let g = gcd(num.unsigned_abs(), den.unsigned_abs()).max(1) as i128;
        Self {
            num: num / g,
            den: den / g,
        }
    }

    fn add(self, other: Self) -> Self {
        Self::new(self.num * other.den + other.num * self.den, self.den * other.den)
    }

    fn sub(self, other: Self) -> Self {
        self.add(Self {
            num: -other.num,
            den: other.den,
        })
    }

    fn halve(self) -> Self {
        Self::new(self.num, self.den * 2)
    }

    fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Half away from zero, to 3 decimals.
    fn round3(self) -> f64 {
        let magnitude = self.num.abs() * 1000;
        let thousandths = (2 * magnitude + self.den) / (2 * self.den);
        let value = thousandths as f64 / 1000.0;
        if self.num < 0 {
            -value
        } else {
            value
        }
    }
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

#[derive(Debug, Clone, Copy)]
struct ExactClass {
    precision: Ratio,
    recall: Ratio,
    f1: Ratio,
}

impl ExactClass {
    fn from_counts(true_pos: u64, false_pos: u64, false_neg: u64) -> Self {
        // 2PR/(P+R) simplifies to 2tp/(2tp+fp+fn), and is 0 whenever tp is.
        Self {
            precision: Ratio::of(true_pos, true_pos + false_pos),
            recall: Ratio::of(true_pos, true_pos + false_neg),
            f1: Ratio::of(2 * true_pos, 2 * true_pos + false_pos + false_neg),
        }
    }

    fn zip(self, other: Self, f: impl Fn(Ratio, Ratio) -> Ratio) -> Self {
        Self {
            precision: f(self.precision, other.precision),
            recall: f(self.recall, other.recall),
            f1: f(self.f1, other.f1),
        }
    }

    fn mean(a: Self, b: Self) -> Self {
        a.zip(b, |x, y| x.add(y).halve())
    }

    fn map(self, f: impl Fn(Ratio) -> f64) -> ClassMetrics {
        ClassMetrics {
            precision: f(self.precision),
            recall: f(self.recall),
            f1: f(self.f1),
        }
    }

    fn rounded(self) -> ClassMetrics {
        self.map(Ratio::round3)
    }
}

/// Rounds half away from zero to 3 decimals.
pub fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

/// Per-class and macro-averaged metrics, rounded to 3 decimals. The macro
/// average is taken over unrounded per-class values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub needed: ClassMetrics,
    pub not_needed: ClassMetrics,
    pub macro_avg: ClassMetrics,
    pub matrix: ConfusionMatrix,
}

#[derive(Debug, Clone, Copy)]
struct RawMetrics {
    needed: ExactClass,
    not_needed: ExactClass,
    macro_avg: ExactClass,
}

fn raw(matrix: &ConfusionMatrix) -> RawMetrics {
    let needed = ExactClass::from_counts(matrix.tp, matrix.fp, matrix.fn_);
    let not_needed = ExactClass::from_counts(matrix.tn, matrix.fn_, matrix.fp);
    RawMetrics {
        needed,
        not_needed,
        macro_avg: ExactClass::mean(needed, not_needed),
    }
}

impl MetricsReport {
    pub fn from_matrix(matrix: ConfusionMatrix) -> Result<Self, EvalError> {
        if matrix.total() == 0 {
            return Err(EvalError::NoRecords);
        }
        let r = raw(&matrix);
        Ok(Self {
            needed: r.needed.rounded(),
            not_needed: r.not_needed.rounded(),
            macro_avg: r.macro_avg.rounded(),
            matrix,
        })
    }
}

/// Scores predictions against gold labels. The id sets must match exactly.
pub fn compute_metrics(
    predictions: &BTreeMap<String, ClarificationLabel>,
    golds: &[EvalRecord],
) -> Result<MetricsReport, EvalError> {
    let gold_ids: BTreeSet<&str> = golds.iter().map(|r| r.id.as_str()).collect();
    let pred_ids: BTreeSet<&str> = predictions.keys().map(String::as_str).collect();
    if gold_ids != pred_ids {
        return Err(EvalError::IdMismatch {
            missing: gold_ids.difference(&pred_ids).map(|s| s.to_string()).collect(),
            extra: pred_ids.difference(&gold_ids).map(|s| s.to_string()).collect(),
        });
    }
    let mut matrix = ConfusionMatrix::default();
    for record in golds {
        matrix.record(record.gold_label, predictions[&record.id]);
    }
    MetricsReport::from_matrix(matrix)
}

/// Signed `a - b` differences, rounded to 3 decimals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaTable {
    pub needed: ClassMetrics,
    pub not_needed: ClassMetrics,
    pub macro_avg: ClassMetrics,
    pub macro_f1: f64,
}

/// Differences between two reports over datasets of the same size, computed
/// from unrounded metrics.
pub fn compare(a: &MetricsReport, b: &MetricsReport) -> Result<DeltaTable, EvalError> {
    if a.matrix.total() != b.matrix.total() {
        return Err(EvalError::DatasetMismatch(format!(
            "{} records vs {}",
            a.matrix.total(),
            b.matrix.total()
        )));
    }
    let (ra, rb) = (raw(&a.matrix), raw(&b.matrix));
    let diff = |x: ExactClass, y: ExactClass| x.zip(y, Ratio::sub).rounded();
    let macro_avg = diff(ra.macro_avg, rb.macro_avg);
    Ok(DeltaTable {
        needed: diff(ra.needed, rb.needed),
        not_needed: diff(ra.not_needed, rb.not_needed),
        macro_avg,
        macro_f1: macro_avg.f1,
    })
}
