//! Confusion counting, presumption-rate adjustment, chance-corrected agreement,
//! accuracy comparison and Bland–Altman limits.
//!
//! All functions here are pure. Degenerate ratios (zero denominators) are
//! reported as `0.0` together with a flag instead of an error, so a batch
//! evaluation over many criteria never aborts half way.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no paper has both a gold label and a verdict")]
    EmptyEvaluation,
    #[error("dimension mismatch: {left} vs {right}")]
    Dimension { left: usize, right: usize },
    #[error("at least {needed} observations required, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("proportion {0} is outside [0, 1]")]
    Proportion(f64),
    #[error("sample size must be at least 1")]
    SampleSize,
    #[error("zero standard error with unequal proportions {p1} and {p2}")]
    DegenerateVariance { p1: f64, p2: f64 },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Tally `(truth, prediction)` pairs.
    pub fn from_pairs<I: IntoIterator<Item = (bool, bool)>>(pairs: I) -> Self {
        let mut c = Self::default();
        for (truth, pred) in pairs {
            match (truth, pred) {
                (true, true) => c.tp += 1,
                (false, true) => c.fp += 1,
                (true, false) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        c
    }
}

/// Confusion counts plus the papers that could not be counted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub counts: ConfusionCounts,
    /// Papers with a gold label but no verdict.
    pub missing_verdict: Vec<String>,
    /// Papers with a verdict but no gold label (excluded or uncurated).
    pub missing_gold: Vec<String>,
}

/// Counts agreement between gold labels and one tool's verdicts, keyed by
/// paper id. Only papers present in both maps are counted.
pub fn confusion_counts(
    gold: &BTreeMap<String, bool>,
    verdicts: &BTreeMap<String, bool>,
) -> Result<Tally, MetricsError> {
    let mut missing_verdict = Vec::new();
    let mut pairs = Vec::new();
    for (paper, &truth) in gold {
        match verdicts.get(paper) {
            Some(&pred) => pairs.push((truth, pred)),
            None => missing_verdict.push(paper.clone()),
        }
    }
    if pairs.is_empty() {
        return Err(MetricsError::EmptyEvaluation);
    }
    let missing_gold = verdicts
        .keys()
        .filter(|p| !gold.contains_key(*p))
        .cloned()
        .collect();
    Ok(Tally {
        counts: ConfusionCounts::from_pairs(pairs),
        missing_verdict,
        missing_gold,
    })
}

/// Presumed positive / negative rates estimated from the curated control set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimates {
    pub ppr: f64,
    pub pnr: f64,
    pub n_pos_checked: u64,
    pub n_neg_checked: u64,
    pub n_pos_confirmed: u64,
    pub n_neg_confirmed: u64,
    /// No presumed-positive control was checked; `ppr` defaulted to 1.
    pub ppr_undefined: bool,
    /// No presumed-negative control was checked; `pnr` defaulted to 1.
    pub pnr_undefined: bool,
}

impl RateEstimates {
    /// Rates of 1.0, leaving counts unadjusted.
    pub fn identity() -> Self {
        Self::from_counts(0, 0, 0, 0)
    }

    pub fn from_counts(
        n_pos_checked: u64,
        n_pos_confirmed: u64,
        n_neg_checked: u64,
        n_neg_confirmed: u64,
    ) -> Self {
        let ratio = |num: u64, den: u64| {
            if den == 0 {
                (1.0, true)
            } else {
                (num as f64 / den as f64, false)
            }
        };
        let (ppr, ppr_undefined) = ratio(n_pos_confirmed, n_pos_checked);
        let (pnr, pnr_undefined) = ratio(n_neg_confirmed, n_neg_checked);
        Self {
            ppr,
            pnr,
            n_pos_checked,
            n_neg_checked,
            n_pos_confirmed,
            n_neg_confirmed,
            ppr_undefined,
            pnr_undefined,
        }
    }
}

/// One curated control paper: the stratum it was drawn from and whether the
/// curator confirmed the unanimous tool verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ControlOutcome {
    pub presumed_positive: bool,
    pub confirmed: bool,
}

/// PPR is the share of presumed positives the curator confirmed as present,
/// PNR the share of presumed negatives confirmed as absent.
pub fn estimate_rates<I: IntoIterator<Item = ControlOutcome>>(controls: I) -> RateEstimates {
    let (mut pos, mut pos_ok, mut neg, mut neg_ok) = (0, 0, 0, 0);
    for c in controls {
        if c.presumed_positive {
            pos += 1;
            pos_ok += u64::from(c.confirmed);
        } else {
            neg += 1;
            neg_ok += u64::from(c.confirmed);
        }
    }
    RateEstimates::from_counts(pos, pos_ok, neg, neg_ok)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreFlags {
    pub accuracy_undefined: bool,
    pub precision_undefined: bool,
    pub recall_undefined: bool,
    pub f1_undefined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjustedEvaluation {
    pub raw: ConfusionCounts,
    pub rates: RateEstimates,
    pub adj_tp: f64,
    pub adj_fp: f64,
    pub adj_fn: f64,
    pub adj_tn: f64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub flags: ScoreFlags,
}

/// Deflates the raw counts by the presumption rates and derives the four
/// scores from the adjusted counts.
///
/// Positives in truth (TP, FN) are scaled by PPR, negatives in truth (FP, TN)
/// by PNR.
pub fn adjusted_scores(raw: ConfusionCounts, rates: RateEstimates) -> AdjustedEvaluation {
    let adj_tp = raw.tp as f64 * rates.ppr;
    let adj_fp = raw.fp as f64 * rates.pnr;
    let adj_fn = raw.fn_ as f64 * rates.ppr;
    let adj_tn = raw.tn as f64 * rates.pnr;

    let mut flags = ScoreFlags::default();
    let ratio = |num: f64, den: f64, flag: &mut bool| {
        if den > 0.0 {
            num / den
        } else {
            *flag = true;
            0.0
        }
    };
    let accuracy = ratio(
        adj_tp + adj_tn,
        adj_tp + adj_tn + adj_fp + adj_fn,
        &mut flags.accuracy_undefined,
    );
    let precision = ratio(adj_tp, adj_tp + adj_fp, &mut flags.precision_undefined);
    let recall = ratio(adj_tp, adj_tp + adj_fn, &mut flags.recall_undefined);
    let f1 = if precision > 0.0 && recall > 0.0 {
        2.0 / (1.0 / precision + 1.0 / recall)
    } else {
        flags.f1_undefined = true;
        0.0
    };

    AdjustedEvaluation {
        raw,
        rates,
        adj_tp,
        adj_fp,
        adj_fn,
        adj_tn,
        accuracy,
        precision,
        recall,
        f1,
        flags,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgreementResult {
    pub pa: f64,
    pub pe: f64,
    pub ac1: f64,
}

/// Gwet's AC1 for two raters over two categories.
pub fn gwet_ac1(r1: &[bool], r2: &[bool]) -> Result<AgreementResult, MetricsError> {
    if r1.len() != r2.len() {
        return Err(MetricsError::Dimension {
            left: r1.len(),
            right: r2.len(),
        });
    }
    if r1.is_empty() {
        return Err(MetricsError::InsufficientData { needed: 1, got: 0 });
    }
    let n = r1.len() as f64;
    let agree = r1.iter().zip(r2).filter(|(a, b)| a == b).count() as f64;
    let pos = r1.iter().chain(r2).filter(|x| **x).count() as f64;
    let pa = agree / n;
    let pi = pos / (2.0 * n);
    // pe = 2π(1−π) never exceeds 0.5
    let pe = 2.0 * pi * (1.0 - pi);
    let ac1 = (pa - pe) / (1.0 - pe);
    Ok(AgreementResult { pa, pe, ac1 })
}

/// Outcome of the two-tailed comparison of two accuracies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProportionTest {
    pub statistic: f64,
    pub p_value: f64,
}

/// Two-tailed test of `p1 == p2` with variances from the sample proportions.
///
/// The statistic is referred to the standard normal distribution (z-test
/// form). Equal proportions always give statistic 0 and p = 1, even when both
/// variances vanish.
pub fn compare_accuracies(
    p1: f64,
    n1: u64,
    p2: f64,
    n2: u64,
) -> Result<ProportionTest, MetricsError> {
    for p in [p1, p2] {
        if !(0.0..=1.0).contains(&p) {
            return Err(MetricsError::Proportion(p));
        }
    }
    if n1 == 0 || n2 == 0 {
        return Err(MetricsError::SampleSize);
    }
    if p1 == p2 {
        return Ok(ProportionTest {
            statistic: 0.0,
            p_value: 1.0,
        });
    }
    let se = (p1 * (1.0 - p1) / n1 as f64 + p2 * (1.0 - p2) / n2 as f64).sqrt();
    if se == 0.0 {
        return Err(MetricsError::DegenerateVariance { p1, p2 });
    }
    let statistic = (p1 - p2) / se;
    let p_value = erfc(statistic.abs() / std::f64::consts::SQRT_2);
    Ok(ProportionTest { statistic, p_value })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlandAltmanPoint {
    pub mean: f64,
    pub diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlandAltman {
    pub mean_diff: f64,
    /// Sample (n − 1) standard deviation of the differences.
    pub sd_diff: f64,
    pub loa_low: f64,
    pub loa_high: f64,
    pub points: Vec<BlandAltmanPoint>,
}

impl BlandAltman {
    /// Points as `mean,diff` CSV followed by a limits row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("mean,diff\n");
        for p in &self.points {
            out.push_str(&format!("{},{}\n", p.mean, p.diff));
        }
        out.push_str(&format!(
            "# limits,mean_diff={},loa_low={},loa_high={}\n",
            self.mean_diff, self.loa_low, self.loa_high
        ));
        out
    }
}

pub const LOA_Z: f64 = 1.96;

/// Bland–Altman statistics for paired measurements, differences taken `a − b`.
pub fn bland_altman(pairs: &[(f64, f64)]) -> Result<BlandAltman, MetricsError> {
    if pairs.len() < 2 {
        return Err(MetricsError::InsufficientData {
            needed: 2,
            got: pairs.len(),
        });
    }
    let n = pairs.len() as f64;
    let diffs: Vec<f64> = pairs.iter().map(|(a, b)| a - b).collect();
    let mean_diff = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean_diff).powi(2)).sum::<f64>() / (n - 1.0);
    let sd_diff = var.sqrt();
    let points = pairs
        .iter()
        .map(|(a, b)| BlandAltmanPoint {
            mean: (a + b) / 2.0,
            diff: a - b,
        })
        .collect();
    Ok(BlandAltman {
        mean_diff,
        sd_diff,
        loa_low: mean_diff - LOA_Z * sd_diff,
        loa_high: mean_diff + LOA_Z * sd_diff,
        points,
    })
}

/// Pairwise AC1 between named raters, computed over the papers both rated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementMatrix {
    pub raters: Vec<String>,
    /// Upper triangle including the diagonal; `None` below the diagonal or
    /// where two raters share no paper.
    pub values: Vec<Vec<Option<f64>>>,
}

impl AgreementMatrix {
    /// `ratings[i]` maps paper id to rater `i`'s call.
    pub fn compute(raters: &[String], ratings: &[BTreeMap<String, bool>]) -> Self {
        let k = raters.len();
        let mut values = vec![vec![None; k]; k];
        for i in 0..k {
            for j in i..k {
                let (a, b): (Vec<bool>, Vec<bool>) = ratings[i]
                    .iter()
                    .filter_map(|(p, &x)| ratings[j].get(p).map(|&y| (x, y)))
                    .unzip();
                values[i][j] = gwet_ac1(&a, &b).ok().map(|r| r.ac1);
            }
        }
        Self {
            raters: raters.to_vec(),
            values,
        }
    }

    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.raters.iter().position(|r| r == a)?;
        let j = self.raters.iter().position(|r| r == b)?;
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        self.values[i][j]
    }

    /// CSV with rater ids as header row and first column.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rater");
        for r in &self.raters {
            out.push(',');
            out.push_str(r);
        }
        out.push('\n');
        for (i, r) in self.raters.iter().enumerate() {
            out.push_str(r);
            for v in &self.values[i] {
                out.push(',');
                if let Some(v) = v {
                    out.push_str(&format!("{v:.4}"));
                }
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn confusion_definition() {
        let c = ConfusionCounts::from_pairs([(true, true), (true, false), (false, true), (false, false)]);
        assert_eq!(c, ConfusionCounts { tp: 1, fp: 1, fn_: 1, tn: 1 });
    }

    #[test]
    fn confusion_by_paper_reports_gaps() {
        let gold: BTreeMap<_, _> = [("P1", true), ("P2", false), ("P3", true)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        let verdicts: BTreeMap<_, _> = [("P1", true), ("P2", false), ("P4", true)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        let t = confusion_counts(&gold, &verdicts).unwrap();
        assert_eq!(t.counts, ConfusionCounts { tp: 1, fp: 0, fn_: 0, tn: 1 });
        assert_eq!(t.missing_verdict, vec!["P3"]);
        assert_eq!(t.missing_gold, vec!["P4"]);
        assert_eq!(
            confusion_counts(&gold, &BTreeMap::new()),
            Err(MetricsError::EmptyEvaluation)
        );
    }

    #[test]
    fn rates_from_controls() {
        let r = RateEstimates::from_counts(50, 45, 50, 50);
        assert!(close(r.ppr, 0.90, 1e-15));
        assert_eq!(r.pnr, 1.0);
        let r = RateEstimates::from_counts(0, 0, 100, 97);
        assert_eq!(r.ppr, 1.0);
        assert!(r.ppr_undefined);
        assert!(close(r.pnr, 0.97, 1e-15));
        assert!(!r.pnr_undefined);
    }

    #[test]
    fn estimate_rates_counts_strata() {
        let controls = (0..50)
            .map(|i| ControlOutcome { presumed_positive: true, confirmed: i < 45 })
            .chain((0..50).map(|_| ControlOutcome { presumed_positive: false, confirmed: true }));
        let r = estimate_rates(controls);
        assert_eq!((r.n_pos_checked, r.n_pos_confirmed), (50, 45));
        assert!(close(r.ppr, 0.9, 1e-15));
        assert_eq!(r.pnr, 1.0);
    }

    #[test]
    fn worked_adjustment_example() {
        let raw = ConfusionCounts { tp: 10, fp: 4, fn_: 2, tn: 84 };
        let rates = RateEstimates::from_counts(100, 90, 100, 95);
        let e = adjusted_scores(raw, rates);
        assert!(close(e.adj_tp, 9.0, 1e-12));
        assert!(close(e.adj_fp, 3.8, 1e-12));
        assert!(close(e.adj_fn, 1.8, 1e-12));
        assert!(close(e.adj_tn, 79.8, 1e-12));
        assert!(close(e.precision, 0.7031, 1e-4));
        assert!(close(e.recall, 0.8333, 1e-4));
        assert!(close(e.f1, 0.7627, 1e-4));
        assert!(close(e.accuracy, 0.9407, 1e-4));
    }

    #[test]
    fn identity_rates_leave_scores_unadjusted() {
        let raw = ConfusionCounts { tp: 7, fp: 3, fn_: 5, tn: 11 };
        let e = adjusted_scores(raw, RateEstimates::identity());
        assert_eq!(e.adj_tp, 7.0);
        assert!(close(e.precision, 0.7, 1e-15));
        assert!(close(e.recall, 7.0 / 12.0, 1e-15));
    }

    #[test]
    fn degenerate_scores_are_flagged() {
        let e = adjusted_scores(ConfusionCounts { tp: 0, fp: 0, fn_: 3, tn: 5 }, RateEstimates::identity());
        assert_eq!(e.precision, 0.0);
        assert_eq!(e.recall, 0.0);
        assert_eq!(e.f1, 0.0);
        assert!(e.flags.precision_undefined && e.flags.f1_undefined);
        assert!(!e.flags.recall_undefined);
    }

    #[test]
    fn ac1_cases() {
        let r = gwet_ac1(&[true, true, false, false], &[true, true, false, false]).unwrap();
        assert_eq!((r.pa, r.pe, r.ac1), (1.0, 0.5, 1.0));
        let r = gwet_ac1(&[true, true, true, false], &[true, true, false, false]).unwrap();
        assert!(close(r.pa, 0.75, 1e-15));
        assert!(close(r.pe, 0.46875, 1e-15));
        assert!(close(r.ac1, 0.529_411_764_7, 1e-9));
        assert!(matches!(gwet_ac1(&[true], &[]), Err(MetricsError::Dimension { .. })));
    }

    #[test]
    fn proportion_test_cases() {
        let t = compare_accuracies(0.9, 10, 0.9, 20).unwrap();
        assert_eq!((t.statistic, t.p_value), (0.0, 1.0));
        let t = compare_accuracies(1.0, 5, 1.0, 5).unwrap();
        assert_eq!((t.statistic, t.p_value), (0.0, 1.0));
        let t = compare_accuracies(0.96, 1500, 0.91, 1500).unwrap();
        assert!(close(t.statistic, 5.583, 1e-3), "{}", t.statistic);
        assert!(t.p_value < 1e-7 && t.p_value > 1e-9, "{}", t.p_value);
        assert!(matches!(
            compare_accuracies(1.0, 5, 0.0, 5),
            Err(MetricsError::DegenerateVariance { .. })
        ));
        assert!(compare_accuracies(1.2, 5, 0.0, 5).is_err());
    }

    #[test]
    fn bland_altman_cases() {
        let ba = bland_altman(&[(5.0, 5.0), (3.0, 5.0), (7.0, 5.0)]).unwrap();
        assert!(close(ba.mean_diff, 0.0, 1e-12));
        assert!(close(ba.sd_diff, 2.0, 1e-12));
        assert!(close(ba.loa_low, -3.92, 1e-12));
        assert!(close(ba.loa_high, 3.92, 1e-12));
        let ba = bland_altman(&[(4.0, 4.0), (9.0, 9.0)]).unwrap();
        assert_eq!((ba.mean_diff, ba.loa_low, ba.loa_high), (0.0, 0.0, 0.0));
        assert!(bland_altman(&[(1.0, 2.0)]).is_err());
    }

    #[test]
    fn agreement_matrix_upper_triangle() {
        let a: BTreeMap<String, bool> = [("P1", true), ("P2", false)].map(|(k, v)| (k.into(), v)).into();
        let b: BTreeMap<String, bool> = [("P1", true), ("P2", false)].map(|(k, v)| (k.into(), v)).into();
        let m = AgreementMatrix::compute(&["A".into(), "B".into()], &[a, b]);
        assert_eq!(m.values[0][1], Some(1.0));
        assert_eq!(m.values[1][0], None);
        assert_eq!(m.get("B", "A"), Some(1.0));
        assert!(m.to_csv().starts_with("rater,A,B\nA,1.0000,1.0000\nB,,1.0000"));
    }
}
