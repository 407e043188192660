//! Evaluation: top-1, many/medium/few group accuracies, ECE and MCE.

use crate::error::{Error, Result};

/// Group accuracies keyed by training-set class counts.
///
/// Groups follow the usual long-tail convention: many-shot for counts
/// above 100, medium-shot for 20..=100, few-shot below 20. Empty groups
/// are reported as `None` rather than zero.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupAccuracy {
    pub overall: f64,
    pub many: Option<f64>,
    pub medium: Option<f64>,
    pub few: Option<f64>,
    /// Instance counts per group: [many, medium, few].
    pub group_sizes: [usize; 3],
}

/// Full evaluation report.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub overall_acc: f64,
    pub many_acc: Option<f64>,
    pub med_acc: Option<f64>,
    pub few_acc: Option<f64>,
    pub ece: f64,
    pub mce: f64,
    pub group_sizes: [usize; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Group {
    Many,
    Medium,
    Few,
}

fn group_of(count: usize) -> Group {
    if count > 100 {
        Group::Many
    } else if count >= 20 {
        Group::Medium
    } else {
        Group::Few
    }
}

/// Per-group accuracy given training counts.
pub fn group_accuracy(
    pred_labels: &[usize],
    true_labels: &[usize],
    train_counts: &[usize],
) -> Result<GroupAccuracy> {
    if pred_labels.len() != true_labels.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} labels",
            pred_labels.len(),
            true_labels.len()
        )));
    }
    if pred_labels.is_empty() {
        return Err(Error::UndefinedMetric("accuracy of an empty sample".into()));
    }
    let c = train_counts.len();
    let mut totals = [0usize; 3];
    let mut correct = [0usize; 3];
    for (&pred, &truth) in pred_labels.iter().zip(true_labels) {
        if truth >= c {
            return Err(Error::LabelRange { label: truth, classes: c });
        }
        if pred >= c {
            return Err(Error::LabelRange { label: pred, classes: c });
        }
        let g = group_of(train_counts[truth]) as usize;
        totals[g] += 1;
        if pred == truth {
            correct[g] += 1;
        }
    }
    let acc = |g: usize| {
        if totals[g] == 0 {
            None
        } else {
            Some(correct[g] as f64 / totals[g] as f64)
        }
    };
    let overall = correct.iter().sum::<usize>() as f64 / pred_labels.len() as f64;
    Ok(GroupAccuracy {
        overall,
        many: acc(0),
        medium: acc(1),
        few: acc(2),
        group_sizes: totals,
    })
}

/// Expected and maximum calibration error over equal-width confidence bins
/// on (0, 1]. Confidence is the max predicted probability.
pub fn ece_mce(probs: &[f64], true_labels: &[usize], c: usize, num_bins: usize) -> Result<(f64, f64)> {
    let n = true_labels.len();
    if n == 0 {
        return Err(Error::UndefinedMetric("calibration of an empty sample".into()));
    }
    if num_bins == 0 {
        return Err(Error::UndefinedMetric("calibration with zero bins".into()));
    }
    if probs.len() != n * c {
        return Err(Error::Shape(format!("expected {n}x{c} probabilities, got {}", probs.len())));
    }

    let mut bin_count = vec![0usize; num_bins];
    let mut bin_conf = vec![0.0; num_bins];
    let mut bin_correct = vec![0usize; num_bins];
    for (i, &truth) in true_labels.iter().enumerate() {
        if truth >= c {
            return Err(Error::LabelRange { label: truth, classes: c });
        }
        let row = &probs[i * c..(i + 1) * c];
        let sum: f64 = row.iter().sum();
        if row.iter().any(|&p| !(0.0..=1.0 + 1e-9).contains(&p)) || (sum - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidTarget(format!("probability row {i} is not on the simplex")));
        }
        let (pred, conf) = row
            .iter()
            .copied()
            .enumerate()
            .fold((0usize, f64::NEG_INFINITY), |best, (y, p)| if p > best.1 { (y, p) } else { best });
        // Bins are (b/B, (b+1)/B]; ceil maps a confidence to its bin.
        let bin = ((conf * num_bins as f64).ceil() as usize).clamp(1, num_bins) - 1;
        bin_count[bin] += 1;
        bin_conf[bin] += conf;
        if pred == truth {
            bin_correct[bin] += 1;
        }
    }

    let mut ece = 0.0;
    let mut mce = 0.0f64;
    for b in 0..num_bins {
        if bin_count[b] == 0 {
            continue;
        }
        let conf = bin_conf[b] / bin_count[b] as f64;
        let acc = bin_correct[b] as f64 / bin_count[b] as f64;
        let gap = (acc - conf).abs();
        ece += bin_count[b] as f64 / n as f64 * gap;
        mce = mce.max(gap);
    }
    Ok((ece, mce))
}

/// Convenience: report from probability rows, true labels and train counts.
pub fn evaluate(
    probs: &[f64],
    true_labels: &[usize],
    train_counts: &[usize],
    num_bins: usize,
) -> Result<EvalReport> {
    let c = train_counts.len();
    let preds: Vec<usize> = true_labels
        .iter()
        .enumerate()
        .map(|(i, _)| {
            let row = &probs[i * c..(i + 1) * c];
            row.iter()
                .copied()
                .enumerate()
                .fold((0usize, f64::NEG_INFINITY), |best, (y, p)| if p > best.1 { (y, p) } else { best })
                .0
        })
        .collect();
    let groups = group_accuracy(&preds, true_labels, train_counts)?;
    let (ece, mce) = ece_mce(probs, true_labels, c, num_bins)?;
    Ok(EvalReport {
        overall_acc: groups.overall,
        many_acc: groups.many,
        med_acc: groups.medium,
        few_acc: groups.few,
        ece,
        mce,
        group_sizes: groups.group_sizes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn test_all_correct_every_group_perfect() {
        let counts = [150, 50, 5];
        let labels = [0usize, 1, 2, 0, 2];
        let report = group_accuracy(&labels, &labels, &counts).unwrap();
        assert_eq!(report.overall, 1.0);
        assert_eq!(report.many, Some(1.0));
        assert_eq!(report.medium, Some(1.0));
        assert_eq!(report.few, Some(1.0));
        assert_eq!(report.group_sizes, [2, 1, 2]);
    }

    #[test]
    fn test_single_group_when_counts_equal() {
        let counts = [500, 500];
        let preds = [0usize, 1, 1, 0];
        let truth = [0usize, 1, 0, 0];
        let report = group_accuracy(&preds, &truth, &counts).unwrap();
        assert_eq!(report.medium, None);
        assert_eq!(report.few, None);
        assert_eq!(report.many, Some(report.overall));
        assert_eq!(report.overall, 0.75);
    }

    #[test]
    fn test_many_vs_few_split() {
        let counts = [150, 10];
        // Correct only on class-0 samples.
        let truth = [0usize, 0, 1, 1];
        let preds = [0usize, 0, 0, 0];
        let report = group_accuracy(&preds, &truth, &counts).unwrap();
        assert_eq!(report.many, Some(1.0));
        assert_eq!(report.few, Some(0.0));
        assert_eq!(report.overall, 0.5);
    }

    #[test]
    fn test_group_boundaries() {
        assert_eq!(group_of(101), Group::Many);
        assert_eq!(group_of(100), Group::Medium);
        assert_eq!(group_of(20), Group::Medium);
        assert_eq!(group_of(19), Group::Few);
    }

    #[test]
    fn test_overall_matches_group_tally() {
        let counts = [300, 40, 3];
        let truth = [0usize, 0, 1, 1, 2, 2, 2];
        let preds = [0usize, 1, 1, 2, 2, 0, 2];
        let report = group_accuracy(&preds, &truth, &counts).unwrap();
        let weighted: f64 = [(report.many, 2.0), (report.medium, 2.0), (report.few, 3.0)]
            .iter()
            .map(|(acc, n)| acc.unwrap() * n)
            .sum::<f64>()
            / 7.0;
        assert!((report.overall - weighted).abs() < 1e-12);
    }

    #[test]
    fn test_unknown_label_rejected() {
        assert!(matches!(
            group_accuracy(&[0], &[5], &[10, 10]),
            Err(Error::LabelRange { label: 5, classes: 2 })
        ));
    }

    #[test]
    fn test_ece_perfect_confident_predictions() {
        let probs = [1.0, 0.0, 0.0, 1.0];
        let (ece, mce) = ece_mce(&probs, &[0, 1], 2, 15).unwrap();
        assert_eq!(ece, 0.0);
        assert_eq!(mce, 0.0);
    }

    #[test]
    fn test_ece_single_wrong_sample() {
        let probs = [0.9, 0.1];
        let (ece, mce) = ece_mce(&probs, &[1], 2, 15).unwrap();
        assert!((ece - 0.9).abs() < 1e-12);
        assert!((mce - 0.9).abs() < 1e-12);
    }

    #[test]
    fn test_ece_never_exceeds_mce() {
        let probs = [
            0.6, 0.4, //
            0.8, 0.2, //
            0.55, 0.45, //
            0.95, 0.05,
        ];
        let truth = [0usize, 1, 0, 0];
        let (ece, mce) = ece_mce(&probs, &truth, 2, 15).unwrap();
        assert!(ece <= mce + 1e-15);
        assert!((0.0..=1.0).contains(&ece));
    }

    #[test]
    fn test_ece_empty_input_is_error() {
        assert!(matches!(
            ece_mce(&[], &[], 2, 15),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn test_ece_permutation_invariant() {
        let probs = [0.6, 0.4, 0.8, 0.2, 0.3, 0.7];
        let truth = [0usize, 1, 1];
        let (e1, m1) = ece_mce(&probs, &truth, 2, 15).unwrap();
        let permuted = [0.3, 0.7, 0.6, 0.4, 0.8, 0.2];
        let truth_p = [1usize, 0, 1];
        let (e2, m2) = ece_mce(&permuted, &truth_p, 2, 15).unwrap();
        assert!((e1 - e2).abs() < 1e-15);
        assert!((m1 - m2).abs() < 1e-15);
    }
}
