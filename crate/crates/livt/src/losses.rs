//! Balanced loss family: CE, Bal-CE, BCE, Bal-BCE, NT-BCE, and their
//! per-class logit biases, with analytic gradients.
//!
//! All losses reduce by arithmetic mean over the batch and report the
//! gradient of that mean with respect to the logits. Log-probabilities go
//! through softplus identities (`log sigmoid(x) = -softplus(-x)`,
//! `log(1 - sigmoid(x)) = -softplus(x)`) so values stay finite for logits
//! far into either tail.

use crate::error::{Error, Result};
use crate::priors::ClassPrior;

/// Numerically stable log(1 + e^x).
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BiasKind {
    Ce,
    Bce,
    BceTestPrior,
}

/// Per-class additive logit corrections.
///
/// `tau` scales the whole vector when the bias is applied to logits;
/// the effective correction for class y is `tau * values[y]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitBias {
    pub values: Vec<f64>,
    pub kind: BiasKind,
    pub tau: f64,
}

impl LogitBias {
    pub fn num_classes(&self) -> usize {
        self.values.len()
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    fn effective(&self, class: usize) -> f64 {
        self.tau * self.values[class]
    }
}

/// Bias for balanced softmax cross-entropy: B_y = log pi_y.
pub fn bias_ce(prior: &ClassPrior) -> LogitBias {
    LogitBias {
        values: prior.freqs().iter().map(|&p| p.ln()).collect(),
        kind: BiasKind::Ce,
        tau: 1.0,
    }
}

/// Bias for balanced sigmoid BCE: B_y = log pi_y - log(1 - pi_y) + log(C - 1).
///
/// Computed on integer counts as log(n_y * (C-1)) - log(N - n_y), the same
/// quantity with exact cancellation: uniform priors give bitwise zeros, so
/// the uniform reduction Bal-BCE = BCE holds exactly.
pub fn bias_bce(prior: &ClassPrior) -> Result<LogitBias> {
    let c = prior.num_classes();
    if c < 2 {
        return Err(Error::DegenerateClass);
    }
    let total = prior.total();
    let mut values = Vec::with_capacity(c);
    for (y, &n) in prior.counts().iter().enumerate() {
        if n >= total {
            return Err(Error::InfiniteBias { class: y });
        }
        values.push(((n * (c - 1)) as f64).ln() - ((total - n) as f64).ln());
    }
    Ok(LogitBias { values, kind: BiasKind::Bce, tau: 1.0 })
}

/// BCE bias for an arbitrary test prior:
/// B_y = (log pi^s_y - log pi^t_y) - (log(1 - pi^s_y) - log(1 - pi^t_y)).
///
/// Reduces to [`bias_bce`] when the test prior is uniform and to zero when
/// the priors coincide.
pub fn bias_bce_with_test_prior(prior_s: &ClassPrior, prior_t: &ClassPrior) -> Result<LogitBias> {
    let c = prior_s.num_classes();
    if prior_t.num_classes() != c {
        return Err(Error::Shape(format!(
            "train prior has {c} classes, test prior has {}",
            prior_t.num_classes()
        )));
    }
    if c < 2 {
        return Err(Error::DegenerateClass);
    }
    // A uniform test prior is the log(C-1) form; delegating makes the
    // reduction exact rather than equal up to rounding.
    if prior_t.counts().iter().all(|&n| n == prior_t.counts()[0]) {
        let mut bias = bias_bce(prior_s)?;
        bias.kind = BiasKind::BceTestPrior;
        return Ok(bias);
    }
    let (ns, nt) = (prior_s.total(), prior_t.total());
    let mut values = Vec::with_capacity(c);
    for y in 0..c {
        let s = prior_s.counts()[y];
        let t = prior_t.counts()[y];
        if s >= ns || t >= nt {
            return Err(Error::InfiniteBias { class: y });
        }
        // The totals cancel between the positive and negative terms:
        // B = log n^s - log n^t - log(N^s - n^s) + log(N^t - n^t).
        values.push(
            (s as f64).ln() - (t as f64).ln() - ((ns - s) as f64).ln() + ((nt - t) as f64).ln(),
        );
    }
    Ok(LogitBias { values, kind: BiasKind::BceTestPrior, tau: 1.0 })
}

/// Mean loss over the batch plus its gradient with respect to the logits.
#[derive(Debug, Clone)]
pub struct LossOutput {
    pub value: f64,
    /// batch x C, d(value)/d(z).
    pub grad: Vec<f64>,
}

/// Per-class weights, NT-BCE strength, and optional logit bias.
#[derive(Debug, Clone, Default)]
pub struct LossConfig {
    /// None means all ones.
    pub weights: Option<Vec<f64>>,
    pub bias: Option<LogitBias>,
}

impl LossConfig {
    pub fn with_bias(bias: LogitBias) -> Self {
        LossConfig { weights: None, bias: Some(bias) }
    }

    fn weight(&self, class: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[class])
    }

    fn validate(&self, c: usize) -> Result<()> {
        if let Some(w) = &self.weights {
            if w.len() != c {
                return Err(Error::Shape(format!("{} weights for {c} classes", w.len())));
            }
            for (class, &weight) in w.iter().enumerate() {
                if !(weight >= 0.0) || !weight.is_finite() {
                    return Err(Error::InvalidWeight { class, weight });
                }
            }
        }
        if let Some(b) = &self.bias {
            if b.num_classes() != c {
                return Err(Error::Shape(format!("bias has {} classes, logits {c}", b.num_classes())));
            }
        }
        Ok(())
    }
}

fn check_dims(logits: &[f64], targets: &[f64], batch: usize, c: usize) -> Result<()> {
    if batch == 0 || c == 0 {
        return Err(Error::Shape("empty batch or class dimension".into()));
    }
    if logits.len() != batch * c || targets.len() != batch * c {
        return Err(Error::Shape(format!(
            "expected {batch}x{c} logits and targets, got {} and {}",
            logits.len(),
            targets.len()
        )));
    }
    Ok(())
}

/// Softmax cross-entropy with soft targets; a bias turns it into the
/// balanced variant.
///
/// value = mean_i of -sum_y t_iy log softmax(z_i + tau*B)_y,
/// grad_i = (softmax(z_i + tau*B) - t_i) / batch.
pub fn ce_loss_and_grad(
    logits: &[f64],
    targets: &[f64],
    batch: usize,
    c: usize,
    bias: Option<&LogitBias>,
) -> Result<LossOutput> {
    check_dims(logits, targets, batch, c)?;
    let mut bias = bias;
    if let Some(b) = bias {
        if b.num_classes() != c {
            return Err(Error::Shape(format!("bias has {} classes, logits {c}", b.num_classes())));
        }
        // Softmax is shift invariant; dropping a constant bias vector makes
        // the uniform-prior reduction to plain CE exact.
        if b.values.iter().all(|&v| v == b.values[0]) {
            bias = None;
        }
    }
    for i in 0..batch {
        let row = &targets[i * c..(i + 1) * c];
        let sum: f64 = row.iter().sum();
        if row.iter().any(|&t| !(0.0..=1.0).contains(&t)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidTarget(format!("target row {i} is not on the simplex")));
        }
    }

    let inv_batch = 1.0 / batch as f64;
    let mut value = 0.0;
    let mut grad = vec![0.0; batch * c];
    let mut adjusted = vec![0.0; c];
    for i in 0..batch {
        for y in 0..c {
            adjusted[y] = logits[i * c + y] + bias.map_or(0.0, |b| b.effective(y));
        }
        let max = adjusted.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_sum = adjusted.iter().map(|&a| (a - max).exp()).sum::<f64>().ln() + max;
        for y in 0..c {
            let log_p = adjusted[y] - log_sum;
            value -= targets[i * c + y] * log_p * inv_batch;
            grad[i * c + y] = (log_p.exp() - targets[i * c + y]) * inv_batch;
        }
    }
    Ok(LossOutput { value, grad })
}

/// Sigmoid binary cross-entropy over all classes; a bias in the config
/// turns it into the balanced variant.
///
/// value = mean_i of sum_y w_y [softplus(a_iy) - t_iy * a_iy] where
/// a = z + tau*B, grad_iy = w_y (sigmoid(a_iy) - t_iy) / batch.
pub fn bce_loss_and_grad(
    logits: &[f64],
    targets: &[f64],
    batch: usize,
    c: usize,
    config: &LossConfig,
) -> Result<LossOutput> {
    check_dims(logits, targets, batch, c)?;
    config.validate(c)?;
    if let Some(&t) = targets.iter().find(|&&t| !(0.0..=1.0).contains(&t)) {
        return Err(Error::InvalidTarget(format!("target {t} outside [0, 1]")));
    }

    let inv_batch = 1.0 / batch as f64;
    let mut value = 0.0;
    let mut grad = vec![0.0; batch * c];
    for i in 0..batch {
        for y in 0..c {
            let a = logits[i * c + y] + config.bias.as_ref().map_or(0.0, |b| b.effective(y));
            let t = targets[i * c + y];
            let w = config.weight(y);
            value += w * (t * softplus(-a) + (1.0 - t) * softplus(a)) * inv_batch;
            grad[i * c + y] = w * (sigmoid(a) - t) * inv_batch;
        }
    }
    Ok(LossOutput { value, grad })
}

/// Negative-tolerant BCE with hard targets.
///
/// Positive term -log sigmoid(a), negative term
/// -(1/lambda) log(1 - sigmoid(lambda * a)), a = z + tau*B. Gradients:
/// sigmoid(a) - 1 on the positive class, sigmoid(lambda * a) elsewhere.
pub fn ntbce_loss_and_grad(
    logits: &[f64],
    targets: &[f64],
    batch: usize,
    c: usize,
    lambda: f64,
    bias: Option<&LogitBias>,
) -> Result<LossOutput> {
    check_dims(logits, targets, batch, c)?;
    if !(lambda >= 1.0) || !lambda.is_finite() {
        return Err(Error::InvalidLambda { lambda });
    }
    if let Some(b) = bias {
        if b.num_classes() != c {
            return Err(Error::Shape(format!("bias has {} classes, logits {c}", b.num_classes())));
        }
    }
    for i in 0..batch {
        let row = &targets[i * c..(i + 1) * c];
        let ones = row.iter().filter(|&&t| t == 1.0).count();
        if ones != 1 || row.iter().any(|&t| t != 0.0 && t != 1.0) {
            return Err(Error::InvalidTarget(format!("target row {i} is not one-hot")));
        }
    }

    let inv_batch = 1.0 / batch as f64;
    let mut value = 0.0;
    let mut grad = vec![0.0; batch * c];
    for i in 0..batch {
        for y in 0..c {
            let a = logits[i * c + y] + bias.map_or(0.0, |b| b.effective(y));
            if targets[i * c + y] == 1.0 {
                value += softplus(-a) * inv_batch;
                grad[i * c + y] = (sigmoid(a) - 1.0) * inv_batch;
            } else {
                value += softplus(lambda * a) / lambda * inv_batch;
                grad[i * c + y] = sigmoid(lambda * a) * inv_batch;
            }
        }
    }
    Ok(LossOutput { value, grad })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::priors::class_prior_from_counts;

    const LN2: f64 = std::f64::consts::LN_2;

    fn prior_9_1() -> ClassPrior {
        class_prior_from_counts(&[9, 1]).unwrap()
    }

    #[test]
    fn test_bias_ce_values() {
        let uniform = ClassPrior::uniform(10).unwrap();
        let b = bias_ce(&uniform);
        for v in &b.values {
            assert!((v - (-(10f64.ln()))).abs() < 1e-12);
        }

        let b = bias_ce(&prior_9_1());
        assert!((b.values[0] - (-0.105_360_515_657_826_3)).abs() < 1e-12);
        assert!((b.values[1] - (-2.302_585_092_994_045_7)).abs() < 1e-12);
        assert!(b.values[0] > b.values[1]);
        assert_eq!(b.kind, BiasKind::Ce);
    }

    #[test]
    fn test_bias_bce_uniform_is_zero() {
        for c in [2usize, 10, 100, 1000] {
            let prior = ClassPrior::uniform(c).unwrap();
            let b = bias_bce(&prior).unwrap();
            for v in &b.values {
                assert!(v.abs() < 1e-12, "C={c}: bias {v}");
            }
        }
    }

    #[test]
    fn test_bias_bce_two_class() {
        let b = bias_bce(&prior_9_1()).unwrap();
        // log 0.9 - log 0.1 + log 1 = log 9
        assert!((b.values[0] - 2.197_224_577_336_219_4).abs() < 1e-12);
        assert!((b.values[1] + 2.197_224_577_336_219_4).abs() < 1e-12);
        assert_eq!(b.kind, BiasKind::Bce);
    }

    #[test]
    fn test_bias_bce_approaches_ce_for_rare_classes() {
        // For small pi, B^bce - B^ce - log(C-1) = -log(1 - pi) -> 0.
        let prior = class_prior_from_counts(&[999_999, 1]).unwrap();
        assert!((prior.freqs()[1] - 1e-6).abs() < 1e-12);
        let bce = bias_bce(&prior).unwrap();
        let ce = bias_ce(&prior);
        let gap = bce.values[1] - ce.values[1] - 1f64.ln();
        assert!(gap.abs() < 2e-6, "gap {gap}");
        assert!((gap - (-(1.0 - 1e-6f64).ln())).abs() < 1e-12);
    }

    #[test]
    fn test_bias_bce_errors() {
        let single = class_prior_from_counts(&[5]).unwrap();
        assert!(matches!(bias_bce(&single), Err(Error::DegenerateClass)));
    }

    #[test]
    fn test_bias_with_test_prior_reductions() {
        let s = prior_9_1();
        let same = bias_bce_with_test_prior(&s, &s).unwrap();
        assert!(same.values.iter().all(|v| v.abs() < 1e-12));
        assert_eq!(same.kind, BiasKind::BceTestPrior);

        let uniform = ClassPrior::uniform(2).unwrap();
        let reduced = bias_bce_with_test_prior(&s, &uniform).unwrap();
        let direct = bias_bce(&s).unwrap();
        for (a, b) in reduced.values.iter().zip(&direct.values) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((reduced.values[0] - 2.197_224_577_336_219_4).abs() < 1e-12);
        assert!((reduced.values[1] + 2.197_224_577_336_219_4).abs() < 1e-12);

        let three = ClassPrior::uniform(3).unwrap();
        assert!(matches!(bias_bce_with_test_prior(&s, &three), Err(Error::Shape(_))));
    }

    #[test]
    fn test_ce_loss_uniform_logits() {
        let out = ce_loss_and_grad(&[0.0, 0.0], &[1.0, 0.0], 1, 2, None).unwrap();
        assert!((out.value - LN2).abs() < 1e-12);
        assert!((out.grad[0] + 0.5).abs() < 1e-12);
        assert!((out.grad[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn test_ce_uniform_bias_matches_no_bias() {
        let prior = ClassPrior::uniform(4).unwrap();
        let bias = bias_ce(&prior);
        let logits = [0.3, -1.2, 0.8, 2.0, -0.5, 0.1, 0.0, 1.5];
        let targets = [0.1, 0.2, 0.3, 0.4, 0.25, 0.25, 0.25, 0.25];
        let plain = ce_loss_and_grad(&logits, &targets, 2, 4, None).unwrap();
        let biased = ce_loss_and_grad(&logits, &targets, 2, 4, Some(&bias)).unwrap();
        assert_eq!(plain.value, biased.value);
        assert_eq!(plain.grad, biased.grad);
    }

    #[test]
    fn test_ce_shift_invariance() {
        let logits = [0.3, -1.2, 0.8];
        let shifted: Vec<f64> = logits.iter().map(|z| z + 17.5).collect();
        let targets = [0.2, 0.5, 0.3];
        let a = ce_loss_and_grad(&logits, &targets, 1, 3, None).unwrap();
        let b = ce_loss_and_grad(&shifted, &targets, 1, 3, None).unwrap();
        assert!((a.value - b.value).abs() < 1e-12);
        for (x, y) in a.grad.iter().zip(&b.grad) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn test_ce_rejects_non_simplex_target() {
        assert!(matches!(
            ce_loss_and_grad(&[0.0, 0.0], &[0.7, 0.7], 1, 2, None),
            Err(Error::InvalidTarget(_))
        ));
    }

    #[test]
    fn test_bce_onehot_at_zero_logits() {
        let out = bce_loss_and_grad(
            &[0.0, 0.0, 0.0],
            &[1.0, 0.0, 0.0],
            1,
            3,
            &LossConfig::default(),
        )
        .unwrap();
        assert!((out.value - 3.0 * LN2).abs() < 1e-12);
        assert!((out.grad[0] + 0.5).abs() < 1e-12);
        assert!((out.grad[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn test_bce_uniform_prior_bias_is_plain_bce() {
        let prior = ClassPrior::uniform(3).unwrap();
        let cfg = LossConfig::with_bias(bias_bce(&prior).unwrap());
        let logits = [0.4, -0.9, 2.2];
        let targets = [0.0, 1.0, 0.3];
        let plain = bce_loss_and_grad(&logits, &targets, 1, 3, &LossConfig::default()).unwrap();
        let biased = bce_loss_and_grad(&logits, &targets, 1, 3, &cfg).unwrap();
        assert_eq!(plain.value, biased.value);
        assert_eq!(plain.grad, biased.grad);
    }

    #[test]
    fn test_bce_stable_at_extreme_logits() {
        for z in [-1e4, 1e4] {
            let out =
                bce_loss_and_grad(&[z], &[1.0], 1, 1, &LossConfig::default()).unwrap();
            assert!(out.value.is_finite());
            assert!(out.grad[0].is_finite());
        }
    }

    #[test]
    fn test_bce_rejects_bad_inputs() {
        assert!(matches!(
            bce_loss_and_grad(&[0.0], &[1.5], 1, 1, &LossConfig::default()),
            Err(Error::InvalidTarget(_))
        ));
        let cfg = LossConfig { weights: Some(vec![-1.0]), bias: None };
        assert!(matches!(
            bce_loss_and_grad(&[0.0], &[1.0], 1, 1, &cfg),
            Err(Error::InvalidWeight { .. })
        ));
    }

    #[test]
    fn test_ntbce_reduces_to_bce_at_lambda_one() {
        let logits = [0.7, -1.3, 0.2, 0.9];
        let targets = [1.0, 0.0, 0.0, 1.0];
        let prior = prior_9_1();
        let bias = bias_bce(&prior).unwrap();
        let nt = ntbce_loss_and_grad(&logits, &targets, 2, 2, 1.0, Some(&bias)).unwrap();
        let cfg = LossConfig::with_bias(bias);
        let bce = bce_loss_and_grad(&logits, &targets, 2, 2, &cfg).unwrap();
        assert_eq!(nt.value, bce.value);
        assert_eq!(nt.grad, bce.grad);
    }

    #[test]
    fn test_ntbce_lambda_two_at_zero_logits() {
        let out = ntbce_loss_and_grad(&[0.0, 0.0], &[1.0, 0.0], 1, 2, 2.0, None).unwrap();
        assert!((out.value - 1.5 * LN2).abs() < 1e-12);
    }

    #[test]
    fn test_ntbce_rejects_soft_targets_and_small_lambda() {
        assert!(matches!(
            ntbce_loss_and_grad(&[0.0, 0.0], &[0.5, 0.5], 1, 2, 2.0, None),
            Err(Error::InvalidTarget(_))
        ));
        assert!(matches!(
            ntbce_loss_and_grad(&[0.0, 0.0], &[1.0, 0.0], 1, 2, 0.5, None),
            Err(Error::InvalidLambda { .. })
        ));
    }

    #[test]
    fn test_bias_sign_matches_frequency_vs_uniform() {
        let prior = class_prior_from_counts(&[70, 20, 10]).unwrap();
        let b = bias_bce(&prior).unwrap();
        for (y, &p) in prior.freqs().iter().enumerate() {
            if p > 1.0 / 3.0 {
                assert!(b.values[y] > 0.0);
            } else {
                assert!(b.values[y] < 0.0);
            }
        }
    }

    #[test]
    fn test_bce_margin_gap_wider_than_ce() {
        // For pi_a > pi_b the BCE bias separates the pair strictly more.
        let prior = class_prior_from_counts(&[50, 30, 15, 5]).unwrap();
        let bce = bias_bce(&prior).unwrap();
        let ce = bias_ce(&prior);
        for a in 0..4 {
            for b in 0..4 {
                if prior.freqs()[a] > prior.freqs()[b] {
                    let bce_gap = bce.values[a] - bce.values[b];
                    let ce_gap = ce.values[a] - ce.values[b];
                    assert!(bce_gap > ce_gap, "classes {a},{b}");
                }
            }
        }
    }
}
