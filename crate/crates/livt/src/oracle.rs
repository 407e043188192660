//! Brute-force and closed-form verifiers: Bayes-optimal scores under prior
//! shift, balanced-error decisions, per-class BCE optima, and central
//! finite differences for gradient checking.

use rand::Rng;

use crate::error::{Error, Result};
use crate::losses::{sigmoid, LogitBias};
use crate::priors::{class_prior_from_counts, ClassPrior};
use crate::rng;

/// A finite classification problem with known posteriors.
#[derive(Debug, Clone)]
pub struct DiscreteProblem {
    /// K x C posterior table, rows on the simplex.
    pub eta: Vec<f64>,
    pub num_inputs: usize,
    pub num_classes: usize,
    pub prior_s: ClassPrior,
    pub prior_t: ClassPrior,
    /// Positive margin weights; delta = pi recovers the balanced rule.
    pub delta_s: Vec<f64>,
    pub delta_t: Vec<f64>,
}

impl DiscreteProblem {
    pub fn validate(&self) -> Result<()> {
        let (k, c) = (self.num_inputs, self.num_classes);
        if self.eta.len() != k * c {
            return Err(Error::Shape(format!("eta should be {k}x{c}")));
        }
        for i in 0..k {
            let sum: f64 = self.eta[i * c..(i + 1) * c].iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidTarget(format!("eta row {i} sums to {sum}")));
            }
        }
        if self.prior_s.num_classes() != c || self.prior_t.num_classes() != c {
            return Err(Error::Shape("prior class count mismatch".into()));
        }
        if self.delta_s.len() != c || self.delta_t.len() != c {
            return Err(Error::Shape("delta length mismatch".into()));
        }
        if self.delta_s.iter().chain(&self.delta_t).any(|&d| !(d > 0.0)) {
            return Err(Error::InvalidConfig("delta entries must be strictly positive".into()));
        }
        Ok(())
    }

    pub fn eta_row(&self, input: usize) -> &[f64] {
        &self.eta[input * self.num_classes..(input + 1) * self.num_classes]
    }
}

/// Bayes-optimal score table under margin weights:
/// z*_y = log(eta_y / delta^s_y * delta^t_y).
///
/// Zero posteriors produce `-inf` scores; their coordinates are listed in
/// `neg_infinite` instead of being silently propagated.
#[derive(Debug, Clone)]
pub struct BayesScores {
    /// K x C score table.
    pub scores: Vec<f64>,
    pub neg_infinite: Vec<(usize, usize)>,
}

pub fn bayes_scores(problem: &DiscreteProblem) -> Result<BayesScores> {
    problem.validate()?;
    let (k, c) = (problem.num_inputs, problem.num_classes);
    let mut scores = Vec::with_capacity(k * c);
    let mut neg_infinite = Vec::new();
    for i in 0..k {
        for y in 0..c {
            let eta = problem.eta[i * c + y];
            if eta == 0.0 {
                neg_infinite.push((i, y));
                scores.push(f64::NEG_INFINITY);
            } else {
                scores.push(eta.ln() - problem.delta_s[y].ln() + problem.delta_t[y].ln());
            }
        }
    }
    Ok(BayesScores { scores, neg_infinite })
}

/// Predicted labels with tie bookkeeping.
#[derive(Debug, Clone)]
pub struct ArgmaxResult {
    pub labels: Vec<usize>,
    /// Input indices where two classes tied exactly; ties resolve to the
    /// lowest class index.
    pub ties: Vec<usize>,
}

fn argmax_row(row: &[f64]) -> (usize, bool) {
    let mut best = 0;
    let mut tie = false;
    for (y, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = y;
            tie = false;
        } else if v == row[best] {
            tie = true;
        }
    }
    (best, tie)
}

/// Balanced-error Bayes rule: argmax_y eta_y(x) * pi^t_y / pi^s_y.
pub fn balanced_bayes_argmax(problem: &DiscreteProblem) -> Result<ArgmaxResult> {
    problem.validate()?;
    let (k, c) = (problem.num_inputs, problem.num_classes);
    let mut labels = Vec::with_capacity(k);
    let mut ties = Vec::new();
    let mut row = vec![0.0; c];
    for i in 0..k {
        for y in 0..c {
            row[y] = problem.eta[i * c + y] * problem.prior_t.freqs()[y] / problem.prior_s.freqs()[y];
        }
        let (label, tie) = argmax_row(&row);
        labels.push(label);
        if tie {
            ties.push(i);
        }
    }
    Ok(ArgmaxResult { labels, ties })
}

/// Closed-form minimizer of expected per-class balanced BCE:
/// z*_y = logit(eta_y) - tau * B_y.
pub fn tabular_bce_optimum(eta_row: &[f64], bias: &LogitBias) -> Result<Vec<f64>> {
    if bias.num_classes() != eta_row.len() {
        return Err(Error::Shape(format!(
            "bias has {} classes, eta row {}",
            bias.num_classes(),
            eta_row.len()
        )));
    }
    let mut out = Vec::with_capacity(eta_row.len());
    for (y, &eta) in eta_row.iter().enumerate() {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::InvalidTarget(format!("eta[{y}] = {eta} outside [0, 1]")));
        }
        if eta == 0.0 || eta == 1.0 {
            return Err(Error::UnboundedOptimum { class: y, eta });
        }
        out.push((eta / (1.0 - eta)).ln() - bias.tau * bias.values[y]);
    }
    Ok(out)
}

/// Gradient descent on the expected per-class balanced BCE risk; used to
/// confirm the closed form independently.
pub fn tabular_bce_descent(
    eta_row: &[f64],
    bias: &LogitBias,
    steps: usize,
    learning_rate: f64,
) -> Vec<f64> {
    let mut z = vec![0.0; eta_row.len()];
    for _ in 0..steps {
        for y in 0..z.len() {
            // dR/dz = sigmoid(z + tau*B) - eta
            let grad = sigmoid(z[y] + bias.tau * bias.values[y]) - eta_row[y];
            z[y] -= learning_rate * grad;
        }
    }
    z
}

/// One sigmoid-form disagreement, replayable from `(seed, trial)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counterexample {
    pub trial: usize,
    pub input: usize,
    pub pairwise_label: usize,
    pub sigmoid_label: usize,
}

/// Outcome of the randomized consistency harness.
#[derive(Debug, Clone)]
pub struct FisherReport {
    pub seed: u64,
    pub trials: usize,
    pub inputs_checked: usize,
    pub ties_excluded: usize,
    /// Pairwise-form score argmax vs the balanced Bayes rule.
    pub pairwise_agreement_rate: f64,
    /// Per-class sigmoid optimum argmax vs the balanced Bayes rule;
    /// measured, not asserted.
    pub sigmoid_agreement_rate: f64,
    pub counterexamples: Vec<Counterexample>,
}

/// Deterministic random problem for trial `t` of a seeded harness run.
pub fn random_problem(seed: u64, trial: usize) -> DiscreteProblem {
    let mut rng = rng::stream(seed, "fisher-problem", &[trial as u64]);
    let c = rng.gen_range(2..=5usize);
    let k = rng.gen_range(1..=20usize);
    let mut eta = Vec::with_capacity(k * c);
    for _ in 0..k {
        // Dirichlet(1) row via normalized exponentials.
        let mut row: Vec<f64> = (0..c).map(|_| -rng.gen::<f64>().max(1e-12).ln()).collect();
        let sum: f64 = row.iter().sum();
        for v in &mut row {
            *v /= sum;
        }
        eta.extend(row);
    }
    let counts_s: Vec<usize> = (0..c).map(|_| rng.gen_range(1..=1000usize)).collect();
    let counts_t: Vec<usize> = (0..c).map(|_| rng.gen_range(1..=1000usize)).collect();
    let prior_s = class_prior_from_counts(&counts_s).expect("positive counts");
    let prior_t = class_prior_from_counts(&counts_t).expect("positive counts");
    DiscreteProblem {
        eta,
        num_inputs: k,
        num_classes: c,
        delta_s: prior_s.freqs().to_vec(),
        delta_t: prior_t.freqs().to_vec(),
        prior_s,
        prior_t,
    }
}

/// Agreement of both decision forms with the balanced rule on one problem.
pub fn fisher_agreement(problem: &DiscreteProblem, trial: usize) -> Result<(usize, usize, usize, Vec<Counterexample>)> {
    use crate::losses::bias_bce_with_test_prior;

    let c = problem.num_classes;
    let reference = balanced_bayes_argmax(problem)?;
    let scores = bayes_scores(problem)?;
    let bias = bias_bce_with_test_prior(&problem.prior_s, &problem.prior_t)?;

    let mut pairwise_ok = 0;
    let mut sigmoid_ok = 0;
    let mut checked = 0;
    let mut counterexamples = Vec::new();
    for i in 0..problem.num_inputs {
        let (pairwise, tie_a) = argmax_row(&scores.scores[i * c..(i + 1) * c]);
        let sigmoid_logits = tabular_bce_optimum(problem.eta_row(i), &bias);
        let tie_ref = reference.ties.contains(&i);
        if tie_a || tie_ref {
            continue;
        }
        checked += 1;
        if pairwise == reference.labels[i] {
            pairwise_ok += 1;
        }
        match sigmoid_logits {
            Ok(z) => {
                let (sig, tie_s) = argmax_row(&z);
                if !tie_s && sig == reference.labels[i] {
                    sigmoid_ok += 1;
                } else if !tie_s {
                    counterexamples.push(Counterexample {
                        trial,
                        input: i,
                        pairwise_label: reference.labels[i],
                        sigmoid_label: sig,
                    });
                }
            }
            Err(Error::UnboundedOptimum { .. }) => {
                // Degenerate eta entry; count as agreement on the argmax of
                // the raw balanced rule is not possible, so skip it.
                checked -= 1;
                if pairwise == reference.labels[i] {
                    pairwise_ok -= 1;
                }
            }
            Err(e) => return Err(e),
        }
    }
    Ok((checked, pairwise_ok, sigmoid_ok, counterexamples))
}

/// Runs `trials` random problems and reports agreement rates.
pub fn fisher_consistency_check(trials: usize, seed: u64) -> Result<FisherReport> {
    let mut checked = 0;
    let mut pairwise_ok = 0;
    let mut sigmoid_ok = 0;
    let mut ties = 0;
    let mut counterexamples = Vec::new();
    for trial in 0..trials {
        let problem = random_problem(seed, trial);
        let total_inputs = problem.num_inputs;
        let (c, p, s, mut cx) = fisher_agreement(&problem, trial)?;
        checked += c;
        ties += total_inputs - c;
        pairwise_ok += p;
        sigmoid_ok += s;
        counterexamples.append(&mut cx);
    }
    let rate = |ok: usize| if checked == 0 { 1.0 } else { ok as f64 / checked as f64 };
    Ok(FisherReport {
        seed,
        trials,
        inputs_checked: checked,
        ties_excluded: ties,
        pairwise_agreement_rate: rate(pairwise_ok),
        sigmoid_agreement_rate: rate(sigmoid_ok),
        counterexamples,
    })
}

/// Central finite differences of a scalar function.
pub fn finite_diff_grad<F>(f: F, point: &[f64], eps: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    let coords: Vec<usize> = (0..point.len()).collect();
    finite_diff_grad_at(f, point, eps, &coords)
}

/// Central finite differences on a coordinate subset.
pub fn finite_diff_grad_at<F>(f: F, point: &[f64], eps: f64, coords: &[usize]) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    let mut x = point.to_vec();
    let mut out = Vec::with_capacity(coords.len());
    for &i in coords {
        let orig = x[i];
        x[i] = orig + eps;
        let plus = f(&x);
        x[i] = orig - eps;
        let minus = f(&x);
        x[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::OracleFailure { coordinate: i });
        }
        out.push((plus - minus) / (2.0 * eps));
    }
    Ok(out)
}

/// Combined absolute/relative gradient error, the quantity checked against
/// tolerances in the gradient oracles.
pub fn grad_rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1.0)
}
