//! Class-count profiles, label priors, and long-tailed dataset builders.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng;

/// Per-class counts with derived frequencies.
///
/// Rejects zero-count classes so every frequency is strictly positive and
/// `log pi` stays finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassPrior {
    counts: Vec<usize>,
    freqs: Vec<f64>,
    total: usize,
}

impl ClassPrior {
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// pi_y = n_y / N.
    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn uniform(c: usize) -> Result<Self> {
        class_prior_from_counts(&vec![1; c.max(1)])
    }
}

/// Builds a [`ClassPrior`] from raw counts.
pub fn class_prior_from_counts(counts: &[usize]) -> Result<ClassPrior> {
    if counts.is_empty() {
        return Err(Error::InvalidProfile("no classes".into()));
    }
    if let Some(class) = counts.iter().position(|&n| n == 0) {
        return Err(Error::ZeroClass { class });
    }
    let total: usize = counts.iter().sum();
    let freqs = counts.iter().map(|&n| n as f64 / total as f64).collect();
    Ok(ClassPrior { counts: counts.to_vec(), freqs, total })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    Exponential,
    Pareto,
    Uniform,
}

/// Declarative recipe for a long-tailed count vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ImbalanceProfile {
    pub kind: ProfileKind,
    pub n_max: usize,
    /// Imbalance factor n_max / n_min.
    pub gamma: f64,
    /// Pareto power; unused for the other kinds.
    pub alpha: f64,
    pub num_classes: usize,
}

impl ImbalanceProfile {
    pub fn exponential(n_max: usize, gamma: f64, num_classes: usize) -> Result<Self> {
        let profile = ImbalanceProfile {
            kind: ProfileKind::Exponential,
            n_max,
            gamma,
            alpha: 1.0,
            num_classes,
        };
        profile.counts()?;
        Ok(profile)
    }

    pub fn pareto(n_max: usize, alpha: f64, num_classes: usize, n_min: usize) -> Result<Self> {
        if n_min == 0 || n_min > n_max {
            return Err(Error::InvalidProfile(format!(
                "pareto needs 1 <= n_min <= n_max, got n_min={n_min}, n_max={n_max}"
            )));
        }
        if alpha <= 0.0 || !alpha.is_finite() {
            return Err(Error::InvalidProfile(format!("pareto power must be positive, got {alpha}")));
        }
        let profile = ImbalanceProfile {
            kind: ProfileKind::Pareto,
            n_max,
            gamma: n_max as f64 / n_min as f64,
            alpha,
            num_classes,
        };
        profile.counts()?;
        Ok(profile)
    }

    pub fn uniform(n_max: usize, num_classes: usize) -> Result<Self> {
        if n_max == 0 || num_classes == 0 {
            return Err(Error::InvalidProfile("uniform profile needs n_max >= 1 and C >= 1".into()));
        }
        Ok(ImbalanceProfile {
            kind: ProfileKind::Uniform,
            n_max,
            gamma: 1.0,
            alpha: 1.0,
            num_classes,
        })
    }

    pub fn counts(&self) -> Result<Vec<usize>> {
        match self.kind {
            ProfileKind::Exponential => exponential_profile(self.n_max, self.gamma, self.num_classes),
            ProfileKind::Pareto => {
                let n_min = (self.n_max as f64 / self.gamma).round() as usize;
                pareto_profile(self.n_max, self.alpha, self.num_classes, n_min.max(1))
            }
            ProfileKind::Uniform => Ok(vec![self.n_max; self.num_classes]),
        }
    }
}

/// Floor that snaps values a hair away from an integer back onto it, so the
/// result agrees with evaluating the count rule at higher precision.
fn floor_stable(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < 1e-9 * r.abs().max(1.0) {
        r
    } else {
        v.floor()
    }
}

/// Exponential decay counts: n_i = floor(n_max * gamma^(-i / (C-1))).
pub fn exponential_profile(n_max: usize, gamma: f64, num_classes: usize) -> Result<Vec<usize>> {
    if !gamma.is_finite() || gamma < 1.0 {
        return Err(Error::InvalidProfile(format!("imbalance factor must be >= 1, got {gamma}")));
    }
    if n_max == 0 || num_classes == 0 {
        return Err(Error::InvalidProfile("profile needs n_max >= 1 and C >= 1".into()));
    }
    if gamma > 1.0 && num_classes < 2 {
        return Err(Error::InvalidProfile("gamma > 1 needs at least two classes".into()));
    }
    if floor_stable(n_max as f64 / gamma) < 1.0 {
        return Err(Error::EmptyTail { n_max, gamma });
    }
    let denom = (num_classes - 1).max(1) as f64;
    let counts = (0..num_classes)
        .map(|i| floor_stable(n_max as f64 * gamma.powf(-(i as f64) / denom)) as usize)
        .collect();
    Ok(counts)
}

/// Pareto-shaped counts n_i = round(n_max * (1 + s*i)^(-alpha)) with the
/// scale s solved so the last class lands on n_min.
pub fn pareto_profile(n_max: usize, alpha: f64, num_classes: usize, n_min: usize) -> Result<Vec<usize>> {
    if n_min == 0 || n_min > n_max {
        return Err(Error::InvalidProfile(format!(
            "pareto needs 1 <= n_min <= n_max, got n_min={n_min}, n_max={n_max}"
        )));
    }
    if alpha <= 0.0 || !alpha.is_finite() {
        return Err(Error::InvalidProfile(format!("pareto power must be positive, got {alpha}")));
    }
    if num_classes == 0 {
        return Err(Error::InvalidProfile("profile needs C >= 1".into()));
    }
    if num_classes == 1 {
        if n_min != n_max {
            return Err(Error::InvalidProfile("single class needs n_min = n_max".into()));
        }
        return Ok(vec![n_max]);
    }
    if n_min == n_max {
        return Ok(vec![n_max; num_classes]);
    }

    // (1 + s*(C-1))^(-alpha) is monotone decreasing in s; bisect for the s
    // that puts the tail class exactly at n_min.
    let target = n_min as f64 / n_max as f64;
    let last = (num_classes - 1) as f64;
    let tail = |s: f64| (1.0 + s * last).powf(-alpha);
    let mut lo = 0.0;
    let mut hi = 1.0;
    while tail(hi) > target {
        hi *= 2.0;
    }
    while hi - lo > 1e-10 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if tail(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = 0.5 * (lo + hi);
    let counts: Vec<usize> = (0..num_classes)
        .map(|i| (n_max as f64 * (1.0 + s * i as f64).powf(-alpha)).round() as usize)
        .collect();
    Ok(counts)
}

/// Channel-major image geometry of a dataset row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImageShape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl ImageShape {
    pub fn dim(&self) -> usize {
        self.channels * self.height * self.width
    }
}

/// Feature matrix plus labels and the provenance used to build it.
///
/// Immutable after construction; per-class label counts always equal the
/// prior counts exactly.
#[derive(Debug, Clone)]
pub struct LtDataset {
    pub features: Vec<f64>,
    pub labels: Vec<usize>,
    pub shape: ImageShape,
    pub prior: ClassPrior,
    pub profile: Option<ImbalanceProfile>,
    pub seed: Option<u64>,
}

impl LtDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature(&self, index: usize) -> &[f64] {
        let d = self.shape.dim();
        &self.features[index * d..(index + 1) * d]
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.shape.dim();
        if self.features.len() != self.labels.len() * d {
            return Err(Error::Shape(format!(
                "features length {} does not match {} rows of dim {}",
                self.features.len(),
                self.labels.len(),
                d
            )));
        }
        if !self.features.iter().all(|v| v.is_finite()) {
            return Err(Error::NumericalFailure { tensor: "dataset.features".into() });
        }
        let mut counts = vec![0usize; self.prior.num_classes()];
        for &y in &self.labels {
            if y >= counts.len() {
                return Err(Error::LabelRange { label: y, classes: counts.len() });
            }
            counts[y] += 1;
        }
        if counts != self.prior.counts() {
            return Err(Error::Shape("label counts do not match prior counts".into()));
        }
        Ok(())
    }
}

/// Selects a long-tailed subset of `full` with exactly the profile's
/// per-class counts. Per-class selection draws from a stream keyed by
/// `(seed, class)`, and retained instances keep their original order.
pub fn subsample_dataset(full: &LtDataset, profile: &ImbalanceProfile, seed: u64) -> Result<LtDataset> {
    let counts = profile.counts()?;
    if counts.len() != full.prior.num_classes() {
        return Err(Error::Shape(format!(
            "profile has {} classes but dataset has {}",
            counts.len(),
            full.prior.num_classes()
        )));
    }

    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); counts.len()];
    for (i, &y) in full.labels.iter().enumerate() {
        per_class[y].push(i);
    }

    let mut keep = vec![false; full.len()];
    for (class, want) in counts.iter().copied().enumerate() {
        let have = per_class[class].len();
        if have < want {
            return Err(Error::Coverage { class, need: want, have });
        }
        let mut pool = per_class[class].clone();
        let mut rng = rng::stream(seed, "subsample", &[class as u64]);
        // Partial Fisher-Yates: the first `want` slots are the selection.
        for i in 0..want {
            let j = rng.gen_range(i..pool.len());
            pool.swap(i, j);
        }
        for &idx in &pool[..want] {
            keep[idx] = true;
        }
    }

    let d = full.shape.dim();
    let mut features = Vec::with_capacity(counts.iter().sum::<usize>() * d);
    let mut labels = Vec::new();
    for i in 0..full.len() {
        if keep[i] {
            features.extend_from_slice(full.feature(i));
            labels.push(full.labels[i]);
        }
    }

    let dataset = LtDataset {
        features,
        labels,
        shape: full.shape,
        prior: class_prior_from_counts(&counts)?,
        profile: Some(profile.clone()),
        seed: Some(seed),
    };
    dataset.validate()?;
    Ok(dataset)
}

/// Synthetic Gaussian benchmark with exact posteriors.
#[derive(Debug, Clone)]
pub struct SynthGaussianLt {
    pub dataset: LtDataset,
    /// Exact eta rows, N x C, computed from the generating densities.
    pub posteriors: Vec<f64>,
    /// Class means, C x dim.
    pub means: Vec<f64>,
}

impl SynthGaussianLt {
    /// Exact posterior of an arbitrary point under the generating model.
    pub fn posterior_at(&self, x: &[f64]) -> Vec<f64> {
        gaussian_posterior(&self.means, self.dataset.prior.freqs(), x)
    }
}

/// Class means for the synthetic benchmark: a fixed function of
/// `(C, dim, class_separation)` so datasets built with different seeds
/// (train/eval splits) share the same class structure.
pub fn synth_class_means(num_classes: usize, dim: usize, class_separation: f64) -> Vec<f64> {
    let scale = class_separation / (dim as f64).sqrt();
    let mut means = Vec::with_capacity(num_classes * dim);
    for y in 0..num_classes {
        let mut rng = rng::stream(0x5347_4d45, "synth-means", &[y as u64, dim as u64]);
        for _ in 0..dim {
            let g: f64 = rng.sample(StandardNormal);
            means.push(scale * g);
        }
    }
    means
}

fn gaussian_posterior(means: &[f64], freqs: &[f64], x: &[f64]) -> Vec<f64> {
    let c = freqs.len();
    let dim = x.len();
    let mut logits = Vec::with_capacity(c);
    for y in 0..c {
        let mu = &means[y * dim..(y + 1) * dim];
        let sq: f64 = x.iter().zip(mu).map(|(a, b)| (a - b) * (a - b)).sum();
        logits.push(freqs[y].ln() - 0.5 * sq);
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for v in &mut out {
        *v /= sum;
    }
    out
}

/// Draws a long-tailed dataset of isotropic unit-variance Gaussians, one
/// mean per class, and returns exact per-point posteriors.
///
/// Rows are image-shaped `1 x H x W` when `dim` is a perfect square and
/// flat `1 x 1 x dim` otherwise.
pub fn synth_gaussian_lt(
    num_classes: usize,
    dim: usize,
    profile: &ImbalanceProfile,
    class_separation: f64,
    seed: u64,
) -> Result<SynthGaussianLt> {
    if dim < 1 {
        return Err(Error::InvalidConfig("synthetic data needs dim >= 1".into()));
    }
    if class_separation <= 0.0 || !class_separation.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "class separation must be positive, got {class_separation}"
        )));
    }
    let counts = profile.counts()?;
    if counts.len() != num_classes {
        return Err(Error::Shape(format!(
            "profile has {} classes, requested {num_classes}",
            counts.len()
        )));
    }
    let prior = class_prior_from_counts(&counts)?;
    let means = synth_class_means(num_classes, dim, class_separation);

    let total: usize = counts.iter().sum();
    let mut features = Vec::with_capacity(total * dim);
    let mut labels = Vec::with_capacity(total);
    for (y, &n) in counts.iter().enumerate() {
        let mu = &means[y * dim..(y + 1) * dim];
        let mut rng = rng::stream(seed, "synth-draws", &[y as u64]);
        for _ in 0..n {
            for &m in mu {
                let g: f64 = rng.sample(StandardNormal);
                features.push(m + g);
            }
            labels.push(y);
        }
    }

    let mut posteriors = Vec::with_capacity(total * num_classes);
    for i in 0..total {
        let x = &features[i * dim..(i + 1) * dim];
        posteriors.extend(gaussian_posterior(&means, prior.freqs(), x));
    }

    let side = (dim as f64).sqrt().round() as usize;
    let shape = if side * side == dim {
        ImageShape { channels: 1, height: side, width: side }
    } else {
        ImageShape { channels: 1, height: 1, width: dim }
    };

    let dataset = LtDataset {
        features,
        labels,
        shape,
        prior,
        profile: Some(profile.clone()),
        seed: Some(seed),
    };
    dataset.validate()?;
    Ok(SynthGaussianLt { dataset, posteriors, means })
}
