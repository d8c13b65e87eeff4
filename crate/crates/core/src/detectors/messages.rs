use num_complex::Complex64;

/// A complex Gaussian message `CN(mean, var)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian {
    pub mean: Complex64,
    pub var: f64,
}

impl Gaussian {
    pub fn new(mean: Complex64, var: f64) -> Self {
        Gaussian { mean, var }
    }
}

/// Extrinsic message in natural parameters: `precision = 1/η̄` and
/// `weighted_mean = μ̄/η̄`.
///
/// A zero precision is an uninformative message; a negative one is an
/// improper result of the Gaussian division.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extrinsic {
    pub precision: f64,
    pub weighted_mean: Complex64,
}

impl Extrinsic {
    pub fn is_proper(&self) -> bool {
        self.precision > 0.0
    }

    /// `(μ̄, η̄)` when the message is proper.
    pub fn gaussian(&self) -> Option<Gaussian> {
        self.is_proper().then(|| Gaussian::new(self.weighted_mean / self.precision, 1.0 / self.precision))
    }
}

/// Observation-to-variable message for element `i` of a row block.
///
/// `row_mean` is `Σ h·μ` and `row_var` is `Σ |h|²·η + σ²` over every
/// connected element of the row; the element's own contribution is removed
/// here. `h` must be non-zero.
pub fn observation_update(
    y: Complex64,
    row_mean: Complex64,
    row_var: f64,
    h: Complex64,
    own: Gaussian,
    min_var: f64,
) -> Gaussian {
    let h2 = h.norm_sqr();
    let mean = (y - row_mean + h * own.mean) / h;
    let var = ((row_var - h2 * own.var) / h2).max(min_var);
    Gaussian::new(mean, var)
}

/// Posterior over the `Q` candidate vectors of one block.
///
/// `log_prior[q]` may be empty for a flat prior. `obs` lists, for each
/// connected element, the element index and its incoming message. Computed
/// in the log domain with max-subtraction.
pub fn variable_update(candidates: &[&[Complex64]], log_prior: &[f64], obs: &[(usize, Gaussian)]) -> Vec<f64> {
    let mut logp: Vec<f64> = candidates
        .iter()
        .enumerate()
        .map(|(q, chi)| {
            let prior = log_prior.get(q).copied().unwrap_or(0.0);
            prior - obs.iter().map(|(i, m)| (chi[*i] - m.mean).norm_sqr() / m.var).sum::<f64>()
        })
        .collect();
    let max = logp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    logp.iter_mut().for_each(|v| *v = (*v - max).exp());
    let total: f64 = logp.iter().sum();
    logp.iter_mut().for_each(|v| *v /= total);
    logp
}

/// Gaussian projection of a discrete distribution over candidate vectors,
/// with variances clamped at `min_var`.
pub fn project(candidates: &[&[Complex64]], probs: &[f64], min_var: f64) -> Vec<Gaussian> {
    let d = candidates.first().map_or(0, |c| c.len());
    (0..d)
        .map(|i| {
            let mut mean = Complex64::new(0.0, 0.0);
            let mut second = 0.0;
            for (chi, &p) in candidates.iter().zip(probs) {
                mean += chi[i] * p;
                second += p * chi[i].norm_sqr();
            }
            Gaussian::new(mean, (second - mean.norm_sqr()).max(min_var))
        })
        .collect()
}

/// Gaussian division of the projected posterior `(E, F)` by the incoming
/// message `(C, D)`.
pub fn extrinsic_combine(posterior: Gaussian, incoming: Gaussian) -> Extrinsic {
    Extrinsic {
        precision: 1.0 / posterior.var - 1.0 / incoming.var,
        weighted_mean: posterior.mean / posterior.var - incoming.mean / incoming.var,
    }
}

/// Precision-domain damping of an extrinsic message against the previous
/// one. Keeps `prev` when the renewed variance would not be positive.
pub fn damp(ext: Extrinsic, prev: Gaussian, damping: f64, min_var: f64) -> Gaussian {
    let precision = damping * ext.precision + (1.0 - damping) / prev.var;
    if !(precision > 0.0) || !precision.is_finite() {
        return prev;
    }
    let weighted = ext.weighted_mean * damping + prev.mean * ((1.0 - damping) / prev.var);
    Gaussian::new(weighted / precision, (1.0 / precision).max(min_var))
}

/// Fraction of blocks whose largest posterior reaches `1 − rho`.
pub fn convergence_indicator(posteriors: &[Vec<f64>], rho: f64) -> f64 {
    if posteriors.is_empty() {
        return 1.0;
    }
    let hits = posteriors.iter().filter(|p| p.iter().copied().fold(f64::NEG_INFINITY, f64::max) >= 1.0 - rho).count();
    hits as f64 / posteriors.len() as f64
}
