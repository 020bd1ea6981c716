//! Sampling heads: masked categorical over logits and a Beta law on [0, 1].

use rand::Rng;
use rand_distr::Distribution;

use super::special::ln_beta;
use super::tape::log_softmax_slice;

/// Keep sampled fractions strictly inside (0, 1) so log-densities stay finite.
pub const BETA_SUPPORT_EPS: f64 = 1e-6;

/// Draw an index from `softmax(logits)`. Masked options carry `-inf` logits.
/// Returns the index and its log-probability.
pub fn categorical_sample<R: Rng>(logits: &[f64], rng: &mut R) -> (usize, f64) {
    assert!(!logits.is_empty(), "categorical over empty support");
    let logp = log_softmax_slice(logits);
    let u: f64 = rng.gen::<f64>();
    let mut cum = 0.0;
    let mut last_valid = 0;
    for (i, lp) in logp.iter().enumerate() {
        if *lp == f64::NEG_INFINITY {
            continue;
        }
        last_valid = i;
        cum += lp.exp();
        if u < cum {
            return (i, *lp);
        }
    }
    // Rounding left a sliver at the top; take the last unmasked option.
    (last_valid, logp[last_valid])
}

/// Log-probability of `index` under `softmax(logits)`.
pub fn categorical_log_prob(logits: &[f64], index: usize) -> f64 {
    log_softmax_slice(logits)[index]
}

/// Draw from Beta(alpha, beta), clamped into the open unit interval.
/// Returns the value and its exact log-density at the clamped point.
pub fn bounded_sample<R: Rng>(alpha: f64, beta: f64, rng: &mut R) -> (f64, f64) {
    assert!(alpha > 0.0 && beta > 0.0, "Beta needs positive concentrations");
    let dist = rand_distr::Beta::new(alpha, beta).expect("valid Beta parameters");
    let x: f64 = dist.sample(rng);
    let x = x.clamp(BETA_SUPPORT_EPS, 1.0 - BETA_SUPPORT_EPS);
    (x, beta_log_pdf(alpha, beta, x))
}

/// Exact Beta log-density at `x` in (0, 1).
pub fn beta_log_pdf(alpha: f64, beta: f64, x: f64) -> f64 {
    (alpha - 1.0) * x.ln() + (beta - 1.0) * (1.0 - x).ln() - ln_beta(alpha, beta)
}
