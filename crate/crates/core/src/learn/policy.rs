//! Masked softmax policies over canonical action slots.

use rand::Rng;

use super::approx::FunctionApproximator;
use super::LearnError;

/// Softmax over the slots allowed by `mask`; disallowed slots get
/// probability 0.
pub fn softmax_masked(logits: &[f64], mask: &[bool]) -> Result<Vec<f64>, LearnError> {
    if logits.len() != mask.len() {
        return Err(LearnError::Dimension { expected: mask.len(), got: logits.len() });
    }
    if let Some(bad) = logits.iter().zip(mask).find(|(l, &m)| m && !l.is_finite()) {
        return Err(LearnError::Numerical(format!("non-finite logit {}", bad.0)));
    }
    let max = logits
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(l, _)| *l)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(LearnError::Numerical("no admissible action".into()));
    }
    let mut probs: Vec<f64> = logits
        .iter()
        .zip(mask)
        .map(|(l, &m)| if m { (l - max).exp() } else { 0.0 })
        .collect();
    let z: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= z;
    }
    Ok(probs)
}

pub fn policy_probs(actor: &FunctionApproximator, obs: &[f64], mask: &[bool]) -> Result<Vec<f64>, LearnError> {
    softmax_masked(&actor.forward(obs)?, mask)
}

/// Inverse-CDF draw. Zero-probability slots are never returned.
pub fn sample_action<R: Rng + ?Sized>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (k, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = k;
        if u < acc {
            return k;
        }
    }
    last
}

/// `d log pi(a|x) / d logits` for a masked softmax.
pub fn log_prob_logit_grad(probs: &[f64], mask: &[bool], action: usize) -> Vec<f64> {
    probs
        .iter()
        .zip(mask)
        .enumerate()
        .map(|(k, (&p, &m))| {
            if !m {
                0.0
            } else if k == action {
                1.0 - p
            } else {
                -p
            }
        })
        .collect()
}

/// Gradient of `log pi(a|x)` with respect to the actor parameters.
pub fn grad_log_pi(actor: &FunctionApproximator, obs: &[f64], mask: &[bool], action: usize) -> Result<Vec<f64>, LearnError> {
    let probs = policy_probs(actor, obs, mask)?;
    actor.vjp(obs, &log_prob_logit_grad(&probs, mask, action))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::approx::ApproxSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_params_give_uniform() {
        let f = FunctionApproximator::zeros(&ApproxSpec::Linear, 3, 4);
        let p = policy_probs(&f, &[1.0, 2.0, 3.0], &[true; 4]).unwrap();
        assert!(p.iter().all(|&v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn ln2_logits() {
        let p = softmax_masked(&[std::f64::consts::LN_2, 0.0], &[true, true]).unwrap();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((p[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn masked_slots_get_zero() {
        let p = softmax_masked(&[5.0, 1.0, 1.0], &[false, true, true]).unwrap();
        assert_eq!(p, vec![0.0, 0.5, 0.5]);
        assert!(softmax_masked(&[f64::NAN, 1.0], &[true, true]).is_err());
    }

    #[test]
    fn random_params_normalize() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let mut f = FunctionApproximator::zeros(&ApproxSpec::Linear, 3, 5);
            for p in f.params_mut() {
                *p = rng.gen_range(-5.0..5.0);
            }
            let p = policy_probs(&f, &[1.0, -0.5, 0.2], &[true; 5]).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(p.iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn degenerate_distribution_always_picks_its_mode() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            assert_eq!(sample_action(&mut rng, &[0.0, 0.0, 1.0, 0.0]), 2);
        }
    }

    #[test]
    fn uniform_sampling_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut counts = [0usize; 4];
        let n = 100_000;
        for _ in 0..n {
            counts[sample_action(&mut rng, &[0.25; 4])] += 1;
        }
        for c in counts {
            assert!((c as f64 / n as f64 - 0.25).abs() < 0.01);
        }
    }

    #[test]
    fn seeded_sampling_repeats() {
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50).map(|_| sample_action(&mut rng, &[0.1, 0.2, 0.3, 0.4])).collect::<Vec<_>>()
        };
        assert_eq!(draw(9), draw(9));
    }

    #[test]
    fn log_pi_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let spec = ApproxSpec::Mlp { hidden: vec![6] };
        let f = FunctionApproximator::init(&spec, 4, 5, &mut rng);
        let mask = [true, false, true, true, true];
        let x = [0.4, -0.3, 0.9, 0.1];
        let g = grad_log_pi(&f, &x, &mask, 2).unwrap();
        let h = 1e-5;
        let logp = |f: &FunctionApproximator| policy_probs(f, &x, &mask).unwrap()[2].ln();
        let mut probe = f.clone();
        for p in 0..f.n_params() {
            let orig = probe.params()[p];
            probe.params_mut()[p] = orig + h;
            let up = logp(&probe);
            probe.params_mut()[p] = orig - h;
            let down = logp(&probe);
            probe.params_mut()[p] = orig;
            let num = (up - down) / (2.0 * h);
            let rel = (g[p] - num).abs() / g[p].abs().max(num.abs()).max(1.0);
            assert!(rel < 1e-4, "param {p}: {} vs {num}", g[p]);
        }
    }
}
