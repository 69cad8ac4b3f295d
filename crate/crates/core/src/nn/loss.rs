use crate::error::{Error, Result};

/// Softmax cross-entropy of `logits` against the gold index.
///
/// Returns the loss and its gradient with respect to the logits
/// (`softmax - one_hot(gold)`).
pub fn softmax_xent(logits: &[f64], gold: usize) -> Result<(f64, Vec<f64>)> {
    if gold >= logits.len() {
        return Err(Error::InvalidInput(format!(
            "gold index {gold} out of range for {} logits",
            logits.len()
        )));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = probs.iter().sum();
    let log_z = max + sum.ln();
    probs.iter_mut().for_each(|p| *p /= sum);
    let loss = (log_z - logits[gold]).max(0.0);
    if !loss.is_finite() {
        return Err(Error::Numerical(format!("non-finite loss from logits {logits:?}")));
    }
    probs[gold] -= 1.0;
    Ok((loss, probs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_logits_give_log_n() {
        let (loss, grad) = softmax_xent(&[0.3; 12], 4).unwrap();
        assert!((loss - 12f64.ln()).abs() < 1e-12);
        assert!((loss - 2.4849).abs() < 1e-4);
        assert!(grad.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn dominant_gold_logit_drives_loss_to_zero() {
        let mut prev = f64::INFINITY;
        for big in [1.0, 5.0, 20.0, 100.0, 1000.0] {
            let mut logits = vec![0.0; 12];
            logits[2] = big;
            let (loss, _) = softmax_xent(&logits, 2).unwrap();
            // Saturates to exactly 0 once exp(-big) vanishes next to 1.
            assert!(loss < prev || loss == 0.0);
            prev = loss;
        }
        assert!(prev < 1e-12);
    }

    #[test]
    fn gold_out_of_range() {
        assert!(matches!(softmax_xent(&[0.0; 3], 3), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = rng.random_range(2..15);
            let logits: Vec<f64> = (0..n).map(|_| rng.random_range(-4.0..4.0)).collect();
            let gold = rng.random_range(0..n);
            let (_, grad) = softmax_xent(&logits, gold).unwrap();
            assert!(grad.iter().sum::<f64>().abs() < 1e-12);
            let eps = 1e-5;
            for j in 0..n {
                let mut plus = logits.clone();
                plus[j] += eps;
                let mut minus = logits.clone();
                minus[j] -= eps;
                let numeric = (softmax_xent(&plus, gold).unwrap().0
                    - softmax_xent(&minus, gold).unwrap().0)
                    / (2.0 * eps);
                assert!((numeric - grad[j]).abs() < 1e-7, "{numeric} vs {}", grad[j]);
            }
        }
    }
}
