use super::EvalError;

fn check(ranks: &[usize]) -> Result<(), EvalError> {
    if ranks.is_empty() {
        return Err(EvalError::EmptyRanks);
    }
    if ranks.contains(&0) {
        return Err(EvalError::ZeroRank);
    }
    Ok(())
}

/// Mean reciprocal rank.
pub fn mrr(ranks: &[usize]) -> Result<f64, EvalError> {
    check(ranks)?;
    Ok(ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / ranks.len() as f64)
}

/// Fraction of ranks at or above position `k`.
pub fn hits_at_k(ranks: &[usize], k: usize) -> Result<f64, EvalError> {
    if k == 0 {
        return Err(EvalError::InvalidK);
    }
    check(ranks)?;
    Ok(ranks.iter().filter(|&&r| r <= k).count() as f64 / ranks.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_computed() {
        assert!((mrr(&[1, 2, 4]).unwrap() - 1.75 / 3.0).abs() < 1e-15);
        assert_eq!(mrr(&[1, 1, 1]).unwrap(), 1.0);
        assert_eq!(mrr(&[10]).unwrap(), 0.1);
        assert_eq!(hits_at_k(&[1, 3, 5], 1).unwrap(), 1.0 / 3.0);
        assert_eq!(hits_at_k(&[1, 1], 7).unwrap(), 1.0);
    }

    #[test]
    fn invalid_inputs() {
        assert!(matches!(mrr(&[]), Err(EvalError::EmptyRanks)));
        assert!(matches!(hits_at_k(&[1], 0), Err(EvalError::InvalidK)));
        assert!(matches!(mrr(&[0, 1]), Err(EvalError::ZeroRank)));
    }
}
