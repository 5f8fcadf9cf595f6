//! Normalized mutual information between two labelings.

use std::collections::HashMap;
use std::hash::Hash;

use crate::error::NumericError;

fn entropy(counts: impl Iterator<Item = usize>, n: f64) -> f64 {
    counts
        .map(|c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// `I(A; B) / ((H(A) + H(B)) / 2)`.
///
/// Two single-cluster labelings score 1; if exactly one side is a single
/// cluster the score is 0.
pub fn nmi<A: Eq + Hash, B: Eq + Hash>(a: &[A], b: &[B]) -> Result<f64, NumericError> {
    if a.len() != b.len() {
        return Err(NumericError::Shape(format!(
            "labelings have lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(NumericError::Parameter("labelings are empty".into()));
    }
    let n = a.len() as f64;
    let mut ids_a: HashMap<&A, usize> = HashMap::new();
    let mut ids_b: HashMap<&B, usize> = HashMap::new();
    let la: Vec<usize> = a
        .iter()
        .map(|x| {
            let next = ids_a.len();
            *ids_a.entry(x).or_insert(next)
        })
        .collect();
    let lb: Vec<usize> = b
        .iter()
        .map(|x| {
            let next = ids_b.len();
            *ids_b.entry(x).or_insert(next)
        })
        .collect();
    let (ka, kb) = (ids_a.len(), ids_b.len());
    let mut joint = vec![vec![0usize; kb]; ka];
    let mut ca = vec![0usize; ka];
    let mut cb = vec![0usize; kb];
    for (&i, &j) in la.iter().zip(&lb) {
        joint[i][j] += 1;
        ca[i] += 1;
        cb[j] += 1;
    }
    let ha = entropy(ca.iter().copied(), n);
    let hb = entropy(cb.iter().copied(), n);
    match (ka == 1, kb == 1) {
        (true, true) => return Ok(1.0),
        (true, false) | (false, true) => return Ok(0.0),
        _ => {}
    }
    let mut mi = 0.0;
    for (i, row) in joint.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c > 0 {
                let pij = c as f64 / n;
                mi += pij * (pij * n * n / (ca[i] as f64 * cb[j] as f64)).ln();
            }
        }
    }
    Ok((2.0 * mi / (ha + hb)).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_and_permuted_labelings() {
        assert_eq!(nmi(&[0, 0, 1, 1, 2], &[0, 0, 1, 1, 2]).unwrap(), 1.0);
        assert!((nmi(&[0, 0, 1, 1], &[1, 1, 0, 0]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_entropies() {
        assert_eq!(nmi(&[7, 7, 7, 7], &[0, 1, 0, 1]).unwrap(), 0.0);
        assert_eq!(nmi(&[0, 1, 0, 1], &["x"; 4]).unwrap(), 0.0);
        assert_eq!(nmi(&[1, 1], &[2, 2]).unwrap(), 1.0);
        assert!(nmi(&[1, 2], &[1]).is_err());
    }

    #[test]
    fn independent_labelings_score_zero() {
        let a = [0, 0, 1, 1];
        let b = [0, 1, 0, 1];
        assert!(nmi(&a, &b).unwrap().abs() < 1e-15);
    }

    #[test]
    fn hand_computed_partial_agreement() {
        let a = [0, 0, 1, 1];
        let b = [0, 0, 0, 1];
        let ha = 2f64.ln();
        let hb = -(0.75 * 0.75f64.ln() + 0.25 * 0.25f64.ln());
        // Cells: (0,0)=2, (1,0)=1, (1,1)=1.
        let mi = 0.5 * (0.5f64 / (0.5 * 0.75)).ln()
            + 0.25 * (0.25f64 / (0.5 * 0.75)).ln()
            + 0.25 * (0.25f64 / (0.5 * 0.25)).ln();
        assert!((nmi(&a, &b).unwrap() - 2.0 * mi / (ha + hb)).abs() < 1e-14);
    }
}
