//! Angle-based accuracy metrics and endmember matching.

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::datamodel::{AbundanceMatrix, SignatureMatrix};
use crate::error::{Result, UnmixError};
use crate::unmix::UnmixingResult;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    /// SAD of each true endmember against its matched estimate, in true-column order.
    pub per_endmember_sad: Vec<f64>,
    pub rms_sad: f64,
    pub rms_aad: f64,
    /// `matching[i]` is the estimated column paired with true column `i`.
    pub matching: Vec<usize>,
}

/// Spectral angle distance in radians.
///
/// Evaluated as `2 atan2(|a/|a| - b/|b||, |a/|a| + b/|b||)`, which equals the
/// arccos of the cosine but stays accurate near 0 and pi.
pub fn sad(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> Result<f64> {
    if a.len() != b.len() {
        return Err(UnmixError::invalid(format!("length mismatch: {} vs {}", a.len(), b.len())));
    }
    // fixed summation order so the result does not depend on memory layout
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(na > 0.0 && nb > 0.0) || !na.is_finite() || !nb.is_finite() {
        return Err(UnmixError::invalid("spectral angle of a zero or non-finite vector"));
    }
    let (mut diff, mut sum) = (0.0, 0.0);
    for (&x, &y) in a.iter().zip(b.iter()) {
        let (u, v) = (x / na, y / nb);
        diff += (u - v) * (u - v);
        sum += (u + v) * (u + v);
    }
    Ok(2.0 * diff.sqrt().atan2(sum.sqrt()))
}

/// Abundance angle distance in radians.
pub fn aad(s: ArrayView1<'_, f64>, t: ArrayView1<'_, f64>) -> Result<f64> {
    sad(s, t)
}

/// Pairing of true and estimated columns minimizing the summed SAD.
/// `result[i]` is the estimated column assigned to true column `i`.
pub fn match_endmembers(truth: &SignatureMatrix, estimate: &SignatureMatrix) -> Result<Vec<usize>> {
    let c = truth.endmembers();
    if estimate.endmembers() != c || estimate.bands() != truth.bands() {
        return Err(UnmixError::invalid(format!(
            "cannot match {}x{} signatures against {}x{}",
            estimate.bands(),
            estimate.endmembers(),
            truth.bands(),
            c
        )));
    }
    let mut cost = Array2::zeros((c, c));
    for i in 0..c {
        for j in 0..c {
            cost[[i, j]] = sad(truth.column(i), estimate.column(j))?;
        }
    }
    Ok(min_cost_assignment(&cost))
}

/// Hungarian method on a square cost matrix; returns the column for each row.
pub fn min_cost_assignment(cost: &Array2<f64>) -> Vec<usize> {
    let n = cost.nrows();
    assert_eq!(n, cost.ncols(), "assignment needs a square cost matrix");
    // 1-based potentials formulation; index 0 is a sentinel column
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r = owner[col0];
            let mut delta = f64::INFINITY;
            let mut next = 0;
            for col in 1..=n {
                if used[col] {
                    continue;
                }
                let reduced = cost[[r - 1, col - 1]] - u[r] - v[col];
                if reduced < minv[col] {
                    minv[col] = reduced;
                    way[col] = col0;
                }
                if minv[col] < delta {
                    delta = minv[col];
                    next = col;
                }
            }
            for col in 0..=n {
                if used[col] {
                    u[owner[col]] += delta;
                    v[col] -= delta;
                } else {
                    minv[col] -= delta;
                }
            }
            col0 = next;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col0];
            owner[col0] = owner[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for col in 1..=n {
        if owner[col] > 0 {
            assignment[owner[col] - 1] = col - 1;
        }
    }
    assignment
}

/// Matches endmembers, then scores signatures (rms over endmembers) and
/// abundances (rms over pixels).
pub fn evaluate(
    a_true: &SignatureMatrix,
    s_true: &AbundanceMatrix,
    a_est: &SignatureMatrix,
    s_est: &AbundanceMatrix,
) -> Result<EvaluationReport> {
    if s_true.endmembers() != a_true.endmembers()
        || s_est.endmembers() != a_est.endmembers()
        || s_true.pixels() != s_est.pixels()
    {
        return Err(UnmixError::invalid("truth and estimate are not conformable"));
    }
    let matching = match_endmembers(a_true, a_est)?;
    let c = matching.len();
    let per_endmember_sad = matching
        .iter()
        .enumerate()
        .map(|(i, &j)| sad(a_true.column(i), a_est.column(j)))
        .collect::<Result<Vec<_>>>()?;
    let rms_sad = (per_endmember_sad.iter().map(|v| v * v).sum::<f64>() / c as f64).sqrt();

    let s_matched = s_est.data().select(ndarray::Axis(0), &matching);
    let mut total = 0.0;
    for k in 0..s_true.pixels() {
        let angle = aad(s_true.column(k), s_matched.column(k))?;
        total += angle * angle;
    }
    let rms_aad = (total / s_true.pixels() as f64).sqrt();

    Ok(EvaluationReport {
        per_endmember_sad,
        rms_sad,
        rms_aad,
        matching,
    })
}

/// [`evaluate`] applied to the factors of a finished run.
pub fn evaluate_result(
    a_true: &SignatureMatrix,
    s_true: &AbundanceMatrix,
    result: &UnmixingResult,
) -> Result<EvaluationReport> {
    evaluate(a_true, s_true, &result.a, &result.s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    #[test]
    fn sad_examples() {
        let a = array![0.3, 0.1, 0.7];
        assert_eq!(sad(a.view(), a.view()).unwrap(), 0.0);
        assert!((sad(array![1.0, 0.0].view(), array![0.0, 1.0].view()).unwrap() - FRAC_PI_2).abs() < 1e-15);
        assert!((sad(array![1.0, 0.0].view(), array![1.0, 1.0].view()).unwrap() - FRAC_PI_4).abs() < 1e-15);
        assert!(sad(array![0.0, 0.0].view(), a.slice(ndarray::s![..2])).is_err());
    }

    #[test]
    fn aad_examples() {
        let s = array![0.2, 0.8];
        assert_eq!(aad(s.view(), s.view()).unwrap(), 0.0);
        assert!((aad(array![1.0, 0.0].view(), array![0.0, 1.0].view()).unwrap() - FRAC_PI_2).abs() < 1e-15);
        assert!((aad(array![0.5, 0.5].view(), array![1.0, 0.0].view()).unwrap() - FRAC_PI_4).abs() < 1e-15);
    }

    #[test]
    fn sad_stays_finite_for_collinear_vectors() {
        let a = array![0.1, 0.2, 0.3];
        let b = &a * 3.000000000000001;
        let v = sad(a.view(), b.view()).unwrap();
        assert!(v.is_finite() && v >= 0.0);
    }

    #[test]
    fn matching_identity_and_swap() {
        let a = SignatureMatrix::new(array![[0.9, 0.1, 0.4], [0.1, 0.8, 0.4], [0.2, 0.2, 0.9]]).unwrap();
        assert_eq!(match_endmembers(&a, &a).unwrap(), vec![0, 1, 2]);
        let swapped = a.select(&[1, 0, 2]).unwrap();
        assert_eq!(match_endmembers(&a, &swapped).unwrap(), vec![1, 0, 2]);
        let short = a.select(&[0, 1]).unwrap();
        assert!(match_endmembers(&a, &short).is_err());
    }

    #[test]
    fn hand_built_two_endmember_report() {
        // true columns e1, e2; estimates at 45 and 30 degrees off their partners
        let a_true = SignatureMatrix::new(array![[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]).unwrap();
        let a_est = SignatureMatrix::new(array![[1.0, 0.0], [0.0, 3f64.sqrt()], [1.0, 1.0]]).unwrap();
        let s = AbundanceMatrix::new(array![[0.25, 1.0], [0.75, 0.0]]).unwrap();
        let report = evaluate(&a_true, &s, &a_est, &s).unwrap();
        let expected = ((FRAC_PI_4.powi(2) + (std::f64::consts::PI / 6.0).powi(2)) / 2.0).sqrt();
        assert_eq!(report.matching, vec![0, 1]);
        assert!((report.rms_sad - expected).abs() < 1e-12);
        assert_eq!(report.rms_aad, 0.0);
    }

    #[test]
    fn perfect_and_permuted_recovery_score_zero() {
        let a = SignatureMatrix::new(array![[0.9, 0.1, 0.4], [0.1, 0.8, 0.4], [0.2, 0.2, 0.9]]).unwrap();
        let s = AbundanceMatrix::new(array![[0.2, 0.5], [0.3, 0.5], [0.5, 0.0]]).unwrap();
        let report = evaluate(&a, &s, &a, &s).unwrap();
        assert_eq!(report.rms_sad, 0.0);
        assert_eq!(report.rms_aad, 0.0);

        let order = [2, 0, 1];
        let a_perm = a.select(&order).unwrap();
        let s_perm = AbundanceMatrix::new(s.data().select(ndarray::Axis(0), &order)).unwrap();
        let report = evaluate(&a, &s, &a_perm, &s_perm).unwrap();
        assert_eq!(report.matching, vec![1, 2, 0]);
        assert_eq!(report.rms_sad, 0.0);
        assert_eq!(report.rms_aad, 0.0);
    }
}
