//! Elementwise tensor comparison against a reference.

use crate::vm::tensor::TensorValue;

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub pass: bool,
    pub checked: usize,
    /// Flat index of the worst element, when any element was checked.
    pub worst_index: Option<usize>,
    pub worst_abs_err: f64,
    pub worst_actual: f64,
    pub worst_reference: f64,
}

/// Pass iff `|a - b| <= abs_tol + rel_tol * |b|` for every element, with `b`
/// as the reference. Bit-identical elements (including infinities and NaNs)
/// always pass.
pub fn compare_tensors(
    actual: &TensorValue,
    reference: &TensorValue,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<ComparisonReport, String> {
    if actual.shape != reference.shape {
        return Err(format!(
            "shape mismatch: {:?} vs {:?}",
            actual.shape, reference.shape
        ));
    }
    if actual.dtype() != reference.dtype() {
        return Err(format!(
            "dtype mismatch: {} vs {}",
            actual.dtype().name(),
            reference.dtype().name()
        ));
    }
    let n = actual.numel();
    let mut report = ComparisonReport {
        pass: true,
        checked: n,
        worst_index: None,
        worst_abs_err: 0.0,
        worst_actual: 0.0,
        worst_reference: 0.0,
    };
    for i in 0..n {
        let a = actual.data.get_f64(i);
        let b = reference.data.get_f64(i);
        if a.to_bits() == b.to_bits() {
            continue;
        }
        let err = (a - b).abs();
        let bound = abs_tol + rel_tol * b.abs();
        let elem_pass = err <= bound;
        // NaN err (inf - inf, or NaN inputs) fails and dominates.
        let worse = err.is_nan() || err > report.worst_abs_err;
        if worse {
            report.worst_abs_err = err;
            report.worst_index = Some(i);
            report.worst_actual = a;
            report.worst_reference = b;
        }
        if !elem_pass {
            report.pass = false;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(data: Vec<f32>) -> TensorValue {
        TensorValue::from_f32(vec![data.len()], data).unwrap()
    }

    #[test]
    fn identical_tensors_pass_with_zero_error() {
        let r = compare_tensors(&t(vec![1.0, -2.0]), &t(vec![1.0, -2.0]), 0.0, 0.0).unwrap();
        assert!(r.pass);
        assert_eq!(r.worst_abs_err, 0.0);
        assert_eq!(r.worst_index, None);
    }

    #[test]
    fn small_relative_error_passes() {
        let r = compare_tensors(&t(vec![1.0 + 1e-7]), &t(vec![1.0]), 1e-5, 0.0).unwrap();
        assert!(r.pass);
    }

    #[test]
    fn large_error_fails_at_index() {
        let r = compare_tensors(&t(vec![1.0, 1.1]), &t(vec![1.0, 1.0]), 1e-5, 0.0).unwrap();
        assert!(!r.pass);
        assert_eq!(r.worst_index, Some(1));
        assert!((r.worst_abs_err - 0.1).abs() < 1e-6);
    }

    #[test]
    fn shape_mismatch_is_error() {
        assert!(compare_tensors(&t(vec![1.0]), &t(vec![1.0, 2.0]), 0.0, 0.0).is_err());
    }

    #[test]
    fn matching_infinities_pass() {
        let r = compare_tensors(
            &t(vec![f32::INFINITY]),
            &t(vec![f32::INFINITY]),
            1e-5,
            1e-6,
        )
        .unwrap();
        assert!(r.pass);
    }
}
