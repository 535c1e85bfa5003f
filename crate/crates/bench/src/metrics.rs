//! Test-set metrics.

use sdca_admm::data::Dataset;
use sdca_admm::error::{Error, Result};
use sdca_admm::losses::LossFamily;

/// Mean loss and classification error of the linear predictor w on a test
/// set. A zero margin counts as a misclassification, so w = 0 scores error
/// 1.0.
pub fn compute_test_metrics(w: &[f64], test: &Dataset, kind: LossFamily) -> Result<(f64, f64)> {
    if test.num_samples() == 0 {
        return Err(Error::InvalidConfig("empty test set".into()));
    }
    assert_eq!(w.len(), test.feature_dim(), "predictor dimension mismatch");
    let margins = test.design().matvec_transpose(w);
    let n = test.num_samples() as f64;
    let mut loss_sum = 0.0;
    let mut errors = 0usize;
    for (&m, &y) in margins.iter().zip(test.labels()) {
        loss_sum += kind.value(m, y);
        if y * m <= 0.0 {
            errors += 1;
        }
    }
    Ok((loss_sum / n, errors as f64 / n))
}
