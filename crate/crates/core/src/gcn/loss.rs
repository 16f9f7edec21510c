use crate::error::{Error, Result};

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `−[y·log σ(z) + (1−y)·log(1−σ(z))]` in the form
/// `max(z, 0) − z·y + log(1 + e^{−|z|})`, which never overflows.
pub fn bce_with_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

/// Mean binary cross-entropy over the nodes in `mask`.
pub fn bce_loss(logits: &[f64], labels: &[u8], mask: &[usize]) -> Result<f64> {
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    if logits.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} logits for {} labels",
            logits.len(),
            labels.len()
        )));
    }
    let mut total = 0.0;
    for &i in mask {
        if i >= logits.len() {
            return Err(Error::Index {
                index: i,
                len: logits.len(),
            });
        }
        total += bce_with_logit(logits[i], labels[i] as f64);
    }
    Ok(total / mask.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_logit_is_ln2() {
        assert!((bce_loss(&[0.0], &[1], &[0]).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((bce_loss(&[0.0, 0.0], &[1, 0], &[0, 1]).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn large_logit_is_stable() {
        let l = bce_loss(&[20.0], &[1], &[0]).unwrap();
        assert!((l - (-20f64).exp().ln_1p()).abs() < 1e-24);
        assert!((l - 2.061_153_6e-9).abs() < 1e-15);
        assert!(bce_with_logit(1000.0, 0.0).is_finite());
        assert!(bce_with_logit(-1000.0, 1.0).is_finite());
        assert!((bce_with_logit(-1000.0, 1.0) - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn empty_mask_rejected() {
        assert!(matches!(bce_loss(&[0.0], &[1], &[]), Err(Error::EmptyMask)));
    }

    #[test]
    fn sigmoid_extremes() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(sigmoid(f64::INFINITY), 1.0);
        assert_eq!(sigmoid(f64::NEG_INFINITY), 0.0);
        assert!(sigmoid(-800.0) >= 0.0);
    }
}
