use super::{Real, Tensor4};
use crate::{Error, Result};

/// Mean absolute error over every element and batch item, with its
/// gradient `sign(pred − target)/count` (sign(0) = 0).
pub fn l1_loss<T: Real>(pred: &Tensor4<T>, target: &Tensor4<T>) -> Result<(f64, Tensor4<T>)> {
    if pred.shape() != target.shape() {
        return Err(Error::invalid(format!(
            "loss shapes differ: {:?} vs {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    let count = pred.as_slice().len();
    if count == 0 {
        return Err(Error::invalid("empty tensors"));
    }
    let inv = T::from_f64(1.0 / count as f64);
    let mut grad = Tensor4::zeros(pred.shape());
    let mut sum = 0.0;
    for ((g, &p), &t) in grad.as_mut_slice().iter_mut().zip(pred.as_slice()).zip(target.as_slice()) {
        let d = (p - t).to_f64();
        sum += d.abs();
        *g = if d > 0.0 {
            inv
        } else if d < 0.0 {
            -inv
        } else {
            T::zero()
        };
    }
    Ok((sum / count as f64, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_tensors_have_zero_loss() {
        let a = Tensor4::from_vec([1, 1, 2, 2], vec![1.0f64, -2.0, 3.0, 0.5]).unwrap();
        let (l, g) = l1_loss(&a, &a).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hand_example() {
        let p = Tensor4::from_vec([1, 1, 1, 2], vec![3.0f64, -1.0]).unwrap();
        let t = Tensor4::from_vec([1, 1, 1, 2], vec![1.0f64, 1.0]).unwrap();
        let (l, g) = l1_loss(&p, &t).unwrap();
        assert_eq!(l, 2.0);
        assert_eq!(g.as_slice(), &[0.5, -0.5]);
    }

    #[test]
    fn batch_permutation_invariant() {
        let p = Tensor4::from_vec([2, 1, 1, 2], vec![1.0f64, 2.0, -3.0, 0.25]).unwrap();
        let q = Tensor4::from_vec([2, 1, 1, 2], vec![-3.0f64, 0.25, 1.0, 2.0]).unwrap();
        let t = Tensor4::zeros([2, 1, 1, 2]);
        assert_eq!(l1_loss(&p, &t).unwrap().0, l1_loss(&q, &t).unwrap().0);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let a = Tensor4::<f32>::zeros([1, 1, 2, 2]);
        let b = Tensor4::<f32>::zeros([1, 1, 4, 1]);
        assert!(l1_loss(&a, &b).is_err());
    }
}
