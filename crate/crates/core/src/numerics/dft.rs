use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::{Error, Result, C64};

thread_local! {
    static PLANS: RefCell<(FftPlanner<f64>, HashMap<(usize, bool), Arc<dyn Fft<f64>>>)> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANS.with(|cell| {
        let mut guard = cell.borrow_mut();
        let (planner, cache) = &mut *guard;
        cache
            .entry((n, inverse))
            .or_insert_with(|| {
                if inverse {
                    planner.plan_fft_inverse(n)
                } else {
                    planner.plan_fft_forward(n)
                }
            })
            .clone()
    })
}

fn transform(buf: &mut [C64], inverse: bool) {
    let n = buf.len();
    plan(n, inverse).process(buf);
    let scale = 1.0 / (n as f64).sqrt();
    for z in buf.iter_mut() {
        *z *= scale;
    }
}

/// Unitary DFT (scale 1/√N in both directions).
///
/// Forward uses the `e^{-j2πkn/N}` kernel, inverse `e^{+j2πkn/N}`.
pub fn dft(v: &[C64], inverse: bool) -> Result<Vec<C64>> {
    if v.is_empty() {
        return Err(Error::invalid("dft of empty vector"));
    }
    let mut out = v.to_vec();
    transform(&mut out, inverse);
    Ok(out)
}

/// Forward unitary DFT in place. No-op on empty input.
pub fn dft_in_place(buf: &mut [C64]) {
    if !buf.is_empty() {
        transform(buf, false);
    }
}

/// Inverse unitary DFT in place. No-op on empty input.
pub fn idft_in_place(buf: &mut [C64]) {
    if !buf.is_empty() {
        transform(buf, true);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{rng_stream, standard_normal};
    use std::f64::consts::PI;

    fn direct_dft(x: &[C64]) -> Vec<C64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(m, &v)| v * C64::from_polar(1.0, -2.0 * PI * (k * m) as f64 / n as f64))
                    .sum::<C64>()
                    / (n as f64).sqrt()
            })
            .collect()
    }

    fn random_vec(n: usize, seed: u64) -> Vec<C64> {
        let mut rng = rng_stream(seed, 0);
        (0..n)
            .map(|_| C64::new(standard_normal(&mut rng), standard_normal(&mut rng)))
            .collect()
    }

    #[test]
    fn impulse_maps_to_constant() {
        let x = [C64::new(1.0, 0.0), C64::default(), C64::default(), C64::default()];
        let y = dft(&x, false).unwrap();
        for z in y {
            assert!((z - C64::new(0.5, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn round_trip_is_identity() {
        let x = random_vec(72, 3);
        let back = dft(&dft(&x, false).unwrap(), true).unwrap();
        let err: f64 = x.iter().zip(&back).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let norm: f64 = x.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        assert!(err / norm < 1e-12);
    }

    #[test]
    fn parseval_and_direct_summation_agree() {
        let x = random_vec(72, 11);
        let fast = dft(&x, false).unwrap();
        let slow = direct_dft(&x);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).norm() < 1e-10);
        }
        let ex: f64 = x.iter().map(|z| z.norm_sqr()).sum();
        let ey: f64 = slow.iter().map(|z| z.norm_sqr()).sum();
        assert!(((ex - ey) / ex).abs() < 1e-10);
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(matches!(dft(&[], false), Err(Error::InvalidArgument(_))));
    }
}
