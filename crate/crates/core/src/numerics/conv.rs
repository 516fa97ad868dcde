use crate::{Error, Result, C64};

/// `result[n] = Σ_k a[k]·b[(n−k) mod N]`.
pub fn circular_convolve(a: &[C64], b: &[C64]) -> Result<Vec<C64>> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "circular_convolve length mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    let mut out = vec![C64::new(0.0, 0.0); n];
    // Skip zero taps: channel columns are mostly zero padding.
    for (k, &ak) in a.iter().enumerate() {
        if ak == C64::new(0.0, 0.0) {
            continue;
        }
        for (m, &bm) in b.iter().enumerate() {
            out[(k + m) % n] += ak * bm;
        }
    }
    Ok(out)
}

/// Product of the circulant matrix with the given first column and `x`.
///
/// Row `n`, column `m` of the matrix holds `first_column[(n − m) mod N]`.
pub fn circulant_matvec(first_column: &[C64], x: &[C64]) -> Result<Vec<C64>> {
    if first_column.len() != x.len() {
        return Err(Error::invalid(format!(
            "circulant_matvec length mismatch: {} vs {}",
            first_column.len(),
            x.len()
        )));
    }
    let n = x.len();
    Ok((0..n)
        .map(|row| {
            (0..n)
                .map(|col| first_column[(row + n - col) % n] * x[col])
                .sum()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{dft, rng_stream, standard_normal};

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn random_vec(n: usize, seed: u64) -> Vec<C64> {
        let mut rng = rng_stream(seed, 7);
        (0..n)
            .map(|_| C64::new(standard_normal(&mut rng), standard_normal(&mut rng)))
            .collect()
    }

    #[test]
    fn hand_computed_pair() {
        let y = circular_convolve(&[c(1.0), c(2.0)], &[c(3.0), c(4.0)]).unwrap();
        assert_eq!(y, vec![c(11.0), c(10.0)]);
    }

    #[test]
    fn delta_is_identity() {
        let x = random_vec(9, 1);
        let mut delta = vec![c(0.0); 9];
        delta[0] = c(1.0);
        assert_eq!(circular_convolve(&x, &delta).unwrap(), x);
        assert_eq!(circulant_matvec(&delta, &x).unwrap(), x);
    }

    #[test]
    fn convolution_theorem() {
        let a = random_vec(8, 2);
        let b = random_vec(8, 3);
        // direct-sum oracle
        let direct: Vec<C64> = (0..8)
            .map(|n| (0..8).map(|k| a[k] * b[(n + 8 - k) % 8]).sum())
            .collect();
        let fa = dft(&a, false).unwrap();
        let fb = dft(&b, false).unwrap();
        let prod: Vec<C64> = fa.iter().zip(&fb).map(|(x, y)| x * y).collect();
        let via_freq: Vec<C64> = dft(&prod, true).unwrap().into_iter().map(|z| z * 8f64.sqrt()).collect();
        let got = circular_convolve(&a, &b).unwrap();
        for n in 0..8 {
            assert!((got[n] - direct[n]).norm() < 1e-10);
            assert!((got[n] - via_freq[n]).norm() < 1e-10);
        }
    }

    #[test]
    fn circulant_two_by_two_layout() {
        let (p0, p1) = (C64::new(0.3, 0.1), C64::new(-0.2, 0.7));
        let (a, b) = (C64::new(1.5, -1.0), C64::new(0.25, 2.0));
        let y = circulant_matvec(&[p0, p1], &[a, b]).unwrap();
        assert!((y[0] - (p0 * a + p1 * b)).norm() < 1e-15);
        assert!((y[1] - (p1 * a + p0 * b)).norm() < 1e-15);
    }

    #[test]
    fn circulant_matches_convolution() {
        let a = random_vec(16, 4);
        let x = random_vec(16, 5);
        let p = circulant_matvec(&a, &x).unwrap();
        let q = circular_convolve(&a, &x).unwrap();
        for (u, v) in p.iter().zip(&q) {
            assert!((u - v).norm() < 1e-12);
        }
    }

    #[test]
    fn length_mismatch_is_rejected() {
        assert!(circular_convolve(&[c(1.0)], &[c(1.0), c(2.0)]).is_err());
        assert!(circulant_matvec(&[c(1.0)], &[c(1.0), c(2.0)]).is_err());
    }

    #[test]
    fn circulant_is_linear() {
        let psi = random_vec(12, 6);
        let u = random_vec(12, 7);
        let v = random_vec(12, 8);
        let sum: Vec<C64> = u.iter().zip(&v).map(|(a, b)| a + b).collect();
        let lhs = circulant_matvec(&psi, &sum).unwrap();
        let ru = circulant_matvec(&psi, &u).unwrap();
        let rv = circulant_matvec(&psi, &v).unwrap();
        for n in 0..12 {
            assert!((lhs[n] - ru[n] - rv[n]).norm() < 1e-12);
        }
    }
}
