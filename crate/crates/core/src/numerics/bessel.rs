use std::f64::consts::PI;

/// Bessel function of the first kind, order zero.
///
/// Power series for |x| < 12, Hankel asymptotic expansion beyond.
pub fn bessel_j0(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 12.0 {
        let q = 0.25 * ax * ax;
        let mut term: f64 = 1.0;
        let mut sum: f64 = 1.0;
        let mut k = 1.0;
        while term.abs() > 1e-17 * sum.abs().max(1e-300) || k < 3.0 {
            term *= -q / (k * k);
            sum += term;
            k += 1.0;
            if k > 200.0 {
                break;
            }
        }
        sum
    } else {
        // P ~ Σ (-1)^m a_{2m} / x^{2m},  Q ~ Σ (-1)^m a_{2m+1} / x^{2m+1}
        // a_k = ((1)(9)(25)...((2k-1)^2)) / (k! 8^k)
        let mut p = 0.0;
        let mut q = 0.0;
        let mut a = 1.0;
        for k in 0..24 {
            if k > 0 {
                let odd = (2 * k - 1) as f64;
                a *= odd * odd / (k as f64 * 8.0 * ax);
            }
            // a_k(0) carries sign (-1)^k, so Q opens with -1/(8x).
            let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
            if k % 2 == 0 {
                p += sign * a;
            } else {
                q -= sign * a;
            }
            if a < 1e-17 {
                break;
            }
        }
        let chi = ax - PI / 4.0;
        (2.0 / (PI * ax)).sqrt() * (p * chi.cos() - q * chi.sin())
    }
}
