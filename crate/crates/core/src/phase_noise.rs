//! Oscillator phase-noise trajectories.
//!
//! Three generators are provided: i.i.d. Gaussian phases (used to augment
//! training data), PSD-shaped phases from the PLL model
//!
//! ```text
//! L(f) = B²·L0 / (B² + f²) · (1 + f_corner / f) + L_floor
//! ```
//!
//! and a Wiener (Brownian) phase walk with bandwidth β.

use std::f64::consts::PI;

use crate::numerics::{complex_normal, idft_in_place, rng_stream, standard_normal};
use crate::{Error, Result, C64};

/// Lower integration limit for σ, Hz. Keeps the flicker term finite.
pub const SIGMA_LOWER_HZ: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PnPsdParams {
    pub b_pll: f64,
    pub l0_dbc: f64,
    pub f_corner: f64,
    pub l_floor_dbc: f64,
}

impl PnPsdParams {
    pub fn new(b_pll: f64, l0_dbc: f64, f_corner: f64, l_floor_dbc: f64) -> Result<Self> {
        if !(b_pll > 0.0) || !(f_corner > 0.0) {
            return Err(Error::invalid("PLL bandwidth and corner frequency must be positive"));
        }
        if !l0_dbc.is_finite() && l0_dbc != f64::NEG_INFINITY {
            return Err(Error::invalid("in-band level must be finite or -inf"));
        }
        Ok(PnPsdParams {
            b_pll,
            l0_dbc,
            f_corner,
            l_floor_dbc,
        })
    }

    /// The three evaluation sets (1-based), labelled 2.78°, 5.46° and 10.85°.
    pub fn table_set(set: usize) -> Result<Self> {
        match set {
            1 => PnPsdParams::new(1e7, -95.0, 1e3, -150.0),
            2 => PnPsdParams::new(4e7, -95.0, 1e3, -150.0),
            3 => PnPsdParams::new(4e7, -89.0, 1e3, -150.0),
            _ => Err(Error::invalid(format!("unknown phase-noise set {set}"))),
        }
    }

    /// Nominal σ of [`PnPsdParams::table_set`] in degrees.
    pub fn table_sigma_deg(set: usize) -> Result<f64> {
        match set {
            1 => Ok(2.78),
            2 => Ok(5.46),
            3 => Ok(10.85),
            _ => Err(Error::invalid(format!("unknown phase-noise set {set}"))),
        }
    }

    pub fn l0_linear(&self) -> f64 {
        10f64.powf(self.l0_dbc / 10.0)
    }

    pub fn floor_linear(&self) -> f64 {
        10f64.powf(self.l_floor_dbc / 10.0)
    }

    /// One-sided PSD in rad²/Hz at offset `f` > 0.
    pub fn psd(&self, f: f64) -> f64 {
        let b2 = self.b_pll * self.b_pll;
        b2 * self.l0_linear() / (b2 + f * f) * (1.0 + self.f_corner / f) + self.floor_linear()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PnModel {
    None,
    Gaussian,
    Psd,
    Wiener,
}

/// Phase trajectory over a whole subframe, CP samples included.
#[derive(Debug, Clone, PartialEq)]
pub struct PnSequence {
    pub phases: Vec<f64>,
    pub model: PnModel,
    /// Realized standard deviation, degrees.
    pub sigma_deg: f64,
}

impl PnSequence {
    pub fn zeros(n: usize) -> Self {
        PnSequence {
            phases: vec![0.0; n],
            model: PnModel::None,
            sigma_deg: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    /// Phases of OFDM symbol `symbol` after CP removal.
    pub fn symbol_phases(&self, symbol: usize, nc: usize, n_cp: usize) -> &[f64] {
        let start = symbol * (nc + n_cp) + n_cp;
        &self.phases[start..start + nc]
    }

    fn from_phases(phases: Vec<f64>, model: PnModel) -> Self {
        let sigma_deg = std_dev(&phases).to_degrees();
        PnSequence {
            phases,
            model,
            sigma_deg,
        }
    }
}

fn std_dev(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
}

pub fn gen_gaussian_pn(sigma_deg: f64, n: usize, seed: u64) -> Result<PnSequence> {
    if !(sigma_deg >= 0.0) {
        return Err(Error::invalid("sigma must be non-negative"));
    }
    let s = sigma_deg.to_radians();
    let mut rng = rng_stream(seed, 0);
    let phases = (0..n).map(|_| s * standard_normal(&mut rng)).collect();
    Ok(PnSequence::from_phases(phases, PnModel::Gaussian))
}

/// `σ² = ∫_{1 Hz}^{B_PLL} L(f) df`, returned as σ in degrees.
pub fn pn_sigma_from_psd(params: &PnPsdParams) -> Result<f64> {
    if params.b_pll <= SIGMA_LOWER_HZ {
        return Ok(0.0);
    }
    // Integrate over u = ln f, where the integrand f·L(f) is smooth.
    let g = |u: f64| {
        let f = u.exp();
        f * params.psd(f)
    };
    let (a, b) = (SIGMA_LOWER_HZ.ln(), params.b_pll.ln());
    let var = adaptive_simpson(&g, a, b, 1e-12, 60)?;
    if !(var >= 0.0) {
        return Err(Error::Internal(format!("quadrature returned {var}")));
    }
    Ok(var.sqrt().to_degrees())
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64, max_depth: u32) -> Result<f64> {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> Option<f64> {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if delta.abs() <= 15.0 * tol {
            return Some(left + right + delta / 15.0);
        }
        if depth == 0 {
            return None;
        }
        Some(
            recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
                + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?,
        )
    }
    // Coarse composite pass to scale the absolute tolerance.
    let panels = 64;
    let h = (b - a) / panels as f64;
    let coarse: f64 = (0..panels)
        .map(|i| {
            let (x0, x1) = (a + i as f64 * h, a + (i + 1) as f64 * h);
            simpson(f(x0), f(0.5 * (x0 + x1)), f(x1), x0, x1)
        })
        .sum();
    let tol = rel_tol * coarse.abs().max(f64::MIN_POSITIVE) / panels as f64;
    let mut total = 0.0;
    for i in 0..panels {
        let (x0, x1) = (a + i as f64 * h, a + (i + 1) as f64 * h);
        let (f0, fm, f1) = (f(x0), f(0.5 * (x0 + x1)), f(x1));
        total += recurse(f, x0, x1, f0, fm, f1, simpson(f0, fm, f1, x0, x1), tol, max_depth).ok_or_else(
            || Error::Internal(format!("quadrature did not converge on [{:.3e}, {:.3e}] Hz", x0.exp(), x1.exp())),
        )?;
    }
    Ok(total)
}

/// Frequency-domain synthesis of a real phase sequence with one-sided PSD
/// `L(f)` sampled at `f_k = k·fs/n`, `1 ≤ k ≤ n/2` (DC bin zero).
///
/// With `target_sigma_deg` set the sequence is rescaled so its realized
/// standard deviation equals the target exactly.
pub fn gen_psd_pn(
    params: &PnPsdParams,
    n: usize,
    sample_rate: f64,
    target_sigma_deg: Option<f64>,
    seed: u64,
) -> Result<PnSequence> {
    if n < 2 {
        return Err(Error::invalid("need at least two samples"));
    }
    if !(sample_rate > 0.0) {
        return Err(Error::invalid("sample rate must be positive"));
    }
    if let Some(t) = target_sigma_deg {
        if !(t >= 0.0) {
            return Err(Error::invalid("target sigma must be non-negative"));
        }
        if t == 0.0 {
            return Ok(PnSequence {
                phases: vec![0.0; n],
                model: PnModel::Psd,
                sigma_deg: 0.0,
            });
        }
    }
    let mut rng = rng_stream(seed, 0);
    let df = sample_rate / n as f64;
    let mut spec = vec![C64::new(0.0, 0.0); n];
    let half = n / 2;
    for k in 1..=half {
        let p = params.psd(k as f64 * df) * df;
        if 2 * k == n {
            // Nyquist bin is real and unpaired.
            spec[k] = C64::new(p.sqrt() * standard_normal(&mut rng), 0.0);
        } else {
            // Each conjugate pair contributes 2·Re(·): variance p overall.
            let z = complex_normal(&mut rng, p / 2.0);
            spec[k] = z;
            spec[n - k] = z.conj();
        }
    }
    idft_in_place(&mut spec);
    let unscale = (n as f64).sqrt();
    let mut phases: Vec<f64> = spec.iter().map(|z| z.re * unscale).collect();
    if let Some(target) = target_sigma_deg {
        let s = std_dev(&phases);
        if s > 0.0 {
            let g = target.to_radians() / s;
            phases.iter_mut().for_each(|p| *p *= g);
        }
    }
    Ok(PnSequence::from_phases(phases, PnModel::Psd))
}

/// Brownian phase: `φ_0 = 0`, increments `N(0, 2πβ/fs)`.
pub fn gen_wiener_pn(beta_hz: f64, n: usize, sample_rate: f64, seed: u64) -> Result<PnSequence> {
    if !(beta_hz >= 0.0) {
        return Err(Error::invalid("beta must be non-negative"));
    }
    if !(sample_rate > 0.0) {
        return Err(Error::invalid("sample rate must be positive"));
    }
    let step = (2.0 * PI * beta_hz / sample_rate).sqrt();
    let mut rng = rng_stream(seed, 0);
    let mut phases = Vec::with_capacity(n);
    let mut phi = 0.0;
    for _ in 0..n {
        phases.push(phi);
        phi += step * standard_normal(&mut rng);
    }
    Ok(PnSequence::from_phases(phases, PnModel::Wiener))
}

#[cfg(test)]
mod tests {
    use super::*;

    // Closed form of ∫ L(f) df between f1 and f2.
    fn analytic_variance(p: &PnPsdParams, f1: f64, f2: f64) -> f64 {
        let (b, l0, fc) = (p.b_pll, p.l0_linear(), p.f_corner);
        let lorentz = b * l0 * ((f2 / b).atan() - (f1 / b).atan());
        let prim = |f: f64| f.ln() - 0.5 * (b * b + f * f).ln();
        let flicker = l0 * fc * (prim(f2) - prim(f1));
        lorentz + flicker + p.floor_linear() * (f2 - f1)
    }

    #[test]
    fn zero_sigma_gaussian_is_zero() {
        let s = gen_gaussian_pn(0.0, 100, 1).unwrap();
        assert!(s.phases.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn gaussian_moments() {
        let n = 1_000_000;
        let s = gen_gaussian_pn(1.58, n, 42).unwrap();
        assert!((s.sigma_deg / 1.58 - 1.0).abs() < 0.01);
        let mean = s.phases.iter().sum::<f64>() / n as f64;
        assert!(mean.abs() < 3.0 * 1.58f64.to_radians() / (n as f64).sqrt());
        assert!(gen_gaussian_pn(-1.0, 4, 0).is_err());
    }

    #[test]
    fn quadrature_matches_closed_form() {
        for set in 1..=3 {
            let p = PnPsdParams::table_set(set).unwrap();
            let q = pn_sigma_from_psd(&p).unwrap().to_radians().powi(2);
            let a = analytic_variance(&p, 1.0, p.b_pll);
            assert!(((q - a) / a).abs() < 1e-4, "set {set}: {q} vs {a}");
        }
    }

    #[test]
    fn lorentzian_only_check_for_set_one() {
        let p = PnPsdParams::table_set(1).unwrap();
        let s = pn_sigma_from_psd(&p).unwrap();
        let lorentz = (p.l0_linear() * p.b_pll * PI / 4.0).sqrt().to_degrees();
        assert!((lorentz - 2.85).abs() < 0.01);
        assert!((s / 2.78 - 1.0).abs() < 0.10);
    }

    #[test]
    fn floor_only_is_constant_integrand() {
        let p = PnPsdParams::new(1e6, f64::NEG_INFINITY, 1e3, -120.0).unwrap();
        let s = pn_sigma_from_psd(&p).unwrap().to_radians();
        let expect = (1e-12f64 * (1e6 - 1.0)).sqrt();
        assert!((s / expect - 1.0).abs() < 1e-6);
    }

    #[test]
    fn rescale_hits_target_exactly() {
        let p = PnPsdParams::table_set(3).unwrap();
        let s = gen_psd_pn(&p, 1232, 1.6e6, Some(10.85), 5).unwrap();
        assert!((s.sigma_deg / 10.85 - 1.0).abs() < 1e-10);
        let z = gen_psd_pn(&p, 1232, 1.6e6, Some(0.0), 5).unwrap();
        assert!(z.phases.iter().all(|&v| v == 0.0));
        assert!(gen_psd_pn(&p, 1232, 1.6e6, Some(-1.0), 5).is_err());
    }

    #[test]
    fn floor_only_synthesis_is_white() {
        let p = PnPsdParams::new(1e6, f64::NEG_INFINITY, 1e3, -120.0).unwrap();
        let s = gen_psd_pn(&p, 100_000, 1.6e6, None, 8).unwrap();
        let x = &s.phases;
        let num: f64 = x.windows(2).map(|w| w[0] * w[1]).sum();
        let den: f64 = x.iter().map(|v| v * v).sum();
        assert!((num / den).abs() < 0.05);
    }

    #[test]
    fn periodogram_follows_psd_shape() {
        let p = PnPsdParams::table_set(1).unwrap();
        let (n, fs) = (4096usize, 1.6e6);
        let mut avg = vec![0.0; n / 2 + 1];
        for seed in 0..100 {
            let s = gen_psd_pn(&p, n, fs, None, seed).unwrap();
            let mut buf: Vec<C64> = s.phases.iter().map(|&v| C64::new(v, 0.0)).collect();
            crate::numerics::dft_in_place(&mut buf);
            for k in 1..=n / 2 {
                // one-sided PSD estimate: 2|X_k|²/fs under the unitary DFT
                avg[k] += 2.0 * buf[k].norm_sqr() / fs / 100.0;
            }
        }
        let df = fs / n as f64;
        for k in 10..=n / 4 {
            let ratio_db = 10.0 * (avg[k] / p.psd(k as f64 * df)).log10();
            assert!(ratio_db.abs() < 3.0, "bin {k}: {ratio_db} dB");
        }
    }

    #[test]
    fn wiener_variance_grows_linearly() {
        let (beta, fs, n) = (1e3, 1.6e6, 1000usize);
        let z = gen_wiener_pn(0.0, 10, fs, 1).unwrap();
        assert!(z.phases.iter().all(|&v| v == 0.0));
        let trials = 10_000;
        let var: f64 = (0..trials)
            .map(|s| {
                let w = gen_wiener_pn(beta, n + 1, fs, s).unwrap();
                w.phases[n].powi(2)
            })
            .sum::<f64>()
            / trials as f64;
        let expect = n as f64 * 2.0 * PI * beta / fs;
        assert!((expect - 3.93).abs() < 0.01);
        assert!((var / expect - 1.0).abs() < 0.05, "{var} vs {expect}");
    }

    #[test]
    fn deterministic_given_seed() {
        let p = PnPsdParams::table_set(2).unwrap();
        assert_eq!(
            gen_psd_pn(&p, 256, 1.6e6, None, 3).unwrap(),
            gen_psd_pn(&p, 256, 1.6e6, None, 3).unwrap()
        );
        assert_eq!(gen_wiener_pn(10.0, 64, 1.6e6, 2).unwrap(), gen_wiener_pn(10.0, 64, 1.6e6, 2).unwrap());
    }

    #[test]
    fn symbol_phases_skip_cyclic_prefix() {
        let s = PnSequence::from_phases((0..30).map(|v| v as f64).collect(), PnModel::Psd);
        assert_eq!(s.symbol_phases(1, 8, 2), &[12.0, 13.0, 14.0, 15.0, 16.0, 17.0, 18.0, 19.0]);
    }
}
