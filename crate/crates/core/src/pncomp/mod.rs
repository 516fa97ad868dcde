//! Phase-noise estimation and compensation around a channel estimator:
//! per-sample phase estimates from a predicted time-domain reference,
//! interpolation over the grid, de-rotation, and a second estimator pass.

mod interp;
mod pipeline;

pub use interp::{interpolate_pn_grid, InterpMode, PnPrior};
pub use pipeline::{full_pipeline, FillPolicy, PipelineOutput, PnCompConfig, SampleSet};

use crate::numerics::{circulant_matvec, dft, dft_in_place, ComplexGrid};
use crate::{Error, Result, C64};

/// One phase observation at time sample `sample` of OFDM symbol `symbol`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PnEstimate {
    pub symbol: usize,
    pub sample: usize,
    /// Unit-modulus rotation estimate.
    pub psi: C64,
    /// Reliability `|s|²`.
    pub weight: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PnEstimateSet {
    pub entries: Vec<PnEstimate>,
    /// (symbol, sample) pairs dropped for a weak reference.
    pub skipped: Vec<(usize, usize)>,
}

/// Estimated phase trajectory, `nc` post-CP samples per symbol,
/// symbol-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PnGrid {
    pub nc: usize,
    pub ns: usize,
    pub phases: Vec<f64>,
}

impl PnGrid {
    pub fn zeros(nc: usize, ns: usize) -> Self {
        PnGrid {
            nc,
            ns,
            phases: vec![0.0; nc * ns],
        }
    }

    pub fn get(&self, sample: usize, symbol: usize) -> f64 {
        self.phases[symbol * self.nc + sample]
    }

    pub fn symbol(&self, symbol: usize) -> &[f64] {
        &self.phases[symbol * self.nc..(symbol + 1) * self.nc]
    }

    /// Post-CP phases of every symbol taken from a full-subframe sequence.
    pub fn from_sequence(phases: &[f64], nc: usize, ns: usize, n_cp: usize) -> Result<Self> {
        if phases.len() != (nc + n_cp) * ns {
            return Err(Error::invalid("phase sequence length does not match the subframe"));
        }
        let mut out = Vec::with_capacity(nc * ns);
        for i in 0..ns {
            let start = i * (nc + n_cp) + n_cp;
            out.extend_from_slice(&phases[start..start + nc]);
        }
        Ok(PnGrid { nc, ns, phases: out })
    }
}

/// Predicted PN-free received symbol `s = h ⊛ IDFT(x_fill)`, where the taps
/// are recovered from a frequency-response column as `IDFT(H)/√Nc`.
pub fn predict_time_reference(h_hat_col: &[C64], x_f_fill: &[C64]) -> Result<Vec<C64>> {
    if h_hat_col.len() != x_f_fill.len() {
        return Err(Error::invalid("channel column and fill vector lengths differ"));
    }
    let scale = 1.0 / (h_hat_col.len() as f64).sqrt();
    let taps: Vec<C64> = dft(h_hat_col, true)?.into_iter().map(|z| z * scale).collect();
    let x_t = dft(x_f_fill, true)?;
    circulant_matvec(&taps, &x_t)
}

/// Closed-form per-sample rotation `y/s` projected to unit modulus, at the
/// samples in `samples` whose reference clears `1e-3·rms(s)`.
pub fn estimate_pn_samples(y_t: &[C64], s_t: &[C64], samples: &[usize], symbol: usize) -> Result<PnEstimateSet> {
    estimate_pn_samples_with(y_t, s_t, samples, symbol, 1e-3)
}

pub fn estimate_pn_samples_with(
    y_t: &[C64],
    s_t: &[C64],
    samples: &[usize],
    symbol: usize,
    threshold_rel: f64,
) -> Result<PnEstimateSet> {
    if y_t.len() != s_t.len() {
        return Err(Error::invalid("received and reference lengths differ"));
    }
    if let Some(&j) = samples.iter().find(|&&j| j >= y_t.len()) {
        return Err(Error::invalid(format!("sample index {j} out of range")));
    }
    let rms = (s_t.iter().map(|z| z.norm_sqr()).sum::<f64>() / s_t.len().max(1) as f64).sqrt();
    let threshold = threshold_rel * rms;
    let mut set = PnEstimateSet::default();
    for &j in samples {
        let s = s_t[j];
        let ratio = y_t[j] / s;
        if !(s.norm() > threshold) || ratio.norm() == 0.0 || !ratio.is_finite() {
            set.skipped.push((symbol, j));
            continue;
        }
        set.entries.push(PnEstimate {
            symbol,
            sample: j,
            psi: ratio / ratio.norm(),
            weight: s.norm_sqr(),
        });
    }
    if set.entries.is_empty() {
        return Err(Error::NoEstimates { symbol });
    }
    Ok(set)
}

/// De-rotates every post-CP symbol by the grid phases and returns both the
/// compensated time samples and their per-symbol DFT.
pub fn compensate(y_t: &[Vec<C64>], grid: &PnGrid) -> Result<(Vec<Vec<C64>>, ComplexGrid)> {
    if y_t.len() != grid.ns || y_t.iter().any(|c| c.len() != grid.nc) {
        return Err(Error::invalid("received symbols do not match the phase grid"));
    }
    let comp: Vec<Vec<C64>> = y_t
        .iter()
        .enumerate()
        .map(|(i, col)| col.iter().zip(grid.symbol(i)).map(|(y, &p)| y * C64::from_polar(1.0, -p)).collect())
        .collect();
    let mut freq = comp.clone();
    freq.iter_mut().for_each(|c| dft_in_place(c));
    Ok((comp, ComplexGrid::from_columns(grid.nc, &freq)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{complex_normal, rng_stream};
    use std::f64::consts::PI;

    fn random_vec(n: usize, seed: u64) -> Vec<C64> {
        let mut rng = rng_stream(seed, 0);
        (0..n).map(|_| complex_normal(&mut rng, 1.0)).collect()
    }

    #[test]
    fn flat_channel_reference_is_time_signal() {
        let x_f = random_vec(16, 1);
        let h = vec![C64::new(1.0, 0.0); 16];
        let s = predict_time_reference(&h, &x_f).unwrap();
        let x_t = dft(&x_f, true).unwrap();
        for (a, b) in s.iter().zip(&x_t) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn perfect_reference_divides_to_one() {
        let taps = random_vec(3, 2);
        let x_f = random_vec(16, 3);
        let mut padded = taps.clone();
        padded.resize(16, C64::new(0.0, 0.0));
        let h_f: Vec<C64> = dft(&padded, false).unwrap().into_iter().map(|z| z * 4.0).collect();
        let x_t = dft(&x_f, true).unwrap();
        let y = crate::numerics::circular_convolve(&padded, &x_t).unwrap();
        let s = predict_time_reference(&h_f, &x_f).unwrap();
        for (a, b) in y.iter().zip(&s) {
            assert!((a / b - 1.0).norm() < 1e-10);
        }
    }

    #[test]
    fn zero_fill_gives_zero_reference() {
        let s = predict_time_reference(&random_vec(8, 4), &[C64::new(0.0, 0.0); 8]).unwrap();
        assert!(s.iter().all(|z| z.norm() == 0.0));
        assert!(predict_time_reference(&random_vec(8, 4), &random_vec(6, 5)).is_err());
    }

    #[test]
    fn identity_and_exact_rotation() {
        let s = random_vec(12, 6);
        let all: Vec<usize> = (0..12).collect();
        let set = estimate_pn_samples(&s, &s, &all, 0).unwrap();
        assert!(set.entries.iter().all(|e| (e.psi - 1.0).norm() < 1e-12));
        let rot = C64::from_polar(1.0, PI / 6.0);
        let y: Vec<C64> = s.iter().map(|z| z * rot).collect();
        let set = estimate_pn_samples(&y, &s, &all, 0).unwrap();
        assert!(set.entries.iter().all(|e| (e.psi.arg() - PI / 6.0).abs() < 1e-12));
    }

    #[test]
    fn scale_invariant_in_reference() {
        let s = random_vec(10, 7);
        let y = random_vec(10, 8);
        let all: Vec<usize> = (0..10).collect();
        let a = estimate_pn_samples(&y, &s, &all, 0).unwrap();
        let s3: Vec<C64> = s.iter().map(|z| z * 3.7).collect();
        let b = estimate_pn_samples(&y, &s3, &all, 0).unwrap();
        for (p, q) in a.entries.iter().zip(&b.entries) {
            assert!((p.psi - q.psi).norm() < 1e-12);
        }
    }

    #[test]
    fn weak_samples_are_skipped() {
        let mut s = random_vec(6, 9);
        s[2] = C64::new(1e-9, 0.0);
        let set = estimate_pn_samples(&s, &s, &[0, 2, 4], 3).unwrap();
        assert_eq!(set.entries.len(), 2);
        assert_eq!(set.skipped, vec![(3, 2)]);
        let zeros = vec![C64::new(0.0, 0.0); 6];
        assert!(matches!(
            estimate_pn_samples(&s, &zeros, &[0, 1], 5),
            Err(Error::NoEstimates { symbol: 5 })
        ));
    }

    #[test]
    fn phase_error_std_matches_perturbation_theory() {
        let p: f64 = 50.0;
        let s = vec![C64::new(p.sqrt(), 0.0); 100];
        let mut rng = rng_stream(10, 0);
        let all: Vec<usize> = (0..100).collect();
        let mut acc = 0.0;
        for _ in 0..1000 {
            let y: Vec<C64> = s.iter().map(|z| z + complex_normal(&mut rng, 1.0)).collect();
            for e in estimate_pn_samples(&y, &s, &all, 0).unwrap().entries {
                acc += e.psi.arg().powi(2);
            }
        }
        let std = (acc / 1e5).sqrt();
        let expect = (1.0 / (2.0 * p)).sqrt();
        assert!((std / expect - 1.0).abs() < 0.1, "{std} vs {expect}");
    }

    #[test]
    fn compensation_with_true_phases_inverts_rotation() {
        let clean: Vec<Vec<C64>> = (0..3).map(|i| random_vec(8, 20 + i)).collect();
        let mut rng = rng_stream(11, 0);
        let grid = PnGrid {
            nc: 8,
            ns: 3,
            phases: (0..24).map(|_| crate::numerics::standard_normal(&mut rng) * 0.3).collect(),
        };
        let rotated: Vec<Vec<C64>> = clean
            .iter()
            .enumerate()
            .map(|(i, c)| c.iter().zip(grid.symbol(i)).map(|(z, &p)| z * C64::from_polar(1.0, p)).collect())
            .collect();
        let (back, freq) = compensate(&rotated, &grid).unwrap();
        for (a, b) in back.iter().flatten().zip(clean.iter().flatten()) {
            assert!((a - b).norm() < 1e-12);
        }
        for (a, b) in back.iter().flatten().zip(rotated.iter().flatten()) {
            assert!((a.norm() - b.norm()).abs() < 1e-12);
        }
        let expect = dft(&clean[1], false).unwrap();
        for (k, z) in expect.iter().enumerate() {
            assert!((freq.get(k, 1) - z).norm() < 1e-12);
        }
        let (same, _) = compensate(&clean, &PnGrid::zeros(8, 3)).unwrap();
        assert_eq!(same, clean);
    }

    #[test]
    fn sequence_slicing_drops_prefix() {
        let seq: Vec<f64> = (0..12).map(|v| v as f64).collect();
        let g = PnGrid::from_sequence(&seq, 4, 2, 2).unwrap();
        assert_eq!(g.phases, vec![2.0, 3.0, 4.0, 5.0, 8.0, 9.0, 10.0, 11.0]);
    }
}
