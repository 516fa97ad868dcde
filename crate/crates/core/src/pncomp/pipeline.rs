use super::{
    compensate, estimate_pn_samples_with, interpolate_pn_grid, predict_time_reference, InterpMode, PnEstimateSet,
    PnGrid, PnPrior,
};
use crate::estimator::ChannelEstimator;
use crate::numerics::{dft, ComplexGrid};
use crate::ofdm::{ls_pilot_estimates, qam_demap, qam_map, Subframe};
use crate::{Error, Result, C64};

/// What the reference signal assumes at data positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FillPolicy {
    /// Hard decisions from equalising with the first-pass estimate.
    DecisionDirected,
    /// Zeros; data acts as interference.
    PilotOnly,
    /// The transmitted symbols (oracle).
    Known,
}

/// Time samples at which phases are estimated within a symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleSet {
    /// Sample indices equal to the symbol's pilot subcarrier indices.
    PilotIndices,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PnCompConfig {
    pub fill: FillPolicy,
    pub samples: SampleSet,
    /// Estimate on every symbol rather than only pilot-bearing ones.
    pub all_symbols: bool,
    pub interp: InterpMode,
    pub prior: PnPrior,
    /// Receiver noise variance per time sample.
    pub noise_var: f64,
    pub threshold_rel: f64,
}

impl Default for PnCompConfig {
    fn default() -> Self {
        PnCompConfig {
            fill: FillPolicy::DecisionDirected,
            samples: SampleSet::PilotIndices,
            all_symbols: false,
            interp: InterpMode::Mmse,
            prior: PnPrior::default(),
            noise_var: 1.0,
            threshold_rel: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub h_first: ComplexGrid,
    pub h_refined: ComplexGrid,
    /// Compensated subframe in the frequency domain.
    pub y_comp: ComplexGrid,
    pub grid: PnGrid,
    pub estimates: PnEstimateSet,
}

fn fill_column(y_f: &ComplexGrid, h: &ComplexGrid, sub: &Subframe, i: usize, policy: FillPolicy) -> Result<Vec<C64>> {
    let nc = y_f.nc();
    if policy == FillPolicy::Known {
        return Ok(sub.x_f.column(i).to_vec());
    }
    let mut col = vec![C64::new(0.0, 0.0); nc];
    for (p, &(k, pi)) in sub.pattern.positions().iter().enumerate() {
        if pi == i {
            col[k] = sub.pilot_tx(p);
        }
    }
    if policy == FillPolicy::DecisionDirected {
        let ks: Vec<usize> = sub.data_positions.iter().filter(|p| p.1 == i).map(|p| p.0).collect();
        let eq: Vec<C64> = ks
            .iter()
            .map(|&k| {
                let hk = h.get(k, i);
                if hk.norm_sqr() == 0.0 {
                    C64::new(0.0, 0.0)
                } else {
                    y_f.get(k, i) / hk / sub.data_amplitude
                }
            })
            .collect();
        let decided = qam_map(&qam_demap(&eq, sub.modulation), sub.modulation)?;
        for (&k, s) in ks.iter().zip(decided) {
            col[k] = s * sub.data_amplitude;
        }
    }
    Ok(col)
}

/// Two-pass estimation: channel estimate, phase-noise estimation on the
/// selected symbols, interpolation, de-rotation and a second estimate from
/// the compensated pilots.
pub fn full_pipeline(
    y_f: &ComplexGrid,
    estimator: &dyn ChannelEstimator,
    sub: &Subframe,
    cfg: &PnCompConfig,
) -> Result<PipelineOutput> {
    let (nc, ns) = y_f.dims();
    let h_first = estimator.estimate(&ls_pilot_estimates(y_f, sub)?)?;
    if h_first.dims() != (nc, ns) {
        return Err(Error::invalid("estimator output does not match the received grid"));
    }
    let y_t: Vec<Vec<C64>> = (0..ns).map(|i| dft(y_f.column(i), true)).collect::<Result<_>>()?;
    let symbols: Vec<usize> = if cfg.all_symbols {
        (0..ns).collect()
    } else {
        sub.pattern.pilot_symbols()
    };
    let mut estimates = PnEstimateSet::default();
    for &i in &symbols {
        let x_fill = fill_column(y_f, &h_first, sub, i, cfg.fill)?;
        let s_t = predict_time_reference(h_first.column(i), &x_fill)?;
        let samples: Vec<usize> = match cfg.samples {
            SampleSet::PilotIndices => sub.pattern.subcarriers_in(i),
            SampleSet::All => (0..nc).collect(),
        };
        match estimate_pn_samples_with(&y_t[i], &s_t, &samples, i, cfg.threshold_rel) {
            Ok(set) => {
                estimates.entries.extend(set.entries);
                estimates.skipped.extend(set.skipped);
            }
            Err(Error::NoEstimates { .. }) => {
                estimates.skipped.extend(samples.iter().map(|&j| (i, j)));
            }
            Err(e) => return Err(e),
        }
    }
    if estimates.entries.is_empty() {
        return Err(Error::NoEstimates {
            symbol: symbols.first().copied().unwrap_or(0),
        });
    }
    let grid = interpolate_pn_grid(&estimates, nc, ns, cfg.interp, &cfg.prior, cfg.noise_var)?;
    let (_, y_comp) = compensate(&y_t, &grid)?;
    let h_refined = estimator.estimate(&ls_pilot_estimates(&y_comp, sub)?)?;
    Ok(PipelineOutput {
        h_first,
        h_refined,
        y_comp,
        grid,
        estimates,
    })
}
