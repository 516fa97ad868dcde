use rand::Rng;

use super::{base_meta, BerMode, ExperimentConfig, ResultTable};
use crate::channel::ChannelRealization;
use crate::estimator::{ChannelEstimator, EstimatorNetwork, FixedEstimate, SplineEstimator};
use crate::numerics::{complex_normal, rng_stream, ComplexGrid};
use crate::ofdm::{
    assemble_subframe, equalize_and_demap, ls_pilot_estimates, qam_demap, qam_map, random_bits, rx_chain,
    rx_time_domain, tx_chain, DataSnr, FrameConfig, Modulation, Subframe,
};
use crate::phase_noise::PnSequence;
use crate::pncomp::{compensate, full_pipeline, FillPolicy, PnCompConfig, PnGrid, SampleSet};
use crate::{Error, Result};

const BITS: u64 = 1;
const NOISE: u64 = 2;
const PHASE: u64 = 3;

/// Seed for one role of one trial; shared by every sweep point so curves
/// use common random numbers.
fn trial_seed(base: u64, trial: usize, role: u64) -> u64 {
    rng_stream(base, ((trial as u64) << 4) | role).random()
}

/// One simulated subframe, received with and without phase noise under
/// the same noise draw.
pub struct TrialFrame {
    pub sub: Subframe,
    pub pn: PnSequence,
    pub y_pn: ComplexGrid,
    pub y_clean: ComplexGrid,
}

pub fn simulate_trial(
    cfg: &ExperimentConfig,
    frame: &FrameConfig,
    chan: &ChannelRealization,
    pn_set: usize,
    trial: usize,
) -> Result<TrialFrame> {
    let seed = cfg.sweep.eval_seed;
    let bit_seed = trial_seed(seed, trial, BITS);
    let sub = assemble_subframe(&random_bits(frame.data_bit_count(), bit_seed, 0), frame, bit_seed)?;
    let tx = tx_chain(&sub, frame);
    let noise = Some(trial_seed(seed, trial, NOISE));
    let pn = cfg.draw_pn(pn_set, trial_seed(seed, trial, PHASE))?;
    let y_pn = rx_chain(&tx, chan, &pn, noise, frame)?;
    let y_clean = rx_chain(&tx, chan, &PnSequence::zeros(tx.len()), noise, frame)?;
    Ok(TrialFrame { sub, pn, y_pn, y_clean })
}

fn first_pass(network: Option<&EstimatorNetwork>) -> &dyn ChannelEstimator {
    match network {
        Some(n) => n,
        None => &SplineEstimator,
    }
}

fn check_channels(cfg: &ExperimentConfig, channels: &[ChannelRealization]) -> Result<()> {
    if channels.is_empty() {
        return Err(Error::invalid("no test channels"));
    }
    if channels.iter().any(|c| c.freq_response.dims() != (cfg.frame.nc, cfg.frame.ns)) {
        return Err(Error::invalid("test channels do not match the frame"));
    }
    Ok(())
}

fn sweep_meta(cfg: &ExperimentConfig, table: &mut ResultTable, network: Option<&EstimatorNetwork>) {
    table.meta = base_meta(cfg, cfg.sweep.eval_seed);
    table.meta.insert(
        "first_pass".into(),
        if network.is_some() { "network" } else { "spline" }.into(),
    );
}

/// Channel-estimation MSE per (phase-noise set, pilot SNR). Data symbols
/// use Es/N0 equal to the pilot SNR; test subframe `t` uses channel
/// `t mod len`.
pub fn run_mse_experiment(
    cfg: &ExperimentConfig,
    network: Option<&EstimatorNetwork>,
    channels: &[ChannelRealization],
) -> Result<ResultTable> {
    check_channels(cfg, channels)?;
    let est = first_pass(network);
    let mut table = ResultTable::new(&[
        "pilot_snr_db",
        "pn_set",
        "pn_sigma_deg",
        "mse_first",
        "mse_refined",
        "mse_spline",
        "mse_no_pn",
        "trials",
    ]);
    for &set in &cfg.pn.sets {
        let comp = cfg.pncomp_config(set)?;
        for &snr in &cfg.sweep.pilot_snr_db {
            let frame = cfg.frame_config(snr, DataSnr::EsN0(snr))?;
            let mut acc = [0.0; 4];
            for t in 0..cfg.sweep.trials {
                let h = &channels[t % channels.len()];
                let tf = simulate_trial(cfg, &frame, h, set, t)?;
                let truth = &h.freq_response;
                let out = full_pipeline(&tf.y_pn, est, &tf.sub, &comp)?;
                let spline = SplineEstimator.estimate(&ls_pilot_estimates(&tf.y_pn, &tf.sub)?)?;
                let clean = est.estimate(&ls_pilot_estimates(&tf.y_clean, &tf.sub)?)?;
                acc[0] += out.h_first.mse(truth);
                acc[1] += out.h_refined.mse(truth);
                acc[2] += spline.mse(truth);
                acc[3] += clean.mse(truth);
            }
            let n = cfg.sweep.trials as f64;
            table.push_row(&[
                snr,
                set as f64,
                cfg.pn_sigma_deg(set)?,
                acc[0] / n,
                acc[1] / n,
                acc[2] / n,
                acc[3] / n,
                n,
            ])?;
        }
    }
    sweep_meta(cfg, &mut table, network);
    table.meta.insert(
        "mse_definition".into(),
        "plain mean |H_hat - H|^2 over the grid; channel power normalised to 1".into(),
    );
    Ok(table)
}

/// Bit-error rates per sweep point: first pass on `Y_f`, refined estimate
/// on the compensated `Y'_f`, and true channel without phase noise. Each
/// point runs at least `trials` subframes and continues until every
/// column has `min_errors` errors or `max_trials` is reached.
pub fn run_ber_experiment(
    cfg: &ExperimentConfig,
    network: Option<&EstimatorNetwork>,
    channels: &[ChannelRealization],
) -> Result<ResultTable> {
    check_channels(cfg, channels)?;
    let est = first_pass(network);
    let s = &cfg.sweep;
    let (x_name, xs) = match s.ber_mode {
        BerMode::EbN0 => ("ebn0_db", &s.ebn0_db),
        BerMode::PilotSnr => ("pilot_snr_db", &s.pilot_snr_db),
    };
    let mut table = ResultTable::new(&[
        x_name,
        "pn_set",
        "pn_sigma_deg",
        "ber_first",
        "ber_refined",
        "ber_perfect_csi",
        "errors_first",
        "errors_refined",
        "errors_perfect_csi",
        "bits",
        "trials",
    ]);
    for &set in &cfg.pn.sets {
        let comp = cfg.pncomp_config(set)?;
        for &x in xs {
            let (pilot, ebn0) = match s.ber_mode {
                BerMode::EbN0 => (s.ber_pilot_snr_db, x),
                BerMode::PilotSnr => (x, s.ber_ebn0_db),
            };
            let frame = cfg.frame_config(pilot, DataSnr::EbN0(ebn0))?;
            let (mut errs, mut bits, mut t) = ([0usize; 3], 0usize, 0usize);
            while t < s.max_trials && (t < s.trials || errs.iter().any(|&e| e < s.min_errors)) {
                let h = &channels[t % channels.len()];
                let tf = simulate_trial(cfg, &frame, h, set, t)?;
                let out = full_pipeline(&tf.y_pn, est, &tf.sub, &comp)?;
                errs[0] += equalize_and_demap(&tf.y_pn, &out.h_first, &tf.sub)?.bit_errors;
                errs[1] += equalize_and_demap(&out.y_comp, &out.h_refined, &tf.sub)?.bit_errors;
                errs[2] += equalize_and_demap(&tf.y_clean, &h.freq_response, &tf.sub)?.bit_errors;
                bits += tf.sub.data_bits.len();
                t += 1;
            }
            let b = bits as f64;
            table.push_row(&[
                x,
                set as f64,
                cfg.pn_sigma_deg(set)?,
                errs[0] as f64 / b,
                errs[1] as f64 / b,
                errs[2] as f64 / b,
                errs[0] as f64,
                errs[1] as f64,
                errs[2] as f64,
                b,
                t as f64,
            ])?;
        }
    }
    sweep_meta(cfg, &mut table, network);
    table.meta.insert(
        "ber_fixed".into(),
        match s.ber_mode {
            BerMode::EbN0 => format!("pilot_snr_db={}", s.ber_pilot_snr_db),
            BerMode::PilotSnr => format!("ebn0_db={}", s.ber_ebn0_db),
        },
    );
    Ok(table)
}

/// Bit errors of QAM over independent flat Rayleigh fades per symbol with
/// perfect channel knowledge. Returns `(errors, bits)`; at least `bits`
/// bits are simulated.
pub fn flat_rayleigh_ber(ebn0_db: f64, modulation: Modulation, bits: usize, seed: u64) -> Result<(usize, usize)> {
    let bps = modulation.bits_per_symbol();
    let amp = (bps as f64 * 10f64.powf(ebn0_db / 10.0)).sqrt();
    let block = 4096 * bps;
    let (mut errors, mut total, mut n) = (0, 0, 0u64);
    while total < bits {
        let b = random_bits(block, seed, 2 * n);
        let tx = qam_map(&b, modulation)?;
        let mut rng = rng_stream(seed, 2 * n + 1);
        let eq: Vec<_> = tx
            .iter()
            .map(|&s| {
                let h = complex_normal(&mut rng, 1.0);
                let noise = complex_normal(&mut rng, 1.0);
                (h * s * amp + noise) / h / amp
            })
            .collect();
        errors += qam_demap(&eq, modulation).iter().zip(&b).filter(|(a, b)| a != b).count();
        total += block;
        n += 1;
    }
    Ok((errors, total))
}

/// Bit errors over `trials` subframes for the compensation oracles.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OracleBer {
    pub bits: usize,
    /// True channel, no phase noise.
    pub no_pn: usize,
    /// True channel, phase noise removed with the true phase grid.
    pub true_grid: usize,
    /// True channel, phase noise left in place.
    pub uncompensated: usize,
    /// Full pipeline with the true channel as first pass, known symbols
    /// and phase estimation on every symbol and sample.
    pub pipeline: usize,
}

pub fn oracle_compensation_ber(
    cfg: &ExperimentConfig,
    channels: &[ChannelRealization],
    pn_set: usize,
    pilot_snr_db: f64,
    ebn0_db: f64,
    trials: usize,
) -> Result<OracleBer> {
    check_channels(cfg, channels)?;
    let frame = cfg.frame_config(pilot_snr_db, DataSnr::EbN0(ebn0_db))?;
    let comp = PnCompConfig {
        fill: FillPolicy::Known,
        samples: SampleSet::All,
        all_symbols: true,
        ..cfg.pncomp_config(pn_set)?
    };
    let (nc, ns, ncp) = (cfg.frame.nc, cfg.frame.ns, cfg.frame.n_cp);
    let mut out = OracleBer::default();
    for t in 0..trials {
        let h = &channels[t % channels.len()];
        let tf = simulate_trial(cfg, &frame, h, pn_set, t)?;
        let truth = &h.freq_response;
        let noise = Some(trial_seed(cfg.sweep.eval_seed, t, NOISE));
        let y_t = rx_time_domain(&tx_chain(&tf.sub, &frame), h, &tf.pn, noise, &frame)?;
        let (_, y_true) = compensate(&y_t, &PnGrid::from_sequence(&tf.pn.phases, nc, ns, ncp)?)?;
        let pipe = full_pipeline(&tf.y_pn, &FixedEstimate(truth.clone()), &tf.sub, &comp)?;
        out.no_pn += equalize_and_demap(&tf.y_clean, truth, &tf.sub)?.bit_errors;
        out.true_grid += equalize_and_demap(&y_true, truth, &tf.sub)?.bit_errors;
        out.uncompensated += equalize_and_demap(&tf.y_pn, truth, &tf.sub)?.bit_errors;
        out.pipeline += equalize_and_demap(&pipe.y_comp, truth, &tf.sub)?.bit_errors;
        out.bits += tf.sub.data_bits.len();
    }
    Ok(out)
}
