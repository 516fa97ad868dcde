use super::{FrameConfig, Subframe};
use crate::channel::{apply_channel, ChannelRealization};
use crate::numerics::{circulant_matvec, complex_normal, dft_in_place, idft_in_place, rng_stream, ComplexGrid};
use crate::phase_noise::PnSequence;
use crate::{Error, Result, C64};

/// Unitary IDFT per symbol, then cyclic prefix; symbols concatenated.
pub fn tx_chain(sub: &Subframe, config: &FrameConfig) -> Vec<C64> {
    let (nc, ncp) = (config.nc, config.n_cp);
    let mut out = Vec::with_capacity((nc + ncp) * config.ns);
    for i in 0..config.ns {
        let mut col = sub.x_f.column(i).to_vec();
        idft_in_place(&mut col);
        out.extend_from_slice(&col[nc - ncp..]);
        out.extend_from_slice(&col);
    }
    out
}

fn check_lengths(tx: &[C64], chan: &ChannelRealization, pn: &PnSequence, config: &FrameConfig) -> Result<()> {
    let need = config.samples_per_subframe();
    if tx.len() != need {
        return Err(Error::invalid(format!("tx stream has {} samples, expected {need}", tx.len())));
    }
    if pn.len() < need {
        return Err(Error::invalid(format!(
            "phase-noise sequence has {} samples, subframe needs {need}",
            pn.len()
        )));
    }
    if chan.nc() != config.nc || chan.ns() != config.ns {
        return Err(Error::invalid("channel realization does not match frame dimensions"));
    }
    Ok(())
}

fn noise_block(rng: &mut Option<crate::numerics::RngStream>, n: usize) -> Vec<C64> {
    match rng {
        Some(r) => (0..n).map(|_| complex_normal(r, 1.0)).collect(),
        None => vec![C64::new(0.0, 0.0); n],
    }
}

/// Post-CP-removal time-domain symbols `y_t = Φ_t (h_t ⊛ x_t + n_t)`.
///
/// `noise_seed = None` gives a noiseless receiver; otherwise noise is
/// CN(0, 1) per sample.
pub fn rx_time_domain(
    tx: &[C64],
    chan: &ChannelRealization,
    pn: &PnSequence,
    noise_seed: Option<u64>,
    config: &FrameConfig,
) -> Result<Vec<Vec<C64>>> {
    check_lengths(tx, chan, pn, config)?;
    let (nc, ncp) = (config.nc, config.n_cp);
    let mut rng = noise_seed.map(|s| rng_stream(s, 0));
    (0..config.ns)
        .map(|i| {
            let start = i * (nc + ncp) + ncp;
            let x_t = &tx[start..start + nc];
            let mut y = apply_channel(x_t, &chan.padded_taps(i))?;
            let n = noise_block(&mut rng, nc);
            for ((y, n), phi) in y.iter_mut().zip(n).zip(pn.symbol_phases(i, nc, ncp)) {
                *y = (*y + n) * C64::from_polar(1.0, *phi);
            }
            Ok(y)
        })
        .collect()
}

/// Received subframe `Y_f`: per-symbol unitary DFT of [`rx_time_domain`].
pub fn rx_chain(
    tx: &[C64],
    chan: &ChannelRealization,
    pn: &PnSequence,
    noise_seed: Option<u64>,
    config: &FrameConfig,
) -> Result<ComplexGrid> {
    let mut cols = rx_time_domain(tx, chan, pn, noise_seed, config)?;
    cols.iter_mut().for_each(|c| dft_in_place(c));
    ComplexGrid::from_columns(config.nc, &cols)
}

/// Same receiver built from the physical signal: linear convolution of the
/// whole CP-prefixed stream, phase noise on every sample, then CP removal.
/// Noise draws match [`rx_time_domain`] sample for sample.
pub fn rx_chain_linear(
    tx: &[C64],
    chan: &ChannelRealization,
    pn: &PnSequence,
    noise_seed: Option<u64>,
    config: &FrameConfig,
) -> Result<ComplexGrid> {
    check_lengths(tx, chan, pn, config)?;
    let (nc, ncp) = (config.nc, config.n_cp);
    let len = nc + ncp;
    let mut rng = noise_seed.map(|s| rng_stream(s, 0));
    let mut cols = Vec::with_capacity(config.ns);
    for i in 0..config.ns {
        let taps = chan.taps.column(i);
        let mut received = vec![C64::new(0.0, 0.0); len];
        for (m, r) in received.iter_mut().enumerate() {
            let n = i * len + m;
            for (l, &h) in taps.iter().enumerate() {
                if n >= l {
                    *r += h * tx[n - l];
                }
            }
        }
        let noise = noise_block(&mut rng, nc);
        let mut y: Vec<C64> = received[ncp..]
            .iter()
            .zip(noise)
            .enumerate()
            .map(|(m, (r, w))| (r + w) * C64::from_polar(1.0, pn.phases[i * len + ncp + m]))
            .collect();
        dft_in_place(&mut y);
        cols.push(y);
    }
    ComplexGrid::from_columns(nc, &cols)
}

/// Frequency-domain PN coefficients `Ψ_f` such that the unitary DFT of
/// `ψ_t ⊙ v` equals `Ψ_f ⊛ DFT(v)`: the unitary DFT of `e^{jφ}` scaled by
/// `1/√Nc`.
pub fn pn_spectrum(phases: &[f64]) -> Vec<C64> {
    let mut psi: Vec<C64> = phases.iter().map(|&p| C64::from_polar(1.0, p)).collect();
    dft_in_place(&mut psi);
    let s = 1.0 / (phases.len() as f64).sqrt();
    psi.iter_mut().for_each(|z| *z *= s);
    psi
}

/// Receiver evaluated entirely in the frequency domain:
/// `y_f = Θ_f (h_f ⊙ x_f + n_f)` with `Θ_f` the circulant of `Ψ_f`.
pub fn rx_chain_freq_model(
    sub: &Subframe,
    chan: &ChannelRealization,
    pn: &PnSequence,
    noise_seed: Option<u64>,
    config: &FrameConfig,
) -> Result<ComplexGrid> {
    let (nc, ncp) = (config.nc, config.n_cp);
    if pn.len() < config.samples_per_subframe() {
        return Err(Error::invalid("phase-noise sequence shorter than subframe"));
    }
    let mut rng = noise_seed.map(|s| rng_stream(s, 0));
    let mut cols = Vec::with_capacity(config.ns);
    for i in 0..config.ns {
        let mut n_f = noise_block(&mut rng, nc);
        dft_in_place(&mut n_f);
        let v: Vec<C64> = (0..nc)
            .map(|k| chan.freq_response.get(k, i) * sub.x_f.get(k, i) + n_f[k])
            .collect();
        let psi = pn_spectrum(pn.symbol_phases(i, nc, ncp));
        cols.push(circulant_matvec(&psi, &v)?);
    }
    ComplexGrid::from_columns(nc, &cols)
}
