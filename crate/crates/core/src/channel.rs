//! Doubly-selective multipath channel: ITU-R Vehicular A power-delay
//! profile, per-tap Rayleigh fading with Jakes time correlation, and block
//! fading per OFDM symbol.

use std::f64::consts::PI;

use rand::Rng;

use crate::numerics::{circular_convolve, dft_in_place, rng_stream, ComplexGrid, RngStream};
use crate::{Error, Result, C64};

/// Number of scatterers per tap in the sum-of-sinusoids generator.
pub const JAKES_SCATTERERS: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct PowerDelayProfile {
    delays_ns: Vec<f64>,
    powers_db: Vec<f64>,
}

impl PowerDelayProfile {
    pub fn new(delays_ns: Vec<f64>, powers_db: Vec<f64>) -> Result<Self> {
        if delays_ns.is_empty() || delays_ns.len() != powers_db.len() {
            return Err(Error::invalid("delay and power lists must be equal and non-empty"));
        }
        if delays_ns[0] < 0.0 || delays_ns.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("delays must be non-negative and strictly increasing"));
        }
        if powers_db.iter().chain(&delays_ns).any(|v| !v.is_finite()) {
            return Err(Error::invalid("profile values must be finite"));
        }
        Ok(PowerDelayProfile {
            delays_ns,
            powers_db,
        })
    }

    /// ITU-R M.1225 Vehicular A.
    pub fn vehicular_a() -> Self {
        PowerDelayProfile {
            delays_ns: vec![0.0, 310.0, 710.0, 1090.0, 1730.0, 2510.0],
            powers_db: vec![0.0, -1.0, -9.0, -10.0, -15.0, -20.0],
        }
    }

    pub fn delays_ns(&self) -> &[f64] {
        &self.delays_ns
    }

    pub fn powers_db(&self) -> &[f64] {
        &self.powers_db
    }
}

/// Sample-spaced profile: `powers[l]` is the linear power of tap `l`,
/// summing to one. Indices no delay maps to hold zero.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedProfile {
    pub powers: Vec<f64>,
}

impl QuantizedProfile {
    /// Channel length L (last tap index + 1).
    pub fn len(&self) -> usize {
        self.powers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.powers.is_empty()
    }
}

/// Maps each delay to the nearest sample and merges colliding taps.
pub fn quantize_pdp(pdp: &PowerDelayProfile, sample_rate: f64, nc: usize) -> Result<QuantizedProfile> {
    if !(sample_rate > 0.0) {
        return Err(Error::invalid("sample rate must be positive"));
    }
    let indices: Vec<usize> = pdp
        .delays_ns
        .iter()
        .map(|d| (d * 1e-9 * sample_rate).round() as usize)
        .collect();
    let last = *indices.iter().max().unwrap();
    if last >= nc {
        return Err(Error::invalid(format!(
            "quantized tap index {last} does not fit in {nc} subcarriers"
        )));
    }
    let mut powers = vec![0.0; last + 1];
    for (&idx, &p_db) in indices.iter().zip(&pdp.powers_db) {
        powers[idx] += 10f64.powf(p_db / 10.0);
    }
    let total: f64 = powers.iter().sum();
    powers.iter_mut().for_each(|p| *p /= total);
    Ok(QuantizedProfile { powers })
}

/// Everything needed to draw channel realizations for one subframe layout.
#[derive(Debug, Clone)]
pub struct ChannelSpec {
    pub profile: QuantizedProfile,
    pub doppler_hz: f64,
    pub nc: usize,
    pub ns: usize,
    pub sample_rate: f64,
    /// Symbol period including the cyclic prefix, seconds.
    pub symbol_duration: f64,
}

impl ChannelSpec {
    pub fn new(
        pdp: &PowerDelayProfile,
        doppler_hz: f64,
        nc: usize,
        ns: usize,
        n_cp: usize,
        sample_rate: f64,
    ) -> Result<Self> {
        if !(doppler_hz >= 0.0) {
            return Err(Error::invalid("doppler must be non-negative"));
        }
        let profile = quantize_pdp(pdp, sample_rate, nc)?;
        if profile.len() > n_cp.max(1) {
            return Err(Error::invalid(format!(
                "channel length {} exceeds cyclic prefix {n_cp}",
                profile.len()
            )));
        }
        Ok(ChannelSpec {
            profile,
            doppler_hz,
            nc,
            ns,
            sample_rate,
            symbol_duration: (nc + n_cp) as f64 / sample_rate,
        })
    }
}

/// One subframe of channel taps and the matching frequency response.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// L×Ns: tap `l` (row) of OFDM symbol `i` (column).
    pub taps: ComplexGrid,
    pub sample_rate: f64,
    pub doppler_hz: f64,
    /// Nc×Ns frequency response.
    pub freq_response: ComplexGrid,
}

impl ChannelRealization {
    pub fn from_taps(taps: ComplexGrid, nc: usize, sample_rate: f64, doppler_hz: f64) -> Result<Self> {
        let freq_response = frequency_response(&taps, nc)?;
        Ok(ChannelRealization {
            taps,
            sample_rate,
            doppler_hz,
            freq_response,
        })
    }

    pub fn nc(&self) -> usize {
        self.freq_response.nc()
    }

    pub fn ns(&self) -> usize {
        self.freq_response.ns()
    }

    /// Taps of symbol `i`, zero-padded to Nc.
    pub fn padded_taps(&self, i: usize) -> Vec<C64> {
        zero_pad(self.taps.column(i), self.nc())
    }
}

pub fn generate_channel(spec: &ChannelSpec, seed: u64) -> Result<ChannelRealization> {
    generate_channel_with(spec, &mut rng_stream(seed, 0))
}

/// Sum-of-sinusoids Rayleigh taps sampled at symbol centres.
pub fn generate_channel_with(spec: &ChannelSpec, rng: &mut RngStream) -> Result<ChannelRealization> {
    let l = spec.profile.len();
    let mut taps = ComplexGrid::zeros(l, spec.ns);
    let times: Vec<f64> = (0..spec.ns)
        .map(|i| (i as f64 + 0.5) * spec.symbol_duration)
        .collect();
    let mut freq = vec![0.0; JAKES_SCATTERERS];
    let mut phase = vec![0.0; JAKES_SCATTERERS];
    for (tap, &power) in spec.profile.powers.iter().enumerate() {
        if power == 0.0 {
            continue;
        }
        for m in 0..JAKES_SCATTERERS {
            let angle = rng.random::<f64>() * 2.0 * PI;
            freq[m] = 2.0 * PI * spec.doppler_hz * angle.cos();
            phase[m] = rng.random::<f64>() * 2.0 * PI;
        }
        let amp = (power / JAKES_SCATTERERS as f64).sqrt();
        for (i, &t) in times.iter().enumerate() {
            let sum: C64 = freq
                .iter()
                .zip(&phase)
                .map(|(w, p)| C64::from_polar(1.0, w * t + p))
                .sum();
            taps.set(tap, i, sum * amp);
        }
    }
    ChannelRealization::from_taps(taps, spec.nc, spec.sample_rate, spec.doppler_hz)
}

/// Column `i` is `Σ_l h_l e^{-j2πkl/Nc}`, i.e. √Nc times the unitary DFT of
/// the zero-padded taps.
pub fn frequency_response(taps: &ComplexGrid, nc: usize) -> Result<ComplexGrid> {
    if taps.nc() > nc {
        return Err(Error::invalid("more taps than subcarriers"));
    }
    let scale = (nc as f64).sqrt();
    let columns: Vec<Vec<C64>> = (0..taps.ns())
        .map(|i| {
            let mut col = zero_pad(taps.column(i), nc);
            dft_in_place(&mut col);
            col.iter_mut().for_each(|z| *z *= scale);
            col
        })
        .collect();
    ComplexGrid::from_columns(nc, &columns)
}

/// Post-CP-removal equivalent channel: circular convolution with the
/// zero-padded tap column.
pub fn apply_channel(x_t: &[C64], tap_column: &[C64]) -> Result<Vec<C64>> {
    circular_convolve(tap_column, x_t)
}

pub fn zero_pad(v: &[C64], n: usize) -> Vec<C64> {
    let mut out = v.to_vec();
    out.resize(n, C64::new(0.0, 0.0));
    out
}
